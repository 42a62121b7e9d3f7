//! Browser bindings: noise densities, critical radii and a small fit.

use anova_rgs::bench::{make_dataset, Scenario, Study};
use anova_rgs::estimator::{fit, predict_components};
use anova_rgs::kernels::{anova_gram, BaseKernel, InputLaw, KernelSpec};
use anova_rgs::linalg::Matrix;
use anova_rgs::noise::NoiseSpec;
use anova_rgs::rates::{critical_radius, ScaleMode};
use anova_rgs::rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn kernel_from(family: &str, param: f64) -> Result<BaseKernel, JsError> {
    Ok(match family {
        "brownian" => BaseKernel::Brownian,
        "sobolev1" => BaseKernel::Sobolev1,
        "gaussian" => BaseKernel::Gaussian { bandwidth: param },
        "matern32" => BaseKernel::Matern32 {
            length_scale: param,
        },
        other => return Err(JsError::new(&format!("unknown kernel family {other:?}"))),
    })
}

/// Unit-variance error density of shape `alpha` at each of `xs`.
#[wasm_bindgen]
pub fn noise_density(alpha: f64, xs: &[f64]) -> Result<Vec<f64>, JsError> {
    let spec = NoiseSpec::probe(alpha, 1.0).map_err(js_err)?;
    Ok(xs.iter().map(|&x| spec.error_density(x)).collect())
}

/// `count` unit-variance errors of shape `alpha`.
#[wasm_bindgen]
pub fn noise_sample(alpha: f64, count: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    let spec = NoiseSpec::probe(alpha, 1.0).map_err(js_err)?;
    Ok(anova_rgs::noise::sample_errors(&spec, count, seed))
}

/// Critical radius of a one-dimensional main effect at each sample size,
/// from the Gram spectrum of a uniform random design.
#[wasm_bindgen]
pub fn critical_radius_curve(
    family: &str,
    param: f64,
    sizes: &[u32],
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    let spec = KernelSpec::uniform(1, kernel_from(family, param)?);
    let groups = anova_rgs::kernels::enumerate_groups(1, 1).map_err(js_err)?;
    sizes
        .iter()
        .map(|&n| {
            let n = n as usize;
            let x = spec.sample_design(n, &mut rng::stream(seed, n as u64));
            let grams = anova_gram(&spec, &x, &groups).map_err(js_err)?;
            critical_radius(&grams.spectra[0], n, 1.0).map_err(js_err)
        })
        .collect()
}

#[derive(Serialize)]
struct Effect {
    group: String,
    grid: Vec<f64>,
    fitted: Vec<f64>,
    truth: Vec<f64>,
}

#[derive(Serialize)]
struct GroupSummary {
    group: String,
    hilbert_norm: f64,
    empirical_norm: f64,
    mu: f64,
    gamma: f64,
}

#[derive(Serialize)]
struct FitSummary {
    f0: f64,
    objective: f64,
    sweeps: usize,
    active: Vec<String>,
    groups: Vec<GroupSummary>,
    main_effects: Vec<Effect>,
}

/// Fit a two-input meta-model (main effects and the interaction) to
/// simulated data; returns a JSON summary with main-effect curves.
#[wasm_bindgen]
pub fn fit_demo(
    truth: &str,
    n: usize,
    alpha: f64,
    sigma: f64,
    seed: u64,
) -> Result<String, JsError> {
    let scenario = Scenario {
        truth: truth.to_string(),
        d: 2,
        n,
        alpha,
        sigma,
        replicates: 1,
        seed,
        kernel: BaseKernel::Brownian,
        law: InputLaw::default(),
        quadrature_order: 64,
        coordinates: None,
        max_order: 2,
    };
    let mut study = Study::new(scenario.clone());
    study.tuning.scale = ScaleMode::Noise;
    study.fit.radius = 10.0;
    let data = make_dataset(&scenario, 0).map_err(js_err)?;
    let spec: KernelSpec = scenario.kernel_spec();
    let grams = anova_gram(&spec, &data.x, &scenario.groups().map_err(js_err)?).map_err(js_err)?;
    let tuning = study
        .tuning
        .table(
            &grams.groups,
            &grams.spectra,
            2,
            n,
            sigma,
            study.fit.radius,
            None,
        )
        .map_err(js_err)?;
    let result = fit(&data.y, &grams, &tuning, &study.fit).map_err(js_err)?;
    let model = &result.model;
    let truth_fn = scenario.truth().map_err(js_err)?;

    let grid: Vec<f64> = (0..=60).map(|i| i as f64 / 60.0).collect();
    let rows: Vec<Vec<f64>> = grid.iter().map(|&t| vec![t, t]).collect();
    let x_new = Matrix::from_rows(&rows).map_err(js_err)?;
    let comps = predict_components(model, &spec, &x_new, &data.x).map_err(js_err)?;
    let mut main_effects = Vec::new();
    for (k, g) in model.groups.iter().enumerate() {
        if g.order() != 1 {
            continue;
        }
        main_effects.push(Effect {
            group: g.to_string(),
            grid: grid.clone(),
            fitted: comps[k].clone(),
            truth: rows.iter().map(|x| truth_fn.component(g, x)).collect(),
        });
    }
    let summary = FitSummary {
        f0: model.f0,
        objective: result.objective(),
        sweeps: result.sweeps_used,
        active: result.active_set.iter().map(|g| g.to_string()).collect(),
        groups: model
            .groups
            .iter()
            .enumerate()
            .map(|(k, g)| GroupSummary {
                group: g.to_string(),
                hilbert_norm: model.norms[k].hilbert,
                empirical_norm: model.norms[k].empirical,
                mu: tuning.entries[k].mu,
                gamma: tuning.entries[k].gamma,
            })
            .collect(),
        main_effects,
    };
    serde_json::to_string(&summary).map_err(js_err)
}
