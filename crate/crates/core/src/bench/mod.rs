//! Synthetic studies: data generation, risk metrics, rate sweeps and
//! oracle-inequality diagnostics.

mod truth;

pub use truth::{
    expression_for, Basis, Truth, ADDITIVE_SINE, SINE_PLUS_INTERACTION, SPARSE_POLYNOMIAL,
};

use std::fmt::Write as _;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::estimator::{fit, fitted_values, predict, FitConfig, FitResult, MetaModel};
use crate::kernels::{
    anova_gram, enumerate_groups, BaseKernel, CoordinateSpec, GramSet, GroupIndex, InputLaw,
    KernelSpec,
};
use crate::linalg::{dot, norm2, Matrix};
use crate::noise::NoiseSpec;
use crate::rates::{TuningConfig, TuningTable};
use crate::rng::{self, streams};

fn default_quadrature_order() -> usize {
    64
}

/// One simulation setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// `additive_sine`, `sine_plus_interaction`, `sparse_polynomial` or an expression.
    pub truth: String,
    pub d: usize,
    pub n: usize,
    pub alpha: f64,
    pub sigma: f64,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Base kernel shared by all coordinates unless `coordinates` is given.
    pub kernel: BaseKernel,
    #[serde(default)]
    pub law: InputLaw,
    #[serde(default = "default_quadrature_order")]
    pub quadrature_order: usize,
    /// Per-coordinate kernels and laws, overriding `kernel` and `law`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<Vec<CoordinateSpec>>,
    pub max_order: usize,
}

impl Scenario {
    pub fn kernel_spec(&self) -> KernelSpec {
        let coordinates = match &self.coordinates {
            Some(c) => c.clone(),
            None => vec![
                CoordinateSpec {
                    kernel: self.kernel,
                    law: self.law,
                };
                self.d
            ],
        };
        KernelSpec {
            coordinates,
            quadrature_order: self.quadrature_order,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 {
            return domain(format!("scenario n must be >= 8, got {}", self.n));
        }
        if self.replicates == 0 {
            return domain("scenario needs at least one replicate");
        }
        if !(self.alpha > 2.0) {
            return domain(format!("scenario alpha must exceed 2, got {}", self.alpha));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return domain(format!(
                "scenario sigma must be finite and >= 0, got {}",
                self.sigma
            ));
        }
        if let Some(c) = &self.coordinates {
            if c.len() != self.d {
                return Err(Error::Dimension {
                    what: "scenario coordinates",
                    expected: self.d,
                    got: c.len(),
                });
            }
        }
        let spec = self.kernel_spec();
        spec.validate()?;
        enumerate_groups(self.d, self.max_order)?;
        Truth::parse(&self.truth, &spec)?;
        Ok(())
    }

    pub fn truth(&self) -> Result<Truth> {
        Truth::parse(&self.truth, &self.kernel_spec())
    }

    pub fn groups(&self) -> Result<Vec<GroupIndex>> {
        enumerate_groups(self.d, self.max_order)
    }
}

/// One replicate's data.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub m_values: Vec<f64>,
}

impl Dataset {
    /// CSV with columns `x1..xd, y, m`.
    pub fn to_csv(&self) -> String {
        let d = self.x.cols();
        let mut s = String::new();
        for a in 1..=d {
            let _ = write!(s, "x{a},");
        }
        s.push_str("y,m\n");
        for i in 0..self.x.rows() {
            for &v in self.x.row(i) {
                let _ = write!(s, "{},", fmt_f64(v));
            }
            let _ = writeln!(s, "{},{}", fmt_f64(self.y[i]), fmt_f64(self.m_values[i]));
        }
        s
    }

    /// Parse the CSV written by [`Dataset::to_csv`]; the `m` column is optional
    /// and `#` lines are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Config("empty dataset file".into()))?
            .split(',')
            .map(str::trim)
            .collect();
        let y_col = header
            .iter()
            .position(|h| *h == "y")
            .ok_or_else(|| Error::Config("dataset has no y column".into()))?;
        let m_col = header.iter().position(|h| *h == "m");
        let x_cols: Vec<usize> = (0..header.len())
            .filter(|&j| header[j].starts_with('x'))
            .collect();
        if x_cols.is_empty() {
            return Err(Error::Config("dataset has no x columns".into()));
        }
        let mut rows = Vec::new();
        let mut y = Vec::new();
        let mut m = Vec::new();
        for (ln, line) in lines.enumerate() {
            let f: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("dataset row {}: {e}", ln + 2)))?;
            if f.len() != header.len() {
                return Err(Error::Config(format!(
                    "dataset row {} has {} fields",
                    ln + 2,
                    f.len()
                )));
            }
            rows.push(x_cols.iter().map(|&j| f[j]).collect::<Vec<_>>());
            y.push(f[y_col]);
            m.push(m_col.map_or(f64::NAN, |j| f[j]));
        }
        Ok(Self {
            x: Matrix::from_rows(&rows)?,
            y,
            m_values: m,
        })
    }
}

/// IEEE-754 double with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `X` i.i.d. from the input law, `Y = m(X) + σ ε`; deterministic in `(seed, replicate)`.
pub fn make_dataset(scenario: &Scenario, replicate: u64) -> Result<Dataset> {
    scenario.validate()?;
    let spec = scenario.kernel_spec();
    let truth = scenario.truth()?;
    let mut design_rng = rng::stream(scenario.seed, streams::of(replicate, streams::DESIGN));
    let x = spec.sample_design(scenario.n, &mut design_rng);
    let m_values: Vec<f64> = (0..x.rows()).map(|i| truth.eval(x.row(i))).collect();
    let noise = NoiseSpec::new(scenario.alpha, scenario.sigma)?;
    let mut noise_rng = rng::stream(scenario.seed, streams::of(replicate, streams::NOISE));
    let eps = noise.sample_errors_with(scenario.n, &mut noise_rng);
    let y = if scenario.sigma == 0.0 {
        m_values.clone()
    } else {
        m_values
            .iter()
            .zip(&eps)
            .map(|(m, e)| m + scenario.sigma * e)
            .collect()
    };
    Ok(Dataset { x, y, m_values })
}

/// `(1/n) Σ (m(Xᵢ) - f̂(Xᵢ))²`.
pub fn empirical_risk(m_values: &[f64], model: &MetaModel, grams: &GramSet) -> Result<f64> {
    if m_values.len() != grams.n() {
        return Err(Error::Dimension {
            what: "m values",
            expected: grams.n(),
            got: m_values.len(),
        });
    }
    Ok(mean_sq_diff(m_values, &fitted_values(model, grams)))
}

fn mean_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

/// Monte-Carlo `‖m - f̂‖₂²` over fresh inputs, with its standard error.
pub fn l2_risk(
    truth: &Truth,
    model: &MetaModel,
    spec: &KernelSpec,
    x_train: &Matrix,
    n_mc: usize,
    seed: u64,
    stream: u64,
) -> Result<(f64, f64)> {
    if n_mc < 1000 {
        return domain(format!("n_mc must be >= 1000, got {n_mc}"));
    }
    let mut r = rng::stream(seed, stream);
    let u = spec.sample_design(n_mc, &mut r);
    let f = predict(model, spec, &u, x_train)?;
    let sq: Vec<f64> = (0..n_mc)
        .map(|i| (truth.eval(u.row(i)) - f[i]).powi(2))
        .collect();
    let mean = sq.iter().sum::<f64>() / n_mc as f64;
    let var = sq.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n_mc as f64 - 1.0);
    Ok((mean, (var / n_mc as f64).sqrt()))
}

/// A comparison function `f` for the oracle inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub support: Vec<GroupIndex>,
    /// `‖m - f‖_n²`.
    pub bias: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleGap {
    pub ratio: f64,
    pub denominator: f64,
}

/// `‖m - f̂‖_n² / min_f (‖m - f‖_n² + Σ_{v∈S_f} (μ_v + γ_v²))`.
pub fn oracle_gap(
    empirical_risk: f64,
    candidates: &[Candidate],
    tuning: &TuningTable,
) -> Result<OracleGap> {
    if candidates.is_empty() {
        return domain("oracle gap needs at least one candidate");
    }
    let mut best = f64::INFINITY;
    for c in candidates {
        let mut pen = 0.0;
        for g in &c.support {
            let e = tuning
                .get(g)
                .ok_or_else(|| Error::Domain(format!("tuning table has no entry for group {g}")))?;
            pen += e.mu + e.gamma * e.gamma;
        }
        best = best.min(c.bias + pen);
    }
    Ok(OracleGap {
        ratio: empirical_risk / best,
        denominator: best,
    })
}

/// Candidates `m₀ + Σ_{v∈S} m_v` for every subset `S` of the true support that
/// the estimation groups can represent.
pub fn truth_candidates(
    truth: &Truth,
    x: &Matrix,
    m_values: &[f64],
    groups: &[GroupIndex],
) -> Vec<Candidate> {
    let support: Vec<GroupIndex> = truth
        .support()
        .into_iter()
        .filter(|g| groups.contains(g))
        .collect();
    let comps: Vec<Vec<f64>> = support
        .iter()
        .map(|g| {
            (0..x.rows())
                .map(|i| truth.component(g, x.row(i)))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(1 << support.len());
    for mask in 0u32..(1u32 << support.len()) {
        let mut f = vec![truth.intercept(); x.rows()];
        let mut s = Vec::new();
        for (k, g) in support.iter().enumerate() {
            if mask & (1 << k) != 0 {
                s.push(g.clone());
                for (fi, c) in f.iter_mut().zip(&comps[k]) {
                    *fi += c;
                }
            }
        }
        out.push(Candidate {
            support: s,
            bias: mean_sq_diff(m_values, &f),
        });
    }
    out
}

/// Sides of the penalty decomposability inequality on one fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposability {
    /// `Σ_{v∉S} (μ_v ‖f̂_v‖_H + γ_v ‖f̂_v‖_n)`.
    pub lhs: f64,
    /// `3 Σ_{v∈S} (μ_v ‖f̂_v - m_v‖_H + γ_v ‖f̂_v - m_v‖_n)`, Hilbert norms
    /// through the minimum-norm interpolant of `m_v` on the design.
    pub rhs: f64,
    pub holds: bool,
}

pub fn decomposability(
    truth: &Truth,
    model: &MetaModel,
    grams: &GramSet,
    tuning: &TuningTable,
) -> Result<Decomposability> {
    let support = truth.support();
    let n = grams.n();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for (v, g) in grams.groups.iter().enumerate() {
        let e = tuning
            .get(g)
            .ok_or_else(|| Error::Domain(format!("tuning table has no entry for group {g}")))?;
        let fhat = grams.grams[v].matvec(&model.theta[v]);
        if !support.contains(g) {
            lhs += e.mu * model.norms[v].hilbert + e.gamma * model.norms[v].empirical;
            continue;
        }
        let mv: Vec<f64> = (0..n)
            .map(|i| truth.component(g, grams.design.row(i)))
            .collect();
        let diff: Vec<f64> = fhat.iter().zip(&mv).map(|(a, b)| a - b).collect();
        let eig = &grams.eigen[v];
        let max = eig.values.first().copied().unwrap_or(0.0);
        // β = Λ^{-1/2} Uᵀ (f̂ - m_v) on the retained eigendirections
        let mut h2 = 0.0;
        for (k, &l) in eig.values.iter().enumerate() {
            if !(l > 1e-9 * max && l > 0.0) {
                break;
            }
            let u = eig.vectors.column(k);
            h2 += dot(&u, &diff).powi(2) / l;
        }
        rhs += e.mu * h2.sqrt() + e.gamma * norm2(&diff) / (n as f64).sqrt();
    }
    rhs *= 3.0;
    Ok(Decomposability {
        lhs,
        rhs,
        holds: lhs <= rhs,
    })
}

fn default_n_mc() -> usize {
    2000
}

fn default_n_grid() -> Vec<usize> {
    vec![64, 128, 256, 512, 1024]
}

/// Scenario plus the tuning and solver settings used for every replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Study {
    pub scenario: Scenario,
    #[serde(default)]
    pub tuning: TuningConfig,
    #[serde(default)]
    pub fit: FitConfig,
    /// Sample sizes for rate sweeps.
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<usize>,
    /// Fresh inputs per replicate for `‖m - f̂‖₂²`.
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
}

impl Study {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            tuning: TuningConfig::default(),
            fit: FitConfig::default(),
            n_grid: default_n_grid(),
            n_mc: default_n_mc(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.fit.validate()?;
        self.tuning
            .params(self.scenario.d, self.scenario.n)
            .validate()?;
        if self.n_mc < 1000 {
            return domain(format!("n_mc must be >= 1000, got {}", self.n_mc));
        }
        Ok(())
    }

    fn at_n(&self, n: usize) -> Study {
        let mut s = self.clone();
        s.scenario.n = n;
        s
    }
}

/// Everything recorded for one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: u64,
    pub n: usize,
    pub empirical_risk: f64,
    pub l2_risk: f64,
    pub l2_se: f64,
    pub support: Vec<GroupIndex>,
    pub support_exact: bool,
    pub oracle_ratio: f64,
    pub oracle_denominator: f64,
    pub decomposability_lhs: f64,
    pub decomposability_rhs: f64,
    pub decomposable: bool,
    pub objective: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub binding: usize,
    pub restarts: usize,
    /// Mean `ν` over the estimation groups.
    pub nu_mean: f64,
}

/// Output of one replicate, including the artifacts behind the record.
#[derive(Debug, Clone)]
pub struct ReplicateRun {
    pub record: ReplicateRecord,
    pub dataset: Dataset,
    pub grams: GramSet,
    pub tuning: TuningTable,
    pub fit: FitResult,
}

pub fn run_replicate(study: &Study, replicate: u64) -> Result<ReplicateRun> {
    let sc = &study.scenario;
    let data = make_dataset(sc, replicate)?;
    let spec = sc.kernel_spec();
    let truth = sc.truth()?;
    let groups = sc.groups()?;
    let grams = anova_gram(&spec, &data.x, &groups)?;
    let support = truth.support();
    let tuning = study.tuning.table(
        &grams.groups,
        &grams.spectra,
        sc.d,
        sc.n,
        sc.sigma,
        study.fit.radius,
        Some(&support),
    )?;
    let cfg = FitConfig {
        seed: sc.seed ^ replicate.wrapping_mul(0x9E37_79B9_7F4A_7C15),
        ..study.fit
    };
    let result = fit(&data.y, &grams, &tuning, &cfg)?;
    let emp = empirical_risk(&data.m_values, &result.model, &grams)?;
    let (l2, l2_se) = l2_risk(
        &truth,
        &result.model,
        &spec,
        &data.x,
        study.n_mc,
        sc.seed,
        streams::of(replicate, streams::MONTE_CARLO),
    )?;
    let candidates = truth_candidates(&truth, &data.x, &data.m_values, &grams.groups);
    let gap = oracle_gap(emp, &candidates, &tuning)?;
    let dec = decomposability(&truth, &result.model, &grams, &tuning)?;
    let nu_mean = tuning.entries.iter().map(|e| e.nu).sum::<f64>() / tuning.entries.len() as f64;
    let record = ReplicateRecord {
        replicate,
        n: sc.n,
        empirical_risk: emp,
        l2_risk: l2,
        l2_se,
        support_exact: result.active_set == support,
        support: result.active_set.clone(),
        oracle_ratio: gap.ratio,
        oracle_denominator: gap.denominator,
        decomposability_lhs: dec.lhs,
        decomposability_rhs: dec.rhs,
        decomposable: dec.holds,
        objective: result.objective(),
        sweeps: result.sweeps_used,
        converged: result.converged,
        binding: result.binding,
        restarts: result.restarts_used,
        nu_mean,
    };
    Ok(ReplicateRun {
        record,
        dataset: data,
        grams,
        tuning,
        fit: result,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let k = s.len();
        let median = if k % 2 == 1 {
            s[k / 2]
        } else {
            0.5 * (s[k / 2 - 1] + s[k / 2])
        };
        Self { mean, median, sd }
    }
}

/// Per-replicate records and their aggregates at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub n: usize,
    pub records: Vec<ReplicateRecord>,
    pub empirical_risk: Aggregate,
    pub l2_risk: Aggregate,
    pub oracle_ratio: Aggregate,
    pub support_recovery_rate: f64,
    pub decomposability_rate: f64,
    /// Tuning table of replicate 0.
    pub tuning: TuningTable,
}

const CSV_HEADER: &str = "n,replicate,empirical_risk,l2_risk,l2_se,support,support_exact,oracle_ratio,oracle_denominator,decomposability_lhs,decomposability_rhs,decomposable,objective,sweeps,converged,binding,restarts,nu_mean";

impl RiskReport {
    pub fn csv_header() -> &'static str {
        CSV_HEADER
    }

    /// Rows without header, one per replicate.
    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            let support: Vec<String> = r.support.iter().map(|g| g.to_string()).collect();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.n,
                r.replicate,
                fmt_f64(r.empirical_risk),
                fmt_f64(r.l2_risk),
                fmt_f64(r.l2_se),
                support.join(";"),
                r.support_exact,
                fmt_f64(r.oracle_ratio),
                fmt_f64(r.oracle_denominator),
                fmt_f64(r.decomposability_lhs),
                fmt_f64(r.decomposability_rhs),
                r.decomposable,
                fmt_f64(r.objective),
                r.sweeps,
                r.converged,
                r.binding,
                r.restarts,
                fmt_f64(r.nu_mean),
            );
        }
        s
    }

    pub fn to_csv(&self) -> String {
        format!("{CSV_HEADER}\n{}", self.csv_rows())
    }
}

fn map_replicates<T: Send>(
    count: usize,
    f: impl Fn(u64) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        (0..count as u64).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count as u64).map(f).collect()
    }
}

/// Run every replicate of `study` at its scenario's `n`.
pub fn run_study(study: &Study) -> Result<RiskReport> {
    study.validate()?;
    let runs = map_replicates(study.scenario.replicates, |r| {
        run_replicate(study, r)
            .map(|run| (run.record, if r == 0 { Some(run.tuning) } else { None }))
    })?;
    let mut tuning = None;
    let mut records = Vec::with_capacity(runs.len());
    for (rec, t) in runs {
        if t.is_some() {
            tuning = t;
        }
        records.push(rec);
    }
    let col = |f: fn(&ReplicateRecord) -> f64| records.iter().map(f).collect::<Vec<_>>();
    let k = records.len() as f64;
    Ok(RiskReport {
        n: study.scenario.n,
        empirical_risk: Aggregate::of(&col(|r| r.empirical_risk)),
        l2_risk: Aggregate::of(&col(|r| r.l2_risk)),
        oracle_ratio: Aggregate::of(&col(|r| r.oracle_ratio)),
        support_recovery_rate: records.iter().filter(|r| r.support_exact).count() as f64 / k,
        decomposability_rate: records.iter().filter(|r| r.decomposable).count() as f64 / k,
        tuning: tuning.expect("replicate 0 ran"),
        records,
    })
}

/// Least-squares slope with a standard error from per-point variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn fit_slope(x: &[f64], y: &[f64], var_y: &[f64]) -> SlopeFit {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let slope = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / sxx;
    let var: f64 = x
        .iter()
        .zip(var_y)
        .map(|(a, v)| ((a - mx) / sxx).powi(2) * v)
        .sum();
    let se = var.sqrt();
    SlopeFit {
        slope,
        intercept: my - slope * mx,
        se,
        ci_low: slope - 1.96 * se,
        ci_high: slope + 1.96 * se,
    }
}

/// Summary of one grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub mean_risk: f64,
    pub sd_risk: f64,
    pub mean_nu: f64,
    pub tuning: TuningTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSweep {
    pub points: Vec<SweepPoint>,
    /// Slope of `log mean risk` against `log n`.
    pub risk_slope: SlopeFit,
    /// Slope of `log mean ν` against `log n`.
    pub nu_slope: SlopeFit,
    /// Risks at solver-tolerance level; the slope carries no statistical meaning.
    pub degenerate: bool,
    /// Number of grid steps where the mean risk increased.
    pub order_violations: usize,
    pub reports: Vec<RiskReport>,
}

impl RateSweep {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{CSV_HEADER}\n");
        for r in &self.reports {
            s.push_str(&r.csv_rows());
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("n,mean_risk,sd_risk,mean_nu\n");
        for p in &self.points {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                p.n,
                fmt_f64(p.mean_risk),
                fmt_f64(p.sd_risk),
                fmt_f64(p.mean_nu)
            );
        }
        s
    }
}

/// Run the study on each `n` of `study.n_grid` and fit the log-log slopes.
pub fn rate_sweep(study: &Study) -> Result<RateSweep> {
    if study.n_grid.len() < 4 {
        return domain(format!(
            "rate sweep needs at least 4 grid points, got {}",
            study.n_grid.len()
        ));
    }
    let mut reports = Vec::with_capacity(study.n_grid.len());
    for &n in &study.n_grid {
        reports.push(run_study(&study.at_n(n))?);
    }
    let points: Vec<SweepPoint> = reports
        .iter()
        .map(|r| SweepPoint {
            n: r.n,
            mean_risk: r.empirical_risk.mean,
            sd_risk: r.empirical_risk.sd,
            mean_nu: r.records.iter().map(|x| x.nu_mean).sum::<f64>() / r.records.len() as f64,
            tuning: r.tuning.clone(),
        })
        .collect();
    let ln_n: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let reps = study.scenario.replicates as f64;
    let degenerate = points.iter().all(|p| p.mean_risk < 1e-10);
    let floor = f64::MIN_POSITIVE;
    let ln_risk: Vec<f64> = points.iter().map(|p| p.mean_risk.max(floor).ln()).collect();
    // delta method: Var(log mean) ≈ sd² / (R · mean²)
    let var_risk: Vec<f64> = points
        .iter()
        .map(|p| (p.sd_risk / p.mean_risk.max(floor)).powi(2) / reps)
        .collect();
    let ln_nu: Vec<f64> = points.iter().map(|p| p.mean_nu.max(floor).ln()).collect();
    let var_nu: Vec<f64> = reports
        .iter()
        .zip(&points)
        .map(|(r, p)| {
            let a = Aggregate::of(&r.records.iter().map(|x| x.nu_mean).collect::<Vec<_>>());
            (a.sd / p.mean_nu.max(floor)).powi(2) / reps
        })
        .collect();
    let order_violations = points
        .windows(2)
        .filter(|w| w[1].mean_risk > w[0].mean_risk)
        .count();
    Ok(RateSweep {
        risk_slope: fit_slope(&ln_n, &ln_risk, &var_risk),
        nu_slope: fit_slope(&ln_n, &ln_nu, &var_nu),
        degenerate,
        order_violations,
        points,
        reports,
    })
}
