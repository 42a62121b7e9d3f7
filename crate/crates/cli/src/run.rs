use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anova_rgs::bench::{fmt_f64, make_dataset, rate_sweep, Dataset, Scenario};
use anova_rgs::estimator::{fit, FitResult};
use anova_rgs::kernels::{anova_gram, GramSet};
use anova_rgs::probes::{
    concentration_probe, covering_csv_rows, covering_number, sudakov_probe, PointSet,
    PROBE_CSV_HEADER,
};
use anova_rgs::rates::TuningTable;
use anova_rgs::rng::{self, streams, RNG_ALGORITHM};
use rand::Rng as _;
use serde::Serialize;
use serde_json::json;

use crate::config::{Command, ProbeKind, RunConfig};
use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub rng_algorithm: &'static str,
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputHash>,
    /// Wall-clock creation time; the only non-reproducible field of a run.
    pub created_unix: u64,
}

/// Files written by a run, manifest first.
#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub command: &'static str,
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

struct Out {
    dir: PathBuf,
    files: Vec<PathBuf>,
    stamp: String,
}

impl Out {
    fn write(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
        }
        fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(path);
        Ok(())
    }

    /// CSV body preceded by a `#` line carrying the config hash and RNG id.
    fn write_csv(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let text = format!("{}\n{body}", self.stamp);
        self.write(name, &text)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }
}

fn hash_file(path: &Path) -> Result<InputHash, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(InputHash {
        path: path.to_path_buf(),
        sha256: anova_rgs::sha256_hex(&bytes),
    })
}

/// Run `cfg` on a pool of `jobs` threads (`None`: rayon's default).
pub fn run_with_jobs(cfg: &RunConfig, jobs: Option<usize>) -> Result<RunOutcome, CliError> {
    match jobs {
        None => run(cfg),
        Some(j) => {
            if j == 0 {
                return Err(CliError::Config("--jobs must be positive".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| CliError::Config(e.to_string()))?;
            pool.install(|| run(cfg))
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let config_sha256 = cfg.hash();
    let mut inputs = Vec::new();
    if let (Some(data), Command::Fit | Command::Tune) = (&cfg.data, cfg.command) {
        inputs.push(hash_file(&data.path)?);
    }
    let manifest = Manifest {
        tool: "anova-rgs",
        version: env!("CARGO_PKG_VERSION"),
        command: cfg.command.name(),
        seed: cfg.seed,
        rng_algorithm: RNG_ALGORITHM,
        config: serde_json::to_value(cfg).map_err(|e| CliError::Config(e.to_string()))?,
        config_sha256: config_sha256.clone(),
        inputs,
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let mut out = Out {
        dir: cfg.output_dir.clone(),
        files: Vec::new(),
        stamp: format!(
            "# config_sha256={config_sha256} rng={RNG_ALGORITHM} seed={}",
            cfg.seed
        ),
    };
    fs::create_dir_all(&out.dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", out.dir.display())))?;
    out.write_json("manifest.json", &manifest)?;

    let header = json!({
        "config_sha256": config_sha256,
        "rng_algorithm": RNG_ALGORITHM,
        "seed": cfg.seed,
    });
    match cfg.command {
        Command::Tune => run_tune(cfg, &mut out, header)?,
        Command::Fit => run_fit(cfg, &mut out, header)?,
        Command::Simulate => run_simulate(cfg, &mut out)?,
        Command::Sweep => run_sweep(cfg, &mut out, header)?,
        Command::Probe => run_probe(cfg, &mut out, header)?,
    }
    Ok(RunOutcome {
        command: cfg.command.name(),
        output_dir: out.dir,
        files: out.files,
    })
}

struct Prepared {
    scenario: Scenario,
    data: Dataset,
    grams: GramSet,
    tuning: TuningTable,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let mut scenario = cfg.scenario()?;
    let (data, support) = match &cfg.data {
        Some(d) => {
            let text = fs::read_to_string(&d.path)
                .map_err(|e| CliError::Io(format!("{}: {e}", d.path.display())))?;
            let data = Dataset::from_csv(&text)?;
            if data.x.cols() != scenario.d {
                return Err(CliError::Config(format!(
                    "data has {} input columns but scenario.d = {}",
                    data.x.cols(),
                    scenario.d
                )));
            }
            scenario.n = data.x.rows();
            (data, None)
        }
        None => (
            make_dataset(&scenario, 0)?,
            Some(scenario.truth()?.support()),
        ),
    };
    let groups = scenario.groups()?;
    let grams = anova_gram(&scenario.kernel_spec(), &data.x, &groups)?;
    let tuning = cfg.tuning.table(
        &grams.groups,
        &grams.spectra,
        scenario.d,
        scenario.n,
        scenario.sigma,
        cfg.fit.radius,
        support.as_deref(),
    )?;
    Ok(Prepared {
        scenario,
        data,
        grams,
        tuning,
    })
}

fn run_tune(cfg: &RunConfig, out: &mut Out, mut header: serde_json::Value) -> Result<(), CliError> {
    let p = prepare(cfg)?;
    header["n"] = json!(p.scenario.n);
    header["d"] = json!(p.scenario.d);
    header["kernel_hash"] = json!(p.grams.kernel_hash);
    header["design_hash"] = json!(p.grams.design_hash);
    header["tuning"] =
        serde_json::to_value(&p.tuning).map_err(|e| CliError::Numerical(e.to_string()))?;
    out.write_json("tuning.json", &header)
}

fn fit_csv(result: &FitResult, tuning: &TuningTable) -> String {
    let mut s = String::from(
        "group,active,hilbert_norm,empirical_norm,radius,mu,gamma,residual,zero_margin\n",
    );
    let model = &result.model;
    for (k, g) in model.groups.iter().enumerate() {
        let st = &result.stationarity[k];
        let _ = writeln!(
            s,
            "{g},{},{},{},{},{},{},{},{}",
            st.active,
            fmt_f64(model.norms[k].hilbert),
            fmt_f64(model.norms[k].empirical),
            fmt_f64(model.radius[k]),
            fmt_f64(tuning.entries[k].mu),
            fmt_f64(tuning.entries[k].gamma),
            fmt_f64(st.residual),
            fmt_f64(st.zero_margin),
        );
    }
    s
}

fn run_fit(cfg: &RunConfig, out: &mut Out, mut header: serde_json::Value) -> Result<(), CliError> {
    let p = prepare(cfg)?;
    let fit_cfg = anova_rgs::estimator::FitConfig {
        seed: cfg.seed,
        ..cfg.fit
    };
    let result = fit(&p.data.y, &p.grams, &p.tuning, &fit_cfg)?;
    out.write_json("model.json", &result.model)?;
    out.write_csv("fit.csv", &fit_csv(&result, &p.tuning))?;
    let mut trace = String::from("sweep,objective\n");
    for (k, v) in result.objective_trace.iter().enumerate() {
        let _ = writeln!(trace, "{k},{}", fmt_f64(*v));
    }
    out.write_csv("trace.csv", &trace)?;
    let active: Vec<String> = result.active_set.iter().map(|g| g.to_string()).collect();
    header["n"] = json!(p.scenario.n);
    header["f0"] = json!(result.model.f0);
    header["objective"] = json!(result.objective());
    header["active_set"] = json!(active);
    header["converged"] = json!(result.converged);
    header["sweeps_used"] = json!(result.sweeps_used);
    header["restarts_used"] = json!(result.restarts_used);
    header["binding"] = json!(result.binding);
    out.write_json("fit_summary.json", &header)
}

fn run_simulate(cfg: &RunConfig, out: &mut Out) -> Result<(), CliError> {
    let sc = cfg.scenario()?;
    for r in 0..sc.replicates as u64 {
        let data = make_dataset(&sc, r)?;
        out.write_csv(&format!("datasets/replicate_{r:04}.csv"), &data.to_csv())?;
    }
    Ok(())
}

fn run_sweep(
    cfg: &RunConfig,
    out: &mut Out,
    mut header: serde_json::Value,
) -> Result<(), CliError> {
    let study = cfg.study()?;
    let sweep = rate_sweep(&study)?;
    out.write_csv("risk.csv", &sweep.to_csv())?;
    out.write_csv("sweep_summary.csv", &sweep.summary_csv())?;
    let points: Vec<serde_json::Value> = sweep
        .reports
        .iter()
        .zip(&sweep.points)
        .map(|(r, p)| {
            json!({
                "n": r.n,
                "mean_risk": p.mean_risk,
                "sd_risk": p.sd_risk,
                "mean_nu": p.mean_nu,
                "empirical_risk": r.empirical_risk,
                "l2_risk": r.l2_risk,
                "oracle_ratio": r.oracle_ratio,
                "support_recovery_rate": r.support_recovery_rate,
                "decomposability_rate": r.decomposability_rate,
            })
        })
        .collect();
    header["risk_slope"] = json!(sweep.risk_slope);
    header["nu_slope"] = json!(sweep.nu_slope);
    header["degenerate"] = json!(sweep.degenerate);
    header["order_violations"] = json!(sweep.order_violations);
    header["points"] = json!(points);
    out.write_json("summary.json", &header)
}

fn probe_points(cfg: &RunConfig) -> Result<PointSet, CliError> {
    let p = cfg.probe.clone().unwrap_or_default();
    if let Some(points) = p.points {
        return Ok(PointSet::new(points)?);
    }
    let spec = p
        .random_points
        .ok_or_else(|| CliError::Config("probe needs points or random_points".into()))?;
    let mut rng = rng::stream(cfg.seed, streams::of(0, streams::DESIGN));
    let points = (0..spec.count)
        .map(|_| {
            (0..spec.dim)
                .map(|_| 2.0 * rng.random::<f64>() - 1.0)
                .collect()
        })
        .collect();
    Ok(PointSet::new(points)?)
}

fn run_probe(
    cfg: &RunConfig,
    out: &mut Out,
    mut header: serde_json::Value,
) -> Result<(), CliError> {
    let p = cfg.probe.clone().unwrap_or_default();
    let mut csv = format!("{PROBE_CSV_HEADER}\n");
    for kind in &p.kinds {
        match kind {
            ProbeKind::Covering => {
                let t = probe_points(cfg)?;
                let rows = p
                    .delta_grid
                    .iter()
                    .map(|&d| covering_number(&t, d))
                    .collect::<anova_rgs::Result<Vec<_>>>()?;
                csv.push_str(&covering_csv_rows(&t, &rows));
                header["covering"] = json!(rows);
            }
            ProbeKind::Sudakov => {
                let t = probe_points(cfg)?;
                let s = sudakov_probe(&t, p.alpha, p.n_mc, &p.delta_grid, cfg.seed)?;
                csv.push_str(&s.csv_rows());
                header["sudakov"] = json!({"m": s.m, "m_se": s.m_se, "rows": s.rows});
            }
            ProbeKind::Concentration => {
                let c = concentration_probe(p.alpha, p.n, p.phi, p.n_mc, cfg.seed)?;
                csv.push_str(&c.csv_rows());
                header["concentration"] = json!({"mean": c.mean, "fit": c.fit});
            }
        }
    }
    out.write_csv("probes.csv", &csv)?;
    out.write_json("probe_summary.json", &header)
}
