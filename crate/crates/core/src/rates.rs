//! Critical radii, rate parameters and the penalty levels derived from them.
//!
//! For a group with operator eigenvalues `ω_1 ≥ ω_2 ≥ …`
//!
//! ```text
//! Q(t) = √((5/n) Σ_ℓ min(t², ω_ℓ))
//! ν    = inf { t : Q(t) ≤ Δ t² }
//! λ    = max(ν, √(d/n))
//! μ    = C₁ λ²,   γ = C₁ λ
//! ```
//!
//! Empirical spectra of `K_v/n` stand in for the operator eigenvalues, so the
//! `ν` reported here is labelled `nu_empirical`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernels::GroupIndex;

/// Label attached to every tuning table: `ν` comes from empirical spectra.
pub const NU_LABEL: &str = "nu_empirical";

/// Floor applied to `ν` when forming `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaFloor {
    /// `√(d/n)`.
    #[default]
    Dims,
    /// `√(2 ln d / n)`, for interaction-limited group sets.
    LogDims,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub delta: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub beta: Option<f64>,
    pub d: usize,
    pub n: usize,
    pub lambda_floor: LambdaFloor,
}

impl RateParams {
    /// Defaults `Δ = 1`, `C₁ = 10 + 4Δ + 1`, `C₂ = C₃ = 1`, no `β`.
    pub fn new(d: usize, n: usize) -> Self {
        let delta = 1.0;
        Self {
            delta,
            c1: 10.0 + 4.0 * delta + 1.0,
            c2: 1.0,
            c3: 1.0,
            beta: None,
            d,
            n,
            lambda_floor: LambdaFloor::Dims,
        }
    }

    /// `κ = 10 + 4Δ`, the lower bound on `C₁`.
    pub fn kappa(&self) -> f64 {
        10.0 + 4.0 * self.delta
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return domain(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.c1 > self.kappa()) || !self.c1.is_finite() {
            return domain(format!(
                "c1 must exceed 10 + 4*delta = {}, got {}",
                self.kappa(),
                self.c1
            ));
        }
        if !(self.c2 > 0.0 && self.c3 > 0.0) {
            return domain("c2 and c3 must be positive");
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return domain(format!("beta must be positive, got {b}"));
            }
        }
        if self.d == 0 || self.n == 0 {
            return domain("d and n must be positive");
        }
        if self.lambda_floor == LambdaFloor::LogDims && self.d < 2 {
            return domain("log_dims floor needs d >= 2");
        }
        Ok(())
    }

    /// `√(d/n)` or `√(2 ln d / n)`.
    pub fn floor(&self) -> f64 {
        let n = self.n as f64;
        match self.lambda_floor {
            LambdaFloor::Dims => (self.d as f64 / n).sqrt(),
            LambdaFloor::LogDims => (2.0 * (self.d as f64).ln() / n).sqrt(),
        }
    }
}

fn check_spectrum(omega: &[f64]) -> Result<()> {
    if let Some(w) = omega.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return domain(format!(
            "eigenvalues must be finite and nonnegative, got {w}"
        ));
    }
    Ok(())
}

/// `Q(t) = √((5/n) Σ min(t², ω_ℓ))`.
pub fn q_function(omega: &[f64], n: usize, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return domain(format!("t must be nonnegative, got {t}"));
    }
    if n == 0 {
        return domain("n must be positive");
    }
    check_spectrum(omega)?;
    Ok(q_unchecked(omega, n, t))
}

fn q_unchecked(omega: &[f64], n: usize, t: f64) -> f64 {
    let t2 = t * t;
    let s: f64 = omega.iter().map(|&w| w.min(t2)).sum();
    (5.0 * s / n as f64).sqrt()
}

/// Smallest `t` with `Q(t) ≤ Δ t²`, by bisection on the nonincreasing `Q(t)/t²`.
pub fn critical_radius(omega: &[f64], n: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return domain(format!("delta must be positive, got {delta}"));
    }
    if n == 0 {
        return domain("n must be positive");
    }
    check_spectrum(omega)?;
    let max = omega.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(0.0);
    }
    let below = |t: f64| q_unchecked(omega, n, t) <= delta * t * t;
    let t_sat = max.sqrt();
    // past t_sat, Q is constant and the root is √(Q_sat/Δ); widen to cover it
    let q_sat = q_unchecked(omega, n, t_sat);
    let mut hi = (10.0 * t_sat).max(2.0 * (q_sat / delta).sqrt());
    let mut lo = 1e-12;
    if below(lo) {
        return Ok(lo);
    }
    if !below(hi) {
        return Err(Error::Numerical(format!(
            "critical radius bracket [{lo}, {hi}] does not contain a root"
        )));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(hi)
}

/// Rate parameter and penalties for one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
}

/// `λ = max(ν, floor)`, `μ = C₁λ²`, `γ = C₁λ`.
pub fn tuning(nu: f64, params: &RateParams) -> Tuning {
    let lambda = nu.max(params.floor());
    Tuning {
        lambda,
        mu: params.c1 * lambda * lambda,
        gamma: params.c1 * lambda,
    }
}

/// How penalties are scaled to the noise level and constraint radius.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TuningScale {
    /// Unit noise and unit radius: `γ = C₁λ`, `μ = C₁λ²`.
    #[default]
    Unit,
    /// Noise scale `σ` with the radius scaled alongside it: `γ = σC₁λ`, `μ = σC₁λ²`.
    Noise { sigma: f64 },
    /// Noise scale `σ` and radius `r`: the rates are computed on the spectrum
    /// `u·ω` with `u = r²/σ²`, then `γ = σC₁λᵘ`, `μ = σ²C₁(λᵘ)²/r`.
    Kernel { sigma: f64, radius: f64 },
}

impl TuningScale {
    fn validate(&self) -> Result<()> {
        match *self {
            TuningScale::Unit => Ok(()),
            TuningScale::Noise { sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return domain(format!("tuning sigma must be positive, got {sigma}"));
                }
                Ok(())
            }
            TuningScale::Kernel { sigma, radius } => {
                if !(sigma > 0.0 && sigma.is_finite() && radius > 0.0 && radius.is_finite()) {
                    return domain("tuning sigma and radius must be positive");
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningEntry {
    pub group: GroupIndex,
    pub nu: f64,
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningFlags {
    /// `n λ² ≥ -C₂ log λ` for every group.
    pub assumption_nlog: bool,
    /// `Σ_S λ² ≤ C₃ n^{2β-1}`; absent when no support or `β` was given.
    pub assumption_sparsity: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningTable {
    pub nu_label: String,
    pub params: RateParams,
    pub scale: TuningScale,
    pub entries: Vec<TuningEntry>,
    pub flags: TuningFlags,
}

impl TuningTable {
    pub fn get(&self, group: &GroupIndex) -> Option<&TuningEntry> {
        self.entries.iter().find(|e| &e.group == group)
    }

    pub fn mu(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.mu).collect()
    }

    pub fn gamma(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.gamma).collect()
    }

    /// Same table with every `μ` and `γ` replaced.
    pub fn with_penalties(&self, mu: f64, gamma: f64) -> Self {
        let mut t = self.clone();
        for e in &mut t.entries {
            e.mu = mu;
            e.gamma = gamma;
        }
        t
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Which [`TuningScale`] a study uses; `σ` and `r` come from the study itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    #[default]
    Unit,
    Noise,
    Kernel,
}

fn default_delta() -> f64 {
    1.0
}

fn default_one() -> f64 {
    1.0
}

/// Configuration-level view of [`RateParams`] plus scale mode and manual overrides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningConfig {
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Defaults to `10 + 4Δ + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default = "default_one")]
    pub c2: f64,
    #[serde(default = "default_one")]
    pub c3: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default)]
    pub lambda_floor: LambdaFloor,
    #[serde(default)]
    pub scale: ScaleMode,
    /// Manual `μ` for every group, replacing the rate-driven value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Manual `γ` for every group, replacing the rate-driven value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            delta: 1.0,
            c1: None,
            c2: 1.0,
            c3: 1.0,
            beta: None,
            lambda_floor: LambdaFloor::Dims,
            scale: ScaleMode::Unit,
            mu: None,
            gamma: None,
        }
    }
}

impl TuningConfig {
    pub fn params(&self, d: usize, n: usize) -> RateParams {
        RateParams {
            delta: self.delta,
            c1: self.c1.unwrap_or(10.0 + 4.0 * self.delta + 1.0),
            c2: self.c2,
            c3: self.c3,
            beta: self.beta,
            d,
            n,
            lambda_floor: self.lambda_floor,
        }
    }

    pub fn scale(&self, sigma: f64, radius: f64) -> TuningScale {
        match self.scale {
            ScaleMode::Unit => TuningScale::Unit,
            ScaleMode::Noise => TuningScale::Noise { sigma },
            ScaleMode::Kernel => TuningScale::Kernel { sigma, radius },
        }
    }

    /// Tuning table with manual `μ`, `γ` overrides applied.
    #[allow(clippy::too_many_arguments)]
    pub fn table(
        &self,
        groups: &[GroupIndex],
        spectra: &[Vec<f64>],
        d: usize,
        n: usize,
        sigma: f64,
        radius: f64,
        support: Option<&[GroupIndex]>,
    ) -> Result<TuningTable> {
        let mut t = tuning_table(
            groups,
            spectra,
            &self.params(d, n),
            self.scale(sigma, radius),
            support,
        )?;
        for e in &mut t.entries {
            if let Some(mu) = self.mu {
                e.mu = mu;
            }
            if let Some(gamma) = self.gamma {
                e.gamma = gamma;
            }
        }
        Ok(t)
    }
}

/// Tuning table for `groups` with per-group spectra of `K_v/n`.
pub fn tuning_table(
    groups: &[GroupIndex],
    spectra: &[Vec<f64>],
    params: &RateParams,
    scale: TuningScale,
    support: Option<&[GroupIndex]>,
) -> Result<TuningTable> {
    params.validate()?;
    scale.validate()?;
    if groups.len() != spectra.len() {
        return Err(Error::Dimension {
            what: "spectra per group",
            expected: groups.len(),
            got: spectra.len(),
        });
    }
    let mut entries = Vec::with_capacity(groups.len());
    for (g, omega) in groups.iter().zip(spectra) {
        let entry = match scale {
            TuningScale::Unit => {
                let nu = critical_radius(omega, params.n, params.delta)?;
                let t = tuning(nu, params);
                TuningEntry {
                    group: g.clone(),
                    nu,
                    lambda: t.lambda,
                    mu: t.mu,
                    gamma: t.gamma,
                }
            }
            TuningScale::Noise { sigma } => {
                let nu = critical_radius(omega, params.n, params.delta)?;
                let t = tuning(nu, params);
                TuningEntry {
                    group: g.clone(),
                    nu,
                    lambda: t.lambda,
                    mu: sigma * t.mu,
                    gamma: sigma * t.gamma,
                }
            }
            TuningScale::Kernel { sigma, radius } => {
                let u = radius * radius / (sigma * sigma);
                let scaled: Vec<f64> = omega.iter().map(|w| u * w).collect();
                let nu = critical_radius(&scaled, params.n, params.delta)?;
                let t = tuning(nu, params);
                TuningEntry {
                    group: g.clone(),
                    nu,
                    lambda: t.lambda,
                    mu: sigma * sigma * t.mu / radius,
                    gamma: sigma * t.gamma,
                }
            }
        };
        entries.push(entry);
    }
    let n = params.n as f64;
    let assumption_nlog = entries
        .iter()
        .all(|e| n * e.lambda * e.lambda >= -params.c2 * e.lambda.ln());
    let assumption_sparsity = match (support, params.beta) {
        (Some(s), Some(beta)) => {
            Some(sparsity_sum(&entries, s) <= params.c3 * n.powf(2.0 * beta - 1.0))
        }
        _ => None,
    };
    Ok(TuningTable {
        nu_label: NU_LABEL.to_string(),
        params: *params,
        scale,
        entries,
        flags: TuningFlags {
            assumption_nlog,
            assumption_sparsity,
        },
    })
}

fn sparsity_sum(entries: &[TuningEntry], support: &[GroupIndex]) -> f64 {
    entries
        .iter()
        .filter(|e| support.contains(&e.group))
        .map(|e| e.lambda * e.lambda)
        .sum()
}

/// Hypothesis diagnostics for a tuning table; never alters estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// (a) `n λ_v² ≥ -C₂ log λ_v` for all groups.
    pub nlog: bool,
    /// Smallest `n λ_v² + C₂ log λ_v` over groups.
    pub nlog_margin: f64,
    /// (b) `Σ_{v∈S} λ_v² ≤ C₃ n^{2β-1}`.
    pub sparsity: bool,
    /// `C₃ n^{2β-1} - Σ_{v∈S} λ_v²`.
    pub sparsity_margin: f64,
    /// (c) regularity `α′ > (α-2)/4`.
    pub regularity: bool,
    /// `α′ - (α-2)/4`.
    pub regularity_margin: f64,
}

pub fn assumption_report(
    table: &TuningTable,
    support: &[GroupIndex],
    params: &RateParams,
    alpha: f64,
    alpha_prime: f64,
) -> Result<AssumptionReport> {
    let Some(beta) = params.beta else {
        return domain("assumption report needs params.beta");
    };
    let n = params.n as f64;
    let nlog_margin = table
        .entries
        .iter()
        .map(|e| n * e.lambda * e.lambda + params.c2 * e.lambda.ln())
        .fold(f64::INFINITY, f64::min);
    let sparsity_margin =
        params.c3 * n.powf(2.0 * beta - 1.0) - sparsity_sum(&table.entries, support);
    let regularity_margin = alpha_prime - (alpha - 2.0) / 4.0;
    Ok(AssumptionReport {
        nlog: nlog_margin >= 0.0,
        nlog_margin,
        sparsity: sparsity_margin >= 0.0,
        sparsity_margin,
        regularity: regularity_margin > 0.0,
        regularity_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn q_function_examples() {
        assert_eq!(q_function(&[1.0, 0.25], 5, 0.0).unwrap(), 0.0);
        let q = q_function(&[1.0, 0.25], 5, 0.5).unwrap();
        assert!((q - 0.5f64.sqrt()).abs() < 1e-15);
        let omega = [0.9, 0.3, 0.01];
        let sat = (5.0 * 1.21 / 7.0f64).sqrt();
        for t in [0.95f64.sqrt(), 1.0, 3.0] {
            assert_eq!(q_function(&omega, 7, t).unwrap(), sat);
        }
        assert!(q_function(&omega, 7, -0.1).is_err());
        assert!(q_function(&[-1.0], 7, 0.1).is_err());
    }

    #[test]
    fn q_function_is_nondecreasing() {
        let omega: Vec<f64> = (1..200).map(|l| 1.0 / (l * l) as f64).collect();
        let mut prev = 0.0;
        for k in 0..500 {
            let q = q_function(&omega, 100, k as f64 * 0.003).unwrap();
            assert!(q >= prev);
            prev = q;
        }
    }

    #[test]
    fn critical_radius_examples() {
        assert!((critical_radius(&[1.0], 5, 1.0).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(critical_radius(&[0.0, 0.0], 5, 1.0).unwrap(), 0.0);
        for n in [5usize, 50, 500, 5000] {
            let nu = critical_radius(&[1.0], n, 1.0).unwrap();
            assert!((nu - (5.0 / n as f64).sqrt()).abs() < 1e-8, "n {n}: {nu}");
        }
        assert!(critical_radius(&[1.0], 5, 0.0).is_err());
    }

    #[test]
    fn critical_radius_solves_the_defining_inequality() {
        let omega: Vec<f64> = (1..64).map(|l| 0.5 / (l as f64).powf(2.5)).collect();
        for delta in [0.5, 1.0, 3.0] {
            let nu = critical_radius(&omega, 64, delta).unwrap();
            let q = |t: f64| q_function(&omega, 64, t).unwrap();
            assert!(q(nu) <= delta * nu * nu * (1.0 + 1e-12));
            let below = nu * (1.0 - 1e-9);
            assert!(q(below) > delta * below * below);
        }
    }

    #[test]
    fn root_beyond_saturation() {
        // few samples, many eigenvalues: the root lies past 10·√ω_max
        let omega = vec![1e-4; 400];
        let nu = critical_radius(&omega, 2, 1.0).unwrap();
        let want = (5.0 * 400.0 * 1e-4 / 2.0f64).sqrt().sqrt();
        assert!(nu > 10.0 * 1e-2);
        assert!((nu - want).abs() < 1e-12);
    }

    #[test]
    fn critical_radius_monotonicity() {
        let omega: Vec<f64> = (1..100).map(|l| 1.0 / (l * l) as f64).collect();
        let mut prev = f64::INFINITY;
        for s in [1.0, 0.5, 0.25, 0.1] {
            let scaled: Vec<f64> = omega.iter().map(|w| w * s).collect();
            let nu = critical_radius(&scaled, 100, 1.0).unwrap();
            assert!(nu <= prev);
            prev = nu;
        }
        let mut prev = f64::INFINITY;
        for n in [10, 100, 1000, 10000] {
            let nu = critical_radius(&omega, n, 1.0).unwrap();
            assert!(nu <= prev);
            prev = nu;
        }
    }

    fn slope(xs: &[f64], ys: &[f64]) -> f64 {
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        sxy / sxx
    }

    #[test]
    fn brownian_spectrum_scaling_law() {
        let mut ln_n = Vec::new();
        let mut ln_nu = Vec::new();
        for k in 6..=12 {
            let n = 1usize << k;
            // eigenvalues of the Brownian covariance operator on [0,1]
            let omega: Vec<f64> = (1..=n)
                .map(|l| 1.0 / ((l as f64 - 0.5) * PI).powi(2))
                .collect();
            ln_n.push((n as f64).ln());
            ln_nu.push(critical_radius(&omega, n, 1.0).unwrap().ln());
        }
        let s = slope(&ln_n, &ln_nu);
        assert!((-0.43..=-0.23).contains(&s), "slope {s}");
    }

    #[test]
    fn tuning_examples() {
        let p = RateParams {
            c1: 15.0,
            ..RateParams::new(4, 100)
        };
        let t = tuning(0.1, &p);
        assert!((t.lambda - 0.2).abs() < 1e-15);
        assert!((t.mu - 0.6).abs() < 1e-12);
        assert!((t.gamma - 3.0).abs() < 1e-12);
        assert_eq!(tuning(0.5, &RateParams::new(1, 10000)).lambda, 0.5);
        assert_eq!(tuning(0.0, &RateParams::new(3, 300)).lambda, 0.1);
        let log = RateParams {
            lambda_floor: LambdaFloor::LogDims,
            ..RateParams::new(100, 10000)
        };
        let l = tuning(0.0, &log).lambda;
        assert!((l - (2.0 * 100f64.ln() / 1e4).sqrt()).abs() < 1e-15);
        assert!((l - 0.0303).abs() < 1e-4);
    }

    #[test]
    fn mu_over_gamma_is_lambda() {
        let p = RateParams::new(3, 200);
        for nu in [0.0, 0.05, 0.3, 1.7] {
            let t = tuning(nu, &p);
            assert!((t.mu / t.gamma - t.lambda).abs() <= 1e-15 * t.lambda);
        }
    }

    #[test]
    fn rate_params_validation() {
        let mut p = RateParams::new(2, 10);
        assert_eq!(p.c1, 15.0);
        p.validate().unwrap();
        p.c1 = 14.0;
        assert!(p.validate().is_err());
        p.c1 = 15.0;
        p.delta = -1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn scale_modes() {
        let g = vec![GroupIndex::singleton(1)];
        let omega = vec![(1..50).map(|l| 0.2 / (l * l) as f64).collect::<Vec<_>>()];
        let p = RateParams::new(1, 50);
        let unit = tuning_table(&g, &omega, &p, TuningScale::Unit, None).unwrap();
        let noise = tuning_table(&g, &omega, &p, TuningScale::Noise { sigma: 0.5 }, None).unwrap();
        assert_eq!(noise.entries[0].gamma, 0.5 * unit.entries[0].gamma);
        assert_eq!(noise.entries[0].mu, 0.5 * unit.entries[0].mu);
        let k1 = tuning_table(
            &g,
            &omega,
            &p,
            TuningScale::Kernel {
                sigma: 1.0,
                radius: 1.0,
            },
            None,
        )
        .unwrap();
        assert_eq!(k1.entries, unit.entries);
        let k = tuning_table(
            &g,
            &omega,
            &p,
            TuningScale::Kernel {
                sigma: 0.5,
                radius: 2.0,
            },
            None,
        )
        .unwrap();
        let e = &k.entries[0];
        assert!((e.mu / e.gamma - 0.5 * e.lambda / 2.0).abs() < 1e-15);
    }

    #[test]
    fn table_json_keys() {
        let g = vec![
            GroupIndex::singleton(1),
            GroupIndex::new(vec![1, 2]).unwrap(),
        ];
        let omega = vec![vec![0.3, 0.1], vec![0.05, 0.01]];
        let t = tuning_table(&g, &omega, &RateParams::new(2, 20), TuningScale::Unit, None).unwrap();
        let v: serde_json::Value = serde_json::from_str(&t.to_json().unwrap()).unwrap();
        assert_eq!(v["nu_label"], "nu_empirical");
        for key in ["group", "nu", "lambda", "mu", "gamma"] {
            assert!(v["entries"][1].get(key).is_some(), "{key}");
        }
        assert_eq!(v["entries"][1]["group"], serde_json::json!([1, 2]));
        let back: TuningTable = serde_json::from_value(v).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn config_defaults_and_overrides() {
        let c = TuningConfig::default();
        assert_eq!(c.params(3, 10), RateParams::new(3, 10));
        let g = vec![GroupIndex::singleton(1)];
        let manual = TuningConfig {
            mu: Some(1e6),
            gamma: Some(2e6),
            ..c
        };
        let t = manual
            .table(&g, &[vec![0.5]], 1, 10, 1.0, 1.0, None)
            .unwrap();
        assert_eq!((t.entries[0].mu, t.entries[0].gamma), (1e6, 2e6));
        let noise = TuningConfig {
            scale: ScaleMode::Noise,
            ..c
        };
        assert!(noise
            .table(&g, &[vec![0.5]], 1, 10, 0.0, 1.0, None)
            .is_err());
    }

    #[test]
    fn assumption_examples() {
        let g = vec![GroupIndex::singleton(1)];
        let p = RateParams {
            beta: Some(0.2),
            ..RateParams::new(1, 1)
        };
        // λ = 1 via the √(d/n) floor with d = n = 1 and a null spectrum
        let t = tuning_table(&g, &[vec![0.0]], &p, TuningScale::Unit, Some(&g)).unwrap();
        assert_eq!(t.entries[0].lambda, 1.0);
        let r = assumption_report(&t, &g, &p, 3.0, 1.0).unwrap();
        assert!(r.nlog);
        assert!(r.regularity);
        assert!((r.regularity_margin - 0.75).abs() < 1e-15);
        let r8 = assumption_report(&t, &g, &p, 8.0, 1.0).unwrap();
        assert!(!r8.regularity);
        assert!((r8.regularity_margin + 0.5).abs() < 1e-15);
        let no_beta = RateParams::new(1, 1);
        assert!(assumption_report(&t, &g, &no_beta, 3.0, 1.0).is_err());
    }
}
