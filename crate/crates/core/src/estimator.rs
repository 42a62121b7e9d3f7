//! Ridge group sparse estimation over the ANOVA RKHS.
//!
//! The criterion is
//!
//! ```text
//! (1/n) Σᵢ (Yᵢ - f₀ - Σ_v (K_v θ_v)ᵢ)² + Σ_v γ_v ‖f_v‖_n + Σ_v μ_v ‖f_v‖_{H_v}
//! ```
//!
//! over `‖f_v‖_{H_v} ≤ r_v`. Each block is solved in the eigenbasis of its
//! Gram matrix, `β = Λ^{1/2} Uᵀ θ`, where both penalties are Euclidean norms.

use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernels::{CenteredKernels, GramSet, GroupIndex, KernelSpec};
use crate::linalg::{dot, norm2, Matrix};
use crate::rates::TuningTable;
use crate::rng::{self, streams};

/// Eigenvalues of `K_v` at or below this fraction of the largest are dropped.
const EIGEN_CUTOFF: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupNorms {
    /// `‖f_v‖_n = ‖K_v θ_v‖ / √n`.
    pub empirical: f64,
    /// `‖f_v‖_{H_v} = √(θ_vᵀ K_v θ_v)`.
    pub hilbert: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaModel {
    pub f0: f64,
    pub groups: Vec<GroupIndex>,
    pub theta: Vec<Vec<f64>>,
    pub norms: Vec<GroupNorms>,
    pub radius: Vec<f64>,
    pub kernel_hash: String,
    pub design_hash: String,
}

impl MetaModel {
    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Constant model `f₀` with every block zero.
    pub fn constant(f0: f64, grams: &GramSet, radius: f64) -> Self {
        let n = grams.n();
        let k = grams.groups.len();
        Self {
            f0,
            groups: grams.groups.clone(),
            theta: vec![vec![0.0; n]; k],
            norms: vec![
                GroupNorms {
                    empirical: 0.0,
                    hilbert: 0.0
                };
                k
            ],
            radius: vec![radius; k],
            kernel_hash: grams.kernel_hash.clone(),
            design_hash: grams.design_hash.clone(),
        }
    }

    /// Recompute the cached norms from `θ` and the Gram matrices.
    pub fn refresh_norms(&mut self, grams: &GramSet) {
        let n = grams.n() as f64;
        for (v, th) in self.theta.iter().enumerate() {
            let kt = grams.grams[v].matvec(th);
            self.norms[v] = GroupNorms {
                empirical: norm2(&kt) / n.sqrt(),
                hilbert: dot(th, &kt).max(0.0).sqrt(),
            };
        }
    }

    /// Whether every block satisfies `‖f_v‖_{H_v} ≤ r_v + slack`.
    pub fn is_feasible(&self, grams: &GramSet, slack: f64) -> bool {
        self.theta.iter().enumerate().all(|(v, th)| {
            let h = dot(th, &grams.grams[v].matvec(th)).max(0.0).sqrt();
            h <= self.radius[v] + slack
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub tol_rel_objective: f64,
    pub max_sweeps: usize,
    pub inner_iters: usize,
    pub zero_threshold: f64,
    pub seed: u64,
    /// Constraint radius `r_v`, shared by all groups.
    pub radius: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            tol_rel_objective: 1e-7,
            max_sweeps: 500,
            inner_iters: 200,
            zero_threshold: 1e-10,
            seed: 0,
            radius: 1.0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_rel_objective > 0.0) || self.max_sweeps == 0 || self.inner_iters == 0 {
            return domain("fit tolerances and iteration counts must be positive");
        }
        if !(self.zero_threshold > 0.0) {
            return domain("zero_threshold must be positive");
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return domain(format!(
                "radius must be positive and finite, got {}",
                self.radius
            ));
        }
        Ok(())
    }
}

/// First-order state of one block at the returned solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockStationarity {
    pub group: GroupIndex,
    pub active: bool,
    /// Projected-gradient residual `‖β - P(β - ∇g(β))‖` for active blocks.
    pub residual: f64,
    /// Group-zero test margin `μ - dist(a, D·B)` for inactive blocks.
    pub zero_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: MetaModel,
    /// Objective at the start and after every sweep.
    pub objective_trace: Vec<f64>,
    pub active_set: Vec<GroupIndex>,
    pub converged: bool,
    pub sweeps_used: usize,
    /// Active groups whose Hilbert norm sits on the constraint radius.
    pub binding: usize,
    pub restarts_used: usize,
    pub stationarity: Vec<BlockStationarity>,
}

impl FitResult {
    pub fn objective(&self) -> f64 {
        *self
            .objective_trace
            .last()
            .expect("trace has the initial value")
    }
}

fn check_penalties(k: usize, mu: &[f64], gamma: &[f64]) -> Result<()> {
    if mu.len() != k || gamma.len() != k {
        return Err(Error::Dimension {
            what: "penalties per group",
            expected: k,
            got: mu.len().min(gamma.len()),
        });
    }
    if mu
        .iter()
        .chain(gamma)
        .any(|p| !(*p >= 0.0) || !p.is_finite())
    {
        return domain("penalties must be finite and nonnegative");
    }
    Ok(())
}

fn check_response(y: &[f64], n: usize) -> Result<()> {
    if y.len() != n {
        return Err(Error::Dimension {
            what: "response length",
            expected: n,
            got: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return domain("response contains non-finite values");
    }
    Ok(())
}

/// Value of the criterion at `model`.
pub fn objective(
    y: &[f64],
    model: &MetaModel,
    grams: &GramSet,
    mu: &[f64],
    gamma: &[f64],
) -> Result<f64> {
    let n = grams.n();
    check_response(y, n)?;
    let k = grams.groups.len();
    check_penalties(k, mu, gamma)?;
    if model.theta.len() != k || model.theta.iter().any(|t| t.len() != n) {
        return Err(Error::Dimension {
            what: "model blocks",
            expected: k,
            got: model.theta.len(),
        });
    }
    let mut resid: Vec<f64> = y.iter().map(|v| v - model.f0).collect();
    let mut pen = 0.0;
    for v in 0..k {
        let kt = grams.grams[v].matvec(&model.theta[v]);
        for (r, f) in resid.iter_mut().zip(&kt) {
            *r -= f;
        }
        let h = dot(&model.theta[v], &kt).max(0.0).sqrt();
        pen += gamma[v] * norm2(&kt) / (n as f64).sqrt() + mu[v] * h;
    }
    Ok(dot(&resid, &resid) / n as f64 + pen)
}

/// One block in its eigen-coordinates.
struct Block<'a> {
    vectors: &'a Matrix,
    /// Kept eigenvalues of `K_v`.
    lam: Vec<f64>,
    sqrt_lam: Vec<f64>,
    mu: f64,
    /// `γ/√n`.
    gamma_n: f64,
    radius: f64,
    inv_n: f64,
}

impl<'a> Block<'a> {
    fn new(grams: &'a GramSet, v: usize, mu: f64, gamma: f64, radius: f64) -> Self {
        let e = &grams.eigen[v];
        let max = e.values.first().copied().unwrap_or(0.0).max(0.0);
        let lam: Vec<f64> = e
            .values
            .iter()
            .copied()
            .take_while(|&l| l > EIGEN_CUTOFF * max && l > 0.0)
            .collect();
        let n = grams.n() as f64;
        Self {
            vectors: &e.vectors,
            sqrt_lam: lam.iter().map(|l| l.sqrt()).collect(),
            lam,
            mu,
            gamma_n: gamma / n.sqrt(),
            radius,
            inv_n: 1.0 / n,
        }
    }

    fn rank(&self) -> usize {
        self.lam.len()
    }

    /// `c = Λ^{1/2} Uᵀ R` restricted to kept directions.
    fn project(&self, r: &[f64]) -> Vec<f64> {
        let k = self.rank();
        let mut c = vec![0.0; k];
        for (i, &ri) in r.iter().enumerate() {
            if ri == 0.0 {
                continue;
            }
            let row = &self.vectors.row(i)[..k];
            for (cj, u) in c.iter_mut().zip(row) {
                *cj += u * ri;
            }
        }
        for (cj, s) in c.iter_mut().zip(&self.sqrt_lam) {
            *cj *= s;
        }
        c
    }

    /// Fitted values `U Λ^{1/2} β`.
    fn values(&self, beta: &[f64]) -> Vec<f64> {
        let k = self.rank();
        let w: Vec<f64> = beta
            .iter()
            .zip(&self.sqrt_lam)
            .map(|(b, s)| b * s)
            .collect();
        (0..self.vectors.rows())
            .map(|i| dot(&self.vectors.row(i)[..k], &w))
            .collect()
    }

    /// `θ = U Λ^{-1/2} β`.
    fn theta(&self, beta: &[f64]) -> Vec<f64> {
        let k = self.rank();
        let w: Vec<f64> = beta
            .iter()
            .zip(&self.sqrt_lam)
            .map(|(b, s)| b / s)
            .collect();
        (0..self.vectors.rows())
            .map(|i| dot(&self.vectors.row(i)[..k], &w))
            .collect()
    }

    fn weighted_norm(&self, beta: &[f64]) -> f64 {
        beta.iter()
            .zip(&self.lam)
            .map(|(b, l)| l * b * b)
            .sum::<f64>()
            .sqrt()
    }

    /// Block objective without the constant `‖R‖²/n`.
    fn value(&self, c: &[f64], beta: &[f64]) -> f64 {
        let mut quad = 0.0;
        let mut lin = 0.0;
        for ((b, l), ci) in beta.iter().zip(&self.lam).zip(c) {
            quad += l * b * b;
            lin += ci * b;
        }
        self.inv_n * (quad - 2.0 * lin) + self.gamma_n * quad.sqrt() + self.mu * norm2(beta)
    }

    fn gradient(&self, c: &[f64], beta: &[f64]) -> Vec<f64> {
        let p = self.weighted_norm(beta);
        let q = norm2(beta);
        let gp = if p > 0.0 { self.gamma_n / p } else { 0.0 };
        let gq = if q > 0.0 { self.mu / q } else { 0.0 };
        beta.iter()
            .zip(&self.lam)
            .zip(c)
            .map(|((b, l), ci)| 2.0 * self.inv_n * (l * b - ci) + gp * l * b + gq * b)
            .collect()
    }

    fn clip(&self, beta: &mut [f64]) {
        let q = norm2(beta);
        if q > self.radius {
            let s = self.radius / q;
            for b in beta.iter_mut() {
                *b *= s;
            }
        }
    }

    /// Distance from `a = (2/n)c` to `{D s : ‖s‖ ≤ 1}` with `D = (γ/√n)Λ^{1/2}`,
    /// and the direction `a - D s*`.
    fn zero_distance(&self, c: &[f64]) -> (f64, Vec<f64>) {
        let a: Vec<f64> = c.iter().map(|ci| 2.0 * self.inv_n * ci).collect();
        let d: Vec<f64> = self.sqrt_lam.iter().map(|s| self.gamma_n * s).collect();
        if self.gamma_n == 0.0 {
            return (norm2(&a), a);
        }
        let free: f64 = a.iter().zip(&d).map(|(ai, di)| (ai / di).powi(2)).sum();
        if free <= 1.0 {
            return (0.0, vec![0.0; a.len()]);
        }
        let s_norm = |tau: f64| -> f64 {
            a.iter()
                .zip(&d)
                .map(|(ai, di)| (di * ai / (di * di + tau)).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let dmax = d.iter().copied().fold(0.0, f64::max);
        let mut lo = 0.0;
        let mut hi = dmax * norm2(&a) + f64::MIN_POSITIVE;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if s_norm(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = hi;
        let dir: Vec<f64> = a
            .iter()
            .zip(&d)
            .map(|(ai, di)| ai - di * di * ai / (di * di + tau))
            .collect();
        (norm2(&dir), dir)
    }

    /// Minimizer of the block objective along the ray `t·u`, `t ∈ [0, r]`.
    fn ray_start(&self, c: &[f64], dir: &[f64]) -> Vec<f64> {
        let nd = norm2(dir);
        if nd == 0.0 {
            return vec![0.0; dir.len()];
        }
        let u: Vec<f64> = dir.iter().map(|x| x / nd).collect();
        let quad: f64 = u.iter().zip(&self.lam).map(|(x, l)| l * x * x).sum();
        let slope = 2.0 * self.inv_n * dot(c, &u) - self.gamma_n * quad.sqrt() - self.mu;
        let t = if quad > 0.0 {
            (slope / (2.0 * self.inv_n * quad)).clamp(0.0, self.radius)
        } else if slope > 0.0 {
            self.radius
        } else {
            0.0
        };
        u.iter().map(|x| t * x).collect()
    }

    /// Residual `‖β - P(β - ∇g(β))‖`.
    fn pg_residual(&self, c: &[f64], beta: &[f64]) -> f64 {
        let g = self.gradient(c, beta);
        let mut step: Vec<f64> = beta.iter().zip(&g).map(|(b, gi)| b - gi).collect();
        self.clip(&mut step);
        beta.iter()
            .zip(&step)
            .map(|(b, s)| (b - s).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Projected gradient with Barzilai–Borwein steps and backtracking.
    /// Returns the iterate and whether the line search stalled early.
    fn descend(&self, c: &[f64], start: Vec<f64>, iters: usize) -> (Vec<f64>, bool) {
        let mut beta = start;
        if norm2(&beta) == 0.0 {
            return (beta, true);
        }
        let lmax = self.lam.first().copied().unwrap_or(0.0);
        let mut step = 1.0
            / (2.0 * self.inv_n * lmax
                + self.gamma_n * lmax.sqrt() / norm2(&beta).max(1e-300)
                + 1e-300);
        let mut f = self.value(c, &beta);
        let mut g = self.gradient(c, &beta);
        let scale = 1.0 + norm2(&beta);
        for _ in 0..iters {
            if self.pg_residual(c, &beta) <= 1e-13 * scale {
                return (beta, false);
            }
            let mut accepted = None;
            let mut s = step;
            for _ in 0..60 {
                let mut trial: Vec<f64> = beta.iter().zip(&g).map(|(b, gi)| b - s * gi).collect();
                self.clip(&mut trial);
                if norm2(&trial) > 0.0 {
                    let diff: Vec<f64> = trial.iter().zip(&beta).map(|(t, b)| t - b).collect();
                    let ft = self.value(c, &trial);
                    let model = f + dot(&g, &diff) + dot(&diff, &diff) / (2.0 * s);
                    if ft <= model + 1e-15 * f.abs() {
                        accepted = Some((trial, ft, diff));
                        break;
                    }
                }
                s *= 0.5;
            }
            let Some((trial, ft, diff)) = accepted else {
                return (beta, true);
            };
            let g_new = self.gradient(c, &trial);
            let dg: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&diff, &dg);
            step = if sy > 0.0 {
                dot(&diff, &diff) / sy
            } else {
                2.0 * s
            };
            let improved = ft < f;
            beta = trial;
            f = ft;
            g = g_new;
            if !improved && dot(&diff, &diff).sqrt() <= 1e-15 * scale {
                return (beta, false);
            }
        }
        (beta, false)
    }
}

/// Fit the meta-model with the per-group penalties of `tuning`.
pub fn fit(
    y: &[f64],
    grams: &GramSet,
    tuning: &TuningTable,
    config: &FitConfig,
) -> Result<FitResult> {
    let (mu, gamma) = penalties_for(grams, tuning)?;
    fit_with_penalties(y, grams, &mu, &gamma, config)
}

fn penalties_for(grams: &GramSet, tuning: &TuningTable) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut mu = Vec::with_capacity(grams.groups.len());
    let mut gamma = Vec::with_capacity(grams.groups.len());
    for g in &grams.groups {
        let e = tuning
            .get(g)
            .ok_or_else(|| Error::Domain(format!("tuning table has no entry for group {g}")))?;
        mu.push(e.mu);
        gamma.push(e.gamma);
    }
    Ok((mu, gamma))
}

/// Fit with explicit per-group penalties in the order of `grams.groups`.
pub fn fit_with_penalties(
    y: &[f64],
    grams: &GramSet,
    mu: &[f64],
    gamma: &[f64],
    config: &FitConfig,
) -> Result<FitResult> {
    config.validate()?;
    let n = grams.n();
    check_response(y, n)?;
    let k = grams.groups.len();
    check_penalties(k, mu, gamma)?;

    let blocks: Vec<Block> = (0..k)
        .map(|v| Block::new(grams, v, mu[v], gamma[v], config.radius))
        .collect();
    let mut betas: Vec<Vec<f64>> = blocks.iter().map(|b| vec![0.0; b.rank()]).collect();
    let mut fvals: Vec<Vec<f64>> = vec![vec![0.0; n]; k];
    let mut f0 = y.iter().sum::<f64>() / n as f64;
    let mut resid: Vec<f64> = y.iter().map(|v| v - f0).collect();
    let mut restart_rng = rng::stream(config.seed, streams::RESTART);
    let mut restarts_used = 0;

    let total = |resid: &[f64], betas: &[Vec<f64>]| -> f64 {
        let mut v = dot(resid, resid) / n as f64;
        for (b, beta) in blocks.iter().zip(betas) {
            v += b.gamma_n * b.weighted_norm(beta) + b.mu * norm2(beta);
        }
        v
    };

    let mut trace = vec![total(&resid, &betas)];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < config.max_sweeps {
        sweeps += 1;
        for v in 0..k {
            let b = &blocks[v];
            if b.rank() == 0 {
                continue;
            }
            // partial residual with block v removed
            for (r, f) in resid.iter_mut().zip(&fvals[v]) {
                *r += f;
            }
            let c = b.project(&resid);
            let old = b.value(&c, &betas[v]);
            let (dist, dir) = b.zero_distance(&c);
            let candidate = if dist <= b.mu {
                vec![0.0; b.rank()]
            } else {
                let ray = b.ray_start(&c, &dir);
                let warm = &betas[v];
                let start = if norm2(warm) > 0.0 && b.value(&c, warm) < b.value(&c, &ray) {
                    warm.clone()
                } else {
                    ray
                };
                let (mut best, stalled) = b.descend(&c, start, config.inner_iters);
                if stalled && b.pg_residual(&c, &best) > 1e-8 * (1.0 + norm2(&best)) {
                    let mut best_val = b.value(&c, &best);
                    for _ in 0..10 {
                        restarts_used += 1;
                        let mut s: Vec<f64> = (0..b.rank())
                            .map(|_| restart_rng.sample::<f64, _>(StandardNormal))
                            .collect();
                        let ns = norm2(&s);
                        let t = b.radius * restart_rng.random::<f64>() / ns;
                        s.iter_mut().for_each(|x| *x *= t);
                        let (cand, _) = b.descend(&c, s, config.inner_iters);
                        let val = b.value(&c, &cand);
                        if val < best_val {
                            best = cand;
                            best_val = val;
                        }
                    }
                }
                best
            };
            if b.value(&c, &candidate) <= old {
                fvals[v] = if norm2(&candidate) > 0.0 {
                    b.values(&candidate)
                } else {
                    vec![0.0; n]
                };
                betas[v] = candidate;
            }
            for (r, f) in resid.iter_mut().zip(&fvals[v]) {
                *r -= f;
            }
        }
        // f₀ = mean(Y - Σ_v f_v), recomputed from scratch to avoid drift
        let mut partial = y.to_vec();
        for f in &fvals {
            for (p, x) in partial.iter_mut().zip(f) {
                *p -= x;
            }
        }
        f0 = partial.iter().sum::<f64>() / n as f64;
        for (r, p) in resid.iter_mut().zip(&partial) {
            *r = p - f0;
        }
        let cur = total(&resid, &betas);
        let prev = *trace.last().expect("nonempty");
        trace.push(cur);
        if prev - cur <= config.tol_rel_objective * prev.abs() {
            converged = true;
            break;
        }
    }

    let mut model = MetaModel::constant(f0, grams, config.radius);
    let mut stationarity = Vec::with_capacity(k);
    let mut binding = 0;
    for v in 0..k {
        let b = &blocks[v];
        let q = norm2(&betas[v]);
        if q > 0.0 {
            model.theta[v] = b.theta(&betas[v]);
        }
        model.norms[v] = GroupNorms {
            empirical: b.weighted_norm(&betas[v]) / (n as f64).sqrt(),
            hilbert: q,
        };
        if q > 0.0 && q >= b.radius * (1.0 - 1e-9) {
            binding += 1;
        }
        for (r, f) in resid.iter_mut().zip(&fvals[v]) {
            *r += f;
        }
        let c = b.project(&resid);
        for (r, f) in resid.iter_mut().zip(&fvals[v]) {
            *r -= f;
        }
        let active = q > 0.0;
        stationarity.push(BlockStationarity {
            group: grams.groups[v].clone(),
            active,
            residual: if active {
                b.pg_residual(&c, &betas[v])
            } else {
                0.0
            },
            zero_margin: if active {
                0.0
            } else {
                b.mu - b.zero_distance(&c).0
            },
        });
    }
    let active_set = support(&model, config.zero_threshold)?;
    Ok(FitResult {
        model,
        objective_trace: trace,
        active_set,
        converged,
        sweeps_used: sweeps,
        binding,
        restarts_used,
        stationarity,
    })
}

/// Fit on `Y/σ` with penalties `γ/σ`, `μ/σ` and radius `r/σ`, then map back by `σ`.
pub fn rescale_fit(
    y: &[f64],
    sigma: f64,
    grams: &GramSet,
    tuning: &TuningTable,
    config: &FitConfig,
) -> Result<FitResult> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    let (mu, gamma) = penalties_for(grams, tuning)?;
    let ys: Vec<f64> = y.iter().map(|v| v / sigma).collect();
    let mus: Vec<f64> = mu.iter().map(|m| m / sigma).collect();
    let gammas: Vec<f64> = gamma.iter().map(|g| g / sigma).collect();
    let cfg = FitConfig {
        radius: config.radius / sigma,
        ..*config
    };
    let mut r = fit_with_penalties(&ys, grams, &mus, &gammas, &cfg)?;
    let m = &mut r.model;
    m.f0 *= sigma;
    for th in m.theta.iter_mut() {
        th.iter_mut().for_each(|x| *x *= sigma);
    }
    for nm in m.norms.iter_mut() {
        nm.empirical *= sigma;
        nm.hilbert *= sigma;
    }
    m.radius.iter_mut().for_each(|x| *x *= sigma);
    r.objective_trace
        .iter_mut()
        .for_each(|x| *x *= sigma * sigma);
    r.active_set = support(&r.model, config.zero_threshold)?;
    Ok(r)
}

/// Groups with `‖f_v‖_n > threshold`, graded-lex.
pub fn support(model: &MetaModel, threshold: f64) -> Result<Vec<GroupIndex>> {
    if !(threshold >= 0.0) {
        return domain(format!("threshold must be nonnegative, got {threshold}"));
    }
    let mut s: Vec<GroupIndex> = model
        .groups
        .iter()
        .zip(&model.norms)
        .filter(|(_, nm)| nm.empirical > threshold)
        .map(|(g, _)| g.clone())
        .collect();
    s.sort();
    Ok(s)
}

/// Per-group empirical variance shares `‖f_v‖_n² / Σ_w ‖f_w‖_n²`.
pub fn decompose(model: &MetaModel) -> Result<Vec<(GroupIndex, f64)>> {
    let total: f64 = model.norms.iter().map(|nm| nm.empirical.powi(2)).sum();
    if !(total > 0.0) {
        return Err(Error::UndefinedShares);
    }
    Ok(model
        .groups
        .iter()
        .zip(&model.norms)
        .map(|(g, nm)| (g.clone(), nm.empirical.powi(2) / total))
        .collect())
}

/// Per-group contributions `Σᵢ θ_{v,i} k_v(x, X_i)` at the rows of `x_new`.
pub fn predict_components(
    model: &MetaModel,
    spec: &KernelSpec,
    x_new: &Matrix,
    x_train: &Matrix,
) -> Result<Vec<Vec<f64>>> {
    if x_train.rows() != model.theta.first().map_or(x_train.rows(), Vec::len) {
        return Err(Error::Dimension {
            what: "training rows",
            expected: model.theta[0].len(),
            got: x_train.rows(),
        });
    }
    if x_new.cols() != spec.d() {
        return Err(Error::Dimension {
            what: "query columns",
            expected: spec.d(),
            got: x_new.cols(),
        });
    }
    for i in 0..x_new.rows() {
        for (a, c) in spec.coordinates.iter().enumerate() {
            if !c.law.contains(x_new.get(i, a)) {
                return domain(format!(
                    "query value {} at row {i}, column {} lies outside the input domain",
                    x_new.get(i, a),
                    a + 1
                ));
            }
        }
    }
    let kernels = CenteredKernels::new(spec)?;
    let active: Vec<usize> = (0..model.groups.len())
        .filter(|&v| model.theta[v].iter().any(|t| *t != 0.0))
        .collect();
    let groups: Vec<GroupIndex> = active.iter().map(|&v| model.groups[v].clone()).collect();
    let cross = kernels.cross_grams(x_new, x_train, &groups)?;
    let mut out = vec![vec![0.0; x_new.rows()]; model.groups.len()];
    for (kx, &v) in cross.iter().zip(&active) {
        out[v] = kx.matvec(&model.theta[v]);
    }
    Ok(out)
}

/// `f̂(x) = f₀ + Σ_v Σᵢ θ_{v,i} k_v(x_v, X_{v,i})`.
pub fn predict(
    model: &MetaModel,
    spec: &KernelSpec,
    x_new: &Matrix,
    x_train: &Matrix,
) -> Result<Vec<f64>> {
    let comps = predict_components(model, spec, x_new, x_train)?;
    let mut out = vec![model.f0; x_new.rows()];
    for c in &comps {
        for (o, v) in out.iter_mut().zip(c) {
            *o += v;
        }
    }
    Ok(out)
}

/// In-sample fitted values `f₀ + Σ_v K_v θ_v`.
pub fn fitted_values(model: &MetaModel, grams: &GramSet) -> Vec<f64> {
    let mut out = vec![model.f0; grams.n()];
    for (v, th) in model.theta.iter().enumerate() {
        if th.iter().all(|t| *t == 0.0) {
            continue;
        }
        for (o, f) in out.iter_mut().zip(grams.grams[v].matvec(th)) {
            *o += f;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{anova_gram, enumerate_groups, BaseKernel};
    use crate::rates::{tuning_table, RateParams, TuningScale};
    use crate::rng::Rng;

    fn gram_from(k: Matrix) -> GramSet {
        let n = k.rows();
        let e = crate::linalg::sym_eigen(&k).unwrap();
        GramSet {
            design: Matrix::zeros(n, 1),
            groups: vec![GroupIndex::singleton(1)],
            spectra: vec![e.values.iter().map(|v| v / n as f64).collect()],
            eigen: vec![e],
            grams: vec![k],
            kernel_hash: String::new(),
            design_hash: String::new(),
        }
    }

    fn small_problem(n: usize, d: usize, seed: u64) -> (GramSet, Vec<f64>, KernelSpec) {
        let spec = KernelSpec::uniform(d, BaseKernel::Brownian);
        let mut rng = rng::stream(seed, 0);
        let x = spec.sample_design(n, &mut rng);
        let groups = enumerate_groups(d, 1).unwrap();
        let grams = anova_gram(&spec, &x, &groups).unwrap();
        let y: Vec<f64> = (0..n)
            .map(|i| (6.0 * x.get(i, 0)).sin() + 0.3 * rng.random::<f64>())
            .collect();
        (grams, y, spec)
    }

    #[test]
    fn objective_hand_case() {
        let grams = gram_from(Matrix::identity(2));
        let mut m = MetaModel::constant(0.0, &grams, 1.0);
        m.theta[0] = vec![1.0, 0.0];
        let v = objective(&[1.0, 1.0], &m, &grams, &[1.0], &[1.0]).unwrap();
        assert!((v - (0.5 + 1.0 / 2f64.sqrt() + 1.0)).abs() < 1e-12);
        let zero = MetaModel::constant(0.0, &grams, 1.0);
        assert_eq!(
            objective(&[1.0, 3.0], &zero, &grams, &[1.0], &[1.0]).unwrap(),
            5.0
        );
        assert!(objective(&[1.0], &zero, &grams, &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn zero_response_gives_zero_model() {
        let (grams, y, _) = small_problem(20, 2, 1);
        let zeros = vec![0.0; y.len()];
        let r = fit_with_penalties(
            &zeros,
            &grams,
            &[0.1, 0.1],
            &[0.1, 0.1],
            &FitConfig::default(),
        )
        .unwrap();
        assert_eq!(r.model.f0, 0.0);
        assert!(r.active_set.is_empty());
        assert_eq!(r.objective(), 0.0);
        assert!(r.model.theta.iter().flatten().all(|t| *t == 0.0));
    }

    #[test]
    fn huge_penalties_give_the_mean() {
        let (grams, y, _) = small_problem(30, 2, 2);
        let r = fit_with_penalties(&y, &grams, &[1e6, 1e6], &[1e6, 1e6], &FitConfig::default())
            .unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert_eq!(r.model.f0, mean);
        assert!(r.active_set.is_empty());
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64;
        assert!((r.objective() - var).abs() <= 1e-15 * var);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (grams, mut y, _) = small_problem(10, 1, 3);
        let cfg = FitConfig::default();
        assert!(fit_with_penalties(&y, &grams, &[-1.0], &[1.0], &cfg).is_err());
        y[0] = f64::NAN;
        assert!(fit_with_penalties(&y, &grams, &[1.0], &[1.0], &cfg).is_err());
    }

    #[test]
    fn descent_feasibility_and_stationarity() {
        for seed in 0..4 {
            let (grams, y, _) = small_problem(40, 3, 10 + seed);
            let cfg = FitConfig {
                radius: 0.5 + seed as f64,
                tol_rel_objective: 1e-12,
                ..FitConfig::default()
            };
            let r = fit_with_penalties(&y, &grams, &[0.01, 0.02, 0.005], &[0.05, 0.1, 0.02], &cfg)
                .unwrap();
            for w in r.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs(), "{:?}", r.objective_trace);
            }
            assert!(r.model.is_feasible(&grams, 1e-8));
            assert!(!r.active_set.is_empty());
            for s in &r.stationarity {
                if s.active {
                    assert!(s.residual < 1e-5, "{s:?}");
                } else {
                    assert!(s.zero_margin >= -1e-12, "{s:?}");
                }
            }
            let direct = objective(
                &y,
                &r.model,
                &grams,
                &[0.01, 0.02, 0.005],
                &[0.05, 0.1, 0.02],
            )
            .unwrap();
            assert!((direct - r.objective()).abs() < 1e-9 * direct);
            let mut m = r.model.clone();
            m.refresh_norms(&grams);
            for (a, b) in m.norms.iter().zip(&r.model.norms) {
                assert!((a.empirical - b.empirical).abs() < 1e-10);
                assert!((a.hilbert - b.hilbert).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn binding_radius_is_reported() {
        let (grams, y, _) = small_problem(40, 1, 5);
        let cfg = FitConfig {
            radius: 0.05,
            ..FitConfig::default()
        };
        let r = fit_with_penalties(&y, &grams, &[1e-4], &[1e-4], &cfg).unwrap();
        assert_eq!(r.binding, 1);
        assert!((r.model.norms[0].hilbert - 0.05).abs() < 1e-12);
    }

    // Independent check: joint projected subgradient over (f₀, w_v) with
    // w_v = K_v^{1/2} θ_v, diminishing steps and multi-start, best value kept.
    fn subgradient_oracle(
        y: &[f64],
        grams: &GramSet,
        mu: &[f64],
        gamma: &[f64],
        r: f64,
        seed: u64,
    ) -> f64 {
        let n = y.len();
        let sn = (n as f64).sqrt();
        let roots: Vec<Matrix> = grams
            .grams
            .iter()
            .map(|k| {
                let e = crate::linalg::sym_eigen(k).unwrap();
                Matrix::from_fn(n, n, |i, j| {
                    (0..n)
                        .map(|l| {
                            e.vectors.get(i, l) * e.values[l].max(0.0).sqrt() * e.vectors.get(j, l)
                        })
                        .sum()
                })
            })
            .collect();
        let k = roots.len();
        let eval = |f0: f64, w: &[Vec<f64>]| -> f64 {
            let mut res: Vec<f64> = y.iter().map(|v| v - f0).collect();
            let mut pen = 0.0;
            for v in 0..k {
                let f = roots[v].matvec(&w[v]);
                for (a, b) in res.iter_mut().zip(&f) {
                    *a -= b;
                }
                pen += gamma[v] * norm2(&f) / sn + mu[v] * norm2(&w[v]);
            }
            dot(&res, &res) / n as f64 + pen
        };
        let mut rng: Rng = rng::stream(seed, 99);
        let mut best = f64::INFINITY;
        for start in 0..20 {
            let mut f0 = y.iter().sum::<f64>() / n as f64;
            let mut w: Vec<Vec<f64>> = (0..k)
                .map(|_| {
                    if start == 0 {
                        vec![0.0; n]
                    } else {
                        (0..n).map(|_| r * (rng.random::<f64>() - 0.5)).collect()
                    }
                })
                .collect();
            for wv in w.iter_mut() {
                let nw = norm2(wv);
                if nw > r {
                    wv.iter_mut().for_each(|x| *x *= r / nw);
                }
            }
            for it in 0..100_000 {
                let val = eval(f0, &w);
                best = best.min(val);
                let mut res: Vec<f64> = y.iter().map(|v| v - f0).collect();
                let fs: Vec<Vec<f64>> = (0..k).map(|v| roots[v].matvec(&w[v])).collect();
                for f in &fs {
                    for (a, b) in res.iter_mut().zip(f) {
                        *a -= b;
                    }
                }
                let eta = 0.5 / ((it + 1) as f64).sqrt();
                let g0 = -2.0 * res.iter().sum::<f64>() / n as f64;
                f0 -= eta * g0;
                for v in 0..k {
                    let mut g: Vec<f64> = roots[v]
                        .tr_matvec(&res)
                        .iter()
                        .map(|x| -2.0 * x / n as f64)
                        .collect();
                    let nf = norm2(&fs[v]);
                    if nf > 0.0 {
                        let t = roots[v].tr_matvec(&fs[v]);
                        for (gi, ti) in g.iter_mut().zip(&t) {
                            *gi += gamma[v] / sn * ti / nf;
                        }
                    }
                    let nw = norm2(&w[v]);
                    if nw > 0.0 {
                        for (gi, wi) in g.iter_mut().zip(&w[v]) {
                            *gi += mu[v] * wi / nw;
                        }
                    }
                    for (wi, gi) in w[v].iter_mut().zip(&g) {
                        *wi -= eta * gi;
                    }
                    let nw = norm2(&w[v]);
                    if nw > r {
                        w[v].iter_mut().for_each(|x| *x *= r / nw);
                    }
                }
            }
        }
        best
    }

    #[test]
    fn matches_subgradient_oracle_on_tiny_instances() {
        let mut rng = rng::stream(2024, 7);
        for inst in 0..5u64 {
            let groups = if inst % 2 == 0 { 2 } else { 1 };
            let (grams, y, _) = small_problem(6, 2, 100 + inst);
            let grams = if groups == 1 {
                let spec = KernelSpec::uniform(2, BaseKernel::Brownian);
                anova_gram(&spec, &grams.design, &[GroupIndex::singleton(1)]).unwrap()
            } else {
                grams
            };
            let k = grams.groups.len();
            let mu: Vec<f64> = (0..k).map(|_| 0.01 + 0.1 * rng.random::<f64>()).collect();
            let gamma: Vec<f64> = (0..k).map(|_| 0.01 + 0.2 * rng.random::<f64>()).collect();
            let radius = 0.3 + rng.random::<f64>();
            let cfg = FitConfig {
                radius,
                tol_rel_objective: 1e-12,
                ..FitConfig::default()
            };
            let r = fit_with_penalties(&y, &grams, &mu, &gamma, &cfg).unwrap();
            let oracle = subgradient_oracle(&y, &grams, &mu, &gamma, radius, inst);
            let got = r.objective();
            assert!(
                (got - oracle).abs() <= 1e-3 * oracle.abs() || got <= oracle,
                "instance {inst}: solver {got}, oracle {oracle}"
            );
            assert!(got <= oracle * (1.0 + 1e-3));
        }
    }

    #[test]
    fn rescale_identity_and_scaling() {
        let (grams, y, _) = small_problem(30, 2, 4);
        let table = tuning_table(
            &grams.groups,
            &grams.spectra,
            &RateParams::new(2, 30),
            TuningScale::Unit,
            None,
        )
        .unwrap()
        .with_penalties(0.01, 0.05);
        let cfg = FitConfig::default();
        let a = fit(&y, &grams, &table, &cfg).unwrap();
        let b = rescale_fit(&y, 1.0, &grams, &table, &cfg).unwrap();
        assert_eq!(a, b);
        // σ = 2 on 2Y with doubled penalties and radius is 2× the unit fit on Y
        let y2: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        let t2 = table.with_penalties(0.02, 0.1);
        let cfg2 = FitConfig { radius: 2.0, ..cfg };
        let c = rescale_fit(&y2, 2.0, &grams, &t2, &cfg2).unwrap();
        assert_eq!(c.model.f0, 2.0 * a.model.f0);
        for (x, z) in c
            .model
            .theta
            .iter()
            .flatten()
            .zip(a.model.theta.iter().flatten())
        {
            assert_eq!(*x, 2.0 * z);
        }
        // L_σ(σĝ) = σ² L₁(ĝ)
        let l_sigma = objective(&y2, &c.model, &grams, &t2.mu(), &t2.gamma()).unwrap();
        let l_one = objective(&y, &a.model, &grams, &table.mu(), &table.gamma()).unwrap();
        assert!((l_sigma - 4.0 * l_one).abs() < 1e-12 * l_sigma);
        assert!(rescale_fit(&y, 0.0, &grams, &table, &cfg).is_err());
    }

    #[test]
    fn prediction_at_training_points() {
        let (grams, y, spec) = small_problem(25, 2, 6);
        let r = fit_with_penalties(
            &y,
            &grams,
            &[0.01, 0.01],
            &[0.05, 0.05],
            &FitConfig::default(),
        )
        .unwrap();
        let comps = predict_components(&r.model, &spec, &grams.design, &grams.design).unwrap();
        for (v, comp) in comps.iter().enumerate() {
            let kt = grams.grams[v].matvec(&r.model.theta[v]);
            for (a, b) in comp.iter().zip(&kt) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        let p = predict(&r.model, &spec, &grams.design, &grams.design).unwrap();
        for (a, b) in p.iter().zip(fitted_values(&r.model, &grams)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn one_hot_prediction_is_a_kernel_section() {
        let (grams, _, spec) = small_problem(8, 2, 7);
        let mut m = MetaModel::constant(0.25, &grams, 1.0);
        m.theta[1][3] = 1.0;
        let q = Matrix::from_rows(&[vec![0.2, 0.9], vec![0.5, 0.1]]).unwrap();
        let p = predict(&m, &spec, &q, &grams.design).unwrap();
        let k0 = crate::kernels::center_kernel(&spec, 1).unwrap();
        for (i, pi) in p.iter().enumerate() {
            let want = 0.25 + k0.eval(q.get(i, 1), grams.design.get(3, 1));
            assert!((pi - want).abs() < 1e-12);
        }
        let empty = MetaModel::constant(0.25, &grams, 1.0);
        assert_eq!(
            predict(&empty, &spec, &q, &grams.design).unwrap(),
            vec![0.25, 0.25]
        );
    }

    #[test]
    fn permutation_equivariance() {
        let (grams, y, spec) = small_problem(24, 2, 8);
        let perm: Vec<usize> = (0..24).map(|i| (i * 7) % 24).collect();
        let xp = grams.design.select_rows(&perm);
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let gp = anova_gram(&spec, &xp, &grams.groups).unwrap();
        let (mu, gamma) = ([0.01, 0.01], [0.05, 0.05]);
        let cfg = FitConfig {
            tol_rel_objective: 1e-14,
            max_sweeps: 2000,
            ..FitConfig::default()
        };
        let a = fit_with_penalties(&y, &grams, &mu, &gamma, &cfg).unwrap();
        let b = fit_with_penalties(&yp, &gp, &mu, &gamma, &cfg).unwrap();
        assert!((a.objective() - b.objective()).abs() < 1e-10);
        let q = Matrix::from_rows(&[vec![0.3, 0.6], vec![0.8, 0.05], vec![0.5, 0.5]]).unwrap();
        let pa = predict(&a.model, &spec, &q, &grams.design).unwrap();
        let pb = predict(&b.model, &spec, &q, &xp).unwrap();
        for (x, z) in pa.iter().zip(&pb) {
            assert!((x - z).abs() < 1e-6, "{x} vs {z}");
        }
    }

    #[test]
    fn support_and_shares() {
        let grams = gram_from(Matrix::identity(3));
        let mut m = MetaModel::constant(0.0, &grams, 1.0);
        assert!(support(&m, 0.0).unwrap().is_empty());
        assert!(matches!(decompose(&m), Err(Error::UndefinedShares)));
        m.theta[0] = vec![1.0, 0.0, 0.0];
        m.refresh_norms(&grams);
        assert_eq!(support(&m, 1e-10).unwrap(), vec![GroupIndex::singleton(1)]);
        assert!(support(&m, 1.0).unwrap().is_empty());
        let shares = decompose(&m).unwrap();
        assert_eq!(shares[0].1, 1.0);
        assert!(support(&m, -1.0).is_err());
    }

    #[test]
    fn model_json_round_trip() {
        let (grams, y, _) = small_problem(12, 2, 9);
        let r = fit_with_penalties(
            &y,
            &grams,
            &[0.01, 0.01],
            &[0.05, 0.05],
            &FitConfig::default(),
        )
        .unwrap();
        let dir = std::env::temp_dir().join(format!("anova-model-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        r.model.save_json(&path).unwrap();
        assert_eq!(MetaModel::load_json(&path).unwrap(), r.model);
        std::fs::remove_dir_all(&dir).ok();
    }
}
