//! Desk-scale probes: covering numbers, Sudakov-shape diagnostics and
//! concentration tails of Lipschitz functionals of generalized-Gaussian vectors.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bench::fmt_f64;
use crate::error::{domain, Error, Result};
use crate::noise::NoiseSpec;
use crate::rng::{self, streams};

/// A finite point set `T ⊂ ℝⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub points: Vec<Vec<f64>>,
}

impl PointSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return domain("point set is empty");
        };
        let dim = first.len();
        if dim == 0 {
            return domain("points must have at least one coordinate");
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::Dimension {
                    what: "point dimension",
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return domain("point set contains non-finite coordinates");
            }
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| p.iter().map(|v| v * s).collect())
                .collect(),
        }
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        self.points[i]
            .iter()
            .zip(&self.points[j])
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                d = d.max(self.dist(i, j));
            }
        }
        d
    }

    /// Farthest-point traversal from point 0: the visiting order and, at
    /// `radii[k]`, the covering radius of the first `k + 1` centers. The radii
    /// are nonincreasing and the centers pairwise farther apart than the
    /// radius at which they were added.
    pub fn farthest_point_traversal(&self) -> (Vec<usize>, Vec<f64>) {
        let m = self.len();
        let mut near: Vec<f64> = (0..m).map(|i| self.dist(0, i)).collect();
        let mut order = vec![0];
        let mut radii = Vec::with_capacity(m);
        loop {
            let (far, r) =
                near.iter()
                    .copied()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |acc, (i, d)| if d > acc.1 { (i, d) } else { acc },
                    );
            radii.push(r);
            if r <= 0.0 || radii.len() == m {
                break;
            }
            order.push(far);
            for (i, n) in near.iter_mut().enumerate() {
                *n = n.min(self.dist(far, i));
            }
        }
        (order, radii)
    }

    pub fn farthest_point_radii(&self) -> Vec<f64> {
        self.farthest_point_traversal().1
    }

    /// Indices of the greedy proper `delta`-cover.
    pub fn greedy_centers(&self, delta: f64) -> Vec<usize> {
        let (mut order, radii) = self.farthest_point_traversal();
        order.truncate(greedy_count(&radii, delta));
        order
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.dist(i, j)
    }
}

/// Number of farthest-point centers needed to bring the covering radius to `≤ delta`.
fn greedy_count(radii: &[f64], delta: f64) -> usize {
    radii
        .iter()
        .position(|&r| r <= delta)
        .map_or(radii.len(), |k| k + 1)
}

/// Certified covering bounds at one scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covering {
    pub delta: f64,
    /// Size of the greedy proper `δ`-cover: `N_pr(δ) ≤ proper` and, the centers
    /// being `δ`-separated, `proper ≤ N(δ/2)`.
    pub proper: usize,
    /// Size of a `2δ`-separated subset: `lower ≤ N(δ)`.
    pub lower: usize,
    /// Exact minimal proper cover, computed when `|T| ≤ 20`.
    pub exact_proper: Option<usize>,
}

impl Covering {
    /// The value returned for the requested kind; the proper count doubles as
    /// the upper surrogate of the non-proper number.
    pub fn count(&self, proper: bool) -> usize {
        if proper {
            self.exact_proper.unwrap_or(self.proper)
        } else {
            self.proper
        }
    }
}

pub fn covering_number(t: &PointSet, delta: f64) -> Result<Covering> {
    if !(delta > 0.0) {
        return domain(format!("delta must be positive, got {delta}"));
    }
    let radii = t.farthest_point_radii();
    let proper = greedy_count(&radii, delta);
    let lower = greedy_count(&radii, 2.0 * delta);
    let exact_proper = (t.len() <= 20).then(|| exact_proper_cover(t, delta, proper));
    Ok(Covering {
        delta,
        proper,
        lower,
        exact_proper,
    })
}

/// Smallest `k` such that some `k` points of `T` cover it at radius `delta`.
fn exact_proper_cover(t: &PointSet, delta: f64, upper: usize) -> usize {
    let m = t.len();
    let full: u32 = if m == 32 { u32::MAX } else { (1u32 << m) - 1 };
    let masks: Vec<u32> = (0..m)
        .map(|c| {
            (0..m)
                .filter(|&i| t.dist(c, i) <= delta)
                .fold(0, |acc, i| acc | (1 << i))
        })
        .collect();
    for k in 1..upper {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            if idx.iter().fold(0, |acc, &c| acc | masks[c]) == full {
                return k;
            }
            let mut i = k;
            while i > 0 && idx[i - 1] == m - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    upper
}

/// One scale of the Sudakov-shape probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SudakovRow {
    pub delta: f64,
    /// `log` of the greedy proper cover size (upper surrogate of `log N(δ)`).
    pub log_n: f64,
    /// `log` of the certified lower bound on `N(δ)`.
    pub log_n_lower: f64,
    /// `(2M/δ)²`.
    pub bound_sq: f64,
    /// `(2M/δ)^α`.
    pub bound_alpha: f64,
    /// `δ ≤ 2M`, where the `α` term is active.
    pub small_scale: bool,
    /// `log N(δ)` over the active bound term; `None` when that term is 0.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SudakovProbe {
    pub alpha: f64,
    pub n_mc: usize,
    /// Monte-Carlo `M = E sup_{t∈T} Σᵢ tᵢ Zᵢ`, `Zᵢ ~ π_α`.
    pub m: f64,
    pub m_se: f64,
    pub rows: Vec<SudakovRow>,
}

/// `E sup_{t∈T} ⟨t, Z⟩` by Monte Carlo, with its standard error.
pub fn expected_supremum(t: &PointSet, noise: &NoiseSpec, n_mc: usize, seed: u64) -> (f64, f64) {
    let mut rng = rng::stream(seed, streams::PROBE);
    let dim = t.dim();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut z = vec![0.0; dim];
    for _ in 0..n_mc {
        for zi in z.iter_mut() {
            *zi = noise.draw_raw(&mut rng);
        }
        let s = t
            .points
            .iter()
            .map(|p| p.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        sum += s;
        sum_sq += s * s;
    }
    let k = n_mc as f64;
    let mean = sum / k;
    let var = ((sum_sq - k * mean * mean) / (k - 1.0)).max(0.0);
    (mean, (var / k).sqrt())
}

pub fn sudakov_probe(
    t: &PointSet,
    alpha: f64,
    n_mc: usize,
    delta_grid: &[f64],
    seed: u64,
) -> Result<SudakovProbe> {
    if n_mc < 1000 {
        return domain(format!("n_mc must be >= 1000, got {n_mc}"));
    }
    let noise = NoiseSpec::probe(alpha, 1.0)?;
    let (m, m_se) = expected_supremum(t, &noise, n_mc, seed);
    let radii = t.farthest_point_radii();
    let mut rows = Vec::with_capacity(delta_grid.len());
    for &delta in delta_grid {
        if !(delta > 0.0) {
            return domain(format!("delta must be positive, got {delta}"));
        }
        let log_n = (greedy_count(&radii, delta) as f64).ln();
        let log_n_lower = (greedy_count(&radii, 2.0 * delta) as f64).ln();
        let x = (2.0 * m / delta).max(0.0);
        let bound_sq = x * x;
        let bound_alpha = x.powf(alpha);
        let small_scale = delta <= 2.0 * m;
        let active = if small_scale { bound_alpha } else { bound_sq };
        rows.push(SudakovRow {
            delta,
            log_n,
            log_n_lower,
            bound_sq,
            bound_alpha,
            small_scale,
            ratio: (active > 0.0).then(|| log_n / active),
        });
    }
    Ok(SudakovProbe {
        alpha,
        n_mc,
        m,
        m_se,
        rows,
    })
}

/// Convex 1-Lipschitz functionals of `ℝⁿ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Max,
    EuclideanNorm,
    /// `log Σ exp(zᵢ) - log n`, a smooth version of the max.
    SoftmaxFree,
}

impl Functional {
    pub fn eval(&self, z: &[f64]) -> f64 {
        match self {
            Functional::Max => z.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Functional::EuclideanNorm => z.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Functional::SoftmaxFree => {
                let mx = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = z.iter().map(|v| (v - mx).exp()).sum();
                mx + s.ln() - (z.len() as f64).ln()
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Functional::Max => "max",
            Functional::EuclideanNorm => "euclidean_norm",
            Functional::SoftmaxFree => "softmax_free",
        }
    }
}

impl std::str::FromStr for Functional {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Functional::Max),
            "euclidean_norm" => Ok(Functional::EuclideanNorm),
            "softmax_free" => Ok(Functional::SoftmaxFree),
            other => Err(Error::Config(format!("unknown functional {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub u: f64,
    /// Empirical `P(|φ - Ê φ| ≥ u)`.
    pub tail: f64,
    pub exceedances: usize,
    /// Whether the point entered the fit.
    pub used: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// Slope of `log tail` against `u²`.
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationProbe {
    pub alpha: f64,
    pub n: usize,
    pub functional: Functional,
    pub n_mc: usize,
    pub mean: f64,
    pub grid: Vec<TailPoint>,
    pub fit: TailFit,
}

/// Minimum exceedance count for a grid point to enter the fit.
pub const MIN_EXCEEDANCES: usize = 30;

/// `P(|v - mean| ≥ u)` over the sample.
pub fn empirical_tail(values: &[f64], u: f64) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().filter(|v| (*v - mean).abs() >= u).count() as f64 / values.len() as f64
}

/// Tail profile on a quantile grid (50th to 99.9th percentile of the
/// deviations) with a least-squares fit of `log tail` against `u²`.
pub fn tail_profile(values: &[f64]) -> Result<(f64, Vec<TailPoint>, TailFit)> {
    let k = values.len();
    if k < 2 {
        return Err(Error::InsufficientData("need at least two samples".into()));
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    let mut dev: Vec<f64> = values.iter().map(|v| (v - mean).abs()).collect();
    dev.sort_by(f64::total_cmp);
    // 1 - q spaced geometrically from 0.5 down to 0.001
    let steps = 24;
    let mut grid = Vec::with_capacity(steps);
    for s in 0..steps {
        let upper = 0.5 * (0.002f64).powf(s as f64 / (steps - 1) as f64);
        let q = 1.0 - upper;
        let idx = ((q * k as f64).ceil() as usize).clamp(1, k) - 1;
        let u = dev[idx];
        let exceedances = dev.len() - dev.partition_point(|d| *d < u);
        grid.push(TailPoint {
            u,
            tail: exceedances as f64 / k as f64,
            exceedances,
            used: u > 0.0 && exceedances >= MIN_EXCEEDANCES,
        });
    }
    grid.dedup_by(|a, b| a.u == b.u);
    let pts: Vec<(f64, f64)> = grid
        .iter()
        .filter(|p| p.used)
        .map(|p| (p.u * p.u, p.tail.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} tail grid points have >= {MIN_EXCEEDANCES} exceedances",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData(
            "tail grid has no spread in u".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    Ok((
        mean,
        grid,
        TailFit {
            slope,
            intercept,
            r2,
            points: pts.len(),
        },
    ))
}

/// Tails of `φ(ε)` for `ε` with i.i.d. unit-variance `π_α` coordinates.
pub fn concentration_probe(
    alpha: f64,
    n: usize,
    functional: Functional,
    n_mc: usize,
    seed: u64,
) -> Result<ConcentrationProbe> {
    if n == 0 {
        return domain("n must be positive");
    }
    let noise = NoiseSpec::probe(alpha, 1.0)?;
    let mut rng = rng::stream(seed, streams::PROBE);
    let mut z = vec![0.0; n];
    let values: Vec<f64> = (0..n_mc)
        .map(|_| {
            for zi in z.iter_mut() {
                *zi = noise.draw_raw(&mut rng) / noise.sigma_alpha;
            }
            functional.eval(&z)
        })
        .collect();
    let (mean, grid, fit) = tail_profile(&values)?;
    Ok(ConcentrationProbe {
        alpha,
        n,
        functional,
        n_mc,
        mean,
        grid,
        fit,
    })
}

/// Long-format probe CSV: `probe,params,grid,quantity,estimate,bound`.
pub const PROBE_CSV_HEADER: &str = "probe,params,grid,quantity,estimate,bound";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), fmt_f64)
}

pub fn covering_csv_rows(t: &PointSet, rows: &[Covering]) -> String {
    let mut s = String::new();
    let params = format!("points={};dim={}", t.len(), t.dim());
    for c in rows {
        let _ = writeln!(
            s,
            "covering,{params},{},proper,{},{}",
            fmt_f64(c.delta),
            c.proper,
            c.lower
        );
        if let Some(e) = c.exact_proper {
            let _ = writeln!(
                s,
                "covering,{params},{},exact_proper,{e},{}",
                fmt_f64(c.delta),
                c.lower
            );
        }
    }
    s
}

impl SudakovProbe {
    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        let params = format!(
            "alpha={};n_mc={};M={};M_se={}",
            self.alpha,
            self.n_mc,
            fmt_f64(self.m),
            fmt_f64(self.m_se)
        );
        for r in &self.rows {
            let d = fmt_f64(r.delta);
            let regime = if r.small_scale {
                "alpha_term"
            } else {
                "square_term"
            };
            let active = if r.small_scale {
                r.bound_alpha
            } else {
                r.bound_sq
            };
            let _ = writeln!(
                s,
                "sudakov,{params};regime={regime},{d},log_covering,{},{}",
                fmt_f64(r.log_n),
                fmt_f64(active)
            );
            let _ = writeln!(
                s,
                "sudakov,{params};regime={regime},{d},log_covering_lower,{},{}",
                fmt_f64(r.log_n_lower),
                fmt_f64(active)
            );
            let _ = writeln!(
                s,
                "sudakov,{params};regime={regime},{d},bound_sq,{},{}",
                fmt_f64(r.bound_sq),
                fmt_f64(r.bound_sq)
            );
            let _ = writeln!(
                s,
                "sudakov,{params};regime={regime},{d},bound_alpha,{},{}",
                fmt_f64(r.bound_alpha),
                fmt_f64(r.bound_alpha)
            );
            let _ = writeln!(
                s,
                "sudakov,{params};regime={regime},{d},implied_ratio,{},{}",
                opt(r.ratio),
                fmt_f64(active)
            );
        }
        s
    }
}

impl ConcentrationProbe {
    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        let params = format!(
            "alpha={};n={};phi={};n_mc={};slope={};intercept={};r2={}",
            self.alpha,
            self.n,
            self.functional.name(),
            self.n_mc,
            fmt_f64(self.fit.slope),
            fmt_f64(self.fit.intercept),
            fmt_f64(self.fit.r2)
        );
        for p in &self.grid {
            let fitted = (self.fit.intercept + self.fit.slope * p.u * p.u).exp();
            let _ = writeln!(
                s,
                "concentration,{params};used={},{},tail,{},{}",
                p.used,
                fmt_f64(p.u),
                fmt_f64(p.tail),
                fmt_f64(fitted)
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::abs_first_moment;
    use rand::Rng as _;

    fn line(points: &[f64]) -> PointSet {
        PointSet::new(points.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn covering_examples() {
        let t = line(&[0.0, 1.0, 2.0, 3.0]);
        let c = covering_number(&t, 1.0).unwrap();
        assert_eq!(c.proper, 2);
        assert_eq!(c.lower, 2);
        assert_eq!(c.exact_proper, Some(2));
        assert_eq!(c.count(true), 2);
        assert_eq!(covering_number(&t, 3.0).unwrap().proper, 1);
        assert_eq!(covering_number(&t, 10.0).unwrap().count(false), 1);
        assert_eq!(covering_number(&t, 0.5).unwrap().proper, 4);
        let dup = line(&[0.0, 0.0, 1.0, 1.0, 5.0]);
        assert_eq!(covering_number(&dup, 0.1).unwrap().proper, 3);
        assert!(covering_number(&t, 0.0).is_err());
        assert!(PointSet::new(vec![]).is_err());
    }

    fn brute_force_minimal(t: &PointSet, delta: f64) -> usize {
        let m = t.len();
        (1u32..(1 << m))
            .filter(|mask| {
                (0..m).all(|i| (0..m).any(|c| mask & (1 << c) != 0 && t.dist(c, i) <= delta))
            })
            .map(|mask| mask.count_ones() as usize)
            .min()
            .unwrap()
    }

    #[test]
    fn exact_cover_matches_brute_force() {
        let mut rng = rng::stream(3, 0);
        for _ in 0..20 {
            let pts: Vec<Vec<f64>> = (0..10)
                .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
                .collect();
            let t = PointSet::new(pts).unwrap();
            let delta = 0.1 + 0.4 * rng.random::<f64>();
            let c = covering_number(&t, delta).unwrap();
            let exact = brute_force_minimal(&t, delta);
            assert_eq!(c.exact_proper, Some(exact));
            assert!(c.lower <= exact && exact <= c.proper);
        }
    }

    #[test]
    fn greedy_centers_are_separated() {
        let mut rng = rng::stream(4, 0);
        let pts: Vec<Vec<f64>> = (0..150)
            .map(|_| (0..4).map(|_| rng.random::<f64>()).collect())
            .collect();
        let t = PointSet::new(pts).unwrap();
        let radii = t.farthest_point_radii();
        assert!(radii.windows(2).all(|w| w[1] <= w[0]));
        let mut prev = usize::MAX;
        for k in 1..40 {
            let c = covering_number(&t, 0.05 * k as f64).unwrap();
            assert!(c.lower <= c.proper);
            assert!(c.proper <= prev);
            prev = c.proper;
            let centers = t.greedy_centers(c.delta);
            assert_eq!(centers.len(), c.proper);
            for i in 0..t.len() {
                assert!(centers.iter().any(|&j| t.distance(i, j) <= c.delta));
            }
            for (a, &i) in centers.iter().enumerate() {
                for &j in &centers[a + 1..] {
                    assert!(t.distance(i, j) > c.delta);
                }
            }
        }
    }

    #[test]
    fn sudakov_single_point_and_pair() {
        let one = PointSet::new(vec![vec![0.3, -0.2]]).unwrap();
        let p = sudakov_probe(&one, 3.0, 2000, &[0.1, 1.0], 1).unwrap();
        assert!(p.rows.iter().all(|r| r.log_n == 0.0));
        let pair = PointSet::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let p = sudakov_probe(&pair, 3.0, 20_000, &[0.5, 5.0], 2).unwrap();
        let want = abs_first_moment(3.0).unwrap();
        assert!(
            (p.m - want).abs() < 3.0 * p.m_se,
            "{} vs {want} ± {}",
            p.m,
            p.m_se
        );
        assert!(p.rows[0].small_scale && !p.rows[1].small_scale);
        assert!(p.rows.iter().all(|r| r.log_n.is_finite()));
        let doubled = sudakov_probe(&pair.scaled(2.0), 3.0, 20_000, &[0.5], 2).unwrap();
        assert!((doubled.m - 2.0 * p.m).abs() < 3.0 * doubled.m_se);
        assert!(sudakov_probe(&pair, 3.0, 999, &[0.5], 2).is_err());
    }

    #[test]
    fn constant_functional_has_no_tail() {
        let v = vec![1.5; 500];
        for u in [1e-9, 0.1, 2.0] {
            assert_eq!(empirical_tail(&v, u), 0.0);
        }
        assert!(matches!(tail_profile(&v), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn functionals_are_one_lipschitz() {
        let mut rng = rng::stream(5, 0);
        for f in [
            Functional::Max,
            Functional::EuclideanNorm,
            Functional::SoftmaxFree,
        ] {
            for _ in 0..200 {
                let a: Vec<f64> = (0..6).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
                let b: Vec<f64> = (0..6).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
                let d = a
                    .iter()
                    .zip(&b)
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!((f.eval(&a) - f.eval(&b)).abs() <= d + 1e-12);
            }
        }
        let z = [0.5, -1.0, 2.0];
        assert!(Functional::SoftmaxFree.eval(&z) <= 2.0);
        assert!(Functional::SoftmaxFree.eval(&z) >= 2.0 - 3f64.ln());
    }

    #[test]
    fn max_tail_is_gaussian_like_in_shape() {
        let p = concentration_probe(3.0, 50, Functional::Max, 10_000, 9).unwrap();
        assert!(p.fit.slope < 0.0);
        assert!(p.fit.r2 >= 0.9, "{:?}", p.fit);
        assert!(concentration_probe(3.0, 50, Functional::Max, 50, 9).is_err());
    }

    #[test]
    fn tails_decay_super_exponentially() {
        for alpha in [2.5, 3.0, 4.0] {
            let p = concentration_probe(alpha, 20, Functional::EuclideanNorm, 10_000, 11).unwrap();
            let used: Vec<&TailPoint> = p.grid.iter().filter(|g| g.used).collect();
            let c = -p.fit.slope;
            assert!(c > 0.0);
            let (a, b) = (used[0], used[used.len() - 1]);
            assert!(b.tail.ln() - a.tail.ln() <= -0.5 * c * (b.u * b.u - a.u * a.u));
        }
    }
}
