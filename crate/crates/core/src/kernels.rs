//! One-dimensional base kernels, zero-mean centering under the known input
//! law, product ANOVA group kernels, Gram matrices and their spectra.
//!
//! For each coordinate `a` the centered kernel is
//!
//! ```text
//! k0(x, x') = k(x, x') - m(x) m(x') / E,   m(x) = E_U k(x, U),   E = E_{U,V} k(U, V)
//! ```
//!
//! so every section `k0(x, ·)` integrates to zero under `P_a`. The group kernel
//! of `v ⊆ {1..d}` is `k_v = ∏_{a∈v} k0_a`.

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Beta as BetaDist, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;

use crate::error::{domain, Error, Result};
use crate::linalg::{check_symmetric, sym_eigen, sym_eigenvalues, Matrix, SymEigen};
use crate::quadrature::GaussLegendre;
use crate::rng::Rng;

/// Base kernel of one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BaseKernel {
    /// `min(x, y)`, needs a nonnegative domain.
    Brownian,
    /// `exp(-(x-y)² / (2h²))`.
    Gaussian { bandwidth: f64 },
    /// `(1 + √3 r/ℓ) exp(-√3 r/ℓ)`.
    Matern32 { length_scale: f64 },
    /// `1 + min(x, y)`, first-order Sobolev space on a nonnegative domain.
    Sobolev1,
}

impl BaseKernel {
    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            BaseKernel::Brownian => x.min(y),
            BaseKernel::Gaussian { bandwidth } => {
                let d = (x - y) / bandwidth;
                (-0.5 * d * d).exp()
            }
            BaseKernel::Matern32 { length_scale } => {
                let r = 3f64.sqrt() * (x - y).abs() / length_scale;
                (1.0 + r) * (-r).exp()
            }
            BaseKernel::Sobolev1 => 1.0 + x.min(y),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BaseKernel::Brownian => "brownian",
            BaseKernel::Gaussian { .. } => "gaussian",
            BaseKernel::Matern32 { .. } => "matern32",
            BaseKernel::Sobolev1 => "sobolev1",
        }
    }

    fn validate(&self, law: &InputLaw) -> Result<()> {
        match *self {
            BaseKernel::Brownian | BaseKernel::Sobolev1 => {
                if law.support().0 < 0.0 {
                    return domain(format!("{} kernel needs a nonnegative domain", self.name()));
                }
            }
            BaseKernel::Gaussian { bandwidth: p } | BaseKernel::Matern32 { length_scale: p } => {
                if !(p > 0.0) || !p.is_finite() {
                    return domain(format!("{} kernel parameter must be positive", self.name()));
                }
            }
        }
        Ok(())
    }
}

/// Known law `P_a` of one input coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum InputLaw {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Beta(a, b) on `[0, 1]`, restricted to `a, b ≥ 1` so the density is bounded.
    Beta {
        a: f64,
        b: f64,
    },
}

impl Default for InputLaw {
    fn default() -> Self {
        InputLaw::Uniform { lo: 0.0, hi: 1.0 }
    }
}

impl InputLaw {
    pub fn support(&self) -> (f64, f64) {
        match *self {
            InputLaw::Uniform { lo, hi } => (lo, hi),
            InputLaw::Beta { .. } => (0.0, 1.0),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        match *self {
            InputLaw::Uniform { lo, hi } => 1.0 / (hi - lo),
            InputLaw::Beta { a, b } => x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0) / beta(a, b),
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            InputLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            InputLaw::Beta { a, b } => BetaDist::new(a, b).expect("validated").sample(rng),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            InputLaw::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                    return domain(format!(
                        "uniform law needs finite lo < hi, got [{lo}, {hi}]"
                    ));
                }
            }
            InputLaw::Beta { a, b } => {
                if !(a >= 1.0 && b >= 1.0 && a.is_finite() && b.is_finite()) {
                    return domain(format!("beta law needs a, b >= 1, got ({a}, {b})"));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.support();
        let slack = 1e-12 * (hi - lo);
        x >= lo - slack && x <= hi + slack
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSpec {
    pub kernel: BaseKernel,
    #[serde(default)]
    pub law: InputLaw,
}

fn default_quadrature_order() -> usize {
    64
}

/// Per-coordinate kernels and input laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub coordinates: Vec<CoordinateSpec>,
    #[serde(default = "default_quadrature_order")]
    pub quadrature_order: usize,
}

impl KernelSpec {
    /// Same kernel on every coordinate, uniform law on `[0, 1]`.
    pub fn uniform(d: usize, kernel: BaseKernel) -> Self {
        Self {
            coordinates: vec![
                CoordinateSpec {
                    kernel,
                    law: InputLaw::default(),
                };
                d
            ],
            quadrature_order: default_quadrature_order(),
        }
    }

    pub fn d(&self) -> usize {
        self.coordinates.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.coordinates.is_empty() {
            return domain("kernel spec has no coordinates");
        }
        if self.quadrature_order < 8 {
            return domain(format!(
                "quadrature_order must be >= 8, got {}",
                self.quadrature_order
            ));
        }
        for c in &self.coordinates {
            c.law.validate()?;
            c.kernel.validate(&c.law)?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        hash_json(self)
    }

    /// Draw `n` i.i.d. rows from the product input law.
    pub fn sample_design(&self, n: usize, rng: &mut Rng) -> Matrix {
        Matrix::from_fn(n, self.d(), |_, j| self.coordinates[j].law.sample(rng))
    }
}

pub(crate) fn hash_json<T: Serialize + ?Sized>(value: &T) -> String {
    crate::sha256_hex(&serde_json::to_vec(value).expect("serializable"))
}

/// Centered kernel `k0_a` of one coordinate.
#[derive(Debug, Clone)]
pub struct CenteredKernel {
    base: BaseKernel,
    law: InputLaw,
    rule: GaussLegendre,
    total_mean: f64,
}

impl CenteredKernel {
    pub fn new(spec: &KernelSpec, coordinate: usize) -> Result<Self> {
        spec.validate()?;
        let c = spec.coordinates.get(coordinate).ok_or(Error::Index {
            coordinate: coordinate + 1,
            d: spec.d(),
        })?;
        let rule = GaussLegendre::new(spec.quadrature_order);
        let mut k = Self {
            base: c.kernel,
            law: c.law,
            rule,
            total_mean: f64::NAN,
        };
        let (lo, hi) = c.law.support();
        let e: f64 = k
            .rule
            .mapped(lo, hi)
            .map(|(u, w)| w * c.law.pdf(u) * k.mean_embedding(u))
            .sum();
        if e <= 1e-12 {
            return Err(Error::DegenerateKernel {
                coordinate: coordinate + 1,
                mean: e,
            });
        }
        k.total_mean = e;
        Ok(k)
    }

    pub fn base(&self) -> BaseKernel {
        self.base
    }

    pub fn law(&self) -> InputLaw {
        self.law
    }

    /// `E_U k(x, U)`, with the quadrature split at `x` where the kernels kink.
    pub fn mean_embedding(&self, x: f64) -> f64 {
        let (lo, hi) = self.law.support();
        let mid = x.clamp(lo, hi);
        let mut s = 0.0;
        if mid > lo {
            s += self
                .rule
                .integrate(lo, mid, |u| self.law.pdf(u) * self.base.eval(x, u));
        }
        if hi > mid {
            s += self
                .rule
                .integrate(mid, hi, |u| self.law.pdf(u) * self.base.eval(x, u));
        }
        s
    }

    /// `E_{U,V} k(U, V)`.
    pub fn total_mean(&self) -> f64 {
        self.total_mean
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.eval_with(x, self.mean_embedding(x), y, self.mean_embedding(y))
    }

    /// Evaluation with precomputed mean embeddings `mx = m(x)`, `my = m(y)`.
    #[inline]
    pub fn eval_with(&self, x: f64, mx: f64, y: f64, my: f64) -> f64 {
        self.base.eval(x, y) - mx * my / self.total_mean
    }

    /// `[k0(xs[i], ys[j])]`.
    pub fn cross_gram(&self, xs: &[f64], ys: &[f64]) -> Matrix {
        let mx: Vec<f64> = xs.iter().map(|&x| self.mean_embedding(x)).collect();
        let my: Vec<f64> = ys.iter().map(|&y| self.mean_embedding(y)).collect();
        Matrix::from_fn(xs.len(), ys.len(), |i, j| {
            self.eval_with(xs[i], mx[i], ys[j], my[j])
        })
    }

    /// Symmetric `[k0(xs[i], xs[j])]`.
    pub fn gram(&self, xs: &[f64]) -> Matrix {
        let n = xs.len();
        let m: Vec<f64> = xs.iter().map(|&x| self.mean_embedding(x)).collect();
        let mut k = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.eval_with(xs[i], m[i], xs[j], m[j]);
                k.set(i, j, v);
                k.set(j, i, v);
            }
        }
        k
    }
}

/// Centered kernel evaluator for coordinate `coordinate` (0-based).
pub fn center_kernel(spec: &KernelSpec, coordinate: usize) -> Result<CenteredKernel> {
    CenteredKernel::new(spec, coordinate)
}

/// A nonempty set of input coordinates `v ⊆ {1..d}`, stored 1-based and
/// strictly increasing. Ordered graded-lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct GroupIndex(Vec<usize>);

impl GroupIndex {
    pub fn new(mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return domain("group must be nonempty");
        }
        if members[0] == 0 {
            return domain("group members are 1-based coordinate indices");
        }
        Ok(Self(members))
    }

    pub fn singleton(coordinate: usize) -> Self {
        Self::new(vec![coordinate]).expect("1-based coordinate")
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    /// 0-based coordinate indices.
    pub fn coords(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|m| m - 1)
    }

    fn check_within(&self, d: usize) -> Result<()> {
        match self.0.last() {
            Some(&last) if last > d => Err(Error::Index {
                coordinate: last,
                d,
            }),
            _ => Ok(()),
        }
    }
}

impl TryFrom<Vec<usize>> for GroupIndex {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<GroupIndex> for Vec<usize> {
    fn from(g: GroupIndex) -> Self {
        g.0
    }
}

impl Ord for GroupIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for GroupIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for GroupIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|m| format!("x{m}")).collect();
        f.write_str(&parts.join(":"))
    }
}

/// All nonempty subsets of `{1..d}` with at most `max_order` members, graded-lex.
pub fn enumerate_groups(d: usize, max_order: usize) -> Result<Vec<GroupIndex>> {
    if max_order == 0 || max_order > d {
        return domain(format!("max_order must be in 1..={d}, got {max_order}"));
    }
    let mut out = Vec::new();
    for size in 1..=max_order {
        let mut combo: Vec<usize> = (1..=size).collect();
        loop {
            out.push(GroupIndex(combo.clone()));
            // next combination in lexicographic order
            let mut i = size;
            while i > 0 && combo[i - 1] == d - size + i {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            combo[i - 1] += 1;
            for j in i..size {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
    Ok(out)
}

/// Eigenvalues of `K/n`, descending, tiny negatives clipped to zero.
pub fn gram_spectrum(k: &Matrix, n: usize) -> Result<Vec<f64>> {
    check_symmetric(k, 1e-10)?;
    let values = sym_eigenvalues(&k.scaled(1.0 / n as f64))?;
    clip_spectrum(values, k.trace() / n as f64)
}

fn clip_spectrum(mut values: Vec<f64>, trace: f64) -> Result<Vec<f64>> {
    let floor = -1e-8 * trace.abs();
    let min = values.last().copied().unwrap_or(0.0);
    if min < floor {
        return Err(Error::NotPsd { min, trace });
    }
    for v in values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(values)
}

/// Per-coordinate centered kernels for a spec, built once.
#[derive(Debug, Clone)]
pub struct CenteredKernels(Vec<CenteredKernel>);

impl CenteredKernels {
    pub fn new(spec: &KernelSpec) -> Result<Self> {
        (0..spec.d())
            .map(|a| CenteredKernel::new(spec, a))
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn coordinate(&self, a: usize) -> &CenteredKernel {
        &self.0[a]
    }

    /// Group kernel `k_v(x_v, y_v)` for full-length rows `x`, `y`.
    pub fn eval_group(&self, group: &GroupIndex, x: &[f64], y: &[f64]) -> f64 {
        group.coords().map(|a| self.0[a].eval(x[a], y[a])).product()
    }

    /// Cross Gram matrices `[k_v(a_i, b_j)]` for each group.
    pub fn cross_grams(
        &self,
        a: &Matrix,
        b: &Matrix,
        groups: &[GroupIndex],
    ) -> Result<Vec<Matrix>> {
        if a.cols() != b.cols() || a.cols() != self.0.len() {
            return Err(Error::Dimension {
                what: "design columns",
                expected: self.0.len(),
                got: a.cols().max(b.cols()),
            });
        }
        let mut per_coord: Vec<Option<Matrix>> = vec![None; self.0.len()];
        for g in groups {
            g.check_within(self.0.len())?;
            for c in g.coords() {
                if per_coord[c].is_none() {
                    per_coord[c] = Some(self.0[c].cross_gram(&a.column(c), &b.column(c)));
                }
            }
        }
        groups.iter().map(|g| product_over(g, &per_coord)).collect()
    }
}

fn product_over(g: &GroupIndex, per_coord: &[Option<Matrix>]) -> Result<Matrix> {
    let mut it = g.coords();
    let first = it.next().expect("nonempty group");
    let mut k = per_coord[first].clone().expect("computed");
    for c in it {
        k = k.hadamard(per_coord[c].as_ref().expect("computed"))?;
    }
    Ok(k)
}

/// Per-group centered Gram matrices of a design, with spectra and eigenbases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramSet {
    pub design: Matrix,
    pub groups: Vec<GroupIndex>,
    pub grams: Vec<Matrix>,
    /// Descending eigenvalues of `K_v / n`, clipped at 0.
    pub spectra: Vec<Vec<f64>>,
    /// Eigendecomposition of `K_v` itself, used by the solver.
    pub eigen: Vec<SymEigen>,
    pub kernel_hash: String,
    pub design_hash: String,
}

impl GramSet {
    pub fn n(&self) -> usize {
        self.design.rows()
    }

    pub fn d(&self) -> usize {
        self.design.cols()
    }

    pub fn group_position(&self, g: &GroupIndex) -> Option<usize> {
        self.groups.iter().position(|h| h == g)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, self)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Ok(serde_json::from_reader(f)?)
    }
}

/// Content hash of `(design, spec, groups)` used as the Gram cache key.
pub fn gram_cache_key(spec: &KernelSpec, design: &Matrix, groups: &[GroupIndex]) -> String {
    hash_json(&(design, spec, groups))
}

/// Build the Gram set, reusing `<dir>/gram-<key>.json` when present.
pub fn anova_gram_cached(
    spec: &KernelSpec,
    design: &Matrix,
    groups: &[GroupIndex],
    dir: &Path,
) -> Result<GramSet> {
    let path = dir.join(format!(
        "gram-{}.json",
        gram_cache_key(spec, design, groups)
    ));
    if path.exists() {
        return GramSet::load_json(&path);
    }
    let set = anova_gram(spec, design, groups)?;
    std::fs::create_dir_all(dir)?;
    set.save_json(&path)?;
    Ok(set)
}

pub fn anova_gram(spec: &KernelSpec, design: &Matrix, groups: &[GroupIndex]) -> Result<GramSet> {
    let n = design.rows();
    let d = design.cols();
    if n < 2 {
        return domain(format!("need at least 2 design rows, got {n}"));
    }
    if spec.d() != d {
        return Err(Error::Dimension {
            what: "kernel spec coordinates vs design columns",
            expected: d,
            got: spec.d(),
        });
    }
    if groups.is_empty() {
        return domain("no groups given");
    }
    for g in groups {
        g.check_within(d)?;
    }
    for i in 0..n {
        for (a, c) in spec.coordinates.iter().enumerate() {
            let x = design.get(i, a);
            if !c.law.contains(x) {
                return domain(format!(
                    "design value {x} at row {i}, column {} lies outside the input law's support",
                    a + 1
                ));
            }
        }
    }
    let mut groups = groups.to_vec();
    groups.sort();
    groups.dedup();

    let kernels = CenteredKernels::new(spec)?;
    let mut per_coord: Vec<Option<Matrix>> = vec![None; d];
    for g in &groups {
        for c in g.coords() {
            if per_coord[c].is_none() {
                per_coord[c] = Some(kernels.coordinate(c).gram(&design.column(c)));
            }
        }
    }
    let mut grams = Vec::with_capacity(groups.len());
    let mut spectra = Vec::with_capacity(groups.len());
    let mut eigen = Vec::with_capacity(groups.len());
    for g in &groups {
        let k = product_over(g, &per_coord)?;
        let e = sym_eigen(&k)?;
        let spec_v = clip_spectrum(
            e.values.iter().map(|v| v / n as f64).collect(),
            k.trace() / n as f64,
        )?;
        grams.push(k);
        spectra.push(spec_v);
        eigen.push(e);
    }
    Ok(GramSet {
        design: design.clone(),
        groups,
        grams,
        spectra,
        eigen,
        kernel_hash: spec.content_hash(),
        design_hash: hash_json(design),
    })
}
