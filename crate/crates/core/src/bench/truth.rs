//! Test functions with known Hoeffding decompositions.
//!
//! An expression is a sum of terms `coef*f1(xa)*f2(xb)*…` over distinct
//! coordinates, plus an optional constant. Factors are `sinK`, `cosK`
//! (`sin(2πKx)`, `cos(2πKx)`) and `polyK` (`x^K`); each is centered under its
//! coordinate's input law, so a term lives entirely in the component of its
//! coordinate set.
//!
//! ```text
//! 1*sin1(x1) + 0.5*sin1(x2) + 4*poly1(x1)*poly1(x2) - 0.25
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{GroupIndex, InputLaw, KernelSpec};
use crate::quadrature::integrate_adaptive;

pub const ADDITIVE_SINE: &str = "1*sin1(x1) + 0.5*sin1(x2)";
pub const SINE_PLUS_INTERACTION: &str = "1*sin1(x1) + 0.5*sin1(x2) + 4*poly1(x1)*poly1(x2)";
pub const SPARSE_POLYNOMIAL: &str = "3*poly2(x1) + 8*poly1(x2)*poly1(x3)";

/// Expression behind a named truth, or `name` itself when it is not a known name.
pub fn expression_for(name: &str) -> &str {
    match name {
        "additive_sine" => ADDITIVE_SINE,
        "sine_plus_interaction" => SINE_PLUS_INTERACTION,
        "sparse_polynomial" => SPARSE_POLYNOMIAL,
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Sin(u32),
    Cos(u32),
    Poly(u32),
}

impl Basis {
    fn eval(&self, x: f64) -> f64 {
        match *self {
            Basis::Sin(k) => (2.0 * PI * k as f64 * x).sin(),
            Basis::Cos(k) => (2.0 * PI * k as f64 * x).cos(),
            Basis::Poly(k) => x.powi(k as i32),
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Sin(k) => write!(f, "sin{k}"),
            Basis::Cos(k) => write!(f, "cos{k}"),
            Basis::Poly(k) => write!(f, "poly{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Factor {
    basis: Basis,
    /// 0-based coordinate.
    coord: usize,
    /// `E φ(U)` under the coordinate's law.
    center: f64,
}

impl Factor {
    fn eval(&self, x: &[f64]) -> f64 {
        self.basis.eval(x[self.coord]) - self.center
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Term {
    coef: f64,
    factors: Vec<Factor>,
    group: GroupIndex,
}

impl Term {
    fn eval(&self, x: &[f64]) -> f64 {
        self.coef * self.factors.iter().map(|f| f.eval(x)).product::<f64>()
    }
}

/// A parsed truth function with its components.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    source: String,
    intercept: f64,
    terms: Vec<Term>,
    d: usize,
    laws: Vec<InputLaw>,
}

fn parse_error(expr: &str, msg: impl fmt::Display) -> Error {
    Error::Config(format!("truth expression {expr:?}: {msg}"))
}

fn integrate_law(law: &InputLaw, f: impl Fn(f64) -> f64) -> f64 {
    let (lo, hi) = law.support();
    integrate_adaptive(lo, hi, 1e-14, 1 << 12, |u| law.pdf(u) * f(u)).value
}

impl Truth {
    /// Parse a named truth or a custom expression for the coordinates of `spec`.
    pub fn parse(name_or_expr: &str, spec: &KernelSpec) -> Result<Self> {
        let expr = expression_for(name_or_expr.trim());
        let d = spec.d();
        let laws: Vec<InputLaw> = spec.coordinates.iter().map(|c| c.law).collect();
        let mut intercept = 0.0;
        let mut terms = Vec::new();
        let normalized = expr
            .replace('-', "+-")
            .replace("e+-", "e-")
            .replace("E+-", "E-");
        for raw in normalized.split('+') {
            let raw: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
            if raw.is_empty() {
                continue;
            }
            let mut coef = 1.0;
            let mut factors = Vec::new();
            for piece in raw.split('*') {
                if piece.is_empty() {
                    return Err(parse_error(expr, "empty factor"));
                }
                if let Ok(c) = piece.parse::<f64>() {
                    coef *= c;
                    continue;
                }
                let (neg, body) = match piece.strip_prefix('-') {
                    Some(b) => (true, b),
                    None => (false, piece),
                };
                if neg {
                    coef = -coef;
                }
                factors.push(parse_factor(expr, body, d, &laws)?);
            }
            if !coef.is_finite() {
                return Err(parse_error(expr, "non-finite coefficient"));
            }
            if factors.is_empty() {
                intercept += coef;
                continue;
            }
            let mut coords: Vec<usize> = factors.iter().map(|f| f.coord + 1).collect();
            coords.sort_unstable();
            if coords.windows(2).any(|w| w[0] == w[1]) {
                return Err(parse_error(expr, "a term repeats a coordinate"));
            }
            let group = GroupIndex::new(coords)?;
            terms.push(Term {
                coef,
                factors,
                group,
            });
        }
        if terms.is_empty() && intercept == 0.0 && expr.trim() != "0" {
            return Err(parse_error(expr, "no terms"));
        }
        Ok(Self {
            source: expr.to_string(),
            intercept,
            terms,
            d,
            laws,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `E m(X)`.
    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.intercept + self.terms.iter().map(|t| t.eval(x)).sum::<f64>()
    }

    /// Hoeffding component `m_v(x)`.
    pub fn component(&self, group: &GroupIndex, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .filter(|t| &t.group == group)
            .map(|t| t.eval(x))
            .sum()
    }

    /// Groups with a nonzero component, graded-lex.
    pub fn support(&self) -> Vec<GroupIndex> {
        self.component_norms()
            .into_iter()
            .filter(|(_, norm)| *norm > 0.0)
            .map(|(g, _)| g)
            .collect()
    }

    /// `‖m_v‖₂` per group, by products of one-dimensional quadratures.
    pub fn component_norms(&self) -> Vec<(GroupIndex, f64)> {
        let mut by_group: BTreeMap<GroupIndex, Vec<&Term>> = BTreeMap::new();
        for t in &self.terms {
            by_group.entry(t.group.clone()).or_default().push(t);
        }
        by_group
            .into_iter()
            .map(|(g, ts)| {
                let mut s = 0.0;
                for a in &ts {
                    for b in &ts {
                        s += a.coef * b.coef * self.cross_moment(a, b);
                    }
                }
                (g, s.max(0.0).sqrt())
            })
            .collect()
    }

    /// `E[∏ φ_a ∏ ψ_a]` for two terms on the same coordinate set.
    fn cross_moment(&self, a: &Term, b: &Term) -> f64 {
        a.factors
            .iter()
            .map(|fa| {
                let fb = b
                    .factors
                    .iter()
                    .find(|fb| fb.coord == fa.coord)
                    .expect("same group");
                integrate_law(&self.laws[fa.coord], |u| {
                    (fa.basis.eval(u) - fa.center) * (fb.basis.eval(u) - fb.center)
                })
            })
            .product()
    }

    /// `∫ m² dP = m₀² + Σ_v ‖m_v‖²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.intercept * self.intercept
            + self
                .component_norms()
                .iter()
                .map(|(_, n)| n * n)
                .sum::<f64>()
    }
}

fn parse_factor(expr: &str, body: &str, d: usize, laws: &[InputLaw]) -> Result<Factor> {
    let open = body
        .find('(')
        .ok_or_else(|| parse_error(expr, format!("expected f(xK), got {body:?}")))?;
    let inner = body[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| parse_error(expr, format!("missing ')' in {body:?}")))?;
    let head = &body[..open];
    let digits = head.trim_start_matches(|c: char| c.is_ascii_alphabetic());
    let name = &head[..head.len() - digits.len()];
    let k: u32 = digits
        .parse()
        .map_err(|_| parse_error(expr, format!("missing order in {head:?}")))?;
    let basis = match name {
        "sin" if k >= 1 => Basis::Sin(k),
        "cos" if k >= 1 => Basis::Cos(k),
        "poly" if k >= 1 => Basis::Poly(k),
        _ => return Err(parse_error(expr, format!("unknown factor {head:?}"))),
    };
    let coord: usize = inner
        .strip_prefix('x')
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| parse_error(expr, format!("expected xK, got {inner:?}")))?;
    if coord == 0 || coord > d {
        return Err(parse_error(
            expr,
            format!("coordinate x{coord} outside 1..={d}"),
        ));
    }
    let law = laws[coord - 1];
    let center = integrate_law(&law, |u| basis.eval(u));
    Ok(Factor {
        basis,
        coord: coord - 1,
        center,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::BaseKernel;

    fn spec(d: usize) -> KernelSpec {
        KernelSpec::uniform(d, BaseKernel::Brownian)
    }

    #[test]
    fn named_truths_have_expected_supports() {
        let t = Truth::parse("additive_sine", &spec(3)).unwrap();
        assert_eq!(
            t.support(),
            vec![GroupIndex::singleton(1), GroupIndex::singleton(2)]
        );
        let t = Truth::parse("sparse_polynomial", &spec(5)).unwrap();
        assert_eq!(
            t.support(),
            vec![
                GroupIndex::singleton(1),
                GroupIndex::new(vec![2, 3]).unwrap()
            ]
        );
        assert!(Truth::parse("sparse_polynomial", &spec(2)).is_err());
    }

    #[test]
    fn uniform_law_norms_in_closed_form() {
        let t = Truth::parse("additive_sine", &spec(2)).unwrap();
        let n = t.component_norms();
        assert!((n[0].1 - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((n[1].1 - 0.5 * 0.5f64.sqrt()).abs() < 1e-12);
        let p = Truth::parse("sparse_polynomial", &spec(3)).unwrap();
        let n = p.component_norms();
        // Var(U²) = 1/5 - 1/9, Var(U) = 1/12
        assert!((n[0].1 - 3.0 * (4.0f64 / 45.0).sqrt()).abs() < 1e-12);
        assert!((n[1].1 - 8.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn components_are_centered_and_sum_to_m() {
        let t = Truth::parse("sine_plus_interaction", &spec(3)).unwrap();
        let x = [0.3, 0.7, 0.1];
        let sum: f64 = t.support().iter().map(|g| t.component(g, &x)).sum();
        assert!((sum + t.intercept() - t.eval(&x)).abs() < 1e-14);
        let law = InputLaw::default();
        for g in t.support() {
            let c = g.members()[0] - 1;
            let m = integrate_law(&law, |u| {
                let mut z = x;
                z[c] = u;
                t.component(&g, &z)
            });
            assert!(m.abs() < 1e-12, "{g}: {m}");
        }
    }

    #[test]
    fn beta_law_centering() {
        let mut s = spec(1);
        s.coordinates[0].law = InputLaw::Beta { a: 2.0, b: 3.0 };
        let t = Truth::parse("poly1(x1)", &s).unwrap();
        // E U = a/(a+b) for Beta(2,3)
        assert!((t.eval(&[0.4]) - 0.0).abs() < 1e-12);
        let var = 2.0 * 3.0 / (25.0 * 6.0);
        assert!((t.component_norms()[0].1 - f64::sqrt(var)).abs() < 1e-10);
    }

    #[test]
    fn custom_expressions() {
        let t = Truth::parse("-0.5*cos2(x2) + 2 - poly3(x1)", &spec(2)).unwrap();
        assert_eq!(t.intercept(), 2.0);
        let x = [0.2, 0.9];
        let want = 2.0 - 0.5 * (4.0 * PI * 0.9).cos() - (0.008 - 0.25);
        assert!((t.eval(&x) - want).abs() < 1e-12);
        let t = Truth::parse("1e-3*sin1(x1)", &spec(1)).unwrap();
        assert!((t.eval(&[0.25]) - 1e-3).abs() < 1e-15);
        for bad in [
            "",
            "sin1(x3)",
            "tan1(x1)",
            "sin(x1)",
            "sin1(x1)*cos1(x1)",
            "sin1(y1)",
            "2**sin1(x1)",
        ] {
            assert!(Truth::parse(bad, &spec(2)).is_err(), "{bad}");
        }
    }
}
