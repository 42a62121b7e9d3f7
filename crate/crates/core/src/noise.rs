//! The generalized-Gaussian error family `π_α(x) = a_α exp(-|x|^α)`.
//!
//! Observation errors are `ε = Z / σ_α` with `Z ~ π_α`, so `Var(ε) = 1`;
//! the response noise is `σ·ε`. The family used for estimation requires
//! `α > 2`; `α = 2` (the Gaussian case) is admitted in probe mode only.

use rand::Rng as _;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_lr};

use crate::error::{domain, Result};
use crate::quadrature::integrate_adaptive;
use crate::rng::{self, Rng};

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha < 2.0 {
        return domain(format!("alpha must be finite and >= 2, got {alpha}"));
    }
    Ok(())
}

/// `a_α = 1 / ∫ exp(-|x|^α) dx = α / (2 Γ(1/α))`.
pub fn normalizing_constant(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(alpha / (2.0 * gamma(1.0 / alpha)))
}

/// `Var(Z) = Γ(3/α) / Γ(1/α)`.
pub fn variance(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(gamma(3.0 / alpha) / gamma(1.0 / alpha))
}

/// `E|Z| = a_α Γ(1 + 2/α)`.
pub fn abs_first_moment(alpha: f64) -> Result<f64> {
    Ok(normalizing_constant(alpha)? * gamma(1.0 + 2.0 / alpha))
}

/// `E Z⁴ = Γ(5/α) / Γ(1/α)`.
pub fn fourth_moment(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(gamma(5.0 / alpha) / gamma(1.0 / alpha))
}

/// Error law: exponent, its derived constants, and the noise scale `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub alpha: f64,
    pub a_alpha: f64,
    pub sigma_alpha: f64,
    pub sigma: f64,
}

impl NoiseSpec {
    /// Estimation-grade spec; requires `alpha > 2` and `sigma >= 0`.
    pub fn new(alpha: f64, sigma: f64) -> Result<Self> {
        if !(alpha > 2.0) {
            return domain(format!(
                "alpha must exceed 2 for estimation (got {alpha}); use NoiseSpec::probe for alpha = 2"
            ));
        }
        Self::build(alpha, sigma)
    }

    /// Probe-mode spec; additionally admits the Gaussian case `alpha = 2`.
    pub fn probe(alpha: f64, sigma: f64) -> Result<Self> {
        Self::build(alpha, sigma)
    }

    fn build(alpha: f64, sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return domain(format!("sigma must be finite and >= 0, got {sigma}"));
        }
        Ok(Self {
            alpha,
            a_alpha: normalizing_constant(alpha)?,
            sigma_alpha: variance(alpha)?.sqrt(),
            sigma,
        })
    }

    /// Density `π_α` of the raw variable `Z`.
    pub fn density(&self, x: f64) -> f64 {
        self.a_alpha * (-x.abs().powf(self.alpha)).exp()
    }

    /// Density of the unit-variance error `ε = Z/σ_α`.
    pub fn error_density(&self, e: f64) -> f64 {
        self.sigma_alpha * self.density(self.sigma_alpha * e)
    }

    /// CDF of the unit-variance error.
    pub fn error_cdf(&self, e: f64) -> f64 {
        let y = (self.sigma_alpha * e.abs()).powf(self.alpha);
        let half = 0.5 * gamma_lr(1.0 / self.alpha, y);
        if e >= 0.0 {
            0.5 + half
        } else {
            0.5 - half
        }
    }

    /// One draw of the raw variable `Z ~ π_α`.
    pub fn draw_raw(&self, rng: &mut Rng) -> f64 {
        // |Z| = G^{1/α} with G ~ Gamma(1/α, 1), sign independent
        let g = Gamma::new(1.0 / self.alpha, 1.0)
            .expect("shape 1/alpha is positive")
            .sample(rng);
        let mag = g.powf(1.0 / self.alpha);
        if rng.random::<bool>() {
            mag
        } else {
            -mag
        }
    }

    pub fn sample_raw(&self, n: usize, rng: &mut Rng) -> Vec<f64> {
        (0..n).map(|_| self.draw_raw(rng)).collect()
    }

    /// Unit-variance errors from an explicit generator.
    pub fn sample_errors_with(&self, n: usize, rng: &mut Rng) -> Vec<f64> {
        (0..n)
            .map(|_| self.draw_raw(rng) / self.sigma_alpha)
            .collect()
    }
}

/// `n` unit-variance errors `ε = Z/σ_α`; deterministic in `seed`.
pub fn sample_errors(spec: &NoiseSpec, n: usize, seed: u64) -> Vec<f64> {
    sample_errors_stream(spec, n, seed, 0)
}

/// As [`sample_errors`] on an explicit stream (stream id = replicate id).
pub fn sample_errors_stream(spec: &NoiseSpec, n: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = rng::stream(seed, stream);
    spec.sample_errors_with(n, &mut rng)
}

/// Log-derivative of the upper tail, `d/dt log Π_α([t, ∞))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailSlope {
    /// `-π_α(t) / Π_α([t,∞))` with the tail integral by quadrature.
    pub exact: f64,
    /// Large-`t` expression `-α t^{α-1}`.
    pub analytic: f64,
}

impl TailSlope {
    /// Whether the slope satisfies `≤ -t/ρ²` (membership condition of `M(m, ρ²)`).
    pub fn satisfies(&self, t: f64, rho: f64) -> bool {
        self.exact <= -t / (rho * rho)
    }
}

pub fn tail_log_derivative(alpha: f64, t: f64) -> Result<TailSlope> {
    check_alpha(alpha)?;
    if !(t > 0.0) || !t.is_finite() {
        return domain(format!("t must be positive and finite, got {t}"));
    }
    // tail/π(t) = ∫_t^∞ exp(t^α - x^α) dx; the integrand is below e^-37 past
    // t + min(37/(α t^{α-1}), 37^{1/α}) since x^α - t^α dominates both
    // α t^{α-1}(x-t) and (x-t)^α.
    let ta = t.powf(alpha);
    let reach = (37.0 / (alpha * t.powf(alpha - 1.0))).min(37f64.powf(1.0 / alpha));
    let ratio =
        integrate_adaptive(t, t + reach, 1e-14, 1 << 14, |x| (ta - x.powf(alpha)).exp()).value;
    Ok(TailSlope {
        exact: -1.0 / ratio,
        analytic: -alpha * t.powf(alpha - 1.0),
    })
}

/// Threshold `m = (1/(α ρ²))^{1/(α-2)}` above which the analytic slope is `≤ -t/ρ²`.
pub fn hazard_threshold(alpha: f64, rho: f64) -> Result<f64> {
    if !(alpha > 2.0) {
        return domain(format!("hazard threshold needs alpha > 2, got {alpha}"));
    }
    if !(rho > 0.0) {
        return domain(format!("rho must be positive, got {rho}"));
    }
    Ok((1.0 / (alpha * rho * rho)).powf(1.0 / (alpha - 2.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: panel-doubling quadrature of the density on
    // [0, T] with exp(-T^α) < 1e-16.
    fn moment_by_quadrature(alpha: f64, power: i32, normalized: bool) -> f64 {
        let upper = (16.0 * std::f64::consts::LN_10).powf(1.0 / alpha);
        let mass =
            2.0 * integrate_adaptive(0.0, upper, 1e-12, 1 << 16, |x| (-x.powf(alpha)).exp()).value;
        let m = 2.0
            * integrate_adaptive(0.0, upper, 1e-12, 1 << 16, |x| {
                x.powi(power) * (-x.powf(alpha)).exp()
            })
            .value;
        if normalized {
            m / mass
        } else {
            m
        }
    }

    #[test]
    fn normalizing_constant_examples() {
        assert!((normalizing_constant(2.0).unwrap() - 0.564_189_583_547_756_3).abs() < 1e-12);
        assert!((normalizing_constant(4.0).unwrap() - 0.5516).abs() < 1e-4);
        assert!((normalizing_constant(200.0).unwrap() - 0.5).abs() < 1e-2);
        assert!(normalizing_constant(1.5).is_err());
    }

    #[test]
    fn constants_match_quadrature() {
        for alpha in [2.0, 2.5, 3.0, 4.0, 6.0] {
            let a = normalizing_constant(alpha).unwrap();
            let a_q = 1.0 / moment_by_quadrature(alpha, 0, false);
            assert!(((a - a_q) / a_q).abs() < 1e-10, "a_alpha at {alpha}");
            let v = variance(alpha).unwrap();
            let v_q = moment_by_quadrature(alpha, 2, true);
            assert!(((v - v_q) / v_q).abs() < 1e-8, "variance at {alpha}");
            let m = abs_first_moment(alpha).unwrap();
            let m_q = moment_by_quadrature(alpha, 1, true);
            assert!(((m - m_q) / m_q).abs() < 1e-8, "E|Z| at {alpha}");
            assert!(m <= v.sqrt(), "Jensen at {alpha}");
        }
    }

    #[test]
    fn variance_and_moment_examples() {
        assert!((variance(2.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((variance(4.0).unwrap() - 0.33799).abs() < 1e-4);
        assert!((variance(200.0).unwrap() - 1.0 / 3.0).abs() < 1e-2);
        assert!((abs_first_moment(2.0).unwrap() - 0.564_189_6).abs() < 1e-7);
        assert!((abs_first_moment(4.0).unwrap() - 0.48887).abs() < 1e-4);
    }

    #[test]
    fn estimation_spec_rejects_gaussian() {
        assert!(NoiseSpec::new(2.0, 1.0).is_err());
        assert!(NoiseSpec::new(1.0, 1.0).is_err());
        assert!(NoiseSpec::probe(2.0, 1.0).is_ok());
        assert!(NoiseSpec::probe(1.9, 1.0).is_err());
    }

    #[test]
    fn density_is_even_and_normalized() {
        for alpha in [2.0, 2.5, 3.0, 4.0, 6.0] {
            let s = NoiseSpec::probe(alpha, 1.0).unwrap();
            for x in [0.1, 0.7, 1.3, 2.9] {
                assert_eq!(s.density(x), s.density(-x));
            }
            let upper = (16.0 * std::f64::consts::LN_10).powf(1.0 / alpha);
            let mass = 2.0 * integrate_adaptive(0.0, upper, 1e-13, 1 << 16, |x| s.density(x)).value;
            assert!((mass - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn sampler_is_deterministic() {
        let s = NoiseSpec::new(3.0, 1.0).unwrap();
        assert_eq!(sample_errors(&s, 100, 7), sample_errors(&s, 100, 7));
        assert_ne!(sample_errors(&s, 100, 7), sample_errors(&s, 100, 8));
    }

    #[test]
    fn sampler_moments() {
        let alpha = 3.0;
        let s = NoiseSpec::new(alpha, 1.0).unwrap();
        let n = 100_000;
        let e = sample_errors(&s, n, 42);
        let mean = e.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 / (n as f64).sqrt());
        let var = e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        // Var(ε²) = E ε⁴ - 1 with E ε⁴ = (EZ⁴)/σ_α⁴ from the quadrature oracle
        let kurt = moment_by_quadrature(alpha, 4, true) / variance(alpha).unwrap().powi(2);
        let se = ((kurt - 1.0) / n as f64).sqrt();
        assert!((var - 1.0).abs() < 3.0 * se, "var {var}, se {se}");
    }

    #[test]
    fn sampler_matches_cdf() {
        for alpha in [2.5, 3.0, 4.0] {
            let s = NoiseSpec::new(alpha, 1.0).unwrap();
            let mut e = sample_errors(&s, 100_000, 11);
            e.sort_by(f64::total_cmp);
            let n = e.len() as f64;
            let ks = e
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = s.error_cdf(x);
                    (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
                })
                .fold(0.0, f64::max);
            assert!(ks < 0.01, "KS {ks} at alpha {alpha}");
        }
    }

    #[test]
    fn tail_slope_examples() {
        let m = hazard_threshold(4.0, 1.0).unwrap();
        assert!((m - 0.5).abs() < 1e-15);
        let at_m = tail_log_derivative(4.0, 0.5).unwrap();
        assert!((at_m.analytic + 0.5).abs() < 1e-15);
        let far = tail_log_derivative(4.0, 1.0).unwrap();
        assert_eq!(far.analytic, -4.0);
        assert!(far.satisfies(1.0, 1.0));
        let below = tail_log_derivative(4.0, 0.3).unwrap();
        assert!((below.analytic + 0.108).abs() < 1e-12);
        assert!(below.analytic > -0.3);
        assert!(tail_log_derivative(4.0, 0.0).is_err());
        assert!(tail_log_derivative(4.0, -1.0).is_err());
    }

    #[test]
    fn exact_tail_slope_meets_membership_condition_above_threshold() {
        for alpha in [3.0, 4.0] {
            let m = hazard_threshold(alpha, 1.0).unwrap();
            for k in 0..60 {
                let t = m + 0.05 * k as f64;
                let s = tail_log_derivative(alpha, t).unwrap();
                assert!(s.satisfies(t, 1.0), "alpha {alpha}, t {t}: {s:?}");
                // Mills-ratio bound: the exact hazard dominates the asymptotic one
                assert!(s.exact <= s.analytic + 1e-12 * s.analytic.abs());
            }
        }
    }

    #[test]
    fn exact_tail_slope_matches_incomplete_gamma() {
        let alpha = 3.0;
        let s = NoiseSpec::new(alpha, 1.0).unwrap();
        for t in [0.2, 0.8, 1.5] {
            let tail = s.a_alpha / alpha
                * gamma(1.0 / alpha)
                * (1.0 - gamma_lr(1.0 / alpha, f64::powf(t, alpha)));
            let want = -s.density(t) / tail;
            let got = tail_log_derivative(alpha, t).unwrap().exact;
            assert!(((got - want) / want).abs() < 1e-9, "t {t}: {got} vs {want}");
        }
    }
}
