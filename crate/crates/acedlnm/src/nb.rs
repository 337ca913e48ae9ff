//! Negative binomial log-likelihood with log link, and the special functions
//! it needs (log-gamma, digamma, trigamma).
//!
//! Everything is generic over [`Real`] so the same code propagates dual
//! numbers; the marginal-likelihood gradient differentiates the Hessian
//! assembly, which runs through these functions.

use crate::error::{Error, Result};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Negative binomial dispersion, kept on the log scale for optimization.
/// `Var(Y) = mu + mu^2 / theta`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NegBinParams {
    pub log_theta: f64,
}

impl NegBinParams {
    pub fn from_theta(theta: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::Domain(format!("theta must be positive, got {theta}")));
        }
        Ok(NegBinParams {
            log_theta: theta.ln(),
        })
    }

    pub fn theta(&self) -> f64 {
        self.log_theta.exp()
    }
}

// Lanczos approximation, g = 7, nine coefficients (double precision set).
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const HALF_LOG_TWO_PI: f64 = 0.918_938_533_204_672_74;

/// Log-gamma for positive arguments (Lanczos; small arguments shifted up by
/// the recurrence so the approximation stays in its accurate range).
pub fn lgamma<S: Real>(x: S) -> S {
    debug_assert!(x.value() > 0.0, "lgamma needs x > 0, got {}", x.value());
    let mut shift = S::zero();
    let mut z = x;
    while z.value() < 0.5 {
        shift = shift + z.ln();
        z = z + S::one();
    }
    let zm1 = z - S::one();
    let mut acc = S::from_f64(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc = acc + S::from_f64(c) / (zm1 + S::from_f64(i as f64));
    }
    let t = zm1 + S::from_f64(LANCZOS_G + 0.5);
    S::from_f64(HALF_LOG_TWO_PI) + (zm1 + S::from_f64(0.5)) * t.ln() - t + acc.ln() - shift
}

/// Digamma via upward recurrence into the asymptotic range.
pub fn digamma<S: Real>(x: S) -> S {
    debug_assert!(x.value() > 0.0, "digamma needs x > 0");
    let mut z = x;
    let mut acc = S::zero();
    while z.value() < 12.0 {
        acc = acc - S::one() / z;
        z = z + S::one();
    }
    let inv = S::one() / z;
    let inv2 = inv * inv;
    // ln z - 1/(2z) - sum B_2n / (2n z^{2n})
    let series = S::from_f64(1.0 / 12.0)
        - inv2
            * (S::from_f64(1.0 / 120.0)
                - inv2
                    * (S::from_f64(1.0 / 252.0)
                        - inv2
                            * (S::from_f64(1.0 / 240.0)
                                - inv2
                                    * (S::from_f64(1.0 / 132.0)
                                        - inv2 * S::from_f64(691.0 / 32760.0)))));
    acc + z.ln() - S::from_f64(0.5) * inv - inv2 * series
}

/// Trigamma via upward recurrence into the asymptotic range.
pub fn trigamma<S: Real>(x: S) -> S {
    debug_assert!(x.value() > 0.0, "trigamma needs x > 0");
    let mut z = x;
    let mut acc = S::zero();
    while z.value() < 12.0 {
        acc = acc + S::one() / (z * z);
        z = z + S::one();
    }
    let inv = S::one() / z;
    let inv2 = inv * inv;
    let series = S::one()
        + inv
            * (S::from_f64(0.5)
                + inv
                    * (S::from_f64(1.0 / 6.0)
                        - inv2
                            * (S::from_f64(1.0 / 30.0)
                                - inv2
                                    * (S::from_f64(1.0 / 42.0)
                                        - inv2 * S::from_f64(1.0 / 30.0)))));
    acc + inv * series
}

/// Negative binomial log-pmf and its derivatives in `mu` and `log theta`.
#[derive(Clone, Copy, Debug)]
pub struct NbDerivs<S> {
    pub value: S,
    pub dmu: S,
    pub dmu2: S,
    pub dlogtheta: S,
    pub dlogtheta2: S,
    pub dlogtheta_dmu: S,
}

/// Log-pmf of `y ~ NB(mu, theta)` with all first and second derivatives
/// needed by the optimizer, on the `(mu, log theta)` scale.
pub fn nb_loglik_derivs<S: Real>(y: f64, mu: S, theta: S) -> Result<NbDerivs<S>> {
    if !(y >= 0.0) || y.fract() != 0.0 {
        return Err(Error::Domain(format!(
            "y must be a nonnegative integer, got {y}"
        )));
    }
    if !(mu.value() > 0.0) || !(theta.value() > 0.0) {
        return Err(Error::Domain(format!(
            "mu and theta must be positive, got mu={}, theta={}",
            mu.value(),
            theta.value()
        )));
    }
    let sy = S::from_f64(y);
    let tm = theta + mu;
    let value = sy * (mu / tm).ln() + theta * (theta / tm).ln() + lgamma(sy + theta)
        - lgamma(theta)
        - lgamma(sy + S::one());
    let dmu = sy / mu - (theta + sy) / tm;
    let dmu2 = -sy / (mu * mu) + (theta + sy) / (tm * tm);
    let dtheta = (theta / tm).ln() + (mu - sy) / tm + digamma(theta + sy) - digamma(theta);
    let dtheta2 = S::one() / theta - S::one() / tm - (mu - sy) / (tm * tm)
        + trigamma(theta + sy)
        - trigamma(theta);
    let dtheta_dmu = (sy - mu) / (tm * tm);
    Ok(NbDerivs {
        value,
        dmu,
        dmu2,
        dlogtheta: theta * dtheta,
        dlogtheta2: theta * theta * dtheta2 + theta * dtheta,
        dlogtheta_dmu: theta * dtheta_dmu,
    })
}

/// Per-observation pieces on the linear-predictor scale for the log link:
/// `ll`, `a = d ll / d eta`, `b = d2 ll / d eta2`, plus the log-theta partial
/// and the mixed `d2 ll / d eta d log theta`.
#[derive(Clone, Copy, Debug)]
pub struct EtaTerms<S> {
    pub ll: S,
    pub a: S,
    pub b: S,
    pub dlogtheta: S,
    pub deta_dlogtheta: S,
}

/// Chains the NB derivatives through `mu = exp(eta)`.
pub fn eta_terms<S: Real>(y: f64, eta: S, theta: S) -> Result<EtaTerms<S>> {
    let mu = eta.exp();
    if !mu.is_finite() || mu.value() <= 0.0 {
        return Err(Error::Domain(format!(
            "mean overflowed or degenerated: eta = {}",
            eta.value()
        )));
    }
    let d = nb_loglik_derivs(y, mu, theta)?;
    Ok(EtaTerms {
        ll: d.value,
        a: d.dmu * mu,
        b: d.dmu2 * mu * mu + d.dmu * mu,
        dlogtheta: d.dlogtheta,
        deta_dlogtheta: d.dlogtheta_dmu * mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Dual;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lgamma_known_values() {
        assert!(lgamma(1.0f64).abs() < 1e-14);
        assert!(lgamma(2.0f64).abs() < 1e-14);
        // frozen from a 40-digit reference
        assert_relative_eq!(lgamma(4.7f64), 2.7364051463155666822, max_relative = 1e-13);
        assert_relative_eq!(lgamma(1e-3f64), 6.9071788853838536825, max_relative = 1e-13);
        assert_relative_eq!(
            lgamma(123456.78f64),
            1323901.9132822815172,
            max_relative = 1e-12
        );
    }

    #[test]
    fn lgamma_against_statrs_over_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let x = 10f64.powf(rng.gen_range(-3.0..6.0));
            let ours = lgamma(x);
            let reference = statrs::function::gamma::ln_gamma(x);
            assert!(
                (ours - reference).abs() <= 1e-12 * (1.0 + reference.abs()),
                "x={x}: {ours} vs {reference}"
            );
        }
    }

    #[test]
    fn digamma_euler_mascheroni_and_known_values() {
        // gamma from the independent Euler–Maclaurin series oracle
        let n = 1_000_000u64;
        let mut hsum = 0.0f64;
        for k in 1..=n {
            hsum += 1.0 / k as f64;
        }
        let nf = n as f64;
        let gamma_oracle = hsum - nf.ln() - 0.5 / nf + 1.0 / (12.0 * nf * nf);
        assert_relative_eq!(digamma(1.0f64), -gamma_oracle, epsilon = 1e-12);
        assert_relative_eq!(digamma(1.0f64), -0.57721566490153286061, epsilon = 1e-14);
        assert_relative_eq!(
            digamma(0.013f64),
            -77.479109244104684671,
            max_relative = 1e-13
        );
        assert_relative_eq!(trigamma(0.37f64), 8.3604738277990979087, max_relative = 1e-13);
    }

    #[test]
    fn psi_recurrences_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let x = 10f64.powf(rng.gen_range(-2.0..4.0));
            let r1 = digamma(x + 1.0) - digamma(x) - 1.0 / x;
            assert!(r1.abs() <= 1e-12 * (1.0 + digamma(x).abs()), "x={x}: {r1}");
            let r2 = trigamma(x + 1.0) - trigamma(x) + 1.0 / (x * x);
            assert!(r2.abs() <= 1e-11 * (1.0 + trigamma(x).abs()), "x={x}: {r2}");
        }
    }

    #[test]
    fn psi_functions_are_derivatives_of_each_other() {
        // dual-number lgamma tangent equals digamma, digamma tangent equals trigamma
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let x = 10f64.powf(rng.gen_range(-1.0..3.0));
            let d = digamma(Dual::var(x));
            assert_relative_eq!(d.dx, trigamma(x), max_relative = 1e-11);
            let g = lgamma(Dual::var(x));
            assert_relative_eq!(g.dx, digamma(x), max_relative = 1e-11, epsilon = 1e-12);
        }
    }

    #[test]
    fn nb_loglik_frozen_case() {
        // (y, mu, theta) = (3, 2, 8), all values frozen from a 40-digit oracle
        let d = nb_loglik_derivs(3.0, 2.0f64, 8.0).unwrap();
        assert_relative_eq!(d.value, -1.8259704050339331757, max_relative = 1e-9);
        assert_relative_eq!(d.dmu, 0.4, max_relative = 1e-9);
        assert_relative_eq!(d.dmu2, -0.64, max_relative = 1e-9);
        assert_relative_eq!(d.dlogtheta, 0.10374047837521084276, max_relative = 1e-9);
        assert_relative_eq!(d.dlogtheta2, -0.086382978414912614032, max_relative = 1e-9);
        assert_relative_eq!(d.dlogtheta_dmu, 0.08, max_relative = 1e-9);
    }

    #[test]
    fn nb_loglik_simple_identities() {
        // y = 0: the gamma terms cancel
        let d = nb_loglik_derivs(0.0, 3.7f64, 2.2).unwrap();
        assert_relative_eq!(
            d.value,
            2.2 * (2.2f64 / (2.2 + 3.7)).ln(),
            max_relative = 1e-13
        );
        // score in mu vanishes at y = mu
        let d = nb_loglik_derivs(5.0, 5.0f64, 8.0).unwrap();
        assert!(d.dmu.abs() < 1e-14);
    }

    #[test]
    fn nb_derivatives_match_dual_numbers() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let y = rng.gen_range(0..40) as f64;
            let mu = rng.gen_range(0.05..50.0);
            let theta = 10f64.powf(rng.gen_range(-1.0..2.0));
            // mu direction
            let d = nb_loglik_derivs(y, Dual::var(mu), Dual::c(theta)).unwrap();
            let f = nb_loglik_derivs(y, mu, theta).unwrap();
            assert_relative_eq!(d.value.dx, f.dmu, max_relative = 1e-9, epsilon = 1e-10);
            assert_relative_eq!(d.dmu.dx, f.dmu2, max_relative = 1e-9, epsilon = 1e-10);
            // log-theta direction
            let lt = theta.ln();
            let th_dual = Dual::var(lt).exp();
            let d = nb_loglik_derivs(y, Dual::c(mu), th_dual).unwrap();
            assert_relative_eq!(d.value.dx, f.dlogtheta, max_relative = 1e-8, epsilon = 1e-9);
            assert_relative_eq!(
                d.dlogtheta.dx,
                f.dlogtheta2,
                max_relative = 1e-8,
                epsilon = 1e-9
            );
            assert_relative_eq!(
                d.dmu.dx,
                f.dlogtheta_dmu,
                max_relative = 1e-8,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn nb_pmf_normalizes() {
        for &(mu, theta) in &[(0.5, 0.7), (3.0, 8.0), (10.0, 2.0), (25.0, 15.0)] {
            let sd = (mu + mu * mu / theta).sqrt();
            let y_max = (mu + 40.0 * sd + 200.0) as usize;
            let mut total = 0.0;
            for y in 0..=y_max {
                total += nb_loglik_derivs(y as f64, mu, theta).unwrap().value.exp();
            }
            assert_relative_eq!(total, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn poisson_limit_at_large_theta() {
        let theta = 1e8f64;
        for y in [0u32, 1, 3, 12, 40] {
            for mu in [0.3f64, 2.0, 9.5, 30.0] {
                let nb = nb_loglik_derivs(y as f64, mu, theta).unwrap().value;
                let pois = y as f64 * mu.ln() - mu - lgamma(y as f64 + 1.0);
                assert!((nb - pois).abs() < 1e-4, "y={y} mu={mu}: {nb} vs {pois}");
            }
        }
    }

    #[test]
    fn domain_violations_error() {
        assert!(nb_loglik_derivs(-1.0, 1.0f64, 1.0).is_err());
        assert!(nb_loglik_derivs(1.5, 1.0f64, 1.0).is_err());
        assert!(nb_loglik_derivs(1.0, 0.0f64, 1.0).is_err());
        assert!(nb_loglik_derivs(1.0, 1.0f64, -2.0).is_err());
        assert!(eta_terms(1.0, 800.0f64, 1.0).is_err()); // exp overflow
    }

    #[test]
    fn eta_terms_match_mu_chain() {
        let y = 7.0;
        let eta = 1.3f64;
        let theta = 4.0;
        let mu = eta.exp();
        let d = nb_loglik_derivs(y, mu, theta).unwrap();
        let e = eta_terms(y, eta, theta).unwrap();
        assert_relative_eq!(e.a, d.dmu * mu, max_relative = 1e-13);
        assert_relative_eq!(e.b, d.dmu2 * mu * mu + d.dmu * mu, max_relative = 1e-13);
        // and against dual numbers through eta directly
        let de = eta_terms(y, Dual::var(eta), Dual::c(theta)).unwrap();
        assert_relative_eq!(de.ll.dx, e.a, max_relative = 1e-12);
        assert_relative_eq!(de.a.dx, e.b, max_relative = 1e-12);
    }
}
