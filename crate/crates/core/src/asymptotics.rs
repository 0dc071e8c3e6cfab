//! Asymptotic constants and limit laws of `(â_T, b̂_T)`.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::hermite::{check_hurst, HermiteSpec};
use crate::quadrature::{
    gauss_legendre_16, integrate, integrate_left_singular, integrate_to_infinity, Tolerance,
};

/// Beyond this point `I(x)` is replaced by its asymptotic series.
const SERIES_FROM: f64 = 60.0;
/// Terms kept in the series for `I(x) x^{-β}`.
const SERIES_TERMS: usize = 5;

fn inner_tol() -> Tolerance {
    Tolerance { abs: 1e-15, rel: 1e-12, max_panels: 4000 }
}

/// `I(x) = ∫∫_{ℝ₊²} e^{-(u+v)} |u-v-x|^{2H-2} du dv = ½ ∫_ℝ e^{-|w|} |w-x|^{2H-2} dw`.
///
/// Even in `x`. For `x ≥ 0` and `β = 2H - 2` the second form splits into
/// `∫_0^∞ e^{-u}(x+u)^β du + ∫_0^x e^{-(x-y)} y^β dy + e^{-x} Γ(β+1)`.
pub fn sigma_inner(h: f64, x: f64) -> Result<f64> {
    check_hurst(h)?;
    let x = x.abs();
    let beta = 2.0 * h - 2.0;
    let tol = inner_tol();
    let left = if x == 0.0 {
        integrate_left_singular(|u: f64| (-u).exp(), 0.0, 1.0, beta, tol)?
            + integrate_to_infinity(|u: f64| (-u).exp() * u.powf(beta), 1.0, tol)?
    } else {
        integrate_to_infinity(|u: f64| (-u).exp() * (x + u).powf(beta), 0.0, tol)?
    };
    let middle = if x == 0.0 {
        0.0
    } else {
        integrate_left_singular(|y: f64| (-(x - y)).exp(), 0.0, x, beta, tol)?
    };
    let right = (-x).exp() * gamma(beta + 1.0);
    Ok(0.5 * (left + middle + right))
}

/// `∫_X^∞ I(x)² dx` from the large-`x` expansion `I(x) ≈ x^β Σ_k β(β-1)⋯(β-2k+1) x^{-2k}`,
/// which follows from the Laplace moments `E[D^{2k}] = (2k)!`.
fn tail_of_square(h: f64, from: f64) -> f64 {
    let beta = 2.0 * h - 2.0;
    let mut coef = vec![1.0; SERIES_TERMS];
    for k in 1..SERIES_TERMS {
        let j = (2 * k) as f64;
        coef[k] = coef[k - 1] * (beta - j + 2.0) * (beta - j + 1.0);
    }
    let mut total = 0.0;
    for (i, ci) in coef.iter().enumerate() {
        for (j, cj) in coef.iter().enumerate() {
            let p = 2.0 * beta - 2.0 * (i + j) as f64;
            total += ci * cj * from.powf(p + 1.0) / -(p + 1.0);
        }
    }
    total
}

fn sigma_prefactor(h: f64) -> f64 {
    let g = gamma(2.0 * h);
    (2.0 * h - 1.0) / (h * g * g)
}

/// `‖I‖²_{L²(ℝ)}` by adaptive quadrature.
pub fn sigma_inner_norm_sq(h: f64) -> Result<f64> {
    check_sigma_range(h)?;
    let f = |x: f64| sigma_inner(h, x).map(|v| v * v).unwrap_or(f64::NAN);
    let tol = Tolerance { abs: 1e-12, rel: 1e-11, max_panels: 4000 };
    let head = integrate(f, 0.0, 1.0, tol)?;
    let body = integrate(f, 1.0, SERIES_FROM, tol)?;
    Ok(2.0 * (head + body + tail_of_square(h, SERIES_FROM)))
}

fn check_sigma_range(h: f64) -> Result<()> {
    check_hurst(h)?;
    if h >= 0.75 {
        return Err(Error::param(format!("sigma_H is finite only for H < 3/4, got {h}")));
    }
    Ok(())
}

fn memo() -> &'static RwLock<HashMap<u64, f64>> {
    static M: OnceLock<RwLock<HashMap<u64, f64>>> = OnceLock::new();
    M.get_or_init(|| RwLock::new(HashMap::new()))
}

/// `σ_H = (2H-1)/(H Γ(2H)²) · ‖I‖`, for `½ < H < ¾`. Cached per `H`.
pub fn sigma_h(h: f64) -> Result<f64> {
    check_sigma_range(h)?;
    let key = h.to_bits();
    if let Some(v) = memo().read().expect("memo lock").get(&key) {
        return Ok(*v);
    }
    let v = sigma_prefactor(h) * sigma_inner_norm_sq(h)?.sqrt();
    memo().write().expect("memo lock").insert(key, v);
    Ok(v)
}

/// `σ_H` with the outer `x`-integral on a fixed mesh of `panels` 16-point
/// Gauss–Legendre panels on `[0, 60]`, graded toward the cusp at `x = 0`.
/// Doubling `panels` is the mesh-refinement diagnostic.
pub fn sigma_h_on_mesh(h: f64, panels: usize) -> Result<f64> {
    check_sigma_range(h)?;
    if panels == 0 {
        return Err(Error::param("need at least one panel"));
    }
    let gl = gauss_legendre_16();
    let grading = 3.0;
    let mut s = 0.0;
    let err = std::cell::RefCell::new(None);
    for p in 0..panels {
        let a = SERIES_FROM * (p as f64 / panels as f64).powf(grading);
        let b = SERIES_FROM * ((p + 1) as f64 / panels as f64).powf(grading);
        s += gl.integrate(
            |x| match sigma_inner(h, x) {
                Ok(v) => v * v,
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            a,
            b,
        );
    }
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    let norm_sq = 2.0 * (s + tail_of_square(h, SERIES_FROM));
    Ok(sigma_prefactor(h) * norm_sq.sqrt())
}

/// `B_{H,q} = H(2H-1)/sqrt((H₀-½)(4H₀-3)) · Γ(2H + (2/q)(1-H)) / (2H + (2/q)(1-H) - 1)`.
///
/// For `q ≥ 2` the second-chaos part of `∫ Y²` carries an extra factor `q`, and
/// simulated `G_T` has standard deviation close to `q B_{H,q}` rather than `B_{H,q}`.
pub fn b_constant(spec: &HermiteSpec) -> Result<f64> {
    let h = spec.h();
    let h0 = spec.h0();
    let d = 4.0 * h0 - 3.0;
    if d <= 0.0 {
        return Err(Error::param(format!(
            "B_(H,q) needs 4H0 - 3 > 0, i.e. q >= 2 or H > 3/4; got q = {}, H = {h}",
            spec.q()
        )));
    }
    let e = 2.0 * h + 2.0 / spec.q() as f64 * (1.0 - h);
    Ok(h * (2.0 * h - 1.0) / ((h0 - 0.5) * d).sqrt() * gamma(e) / (e - 1.0))
}

/// Which fluctuation regime `(q, H)` falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FluctuationCase {
    GaussianSubcritical,
    GaussianCritical,
    GaussianSupercritical,
    HermiteDriven,
}

impl FluctuationCase {
    pub fn of(spec: &HermiteSpec) -> Self {
        match spec.q() {
            1 if spec.h() < 0.75 => Self::GaussianSubcritical,
            1 if spec.h() == 0.75 => Self::GaussianCritical,
            1 => Self::GaussianSupercritical,
            _ => Self::HermiteDriven,
        }
    }
}

/// Limit law of one normalized error component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitLaw {
    /// `N(0, sd²)`.
    Gaussian { sd: f64 },
    /// `-coefficient · (G_∞ - (B^H_1)²·[fbm_square_correction])` with `G_∞ = B_{H,q} R`,
    /// `R` unit Rosenblatt of the given parameter; `scale = coefficient · B_{H,q}`.
    Rosenblatt { coefficient: f64, scale: f64, parameter: f64, fbm_square_correction: bool },
    /// `scale · Z_1^{q,H}`.
    Hermite { q: u32, h: f64, scale: f64 },
}

impl LimitLaw {
    /// Standard deviation of the limit, when it has a closed form.
    pub fn sd(&self) -> Option<f64> {
        match *self {
            LimitLaw::Gaussian { sd } => Some(sd),
            LimitLaw::Rosenblatt { scale, fbm_square_correction: false, .. } => Some(scale),
            LimitLaw::Rosenblatt { .. } => None,
            LimitLaw::Hermite { scale, .. } => Some(scale),
        }
    }
}

/// Rates and limits of `(â_T - a, b̂_T - b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationLaw {
    pub case_id: FluctuationCase,
    /// `â_T - a` is multiplied by `T^{a_rate_exponent}`, divided by `sqrt(log T)` when `a_rate_log`.
    pub a_rate_exponent: f64,
    pub a_rate_log: bool,
    pub b_rate_exponent: f64,
    pub a_limit: LimitLaw,
    pub b_limit: LimitLaw,
    pub components_independent: bool,
}

impl FluctuationLaw {
    /// Multiplier applied to `â_T - a` at horizon `T` (natural log in the critical case).
    pub fn a_normalizer(&self, horizon: f64) -> f64 {
        let p = horizon.powf(self.a_rate_exponent);
        if self.a_rate_log {
            p / horizon.ln().sqrt()
        } else {
            p
        }
    }

    pub fn b_normalizer(&self, horizon: f64) -> f64 {
        horizon.powf(self.b_rate_exponent)
    }
}

/// Resolves the fluctuation regime and its limit constants.
pub fn fluctuation_law(spec: &HermiteSpec, a: f64) -> Result<FluctuationLaw> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::param(format!("mean-reversion rate must be positive, got {a}")));
    }
    let h = spec.h();
    let q = spec.q();
    let case_id = FluctuationCase::of(spec);
    let denom = 2.0 * h * h * gamma(2.0 * h);
    let b_rate_exponent = 1.0 - h;
    let gaussian_b = LimitLaw::Gaussian { sd: 1.0 / a };
    let law = match case_id {
        FluctuationCase::GaussianSubcritical => FluctuationLaw {
            case_id,
            a_rate_exponent: 0.5,
            a_rate_log: false,
            b_rate_exponent,
            a_limit: LimitLaw::Gaussian { sd: a.powf(1.0 + 4.0 * h) * sigma_h(h)? / denom },
            b_limit: gaussian_b,
            components_independent: true,
        },
        FluctuationCase::GaussianCritical => FluctuationLaw {
            case_id,
            a_rate_exponent: 0.5,
            a_rate_log: true,
            b_rate_exponent,
            a_limit: LimitLaw::Gaussian { sd: 0.75 * (a / std::f64::consts::PI).sqrt() },
            b_limit: gaussian_b,
            components_independent: true,
        },
        FluctuationCase::GaussianSupercritical => {
            let coefficient = a.powf(2.0 * h - 1.0) / denom;
            FluctuationLaw {
                case_id,
                a_rate_exponent: 2.0 * (1.0 - h),
                a_rate_log: false,
                b_rate_exponent,
                a_limit: LimitLaw::Rosenblatt {
                    coefficient,
                    scale: coefficient * b_constant(spec)?,
                    parameter: 2.0 * h - 1.0,
                    fbm_square_correction: true,
                },
                b_limit: gaussian_b,
                components_independent: false,
            }
        }
        FluctuationCase::HermiteDriven => {
            let e = 2.0 / q as f64 * (1.0 - h);
            let coefficient = a.powf(1.0 - e) / denom;
            FluctuationLaw {
                case_id,
                a_rate_exponent: e,
                a_rate_log: false,
                b_rate_exponent,
                a_limit: LimitLaw::Rosenblatt {
                    coefficient,
                    scale: coefficient * b_constant(spec)?,
                    parameter: 1.0 - e,
                    fbm_square_correction: false,
                },
                b_limit: LimitLaw::Hermite { q, h, scale: 1.0 / a },
                components_independent: false,
            }
        }
    };
    Ok(law)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_right_singular;
    use approx::assert_relative_eq;

    #[test]
    fn inner_is_even_and_positive() {
        for x in [0.0, 0.3, 2.0, 15.0] {
            let v = sigma_inner(0.6, x).unwrap();
            assert!(v > 0.0);
            assert_eq!(v, sigma_inner(0.6, -x).unwrap());
        }
    }

    #[test]
    fn inner_at_zero_is_gamma() {
        // ½ ∫ e^{-|w|}|w|^β dw = Γ(β + 1)
        let h = 0.65;
        assert_relative_eq!(sigma_inner(h, 0.0).unwrap(), gamma(2.0 * h - 1.0), max_relative = 1e-11);
    }

    #[test]
    fn inner_matches_direct_double_integral() {
        // (u, v) quadrature without the w-substitution; singular line v = u - x split out
        let (h, x) = (0.6, 0.8);
        let beta = 2.0 * h - 2.0;
        let tol = Tolerance::new(1e-14, 1e-11);
        let outer = |u: f64| {
            let c = u - x;
            let inner = if c > 0.0 {
                integrate_right_singular(|v: f64| (-v).exp(), 0.0, c, beta, tol).unwrap()
                    + (-c).exp() * gamma(beta + 1.0)
            } else {
                integrate_to_infinity(|v: f64| (-v).exp() * (v - c).powf(beta), 0.0, tol).unwrap()
            };
            (-u).exp() * inner
        };
        let direct =
            integrate(outer, 0.0, x, tol).unwrap() + integrate_to_infinity(outer, x, tol).unwrap();
        assert!((direct - sigma_inner(h, x).unwrap()).abs() < 1e-8, "{direct}");
    }

    #[test]
    fn tail_series_matches_quadrature_past_the_cut() {
        let h = 0.6;
        let f = |x: f64| sigma_inner(h, x).unwrap().powi(2);
        let q = integrate(f, 60.0, 400.0, Tolerance::new(1e-14, 1e-11)).unwrap();
        let s = tail_of_square(h, 60.0) - tail_of_square(h, 400.0);
        assert_relative_eq!(q, s, max_relative = 1e-8);
    }

    #[test]
    fn sigma_is_positive_and_finite() {
        for h in [0.55, 0.6, 0.7] {
            let s = sigma_h(h).unwrap();
            assert!(s > 0.0 && s.is_finite());
        }
        assert!(sigma_h(0.75).is_err());
    }

    #[test]
    fn b_constant_golden_and_pole() {
        let s = HermiteSpec::new(2, 0.7).unwrap();
        let want = 0.7 * 0.4 / (0.35f64 * 0.4).sqrt() * gamma(1.7) / 0.7;
        assert_relative_eq!(b_constant(&s).unwrap(), want, max_relative = 1e-14);
        assert_relative_eq!(want, 0.971_375_664_768_408, max_relative = 1e-12);
        assert!(b_constant(&HermiteSpec::new(1, 0.75).unwrap()).is_err());
        assert!(b_constant(&HermiteSpec::new(1, 0.9).unwrap()).unwrap() > 0.0);
    }

    #[test]
    fn case_partition() {
        let c = |q, h| FluctuationCase::of(&HermiteSpec::new(q, h).unwrap());
        assert_eq!(c(1, 0.6), FluctuationCase::GaussianSubcritical);
        assert_eq!(c(1, 0.75), FluctuationCase::GaussianCritical);
        assert_eq!(c(1, 0.8), FluctuationCase::GaussianSupercritical);
        assert_eq!(c(3, 0.6), FluctuationCase::HermiteDriven);
    }

    #[test]
    fn critical_scale() {
        let law = fluctuation_law(&HermiteSpec::new(1, 0.75).unwrap(), 1.0).unwrap();
        assert_relative_eq!(law.a_limit.sd().unwrap(), 0.423_142_1, max_relative = 1e-6);
        assert!(law.a_rate_log);
        assert_relative_eq!(law.b_rate_exponent, 0.25);
    }

    #[test]
    fn hermite_driven_rates() {
        let law = fluctuation_law(&HermiteSpec::new(2, 0.7).unwrap(), 1.0).unwrap();
        assert_relative_eq!(law.a_rate_exponent, 0.3, epsilon = 1e-15);
        assert_relative_eq!(law.b_rate_exponent, 0.3, epsilon = 1e-15);
        assert!(!law.components_independent);
        match law.a_limit {
            LimitLaw::Rosenblatt { scale, parameter, .. } => {
                assert_relative_eq!(parameter, 0.7, epsilon = 1e-15);
                let b = b_constant(&HermiteSpec::new(2, 0.7).unwrap()).unwrap();
                assert_relative_eq!(scale, b / (2.0 * 0.49 * gamma(1.4)), max_relative = 1e-14);
            }
            other => panic!("{other:?}"),
        }
    }
}
