//! State paths `X` of `dX = a(b - X)dt + dZ` and OU paths `Y = ∫_0^t e^{-a(t-u)} dZ_u`,
//! plus moment oracles.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::hermite::{check_hurst, SamplePath};
use crate::quadrature::{integrate_left_singular, integrate_to_infinity, Tolerance};

/// Drift parameters: mean-reversion rate `a > 0` and long-run level `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VasicekParams {
    pub a: f64,
    pub b: f64,
}

impl VasicekParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        check_rate(a)?;
        if !b.is_finite() {
            return Err(Error::param(format!("long-run mean must be finite, got {b}")));
        }
        Ok(Self { a, b })
    }
}

fn check_rate(a: f64) -> Result<()> {
    if a.is_finite() && a > 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("mean-reversion rate must be positive, got {a}")))
    }
}

/// Solves the state equation from `X_0 = 0` along `driver`:
/// `X_{k+1} = e^{-a dt} X_k + b (1 - e^{-a dt}) + e^{-a dt / 2} ΔZ_k`.
///
/// The drift part is exact; the convolution weight is the kernel at the step midpoint.
pub fn vasicek_path(params: VasicekParams, driver: &SamplePath) -> Result<SamplePath> {
    check_rate(params.a)?;
    let z = driver.values();
    if z[0] != 0.0 {
        return Err(Error::param(format!("driver must start at 0, got {}", z[0])));
    }
    let dt = driver.grid().dt();
    let decay = (-params.a * dt).exp();
    let half = (-0.5 * params.a * dt).exp();
    let lift = params.b * (1.0 - decay);
    let mut x = Vec::with_capacity(z.len());
    x.push(0.0);
    let mut cur = 0.0;
    for w in z.windows(2) {
        cur = decay * cur + lift + half * (w[1] - w[0]);
        x.push(cur);
    }
    SamplePath::new(*driver.grid(), x)
}

/// `Y` on the grid of `driver`; identical to [`vasicek_path`] with `b = 0`.
pub fn ou_path(a: f64, driver: &SamplePath) -> Result<SamplePath> {
    vasicek_path(VasicekParams { a, b: 0.0 }, driver)
}

/// Deterministic part `b (1 - e^{-a t})` of the state.
pub fn mean_path(params: VasicekParams, t: f64) -> f64 {
    params.b * (1.0 - (-params.a * t).exp())
}

/// `a^{-2H} H Γ(2H)`, the stationary second moment of `Y`.
pub fn stationary_second_moment(a: f64, h: f64) -> f64 {
    a.powf(-2.0 * h) * h * gamma(2.0 * h)
}

fn moment_tolerance() -> Tolerance {
    Tolerance { abs: 1e-14, rel: 1e-11, max_panels: 20_000 }
}

/// `E[Y_t²] = H(2H-1) ∫∫_{[0,t]²} e^{-a(u+v)} |u-v|^{2H-2} du dv`.
///
/// Reduced along `w = |u - v|` to
/// `(H(2H-1)/a) ∫_0^t w^{2H-2} (e^{-aw} - e^{-a(2t-w)}) dw`,
/// whose only singularity is the integrable one at `w = 0`.
/// `t = ∞` returns the closed-form limit.
pub fn expected_y_squared(a: f64, h: f64, t: f64) -> Result<f64> {
    check_rate(a)?;
    check_hurst(h)?;
    if t.is_nan() || t < 0.0 {
        return Err(Error::param(format!("time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    if t.is_infinite() {
        return Ok(stationary_second_moment(a, h));
    }
    let beta = 2.0 * h - 2.0;
    // -expm1 keeps the difference accurate when a(t - w) is small
    let g = |w: f64| (-a * w).exp() * -(-2.0 * a * (t - w)).exp_m1();
    let core = integrate_left_singular(g, 0.0, t, beta, moment_tolerance())?;
    Ok(h * (2.0 * h - 1.0) / a * core)
}

/// `∫∫_{[0,∞)²} e^{-(u+v)} |u-v|^{2H-2} du dv` by quadrature, reduced to
/// `∫_0^∞ w^{2H-2} e^{-w} dw`. Times `2H - 1` this is `Γ(2H)`.
pub fn stationary_kernel_integral(h: f64) -> Result<f64> {
    check_hurst(h)?;
    let beta = 2.0 * h - 2.0;
    let tol = moment_tolerance();
    let head = integrate_left_singular(|w: f64| (-w).exp(), 0.0, 1.0, beta, tol)?;
    let tail = integrate_to_infinity(|w: f64| w.powf(beta) * (-w).exp(), 1.0, tol)?;
    Ok(head + tail)
}

/// `Cov(Z_{b1} - Z_{a1}, Z_{b2} - Z_{a2})` for a unit-variance `H`-self-similar
/// process with stationary increments.
pub fn increment_covariance(h: f64, (a1, b1): (f64, f64), (a2, b2): (f64, f64)) -> f64 {
    let p = |x: f64| x.abs().powf(2.0 * h);
    0.5 * (p(b1 - a2) + p(a1 - b2) - p(b1 - b2) - p(a1 - a2))
}

/// `E[(∫ f dZ)²]` for the step function `f = Σ coeffs[i] 1_{(edges[i], edges[i+1]]}`.
pub fn step_integral_second_moment(h: f64, edges: &[f64], coeffs: &[f64]) -> Result<f64> {
    check_hurst(h)?;
    if edges.len() != coeffs.len() + 1 {
        return Err(Error::param("need one more edge than coefficients"));
    }
    let mut s = 0.0;
    for (i, fi) in coeffs.iter().enumerate() {
        for (j, fj) in coeffs.iter().enumerate() {
            s += fi * fj * increment_covariance(h, (edges[i], edges[i + 1]), (edges[j], edges[j + 1]));
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{simulate_fbm, GridSpec};
    use approx::assert_relative_eq;

    fn zero_driver(t: f64, n: usize) -> SamplePath {
        SamplePath::constant(GridSpec::new(t, n).unwrap(), 0.0)
    }

    #[test]
    fn zero_forcing_stays_at_zero() {
        let x = vasicek_path(VasicekParams::new(1.3, 0.0).unwrap(), &zero_driver(5.0, 100)).unwrap();
        assert!(x.values().iter().all(|&v| v == 0.0));
        let y = ou_path(2.0, &zero_driver(5.0, 100)).unwrap();
        assert!(y.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_part_is_exact() {
        let x = vasicek_path(VasicekParams::new(1.0, 2.0).unwrap(), &zero_driver(1.0, 1000)).unwrap();
        assert_relative_eq!(x.terminal(), 1.264_241_117_657_115_4, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_rate() {
        assert!(VasicekParams::new(0.0, 1.0).is_err());
        assert!(ou_path(-1.0, &zero_driver(1.0, 4)).is_err());
    }

    #[test]
    fn decomposition_into_mean_and_ou() {
        let z = simulate_fbm(0.7, GridSpec::new(10.0, 2000).unwrap(), 9).unwrap();
        let p = VasicekParams::new(0.8, -1.5).unwrap();
        let x = vasicek_path(p, &z).unwrap();
        let y = ou_path(p.a, &z).unwrap();
        for (k, t) in z.grid().times().enumerate() {
            let h = mean_path(p, t);
            assert!((x.values()[k] - h - y.values()[k]).abs() < 1e-12 * (1.0 + k as f64));
        }
    }

    #[test]
    fn midpoint_weight_beats_direct_riemann_sum_oracle() {
        // O(n²) left-point Riemann–Stieltjes sum of e^{-(t-s)} dZ_s at every grid point
        let z = simulate_fbm(0.7, GridSpec::new(2.0, 2000).unwrap(), 4).unwrap();
        let y = ou_path(1.0, &z).unwrap();
        let dt = z.grid().dt();
        let zv = z.values();
        let mut worst: f64 = 0.0;
        for k in (0..=2000).step_by(50) {
            let tk = k as f64 * dt;
            let direct: f64 = (0..k).map(|j| (-(tk - j as f64 * dt)).exp() * (zv[j + 1] - zv[j])).sum();
            worst = worst.max((direct - y.values()[k]).abs());
        }
        // one-step kernel offset dt/2 times total variation scale
        assert!(worst < 5e-3, "{worst}");
    }

    #[test]
    fn second_moment_at_zero_and_infinity() {
        assert_eq!(expected_y_squared(1.0, 0.7, 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            expected_y_squared(1.0, 0.75, f64::INFINITY).unwrap(),
            0.664_670_194_089_568_5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn second_moment_reaches_the_limit() {
        let finite = expected_y_squared(1.0, 0.75, 50.0).unwrap();
        assert_relative_eq!(finite, 0.664_670_194_089_568_5, epsilon = 1e-9);
    }

    #[test]
    fn second_moment_matches_brute_force_double_sum() {
        // graded product rule on the square after the w-shift; independent of the 1-D reduction
        let (a, h, t) = (1.3, 0.65, 2.0);
        let beta = 2.0 * h - 2.0;
        let n = 400;
        let mut s = 0.0;
        // ∫_0^t dv ∫_0^{t-v} dw 2 e^{-a(2v+w)} w^β, inner in w by singular rule
        let gl = crate::quadrature::gauss_legendre_16();
        for p in 0..n {
            let (v0, v1) = (t * p as f64 / n as f64, t * (p + 1) as f64 / n as f64);
            s += gl.integrate(
                |v| {
                    let inner = integrate_left_singular(
                        |w: f64| (-a * w).exp(),
                        0.0,
                        t - v,
                        beta,
                        Tolerance::new(1e-14, 1e-12),
                    )
                    .unwrap();
                    2.0 * (-2.0 * a * v).exp() * inner
                },
                v0,
                v1,
            );
        }
        let oracle = h * (2.0 * h - 1.0) * s;
        assert_relative_eq!(expected_y_squared(a, h, t).unwrap(), oracle, max_relative = 1e-7);
    }

    #[test]
    fn second_moment_is_monotone() {
        let mut prev = 0.0;
        for t in [0.1, 0.5, 1.0, 2.0, 5.0, 20.0] {
            let v = expected_y_squared(0.9, 0.6, t).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn gamma_identity() {
        for h in [0.6, 0.75, 0.9] {
            let v = (2.0 * h - 1.0) * stationary_kernel_integral(h).unwrap();
            assert!((v - gamma(2.0 * h)).abs() < 1e-10, "H = {h}: {v}");
        }
    }

    #[test]
    fn increment_covariance_reduces_to_fbm_covariance() {
        let h = 0.7;
        let (s, t): (f64, f64) = (0.25, 0.75);
        let direct = 0.5 * (s.powf(1.4) + t.powf(1.4) - (t - s).powf(1.4));
        assert_relative_eq!(increment_covariance(h, (0.0, s), (0.0, t)), direct, epsilon = 1e-15);
        assert_relative_eq!(direct, 0.216_567_037_242_140_5, epsilon = 1e-14);
    }
}
