//! Moment estimators of `(a, b)` from one observed path and the rescaled
//! quadratic functional `G_T` of the fast OU process.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{GridSpec, HermiteSimulator, HermiteSpec, SamplePath, SimOptions};
use crate::vasicek::{expected_y_squared, ou_path};

/// Trapezoid rule for `∫_0^T x(t) dt` over the path grid.
pub fn integrate_path(path: &SamplePath) -> f64 {
    trapezoid(path.values(), path.grid().dt())
}

pub(crate) fn trapezoid(v: &[f64], dt: f64) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = v[1..n - 1].iter().sum();
    dt * (inner + 0.5 * (v[0] + v[n - 1]))
}

/// Output of [`estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    /// `(1/T) ∫ X² - ((1/T) ∫ X)²`.
    pub alpha_t: f64,
    pub a_hat: f64,
    pub b_hat: f64,
    pub horizon: f64,
}

/// Relative floor below which `alpha_T` counts as zero.
const DEGENERATE_RATIO: f64 = 1e-12;

/// `a ↦ a^{-2H} H Γ(2H)` inverted: `(alpha / (H Γ(2H)))^{-1/(2H)}`.
pub fn invert_second_moment(alpha: f64, spec: &HermiteSpec) -> f64 {
    (alpha / spec.stationary_moment()).powf(-1.0 / (2.0 * spec.h()))
}

/// Moment estimators from a path observed continuously on `[0, T]`.
///
/// `b_hat` is the time average. `alpha_T` is computed in the centered form
/// `(1/T) ∫ (X - b_hat)²`, which equals the raw-moment formula under the
/// trapezoid rule but does not cancel catastrophically when `|b| ≫ sd`.
/// A nonpositive or negligible `alpha_T` gives [`Error::DegenerateVariance`],
/// which still carries `b_hat`.
pub fn estimate(path: &SamplePath, spec: &HermiteSpec) -> Result<EstimateResult> {
    let horizon = path.grid().horizon();
    let dt = path.grid().dt();
    let v = path.values();
    let b_hat = trapezoid(v, dt) / horizon;
    let centered: Vec<f64> = v.iter().map(|x| (x - b_hat) * (x - b_hat)).collect();
    let alpha_t = trapezoid(&centered, dt) / horizon;
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(alpha_t > DEGENERATE_RATIO * scale * scale) {
        return Err(Error::DegenerateVariance { alpha: alpha_t, b_hat });
    }
    let a_hat = invert_second_moment(alpha_t, spec);
    Ok(EstimateResult { alpha_t, a_hat, b_hat, horizon })
}

/// Output of [`compute_gt`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GTResult {
    pub horizon: f64,
    pub g_t: f64,
    pub spec: HermiteSpec,
}

/// Minimum inner grid points per unit of `T` on `[0, 1]`.
pub const GT_POINTS_PER_RATE: f64 = 64.0;

/// `(q = 1 ∧ H > ¾) ∨ q ≥ 2`, where `G_T` has an `L²` limit.
pub fn gt_regime(spec: &HermiteSpec) -> bool {
    spec.q() >= 2 || spec.h() > 0.75
}

/// Draws `G_T = T^{(2/q)(1-H)+2H} ∫_0^1 (U_T(t)² - E[U_T(t)²]) dt` with
/// `U_T(t) = ∫_0^t e^{-T(t-u)} dZ_u`.
///
/// The centering `E[U_T(t_k)²]` is evaluated once per grid point by quadrature and reused.
#[derive(Debug, Clone)]
pub struct GtSampler {
    spec: HermiteSpec,
    horizon: f64,
    sim: Arc<HermiteSimulator>,
    centering: Vec<f64>,
    scale: f64,
}

impl GtSampler {
    pub fn new(spec: HermiteSpec, horizon: f64, inner_grid: GridSpec) -> Result<Self> {
        Self::with_options(spec, horizon, inner_grid, SimOptions::default())
    }

    pub fn with_options(
        spec: HermiteSpec,
        horizon: f64,
        inner_grid: GridSpec,
        options: SimOptions,
    ) -> Result<Self> {
        if !gt_regime(&spec) {
            return Err(Error::param(format!(
                "G_T has no L² limit for q = {}, H = {}; need q ≥ 2 or H > 3/4",
                spec.q(),
                spec.h()
            )));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::param(format!("T must be positive, got {horizon}")));
        }
        if (inner_grid.horizon() - 1.0).abs() > 1e-12 {
            return Err(Error::config("G_T is defined on [0, 1]; the inner grid must end at 1"));
        }
        let need = (GT_POINTS_PER_RATE * horizon).ceil() as usize;
        if inner_grid.steps() < need {
            return Err(Error::config(format!(
                "inner grid of {} steps does not resolve the boundary layer of width 1/T = {}; \
                 need at least {need}",
                inner_grid.steps(),
                1.0 / horizon
            )));
        }
        let sim = HermiteSimulator::with_options(spec, inner_grid, options)?;
        let centering = inner_grid
            .times()
            .map(|t| expected_y_squared(horizon, spec.h(), t))
            .collect::<Result<Vec<_>>>()?;
        let h = spec.h();
        let scale = horizon.powf(2.0 / spec.q() as f64 * (1.0 - h) + 2.0 * h);
        Ok(Self { spec, horizon, sim: Arc::new(sim), centering, scale })
    }

    /// Sampler on the minimal admissible grid `n = ⌈64 T⌉`.
    pub fn minimal(spec: HermiteSpec, horizon: f64) -> Result<Self> {
        let n = (GT_POINTS_PER_RATE * horizon).ceil() as usize;
        Self::new(spec, horizon, GridSpec::new(1.0, n)?)
    }

    pub fn spec(&self) -> &HermiteSpec {
        &self.spec
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn simulator(&self) -> &HermiteSimulator {
        &self.sim
    }

    /// `E[U_T(t_k)²]` on the inner grid.
    pub fn centering(&self) -> &[f64] {
        &self.centering
    }

    /// `G_T` evaluated on a given driver path over `[0, 1]`.
    pub fn functional(&self, driver: &SamplePath) -> Result<f64> {
        if driver.grid() != self.sim.grid() {
            return Err(Error::param("driver grid differs from the sampler grid"));
        }
        let u = ou_path(self.horizon, driver)?;
        let centered: Vec<f64> =
            u.values().iter().zip(&self.centering).map(|(x, m)| x * x - m).collect();
        Ok(self.scale * trapezoid(&centered, self.sim.grid().dt()))
    }

    pub fn sample(&self, seed: u64) -> GTResult {
        let z = self.sim.sample(seed);
        let g_t = self.functional(&z).expect("driver is on the sampler grid");
        GTResult { horizon: self.horizon, g_t, spec: self.spec }
    }
}

/// One realization of `G_T`; see [`GtSampler`].
pub fn compute_gt(spec: HermiteSpec, horizon: f64, inner_grid: GridSpec, seed: u64) -> Result<GTResult> {
    Ok(GtSampler::new(spec, horizon, inner_grid)?.sample(seed))
}
