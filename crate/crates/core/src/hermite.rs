//! Hermite process paths on a uniform grid.
//!
//! For `q = 1` the Hermite process is fractional Brownian motion and is
//! synthesized exactly from circulant-embedded fGn. For `q ≥ 2` the path is the
//! normalized partial-sum process of `He_q(ξ_i)`, where `ξ` is fGn with Hurst
//! index `H₀ = 1 + (H - 1)/q` on an internal grid `refinement` times finer than
//! the output grid. The normalization is the exact standard deviation of the
//! full partial sum, so `Var(Z_T) = T^{2H}` holds at the terminal point.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;
use statrs::function::factorial::factorial;

use crate::error::{Error, Result};
use crate::fgn::{fgn_autocov, FgnGenerator};
use crate::seed::rng_from_seed;

/// Largest supported Hermite order.
pub const MAX_ORDER: u32 = 20;

/// Order `q` and self-similarity index `H` of a Hermite process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct HermiteSpec {
    q: u32,
    h: f64,
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    q: u32,
    h: f64,
}

impl TryFrom<SpecRepr> for HermiteSpec {
    type Error = Error;
    fn try_from(r: SpecRepr) -> Result<Self> {
        HermiteSpec::new(r.q, r.h)
    }
}

impl From<HermiteSpec> for SpecRepr {
    fn from(s: HermiteSpec) -> Self {
        SpecRepr { q: s.q, h: s.h }
    }
}

impl HermiteSpec {
    pub fn new(q: u32, h: f64) -> Result<Self> {
        if q == 0 || q > MAX_ORDER {
            return Err(Error::param(format!("Hermite order must be in 1..={MAX_ORDER}, got {q}")));
        }
        check_hurst(h)?;
        Ok(Self { q, h })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `H₀ = 1 + (H - 1)/q`, the kernel exponent parameter; lies in `(1 - 1/(2q), 1)`.
    pub fn h0(&self) -> f64 {
        1.0 + (self.h - 1.0) / self.q as f64
    }

    /// Normalizing constant `c(H, q)`; see [`hermite_constant`].
    pub fn c(&self) -> f64 {
        hermite_constant(self)
    }

    /// `H Γ(2H)`, the stationary second moment of the unit-rate OU process driven by this noise.
    pub fn stationary_moment(&self) -> f64 {
        self.h * statrs::function::gamma::gamma(2.0 * self.h)
    }
}

pub(crate) fn check_hurst(h: f64) -> Result<()> {
    if h > 0.5 && h < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("Hurst parameter must lie in (1/2, 1), got {h}")))
    }
}

/// `c(H, q) = sqrt(H(2H-1) / (q! β(H₀-½, 2-2H₀)^q))`, which makes `E[(Z_1)²] = 1`.
pub fn hermite_constant(spec: &HermiteSpec) -> f64 {
    let h = spec.h;
    let h0 = spec.h0();
    let q = spec.q;
    let b = beta(h0 - 0.5, 2.0 - 2.0 * h0);
    (h * (2.0 * h - 1.0) / (factorial(q as u64) * b.powi(q as i32))).sqrt()
}

/// Probabilists' Hermite polynomial `He_q(x)`: `He_1 = x`, `He_2 = x² - 1`, `He_3 = x³ - 3x`, ...
pub fn hermite_polynomial(q: u32, x: f64) -> f64 {
    match q {
        0 => 1.0,
        1 => x,
        _ => {
            let mut prev = 1.0;
            let mut cur = x;
            for k in 1..q {
                let next = x * cur - k as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Uniform time grid `t_k = k T / n`, `k = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    horizon: f64,
    steps: usize,
}

impl GridSpec {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::param(format!("horizon must be positive and finite, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::param("grid needs at least one step"));
        }
        Ok(Self { horizon, steps })
    }

    /// Grid on `[0, horizon]` whose step is as close as possible to `dt`.
    pub fn with_step(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param(format!("time step must be positive, got {dt}")));
        }
        let steps = (horizon / dt).round().max(1.0) as usize;
        Self::new(horizon, steps)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |k| self.time(k))
    }
}

/// Values of a process on every point of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: GridSpec,
    values: Vec<f64>,
}

impl SamplePath {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.steps + 1 {
            return Err(Error::param(format!(
                "path on {} steps needs {} values, got {}",
                grid.steps,
                grid.steps + 1,
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self { grid, values: vec![value; grid.steps + 1] }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("paths are never empty")
    }

    /// Value at the grid point nearest to `t`.
    pub fn at(&self, t: f64) -> f64 {
        let k = (t / self.grid.dt()).round().clamp(0.0, self.grid.steps as f64) as usize;
        self.values[k]
    }

    /// Every `factor`-th point, on the correspondingly coarser grid.
    pub fn subsample(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.grid.steps % factor != 0 {
            return Err(Error::param(format!(
                "cannot subsample {} steps by a factor of {factor}",
                self.grid.steps
            )));
        }
        let grid = GridSpec::new(self.grid.horizon, self.grid.steps / factor)?;
        let values = self.values.iter().step_by(factor).copied().collect();
        Self::new(grid, values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }
}

/// Tuning for the `q ≥ 2` partial-sum construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Internal fGn points per output step.
    pub refinement: usize,
    /// Largest accepted relative deviation of the one-step variance of the
    /// discrete construction from `dt^{2H}`.
    pub max_step_variance_error: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { refinement: 32, max_step_variance_error: 0.25 }
    }
}

/// Reusable sampler of Hermite paths for one `(spec, grid)` pair.
#[derive(Debug)]
pub struct HermiteSimulator {
    spec: HermiteSpec,
    grid: GridSpec,
    refinement: usize,
    fgn: FgnGenerator,
    /// `T^H / sd(S_M)` for `q ≥ 2`, `dt^H` for `q = 1`.
    scale: f64,
    /// Cumulative `Var(S_N)` for `N = 0..=M`, only kept when `q ≥ 2`.
    partial_variance: Vec<f64>,
}

impl HermiteSimulator {
    pub fn new(spec: HermiteSpec, grid: GridSpec) -> Result<Self> {
        Self::with_options(spec, grid, SimOptions::default())
    }

    pub fn with_options(spec: HermiteSpec, grid: GridSpec, options: SimOptions) -> Result<Self> {
        if spec.q == 1 {
            let fgn = FgnGenerator::new(spec.h, grid.steps)?;
            return Ok(Self {
                spec,
                grid,
                refinement: 1,
                fgn,
                scale: grid.dt().powf(spec.h),
                partial_variance: Vec::new(),
            });
        }
        let m = options.refinement;
        if m == 0 {
            return Err(Error::config("internal refinement must be at least 1"));
        }
        let total = grid
            .steps
            .checked_mul(m)
            .ok_or_else(|| Error::config("internal grid size overflows"))?;
        let h0 = spec.h0();
        let partial_variance = partial_sum_variances(spec.q, h0, total);
        let full = partial_variance[total];

        let step_ratio = partial_variance[m] / full / (1.0 / grid.steps as f64).powf(2.0 * spec.h);
        let step_error = (step_ratio - 1.0).abs();
        if step_error > options.max_step_variance_error {
            return Err(Error::config(format!(
                "internal refinement {m} is too small for q = {}, H = {}: the one-step variance \
                 of the partial-sum construction is off by {:.1}% (limit {:.1}%); increase the \
                 refinement",
                spec.q,
                spec.h,
                100.0 * step_error,
                100.0 * options.max_step_variance_error
            )));
        }
        let fgn = FgnGenerator::new(h0, total)?;
        let scale = grid.horizon.powf(spec.h) / full.sqrt();
        Ok(Self { spec, grid, refinement: m, fgn, scale, partial_variance })
    }

    pub fn spec(&self) -> &HermiteSpec {
        &self.spec
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn refinement(&self) -> usize {
        self.refinement
    }

    pub fn clipped_modes(&self) -> usize {
        self.fgn.clipped_modes()
    }

    /// Exact variance of the simulated `Z_{t_k}` under the discrete construction.
    pub fn discrete_variance(&self, k: usize) -> f64 {
        assert!(k <= self.grid.steps);
        if self.spec.q == 1 {
            return self.grid.time(k).powf(2.0 * self.spec.h);
        }
        self.partial_variance[k * self.refinement] * self.scale * self.scale
    }

    /// `Var(Z_dt) / dt^{2H}` of the discrete construction.
    pub fn step_variance_ratio(&self) -> f64 {
        self.discrete_variance(1) / self.grid.dt().powf(2.0 * self.spec.h)
    }

    /// Draws the path determined by `seed`.
    pub fn sample(&self, seed: u64) -> SamplePath {
        let mut rng = rng_from_seed(seed);
        let noise = self.fgn.sample(&mut rng);
        let mut values = Vec::with_capacity(self.grid.steps + 1);
        values.push(0.0);
        let mut acc = 0.0;
        if self.spec.q == 1 {
            for x in noise {
                acc += x;
                values.push(self.scale * acc);
            }
        } else {
            let q = self.spec.q;
            for chunk in noise.chunks_exact(self.refinement) {
                for &x in chunk {
                    acc += hermite_polynomial(q, x);
                }
                values.push(self.scale * acc);
            }
        }
        SamplePath { grid: self.grid, values }
    }
}

/// `Var(Σ_{i<N} He_q(ξ_i)) = q! Σ_{i,j<N} ρ(i-j)^q` for `N = 0..=total`.
fn partial_sum_variances(q: u32, h0: f64, total: usize) -> Vec<f64> {
    let qf = factorial(q as u64);
    let mut out = Vec::with_capacity(total + 1);
    out.push(0.0);
    let mut v = 0.0;
    // running Σ_{k=1}^{N} ρ(k)^q
    let mut tail = 0.0;
    for n in 0..total {
        // V(N+1) = V(N) + q! (1 + 2 Σ_{k=1}^{N} ρ(k)^q)
        v += qf * (1.0 + 2.0 * tail);
        out.push(v);
        tail += fgn_autocov(h0, n as u64 + 1).powi(q as i32);
    }
    out
}

/// Fractional Brownian motion with Hurst index `h` on `grid`; `values[0] = 0`.
pub fn simulate_fbm(h: f64, grid: GridSpec, seed: u64) -> Result<SamplePath> {
    let spec = HermiteSpec::new(1, h)?;
    Ok(HermiteSimulator::new(spec, grid)?.sample(seed))
}

/// Hermite process path with the default [`SimOptions`].
pub fn simulate_hermite(spec: HermiteSpec, grid: GridSpec, seed: u64) -> Result<SamplePath> {
    Ok(HermiteSimulator::new(spec, grid)?.sample(seed))
}
