//! Brute-force double Wiener–Itô integral for the Rosenblatt process (q = 2).
//!
//! `Z_t = c ∫∫ K_t(ξ₁, ξ₂) dB_{ξ₁} dB_{ξ₂}` with
//! `K_t(ξ₁, ξ₂) = ∫_0^t (s-ξ₁)_+^{α} (s-ξ₂)_+^{α} ds`, `α = H₀ - 3/2`.
//!
//! The ξ-axis is cut into cells: uniform cells on `[0, t]` plus geometrically
//! growing cells to the left down to `-left_extent`. A realization is the
//! off-diagonal quadratic form `Σ_{i≠j} K(mid_i, mid_j) ΔB_i ΔB_j`. The kernel
//! is singular along the diagonal inside `[0, t]`, so cell pairs within
//! `near` of each other there are split into `refinement²` sub-pairs driven by
//! sub-cell increments. Diagonal (sub-)cells are always dropped.
//!
//! The inner `s`-integral is evaluated exactly through the regularized
//! incomplete beta function: with `δ = ξ_hi - ξ_lo` and `w = s - ξ_hi`,
//! `∫ (w+δ)^α w^α dw = δ^{2α+1} B(α+1, -2α-1) [I_Y]` with `Y = (w/δ)/(1+w/δ)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta, beta_reg};

use crate::error::{Error, Result};
use crate::hermite::{hermite_constant, HermiteSpec};
use crate::seed::rng_from_seed;

/// Discretization of the ξ-axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosConfig {
    /// Uniform cells on `[0, t]`.
    pub cells: usize,
    /// Geometric cells on `[-left_extent, 0]`.
    pub left_cells: usize,
    /// Left truncation point, as a multiple of `t`.
    pub left_extent: f64,
    /// Sub-cells per cell in the near-diagonal blocks.
    pub refinement: usize,
    /// Cell pairs with `|i - j| <= near` inside `[0, t]` are refined.
    pub near: usize,
}

impl Default for ChaosConfig {
    fn default() -> Self {
        Self { cells: 200, left_cells: 120, left_extent: 1e12, refinement: 32, near: 1 }
    }
}

impl ChaosConfig {
    pub fn with_cells(cells: usize) -> Self {
        Self { cells, ..Self::default() }
    }
}

/// Left truncation below which the lost variance exceeds about one percent.
const MIN_LEFT_EXTENT: f64 = 1e6;

struct NearBlock {
    i: usize,
    j: usize,
    /// Row-major `refinement × refinement` kernel values; zero on the diagonal when `i == j`.
    k: Vec<f64>,
}

/// Precomputed kernel for repeated sampling at fixed `(H, t, config)`.
pub struct ChaosOracle {
    h: f64,
    t: f64,
    config: ChaosConfig,
    /// Cell widths; left cells first, then the uniform cells on `[0, t]`.
    widths: Vec<f64>,
    /// Row-major far-field kernel, zero where the pair is handled by a near block or on the diagonal.
    far: Vec<f64>,
    near: Vec<NearBlock>,
    warnings: Vec<String>,
}

impl std::fmt::Debug for ChaosOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChaosOracle")
            .field("h", &self.h)
            .field("t", &self.t)
            .field("config", &self.config)
            .finish()
    }
}

struct Kernel {
    c: f64,
    alpha: f64,
    pa: f64,
    pb: f64,
    beta_ab: f64,
    t: f64,
}

impl Kernel {
    fn new(h: f64, t: f64) -> Result<Self> {
        let spec = HermiteSpec::new(2, h)?;
        let alpha = spec.h0() - 1.5;
        let pa = alpha + 1.0;
        let pb = -2.0 * alpha - 1.0;
        Ok(Self { c: hermite_constant(&spec), alpha, pa, pb, beta_ab: beta(pa, pb), t })
    }

    /// `∫_0^X (1+x)^α x^α dx / B(a, b)` for `X ∈ [0, ∞]`.
    fn reduced(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if !x.is_finite() {
            return 1.0;
        }
        let y = x / (1.0 + x);
        if y < 0.5 {
            beta_reg(self.pa, self.pb, y)
        } else {
            1.0 - beta_reg(self.pb, self.pa, 1.0 / (1.0 + x))
        }
    }

    /// `c K_t(x1, x2)`; zero when the two points coincide.
    fn eval(&self, x1: f64, x2: f64) -> f64 {
        let (lo, hi) = if x1 < x2 { (x1, x2) } else { (x2, x1) };
        let d = hi - lo;
        if d <= 0.0 || hi >= self.t {
            return 0.0;
        }
        let w0 = hi.max(0.0) - hi;
        let w1 = self.t - hi;
        let span = self.reduced(w1 / d) - self.reduced(w0 / d);
        self.c * d.powf(2.0 * self.alpha + 1.0) * self.beta_ab * span
    }
}

impl ChaosOracle {
    pub fn new(h: f64, t: f64, config: ChaosConfig) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::param(format!("time must be positive, got {t}")));
        }
        if config.cells < 2 || config.refinement == 0 {
            return Err(Error::config("chaos oracle needs at least 2 cells and refinement >= 1"));
        }
        if config.left_cells == 0 || !(config.left_extent * t > t / config.cells as f64) {
            return Err(Error::config("left truncation must extend beyond one cell"));
        }
        let kernel = Kernel::new(h, t)?;
        let mut warnings = Vec::new();
        if config.left_extent < MIN_LEFT_EXTENT {
            let msg = format!(
                "left truncation at -{:e}·t drops a noticeable share of the variance; use at least {:e}",
                config.left_extent, MIN_LEFT_EXTENT
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }

        let nc = config.cells;
        let ng = config.left_cells;
        let du = t / nc as f64;
        let lo = du.ln();
        let hi = (config.left_extent * t).ln();
        // left edges from -extent up to -du, then 0, then the uniform part
        let mut edges: Vec<f64> = (0..=ng)
            .map(|k| -(hi + (lo - hi) * k as f64 / ng as f64).exp())
            .collect();
        edges.extend((0..=nc).map(|k| k as f64 * du));
        let n = edges.len() - 1;
        let widths: Vec<f64> = edges.windows(2).map(|e| e[1] - e[0]).collect();
        let mids: Vec<f64> = edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect();
        let first_uniform = ng + 1;
        let is_near = |i: usize, j: usize| {
            i >= first_uniform && j >= first_uniform && i.abs_diff(j) <= config.near
        };

        let mut far = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                if is_near(i, j) {
                    continue;
                }
                let v = kernel.eval(mids[i], mids[j]);
                far[i * n + j] = v;
                far[j * n + i] = v;
            }
        }

        let r = config.refinement;
        let mut near = Vec::new();
        for i in first_uniform..n {
            for j in i..n.min(i + config.near + 1) {
                let si: Vec<f64> = (0..r).map(|a| edges[i] + (a as f64 + 0.5) * du / r as f64).collect();
                let sj: Vec<f64> = (0..r).map(|b| edges[j] + (b as f64 + 0.5) * du / r as f64).collect();
                let mut k = vec![0.0; r * r];
                for a in 0..r {
                    for b in 0..r {
                        if i == j && a == b {
                            continue;
                        }
                        k[a * r + b] = kernel.eval(si[a], sj[b]);
                    }
                }
                near.push(NearBlock { i, j, k });
            }
        }
        Ok(Self { h, t, config, widths, far, near, warnings })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn config(&self) -> &ChaosConfig {
        &self.config
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn left_count(&self) -> usize {
        self.config.left_cells + 1
    }

    /// Length of the increment vector consumed by [`Self::sample_from_increments`]:
    /// one per left cell, then `refinement` per uniform cell.
    pub fn increment_count(&self) -> usize {
        self.left_count() + self.config.cells * self.config.refinement
    }

    /// Exact variance of the discretized integral, `2 Σ_{i≠j} K_ij² Δ_i Δ_j` over all (sub-)pairs.
    pub fn discrete_variance(&self) -> f64 {
        let n = self.widths.len();
        let mut v = 0.0;
        for i in 0..n {
            for j in 0..n {
                let k = self.far[i * n + j];
                v += k * k * self.widths[i] * self.widths[j];
            }
        }
        let r = self.config.refinement;
        let sub = self.t / (self.config.cells * r) as f64;
        for blk in &self.near {
            let s: f64 = blk.k.iter().map(|k| k * k).sum::<f64>() * sub * sub;
            v += if blk.i == blk.j { s } else { 2.0 * s };
        }
        2.0 * v
    }

    /// Evaluates the quadratic form on given Brownian increments (see [`Self::increment_count`]).
    pub fn sample_from_increments(&self, dbs: &[f64]) -> Result<f64> {
        if dbs.len() != self.increment_count() {
            return Err(Error::param(format!(
                "expected {} increments, got {}",
                self.increment_count(),
                dbs.len()
            )));
        }
        let n = self.widths.len();
        let nl = self.left_count();
        let r = self.config.refinement;
        let fine = &dbs[nl..];
        let mut coarse = Vec::with_capacity(n);
        coarse.extend_from_slice(&dbs[..nl]);
        coarse.extend(fine.chunks_exact(r).map(|c| c.iter().sum::<f64>()));

        let mut total = 0.0;
        for i in 0..n {
            let row = &self.far[i * n + i + 1..(i + 1) * n];
            let dot: f64 = row.iter().zip(&coarse[i + 1..]).map(|(k, g)| k * g).sum();
            total += 2.0 * coarse[i] * dot;
        }
        for blk in &self.near {
            let gi = &fine[(blk.i - nl) * r..(blk.i - nl + 1) * r];
            let gj = &fine[(blk.j - nl) * r..(blk.j - nl + 1) * r];
            let mut s = 0.0;
            for a in 0..r {
                let row = &blk.k[a * r..(a + 1) * r];
                s += gi[a] * row.iter().zip(gj).map(|(k, g)| k * g).sum::<f64>();
            }
            total += if blk.i == blk.j { s } else { 2.0 * s };
        }
        Ok(total)
    }

    /// Draws Brownian increments from `seed` and returns one realization.
    pub fn sample(&self, seed: u64) -> f64 {
        let dbs = self.draw_increments(seed);
        self.sample_from_increments(&dbs).expect("increment count is consistent")
    }

    /// The Brownian increments used by [`Self::sample`] for `seed`.
    pub fn draw_increments(&self, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        let nl = self.left_count();
        let sub = self.t / (self.config.cells * self.config.refinement) as f64;
        let mut out = Vec::with_capacity(self.increment_count());
        for w in &self.widths[..nl] {
            let z: f64 = rng.sample(StandardNormal);
            out.push(z * w.sqrt());
        }
        let s = sub.sqrt();
        for _ in 0..self.config.cells * self.config.refinement {
            let z: f64 = rng.sample(StandardNormal);
            out.push(z * s);
        }
        out
    }
}

/// One realization of the discretized Rosenblatt variable `Z_t` with `grid_cells` uniform cells on `[0, t]`.
pub fn chaos_oracle_q2(h: f64, t: f64, grid_cells: usize, seed: u64) -> Result<f64> {
    Ok(ChaosOracle::new(h, t, ChaosConfig::with_cells(grid_cells))?.sample(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, integrate_left_singular, Tolerance};
    use approx::assert_relative_eq;

    fn small() -> ChaosConfig {
        ChaosConfig { cells: 20, left_cells: 40, left_extent: 1e8, refinement: 4, near: 1 }
    }

    #[test]
    fn kernel_matches_direct_quadrature() {
        let k = Kernel::new(0.7, 1.0).unwrap();
        for (x1, x2) in [(0.1, 0.6), (-0.5, 0.3), (-3.0, -0.2), (0.9, 0.95)] {
            let (a, b) = (f64::min(x1, x2), f64::max(x1, x2));
            let tol = Tolerance::new(1e-12, 1e-9);
            let direct = if b >= 0.0 {
                let g = |s: f64| (s - a).powf(k.alpha);
                integrate_left_singular(g, b, 1.0, k.alpha, tol).unwrap()
            } else {
                let f = |s: f64| (s - a).powf(k.alpha) * (s - b).powf(k.alpha);
                integrate(f, 0.0, 1.0, tol).unwrap()
            };
            assert_relative_eq!(k.eval(x1, x2), k.c * direct, max_relative = 1e-7);
        }
    }

    #[test]
    fn kernel_vanishes_on_diagonal_and_beyond_t() {
        let k = Kernel::new(0.7, 1.0).unwrap();
        assert_eq!(k.eval(0.3, 0.3), 0.0);
        assert_eq!(k.eval(0.3, 1.2), 0.0);
    }

    #[test]
    fn even_in_the_noise() {
        let o = ChaosOracle::new(0.7, 1.0, small()).unwrap();
        let g = o.draw_increments(3);
        let neg: Vec<f64> = g.iter().map(|x| -x).collect();
        assert_eq!(o.sample_from_increments(&g).unwrap(), o.sample_from_increments(&neg).unwrap());
    }

    #[test]
    fn no_diagonal_self_interaction() {
        // a single nonzero increment contributes nothing
        let o = ChaosOracle::new(0.7, 1.0, small()).unwrap();
        for idx in [0, 10, o.increment_count() - 1] {
            let mut g = vec![0.0; o.increment_count()];
            g[idx] = 1.0;
            assert_eq!(o.sample_from_increments(&g).unwrap(), 0.0);
        }
    }

    #[test]
    fn discrete_variance_matches_empirical() {
        let o = ChaosOracle::new(0.7, 1.0, small()).unwrap();
        let v = o.discrete_variance();
        let xs: Vec<f64> = (0..4000).map(|s| o.sample(s)).collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        // Var of the sample variance of a skewed chaos; generous band
        assert!((var / v - 1.0).abs() < 0.12, "empirical {var}, exact {v}");
    }

    #[test]
    fn short_truncation_warns() {
        let cfg = ChaosConfig { left_extent: 1e3, ..small() };
        let o = ChaosOracle::new(0.7, 1.0, cfg).unwrap();
        assert_eq!(o.warnings().len(), 1);
    }
}
