//! One-dimensional quadrature used by the moment and constant evaluators.
//!
//! Everything here is built from a fixed Gauss–Legendre rule:
//!
//! * [`integrate`] is globally adaptive bisection, with the error of a panel
//!   estimated by comparing the rule on the panel against the rule on its halves;
//! * [`integrate_left_singular`] / [`integrate_right_singular`] remove an
//!   integrable endpoint singularity `|x - endpoint|^beta` (`beta > -1`) exactly by
//!   the substitution `y = |x - endpoint|^(beta + 1)`, a power-law grading;
//! * [`graded_composite`] is a fixed composite rule on a power-graded mesh, used
//!   where a deterministic mesh that can be refined dyadically is wanted.

use std::collections::BinaryHeap;
use std::cmp::Ordering;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the rule by Newton iteration on the Legendre polynomial `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            // Tricomi initial guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Applies the rule on `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p, dp)
}

/// The 16-point rule shared by all integrators in this module.
pub fn gauss_legendre_16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// Stopping rule for [`integrate`]: stop once the summed error estimate is
/// below `max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-13, rel: 1e-11, max_panels: 4000 }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel, ..Self::default() }
    }
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    err: f64,
}

impl Panel {
    fn new<F: Fn(f64) -> f64>(f: &F, rule: &GaussLegendre, a: f64, b: f64, whole: f64) -> Self {
        let m = 0.5 * (a + b);
        let left = rule.integrate(f, a, m);
        let right = rule.integrate(f, m, b);
        let err = (whole - left - right).abs();
        Panel { a, b, left, right, err }
    }

    fn value(&self) -> f64 {
        self.left + self.right
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive Gauss–Legendre quadrature of `f` over a finite `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Numerical(format!("integration bounds must be finite, got [{a}, {b}]")));
    }
    let (a, b, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let rule = gauss_legendre_16();
    let whole = rule.integrate(&f, a, b);
    let mut heap = BinaryHeap::new();
    let first = Panel::new(&f, rule, a, b, whole);
    let mut value = first.value();
    let mut err = first.err;
    heap.push(first);
    while err > tol.abs.max(tol.rel * value.abs()) {
        if heap.len() >= tol.max_panels {
            return Err(Error::Numerical(format!(
                "adaptive quadrature on [{a}, {b}] did not converge: value {value:e}, \
                 error estimate {err:e}, {} panels",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is never empty here");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            return Err(Error::Numerical(format!(
                "adaptive quadrature exhausted floating-point resolution near x = {m:e} \
                 (value {value:e}, error estimate {err:e})"
            )));
        }
        let l = Panel::new(&f, rule, worst.a, m, worst.left);
        let r = Panel::new(&f, rule, m, worst.b, worst.right);
        value += l.value() + r.value() - worst.value();
        err += l.err + r.err - worst.err;
        heap.push(l);
        heap.push(r);
        // refresh the running sums now and then to avoid drift
        if heap.len() % 256 == 0 {
            value = heap.iter().map(Panel::value).sum();
            err = heap.iter().map(|p| p.err).sum();
        }
    }
    let value: f64 = heap.iter().map(Panel::value).sum();
    if !value.is_finite() {
        return Err(Error::Numerical(format!("non-finite quadrature value on [{a}, {b}]")));
    }
    Ok(sign * value)
}

/// `∫_a^∞ f(x) dx` through the map `x = a + s / (1 - s)`, `s ∈ [0, 1)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: Tolerance) -> Result<f64> {
    integrate(
        |s: f64| {
            let one_minus = 1.0 - s;
            if one_minus <= 0.0 {
                return 0.0;
            }
            let x = a + s / one_minus;
            let v = f(x) / (one_minus * one_minus);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// `∫_a^b (x - a)^beta g(x) dx` for smooth `g` and `beta > -1`.
pub fn integrate_left_singular<G: Fn(f64) -> f64>(
    g: G,
    a: f64,
    b: f64,
    beta: f64,
    tol: Tolerance,
) -> Result<f64> {
    check_exponent(beta)?;
    if b <= a {
        return Ok(0.0);
    }
    let e = beta + 1.0;
    let p = 1.0 / e;
    let upper = (b - a).powf(e);
    let v = integrate(|y: f64| g(a + y.powf(p)), 0.0, upper, tol)?;
    Ok(v / e)
}

/// `∫_a^b (b - x)^beta g(x) dx` for smooth `g` and `beta > -1`.
pub fn integrate_right_singular<G: Fn(f64) -> f64>(
    g: G,
    a: f64,
    b: f64,
    beta: f64,
    tol: Tolerance,
) -> Result<f64> {
    check_exponent(beta)?;
    if b <= a {
        return Ok(0.0);
    }
    let e = beta + 1.0;
    let p = 1.0 / e;
    let upper = (b - a).powf(e);
    let v = integrate(|y: f64| g(b - y.powf(p)), 0.0, upper, tol)?;
    Ok(v / e)
}

fn check_exponent(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > -1.0 {
        Ok(())
    } else {
        Err(Error::Numerical(format!("endpoint exponent {beta} is not integrable")))
    }
}

/// Composite Gauss–Legendre on the mesh `a + (b - a) (j / panels)^grading`,
/// which clusters panels toward `a` when `grading > 1`.
pub fn graded_composite<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, grading: f64) -> f64 {
    let rule = gauss_legendre_16();
    let pf = panels as f64;
    let mut prev = a;
    let mut acc = 0.0;
    for j in 1..=panels {
        let next = a + (b - a) * (j as f64 / pf).powf(grading);
        acc += rule.integrate(&f, prev, next);
        prev = next;
    }
    acc
}
