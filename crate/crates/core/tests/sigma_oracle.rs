//! σ_H against a closed form obtained in the Fourier domain.
//!
//! `I(x) = E|x - D|^{2H-2}` with `D` standard Laplace, so `Î = FT(|·|^{2H-2}) / (1 + ξ²)`
//! and Plancherel gives `‖I‖²` as a one-line Γ expression.

use std::f64::consts::PI;

use hermite_vasicek::asymptotics::{sigma_h, sigma_h_on_mesh, sigma_inner_norm_sq};
use statrs::function::gamma::gamma;

fn spectral_norm_sq(h: f64) -> f64 {
    let c = gamma(2.0 * h + 1.0) * (PI * h).sin() / (2.0 * PI);
    2.0 * PI * 2.0 * c * c * 0.5 * gamma((3.0 - 4.0 * h) / 2.0) * gamma((1.0 + 4.0 * h) / 2.0)
        / (h * (2.0 * h - 1.0)).powi(2)
}

fn spectral_sigma(h: f64) -> f64 {
    let g = gamma(2.0 * h);
    (2.0 * h - 1.0) / (h * g * g) * spectral_norm_sq(h).sqrt()
}

#[test]
fn norm_matches_spectral_closed_form() {
    for h in [0.55, 0.6, 0.65, 0.7] {
        let q = sigma_inner_norm_sq(h).unwrap();
        let s = spectral_norm_sq(h);
        assert!((q / s - 1.0).abs() < 1e-8, "H = {h}: quadrature {q}, spectral {s}");
    }
}

#[test]
fn sigma_reference_values() {
    assert!((spectral_sigma(0.6) - 2.2710).abs() < 1e-3);
    assert!((spectral_sigma(0.55) - 2.1203).abs() < 1e-3);
    for h in [0.55, 0.6, 0.7] {
        assert!((sigma_h(h).unwrap() - spectral_sigma(h)).abs() < 1e-7);
    }
}

#[test]
fn mesh_refinement_is_stable() {
    for h in [0.55, 0.6, 0.7] {
        let coarse = sigma_h_on_mesh(h, 32).unwrap();
        let fine = sigma_h_on_mesh(h, 64).unwrap();
        assert!((coarse - fine).abs() < 1e-4, "H = {h}: {coarse} vs {fine}");
        assert!((fine - spectral_sigma(h)).abs() < 1e-6);
    }
}
