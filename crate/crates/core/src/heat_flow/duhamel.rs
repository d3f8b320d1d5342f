//! Duhamel bilinear operator and the kernel-weighted bilinear estimate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::heat_evolve;
use crate::error::{Error, Result};
use crate::field::{norm, PhysicalField, SpectralField};
use crate::transport::projected_flux_divergence;
use crate::verdict::RatioReport;

fn check_series(u: &[SpectralField], v: &[SpectralField], tau: f64) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::param(format!(
            "snapshot series lengths differ ({} vs {})",
            u.len(),
            v.len()
        )));
    }
    if u.len() < 3 {
        return Err(Error::param(format!(
            "Duhamel quadrature needs at least 3 time nodes, got {}",
            u.len()
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::param(format!("τ must be positive, got {tau}")));
    }
    Ok(())
}

fn trapezoid_weights(nodes: usize, tau: f64) -> Vec<f64> {
    let h = tau / (nodes - 1) as f64;
    (0..nodes)
        .map(|i| if i == 0 || i == nodes - 1 { 0.5 * h } else { h })
        .collect()
}

/// `B(u,v)(τ) = −½∫₀^τ e^{ν(τ−s)Δ}ℙ∇·(u⊗v + v⊗u)(s) ds`.
///
/// Snapshots sit on the uniform grid `s_i = iτ/(N−1)`; the time integral is
/// the trapezoid rule with the semigroup applied exactly at each node.
pub fn duhamel_bilinear(
    u: &[SpectralField],
    v: &[SpectralField],
    tau: f64,
    nu_eff: f64,
) -> Result<SpectralField> {
    check_series(u, v, tau)?;
    let nodes = u.len();
    let weights = trapezoid_weights(nodes, tau);
    let h = tau / (nodes - 1) as f64;
    let terms: Vec<SpectralField> = (0..nodes)
        .into_par_iter()
        .map(|i| {
            let s = i as f64 * h;
            let flux = projected_flux_divergence(&u[i], &v[i])?;
            Ok(heat_evolve(&flux, tau - s, nu_eff).scale(-weights[i]))
        })
        .collect::<Result<_>>()?;
    let mut acc = terms[0].clone();
    for t in &terms[1..] {
        acc = acc.add(t)?;
    }
    Ok(acc)
}

/// Kernel exponent `½ + (d/2)(1/q − 1/p)`.
pub fn bilinear_exponent(dim: usize, p: f64, q: f64) -> Result<f64> {
    if !(q >= 1.0 && q <= p) {
        return Err(Error::param(format!("bilinear estimate needs 1 <= q <= p, got q={q}, p={p}")));
    }
    let inv = |x: f64| if x.is_infinite() { 0.0 } else { 1.0 / x };
    let theta = 0.5 + 0.5 * dim as f64 * (inv(q) - inv(p));
    if theta >= 1.0 {
        return Err(Error::param(format!(
            "kernel exponent {theta} >= 1 makes the time integral diverge"
        )));
    }
    Ok(theta)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilinearReport {
    pub p: f64,
    pub q: f64,
    pub exponent: f64,
    /// `‖B(u,v)(τ)‖_p`.
    pub lhs: f64,
    /// `∫₀^τ (τ−s)^{−θ}‖u⊗v(s)‖_q ds`.
    pub rhs: f64,
    pub ratio: RatioReport,
}

/// Pointwise Frobenius norm of `u⊗v`, which equals `|u||v|`.
fn tensor_norm(u: &SpectralField, v: &SpectralField, q: f64) -> Result<f64> {
    let a = u.to_physical().magnitude();
    let b = v.to_physical().magnitude();
    let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    norm(&PhysicalField::new(*u.grid(), vec![prod])?, q)
}

/// Measures `‖B(u,v)‖_p(τ) / ∫₀^τ (τ−s)^{−θ}‖u⊗v‖_q ds`.
///
/// The kernel is integrated exactly on every subinterval with the norm
/// factor taken as the endpoint average, so the singular last interval
/// contributes `(h^{1−θ}/(1−θ))` times that average.
pub fn bilinear_estimate_check(
    u: &[SpectralField],
    v: &[SpectralField],
    tau: f64,
    p: f64,
    q: f64,
    nu_eff: f64,
) -> Result<BilinearReport> {
    check_series(u, v, tau)?;
    let theta = bilinear_exponent(u[0].grid().dim(), p, q)?;
    let b = duhamel_bilinear(u, v, tau, nu_eff)?;
    let lhs = norm(&b.to_physical(), p)?;
    let nodes = u.len();
    let h = tau / (nodes - 1) as f64;
    let norms: Vec<f64> = (0..nodes)
        .into_par_iter()
        .map(|i| tensor_norm(&u[i], &v[i], q))
        .collect::<Result<_>>()?;
    let kernel = |s: f64| (tau - s).max(0.0).powf(1.0 - theta) / (1.0 - theta);
    let mut rhs = 0.0;
    for i in 0..nodes - 1 {
        let s0 = i as f64 * h;
        let s1 = (i + 1) as f64 * h;
        rhs += (kernel(s0) - kernel(s1)) * 0.5 * (norms[i] + norms[i + 1]);
    }
    let ratio = if rhs <= 0.0 {
        RatioReport::vacuous()
    } else {
        RatioReport::of(lhs, rhs)
    };
    Ok(BilinearReport {
        p,
        q,
        exponent: theta,
        lhs,
        rhs,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::random;

    fn steady(u: &SpectralField, nodes: usize) -> Vec<SpectralField> {
        vec![u.clone(); nodes]
    }

    #[test]
    fn zero_and_symmetry() {
        let g = GridSpec::periodic(2, 32, 0.1).unwrap();
        let z = steady(&SpectralField::zeros(g, 2), 5);
        let b = duhamel_bilinear(&z, &z, 0.5, 1.0).unwrap();
        assert_eq!(b.l2_norm_sq(), 0.0);
        assert!(duhamel_bilinear(&z[..2], &z[..2], 0.5, 1.0).is_err());

        let mut rng = random::rng(4);
        let u: Vec<_> = (0..5).map(|_| random::divergence_free(&g, 1.0, 6.0, &mut rng).unwrap()).collect();
        let v: Vec<_> = (0..5).map(|_| random::divergence_free(&g, 1.0, 6.0, &mut rng).unwrap()).collect();
        let a = duhamel_bilinear(&u, &v, 0.3, 1.0).unwrap();
        let b = duhamel_bilinear(&v, &u, 0.3, 1.0).unwrap();
        assert!(a.sub(&b).unwrap().l2_norm_sq() <= 1e-28 * a.l2_norm_sq());

        let r = bilinear_estimate_check(&z, &z, 0.5, 2.0, 2.0, 1.0).unwrap();
        assert!(r.ratio.vacuous);
    }

    /// Closed form for steady fields: `−Σ_k (1 − e^{−ν|k|²τ})/(ν|k|²) F̂(k)`.
    fn steady_closed_form(u: &SpectralField, v: &SpectralField, tau: f64, nu: f64) -> SpectralField {
        let flux = projected_flux_divergence(u, v).unwrap();
        let wn = u.grid().wavenumbers();
        flux.apply_multiplier(|idx| {
            let a = nu * wn.k_sq[idx];
            if a == 0.0 {
                -tau
            } else {
                -(1.0 - (-a * tau).exp()) / a
            }
        })
    }

    #[test]
    fn steady_modes_match_richardson_extrapolated_quadrature() {
        let g = GridSpec::periodic(2, 32, 0.1).unwrap();
        let u = crate::field::PhysicalField::vector_from_fn(g, |x| [(2.0 * x[1]).sin(), 0.0, 0.0])
            .to_spectral()
            .unwrap();
        let v = crate::field::PhysicalField::vector_from_fn(g, |x| [x[1].cos() * x[0].cos(), x[1].sin() * x[0].sin(), 0.0])
            .to_spectral()
            .unwrap()
            .leray_project()
            .unwrap();
        let tau = 0.4;
        let exact = steady_closed_form(&u, &v, tau, 1.0);
        assert!(exact.l2_norm_sq() > 1e-6);
        let coarse = duhamel_bilinear(&steady(&u, 9), &steady(&v, 9), tau, 1.0).unwrap();
        let fine = duhamel_bilinear(&steady(&u, 17), &steady(&v, 17), tau, 1.0).unwrap();
        let rich = fine.lincomb(4.0 / 3.0, &coarse, -1.0 / 3.0).unwrap();
        let e_c = coarse.sub(&exact).unwrap().l2_norm_sq().sqrt();
        let e_f = fine.sub(&exact).unwrap().l2_norm_sq().sqrt();
        let e_r = rich.sub(&exact).unwrap().l2_norm_sq().sqrt();
        let scale = exact.l2_norm_sq().sqrt();
        assert!((e_c / e_f - 4.0).abs() < 0.3, "trapezoid order: {}", e_c / e_f);
        assert!(e_r < 0.05 * e_f + 1e-14 * scale, "{e_r} vs {e_f}");
    }

    #[test]
    fn exponent_rules() {
        assert_eq!(bilinear_exponent(3, 2.0, 2.0).unwrap(), 0.5);
        assert!((bilinear_exponent(3, f64::INFINITY, 6.0).unwrap() - 0.75).abs() < 1e-15);
        assert!(bilinear_exponent(3, f64::INFINITY, 3.0).is_err());
        assert!(bilinear_exponent(3, 2.0, 4.0).is_err());
    }

    #[test]
    fn estimate_ratio_is_finite_on_random_series() {
        let g = GridSpec::periodic(2, 32, 0.1).unwrap();
        let mut rng = random::rng(8);
        let u: Vec<_> = (0..9).map(|_| random::divergence_free(&g, 1.0, 5.0, &mut rng).unwrap()).collect();
        for (p, q) in [(2.0, 2.0), (f64::INFINITY, 4.0), (4.0, 2.0)] {
            let r = bilinear_estimate_check(&u, &u, 0.2, p, q, 1.0).unwrap();
            assert!(!r.ratio.vacuous);
            assert!(r.ratio.ratio.is_finite() && r.ratio.ratio > 0.0);
        }
    }
}
