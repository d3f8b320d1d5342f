//! Dual physical/spectral fields on the periodic box.
//!
//! A field carries any number of scalar components (a vector field has
//! `dim`, a divergence one, a gradient `dim * dim` stored as `∂_j u_i` at
//! `i * dim + j`). Pointwise magnitudes are Euclidean over all components,
//! which for tensors is the Frobenius norm.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::GridSpec;

/// Relative tolerance behind the divergence-free certificate.
pub const DIVERGENCE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    Physical,
    Spectral,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    Rectangle,
    GridMax,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub p: f64,
    pub value: f64,
    pub quadrature: Quadrature,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalField {
    grid: GridSpec,
    components: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    components: Vec<Vec<Complex64>>,
    divergence_free: bool,
}

fn check_lengths<T>(grid: &GridSpec, components: &[Vec<T>]) -> Result<()> {
    if components.is_empty() {
        return Err(Error::param("field needs at least one component"));
    }
    for c in components {
        if c.len() != grid.len() {
            return Err(Error::param(format!(
                "component has {} samples, grid has {}",
                c.len(),
                grid.len()
            )));
        }
    }
    Ok(())
}

impl PhysicalField {
    pub fn new(grid: GridSpec, components: Vec<Vec<f64>>) -> Result<Self> {
        check_lengths(&grid, &components)?;
        Ok(Self { grid, components })
    }

    pub fn zeros(grid: GridSpec, ncomp: usize) -> Self {
        Self {
            grid,
            components: vec![vec![0.0; grid.len()]; ncomp],
        }
    }

    pub fn constant(grid: GridSpec, value: &[f64]) -> Self {
        Self {
            grid,
            components: value.iter().map(|&c| vec![c; grid.len()]).collect(),
        }
    }

    /// Samples `f(x, out)` at every grid point; `out` has `ncomp` slots.
    pub fn from_fn<F>(grid: GridSpec, ncomp: usize, f: F) -> Self
    where
        F: Fn([f64; 3], &mut [f64]) + Sync,
    {
        let len = grid.len();
        let samples: Vec<Vec<f64>> = (0..len)
            .into_par_iter()
            .map(|idx| {
                let mut out = vec![0.0; ncomp];
                f(grid.position(idx), &mut out);
                out
            })
            .collect();
        let mut components = vec![vec![0.0; len]; ncomp];
        for (idx, s) in samples.into_iter().enumerate() {
            for (c, v) in s.into_iter().enumerate() {
                components[c][idx] = v;
            }
        }
        Self { grid, components }
    }

    /// Vector field with `dim` components from a closure returning `[f64; 3]`.
    pub fn vector_from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn([f64; 3]) -> [f64; 3] + Sync,
    {
        let d = grid.dim();
        Self::from_fn(grid, d, |x, out| {
            let v = f(x);
            out.copy_from_slice(&v[..d]);
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn representation(&self) -> Representation {
        Representation::Physical
    }

    pub fn ncomp(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.components[c]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.components
    }

    pub fn to_spectral(&self) -> Result<SpectralField> {
        for (c, comp) in self.components.iter().enumerate() {
            if let Some(index) = comp.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    component: c,
                    index,
                    position: self.grid.position(index),
                });
            }
        }
        let components = self
            .components
            .par_iter()
            .map(|c| fft::forward_real(&self.grid, c))
            .collect();
        Ok(SpectralField {
            grid: self.grid,
            components,
            divergence_free: false,
        })
    }

    /// Pointwise Euclidean magnitude over all components.
    pub fn magnitude(&self) -> Vec<f64> {
        let len = self.grid.len();
        let mut out = vec![0.0; len];
        for comp in &self.components {
            for (o, v) in out.iter_mut().zip(comp) {
                *o += v * v;
            }
        }
        out.iter_mut().for_each(|v| *v = v.sqrt());
        out
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitude().into_iter().fold(0.0, f64::max)
    }

    pub fn lp_norm(&self, p: f64) -> Result<NormReport> {
        lp_norm(self, p)
    }

    /// Component means (integral over the box divided by its volume).
    pub fn mean(&self) -> Vec<f64> {
        let len = self.grid.len() as f64;
        self.components
            .iter()
            .map(|c| c.iter().sum::<f64>() / len)
            .collect()
    }

    pub fn map_components<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self {
            grid: self.grid,
            components: self
                .components
                .iter()
                .map(|c| c.iter().map(|&v| f(v)).collect())
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_components(|v| v * s)
    }

    /// Pointwise mask: multiplies every component by `m(idx)`.
    pub fn mask<F: Fn(usize) -> f64>(&self, m: F) -> Self {
        let weights: Vec<f64> = (0..self.grid.len()).map(m).collect();
        Self {
            grid: self.grid,
            components: self
                .components
                .iter()
                .map(|c| c.iter().zip(&weights).map(|(v, w)| v * w).collect())
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &Self, f: F) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.ncomp() != other.ncomp() {
            return Err(Error::ComponentMismatch {
                expected: self.ncomp(),
                found: other.ncomp(),
            });
        }
        Ok(Self {
            grid: self.grid,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
        })
    }
}

/// L^p norm of the pointwise Euclidean magnitude.
///
/// Rectangle rule over grid cells for finite `p`, grid maximum for `p = ∞`.
pub fn lp_norm(f: &PhysicalField, p: f64) -> Result<NormReport> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::param(format!("L^p norm needs p >= 1, got {p}")));
    }
    let mag = f.magnitude();
    if p.is_infinite() {
        return Ok(NormReport {
            p,
            value: mag.into_iter().fold(0.0, f64::max),
            quadrature: Quadrature::GridMax,
        });
    }
    let dv = f.grid.cell_volume();
    let value = if p == 2.0 {
        (mag.iter().map(|m| m * m).sum::<f64>() * dv).sqrt()
    } else {
        // Scale by the max to keep large p away from overflow.
        let top = mag.iter().copied().fold(0.0, f64::max);
        if top == 0.0 {
            0.0
        } else {
            let s: f64 = mag.iter().map(|m| (m / top).powf(p)).sum();
            top * (s * dv).powf(1.0 / p)
        }
    };
    Ok(NormReport {
        p,
        value,
        quadrature: Quadrature::Rectangle,
    })
}

/// Convenience wrapper returning just the value.
pub fn norm(f: &PhysicalField, p: f64) -> Result<f64> {
    lp_norm(f, p).map(|r| r.value)
}

pub struct Derivatives {
    pub divergence: SpectralField,
    pub gradient: SpectralField,
    pub laplacian: SpectralField,
}

impl SpectralField {
    pub fn new(grid: GridSpec, components: Vec<Vec<Complex64>>) -> Result<Self> {
        check_lengths(&grid, &components)?;
        Ok(Self {
            grid,
            components,
            divergence_free: false,
        })
    }

    pub fn zeros(grid: GridSpec, ncomp: usize) -> Self {
        Self {
            grid,
            components: vec![vec![Complex64::new(0.0, 0.0); grid.len()]; ncomp],
            divergence_free: ncomp == grid.dim(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn representation(&self) -> Representation {
        Representation::Spectral
    }

    pub fn ncomp(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.components[c]
    }

    pub fn components(&self) -> &[Vec<Complex64>] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [Vec<Complex64>] {
        self.divergence_free = false;
        &mut self.components
    }

    pub fn is_divergence_free(&self) -> bool {
        self.divergence_free
    }

    pub fn to_physical(&self) -> PhysicalField {
        let components = self
            .components
            .par_iter()
            .map(|c| fft::inverse_real(&self.grid, c))
            .collect();
        PhysicalField {
            grid: self.grid,
            components,
        }
    }

    fn require_vector(&self) -> Result<()> {
        if self.ncomp() != self.grid.dim() {
            return Err(Error::ComponentMismatch {
                expected: self.grid.dim(),
                found: self.ncomp(),
            });
        }
        Ok(())
    }

    /// Leray projection `û ← û − k (k·û)/|k|²`; the zero mode passes through.
    pub fn leray_project(&self) -> Result<Self> {
        self.require_vector()?;
        let d = self.grid.dim();
        let wn = self.grid.wavenumbers();
        let mut out = self.components.clone();
        for idx in 0..self.grid.len() {
            let k = &wn.k_odd[idx];
            let ksq: f64 = k[..d].iter().map(|x| x * x).sum();
            if ksq == 0.0 {
                continue;
            }
            let mut dot = Complex64::new(0.0, 0.0);
            for a in 0..d {
                dot += self.components[a][idx] * k[a];
            }
            let s = dot / ksq;
            for a in 0..d {
                out[a][idx] = self.components[a][idx] - s * k[a];
            }
        }
        Ok(Self {
            grid: self.grid,
            components: out,
            divergence_free: true,
        })
    }

    /// `max |k·û| / max |û|`, zero for the zero field.
    pub fn divergence_residual(&self) -> Result<f64> {
        self.require_vector()?;
        let d = self.grid.dim();
        let wn = self.grid.wavenumbers();
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for idx in 0..self.grid.len() {
            let k = &wn.k_odd[idx];
            let mut dot = Complex64::new(0.0, 0.0);
            let mut mag = 0.0;
            for a in 0..d {
                let c = self.components[a][idx];
                dot += c * k[a];
                mag += c.norm_sqr();
            }
            num = num.max(dot.norm());
            den = den.max(mag.sqrt());
        }
        Ok(if den == 0.0 { 0.0 } else { num / den })
    }

    /// Sets the divergence-free certificate if the residual is within tolerance.
    pub fn certify_divergence_free(mut self) -> Result<Self> {
        self.divergence_free = self.divergence_residual()? <= DIVERGENCE_TOL;
        Ok(self)
    }

    /// Applies a real radial-or-even multiplier `m(idx)` to every component.
    /// Such multipliers commute with the Leray projection, so the certificate
    /// is kept.
    pub fn apply_multiplier<F: Fn(usize) -> f64 + Sync>(&self, m: F) -> Self {
        let components = self
            .components
            .par_iter()
            .map(|c| c.iter().enumerate().map(|(i, v)| v * m(i)).collect())
            .collect();
        Self {
            grid: self.grid,
            components,
            divergence_free: self.divergence_free,
        }
    }

    pub fn divergence(&self) -> Result<Self> {
        self.require_vector()?;
        let d = self.grid.dim();
        let wn = self.grid.wavenumbers();
        let i = Complex64::new(0.0, 1.0);
        let comp: Vec<Complex64> = (0..self.grid.len())
            .map(|idx| {
                (0..d)
                    .map(|a| i * wn.k_odd[idx][a] * self.components[a][idx])
                    .sum()
            })
            .collect();
        Ok(Self {
            grid: self.grid,
            components: vec![comp],
            divergence_free: false,
        })
    }

    /// Gradient tensor `∂_j f_i` at component `i * dim + j`.
    pub fn gradient(&self) -> Self {
        let d = self.grid.dim();
        let wn = self.grid.wavenumbers();
        let i = Complex64::new(0.0, 1.0);
        let mut components = Vec::with_capacity(self.ncomp() * d);
        for c in &self.components {
            for j in 0..d {
                components.push(
                    c.iter()
                        .enumerate()
                        .map(|(idx, v)| i * wn.k_odd[idx][j] * v)
                        .collect(),
                );
            }
        }
        Self {
            grid: self.grid,
            components,
            divergence_free: false,
        }
    }

    pub fn laplacian(&self) -> Self {
        let wn = self.grid.wavenumbers();
        self.apply_multiplier(|idx| -wn.k_sq[idx])
    }

    pub fn derivative_ops(&self) -> Result<Derivatives> {
        Ok(Derivatives {
            divergence: self.divergence()?,
            gradient: self.gradient(),
            laplacian: self.laplacian(),
        })
    }

    /// `‖f‖₂²` by Parseval: `volume * Σ_k |f̂(k)|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        let s: f64 = self
            .components
            .iter()
            .map(|c| c.iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum();
        s * self.grid.volume()
    }

    /// `‖∇f‖₂²` by Parseval.
    pub fn gradient_l2_sq(&self) -> f64 {
        let wn = self.grid.wavenumbers();
        let s: f64 = self
            .components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(&wn.k_sq)
                    .map(|(v, k2)| v.norm_sqr() * k2)
                    .sum::<f64>()
            })
            .sum();
        s * self.grid.volume()
    }

    /// Real L² inner product `⟨f, g⟩` by Parseval.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        let s: f64 = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x * y.conj()).re).sum::<f64>())
            .sum();
        Ok(s * self.grid.volume())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.ncomp() != other.ncomp() {
            return Err(Error::ComponentMismatch {
                expected: self.ncomp(),
                found: other.ncomp(),
            });
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_compatible(other)?;
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * a + q * b).collect())
            .collect();
        Ok(Self {
            grid: self.grid,
            components,
            divergence_free: self.divergence_free && other.divergence_free,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.lincomb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.lincomb(1.0, other, -1.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.apply_multiplier(|_| s)
    }

    /// Zero-mean copy (removes the `k = 0` coefficient).
    /// Moves the coefficient of mode `k` to mode `dilation·k` on `target`,
    /// which must share the period and dimension. Returns the field and the
    /// `L²` energy of modes that land at or beyond the target's Nyquist index.
    pub fn dilate_modes(&self, target: GridSpec, dilation: i64) -> Result<(Self, f64)> {
        if target.dim() != self.grid.dim() || target.period() != self.grid.period() || dilation < 1 {
            return Err(Error::param("mode dilation needs a matching box and a positive factor"));
        }
        let wn = self.grid.wavenumbers();
        let half = (target.n() / 2) as i64;
        let nt = target.n() as i64;
        let mut out = vec![vec![Complex64::new(0.0, 0.0); target.len()]; self.ncomp()];
        let mut dropped = 0.0;
        for (idx, m) in wn.modes.iter().enumerate() {
            let d = m.map(|v| v * dilation);
            let amp: f64 = self.components.iter().map(|c| c[idx].norm_sqr()).sum();
            if (0..target.dim()).any(|a| d[a].abs() >= half) {
                dropped += amp;
                continue;
            }
            let mut c = [0usize; 3];
            for a in 0..target.dim() {
                c[a] = d[a].rem_euclid(nt) as usize;
            }
            let t = target.flat(c);
            for (o, s) in out.iter_mut().zip(&self.components) {
                o[t] = s[idx];
            }
        }
        Ok((
            Self {
                grid: target,
                components: out,
                divergence_free: self.divergence_free,
            },
            dropped * self.grid.volume(),
        ))
    }

    pub fn without_mean(&self) -> Self {
        let mut out = self.clone();
        for c in &mut out.components {
            c[0] = Complex64::new(0.0, 0.0);
        }
        out
    }

    pub(crate) fn from_parts(
        grid: GridSpec,
        components: Vec<Vec<Complex64>>,
        divergence_free: bool,
    ) -> Self {
        Self {
            grid,
            components,
            divergence_free,
        }
    }
}

/// `min{‖u‖_∞, √‖∇u‖_∞}` from grid maxima of the pointwise magnitudes.
pub fn min_inf_grad(u: &SpectralField) -> f64 {
    let sup_u = u.to_physical().max_magnitude();
    let sup_grad = u.gradient().to_physical().max_magnitude();
    sup_u.min(sup_grad.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid2(n: usize) -> GridSpec {
        GridSpec::periodic(2, n, 0.1).unwrap()
    }

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn sine_has_single_conjugate_pair() {
        let g = grid2(32);
        let f = PhysicalField::from_fn(g, 1, |x, o| o[0] = x[0].sin());
        let s = f.to_spectral().unwrap();
        let plus = g.flat([1, 0, 0]);
        let minus = g.flat([31, 0, 0]);
        let c = s.component(0);
        assert!((c[plus] - Complex64::new(0.0, -0.5)).norm() < 1e-12);
        assert!((c[minus] - Complex64::new(0.0, 0.5)).norm() < 1e-12);
        for (i, v) in c.iter().enumerate() {
            if i != plus && i != minus {
                assert!(v.norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn constant_maps_to_zero_mode() {
        let g = grid2(16);
        let s = PhysicalField::constant(g, &[2.5]).to_spectral().unwrap();
        assert!((s.component(0)[0].re - 2.5).abs() < 1e-14);
        assert!(s.component(0)[1..].iter().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn non_finite_is_rejected_with_location() {
        let g = grid2(16);
        let mut comps = vec![vec![0.0; g.len()]; 2];
        comps[1][37] = f64::NAN;
        let err = PhysicalField::new(g, comps).unwrap().to_spectral().unwrap_err();
        match err {
            Error::NonFinite {
                component, index, ..
            } => {
                assert_eq!(component, 1);
                assert_eq!(index, 37);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn gradient_field_is_annihilated() {
        let g = grid2(32);
        // ∇(sin x1 sin x2)
        let f = PhysicalField::vector_from_fn(g, |x| {
            [x[0].cos() * x[1].sin(), x[0].sin() * x[1].cos(), 0.0]
        });
        let p = f.to_spectral().unwrap().leray_project().unwrap();
        assert!(p.to_physical().max_magnitude() <= 1e-12);
    }

    #[test]
    fn divergence_free_field_is_unchanged_3d() {
        let g = GridSpec::periodic(3, 16, 0.1).unwrap();
        let f = PhysicalField::vector_from_fn(g, |x| [x[1].sin(), 0.0, 0.0]);
        let s = f.to_spectral().unwrap();
        let p = s.leray_project().unwrap();
        let diff = p.sub(&s).unwrap().to_physical().max_magnitude();
        assert!(diff <= 1e-12);
        assert!(p.is_divergence_free());
    }

    #[test]
    fn zero_mode_passes_through_projection() {
        let g = grid2(16);
        let s = PhysicalField::constant(g, &[1.0, -2.0]).to_spectral().unwrap();
        let p = s.leray_project().unwrap();
        assert!((p.component(0)[0].re - 1.0).abs() < 1e-14);
        assert!((p.component(1)[0].re + 2.0).abs() < 1e-14);
    }

    #[test]
    fn derivative_examples() {
        let g = grid2(32);
        let f = PhysicalField::vector_from_fn(g, |x| [x[1].sin(), 0.0, 0.0])
            .to_spectral()
            .unwrap();
        let ops = f.derivative_ops().unwrap();
        assert!(ops.divergence.to_physical().max_magnitude() < 1e-12);

        let s = PhysicalField::from_fn(g, 1, |x, o| o[0] = x[0].sin())
            .to_spectral()
            .unwrap();
        let lap = s.laplacian().to_physical();
        let expect = s.scale(-1.0).to_physical();
        let err = max_abs(
            &lap.component(0)
                .iter()
                .zip(expect.component(0))
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        assert!(err < 1e-12);
    }

    #[test]
    fn pure_mode_laplacian_multiplies_by_k_squared() {
        let g = grid2(32);
        let f = PhysicalField::from_fn(g, 1, |x, o| o[0] = (3.0 * x[0] - 5.0 * x[1]).cos())
            .to_spectral()
            .unwrap();
        let lap = f.laplacian();
        let want = f.scale(-34.0);
        let d = lap.sub(&want).unwrap();
        assert!(d.l2_norm_sq().sqrt() < 1e-10);
    }

    #[test]
    fn lp_norm_examples() {
        let g = grid2(64);
        let c = PhysicalField::constant(g, &[3.0, 4.0]);
        let r = lp_norm(&c, 2.0).unwrap();
        assert!((r.value - 5.0 * 2.0 * PI).abs() < 1e-10);
        assert_eq!(r.quadrature, Quadrature::Rectangle);

        let s = PhysicalField::from_fn(g, 1, |x, o| o[0] = x[0].sin());
        let inf = lp_norm(&s, f64::INFINITY).unwrap();
        assert!((inf.value - 1.0).abs() < 1e-12);
        assert_eq!(inf.quadrature, Quadrature::GridMax);
        let two = lp_norm(&s, 2.0).unwrap().value;
        assert!((two - (2.0 * PI * PI).sqrt()).abs() < 1e-10, "{two}");
        assert!((two - 4.4429).abs() < 1e-4);

        assert!(lp_norm(&s, 0.5).is_err());
    }

    #[test]
    fn min_inf_grad_examples() {
        let g = grid2(32);
        assert_eq!(min_inf_grad(&SpectralField::zeros(g, 2)), 0.0);
        let u = PhysicalField::vector_from_fn(g, |x| [x[1].sin(), 0.0, 0.0])
            .to_spectral()
            .unwrap();
        assert!((min_inf_grad(&u) - 1.0).abs() < 1e-12);
    }
}
