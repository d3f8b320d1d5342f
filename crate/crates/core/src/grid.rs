//! Periodic box discretization.
//!
//! Samples live at `x_a = i_a * period / n` for `i_a in 0..n` along every
//! axis, stored row-major with the last axis contiguous. Spectral index
//! `i_a` maps to the signed mode `m_a = i_a` for `i_a < n/2` and `i_a - n`
//! otherwise, with physical wavenumber `k_a = 2π m_a / period`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    n: usize,
    period: f64,
    viscosity: f64,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize, period: f64, viscosity: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidGrid(format!("dim must be 2 or 3, got {dim}")));
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_per_axis must be a power of two >= 16, got {n}"
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidGrid(format!("period must be positive, got {period}")));
        }
        if !(viscosity.is_finite() && viscosity > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "viscosity must be positive, got {viscosity}"
            )));
        }
        Ok(Self {
            dim,
            n,
            period,
            viscosity,
        })
    }

    /// 2π-periodic box, the default geometry.
    pub fn periodic(dim: usize, n: usize, viscosity: f64) -> Result<Self> {
        Self::new(dim, n, 2.0 * PI, viscosity)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn viscosity(&self) -> f64 {
        self.viscosity
    }

    pub fn with_viscosity(&self, viscosity: f64) -> Result<Self> {
        Self::new(self.dim, self.n, self.period, viscosity)
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(self.dim, n, self.period, self.viscosity)
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.period.powi(self.dim as i32)
    }

    /// Fundamental wavenumber 2π / period.
    pub fn k0(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// Largest resolved wavenumber along one axis.
    pub fn k_nyquist(&self) -> f64 {
        self.k0() * (self.n / 2) as f64
    }

    /// Multi-index of a flat index; unused trailing axes are zero.
    #[inline]
    pub fn coords(&self, mut idx: usize) -> [usize; 3] {
        let mut c = [0usize; 3];
        for a in (0..self.dim).rev() {
            c[a] = idx % self.n;
            idx /= self.n;
        }
        c
    }

    #[inline]
    pub fn flat(&self, c: [usize; 3]) -> usize {
        let mut idx = 0;
        for &ca in c.iter().take(self.dim) {
            idx = idx * self.n + ca;
        }
        idx
    }

    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = c[a] as f64 * h;
        }
        x
    }

    /// Signed Fourier mode number for a spectral index along one axis.
    #[inline]
    pub fn signed_mode(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Minimal-image displacement of a coordinate from the origin.
    #[inline]
    pub fn min_image(&self, x: f64) -> f64 {
        let l = self.period;
        let r = x.rem_euclid(l);
        if r > 0.5 * l {
            r - l
        } else {
            r
        }
    }

    /// Fundamental-domain distance of grid point `idx` from the origin.
    pub fn distance_to_origin(&self, idx: usize) -> f64 {
        let x = self.position(idx);
        (0..self.dim)
            .map(|a| self.min_image(x[a]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Cached wavenumber tables for this grid.
    pub fn wavenumbers(&self) -> Arc<Wavenumbers> {
        type Cache = Mutex<HashMap<(usize, usize, u64), Arc<Wavenumbers>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let key = (self.dim, self.n, self.period.to_bits());
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("wavenumber cache poisoned");
        guard
            .entry(key)
            .or_insert_with(|| Arc::new(Wavenumbers::build(self)))
            .clone()
    }
}

/// Per-index wavenumber tables.
///
/// `k` holds the true wavenumber. `k_odd` zeroes the Nyquist component on
/// each axis so that odd-order multipliers (`ik`, Leray projection) map real
/// fields to real fields.
#[derive(Debug)]
pub struct Wavenumbers {
    pub k: Vec<[f64; 3]>,
    pub k_odd: Vec<[f64; 3]>,
    pub k_sq: Vec<f64>,
    pub k_mag: Vec<f64>,
    pub modes: Vec<[i64; 3]>,
}

impl Wavenumbers {
    fn build(grid: &GridSpec) -> Self {
        let len = grid.len();
        let k0 = grid.k0();
        let half = (grid.n / 2) as i64;
        let mut k = Vec::with_capacity(len);
        let mut k_odd = Vec::with_capacity(len);
        let mut k_sq = Vec::with_capacity(len);
        let mut k_mag = Vec::with_capacity(len);
        let mut modes = Vec::with_capacity(len);
        for idx in 0..len {
            let c = grid.coords(idx);
            let mut kv = [0.0; 3];
            let mut ko = [0.0; 3];
            let mut m = [0i64; 3];
            for a in 0..grid.dim {
                m[a] = grid.signed_mode(c[a]);
                kv[a] = k0 * m[a] as f64;
                ko[a] = if m[a] == -half { 0.0 } else { kv[a] };
            }
            let sq: f64 = kv.iter().map(|x| x * x).sum();
            k.push(kv);
            k_odd.push(ko);
            k_sq.push(sq);
            k_mag.push(sq.sqrt());
            modes.push(m);
        }
        Self {
            k,
            k_odd,
            k_sq,
            k_mag,
            modes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::periodic(1, 32, 1.0).is_err());
        assert!(GridSpec::periodic(2, 24, 1.0).is_err());
        assert!(GridSpec::periodic(2, 8, 1.0).is_err());
        assert!(GridSpec::periodic(2, 32, 0.0).is_err());
        assert!(GridSpec::new(2, 32, -1.0, 0.1).is_err());
        assert!(GridSpec::periodic(3, 16, 0.1).is_ok());
    }

    #[test]
    fn flat_and_coords_roundtrip() {
        let g = GridSpec::periodic(3, 16, 1.0).unwrap();
        for idx in [0, 1, 17, 255, 4095] {
            assert_eq!(g.flat(g.coords(idx)), idx);
        }
        let c = g.coords(1 + 16 * 2 + 256 * 3);
        assert_eq!(c, [3, 2, 1]);
    }

    #[test]
    fn nyquist_is_zeroed_for_odd_multipliers() {
        let g = GridSpec::periodic(2, 16, 1.0).unwrap();
        let wn = g.wavenumbers();
        let idx = g.flat([8, 3, 0]);
        assert_eq!(wn.modes[idx][0], -8);
        assert_eq!(wn.k[idx][0], -8.0);
        assert_eq!(wn.k_odd[idx][0], 0.0);
        assert_eq!(wn.k_odd[idx][1], 3.0);
    }

    #[test]
    fn min_image_distance() {
        let g = GridSpec::periodic(2, 16, 1.0).unwrap();
        let idx = g.flat([15, 0, 0]);
        assert!((g.distance_to_origin(idx) - g.spacing()).abs() < 1e-14);
    }
}
