//! Quadratic transport term shared by the solver and the Duhamel operator.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft;
use crate::field::SpectralField;
use crate::grid::GridSpec;

/// Index pairs `(a, b)` with `a <= b` of the symmetric tensor.
fn sym_pairs(dim: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for a in 0..dim {
        for b in a..dim {
            v.push((a, b));
        }
    }
    v
}

/// `ℙ∇·(½(u⊗v + v⊗u))` evaluated pseudo-spectrally.
///
/// Products are formed on the grid without truncation; callers that need
/// alias control pass already-truncated inputs and truncate the output.
pub fn projected_flux_divergence(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    let grid = *u.grid();
    if v.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    let d = grid.dim();
    for f in [u, v] {
        if f.ncomp() != d {
            return Err(Error::ComponentMismatch {
                expected: d,
                found: f.ncomp(),
            });
        }
    }
    let up = u.to_physical().into_components();
    let same = std::ptr::eq(u, v);
    let vp = if same {
        up.clone()
    } else {
        v.to_physical().into_components()
    };
    let pairs = sym_pairs(d);
    let tensor: Vec<Vec<Complex64>> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let prod: Vec<f64> = (0..grid.len())
                .map(|i| 0.5 * (up[a][i] * vp[b][i] + vp[a][i] * up[b][i]))
                .collect();
            fft::forward_real(&grid, &prod)
        })
        .collect();
    Ok(divergence_of_symmetric(&grid, &pairs, &tensor))
}

fn divergence_of_symmetric(
    grid: &GridSpec,
    pairs: &[(usize, usize)],
    tensor: &[Vec<Complex64>],
) -> SpectralField {
    let d = grid.dim();
    let wn = grid.wavenumbers();
    let slot = |a: usize, b: usize| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        pairs.iter().position(|&p| p == (lo, hi)).expect("pair")
    };
    let slots: Vec<Vec<usize>> = (0..d).map(|a| (0..d).map(|b| slot(a, b)).collect()).collect();
    let i = Complex64::new(0.0, 1.0);
    let mut out = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; d];
    out.par_iter_mut().enumerate().for_each(|(a, comp)| {
        for (idx, c) in comp.iter_mut().enumerate() {
            let k = wn.k_odd[idx];
            let mut s = Complex64::new(0.0, 0.0);
            for b in 0..d {
                s += i * k[b] * tensor[slots[a][b]][idx];
            }
            *c = s;
        }
    });
    SpectralField::from_parts(*grid, out, false)
        .leray_project()
        .expect("vector field")
}
