//! Small dense helpers shared across modules.

use nalgebra::{DMatrix, SymmetricEigen};

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        0 => 0.0,
        1 => m[(0, 0)].abs(),
        2 => {
            // closed form keeps full accuracy away from the double-root point
            let tr = m[(0, 0)] + m[(1, 1)];
            let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
            let disc = tr * tr / 4.0 - det;
            if disc >= 0.0 {
                let s = disc.sqrt();
                (tr / 2.0 + s).abs().max((tr / 2.0 - s).abs())
            } else {
                det.max(0.0).sqrt()
            }
        }
        _ => m
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max),
    }
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

/// Eigenvalues of the symmetric part, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Largest eigenvalue of the symmetric part; `-inf` for an empty matrix.
pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(f64::NEG_INFINITY)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}
