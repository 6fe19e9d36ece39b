//! Isometric vectorization of symmetric matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative asymmetry accepted by [`svec`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Lower triangle, column by column, off-diagonals scaled by `√2`, so that
/// `svec(A)·svec(B) = tr(AB)`.
pub fn svec(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let k = m.nrows();
    if m.ncols() != k {
        return Err(Error::Dimension(format!(
            "svec needs a square matrix, got {:?}",
            m.shape()
        )));
    }
    let asym = crate::linalg::asymmetry(m);
    if asym > SYMMETRY_TOL * m.amax().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let mut out = DVector::zeros(k * (k + 1) / 2);
    let mut idx = 0;
    for j in 0..k {
        out[idx] = m[(j, j)];
        idx += 1;
        for i in j + 1..k {
            out[idx] = 0.5 * (m[(i, j)] + m[(j, i)]) * std::f64::consts::SQRT_2;
            idx += 1;
        }
    }
    Ok(out)
}

/// Inverse of [`svec`].
pub fn smat(v: &DVector<f64>) -> Result<DMatrix<f64>> {
    // k(k+1)/2 = len
    let k = ((((8 * v.len() + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    if k * (k + 1) / 2 != v.len() {
        return Err(Error::Dimension(format!("length {} is not triangular", v.len())));
    }
    let mut m = DMatrix::zeros(k, k);
    let mut idx = 0;
    for j in 0..k {
        m[(j, j)] = v[idx];
        idx += 1;
        for i in j + 1..k {
            let x = v[idx] / std::f64::consts::SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            idx += 1;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity() {
        let v = svec(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(v.as_slice(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(svec(&m), Err(Error::NotSymmetric(_))));
        assert!(smat(&DVector::zeros(4)).is_err());
    }

    fn sym(k: usize, vals: &[f64]) -> DMatrix<f64> {
        let m = DMatrix::from_fn(k, k, |i, j| vals[i * k + j]);
        (&m + m.transpose()) * 0.5
    }

    proptest! {
        #[test]
        fn round_trip_and_inner_product(k in 1usize..7, vals in prop::collection::vec(-10.0f64..10.0, 72)) {
            let a = sym(k, &vals[..k * k]);
            let b = sym(k, &vals[36..36 + k * k]);
            let va = svec(&a).unwrap();
            let back = smat(&va).unwrap();
            prop_assert!((&back - &a).amax() <= 1e-14 * a.amax().max(1.0));
            let vb = svec(&b).unwrap();
            let tr = (&a * &b).trace();
            prop_assert!((va.dot(&vb) - tr).abs() <= 1e-12 * (1.0 + tr.abs()));
        }
    }
}
