//! Interpolation conditions for `L`-smooth, `m`-strongly convex functions.
//!
//! A finite set of triples `(y_i, u_i, f_i)` is consistent with some
//! function in the class exactly when every ordered pair satisfies
//!
//! ```text
//! q_ij = 2(L−m)(f_i−f_j) − mL‖y_i−y_j‖² + 2⟨y_i−y_j, m u_i − L u_j⟩ − ‖u_i−u_j‖² ≥ 0.
//! ```
//!
//! Nonnegative combinations of these inequalities over a lifted history
//! give the quadratic form `Π(Λ)` and linear form `π(Λ)` used by the LMIs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algomodel::FunctionClass;
use crate::error::{Error, Result};

/// `(H, h)` with `q_ij = trace(Sᵀ H S) + hᵀ [f_i; f_j]` for `S = [y_i; y_j; u_i; u_j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairForm {
    pub h_mat: DMatrix<f64>,
    pub h_vec: DVector<f64>,
}

pub fn pair_form(fc: &FunctionClass) -> PairForm {
    let (m, l) = (fc.m, fc.l);
    let ml = m * l;
    #[rustfmt::skip]
    let h_mat = DMatrix::from_row_slice(4, 4, &[
        -ml,  ml,   m,   -l,
         ml, -ml,  -m,    l,
          m,  -m, -1.0,  1.0,
         -l,   l,  1.0, -1.0,
    ]);
    let h_vec = DVector::from_column_slice(&[2.0 * (l - m), -2.0 * (l - m)]);
    PairForm { h_mat, h_vec }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Value of the pairwise interpolation inequality for `(i, j)`.
pub fn qij_value(
    fc: &FunctionClass,
    y_i: &[f64],
    y_j: &[f64],
    u_i: &[f64],
    u_j: &[f64],
    f_i: f64,
    f_j: f64,
) -> Result<f64> {
    let d = y_i.len();
    if y_j.len() != d || u_i.len() != d || u_j.len() != d {
        return Err(Error::Dimension(format!(
            "pair has dimensions y_i={}, y_j={}, u_i={}, u_j={}",
            d,
            y_j.len(),
            u_i.len(),
            u_j.len()
        )));
    }
    let (m, l) = (fc.m, fc.l);
    let cross: f64 = (0..d).map(|k| (y_i[k] - y_j[k]) * (m * u_i[k] - l * u_j[k])).sum();
    Ok(2.0 * (l - m) * (f_i - f_j) - m * l * squared_distance(y_i, y_j) + 2.0 * cross - squared_distance(u_i, u_j))
}

/// A point, gradient and function value, all at the same location.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpPoint {
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub f: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationReport {
    pub interpolable: bool,
    /// Ordered pair `(i, j)` with the smallest `q_ij`.
    pub worst_pair: (usize, usize),
    pub worst_value: f64,
    pub tolerance: f64,
}

pub const DEFAULT_INTERP_TOL: f64 = 1e-9;

/// Check every ordered pair of `points` against the class inequality.
pub fn interpolation_check(points: &[InterpPoint], fc: &FunctionClass, tol: f64) -> Result<InterpolationReport> {
    let first = points
        .first()
        .ok_or_else(|| Error::Dimension("interpolation check needs at least one point".into()))?;
    let d = first.y.len();
    for (k, p) in points.iter().enumerate() {
        if p.y.len() != d || p.u.len() != d {
            return Err(Error::Dimension(format!(
                "point {k} has y/u lengths {}/{}, expected {d}",
                p.y.len(),
                p.u.len()
            )));
        }
    }
    let mut worst = (0, 0, f64::INFINITY);
    for (i, pi) in points.iter().enumerate() {
        for (j, pj) in points.iter().enumerate() {
            let q = qij_value(fc, &pi.y, &pj.y, &pi.u, &pj.u, pi.f, pj.f)?;
            if q < worst.2 {
                worst = (i, j, q);
            }
        }
    }
    Ok(InterpolationReport {
        interpolable: worst.2 >= -tol,
        worst_pair: (worst.0, worst.1),
        worst_value: worst.2,
        tolerance: tol,
    })
}

/// Nonnegative multipliers indexed by `{1, …, ℓ+1, ⋆}`; the last row and
/// column belong to the optimum `⋆`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierLambda {
    entries: DMatrix<f64>,
}

impl MultiplierLambda {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() < 2 {
            return Err(Error::Dimension(format!(
                "multiplier matrix must be square of size ℓ+2 ≥ 2, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        for j in 0..entries.ncols() {
            for i in 0..entries.nrows() {
                let value = entries[(i, j)];
                if !(value >= 0.0) {
                    return Err(Error::NegativeMultiplier { i, j, value });
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn zeros(ell: usize) -> Self {
        Self {
            entries: DMatrix::zeros(ell + 2, ell + 2),
        }
    }

    pub fn ell(&self) -> usize {
        self.entries.nrows() - 2
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Index of `⋆`.
    pub fn star(&self) -> usize {
        self.entries.nrows() - 1
    }
}

/// Unit vector `e_i ∈ ℝ^{ℓ+1}` with `e_⋆ = 0`.
fn unit(ell: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(ell + 1);
    if i <= ell {
        e[i] = 1.0;
    }
    e
}

/// Quadratic and linear forms contributed by the single pair `(i, j)`.
pub fn pair_multiplier_terms(ell: usize, fc: &FunctionClass, i: usize, j: usize) -> (DMatrix<f64>, DVector<f64>) {
    let (m, l) = (fc.m, fc.l);
    let k = ell + 1;
    let a = unit(ell, i) - unit(ell, j);
    let b = unit(ell, i) * m - unit(ell, j) * l;
    let aa = &a * a.transpose();
    let ab = &a * b.transpose();
    let mut pi_mat = DMatrix::zeros(2 * k, 2 * k);
    pi_mat.view_mut((0, 0), (k, k)).copy_from(&(&aa * (-m * l)));
    pi_mat.view_mut((0, k), (k, k)).copy_from(&ab);
    pi_mat.view_mut((k, 0), (k, k)).copy_from(&ab.transpose());
    pi_mat.view_mut((k, k), (k, k)).copy_from(&(-aa));
    let pi_vec = a * (2.0 * (l - m));
    (pi_mat, pi_vec)
}

/// `Π(Λ)` (size `2(ℓ+1)`) and `π(Λ)` (length `ℓ+1`).
pub fn multiplier_form(lambda: &MultiplierLambda, fc: &FunctionClass) -> (DMatrix<f64>, DVector<f64>) {
    let ell = lambda.ell();
    let k = ell + 1;
    let mut pi_mat = DMatrix::zeros(2 * k, 2 * k);
    let mut pi_vec = DVector::zeros(k);
    let w = lambda.entries();
    for j in 0..w.ncols() {
        for i in 0..w.nrows() {
            let weight = w[(i, j)];
            if i == j || weight == 0.0 {
                continue;
            }
            let (pm, pv) = pair_multiplier_terms(ell, fc, i, j);
            pi_mat += pm * weight;
            pi_vec += pv * weight;
        }
    }
    (pi_mat, pi_vec)
}

/// The pairwise terms of `Π`/`π` for every ordered pair `i ≠ j` of
/// `{1, …, ℓ+1, ⋆}`, computed once per `(ℓ, m, L)`. Diagonal pairs
/// contribute nothing and are omitted.
#[derive(Clone, Debug)]
pub struct MultiplierBasis {
    pub ell: usize,
    pub pairs: Vec<(usize, usize)>,
    pub quad: Vec<DMatrix<f64>>,
    pub lin: Vec<DVector<f64>>,
}

impl MultiplierBasis {
    pub fn new(ell: usize, fc: &FunctionClass) -> Self {
        let size = ell + 2;
        let pairs = off_diagonal_pairs(size);
        let (quad, lin) = pairs.iter().map(|&(i, j)| pair_multiplier_terms(ell, fc, i, j)).unzip();
        Self { ell, pairs, quad, lin }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Ordered off-diagonal index pairs of a `size × size` matrix, column-major.
pub fn off_diagonal_pairs(size: usize) -> Vec<(usize, usize)> {
    (0..size)
        .flat_map(|j| (0..size).filter(move |&i| i != j).map(move |i| (i, j)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn fc(m: f64, l: f64) -> FunctionClass {
        FunctionClass::new(m, l).unwrap()
    }

    #[test]
    fn pair_form_examples() {
        let pf = pair_form(&fc(1.0, 1.0));
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                -1.0, 1.0, 1.0, -1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0,
            ],
        );
        assert_eq!(pf.h_mat, expected);
        assert_eq!(pf.h_vec, DVector::from_column_slice(&[0.0, 0.0]));

        let pf = pair_form(&fc(1.0, 2.0));
        assert_eq!(
            pf.h_mat.row(0).iter().copied().collect::<Vec<_>>(),
            vec![-2.0, 2.0, 1.0, -2.0]
        );
        assert_eq!(pf.h_vec, DVector::from_column_slice(&[2.0, -2.0]));
        assert_eq!(pf.h_mat, pf.h_mat.transpose());
    }

    #[test]
    fn qij_examples() {
        let c = fc(1.0, 2.0);
        assert_eq!(qij_value(&c, &[0.3], &[0.3], &[0.1], &[0.1], 2.0, 2.0).unwrap(), 0.0);
        // data from f(y) = y²/2 at y = 1 and y = 0
        assert_eq!(qij_value(&c, &[1.0], &[0.0], &[1.0], &[0.0], 0.5, 0.0).unwrap(), 0.0);
        assert!(qij_value(&c, &[1.0, 2.0], &[0.0], &[1.0], &[0.0], 0.5, 0.0).is_err());
    }

    #[test]
    fn quadratic_samples_satisfy_all_pairs() {
        // f(y) = (L/2) y² with (m, L) = (1, 2)
        let c = fc(1.0, 2.0);
        let points: Vec<InterpPoint> = (-10..=10)
            .map(|k| {
                let y = 0.37 * k as f64;
                InterpPoint {
                    y: vec![y],
                    u: vec![2.0 * y],
                    f: y * y,
                }
            })
            .collect();
        let report = interpolation_check(&points, &c, DEFAULT_INTERP_TOL).unwrap();
        assert!(report.interpolable, "worst {:?}", report);
    }

    #[test]
    fn interpolation_check_examples() {
        let single = [InterpPoint {
            y: vec![1.0, -1.0],
            u: vec![0.0, 0.0],
            f: 3.0,
        }];
        assert!(
            interpolation_check(&single, &fc(1.0, 4.0), DEFAULT_INTERP_TOL)
                .unwrap()
                .interpolable
        );

        // f(y) = y²/2 has curvature 1 < m = 2
        let pts = [
            InterpPoint {
                y: vec![1.0],
                u: vec![1.0],
                f: 0.5,
            },
            InterpPoint {
                y: vec![0.0],
                u: vec![0.0],
                f: 0.0,
            },
        ];
        let report = interpolation_check(&pts, &fc(2.0, 3.0), DEFAULT_INTERP_TOL).unwrap();
        assert!(!report.interpolable);
        assert!(report.worst_value < 0.0);
        assert_ne!(report.worst_pair.0, report.worst_pair.1);

        assert!(interpolation_check(&[], &fc(1.0, 2.0), DEFAULT_INTERP_TOL).is_err());
        let ragged = [
            InterpPoint {
                y: vec![1.0],
                u: vec![1.0],
                f: 0.5,
            },
            InterpPoint {
                y: vec![0.0, 1.0],
                u: vec![0.0, 1.0],
                f: 0.0,
            },
        ];
        assert!(interpolation_check(&ragged, &fc(1.0, 2.0), DEFAULT_INTERP_TOL).is_err());
    }

    #[test]
    fn multiplier_form_examples() {
        let c = fc(1.0, 2.0);
        let (pm, pv) = multiplier_form(&MultiplierLambda::zeros(2), &c);
        assert!(pm.iter().all(|&v| v == 0.0) && pv.iter().all(|&v| v == 0.0));
        assert_eq!(pm.shape(), (6, 6));
        assert_eq!(pv.len(), 3);

        let mut w = DMatrix::zeros(2, 2);
        w[(0, 1)] = 1.0;
        let (pm, pv) = multiplier_form(&MultiplierLambda::new(w).unwrap(), &c);
        assert_eq!(pm, DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -1.0]));
        assert_eq!(pv, DVector::from_column_slice(&[2.0]));
    }

    #[test]
    fn negative_multiplier_rejected() {
        let mut w = DMatrix::zeros(3, 3);
        w[(1, 2)] = -0.5;
        assert!(matches!(
            MultiplierLambda::new(w),
            Err(Error::NegativeMultiplier { i: 1, j: 2, .. })
        ));
    }

    #[test]
    fn basis_covers_off_diagonal_pairs() {
        let c = fc(1.0, 5.0);
        let basis = MultiplierBasis::new(2, &c);
        assert_eq!(basis.len(), 4 * 3);
        assert!(basis.pairs.iter().all(|&(i, j)| i != j));
    }

    fn lambda_strategy(ell: usize) -> impl Strategy<Value = DMatrix<f64>> {
        let size = ell + 2;
        prop::collection::vec(0.0..3.0f64, size * size).prop_map(move |v| DMatrix::from_vec(size, size, v))
    }

    proptest! {
        #[test]
        fn pairwise_trace_form_matches(
            m in 0.1..5.0f64, extra in 0.0..20.0f64,
            vals in prop::collection::vec(-3.0..3.0f64, 14),
        ) {
            let c = fc(m, m + extra);
            let d = 3;
            let (yi, rest) = vals.split_at(d);
            let (yj, rest) = rest.split_at(d);
            let (ui, rest) = rest.split_at(d);
            let (uj, rest) = rest.split_at(d);
            let (fi, fj) = (rest[0], rest[1]);
            let direct = qij_value(&c, yi, yj, ui, uj, fi, fj).unwrap();
            let mut s = DMatrix::zeros(4, d);
            for k in 0..d {
                s[(0, k)] = yi[k];
                s[(1, k)] = yj[k];
                s[(2, k)] = ui[k];
                s[(3, k)] = uj[k];
            }
            let pf = pair_form(&c);
            let trace = (s.transpose() * &pf.h_mat * &s).trace() + pf.h_vec[0] * fi + pf.h_vec[1] * fj;
            prop_assert!((direct - trace).abs() <= 1e-10 * (1.0 + direct.abs()));
        }

        #[test]
        fn multiplier_form_is_symmetric_and_linear(
            w1 in lambda_strategy(2), w2 in lambda_strategy(2), m in 0.1..3.0f64, extra in 0.0..10.0f64,
        ) {
            let c = fc(m, m + extra);
            let l1 = MultiplierLambda::new(w1.clone()).unwrap();
            let l2 = MultiplierLambda::new(w2.clone()).unwrap();
            let l12 = MultiplierLambda::new(w1 + w2).unwrap();
            let (p1, v1) = multiplier_form(&l1, &c);
            let (p2, v2) = multiplier_form(&l2, &c);
            let (p12, v12) = multiplier_form(&l12, &c);
            prop_assert!((&p1 - p1.transpose()).amax() == 0.0);
            prop_assert!((p12 - (p1 + p2)).amax() < 1e-10 * (1.0 + extra) * (1.0 + m * m));
            prop_assert!((v12 - (v1 + v2)).amax() < 1e-10 * (1.0 + extra));
        }
    }

    /// For data generated by a quadratic in the class, the aggregated
    /// inequality holds for every nonnegative multiplier.
    #[test]
    fn aggregated_inequality_is_sound() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let m = rng.random_range(0.2..2.0);
            let l = m + rng.random_range(0.0..10.0);
            let c = fc(m, l);
            let ell = rng.random_range(0..4usize);
            let d = rng.random_range(1..4usize);
            let q: Vec<f64> = (0..d).map(|_| rng.random_range(m..=l)).collect();
            // history of points relative to the minimizer (y⋆ = 0, f⋆ = 0)
            let k = ell + 1;
            let mut ys = DMatrix::zeros(k, d);
            let mut us = DMatrix::zeros(k, d);
            let mut fs = DVector::zeros(k);
            for t in 0..k {
                for c in 0..d {
                    let y: f64 = rng.random_range(-2.0..2.0);
                    ys[(t, c)] = y;
                    us[(t, c)] = q[c] * y;
                    fs[t] += 0.5 * q[c] * y * y;
                }
            }
            let size = ell + 2;
            let w = DMatrix::from_fn(size, size, |_, _| rng.random_range(0.0..2.0));
            let (pm, pv) = multiplier_form(&MultiplierLambda::new(w).unwrap(), &c);
            let mut stacked = DMatrix::zeros(2 * k, d);
            stacked.rows_mut(0, k).copy_from(&ys);
            stacked.rows_mut(k, k).copy_from(&us);
            let value = (stacked.transpose() * pm * &stacked).trace() + pv.dot(&fs);
            assert!(value >= -1e-9, "aggregate {value} < 0");
        }
    }

    #[test]
    fn diagonal_multipliers_contribute_nothing() {
        let c = fc(1.0, 3.0);
        let w = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 2.0, 3.0]));
        let (pm, pv) = multiplier_form(&MultiplierLambda::new(w).unwrap(), &c);
        assert_abs_diff_eq!(pm.amax(), 0.0);
        assert_abs_diff_eq!(pv.amax(), 0.0);
    }
}
