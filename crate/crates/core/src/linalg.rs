//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// Largest ridge term tried before a system is declared singular.
pub const MAX_RIDGE: f64 = 1e-2;

/// Solve `(A + λI) X = B` for symmetric positive (semi-)definite `A` by
/// Cholesky, growing `λ` tenfold (from at least 1e-12) until the
/// factorization succeeds or `λ` passes [`MAX_RIDGE`]. Returns the solution
/// and the `λ` that was used.
pub fn solve_spd(a: &DMatrix<f64>, b: &DMatrix<f64>, lambda: f64) -> Result<(DMatrix<f64>, f64)> {
    let n = a.nrows();
    let mut lam = lambda.max(0.0);
    loop {
        let mut m = a.clone();
        if lam > 0.0 {
            for i in 0..n {
                m[(i, i)] += lam;
            }
        }
        if let Some(ch) = m.cholesky() {
            let x = ch.solve(b);
            if x.iter().all(|v| v.is_finite()) {
                return Ok((x, lam));
            }
        }
        lam = if lam == 0.0 { 1e-12 } else { lam * 10.0 };
        if lam > MAX_RIDGE * (1.0 + 1e-9) {
            return Err(Error::Singular(lam / 10.0));
        }
    }
}

/// Minimize `Σ_k w_k ‖x_k B − y_k‖² + λ‖B‖²` over `B`, where `x_k` and
/// `y_k` are the rows of `design` and `targets`.
///
/// Solved by SVD of the weighted design stacked on `√λ I`, so the condition
/// number is not squared as in the normal equations. Singular values below
/// the usual `max(rows, cols) · ε · σ_max` cutoff are dropped, giving the
/// minimum-norm minimizer for rank-deficient designs.
pub fn weighted_ridge_lstsq(
    design: &DMatrix<f64>,
    weights: &[f64],
    targets: &DMatrix<f64>,
    lambda: f64,
) -> Result<DMatrix<f64>> {
    let (k, m) = design.shape();
    if weights.len() != k || targets.nrows() != k {
        return Err(Error::Dimension {
            expected: k,
            got: weights.len().min(targets.nrows()),
        });
    }
    if weights.iter().any(|w| !(*w >= 0.0)) || !(lambda >= 0.0) {
        return Err(Error::Params(
            "weights and ridge must be non-negative".into(),
        ));
    }
    let live: Vec<usize> = (0..k).filter(|&i| weights[i] > 0.0).collect();
    let ridge_rows = if lambda > 0.0 { m } else { 0 };
    let rows = live.len() + ridge_rows;
    let mut a = DMatrix::zeros(rows, m);
    let mut b = DMatrix::zeros(rows, targets.ncols());
    for (r, &i) in live.iter().enumerate() {
        let s = weights[i].sqrt();
        a.set_row(r, &(design.row(i) * s));
        b.set_row(r, &(targets.row(i) * s));
    }
    for j in 0..ridge_rows {
        a[(live.len() + j, j)] = lambda.sqrt();
    }
    if rows == 0 {
        return Ok(DMatrix::zeros(m, targets.ncols()));
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * rows.max(m) as f64 * f64::EPSILON;
    let x = svd
        .solve(&b, eps)
        .map_err(|e| Error::Params(e.to_string()))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular(lambda))
    }
}

/// Inverse and log-determinant of a symmetric positive definite matrix.
pub fn spd_inverse_logdet(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let ch = m.clone().cholesky().ok_or(Error::Singular(0.0))?;
    let log_det = 2.0 * ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok((ch.inverse(), log_det))
}

/// Column means of an `N × D` matrix.
pub fn column_means(data: &DMatrix<f64>) -> DVector<f64> {
    let n = data.nrows() as f64;
    DVector::from_iterator(data.ncols(), data.column_iter().map(|c| c.sum() / n))
}

/// Population covariance (divide by N) of an `N × D` matrix.
pub fn covariance(data: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let mean = column_means(data);
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / data.nrows() as f64;
    (mean, cov)
}

/// Principal components of an `N × D` matrix: mean, eigenvalues in
/// decreasing order and the matching unit eigenvectors as columns.
pub fn pca(data: &DMatrix<f64>) -> (DVector<f64>, Vec<f64>, DMatrix<f64>) {
    let (mean, cov) = covariance(data);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let mut vectors = DMatrix::zeros(data.ncols(), order.len());
    for (j, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).clone_owned();
        // Fix the sign so the largest-magnitude entry is positive.
        let (imax, _) =
            v.iter().enumerate().fold(
                (0, 0.0),
                |(bi, bv), (k, x)| {
                    if x.abs() > bv {
                        (k, x.abs())
                    } else {
                        (bi, bv)
                    }
                },
            );
        if v[imax] < 0.0 {
            v = -v;
        }
        vectors.set_column(j, &v);
    }
    (mean, values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_well_conditioned_system_exactly() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 1.0, 3.0, -1.0]);
        let (x, lam) = solve_spd(&a, &b, 0.0).unwrap();
        assert_eq!(lam, 0.0);
        assert!((&a * &x - &b).amax() < 1e-12);
    }

    #[test]
    fn ridge_escalates_on_singular_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let (_, lam) = solve_spd(&a, &b, 0.0).unwrap();
        assert!(lam > 0.0 && lam <= MAX_RIDGE);
        let z = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(solve_spd(&z, &b, 0.0), Err(Error::Singular(_))));
    }

    #[test]
    fn lstsq_matches_normal_equations_when_well_posed() {
        let x = DMatrix::from_fn(6, 3, |i, j| {
            ((i + 1) * (j + 2)) as f64 % 5.0 + 0.1 * i as f64
        });
        let y = DMatrix::from_fn(6, 2, |i, j| (i as f64 - j as f64).sin());
        let w = [1.0, 2.0, 0.5, 0.0, 3.0, 1.5];
        let lam = 0.3;
        let got = weighted_ridge_lstsq(&x, &w, &y, lam).unwrap();
        let g = DMatrix::from_diagonal(&DVector::from_row_slice(&w));
        let a = x.transpose() * &g * &x + DMatrix::identity(3, 3) * lam;
        let want = a.lu().solve(&(x.transpose() * &g * &y)).unwrap();
        assert!((got - want).amax() < 1e-12);
    }

    #[test]
    fn lstsq_rank_deficient_is_still_a_minimizer() {
        // duplicate column: the residual equals the full-rank fit on one copy
        let x1 = DMatrix::from_fn(5, 2, |i, j| (i * j) as f64 + 1.0);
        let x = DMatrix::from_fn(5, 3, |i, j| x1[(i, j.min(1))]);
        let y = DMatrix::from_fn(5, 1, |i, _| i as f64 * 0.7 - 1.0);
        let w = [1.0; 5];
        let b = weighted_ridge_lstsq(&x, &w, &y, 0.0).unwrap();
        let b1 = weighted_ridge_lstsq(&x1, &w, &y, 0.0).unwrap();
        let r = (&x * &b - &y).norm();
        let r1 = (&x1 * &b1 - &y).norm();
        assert!((r - r1).abs() < 1e-12);
        assert!(
            (b[(1, 0)] - b[(2, 0)]).abs() < 1e-12,
            "minimum norm splits the duplicate evenly"
        );
    }

    #[test]
    fn inverse_and_logdet() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 8.0]);
        let (inv, ld) = spd_inverse_logdet(&m).unwrap();
        assert!((ld - 16f64.ln()).abs() < 1e-12);
        assert!((inv[(1, 1)] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn pca_orders_components() {
        // x spread 3, y spread 1, z constant
        let rows: Vec<f64> = (0..200)
            .flat_map(|i| {
                let t = i as f64 / 199.0 - 0.5;
                let s = ((i * 7) % 13) as f64 / 12.0 - 0.5;
                [3.0 * t, s, 5.0]
            })
            .collect();
        let d = DMatrix::from_row_slice(200, 3, &rows);
        let (mean, vals, vecs) = pca(&d);
        assert!((mean[2] - 5.0).abs() < 1e-12);
        assert!(vals[0] > vals[1] && vals[1] > vals[2]);
        assert!(vals[2].abs() < 1e-12);
        assert!(vecs[(0, 0)].abs() > 0.99);
    }
}
