//! Dense linear-algebra helpers on top of `nalgebra` and `matrixmultiply`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order and each eigenvector's first non-negligible component
/// made positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedEigen {
    pub values: DVector<f64>,
    /// Eigenvectors as columns, aligned with `values`.
    pub vectors: DMatrix<f64>,
}

pub fn sym_eigen(a: &DMatrix<f64>) -> Result<SortedEigen> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), actual: a.ncols() });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Linalg("non-finite entry in symmetric matrix"));
    }
    // Symmetrize to remove round-off asymmetry before the solver sees it.
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let d = a.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let values = DVector::from_iterator(d, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let tol = 1e-12 * col.amax().max(f64::MIN_POSITIVE);
        if let Some(first) = col.iter().find(|x| x.abs() > tol) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
        vectors.set_column(dst, &col);
    }
    Ok(SortedEigen { values, vectors })
}

/// Symmetric square root of a positive semidefinite matrix (negative
/// round-off eigenvalues are clamped to zero).
pub fn psd_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let e = sym_eigen(a)?;
    let roots = e.values.map(|l| num_traits::Float::sqrt(l.max(0.0)));
    Ok(&e.vectors * DMatrix::from_diagonal(&roots) * e.vectors.transpose())
}

/// Dense inverse via LU; errors on a singular matrix.
pub fn inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone().try_inverse().ok_or(Error::Linalg("singular matrix"))
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Row-major `C ← α·op(A)·op(B) + β·C` where `op(A)` is m×k and `op(B)` is
/// k×n. With `trans_a` the buffer `a` holds the k×m matrix row by row with
/// stride `lda`; likewise for `b`. `β = 0` overwrites `C` (NaNs included).
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    trans_a: bool,
    trans_b: bool,
    m: usize,
    n: usize,
    k: usize,
    alpha: f64,
    a: &[f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
    beta: f64,
    c: &mut [f64],
    ldc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    let (a_rows, a_cols) = if trans_a { (k, m) } else { (m, k) };
    let (b_rows, b_cols) = if trans_b { (n, k) } else { (k, n) };
    let need = |rows: usize, cols: usize, ld: usize| if rows == 0 || cols == 0 { 0 } else { (rows - 1) * ld + cols };
    assert!(lda >= a_cols && a.len() >= need(a_rows, a_cols, lda), "gemm: A buffer too small");
    assert!(ldb >= b_cols && b.len() >= need(b_rows, b_cols, ldb), "gemm: B buffer too small");
    assert!(ldc >= n && c.len() >= need(m, n, ldc), "gemm: C buffer too small");
    if k == 0 {
        for i in 0..m {
            for v in &mut c[i * ldc..i * ldc + n] {
                *v = if beta == 0.0 { 0.0 } else { *v * beta };
            }
        }
        return;
    }
    let (rsa, csa) = if trans_a { (1, lda as isize) } else { (lda as isize, 1) };
    let (rsb, csb) = if trans_b { (1, ldb as isize) } else { (ldb as isize, 1) };
    // SAFETY: the asserts above bound every index touched by an m×k, k×n and
    // m×n strided access inside the three slices; `c` is uniquely borrowed.
    #[allow(unsafe_code)]
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            ldc as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn eigen_sorted_with_sign_convention() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 5.0]);
        let e = sym_eigen(&a).unwrap();
        assert!((e.values[0] - 5.0).abs() < 1e-12);
        assert!((e.values[1] - 3.0).abs() < 1e-12);
        assert!((e.values[2] - 1.0).abs() < 1e-12);
        for j in 0..3 {
            let first = e.vectors.column(j).iter().copied().find(|x| x.abs() > 1e-9).unwrap();
            assert!(first > 0.0);
        }
        let recon = &e.vectors * DMatrix::from_diagonal(&e.values) * e.vectors.transpose();
        assert!(max_abs_diff(&recon, &a) < 1e-12);
    }

    #[test]
    fn gemm_matches_naive_for_all_transposes() {
        let (m, n, k) = (3, 4, 5);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.11).cos()).collect();
        for &(ta, tb) in &[(false, false), (true, false), (false, true), (true, true)] {
            let at = |i: usize, p: usize| if ta { a[p * m + i] } else { a[i * k + p] };
            let bt = |p: usize, j: usize| if tb { b[j * k + p] } else { b[p * n + j] };
            let mut c = vec![1.0; m * n];
            gemm(ta, tb, m, n, k, 2.0, &a, if ta { m } else { k }, &b, if tb { k } else { n }, 0.5, &mut c, n);
            for i in 0..m {
                for j in 0..n {
                    let s: f64 = (0..k).map(|p| at(i, p) * bt(p, j)).sum();
                    assert!((c[i * n + j] - (2.0 * s + 0.5)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = psd_sqrt(&a).unwrap();
        assert!(max_abs_diff(&(&r * &r), &a) < 1e-12);
    }
}
