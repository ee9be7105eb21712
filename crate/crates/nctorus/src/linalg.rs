//! Thin dense linear algebra layer on top of LAPACK's `zheevd` (Hermitian
//! eigendecomposition), plus the small real least-squares solve used by the
//! heat-trace fit and a complex linear solve for numeric parametrix checks.
//!
//! Matrices are stored column-major (LAPACK layout) as `Vec<Complex64>`.

use crate::error::{NcError, Result};
use num_complex::Complex64;

extern "C" {
    fn zheevd_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut Complex64,
        lda: *const i32,
        w: *mut f64,
        work: *mut Complex64,
        lwork: *const i32,
        rwork: *mut f64,
        lrwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );

    fn zgemm_(
        transa: *const u8,
        transb: *const u8,
        m: *const i32,
        n: *const i32,
        k: *const i32,
        alpha: *const Complex64,
        a: *const Complex64,
        lda: *const i32,
        b: *const Complex64,
        ldb: *const i32,
        beta: *const Complex64,
        c: *mut Complex64,
        ldc: *const i32,
    );

    fn zgesv_(
        n: *const i32,
        nrhs: *const i32,
        a: *mut Complex64,
        lda: *const i32,
        ipiv: *mut i32,
        b: *mut Complex64,
        ldb: *const i32,
        info: *mut i32,
    );
}

/// Eigendecomposition of a Hermitian matrix (column-major, n×n).
/// Returns ascending eigenvalues and the eigenvector matrix (columns are
/// eigenvectors, column-major).
pub fn eigh(a: &[Complex64], n: usize) -> Result<(Vec<f64>, Vec<Complex64>)> {
    assert_eq!(a.len(), n * n);
    let mut vecs = a.to_vec();
    let mut w = vec![0.0f64; n];
    let nn = n as i32;
    let jobz = b'V';
    let uplo = b'L';
    let mut info: i32 = 0;

    // Workspace query.
    let mut wkopt = Complex64::default();
    let mut rwkopt = 0.0f64;
    let mut iwkopt: i32 = 0;
    let m1: i32 = -1;
    unsafe {
        zheevd_(
            &jobz, &uplo, &nn, vecs.as_mut_ptr(), &nn, w.as_mut_ptr(), &mut wkopt, &m1,
            &mut rwkopt, &m1, &mut iwkopt, &m1, &mut info,
        );
    }
    if info != 0 {
        return Err(NcError::Eigensolver(info));
    }
    let lwork = wkopt.re as i32;
    let lrwork = rwkopt as i32;
    let liwork = iwkopt;
    let mut work = vec![Complex64::default(); lwork.max(1) as usize];
    let mut rwork = vec![0.0f64; lrwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];
    unsafe {
        zheevd_(
            &jobz, &uplo, &nn, vecs.as_mut_ptr(), &nn, w.as_mut_ptr(), work.as_mut_ptr(), &lwork,
            rwork.as_mut_ptr(), &lrwork, iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(NcError::Eigensolver(info));
    }
    Ok((w, vecs))
}

/// Dense product C = A·B for column-major square matrices of size n.
pub fn matmul(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n * n);
    let mut c = vec![Complex64::default(); n * n];
    let nn = n as i32;
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::default();
    let no = b'N';
    unsafe {
        zgemm_(
            &no, &no, &nn, &nn, &nn, &one, a.as_ptr(), &nn, b.as_ptr(), &nn, &zero,
            c.as_mut_ptr(), &nn,
        );
    }
    c
}

/// Solve A·x = b for dense complex A (column-major, n×n), overwriting nothing.
pub fn solve(a: &[Complex64], b: &[Complex64], n: usize) -> Result<Vec<Complex64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len() % n, 0);
    let nrhs = (b.len() / n) as i32;
    let mut lu = a.to_vec();
    let mut x = b.to_vec();
    let nn = n as i32;
    let mut ipiv = vec![0i32; n];
    let mut info: i32 = 0;
    unsafe {
        zgesv_(&nn, &nrhs, lu.as_mut_ptr(), &nn, ipiv.as_mut_ptr(), x.as_mut_ptr(), &nn, &mut info);
    }
    if info != 0 {
        return Err(NcError::Eigensolver(info));
    }
    Ok(x)
}

/// Least squares via normal equations for a small, well-conditioned real
/// design matrix (rows × cols, cols ≤ 8).  Returns (coefficients,
/// per-coefficient standard errors).
pub fn lstsq(design: &[Vec<f64>], rhs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows = design.len();
    let cols = design[0].len();
    if rows < cols {
        return Err(NcError::IllConditionedFit(format!(
            "{} samples for {} parameters",
            rows, cols
        )));
    }
    // Normal equations AtA x = At b, solved by Gaussian elimination with
    // partial pivoting; fine at this size.
    let mut ata = vec![vec![0.0f64; cols]; cols];
    let mut atb = vec![0.0f64; cols];
    for r in 0..rows {
        for i in 0..cols {
            atb[i] += design[r][i] * rhs[r];
            for j in 0..cols {
                ata[i][j] += design[r][i] * design[r][j];
            }
        }
    }
    let inv = invert(&ata).ok_or_else(|| {
        NcError::IllConditionedFit("singular normal equations".into())
    })?;
    let mut x = vec![0.0f64; cols];
    for i in 0..cols {
        for j in 0..cols {
            x[i] += inv[i][j] * atb[j];
        }
    }
    // Residual variance and standard errors from the covariance (AtA)^{-1}σ².
    let mut rss = 0.0;
    for r in 0..rows {
        let pred: f64 = (0..cols).map(|i| design[r][i] * x[i]).sum();
        rss += (rhs[r] - pred).powi(2);
    }
    let dof = (rows - cols).max(1) as f64;
    let sigma2 = rss / dof;
    let stderr = (0..cols).map(|i| (inv[i][i] * sigma2).max(0.0).sqrt()).collect();
    Ok((x, stderr))
}

fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut inv = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        inv[i][i] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        inv.swap(col, piv);
        let d = m[col][col];
        for j in 0..n {
            m[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = m[i][col];
                for j in 0..n {
                    m[i][j] -= f * m[col][j];
                    inv[i][j] -= f * inv[col][j];
                }
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_pauli_x() {
        let c = |r: f64, i: f64| Complex64::new(r, i);
        // Pauli X has eigenvalues ±1.
        let a = vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)];
        let (w, v) = eigh(&a, 2).unwrap();
        assert!((w[0] + 1.0).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
        // Eigenvector columns are normalized.
        let n0 = v[0].norm_sqr() + v[1].norm_sqr();
        assert!((n0 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn solve_roundtrip() {
        let c = |r: f64, i: f64| Complex64::new(r, i);
        let a = vec![c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(3.0, 0.0)];
        let b = vec![c(1.0, 1.0), c(0.0, 2.0)];
        let x = solve(&a, &b, 2).unwrap();
        // Check A·x = b (column-major).
        let r0 = a[0] * x[0] + a[2] * x[1] - b[0];
        let r1 = a[1] * x[0] + a[3] * x[1] - b[1];
        assert!(r0.norm() < 1e-13 && r1.norm() < 1e-13);
    }

    #[test]
    fn lstsq_exact_fixture() {
        // y = 3/t + 5 + 2t sampled exactly must be recovered with ~0 stderr.
        let ts: Vec<f64> = (1..=10).map(|k| 0.1 * k as f64).collect();
        let design: Vec<Vec<f64>> = ts.iter().map(|&t| vec![1.0 / t, 1.0, t]).collect();
        let rhs: Vec<f64> = ts.iter().map(|&t| 3.0 / t + 5.0 + 2.0 * t).collect();
        let (x, se) = lstsq(&design, &rhs).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-10 && (x[1] - 5.0).abs() < 1e-10 && (x[2] - 2.0).abs() < 1e-10);
        assert!(se.iter().all(|&s| s < 1e-8));
    }
}
