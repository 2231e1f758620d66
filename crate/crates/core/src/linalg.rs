//! Small dense complex linear-algebra helpers shared by the estimator and the
//! bounds. All matrices here are at most a few tens of rows, so everything is
//! plain `DMatrix<Complex64>`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

pub use nalgebra::Complex;
pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Relative eigenvalue floor below which a Gram matrix is treated as singular.
pub(crate) const RANK_TOL: f64 = 1e-13;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `(X + X*) / 2`.
pub fn hermitian_part(x: &CMat) -> CMat {
    (x + x.adjoint()).scale(0.5)
}

/// Largest elementwise modulus.
pub fn max_abs(x: &CMat) -> f64 {
    x.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `X X* / n`.
pub fn sample_covariance(x: &CMat) -> CMat {
    let n = x.ncols();
    let mut out = x * x.adjoint();
    if n > 0 {
        out.unscale_mut(n as f64);
    }
    hermitian_part(&out)
}

/// Cholesky factor of the Hermitian part of `x`.
///
/// nalgebra's complex factorization takes complex square roots of negative
/// pivots instead of failing, so the pivots are checked here.
pub fn cholesky(x: &CMat, what: &'static str) -> Result<Cholesky<C64, Dyn>> {
    let chol = Cholesky::new(hermitian_part(x)).ok_or(Error::NotPositiveDefinite(what))?;
    let pivots_ok = chol
        .l_dirty()
        .diagonal()
        .iter()
        .all(|p| p.re > 0.0 && p.re.is_finite() && p.im.abs() <= 1e-8 * p.re);
    if pivots_ok {
        Ok(chol)
    } else {
        Err(Error::NotPositiveDefinite(what))
    }
}

/// `ln |X|` for Hermitian positive definite `X`.
pub fn logdet_hpd(x: &CMat) -> Result<f64> {
    let chol = cholesky(x, "log-determinant argument")?;
    Ok(chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.re.ln()).sum())
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order (ties keep ascending original index).
pub fn hermitian_eigen_desc(x: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(x));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Euclidean orthogonal projector onto the column space of `w`.
///
/// Fails with `RankDeficientSteering` when the Gram matrix `w* w` is singular
/// to working precision. An empty `w` gives the zero matrix.
pub fn column_projector(w: &CMat) -> Result<CMat> {
    let m = w.nrows();
    if w.ncols() == 0 {
        return Ok(CMat::zeros(m, m));
    }
    let gram = hermitian_part(&(w.adjoint() * w));
    check_gram(&gram)?;
    let chol = Cholesky::new(gram).ok_or(Error::RankDeficientSteering)?;
    // P = W (W*W)^{-1} W*
    let inner = chol.solve(&w.adjoint());
    Ok(hermitian_part(&(w * inner)))
}

/// Rejects Gram matrices whose eigenvalue spread exceeds the rank tolerance.
pub(crate) fn check_gram(gram: &CMat) -> Result<()> {
    let eig = SymmetricEigen::new(gram.clone());
    let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if !(max > 0.0) || !min.is_finite() || min <= RANK_TOL * max {
        return Err(Error::RankDeficientSteering);
    }
    Ok(())
}

/// Stacks the columns of `x` into one vector.
pub fn vec_of(x: &CMat) -> CVec {
    CVec::from_iterator(x.len(), x.iter().cloned())
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMat::from_fn(ar * br, ac * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}
