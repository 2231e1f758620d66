//! Cramér-Rao bound for DOA estimation with noise-only samples, and its
//! approximate hybrid extension that adds prior information on the
//! directions treated as random.

use nalgebra::DMatrix;

use crate::array_model::{steering_matrix, ArrayGeometry};
use crate::error::{Error, Result};
use crate::linalg::{
    c64, column_projector, hermitian_eigen_desc, hermitian_part, kron, vec_of, CMat, CVec,
};
use crate::scenario::{PriorSpec, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundConfig {
    /// `true` puts `κ_i` on the diagonal of the prior information.
    pub treat_random: Vec<bool>,
    /// Diagonal of the prior information matrix.
    pub lambdas: Vec<f64>,
    /// Data snapshots `N`.
    pub n: usize,
    /// `N / M`.
    pub alpha: f64,
}

impl BoundConfig {
    pub fn new(priors: &[PriorSpec], treat_random: &[bool], n: usize, alpha: f64) -> Result<Self> {
        if priors.len() != treat_random.len() {
            return Err(Error::InvalidInput("one treat_random flag per source is required".into()));
        }
        if let Some(i) = priors
            .iter()
            .zip(treat_random)
            .position(|(p, &r)| r && !p.is_informative())
        {
            return Err(Error::InvalidInput(format!(
                "source {} is flagged random but its prior has kappa = 0",
                i + 1
            )));
        }
        let lambdas = priors
            .iter()
            .zip(treat_random)
            .map(|(p, &r)| if r { p.kappa } else { 0.0 })
            .collect();
        Self::checked(treat_random.to_vec(), lambdas, n, alpha)
    }

    /// All directions deterministic: the plain CRB.
    pub fn deterministic(d: usize, n: usize, alpha: f64) -> Result<Self> {
        Self::checked(vec![false; d], vec![0.0; d], n, alpha)
    }

    fn checked(treat_random: Vec<bool>, lambdas: Vec<f64>, n: usize, alpha: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("bound needs N >= 1".into()));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidInput(format!("alpha must be >= 0, got {alpha}")));
        }
        Ok(Self {
            treat_random,
            lambdas,
            n,
            alpha,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    /// Bound on the direction error covariance, rad².
    pub c_theta: DMatrix<f64>,
    /// Square roots of the diagonal, degrees.
    pub rms_deg: Vec<f64>,
}

/// Hermitian `Z` with `Z Z = Q⁻¹`.
pub fn hermitian_sqrt_inv(q: &CMat) -> Result<CMat> {
    let (vals, vecs) = hermitian_eigen_desc(q);
    let max = vals.first().copied().unwrap_or(0.0);
    let min = vals.last().copied().unwrap_or(0.0);
    if !(max > 0.0 && min > 1e-14 * max) {
        return Err(Error::NotPositiveDefinite("Q in Hermitian square root"));
    }
    let diag = CVec::from_iterator(vals.len(), vals.iter().map(|v| c64(1.0 / v.sqrt(), 0.0)));
    Ok(hermitian_part(&(&vecs * CMat::from_diagonal(&diag) * vecs.adjoint())))
}

/// `[vec(∂A/∂θ_1) ⋯ vec(∂A/∂θ_d)]`, size `m d × d`.
pub fn derivative_stack(thetas: &[f64], geom: &ArrayGeometry) -> Result<CMat> {
    let set = steering_matrix(thetas, geom)?;
    Ok(stack_columns(&set.d_cols))
}

fn stack_columns(d_cols: &CMat) -> CMat {
    let (m, d) = d_cols.shape();
    let mut out = CMat::zeros(m * d, d);
    for i in 0..d {
        let mut partial = CMat::zeros(m, d);
        partial.set_column(i, &d_cols.column(i));
        out.set_column(i, &vec_of(&partial));
    }
    out
}

/// `P (ZA)* E (E* ZRZ E + αI)⁻¹ E* (ZA) P` for an orthonormal basis `E` of the
/// signal subspace of `ZRZ`. With `E` its leading eigenvectors the compressed
/// matrix `E* ZRZ E` is the diagonal of leading eigenvalues.
pub fn signal_subspace_gamma(p: &CMat, za: &CMat, zrz: &CMat, basis: &CMat, alpha: f64) -> Result<CMat> {
    let d = basis.ncols();
    let compressed = hermitian_part(&(basis.adjoint() * zrz * basis));
    let inner = compressed + CMat::identity(d, d).scale(alpha);
    let inv = inner
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite("signal-subspace eigenvalues"))?;
    let left = p * za.adjoint() * basis;
    Ok(hermitian_part(&(&left * inv * left.adjoint())))
}

/// `C_θ = (2N Re{D* (Γᵀ ⊗ Z Π⊥_{ZA} Z) D} + Λ_θ)⁻¹`.
pub fn acrb(
    thetas_at_mean: &[f64],
    p: &CMat,
    q: &CMat,
    cfg: &BoundConfig,
    geom: &ArrayGeometry,
) -> Result<BoundResult> {
    let d = thetas_at_mean.len();
    let m = geom.m;
    if d == 0 || d >= m {
        return Err(Error::InvalidInput(format!("bound needs 1 <= d <= m-1, got d={d}, m={m}")));
    }
    if p.shape() != (d, d) || q.shape() != (m, m) {
        return Err(Error::InvalidInput("P or Q has the wrong shape".into()));
    }
    if cfg.lambdas.len() != d {
        return Err(Error::InvalidInput("bound config has the wrong number of sources".into()));
    }
    let set = steering_matrix(thetas_at_mean, geom)?;
    let a = &set.a;
    let z = hermitian_sqrt_inv(q)?;
    let za = &z * a;
    let pi_perp = CMat::identity(m, m) - column_projector(&za)?;
    let weight = hermitian_part(&(&z * &pi_perp * &z));

    let r = hermitian_part(&(a * p * a.adjoint() + q));
    let zrz = hermitian_part(&(&z * r * &z));
    let (_, vecs) = hermitian_eigen_desc(&zrz);
    let e_s = vecs.columns(0, d).clone_owned();
    let gamma = signal_subspace_gamma(p, &za, &zrz, &e_s, cfg.alpha)?;

    let dstack = stack_columns(&set.d_cols);
    let middle = kron(&gamma.transpose(), &weight);
    let info_c = dstack.adjoint() * middle * &dstack;
    let mut info = DMatrix::from_fn(d, d, |i, j| 2.0 * cfg.n as f64 * info_c[(i, j)].re);
    for (i, &lambda) in cfg.lambdas.iter().enumerate() {
        info[(i, i)] += lambda;
    }
    let info = (&info + info.transpose()) * 0.5;
    let chol = info
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("bound information matrix"))?;
    let c = chol.inverse();
    let c_theta = (&c + c.transpose()) * 0.5;
    let rms_deg = (0..d).map(|i| c_theta[(i, i)].sqrt().to_degrees()).collect();
    Ok(BoundResult { c_theta, rms_deg })
}

/// CRB and ACRB for a scenario, evaluated at its nominal directions.
/// `treat_random = None` treats every source with an informative prior as random.
pub fn scenario_bounds(scn: &Scenario, treat_random: Option<&[bool]>) -> Result<(BoundResult, BoundResult)> {
    let d = scn.d();
    let flags: Vec<bool> = match treat_random {
        Some(f) => f.to_vec(),
        None => scn.priors().iter().map(PriorSpec::is_informative).collect(),
    };
    let thetas = scn.nominal_thetas();
    let crb_cfg = BoundConfig::deterministic(d, scn.n(), scn.alpha())?;
    let acrb_cfg = BoundConfig::new(scn.priors(), &flags, scn.n(), scn.alpha())?;
    let crb = acrb(&thetas, scn.p(), scn.q(), &crb_cfg, scn.geom())?;
    let hybrid = acrb(&thetas, scn.p(), scn.q(), &acrb_cfg, scn.geom())?;
    Ok((crb, hybrid))
}
