//! MAP estimation of directions of arrival, source waveforms and the noise
//! covariance from noise-only plus signal-bearing snapshots.
//!
//! With the noise covariance and the waveforms concentrated out, the
//! direction estimate minimizes
//!
//! ```text
//! ln |I + α Q0⁻¹ Φ⊥(θ) R0| − Σ κ_i cos(θ_i − μ_i) / γ
//! ```
//!
//! where `Φ⊥` is the complement of the `Q0⁻¹`-weighted projector onto the
//! steering matrix. The minimization is carried out one angle at a time
//! (alternating projections) over successively refined grids.
//!
//! Internally everything is expressed in whitened coordinates: with
//! `Q0 = L L*`, `R̃ = L⁻¹ R0 L⁻*` and `P⊥` the Euclidean projector onto the
//! complement of `L⁻¹A`, the determinant equals `|I + α P⊥ R̃ P⊥|`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Cholesky, Dyn};
use serde::{Deserialize, Serialize};

use crate::array_model::{check_distinct, steering_columns, steering_vector_unchecked, ArrayGeometry};
use crate::error::{Error, Result};
use crate::linalg::{
    c64, check_gram, cholesky, column_projector, hermitian_eigen_desc, hermitian_part, logdet_hpd,
    sample_covariance, C64, CMat,
};
use crate::scenario::PriorSpec;

/// `Q0` is rejected when its eigenvalue ratio falls below this.
const Q0_CONDITION_FLOOR: f64 = 1e-12;
/// `ln` arguments at or below this are treated as a collision with `C(A_i)`.
const LN_ARG_FLOOR: f64 = 1e-30;
/// Whitened steering energy left after projection, relative to the total,
/// below which a grid point is treated as lying in `C(A_i)`.
const REL_RESIDUAL_FLOOR: f64 = 1e-10;

/// Sufficient statistics of the two sample sets.
#[derive(Debug, Clone)]
pub struct SampleStats {
    /// `Ȳ Ȳ* / M`.
    pub q0: CMat,
    /// `Y Y* / N`.
    pub r0: CMat,
    /// `N / M`.
    pub alpha: f64,
    /// `M + N + m + 1`.
    pub gamma: f64,
    pub m_noise: usize,
    pub n: usize,
    chol: Cholesky<C64, Dyn>,
    /// `L⁻¹` from the Cholesky factor of `Q0`.
    whitener: CMat,
    /// `L⁻¹ R0 L⁻*`.
    r0_white: CMat,
}

impl SampleStats {
    pub fn m(&self) -> usize {
        self.q0.nrows()
    }

    /// `L⁻¹ X` with `Q0 = L L*`.
    pub fn whiten(&self, x: &CMat) -> CMat {
        self.chol
            .l_dirty()
            .solve_lower_triangular(x)
            .expect("Cholesky factor has a nonzero diagonal")
    }

    /// `Q0⁻¹ X` through the cached factorization.
    pub fn q0_solve(&self, x: &CMat) -> CMat {
        self.chol.solve(x)
    }

    /// Lower Cholesky factor of `Q0`.
    pub fn q0_factor(&self) -> CMat {
        self.chol.l()
    }

    /// Whitened data covariance `L⁻¹ R0 L⁻*`.
    pub fn r0_white(&self) -> &CMat {
        &self.r0_white
    }
}

/// Forms `Q0`, `R0` and the factorization of `Q0`.
pub fn sample_stats(y_bar: &CMat, y: &CMat) -> Result<SampleStats> {
    let m = y_bar.nrows();
    if m == 0 {
        return Err(Error::InvalidInput("snapshots have no sensors".into()));
    }
    if y.nrows() != m {
        return Err(Error::InvalidInput(format!(
            "noise-only samples have {m} rows but data has {}",
            y.nrows()
        )));
    }
    let m_noise = y_bar.ncols();
    if m_noise < m {
        return Err(Error::SingularNoiseCovariance { ratio: 0.0 });
    }
    if y_bar.iter().chain(y.iter()).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::InvalidInput("snapshots contain non-finite values".into()));
    }
    let n = y.ncols();
    let q0 = sample_covariance(y_bar);
    let r0 = if n == 0 { CMat::zeros(m, m) } else { sample_covariance(y) };

    let (vals, _) = hermitian_eigen_desc(&q0);
    let (max, min) = (vals[0], vals[m - 1]);
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if !(ratio > Q0_CONDITION_FLOOR) {
        return Err(Error::SingularNoiseCovariance { ratio });
    }
    let chol = cholesky(&q0, "noise-only sample covariance")
        .map_err(|_| Error::SingularNoiseCovariance { ratio })?;
    let whitener = chol
        .l_dirty()
        .solve_lower_triangular(&CMat::identity(m, m))
        .ok_or(Error::SingularNoiseCovariance { ratio })?;
    let r0_white = hermitian_part(&(&whitener * &r0 * whitener.adjoint()));
    Ok(SampleStats {
        q0,
        r0,
        alpha: n as f64 / m_noise as f64,
        gamma: (m_noise + n + m + 1) as f64,
        m_noise,
        n,
        chol,
        whitener,
        r0_white,
    })
}

/// Projector onto `C(A)` that is orthogonal in the `Q0⁻¹` inner product,
/// `Φ_A = A (A* Q0⁻¹ A)⁻¹ A* Q0⁻¹`. An `m × 0` matrix gives zero.
pub fn oblique_projector(a: &CMat, q0: &CMat) -> Result<CMat> {
    let m = q0.nrows();
    if a.nrows() != m {
        return Err(Error::InvalidInput("steering matrix and Q0 disagree on m".into()));
    }
    if a.ncols() == 0 {
        return Ok(CMat::zeros(m, m));
    }
    let chol = cholesky(q0, "Q0")?;
    let q0_inv_a = chol.solve(a);
    let gram = hermitian_part(&(a.adjoint() * &q0_inv_a));
    check_gram(&gram)?;
    let gram_chol = Cholesky::new(gram).ok_or(Error::RankDeficientSteering)?;
    Ok(a * gram_chol.solve(&q0_inv_a.adjoint()))
}

/// Prior penalty `−Σ κ_i cos(θ_i − μ_i) / γ`.
pub fn prior_penalty(thetas: &[f64], priors: &[PriorSpec], gamma: f64) -> f64 {
    thetas
        .iter()
        .zip(priors)
        .map(|(&t, p)| -p.kappa * (t - p.mu).cos() / gamma)
        .sum()
}

/// Complement projector `P⊥` onto `C(L⁻¹ A)^⊥` in whitened coordinates.
fn whitened_complement(a: &CMat, stats: &SampleStats) -> Result<CMat> {
    let m = stats.m();
    let p = column_projector(&stats.whiten(a))?;
    Ok(CMat::identity(m, m) - p)
}

/// `ln |I + α Q0⁻¹ Φ⊥_A R0|` for an arbitrary (possibly empty) steering matrix.
fn projected_logdet(a: &CMat, stats: &SampleStats) -> Result<f64> {
    let m = stats.m();
    let p_perp = whitened_complement(a, stats)?;
    let c = hermitian_part(&(&p_perp * &stats.r0_white * &p_perp));
    logdet_hpd(&(CMat::identity(m, m) + c.scale(stats.alpha)))
        .map_err(|_| Error::NumericalBlowup("I + α G R0 is singular"))
}

/// The concentrated MAP cost minimized over the directions.
pub fn concentrated_cost(
    thetas: &[f64],
    geom: &ArrayGeometry,
    stats: &SampleStats,
    priors: &[PriorSpec],
) -> Result<f64> {
    if priors.len() != thetas.len() {
        return Err(Error::InvalidInput("one prior per angle is required".into()));
    }
    if geom.m != stats.m() {
        return Err(Error::InvalidInput("geometry and statistics disagree on m".into()));
    }
    check_distinct(thetas)?;
    let a = steering_columns(thetas, geom);
    Ok(projected_logdet(&a, stats)? + prior_penalty(thetas, priors, stats.gamma))
}

/// Everything the one-dimensional search over angle `i` needs when the
/// remaining columns `A_i` are held fixed.
///
/// The search evaluates the ln argument as `u* (I + αC)⁻¹ u / u* u` with
/// `u = P⊥ L⁻¹ a(θ)`, which equals `1 − α a*Ψ_i a / a*G_i a` but is a ratio
/// of sums of nonnegative terms and keeps full relative precision when the
/// argument is tiny (high SNR near the true direction).
#[derive(Debug, Clone)]
pub struct AngleWorkspace {
    g: CMat,
    psi: CMat,
    /// `ln |I + α G_i R0|`.
    pub logdet_base: f64,
    pub alpha: f64,
    geom: ArrayGeometry,
    /// `V* P⊥ L⁻¹` with `V` the eigenvectors of `C = P⊥ R̃ P⊥`.
    rotated: CMat,
    /// `1 / (1 + α c_k)`.
    weights: Vec<f64>,
    /// `L⁻¹`.
    whitener: CMat,
}

impl AngleWorkspace {
    pub fn geom(&self) -> &ArrayGeometry {
        &self.geom
    }

    /// `G_i = Q0⁻¹ Φ⊥_{A_i}`.
    pub fn g(&self) -> &CMat {
        &self.g
    }

    /// `Ψ_i = G_i R0 (I + α G_i R0)⁻¹ G_i`.
    pub fn psi(&self) -> &CMat {
        &self.psi
    }
}

/// Builds `G_i`, `Ψ_i` and `ln |I + α G_i R0|` for fixed columns `a_i`.
pub fn per_angle_quantities(
    a_i: &CMat,
    geom: &ArrayGeometry,
    stats: &SampleStats,
) -> Result<AngleWorkspace> {
    let m = stats.m();
    if a_i.nrows() != m || geom.m != m {
        return Err(Error::InvalidInput("steering columns and statistics disagree on m".into()));
    }
    let alpha = stats.alpha;
    let p_perp_w = whitened_complement(a_i, stats)?;
    let c = hermitian_part(&(&p_perp_w * &stats.r0_white * &p_perp_w));
    let (vals, vecs) = hermitian_eigen_desc(&c);
    let mut logdet_base = 0.0;
    let mut shrink = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for &v in &vals {
        let v = v.max(0.0);
        let one_plus = 1.0 + alpha * v;
        if !(one_plus.is_finite() && one_plus > 0.0) {
            return Err(Error::NumericalBlowup("I + α G R0 is singular"));
        }
        logdet_base += one_plus.ln();
        shrink.push(c64(v / one_plus, 0.0));
        weights.push(1.0 / one_plus);
    }
    let psi_w = &vecs * CMat::from_diagonal(&nalgebra::DVector::from_vec(shrink)) * vecs.adjoint();
    let b = &stats.whitener;
    let g = hermitian_part(&(b.adjoint() * &p_perp_w * b));
    let psi = hermitian_part(&(b.adjoint() * psi_w * b));
    let rotated = vecs.adjoint() * &p_perp_w * b;
    Ok(AngleWorkspace {
        g,
        psi,
        logdet_base,
        alpha,
        geom: *geom,
        rotated,
        weights,
        whitener: b.clone(),
    })
}

/// ln argument from the rotated projection `z = V* P⊥ L⁻¹ a` and the
/// whitened steering energy `total = |L⁻¹ a|²`.
fn ln_term(z: &[C64], weights: &[f64], total: f64, m: usize) -> f64 {
    let mut g_form = 0.0;
    let mut num = 0.0;
    for (zk, wk) in z.iter().zip(weights) {
        let e = zk.norm_sqr();
        g_form += e;
        num += wk * e;
    }
    if g_form <= LN_ARG_FLOOR * m as f64 || g_form <= REL_RESIDUAL_FLOOR * total {
        return f64::INFINITY;
    }
    let arg = num / g_form;
    if !(arg > LN_ARG_FLOOR) {
        return f64::INFINITY;
    }
    arg.ln()
}

/// `V(θ) = ln(1 − α a*Ψ_i a / a*G_i a) + φ_i(θ)`; `+∞` where `a(θ)` falls
/// into `C(A_i)`.
pub fn per_angle_cost(theta: f64, ws: &AngleWorkspace, prior: &PriorSpec, gamma: f64) -> f64 {
    let a = steering_vector_unchecked(theta, &ws.geom);
    let z = &ws.rotated * &a;
    let total = (&ws.whitener * &a).norm_squared();
    ln_term(z.as_slice(), &ws.weights, total, ws.geom.m) - prior.kappa * (theta - prior.mu).cos() / gamma
}

/// Evaluates the per-angle cost over many grid points without allocating.
struct GridScorer {
    geom: ArrayGeometry,
    a: Vec<C64>,
    z: Vec<C64>,
}

impl GridScorer {
    fn new(geom: ArrayGeometry) -> Self {
        Self {
            geom,
            a: vec![C64::default(); geom.m],
            z: vec![C64::default(); geom.m],
        }
    }

    fn score(&mut self, theta: f64, ws: &AngleWorkspace, prior: &PriorSpec, gamma: f64) -> f64 {
        let m = self.geom.m;
        let step = -2.0 * PI * self.geom.spacing * theta.sin();
        for k in 0..m {
            let phase = step * k as f64;
            self.a[k] = c64(phase.cos(), phase.sin());
        }
        let mut total = 0.0;
        for r in 0..m {
            let mut z = C64::default();
            let mut b = C64::default();
            for c in 0..m {
                z += ws.rotated[(r, c)] * self.a[c];
                b += ws.whitener[(r, c)] * self.a[c];
            }
            self.z[r] = z;
            total += b.norm_sqr();
        }
        ln_term(&self.z, &ws.weights, total, m) - prior.kappa * (theta - prior.mu).cos() / gamma
    }
}

/// Equispaced search grid holding `anchor` exactly at index `anchor_index`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    anchor: f64,
    anchor_index: usize,
    step: f64,
    len: usize,
}

impl Grid {
    /// Level-one grid: `g` points `-π/2 + k π / g`.
    pub fn initial(g: usize) -> Self {
        Self {
            anchor: -FRAC_PI_2,
            anchor_index: 0,
            step: PI / g as f64,
            len: g,
        }
    }

    /// `g` points at spacing `step` around `center` (which stays a grid
    /// point), shifted as needed to stay inside `[-π/2, π/2]`.
    pub fn refined(center: f64, step: f64, g: usize) -> Self {
        let slack = 1e-9;
        let below = ((center + FRAC_PI_2) / step + slack).floor().max(0.0) as usize;
        let above = ((FRAC_PI_2 - center) / step + slack).floor().max(0.0) as usize;
        let want = g / 2;
        let lo = (g - 1).saturating_sub(above);
        let anchor_index = want.max(lo).min(below).min(g - 1);
        Self {
            anchor: center,
            anchor_index,
            step,
            len: g,
        }
    }

    pub fn point(&self, k: usize) -> f64 {
        self.anchor + (k as f64 - self.anchor_index as f64) * self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|k| self.point(k))
    }
}

/// `true` when `theta` lies within one grid spacing of any of `others`.
fn collides(theta: f64, others: &[f64], step: f64) -> bool {
    others.iter().any(|&o| (theta - o).abs() < step * (1.0 + 1e-9))
}

/// Result of one grid search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMin {
    pub index: usize,
    pub theta: f64,
    pub cost: f64,
}

/// Lowest-index argmin of the per-angle cost over `grid`, skipping points
/// that collide with the other current estimates.
pub fn grid_search(
    grid: &Grid,
    ws: &AngleWorkspace,
    prior: &PriorSpec,
    others: &[f64],
    stats: &SampleStats,
) -> Option<GridMin> {
    let mut scorer = GridScorer::new(ws.geom);
    let mut best: Option<GridMin> = None;
    for k in 0..grid.len() {
        let theta = grid.point(k);
        if collides(theta, others, grid.step()) {
            continue;
        }
        let cost = scorer.score(theta, ws, prior, stats.gamma);
        if !cost.is_finite() {
            continue;
        }
        if best.is_none_or(|b| cost < b.cost) {
            best = Some(GridMin { index: k, theta, cost });
        }
    }
    best
}

fn default_g() -> usize {
    500
}

fn default_levels() -> usize {
    10
}

fn default_max_sweeps() -> usize {
    50
}

/// Search settings. The direction domain is fixed at `[-90°, 90°]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    /// Grid points per search.
    #[serde(default = "default_g")]
    pub g: usize,
    /// Refinement levels.
    #[serde(rename = "L", default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps_per_level: usize,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            g: default_g(),
            levels: default_levels(),
            max_sweeps_per_level: default_max_sweeps(),
        }
    }
}

impl MapConfig {
    pub const THETA_DOMAIN_DEG: (f64, f64) = (-90.0, 90.0);

    pub fn new(g: usize, levels: usize) -> Self {
        Self {
            g,
            levels,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.g < 2 {
            return Err(Error::InvalidInput(format!("grid needs at least 2 points, got {}", self.g)));
        }
        if self.g > 1_000_000 {
            return Err(Error::InvalidInput(format!("grid of {} points is too large", self.g)));
        }
        if self.levels == 0 || self.levels > 40 {
            return Err(Error::InvalidInput(format!("levels must be in 1..=40, got {}", self.levels)));
        }
        if self.max_sweeps_per_level < 2 {
            return Err(Error::InvalidInput("max_sweeps_per_level must be at least 2".into()));
        }
        Ok(())
    }

    /// Grid spacing at `level` (1-based), radians.
    pub fn step_at(&self, level: usize) -> f64 {
        PI / (2f64.powi(level as i32 - 1) * self.g as f64)
    }

    /// `180 / (2^(L-1) g)` degrees.
    pub fn final_resolution_deg(&self) -> f64 {
        180.0 / (2f64.powi(self.levels as i32 - 1) * self.g as f64)
    }
}

/// Concentrated cost recorded after one grid search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostSample {
    /// Refinement level, 1-based.
    pub level: usize,
    /// Sweep index within the level, 0-based.
    pub sweep: usize,
    /// Original index of the angle that was just updated.
    pub angle: usize,
    /// Recorded while the initial estimate was still being built up; the
    /// cost then covers only the angles estimated so far.
    pub build_up: bool,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct MapResult {
    /// Directions in radians, in the order of the priors.
    pub theta_hat: Vec<f64>,
    /// `d × N` waveform estimate.
    pub s_hat: CMat,
    /// Noise covariance estimate.
    pub q_hat: CMat,
    pub cost_trace: Vec<CostSample>,
    pub sweeps_per_level: Vec<usize>,
    /// Direction estimates after every full sweep (one sweep is `d` searches).
    pub iterates: Vec<Vec<f64>>,
    pub converged: bool,
    /// Levels (1-based) whose sweeps stopped at the cap instead of converging.
    pub stalled_levels: Vec<usize>,
    /// Grid spacing of the last level, radians.
    pub final_step: f64,
}

impl MapResult {
    /// Number of increases of the concentrated cost within a refinement
    /// level once the initial build-up is complete. Increases smaller than
    /// `1e-10 (1 + |cost|)` are attributed to rounding and not counted.
    pub fn monotone_violations(&self) -> usize {
        let mut violations = 0;
        let mut prev: Option<&CostSample> = None;
        for s in &self.cost_trace {
            if let Some(p) = prev {
                let comparable = !s.build_up && (p.level == s.level || (p.build_up && s.level == 1));
                if comparable && s.cost > p.cost + 1e-10 * (1.0 + p.cost.abs()) {
                    violations += 1;
                }
            }
            prev = Some(s);
        }
        violations
    }

    /// `MaxSweepsExceeded` for the first level that hit the sweep cap.
    pub fn ensure_converged(&self) -> Result<&Self> {
        match self.stalled_levels.first() {
            None => Ok(self),
            Some(&level) => Err(Error::MaxSweepsExceeded {
                level,
                sweeps: self.sweeps_per_level[level - 1],
            }),
        }
    }
}

/// Estimates directions, waveforms and noise covariance.
pub fn map_estimate(
    y_bar: &CMat,
    y: &CMat,
    priors: &[PriorSpec],
    geom: &ArrayGeometry,
    cfg: &MapConfig,
) -> Result<MapResult> {
    if geom.m != y.nrows() {
        return Err(Error::InvalidInput(format!(
            "array has {} sensors but data has {} rows",
            geom.m,
            y.nrows()
        )));
    }
    let stats = sample_stats(y_bar, y)?;
    map_estimate_with_stats(&stats, y, priors, geom, cfg)
}

/// As [`map_estimate`] with precomputed statistics.
pub fn map_estimate_with_stats(
    stats: &SampleStats,
    y: &CMat,
    priors: &[PriorSpec],
    geom: &ArrayGeometry,
    cfg: &MapConfig,
) -> Result<MapResult> {
    cfg.validate()?;
    let d = priors.len();
    let m = stats.m();
    if d == 0 {
        return Err(Error::InvalidInput("at least one direction must be estimated".into()));
    }
    if d >= m {
        return Err(Error::InvalidInput(format!("need d < m, got d={d}, m={m}")));
    }
    if geom.m != m || y.nrows() != m {
        return Err(Error::InvalidInput("geometry, statistics and data disagree on m".into()));
    }

    // Most concentrated priors first; ties keep the given order.
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| priors[b].kappa.total_cmp(&priors[a].kappa).then(a.cmp(&b)));

    let mut estimates: Vec<Option<f64>> = vec![None; d];
    let mut grids = vec![Grid::initial(cfg.g); d];
    let mut cost_trace = Vec::new();
    let mut iterates = Vec::new();
    let mut sweeps_per_level = Vec::with_capacity(cfg.levels);
    let mut stalled_levels = Vec::new();

    for level in 1..=cfg.levels {
        let step = cfg.step_at(level);
        let tolerance = 2.0 * step;
        let mut sweeps = 0;
        loop {
            let previous = estimates.clone();
            let build_up = previous.iter().any(Option::is_none);
            for &i in &order {
                let (others, _): (Vec<f64>, Vec<usize>) = estimates
                    .iter()
                    .enumerate()
                    .filter_map(|(j, e)| if j != i { e.map(|t| (t, j)) } else { None })
                    .unzip();
                let a_i = steering_columns(&others, geom);
                let ws = per_angle_quantities(&a_i, geom, stats)?;
                let found = grid_search(&grids[i], &ws, &priors[i], &others, stats)
                    .ok_or(Error::NumericalBlowup("every grid point collides with another estimate"))?;
                estimates[i] = Some(found.theta);

                let (thetas, active): (Vec<f64>, Vec<PriorSpec>) = estimates
                    .iter()
                    .zip(priors)
                    .filter_map(|(e, p)| e.map(|t| (t, *p)))
                    .unzip();
                cost_trace.push(CostSample {
                    level,
                    sweep: sweeps,
                    angle: i,
                    build_up,
                    cost: concentrated_cost(&thetas, geom, stats, &active)?,
                });
            }
            sweeps += 1;
            iterates.push(estimates.iter().map(|e| e.expect("all angles estimated")).collect());
            if build_up {
                continue;
            }
            let delta = estimates
                .iter()
                .zip(&previous)
                .map(|(a, b)| (a.unwrap() - b.unwrap()).abs())
                .fold(0.0, f64::max);
            if delta < tolerance {
                break;
            }
            if sweeps >= cfg.max_sweeps_per_level {
                stalled_levels.push(level);
                break;
            }
        }
        sweeps_per_level.push(sweeps);
        if level < cfg.levels {
            let next = cfg.step_at(level + 1);
            for (grid, est) in grids.iter_mut().zip(&estimates) {
                *grid = Grid::refined(est.unwrap(), next, cfg.g);
            }
        }
    }

    let theta_hat: Vec<f64> = estimates.into_iter().map(Option::unwrap).collect();
    let s_hat = recover_signal(&theta_hat, geom, stats, y)?;
    let q_hat = recover_noise_cov(&theta_hat, &s_hat, geom, stats, y)?;
    Ok(MapResult {
        theta_hat,
        s_hat,
        q_hat,
        cost_trace,
        sweeps_per_level,
        iterates,
        converged: stalled_levels.is_empty(),
        stalled_levels,
        final_step: cfg.step_at(cfg.levels),
    })
}

/// Weighted least-squares waveform estimate `(A* Q0⁻¹ A)⁻¹ A* Q0⁻¹ Y`.
pub fn recover_signal(
    theta_hat: &[f64],
    geom: &ArrayGeometry,
    stats: &SampleStats,
    y: &CMat,
) -> Result<CMat> {
    check_distinct(theta_hat)?;
    let a = steering_columns(theta_hat, geom);
    let w = stats.whiten(&a);
    let gram = hermitian_part(&(w.adjoint() * &w));
    check_gram(&gram)?;
    let chol = Cholesky::new(gram).ok_or(Error::RankDeficientSteering)?;
    Ok(chol.solve(&(w.adjoint() * stats.whiten(y))))
}

/// `(M Q0 + Ỹ Ỹ*) / γ` with `Ỹ = Y − A Ŝ`.
pub fn recover_noise_cov(
    theta_hat: &[f64],
    s_hat: &CMat,
    geom: &ArrayGeometry,
    stats: &SampleStats,
    y: &CMat,
) -> Result<CMat> {
    let a = steering_columns(theta_hat, geom);
    if s_hat.nrows() != a.ncols() || s_hat.ncols() != y.ncols() {
        return Err(Error::InvalidInput("waveform estimate has the wrong shape".into()));
    }
    let residual = y - &a * s_hat;
    let q = stats.q0.scale(stats.m_noise as f64) + &residual * residual.adjoint();
    Ok(hermitian_part(&q.unscale(stats.gamma)))
}
