//! Generative model: correlated Gaussian sources, a colored noise field made of
//! spatially correlated sensor noise plus interferers, von Mises priors on the
//! source directions, and seeded snapshot generation.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::array_model::{check_distinct, steering_columns, ArrayGeometry};
use crate::error::{Error, Result};
use crate::linalg::{c64, cholesky, hermitian_part, C64, CMat};

/// Upper limit on the sensor count accepted from configuration files.
pub const MAX_SENSORS: usize = 256;

/// Von Mises prior `M(mu, kappa)` on one direction of arrival.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    /// Mean direction, radians.
    pub mu: f64,
    /// Concentration; zero is the noninformative prior.
    pub kappa: f64,
}

impl PriorSpec {
    pub fn new(mu: f64, kappa: f64) -> Result<Self> {
        if !(mu.is_finite() && mu.abs() <= std::f64::consts::FRAC_PI_2 + 1e-12) {
            return Err(Error::InvalidInput(format!("prior mean must lie in [-90°, 90°], got {mu} rad")));
        }
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::InvalidInput(format!("kappa must be finite and >= 0, got {kappa}")));
        }
        Ok(Self { mu, kappa })
    }

    pub fn noninformative() -> Self {
        Self { mu: 0.0, kappa: 0.0 }
    }

    pub fn is_informative(&self) -> bool {
        self.kappa > 0.0
    }
}

/// Raw scenario parameters. Angles in radians, powers linear.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub geom: ArrayGeometry,
    pub priors: Vec<PriorSpec>,
    /// True angle of every source; entries of sources with `kappa > 0` are
    /// ignored when generating data (those are drawn from the prior).
    pub true_thetas_fixed: Vec<f64>,
    pub rho: C64,
    pub noise_a: f64,
    pub sigma2: f64,
    pub interferer_thetas: Vec<f64>,
    pub sigma2_tilde: f64,
    /// Scale applied to `I + ρT + ρ*T*`.
    pub signal_power: f64,
    pub n: usize,
    pub m_noise: usize,
}

/// Validated scenario with its covariances and their Cholesky factors.
#[derive(Debug, Clone)]
pub struct Scenario {
    params: ScenarioParams,
    p: CMat,
    q: CMat,
    q_prime: CMat,
    p_factor: CMat,
    q_factor: CMat,
}

impl Scenario {
    pub fn new(params: ScenarioParams) -> Result<Self> {
        let m = params.geom.m;
        let d = params.priors.len();
        if m > MAX_SENSORS {
            return Err(Error::InvalidInput(format!("at most {MAX_SENSORS} sensors supported, got {m}")));
        }
        if d == 0 || d >= m {
            return Err(Error::InvalidInput(format!("need 1 <= d < m, got d={d}, m={m}")));
        }
        if params.true_thetas_fixed.len() != d {
            return Err(Error::InvalidInput(format!(
                "{} true angles given for {d} sources",
                params.true_thetas_fixed.len()
            )));
        }
        if !(params.rho.norm() < 1.0) {
            return Err(Error::InvalidInput(format!("|rho| must be < 1, got {}", params.rho.norm())));
        }
        if !(0.0..1.0).contains(&params.noise_a) {
            return Err(Error::InvalidInput(format!("noise_a must lie in [0, 1), got {}", params.noise_a)));
        }
        if !(params.sigma2.is_finite() && params.sigma2 > 0.0) {
            return Err(Error::InvalidInput(format!("sigma2 must be positive, got {}", params.sigma2)));
        }
        if !(params.sigma2_tilde.is_finite() && params.sigma2_tilde >= 0.0) {
            return Err(Error::InvalidInput(format!("sigma2_tilde must be >= 0, got {}", params.sigma2_tilde)));
        }
        if !(params.signal_power.is_finite() && params.signal_power > 0.0) {
            return Err(Error::InvalidInput(format!("signal power must be positive, got {}", params.signal_power)));
        }
        if params.m_noise < m {
            return Err(Error::InvalidInput(format!(
                "need at least m={m} noise-only samples, got {}",
                params.m_noise
            )));
        }
        if params.n == 0 {
            return Err(Error::InvalidInput("need at least one data snapshot".into()));
        }
        for &t in params.true_thetas_fixed.iter().chain(&params.interferer_thetas) {
            if !(t.is_finite() && t.abs() <= std::f64::consts::FRAC_PI_2) {
                return Err(Error::InvalidInput(format!("angle {t} rad outside [-pi/2, pi/2]")));
            }
        }
        let fixed: Vec<f64> = params
            .priors
            .iter()
            .zip(&params.true_thetas_fixed)
            .filter(|(p, _)| !p.is_informative())
            .map(|(_, &t)| t)
            .collect();
        check_distinct(&fixed)?;

        let p = signal_covariance(params.rho, d)?.scale(params.signal_power);
        let q_prime = spatial_noise(m, params.sigma2, params.noise_a);
        let q = noise_covariance_from(&params, &q_prime);
        let p_factor = cholesky(&p, "signal covariance P")?.unpack();
        let q_factor = cholesky(&q, "noise covariance Q")?.unpack();
        Ok(Self {
            params,
            p,
            q,
            q_prime,
            p_factor,
            q_factor,
        })
    }

    pub fn params(&self) -> &ScenarioParams {
        &self.params
    }

    pub fn geom(&self) -> &ArrayGeometry {
        &self.params.geom
    }

    pub fn priors(&self) -> &[PriorSpec] {
        &self.params.priors
    }

    pub fn d(&self) -> usize {
        self.params.priors.len()
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn m_noise(&self) -> usize {
        self.params.m_noise
    }

    pub fn alpha(&self) -> f64 {
        self.params.n as f64 / self.params.m_noise as f64
    }

    /// Source covariance `P`.
    pub fn p(&self) -> &CMat {
        &self.p
    }

    /// Full noise-plus-interference covariance `Q`.
    pub fn q(&self) -> &CMat {
        &self.q
    }

    /// Spatially correlated sensor-noise part `Q'`.
    pub fn q_prime(&self) -> &CMat {
        &self.q_prime
    }

    /// Lower Cholesky factor `L` with `L L* = Q`.
    pub fn q_factor(&self) -> &CMat {
        &self.q_factor
    }

    /// Lower Cholesky factor `L` with `L L* = P`.
    pub fn p_factor(&self) -> &CMat {
        &self.p_factor
    }

    /// Angles at which the bounds are evaluated: prior means for random
    /// sources, fixed true angles otherwise.
    pub fn nominal_thetas(&self) -> Vec<f64> {
        self.params
            .priors
            .iter()
            .zip(&self.params.true_thetas_fixed)
            .map(|(p, &t)| if p.is_informative() { p.mu } else { t })
            .collect()
    }

    fn rebuild(&self, f: impl FnOnce(&mut ScenarioParams)) -> Result<Self> {
        let mut params = self.params.clone();
        f(&mut params);
        Self::new(params)
    }

    pub fn with_counts(&self, m_noise: usize, n: usize) -> Result<Self> {
        self.rebuild(|p| {
            p.m_noise = m_noise;
            p.n = n;
        })
    }

    /// Rescales `P` so that `tr{P}/tr{Q'}` equals the given SNR; `Q'` is untouched.
    pub fn with_snr_db(&self, snr_db: f64) -> Result<Self> {
        let power = signal_power_for_snr(&self.params, snr_db)?;
        self.rebuild(|p| p.signal_power = power)
    }

    /// Sets the interferer power so that `tr{P~}/tr{Q'}` equals the given INR.
    pub fn with_inr_db(&self, inr_db: f64) -> Result<Self> {
        let s2 = sigma2_tilde_for_inr(&self.params, inr_db)?;
        self.rebuild(|p| p.sigma2_tilde = s2)
    }
}

/// `P = I + ρT + ρ*T*` with `T` strictly lower triangular of ones.
pub fn signal_covariance(rho: C64, d: usize) -> Result<CMat> {
    if !(rho.norm() < 1.0) {
        return Err(Error::InvalidInput(format!("|rho| must be < 1, got {}", rho.norm())));
    }
    let p = CMat::from_fn(d, d, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => c64(1.0, 0.0),
        std::cmp::Ordering::Greater => rho,
        std::cmp::Ordering::Less => rho.conj(),
    });
    cholesky(&p, "signal covariance P")?;
    Ok(p)
}

fn spatial_noise(m: usize, sigma2: f64, a: f64) -> CMat {
    CMat::from_fn(m, m, |i, j| {
        let lag = i.abs_diff(j) as i32;
        c64(sigma2 * a.powi(lag), 0.0)
    })
}

fn noise_covariance_from(params: &ScenarioParams, q_prime: &CMat) -> CMat {
    if params.interferer_thetas.is_empty() || params.sigma2_tilde == 0.0 {
        return q_prime.clone();
    }
    let a = steering_columns(&params.interferer_thetas, &params.geom);
    hermitian_part(&(q_prime + (&a * a.adjoint()).scale(params.sigma2_tilde)))
}

/// `Q = Q' + Ã P̃ Ã*` with `{Q'}_ij = σ² a^|i-j|` and `P̃ = σ̃² I`.
pub fn noise_covariance(scn: &Scenario) -> CMat {
    scn.q.clone()
}

/// `(tr{P}/tr{Q'}, tr{P~}/tr{Q'})` as linear ratios.
pub fn snr_inr(scn: &Scenario) -> (f64, f64) {
    let tr_q_prime = scn.q_prime.trace().re;
    let tr_p = scn.p.trace().re;
    let tr_p_tilde = scn.params.sigma2_tilde * scn.params.interferer_thetas.len() as f64;
    (tr_p / tr_q_prime, tr_p_tilde / tr_q_prime)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn signal_power_for_snr(params: &ScenarioParams, snr_db: f64) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidInput(format!("snr_db must be finite, got {snr_db}")));
    }
    // tr{I + ρT + ρ*T*} = d
    let d = params.priors.len() as f64;
    let tr_q_prime = params.geom.m as f64 * params.sigma2;
    Ok(db_to_linear(snr_db) * tr_q_prime / d)
}

fn sigma2_tilde_for_inr(params: &ScenarioParams, inr_db: f64) -> Result<f64> {
    if !inr_db.is_finite() {
        return Err(Error::InvalidInput(format!("inr_db must be finite, got {inr_db}")));
    }
    let d_tilde = params.interferer_thetas.len();
    if d_tilde == 0 {
        return Err(Error::InvalidInput("INR given but no interferers configured".into()));
    }
    let tr_q_prime = params.geom.m as f64 * params.sigma2;
    Ok(db_to_linear(inr_db) * tr_q_prime / d_tilde as f64)
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y += 2.0 * PI;
    }
    y
}

/// Draws from `M(mu, kappa)` with the Best–Fisher rejection sampler.
/// `kappa = 0` is uniform on `(-π, π]`.
pub fn sample_von_mises<R: Rng + ?Sized>(prior: &PriorSpec, rng: &mut R) -> f64 {
    let kappa = prior.kappa;
    if kappa < 1e-8 {
        // 1 - U is in (0, 1], so the draw lands in (-π, π].
        let u: f64 = rng.random();
        return PI * (2.0 * (1.0 - u) - 1.0);
    }
    let s = if kappa < 1e-5 {
        1.0 / kappa + kappa
    } else {
        let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
        let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
        (1.0 + rho * rho) / (2.0 * rho)
    };
    let w = loop {
        let u: f64 = rng.random();
        let z = (PI * u).cos();
        let w = (1.0 + s * z) / (s + z);
        let y = kappa * (s - w);
        let v: f64 = rng.random();
        if y * (2.0 - y) - v >= 0.0 || (y / v).ln() + 1.0 - y >= 0.0 {
            break w;
        }
    };
    let u: f64 = rng.random();
    let mut theta = w.clamp(-1.0, 1.0).acos();
    if u < 0.5 {
        theta = -theta;
    }
    wrap_angle(theta + prior.mu)
}

/// Mean resultant direction of a set of angles.
pub fn circular_mean(angles: &[f64]) -> f64 {
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), &x| (s + x.sin(), c + x.cos()));
    s.atan2(c)
}

/// Circular standard deviation `sqrt(-2 ln R)` with `R` the mean resultant length.
pub fn circular_std(angles: &[f64]) -> f64 {
    let n = angles.len() as f64;
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), &x| (s + x.sin(), c + x.cos()));
    let r = (s * s + c * c).sqrt() / n;
    (-2.0 * r.ln()).sqrt()
}

/// One realization of noise-only and signal-plus-noise snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `m × M` noise-only samples.
    pub y_bar: CMat,
    /// `m × N` signal-plus-noise samples.
    pub y: CMat,
    /// `d × N` source waveforms.
    pub s_true: CMat,
    pub thetas_realized: Vec<f64>,
}

/// `rows × cols` matrix of standard circular complex Gaussians, `E|z|² = 1`.
fn standard_complex<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    // Column-major fill keeps the draw order independent of storage details.
    let mut out = DMatrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            out[(r, c)] = c64(re * scale, im * scale);
        }
    }
    out
}

/// Draws `CN(0, L L*)` columns.
pub fn complex_gaussian<R: Rng + ?Sized>(factor: &CMat, cols: usize, rng: &mut R) -> CMat {
    factor * standard_complex(factor.ncols(), cols, rng)
}

/// Draws an angle from the prior, restricted to the array's field of view.
fn draw_in_view<R: Rng + ?Sized>(prior: &PriorSpec, rng: &mut R) -> f64 {
    // Out-of-view draws are redrawn; for the concentrations used in practice
    // the prior mass outside (-90°, 90°) is negligible.
    loop {
        let t = sample_von_mises(prior, rng);
        if t.abs() < std::f64::consts::FRAC_PI_2 {
            return t;
        }
    }
}

/// Draws random angles, sources and noise for one Monte Carlo run.
pub fn generate_dataset<R: Rng + ?Sized>(scn: &Scenario, rng: &mut R) -> Result<Dataset> {
    let params = &scn.params;
    let thetas_realized: Vec<f64> = params
        .priors
        .iter()
        .zip(&params.true_thetas_fixed)
        .map(|(p, &t)| if p.is_informative() { draw_in_view(p, rng) } else { t })
        .collect();
    check_distinct(&thetas_realized)?;
    let a = steering_columns(&thetas_realized, &params.geom);

    let y_bar = complex_gaussian(&scn.q_factor, params.m_noise, rng);
    let s_true = complex_gaussian(&scn.p_factor, params.n, rng);
    let noise = complex_gaussian(&scn.q_factor, params.n, rng);
    let y = &a * &s_true + noise;
    Ok(Dataset {
        y_bar,
        y,
        s_true,
        thetas_realized,
    })
}

/// Untagged complex number in configuration files: `0.9` or `[0.9, 0.1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexValue {
    pub fn to_c64(self) -> C64 {
        match self {
            ComplexValue::Real(x) => c64(x, 0.0),
            ComplexValue::Pair([re, im]) => c64(re, im),
        }
    }
}

impl Default for ComplexValue {
    fn default() -> Self {
        ComplexValue::Real(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub mu_deg: f64,
    #[serde(default)]
    pub kappa: f64,
}

impl PriorConfig {
    pub fn to_prior(&self) -> Result<PriorSpec> {
        PriorSpec::new(self.mu_deg.to_radians(), self.kappa)
    }
}

fn default_spacing() -> f64 {
    0.5
}

fn default_sigma2() -> f64 {
    1.0
}

/// JSON form of a scenario. Angles in degrees; `snr_db` / `inr_db` override
/// `signal_power` / `sigma2_tilde` when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub m: usize,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    pub priors: Vec<PriorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_thetas_fixed_deg: Option<Vec<f64>>,
    #[serde(default)]
    pub rho: ComplexValue,
    #[serde(default)]
    pub noise_a: f64,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default)]
    pub interferer_thetas_deg: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inr_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_power: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m_noise: usize,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_params(&self) -> Result<ScenarioParams> {
        let geom = ArrayGeometry::new(self.m, self.spacing)?;
        if self.m > MAX_SENSORS {
            return Err(Error::InvalidInput(format!("at most {MAX_SENSORS} sensors supported")));
        }
        let priors = self
            .priors
            .iter()
            .map(PriorConfig::to_prior)
            .collect::<Result<Vec<_>>>()?;
        let true_thetas_fixed = match &self.true_thetas_fixed_deg {
            Some(v) => v.iter().map(|t| t.to_radians()).collect(),
            None => priors.iter().map(|p| p.mu).collect(),
        };
        if self.sigma2_tilde.is_some() && self.inr_db.is_some() {
            return Err(Error::InvalidInput("give either sigma2_tilde or inr_db, not both".into()));
        }
        if self.signal_power.is_some() && self.snr_db.is_some() {
            return Err(Error::InvalidInput("give either signal_power or snr_db, not both".into()));
        }
        let mut params = ScenarioParams {
            geom,
            priors,
            true_thetas_fixed,
            rho: self.rho.to_c64(),
            noise_a: self.noise_a,
            sigma2: self.sigma2,
            interferer_thetas: self.interferer_thetas_deg.iter().map(|t| t.to_radians()).collect(),
            sigma2_tilde: self.sigma2_tilde.unwrap_or(0.0),
            signal_power: self.signal_power.unwrap_or(1.0),
            n: self.n,
            m_noise: self.m_noise,
        };
        if !(params.sigma2.is_finite() && params.sigma2 > 0.0) {
            return Err(Error::InvalidInput(format!("sigma2 must be positive, got {}", params.sigma2)));
        }
        if params.priors.is_empty() {
            return Err(Error::InvalidInput("at least one source prior is required".into()));
        }
        if let Some(snr) = self.snr_db {
            params.signal_power = signal_power_for_snr(&params, snr)?;
        }
        if let Some(inr) = self.inr_db {
            params.sigma2_tilde = sigma2_tilde_for_inr(&params, inr)?;
        }
        Ok(params)
    }

    pub fn build(&self) -> Result<Scenario> {
        Scenario::new(self.to_params()?)
    }
}
