//! Seeded Monte Carlo experiments: RMSE of the MAP directions against the
//! realized angles over a sweep of snapshot count, SNR or INR, with CRB and
//! ACRB reference columns.
//!
//! Run `r` of sweep value `k` draws from a ChaCha8 stream seeded with the
//! master seed and stream id `(k << 32) | r`, so runs are independent of
//! each other and of scheduling. Runs execute in parallel; aggregation is a
//! fixed-order reduction afterwards.

use std::fmt::Write as _;
use std::path::PathBuf;

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::scenario_bounds;
use crate::error::{Error, Result};
use crate::estimator::{map_estimate, MapConfig, MapResult};
use crate::scenario::{generate_dataset, Scenario, ScenarioConfig};

/// Largest source count accepted by the exhaustive angle matching.
pub const MAX_MATCHED_SOURCES: usize = 5;

/// A row is flagged when this fraction of its runs failed to converge.
pub const FAIL_FRACTION_FLAG: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "M")]
    NoiseSamples,
    #[serde(rename = "snr_db")]
    SnrDb,
    #[serde(rename = "inr_db")]
    InrDb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    /// Per-source flag; defaults to "random iff kappa > 0".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub treat_random: Option<Vec<bool>>,
}

fn default_runs() -> usize {
    500
}

/// JSON form of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub sweep: Sweep,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub estimator: MapConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<ExperimentSpec> {
        ExperimentSpec::new(
            self.scenario.build()?,
            self.sweep.clone(),
            self.runs,
            self.master_seed,
            self.estimator,
            self.bounds.treat_random.clone(),
            self.output_path.clone(),
        )
    }
}

/// Validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub sweep: Sweep,
    pub runs: usize,
    pub master_seed: u64,
    pub estimator: MapConfig,
    pub treat_random: Option<Vec<bool>>,
    pub output_path: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(
        scenario: Scenario,
        sweep: Sweep,
        runs: usize,
        master_seed: u64,
        estimator: MapConfig,
        treat_random: Option<Vec<bool>>,
        output_path: Option<PathBuf>,
    ) -> Result<Self> {
        if runs == 0 {
            return Err(Error::InvalidInput("runs must be >= 1".into()));
        }
        if scenario.d() > MAX_MATCHED_SOURCES {
            return Err(Error::InvalidInput(format!(
                "at most {MAX_MATCHED_SOURCES} sources supported, got {}",
                scenario.d()
            )));
        }
        if sweep.values.is_empty() {
            return Err(Error::InvalidInput("sweep has no values".into()));
        }
        if sweep.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("sweep values must be finite".into()));
        }
        if sweep.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("sweep values must be strictly increasing".into()));
        }
        if sweep.param == SweepParam::NoiseSamples
            && sweep.values.iter().any(|&v| v.fract() != 0.0 || v < 1.0 || v > 1e9)
        {
            return Err(Error::InvalidInput("M sweep values must be positive integers".into()));
        }
        if let Some(flags) = &treat_random {
            if flags.len() != scenario.d() {
                return Err(Error::InvalidInput("one treat_random flag per source is required".into()));
            }
        }
        estimator.validate()?;
        let spec = Self {
            scenario,
            sweep,
            runs,
            master_seed,
            estimator,
            treat_random,
            output_path,
        };
        // Surfaces construction errors (too few samples, bad powers) before any run.
        for k in 0..spec.sweep.values.len() {
            spec.scenario_at(k)?;
        }
        Ok(spec)
    }

    /// Scenario for sweep value `k`. The M sweep keeps `α = N/M` of the template.
    pub fn scenario_at(&self, k: usize) -> Result<Scenario> {
        let value = self.sweep.values[k];
        match self.sweep.param {
            SweepParam::NoiseSamples => {
                let m_noise = value as usize;
                let n = ((self.scenario.alpha() * value).round() as usize).max(1);
                self.scenario.with_counts(m_noise, n)
            }
            SweepParam::SnrDb => self.scenario.with_snr_db(value),
            SweepParam::InrDb => self.scenario.with_inr_db(value),
        }
    }

    /// Random stream of run `run` at sweep value `k`.
    pub fn stream(&self, k: usize, run: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(((k as u64) << 32) | run as u64);
        rng
    }
}

/// Permutation `π` minimizing `Σ |θ̂_{π(i)} − θ_i|`; ties resolve to the
/// lexicographically first permutation.
pub fn match_angles(theta_hat: &[f64], theta_true: &[f64]) -> Result<Vec<usize>> {
    let d = theta_true.len();
    if theta_hat.len() != d {
        return Err(Error::InvalidInput("estimate and truth differ in length".into()));
    }
    if d > MAX_MATCHED_SOURCES {
        return Err(Error::InvalidInput(format!("matching supports d <= {MAX_MATCHED_SOURCES}")));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in (0..d).permutations(d) {
        let cost: f64 = perm
            .iter()
            .zip(theta_true)
            .map(|(&j, &t)| (theta_hat[j] - t).abs())
            .sum();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, perm));
        }
    }
    Ok(best.map(|(_, p)| p).unwrap_or_default())
}

/// Root mean square of errors given in radians, reported in degrees.
pub fn rmse(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptySample);
    }
    let ms = errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64;
    Ok(ms.sqrt().to_degrees())
}

/// Outcome of one Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// Matched estimation errors, radians, in source order.
    pub errors: Vec<f64>,
    pub converged: bool,
    pub monotone_violations: usize,
}

/// One run: draw, estimate, match.
pub fn run_once(scn: &Scenario, cfg: &MapConfig, rng: &mut ChaCha8Rng) -> Result<(RunOutcome, MapResult, Vec<f64>)> {
    let data = generate_dataset(scn, rng)?;
    let result = map_estimate(&data.y_bar, &data.y, scn.priors(), scn.geom(), cfg)?;
    let perm = match_angles(&result.theta_hat, &data.thetas_realized)?;
    let errors = perm
        .iter()
        .zip(&data.thetas_realized)
        .map(|(&j, &t)| result.theta_hat[j] - t)
        .collect();
    let outcome = RunOutcome {
        errors,
        converged: result.converged,
        monotone_violations: result.monotone_violations(),
    };
    Ok((outcome, result, data.thetas_realized))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseRow {
    pub sweep_value: f64,
    pub rmse_deg: Vec<f64>,
    pub crb_deg: Vec<f64>,
    pub acrb_deg: Vec<f64>,
    pub fail_count: usize,
    pub runs: usize,
    /// Cost increases within a refinement level summed over all runs.
    pub monotone_violations: usize,
}

impl RmseRow {
    pub fn flagged(&self) -> bool {
        self.fail_count as f64 / self.runs as f64 >= FAIL_FRACTION_FLAG
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseTable {
    pub param: SweepParam,
    pub d: usize,
    pub rows: Vec<RmseRow>,
}

impl RmseTable {
    pub fn header(d: usize) -> String {
        let mut cols = vec!["sweep_value".to_string()];
        for kind in ["rmse", "crb", "acrb"] {
            cols.extend((1..=d).map(|i| format!("{kind}_theta{i}_deg")));
        }
        cols.push("fail_count".into());
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::header(self.d);
        out.push('\n');
        for row in &self.rows {
            let mut fields = vec![format_sig9(row.sweep_value)];
            for col in [&row.rmse_deg, &row.crb_deg, &row.acrb_deg] {
                fields.extend(col.iter().map(|&v| format_sig9(v)));
            }
            fields.push(row.fail_count.to_string());
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

/// Formats like C's `%.9g`.
pub fn format_sig9(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= DIGITS {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Runs every sweep value of the experiment.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RmseTable> {
    let d = spec.scenario.d();
    let mut rows = Vec::with_capacity(spec.sweep.values.len());
    for (k, &value) in spec.sweep.values.iter().enumerate() {
        let scn = spec.scenario_at(k)?;
        let (crb, hybrid) = scenario_bounds(&scn, spec.treat_random.as_deref())?;
        let outcomes: Vec<RunOutcome> = (0..spec.runs)
            .into_par_iter()
            .map(|run| run_once(&scn, &spec.estimator, &mut spec.stream(k, run)).map(|(o, _, _)| o))
            .collect::<Result<_>>()?;

        let mut rmse_deg = Vec::with_capacity(d);
        for i in 0..d {
            let errs: Vec<f64> = outcomes.iter().map(|o| o.errors[i]).collect();
            rmse_deg.push(rmse(&errs)?);
        }
        rows.push(RmseRow {
            sweep_value: value,
            rmse_deg,
            crb_deg: crb.rms_deg,
            acrb_deg: hybrid.rms_deg,
            fail_count: outcomes.iter().filter(|o| !o.converged).count(),
            runs: spec.runs,
            monotone_violations: outcomes.iter().map(|o| o.monotone_violations).sum(),
        });
    }
    Ok(RmseTable {
        param: spec.sweep.param,
        d,
        rows,
    })
}

/// Per-sweep convergence record of one run as CSV:
/// `iteration,level,abs_err_theta1_deg,…,cost`.
pub fn convergence_trace(spec: &ExperimentSpec, k: usize, run: usize) -> Result<String> {
    if k >= spec.sweep.values.len() || run >= spec.runs {
        return Err(Error::InvalidInput("trace index outside the experiment".into()));
    }
    let scn = spec.scenario_at(k)?;
    let (_, result, truth) = run_once(&scn, &spec.estimator, &mut spec.stream(k, run))?;
    let d = scn.d();
    let mut out = String::from("iteration,level");
    for i in 1..=d {
        let _ = write!(out, ",abs_err_theta{i}_deg");
    }
    out.push_str(",cost\n");

    // Each sweep contributes d cost samples; the last is the cost after the sweep.
    let mut levels = Vec::new();
    for (level, &sweeps) in result.sweeps_per_level.iter().enumerate() {
        levels.extend(std::iter::repeat_n(level + 1, sweeps));
    }
    for (it, thetas) in result.iterates.iter().enumerate() {
        let perm = match_angles(thetas, &truth)?;
        let cost = result.cost_trace[(it + 1) * d - 1].cost;
        let _ = write!(out, "{},{}", it + 1, levels[it]);
        for (i, &t) in truth.iter().enumerate() {
            let _ = write!(out, ",{}", format_sig9((thetas[perm[i]] - t).abs().to_degrees()));
        }
        let _ = writeln!(out, ",{}", format_sig9(cost));
    }
    Ok(out)
}
