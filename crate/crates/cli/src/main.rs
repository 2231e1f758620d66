use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use doamap::formats::{parse_priors, parse_snapshots, write_complex_matrix, write_snapshots, Snapshots};
use doamap::harness::{convergence_trace, format_sig9};
use doamap::{generate_dataset, map_estimate, scenario_bounds, run_experiment, ArrayGeometry, ExperimentConfig, MapConfig, ScenarioConfig};

#[derive(Parser)]
#[command(name = "doamap", version, about = "MAP direction-of-arrival estimation in unknown correlated noise")]
struct Cli {
    /// Overrides the master seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the Monte Carlo run count.
    #[arg(long, global = true)]
    runs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo RMSE sweep with CRB/ACRB columns.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Results CSV; defaults to the config's output_path, then stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Convergence trace of the first run at the first sweep value.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Draws one dataset from a scenario and writes it as snapshot CSV.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// MAP estimate from a snapshot CSV.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        priors: PathBuf,
        #[arg(long, default_value_t = 500)]
        grid: usize,
        #[arg(long, default_value_t = 10)]
        levels: usize,
        /// Element spacing in wavelengths.
        #[arg(long, default_value_t = 0.5)]
        spacing: f64,
        #[arg(long)]
        s_out: Option<PathBuf>,
        #[arg(long)]
        q_out: Option<PathBuf>,
    },
    /// CRB and ACRB of a scenario.
    Crb {
        #[arg(long)]
        config: PathBuf,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn simulate(cli: &Cli, config: &Path, out: Option<&Path>, trace_out: Option<&Path>) -> Result<()> {
    let mut cfg = ExperimentConfig::from_json(&read(config)?)?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(runs) = cli.runs {
        cfg.runs = runs;
    }
    let spec = cfg.build()?;
    let table = run_experiment(&spec)?;
    for row in table.rows.iter().filter(|r| r.flagged()) {
        eprintln!(
            "warning: {} of {} runs did not converge at sweep value {}",
            row.fail_count,
            row.runs,
            format_sig9(row.sweep_value)
        );
    }
    emit(out.or(spec.output_path.as_deref()), &table.to_csv())?;
    if let Some(path) = trace_out {
        emit(Some(path), &convergence_trace(&spec, 0, 0)?)?;
    }
    Ok(())
}

fn generate(cli: &Cli, config: &Path, out: Option<&Path>) -> Result<()> {
    let scn = ScenarioConfig::from_json(&read(config)?)?.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed.unwrap_or(0));
    let ds = generate_dataset(&scn, &mut rng)?;
    emit(out, &write_snapshots(&Snapshots { y_bar: ds.y_bar, y: ds.y }))
}

#[allow(clippy::too_many_arguments)]
fn estimate(
    data: &Path,
    priors: &Path,
    grid: usize,
    levels: usize,
    spacing: f64,
    s_out: Option<&Path>,
    q_out: Option<&Path>,
) -> Result<()> {
    let snap = parse_snapshots(&read(data)?)?;
    let priors = parse_priors(&read(priors)?)?;
    let geom = ArrayGeometry::new(snap.y.nrows(), spacing)?;
    if snap.y.ncols() == 0 {
        bail!("snapshot file has no data snapshots (t >= 1)");
    }
    let result = map_estimate(&snap.y_bar, &snap.y, &priors, &geom, &MapConfig::new(grid, levels))?;
    for level in &result.stalled_levels {
        eprintln!("warning: level {level} hit the sweep cap without converging");
    }
    let mut csv = String::from("angle_index,theta_deg\n");
    for (i, t) in result.theta_hat.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", i + 1, format_sig9(t.to_degrees())));
    }
    emit(None, &csv)?;
    if let Some(p) = s_out {
        emit(Some(p), &write_complex_matrix(&result.s_hat))?;
    }
    if let Some(p) = q_out {
        emit(Some(p), &write_complex_matrix(&result.q_hat))?;
    }
    Ok(())
}

fn crb(config: &Path) -> Result<()> {
    let scn = ScenarioConfig::from_json(&read(config)?)?.build()?;
    let (crb, acrb) = scenario_bounds(&scn, None)?;
    let mut csv = String::from("angle_index,theta_deg,crb_deg,acrb_deg\n");
    for (i, t) in scn.nominal_thetas().iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            i + 1,
            format_sig9(t.to_degrees()),
            format_sig9(crb.rms_deg[i]),
            format_sig9(acrb.rms_deg[i])
        ));
    }
    emit(None, &csv)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate { config, out, trace_out } => simulate(&cli, config, out.as_deref(), trace_out.as_deref()),
        Command::Generate { config, out } => generate(&cli, config, out.as_deref()),
        Command::Estimate {
            data,
            priors,
            grid,
            levels,
            spacing,
            s_out,
            q_out,
        } => estimate(data, priors, *grid, *levels, *spacing, s_out.as_deref(), q_out.as_deref()),
        Command::Crb { config } => crb(config),
    }
}
