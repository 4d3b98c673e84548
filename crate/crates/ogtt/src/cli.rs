//! Command-line surface: `fit`, `simulate`, `sbc`, `recover`.
//!
//! Every stochastic run prints the master seed it used. The output
//! directory resolves as `--out`, then the `OGTT_OUT_DIR` environment
//! variable, then the config file's `out_dir`, then `./ogtt-out`.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis;
use crate::config::RunConfig;
use crate::error::Result;
use crate::io;
use crate::model::{self, PatientParams};
use crate::sampler::{self, derive_seed};
use crate::synth;

/// Environment variable overriding the output directory.
pub const OUT_DIR_ENV: &str = "OGTT_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "ogtt",
    about = "Bayesian analysis of oral glucose tolerance tests",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model to an observation CSV and write posterior outputs.
    Fit {
        /// Observation file with header `time_hr,glucose_mg_dl`.
        obs: PathBuf,
        /// Flat `key = value` configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for posterior.csv, band.csv, summary.txt, band.svg.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Forward-simulate a glucose trajectory and print it as CSV.
    Simulate {
        #[arg(long)]
        theta0: f64,
        #[arg(long)]
        theta1: f64,
        #[arg(long)]
        theta2: f64,
        #[arg(long)]
        g0: f64,
        /// Simulation horizon (hr).
        #[arg(long, default_value_t = 3.0)]
        t_end: f64,
        /// Integration and output step (hr).
        #[arg(long, default_value_t = model::DEFAULT_GRID_STEP)]
        grid_step: f64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Simulation-based calibration of the whole inference pipeline.
    Sbc {
        #[arg(long, default_value_t = 100)]
        replicates: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parameter-recovery experiment on a synthetic patient profile.
    Recover {
        /// Synthetic truth: healthy or resistant.
        #[arg(long, default_value = "healthy")]
        profile: String,
        #[arg(long, default_value_t = 50)]
        replicates: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parse and run; returns a process exit code. Usage errors exit 2 with
/// clap's message naming the offending flag; runtime errors exit 1 with a
/// one-line diagnostic.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::parse_file(p),
        None => Ok(RunConfig::parse_str("", Path::new("<defaults>"))?),
    }
}

fn resolve_out_dir(flag: &Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.clone();
    }
    if let Ok(env_dir) = std::env::var(OUT_DIR_ENV) {
        if !env_dir.is_empty() {
            return PathBuf::from(env_dir);
        }
    }
    if let Some(dir) = cfg.out_dir() {
        return PathBuf::from(dir);
    }
    PathBuf::from("ogtt-out")
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Fit {
            obs,
            config,
            out,
            seed,
        } => cmd_fit(&obs, &config, &out, seed),
        Command::Simulate {
            theta0,
            theta1,
            theta2,
            g0,
            t_end,
            grid_step,
            config,
        } => cmd_simulate(theta0, theta1, theta2, g0, t_end, grid_step, &config),
        Command::Sbc {
            replicates,
            seed,
            config,
            out,
        } => cmd_sbc(replicates, seed, &config, &out),
        Command::Recover {
            profile,
            replicates,
            seed,
            config,
            out,
        } => cmd_recover(&profile, replicates, seed, &config, &out),
    }
}

fn cmd_fit(
    obs_path: &Path,
    config: &Option<PathBuf>,
    out: &Option<PathBuf>,
    seed: Option<u64>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let obs = io::read_observations(obs_path)?;
    let fs = cfg.fixed_settings()?;
    let prior = cfg.prior_spec(obs.first_glucose())?;
    let settings = cfg.fit_settings(seed)?;
    let ana = cfg.analysis_settings()?;
    let out_dir = resolve_out_dir(out, &cfg);

    println!("seed: {}", settings.seed);
    println!(
        "fitting {} observations, {} iterations ({} burn-in)",
        obs.len(),
        settings.n_iterations,
        settings.burn_in
    );
    let sample = sampler::fit(&obs, &fs, &prior, &settings)?;
    if sample.stagnated {
        eprintln!("warning: chain acceptance dropped below 1% in at least one window");
    }
    let band = analysis::predictive_band(&sample, &fs, ana.horizon, ana.grid_step, ana.max_curves)?;
    if band.dropped > 0 {
        eprintln!("warning: {} posterior curves failed to simulate", band.dropped);
    }
    let summary = analysis::summarize(
        &sample,
        &fs,
        &ana.cutoffs,
        ana.g3h_threshold,
        derive_seed(settings.seed, 2),
    )?;
    let paths = io::write_outputs(&sample, &band, &summary, &obs, &out_dir)?;
    println!(
        "theta0 median {:.3} -> flag {} (cutoffs are tool defaults, not clinical values)",
        summary.theta0.median, summary.theta0_flag
    );
    println!(
        "P[G(3h) > {:.0} mg/dL] = {:.4}",
        summary.g3h.threshold, summary.g3h.p_above
    );
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_simulate(
    theta0: f64,
    theta1: f64,
    theta2: f64,
    g0: f64,
    t_end: f64,
    grid_step: f64,
    config: &Option<PathBuf>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let fs = cfg.fixed_settings()?;
    let p = PatientParams::new(theta0, theta1, theta2, g0)?;
    let traj = model::simulate(&p, &fs, t_end, grid_step)?;
    println!("{}", io::OBS_HEADER);
    for (t, s) in traj.times.iter().zip(&traj.states) {
        println!("{},{}", t, s.g);
    }
    Ok(())
}

fn cmd_sbc(
    replicates: usize,
    seed: Option<u64>,
    config: &Option<PathBuf>,
    out: &Option<PathBuf>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let fs = cfg.fixed_settings()?;
    // Calibration needs a data-independent prior; the g0 prior centers on
    // the homeostasis threshold instead of a fasting reading.
    let prior = cfg.prior_spec(fs.gb)?;
    let mut settings = cfg.fit_settings(seed)?;
    // Calibration replicates do not need full-length chains.
    if !cfg.iterations_is_set() {
        settings.n_iterations = 50_000;
        settings.burn_in = 5_000;
    }
    let out_dir = resolve_out_dir(out, &cfg);

    println!("seed: {}", settings.seed);
    println!(
        "running {replicates} calibration replicates ({} iterations each)",
        settings.n_iterations
    );
    let report = synth::sbc(&prior, &fs, &synth::DEFAULT_SCHEDULE, replicates, &settings)?;
    let names = ["theta0", "theta1", "theta2", "g0"];
    for (j, name) in names.iter().enumerate() {
        println!(
            "{name}: chi-square {:.2} over {} bins, p = {:.4}",
            report.chi_square[j],
            report.n_bins,
            report.p_value[j]
        );
    }
    if report.failures > 0 {
        eprintln!("warning: {} replicates failed", report.failures);
    }
    std::fs::create_dir_all(&out_dir).map_err(|e| crate::error::Error::WriteFile {
        path: out_dir.clone(),
        reason: e.to_string(),
    })?;
    let path = out_dir.join("sbc_ranks.csv");
    io::write_sbc_report(&report, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_recover(
    profile: &str,
    replicates: usize,
    seed: Option<u64>,
    config: &Option<PathBuf>,
    out: &Option<PathBuf>,
) -> Result<()> {
    let truth = match profile {
        "healthy" => synth::healthy_truth(),
        "resistant" => synth::resistant_truth(),
        other => {
            return Err(crate::error::Error::InvalidArgument(format!(
                "unknown profile `{other}`; use healthy or resistant"
            )))
        }
    };
    let cfg = load_config(config)?;
    let fs = cfg.fixed_settings()?;
    let mut settings = cfg.fit_settings(seed)?;
    if !cfg.iterations_is_set() {
        settings.n_iterations = 80_000;
        settings.burn_in = 8_000;
    }
    let out_dir = resolve_out_dir(out, &cfg);

    println!("seed: {}", settings.seed);
    println!("recovering {profile} truth over {replicates} replicates");
    let report = synth::recovery_experiment(
        &truth,
        &fs,
        &synth::DEFAULT_SCHEDULE,
        replicates,
        &settings,
    )?;
    let names = ["theta0", "theta1", "theta2", "g0"];
    for (j, name) in names.iter().enumerate() {
        println!(
            "{name}: 95% interval coverage {:.3} over {} replicates",
            report.coverage(j),
            report.outcomes.len()
        );
    }
    if report.failures > 0 {
        eprintln!("warning: {} replicates failed", report.failures);
    }
    std::fs::create_dir_all(&out_dir).map_err(|e| crate::error::Error::WriteFile {
        path: out_dir.clone(),
        reason: e.to_string(),
    })?;
    let path = out_dir.join("recovery_coverage.csv");
    io::write_recovery_report(&report, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}
