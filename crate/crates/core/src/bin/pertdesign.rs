use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pertdesign::harness::config::parse_bound;
use pertdesign::harness::output::{
    read_csv_column, sensitivity_csv, write_metrics, write_spectra, write_summary,
    write_trajectory,
};
use pertdesign::harness::spectrum::DEFAULT_SEGMENT;
use pertdesign::harness::{
    run_monte_carlo, validate, welch, Campaign, CampaignSummary, ExperimentConfig, Policy, Spectrum,
};
use pertdesign::sensitivity::{build_sensitivity, truncation_bound};
use pertdesign::Error;

#[derive(Parser)]
#[command(name = "pertdesign", version, about = "Constraint-aware perturbation design for closed-loop identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one Monte Carlo campaign.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        policy: Option<Policy>,
        /// Output bound; overrides yd_min/yd_max symmetrically.
        #[arg(long, value_parser = parse_bound)]
        yd_max: Option<f64>,
        /// Also write trajectory_<i>.csv for every run.
        #[arg(long)]
        trajectories: bool,
    },
    /// One designed campaign per output bound, plus an optional PRBS baseline.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated bounds, e.g. `inf,0.2,0.1,0.04`.
        #[arg(long, value_delimiter = ',', value_parser = parse_bound, default_value = "inf,0.2,0.1,0.04")]
        yd_max: Vec<f64>,
        #[arg(long)]
        with_prbs: bool,
    },
    /// Print the load sensitivity of the configured plant and controller.
    Sensitivity {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Welch spectrum of one column of a CSV file.
    Spectrum {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "d")]
        column: String,
        #[arg(long, default_value_t = DEFAULT_SEGMENT)]
        segment: usize,
        #[arg(long, default_value_t = pertdesign::benchmark::SAMPLE_PERIOD)]
        dt: f64,
        /// Samples to drop from the front, e.g. the warm-up.
        #[arg(long, default_value_t = 0)]
        skip: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in identity checks.
    Validate,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(runs) = self.runs {
            cfg.runs = runs;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(steps) = self.steps {
            cfg.steps = steps;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

enum Failure {
    Error(Error),
    Diverged(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn label(cfg: &ExperimentConfig) -> String {
    match cfg.policy {
        Policy::Designed if cfg.limits.yd_max.is_infinite() => "inf".into(),
        Policy::Designed => format!("{}", cfg.limits.yd_max),
        other => other.to_string(),
    }
}

fn campaign_spectrum(cfg: &ExperimentConfig, campaign: &Campaign) -> Result<Option<Spectrum>, Error> {
    let records: Vec<Vec<f64>> = campaign
        .runs
        .iter()
        .filter(|r| !r.diverged())
        .map(|r| r.perturbations_after(cfg.warm_up))
        .filter(|d| d.len() >= DEFAULT_SEGMENT)
        .collect();
    if records.is_empty() {
        return Ok(None);
    }
    let slices: Vec<&[f64]> = records.iter().map(Vec::as_slice).collect();
    welch(&slices, DEFAULT_SEGMENT, cfg.sample_period).map(Some)
}

/// Runs and writes one campaign into `dir`.
fn campaign(cfg: &ExperimentConfig, dir: &Path, trajectories: bool) -> Result<(CampaignSummary, Campaign), Error> {
    let campaign = run_monte_carlo(cfg)?;
    write_metrics(&dir.join("metrics.csv"), &campaign.metrics)?;
    if trajectories {
        for (i, run) in campaign.runs.iter().enumerate() {
            write_trajectory(&dir.join(format!("trajectory_{i}.csv")), run)?;
        }
    }
    let summary = CampaignSummary::new(label(cfg), &campaign.metrics, &campaign.runs);
    write_summary(&dir.join("summary.txt"), std::slice::from_ref(&summary))?;
    eprintln!(
        "{}: steady E|delta| {:.4}, final mse {:.3e}, violations {:.3}, diverged {}/{}",
        summary.label,
        summary.steady_mean_abs_delta,
        summary.final_mse,
        summary.settled_violation_rate,
        summary.runs_diverged,
        summary.runs
    );
    Ok((summary, campaign))
}

fn check_divergence(summary: &CampaignSummary) -> Result<(), Failure> {
    if summary.runs_diverged * 2 > summary.runs {
        return Err(Failure::Diverged(format!(
            "{}: {} of {} runs diverged",
            summary.label, summary.runs_diverged, summary.runs
        )));
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            common,
            policy,
            yd_max,
            trajectories,
        } => {
            let mut cfg = common.load()?;
            if let Some(p) = policy {
                cfg.policy = p;
            }
            if let Some(y) = yd_max {
                cfg = cfg.with_yd_max(y);
            }
            cfg.validate()?;
            let dir = cfg.output_dir.clone();
            let (summary, camp) = campaign(&cfg, &dir, trajectories)?;
            if let Some(s) = campaign_spectrum(&cfg, &camp)? {
                write_spectra(&dir.join("spectrum.csv"), &[(summary.label.clone(), s)])?;
            }
            check_divergence(&summary)
        }
        Command::Sweep {
            common,
            yd_max,
            with_prbs,
        } => {
            let base = common.load()?;
            let mut configs: Vec<ExperimentConfig> = yd_max
                .iter()
                .map(|&y| base.clone().with_policy(Policy::Designed).with_yd_max(y))
                .collect();
            if with_prbs {
                configs.push(base.clone().with_policy(Policy::Prbs));
            }
            let mut summaries = Vec::new();
            let mut spectra = Vec::new();
            for cfg in &configs {
                cfg.validate()?;
                let dir = base.output_dir.join(format!("yd_{}", label(cfg)));
                let (summary, camp) = campaign(cfg, &dir, false)?;
                if let Some(s) = campaign_spectrum(cfg, &camp)? {
                    spectra.push((summary.label.clone(), s));
                }
                summaries.push(summary);
            }
            write_summary(&base.output_dir.join("summary.txt"), &summaries)?;
            write_spectra(&base.output_dir.join("spectrum.csv"), &spectra)?;
            summaries.iter().try_for_each(check_divergence)
        }
        Command::Sensitivity { config, horizon } => {
            let mut cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::default(),
            };
            if let Some(k) = horizon {
                cfg.horizon = k;
            }
            cfg.validate()?;
            let s = build_sensitivity(&cfg.model, &cfg.controller, cfg.horizon)?;
            print!("{}", sensitivity_csv(&s));
            let d_abs = cfg.limits.d_max.abs().max(cfg.limits.d_min.abs());
            eprintln!(
                "truncation bound beyond k={}: {:.6e}",
                cfg.horizon,
                truncation_bound(&s, d_abs, 20 * cfg.horizon.max(100))
            );
            Ok(())
        }
        Command::Spectrum {
            input,
            column,
            segment,
            dt,
            skip,
            out,
        } => {
            let data = read_csv_column(&input, &column)?;
            let data = data.get(skip..).unwrap_or(&[]);
            let s = welch(&[data], segment, dt)?;
            match out {
                Some(path) => write_spectra(&path, &[(column, s)])?,
                None => {
                    println!("freq_hz,power");
                    for (f, p) in s.freq_hz.iter().zip(&s.power) {
                        println!("{f:e},{p:e}");
                    }
                }
            }
            Ok(())
        }
        Command::Validate => {
            let results = validate::run_all();
            for r in &results {
                println!("{} {}: {}", if r.passed { "ok  " } else { "FAIL" }, r.name, r.detail);
            }
            if results.iter().all(|r| r.passed) {
                Ok(())
            } else {
                Err(Failure::Error(Error::InvalidArgument("validation failed".into())))
            }
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Diverged(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
