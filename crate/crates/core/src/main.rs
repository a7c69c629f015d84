use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vtrust::pipeline::{self, Overrides, PipelineError, RunConfig};
use vtrust::valuation::Pairing;

#[derive(Parser)]
#[command(name = "vtrust", version, about = "Value-driven online training-data selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select a subset, retrain on it and report metrics.
    Select(Common),
    /// Run `select` over a grid of lambdas and report the Pareto frontier.
    Sweep(Common),
    /// Grid-search the selection fraction, then bisect lambda against a threshold.
    Search(Common),
    /// Run the sampled-augmentation loop.
    Saug(Common),
    /// Run the synthetic oracle suites.
    OracleCheck(Common),
    /// Write the configured data splits as CSV.
    Datagen(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run config; defaults to a small synthetic biased dataset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    fraction: Option<f64>,
    /// af, ar, rf or accuracy
    #[arg(long)]
    pairing: Option<Pairing>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::synthetic(600, 4, 0.8),
        };
        cfg.apply(&Overrides {
            seed: self.seed,
            out_dir: self.out_dir.clone(),
            lambda: self.lambda,
            fraction: self.fraction,
            pairing: self.pairing,
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(command: &Command) -> Result<String, PipelineError> {
    let out = |id: &str, cfg: &RunConfig| cfg.out_dir.join(format!("{id}.json")).display().to_string();
    Ok(match command {
        Command::Select(c) => {
            let cfg = c.resolve()?;
            let r = pipeline::cmd_select(&cfg)?;
            format!(
                "{}: {} of {} rows selected (omega {}), er {:.4}\n{}",
                r.run_id,
                r.subset.len(),
                r.n_train,
                r.omega,
                r.metrics.er,
                out(&r.run_id, &cfg)
            )
        }
        Command::Sweep(c) => {
            let cfg = c.resolve()?;
            let r = pipeline::cmd_sweep(&cfg)?;
            let failed = r.runs.iter().filter(|x| x.error.is_some()).count();
            format!(
                "{}: {} lambdas, {} failed, {} on the frontier\n{}",
                r.run_id,
                r.runs.len(),
                failed,
                r.frontier.len(),
                out(&r.run_id, &cfg)
            )
        }
        Command::Search(c) => {
            let cfg = c.resolve()?;
            let r = pipeline::cmd_search(&cfg)?;
            format!(
                "{}: fraction {}, lambda {}, {} {:.4}, {} {:.4}{}\n{}",
                r.run_id,
                r.fraction,
                r.lambda,
                r.target_metric,
                r.first,
                r.second_metric,
                r.second,
                if r.non_monotone { " (non-monotone probes)" } else { "" },
                out(&r.run_id, &cfg)
            )
        }
        Command::Saug(c) => {
            let cfg = c.resolve()?;
            let r = pipeline::cmd_saug(&cfg)?;
            let first = r.history.first().map_or(0.0, |h| h.mean_ra);
            let last = r.history.last().map_or(0.0, |h| h.mean_ra);
            format!(
                "{}: {} rounds ({:?}), mean RA {:.4} -> {:.4}, {} rows\n{}",
                r.run_id,
                r.rounds_run(),
                r.stop,
                first,
                last,
                r.final_train_size,
                out(&r.run_id, &cfg)
            )
        }
        Command::OracleCheck(c) => {
            let cfg = c.resolve()?;
            let r = pipeline::cmd_oracle_check(&cfg)?;
            format!(
                "{}: degenerate gap {:.2e}, recovery {}/{} (omp {}/{}), theorem mismatches {}/{}, negative control {}/{}\n{}",
                r.run_id,
                r.degenerate.max_residual_gap,
                r.recovery.online_matches,
                r.recovery.cases.len(),
                r.recovery.omp_matches,
                r.recovery.cases.len(),
                r.theorem.mismatches,
                r.theorem.states,
                r.negative_control.mismatches,
                r.negative_control.states,
                out(&r.run_id, &cfg)
            )
        }
        Command::Datagen(c) => {
            let cfg = c.resolve()?;
            let r = pipeline::cmd_datagen(&cfg)?;
            format!("{}: {}", r.run_id, r.files.join(", "))
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
