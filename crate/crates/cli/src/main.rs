//! Command-line runner for the price-formation experiments.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mfgprice::config::ExperimentConfig;
use mfgprice::experiment::{run_experiment, write_artifacts, Experiment};
use mfgprice::verify::{all_passed, report_json, run_checks, verify_config, Check};
use mfgprice::{Error, Execution};

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "mfgprice",
    version,
    about = "Price formation under common supply noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Run the built-in storage-target preset (alpha = 0, 0.1, 0.25, 0.5).
    Fig1,
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Run only the acceptance checks for a TOML config.
    Verify { config: PathBuf },
}

#[derive(Args)]
struct Overrides {
    /// Seed of the Brownian path (and of the initial holdings unless pinned).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Time step of the supply, price and particle simulation.
    #[arg(long, global = true, allow_negative_numbers = true)]
    dt_sde: Option<f64>,
    /// Number of simulated agents.
    #[arg(long, global = true)]
    particles: Option<usize>,
    /// Run the acceptance checks and exit with status 3 if any fails.
    #[arg(long, global = true)]
    strict: bool,
    /// Output directory.
    #[arg(long, global = true, env = "MFGPRICE_OUT")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

impl Overrides {
    fn apply(&self, mut config: ExperimentConfig) -> Result<ExperimentConfig, Error> {
        if let Some(seed) = self.seed {
            config = config.with_seed(seed);
        }
        if let Some(dt) = self.dt_sde {
            config.dt_sde = dt;
        }
        if let Some(n) = self.particles {
            config.particles = n;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.opts.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    }
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_VALIDATION
            })
        }
    }
}

fn execute(cli: &Cli) -> Result<ExitCode, Error> {
    let exec = Execution::Parallel;
    match &cli.command {
        Command::Fig1 => run(
            cli.opts.apply(ExperimentConfig::fig1())?,
            cli.opts.strict,
            exec,
        ),
        Command::Run { config } => run(
            cli.opts.apply(ExperimentConfig::load(config)?)?,
            cli.opts.strict,
            exec,
        ),
        Command::Verify { config } => {
            let config = cli.opts.apply(ExperimentConfig::load(config)?)?;
            let (_, checks) = verify_config(&config, exec)?;
            report(&config, &checks, cli.opts.strict)
        }
    }
}

fn run(config: ExperimentConfig, strict: bool, exec: Execution) -> Result<ExitCode, Error> {
    let start = Instant::now();
    let experiment = run_experiment(&config, exec)?;
    let elapsed = start.elapsed();
    let written = write_artifacts(&config.output_dir, &experiment.artifacts()?)?;
    print_summary(&experiment);
    println!(
        "wrote {} files to {}",
        written.len(),
        config.output_dir.display()
    );
    if strict {
        let checks = run_checks(&config, &experiment, elapsed, exec)?;
        report(&config, &checks, true)
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn print_summary(experiment: &Experiment) {
    for r in &experiment.runs {
        let t_stat = r
            .martingale
            .as_ref()
            .and_then(|m| m.t_stat)
            .map_or("n/a".to_string(), |t| format!("{t:.3}"));
        println!(
            "alpha {:<6} w_bar {:>10.6}  corr(Q, price) {:>7.4}  sup clearing {:.3e}  martingale t {}",
            r.alpha, r.rule.w_bar, r.correlation, r.clearing.sup, t_stat
        );
    }
    if let Some(d) = experiment.offset_deviation() {
        println!("offset deviation across alpha: {d:.3e}");
    }
}

fn report(config: &ExperimentConfig, checks: &[Check], strict: bool) -> Result<ExitCode, Error> {
    for c in checks {
        println!("{c}");
    }
    std::fs::create_dir_all(&config.output_dir)?;
    std::fs::write(
        config.output_dir.join("verification.json"),
        report_json(checks),
    )?;
    if strict && !all_passed(checks) {
        Ok(ExitCode::from(EXIT_ACCEPTANCE))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}
