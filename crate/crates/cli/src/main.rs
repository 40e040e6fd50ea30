//! Command-line driver for the purification experiments.
//!
//! Exit codes: 0 on success, 1 on usage or runtime errors, 2 when a
//! certificate check fails.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use purify_core::experiment::{self, parse_grid, Command, ExperimentConfig, NoiseKind, SetSpec, WORKERS_ENV};

const EXIT_USAGE: u8 = 1;
const EXIT_CERTIFICATE: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "purify",
    version,
    about = "Two-copy distributed purification: protocols, PPT bounds and no-go certificates",
    after_help = format!("Set {WORKERS_ENV} to bound the number of concurrent grid workers.")
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// State set: SB, Sd or alpha:a1,a2,...
    #[arg(long)]
    set: Option<String>,
    /// Noise grid as start:stop:step (inclusive) or a comma list.
    #[arg(long)]
    gamma_grid: Option<String>,
    /// Noise kind: global or bilocal.
    #[arg(long)]
    noise: Option<String>,
    /// Average success probability for the PPT bound and certificates.
    #[arg(long)]
    p_bar: Option<f64>,
    /// Output stem; writes <stem>.csv and <stem>.manifest.json.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Sigmoid steepness of the constraint penalty.
    #[arg(long)]
    penalty_a: Option<f64>,
    /// Finite-difference step.
    #[arg(long)]
    fd_step: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Penalize average success probability below this value.
    #[arg(long)]
    p_min: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Fidelity of a single noisy copy.
    Baseline(Common),
    /// The calibrated analytical two-copy protocol.
    Analytic(Common),
    /// Symmetric-subspace projection of noisy copies.
    Symmetric {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        copies: Option<usize>,
    },
    /// Train (or evaluate saved) variational protocols.
    Variational {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        train: TrainArgs,
        /// Evaluate a saved parameter file instead of training.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Upper bound from the PPT relaxation.
    PptBound(Common),
    /// Verify the all-pure-states no-go certificate.
    CertifyThm1 {
        #[command(flatten)]
        common: Common,
        /// Single noise level (shorthand for a one-point grid).
        #[arg(long, conflicts_with = "gamma_grid")]
        gamma: Option<f64>,
        /// Alternative G~ data file (`row col re im` per line).
        #[arg(long)]
        gtilde: Option<PathBuf>,
    },
    /// Verify the Bell-set no-go certificate.
    CertifyThm2 {
        #[command(flatten)]
        common: Common,
        /// Single noise level (shorthand for a one-point grid).
        #[arg(long, conflicts_with = "gamma_grid")]
        gamma_prime: Option<f64>,
    },
    /// Baseline, analytical, optimized and PPT-bound curves together.
    Figure3 {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Run the experiment described by a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse<T: std::str::FromStr<Err = purify_core::Error>>(s: &Option<String>) -> purify_core::Result<Option<T>> {
    s.as_deref().map(str::parse).transpose()
}

fn apply_common(config: &mut ExperimentConfig, c: &Common) -> purify_core::Result<()> {
    if let Some(set) = parse::<SetSpec>(&c.set)? {
        config.set = set;
    }
    if let Some(grid) = &c.gamma_grid {
        config.gamma_grid = parse_grid(grid)?;
    }
    if let Some(noise) = parse::<NoiseKind>(&c.noise)? {
        config.noise = noise;
    }
    if let Some(p) = c.p_bar {
        config.p_bar = p;
    }
    if let Some(o) = &c.output {
        config.output = Some(o.clone());
    }
    Ok(())
}

fn apply_train(config: &mut ExperimentConfig, t: &TrainArgs) {
    let o = &mut config.train;
    o.iterations = t.iterations.or(o.iterations);
    o.learning_rate = t.learning_rate.or(o.learning_rate);
    o.penalty_a = t.penalty_a.or(o.penalty_a);
    o.fd_step = t.fd_step.or(o.fd_step);
    o.seed = t.seed.or(o.seed);
    o.p_min = t.p_min.or(o.p_min);
}

fn base_config(command: Command, common: &Common) -> purify_core::Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => ExperimentConfig::new(command),
    };
    config.command = command;
    apply_common(&mut config, common)?;
    Ok(config)
}

fn build_config(cmd: &Cmd) -> purify_core::Result<ExperimentConfig> {
    Ok(match cmd {
        Cmd::Baseline(c) => base_config(Command::Baseline, c)?,
        Cmd::Analytic(c) => base_config(Command::Analytic, c)?,
        Cmd::PptBound(c) => base_config(Command::PptBound, c)?,
        Cmd::Symmetric { common, copies } => {
            let mut config = base_config(Command::Symmetric, common)?;
            config.copies = copies.unwrap_or(config.copies);
            config
        }
        Cmd::Variational { common, train, params } => {
            let mut config = base_config(Command::Variational, common)?;
            apply_train(&mut config, train);
            if params.is_some() {
                config.train.params_path = params.clone();
            }
            config
        }
        Cmd::CertifyThm1 { common, gamma, gtilde } => {
            let mut config = base_config(Command::CertifyThm1, common)?;
            if let Some(g) = gamma {
                config.gamma_grid = vec![*g];
            }
            if gtilde.is_some() {
                config.gtilde_path = gtilde.clone();
            }
            config
        }
        Cmd::CertifyThm2 { common, gamma_prime } => {
            let mut config = base_config(Command::CertifyThm2, common)?;
            if let Some(g) = gamma_prime {
                config.gamma_grid = vec![*g];
            }
            config
        }
        Cmd::Figure3 { common, train } => {
            let mut config = base_config(Command::Figure3, common)?;
            apply_train(&mut config, train);
            config
        }
        Cmd::Run { config } => ExperimentConfig::from_json_file(config)?,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = build_config(&cli.command).and_then(|config| experiment::run(&config));
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match outcome.result.to_csv() {
        Ok(csv) => print!("{csv}"),
        Err(e) => eprintln!("error: {e}"),
    }
    eprintln!("wrote {}", outcome.csv_path.display());
    eprintln!("wrote {}", outcome.manifest_path.display());
    for p in &outcome.params_paths {
        eprintln!("wrote {}", p.display());
    }
    for v in &outcome.result.ordering_violations {
        eprintln!("warning: ordering violated at {v}");
    }
    if let Some(rows) = outcome.result.certificates() {
        for r in rows {
            eprintln!(
                "gamma={} bound={} {}",
                r.gamma,
                r.bound,
                if r.passed { "PASS" } else { "FAIL" }
            );
        }
    }
    if outcome.result.certificates_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CERTIFICATE)
    }
}
