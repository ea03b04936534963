//! `incseq`: experiments on increasing subsequences of random permutations.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use incseq::Error;

use commands::{LlnArgs, TvChoice, WalkArgs};
use output::{Format, RunInfo};

const EXIT_BUDGET: u8 = 2;
const EXIT_VIOLATION: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_IO: u8 = 74;

#[derive(Parser)]
#[command(name = "incseq", version, about = "Exact and Monte Carlo experiments on increasing subsequences")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Master seed; every random job derives its own stream from it.
    #[arg(long, global = true, default_value_t = 0, env = "INCSEQ_SEED")]
    seed: u64,
    /// Result file. Defaults to $INCSEQ_OUTPUT_DIR/<command>.<ext>, else stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Lift the size budgets on exact computations.
    #[arg(long, global = true)]
    force: bool,
    /// Record the wall-clock time in the result file (breaks byte-identical reruns).
    #[arg(long, global = true)]
    stamp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Exact first and second moments of Z_{n,k}.
    Moments {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
    },
    /// Exact Var/(E Z)^2 for k = floor(n^exponent) over a list of n.
    VarianceScan {
        #[arg(long)]
        exponent: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
    },
    /// Monte Carlo estimate of P(|Z/EZ - 1| > eps) under the uniform measure.
    Lln {
        #[arg(long)]
        n: usize,
        #[arg(long, conflicts_with = "exponent", required_unless_present = "exponent")]
        k: Option<usize>,
        #[arg(long)]
        exponent: Option<f64>,
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
    },
    /// Total variation distance between the size-biased measure and the uniform one.
    Tv {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, value_enum, default_value_t = TvChoice::Auto)]
        mode: TvChoice,
    },
    /// Exact return probabilities of the lazy, simple and planar walks against their envelopes.
    WalkCheck {
        #[arg(long, default_value_t = 200)]
        n_max: usize,
        #[arg(long, default_value_t = 2000)]
        band_max: usize,
        #[arg(long, default_value_t = 1.0)]
        l: f64,
        #[arg(long, default_value_t = 0.25)]
        c2: f64,
        #[arg(long, default_value_t = 2.0)]
        c_l2: f64,
    },
    /// Exact bridge identities and the formula-versus-enumeration check.
    IdentityCheck {
        #[arg(long = "N", alias = "n-max", default_value_t = 6)]
        n_max: usize,
        #[arg(long, default_value_t = 4)]
        jmax: usize,
    },
    /// Exceedance probabilities over a grid of exponents and sizes.
    ExponentScan {
        #[arg(long, value_delimiter = ',', required = true)]
        l_list: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        #[arg(long, default_value_t = 2_000)]
        samples: u64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Moments { .. } => "moments",
            Command::VarianceScan { .. } => "variance-scan",
            Command::Lln { .. } => "lln",
            Command::Tv { .. } => "tv",
            Command::WalkCheck { .. } => "walk-check",
            Command::IdentityCheck { .. } => "identity-check",
            Command::ExponentScan { .. } => "exponent-scan",
        }
    }
}

fn run(command: &Command, global: &Global) -> commands::CmdResult {
    let seed = global.seed;
    match command {
        Command::Moments { n, k } => commands::moments(*n, *k, global.force),
        Command::VarianceScan { exponent, n_list } => commands::variance_scan_cmd(*exponent, n_list, global.force),
        Command::Lln { n, k, exponent, eps, samples } => commands::lln(&LlnArgs {
            n: *n,
            k: *k,
            exponent: *exponent,
            epsilon: *eps,
            samples: *samples,
            seed,
        }),
        Command::Tv { n, k, samples, mode } => commands::tv(*n, *k, *mode, *samples, seed),
        Command::WalkCheck { n_max, band_max, l, c2, c_l2 } => commands::walk_check(&WalkArgs {
            n_max: *n_max,
            band_max: *band_max,
            l: *l,
            c2: *c2,
            c_l2: *c_l2,
        }),
        Command::IdentityCheck { n_max, jmax } => commands::identity_check(*n_max, *jmax),
        Command::ExponentScan { l_list, n_list, eps, samples } => {
            commands::exponent_scan_cmd(l_list, n_list, *eps, *samples, seed)
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Budget { .. } => EXIT_BUDGET,
        Error::Inconsistent(_) => EXIT_VIOLATION,
        Error::Domain(_) | Error::Parse(_) => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if cli.global.threads > 0 {
        if let Err(err) = rayon::ThreadPoolBuilder::new().num_threads(cli.global.threads).build_global() {
            eprintln!("incseq: cannot start thread pool: {err}");
            return ExitCode::from(EXIT_USAGE);
        }
    }

    let name = cli.command.name();
    let started = Instant::now();
    let artifact = match run(&cli.command, &cli.global) {
        Ok(a) => a,
        Err(err) => {
            eprintln!("incseq {name}: {err}");
            if matches!(err, Error::Budget { .. }) {
                eprintln!("incseq {name}: rerun with --force to lift the budget");
            }
            return ExitCode::from(exit_code(&err));
        }
    };
    let elapsed = started.elapsed();

    let info = RunInfo {
        command: name,
        seed: cli.global.seed,
        wall_clock: cli.global.stamp.then_some(elapsed),
    };
    let text = output::render(&artifact, cli.global.format, &info);
    let dest = output::destination(cli.global.output.as_deref(), name, cli.global.format);
    if let Err(err) = output::write(dest.as_deref(), &text) {
        eprintln!("incseq {name}: cannot write output: {err}");
        return ExitCode::from(EXIT_IO);
    }

    let summary = format!("{} [{:.3}s]", artifact.summary, elapsed.as_secs_f64());
    match &dest {
        Some(path) => println!("{summary} -> {}", path.display()),
        None => eprintln!("{summary}"),
    }
    if let Some(problem) = &artifact.violation {
        eprintln!("incseq {name}: invariant violated: {problem}");
        return ExitCode::from(EXIT_VIOLATION);
    }
    ExitCode::SUCCESS
}
