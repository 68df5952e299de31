mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use towerfact::census::DEFAULT_SEGMENT_SIZE;
use towerfact::runs::{DEFAULT_BITS_BUDGET, DEFAULT_SCAN_BOUND};

use output::Format;

#[derive(Parser)]
#[command(name = "towerfact", version, about = "Tower factorizations, heights and height densities")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct GlobalOpts {
    /// Print a JSON envelope instead of text
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    /// Print CSV (census only)
    #[arg(long, global = true)]
    csv: bool,
    /// Print only the essential result
    #[arg(long, short, global = true)]
    quiet: bool,
    /// Worker threads (defaults to the available parallelism)
    #[arg(long, global = true, value_parser = parse_threads)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Canonical factorization of n
    Factor {
        #[arg(value_parser = parse_u64)]
        n: u64,
    },
    /// Tower factorization of n
    Tower {
        #[arg(value_parser = parse_u64)]
        n: u64,
    },
    /// Height h(n), the number of floors of the tower factorization
    Height {
        #[arg(value_parser = parse_u64)]
        n: u64,
    },
    /// Indicator of h(n) <= k
    Lambda {
        #[arg(long)]
        k: u32,
        #[arg(value_parser = parse_u64)]
        n: u64,
    },
    /// Count 1 <= n <= max by height
    Census {
        #[arg(long, value_parser = parse_u64)]
        max: u64,
        /// Report a single height
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_parser = parse_u64, default_value_t = DEFAULT_SEGMENT_SIZE)]
        segment: u64,
    },
    /// Certified density c_k of integers of height at most k
    Density {
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = 1e-12)]
        precision: f64,
        /// Density d_k of height exactly k instead
        #[arg(long)]
        exact: bool,
    },
    /// Certified average height
    Average {
        #[arg(long, default_value_t = 1e-12)]
        precision: f64,
    },
    /// Runs of consecutive integers of large height
    Run {
        #[command(subcommand)]
        action: RunAction,
    },
}

#[derive(Subcommand)]
enum RunAction {
    /// Build a run by the Chinese remainder theorem
    Construct {
        #[arg(long, value_parser = parse_u64)]
        length: u64,
        #[arg(long)]
        height: u32,
        /// Shift by this many periods
        #[arg(long, value_parser = parse_biguint, default_value = "0")]
        occurrence: BigUint,
        #[arg(long, env = "TOWER_BITS_BUDGET", value_parser = parse_u64, default_value_t = DEFAULT_BITS_BUDGET)]
        bits_budget: u64,
    },
    /// Find witnesses for a run, or re-check a certificate
    Verify {
        #[arg(long, value_parser = parse_biguint, required_unless_present = "certificate", requires_all = ["length", "height"])]
        n: Option<BigUint>,
        #[arg(long, value_parser = parse_u64)]
        length: Option<u64>,
        #[arg(long)]
        height: Option<u32>,
        /// Largest prime tried as a witness
        #[arg(long, value_parser = parse_u64, default_value_t = DEFAULT_SCAN_BOUND)]
        scan_bound: u64,
        /// Certificate JSON file, `-` for stdin
        #[arg(long, conflicts_with_all = ["n", "length", "height"])]
        certificate: Option<PathBuf>,
    },
    /// Smallest start of a run below a limit
    Search {
        #[arg(long, value_parser = parse_u64)]
        length: u64,
        #[arg(long)]
        height: u32,
        #[arg(long, value_parser = parse_u64)]
        limit: u64,
        #[arg(long, value_parser = parse_u64, default_value_t = DEFAULT_SEGMENT_SIZE)]
        segment: u64,
    },
}

fn digits(s: &str) -> Result<String, String> {
    let cleaned: String = s.chars().filter(|&c| c != '_').collect();
    if cleaned.is_empty() || !cleaned.bytes().all(|b| b.is_ascii_digit()) || s.starts_with('_') {
        return Err(format!("not a decimal integer: {s:?}"));
    }
    Ok(cleaned)
}

fn parse_u64(s: &str) -> Result<u64, String> {
    digits(s)?.parse().map_err(|_| format!("{s} does not fit in 64 bits"))
}

fn parse_biguint(s: &str) -> Result<BigUint, String> {
    digits(s)?.parse().map_err(|_| format!("not a decimal integer: {s:?}"))
}

fn parse_threads(s: &str) -> Result<usize, String> {
    match parse_u64(s)? {
        0 => Err("at least one thread is needed".into()),
        n => usize::try_from(n).map_err(|_| "too many threads".into()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let format = match (cli.global.json, cli.global.csv) {
        (true, _) => Format::Json,
        (_, true) => Format::Csv,
        _ => Format::Text,
    };
    if format == Format::Csv && !matches!(cli.command, Command::Census { .. }) {
        eprintln!("error: --csv is only available for census");
        return ExitCode::from(1);
    }
    if let Some(threads) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(4);
        }
    }
    let workers = cli.global.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));

    let started = std::time::Instant::now();
    let report = match cli.command {
        Command::Factor { n } => commands::factor(n),
        Command::Tower { n } => commands::tower(n),
        Command::Height { n } => commands::height(n),
        Command::Lambda { k, n } => commands::lambda(k, n),
        Command::Census { max, k, segment } => commands::census(max, k, segment, workers),
        Command::Density { k, precision, exact } => commands::density(k, precision, exact),
        Command::Average { precision } => commands::average(precision),
        Command::Run { action } => match action {
            RunAction::Construct { length, height, occurrence, bits_budget } => {
                commands::run_construct(length, height, &occurrence, bits_budget)
            }
            RunAction::Verify { n, length, height, scan_bound, certificate } => match (n, certificate) {
                (_, Some(path)) => commands::run_check(&path),
                (Some(n), None) => commands::run_verify(
                    &n,
                    length.expect("required by clap"),
                    height.expect("required by clap"),
                    scan_bound,
                ),
                (None, None) => unreachable!("clap requires --n or --certificate"),
            },
            RunAction::Search { length, height, limit, segment } => {
                commands::run_search(length, height, limit, segment, workers)
            }
        },
    };
    match report.and_then(|r| r.emit(format, cli.global.quiet, started.elapsed())) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.exit_code())
        }
    }
}
