//! `clk`: command-line front end for the kinetic boundary-kernel library.
//!
//! Every run resolves one RNG seed (`CLK_SEED` over `--seed` over the config
//! key over a built-in default), writes its artifacts as CSV with fixed
//! column order, and leaves a `manifest.txt` in the output directory on every
//! exit path. Exit codes: 0 success, 2 success with hypothesis warnings,
//! 1 error.

mod commands;
mod config;
mod emit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Ctx;
use config::{resolve_seed, ConfigErrors, RawConfig};
use emit::{config_hash, write_manifest, RunStatus};

#[derive(Parser)]
#[command(name = "clk", version, about = "Gas-surface scattering kernels, slab kinetics, and their checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Output directory for CSV artifacts and the run manifest.
    #[arg(long, default_value = "clk-out")]
    out: PathBuf,
    /// Run configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed; the CLK_SEED environment variable overrides this flag.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Re-run the closed-form and kernel property suites, print PASS/FAIL.
    Verify(CommonArgs),
    /// Tabulate an emitted-velocity density on the plot grid.
    KernelTable {
        #[command(flatten)]
        common: CommonArgs,
        /// Plot configuration, 1 through 4.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        which: u8,
    },
    /// Draw re-emitted velocities for one incident beam, one per line.
    SampleWall(CommonArgs),
    /// Monte Carlo beam-scattering mass maps plus gnuplot scripts.
    Figures {
        #[command(flatten)]
        common: CommonArgs,
        /// Plot configuration, 1 through 4.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        which: u8,
    },
    /// Free-molecular transient in a closed domain.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Worker threads for the particle loop.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Back-time wall-interaction survival table.
    Cycles(CommonArgs),
    /// Damped fixed-point iteration of the slab problem.
    SolveSlab(CommonArgs),
    /// Evaluate the well-posedness hypotheses and constants at one point.
    CheckTheorem {
        /// Reference (hottest wall) temperature.
        #[arg(long = "TM")]
        t_m: f64,
        /// Coolest wall temperature.
        #[arg(long = "minTw")]
        min_tw: f64,
        /// Normal-energy accommodation coefficient.
        #[arg(long = "rperp")]
        r_perp: f64,
        /// Tangential-momentum accommodation coefficient.
        #[arg(long = "rpar")]
        r_par: f64,
        /// Velocity-weight exponent.
        #[arg(long)]
        theta: f64,
        /// Ladder depth; requires --ladder-i.
        #[arg(long)]
        ladder_l: Option<u32>,
        /// Ladder rung, 1 through the depth; requires --ladder-l.
        #[arg(long)]
        ladder_i: Option<u32>,
        /// Output directory for the report row and the run manifest.
        #[arg(long, default_value = "clk-out")]
        out: PathBuf,
    },
}

/// Everything `execute` needs besides the command body itself.
struct Run {
    name: &'static str,
    out: PathBuf,
    seed_flag: Option<u64>,
    config: Option<PathBuf>,
    threads_flag: Option<usize>,
    which: Option<u8>,
    /// Extra canonical text folded into the config hash (flag-driven
    /// commands put their inputs here).
    extra: String,
}

impl Run {
    fn common(name: &'static str, c: CommonArgs) -> Run {
        Run {
            name,
            out: c.out,
            seed_flag: c.seed,
            config: c.config,
            threads_flag: None,
            which: None,
            extra: String::new(),
        }
    }
}

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_WARNING: u8 = 2;

fn exit_code(status: RunStatus) -> ExitCode {
    ExitCode::from(match status {
        RunStatus::Ok => EXIT_OK,
        RunStatus::Warning => EXIT_WARNING,
        RunStatus::Error => EXIT_ERROR,
    })
}

/// Shared run harness: loads the config, resolves seed and threads, hashes
/// the canonical input, runs the body, reports diagnostics, and writes the
/// manifest whatever happened.
fn execute(
    run: Run,
    body: impl FnOnce(&Ctx, &RawConfig, Vec<String>) -> anyhow::Result<RunStatus>,
) -> ExitCode {
    let loaded = match &run.config {
        Some(path) => match RawConfig::load(path) {
            Ok(pair) => Some(pair),
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                None
            }
        },
        None => Some((RawConfig::empty(), Vec::new())),
    };

    let (raw, parse_errors) = match loaded {
        Some(pair) => pair,
        None => {
            let seed = resolve_seed(run.seed_flag, None).unwrap_or(0);
            let threads = run.threads_flag.unwrap_or(1);
            let hash = config_hash(&format!("{}\nunreadable config", run.name));
            if let Err(e) = write_manifest(&run.out, run.name, seed, threads, hash, RunStatus::Error)
            {
                eprintln!("error: {e:#}");
            }
            return ExitCode::from(EXIT_ERROR);
        }
    };

    let threads = run
        .threads_flag
        .or_else(|| raw.peek_u64("threads").map(|t| t as usize))
        .unwrap_or(1);
    let seed = match resolve_seed(run.seed_flag, raw.peek_u64("seed")) {
        Ok(s) => s,
        Err(message) => {
            eprintln!("error: {message}");
            let hash = config_hash(&format!("{}\nbad seed", run.name));
            if let Err(e) = write_manifest(&run.out, run.name, 0, threads, hash, RunStatus::Error) {
                eprintln!("error: {e:#}");
            }
            return ExitCode::from(EXIT_ERROR);
        }
    };

    let which = run.which.map(|w| w.to_string()).unwrap_or_default();
    let canonical = format!(
        "{}\nwhich={which}\nseed={seed}\nthreads={threads}\n{}\n{}",
        run.name, run.extra, raw.source
    );
    let hash = config_hash(&canonical);

    let ctx = Ctx { out_dir: &run.out, seed, threads };
    let result = body(&ctx, &raw, parse_errors);
    let status = match &result {
        Ok(s) => *s,
        Err(_) => RunStatus::Error,
    };
    if let Err(e) = &result {
        match e.downcast_ref::<ConfigErrors>() {
            Some(ce) => {
                eprintln!("configuration rejected:");
                for line in &ce.0 {
                    eprintln!("  {line}");
                }
            }
            None => eprintln!("error: {e:#}"),
        }
    }
    if let Err(e) = write_manifest(&run.out, run.name, seed, threads, hash, status) {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_ERROR);
    }
    exit_code(status)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version go to stdout and exit clean; usage errors
            // exit 1 (2 is reserved for hypothesis warnings)
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    match cli.command {
        Command::Verify(c) => execute(Run::common("verify", c), commands::verify),
        Command::KernelTable { common, which } => {
            let mut run = Run::common("kernel-table", common);
            run.which = Some(which);
            execute(run, move |ctx, raw, prior| commands::kernel_table(ctx, raw, prior, which))
        }
        Command::SampleWall(c) => execute(Run::common("sample-wall", c), commands::sample_wall),
        Command::Figures { common, which } => {
            let mut run = Run::common("figures", common);
            run.which = Some(which);
            execute(run, move |ctx, raw, prior| commands::figures(ctx, raw, prior, which))
        }
        Command::Simulate { common, threads } => {
            let mut run = Run::common("simulate", common);
            run.threads_flag = threads;
            execute(run, commands::simulate)
        }
        Command::Cycles(c) => execute(Run::common("cycles", c), commands::cycles),
        Command::SolveSlab(c) => execute(Run::common("solve-slab", c), commands::solve_slab),
        Command::CheckTheorem { t_m, min_tw, r_perp, r_par, theta, ladder_l, ladder_i, out } => {
            let run = Run {
                name: "check-theorem",
                out,
                seed_flag: None,
                config: None,
                threads_flag: None,
                which: None,
                extra: format!(
                    "TM={t_m} minTw={min_tw} rperp={r_perp} rpar={r_par} theta={theta} \
                     ladder={ladder_l:?}/{ladder_i:?}"
                ),
            };
            execute(run, move |ctx, _raw, _prior| {
                let ladder = match (ladder_l, ladder_i) {
                    (Some(l), Some(i)) => Some((l, i)),
                    (None, None) => None,
                    _ => anyhow::bail!("--ladder-l and --ladder-i must be given together"),
                };
                commands::check_theorem(ctx, t_m, min_tw, r_perp, r_par, theta, ladder)
            })
        }
    }
}
