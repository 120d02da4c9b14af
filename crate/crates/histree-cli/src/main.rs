//! `histree`: run anonymous-network experiments and verification suites.
//!
//! Two subcommands. `run` executes one experiment from a JSON config and
//! streams per-round records plus a final summary as JSON lines; `verify`
//! executes a named property suite over a seeded grid of experiments.
//!
//! Exit codes: 0 on success, 1 when a verification suite (or a checked run)
//! finds a violation, 2 on usage or configuration errors. Stabilizing later
//! than the theoretical bound is reported in the summary, never as a
//! failing exit: slow runs are data, broken configs are errors.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use histree::netsim::{
    run_with_options, DotRequest, DotSnapshot, DotTarget, ExperimentConfig, HorizonSpec,
    RunOptions,
};
use histree::verify::{run_suite, Suite, SuiteParams, ALL_SUITES};

#[derive(Parser)]
#[command(name = "histree", version, about = "History-tree network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a JSON config file.
    Run(RunArgs),
    /// Run a named verification suite over a grid of experiments.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the experiment config (JSON; unknown keys are rejected).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's horizon: a round count, or "auto" for twice
    /// the theoretical stabilization bound.
    #[arg(long)]
    horizon: Option<String>,
    /// Write records and summary to this file instead of standard output
    /// (overrides the config's own `out`, if any).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Export a DOT snapshot at ROUND of one agent's view (`12,3`) or of
    /// the collective tree (`12,collective`). Repeatable. Snapshots are
    /// written as .dot files next to the output file, or into the current
    /// directory when streaming to standard output.
    #[arg(long = "dot-at", value_name = "ROUND,AGENT|collective")]
    dot_at: Vec<String>,
    /// Worker threads for the per-round agent steps (results are identical
    /// for any worker count).
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Keep standard output to the summary line at most: omit per-round
    /// records, and with an output file omit the summary echo too.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite name; pass an unknown name to see the list.
    suite: String,
    /// Population range to sweep, inclusive (e.g. 2..6).
    #[arg(long, value_name = "LO..HI")]
    n: Option<String>,
    /// Seeds per grid point.
    #[arg(long)]
    seeds: Option<u64>,
    /// Print only the verdict line.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(&args),
        Command::Verify(args) => cmd_verify(&args),
    }
}

/// Usage/config failure: diagnostic on standard error, exit code 2.
fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn cmd_run(args: &RunArgs) -> ExitCode {
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return usage_error(&format!("reading {}: {e}", args.config.display())),
    };
    let mut config = match ExperimentConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => return usage_error(&format!("in {}: {e}", args.config.display())),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(h) = &args.horizon {
        config.horizon = match h.as_str() {
            "auto" => HorizonSpec::Auto,
            other => match other.parse::<u64>() {
                Ok(rounds) => HorizonSpec::Rounds(rounds),
                Err(_) => return usage_error(&format!("bad --horizon {other:?}: want a round count or \"auto\"")),
            },
        };
    }
    let mut opts = RunOptions { workers: args.workers, ..RunOptions::default() };
    for spec in &args.dot_at {
        match parse_dot_request(spec) {
            Ok(req) => opts.dot_at.push(req),
            Err(e) => return usage_error(&e),
        }
    }

    let artifacts = match run_with_options(&config, &opts) {
        Ok(a) => a,
        Err(e) => return usage_error(&e.to_string()),
    };

    let out_path = args.out.clone().or_else(|| config.out.clone().map(PathBuf::from));
    let write_result = match &out_path {
        Some(path) => {
            let file = match fs::File::create(path) {
                Ok(f) => f,
                Err(e) => return usage_error(&format!("creating {}: {e}", path.display())),
            };
            // The artifact file always gets the full stream; --quiet only
            // silences the standard-output echo of the verdict.
            let mut w = BufWriter::new(file);
            let r = write_stream(&mut w, &artifacts, false);
            if r.is_ok() && !args.quiet {
                println!("{}", serde_json::json!({ "summary": &artifacts.summary }));
            }
            r
        }
        None => write_stream(&mut io::stdout().lock(), &artifacts, args.quiet),
    };
    if let Err(e) = write_result {
        return usage_error(&format!("writing records: {e}"));
    }
    if let Err(e) = write_dots(&artifacts.dots, out_path.as_deref()) {
        return usage_error(&format!("writing DOT snapshot: {e}"));
    }

    if artifacts.summary.check_violations.is_empty() {
        ExitCode::SUCCESS
    } else {
        for v in &artifacts.summary.check_violations {
            eprintln!("check violation: {v}");
        }
        ExitCode::from(1)
    }
}

/// One JSON line per round record, then one `{"summary": ...}` line.
fn write_stream(
    w: &mut dyn Write,
    artifacts: &histree::netsim::RunArtifacts,
    quiet: bool,
) -> io::Result<()> {
    if !quiet {
        for rec in &artifacts.records {
            serde_json::to_writer(&mut *w, rec)?;
            writeln!(w)?;
        }
    }
    serde_json::to_writer(&mut *w, &serde_json::json!({ "summary": &artifacts.summary }))?;
    writeln!(w)?;
    w.flush()
}

fn parse_dot_request(spec: &str) -> Result<DotRequest, String> {
    let bad = || format!("bad --dot-at {spec:?}: want ROUND,AGENT or ROUND,collective");
    let (round, target) = spec.split_once(',').ok_or_else(bad)?;
    let round: u64 = round.trim().parse().map_err(|_| bad())?;
    let target = match target.trim() {
        "collective" => DotTarget::Collective,
        agent => DotTarget::Agent(agent.parse().map_err(|_| bad())?),
    };
    Ok(DotRequest { round, target })
}

/// Snapshots land next to the record file (sharing its stem), or in the
/// working directory when records go to standard output.
fn write_dots(dots: &[DotSnapshot], out_path: Option<&Path>) -> io::Result<()> {
    for snap in dots {
        let target = match snap.target {
            DotTarget::Agent(p) => format!("agent{p}"),
            DotTarget::Collective => "collective".to_string(),
        };
        let name = format!("r{}-{target}.dot", snap.round);
        let path = match out_path {
            Some(out) => {
                let stem = out.file_stem().unwrap_or_default().to_string_lossy();
                out.with_file_name(format!("{stem}-{name}"))
            }
            None => PathBuf::from(name),
        };
        fs::write(path, &snap.dot)?;
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> ExitCode {
    let Some(suite) = Suite::from_name(&args.suite) else {
        let names: Vec<&str> = ALL_SUITES.iter().map(|s| s.name()).collect();
        return usage_error(&format!(
            "unknown suite {:?}; expected one of {}",
            args.suite,
            names.join(", ")
        ));
    };
    let mut params: SuiteParams = suite.default_params();
    if let Some(range) = &args.n {
        match parse_inclusive_range(range) {
            Ok((lo, hi)) => {
                params.n_lo = lo;
                params.n_hi = hi;
            }
            Err(e) => return usage_error(&e),
        }
    }
    if let Some(seeds) = args.seeds {
        if seeds == 0 {
            return usage_error("--seeds must be at least 1");
        }
        params.seeds = seeds;
    }

    let outcome = run_suite(suite, params);
    if !args.quiet {
        for note in &outcome.notes {
            println!("note: {note}");
        }
        for v in &outcome.violations {
            println!("violation: {}", v.description);
        }
    }
    println!(
        "{}: {} cases, {} violations",
        suite,
        outcome.cases,
        outcome.violations.len()
    );
    if outcome.passed() {
        return ExitCode::SUCCESS;
    }
    // The grid runs smallest-first, so the first violation is already the
    // smallest reproduction available.
    if let Some(repro) = outcome.violations.iter().find_map(|v| v.repro.as_ref()) {
        println!(
            "reproduce with: histree run --config <file> where <file> contains:"
        );
        println!(
            "{}",
            serde_json::to_string_pretty(repro).expect("config serializes")
        );
    }
    ExitCode::from(1)
}

fn parse_inclusive_range(s: &str) -> Result<(usize, usize), String> {
    let bad = || format!("bad --n {s:?}: want LO..HI with 2 <= LO <= HI");
    let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().strip_prefix('=').unwrap_or(hi.trim()).trim().parse().map_err(|_| bad())?;
    if lo < 2 || lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}
