use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mbl_entangle::runner::{
    emit_profiles, ge_hist, run_ensemble, validate_fixtures, write_histogram_csv, write_profiles_csv, RunConfig,
};
use mbl_entangle::scaling::{
    derivative_curves, grid_search_collapse, load_curves, write_curves_csv, CollapseGrid, Indicator,
};
use mbl_entangle::Error;

/// Entanglement indicators of many-body localization in disordered spin chains.
#[derive(Parser, Debug)]
#[command(name = "mblent", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a disorder ensemble and write records and averaged curves.
    Run(RunArgs),
    /// Run an ensemble with distance-resolved C(d) and N(d) profiles.
    Profiles(RunArgs),
    /// Compare geometric-entanglement distributions of ED and SIMPS states.
    GeHist {
        /// ED realizations (defaults to the configured count).
        #[arg(long)]
        ed_realizations: Option<usize>,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Grid-search a finite-size scaling collapse over curves.csv files.
    Collapse {
        /// curves.csv files, one or more sizes each.
        #[arg(long, required = true, num_args = 1..)]
        curves: Vec<PathBuf>,
        /// Grid such as `a=0.3:0.7:0.1,b=0.4:0.8:0.1,wc=3:4.5:0.1`.
        #[arg(long)]
        grid: String,
        #[arg(long, default_value = "C_avg_nn")]
        indicator: String,
        /// Derivative order; 1 for S_G and 2 otherwise when omitted.
        #[arg(long)]
        order: Option<usize>,
        /// Largest polynomial degree considered when smoothing.
        #[arg(long, default_value_t = 12)]
        m_max: usize,
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run the analytic fixture suite.
    Validate,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Plain `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Any configuration key as `--key value`, e.g. `--length 10 --w-list 1:6:1`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::UnknownKey(_)
            | Error::InvalidSpec(_)
            | Error::File { .. }
            | Error::EmptyGrid
            | Error::DimensionCap { .. } => Failure::Validation(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Pulls `--name value` / `--name=value` out of the trailing overrides, which
/// swallow everything after the first unrecognised flag.
fn take_flag(args: &mut Vec<String>, name: &str) -> Result<Option<String>, Failure> {
    let flag = format!("--{name}");
    let prefix = format!("{flag}=");
    let mut found = None;
    let mut i = 0;
    while i < args.len() {
        if args[i] == flag {
            if i + 1 >= args.len() {
                return Err(Failure::Validation(format!("{flag} needs a value")));
            }
            found = Some(args.remove(i + 1));
            args.remove(i);
        } else if let Some(v) = args[i].strip_prefix(&prefix) {
            found = Some(v.to_string());
            args.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(found)
}

fn parse_usize(flag: &str, v: &str) -> Result<usize, Failure> {
    v.parse()
        .map_err(|_| Failure::Validation(format!("--{flag} expects a nonnegative integer, got `{v}`")))
}

fn load_config(args: RunArgs) -> Result<RunConfig, Failure> {
    let mut rest = args.overrides;
    let path = match take_flag(&mut rest, "config")? {
        Some(p) => Some(PathBuf::from(p)),
        None => args.config,
    };
    let mut cfg = match path {
        Some(p) => RunConfig::load(&p)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&rest)?;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cfg: RunConfig) -> Result<(), Failure> {
    let out = run_ensemble(&cfg)?;
    eprintln!("{} records, {} rejected SIMPS states", out.records.len(), out.rejected);
    if cfg.out_dir.is_none() {
        if cfg.verbose {
            for line in &out.logs {
                eprintln!("{line}");
            }
        }
        write_curves_csv(io::stdout().lock(), &out.curves)?;
    }
    Ok(())
}

fn profiles(cfg: RunConfig) -> Result<(), Failure> {
    let profiles = emit_profiles(&cfg)?;
    if cfg.out_dir.is_none() {
        write_profiles_csv(io::stdout().lock(), &profiles)?;
    }
    Ok(())
}

fn histogram(cfg: RunConfig, ed_realizations: Option<usize>, bins: usize) -> Result<(), Failure> {
    let h = ge_hist(&cfg, ed_realizations, bins)?;
    eprintln!(
        "KS = {:.4} over {} ED and {} SIMPS states ({} rejected)",
        h.ks,
        h.ed.len(),
        h.simps.len(),
        h.simps_rejected
    );
    if cfg.out_dir.is_none() {
        write_histogram_csv(io::stdout().lock(), &h.bins)?;
    }
    Ok(())
}

fn collapse(
    paths: &[PathBuf],
    grid: &str,
    indicator: &str,
    order: Option<usize>,
    m_max: usize,
    top: usize,
    seed: u64,
) -> Result<(), Failure> {
    let indicator =
        Indicator::parse(indicator).ok_or_else(|| Failure::Validation(format!("unknown indicator `{indicator}`")))?;
    let order = order.unwrap_or(if indicator == Indicator::SG { 1 } else { 2 });
    let grid = CollapseGrid::parse(grid)?;
    let mut curves = Vec::new();
    for p in paths {
        curves.extend(load_curves(p)?.into_iter().filter(|c| c.indicator == indicator));
    }
    curves.sort_by_key(|c| c.length);
    if curves.len() < 2 || curves.windows(2).any(|w| w[0].length == w[1].length) {
        return Err(Failure::Validation(format!(
            "collapse needs one {} curve per size and at least two sizes",
            indicator.name()
        )));
    }
    let derived = derivative_curves(&curves, order, m_max, seed)?;
    let ranked = grid_search_collapse(&derived, &grid, order)?;
    let mut out = io::stdout().lock();
    writeln!(out, "{:>4} {:>8} {:>8} {:>8} {:>12}", "rank", "a", "b", "wc", "quality")?;
    for (k, r) in ranked.iter().take(top).enumerate() {
        writeln!(
            out,
            "{:>4} {:>8.4} {:>8.4} {:>8.4} {:>12.6e}",
            k + 1,
            r.params.a,
            r.params.b,
            r.params.wc,
            r.quality
        )?;
    }
    Ok(())
}

fn validate() -> Result<(), Failure> {
    let checks = validate_fixtures();
    let mut out = io::stdout().lock();
    for c in &checks {
        writeln!(
            out,
            "[{}] {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        )?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} fixture checks failed")));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => run(load_config(args)?),
        Command::Profiles(args) => profiles(load_config(args)?),
        Command::GeHist {
            ed_realizations,
            bins,
            mut run,
        } => {
            let ed_realizations = match take_flag(&mut run.overrides, "ed-realizations")? {
                Some(v) => Some(parse_usize("ed-realizations", &v)?),
                None => ed_realizations,
            };
            let bins = match take_flag(&mut run.overrides, "bins")? {
                Some(v) => parse_usize("bins", &v)?,
                None => bins,
            };
            histogram(load_config(run)?, ed_realizations, bins)
        }
        Command::Collapse {
            curves,
            grid,
            indicator,
            order,
            m_max,
            top,
            seed,
        } => collapse(&curves, &grid, &indicator, order, m_max, top, seed),
        Command::Validate => validate(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
