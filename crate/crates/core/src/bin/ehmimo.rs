use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::info;

use ehmimo::anchors::{verify_anchors, AnchorSettings};
use ehmimo::config::{parse_config, SweepConfig};
use ehmimo::sweep::run_sweep;
use ehmimo::Error;

const EXIT_IO: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_ANCHOR: u8 = 4;

/// Rate and harvested-energy sweeps for a MIMO link sharing spectrum with a
/// cellular base station.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// Sweep configuration (`key = value` lines); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Run the anchor checks instead of a sweep.
    #[arg(long)]
    verify: bool,

    /// Override the Monte-Carlo trial count.
    #[arg(long)]
    trials: Option<usize>,

    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } => EXIT_PARSE,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_SOLVER,
    }
}

fn load(args: &Args) -> Result<SweepConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => parse_config(path)?,
        None => SweepConfig::default(),
    };
    if let Some(t) = args.trials {
        if t == 0 {
            return Err(Error::Parse {
                line: 0,
                field: "--trials".into(),
                message: "must be at least 1".into(),
            });
        }
        cfg.base.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.base.seed = s;
    }
    Ok(cfg)
}

fn run(args: &Args, stdout: &mut dyn Write) -> Result<u8, Error> {
    let cfg = load(args)?;
    let emit = |out: &mut dyn Write, text: &str| {
        out.write_all(text.as_bytes())
            .map_err(|e| Error::Io(format!("stdout: {e}")))
    };
    if args.verify {
        let settings = AnchorSettings {
            p: cfg.base.p,
            trials: cfg.base.trials,
            seed: cfg.base.seed,
        };
        info!("running anchor checks with {settings:?}");
        let report = verify_anchors(&settings);
        emit(stdout, &report.table())?;
        return Ok(if report.all_passed() { 0 } else { EXIT_ANCHOR });
    }
    // nothing is written until the whole sweep succeeded
    let csv = run_sweep(&cfg)?;
    match &args.out {
        Some(path) => std::fs::write(path, csv)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?,
        None => emit(stdout, &csv)?,
    }
    Ok(0)
}

/// Runs the command and returns the process exit status.
fn execute(args: &Args, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8 {
    match run(args, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let code = execute(&args, &mut std::io::stdout().lock(), &mut std::io::stderr());
    ExitCode::from(code)
}
