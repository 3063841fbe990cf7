use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use jcam_core::experiment::{run_single, run_sweep, run_verify, ExperimentOutput, ExperimentSpec, RunOptions};
use jcam_core::{Error, Result};

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "jcam",
    version,
    about = "Cell-free JCAM simulator: AP mode assignment and closed-form checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One drop, every requested strategy.
    Single {
        #[command(flatten)]
        common: Common,
        /// Write each strategy's per-user report as `<strategy>.csv` here.
        #[arg(long)]
        reports: Option<PathBuf>,
    },
    /// Compare the closed forms with a Monte Carlo run; exits 1 if any
    /// mandatory term is off by more than `--tol`.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
    },
    /// Sweep one parameter over several drops per point.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; overrides `out` in the config. Standard output if
    /// neither is given.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Fill the runtime_ms column.
    #[arg(long)]
    timing: bool,
}

impl Common {
    fn load(&self) -> Result<ExperimentSpec> {
        let text = fs::read_to_string(&self.config).map_err(|source| Error::Io {
            path: self.config.clone(),
            source,
        })?;
        let mut spec = ExperimentSpec::parse(&text)?;
        if let Some(seed) = self.seed {
            spec.base.seed = seed;
        }
        if self.out.is_some() {
            spec.out = self.out.clone();
        }
        if let Some(jobs) = self.jobs {
            if jobs == 0 {
                return Err(Error::InvalidConfig("--jobs must be at least 1".into()));
            }
            // only fails if a pool already exists, which is never the case here
            let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
        }
        Ok(spec)
    }

    fn options(&self) -> RunOptions {
        RunOptions { timing: self.timing }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// CSV to the output path with the summary on stdout, or CSV on stdout and
/// the summary on stderr.
fn emit(out: Option<&Path>, csv: &str, summary: &str) -> Result<()> {
    match out {
        Some(path) => {
            write_file(path, csv)?;
            print!("{summary}");
        }
        None => {
            print!("{csv}");
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn emit_experiment(spec: &ExperimentSpec, output: &ExperimentOutput) -> Result<()> {
    emit(spec.out.as_deref(), &output.to_csv(), &output.summary_text())
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Single { common, reports } => {
            let spec = common.load()?;
            let output = run_single(&spec, common.options())?;
            if let Some(dir) = reports {
                fs::create_dir_all(&dir).map_err(|source| Error::Io {
                    path: dir.clone(),
                    source,
                })?;
                for row in &output.rows {
                    let path = dir.join(format!("{}.csv", row.strategy));
                    write_file(&path, &row.result.report.to_csv())?;
                }
            }
            emit_experiment(&spec, &output)?;
            Ok(0)
        }
        Command::Sweep { common } => {
            let spec = common.load()?;
            let output = run_sweep(&spec, common.options())?;
            emit_experiment(&spec, &output)?;
            Ok(0)
        }
        Command::Verify { common, trials, tol } => {
            let spec = common.load()?;
            let report = run_verify(&spec.base, trials, tol)?;
            let mut summary = format!(
                "{} terms, {} outside tolerance {tol} ({} trials)\n",
                report.rows.len(),
                report.discrepancies().count(),
                report.trials
            );
            for r in report.discrepancies() {
                summary.push_str(&format!(
                    "  {}[{}]: closed form {:.4e}, empirical {:.4e}, rel error {:.3}{}\n",
                    r.name,
                    r.index,
                    r.closed_form,
                    r.empirical,
                    r.rel_error,
                    if r.mandatory { "" } else { " (report only)" }
                ));
            }
            summary.push_str(if report.passed() { "PASS\n" } else { "FAIL\n" });
            emit(spec.out.as_deref(), &report.to_csv(), &summary)?;
            Ok(if report.passed() { 0 } else { EXIT_VERIFY_FAILED })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::InvalidConfig(_) | Error::Parse { .. } | Error::MissingKey(_) | Error::TooLarge(_) => {
                    EXIT_CONFIG
                }
                _ => EXIT_RUNTIME,
            };
            ExitCode::from(code)
        }
    }
}
