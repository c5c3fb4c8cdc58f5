use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use faberlab::experiment::{run_experiment, verify_table, ExperimentConfig, Meta, ResultTable};
use faberlab::{Error, Result};

#[derive(Parser)]
#[command(name = "faberlab", version, about = "Faber, weighted Faber and Chebyshev polynomial experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Recompute even when a cached table exists.
        #[arg(long)]
        no_cache: bool,
    },
    /// Print a results directory as an aligned table.
    Table { dir: PathBuf },
    /// Run a config and check the invariants of its task; exits with 2 on failure.
    Verify {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn load(path: &Path, output_dir: Option<PathBuf>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    Ok(cfg)
}

fn print_table(out: &mut impl Write, t: &ResultTable) -> io::Result<()> {
    let cells: Vec<Vec<String>> = t.rows.iter().map(|r| r.iter().map(|c| c.to_string()).collect()).collect();
    let widths: Vec<usize> = (0..t.columns.len())
        .map(|j| cells.iter().map(|r| r[j].len()).chain([t.columns[j].len()]).max().unwrap_or(0))
        .collect();
    let line = |r: &[String]| {
        r.iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    writeln!(out, "{}", line(&t.columns))?;
    for r in &cells {
        writeln!(out, "{}", line(r))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut stdout = io::stdout().lock();
    match cli.command {
        Command::Run {
            config,
            output_dir,
            no_cache,
        } => {
            let cfg = load(&config, output_dir)?;
            let out = run_experiment(&cfg, !no_cache)?;
            writeln!(
                stdout,
                "{} rows -> {} (key {}, {})",
                out.table.rows.len(),
                out.dir.join("results.csv").display(),
                &out.meta.cache_key[..12],
                if out.meta.cached { "cached" } else { "computed" }
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Table { dir } => {
            let table = ResultTable::read_csv(std::fs::File::open(dir.join("results.csv"))?)?;
            if let Ok(text) = std::fs::read_to_string(dir.join("meta.json")) {
                let meta: Meta = serde_json::from_str(&text)?;
                writeln!(stdout, "# task {:?}, key {}, version {}", meta.task, &meta.cache_key[..12], meta.version)?;
            }
            print_table(&mut stdout, &table)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { config, output_dir } => {
            let cfg = load(&config, output_dir)?;
            let out = run_experiment(&cfg, true)?;
            let checks = verify_table(&cfg, &out.table)?;
            let mut ok = true;
            for c in &checks {
                ok &= c.pass;
                let tag = if c.pass { "PASS" } else { "FAIL" };
                if c.detail.is_empty() {
                    writeln!(stdout, "{tag} {}", c.name)?;
                } else {
                    writeln!(stdout, "{tag} {} ({})", c.name, c.detail)?;
                }
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        // output piped into a reader that quit early
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
