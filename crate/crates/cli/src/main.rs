use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use qosa_cli::config::{resolve, Command, Settings};
use qosa_cli::output::{write_gnuplot, write_results, Abscissa};
use qosa_cli::runner::run;
use qosa_cli::validate::{run_validation, Suite};

#[derive(Parser)]
#[command(name = "qosa", version, about = "Quantile-oriented sensitivity analysis: closed forms, estimates and sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-form indices at one or a few levels.
    Analytic(RunArgs),
    /// Monte Carlo estimates with standard errors.
    Estimate(RunArgs),
    /// Indices over a quantile-level grid.
    SweepAlpha(RunArgs),
    /// Indices over a correlation grid (two-input Gaussian models).
    SweepRho(RunArgs),
    /// Run the property suite and print a JSON report.
    Validate {
        #[arg(long, value_enum, default_value = "fast")]
        suite: Suite,
        #[arg(long, env = qosa_cli::config::SEED_ENV, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn thread_pool(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
    }
    Ok(())
}

fn output(out: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn sweep(command: Command, args: RunArgs) -> Result<()> {
    let r = resolve(command, args.settings, args.config.as_deref())?;
    thread_pool(r.threads)?;
    let rows = run(&r.run)?;
    let config = serde_json::to_value(&r.effective)?;
    let mut out = output(r.out.as_ref())?;
    write_results(&mut out, &rows, &config, r.format)?;
    out.flush()?;
    if let Some(dir) = &r.gnuplot {
        let x = if command == Command::SweepRho { Abscissa::Rho } else { Abscissa::Alpha };
        write_gnuplot(dir, &rows, x)?;
    }
    Ok(())
}

fn broken_pipe(e: &(dyn std::error::Error + 'static)) -> bool {
    use std::io::ErrorKind::BrokenPipe;
    if let Some(io) = e.downcast_ref::<std::io::Error>() {
        return io.kind() == BrokenPipe;
    }
    if let Some(j) = e.downcast_ref::<serde_json::Error>() {
        return j.io_error_kind() == Some(BrokenPipe);
    }
    matches!(e.downcast_ref::<csv::Error>().map(csv::Error::kind), Some(csv::ErrorKind::Io(io)) if io.kind() == BrokenPipe)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Analytic(a) => sweep(Command::Analytic, a),
        Cmd::Estimate(a) => sweep(Command::Estimate, a),
        Cmd::SweepAlpha(a) => sweep(Command::SweepAlpha, a),
        Cmd::SweepRho(a) => sweep(Command::SweepRho, a),
        Cmd::Validate { suite, seed, threads, out } => (|| {
            thread_pool(threads)?;
            let report = run_validation(suite, seed);
            let mut w = output(out.as_ref())?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
            w.flush()?;
            for c in report.checks.iter().filter(|c| !c.passed) {
                eprintln!("FAIL {}: measured {} ({})", c.name, c.measured, c.note);
            }
            if report.passed {
                Ok(())
            } else {
                Err(anyhow::anyhow!("validation failed"))
            }
        })(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // reader went away, e.g. `| head`
        Err(e) if e.chain().any(broken_pipe) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
