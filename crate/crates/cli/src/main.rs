use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use momentum_lab_cli::commands;
use momentum_lab_cli::config::{CertifySpec, Config};
use momentum_lab_cli::{exit, presets, CliError};

#[derive(Parser)]
#[command(
    name = "momentum-lab",
    version,
    about = "Momentum methods on quadratics: runs, energy traces and Lyapunov certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment and energy entry of a configuration.
    Run(Source),
    /// Run only the oscillator energy entries.
    Energy(Source),
    /// Certify HBr on a quadratic (defaults: worst case d = 50, r = 3, c = 1/2, h^2 = 2/L).
    Certify(CertifyArgs),
}

#[derive(Args)]
struct Source {
    /// TOML configuration file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset: fig1, fig2, fig3, fig4 or fig5.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write downsampled CSVs for plotting.
    #[arg(long)]
    plot_data: bool,
}

#[derive(Args)]
struct CertifyArgs {
    /// TOML file with a [certify] table.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; nothing is written when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    /// h^2 as a multiple of 1/L.
    #[arg(long, conflicts_with = "h2")]
    step: Option<f64>,
    /// Absolute h^2.
    #[arg(long)]
    h2: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
}

fn read_config(path: &PathBuf) -> Result<Config, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Config::parse(&text)
}

fn load(src: &Source) -> Result<Config, CliError> {
    match (&src.config, &src.preset) {
        (Some(path), _) => read_config(path),
        (None, Some(name)) => presets::load(name),
        (None, None) => Err(CliError::Config("pass --config or --preset".into())),
    }
}

fn main_inner(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Run(src) => {
            let cfg = load(&src)?;
            let report = commands::run(&cfg, &src.out, src.plot_data, src.preset.as_deref())?;
            for e in &report.experiments {
                for m in &e.methods {
                    let slope = m.slope.map_or(String::new(), |s| format!(", slope {s:.3}"));
                    println!(
                        "{}/{}: stable {}, final gap {:.3e}{slope}",
                        e.name, m.label, m.stable, m.final_gap
                    );
                }
            }
            for e in &report.energy {
                println!(
                    "{}: total-energy amplitude {:.6e}, modified drift {:.3e}",
                    e.name, e.total_amplitude, e.modified_drift
                );
            }
            let violations = report.violations();
            for v in &violations {
                println!("VIOLATION {v}");
            }
            Ok(if violations.is_empty() {
                exit::SUCCESS
            } else {
                exit::VIOLATION
            })
        }
        Command::Energy(src) => {
            let cfg = load(&src)?;
            for e in commands::energy(&cfg, &src.out, src.plot_data, src.preset.as_deref())? {
                println!(
                    "{}: total-energy amplitude {:.6e}, modified drift {:.3e}",
                    e.name, e.total_amplitude, e.modified_drift
                );
            }
            Ok(exit::SUCCESS)
        }
        Command::Certify(args) => {
            let mut spec = match &args.config {
                Some(path) => read_config(path)?.certify.ok_or_else(|| {
                    CliError::Config(format!("{}: no [certify] table", path.display()))
                })?,
                None => CertifySpec::default(),
            };
            if let Some(r) = args.r {
                spec.r = r;
            }
            if let Some(c) = args.c {
                spec.c = c;
            }
            if args.step.is_some() || args.h2.is_some() {
                spec.step = args.step;
                spec.h2 = args.h2;
            }
            if let Some(k) = args.iterations {
                spec.iterations = k;
            }
            let report = commands::certify(&spec, args.out.as_deref())?;
            println!(
                "lambda_max = {:.6e}, h^2 = {:.6e}, r = {}, c = {}",
                report.lambda_max, report.h2, spec.r, spec.c
            );
            for c in &report.checks {
                println!(
                    "{} {}: {}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            Ok(if report.passed() {
                exit::SUCCESS
            } else {
                exit::VIOLATION
            })
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("momentum-lab: {e}");
            ExitCode::from(exit::ERROR)
        }
    }
}
