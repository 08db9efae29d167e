use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use frde::harness::{
    self, admit, builtin_scenario, load_scenario, OutputFormat, Overrides, RunOptions, RunTrace,
    Scenario,
};
use frde::{params, FrdeError};

#[derive(Parser)]
#[command(
    name = "frde",
    version,
    about = "Simulate flag-raising distributed estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Summary,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Summary => OutputFormat::Summary,
        }
    }
}

#[derive(clap::Args)]
struct OutputArgs {
    /// Override the number of rounds.
    #[arg(long)]
    rounds: Option<usize>,
    /// Write into this directory instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Add per-agent error and flag columns to the CSV.
    #[arg(long)]
    per_agent: bool,
    /// Evaluate agents on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run one of the built-in reference experiments.
    Builtin {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(harness::BUILTIN_NAMES))]
        name: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Print the step sizes and spectral quantities of a scenario.
    Params { scenario: PathBuf },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<FrdeError>() {
        Some(FrdeError::ScenarioRejected { .. }) => 2,
        Some(FrdeError::EnvelopeViolation { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Run {
            scenario,
            seed,
            output,
        } => {
            let overrides = Overrides {
                seed,
                rounds: output.rounds,
            };
            let s = load_scenario(&scenario, overrides)?;
            simulate(&s, &output)
        }
        Command::Builtin { name, seed, output } => {
            let mut s = builtin_scenario(&name, seed)?;
            if let Some(r) = output.rounds {
                s.rounds = r;
            }
            simulate(&s, &output)
        }
        Command::Params { scenario } => {
            let s = load_scenario(&scenario, Overrides::default())?;
            report_params(&s, &mut io::stdout().lock())
        }
    }
}

fn simulate(s: &Scenario, output: &OutputArgs) -> anyhow::Result<()> {
    let opts = RunOptions {
        exec: if output.sequential {
            frde::ExecMode::Sequential
        } else {
            frde::ExecMode::default()
        },
        ..RunOptions::default()
    };
    let trace = harness::run(s, &opts)?;
    write(
        &trace,
        output.out.as_deref(),
        output.format.into(),
        output.per_agent,
    )
}

fn write(
    trace: &RunTrace,
    out: Option<&Path>,
    format: OutputFormat,
    per_agent: bool,
) -> anyhow::Result<()> {
    match out {
        Some(dir) => {
            let path = harness::emit(trace, dir, format, per_agent)?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            let stdout = io::stdout().lock();
            match format {
                OutputFormat::Csv => harness::write_csv(trace, stdout, per_agent),
                OutputFormat::Summary => harness::write_summary(trace, stdout),
            }
            .context("writing to stdout")?;
        }
    }
    Ok(())
}

fn report_params(s: &Scenario, w: &mut impl Write) -> anyhow::Result<()> {
    let adm = admit(s)?;
    let p = &s.params;
    let n = s.graph.n_vertices();
    let b = s.model.noise_bound();
    let sqrt_n = (n as f64).sqrt();
    let cert = adm.certificate;
    let kv: Vec<(&str, String)> = vec![
        ("agents", n.to_string()),
        ("edges", s.graph.edges().len().to_string()),
        ("dimension", s.model.dim().to_string()),
        ("noise_bound", b.to_string()),
        ("adversaries", s.adversaries.members().len().to_string()),
        ("source", p.provenance.to_string()),
        ("alpha", p.alpha.to_string()),
        ("beta", p.beta.to_string()),
        ("kappa", p.kappa().to_string()),
        ("r1", p.r1.to_string()),
        ("lambda_min_J", cert.lambda_min.to_string()),
        ("lambda_max_J", cert.lambda_max.to_string()),
        ("certified", cert.passes().to_string()),
        (
            "lambda_min_J_normal",
            adm.r2.map_or("n/a".into(), |r| r.to_string()),
        ),
        ("gamma_0", (2.0 * s.parameter.eta * sqrt_n).to_string()),
        ("gamma_limit", (p.alpha * b * sqrt_n / p.r1).to_string()),
        (
            "W_limit",
            (p.alpha * b * sqrt_n / cert.lambda_min).to_string(),
        ),
        ("theta_star_norm", s.parameter.theta_star.norm().to_string()),
        ("eta", s.parameter.eta.to_string()),
    ];
    for (k, v) in kv {
        writeln!(w, "{k} = {v}")?;
    }
    let gmin = params::GramAverage::new(&s.model, &s.graph.vertices(), n)?.min_eig()?;
    writeln!(w, "lambda_min_gram_average = {gmin}")?;
    Ok(())
}
