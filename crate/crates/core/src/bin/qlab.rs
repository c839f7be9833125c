// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qlab::scenario::{self, Format, Parameters, RunOptions, ScenarioConfig, ScenarioKind};

#[derive(Parser)]
#[command(name = "qlab", version, about = "Deterministic quantum measurement scenarios")]
struct Cli {
    /// Seed for randomized scenarios; overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads (default: available parallelism). Results do not
    /// depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Include wall-clock time in the report.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Args)]
struct ConfigArg {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct ParamsArg {
    /// Scenario parameters as inline JSON; defaults to the standard example.
    #[arg(long)]
    params: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a configuration file.
    Run(ConfigArg),
    /// List the available scenarios.
    List,
    /// Check a configuration file without running it.
    Validate(ConfigArg),
    Polarization(ParamsArg),
    Zeno(ParamsArg),
    HistoriesAudit(ParamsArg),
    EmpiricalScan(ParamsArg),
    NdmEnsemble(ParamsArg),
    ClassicalOracle(ParamsArg),
}

enum Failure {
    Error(String),
    Checks,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(2),
        Err(Failure::Error(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Error(format!("{}: {e}", path.display())))
}

fn inline(kind: ScenarioKind, params: &Option<String>) -> Result<ScenarioConfig, Failure> {
    let parameters = match params {
        None => Parameters::default_for(kind),
        Some(text) => {
            let value = serde_json::from_str(text).map_err(|e| Failure::Error(format!("parameters: {e}")))?;
            let p = Parameters::from_json(kind, value).map_err(|e| Failure::Error(e.to_string()))?;
            if let Some(problem) = p.validate().into_iter().next() {
                return Err(Failure::Error(problem.to_string()));
            }
            p
        }
    };
    Ok(ScenarioConfig::new(parameters))
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Error(e.to_string()))?;
    }
    let config = match &cli.command {
        Command::List => {
            let entries = scenario::list_scenarios();
            let text = match cli.format.map(Format::from) {
                Some(Format::Json) => serde_json::to_string_pretty(&entries).expect("catalog serializes") + "\n",
                _ => entries
                    .iter()
                    .map(|e| format!("{}\t{}\trequired: {}\n", e.name, e.description, e.required.join(", ")))
                    .collect(),
            };
            return emit(cli.out.as_ref(), &text);
        }
        Command::Validate(c) => {
            let problems = scenario::validate(&read(&c.config)?);
            if problems.is_empty() {
                println!("ok");
                return Ok(());
            }
            for p in &problems {
                println!("{p}");
            }
            return Err(Failure::Error(format!("{} problem(s) in configuration", problems.len())));
        }
        Command::Run(c) => ScenarioConfig::from_json_str(&read(&c.config)?).map_err(|e| Failure::Error(e.to_string()))?,
        Command::Polarization(p) => inline(ScenarioKind::Polarization, &p.params)?,
        Command::Zeno(p) => inline(ScenarioKind::Zeno, &p.params)?,
        Command::HistoriesAudit(p) => inline(ScenarioKind::HistoriesAudit, &p.params)?,
        Command::EmpiricalScan(p) => inline(ScenarioKind::EmpiricalScan, &p.params)?,
        Command::NdmEnsemble(p) => inline(ScenarioKind::NdmEnsemble, &p.params)?,
        Command::ClassicalOracle(p) => inline(ScenarioKind::ClassicalOracle, &p.params)?,
    };
    let report = scenario::run(
        &config,
        RunOptions {
            seed: cli.seed,
            timing: cli.timing,
        },
    )
    .map_err(|e| Failure::Error(e.to_string()))?;
    let format = cli.format.map(Format::from).or(config.output.format).unwrap_or_default();
    let out = cli.out.clone().or_else(|| config.output.path.as_ref().map(PathBuf::from));
    emit(out.as_ref(), &report.render(format))?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn emit(path: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Error(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
