use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spectral_dga::{
    bundled, emit_report, emit_timings, run_comparison, run_scenario, validate_scenario, Format, HarnessError, RunOptions,
    RunOutput, Scenario, DEFAULT_MAX_DIM,
};

#[derive(Parser)]
#[command(name = "spectral-dga", version, about = "Dimension reports for Dirac and heat-functional dgas of suspended spectral triples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file or bundled scenario.
    Run {
        config: String,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
    },
    /// Run several scenarios with matching outer budgets and compare them.
    Compare {
        #[arg(required = true, num_args = 2..)]
        configs: Vec<String>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
    },
    /// List the bundled scenarios.
    ListScenarios,
    /// Check a scenario without computing anything.
    Validate {
        config: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Comma-separated base levels replacing the scenario's list.
    #[arg(long, value_delimiter = ',')]
    levels_override: Option<Vec<usize>>,
    /// Cap on the ambient matrix dimension.
    #[arg(long, default_value_t = DEFAULT_MAX_DIM)]
    max_dim: usize,
    /// Seed for sampled checks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Output {
    /// Report directory; defaults to the scenario's `output.dir` or `reports`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report formats; defaults to json and markdown.
    #[arg(long, value_parser = ["json", "markdown", "md", "csv"])]
    format: Vec<String>,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions {
            max_dim: self.max_dim,
            levels_override: self.levels_override.clone(),
            seed: self.seed,
        }
    }
}

fn write_reports(out: &RunOutput, output: &Output, scenario: Option<&Scenario>) -> Result<(), HarnessError> {
    let dir = output
        .out
        .clone()
        .or_else(|| scenario.and_then(|s| s.output.dir.clone()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("reports"));
    let mut names = output.format.clone();
    if names.is_empty() {
        names = scenario.map(|s| s.output.formats.clone()).unwrap_or_default();
    }
    if names.is_empty() {
        names = vec!["json".into(), "markdown".into()];
    }
    for n in &names {
        let p = emit_report(&out.record, Format::parse(n)?, &dir)?;
        println!("wrote {}", p.display());
    }
    let p = emit_timings(&out.timings, &dir)?;
    println!("wrote {}", p.display());
    Ok(())
}

fn summarize(out: &RunOutput) -> ExitCode {
    fn lines(r: &spectral_dga::RunRecord, prefix: &str) {
        for c in &r.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            println!("{tag} {prefix}{}: {}", c.name, c.detail);
        }
        for m in &r.runs {
            lines(m, &format!("{prefix}{}/", m.scenario));
        }
    }
    lines(&out.record, "");
    if let Some(c) = &out.record.comparison {
        println!("verdict: {}", c.verdict);
    }
    if out.record.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Run { config, common, output } => {
            let s = Scenario::load(&config)?;
            let out = run_scenario(&s, &common.options())?;
            write_reports(&out, &output, Some(&s))?;
            Ok(summarize(&out))
        }
        Command::Compare { configs, common, output } => {
            let ss = configs.iter().map(|c| Scenario::load(c)).collect::<Result<Vec<_>, _>>()?;
            let out = run_comparison(&ss, &common.options())?;
            write_reports(&out, &output, None)?;
            Ok(summarize(&out))
        }
        Command::ListScenarios => {
            for name in bundled::names() {
                let s = Scenario::load(name)?;
                println!("{name}\t{}", s.description);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config, common } => {
            let s = Scenario::load(&config)?;
            let triple = validate_scenario(&s, &common.options())?;
            println!("valid: {} ({triple})", s.name);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
