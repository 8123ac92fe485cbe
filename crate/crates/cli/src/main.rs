mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Opts, Settings};

/// Identification risk and propensity utility for partially synthetic data.
#[derive(Parser, Debug)]
#[command(name = "synrisk", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Record- and file-level identification risk plus propensity utility
    Evaluate(Opts),
    /// Draw CART-synthesized replicates of the original data
    Synthesize(Opts),
    /// Risk across a radius grid for each scenario
    Sweep(Opts),
    /// Risk and utility per scenario at the maximizing (or a fixed) radius
    Scenarios(Opts),
    /// Variability of averaged risk and utility as the replicate count grows
    Mstudy(Opts),
    /// Write a CE-like synthetic population to CSV
    Generate(Opts),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (run, opts): (fn(&Settings) -> anyhow::Result<()>, Opts) = match cli.command {
        Command::Evaluate(o) => (commands::evaluate, o),
        Command::Synthesize(o) => (commands::synthesize, o),
        Command::Sweep(o) => (commands::sweep, o),
        Command::Scenarios(o) => (commands::scenarios, o),
        Command::Mstudy(o) => (commands::mstudy, o),
        Command::Generate(o) => (commands::generate, o),
    };
    let result = Settings::resolve(opts).and_then(|s| {
        if let Some(t) = s.threads {
            if t == 0 {
                anyhow::bail!("threads: must be at least 1");
            }
            rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
        }
        run(&s)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", render_chain(&e));
            ExitCode::FAILURE
        }
    }
}

/// Joins the error chain, skipping causes whose text the previous message
/// already ends with.
fn render_chain(err: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut last = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !last.ends_with(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
        last = text;
    }
    out
}
