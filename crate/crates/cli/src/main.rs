//! `teachdim` command-line tool: instance generation, teaching runs, bound
//! tables, covering-walk oracles and result reports.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod bounds;
mod error;
mod gen;
mod oracle_cmd;
mod report;
mod teach;

#[derive(Debug, Parser)]
#[command(name = "teachdim", version, about = "Teaching-by-reward simulator for tabular Q-learners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate an MDP file and report its diameter and smallest probability.
    Gen(gen::GenArgs),
    /// Run teaching trials and append result rows to a CSV.
    Teach(Box<teach::TeachArgs>),
    /// Evaluate the analytic teaching-dimension bounds over a grid.
    Bounds(bounds::BoundsArgs),
    /// Covering-walk oracles and the reduction to teaching.
    #[command(subcommand)]
    Oracle(oracle_cmd::OracleCommand),
    /// Group result CSVs into per-experiment series.
    Report(report::ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(a) => gen::run(a),
        Command::Teach(a) => teach::run(*a),
        Command::Bounds(a) => bounds::run(a),
        Command::Oracle(c) => oracle_cmd::run(c),
        Command::Report(a) => report::run(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
