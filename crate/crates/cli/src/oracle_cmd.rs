use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use teachdim::mdp::io::{mdp_to_json, save_matrix, save_policy};
use teachdim::oracle::{
    atsp_brute_force, atsp_held_karp, exact_metal_reduction_instance, exhaustive_min_session_length,
    random_strongly_connected, reduce_atsp_to_teaching, Digraph, MetalCertificate, BRUTE_FORCE_MAX, CERTIFY_EPSILONS,
};

use crate::error::{io_error, CliError, CliResult};

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Minimum covering walk of a weighted digraph.
    Atsp(AtspArgs),
    /// Two-action teaching instance built from a unit-weight digraph.
    Reduce(ReduceArgs),
    /// Covering walk certified by replaying it as a teaching session.
    Metal(MetalArgs),
}

#[derive(Debug, Args)]
pub struct AtspArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// MDP output file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub q0_out: Option<PathBuf>,
    #[arg(long)]
    pub target_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "input")]
pub struct MetalInput {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Check this many random unit-weight graphs instead of one file.
    #[arg(long)]
    pub corpus: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MetalArgs {
    #[command(flatten)]
    pub input: MetalInput,
    /// Largest corpus graph.
    #[arg(long, default_value_t = 8)]
    pub max_vertices: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load_graph(path: &Path) -> CliResult<Digraph> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    Digraph::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> CliResult<()> {
    let json = serde_json::to_string_pretty(value).expect("certificate serialises");
    match out {
        Some(path) => std::fs::write(path, json + "\n").map_err(|e| io_error(path, e)),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct AtspOutput {
    length: u64,
    walk: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    brute_force: Option<u64>,
}

#[derive(Serialize)]
struct SeededCertificate {
    #[serde(flatten)]
    cert: MetalCertificate,
    seed: u64,
}

pub fn run(cmd: OracleCommand) -> CliResult<()> {
    match cmd {
        OracleCommand::Atsp(args) => {
            let g = load_graph(&args.graph)?;
            let cover = atsp_held_karp(&g)?;
            let brute_force = match g.vertex_count() <= BRUTE_FORCE_MAX {
                true => Some(atsp_brute_force(&g)?),
                false => None,
            };
            if brute_force.is_some_and(|b| b != cover.length) {
                return Err(CliError::Certification(format!(
                    "held-karp length {} disagrees with brute force {:?}",
                    cover.length, brute_force
                )));
            }
            emit(&AtspOutput { length: cover.length, walk: cover.walk, brute_force }, args.out.as_deref())
        }
        OracleCommand::Reduce(args) => {
            let g = load_graph(&args.graph)?;
            let red = reduce_atsp_to_teaching(&g, 0.0)?;
            let p = &red.problem;
            std::fs::write(&args.out, mdp_to_json(&p.mdp) + "\n").map_err(|e| io_error(&args.out, e))?;
            if let Some(path) = &args.q0_out {
                save_matrix(&p.q0.to_rows(), path)?;
            }
            if let Some(path) = &args.target_out {
                save_policy(&p.target, path)?;
            }
            println!("S={} A={} D={} H={}", p.mdp.num_states(), p.mdp.num_actions(), red.diameter, red.nominal_horizon);
            Ok(())
        }
        OracleCommand::Metal(args) => match (args.input.graph, args.input.corpus) {
            (Some(path), _) => {
                let g = load_graph(&path)?;
                let cert = exact_metal_reduction_instance(&g, &CERTIFY_EPSILONS, args.seed)?;
                if cert.horizon_raised {
                    eprintln!(
                        "note: walk needs {} steps, nominal horizon {} raised to {}",
                        cert.session_length, cert.nominal_horizon, cert.horizon
                    );
                }
                emit(&SeededCertificate { cert, seed: args.seed }, args.out.as_deref())
            }
            (None, Some(count)) => corpus(count, args.max_vertices, args.seed),
            (None, None) => unreachable!("clap requires one input"),
        },
    }
}

struct CorpusLine {
    n: usize,
    held_karp: u64,
    brute_force: u64,
    session: u64,
    exhaustive: Option<u64>,
}

impl CorpusLine {
    fn agrees(&self) -> bool {
        self.held_karp == self.brute_force
            && self.session == self.held_karp + 1
            && self.exhaustive.is_none_or(|e| e == self.session)
    }
}

fn corpus(count: usize, max_vertices: usize, seed: u64) -> CliResult<()> {
    if !(2..=BRUTE_FORCE_MAX).contains(&max_vertices) {
        return Err(CliError::Usage(format!("--max-vertices must be in 2..={BRUTE_FORCE_MAX}")));
    }
    let lines = (0..count)
        .into_par_iter()
        .map(|i| {
            let n = 2 + i % (max_vertices - 1);
            let g = random_strongly_connected(n, 1, 0.25, seed.wrapping_add(i as u64))?;
            let hk = atsp_held_karp(&g)?;
            let brute_force = atsp_brute_force(&g)?;
            let session = exact_metal_reduction_instance(&g, &CERTIFY_EPSILONS, seed)?.session_length;
            let exhaustive = match n <= 6 {
                true => Some(exhaustive_min_session_length(&reduce_atsp_to_teaching(&g, 0.0)?.problem)?),
                false => None,
            };
            Ok(CorpusLine { n, held_karp: hk.length, brute_force, session, exhaustive })
        })
        .collect::<Result<Vec<_>, teachdim::oracle::OracleError>>()?;
    let mut agree = 0;
    for (i, l) in lines.iter().enumerate() {
        let ex = l.exhaustive.map(|e| e.to_string()).unwrap_or_else(|| "-".into());
        println!(
            "graph {i:>3} n={} held_karp={} brute_force={} session={} exhaustive={ex} {}",
            l.n,
            l.held_karp,
            l.brute_force,
            l.session,
            if l.agrees() { "agree" } else { "DISAGREE" }
        );
        agree += usize::from(l.agrees());
    }
    println!("corpus: {agree}/{count} graphs agree (seed={seed})");
    if agree != count {
        return Err(CliError::Certification(format!("{} graph(s) disagree", count - agree)));
    }
    Ok(())
}
