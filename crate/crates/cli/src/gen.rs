use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use teachdim::mdp::io::mdp_to_json;
use teachdim::mdp::{make_chain, make_peacock, make_peacock_tree, make_random_sparse};
use teachdim::Mdp;

use crate::error::{io_error, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Peacock,
    PeacockTree,
    Chain,
    Random,
}

/// Generator parameters. Unset values fall back to per-family defaults.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenParams {
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    /// Number of states.
    #[arg(long = "S")]
    #[serde(rename = "S", default)]
    pub s: Option<usize>,
    /// Diameter (peacock families).
    #[arg(long = "D")]
    #[serde(rename = "D", default)]
    pub d: Option<usize>,
    #[arg(long = "A")]
    #[serde(rename = "A", default)]
    pub a: Option<usize>,
    #[arg(long = "H")]
    #[serde(rename = "H", default)]
    pub h: Option<usize>,
    /// Smallest transition probability (peacock families).
    #[arg(long)]
    #[serde(default)]
    pub p: Option<f64>,
    /// Edge density (random family).
    #[arg(long)]
    #[serde(default)]
    pub density: Option<f64>,
}

impl GenParams {
    pub fn or(self, other: GenParams) -> GenParams {
        GenParams {
            family: self.family.or(other.family),
            s: self.s.or(other.s),
            d: self.d.or(other.d),
            a: self.a.or(other.a),
            h: self.h.or(other.h),
            p: self.p.or(other.p),
            density: self.density.or(other.density),
        }
    }

    pub fn build(&self, seed: u64) -> CliResult<Mdp> {
        let family = self.family.unwrap_or(Family::Peacock);
        let s = self.s.unwrap_or(8);
        let d = self.d.unwrap_or(3);
        let a = self.a.unwrap_or(2);
        let h = self.h.unwrap_or(s.max(d + 1));
        let mdp = match family {
            Family::Peacock => make_peacock(s, d, a, h, self.p.unwrap_or(0.2))?,
            Family::PeacockTree => make_peacock_tree(s, d, a, h, self.p.unwrap_or(0.5))?,
            Family::Chain => make_chain(s, a, h)?,
            Family::Random => make_random_sparse(s, a, h, self.density.unwrap_or(0.3), seed)?,
        };
        Ok(mdp)
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub params: GenParams,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; the MDP goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn summary(mdp: &Mdp) -> CliResult<String> {
    Ok(format!(
        "S={} A={} H={} D={} p_min={}",
        mdp.num_states(),
        mdp.num_actions(),
        mdp.horizon(),
        mdp.diameter()?,
        mdp.min_transition_prob()
    ))
}

pub fn run(args: GenArgs) -> CliResult<()> {
    let mdp = args.params.build(args.seed)?;
    let report = format!("{} seed={}", summary(&mdp)?, args.seed);
    let json = mdp_to_json(&mdp);
    match &args.out {
        Some(path) => {
            std::fs::write(path, json + "\n").map_err(|e| io_error(path, e))?;
            println!("{report}");
        }
        None => {
            println!("{json}");
            eprintln!("{report}");
        }
    }
    Ok(())
}
