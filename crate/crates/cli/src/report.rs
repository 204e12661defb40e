use std::path::PathBuf;

use clap::Args;
use teachdim::harness::{read_results, ResultRow};

use crate::error::{io_error, CliError, CliResult};

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Results CSV files written by `teach`.
    pub inputs: Vec<PathBuf>,
    /// Plot-ready series CSV: one block of rows per experiment and level,
    /// sorted by epsilon.
    #[arg(long)]
    pub series: Option<PathBuf>,
}

const SERIES_HEADER: [&str; 12] = [
    "experiment_id",
    "level",
    "learner_rule",
    "epsilon",
    "mean_steps",
    "std_error",
    "ci95_low",
    "ci95_high",
    "bound_lower",
    "bound_upper",
    "failures",
    "base_seed",
];

/// Groups rows by `(experiment_id, level)` in order of first appearance and
/// sorts each group by epsilon.
pub fn group(rows: Vec<ResultRow>) -> Vec<((String, u8), Vec<ResultRow>)> {
    let mut groups: Vec<((String, u8), Vec<ResultRow>)> = Vec::new();
    for row in rows {
        let key = (row.experiment_id.clone(), row.level);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(row),
            None => groups.push((key, vec![row])),
        }
    }
    for (_, g) in &mut groups {
        g.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    }
    groups
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into())
}

pub fn run(args: ReportArgs) -> CliResult<()> {
    let mut rows = Vec::new();
    for path in &args.inputs {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        if text.trim().is_empty() {
            continue;
        }
        rows.extend(read_results(text.as_bytes()).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?);
    }
    let groups = group(rows);

    for (i, ((id, level), g)) in groups.iter().enumerate() {
        if i > 0 {
            println!();
        }
        let r0 = &g[0];
        println!(
            "== {id} level {level} ({}, S={} A={} H={} D={} p_min={})",
            r0.learner_rule, r0.s, r0.a, r0.h, r0.d, r0.p_min
        );
        println!("{:>8}  {:>10}  {:>8}  {:>10}  {:>10}  {:>8}", "epsilon", "mean", "se", "lower", "upper", "failures");
        for r in g {
            println!(
                "{:>8}  {:>10.3}  {:>8.3}  {:>10}  {:>10}  {:>8}",
                r.epsilon,
                r.mean_steps,
                r.std_error,
                opt(r.bound_lower),
                opt(r.bound_upper),
                r.failures
            );
        }
        if g.len() > 1 {
            let increasing = g.windows(2).all(|w| w[1].mean_steps > w[0].mean_steps);
            println!("means increase with epsilon: {}", if increasing { "yes" } else { "no" });
        }
    }

    if let Some(path) = &args.series {
        let file = std::fs::File::create(path).map_err(|e| io_error(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let fail = |e: csv::Error| CliError::Usage(format!("{}: {e}", path.display()));
        if !groups.is_empty() {
            w.write_record(SERIES_HEADER).map_err(fail)?;
        }
        for (_, g) in &groups {
            for r in g {
                w.write_record([
                    r.experiment_id.clone(),
                    r.level.to_string(),
                    r.learner_rule.clone(),
                    r.epsilon.to_string(),
                    r.mean_steps.to_string(),
                    r.std_error.to_string(),
                    r.ci95_low.to_string(),
                    r.ci95_high.to_string(),
                    r.bound_lower.map(|v| v.to_string()).unwrap_or_default(),
                    r.bound_upper.map(|v| v.to_string()).unwrap_or_default(),
                    r.failures.to_string(),
                    r.base_seed.to_string(),
                ])
                .map_err(fail)?;
            }
        }
        w.flush().map_err(|e| io_error(path, e))?;
    }
    Ok(())
}
