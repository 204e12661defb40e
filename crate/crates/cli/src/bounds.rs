use clap::{Args, ValueEnum};
use teachdim::analytic::tight_theta_level3;
use teachdim::{tdim_bounds, BoundInputs, Level};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Text,
}

/// Every list flag takes comma-separated values; the grid is their product.
#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![1u8, 2, 3, 4])]
    pub level: Vec<u8>,
    #[arg(long = "S", value_delimiter = ',', required = true)]
    pub s: Vec<usize>,
    #[arg(long = "A", value_delimiter = ',', required = true)]
    pub a: Vec<usize>,
    #[arg(long = "H", value_delimiter = ',', required = true)]
    pub h: Vec<usize>,
    #[arg(long = "D", value_delimiter = ',', required = true)]
    pub d: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0])]
    pub epsilon: Vec<f64>,
    /// Smallest transition probability; only level 4 uses it.
    #[arg(long = "p", value_delimiter = ',', default_values_t = vec![1.0])]
    pub p_min: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

const HEADER: [&str; 11] =
    ["level", "S", "A", "H", "D", "epsilon", "p_min", "lower", "upper", "tight_lower", "tight_upper"];

pub fn rows(args: &BoundsArgs) -> CliResult<Vec<[String; 11]>> {
    let mut out = Vec::new();
    for &lv in &args.level {
        let level = Level::try_from(lv).map_err(|e| CliError::Usage(e.to_string()))?;
        for &s in &args.s {
            for &a in &args.a {
                for &h in &args.h {
                    for &d in &args.d {
                        for &eps in &args.epsilon {
                            for &p in &args.p_min {
                                let inp = BoundInputs::new(s, a, h, d, eps, p);
                                let (lo, hi) = tdim_bounds(level, &inp)?;
                                let tight = match level {
                                    Level::Three => Some(tight_theta_level3(&inp)?),
                                    _ => None,
                                };
                                let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
                                out.push([
                                    lv.to_string(),
                                    s.to_string(),
                                    a.to_string(),
                                    h.to_string(),
                                    d.to_string(),
                                    eps.to_string(),
                                    p.to_string(),
                                    lo.to_string(),
                                    hi.to_string(),
                                    opt(tight.map(|t| t.0)),
                                    opt(tight.map(|t| t.1)),
                                ]);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn run(args: BoundsArgs) -> CliResult<()> {
    let table = rows(&args)?;
    let stdout = std::io::stdout();
    match args.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(stdout.lock());
            let fail = |e: csv::Error| CliError::Usage(e.to_string());
            w.write_record(HEADER).map_err(fail)?;
            for r in &table {
                w.write_record(r).map_err(fail)?;
            }
            w.flush().map_err(|e| CliError::Usage(e.to_string()))?;
        }
        Format::Text => {
            let mut widths: Vec<usize> = HEADER.iter().map(|h| h.len()).collect();
            for r in &table {
                for (w, c) in widths.iter_mut().zip(r) {
                    *w = (*w).max(c.len());
                }
            }
            let line = |cells: Vec<&str>| {
                cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ")
            };
            println!("{}", line(HEADER.to_vec()));
            for r in &table {
                println!("{}", line(r.iter().map(String::as_str).collect()));
            }
        }
    }
    Ok(())
}
