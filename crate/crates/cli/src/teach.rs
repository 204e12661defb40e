use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Deserializer, Serialize};
use teachdim::harness::{run_session, run_trials, write_results, write_trace, ResultRow, SessionConfig};
use teachdim::learner::LearnerSpec;
use teachdim::mdp::io::{load_matrix, load_mdp, load_policy};
use teachdim::teacher::adversarial_q0;
use teachdim::{tdim_bounds, BoundInputs, Level, Mdp, QTable, TeachingProblem, UpdateRule};

use crate::error::{io_error, CliError, CliResult};
use crate::gen::GenParams;

pub const SEED_ENV: &str = "TEACHDIM_SEED";

/// Experiment settings as given by flags or a config file. Every field is
/// optional so the two sources can be layered.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeachSettings {
    #[arg(long)]
    #[serde(default)]
    pub experiment_id: Option<String>,
    #[arg(long)]
    #[serde(default)]
    pub level: Option<Level>,
    /// `q` or `sarsa`.
    #[arg(long = "rule")]
    #[serde(default)]
    pub learner_rule: Option<UpdateRule>,
    /// Read the MDP from a file instead of generating it.
    #[arg(long)]
    #[serde(default)]
    pub mdp_file: Option<PathBuf>,
    #[command(flatten)]
    #[serde(default)]
    pub mdp: GenParams,
    /// Seed for the random MDP family.
    #[arg(long)]
    #[serde(default)]
    pub mdp_seed: Option<u64>,
    /// One or more exploration rates; each yields its own row.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many")]
    pub epsilon: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(default)]
    pub alpha: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Promotion/demotion margin.
    #[arg(long)]
    #[serde(default)]
    pub delta: Option<f64>,
    /// Initial Q-table file; adversarial when omitted.
    #[arg(long)]
    #[serde(default)]
    pub q0_file: Option<PathBuf>,
    /// Constant target action, used unless a target file is given.
    #[arg(long)]
    #[serde(default)]
    pub target_action: Option<usize>,
    #[arg(long)]
    #[serde(default)]
    pub target_file: Option<PathBuf>,
    #[arg(long)]
    #[serde(default)]
    pub trials: Option<u64>,
    #[arg(long = "seed")]
    #[serde(default)]
    pub base_seed: Option<u64>,
    #[arg(long = "budget-multiplier")]
    #[serde(default)]
    pub step_budget_multiplier: Option<f64>,
}

fn one_or_many<'de, D: Deserializer<'de>>(de: D) -> Result<Option<Vec<f64>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(Option::<OneOrMany>::deserialize(de)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(xs) => xs,
    }))
}

impl TeachSettings {
    fn or(self, o: TeachSettings) -> TeachSettings {
        TeachSettings {
            experiment_id: self.experiment_id.or(o.experiment_id),
            level: self.level.or(o.level),
            learner_rule: self.learner_rule.or(o.learner_rule),
            mdp_file: self.mdp_file.or(o.mdp_file),
            mdp: self.mdp.or(o.mdp),
            mdp_seed: self.mdp_seed.or(o.mdp_seed),
            epsilon: self.epsilon.or(o.epsilon),
            alpha: self.alpha.or(o.alpha),
            gamma: self.gamma.or(o.gamma),
            delta: self.delta.or(o.delta),
            q0_file: self.q0_file.or(o.q0_file),
            target_action: self.target_action.or(o.target_action),
            target_file: self.target_file.or(o.target_file),
            trials: self.trials.or(o.trials),
            base_seed: self.base_seed.or(o.base_seed),
            step_budget_multiplier: self.step_budget_multiplier.or(o.step_budget_multiplier),
        }
    }

    /// Makes file paths relative to the directory of the config file.
    fn rebase(mut self, dir: &Path) -> TeachSettings {
        for p in [&mut self.mdp_file, &mut self.q0_file, &mut self.target_file].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        self
    }
}

/// Fully resolved experiment, echoed next to the results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub level: Level,
    pub learner_rule: UpdateRule,
    pub mdp_file: Option<PathBuf>,
    pub mdp: GenParams,
    pub mdp_seed: u64,
    pub epsilon: Vec<f64>,
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
    pub q0_file: Option<PathBuf>,
    pub target_action: usize,
    pub target_file: Option<PathBuf>,
    pub trials: u64,
    pub base_seed: u64,
    pub step_budget_multiplier: f64,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) && id != "." && id != ".."
}

/// Layers flags over the config file over defaults. `env_seed` replaces the
/// base seed whatever its source.
pub fn resolve(
    flags: TeachSettings,
    file: Option<TeachSettings>,
    env_seed: Option<u64>,
) -> CliResult<ExperimentConfig> {
    let s = match file {
        Some(f) => flags.or(f),
        None => flags,
    };
    let experiment_id = s.experiment_id.unwrap_or_else(|| "default".into());
    if !valid_id(&experiment_id) {
        return Err(CliError::Usage(format!(
            "experiment_id `{experiment_id}` must be nonempty and use only letters, digits, `-`, `_`, `.`"
        )));
    }
    let epsilon = s.epsilon.unwrap_or_else(|| vec![0.1]);
    if epsilon.is_empty() {
        return Err(CliError::Usage("need at least one epsilon".into()));
    }
    Ok(ExperimentConfig {
        experiment_id,
        level: s.level.unwrap_or(Level::Three),
        learner_rule: s.learner_rule.unwrap_or(UpdateRule::StandardQ),
        mdp_file: s.mdp_file,
        mdp: s.mdp,
        mdp_seed: s.mdp_seed.unwrap_or(0),
        epsilon,
        alpha: s.alpha.unwrap_or(teachdim::instances::DEFAULT_ALPHA),
        gamma: s.gamma.unwrap_or(teachdim::instances::DEFAULT_GAMMA),
        delta: s.delta.unwrap_or(teachdim::harness::DEFAULT_DELTA),
        q0_file: s.q0_file,
        target_action: s.target_action.unwrap_or(1),
        target_file: s.target_file,
        trials: s.trials.unwrap_or(100),
        base_seed: env_seed.or(s.base_seed).unwrap_or(0),
        step_budget_multiplier: s.step_budget_multiplier.unwrap_or(teachdim::harness::DEFAULT_BUDGET_MULTIPLIER),
    })
}

pub fn load_settings(path: &Path) -> CliResult<TeachSettings> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let settings: TeachSettings =
        teachdim::mdp::io::parse_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(settings.rebase(path.parent().unwrap_or(Path::new("."))))
}

pub fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

impl ExperimentConfig {
    pub fn mdp(&self) -> CliResult<Mdp> {
        match &self.mdp_file {
            Some(path) => Ok(load_mdp(path)?),
            None => self.mdp.build(self.mdp_seed),
        }
    }

    pub fn problem(&self, mdp: &Mdp, epsilon: f64) -> CliResult<TeachingProblem> {
        let target = match &self.target_file {
            Some(path) => load_policy(path)?,
            None => vec![self.target_action; mdp.num_states()],
        };
        if target.len() != mdp.num_states() || target.iter().any(|&a| a >= mdp.num_actions()) {
            return Err(CliError::Invariant(format!(
                "target policy must name one of {} actions for each of {} states",
                mdp.num_actions(),
                mdp.num_states()
            )));
        }
        let q0 = match &self.q0_file {
            Some(path) => QTable::from_rows(load_matrix(path)?)?,
            None => adversarial_q0(mdp, &target),
        };
        let spec = LearnerSpec::new(epsilon, self.alpha, self.gamma, self.learner_rule)?;
        Ok(TeachingProblem::new(mdp.clone(), spec, q0, target)?)
    }

    fn session_config(&self) -> SessionConfig {
        SessionConfig {
            budget_multiplier: self.step_budget_multiplier,
            ..SessionConfig::new(self.level).with_delta(self.delta)
        }
    }
}

#[derive(Debug, Args)]
pub struct TeachArgs {
    /// JSON experiment config; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: TeachSettings,
    /// Results CSV to append to; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON-lines trace of the first session of the first parameter point.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

pub fn run(args: TeachArgs) -> CliResult<()> {
    let file = args.config.as_deref().map(load_settings).transpose()?;
    let cfg = resolve(args.settings, file, env_seed()?)?;
    let config_json = serde_json::to_string(&cfg).expect("config serialises");
    eprintln!("config: {config_json}");

    let mdp = cfg.mdp()?;
    let d = mdp.diameter()?;
    let session = cfg.session_config();
    let mut rows = Vec::with_capacity(cfg.epsilon.len());
    for (i, &eps) in cfg.epsilon.iter().enumerate() {
        let problem = cfg.problem(&mdp, eps)?;
        if i == 0 {
            if let Some(path) = &args.trace {
                let res = run_session(&problem, &session.with_trace(), cfg.base_seed)?;
                let file = std::fs::File::create(path).map_err(|e| io_error(path, e))?;
                write_trace(std::io::BufWriter::new(file), res.trace.as_deref().unwrap_or(&[]))?;
            }
        }
        let stats = run_trials(&problem, &session, cfg.trials, cfg.base_seed)?;
        let inputs =
            BoundInputs::new(mdp.num_states(), mdp.num_actions(), mdp.horizon(), d, eps, mdp.min_transition_prob());
        let bounds = tdim_bounds(cfg.level, &inputs).ok();
        rows.push(ResultRow {
            experiment_id: cfg.experiment_id.clone(),
            level: cfg.level.number(),
            learner_rule: cfg.learner_rule.to_string(),
            s: inputs.s,
            a: inputs.a,
            h: inputs.h,
            d,
            epsilon: eps,
            p_min: inputs.p_min,
            delta: cfg.delta,
            trials: stats.trials,
            failures: stats.failures,
            mean_steps: stats.mean_steps,
            std_error: stats.std_error,
            ci95_low: stats.ci95_low,
            ci95_high: stats.ci95_high,
            bound_lower: bounds.map(|b| b.0),
            bound_upper: bounds.map(|b| b.1),
            base_seed: cfg.base_seed,
        });
    }

    match &args.out {
        Some(path) => {
            let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| io_error(path, e))?;
            let fresh = file.metadata().map_err(|e| io_error(path, e))?.len() == 0;
            write_results(file, &rows, fresh)?;
            let meta = meta_path(path);
            let mut m = OpenOptions::new().create(true).append(true).open(&meta).map_err(|e| io_error(&meta, e))?;
            writeln!(m, "{config_json}").map_err(|e| io_error(&meta, e))?;
        }
        None => write_results(std::io::stdout().lock(), &rows, true)?,
    }

    let failures: u64 = rows.iter().map(|r| r.failures).sum();
    for r in &rows {
        eprintln!(
            "{} level={} eps={} mean={:.3} se={:.3} failures={} seed={}",
            r.experiment_id, r.level, r.epsilon, r.mean_steps, r.std_error, r.failures, r.base_seed
        );
    }
    if failures > 0 {
        return Err(CliError::Budget(format!("{failures} session(s) exhausted the step budget")));
    }
    Ok(())
}

/// Sidecar file holding one resolved config per run: `results.csv` gets
/// `results.csv.meta.jsonl`.
pub fn meta_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.jsonl");
    out.with_file_name(name)
}
