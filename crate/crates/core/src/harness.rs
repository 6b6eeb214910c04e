//! Simulated-teacher experiments: per-user teaching loops, strategy
//! comparisons with matched seeds, and hyperparameter sweeps.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, EnvironmentKind};
use crate::error::{Error, Result};
use crate::human::{human_error, HumanBelief};
use crate::model::{sample_answer, Answer, Preferences, Question};
use crate::robot::{learning_summary, regret, RobotBelief, UpdateOptions};
use crate::seed::{round_rng, user_rng, Stream};
use crate::select::{candidate_questions, convergence_metric, select_question, SelectionConfig, Strategy};

fn default_dim() -> usize {
    3
}
fn default_pool() -> usize {
    100
}
fn default_candidates() -> usize {
    100
}
fn default_particles() -> usize {
    200
}
fn default_human_candidates() -> usize {
    500
}
fn default_users() -> usize {
    100
}
fn default_rounds() -> usize {
    20
}
fn default_k() -> usize {
    3
}
fn default_strategies() -> Vec<SelectionConfig> {
    vec![
        SelectionConfig::new(Strategy::Random),
        SelectionConfig::new(Strategy::Informative),
        SelectionConfig::new(Strategy::Revealing),
        SelectionConfig::combined(1.0),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentKind,
    /// Feature dimension; only the synthetic environment honors it.
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_pool")]
    pub pool_size: usize,
    #[serde(default = "default_users")]
    pub users: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<SelectionConfig>,
    /// Candidate pairs drawn per round, shared by every strategy.
    #[serde(default = "default_candidates")]
    pub candidates: usize,
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "default_human_candidates")]
    pub human_candidates: usize,
    /// Memory length of the simulated human.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Memory length the robot assumes when scoring revealing questions.
    #[serde(default = "default_k")]
    pub model_k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub update: UpdateOptions,
}

impl ExperimentConfig {
    pub fn new(environment: EnvironmentKind) -> Self {
        Self {
            environment,
            dim: default_dim(),
            pool_size: default_pool(),
            users: default_users(),
            rounds: default_rounds(),
            strategies: default_strategies(),
            candidates: default_candidates(),
            particles: default_particles(),
            human_candidates: default_human_candidates(),
            k: default_k(),
            model_k: default_k(),
            seed: 0,
            update: UpdateOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("pool_size", self.pool_size.saturating_sub(1)),
            ("users", self.users),
            ("rounds", self.rounds),
            ("candidates", self.candidates),
            ("particles", self.particles.saturating_sub(1)),
            ("human_candidates", self.human_candidates.saturating_sub(1)),
            ("k", self.k),
            ("model_k", self.model_k),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("field `{field}` is below its minimum")));
            }
        }
        if self.strategies.is_empty() {
            return Err(Error::config("field `strategies` must not be empty"));
        }
        for s in &self.strategies {
            s.validate()
                .map_err(|e| Error::config(format!("field `strategies`: {e}")))?;
        }
        Ok(())
    }

    fn selection(&self, strategy: &SelectionConfig) -> SelectionConfig {
        SelectionConfig {
            candidate_count: self.candidates,
            ..*strategy
        }
    }
}

/// One simulated round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub user: usize,
    /// 1-based question number.
    pub round: usize,
    pub strategy: String,
    pub human_error: f64,
    pub regret: f64,
    pub answered_idk: bool,
    pub info_gain: f64,
    pub convergence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reveal_score: Option<f64>,
}

/// Everything fixed for one simulated user, independent of strategy.
pub struct UserSetup {
    pub environment: Environment,
    pub true_prefs: Preferences,
}

impl UserSetup {
    pub fn for_user(config: &ExperimentConfig, user: usize) -> Result<Self> {
        let mut env_rng = user_rng(config.seed, user, Stream::Environment);
        let environment = config.environment.build(config.dim, config.pool_size, &mut env_rng)?;
        let mut theta_rng = user_rng(config.seed, user, Stream::TruePreferences);
        let true_prefs = Preferences::sample_uniform(environment.dim(), &mut theta_rng)?;
        Ok(Self {
            environment,
            true_prefs,
        })
    }
}

/// Runs the teaching loop for one simulated user under one strategy.
pub fn run_user(
    config: &ExperimentConfig,
    strategy: &SelectionConfig,
    user: usize,
    setup: &UserSetup,
) -> Result<Vec<RoundRecord>> {
    let at = |round: usize| {
        move |e: Error| Error::Cell {
            user,
            round,
            source: Box::new(e),
        }
    };
    let env = &setup.environment;
    let pool = &env.pool;
    let d = env.dim();
    let selection = config.selection(strategy);
    let label = strategy.label();

    let mut belief = RobotBelief::init(
        d,
        config.particles,
        &mut user_rng(config.seed, user, Stream::RobotPrior),
    )
    .map_err(at(0))?;
    let mut candidates_rng = user_rng(config.seed, user, Stream::HumanCandidates);
    let base_human = HumanBelief::init(d, config.human_candidates, 1, &mut candidates_rng).map_err(at(0))?;
    let mut human = HumanBelief::with_candidates(base_human.candidates().to_vec(), config.k).map_err(at(0))?;
    let mut model = HumanBelief::with_candidates(base_human.candidates().to_vec(), config.model_k).map_err(at(0))?;
    let mut answer_rng = user_rng(config.seed, user, Stream::Answers);
    let mut select_rng = user_rng(config.seed, user, Stream::Selection);
    let mut resample_rng = user_rng(config.seed, user, Stream::Resampling);
    let mut z_star = learning_summary(&belief, pool).map_err(at(0))?;

    let mut records = Vec::with_capacity(config.rounds);
    for round in 1..=config.rounds {
        let mut step = || -> Result<RoundRecord> {
            let candidates = candidate_questions(pool, config.candidates, &mut round_rng(config.seed, user, round))?;
            let chosen = select_question(&candidates, &belief, &model, &z_star, &selection, &mut select_rng)?.chosen;
            let question: Question = chosen.question.with_index(round);
            let convergence = convergence_metric(&question, &belief, pool)?.value;

            human = human.observe(&question)?;
            model = model.observe(&question)?;
            let answer = sample_answer(&question, &setup.true_prefs, &mut answer_rng)?;
            belief = belief.update(&question, &answer, &config.update, &mut resample_rng)?;
            z_star = learning_summary(&belief, pool)?;

            Ok(RoundRecord {
                user,
                round,
                strategy: label.clone(),
                human_error: human_error(&human, &z_star)?,
                regret: regret(&belief, &setup.true_prefs, pool)?,
                answered_idk: answer == Answer::IDontKnow,
                info_gain: chosen.info_gain,
                convergence,
                reveal_score: chosen.reveal_score,
            })
        };
        records.push(step().map_err(at(round))?);
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub strategy: String,
    pub user: usize,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    HumanError,
    Regret,
    InfoGain,
    Convergence,
    Difficulty,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::HumanError,
        Metric::Regret,
        Metric::InfoGain,
        Metric::Convergence,
        Metric::Difficulty,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::HumanError => "human_error",
            Metric::Regret => "regret",
            Metric::InfoGain => "info_gain",
            Metric::Convergence => "convergence",
            Metric::Difficulty => "difficulty",
        }
    }

    fn value(&self, r: &RoundRecord) -> f64 {
        match self {
            Metric::HumanError => r.human_error,
            Metric::Regret => r.regret,
            Metric::InfoGain => r.info_gain,
            Metric::Convergence => r.convergence,
            Metric::Difficulty => f64::from(u8::from(r.answered_idk)),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Mean and population standard deviation of one metric at one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub strategy: String,
    pub round: usize,
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub records: Vec<RoundRecord>,
    pub aggregate: Vec<AggregateRow>,
    pub failures: Vec<CellFailure>,
}

impl ExperimentResult {
    pub fn value(&self, strategy: &str, round: usize, metric: Metric) -> Option<&AggregateRow> {
        self.aggregate
            .iter()
            .find(|r| r.strategy == strategy && r.round == round && r.metric == metric)
    }

    pub fn mean(&self, strategy: &str, round: usize, metric: Metric) -> f64 {
        self.value(strategy, round, metric).map_or(f64::NAN, |r| r.mean)
    }

    /// Per-user trace of one metric, ordered by (user, round).
    pub fn trace(&self, strategy: &str, metric: Metric) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.strategy == strategy)
            .map(|r| metric.value(r))
            .collect()
    }
}

/// Runs every (strategy, user) cell. Cells share true preferences,
/// environments and candidate draws across strategies.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let setups: Vec<Result<UserSetup>> = (0..config.users)
        .into_par_iter()
        .map(|u| UserSetup::for_user(config, u))
        .collect();
    let cells: Vec<(usize, usize)> = (0..config.strategies.len())
        .flat_map(|s| (0..config.users).map(move |u| (s, u)))
        .collect();
    let outcomes: Vec<Result<Vec<RoundRecord>>> = cells
        .par_iter()
        .map(|&(s, u)| {
            let setup = setups[u].as_ref().map_err(Clone::clone)?;
            run_user(config, &config.strategies[s], u, setup)
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for ((s, u), outcome) in cells.into_iter().zip(outcomes) {
        match outcome {
            Ok(r) => records.extend(r),
            Err(e) => failures.push(CellFailure {
                strategy: config.strategies[s].label(),
                user: u,
                error: e.to_string(),
            }),
        }
    }
    let labels: Vec<String> = config.strategies.iter().map(SelectionConfig::label).collect();
    let aggregate = aggregate(&records, &labels, config.rounds);
    Ok(ExperimentResult {
        records,
        aggregate,
        failures,
    })
}

/// Per (strategy, round, metric) mean and population standard deviation.
pub fn aggregate(records: &[RoundRecord], strategies: &[String], rounds: usize) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for strategy in strategies {
        for round in 1..=rounds {
            let at_round: Vec<&RoundRecord> = records
                .iter()
                .filter(|r| &r.strategy == strategy && r.round == round)
                .collect();
            if at_round.is_empty() {
                continue;
            }
            for metric in Metric::ALL {
                let values: Vec<f64> = at_round.iter().map(|r| metric.value(r)).collect();
                let (mean, std) = mean_std(&values);
                rows.push(AggregateRow {
                    strategy: strategy.clone(),
                    round,
                    metric,
                    mean,
                    std,
                });
            }
        }
    }
    rows
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Lambda,
    K,
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(SweepParameter::Lambda),
            "k" => Ok(SweepParameter::K),
            other => Err(Error::config(format!(
                "unknown sweep parameter `{other}` (expected lambda or k)"
            ))),
        }
    }
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::Lambda => "lambda",
            SweepParameter::K => "k",
        }
    }

    /// The base configuration with this parameter set to `value`. A lambda
    /// applies to every combined strategy; k sets the simulated human's
    /// memory and leaves the robot's own model untouched.
    pub fn apply(&self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut config = base.clone();
        match self {
            SweepParameter::Lambda => {
                if !base.strategies.iter().any(|s| s.strategy == Strategy::Combined) {
                    return Err(Error::config("a lambda sweep needs a combined strategy"));
                }
                for s in config
                    .strategies
                    .iter_mut()
                    .filter(|s| s.strategy == Strategy::Combined)
                {
                    s.lambda = value;
                }
            }
            SweepParameter::K => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::config(format!("k must be a positive integer, got {value}")));
                }
                config.k = value as usize;
            }
        }
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub result: ExperimentResult,
}

/// Runs the experiment once per value with everything else fixed.
pub fn run_sweep(base: &ExperimentConfig, parameter: SweepParameter, values: &[f64]) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    values
        .iter()
        .map(|&value| {
            let config = parameter.apply(base, value)?;
            Ok(SweepPoint {
                value,
                result: run_experiment(&config)?,
            })
        })
        .collect()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rx = ranks(x);
    let ry = ranks(y);
    let (mx, _) = mean_std(&rx);
    let (my, _) = mean_std(&ry);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            out[o] = rank;
        }
        i = j + 1;
    }
    out
}
