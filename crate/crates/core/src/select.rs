//! Candidate generation and question selection strategies.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::human::HumanBelief;
use crate::model::{answer_likelihood, AnswerDistribution, Pool, Question};
use crate::robot::{optimal_trajectory, LearningSummary, RobotBelief};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Random,
    Informative,
    Revealing,
    Combined,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Informative => "informative",
            Strategy::Revealing => "revealing",
            Strategy::Combined => "combined",
        }
    }

    fn needs_reveal(&self) -> bool {
        matches!(self, Strategy::Revealing | Strategy::Combined)
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Strategy::Random),
            "informative" => Ok(Strategy::Informative),
            "revealing" => Ok(Strategy::Revealing),
            "combined" => Ok(Strategy::Combined),
            other => Err(Error::config(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub strategy: Strategy,
    /// Weight on the revealing score; only used by `Combined`.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_candidates")]
    pub candidate_count: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_lambda() -> f64 {
    1.0
}

fn default_candidates() -> usize {
    100
}

impl SelectionConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            lambda: default_lambda(),
            candidate_count: default_candidates(),
            seed: 0,
        }
    }

    pub fn combined(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::new(Strategy::Combined)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::config(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if self.candidate_count == 0 {
            return Err(Error::config("candidate_count must be at least 1"));
        }
        Ok(())
    }

    /// Label used in tables, e.g. `combined(lambda=1)`.
    pub fn label(&self) -> String {
        match self.strategy {
            Strategy::Combined => format!("combined(lambda={})", self.lambda),
            s => s.name().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredQuestion {
    pub question: Question,
    /// Expected information gain about the preferences, in bits.
    pub info_gain: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reveal_score: Option<f64>,
    pub combined: f64,
}

/// Per-candidate score line for analysis dumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub candidate: usize,
    pub trajectory_ids: Vec<u64>,
    pub info_gain: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reveal_score: Option<f64>,
    pub combined: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Position of the chosen question in the candidate list.
    pub index: usize,
    pub chosen: ScoredQuestion,
    pub scores: Vec<CandidateScore>,
}

/// Up to `count` distinct unordered pairs from the pool, sampled uniformly
/// without replacement. Every pair is returned when `count` covers them all.
pub fn candidate_questions<R: Rng + ?Sized>(pool: &Pool, count: usize, rng: &mut R) -> Result<Vec<Question>> {
    let n = pool.len();
    if n < 2 {
        return Err(Error::config(format!("pool needs at least 2 trajectories, has {n}")));
    }
    let total = n * (n - 1) / 2;
    let picks: Vec<usize> = if count >= total {
        (0..total).collect()
    } else {
        index::sample(rng, total, count).into_vec()
    };
    picks
        .into_iter()
        .map(|p| {
            let (i, j) = unrank_pair(p, n);
            Question::pair(pool.get(i).clone(), pool.get(j).clone(), 0)
        })
        .collect()
}

/// Maps a rank in `0..n(n-1)/2` to the pair `(i, j)` with `i < j`, in
/// row-major order.
fn unrank_pair(mut rank: usize, n: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = n - 1 - i;
        if rank < row {
            return (i, i + 1 + rank);
        }
        rank -= row;
        i += 1;
    }
}

/// Mutual information, in bits, between the answer to `question` and the
/// preferences, under the particle belief.
pub fn info_gain(question: &Question, belief: &RobotBelief) -> Result<f64> {
    belief.check_normalized()?;
    let dists = belief
        .particles()
        .iter()
        .map(|p| answer_likelihood(question, p))
        .collect::<Result<Vec<AnswerDistribution>>>()?;
    let mut marginal = [0.0; 3];
    for (d, w) in dists.iter().zip(belief.weights()) {
        for (m, p) in marginal.iter_mut().zip(d.as_array()) {
            *m += w * p;
        }
    }
    let mut gain = 0.0;
    for (d, w) in dists.iter().zip(belief.weights()) {
        if *w == 0.0 {
            continue;
        }
        for (p, m) in d.as_array().into_iter().zip(marginal) {
            if p > 0.0 {
                gain += w * p * (p / m).log2();
            }
        }
    }
    Ok(gain.max(0.0))
}

/// Scores every candidate and returns the strategy's choice. Ties go to the
/// earliest candidate.
pub fn select_question<R: Rng + ?Sized>(
    candidates: &[Question],
    belief: &RobotBelief,
    human: &HumanBelief,
    z_star: &LearningSummary,
    config: &SelectionConfig,
    rng: &mut R,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::config("no candidate questions to select from"));
    }
    config.validate()?;
    let strategy = config.strategy;
    let scores = candidates
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            let info_gain = info_gain(q, belief)?;
            let reveal_score = if strategy.needs_reveal() {
                Some(human.revealing_score(q, z_star)?)
            } else {
                None
            };
            let combined = match strategy {
                Strategy::Combined => info_gain + config.lambda * reveal_score.unwrap_or(0.0),
                Strategy::Revealing => reveal_score.unwrap_or(0.0),
                Strategy::Informative | Strategy::Random => info_gain,
            };
            Ok(CandidateScore {
                candidate: i,
                trajectory_ids: q.trajectories().iter().map(|t| t.id()).collect(),
                info_gain,
                reveal_score,
                combined,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let index = match strategy {
        Strategy::Random => rng.random_range(0..candidates.len()),
        _ => first_argmax(scores.iter().map(|s| s.combined)),
    };
    let s = &scores[index];
    Ok(Selection {
        index,
        chosen: ScoredQuestion {
            question: candidates[index].clone(),
            info_gain: s.info_gain,
            reveal_score: s.reveal_score,
            combined: s.combined,
        },
        scores,
    })
}

fn first_argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub value: f64,
    /// Set when the posterior mean had zero norm and the heaviest particle
    /// stood in for it.
    pub fallback: bool,
}

/// Summed feature distance between the question's two trajectories and the
/// trajectory optimal under the normalized posterior-mean preferences.
pub fn convergence_metric(question: &Question, belief: &RobotBelief, pool: &Pool) -> Result<Convergence> {
    let [a, b] = crate::model::pair_of(question)?;
    let (prefs, fallback) = belief.point_estimate();
    let target = optimal_trajectory(&prefs, pool)?.features();
    Ok(Convergence {
        value: target.distance(a.features()) + target.distance(b.features()),
        fallback,
    })
}
