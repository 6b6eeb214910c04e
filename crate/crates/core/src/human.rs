//! Bounded-memory observer model: what a human infers about the robot's
//! learning from the last `k` questions it asked.
//!
//! Each question is summarized by the mean and population standard deviation
//! of its members' features. The observer expects a robot that has learned
//! summary `z` to ask questions whose statistics sit close to `z`, with
//! log-likelihood `-|(mu_Q, sigma_Q) - z|^2`. The posterior over a fixed set
//! of candidate summaries is the prior times the product of likelihoods over
//! the memory window.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Question;
use crate::robot::LearningSummary;

/// Feature mean and population standard deviation across a question's members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionStats {
    mu_q: Vec<f64>,
    sigma_q: Vec<f64>,
}

impl QuestionStats {
    pub fn mu_q(&self) -> &[f64] {
        &self.mu_q
    }

    pub fn sigma_q(&self) -> &[f64] {
        &self.sigma_q
    }

    pub fn as_vector(&self) -> Vec<f64> {
        self.mu_q.iter().chain(&self.sigma_q).copied().collect()
    }

    fn sq_distance(&self, z: &LearningSummary) -> f64 {
        let mu: f64 = self.mu_q.iter().zip(z.mu()).map(|(a, b)| (a - b).powi(2)).sum();
        let sigma: f64 = self.sigma_q.iter().zip(z.sigma()).map(|(a, b)| (a - b).powi(2)).sum();
        mu + sigma
    }
}

pub fn question_stats(question: &Question) -> QuestionStats {
    let n = question.len() as f64;
    let d = question.dim();
    let mut mu_q = vec![0.0; d];
    for t in question.trajectories() {
        for (m, f) in mu_q.iter_mut().zip(t.features().as_slice()) {
            *m += f;
        }
    }
    mu_q.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for t in question.trajectories() {
        for ((v, f), m) in var.iter_mut().zip(t.features().as_slice()).zip(&mu_q) {
            *v += (f - m).powi(2);
        }
    }
    let sigma_q = var.into_iter().map(|v| (v / n).sqrt()).collect();
    QuestionStats { mu_q, sigma_q }
}

/// Unnormalized log-likelihood that a robot which learned `z` asks a question
/// with these statistics.
pub fn question_log_likelihood(stats: &QuestionStats, z: &LearningSummary) -> Result<f64> {
    if stats.mu_q.len() != z.dim() {
        return Err(Error::DimensionMismatch {
            expected: z.dim(),
            actual: stats.mu_q.len(),
        });
    }
    Ok(-stats.sq_distance(z))
}

/// Observer posterior over a fixed set of candidate learning summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanBelief {
    candidates: Vec<LearningSummary>,
    /// Normalized log posterior weights.
    log_weights: Vec<f64>,
    window: VecDeque<QuestionStats>,
    k: usize,
}

impl HumanBelief {
    /// Samples `count` candidates with means in `[0,1]^d` and standard
    /// deviations in `[0,0.5]^d` under a uniform prior and an empty window.
    pub fn init<R: Rng + ?Sized>(dim: usize, count: usize, k: usize, rng: &mut R) -> Result<Self> {
        if dim < 1 {
            return Err(Error::config("feature dimension must be at least 1"));
        }
        if count < 2 {
            return Err(Error::config("human model needs at least 2 candidates"));
        }
        let candidates = (0..count)
            .map(|_| {
                let mu = (0..dim).map(|_| rng.random_range(0.0..=1.0)).collect();
                let sigma = (0..dim).map(|_| rng.random_range(0.0..=0.5)).collect();
                LearningSummary::new(mu, sigma)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_candidates(candidates, k)
    }

    pub fn with_candidates(candidates: Vec<LearningSummary>, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::config("memory length k must be at least 1"));
        }
        if candidates.is_empty() {
            return Err(Error::config("human model needs candidates"));
        }
        let dim = candidates[0].dim();
        if let Some(c) = candidates.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: c.dim(),
            });
        }
        let uniform = -(candidates.len() as f64).ln();
        Ok(Self {
            log_weights: vec![uniform; candidates.len()],
            candidates,
            window: VecDeque::with_capacity(k),
            k,
        })
    }

    pub fn candidates(&self) -> &[LearningSummary] {
        &self.candidates
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn window(&self) -> impl ExactSizeIterator<Item = &QuestionStats> {
        self.window.iter()
    }

    pub fn dim(&self) -> usize {
        self.candidates[0].dim()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Sum over `window` of the log-likelihood of each question given `z`.
    fn window_log_likelihood<'a>(window: impl Iterator<Item = &'a QuestionStats>, z: &LearningSummary) -> f64 {
        window.map(|s| -s.sq_distance(z)).sum()
    }

    /// Adds a question to memory, evicting the oldest beyond `k`, and
    /// recomputes the posterior from the prior and the window.
    pub fn observe(&self, question: &Question) -> Result<Self> {
        self.check_dim(question)?;
        let mut window = self.window.clone();
        if window.len() == self.k {
            window.pop_front();
        }
        window.push_back(question_stats(question));
        let log_unnorm: Vec<f64> = self
            .candidates
            .iter()
            .map(|z| Self::window_log_likelihood(window.iter(), z))
            .collect();
        let lse = log_sum_exp(&log_unnorm);
        Ok(Self {
            candidates: self.candidates.clone(),
            log_weights: log_unnorm.into_iter().map(|l| l - lse).collect(),
            window,
            k: self.k,
        })
    }

    fn check_dim(&self, question: &Question) -> Result<()> {
        if question.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: question.dim(),
            });
        }
        Ok(())
    }

    /// Posterior density the observer would place on `z_star` after also
    /// seeing `candidate`, approximated by treating `z_star` as one extra
    /// support point alongside the candidates. Always in `(0, 1)`.
    pub fn revealing_score(&self, candidate: &Question, z_star: &LearningSummary) -> Result<f64> {
        self.check_dim(candidate)?;
        if z_star.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: z_star.dim(),
            });
        }
        let stats = question_stats(candidate);
        let skip = usize::from(self.window.len() == self.k);
        let hypothetical = || self.window.iter().skip(skip).chain(std::iter::once(&stats));
        // The uniform prior is common to every point and cancels.
        let target = Self::window_log_likelihood(hypothetical(), z_star);
        let others: Vec<f64> = self
            .candidates
            .iter()
            .map(|z| Self::window_log_likelihood(hypothetical(), z))
            .collect();
        let max = others.iter().copied().fold(target, f64::max);
        let num = (target - max).exp();
        let den = num + others.iter().map(|l| (l - max).exp()).sum::<f64>();
        Ok(num / den)
    }

    /// Posterior mean of the candidate summaries, as a `2d` vector.
    pub fn posterior_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; 2 * self.dim()];
        for (z, lw) in self.candidates.iter().zip(&self.log_weights) {
            let w = lw.exp();
            for (m, v) in mean.iter_mut().zip(z.as_vector()) {
                *m += w * v;
            }
        }
        mean
    }

    /// Shannon entropy of the posterior weights, in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .log_weights
            .iter()
            .map(|l| if l.is_finite() { l.exp() * l } else { 0.0 })
            .sum::<f64>()
    }

    pub fn summary(&self) -> HumanBeliefSummary {
        let mean = self.posterior_mean();
        let d = self.dim();
        HumanBeliefSummary {
            mean_mu: mean[..d].to_vec(),
            mean_sigma: mean[d..].to_vec(),
            entropy: self.entropy(),
            k: self.k,
            window: self.window.iter().cloned().collect(),
        }
    }
}

/// Distance between the observer's posterior-mean estimate and the robot's
/// actual summary, scaled by `1/sqrt(2d)`.
pub fn human_error(belief: &HumanBelief, z_star: &LearningSummary) -> Result<f64> {
    if z_star.dim() != belief.dim() {
        return Err(Error::DimensionMismatch {
            expected: belief.dim(),
            actual: z_star.dim(),
        });
    }
    let mean = belief.posterior_mean();
    let dist = mean
        .iter()
        .zip(z_star.as_vector())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(dist / ((2 * belief.dim()) as f64).sqrt())
}

/// Debug view of the observer's posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanBeliefSummary {
    pub mean_mu: Vec<f64>,
    pub mean_sigma: Vec<f64>,
    pub entropy: f64,
    pub k: usize,
    pub window: Vec<QuestionStats>,
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
