//! The robot's posterior over preferences and the behavior it induces.

use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{answer_likelihood, linear_reward, Answer, Pool, Preferences, Question, Trajectory};

const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Resample-move settings applied after each reweighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateOptions {
    pub resample: bool,
    /// Resample when the effective sample size drops below this fraction of M.
    pub ess_fraction: f64,
    /// Standard deviation of the isotropic jitter applied after resampling.
    pub jitter: f64,
}

impl Default for UpdateOptions {
    fn default() -> Self {
        Self {
            resample: true,
            ess_fraction: 0.5,
            jitter: 0.05,
        }
    }
}

impl UpdateOptions {
    pub fn exact() -> Self {
        Self {
            resample: false,
            ..Self::default()
        }
    }
}

/// Weighted particle approximation of the posterior over preferences.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "BeliefSnapshot", into = "BeliefSnapshot")]
pub struct RobotBelief {
    particles: Vec<Preferences>,
    weights: Vec<f64>,
    generation: u64,
    /// Per-particle argmax pool index, keyed by pool version.
    argmax: OnceLock<(u64, Vec<usize>)>,
}

/// Serialized form of a [`RobotBelief`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BeliefSnapshot {
    pub particles: Vec<Preferences>,
    pub weights: Vec<f64>,
    pub generation: u64,
}

impl TryFrom<BeliefSnapshot> for RobotBelief {
    type Error = Error;

    fn try_from(s: BeliefSnapshot) -> Result<Self> {
        let mut belief = RobotBelief::from_parts(s.particles.clone(), s.weights.clone())?;
        // Keep stored weights bit-exact; from_parts only validated them.
        belief.weights = s.weights;
        belief.check_normalized()?;
        belief.generation = s.generation;
        Ok(belief)
    }
}

impl From<RobotBelief> for BeliefSnapshot {
    fn from(b: RobotBelief) -> Self {
        BeliefSnapshot {
            particles: b.particles,
            weights: b.weights,
            generation: b.generation,
        }
    }
}

impl PartialEq for RobotBelief {
    fn eq(&self, other: &Self) -> bool {
        self.particles == other.particles && self.weights == other.weights && self.generation == other.generation
    }
}

impl RobotBelief {
    /// `particles` drawn uniformly on the unit sphere with equal weights.
    pub fn init<R: Rng + ?Sized>(dim: usize, particles: usize, rng: &mut R) -> Result<Self> {
        if dim < 1 {
            return Err(Error::config("feature dimension must be at least 1"));
        }
        if particles < 2 {
            return Err(Error::config("robot belief needs at least 2 particles"));
        }
        let ps = (0..particles)
            .map(|_| Preferences::sample_uniform(dim, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::uniform(ps))
    }

    fn uniform(particles: Vec<Preferences>) -> Self {
        let m = particles.len();
        Self {
            particles,
            weights: vec![1.0 / m as f64; m],
            generation: 0,
            argmax: OnceLock::new(),
        }
    }

    /// Builds a belief from explicit particles; weights are renormalized.
    pub fn from_parts(particles: Vec<Preferences>, weights: Vec<f64>) -> Result<Self> {
        if particles.is_empty() || particles.len() != weights.len() {
            return Err(Error::DegenerateWeights(format!(
                "{} particles with {} weights",
                particles.len(),
                weights.len()
            )));
        }
        let dim = particles[0].dim();
        if let Some(p) = particles.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.dim(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::DegenerateWeights("negative or non-finite weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateWeights("weights sum to zero".into()));
        }
        Ok(Self {
            particles,
            weights: weights.into_iter().map(|w| w / total).collect(),
            generation: 0,
            argmax: OnceLock::new(),
        })
    }

    /// A belief certain of `prefs`.
    pub fn delta(prefs: Preferences) -> Self {
        Self::uniform(vec![prefs])
    }

    pub fn particles(&self) -> &[Preferences] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn dim(&self) -> usize {
        self.particles[0].dim()
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    pub fn snapshot(&self) -> BeliefSnapshot {
        self.clone().into()
    }

    pub(crate) fn check_normalized(&self) -> Result<()> {
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE || self.weights.iter().any(|w| w.is_nan() || *w < 0.0) {
            return Err(Error::DegenerateWeights(format!("weights sum to {total}")));
        }
        Ok(())
    }

    /// Weighted mean of the particles (not renormalized).
    pub fn posterior_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim()];
        for (p, w) in self.particles.iter().zip(&self.weights) {
            for (m, t) in mean.iter_mut().zip(p.theta()) {
                *m += w * t;
            }
        }
        mean
    }

    /// Normalized posterior mean, or the first heaviest particle (flagged
    /// `true`) when the mean has zero norm.
    pub fn point_estimate(&self) -> (Preferences, bool) {
        match Preferences::normalized(self.posterior_mean()) {
            Ok(p) => (p, false),
            Err(_) => {
                let mut heaviest = 0;
                for (i, w) in self.weights.iter().enumerate() {
                    if *w > self.weights[heaviest] {
                        heaviest = i;
                    }
                }
                (self.particles[heaviest].clone(), true)
            }
        }
    }

    /// Bayes-rule reweighting by the answer likelihood, followed by
    /// resample-move when the effective sample size collapses.
    pub fn update<R: Rng + ?Sized>(
        &self,
        question: &Question,
        answer: &Answer,
        options: &UpdateOptions,
        rng: &mut R,
    ) -> Result<Self> {
        answer.validate(question)?;
        let mut weights = Vec::with_capacity(self.len());
        for (p, w) in self.particles.iter().zip(&self.weights) {
            let lik = answer_likelihood(question, p)?.prob(answer);
            weights.push(w * lik);
        }
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::DegenerateEvidence);
        }
        weights.iter_mut().for_each(|w| *w /= total);

        let mut next = Self {
            particles: self.particles.clone(),
            weights,
            generation: self.generation + 1,
            argmax: self.argmax.clone(),
        };
        if options.resample && next.effective_sample_size() < options.ess_fraction * next.len() as f64 {
            next = next.resample_move(options.jitter, rng)?;
        }
        Ok(next)
    }

    fn resample_move<R: Rng + ?Sized>(self, jitter: f64, rng: &mut R) -> Result<Self> {
        let m = self.len();
        let step = 1.0 / m as f64;
        let mut u = rng.random::<f64>() * step;
        let mut cumulative = self.weights[0];
        let mut i = 0;
        let mut particles = Vec::with_capacity(m);
        for _ in 0..m {
            while u > cumulative && i < m - 1 {
                i += 1;
                cumulative += self.weights[i];
            }
            let moved: Vec<f64> = self.particles[i]
                .theta()
                .iter()
                .map(|t| t + jitter * rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let p = Preferences::normalized(moved).unwrap_or_else(|_| self.particles[i].clone());
            particles.push(p);
            u += step;
        }
        let mut next = Self::uniform(particles);
        next.generation = self.generation;
        Ok(next)
    }

    /// Index into `pool` of each particle's optimal trajectory.
    pub fn optimal_indices(&self, pool: &Pool) -> Result<Vec<usize>> {
        if let Some((version, cached)) = self.argmax.get() {
            if *version == pool.version() {
                return Ok(cached.clone());
            }
        }
        let indices = self
            .particles
            .iter()
            .map(|p| optimal_index(p, pool))
            .collect::<Result<Vec<_>>>()?;
        let _ = self.argmax.set((pool.version(), indices.clone()));
        Ok(indices)
    }
}

/// Pool index of the reward-maximizing trajectory; ties go to the lowest id.
pub fn optimal_index(prefs: &Preferences, pool: &Pool) -> Result<usize> {
    if pool.is_empty() {
        return Err(Error::config("trajectory pool is empty"));
    }
    let mut best = 0;
    let mut best_reward = f64::NEG_INFINITY;
    for (i, t) in pool.trajectories().iter().enumerate() {
        if t.dim() != prefs.dim() {
            return Err(Error::DimensionMismatch {
                expected: prefs.dim(),
                actual: t.dim(),
            });
        }
        let r = linear_reward(prefs.theta(), t.features().as_slice());
        if r > best_reward || (r == best_reward && t.id() < pool.get(best).id()) {
            best = i;
            best_reward = r;
        }
    }
    Ok(best)
}

pub fn optimal_trajectory<'a>(prefs: &Preferences, pool: &'a Pool) -> Result<&'a Trajectory> {
    optimal_index(prefs, pool).map(|i| pool.get(i))
}

/// Mean and standard deviation of the features the belief would produce if
/// deployed now.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningSummary {
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl LearningSummary {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if mu.len() != sigma.len() {
            return Err(Error::DimensionMismatch {
                expected: mu.len(),
                actual: sigma.len(),
            });
        }
        if sigma.iter().any(|s| s.is_nan() || *s < 0.0) {
            return Err(Error::config("summary standard deviations must be non-negative"));
        }
        Ok(Self { mu, sigma })
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// `(mu, sigma)` concatenated, length `2d`.
    pub fn as_vector(&self) -> Vec<f64> {
        self.mu.iter().chain(&self.sigma).copied().collect()
    }

    pub fn from_vector(v: &[f64]) -> Result<Self> {
        if !v.len().is_multiple_of(2) {
            return Err(Error::config("summary vector length must be even"));
        }
        let d = v.len() / 2;
        Self::new(v[..d].to_vec(), v[d..].to_vec())
    }
}

pub fn learning_summary(belief: &RobotBelief, pool: &Pool) -> Result<LearningSummary> {
    let indices = belief.optimal_indices(pool)?;
    let d = belief.dim();
    let mut mu = vec![0.0; d];
    for (&i, w) in indices.iter().zip(belief.weights()) {
        for (m, f) in mu.iter_mut().zip(pool.get(i).features().as_slice()) {
            *m += w * f;
        }
    }
    let mut var = vec![0.0; d];
    for (&i, w) in indices.iter().zip(belief.weights()) {
        for ((v, f), m) in var.iter_mut().zip(pool.get(i).features().as_slice()).zip(&mu) {
            *v += w * (f - m).powi(2);
        }
    }
    LearningSummary::new(mu, var.into_iter().map(|v| v.max(0.0).sqrt()).collect())
}

/// Expected reward gap, under `true_prefs`, between the truly optimal
/// trajectory and the trajectories the belief would deploy.
pub fn regret(belief: &RobotBelief, true_prefs: &Preferences, pool: &Pool) -> Result<f64> {
    let best = linear_reward(
        true_prefs.theta(),
        optimal_trajectory(true_prefs, pool)?.features().as_slice(),
    );
    let indices = belief.optimal_indices(pool)?;
    let gap: f64 = indices
        .iter()
        .zip(belief.weights())
        .map(|(&i, w)| w * (best - linear_reward(true_prefs.theta(), pool.get(i).features().as_slice())))
        .sum();
    Ok(gap.max(0.0))
}
