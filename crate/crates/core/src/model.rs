//! Trajectories, questions, answers, and the pairwise answer model.
//!
//! Rewards are linear in normalized features. A simulated (or modeled) teacher
//! answers a pairwise question with a noisy choice whose "I don't know"
//! probability peaks when both options earn about the same reward.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Offset added to the competing option's reward in the choice model.
const CHOICE_MARGIN: f64 = 1.0;

/// Normalized task features of one trajectory. Components lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Euclidean distance to another feature vector of the same length.
    pub fn distance(&self, other: &FeatureVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// A 2-D or 3-D display point in workspace-normalized units.
pub type Waypoint = Vec<f64>;

/// A candidate behavior. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    id: u64,
    features: FeatureVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    waypoints: Option<Vec<Waypoint>>,
}

impl Trajectory {
    pub fn new(id: u64, features: impl Into<FeatureVector>) -> Self {
        Self {
            id,
            features: features.into(),
            waypoints: None,
        }
    }

    pub fn with_waypoints(id: u64, features: impl Into<FeatureVector>, waypoints: Vec<Waypoint>) -> Self {
        Self {
            id,
            features: features.into(),
            waypoints: Some(waypoints),
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn features(&self) -> &FeatureVector {
        &self.features
    }

    pub fn waypoints(&self) -> Option<&[Waypoint]> {
        self.waypoints.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }
}

/// Unit-norm preference weights over the task features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PreferencesRepr", into = "PreferencesRepr")]
pub struct Preferences {
    theta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PreferencesRepr {
    theta: Vec<f64>,
}

impl TryFrom<PreferencesRepr> for Preferences {
    type Error = Error;

    fn try_from(repr: PreferencesRepr) -> Result<Self> {
        Preferences::from_unit(repr.theta)
    }
}

impl From<Preferences> for PreferencesRepr {
    fn from(p: Preferences) -> Self {
        PreferencesRepr { theta: p.theta }
    }
}

impl Preferences {
    pub const NORM_TOLERANCE: f64 = 1e-9;

    /// Scales `theta` to unit norm. Fails on a zero or non-finite vector.
    pub fn normalized(theta: Vec<f64>) -> Result<Self> {
        let norm = norm(&theta);
        if !norm.is_finite() || norm == 0.0 || theta.is_empty() {
            return Err(Error::config("preference vector must have a finite, non-zero norm"));
        }
        Ok(Self {
            theta: theta.into_iter().map(|v| v / norm).collect(),
        })
    }

    /// Wraps an already unit-norm vector, rejecting anything off the sphere.
    pub fn from_unit(theta: Vec<f64>) -> Result<Self> {
        let n = norm(&theta);
        if (n - 1.0).abs() > Self::NORM_TOLERANCE {
            return Err(Error::config(format!("preference vector norm {n} is not 1")));
        }
        Ok(Self { theta })
    }

    /// Uniform draw on the unit sphere in `dim` dimensions.
    pub fn sample_uniform<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("feature dimension must be at least 1"));
        }
        loop {
            let v: Vec<f64> = (0..dim)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            if norm(&v) > 1e-12 {
                return Self::normalized(v);
            }
        }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Raw dot-product kernel behind [`reward`]. Accepts unnormalized weights.
pub fn linear_reward(weights: &[f64], features: &[f64]) -> f64 {
    weights.iter().zip(features).map(|(w, f)| w * f).sum()
}

/// Reward of a trajectory under the given preferences.
pub fn reward(trajectory: &Trajectory, prefs: &Preferences) -> Result<f64> {
    if trajectory.dim() != prefs.dim() {
        return Err(Error::DimensionMismatch {
            expected: prefs.dim(),
            actual: trajectory.dim(),
        });
    }
    Ok(linear_reward(prefs.theta(), trajectory.features().as_slice()))
}

/// A set of trajectories shown together, with the 1-based interaction number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    trajectories: Vec<Trajectory>,
    index: usize,
}

impl Question {
    pub fn new(trajectories: Vec<Trajectory>, index: usize) -> Result<Self> {
        if trajectories.len() < 2 {
            return Err(Error::UnsupportedQuestion(format!(
                "a question needs at least 2 trajectories, got {}",
                trajectories.len()
            )));
        }
        let dim = trajectories[0].dim();
        if let Some(t) = trajectories.iter().find(|t| t.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: t.dim(),
            });
        }
        Ok(Self { trajectories, index })
    }

    pub fn pair(a: Trajectory, b: Trajectory, index: usize) -> Result<Self> {
        Self::new(vec![a, b], index)
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.trajectories[0].dim()
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    /// The same question with its first two slots exchanged.
    pub fn swapped(&self) -> Self {
        let mut trajectories = self.trajectories.clone();
        trajectories.swap(0, 1);
        Self {
            trajectories,
            index: self.index,
        }
    }
}

/// The teacher's response. Choices are recorded by slot, not trajectory id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Answer {
    Choice {
        slot: usize,
    },
    #[serde(rename = "idk")]
    IDontKnow,
}

impl Answer {
    pub fn validate(&self, question: &Question) -> Result<()> {
        match *self {
            Answer::Choice { slot } if slot >= question.len() => Err(Error::InvalidAnswer(format!(
                "slot {slot} out of range for a {}-way question",
                question.len()
            ))),
            _ => Ok(()),
        }
    }
}

/// Probabilities of the three possible answers to a pairwise question.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnswerDistribution {
    pub first: f64,
    pub second: f64,
    pub idk: f64,
}

impl AnswerDistribution {
    pub fn prob(&self, answer: &Answer) -> f64 {
        match answer {
            Answer::Choice { slot: 0 } => self.first,
            Answer::Choice { slot: 1 } => self.second,
            Answer::Choice { .. } => 0.0,
            Answer::IDontKnow => self.idk,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.first, self.second, self.idk]
    }

    pub fn outcomes() -> [Answer; 3] {
        [
            Answer::Choice { slot: 0 },
            Answer::Choice { slot: 1 },
            Answer::IDontKnow,
        ]
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Answer probabilities given the reward of each option.
///
/// `P(first) = e^{r1} / (e^{r1} + e^{1 + r2})`, symmetrically for the second
/// option, and `P(idk) = P(first) * P(second) * (e^2 - 1)`. The three terms sum
/// to one exactly.
pub fn answer_distribution_from_rewards(r1: f64, r2: f64) -> AnswerDistribution {
    let first = logistic(r1 - r2 - CHOICE_MARGIN);
    let second = logistic(r2 - r1 - CHOICE_MARGIN);
    let idk = first * second * ((2.0 * CHOICE_MARGIN).exp() - 1.0);
    AnswerDistribution { first, second, idk }
}

/// Answer probabilities for a pairwise question under the given preferences.
pub fn answer_likelihood(question: &Question, prefs: &Preferences) -> Result<AnswerDistribution> {
    let [a, b] = pair_of(question)?;
    Ok(answer_distribution_from_rewards(reward(a, prefs)?, reward(b, prefs)?))
}

pub(crate) fn pair_of(question: &Question) -> Result<[&Trajectory; 2]> {
    match question.trajectories() {
        [a, b] => Ok([a, b]),
        other => Err(Error::UnsupportedQuestion(format!(
            "the answer model is defined for pairs, got {} trajectories",
            other.len()
        ))),
    }
}

/// Draws a simulated answer from [`answer_likelihood`].
pub fn sample_answer<R: Rng + ?Sized>(question: &Question, true_prefs: &Preferences, rng: &mut R) -> Result<Answer> {
    let dist = answer_likelihood(question, true_prefs)?;
    let u: f64 = rng.random();
    Ok(if u < dist.first {
        Answer::Choice { slot: 0 }
    } else if u < dist.first + dist.second {
        Answer::Choice { slot: 1 }
    } else {
        Answer::IDontKnow
    })
}

/// An immutable trajectory pool with a content-derived version tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Trajectory>", into = "Vec<Trajectory>")]
pub struct Pool {
    trajectories: Vec<Trajectory>,
    version: u64,
}

impl From<Vec<Trajectory>> for Pool {
    fn from(trajectories: Vec<Trajectory>) -> Self {
        let mut h = DefaultHasher::new();
        for t in &trajectories {
            t.id.hash(&mut h);
            for v in t.features.as_slice() {
                v.to_bits().hash(&mut h);
            }
        }
        let version = h.finish();
        Self { trajectories, version }
    }
}

impl From<Pool> for Vec<Trajectory> {
    fn from(pool: Pool) -> Self {
        pool.trajectories
    }
}

impl Pool {
    pub fn new(trajectories: Vec<Trajectory>) -> Self {
        trajectories.into()
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn get(&self, i: usize) -> &Trajectory {
        &self.trajectories[i]
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn dim(&self) -> Option<usize> {
        self.trajectories.first().map(Trajectory::dim)
    }

    pub fn by_id(&self, id: u64) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn prefs(v: &[f64]) -> Preferences {
        Preferences::normalized(v.to_vec()).unwrap()
    }

    #[test]
    fn reward_is_dot_product() {
        let t = Trajectory::new(0, vec![1.0, 0.5]);
        assert!((reward(&t, &prefs(&[0.6, 0.8])).unwrap() - 1.0).abs() < 1e-12);
        let zero = Trajectory::new(1, vec![0.0, 0.0, 0.0]);
        assert_eq!(reward(&zero, &prefs(&[0.3, -0.2, 0.9])).unwrap(), 0.0);
    }

    #[test]
    fn negative_height_weight_prefers_low_trajectories() {
        let p = prefs(&[0.0, -1.0]);
        let low = reward(&Trajectory::new(0, vec![0.5, 0.2]), &p).unwrap();
        let high = reward(&Trajectory::new(1, vec![0.5, 0.8]), &p).unwrap();
        assert!(low > high);
    }

    #[test]
    fn reward_rejects_dimension_mismatch() {
        let t = Trajectory::new(0, vec![1.0, 0.5, 0.1]);
        assert!(matches!(
            reward(&t, &prefs(&[1.0, 0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn preferences_reject_off_sphere() {
        assert!(Preferences::from_unit(vec![1.0, 1.0]).is_err());
        assert!(Preferences::normalized(vec![0.0, 0.0]).is_err());
        let json = serde_json::to_string(&prefs(&[3.0, 4.0])).unwrap();
        assert_eq!(json, r#"{"theta":[0.6,0.8]}"#);
        assert!(serde_json::from_str::<Preferences>(r#"{"theta":[1.0,1.0]}"#).is_err());
    }

    #[test]
    fn equal_rewards_give_closed_form() {
        let d = answer_distribution_from_rewards(0.3, 0.3);
        let e = std::f64::consts::E;
        assert!((d.first - 1.0 / (1.0 + e)).abs() < 1e-12);
        assert!((d.second - 1.0 / (1.0 + e)).abs() < 1e-12);
        assert!((d.idk - (e - 1.0) / (e + 1.0)).abs() < 1e-12);
        assert!((d.first - 0.26894).abs() < 1e-5);
        assert!((d.idk - 0.46212).abs() < 1e-5);
    }

    #[test]
    fn identical_pair_matches_equal_reward_case() {
        let t = Trajectory::new(0, vec![0.2, 0.7]);
        let q = Question::pair(t.clone(), Trajectory::new(1, vec![0.2, 0.7]), 1).unwrap();
        let d = answer_likelihood(&q, &prefs(&[0.4, -0.9])).unwrap();
        let e = answer_distribution_from_rewards(0.0, 0.0);
        assert!((d.first - e.first).abs() < 1e-12);
        assert!((d.idk - e.idk).abs() < 1e-12);
    }

    #[test]
    fn large_gap_saturates() {
        let d = answer_distribution_from_rewards(50.0, 0.0);
        assert!(d.first > 1.0 - 1e-12);
        assert!(d.idk < 1e-12);
    }

    #[test]
    fn likelihood_rejects_non_pairs() {
        let q = Question::new((0..3).map(|i| Trajectory::new(i, vec![0.1 * i as f64])).collect(), 1).unwrap();
        assert!(matches!(
            answer_likelihood(&q, &prefs(&[1.0])),
            Err(Error::UnsupportedQuestion(_))
        ));
    }

    #[test]
    fn question_rejects_mixed_dims_and_singletons() {
        let a = Trajectory::new(0, vec![0.1, 0.2]);
        assert!(Question::new(vec![a.clone()], 1).is_err());
        assert!(Question::pair(a, Trajectory::new(1, vec![0.1]), 1).is_err());
    }

    #[test]
    fn answer_json_shape() {
        let c = serde_json::to_string(&Answer::Choice { slot: 1 }).unwrap();
        assert_eq!(c, r#"{"kind":"choice","slot":1}"#);
        let i = serde_json::to_string(&Answer::IDontKnow).unwrap();
        assert_eq!(i, r#"{"kind":"idk"}"#);
        let q = Question::pair(
            Trajectory::new(3, vec![0.5]),
            Trajectory::with_waypoints(4, vec![0.25], vec![vec![0.0, 1.0]]),
            2,
        )
        .unwrap();
        let v: serde_json::Value = serde_json::to_value(&q).unwrap();
        assert_eq!(v["index"], 2);
        assert_eq!(v["trajectories"][0]["id"], 3);
        assert!(v["trajectories"][0].get("waypoints").is_none());
        assert_eq!(v["trajectories"][1]["waypoints"][0][1], 1.0);
    }

    #[test]
    fn answer_slot_validation() {
        let q = Question::pair(Trajectory::new(0, vec![0.0]), Trajectory::new(1, vec![1.0]), 1).unwrap();
        assert!(Answer::Choice { slot: 2 }.validate(&q).is_err());
        assert!(Answer::Choice { slot: 1 }.validate(&q).is_ok());
        assert!(Answer::IDontKnow.validate(&q).is_ok());
    }

    #[test]
    fn sampling_is_seeded() {
        let q = Question::pair(
            Trajectory::new(0, vec![0.3, 0.1]),
            Trajectory::new(1, vec![0.6, 0.9]),
            1,
        )
        .unwrap();
        let p = prefs(&[1.0, -0.5]);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..200)
                .map(|_| sample_answer(&q, &p, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
    }

    #[test]
    fn saturated_pair_picks_first_slot() {
        // Features far outside [0,1] to force a reward gap of 10.
        let q = Question::pair(Trajectory::new(0, vec![10.0]), Trajectory::new(1, vec![0.0]), 1).unwrap();
        let p = prefs(&[1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let hits = (0..n)
            .filter(|_| sample_answer(&q, &p, &mut rng).unwrap() == Answer::Choice { slot: 0 })
            .count();
        assert!(hits as f64 / n as f64 > 0.999);
    }

    #[test]
    fn equal_reward_idk_frequency() {
        let q = Question::pair(Trajectory::new(0, vec![0.4]), Trajectory::new(1, vec![0.4]), 1).unwrap();
        let p = prefs(&[1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let idk = (0..n)
            .filter(|_| sample_answer(&q, &p, &mut rng).unwrap() == Answer::IDontKnow)
            .count();
        assert!((idk as f64 / n as f64 - 0.4621).abs() < 0.01);
    }

    #[test]
    fn pool_version_tracks_content() {
        let a = Pool::new(vec![Trajectory::new(0, vec![0.1]), Trajectory::new(1, vec![0.2])]);
        let b = Pool::new(vec![Trajectory::new(0, vec![0.1]), Trajectory::new(1, vec![0.3])]);
        assert_ne!(a.version(), b.version());
        let json = serde_json::to_string(&a).unwrap();
        let back: Pool = serde_json::from_str(&json).unwrap();
        assert_eq!(back.version(), a.version());
    }
}
