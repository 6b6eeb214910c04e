//! Live teaching sessions.
//!
//! A session is driven entirely by its event log: every state change is an
//! [`Event`], and [`Session::apply`] is the only code path that mutates a
//! session. Per-round randomness is derived from the session seed and the
//! round number, so replaying the log reproduces the state bit for bit.

use serde::{Deserialize, Serialize};

use revealq_core::env::{Environment, EnvironmentKind, Scene};
use revealq_core::harness::ExperimentConfig;
use revealq_core::human::HumanBeliefSummary;
use revealq_core::model::{Answer, Question, Waypoint};
use revealq_core::robot::{learning_summary, optimal_trajectory, UpdateOptions};
use revealq_core::seed::{round_rng, stream_round_rng, user_rng, Stream};
use revealq_core::select::{candidate_questions, select_question, SelectionConfig, Strategy};
use revealq_core::{HumanBelief, RobotBelief};

use crate::error::{Result, ServiceError};

/// Questions a session may ask before it is complete.
pub const MAX_ROUNDS: usize = 12;

/// What a client chooses when opening a session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub environment: EnvironmentKind,
    pub strategy: Strategy,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_lambda() -> f64 {
    1.0
}

fn default_k() -> usize {
    3
}

impl SessionConfig {
    pub fn new(environment: EnvironmentKind, strategy: Strategy) -> Self {
        Self {
            environment,
            strategy,
            lambda: default_lambda(),
            k: default_k(),
            seed: 0,
        }
    }

    fn selection(&self, settings: &SessionSettings) -> SelectionConfig {
        SelectionConfig {
            strategy: self.strategy,
            lambda: self.lambda,
            candidate_count: settings.candidates,
            seed: self.seed,
        }
    }
}

/// Server-wide sizes, fixed when a session is created.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionSettings {
    pub dim: usize,
    pub pool_size: usize,
    pub candidates: usize,
    pub particles: usize,
    pub human_candidates: usize,
    pub max_rounds: usize,
    pub update: UpdateOptions,
}

impl SessionSettings {
    pub fn from_config(config: &ExperimentConfig) -> Self {
        Self {
            dim: config.dim,
            pool_size: config.pool_size,
            candidates: config.candidates,
            particles: config.particles,
            human_candidates: config.human_candidates,
            max_rounds: MAX_ROUNDS,
            update: config.update,
        }
    }
}

impl Default for SessionSettings {
    fn default() -> Self {
        Self::from_config(&ExperimentConfig::new(EnvironmentKind::Tabletop))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Active,
    Deployed,
    Expired,
}

/// One entry of the append-only session log. `at` is milliseconds since the
/// Unix epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created {
        at: u64,
        id: String,
        config: SessionConfig,
        settings: SessionSettings,
    },
    Asked {
        at: u64,
        index: usize,
        trajectory_ids: Vec<u64>,
    },
    Answered {
        at: u64,
        index: usize,
        answer: Answer,
    },
    Deployed {
        at: u64,
    },
    Expired {
        at: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    id: String,
    config: SessionConfig,
    settings: SessionSettings,
    status: Status,
    environment: Environment,
    robot: RobotBelief,
    human: HumanBelief,
    questions: Vec<Question>,
    answers: Vec<Answer>,
    created_at: u64,
    updated_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryView {
    pub id: u64,
    pub waypoints: Option<Vec<Waypoint>>,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionPayload {
    pub index: usize,
    pub max_rounds: usize,
    pub feature_names: Vec<String>,
    pub trajectories: Vec<TrajectoryView>,
    pub scene: Option<Scene>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZStar {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEstimate {
    pub name: String,
    pub mu: f64,
    pub sigma: f64,
}

/// What the teacher sees after each answer: the robot's learned summary and
/// the trajectory it would deploy right now.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefSummary {
    pub z_star: ZStar,
    pub features: Vec<FeatureEstimate>,
    pub preview_trajectory_id: u64,
    pub preview_waypoints: Option<Vec<Waypoint>>,
    pub round: usize,
    pub max_rounds: usize,
    pub status: Status,
    pub complete: bool,
}

/// Everything needed to rebuild a client view after a reload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub config: SessionConfig,
    pub status: Status,
    pub summary: BeliefSummary,
    pub pending_question: Option<QuestionPayload>,
}

impl Session {
    /// Opens a session and returns it with its creation event.
    pub fn create(id: String, config: SessionConfig, settings: SessionSettings, at: u64) -> Result<(Self, Event)> {
        let event = Event::Created {
            at,
            id,
            config,
            settings,
        };
        Ok((Self::from_created(&event)?, event))
    }

    fn from_created(event: &Event) -> Result<Self> {
        let Event::Created {
            at,
            id,
            config,
            settings,
        } = event
        else {
            return Err(ServiceError::invalid(
                "invalid_log",
                "log must start with a created event",
            ));
        };
        config.selection(settings).validate()?;
        if config.k < 1 {
            return Err(ServiceError::invalid("invalid_request", "k must be at least 1"));
        }
        let seed = config.seed;
        let environment = config.environment.build(
            settings.dim,
            settings.pool_size,
            &mut user_rng(seed, 0, Stream::Environment),
        )?;
        let d = environment.dim();
        let robot = RobotBelief::init(d, settings.particles, &mut user_rng(seed, 0, Stream::RobotPrior))?;
        let human = HumanBelief::init(
            d,
            settings.human_candidates,
            config.k,
            &mut user_rng(seed, 0, Stream::HumanCandidates),
        )?;
        Ok(Self {
            id: id.clone(),
            config: *config,
            settings: *settings,
            status: Status::Active,
            environment,
            robot,
            human,
            questions: Vec::new(),
            answers: Vec::new(),
            created_at: *at,
            updated_at: *at,
        })
    }

    /// Rebuilds a session from its full log.
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a Event>) -> Result<Self> {
        let mut events = events.into_iter();
        let first = events
            .next()
            .ok_or_else(|| ServiceError::invalid("invalid_log", "empty session log"))?;
        let mut session = Self::from_created(first)?;
        for e in events {
            session.apply(e)?;
        }
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn settings(&self) -> &SessionSettings {
        &self.settings
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn environment(&self) -> &Environment {
        &self.environment
    }

    pub fn robot(&self) -> &RobotBelief {
        &self.robot
    }

    pub fn human(&self) -> &HumanBelief {
        &self.human
    }

    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn answers(&self) -> &[Answer] {
        &self.answers
    }

    pub fn updated_at(&self) -> u64 {
        self.updated_at
    }

    /// Number of answered questions.
    pub fn round(&self) -> usize {
        self.answers.len()
    }

    pub fn is_complete(&self) -> bool {
        self.answers.len() >= self.settings.max_rounds
    }

    pub fn pending(&self) -> Option<&Question> {
        if self.questions.len() > self.answers.len() {
            self.questions.last()
        } else {
            None
        }
    }

    fn require_active(&self) -> Result<()> {
        if self.status != Status::Active {
            return Err(ServiceError::conflict(
                "session_not_active",
                format!("session is {:?}", self.status).to_lowercase(),
            ));
        }
        Ok(())
    }

    /// Chooses the next question with the session's strategy.
    pub fn ask(&mut self, at: u64) -> Result<Event> {
        self.require_active()?;
        if let Some(q) = self.pending() {
            return Err(ServiceError::conflict(
                "pending_question",
                format!("question {} is still unanswered", q.index()),
            ));
        }
        if self.is_complete() {
            return Err(ServiceError::conflict(
                "session_complete",
                "all questions have been asked",
            ));
        }
        let index = self.questions.len() + 1;
        let seed = self.config.seed;
        let pool = &self.environment.pool;
        let candidates = candidate_questions(pool, self.settings.candidates, &mut round_rng(seed, 0, index))?;
        let z_star = learning_summary(&self.robot, pool)?;
        let selection = select_question(
            &candidates,
            &self.robot,
            &self.human,
            &z_star,
            &self.config.selection(&self.settings),
            &mut stream_round_rng(seed, 0, Stream::Selection, index),
        )?;
        let event = Event::Asked {
            at,
            index,
            trajectory_ids: selection
                .chosen
                .question
                .trajectories()
                .iter()
                .map(|t| t.id())
                .collect(),
        };
        self.apply(&event)?;
        Ok(event)
    }

    pub fn answer(&mut self, index: usize, answer: Answer, at: u64) -> Result<Event> {
        self.require_active()?;
        if index >= 1 && index <= self.answers.len() {
            return Err(ServiceError::conflict(
                "already_answered",
                format!("question {index} was already answered"),
            ));
        }
        let Some(pending) = self.pending() else {
            return Err(ServiceError::conflict(
                "no_pending_question",
                "no question is awaiting an answer",
            ));
        };
        if pending.index() != index {
            return Err(ServiceError::conflict(
                "stale_index",
                format!("question {} is pending, got an answer for {index}", pending.index()),
            ));
        }
        answer.validate(pending)?;
        let event = Event::Answered { at, index, answer };
        self.apply(&event)?;
        Ok(event)
    }

    pub fn deploy(&mut self, at: u64) -> Result<Event> {
        self.require_active()?;
        let event = Event::Deployed { at };
        self.apply(&event)?;
        Ok(event)
    }

    pub fn expire(&mut self, at: u64) -> Result<Event> {
        self.require_active()?;
        let event = Event::Expired { at };
        self.apply(&event)?;
        Ok(event)
    }

    /// Applies one logged event. Preconditions are rechecked so a corrupt
    /// log fails loudly instead of producing a divergent state.
    pub fn apply(&mut self, event: &Event) -> Result<()> {
        let bad = |msg: String| ServiceError::invalid("invalid_log", msg);
        match event {
            Event::Created { .. } => return Err(bad("duplicate created event".into())),
            Event::Asked {
                at,
                index,
                trajectory_ids,
            } => {
                self.require_active()?;
                if *index != self.questions.len() + 1 || self.pending().is_some() {
                    return Err(bad(format!("unexpected question index {index}")));
                }
                let trajectories = trajectory_ids
                    .iter()
                    .map(|id| {
                        self.environment
                            .pool
                            .by_id(*id)
                            .cloned()
                            .ok_or_else(|| bad(format!("unknown trajectory id {id}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let question = Question::new(trajectories, *index)?;
                self.human = self.human.observe(&question)?;
                self.questions.push(question);
                self.updated_at = *at;
            }
            Event::Answered { at, index, answer } => {
                self.require_active()?;
                let question = self
                    .pending()
                    .filter(|q| q.index() == *index)
                    .ok_or_else(|| bad(format!("answer for question {index} has no matching question")))?;
                let mut rng = stream_round_rng(self.config.seed, 0, Stream::Resampling, *index);
                self.robot = self.robot.update(question, answer, &self.settings.update, &mut rng)?;
                self.answers.push(*answer);
                self.updated_at = *at;
            }
            Event::Deployed { at } => {
                self.require_active()?;
                self.status = Status::Deployed;
                self.updated_at = *at;
            }
            Event::Expired { at } => {
                self.require_active()?;
                self.status = Status::Expired;
                self.updated_at = *at;
            }
        }
        Ok(())
    }

    pub fn question_payload(&self, question: &Question) -> QuestionPayload {
        QuestionPayload {
            index: question.index(),
            max_rounds: self.settings.max_rounds,
            feature_names: self.environment.feature_names.clone(),
            trajectories: question
                .trajectories()
                .iter()
                .map(|t| TrajectoryView {
                    id: t.id(),
                    waypoints: t.waypoints().map(<[Waypoint]>::to_vec),
                    features: t.features().as_slice().to_vec(),
                })
                .collect(),
            scene: self.environment.scene.clone(),
        }
    }

    pub fn summary(&self) -> Result<BeliefSummary> {
        let pool = &self.environment.pool;
        let z = learning_summary(&self.robot, pool)?;
        let (estimate, _) = self.robot.point_estimate();
        let preview = optimal_trajectory(&estimate, pool)?;
        Ok(BeliefSummary {
            features: self
                .environment
                .feature_names
                .iter()
                .zip(z.mu().iter().zip(z.sigma()))
                .map(|(name, (mu, sigma))| FeatureEstimate {
                    name: name.clone(),
                    mu: *mu,
                    sigma: *sigma,
                })
                .collect(),
            z_star: ZStar {
                mu: z.mu().to_vec(),
                sigma: z.sigma().to_vec(),
            },
            preview_trajectory_id: preview.id(),
            preview_waypoints: preview.waypoints().map(<[Waypoint]>::to_vec),
            round: self.round(),
            max_rounds: self.settings.max_rounds,
            status: self.status,
            complete: self.is_complete(),
        })
    }

    pub fn view(&self) -> Result<SessionView> {
        Ok(SessionView {
            session_id: self.id.clone(),
            config: self.config,
            status: self.status,
            summary: self.summary()?,
            pending_question: self.pending().map(|q| self.question_payload(q)),
        })
    }

    pub fn debug_summary(&self) -> HumanBeliefSummary {
        self.human.summary()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SessionSettings {
        SessionSettings {
            candidates: 20,
            particles: 60,
            human_candidates: 50,
            ..SessionSettings::default()
        }
    }

    fn open(strategy: Strategy) -> (Session, Vec<Event>) {
        let config = SessionConfig::new(EnvironmentKind::Tabletop, strategy);
        let (s, e) = Session::create("s1".into(), config, small(), 1).unwrap();
        (s, vec![e])
    }

    #[test]
    fn first_question_has_index_one() {
        let (mut s, _) = open(Strategy::Informative);
        s.ask(2).unwrap();
        assert_eq!(s.pending().unwrap().index(), 1);
        assert_eq!(s.round(), 0);
    }

    #[test]
    fn asking_twice_conflicts() {
        let (mut s, _) = open(Strategy::Informative);
        s.ask(2).unwrap();
        let before = s.clone();
        let err = s.ask(3).unwrap_err();
        assert_eq!(err.code(), "pending_question");
        assert_eq!(s, before);
    }

    #[test]
    fn answer_checks_index() {
        let (mut s, _) = open(Strategy::Random);
        assert_eq!(
            s.answer(1, Answer::IDontKnow, 2).unwrap_err().code(),
            "no_pending_question"
        );
        s.ask(2).unwrap();
        assert_eq!(s.answer(2, Answer::IDontKnow, 3).unwrap_err().code(), "stale_index");
        assert_eq!(
            s.answer(1, Answer::Choice { slot: 2 }, 3).unwrap_err().code(),
            "invalid_answer"
        );
        s.answer(1, Answer::Choice { slot: 0 }, 3).unwrap();
        assert_eq!(
            s.answer(1, Answer::IDontKnow, 4).unwrap_err().code(),
            "already_answered"
        );
        assert_eq!(s.round(), 1);
    }

    #[test]
    fn completes_after_max_rounds() {
        let (mut s, _) = open(Strategy::Random);
        for i in 1..=MAX_ROUNDS {
            s.ask(i as u64).unwrap();
            s.answer(i, Answer::Choice { slot: i % 2 }, i as u64).unwrap();
        }
        assert!(s.is_complete());
        assert_eq!(s.ask(99).unwrap_err().code(), "session_complete");
        assert!(s.summary().unwrap().complete);
    }

    #[test]
    fn deploy_is_terminal() {
        let (mut s, _) = open(Strategy::Informative);
        s.ask(2).unwrap();
        s.deploy(3).unwrap();
        assert_eq!(s.status(), Status::Deployed);
        assert_eq!(
            s.answer(1, Answer::IDontKnow, 4).unwrap_err().code(),
            "session_not_active"
        );
        assert_eq!(s.deploy(5).unwrap_err().code(), "session_not_active");
        assert_eq!(s.expire(5).unwrap_err().code(), "session_not_active");
    }

    #[test]
    fn replay_reproduces_state() {
        let (mut s, mut log) = open(Strategy::Combined);
        for i in 1..=5 {
            log.push(s.ask(10 * i as u64).unwrap());
            let a = if i == 3 {
                Answer::IDontKnow
            } else {
                Answer::Choice { slot: i % 2 }
            };
            log.push(s.answer(i, a, 10 * i as u64 + 1).unwrap());
        }
        log.push(s.deploy(99).unwrap());
        assert_eq!(Session::replay(&log).unwrap(), s);
    }

    #[test]
    fn idk_on_identical_pair_leaves_summary_unchanged() {
        let (mut s, _) = open(Strategy::Informative);
        let path = s.environment.pool.get(0).waypoints().unwrap().to_vec();
        let paths = vec![path.clone(), path.clone(), path];
        s.environment = Environment::from_paths(EnvironmentKind::Tabletop, paths).unwrap();
        let before = s.summary().unwrap();
        s.ask(2).unwrap();
        s.answer(1, Answer::IDontKnow, 3).unwrap();
        let after = s.summary().unwrap();
        for (a, b) in before.z_star.sigma.iter().zip(&after.z_star.sigma) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn summary_names_every_feature() {
        let (s, _) = open(Strategy::Informative);
        let summary = s.summary().unwrap();
        let names: Vec<&str> = summary.features.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["height", "ball_distance", "bowl"]);
        assert_eq!(summary.preview_waypoints.unwrap().len(), 5);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let config = SessionConfig {
            lambda: -1.0,
            ..SessionConfig::new(EnvironmentKind::Driving, Strategy::Combined)
        };
        assert!(Session::create("x".into(), config, small(), 0).is_err());
        let config = SessionConfig {
            k: 0,
            ..SessionConfig::new(EnvironmentKind::Driving, Strategy::Combined)
        };
        assert!(Session::create("x".into(), config, small(), 0).is_err());
    }
}
