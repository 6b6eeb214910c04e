//! Active preference-based reward learning with questions that trade off
//! information gain for the learner against revealing what the learner
//! already knows to the human teacher.
//!
//! - [`model`]: trajectories, questions, answers and the pairwise answer model.
//! - [`robot`]: particle posterior over preferences, induced behavior summary, regret.
//! - [`human`]: bounded-memory observer model and the revealing score.
//! - [`select`]: candidate generation and the four selection strategies.
//! - [`env`]: built-in trajectory pools.
//! - [`harness`] and [`output`]: simulated-teacher experiments and result files.

pub mod env;
pub mod error;
pub mod harness;
pub mod human;
pub mod model;
pub mod output;
pub mod robot;
pub mod seed;
pub mod select;

pub use error::{Error, Result};
pub use human::HumanBelief;
pub use model::{Answer, Pool, Preferences, Question, Trajectory};
pub use robot::{LearningSummary, RobotBelief};
pub use select::{SelectionConfig, Strategy};
