//! Trajectory pools for the built-in environments.
//!
//! Features are analytic functions of waypoint polylines over a fixed scene,
//! min-max normalized over the generated pool. The normalization ranges are
//! frozen into the environment so features can be recomputed from waypoints.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FeatureVector, Pool, Trajectory, Waypoint};

pub const TABLETOP_WAYPOINTS: usize = 5;
pub const DRIVING_WAYPOINTS: usize = 10;

pub const BALL: [f64; 2] = [0.5, 0.5];
pub const BOWL: [f64; 2] = [0.8, 0.2];
/// Planar distance at which the bowl feature reaches zero.
pub const BOWL_RADIUS: f64 = 0.5;
pub const OBSTACLE: [f64; 2] = [0.35, 0.55];
pub const LANE_CENTER: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentKind {
    Tabletop,
    Driving,
    Synthetic,
}

impl EnvironmentKind {
    pub fn name(&self) -> &'static str {
        match self {
            EnvironmentKind::Tabletop => "tabletop",
            EnvironmentKind::Driving => "driving",
            EnvironmentKind::Synthetic => "synthetic",
        }
    }

    pub fn build<R: Rng + ?Sized>(&self, dim: usize, pool_size: usize, rng: &mut R) -> Result<Environment> {
        match self {
            EnvironmentKind::Tabletop => build_tabletop(pool_size, rng),
            EnvironmentKind::Driving => build_driving(pool_size, rng),
            EnvironmentKind::Synthetic => build_synthetic(dim, pool_size, rng),
        }
    }
}

impl std::str::FromStr for EnvironmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tabletop" => Ok(EnvironmentKind::Tabletop),
            "driving" => Ok(EnvironmentKind::Driving),
            "synthetic" => Ok(EnvironmentKind::Synthetic),
            other => Err(Error::config(format!("unknown environment `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub name: String,
    pub position: Vec<f64>,
}

/// Scene layout shared by the feature maps and the renderer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub landmarks: Vec<Landmark>,
    pub waypoints_per_trajectory: usize,
}

/// Raw feature range frozen at pool construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub min: f64,
    pub max: f64,
}

impl FeatureRange {
    fn apply(&self, raw: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            ((raw - self.min) / span).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

type RawFeatures = fn(&[Waypoint]) -> Vec<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub kind: EnvironmentKind,
    pub feature_names: Vec<String>,
    pub pool: Pool,
    pub normalization: Vec<FeatureRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<Scene>,
}

impl Environment {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    /// Recomputes normalized features from waypoints using the frozen ranges.
    /// `None` for environments without geometry.
    pub fn features_of(&self, waypoints: &[Waypoint]) -> Option<FeatureVector> {
        let raw = match self.kind {
            EnvironmentKind::Tabletop => tabletop_raw(waypoints),
            EnvironmentKind::Driving => driving_raw(waypoints),
            EnvironmentKind::Synthetic => return None,
        };
        Some(normalize_with(&raw, &self.normalization))
    }

    /// Builds an environment from explicit waypoint polylines. Features are
    /// computed and min-max normalized over exactly these paths.
    pub fn from_paths(kind: EnvironmentKind, paths: Vec<Vec<Waypoint>>) -> Result<Self> {
        let (raw_fn, names, scene): (RawFeatures, _, _) = match kind {
            EnvironmentKind::Tabletop => (tabletop_raw, tabletop_names(), tabletop_scene()),
            EnvironmentKind::Driving => (driving_raw, driving_names(), driving_scene()),
            EnvironmentKind::Synthetic => return Err(Error::config("the synthetic environment has no geometry")),
        };
        if paths.len() < 2 {
            return Err(Error::config("pool_size must be at least 2"));
        }
        if let Some(p) = paths.iter().find(|p| p.len() != scene.waypoints_per_trajectory) {
            return Err(Error::config(format!(
                "{} paths need {} waypoints, got {}",
                kind.name(),
                scene.waypoints_per_trajectory,
                p.len()
            )));
        }
        let raw: Vec<Vec<f64>> = paths.iter().map(|p| raw_fn(p)).collect();
        let ranges = ranges_of(&raw);
        let trajectories = paths
            .into_iter()
            .zip(&raw)
            .enumerate()
            .map(|(i, (path, r))| Trajectory::with_waypoints(i as u64, normalize_with(r, &ranges), path))
            .collect();
        Ok(Self {
            kind,
            feature_names: names,
            pool: Pool::new(trajectories),
            normalization: ranges,
            scene: Some(scene),
        })
    }
}

fn ranges_of(raw: &[Vec<f64>]) -> Vec<FeatureRange> {
    let d = raw[0].len();
    (0..d)
        .map(|j| {
            let (min, max) = raw
                .iter()
                .map(|r| r[j])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            FeatureRange { min, max }
        })
        .collect()
}

fn normalize_with(raw: &[f64], ranges: &[FeatureRange]) -> FeatureVector {
    raw.iter()
        .zip(ranges)
        .map(|(v, r)| r.apply(*v))
        .collect::<Vec<_>>()
        .into()
}

/// Min-max normalizes each feature column over the given rows.
pub fn normalize_features(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if rows.is_empty() {
        return Vec::new();
    }
    let ranges = ranges_of(rows);
    rows.iter().map(|r| normalize_with(r, &ranges).into_vec()).collect()
}

fn planar_distance(p: &[f64], q: &[f64; 2]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

fn tabletop_names() -> Vec<String> {
    vec!["height".into(), "ball_distance".into(), "bowl".into()]
}

fn tabletop_scene() -> Scene {
    Scene {
        landmarks: vec![
            Landmark {
                name: "ball".into(),
                position: BALL.to_vec(),
            },
            Landmark {
                name: "bowl".into(),
                position: BOWL.to_vec(),
            },
        ],
        waypoints_per_trajectory: TABLETOP_WAYPOINTS,
    }
}

/// Unnormalized (height, ball distance, bowl) for an arm path of `(x, y, z)`
/// waypoints.
fn tabletop_raw(path: &[Waypoint]) -> Vec<f64> {
    let height = path.iter().map(|w| w[2]).sum::<f64>() / path.len() as f64;
    let ball = path
        .iter()
        .map(|w| planar_distance(w, &BALL))
        .fold(f64::INFINITY, f64::min);
    let last = path.last().expect("non-empty path");
    let bowl = 1.0 - (planar_distance(last, &BOWL) / BOWL_RADIUS).clamp(0.0, 1.0);
    vec![height, ball, bowl]
}

fn driving_names() -> Vec<String> {
    vec!["speed".into(), "obstacle_clearance".into(), "lane_offset".into()]
}

fn driving_scene() -> Scene {
    Scene {
        landmarks: vec![
            Landmark {
                name: "obstacle".into(),
                position: OBSTACLE.to_vec(),
            },
            Landmark {
                name: "lane_center".into(),
                position: vec![LANE_CENTER, 0.0],
            },
        ],
        waypoints_per_trajectory: DRIVING_WAYPOINTS,
    }
}

/// Unnormalized (speed, obstacle clearance, lane offset) for a road path of
/// `(x, y)` waypoints with `y` the along-road coordinate.
fn driving_raw(path: &[Waypoint]) -> Vec<f64> {
    let arc: f64 = path
        .windows(2)
        .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
        .sum();
    let clearance = path
        .iter()
        .map(|w| planar_distance(w, &OBSTACLE))
        .fold(f64::INFINITY, f64::min);
    let offset = path.iter().map(|w| (w[0] - LANE_CENTER).abs()).sum::<f64>() / path.len() as f64;
    vec![arc, clearance, offset]
}

fn check_pool_size(pool_size: usize) -> Result<()> {
    if pool_size < 2 {
        return Err(Error::config(format!("pool_size must be at least 2, got {pool_size}")));
    }
    Ok(())
}

/// Arm trajectories: a planar start-to-goal sweep with a wandering detour,
/// carried at a per-trajectory height with small vertical variation.
pub fn build_tabletop<R: Rng + ?Sized>(pool_size: usize, rng: &mut R) -> Result<Environment> {
    check_pool_size(pool_size)?;
    let paths = (0..pool_size)
        .map(|_| {
            let start = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let goal = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let detour = [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)];
            let level: f64 = rng.random_range(0.0..1.0);
            (0..TABLETOP_WAYPOINTS)
                .map(|i| {
                    let s = i as f64 / (TABLETOP_WAYPOINTS - 1) as f64;
                    let bump = 4.0 * s * (1.0 - s);
                    let x = (start[0] + s * (goal[0] - start[0]) + bump * detour[0]).clamp(0.0, 1.0);
                    let y = (start[1] + s * (goal[1] - start[1]) + bump * detour[1]).clamp(0.0, 1.0);
                    let z = (level + rng.random_range(-0.1..0.1)).clamp(0.0, 1.0);
                    vec![x, y, z]
                })
                .collect()
        })
        .collect();
    Environment::from_paths(EnvironmentKind::Tabletop, paths)
}

/// Road paths: travel a random distance down a unit-length road while
/// weaving laterally around a per-path lane position.
pub fn build_driving<R: Rng + ?Sized>(pool_size: usize, rng: &mut R) -> Result<Environment> {
    check_pool_size(pool_size)?;
    let paths = (0..pool_size)
        .map(|_| {
            let travel: f64 = rng.random_range(0.3..1.0);
            let lane: f64 = rng.random_range(0.1..0.9);
            let weave: f64 = rng.random_range(0.0..0.15);
            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            (0..DRIVING_WAYPOINTS)
                .map(|i| {
                    let s = i as f64 / (DRIVING_WAYPOINTS - 1) as f64;
                    let x = (lane + weave * (phase + 2.0 * std::f64::consts::PI * s).sin()).clamp(0.0, 1.0);
                    vec![x, s * travel]
                })
                .collect()
        })
        .collect();
    Environment::from_paths(EnvironmentKind::Driving, paths)
}

/// Features drawn uniformly in `[0,1]^d`, then min-max normalized.
pub fn build_synthetic<R: Rng + ?Sized>(dim: usize, pool_size: usize, rng: &mut R) -> Result<Environment> {
    if dim < 1 {
        return Err(Error::config("feature dimension must be at least 1"));
    }
    check_pool_size(pool_size)?;
    let raw: Vec<Vec<f64>> = (0..pool_size)
        .map(|_| (0..dim).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    Ok(synthetic_from_rows(raw))
}

/// A synthetic environment over explicit feature rows (normalized here).
pub fn synthetic_from_rows(raw: Vec<Vec<f64>>) -> Environment {
    let ranges = ranges_of(&raw);
    let dim = ranges.len();
    let trajectories = raw
        .iter()
        .enumerate()
        .map(|(i, r)| Trajectory::new(i as u64, normalize_with(r, &ranges)))
        .collect();
    Environment {
        kind: EnvironmentKind::Synthetic,
        feature_names: (0..dim).map(|j| format!("f{j}")).collect(),
        pool: Pool::new(trajectories),
        normalization: ranges,
        scene: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Preferences;
    use crate::robot::optimal_trajectory;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn attains_endpoints(env: &Environment) {
        for j in 0..env.dim() {
            let vals: Vec<f64> = env
                .pool
                .trajectories()
                .iter()
                .map(|t| t.features().as_slice()[j])
                .collect();
            assert!(vals.contains(&0.0), "feature {j} never 0");
            assert!(vals.contains(&1.0), "feature {j} never 1");
            assert!(vals.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    fn recomputes(env: &Environment) {
        for t in env.pool.trajectories() {
            let f = env.features_of(t.waypoints().unwrap()).unwrap();
            assert_eq!(&f, t.features());
        }
    }

    #[test]
    fn tabletop_contract() {
        let env = build_tabletop(100, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(env.dim(), 3);
        assert_eq!(env.pool.len(), 100);
        attains_endpoints(&env);
        recomputes(&env);
        assert!(env
            .pool
            .trajectories()
            .iter()
            .all(|t| t.waypoints().unwrap().len() == 5));
    }

    #[test]
    fn tabletop_landmark_cases() {
        let on_bowl: Vec<Waypoint> = (0..5)
            .map(|i| vec![0.1 + 0.175 * i as f64, 0.9 - 0.175 * i as f64, 0.0])
            .collect();
        let high: Vec<Waypoint> = (0..5).map(|_| vec![0.1, 0.9, 0.8]).collect();
        let env = Environment::from_paths(EnvironmentKind::Tabletop, vec![on_bowl, high]).unwrap();
        let f = env.pool.get(0).features().as_slice();
        assert_eq!(f[0], 0.0, "zero-height path");
        assert_eq!(f[2], 1.0, "final waypoint on the bowl");
    }

    #[test]
    fn driving_contract() {
        let env = build_driving(100, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        attains_endpoints(&env);
        recomputes(&env);
        assert!(env
            .pool
            .trajectories()
            .iter()
            .all(|t| t.waypoints().unwrap().len() == 10));
    }

    #[test]
    fn driving_landmark_cases() {
        let center: Vec<Waypoint> = (0..10).map(|i| vec![LANE_CENTER, i as f64 / 9.0]).collect();
        let through: Vec<Waypoint> = (0..10)
            .map(|i| {
                if i == 5 {
                    OBSTACLE.to_vec()
                } else {
                    vec![0.2, i as f64 / 9.0 * 0.5]
                }
            })
            .collect();
        let env = Environment::from_paths(EnvironmentKind::Driving, vec![center, through]).unwrap();
        assert_eq!(env.pool.get(0).features().as_slice()[2], 0.0, "centered path");
        assert_eq!(env.pool.get(1).features().as_slice()[1], 0.0, "path through obstacle");
    }

    #[test]
    fn wrong_waypoint_count_rejected() {
        let short: Vec<Waypoint> = vec![vec![0.0, 0.0, 0.0]; 3];
        assert!(Environment::from_paths(EnvironmentKind::Tabletop, vec![short.clone(), short]).is_err());
        assert!(build_driving(1, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn synthetic_contract() {
        let env = build_synthetic(3, 1000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for j in 0..3 {
            let mean = env
                .pool
                .trajectories()
                .iter()
                .map(|t| t.features().as_slice()[j])
                .sum::<f64>()
                / 1000.0;
            assert!((mean - 0.5).abs() < 0.05);
        }
        let again = build_synthetic(3, 1000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(env, again);
        assert!(env.features_of(&[]).is_none());
    }

    #[test]
    fn one_dimensional_monotone() {
        let env = synthetic_from_rows(vec![vec![2.0], vec![5.0]]);
        let up = Preferences::normalized(vec![1.0]).unwrap();
        let down = Preferences::normalized(vec![-1.0]).unwrap();
        assert_eq!(
            optimal_trajectory(&up, &env.pool).unwrap().features().as_slice(),
            &[1.0]
        );
        assert_eq!(
            optimal_trajectory(&down, &env.pool).unwrap().features().as_slice(),
            &[0.0]
        );
    }

    #[test]
    fn normalization_is_idempotent() {
        let env = build_synthetic(4, 50, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let rows: Vec<Vec<f64>> = env
            .pool
            .trajectories()
            .iter()
            .map(|t| t.features().as_slice().to_vec())
            .collect();
        assert_eq!(normalize_features(&rows), rows);
    }

    #[test]
    fn environment_json_has_scene() {
        let env = build_tabletop(4, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let v = serde_json::to_value(&env).unwrap();
        assert_eq!(v["scene"]["landmarks"][0]["name"], "ball");
        assert_eq!(v["feature_names"][2], "bowl");
        let back: Environment = serde_json::from_value(v).unwrap();
        assert_eq!(back, env);
    }
}
