use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use revealq_core::model::{answer_likelihood, reward, Answer, Pool, Preferences, Question, Trajectory};
use revealq_core::robot::{learning_summary, optimal_trajectory, RobotBelief, UpdateOptions};
use revealq_core::select::info_gain;
use revealq_core::HumanBelief;

fn features(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, d)
}

fn direction(d: usize) -> impl Strategy<Value = Preferences> {
    prop::collection::vec(-1.0..1.0f64, d)
        .prop_filter("non-zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
        .prop_map(|v| Preferences::normalized(v).unwrap())
}

fn pair(d: usize) -> impl Strategy<Value = Question> {
    (features(d), features(d))
        .prop_map(|(a, b)| Question::pair(Trajectory::new(0, a), Trajectory::new(1, b), 1).unwrap())
}

fn answer() -> impl Strategy<Value = Answer> {
    prop_oneof![
        Just(Answer::Choice { slot: 0 }),
        Just(Answer::Choice { slot: 1 }),
        Just(Answer::IDontKnow)
    ]
}

proptest! {
    #[test]
    fn likelihood_normalized_and_swap_symmetric((q, p) in (1usize..6).prop_flat_map(|d| (pair(d), direction(d)))) {
        let dist = answer_likelihood(&q, &p).unwrap();
        prop_assert!((dist.first + dist.second + dist.idk - 1.0).abs() < 1e-12);
        let swapped = answer_likelihood(&q.swapped(), &p).unwrap();
        prop_assert!((dist.first - swapped.second).abs() < 1e-15);
        prop_assert!((dist.idk - swapped.idk).abs() < 1e-15);
    }

    #[test]
    fn reward_is_linear_in_features((p, a, b, s) in (1usize..6).prop_flat_map(|d| (direction(d), features(d), features(d), 0.0..1.0f64))) {
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| s * x + (1.0 - s) * y).collect();
        let r = |f: Vec<f64>| reward(&Trajectory::new(0, f), &p).unwrap();
        let lhs = r(mix);
        let rhs = s * r(a) + (1.0 - s) * r(b);
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn info_gain_bounded_and_order_free(q in pair(3), seed in any::<u64>()) {
        let belief = RobotBelief::init(3, 64, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let ig = info_gain(&q, &belief).unwrap();
        prop_assert!((0.0..=3f64.log2() + 1e-12).contains(&ig));
        prop_assert!((ig - info_gain(&q.swapped(), &belief).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn updates_keep_a_normalized_belief_on_the_sphere(
        steps in prop::collection::vec((pair(3), answer()), 1..15),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut belief = RobotBelief::init(3, 50, &mut rng).unwrap();
        for (q, a) in &steps {
            belief = belief.update(q, a, &UpdateOptions::default(), &mut rng).unwrap();
            let total: f64 = belief.weights().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!(belief.weights().iter().all(|w| *w >= 0.0));
            for p in belief.particles() {
                let n: f64 = p.theta().iter().map(|x| x * x).sum::<f64>().sqrt();
                prop_assert!((n - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn summary_spread_is_at_most_half(pool in prop::collection::vec(features(3), 2..30), seed in any::<u64>()) {
        let pool = Pool::new(pool.into_iter().enumerate().map(|(i, f)| Trajectory::new(i as u64, f)).collect());
        let belief = RobotBelief::init(3, 40, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let z = learning_summary(&belief, &pool).unwrap();
        prop_assert!(z.sigma().iter().all(|s| (0.0..=0.5 + 1e-12).contains(s)));
        prop_assert!(z.mu().iter().all(|m| (0.0..=1.0).contains(m)));
    }

    #[test]
    fn optimal_trajectory_dominates_pool(pool in prop::collection::vec(features(3), 1..30), p in direction(3)) {
        let pool = Pool::new(pool.into_iter().enumerate().map(|(i, f)| Trajectory::new(i as u64, f)).collect());
        let best = reward(optimal_trajectory(&p, &pool).unwrap(), &p).unwrap();
        for t in pool.trajectories() {
            prop_assert!(reward(t, &p).unwrap() <= best);
        }
    }

    #[test]
    fn observer_only_remembers_last_k(
        qs in prop::collection::vec(pair(2), 1..12),
        k in 1usize..5,
        seed in any::<u64>(),
    ) {
        let fresh = HumanBelief::init(2, 30, k, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let full = qs.iter().try_fold(fresh.clone(), |b, q| b.observe(q)).unwrap();
        let tail = qs[qs.len().saturating_sub(k)..].iter().try_fold(fresh, |b, q| b.observe(q)).unwrap();
        prop_assert_eq!(full.weights(), tail.weights());
        prop_assert!(full.window().len() <= k);
    }
}
