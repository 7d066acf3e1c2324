//! Sampling distributions checked against their nominal laws.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sfrl::harness::{ReplayBuffer, Transition};
use sfrl::maze::{builtin, EnvConfig, MazeEnv};
use sfrl::sf::{SfConfig, SfModel};

/// Pearson statistic against equal expected counts.
fn chi_square(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let e = n as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}

/// Mean plus five standard deviations of a chi-square with `k - 1` degrees of freedom.
fn chi_square_bound(k: usize) -> f64 {
    let dof = (k - 1) as f64;
    dof + 5.0 * (2.0 * dof).sqrt()
}

#[test]
fn resets_are_uniform_over_start_poses() {
    let map = builtin("map1").unwrap();
    let mut env = MazeEnv::new(map.clone(), EnvConfig::default(), 17);
    let mut counts: HashMap<_, usize> = HashMap::new();
    let k = map.free_cells().len() * 4;
    for _ in 0..200 * k {
        let (_, pose) = env.reset();
        assert_ne!((pose.x, pose.y), map.goal());
        *counts.entry(pose).or_default() += 1;
    }
    assert_eq!(counts.len(), k);
    let c: Vec<usize> = counts.into_values().collect();
    assert!(chi_square(&c) < chi_square_bound(k));
}

#[test]
fn full_exploration_is_uniform_over_actions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let env = EnvConfig::default();
    let model = SfModel::<f32>::new(env.state_dim(), 4, SfConfig::default(), &mut rng);
    let mut e = MazeEnv::new(builtin("map1").unwrap(), env, 0);
    let (state, _) = e.reset();
    let mut counts = [0usize; 4];
    for _ in 0..20_000 {
        counts[model.select_action(0, &state, 1.0, &mut rng).unwrap().index()] += 1;
    }
    assert!(chi_square(&counts) < chi_square_bound(4), "{counts:?}");
}

#[test]
fn replay_sampling_is_uniform() {
    let (dummy, _) = MazeEnv::new(builtin("map1").unwrap(), EnvConfig::default(), 0).reset();
    let mut buf = ReplayBuffer::new(100).unwrap();
    // Overfill so eviction has happened.
    for i in 0..150 {
        buf.push(Transition {
            state: dummy.clone(),
            action: i % 4,
            reward: i as f32,
            next_state: dummy.clone(),
            terminal: false,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut counts = vec![0usize; 100];
    let n = 100_000;
    for i in buf.sample_indices(n, &mut rng).unwrap() {
        counts[i] += 1;
    }
    let p = 0.01;
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    for &c in &counts {
        assert!((c as f64 - mean).abs() < 5.0 * sd, "count {c} vs {mean} ± {sd}");
    }
    let rewards: Vec<f32> = buf.iter().map(|t| t.reward).collect();
    assert_eq!(rewards.first(), Some(&50.0));
    assert_eq!(rewards.last(), Some(&149.0));
}
