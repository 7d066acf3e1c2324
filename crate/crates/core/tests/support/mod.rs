//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sfrl::baselines::DqnModel;
use sfrl::batch::Batch;
use sfrl::maze::{astar_distance, load_map, shortest_path, transition, Heading, MazeMap, Pose};
use sfrl::nn::{Adam, AdamConfig, Tensor};
use sfrl::sf::{OldTaskReadout, SfConfig, SfModel};

pub fn random_map(rng: &mut ChaCha8Rng) -> MazeMap {
    loop {
        let mut rows = vec![vec!['#'; 9]; 9];
        for row in rows.iter_mut().take(8).skip(1) {
            for c in row.iter_mut().take(8).skip(1) {
                *c = if rng.gen_bool(0.25) { '#' } else { '.' };
            }
        }
        let (gx, gy) = (rng.gen_range(1..8), rng.gen_range(1..8));
        rows[gy][gx] = 'G';
        let text: String = rows.iter().map(|r| r.iter().collect::<String>() + "\n").collect();
        if let Ok(m) = load_map(&text) {
            return m;
        }
    }
}

/// Breadth-first search over poses, written against the grid directly.
pub fn bfs_distances(map: &MazeMap) -> HashMap<Pose, usize> {
    let (gx, gy) = map.goal();
    let open = |x: usize, y: usize| map.free_cells().contains(&(x, y)) || (x, y) == (gx, gy);
    // Reverse search from every pose standing on the goal.
    let mut dist = HashMap::new();
    let mut queue = VecDeque::new();
    for h in Heading::ALL {
        let p = Pose::new(gx, gy, h);
        dist.insert(p, 0);
        queue.push_back(p);
    }
    while let Some(p) = queue.pop_front() {
        let d = dist[&p];
        let mut preds = vec![
            Pose::new(p.x, p.y, p.heading.right()),
            Pose::new(p.x, p.y, p.heading.left()),
        ];
        let (dx, dy) = p.heading.delta();
        let (px, py) = (p.x as i64 - dx, p.y as i64 - dy);
        // Moving forward from the goal cell is impossible: episodes end there.
        if open(px as usize, py as usize) && (px as usize, py as usize) != (gx, gy) {
            preds.push(Pose::new(px as usize, py as usize, p.heading));
        }
        for q in preds {
            if (q.x, q.y) == (gx, gy) {
                continue;
            }
            if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(q) {
                e.insert(d + 1);
                queue.push_back(q);
            }
        }
    }
    dist
}

/// Start poses, over `n_maps` random 9x9 maps, where the planner's path
/// length differs from breadth-first search or the path does not reach the goal.
pub fn planner_mismatches(n_maps: usize, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    let mut checked = 0;
    for _ in 0..n_maps {
        let map = random_map(&mut rng);
        let bfs = bfs_distances(&map);
        for (x, y) in map.free_cells() {
            for h in Heading::ALL {
                let start = Pose::new(x, y, h);
                checked += 1;
                let path = shortest_path(&map, start).unwrap();
                let mut ok = path.len() == bfs[&start] && astar_distance(&map, start).unwrap() == bfs[&start];
                let mut p = start;
                for (i, &a) in path.iter().enumerate() {
                    let (n, _, terminal, collided) = transition(&map, p, a);
                    ok &= !collided && terminal == (i + 1 == path.len());
                    p = n;
                }
                bad += usize::from(!ok);
            }
        }
    }
    (bad, checked)
}

fn one_hot(n: usize, idx: &[usize]) -> Tensor<f64> {
    let mut t = Tensor::zeros(vec![idx.len(), n]);
    for (r, &i) in idx.iter().enumerate() {
        t.row_mut(r)[i] = 1.0;
    }
    t
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
fn invert(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        inv.swap(c, p);
        let d = a[c][c];
        for j in 0..n {
            a[c][j] /= d;
            inv[c][j] /= d;
        }
        for i in 0..n {
            if i != c {
                let f = a[i][c];
                for j in 0..n {
                    a[i][j] -= f * a[c][j];
                    inv[i][j] -= f * inv[c][j];
                }
            }
        }
    }
    inv
}

const STATES: usize = 6;
const GAMMA: f64 = 0.5;

/// Ring of six states: action 0 steps one place on, action 1 jumps two.
fn ring_next(s: usize, a: usize) -> usize {
    (s + 1 + a) % STATES
}

/// Largest successor-feature and Q errors of a one-hot tabular model trained
/// with the successor TD loss, against the closed-form successor matrix and
/// value iteration.
pub fn tabular_sf_errors() -> (f64, f64) {
    let reward = [0.1, -0.2, 0.0, 0.3, -0.1, 1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = SfConfig {
        phi_dim: STATES,
        encoder_hidden: vec![],
        decoder_hidden: vec![],
        psi_hidden: 64,
        gamma: GAMMA,
        multitask_sf: false,
        readout: OldTaskReadout::MappedInput,
        reward_weight: 1.0,
        reconstruction_weight: 1.0,
        mapping_weight: 1.0,
    };
    let mut model = SfModel::<f64>::new(STATES, 2, cfg, &mut rng);
    // One-hot features: the encoder is the identity.
    let enc = &mut model.encoder_mut().layers[0];
    enc.weights = Tensor::identity(STATES);
    enc.bias = Tensor::zeros(vec![STATES]);
    model.task_mut(0).unwrap().omega = Tensor::from_f64(vec![STATES], &reward).unwrap();

    let pairs: Vec<(usize, usize)> = (0..STATES).flat_map(|s| [(s, 0), (s, 1)]).collect();
    let states: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let next: Vec<usize> = pairs.iter().map(|&(s, a)| ring_next(s, a)).collect();
    let batch = Batch::new(
        one_hot(STATES, &states),
        pairs.iter().map(|p| p.1).collect(),
        next.iter().map(|&s| reward[s]).collect(),
        one_hot(STATES, &next),
        vec![false; pairs.len()],
    )
    .unwrap();

    for k in 0..60 {
        let mut opt = Adam::<f64>::new(AdamConfig::with_lr((3e-3 * 0.9f64.powi(k)).max(3e-5)));
        for _ in 0..500 {
            model.sf_td_loss(&batch).unwrap();
            opt.step(model.td_params_mut()).unwrap();
        }
        model.sync_targets();
    }

    // Value iteration on Q.
    let mut q = [[0.0f64; 2]; STATES];
    for _ in 0..200 {
        let v: Vec<f64> = q.iter().map(|r| r[0].max(r[1])).collect();
        for (s, row) in q.iter_mut().enumerate() {
            for (a, qa) in row.iter_mut().enumerate() {
                let n = ring_next(s, a);
                *qa = reward[n] + GAMMA * v[n];
            }
        }
    }
    let policy: Vec<usize> = q.iter().map(|r| usize::from(r[1] > r[0])).collect();
    let mut i_minus = vec![vec![0.0; STATES]; STATES];
    for s in 0..STATES {
        i_minus[s][s] += 1.0;
        i_minus[s][ring_next(s, policy[s])] -= GAMMA;
    }
    let m = invert(i_minus);

    let all = one_hot(STATES, &(0..STATES).collect::<Vec<_>>());
    let psi = model.successor_forward(0, &all).unwrap();
    let learned_q = model.q_values(0, &all).unwrap();
    let (mut psi_err, mut q_err) = (0.0f64, 0.0f64);
    for s in 0..STATES {
        for a in 0..2 {
            // Arrival-state features: ψ(s, a) is the successor row of the state reached.
            let row = &m[ring_next(s, a)];
            let got = &psi.data()[(s * 2 + a) * STATES..(s * 2 + a + 1) * STATES];
            for j in 0..STATES {
                psi_err = psi_err.max((got[j] - row[j]).abs());
            }
            q_err = q_err.max((learned_q.row(s)[a] - q[s][a]).abs());
        }
    }
    (psi_err, q_err)
}

/// Largest Q error of DQN on a two-state chain against value iteration.
pub fn dqn_chain_error() -> f64 {
    // s0 --move--> s1 --move--> exit (+1); staying costs 0.1.
    let gamma = 0.9;
    let step = |s: usize, a: usize| -> (usize, f64, bool) {
        match (s, a) {
            (s, 0) => (s, -0.1, false),
            (0, _) => (1, 0.0, false),
            _ => (1, 1.0, true),
        }
    };
    let mut q = [[0.0f64; 2]; 2];
    for _ in 0..500 {
        let v: Vec<f64> = q.iter().map(|r| r[0].max(r[1])).collect();
        for s in 0..2 {
            for a in 0..2 {
                let (n, r, t) = step(s, a);
                q[s][a] = r + if t { 0.0 } else { gamma * v[n] };
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut model = DqnModel::<f64>::new(&[2, 16, 8], 16, 2, &mut rng);
    let pairs = [(0, 0), (0, 1), (1, 0), (1, 1)];
    let outs: Vec<(usize, f64, bool)> = pairs.iter().map(|&(s, a)| step(s, a)).collect();
    let batch = Batch::new(
        one_hot(2, &pairs.map(|p| p.0)),
        pairs.iter().map(|p| p.1).collect(),
        outs.iter().map(|o| o.1).collect(),
        one_hot(2, &outs.iter().map(|o| o.0).collect::<Vec<_>>()),
        outs.iter().map(|o| o.2).collect(),
    )
    .unwrap();
    let mut opt = Adam::<f64>::new(AdamConfig::with_lr(3e-3));
    for _ in 0..120 {
        for _ in 0..300 {
            model.dqn_loss(&batch, gamma).unwrap();
            opt.step(model.trainable_params_mut()).unwrap();
        }
        model.sync_targets();
    }
    let learned = model.q_values(&one_hot(2, &[0, 1])).unwrap();
    let mut err = 0.0f64;
    for s in 0..2 {
        for a in 0..2 {
            err = err.max((learned.row(s)[a] - q[s][a]).abs());
        }
    }
    err
}
