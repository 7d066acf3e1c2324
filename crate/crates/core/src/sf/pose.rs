use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::maze::Pose;
use crate::nn::{mse_and_grad, Adam, AdamConfig, Mlp, Tensor};
use crate::sf::SfModel;

#[derive(Clone, Debug, PartialEq)]
pub struct PoseProbeConfig {
    pub hidden: Vec<usize>,
    pub train_fraction: f64,
    pub updates: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for PoseProbeConfig {
    fn default() -> Self {
        PoseProbeConfig {
            hidden: vec![128, 128],
            train_fraction: 0.8,
            updates: 3000,
            batch_size: 64,
            learning_rate: 1e-3,
        }
    }
}

/// Held-out errors of a pose regressor.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseFit {
    /// Mean Euclidean error of (x, y), in cells.
    pub mean_position_error: f64,
    /// Fraction of held-out states whose predicted angle rounds to the true heading.
    pub heading_accuracy: f64,
    pub train_samples: usize,
    pub test_samples: usize,
}

pub const MIN_POSE_SAMPLES: usize = 100;

fn targets(poses: &[Pose], width: usize, height: usize) -> Vec<f32> {
    poses
        .iter()
        .flat_map(|p| {
            let a = p.heading.angle();
            [
                p.x as f32 / width as f32,
                p.y as f32 / height as f32,
                a.sin() as f32,
                a.cos() as f32,
            ]
        })
        .collect()
}

fn rows(t: &Tensor<f32>, idx: &[usize]) -> Tensor<f32> {
    let w = t.cols();
    let mut data = Vec::with_capacity(idx.len() * w);
    for &i in idx {
        data.extend_from_slice(t.row(i));
    }
    Tensor::new(vec![idx.len(), w], data).expect("shape matches")
}

/// Fits `(x/W, y/H, sin θ, cos θ)` from fixed features on a shuffled split
/// and scores the held-out part. `features` is `[n, φ]`.
pub fn regress_pose_from_features<R: Rng + ?Sized>(
    features: &Tensor<f32>,
    poses: &[Pose],
    width: usize,
    height: usize,
    cfg: &PoseProbeConfig,
    rng: &mut R,
) -> Result<PoseFit> {
    let n = poses.len();
    if n < MIN_POSE_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "pose regression needs at least {MIN_POSE_SAMPLES} samples, got {n}"
        )));
    }
    if features.rows() != n {
        return Err(Error::dim("regress_pose", n, features.rows()));
    }
    let y = Tensor::new(vec![n, 4], targets(poses, width, height))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let cut = ((n as f64) * cfg.train_fraction).round() as usize;
    let (train, test) = order.split_at(cut.clamp(1, n - 1));

    let mut dims = vec![features.cols()];
    dims.extend(&cfg.hidden);
    dims.push(4);
    let mut net = Mlp::<f32>::new(&dims, rng);
    let mut opt = Adam::new(AdamConfig::with_lr(cfg.learning_rate));
    for _ in 0..cfg.updates {
        let idx: Vec<usize> = (0..cfg.batch_size).map(|_| train[rng.gen_range(0..train.len())]).collect();
        let x = rows(features, &idx);
        let trace = net.forward_trace(&x)?;
        let (_, g) = mse_and_grad(trace.output(), &rows(&y, &idx))?;
        net.backward(&x, &trace, &g, false)?;
        opt.step(net.params_mut())?;
    }

    let pred = net.forward(&rows(features, test))?;
    let mut pos_err = 0.0;
    let mut heading_hits = 0usize;
    for (r, &i) in test.iter().enumerate() {
        let p = pred.row(r);
        let dx = (p[0] as f64 - poses[i].x as f64 / width as f64) * width as f64;
        let dy = (p[1] as f64 - poses[i].y as f64 / height as f64) * height as f64;
        pos_err += (dx * dx + dy * dy).sqrt();
        let angle = (p[2] as f64).atan2(p[3] as f64);
        let quarter = (angle / std::f64::consts::FRAC_PI_2).round().rem_euclid(4.0) as usize;
        let truth = (poses[i].heading.angle() / std::f64::consts::FRAC_PI_2).round().rem_euclid(4.0) as usize;
        heading_hits += usize::from(quarter == truth);
    }
    Ok(PoseFit {
        mean_position_error: pos_err / test.len() as f64,
        heading_accuracy: heading_hits as f64 / test.len() as f64,
        train_samples: train.len(),
        test_samples: test.len(),
    })
}

impl SfModel<f32> {
    /// Pose regression from this model's frozen features. The model is not modified.
    pub fn regress_pose<R: Rng + ?Sized>(
        &self,
        states: &Tensor<f32>,
        poses: &[Pose],
        width: usize,
        height: usize,
        cfg: &PoseProbeConfig,
        rng: &mut R,
    ) -> Result<PoseFit> {
        let phi = self.encode(states)?;
        regress_pose_from_features(&phi, poses, width, height, cfg, rng)
    }
}
