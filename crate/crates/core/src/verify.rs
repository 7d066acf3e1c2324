//! Finite-difference verification of every analytic gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::{DqnModel, ImitationModel};
use crate::batch::Batch;
use crate::error::Result;
use crate::nn::{grad_check, mse_and_grad, softmax_cross_entropy, Activation, DenseLayer, GradCheckReport, Tensor};
use crate::sf::{OldTaskReadout, RetainedBatch, SfConfig, SfModel};

/// Worst result over several random instances of one check.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteEntry {
    pub name: &'static str,
    pub instances: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub const LOSS_TOLERANCE: f64 = 1e-3;
pub const LAYER_TOLERANCE: f64 = 1e-4;
const LOSS_STEP: f64 = 1e-6;
const LAYER_STEP: f64 = 1e-4;

type Params<'a> = Vec<(String, &'a mut Tensor<f64>)>;

fn flatten(params: Params<'_>) -> Vec<f64> {
    params.into_iter().flat_map(|(_, t)| t.data().to_vec()).collect()
}

/// Gradient check over the tensors `select` exposes, for a loss that
/// accumulates into their grad slots.
pub fn check_model<M: Clone>(
    model: &M,
    select: impl Fn(&mut M) -> Params<'_>,
    loss: impl Fn(&mut M) -> Result<f64>,
    h: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    let mut base = model.clone();
    let x0 = flatten(select(&mut base));
    let mut failure = None;
    let report = grad_check(
        |x| {
            let mut m = model.clone();
            let mut off = 0;
            for (_, t) in select(&mut m) {
                let n = t.len();
                t.data_mut().copy_from_slice(&x[off..off + n]);
                t.zero_grad();
                off += n;
            }
            let l = match loss(&mut m) {
                Ok(l) => l,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            };
            let g = select(&mut m)
                .into_iter()
                .flat_map(|(_, t)| t.grad().map_or_else(|| vec![0.0; t.len()], <[f64]>::to_vec))
                .collect();
            (l, g)
        },
        &x0,
        h,
        tol,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

fn rand_tensor(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::from_f64(shape, &d).expect("shape matches")
}

fn rand_batch(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Batch<f64> {
    let s = rand_tensor(vec![n, dim], rng);
    let s2 = rand_tensor(vec![n, dim], rng);
    let a = (0..n).map(|_| rng.gen_range(0..4)).collect();
    let r = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let t = (0..n).map(|_| rng.gen_bool(0.3)).collect();
    Batch::new(s, a, r, s2, t).expect("consistent batch")
}

const STATE: usize = 8;

fn small_sf(readout: OldTaskReadout, multitask: bool) -> SfConfig {
    SfConfig {
        phi_dim: 5,
        encoder_hidden: vec![7],
        decoder_hidden: vec![6],
        psi_hidden: 6,
        gamma: 0.9,
        multitask_sf: multitask,
        readout,
        reward_weight: 1.0,
        reconstruction_weight: 0.5,
        mapping_weight: 2.0,
    }
}

/// An SF model on its second task with perturbed maps and reward weights.
fn two_task_sf(cfg: SfConfig, rng: &mut ChaCha8Rng) -> SfModel<f64> {
    let mut m = SfModel::<f64>::new(STATE, 4, cfg, rng);
    m.add_task(true, rng);
    for i in 0..2 {
        let t = m.task_mut(i).expect("task exists");
        for v in t.omega.data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        for v in t.b.data_mut() {
            *v += rng.gen_range(-0.2..0.2);
        }
    }
    // Move the live encoder away from the snapshot.
    for (_, p) in m.encoder_mut().params_mut() {
        for v in p.data_mut() {
            *v += rng.gen_range(-0.1..0.1);
        }
    }
    m
}

fn worst(name: &'static str, tol: f64, reports: Vec<GradCheckReport>) -> SuiteEntry {
    let max = reports.iter().map(|r| r.max_rel_err).fold(0.0, f64::max);
    SuiteEntry {
        name,
        instances: reports.len(),
        max_rel_err: max,
        tolerance: tol,
        pass: max <= tol,
    }
}

fn dense_layer_check(act: Activation, rng: &mut ChaCha8Rng) -> Result<GradCheckReport> {
    let (fi, fo, n) = (rng.gen_range(2..7), rng.gen_range(2..7), rng.gen_range(1..5));
    let layer = DenseLayer::<f64>::new(fi, fo, act, rng);
    let input = rand_tensor(vec![n, fi], rng);
    let coef = rand_tensor(vec![n, fo], rng);
    // Inputs are checked too, by treating them as a parameter.
    let mut holder = (layer, input);
    let loss = move |m: &mut (DenseLayer<f64>, Tensor<f64>)| -> Result<f64> {
        let out = m.0.forward(&m.1)?;
        let l = out.data().iter().zip(coef.data()).map(|(o, c)| o * c).sum();
        let g = m.0.backward(&m.1, &out, &coef, true)?.expect("requested");
        for (acc, v) in m.1.grad_mut().iter_mut().zip(g.data()) {
            *acc += v;
        }
        Ok(l)
    };
    holder.1.zero_grad();
    check_model(
        &holder,
        |m| vec![("W".into(), &mut m.0.weights), ("b".into(), &mut m.0.bias), ("x".into(), &mut m.1)],
        loss,
        LAYER_STEP,
        LAYER_TOLERANCE,
    )
}

/// Runs every gradient check over `instances` random instances each.
pub fn gradient_suite(instances: usize, seed: u64) -> Result<Vec<SuiteEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let run = |n: usize, rng: &mut ChaCha8Rng, f: &dyn Fn(&mut ChaCha8Rng) -> Result<GradCheckReport>| {
        (0..n).map(|_| f(rng)).collect::<Result<Vec<_>>>()
    };

    out.push(worst(
        "dense layer (linear)",
        LAYER_TOLERANCE,
        run(instances, &mut rng, &|r| dense_layer_check(Activation::Linear, r))?,
    ));
    out.push(worst(
        "dense layer (relu)",
        LAYER_TOLERANCE,
        run(instances, &mut rng, &|r| dense_layer_check(Activation::ReLU, r))?,
    ));

    out.push(worst(
        "mean squared error",
        LOSS_TOLERANCE,
        run(instances, &mut rng, &|r| {
            let target = rand_tensor(vec![3, 4], r);
            let pred = rand_tensor(vec![3, 4], r);
            check_model(
                &pred,
                |p| vec![("p".into(), p)],
                |p| {
                    let (l, g) = mse_and_grad(p, &target)?;
                    p.grad_mut().copy_from_slice(g.data());
                    Ok(l)
                },
                LOSS_STEP,
                LOSS_TOLERANCE,
            )
        })?,
    ));

    out.push(worst(
        "softmax cross-entropy",
        LOSS_TOLERANCE,
        run(instances, &mut rng, &|r| {
            let logits = rand_tensor(vec![5, 4], r);
            let labels: Vec<usize> = (0..5).map(|_| r.gen_range(0..4)).collect();
            check_model(
                &logits,
                |p| vec![("l".into(), p)],
                |p| {
                    let (l, g) = softmax_cross_entropy(p, &labels)?;
                    p.grad_mut().copy_from_slice(g.data());
                    Ok(l)
                },
                LOSS_STEP,
                LOSS_TOLERANCE,
            )
        })?,
    ));

    out.push(worst(
        "successor-feature TD loss",
        LOSS_TOLERANCE,
        run(instances, &mut rng, &|r| {
            let m = two_task_sf(small_sf(OldTaskReadout::MappedInput, false), r);
            let b = rand_batch(6, STATE, r);
            check_model(&m, |m| m.td_params_mut(), |m| m.sf_td_loss(&b), LOSS_STEP, LOSS_TOLERANCE)
        })?,
    ));

    out.push(worst(
        "successor-feature TD loss (all tasks)",
        LOSS_TOLERANCE,
        run(instances, &mut rng, &|r| {
            let readout = if r.gen_bool(0.5) {
                OldTaskReadout::MappedInput
            } else {
                OldTaskReadout::MappedOutput
            };
            let m = two_task_sf(small_sf(readout, true), r);
            let b = rand_batch(6, STATE, r);
            check_model(&m, |m| m.td_params_mut(), |m| m.sf_td_loss(&b), LOSS_STEP, LOSS_TOLERANCE)
        })?,
    ));

    out.push(worst(
        "feature loss (reward, reconstruction, maps)",
        LOSS_TOLERANCE,
        run(instances, &mut rng, &|r| {
            let m = two_task_sf(small_sf(OldTaskReadout::MappedInput, false), r);
            let b = rand_batch(6, STATE, r);
            let retained = vec![RetainedBatch {
                task: 0,
                states: rand_tensor(vec![4, STATE], r),
            }];
            check_model(
                &m,
                |m| m.phi_params_mut(),
                |m| Ok(m.phi_loss(&b, &retained)?.total()),
                LOSS_STEP,
                LOSS_TOLERANCE,
            )
        })?,
    ));

    out.push(worst(
        "DQN TD loss",
        LOSS_TOLERANCE,
        run(instances, &mut rng, &|r| {
            let mut m = DqnModel::<f64>::new(&[STATE, 7, 5], 6, 4, r);
            // Distinct targets so the bootstrap term is not the live network.
            for (_, p) in m.target_q_head.params_mut() {
                for v in p.data_mut() {
                    *v += r.gen_range(-0.1..0.1);
                }
            }
            let b = rand_batch(6, STATE, r);
            check_model(
                &m,
                |m| m.trainable_params_mut(),
                |m| m.dqn_loss(&b, 0.9),
                LOSS_STEP,
                LOSS_TOLERANCE,
            )
        })?,
    ));

    out.push(worst(
        "imitation cross-entropy",
        LOSS_TOLERANCE,
        run(instances, &mut rng, &|r| {
            let m = ImitationModel::<f64>::new(&[STATE, 7, 5], 4, r);
            let x = rand_tensor(vec![5, STATE], r);
            let y: Vec<usize> = (0..5).map(|_| r.gen_range(0..4)).collect();
            check_model(&m, |m| m.params_mut(), |m| m.imitation_loss(&x, &y), LOSS_STEP, LOSS_TOLERANCE)
        })?,
    ));

    Ok(out)
}
