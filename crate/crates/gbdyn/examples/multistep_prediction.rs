//! Multi-step prediction: train a structured model and the naive baseline on
//! the same data, then roll both out for several seconds under the true
//! trajectory's inputs and compare divergence.
//!
//!     cargo run --release --example multistep_prediction [train_size] [epochs]
//!
//! Defaults (1024 samples, 1500 epochs) finish in a few minutes; the paper-
//! scale experiment (4096 samples, full budget) runs through `gbdyn`.

use gbdyn::dynamics::{rollout, GeneralizedState};
use gbdyn::engine::rng::stream_rng;
use gbdyn::modelzoo::{build, ModelKind, ModelSpec};
use gbdyn::systems::{sample_transitions, true_system, DoublePendulumParams, SamplingSpec};
use gbdyn::training::{train, TrainConfig};
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let train_size: usize = args.get(1).map(|v| v.parse().unwrap()).unwrap_or(1024);
    let epochs: usize = args.get(2).map(|v| v.parse().unwrap()).unwrap_or(1500);

    let plant = DoublePendulumParams::nominal();
    let (sys, pv) = true_system(&plant).expect("valid parameters");
    let ds = sample_transitions(
        &sys,
        &pv.data,
        &SamplingSpec {
            count: train_size,
            seed: 100,
            ..SamplingSpec::default()
        },
    )
    .expect("sampling");

    let cfg = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let mut mvf = build(&ModelSpec::new(ModelKind::MVF, 5)).expect("build");
    let mut naive = build(&ModelSpec::new(ModelKind::Naive, 5)).expect("build");
    println!("training MVF and Naive on {train_size} samples for {epochs} epochs…");
    let r1 = train(&mut mvf, &ds, None, &cfg).expect("train mvf");
    let r2 = train(&mut naive, &ds, None, &cfg).expect("train naive");
    println!(
        "final train loss: MVF {:.3e}, Naive {:.3e}",
        r1.history.last().unwrap(),
        r2.history.last().unwrap()
    );

    // A 5-second test trajectory from a random state under random torques.
    let dt = 0.01;
    let steps = 500;
    let mut rng = stream_rng(77, "ms-x0", 0);
    let x0 = GeneralizedState::new(
        vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
        vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
    );
    let normal = Normal::new(0.0, 60.0).unwrap();
    let controls: Vec<Vec<f64>> = (0..steps)
        .map(|_| (0..2).map(|_| normal.sample(&mut rng)).collect())
        .collect();

    let truth = rollout(&sys, &pv.data, &x0, &controls, dt).expect("true rollout");
    let pm = rollout(mvf.dynamics(), &mvf.params.data, &x0, &controls, dt).expect("mvf rollout");
    let pn = rollout(naive.dynamics(), &naive.params.data, &x0, &controls, dt)
        .expect("naive rollout");

    println!("  t(s)   |x_true − x_mvf|   |x_true − x_naive|");
    let (mut s1, mut s2) = (0.0, 0.0);
    for t in 0..=steps {
        let e1 = err(&truth[t], &pm[t]);
        let e2 = err(&truth[t], &pn[t]);
        s1 += e1;
        s2 += e2;
        if t % 50 == 0 {
            println!("  {:4.1}   {e1:16.4}   {e2:18.4}", t as f64 * dt);
        }
    }
    println!(
        "mean state error over 5 s: MVF {:.4}, Naive {:.4}",
        s1 / (steps + 1) as f64,
        s2 / (steps + 1) as f64
    );
}

fn err(a: &GeneralizedState, b: &GeneralizedState) -> f64 {
    let mut s = 0.0;
    for i in 0..a.q.len() {
        s += (a.q[i] - b.q[i]).powi(2) + (a.qdot[i] - b.qdot[i]).powi(2);
    }
    s.sqrt()
}
