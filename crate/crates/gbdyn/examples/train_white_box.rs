//! Fit the 9-parameter all-analytic model to a handful of transitions and
//! watch it recover dynamics equivalent to the true plant.
//!
//!     cargo run --release --example train_white_box

use gbdyn::modelzoo::{build, ModelKind, ModelSpec};
use gbdyn::systems::{sample_transitions, true_system, DoublePendulumParams, SamplingSpec};
use gbdyn::training::{train, validate, TrainConfig, DEFAULT_LAMBDA};

fn main() {
    let plant = DoublePendulumParams::nominal();
    let (sys, pv) = true_system(&plant).expect("valid parameters");
    let train_set = sample_transitions(
        &sys,
        &pv.data,
        &SamplingSpec {
            count: 16,
            seed: 7,
            ..SamplingSpec::default()
        },
    )
    .expect("sampling");
    let val_set = sample_transitions(
        &sys,
        &pv.data,
        &SamplingSpec {
            count: 2048,
            seed: 8,
            ..SamplingSpec::default()
        },
    )
    .expect("sampling");

    let mut model = build(&ModelSpec::new(ModelKind::WB, 3)).expect("build");
    println!("initial white-box guesses: {:?}", trimmed(&model.params.data));

    let cfg = TrainConfig::default();
    let report = train(&mut model, &train_set, None, &cfg).expect("training");
    let val = validate(model.dynamics(), &model.params.data, &val_set, DEFAULT_LAMBDA)
        .expect("validation");

    println!(
        "after {} epochs on 16 samples: train loss {:.3e}, validation loss {:.3e}",
        report.history.len(),
        report.history.last().unwrap(),
        val
    );
    println!("fitted parameters:          {:?}", trimmed(&model.params.data));
    println!("true parameters:            {:?}", trimmed(&pv.data));
    println!("(dynamics admit equivalent parameter families — e.g. rescaling");
    println!(" masses, lengths, and gravity together — so values need not");
    println!(" match one-to-one even at near-zero validation loss)");
}

fn trimmed(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1000.0).round() / 1000.0).collect()
}
