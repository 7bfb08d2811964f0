//! Desk-scale data-efficiency comparison: double the training-set size until
//! each model generalizes (validation loss under a threshold), and compare
//! how much data each parameterization needs.
//!
//!     cargo run --release --example data_efficiency [threshold] [max_size]
//!
//! Defaults are the quick settings (threshold 1e-2, max 1024, one seed);
//! expect a few minutes. The full protocol lives in `gbdyn sweep`.

use gbdyn::modelzoo::{ModelKind, ModelSpec};
use gbdyn::systems::{true_system, DoublePendulumParams};
use gbdyn::training::{data_efficiency_sweep, SweepConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let threshold: f64 = args.get(1).map(|v| v.parse().unwrap()).unwrap_or(1e-2);
    let max_size: usize = args.get(2).map(|v| v.parse().unwrap()).unwrap_or(1024);

    let plant = DoublePendulumParams::nominal();
    let (sys, pv) = true_system(&plant).expect("valid parameters");
    let cfg = SweepConfig {
        threshold,
        max_size,
        val_size: 1024,
        ..SweepConfig::default()
    };

    println!("validation threshold {threshold:.3e}, sizes 8..{max_size}");
    for kind in [ModelKind::WB, ModelKind::MVF, ModelKind::Naive] {
        let (result, _) = data_efficiency_sweep(
            kind,
            &ModelSpec::new(kind, 0),
            &sys,
            &pv.data,
            &cfg,
            1,
            |c| {
                println!(
                    "  {:5} size {:5}: val {:.3e}  {}",
                    c.kind.name(),
                    c.size,
                    c.val_loss,
                    if c.passed { "PASS" } else { "fail" }
                );
            },
        )
        .expect("sweep");
        match result.passing_size() {
            Some(size) => println!("{} generalizes from {size} samples", kind.name()),
            None => println!("{} needs more than {max_size} samples", kind.name()),
        }
    }
}
