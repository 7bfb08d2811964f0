//! Model-based RL on the swing-up task: each episode trains the model on
//! all data so far, plans with it, tracks the (noise-perturbed) plan on the
//! true plant, and adds the resulting trajectory to the dataset.
//!
//!     cargo run --release --example mbrl_swingup [model] [episodes] [seed]
//!
//! `model` is one of MVB, MVF, Naive (default MVB).

use gbdyn::control::{mbrl_loop, MbrlConfig};
use gbdyn::modelzoo::{ModelKind, ModelSpec};
use gbdyn::systems::DoublePendulumParams;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let kind = ModelKind::parse(args.get(1).map(String::as_str).unwrap_or("MVB"))
        .expect("model name");
    let episodes: usize = args.get(2).map(|v| v.parse().unwrap()).unwrap_or(10);
    let seed: u64 = args.get(3).map(|v| v.parse().unwrap()).unwrap_or(0);

    let plant = DoublePendulumParams::nominal();
    let mut cfg = MbrlConfig::for_plant(&plant);
    cfg.episodes = episodes;
    cfg.seed = seed;

    println!("model {kind}, {episodes} episodes, seed {seed}");
    println!("episode  performance_m  hold_m  feasible  dataset");
    let records = mbrl_loop(&ModelSpec::new(kind, seed), &plant, &cfg, |r| {
        println!(
            "{:7}  {:13.3}  {:6.3}  {:8}  {:7}",
            r.episode, r.performance, r.hold_performance, r.plan_feasible, r.dataset_size
        );
    })
    .expect("mbrl loop");

    let success = records
        .iter()
        .find(|r| r.episode > 0 && r.hold_performance <= cfg.success_threshold);
    match success {
        Some(r) => println!(
            "first success at episode {} (hold metric {:.3} m ≤ {:.1} m)",
            r.episode, r.hold_performance, cfg.success_threshold
        ),
        None => println!("no success within {episodes} episodes"),
    }
}
