//! Unforced, undamped double pendulum: RK4 should conserve T + V tightly.
//!
//!     cargo run --release --example energy_conservation

use gbdyn::dynamics::{rollout, GeneralizedState};
use gbdyn::systems::{true_system, DoublePendulumParams};

fn main() {
    let mut params = DoublePendulumParams::nominal();
    params.eta1 = 0.0;
    params.eta2 = 0.0;
    let (model, pv) = true_system(&params).expect("valid parameters");

    let dt = 1e-3;
    let seconds = 5.0;
    let steps = (seconds / dt) as usize;
    let x0 = GeneralizedState::new(vec![0.1, 0.0], vec![0.0, 0.0]);
    let controls = vec![vec![0.0, 0.0]; steps];
    let traj = rollout(&model, &pv.data, &x0, &controls, dt).expect("rollout");

    let e0 = model.energy(&pv.data, &x0).expect("energy");
    let mut worst: f64 = 0.0;
    for (i, s) in traj.iter().enumerate() {
        let e = model.energy(&pv.data, s).expect("energy");
        let drift = ((e - e0) / e0.abs()).abs();
        worst = worst.max(drift);
        if i % 1000 == 0 {
            println!("t = {:4.1} s   E = {e:14.9} J   relative drift {drift:.3e}", i as f64 * dt);
        }
    }
    println!("initial energy {e0:.9} J");
    println!("worst relative drift over {seconds} s at Δt = {dt}: {worst:.3e}");
}
