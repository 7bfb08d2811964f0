//! Central finite differences vs the engine's exact gradients, end to end
//! through RK4 prediction losses — for every model in the zoo.
//!
//!     cargo run --release --example gradient_check

use gbdyn::engine::{finite_difference_check, GraphBuilder};
use gbdyn::dynamics::emit_rk4_step;
use gbdyn::modelzoo::{build, ModelKind, ModelSpec};

fn main() {
    let dt = 0.01;
    println!("max relative error of ∂loss/∂θ vs central differences (step 1e-5):");
    for kind in ModelKind::ALL {
        let mut spec = ModelSpec::new(kind, 42);
        spec.hidden = vec![8, 8];
        spec.naive_hidden = vec![8, 8];
        let model = build(&spec).expect("build");
        let d = model.dynamics();

        let mut b = GraphBuilder::new(d.tangent_dims());
        let x = b.input(4);
        let u = b.input(2);
        let target = b.input(4);
        let xp = emit_rk4_step(&mut b, d, x, u, dt);
        let diff = b.sub(xp, target);
        let loss = b.dot(diff, diff);
        let g = b.finish();
        let mut ws = g.workspace();
        g.set_input(&mut ws, 0, &[0.4, -0.9, 2.0, -3.0]);
        g.set_input(&mut ws, 1, &[30.0, -50.0]);
        g.set_input(&mut ws, 2, &[0.38, -0.93, 1.9, -2.8]);

        let mut params = model.params.data.clone();
        let err = finite_difference_check(&g, &mut ws, &mut params, loss, 1e-5).expect("fd check");
        println!("  {:6}  ({:5} parameters)  {err:.3e}", kind.name(), params.len());
    }
}
