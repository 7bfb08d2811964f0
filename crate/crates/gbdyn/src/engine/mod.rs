//! Twice-differentiable function approximators and their optimizer.
//!
//! Everything downstream needs two kinds of exact derivatives at once:
//! input-Jacobians of network outputs (small input dimension → forward-mode
//! tangents) and parameter gradients of losses that contain those Jacobians
//! (large parameter dimension → reverse mode over the whole graph, tangent
//! buffers included).

mod adam;
mod fdcheck;
mod graph;
mod mlp;
mod params;
pub mod rng;

pub use adam::AdamState;
pub use fdcheck::{finite_difference_check, ABS_FLOOR};
pub use graph::{Graph, GraphBuilder, NodeId, Op, Shape, Workspace};
pub use mlp::{grad_wrt_params, Mlp};
pub use params::{ParamLayout, ParamVector, Segment};

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn rng() -> impl Rng {
        rng::stream_rng(7, "engine-tests", 0)
    }

    #[test]
    fn zero_net_maps_to_zero() {
        let net = Mlp::new(vec![2, 3, 2]);
        let params = vec![0.0; net.param_count()];
        let y = net.forward(&params, &[0.7, -0.3]).unwrap();
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn single_linear_layer_is_identity() {
        // W = I, b = 0 on a single affine layer.
        let net = Mlp::new(vec![2, 2]);
        let params = vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let y = net.forward(&params, &[1.0, 2.0]).unwrap();
        assert_eq!(y, vec![1.0, 2.0]);
    }

    #[test]
    fn one_hidden_unit_composition() {
        // 1 → 1 → 1, all weights one, biases zero: y = tanh(x).
        let net = Mlp::new(vec![1, 1, 1]);
        let params = vec![1.0, 0.0, 1.0, 0.0];
        let y = net.forward(&params, &[0.5]).unwrap();
        assert_relative_eq!(y[0], 0.5_f64.tanh(), max_relative = 1e-15);
        assert_relative_eq!(y[0], 0.46211715726000974, max_relative = 1e-12);
    }

    #[test]
    fn input_dimension_mismatch_is_an_error() {
        let net = Mlp::new(vec![2, 2]);
        let params = vec![0.0; net.param_count()];
        assert!(net.forward(&params, &[1.0]).is_err());
        assert!(net.input_jacobian(&params, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn linear_layer_jacobian_is_the_weight_matrix() {
        let net = Mlp::new(vec![2, 2]);
        let params = vec![1.5, -2.0, 0.25, 3.0, 0.1, -0.2];
        let j = net.input_jacobian(&params, &[0.3, 0.9]).unwrap();
        assert_eq!(j, vec![1.5, -2.0, 0.25, 3.0]);

        let zero = vec![0.0; net.param_count()];
        let j0 = net.input_jacobian(&zero, &[0.3, 0.9]).unwrap();
        assert_eq!(j0, vec![0.0; 4]);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mut r = rng();
        let net = Mlp::new(vec![3, 8, 8, 2]);
        let params: Vec<f64> = (0..net.param_count()).map(|_| r.random_range(-1.0..1.0)).collect();
        let x = [0.3, -0.8, 0.5];
        let j = net.input_jacobian(&params, &x).unwrap();
        let h = 1e-5;
        for c in 0..3 {
            let mut xp = x;
            xp[c] += h;
            let mut xm = x;
            xm[c] -= h;
            let yp = net.forward(&params, &xp).unwrap();
            let ym = net.forward(&params, &xm).unwrap();
            for r_ in 0..2 {
                let fd = (yp[r_] - ym[r_]) / (2.0 * h);
                let denom = fd.abs().max(1e-8);
                assert!(
                    (j[r_ * 3 + c] - fd).abs() / denom <= 1e-6,
                    "J[{r_}][{c}] = {} vs fd {}",
                    j[r_ * 3 + c],
                    fd
                );
            }
        }
    }

    #[test]
    fn squared_norm_gradient_matches_differences() {
        // f = ‖net(x)‖² for a small random net.
        let mut r = rng();
        let net = Mlp::new(vec![2, 6, 6, 2]);
        let mut params: Vec<f64> =
            (0..net.param_count()).map(|_| r.random_range(-1.0..1.0)).collect();
        let mut b = GraphBuilder::new(0);
        let x = b.input(2);
        let y = net.emit(&mut b, 0, x);
        let f = b.dot(y, y);
        let g = b.finish();
        let mut ws = g.workspace();
        g.set_input(&mut ws, 0, &[0.4, -1.2]);
        let err = finite_difference_check(&g, &mut ws, &mut params, f, 1e-5).unwrap();
        assert!(err <= 1e-6, "max relative error {err}");
    }

    #[test]
    fn zero_param_squared_norm_bias_path() {
        // With all parameters zero, weight gradients fed from zero
        // activations vanish; only paths through the last bias survive, and
        // those match finite differences too.
        let net = Mlp::new(vec![2, 4, 2]);
        let mut params = vec![0.0; net.param_count()];
        let mut b = GraphBuilder::new(0);
        let x = b.input(2);
        let y = net.emit(&mut b, 0, x);
        let f = b.dot(y, y);
        let g = b.finish();
        let mut ws = g.workspace();
        g.set_input(&mut ws, 0, &[1.0, -1.0]);
        let grad = grad_wrt_params(&g, &mut ws, &params, f).unwrap();
        assert!(grad.iter().all(|&v| v == 0.0), "∇‖0‖² = 0 at the origin");
        let err = finite_difference_check(&g, &mut ws, &mut params, f, 1e-5).unwrap();
        assert!(err <= 1e-7, "max relative error {err}");
    }

    #[test]
    fn constant_objective_has_zero_gradient() {
        let mut b = GraphBuilder::new(0);
        let _x = b.input(2);
        let c = b.constant(vec![3.0]);
        let f = b.dot(c, c);
        let w = b.param(0, Shape::vector(3));
        let _unused = b.dot(w, w);
        let g = b.finish();
        let mut ws = g.workspace();
        g.set_input(&mut ws, 0, &[1.0, 2.0]);
        let params = vec![0.5, -1.0, 2.0];
        let grad = grad_wrt_params(&g, &mut ws, &params, f).unwrap();
        assert_eq!(grad, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn gradient_through_input_jacobian_matches_differences() {
        // f = ‖∇_x V(x)‖² exercises the second-order path: reverse mode
        // through forward-mode tangents.
        let mut r = rng();
        let net = Mlp::new(vec![2, 6, 6, 1]);
        let mut params: Vec<f64> =
            (0..net.param_count()).map(|_| r.random_range(-1.0..1.0)).collect();
        let mut b = GraphBuilder::new(2);
        let x = b.input(2);
        let xs = b.seed(x);
        let v = net.emit(&mut b, 0, xs);
        let gradv = b.grad_from_tangents(v);
        let f = b.dot(gradv, gradv);
        let g = b.finish();
        let mut ws = g.workspace();
        g.set_input(&mut ws, 0, &[0.2, -0.7]);
        let err = finite_difference_check(&g, &mut ws, &mut params, f, 1e-5).unwrap();
        assert!(err <= 1e-5, "max relative error {err}");
    }

    #[test]
    fn quadratic_finite_difference_error_is_roundoff() {
        // Central differences are exact on quadratics up to roundoff.
        let mut b = GraphBuilder::new(0);
        let w = b.param(0, Shape::vector(4));
        let c = b.constant(vec![1.0, -2.0, 0.5, 3.0]);
        let d = b.sub(w, c);
        let f = b.dot(d, d);
        let g = b.finish();
        let mut ws = g.workspace();
        let mut params = vec![0.3, 0.1, -0.4, 2.0];
        let err = finite_difference_check(&g, &mut ws, &mut params, f, 1e-4).unwrap();
        assert!(err <= 1e-9, "quadratic FD error {err}");
    }

    #[test]
    fn adam_zero_gradient_leaves_params_unchanged() {
        let mut st = AdamState::new(3, 1e-2);
        let mut p = vec![1.0, -2.0, 3.0];
        st.step(&mut p, &[0.0, 0.0, 0.0]);
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn adam_matches_scalar_hand_trace() {
        // Independent scalar trace: two steps with constant gradient 1.
        let (b1, b2, eps, lr) = (0.9, 0.999, 1e-8, 0.05);
        let mut m = 0.0;
        let mut v = 0.0;
        let mut expect = 0.7;
        for t in 1..=2u32 {
            m = b1 * m + (1.0 - b1) * 1.0;
            v = b2 * v + (1.0 - b2) * 1.0;
            let mhat = m / (1.0 - f64::powi(b1, t as i32));
            let vhat = v / (1.0 - f64::powi(b2, t as i32));
            expect -= lr * mhat / (f64::sqrt(vhat) + eps);
        }
        let mut st = AdamState::new(1, lr);
        let mut p = vec![0.7];
        st.step(&mut p, &[1.0]);
        // First step is −lr up to the ε correction.
        assert_relative_eq!(p[0], 0.7 - lr * (1.0 / (1.0 + eps)), max_relative = 1e-12);
        st.step(&mut p, &[1.0]);
        assert_relative_eq!(p[0], expect, max_relative = 1e-12);
        assert_eq!(st.step, 2);
    }

    #[test]
    fn param_vector_round_trip_and_layout() {
        let mut layout = ParamLayout::new();
        let a = layout.push("wb.m1", 1);
        let b = layout.push("net.mass", 5);
        assert_eq!((a, b), (0, 1));
        let mut pv = ParamVector::zeros(layout.clone());
        for (i, v) in pv.data.iter_mut().enumerate() {
            *v = i as f64;
        }
        let flat = pv.flatten();
        let mut pv2 = ParamVector::zeros(layout);
        pv2.unflatten(&flat);
        assert_eq!(pv, pv2);
        assert_eq!(pv2.segment("net.mass").unwrap(), &[1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn non_finite_intermediates_name_the_failing_primitive() {
        // Overflow inside dot: ∥w∥² = inf for w near f64::MAX.
        let mut b = GraphBuilder::new(0);
        let w = b.param(0, Shape::vector(2));
        let f = b.dot(w, w);
        let g = b.finish();
        let mut ws = g.workspace();
        let params = vec![1e200, 1e200];
        match grad_wrt_params(&g, &mut ws, &params, f) {
            Err(crate::Error::NonFinite(what)) => {
                assert!(what.contains("dot"), "culprit should be the dot node: {what}");
            }
            other => panic!("expected a non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_streams() {
        use rand::Rng;
        let mut a = rng::stream_rng(42, "data", 3);
        let mut b = rng::stream_rng(42, "data", 3);
        let mut c = rng::stream_rng(42, "init", 3);
        let (x1, x2): (f64, f64) = (a.random(), b.random());
        assert_eq!(x1, x2);
        let x3: f64 = c.random();
        assert_ne!(x1, x3);
    }
}
