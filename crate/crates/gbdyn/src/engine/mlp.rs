//! Feed-forward approximators with tanh hidden layers.
//!
//! tanh is smooth everywhere, so network outputs can be differentiated twice —
//! required because gradients of the mass matrix and potential with respect to
//! their inputs appear inside the training loss and must themselves be
//! differentiated with respect to the weights.

use rand::Rng;

use super::graph::{Graph, GraphBuilder, NodeId, Shape};
use crate::{Error, Result};

/// Structure of a multi-layer perceptron: affine layers with tanh on hidden
/// layers and identity on the output. Parameter values live in an external
/// flat vector (see [`super::params::ParamVector`]); layer order is
/// `(W₁, b₁, W₂, b₂, …)` with row-major weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    /// `[input, hidden…, output]` widths.
    pub widths: Vec<usize>,
    /// Fixed per-coordinate input scaling applied before the first layer,
    /// keeping raw physical inputs inside tanh's responsive range.
    pub input_scale: Option<Vec<f64>>,
    /// Fixed scaling applied to the linear output.
    pub output_scale: f64,
}

impl Mlp {
    pub fn new(widths: Vec<usize>) -> Self {
        assert!(widths.len() >= 2, "need at least input and output widths");
        Mlp {
            widths,
            input_scale: None,
            output_scale: 1.0,
        }
    }

    pub fn with_input_scale(mut self, scale: Vec<f64>) -> Self {
        assert_eq!(scale.len(), self.widths[0]);
        self.input_scale = Some(scale);
        self
    }

    pub fn with_output_scale(mut self, scale: f64) -> Self {
        self.output_scale = scale;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Σ_l (w_l·w_{l-1} + w_l).
    pub fn param_count(&self) -> usize {
        self.widths
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }

    /// Weights uniform in ±√(1/fan_in), biases zero.
    pub fn init_params(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for w in self.widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (1.0 / fan_in as f64).sqrt();
            for _ in 0..fan_out * fan_in {
                p.push(rng.random_range(-bound..bound));
            }
            p.extend(std::iter::repeat(0.0).take(fan_out));
        }
        p
    }

    /// Emits the network as graph nodes reading parameters at `offset`.
    pub fn emit(&self, b: &mut GraphBuilder, offset: usize, x: NodeId) -> NodeId {
        assert_eq!(b.len(x), self.input_dim(), "mlp emit: input length");
        let mut h = match &self.input_scale {
            Some(scale) => {
                let s = b.constant(scale.clone());
                b.mul(x, s)
            }
            None => x,
        };
        let mut off = offset;
        let last = self.widths.len() - 2;
        for (l, w) in self.widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let wn = b.param(off, Shape::matrix(fan_out, fan_in));
            off += fan_out * fan_in;
            let bn = b.param(off, Shape::vector(fan_out));
            off += fan_out;
            h = b.affine(wn, bn, h);
            if l < last {
                h = b.tanh(h);
            }
        }
        if self.output_scale != 1.0 {
            h = b.scale(h, self.output_scale);
        }
        h
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::shape(
                "mlp input",
                format!("{}", self.input_dim()),
                format!("{}", x.len()),
            ));
        }
        Ok(())
    }

    /// Plain evaluation of the network at `x`.
    pub fn forward(&self, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut b = GraphBuilder::new(0);
        let xin = b.input(self.input_dim());
        let out = self.emit(&mut b, 0, xin);
        let g = b.finish();
        let mut ws = g.workspace();
        g.load_params(&mut ws, params);
        g.set_input(&mut ws, 0, x);
        g.forward(&mut ws)?;
        Ok(g.value(&ws, out).to_vec())
    }

    /// Exact Jacobian ∂y/∂x, row-major `(output_dim × input_dim)`, computed
    /// with forward-mode tangents.
    pub fn input_jacobian(&self, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut b = GraphBuilder::new(self.input_dim());
        let xin = b.input(self.input_dim());
        let xs = b.seed(xin);
        let out = self.emit(&mut b, 0, xs);
        let jac = b.jacobian_from_tangents(out);
        let g = b.finish();
        let mut ws = g.workspace();
        g.load_params(&mut ws, params);
        g.set_input(&mut ws, 0, x);
        g.forward(&mut ws)?;
        Ok(g.value(&ws, jac).to_vec())
    }
}

/// Exact gradient of a scalar graph output with respect to all parameters.
///
/// The graph may contain any of the supported primitives, including
/// input-Jacobian extractions and SPD solves; the reverse sweep covers the
/// second-order paths those introduce. Non-finite intermediates are reported
/// with the failing primitive's name.
pub fn grad_wrt_params(
    graph: &Graph,
    ws: &mut super::graph::Workspace,
    params: &[f64],
    output: NodeId,
) -> Result<Vec<f64>> {
    assert_eq!(graph.shape(output).len(), 1, "grad_wrt_params: scalar output");
    graph.load_params(ws, params);
    graph.forward(ws)?;
    if let Some(culprit) = graph.find_non_finite(ws) {
        return Err(Error::NonFinite(culprit));
    }
    graph.backward(ws, output, &[1.0]);
    let mut grad = vec![0.0; params.len()];
    graph.accumulate_param_grad(ws, &mut grad);
    Ok(grad)
}
