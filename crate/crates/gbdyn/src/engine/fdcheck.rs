//! Central finite-difference verification of parameter gradients.

use super::graph::{Graph, NodeId, Workspace};
use super::mlp::grad_wrt_params;
use crate::{Error, Result};

/// Relative-error floor: below this magnitude, absolute error is used.
pub const ABS_FLOOR: f64 = 1e-8;

/// Compares the reverse-mode gradient of a scalar graph output against
/// central finite differences over every parameter and returns the maximum
/// elementwise relative error (with absolute floor [`ABS_FLOOR`]).
pub fn finite_difference_check(
    graph: &Graph,
    ws: &mut Workspace,
    params: &mut [f64],
    output: NodeId,
    step: f64,
) -> Result<f64> {
    assert!(step > 0.0, "finite_difference_check: step must be positive");
    let analytic = grad_wrt_params(graph, ws, params, output)?;
    let mut max_err: f64 = 0.0;
    for i in 0..params.len() {
        let saved = params[i];
        params[i] = saved + step;
        let fp = eval_scalar(graph, ws, params, output)?;
        params[i] = saved - step;
        let fm = eval_scalar(graph, ws, params, output)?;
        params[i] = saved;
        let fd = (fp - fm) / (2.0 * step);
        let denom = analytic[i].abs().max(fd.abs()).max(ABS_FLOOR);
        max_err = max_err.max((analytic[i] - fd).abs() / denom);
    }
    // Restore workspace values for the unperturbed parameters.
    graph.load_params(ws, params);
    graph.forward(ws)?;
    Ok(max_err)
}

fn eval_scalar(graph: &Graph, ws: &mut Workspace, params: &[f64], output: NodeId) -> Result<f64> {
    graph.load_params(ws, params);
    graph.forward(ws)?;
    let v = graph.value(ws, output)[0];
    if !v.is_finite() {
        return Err(Error::NonFinite(
            "objective at finite-difference probe".to_string(),
        ));
    }
    Ok(v)
}
