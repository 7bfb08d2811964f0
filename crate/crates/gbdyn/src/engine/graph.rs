//! Differentiable computation graphs.
//!
//! A [`Graph`] is a static, topologically ordered list of tensor operations
//! built once per (model, use-case) and then evaluated many times against a
//! reusable [`Workspace`]. Two derivative mechanisms are combined:
//!
//! - **Forward-mode tangents.** A node may carry `k` tangent buffers holding
//!   directional derivatives with respect to seeded inputs (see [`Op::Seed`]).
//!   This is how exact gradients of network outputs with respect to their
//!   *inputs* (`∇_q V`, `∇_q (M q̇)`) become first-class values inside the
//!   graph.
//! - **Reverse mode.** A backward sweep accumulates exact adjoints of a seeded
//!   output with respect to every leaf, *including paths through tangent
//!   buffers*, so losses containing input-Jacobians still get exact parameter
//!   gradients, and step maps can be linearized exactly.
//!
//! Values are row-major; a vector of length `n` has shape `(n, 1)` and a
//! scalar `(1, 1)`. Everything is `f64` and single-threaded deterministic:
//! identical inputs produce bitwise-identical outputs.

use crate::{Error, Result};

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub fn vector(n: usize) -> Self {
        Shape { rows: n, cols: 1 }
    }
    pub fn scalar() -> Self {
        Shape { rows: 1, cols: 1 }
    }
    pub fn matrix(rows: usize, cols: usize) -> Self {
        Shape { rows, cols }
    }
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }
}

/// One node of the graph. Operand ids always point at earlier nodes.
#[derive(Clone, Debug)]
pub enum Op {
    /// Per-evaluation input; written through [`Graph::set_input`].
    Input { slot: usize },
    /// Slice of the flat parameter vector; loaded by [`Graph::load_params`].
    Param { offset: usize },
    /// Baked-in constant.
    Constant { idx: usize },
    /// Copy of `x` whose d-th tangent is seeded with the unit vector `e_d`.
    Seed { x: NodeId },
    /// `W·x + b` where `w` is a `(rows, cols)` node and `b` a `(rows, 1)` node.
    Affine { w: NodeId, b: NodeId, x: NodeId },
    Tanh { x: NodeId },
    Sin { x: NodeId },
    Cos { x: NodeId },
    Neg { x: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    /// Elementwise product.
    Mul { a: NodeId, b: NodeId },
    /// `c·x` for a compile-time constant `c`.
    Scale { x: NodeId, c: f64 },
    /// `a + c·b` for a compile-time constant `c`.
    AddScaled { a: NodeId, b: NodeId, c: f64 },
    Concat { parts: Vec<NodeId> },
    /// Contiguous sub-vector `x[start .. start+len]` (`len` from the shape).
    Slice { x: NodeId, start: usize },
    /// Same data, new shape.
    Reshape { x: NodeId },
    /// Inner product -> scalar.
    Dot { a: NodeId, b: NodeId },
    /// Pack `raw` (length n(n+1)/2) into a lower-triangular n×n matrix:
    /// first n entries plus `delta` on the diagonal, the rest filling the
    /// strict lower triangle row-major.
    AssembleTril { raw: NodeId, delta: f64 },
    /// `A·Bᵀ`.
    MatMulNt { a: NodeId, b: NodeId },
    /// Matrix–vector product.
    MatVec { m: NodeId, x: NodeId },
    /// `M⁻¹·rhs` by Cholesky; symmetric positive definite `M` expected.
    /// Consumes values only (tangents of `M` are used elsewhere).
    SolveSpd { m: NodeId, rhs: NodeId },
    /// Gather the tangents of a scalar into a `(k, 1)` vector: the gradient
    /// of `s` with respect to the seeded input.
    GradFromTangents { s: NodeId },
    /// `Σ_d tan_d(y)·w[d]` — contracts the tangents of `y` against a plain
    /// `(k, 1)` vector, e.g. `∇_q(M q̇)·q̇`.
    ContractTangents { y: NodeId, w: NodeId },
    /// `(len(y), k)` matrix whose columns are the tangents of `y`: the
    /// Jacobian of `y` with respect to the seeded input.
    JacobianFromTangents { y: NodeId },
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Input { .. } => "input",
            Op::Param { .. } => "param",
            Op::Constant { .. } => "constant",
            Op::Seed { .. } => "seed",
            Op::Affine { .. } => "affine",
            Op::Tanh { .. } => "tanh",
            Op::Sin { .. } => "sin",
            Op::Cos { .. } => "cos",
            Op::Neg { .. } => "neg",
            Op::Add { .. } => "add",
            Op::Sub { .. } => "sub",
            Op::Mul { .. } => "mul",
            Op::Scale { .. } => "scale",
            Op::AddScaled { .. } => "add_scaled",
            Op::Concat { .. } => "concat",
            Op::Slice { .. } => "slice",
            Op::Reshape { .. } => "reshape",
            Op::Dot { .. } => "dot",
            Op::AssembleTril { .. } => "assemble_tril",
            Op::MatMulNt { .. } => "matmul_nt",
            Op::MatVec { .. } => "matvec",
            Op::SolveSpd { .. } => "solve_spd",
            Op::GradFromTangents { .. } => "grad_from_tangents",
            Op::ContractTangents { .. } => "contract_tangents",
            Op::JacobianFromTangents { .. } => "jacobian_from_tangents",
        }
    }
}

pub struct Graph {
    /// Number of forward-mode tangent directions carried by seeded chains.
    pub k: usize,
    ops: Vec<Op>,
    shapes: Vec<Shape>,
    has_tan: Vec<bool>,
    consts: Vec<Vec<f64>>,
    input_nodes: Vec<NodeId>,
    param_nodes: Vec<NodeId>,
    params_len: usize,
}

/// Builds a [`Graph`] with shape checking. Misuse is a programming error and
/// panics; user-facing dimension validation happens at the public API layer.
pub struct GraphBuilder {
    k: usize,
    ops: Vec<Op>,
    shapes: Vec<Shape>,
    has_tan: Vec<bool>,
    consts: Vec<Vec<f64>>,
    input_nodes: Vec<NodeId>,
    param_nodes: Vec<NodeId>,
    params_len: usize,
}

impl GraphBuilder {
    /// `k` is the tangent-direction count; pass 0 when no node is seeded.
    pub fn new(k: usize) -> Self {
        GraphBuilder {
            k,
            ops: Vec::new(),
            shapes: Vec::new(),
            has_tan: Vec::new(),
            consts: Vec::new(),
            input_nodes: Vec::new(),
            param_nodes: Vec::new(),
            params_len: 0,
        }
    }

    fn push(&mut self, op: Op, shape: Shape, tan: bool) -> NodeId {
        let id = self.ops.len();
        self.ops.push(op);
        self.shapes.push(shape);
        self.has_tan.push(tan && self.k > 0);
        id
    }

    pub fn shape(&self, id: NodeId) -> Shape {
        self.shapes[id]
    }

    pub fn len(&self, id: NodeId) -> usize {
        self.shapes[id].len()
    }

    fn tan(&self, id: NodeId) -> bool {
        self.has_tan[id]
    }

    pub fn input(&mut self, len: usize) -> NodeId {
        let slot = self.input_nodes.len();
        let id = self.push(Op::Input { slot }, Shape::vector(len), false);
        self.input_nodes.push(id);
        id
    }

    /// Declares a parameter leaf over `params[offset..offset+shape.len()]`.
    pub fn param(&mut self, offset: usize, shape: Shape) -> NodeId {
        self.params_len = self.params_len.max(offset + shape.len());
        let id = self.push(Op::Param { offset }, shape, false);
        self.param_nodes.push(id);
        id
    }

    pub fn constant(&mut self, values: Vec<f64>) -> NodeId {
        let shape = Shape::vector(values.len());
        let idx = self.consts.len();
        self.consts.push(values);
        self.push(Op::Constant { idx }, shape, false)
    }

    pub fn seed(&mut self, x: NodeId) -> NodeId {
        assert!(self.k > 0, "seed in a graph with k = 0");
        assert_eq!(self.len(x), self.k, "seed length must equal tangent count");
        let shape = self.shapes[x];
        self.push(Op::Seed { x }, shape, true)
    }

    pub fn affine(&mut self, w: NodeId, b: NodeId, x: NodeId) -> NodeId {
        let ws = self.shapes[w];
        assert_eq!(ws.cols, self.len(x), "affine: W cols vs x len");
        assert_eq!(ws.rows, self.len(b), "affine: W rows vs b len");
        let tan = self.tan(x);
        self.push(Op::Affine { w, b, x }, Shape::vector(ws.rows), tan)
    }

    fn unary(&mut self, op: fn(NodeId) -> Op, x: NodeId) -> NodeId {
        let shape = self.shapes[x];
        let tan = self.tan(x);
        self.push(op(x), shape, tan)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        self.unary(|x| Op::Tanh { x }, x)
    }
    pub fn sin(&mut self, x: NodeId) -> NodeId {
        self.unary(|x| Op::Sin { x }, x)
    }
    pub fn cos(&mut self, x: NodeId) -> NodeId {
        self.unary(|x| Op::Cos { x }, x)
    }
    pub fn neg(&mut self, x: NodeId) -> NodeId {
        self.unary(|x| Op::Neg { x }, x)
    }

    fn binary(&mut self, op: Op, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.len(a), self.len(b), "{}: operand lengths", op.name());
        let shape = self.shapes[a];
        let tan = self.tan(a) || self.tan(b);
        self.push(op, shape, tan)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(Op::Add { a, b }, a, b)
    }
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(Op::Sub { a, b }, a, b)
    }
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(Op::Mul { a, b }, a, b)
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let shape = self.shapes[x];
        let tan = self.tan(x);
        self.push(Op::Scale { x, c }, shape, tan)
    }

    pub fn add_scaled(&mut self, a: NodeId, b: NodeId, c: f64) -> NodeId {
        self.binary(Op::AddScaled { a, b, c }, a, b)
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let len: usize = parts.iter().map(|&p| self.len(p)).sum();
        let tan = parts.iter().any(|&p| self.tan(p));
        self.push(
            Op::Concat {
                parts: parts.to_vec(),
            },
            Shape::vector(len),
            tan,
        )
    }

    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        assert!(start + len <= self.len(x), "slice out of range");
        let tan = self.tan(x);
        self.push(Op::Slice { x, start }, Shape::vector(len), tan)
    }

    pub fn reshape(&mut self, x: NodeId, rows: usize, cols: usize) -> NodeId {
        assert_eq!(self.len(x), rows * cols, "reshape length mismatch");
        let tan = self.tan(x);
        self.push(Op::Reshape { x }, Shape::matrix(rows, cols), tan)
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.len(a), self.len(b), "dot: operand lengths");
        let tan = self.tan(a) || self.tan(b);
        self.push(Op::Dot { a, b }, Shape::scalar(), tan)
    }

    pub fn assemble_tril(&mut self, raw: NodeId, n: usize, delta: f64) -> NodeId {
        assert_eq!(self.len(raw), n * (n + 1) / 2, "assemble_tril: raw length");
        let tan = self.tan(raw);
        self.push(Op::AssembleTril { raw, delta }, Shape::matrix(n, n), tan)
    }

    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (sa, sb) = (self.shapes[a], self.shapes[b]);
        assert_eq!(sa.cols, sb.cols, "matmul_nt: inner dims");
        let tan = self.tan(a) || self.tan(b);
        self.push(Op::MatMulNt { a, b }, Shape::matrix(sa.rows, sb.rows), tan)
    }

    pub fn matvec(&mut self, m: NodeId, x: NodeId) -> NodeId {
        let sm = self.shapes[m];
        assert_eq!(sm.cols, self.len(x), "matvec: dims");
        assert_ne!(m, x, "matvec: operands must be distinct nodes");
        let tan = self.tan(m) || self.tan(x);
        self.push(Op::MatVec { m, x }, Shape::vector(sm.rows), tan)
    }

    pub fn solve_spd(&mut self, m: NodeId, rhs: NodeId) -> NodeId {
        let sm = self.shapes[m];
        assert_eq!(sm.rows, sm.cols, "solve_spd: square matrix");
        assert_eq!(sm.rows, self.len(rhs), "solve_spd: rhs length");
        self.push(Op::SolveSpd { m, rhs }, Shape::vector(sm.rows), false)
    }

    pub fn grad_from_tangents(&mut self, s: NodeId) -> NodeId {
        assert_eq!(self.len(s), 1, "grad_from_tangents: scalar input");
        assert!(self.tan(s), "grad_from_tangents: input carries no tangents");
        self.push(Op::GradFromTangents { s }, Shape::vector(self.k), false)
    }

    pub fn contract_tangents(&mut self, y: NodeId, w: NodeId) -> NodeId {
        assert!(self.tan(y), "contract_tangents: y carries no tangents");
        assert!(!self.tan(w), "contract_tangents: w must be tangent-free");
        assert_eq!(self.len(w), self.k, "contract_tangents: w length");
        let shape = Shape::vector(self.len(y));
        self.push(Op::ContractTangents { y, w }, shape, false)
    }

    pub fn jacobian_from_tangents(&mut self, y: NodeId) -> NodeId {
        assert!(self.tan(y), "jacobian_from_tangents: y carries no tangents");
        let rows = self.len(y);
        self.push(
            Op::JacobianFromTangents { y },
            Shape::matrix(rows, self.k),
            false,
        )
    }

    pub fn finish(self) -> Graph {
        Graph {
            k: self.k,
            ops: self.ops,
            shapes: self.shapes,
            has_tan: self.has_tan,
            consts: self.consts,
            input_nodes: self.input_nodes,
            param_nodes: self.param_nodes,
            params_len: self.params_len,
        }
    }
}

/// Reusable evaluation buffers for one graph.
pub struct Workspace {
    val: Vec<Vec<f64>>,
    /// Tangents, `k` stacked buffers per node (empty when the node has none).
    tan: Vec<Vec<f64>>,
    aval: Vec<Vec<f64>>,
    atan: Vec<Vec<f64>>,
    /// Cholesky factors stored by `SolveSpd` nodes for reuse in backward.
    factor: Vec<Vec<f64>>,
}

impl Graph {
    pub fn num_nodes(&self) -> usize {
        self.ops.len()
    }

    pub fn params_len(&self) -> usize {
        self.params_len
    }

    pub fn num_inputs(&self) -> usize {
        self.input_nodes.len()
    }

    pub fn shape(&self, id: NodeId) -> Shape {
        self.shapes[id]
    }

    pub fn workspace(&self) -> Workspace {
        let n = self.ops.len();
        let mut val = Vec::with_capacity(n);
        let mut tan = Vec::with_capacity(n);
        let mut aval = Vec::with_capacity(n);
        let mut atan = Vec::with_capacity(n);
        let mut factor = Vec::with_capacity(n);
        for i in 0..n {
            let len = self.shapes[i].len();
            val.push(vec![0.0; len]);
            let tlen = if self.has_tan[i] { self.k * len } else { 0 };
            tan.push(vec![0.0; tlen]);
            aval.push(vec![0.0; len]);
            atan.push(vec![0.0; tlen]);
            let flen = match self.ops[i] {
                Op::SolveSpd { .. } => len * len,
                _ => 0,
            };
            factor.push(vec![0.0; flen]);
        }
        let mut ws = Workspace {
            val,
            tan,
            aval,
            atan,
            factor,
        };
        for (i, op) in self.ops.iter().enumerate() {
            if let Op::Constant { idx } = op {
                ws.val[i].copy_from_slice(&self.consts[*idx]);
            }
        }
        ws
    }

    /// Copies parameter values into their leaf buffers. Call after every
    /// parameter update, before `forward`.
    pub fn load_params(&self, ws: &mut Workspace, params: &[f64]) {
        assert!(
            params.len() >= self.params_len,
            "load_params: vector too short"
        );
        for &id in &self.param_nodes {
            if let Op::Param { offset } = self.ops[id] {
                let len = self.shapes[id].len();
                ws.val[id].copy_from_slice(&params[offset..offset + len]);
            }
        }
    }

    pub fn set_input(&self, ws: &mut Workspace, slot: usize, values: &[f64]) {
        let id = self.input_nodes[slot];
        assert_eq!(values.len(), self.shapes[id].len(), "set_input length");
        ws.val[id].copy_from_slice(values);
    }

    pub fn value<'w>(&self, ws: &'w Workspace, id: NodeId) -> &'w [f64] {
        &ws.val[id]
    }

    /// Adjoint of the most recent backward sweep at `id` (value part).
    pub fn adjoint<'w>(&self, ws: &'w Workspace, id: NodeId) -> &'w [f64] {
        &ws.aval[id]
    }

    pub fn input_node(&self, slot: usize) -> NodeId {
        self.input_nodes[slot]
    }

    /// Accumulates parameter-leaf adjoints into a flat gradient vector.
    pub fn accumulate_param_grad(&self, ws: &Workspace, grad: &mut [f64]) {
        for &id in &self.param_nodes {
            if let Op::Param { offset } = self.ops[id] {
                let len = self.shapes[id].len();
                axpy(&mut grad[offset..offset + len], 1.0, &ws.aval[id]);
            }
        }
    }

    /// Scans for the first non-finite value and names the producing op.
    pub fn find_non_finite(&self, ws: &Workspace) -> Option<String> {
        for i in 0..self.ops.len() {
            if ws.val[i].iter().any(|v| !v.is_finite())
                || ws.tan[i].iter().any(|v| !v.is_finite())
            {
                return Some(format!("{} (node {})", self.ops[i].name(), i));
            }
        }
        None
    }

    pub fn forward(&self, ws: &mut Workspace) -> Result<()> {
        let k = self.k;
        let Workspace {
            val, tan, factor, ..
        } = ws;
        for i in 0..self.ops.len() {
            // Split so the output buffers can be written while operands
            // (strictly earlier nodes) are read.
            let (vlo, vhi) = val.split_at_mut(i);
            let (tlo, thi) = tan.split_at_mut(i);
            let out = &mut vhi[0];
            let out_t = &mut thi[0];
            match &self.ops[i] {
                Op::Input { .. } | Op::Param { .. } | Op::Constant { .. } => {}
                Op::Seed { x } => {
                    out.copy_from_slice(&vlo[*x]);
                    out_t.fill(0.0);
                    let n = out.len();
                    for d in 0..k {
                        out_t[d * n + d] = 1.0;
                    }
                }
                Op::Affine { w, b, x } => {
                    let wv = &vlo[*w];
                    let xv = &vlo[*x];
                    let cols = xv.len();
                    out.copy_from_slice(&vlo[*b]);
                    matvec_acc(wv, cols, xv, out);
                    if !out_t.is_empty() {
                        let xt = &tlo[*x];
                        let rows = out.len();
                        for d in 0..k {
                            let dst = &mut out_t[d * rows..(d + 1) * rows];
                            dst.fill(0.0);
                            matvec_acc(wv, cols, &xt[d * cols..(d + 1) * cols], dst);
                        }
                    }
                }
                Op::Tanh { x } => {
                    let xv = &vlo[*x];
                    for (o, &v) in out.iter_mut().zip(xv) {
                        *o = v.tanh();
                    }
                    if !out_t.is_empty() {
                        let xt = &tlo[*x];
                        let n = out.len();
                        for d in 0..k {
                            for j in 0..n {
                                out_t[d * n + j] = (1.0 - out[j] * out[j]) * xt[d * n + j];
                            }
                        }
                    }
                }
                Op::Sin { x } => {
                    let xv = &vlo[*x];
                    for (o, &v) in out.iter_mut().zip(xv) {
                        *o = v.sin();
                    }
                    if !out_t.is_empty() {
                        let xt = &tlo[*x];
                        let n = out.len();
                        for d in 0..k {
                            for j in 0..n {
                                out_t[d * n + j] = xv[j].cos() * xt[d * n + j];
                            }
                        }
                    }
                }
                Op::Cos { x } => {
                    let xv = &vlo[*x];
                    for (o, &v) in out.iter_mut().zip(xv) {
                        *o = v.cos();
                    }
                    if !out_t.is_empty() {
                        let xt = &tlo[*x];
                        let n = out.len();
                        for d in 0..k {
                            for j in 0..n {
                                out_t[d * n + j] = -xv[j].sin() * xt[d * n + j];
                            }
                        }
                    }
                }
                Op::Neg { x } => {
                    for (o, &v) in out.iter_mut().zip(&vlo[*x]) {
                        *o = -v;
                    }
                    for (o, &v) in out_t.iter_mut().zip(&tlo[*x]) {
                        *o = -v;
                    }
                }
                Op::Add { a, b } => {
                    for ((o, &x), &y) in out.iter_mut().zip(&vlo[*a]).zip(&vlo[*b]) {
                        *o = x + y;
                    }
                    if !out_t.is_empty() {
                        combine_tans(out_t, &tlo[*a], &tlo[*b], 1.0);
                    }
                }
                Op::Sub { a, b } => {
                    for ((o, &x), &y) in out.iter_mut().zip(&vlo[*a]).zip(&vlo[*b]) {
                        *o = x - y;
                    }
                    if !out_t.is_empty() {
                        combine_tans(out_t, &tlo[*a], &tlo[*b], -1.0);
                    }
                }
                Op::Mul { a, b } => {
                    let (av, bv) = (&vlo[*a], &vlo[*b]);
                    for ((o, &x), &y) in out.iter_mut().zip(av).zip(bv) {
                        *o = x * y;
                    }
                    if !out_t.is_empty() {
                        let n = out.len();
                        let (at, bt) = (&tlo[*a], &tlo[*b]);
                        out_t.fill(0.0);
                        for d in 0..k {
                            for j in 0..n {
                                let mut t = 0.0;
                                if !at.is_empty() {
                                    t += at[d * n + j] * bv[j];
                                }
                                if !bt.is_empty() {
                                    t += av[j] * bt[d * n + j];
                                }
                                out_t[d * n + j] = t;
                            }
                        }
                    }
                }
                Op::Scale { x, c } => {
                    for (o, &v) in out.iter_mut().zip(&vlo[*x]) {
                        *o = c * v;
                    }
                    for (o, &v) in out_t.iter_mut().zip(&tlo[*x]) {
                        *o = c * v;
                    }
                }
                Op::AddScaled { a, b, c } => {
                    for ((o, &x), &y) in out.iter_mut().zip(&vlo[*a]).zip(&vlo[*b]) {
                        *o = x + c * y;
                    }
                    if !out_t.is_empty() {
                        combine_tans(out_t, &tlo[*a], &tlo[*b], *c);
                    }
                }
                Op::Concat { parts } => {
                    let n = out.len();
                    let mut off = 0;
                    if !out_t.is_empty() {
                        out_t.fill(0.0);
                    }
                    for &p in parts {
                        let pv = &vlo[p];
                        let plen = pv.len();
                        out[off..off + plen].copy_from_slice(pv);
                        let pt = &tlo[p];
                        if !out_t.is_empty() && !pt.is_empty() {
                            for d in 0..k {
                                out_t[d * n + off..d * n + off + plen]
                                    .copy_from_slice(&pt[d * plen..(d + 1) * plen]);
                            }
                        }
                        off += plen;
                    }
                }
                Op::Slice { x, start } => {
                    let n = out.len();
                    let xv = &vlo[*x];
                    out.copy_from_slice(&xv[*start..*start + n]);
                    if !out_t.is_empty() {
                        let xt = &tlo[*x];
                        let xlen = xv.len();
                        for d in 0..k {
                            out_t[d * n..(d + 1) * n].copy_from_slice(
                                &xt[d * xlen + start..d * xlen + start + n],
                            );
                        }
                    }
                }
                Op::Reshape { x } => {
                    out.copy_from_slice(&vlo[*x]);
                    out_t.copy_from_slice(&tlo[*x]);
                }
                Op::Dot { a, b } => {
                    let (av, bv) = (&vlo[*a], &vlo[*b]);
                    out[0] = dot(av, bv);
                    if !out_t.is_empty() {
                        let n = av.len();
                        let (at, bt) = (&tlo[*a], &tlo[*b]);
                        for d in 0..k {
                            let mut t = 0.0;
                            if !at.is_empty() {
                                t += dot(&at[d * n..(d + 1) * n], bv);
                            }
                            if !bt.is_empty() {
                                t += dot(av, &bt[d * n..(d + 1) * n]);
                            }
                            out_t[d] = t;
                        }
                    }
                }
                Op::AssembleTril { raw, delta } => {
                    let n = self.shapes[i].rows;
                    let rv = &vlo[*raw];
                    assemble_tril(rv, n, *delta, out);
                    if !out_t.is_empty() {
                        let rt = &tlo[*raw];
                        let rlen = rv.len();
                        let nn = n * n;
                        for d in 0..k {
                            assemble_tril(
                                &rt[d * rlen..(d + 1) * rlen],
                                n,
                                0.0,
                                &mut out_t[d * nn..(d + 1) * nn],
                            );
                        }
                    }
                }
                Op::MatMulNt { a, b } => {
                    let (sa, sb) = (self.shapes[*a], self.shapes[*b]);
                    let (av, bv) = (&vlo[*a], &vlo[*b]);
                    matmul_nt(av, sa.rows, sa.cols, bv, sb.rows, out);
                    if !out_t.is_empty() {
                        let (at, bt) = (&tlo[*a], &tlo[*b]);
                        let olen = out.len();
                        let mut scratch = vec![0.0; olen];
                        for d in 0..k {
                            let dst = &mut out_t[d * olen..(d + 1) * olen];
                            dst.fill(0.0);
                            if !at.is_empty() {
                                matmul_nt(
                                    &at[d * av.len()..(d + 1) * av.len()],
                                    sa.rows,
                                    sa.cols,
                                    bv,
                                    sb.rows,
                                    &mut scratch,
                                );
                                axpy(dst, 1.0, &scratch);
                            }
                            if !bt.is_empty() {
                                matmul_nt(
                                    av,
                                    sa.rows,
                                    sa.cols,
                                    &bt[d * bv.len()..(d + 1) * bv.len()],
                                    sb.rows,
                                    &mut scratch,
                                );
                                axpy(dst, 1.0, &scratch);
                            }
                        }
                    }
                }
                Op::MatVec { m, x } => {
                    let sm = self.shapes[*m];
                    let (mv, xv) = (&vlo[*m], &vlo[*x]);
                    out.fill(0.0);
                    matvec_acc(mv, sm.cols, xv, out);
                    if !out_t.is_empty() {
                        let (mt, xt) = (&tlo[*m], &tlo[*x]);
                        let rows = out.len();
                        for d in 0..k {
                            let dst = &mut out_t[d * rows..(d + 1) * rows];
                            dst.fill(0.0);
                            if !mt.is_empty() {
                                matvec_acc(&mt[d * mv.len()..(d + 1) * mv.len()], sm.cols, xv, dst);
                            }
                            if !xt.is_empty() {
                                matvec_acc(mv, sm.cols, &xt[d * sm.cols..(d + 1) * sm.cols], dst);
                            }
                        }
                    }
                }
                Op::SolveSpd { m, rhs } => {
                    let n = out.len();
                    let fac = &mut factor[i];
                    fac.copy_from_slice(&vlo[*m]);
                    if cholesky_in_place(fac, n).is_err() {
                        // One-shot diagonal regularization before giving up.
                        fac.copy_from_slice(&vlo[*m]);
                        for j in 0..n {
                            fac[j * n + j] += 1e-9;
                        }
                        if cholesky_in_place(fac, n).is_err() {
                            let mv = &vlo[*m];
                            let diag: Vec<f64> = (0..n).map(|j| mv[j * n + j]).collect();
                            return Err(Error::SolveFailure(format!(
                                "matrix not positive definite at node {i} (n = {n}, diagonal = {diag:?})"
                            )));
                        }
                    }
                    out.copy_from_slice(&vlo[*rhs]);
                    chol_solve(fac, n, out);
                }
                Op::GradFromTangents { s } => {
                    out.copy_from_slice(&tlo[*s]);
                }
                Op::ContractTangents { y, w } => {
                    let yt = &tlo[*y];
                    let wv = &vlo[*w];
                    let n = out.len();
                    out.fill(0.0);
                    for d in 0..k {
                        axpy(out, wv[d], &yt[d * n..(d + 1) * n]);
                    }
                }
                Op::JacobianFromTangents { y } => {
                    let yt = &tlo[*y];
                    let n = self.shapes[i].rows;
                    for j in 0..n {
                        for d in 0..k {
                            out[j * k + d] = yt[d * n + j];
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Reverse sweep from `node`, whose adjoint is seeded with `seed`
    /// (length = node len). Adjoints of all earlier nodes are replaced.
    pub fn backward(&self, ws: &mut Workspace, node: NodeId, seed: &[f64]) {
        let k = self.k;
        let Workspace {
            val,
            tan,
            aval,
            atan,
            factor,
        } = ws;
        for a in aval.iter_mut() {
            a.fill(0.0);
        }
        for a in atan.iter_mut() {
            a.fill(0.0);
        }
        aval[node].copy_from_slice(seed);
        for i in (0..=node).rev() {
            // Take this node's adjoints out so operand adjoints (< i) can be
            // accumulated without aliasing; `val`/`tan` are read-only here.
            let g = std::mem::take(&mut aval[i]);
            let gt = std::mem::take(&mut atan[i]);
            match &self.ops[i] {
                Op::Input { .. } | Op::Param { .. } | Op::Constant { .. } => {}
                Op::Seed { x } => {
                    // Seeded tangents are constants: nothing flows from `gt`.
                    axpy(&mut aval[*x], 1.0, &g);
                }
                Op::Affine { w, b, x } => {
                    let rows = g.len();
                    let cols = val[*x].len();
                    let wv = &val[*w];
                    let xv = &val[*x];
                    let xt = &tan[*x];
                    {
                        let wbar = &mut aval[*w];
                        outer_acc(wbar, &g, xv);
                        if !gt.is_empty() && !xt.is_empty() {
                            for d in 0..k {
                                outer_acc(
                                    wbar,
                                    &gt[d * rows..(d + 1) * rows],
                                    &xt[d * cols..(d + 1) * cols],
                                );
                            }
                        }
                    }
                    axpy(&mut aval[*b], 1.0, &g);
                    {
                        // x̄ += Wᵀ·ḡ, row-major friendly: x̄ += Σ_r ḡ_r · W[r,:]
                        let xbar = &mut aval[*x];
                        for r in 0..rows {
                            axpy(xbar, g[r], &wv[r * cols..(r + 1) * cols]);
                        }
                    }
                    if !gt.is_empty() && !atan[*x].is_empty() {
                        let xtbar = &mut atan[*x];
                        for d in 0..k {
                            let gtd = &gt[d * rows..(d + 1) * rows];
                            for r in 0..rows {
                                axpy(
                                    &mut xtbar[d * cols..(d + 1) * cols],
                                    gtd[r],
                                    &wv[r * cols..(r + 1) * cols],
                                );
                            }
                        }
                    }
                }
                Op::Tanh { x } => {
                    let n = g.len();
                    let yv = &val[i];
                    let xt = &tan[*x];
                    {
                        let xbar = &mut aval[*x];
                        for j in 0..n {
                            xbar[j] += g[j] * (1.0 - yv[j] * yv[j]);
                        }
                        if !gt.is_empty() && !xt.is_empty() {
                            // Second-order path: d(1 − tanh²)/dx = −2·t·(1 − t²)
                            for d in 0..k {
                                for j in 0..n {
                                    let t = yv[j];
                                    let d1 = 1.0 - t * t;
                                    xbar[j] += gt[d * n + j] * (-2.0 * t * d1) * xt[d * n + j];
                                }
                            }
                        }
                    }
                    if !gt.is_empty() && !atan[*x].is_empty() {
                        let xtbar = &mut atan[*x];
                        for d in 0..k {
                            for j in 0..n {
                                xtbar[d * n + j] += gt[d * n + j] * (1.0 - yv[j] * yv[j]);
                            }
                        }
                    }
                }
                Op::Sin { x } | Op::Cos { x } => {
                    let is_sin = matches!(self.ops[i], Op::Sin { .. });
                    let n = g.len();
                    let xv = &val[*x];
                    let xt = &tan[*x];
                    let yv = &val[i];
                    {
                        let xbar = &mut aval[*x];
                        for j in 0..n {
                            // sin' = cos, cos' = −sin
                            let d1 = if is_sin { xv[j].cos() } else { -xv[j].sin() };
                            xbar[j] += g[j] * d1;
                        }
                        if !gt.is_empty() && !xt.is_empty() {
                            for d in 0..k {
                                for j in 0..n {
                                    // sin'' = −sin = −y, cos'' = −cos = −y
                                    xbar[j] += gt[d * n + j] * (-yv[j]) * xt[d * n + j];
                                }
                            }
                        }
                    }
                    if !gt.is_empty() && !atan[*x].is_empty() {
                        let xtbar = &mut atan[*x];
                        for d in 0..k {
                            for j in 0..n {
                                let d1 = if is_sin { xv[j].cos() } else { -xv[j].sin() };
                                xtbar[d * n + j] += gt[d * n + j] * d1;
                            }
                        }
                    }
                }
                Op::Neg { x } => {
                    axpy(&mut aval[*x], -1.0, &g);
                    if !gt.is_empty() && !atan[*x].is_empty() {
                        axpy(&mut atan[*x], -1.0, &gt);
                    }
                }
                Op::Add { a, b } => {
                    acc_linear(aval, atan, *a, &g, &gt, 1.0);
                    acc_linear(aval, atan, *b, &g, &gt, 1.0);
                }
                Op::Sub { a, b } => {
                    acc_linear(aval, atan, *a, &g, &gt, 1.0);
                    acc_linear(aval, atan, *b, &g, &gt, -1.0);
                }
                Op::AddScaled { a, b, c } => {
                    acc_linear(aval, atan, *a, &g, &gt, 1.0);
                    acc_linear(aval, atan, *b, &g, &gt, *c);
                }
                Op::Scale { x, c } => {
                    acc_linear(aval, atan, *x, &g, &gt, *c);
                }
                Op::Mul { a, b } => {
                    backward_mul(val, tan, aval, atan, k, *a, *b, &g, &gt);
                    backward_mul(val, tan, aval, atan, k, *b, *a, &g, &gt);
                }
                Op::Concat { parts } => {
                    let n = g.len();
                    let mut off = 0;
                    for &p in parts {
                        let plen = val[p].len();
                        axpy(&mut aval[p], 1.0, &g[off..off + plen]);
                        if !gt.is_empty() && !atan[p].is_empty() {
                            let ptbar = &mut atan[p];
                            for d in 0..k {
                                axpy(
                                    &mut ptbar[d * plen..(d + 1) * plen],
                                    1.0,
                                    &gt[d * n + off..d * n + off + plen],
                                );
                            }
                        }
                        off += plen;
                    }
                }
                Op::Slice { x, start } => {
                    let n = g.len();
                    let xlen = val[*x].len();
                    axpy(&mut aval[*x][*start..*start + n], 1.0, &g);
                    if !gt.is_empty() && !atan[*x].is_empty() {
                        let xtbar = &mut atan[*x];
                        for d in 0..k {
                            axpy(
                                &mut xtbar[d * xlen + start..d * xlen + start + n],
                                1.0,
                                &gt[d * n..(d + 1) * n],
                            );
                        }
                    }
                }
                Op::Reshape { x } => {
                    axpy(&mut aval[*x], 1.0, &g);
                    if !gt.is_empty() && !atan[*x].is_empty() {
                        axpy(&mut atan[*x], 1.0, &gt);
                    }
                }
                Op::Dot { a, b } => {
                    backward_dot(val, tan, aval, atan, k, *a, *b, g[0], &gt);
                    backward_dot(val, tan, aval, atan, k, *b, *a, g[0], &gt);
                }
                Op::AssembleTril { raw, .. } => {
                    let n = self.shapes[i].rows;
                    let rlen = val[*raw].len();
                    scatter_tril_adjoint(&g, n, &mut aval[*raw]);
                    if !gt.is_empty() && !atan[*raw].is_empty() {
                        let rtbar = &mut atan[*raw];
                        let nn = n * n;
                        for d in 0..k {
                            scatter_tril_adjoint(
                                &gt[d * nn..(d + 1) * nn],
                                n,
                                &mut rtbar[d * rlen..(d + 1) * rlen],
                            );
                        }
                    }
                }
                Op::MatMulNt { a, b } => {
                    let (sa, sb) = (self.shapes[*a], self.shapes[*b]);
                    // Ā += Ȳ·B + Σ_d Ȳt_d·Bt_d ; Āt_d += Ȳt_d·B
                    backward_matmul_side(val, tan, aval, atan, k, *a, *b, &g, &gt, sa, sb, false);
                    // B̄ += Ȳᵀ·A + Σ_d Ȳt_dᵀ·At_d ; B̄t_d += Ȳt_dᵀ·A
                    backward_matmul_side(val, tan, aval, atan, k, *b, *a, &g, &gt, sb, sa, true);
                }
                Op::MatVec { m, x } => {
                    let sm = self.shapes[*m];
                    let (rows, cols) = (sm.rows, sm.cols);
                    let mv = &val[*m];
                    let mt = &tan[*m];
                    let xv = &val[*x];
                    let xt = &tan[*x];
                    {
                        let mbar = &mut aval[*m];
                        outer_acc(mbar, &g, xv);
                        if !gt.is_empty() && !xt.is_empty() {
                            for d in 0..k {
                                outer_acc(
                                    mbar,
                                    &gt[d * rows..(d + 1) * rows],
                                    &xt[d * cols..(d + 1) * cols],
                                );
                            }
                        }
                    }
                    if !gt.is_empty() && !atan[*m].is_empty() {
                        let mtbar = &mut atan[*m];
                        let mlen = rows * cols;
                        for d in 0..k {
                            outer_acc(
                                &mut mtbar[d * mlen..(d + 1) * mlen],
                                &gt[d * rows..(d + 1) * rows],
                                xv,
                            );
                        }
                    }
                    {
                        let xbar = &mut aval[*x];
                        for r in 0..rows {
                            axpy(xbar, g[r], &mv[r * cols..(r + 1) * cols]);
                        }
                        if !gt.is_empty() && !mt.is_empty() {
                            for d in 0..k {
                                let gtd = &gt[d * rows..(d + 1) * rows];
                                let mtd = &mt[d * rows * cols..(d + 1) * rows * cols];
                                for r in 0..rows {
                                    axpy(xbar, gtd[r], &mtd[r * cols..(r + 1) * cols]);
                                }
                            }
                        }
                    }
                    if !gt.is_empty() && !atan[*x].is_empty() {
                        let xtbar = &mut atan[*x];
                        for d in 0..k {
                            let gtd = &gt[d * rows..(d + 1) * rows];
                            for r in 0..rows {
                                axpy(
                                    &mut xtbar[d * cols..(d + 1) * cols],
                                    gtd[r],
                                    &mv[r * cols..(r + 1) * cols],
                                );
                            }
                        }
                    }
                }
                Op::SolveSpd { m, rhs } => {
                    let n = g.len();
                    // s = M⁻¹·ḡ using the stored factor (M is symmetric).
                    let mut s = g.clone();
                    chol_solve(&factor[i], n, &mut s);
                    axpy(&mut aval[*rhs], 1.0, &s);
                    let xv = &val[i];
                    let mbar = &mut aval[*m];
                    for r in 0..n {
                        axpy(&mut mbar[r * n..(r + 1) * n], -s[r], xv);
                    }
                }
                Op::GradFromTangents { s } => {
                    let stbar = &mut atan[*s];
                    for d in 0..k {
                        stbar[d] += g[d];
                    }
                }
                Op::ContractTangents { y, w } => {
                    let n = g.len();
                    let wv = &val[*w];
                    let yt = &tan[*y];
                    {
                        let ytbar = &mut atan[*y];
                        for d in 0..k {
                            axpy(&mut ytbar[d * n..(d + 1) * n], wv[d], &g);
                        }
                    }
                    {
                        let wbar = &mut aval[*w];
                        for d in 0..k {
                            wbar[d] += dot(&g, &yt[d * n..(d + 1) * n]);
                        }
                    }
                }
                Op::JacobianFromTangents { y } => {
                    let n = self.shapes[i].rows;
                    let ytbar = &mut atan[*y];
                    for j in 0..n {
                        for d in 0..k {
                            ytbar[d * n + j] += g[j * k + d];
                        }
                    }
                }
            }
            aval[i] = g;
            atan[i] = gt;
        }
    }
}

fn acc_linear(
    aval: &mut [Vec<f64>],
    atan: &mut [Vec<f64>],
    target: NodeId,
    g: &[f64],
    gt: &[f64],
    c: f64,
) {
    axpy(&mut aval[target], c, g);
    if !gt.is_empty() && !atan[target].is_empty() {
        axpy(&mut atan[target], c, gt);
    }
}

/// Product-rule adjoints of `target` in `target ∘ other`. Correct when both
/// operands are the same node (each call contributes one factor's share).
#[allow(clippy::too_many_arguments)]
fn backward_mul(
    val: &[Vec<f64>],
    tan: &[Vec<f64>],
    aval: &mut [Vec<f64>],
    atan: &mut [Vec<f64>],
    k: usize,
    target: NodeId,
    other: NodeId,
    g: &[f64],
    gt: &[f64],
) {
    let n = g.len();
    let ov = &val[other];
    let ot = &tan[other];
    {
        let tbar = &mut aval[target];
        for j in 0..n {
            tbar[j] += g[j] * ov[j];
        }
        if !gt.is_empty() && !ot.is_empty() {
            for d in 0..k {
                for j in 0..n {
                    tbar[j] += gt[d * n + j] * ot[d * n + j];
                }
            }
        }
    }
    if !gt.is_empty() && !atan[target].is_empty() {
        let ttbar = &mut atan[target];
        for d in 0..k {
            for j in 0..n {
                ttbar[d * n + j] += gt[d * n + j] * ov[j];
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn backward_dot(
    val: &[Vec<f64>],
    tan: &[Vec<f64>],
    aval: &mut [Vec<f64>],
    atan: &mut [Vec<f64>],
    k: usize,
    target: NodeId,
    other: NodeId,
    g: f64,
    gt: &[f64],
) {
    let ov = &val[other];
    let ot = &tan[other];
    let n = ov.len();
    {
        let tbar = &mut aval[target];
        axpy(tbar, g, ov);
        if !gt.is_empty() && !ot.is_empty() {
            for d in 0..k {
                axpy(tbar, gt[d], &ot[d * n..(d + 1) * n]);
            }
        }
    }
    if !gt.is_empty() && !atan[target].is_empty() {
        let ttbar = &mut atan[target];
        for d in 0..k {
            axpy(&mut ttbar[d * n..(d + 1) * n], gt[d], ov);
        }
    }
}

/// One side of the `Y = A·Bᵀ` adjoint. With `transpose_g == false` this adds
/// `Ȳ·other` blocks into `target`'s adjoints; with `true`, `Ȳᵀ·other`.
#[allow(clippy::too_many_arguments)]
fn backward_matmul_side(
    val: &[Vec<f64>],
    tan: &[Vec<f64>],
    aval: &mut [Vec<f64>],
    atan: &mut [Vec<f64>],
    k: usize,
    target: NodeId,
    other: NodeId,
    g: &[f64],
    gt: &[f64],
    st: Shape,
    so: Shape,
    transpose_g: bool,
) {
    let (yr, yc) = if transpose_g {
        (so.rows, st.rows)
    } else {
        (st.rows, so.rows)
    };
    let ov = &val[other];
    let ot = &tan[other];
    let olen = ov.len();
    {
        let tbar = &mut aval[target];
        acc_matmul_adj(tbar, g, yr, yc, ov, so.cols, transpose_g);
        if !gt.is_empty() && !ot.is_empty() {
            for d in 0..k {
                acc_matmul_adj(
                    tbar,
                    &gt[d * g.len()..(d + 1) * g.len()],
                    yr,
                    yc,
                    &ot[d * olen..(d + 1) * olen],
                    so.cols,
                    transpose_g,
                );
            }
        }
    }
    if !gt.is_empty() && !atan[target].is_empty() {
        let ttbar = &mut atan[target];
        let tlen = st.len();
        for d in 0..k {
            acc_matmul_adj(
                &mut ttbar[d * tlen..(d + 1) * tlen],
                &gt[d * g.len()..(d + 1) * g.len()],
                yr,
                yc,
                ov,
                so.cols,
                transpose_g,
            );
        }
    }
}

/// `tbar += Ȳ·O` (or `Ȳᵀ·O` when `transpose_g`), `Ȳ` row-major `(yr, yc)`,
/// `O` row-major with `ocols` columns.
fn acc_matmul_adj(
    tbar: &mut [f64],
    g: &[f64],
    yr: usize,
    yc: usize,
    other: &[f64],
    ocols: usize,
    transpose_g: bool,
) {
    if transpose_g {
        // tbar (yc × ocols) += Ȳᵀ·O, O is (yr × ocols)
        for r in 0..yr {
            for c in 0..yc {
                axpy(
                    &mut tbar[c * ocols..(c + 1) * ocols],
                    g[r * yc + c],
                    &other[r * ocols..(r + 1) * ocols],
                );
            }
        }
    } else {
        // tbar (yr × ocols) += Ȳ·O, O is (yc × ocols)
        for r in 0..yr {
            for c in 0..yc {
                axpy(
                    &mut tbar[r * ocols..(r + 1) * ocols],
                    g[r * yc + c],
                    &other[c * ocols..(c + 1) * ocols],
                );
            }
        }
    }
}

fn combine_tans(out: &mut [f64], at: &[f64], bt: &[f64], c: f64) {
    if at.is_empty() {
        out.fill(0.0);
    } else {
        out.copy_from_slice(at);
    }
    if !bt.is_empty() {
        axpy(out, c, bt);
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `y += W·x` for row-major `W` with `cols` columns.
fn matvec_acc(w: &[f64], cols: usize, x: &[f64], y: &mut [f64]) {
    for (r, yr) in y.iter_mut().enumerate() {
        *yr += dot(&w[r * cols..(r + 1) * cols], x);
    }
}

/// `W̄[r,:] += y[r]·x` — rank-one update, row-major friendly.
fn outer_acc(wbar: &mut [f64], y: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, &yr) in y.iter().enumerate() {
        axpy(&mut wbar[r * cols..(r + 1) * cols], yr, x);
    }
}

/// `out = A·Bᵀ`, A `(ra, ca)`, B `(rb, ca)`, out `(ra, rb)`.
fn matmul_nt(a: &[f64], ra: usize, ca: usize, b: &[f64], rb: usize, out: &mut [f64]) {
    for i in 0..ra {
        for j in 0..rb {
            out[i * rb + j] = dot(&a[i * ca..(i + 1) * ca], &b[j * ca..(j + 1) * ca]);
        }
    }
}

fn assemble_tril(raw: &[f64], n: usize, delta: f64, out: &mut [f64]) {
    out.fill(0.0);
    for i in 0..n {
        out[i * n + i] = raw[i] + delta;
    }
    let mut p = n;
    for i in 1..n {
        for j in 0..i {
            out[i * n + j] = raw[p];
            p += 1;
        }
    }
}

fn scatter_tril_adjoint(g: &[f64], n: usize, rbar: &mut [f64]) {
    for i in 0..n {
        rbar[i] += g[i * n + i];
    }
    let mut p = n;
    for i in 1..n {
        for j in 0..i {
            rbar[p] += g[i * n + j];
            p += 1;
        }
    }
}

/// In-place lower Cholesky factor of a row-major SPD matrix.
/// Fails with the pivot index when a pivot is not strictly positive.
pub(crate) fn cholesky_in_place(a: &mut [f64], n: usize) -> std::result::Result<(), usize> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for t in 0..j {
            d -= a[j * n + t] * a[j * n + t];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(j);
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for t in 0..j {
                s -= a[i * n + t] * a[j * n + t];
            }
            a[i * n + j] = s / d;
        }
        for t in (j + 1)..n {
            a[j * n + t] = 0.0;
        }
    }
    Ok(())
}

/// Solves `L·Lᵀ·x = b` in place given the lower factor `L`.
pub(crate) fn chol_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= l[i * n + j] * b[j];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in (i + 1)..n {
            s -= l[j * n + i] * b[j];
        }
        b[i] = s / l[i * n + i];
    }
}
