//! Manipulator-equation assembly and integration.
//!
//! A dynamics model is three exchangeable components — mass matrix,
//! potential, generalized forces — each analytic or learned. Acceleration
//! comes from
//!
//! ```text
//!     M(q)·q̈ + C(q,q̇)·q̇ + ∇V(q) = F(q,q̇,u)
//! ```
//!
//! solved with a Cholesky factorization (never an explicit inverse). The
//! velocity-dependent term is evaluated as
//!
//! ```text
//!     C(q,q̇)·q̇ = ∇_q(M(q)·q̇)·q̇ − ∇_q(½·q̇ᵀM(q)q̇)
//! ```
//!
//! which costs one Jacobian instead of N³ partial derivatives and maps
//! directly onto the engine's tangent machinery. States are propagated with
//! classic RK4 under zero-order-hold inputs.
//!
//! Coordinates are never wrapped modulo 2π here: prediction losses compare
//! states in the unwrapped chart, and wrapping would cut discontinuities
//! into an otherwise smooth map.

use crate::engine::{Graph, GraphBuilder, Mlp, NodeId, Shape, Workspace};
use crate::{Error, Result};

/// Coordinates and velocities of an N-DOF system (radians, radians/second
/// for revolute joints).
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedState {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
}

impl GeneralizedState {
    pub fn new(q: Vec<f64>, qdot: Vec<f64>) -> Self {
        assert_eq!(q.len(), qdot.len(), "state: q and q̇ lengths differ");
        assert!(!q.is_empty(), "state: at least one coordinate");
        GeneralizedState { q, qdot }
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    /// Stacked `[q, q̇]`.
    pub fn stacked(&self) -> Vec<f64> {
        let mut x = self.q.clone();
        x.extend_from_slice(&self.qdot);
        x
    }

    pub fn from_stacked(x: &[f64]) -> Self {
        let n = x.len() / 2;
        GeneralizedState {
            q: x[..n].to_vec(),
            qdot: x[n..].to_vec(),
        }
    }
}

/// Parameter indices of the white-box scalars used by the analytic
/// double-pendulum mass matrix (offsets into the model's flat vector;
/// shared scalars are single parameters referenced from every component).
#[derive(Clone, Copy, Debug)]
pub struct WbMassIdx {
    pub m1: usize,
    pub m2: usize,
    pub l1: usize,
    pub l2: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct WbPotentialIdx {
    pub m1: usize,
    pub m2: usize,
    pub l1: usize,
    pub l2: usize,
    pub g: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct WbAffineIdx {
    /// Offset of the M diagonal control coefficients.
    pub b: usize,
    /// Offset of the N viscous damping coefficients.
    pub eta: usize,
}

/// Mass-matrix component: a network predicting a Cholesky factor, or the
/// analytic double-pendulum inertia with trainable physical parameters.
/// Either way `M(q) = L·Lᵀ (+ diagonal offset inside L)` stays symmetric
/// positive definite by construction.
#[derive(Clone, Debug)]
pub enum MassMatrixModel {
    LearnedCholesky {
        n: usize,
        net: Mlp,
        offset: usize,
        /// Constant added to the factor diagonal so freshly initialized
        /// models are already well conditioned.
        delta: f64,
    },
    WhiteBoxDoublePendulum(WbMassIdx),
}

#[derive(Clone, Debug)]
pub enum PotentialModel {
    LearnedScalar { net: Mlp, offset: usize },
    WhiteBoxDoublePendulum(WbPotentialIdx),
}

#[derive(Clone, Debug)]
pub enum ForceModel {
    /// Fully generic `F(q, q̇, u)` network, ℝ^{2N+M} → ℝ^N.
    GenericNn { net: Mlp, offset: usize },
    /// Control-affine with state-dependent damping:
    /// `F = B(q)·u + η(q)∘q̇`, both factors networks of q.
    ControlAffineNn {
        b_net: Mlp,
        b_offset: usize,
        eta_net: Mlp,
        eta_offset: usize,
    },
    /// Diagonal control matrix and constant viscous damping:
    /// `F = b∘u + η∘q̇` (requires M = N).
    WhiteBoxAffine(WbAffineIdx),
}

/// A complete structured dynamics model.
#[derive(Clone, Debug)]
pub struct DynModel {
    pub n: usize,
    pub m: usize,
    pub mass: MassMatrixModel,
    pub potential: PotentialModel,
    pub force: ForceModel,
}

/// Anything that can emit its generalized acceleration into a graph. The
/// structured model and the naive q̈-network both implement this, so RK4
/// stepping, rollouts, losses, and linearization are shared.
pub trait Dynamics {
    fn dof(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// Forward-mode directions the emitted graph needs (N for structured
    /// models, 0 for direct q̈ networks).
    fn tangent_dims(&self) -> usize;
    fn emit_qddot(&self, b: &mut GraphBuilder, q: NodeId, qdot: NodeId, u: NodeId) -> NodeId;
}

/// Revolute coordinates live on circles; learned components consume them
/// through `(sin q, cos q)` so the model is exactly periodic and trajectory
/// data that winds past ±π stays in-distribution.
pub fn emit_angle_embedding(b: &mut GraphBuilder, q: NodeId) -> NodeId {
    let s = b.sin(q);
    let c = b.cos(q);
    b.concat(&[s, c])
}

impl MassMatrixModel {
    pub fn dof(&self) -> usize {
        match self {
            MassMatrixModel::LearnedCholesky { n, .. } => *n,
            MassMatrixModel::WhiteBoxDoublePendulum(_) => 2,
        }
    }

    /// Emits M(q) as an `(n, n)` node from a seeded coordinate node.
    pub fn emit(&self, b: &mut GraphBuilder, q_seeded: NodeId) -> NodeId {
        match self {
            MassMatrixModel::LearnedCholesky {
                n,
                net,
                offset,
                delta,
            } => {
                let feat = emit_angle_embedding(b, q_seeded);
                let raw = net.emit(b, *offset, feat);
                let l = b.assemble_tril(raw, *n, *delta);
                b.matmul_nt(l, l)
            }
            MassMatrixModel::WhiteBoxDoublePendulum(idx) => {
                // I₁ = ⅓m₁l₁², I₂ = ⅓m₂l₂²,
                // I₁₁ = I₁ + I₂ + m₂l₁² + m₂l₁l₂·cos q₂,
                // I₁₂ = I₂ + ½m₂l₁l₂·cos q₂.
                let s = Shape::scalar();
                let m1 = b.param(idx.m1, s);
                let m2 = b.param(idx.m2, s);
                let l1 = b.param(idx.l1, s);
                let l2 = b.param(idx.l2, s);
                let q2 = b.slice(q_seeded, 1, 1);
                let c2 = b.cos(q2);
                let l1sq = b.mul(l1, l1);
                let l2sq = b.mul(l2, l2);
                let m1l1sq = b.mul(m1, l1sq);
                let i1 = b.scale(m1l1sq, 1.0 / 3.0);
                let m2l2sq = b.mul(m2, l2sq);
                let i2 = b.scale(m2l2sq, 1.0 / 3.0);
                let l1l2 = b.mul(l1, l2);
                let m2l1l2 = b.mul(m2, l1l2);
                let m2l1l2c = b.mul(m2l1l2, c2);
                let m2l1sq = b.mul(m2, l1sq);
                let i1_i2 = b.add(i1, i2);
                let t = b.add(m2l1sq, m2l1l2c);
                let i11 = b.add(i1_i2, t);
                let half = b.scale(m2l1l2c, 0.5);
                let i12 = b.add(i2, half);
                let flat = b.concat(&[i11, i12, i12, i2]);
                b.reshape(flat, 2, 2)
            }
        }
    }
}

impl PotentialModel {
    /// Emits V(q) as a scalar node from a seeded coordinate node.
    pub fn emit(&self, b: &mut GraphBuilder, q_seeded: NodeId) -> NodeId {
        match self {
            PotentialModel::LearnedScalar { net, offset } => {
                let feat = emit_angle_embedding(b, q_seeded);
                net.emit(b, *offset, feat)
            }
            PotentialModel::WhiteBoxDoublePendulum(idx) => {
                // V = −½·m₁·g·l₁·cos q₁ − m₂·g·(l₁·cos q₁ + ½·l₂·cos(q₁+q₂))
                let s = Shape::scalar();
                let m1 = b.param(idx.m1, s);
                let m2 = b.param(idx.m2, s);
                let l1 = b.param(idx.l1, s);
                let l2 = b.param(idx.l2, s);
                let g = b.param(idx.g, s);
                let q1 = b.slice(q_seeded, 0, 1);
                let q2 = b.slice(q_seeded, 1, 1);
                let q12 = b.add(q1, q2);
                let c1 = b.cos(q1);
                let c12 = b.cos(q12);
                let m1g = b.mul(m1, g);
                let l1c1 = b.mul(l1, c1);
                let t1_pos = b.mul(m1g, l1c1);
                let t1 = b.scale(t1_pos, -0.5);
                let l2c12 = b.mul(l2, c12);
                let half_l2c12 = b.scale(l2c12, 0.5);
                let inner = b.add(l1c1, half_l2c12);
                let m2g = b.mul(m2, g);
                let t2_pos = b.mul(m2g, inner);
                let t2 = b.neg(t2_pos);
                b.add(t1, t2)
            }
        }
    }
}

impl ForceModel {
    /// Emits F(q, q̇, u); takes the plain (unseeded) coordinate node since no
    /// input gradients of F appear in the dynamics.
    pub fn emit(&self, b: &mut GraphBuilder, q: NodeId, qdot: NodeId, u: NodeId) -> NodeId {
        match self {
            ForceModel::GenericNn { net, offset } => {
                let feat = emit_angle_embedding(b, q);
                let x = b.concat(&[feat, qdot, u]);
                net.emit(b, *offset, x)
            }
            ForceModel::ControlAffineNn {
                b_net,
                b_offset,
                eta_net,
                eta_offset,
            } => {
                let n = b.len(q);
                let m = b.len(u);
                let feat = emit_angle_embedding(b, q);
                let braw = b_net.emit(b, *b_offset, feat);
                let bmat = b.reshape(braw, n, m);
                let bu = b.matvec(bmat, u);
                let eta = eta_net.emit(b, *eta_offset, feat);
                let damp = b.mul(eta, qdot);
                b.add(bu, damp)
            }
            ForceModel::WhiteBoxAffine(idx) => {
                let n = b.len(q);
                let m = b.len(u);
                assert_eq!(n, m, "white-box affine force needs M = N");
                let bvec = b.param(idx.b, Shape::vector(m));
                let eta = b.param(idx.eta, Shape::vector(n));
                let bu = b.mul(bvec, u);
                let damp = b.mul(eta, qdot);
                b.add(bu, damp)
            }
        }
    }
}

impl DynModel {
    /// Emits the Coriolis product `C(q,q̇)·q̇` given an emitted mass matrix
    /// carrying q-tangents and a tangent-free velocity node.
    fn emit_coriolis(b: &mut GraphBuilder, mass: NodeId, qdot: NodeId) -> NodeId {
        let mqd = b.matvec(mass, qdot);
        let term1 = b.contract_tangents(mqd, qdot);
        let kinetic2 = b.dot(qdot, mqd);
        let kinetic = b.scale(kinetic2, 0.5);
        let term2 = b.grad_from_tangents(kinetic);
        b.sub(term1, term2)
    }
}

impl Dynamics for DynModel {
    fn dof(&self) -> usize {
        self.n
    }

    fn input_dim(&self) -> usize {
        self.m
    }

    fn tangent_dims(&self) -> usize {
        self.n
    }

    fn emit_qddot(&self, b: &mut GraphBuilder, q: NodeId, qdot: NodeId, u: NodeId) -> NodeId {
        let qs = b.seed(q);
        let mass = self.mass.emit(b, qs);
        let v = self.potential.emit(b, qs);
        let grad_v = b.grad_from_tangents(v);
        let cons = b.neg(grad_v); // conservative force G = −∇V
        let coriolis = Self::emit_coriolis(b, mass, qdot);
        let force = self.force.emit(b, q, qdot, u);
        let f_minus_c = b.sub(force, coriolis);
        // M·q̈ = F − C·q̇ − ∇V = F − C·q̇ + G
        let rhs = b.add(f_minus_c, cons);
        b.solve_spd(mass, rhs)
    }
}

/// Unit point masses with direct force inputs (`q̈ = u`); a minimal linear
/// system for exercising the integration and planning stack.
#[derive(Clone, Copy, Debug)]
pub struct DoubleIntegrator {
    pub dim: usize,
}

impl Dynamics for DoubleIntegrator {
    fn dof(&self) -> usize {
        self.dim
    }
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn tangent_dims(&self) -> usize {
        0
    }
    fn emit_qddot(&self, b: &mut GraphBuilder, _q: NodeId, _qdot: NodeId, u: NodeId) -> NodeId {
        b.scale(u, 1.0)
    }
}

/// Packs a raw factor vector of length n(n+1)/2 into a lower-triangular
/// matrix: first n entries plus `delta` on the diagonal, the remainder
/// filling the strict lower triangle row-major.
pub fn assemble_cholesky(raw: &[f64], n: usize, delta: f64) -> Result<Vec<f64>> {
    let want = n * (n + 1) / 2;
    if raw.len() != want {
        return Err(Error::shape(
            "assemble_cholesky raw vector",
            format!("{want}"),
            format!("{}", raw.len()),
        ));
    }
    let mut out = vec![0.0; n * n];
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
    Ok(out)
}

/// Compiled evaluation of `q̈(q, q̇, u)` for repeated calls.
pub struct CompiledDynamics {
    graph: Graph,
    ws: Workspace,
    qdd: NodeId,
    pub n: usize,
    pub m: usize,
}

impl CompiledDynamics {
    pub fn new(model: &dyn Dynamics) -> Self {
        let (n, m) = (model.dof(), model.input_dim());
        let mut b = GraphBuilder::new(model.tangent_dims());
        let q = b.input(n);
        let qd = b.input(n);
        let u = b.input(m);
        let qdd = model.emit_qddot(&mut b, q, qd, u);
        let graph = b.finish();
        let ws = graph.workspace();
        CompiledDynamics {
            graph,
            ws,
            qdd,
            n,
            m,
        }
    }

    pub fn load_params(&mut self, params: &[f64]) {
        self.graph.load_params(&mut self.ws, params);
    }

    /// Evaluates q̈; call `load_params` first.
    pub fn eval(&mut self, q: &[f64], qdot: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.graph.set_input(&mut self.ws, 0, q);
        self.graph.set_input(&mut self.ws, 1, qdot);
        self.graph.set_input(&mut self.ws, 2, u);
        self.graph.forward(&mut self.ws)?;
        Ok(self.graph.value(&self.ws, self.qdd).to_vec())
    }
}

/// Emits one RK4 step of `g([q,q̇], u) = [q̇, q̈]` with `u` held across stages:
/// `x' = x + (k₁ + 2k₂ + 2k₃ + k₄)/6`, `k_i = Δt·g(·)`.
pub fn emit_rk4_step(
    b: &mut GraphBuilder,
    model: &dyn Dynamics,
    x: NodeId,
    u: NodeId,
    dt: f64,
) -> NodeId {
    let n = model.dof();
    let eval = |b: &mut GraphBuilder, state: NodeId| -> NodeId {
        let q = b.slice(state, 0, n);
        let qd = b.slice(state, n, n);
        let qdd = model.emit_qddot(b, q, qd, u);
        let xdot = b.concat(&[qd, qdd]);
        b.scale(xdot, dt)
    };
    let k1 = eval(b, x);
    let x2 = b.add_scaled(x, k1, 0.5);
    let k2 = eval(b, x2);
    let x3 = b.add_scaled(x, k2, 0.5);
    let k3 = eval(b, x3);
    let x4 = b.add_scaled(x, k3, 1.0);
    let k4 = eval(b, x4);
    let outer = b.add(k1, k4);
    let inner = b.add(k2, k3);
    let sum = b.add_scaled(outer, inner, 2.0);
    b.add_scaled(x, sum, 1.0 / 6.0)
}

/// Compiled single RK4 step `x' = step(x, u)` with zero-order-hold input,
/// reusable across samples; also provides exact step Jacobians.
pub struct CompiledStep {
    pub graph: Graph,
    pub ws: Workspace,
    pub x_out: NodeId,
    x_in: NodeId,
    u_in: NodeId,
    pub n: usize,
    pub m: usize,
    pub dt: f64,
}

impl CompiledStep {
    pub fn new(model: &dyn Dynamics, dt: f64) -> Self {
        assert!(dt > 0.0, "rk4 step needs Δt > 0");
        let (n, m) = (model.dof(), model.input_dim());
        let mut b = GraphBuilder::new(model.tangent_dims());
        let x = b.input(2 * n);
        let u = b.input(m);
        let x_out = emit_rk4_step(&mut b, model, x, u, dt);
        let graph = b.finish();
        let ws = graph.workspace();
        CompiledStep {
            x_in: graph.input_node(0),
            u_in: graph.input_node(1),
            graph,
            ws,
            x_out,
            n,
            m,
            dt,
        }
    }

    pub fn load_params(&mut self, params: &[f64]) {
        self.graph.load_params(&mut self.ws, params);
    }

    pub fn step(&mut self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.graph.set_input(&mut self.ws, 0, x);
        self.graph.set_input(&mut self.ws, 1, u);
        self.graph.forward(&mut self.ws)?;
        Ok(self.graph.value(&self.ws, self.x_out).to_vec())
    }

    /// Exact Jacobians of the step map: `A = ∂x'/∂x` (2N×2N) and
    /// `B = ∂x'/∂u` (2N×M), row-major, one reverse sweep per output row.
    pub fn step_jacobians(&mut self, x: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.graph.set_input(&mut self.ws, 0, x);
        self.graph.set_input(&mut self.ws, 1, u);
        self.graph.forward(&mut self.ws)?;
        let dim = 2 * self.n;
        let mut a = vec![0.0; dim * dim];
        let mut bmat = vec![0.0; dim * self.m];
        let mut seed = vec![0.0; dim];
        for i in 0..dim {
            seed.fill(0.0);
            seed[i] = 1.0;
            self.graph.backward(&mut self.ws, self.x_out, &seed);
            a[i * dim..(i + 1) * dim].copy_from_slice(self.graph.adjoint(&self.ws, self.x_in));
            bmat[i * self.m..(i + 1) * self.m]
                .copy_from_slice(self.graph.adjoint(&self.ws, self.u_in));
        }
        Ok((a, bmat))
    }
}

/// One RK4 step as a standalone call.
pub fn rk4_step(
    model: &dyn Dynamics,
    params: &[f64],
    state: &GeneralizedState,
    u: &[f64],
    dt: f64,
) -> Result<GeneralizedState> {
    if dt <= 0.0 {
        return Err(Error::Config(format!("rk4 step needs Δt > 0, got {dt}")));
    }
    let mut step = CompiledStep::new(model, dt);
    step.load_params(params);
    let x = step.step(&state.stacked(), u)?;
    Ok(GeneralizedState::from_stacked(&x))
}

/// Iterated RK4 steps; the returned trajectory starts with `x0` and has
/// `controls.len() + 1` states. Step failures carry their index.
pub fn rollout(
    model: &dyn Dynamics,
    params: &[f64],
    x0: &GeneralizedState,
    controls: &[Vec<f64>],
    dt: f64,
) -> Result<Vec<GeneralizedState>> {
    if controls.is_empty() {
        return Err(Error::Config(
            "rollout needs a nonempty control sequence".into(),
        ));
    }
    let mut step = CompiledStep::new(model, dt);
    step.load_params(params);
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(x0.clone());
    let mut x = x0.stacked();
    for (i, u) in controls.iter().enumerate() {
        x = step.step(&x, u).map_err(|e| Error::RolloutStep {
            step: i,
            source: Box::new(e),
        })?;
        states.push(GeneralizedState::from_stacked(&x));
    }
    Ok(states)
}

impl DynModel {
    /// `M(q)`, row-major n×n.
    pub fn mass_matrix(&self, params: &[f64], q: &[f64]) -> Result<Vec<f64>> {
        let mut b = GraphBuilder::new(self.n);
        let qn = b.input(self.n);
        let qs = b.seed(qn);
        let m = self.mass.emit(&mut b, qs);
        let g = b.finish();
        let mut ws = g.workspace();
        g.load_params(&mut ws, params);
        g.set_input(&mut ws, 0, q);
        g.forward(&mut ws)?;
        Ok(g.value(&ws, m).to_vec())
    }

    /// Scalar potential energy V(q) in joules.
    pub fn potential(&self, params: &[f64], q: &[f64]) -> Result<f64> {
        let mut b = GraphBuilder::new(self.n);
        let qn = b.input(self.n);
        let qs = b.seed(qn);
        let v = self.potential.emit(&mut b, qs);
        let g = b.finish();
        let mut ws = g.workspace();
        g.load_params(&mut ws, params);
        g.set_input(&mut ws, 0, q);
        g.forward(&mut ws)?;
        Ok(g.value(&ws, v)[0])
    }

    /// Conservative generalized force `G(q) = −∇_q V(q)`.
    pub fn conservative_force(&self, params: &[f64], q: &[f64]) -> Result<Vec<f64>> {
        let mut b = GraphBuilder::new(self.n);
        let qn = b.input(self.n);
        let qs = b.seed(qn);
        let v = self.potential.emit(&mut b, qs);
        let gv = b.grad_from_tangents(v);
        let cons = b.neg(gv);
        let g = b.finish();
        let mut ws = g.workspace();
        g.load_params(&mut ws, params);
        g.set_input(&mut ws, 0, q);
        g.forward(&mut ws)?;
        Ok(g.value(&ws, cons).to_vec())
    }

    /// `C(q,q̇)·q̇` via the Jacobian identity (one ∇_q(M·q̇) evaluation).
    pub fn coriolis_times_qdot(
        &self,
        params: &[f64],
        q: &[f64],
        qdot: &[f64],
    ) -> Result<Vec<f64>> {
        let mut b = GraphBuilder::new(self.n);
        let qn = b.input(self.n);
        let qd = b.input(self.n);
        let qs = b.seed(qn);
        let m = self.mass.emit(&mut b, qs);
        let c = Self::emit_coriolis(&mut b, m, qd);
        let g = b.finish();
        let mut ws = g.workspace();
        g.load_params(&mut ws, params);
        g.set_input(&mut ws, 0, q);
        g.set_input(&mut ws, 1, qdot);
        g.forward(&mut ws)?;
        Ok(g.value(&ws, c).to_vec())
    }

    /// Generalized acceleration from the manipulator equation.
    pub fn forward_dynamics(
        &self,
        params: &[f64],
        q: &[f64],
        qdot: &[f64],
        u: &[f64],
    ) -> Result<Vec<f64>> {
        if u.len() != self.m {
            return Err(Error::shape(
                "forward_dynamics input u",
                format!("{}", self.m),
                format!("{}", u.len()),
            ));
        }
        let mut cd = CompiledDynamics::new(self);
        cd.load_params(params);
        cd.eval(q, qdot, u)
    }

    /// Total mechanical energy `T + V = ½·q̇ᵀM(q)q̇ + V(q)`.
    pub fn energy(&self, params: &[f64], state: &GeneralizedState) -> Result<f64> {
        let m = self.mass_matrix(params, &state.q)?;
        let n = self.n;
        let mut t = 0.0;
        for i in 0..n {
            for j in 0..n {
                t += 0.5 * state.qdot[i] * m[i * n + j] * state.qdot[j];
            }
        }
        Ok(t + self.potential(params, &state.q)?)
    }
}

/// A batch of `(q, q̇, u)` points with target accelerations, stored row-flat
/// with stride `3n + m`: q, q̇, u, q̈_target.
pub struct AccelBatch {
    pub n: usize,
    pub m: usize,
    pub rows: Vec<f64>,
    pub count: usize,
}

impl AccelBatch {
    pub fn stride(&self) -> usize {
        3 * self.n + self.m
    }
}

/// Mean squared error between model accelerations and batch targets.
/// Diagnostic only; training uses the prediction loss.
pub fn accel_loss(model: &dyn Dynamics, params: &[f64], batch: &AccelBatch) -> Result<f64> {
    let (graph, loss_node) = accel_loss_graph(model);
    let mut ws = graph.workspace();
    graph.load_params(&mut ws, params);
    let stride = batch.stride();
    let (n, m) = (batch.n, batch.m);
    let mut total = 0.0;
    for r in 0..batch.count {
        let row = &batch.rows[r * stride..(r + 1) * stride];
        graph.set_input(&mut ws, 0, &row[..n]);
        graph.set_input(&mut ws, 1, &row[n..2 * n]);
        graph.set_input(&mut ws, 2, &row[2 * n..2 * n + m]);
        graph.set_input(&mut ws, 3, &row[2 * n + m..]);
        graph.forward(&mut ws)?;
        total += graph.value(&ws, loss_node)[0];
    }
    Ok(total / batch.count as f64)
}

/// [`accel_loss`] together with its exact parameter gradient.
pub fn accel_loss_grad(
    model: &dyn Dynamics,
    params: &[f64],
    batch: &AccelBatch,
) -> Result<(f64, Vec<f64>)> {
    let (graph, loss_node) = accel_loss_graph(model);
    let mut ws = graph.workspace();
    graph.load_params(&mut ws, params);
    let stride = batch.stride();
    let (n, m) = (batch.n, batch.m);
    let mut total = 0.0;
    let mut grad = vec![0.0; params.len()];
    for r in 0..batch.count {
        let row = &batch.rows[r * stride..(r + 1) * stride];
        graph.set_input(&mut ws, 0, &row[..n]);
        graph.set_input(&mut ws, 1, &row[n..2 * n]);
        graph.set_input(&mut ws, 2, &row[2 * n..2 * n + m]);
        graph.set_input(&mut ws, 3, &row[2 * n + m..]);
        graph.forward(&mut ws)?;
        total += graph.value(&ws, loss_node)[0];
        graph.backward(&mut ws, loss_node, &[1.0]);
        graph.accumulate_param_grad(&ws, &mut grad);
    }
    let inv = 1.0 / batch.count as f64;
    for g in grad.iter_mut() {
        *g *= inv;
    }
    Ok((total * inv, grad))
}

fn accel_loss_graph(model: &dyn Dynamics) -> (Graph, NodeId) {
    let (n, m) = (model.dof(), model.input_dim());
    let mut b = GraphBuilder::new(model.tangent_dims());
    let q = b.input(n);
    let qd = b.input(n);
    let u = b.input(m);
    let target = b.input(n);
    let qdd = model.emit_qddot(&mut b, q, qd, u);
    let d = b.sub(qdd, target);
    let loss = b.dot(d, d);
    (b.finish(), loss)
}

/// Builds an acceleration batch from transition tuples with finite-difference
/// velocity targets `q̈ ≈ (q̇' − q̇)/Δt`.
pub fn accel_batch_from_transitions(ds: &crate::systems::TransitionDataset) -> AccelBatch {
    let (n, m) = (ds.n, ds.m);
    let mut rows = Vec::with_capacity(ds.len() * (3 * n + m));
    for i in 0..ds.len() {
        rows.extend_from_slice(ds.q(i));
        rows.extend_from_slice(ds.qdot(i));
        rows.extend_from_slice(ds.u(i));
        for c in 0..n {
            rows.push((ds.qdot_next(i)[c] - ds.qdot(i)[c]) / ds.dt);
        }
    }
    AccelBatch {
        n,
        m,
        rows,
        count: ds.len(),
    }
}
