//! Model construction: the full white-box/learned component lattice plus the
//! naive direct-acceleration baseline, and checkpoint (de)serialization.
//!
//! Network inputs are scaled by fixed constants matched to the sampling
//! ranges (radians ~ π, velocities ~ 10, inputs ~ 120) so tanh layers start
//! in their responsive range, and outputs are scaled to the physical
//! magnitude of the quantity they model. Both sets of constants are part of
//! a model's structure and are stored in its checkpoint.

use std::io::{Read as _, Write as _};
use std::path::Path;

use rand::Rng;

use crate::dynamics::{
    DynModel, Dynamics, ForceModel, GeneralizedState, MassMatrixModel, PotentialModel,
    WbAffineIdx, WbMassIdx, WbPotentialIdx,
};
use crate::engine::{rng::stream_rng, GraphBuilder, Mlp, NodeId, ParamLayout, ParamVector};
use crate::systems::read_f64;
use crate::{Error, Result};

/// Which function class each component uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MassPrm {
    WhiteBox,
    Learned,
}
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotentialPrm {
    WhiteBox,
    Learned,
}
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForcePrm {
    WhiteBox,
    ControlAffine,
    Generic,
}

/// Model names, ordered by decreasing prior knowledge. Letters name the
/// components that are *learned*: M (mass), V (potential), B (control-affine
/// force nets), F (generic force net); `WB` is all-analytic and `Naive`
/// predicts q̈ directly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    WB,
    B,
    F,
    V,
    M,
    MB,
    VB,
    MV,
    MVB,
    MVF,
    Naive,
}

impl ModelKind {
    pub const ALL: [ModelKind; 11] = [
        ModelKind::WB,
        ModelKind::B,
        ModelKind::F,
        ModelKind::V,
        ModelKind::M,
        ModelKind::MB,
        ModelKind::VB,
        ModelKind::MV,
        ModelKind::MVB,
        ModelKind::MVF,
        ModelKind::Naive,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::WB => "W-B",
            ModelKind::B => "B",
            ModelKind::F => "F",
            ModelKind::V => "V",
            ModelKind::M => "M",
            ModelKind::MB => "MB",
            ModelKind::VB => "VB",
            ModelKind::MV => "MV",
            ModelKind::MVB => "MVB",
            ModelKind::MVF => "MVF",
            ModelKind::Naive => "Naive",
        }
    }

    pub fn parse(s: &str) -> Result<ModelKind> {
        let up = s.trim().to_ascii_uppercase();
        let kind = match up.as_str() {
            "W-B" | "WB" => ModelKind::WB,
            "B" => ModelKind::B,
            "F" => ModelKind::F,
            "V" => ModelKind::V,
            "M" => ModelKind::M,
            "MB" => ModelKind::MB,
            "VB" => ModelKind::VB,
            "MV" => ModelKind::MV,
            "MVB" => ModelKind::MVB,
            "MVF" => ModelKind::MVF,
            "NAIVE" | "NAIVENN" => ModelKind::Naive,
            _ => return Err(Error::Config(format!("unknown model name: {s}"))),
        };
        Ok(kind)
    }

    /// Component classes for this name; `None` for the naive baseline.
    pub fn components(&self) -> Option<(MassPrm, PotentialPrm, ForcePrm)> {
        use ForcePrm as F;
        use MassPrm as M;
        use PotentialPrm as V;
        let c = match self {
            ModelKind::WB => (M::WhiteBox, V::WhiteBox, F::WhiteBox),
            ModelKind::B => (M::WhiteBox, V::WhiteBox, F::ControlAffine),
            ModelKind::F => (M::WhiteBox, V::WhiteBox, F::Generic),
            ModelKind::V => (M::WhiteBox, V::Learned, F::WhiteBox),
            ModelKind::M => (M::Learned, V::WhiteBox, F::WhiteBox),
            ModelKind::MB => (M::Learned, V::WhiteBox, F::ControlAffine),
            ModelKind::VB => (M::WhiteBox, V::Learned, F::ControlAffine),
            ModelKind::MV => (M::Learned, V::Learned, F::WhiteBox),
            ModelKind::MVB => (M::Learned, V::Learned, F::ControlAffine),
            ModelKind::MVF => (M::Learned, V::Learned, F::Generic),
            ModelKind::Naive => return None,
        };
        Some(c)
    }

    fn code(&self) -> u8 {
        ModelKind::ALL.iter().position(|k| k == self).unwrap() as u8
    }

    fn from_code(c: u8) -> Result<ModelKind> {
        ModelKind::ALL
            .get(c as usize)
            .copied()
            .ok_or_else(|| Error::Format(format!("unknown model code {c}")))
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Fixed input/output scaling constants baked into the networks. Angles
/// enter every network as (sin, cos) pairs and need no scaling; velocities
/// and inputs are divided down to tanh's responsive range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetScales {
    pub qdot: f64,
    pub u: f64,
    pub mass_out: f64,
    pub potential_out: f64,
    pub force_out: f64,
    pub b_out: f64,
    pub eta_out: f64,
    pub naive_out: f64,
}

impl Default for NetScales {
    fn default() -> Self {
        NetScales {
            qdot: 0.1,
            u: 1.0 / 120.0,
            mass_out: 5.0,
            potential_out: 100.0,
            force_out: 120.0,
            b_out: 1.0,
            eta_out: 1.0,
            naive_out: 150.0,
        }
    }
}

impl NetScales {
    fn to_vec(self) -> [f64; 8] {
        [
            self.qdot,
            self.u,
            self.mass_out,
            self.potential_out,
            self.force_out,
            self.b_out,
            self.eta_out,
            self.naive_out,
        ]
    }

    fn from_vec(v: [f64; 8]) -> Self {
        NetScales {
            qdot: v[0],
            u: v[1],
            mass_out: v[2],
            potential_out: v[3],
            force_out: v[4],
            b_out: v[5],
            eta_out: v[6],
            naive_out: v[7],
        }
    }
}

/// Declarative model description: name, dimensions, hidden widths, Cholesky
/// diagonal offset, and the init seed.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n: usize,
    pub m: usize,
    /// Hidden widths for learned components.
    pub hidden: Vec<usize>,
    /// Hidden widths for the naive q̈ network.
    pub naive_hidden: Vec<usize>,
    pub delta: f64,
    pub seed: u64,
    pub scales: NetScales,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        ModelSpec {
            kind,
            n: 2,
            m: 2,
            hidden: vec![32, 32, 32],
            naive_hidden: vec![64, 64, 64],
            delta: 1.0,
            seed,
            scales: NetScales::default(),
        }
    }
}

/// Direct-acceleration baseline: `q̈ = NN(q, q̇, u)` with the same angle
/// embedding as the structured force network.
#[derive(Clone, Debug)]
pub struct NaiveModel {
    pub n: usize,
    pub m: usize,
    pub net: Mlp,
    pub offset: usize,
}

impl Dynamics for NaiveModel {
    fn dof(&self) -> usize {
        self.n
    }
    fn input_dim(&self) -> usize {
        self.m
    }
    fn tangent_dims(&self) -> usize {
        0
    }
    fn emit_qddot(&self, b: &mut GraphBuilder, q: NodeId, qdot: NodeId, u: NodeId) -> NodeId {
        let feat = crate::dynamics::emit_angle_embedding(b, q);
        let x = b.concat(&[feat, qdot, u]);
        self.net.emit(b, self.offset, x)
    }
}

/// Direct evaluation of the naive network as an acceleration.
pub fn naive_forward_dynamics(
    model: &NaiveModel,
    params: &[f64],
    q: &[f64],
    qdot: &[f64],
    u: &[f64],
) -> Result<Vec<f64>> {
    let mut x = Vec::with_capacity(3 * model.n + model.m);
    x.extend(q.iter().map(|v| v.sin()));
    x.extend(q.iter().map(|v| v.cos()));
    x.extend_from_slice(qdot);
    x.extend_from_slice(u);
    model.net.forward(&params[model.offset..], &x)
}

#[derive(Clone, Debug)]
pub enum Arch {
    Structured(DynModel),
    Naive(NaiveModel),
}

/// A built model: description, architecture, and flat parameters.
#[derive(Clone, Debug)]
pub struct Model {
    pub spec: ModelSpec,
    pub arch: Arch,
    pub params: ParamVector,
}

impl Model {
    pub fn dynamics(&self) -> &dyn Dynamics {
        match &self.arch {
            Arch::Structured(d) => d,
            Arch::Naive(nv) => nv,
        }
    }

    pub fn structured(&self) -> Option<&DynModel> {
        match &self.arch {
            Arch::Structured(d) => Some(d),
            Arch::Naive(_) => None,
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }
}

/// Input scale for nets fed (sin q, cos q, q̇, u): the trigonometric block
/// is already unit-ranged.
fn input_scale_state_input(spec: &ModelSpec) -> Vec<f64> {
    let mut s = vec![1.0; 2 * spec.n];
    s.extend(std::iter::repeat(spec.scales.qdot).take(spec.n));
    s.extend(std::iter::repeat(spec.scales.u).take(spec.m));
    s
}

/// Builds the model's structure and layout without initializing parameters.
fn build_structure(spec: &ModelSpec) -> Result<(Arch, ParamLayout)> {
    let (n, m) = (spec.n, spec.m);
    let mut layout = ParamLayout::new();

    if spec.kind == ModelKind::Naive {
        let mut widths = vec![3 * n + m];
        widths.extend_from_slice(&spec.naive_hidden);
        widths.push(n);
        let net = Mlp::new(widths)
            .with_input_scale(input_scale_state_input(spec))
            .with_output_scale(spec.scales.naive_out);
        let offset = layout.push("net.naive", net.param_count());
        return Ok((
            Arch::Naive(NaiveModel { n, m, net, offset }),
            layout,
        ));
    }

    let (mass_prm, pot_prm, force_prm) = spec.kind.components().unwrap();
    if (mass_prm == MassPrm::WhiteBox
        || pot_prm == PotentialPrm::WhiteBox
        || force_prm == ForcePrm::WhiteBox)
        && (n != 2 || m != 2)
    {
        return Err(Error::Config(format!(
            "white-box components model the 2-DOF double pendulum; got N={n}, M={m}"
        )));
    }

    // Shared white-box scalars, allocated once in canonical order.
    let needs_ml = mass_prm == MassPrm::WhiteBox || pot_prm == PotentialPrm::WhiteBox;
    let (mut m1, mut m2, mut l1, mut l2, mut g) = (0, 0, 0, 0, 0);
    if needs_ml {
        m1 = layout.push("wb.m1", 1);
        m2 = layout.push("wb.m2", 1);
        l1 = layout.push("wb.l1", 1);
        l2 = layout.push("wb.l2", 1);
    }
    if pot_prm == PotentialPrm::WhiteBox {
        g = layout.push("wb.g", 1);
    }
    let wb_force = if force_prm == ForcePrm::WhiteBox {
        let b = layout.push("wb.b", m);
        let eta = layout.push("wb.eta", n);
        Some(WbAffineIdx { b, eta })
    } else {
        None
    };

    let mass = match mass_prm {
        MassPrm::WhiteBox => MassMatrixModel::WhiteBoxDoublePendulum(WbMassIdx { m1, m2, l1, l2 }),
        MassPrm::Learned => {
            let mut widths = vec![2 * n];
            widths.extend_from_slice(&spec.hidden);
            widths.push(n * (n + 1) / 2);
            let net = Mlp::new(widths).with_output_scale(spec.scales.mass_out);
            let offset = layout.push("net.mass", net.param_count());
            MassMatrixModel::LearnedCholesky {
                n,
                net,
                offset,
                delta: spec.delta,
            }
        }
    };

    let potential = match pot_prm {
        PotentialPrm::WhiteBox => {
            PotentialModel::WhiteBoxDoublePendulum(WbPotentialIdx { m1, m2, l1, l2, g })
        }
        PotentialPrm::Learned => {
            let mut widths = vec![2 * n];
            widths.extend_from_slice(&spec.hidden);
            widths.push(1);
            let net = Mlp::new(widths).with_output_scale(spec.scales.potential_out);
            let offset = layout.push("net.potential", net.param_count());
            PotentialModel::LearnedScalar { net, offset }
        }
    };

    let force = match force_prm {
        ForcePrm::WhiteBox => ForceModel::WhiteBoxAffine(wb_force.unwrap()),
        ForcePrm::ControlAffine => {
            let mut bw = vec![2 * n];
            bw.extend_from_slice(&spec.hidden);
            bw.push(n * m);
            let b_net = Mlp::new(bw).with_output_scale(spec.scales.b_out);
            let b_offset = layout.push("net.force_b", b_net.param_count());
            let mut ew = vec![2 * n];
            ew.extend_from_slice(&spec.hidden);
            ew.push(n);
            let eta_net = Mlp::new(ew).with_output_scale(spec.scales.eta_out);
            let eta_offset = layout.push("net.force_eta", eta_net.param_count());
            ForceModel::ControlAffineNn {
                b_net,
                b_offset,
                eta_net,
                eta_offset,
            }
        }
        ForcePrm::Generic => {
            let mut widths = vec![3 * n + m];
            widths.extend_from_slice(&spec.hidden);
            widths.push(n);
            let net = Mlp::new(widths)
                .with_input_scale(input_scale_state_input(spec))
                .with_output_scale(spec.scales.force_out);
            let offset = layout.push("net.force", net.param_count());
            ForceModel::GenericNn { net, offset }
        }
    };

    Ok((
        Arch::Structured(DynModel {
            n,
            m,
            mass,
            potential,
            force,
        }),
        layout,
    ))
}

/// Builds a model with seeded initialization: network weights uniform in
/// ±√(1/fan_in) with zero biases; white-box scalars uniform in (0.5, 2.0) —
/// away from the true values but inside the physically valid region.
pub fn build(spec: &ModelSpec) -> Result<Model> {
    let (arch, layout) = build_structure(spec)?;
    let mut params = ParamVector::zeros(layout);
    let mut wb_rng = stream_rng(spec.seed, "init-wb", 0);
    let mut net_idx = 0u64;
    for seg in params.layout.segments().to_vec() {
        if seg.name.starts_with("wb.") {
            for v in params.data[seg.offset..seg.offset + seg.len].iter_mut() {
                *v = wb_rng.random_range(0.5..2.0);
            }
        } else {
            let net = match (&arch, seg.name.as_str()) {
                (Arch::Naive(nv), "net.naive") => &nv.net,
                (Arch::Structured(d), name) => match (name, &d.mass, &d.potential, &d.force) {
                    ("net.mass", MassMatrixModel::LearnedCholesky { net, .. }, _, _) => net,
                    ("net.potential", _, PotentialModel::LearnedScalar { net, .. }, _) => net,
                    ("net.force", _, _, ForceModel::GenericNn { net, .. }) => net,
                    ("net.force_b", _, _, ForceModel::ControlAffineNn { b_net, .. }) => b_net,
                    ("net.force_eta", _, _, ForceModel::ControlAffineNn { eta_net, .. }) => {
                        eta_net
                    }
                    _ => unreachable!("unknown segment {name}"),
                },
                _ => unreachable!("unknown segment {}", seg.name),
            };
            let mut rng = stream_rng(spec.seed, "init-net", net_idx);
            net_idx += 1;
            let init = net.init_params(&mut rng);
            params.data[seg.offset..seg.offset + seg.len].copy_from_slice(&init);
        }
    }
    Ok(Model {
        spec: spec.clone(),
        arch,
        params,
    })
}

/// Wraps an analytic double-pendulum system as a `W-B` model with the given
/// parameter values (e.g. the true plant).
pub fn white_box_with_params(params: &crate::systems::DoublePendulumParams) -> Result<Model> {
    let (_, pv) = crate::systems::true_system(params)?;
    let spec = ModelSpec::new(ModelKind::WB, 0);
    let (arch, layout) = build_structure(&spec)?;
    debug_assert_eq!(layout.len(), pv.len());
    Ok(Model {
        spec,
        arch,
        params: pv,
    })
}

const CHECKPOINT_MAGIC: &[u8; 6] = b"GBDYN1";

impl Model {
    /// Writes a versioned checkpoint: magic `GBDYN1`, structure descriptor,
    /// then the flat parameters as little-endian f64.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(CHECKPOINT_MAGIC)?;
        f.write_all(&[self.spec.kind.code()])?;
        f.write_all(&(self.spec.n as u32).to_le_bytes())?;
        f.write_all(&(self.spec.m as u32).to_le_bytes())?;
        f.write_all(&self.spec.delta.to_le_bytes())?;
        f.write_all(&self.spec.seed.to_le_bytes())?;
        write_widths(&mut f, &self.spec.hidden)?;
        write_widths(&mut f, &self.spec.naive_hidden)?;
        for v in self.spec.scales.to_vec() {
            f.write_all(&v.to_le_bytes())?;
        }
        f.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for v in &self.params.data {
            f.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a checkpoint back into an identical model: same structure,
    /// bit-identical parameters.
    pub fn load(path: &Path) -> Result<Model> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 6];
        f.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format(format!(
                "{}: not a GBDYN1 checkpoint",
                path.display()
            )));
        }
        let mut kind_b = [0u8; 1];
        f.read_exact(&mut kind_b)?;
        let kind = ModelKind::from_code(kind_b[0])?;
        let n = read_u32(&mut f)? as usize;
        let m = read_u32(&mut f)? as usize;
        let delta = read_f64(&mut f)?;
        let seed = read_u64(&mut f)?;
        let hidden = read_widths(&mut f)?;
        let naive_hidden = read_widths(&mut f)?;
        let mut sc = [0.0; 8];
        for v in sc.iter_mut() {
            *v = read_f64(&mut f)?;
        }
        let spec = ModelSpec {
            kind,
            n,
            m,
            hidden,
            naive_hidden,
            delta,
            seed,
            scales: NetScales::from_vec(sc),
        };
        let count = read_u64(&mut f)? as usize;
        let (arch, layout) = build_structure(&spec)?;
        if layout.len() != count {
            return Err(Error::Format(format!(
                "checkpoint parameter count {count} does not match structure ({})",
                layout.len()
            )));
        }
        let mut params = ParamVector::zeros(layout);
        for v in params.data.iter_mut() {
            *v = read_f64(&mut f)?;
        }
        Ok(Model { spec, arch, params })
    }
}

fn write_widths(f: &mut impl std::io::Write, widths: &[usize]) -> Result<()> {
    f.write_all(&(widths.len() as u32).to_le_bytes())?;
    for &w in widths {
        f.write_all(&(w as u32).to_le_bytes())?;
    }
    Ok(())
}

fn read_widths(f: &mut impl std::io::Read) -> Result<Vec<usize>> {
    let len = read_u32(f)? as usize;
    if len > 64 {
        return Err(Error::Format(format!("implausible layer count {len}")));
    }
    (0..len).map(|_| Ok(read_u32(f)? as usize)).collect()
}

fn read_u32(f: &mut impl std::io::Read) -> Result<u32> {
    let mut b = [0u8; 4];
    f.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(f: &mut impl std::io::Read) -> Result<u64> {
    let mut b = [0u8; 8];
    f.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Convenience: one RK4 step of a built model.
pub fn model_step(
    model: &Model,
    state: &GeneralizedState,
    u: &[f64],
    dt: f64,
) -> Result<GeneralizedState> {
    crate::dynamics::rk4_step(model.dynamics(), &model.params.data, state, u, dt)
}
