//! The ground-truth actuated double pendulum, transition sampling, and
//! dataset files.
//!
//! The simulated plant is a fully actuated double pendulum with relative
//! joint coordinates: `q = (0, 0)` hangs straight down (the potential
//! minimum) and `q = (π, 0)` is the upright configuration. Torques are
//! `τ = b∘u + η∘q̇`; the damping coefficients are stored signed (negative
//! values oppose motion), matching the force formula's `+ η∘q̇` term.

use std::io::{Read as _, Write as _};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dynamics::{
    rk4_step, DynModel, Dynamics, ForceModel, GeneralizedState, MassMatrixModel, PotentialModel,
    WbAffineIdx, WbMassIdx, WbPotentialIdx,
};
use crate::engine::{rng::stream_rng, ParamLayout, ParamVector};
use crate::{Error, Result};

/// Physical constants of the plant: masses (kg), rod lengths (m), gravity
/// (m/s²), control gains (N·m per unit input), and signed viscous damping
/// (N·m·s/rad).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoublePendulumParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub g: f64,
    pub b1: f64,
    pub b2: f64,
    pub eta1: f64,
    pub eta2: f64,
}

impl DoublePendulumParams {
    /// The values used throughout the experiments.
    pub fn nominal() -> Self {
        DoublePendulumParams {
            m1: 10.0,
            m2: 10.0,
            l1: 1.0,
            l2: 1.0,
            g: 10.0,
            b1: 1.0,
            b2: 1.0,
            eta1: -0.5,
            eta2: -0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m1 <= 0.0 || self.m2 <= 0.0 || self.l1 <= 0.0 || self.l2 <= 0.0 {
            return Err(Error::Config(
                "double pendulum masses and lengths must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Flat parameter vector in the canonical white-box order.
    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.m1, self.m2, self.l1, self.l2, self.g, self.b1, self.b2, self.eta1, self.eta2,
        ]
    }
}

/// Structure of the all-analytic double-pendulum model with its canonical
/// 9-slot layout (m₁, m₂, l₁, l₂, g, b₁, b₂, η₁, η₂).
pub fn white_box_structure() -> (DynModel, ParamLayout) {
    let mut layout = ParamLayout::new();
    let m1 = layout.push("wb.m1", 1);
    let m2 = layout.push("wb.m2", 1);
    let l1 = layout.push("wb.l1", 1);
    let l2 = layout.push("wb.l2", 1);
    let g = layout.push("wb.g", 1);
    let b = layout.push("wb.b", 2);
    let eta = layout.push("wb.eta", 2);
    let model = DynModel {
        n: 2,
        m: 2,
        mass: MassMatrixModel::WhiteBoxDoublePendulum(WbMassIdx { m1, m2, l1, l2 }),
        potential: PotentialModel::WhiteBoxDoublePendulum(WbPotentialIdx { m1, m2, l1, l2, g }),
        force: ForceModel::WhiteBoxAffine(WbAffineIdx { b, eta }),
    };
    (model, layout)
}

/// The ground-truth simulator: analytic mass matrix, potential, and
/// control-affine forces with the given physical parameters. The same
/// structure doubles as the all-white-box learnable model when its
/// parameter vector is handed to the trainer.
pub fn true_system(params: &DoublePendulumParams) -> Result<(DynModel, ParamVector)> {
    params.validate()?;
    let (model, layout) = white_box_structure();
    let mut pv = ParamVector::zeros(layout);
    pv.data.copy_from_slice(&params.to_vec());
    Ok((model, pv))
}

/// Planar end-effector position (meters), pivot at the origin, y up:
/// `(l₁ sin q₁ + l₂ sin(q₁+q₂), −l₁ cos q₁ − l₂ cos(q₁+q₂))`.
pub fn end_effector(params: &DoublePendulumParams, q: &[f64]) -> [f64; 2] {
    let q12 = q[0] + q[1];
    [
        params.l1 * q[0].sin() + params.l2 * q12.sin(),
        -params.l1 * q[0].cos() - params.l2 * q12.cos(),
    ]
}

/// How transition tuples were produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Iid,
    Trajectory,
}

/// Tuples `(q, q̇, u, q', q̇')` sharing one time step, stored row-flat with
/// stride `4n + m`.
#[derive(Clone, Debug)]
pub struct TransitionDataset {
    pub n: usize,
    pub m: usize,
    pub dt: f64,
    pub provenance: Provenance,
    data: Vec<f64>,
    count: usize,
}

impl TransitionDataset {
    pub fn new(n: usize, m: usize, dt: f64, provenance: Provenance) -> Self {
        TransitionDataset {
            n,
            m,
            dt,
            provenance,
            data: Vec::new(),
            count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn stride(&self) -> usize {
        4 * self.n + self.m
    }

    pub fn push(&mut self, q: &[f64], qdot: &[f64], u: &[f64], q2: &[f64], qdot2: &[f64]) {
        debug_assert_eq!(q.len(), self.n);
        debug_assert_eq!(u.len(), self.m);
        self.data.extend_from_slice(q);
        self.data.extend_from_slice(qdot);
        self.data.extend_from_slice(u);
        self.data.extend_from_slice(q2);
        self.data.extend_from_slice(qdot2);
        self.count += 1;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let s = self.stride();
        &self.data[i * s..(i + 1) * s]
    }

    pub fn q(&self, i: usize) -> &[f64] {
        &self.row(i)[..self.n]
    }
    pub fn qdot(&self, i: usize) -> &[f64] {
        &self.row(i)[self.n..2 * self.n]
    }
    pub fn u(&self, i: usize) -> &[f64] {
        &self.row(i)[2 * self.n..2 * self.n + self.m]
    }
    pub fn q_next(&self, i: usize) -> &[f64] {
        let o = 2 * self.n + self.m;
        &self.row(i)[o..o + self.n]
    }
    pub fn qdot_next(&self, i: usize) -> &[f64] {
        let o = 3 * self.n + self.m;
        &self.row(i)[o..o + self.n]
    }

    /// First `count` rows as a new dataset.
    pub fn take(&self, count: usize) -> TransitionDataset {
        assert!(count <= self.count);
        TransitionDataset {
            n: self.n,
            m: self.m,
            dt: self.dt,
            provenance: self.provenance,
            data: self.data[..count * self.stride()].to_vec(),
            count,
        }
    }

    /// Appends the consecutive transitions of a rolled-out trajectory.
    pub fn extend_from_trajectory(&mut self, states: &[GeneralizedState], controls: &[Vec<f64>]) {
        assert_eq!(states.len(), controls.len() + 1, "trajectory shape");
        for (i, u) in controls.iter().enumerate() {
            let (a, b) = (&states[i], &states[i + 1]);
            self.push(&a.q, &a.qdot, u, &b.q, &b.qdot);
        }
    }

    pub fn extend_from(&mut self, other: &TransitionDataset) {
        assert_eq!(self.stride(), other.stride(), "dataset stride");
        self.data.extend_from_slice(&other.data);
        self.count += other.count;
    }

    /// Writes the binary dataset file (magic `GBDS1`; header `N`, `M`, `Δt`,
    /// `count`; then rows of `2N+M+2N` little-endian f64).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(b"GBDS1")?;
        f.write_all(&(self.n as u32).to_le_bytes())?;
        f.write_all(&(self.m as u32).to_le_bytes())?;
        f.write_all(&self.dt.to_le_bytes())?;
        f.write_all(&(self.count as u64).to_le_bytes())?;
        for v in &self.data {
            f.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a dataset file; provenance is not stored and defaults to i.i.d.
    pub fn load(path: &Path) -> Result<TransitionDataset> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 5];
        f.read_exact(&mut magic)?;
        if &magic != b"GBDS1" {
            return Err(Error::Format(format!(
                "{}: not a GBDS1 dataset file",
                path.display()
            )));
        }
        let n = read_u32(&mut f)? as usize;
        let m = read_u32(&mut f)? as usize;
        let dt = read_f64(&mut f)?;
        let count = read_u64(&mut f)? as usize;
        let stride = 4 * n + m;
        let mut data = vec![0.0; count * stride];
        for v in data.iter_mut() {
            *v = read_f64(&mut f)?;
        }
        Ok(TransitionDataset {
            n,
            m,
            dt,
            provenance: Provenance::Iid,
            data,
            count,
        })
    }
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

pub(crate) fn read_f64(f: &mut impl std::io::Read) -> Result<f64> {
    let mut b = [0u8; 8];
    f.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// I.i.d. sampling protocol: `q ~ U(q_range)`, `q̇ ~ U(qdot_range)`,
/// `u ~ N(0, u_std²)`; successors via one RK4 step of the supplied system.
#[derive(Clone, Copy, Debug)]
pub struct SamplingSpec {
    pub q_range: (f64, f64),
    pub qdot_range: (f64, f64),
    pub u_std: f64,
    pub dt: f64,
    pub count: usize,
    pub seed: u64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec {
            q_range: (-std::f64::consts::PI, std::f64::consts::PI),
            qdot_range: (-10.0, 10.0),
            u_std: 120.0,
            dt: 0.01,
            count: 128,
            seed: 0,
        }
    }
}

impl SamplingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dt <= 0.0 {
            return Err(Error::Config("sampling Δt must be positive".into()));
        }
        if self.count == 0 {
            return Err(Error::Config("sampling count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Draws i.i.d. transitions from the given system. Each sample uses its own
/// PRNG stream derived from the seed, so results are independent of
/// evaluation order.
pub fn sample_transitions(
    sys: &dyn Dynamics,
    params: &[f64],
    spec: &SamplingSpec,
) -> Result<TransitionDataset> {
    spec.validate()?;
    let (n, m) = (sys.dof(), sys.input_dim());
    let mut step = crate::dynamics::CompiledStep::new(sys, spec.dt);
    step.load_params(params);
    let normal = Normal::new(0.0, spec.u_std).map_err(|e| Error::Config(e.to_string()))?;
    let mut ds = TransitionDataset::new(n, m, spec.dt, Provenance::Iid);
    let mut x = vec![0.0; 2 * n];
    for i in 0..spec.count {
        let mut rng = stream_rng(spec.seed, "sample", i as u64);
        for v in x[..n].iter_mut() {
            *v = rng.random_range(spec.q_range.0..spec.q_range.1);
        }
        for v in x[n..].iter_mut() {
            *v = rng.random_range(spec.qdot_range.0..spec.qdot_range.1);
        }
        let u: Vec<f64> = (0..m).map(|_| normal.sample(&mut rng)).collect();
        let x2 = step.step(&x, &u)?;
        ds.push(&x[..n], &x[n..], &u, &x2[..n], &x2[n..]);
    }
    Ok(ds)
}

/// One RK4 step of the true plant — convenience for tests and examples.
pub fn true_step(
    params: &DoublePendulumParams,
    state: &GeneralizedState,
    u: &[f64],
    dt: f64,
) -> Result<GeneralizedState> {
    let (model, pv) = true_system(params)?;
    rk4_step(&model, &pv.data, state, u, dt)
}
