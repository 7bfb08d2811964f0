//! Prediction-loss training and the data-efficiency doubling protocol.
//!
//! The loss compares one-step RK4 predictions against observed successors:
//!
//! ```text
//!     L(θ) = (1/K) Σ_k ‖q'_k − q̂'_k(θ)‖² + λ·‖q̇'_k − q̂̇'_k(θ)‖²
//! ```
//!
//! No acceleration targets are needed — finite-differencing q̈ out of data
//! amplifies sensor noise, and one-step prediction error is the quantity the
//! models are ultimately used for. The weight λ defaults to 0.1: under the
//! sampling protocol the velocity error dominates the position error by
//! roughly the inverse time step, and λ = 0.1 keeps both terms relevant.
//! All thresholds quoted against this loss are defined under that λ.

pub use crate::systems::TransitionDataset;

use crate::dynamics::{emit_rk4_step, Dynamics};
use crate::engine::{rng::stream_rng, AdamState, Graph, GraphBuilder, NodeId, Workspace};
use crate::modelzoo::{build, Model, ModelKind, ModelSpec};
use crate::systems::{sample_transitions, SamplingSpec};
use crate::{Error, Result};

/// Velocity-loss weight used throughout unless overridden.
pub const DEFAULT_LAMBDA: f64 = 0.1;

/// Training hyperparameters.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    /// Velocity-term weight in the prediction loss (λ ≥ 0).
    pub lambda: f64,
    /// Adam learning rate for network weights.
    pub lr: f64,
    /// Learning rate for white-box physical scalars, which live on an O(10)
    /// scale and would crawl at network rates.
    pub wb_lr: f64,
    /// Full-batch below this size, shuffled mini-batches above it.
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Early stop once validation loss reaches this value (checked every
    /// `val_check_every` epochs when a validation set is supplied).
    pub val_threshold: Option<f64>,
    pub val_check_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: DEFAULT_LAMBDA,
            lr: 1e-3,
            wb_lr: 2e-2,
            batch_size: 1024,
            epochs: 5000,
            seed: 0,
            val_threshold: None,
            val_check_every: 250,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(Error::Config("λ must be nonnegative".into()));
        }
        if self.lr <= 0.0 || self.wb_lr <= 0.0 {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Compiled per-sample prediction loss, reusable across samples and epochs.
pub struct CompiledLoss {
    graph: Graph,
    ws: Workspace,
    loss: NodeId,
    n: usize,
    m: usize,
}

impl CompiledLoss {
    pub fn new(model: &dyn Dynamics, dt: f64, lambda: f64) -> Self {
        let (n, m) = (model.dof(), model.input_dim());
        let mut b = GraphBuilder::new(model.tangent_dims());
        let x = b.input(2 * n);
        let u = b.input(m);
        let q_t = b.input(n);
        let qd_t = b.input(n);
        let xp = emit_rk4_step(&mut b, model, x, u, dt);
        let qp = b.slice(xp, 0, n);
        let qdp = b.slice(xp, n, n);
        let dq = b.sub(qp, q_t);
        let dqd = b.sub(qdp, qd_t);
        let pos = b.dot(dq, dq);
        let vel = b.dot(dqd, dqd);
        let loss = b.add_scaled(pos, vel, lambda);
        let graph = b.finish();
        let ws = graph.workspace();
        CompiledLoss {
            graph,
            ws,
            loss,
            n,
            m,
        }
    }

    pub fn load_params(&mut self, params: &[f64]) {
        self.graph.load_params(&mut self.ws, params);
    }

    fn set_sample(&mut self, ds: &TransitionDataset, i: usize) {
        let row = ds.row(i);
        let (n, m) = (self.n, self.m);
        self.graph.set_input(&mut self.ws, 0, &row[..2 * n]);
        self.graph.set_input(&mut self.ws, 1, &row[2 * n..2 * n + m]);
        self.graph
            .set_input(&mut self.ws, 2, &row[2 * n + m..3 * n + m]);
        self.graph.set_input(&mut self.ws, 3, &row[3 * n + m..]);
    }

    /// Loss of one sample; parameters must be loaded.
    pub fn sample_loss(&mut self, ds: &TransitionDataset, i: usize) -> Result<f64> {
        self.set_sample(ds, i);
        self.graph.forward(&mut self.ws)?;
        Ok(self.graph.value(&self.ws, self.loss)[0])
    }

    /// Loss and gradient accumulation (`grad += ∂loss_i/∂θ`) of one sample.
    pub fn sample_loss_grad(
        &mut self,
        ds: &TransitionDataset,
        i: usize,
        grad: &mut [f64],
    ) -> Result<f64> {
        self.set_sample(ds, i);
        self.graph.forward(&mut self.ws)?;
        let l = self.graph.value(&self.ws, self.loss)[0];
        self.graph.backward(&mut self.ws, self.loss, &[1.0]);
        self.graph.accumulate_param_grad(&self.ws, grad);
        Ok(l)
    }

    /// Mean loss over an index subset.
    pub fn mean_loss(&mut self, ds: &TransitionDataset, idx: &[usize]) -> Result<f64> {
        let mut total = 0.0;
        for &i in idx {
            total += self.sample_loss(ds, i)?;
        }
        Ok(total / idx.len() as f64)
    }
}

/// Mean one-step prediction loss of a model over a dataset.
pub fn prediction_loss(
    model: &dyn Dynamics,
    params: &[f64],
    ds: &TransitionDataset,
    lambda: f64,
) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::Config("prediction loss needs a nonempty batch".into()));
    }
    let mut cl = CompiledLoss::new(model, ds.dt, lambda);
    cl.load_params(params);
    let idx: Vec<usize> = (0..ds.len()).collect();
    cl.mean_loss(ds, &idx)
}

/// Prediction loss without gradient bookkeeping (the validation metric).
pub fn validate(
    model: &dyn Dynamics,
    params: &[f64],
    val: &TransitionDataset,
    lambda: f64,
) -> Result<f64> {
    prediction_loss(model, params, val, lambda)
}

/// Per-epoch record of a training run.
#[derive(Clone, Debug)]
pub struct TrainReport {
    /// Mean train loss per epoch.
    pub history: Vec<f64>,
    /// `(epoch, val_loss)` at each validation check.
    pub val_checks: Vec<(usize, f64)>,
    pub stopped_early: bool,
}

/// Adam on the prediction loss, in place on the model's parameters.
/// Deterministic for a fixed config and seed. A non-finite loss aborts with
/// the offending epoch.
pub fn train(
    model: &mut Model,
    train_set: &TransitionDataset,
    val_set: Option<&TransitionDataset>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    let mut report = TrainReport {
        history: Vec::with_capacity(cfg.epochs),
        val_checks: Vec::new(),
        stopped_early: false,
    };
    if cfg.epochs == 0 {
        return Ok(report);
    }
    if train_set.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }

    let dyn_ref: &dyn Dynamics = match &model.arch {
        crate::modelzoo::Arch::Structured(d) => d,
        crate::modelzoo::Arch::Naive(nv) => nv,
    };
    let mut cl = CompiledLoss::new(dyn_ref, train_set.dt, cfg.lambda);
    let params = &mut model.params;
    let dim = params.len();
    let mut adam = AdamState::new(dim, cfg.lr);
    // Per-parameter learning-rate multipliers: white-box scalars move at
    // wb_lr, everything else at lr.
    let mut lr_scale = vec![1.0; dim];
    for seg in params.layout.segments() {
        if seg.name.starts_with("wb.") {
            lr_scale[seg.offset..seg.offset + seg.len].fill(cfg.wb_lr / cfg.lr);
        }
    }

    let count = train_set.len();
    let full_batch = count <= cfg.batch_size;
    let mut order: Vec<usize> = (0..count).collect();
    let mut grad = vec![0.0; dim];

    for epoch in 0..cfg.epochs {
        if !full_batch {
            let mut rng = stream_rng(cfg.seed, "shuffle", epoch as u64);
            shuffle(&mut order, &mut rng);
        }
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            cl.load_params(&params.data);
            grad.fill(0.0);
            let mut batch_loss = 0.0;
            for &i in batch {
                batch_loss += cl.sample_loss_grad(train_set, i, &mut grad).map_err(|e| {
                    Error::TrainAbort {
                        epoch,
                        detail: e.to_string(),
                    }
                })?;
            }
            let inv = 1.0 / batch.len() as f64;
            batch_loss *= inv;
            for g in grad.iter_mut() {
                *g *= inv;
            }
            if !batch_loss.is_finite() {
                return Err(Error::TrainAbort {
                    epoch,
                    detail: format!("non-finite training loss {batch_loss}"),
                });
            }
            adam.step_scaled(&mut params.data, &grad, Some(&lr_scale));
            epoch_loss += batch_loss * batch.len() as f64;
        }
        report.history.push(epoch_loss / count as f64);

        if let (Some(val), Some(threshold)) = (val_set, cfg.val_threshold) {
            let due = (epoch + 1) % cfg.val_check_every.max(1) == 0 || epoch + 1 == cfg.epochs;
            if due {
                cl.load_params(&params.data);
                let idx: Vec<usize> = (0..val.len()).collect();
                let v = cl.mean_loss(val, &idx)?;
                report.val_checks.push((epoch + 1, v));
                if v <= threshold {
                    report.stopped_early = epoch + 1 < cfg.epochs;
                    break;
                }
            }
        }
    }
    Ok(report)
}

fn shuffle(order: &mut [usize], rng: &mut impl rand::Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
}

/// Outcome of the doubling search for one seed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SweepResult {
    /// `failing` is the largest size that missed the threshold (none when
    /// the very first size passed); `passing` the first that reached it.
    Passed {
        failing: Option<usize>,
        passing: usize,
    },
    /// No size up to `max_size` reached the threshold.
    ExceedsMax { max_size: usize },
}

impl SweepResult {
    /// Passing size for ordering comparisons; exceeding counts as +∞.
    pub fn passing_size(&self) -> Option<usize> {
        match self {
            SweepResult::Passed { passing, .. } => Some(*passing),
            SweepResult::ExceedsMax { .. } => None,
        }
    }
}

/// One trained cell of the sweep grid.
#[derive(Clone, Debug)]
pub struct SweepCell {
    pub kind: ModelKind,
    pub seed: u64,
    pub size: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    /// Validation threshold defining "generalizes".
    pub threshold: f64,
    /// Largest dataset size tried (a power of two times 8).
    pub max_size: usize,
    pub val_size: usize,
    pub sampling: SamplingSpec,
    pub train: TrainConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            threshold: 10f64.powf(-2.5),
            max_size: 8192,
            val_size: 2048,
            sampling: SamplingSpec::default(),
            train: TrainConfig::default(),
        }
    }
}

/// Doubling protocol for one model name and seed: starting at 8 samples,
/// train on a fresh i.i.d. set per size (validation set shared within the
/// seed) and double until validation reaches the threshold.
pub fn data_efficiency_sweep(
    kind: ModelKind,
    spec_template: &ModelSpec,
    sys: &dyn Dynamics,
    sys_params: &[f64],
    cfg: &SweepConfig,
    seed: u64,
    mut on_cell: impl FnMut(&SweepCell),
) -> Result<(SweepResult, Vec<SweepCell>)> {
    if cfg.threshold <= 0.0 {
        return Err(Error::Config("sweep threshold must be positive".into()));
    }
    let mut val_spec = cfg.sampling;
    val_spec.count = cfg.val_size;
    val_spec.seed = derived_seed(seed, "val");
    let val = sample_transitions(sys, sys_params, &val_spec)?;

    let mut cells = Vec::new();
    let mut failing = None;
    let mut size = 8usize;
    while size <= cfg.max_size {
        let mut train_spec = cfg.sampling;
        train_spec.count = size;
        train_spec.seed = derived_seed(seed, "train").wrapping_add(size as u64);
        let train_set = sample_transitions(sys, sys_params, &train_spec)?;

        let mut spec = spec_template.clone();
        spec.kind = kind;
        spec.seed = derived_seed(seed, "init");
        let mut model = build(&spec)?;

        let mut tc = cfg.train.clone();
        tc.seed = derived_seed(seed, "shuffle");
        tc.val_threshold = Some(cfg.threshold);
        let report = train(&mut model, &train_set, Some(&val), &tc)?;

        let train_loss = *report.history.last().unwrap_or(&f64::NAN);
        let val_loss = match report.val_checks.last() {
            Some(&(_, v)) => v,
            None => validate(model.dynamics(), &model.params.data, &val, tc.lambda)?,
        };
        let passed = val_loss <= cfg.threshold;
        let cell = SweepCell {
            kind,
            seed,
            size,
            train_loss,
            val_loss,
            passed,
        };
        on_cell(&cell);
        cells.push(cell);
        if passed {
            return Ok((
                SweepResult::Passed {
                    failing,
                    passing: size,
                },
                cells,
            ));
        }
        failing = Some(size);
        size *= 2;
    }
    Ok((
        SweepResult::ExceedsMax {
            max_size: cfg.max_size,
        },
        cells,
    ))
}

fn derived_seed(seed: u64, name: &str) -> u64 {
    use rand::Rng;
    stream_rng(seed, name, 0).random()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{true_system, DoublePendulumParams};

    fn small_dataset(count: usize, seed: u64) -> TransitionDataset {
        let (sys, pv) = true_system(&DoublePendulumParams::nominal()).unwrap();
        sample_transitions(
            &sys,
            &pv.data,
            &SamplingSpec {
                count,
                seed,
                ..SamplingSpec::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn exact_model_has_zero_prediction_loss() {
        let (sys, pv) = true_system(&DoublePendulumParams::nominal()).unwrap();
        let ds = small_dataset(16, 3);
        let loss = prediction_loss(&sys, &pv.data, &ds, DEFAULT_LAMBDA).unwrap();
        assert!(loss <= 1e-12, "true-parameter loss {loss}");
    }

    #[test]
    fn single_sample_offset_arithmetic() {
        // Position prediction off by (0.1, 0), velocities exact, λ = 1 → 0.01.
        let (sys, pv) = true_system(&DoublePendulumParams::nominal()).unwrap();
        let base = small_dataset(1, 4);
        let mut ds = TransitionDataset::new(2, 2, base.dt, crate::systems::Provenance::Iid);
        let mut q_next = base.q_next(0).to_vec();
        q_next[0] += 0.1;
        ds.push(base.q(0), base.qdot(0), base.u(0), &q_next, base.qdot_next(0));
        let loss = prediction_loss(&sys, &pv.data, &ds, 1.0).unwrap();
        approx::assert_relative_eq!(loss, 0.01, max_relative = 1e-9);
    }

    #[test]
    fn zero_epochs_leaves_model_unchanged() {
        let mut model = build(&ModelSpec::new(ModelKind::MVF, 5)).unwrap();
        let before = model.params.data.clone();
        let ds = small_dataset(4, 6);
        let report = train(
            &mut model,
            &ds,
            None,
            &TrainConfig {
                epochs: 0,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        assert!(report.history.is_empty());
        assert_eq!(model.params.data, before);
    }

    #[test]
    fn white_box_fit_reaches_low_loss_and_decreases_smoothed() {
        let mut model = build(&ModelSpec::new(ModelKind::WB, 7)).unwrap();
        let ds = small_dataset(16, 8);
        let cfg = TrainConfig {
            epochs: 5000,
            ..TrainConfig::default()
        };
        let report = train(&mut model, &ds, None, &cfg).unwrap();
        let final_loss = *report.history.last().unwrap();
        assert!(
            final_loss < 1e-4,
            "white-box train loss after 5000 epochs: {final_loss}"
        );
        // Non-increasing when smoothed over 100-epoch windows.
        let windows: Vec<f64> = report
            .history
            .chunks(100)
            .map(|w| w.iter().sum::<f64>() / w.len() as f64)
            .collect();
        for w in windows.windows(2) {
            assert!(
                w[1] <= w[0] * 1.05 + 1e-12,
                "smoothed loss increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn training_is_deterministic() {
        let ds = small_dataset(8, 9);
        let run = || {
            let mut model = build(&ModelSpec::new(ModelKind::MVB, 11)).unwrap();
            let cfg = TrainConfig {
                epochs: 40,
                ..TrainConfig::default()
            };
            let report = train(&mut model, &ds, None, &cfg).unwrap();
            (report.history, model.params.data)
        };
        let (h1, p1) = run();
        let (h2, p2) = run();
        assert_eq!(h1, h2, "loss histories must be bitwise identical");
        assert_eq!(p1, p2, "trained parameters must be bitwise identical");
    }

    #[test]
    fn validation_of_exact_model_is_zero_and_init_is_far() {
        let (sys, pv) = true_system(&DoublePendulumParams::nominal()).unwrap();
        let val = small_dataset(64, 13);
        let v = validate(&sys, &pv.data, &val, DEFAULT_LAMBDA).unwrap();
        assert!(v <= 1e-12);
        let naive = build(&ModelSpec::new(ModelKind::Naive, 14)).unwrap();
        let v0 = validate(naive.dynamics(), &naive.params.data, &val, DEFAULT_LAMBDA).unwrap();
        assert!(
            v0 > 10f64.powf(-2.5) * 10.0,
            "untrained naive validation loss {v0} suspiciously low"
        );
    }

    #[test]
    fn sweep_on_white_box_brackets_within_8_16() {
        let (sys, pv) = true_system(&DoublePendulumParams::nominal()).unwrap();
        let cfg = SweepConfig {
            max_size: 64,
            val_size: 256,
            ..SweepConfig::default()
        };
        let (result, cells) = data_efficiency_sweep(
            ModelKind::WB,
            &ModelSpec::new(ModelKind::WB, 0),
            &sys,
            &pv.data,
            &cfg,
            1,
            |_| {},
        )
        .unwrap();
        match result {
            SweepResult::Passed { passing, .. } => {
                assert!(passing <= 16, "white-box passing size {passing}");
            }
            SweepResult::ExceedsMax { .. } => panic!("white-box never passed: {cells:?}"),
        }
    }
}
