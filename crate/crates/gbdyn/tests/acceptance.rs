//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantities (run with `--nocapture` to see them). Criteria 5,
//! 6 and 8 are long-running (minutes to an hour on one core); the whole
//! suite is expected to take on the order of one to two hours.

use std::time::Instant;

use gbdyn::control::{
    control_episode, mbrl_loop, riccati_gains, MbrlConfig,
};
use gbdyn::dynamics::{
    assemble_cholesky, emit_rk4_step, rollout, DynModel, ForceModel, GeneralizedState,
    MassMatrixModel, PotentialModel, WbAffineIdx,
};
use gbdyn::engine::rng::stream_rng;
use gbdyn::engine::{finite_difference_check, GraphBuilder, Mlp};
use gbdyn::modelzoo::{build, ModelKind, ModelSpec};
use gbdyn::systems::{
    sample_transitions, true_system, DoublePendulumParams, SamplingSpec, TransitionDataset,
};
use gbdyn::training::{data_efficiency_sweep, train, SweepConfig, TrainConfig};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn sample(count: usize, seed: u64) -> TransitionDataset {
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

/// Criterion 1: for every model in the zoo, the gradient of the prediction
/// loss on a 4-sample batch matches central finite differences (step 1e-5)
/// to relative error ≤ 1e-4 (absolute floor 1e-8).
#[test]
fn criterion_1_gradient_correctness() {
    let ds = sample(4, 41);
    let mut worst = (0.0f64, ModelKind::WB);
    for kind in ModelKind::ALL {
        let model = build(&ModelSpec::new(kind, 7)).unwrap();
        let d = model.dynamics();
        // Batch-mean loss graph: four one-step predictions.
        let mut b = GraphBuilder::new(d.tangent_dims());
        let mut total = None;
        for i in 0..ds.len() {
            let row = ds.row(i);
            let x = b.constant(row[..4].to_vec());
            let u = b.constant(row[4..6].to_vec());
            let target = b.constant(row[6..10].to_vec());
            let xp = emit_rk4_step(&mut b, d, x, u, ds.dt);
            let diff = b.sub(xp, target);
            let dq = b.slice(diff, 0, 2);
            let dv = b.slice(diff, 2, 2);
            let pos = b.dot(dq, dq);
            let vel = b.dot(dv, dv);
            let loss = b.add_scaled(pos, vel, 0.1);
            total = Some(match total {
                None => loss,
                Some(t) => b.add(t, loss),
            });
        }
        let mean = b.scale(total.unwrap(), 0.25);
        let g = b.finish();
        let mut ws = g.workspace();
        let mut params = model.params.data.clone();
        let err = finite_difference_check(&g, &mut ws, &mut params, mean, 1e-5).unwrap();
        println!("  {kind:6}: max relative gradient error {err:.3e} over {} parameters", params.len());
        assert!(
            err <= 1e-4,
            "criterion 1: FAIL — {kind} gradient error {err:.3e} > 1e-4"
        );
        if err > worst.0 {
            worst = (err, kind);
        }
    }
    println!(
        "criterion 1 (gradient correctness): PASS — worst max relative error {:.3e} ({})",
        worst.0, worst.1
    );
}

/// Criterion 2: the Jacobian-identity Coriolis path equals the direct
/// triple-partial construction to 1e-8 absolute on 100 random learned mass
/// models across N ∈ {1, 2, 3}.
#[test]
fn criterion_2_coriolis_identity() {
    let mut worst: f64 = 0.0;
    let mut models = 0;
    for n in 1..=3usize {
        for trial in 0..34 {
            if models == 100 {
                break;
            }
            models += 1;
            let seed = (1000 * n + trial) as u64;
            let net = Mlp::new(vec![2 * n, 16, 16, n * (n + 1) / 2]);
            let mut rng = stream_rng(seed, "c2", 0);
            let params = net.init_params(&mut rng);
            let q: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
            let qd: Vec<f64> = (0..n).map(|_| rng.random_range(-8.0..8.0)).collect();

            let brute = coriolis_triple_partial(n, &net, 1.0, &params, &q, &qd);
            let model = mass_only_model(n, net, 1.0);
            let fast = model.coriolis_times_qdot(&params, &q, &qd).unwrap();
            for i in 0..n {
                let err = (fast[i] - brute[i]).abs();
                worst = worst.max(err);
                assert!(
                    err <= 1e-8,
                    "criterion 2: FAIL — N={n} trial={trial} |Δ| = {err:.3e} > 1e-8"
                );
            }
        }
    }
    println!(
        "criterion 2 (Coriolis identity): PASS — {models} models, worst |Δ| = {worst:.3e} ≤ 1e-8"
    );
}

fn mass_only_model(n: usize, net: Mlp, delta: f64) -> DynModel {
    DynModel {
        n,
        m: n,
        mass: MassMatrixModel::LearnedCholesky {
            n,
            net,
            offset: 0,
            delta,
        },
        potential: PotentialModel::LearnedScalar {
            net: Mlp::new(vec![2 * n, 2, 1]),
            offset: usize::MAX / 2,
        },
        force: ForceModel::WhiteBoxAffine(WbAffineIdx {
            b: usize::MAX / 2,
            eta: usize::MAX / 2,
        }),
    }
}

/// `C(q,q̇)·q̇` assembled from the full Coriolis matrix via explicit
/// ∂M/∂q_k partials (network Jacobian chained through the angle embedding).
fn coriolis_triple_partial(
    n: usize,
    net: &Mlp,
    delta: f64,
    params: &[f64],
    q: &[f64],
    qd: &[f64],
) -> Vec<f64> {
    let feat: Vec<f64> = q
        .iter()
        .map(|v| v.sin())
        .chain(q.iter().map(|v| v.cos()))
        .collect();
    let raw = net.forward(params, &feat).unwrap();
    let l = assemble_cholesky(&raw, n, delta).unwrap();
    let jac = net.input_jacobian(params, &feat).unwrap();
    let raw_len = raw.len();
    let mut dm = Vec::with_capacity(n);
    for k in 0..n {
        let draw: Vec<f64> = (0..raw_len)
            .map(|r| jac[r * 2 * n + k] * q[k].cos() - jac[r * 2 * n + n + k] * q[k].sin())
            .collect();
        let dl = assemble_cholesky(&draw, n, 0.0).unwrap();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for t in 0..n {
                    s += dl[i * n + t] * l[j * n + t] + l[i * n + t] * dl[j * n + t];
                }
                d[i * n + j] = s;
            }
        }
        dm.push(d);
    }
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += (dm[k][i * n + j] + dm[j][i * n + k] - dm[i][k * n + j]) * qd[k];
            }
            c[i * n + j] = 0.5 * s;
        }
    }
    (0..n)
        .map(|i| (0..n).map(|j| c[i * n + j] * qd[j]).sum())
        .collect()
}

/// Criterion 3: unforced, undamped white-box rollout (5 s at Δt = 1e-3 from
/// q = (0.1, 0)) keeps T + V within 1e-4 relative drift.
#[test]
fn criterion_3_energy_conservation() {
    let mut p = DoublePendulumParams::nominal();
    p.eta1 = 0.0;
    p.eta2 = 0.0;
    let (model, pv) = true_system(&p).unwrap();
    let x0 = GeneralizedState::new(vec![0.1, 0.0], vec![0.0, 0.0]);
    let controls = vec![vec![0.0, 0.0]; 5000];
    let traj = rollout(&model, &pv.data, &x0, &controls, 1e-3).unwrap();
    let e0 = model.energy(&pv.data, &x0).unwrap();
    let mut worst: f64 = 0.0;
    for s in &traj {
        let e = model.energy(&pv.data, s).unwrap();
        worst = worst.max(((e - e0) / e0.abs()).abs());
    }
    assert!(
        worst <= 1e-4,
        "criterion 3: FAIL — relative energy drift {worst:.3e} > 1e-4"
    );
    println!("criterion 3 (energy conservation): PASS — relative drift {worst:.3e} ≤ 1e-4 over 5 s");
}

/// Criterion 4: the all-analytic model trained on 16 i.i.d. samples reaches
/// validation loss ≤ 10^−2.5 (λ = 0.1, 2048-sample validation set) on at
/// least 4 of 5 seeds.
#[test]
fn criterion_4_white_box_data_efficiency() {
    let threshold = 10f64.powf(-2.5);
    let mut passes = 0;
    for seed in 0..5u64 {
        let train_set = sample(16, 7000 + seed);
        let val_set = sample(2048, 8000 + seed);
        let mut model = build(&ModelSpec::new(ModelKind::WB, seed)).unwrap();
        let cfg = TrainConfig {
            val_threshold: Some(threshold),
            seed,
            ..TrainConfig::default()
        };
        let report = train(&mut model, &train_set, Some(&val_set), &cfg).unwrap();
        let val = gbdyn::training::validate(
            model.dynamics(),
            &model.params.data,
            &val_set,
            cfg.lambda,
        )
        .unwrap();
        let ok = val <= threshold;
        println!(
            "  seed {seed}: validation loss {val:.3e} after {} epochs — {}",
            report.history.len(),
            if ok { "pass" } else { "fail" }
        );
        passes += ok as usize;
    }
    assert!(
        passes >= 4,
        "criterion 4: FAIL — only {passes}/5 seeds reached 10^-2.5 from 16 samples"
    );
    println!("criterion 4 (white-box data efficiency): PASS — {passes}/5 seeds ≤ 10^-2.5");
}

/// Criterion 5 (smoke variant): with threshold 1e-2, max size 1024, one
/// seed, the minimal passing sizes are ordered W-B ≤ MVF ≤ Naive and the
/// whole search finishes within 15 minutes. The full protocol (threshold
/// 10^-2.5, 5 seeds, all lattice entries) runs through `gbdyn sweep`.
#[test]
fn criterion_5_data_efficiency_ordering_smoke() {
    let started = Instant::now();
    let (sys, pv) = true_system(&DoublePendulumParams::nominal()).unwrap();
    let cfg = SweepConfig {
        threshold: 1e-2,
        max_size: 1024,
        val_size: 2048,
        ..SweepConfig::default()
    };
    let mut passing = Vec::new();
    for kind in [ModelKind::WB, ModelKind::MVF, ModelKind::Naive] {
        let (result, cells) = data_efficiency_sweep(
            kind,
            &ModelSpec::new(kind, 0),
            &sys,
            &pv.data,
            &cfg,
            1,
            |c| {
                println!(
                    "  {:5} size {:5}: val {:.3e} {}",
                    c.kind,
                    c.size,
                    c.val_loss,
                    if c.passed { "pass" } else { "fail" }
                );
            },
        )
        .unwrap();
        let size = result.passing_size();
        println!(
            "  {kind}: minimal passing size {:?} ({} cells)",
            size,
            cells.len()
        );
        passing.push(size);
    }
    let inf = usize::MAX;
    let (wb, mvf, naive) = (
        passing[0].unwrap_or(inf),
        passing[1].unwrap_or(inf),
        passing[2].unwrap_or(inf),
    );
    assert!(
        wb <= mvf && mvf <= naive,
        "criterion 5: FAIL — ordering violated: W-B {wb}, MVF {mvf}, Naive {naive}"
    );
    assert!(
        mvf < inf,
        "criterion 5: FAIL — MVF did not generalize within 1024 samples"
    );
    let mins = started.elapsed().as_secs_f64() / 60.0;
    assert!(
        mins <= 15.0,
        "criterion 5: FAIL — smoke sweep took {mins:.1} min > 15 min"
    );
    println!(
        "criterion 5 (data-efficiency ordering, smoke): PASS — W-B {wb} ≤ MVF {mvf} ≤ Naive {} in {mins:.1} min",
        if naive == inf { "∞(>1024)".to_string() } else { naive.to_string() }
    );
}

/// Criterion 5 (full form; several hours, run explicitly with
/// `cargo test --release --test acceptance -- --ignored criterion_5_full`):
/// threshold 10^-2.5, three seeds, full lattice chain
/// W-B ≤ B ≤ MVB ≤ MVF ≤ Naive, and MVF needs at most half of Naive's data.
#[test]
#[ignore = "multi-hour full sweep; the smoke variant runs by default"]
fn criterion_5_full_protocol() {
    let (sys, pv) = true_system(&DoublePendulumParams::nominal()).unwrap();
    let cfg = SweepConfig {
        threshold: 10f64.powf(-2.5),
        max_size: 8192,
        val_size: 2048,
        ..SweepConfig::default()
    };
    let chain = [
        ModelKind::WB,
        ModelKind::B,
        ModelKind::MVB,
        ModelKind::MVF,
        ModelKind::Naive,
    ];
    for seed in 0..3u64 {
        let mut passing = Vec::new();
        for kind in chain {
            let (result, _) = data_efficiency_sweep(
                kind,
                &ModelSpec::new(kind, 0),
                &sys,
                &pv.data,
                &cfg,
                seed,
                |c| {
                    println!(
                        "  seed {seed} {:5} size {:5}: val {:.3e} {}",
                        c.kind,
                        c.size,
                        c.val_loss,
                        if c.passed { "pass" } else { "fail" }
                    )
                },
            )
            .unwrap();
            passing.push(result.passing_size().unwrap_or(usize::MAX));
        }
        println!("  seed {seed}: passing sizes {passing:?} for {chain:?}");
        for w in passing.windows(2) {
            assert!(
                w[0] <= w[1],
                "criterion 5 (full): FAIL — lattice ordering violated at seed {seed}: {passing:?}"
            );
        }
        let (mvf, naive) = (passing[3], passing[4]);
        assert!(
            naive == usize::MAX || mvf <= naive / 2,
            "criterion 5 (full): FAIL — MVF {mvf} > half of Naive {naive} at seed {seed}"
        );
    }
    println!("criterion 5 (full protocol): PASS");
}

/// Criterion 6: trained on the same 4096 i.i.d. samples, the structured MVF
/// model tracks 5-second rollouts more closely than the naive baseline on
/// at least 2 of 3 held-out trajectories.
#[test]
fn criterion_6_multistep_prediction() {
    let (sys, pv) = true_system(&DoublePendulumParams::nominal()).unwrap();
    let ds = sample(4096, 600);
    let cfg = TrainConfig {
        seed: 601,
        ..TrainConfig::default()
    };
    let mut mvf = build(&ModelSpec::new(ModelKind::MVF, 602)).unwrap();
    let mut naive = build(&ModelSpec::new(ModelKind::Naive, 602)).unwrap();
    println!("  training MVF on 4096 samples ({} epochs)…", cfg.epochs);
    let r1 = train(&mut mvf, &ds, None, &cfg).unwrap();
    println!("  MVF final train loss {:.3e}", r1.history.last().unwrap());
    println!("  training Naive on the same 4096 samples…");
    let r2 = train(&mut naive, &ds, None, &cfg).unwrap();
    println!("  Naive final train loss {:.3e}", r2.history.last().unwrap());

    let dt = 0.01;
    let steps = 500;
    let mut wins = 0;
    for k in 0..3u64 {
        let mut rng = stream_rng(603, "c6-x0", k);
        let x0 = GeneralizedState::new(
            vec![
                rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
                rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            ],
            vec![rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)],
        );
        let normal = rand_distr::Normal::new(0.0, 120.0).unwrap();
        let mut urng = stream_rng(603, "c6-u", k);
        let controls: Vec<Vec<f64>> = (0..steps)
            .map(|_| {
                (0..2)
                    .map(|_| rand_distr::Distribution::sample(&normal, &mut urng))
                    .collect()
            })
            .collect();
        let truth = rollout(&sys, &pv.data, &x0, &controls, dt).unwrap();
        let pm = rollout(mvf.dynamics(), &mvf.params.data, &x0, &controls, dt).unwrap();
        let pn = rollout(naive.dynamics(), &naive.params.data, &x0, &controls, dt).unwrap();
        let (mut e1, mut e2) = (0.0, 0.0);
        for t in 0..=steps {
            e1 += state_err(&truth[t], &pm[t]);
            e2 += state_err(&truth[t], &pn[t]);
        }
        e1 /= (steps + 1) as f64;
        e2 /= (steps + 1) as f64;
        let win = e1 < e2;
        println!(
            "  trajectory {k}: mean state error MVF {e1:.4} vs Naive {e2:.4} — {}",
            if win { "MVF wins" } else { "Naive wins" }
        );
        wins += win as usize;
    }
    assert!(
        wins >= 2,
        "criterion 6: FAIL — MVF won only {wins}/3 held-out trajectories"
    );
    println!("criterion 6 (multi-step prediction): PASS — MVF beat Naive on {wins}/3 trajectories");
}

fn state_err(a: &GeneralizedState, b: &GeneralizedState) -> f64 {
    let mut s = 0.0;
    for i in 0..a.q.len() {
        s += (a.q[i] - b.q[i]).powi(2) + (a.qdot[i] - b.qdot[i]).powi(2);
    }
    s.sqrt()
}

/// Criterion 7: the control stack with the true model injected brings the
/// swing-up's stabilization-window metric to ≤ 0.5 m in one episode, and
/// TVLQR gains reproduce brute-force dynamic programming to 1e-8.
#[test]
fn criterion_7_control_stack_oracle() {
    // Riccati vs brute-force DP on random 2-state/1-input systems, 5 steps.
    let mut worst: f64 = 0.0;
    for trial in 0..20u64 {
        let mut rng = stream_rng(700, "c7", trial);
        let a = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.2..1.2));
        let b = DMatrix::from_fn(2, 1, |_, _| rng.random_range(-1.0..1.0));
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![
            rng.random_range(0.1..2.0),
            rng.random_range(0.1..2.0),
        ]));
        let r = DMatrix::from_element(1, 1, rng.random_range(0.1..2.0));
        let qf = DMatrix::from_diagonal(&DVector::from_vec(vec![
            rng.random_range(0.1..2.0),
            rng.random_range(0.1..2.0),
        ]));
        let lins = vec![(a.clone(), b.clone()); 5];
        let gains = riccati_gains(&lins, &q, &r, &qf).unwrap();
        let brute = brute_force_dp_gains(&a, &b, &q, &r, &qf, 5);
        for t in 0..5 {
            for c in 0..2 {
                let err = (gains[t][(0, c)] - brute[t][c]).abs();
                worst = worst.max(err);
                assert!(
                    err <= 1e-8,
                    "criterion 7: FAIL — DP gain mismatch {err:.3e} at t={t}"
                );
            }
        }
    }
    println!("  riccati vs brute-force DP: worst |ΔK| = {worst:.3e} ≤ 1e-8");

    // Swing-up with the true dynamics injected as the planning model.
    let plant = DoublePendulumParams::nominal();
    let (model, pv) = true_system(&plant).unwrap();
    let cfg = MbrlConfig::for_plant(&plant);
    let (plan, _, metrics) =
        control_episode(&model, &pv.data, &model, &pv.data, &plant, &cfg, None).unwrap();
    println!(
        "  true-model swing-up: feasible={} defect={:.2e} metric {:.3} m (full) / {:.3} m (hold)",
        plan.feasible, plan.defect_norm, metrics.full, metrics.hold
    );
    assert!(
        metrics.hold <= 0.5,
        "criterion 7: FAIL — stabilization-window distance {:.3} m > 0.5 m",
        metrics.hold
    );
    println!(
        "criterion 7 (control stack oracle): PASS — hold-window distance {:.3} m ≤ 0.5 m, DP gains match to 1e-8",
        metrics.hold
    );
}

/// Quadratic value iteration with numerically-fitted minimizers: V_t is
/// reconstructed from function evaluations only (exact for quadratics), so
/// no Riccati algebra is shared with the implementation under test.
fn brute_force_dp_gains(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    qf: &DMatrix<f64>,
    steps: usize,
) -> Vec<Vec<f64>> {
    let quad = |m: &DMatrix<f64>, x: &DVector<f64>| (x.transpose() * m * x)[(0, 0)];
    // Cost-to-go after the decision at stage t: J(x, u) = xᵀQx + u·R·u + V_{t+1}(Ax + Bu).
    let mut v = qf.clone();
    let mut gains: Vec<Vec<f64>> = Vec::new();
    for _ in 0..steps {
        let j = |x: &DVector<f64>, u: f64, v: &DMatrix<f64>| {
            let xs = a * x + b * u;
            quad(q, x) + r[(0, 0)] * u * u + quad(v, &xs)
        };
        // For a quadratic in u, three samples give the exact minimizer:
        // u* = (J(-1) − J(1)) / (2·(J(1) − 2·J(0) + J(-1))).
        let umin = |x: &DVector<f64>, v: &DMatrix<f64>| {
            let (jm, j0, jp) = (j(x, -1.0, v), j(x, 0.0, v), j(x, 1.0, v));
            (jm - jp) / (2.0 * (jp - 2.0 * j0 + jm))
        };
        // Gain row from minimizers at the basis vectors (u* is linear in x).
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let e2 = DVector::from_vec(vec![0.0, 1.0]);
        gains.push(vec![-umin(&e1, &v), -umin(&e2, &v)]);
        // Rebuild V_t's quadratic form from optimal values at 3 probe points.
        let val = |x: &DVector<f64>| {
            let u = umin(x, &v);
            j(x, u, &v)
        };
        let v11 = val(&e1);
        let v22 = val(&e2);
        let v12 = (val(&DVector::from_vec(vec![1.0, 1.0])) - v11 - v22) / 2.0;
        v = DMatrix::from_row_slice(2, 2, &[v11, v12, v12, v22]);
    }
    gains.reverse();
    gains
}

/// Criterion 8: over 3 seeds and a 15-episode budget, MVB's first success
/// episode is at or before MVF's in a majority of seeds, and the naive
/// baseline records zero successes. If MVF fails a seed outright, that seed
/// is re-drawn once (seed + 100, documented here).
#[test]
fn criterion_8_mbrl_ordering() {
    let plant = DoublePendulumParams::nominal();
    let base = MbrlConfig::for_plant(&plant);

    let run = |kind: ModelKind, seed: u64| -> Option<usize> {
        let mut cfg = base.clone();
        cfg.seed = seed;
        let spec = ModelSpec::new(kind, seed);
        let records = mbrl_loop(&spec, &plant, &cfg, |r| {
            println!(
                "  {kind} seed {seed} episode {:2}: {:.3} m (hold {:.3} m) feasible={} |D|={}",
                r.episode, r.performance, r.hold_performance, r.plan_feasible, r.dataset_size
            );
        })
        .unwrap();
        records
            .iter()
            .find(|r| r.episode > 0 && r.hold_performance <= cfg.success_threshold)
            .map(|r| r.episode)
    };

    let mut mvb_le_mvf = 0;
    let mut seeds_used = Vec::new();
    for seed in 0..3u64 {
        let mut s = seed;
        let mut mvf_first = run(ModelKind::MVF, s);
        if mvf_first.is_none() {
            // Documented redraw: seed + 100, once.
            s = seed + 100;
            println!("  MVF failed seed {seed}; re-drawing once with seed {s}");
            mvf_first = run(ModelKind::MVF, s);
        }
        let mvf_first = mvf_first.unwrap_or_else(|| {
            panic!("criterion 8: FAIL — MVF failed seed {seed} and its redraw")
        });
        let mvb_first = run(ModelKind::MVB, s);
        println!(
            "  seed {s}: first success MVB {:?} vs MVF {mvf_first}",
            mvb_first
        );
        if mvb_first.is_some_and(|e| e <= mvf_first) {
            mvb_le_mvf += 1;
        }
        seeds_used.push(s);
    }
    assert!(
        mvb_le_mvf >= 2,
        "criterion 8: FAIL — MVB first-success ≤ MVF in only {mvb_le_mvf}/3 seeds"
    );

    let mut naive_successes = 0;
    for &s in &seeds_used {
        if run(ModelKind::Naive, s).is_some() {
            naive_successes += 1;
        }
    }
    assert_eq!(
        naive_successes, 0,
        "criterion 8: FAIL — naive baseline recorded {naive_successes} successes"
    );
    println!(
        "criterion 8 (MBRL ordering): PASS — MVB ≤ MVF in {mvb_le_mvf}/3 seeds (seeds {seeds_used:?}), naive 0 successes"
    );
}

/// Criterion 9: every command re-run with the same config and seed produces
/// byte-identical CSV and binary outputs.
#[test]
fn criterion_9_reproducibility() {
    let bin = env!("CARGO_BIN_EXE_gbdyn");
    let root = std::env::temp_dir().join("gbdyn-acceptance-repro");
    let _ = std::fs::remove_dir_all(&root);
    std::fs::create_dir_all(&root).unwrap();
    let config = root.join("run.cfg");
    std::fs::write(
        &config,
        "seed = 4\n\n[data]\ncount = 8\ndt = 0.01\n\n[model]\nname = W-B\n\n[train]\nepochs = 30\ndataset = DATA\n\n[sweep]\nmodels = W-B\nseeds = 0\nthreshold = 1.0\nmax_size = 16\nval_size = 32\n\n[rollout]\nhorizon_s = 0.2\ntrajectories = 1\nmvf_checkpoint = CKPT\nnaive_checkpoint = CKPT\n\n[mbrl]\nmodels = MVB\nseeds = 0\nepisodes = 1\ninitial_epochs = 40\nepisode_epochs = 10\n",
    )
    .unwrap();

    let run = |cmd: &str, out: &std::path::Path, extra_cfg: &std::path::Path| {
        let status = std::process::Command::new(bin)
            .args([
                cmd,
                "--config",
                extra_cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ])
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success(), "gbdyn {cmd} failed");
    };

    // generate-data twice, reusing the dataset for the other commands.
    let (da, db) = (root.join("da"), root.join("db"));
    run("generate-data", &da, &config);
    run("generate-data", &db, &config);
    assert_identical(&da.join("data.gbds"), &db.join("data.gbds"));

    let text = std::fs::read_to_string(&config)
        .unwrap()
        .replace("DATA", &da.join("data.gbds").to_str().unwrap().replace('\\', "/"));
    let cfg2 = root.join("run2.cfg");
    std::fs::write(&cfg2, &text).unwrap();
    let (ta, tb) = (root.join("ta"), root.join("tb"));
    run("train", &ta, &cfg2);
    run("train", &tb, &cfg2);
    assert_identical(&ta.join("loss.csv"), &tb.join("loss.csv"));
    assert_identical(&ta.join("model.gbdyn"), &tb.join("model.gbdyn"));

    let text = text.replace("CKPT", &ta.join("model.gbdyn").to_str().unwrap().replace('\\', "/"));
    let cfg3 = root.join("run3.cfg");
    std::fs::write(&cfg3, &text).unwrap();

    let (sa, sb) = (root.join("sa"), root.join("sb"));
    run("sweep", &sa, &cfg3);
    run("sweep", &sb, &cfg3);
    assert_identical(&sa.join("sweep.csv"), &sb.join("sweep.csv"));

    let (ra, rb) = (root.join("ra"), root.join("rb"));
    run("rollout-eval", &ra, &cfg3);
    run("rollout-eval", &rb, &cfg3);
    assert_identical(&ra.join("rollout_0.csv"), &rb.join("rollout_0.csv"));

    let (ma, mb) = (root.join("ma"), root.join("mb"));
    run("mbrl", &ma, &cfg3);
    run("mbrl", &mb, &cfg3);
    assert_identical(&ma.join("mbrl_MVB_0.csv"), &mb.join("mbrl_MVB_0.csv"));

    println!("criterion 9 (reproducibility): PASS — all five commands byte-identical across re-runs");
}

fn assert_identical(a: &std::path::Path, b: &std::path::Path) {
    let ba = std::fs::read(a).unwrap_or_else(|e| panic!("{}: {e}", a.display()));
    let bb = std::fs::read(b).unwrap_or_else(|e| panic!("{}: {e}", b.display()));
    assert!(
        ba == bb,
        "criterion 9: FAIL — {} and {} differ",
        a.display(),
        b.display()
    );
}
