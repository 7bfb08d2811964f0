//! Command-line front end: dataset generation, training, the
//! data-efficiency sweep, multi-step rollout comparison, and the
//! model-based RL experiment. Every command is driven by a config file plus
//! a global seed, copies its config into the output directory, and emits
//! CSV; identical config + seed reproduces identical bytes.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use gbdyn::config::RunConfig;
use gbdyn::control::{mbrl_loop, MbrlConfig};
use gbdyn::dynamics::rollout;
use gbdyn::engine::rng::stream_rng;
use gbdyn::modelzoo::{build, Model, ModelKind};
use gbdyn::systems::{sample_transitions, true_system, TransitionDataset};
use gbdyn::training::{data_efficiency_sweep, train, validate, SweepConfig};
use gbdyn::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Normal};

#[derive(Parser)]
#[command(name = "gbdyn", about = "Gray-box dynamics learning experiments", version)]
struct Cli {
    /// Config file (flat key = value with [sections]).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (created if absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides [train] epochs.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Overrides [model] name.
    #[arg(long, global = true)]
    model: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample i.i.d. transitions from the true plant into a dataset file.
    GenerateData,
    /// Train a model spec on a dataset file; writes checkpoint + loss CSV.
    Train {
        /// Resume from an existing checkpoint instead of a fresh init.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Data-efficiency doubling sweep over models × seeds.
    Sweep,
    /// Multi-step rollout comparison: true system vs two checkpoints.
    RolloutEval,
    /// Model-based RL swing-up experiment.
    Mbrl,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Format(_) | Error::Io(_) | Error::ShapeMismatch { .. } => {
                    2
                }
                _ => 3,
            }
        }
    };
    std::process::exit(code);
}

fn run(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::parse("")?,
    };
    if let Some(m) = &cli.model {
        cfg.set("model", "name", m.clone());
    }
    if let Some(e) = cli.epochs {
        cfg.set("train", "epochs", e.to_string());
    }
    let seed = cli.seed.unwrap_or(cfg.global_seed()?);
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(cfg.str_or("", "out", "runs/out")));
    std::fs::create_dir_all(&out)?;
    // Keep the exact configuration alongside the results.
    let mut used = cfg.text.clone();
    used.push_str(&format!("\n# effective seed\n# seed = {seed}\n"));
    std::fs::write(out.join("config.used"), used)?;

    match &cli.command {
        Command::GenerateData => cmd_generate_data(&cfg, seed, &out),
        Command::Train { resume } => cmd_train(&cfg, seed, &out, resume.as_deref()),
        Command::Sweep => cmd_sweep(&cfg, seed, &out),
        Command::RolloutEval => cmd_rollout_eval(&cfg, seed, &out),
        Command::Mbrl => cmd_mbrl(&cfg, seed, &out),
    }
}

fn cmd_generate_data(cfg: &RunConfig, seed: u64, out: &Path) -> Result<()> {
    let plant = cfg.plant()?;
    let (sys, pv) = true_system(&plant)?;
    let spec = cfg.sampling(derive(seed, "data"))?;
    let ds = sample_transitions(&sys, &pv.data, &spec)?;
    let path = out.join("data.gbds");
    ds.save(&path)?;

    let mut u_sq = 0.0;
    let mut q_max: f64 = 0.0;
    for i in 0..ds.len() {
        for &u in ds.u(i) {
            u_sq += u * u;
        }
        for &q in ds.q(i) {
            q_max = q_max.max(q.abs());
        }
    }
    let u_std = (u_sq / (ds.len() * ds.m) as f64).sqrt();
    println!(
        "wrote {} transitions (N={}, M={}, Δt={}) to {}",
        ds.len(),
        ds.n,
        ds.m,
        ds.dt,
        path.display()
    );
    println!("summary: max |q| = {q_max:.3} rad, empirical input std = {u_std:.1}");
    Ok(())
}

fn cmd_train(cfg: &RunConfig, seed: u64, out: &Path, resume: Option<&Path>) -> Result<()> {
    let data_path = PathBuf::from(cfg.require("train", "dataset")?);
    let ds = TransitionDataset::load(&data_path)?;
    let mut model = match resume {
        Some(p) => Model::load(p)?,
        None => build(&cfg.model_spec(derive(seed, "init"))?)?,
    };
    {
        let d = model.dynamics();
        if d.dof() != ds.n || d.input_dim() != ds.m {
            return Err(Error::shape(
                "train dataset dims",
                format!("N={}, M={}", d.dof(), d.input_dim()),
                format!("N={}, M={}", ds.n, ds.m),
            ));
        }
    }
    let tc = cfg.train_config(derive(seed, "shuffle"))?;
    let val = if tc.val_threshold.is_some() {
        let mut vs = cfg.sampling(derive(seed, "val"))?;
        vs.count = cfg.usize_or("train", "val_size", 2048)?;
        let plant = cfg.plant()?;
        let (sys, pv) = true_system(&plant)?;
        Some(sample_transitions(&sys, &pv.data, &vs)?)
    } else {
        None
    };
    let report = train(&mut model, &ds, val.as_ref(), &tc)?;
    let ckpt = out.join("model.gbdyn");
    model.save(&ckpt)?;
    let mut csv = String::from("epoch,train_loss\n");
    for (i, l) in report.history.iter().enumerate() {
        csv.push_str(&format!("{},{:.17e}\n", i + 1, l));
    }
    std::fs::write(out.join("loss.csv"), csv)?;
    let final_train = report.history.last().copied().unwrap_or(f64::NAN);
    println!(
        "trained {} for {} epochs: final train loss {:.3e}; checkpoint {}",
        model.spec.kind,
        report.history.len(),
        final_train,
        ckpt.display()
    );
    if let Some(val) = &val {
        let v = validate(model.dynamics(), &model.params.data, val, tc.lambda)?;
        println!("validation loss {v:.3e}");
    }
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, seed: u64, out: &Path) -> Result<()> {
    let plant = cfg.plant()?;
    let (sys, pv) = true_system(&plant)?;
    let model_names = cfg.list_or("sweep", "models", &["W-B", "MVF", "Naive"]);
    let seeds: Vec<u64> = cfg
        .list_or("sweep", "seeds", &["0", "1", "2", "3", "4"])
        .iter()
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Config(format!("[sweep] seeds: bad entry {s}")))
        })
        .collect::<Result<_>>()?;
    let sweep = SweepConfig {
        threshold: cfg.f64_or("sweep", "threshold", 10f64.powf(-2.5))?,
        max_size: cfg.usize_or("sweep", "max_size", 8192)?,
        val_size: cfg.usize_or("sweep", "val_size", 2048)?,
        sampling: cfg.sampling(0)?,
        train: cfg.train_config(0)?,
    };

    let csv_path = out.join("sweep.csv");
    let mut csv = std::io::BufWriter::new(std::fs::File::create(&csv_path)?);
    writeln!(csv, "model,seed,size,train_loss,val_loss,passed")?;
    let mut summary = String::from("model,seed,failing,passing\n");

    for name in &model_names {
        let kind = ModelKind::parse(name)?;
        for &cell_seed in &seeds {
            let template = cfg.model_spec(0)?;
            let mut rows = Vec::new();
            let (result, _cells) = data_efficiency_sweep(
                kind,
                &template,
                &sys,
                &pv.data,
                &sweep,
                seed.wrapping_add(cell_seed),
                |c| {
                    rows.push(format!(
                        "{},{},{},{:.6e},{:.6e},{}",
                        c.kind, cell_seed, c.size, c.train_loss, c.val_loss, c.passed
                    ));
                    println!(
                        "{} seed {} size {}: train {:.3e} val {:.3e} passed={}",
                        c.kind, cell_seed, c.size, c.train_loss, c.val_loss, c.passed
                    );
                },
            )?;
            for row in rows {
                writeln!(csv, "{row}")?;
            }
            match result {
                gbdyn::training::SweepResult::Passed { failing, passing } => {
                    summary.push_str(&format!(
                        "{},{},{},{}\n",
                        kind,
                        cell_seed,
                        failing.map(|f| f.to_string()).unwrap_or_default(),
                        passing
                    ));
                }
                gbdyn::training::SweepResult::ExceedsMax { max_size } => {
                    summary.push_str(&format!(
                        "{},{},{max_size},exceeds_max\n",
                        kind, cell_seed
                    ));
                }
            }
        }
    }
    csv.flush()?;
    std::fs::write(out.join("sweep_summary.csv"), summary)?;
    println!("sweep results in {}", csv_path.display());
    Ok(())
}

fn cmd_rollout_eval(cfg: &RunConfig, seed: u64, out: &Path) -> Result<()> {
    let plant = cfg.plant()?;
    let (sys, pv) = true_system(&plant)?;
    let mvf = Model::load(Path::new(cfg.require("rollout", "mvf_checkpoint")?))?;
    let naive = Model::load(Path::new(cfg.require("rollout", "naive_checkpoint")?))?;
    for (name, m) in [("mvf", &mvf), ("naive", &naive)] {
        let d = m.dynamics();
        if d.dof() != 2 || d.input_dim() != 2 {
            return Err(Error::shape(
                "rollout checkpoint dims",
                "N=2, M=2".to_string(),
                format!("{name}: N={}, M={}", d.dof(), d.input_dim()),
            ));
        }
    }

    let dt = cfg.f64_or("rollout", "dt", 0.01)?;
    let horizon_s = cfg.f64_or("rollout", "horizon_s", 5.0)?;
    let steps = (horizon_s / dt).round() as usize;
    let count = cfg.usize_or("rollout", "trajectories", 3)?;
    let u_std = cfg.f64_or("rollout", "u_std", 120.0)?;
    let sampling = cfg.sampling(0)?;

    let mut summary = String::from("trajectory,mean_err_mvf,mean_err_naive\n");
    for k in 0..count {
        let mut rng = stream_rng(seed, "rollout-x0", k as u64);
        let x0 = gbdyn::dynamics::GeneralizedState::new(
            vec![
                rng.random_range(sampling.q_range.0..sampling.q_range.1),
                rng.random_range(sampling.q_range.0..sampling.q_range.1),
            ],
            vec![
                rng.random_range(sampling.qdot_range.0..sampling.qdot_range.1),
                rng.random_range(sampling.qdot_range.0..sampling.qdot_range.1),
            ],
        );
        let normal = Normal::new(0.0, u_std).map_err(|e| Error::Config(e.to_string()))?;
        let mut urng = stream_rng(seed, "rollout-u", k as u64);
        let controls: Vec<Vec<f64>> = (0..steps)
            .map(|_| (0..2).map(|_| normal.sample(&mut urng)).collect())
            .collect();

        let truth = rollout(&sys, &pv.data, &x0, &controls, dt)?;
        let m1 = rollout(mvf.dynamics(), &mvf.params.data, &x0, &controls, dt)?;
        let m2 = rollout(naive.dynamics(), &naive.params.data, &x0, &controls, dt)?;

        let path = out.join(format!("rollout_{k}.csv"));
        let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(
            f,
            "t,true_q1,true_q2,true_qd1,true_qd2,mvf_q1,mvf_q2,mvf_qd1,mvf_qd2,naive_q1,naive_q2,naive_qd1,naive_qd2,err_mvf,err_naive"
        )?;
        let mut sums = (0.0, 0.0);
        for t in 0..=steps {
            let e1 = state_err(&truth[t], &m1[t]);
            let e2 = state_err(&truth[t], &m2[t]);
            sums.0 += e1;
            sums.1 += e2;
            writeln!(
                f,
                "{:.3},{},{},{},{},{},{},{},{},{},{},{},{},{:.6e},{:.6e}",
                t as f64 * dt,
                truth[t].q[0],
                truth[t].q[1],
                truth[t].qdot[0],
                truth[t].qdot[1],
                m1[t].q[0],
                m1[t].q[1],
                m1[t].qdot[0],
                m1[t].qdot[1],
                m2[t].q[0],
                m2[t].q[1],
                m2[t].qdot[0],
                m2[t].qdot[1],
                e1,
                e2
            )?;
        }
        f.flush()?;
        let n = (steps + 1) as f64;
        println!(
            "trajectory {k}: mean state error mvf {:.4}, naive {:.4}",
            sums.0 / n,
            sums.1 / n
        );
        summary.push_str(&format!("{k},{:.6e},{:.6e}\n", sums.0 / n, sums.1 / n));
    }
    std::fs::write(out.join("rollout_summary.csv"), summary)?;
    Ok(())
}

fn state_err(a: &gbdyn::dynamics::GeneralizedState, b: &gbdyn::dynamics::GeneralizedState) -> f64 {
    let mut s = 0.0;
    for i in 0..a.q.len() {
        s += (a.q[i] - b.q[i]).powi(2) + (a.qdot[i] - b.qdot[i]).powi(2);
    }
    s.sqrt()
}

fn cmd_mbrl(cfg: &RunConfig, seed: u64, out: &Path) -> Result<()> {
    let plant = cfg.plant()?;
    let model_names = cfg.list_or("mbrl", "models", &["MVB", "MVF", "Naive"]);
    let seeds: Vec<u64> = cfg
        .list_or("mbrl", "seeds", &["0", "1", "2"])
        .iter()
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Config(format!("[mbrl] seeds: bad entry {s}")))
        })
        .collect::<Result<_>>()?;

    let mut base = MbrlConfig::for_plant(&plant);
    base.episodes = cfg.usize_or("mbrl", "episodes", base.episodes)?;
    base.explore_std = cfg.f64_or("mbrl", "explore_std", base.explore_std)?;
    base.u_std = cfg.f64_or("mbrl", "u_std", base.u_std)?;
    base.initial_epochs = cfg.usize_or("mbrl", "initial_epochs", base.initial_epochs)?;
    base.episode_epochs = cfg.usize_or("mbrl", "episode_epochs", base.episode_epochs)?;
    base.lr = cfg.f64_or("mbrl", "lr", base.lr)?;
    base.success_threshold = cfg.f64_or("mbrl", "success_threshold", base.success_threshold)?;
    base.dircol.clip = cfg.f64_or("mbrl", "clip", base.dircol.clip)?;
    base.dircol.dt = cfg.f64_or("mbrl", "dt", base.dircol.dt)?;

    for name in &model_names {
        let kind = ModelKind::parse(name)?;
        for &run_seed in &seeds {
            let mut mc = base.clone();
            mc.seed = seed.wrapping_add(run_seed);
            let path = out.join(format!("mbrl_{}_{}.csv", kind.name(), run_seed));
            let mut rows = Vec::new();
            let mut spec = cfg.model_spec(mc.seed)?;
            spec.kind = kind;
            let records = mbrl_loop(&spec, &plant, &mc, |r| {
                rows.push(format!(
                    "{},{:.6},{},{}",
                    r.episode, r.performance, r.plan_feasible, r.dataset_size
                ));
                println!(
                    "{} seed {} episode {}: performance {:.3} m (hold {:.3} m), feasible={}, |D|={}",
                    kind,
                    run_seed,
                    r.episode,
                    r.performance,
                    r.hold_performance,
                    r.plan_feasible,
                    r.dataset_size
                );
            })?;
            let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
            writeln!(f, "episode,performance_m,plan_feasible,dataset_size")?;
            for row in rows {
                writeln!(f, "{row}")?;
            }
            f.flush()?;
            let success = records
                .iter()
                .find(|r| r.episode > 0 && r.hold_performance <= mc.success_threshold);
            match success {
                Some(r) => println!(
                    "{kind} seed {run_seed}: first success at episode {} (hold {:.3} m)",
                    r.episode, r.hold_performance
                ),
                None => println!("{kind} seed {run_seed}: no success within budget"),
            }
        }
    }
    Ok(())
}

fn derive(seed: u64, name: &str) -> u64 {
    stream_rng(seed, name, 0).random()
}
