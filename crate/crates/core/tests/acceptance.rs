//! Acceptance checks, one line per criterion.
//!
//! Runs every criterion by default. Pass criterion numbers to run a subset,
//! e.g. `cargo test --release --test acceptance -- 1 2 3`.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use irregts::cells::{gru_step, lstm_step, Cell, CellKind, GatingConfig};
use irregts::cli::run_command;
use irregts::data::{from_jsonl, generate, split, to_jsonl, Dataset, SplitFractions, SynthSpec, TimeSeries};
use irregts::eval::sweep::{early_test_set, sparsify_dataset, sweep, train_model, SweepData, SweepKind, SweepSpec};
use irregts::eval::{accuracy, confusion, macro_f1, run_eval, ConfusionMatrix};
use irregts::model::{grad_check_suite, load_checkpoint, save_checkpoint, ForwardOptions, ModelConfig, Network, SequenceEncoder};
use irregts::node::{euler_solve, euler_solve_vec, ode_gradients, DynamicsNet, GradientMode, LinearField};
use irregts::tensorcore::{dot, grad_check, BnMode, Matrix, ParamStore};
use irregts::train::{fit, lr_schedule, TrainConfig};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let results = grad_check_suite(1e-4).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let (worst_name, worst) = results
        .iter()
        .map(|(n, r)| (n.as_str(), r.max_rel_err))
        .fold(("", 0.0f64), |a, b| if b.1 > a.1 { b } else { a });
    let failed: Vec<&str> = results.iter().filter(|(_, r)| !(r.pass && r.max_rel_err < 1e-4)).map(|(n, _)| n.as_str()).collect();
    check(
        failed.is_empty() && elapsed < Duration::from_secs(60),
        format!(
            "{} models, worst relative error {worst:.2e} ({worst_name}), failed {failed:?}, {:.2}s",
            results.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn zero_cell(kind: CellKind, d: usize, h: usize) -> (Cell, ParamStore) {
    let mut store = ParamStore::new();
    let cell = Cell::register(&mut store, "cell", kind, d, h, GatingConfig::default(), 0).unwrap();
    for p in store.iter_mut() {
        p.value.iter_mut().for_each(|v| *v = 0.0);
    }
    (cell, store)
}

fn cell_closed_forms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut cases = 0;
    for _ in 0..500 {
        let (d, h) = (rng.random_range(1..6), rng.random_range(1..9));
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-20.0..20.0)).collect();
        let hp: Vec<f64> = (0..h).map(|_| rng.random_range(-20.0..20.0)).collect();
        let cp: Vec<f64> = (0..h).map(|_| rng.random_range(-20.0..20.0)).collect();
        let (gru, store) = zero_cell(CellKind::Gru, d, h);
        let out = gru_step(&gru, &store, &x, &hp).map_err(|e| e.to_string())?;
        if out.iter().zip(&hp).any(|(o, v)| *o != 0.5 * v) {
            return Err(format!("GRU h {out:?} is not half of {hp:?}"));
        }
        let (lstm, store) = zero_cell(CellKind::Lstm, d, h);
        let (_, c) = lstm_step(&lstm, &store, &x, &hp, Some(&cp)).map_err(|e| e.to_string())?;
        if c.iter().zip(&cp).any(|(o, v)| *o != 0.5 * v) {
            return Err(format!("LSTM c {c:?} is not half of {cp:?}"));
        }
        cases += 1;
    }
    Ok(format!("{cases} random GRU and LSTM cases halve the state bit-exactly"))
}

fn decay_field(store: &mut ParamStore) -> LinearField {
    LinearField::register(store, "A", &[-1.0], 1).unwrap()
}

fn solver_order() -> Outcome {
    let mut store = ParamStore::new();
    let field = decay_field(&mut store);
    let exact = (-1f64).exp();
    let ns = [1usize, 2, 4, 8];
    let mut errs = Vec::new();
    for n in ns {
        let h = euler_solve_vec(&field, &store, &[1.0], 0.0, 1.0, n).map_err(|e| e.to_string())?[0];
        let closed = (1.0 - 1.0 / n as f64).powi(n as i32);
        if h != closed {
            return Err(format!("n={n}: Euler gives {h}, closed form {closed}"));
        }
        errs.push((h - exact).abs());
    }
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let bad: Vec<String> = ns
        .windows(2)
        .zip(&orders)
        .filter(|(_, o)| !(0.8..=1.2).contains(*o))
        .map(|(p, o)| format!("({},{}) order {o:.4}", p[0], p[1]))
        .collect();
    let shown: Vec<String> = orders.iter().map(|o| format!("{o:.4}")).collect();
    check(
        bad.is_empty(),
        format!("closed form exact for n in {ns:?}; orders [{}]; outside [0.8, 1.2]: {bad:?}", shown.join(", ")),
    )
}

fn decay_param_gradient(n: usize, mode: GradientMode) -> f64 {
    let mut store = ParamStore::new();
    let field = decay_field(&mut store);
    let sol = euler_solve(&field, &store, &Matrix::row_vector(&[1.0]), 0.0, 1.0, n, true).unwrap();
    ode_gradients(&field, &mut store, &sol, &Matrix::row_vector(&[1.0]), mode).unwrap();
    store.by_name("A").unwrap().grad[0]
}

fn random_net(store: &mut ParamStore, h: usize, u: usize, seed: u64) -> DynamicsNet {
    let net = DynamicsNet::register(store, "ode", h, u, None, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in store.iter_mut() {
        p.value.iter_mut().for_each(|v| *v = rng.random_range(-0.8..0.8));
    }
    net
}

fn adjoint_consistency() -> Outcome {
    let mut notes = Vec::new();
    let ns = [2usize, 4, 8, 16, 32];
    let gaps: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let d = decay_param_gradient(n, GradientMode::Discrete);
            let a = decay_param_gradient(n, GradientMode::Adjoint);
            (a - d).abs() / d.abs()
        })
        .collect();
    let ratios: Vec<f64> = gaps.windows(2).map(|w| w[0] / w[1]).collect();
    let decay_ok = ratios.iter().all(|r| (1.6..=2.4).contains(r));
    notes.push(format!("decay ratios {:?}", ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()));

    let mlp_gap = |n: usize| {
        let mut grads = Vec::new();
        for mode in [GradientMode::Discrete, GradientMode::Adjoint] {
            let mut store = ParamStore::new();
            let net = random_net(&mut store, 3, 4, 21);
            let h0 = Matrix::row_vector(&[0.5, -0.5, 0.2]);
            let sol = euler_solve(&net, &store, &h0, 0.0, 2.0, n, true).unwrap();
            let a0 = ode_gradients(&net, &mut store, &sol, &Matrix::row_vector(&[1.0, 1.0, 1.0]), mode).unwrap();
            let mut all = a0.into_vec();
            for p in store.iter() {
                all.extend_from_slice(&p.grad);
            }
            grads.push(all);
        }
        let num = grads[0].iter().zip(&grads[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        num / grads[0].iter().map(|a| a * a).sum::<f64>().sqrt()
    };
    let mlp: Vec<f64> = [8, 16, 32, 64].iter().map(|&n| mlp_gap(n)).collect();
    let mlp_ratios: Vec<f64> = mlp.windows(2).map(|w| w[0] / w[1]).collect();
    let mlp_ok = mlp_ratios.iter().all(|r| (1.6..=2.4).contains(r));
    notes.push(format!("MLP ratios {:?}", mlp_ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()));

    let mut worst = 0.0f64;
    for seed in 0..4 {
        let mut store = ParamStore::new();
        let net = random_net(&mut store, 3, 4, seed);
        store.insert("h0", vec![1, 3], vec![0.4, -0.3, 0.8]).unwrap();
        let w = [0.7, -1.1, 0.4];
        let loss = |s: &ParamStore| -> irregts::Result<f64> {
            let h0 = Matrix::row_vector(&s.by_name("h0").unwrap().value);
            Ok(dot(euler_solve(&net, s, &h0, 1.0, 3.5, 5, false)?.h1.as_slice(), &w))
        };
        let h0 = Matrix::row_vector(&store.by_name("h0").unwrap().value.clone());
        let sol = euler_solve(&net, &store, &h0, 1.0, 3.5, 5, true).unwrap();
        store.zero_grads();
        let a0 = ode_gradients(&net, &mut store, &sol, &Matrix::row_vector(&w), GradientMode::Discrete).unwrap();
        store.by_name_mut("h0").unwrap().grad = a0.into_vec();
        let report = grad_check(&store, loss, 1e-6).map_err(|e| e.to_string())?;
        worst = worst.max(report.max_rel_err);
    }
    notes.push(format!("discrete vs finite differences {worst:.2e}"));
    check(decay_ok && mlp_ok && worst < 1e-6, notes.join("; "))
}

fn random_series(n: usize, d: usize, k: usize, seed: u64) -> Vec<TimeSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let horizon = rng.random_range(5..40);
            let mut timestamps: Vec<usize> = (0..=horizon).filter(|_| rng.random::<f64>() < 0.4).collect();
            if timestamps.is_empty() {
                timestamps.push(rng.random_range(0..=horizon));
            }
            TimeSeries {
                id: format!("r{i}"),
                label: rng.random_range(0..k),
                observations: timestamps.iter().map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect(),
                timestamps,
                horizon,
            }
        })
        .collect()
}

fn zero_dynamics_equivalence() -> Outcome {
    let series = random_series(100, 6, 4, 9);
    let refs: Vec<&TimeSeries> = series.iter().collect();
    let base = ModelConfig {
        num_classes: 4,
        feature_dim: 6,
        init_sigma: 0.1,
        seed: 3,
        ..ModelConfig::default()
    };
    let mut compared = 0;
    for cell in [CellKind::Tanh, CellKind::Lstm, CellKind::Gru] {
        let (ode, mut ode_store) = Network::build(ModelConfig { cell, ode_enabled: true, ..base.clone() }).map_err(|e| e.to_string())?;
        let (rnn, rnn_store) = Network::build(ModelConfig { cell, ode_enabled: false, ..base.clone() }).map_err(|e| e.to_string())?;
        ode.dynamics.as_ref().unwrap().zero_output(&mut ode_store);
        for mode in [BnMode::Eval, BnMode::Train] {
            let opts = ForwardOptions {
                mode,
                record: true,
                ..ForwardOptions::eval()
            };
            let a = ode.forward(&ode_store, &refs, &opts).map_err(|e| e.to_string())?;
            let b = rnn.forward(&rnn_store, &refs, &opts).map_err(|e| e.to_string())?;
            if a.trajectories != b.trajectories || a.logits != b.logits || a.final_state != b.final_state {
                return Err(format!("{cell} in {mode:?} mode differs"));
            }
            compared += 1;
        }
    }
    Ok(format!("100 series, {compared} cell/mode pairs bit-identical"))
}

fn schedule_check() -> Outcome {
    let ratio = lr_schedule(1400, 0.07, 0.9995) / lr_schedule(0, 0.07, 0.9995);
    check((0.496..=0.498).contains(&ratio), format!("ratio {ratio:.6}"))
}

fn brute_force(preds: &[usize], labels: &[usize], k: usize) -> (f64, f64) {
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    let mut f1s = Vec::new();
    for c in 0..k {
        let tp = preds.iter().zip(labels).filter(|(p, l)| **p == c && **l == c).count() as f64;
        let fp = preds.iter().zip(labels).filter(|(p, l)| **p == c && **l != c).count() as f64;
        let fn_ = preds.iter().zip(labels).filter(|(p, l)| **p != c && **l == c).count() as f64;
        if tp + fp + fn_ == 0.0 {
            continue;
        }
        f1s.push(2.0 * tp / (2.0 * tp + fp + fn_));
    }
    (correct as f64 / preds.len() as f64, f1s.iter().sum::<f64>() / f1s.len() as f64)
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = rng.random_range(1..8);
        let n = rng.random_range(1..200);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let preds: Vec<usize> = labels
            .iter()
            .map(|&l| if rng.random::<f64>() < 0.6 { l } else { rng.random_range(0..k) })
            .collect();
        let cm = confusion(&preds, &labels, k).map_err(|e| e.to_string())?;
        let (acc, f1) = brute_force(&preds, &labels, k);
        worst = worst
            .max((accuracy(&cm).unwrap() - acc).abs())
            .max((macro_f1(&cm).unwrap() - f1).abs());
    }
    let hand = ConfusionMatrix {
        counts: vec![vec![1, 1], vec![0, 2]],
    };
    let (acc, f1) = (accuracy(&hand).unwrap(), macro_f1(&hand).unwrap());
    check(
        worst <= 1e-12 && acc == 0.75 && (f1 - 0.73333).abs() <= 1e-5,
        format!("1000 random sets, worst deviation {worst:.1e}; hand example accuracy {acc}, macro-F1 {f1:.5}"),
    )
}

const BENCH_SEEDS: [u64; 3] = [0, 1, 2];
const BUDGET: Duration = Duration::from_secs(15 * 60);

/// Trained once and shared by the sparsity and early-classification checks.
struct Bench {
    /// (model, sparsity) → per-seed test accuracy on matched-sparsity data.
    acc: BTreeMap<(String, String), Vec<f64>>,
    /// model → per-seed accuracy on the leading half of each test season.
    early: BTreeMap<String, Vec<f64>>,
    slowest: (String, Duration),
}

fn bench_config() -> (ModelConfig, TrainConfig) {
    let model = ModelConfig {
        num_classes: 4,
        feature_dim: 6,
        ..ModelConfig::default()
    };
    let train = TrainConfig {
        lr0: 0.003,
        epochs: 30,
        ..TrainConfig::default()
    };
    (model, train)
}

fn run_bench() -> Result<Bench, String> {
    let err = |e: irregts::Error| e.to_string();
    let ds = generate(&SynthSpec::default()).map_err(err)?;
    let parts = split(&ds, SplitFractions { train: 2.0 / 3.0, val: 1.0 / 6.0, test: 1.0 / 6.0 }, 0).map_err(err)?;
    if (parts.train.len(), parts.test.len()) != (2000, 500) {
        return Err(format!("split gave {} train / {} test", parts.train.len(), parts.test.len()));
    }
    let (base, tcfg) = bench_config();
    let mut bench = Bench {
        acc: BTreeMap::new(),
        early: BTreeMap::new(),
        slowest: (String::new(), Duration::ZERO),
    };
    let early_test = early_test_set(&parts.test, 0.5).map_err(err)?;
    let runs: [(&str, &[f64]); 3] = [("ode-gru", &[1.0, 0.25]), ("gru-dt", &[1.0, 0.25]), ("gru", &[1.0])];
    for (name, levels) in runs {
        let mcfg = ModelConfig::from_name(name, &base).map_err(err)?;
        for &level in levels {
            for seed in BENCH_SEEDS {
                let sparse = |d: &Dataset| sparsify_dataset(d, level, seed);
                let (train, val, test) = (sparse(&parts.train).map_err(err)?, sparse(&parts.val).map_err(err)?, sparse(&parts.test).map_err(err)?);
                let start = Instant::now();
                let enc = train_model(&mcfg, &tcfg, seed, &train, Some(&val)).map_err(err)?;
                let took = start.elapsed();
                if took > bench.slowest.1 {
                    bench.slowest = (format!("{name} sparsity {level} seed {seed}"), took);
                }
                let acc = run_eval(&enc, &test).map_err(err)?.accuracy;
                bench.acc.entry((name.to_string(), level.to_string())).or_default().push(acc);
                if level == 1.0 {
                    let early = run_eval(&enc, &early_test).map_err(err)?.accuracy;
                    bench.early.entry(name.to_string()).or_default().push(early);
                }
                println!(
                    "    {name:<8} sparsity {level:<4} seed {seed}: accuracy {acc:.4} ({:.0}s)",
                    took.as_secs_f64()
                );
            }
        }
    }
    Ok(bench)
}

fn bench() -> &'static Result<Bench, String> {
    static BENCH: OnceLock<Result<Bench, String>> = OnceLock::new();
    BENCH.get_or_init(run_bench)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn directional_experiment() -> Outcome {
    let b = bench().as_ref().map_err(Clone::clone)?;
    let m = |model: &str, level: &str| mean(&b.acc[&(model.to_string(), level.to_string())]);
    let (ode, gru) = (m("ode-gru", "1"), m("gru", "1"));
    let gap_dense = ode - m("gru-dt", "1");
    let gap_sparse = m("ode-gru", "0.25") - m("gru-dt", "0.25");
    let in_budget = b.slowest.1 <= BUDGET;
    check(
        ode >= gru && gap_sparse > gap_dense && in_budget,
        format!(
            "ODE-GRU {ode:.4} vs GRU {gru:.4}; gap to GRU-dt {gap_dense:+.4} dense, {gap_sparse:+.4} at sparsity 0.25; slowest run {} {:.0}s",
            b.slowest.0,
            b.slowest.1.as_secs_f64()
        ),
    )
}

fn early_classification() -> Outcome {
    let b = bench().as_ref().map_err(Clone::clone)?;
    let drop = |model: &str| mean(&b.acc[&(model.to_string(), "1".to_string())]) - mean(&b.early[model]);
    let (ode, base) = (drop("ode-gru"), drop("gru-dt"));
    check(
        ode < base,
        format!("accuracy drop at 50%: ODE-GRU {ode:.4}, GRU-dt (hold last) {base:.4}"),
    )
}

fn small_data(n: usize) -> Dataset {
    generate(&SynthSpec {
        n_series: n,
        length: 20,
        seed: 4,
        ..SynthSpec::default()
    })
    .unwrap()
}

fn small_model(name: &str) -> ModelConfig {
    let base = ModelConfig {
        hidden_dim: 8,
        f_theta_units: 16,
        num_classes: 4,
        feature_dim: 6,
        ..ModelConfig::default()
    };
    ModelConfig::from_name(name, &base).unwrap()
}

fn regularizer_sweep() -> Outcome {
    let ds = small_data(300);
    let parts = split(&ds, SplitFractions::default(), 1).map_err(|e| e.to_string())?;
    let grid = vec![0.5, 0.65, 0.75, 0.9, 1.0];
    let train = TrainConfig {
        lr0: 0.01,
        epochs: 3,
        batch_size: Some(64),
        ..TrainConfig::default()
    };
    let spec = SweepSpec {
        kind: SweepKind::Keepprob,
        models: vec![("ode-gru".into(), small_model("ode-gru")), ("gru-dt".into(), small_model("gru-dt"))],
        grid: grid.clone(),
        seeds: vec![0, 1, 2],
        train: train.clone(),
        jobs: 1,
    };
    let data = SweepData {
        train: parts.train.clone(),
        val: Some(parts.val.clone()),
        test: parts.test.clone(),
    };
    let report = sweep(&spec, &data).map_err(|e| e.to_string())?;
    let json: serde_json::Value = serde_json::from_str(&report.to_json().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let csv_rows = report.runs_csv().map_err(|e| e.to_string())?.lines().count() - 1;
    let valid = report.runs.len() == 2 * grid.len() * 3
        && report.differences.len() == grid.len() * 3
        && csv_rows == report.runs.len() + report.differences.len()
        && report.summary.iter().all(|r| r.std >= 0.0 && r.n_seeds == 3 && r.mean.is_finite())
        && json["summary"].as_array().is_some_and(|a| a.len() == report.summary.len());

    let mcfg = small_model("ode-gru");
    let with_p1 = fit(&parts.train, Some(&parts.val), &mcfg, &TrainConfig { keep_prob: 1.0, ..train.clone() }).map_err(|e| e.to_string())?;
    let bypass = fit(&parts.train, Some(&parts.val), &mcfg, &TrainConfig { regularize: false, ..train }).map_err(|e| e.to_string())?;
    let identical = with_p1.history == bypass.history
        && with_p1.encoder.params == bypass.encoder.params
        && with_p1.encoder.net.bn_update.running == bypass.encoder.net.bn_update.running;
    check(
        valid && identical,
        format!(
            "report valid: {valid} ({} runs, {} difference rows, {} summary rows); p=1 identical to bypass: {identical}",
            report.runs.len(),
            report.differences.len(),
            report.summary.len()
        ),
    )
}

fn cli(args: &[&str]) -> Result<(), String> {
    let mut argv = vec!["irregts"];
    argv.extend_from_slice(args);
    match run_command(argv) {
        0 => Ok(()),
        code => Err(format!("`{}` exited with {code}", args.join(" "))),
    }
}

fn artifacts(dir: &Path) -> Result<(), String> {
    let s = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let small = ["--hidden", "6", "--units", "8", "--epochs", "2", "--lr", "0.003"];
    cli(&["generate", "--n", "150", "--seed", "7", "--out", &s("data.jsonl")])?;
    let mut train = vec!["train", "--data", &s("data.jsonl")].into_iter().map(String::from).collect::<Vec<_>>();
    train.extend(["--out".into(), s("model.ckpt")]);
    train.extend(small.iter().map(|a| a.to_string()));
    cli(&train.iter().map(String::as_str).collect::<Vec<_>>())?;
    cli(&["eval", "--model", &s("model.ckpt"), "--data", &s("data.jsonl"), "--out", &s("metrics")])?;
    let mut sw = vec!["sweep", "--kind", "sparsity", "--grid", "1,0.5", "--models", "ode-gru,gru", "--seeds", "2", "--data"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    sw.extend([s("data.jsonl"), "--out".into(), s("sweep")]);
    sw.extend(small.iter().map(|a| a.to_string()));
    cli(&sw.iter().map(String::as_str).collect::<Vec<_>>())?;
    cli(&["plot", "--summary", &s("sweep_summary.csv"), "--out", &s("sweep.svg")])?;
    cli(&["plot", "--confusion", &s("metrics_cm.csv"), "--out", &s("cm.svg")])?;
    cli(&["gradcheck", "--out", &s("gradcheck.json")])
}

fn reproducibility() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        artifacts(d.path())?;
    }
    let mut names: Vec<String> = fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| fs::read(dirs[0].path().join(n)).ok() != fs::read(dirs[1].path().join(n)).ok())
        .collect();

    let ds = small_data(200);
    let text = to_jsonl(&ds).map_err(|e| e.to_string())?;
    let back = from_jsonl(&text).map_err(|e| e.to_string())?;
    let jsonl_ok = back == ds && to_jsonl(&back).map_err(|e| e.to_string())? == text;

    let mut ckpt_ok = true;
    let tmp = tempfile::tempdir().unwrap();
    for name in ["ode-gru", "lstm-pe", "rnn-dt"] {
        let mut enc = SequenceEncoder::new(small_model(name)).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in enc.params.iter_mut() {
            p.value.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
        let (a, b) = (tmp.path().join(format!("{name}.a")), tmp.path().join(format!("{name}.b")));
        save_checkpoint(&a, &enc, BTreeMap::new()).map_err(|e| e.to_string())?;
        let (loaded, _) = load_checkpoint(&a).map_err(|e| e.to_string())?;
        save_checkpoint(&b, &loaded, BTreeMap::new()).map_err(|e| e.to_string())?;
        let refs: Vec<&TimeSeries> = ds.series.iter().take(20).collect();
        ckpt_ok &= loaded.params == enc.params
            && fs::read(&a).unwrap() == fs::read(&b).unwrap()
            && loaded.predict_batch(&refs).unwrap() == enc.predict_batch(&refs).unwrap();
    }
    check(
        differing.is_empty() && jsonl_ok && ckpt_ok,
        format!(
            "{} artifacts from two CLI runs, differing {differing:?}; JSONL lossless {jsonl_ok}; checkpoint lossless {ckpt_ok}",
            names.len()
        ),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 11] = [
        (1, "gradient oracle", gradient_oracle),
        (2, "cell closed forms", cell_closed_forms),
        (3, "solver order", solver_order),
        (4, "adjoint consistency", adjoint_consistency),
        (5, "zero-dynamics equivalence", zero_dynamics_equivalence),
        (6, "schedule half-life", schedule_check),
        (7, "metric oracle", metric_oracle),
        (8, "directional experiment", directional_experiment),
        (9, "early classification", early_classification),
        (10, "regularizer sweep", regularizer_sweep),
        (11, "reproducibility", reproducibility),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion check(s) failed");
        std::process::exit(1);
    }
}
