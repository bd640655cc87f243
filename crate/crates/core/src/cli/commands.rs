use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::cli::args::*;
use crate::cli::plot::{confusion_svg, parse_summary_csv, summary_svg};
use crate::data::{generate, load_jsonl, save_jsonl, split, SynthSpec};
use crate::error::{Error, Result};
use crate::eval::sweep::early_test_set;
use crate::eval::{parse_confusion_csv, run_eval, sweep, write_metrics, SweepData, SweepSpec};
use crate::fsutil::{read_to_string, write_atomic};
use crate::model::{grad_check_suite, load_checkpoint, save_checkpoint, ModelConfig};
use crate::train::fit_with_progress;

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate_cmd(&a),
        Command::Train(a) => train_cmd(&a),
        Command::Eval(a) => eval_cmd(&a),
        Command::Sweep(a) => sweep_cmd(&a),
        Command::Plot(a) => plot_cmd(&a),
        Command::Gradcheck(a) => gradcheck_cmd(&a),
    }
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn generate_cmd(a: &GenerateArgs) -> Result<()> {
    let spec = SynthSpec {
        num_classes: a.classes,
        feature_dim: a.features,
        length: a.length,
        missing_rate: a.missing,
        noise_std: a.noise,
        n_series: a.n,
        seed: a.seed,
        ..SynthSpec::default()
    };
    let ds = generate(&spec)?;
    save_jsonl(&ds, &a.out)?;
    println!(
        "wrote {} series (K={}, d={}, missing {:.3}) to {}",
        ds.len(),
        ds.num_classes,
        ds.feature_dim,
        ds.empirical_missing_rate(),
        a.out.display()
    );
    Ok(())
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let ds = load_jsonl(&a.data)?;
    let splits = split(&ds, a.split.fractions(), a.split.split_seed)?;
    let mcfg = a.model.to_config(ds.feature_dim, ds.num_classes, a.seed);
    let tcfg = a.optim.to_config(a.seed);
    let val = (!splits.val.is_empty()).then_some(&splits.val);
    let out = fit_with_progress(&splits.train, val, &mcfg, &tcfg, &mut |r| {
        let val = match (r.val_accuracy, r.val_macro_f1) {
            (Some(acc), Some(f1)) => format!(" val acc {acc:.4} f1 {f1:.4}"),
            _ => String::new(),
        };
        eprintln!("epoch {:>3} loss {:.5}{val}", r.epoch, r.train_loss);
    })?;
    let mut meta = BTreeMap::new();
    meta.insert("model".to_string(), json!(mcfg.name()));
    meta.insert("train_config".to_string(), serde_json::to_value(&tcfg)?);
    meta.insert("split".to_string(), serde_json::to_value(a.split.fractions())?);
    meta.insert("split_seed".to_string(), json!(a.split.split_seed));
    meta.insert("best_epoch".to_string(), json!(out.history.best_epoch));
    meta.insert("best_val_macro_f1".to_string(), json!(out.history.best_val_macro_f1));
    save_checkpoint(&a.out, &out.encoder, meta)?;
    let history = a.history.clone().unwrap_or_else(|| with_suffix(&a.out, ".history.csv"));
    write_atomic(&history, out.history.to_csv().as_bytes())?;
    println!("wrote {} and {}", a.out.display(), history.display());
    Ok(())
}

fn eval_cmd(a: &EvalArgs) -> Result<()> {
    let (enc, _) = load_checkpoint(&a.model)?;
    let ds = load_jsonl(&a.data)?;
    let mut data = match a.split {
        SplitName::All => ds,
        other => {
            let s = split(&ds, a.fractions.fractions(), a.fractions.split_seed)?;
            match other {
                SplitName::Train => s.train,
                SplitName::Val => s.val,
                _ => s.test,
            }
        }
    };
    if a.truncate < 1.0 {
        data = early_test_set(&data, a.truncate)?;
    } else if a.truncate != 1.0 {
        return Err(Error::Config(format!("--truncate {} outside (0, 1]", a.truncate)));
    }
    let m = run_eval(&enc, &data)?;
    write_metrics(&a.out, &m)?;
    println!("n {} accuracy {:.4} macro_f1 {:.4}", m.n, m.accuracy, m.macro_f1);
    Ok(())
}

fn sweep_cmd(a: &SweepArgs) -> Result<()> {
    let ds = match &a.data {
        Some(path) => load_jsonl(path)?,
        None => generate(&SynthSpec {
            n_series: a.n,
            ..SynthSpec::default()
        })?,
    };
    let splits = split(&ds, a.split.fractions(), a.split.split_seed)?;
    let base = a.model.to_config(ds.feature_dim, ds.num_classes, 0);
    let models = a
        .models
        .iter()
        .map(|n| Ok((n.clone(), ModelConfig::from_name(n, &base)?)))
        .collect::<Result<Vec<_>>>()?;
    let spec = SweepSpec {
        kind: a.kind,
        models,
        grid: a.grid.clone().unwrap_or_else(|| a.kind.default_grid()),
        seeds: a.seed_list()?,
        train: a.optim.to_config(0),
        jobs: a.jobs,
    };
    let data = SweepData {
        train: splits.train,
        val: (!splits.val.is_empty()).then_some(splits.val),
        test: splits.test,
    };
    let report = sweep(&spec, &data)?;
    let runs = with_suffix(&a.out, ".csv");
    let summary = with_suffix(&a.out, "_summary.csv");
    let json = with_suffix(&a.out, ".json");
    write_atomic(&runs, report.runs_csv()?.as_bytes())?;
    write_atomic(&summary, report.summary_csv()?.as_bytes())?;
    write_atomic(&json, report.to_json()?.as_bytes())?;
    for r in report.summary.iter().filter(|r| r.metric == "accuracy") {
        println!("{:<20} {:>6} accuracy {:.4} ± {:.4}", r.model, r.condition, r.mean, r.std);
    }
    println!("wrote {}, {} and {}", runs.display(), summary.display(), json.display());
    Ok(())
}

fn plot_cmd(a: &PlotArgs) -> Result<()> {
    let (input, svg) = match (&a.summary, &a.confusion) {
        (Some(path), _) => {
            let rows = parse_summary_csv(&read_to_string(path)?)?;
            let title = a.title.clone().unwrap_or_else(|| file_name(path));
            (path, summary_svg(&rows, &a.metric, &title)?)
        }
        (None, Some(path)) => {
            let cm = parse_confusion_csv(&read_to_string(path)?)?;
            let title = a.title.clone().unwrap_or_else(|| file_name(path));
            (path, confusion_svg(&cm, &title)?)
        }
        (None, None) => return Err(Error::Config("plot needs --summary or --confusion".into())),
    };
    write_atomic(&a.out, svg.as_bytes())?;
    println!("rendered {} to {}", input.display(), a.out.display());
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn gradcheck_cmd(a: &GradcheckArgs) -> Result<()> {
    let results = grad_check_suite(a.tol)?;
    let mut failed = 0;
    for (name, r) in &results {
        println!(
            "{:<4} {:<12} max rel err {:.3e} over {} entries",
            if r.pass { "ok" } else { "FAIL" },
            name,
            r.max_rel_err,
            r.checked
        );
        failed += usize::from(!r.pass);
    }
    if let Some(out) = &a.out {
        let report: Vec<_> = results.iter().map(|(n, r)| json!({ "model": n, "report": r })).collect();
        write_atomic(out, (serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
    }
    if failed > 0 {
        return Err(Error::Numeric(format!("{failed} of {} gradient checks failed", results.len())));
    }
    Ok(())
}
