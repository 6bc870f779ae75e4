use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use edgespeech::arch::{build_network, builtin_spec, parse_spec, verify_params, ArchitectureSpec, Classifier, Network};
use edgespeech::data::{
    evaluate, ingest_speech_commands, load_checkpoint, predict, save_checkpoint, CheckpointMeta, LabelMap, Split,
    TrainConfig,
};
use edgespeech::explore::{
    estimate_macs, explore, Budget, Candidate, Evaluator, Requirements, TrainingEvaluator, UConfig, WidthSumEvaluator,
};
use edgespeech::frontend::preprocess;
use edgespeech::nn::{argmax, ParamMode};
use edgespeech::{Error, Tensor};
use serde_json::{json, Value};

use crate::{ArchArgs, BenchArgs, Cli, Command, EvalArgs, EvaluatorKind, ExploreArgs, Failure, PredictArgs, PreprocessArgs, TrainArgs};

type Outcome = Result<(), Failure>;

pub fn run(cli: &Cli) -> Outcome {
    let out = Output { json: cli.json };
    match &cli.command {
        Command::Preprocess(a) => cmd_preprocess(a, &out),
        Command::VerifyArch(a) => cmd_verify_arch(a, &out),
        Command::Train(a) => cmd_train(a, &out),
        Command::Eval(a) => cmd_eval(a, &out),
        Command::Predict(a) => cmd_predict(a, &out),
        Command::Explore(a) => cmd_explore(a, &out),
        Command::Bench(a) => cmd_bench(a, &out),
    }
}

struct Output {
    json: bool,
}

impl Output {
    /// Resolved configuration on stderr so stdout stays parseable.
    fn header(&self, command: &str, config: Value) {
        eprintln!("# esn {command} {config}");
    }

    fn emit(&self, value: &Value, text: impl FnOnce() -> String) {
        if self.json {
            println!("{}", serde_json::to_string_pretty(value).expect("json value"));
        } else {
            println!("{}", text());
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Failure {
    Failure::Lib(Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_spec(path: &Path) -> Result<ArchitectureSpec, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(parse_spec(&text)?)
}

fn resolve_arch(a: &ArchArgs) -> Result<ArchitectureSpec, Failure> {
    match (&a.arch, &a.spec) {
        (Some(name), None) => Ok(builtin_spec(name)?),
        (None, Some(path)) => read_spec(path),
        _ => Err(Failure::Usage("pass exactly one of --arch or --spec".into())),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Lib(Error::Format(e.to_string())))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn to_json(value: &impl serde::Serialize) -> Value {
    serde_json::to_value(value).expect("serializable")
}

/// Network from `--spec` plus weights, or from the checkpoint sidecar.
fn load_model(weights: &Path, spec: Option<&PathBuf>) -> Result<Network, Failure> {
    match spec {
        Some(path) => {
            let spec = read_spec(path)?;
            let mut net = Network::zeroed(&spec)?;
            net.load_weights(weights)?;
            Ok(net)
        }
        None => Ok(load_checkpoint(weights)?.0),
    }
}

fn cmd_preprocess(a: &PreprocessArgs, out: &Output) -> Outcome {
    out.header("preprocess", json!({ "input": a.input, "output": a.output }));
    let mfcc = preprocess(&a.input)?;
    mfcc.write_to(&a.output)?;
    let value = json!({
        "input": a.input,
        "output": a.output,
        "frames": mfcc.frame_count(),
        "coeffs": mfcc.coeff_count(),
    });
    out.emit(&value, || {
        format!(
            "wrote {} ({} x {} MFCC)",
            a.output.display(),
            mfcc.frame_count(),
            mfcc.coeff_count()
        )
    });
    Ok(())
}

fn cmd_verify_arch(a: &ArchArgs, out: &Output) -> Outcome {
    out.header("verify-arch", json!({ "arch": a.arch, "spec": a.spec }));
    let spec = resolve_arch(a)?;
    let report = verify_params(&spec)?;
    let mut value = to_json(&report);
    value["passed"] = json!(report.passed());
    out.emit(&value, || report.render_table());
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Verify)
    }
}

fn cmd_train(a: &TrainArgs, out: &Output) -> Outcome {
    let spec = resolve_arch(&a.arch)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        seed: a.seed,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    out.header(
        "train",
        json!({ "data_dir": a.data_dir, "arch": spec.name, "output": a.output, "config": cfg }),
    );
    let splits = ingest_speech_commands(&a.data_dir, &LabelMap::default())?;
    let mut net = build_network(&spec, a.seed)?;
    let val = (!splits.val.is_empty()).then_some(&splits.val);
    let history = edgespeech::data::train(&mut net, &splits.train, val, &cfg)?;
    let last = history.last().expect("at least one epoch");
    let meta = CheckpointMeta {
        spec: spec.clone(),
        epoch: last.epoch + 1,
        val_accuracy: last.val_accuracy,
        config: cfg,
    };
    save_checkpoint(&a.output, &net, &meta)?;
    let value = json!({
        "checkpoint": a.output,
        "train_examples": splits.train.len(),
        "val_examples": splits.val.len(),
        "history": history,
    });
    out.emit(&value, || {
        let mut s = format!("train {} / val {} examples\n", splits.train.len(), splits.val.len());
        for e in &history.epochs {
            s += &format!(
                "epoch {:>3}  lr {:<8}  loss {:.4}  train {:.4}  val {}\n",
                e.epoch,
                e.learning_rate,
                e.loss,
                e.train_accuracy,
                e.val_accuracy.map_or("-".to_string(), |v| format!("{v:.4}"))
            );
        }
        s + &format!("wrote {}", a.output.display())
    });
    Ok(())
}

fn cmd_eval(a: &EvalArgs, out: &Output) -> Outcome {
    let split: Split = a.split.parse()?;
    out.header(
        "eval",
        json!({ "weights": a.weights, "spec": a.spec, "data_dir": a.data_dir, "split": split, "min_acc": a.min_acc }),
    );
    let net = load_model(&a.weights, a.spec.as_ref())?;
    let splits = ingest_speech_commands(&a.data_dir, &LabelMap::default())?;
    let data = splits.get(split);
    let accuracy = evaluate(&net, data)?;
    let passed = a.min_acc.is_none_or(|m| accuracy >= m);
    let value = json!({ "split": split, "examples": data.len(), "accuracy": accuracy, "passed": passed });
    out.emit(&value, || format!("{split} accuracy {accuracy:.4} ({} examples)", data.len()));
    if passed {
        Ok(())
    } else {
        Err(Failure::Verify)
    }
}

fn cmd_predict(a: &PredictArgs, out: &Output) -> Outcome {
    out.header("predict", json!({ "weights": a.weights, "spec": a.spec, "input": a.input }));
    let net = load_model(&a.weights, a.spec.as_ref())?;
    let labels = LabelMap::default();
    let p = predict(&net, &labels, &preprocess(&a.input)?)?;
    let value = to_json(&p);
    out.emit(&value, || {
        let mut s = format!("{}\n", p.label);
        for (name, prob) in labels.names().iter().zip(&p.probabilities) {
            s += &format!("  {name:<10} {prob:.4}\n");
        }
        s.trim_end().to_string()
    });
    Ok(())
}

fn resolve_prototype(name: &str) -> Result<ArchitectureSpec, Failure> {
    let path = Path::new(name);
    if path.exists() {
        read_spec(path)
    } else {
        Ok(builtin_spec(name)?)
    }
}

fn cmd_explore(a: &ExploreArgs, out: &Output) -> Outcome {
    let prototype = resolve_prototype(&a.arch_prototype)?;
    let req = Requirements {
        min_val_accuracy: a.min_val_acc,
        max_params: a.max_params,
        max_macs: a.max_macs,
    };
    req.validate()?;
    let budget = Budget {
        generations: a.generations,
        candidates_per_gen: a.per_gen,
        seed: a.seed,
        reverify_top: a.reverify_top,
        ..Budget::default()
    };
    let ucfg = UConfig::default();
    out.header(
        "explore",
        json!({
            "prototype": prototype.name,
            "requirements": req,
            "budget": budget,
            "u": ucfg,
            "evaluator": format!("{:?}", a.evaluator).to_lowercase(),
            "data_dir": a.data_dir,
            "epochs": a.epochs,
            "reverify_epochs": a.reverify_epochs,
            "out": a.out,
        }),
    );
    let evaluator: Box<dyn Evaluator> = match a.evaluator {
        EvaluatorKind::Synthetic => Box::new(WidthSumEvaluator::default()),
        EvaluatorKind::Train => {
            let dir = a
                .data_dir
                .as_ref()
                .ok_or_else(|| Failure::Usage("--evaluator train needs --data-dir".into()))?;
            let splits = ingest_speech_commands(dir, &LabelMap::default())?;
            let proxy = TrainConfig {
                epochs: a.epochs,
                seed: a.seed,
                ..TrainConfig::default()
            };
            proxy.validate()?;
            Box::new(TrainingEvaluator {
                train: splits.train,
                val: splits.val,
                full: Some(TrainConfig {
                    epochs: a.reverify_epochs,
                    ..proxy.clone()
                }),
                proxy,
            })
        }
    };
    let result = explore(&prototype, &req, &ucfg, &budget, evaluator.as_ref())?;
    fs::create_dir_all(&a.out).map_err(|e| io_err(&a.out, e))?;
    let mut rows = Vec::with_capacity(result.candidates.len());
    for (rank, c) in result.candidates.iter().enumerate() {
        rows.push(write_candidate(&a.out, rank, c)?);
    }
    let summary = json!({
        "prototype": prototype.name,
        "evaluated": result.evaluated,
        "best_so_far": result.best_so_far,
        "candidates": rows,
    });
    write_json(&a.out.join("summary.json"), &summary)?;
    out.emit(&summary, || {
        let mut s = format!("{} evaluated, {} kept\n", result.evaluated, result.candidates.len());
        s += &format!("{:>4}  {:<32} {:>8} {:>10} {:>12} {:>9}\n", "rank", "name", "acc", "params", "macs", "U");
        for (rank, c) in result.candidates.iter().enumerate() {
            s += &format!(
                "{:>4}  {:<32} {:>8.4} {:>10} {:>12} {:>9.3}\n",
                rank,
                c.spec.name,
                c.metrics.val_accuracy,
                c.metrics.param_count,
                c.metrics.mac_count,
                c.u_score
            );
        }
        s + &format!("wrote {}", a.out.display())
    });
    Ok(())
}

fn write_candidate(root: &Path, rank: usize, c: &Candidate) -> Result<Value, Failure> {
    let dir_name = format!("rank-{rank:03}");
    let dir = root.join(&dir_name);
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    write_json(&dir.join("spec.json"), &c.spec)?;
    match &c.network {
        Some(net) => net.save_weights(dir.join("weights.esnw"))?,
        None => build_network(&c.spec, c.seed)?.save_weights(dir.join("weights.esnw"))?,
    }
    let metrics = json!({
        "name": c.spec.name,
        "seed": c.seed,
        "generation": c.generation,
        "metrics": c.metrics,
        "u_score": c.u_score,
    });
    write_json(&dir.join("metrics.json"), &metrics)?;
    let mut row = metrics;
    row["rank"] = json!(rank);
    row["dir"] = json!(dir_name);
    Ok(row)
}

/// Nearest-rank percentile of sorted values.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn time_forward(net: &dyn Classifier, input: &Tensor, iters: usize) -> Result<Vec<f64>, Failure> {
    net.predict_proba(input)?;
    let mut times = Vec::with_capacity(iters);
    for _ in 0..iters {
        let t = Instant::now();
        std::hint::black_box(net.predict_proba(std::hint::black_box(input))?);
        times.push(t.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(f64::total_cmp);
    Ok(times)
}

fn cmd_bench(a: &BenchArgs, out: &Output) -> Outcome {
    if a.iters == 0 {
        return Err(Failure::Usage("--iters must be at least 1".into()));
    }
    let spec = resolve_arch(&a.arch)?;
    out.header(
        "bench",
        json!({ "arch": spec.name, "iters": a.iters, "fold": a.fold, "weights": a.weights, "seed": a.seed }),
    );
    let mut net = build_network(&spec, a.seed)?;
    if let Some(w) = &a.weights {
        net.load_weights(w)?;
    }
    let [c, h, w] = spec.input;
    let input = Tensor::from_fn(&[1, c, h, w], |i| ((i * 7919 % 1000) as f32 / 500.0) - 1.0);
    let params = net.param_count(ParamMode::Paper);
    let macs = estimate_macs(&spec, spec.input)?;
    let mut value = json!({ "arch": spec.name, "iters": a.iters, "folded": a.fold, "params": params, "macs": macs });
    let times = if a.fold {
        let folded = net.fold()?;
        let p = net.predict_proba(&input)?;
        let q = folded.predict_proba(&input)?;
        let diff = p.max_abs_diff(&q);
        value["fold_max_abs_diff"] = json!(diff);
        value["fold_argmax_agrees"] = json!(argmax(p.data()) == argmax(q.data()));
        time_forward(&folded, &input, a.iters)?
    } else {
        time_forward(&net, &input, a.iters)?
    };
    let (median, p95) = (percentile(&times, 50.0), percentile(&times, 95.0));
    value["median_ms"] = json!(median);
    value["p95_ms"] = json!(p95);
    out.emit(&value, || {
        let mut s = format!(
            "{}{}: median {median:.3} ms  p95 {p95:.3} ms over {} iters\nparams {params}  macs {macs}",
            spec.name,
            if a.fold { " (folded)" } else { "" },
            a.iters
        );
        if let Some(d) = value.get("fold_max_abs_diff") {
            s += &format!("\nfolded vs unfolded max |diff| {d}, argmax agrees {}", value["fold_argmax_agrees"]);
        }
        s
    });
    Ok(())
}
