use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::cli::{
    BlobArgs, Cli, Command, CompareArgs, EvalArgs, IbCurveArgs, MineArgs, QuantizeArgs, QuantizeMode, SynthArgs,
    TrainArgs,
};
use super::{runtime, validation, write_csv, write_text, HarnessError, Report, Result, VERSION};
use crate::agrlearn::{
    error_rate, predict_batched, predict_contextual, predict_replicated_all, train_agrlearn, AgrLearnModel, EpochLog,
    TrainConfig,
};
use crate::data::{load_dataset, save_dataset, synth_blobs, two_blob_bayes_error, BlobSpec, Dataset};
use crate::ib::{parse_beta_grid, solve_ib_curve, solve_ib_curve_with, SolveOptions};
use crate::mine::{population_j, train_mine, DiscretePairSampler, MineConfig, MineCritic, DEFAULT_HIDDEN};
use crate::nn::ParamStore;
use crate::prob::{nats_to_bits, ConditionalDistribution, JointDistribution};
use crate::quantizer::{achievability_experiment, brute_force_optimal_code, search_space, MAX_SEARCH};
use crate::seed::SeedStream;

/// Pairs a population-J estimate is computed on.
pub const POPULATION_PAIRS: usize = 100_000;

/// Runs the parsed command, writing its outputs. Returns the numeric
/// payload of the report.
pub fn run(cli: &Cli) -> Result<Value> {
    match &cli.command {
        Command::IbCurve(a) => ib_curve(a),
        Command::Quantize(a) => quantize(a),
        Command::MineEst(a) => mine_est(a),
        Command::AgrlearnTrain(a) => agrlearn_train(a),
        Command::AgrlearnEval(a) => agrlearn_eval(a),
        Command::Compare(a) => compare(a),
        Command::SynthBlobs(a) => synth(a),
    }
}

fn invalid(stage: &'static str, message: impl Into<String>) -> HarnessError {
    HarnessError::Validation {
        stage,
        message: message.into(),
    }
}

fn load_joint(path: &Path) -> Result<JointDistribution> {
    JointDistribution::load(path).map_err(validation("load joint"))
}

#[derive(Serialize)]
struct CurveRow {
    beta: f64,
    rate_nats: f64,
    relevance_nats: f64,
    distortion_nats: f64,
    rate_bits: f64,
    relevance_bits: f64,
    distortion_bits: f64,
    converged: bool,
    iterations: usize,
}

#[derive(Serialize)]
struct EnvelopeRow {
    distortion_nats: f64,
    rate_nats: f64,
    distortion_bits: f64,
    rate_bits: f64,
}

pub fn ib_curve(a: &IbCurveArgs) -> Result<Value> {
    let start = Instant::now();
    let j = load_joint(&a.joint)?;
    let betas = parse_beta_grid(&a.beta_grid).ok_or_else(|| invalid("beta grid", format!("cannot parse {:?}", a.beta_grid)))?;
    if betas.iter().any(|b| !(*b >= 0.0)) {
        return Err(invalid("beta grid", "beta must be non-negative"));
    }
    let t_size = a.t_size.unwrap_or(j.x_size());
    if t_size == 0 {
        return Err(invalid("ib-curve", "t-size must be positive"));
    }
    if !(a.tol > 0.0) {
        return Err(invalid("ib-curve", "tol must be positive"));
    }
    let opts = SolveOptions {
        tol: a.tol,
        max_iters: a.max_iters,
    };
    let curve = solve_ib_curve_with(&j, &betas, t_size, a.restarts, a.seed, &opts).map_err(runtime("solve curve"))?;

    let rows: Vec<CurveRow> = curve
        .points
        .iter()
        .map(|p| CurveRow {
            beta: p.beta,
            rate_nats: p.rate,
            relevance_nats: p.relevance,
            distortion_nats: p.distortion,
            rate_bits: nats_to_bits(p.rate),
            relevance_bits: nats_to_bits(p.relevance),
            distortion_bits: nats_to_bits(p.distortion),
            converged: p.converged,
            iterations: p.iterations,
        })
        .collect();
    let envelope: Vec<EnvelopeRow> = curve
        .envelope
        .iter()
        .map(|v| EnvelopeRow {
            distortion_nats: v.distortion,
            rate_nats: v.rate,
            distortion_bits: nats_to_bits(v.distortion),
            rate_bits: nats_to_bits(v.rate),
        })
        .collect();
    write_csv(&a.out.join("curve.csv"), &rows)?;
    write_csv(&a.out.join("envelope.csv"), &envelope)?;

    let best = curve.best_relevance().map(|p| p.relevance).unwrap_or(0.0);
    let results = json!({
        "mutual_information_nats": curve.mutual_information,
        "mutual_information_bits": nats_to_bits(curve.mutual_information),
        "t_size": t_size,
        "points": rows.len(),
        "non_converged": curve.points.iter().filter(|p| !p.converged).count(),
        "max_relevance_nats": best,
        "envelope": envelope,
    });
    Report::new("ib-curve", a.seed, a, start.elapsed(), &results).write(&a.out.join("report.json"))?;
    Ok(results)
}

#[derive(Deserialize)]
struct EncoderFile {
    rows: Vec<Vec<f64>>,
}

fn load_encoder(path: &Path) -> Result<ConditionalDistribution> {
    let text = std::fs::read_to_string(path).map_err(validation("load encoder"))?;
    let file: EncoderFile = serde_json::from_str(&text).map_err(validation("load encoder"))?;
    ConditionalDistribution::from_rows(&file.rows).map_err(validation("load encoder"))
}

pub fn quantize(a: &QuantizeArgs) -> Result<Value> {
    let start = Instant::now();
    let j = load_joint(&a.joint)?;
    let t_size = a.t_size.unwrap_or(j.x_size());
    let results = match a.mode {
        QuantizeMode::Brute => {
            if a.n == 0 || a.codebook_size == 0 || t_size == 0 {
                return Err(invalid("quantize", "n, M and t-size must be positive"));
            }
            let space = search_space(j.x_size(), a.n, a.codebook_size, t_size);
            if !(space <= MAX_SEARCH) {
                return Err(invalid("quantize", format!("search space {space:.3e} exceeds {MAX_SEARCH:.0e}")));
            }
            let (code, d) = brute_force_optimal_code(&j, a.n, a.codebook_size, t_size).map_err(runtime("brute force"))?;
            let mi = crate::prob::mutual_information(&j);
            json!({
                "mode": "brute",
                "n": a.n,
                "codebook_size": a.codebook_size,
                "t_size": t_size,
                "rate_bits": code.rate_bits(),
                "distortion_nats": d,
                "distortion_bits": nats_to_bits(d),
                "mutual_information_nats": mi,
                "search_space": space,
                "code": code,
            })
        }
        QuantizeMode::Achievability => {
            if !(a.eps > 0.0 && a.eps < 1.0) {
                return Err(invalid("quantize", "eps must lie in (0, 1)"));
            }
            if a.n_list.is_empty() || a.n_list.contains(&0) {
                return Err(invalid("quantize", "n-list must hold positive lengths"));
            }
            let enc = match &a.encoder {
                Some(path) => load_encoder(path)?,
                None => {
                    let curve = solve_ib_curve(&j, &[a.beta], t_size, 5, a.seed).map_err(runtime("test channel"))?;
                    curve.points[0].encoder.clone()
                }
            };
            if enc.from_size() != j.x_size() {
                return Err(invalid("quantize", "encoder does not match the joint's X alphabet"));
            }
            let report = achievability_experiment(&j, &enc, a.rate_margin, &a.n_list, a.eps, a.trials, a.seed)
                .map_err(runtime("achievability"))?;
            json!({
                "mode": "achievability",
                "encoder": enc,
                "experiment": report,
            })
        }
    };
    Report::new("quantize", a.seed, a, start.elapsed(), &results).write(&a.out)?;
    Ok(results)
}

pub fn mine_est(a: &MineArgs) -> Result<Value> {
    let start = Instant::now();
    let sampler = DiscretePairSampler::named(&a.dist).map_err(validation("distribution"))?;
    let cfg = MineConfig {
        steps: a.steps,
        batch: a.batch,
        learning_rate: a.lr,
        hidden: DEFAULT_HIDDEN.to_vec(),
    };
    if a.steps == 0 || a.batch < 2 || !(a.lr > 0.0) {
        return Err(invalid("mine-est", "steps must be positive, batch at least 2, lr positive"));
    }
    let seeds = SeedStream::new(a.seed);
    let mut store = ParamStore::new();
    let critic = MineCritic::new(&mut store, "critic", sampler.pair_width(), &cfg.hidden, &mut seeds.rng("init", 0));
    let est = train_mine(&mut store, &critic, &sampler, &cfg, seeds).map_err(runtime("train critic"))?;
    let pop = population_j(&store, &critic, &sampler, POPULATION_PAIRS, &mut seeds.rng("population", 0))
        .map_err(runtime("population bound"))?;
    let truth = sampler.mutual_information();
    let results = json!({
        "distribution": a.dist,
        "estimate_nats": est.estimate,
        "analytic_nats": truth,
        "abs_error_nats": (est.estimate - truth).abs(),
        "population_j_nats": pop,
        "population_pairs": POPULATION_PAIRS,
        "final_j_nats": est.trace.last().copied(),
    });
    Report::new("mine-est", a.seed, a, start.elapsed(), &results).write(&a.out)?;
    Ok(results)
}

fn load_data(path: &Path) -> Result<Dataset> {
    load_dataset(path).map_err(validation("load dataset"))
}

/// Gives `eval` the class count of `train`, rejecting labels beyond it.
fn align_classes(eval: Dataset, classes: usize, dim: usize) -> Result<Dataset> {
    if eval.feature_dim() != dim {
        return Err(invalid(
            "load dataset",
            format!("evaluation data has {} features, expected {dim}", eval.feature_dim()),
        ));
    }
    eval.with_class_count(classes).map_err(validation("load dataset"))
}

#[derive(Serialize)]
struct MetricsRow {
    epoch: usize,
    loss_nats: f64,
    #[serde(rename = "J_nats")]
    j_nats: f64,
    omega: f64,
    test_error: Option<f64>,
}

fn metrics_rows(log: &[EpochLog]) -> Vec<MetricsRow> {
    log.iter()
        .map(|e| MetricsRow {
            epoch: e.epoch,
            loss_nats: e.loss_nats,
            j_nats: e.j_nats,
            omega: e.omega,
            test_error: e.test_error,
        })
        .collect()
}

pub fn agrlearn_train(a: &TrainArgs) -> Result<Value> {
    let start = Instant::now();
    let train = load_data(&a.data)?;
    let test = match &a.test {
        Some(p) => Some(align_classes(load_data(p)?, train.class_count(), train.feature_dim())?),
        None => None,
    };
    let cfg = TrainConfig {
        bottleneck: a.bottleneck,
        ..a.training.config(a.fold, a.alpha, a.seed)
    };
    cfg.validate().map_err(validation("train config"))?;
    let outcome = train_agrlearn(&cfg, &train, test.as_ref()).map_err(runtime("training"))?;

    let ckpt = outcome.model.to_checkpoint_json().map_err(runtime("checkpoint"))?;
    write_text(&a.out.join("checkpoint.json"), &(ckpt + "\n"))?;
    write_csv(&a.out.join("metrics.csv"), &metrics_rows(&outcome.log))?;
    let echo = json!({
        "command": "agrlearn-train",
        "version": VERSION,
        "seed": a.seed,
        "config": a,
        "train_config": cfg,
        "effective_lr_schedule": cfg.effective_schedule(),
    });
    write_text(&a.out.join("config.json"), &(serde_json::to_string_pretty(&echo).expect("json") + "\n"))?;

    let last = outcome.log.last();
    let results = json!({
        "epochs": outcome.log.len(),
        "fold": a.fold,
        "train_examples": train.len(),
        "final_loss_nats": last.map(|e| e.loss_nats),
        "final_loss_per_position_nats": last.map(|e| e.loss_nats / a.fold as f64),
        "final_j_nats": last.map(|e| e.j_nats),
        "max_j_nats": outcome.log.iter().map(|e| e.j_max).fold(f64::NEG_INFINITY, f64::max),
        "final_test_error": last.and_then(|e| e.test_error),
    });
    Report::new("agrlearn-train", a.seed, a, start.elapsed(), &results).write(&a.out.join("report.json"))?;
    Ok(results)
}

/// `replicated`, `contextual:<k>` or `batched:<k>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Replicated,
    Contextual(usize),
    Batched(usize),
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let k = |v: &str| v.parse::<usize>().ok().filter(|&k| k > 0);
        match s.split_once(':') {
            None if s == "replicated" => Some(Protocol::Replicated),
            Some(("contextual", v)) => k(v).map(Protocol::Contextual),
            Some(("batched", v)) => k(v).map(Protocol::Batched),
            _ => None,
        }
        .ok_or_else(|| format!("unknown protocol {s:?}; expected replicated, contextual:<k> or batched:<k>"))
    }
}

pub fn evaluate(model: &AgrLearnModel, ds: &Dataset, protocol: Protocol, train: Option<&Dataset>, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = SeedStream::new(seed).rng("eval", 0);
    match protocol {
        Protocol::Replicated => Ok(predict_replicated_all(model, ds)),
        Protocol::Contextual(k) => {
            let train = train.ok_or_else(|| invalid("agrlearn-eval", "contextual protocol needs --train"))?;
            (0..ds.len())
                .map(|i| predict_contextual(model, ds.feature(i), train, k, &mut rng).map_err(runtime("predict")))
                .collect()
        }
        Protocol::Batched(k) => predict_batched(model, ds, k, &mut rng).map_err(runtime("predict")),
    }
}

pub fn agrlearn_eval(a: &EvalArgs) -> Result<Value> {
    let start = Instant::now();
    let protocol: Protocol = a.protocol.parse().map_err(validation("protocol"))?;
    let text = std::fs::read_to_string(&a.model).map_err(validation("load model"))?;
    let model = AgrLearnModel::from_checkpoint_json(&text).map_err(validation("load model"))?;
    let (classes, dim) = (model.spec.classes, model.spec.feature_dim);
    let ds = align_classes(load_data(&a.data)?, classes, dim)?;
    let train = match &a.train {
        Some(p) => Some(align_classes(load_data(p)?, classes, dim)?),
        None => None,
    };
    let preds = evaluate(&model, &ds, protocol, train.as_ref(), a.seed)?;
    let nll = preds
        .iter()
        .zip(ds.labels())
        .map(|(p, &y)| -p[y].max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / ds.len() as f64;
    let results = json!({
        "protocol": a.protocol,
        "fold": model.fold(),
        "examples": ds.len(),
        "error_rate": error_rate(&preds, ds.labels()),
        "mean_nll_nats": nll,
    });
    let report = Report::new("agrlearn-eval", a.seed, a, start.elapsed(), &results);
    if let Some(path) = &a.out {
        report.write(path)?;
    }
    Ok(results)
}

fn blob_spec(b: &BlobArgs) -> BlobSpec {
    BlobSpec {
        classes: b.classes,
        per_class: b.per_class,
        dim: b.dim,
        separation: b.separation,
        noise: b.noise,
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

/// Median test error over the final (up to) 10 epochs.
fn final_error(log: &[EpochLog]) -> Option<f64> {
    let tail: Vec<f64> = log.iter().rev().take(10).filter_map(|e| e.test_error).collect();
    median(&tail)
}

pub fn compare(a: &CompareArgs) -> Result<Value> {
    let start = Instant::now();
    if a.seeds == 0 || a.fold < 1 {
        return Err(invalid("compare", "need at least one seed and a positive fold"));
    }
    let (train, test) = match (&a.data, &a.test) {
        (Some(d), Some(t)) => {
            let train = load_data(d)?;
            let test = align_classes(load_data(t)?, train.class_count(), train.feature_dim())?;
            (train, test)
        }
        (None, None) => {
            let spec = blob_spec(&a.blobs);
            let train = synth_blobs(&spec, a.blobs.data_seed).map_err(validation("synth blobs"))?;
            let test = synth_blobs(&spec, a.blobs.data_seed + 1).map_err(validation("synth blobs"))?;
            (train, test)
        }
        _ => return Err(invalid("compare", "give both --data and --test, or neither")),
    };

    let mut per_seed = Vec::with_capacity(a.seeds);
    let (mut base_errors, mut fold_errors) = (Vec::new(), Vec::new());
    for s in 0..a.seeds as u64 {
        let seed = a.seed + s;
        let mut row = json!({ "seed": seed });
        for fold in [1, a.fold] {
            let cfg = a.training.config(fold, a.alpha, seed);
            cfg.validate().map_err(validation("train config"))?;
            let out = train_agrlearn(&cfg, &train, Some(&test)).map_err(runtime("training"))?;
            let err = final_error(&out.log).expect("evaluation set present");
            let last = out.log.last().expect("at least one epoch");
            row[format!("fold_{fold}_test_error")] = json!(err);
            row[format!("fold_{fold}_loss_per_position_nats")] = json!(last.loss_nats / fold as f64);
            if fold == 1 {
                base_errors.push(err);
            }
            if fold == a.fold {
                fold_errors.push(err);
            }
        }
        per_seed.push(row);
    }
    let (m1, mn) = (median(&base_errors), median(&fold_errors));
    let direction = match (m1, mn) {
        (Some(x), Some(y)) if y < x => format!("fold-{} lower", a.fold),
        (Some(x), Some(y)) if y > x => "fold-1 lower".to_string(),
        _ => "equal".to_string(),
    };
    let bayes = (a.data.is_none() && a.blobs.classes == 2).then(|| two_blob_bayes_error(a.blobs.separation, a.blobs.noise));
    let mut results = json!({
        "fold": a.fold,
        "seeds": a.seeds,
        "per_seed": per_seed,
        "median_fold_1_test_error": m1,
        "direction": direction,
        "bayes_error": bayes,
    });
    results[format!("median_fold_{}_test_error", a.fold)] = json!(mn);
    Report::new("compare", a.seed, a, start.elapsed(), &results).write(&a.out.join("summary.json"))?;
    Ok(results)
}

pub fn synth(a: &SynthArgs) -> Result<Value> {
    let ds = synth_blobs(&blob_spec(&a.blobs), a.blobs.data_seed).map_err(validation("synth blobs"))?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(runtime("create output directory"))?;
    }
    save_dataset(&ds, &a.out).map_err(runtime("write dataset"))?;
    Ok(json!({ "examples": ds.len(), "feature_dim": ds.feature_dim(), "classes": ds.class_count() }))
}
