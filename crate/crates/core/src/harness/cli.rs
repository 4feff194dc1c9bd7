use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use super::{validation, HarnessError, Result};

#[derive(Debug, Clone, Parser)]
#[command(name = "agrlab", version, about = "Information bottleneck, IB quantization and aggregated learning experiments")]
pub struct Cli {
    /// JSON object of flag values; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Trace the IB trade-off curve of a discrete joint.
    IbCurve(IbCurveArgs),
    /// Brute-force optimal codes or the random-codebook experiment.
    Quantize(QuantizeArgs),
    /// Estimate mutual information of a discrete pair with MINE.
    MineEst(MineArgs),
    /// Train an n-fold AgrLearn model.
    AgrlearnTrain(TrainArgs),
    /// Evaluate a trained model under a prediction protocol.
    AgrlearnEval(EvalArgs),
    /// Fold-1 vs fold-n comparison over several seeds.
    Compare(CompareArgs),
    /// Write a Gaussian-blob dataset as CSV.
    SynthBlobs(SynthArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::IbCurve(_) => "ib-curve",
            Command::Quantize(_) => "quantize",
            Command::MineEst(_) => "mine-est",
            Command::AgrlearnTrain(_) => "agrlearn-train",
            Command::AgrlearnEval(_) => "agrlearn-eval",
            Command::Compare(_) => "compare",
            Command::SynthBlobs(_) => "synth-blobs",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct IbCurveArgs {
    /// Joint distribution JSON: {"x_size", "y_size", "p": [[..]]}.
    #[arg(long)]
    pub joint: PathBuf,
    /// start:stop:step, inclusive.
    #[arg(long, default_value = "0:50:0.05")]
    pub beta_grid: String,
    /// Bottleneck alphabet size; defaults to |X|.
    #[arg(long)]
    pub t_size: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Output directory for curve.csv, envelope.csv and report.json.
    #[arg(long, default_value = "ib_curve_out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantizeMode {
    Brute,
    Achievability,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct QuantizeArgs {
    #[arg(long)]
    pub joint: PathBuf,
    #[arg(long, value_enum, default_value_t = QuantizeMode::Brute)]
    pub mode: QuantizeMode,
    /// Block length (brute mode).
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Codebook size (brute mode).
    #[arg(long = "M", aliases = ["m", "codebook-size"], default_value_t = 1)]
    pub codebook_size: usize,
    /// Bottleneck alphabet size; defaults to |X|.
    #[arg(long)]
    pub t_size: Option<usize>,
    /// Test-channel encoder JSON {"from_size", "to_size", "rows"} (achievability mode).
    #[arg(long)]
    pub encoder: Option<PathBuf>,
    /// Without --encoder, the test channel is the IB solution at this beta.
    #[arg(long, default_value_t = 5.0)]
    pub beta: f64,
    /// Extra rate above I(X;T), bits per symbol.
    #[arg(long, default_value_t = 0.25)]
    pub rate_margin: f64,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    pub n_list: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Report file.
    #[arg(long, default_value = "quantize.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct MineArgs {
    /// independent, identity or bsc:<p>.
    #[arg(long, default_value = "bsc:0.1")]
    pub dist: String,
    #[arg(long, default_value_t = 5000)]
    pub steps: usize,
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Report file.
    #[arg(long, default_value = "mine.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    /// Training CSV (features, then `label`).
    #[arg(long)]
    pub data: PathBuf,
    /// Evaluation CSV for the per-epoch test error.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub fold: usize,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub training: TrainingArgs,
    /// Bottleneck width per fold position.
    #[arg(long, default_value_t = 16)]
    pub bottleneck: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Run directory for checkpoint.json, metrics.csv and config.json.
    #[arg(long, default_value = "run_dir")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct EvalArgs {
    /// Checkpoint written by agrlearn-train.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// replicated, contextual:<k> or batched:<k>.
    #[arg(long, default_value = "replicated")]
    pub protocol: String,
    /// Training CSV supplying context objects (contextual protocol).
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Report file; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct CompareArgs {
    /// Training CSV; Gaussian blobs are generated when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Fold compared against fold 1.
    #[arg(long, default_value_t = 2)]
    pub fold: usize,
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,
    /// Training seeds are seed, seed+1, ….
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.3)]
    pub alpha: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub training: TrainingArgs,
    #[command(flatten)]
    pub blobs: BlobArgs,
    #[arg(long, default_value = "compare_out")]
    pub out: PathBuf,
}

/// Optimization settings shared by training commands.
#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainingArgs {
    /// Critic ascent steps per batch.
    #[arg(long = "K", alias = "k", default_value_t = 5)]
    pub inner_steps: usize,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    /// Aggregated examples per batch.
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lambda_in: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lambda_out: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub weight_decay: f64,
}

impl TrainingArgs {
    pub fn config(&self, fold: usize, alpha: f64, seed: u64) -> crate::agrlearn::TrainConfig {
        crate::agrlearn::TrainConfig {
            fold,
            batch: self.batch,
            alpha,
            inner_steps: self.inner_steps,
            lambda_in: self.lambda_in,
            lambda_out: self.lambda_out,
            epochs: self.epochs,
            weight_decay: self.weight_decay,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BlobArgs {
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long, default_value_t = 500)]
    pub per_class: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 4.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    /// Seed of the generated training set; the test set uses the next one.
    #[arg(long, default_value_t = 1)]
    pub data_seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct SynthArgs {
    #[command(flatten)]
    pub blobs: BlobArgs,
    #[arg(long, default_value = "blobs.csv")]
    pub out: PathBuf,
}

/// Flag tokens for every entry of a JSON config object.
fn config_tokens(config: &Value) -> Result<Vec<String>> {
    let obj = config.as_object().ok_or_else(|| HarnessError::Validation {
        stage: "config",
        message: "config must be a JSON object".into(),
    })?;
    let mut tokens = Vec::new();
    for (key, value) in obj {
        let flag = match key.as_str() {
            "K" | "M" => format!("--{key}"),
            _ => format!("--{}", key.replace('_', "-")),
        };
        let text = match value {
            Value::Null | Value::Bool(false) => continue,
            Value::Bool(true) => {
                tokens.push(flag);
                continue;
            }
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
            Value::Object(_) => {
                return Err(HarnessError::Validation {
                    stage: "config",
                    message: format!("nested object for {key} is not supported"),
                })
            }
        };
        tokens.push(flag);
        tokens.push(text);
    }
    Ok(tokens)
}

/// Parses `args` (including the program name). A `--config FILE` is
/// expanded into flags placed before the explicit ones, so explicit flags
/// win.
pub fn parse_args<I, S>(args: I) -> Result<Cli>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let mut args: Vec<String> = args.into_iter().map(Into::into).collect();
    let mut config_path = None;
    let mut i = 1;
    while i < args.len() {
        if args[i] == "--config" && i + 1 < args.len() {
            config_path = Some(args.remove(i + 1));
            args.remove(i);
        } else if let Some(p) = args[i].strip_prefix("--config=") {
            config_path = Some(p.to_string());
            args.remove(i);
        } else {
            i += 1;
        }
    }
    if let Some(path) = &config_path {
        let text = std::fs::read_to_string(path).map_err(validation("config"))?;
        let value: Value = serde_json::from_str(&text).map_err(validation("config"))?;
        let tokens = config_tokens(&value)?;
        // the subcommand is the first token after the program name
        if args.len() < 2 {
            return Err(HarnessError::Validation {
                stage: "config",
                message: "a subcommand is required".into(),
            });
        }
        args.splice(2..2, tokens);
    }
    let mut cli = Cli::try_parse_from(&args)?;
    cli.config = config_path.map(PathBuf::from);
    Ok(cli)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"dist": "identity", "steps": 10, "lr": 0.5}"#).unwrap();
        let cli = parse_args(["agrlab", "mine-est", "--config", cfg.to_str().unwrap(), "--steps", "20"]).unwrap();
        match cli.command {
            Command::MineEst(a) => {
                assert_eq!(a.dist, "identity");
                assert_eq!(a.steps, 20);
                assert_eq!(a.lr, 0.5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lists_and_special_names() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"n_list": [2, 4], "M": 3, "mode": "achievability"}"#).unwrap();
        let cli = parse_args(["agrlab", "quantize", "--joint", "j.json", "--config", cfg.to_str().unwrap()]).unwrap();
        match cli.command {
            Command::Quantize(a) => {
                assert_eq!(a.n_list, vec![2, 4]);
                assert_eq!(a.codebook_size, 3);
                assert_eq!(a.mode, QuantizeMode::Achievability);
            }
            other => panic!("{other:?}"),
        }
        let cli = parse_args(["agrlab", "agrlearn-train", "--data", "d.csv", "--K", "3", "--K", "4"]).unwrap();
        match cli.command {
            Command::AgrlearnTrain(a) => assert_eq!(a.training.inner_steps, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn usage_errors_exit_with_two() {
        let e = parse_args(["agrlab", "mine-est", "--steps", "x"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = parse_args(["agrlab", "mine-est", "--config", "/nonexistent.json"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
