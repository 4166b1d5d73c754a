//! Command-line front end.
//!
//! Every subcommand accepts `--config FILE` holding `key = value` lines whose
//! keys are that subcommand's long flag names. Flags given on the command
//! line win over the file.
//!
//! Exit codes: 0 success, 1 I/O or data error, 2 numeric failure, 3 usage.

mod commands;
mod data;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand};

use crate::error::{Error, Result};

pub use data::DataArgs;

#[derive(Debug, Parser)]
#[command(name = "moodflow", version, about = "Valence/arousal regression, next-point prediction and mood-continuing queues")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Slice WAV files into half-second clips and store their log-mel features
    Features(FeaturesArgs),
    /// Train an emotion or next-point model
    Train(TrainArgs),
    /// Evaluate a checkpoint (MSE and RMSE)
    Eval(EvalArgs),
    /// Predict emotions of clips, or the next point of annotation tracks
    Predict(PredictArgs),
    /// Compare linear, LSTM and constant-hold next-point predictors per song
    Baseline(BaselineArgs),
    /// Build a mood-continuing queue from a candidate library
    Queue(QueueArgs),
    /// Check BPTT gradients against central differences
    Gradcheck(GradcheckArgs),
    /// Write synthetic annotation tracks as long-format CSV
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct DspArgs {
    /// Clip length in seconds
    #[arg(long, default_value_t = 0.5)]
    pub clip_seconds: f64,
    /// Number of mel bands
    #[arg(long, default_value_t = 128)]
    pub n_mels: usize,
    /// FFT length in samples
    #[arg(long, default_value_t = 2048)]
    pub fft_size: usize,
    /// Samples between STFT frames
    #[arg(long, default_value_t = 512)]
    pub hop_length: usize,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Directory of 44.1 kHz WAV files
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory for `<song>.melf` files and `manifest.csv`
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub dsp: DspArgs,
    /// `key = value` file of flag defaults
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// emotion (clip to point) or next (10 points to the 11th)
    #[arg(long)]
    pub task: crate::models::Task,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub hidden_size: Option<usize>,
    #[arg(long)]
    pub n_modules: Option<usize>,
    #[arg(long)]
    pub layers_per_module: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Examples per batch, or `song` for one batch per song
    #[arg(long)]
    pub batch_size: Option<String>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub min_delta: Option<f64>,
    /// Std of Gaussian feature noise per epoch, in dB
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Clip the global gradient norm to this value
    #[arg(long)]
    pub grad_clip: Option<f64>,
    /// Checkpoint path
    #[arg(long, default_value = "model.ckpt")]
    pub out: PathBuf,
    /// Loss-curve CSV path
    #[arg(long, default_value = "loss.csv")]
    pub loss_csv: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Split {
    All,
    Train,
    Validation,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Which songs of the seeded split to score
    #[arg(long, value_enum, default_value_t = Split::All)]
    pub split: Split,
    /// Per-song CSV on stdout
    #[arg(long)]
    pub csv: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// WAV or `.melf` files (emotion models)
    #[arg(long, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    /// CSV on stdout
    #[arg(long)]
    pub csv: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// Next-point checkpoint to include in the comparison
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Write the comparison table here
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Table on stdout
    #[arg(long)]
    pub csv: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PredictorKind {
    Lstm,
    Constant,
    Linear,
}

#[derive(Debug, Args)]
pub struct QueueArgs {
    /// Candidate library: `clip_id,path` or `clip_id,valence,arousal`
    #[arg(long)]
    pub candidates: PathBuf,
    /// Next-point checkpoint (required for the lstm predictor)
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Emotion checkpoint for candidates given by audio path
    #[arg(long)]
    pub emotion_model: Option<PathBuf>,
    /// Defaults to lstm when --model is given, constant otherwise
    #[arg(long, value_enum)]
    pub predictor: Option<PredictorKind>,
    /// Pool slack in circumplex units
    #[arg(long, default_value_t = 0.1)]
    pub tolerance: f64,
    /// Points (or clips) averaged into a candidate's opening emotion
    #[arg(long, default_value_t = 4)]
    pub opening_k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of picks; defaults to the library size
    #[arg(long)]
    pub steps: Option<usize>,
    /// Long-format CSV whose first track's first 10 points seed the history
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Constant starting history when --history is absent
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub start_valence: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub start_arousal: f64,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 16)]
    pub input_size: usize,
    #[arg(long, default_value_t = 20)]
    pub hidden_size: usize,
    #[arg(long, default_value_t = 2)]
    pub n_modules: usize,
    #[arg(long, default_value_t = 2)]
    pub layers_per_module: usize,
    /// Sequence length
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub fd_step: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub csv: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value = "linear")]
    pub kind: crate::annotations::TrackKind,
    #[arg(long, default_value_t = 50)]
    pub songs: usize,
    /// Points per track
    #[arg(long, default_value_t = 61)]
    pub length: usize,
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path; stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_config_file(path: &PathBuf) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!("{}:{}: expected `key = value`", path.display(), n + 1))
        })?;
        let v = v.trim();
        let v = v
            .strip_prefix('"')
            .and_then(|s| s.strip_suffix('"'))
            .unwrap_or(v);
        out.push((k.trim().to_string(), v.to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let strs: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    for (i, a) in strs.iter().enumerate() {
        if a == "--config" {
            return strs.get(i + 1).map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Splices config-file values into `args` as flags not already present.
pub fn merge_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let Some(sub_name) = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy())
        .find(|a| !a.starts_with('-'))
        .map(|s| s.into_owned())
    else {
        return Ok(args);
    };
    let root = Cli::command();
    let Some(sub) = root.find_subcommand(&sub_name) else {
        return Ok(args);
    };
    let flags: Vec<(String, bool)> = sub
        .get_arguments()
        .filter_map(|a| {
            let long = a.get_long()?;
            (long != "config" && long != "help").then(|| {
                (long.to_string(), matches!(a.get_action(), ArgAction::SetTrue))
            })
        })
        .collect();
    let present = |key: &str| {
        args.iter().any(|a| {
            let a = a.to_string_lossy();
            a == format!("--{key}") || a.starts_with(&format!("--{key}="))
        })
    };
    let mut merged = args.clone();
    for (key, value) in parse_config_file(&path)? {
        let Some((_, is_switch)) = flags.iter().find(|(f, _)| *f == key) else {
            let valid: Vec<&str> = flags.iter().map(|(f, _)| f.as_str()).collect();
            return Err(Error::InvalidArgument(format!(
                "unknown config key {key:?} for `{sub_name}`; valid keys: {}",
                valid.join(", ")
            )));
        };
        if present(&key) {
            continue;
        }
        if *is_switch {
            match value.as_str() {
                "true" | "1" | "yes" => merged.push(format!("--{key}").into()),
                "false" | "0" | "no" => {}
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "config key {key:?} is a switch; {other:?} is not true/false"
                    )))
                }
            }
        } else {
            merged.push(format!("--{key}={value}").into());
        }
    }
    Ok(merged)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_values_fill_missing_flags_only() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.conf");
        fs::write(&cfg, "# tolerance tweak\ntolerance = 0.3\nseed = 9\n").unwrap();
        let c = cfg.to_str().unwrap();
        let merged = merge_config(os(&["moodflow", "queue", "--candidates", "x.csv", "--seed", "2", "--config", c])).unwrap();
        let cli = Cli::try_parse_from(merged).unwrap();
        let Command::Queue(q) = cli.command else { panic!() };
        assert_eq!(q.tolerance, 0.3);
        assert_eq!(q.seed, 2);
    }

    #[test]
    fn unknown_keys_list_valid_ones() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("bad.conf");
        fs::write(&cfg, "tolerence = 0.3\n").unwrap();
        let err = merge_config(os(&["moodflow", "queue", "--config", cfg.to_str().unwrap()])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("tolerence") && msg.contains("tolerance") && msg.contains("opening-k"));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn switches_and_negative_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("g.conf");
        fs::write(&cfg, "csv = true\nhidden-size = 4\n").unwrap();
        let merged = merge_config(os(&["moodflow", "gradcheck", "--config", cfg.to_str().unwrap()])).unwrap();
        let Command::Gradcheck(g) = Cli::try_parse_from(merged).unwrap().command else { panic!() };
        assert!(g.csv);
        assert_eq!(g.hidden_size, 4);
        let Command::Queue(q) = Cli::try_parse_from(os(&["m", "queue", "--candidates", "c", "--start-valence", "-0.5"]))
            .unwrap()
            .command
        else {
            panic!()
        };
        assert_eq!(q.start_valence, -0.5);
    }

    #[test]
    fn usage_errors_exit_3() {
        assert_eq!(run(["moodflow", "train"]), 3);
        assert_eq!(run(["moodflow", "nonsense"]), 3);
        assert_eq!(run(["moodflow", "--help"]), 0);
    }

    #[test]
    fn cli_is_well_formed() {
        Cli::command().debug_assert();
    }
}
