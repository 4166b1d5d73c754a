//! Emotion (clip → point) and next-point (trajectory → point) models built on
//! the recurrent core, with their training and evaluation loops.

mod eval;
mod train;
mod windows;

use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use eval::{evaluate, rmse, EvalReport, GroupMetrics};
pub use train::{train, EarlyStopping, EpochRecord, StopDecision, TrainReport};
pub use windows::{history_matrix, make_windows, windows_to_examples, Window, WINDOW_LENGTH};

use crate::annotations::{LabeledClip, SongDataset};
use crate::circumplex::EmotionPoint;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{read_checkpoint, write_checkpoint, Architecture, Checkpoint, DenseHead, LstmStack, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// Log-mel clip to (valence, arousal).
    Emotion,
    /// Ten past points to the next one.
    NextPoint,
}

impl Task {
    pub fn tag(self) -> u8 {
        match self {
            Task::Emotion => 0,
            Task::NextPoint => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Task::Emotion),
            1 => Ok(Task::NextPoint),
            t => Err(Error::Format(format!("unknown task tag {t}"))),
        }
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "emotion" => Ok(Task::Emotion),
            "next" => Ok(Task::NextPoint),
            other => Err(Error::InvalidArgument(format!(
                "unknown task {other:?} (expected emotion or next)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Batching {
    /// One batch per song holding every clip of that song.
    PerSong,
    /// Seeded shuffle into batches of this size.
    Shuffled(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub task: Task,
    pub learning_rate: f64,
    pub hidden_size: usize,
    pub n_modules: usize,
    pub layers_per_module: usize,
    pub dropout_p: f64,
    pub max_epochs: usize,
    pub batching: Batching,
    pub early_stop_patience: usize,
    pub early_stop_min_delta: f64,
    pub seed: u64,
    /// Std of the Gaussian noise added to features each epoch (dB units).
    pub noise_sigma: f64,
    /// Optional global gradient-norm clip.
    pub grad_clip: Option<f64>,
    pub validation_fraction: f64,
}

/// Clip gradient norm used when clipping is switched on without a value.
pub const DEFAULT_GRAD_CLIP: f64 = 5.0;

impl TrainConfig {
    pub fn task1_default() -> Self {
        TrainConfig {
            task: Task::Emotion,
            learning_rate: 5e-5,
            hidden_size: 20,
            n_modules: 2,
            layers_per_module: 2,
            dropout_p: 0.1,
            max_epochs: 200,
            batching: Batching::PerSong,
            early_stop_patience: 10,
            early_stop_min_delta: 1e-5,
            seed: 0,
            noise_sigma: 0.1,
            grad_clip: None,
            validation_fraction: 0.2,
        }
    }

    pub fn task2_default() -> Self {
        TrainConfig {
            task: Task::NextPoint,
            learning_rate: 1e-4,
            hidden_size: 32,
            n_modules: 1,
            layers_per_module: 2,
            dropout_p: 0.0,
            max_epochs: 10,
            batching: Batching::Shuffled(64),
            early_stop_patience: 10,
            early_stop_min_delta: 1e-5,
            seed: 0,
            noise_sigma: 0.0,
            grad_clip: None,
            validation_fraction: 0.2,
        }
    }

    pub fn default_for(task: Task) -> Self {
        match task {
            Task::Emotion => Self::task1_default(),
            Task::NextPoint => Self::task2_default(),
        }
    }

    pub fn input_size(&self) -> usize {
        match self.task {
            Task::Emotion => 128,
            Task::NextPoint => 2,
        }
    }

    pub fn total_layers(&self) -> usize {
        self.n_modules * self.layers_per_module
    }

    pub fn architecture(&self, input_size: usize) -> Architecture {
        Architecture::uniform(
            input_size,
            self.hidden_size,
            self.n_modules,
            self.layers_per_module,
            self.dropout_p,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {}", self.learning_rate));
        }
        if self.hidden_size == 0 {
            return bad("hidden size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad(format!("dropout {} must lie in [0, 1)", self.dropout_p));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if let Batching::Shuffled(0) = self.batching {
            return bad("batch size must be at least 1".into());
        }
        if !(self.noise_sigma >= 0.0) {
            return bad(format!("noise sigma {}", self.noise_sigma));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return bad(format!("gradient clip {c}"));
            }
        }
        Ok(())
    }
}

/// Affine input normalization `(x - shift) / scale` stored with a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureScaling {
    pub shift: f64,
    pub scale: f64,
}

impl FeatureScaling {
    pub const IDENTITY: FeatureScaling = FeatureScaling {
        shift: 0.0,
        scale: 1.0,
    };

    /// Global mean and standard deviation over every feature value.
    pub fn fit<'a>(inputs: impl IntoIterator<Item = &'a Matrix>) -> Self {
        let (mut n, mut sum, mut sum_sq) = (0usize, 0.0, 0.0);
        for m in inputs {
            for &v in m.data() {
                n += 1;
                sum += v;
                sum_sq += v * v;
            }
        }
        if n == 0 {
            return Self::IDENTITY;
        }
        let mean = sum / n as f64;
        let std = (sum_sq / n as f64 - mean * mean).max(0.0).sqrt();
        FeatureScaling {
            shift: mean,
            scale: if std > 1e-12 { std } else { 1.0 },
        }
    }

    pub fn apply(&self, m: &Matrix) -> Matrix {
        if *self == Self::IDENTITY {
            return m.clone();
        }
        m.map(|x| (x - self.shift) / self.scale)
    }
}

/// One training or evaluation example.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    /// `features × time`.
    pub input: Matrix,
    pub target: [f64; 2],
    /// Song the example came from; used for per-song batching and reports.
    pub group: String,
}

impl From<&LabeledClip> for Example {
    fn from(c: &LabeledClip) -> Self {
        Example {
            input: c.features.clone(),
            target: c.target.as_array(),
            group: c.song_id.clone(),
        }
    }
}

/// Train and validation examples of a split song dataset.
pub fn dataset_examples(ds: &SongDataset) -> (Vec<Example>, Vec<Example>) {
    let collect = |it: &mut dyn Iterator<Item = (&String, &Vec<LabeledClip>)>| {
        it.flat_map(|(_, clips)| clips.iter().map(Example::from))
            .collect::<Vec<_>>()
    };
    (collect(&mut ds.train_songs()), collect(&mut ds.validation_songs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub task: Task,
    pub network: Network,
    pub scaling: FeatureScaling,
}

impl Model {
    pub fn new(task: Task, network: Network) -> Self {
        Model {
            task,
            network,
            scaling: FeatureScaling::IDENTITY,
        }
    }

    /// Fresh network for `config`, initialized from `config.seed`.
    pub fn from_config(config: &TrainConfig, input_size: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let network = Network::init(&config.architecture(input_size), &mut rng)?;
        Ok(Model::new(config.task, network))
    }

    /// Raw head output for a `features × time` input; no clamping.
    pub fn predict_raw(&self, input: &Matrix) -> Result<[f64; 2]> {
        self.network.predict(&self.scaling.apply(input))
    }

    pub fn predict_point(&self, input: &Matrix) -> Result<EmotionPoint> {
        let [v, a] = self.predict_raw(input)?;
        EmotionPoint::clamp(v, a)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_checkpoint(
            path,
            &Checkpoint {
                task_tag: self.task.tag(),
                network: self.network.clone(),
                input_shift: self.scaling.shift,
                input_scale: self.scaling.scale,
            },
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck = read_checkpoint(path)?;
        Ok(Model {
            task: Task::from_tag(ck.task_tag)?,
            network: ck.network,
            scaling: FeatureScaling {
                shift: ck.input_shift,
                scale: ck.input_scale,
            },
        })
    }
}

fn build_default(config: TrainConfig) -> (LstmStack, DenseHead, TrainConfig) {
    let model = Model::from_config(&config, config.input_size()).expect("default config is valid");
    let Network { stack, head, .. } = model.network;
    (stack, head, config)
}

/// Emotion model: 128 mel inputs, hidden 20, two modules of two layers,
/// dropout 0.1, learning rate 5e-5, one batch per song.
pub fn build_task1_default() -> (LstmStack, DenseHead, TrainConfig) {
    build_default(TrainConfig::task1_default())
}

/// Next-point model: 2 inputs, hidden 32, one module of two layers,
/// no dropout, learning rate 1e-4, shuffled batches of 64, 10 epochs.
pub fn build_task2_default() -> (LstmStack, DenseHead, TrainConfig) {
    build_default(TrainConfig::task2_default())
}

/// Predicts the emotion of one log-mel clip, clamped to the circumplex.
pub fn predict_emotion(model: &Model, mel: &Matrix) -> Result<EmotionPoint> {
    if model.task != Task::Emotion {
        return Err(Error::InvalidArgument("model was not trained for emotion regression".into()));
    }
    if mel.rows() != model.network.stack.input_size {
        return Err(Error::ShapeMismatch(format!(
            "mel matrix has {} bins, model expects {}",
            mel.rows(),
            model.network.stack.input_size
        )));
    }
    model.predict_point(mel)
}

/// Predicts the point following a `2 × 10` (valence, arousal) window.
pub fn predict_next(model: &Model, window: &Matrix) -> Result<EmotionPoint> {
    if window.shape() != (2, WINDOW_LENGTH) {
        return Err(Error::ShapeMismatch(format!(
            "history window is {:?}, expected (2, {WINDOW_LENGTH})",
            window.shape()
        )));
    }
    model.predict_point(window)
}

/// Anything that can continue a `2 × 10` emotion history.
pub trait NextPointPredictor {
    fn name(&self) -> &str;
    fn predict_next(&self, window: &Matrix) -> Result<EmotionPoint>;
}

impl NextPointPredictor for Model {
    fn name(&self) -> &str {
        "lstm"
    }

    fn predict_next(&self, window: &Matrix) -> Result<EmotionPoint> {
        predict_next(self, window)
    }
}
