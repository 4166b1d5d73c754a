//! Audio ingestion and log-mel feature extraction.
//!
//! The pipeline is: slice a song into half-second clips, take a centered
//! Hann-windowed STFT of each clip, square the magnitudes, project onto a
//! slaney-style mel filterbank and compress to decibels. Under the default
//! configuration a 22050-sample clip becomes a 128 × 44 matrix.

mod feature_file;
mod mel;
mod stft;
mod wav;

use rand::Rng;
use rand_distr::{Distribution, Normal};

pub use feature_file::{read_features, write_features, FEATURE_MAGIC, FEATURE_VERSION};
pub use mel::{hz_to_mel, mel_filterbank, mel_frequencies, mel_to_hz};
pub use stft::{hann_window, n_frames, power_spectrogram, reflect_index, stft, Spectrum};
pub use wav::{load_wav, write_wav_i16};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const SAMPLE_RATE: u32 = 44100;

/// Mono audio at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if let Some(bad) = samples.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidValue(format!("audio sample {bad}")));
        }
        Ok(AudioClip {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hann,
}

/// Feature extraction settings.
///
/// The defaults use a 2048-point FFT with hop 512, which yields the
/// 44 frames per half-second clip that the emotion model consumes. A
/// 512-point FFT with hop 2048 can be configured but produces 11 frames.
#[derive(Debug, Clone, PartialEq)]
pub struct DspConfig {
    pub sample_rate: u32,
    pub clip_seconds: f64,
    pub n_mels: usize,
    pub fft_size: usize,
    pub hop_length: usize,
    pub window: WindowKind,
    pub f_min: f64,
    pub f_max: f64,
    pub log_floor: f64,
}

impl Default for DspConfig {
    fn default() -> Self {
        DspConfig {
            sample_rate: SAMPLE_RATE,
            clip_seconds: 0.5,
            n_mels: 128,
            fft_size: 2048,
            hop_length: 512,
            window: WindowKind::Hann,
            f_min: 0.0,
            f_max: SAMPLE_RATE as f64 / 2.0,
            log_floor: 1e-10,
        }
    }
}

impl DspConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !self.fft_size.is_power_of_two() {
            return bad(format!("fft_size {} is not a power of two", self.fft_size));
        }
        if self.hop_length == 0 {
            return bad("hop_length must be at least 1".into());
        }
        if self.n_mels == 0 {
            return bad("n_mels must be at least 1".into());
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(self.f_min >= 0.0 && self.f_min < self.f_max && self.f_max <= nyquist) {
            return bad(format!(
                "frequency range [{}, {}] must satisfy 0 <= f_min < f_max <= {nyquist}",
                self.f_min, self.f_max
            ));
        }
        if !(self.clip_seconds > 0.0) {
            return bad(format!("clip_seconds {} must be positive", self.clip_seconds));
        }
        if !(self.log_floor > 0.0) {
            return bad(format!("log_floor {} must be positive", self.log_floor));
        }
        Ok(())
    }

    pub fn clip_samples(&self) -> usize {
        (self.clip_seconds * self.sample_rate as f64).round() as usize
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frames produced for one clip of `clip_samples()` samples.
    pub fn frames_per_clip(&self) -> usize {
        n_frames(self.clip_samples(), self.hop_length)
    }
}

/// Log-mel matrix for one clip: `n_mels` rows (bins) by `n_frames` columns (time).
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub values: Matrix,
    pub config: DspConfig,
}

impl MelSpectrogram {
    pub fn n_mels(&self) -> usize {
        self.values.rows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.cols()
    }
}

/// Cuts audio into consecutive non-overlapping clips and drops the remainder.
pub fn slice_clips(audio: &AudioClip, clip_seconds: f64) -> Result<Vec<AudioClip>> {
    if !(clip_seconds > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "clip_seconds {clip_seconds} must be positive"
        )));
    }
    let clip_len = (clip_seconds * audio.sample_rate as f64).round() as usize;
    if clip_len == 0 {
        return Err(Error::InvalidArgument(format!(
            "clip of {clip_seconds} s is shorter than one sample"
        )));
    }
    Ok(audio
        .samples
        .chunks_exact(clip_len)
        .map(|chunk| AudioClip {
            samples: chunk.to_vec(),
            sample_rate: audio.sample_rate,
        })
        .collect())
}

/// Reusable log-mel extractor holding the filterbank and window for one config.
#[derive(Debug, Clone)]
pub struct LogMelExtractor {
    config: DspConfig,
    filterbank: Matrix,
    window: Vec<f64>,
}

impl LogMelExtractor {
    pub fn new(config: DspConfig) -> Result<Self> {
        config.validate()?;
        let filterbank = mel_filterbank(&config)?;
        let window = hann_window(config.fft_size);
        Ok(LogMelExtractor {
            config,
            filterbank,
            window,
        })
    }

    pub fn config(&self) -> &DspConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &Matrix {
        &self.filterbank
    }

    pub fn extract(&self, clip: &AudioClip) -> Result<MelSpectrogram> {
        let expected = self.config.clip_samples();
        if clip.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "clip has {} samples, config expects {expected}",
                clip.len()
            )));
        }
        if clip.sample_rate != self.config.sample_rate {
            return Err(Error::ShapeMismatch(format!(
                "clip sampled at {} Hz, config expects {} Hz",
                clip.sample_rate, self.config.sample_rate
            )));
        }
        let spectrum = stft::stft_with_window(&clip.samples, &self.config, &self.window)?;
        let power = power_spectrogram(&spectrum);
        let (n_mels, n_bins) = self.filterbank.shape();
        let n_frames = power.cols();
        let floor = self.config.log_floor;
        let mut values = Matrix::zeros(n_mels, n_frames);
        for m in 0..n_mels {
            let weights = self.filterbank.row(m);
            for t in 0..n_frames {
                let mut acc = 0.0;
                for (b, w) in weights.iter().enumerate().take(n_bins) {
                    if *w != 0.0 {
                        acc += w * power.get(b, t);
                    }
                }
                values.set(m, t, 10.0 * acc.max(floor).log10());
            }
        }
        Ok(MelSpectrogram {
            values,
            config: self.config.clone(),
        })
    }
}

pub fn log_mel(clip: &AudioClip, config: &DspConfig) -> Result<MelSpectrogram> {
    LogMelExtractor::new(config.clone())?.extract(clip)
}

/// Adds independent N(0, sigma²) noise to every entry (in dB units).
pub fn add_gaussian_noise<R: Rng + ?Sized>(
    mel: &MelSpectrogram,
    sigma: f64,
    rng: &mut R,
) -> Result<MelSpectrogram> {
    let mut out = mel.clone();
    perturb_gaussian(out.values.data_mut(), sigma, rng)?;
    Ok(out)
}

/// In-place form of [`add_gaussian_noise`] over raw values.
pub fn perturb_gaussian<R: Rng + ?Sized>(values: &mut [f64], sigma: f64, rng: &mut R) -> Result<()> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise sigma {sigma} must be finite and non-negative"
        )));
    }
    if sigma == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma checked above");
    for v in values.iter_mut() {
        *v += normal.sample(rng);
    }
    Ok(())
}
