//! Seeded synthetic trajectories and labeled clips for desk-scale experiments.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{join_clips, AnnotationTrack, LabeledClip};
use crate::circumplex::EmotionPoint;
use crate::dsp::{AudioClip, DspConfig, LogMelExtractor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackKind {
    Constant,
    Linear,
    Sine,
    Piecewise,
}

impl FromStr for TrackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(TrackKind::Constant),
            "linear" => Ok(TrackKind::Linear),
            "sine" => Ok(TrackKind::Sine),
            "piecewise" => Ok(TrackKind::Piecewise),
            other => Err(Error::InvalidArgument(format!(
                "unknown track kind {other:?} (expected constant, linear, sine or piecewise)"
            ))),
        }
    }
}

/// One clean channel of the requested family, evaluated at `t` seconds.
fn channel<R: Rng>(kind: TrackKind, length: usize, rng: &mut R) -> Box<dyn Fn(f64) -> f64> {
    let duration = (length - 1) as f64 * 0.5;
    match kind {
        TrackKind::Constant => {
            let level = rng.random_range(-0.8..0.8);
            Box::new(move |_| level)
        }
        TrackKind::Linear => {
            // total drift at most 0.5, so the clean line never leaves [-1, 1]
            let start = rng.random_range(-0.5..0.5);
            let slope = rng.random_range(-0.5..0.5) / duration;
            Box::new(move |t| start + slope * t)
        }
        TrackKind::Sine => {
            let center = rng.random_range(-0.4..0.4);
            let amp = rng.random_range(0.1..0.4);
            let period = rng.random_range(5.0..30.0);
            let phase = rng.random_range(0.0..2.0 * PI);
            Box::new(move |t| center + amp * (2.0 * PI * t / period + phase).sin())
        }
        TrackKind::Piecewise => {
            let n_knots = rng.random_range(3..=5);
            let levels: Vec<f64> = (0..n_knots).map(|_| rng.random_range(-0.8..0.8)).collect();
            let span = duration / (n_knots - 1) as f64;
            Box::new(move |t| {
                let x = (t / span).clamp(0.0, (n_knots - 1) as f64);
                let k = (x.floor() as usize).min(n_knots - 2);
                let frac = x - k as f64;
                levels[k] * (1.0 - frac) + levels[k + 1] * frac
            })
        }
    }
}

pub fn synth_tracks(
    n_songs: usize,
    length: usize,
    kind: TrackKind,
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<AnnotationTrack>> {
    if n_songs == 0 {
        return Err(Error::InvalidArgument("n_songs must be at least 1".into()));
    }
    if length < 11 {
        return Err(Error::InvalidArgument(format!(
            "track length {length} is below the minimum of 11"
        )));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise sigma {noise_sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sigma).expect("sigma checked");
    (0..n_songs)
        .map(|s| {
            let valence = channel(kind, length, &mut rng);
            let arousal = channel(kind, length, &mut rng);
            let points = (0..length)
                .map(|i| {
                    let t = i as f64 * 0.5;
                    let (mut v, mut a) = (valence(t), arousal(t));
                    if noise_sigma > 0.0 {
                        v += noise.sample(&mut rng);
                        a += noise.sample(&mut rng);
                    }
                    EmotionPoint::clamp(v, a)
                })
                .collect::<Result<Vec<_>>>()?;
            AnnotationTrack::new(format!("synth{s:03}"), points)
        })
        .collect()
}

/// Renders half a second of audio whose pitch follows valence and whose
/// loudness follows arousal, plus a little seeded hiss.
fn render_clip<R: Rng>(target: &EmotionPoint, config: &DspConfig, rng: &mut R) -> Result<AudioClip> {
    let freq = 200.0 * 2f64.powf(1.5 * (target.valence + 1.0));
    let amp = 0.05 + 0.2 * (target.arousal + 1.0);
    let sr = config.sample_rate as f64;
    let phase = rng.random_range(0.0..2.0 * PI);
    let samples = (0..config.clip_samples())
        .map(|n| {
            let t = n as f64 / sr;
            amp * (2.0 * PI * freq * t + phase).sin() + rng.random_range(-0.005..0.005)
        })
        .collect();
    AudioClip::new(samples, config.sample_rate)
}

/// Builds labeled log-mel clips from synthetic audio driven by sine trajectories.
pub fn synth_labeled_clips(
    n_songs: usize,
    clips_per_song: usize,
    config: &DspConfig,
    seed: u64,
) -> Result<Vec<LabeledClip>> {
    let tracks = synth_tracks(n_songs, clips_per_song.max(11), TrackKind::Sine, 0.0, seed)?;
    let extractor = LogMelExtractor::new(config.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c11b);
    let mut out = Vec::new();
    for track in tracks {
        let mels = track
            .points
            .iter()
            .take(clips_per_song)
            .map(|p| Ok(extractor.extract(&render_clip(p, config, &mut rng)?)?.values))
            .collect::<Result<Vec<_>>>()?;
        out.extend(join_clips(&mels, &track)?);
    }
    Ok(out)
}
