//! Valence/arousal annotation tracks and the labeled datasets built from them.

mod emomusic;
mod long_csv;
mod synth;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use emomusic::{load_emomusic, load_emomusic_with_std, ScaleMode};
pub use long_csv::{read_long_csv, write_long_csv};
pub use synth::{synth_labeled_clips, synth_tracks, TrackKind};

use crate::circumplex::EmotionPoint;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Annotation sampling rate.
pub const ANNOTATION_RATE_HZ: f64 = 2.0;
/// Seconds of each excerpt dropped before annotations begin.
pub const DEFAULT_START_SECONDS: f64 = 15.0;

/// One song's emotion trajectory sampled every half second.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationTrack {
    pub song_id: String,
    pub start_time: f64,
    pub rate: f64,
    pub points: Vec<EmotionPoint>,
    /// Per-point (valence_std, arousal_std), parallel to `points`.
    pub stds: Option<Vec<(f64, f64)>>,
}

impl AnnotationTrack {
    pub fn new(song_id: impl Into<String>, points: Vec<EmotionPoint>) -> Result<Self> {
        let track = AnnotationTrack {
            song_id: song_id.into(),
            start_time: DEFAULT_START_SECONDS,
            rate: ANNOTATION_RATE_HZ,
            points,
            stds: None,
        };
        track.validate()?;
        Ok(track)
    }

    pub fn with_stds(mut self, stds: Vec<(f64, f64)>) -> Result<Self> {
        self.stds = Some(stds);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Empty(format!("track {} has no points", self.song_id)));
        }
        for p in &self.points {
            if !(p.valence.is_finite() && p.arousal.is_finite())
                || p.valence.abs() > 1.0
                || p.arousal.abs() > 1.0
            {
                return Err(Error::InvalidValue(format!(
                    "track {} point ({}, {})",
                    self.song_id, p.valence, p.arousal
                )));
            }
        }
        if let Some(stds) = &self.stds {
            if stds.len() != self.points.len() {
                return Err(Error::ShapeMismatch(format!(
                    "track {}: {} stds for {} points",
                    self.song_id,
                    stds.len(),
                    self.points.len()
                )));
            }
            if stds.iter().any(|(v, a)| !(*v >= 0.0 && *a >= 0.0)) {
                return Err(Error::InvalidValue(format!(
                    "track {} has a negative or NaN std",
                    self.song_id
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Absolute time of point `i` in seconds.
    pub fn time_of(&self, i: usize) -> f64 {
        self.start_time + i as f64 / self.rate
    }

    /// Time of point `i` relative to the first point.
    pub fn relative_time(&self, i: usize) -> f64 {
        i as f64 / self.rate
    }
}

/// A feature matrix paired with the annotation point at the same instant.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledClip {
    pub song_id: String,
    pub index: usize,
    pub features: Matrix,
    pub target: EmotionPoint,
}

/// Pairs clip `i` with annotation point `i`, truncating to the shorter list.
pub fn join_clips(clips: &[Matrix], track: &AnnotationTrack) -> Result<Vec<LabeledClip>> {
    if clips.is_empty() {
        return Err(Error::Empty(format!("no clips for song {}", track.song_id)));
    }
    if clips.len() != track.points.len() {
        log::warn!(
            "song {}: {} clips but {} annotation points; keeping {}",
            track.song_id,
            clips.len(),
            track.points.len(),
            clips.len().min(track.points.len())
        );
    }
    Ok(clips
        .iter()
        .zip(&track.points)
        .enumerate()
        .map(|(index, (features, target))| LabeledClip {
            song_id: track.song_id.clone(),
            index,
            features: features.clone(),
            target: *target,
        })
        .collect())
}

/// Labeled clips grouped by song, with a by-song train/validation split.
#[derive(Debug, Clone, Default)]
pub struct SongDataset {
    pub songs: BTreeMap<String, Vec<LabeledClip>>,
    pub train: BTreeSet<String>,
    pub validation: BTreeSet<String>,
}

impl SongDataset {
    pub fn from_clips(clips: impl IntoIterator<Item = LabeledClip>) -> Self {
        let mut songs: BTreeMap<String, Vec<LabeledClip>> = BTreeMap::new();
        for clip in clips {
            songs.entry(clip.song_id.clone()).or_default().push(clip);
        }
        let train = songs.keys().cloned().collect();
        SongDataset {
            songs,
            train,
            validation: BTreeSet::new(),
        }
    }

    pub fn n_clips(&self) -> usize {
        self.songs.values().map(Vec::len).sum()
    }

    pub fn train_songs(&self) -> impl Iterator<Item = (&String, &Vec<LabeledClip>)> {
        self.songs.iter().filter(|(id, _)| self.train.contains(*id))
    }

    pub fn validation_songs(&self) -> impl Iterator<Item = (&String, &Vec<LabeledClip>)> {
        self.songs
            .iter()
            .filter(|(id, _)| self.validation.contains(*id))
    }
}

/// Splits songs into train and validation sets: `ceil(fraction * n)` songs go to validation.
pub fn split_by_song(dataset: SongDataset, validation_fraction: f64, seed: u64) -> Result<SongDataset> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction {validation_fraction} must lie in (0, 1)"
        )));
    }
    let mut ids: Vec<String> = dataset.songs.keys().cloned().collect();
    if ids.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 songs to split, have {}",
            ids.len()
        )));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = ((validation_fraction * ids.len() as f64).ceil() as usize).min(ids.len() - 1);
    let validation: BTreeSet<String> = ids[..n_val].iter().cloned().collect();
    let train = ids[n_val..].iter().cloned().collect();
    Ok(SongDataset {
        songs: dataset.songs,
        train,
        validation,
    })
}

/// Splits a list of tracks by song with the same rule as [`split_by_song`].
pub fn split_tracks(
    tracks: Vec<AnnotationTrack>,
    validation_fraction: f64,
    seed: u64,
) -> Result<(Vec<AnnotationTrack>, Vec<AnnotationTrack>)> {
    let ds = SongDataset {
        songs: tracks
            .iter()
            .map(|t| (t.song_id.clone(), Vec::new()))
            .collect(),
        ..Default::default()
    };
    if ds.songs.len() != tracks.len() {
        return Err(Error::Format("duplicate song ids among tracks".into()));
    }
    let split = split_by_song(ds, validation_fraction, seed)?;
    let (val, train) = tracks
        .into_iter()
        .partition(|t| split.validation.contains(&t.song_id));
    Ok((train, val))
}
