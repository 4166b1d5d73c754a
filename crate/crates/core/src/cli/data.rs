use std::fs::File;
use std::path::PathBuf;

use clap::Args;

use crate::annotations::{
    join_clips, load_emomusic, read_long_csv, split_by_song, split_tracks, synth_labeled_clips, synth_tracks,
    AnnotationTrack, ScaleMode, SongDataset, TrackKind,
};
use crate::dsp::{read_features, DspConfig};
use crate::error::{Error, Result};
use crate::models::{dataset_examples, windows_to_examples, Example, Task, WINDOW_LENGTH};

use super::Split;

/// Where annotations and features come from, and how songs are split.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Directory of `<song_id>.melf` feature files
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Long-format annotations: song_id,time_s,valence,arousal
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Wide per-song arousal CSV (with --valence)
    #[arg(long)]
    pub arousal: Option<PathBuf>,
    /// Wide per-song valence CSV (with --arousal)
    #[arg(long)]
    pub valence: Option<PathBuf>,
    /// Divide annotations by this and clamp, instead of rejecting values outside [-1, 1]
    #[arg(long)]
    pub lenient_scale: Option<f64>,
    /// Audio time in seconds at which the feature files start
    #[arg(long, default_value_t = 0.0)]
    pub audio_start: f64,
    /// Seconds per feature clip
    #[arg(long, default_value_t = 0.5)]
    pub clip_seconds: f64,
    /// Generate data instead: constant, linear, sine or piecewise
    #[arg(long)]
    pub synthetic: Option<TrackKind>,
    /// Songs to generate [default: 500 tracks, or 16 songs of audio for emotion]
    #[arg(long)]
    pub synthetic_songs: Option<usize>,
    /// Points (or clips) per synthetic song
    #[arg(long, default_value_t = 61)]
    pub synthetic_length: usize,
    #[arg(long, default_value_t = 0.01)]
    pub synthetic_noise: f64,
    /// Fraction of songs held out for validation
    #[arg(long, default_value_t = 0.2)]
    pub validation_fraction: f64,
    /// Seeds data generation, the split, initialization and training
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl DataArgs {
    pub fn load_tracks(&self) -> Result<Vec<AnnotationTrack>> {
        if let Some(kind) = self.synthetic {
            return synth_tracks(
                self.synthetic_songs.unwrap_or(500),
                self.synthetic_length,
                kind,
                self.synthetic_noise,
                self.seed,
            );
        }
        if let Some(path) = &self.annotations {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            return read_long_csv(file);
        }
        match (&self.arousal, &self.valence) {
            (Some(a), Some(v)) => {
                let mode = match self.lenient_scale {
                    Some(scale) => ScaleMode::Lenient { scale },
                    None => ScaleMode::Strict,
                };
                load_emomusic(a, v, mode)
            }
            (None, None) => Err(Error::InvalidArgument(
                "no annotations: give --annotations, --arousal with --valence, or --synthetic".into(),
            )),
            _ => Err(Error::InvalidArgument("--arousal and --valence go together".into())),
        }
    }

    /// Labeled clips: annotation points joined with stored features. Clips
    /// before each track's start time are dropped so clip `j` lines up with
    /// the point annotated at `audio_start + j·clip_seconds`.
    pub fn emotion_dataset(&self) -> Result<SongDataset> {
        if let Some(kind) = self.synthetic {
            if kind != TrackKind::Sine {
                log::warn!("synthetic emotion data always follows sine trajectories");
            }
            let clips = synth_labeled_clips(
                self.synthetic_songs.unwrap_or(16),
                self.synthetic_length,
                &DspConfig::default(),
                self.seed,
            )?;
            return Ok(SongDataset::from_clips(clips));
        }
        let dir = self
            .features
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("emotion data needs --features".into()))?;
        let mut all = Vec::new();
        for track in self.load_tracks()? {
            let path = dir.join(format!("{}.melf", track.song_id));
            if !path.exists() {
                log::warn!("no features for song {} at {}; skipped", track.song_id, path.display());
                continue;
            }
            let clips = read_features(&path)?;
            let offset = (track.start_time - self.audio_start) / self.clip_seconds;
            if offset < -1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "song {} annotations start at {} s, before the audio start {} s",
                    track.song_id, track.start_time, self.audio_start
                )));
            }
            let skip = offset.round() as usize;
            if skip >= clips.len() {
                log::warn!("song {}: features end before the annotations start; skipped", track.song_id);
                continue;
            }
            all.extend(join_clips(&clips[skip..], &track)?);
        }
        if all.is_empty() {
            return Err(Error::Empty("no labeled clips".into()));
        }
        Ok(SongDataset::from_clips(all))
    }

    /// Train and validation examples for `task`, split by song.
    pub fn split_examples(&self, task: Task) -> Result<(Vec<Example>, Vec<Example>)> {
        match task {
            Task::Emotion => {
                let ds = split_by_song(self.emotion_dataset()?, self.validation_fraction, self.seed)?;
                Ok(dataset_examples(&ds))
            }
            Task::NextPoint => {
                let (train, val) = split_tracks(self.load_tracks()?, self.validation_fraction, self.seed)?;
                Ok((
                    windows_to_examples(&train, WINDOW_LENGTH),
                    windows_to_examples(&val, WINDOW_LENGTH),
                ))
            }
        }
    }

    pub fn examples(&self, task: Task, split: Split) -> Result<Vec<Example>> {
        if split == Split::All {
            return Ok(match task {
                // an unsplit dataset keeps every song on the train side
                Task::Emotion => dataset_examples(&self.emotion_dataset()?).0,
                Task::NextPoint => windows_to_examples(&self.load_tracks()?, WINDOW_LENGTH),
            });
        }
        let (train, val) = self.split_examples(task)?;
        Ok(if split == Split::Train { train } else { val })
    }
}
