//! Per-song least-squares lines of valence and arousal against time, and a
//! next-point comparison of the line, the LSTM and constant-hold.

use std::fmt;
use std::io::Write;

use crate::annotations::AnnotationTrack;
use crate::circumplex::EmotionPoint;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{make_windows, NextPointPredictor, WINDOW_LENGTH};
use crate::par::par_map;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Valence,
    Arousal,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Valence => "valence",
            Channel::Arousal => "arousal",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    /// Change per second.
    pub slope: f64,
    /// Value at the first annotated point (t = 0).
    pub intercept: f64,
    pub channel: Channel,
    pub song_id: String,
    pub residual_mse: f64,
}

/// Closed-form OLS of `values` on `times`: `(slope, intercept, residual_mse)`.
pub fn fit_line(times: &[f64], values: &[f64]) -> Result<(f64, f64, f64)> {
    if times.len() != values.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} times for {} values",
            times.len(),
            values.len()
        )));
    }
    if times.len() < 2 {
        return Err(Error::InvalidArgument("a line needs at least two points".into()));
    }
    let n = times.len() as f64;
    let t_mean = times.iter().sum::<f64>() / n;
    let y_mean = values.iter().sum::<f64>() / n;
    let (mut stt, mut sty) = (0.0, 0.0);
    for (t, y) in times.iter().zip(values) {
        stt += (t - t_mean) * (t - t_mean);
        sty += (t - t_mean) * (y - y_mean);
    }
    if !(stt > 0.0) {
        return Err(Error::InvalidArgument("time axis is constant; slope undefined".into()));
    }
    let slope = sty / stt;
    let intercept = y_mean - slope * t_mean;
    let residual_mse = times
        .iter()
        .zip(values)
        .map(|(t, y)| (y - (slope * t + intercept)).powi(2))
        .sum::<f64>()
        / n;
    if !(slope.is_finite() && intercept.is_finite()) {
        return Err(Error::InvalidValue("non-finite regression coefficients".into()));
    }
    Ok((slope, intercept, residual_mse))
}

/// Valence and arousal lines over time in seconds from the track's first point.
pub fn fit_linear(track: &AnnotationTrack) -> Result<(LinearFit, LinearFit)> {
    let times: Vec<f64> = (0..track.len()).map(|i| track.relative_time(i)).collect();
    let fit = |channel: Channel| -> Result<LinearFit> {
        let ys: Vec<f64> = track
            .points
            .iter()
            .map(|p| match channel {
                Channel::Valence => p.valence,
                Channel::Arousal => p.arousal,
            })
            .collect();
        let (slope, intercept, residual_mse) = fit_line(&times, &ys)?;
        Ok(LinearFit {
            slope,
            intercept,
            channel,
            song_id: track.song_id.clone(),
            residual_mse,
        })
    };
    Ok((fit(Channel::Valence)?, fit(Channel::Arousal)?))
}

/// `slope·t + intercept`, unclamped.
pub fn predict_linear(fit: &LinearFit, t: f64) -> f64 {
    fit.slope * t + fit.intercept
}

/// Repeats the last point of the window.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantHold;

impl NextPointPredictor for ConstantHold {
    fn name(&self) -> &str {
        "constant_hold"
    }

    fn predict_next(&self, window: &Matrix) -> Result<EmotionPoint> {
        let last = window
            .cols()
            .checked_sub(1)
            .ok_or_else(|| Error::ShapeMismatch("empty history window".into()))?;
        EmotionPoint::clamp(window.get(0, last), window.get(1, last))
    }
}

/// Fits a line to the window alone and extrapolates one step.
#[derive(Debug, Clone, Copy)]
pub struct LocalLinear {
    /// Seconds between points.
    pub step: f64,
}

impl Default for LocalLinear {
    fn default() -> Self {
        LocalLinear { step: 0.5 }
    }
}

impl NextPointPredictor for LocalLinear {
    fn name(&self) -> &str {
        "linear_local"
    }

    fn predict_next(&self, window: &Matrix) -> Result<EmotionPoint> {
        let n = window.cols();
        let times: Vec<f64> = (0..n).map(|i| i as f64 * self.step).collect();
        let next = n as f64 * self.step;
        let (sv, iv, _) = fit_line(&times, window.row(0))?;
        let (sa, ia, _) = fit_line(&times, window.row(1))?;
        EmotionPoint::clamp(sv * next + iv, sa * next + ia)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorScore {
    pub predictor: String,
    pub valence_mse: f64,
    pub arousal_mse: f64,
    /// Mean of the two channels.
    pub mse: f64,
}

/// One track of the comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub song_id: String,
    pub n_windows: usize,
    pub scores: Vec<PredictorScore>,
}

impl BaselineRow {
    pub fn score(&self, predictor: &str) -> Option<&PredictorScore> {
        self.scores.iter().find(|s| s.predictor == predictor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineReport {
    pub rows: Vec<BaselineRow>,
}

impl BaselineReport {
    /// Long format `song_id,channel,predictor,mse`; channel `both` is the
    /// two-channel mean.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["song_id", "channel", "predictor", "mse"])?;
        for row in &self.rows {
            for s in &row.scores {
                for (channel, v) in [("valence", s.valence_mse), ("arousal", s.arousal_mse), ("both", s.mse)] {
                    w.write_record([&row.song_id, channel, &s.predictor, &format!("{v:.9}")])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("baseline table", e))?;
        Ok(())
    }

    /// Mean over tracks of each predictor's two-channel MSE, in column order.
    pub fn summary(&self) -> Vec<(String, f64)> {
        let Some(first) = self.rows.first() else {
            return Vec::new();
        };
        first
            .scores
            .iter()
            .map(|s| {
                let total: f64 = self.rows.iter().filter_map(|r| r.score(&s.predictor)).map(|x| x.mse).sum();
                (s.predictor.clone(), total / self.rows.len() as f64)
            })
            .collect()
    }
}

fn score(name: &str, preds: &[EmotionPoint], targets: &[EmotionPoint]) -> PredictorScore {
    let n = targets.len() as f64;
    let (mut v, mut a) = (0.0, 0.0);
    for (p, t) in preds.iter().zip(targets) {
        v += (p.valence - t.valence).powi(2);
        a += (p.arousal - t.arousal).powi(2);
    }
    PredictorScore {
        predictor: name.to_string(),
        valence_mse: v / n,
        arousal_mse: a / n,
        mse: (v + a) / (2.0 * n),
    }
}

fn compare_track(track: &AnnotationTrack, model: Option<&(dyn NextPointPredictor + Sync)>) -> Result<BaselineRow> {
    let windows = make_windows(track, WINDOW_LENGTH);
    if windows.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "track {} has {} points; comparison needs at least {}",
            track.song_id,
            track.len(),
            WINDOW_LENGTH + 1
        )));
    }
    let targets: Vec<EmotionPoint> = windows.iter().map(|w| w.target).collect();
    let inputs: Vec<Matrix> = windows.iter().map(|w| w.input_matrix()).collect();
    let run = |p: &dyn NextPointPredictor| -> Result<PredictorScore> {
        let preds = inputs.iter().map(|x| p.predict_next(x)).collect::<Result<Vec<_>>>()?;
        Ok(score(p.name(), &preds, &targets))
    };

    let mut scores = vec![run(&LocalLinear::default())?];
    let (fv, fa) = fit_linear(track)?;
    let whole = windows
        .iter()
        .map(|w| {
            let t = track.relative_time(w.start + WINDOW_LENGTH);
            EmotionPoint::clamp(predict_linear(&fv, t), predict_linear(&fa, t))
        })
        .collect::<Result<Vec<_>>>()?;
    scores.push(score("linear_whole", &whole, &targets));
    if let Some(m) = model {
        scores.push(run(m)?);
    }
    scores.push(run(&ConstantHold)?);
    Ok(BaselineRow {
        song_id: track.song_id.clone(),
        n_windows: windows.len(),
        scores,
    })
}

/// Next-point MSE per track for the local line, the whole-song line, the
/// model (when given) and constant-hold. Predictions are clamped to the
/// circumplex before scoring.
pub fn compare_baseline(
    tracks: &[AnnotationTrack],
    model: Option<&(dyn NextPointPredictor + Sync)>,
) -> Result<BaselineReport> {
    let rows = par_map(tracks, |_, t| compare_track(t, model))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(BaselineReport { rows })
}
