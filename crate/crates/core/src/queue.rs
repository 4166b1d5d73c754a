//! Mood-continuing queue: predict where the listener's emotion trajectory is
//! heading and pick the candidate clip whose opening lands closest, choosing
//! at random among near-ties so the queue does not lock onto one mood.

use std::io::{Read, Write};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annotations::AnnotationTrack;
use crate::circumplex::{distance, EmotionPoint};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{predict_emotion, Model, NextPointPredictor, WINDOW_LENGTH};

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub clip_id: String,
    /// Representative emotion of the clip's first points.
    pub opening: EmotionPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueuePolicy {
    /// Candidates within `d_min + tolerance` of the prediction form the pool.
    pub tolerance: f64,
    pub opening_window_k: usize,
    pub seed: u64,
}

impl Default for QueuePolicy {
    fn default() -> Self {
        QueuePolicy {
            tolerance: 0.1,
            opening_window_k: 4,
            seed: 0,
        }
    }
}

impl QueuePolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tolerance {} must be finite and non-negative",
                self.tolerance
            )));
        }
        if self.opening_window_k == 0 {
            return Err(Error::InvalidArgument("opening window must be at least 1".into()));
        }
        Ok(())
    }
}

/// Coordinate-wise mean of the first `k` points.
pub fn opening_emotion(track: &AnnotationTrack, k: usize) -> Result<EmotionPoint> {
    if k == 0 || track.len() < k {
        return Err(Error::InvalidArgument(format!(
            "track {} has {} points; opening window needs {k}",
            track.song_id,
            track.len()
        )));
    }
    mean_point(&track.points[..k])
}

fn mean_point(points: &[EmotionPoint]) -> Result<EmotionPoint> {
    let n = points.len() as f64;
    let v = points.iter().map(|p| p.valence).sum::<f64>() / n;
    let a = points.iter().map(|p| p.arousal).sum::<f64>() / n;
    EmotionPoint::clamp(v, a)
}

/// Opening emotion of an unlabeled clip from emotion-model predictions on
/// its first `k` half-second feature matrices.
pub fn opening_from_features(model: &Model, clips: &[Matrix], k: usize) -> Result<EmotionPoint> {
    if k == 0 || clips.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} feature clips; opening window needs {k}",
            clips.len()
        )));
    }
    let points = clips[..k]
        .iter()
        .map(|m| predict_emotion(model, m))
        .collect::<Result<Vec<_>>>()?;
    mean_point(&points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub clip_id: String,
    pub predicted: EmotionPoint,
    pub distance: f64,
    pub pool_size: usize,
}

/// Indices of the candidates within `d_min + tolerance` of `target`,
/// ordered by clip id, with their distances.
pub fn candidate_pool(target: &EmotionPoint, candidates: &[Candidate], tolerance: f64) -> Vec<(usize, f64)> {
    let dists: Vec<f64> = candidates.iter().map(|c| distance(&c.opening, target)).collect();
    let d_min = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let mut pool: Vec<(usize, f64)> = dists
        .into_iter()
        .enumerate()
        .filter(|&(_, d)| d <= d_min + tolerance)
        .collect();
    pool.sort_by(|a, b| candidates[a.0].clip_id.cmp(&candidates[b.0].clip_id).then(a.0.cmp(&b.0)));
    pool
}

/// Predicts the next point after `history` (`2 × 10`) and picks a candidate.
///
/// With tolerance 0 the nearest candidate wins, ties going to the lowest
/// clip id. Otherwise the choice is uniform over the pool, drawn from a
/// generator seeded with `policy.seed`.
pub fn select_next(
    history: &Matrix,
    predictor: &dyn NextPointPredictor,
    candidates: &[Candidate],
    policy: &QueuePolicy,
) -> Result<Selection> {
    policy.validate()?;
    if candidates.is_empty() {
        return Err(Error::Empty("no candidates to choose from".into()));
    }
    let predicted = predictor.predict_next(history)?;
    let pool = candidate_pool(&predicted, candidates, policy.tolerance);
    let pick = if policy.tolerance == 0.0 {
        0
    } else {
        ChaCha8Rng::seed_from_u64(policy.seed).random_range(0..pool.len())
    };
    let (i, d) = pool[pick];
    Ok(Selection {
        clip_id: candidates[i].clip_id.clone(),
        predicted,
        distance: d,
        pool_size: pool.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    pub selection: Selection,
}

/// Plays `steps` picks without repeats. After each pick the chosen clip's
/// opening is appended to the history, as if the listener had heard it.
pub fn run_session(
    history: &[EmotionPoint],
    predictor: &dyn NextPointPredictor,
    candidates: &[Candidate],
    policy: &QueuePolicy,
    steps: usize,
) -> Result<Vec<TraceStep>> {
    policy.validate()?;
    if history.len() != WINDOW_LENGTH {
        return Err(Error::ShapeMismatch(format!(
            "history has {} points, expected {WINDOW_LENGTH}",
            history.len()
        )));
    }
    let mut window: Vec<EmotionPoint> = history.to_vec();
    let mut remaining: Vec<Candidate> = candidates.to_vec();
    let mut seeds = ChaCha8Rng::seed_from_u64(policy.seed);
    let mut trace = Vec::new();
    for step in 1..=steps {
        if remaining.is_empty() {
            break;
        }
        let step_policy = QueuePolicy {
            seed: seeds.random(),
            ..policy.clone()
        };
        let sel = select_next(
            &crate::models::history_matrix(&window),
            predictor,
            &remaining,
            &step_policy,
        )?;
        let idx = remaining.iter().position(|c| c.clip_id == sel.clip_id).expect("chosen from list");
        let chosen = remaining.remove(idx);
        window.remove(0);
        window.push(chosen.opening);
        trace.push(TraceStep { step, selection: sel });
    }
    Ok(trace)
}

/// `step,chosen_id,pred_valence,pred_arousal,distance`.
pub fn write_trace<W: Write>(out: W, trace: &[TraceStep]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "chosen_id", "pred_valence", "pred_arousal", "distance"])?;
    for t in trace {
        let s = &t.selection;
        w.write_record([
            t.step.to_string(),
            s.clip_id.clone(),
            format!("{:.6}", s.predicted.valence),
            format!("{:.6}", s.predicted.arousal),
            format!("{:.6}", s.distance),
        ])?;
    }
    w.flush().map_err(|e| Error::io("queue trace", e))?;
    Ok(())
}

/// Where a manifest entry's opening emotion comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum OpeningSource {
    Annotated(EmotionPoint),
    /// WAV or feature file to run the emotion model on.
    Audio(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub clip_id: String,
    pub source: OpeningSource,
}

/// Reads a candidate library: `clip_id,path` or `clip_id,valence,arousal`.
pub fn read_manifest<R: Read>(input: R) -> Result<Vec<ManifestEntry>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let annotated = match header.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["clip_id", "path"] => false,
        ["clip_id", "valence", "arousal"] => true,
        _ => {
            return Err(Error::Format(format!(
                "manifest header {header:?}; expected clip_id,path or clip_id,valence,arousal"
            )))
        }
    };
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let source = if annotated {
            let num = |i: usize| -> Result<f64> {
                rec[i].parse::<f64>().map_err(|_| {
                    Error::Format(format!("manifest row {}: {:?} is not a number", line + 2, &rec[i]))
                })
            };
            let (v, a) = (num(1)?, num(2)?);
            if v.abs() > 1.0 || a.abs() > 1.0 {
                return Err(Error::ScaleViolation {
                    song_id: rec[0].to_string(),
                    value: if v.abs() > 1.0 { v } else { a },
                });
            }
            OpeningSource::Annotated(EmotionPoint::clamp(v, a)?)
        } else {
            OpeningSource::Audio(PathBuf::from(&rec[1]))
        };
        out.push(ManifestEntry {
            clip_id: rec[0].to_string(),
            source,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::ConstantHold;
    use proptest::prelude::*;

    /// Always predicts the origin.
    struct Origin;
    impl NextPointPredictor for Origin {
        fn name(&self) -> &str {
            "origin"
        }
        fn predict_next(&self, _: &Matrix) -> Result<EmotionPoint> {
            Ok(EmotionPoint::ORIGIN)
        }
    }

    fn cand(id: &str, v: f64, a: f64) -> Candidate {
        Candidate {
            clip_id: id.into(),
            opening: EmotionPoint::clamp(v, a).unwrap(),
        }
    }

    fn policy(tolerance: f64, seed: u64) -> QueuePolicy {
        QueuePolicy {
            tolerance,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn opening_examples() {
        let pts = vec![EmotionPoint::ORIGIN, EmotionPoint::clamp(0.4, 0.2).unwrap(), EmotionPoint::ORIGIN];
        let t = AnnotationTrack::new("s", pts).unwrap();
        let o = opening_emotion(&t, 2).unwrap();
        assert!((o.valence - 0.2).abs() < 1e-15 && (o.arousal - 0.1).abs() < 1e-15);
        assert_eq!(opening_emotion(&t, 1).unwrap(), EmotionPoint::ORIGIN);
        assert!(opening_emotion(&t, 4).is_err());
        let c = AnnotationTrack::new("c", vec![EmotionPoint::clamp(-0.3, 0.7).unwrap(); 6]).unwrap();
        assert_eq!(opening_emotion(&c, 5).unwrap(), c.points[0]);
    }

    #[test]
    fn pool_from_hand_enumeration() {
        // distances 0.1, 0.15, 0.5 from the origin
        let cs = vec![cand("a", 0.1, 0.0), cand("b", 0.0, 0.15), cand("c", 0.5, 0.0)];
        let h = Matrix::zeros(2, 10);
        for seed in 0..100 {
            let s = select_next(&h, &Origin, &cs, &policy(0.1, seed)).unwrap();
            assert!(s.clip_id == "a" || s.clip_id == "b");
            assert_eq!(s.pool_size, 2);
        }
    }

    #[test]
    fn zero_tolerance_tie_break_and_single_candidate() {
        let cs = vec![cand("z", 0.2, 0.0), cand("m", 0.0, 0.2), cand("q", 0.0, -0.2)];
        let h = Matrix::zeros(2, 10);
        for seed in 0..20 {
            assert_eq!(select_next(&h, &Origin, &cs, &policy(0.0, seed)).unwrap().clip_id, "m");
        }
        let far = vec![cand("only", -1.0, -1.0)];
        let s = select_next(&h, &Origin, &far, &policy(0.0, 0)).unwrap();
        assert_eq!(s.clip_id, "only");
        assert!((s.distance - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(select_next(&h, &Origin, &[], &policy(0.1, 0)), Err(Error::Empty(_))));
        assert!(select_next(&h, &Origin, &far, &policy(-0.1, 0)).is_err());
    }

    #[test]
    fn session_without_repeats() {
        let cs: Vec<Candidate> = (0..6).map(|i| cand(&format!("c{i}"), i as f64 * 0.1, 0.0)).collect();
        let h = vec![EmotionPoint::ORIGIN; 10];
        let trace = run_session(&h, &ConstantHold, &cs, &policy(0.0, 3), 10).unwrap();
        let ids: Vec<&str> = trace.iter().map(|t| t.selection.clip_id.as_str()).collect();
        // constant-hold follows the last opening, so the walk climbs one by one
        assert_eq!(ids, ["c0", "c1", "c2", "c3", "c4", "c5"]);
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,chosen_id,pred_valence,pred_arousal,distance\n1,c0,0.000000,0.000000,0.000000\n"));
        assert_eq!(
            run_session(&h, &ConstantHold, &cs, &policy(0.3, 9), 4).unwrap(),
            run_session(&h, &ConstantHold, &cs, &policy(0.3, 9), 4).unwrap()
        );
    }

    #[test]
    fn manifests() {
        let m = read_manifest("clip_id,valence,arousal\nx,0.5,-0.25\ny, 0 , 1\n".as_bytes()).unwrap();
        assert_eq!(m[0].source, OpeningSource::Annotated(EmotionPoint::clamp(0.5, -0.25).unwrap()));
        assert_eq!(m[1].clip_id, "y");
        let p = read_manifest("clip_id,path\nx,songs/x.wav\n".as_bytes()).unwrap();
        assert_eq!(p[0].source, OpeningSource::Audio("songs/x.wav".into()));
        assert!(read_manifest("id,path\n".as_bytes()).is_err());
        assert!(read_manifest("clip_id,valence,arousal\nx,2,0\n".as_bytes()).is_err());
        assert!(read_manifest("clip_id,valence,arousal\nx,up,0\n".as_bytes()).is_err());
    }

    fn candidates_strategy() -> impl Strategy<Value = Vec<Candidate>> {
        proptest::collection::vec((0u8..20, -1.0f64..1.0, -1.0f64..1.0), 1..30).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (id, a, b))| cand(&format!("k{id:02}_{i}"), a, b))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn within_tolerance(cs in candidates_strategy(), tol in 0.0f64..0.5, seed: u64) {
            let s = select_next(&Matrix::zeros(2, 10), &Origin, &cs, &policy(tol, seed)).unwrap();
            let d_min = cs.iter().map(|c| c.opening.intensity()).fold(f64::INFINITY, f64::min);
            prop_assert!(s.distance <= d_min + tol);
        }

        #[test]
        fn pool_grows_with_tolerance(cs in candidates_strategy(), t1 in 0.0f64..0.5, dt in 0.0f64..0.5) {
            let a = candidate_pool(&EmotionPoint::ORIGIN, &cs, t1);
            let b = candidate_pool(&EmotionPoint::ORIGIN, &cs, t1 + dt);
            prop_assert!(a.iter().all(|x| b.contains(x)));
        }
    }
}
