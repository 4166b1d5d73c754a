use super::Example;
use crate::annotations::AnnotationTrack;
use crate::circumplex::EmotionPoint;
use crate::matrix::Matrix;

/// History length used by the next-point model.
pub const WINDOW_LENGTH: usize = 10;

/// `length` consecutive points and the point that follows them.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub song_id: String,
    /// Index of the first point in the track.
    pub start: usize,
    pub history: Vec<EmotionPoint>,
    pub target: EmotionPoint,
}

impl Window {
    /// `2 × length` matrix: row 0 valence, row 1 arousal.
    pub fn input_matrix(&self) -> Matrix {
        history_matrix(&self.history)
    }
}

/// `2 × n` matrix of a point sequence: row 0 valence, row 1 arousal.
pub fn history_matrix(history: &[EmotionPoint]) -> Matrix {
    Matrix::from_fn(2, history.len(), |r, c| {
        if r == 0 {
            history[c].valence
        } else {
            history[c].arousal
        }
    })
}

/// Every sliding window of a track: `len - length` of them, none when the
/// track is too short.
pub fn make_windows(track: &AnnotationTrack, length: usize) -> Vec<Window> {
    if length == 0 || track.len() <= length {
        return Vec::new();
    }
    (0..track.len() - length)
        .map(|s| Window {
            song_id: track.song_id.clone(),
            start: s,
            history: track.points[s..s + length].to_vec(),
            target: track.points[s + length],
        })
        .collect()
}

/// Windows of every track, skipping (with a warning) tracks that are too short.
pub fn windows_to_examples(tracks: &[AnnotationTrack], length: usize) -> Vec<Example> {
    let mut out = Vec::new();
    for t in tracks {
        if t.len() <= length {
            log::warn!("track {} too short for windows of {length}; skipped", t.song_id);
            continue;
        }
        out.extend(make_windows(t, length).into_iter().map(|w| Example {
            input: w.input_matrix(),
            target: w.target.as_array(),
            group: w.song_id,
        }));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn track(n: usize) -> AnnotationTrack {
        let pts = (0..n)
            .map(|i| EmotionPoint::clamp(i as f64 / 100.0, -(i as f64) / 100.0).unwrap())
            .collect();
        AnnotationTrack::new("s", pts).unwrap()
    }

    #[test]
    fn eleven_points_give_one_window() {
        let w = make_windows(&track(11), 10);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].target.valence, 0.10);
        let m = w[0].input_matrix();
        assert_eq!(m.shape(), (2, 10));
        assert_eq!(m.get(0, 9), 0.09);
        assert_eq!(m.get(1, 9), -0.09);
    }

    #[test]
    fn too_short() {
        assert!(make_windows(&track(10), 10).is_empty());
        assert_eq!(make_windows(&track(58), 10).len(), 48);
        assert_eq!(windows_to_examples(&[track(5), track(12)], 10).len(), 2);
    }

    proptest! {
        #[test]
        fn count_and_alignment(n in 11usize..80, len in 1usize..11) {
            let t = track(n);
            let w = make_windows(&t, len);
            prop_assert_eq!(w.len(), n - len);
            for x in &w {
                prop_assert_eq!(x.history.len(), len);
                prop_assert_eq!(x.target, t.points[x.start + len]);
                prop_assert_eq!(&x.history[..], &t.points[x.start..x.start + len]);
            }
        }
    }
}
