//! Canonical long CSV: `song_id,time_s,valence,arousal[,valence_std,arousal_std]`,
//! one row per annotation point, reals with six decimals.

use std::io::{Read, Write};

use super::{AnnotationTrack, ANNOTATION_RATE_HZ};
use crate::circumplex::EmotionPoint;
use crate::error::{Error, Result};

pub fn write_long_csv<W: Write>(out: W, tracks: &[AnnotationTrack]) -> Result<()> {
    let with_std = tracks.iter().any(|t| t.stds.is_some());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    if with_std {
        w.write_record(["song_id", "time_s", "valence", "arousal", "valence_std", "arousal_std"])?;
    } else {
        w.write_record(["song_id", "time_s", "valence", "arousal"])?;
    }
    for t in tracks {
        for (i, p) in t.points.iter().enumerate() {
            let mut row = vec![
                t.song_id.clone(),
                format!("{:.6}", t.time_of(i)),
                format!("{:.6}", p.valence),
                format!("{:.6}", p.arousal),
            ];
            if with_std {
                let (vs, a_s) = t.stds.as_ref().map(|s| s[i]).unwrap_or((0.0, 0.0));
                row.push(format!("{vs:.6}"));
                row.push(format!("{a_s:.6}"));
            }
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// Reads tracks back, grouping consecutive rows by song id in file order.
pub fn read_long_csv<R: Read>(input: R) -> Result<Vec<AnnotationTrack>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let with_std = match cols.as_slice() {
        ["song_id", "time_s", "valence", "arousal"] => false,
        ["song_id", "time_s", "valence", "arousal", "valence_std", "arousal_std"] => true,
        other => {
            return Err(Error::Format(format!("unexpected long CSV header {other:?}")));
        }
    };

    let mut tracks: Vec<AnnotationTrack> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let id = &record[0];
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("song {id}: non-numeric cell {:?}", &record[i])))
        };
        let time = num(1)?;
        let point = EmotionPoint::clamp(num(2)?, num(3)?)?;
        let std = if with_std { Some((num(4)?, num(5)?)) } else { None };

        match tracks.last_mut() {
            Some(t) if t.song_id == id => {
                t.points.push(point);
                if let (Some(s), Some(v)) = (t.stds.as_mut(), std) {
                    s.push(v);
                }
            }
            _ => {
                if tracks.iter().any(|t| t.song_id == id) {
                    return Err(Error::Format(format!("rows for song {id} are not contiguous")));
                }
                tracks.push(AnnotationTrack {
                    song_id: id.to_string(),
                    start_time: time,
                    rate: ANNOTATION_RATE_HZ,
                    points: vec![point],
                    stds: std.map(|s| vec![s]),
                });
            }
        }
    }
    for t in &tracks {
        t.validate()?;
    }
    Ok(tracks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{synth_tracks, TrackKind};
    use proptest::prelude::*;

    #[test]
    fn format_is_six_decimals_and_lf() {
        let t = AnnotationTrack::new("a", vec![EmotionPoint::clamp(0.5, -0.25).unwrap()]).unwrap();
        let mut buf = Vec::new();
        write_long_csv(&mut buf, &[t]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "song_id,time_s,valence,arousal\na,15.000000,0.500000,-0.250000\n"
        );
    }

    #[test]
    fn rejects_unknown_header_and_split_songs() {
        assert!(read_long_csv("id,t,v,a\n".as_bytes()).is_err());
        let body = "song_id,time_s,valence,arousal\na,15,0,0\nb,15,0,0\na,15.5,0,0\n";
        assert!(read_long_csv(body.as_bytes()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn round_trip_within_1e6(seed in any::<u64>(), n in 1usize..4, len in 11usize..30, with_std in any::<bool>()) {
            let mut tracks = synth_tracks(n, len, TrackKind::Sine, 0.05, seed).unwrap();
            if with_std {
                tracks = tracks
                    .into_iter()
                    .map(|t| {
                        let s = (0..t.len()).map(|i| (0.3 + i as f64 * 1e-3, 0.2)).collect();
                        t.with_stds(s).unwrap()
                    })
                    .collect();
            }
            let mut buf = Vec::new();
            write_long_csv(&mut buf, &tracks).unwrap();
            let back = read_long_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), tracks.len());
            for (a, b) in tracks.iter().zip(&back) {
                prop_assert_eq!(&a.song_id, &b.song_id);
                prop_assert!((a.start_time - b.start_time).abs() < 1e-6);
                prop_assert_eq!(a.len(), b.len());
                for (p, q) in a.points.iter().zip(&b.points) {
                    prop_assert!(p.distance(q) < 1e-6);
                }
                prop_assert_eq!(a.stds.is_some(), b.stds.is_some());
                if let (Some(x), Some(y)) = (&a.stds, &b.stds) {
                    for (s, t) in x.iter().zip(y) {
                        prop_assert!((s.0 - t.0).abs() < 1e-6 && (s.1 - t.1).abs() < 1e-6);
                    }
                }
            }
        }
    }
}
