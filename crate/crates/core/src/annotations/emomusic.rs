//! Import of the wide per-song annotation format: a header row, then one row
//! per song whose first cell is the song id and whose remaining cells are the
//! 2 Hz values in time order. Arousal and valence live in separate files.

use std::collections::HashMap;
use std::path::Path;

use super::{AnnotationTrack, ANNOTATION_RATE_HZ, DEFAULT_START_SECONDS};
use crate::circumplex::EmotionPoint;
use crate::error::{Error, Result};

/// How to treat values outside [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleMode {
    /// Any out-of-range value is an error.
    Strict,
    /// Divide every value by `scale`, then clamp.
    Lenient { scale: f64 },
}

struct WideTable {
    n_columns: usize,
    start_time: f64,
    rows: Vec<(String, Vec<f64>)>,
}

/// Reads `sample_15000ms`-style headers; anything else falls back to 15 s.
fn start_time_from_header(header: &str) -> f64 {
    let digits: String = header.chars().filter(|c| c.is_ascii_digit()).collect();
    match digits.parse::<f64>() {
        Ok(ms) if header.trim_end().ends_with("ms") => ms / 1000.0,
        _ => DEFAULT_START_SECONDS,
    }
}

fn read_wide(path: &Path) -> Result<WideTable> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Format(format!("{}: {other:?}", path.display())),
        })?;
    let headers = reader.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::Format(format!(
            "{}: expected a song id column and at least one value column",
            path.display()
        )));
    }
    let start_time = start_time_from_header(&headers[1]);
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let mut cells = record.iter();
        let id = cells.next().unwrap_or_default().to_string();
        if id.is_empty() {
            return Err(Error::Format(format!(
                "{} row {}: missing song id",
                path.display(),
                line + 2
            )));
        }
        let mut cells: Vec<&str> = cells.collect();
        while cells.last().is_some_and(|c| c.is_empty()) {
            cells.pop();
        }
        let values = cells
            .iter()
            .map(|c| {
                c.parse::<f64>().map_err(|_| {
                    Error::Format(format!(
                        "{} song {id}: non-numeric cell {c:?}",
                        path.display()
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() {
            return Err(Error::Format(format!("{} song {id}: no values", path.display())));
        }
        rows.push((id, values));
    }
    Ok(WideTable {
        n_columns: headers.len(),
        start_time,
        rows,
    })
}

fn apply_scale(song_id: &str, values: Vec<f64>, mode: ScaleMode) -> Result<Vec<f64>> {
    match mode {
        ScaleMode::Strict => {
            if let Some(&value) = values.iter().find(|v| !(v.abs() <= 1.0)) {
                return Err(Error::ScaleViolation {
                    song_id: song_id.to_string(),
                    value,
                });
            }
            Ok(values)
        }
        ScaleMode::Lenient { scale } => Ok(values
            .into_iter()
            .map(|v| (v / scale).clamp(-1.0, 1.0))
            .collect()),
    }
}

fn load_pair(
    arousal: &Path,
    valence: &Path,
    mode: ScaleMode,
) -> Result<(f64, Vec<(String, Vec<f64>, Vec<f64>)>)> {
    if let ScaleMode::Lenient { scale } = mode {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale factor {scale} must be positive")));
        }
    }
    let a = read_wide(arousal)?;
    let v = read_wide(valence)?;
    if a.n_columns != v.n_columns {
        return Err(Error::Format(format!(
            "{} has {} columns but {} has {}",
            arousal.display(),
            a.n_columns,
            valence.display(),
            v.n_columns
        )));
    }
    let mut by_id: HashMap<String, Vec<f64>> = v.rows.into_iter().collect();
    let mut out = Vec::new();
    for (id, a_vals) in a.rows {
        let Some(v_vals) = by_id.remove(&id) else {
            log::warn!("song {id} has arousal but no valence annotations; skipped");
            continue;
        };
        if a_vals.len() != v_vals.len() {
            return Err(Error::Format(format!(
                "song {id}: {} arousal values but {} valence values",
                a_vals.len(),
                v_vals.len()
            )));
        }
        let a_vals = apply_scale(&id, a_vals, mode)?;
        let v_vals = apply_scale(&id, v_vals, mode)?;
        out.push((id, v_vals, a_vals));
    }
    for id in by_id.keys() {
        log::warn!("song {id} has valence but no arousal annotations; skipped");
    }
    Ok((a.start_time, out))
}

/// Loads paired arousal/valence wide CSVs into tracks, in arousal-file row order.
pub fn load_emomusic(
    arousal_csv: &Path,
    valence_csv: &Path,
    mode: ScaleMode,
) -> Result<Vec<AnnotationTrack>> {
    let (start_time, rows) = load_pair(arousal_csv, valence_csv, mode)?;
    rows.into_iter()
        .map(|(id, v, a)| {
            let points = v
                .iter()
                .zip(&a)
                .map(|(&v, &a)| EmotionPoint::clamp(v, a))
                .collect::<Result<Vec<_>>>()?;
            let mut track = AnnotationTrack::new(id, points)?;
            track.start_time = start_time;
            track.rate = ANNOTATION_RATE_HZ;
            Ok(track)
        })
        .collect()
}

/// As [`load_emomusic`], also attaching the per-point standard deviations.
pub fn load_emomusic_with_std(
    arousal_csv: &Path,
    valence_csv: &Path,
    arousal_std_csv: &Path,
    valence_std_csv: &Path,
    mode: ScaleMode,
) -> Result<Vec<AnnotationTrack>> {
    let tracks = load_emomusic(arousal_csv, valence_csv, mode)?;
    let std_mode = match mode {
        ScaleMode::Strict => ScaleMode::Lenient { scale: 1.0 },
        lenient => lenient,
    };
    let (_, std_rows) = load_pair(arousal_std_csv, valence_std_csv, std_mode)?;
    let mut stds: HashMap<String, Vec<(f64, f64)>> = std_rows
        .into_iter()
        .map(|(id, v, a)| (id, v.into_iter().zip(a).collect()))
        .collect();
    tracks
        .into_iter()
        .map(|t| match stds.remove(&t.song_id) {
            Some(s) => t.with_stds(s),
            None => Ok(t),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn header(n: usize) -> String {
        let cols: Vec<String> = (0..n).map(|i| format!("sample_{}ms", 15000 + 500 * i)).collect();
        format!("song_id,{}\n", cols.join(","))
    }

    fn write_pair(dir: &Path, a: &str, v: &str) -> (std::path::PathBuf, std::path::PathBuf) {
        let (pa, pv) = (dir.join("arousal.csv"), dir.join("valence.csv"));
        fs::write(&pa, a).unwrap();
        fs::write(&pv, v).unwrap();
        (pa, pv)
    }

    #[test]
    fn sixty_columns_span_fifteen_to_forty_four_and_a_half() {
        let dir = tempfile::tempdir().unwrap();
        let row: Vec<String> = (0..60).map(|i| format!("{:.2}", i as f64 / 100.0)).collect();
        let body = format!("{}7,{}\n", header(60), row.join(","));
        let (pa, pv) = write_pair(dir.path(), &body, &body);
        let tracks = load_emomusic(&pa, &pv, ScaleMode::Strict).unwrap();
        assert_eq!(tracks.len(), 1);
        let t = &tracks[0];
        assert_eq!(t.len(), 60);
        assert_eq!(t.time_of(0), 15.0);
        assert_eq!(t.time_of(59), 44.5);
    }

    #[test]
    fn field_mapping() {
        let dir = tempfile::tempdir().unwrap();
        let (pa, pv) = write_pair(
            dir.path(),
            &format!("{}2,0.5\n", header(1)),
            &format!("{}2,-0.25\n", header(1)),
        );
        let t = &load_emomusic(&pa, &pv, ScaleMode::Strict).unwrap()[0];
        assert_eq!(t.points[0].valence, -0.25);
        assert_eq!(t.points[0].arousal, 0.5);
        assert_eq!(t.song_id, "2");
    }

    #[test]
    fn strict_and_lenient_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let (pa, pv) = write_pair(
            dir.path(),
            &format!("{}2,1.2,0.4\n", header(2)),
            &format!("{}2,0.1,0.2\n", header(2)),
        );
        assert!(matches!(
            load_emomusic(&pa, &pv, ScaleMode::Strict),
            Err(Error::ScaleViolation { value, .. }) if value == 1.2
        ));
        let t = &load_emomusic(&pa, &pv, ScaleMode::Lenient { scale: 2.0 }).unwrap()[0];
        assert!((t.points[0].arousal - 0.6).abs() < 1e-12);
        assert!((t.points[1].valence - 0.1).abs() < 1e-12);
    }

    #[test]
    fn malformed_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let (pa, pv) = write_pair(
            dir.path(),
            &format!("{}2,0.1,abc\n", header(2)),
            &format!("{}2,0.1,0.2\n", header(2)),
        );
        assert!(matches!(load_emomusic(&pa, &pv, ScaleMode::Strict), Err(Error::Format(_))));

        let (pa, pv) = write_pair(
            dir.path(),
            &format!("{}2,0.1,0.2\n", header(2)),
            &format!("{}2,0.1,0.2,0.3\n", header(3)),
        );
        assert!(matches!(load_emomusic(&pa, &pv, ScaleMode::Strict), Err(Error::Format(_))));
    }

    #[test]
    fn unpaired_rows_are_skipped_and_ragged_rows_trimmed() {
        let dir = tempfile::tempdir().unwrap();
        let (pa, pv) = write_pair(
            dir.path(),
            &format!("{}1,0.1,0.2,0.3\n2,0.1,,\n3,0.0,0.0,0.0\n", header(3)),
            &format!("{}1,0.1,0.2,0.3\n2,0.3,,\n", header(3)),
        );
        let tracks = load_emomusic(&pa, &pv, ScaleMode::Strict).unwrap();
        let ids: Vec<_> = tracks.iter().map(|t| t.song_id.as_str()).collect();
        assert_eq!(ids, vec!["1", "2"]);
        assert_eq!(tracks[1].len(), 1);
    }

    #[test]
    fn std_files_attach() {
        let dir = tempfile::tempdir().unwrap();
        let (pa, pv) = write_pair(
            dir.path(),
            &format!("{}1,0.1,0.2\n", header(2)),
            &format!("{}1,0.3,0.4\n", header(2)),
        );
        let (sa, sv) = (dir.path().join("sa.csv"), dir.path().join("sv.csv"));
        fs::write(&sa, format!("{}1,0.35,0.3\n", header(2))).unwrap();
        fs::write(&sv, format!("{}1,0.25,0.2\n", header(2))).unwrap();
        let t = &load_emomusic_with_std(&pa, &pv, &sa, &sv, ScaleMode::Strict).unwrap()[0];
        assert_eq!(t.stds.as_ref().unwrap(), &vec![(0.25, 0.35), (0.2, 0.3)]);
    }
}
