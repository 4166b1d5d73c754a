use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{AudioClip, SAMPLE_RATE};
use crate::error::{Error, Result};

/// Reads a PCM WAV file, normalizes to [-1, 1] and downmixes to mono.
///
/// Accepts 16- and 32-bit integer or 32-bit float samples at 44100 Hz.
pub fn load_wav(path: &Path) -> Result<AudioClip> {
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Wav(other),
    })?;
    let spec = reader.spec();
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::RateMismatch {
            path: path.to_path_buf(),
            found: spec.sample_rate,
            expected: SAMPLE_RATE,
        });
    }
    let channels = spec.channels as usize;
    if channels == 0 || channels > 2 {
        return Err(Error::UnsupportedEncoding(format!(
            "{}: {channels} channels",
            path.display()
        )));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Int, 32) => reader
            .into_samples::<i32>()
            .map(|s| s.map(|v| v as f64 / 2147483648.0))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()?,
        (format, bits) => {
            return Err(Error::UnsupportedEncoding(format!(
                "{}: {bits}-bit {format:?}",
                path.display()
            )))
        }
    };

    let samples = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    AudioClip::new(samples, spec.sample_rate)
}

/// Writes mono 16-bit PCM. Samples are clipped to [-1, 1].
pub fn write_wav_i16(path: &Path, clip: &AudioClip) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec)?;
    for s in &clip.samples {
        writer.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16)?;
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(path: &Path, spec: WavSpec, samples: &[i32]) {
        let mut w = WavWriter::create(path, spec).unwrap();
        for &s in samples {
            match spec.bits_per_sample {
                16 => w.write_sample(s as i16).unwrap(),
                _ => w.write_sample(s).unwrap(),
            }
        }
        w.finalize().unwrap();
    }

    fn spec(channels: u16, rate: u32, bits: u16) -> WavSpec {
        WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: bits,
            sample_format: SampleFormat::Int,
        }
    }

    #[test]
    fn mono_16_bit_count_and_scale() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let mut samples = vec![0i32; 22050];
        samples[0] = -32768;
        samples[1] = 16384;
        write(&path, spec(1, 44100, 16), &samples);
        let clip = load_wav(&path).unwrap();
        assert_eq!(clip.len(), 22050);
        assert_eq!(clip.samples[0], -1.0);
        assert_eq!(clip.samples[1], 0.5);
    }

    #[test]
    fn stereo_is_averaged() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.wav");
        write(&path, spec(2, 44100, 16), &[16384, 0, -16384, -16384]);
        let clip = load_wav(&path).unwrap();
        assert_eq!(clip.samples, vec![0.25, -0.5]);
    }

    #[test]
    fn thirty_two_bit_int_and_float() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i32.wav");
        write(&p, spec(1, 44100, 32), &[i32::MIN, 1 << 30]);
        assert_eq!(load_wav(&p).unwrap().samples, vec![-1.0, 0.5]);

        let p = dir.path().join("f32.wav");
        let fspec = WavSpec {
            sample_format: SampleFormat::Float,
            ..spec(1, 44100, 32)
        };
        let mut w = WavWriter::create(&p, fspec).unwrap();
        w.write_sample(0.25f32).unwrap();
        w.finalize().unwrap();
        assert_eq!(load_wav(&p).unwrap().samples, vec![0.25]);
    }

    #[test]
    fn wrong_rate_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.wav");
        write(&path, spec(1, 48000, 16), &[0; 100]);
        assert!(matches!(
            load_wav(&path),
            Err(Error::RateMismatch { found: 48000, .. })
        ));
    }

    #[test]
    fn unsupported_depth_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.wav");
        write(&path, spec(1, 44100, 24), &[0; 10]);
        assert!(matches!(load_wav(&path), Err(Error::UnsupportedEncoding(_))));
        assert!(matches!(
            load_wav(&dir.path().join("missing.wav")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.wav");
        let clip = AudioClip::new(vec![0.0, 0.5, -0.5], SAMPLE_RATE).unwrap();
        write_wav_i16(&path, &clip).unwrap();
        let back = load_wav(&path).unwrap();
        for (a, b) in clip.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() < 1e-4);
        }
    }
}
