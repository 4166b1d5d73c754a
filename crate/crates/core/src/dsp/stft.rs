use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{AudioClip, DspConfig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// One-sided complex STFT, bin-major: `data[bin * n_frames + frame]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub n_bins: usize,
    pub n_frames: usize,
    pub data: Vec<Complex64>,
}

impl Spectrum {
    pub fn get(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[bin * self.n_frames + frame]
    }
}

/// Frame count for a centered STFT.
pub fn n_frames(len: usize, hop_length: usize) -> usize {
    1 + len / hop_length
}

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Maps an index of the padded signal onto the source by mirror reflection
/// about the first and last samples (the edge sample is not repeated).
pub fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

pub fn stft(clip: &AudioClip, config: &DspConfig) -> Result<Spectrum> {
    config.validate()?;
    stft_with_window(&clip.samples, config, &hann_window(config.fft_size))
}

pub(crate) fn stft_with_window(
    samples: &[f64],
    config: &DspConfig,
    window: &[f64],
) -> Result<Spectrum> {
    if samples.is_empty() {
        return Err(Error::Empty("STFT of an empty clip".into()));
    }
    let n_fft = config.fft_size;
    let pad = (n_fft / 2) as isize;
    let frames = n_frames(samples.len(), config.hop_length);
    let n_bins = n_fft / 2 + 1;

    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let mut data = vec![Complex64::new(0.0, 0.0); n_bins * frames];
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for t in 0..frames {
        let start = (t * config.hop_length) as isize - pad;
        for (n, slot) in buf.iter_mut().enumerate() {
            let idx = reflect_index(start + n as isize, samples.len());
            *slot = Complex64::new(samples[idx] * window[n], 0.0);
        }
        fft.process(&mut buf);
        for (bin, value) in buf.iter().take(n_bins).enumerate() {
            data[bin * frames + t] = *value;
        }
    }
    Ok(Spectrum {
        n_bins,
        n_frames: frames,
        data,
    })
}

/// Squared magnitude of every entry, as an `n_bins × n_frames` matrix.
pub fn power_spectrogram(spectrum: &Spectrum) -> Matrix {
    let data = spectrum.data.iter().map(|z| z.norm_sqr()).collect();
    Matrix::new(spectrum.n_bins, spectrum.n_frames, data).expect("spectrum shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::SAMPLE_RATE;

    #[test]
    fn frame_count_for_half_second_clip() {
        assert_eq!(n_frames(22050, 512), 44);
        assert_eq!(n_frames(22050, 2048), 11);
        let clip = AudioClip::new(vec![0.1; 22050], SAMPLE_RATE).unwrap();
        let s = stft(&clip, &DspConfig::default()).unwrap();
        assert_eq!((s.n_bins, s.n_frames), (1025, 44));
    }

    #[test]
    fn zero_clip_gives_zero_spectrum() {
        let clip = AudioClip::new(vec![0.0; 4096], SAMPLE_RATE).unwrap();
        let s = stft(&clip, &DspConfig::default()).unwrap();
        assert!(s.data.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn empty_clip_errors() {
        let clip = AudioClip::new(vec![], SAMPLE_RATE).unwrap();
        assert!(stft(&clip, &DspConfig::default()).is_err());
    }

    #[test]
    fn bin_centered_cosine_peaks_at_its_bin() {
        let cfg = DspConfig::default();
        for k in [10usize, 93, 400] {
            let freq = k as f64 * SAMPLE_RATE as f64 / cfg.fft_size as f64;
            // L - 1 a multiple of fft_size/2 keeps the tail reflection phase-continuous
            let samples = (0..21 * 1024 + 1)
                .map(|n| (2.0 * std::f64::consts::PI * freq * n as f64 / SAMPLE_RATE as f64).cos())
                .collect();
            let s = stft(&AudioClip::new(samples, SAMPLE_RATE).unwrap(), &cfg).unwrap();
            for t in 0..s.n_frames {
                let peak = (0..s.n_bins)
                    .max_by(|&a, &b| s.get(a, t).norm().total_cmp(&s.get(b, t).norm()))
                    .unwrap();
                assert_eq!(peak, k, "frame {t}");
            }
        }
    }

    #[test]
    fn power_examples() {
        let s = Spectrum {
            n_bins: 1,
            n_frames: 2,
            data: vec![Complex64::new(3.0, 4.0), Complex64::new(3.0, -4.0)],
        };
        let p = power_spectrogram(&s);
        assert_eq!(p.data(), &[25.0, 25.0]);
    }

    #[test]
    fn reflection() {
        // [a b c d] padded by 2 -> c b | a b c d | c b
        let idx: Vec<usize> = (-2..6).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(idx, vec![2, 1, 0, 1, 2, 3, 2, 1]);
        assert_eq!(reflect_index(-5, 1), 0);
    }
}
