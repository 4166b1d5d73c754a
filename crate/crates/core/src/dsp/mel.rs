use super::DspConfig;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn log_step() -> f64 {
    6.4f64.ln() / 27.0
}

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
pub fn hz_to_mel(hz: f64) -> f64 {
    if hz >= MIN_LOG_HZ {
        MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / log_step()
    } else {
        hz / F_SP
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    if mel >= MIN_LOG_MEL {
        MIN_LOG_HZ * (log_step() * (mel - MIN_LOG_MEL)).exp()
    } else {
        mel * F_SP
    }
}

/// `n` frequencies evenly spaced on the mel scale between `f_min` and `f_max`, inclusive.
pub fn mel_frequencies(n: usize, f_min: f64, f_max: f64) -> Vec<f64> {
    let lo = hz_to_mel(f_min);
    let hi = hz_to_mel(f_max);
    (0..n)
        .map(|i| {
            let frac = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            mel_to_hz(lo + (hi - lo) * frac)
        })
        .collect()
}

/// Triangular, area-normalized mel filterbank of shape `n_mels × (fft_size/2 + 1)`.
pub fn mel_filterbank(config: &DspConfig) -> Result<Matrix> {
    config.validate()?;
    let n_bins = config.n_bins();
    let edges = mel_frequencies(config.n_mels + 2, config.f_min, config.f_max);
    let bin_hz: Vec<f64> = (0..n_bins)
        .map(|k| k as f64 * config.sample_rate as f64 / config.fft_size as f64)
        .collect();

    let mut fb = Matrix::zeros(config.n_mels, n_bins);
    for m in 0..config.n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let norm = 2.0 / (hi - lo);
        let mut any = false;
        for (k, &f) in bin_hz.iter().enumerate() {
            let rising = (f - lo) / (center - lo);
            let falling = (hi - f) / (hi - center);
            let w = rising.min(falling).max(0.0);
            if w > 0.0 {
                fb.set(m, k, w * norm);
                any = true;
            }
        }
        if !any {
            return Err(Error::DegenerateFilter { index: m });
        }
    }
    Ok(fb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape_and_positivity() {
        let cfg = DspConfig::default();
        let fb = mel_filterbank(&cfg).unwrap();
        assert_eq!(fb.shape(), (128, 1025));
        assert!(fb.data().iter().all(|&w| w >= 0.0));
        for m in 0..fb.rows() {
            assert!(fb.row(m).iter().sum::<f64>() > 0.0, "row {m}");
        }
    }

    #[test]
    fn centers_increase() {
        let cfg = DspConfig::default();
        let edges = mel_frequencies(cfg.n_mels + 2, cfg.f_min, cfg.f_max);
        assert!(edges.windows(2).all(|w| w[1] > w[0]));
        assert!((edges[0] - cfg.f_min).abs() < 1e-9);
        assert!((edges[cfg.n_mels + 1] - cfg.f_max).abs() < 1e-6);
    }

    #[test]
    fn interior_bins_are_covered() {
        let cfg = DspConfig::default();
        let fb = mel_filterbank(&cfg).unwrap();
        // Bin 0 sits on f_min and the last bin on f_max; both are filter edges.
        for k in 1..fb.cols() - 1 {
            assert!((0..fb.rows()).any(|m| fb.get(m, k) > 0.0), "bin {k}");
        }
    }

    #[test]
    fn scale_round_trip_and_breakpoint() {
        for hz in [0.0, 300.0, 999.0, 1000.0, 4000.0, 22050.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        assert!((hz_to_mel(1000.0) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_filters_for_the_fft_resolution() {
        let cfg = DspConfig {
            fft_size: 512,
            hop_length: 2048,
            ..DspConfig::default()
        };
        assert!(matches!(
            mel_filterbank(&cfg),
            Err(Error::DegenerateFilter { .. })
        ));
    }
}
