//! Per-frame spectral descriptors: mel cepstrum, band-energy ratios and
//! band-limited spectral slopes.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Floor applied to power values before taking logarithms.
pub const SPECTRUM_FLOOR: f64 = 1e-10;

pub(crate) struct SpectralAnalyzer {
    sample_rate: f64,
    frame_len: usize,
    fft_len: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    mel_bank: Vec<Vec<(usize, f64)>>,
    cepstral_order: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SpectralFrame {
    pub mel_cepstra: Vec<f64>,
    pub alpha_ratio_db: f64,
    pub hammarberg_db: f64,
    pub slope_0_500: f64,
    pub slope_500_1500: f64,
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

impl SpectralAnalyzer {
    pub fn new(
        sample_rate: u32,
        frame_len: usize,
        n_mel: usize,
        mel_fmin: f64,
        cepstral_order: usize,
    ) -> Self {
        let fft_len = frame_len.next_power_of_two();
        let fft = FftPlanner::new().plan_fft_forward(fft_len);
        // periodic Hann
        let window = (0..frame_len)
            .map(|i| {
                0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / frame_len as f64).cos()
            })
            .collect();
        let sample_rate = sample_rate as f64;
        let mel_bank = mel_filterbank(sample_rate, fft_len, n_mel, mel_fmin, sample_rate / 2.0);
        SpectralAnalyzer {
            sample_rate,
            frame_len,
            fft_len,
            window,
            fft,
            mel_bank,
            cepstral_order,
        }
    }

    fn bin_hz(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate / self.fft_len as f64
    }

    pub fn power_spectrum(&self, frame: &[f64]) -> Vec<f64> {
        debug_assert_eq!(frame.len(), self.frame_len);
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .zip(&self.window)
            .map(|(x, w)| Complex::new(x * w, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(self.fft_len)
            .collect();
        self.fft.process(&mut buf);
        buf[..=self.fft_len / 2]
            .iter()
            .map(|c| c.norm_sqr())
            .collect()
    }

    pub fn analyze(&self, frame: &[f64]) -> SpectralFrame {
        let power = self.power_spectrum(frame);
        let log_mel: Vec<f64> = self
            .mel_bank
            .iter()
            .map(|filter| {
                let e: f64 = filter.iter().map(|&(k, w)| power[k] * w).sum();
                e.max(SPECTRUM_FLOOR).ln()
            })
            .collect();
        let mel_cepstra = dct_ii(&log_mel, self.cepstral_order + 1);

        let band_sum = |lo: f64, hi: f64, inclusive_hi: bool| -> f64 {
            power
                .iter()
                .enumerate()
                .filter(|&(k, _)| {
                    let f = self.bin_hz(k);
                    f >= lo && (f < hi || (inclusive_hi && f <= hi))
                })
                .map(|(_, p)| *p)
                .sum()
        };
        let band_max = |lo: f64, hi: f64, inclusive_lo: bool| -> f64 {
            power
                .iter()
                .enumerate()
                .filter(|&(k, _)| {
                    let f = self.bin_hz(k);
                    (f > lo || (inclusive_lo && f >= lo)) && f <= hi
                })
                .map(|(_, p)| *p)
                .fold(0.0, f64::max)
        };
        let ratio_db = |num: f64, den: f64| {
            10.0 * (num.max(SPECTRUM_FLOOR) / den.max(SPECTRUM_FLOOR)).log10()
        };

        let alpha_ratio_db = ratio_db(band_sum(50.0, 1000.0, false), band_sum(1000.0, 5000.0, true));
        let hammarberg_db = ratio_db(band_max(0.0, 2000.0, true), band_max(2000.0, 5000.0, false));
        SpectralFrame {
            mel_cepstra,
            alpha_ratio_db,
            hammarberg_db,
            slope_0_500: self.band_slope(&power, 0.0, 500.0),
            slope_500_1500: self.band_slope(&power, 500.0, 1500.0),
        }
    }

    /// Least-squares slope (dB/Hz) of the log power spectrum over `[lo, hi]`.
    fn band_slope(&self, power: &[f64], lo: f64, hi: f64) -> f64 {
        let pts: Vec<(f64, f64)> = power
            .iter()
            .enumerate()
            .map(|(k, p)| (self.bin_hz(k), 10.0 * p.max(SPECTRUM_FLOOR).log10()))
            .filter(|&(f, _)| f >= lo && f <= hi)
            .collect();
        if pts.len() < 2 {
            return 0.0;
        }
        let n = pts.len() as f64;
        let mf = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let md = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|(f, d)| (f - mf) * (d - md)).sum();
        let sxx: f64 = pts.iter().map(|(f, _)| (f - mf).powi(2)).sum();
        sxy / sxx
    }
}

/// Triangular filters equally spaced on the mel scale, as sparse
/// `(bin, weight)` lists.
fn mel_filterbank(
    sample_rate: f64,
    fft_len: usize,
    n_mel: usize,
    fmin: f64,
    fmax: f64,
) -> Vec<Vec<(usize, f64)>> {
    let (mlo, mhi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    let edges: Vec<f64> = (0..n_mel + 2)
        .map(|i| mel_to_hz(mlo + (mhi - mlo) * i as f64 / (n_mel + 1) as f64))
        .collect();
    let n_bins = fft_len / 2 + 1;
    (0..n_mel)
        .map(|m| {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..n_bins)
                .filter_map(|k| {
                    let f = k as f64 * sample_rate / fft_len as f64;
                    let w = if f > left && f <= center {
                        (f - left) / (center - left)
                    } else if f > center && f < right {
                        (right - f) / (right - center)
                    } else {
                        0.0
                    };
                    (w > 0.0).then_some((k, w))
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II, first `n_out` coefficients.
pub(crate) fn dct_ii(input: &[f64], n_out: usize) -> Vec<f64> {
    let m = input.len() as f64;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
            scale
                * input
                    .iter()
                    .enumerate()
                    .map(|(i, x)| {
                        x * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / m).cos()
                    })
                    .sum::<f64>()
        })
        .collect()
}
