//! Normalized cross-correlation pitch estimation for a single analysis window.

/// Pitch estimate for one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PitchEstimate {
    /// Fundamental frequency in Hz, 0 when unvoiced.
    pub f0_hz: f64,
    /// Interpolated correlation at the chosen lag (0 when no candidate).
    pub strength: f64,
    pub voiced: bool,
}

impl PitchEstimate {
    const UNVOICED: PitchEstimate = PitchEstimate {
        f0_hz: 0.0,
        strength: 0.0,
        voiced: false,
    };
}

#[derive(Debug, Clone)]
pub(crate) struct PitchSearch {
    pub sample_rate: f64,
    pub f0_min: f64,
    pub f0_max: f64,
    pub lag_min: usize,
    pub lag_max: usize,
    pub voicing_threshold: f64,
    pub octave_cost: f64,
    /// Picks the lag.
    narrow: Vec<f64>,
    /// Measures voicing strength at that lag.
    wide: Vec<f64>,
}

const LOWPASS_TAPS: usize = 31;

/// Hann-windowed sinc low-pass, unit DC gain.
fn lowpass_taps(cutoff_hz: f64, sample_rate: f64) -> Vec<f64> {
    let fc = cutoff_hz / sample_rate;
    let mid = (LOWPASS_TAPS / 2) as f64;
    let mut taps: Vec<f64> = (0..LOWPASS_TAPS)
        .map(|i| {
            let t = i as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * std::f64::consts::PI * fc * t).sin() / (std::f64::consts::PI * t)
            };
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (LOWPASS_TAPS - 1) as f64).cos();
            sinc * w
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

impl PitchSearch {
    pub fn new(
        sample_rate: f64,
        f0_min: f64,
        f0_max: f64,
        voicing_threshold: f64,
        octave_cost: f64,
    ) -> Self {
        let lag_min = ((sample_rate / f0_max).floor() as usize).max(2);
        let lag_max = (sample_rate / f0_min).ceil() as usize;
        PitchSearch {
            sample_rate,
            f0_min,
            f0_max,
            lag_min,
            lag_max,
            voicing_threshold,
            octave_cost,
            narrow: lowpass_taps((2.0 * f0_max).max(1000.0).min(0.45 * sample_rate), sample_rate),
            wide: lowpass_taps(0.25 * sample_rate, sample_rate),
        }
    }

    /// Estimates F0 over `window`, whose length must exceed `lag_max + 1`.
    ///
    /// The correlation at lag `τ` compares the first `window.len() - lag_max - 1`
    /// samples against the same span shifted by `τ`, normalized by both spans'
    /// energies, so a perfectly periodic signal scores 1 at its period.
    ///
    /// The lag is searched on a copy low-passed near the pitch range, so that
    /// impulsive sources whose period is not a whole number of samples do not
    /// favour a multiple of the period. That copy keeps too little bandwidth
    /// to judge voicing on a short window (noise correlates well), so the
    /// strength is read at the chosen lag from a copy low-passed at a quarter
    /// of the sample rate.
    pub fn estimate(&self, window: &[f64]) -> PitchEstimate {
        let hi = self.lag_max + 1;
        if window.len() <= hi + 1 {
            return PitchEstimate::UNVOICED;
        }
        let mean = window.iter().sum::<f64>() / window.len() as f64;
        let centered: Vec<f64> = window.iter().map(|v| v - mean).collect();
        let Some(corr) = self.nccf(&filter(&centered, &self.narrow)) else {
            return PitchEstimate::UNVOICED;
        };

        let mut best: Option<(f64, f64)> = None; // (score, lag)
        for tau in self.lag_min..=self.lag_max {
            let Some((lag, peak)) = peak_at(&corr, tau) else { continue };
            let score = peak - self.octave_cost * (lag / self.lag_min as f64).log2();
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, lag));
            }
        }
        let Some((_, lag)) = best else {
            return PitchEstimate::UNVOICED;
        };

        let Some(wide) = self.nccf(&filter(&centered, &self.wide)) else {
            return PitchEstimate::UNVOICED;
        };
        let near = lag.round() as usize;
        let strength = (near.saturating_sub(1).max(self.lag_min - 1)..=(near + 1).min(hi))
            .map(|tau| match peak_at(&wide, tau) {
                Some((_, peak)) => peak,
                None => wide[tau],
            })
            .fold(0.0, f64::max)
            .min(1.0);

        if strength >= self.voicing_threshold {
            PitchEstimate {
                f0_hz: (self.sample_rate / lag).clamp(self.f0_min, self.f0_max),
                strength,
                voiced: true,
            }
        } else {
            PitchEstimate {
                strength,
                ..PitchEstimate::UNVOICED
            }
        }
    }

    /// Normalized correlation for lags `lag_min - 1 ..= lag_max + 1`
    /// (entries below are 0). `None` for a silent window.
    fn nccf(&self, x: &[f64]) -> Option<Vec<f64>> {
        let hi = self.lag_max + 1;
        let n = x.len() - hi;
        let e0: f64 = x[..n].iter().map(|v| v * v).sum();
        if e0 <= 1e-10 * n as f64 {
            return None;
        }
        let lo = self.lag_min - 1;
        // energy of x[tau..tau+n], slid forward
        let mut e_tau: f64 = x[lo..lo + n].iter().map(|v| v * v).sum();
        let mut corr = vec![0.0; hi + 1];
        for tau in lo..=hi {
            if tau > lo {
                e_tau += x[tau + n - 1].powi(2) - x[tau - 1].powi(2);
            }
            let num: f64 = x[..n].iter().zip(&x[tau..tau + n]).map(|(a, b)| a * b).sum();
            let den = (e0 * e_tau.max(0.0)).sqrt();
            corr[tau] = if den > 0.0 { num / den } else { 0.0 };
        }
        Some(corr)
    }
}

/// Same-length convolution with a centred odd-length kernel.
fn filter(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let half = taps.len() / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(x.len() - 1);
            (lo..=hi).map(|j| x[j] * taps[j + half - i]).sum()
        })
        .collect()
}

/// Parabolic peak `(lag, height)` when `corr[tau]` is a positive local
/// maximum.
fn peak_at(corr: &[f64], tau: usize) -> Option<(f64, f64)> {
    if tau == 0 || tau + 1 >= corr.len() {
        return None;
    }
    let (prev, cur, next) = (corr[tau - 1], corr[tau], corr[tau + 1]);
    if cur <= 0.0 || cur < prev || cur < next {
        return None;
    }
    let denom = prev - 2.0 * cur + next;
    if denom < 0.0 {
        let d = 0.5 * (prev - next) / denom;
        Some((tau as f64 + d, cur - 0.25 * (prev - next) * d))
    } else {
        Some((tau as f64, cur))
    }
}
