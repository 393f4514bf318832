//! Objective distortion between a reference and a predicted utterance.
//!
//! Four measures are computed over aligned frame pairs:
//!
//! - MCD: mean over pairs of the Euclidean distance between mel cepstra
//!   `c_1..=c_K` (`c_0` excluded), optionally times `(10 / ln 10)·√2`.
//! - VDE: fraction of pairs whose voicing flags differ.
//! - F0 MSE and log-F0 MSE (natural log of Hz), over pairs voiced in both
//!   tracks only.
//!
//! Frames are paired either by dynamic time warping on the mel cepstra or by
//! a single integer shift chosen separately for each measure.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FrameTrack;

/// `(10 / ln 10) · √2`, the dB scaling often applied to MCD.
pub const MCD_DB_SCALE: f64 = 10.0 / std::f64::consts::LN_10 * std::f64::consts::SQRT_2;

/// The per-frame fields the measures compare.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticTrack {
    /// `c_0..=c_K` per frame.
    pub cepstra: Vec<Vec<f64>>,
    pub voiced: Vec<bool>,
    /// Hz, 0 on unvoiced frames.
    pub f0_hz: Vec<f64>,
}

impl AcousticTrack {
    pub fn new(cepstra: Vec<Vec<f64>>, voiced: Vec<bool>, f0_hz: Vec<f64>) -> Result<Self> {
        if cepstra.len() != voiced.len() || cepstra.len() != f0_hz.len() {
            return Err(Error::InvalidArgument(
                "cepstra, voicing and f0 lengths differ".into(),
            ));
        }
        Ok(AcousticTrack {
            cepstra,
            voiced,
            f0_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.cepstra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cepstra.is_empty()
    }

    /// Smallest number of coefficients past `c_0` across frames.
    pub fn order(&self) -> usize {
        self.cepstra
            .iter()
            .map(|c| c.len().saturating_sub(1))
            .min()
            .unwrap_or(0)
    }
}

impl From<&FrameTrack> for AcousticTrack {
    fn from(track: &FrameTrack) -> Self {
        AcousticTrack {
            cepstra: track.cepstra(),
            voiced: track.voicing(),
            f0_hz: track.f0(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignMethod {
    Dtw,
    /// Pairs `(t, t + k)`.
    Shift(i64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    /// `(t_ref, t_pred)` index pairs.
    pub pairs: Vec<(usize, usize)>,
    pub method: AlignMethod,
    /// Summed frame distance along a DTW path, or the minimized measure for
    /// a shift.
    pub cost: f64,
}

impl AlignedPair {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs for a fixed shift `k` over the overlapping region.
    pub fn for_shift(ref_len: usize, pred_len: usize, k: i64) -> Self {
        let start = (-k).max(0) as usize;
        let end = (pred_len as i64 - k).clamp(0, ref_len as i64) as usize;
        let pairs = (start..end.max(start))
            .map(|t| (t, (t as i64 + k) as usize))
            .collect();
        AlignedPair {
            pairs,
            method: AlignMethod::Shift(k),
            cost: 0.0,
        }
    }

    fn check(&self, ref_len: usize, pred_len: usize) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::Alignment("empty alignment".into()));
        }
        if self.pairs.iter().any(|&(r, p)| r >= ref_len || p >= pred_len) {
            return Err(Error::Alignment("alignment index outside track".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mcd,
    Vde,
    F0Mse,
    Lf0Mse,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Mcd, Metric::Vde, Metric::F0Mse, Metric::Lf0Mse];
}

/// Euclidean distance over `c_1..=c_order`.
pub fn cepstral_distance(a: &[f64], b: &[f64], order: usize) -> f64 {
    a[1..=order]
        .iter()
        .zip(&b[1..=order])
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn check_order(ref_c: &[Vec<f64>], pred_c: &[Vec<f64>], order: usize) -> Result<()> {
    let available = ref_c
        .iter()
        .chain(pred_c)
        .map(|c| c.len().saturating_sub(1))
        .min()
        .unwrap_or(0);
    if order == 0 || order > available {
        return Err(Error::InvalidArgument(format!(
            "cepstral order {order} exceeds available order {available}"
        )));
    }
    Ok(())
}

/// Dynamic time warping over steps (1,0), (0,1), (1,1) with cepstral
/// Euclidean frame distance. Ties on the way back prefer the diagonal, then
/// advancing the reference alone.
pub fn dtw_align(ref_c: &[Vec<f64>], pred_c: &[Vec<f64>], order: usize) -> Result<AlignedPair> {
    if ref_c.is_empty() || pred_c.is_empty() {
        return Err(Error::Alignment("empty track".into()));
    }
    check_order(ref_c, pred_c, order)?;
    let (n, m) = (ref_c.len(), pred_c.len());
    let mut acc = vec![f64::INFINITY; n * m];
    let at = |i: usize, j: usize| i * m + j;
    for i in 0..n {
        for j in 0..m {
            let d = cepstral_distance(&ref_c[i], &pred_c[j], order);
            let best_prev = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { acc[at(i - 1, j - 1)] } else { f64::INFINITY };
                let up = if i > 0 { acc[at(i - 1, j)] } else { f64::INFINITY };
                let left = if j > 0 { acc[at(i, j - 1)] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            acc[at(i, j)] = d + best_prev;
        }
    }

    let mut pairs = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while i > 0 || j > 0 {
        let candidates = [
            (i > 0 && j > 0).then(|| (i - 1, j - 1)),
            (i > 0).then(|| (i - 1, j)),
            (j > 0).then(|| (i, j - 1)),
        ];
        let mut best: Option<(usize, usize)> = None;
        for c in candidates.into_iter().flatten() {
            if best.is_none_or(|b| acc[at(c.0, c.1)] < acc[at(b.0, b.1)]) {
                best = Some(c);
            }
        }
        (i, j) = best.expect("a predecessor exists off the origin");
        pairs.push((i, j));
    }
    pairs.reverse();
    Ok(AlignedPair {
        pairs,
        method: AlignMethod::Dtw,
        cost: acc[at(n - 1, m - 1)],
    })
}

/// MCD over the aligned pairs using `c_1..=c_order`.
pub fn mcd(
    pair: &AlignedPair,
    ref_c: &[Vec<f64>],
    pred_c: &[Vec<f64>],
    order: usize,
    scaled: bool,
) -> Result<f64> {
    pair.check(ref_c.len(), pred_c.len())?;
    check_order(ref_c, pred_c, order)?;
    let total: f64 = pair
        .pairs
        .iter()
        .map(|&(r, p)| cepstral_distance(&ref_c[r], &pred_c[p], order))
        .sum();
    let scale = if scaled { MCD_DB_SCALE } else { 1.0 };
    Ok(scale * total / pair.len() as f64)
}

/// Voicing decision error over the aligned pairs.
pub fn vde(pair: &AlignedPair, ref_voiced: &[bool], pred_voiced: &[bool]) -> Result<f64> {
    pair.check(ref_voiced.len(), pred_voiced.len())?;
    let mismatches = pair
        .pairs
        .iter()
        .filter(|&&(r, p)| ref_voiced[r] != pred_voiced[p])
        .count();
    Ok(mismatches as f64 / pair.len() as f64)
}

fn f0_error(
    pair: &AlignedPair,
    ref_f0: &[f64],
    pred_f0: &[f64],
    map: impl Fn(f64) -> f64,
) -> Result<(Option<f64>, usize)> {
    pair.check(ref_f0.len(), pred_f0.len())?;
    let (sum, count) = pair
        .pairs
        .iter()
        .filter(|&&(r, p)| ref_f0[r] > 0.0 && pred_f0[p] > 0.0)
        .fold((0.0, 0usize), |(s, c), &(r, p)| {
            (s + (map(ref_f0[r]) - map(pred_f0[p])).powi(2), c + 1)
        });
    Ok(((count > 0).then(|| sum / count as f64), count))
}

/// Mean squared F0 difference (Hz²) over pairs voiced in both tracks.
/// `None` when no pair is co-voiced.
pub fn f0_mse(pair: &AlignedPair, ref_f0: &[f64], pred_f0: &[f64]) -> Result<Option<f64>> {
    Ok(f0_error(pair, ref_f0, pred_f0, |f| f)?.0)
}

/// As [`f0_mse`] on natural-log F0.
pub fn lf0_mse(pair: &AlignedPair, ref_f0: &[f64], pred_f0: &[f64]) -> Result<Option<f64>> {
    Ok(f0_error(pair, ref_f0, pred_f0, f64::ln)?.0)
}

/// Value of `metric` over `pair` with the number of frames it was computed
/// on.
pub fn evaluate_metric(
    metric: Metric,
    pair: &AlignedPair,
    reference: &AcousticTrack,
    predicted: &AcousticTrack,
    order: usize,
    scaled: bool,
) -> Result<(Option<f64>, usize)> {
    match metric {
        Metric::Mcd => Ok((
            Some(mcd(pair, &reference.cepstra, &predicted.cepstra, order, scaled)?),
            pair.len(),
        )),
        Metric::Vde => Ok((Some(vde(pair, &reference.voiced, &predicted.voiced)?), pair.len())),
        Metric::F0Mse => f0_error(pair, &reference.f0_hz, &predicted.f0_hz, |f| f),
        Metric::Lf0Mse => f0_error(pair, &reference.f0_hz, &predicted.f0_hz, f64::ln),
    }
}

/// Shift order 0, -1, +1, -2, +2, ...; the first strict minimum wins.
fn shift_order(max_shift: usize) -> impl Iterator<Item = i64> {
    std::iter::once(0).chain((1..=max_shift as i64).flat_map(|k| [-k, k]))
}

/// Best integer shift `k ∈ [-max_shift, max_shift]` for one measure.
/// Shifts where the measure is undefined are skipped; an error is returned if
/// it is undefined for every shift.
pub fn shift_align(
    reference: &AcousticTrack,
    predicted: &AcousticTrack,
    max_shift: usize,
    objective: Metric,
    order: usize,
    scaled: bool,
) -> Result<AlignedPair> {
    if reference.is_empty() || predicted.is_empty() {
        return Err(Error::Alignment("empty track".into()));
    }
    if max_shift >= reference.len().min(predicted.len()) {
        return Err(Error::Alignment(format!(
            "max shift {max_shift} must be below the shorter track length {}",
            reference.len().min(predicted.len())
        )));
    }
    let mut best: Option<AlignedPair> = None;
    for k in shift_order(max_shift) {
        let mut pair = AlignedPair::for_shift(reference.len(), predicted.len(), k);
        if pair.is_empty() {
            continue;
        }
        let (value, _) = evaluate_metric(objective, &pair, reference, predicted, order, scaled)?;
        let Some(value) = value else { continue };
        if best.as_ref().is_none_or(|b| value < b.cost) {
            pair.cost = value;
            best = Some(pair);
        }
    }
    best.ok_or_else(|| Error::Alignment(format!("{objective:?} undefined for every shift")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionConfig {
    /// K: highest cepstral index compared.
    pub order: usize,
    /// Apply [`MCD_DB_SCALE`].
    pub scaled: bool,
    /// Clamped to one less than the shorter track.
    pub max_shift: usize,
}

impl Default for DistortionConfig {
    fn default() -> Self {
        DistortionConfig {
            order: 13,
            scaled: false,
            max_shift: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ReportMethod {
    Dtw,
    /// Shift chosen per measure (`None` when the measure was undefined).
    Shift {
        mcd: i64,
        vde: i64,
        f0_mse: Option<i64>,
        lf0_mse: Option<i64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramesCompared {
    pub mcd: usize,
    pub vde: usize,
    pub f0_mse: usize,
    pub lf0_mse: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    #[serde(flatten)]
    pub method: ReportMethod,
    pub mcd: f64,
    pub vde: f64,
    pub lf0_mse: Option<f64>,
    pub f0_mse: Option<f64>,
    pub frames: FramesCompared,
}

impl DistortionReport {
    pub fn label(&self) -> &'static str {
        match self.method {
            ReportMethod::Dtw => "DTW",
            ReportMethod::Shift { .. } => "shift",
        }
    }
}

/// One report per alignment: DTW first, then best shift.
pub fn distortion_report(
    reference: &FrameTrack,
    predicted: &FrameTrack,
    config: &DistortionConfig,
) -> Result<[DistortionReport; 2]> {
    let r = AcousticTrack::from(reference);
    let p = AcousticTrack::from(predicted);
    distortion_report_tracks(&r, &p, config)
}

pub fn distortion_report_tracks(
    r: &AcousticTrack,
    p: &AcousticTrack,
    config: &DistortionConfig,
) -> Result<[DistortionReport; 2]> {
    let order = config.order;
    let scaled = config.scaled;

    let path = dtw_align(&r.cepstra, &p.cepstra, order)?;
    let eval = |metric, pair: &AlignedPair| evaluate_metric(metric, pair, r, p, order, scaled);
    let (mcd_d, n_mcd) = eval(Metric::Mcd, &path)?;
    let (vde_d, n_vde) = eval(Metric::Vde, &path)?;
    let (f0_d, n_f0) = eval(Metric::F0Mse, &path)?;
    let (lf0_d, n_lf0) = eval(Metric::Lf0Mse, &path)?;
    let dtw = DistortionReport {
        method: ReportMethod::Dtw,
        mcd: mcd_d.expect("mcd defined on non-empty path"),
        vde: vde_d.expect("vde defined on non-empty path"),
        f0_mse: f0_d,
        lf0_mse: lf0_d,
        frames: FramesCompared {
            mcd: n_mcd,
            vde: n_vde,
            f0_mse: n_f0,
            lf0_mse: n_lf0,
        },
    };

    let max_shift = config.max_shift.min(r.len().min(p.len()) - 1);
    let best = |metric| -> Result<Option<(i64, f64, usize)>> {
        match shift_align(r, p, max_shift, metric, order, scaled) {
            Ok(pair) => {
                let AlignMethod::Shift(k) = pair.method else { unreachable!() };
                let (_, n) = eval(metric, &pair)?;
                Ok(Some((k, pair.cost, n)))
            }
            Err(Error::Alignment(_)) if matches!(metric, Metric::F0Mse | Metric::Lf0Mse) => {
                Ok(None)
            }
            Err(e) => Err(e),
        }
    };
    let (k_mcd, mcd_s, n_mcd) = best(Metric::Mcd)?.expect("mcd always defined");
    let (k_vde, vde_s, n_vde) = best(Metric::Vde)?.expect("vde always defined");
    let f0 = best(Metric::F0Mse)?;
    let lf0 = best(Metric::Lf0Mse)?;
    let shift = DistortionReport {
        method: ReportMethod::Shift {
            mcd: k_mcd,
            vde: k_vde,
            f0_mse: f0.map(|x| x.0),
            lf0_mse: lf0.map(|x| x.0),
        },
        mcd: mcd_s,
        vde: vde_s,
        f0_mse: f0.map(|x| x.1),
        lf0_mse: lf0.map(|x| x.1),
        frames: FramesCompared {
            mcd: n_mcd,
            vde: n_vde,
            f0_mse: f0.map_or(0, |x| x.2),
            lf0_mse: lf0.map_or(0, |x| x.2),
        },
    };
    Ok([dtw, shift])
}

/// Text table with rows DTW / shift and columns MCD, VDE, lF0_MSE, F0_MSE.
pub struct ReportTable<'a>(pub &'a [DistortionReport]);

impl fmt::Display for ReportTable<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cell = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6}"));
        writeln!(f, "{:<6}{:>13}{:>13}{:>13}{:>14}", "", "MCD", "VDE", "lF0_MSE", "F0_MSE")?;
        for r in self.0 {
            writeln!(
                f,
                "{:<6}{:>13}{:>13}{:>13}{:>14}",
                r.label(),
                cell(Some(r.mcd)),
                cell(Some(r.vde)),
                cell(r.lf0_mse),
                cell(r.f0_mse)
            )?;
        }
        Ok(())
    }
}
