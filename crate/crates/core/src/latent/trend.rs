use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Projection;
use crate::error::{Error, Result};
use crate::stats;
use crate::table::{EmbeddingSet, FeatureTable};

/// Number of folds for the cross-validated APCC.
pub const CV_FOLDS: usize = 5;

/// Least-squares plane `value ≈ a·x + b·y + c` over the reduced latent space
/// for one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendModel {
    pub feature: String,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// |Pearson| between the plane's predictions and the observed values,
    /// computed on the fitting data. `None` marks a no-trend model.
    pub apcc: Option<f64>,
    /// Unit vector along `(a, b)`; `None` when the plane is flat.
    pub gradient: Option<[f64; 2]>,
    /// Number of (point, value) pairs used.
    pub n: usize,
    /// Out-of-fold APCC over `CV_FOLDS` folds (extension; not part of the
    /// ranking).
    pub cv_apcc: Option<f64>,
}

impl TrendModel {
    pub fn predict(&self, p: [f64; 2]) -> f64 {
        self.a * p[0] + self.b * p[1] + self.c
    }

    pub fn is_no_trend(&self) -> bool {
        self.apcc.is_none()
    }

    /// Magnitude of the plane gradient, in feature units per latent unit.
    pub fn slope(&self) -> f64 {
        self.a.hypot(self.b)
    }
}

/// Orders trends by APCC, highest first; no-trend models last; ties by
/// feature name.
pub(crate) fn by_apcc_desc(x: &TrendModel, y: &TrendModel) -> Ordering {
    match (x.apcc, y.apcc) {
        (Some(p), Some(q)) => q.total_cmp(&p),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
    .then_with(|| x.feature.cmp(&y.feature))
}

fn plane_fit(points: &[[f64; 2]], values: &[f64]) -> Result<(f64, f64, f64)> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let mz = values.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, z) in points.iter().zip(values) {
        let (dx, dy, dz) = (p[0] - mx, p[1] - my, z - mz);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        sxz += dx * dz;
        syz += dy * dz;
    }
    let det = sxx * syy - sxy * sxy;
    if !(sxx > 0.0 && syy > 0.0) || det <= 1e-12 * sxx * syy {
        return Err(Error::RankDeficient(
            "latent points are collinear".into(),
        ));
    }
    let a = (sxz * syy - syz * sxy) / det;
    let b = (syz * sxx - sxz * sxy) / det;
    Ok((a, b, mz - a * mx - b * my))
}

fn pairs(points: &[[f64; 2]], values: &[Option<f64>]) -> (Vec<[f64; 2]>, Vec<f64>) {
    points
        .iter()
        .zip(values)
        .filter_map(|(p, v)| Some((*p, (*v)?)))
        .unzip()
}

/// Fits the plane for one feature. Missing values are dropped pairwise.
pub fn fit_trend(
    points: &[[f64; 2]],
    values: &[Option<f64>],
    name: impl Into<String>,
) -> Result<TrendModel> {
    let name = name.into();
    if points.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: values.len(),
        });
    }
    let (pts, vals) = pairs(points, values);
    if pts.len() < 3 {
        return Err(Error::NotEnoughData(format!(
            "feature `{name}` has {} usable values, need 3",
            pts.len()
        )));
    }
    let (mut a, mut b, mut c) = plane_fit(&pts, &vals)?;
    let constant = vals.iter().all(|v| *v == vals[0]);
    if constant {
        (a, b, c) = (0.0, 0.0, vals[0]);
    }

    let predictions: Vec<f64> = pts.iter().map(|p| a * p[0] + b * p[1] + c).collect();
    let apcc = if constant {
        None
    } else {
        stats::pearson(&predictions, &vals).map(f64::abs)
    };
    let norm = a.hypot(b);
    let gradient = (norm > 0.0).then(|| [a / norm, b / norm]);

    Ok(TrendModel {
        feature: name,
        a,
        b,
        c,
        apcc,
        gradient,
        n: pts.len(),
        cv_apcc: if constant {
            None
        } else {
            cross_validated_apcc(&pts, &vals, CV_FOLDS)
        },
    })
}

/// APCC of out-of-fold predictions, rows assigned to folds by position
/// modulo `folds`. `None` when any training fold is rank deficient or there
/// are fewer than two rows per fold.
pub fn cross_validated_apcc(points: &[[f64; 2]], values: &[f64], folds: usize) -> Option<f64> {
    if folds < 2 || points.len() < 2 * folds {
        return None;
    }
    let mut predictions = vec![0.0; points.len()];
    for fold in 0..folds {
        let (train_p, train_v): (Vec<[f64; 2]>, Vec<f64>) = points
            .iter()
            .zip(values)
            .enumerate()
            .filter(|(i, _)| i % folds != fold)
            .map(|(_, (p, v))| (*p, *v))
            .unzip();
        let (a, b, c) = plane_fit(&train_p, &train_v).ok()?;
        for (i, p) in points.iter().enumerate().filter(|(i, _)| i % folds == fold) {
            predictions[i] = a * p[0] + b * p[1] + c;
        }
    }
    stats::pearson(&predictions, values).map(f64::abs)
}

/// Rows of `features` joined to `embeddings` by id, sorted by id so results
/// do not depend on input row order.
pub(crate) fn join_rows(
    embeddings: &EmbeddingSet,
    features: &FeatureTable,
) -> Vec<(usize, usize)> {
    let by_id: HashMap<&str, usize> = features
        .ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut joined: Vec<(usize, usize)> = embeddings
        .ids()
        .iter()
        .enumerate()
        .filter_map(|(e, id)| by_id.get(id.as_str()).map(|&f| (e, f)))
        .collect();
    joined.sort_by(|x, y| embeddings.ids()[x.0].cmp(&embeddings.ids()[y.0]));
    joined
}

/// One trend per feature column, sorted by APCC (highest first).
pub fn fit_all_trends(
    embeddings: &EmbeddingSet,
    projection: &Projection,
    features: &FeatureTable,
) -> Result<Vec<TrendModel>> {
    let joined = join_rows(embeddings, features);
    if joined.is_empty() {
        return Err(Error::NotEnoughData(
            "no utterance id shared by embeddings and features".into(),
        ));
    }
    let points: Vec<[f64; 2]> = joined
        .iter()
        .map(|&(e, _)| projection.project(&embeddings.vectors()[e]))
        .collect::<Result<_>>()?;

    let mut trends: Vec<TrendModel> = features
        .names()
        .par_iter()
        .enumerate()
        .map(|(j, name)| {
            let values: Vec<Option<f64>> =
                joined.iter().map(|&(_, f)| features.get(f, j)).collect();
            fit_trend(&points, &values, name.clone())
        })
        .collect::<Result<_>>()?;
    trends.sort_by(by_apcc_desc);
    Ok(trends)
}
