use serde::{Deserialize, Serialize};

use super::trend::{by_apcc_desc, TrendModel};
use crate::error::{Error, Result};
use crate::stats;
use crate::table::FeatureTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// A candidate whose |Pearson| with any already-kept feature exceeds
    /// this is redundant.
    pub redundancy_cutoff: f64,
    /// Kept features need a prediction APCC strictly above this.
    pub prediction_cutoff: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            redundancy_cutoff: 0.8,
            prediction_cutoff: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "lowercase")]
pub enum EliminationReason {
    Redundant { with: String, apcc: f64 },
    Weak { apcc: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    pub name: String,
    #[serde(flatten)]
    pub reason: EliminationReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Surviving features, highest prediction APCC first.
    pub kept: Vec<String>,
    pub eliminated: Vec<Elimination>,
}

/// Correlation filter over trend-ranked features.
///
/// Candidates are visited by decreasing prediction APCC (ties by name). A
/// candidate is dropped as redundant when its strongest |Pearson| against
/// the raw values of an already-kept feature exceeds the redundancy cutoff;
/// undefined correlations (fewer than 3 shared rows, zero variance) never
/// count as redundant. Survivors with APCC at or below the prediction
/// cutoff, or without an APCC, are then dropped as weak.
pub fn select_features(
    trends: &[TrendModel],
    features: &FeatureTable,
    config: &SelectionConfig,
) -> Result<SelectionResult> {
    if trends.is_empty() {
        return Err(Error::NotEnoughData("empty trend list".into()));
    }
    let mut ordered: Vec<&TrendModel> = trends.iter().collect();
    ordered.sort_by(|x, y| by_apcc_desc(x, y));

    let columns: Vec<Vec<Option<f64>>> = ordered
        .iter()
        .map(|t| {
            features
                .column(&t.feature)
                .ok_or_else(|| Error::UnknownFeature(t.feature.clone()))
        })
        .collect::<Result<_>>()?;

    let mut kept: Vec<usize> = Vec::new();
    let mut eliminated = Vec::new();
    for (i, trend) in ordered.iter().enumerate() {
        let strongest = kept
            .iter()
            .filter_map(|&k| {
                stats::pearson_pairwise(&columns[i], &columns[k]).map(|r| (k, r.abs()))
            })
            .fold(None::<(usize, f64)>, |best, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        match strongest {
            Some((k, r)) if r > config.redundancy_cutoff => eliminated.push(Elimination {
                name: trend.feature.clone(),
                reason: EliminationReason::Redundant {
                    with: ordered[k].feature.clone(),
                    apcc: r,
                },
            }),
            _ => kept.push(i),
        }
    }

    let mut survivors = Vec::new();
    for i in kept {
        let trend = ordered[i];
        match trend.apcc {
            Some(a) if a > config.prediction_cutoff => survivors.push(trend.feature.clone()),
            apcc => eliminated.push(Elimination {
                name: trend.feature.clone(),
                reason: EliminationReason::Weak { apcc },
            }),
        }
    }
    Ok(SelectionResult {
        kept: survivors,
        eliminated,
    })
}
