use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::answers::{AnswerRecord, Variant};
use crate::stats::Quartiles;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexDurations {
    pub task_index: u32,
    pub n: usize,
    pub quartiles: Quartiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationSummary {
    pub variant: Variant,
    /// Tukey upper fence `Q3 + 1.5·IQR` over the variant's durations.
    pub fence: f64,
    pub n_outliers: usize,
    /// Per-index statistics with outliers excluded.
    pub by_index: Vec<IndexDurations>,
}

/// Upper Tukey fence of a sample.
pub fn upper_fence(values: &[f64]) -> Option<f64> {
    let q = Quartiles::of(values)?;
    Some(q.q3 + 1.5 * q.iqr())
}

/// Per-variant duration statistics by task index. Durations above the
/// variant's upper fence are counted as outliers and left out of the
/// per-index statistics.
pub fn summarize_durations(answers: &[AnswerRecord]) -> Vec<DurationSummary> {
    let mut by_variant: BTreeMap<Variant, Vec<&AnswerRecord>> = BTreeMap::new();
    for a in answers {
        by_variant.entry(a.variant).or_default().push(a);
    }
    by_variant
        .into_iter()
        .map(|(variant, recs)| {
            let all: Vec<f64> = recs.iter().map(|r| r.duration_secs).collect();
            let fence = upper_fence(&all).expect("variant group is non-empty");
            let mut groups: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
            let mut n_outliers = 0;
            for r in recs {
                if r.duration_secs > fence {
                    n_outliers += 1;
                } else {
                    groups.entry(r.task_index).or_default().push(r.duration_secs);
                }
            }
            let by_index = groups
                .into_iter()
                .map(|(task_index, values)| IndexDurations {
                    task_index,
                    n: values.len(),
                    quartiles: Quartiles::of(&values).expect("non-empty"),
                })
                .collect();
            DurationSummary {
                variant,
                fence,
                n_outliers,
                by_index,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn answer(task: u32, dur: f64) -> AnswerRecord {
        AnswerRecord {
            session_id: "s".into(),
            variant: Variant::SameText,
            task_index: task,
            true_anchor: (0, 0),
            clicked: [0.0, 0.0],
            clicked_raw: [0.0, 0.0],
            duration_secs: dur,
            timestamp_ms: 0,
        }
    }

    #[test]
    fn far_value_is_outlier() {
        let answers: Vec<_> = [10.0, 11.0, 12.0, 10000.0]
            .iter()
            .enumerate()
            .map(|(i, &d)| answer(i as u32 + 1, d))
            .collect();
        let s = &summarize_durations(&answers)[0];
        assert_eq!(s.n_outliers, 1);
        assert_eq!(s.by_index.len(), 3);
    }

    #[test]
    fn equal_durations_no_outliers() {
        let answers: Vec<_> = (1..=6).map(|i| answer(i, 7.0)).collect();
        assert_eq!(summarize_durations(&answers)[0].n_outliers, 0);
    }
}
