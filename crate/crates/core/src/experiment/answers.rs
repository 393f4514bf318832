use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Experiment variant: whether the reference and the explored space use the
/// same sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Variant {
    SameText = 1,
    DifferentText = 2,
}

impl TryFrom<u8> for Variant {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Variant::SameText),
            2 => Ok(Variant::DifferentText),
            other => Err(format!("unknown variant {other}")),
        }
    }
}

impl From<Variant> for u8 {
    fn from(v: Variant) -> u8 {
        v as u8
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::SameText => write!(f, "variant 1 (same text)"),
            Variant::DifferentText => write!(f, "variant 2 (different text)"),
        }
    }
}

/// One perceptual-trial response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub session_id: String,
    pub variant: Variant,
    /// 1-based.
    pub task_index: u32,
    /// `(row, col)` of the anchor the reference was synthesized at.
    pub true_anchor: (usize, usize),
    /// Click clamped into the grid bounds.
    pub clicked: [f64; 2],
    /// Click as submitted.
    pub clicked_raw: [f64; 2],
    pub duration_secs: f64,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
}

/// Reads answer records from a line-oriented log. Lines tagged with a
/// `type` other than `"answer"` are skipped, as is an unparseable final
/// line (a write torn by a crash). Any other malformed line is an error.
pub fn read_answer_log(path: impl AsRef<Path>) -> Result<Vec<AnswerRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<String> = std::io::BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(|e| Error::io(path, e))?;
    let last = lines.len().saturating_sub(1);
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(_) if i == last => break,
            Err(e) => return Err(e.into()),
        };
        match value.get("type").and_then(|t| t.as_str()) {
            None | Some("answer") => out.push(serde_json::from_value(value)?),
            Some(_) => {}
        }
    }
    Ok(out)
}

/// Keeps the last record for each `(session, task)`; output is in log order
/// of those surviving records.
pub fn effective_answers(records: &[AnswerRecord]) -> Vec<AnswerRecord> {
    let mut last: HashMap<(&str, u32), usize> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        last.insert((r.session_id.as_str(), r.task_index), i);
    }
    let mut keep: Vec<usize> = last.into_values().collect();
    keep.sort_unstable();
    keep.into_iter().map(|i| records[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(session: &str, task: u32, x: f64) -> AnswerRecord {
        AnswerRecord {
            session_id: session.into(),
            variant: Variant::SameText,
            task_index: task,
            true_anchor: (0, 0),
            clicked: [x, 0.0],
            clicked_raw: [x, 0.0],
            duration_secs: 1.0,
            timestamp_ms: 0,
        }
    }

    #[test]
    fn last_write_wins() {
        let recs = vec![rec("a", 1, 0.0), rec("b", 1, 1.0), rec("a", 1, 2.0)];
        let eff = effective_answers(&recs);
        assert_eq!(eff.len(), 2);
        assert_eq!(eff[0].session_id, "b");
        assert_eq!(eff[1].clicked[0], 2.0);
    }

    #[test]
    fn variant_serializes_as_number() {
        assert_eq!(serde_json::to_string(&Variant::DifferentText).unwrap(), "2");
        assert!(serde_json::from_str::<Variant>("3").is_err());
    }

    #[test]
    fn log_skips_other_types_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let mut text = String::from("{\"type\":\"session\",\"id\":\"x\"}\n");
        let mut v = serde_json::to_value(rec("a", 1, 0.5)).unwrap();
        v["type"] = "answer".into();
        text += &format!("{v}\n");
        text += &format!("{}\n", serde_json::to_string(&rec("a", 2, 0.5)).unwrap());
        text += "{\"type\":\"answ";
        std::fs::write(&path, &text).unwrap();
        let recs = read_answer_log(&path).unwrap();
        assert_eq!(recs.len(), 2);

        std::fs::write(&path, "garbage\n{}\n").unwrap();
        assert!(read_answer_log(&path).is_err());
    }
}
