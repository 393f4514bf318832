//! Comma-separated feature tables and embedding files.
//!
//! Both formats have a header row whose first column is `id`. Missing
//! feature values are written as empty cells; on import any cell that does
//! not parse to a finite number (empty, `NaN`, text) is treated as missing.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

/// Per-utterance named acoustic functionals. Rows are utterances.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    ids: Vec<String>,
    names: Vec<String>,
    values: Vec<Vec<Option<f64>>>,
}

fn check_unique(items: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(items.len());
    for item in items {
        if !seen.insert(item.as_str()) {
            return Err(Error::Table(format!("duplicate {what} `{item}`")));
        }
    }
    Ok(())
}

impl FeatureTable {
    pub fn new(
        ids: Vec<String>,
        names: Vec<String>,
        values: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        check_unique(&ids, "id")?;
        check_unique(&names, "feature name")?;
        if values.len() != ids.len() {
            return Err(Error::Table(format!(
                "{} ids but {} rows",
                ids.len(),
                values.len()
            )));
        }
        for (id, row) in ids.iter().zip(&values) {
            if row.len() != names.len() {
                return Err(Error::Table(format!(
                    "row `{id}` has {} values, expected {}",
                    row.len(),
                    names.len()
                )));
            }
            if row.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Table(format!("row `{id}` has a non-finite value")));
            }
        }
        Ok(FeatureTable { ids, names, values })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn row_index(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|i| i == id)
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let j = self.feature_index(name)?;
        Some(self.values.iter().map(|row| row[j]).collect())
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.values.get(row)?.get(col).copied().flatten()
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn read_records(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let mut reader = csv_reader(path)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Table(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.first().map(String::as_str) != Some("id") {
        return Err(Error::Table("first header column must be `id`".into()));
    }
    let records = reader
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { .. } => Error::Table(format!("ragged rows: {e}")),
            _ => Error::Table(e.to_string()),
        })?;
    Ok((header, records))
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a feature table. A column with non-empty cells none of which is
/// numeric is dropped as non-numeric; otherwise unparseable cells become
/// missing.
pub fn import_feature_table(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let (header, records) = read_records(path)?;
    let n_cols = header.len() - 1;

    let keep: Vec<usize> = (1..=n_cols)
        .filter(|&j| {
            let cells = records.iter().map(|r| &r[j]);
            let any_text = cells.clone().any(|c| !c.is_empty());
            let any_number = cells.clone().any(|c| parse_cell(c).is_some());
            any_number || !any_text
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::Table(format!(
            "{}: no numeric feature columns",
            path.display()
        )));
    }

    let ids = records.iter().map(|r| r[0].to_string()).collect();
    let names = keep.iter().map(|&j| header[j].clone()).collect();
    let values = records
        .iter()
        .map(|r| keep.iter().map(|&j| parse_cell(&r[j])).collect())
        .collect();
    FeatureTable::new(ids, names, values)
}

/// Writes a feature table. Values use the shortest representation that
/// parses back to the same `f64`; missing values are empty cells.
pub fn export_feature_table(table: &FeatureTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let header = std::iter::once("id").chain(table.names.iter().map(String::as_str));
    writer.write_record(header).map_err(|e| csv_io(path, e))?;
    for (id, row) in table.ids.iter().zip(&table.values) {
        let cells = std::iter::once(id.clone()).chain(
            row.iter()
                .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
        );
        writer.write_record(cells).map_err(|e| csv_io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Table(format!("{other:?}")),
    }
}

/// Per-utterance latent vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

impl EmbeddingSet {
    pub fn new(ids: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        check_unique(&ids, "id")?;
        if ids.len() != vectors.len() {
            return Err(Error::Table(format!(
                "{} ids but {} vectors",
                ids.len(),
                vectors.len()
            )));
        }
        let dim = vectors.first().map_or(0, Vec::len);
        if dim == 0 && !vectors.is_empty() {
            return Err(Error::Table("zero-dimensional embeddings".into()));
        }
        for (id, v) in ids.iter().zip(&vectors) {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Table(format!("embedding `{id}` has a non-finite value")));
            }
        }
        Ok(EmbeddingSet { ids, vectors })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }
}

/// Reads `id,e0,...,e{D-1}`. Every cell must be a finite number.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let (header, records) = read_records(path)?;
    if header.len() < 2 {
        return Err(Error::Table("embedding file has no value columns".into()));
    }
    let mut ids = Vec::with_capacity(records.len());
    let mut vectors = Vec::with_capacity(records.len());
    for r in &records {
        ids.push(r[0].to_string());
        let v = (1..header.len())
            .map(|j| {
                parse_cell(&r[j]).ok_or_else(|| {
                    Error::Table(format!("embedding `{}` column {} not numeric", &r[0], header[j]))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        vectors.push(v);
    }
    EmbeddingSet::new(ids, vectors)
}

pub fn save_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let header: Vec<String> = std::iter::once("id".to_string())
        .chain((0..set.dim()).map(|i| format!("e{i}")))
        .collect();
    writer.write_record(&header).map_err(|e| csv_io(path, e))?;
    for (id, v) in set.ids.iter().zip(&set.vectors) {
        let cells = std::iter::once(id.clone()).chain(v.iter().map(f64::to_string));
        writer.write_record(cells).map_err(|e| csv_io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
