//! Abundance tables: features by samples, with a condition label per sample
//! and explicit missing values.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "cancer-A")]
    CancerA,
    #[serde(rename = "cancer-B")]
    CancerB,
    #[serde(rename = "healthy")]
    Healthy,
}

impl Condition {
    pub fn label(&self) -> &'static str {
        match self {
            Condition::CancerA => "cancer-A",
            Condition::CancerB => "cancer-B",
            Condition::Healthy => "healthy",
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cancer-A" => Ok(Condition::CancerA),
            "cancer-B" => Ok(Condition::CancerB),
            "healthy" => Ok(Condition::Healthy),
            other => Err(Error::Input(format!(
                "unknown condition label `{other}` (expected cancer-A, cancer-B or healthy)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceTable {
    pub feature_ids: Vec<String>,
    pub sample_ids: Vec<String>,
    pub labels: Vec<Condition>,
    /// One row per feature; `None` marks a missing value.
    pub values: Vec<Vec<Option<f64>>>,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "na" | "NaN" | "nan" | "N/A")
}

impl AbundanceTable {
    pub fn new(
        feature_ids: Vec<String>,
        sample_ids: Vec<String>,
        labels: Vec<Condition>,
        values: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        if sample_ids.len() != labels.len() {
            return Err(Error::Input("every sample needs exactly one condition label".into()));
        }
        if feature_ids.len() != values.len() {
            return Err(Error::Input("one value row per feature is required".into()));
        }
        if let Some(i) = values.iter().position(|r| r.len() != sample_ids.len()) {
            return Err(Error::Input(format!(
                "feature `{}` has {} values for {} samples",
                feature_ids[i],
                values[i].len(),
                sample_ids.len()
            )));
        }
        Ok(Self {
            feature_ids,
            sample_ids,
            labels,
            values,
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_ids.len()
    }

    pub fn count(&self, c: Condition) -> usize {
        self.labels.iter().filter(|&&l| l == c).count()
    }

    /// Parses a table whose header is `id, sample, sample, ...`. Labels come
    /// from `labels` (sample id to condition) when given, and otherwise from
    /// header cells of the form `sample:label`.
    pub fn from_csv<R: Read>(reader: R, labels: Option<&HashMap<String, Condition>>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = rdr.records();
        let header = match records.next() {
            Some(r) => r.map_err(|e| Error::Input(format!("row 1: {e}")))?,
            None => return Err(Error::Input("empty abundance table".into())),
        };
        if header.len() < 2 {
            return Err(Error::Input("row 1: need a feature id column and at least one sample".into()));
        }
        let mut sample_ids = Vec::with_capacity(header.len() - 1);
        let mut conditions = Vec::with_capacity(header.len() - 1);
        for (j, cell) in header.iter().enumerate().skip(1) {
            let (id, embedded) = match cell.rsplit_once(':') {
                Some((id, lab)) if labels.is_none() => (id.to_string(), Some(lab)),
                _ => (cell.to_string(), None),
            };
            let cond = match (labels, embedded) {
                (Some(map), _) => *map.get(&id).ok_or_else(|| {
                    Error::Input(format!("row 1, column {}: sample `{id}` has no label", j + 1))
                })?,
                (None, Some(lab)) => lab
                    .parse()
                    .map_err(|e| Error::Input(format!("row 1, column {}: {e}", j + 1)))?,
                (None, None) => {
                    return Err(Error::Input(format!(
                        "row 1, column {}: sample `{id}` has no label (use `sample:label` or a label file)",
                        j + 1
                    )))
                }
            };
            sample_ids.push(id);
            conditions.push(cond);
        }
        let mut feature_ids = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in records.enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| Error::Input(format!("row {row}: {e}")))?;
            if rec.len() != header.len() {
                return Err(Error::Input(format!(
                    "row {row}: {} cells, expected {}",
                    rec.len(),
                    header.len()
                )));
            }
            feature_ids.push(rec[0].to_string());
            let mut vals = Vec::with_capacity(rec.len() - 1);
            for (j, cell) in rec.iter().enumerate().skip(1) {
                if is_missing(cell) {
                    vals.push(None);
                } else {
                    let v: f64 = cell.parse().map_err(|_| {
                        Error::Input(format!("row {row}, column {}: `{cell}` is not a number", j + 1))
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Input(format!("row {row}, column {}: non-finite value", j + 1)));
                    }
                    vals.push(Some(v));
                }
            }
            values.push(vals);
        }
        Self::new(feature_ids, sample_ids, conditions, values)
    }

    /// Writes the table with labels embedded in the header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["feature_id".to_string()];
        header.extend(
            self.sample_ids
                .iter()
                .zip(&self.labels)
                .map(|(s, l)| format!("{s}:{l}")),
        );
        w.write_record(&header).map_err(io_err)?;
        for (id, row) in self.feature_ids.iter().zip(&self.values) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| match v {
                Some(x) => format!("{x}"),
                None => "NA".to_string(),
            }));
            w.write_record(&rec).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::Input(e.to_string()))?;
        Ok(())
    }
}

pub(crate) fn io_err(e: csv::Error) -> Error {
    Error::Input(e.to_string())
}

/// Reads a sample-to-condition mapping: two columns, an optional header
/// row whose second cell is not a condition label.
pub fn read_labels<R: Read>(reader: R) -> Result<HashMap<String, Condition>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut map = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Input(format!("label file row {}: {e}", i + 1)))?;
        if rec.len() < 2 {
            return Err(Error::Input(format!("label file row {}: need sample id and label", i + 1)));
        }
        match rec[1].parse::<Condition>() {
            Ok(c) => {
                if map.insert(rec[0].to_string(), c).is_some() {
                    return Err(Error::Input(format!(
                        "label file row {}: duplicate sample `{}`",
                        i + 1,
                        &rec[0]
                    )));
                }
            }
            Err(_) if i == 0 => {}
            Err(e) => return Err(Error::Input(format!("label file row {}: {e}", i + 1))),
        }
    }
    Ok(map)
}
