use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{DataError, FeatureKind, Result, Schema};

#[derive(Debug, Clone, PartialEq)]
pub enum RawValues {
    Numeric(Vec<Option<f64>>),
    Text(Vec<Option<String>>),
}

impl RawValues {
    pub fn len(&self) -> usize {
        match self {
            Self::Numeric(v) => v.len(),
            Self::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawColumn {
    pub name: String,
    pub values: RawValues,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimestampFormat {
    EpochSeconds,
    Iso8601,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows: usize,
    pub timestamp_format: TimestampFormat,
    pub loaded_features: Vec<String>,
    pub ignored_columns: Vec<String>,
    pub absent_schema_features: Vec<String>,
    /// Non-empty cells that failed numeric parsing, per feature.
    pub coerced_cells: BTreeMap<String, usize>,
}

/// Typed column store of a raw CSV table, one row per input record.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub entity_ids: Vec<String>,
    pub timestamps: Vec<i64>,
    pub columns: Vec<RawColumn>,
    pub report: LoadReport,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.entity_ids.len()
    }

    pub fn column(&self, name: &str) -> Option<&RawColumn> {
        self.columns.iter().find(|c| c.name == name)
    }
}

pub fn load_csv(path: &Path, schema: &Schema) -> Result<RawTable> {
    if !path.exists() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    load_csv_from_reader(std::fs::File::open(path)?, schema)
}

fn parse_iso(s: &str) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

pub fn load_csv_from_reader<R: Read>(reader: R, schema: &Schema) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let position = |name: &str| header.iter().position(|h| h == name);

    let entity_idx = position(&schema.entity_column)
        .ok_or_else(|| DataError::MissingKeyColumn(schema.entity_column.clone()))?;
    let time_idx = position(&schema.timestamp_column)
        .ok_or_else(|| DataError::MissingKeyColumn(schema.timestamp_column.clone()))?;

    let mut present = Vec::new();
    let mut absent = Vec::new();
    for f in &schema.features {
        match position(&f.name) {
            Some(i) => present.push((f, i)),
            None => absent.push(f.name.clone()),
        }
    }
    if present.is_empty() {
        return Err(DataError::HeaderMismatch);
    }
    let ignored: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, h)| *i != entity_idx && *i != time_idx && schema.get(h).is_none())
        .map(|(_, h)| h.clone())
        .collect();
    for col in &ignored {
        log::warn!("ignoring column `{col}` not declared in the schema");
    }

    let mut entity_ids = Vec::new();
    let mut raw_times = Vec::new();
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); present.len()];
    for record in rdr.records() {
        let record = record?;
        entity_ids.push(record.get(entity_idx).unwrap_or("").trim().to_string());
        raw_times.push(record.get(time_idx).unwrap_or("").trim().to_string());
        for (slot, (_, i)) in cells.iter_mut().zip(&present) {
            slot.push(record.get(*i).unwrap_or("").trim().to_string());
        }
    }
    if entity_ids.is_empty() {
        return Err(DataError::EmptyTable);
    }

    let epoch = raw_times.iter().all(|t| t.parse::<i64>().is_ok());
    let timestamps = raw_times
        .iter()
        .enumerate()
        .map(|(row, t)| {
            let parsed = if epoch { t.parse::<i64>().ok() } else { parse_iso(t) };
            parsed.ok_or_else(|| DataError::BadTimestamp {
                row,
                value: t.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut coerced = BTreeMap::new();
    let columns = present
        .iter()
        .zip(cells)
        .map(|((f, _), raw)| {
            let values = match f.kind {
                FeatureKind::Numeric => {
                    let mut bad = 0usize;
                    let vals = raw
                        .iter()
                        .map(|s| {
                            if s.is_empty() {
                                return None;
                            }
                            match s.parse::<f64>() {
                                Ok(v) if v.is_finite() => Some(v),
                                _ => {
                                    bad += 1;
                                    None
                                }
                            }
                        })
                        .collect();
                    if bad > 0 {
                        coerced.insert(f.name.clone(), bad);
                    }
                    RawValues::Numeric(vals)
                }
                FeatureKind::Categorical | FeatureKind::Ordinal => {
                    RawValues::Text(raw.into_iter().map(|s| (!s.is_empty()).then_some(s)).collect())
                }
            };
            RawColumn {
                name: f.name.clone(),
                values,
            }
        })
        .collect::<Vec<_>>();

    Ok(RawTable {
        report: LoadReport {
            rows: entity_ids.len(),
            timestamp_format: if epoch {
                TimestampFormat::EpochSeconds
            } else {
                TimestampFormat::Iso8601
            },
            loaded_features: columns.iter().map(|c| c.name.clone()).collect(),
            ignored_columns: ignored,
            absent_schema_features: absent,
            coerced_cells: coerced,
        },
        entity_ids,
        timestamps,
        columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureCategory, FeatureSchema, NativeGranularity};

    fn steps_schema() -> Schema {
        Schema::new(vec![FeatureSchema::numeric(
            "steps",
            FeatureCategory::PhysicalActivity,
            NativeGranularity::Hourly,
        )])
        .unwrap()
    }

    #[test]
    fn three_rows_one_feature() {
        let csv = "id,date,steps\na,2021-05-24,10\na,2021-05-25,20\nb,2021-05-24,30\n";
        let t = load_csv_from_reader(csv.as_bytes(), &steps_schema()).unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.columns.len(), 1);
        assert_eq!(t.report.timestamp_format, TimestampFormat::Iso8601);
        assert_eq!(t.timestamps[1] - t.timestamps[0], 86_400);
    }

    #[test]
    fn unparseable_cell_becomes_missing() {
        let csv = "id,date,steps\na,0,abc\na,60,5\n";
        let t = load_csv_from_reader(csv.as_bytes(), &steps_schema()).unwrap();
        assert_eq!(t.columns[0].values, RawValues::Numeric(vec![None, Some(5.0)]));
        assert_eq!(t.report.coerced_cells["steps"], 1);
        assert_eq!(t.report.timestamp_format, TimestampFormat::EpochSeconds);
    }

    #[test]
    fn header_without_schema_features() {
        let csv = "id,date,mood\na,0,3\n";
        assert!(matches!(
            load_csv_from_reader(csv.as_bytes(), &steps_schema()),
            Err(DataError::HeaderMismatch)
        ));
    }

    #[test]
    fn extras_ignored_and_empty_rejected() {
        let csv = "id,date,steps,extra\na,0,1,x\n";
        let t = load_csv_from_reader(csv.as_bytes(), &steps_schema()).unwrap();
        assert_eq!(t.report.ignored_columns, vec!["extra".to_string()]);
        assert!(matches!(
            load_csv_from_reader("id,date,steps\n".as_bytes(), &steps_schema()),
            Err(DataError::EmptyTable)
        ));
    }

    #[test]
    fn missing_file() {
        let err = load_csv(Path::new("/nonexistent/x.csv"), &steps_schema()).unwrap_err();
        assert!(matches!(err, DataError::MissingFile(_)));
    }

    #[test]
    fn quoted_fields() {
        let csv = "id,date,steps\n\"a,1\",\"2021-05-24T10:00:00Z\",\"7\"\n";
        let t = load_csv_from_reader(csv.as_bytes(), &steps_schema()).unwrap();
        assert_eq!(t.entity_ids[0], "a,1");
        assert_eq!(t.columns[0].values, RawValues::Numeric(vec![Some(7.0)]));
    }
}
