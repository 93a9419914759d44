use std::io::{Read, Write};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{DataError, FeatureCategory, Result, Role, TargetGranularity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    /// Level codes; `levels[..declared]` is the declared set, anything after was
    /// observed in the data but not declared.
    Categorical { levels: Vec<String>, declared: usize },
    Ordinal { levels: Vec<String>, declared: usize },
    /// One-hot indicator for `level` of the source feature.
    Indicator { level: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    /// Schema feature the column derives from.
    pub source: String,
    pub category: FeatureCategory,
    pub kind: ColumnKind,
}

impl Column {
    pub fn numeric(name: &str, category: FeatureCategory) -> Self {
        Self {
            name: name.to_string(),
            source: name.to_string(),
            category,
            kind: ColumnKind::Numeric,
        }
    }
}

/// Dense numeric matrix keyed by entity and timestamp. `NaN` marks missing
/// values between stages; a finished dataset has none.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub values: Array2<f64>,
    pub columns: Vec<Column>,
    pub entity_ids: Vec<String>,
    pub timestamps: Vec<i64>,
    pub role: Role,
    pub granularity: Option<TargetGranularity>,
}

impl Dataset {
    pub fn new(values: Array2<f64>, columns: Vec<Column>, entity_ids: Vec<String>, timestamps: Vec<i64>) -> Self {
        assert_eq!(values.ncols(), columns.len(), "column metadata must match matrix width");
        assert_eq!(values.nrows(), entity_ids.len());
        assert_eq!(values.nrows(), timestamps.len());
        Self {
            values,
            columns,
            entity_ids,
            timestamps,
            role: Role::Training,
            granularity: None,
        }
    }

    /// Numeric dataset with synthetic keys, mostly for tests and benchmarks.
    pub fn from_matrix(values: Array2<f64>, names: &[&str]) -> Self {
        let n = values.nrows();
        Self::new(
            values,
            names.iter().map(|n| Column::numeric(n, FeatureCategory::Other)).collect(),
            (0..n).map(|i| format!("row{i}")).collect(),
            (0..n as i64).collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn has_feature(&self, source: &str) -> bool {
        self.columns.iter().any(|c| c.source == source)
    }

    /// Stable identifier of a row, `entity@timestamp`.
    pub fn row_id(&self, row: usize) -> String {
        format!("{}@{}", self.entity_ids[row], self.timestamps[row])
    }

    pub fn row_index(&self, id: &str) -> Option<usize> {
        (0..self.n_rows()).find(|&i| self.row_id(i) == id)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            values: self.values.select(Axis(0), rows),
            columns: self.columns.clone(),
            entity_ids: rows.iter().map(|&i| self.entity_ids[i].clone()).collect(),
            timestamps: rows.iter().map(|&i| self.timestamps[i]).collect(),
            role: self.role,
            granularity: self.granularity,
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            values: self.values.select(Axis(1), cols),
            columns: cols.iter().map(|&j| self.columns[j].clone()).collect(),
            entity_ids: self.entity_ids.clone(),
            timestamps: self.timestamps.clone(),
            role: self.role,
            granularity: self.granularity,
        }
    }

    /// Writes `entity_id,timestamp,<columns...>` with shortest round-trip float text.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["entity_id".to_string(), "timestamp".to_string()];
        header.extend(self.feature_names());
        wtr.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.entity_ids[i].clone(), self.timestamps[i].to_string()];
            rec.extend(self.values.row(i).iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Parses the format written by [`Dataset::write_csv`]. Column metadata other
    /// than names is not stored in the file; pass `columns` to restore it.
    pub fn read_csv<R: Read>(r: R, columns: Option<Vec<Column>>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.len() < 2 || header[0] != "entity_id" || header[1] != "timestamp" {
            return Err(DataError::Malformed("expected entity_id,timestamp header".into()));
        }
        let names = &header[2..];
        let columns = match columns {
            Some(c) => {
                if c.len() != names.len() || c.iter().zip(names).any(|(c, n)| &c.name != n) {
                    return Err(DataError::Malformed("column metadata does not match header".into()));
                }
                c
            }
            None => names.iter().map(|n| Column::numeric(n, FeatureCategory::Other)).collect(),
        };
        let mut ids = Vec::new();
        let mut ts = Vec::new();
        let mut flat = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            ids.push(rec[0].to_string());
            ts.push(
                rec[1]
                    .parse::<i64>()
                    .map_err(|_| DataError::Malformed(format!("bad timestamp `{}`", &rec[1])))?,
            );
            for cell in rec.iter().skip(2) {
                flat.push(
                    cell.parse::<f64>()
                        .map_err(|_| DataError::Malformed(format!("bad value `{cell}`")))?,
                );
            }
        }
        let values = Array2::from_shape_vec((ids.len(), names.len()), flat)
            .map_err(|e| DataError::Malformed(e.to_string()))?;
        Ok(Self::new(values, columns, ids, ts))
    }
}
