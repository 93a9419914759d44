use ndarray::Array2;

use super::{Column, ColumnKind, DataError, Dataset, Encoding, PreprocessSpec, Result};

/// Expands one-hot features into `feature=level` indicator columns and turns
/// ordinal codes into ranks `0..L-1` of the declared order.
pub fn encode(ds: &Dataset, spec: &PreprocessSpec) -> Result<Dataset> {
    let n = ds.n_rows();
    let mut columns: Vec<Column> = Vec::new();
    let mut data: Vec<Vec<f64>> = Vec::new();

    for (j, col) in ds.columns.iter().enumerate() {
        let encoding = spec.feature(&col.source)?.encoding;
        let src = ds.values.column(j);
        let check = |levels: &[String], declared: usize| -> Result<()> {
            for &v in src.iter() {
                if v.is_nan() {
                    return Err(DataError::ResidualMissing(col.name.clone()));
                }
                let code = v as usize;
                if code >= declared {
                    return Err(DataError::UnknownLevel {
                        feature: col.name.clone(),
                        value: levels.get(code).cloned().unwrap_or_else(|| v.to_string()),
                    });
                }
            }
            Ok(())
        };
        match (encoding, &col.kind) {
            (Encoding::OneHot, ColumnKind::Categorical { levels, declared }) => {
                check(levels, *declared)?;
                for (code, level) in levels[..*declared].iter().enumerate() {
                    columns.push(Column {
                        name: format!("{}={}", col.name, level),
                        source: col.source.clone(),
                        category: col.category,
                        kind: ColumnKind::Indicator { level: level.clone() },
                    });
                    data.push(src.iter().map(|&v| if v as usize == code { 1.0 } else { 0.0 }).collect());
                }
            }
            (Encoding::Ordinal, ColumnKind::Ordinal { levels, declared }) => {
                check(levels, *declared)?;
                columns.push(Column {
                    kind: ColumnKind::Numeric,
                    ..col.clone()
                });
                data.push(src.to_vec());
            }
            (Encoding::OneHot | Encoding::Ordinal, kind) => {
                return Err(DataError::InvalidSpec(format!(
                    "{encoding:?} encoding requested for `{}` of kind {kind:?}",
                    col.name
                )))
            }
            (Encoding::None, _) => {
                columns.push(col.clone());
                data.push(src.to_vec());
            }
        }
    }

    let mut values = Array2::zeros((n, columns.len()));
    for (j, col) in data.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            values[[i, j]] = *v;
        }
    }
    let mut out = Dataset::new(values, columns, ds.entity_ids.clone(), ds.timestamps.clone());
    out.role = ds.role;
    out.granularity = ds.granularity;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureCategory, FeatureSpec};
    use ndarray::Array2;

    fn categorical(codes: Vec<f64>, levels: &[&str], declared: usize, ordinal: bool, enc: Encoding) -> Result<Dataset> {
        let n = codes.len();
        let levels: Vec<String> = levels.iter().map(|s| s.to_string()).collect();
        let kind = if ordinal {
            ColumnKind::Ordinal { levels, declared }
        } else {
            ColumnKind::Categorical { levels, declared }
        };
        let ds = Dataset::new(
            Array2::from_shape_vec((n, 1), codes).unwrap(),
            vec![Column {
                name: "f".into(),
                source: "f".into(),
                category: FeatureCategory::Other,
                kind,
            }],
            vec!["a".into(); n],
            (0..n as i64).collect(),
        );
        let mut spec = PreprocessSpec::default();
        spec.features.insert(
            "f".into(),
            FeatureSpec {
                encoding: enc,
                ..Default::default()
            },
        );
        encode(&ds, &spec)
    }

    #[test]
    fn one_hot_indicators() {
        let out = categorical(vec![0.0, 1.0], &["home", "work"], 2, false, Encoding::OneHot).unwrap();
        assert_eq!(out.feature_names(), vec!["f=home", "f=work"]);
        assert_eq!(out.values.row(0).to_vec(), vec![1.0, 0.0]);
        for row in out.values.rows() {
            assert_eq!(row.sum(), 1.0);
        }
    }

    #[test]
    fn ordinal_rank_code() {
        let out = categorical(vec![2.0], &["never", "sometimes", "often"], 3, true, Encoding::Ordinal).unwrap();
        assert_eq!(out.values[[0, 0]], 2.0);
        assert_eq!(out.columns[0].kind, ColumnKind::Numeric);
    }

    #[test]
    fn unknown_level() {
        let err = categorical(vec![2.0], &["home", "work", "gym"], 2, false, Encoding::OneHot).unwrap_err();
        match err {
            DataError::UnknownLevel { value, .. } => assert_eq!(value, "gym"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
