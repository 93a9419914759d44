use std::collections::BTreeMap;

use ndarray::Array2;

use super::{
    Aggregation, Column, ColumnKind, DataError, Dataset, FeatureKind, PreprocessSpec, RawTable, RawValues, Result,
    Schema,
};

/// Reduces raw records to one row per (entity, target bucket). Rows come out
/// ordered by entity id, then bucket start.
pub fn aggregate(raw: &RawTable, schema: &Schema, spec: &PreprocessSpec) -> Result<Dataset> {
    let width = spec.target_granularity.seconds();
    let mut buckets: BTreeMap<(&str, i64), Vec<usize>> = BTreeMap::new();
    for i in 0..raw.n_rows() {
        let start = raw.timestamps[i].div_euclid(width) * width;
        buckets.entry((raw.entity_ids[i].as_str(), start)).or_default().push(i);
    }
    // Stable sort by time inside each bucket so `last` means most recent.
    for rows in buckets.values_mut() {
        rows.sort_by_key(|&i| raw.timestamps[i]);
    }

    let mut columns = Vec::new();
    let mut data: Vec<Vec<f64>> = Vec::new();
    for rc in &raw.columns {
        let feature = schema
            .get(&rc.name)
            .ok_or_else(|| DataError::UnknownFeature(rc.name.clone()))?;
        let fs = spec.feature(&rc.name)?;
        let agg = fs.aggregation;
        let values: Vec<f64> = match (&rc.values, feature.kind) {
            (RawValues::Numeric(v), _) => buckets
                .values()
                .map(|rows| reduce(rows.iter().filter_map(|&i| v[i]), agg))
                .collect(),
            (RawValues::Text(v), kind) => {
                if matches!(agg, Aggregation::Sum | Aggregation::Mean) {
                    return Err(DataError::UnsupportedAggregator {
                        feature: rc.name.clone(),
                        aggregation: agg,
                        kind,
                    });
                }
                let mut levels = feature.levels.clone();
                let declared = levels.len();
                let mut code_of = |s: &str| match levels.iter().position(|l| l == s) {
                    Some(p) => p as f64,
                    None => {
                        levels.push(s.to_string());
                        (levels.len() - 1) as f64
                    }
                };
                let out = buckets
                    .values()
                    .map(|rows| {
                        let codes: Vec<f64> = rows.iter().filter_map(|&i| v[i].as_deref().map(&mut code_of)).collect();
                        reduce(codes.into_iter(), agg)
                    })
                    .collect();
                if agg != Aggregation::Count {
                    let kind = if kind == FeatureKind::Ordinal {
                        ColumnKind::Ordinal { levels, declared }
                    } else {
                        ColumnKind::Categorical { levels, declared }
                    };
                    columns.push(Column {
                        name: rc.name.clone(),
                        source: rc.name.clone(),
                        category: feature.category,
                        kind,
                    });
                    data.push(out);
                    continue;
                }
                out
            }
        };
        columns.push(Column::numeric(&rc.name, feature.category));
        data.push(values);
    }

    let n = buckets.len();
    let mut values = Array2::from_elem((n, columns.len()), f64::NAN);
    for (j, col) in data.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            values[[i, j]] = *v;
        }
    }
    let (entity_ids, timestamps) = buckets.keys().map(|(e, t)| (e.to_string(), *t)).unzip();
    let mut ds = Dataset::new(values, columns, entity_ids, timestamps);
    ds.granularity = Some(spec.target_granularity);
    Ok(ds)
}

fn reduce(observed: impl Iterator<Item = f64>, agg: Aggregation) -> f64 {
    let vals: Vec<f64> = observed.collect();
    match agg {
        Aggregation::Count => vals.len() as f64,
        _ if vals.is_empty() => f64::NAN,
        Aggregation::Sum => vals.iter().sum(),
        Aggregation::Mean => vals.iter().sum::<f64>() / vals.len() as f64,
        Aggregation::Last | Aggregation::None => *vals.last().unwrap(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{
        load_csv_from_reader, FeatureCategory, FeatureSchema, FeatureSpec, NativeGranularity, TargetGranularity,
    };

    fn setup(csv: &str, agg: Aggregation, kind: FeatureKind, target: TargetGranularity) -> Result<Dataset> {
        let mut f = FeatureSchema::numeric("x", FeatureCategory::Other, NativeGranularity::SubHourly);
        if kind != FeatureKind::Numeric {
            f = f.with_levels(kind, &["e1", "e2"]);
        }
        let schema = Schema::new(vec![f]).unwrap();
        let raw = load_csv_from_reader(csv.as_bytes(), &schema).unwrap();
        let mut spec = PreprocessSpec {
            target_granularity: target,
            ..Default::default()
        };
        spec.features.insert(
            "x".into(),
            FeatureSpec {
                aggregation: agg,
                ..Default::default()
            },
        );
        aggregate(&raw, &schema, &spec)
    }

    #[test]
    fn sum_within_hour() {
        let csv = "id,date,x\na,0,100\na,180,200\na,360,50\n";
        let ds = setup(csv, Aggregation::Sum, FeatureKind::Numeric, TargetGranularity::Hourly).unwrap();
        assert_eq!(ds.n_rows(), 1);
        assert_eq!(ds.values[[0, 0]], 350.0);
    }

    #[test]
    fn mean_within_day() {
        let csv = "id,date,x\na,3600,2\na,7200,4\n";
        let ds = setup(csv, Aggregation::Mean, FeatureKind::Numeric, TargetGranularity::Daily).unwrap();
        assert_eq!(ds.values[[0, 0]], 3.0);
    }

    #[test]
    fn count_events() {
        let csv = "id,date,x\na,3600,e1\na,7200,e2\na,90000,\n";
        let ds = setup(csv, Aggregation::Count, FeatureKind::Categorical, TargetGranularity::Daily).unwrap();
        assert_eq!(ds.values[[0, 0]], 2.0);
        assert_eq!(ds.values[[1, 0]], 0.0);
        assert_eq!(ds.columns[0].kind, ColumnKind::Numeric);
    }

    #[test]
    fn last_takes_most_recent() {
        let csv = "id,date,x\na,7200,9\na,3600,1\n";
        let ds = setup(csv, Aggregation::Last, FeatureKind::Numeric, TargetGranularity::Daily).unwrap();
        assert_eq!(ds.values[[0, 0]], 9.0);
    }

    #[test]
    fn sum_over_categorical_rejected() {
        let csv = "id,date,x\na,0,e1\n";
        let err = setup(csv, Aggregation::Sum, FeatureKind::Categorical, TargetGranularity::Daily).unwrap_err();
        assert!(matches!(err, DataError::UnsupportedAggregator { .. }));
    }

    #[test]
    fn rows_grouped_per_entity_and_bucket() {
        let csv = "id,date,x\nb,0,1\na,0,2\na,86400,3\n";
        let ds = setup(csv, Aggregation::Sum, FeatureKind::Numeric, TargetGranularity::Daily).unwrap();
        assert_eq!(ds.entity_ids, vec!["a", "a", "b"]);
        assert_eq!(ds.timestamps, vec![0, 86400, 0]);
    }
}
