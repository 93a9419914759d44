use std::collections::BTreeMap;

use super::{DataError, Dataset, MissingPolicy, PreprocessSpec, Result};

/// Applies each feature's missing-value policy. `drop` removes rows first so
/// means and modes are computed on the surviving rows.
pub fn impute(ds: &Dataset, spec: &PreprocessSpec) -> Result<Dataset> {
    let policies = ds
        .columns
        .iter()
        .map(|c| spec.feature(&c.source).map(|f| f.missing_policy))
        .collect::<Result<Vec<_>>>()?;

    let keep: Vec<usize> = (0..ds.n_rows())
        .filter(|&i| {
            policies
                .iter()
                .enumerate()
                .all(|(j, p)| *p != MissingPolicy::Drop || !ds.values[[i, j]].is_nan())
        })
        .collect();
    let mut out = ds.select_rows(&keep);

    for (j, policy) in policies.iter().enumerate() {
        let col = out.values.column(j);
        let observed: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
        if observed.len() == col.len() {
            continue;
        }
        let fill = match policy {
            MissingPolicy::None | MissingPolicy::Drop => continue,
            MissingPolicy::Zero => 0.0,
            MissingPolicy::Mean => {
                if observed.is_empty() {
                    return Err(DataError::AllMissingColumn(out.columns[j].name.clone()));
                }
                observed.iter().sum::<f64>() / observed.len() as f64
            }
            MissingPolicy::Mode => mode(&observed).ok_or_else(|| DataError::AllMissingColumn(out.columns[j].name.clone()))?,
        };
        out.values.column_mut(j).mapv_inplace(|v| if v.is_nan() { fill } else { v });
    }
    Ok(out)
}

/// Most frequent value; ties resolve to the smallest value.
fn mode(values: &[f64]) -> Option<f64> {
    let mut counts: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for &v in values {
        // Order-preserving key for finite floats.
        let bits = v.to_bits();
        let key = if v.is_sign_negative() { !bits } else { bits | (1 << 63) };
        counts.entry(key).or_insert((v, 0)).1 += 1;
    }
    counts
        .values()
        .fold(None, |best: Option<(f64, usize)>, &(v, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((v, c)),
        })
        .map(|(v, _)| v)
}

/// Fails if any value is still missing.
pub fn ensure_complete(ds: &Dataset) -> Result<()> {
    for (j, c) in ds.columns.iter().enumerate() {
        if ds.values.column(j).iter().any(|v| v.is_nan()) {
            return Err(DataError::ResidualMissing(c.name.clone()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureSpec;
    use ndarray::Array2;

    fn run(vals: Vec<f64>, policy: MissingPolicy) -> Result<Dataset> {
        let n = vals.len();
        let ds = Dataset::from_matrix(Array2::from_shape_vec((n, 1), vals).unwrap(), &["x"]);
        let mut spec = PreprocessSpec::default();
        spec.features.insert(
            "x".into(),
            FeatureSpec {
                missing_policy: policy,
                ..Default::default()
            },
        );
        impute(&ds, &spec)
    }

    #[test]
    fn mean_policy() {
        let out = run(vec![1.0, f64::NAN, 3.0], MissingPolicy::Mean).unwrap();
        assert_eq!(out.values.column(0).to_vec(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn zero_policy_on_all_missing() {
        let out = run(vec![f64::NAN, f64::NAN], MissingPolicy::Zero).unwrap();
        assert_eq!(out.values.column(0).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn mode_policy_on_codes() {
        // levels a=0, b=1
        let out = run(vec![0.0, 0.0, 1.0, f64::NAN], MissingPolicy::Mode).unwrap();
        assert_eq!(out.values[[3, 0]], 0.0);
    }

    #[test]
    fn drop_policy_removes_rows() {
        let out = run(vec![1.0, f64::NAN, 3.0], MissingPolicy::Drop).unwrap();
        assert_eq!(out.n_rows(), 2);
        assert_eq!(out.entity_ids, vec!["row0", "row2"]);
    }

    #[test]
    fn all_missing_mean_errors() {
        assert!(matches!(
            run(vec![f64::NAN, f64::NAN], MissingPolicy::Mean),
            Err(DataError::AllMissingColumn(_))
        ));
    }

    #[test]
    fn idempotent() {
        let once = run(vec![1.0, f64::NAN, 4.0, f64::NAN], MissingPolicy::Mean).unwrap();
        let mut spec = PreprocessSpec::default();
        spec.features.insert(
            "x".into(),
            FeatureSpec {
                missing_policy: MissingPolicy::Mean,
                ..Default::default()
            },
        );
        assert_eq!(impute(&once, &spec).unwrap(), once);
    }

    #[test]
    fn residual_missing_detected() {
        let out = run(vec![1.0, f64::NAN], MissingPolicy::None).unwrap();
        assert!(matches!(ensure_complete(&out), Err(DataError::ResidualMissing(_))));
    }
}
