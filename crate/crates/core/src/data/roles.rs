use std::collections::BTreeSet;

use super::{DataError, Dataset, Result, Role};

/// Splits columns into training and validation datasets by source feature.
pub fn split_roles(ds: &Dataset, training: &[String], validation: &[String]) -> Result<(Dataset, Dataset)> {
    let t: BTreeSet<&str> = training.iter().map(String::as_str).collect();
    if let Some(dup) = validation.iter().find(|v| t.contains(v.as_str())) {
        return Err(DataError::OverlappingRoles(dup.clone()));
    }
    let pick = |names: &[String]| -> Result<Vec<usize>> {
        let mut cols = Vec::new();
        for name in names {
            let found: Vec<usize> = ds
                .columns
                .iter()
                .enumerate()
                .filter(|(_, c)| &c.source == name)
                .map(|(j, _)| j)
                .collect();
            if found.is_empty() {
                return Err(DataError::UnknownFeature(name.clone()));
            }
            cols.extend(found);
        }
        Ok(cols)
    };
    let mut train = ds.select_columns(&pick(training)?);
    train.role = Role::Training;
    let mut valid = ds.select_columns(&pick(validation)?);
    valid.role = Role::Validation;
    Ok((train, valid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn five() -> Dataset {
        Dataset::from_matrix(Array2::zeros((4, 5)), &["a", "b", "c", "d", "e"])
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn three_two_split() {
        let (t, v) = split_roles(&five(), &names(&["a", "b", "c"]), &names(&["d", "e"])).unwrap();
        assert_eq!((t.n_rows(), t.n_cols()), (4, 3));
        assert_eq!((v.n_rows(), v.n_cols()), (4, 2));
        assert_eq!(v.role, Role::Validation);
        assert_eq!(t.entity_ids, v.entity_ids);
    }

    #[test]
    fn empty_validation() {
        let (_, v) = split_roles(&five(), &names(&["a"]), &[]).unwrap();
        assert_eq!(v.n_cols(), 0);
    }

    #[test]
    fn overlap_rejected() {
        assert!(matches!(
            split_roles(&five(), &names(&["a", "b"]), &names(&["b"])),
            Err(DataError::OverlappingRoles(_))
        ));
    }
}
