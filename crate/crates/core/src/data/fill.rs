use std::collections::BTreeSet;

use ndarray::Array2;

use super::{Aggregation, Dataset, GranularityFill, PreprocessSpec, Result, TargetGranularity};

const DAY: i64 = 86_400;

/// Completes the time grid and propagates values across it.
///
/// For an hourly target every observed day of an entity is expanded to its 24
/// hourly buckets; new cells start missing (count features start at zero).
/// Then each feature is filled according to its `granularity_fill`:
/// forward/backward carry observations within an entity, `daily` copies a day's
/// last observation to that day's other buckets, and `periodic` treats a survey
/// value as valid from its observation until the next one (and backwards before
/// the first one).
pub fn fill_granularity(ds: &Dataset, spec: &PreprocessSpec) -> Result<Dataset> {
    let mut out = match ds.granularity {
        Some(TargetGranularity::Hourly) => densify_hourly(ds, spec)?,
        _ => ds.clone(),
    };
    let groups = entity_runs(&out);
    for (j, col) in ds.columns.iter().enumerate() {
        let mode = spec.feature(&col.source)?.granularity_fill;
        for run in &groups {
            let mut cells: Vec<f64> = run.iter().map(|&i| out.values[[i, j]]).collect();
            match mode {
                GranularityFill::None => continue,
                GranularityFill::Forward => forward(&mut cells),
                GranularityFill::Backward => backward(&mut cells),
                GranularityFill::Periodic => {
                    forward(&mut cells);
                    backward(&mut cells);
                }
                GranularityFill::Daily => {
                    let days: Vec<i64> = run.iter().map(|&i| out.timestamps[i].div_euclid(DAY)).collect();
                    daily(&mut cells, &days);
                }
            }
            for (&i, v) in run.iter().zip(cells) {
                out.values[[i, j]] = v;
            }
        }
    }
    Ok(out)
}

/// Row indices grouped per entity (rows are already sorted by entity, time).
fn entity_runs(ds: &Dataset) -> Vec<Vec<usize>> {
    let mut runs: Vec<Vec<usize>> = Vec::new();
    for i in 0..ds.n_rows() {
        match runs.last_mut() {
            Some(run) if ds.entity_ids[run[0]] == ds.entity_ids[i] => run.push(i),
            _ => runs.push(vec![i]),
        }
    }
    runs
}

fn densify_hourly(ds: &Dataset, spec: &PreprocessSpec) -> Result<Dataset> {
    let mut keys: BTreeSet<(String, i64)> = BTreeSet::new();
    for i in 0..ds.n_rows() {
        let day = ds.timestamps[i].div_euclid(DAY) * DAY;
        for h in 0..24 {
            keys.insert((ds.entity_ids[i].clone(), day + h * 3_600));
        }
    }
    let mut defaults = Vec::with_capacity(ds.n_cols());
    for c in &ds.columns {
        let count = spec.feature(&c.source)?.aggregation == Aggregation::Count;
        defaults.push(if count { 0.0 } else { f64::NAN });
    }
    let mut values = Array2::zeros((keys.len(), ds.n_cols()));
    let mut src = 0usize;
    for (row, (entity, ts)) in keys.iter().enumerate() {
        if src < ds.n_rows() && &ds.entity_ids[src] == entity && ds.timestamps[src] == *ts {
            values.row_mut(row).assign(&ds.values.row(src));
            src += 1;
        } else {
            for (j, d) in defaults.iter().enumerate() {
                values[[row, j]] = *d;
            }
        }
    }
    let (entity_ids, timestamps) = keys.into_iter().unzip();
    let mut out = Dataset::new(values, ds.columns.clone(), entity_ids, timestamps);
    out.role = ds.role;
    out.granularity = ds.granularity;
    Ok(out)
}

fn forward(cells: &mut [f64]) {
    let mut last = f64::NAN;
    for v in cells.iter_mut() {
        if v.is_nan() {
            *v = last;
        } else {
            last = *v;
        }
    }
}

fn backward(cells: &mut [f64]) {
    let mut next = f64::NAN;
    for v in cells.iter_mut().rev() {
        if v.is_nan() {
            *v = next;
        } else {
            next = *v;
        }
    }
}

fn daily(cells: &mut [f64], days: &[i64]) {
    let mut start = 0;
    while start < cells.len() {
        let mut end = start;
        while end < cells.len() && days[end] == days[start] {
            end += 1;
        }
        if let Some(v) = cells[start..end].iter().rev().find(|v| !v.is_nan()).copied() {
            for c in &mut cells[start..end] {
                if c.is_nan() {
                    *c = v;
                }
            }
        }
        start = end;
    }
}
