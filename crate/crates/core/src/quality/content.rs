use crate::explain::FeatureImportanceVector;
use crate::llm::Sign;

use super::{QualityError, Result};

/// 1-based ranks with ties sharing their mean rank.
fn midranks(keys: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
    let mut ranks = vec![0.0; keys.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && keys[order[j + 1]] == keys[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman's ρ between the ground ranking (by |weight|, descending) and the
/// LLM ordering over the ground features. Ground features the LLM omits share
/// the midrank of the remaining positions.
pub fn spearman_rank(ground: &FeatureImportanceVector, llm: &[String]) -> Result<f64> {
    let names: Vec<&str> = ground.weights.iter().map(|(n, _)| n.as_str()).collect();
    let mut positions: Vec<Option<usize>> = vec![None; names.len()];
    let mut next = 0;
    for f in llm {
        if let Some(i) = names.iter().position(|n| n == f) {
            if positions[i].is_none() {
                positions[i] = Some(next);
                next += 1;
            }
        }
    }
    if next < 2 {
        return Err(QualityError::TooFewCommonFeatures(next));
    }
    let missing = next as f64;
    let ground_keys: Vec<f64> = ground.weights.iter().map(|(_, w)| -w.abs()).collect();
    let llm_keys: Vec<f64> = positions.iter().map(|p| p.map_or(missing, |p| p as f64)).collect();
    Ok(pearson(&midranks(&ground_keys), &midranks(&llm_keys)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NdcgDifference {
    pub value: f64,
    /// Ground features the LLM ordering lacked, appended alphabetically.
    pub appended: usize,
}

/// `1 − DCG/IDCG` of the LLM ordering with gains `|w| / Σ|w|` and a
/// `1 / log₂(position + 1)` discount.
pub fn ndcg_difference(ground: &FeatureImportanceVector, llm: &[String]) -> Result<NdcgDifference> {
    let total: f64 = ground.weights.iter().map(|(_, w)| w.abs()).sum();
    if !(total > 0.0) {
        return Err(QualityError::ZeroGainVector);
    }
    let gain = |name: &str| ground.get(name).map(|w| w.abs() / total);
    let mut order: Vec<String> = Vec::new();
    for f in llm {
        if gain(f).is_some() && !order.contains(f) {
            order.push(f.clone());
        }
    }
    let mut rest: Vec<String> = ground
        .weights
        .iter()
        .map(|(n, _)| n.clone())
        .filter(|n| !order.contains(n))
        .collect();
    rest.sort();
    let appended = rest.len();
    order.extend(rest);
    let discount = |i: usize| 1.0 / ((i + 2) as f64).log2();
    let dcg: f64 = order.iter().enumerate().map(|(i, f)| gain(f).unwrap_or(0.0) * discount(i)).sum();
    let mut ideal: Vec<f64> = ground.weights.iter().map(|(_, w)| w.abs() / total).collect();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg: f64 = ideal.iter().enumerate().map(|(i, g)| g * discount(i)).sum();
    Ok(NdcgDifference {
        value: (1.0 - dcg / idcg).clamp(0.0, 1.0),
        appended,
    })
}

/// Euclidean distance between the L2-normalized vectors. A zero vector stays zero.
pub fn euclidean_distance(v1: &[f64], v2: &[f64]) -> Result<f64> {
    if v1.len() != v2.len() {
        return Err(QualityError::DimensionMismatch(v1.len(), v2.len()));
    }
    let unit = |v: &[f64]| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| if n > 0.0 { x / n } else { 0.0 }).collect::<Vec<_>>()
    };
    let (a, b) = (unit(v1), unit(v2));
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// Signed reciprocal-rank vector over `features`: the feature at rank r gets
/// `±1/r`, absent features get 0.
pub fn rank_vector(features: &[String], ranking: &[(String, Sign)]) -> Vec<f64> {
    features
        .iter()
        .map(|f| {
            ranking
                .iter()
                .position(|(g, _)| g == f)
                .map_or(0.0, |r| ranking[r].1.value() / (r + 1) as f64)
        })
        .collect()
}
