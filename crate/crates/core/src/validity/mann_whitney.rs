use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{Result, ValidityError};

/// Combined sample sizes up to this use the exact permutation distribution.
pub const EXACT_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    pub p_two_sided: f64,
    pub exact: bool,
}

fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
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

fn u_from_ranks(ranks: &[f64], n1: usize) -> f64 {
    let r1: f64 = ranks.iter().sum();
    r1 - (n1 * (n1 + 1)) as f64 / 2.0
}

/// Enumerates every way to pick `n1` of the pooled ranks for the first sample.
fn exact_p(ranks: &[f64], n1: usize, u_obs: f64) -> f64 {
    let n = ranks.len();
    let mu = (n1 * (n - n1)) as f64 / 2.0;
    let observed = (u_obs - mu).abs();
    let mut idx: Vec<usize> = (0..n1).collect();
    let (mut hits, mut total) = (0u64, 0u64);
    loop {
        let r1: Vec<f64> = idx.iter().map(|&i| ranks[i]).collect();
        let u = u_from_ranks(&r1, n1);
        total += 1;
        if (u - mu).abs() >= observed - 1e-9 {
            hits += 1;
        }
        // next combination in lexicographic order
        let mut pos = n1;
        loop {
            if pos == 0 {
                return hits as f64 / total as f64;
            }
            pos -= 1;
            if idx[pos] < n - n1 + pos {
                break;
            }
        }
        idx[pos] += 1;
        for q in pos + 1..n1 {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// Two-sided Mann-Whitney U test with midranks for ties.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(ValidityError::EmptySample);
    }
    let (n1, n2) = (a.len(), b.len());
    let n = n1 + n2;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let u = u_from_ranks(&ranks[..n1], n1);
    if n <= EXACT_LIMIT {
        let p = exact_p(&ranks, n1, u);
        return Ok(MannWhitney {
            u,
            p_two_sided: p.min(1.0),
            exact: true,
        });
    }
    let mu = (n1 * n2) as f64 / 2.0;
    let mut sorted = pooled;
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let nf = n as f64;
    let var = (n1 * n2) as f64 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * (1.0 - normal.cdf(z))).min(1.0)
    };
    Ok(MannWhitney {
        u,
        p_two_sided: p,
        exact: false,
    })
}
