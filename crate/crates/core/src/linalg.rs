//! Small dense helpers shared by the numeric modules.

use ndarray::{Array2, ArrayView1, ArrayView2};

#[inline]
pub fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    sq_dist(a, b).sqrt()
}

#[inline]
pub fn sq_dist_slice(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Exact-duplicate rows collapsed. `first[u]` is the first row holding unique
/// row `u`, `inverse[i]` the unique index of row `i` and `counts[u]` its
/// multiplicity. Uniques are numbered in order of first occurrence.
pub struct UniqueRows {
    pub first: Vec<usize>,
    pub inverse: Vec<usize>,
    pub counts: Vec<usize>,
    /// Unique rows packed row-major.
    pub data: Vec<f64>,
    pub dim: usize,
}

impl UniqueRows {
    pub fn of(x: ArrayView2<f64>) -> Self {
        let dim = x.ncols();
        let mut seen: std::collections::HashMap<Vec<u64>, usize> = std::collections::HashMap::new();
        let mut first = Vec::new();
        let mut inverse = Vec::with_capacity(x.nrows());
        let mut counts = Vec::new();
        let mut data = Vec::new();
        for (i, row) in x.rows().into_iter().enumerate() {
            // -0.0 and 0.0 are the same point.
            let key: Vec<u64> = row.iter().map(|v| (v + 0.0).to_bits()).collect();
            let u = *seen.entry(key).or_insert_with(|| {
                first.push(i);
                counts.push(0);
                data.extend(row.iter());
                first.len() - 1
            });
            counts[u] += 1;
            inverse.push(u);
        }
        Self { first, inverse, counts, data, dim }
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    #[inline]
    pub fn row(&self, u: usize) -> &[f64] {
        &self.data[u * self.dim..(u + 1) * self.dim]
    }
}

/// Rows copied into one contiguous row-major buffer.
pub fn packed_rows(x: ArrayView2<f64>) -> Vec<f64> {
    x.rows().into_iter().flat_map(|r| r.to_vec()).collect()
}

/// Dense symmetric matrix of Euclidean distances between rows.
pub fn pairwise_distances(x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist(x.row(i), x.row(j));
            out[[i, j]] = d;
            out[[j, i]] = d;
        }
    }
    out
}

/// Solves `A x = b` for symmetric positive definite `A` (row-major, n×n) by
/// Cholesky factorisation. Returns `None` when `A` is not numerically SPD.
pub fn solve_spd(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// Exactly rounded floating-point sum (Shewchuk partials). The result does
/// not depend on the order the terms arrive in.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
    naive: f64,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        self.naive += x;
        if !x.is_finite() {
            return;
        }
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn value(&self) -> f64 {
        if !self.naive.is_finite() {
            return self.naive;
        }
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

pub fn fsum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = ExactSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Column means of a matrix.
pub fn column_means(x: ArrayView2<f64>) -> Vec<f64> {
    let n = x.nrows().max(1) as f64;
    (0..x.ncols()).map(|j| x.column(j).sum() / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unique_rows_collapse_duplicates() {
        let x = ndarray::array![[1.0, 2.0], [0.0, 0.0], [1.0, 2.0], [-0.0, 0.0]];
        let u = UniqueRows::of(x.view());
        assert_eq!(u.first, vec![0, 1]);
        assert_eq!(u.inverse, vec![0, 1, 0, 1]);
        assert_eq!(u.counts, vec![2, 2]);
        assert_eq!(u.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn cholesky_solves_small_system() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let x = solve_spd(&a, &[2.0, 1.0]).unwrap();
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0).abs() < 1e-12);
        assert!((2.0 * x[0] + 3.0 * x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fsum_is_exact_and_order_free() {
        assert_eq!(fsum([1e16, 1.0, -1e16]), 1.0);
        assert_eq!(fsum([0.1; 10]), 1.0);
        let a = [3.3, 1e-8, -7.25, 1e12, 0.7, -1e12];
        let mut b = a;
        b.reverse();
        assert_eq!(fsum(a), fsum(b));
    }

    #[test]
    fn rejects_indefinite() {
        assert!(solve_spd(&[1.0, 2.0, 2.0, 1.0], &[1.0, 1.0]).is_none());
    }
}
