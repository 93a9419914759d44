use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Result, ValidityError};
use crate::clustering::Assignment;
use crate::linalg::{dist, fsum, sq_dist, sq_dist_slice, ExactSum};
use crate::rng::rng_for;

/// Non-noise rows grouped by label. Distinct labels are mapped to `0..k` in
/// ascending order; every sum is exact so results ignore row order.
struct Groups {
    rows: Vec<usize>,
    lab: Vec<usize>,
    sizes: Vec<usize>,
    centroids: Array2<f64>,
}

impl Groups {
    fn new(x: ArrayView2<f64>, labels: &[i32]) -> Result<Self> {
        if labels.len() != x.nrows() {
            return Err(ValidityError::RowMismatch {
                rows: x.nrows(),
                labels: labels.len(),
            });
        }
        let ids: BTreeMap<i32, usize> = labels
            .iter()
            .filter(|&&l| l >= 0)
            .copied()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .enumerate()
            .map(|(i, l)| (l, i))
            .collect();
        let k = ids.len();
        let mut rows = Vec::new();
        let mut lab = Vec::new();
        let mut sizes = vec![0; k];
        for (i, l) in labels.iter().enumerate() {
            if let Some(&c) = ids.get(l) {
                rows.push(i);
                lab.push(c);
                sizes[c] += 1;
            }
        }
        let d = x.ncols();
        let mut acc = vec![ExactSum::new(); k * d];
        for (&r, &c) in rows.iter().zip(&lab) {
            for j in 0..d {
                acc[c * d + j].add(x[[r, j]]);
            }
        }
        let centroids = Array2::from_shape_fn((k, d), |(c, j)| acc[c * d + j].value() / sizes[c] as f64);
        Ok(Self { rows, lab, sizes, centroids })
    }

    fn k(&self) -> usize {
        self.sizes.len()
    }

    fn n(&self) -> usize {
        self.rows.len()
    }

    fn require(&self, min_k: usize) -> Result<()> {
        if self.k() < min_k {
            Err(ValidityError::TooFewClusters(self.k()))
        } else {
            Ok(())
        }
    }

    fn global_centroid(&self, x: ArrayView2<f64>) -> Vec<f64> {
        (0..x.ncols())
            .map(|j| fsum(self.rows.iter().map(|&r| x[[r, j]])) / self.n() as f64)
            .collect()
    }

    fn dist_to_own_centroid(&self, x: ArrayView2<f64>, idx: usize) -> f64 {
        dist(x.row(self.rows[idx]), self.centroids.row(self.lab[idx]))
    }
}

/// Mean silhouette over non-noise rows; singleton clusters score 0.
pub fn silhouette(x: ArrayView2<f64>, labels: &[i32]) -> Result<f64> {
    let g = Groups::new(x, labels)?;
    g.require(2)?;
    let k = g.k();
    let d = x.ncols();
    let data: Vec<f64> = g.rows.iter().flat_map(|&r| x.row(r).to_vec()).collect();
    let row = |i: usize| &data[i * d..(i + 1) * d];
    let scores: Vec<f64> = (0..g.n())
        .into_par_iter()
        .map(|i| {
            let own = g.lab[i];
            if g.sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![ExactSum::new(); k];
            let xi = row(i);
            for j in 0..g.n() {
                if j != i {
                    sums[g.lab[j]].add(sq_dist_slice(xi, row(j)).sqrt());
                }
            }
            let a = sums[own].value() / (g.sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c].value() / g.sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .collect();
    Ok(fsum(scores) / g.n() as f64)
}

/// Silhouette on a seeded subsample of at most `cap` non-noise rows.
pub fn silhouette_sampled(x: ArrayView2<f64>, labels: &[i32], cap: usize, seed: u64) -> Result<f64> {
    if labels.len() != x.nrows() {
        return Err(ValidityError::RowMismatch {
            rows: x.nrows(),
            labels: labels.len(),
        });
    }
    let kept: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] >= 0).collect();
    if kept.len() <= cap {
        return silhouette(x, labels);
    }
    let mut rng = rng_for(seed, "silhouette/subsample");
    let mut pick: Vec<usize> = rand::seq::index::sample(&mut rng, kept.len(), cap)
        .into_iter()
        .map(|p| kept[p])
        .collect();
    pick.sort_unstable();
    let xs = x.select(Axis(0), &pick);
    let ls: Vec<i32> = pick.iter().map(|&i| labels[i]).collect();
    silhouette(xs.view(), &ls)
}

/// Davies-Bouldin index: mean over clusters of the worst `(S_i + S_j) / M_ij`.
pub fn davies_bouldin(x: ArrayView2<f64>, labels: &[i32]) -> Result<f64> {
    let g = Groups::new(x, labels)?;
    g.require(2)?;
    let k = g.k();
    let mut scatter = vec![ExactSum::new(); k];
    for i in 0..g.n() {
        scatter[g.lab[i]].add(g.dist_to_own_centroid(x, i));
    }
    let s: Vec<f64> = (0..k).map(|c| scatter[c].value() / g.sizes[c] as f64).collect();
    let mut worst = Vec::with_capacity(k);
    for i in 0..k {
        let mut w = f64::NEG_INFINITY;
        for j in 0..k {
            if i == j {
                continue;
            }
            let m = dist(g.centroids.row(i), g.centroids.row(j));
            if m == 0.0 {
                return Err(ValidityError::CoincidentCentroids);
            }
            w = w.max((s[i] + s[j]) / m);
        }
        worst.push(w);
    }
    Ok(fsum(worst) / k as f64)
}

/// Calinski-Harabasz: `(BGSS/(k-1)) / (WGSS/(n-k))`; `+∞` when WGSS is 0.
pub fn calinski_harabasz(x: ArrayView2<f64>, labels: &[i32]) -> Result<f64> {
    let g = Groups::new(x, labels)?;
    g.require(2)?;
    let (n, k) = (g.n(), g.k());
    if n <= k {
        return Err(ValidityError::TooFewClusters(k));
    }
    let center = ndarray::Array1::from(g.global_centroid(x));
    let bgss = fsum((0..k).map(|c| g.sizes[c] as f64 * sq_dist(g.centroids.row(c), center.view())));
    let wgss = fsum((0..n).map(|i| sq_dist(x.row(g.rows[i]), g.centroids.row(g.lab[i]))));
    if wgss == 0.0 {
        if bgss == 0.0 {
            return Err(ValidityError::CoincidentCentroids);
        }
        return Ok(f64::INFINITY);
    }
    Ok((bgss / (k - 1) as f64) / (wgss / (n - k) as f64))
}

/// Dunn index: smallest single-linkage gap over the largest diameter.
pub fn dunn(x: ArrayView2<f64>, labels: &[i32]) -> Result<f64> {
    let g = Groups::new(x, labels)?;
    g.require(2)?;
    // Repeated (row, label) pairs cannot change a min or a max.
    let mut seen = std::collections::HashSet::new();
    let mut lab = Vec::new();
    let mut data = Vec::new();
    for (&r, &c) in g.rows.iter().zip(&g.lab) {
        let mut key: Vec<u64> = x.row(r).iter().map(|v| (v + 0.0).to_bits()).collect();
        key.push(c as u64);
        if seen.insert(key) {
            lab.push(c);
            data.extend(x.row(r).iter());
        }
    }
    let d = x.ncols();
    let m = lab.len();
    let row = |i: usize| &data[i * d..(i + 1) * d];
    let (min_inter, max_diam) = (0..m)
        .into_par_iter()
        .map(|i| {
            let xi = row(i);
            let mut inter = f64::INFINITY;
            let mut diam: f64 = 0.0;
            for j in (i + 1)..m {
                let d2 = sq_dist_slice(xi, row(j));
                if lab[i] == lab[j] {
                    diam = diam.max(d2);
                } else {
                    inter = inter.min(d2);
                }
            }
            (inter, diam)
        })
        .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1.max(b.1)));
    let (min_inter, max_diam) = (min_inter.sqrt(), max_diam.sqrt());
    if max_diam == 0.0 {
        return Ok(if min_inter == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(min_inter / max_diam)
}

/// PBM index `((1/k)·(E1/Ek)·Dk)²`; `+∞` when every row sits on its centroid.
pub fn pbm(x: ArrayView2<f64>, labels: &[i32]) -> Result<f64> {
    let g = Groups::new(x, labels)?;
    g.require(2)?;
    let k = g.k();
    let center = ndarray::Array1::from(g.global_centroid(x));
    let e1 = fsum(g.rows.iter().map(|&r| dist(x.row(r), center.view())));
    let ek = fsum((0..g.n()).map(|i| g.dist_to_own_centroid(x, i)));
    let mut dk: f64 = 0.0;
    for i in 0..k {
        for j in (i + 1)..k {
            dk = dk.max(dist(g.centroids.row(i), g.centroids.row(j)));
        }
    }
    if ek == 0.0 {
        return Ok(f64::INFINITY);
    }
    let v = e1 / ek * dk / k as f64;
    Ok(v * v)
}

/// Memberships for Xie-Beni: crisp labels index rows of `centers` directly
/// and count as 0/1 memberships; noise rows are skipped.
#[derive(Debug, Clone, Copy)]
pub enum Membership<'a> {
    Crisp(&'a [i32]),
    Fuzzy(ArrayView2<'a, f64>),
}

/// Xie-Beni: `Σ u²‖x−c‖² / (n · min separation²)`.
pub fn xie_beni(x: ArrayView2<f64>, membership: Membership<'_>, centers: ArrayView2<f64>) -> Result<f64> {
    let k = centers.nrows();
    if k < 2 {
        return Err(ValidityError::TooFewClusters(k));
    }
    if centers.ncols() != x.ncols() {
        return Err(ValidityError::Shape(format!("centers have {} columns, data {}", centers.ncols(), x.ncols())));
    }
    let mut sep = f64::INFINITY;
    for i in 0..k {
        for j in (i + 1)..k {
            sep = sep.min(sq_dist(centers.row(i), centers.row(j)));
        }
    }
    if sep == 0.0 {
        return Err(ValidityError::CoincidentCenters);
    }
    let (num, n) = match membership {
        Membership::Crisp(labels) => {
            if labels.len() != x.nrows() {
                return Err(ValidityError::RowMismatch {
                    rows: x.nrows(),
                    labels: labels.len(),
                });
            }
            let mut acc = ExactSum::new();
            let mut n = 0;
            for (i, &l) in labels.iter().enumerate() {
                if l < 0 {
                    continue;
                }
                let c = l as usize;
                if c >= k {
                    return Err(ValidityError::Shape(format!("label {l} has no center")));
                }
                acc.add(sq_dist(x.row(i), centers.row(c)));
                n += 1;
            }
            (acc.value(), n)
        }
        Membership::Fuzzy(u) => {
            if u.nrows() != x.nrows() || u.ncols() != k {
                return Err(ValidityError::Shape(format!("membership is {}x{}", u.nrows(), u.ncols())));
            }
            let mut acc = ExactSum::new();
            for i in 0..x.nrows() {
                for c in 0..k {
                    acc.add(u[[i, c]] * u[[i, c]] * sq_dist(x.row(i), centers.row(c)));
                }
            }
            (acc.value(), x.nrows())
        }
    };
    if n == 0 {
        return Err(ValidityError::TooFewClusters(0));
    }
    Ok(num / (n as f64 * sep))
}

/// The six indices for one assignment. `None` marks an index that is
/// undefined for this clustering; infinite values serialize as `"unbounded"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    #[serde(with = "super::unbounded")]
    pub silhouette: Option<f64>,
    #[serde(with = "super::unbounded")]
    pub dbi: Option<f64>,
    #[serde(with = "super::unbounded")]
    pub chi: Option<f64>,
    #[serde(with = "super::unbounded")]
    pub dunn: Option<f64>,
    #[serde(with = "super::unbounded")]
    pub pbm: Option<f64>,
    #[serde(with = "super::unbounded")]
    pub xie_beni: Option<f64>,
    pub k: usize,
    pub n_used: usize,
}

impl ValidityReport {
    /// Scores an assignment exactly.
    pub fn compute(x: ArrayView2<f64>, a: &Assignment) -> Self {
        Self::compute_with(x, a, None, 0)
    }

    /// As `compute`, but silhouette runs on at most `silhouette_cap` rows.
    pub fn compute_with(x: ArrayView2<f64>, a: &Assignment, silhouette_cap: Option<usize>, seed: u64) -> Self {
        let labels = &a.labels;
        let groups = Groups::new(x, labels).ok();
        let k = groups.as_ref().map_or(0, Groups::k);
        let n_used = groups.as_ref().map_or(0, Groups::n);
        let silhouette = match silhouette_cap {
            Some(cap) => silhouette_sampled(x, labels, cap, seed),
            None => silhouette(x, labels),
        };
        let xb = match (&a.fuzzy, &groups) {
            (Some(f), _) => xie_beni(x, Membership::Fuzzy(f.membership.view()), f.centers.view()),
            (None, Some(g)) => {
                let dense: Vec<i32> = (0..labels.len())
                    .map(|i| match g.rows.binary_search(&i) {
                        Ok(p) => g.lab[p] as i32,
                        Err(_) => -1,
                    })
                    .collect();
                xie_beni(x, Membership::Crisp(&dense), g.centroids.view())
            }
            (None, None) => Err(ValidityError::TooFewClusters(0)),
        };
        Self {
            silhouette: silhouette.ok(),
            dbi: davies_bouldin(x, labels).ok(),
            chi: calinski_harabasz(x, labels).ok(),
            dunn: dunn(x, labels).ok(),
            pbm: pbm(x, labels).ok(),
            xie_beni: xb.ok(),
            k,
            n_used,
        }
    }

    /// `(name, value)` pairs in table order.
    pub fn entries(&self) -> [(&'static str, Option<f64>); 6] {
        [
            ("silhouette", self.silhouette),
            ("dbi", self.dbi),
            ("chi", self.chi),
            ("dunn", self.dunn),
            ("pbm", self.pbm),
            ("xie_beni", self.xie_beni),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn four() -> (Array2<f64>, Vec<i32>) {
        (array![[0.0], [1.0], [10.0], [11.0]], vec![0, 0, 1, 1])
    }

    fn close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn worked_instance() {
        let (x, l) = four();
        // a = 1 for every point; b = 10.5 for the outer points, 9.5 for the inner.
        let s_outer = (10.5 - 1.0) / 10.5;
        let s_inner = (9.5 - 1.0) / 9.5;
        close(silhouette(x.view(), &l).unwrap(), (2.0 * s_outer + 2.0 * s_inner) / 4.0);
        close(silhouette(x.view(), &l).unwrap(), 0.899749373433584);
        close(davies_bouldin(x.view(), &l).unwrap(), 0.1);
        close(calinski_harabasz(x.view(), &l).unwrap(), 200.0);
        close(dunn(x.view(), &l).unwrap(), 9.0);
        close(pbm(x.view(), &l).unwrap(), 2500.0);
        let c = array![[0.5], [10.5]];
        close(xie_beni(x.view(), Membership::Crisp(&l), c.view()).unwrap(), 0.0025);
    }

    #[test]
    fn one_cluster_is_rejected() {
        let (x, _) = four();
        let l = vec![0; 4];
        assert_eq!(silhouette(x.view(), &l), Err(ValidityError::TooFewClusters(1)));
        assert!(pbm(x.view(), &l).is_err());
        assert!(matches!(
            calinski_harabasz(x.view(), &[0, 1, 2, 3]),
            Err(ValidityError::TooFewClusters(4))
        ));
    }

    #[test]
    fn limits_and_sentinels() {
        let x = array![[0.0], [0.0], [5.0], [5.0]];
        let l = vec![0, 0, 1, 1];
        assert_eq!(silhouette(x.view(), &l).unwrap(), 1.0);
        assert_eq!(calinski_harabasz(x.view(), &l).unwrap(), f64::INFINITY);
        assert_eq!(dunn(x.view(), &l).unwrap(), f64::INFINITY);
        assert_eq!(pbm(x.view(), &l).unwrap(), f64::INFINITY);
        let singletons = array![[0.0], [3.0], [7.0]];
        assert_eq!(dunn(singletons.view(), &[0, 1, 2]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn coincident_centroids() {
        let x = array![[0.0], [2.0], [1.0], [1.0]];
        assert_eq!(davies_bouldin(x.view(), &[0, 0, 1, 1]), Err(ValidityError::CoincidentCentroids));
        let c = array![[1.0], [1.0]];
        assert_eq!(
            xie_beni(x.view(), Membership::Crisp(&[0, 0, 1, 1]), c.view()),
            Err(ValidityError::CoincidentCenters)
        );
    }

    #[test]
    fn shared_point_gives_zero_dunn() {
        let x = array![[0.0], [1.0], [1.0], [2.0]];
        assert_eq!(dunn(x.view(), &[0, 0, 1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn noise_rows_excluded() {
        let x = array![[0.0], [1.0], [10.0], [11.0], [500.0]];
        let l = vec![0, 0, 1, 1, -1];
        close(calinski_harabasz(x.view(), &l).unwrap(), 200.0);
        let a = Assignment {
            labels: l,
            centroids: None,
            inertia: None,
            metadata: Default::default(),
            fuzzy: None,
        };
        let r = ValidityReport::compute(x.view(), &a);
        assert_eq!((r.k, r.n_used), (2, 4));
        close(r.xie_beni.unwrap(), 0.0025);
    }

    #[test]
    fn unbounded_serialization() {
        let r = ValidityReport {
            silhouette: Some(0.5),
            dbi: None,
            chi: Some(f64::INFINITY),
            dunn: Some(1.0),
            pbm: Some(2.0),
            xie_beni: Some(0.1),
            k: 2,
            n_used: 10,
        };
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"chi\":\"unbounded\""));
        assert!(s.contains("\"dbi\":null"));
        let back: ValidityReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn uniform_fuzzy_membership_permutation() {
        let x = array![[0.0], [1.0], [10.0], [11.0]];
        let u = Array2::from_elem((4, 2), 0.5);
        let c = array![[0.5], [10.5]];
        let c_rev = array![[10.5], [0.5]];
        assert_eq!(
            xie_beni(x.view(), Membership::Fuzzy(u.view()), c.view()).unwrap(),
            xie_beni(x.view(), Membership::Fuzzy(u.view()), c_rev.view()).unwrap()
        );
    }
}
