use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::index;

use super::{canonical_labels, centroids_of, jacobi_eigh, kmeans, Assignment, ClusterError, ClusteringConfig, Result};
use crate::linalg::{pairwise_distances, sq_dist};
use crate::rng::rng_for;

/// Affinity floor that keeps an isolated vertex connected.
const ISOLATED_AFFINITY: f64 = 1e-12;

/// Laplacian eigen-decomposition of (a subsample of) `X`, computed once and
/// reused for every `k`.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    /// Row indices of `X` that entered the affinity graph, ascending.
    pub sample: Vec<usize>,
    pub n_rows: usize,
    pub bandwidth: f64,
    pub isolated_vertices: usize,
    pub eigenvalues: Array1<f64>,
    /// Eigenvectors of `L_sym` as columns, ascending eigenvalue.
    pub eigenvectors: Array2<f64>,
}

/// RBF affinity `exp(-d²/(2σ²))` with `σ` the median pairwise distance.
/// Returns the matrix (zero diagonal) and `σ`.
pub fn rbf_affinity(x: ArrayView2<f64>) -> (Array2<f64>, f64) {
    let n = x.nrows();
    let d = pairwise_distances(x);
    let mut upper: Vec<f64> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            upper.push(d[[i, j]]);
        }
    }
    let sigma = if upper.is_empty() {
        1.0
    } else {
        upper.sort_by(f64::total_cmp);
        let m = upper.len();
        let med = if m % 2 == 1 { upper[m / 2] } else { 0.5 * (upper[m / 2 - 1] + upper[m / 2]) };
        if med > 0.0 {
            med
        } else {
            1.0
        }
    };
    let denom = 2.0 * sigma * sigma;
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (-d[[i, j]] * d[[i, j]] / denom).exp();
            w[[i, j]] = v;
            w[[j, i]] = v;
        }
    }
    (w, sigma)
}

impl SpectralEmbedding {
    pub fn build(x: ArrayView2<f64>, cap: usize, seed: u64) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(ClusterError::DegenerateInput("no rows".into()));
        }
        let sample: Vec<usize> = if n > cap.max(2) {
            log::info!("spectral: subsampling {} of {n} rows", cap.max(2));
            let mut rng = rng_for(seed, "spectral/subsample");
            let mut idx = index::sample(&mut rng, n, cap.max(2)).into_vec();
            idx.sort_unstable();
            idx
        } else {
            (0..n).collect()
        };
        let xs = x.select(Axis(0), &sample);
        let m = sample.len();
        let (mut w, bandwidth) = rbf_affinity(xs.view());

        let mut isolated = 0;
        for i in 0..m {
            if m > 1 && w.row(i).sum() <= 0.0 {
                isolated += 1;
                for j in 0..m {
                    if j != i {
                        w[[i, j]] = w[[i, j]].max(ISOLATED_AFFINITY);
                        w[[j, i]] = w[[j, i]].max(ISOLATED_AFFINITY);
                    }
                }
            }
        }

        let inv_sqrt: Vec<f64> = (0..m)
            .map(|i| {
                let deg = w.row(i).sum();
                if deg > 0.0 {
                    1.0 / deg.sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let mut lap = Array2::zeros((m, m));
        for i in 0..m {
            for j in 0..m {
                let id = if i == j { 1.0 } else { 0.0 };
                lap[[i, j]] = id - inv_sqrt[i] * w[[i, j]] * inv_sqrt[j];
            }
        }
        let eig = jacobi_eigh(lap.view())?;
        Ok(Self {
            sample,
            n_rows: n,
            bandwidth,
            isolated_vertices: isolated,
            eigenvalues: eig.values,
            eigenvectors: eig.vectors,
        })
    }

    /// Row-normalized embedding on the first `k` eigenvectors.
    pub fn embed(&self, k: usize) -> Array2<f64> {
        let mut e = self.eigenvectors.slice(s![.., ..k]).to_owned();
        for mut row in e.rows_mut() {
            let norm = row.dot(&row).sqrt();
            if norm > 0.0 {
                row.mapv_inplace(|v| v / norm);
            }
        }
        e
    }

    /// Clusters the embedding with k-means and extends labels to rows left out
    /// of the subsample by nearest cluster mean in the original space.
    pub fn cluster(&self, x: ArrayView2<f64>, cfg: &ClusteringConfig) -> Result<Assignment> {
        let k = cfg.k.ok_or_else(|| ClusterError::InvalidConfig("k is required".into()))?;
        let m = self.sample.len();
        if k == 0 || k > m {
            return Err(ClusterError::DegenerateInput(format!("need 1 <= k <= {m}, got {k}")));
        }
        let embedding = self.embed(k);
        let mut inner = ClusteringConfig::kmeans(k, cfg.seed).with_restarts(cfg.restarts);
        inner.max_iter = cfg.max_iter;
        let sub = kmeans(embedding.view(), &inner)?;

        let mut labels = vec![-1i32; self.n_rows];
        for (pos, &row) in self.sample.iter().enumerate() {
            labels[row] = sub.labels[pos];
        }
        if m < self.n_rows {
            let xs = x.select(Axis(0), &self.sample);
            let means = centroids_of(xs.view(), &sub.labels, k);
            for (i, label) in labels.iter_mut().enumerate() {
                if *label < 0 {
                    let best = (0..k)
                        .min_by(|&a, &b| sq_dist(x.row(i), means.row(a)).total_cmp(&sq_dist(x.row(i), means.row(b))))
                        .unwrap_or(0);
                    *label = best as i32;
                }
            }
        }
        let (labels, _) = canonical_labels(&labels);
        let mut metadata = std::collections::BTreeMap::new();
        metadata.insert("bandwidth".to_string(), self.bandwidth);
        metadata.insert("graph_rows".to_string(), m as f64);
        metadata.insert("isolated_vertices".to_string(), self.isolated_vertices as f64);
        Ok(Assignment {
            labels,
            centroids: None,
            inertia: None,
            metadata,
            fuzzy: None,
        })
    }
}

pub fn spectral(x: ArrayView2<f64>, cfg: &ClusteringConfig) -> Result<Assignment> {
    SpectralEmbedding::build(x, cfg.spectral_cap, cfg.seed)?.cluster(x, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(seed: u64) -> Array2<f64> {
        let mut rng = rng_for(seed, "test-blobs");
        let noise = Normal::new(0.0, 0.4).unwrap();
        Array2::from_shape_fn((40, 2), |(i, _)| {
            let centre = if i < 20 { 0.0 } else { 8.0 };
            centre + noise.sample(&mut rng)
        })
    }

    #[test]
    fn separated_blobs_match_kmeans() {
        let x = blobs(1);
        let sp = spectral(x.view(), &ClusteringConfig::spectral(2, 5)).unwrap();
        let km = kmeans(x.view(), &ClusteringConfig::kmeans(2, 5)).unwrap();
        assert_eq!(sp.labels, km.labels);
        assert!(sp.metadata["bandwidth"] > 0.0);
    }

    #[test]
    fn k_one_is_single_cluster() {
        let x = blobs(2);
        let a = spectral(x.view(), &ClusteringConfig::spectral(1, 0)).unwrap();
        assert!(a.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn affinity_exactly_symmetric() {
        let (w, sigma) = rbf_affinity(blobs(3).view());
        assert!(sigma > 0.0);
        assert_eq!(w, w.t());
        assert!(w.diag().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn subsampled_labels_cover_all_rows() {
        let x = blobs(4);
        let mut cfg = ClusteringConfig::spectral(2, 8);
        cfg.spectral_cap = 16;
        let a = spectral(x.view(), &cfg).unwrap();
        assert_eq!(a.labels.len(), 40);
        assert_eq!(a.metadata["graph_rows"], 16.0);
        let km = kmeans(x.view(), &ClusteringConfig::kmeans(2, 8)).unwrap();
        assert_eq!(a.labels, km.labels);
    }
}
