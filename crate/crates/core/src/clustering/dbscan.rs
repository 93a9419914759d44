use std::collections::VecDeque;

use ndarray::ArrayView2;
use rayon::prelude::*;

use super::{Assignment, ClusteringConfig};
use crate::linalg::{sq_dist_slice, UniqueRows};

/// DBSCAN with an inclusive radius (`d <= eps`) where a point counts as its
/// own neighbour. Clusters are numbered in the order their first core point
/// is met when scanning rows; border points join the first cluster reaching them.
pub fn dbscan(x: ArrayView2<f64>, cfg: &ClusteringConfig) -> Assignment {
    let eps = cfg.eps.expect("dbscan needs eps");
    let min_samples = cfg.min_samples.expect("dbscan needs min_samples");
    let eps2 = eps * eps;
    // Duplicate rows share neighbourhoods, so work on unique rows weighted by
    // multiplicity and copy the labels back.
    let u = UniqueRows::of(x);
    let m = u.len();
    let neighbours = |p: usize| -> Vec<usize> {
        let xp = u.row(p);
        (0..m).filter(|&q| sq_dist_slice(xp, u.row(q)) <= eps2).collect()
    };

    let core: Vec<bool> = (0..m)
        .into_par_iter()
        .map(|p| {
            let xp = u.row(p);
            let weight: usize = (0..m).filter(|&q| sq_dist_slice(xp, u.row(q)) <= eps2).map(|q| u.counts[q]).sum();
            weight >= min_samples
        })
        .collect();

    let mut unique_labels = vec![-1i32; m];
    let mut cluster = 0i32;
    for start in 0..m {
        if unique_labels[start] >= 0 || !core[start] {
            continue;
        }
        unique_labels[start] = cluster;
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            // Only core points propagate.
            for q in neighbours(p) {
                if unique_labels[q] < 0 {
                    unique_labels[q] = cluster;
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
        cluster += 1;
    }
    let labels = u.inverse.iter().map(|&p| unique_labels[p]).collect();
    Assignment {
        labels,
        centroids: None,
        inertia: None,
        metadata: [("eps".to_string(), eps), ("min_samples".to_string(), min_samples as f64)]
            .into_iter()
            .collect(),
        fuzzy: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_chains() {
        let x = array![[0.0], [1.0], [2.0], [10.0], [11.0], [12.0]];
        let a = dbscan(x.view(), &ClusteringConfig::dbscan(1.5, 2));
        assert_eq!(a.labels, vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn isolated_point_is_noise() {
        let x = array![[0.0], [1.0], [2.0], [10.0], [11.0], [12.0], [100.0]];
        let a = dbscan(x.view(), &ClusteringConfig::dbscan(1.5, 2));
        assert_eq!(a.labels[6], -1);
        assert_eq!(a.n_clusters(), 2);
    }

    #[test]
    fn huge_radius_single_cluster() {
        let x = array![[0.0], [5.0], [50.0]];
        let a = dbscan(x.view(), &ClusteringConfig::dbscan(1000.0, 1));
        assert_eq!(a.labels, vec![0, 0, 0]);
    }

    #[test]
    fn duplicates_count_towards_core() {
        let x = array![[0.0], [0.0], [0.0], [9.0]];
        let a = dbscan(x.view(), &ClusteringConfig::dbscan(0.5, 3));
        assert_eq!(a.labels, vec![0, 0, 0, -1]);
    }

    #[test]
    fn radius_is_inclusive() {
        let x = array![[0.0], [1.0]];
        let a = dbscan(x.view(), &ClusteringConfig::dbscan(1.0, 2));
        assert_eq!(a.labels, vec![0, 0]);
    }
}
