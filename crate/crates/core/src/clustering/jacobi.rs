use ndarray::{Array1, Array2, ArrayView2};

use super::{ClusterError, Result};

/// Eigen-decomposition of a symmetric matrix: ascending eigenvalues and the
/// matching unit eigenvectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
    pub sweeps: usize,
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
/// `1e-10` (or `1e-15·‖A‖_F` for large matrices).
pub fn jacobi_eigh(a: ArrayView2<f64>) -> Result<Eigen> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(ClusterError::DegenerateInput("matrix must be square".into()));
    }
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    if asym > 1e-9 {
        return Err(ClusterError::NotSymmetric(asym));
    }

    // Row-major working copies; `m` is kept exactly symmetric.
    let mut m: Vec<f64> = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = 0.5 * (a[[i, j]] + a[[j, i]]);
        }
    }
    // v stored transposed: row r is eigenvector r.
    let mut v: Vec<f64> = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = 1e-10_f64.max(1e-15 * frob);
    let off = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[i * n + j] * m[i * n + j];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS && off(&m) >= target {
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    let new_kp = c * mkp - s * mkq;
                    let new_kq = s * mkp + c * mkq;
                    m[k * n + p] = new_kp;
                    m[p * n + k] = new_kp;
                    m[k * n + q] = new_kq;
                    m[q * n + k] = new_kq;
                }
                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                let (vp, vq) = if p < q {
                    let (lo, hi) = v.split_at_mut(q * n);
                    (&mut lo[p * n..p * n + n], &mut hi[..n])
                } else {
                    unreachable!()
                };
                for k in 0..n {
                    let a = vp[k];
                    let b = vq[k];
                    vp[k] = c * a - s * b;
                    vq[k] = s * a + c * b;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]).then(i.cmp(&j)));
    let values = Array1::from_iter(order.iter().map(|&i| m[i * n + i]));
    let mut vectors = Array2::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        for k in 0..n {
            vectors[[k, col]] = v[i * n + k];
        }
    }
    Ok(Eigen { values, vectors, sweeps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn residual(a: &Array2<f64>, e: &Eigen) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..a.nrows() {
            let v = e.vectors.column(k);
            let av = a.dot(&v);
            for i in 0..a.nrows() {
                worst = worst.max((av[i] - e.values[k] * v[i]).abs());
            }
        }
        worst
    }

    #[test]
    fn two_by_two() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let e = jacobi_eigh(a.view()).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-12);
        assert!((e.values[1] - 3.0).abs() < 1e-12);
        assert!(residual(&a, &e) < 1e-8);
    }

    #[test]
    fn identity_and_diagonal() {
        let e = jacobi_eigh(Array2::<f64>::eye(4).view()).unwrap();
        assert!(e.values.iter().all(|&v| v == 1.0));
        let e = jacobi_eigh(array![[5.0, 0.0], [0.0, -2.0]].view()).unwrap();
        assert_eq!(e.values.to_vec(), vec![-2.0, 5.0]);
        assert_eq!(e.vectors.column(0).to_vec(), vec![0.0, 1.0]);
    }

    #[test]
    fn asymmetric_rejected() {
        assert!(matches!(
            jacobi_eigh(array![[1.0, 2.0], [0.0, 1.0]].view()),
            Err(ClusterError::NotSymmetric(_))
        ));
    }

    #[test]
    fn random_symmetric_residuals() {
        let n = 12;
        let a = Array2::from_shape_fn((n, n), |(i, j)| {
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            (((lo * 31 + hi * 17) % 23) as f64 - 11.0) / 3.0
        });
        let e = jacobi_eigh(a.view()).unwrap();
        assert!(residual(&a, &e) < 1e-8);
        for w in e.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
        let vtv = e.vectors.t().dot(&e.vectors);
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((vtv[[i, j]] - expect).abs() < 1e-10);
            }
        }
    }
}
