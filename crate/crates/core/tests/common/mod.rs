//! Test-only oracles written independently of the library's linear algebra,
//! plus random instance builders.
#![allow(dead_code)]

use mscca_core::{CategoricalDataset, ClusterSpec, SupplementaryData};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues in descending order and matching eigenvectors as columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)]).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y][y].partial_cmp(&a[x][x]).unwrap());
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[r][order[c]]);
    (values, vectors)
}

/// Singular values of `a`, descending, from the eigenvalues of the smaller
/// Gram matrix.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let gram = if a.nrows() <= a.ncols() {
        a * a.transpose()
    } else {
        a.transpose() * a
    };
    jacobi_eigen(&gram)
        .0
        .into_iter()
        .map(|x| x.max(0.0).sqrt())
        .collect()
}

/// Modified Gram–Schmidt orthonormal basis of the column space.
pub fn orthonormal_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for c in 0..a.ncols() {
        let mut v: Vec<f64> = a.column(c).iter().copied().collect();
        for u in &cols {
            let d: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(u).for_each(|(x, y)| *x -= d * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm > 1e-12, "rank-deficient column set");
        v.iter_mut().for_each(|x| *x /= norm);
        cols.push(v);
    }
    DMatrix::from_fn(a.nrows(), cols.len(), |r, c| cols[c][r])
}

/// Sine of the largest principal angle between two column spaces of equal
/// dimension.
pub fn max_principal_sine(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = orthonormal_basis(a);
    let qb = orthonormal_basis(b);
    let residual = &qb - &qa * (qa.transpose() * &qb);
    singular_values(&residual).first().copied().unwrap_or(0.0)
}

/// ARI by enumerating every pair of elements.
pub fn brute_force_ari(x: &[usize], y: &[usize]) -> f64 {
    let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            match (x[i] == x[j], y[i] == y[j]) {
                (true, true) => a += 1.0,
                (true, false) => b += 1.0,
                (false, true) => c += 1.0,
                (false, false) => d += 1.0,
            }
        }
    }
    let den = (a + b) * (b + d) + (a + c) * (c + d);
    if den == 0.0 {
        1.0
    } else {
        2.0 * (a * d - b * c) / den
    }
}

/// All partitions of `n` elements into at most `max_blocks` blocks, as
/// restricted growth strings.
pub fn set_partitions(n: usize, max_blocks: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; n];
    fn rec(
        i: usize,
        used: usize,
        cur: &mut Vec<usize>,
        max_blocks: usize,
        out: &mut Vec<Vec<usize>>,
    ) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for b in 0..(used + 1).min(max_blocks) {
            cur[i] = b;
            rec(i + 1, used.max(b + 1), cur, max_blocks, out);
        }
    }
    if n > 0 {
        rec(0, 0, &mut cur, max_blocks, &mut out);
    }
    out
}

/// Standardized residuals of a nonnegative table, computed entrywise.
pub fn residual_oracle(counts: &DMatrix<f64>) -> DMatrix<f64> {
    let total: f64 = counts.iter().sum();
    let p = counts / total;
    let r: Vec<f64> = (0..p.nrows()).map(|i| p.row(i).iter().sum()).collect();
    let c: Vec<f64> = (0..p.ncols()).map(|j| p.column(j).iter().sum()).collect();
    DMatrix::from_fn(p.nrows(), p.ncols(), |i, j| {
        (p[(i, j)] - r[i] * c[j]) / (r[i] * c[j]).sqrt()
    })
}

/// A random categorical problem.
pub struct Instance {
    pub data: CategoricalDataset,
    pub sup: SupplementaryData,
    pub spec: ClusterSpec,
}

/// Uniform random codes; every class gets between 1 and `k_max` clusters.
pub fn random_instance(
    seed: u64,
    n: usize,
    m: usize,
    q: usize,
    classes: &[usize],
    k_range: (usize, usize),
) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns: Vec<Vec<usize>> = (0..m)
        .map(|_| (0..n).map(|_| rng.random_range(0..q)).collect())
        .collect();
    let labels = (0..m)
        .map(|_| (0..q).map(|c| format!("c{c}")).collect())
        .collect();
    let names = (0..m).map(|j| format!("V{j}")).collect();
    let data = CategoricalDataset::from_codes(names, columns, labels).unwrap();
    let sup_cols: Vec<Vec<usize>> = classes
        .iter()
        .map(|&r| {
            (0..n)
                .map(|i| if i < r { i } else { rng.random_range(0..r) })
                .collect()
        })
        .collect();
    let sup_labels = classes
        .iter()
        .map(|&r| (0..r).map(|s| format!("s{s}")).collect())
        .collect();
    let sup_names = (0..classes.len()).map(|h| format!("S{h}")).collect();
    let sup = SupplementaryData::from_codes(sup_names, sup_cols, sup_labels).unwrap();
    let counts = classes
        .iter()
        .map(|&r| {
            (0..r)
                .map(|_| rng.random_range(k_range.0..=k_range.1))
                .collect()
        })
        .collect();
    Instance {
        data,
        sup,
        spec: ClusterSpec::new(counts),
    }
}
