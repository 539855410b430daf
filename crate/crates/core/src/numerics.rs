//! Matrix primitives used by the solver: centering, a deterministic
//! symmetric eigendecomposition, and diagonal mass scaling.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Numerical tolerances shared across the crate.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Largest |S - S'| accepted as symmetric, relative to max(1, max|S|).
    pub symmetry: f64,
    /// Relative eigenvalue gap below which two eigenvalues count as tied.
    pub eigen_tie: f64,
    /// Two entries this close in magnitude tie for the sign pivot.
    pub pivot_tie: f64,
    /// Column means accepted as zero after centering.
    pub centering: f64,
    /// Deviation accepted for the quantification normalization.
    pub normalization: f64,
}

pub const TOL: Tolerances = Tolerances {
    symmetry: 1e-10,
    eigen_tie: 1e-10,
    pivot_tie: 1e-12,
    centering: 1e-12,
    normalization: 1e-8,
};

/// Top eigenpairs of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEigResult {
    /// Descending.
    pub values: DVector<f64>,
    /// Orthonormal columns aligned with `values`; the largest-magnitude entry
    /// of each column is positive.
    pub vectors: DMatrix<f64>,
}

/// J·M: subtracts every column mean.
pub fn center_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    if m.nrows() == 0 {
        return out;
    }
    let n = m.nrows() as f64;
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    out
}

fn pivot_index(v: &[f64]) -> usize {
    let max = v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    v.iter()
        .position(|x| x.abs() >= max - TOL.pivot_tie)
        .unwrap_or(0)
}

/// The `p` largest eigenpairs of symmetric `s`, with a deterministic sign
/// and tie order.
pub fn sym_eig_top(s: &DMatrix<f64>, p: usize) -> Result<SymEigResult> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::Shape(format!(
            "{}x{} matrix is not square",
            n,
            s.ncols()
        )));
    }
    if p == 0 || p > n {
        return Err(Error::Spec(format!(
            "requested {p} eigenpairs of a {n}x{n} matrix"
        )));
    }
    let scale = s.amax().max(1.0);
    let asym = (s - s.transpose()).amax();
    if asym > TOL.symmetry * scale {
        return Err(Error::Symmetry(asym));
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);

    let mut vectors: Vec<Vec<f64>> = (0..n)
        .map(|c| {
            let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
            let piv = pivot_index(&v);
            if v[piv] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    let values = eig.eigenvalues;
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    // Runs of tied eigenvalues are ordered by pivot index.
    let tie = TOL.eigen_tie * values.amax().max(1.0);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (values[order[end - 1]] - values[order[end]]).abs() < tie {
            end += 1;
        }
        order[start..end].sort_by_key(|&c| (pivot_index(&vectors[c]), c));
        start = end;
    }

    let out_values = DVector::from_iterator(p, order.iter().take(p).map(|&c| values[c]));
    let mut out_vectors = DMatrix::zeros(n, p);
    for (d, &c) in order.iter().take(p).enumerate() {
        let v = std::mem::take(&mut vectors[c]);
        out_vectors.set_column(d, &DVector::from_vec(v));
    }
    Ok(SymEigResult {
        values: out_values,
        vectors: out_vectors,
    })
}

/// Power applied to a diagonal mass matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassPower {
    InvSqrt,
    Sqrt,
    Inv,
}

impl MassPower {
    fn apply(self, m: f64) -> f64 {
        match self {
            MassPower::InvSqrt => 1.0 / m.sqrt(),
            MassPower::Sqrt => m.sqrt(),
            MassPower::Inv => 1.0 / m,
        }
    }
}

/// Which side the diagonal multiplies from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// diag(masses)^power · M
    Rows,
    /// M · diag(masses)^power
    Cols,
}

/// Scales rows or columns of `m` by a power of strictly positive masses.
pub fn mass_scale(
    m: &DMatrix<f64>,
    masses: &[f64],
    power: MassPower,
    side: Side,
) -> Result<DMatrix<f64>> {
    let expected = match side {
        Side::Rows => m.nrows(),
        Side::Cols => m.ncols(),
    };
    if masses.len() != expected {
        return Err(Error::Shape(format!(
            "{} masses for {expected} {}",
            masses.len(),
            if side == Side::Rows {
                "rows"
            } else {
                "columns"
            }
        )));
    }
    if let Some((idx, bad)) = masses.iter().enumerate().find(|(_, x)| !(**x > 0.0)) {
        return Err(Error::Mass(format!("mass {idx} is {bad}")));
    }
    let factors: Vec<f64> = masses.iter().map(|&x| power.apply(x)).collect();
    let mut out = m.clone();
    match side {
        Side::Rows => {
            for (r, f) in factors.iter().enumerate() {
                out.row_mut(r).scale_mut(*f);
            }
        }
        Side::Cols => {
            for (c, f) in factors.iter().enumerate() {
                out.column_mut(c).scale_mut(*f);
            }
        }
    }
    Ok(out)
}
