//! Cyclic Jacobi eigensolver for small dense symmetric matrices.

use super::matrix::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct JacobiConfig {
    pub max_sweeps: usize,
    /// Stop once the off-diagonal Frobenius norm falls below this fraction
    /// of the full Frobenius norm.
    pub off_diagonal_tol: f64,
}

impl Default for JacobiConfig {
    fn default() -> Self {
        JacobiConfig { max_sweeps: 100, off_diagonal_tol: 1e-12 }
    }
}

/// Eigenvalues in ascending order with matching unit eigenvectors stored as
/// the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

pub fn sym_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    sym_eigen(a, JacobiConfig::default()).map(|e| e.values)
}

pub fn sym_eigen(a: &Matrix, config: JacobiConfig) -> Result<SymmetricEigen> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
    }
    let n = a.rows();
    if n > 512 {
        return Err(Error::InvalidArgument(format!("matrix side {n} exceeds 512")));
    }
    let mut m = a.symmetrize();
    let mut v = Matrix::identity(n);
    let total = m.frobenius_norm();
    let threshold = config.off_diagonal_tol * total;

    let mut converged = off_diagonal_norm(&m) <= threshold;
    let mut sweep = 0;
    while !converged {
        if sweep == config.max_sweeps {
            return Err(Error::NoConvergence { sweeps: config.max_sweeps });
        }
        sweep += 1;
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
        converged = off_diagonal_norm(&m) <= threshold;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, new_col)] = v[(r, old_col)];
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

fn off_diagonal_norm(m: &Matrix) -> f64 {
    let n = m.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

// Annihilates m[p][q] with a plane rotation and accumulates it into v.
fn rotate(m: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = m[(p, q)];
    if apq == 0.0 {
        return;
    }
    let n = m.rows();
    let theta = 0.5 * (m[(q, q)] - m[(p, p)]) / apq;
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    m[(p, p)] -= t * apq;
    m[(q, q)] += t * apq;
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
        let new_kp = c * mkp - s * mkq;
        let new_kq = s * mkp + c * mkq;
        m[(k, p)] = new_kp;
        m[(p, k)] = new_kp;
        m[(k, q)] = new_kq;
        m[(q, k)] = new_kq;
    }
    for k in 0..n {
        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}
