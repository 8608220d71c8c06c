use super::matrix::Matrix;
use crate::{Error, Result};

/// Diagonal jitter tried, in order, when a symmetric matrix fails to factor.
/// Each value is scaled by the largest diagonal magnitude of the input.
pub const JITTER_LADDER: [f64; 3] = [1e-12, 1e-10, 1e-8];

const MAX_SIDE: usize = 512;

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A + jitter·I`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Matrix,
    jitter: f64,
}

/// Factors a symmetric matrix, falling back on the jitter ladder for
/// positive semi-definite but singular input.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    Cholesky::factor(a).map(Cholesky::into_lower)
}

impl Cholesky {
    /// Factor with the jitter ladder.
    pub fn factor(a: &Matrix) -> Result<Self> {
        check_symmetric(a)?;
        if let Some(lower) = factor_in_place(a, 0.0) {
            return Ok(Cholesky { lower, jitter: 0.0 });
        }
        let scale = a.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        for eps in JITTER_LADDER {
            let jitter = eps * scale;
            if let Some(lower) = factor_in_place(a, jitter) {
                return Ok(Cholesky { lower, jitter });
            }
        }
        Err(Error::NotPositiveDefinite)
    }

    /// Factor without any jitter; fails on singular input.
    pub fn factor_exact(a: &Matrix) -> Result<Self> {
        check_symmetric(a)?;
        factor_in_place(a, 0.0).map(|lower| Cholesky { lower, jitter: 0.0 }).ok_or(Error::NotPositiveDefinite)
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn into_lower(self) -> Matrix {
        self.lower
    }

    /// Diagonal jitter that was added before the successful factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    /// `log det(A)` from the factor's diagonal.
    pub fn log_det(&self) -> f64 {
        2.0 * self.lower.diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// Solves `L y = b` in place.
    pub fn forward_substitute(&self, b: &mut [f64]) {
        let n = self.dim();
        let l = &self.lower;
        for i in 0..n {
            let row = l.row(i);
            let mut s = b[i];
            for k in 0..i {
                s -= row[k] * b[k];
            }
            b[i] = s / row[i];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn backward_substitute(&self, y: &mut [f64]) {
        let n = self.dim();
        let l = &self.lower;
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[(k, i)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: b.len() });
        }
        let mut x = b.to_vec();
        self.forward_substitute(&mut x);
        self.backward_substitute(&mut x);
        Ok(x)
    }

    /// Solves `A X = B` column by column.
    pub fn solve_mat(&self, b: &Matrix) -> Result<Matrix> {
        if b.rows() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: b.rows() });
        }
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let x = self.solve_vec(&b.column(j))?;
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }

    /// `A⁻¹`, symmetrized.
    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            self.forward_substitute(&mut e);
            self.backward_substitute(&mut e);
            for i in 0..n {
                inv[(i, j)] = e[i];
            }
        }
        inv.symmetrize()
    }
}

fn check_symmetric(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
    }
    if a.rows() > MAX_SIDE {
        return Err(Error::InvalidArgument(format!("matrix side {} exceeds {MAX_SIDE}", a.rows())));
    }
    let tol = 1e-8 * a.max_abs().max(f64::MIN_POSITIVE);
    if !a.is_symmetric(tol) {
        return Err(Error::InvalidArgument("matrix is not symmetric".into()));
    }
    Ok(())
}

// Reads only the lower triangle.
fn factor_in_place(a: &Matrix, jitter: f64) -> Option<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)] + jitter;
        {
            let lj = l.row(j);
            d -= lj[..j].iter().map(|v| v * v).sum::<f64>();
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            {
                let (li, lj) = (l.row(i), l.row(j));
                s -= li[..j].iter().zip(&lj[..j]).map(|(x, y)| x * y).sum::<f64>();
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}
