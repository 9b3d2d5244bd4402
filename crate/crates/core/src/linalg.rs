//! Dense linear-algebra kernels shared by the synthesis and observer code.
//!
//! Matrices are `nalgebra::DMatrix<f64>` (column-major). LU factorization
//! and the SVD are implemented here: the LU so that the pivot threshold is
//! explicit, the SVD (one-sided Jacobi) because nalgebra's bidiagonal SVD can
//! lose accuracy when singular values nearly coincide. Cholesky, eigenvalues
//! and the matrix exponential come from nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Pivot magnitude below which a matrix is treated as singular.
pub const PIVOT_TOL: f64 = 1e-12;

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &Matrix, threshold: f64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::dim(format!(
                "LU needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for r in (k + 1)..n {
                let v = lu[(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best >= threshold) {
                return Err(Error::Singular {
                    pivot: best,
                    threshold,
                });
            }
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
            }
            let pivot = lu[(k, k)];
            for r in (k + 1)..n {
                let f = lu[(r, k)] / pivot;
                lu[(r, k)] = f;
                if f != 0.0 {
                    for c in (k + 1)..n {
                        let u = lu[(k, c)];
                        lu[(r, c)] -= f * u;
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Solves `A x = b`.
    #[allow(clippy::needless_range_loop)]
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "rhs length");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// Solves `Aᵀ x = b`.
    #[allow(clippy::needless_range_loop)]
    pub fn solve_transpose_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "rhs length");
        // Aᵀ = Uᵀ Lᵀ P, so solve Uᵀ y = b, Lᵀ w = y, then x = Pᵀ w.
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= self.lu[(j, i)] * y[j];
            }
            y[i] = s / self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in (i + 1)..n {
                s -= self.lu[(j, i)] * y[j];
            }
            y[i] = s;
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }

    pub fn solve(&self, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(b.nrows(), b.ncols());
        for c in 0..b.ncols() {
            let col: Vec<f64> = b.column(c).iter().copied().collect();
            let x = self.solve_vec(&col);
            out.column_mut(c).copy_from_slice(&x);
        }
        out
    }

    pub fn inverse(&self) -> Matrix {
        self.solve(&Matrix::identity(self.dim(), self.dim()))
    }
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Column-major vectorization.
pub fn vec_of(m: &Matrix) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &[f64], rows: usize, cols: usize) -> Matrix {
    assert_eq!(v.len(), rows * cols);
    Matrix::from_column_slice(rows, cols, v)
}

pub fn block_diag(blocks: &[Matrix]) -> Matrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::dim("ragged matrix rows"));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Singular value decomposition `m = U diag(σ) Vᵀ` with `σ` descending.
///
/// For an `r × c` matrix, `U` is `r × k` and `V` is `c × k` with `k = min(r, c)`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vector,
    pub v: Matrix,
}

/// One-sided Jacobi SVD (Hestenes): rotates column pairs until all columns
/// are mutually orthogonal to working precision.
pub fn svd(m: &Matrix) -> Svd {
    let (r, c) = m.shape();
    if r < c {
        let t = svd(&m.transpose());
        return Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        };
    }
    let mut w = m.clone();
    let mut v = Matrix::identity(c, c);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..c {
            for q in p + 1..c {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for (mat, rows) in [(&mut w, r), (&mut v, c)] {
                    for i in 0..rows {
                        let (a, b) = (mat[(i, p)], mat[(i, q)]);
                        mat[(i, p)] = cs * a - sn * b;
                        mat[(i, q)] = sn * a + cs * b;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..c).map(|k| w.column(k).norm()).collect();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let mut u = Matrix::zeros(r, c);
    let mut vs = Matrix::zeros(c, c);
    let mut sigma = Vector::zeros(c);
    for (j, &k) in order.iter().enumerate() {
        sigma[j] = norms[k];
        if norms[k] > 0.0 {
            u.set_column(j, &(w.column(k) / norms[k]));
        }
        vs.set_column(j, &v.column(k));
    }
    Svd { u, sigma, v: vs }
}

fn cutoff(sigma: &Vector, rel_tol: f64) -> f64 {
    rel_tol * sigma.iter().copied().fold(0.0, f64::max).max(1.0)
}

/// SVD-based nullspace basis (columns) of `m`.
pub fn nullspace(m: &Matrix, rel_tol: f64) -> Matrix {
    let (r, c) = m.shape();
    if c == 0 {
        return Matrix::zeros(0, 0);
    }
    // Pad to at least square so all right singular vectors are returned.
    let padded = if r < c {
        let mut p = Matrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let d = svd(&padded);
    let tol = cutoff(&d.sigma, rel_tol);
    let cols: Vec<usize> = (0..d.sigma.len()).filter(|&k| d.sigma[k] <= tol).collect();
    Matrix::from_fn(c, cols.len(), |i, j| d.v[(i, cols[j])])
}

/// Minimum-norm least-squares solution of `m x = b`.
pub fn lstsq_min_norm(m: &Matrix, b: &Vector, rel_tol: f64) -> Vector {
    if m.ncols() == 0 {
        return Vector::zeros(0);
    }
    if m.nrows() == 0 {
        return Vector::zeros(m.ncols());
    }
    let d = svd(m);
    let tol = cutoff(&d.sigma, rel_tol);
    let mut x = Vector::zeros(m.ncols());
    for k in 0..d.sigma.len() {
        if d.sigma[k] > tol {
            x += d.v.column(k) * (d.u.column(k).dot(b) / d.sigma[k]);
        }
    }
    x
}

pub fn rank(m: &Matrix, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let d = svd(m);
    let tol = cutoff(&d.sigma, rel_tol);
    d.sigma.iter().filter(|&&s| s > tol).count()
}

pub fn is_positive_definite(m: &Matrix) -> bool {
    m.clone().cholesky().is_some()
}

/// Monic characteristic polynomial `det(sI − A)` by Faddeev–LeVerrier,
/// coefficients in descending powers (`[1, c_{n−1}, …, c_0]`).
pub fn char_poly(a: &Matrix) -> Vec<f64> {
    assert!(a.is_square());
    let n = a.nrows();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[0] = 1.0;
    let id = Matrix::identity(n, n);
    let mut m = Matrix::zeros(n, n);
    for k in 1..=n {
        m = a * &m + &id * coeffs[k - 1];
        let am = a * &m;
        coeffs[k] = -am.trace() / k as f64;
    }
    coeffs
}

pub fn poly_eval(coeffs_desc: &[f64], z: Complex64) -> Complex64 {
    coeffs_desc
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Coefficients (descending) of the monic polynomial with the given roots.
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (k, &ck) in c.iter().enumerate() {
            next[k] += ck;
            next[k + 1] -= ck * r;
        }
        c = next;
    }
    c.into_iter().map(|z| z.re).collect()
}

/// `‖m‖₁ · ‖m⁻¹‖₁`, infinite when singular.
pub fn condition_1(m: &Matrix) -> f64 {
    match Lu::factor(m, PIVOT_TOL) {
        Ok(lu) => norm_1(m) * norm_1(&lu.inverse()),
        Err(_) => f64::INFINITY,
    }
}

pub fn norm_1(m: &Matrix) -> f64 {
    (0..m.ncols())
        .map(|c| m.column(c).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
