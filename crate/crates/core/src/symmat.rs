//! Dense symmetric matrices and the cyclic Jacobi eigensolver.
//!
//! Storage is a full row-major `n x n` buffer. Every mutator writes both
//! `(i, j)` and `(j, i)`, so the mirrored entries are bit-identical.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Relative off-diagonal Frobenius mass at which Jacobi stops.
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Clone, PartialEq)]
pub struct SymMat {
    n: usize,
    data: Vec<f64>,
}

impl fmt::Debug for SymMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SymMat({})[", self.n)?;
        for i in 0..self.n {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "SymMat dimension must be at least 1");
        SymMat {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from `f(i, j)` evaluated on the upper triangle (`i <= j`).
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Row-major input; rejects anything that is not exactly symmetric.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("matrix dimension must be at least 1"));
        }
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if data[i * n + j] != data[j * n + i] {
                    return Err(Error::invalid(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(SymMat { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(n, data)
    }

    /// `(M + Mᵗ) / 2` of an arbitrary square row-major matrix.
    pub fn symmetrized(n: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), n * n);
        Self::from_fn(n, |i, j| 0.5 * (data[i * n + j] + data[j * n + i]))
    }

    /// `Σ wᵢ vᵢvᵢᵗ`.
    pub fn weighted_outer_sum<'a>(n: usize, terms: impl IntoIterator<Item = (f64, &'a [f64])>) -> Self {
        let mut m = Self::zeros(n);
        for (w, v) in terms {
            m.add_outer(w, v);
        }
        m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs_diag(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).abs()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, &x| a.max(x.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Trace inner product `tr(AᵗB)`.
    pub fn dot(&self, other: &SymMat) -> f64 {
        assert_eq!(self.n, other.n, "dimension mismatch in SymMat::dot");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn quad_form(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.n);
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let s: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
            acc += v[i] * s;
        }
        acc
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `self += w · v vᵗ`
    pub fn add_outer(&mut self, w: f64, v: &[f64]) {
        assert_eq!(v.len(), self.n);
        for i in 0..self.n {
            for j in i..self.n {
                let x = self.get(i, j) + w * v[i] * v[j];
                self.set(i, j, x);
            }
        }
    }

    /// `self += a · other`
    pub fn axpy(&mut self, a: f64, other: &SymMat) {
        assert_eq!(self.n, other.n);
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn scaled(&self, a: f64) -> SymMat {
        SymMat {
            n: self.n,
            data: self.data.iter().map(|x| a * x).collect(),
        }
    }

    /// Orthogonal projection onto the zero-diagonal subspace.
    pub fn with_zero_diagonal(mut self) -> SymMat {
        for i in 0..self.n {
            self.data[i * self.n + i] = 0.0;
        }
        self
    }

    pub fn add_diag(&self, d: &[f64]) -> SymMat {
        assert_eq!(d.len(), self.n);
        let mut m = self.clone();
        for (i, &x) in d.iter().enumerate() {
            m.data[i * self.n + i] += x;
        }
        m
    }

    /// Full eigendecomposition via cyclic Jacobi rotations, eigenvalues ascending.
    pub fn eig_sym(&self) -> Result<EigDecomp> {
        if !self.is_finite() {
            return Err(Error::NonFinite("symmetric matrix"));
        }
        jacobi(self)
    }

    pub fn lambda_min(&self) -> Result<f64> {
        Ok(self.eig_sym()?.eigenvalues[0])
    }

    /// Membership in the solver's feasible set: zero diagonal and `λ_min ≥ −1`.
    pub fn is_feasible(&self, tol: f64) -> Result<bool> {
        if self.max_abs_diag() > tol {
            return Ok(false);
        }
        Ok(self.lambda_min()? >= -1.0 - tol)
    }
}

impl Add for &SymMat {
    type Output = SymMat;
    fn add(self, rhs: &SymMat) -> SymMat {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &SymMat {
    type Output = SymMat;
    fn sub(self, rhs: &SymMat) -> SymMat {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &SymMat {
    type Output = SymMat;
    fn mul(self, rhs: f64) -> SymMat {
        self.scaled(rhs)
    }
}

#[derive(Debug, Clone)]
pub struct EigDecomp {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[i]` is the unit eigenvector paired with `eigenvalues[i]`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl EigDecomp {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn reconstruct(&self) -> SymMat {
        SymMat::weighted_outer_sum(
            self.n(),
            self.eigenvalues
                .iter()
                .zip(&self.eigenvectors)
                .map(|(&g, v)| (g, v.as_slice())),
        )
    }
}

fn jacobi(m: &SymMat) -> Result<EigDecomp> {
    let n = m.n;
    let mut a = m.data.clone();
    // Row `c` of `vt` is eigenvector column `c`.
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }
    let scale = m.frobenius_norm();
    let threshold = JACOBI_TOL * scale;

    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..i {
                s += 2.0 * a[i * n + j] * a[i * n + j];
            }
        }
        s.sqrt()
    };

    let mut converged = scale == 0.0 || off(&a) <= threshold;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::EigenNoConvergence { sweeps });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // A <- Jᵗ A J on rows p and q, mirrored into the columns.
                let (head, tail) = a.split_at_mut(q * n);
                let row_p = &mut head[p * n..(p + 1) * n];
                let row_q = &mut tail[..n];
                for (x, y) in row_p.iter_mut().zip(row_q.iter_mut()) {
                    let (xp, xq) = (*x, *y);
                    *x = c * xp - s * xq;
                    *y = s * xp + c * xq;
                }
                row_p[p] = app - t * apq;
                row_q[q] = aqq + t * apq;
                row_p[q] = 0.0;
                row_q[p] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        a[k * n + p] = a[p * n + k];
                        a[k * n + q] = a[q * n + k];
                    }
                }

                let (head, tail) = vt.split_at_mut(q * n);
                for (x, y) in head[p * n..(p + 1) * n].iter_mut().zip(tail[..n].iter_mut()) {
                    let (vp, vq) = (*x, *y);
                    *x = c * vp - s * vq;
                    *y = s * vp + c * vq;
                }
            }
        }
        sweeps += 1;
        converged = off(&a) <= threshold;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let eigenvalues = order.iter().map(|&i| a[i * n + i]).collect();
    let eigenvectors = order.iter().map(|&c| vt[c * n..(c + 1) * n].to_vec()).collect();
    Ok(EigDecomp {
        eigenvalues,
        eigenvectors,
    })
}
