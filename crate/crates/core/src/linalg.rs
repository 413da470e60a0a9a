//! Dense complex square matrices and a cyclic Jacobi Hermitian eigensolver.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Relative tolerance used when a Hermitian flag is asserted.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Largest Hilbert-space dimension accepted anywhere in the crate.
pub const DIM_CAP: usize = 4096;

/// Dense `dim × dim` complex matrix stored row-major.
#[derive(Clone)]
pub struct Operator {
    dim: usize,
    data: Vec<C64>,
    hermitian: bool,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Operator(dim={}, hermitian={})", self.dim, self.hermitian)?;
        for r in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|c| {
                    let z = self[(r, c)];
                    format!("{:+.6}{:+.6}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "operator dimension must be positive");
        Operator { dim, data: vec![ZERO; dim * dim], hermitian: true }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = Self::zeros(dim);
        for i in 0..dim {
            op.data[i * dim + i] = ONE;
        }
        op
    }

    /// Builds from row-major entries. No Hermiticity claim is made.
    pub fn from_vec(dim: usize, data: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("operator dimension must be >= 1".into()));
        }
        if dim > DIM_CAP {
            return Err(Error::DimensionCap { dim, cap: DIM_CAP });
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: data.len() });
        }
        Ok(Operator { dim, data, hermitian: false })
    }

    /// Builds from row-major entries and asserts Hermiticity.
    pub fn hermitian(dim: usize, data: Vec<C64>) -> Result<Self> {
        let op = Self::from_vec(dim, data)?;
        op.into_hermitian("operator")
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(dim, data)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut op = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            op.data[i * op.dim + i] = C64::new(d, 0.0);
        }
        op
    }

    /// `|a⟩⟨b|`.
    pub fn outer(a: &[C64], b: &[C64]) -> Self {
        assert_eq!(a.len(), b.len());
        let dim = a.len();
        let mut data = Vec::with_capacity(dim * dim);
        for x in a {
            for y in b {
                data.push(x * y.conj());
            }
        }
        Operator { dim, data, hermitian: false }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_flagged_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    /// Validates and sets the Hermitian flag.
    pub fn into_hermitian(mut self, what: &'static str) -> Result<Self> {
        let dev = self.hermitian_deviation();
        if dev > HERMITIAN_TOL * self.max_abs().max(1.0) {
            return Err(Error::NotHermitian { what, deviation: dev });
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim;
        let mut dev: f64 = 0.0;
        for r in 0..n {
            for c in r..n {
                dev = dev.max((self.data[r * n + c] - self.data[c * n + r].conj()).norm());
            }
        }
        dev
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Replaces `A` by `(A + A†)/2` and sets the Hermitian flag.
    pub fn symmetrize(&mut self) {
        let n = self.dim;
        for r in 0..n {
            let d = self.data[r * n + r].re;
            self.data[r * n + r] = C64::new(d, 0.0);
            for c in (r + 1)..n {
                let avg = (self.data[r * n + c] + self.data[c * n + r].conj()) * 0.5;
                self.data[r * n + c] = avg;
                self.data[c * n + r] = avg.conj();
            }
        }
        self.hermitian = true;
    }

    pub fn dagger(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.data[c * n + r] = self.data[r * n + c].conj();
            }
        }
        out.hermitian = self.hermitian;
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).collect()
    }

    /// `tr(A B)` without forming the product.
    pub fn trace_product(&self, other: &Operator) -> C64 {
        let n = self.dim;
        let mut acc = ZERO;
        for r in 0..n {
            for k in 0..n {
                acc += self.data[r * n + k] * other.data[k * n + r];
            }
        }
        acc
    }

    /// Squared Hilbert–Schmidt norm `tr(A A†)`.
    pub fn hs_norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hs_norm(&self) -> f64 {
        self.hs_norm_sq().sqrt()
    }

    pub fn scale(&self, s: C64) -> Self {
        Operator {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
            hermitian: self.hermitian && s.im == 0.0,
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Operator {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
            hermitian: self.hermitian,
        }
    }

    pub fn matmul(&self, other: &Operator) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for r in 0..n {
            let row = &self.data[r * n..(r + 1) * n];
            let out_row = &mut out[r * n..(r + 1) * n];
            for (k, a) in row.iter().enumerate() {
                if *a == ZERO {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (o, b) in out_row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Operator { dim: n, data: out, hermitian: false }
    }

    /// `[A, B] = AB − BA`.
    pub fn commutator(&self, other: &Operator) -> Self {
        &self.matmul(other) - &other.matmul(self)
    }

    /// `{A, B} = AB + BA`.
    pub fn anticommutator(&self, other: &Operator) -> Self {
        &self.matmul(other) + &other.matmul(self)
    }

    /// Kronecker product `A ⊗ B`.
    pub fn kron(&self, other: &Operator) -> Self {
        let (n, m) = (self.dim, other.dim);
        let dim = n * m;
        let mut out = vec![ZERO; dim * dim];
        for r1 in 0..n {
            for c1 in 0..n {
                let a = self.data[r1 * n + c1];
                if a == ZERO {
                    continue;
                }
                for r2 in 0..m {
                    for c2 in 0..m {
                        out[(r1 * m + r2) * dim + c1 * m + c2] = a * other.data[r2 * m + c2];
                    }
                }
            }
        }
        Operator { dim, data: out, hermitian: self.hermitian && other.hermitian }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        let n = self.dim;
        (0..n)
            .map(|r| self.data[r * n..(r + 1) * n].iter().zip(v).map(|(a, x)| a * x).sum())
            .collect()
    }

    /// Column `c` as a vector.
    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.dim).map(|r| self.data[r * self.dim + c]).collect()
    }

    /// `U† A U`.
    pub fn conjugate_by(&self, u: &Operator) -> Self {
        u.dagger().matmul(&self.matmul(u))
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn map(&self, f: impl Fn(usize, usize, C64) -> C64) -> Self {
        let n = self.dim;
        let data = (0..n * n).map(|i| f(i / n, i % n, self.data[i])).collect();
        Operator { dim: n, data, hermitian: false }
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim;
        (0..n).all(|r| (0..n).all(|c| r == c || self.data[r * n + c].norm() <= tol))
    }
}

impl PartialEq for Operator {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.data == other.data
    }
}

impl std::ops::Index<(usize, usize)> for Operator {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.dim + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Operator {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        self.hermitian = false;
        &mut self.data[r * self.dim + c]
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "add dimension mismatch");
        Operator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
            hermitian: self.hermitian && rhs.hermitian,
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "sub dimension mismatch");
        Operator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
            hermitian: self.hermitian && rhs.hermitian,
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.matmul(rhs)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale_real(-1.0)
    }
}

pub fn pauli_x() -> Operator {
    let mut op = Operator::zeros(2);
    op.data[1] = ONE;
    op.data[2] = ONE;
    op
}

pub fn pauli_z() -> Operator {
    Operator::from_real_diagonal(&[1.0, -1.0])
}

/// Result of a Hermitian eigendecomposition: `A = V diag(values) V†`.
#[derive(Debug, Clone)]
pub struct Eigh {
    /// Ascending.
    pub values: Vec<f64>,
    /// Columns are the eigenvectors, in the same order as `values`.
    pub vectors: Operator,
    pub sweeps: usize,
}

const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;

fn off_diagonal_norm(a: &[C64], n: usize) -> f64 {
    let mut s = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                s += a[r * n + c].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi diagonalization of a Hermitian matrix.
///
/// Each rotation first removes the phase of `a[p][q]` with a diagonal
/// unitary and then applies the real symmetric Jacobi rotation, so the
/// combined transform is `J = diag(1, e^{-iφ}) · R(θ)` on the `(p, q)` plane.
/// Converges when the off-diagonal Frobenius norm drops below
/// `1e-13 · max(1, ||A||_F)`.
pub fn eigh(a: &Operator) -> Result<Eigh> {
    let dev = a.hermitian_deviation();
    if dev > 1e-10 * a.max_abs().max(1.0) {
        return Err(Error::NotHermitian { what: "eigensolver input", deviation: dev });
    }
    let n = a.dim;
    let mut m = a.clone();
    m.symmetrize();
    let mut w = m.data;
    let mut v = Operator::identity(n).data;
    let scale = a.hs_norm().max(1.0);
    let tol = JACOBI_TOL * scale;

    let mut sweeps = 0;
    let mut off = off_diagonal_norm(&w, n);
    while off > tol {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off_norm: off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[p * n + q];
                let r = apq.norm();
                if r <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = w[p * n + p].re;
                let aqq = w[q * n + q].re;
                // Element is below the rounding level of both diagonal entries.
                if sweeps > 4 && app.abs() + 100.0 * r == app.abs() && aqq.abs() + 100.0 * r == aqq.abs() {
                    w[p * n + q] = ZERO;
                    w[q * n + p] = ZERO;
                    continue;
                }
                let phase = apq / r; // e^{iφ}
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // J entries on the (p, q) plane.
                let jpp = C64::new(c, 0.0);
                let jpq = C64::new(s, 0.0);
                let jqp = -phase.conj() * s;
                let jqq = phase.conj() * c;

                // W ← W J (columns p, q)
                for k in 0..n {
                    let wkp = w[k * n + p];
                    let wkq = w[k * n + q];
                    w[k * n + p] = wkp * jpp + wkq * jqp;
                    w[k * n + q] = wkp * jpq + wkq * jqq;
                }
                // W ← J† W (rows p, q)
                for k in 0..n {
                    let wpk = w[p * n + k];
                    let wqk = w[q * n + k];
                    w[p * n + k] = jpp.conj() * wpk + jqp.conj() * wqk;
                    w[q * n + k] = jpq.conj() * wpk + jqq.conj() * wqk;
                }
                w[p * n + q] = ZERO;
                w[q * n + p] = ZERO;
                w[p * n + p] = C64::new(w[p * n + p].re, 0.0);
                w[q * n + q] = C64::new(w[q * n + q].re, 0.0);
                // V ← V J
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp * jpp + vkq * jqp;
                    v[k * n + q] = vkp * jpq + vkq * jqq;
                }
            }
        }
        off = off_diagonal_norm(&w, n);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[i * n + i].re.total_cmp(&w[j * n + j].re));
    let values = order.iter().map(|&i| w[i * n + i].re).collect();
    let mut vectors = Operator::zeros(n);
    for (new_c, &old_c) in order.iter().enumerate() {
        for r in 0..n {
            vectors.data[r * n + new_c] = v[r * n + old_c];
        }
    }
    vectors.hermitian = false;
    Ok(Eigh { values, vectors, sweeps })
}

impl Eigh {
    /// Reassembles `V diag(values) V†`.
    pub fn reconstruct(&self) -> Operator {
        let d = Operator::from_real_diagonal(&self.values);
        self.vectors.matmul(&d).matmul(&self.vectors.dagger())
    }
}
