//! Fixed-size kernels for 3-vectors and 3x3 matrices.
//!
//! Everything here is `Copy` and allocation free. The symmetric routines
//! ([`cholesky`], [`eig_sym`], [`sym_sqrt`], [`sym_inv_sqrt`]) are the building
//! blocks of the affine color-map solvers.

use std::ops::{Add, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance below which a negative eigenvalue is treated as rounding noise.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Jacobi stops once the off-diagonal Frobenius norm drops below this times `|m|_F`.
pub const JACOBI_TOLERANCE: f64 = 1e-14;

pub const JACOBI_MAX_SWEEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn scale(self, s: f64) -> Self {
        Vec3(self.0.map(|v| v * s))
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3(std::array::from_fn(|i| self.0[i] + rhs.0[i]))
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3(std::array::from_fn(|i| self.0[i] - rhs.0[i]))
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3(self.0.map(|v| -v))
    }
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);

    pub fn diag(d: [f64; 3]) -> Self {
        let mut m = Self::ZERO;
        for i in 0..3 {
            m.0[i][i] = d[i];
        }
        m
    }

    pub fn from_columns(cols: [Vec3; 3]) -> Self {
        Mat3(std::array::from_fn(|r| {
            std::array::from_fn(|c| cols[c].0[r])
        }))
    }

    pub fn column(&self, c: usize) -> Vec3 {
        Vec3([self.0[0][c], self.0[1][c], self.0[2][c]])
    }

    pub fn transpose(&self) -> Self {
        Mat3(std::array::from_fn(|r| {
            std::array::from_fn(|c| self.0[c][r])
        }))
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3(std::array::from_fn(|r| {
            self.0[r][0] * v.0[0] + self.0[r][1] * v.0[1] + self.0[r][2] * v.0[2]
        }))
    }

    pub fn scale(&self, s: f64) -> Self {
        Mat3(self.0.map(|row| row.map(|v| v * s)))
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse via the adjugate.
    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Singular(format!("determinant {det:e}")));
        }
        let m = &self.0;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| {
            m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
        };
        let adj = Mat3([
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ]);
        Ok(adj.scale(1.0 / det))
    }

    /// `(self + self^T) / 2`.
    pub fn symmetric_part(&self) -> SymMat3 {
        let m = &self.0;
        SymMat3::new(
            m[0][0],
            0.5 * (m[0][1] + m[1][0]),
            0.5 * (m[0][2] + m[2][0]),
            m[1][1],
            0.5 * (m[1][2] + m[2][1]),
            m[2][2],
        )
    }
}

impl Index<(usize, usize)> for Mat3 {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.0[r][c]
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, rhs: Mat3) -> Mat3 {
        Mat3(std::array::from_fn(|r| {
            std::array::from_fn(|c| {
                self.0[r][0] * rhs.0[0][c] + self.0[r][1] * rhs.0[1][c] + self.0[r][2] * rhs.0[2][c]
            })
        }))
    }
}

impl Mul<Vec3> for Mat3 {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.mul_vec(rhs)
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, rhs: Mat3) -> Mat3 {
        Mat3(std::array::from_fn(|r| {
            std::array::from_fn(|c| self.0[r][c] + rhs.0[r][c])
        }))
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, rhs: Mat3) -> Mat3 {
        Mat3(std::array::from_fn(|r| {
            std::array::from_fn(|c| self.0[r][c] - rhs.0[r][c])
        }))
    }
}

/// Symmetric 3x3 matrix stored as its upper triangle:
/// `[m00, m01, m02, m11, m12, m22]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(into = "Mat3", try_from = "Mat3")]
pub struct SymMat3([f64; 6]);

impl SymMat3 {
    pub const ZERO: SymMat3 = SymMat3([0.0; 6]);
    pub const IDENTITY: SymMat3 = SymMat3([1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);

    pub fn new(m00: f64, m01: f64, m02: f64, m11: f64, m12: f64, m22: f64) -> Self {
        SymMat3([m00, m01, m02, m11, m12, m22])
    }

    pub fn diag(d: [f64; 3]) -> Self {
        SymMat3([d[0], 0.0, 0.0, d[1], 0.0, d[2]])
    }

    pub fn upper(&self) -> [f64; 6] {
        self.0
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (r, c) = if r <= c { (r, c) } else { (c, r) };
        match (r, c) {
            (0, 0) => self.0[0],
            (0, 1) => self.0[1],
            (0, 2) => self.0[2],
            (1, 1) => self.0[3],
            (1, 2) => self.0[4],
            (2, 2) => self.0[5],
            _ => panic!("index ({r}, {c}) out of range for 3x3 matrix"),
        }
    }

    pub fn to_mat3(&self) -> Mat3 {
        Mat3(std::array::from_fn(|r| {
            std::array::from_fn(|c| self.get(r, c))
        }))
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[3] + self.0[5]
    }

    pub fn frobenius(&self) -> f64 {
        self.to_mat3().frobenius()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn add_identity(&self, eps: f64) -> Self {
        let mut m = *self;
        m.0[0] += eps;
        m.0[3] += eps;
        m.0[5] += eps;
        m
    }

    pub fn scale(&self, s: f64) -> Self {
        SymMat3(self.0.map(|v| v * s))
    }

    /// `P^T M P` for any 3x3 `P`, symmetrized.
    pub fn congruence(&self, p: &Mat3) -> Self {
        (p.transpose() * self.to_mat3() * *p).symmetric_part()
    }

    /// `U diag(d) U^T`.
    pub fn from_eigen(u: &Mat3, d: [f64; 3]) -> Self {
        let mut out = [0.0; 6];
        let mut k = 0;
        for r in 0..3 {
            for c in r..3 {
                out[k] = (0..3).map(|j| u.0[r][j] * d[j] * u.0[c][j]).sum();
                k += 1;
            }
        }
        SymMat3(out)
    }
}

impl From<SymMat3> for Mat3 {
    fn from(m: SymMat3) -> Mat3 {
        m.to_mat3()
    }
}

impl TryFrom<Mat3> for SymMat3 {
    type Error = String;
    fn try_from(m: Mat3) -> std::result::Result<Self, String> {
        let asym = (m - m.transpose()).frobenius();
        if asym > 1e-12 * m.frobenius().max(1.0) {
            return Err(format!("matrix is not symmetric (asymmetry {asym:e})"));
        }
        Ok(m.symmetric_part())
    }
}

/// Lower-triangular `L` with `L L^T = m + eps I`.
pub fn cholesky(m: &SymMat3, eps: f64) -> Result<Mat3> {
    let a = m.add_identity(eps).to_mat3();
    let mut l = Mat3::ZERO;
    for j in 0..3 {
        let mut pivot = a.0[j][j];
        for k in 0..j {
            pivot -= l.0[j][k] * l.0[j][k];
        }
        if !(pivot > 0.0) {
            return Err(Error::NotPositiveDefinite { row: j, pivot });
        }
        let d = pivot.sqrt();
        l.0[j][j] = d;
        for i in (j + 1)..3 {
            let mut s = a.0[i][j];
            for k in 0..j {
                s -= l.0[i][k] * l.0[j][k];
            }
            l.0[i][j] = s / d;
        }
    }
    Ok(l)
}

/// Inverse of a lower-triangular matrix by forward substitution.
pub fn lower_triangular_inverse(l: &Mat3) -> Result<Mat3> {
    let mut inv = Mat3::ZERO;
    for i in 0..3 {
        if l.0[i][i] == 0.0 {
            return Err(Error::Singular(format!("zero diagonal at row {i}")));
        }
    }
    for c in 0..3 {
        for r in c..3 {
            let mut s = if r == c { 1.0 } else { 0.0 };
            for k in c..r {
                s -= l.0[r][k] * inv.0[k][c];
            }
            inv.0[r][c] = s / l.0[r][r];
        }
    }
    Ok(inv)
}

/// Result of [`eig_sym`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymEigen {
    /// Descending.
    pub values: Vec3,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: Mat3,
    pub sweeps: usize,
    pub converged: bool,
}

impl SymEigen {
    pub fn reconstruct(&self) -> SymMat3 {
        SymMat3::from_eigen(&self.vectors, self.values.0)
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Eigenvalues come back in descending order; each eigenvector is signed so
/// its first nonzero component is positive.
pub fn eig_sym(m: &SymMat3) -> SymEigen {
    let mut a = m.to_mat3();
    let mut v = Mat3::IDENTITY;
    let threshold = JACOBI_TOLERANCE * a.frobenius();
    let off_norm = |a: &Mat3| {
        (2.0 * (a.0[0][1] * a.0[0][1] + a.0[0][2] * a.0[0][2] + a.0[1][2] * a.0[1][2])).sqrt()
    };

    let mut sweeps = 0;
    let mut converged = off_norm(&a) <= threshold;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        sweeps += 1;
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = a.0[p][q];
            if apq == 0.0 {
                continue;
            }
            let theta = (a.0[q][q] - a.0[p][p]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            // theta overflow means apq is negligible relative to the diagonal gap
            let t = if theta.is_finite() { t } else { 0.0 };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            rotate(&mut a, &mut v, p, q, c, s, t);
        }
        converged = off_norm(&a) <= threshold;
    }

    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a.0[j][j].total_cmp(&a.0[i][i]));
    let values = Vec3(order.map(|i| a.0[i][i]));
    let cols = order.map(|i| {
        let col = v.column(i);
        let first = col.0.iter().copied().find(|x| *x != 0.0).unwrap_or(1.0);
        if first < 0.0 {
            -col
        } else {
            col
        }
    });
    SymEigen {
        values,
        vectors: Mat3::from_columns(cols),
        sweeps,
        converged,
    }
}

/// Applies the rotation that annihilates `a[p][q]`, accumulating it into `v`.
fn rotate(a: &mut Mat3, v: &mut Mat3, p: usize, q: usize, c: f64, s: f64, t: f64) {
    let apq = a.0[p][q];
    let r = 3 - p - q;
    a.0[p][p] -= t * apq;
    a.0[q][q] += t * apq;
    a.0[p][q] = 0.0;
    a.0[q][p] = 0.0;
    let arp = a.0[r][p];
    let arq = a.0[r][q];
    a.0[r][p] = c * arp - s * arq;
    a.0[p][r] = a.0[r][p];
    a.0[r][q] = s * arp + c * arq;
    a.0[q][r] = a.0[r][q];
    for k in 0..3 {
        let vkp = v.0[k][p];
        let vkq = v.0[k][q];
        v.0[k][p] = c * vkp - s * vkq;
        v.0[k][q] = s * vkp + c * vkq;
    }
}

/// Eigendecomposition of a PSD-labeled matrix with marginally negative
/// eigenvalues clamped to zero.
fn eig_psd(m: &SymMat3) -> Result<SymEigen> {
    if !m.is_finite() {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let mut e = eig_sym(m);
    let trace = m.trace();
    for v in e.values.0.iter_mut() {
        if *v < 0.0 {
            if *v < -PSD_TOLERANCE * trace.abs() {
                return Err(Error::NotPsd {
                    eigenvalue: *v,
                    trace,
                });
            }
            *v = 0.0;
        }
    }
    Ok(e)
}

/// Principal square root `U Λ^{1/2} U^T`.
pub fn sym_sqrt(m: &SymMat3) -> Result<SymMat3> {
    let e = eig_psd(m)?;
    Ok(SymMat3::from_eigen(&e.vectors, e.values.0.map(f64::sqrt)))
}

/// `U Λ^{-1/2} U^T` with eigenvalues first floored at `eps * trace(m) / 3`.
pub fn sym_inv_sqrt(m: &SymMat3, eps: f64) -> Result<SymMat3> {
    let e = eig_psd(m)?;
    let floor = eps * m.trace() / 3.0;
    let mut d = [0.0; 3];
    for (out, &lambda) in d.iter_mut().zip(&e.values.0) {
        let lambda = lambda.max(floor);
        if !(lambda > 0.0) {
            return Err(Error::Singular(format!(
                "eigenvalue {lambda:e} cannot be inverted (trace {:e}, eps {eps:e})",
                m.trace()
            )));
        }
        *out = 1.0 / lambda.sqrt();
    }
    Ok(SymMat3::from_eigen(&e.vectors, d))
}
