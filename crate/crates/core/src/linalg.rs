//! Dense complex matrices, Hermitian eigensolver, exponentials and a small
//! real least-squares solver.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, cis, cr, Real, C};

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<C<T>>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![C::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for k in 0..cols {
                data.push(f(r, k));
            }
        }
        Mat { rows, cols, data }
    }

    /// Build from row-major data. Panics on a length mismatch.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C<T>>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Mat { rows, cols, data }
    }

    /// Build from nested rows of complex entries.
    pub fn from_rows(rows: &[Vec<C<T>>]) -> Self {
        let r = rows.len();
        let k = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * k);
        for row in rows {
            assert_eq!(row.len(), k, "ragged matrix rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: k, data }
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let v: Vec<Vec<C<T>>> = rows.iter().map(|r| r.iter().map(|&x| cr(T::lit(x))).collect()).collect();
        Self::from_rows(&v)
    }

    pub fn diag(d: &[C<T>]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, &x) in d.iter().enumerate() {
            m.data[i * n + i] = x;
        }
        m
    }

    pub fn diag_real(d: &[T]) -> Self {
        let v: Vec<C<T>> = d.iter().map(|&x| cr(x)).collect();
        Self::diag(&v)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }
    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }
    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }
    #[inline]
    pub fn data(&self) -> &[C<T>] {
        &self.data
    }
    #[inline]
    pub fn data_mut(&mut self) -> &mut [C<T>] {
        &mut self.data
    }

    pub fn diagonal(&self) -> Vec<C<T>> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> C<T> {
        self.diagonal().into_iter().fold(C::zero(), |a, b| a + b)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, k| self[(k, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, k| self[(k, r)])
    }

    pub fn scale(&self, s: C<T>) -> Self {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.scale(cr(s))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let (n, m, p) = (self.rows, self.cols, other.cols);
        let mut out = vec![C::zero(); n * p];
        for i in 0..n {
            for k in 0..m {
                let a = self.data[i * m + k];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                let row = &other.data[k * p..(k + 1) * p];
                let dst = &mut out[i * p..(i + 1) * p];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d = *d + a * b;
                }
            }
        }
        Mat { rows: n, cols: p, data: out }
    }

    /// `self · other · self†`.
    pub fn conjugate(&self, other: &Self) -> Self {
        self.matmul(other).matmul(&self.adjoint())
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (r1, c1, r2, c2) = (self.rows, self.cols, other.rows, other.cols);
        Self::from_fn(r1 * r2, c1 * c2, |r, k| self[(r / r2, k / c2)] * other[(r % r2, k % c2)])
    }

    pub fn apply(&self, v: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| self.data[r * self.cols..(r + 1) * self.cols].iter().zip(v).fold(C::zero(), |a, (&x, &y)| a + x * y))
            .collect()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |a, x| a.max(x.norm()))
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|x| x.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).fold(T::zero(), |a, (x, y)| a.max((*x - *y).norm()))
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.is_square() && self.max_abs_diff(&self.adjoint()) <= tol
    }

    pub fn is_unitary(&self, tol: T) -> bool {
        self.is_square() && self.adjoint().matmul(self).max_abs_diff(&Self::identity(self.rows)) <= tol
    }

    /// Hermitian part `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale_real(T::lit(0.5))
    }

    /// `Tr(A† B)`.
    pub fn inner(&self, other: &Self) -> C<T> {
        self.data.iter().zip(&other.data).fold(C::zero(), |a, (x, y)| a + x.conj() * *y)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &self.matmul(other) - &other.matmul(self)
    }

    pub fn cast<U: Real>(&self) -> Mat<U> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| c(U::lit(x.re.as_f64()), U::lit(x.im.as_f64()))).collect() }
    }

    /// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi
    /// rotations. Eigenvalues ascend; eigenvectors are the columns of the
    /// returned matrix.
    pub fn eigh(&self) -> (Vec<T>, Mat<T>) {
        assert!(self.is_square(), "eigh needs a square matrix");
        let n = self.rows;
        let mut a = self.hermitian_part();
        let mut v = Mat::identity(n);
        let scale = a.frobenius_norm().max(T::min_positive_value());
        let eps = T::epsilon();
        for _sweep in 0..100 {
            let mut off = T::zero();
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[(p, q)].norm_sqr();
                }
            }
            if off.sqrt() <= eps * scale * T::lit(0.1) {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    let mag = apq.norm();
                    if mag <= eps * eps * scale {
                        continue;
                    }
                    // rephase column/row q so that a[p][q] is real positive
                    let ph = apq / mag;
                    let phc = ph.conj();
                    for k in 0..n {
                        a[(k, q)] = a[(k, q)] * phc;
                    }
                    for k in 0..n {
                        a[(q, k)] = a[(q, k)] * ph;
                    }
                    for k in 0..n {
                        v[(k, q)] = v[(k, q)] * phc;
                    }
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let theta = (aqq - app) / (T::lit(2.0) * mag);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let cs = T::one() / (t * t + T::one()).sqrt();
                    let sn = t * cs;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = akp * cs - akq * sn;
                        a[(k, q)] = akp * sn + akq * cs;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = apk * cs - aqk * sn;
                        a[(q, k)] = apk * sn + aqk * cs;
                    }
                    a[(p, q)] = C::zero();
                    a[(q, p)] = C::zero();
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * cs - vkq * sn;
                        v[(k, q)] = vkp * sn + vkq * cs;
                    }
                }
            }
        }
        let mut idx: Vec<usize> = (0..n).collect();
        let vals: Vec<T> = (0..n).map(|i| a[(i, i)].re).collect();
        idx.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap_or(std::cmp::Ordering::Equal));
        let sorted: Vec<T> = idx.iter().map(|&i| vals[i]).collect();
        let vecs = Mat::from_fn(n, n, |r, k| v[(r, idx[k])]);
        (sorted, vecs)
    }

    pub fn eigvalsh(&self) -> Vec<T> {
        self.eigh().0
    }

    /// Apply a scalar function to a Hermitian matrix through its spectrum.
    pub fn hermitian_fn(&self, f: impl Fn(T) -> C<T>) -> Mat<T> {
        let (vals, vecs) = self.eigh();
        let d: Vec<C<T>> = vals.iter().map(|&x| f(x)).collect();
        vecs.matmul(&Mat::diag(&d)).matmul(&vecs.adjoint())
    }

    /// `exp(-i H t)` for Hermitian `H`.
    pub fn expm_hermitian(&self, t: T) -> Mat<T> {
        if let Some(d) = self.real_diagonal_if_diagonal() {
            let ph: Vec<C<T>> = d.iter().map(|&x| cis(-x * t)).collect();
            return Mat::diag(&ph);
        }
        self.hermitian_fn(|x| cis(-x * t))
    }

    fn real_diagonal_if_diagonal(&self) -> Option<Vec<T>> {
        let n = self.rows;
        for r in 0..n {
            for k in 0..n {
                if r != k {
                    let x = self.data[r * n + k];
                    if x.re != T::zero() || x.im != T::zero() {
                        return None;
                    }
                }
            }
        }
        Some((0..n).map(|i| self.data[i * n + i].re).collect())
    }

    /// `exp(-i H t)` together with its directional derivatives along each
    /// of `dhs`, sharing one eigendecomposition.
    pub fn expm_hermitian_with_derivatives(&self, dhs: &[Mat<T>], t: T) -> (Mat<T>, Vec<Mat<T>>) {
        let (vals, vecs) = self.eigh();
        let n = vals.len();
        let vh = vecs.adjoint();
        let ph: Vec<C<T>> = vals.iter().map(|&x| cis(-x * t)).collect();
        let u = vecs.matmul(&Mat::diag(&ph)).matmul(&vh);
        let tol = T::epsilon().sqrt();
        let g = Mat::from_fn(n, n, |j, k| {
            let (a, b) = (vals[j], vals[k]);
            if ((a - b) * t).abs() < tol {
                ph[j] * c(T::zero(), -t)
            } else {
                (ph[j] - ph[k]) / cr(a - b)
            }
        });
        let ds = dhs
            .iter()
            .map(|dh| {
                let m = vh.matmul(dh).matmul(&vecs);
                let had = Mat::from_fn(n, n, |j, k| m[(j, k)] * g[(j, k)]);
                vecs.matmul(&had).matmul(&vh)
            })
            .collect();
        (u, ds)
    }

    /// Directional derivative of `exp(-i H t)` along `dh`, computed exactly
    /// in the eigenbasis of `H`.
    pub fn expm_hermitian_derivative(&self, dh: &Mat<T>, t: T) -> Mat<T> {
        let (vals, vecs) = self.eigh();
        let n = vals.len();
        let m = vecs.adjoint().matmul(dh).matmul(&vecs);
        let tol = T::epsilon().sqrt();
        let g = Mat::from_fn(n, n, |j, k| {
            let (a, b) = (vals[j], vals[k]);
            let ea = cis(-a * t);
            if ((a - b) * t).abs() < tol {
                ea * c(T::zero(), -t)
            } else {
                let eb = cis(-b * t);
                (ea - eb) / cr(a - b)
            }
        });
        let had = Mat::from_fn(n, n, |j, k| m[(j, k)] * g[(j, k)]);
        vecs.matmul(&had).matmul(&vecs.adjoint())
    }
}

impl<T: Real> Index<(usize, usize)> for Mat<T> {
    type Output = C<T>;
    #[inline]
    fn index(&self, (r, k): (usize, usize)) -> &C<T> {
        &self.data[r * self.cols + k]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (r, k): (usize, usize)) -> &mut C<T> {
        &mut self.data[r * self.cols + k]
    }
}

impl<'a, T: Real> Add<&'a Mat<T>> for &'a Mat<T> {
    type Output = Mat<T>;
    fn add(self, o: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols), "add dimension mismatch");
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&o.data).map(|(a, b)| *a + *b).collect() }
    }
}

impl<'a, T: Real> Sub<&'a Mat<T>> for &'a Mat<T> {
    type Output = Mat<T>;
    fn sub(self, o: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols), "sub dimension mismatch");
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&o.data).map(|(a, b)| *a - *b).collect() }
    }
}

impl<'a, T: Real> Mul<&'a Mat<T>> for &'a Mat<T> {
    type Output = Mat<T>;
    fn mul(self, o: &Mat<T>) -> Mat<T> {
        self.matmul(o)
    }
}

impl<T: Real> Neg for &Mat<T> {
    type Output = Mat<T>;
    fn neg(self) -> Mat<T> {
        self.scale_real(-T::one())
    }
}

/// Serialized form: row-major list of `[re, im]` pairs.
#[derive(Serialize, Deserialize)]
struct MatRepr {
    rows: usize,
    cols: usize,
    data: Vec<[f64; 2]>,
}

impl<T: Real> Serialize for Mat<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatRepr { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| [x.re.as_f64(), x.im.as_f64()]).collect() }.serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for Mat<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = MatRepr::deserialize(d)?;
        if r.data.len() != r.rows * r.cols {
            return Err(serde::de::Error::custom("matrix data length does not match shape"));
        }
        Ok(Mat { rows: r.rows, cols: r.cols, data: r.data.iter().map(|p| c(T::lit(p[0]), T::lit(p[1]))).collect() })
    }
}

/// Real least squares `min ||A x - b||` by Householder QR with a rank check.
///
/// `a` is row-major with `rows >= cols`. Returns the solution and the
/// residual norm.
pub fn lstsq<T: Real>(a: &[T], rows: usize, cols: usize, b: &[T]) -> Result<(Vec<T>, T)> {
    if a.len() != rows * cols || b.len() != rows {
        return Err(Error::DimensionMismatch(format!(
            "least squares: {}x{} design with {} entries and {} observations",
            rows,
            cols,
            a.len(),
            b.len()
        )));
    }
    if rows < cols {
        return Err(Error::RankDeficient { rank: rows, needed: cols });
    }
    let mut r = a.to_vec();
    let mut y = b.to_vec();
    let amax = a.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let tol = amax * T::lit(1e-10).max(T::epsilon() * T::lit(64.0)) * T::from_usize_lossy(rows);
    // pivot row advances only on independent columns
    let mut rank = 0;
    for k in 0..cols {
        let p = rank;
        if p >= rows {
            break;
        }
        let norm: T = (p..rows).map(|i| r[i * cols + k] * r[i * cols + k]).sum::<T>().sqrt();
        if norm <= tol {
            continue;
        }
        rank += 1;
        let alpha = if r[p * cols + k] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = (p..rows).map(|i| r[i * cols + k]).collect();
        v[0] -= alpha;
        let vnorm2: T = v.iter().map(|x| *x * *x).sum();
        if vnorm2 == T::zero() {
            continue;
        }
        for j in k..cols {
            let dot: T = (p..rows).map(|i| v[i - p] * r[i * cols + j]).sum();
            let f = T::lit(2.0) * dot / vnorm2;
            for i in p..rows {
                r[i * cols + j] -= f * v[i - p];
            }
        }
        let dot: T = (p..rows).map(|i| v[i - p] * y[i]).sum();
        let f = T::lit(2.0) * dot / vnorm2;
        for i in p..rows {
            y[i] -= f * v[i - p];
        }
    }
    if rank < cols {
        return Err(Error::RankDeficient { rank, needed: cols });
    }
    let mut x = vec![T::zero(); cols];
    for k in (0..cols).rev() {
        let mut s = y[k];
        for j in (k + 1)..cols {
            s -= r[k * cols + j] * x[j];
        }
        x[k] = s / r[k * cols + k];
    }
    let mut res = T::zero();
    for i in 0..rows {
        let mut s = -b[i];
        for j in 0..cols {
            s += a[i * cols + j] * x[j];
        }
        res += s * s;
    }
    Ok((x, res.sqrt()))
}

/// Numerical rank of a real row-major matrix.
pub fn rank<T: Real>(a: &[T], rows: usize, cols: usize) -> usize {
    match lstsq(a, rows, cols, &vec![T::zero(); rows]) {
        Ok(_) => cols,
        Err(Error::RankDeficient { rank, .. }) => rank,
        Err(_) => 0,
    }
}

/// Complex 2x2 helpers used by the single-qubit code paths.
pub fn mat2<T: Real>(a: C<T>, b: C<T>, c_: C<T>, d: C<T>) -> Mat<T> {
    Mat::from_vec(2, 2, vec![a, b, c_, d])
}

pub fn pauli<T: Real>(axis: usize) -> Mat<T> {
    let z = C::zero();
    let o = C::one();
    let i = Complex::new(T::zero(), T::one());
    match axis {
        0 => Mat::identity(2),
        1 => mat2(z, o, o, z),
        2 => mat2(z, -i, i, z),
        3 => mat2(o, z, z, -o),
        _ => panic!("pauli axis out of range"),
    }
}
