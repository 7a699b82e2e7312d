use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::{Real, C};
use crate::spin::ket::Ket;
use crate::spin::operators::{bit, spin_op, ProductOperatorExpansion};

/// Density matrix of `n` spins: Hermitian, unit trace, positive
/// semidefinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DensityMatrix<T: Real> {
    n: usize,
    m: Mat<T>,
}

/// Traceless part `rho - 1/2^n` of a density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviationDensityMatrix<T: Real> {
    pub n: usize,
    pub m: Mat<T>,
}

fn dim_to_n(d: usize) -> Result<usize> {
    if d == 0 || !d.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!("dimension {d} is not a power of two")));
    }
    Ok(d.trailing_zeros() as usize)
}

impl<T: Real> DensityMatrix<T> {
    /// Validated constructor.
    pub fn from_matrix(m: Mat<T>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!("{}x{}", m.rows(), m.cols())));
        }
        let n = dim_to_n(m.rows())?;
        let herm = m.max_abs_diff(&m.adjoint());
        if herm > T::loose_tol() {
            return Err(Error::NotHermitian(herm.as_f64()));
        }
        let tr = m.trace();
        if (tr.re - T::one()).abs() > T::tight_tol() * T::lit(10.0) || tr.im.abs() > T::tight_tol() * T::lit(10.0) {
            return Err(Error::BadTrace(tr.re.as_f64()));
        }
        let m = m.hermitian_part();
        let min = m.eigvalsh().first().copied().unwrap_or_else(T::zero);
        if min < -T::loose_tol() {
            return Err(Error::NegativeEigenvalue(min.as_f64()));
        }
        Ok(DensityMatrix { n, m })
    }

    /// Wrap a matrix known to be a valid state (produced by a unitary or a
    /// completely positive map applied to a valid state).
    pub(crate) fn new_unchecked(m: Mat<T>) -> Self {
        let n = m.rows().trailing_zeros() as usize;
        DensityMatrix { n, m }
    }

    pub fn from_ket(k: &Ket<T>) -> Self {
        let a = k.amps();
        let d = a.len();
        let m = Mat::from_fn(d, d, |r, c| a[r] * a[c].conj());
        DensityMatrix { n: k.num_spins(), m }
    }

    pub fn maximally_mixed(n: usize) -> Self {
        let d = 1usize << n;
        DensityMatrix { n, m: Mat::identity(d).scale_real(T::one() / T::from_usize_lossy(d)) }
    }

    pub fn basis(n: usize, index: usize) -> Self {
        Self::from_ket(&Ket::basis(n, index))
    }

    /// Convex mixture; weights must be non-negative and sum to one.
    pub fn mix(parts: &[(T, &DensityMatrix<T>)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?;
        let n = first.1.n;
        let mut acc = Mat::zeros(1 << n, 1 << n);
        let mut wsum = T::zero();
        for (w, r) in parts {
            if r.n != n {
                return Err(Error::DimensionMismatch("mixture of different sizes".into()));
            }
            if *w < T::zero() {
                return Err(Error::InvalidParameter("negative mixture weight".into()));
            }
            wsum += *w;
            acc = &acc + &r.m.scale_real(*w);
        }
        if (wsum - T::one()).abs() > T::tight_tol() {
            return Err(Error::InvalidParameter(format!("weights sum to {wsum}")));
        }
        Ok(DensityMatrix { n, m: acc })
    }

    pub fn num_spins(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.m
    }

    pub fn into_matrix(self) -> Mat<T> {
        self.m
    }

    pub fn purity(&self) -> T {
        self.m.inner(&self.m).re
    }

    pub fn populations(&self) -> Vec<T> {
        self.m.diagonal().iter().map(|x| x.re).collect()
    }

    /// Bloch vector `(x, y, z)` of a single-spin state.
    pub fn bloch(&self) -> Result<[T; 3]> {
        if self.n != 1 {
            return Err(Error::DimensionMismatch("Bloch vector needs one spin".into()));
        }
        let two = T::lit(2.0);
        Ok([
            two * self.expectation(&spin_op(1, 0, 1)),
            two * self.expectation(&spin_op(1, 0, 2)),
            two * self.expectation(&spin_op(1, 0, 3)),
        ])
    }

    /// `Tr(rho O)` for Hermitian `O`.
    pub fn expectation(&self, o: &Mat<T>) -> T {
        self.m.matmul(o).trace().re
    }

    pub fn deviation(&self) -> DeviationDensityMatrix<T> {
        let d = self.dim();
        let id = Mat::identity(d).scale_real(T::one() / T::from_usize_lossy(d));
        DeviationDensityMatrix { n: self.n, m: &self.m - &id }
    }

    pub fn expansion(&self) -> ProductOperatorExpansion<T> {
        ProductOperatorExpansion::expand(&self.m).expect("density matrix has spin dimensions")
    }

    pub fn evolve_unitary(&self, u: &Mat<T>) -> Self {
        DensityMatrix { n: self.n, m: u.conjugate(&self.m).hermitian_part() }
    }

    /// `<psi| rho |psi>`.
    pub fn fidelity_pure(&self, k: &Ket<T>) -> T {
        let v = self.m.apply(k.amps());
        k.amps().iter().zip(&v).fold(C::zero(), |a, (x, y)| a + x.conj() * *y).re
    }

    /// Reduced state of the spins in `keep` (in the given order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let n = self.n;
        for &k in keep {
            if k >= n {
                return Err(Error::SpinIndex { index: k, n });
            }
        }
        let traced: Vec<usize> = (0..n).filter(|k| !keep.contains(k)).collect();
        let kd = 1usize << keep.len();
        let td = 1usize << traced.len();
        let compose = |ki: usize, ti: usize| -> usize {
            let mut j = 0usize;
            for (p, &s) in keep.iter().enumerate() {
                if (ki >> (keep.len() - 1 - p)) & 1 == 1 {
                    j |= 1 << (n - 1 - s);
                }
            }
            for (p, &s) in traced.iter().enumerate() {
                if (ti >> (traced.len() - 1 - p)) & 1 == 1 {
                    j |= 1 << (n - 1 - s);
                }
            }
            j
        };
        let mut out = Mat::zeros(kd, kd);
        for r in 0..kd {
            for c in 0..kd {
                let mut acc = C::zero();
                for t in 0..td {
                    acc = acc + self.m[(compose(r, t), compose(c, t))];
                }
                out[(r, c)] = acc;
            }
        }
        Ok(DensityMatrix { n: keep.len(), m: out })
    }

    /// Partial transpose over the listed spins.
    pub fn partial_transpose(&self, spins: &[usize]) -> Mat<T> {
        let n = self.n;
        let mask: usize = spins.iter().fold(0, |m, &s| m | (1 << (n - 1 - s)));
        let d = self.dim();
        Mat::from_fn(d, d, |r, c| {
            let r2 = (r & !mask) | (c & mask);
            let c2 = (c & !mask) | (r & mask);
            self.m[(r2, c2)]
        })
    }

    /// Positive partial transpose test (sufficient for separability of two
    /// qubits).
    pub fn is_ppt(&self, spins: &[usize], tol: T) -> bool {
        self.partial_transpose(spins).eigvalsh().first().is_none_or(|&v| v >= -tol)
    }

    /// State of the remaining spins conditioned on `spin` being in basis
    /// state `value`.
    pub fn conditional(&self, spin: usize, value: usize) -> Result<Self> {
        let n = self.n;
        if spin >= n {
            return Err(Error::SpinIndex { index: spin, n });
        }
        let d = self.dim();
        let idx: Vec<usize> = (0..d).filter(|&j| bit(j, spin, n) == value).collect();
        let sub = Mat::from_fn(idx.len(), idx.len(), |r, c| self.m[(idx[r], idx[c])]);
        let tr = sub.trace().re;
        if tr <= T::zero() {
            return Err(Error::InvalidParameter("conditioning on a zero-probability outcome".into()));
        }
        Ok(DensityMatrix { n: n - 1, m: sub.scale_real(T::one() / tr) })
    }

    pub fn cast<U: Real>(&self) -> DensityMatrix<U> {
        DensityMatrix { n: self.n, m: self.m.cast() }
    }
}

impl<T: Real> DeviationDensityMatrix<T> {
    pub fn expansion(&self) -> ProductOperatorExpansion<T> {
        ProductOperatorExpansion::expand(&self.m).expect("deviation has spin dimensions")
    }

    /// Add back the identity part.
    pub fn to_density(&self) -> Result<DensityMatrix<T>> {
        let d = 1usize << self.n;
        let id = Mat::identity(d).scale_real(T::one() / T::from_usize_lossy(d));
        DensityMatrix::from_matrix(&self.m + &id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::c;

    #[test]
    fn validation_errors() {
        let mut m = Mat::<f64>::identity(2).scale_real(0.5);
        m[(0, 1)] = c(0.3, 0.0);
        assert!(matches!(DensityMatrix::from_matrix(m.clone()), Err(Error::NotHermitian(_))));
        m[(1, 0)] = c(0.3, 0.0);
        assert!(DensityMatrix::from_matrix(m.clone()).is_ok());
        m[(0, 1)] = c(0.7, 0.0);
        m[(1, 0)] = c(0.7, 0.0);
        assert!(matches!(DensityMatrix::from_matrix(m), Err(Error::NegativeEigenvalue(_))));
        let t = Mat::<f64>::identity(2);
        assert!(matches!(DensityMatrix::from_matrix(t), Err(Error::BadTrace(_))));
    }

    #[test]
    fn bloch_of_plus_state() {
        let k = Ket::<f64>::from_angles(std::f64::consts::FRAC_PI_2, 0.0).unwrap();
        let b = DensityMatrix::from_ket(&k).bloch().unwrap();
        assert!((b[0] - 1.0).abs() < 1e-15 && b[1].abs() < 1e-15 && b[2].abs() < 1e-15);
    }

    #[test]
    fn partial_trace_of_bell_is_mixed() {
        let r = DensityMatrix::from_ket(&Ket::<f64>::bell("phi+").unwrap());
        let a = r.partial_trace(&[1]).unwrap();
        assert!(a.matrix().max_abs_diff(&Mat::identity(2).scale_real(0.5)) < 1e-15);
        assert!(!r.is_ppt(&[1], 1e-12));
    }
}
