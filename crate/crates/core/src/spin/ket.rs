use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::{c, cis, cr, Real, C};

/// Pure state of `n` spins; amplitudes indexed with spin 0 as the most
/// significant bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Ket<T: Real> {
    amps: Vec<C<T>>,
}

impl<T: Real> Ket<T> {
    /// Validated constructor: length must be a power of two and the squared
    /// norm must equal 1.
    pub fn new(amps: Vec<C<T>>) -> Result<Self> {
        if amps.is_empty() || !amps.len().is_power_of_two() {
            return Err(Error::DimensionMismatch(format!("ket of length {}", amps.len())));
        }
        let nrm: T = amps.iter().map(|a| a.norm_sqr()).sum();
        if (nrm - T::one()).abs() > T::tight_tol() {
            return Err(Error::NotNormalized(nrm.as_f64()));
        }
        Ok(Ket { amps })
    }

    /// Normalize arbitrary nonzero amplitudes.
    pub fn normalized(amps: Vec<C<T>>) -> Result<Self> {
        let nrm: T = amps.iter().map(|a| a.norm_sqr()).sum::<T>().sqrt();
        if nrm == T::zero() {
            return Err(Error::NotNormalized(0.0));
        }
        Self::new(amps.into_iter().map(|a| a / cr(nrm)).collect())
    }

    pub fn basis(n: usize, index: usize) -> Self {
        let mut amps = vec![C::zero(); 1 << n];
        amps[index] = cr(T::one());
        Ket { amps }
    }

    /// Single-spin state `cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>` for
    /// `0 <= theta <= pi`, `0 <= phi < 2 pi`.
    pub fn from_angles(theta: T, phi: T) -> Result<Self> {
        let two_pi = T::lit(2.0) * T::PI();
        if !(theta >= T::zero() && theta <= T::PI() && phi >= T::zero() && phi < two_pi) {
            return Err(Error::InvalidParameter(format!("Bloch angles ({theta}, {phi}) out of range")));
        }
        let h = T::lit(0.5) * theta;
        Ok(Ket { amps: vec![cr(h.cos()), cis(phi) * cr(h.sin())] })
    }

    pub fn amps(&self) -> &[C<T>] {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn num_spins(&self) -> usize {
        self.amps.len().trailing_zeros() as usize
    }

    pub fn kron(&self, other: &Self) -> Self {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(*a * *b);
            }
        }
        Ket { amps }
    }

    pub fn apply(&self, u: &Mat<T>) -> Self {
        Ket { amps: u.apply(&self.amps) }
    }

    pub fn inner(&self, other: &Self) -> C<T> {
        self.amps.iter().zip(&other.amps).fold(C::zero(), |a, (x, y)| a + x.conj() * *y)
    }

    /// Representative with the first non-negligible amplitude real and
    /// positive.
    pub fn canonical(&self) -> Self {
        let tol = T::tight_tol();
        let first = self.amps.iter().find(|a| a.norm() > tol).copied().unwrap_or_else(|| cr(T::one()));
        let ph = first.conj() / cr(first.norm());
        Ket { amps: self.amps.iter().map(|a| *a * ph).collect() }
    }

    pub fn eq_up_to_phase(&self, other: &Self, tol: T) -> bool {
        self.dim() == other.dim() && (self.inner(other).norm() - T::one()).abs() <= tol
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Bell states on two spins: `phi+`, `phi-`, `psi+`, `psi-`.
    pub fn bell(name: &str) -> Result<Self> {
        let r = T::lit(0.5).sqrt();
        let z = C::zero();
        let p = cr(r);
        let m = cr(-r);
        let amps = match name {
            "phi+" => vec![p, z, z, p],
            "phi-" => vec![p, z, z, m],
            "psi+" => vec![z, p, p, z],
            "psi-" => vec![z, p, m, z],
            _ => return Err(Error::InvalidParameter(format!("unknown Bell state {name}"))),
        };
        Ok(Ket { amps })
    }

    pub fn cast<U: Real>(&self) -> Ket<U> {
        Ket { amps: self.amps.iter().map(|a| c(U::lit(a.re.as_f64()), U::lit(a.im.as_f64()))).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unnormalized() {
        let r = Ket::<f64>::new(vec![cr(1.0), cr(1.0)]);
        assert!(matches!(r, Err(Error::NotNormalized(_))));
        assert!(Ket::<f64>::new(vec![cr(1.0), cr(0.0), cr(0.0)]).is_err());
    }

    #[test]
    fn canonical_removes_global_phase() {
        let k = Ket::<f64>::from_angles(0.7, 0.3).unwrap();
        let shifted = Ket::new(k.amps().iter().map(|a| *a * cis(1.3)).collect()).unwrap();
        let a = k.canonical();
        let b = shifted.canonical();
        for (x, y) in a.amps().iter().zip(b.amps()) {
            assert!((*x - *y).norm() < 1e-15);
        }
    }
}
