//! Spin operators, embeddings and the product-operator basis.

use std::collections::BTreeMap;

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::{c, cr, Real, C};

/// Axis index used in Pauli strings: 0 = E, 1 = x, 2 = y, 3 = z.
pub type Axis = u8;

pub const AXIS_CHARS: [char; 4] = ['E', 'x', 'y', 'z'];

/// Bit of spin `k` (0-based, spin 0 most significant) in basis index `j`.
#[inline]
pub fn bit(j: usize, k: usize, n: usize) -> usize {
    (j >> (n - 1 - k)) & 1
}

/// Spin operator `I_axis` (half a Pauli matrix) acting on spin `k` of `n`.
pub fn spin_op<T: Real>(n: usize, k: usize, axis: Axis) -> Mat<T> {
    let mut s = vec![0u8; n];
    s[k] = axis;
    pauli_string(&s).scale_real(T::lit(0.5))
}

/// Sum of `I_axis` over all spins.
pub fn total_spin_op<T: Real>(n: usize, axis: Axis) -> Mat<T> {
    let mut m = Mat::zeros(1 << n, 1 << n);
    for k in 0..n {
        m = &m + &spin_op(n, k, axis);
    }
    m
}

/// Element of a single-spin Pauli matrix.
#[inline]
fn pauli_elem<T: Real>(axis: Axis, r: usize, k: usize) -> C<T> {
    match (axis, r, k) {
        (0, a, b) if a == b => C::one(),
        (1, a, b) if a != b => C::one(),
        (2, 0, 1) => c(T::zero(), -T::one()),
        (2, 1, 0) => c(T::zero(), T::one()),
        (3, 0, 0) => C::one(),
        (3, 1, 1) => -C::<T>::one(),
        _ => C::zero(),
    }
}

fn flip_mask(s: &[Axis]) -> usize {
    let n = s.len();
    s.iter().enumerate().fold(0, |m, (k, &a)| if a == 1 || a == 2 { m | (1 << (n - 1 - k)) } else { m })
}

/// Value of `P[r][r ^ mask]` for the Pauli string `s`.
#[inline]
fn pauli_string_entry<T: Real>(s: &[Axis], r: usize, col: usize) -> C<T> {
    let n = s.len();
    let mut v = C::one();
    for (k, &a) in s.iter().enumerate() {
        v = v * pauli_elem::<T>(a, bit(r, k, n), bit(col, k, n));
    }
    v
}

/// Tensor product of Pauli matrices.
pub fn pauli_string<T: Real>(s: &[Axis]) -> Mat<T> {
    let n = s.len();
    let d = 1usize << n;
    let mask = flip_mask(s);
    let mut m = Mat::zeros(d, d);
    for r in 0..d {
        let col = r ^ mask;
        m[(r, col)] = pauli_string_entry(s, r, col);
    }
    m
}

/// `Tr(P M)` for a Pauli string `P`, in O(2^n).
pub fn pauli_trace<T: Real>(s: &[Axis], m: &Mat<T>) -> C<T> {
    let d = m.rows();
    let mask = flip_mask(s);
    let mut acc = C::zero();
    for r in 0..d {
        let col = r ^ mask;
        acc = acc + pauli_string_entry::<T>(s, r, col) * m[(col, r)];
    }
    acc
}

/// Embed a `2^k x 2^k` operator on the listed target spins of an `n`-spin
/// register. The first target is the most significant bit of the operator.
pub fn embed<T: Real>(u: &Mat<T>, targets: &[usize], n: usize) -> Result<Mat<T>> {
    let k = targets.len();
    if u.rows() != 1 << k || u.cols() != 1 << k {
        return Err(Error::DimensionMismatch(format!("operator of size {}x{} on {} targets", u.rows(), u.cols(), k)));
    }
    for (i, &t) in targets.iter().enumerate() {
        if t >= n {
            return Err(Error::SpinIndex { index: t, n });
        }
        if targets[..i].contains(&t) {
            return Err(Error::InvalidGate(format!("repeated target {t}")));
        }
    }
    let d = 1usize << n;
    let tmask: usize = targets.iter().fold(0, |m, &t| m | (1 << (n - 1 - t)));
    let sub = |j: usize| -> usize { targets.iter().fold(0, |acc, &t| (acc << 1) | bit(j, t, n)) };
    let mut out = Mat::zeros(d, d);
    for r in 0..d {
        let rest = r & !tmask;
        let sr = sub(r);
        for sc in 0..(1usize << k) {
            let v = u[(sr, sc)];
            if v.re == T::zero() && v.im == T::zero() {
                continue;
            }
            let mut col = rest;
            for (i, &t) in targets.iter().enumerate() {
                if (sc >> (k - 1 - i)) & 1 == 1 {
                    col |= 1 << (n - 1 - t);
                }
            }
            out[(r, col)] = v;
        }
    }
    Ok(out)
}

/// Default spin names: `I`, `S` for two spins, `I1..In` otherwise.
pub fn default_names(n: usize) -> Vec<String> {
    match n {
        1 => vec!["I".into()],
        2 => vec!["I".into(), "S".into()],
        _ => (1..=n).map(|k| format!("I{k}")).collect(),
    }
}

/// Expansion of an operator in the normalized product-operator basis
/// `{E/2, I_a, 2 I_a S_b, 4 I_a S_b R_c, ...}`.
///
/// Every basis element equals half a Pauli string, so the coefficient of
/// string `P` is `2 Tr(P M) / 2^n`. Labels omit the `2^(k-1)` prefactor:
/// `"IzSz"` stands for `2 Iz Sz`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductOperatorExpansion<T: Real> {
    n: usize,
    names: Vec<String>,
    terms: BTreeMap<Vec<Axis>, T>,
}

impl<T: Real> ProductOperatorExpansion<T> {
    pub fn new(n: usize) -> Self {
        ProductOperatorExpansion { n, names: default_names(n), terms: BTreeMap::new() }
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n {
            return Err(Error::DimensionMismatch(format!("{} names for {} spins", names.len(), self.n)));
        }
        self.names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Expand a Hermitian operator (anything else is rejected). Coefficients below `T::epsilon()` times
    /// the operator scale are dropped.
    pub fn expand(m: &Mat<T>) -> Result<Self> {
        let d = m.rows();
        if !m.is_square() || d == 0 || !d.is_power_of_two() {
            return Err(Error::DimensionMismatch(format!("{}x{} is not a spin operator", d, m.cols())));
        }
        let skew = m.max_abs_diff(&m.adjoint());
        if skew > T::loose_tol() * m.max_abs().max(T::one()) {
            return Err(Error::NotHermitian(skew.as_f64()));
        }
        let n = d.trailing_zeros() as usize;
        let mut out = Self::new(n);
        let floor = m.max_abs().max(T::one()) * T::epsilon() * T::lit(16.0);
        let norm = T::lit(2.0) / T::from_usize_lossy(d);
        let mut s = vec![0u8; n];
        for idx in 0..(1usize << (2 * n)) {
            for (k, a) in s.iter_mut().enumerate() {
                *a = ((idx >> (2 * (n - 1 - k))) & 3) as u8;
            }
            let v = pauli_trace(&s, m).re * norm;
            if v.abs() > floor {
                out.terms.insert(s.clone(), v);
            }
        }
        Ok(out)
    }

    /// Rebuild the operator from its coefficients.
    pub fn assemble(&self) -> Mat<T> {
        let d = 1usize << self.n;
        let mut m = Mat::zeros(d, d);
        let half = T::lit(0.5);
        for (s, &v) in &self.terms {
            let mask = flip_mask(s);
            for r in 0..d {
                let col = r ^ mask;
                m[(r, col)] = m[(r, col)] + pauli_string_entry::<T>(s, r, col) * cr(v * half);
            }
        }
        m
    }

    pub fn label(&self, s: &[Axis]) -> String {
        if s.iter().all(|&a| a == 0) {
            return "E/2".into();
        }
        s.iter().enumerate().filter(|(_, &a)| a != 0).map(|(k, &a)| format!("{}{}", self.names[k], AXIS_CHARS[a as usize])).collect()
    }

    /// Parse a label such as `"IzSz"`, `"Sx"` or `"E/2"` into a Pauli string.
    pub fn parse_label(&self, label: &str) -> Result<Vec<Axis>> {
        let mut s = vec![0u8; self.n];
        if label == "E/2" || label == "E" {
            return Ok(s);
        }
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by_key(|&k| std::cmp::Reverse(self.names[k].len()));
        let mut rest = label;
        while !rest.is_empty() {
            let k = order
                .iter()
                .copied()
                .find(|&k| rest.starts_with(self.names[k].as_str()))
                .ok_or_else(|| Error::InvalidParameter(format!("cannot parse label {label:?}")))?;
            rest = &rest[self.names[k].len()..];
            let ax = rest.chars().next().and_then(|ch| match ch {
                'x' => Some(1),
                'y' => Some(2),
                'z' => Some(3),
                _ => None,
            });
            let ax = ax.ok_or_else(|| Error::InvalidParameter(format!("missing axis in label {label:?}")))?;
            if s[k] != 0 {
                return Err(Error::InvalidParameter(format!("spin repeated in label {label:?}")));
            }
            s[k] = ax;
            rest = &rest[1..];
        }
        Ok(s)
    }

    pub fn get(&self, label: &str) -> T {
        self.parse_label(label).ok().and_then(|s| self.terms.get(&s).copied()).unwrap_or_else(T::zero)
    }

    pub fn set(&mut self, label: &str, v: T) -> Result<()> {
        let s = self.parse_label(label)?;
        self.set_string(s, v);
        Ok(())
    }

    pub fn set_string(&mut self, s: Vec<Axis>, v: T) {
        assert_eq!(s.len(), self.n);
        if v == T::zero() {
            self.terms.remove(&s);
        } else {
            self.terms.insert(s, v);
        }
    }

    pub fn terms(&self) -> &BTreeMap<Vec<Axis>, T> {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Labelled coefficients.
    pub fn labelled(&self) -> BTreeMap<String, T> {
        self.terms.iter().map(|(s, &v)| (self.label(s), v)).collect()
    }

    /// Drop the identity component.
    pub fn traceless(&self) -> Self {
        let mut out = self.clone();
        out.terms.remove(&vec![0u8; self.n]);
        out
    }

    pub fn scaled(&self, f: T) -> Self {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v *= f;
        }
        out
    }

    /// Largest coefficient difference against another expansion.
    pub fn max_diff(&self, other: &Self) -> T {
        let mut keys: Vec<&Vec<Axis>> = self.terms.keys().collect();
        keys.extend(other.terms.keys());
        keys.into_iter().fold(T::zero(), |m, k| {
            let a = self.terms.get(k).copied().unwrap_or_else(T::zero);
            let b = other.terms.get(k).copied().unwrap_or_else(T::zero);
            m.max((a - b).abs())
        })
    }

    /// Build from `(label, value)` pairs.
    pub fn from_labels(n: usize, pairs: &[(&str, T)]) -> Result<Self> {
        let mut out = Self::new(n);
        for (l, v) in pairs {
            let s = out.parse_label(l)?;
            let cur = out.terms.get(&s).copied().unwrap_or_else(T::zero);
            out.set_string(s, cur + *v);
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct ExpansionRepr {
    n: usize,
    #[serde(default)]
    names: Option<Vec<String>>,
    terms: BTreeMap<String, f64>,
}

impl<T: Real> Serialize for ProductOperatorExpansion<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ExpansionRepr {
            n: self.n,
            names: Some(self.names.clone()),
            terms: self.labelled().into_iter().map(|(k, v)| (k, v.as_f64())).collect(),
        }
        .serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for ProductOperatorExpansion<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ExpansionRepr::deserialize(d)?;
        let mut out = Self::new(r.n);
        if let Some(names) = r.names {
            out = out.with_names(names).map_err(serde::de::Error::custom)?;
        }
        for (k, v) in r.terms {
            let s = out.parse_label(&k).map_err(serde::de::Error::custom)?;
            out.set_string(s, T::lit(v));
        }
        Ok(out)
    }
}

/// `exp(-i theta (cos(phi) I_x + sin(phi) I_y))` on one spin.
pub fn rotation_xy<T: Real>(theta: T, phi: T) -> Mat<T> {
    let h = T::lit(0.5) * theta;
    let (s, co) = (h.sin(), h.cos());
    let off = Complex::new(T::zero(), -s) * Complex::new(phi.cos(), -phi.sin());
    let off2 = Complex::new(T::zero(), -s) * Complex::new(phi.cos(), phi.sin());
    Mat::from_vec(2, 2, vec![cr(co), off, off2, cr(co)])
}

/// `exp(-i theta I_z)` on one spin.
pub fn rotation_z<T: Real>(theta: T) -> Mat<T> {
    let h = T::lit(0.5) * theta;
    Mat::diag(&[c(h.cos(), -h.sin()), c(h.cos(), h.sin())])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spin_operators_commutation() {
        let n = 2;
        let ix = spin_op::<f64>(n, 0, 1);
        let iy = spin_op::<f64>(n, 0, 2);
        let iz = spin_op::<f64>(n, 0, 3);
        let lhs = ix.commutator(&iy);
        let rhs = iz.scale(c(0.0, 1.0));
        assert!(lhs.max_abs_diff(&rhs) < 1e-15);
    }

    #[test]
    fn two_spin_ground_projector_expansion() {
        // |00><00| = 1/2 (E/2 + Iz + Sz + 2IzSz)
        let mut p = Mat::<f64>::zeros(4, 4);
        p[(0, 0)] = C::one();
        let e = ProductOperatorExpansion::expand(&p).unwrap();
        assert!((e.get("E/2") - 0.5).abs() < 1e-15);
        assert!((e.get("Iz") - 0.5).abs() < 1e-15);
        assert!((e.get("Sz") - 0.5).abs() < 1e-15);
        assert!((e.get("IzSz") - 0.5).abs() < 1e-15);
        assert_eq!(e.terms().len(), 4);
    }

    #[test]
    fn label_round_trip() {
        let e = ProductOperatorExpansion::<f64>::new(3);
        let s = e.parse_label("I1xI3z").unwrap();
        assert_eq!(s, vec![1, 0, 3]);
        assert_eq!(e.label(&s), "I1xI3z");
        assert!(e.parse_label("Qz").is_err());
    }

    #[test]
    fn embed_matches_kron() {
        let x = crate::linalg::pauli::<f64>(1);
        let z = crate::linalg::pauli::<f64>(3);
        let e = embed(&z.kron(&x), &[0, 2], 3).unwrap();
        let k = z.kron(&Mat::identity(2)).kron(&x);
        assert!(e.max_abs_diff(&k) < 1e-15);
        // reversed target order swaps the factors
        let e2 = embed(&x.kron(&z), &[2, 0], 3).unwrap();
        assert!(e2.max_abs_diff(&k) < 1e-15);
    }

    #[test]
    fn rotation_matches_exponential() {
        let th = 1.1f64;
        let ph = 0.4f64;
        let h = &crate::linalg::pauli::<f64>(1).scale_real(0.5 * ph.cos()) + &crate::linalg::pauli::<f64>(2).scale_real(0.5 * ph.sin());
        assert!(rotation_xy(th, ph).max_abs_diff(&h.expm_hermitian(th)) < 1e-14);
        let hz = crate::linalg::pauli::<f64>(3).scale_real(0.5);
        assert!(rotation_z(th).max_abs_diff(&hz.expm_hermitian(th)) < 1e-14);
    }
}
