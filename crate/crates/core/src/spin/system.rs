use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest register the dense simulator accepts.
pub const MAX_SPINS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Spin<T: Real> {
    pub label: String,
    pub species: String,
    /// Offset from the species reference frequency.
    pub shift_hz: T,
    /// Thermal polarisation `delta` (high-temperature deviation scale).
    pub polarisation: T,
    pub t1_s: T,
    pub t2_s: T,
}

/// Weakly coupled spin register: shifts, polarisations, relaxation times
/// and the symmetric scalar-coupling matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SpinSystem<T: Real> {
    pub spins: Vec<Spin<T>>,
    pub j_hz: Vec<Vec<T>>,
}

impl<T: Real> SpinSystem<T> {
    pub fn new(spins: Vec<Spin<T>>, j_hz: Vec<Vec<T>>) -> Result<Self> {
        let s = SpinSystem { spins, j_hz };
        s.validate()?;
        Ok(s)
    }

    /// Homonuclear register with a uniform coupling between all pairs.
    pub fn homonuclear(shifts_hz: &[T], j_hz: T, polarisation: T, t1_s: T, t2_s: T) -> Result<Self> {
        let n = shifts_hz.len();
        let names = crate::spin::operators::default_names(n);
        let spins = shifts_hz
            .iter()
            .zip(names)
            .map(|(&shift_hz, label)| Spin { label, species: "1H".into(), shift_hz, polarisation, t1_s, t2_s })
            .collect();
        let j = (0..n).map(|a| (0..n).map(|b| if a == b { T::zero() } else { j_hz }).collect()).collect();
        Self::new(spins, j)
    }

    /// Two-spin heteronuclear pair (`1H`, `13C`) with the proton
    /// polarisation four times larger.
    pub fn heteronuclear_pair(j_hz: T, carbon_polarisation: T) -> Result<Self> {
        let mk = |label: &str, species: &str, pol: T| Spin {
            label: label.into(),
            species: species.into(),
            shift_hz: T::zero(),
            polarisation: pol,
            t1_s: T::lit(10.0),
            t2_s: T::lit(1.0),
        };
        Self::new(
            vec![mk("I", "1H", carbon_polarisation * T::lit(4.0)), mk("S", "13C", carbon_polarisation)],
            vec![vec![T::zero(), j_hz], vec![j_hz, T::zero()]],
        )
    }

    pub fn n(&self) -> usize {
        self.spins.len()
    }

    pub fn j(&self, a: usize, b: usize) -> T {
        self.j_hz[a][b]
    }

    pub fn labels(&self) -> Vec<String> {
        self.spins.iter().map(|s| s.label.clone()).collect()
    }

    pub fn is_homonuclear(&self) -> bool {
        self.spins.windows(2).all(|w| w[0].species == w[1].species)
    }

    /// Species index per spin, in order of first appearance.
    pub fn species_groups(&self) -> Vec<usize> {
        let mut seen: Vec<&str> = Vec::new();
        self.spins
            .iter()
            .map(|s| match seen.iter().position(|x| *x == s.species) {
                Some(i) => i,
                None => {
                    seen.push(&s.species);
                    seen.len() - 1
                }
            })
            .collect()
    }

    pub fn shifts(&self) -> Vec<T> {
        self.spins.iter().map(|s| s.shift_hz).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 || n > MAX_SPINS {
            return Err(Error::InvalidSystem(format!("{n} spins (supported 1..={MAX_SPINS})")));
        }
        if self.j_hz.len() != n || self.j_hz.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidSystem("coupling matrix shape does not match spin count".into()));
        }
        for a in 0..n {
            if self.j_hz[a][a] != T::zero() {
                return Err(Error::InvalidSystem(format!("nonzero self-coupling on spin {a}")));
            }
            for b in 0..n {
                let (x, y) = (self.j_hz[a][b], self.j_hz[b][a]);
                if !x.is_finite() || (x - y).abs() > T::tight_tol() * (T::one() + x.abs()) {
                    return Err(Error::InvalidSystem(format!("coupling matrix not symmetric at ({a},{b})")));
                }
            }
        }
        for (i, s) in self.spins.iter().enumerate() {
            if !(s.t2_s > T::zero()) || !(s.t1_s >= s.t2_s) {
                return Err(Error::InvalidSystem(format!("spin {i}: need T1 >= T2 > 0")));
            }
            if !s.shift_hz.is_finite() || !s.polarisation.is_finite() || s.polarisation.abs() > T::one() {
                return Err(Error::InvalidSystem(format!("spin {i}: bad shift or polarisation")));
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sys: Self = serde_json::from_str(s).map_err(|e| Error::Schema(e.to_string()))?;
        sys.validate()?;
        Ok(sys)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spin system serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetric_and_bad_relaxation() {
        let mut s = SpinSystem::<f64>::homonuclear(&[0.0, 10.0], 5.0, 1e-5, 2.0, 1.0).unwrap();
        s.j_hz[0][1] = 6.0;
        assert!(s.validate().is_err());
        let bad = SpinSystem::<f64>::homonuclear(&[0.0], 0.0, 1e-5, 1.0, 2.0);
        assert!(bad.is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = SpinSystem::<f64>::heteronuclear_pair(200.0, 1e-5).unwrap();
        let back = SpinSystem::<f64>::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
        assert_eq!(back.species_groups(), vec![0, 1]);
    }
}
