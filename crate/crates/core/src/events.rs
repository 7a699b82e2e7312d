//! Pulse-sequence events and their density-matrix simulation.

use serde::{Deserialize, Serialize};

use crate::channels::{crush_gradient, projective_dephase};
use crate::error::{Error, Result};
use crate::gates::{standard_gate, GateSpec};
use crate::linalg::Mat;
use crate::scalar::{cis, Real};
use crate::spin::operators::{embed, rotation_xy, rotation_z, spin_op};
use crate::spin::{free_hamiltonian, free_propagator, DensityMatrix, SpinSystem};

/// One step of a pulse sequence. Angles are in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "")]
pub enum Event<T: Real> {
    /// Simultaneous rotation of the listed spins by `angle` about the xy
    /// axis at `phase`. Zero duration means an ideal hard pulse; otherwise
    /// free evolution runs during the pulse.
    Pulse {
        spins: Vec<usize>,
        angle: T,
        phase: T,
        #[serde(default)]
        duration_s: T,
    },
    Delay {
        duration_s: T,
    },
    /// Rotation of the spin's frame, applied as `exp(-i angle Iz)`.
    FrameZ {
        spin: usize,
        angle: T,
    },
    /// Bookkeeping factor `e^{i angle}`; no effect on states.
    GlobalPhase {
        angle: T,
    },
    /// Ideal gate applied instantaneously.
    Gate {
        gate: GateSpec<T>,
    },
    /// Gradient crusher: removes coherences (see `channels::crush_gradient`).
    Crush {
        #[serde(default = "yes")]
        preserve_zero_quantum: bool,
        /// Signed gradient area, only used for echo checks.
        #[serde(default = "unit")]
        area: T,
    },
    /// Projective measurement (dephasing) of the listed spins, or all.
    Measure {
        #[serde(default)]
        spins: Option<Vec<usize>>,
    },
}

fn yes() -> bool {
    true
}

fn unit<T: Real>() -> T {
    T::one()
}

impl<T: Real> Event<T> {
    pub fn is_unitary(&self) -> bool {
        !matches!(self, Event::Crush { .. } | Event::Measure { .. })
    }

    pub fn duration(&self) -> T {
        match self {
            Event::Pulse { duration_s, .. } => *duration_s,
            Event::Delay { duration_s } => *duration_s,
            _ => T::zero(),
        }
    }
}

/// Runs event lists on a spin system. Free evolution is computed in
/// rotating frames at `offsets_hz`; the default puts each spin on
/// resonance, so only couplings act during delays.
#[derive(Clone, Debug)]
pub struct Simulator<T: Real> {
    pub sys: SpinSystem<T>,
    pub offsets_hz: Vec<T>,
}

impl<T: Real> Simulator<T> {
    pub fn new(sys: &SpinSystem<T>) -> Self {
        Simulator { sys: sys.clone(), offsets_hz: sys.shifts() }
    }

    pub fn with_offsets(sys: &SpinSystem<T>, offsets_hz: Vec<T>) -> Result<Self> {
        if offsets_hz.len() != sys.n() {
            return Err(Error::DimensionMismatch("one offset per spin".into()));
        }
        Ok(Simulator { sys: sys.clone(), offsets_hz })
    }

    pub fn n(&self) -> usize {
        self.sys.n()
    }

    fn check_spins(&self, spins: &[usize]) -> Result<()> {
        let n = self.n();
        match spins.iter().find(|&&k| k >= n) {
            Some(&k) => Err(Error::SpinIndex { index: k, n }),
            None => Ok(()),
        }
    }

    /// Propagator of a single unitary event.
    pub fn event_propagator(&self, ev: &Event<T>) -> Result<Mat<T>> {
        let n = self.n();
        let d = 1usize << n;
        match ev {
            Event::Pulse { spins, angle, phase, duration_s } => {
                self.check_spins(spins)?;
                if *duration_s < T::zero() {
                    return Err(Error::InvalidParameter("negative pulse duration".into()));
                }
                if *duration_s == T::zero() {
                    let r = rotation_xy(*angle, *phase);
                    let mut u = Mat::identity(d);
                    for &k in spins {
                        u = embed(&r, &[k], n)?.matmul(&u);
                    }
                    Ok(u)
                } else {
                    let w = *angle / *duration_s;
                    let mut h = free_hamiltonian(&self.sys, &self.offsets_hz)?;
                    for &k in spins {
                        h = &h + &spin_op(n, k, 1).scale_real(w * phase.cos());
                        h = &h + &spin_op(n, k, 2).scale_real(w * phase.sin());
                    }
                    Ok(h.expm_hermitian(*duration_s))
                }
            }
            Event::Delay { duration_s } => {
                if *duration_s < T::zero() {
                    return Err(Error::InvalidParameter("negative delay".into()));
                }
                free_propagator(&self.sys, &self.offsets_hz, *duration_s)
            }
            Event::FrameZ { spin, angle } => {
                self.check_spins(&[*spin])?;
                embed(&rotation_z(*angle), &[*spin], n)
            }
            Event::GlobalPhase { angle } => Ok(Mat::identity(d).scale(cis(*angle))),
            Event::Gate { gate } => standard_gate(gate, n),
            Event::Crush { .. } | Event::Measure { .. } => Err(Error::InvalidParameter("non-unitary event in a propagator".into())),
        }
    }

    /// Ordered product of the event propagators (first event acts first).
    pub fn propagator(&self, events: &[Event<T>]) -> Result<Mat<T>> {
        let mut u = Mat::identity(1 << self.n());
        for ev in events {
            u = self.event_propagator(ev)?.matmul(&u);
        }
        Ok(u)
    }

    pub fn run(&self, rho: &DensityMatrix<T>, events: &[Event<T>]) -> Result<DensityMatrix<T>> {
        if rho.num_spins() != self.n() {
            return Err(Error::DimensionMismatch("state does not match spin system".into()));
        }
        let mut r = rho.clone();
        for ev in events {
            r = self.apply(&r, ev)?;
        }
        Ok(r)
    }

    pub fn apply(&self, rho: &DensityMatrix<T>, ev: &Event<T>) -> Result<DensityMatrix<T>> {
        match ev {
            Event::Crush { preserve_zero_quantum, .. } => {
                Ok(DensityMatrix::new_unchecked(crush_gradient(rho.matrix(), &self.sys, *preserve_zero_quantum)?))
            }
            Event::Measure { spins } => {
                let all: Vec<usize> = (0..self.n()).collect();
                let s = spins.as_deref().unwrap_or(&all);
                self.check_spins(s)?;
                Ok(DensityMatrix::new_unchecked(projective_dephase(rho.matrix(), Some(s))?))
            }
            Event::GlobalPhase { .. } => Ok(rho.clone()),
            _ => Ok(rho.evolve_unitary(&self.event_propagator(ev)?)),
        }
    }

    /// Apply the unitary parts of `events` to an arbitrary operator (for
    /// example a deviation such as `Iz + Sz`), crushing where requested.
    pub fn run_operator(&self, op: &Mat<T>, events: &[Event<T>]) -> Result<Mat<T>> {
        let mut m = op.clone();
        for ev in events {
            m = match ev {
                Event::Crush { preserve_zero_quantum, .. } => crush_gradient(&m, &self.sys, *preserve_zero_quantum)?,
                Event::Measure { spins } => {
                    let all: Vec<usize> = (0..self.n()).collect();
                    projective_dephase(&m, Some(spins.as_deref().unwrap_or(&all)))?
                }
                Event::GlobalPhase { .. } => m,
                _ => self.event_propagator(ev)?.conjugate(&m),
            };
        }
        Ok(m)
    }
}

/// Hard pulse on one spin.
pub fn pulse<T: Real>(spin: usize, angle: T, phase: T) -> Event<T> {
    Event::Pulse { spins: vec![spin], angle, phase, duration_s: T::zero() }
}

/// Hard pulse on several spins.
pub fn pulse_on<T: Real>(spins: &[usize], angle: T, phase: T) -> Event<T> {
    Event::Pulse { spins: spins.to_vec(), angle, phase, duration_s: T::zero() }
}

pub fn delay<T: Real>(t: T) -> Event<T> {
    Event::Delay { duration_s: t }
}

pub fn gate<T: Real>(g: GateSpec<T>) -> Event<T> {
    Event::Gate { gate: g }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_pulse_on_resonance_matches_hard_pulse() {
        let sys = SpinSystem::<f64>::homonuclear(&[0.0], 0.0, 1e-5, 1.0, 1.0).unwrap();
        let sim = Simulator::new(&sys);
        let hard = sim.event_propagator(&pulse(0, 1.2, 0.3)).unwrap();
        let soft = sim.event_propagator(&Event::Pulse { spins: vec![0], angle: 1.2, phase: 0.3, duration_s: 1e-4 }).unwrap();
        assert!(hard.max_abs_diff(&soft) < 1e-12);
    }

    #[test]
    fn crush_is_rejected_in_propagator() {
        let sys = SpinSystem::<f64>::homonuclear(&[0.0], 0.0, 1e-5, 1.0, 1.0).unwrap();
        let sim = Simulator::new(&sys);
        let ev = Event::Crush { preserve_zero_quantum: true, area: 1.0 };
        assert!(sim.propagator(&[ev]).is_err());
    }
}
