//! Kraus channels for relaxation, gradient crushers and projective
//! dephasing, plus relaxation interleaved with pulse sequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Event, Simulator};
use crate::linalg::Mat;
use crate::scalar::{cis, cr, Real, C};
use crate::spin::operators::bit;
use crate::spin::{DensityMatrix, SpinSystem};

/// Completely positive trace-preserving map given by Kraus operators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct KrausChannel<T: Real> {
    pub operators: Vec<Mat<T>>,
}

impl<T: Real> KrausChannel<T> {
    /// Validated constructor: `sum E^dagger E = 1` within `1e-12`.
    pub fn new(operators: Vec<Mat<T>>) -> Result<Self> {
        let first = operators.first().ok_or_else(|| Error::InvalidParameter("no Kraus operators".into()))?;
        let d = first.rows();
        let mut acc = Mat::zeros(d, d);
        for e in &operators {
            if e.rows() != d || e.cols() != d {
                return Err(Error::DimensionMismatch("Kraus operators of different sizes".into()));
            }
            acc = &acc + &e.adjoint().matmul(e);
        }
        let dev = acc.max_abs_diff(&Mat::identity(d));
        if dev > T::tight_tol() {
            return Err(Error::NotTracePreserving(dev.as_f64()));
        }
        Ok(KrausChannel { operators })
    }

    pub fn dim(&self) -> usize {
        self.operators[0].rows()
    }

    pub fn apply_matrix(&self, m: &Mat<T>) -> Mat<T> {
        let d = m.rows();
        let mut out = Mat::zeros(d, d);
        for e in &self.operators {
            out = &out + &e.conjugate(m);
        }
        out
    }

    pub fn apply(&self, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch("channel does not match state".into()));
        }
        Ok(DensityMatrix::new_unchecked(self.apply_matrix(rho.matrix()).hermitian_part()))
    }

    /// Apply a single-spin channel to spin `k` of an `n`-spin operator.
    pub fn apply_on_spin(&self, m: &Mat<T>, k: usize) -> Result<Mat<T>> {
        if self.dim() != 2 {
            return Err(Error::DimensionMismatch("local application needs a single-spin channel".into()));
        }
        let n = m.rows().trailing_zeros() as usize;
        if k >= n {
            return Err(Error::SpinIndex { index: k, n });
        }
        let d = m.rows();
        let mut out = Mat::zeros(d, d);
        for e in &self.operators {
            out = &out + &local_conjugate(m, e, k, n);
        }
        Ok(out)
    }
}

/// `K_k M K_k^dagger` for a 2x2 `K` on spin `k`, in O(d^2).
fn local_conjugate<T: Real>(m: &Mat<T>, kop: &Mat<T>, k: usize, n: usize) -> Mat<T> {
    let d = m.rows();
    let mask = 1usize << (n - 1 - k);
    // left multiply
    let mut left = Mat::zeros(d, d);
    for r in 0..d {
        let br = bit(r, k, n);
        let r0 = r & !mask;
        let r1 = r | mask;
        for c in 0..d {
            left[(r, c)] = kop[(br, 0)] * m[(r0, c)] + kop[(br, 1)] * m[(r1, c)];
        }
    }
    // right multiply by K^dagger
    let mut out = Mat::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            let bc = bit(c, k, n);
            let c0 = c & !mask;
            let c1 = c | mask;
            out[(r, c)] = left[(r, c0)] * kop[(bc, 0)].conj() + left[(r, c1)] * kop[(bc, 1)].conj();
        }
    }
    out
}

fn m2<T: Real>(a: T, b: T, c: T, d: T) -> Mat<T> {
    Mat::from_vec(2, 2, vec![cr(a), cr(b), cr(c), cr(d)])
}

/// Phase damping with `lambda = (1 + e^{-t/T2}) / 2`:
/// `E0 = sqrt(lambda) 1`, `E1 = sqrt(1 - lambda) Z`.
pub fn phase_damping<T: Real>(t: T, t2: T) -> Result<KrausChannel<T>> {
    if t < T::zero() || !(t2 > T::zero()) {
        return Err(Error::InvalidParameter("phase damping needs t >= 0 and T2 > 0".into()));
    }
    let lam = T::lit(0.5) * (T::one() + (-t / t2).exp());
    phase_damping_lambda(lam)
}

fn phase_damping_lambda<T: Real>(lam: T) -> Result<KrausChannel<T>> {
    let a = lam.sqrt();
    let b = (T::one() - lam).max(T::zero()).sqrt();
    let z = T::zero();
    KrausChannel::new(vec![m2(a, z, z, a), m2(b, z, z, -b)])
}

/// Generalized amplitude damping towards `E/2 + pol Iz` with
/// `gamma = 1 - e^{-t/T1}` and `p = (1 + pol)/2`.
pub fn generalized_amplitude_damping<T: Real>(t: T, t1: T, pol: T) -> Result<KrausChannel<T>> {
    if t < T::zero() || !(t1 > T::zero()) || pol.abs() > T::one() {
        return Err(Error::InvalidParameter("amplitude damping needs t >= 0, T1 > 0, |pol| <= 1".into()));
    }
    let g = T::one() - (-t / t1).exp();
    let p = T::lit(0.5) * (T::one() + pol);
    let (sp, sq) = (p.sqrt(), (T::one() - p).sqrt());
    let (sg, s1g) = (g.sqrt(), (T::one() - g).sqrt());
    let z = T::zero();
    KrausChannel::new(vec![m2(sp, z, z, sp * s1g), m2(z, sp * sg, z, z), m2(sq * s1g, z, z, sq), m2(z, z, sq * sg, z)])
}

/// Channels for spin `k` over duration `t`: amplitude damping followed by
/// phase damping at the pure-dephasing rate `1/T2 - 1/(2 T1)`.
pub fn spin_relaxation_channels<T: Real>(sys: &SpinSystem<T>, k: usize, t: T) -> Result<[KrausChannel<T>; 2]> {
    let s = &sys.spins[k];
    let rate = T::one() / s.t2_s - T::lit(0.5) / s.t1_s;
    if rate < -T::tight_tol() {
        return Err(Error::InvalidSystem(format!("spin {k}: T2 exceeds 2 T1")));
    }
    let gad = generalized_amplitude_damping(t, s.t1_s, s.polarisation)?;
    let lam = T::lit(0.5) * (T::one() + (-t * rate.max(T::zero())).exp());
    Ok([gad, phase_damping_lambda(lam)?])
}

/// Relax every spin independently for time `t`.
pub fn relax<T: Real>(rho: &DensityMatrix<T>, sys: &SpinSystem<T>, t: T) -> Result<DensityMatrix<T>> {
    if rho.num_spins() != sys.n() {
        return Err(Error::DimensionMismatch("state does not match spin system".into()));
    }
    let mut m = rho.matrix().clone();
    for k in 0..sys.n() {
        m = relax_spin_matrix(&m, sys, k, t)?;
    }
    Ok(DensityMatrix::new_unchecked(m.hermitian_part()))
}

fn relax_spin_matrix<T: Real>(m: &Mat<T>, sys: &SpinSystem<T>, k: usize, t: T) -> Result<Mat<T>> {
    let [gad, pd] = spin_relaxation_channels(sys, k, t)?;
    let m = gad.apply_on_spin(m, k)?;
    pd.apply_on_spin(&m, k)
}

/// Spin `k` magnetic quantum number doubled: `+1` for `|0>`, `-1` for `|1>`.
#[inline]
fn m2x(j: usize, k: usize, n: usize) -> i64 {
    if bit(j, k, n) == 0 {
        1
    } else {
        -1
    }
}

/// Analytic gradient crusher. With `preserve_zero_quantum` every element
/// whose coherence order vanishes within each species survives (for a
/// homonuclear system this keeps populations and zero-quantum
/// coherences); otherwise only populations survive.
pub fn crush_gradient<T: Real>(m: &Mat<T>, sys: &SpinSystem<T>, preserve_zero_quantum: bool) -> Result<Mat<T>> {
    let n = sys.n();
    if m.rows() != 1 << n {
        return Err(Error::DimensionMismatch("operator does not match spin system".into()));
    }
    let groups = sys.species_groups();
    let ng = groups.iter().copied().max().unwrap_or(0) + 1;
    let d = m.rows();
    Ok(Mat::from_fn(d, d, |r, c| {
        if r == c {
            return m[(r, c)];
        }
        if !preserve_zero_quantum {
            return C::new(T::zero(), T::zero());
        }
        let mut orders = vec![0i64; ng];
        for k in 0..n {
            orders[groups[k]] += m2x(r, k, n) - m2x(c, k, n);
        }
        if orders.iter().all(|&o| o == 0) {
            m[(r, c)]
        } else {
            C::new(T::zero(), T::zero())
        }
    }))
}

/// One step of an explicit gradient ensemble.
#[derive(Clone, Debug)]
pub enum EnsembleOp<T: Real> {
    /// Gradient with signed area; sample `s` gets phase `area * phi_s`
    /// per unit of weighted coherence order.
    Gradient {
        area: T,
    },
    Unitary(Mat<T>),
}

/// Average of a sequence over `samples` equally spaced gradient phases.
/// `weights[k]` is the integer gradient sensitivity of spin `k`
/// (gyromagnetic ratio in arbitrary units).
pub fn gradient_ensemble<T: Real>(m: &Mat<T>, weights: &[i64], ops: &[EnsembleOp<T>], samples: usize) -> Result<Mat<T>> {
    let d = m.rows();
    let n = d.trailing_zeros() as usize;
    if weights.len() != n || samples == 0 {
        return Err(Error::DimensionMismatch("one gradient weight per spin and at least one sample".into()));
    }
    let total_m: Vec<i64> = (0..d).map(|j| (0..n).map(|k| weights[k] * m2x(j, k, n)).sum()).collect();
    let mut acc = Mat::zeros(d, d);
    let two_pi = T::lit(2.0) * T::PI();
    for s in 0..samples {
        let phi = two_pi * T::from_usize_lossy(s) / T::from_usize_lossy(samples);
        let mut x = m.clone();
        for op in ops {
            match op {
                EnsembleOp::Gradient { area } => {
                    // exp(-i phi area sum w Iz): element (r,c) gets exp(-i phi area (M_r - M_c)/2)
                    for r in 0..d {
                        for c in 0..d {
                            let dm = T::lit((total_m[r] - total_m[c]) as f64 * 0.5);
                            x[(r, c)] = x[(r, c)] * cis(-phi * *area * dm);
                        }
                    }
                }
                EnsembleOp::Unitary(u) => x = u.conjugate(&x),
            }
        }
        acc = &acc + &x;
    }
    Ok(acc.scale_real(T::one() / T::from_usize_lossy(samples)))
}

/// Ensemble version of [`crush_gradient`]: 64 (or more) gradient phases
/// with integer weights chosen so that the surviving coherences match the
/// analytic model.
pub fn crush_ensemble<T: Real>(m: &Mat<T>, sys: &SpinSystem<T>, preserve_zero_quantum: bool) -> Result<Mat<T>> {
    let n = sys.n();
    let groups = sys.species_groups();
    let weights: Vec<i64> = if preserve_zero_quantum {
        // species weights 1, 2n+1, (2n+1)^2, ... keep the per-species
        // orders from cancelling each other
        groups.iter().map(|&g| ((2 * n + 1) as i64).pow(g as u32)).collect()
    } else {
        (0..n).map(|k| 3i64.pow(k as u32)).collect()
    };
    let max_order: i64 = weights.iter().sum();
    let samples = (2 * max_order as usize + 1).max(64);
    gradient_ensemble(m, &weights, &[EnsembleOp::Gradient { area: T::one() }], samples)
}

/// Zero the coherences between different outcomes of the measured spins
/// (all spins when `qubits` is `None`).
pub fn projective_dephase<T: Real>(m: &Mat<T>, qubits: Option<&[usize]>) -> Result<Mat<T>> {
    let d = m.rows();
    let n = d.trailing_zeros() as usize;
    let mask = match qubits {
        None => d - 1,
        Some(q) => {
            let mut mask = 0usize;
            for &k in q {
                if k >= n {
                    return Err(Error::SpinIndex { index: k, n });
                }
                mask |= 1 << (n - 1 - k);
            }
            mask
        }
    };
    Ok(Mat::from_fn(d, d, |r, c| if (r ^ c) & mask == 0 { m[(r, c)] } else { C::new(T::zero(), T::zero()) }))
}

/// One relaxation segment applied during a segmented run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Flush<T: Real> {
    pub spin: usize,
    pub duration_s: T,
}

/// Run an event list with relaxation applied in segments: delays evolve
/// coherently and accumulate pending relaxation time per spin; the pending
/// time of a spin is applied as a channel just before a pulse or gate
/// touches it, before crushers and measurements, and at the end.
pub fn segmented_relaxation_run<T: Real>(
    sim: &Simulator<T>,
    events: &[Event<T>],
    rho: &DensityMatrix<T>,
) -> Result<(DensityMatrix<T>, Vec<Flush<T>>)> {
    let n = sim.n();
    if rho.num_spins() != n {
        return Err(Error::DimensionMismatch("state does not match spin system".into()));
    }
    let mut pending = vec![T::zero(); n];
    let mut log = Vec::new();
    let mut m = rho.matrix().clone();
    let flush = |m: &mut Mat<T>, k: usize, pending: &mut Vec<T>, log: &mut Vec<Flush<T>>| -> Result<()> {
        if pending[k] > T::zero() {
            *m = relax_spin_matrix(m, &sim.sys, k, pending[k])?;
            log.push(Flush { spin: k, duration_s: pending[k] });
            pending[k] = T::zero();
        }
        Ok(())
    };
    for ev in events {
        match ev {
            Event::Delay { duration_s } => {
                for p in pending.iter_mut() {
                    *p += *duration_s;
                }
                m = sim.event_propagator(ev)?.conjugate(&m);
            }
            Event::Pulse { spins, duration_s, .. } => {
                for &k in spins {
                    if k >= n {
                        return Err(Error::SpinIndex { index: k, n });
                    }
                    flush(&mut m, k, &mut pending, &mut log)?;
                }
                m = sim.event_propagator(ev)?.conjugate(&m);
                for p in pending.iter_mut() {
                    *p += *duration_s;
                }
            }
            Event::Gate { gate } => {
                for &k in &gate.targets {
                    if k >= n {
                        return Err(Error::SpinIndex { index: k, n });
                    }
                    flush(&mut m, k, &mut pending, &mut log)?;
                }
                m = sim.event_propagator(ev)?.conjugate(&m);
            }
            Event::FrameZ { .. } => m = sim.event_propagator(ev)?.conjugate(&m),
            Event::GlobalPhase { .. } => {}
            Event::Crush { .. } | Event::Measure { .. } => {
                for k in 0..n {
                    flush(&mut m, k, &mut pending, &mut log)?;
                }
                m = sim.apply(&DensityMatrix::new_unchecked(m), ev)?.into_matrix();
            }
        }
    }
    for k in 0..n {
        flush(&mut m, k, &mut pending, &mut log)?;
    }
    Ok((DensityMatrix::new_unchecked(m.hermitian_part()), log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::operators::embed;

    fn random_state(n: usize, seed: u64) -> DensityMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = 1 << n;
        let a = Mat::from_fn(d, d, |_, _| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let p = a.matmul(&a.adjoint());
        let tr = p.trace().re;
        DensityMatrix::from_matrix(p.scale_real(1.0 / tr)).unwrap()
    }

    #[test]
    fn local_application_matches_embedding() {
        let ch = generalized_amplitude_damping(0.3, 1.0, 0.4).unwrap();
        let rho = random_state(3, 1);
        let local = ch.apply_on_spin(rho.matrix(), 1).unwrap();
        let mut full = Mat::zeros(8, 8);
        for e in &ch.operators {
            full = &full + &embed(e, &[1], 3).unwrap().conjugate(rho.matrix());
        }
        assert!(local.max_abs_diff(&full) < 1e-14);
    }

    #[test]
    fn phase_damping_decays_coherence() {
        let ch = phase_damping(0.5, 1.0).unwrap();
        let rho = random_state(1, 2);
        let out = ch.apply(&rho).unwrap();
        let want = rho.matrix()[(0, 1)] * (-0.5f64).exp();
        assert!((out.matrix()[(0, 1)] - want).norm() < 1e-14);
    }

    #[test]
    fn rejects_non_trace_preserving() {
        let m = Mat::<f64>::identity(2).scale_real(0.9);
        assert!(matches!(KrausChannel::new(vec![m]), Err(Error::NotTracePreserving(_))));
    }

    #[test]
    fn crush_matches_ensemble() {
        let sys = SpinSystem::<f64>::homonuclear(&[0.0, 1.0, 2.0], 5.0, 1e-5, 1.0, 1.0).unwrap();
        let rho = random_state(3, 5);
        for zq in [true, false] {
            let a = crush_gradient(rho.matrix(), &sys, zq).unwrap();
            let b = crush_ensemble(rho.matrix(), &sys, zq).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-12, "zq={zq}");
        }
    }

    #[test]
    fn gradient_echo_refocuses_in_ensemble() {
        let rho = random_state(2, 9);
        let ops = [EnsembleOp::Gradient { area: 1.0 }, EnsembleOp::Gradient { area: -1.0 }];
        let out = gradient_ensemble(rho.matrix(), &[1, 1], &ops, 64).unwrap();
        assert!(out.max_abs_diff(rho.matrix()) < 1e-12);
    }

    #[test]
    fn dephase_subset() {
        let rho = random_state(2, 4);
        let out = projective_dephase(rho.matrix(), Some(&[0])).unwrap();
        assert_eq!(out[(0, 2)], C::new(0.0, 0.0));
        assert_eq!(out[(0, 1)], rho.matrix()[(0, 1)]);
    }
}
