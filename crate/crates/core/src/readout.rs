//! NMR observables: stick spectra, FID synthesis, eigenstate readout from
//! line phases, and one- and two-spin state tomography.

use std::collections::BTreeMap;

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lstsq, Mat};
use crate::scalar::{cis, cr, Real, C};
use crate::spin::operators::{bit, embed, rotation_xy, Axis};
use crate::spin::{DensityMatrix, DeviationDensityMatrix, ProductOperatorExpansion, SpinSystem};

/// One line of a stick spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SpectrumLine<T: Real> {
    pub frequency_hz: T,
    /// Complex amplitude; positive real is absorption.
    pub amplitude: C<T>,
    pub spin: usize,
    /// States of the other spins, most significant first.
    pub partner_state: String,
}

/// Single-quantum lines of `m` (a density or deviation matrix). The line of
/// spin `k` with partners in state `s` has amplitude `m[c][r]`, where `r`
/// and `c` differ only in spin `k` (`0` in `r`), and frequency
/// `nu_k + sum_j J_kj m_j` with `m_j = +-1/2`.
pub fn observable_lines<T: Real>(m: &Mat<T>, sys: &SpinSystem<T>, species: Option<&str>) -> Result<Vec<SpectrumLine<T>>> {
    let n = sys.n();
    let d = 1usize << n;
    if m.rows() != d || m.cols() != d {
        return Err(Error::DimensionMismatch("operator does not match spin system".into()));
    }
    let floor = m.max_abs().max(T::min_positive_value()) * T::epsilon() * T::lit(64.0);
    let half = T::lit(0.5);
    let mut lines = Vec::new();
    for k in 0..n {
        if species.is_some_and(|s| sys.spins[k].species != s) {
            continue;
        }
        let mask = 1usize << (n - 1 - k);
        for r in (0..d).filter(|&r| r & mask == 0) {
            let amp = m[(r | mask, r)];
            if amp.norm() <= floor {
                continue;
            }
            let mut f = sys.spins[k].shift_hz;
            let mut partner = String::new();
            for j in (0..n).filter(|&j| j != k) {
                let b = bit(r, j, n);
                f += sys.j(k, j) * if b == 0 { half } else { -half };
                partner.push(if b == 0 { '0' } else { '1' });
            }
            lines.push(SpectrumLine { frequency_hz: f, amplitude: amp, spin: k, partner_state: partner });
        }
    }
    Ok(lines)
}

/// Lorentzian FID `sum_l a_l exp((i 2 pi f_l - 1/T2*) t)` sampled at
/// `t = k * dwell`.
pub fn synthesize_fid<T: Real>(lines: &[SpectrumLine<T>], t2_star_s: T, npoints: usize, dwell_s: T) -> Result<Vec<C<T>>> {
    if npoints == 0 || !npoints.is_power_of_two() {
        return Err(Error::InvalidParameter("number of points must be a power of two".into()));
    }
    if !(dwell_s > T::zero()) || !(t2_star_s > T::zero()) {
        return Err(Error::InvalidParameter("dwell and T2* must be positive".into()));
    }
    let nyquist = T::lit(0.5) / dwell_s;
    if let Some(l) = lines.iter().find(|l| l.frequency_hz.abs() >= nyquist) {
        return Err(Error::Nyquist { freq: l.frequency_hz.as_f64(), nyquist: nyquist.as_f64() });
    }
    let two_pi = T::lit(2.0) * T::PI();
    Ok((0..npoints)
        .map(|k| {
            let t = T::from_usize_lossy(k) * dwell_s;
            let decay = cr((-t / t2_star_s).exp());
            lines.iter().fold(C::new(T::zero(), T::zero()), |acc, l| acc + l.amplitude * cis(two_pi * l.frequency_hz * t) * decay)
        })
        .collect())
}

/// One point of a spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub frequency_hz: f64,
    pub value: Complex<f64>,
}

/// Discrete Fourier transform of an FID, ordered from `-nyquist` upwards
/// and scaled by the dwell time so peak integrals track line amplitudes.
pub fn spectrum<T: Real>(fid: &[C<T>], dwell_s: T) -> Vec<SpectrumPoint> {
    let n = fid.len();
    let dwell = dwell_s.as_f64();
    let mut buf: Vec<Complex<f64>> = fid.iter().map(|z| Complex::new(z.re.as_f64(), z.im.as_f64())).collect();
    if n == 0 {
        return Vec::new();
    }
    // half weight on the first point keeps the real part a pure Lorentzian
    buf[0] *= 0.5;
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = 1.0 / (n as f64 * dwell);
    (0..n)
        .map(|i| {
            let k = (i + n / 2) % n;
            let f = (i as f64 - (n / 2) as f64) * df;
            SpectrumPoint { frequency_hz: f, value: buf[k] * dwell }
        })
        .collect()
}

/// Spectrum as CSV rows `frequency_hz,real,imag`.
pub fn spectrum_csv(points: &[SpectrumPoint]) -> String {
    let mut s = String::from("frequency_hz,real,imag\n");
    for p in points {
        s.push_str(&format!("{},{},{}\n", p.frequency_hz, p.value.re, p.value.im));
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutMode {
    /// 90y on every spin; each spin's phase gives its bit.
    Homonuclear,
    /// 90y on spin 0 of a pair; its phase gives bit 0 and the surviving
    /// doublet line gives bit 1.
    Heteronuclear,
}

fn readout_pulses<T: Real>(n: usize, spins: &[usize]) -> Result<Mat<T>> {
    let r = rotation_xy(T::FRAC_PI_2(), T::FRAC_PI_2());
    let mut u = Mat::identity(1 << n);
    for &k in spins {
        u = embed(&r, &[k], n)?.matmul(&u);
    }
    Ok(u)
}

/// Read a computational basis state from NMR line phases, using the
/// `|0...0>` pseudo-pure state as the phase reference.
pub fn eigenstate_readout<T: Real>(rho: &DensityMatrix<T>, sys: &SpinSystem<T>, mode: ReadoutMode) -> Result<String> {
    let n = sys.n();
    if rho.num_spins() != n {
        return Err(Error::DimensionMismatch("state does not match spin system".into()));
    }
    let dev = rho.deviation().m;
    let scale = dev.max_abs();
    if scale == T::zero() {
        return Err(Error::Superposition);
    }
    let tol = scale * T::lit(1e-6);
    let d = 1usize << n;
    for r in 0..d {
        for c in 0..d {
            if r != c && dev[(r, c)].norm() > tol {
                return Err(Error::Superposition);
            }
        }
    }
    // reference: |0..0><0..0| - 1/d
    let mut reference = Mat::identity(d).scale_real(-T::one() / T::from_usize_lossy(d));
    reference[(0, 0)] = reference[(0, 0)] + cr(T::one());
    match mode {
        ReadoutMode::Homonuclear => {
            let all: Vec<usize> = (0..n).collect();
            let u = readout_pulses::<T>(n, &all)?;
            let sig = observable_lines(&u.conjugate(&dev), sys, None)?;
            let refl = observable_lines(&u.conjugate(&reference), sys, None)?;
            let mut bits = String::new();
            for k in 0..n {
                let s: C<T> = sig.iter().filter(|l| l.spin == k).map(|l| l.amplitude).fold(C::new(T::zero(), T::zero()), |a, b| a + b);
                let r: C<T> = refl.iter().filter(|l| l.spin == k).map(|l| l.amplitude).fold(C::new(T::zero(), T::zero()), |a, b| a + b);
                let v = (s * r.conj()).re / r.norm_sqr();
                if v.abs() <= tol {
                    return Err(Error::Superposition);
                }
                bits.push(if v > T::zero() { '0' } else { '1' });
            }
            Ok(bits)
        }
        ReadoutMode::Heteronuclear => {
            if n != 2 {
                return Err(Error::Unsupported("heteronuclear readout is defined for two spins".into()));
            }
            let u = readout_pulses::<T>(n, &[0])?;
            let sig = observable_lines(&u.conjugate(&dev), sys, None)?;
            let refl = observable_lines(&u.conjugate(&reference), sys, None)?;
            let ref_amp = refl.iter().find(|l| l.spin == 0 && l.partner_state == "0").map(|l| l.amplitude).ok_or(Error::Superposition)?;
            let present: Vec<&SpectrumLine<T>> = sig.iter().filter(|l| l.spin == 0 && l.amplitude.norm() > tol).collect();
            if present.len() != 1 {
                return Err(Error::Superposition);
            }
            let v = (present[0].amplitude * ref_amp.conj()).re;
            let a = if v > T::zero() { '0' } else { '1' };
            Ok(format!("{a}{}", present[0].partner_state))
        }
    }
}

/// Readout pulse applied to one spin before acquisition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutPulse {
    None,
    X90,
    Y90,
}

impl ReadoutPulse {
    fn rotation<T: Real>(self) -> Option<Mat<T>> {
        match self {
            ReadoutPulse::None => None,
            ReadoutPulse::X90 => Some(rotation_xy(T::FRAC_PI_2(), T::zero())),
            ReadoutPulse::Y90 => Some(rotation_xy(T::FRAC_PI_2(), T::FRAC_PI_2())),
        }
    }
}

fn experiment_unitary<T: Real>(pulses: &[ReadoutPulse]) -> Result<Mat<T>> {
    let n = pulses.len();
    let mut u = Mat::identity(1 << n);
    for (k, p) in pulses.iter().enumerate() {
        if let Some(r) = p.rotation() {
            u = embed(&r, &[k], n)?.matmul(&u);
        }
    }
    Ok(u)
}

/// Known deviation state and readout used to calibrate gain and phase.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Reference<T: Real> {
    pub deviation: Mat<T>,
    pub pulses: Vec<ReadoutPulse>,
}

/// Set of readout experiments with one pulse choice per spin.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TomographyPlan<T: Real> {
    pub experiments: Vec<Vec<ReadoutPulse>>,
    pub reference: Reference<T>,
}

/// Recorded line amplitudes, in a fixed `(spin, partner)` order per
/// experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TomographyData<T: Real> {
    pub experiments: Vec<Vec<C<T>>>,
    pub reference: Option<Vec<C<T>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TomographyReport<T: Real> {
    pub coefficients: BTreeMap<String, T>,
    pub residual: T,
}

/// Amplitudes of every possible single-quantum line, zeros included, in
/// the order spin-major then partner state.
fn line_vector<T: Real>(m: &Mat<T>, n: usize) -> Vec<C<T>> {
    let d = 1usize << n;
    let mut out = Vec::with_capacity(n * d / 2);
    for k in 0..n {
        let mask = 1usize << (n - 1 - k);
        for r in (0..d).filter(|&r| r & mask == 0) {
            out.push(m[(r | mask, r)]);
        }
    }
    out
}

fn traceless_basis(n: usize) -> Vec<Vec<Axis>> {
    (1..(1usize << (2 * n))).map(|idx| (0..n).map(|k| ((idx >> (2 * (n - 1 - k))) & 3) as u8).collect()).collect()
}

impl<T: Real> TomographyPlan<T> {
    fn reference_default(n: usize) -> Reference<T> {
        let mut e = ProductOperatorExpansion::new(n);
        for k in 0..n {
            let mut s = vec![0u8; n];
            s[k] = 3;
            e.set_string(s, T::one());
        }
        Reference { deviation: e.assemble(), pulses: vec![ReadoutPulse::Y90; n] }
    }

    /// No pulse and a 90y readout.
    pub fn one_spin() -> Self {
        TomographyPlan { experiments: vec![vec![ReadoutPulse::None], vec![ReadoutPulse::Y90]], reference: Self::reference_default(1) }
    }

    /// All nine combinations of `{none, 90x, 90y}` on two spins.
    pub fn two_spin_full() -> Self {
        let opts = [ReadoutPulse::None, ReadoutPulse::X90, ReadoutPulse::Y90];
        let experiments = opts.iter().flat_map(|&a| opts.iter().map(move |&b| vec![a, b])).collect();
        TomographyPlan { experiments, reference: Self::reference_default(2) }
    }

    /// Smallest full-rank subset of the nine two-spin experiments (the
    /// first found in lexicographic order).
    pub fn two_spin_minimal() -> Self {
        let full = Self::two_spin_full();
        for size in 1..=full.experiments.len() {
            for subset in combinations(full.experiments.len(), size) {
                let plan = TomographyPlan {
                    experiments: subset.iter().map(|&i| full.experiments[i].clone()).collect(),
                    reference: full.reference.clone(),
                };
                if plan.rank() == 15 {
                    return plan;
                }
            }
        }
        full
    }

    pub fn n(&self) -> usize {
        self.reference.pulses.len()
    }

    /// Real design matrix: two rows (real, imaginary) per line per
    /// experiment, one column per traceless product operator.
    pub fn design(&self) -> (Vec<T>, usize, usize) {
        let n = self.n();
        let basis = traceless_basis(n);
        let cols = basis.len();
        let lines = n << (n - 1);
        let rows = 2 * lines * self.experiments.len();
        let mut a = vec![T::zero(); rows * cols];
        for (j, s) in basis.iter().enumerate() {
            let mut e = ProductOperatorExpansion::new(n);
            e.set_string(s.clone(), T::one());
            let op = e.assemble();
            for (x, pulses) in self.experiments.iter().enumerate() {
                let u = experiment_unitary::<T>(pulses).expect("plan pulses match spin count");
                let v = line_vector(&u.conjugate(&op), n);
                for (l, z) in v.iter().enumerate() {
                    let row = 2 * (x * lines + l);
                    a[row * cols + j] = z.re;
                    a[(row + 1) * cols + j] = z.im;
                }
            }
        }
        (a, rows, cols)
    }

    pub fn rank(&self) -> usize {
        let (a, r, c) = self.design();
        crate::linalg::rank(&a, r, c)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 || n > 2 {
            return Err(Error::Unsupported("tomography plans cover one or two spins".into()));
        }
        if self.experiments.iter().any(|e| e.len() != n) || self.reference.deviation.rows() != 1 << n {
            return Err(Error::DimensionMismatch("plan entries must list one pulse per spin".into()));
        }
        Ok(())
    }

    /// Forward-simulate the plan on a deviation operator, with receiver
    /// gain `gain` applied to every acquisition including the reference.
    pub fn simulate(&self, deviation: &Mat<T>, gain: C<T>) -> Result<TomographyData<T>> {
        self.validate()?;
        let n = self.n();
        let acquire = |m: &Mat<T>, pulses: &[ReadoutPulse]| -> Result<Vec<C<T>>> {
            let u = experiment_unitary::<T>(pulses)?;
            Ok(line_vector(&u.conjugate(m), n).into_iter().map(|z| z * gain).collect())
        };
        let experiments = self.experiments.iter().map(|p| acquire(deviation, p)).collect::<Result<Vec<_>>>()?;
        let reference = Some(acquire(&self.reference.deviation, &self.reference.pulses)?);
        Ok(TomographyData { experiments, reference })
    }

    /// Least-squares reconstruction of the traceless deviation. The
    /// reference acquisition fixes the receiver gain and phase.
    pub fn reconstruct(&self, data: &TomographyData<T>) -> Result<(DeviationDensityMatrix<T>, TomographyReport<T>)> {
        self.validate()?;
        let n = self.n();
        let measured_ref =
            data.reference.as_ref().ok_or_else(|| Error::InvalidParameter("tomography needs a reference acquisition".into()))?;
        let u = experiment_unitary::<T>(&self.reference.pulses)?;
        let expected_ref = line_vector(&u.conjugate(&self.reference.deviation), n);
        let den: T = expected_ref.iter().map(|z| z.norm_sqr()).sum();
        if den == T::zero() || measured_ref.len() != expected_ref.len() {
            return Err(Error::InvalidParameter("reference acquisition carries no signal".into()));
        }
        let num = measured_ref.iter().zip(&expected_ref).fold(C::new(T::zero(), T::zero()), |acc, (m, e)| acc + *m * e.conj());
        let gain = num / cr(den);
        if gain.norm() == T::zero() {
            return Err(Error::InvalidParameter("reference acquisition carries no signal".into()));
        }
        if data.experiments.len() != self.experiments.len() {
            return Err(Error::DimensionMismatch("one acquisition per planned experiment".into()));
        }
        let lines = n << (n - 1);
        let mut b = Vec::with_capacity(2 * lines * self.experiments.len());
        for e in &data.experiments {
            if e.len() != lines {
                return Err(Error::DimensionMismatch("acquisition has the wrong number of lines".into()));
            }
            for z in e {
                let w = *z / gain;
                b.push(w.re);
                b.push(w.im);
            }
        }
        let (a, rows, cols) = self.design();
        let (x, residual) = lstsq(&a, rows, cols, &b)?;
        let mut e = ProductOperatorExpansion::new(n);
        for (s, v) in traceless_basis(n).into_iter().zip(&x) {
            e.set_string(s, *v);
        }
        let report = TomographyReport { coefficients: e.labelled(), residual };
        Ok((DeviationDensityMatrix { n, m: e.assemble() }, report))
    }
}

/// One-spin tomography from simulated `{none, 90y}` data.
pub fn tomography_1spin<T: Real>(data: &TomographyData<T>) -> Result<DeviationDensityMatrix<T>> {
    Ok(TomographyPlan::one_spin().reconstruct(data)?.0)
}

/// Two-spin tomography under a given plan.
pub fn tomography_2spin<T: Real>(plan: &TomographyPlan<T>, data: &TomographyData<T>) -> Result<DeviationDensityMatrix<T>> {
    if plan.n() != 2 {
        return Err(Error::DimensionMismatch("two-spin tomography needs a two-spin plan".into()));
    }
    Ok(plan.reconstruct(data)?.0)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::operators::spin_op;

    fn pair() -> SpinSystem<f64> {
        SpinSystem::homonuclear(&[100.0, -150.0], 10.0, 1e-5, 10.0, 1.0).unwrap()
    }

    #[test]
    fn inphase_and_antiphase_doublets() {
        let sys = pair();
        let ix = spin_op::<f64>(2, 0, 1);
        let l = observable_lines(&ix, &sys, None).unwrap();
        assert_eq!(l.len(), 2);
        assert!(l.iter().all(|x| x.spin == 0 && (x.amplitude.re - 0.5).abs() < 1e-15));
        let anti = ix.matmul(&spin_op(2, 1, 3)).scale_real(2.0);
        let l = observable_lines(&anti, &sys, None).unwrap();
        assert_eq!(l.len(), 2);
        assert!((l[0].amplitude.re + l[1].amplitude.re).abs() < 1e-15);
        assert!((l[0].frequency_hz - 105.0).abs() < 1e-12 && (l[1].frequency_hz - 95.0).abs() < 1e-12);
        let diag = spin_op::<f64>(2, 0, 3);
        assert!(observable_lines(&diag, &sys, None).unwrap().is_empty());
    }

    #[test]
    fn nyquist_is_enforced() {
        let l = vec![SpectrumLine { frequency_hz: 600.0, amplitude: C::new(1.0, 0.0), spin: 0, partner_state: String::new() }];
        assert!(matches!(synthesize_fid(&l, 0.1, 256, 1e-3), Err(Error::Nyquist { .. })));
    }

    #[test]
    fn minimal_plan_has_four_experiments() {
        let p = TomographyPlan::<f64>::two_spin_minimal();
        assert_eq!(p.experiments.len(), 4);
        assert_eq!(p.rank(), 15);
        assert_eq!(TomographyPlan::<f64>::two_spin_full().rank(), 15);
    }
}
