//! Small quantum algorithms and protocols run end to end on density
//! matrices, with optional relaxation between steps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channels::{projective_dephase, relax};
use crate::error::{Error, Result};
use crate::gates::{controlled, network_propagator, GateName, GateSpec};
use crate::linalg::Mat;
use crate::scalar::{cis, cr, Real, C};
use crate::spin::operators::{embed, rotation_xy};
use crate::spin::{DensityMatrix, Ket, SpinSystem};

/// Boolean function on `n` bits given by its truth table (index `x` with
/// bit 0 of the input as the most significant bit).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BooleanOracle {
    pub n: usize,
    pub table: Vec<bool>,
}

impl BooleanOracle {
    pub fn from_table(n: usize, table: Vec<bool>) -> Result<Self> {
        if n == 0 || n > 8 || table.len() != 1 << n {
            return Err(Error::InvalidParameter(format!("truth table of length {} for {n} bits", table.len())));
        }
        Ok(BooleanOracle { n, table })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> bool) -> Result<Self> {
        Self::from_table(n, (0..(1usize << n)).map(f).collect())
    }

    /// One-bit functions `f00`, `f01`, `f10`, `f11`, named by `f(0) f(1)`.
    pub fn deutsch(name: &str) -> Result<Self> {
        let t = match name {
            "f00" => [false, false],
            "f01" => [false, true],
            "f10" => [true, false],
            "f11" => [true, true],
            _ => return Err(Error::InvalidParameter(format!("unknown one-bit function {name:?}"))),
        };
        Self::from_table(1, t.to_vec())
    }

    /// Function marking the listed inputs.
    pub fn marking(n: usize, marked: &[usize]) -> Result<Self> {
        if marked.iter().any(|&x| x >= 1 << n) {
            return Err(Error::InvalidParameter("marked input out of range".into()));
        }
        Self::from_fn(n, |x| marked.contains(&x))
    }

    pub fn f(&self, x: usize) -> bool {
        self.table[x]
    }

    pub fn count(&self) -> usize {
        self.table.iter().filter(|&&b| b).count()
    }

    pub fn is_constant(&self) -> bool {
        self.count() == 0 || self.count() == self.table.len()
    }

    pub fn is_balanced(&self) -> bool {
        2 * self.count() == self.table.len()
    }

    /// `|x>|y> -> |x>|y xor f(x)>` with the ancilla as the last qubit.
    pub fn bit_oracle<T: Real>(&self) -> Mat<T> {
        let d = 2usize << self.n;
        let mut u = Mat::zeros(d, d);
        for x in 0..(1usize << self.n) {
            for y in 0..2 {
                let out = (x << 1) | (y ^ self.f(x) as usize);
                u[(out, (x << 1) | y)] = cr(T::one());
            }
        }
        u
    }

    /// `diag((-1)^f(x))`.
    pub fn phase_oracle<T: Real>(&self) -> Mat<T> {
        let d: Vec<T> = self.table.iter().map(|&b| if b { -T::one() } else { T::one() }).collect();
        Mat::diag_real(&d)
    }
}

/// Ancilla-assisted or ancilla-free (phase oracle) form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleForm {
    Ancilla,
    Refined,
}

/// Relaxation applied after every step of a run.
#[derive(Clone, Debug)]
pub struct Decoherence<T: Real> {
    pub system: SpinSystem<T>,
    pub step_s: T,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AlgorithmReport<T: Real> {
    pub algorithm: String,
    pub final_state: DensityMatrix<T>,
    /// Outcome probabilities of the measured register, keyed by bit string.
    pub probabilities: BTreeMap<String, T>,
    pub answer: String,
    pub oracle_calls: usize,
    /// Overlap with the noiseless run after each step, when relaxation is
    /// enabled.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_fidelity: Option<Vec<T>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Step-by-step executor tracking the ideal state alongside the noisy one.
struct Runner<'a, T: Real> {
    n: usize,
    rho: Mat<T>,
    ideal: Mat<T>,
    noise: Option<&'a Decoherence<T>>,
    fidelity: Vec<T>,
    oracle_calls: usize,
}

impl<'a, T: Real> Runner<'a, T> {
    fn new(n: usize, initial: usize, noise: Option<&'a Decoherence<T>>) -> Result<Self> {
        if let Some(d) = noise {
            if d.system.n() != n {
                return Err(Error::DimensionMismatch(format!("relaxation model has {} spins, run needs {n}", d.system.n())));
            }
        }
        let rho = DensityMatrix::<T>::basis(n, initial).into_matrix();
        Ok(Runner { n, ideal: rho.clone(), rho, noise, fidelity: Vec::new(), oracle_calls: 0 })
    }

    fn after_step(&mut self) -> Result<()> {
        if let Some(d) = self.noise {
            let r = relax(&DensityMatrix::new_unchecked(self.rho.clone()), &d.system, d.step_s)?;
            self.rho = r.into_matrix();
            self.fidelity.push(self.rho.matmul(&self.ideal).trace().re);
        }
        Ok(())
    }

    fn unitary(&mut self, u: &Mat<T>) -> Result<()> {
        self.rho = u.conjugate(&self.rho);
        self.ideal = u.conjugate(&self.ideal);
        self.after_step()
    }

    fn gates(&mut self, g: &[GateSpec<T>]) -> Result<()> {
        let u = network_propagator(g, self.n)?;
        self.unitary(&u)
    }

    fn oracle(&mut self, u: &Mat<T>) -> Result<()> {
        self.oracle_calls += 1;
        self.unitary(u)
    }

    fn dephase(&mut self, q: &[usize]) -> Result<()> {
        self.rho = projective_dephase(&self.rho, Some(q))?;
        self.ideal = projective_dephase(&self.ideal, Some(q))?;
        Ok(())
    }

    fn state(&self) -> DensityMatrix<T> {
        DensityMatrix::new_unchecked(self.rho.hermitian_part())
    }

    fn probabilities(&self, register: &[usize]) -> BTreeMap<String, T> {
        marginal(&self.rho, self.n, register)
    }

    fn report(self, algorithm: &str, register: &[usize], answer: String, notes: Vec<String>) -> AlgorithmReport<T> {
        AlgorithmReport {
            algorithm: algorithm.into(),
            probabilities: self.probabilities(register),
            final_state: self.state(),
            answer,
            oracle_calls: self.oracle_calls,
            step_fidelity: self.noise.map(|_| self.fidelity),
            notes,
        }
    }
}

/// Outcome distribution of the listed qubits.
fn marginal<T: Real>(rho: &Mat<T>, n: usize, register: &[usize]) -> BTreeMap<String, T> {
    let mut out = BTreeMap::new();
    for i in 0..rho.rows() {
        let key: String = register.iter().map(|&k| if (i >> (n - 1 - k)) & 1 == 1 { '1' } else { '0' }).collect();
        *out.entry(key).or_insert_with(T::zero) += rho[(i, i)].re.max(T::zero());
    }
    out
}

fn hadamards<T: Real>(qubits: impl IntoIterator<Item = usize>) -> Vec<GateSpec<T>> {
    qubits.into_iter().map(|q| GateSpec::new(GateName::H, &[q])).collect()
}

fn most_likely<T: Real>(p: &BTreeMap<String, T>) -> String {
    p.iter().fold((String::new(), -T::one()), |best, (k, &v)| if v > best.1 { (k.clone(), v) } else { best }).0
}

/// Deutsch's algorithm: parity `f(0) xor f(1)` from one oracle call.
pub fn deutsch<T: Real>(f: &BooleanOracle, form: OracleForm, noise: Option<&Decoherence<T>>) -> Result<AlgorithmReport<T>> {
    if f.n != 1 {
        return Err(Error::InvalidParameter("Deutsch's algorithm takes a one-bit function".into()));
    }
    let mut rep = deutsch_jozsa(f, form, noise)?;
    rep.algorithm = "deutsch".into();
    rep.answer = match rep.answer.as_str() {
        "constant" => "0".into(),
        "balanced" => "1".into(),
        other => other.into(),
    };
    Ok(rep)
}

/// Deutsch-Jozsa for `n <= 4` input bits. Oracles outside the promise are
/// reported as such together with the outcome distribution.
pub fn deutsch_jozsa<T: Real>(f: &BooleanOracle, form: OracleForm, noise: Option<&Decoherence<T>>) -> Result<AlgorithmReport<T>> {
    let n = f.n;
    if n > 4 {
        return Err(Error::InvalidParameter("Deutsch-Jozsa runs on at most 4 input bits".into()));
    }
    let register: Vec<usize> = (0..n).collect();
    let mut r = match form {
        OracleForm::Ancilla => {
            let mut r = Runner::new(n + 1, 1, noise)?;
            r.gates(&hadamards(0..=n))?;
            r.oracle(&f.bit_oracle())?;
            r.gates(&hadamards(0..=n))?;
            r
        }
        OracleForm::Refined => {
            let mut r = Runner::new(n, 0, noise)?;
            r.gates(&hadamards(0..n))?;
            r.oracle(&f.phase_oracle())?;
            r.gates(&hadamards(0..n))?;
            r
        }
    };
    let all = r.n;
    r.dephase(&(0..all).collect::<Vec<_>>())?;
    let p = r.probabilities(&register);
    let zero = p.get(&"0".repeat(n)).copied().unwrap_or_else(T::zero);
    let mut notes = Vec::new();
    let answer = if !(f.is_constant() || f.is_balanced()) {
        notes.push("promise-violating oracle".into());
        "promise-violating oracle".to_string()
    } else if noise.is_some() {
        if zero > T::lit(0.5) { "constant" } else { "balanced" }.to_string()
    } else if zero > T::one() - T::lit(1e-9) {
        "constant".into()
    } else if zero < T::lit(1e-9) {
        "balanced".into()
    } else {
        notes.push("ambiguous outcome".into());
        "undetermined".into()
    };
    Ok(r.report("deutsch_jozsa", &register, answer, notes))
}

/// Default iteration count: nearest integer to `(pi/4) sqrt(N/k) - 1/2`,
/// at least one.
pub fn grover_iterations(n: usize, k: usize) -> usize {
    let x = std::f64::consts::FRAC_PI_4 * ((1usize << n) as f64 / k as f64).sqrt() - 0.5;
    (x.round() as usize).max(1)
}

/// Grover search in the ancilla-free form: `H^n`, then repeated
/// `U_f, H^n, U_00, H^n`.
pub fn grover<T: Real>(f: &BooleanOracle, iterations: Option<usize>, noise: Option<&Decoherence<T>>) -> Result<AlgorithmReport<T>> {
    let n = f.n;
    let k = f.count();
    if k == 0 {
        return Err(Error::InvalidParameter("the oracle marks no inputs".into()));
    }
    let iters = iterations.unwrap_or_else(|| grover_iterations(n, k));
    let mut r = Runner::new(n, 0, noise)?;
    let h = hadamards::<T>(0..n);
    let uf = f.phase_oracle::<T>();
    let u00 = BooleanOracle::marking(n, &[0])?.phase_oracle::<T>();
    r.gates(&h)?;
    for _ in 0..iters {
        r.oracle(&uf)?;
        r.gates(&h)?;
        r.unitary(&u00)?;
        r.gates(&h)?;
    }
    let register: Vec<usize> = (0..n).collect();
    r.dephase(&register)?;
    let p = r.probabilities(&register);
    let success: T = p.iter().filter(|(s, _)| f.f(usize::from_str_radix(s, 2).unwrap_or(0))).map(|(_, &v)| v).sum();
    let pmax = p.values().fold(T::zero(), |m, &v| m.max(v));
    let decoded: Vec<String> = p.iter().filter(|(_, &v)| v > pmax - T::lit(1e-9)).map(|(s, _)| s.clone()).collect();
    let notes = vec![format!("iterations={iters}"), format!("success_probability={success}")];
    Ok(r.report("grover", &register, decoded.join(","), notes))
}

/// Probability of finding a marked input after `r` Grover iterations,
/// `sin^2((2r+1) theta)` with `sin^2 theta = k/N`.
pub fn grover_success_closed_form(n: usize, k: usize, r: usize) -> f64 {
    let theta = (k as f64 / (1usize << n) as f64).sqrt().asin();
    ((2 * r + 1) as f64 * theta).sin().powi(2)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CountingReport<T: Real> {
    /// Real part of the control-qubit coherence after `r` controlled
    /// Grover iterations, `r = 0, 1, ...`.
    pub signal: Vec<T>,
    /// Fitted oscillation frequency in cycles per iteration.
    pub frequency: T,
    pub estimated_k: usize,
    pub oracle_calls: usize,
}

/// Grover iterate `(2|s><s| - 1) U_f` on `n` bits.
pub fn grover_iterate<T: Real>(f: &BooleanOracle) -> Result<Mat<T>> {
    let n = f.n;
    let d = 1usize << n;
    let h = network_propagator(&hadamards::<T>(0..n), n)?;
    let s = h.apply(&{
        let mut v = vec![cr(T::zero()); d];
        v[0] = cr(T::one());
        v
    });
    let refl = Mat::from_fn(d, d, |i, j| {
        let p = s[i] * s[j].conj() * cr(T::lit(2.0));
        if i == j {
            p - cr(T::one())
        } else {
            p
        }
    });
    Ok(refl.matmul(&f.phase_oracle()))
}

/// Approximate quantum counting on one input bit with a control qubit.
/// The control coherence oscillates as `cos(2 theta r)` over the
/// repetition sweep; the fitted frequency `theta/pi` gives
/// `k = N sin^2 theta`.
pub fn quantum_counting<T: Real>(f: &BooleanOracle, sweep: usize) -> Result<CountingReport<T>> {
    if f.n != 1 {
        return Err(Error::Unsupported("quantum counting is implemented for one input bit".into()));
    }
    if sweep < 8 {
        return Err(Error::InvalidParameter("repetition sweep needs at least 8 points".into()));
    }
    let g = grover_iterate::<T>(f)?;
    let cg = embed(&controlled(&g, 1, 1), &[0, 1], 2)?;
    let h = network_propagator(&hadamards::<T>(0..2), 2)?;
    let mut rho = h.conjugate(&DensityMatrix::<T>::basis(2, 0).into_matrix());
    // control coherence: 2 Tr(rho |1><0| x 1)
    let read = |m: &Mat<T>| -> T { (m[(0, 2)] + m[(1, 3)]).re * T::lit(2.0) };
    let mut signal = Vec::with_capacity(sweep);
    let mut calls = 0;
    for r in 0..sweep {
        if r > 0 {
            rho = cg.conjugate(&rho);
            calls += 1;
        }
        signal.push(read(&rho));
    }
    let frequency = fit_frequency(&signal);
    let nn = 2.0;
    let k = (nn * (std::f64::consts::PI * frequency.as_f64()).sin().powi(2)).round() as usize;
    Ok(CountingReport { signal, frequency, estimated_k: k, oracle_calls: calls })
}

/// Frequency in `[0, 1/2]` cycles per sample minimizing the residual of a
/// least-squares fit `a cos(2 pi f r) + b sin(2 pi f r)`.
fn fit_frequency<T: Real>(s: &[T]) -> T {
    let y: Vec<f64> = s.iter().map(|v| v.as_f64()).collect();
    let grid = 2000;
    let mut best = (f64::INFINITY, 0.0);
    for g in 0..=grid {
        let f = 0.5 * g as f64 / grid as f64;
        let w = 2.0 * std::f64::consts::PI * f;
        let (mut cc, mut ss, mut cs, mut yc, mut ys) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (r, &v) in y.iter().enumerate() {
            let (sn, cn) = (w * r as f64).sin_cos();
            cc += cn * cn;
            ss += sn * sn;
            cs += cn * sn;
            yc += v * cn;
            ys += v * sn;
        }
        let det = cc * ss - cs * cs;
        let (a, b) =
            if det.abs() > 1e-9 * (cc * ss).max(1e-300) { ((yc * ss - ys * cs) / det, (ys * cc - yc * cs) / det) } else { (yc / cc, 0.0) };
        let res: f64 = y
            .iter()
            .enumerate()
            .map(|(r, &v)| {
                let (sn, cn) = (w * r as f64).sin_cos();
                (v - a * cn - b * sn).powi(2)
            })
            .sum();
        if res < best.0 - 1e-12 {
            best = (res, f);
        }
    }
    T::lit(best.1)
}

/// `A = (1/(M+1)) sum_{m=0}^{M} exp(-i 2 pi m^2 N / l)`.
pub fn gauss_sum<T: Real>(n_int: u64, l: u64, m_terms: u64) -> Result<C<T>> {
    if n_int < 2 || l < 1 || l > n_int {
        return Err(Error::InvalidParameter(format!("gauss sum needs N >= 2 and 1 <= l <= N, got N={n_int}, l={l}")));
    }
    let two_pi = T::lit(2.0) * T::PI();
    let mut acc = C::new(T::zero(), T::zero());
    for m in 0..=m_terms {
        // reduce m^2 N mod l exactly before forming the phase
        let r = ((m as u128 * m as u128) % l as u128 * n_int as u128 % l as u128) as u64;
        acc = acc + cis(-two_pi * T::from_u64(r).unwrap_or_else(T::zero) / T::from_u64(l).unwrap_or_else(T::one));
    }
    Ok(acc / cr(T::from_u64(m_terms + 1).unwrap_or_else(T::one)))
}

/// `|A| > 1 - tol`.
pub fn factor_check<T: Real>(n_int: u64, l: u64, m_terms: u64, tol: T) -> Result<bool> {
    if m_terms < 1 {
        return Err(Error::InvalidParameter("factor check needs at least two terms".into()));
    }
    Ok(gauss_sum::<T>(n_int, l, m_terms)?.norm() > T::one() - tol)
}

pub const FACTOR_CHECK_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ZenoReport<T: Real> {
    /// Probability of finding `|0>` at every one of the `k` measurements
    /// (at the end for `k = 0`).
    pub survival: T,
    /// Population of `|0>` at the end of the unconditioned dephased run.
    pub final_population: T,
    pub closed_form: T,
}

/// Nutation through `pi` over `t180`, interrupted by `k` evenly spaced
/// projective measurements.
pub fn zeno_run<T: Real>(t180_s: T, k: usize) -> Result<ZenoReport<T>> {
    if !(t180_s > T::zero()) {
        return Err(Error::InvalidParameter("t180 must be positive".into()));
    }
    let omega = T::PI() / t180_s;
    let steps = k.max(1);
    let tau = t180_s / T::from_usize_lossy(steps);
    let u = rotation_xy(omega * tau, T::zero());
    let mut branch = DensityMatrix::<T>::basis(1, 0).into_matrix();
    let mut ensemble = branch.clone();
    for _ in 0..steps {
        branch = u.conjugate(&branch);
        ensemble = u.conjugate(&ensemble);
        if k > 0 {
            ensemble = projective_dephase(&ensemble, None)?;
            // keep only the branch that finds |0>
            let p0 = branch[(0, 0)];
            branch = Mat::zeros(2, 2);
            branch[(0, 0)] = p0;
        }
    }
    let closed_form =
        if k == 0 { (omega * t180_s / T::lit(2.0)).cos().powi(2) } else { (omega * tau / T::lit(2.0)).cos().powi(2 * k as i32) };
    Ok(ZenoReport { survival: branch[(0, 0)].re, final_population: ensemble[(0, 0)].re, closed_form })
}

const BELL_NAMES: [&str; 4] = ["phi+", "psi+", "phi-", "psi-"];

/// Dense coding over a shared `|psi->`: Alice (qubit 0) applies `1`, `X`,
/// `Y` or `Z` for messages `00`, `01`, `10`, `11`, giving `psi-`, `phi-`,
/// `phi+`, `psi+`; Bob's Bell analysis (CNOT, H, measure) decodes it.
pub fn dense_coding<T: Real>(message: &str, noise: Option<&Decoherence<T>>) -> Result<AlgorithmReport<T>> {
    let idx = match message {
        "00" => 0,
        "01" => 1,
        "10" => 2,
        "11" => 3,
        _ => return Err(Error::InvalidParameter(format!("message must be two bits, got {message:?}"))),
    };
    let encode = [None, Some(GateName::X), Some(GateName::Y), Some(GateName::Z)][idx];
    // |psi-> from |11>: H(0), CNOT(0,1)
    let mut r = Runner::new(2, 3, noise)?;
    r.gates(&[GateSpec::new(GateName::H, &[0]), GateSpec::new(GateName::CNOT, &[0, 1])])?;
    if let Some(g) = encode {
        r.gates(&[GateSpec::new(g, &[0])])?;
    }
    r.gates(&[GateSpec::new(GateName::CNOT, &[0, 1]), GateSpec::new(GateName::H, &[0])])?;
    r.dephase(&[0, 1])?;
    let p = r.probabilities(&[0, 1]);
    let outcome = most_likely(&p);
    // Bell analysis maps phi+, psi+, phi-, psi- to 00, 01, 10, 11
    let bell = BELL_NAMES[usize::from_str_radix(&outcome, 2).unwrap_or(0)];
    let decoded = match bell {
        "psi-" => "00",
        "phi-" => "01",
        "phi+" => "10",
        _ => "11",
    };
    Ok(r.report("dense_coding", &[0, 1], decoded.into(), vec![format!("bell_state={bell}")]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corrections {
    Coherent,
    PostProcessed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TeleportReport<T: Real> {
    pub bob: DensityMatrix<T>,
    pub fidelity: T,
    pub alice: DensityMatrix<T>,
}

/// Teleport qubit 0 to qubit 2 through a `phi+` pair on qubits 1 and 2.
/// Alice's Bell measurement is forced decoherence of qubits 0 and 1.
pub fn teleport<T: Real>(input: &Ket<T>, corrections: Corrections) -> Result<TeleportReport<T>> {
    if input.num_spins() != 1 {
        return Err(Error::DimensionMismatch("teleportation input is one qubit".into()));
    }
    let psi = input.kron(&Ket::basis(2, 0));
    let mut rho = DensityMatrix::from_ket(&psi).into_matrix();
    let g = |name, t: &[usize]| GateSpec::<T>::new(name, t);
    let u = network_propagator(&[g(GateName::H, &[1]), g(GateName::CNOT, &[1, 2]), g(GateName::CNOT, &[0, 1]), g(GateName::H, &[0])], 3)?;
    rho = u.conjugate(&rho);
    rho = projective_dephase(&rho, Some(&[0, 1]))?;
    let fixed = match corrections {
        Corrections::Coherent => network_propagator(&[g(GateName::CNOT, &[1, 2]), g(GateName::CZ, &[0, 2])], 3)?.conjugate(&rho),
        Corrections::PostProcessed => {
            let mut acc = Mat::zeros(8, 8);
            for m0 in 0..2 {
                for m1 in 0..2 {
                    let mask = (m0 << 2) | (m1 << 1);
                    let branch =
                        Mat::from_fn(8, 8, |r, c| if r & 6 == mask && c & 6 == mask { rho[(r, c)] } else { C::new(T::zero(), T::zero()) });
                    let mut fix = Vec::new();
                    if m1 == 1 {
                        fix.push(g(GateName::X, &[2]));
                    }
                    if m0 == 1 {
                        fix.push(g(GateName::Z, &[2]));
                    }
                    acc = &acc + &network_propagator(&fix, 3)?.conjugate(&branch);
                }
            }
            acc
        }
    };
    let full = DensityMatrix::new_unchecked(fixed.hermitian_part());
    let bob = full.partial_trace(&[2])?;
    let alice = full.partial_trace(&[0])?;
    let fidelity = bob.fidelity_pure(input);
    Ok(TeleportReport { bob, fidelity, alice })
}

/// Error injected in one round of the three-qubit phase-flip code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseError {
    None,
    Z(usize),
}

fn qec_encode<T: Real>() -> Vec<GateSpec<T>> {
    let mut g = vec![GateSpec::new(GateName::CNOT, &[0, 1]), GateSpec::new(GateName::CNOT, &[0, 2])];
    g.extend(hadamards(0..3));
    g
}

fn qec_decode<T: Real>() -> Vec<GateSpec<T>> {
    let mut g = hadamards(0..3);
    g.push(GateSpec::new(GateName::CNOT, &[0, 1]));
    g.push(GateSpec::new(GateName::CNOT, &[0, 2]));
    g.push(GateSpec::new(GateName::TOFFOLI, &[1, 2, 0]));
    g
}

fn qec_run<T: Real>(input: &Ket<T>, errors: impl Fn(Mat<T>) -> Result<Mat<T>>) -> Result<T> {
    if input.num_spins() != 1 {
        return Err(Error::DimensionMismatch("the logical input is one qubit".into()));
    }
    let psi = input.kron(&Ket::basis(2, 0));
    let enc = network_propagator(&qec_encode::<T>(), 3)?;
    let dec = network_propagator(&qec_decode::<T>(), 3)?;
    let rho = enc.conjugate(&DensityMatrix::from_ket(&psi).into_matrix());
    let rho = dec.conjugate(&errors(rho)?);
    let logical = DensityMatrix::new_unchecked(rho.hermitian_part()).partial_trace(&[0])?;
    Ok(logical.fidelity_pure(input))
}

/// Encode, inject the error, decode and majority-correct; returns the
/// fidelity of the recovered logical qubit with `input`.
pub fn phase_flip_qec_round<T: Real>(input: &Ket<T>, error: PhaseError) -> Result<T> {
    qec_run(input, |rho| match error {
        PhaseError::None => Ok(rho),
        PhaseError::Z(j) => {
            if j > 2 {
                return Err(Error::SpinIndex { index: j, n: 3 });
            }
            Ok(network_propagator(&[GateSpec::new(GateName::Z, &[j])], 3)?.conjugate(&rho))
        }
    })
}

/// Logical error probability when each qubit independently suffers a `Z`
/// with probability `q`, simulated as a channel. After decoding, an
/// uncorrected error is a bit flip of qubit 0, so the input is `|0>`.
pub fn phase_flip_logical_error<T: Real>(q: T) -> Result<T> {
    if q < T::zero() || q > T::one() {
        return Err(Error::InvalidParameter("error probability outside [0, 1]".into()));
    }
    let f = qec_run(&Ket::basis(1, 0), |mut rho| {
        for j in 0..3 {
            let z = network_propagator(&[GateSpec::<T>::new(GateName::Z, &[j])], 3)?;
            rho = &rho.scale_real(T::one() - q) + &z.conjugate(&rho).scale_real(q);
        }
        Ok(rho)
    })?;
    Ok(T::one() - f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_oracle_is_a_permutation() {
        let f = BooleanOracle::from_fn(3, |x| x % 3 == 0).unwrap();
        let u = f.bit_oracle::<f64>();
        for r in 0..16 {
            let ones = (0..16).filter(|&c| u[(r, c)].re == 1.0).count();
            assert_eq!(ones, 1);
        }
        assert!(u.is_unitary(1e-15));
    }

    #[test]
    fn fit_recovers_known_frequency() {
        let s: Vec<f64> = (0..16).map(|r| (2.0 * std::f64::consts::PI * 0.125 * r as f64).cos()).collect();
        assert!((fit_frequency(&s) - 0.125).abs() < 1e-3);
    }
}
