//! Gate library, frame tracking, pseudo-Hadamard rewriting, refocusing
//! schedules and coupling-based controlled-phase sequences.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::Event;
use crate::linalg::Mat;
use crate::scalar::{cis, cr, Real, C};
use crate::spin::operators::{embed, rotation_xy, rotation_z};
use crate::spin::SpinSystem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateName {
    X,
    Y,
    Z,
    H,
    /// Pseudo-Hadamard, a 90 degree rotation about +y.
    #[serde(rename = "h")]
    HPseudo,
    /// Inverse pseudo-Hadamard, 90 degrees about -y.
    #[serde(rename = "h_inv")]
    HPseudoInv,
    T,
    #[serde(rename = "T_nmr")]
    TNmr,
    CNOT,
    CZ,
    SWAP,
    TOFFOLI,
    CT,
    /// Transition-selective controlled-NOT (a selective 180 on one line).
    #[serde(rename = "CNOT_ts")]
    CnotTs,
    /// Rotation by `angle` about an axis in the xy plane at `phase`.
    #[serde(rename = "pulse")]
    Pulse,
    /// `exp(-i angle Iz)`.
    #[serde(rename = "rz")]
    Rz,
}

impl GateName {
    pub const ALL: [GateName; 16] = [
        GateName::X,
        GateName::Y,
        GateName::Z,
        GateName::H,
        GateName::HPseudo,
        GateName::HPseudoInv,
        GateName::T,
        GateName::TNmr,
        GateName::CNOT,
        GateName::CZ,
        GateName::SWAP,
        GateName::TOFFOLI,
        GateName::CT,
        GateName::CnotTs,
        GateName::Pulse,
        GateName::Rz,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GateName::X => "X",
            GateName::Y => "Y",
            GateName::Z => "Z",
            GateName::H => "H",
            GateName::HPseudo => "h",
            GateName::HPseudoInv => "h_inv",
            GateName::T => "T",
            GateName::TNmr => "T_nmr",
            GateName::CNOT => "CNOT",
            GateName::CZ => "CZ",
            GateName::SWAP => "SWAP",
            GateName::TOFFOLI => "TOFFOLI",
            GateName::CT => "CT",
            GateName::CnotTs => "CNOT_ts",
            GateName::Pulse => "pulse",
            GateName::Rz => "rz",
        }
    }

    /// Number of qubits the gate acts on.
    pub fn arity(self) -> usize {
        match self {
            GateName::CNOT | GateName::CZ | GateName::SWAP | GateName::CT | GateName::CnotTs => 2,
            GateName::TOFFOLI => 3,
            _ => 1,
        }
    }
}

impl fmt::Display for GateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GateName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        GateName::ALL.iter().copied().find(|g| g.as_str() == s).ok_or_else(|| Error::UnknownGate(s.to_string()))
    }
}

/// A gate applied to specific qubits. For controlled gates the controls come
/// first in `targets`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GateSpec<T: Real> {
    pub name: GateName,
    pub targets: Vec<usize>,
    /// Control value that activates a controlled gate (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_state: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<T>,
}

impl<T: Real> GateSpec<T> {
    pub fn new(name: GateName, targets: &[usize]) -> Self {
        GateSpec { name, targets: targets.to_vec(), control_state: None, angle: None, phase: None }
    }

    pub fn pulse(target: usize, angle: T, phase: T) -> Self {
        GateSpec { name: GateName::Pulse, targets: vec![target], control_state: None, angle: Some(angle), phase: Some(phase) }
    }

    pub fn rz(target: usize, angle: T) -> Self {
        GateSpec { name: GateName::Rz, targets: vec![target], control_state: None, angle: Some(angle), phase: None }
    }

    pub fn with_control_state(mut self, s: u8) -> Self {
        self.control_state = Some(s);
        self
    }
}

fn m2<T: Real>(a: C<T>, b: C<T>, c: C<T>, d: C<T>) -> Mat<T> {
    Mat::from_vec(2, 2, vec![a, b, c, d])
}

/// Controlled version of `u` with `k` controls, active when every control
/// equals `state`.
pub fn controlled<T: Real>(u: &Mat<T>, k: usize, state: u8) -> Mat<T> {
    let m = u.rows();
    let d = m << k;
    let active = if state == 1 { (1usize << k) - 1 } else { 0 };
    let mut out = Mat::identity(d);
    for r in 0..m {
        for c in 0..m {
            out[(active * m + r, active * m + c)] = u[(r, c)];
        }
    }
    out
}

/// Matrix of a gate on its own qubits (before embedding).
pub fn local_gate_matrix<T: Real>(g: &GateSpec<T>) -> Result<Mat<T>> {
    let z = C::zero();
    let o = C::one();
    let i = Complex::new(T::zero(), T::one());
    let r = cr(T::lit(0.5).sqrt());
    let half_pi = T::FRAC_PI_2();
    let quarter = T::FRAC_PI_4();
    let eighth = T::FRAC_PI_8();
    let cs = g.control_state.unwrap_or(1);
    if cs > 1 {
        return Err(Error::InvalidGate(format!("control state {cs}")));
    }
    let need = |what: &str| Error::InvalidGate(format!("{} needs {}", g.name, what));
    Ok(match g.name {
        GateName::X => m2(z, o, o, z),
        GateName::Y => m2(z, -i, i, z),
        GateName::Z => m2(o, z, z, -o),
        GateName::H => m2(r, r, r, -r),
        GateName::HPseudo => rotation_xy(half_pi, half_pi),
        GateName::HPseudoInv => rotation_xy(half_pi, -half_pi),
        GateName::T => Mat::diag(&[o, cis(quarter)]),
        GateName::TNmr => Mat::diag(&[cis(-eighth), cis(eighth)]),
        GateName::CNOT => controlled(&m2(z, o, o, z), 1, cs),
        GateName::CZ => controlled(&m2(o, z, z, -o), 1, cs),
        GateName::CT => controlled(&Mat::diag(&[o, cis(quarter)]), 1, cs),
        GateName::CnotTs => controlled(&m2(z, -i, -i, z), 1, cs),
        GateName::TOFFOLI => controlled(&m2(z, o, o, z), 2, cs),
        GateName::SWAP => {
            let mut s = Mat::zeros(4, 4);
            s[(0, 0)] = o;
            s[(1, 2)] = o;
            s[(2, 1)] = o;
            s[(3, 3)] = o;
            s
        }
        GateName::Pulse => {
            let a = g.angle.ok_or_else(|| need("an angle"))?;
            rotation_xy(a, g.phase.unwrap_or_else(T::zero))
        }
        GateName::Rz => rotation_z(g.angle.ok_or_else(|| need("an angle"))?),
    })
}

/// Full `2^n x 2^n` matrix of a gate.
pub fn standard_gate<T: Real>(g: &GateSpec<T>, n: usize) -> Result<Mat<T>> {
    if g.targets.len() != g.name.arity() {
        return Err(Error::InvalidGate(format!("{} acts on {} qubits, got {} targets", g.name, g.name.arity(), g.targets.len())));
    }
    let u = local_gate_matrix(g)?;
    embed(&u, &g.targets, n)
}

/// Ordered product of a gate list (first gate acts first).
pub fn network_propagator<T: Real>(gates: &[GateSpec<T>], n: usize) -> Result<Mat<T>> {
    let mut u = Mat::identity(1 << n);
    for g in gates {
        u = standard_gate(g, n)?.matmul(&u);
    }
    Ok(u)
}

/// Transition-selective controlled-NOT on `(control, target)` embedded in
/// `n` qubits: a selective 180 degree x pulse on the lines with the control
/// in `|1>`. It differs from CNOT by a z rotation on the control.
pub fn transition_selective_cnot<T: Real>(control: usize, target: usize, n: usize) -> Result<Mat<T>> {
    standard_gate(&GateSpec::new(GateName::CnotTs, &[control, target]), n)
}

/// Frame correction that turns the transition-selective CNOT into CNOT up
/// to a global phase: `exp(-i (pi/2) Iz)` on the control.
pub fn cnot_ts_correction<T: Real>(control: usize) -> GateSpec<T> {
    GateSpec::rz(control, T::FRAC_PI_2())
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle<T: Real>(a: T) -> T {
    let two_pi = T::lit(2.0) * T::PI();
    let mut x = a % two_pi;
    if x <= -T::PI() {
        x += two_pi;
    } else if x > T::PI() {
        x -= two_pi;
    }
    x
}

/// Pending z rotations per qubit that have been absorbed into the
/// rotating frames instead of being applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FrameTracker<T: Real> {
    pub angles: Vec<T>,
}

impl<T: Real> FrameTracker<T> {
    pub fn new(n: usize) -> Self {
        FrameTracker { angles: vec![T::zero(); n] }
    }

    pub fn rotate(&mut self, q: usize, angle: T) {
        self.angles[q] = wrap_angle(self.angles[q] + angle);
    }

    /// Take the pending rotation on `q` as an explicit gate (if nonzero).
    pub fn flush(&mut self, q: usize) -> Option<GateSpec<T>> {
        let a = std::mem::replace(&mut self.angles[q], T::zero());
        if a.abs() > T::tight_tol() {
            Some(GateSpec::rz(q, a))
        } else {
            None
        }
    }

    /// All pending rotations as explicit gates.
    pub fn emit_all(&self) -> Vec<GateSpec<T>> {
        let mut t = self.clone();
        (0..self.angles.len()).filter_map(|q| t.flush(q)).collect()
    }
}

fn xy_pulse_gate<T: Real>(q: usize, angle: T, phase: T) -> GateSpec<T> {
    let half_pi = T::FRAC_PI_2();
    let p = wrap_angle(phase);
    let tol = T::loose_tol();
    if (angle - half_pi).abs() < tol && (p - half_pi).abs() < tol {
        GateSpec::new(GateName::HPseudo, &[q])
    } else if (angle - half_pi).abs() < tol && (p + half_pi).abs() < tol {
        GateSpec::new(GateName::HPseudoInv, &[q])
    } else {
        GateSpec::pulse(q, angle, p)
    }
}

/// Replace every Hadamard by a pseudo-Hadamard pulse plus a 180 degree z
/// rotation absorbed into the frame. A network without Hadamards is
/// returned as is. Diagonal single-qubit gates are also
/// absorbed; later pulses are phase shifted, and pending frames are flushed
/// as explicit `rz` gates only before gates that do not commute with them.
///
/// The returned tracker holds the rotations still pending at the end; the
/// rewritten list followed by `tracker.emit_all()` equals the original
/// network up to a global phase.
pub fn pseudo_hadamard_rewrite<T: Real>(gates: &[GateSpec<T>], n: usize) -> Result<(Vec<GateSpec<T>>, FrameTracker<T>)> {
    let mut fr = FrameTracker::new(n);
    if !gates.iter().any(|g| g.name == GateName::H) {
        for g in gates {
            if g.targets.len() != g.name.arity() || g.targets.iter().any(|&t| t >= n) {
                return Err(Error::InvalidGate(format!("{} with targets {:?}", g.name, g.targets)));
            }
        }
        return Ok((gates.to_vec(), fr));
    }
    let mut out = Vec::new();
    let pi = T::PI();
    let half_pi = T::FRAC_PI_2();
    for g in gates {
        if g.targets.len() != g.name.arity() || g.targets.iter().any(|&t| t >= n) {
            return Err(Error::InvalidGate(format!("{} with targets {:?}", g.name, g.targets)));
        }
        let q = g.targets[0];
        match g.name {
            GateName::H => {
                // H = Rz(pi) . R_{-y}(pi/2)
                out.push(xy_pulse_gate(q, half_pi, -half_pi - fr.angles[q]));
                fr.rotate(q, pi);
            }
            GateName::HPseudo => out.push(xy_pulse_gate(q, half_pi, half_pi - fr.angles[q])),
            GateName::HPseudoInv => out.push(xy_pulse_gate(q, half_pi, -half_pi - fr.angles[q])),
            GateName::X => out.push(xy_pulse_gate(q, pi, -fr.angles[q])),
            GateName::Y => out.push(xy_pulse_gate(q, pi, half_pi - fr.angles[q])),
            GateName::Pulse => {
                let a = g.angle.ok_or_else(|| Error::InvalidGate("pulse needs an angle".into()))?;
                out.push(xy_pulse_gate(q, a, g.phase.unwrap_or_else(T::zero) - fr.angles[q]));
            }
            GateName::Z => fr.rotate(q, pi),
            GateName::T | GateName::TNmr => fr.rotate(q, T::FRAC_PI_4()),
            GateName::Rz => fr.rotate(q, g.angle.ok_or_else(|| Error::InvalidGate("rz needs an angle".into()))?),
            GateName::CZ | GateName::CT => out.push(g.clone()),
            GateName::CNOT | GateName::CnotTs => {
                let t = g.targets[1];
                out.extend(fr.flush(t));
                out.push(g.clone());
            }
            GateName::TOFFOLI => {
                let t = g.targets[2];
                out.extend(fr.flush(t));
                out.push(g.clone());
            }
            GateName::SWAP => {
                let (a, b) = (g.targets[0], g.targets[1]);
                out.push(g.clone());
                fr.angles.swap(a, b);
            }
        }
    }
    Ok((out, fr))
}

/// Sign pattern of a refocusing schedule: `rows[k][s]` is the orientation
/// of spin `k` during slot `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EchoSchedule {
    pub rows: Vec<Vec<i8>>,
}

/// Sylvester Hadamard matrix of order `m` (a power of two).
pub fn sylvester_hadamard(m: usize) -> Vec<Vec<i8>> {
    (0..m).map(|r| (0..m).map(|c| if (r & c).count_ones() % 2 == 0 { 1 } else { -1 }).collect()).collect()
}

/// Build a refocusing schedule from rows of a Hadamard matrix. With `keep`
/// the two listed spins share a row so their coupling survives while every
/// other coupling and all Zeeman terms cancel; without it everything
/// cancels.
pub fn refocus_schedule(n: usize, keep: Option<(usize, usize)>) -> Result<EchoSchedule> {
    if !(2..=crate::spin::MAX_SPINS).contains(&n) {
        return Err(Error::Unsupported(format!("refocusing schedule for {n} spins")));
    }
    let needed_rows = match keep {
        Some((a, b)) => {
            if a >= n || b >= n || a == b {
                return Err(Error::InvalidParameter(format!("keep pair ({a},{b})")));
            }
            n - 1
        }
        None => n,
    };
    let m = (needed_rows + 1).next_power_of_two();
    let h = sylvester_hadamard(m);
    let mut rows = Vec::with_capacity(n);
    let mut next = 1;
    let mut pair_row = None;
    for k in 0..n {
        match keep {
            Some((a, b)) if k == a || k == b => {
                let r = *pair_row.get_or_insert_with(|| {
                    let r = next;
                    next += 1;
                    r
                });
                rows.push(h[r].clone());
            }
            _ => {
                rows.push(h[next].clone());
                next += 1;
            }
        }
    }
    Ok(EchoSchedule { rows })
}

impl EchoSchedule {
    pub fn slots(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    /// Fraction of the total time the coupling between `a` and `b` acts
    /// with positive sign, net.
    pub fn coupling_scale(&self, a: usize, b: usize) -> f64 {
        let s: i32 = self.rows[a].iter().zip(&self.rows[b]).map(|(x, y)| (*x as i32) * (*y as i32)).sum();
        s as f64 / self.slots() as f64
    }

    /// Net Zeeman scale of spin `a`.
    pub fn zeeman_scale(&self, a: usize) -> f64 {
        self.rows[a].iter().map(|&x| x as i32).sum::<i32>() as f64 / self.slots() as f64
    }

    /// Delays and hard 180 degree x pulses realising the schedule over
    /// `total_s`. Returns the events and the number of pulses (each pulse
    /// contributes a factor `-i` to the global phase).
    pub fn events<T: Real>(&self, total_s: T) -> (Vec<Event<T>>, usize) {
        let n = self.rows.len();
        let m = self.slots();
        let tau = total_s / T::from_usize_lossy(m);
        let mut cur = vec![1i8; n];
        let mut ev = Vec::new();
        let mut count = 0;
        let flip = |ev: &mut Vec<Event<T>>, spins: Vec<usize>, count: &mut usize| {
            if !spins.is_empty() {
                *count += spins.len();
                ev.push(Event::Pulse { spins, angle: T::PI(), phase: T::zero(), duration_s: T::zero() });
            }
        };
        for s in 0..m {
            let spins: Vec<usize> = (0..n).filter(|&k| self.rows[k][s] != cur[k]).collect();
            for &k in &spins {
                cur[k] = self.rows[k][s];
            }
            flip(&mut ev, spins, &mut count);
            ev.push(Event::Delay { duration_s: tau });
        }
        let spins: Vec<usize> = (0..n).filter(|&k| cur[k] != 1).collect();
        flip(&mut ev, spins, &mut count);
        (ev, count)
    }
}

/// Coupling evolution realising `exp(-i phi 2IzSz)` between `i` and `j` up
/// to the returned extra global phase. Uses a plain delay for two spins and
/// a refocusing schedule otherwise.
fn coupling_block<T: Real>(sys: &SpinSystem<T>, i: usize, j: usize, phi_target: T) -> Result<(Vec<Event<T>>, T)> {
    let n = sys.n();
    if i >= n || j >= n {
        return Err(Error::SpinIndex { index: i.max(j), n });
    }
    if i == j {
        return Err(Error::InvalidParameter("controlled phase needs two distinct spins".into()));
    }
    let jc = sys.j(i, j);
    if jc == T::zero() {
        return Err(Error::ZeroCoupling(i, j));
    }
    let two_pi = T::lit(2.0) * T::PI();
    // phi = phi_target + 2 pi k with the sign of J
    let mut phi = phi_target - two_pi * (phi_target / two_pi).floor();
    if jc < T::zero() && phi > T::zero() {
        phi -= two_pi;
    }
    let k = ((phi - phi_target) / two_pi).round();
    let t = phi / (T::PI() * jc);
    // exp(-i (phi_target + 2 pi k) 2IzSz) = (-1)^k exp(-i phi_target 2IzSz)
    let mut extra = k * T::PI();
    if n == 2 {
        return Ok((vec![Event::Delay { duration_s: t }], extra));
    }
    let sched = refocus_schedule(n, Some((i, j)))?;
    let (ev, pulses) = sched.events(t);
    extra -= T::FRAC_PI_2() * T::from_usize_lossy(pulses);
    Ok((ev, extra))
}

/// Events realising `e^{i gamma} diag(1,1,1,e^{i theta})` on spins `(i, j)`
/// from scalar coupling, frame rotations and a global-phase bookkeeping
/// event. Free evolution is taken in per-spin rotating frames.
fn controlled_phase_events<T: Real>(sys: &SpinSystem<T>, i: usize, j: usize, theta: T, gamma: T) -> Result<(Vec<Event<T>>, Mat<T>)> {
    // diag(1,1,1,e^{i theta}) = e^{i theta/4} Rz_i(theta/2) Rz_j(theta/2) exp(+i theta/2 2IzSz)
    // holds for every representative of theta mod 2 pi; pick the one that
    // needs the shortest coupling evolution for the sign of J
    let half = T::lit(0.5);
    let two_pi = T::lit(2.0) * T::PI();
    let claimed_theta = theta;
    let jc = if i < sys.n() && j < sys.n() { sys.j(i, j) } else { T::zero() };
    let mut theta = theta - two_pi * (theta / two_pi).floor();
    if jc > T::zero() && theta > T::zero() {
        theta -= two_pi;
    }
    let (mut ev, extra) = coupling_block(sys, i, j, -theta * half)?;
    ev.push(Event::FrameZ { spin: i, angle: theta * half });
    ev.push(Event::FrameZ { spin: j, angle: theta * half });
    // realised so far: e^{i extra} e^{-i theta/4} diag(1,1,1,e^{i theta})
    let g = gamma - extra + theta * T::lit(0.25);
    ev.push(Event::GlobalPhase { angle: wrap_angle(g) });
    let local = Mat::diag(&[C::one(), C::one(), C::one(), cis(claimed_theta)]).scale(cis(gamma));
    let claimed = embed(&local, &[i, j], sys.n())?;
    Ok((ev, claimed))
}

/// Controlled-Z between spins `i` and `j`: a coupling evolution of
/// `1/(2|J|)` (refocused against other couplings when `n > 2`), frame
/// rotations and a global phase. Returns the events and the claimed
/// propagator, which is exactly CZ.
pub fn cz_sequence<T: Real>(sys: &SpinSystem<T>, i: usize, j: usize) -> Result<(Vec<Event<T>>, Mat<T>)> {
    controlled_phase_events(sys, i, j, T::PI(), T::zero())
}

/// Controlled phase shift in the NMR convention
/// `e^{-i theta/2} diag(1,1,1,e^{i theta})`.
pub fn controlled_phase_sequence<T: Real>(sys: &SpinSystem<T>, i: usize, j: usize, theta: T) -> Result<(Vec<Event<T>>, Mat<T>)> {
    controlled_phase_events(sys, i, j, theta, -theta * T::lit(0.5))
}
