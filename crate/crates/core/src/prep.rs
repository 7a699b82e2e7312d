//! Pseudo-pure states: construction and diagnostics, purity and
//! entanglement bounds, temporal and spatial averaging, cat-state selection
//! and logical labelling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{delay, pulse, pulse_on, Event, Simulator};
use crate::gates::{network_propagator, GateName, GateSpec};
use crate::linalg::Mat;
use crate::scalar::{cr, Real, C};
use crate::spin::operators::{bit, Axis};
use crate::spin::{thermal_state_linear, DensityMatrix, Ket, ProductOperatorExpansion, SpinSystem};

/// Pure-state weight and target of a pseudo-pure state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PseudoPureSpec<T: Real> {
    pub epsilon: T,
    pub target: Ket<T>,
}

/// `(1 - eps) 1/2^n + eps |psi><psi|`.
pub fn pseudo_pure<T: Real>(spec: &PseudoPureSpec<T>) -> Result<DensityMatrix<T>> {
    let eps = spec.epsilon;
    if !(eps >= T::zero() && eps <= T::one()) {
        return Err(Error::InvalidParameter(format!("epsilon {} outside [0, 1]", eps.as_f64())));
    }
    let n = spec.target.num_spins();
    let mixed = DensityMatrix::maximally_mixed(n);
    let pure = DensityMatrix::from_ket(&spec.target);
    DensityMatrix::mix(&[(T::one() - eps, &mixed), (eps, &pure)])
}

/// Spectrum check tolerance for [`epsilon_of`].
const PSEUDO_PURE_TOL: f64 = 1e-9;

/// Recover `eps` from a state whose spectrum is one large eigenvalue and
/// `2^n - 1` equal smaller ones.
pub fn epsilon_of<T: Real>(rho: &DensityMatrix<T>) -> Result<T> {
    let vals = rho.matrix().eigvalsh();
    let d = vals.len();
    if d < 2 {
        return Err(Error::NotPseudoPure("a single level has no pseudo-pure structure".into()));
    }
    let small = &vals[..d - 1];
    let lo = small[0];
    let hi = small[d - 2];
    let tol = T::lit(PSEUDO_PURE_TOL);
    if hi - lo > tol {
        return Err(Error::NotPseudoPure(format!("the {} smaller eigenvalues spread over {:e}", d - 1, (hi - lo).as_f64())));
    }
    let mean: T = small.iter().copied().sum::<T>() / T::from_usize_lossy(d - 1);
    Ok((vals[d - 1] - mean).max(T::zero()))
}

/// Warren's bound on the pseudo-pure signal of `n` identical spins at
/// `x = h nu / k T`: `(exact, high-temperature approximation)`.
pub fn warren_bound(n: usize, x: f64) -> Result<(f64, f64)> {
    if n == 0 || !(x > 0.0) {
        return Err(Error::InvalidParameter("need n >= 1 and x > 0".into()));
    }
    let nf = n as f64;
    // 2 sinh(n x/2) / (2^n cosh^n(x/2)), in logs to survive large n x
    let h = 0.5 * x;
    let log_cosh = h + (-2.0 * h).exp().ln_1p() - std::f64::consts::LN_2;
    let a = nf * h;
    let log_2sinh = a + (-(-2.0 * a).exp_m1()).ln();
    let exact = (log_2sinh - nf * std::f64::consts::LN_2 - nf * log_cosh).exp();
    let approx = nf / 2f64.powi(n as i32) * x;
    Ok((exact, approx))
}

/// Purity limits for `n` spins: below `lower` every pseudo-pure state is
/// separable; above `upper` entangled ones exist.
pub fn entanglement_bounds(n: usize) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::InvalidParameter("entanglement needs at least two spins".into()));
    }
    let lower = 1.0 / (1.0 + 2f64.powi(2 * n as i32 - 1));
    let upper = 1.0 / (1.0 + 2f64.powf(n as f64 / 2.0));
    Ok((lower, upper))
}

/// Werner-state entanglement threshold for two spins.
pub fn peres_threshold() -> f64 {
    1.0 / 3.0
}

/// Permutation matrix with `P |i> = |perm[i]>`.
pub fn permutation_matrix<T: Real>(perm: &[usize]) -> Result<Mat<T>> {
    let d = perm.len();
    let mut seen = vec![false; d];
    for &p in perm {
        if p >= d || seen[p] {
            return Err(Error::InvalidParameter("not a permutation".into()));
        }
        seen[p] = true;
    }
    let mut m = Mat::zeros(d, d);
    for (i, &p) in perm.iter().enumerate() {
        m[(p, i)] = C::new(T::one(), T::zero());
    }
    Ok(m)
}

/// The `2^n - 1` cyclic shifts of the excited basis states; the first is
/// the identity.
pub fn cyclic_permutations(n: usize) -> Vec<Vec<usize>> {
    let d = 1usize << n;
    let m = d - 1;
    (0..m).map(|j| (0..d).map(|k| if k == 0 { 0 } else { (k - 1 + j) % m + 1 }).collect()).collect()
}

/// Two-spin cyclic permutation networks built from two CNOTs each.
pub fn two_spin_permutation_networks<T: Real>() -> [Vec<GateSpec<T>>; 2] {
    let c01 = GateSpec::new(GateName::CNOT, &[0, 1]);
    let c10 = GateSpec::new(GateName::CNOT, &[1, 0]);
    [vec![c01.clone(), c10.clone()], vec![c10, c01]]
}

/// NOT / CNOT / TOFFOLI network realizing a basis permutation on `n <= 3`
/// spins, built from transpositions along Gray-code paths.
pub fn synthesize_permutation<T: Real>(perm: &[usize], n: usize) -> Result<Vec<GateSpec<T>>> {
    if n == 0 || n > 3 || perm.len() != 1 << n {
        return Err(Error::Unsupported("permutation networks are synthesized for 1 to 3 spins".into()));
    }
    permutation_matrix::<T>(perm)?;
    // current[i] = where basis state i currently sits; apply transpositions
    // of positions until every state has reached its image
    let d = perm.len();
    let mut pos: Vec<usize> = (0..d).collect();
    let mut at: Vec<usize> = (0..d).collect(); // at[p] = state sitting at position p
    let mut gates = Vec::new();
    for s in 0..d {
        let (from, to) = (pos[s], perm[s]);
        if from == to {
            continue;
        }
        gates.extend(transposition(from, to, n));
        let other = at[to];
        at.swap(from, to);
        pos[s] = to;
        pos[other] = from;
    }
    Ok(gates)
}

/// Gates swapping basis states `a` and `b`.
fn transposition<T: Real>(a: usize, b: usize, n: usize) -> Vec<GateSpec<T>> {
    let mut path = vec![a];
    let mut cur = a;
    for k in 0..n {
        let mask = 1 << (n - 1 - k);
        if (a ^ b) & mask != 0 {
            cur ^= mask;
            path.push(cur);
        }
    }
    let mut steps: Vec<(usize, usize)> = path.windows(2).map(|w| (w[0], w[1])).collect();
    let back: Vec<(usize, usize)> = steps[..steps.len() - 1].iter().rev().copied().collect();
    steps.extend(back);
    steps.into_iter().flat_map(|(x, y)| adjacent_swap(x, y, n)).collect()
}

/// Swap two basis states differing in one bit: a NOT on that bit
/// controlled on every other bit matching `x`.
fn adjacent_swap<T: Real>(x: usize, y: usize, n: usize) -> Vec<GateSpec<T>> {
    let t = (0..n).find(|&k| bit(x, k, n) != bit(y, k, n)).expect("states differ");
    let controls: Vec<usize> = (0..n).filter(|&k| k != t).collect();
    let flips: Vec<GateSpec<T>> = controls.iter().filter(|&&k| bit(x, k, n) == 0).map(|&k| GateSpec::new(GateName::X, &[k])).collect();
    let mut targets = controls.clone();
    targets.push(t);
    let core = match controls.len() {
        0 => GateSpec::new(GateName::X, &[t]),
        1 => GateSpec::new(GateName::CNOT, &targets),
        _ => GateSpec::new(GateName::TOFFOLI, &targets),
    };
    let mut out = flips.clone();
    out.push(core);
    out.extend(flips);
    out
}

/// Exhaustive temporal averaging `1/m sum_j P_j rho P_j^dagger` over the
/// given permutations (the cyclic set by default). The largest population
/// must already sit on `|0...0>`.
pub fn temporal_average<T: Real>(rho: &DensityMatrix<T>, permutations: Option<&[Vec<usize>]>) -> Result<DensityMatrix<T>> {
    let pops = rho.populations();
    let tol = T::tight_tol();
    if pops.iter().skip(1).any(|&p| p > pops[0] + tol) {
        return Err(Error::InvalidParameter("largest population is not on |0...0>; swap it there before averaging".into()));
    }
    let n = rho.num_spins();
    let default;
    let perms = match permutations {
        Some(p) => p,
        None => {
            default = cyclic_permutations(n);
            &default
        }
    };
    if perms.is_empty() {
        return Err(Error::InvalidParameter("no permutations to average".into()));
    }
    let d = rho.dim();
    let mut acc = Mat::zeros(d, d);
    for p in perms {
        if p.len() != d {
            return Err(Error::DimensionMismatch("permutation size does not match the state".into()));
        }
        acc = &acc + &permutation_matrix(p)?.conjugate(rho.matrix());
    }
    Ok(DensityMatrix::new_unchecked(acc.scale_real(T::one() / T::from_usize_lossy(perms.len())).hermitian_part()))
}

/// Purity left by temporal averaging a diagonal state: the ground
/// population minus the mean of the others.
pub fn temporal_average_epsilon<T: Real>(populations: &[T]) -> T {
    let m = T::from_usize_lossy(populations.len() - 1);
    let rest: T = populations[1..].iter().copied().sum();
    populations[0] - rest / m
}

/// Product-operator temporal averaging plan: one starting operator per
/// experiment (every z-only product operator), whose sum is proportional to
/// the pseudo-pure deviation of `|0...0>`.
pub fn product_operator_plan(n: usize) -> Vec<Vec<Axis>> {
    (1..(1usize << n)).map(|mask| (0..n).map(|k| if mask >> (n - 1 - k) & 1 == 1 { 3 } else { 0 }).collect()).collect()
}

/// Average of the plan's starting operators, as a deviation operator.
pub fn product_operator_average<T: Real>(n: usize) -> Mat<T> {
    let plan = product_operator_plan(n);
    let mut e = ProductOperatorExpansion::new(n);
    for s in &plan {
        e.set_string(s.clone(), T::one() / T::from_usize_lossy(plan.len()));
    }
    e.assemble()
}

fn check_two(sys: &SpinSystem<impl Real>) -> Result<()> {
    if sys.n() != 2 {
        return Err(Error::InvalidSystem(format!("spatial averaging needs 2 spins, got {}", sys.n())));
    }
    if sys.j(0, 1) == Default::default() {
        return Err(Error::ZeroCoupling(0, 1));
    }
    Ok(())
}

fn deg<T: Real>(x: f64) -> T {
    T::lit(x.to_radians())
}

/// Spatial averaging for a homonuclear pair: 60 Sx, crush, 45 Ix, free
/// coupling for `1/(2J)`, 45 I-y, crush. Returns the events and the state
/// they produce from the first-order thermal state.
pub fn spatial_average_homonuclear<T: Real>(sys: &SpinSystem<T>) -> Result<(Vec<Event<T>>, DensityMatrix<T>)> {
    check_two(sys)?;
    if !sys.is_homonuclear() {
        return Err(Error::InvalidSystem("homonuclear sequence on a heteronuclear pair".into()));
    }
    let j = sys.j(0, 1);
    // the sign of J decides which way 2IxSz points after the coupling
    let last_phase = if j > T::zero() { -T::FRAC_PI_2() } else { T::FRAC_PI_2() };
    let crush = Event::Crush { preserve_zero_quantum: true, area: T::one() };
    let events = vec![
        pulse(1, deg(60.0), T::zero()),
        crush.clone(),
        pulse(0, deg(45.0), T::zero()),
        delay(T::one() / (T::lit(2.0) * j.abs())),
        pulse(0, deg(45.0), last_phase),
        Event::Crush { preserve_zero_quantum: true, area: T::lit(1.7) },
    ];
    let rho = Simulator::new(sys).run(&thermal_state_linear(sys), &events)?;
    Ok((events, rho))
}

/// Flip angle on the more polarised spin that leaves its z component equal
/// to the other spin's after a crush: `arccos(delta_low / delta_high)`.
pub fn equalization_angle<T: Real>(delta_high: T, delta_low: T) -> Result<T> {
    let r = delta_low / delta_high;
    if !(r.abs() <= T::one()) {
        return Err(Error::InvalidParameter("equalization needs |delta_low| <= |delta_high|".into()));
    }
    Ok(r.acos())
}

/// Spatial averaging for a heteronuclear pair: 45 (Ix + Sx), free coupling
/// for `1/(2J)`, 30 (I-y + S-y), crush. With `equalize`, a flip-angle pulse
/// and crush first bring both polarisations to the smaller one; without
/// it, unequal polarisations are an error.
pub fn spatial_average_heteronuclear<T: Real>(sys: &SpinSystem<T>, equalize: bool) -> Result<(Vec<Event<T>>, DensityMatrix<T>)> {
    check_two(sys)?;
    if sys.is_homonuclear() {
        return Err(Error::InvalidSystem("heteronuclear sequence on a homonuclear pair".into()));
    }
    let (pi, ps) = (sys.spins[0].polarisation, sys.spins[1].polarisation);
    let mut events = Vec::new();
    let unequal = (pi - ps).abs() > T::tight_tol() * pi.abs().max(ps.abs());
    if unequal {
        if !equalize {
            return Err(Error::InvalidSystem("polarisations differ; enable the equalization step".into()));
        }
        let (hi, lo, k) = if pi.abs() > ps.abs() { (pi, ps, 0) } else { (ps, pi, 1) };
        events.push(pulse(k, equalization_angle(hi, lo)?, T::zero()));
        events.push(Event::Crush { preserve_zero_quantum: true, area: T::lit(2.3) });
    }
    let j = sys.j(0, 1);
    let last_phase = if j > T::zero() { -T::FRAC_PI_2() } else { T::FRAC_PI_2() };
    events.extend([
        pulse_on(&[0, 1], deg(45.0), T::zero()),
        delay(T::one() / (T::lit(2.0) * j.abs())),
        pulse_on(&[0, 1], deg(30.0), last_phase),
        Event::Crush { preserve_zero_quantum: true, area: T::one() },
    ]);
    let rho = Simulator::new(sys).run(&thermal_state_linear(sys), &events)?;
    Ok((events, rho))
}

/// Cat-state network: H on spin 0, then a CNOT chain down the register.
pub fn cat_prepare<T: Real>(n: usize) -> Result<Vec<GateSpec<T>>> {
    if n < 2 {
        return Err(Error::InvalidParameter("cat states need at least two spins".into()));
    }
    let mut g = vec![GateSpec::new(GateName::H, &[0])];
    g.extend((0..n - 1).map(|k| GateSpec::new(GateName::CNOT, &[k, k + 1])));
    Ok(g)
}

/// Keep the identity and the coherence order `+-n` part of an operator.
pub fn select_maximal_coherence<T: Real>(m: &Mat<T>) -> Mat<T> {
    let d = m.rows();
    let top = d - 1;
    let mut out = Mat::identity(d).scale(m.trace() / cr(T::from_usize_lossy(d)));
    out[(0, top)] = m[(0, top)];
    out[(top, 0)] = m[(top, 0)];
    out
}

/// Cat-state selection: run the cat network, keep only the maximal
/// coherences of the deviation, then run the network backwards. The result
/// is a pseudo-pure state of spins `1..n` conditional on spin 0 being
/// `|0>`, with spin 0 left proportional to its z operator.
pub fn cat_select<T: Real>(rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
    let n = rho.num_spins();
    let u = network_propagator(&cat_prepare::<T>(n)?, n)?;
    let fwd = u.conjugate(rho.matrix());
    let sel = select_maximal_coherence(&fwd);
    Ok(DensityMatrix::new_unchecked(u.adjoint().conjugate(&sel).hermitian_part()))
}

/// Result of a logical labelling search.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Labelling<T: Real> {
    /// `perm[i]`: basis state that population `i` is moved to.
    pub permutation: Vec<usize>,
    pub network: Vec<GateSpec<T>>,
    /// Source states placed on `|000>, |001>, |010>, |011>`.
    pub chosen: [usize; 4],
    /// Population gap between the labelled ground state and the others.
    pub signal: T,
}

/// Logical labelling on three spins: move the largest population and three
/// equal smaller ones onto `|000>, |001>, |010>, |011>` so that the state
/// is pseudo-pure conditional on spin 0 being `|0>`. With `triple = None`
/// the equal triple with the lowest population (largest signal) is used.
pub fn logical_label<T: Real>(populations: &[T], triple: Option<[usize; 3]>) -> Result<Labelling<T>> {
    if populations.len() != 8 {
        return Err(Error::Unsupported("logical labelling is implemented for three spins".into()));
    }
    let tol = T::lit(PSEUDO_PURE_TOL);
    let top = (0..8).fold(0, |b, i| if populations[i] > populations[b] { i } else { b });
    let spread = |t: &[usize; 3]| {
        let v: Vec<T> = t.iter().map(|&i| populations[i]).collect();
        v.iter().copied().fold(T::neg_infinity(), T::max) - v.iter().copied().fold(T::infinity(), T::min)
    };
    let chosen = match triple {
        Some(t) => {
            if t.contains(&top) || t[0] == t[1] || t[1] == t[2] || t[0] == t[2] || t.iter().any(|&i| i >= 8) {
                return Err(Error::InvalidParameter("triple must be three distinct states other than the largest".into()));
            }
            if spread(&t) > tol {
                return Err(Error::NotPseudoPure(format!("chosen populations differ by {:e}", spread(&t).as_f64())));
            }
            t
        }
        None => {
            let others: Vec<usize> = (0..8).filter(|&i| i != top).collect();
            let mut best: Option<[usize; 3]> = None;
            let mut best_spread = T::infinity();
            for a in 0..others.len() {
                for b in a + 1..others.len() {
                    for c in b + 1..others.len() {
                        let t = [others[a], others[b], others[c]];
                        let s = spread(&t);
                        best_spread = best_spread.min(s);
                        if s <= tol && best.is_none_or(|bt| populations[t[0]] < populations[bt[0]]) {
                            best = Some(t);
                        }
                    }
                }
            }
            best.ok_or_else(|| {
                Error::NotPseudoPure(format!("no three equal populations; closest triple differs by {:e}", best_spread.as_f64()))
            })?
        }
    };
    let signal = populations[top] - populations[chosen[0]];
    if !(signal > tol) {
        return Err(Error::NotPseudoPure("labelled ground state is not above the others".into()));
    }
    let mut permutation = vec![usize::MAX; 8];
    permutation[top] = 0;
    for (k, &i) in chosen.iter().enumerate() {
        permutation[i] = k + 1;
    }
    let mut next = 4;
    for p in permutation.iter_mut() {
        if *p == usize::MAX {
            *p = next;
            next += 1;
        }
    }
    let network = synthesize_permutation(&permutation, 3)?;
    Ok(Labelling { permutation, network, chosen: [top, chosen[0], chosen[1], chosen[2]], signal })
}

/// JSON report of a prepared state.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PreparedStateReport<T: Real> {
    pub epsilon: Option<T>,
    pub eigenvalues: Vec<T>,
    pub pauli_expansion: ProductOperatorExpansion<T>,
}

impl<T: Real> PreparedStateReport<T> {
    pub fn new(rho: &DensityMatrix<T>) -> Self {
        PreparedStateReport { epsilon: epsilon_of(rho).ok(), eigenvalues: rho.matrix().eigvalsh(), pauli_expansion: rho.expansion() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warren_single_spin() {
        let (e, a) = warren_bound(1, 1e-5).unwrap();
        assert!((e - (0.5e-5f64).tanh()).abs() < 1e-18);
        assert!((a - 5e-6).abs() < 1e-18);
        let (_, a2) = warren_bound(2, 1e-5).unwrap();
        assert!((a2 - 0.5e-5).abs() < 1e-18);
    }

    #[test]
    fn bounds_for_two_and_four() {
        let (l, u) = entanglement_bounds(2).unwrap();
        assert!((l - 1.0 / 9.0).abs() < 1e-15 && (u - 1.0 / 3.0).abs() < 1e-15);
        assert!((entanglement_bounds(4).unwrap().0 - 1.0 / 129.0).abs() < 1e-15);
        assert!(entanglement_bounds(1).is_err());
    }

    #[test]
    fn cyclic_set_starts_with_identity() {
        let p = cyclic_permutations(2);
        assert_eq!(p, vec![vec![0, 1, 2, 3], vec![0, 2, 3, 1], vec![0, 3, 1, 2]]);
    }

    #[test]
    fn synthesized_networks_match_permutations() {
        let perms: [Vec<usize>; 3] = [vec![1, 0], vec![0, 3, 1, 2], vec![5, 2, 7, 0, 1, 6, 4, 3]];
        for p in &perms {
            let n = p.len().trailing_zeros() as usize;
            let g = synthesize_permutation::<f64>(p, n).unwrap();
            let u = network_propagator(&g, n).unwrap();
            assert!(u.max_abs_diff(&permutation_matrix(p).unwrap()) < 1e-15, "{p:?}");
        }
    }

    #[test]
    fn product_operator_average_is_pseudo_pure_deviation() {
        let m = product_operator_average::<f64>(2);
        let d: Vec<f64> = m.diagonal().iter().map(|z| z.re).collect();
        // (Iz + Sz + 2IzSz)/3 has populations {1/2, -1/6, -1/6, -1/6}
        assert!((d[0] - 0.5).abs() < 1e-15);
        assert!(d[1..].iter().all(|&x| (x + 1.0 / 6.0).abs() < 1e-15));
    }
}
