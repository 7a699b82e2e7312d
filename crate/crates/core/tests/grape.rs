use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinforge::gates::{standard_gate, GateName, GateSpec};
use spinforge::grape::*;
use spinforge::linalg::Mat;
use spinforge::spin::free_hamiltonian;
use spinforge::spin::operators::rotation_xy;
use spinforge::SpinSystem;

fn x90() -> Mat<f64> {
    rotation_xy(std::f64::consts::FRAC_PI_2, 0.0)
}

fn cnot_problem() -> ControlProblem<f64> {
    let sys = SpinSystem::homonuclear(&[50.0, -50.0], 10.0, 1e-5, 10.0, 1.0).unwrap();
    let drift = free_hamiltonian(&sys, &[0.0, 0.0]).unwrap();
    let target = standard_gate(&GateSpec::new(GateName::CNOT, &[0, 1]), 2).unwrap();
    ControlProblem::xy(drift, target).unwrap()
}

#[test]
fn cnot_over_ising_drift() {
    let t0 = Instant::now();
    let p = cnot_problem();
    let opts = GrapeOptions { max_iters: 3000, ..GrapeOptions::default() };
    let r = optimize_multistart(&p, 50, 0.075 / 50.0, None, &opts).unwrap();
    eprintln!("cnot F={} iters={} status={:?} {:?}", r.fidelity, r.iterations, r.status, t0.elapsed());
    assert!(r.fidelity >= 0.99);
}

#[test]
fn x90_ten_segments() {
    let p = ControlProblem::xy(Mat::zeros(2, 2), x90()).unwrap();
    let opts = GrapeOptions { max_iters: 200, ..GrapeOptions::default() };
    let r = optimize_multistart(&p, 10, 1e-5, None, &opts).unwrap();
    eprintln!("x90 F={} iters={} status={:?}", r.fidelity, r.iterations, r.status);
    assert!(r.fidelity >= 0.999);
}

fn random_problem(rng: &mut ChaCha8Rng) -> (ControlProblem<f64>, ControlSequence<f64>) {
    let n = rng.gen_range(1..=2usize);
    let shifts: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
    let sys = SpinSystem::homonuclear(&shifts, rng.gen_range(-5.0..5.0), 1e-5, 10.0, 1.0).unwrap();
    let drift = free_hamiltonian(&sys, &vec![0.0; n]).unwrap();
    let d = 1 << n;
    // random unitary target; the drift and amplitudes keep every segment
    // rotation to a few radians so the fidelity is resolved well enough
    // for a 1e-7 difference step from a random Hermitian generator
    let h = Mat::from_fn(d, d, |_, _| num_complex::Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let target = (&h + &h.adjoint()).expm_hermitian(1.0);
    let p = ControlProblem::xy(drift, target).unwrap();
    let dt = rng.gen_range(1e-2..5e-2);
    let nseg = rng.gen_range(4..=10);
    let segs = (0..nseg).map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0) * 2.0 / dt).collect()).collect();
    (p, ControlSequence::new(dt, segs).unwrap())
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let (p, c) = random_problem(&mut rng);
        let (_, g) = p.gradient(&c).unwrap();
        let fd = p.finite_difference_gradient(&c, 1e-7).unwrap();
        let scale = fd.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let dev = g.iter().flatten().zip(fd.iter().flatten()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(dev <= 1e-5 * scale, "trial {trial}: deviation {dev} against scale {scale}");
        worst = worst.max(dev / scale);
    }
    eprintln!("worst relative deviation {worst:.2e}");
}

#[test]
fn reported_fidelity_is_reproducible_and_trace_monotone() {
    let p = cnot_problem();
    let c0 = initial_controls(50, 2, 0.075 / 50.0, 11).unwrap();
    let r = optimize(&p, &c0, &GrapeOptions { max_iters: 100, ..GrapeOptions::default() }).unwrap();
    assert!((p.fidelity(&r.controls).unwrap() - r.fidelity).abs() < 1e-10);
    assert!(r.trace.windows(2).all(|w| w[1] >= w[0]));
    let csv = r.trace_csv();
    assert_eq!(csv.lines().count(), r.trace.len() + 1);
}

#[test]
fn robust_pulse_beats_plain_pulse_under_rf_error() {
    let p = ControlProblem::xy(Mat::zeros(2, 2), x90()).unwrap();
    let opts = GrapeOptions { max_iters: 20000, tol: 1e-5, starts: 2, ..GrapeOptions::default() };
    let plain = optimize_multistart(&p, 20, 2e-5, None, &opts).unwrap();
    let robust = optimize_multistart(&p, 20, 2e-5, Some(&default_rf_scalings()), &opts).unwrap();
    let fp = p.fidelity_at(&plain.controls, 0.95).unwrap();
    let fr = p.fidelity_at(&robust.controls, 0.95).unwrap();
    eprintln!("plain {fp} robust {fr} {:?} {} {:?}", robust.status, robust.iterations, robust.trace.last());
    assert!(fr > fp);
}

#[test]
fn proportional_weights_give_same_objective() {
    let p = ControlProblem::xy(Mat::zeros(2, 2), x90()).unwrap();
    let c = initial_controls(8, 2, 1e-5, 4).unwrap();
    let a = c.clone().with_rf_scalings(&[(1.0, 0.9), (2.0, 1.0), (1.0, 1.1)]).unwrap();
    let b = c.with_rf_scalings(&[(3.0, 0.9), (6.0, 1.0), (3.0, 1.1)]).unwrap();
    let (fa, ga) = p.robust_objective(&a).unwrap();
    let (fb, gb) = p.robust_objective(&b).unwrap();
    assert!((fa - fb).abs() < 1e-15);
    assert_eq!(ga.len(), gb.len());
}

#[test]
fn smp_matches_off_resonance_propagator() {
    let pulse = SmpPulse { amplitude: 2.0 * std::f64::consts::PI * 250.0, phase: 0.4, offset_hz: 100.0, duration_s: 0.01 };
    let params = SmpParams::new(vec![pulse]).unwrap();
    let drift = Mat::zeros(2, 2);
    let exact = smp_propagator(&params, &drift).unwrap();
    let compiled = sequence_propagator(&smp_compile(&params, 1e-5).unwrap(), &drift, 1.0).unwrap();
    let f = unitary_fidelity(&exact, &compiled);
    assert!(f > 1.0 - 1e-6, "{f}");
}

#[test]
fn smp_two_pulses_compose() {
    let a = SmpPulse { amplitude: 3000.0, phase: 0.1, offset_hz: -300.0, duration_s: 2e-3 };
    let b = SmpPulse { amplitude: 5000.0, phase: 1.7, offset_hz: 450.0, duration_s: 1e-3 };
    let sys = SpinSystem::homonuclear(&[120.0, -80.0], 7.0, 1e-5, 10.0, 1.0).unwrap();
    let drift = free_hamiltonian(&sys, &[0.0, 0.0]).unwrap();
    let dt = 1e-5;
    let both = sequence_propagator(&smp_compile(&SmpParams::new(vec![a, b]).unwrap(), dt).unwrap(), &drift, 1.0).unwrap();
    let ua = sequence_propagator(&smp_compile(&SmpParams::new(vec![a]).unwrap(), dt).unwrap(), &drift, 1.0).unwrap();
    let ub = sequence_propagator(&smp_compile(&SmpParams::new(vec![b]).unwrap(), dt).unwrap(), &drift, 1.0).unwrap();
    assert!(both.max_abs_diff(&ub.matmul(&ua)) < 1e-12);
    let exact = smp_propagator(&SmpParams::new(vec![a, b]).unwrap(), &drift).unwrap();
    assert!(unitary_fidelity(&exact, &both) > 1.0 - 1e-6);
}
