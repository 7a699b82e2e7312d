use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinforge::channels::{
    crush_ensemble, crush_gradient, generalized_amplitude_damping, phase_damping, projective_dephase, relax, segmented_relaxation_run,
    spin_relaxation_channels, KrausChannel,
};
use spinforge::events::{delay, pulse, Event, Simulator};
use spinforge::spin::{spin_op, thermal_state, Spin};
use spinforge::{DensityMatrix, Mat, SpinSystem};

fn random_state(n: usize, rng: &mut ChaCha8Rng) -> DensityMatrix<f64> {
    let d = 1 << n;
    let a = Mat::from_fn(d, d, |_, _| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let p = a.matmul(&a.adjoint());
    let tr = p.trace().re;
    DensityMatrix::from_matrix(p.scale_real(1.0 / tr)).unwrap()
}

fn trace_distance(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let d = a - b;
    0.5 * d.hermitian_part().eigvalsh().iter().map(|x| x.abs()).sum::<f64>()
}

fn valid_state(m: &Mat<f64>) -> bool {
    let herm = m.max_abs_diff(&m.adjoint()) < 1e-13;
    let unit = (m.trace() - C::new(1.0, 0.0)).norm() < 1e-13;
    let psd = m.hermitian_part().eigvalsh().iter().all(|&x| x > -1e-13);
    herm && unit && psd
}

fn system(t1: &[f64], t2: &[f64], pol: f64, j: f64) -> SpinSystem<f64> {
    let n = t1.len();
    let spins = (0..n)
        .map(|k| Spin {
            label: format!("I{}", k + 1),
            species: "1H".into(),
            shift_hz: 100.0 * k as f64,
            polarisation: pol,
            t1_s: t1[k],
            t2_s: t2[k],
        })
        .collect();
    let jm = (0..n).map(|a| (0..n).map(|b| if a == b { 0.0 } else { j }).collect()).collect();
    SpinSystem::new(spins, jm).unwrap()
}

fn channels_under_test() -> Vec<KrausChannel<f64>> {
    let mut out = vec![
        phase_damping(0.3, 1.0).unwrap(),
        phase_damping(0.0, 1.0).unwrap(),
        generalized_amplitude_damping(0.2, 0.7, 0.3).unwrap(),
        generalized_amplitude_damping(5.0, 0.7, -1.0).unwrap(),
    ];
    let sys = system(&[2.0], &[0.5], 0.1, 0.0);
    out.extend(spin_relaxation_channels(&sys, 0, 0.4).unwrap());
    out
}

#[test]
fn kraus_sets_are_complete() {
    for ch in channels_under_test() {
        let mut acc = Mat::zeros(2, 2);
        for e in &ch.operators {
            acc = &acc + &e.adjoint().matmul(e);
        }
        assert!(acc.max_abs_diff(&Mat::identity(2)) < 1e-14);
    }
    assert!(KrausChannel::new(vec![Mat::<f64>::identity(2).scale_real(1.1)]).is_err());
    assert!(phase_damping(-1.0, 1.0).is_err());
    assert!(generalized_amplitude_damping(0.1, 1.0, 1.5).is_err());
}

#[test]
fn channels_map_states_to_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let chans = channels_under_test();
    for _ in 0..50 {
        let rho = random_state(1, &mut rng);
        for ch in &chans {
            let out = ch.apply(&rho).unwrap();
            assert!(valid_state(out.matrix()));
        }
        let rho3 = random_state(3, &mut rng);
        let sys = system(&[1.0, 2.0, 3.0], &[0.5, 1.0, 0.2], 0.05, 7.0);
        assert!(valid_state(relax(&rho3, &sys, 0.3).unwrap().matrix()));
    }
}

#[test]
fn phase_damping_at_t2() {
    let ch = phase_damping(2.0, 2.0).unwrap();
    let plus = DensityMatrix::from_matrix(Mat::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]])).unwrap();
    let out = ch.apply(&plus).unwrap();
    assert!((out.matrix()[(0, 1)].re / 0.5 - (-1.0f64).exp()).abs() < 1e-14);
    assert!((out.matrix()[(0, 0)].re - 0.5).abs() < 1e-15);
}

#[test]
fn amplitude_damping_relaxes_to_thermal() {
    let pol = 0.3;
    let target = Mat::from_real_rows(&[&[0.5 + 0.5 * pol, 0.0], &[0.0, 0.5 - 0.5 * pol]]);
    let th = DensityMatrix::from_matrix(target.clone()).unwrap();
    let ch = generalized_amplitude_damping(0.4, 1.0, pol).unwrap();
    assert!(ch.apply(&th).unwrap().matrix().max_abs_diff(&target) < 1e-15);

    // populations relax as exp(-t/T1) towards equilibrium
    let rho = DensityMatrix::<f64>::basis(1, 1);
    let out = generalized_amplitude_damping(0.4, 1.0, pol).unwrap().apply(&rho).unwrap();
    let z = out.matrix()[(0, 0)].re - out.matrix()[(1, 1)].re;
    assert!((z - (pol + (-1.0 - pol) * (-0.4f64).exp())).abs() < 1e-14);

    let far = generalized_amplitude_damping(60.0, 1.0, pol).unwrap().apply(&rho).unwrap();
    assert!(far.matrix().max_abs_diff(&target) < 1e-12);
}

#[test]
fn relaxation_fixes_the_thermal_state() {
    let sys = system(&[1.0, 3.0, 0.5], &[0.3, 2.0, 0.5], 0.2, 5.0);
    let th = thermal_state(&sys);
    for t in [0.01, 0.5, 4.0] {
        assert!(relax(&th, &sys, t).unwrap().matrix().max_abs_diff(th.matrix()) < 1e-14);
    }
}

#[test]
fn zero_quantum_coherence_decays_at_the_summed_rate() {
    let (t2a, t2b) = (0.4, 1.5);
    let sys = system(&[2.0, 3.0], &[t2a, t2b], 0.1, 0.0);
    let mut m = Mat::<f64>::diag_real(&[0.25; 4]);
    m[(1, 2)] = C::new(0.1, 0.05);
    m[(2, 1)] = C::new(0.1, -0.05);
    let rho = DensityMatrix::from_matrix(m.clone()).unwrap();
    for t in [0.1, 0.3, 1.0] {
        let out = relax(&rho, &sys, t).unwrap();
        let want = m[(1, 2)] * (-t * (1.0 / t2a + 1.0 / t2b)).exp();
        assert!((out.matrix()[(1, 2)] - want).norm() < 1e-14, "t = {t}");
    }
}

#[test]
fn relaxation_is_contractive() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let sys = system(&[1.0, 2.0], &[0.5, 0.7], 0.1, 3.0);
    for _ in 0..30 {
        let a = random_state(2, &mut rng);
        let b = random_state(2, &mut rng);
        let before = trace_distance(a.matrix(), b.matrix());
        let t = rng.gen_range(0.0..2.0);
        let after = trace_distance(relax(&a, &sys, t).unwrap().matrix(), relax(&b, &sys, t).unwrap().matrix());
        assert!(after <= before + 1e-12);
        for ch in channels_under_test() {
            let a1 = random_state(1, &mut rng);
            let b1 = random_state(1, &mut rng);
            let d0 = trace_distance(a1.matrix(), b1.matrix());
            let d1 = trace_distance(&ch.apply_matrix(a1.matrix()), &ch.apply_matrix(b1.matrix()));
            assert!(d1 <= d0 + 1e-12);
        }
    }
}

#[test]
fn crushers_are_idempotent_linear_projections() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let sys = SpinSystem::<f64>::homonuclear(&[0.0, 50.0, 90.0], 4.0, 1e-5, 1.0, 1.0).unwrap();
    for keep in [true, false] {
        let a = random_state(3, &mut rng).into_matrix();
        let b = random_state(3, &mut rng).into_matrix();
        let ca = crush_gradient(&a, &sys, keep).unwrap();
        assert!(crush_gradient(&ca, &sys, keep).unwrap().max_abs_diff(&ca) < 1e-15);
        let mix = &a.scale_real(0.3) + &b.scale_real(0.7);
        let lin = &ca.scale_real(0.3) + &crush_gradient(&b, &sys, keep).unwrap().scale_real(0.7);
        assert!(crush_gradient(&mix, &sys, keep).unwrap().max_abs_diff(&lin) < 1e-15);
        assert!(crush_ensemble(&a, &sys, keep).unwrap().max_abs_diff(&ca) < 1e-10);
    }
    let a = random_state(3, &mut rng).into_matrix();
    let d = projective_dephase(&a, None).unwrap();
    assert!(projective_dephase(&d, None).unwrap().max_abs_diff(&d) < 1e-15);
    let d1 = projective_dephase(&a, Some(&[1])).unwrap();
    assert!(projective_dephase(&d1, Some(&[1])).unwrap().max_abs_diff(&d1) < 1e-15);
    assert!(projective_dephase(&a, Some(&[3])).is_err());
}

#[test]
fn crusher_keeps_zero_quantum_terms() {
    let sys = SpinSystem::<f64>::homonuclear(&[0.0, 30.0], 4.0, 1e-5, 1.0, 1.0).unwrap();
    let op = |k, ax| spin_op::<f64>(2, k, ax);
    let xx = op(0, 1).matmul(&op(1, 1));
    let yy = op(0, 2).matmul(&op(1, 2));
    let zq = &xx + &yy;
    let dq = &xx - &yy;
    let iz = op(0, 3);
    assert!(crush_gradient(&zq, &sys, true).unwrap().max_abs_diff(&zq) < 1e-15);
    assert!(crush_gradient(&dq, &sys, true).unwrap().max_abs_diff(&Mat::zeros(4, 4)) < 1e-15);
    assert!(crush_gradient(&zq, &sys, false).unwrap().max_abs_diff(&Mat::zeros(4, 4)) < 1e-15);
    assert!(crush_gradient(&iz, &sys, false).unwrap().max_abs_diff(&iz) < 1e-15);
    assert!(crush_gradient(&op(1, 1), &sys, true).unwrap().max_abs_diff(&Mat::zeros(4, 4)) < 1e-15);

    // heteronuclear: the "zero-quantum" combination is no longer protected
    let het = SpinSystem::<f64>::heteronuclear_pair(140.0, 1e-5).unwrap();
    assert!(crush_gradient(&zq, &het, true).unwrap().max_abs_diff(&Mat::zeros(4, 4)) < 1e-15);
    assert!(crush_ensemble(&zq, &het, true).unwrap().max_abs_diff(&Mat::zeros(4, 4)) < 1e-10);
}

#[test]
fn delay_only_segmented_run_matches_relax() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sys = system(&[1.0, 2.0], &[0.3, 0.8], 0.1, 0.0);
    let sim = Simulator::with_offsets(&sys, vec![0.0, 0.0]).unwrap();
    let rho = random_state(2, &mut rng);
    let t = 0.25;
    let (out, log) = segmented_relaxation_run(&sim, &[delay(0.1), delay(0.15)], &rho).unwrap();
    let u = sim.propagator(&[delay(t)]).unwrap();
    let a = relax(&rho.evolve_unitary(&u), &sys, t).unwrap();
    let b = relax(&rho, &sys, t).unwrap().evolve_unitary(&u);
    assert!(out.matrix().max_abs_diff(a.matrix()) < 1e-13);
    assert!(out.matrix().max_abs_diff(b.matrix()) < 1e-13);
    assert_eq!(log.len(), 2);
    assert!(log.iter().all(|f| (f.duration_s - t).abs() < 1e-15));
}

#[test]
fn inversion_recovery_style_sequence() {
    // 90x, tau, 90x on a thermal spin at resonance
    let (t1, t2, pol, tau) = (1.2, 0.4, 0.2, 0.3);
    let sys = system(&[t1], &[t2], pol, 0.0);
    let sim = Simulator::new(&sys);
    let events: Vec<Event<f64>> = vec![pulse(0, std::f64::consts::FRAC_PI_2, 0.0), delay(tau), pulse(0, std::f64::consts::FRAC_PI_2, 0.0)];
    let (out, log) = segmented_relaxation_run(&sim, &events, &thermal_state(&sys)).unwrap();
    let m = out.matrix();
    let z = m[(0, 0)].re - m[(1, 1)].re;
    let x = 2.0 * m[(1, 0)].re;
    let y = 2.0 * m[(1, 0)].im;
    assert!((z - (-pol * (-tau / t2).exp())).abs() < 1e-14, "z = {z}");
    assert!((y.abs() - pol * (1.0 - (-tau / t1).exp())).abs() < 1e-14, "y = {y}");
    assert!(x.abs() < 1e-14);
    assert_eq!(log.len(), 1);
}
