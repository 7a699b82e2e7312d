use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinforge::gates::{standard_gate, GateName, GateSpec};
use spinforge::pulses::{
    bb1, composite_z, corpse, corpse_default, error_order, fidelity_sweep, infidelity, propagator_fidelity, pulse_propagator,
    sequence_propagator, sweep_csv, Bb1Placement, ErrorAxis, ErrorModel, ErrorOrder, PulseEvent,
};
use spinforge::spin::{equal_up_to_global_phase, rotation_xy, rotation_z};
use spinforge::Mat;

fn deg(seq: &[PulseEvent<f64>]) -> Vec<f64> {
    seq.iter().map(|p| p.theta.to_degrees()).collect()
}

fn naive(theta: f64) -> Vec<PulseEvent<f64>> {
    vec![PulseEvent::xy(theta, 0.0)]
}

#[test]
fn pulse_propagator_examples() {
    let x180 = pulse_propagator(&PulseEvent::<f64>::xy(PI, 0.0));
    let want = Mat::from_rows(&[vec![C::new(0.0, 0.0), C::new(0.0, -1.0)], vec![C::new(0.0, -1.0), C::new(0.0, 0.0)]]);
    assert!(x180.max_abs_diff(&want) < 1e-15);

    let h = pulse_propagator(&PulseEvent::<f64>::xy(FRAC_PI_2, FRAC_PI_2));
    let pseudo = standard_gate(&GateSpec::<f64>::new(GateName::HPseudo, &[0]), 1).unwrap();
    assert!(h.max_abs_diff(&pseudo) < 1e-15);

    assert!(pulse_propagator(&PulseEvent::<f64>::xy(0.0, 1.3)).max_abs_diff(&Mat::identity(2)) < 1e-15);

    // tilted axis against the matrix exponential
    let p = PulseEvent { theta: 1.1, phase: 0.4, colatitude: 0.9, duration_s: 0.0 };
    let n = [0.9f64.sin() * 0.4f64.cos(), 0.9f64.sin() * 0.4f64.sin(), 0.9f64.cos()];
    let h = Mat::from_rows(&[
        vec![C::new(0.5 * n[2], 0.0), C::new(0.5 * n[0], -0.5 * n[1])],
        vec![C::new(0.5 * n[0], 0.5 * n[1]), C::new(-0.5 * n[2], 0.0)],
    ]);
    assert!(pulse_propagator(&p).max_abs_diff(&h.expm_hermitian(1.1)) < 1e-14);
}

#[test]
fn composite_z_rotations() {
    for theta in [0.0, 0.3, FRAC_PI_4, 2.0, PI, -1.2] {
        let u = sequence_propagator(&composite_z(theta));
        assert!(u.max_abs_diff(&rotation_z(theta)) < 1e-12, "theta = {theta}");
    }
    let z = standard_gate(&GateSpec::<f64>::new(GateName::Z, &[0]), 1).unwrap();
    assert!(equal_up_to_global_phase(&sequence_propagator(&composite_z(PI)), &z, 1e-12));
    let t_nmr = standard_gate(&GateSpec::<f64>::new(GateName::TNmr, &[0]), 1).unwrap();
    assert!(sequence_propagator(&composite_z(FRAC_PI_4)).max_abs_diff(&t_nmr) < 1e-12);
    assert!(sequence_propagator(&composite_z(0.0)).max_abs_diff(&Mat::identity(2)) < 1e-15);
}

#[test]
fn corpse_angles() {
    let pi = corpse_default::<f64>(PI).unwrap();
    let a = deg(&pi);
    // theta1 = 360 + 90 - 30, theta2 = 360 - 60, theta3 = 90 - 30
    for (got, want) in a.iter().zip([420.0, 300.0, 60.0]) {
        assert!((got - want).abs() < 1e-9, "{a:?}");
    }
    assert_eq!(pi[1].phase, PI);

    let half = deg(&corpse_default::<f64>(FRAC_PI_2).unwrap());
    for (got, want) in half.iter().zip([384.3, 318.6, 24.3]) {
        assert!((got - want).abs() < 0.05, "{half:?}");
    }
    for (got, tycko) in half.iter().zip([385.0, 320.0, 25.0]) {
        assert!((got - tycko).abs() < 1.5);
    }

    assert!(corpse::<f64>(PI, [0, 0, 0]).is_err());
    assert!(corpse::<f64>(-1.0, [1, 1, 0]).is_err());
}

#[test]
fn bb1_phases() {
    let seq = bb1::<f64>(PI, false, Bb1Placement::Before).unwrap();
    assert_eq!(seq.len(), 4);
    assert!((seq[0].phase.to_degrees() - 104.477_512_185_929_9).abs() < 1e-9);
    assert!((seq[1].phase - 3.0 * seq[0].phase).abs() < 1e-15);
    assert!((seq[0].phase - (-0.25f64).acos()).abs() < 1e-15);

    let neg = bb1::<f64>(PI, true, Bb1Placement::Before).unwrap();
    let a = fidelity_sweep(&seq, ErrorAxis::Length, 0.2, 41).unwrap();
    let b = fidelity_sweep(&neg, ErrorAxis::Length, 0.2, 41).unwrap();
    for ((_, fa), (_, fb)) in a.iter().zip(&b) {
        assert!((fa - fb).abs() < 1e-12);
    }
    assert!(bb1::<f64>(5.0 * PI, false, Bb1Placement::Before).is_err());
}

#[test]
fn every_sequence_is_exact_without_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let theta = rng.gen_range(0.05..2.0 * PI);
        let target = rotation_xy(theta, 0.0);
        let mut seqs = vec![naive(theta), corpse_default(theta).unwrap()];
        for place in [Bb1Placement::Before, Bb1Placement::After, Bb1Placement::Middle] {
            seqs.push(bb1(theta, false, place).unwrap());
            seqs.push(bb1(theta, true, place).unwrap());
        }
        for s in &seqs {
            let u = ErrorModel::none().propagate(s);
            assert!(infidelity(&target, &u) <= 1e-10, "theta {theta}");
        }
        assert!(sequence_propagator(&composite_z(theta)).max_abs_diff(&rotation_z(theta)) < 1e-12);
    }
}

#[test]
fn naive_fidelity_series() {
    let eps = 0.1;
    let u = ErrorModel::along(ErrorAxis::Length, eps).propagate(&naive(PI));
    let f = propagator_fidelity(&rotation_xy(PI, 0.0), &u);
    assert!((f - (eps * PI / 2.0).cos()).abs() < 1e-12);
    assert!((f - (1.0 - eps * eps * PI * PI / 8.0)).abs() < 5e-5);
    assert!((f - 0.98769).abs() < 1e-5);
}

fn slope(o: ErrorOrder) -> f64 {
    match o {
        ErrorOrder::Order { slope, .. } => slope,
        ErrorOrder::Exact => f64::INFINITY,
    }
}

#[test]
fn fitted_error_orders() {
    let o = error_order(&naive(PI), ErrorAxis::Length).unwrap();
    assert!(matches!(o, ErrorOrder::Order { order: 2, .. }));
    assert!((slope(o) - 2.0).abs() < 0.2);

    let o = error_order(&bb1(PI, false, Bb1Placement::Before).unwrap(), ErrorAxis::Length).unwrap();
    assert!(matches!(o, ErrorOrder::Order { order: 6, .. }), "{o:?}");
    assert!((slope(o) - 6.0).abs() < 0.2);

    assert_eq!(error_order(&composite_z(0.7), ErrorAxis::None).unwrap(), ErrorOrder::Exact);

    let naive_off = slope(error_order(&naive(PI), ErrorAxis::Offset).unwrap());
    let corpse_off = slope(error_order(&corpse_default(PI).unwrap(), ErrorAxis::Offset).unwrap());
    assert!(corpse_off.round() > naive_off.round(), "{corpse_off} vs {naive_off}");
}

#[test]
fn composite_pulses_beat_naive_pulses_on_the_grid() {
    for theta in [FRAC_PI_2, PI] {
        let plain = fidelity_sweep(&naive(theta), ErrorAxis::Length, 0.2, 41).unwrap();
        let robust = fidelity_sweep(&bb1(theta, false, Bb1Placement::Before).unwrap(), ErrorAxis::Length, 0.2, 41).unwrap();
        for ((e, fp), (_, fr)) in plain.iter().zip(&robust) {
            assert!(fr >= &(fp - 1e-12), "BB1 theta {theta} eps {e}");
        }
        let plain = fidelity_sweep(&naive(theta), ErrorAxis::Offset, 0.2, 41).unwrap();
        let robust = fidelity_sweep(&corpse_default(theta).unwrap(), ErrorAxis::Offset, 0.2, 41).unwrap();
        for ((e, fp), (_, fr)) in plain.iter().zip(&robust) {
            assert!(fr >= &(fp - 1e-12), "CORPSE theta {theta} offset {e}");
        }
    }
}

#[test]
fn fidelity_is_blind_to_global_phase() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let u = rotation_xy(rng.gen_range(0.0..PI), rng.gen_range(0.0..2.0 * PI));
        let v = rotation_xy(rng.gen_range(0.0..PI), rng.gen_range(0.0..2.0 * PI));
        let ph = C::from_polar(1.0, rng.gen_range(0.0..2.0 * PI));
        assert!((propagator_fidelity(&u, &u) - 1.0).abs() < 1e-15);
        assert!((propagator_fidelity(&u, &u.scale(ph)) - 1.0).abs() < 1e-15);
        assert!((propagator_fidelity(&u, &v) - propagator_fidelity(&u.scale(ph), &v)).abs() < 1e-15);
        assert!((propagator_fidelity(&u, &v) - propagator_fidelity(&v, &u)).abs() < 1e-15);
    }
}

#[test]
fn zero_error_model_leaves_pulses_alone() {
    for p in corpse_default::<f64>(1.3).unwrap() {
        let q = ErrorModel::none().apply(&p);
        assert!((q.theta - p.theta).abs() < 1e-15);
        assert!((q.colatitude - p.colatitude).abs() < 1e-15);
        assert!(pulse_propagator(&q).max_abs_diff(&pulse_propagator(&p)) < 1e-15);
    }
}

#[test]
fn sweep_csv_rows() {
    let rows = fidelity_sweep(&naive(PI), ErrorAxis::Length, 0.2, 41).unwrap();
    let csv = sweep_csv(&rows);
    assert!(csv.starts_with("epsilon,fidelity\n-0.2,"));
    assert_eq!(csv.lines().count(), 42);
    assert!(fidelity_sweep(&naive(PI), ErrorAxis::Length, 0.2, 1).is_err());
}
