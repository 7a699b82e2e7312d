use spinforge::events::{Event, Simulator};
use spinforge::gates::network_propagator;
use spinforge::linalg::Mat;
use spinforge::prep::*;
use spinforge::spin::operators::{rotation_z, spin_op, total_spin_op};
use spinforge::spin::{thermal_state_linear, DensityMatrix, Ket, ProductOperatorExpansion, SpinSystem};

fn homonuclear_pair() -> SpinSystem<f64> {
    SpinSystem::homonuclear(&[400.0, -250.0], 12.0, 1e-5, 10.0, 1.0).unwrap()
}

#[test]
fn pseudo_pure_limits() {
    let k = Ket::<f64>::bell("phi+").unwrap();
    let pure = pseudo_pure(&PseudoPureSpec { epsilon: 1.0, target: k.clone() }).unwrap();
    assert!((pure.purity() - 1.0).abs() < 1e-14);
    let mixed = pseudo_pure(&PseudoPureSpec { epsilon: 0.0, target: k.clone() }).unwrap();
    assert!(mixed.matrix().max_abs_diff(&Mat::identity(4).scale_real(0.25)) < 1e-15);
    assert!(pseudo_pure(&PseudoPureSpec { epsilon: 1.2, target: k }).is_err());
}

#[test]
fn werner_state_at_peres_threshold_is_separable() {
    let bell = Ket::<f64>::bell("psi-").unwrap();
    let at = pseudo_pure(&PseudoPureSpec { epsilon: peres_threshold(), target: bell.clone() }).unwrap();
    assert!(at.is_ppt(&[1], 1e-12));
    let above = pseudo_pure(&PseudoPureSpec { epsilon: peres_threshold() + 1e-3, target: bell }).unwrap();
    assert!(!above.is_ppt(&[1], 1e-12));
    let (lower, upper) = entanglement_bounds(2).unwrap();
    assert!(lower < peres_threshold() + 1e-15 && peres_threshold() <= upper + 1e-15);
}

#[test]
fn warren_bound_shrinks_with_size_and_matches_approximation() {
    let x = 1e-5;
    let mut prev = f64::INFINITY;
    for n in 1..=10 {
        let (e, a) = warren_bound(n, x).unwrap();
        assert!(e < prev);
        assert!((a / e - 1.0).abs() < 1e-6);
        prev = e;
    }
}

#[test]
fn entanglement_upper_bound_asymptotics() {
    let (_, u) = entanglement_bounds(60).unwrap();
    assert!((u * 2f64.powf(30.0) - 1.0).abs() < 1e-8);
    for n in 2..=12 {
        let (l, u) = entanglement_bounds(n).unwrap();
        assert!(l < u);
    }
}

#[test]
fn epsilon_rejects_thermal_state() {
    let rho = thermal_state_linear(&homonuclear_pair());
    assert!(epsilon_of(&rho).is_err());
}

#[test]
fn two_spin_temporal_average_pattern() {
    // deviation populations {1, 0, 0, -1} in units of 1e-5
    let u = 1e-5f64;
    let pops = [0.25 + u, 0.25, 0.25, 0.25 - u];
    let rho = DensityMatrix::from_matrix(Mat::diag_real(&pops)).unwrap();
    let avg = temporal_average(&rho, None).unwrap();
    let p = avg.populations();
    assert!((p[0] - 0.25 - u).abs() < 1e-15);
    for &x in &p[1..] {
        assert!((x - 0.25 + u / 3.0).abs() < 1e-15);
    }
    let eps = epsilon_of(&avg).unwrap();
    assert!((eps - temporal_average_epsilon(&pops)).abs() < 1e-15);
    // the same value through the mean over all populations
    let mean_all = pops.iter().sum::<f64>() / 4.0;
    assert!((eps - (pops[0] - mean_all) * 4.0 / 3.0).abs() < 1e-15);
    // a fixed point
    let again = temporal_average(&avg, None).unwrap();
    assert!(again.matrix().max_abs_diff(avg.matrix()) < 1e-15);
}

#[test]
fn cnot_networks_are_the_cyclic_shifts() {
    let cyc = cyclic_permutations(2);
    let [p1, p2] = two_spin_permutation_networks::<f64>();
    let u1 = network_propagator(&p1, 2).unwrap();
    let u2 = network_propagator(&p2, 2).unwrap();
    assert!(u1.max_abs_diff(&permutation_matrix(&cyc[2]).unwrap()) < 1e-15);
    assert!(u2.max_abs_diff(&permutation_matrix(&cyc[1]).unwrap()) < 1e-15);
}

#[test]
fn temporal_average_needs_ground_state_maximum() {
    let rho = DensityMatrix::from_matrix(Mat::diag_real(&[0.2, 0.3, 0.25, 0.25])).unwrap();
    assert!(matches!(temporal_average(&rho, None), Err(spinforge::Error::InvalidParameter(_))));
}

#[test]
fn homonuclear_spatial_average() {
    let sys = homonuclear_pair();
    let (events, rho) = spatial_average_homonuclear(&sys).unwrap();
    let sim = Simulator::new(&sys);
    let dev = &spin_op::<f64>(2, 0, 3) + &spin_op(2, 1, 3);
    let out = ProductOperatorExpansion::expand(&sim.run_operator(&dev, &events).unwrap()).unwrap();
    let want = ProductOperatorExpansion::from_labels(2, &[("Iz", 0.5), ("Sz", 0.5), ("IzSz", 0.5)]).unwrap();
    assert!(out.max_diff(&want) < 1e-8, "{:?}", out.labelled());
    let eps = epsilon_of(&rho).unwrap();
    assert!((eps - 0.5 * sys.spins[0].polarisation).abs() < 1e-12);
}

#[test]
fn homonuclear_crushes_leave_no_coherence() {
    let sys = homonuclear_pair();
    let (events, _) = spatial_average_homonuclear(&sys).unwrap();
    let sim = Simulator::new(&sys);
    let mut m = &spin_op::<f64>(2, 0, 3) + &spin_op(2, 1, 3);
    for ev in &events {
        m = sim.run_operator(&m, std::slice::from_ref(ev)).unwrap();
        if matches!(ev, Event::Crush { .. }) {
            // only populations and zero-quantum terms can survive; none of
            // the latter arise in this sequence
            for r in 0..4 {
                for c in 0..4 {
                    if r != c {
                        assert!(m[(r, c)].norm() < 1e-12);
                    }
                }
            }
        }
    }
}

#[test]
fn heteronuclear_spatial_average() {
    let sys = SpinSystem::heteronuclear_pair(215.0, 2.5e-6).unwrap();
    assert!(spatial_average_heteronuclear(&sys, false).is_err());
    let (events, rho) = spatial_average_heteronuclear(&sys, true).unwrap();
    let delta_s = sys.spins[1].polarisation;
    let dev = rho.deviation().expansion().scaled(2.0 / delta_s);
    let c = (3.0f64 / 8.0).sqrt();
    let want = ProductOperatorExpansion::from_labels(2, &[("Iz", c), ("Sz", c), ("IzSz", c)]).unwrap();
    assert!(dev.max_diff(&want) < 1e-8, "{:?}", dev.labelled());
    assert!(c > 0.5);
    // equalization pulse angle for a 4:1 polarisation ratio
    match &events[0] {
        Event::Pulse { angle, .. } => assert!((angle - 0.25f64.acos()).abs() < 1e-15),
        e => panic!("unexpected first event {e:?}"),
    }
    assert!(epsilon_of(&rho).is_ok());
}

#[test]
fn cat_network_and_phase_sensitivity() {
    let n = 4;
    let u = network_propagator(&cat_prepare::<f64>(n).unwrap(), n).unwrap();
    let out = Ket::basis(n, 0).apply(&u);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    assert!((out.amps()[0].re - r).abs() < 1e-15 && (out.amps()[15].re - r).abs() < 1e-15);
    // collective z rotation by phi: relative phase e^{i n phi}
    let phi = 0.3;
    let mut rz = Mat::identity(1);
    for _ in 0..n {
        rz = rz.kron(&rotation_z(phi));
    }
    let rot = out.apply(&rz);
    let rel = rot.amps()[15] / rot.amps()[0];
    assert!((rel.arg() - n as f64 * phi).abs() < 1e-12);
}

#[test]
fn cat_selection_on_thermal_three_spins() {
    let sys = SpinSystem::homonuclear(&[0.0, 100.0, 200.0], 5.0, 1e-4, 10.0, 1.0).unwrap();
    let rho = thermal_state_linear(&sys);
    let sel = cat_select(&rho).unwrap();
    let sub = sel.conditional(0, 0).unwrap();
    assert!(epsilon_of(&sub).unwrap() > 0.0);
    // spin 0 is left along z only
    let e: ProductOperatorExpansion<f64> = sel.deviation().expansion();
    assert!(e.get("I1x").abs() < 1e-15 && e.get("I1y").abs() < 1e-15);
    // phase-cycling oracle: average over 2n+2 collective z rotations
    // weighted by e^{-i n phi} keeps exactly the order +-n coherences
    let n = 3;
    let u = network_propagator(&cat_prepare::<f64>(n).unwrap(), n).unwrap();
    let fwd = u.conjugate(rho.matrix());
    let steps = 2 * n + 2;
    let fz = total_spin_op::<f64>(n, 3);
    let mut acc = Mat::zeros(8, 8);
    for k in 0..steps {
        let phi = 2.0 * std::f64::consts::PI * k as f64 / steps as f64;
        let rot = fz.expm_hermitian(phi).conjugate(&fwd);
        let w = num_complex::Complex::from_polar(1.0, -(n as f64) * phi);
        acc = &acc + &(&rot.scale(w) + &rot.scale(w.conj()));
    }
    let cycled = &acc.scale_real(1.0 / steps as f64) + &Mat::identity(8).scale_real(1.0 / 8.0);
    let oracle = u.adjoint().conjugate(&cycled);
    assert!(oracle.max_abs_diff(sel.matrix()) < 1e-15);
}

#[test]
fn logical_labelling_three_spin_thermal() {
    // deviations {3,1,1,1,-1,-1,-1,-3} in units of 1e-6
    let dev = [3.0, 1.0, 1.0, -1.0, 1.0, -1.0, -1.0, -3.0];
    let pops: Vec<f64> = dev.iter().map(|d| 0.125 + 1e-6 * d).collect();
    let rho = DensityMatrix::from_matrix(Mat::diag_real(&pops)).unwrap();
    // default: the upper excited triple |011>, |101>, |110>
    let best = logical_label(&pops, None).unwrap();
    assert_eq!(best.chosen, [0, 3, 5, 6]);
    // lower excited triple |001>, |010>, |100>
    let low = logical_label(&pops, Some([1, 2, 4])).unwrap();
    assert!(best.signal > low.signal);
    for lab in [&best, &low] {
        let u = network_propagator(&lab.network, 3).unwrap();
        let out = rho.evolve_unitary(&u);
        let sub = out.conditional(0, 0).unwrap();
        assert!(epsilon_of(&sub).is_ok());
    }
    let bad = [0.2, 0.15, 0.14, 0.13, 0.12, 0.1, 0.09, 0.07];
    assert!(matches!(logical_label(&bad, None), Err(spinforge::Error::NotPseudoPure(_))));
}

#[test]
fn prepared_state_report_serializes() {
    let rho = pseudo_pure(&PseudoPureSpec { epsilon: 0.2, target: Ket::<f64>::basis(2, 0) }).unwrap();
    let r = PreparedStateReport::new(&rho);
    let js = serde_json::to_value(&r).unwrap();
    assert!((js["epsilon"].as_f64().unwrap() - 0.2).abs() < 1e-12);
    assert_eq!(js["eigenvalues"].as_array().unwrap().len(), 4);
    assert!(js["pauli_expansion"]["terms"]["IzSz"].is_number());
}
