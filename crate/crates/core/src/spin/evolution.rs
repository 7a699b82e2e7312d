use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::{cis, cr, Real, C};
use crate::spin::density::DensityMatrix;
use crate::spin::operators::bit;
use crate::spin::system::SpinSystem;

/// Thermal state `prod_k (E/2 + delta_k Iz_k)` (exact product form).
pub fn thermal_state<T: Real>(sys: &SpinSystem<T>) -> DensityMatrix<T> {
    let n = sys.n();
    let half = T::lit(0.5);
    let diag: Vec<T> = (0..1usize << n)
        .map(|j| {
            sys.spins
                .iter()
                .enumerate()
                .map(|(k, s)| if bit(j, k, n) == 0 { half + half * s.polarisation } else { half - half * s.polarisation })
                .fold(T::one(), |a, b| a * b)
        })
        .collect();
    DensityMatrix::new_unchecked(Mat::diag_real(&diag))
}

/// First-order thermal state `E/2^n + (1/2^(n-1)) sum_k delta_k Iz_k`.
///
/// This is the high-temperature form whose deviation is exactly linear in
/// the single-spin polarisations; the product-form cross terms are dropped.
pub fn thermal_state_linear<T: Real>(sys: &SpinSystem<T>) -> DensityMatrix<T> {
    let n = sys.n();
    let d = T::from_usize_lossy(1 << n);
    let diag: Vec<T> = (0..1usize << n)
        .map(|j| {
            let dev: T = sys.spins.iter().enumerate().map(|(k, s)| if bit(j, k, n) == 0 { s.polarisation } else { -s.polarisation }).sum();
            (T::one() + dev) / d
        })
        .collect();
    DensityMatrix::new_unchecked(Mat::diag_real(&diag))
}

/// Diagonal of the weak-coupling Hamiltonian (rad/s) in the frame set by
/// `offsets_hz`: `sum 2 pi (nu_k - o_k) Iz_k + sum_{k<l} pi J_kl 2 Iz_k Iz_l`.
pub fn free_hamiltonian_diag<T: Real>(sys: &SpinSystem<T>, offsets_hz: &[T]) -> Result<Vec<T>> {
    let n = sys.n();
    if offsets_hz.len() != n {
        return Err(Error::DimensionMismatch(format!("{} offsets for {} spins", offsets_hz.len(), n)));
    }
    let two_pi = T::lit(2.0) * T::PI();
    let half = T::lit(0.5);
    Ok((0..1usize << n)
        .map(|j| {
            let m: Vec<T> = (0..n).map(|k| if bit(j, k, n) == 0 { half } else { -half }).collect();
            let mut e = T::zero();
            for k in 0..n {
                e += two_pi * (sys.spins[k].shift_hz - offsets_hz[k]) * m[k];
                for l in (k + 1)..n {
                    e += two_pi * sys.j_hz[k][l] * m[k] * m[l];
                }
            }
            e
        })
        .collect())
}

pub fn free_hamiltonian<T: Real>(sys: &SpinSystem<T>, offsets_hz: &[T]) -> Result<Mat<T>> {
    Ok(Mat::diag_real(&free_hamiltonian_diag(sys, offsets_hz)?))
}

/// `exp(-i H t)`.
pub fn propagator<T: Real>(h: &Mat<T>, t: T) -> Mat<T> {
    h.expm_hermitian(t)
}

/// Free-evolution propagator, built directly from the diagonal.
pub fn free_propagator<T: Real>(sys: &SpinSystem<T>, offsets_hz: &[T], t: T) -> Result<Mat<T>> {
    let d = free_hamiltonian_diag(sys, offsets_hz)?;
    let ph: Vec<C<T>> = d.iter().map(|&e| cis(-e * t)).collect();
    Ok(Mat::diag(&ph))
}

/// `U rho U^dagger` with `U = exp(-i H t)`.
pub fn evolve<T: Real>(rho: &DensityMatrix<T>, h: &Mat<T>, t: T) -> Result<DensityMatrix<T>> {
    if h.rows() != rho.dim() || !h.is_square() {
        return Err(Error::DimensionMismatch("Hamiltonian does not match state".into()));
    }
    if !h.is_hermitian(T::loose_tol() * (T::one() + h.max_abs())) {
        return Err(Error::NotHermitian(h.max_abs_diff(&h.adjoint()).as_f64()));
    }
    Ok(rho.evolve_unitary(&propagator(h, t)))
}

/// If `v = e^{i gamma} u` within `tol` (max-abs), return `gamma`.
pub fn global_phase_between<T: Real>(u: &Mat<T>, v: &Mat<T>, tol: T) -> Option<T> {
    if u.rows() != v.rows() || u.cols() != v.cols() {
        return None;
    }
    let ip = u.inner(v);
    if ip.norm() == T::zero() {
        return None;
    }
    let ph = ip / cr(ip.norm());
    let gamma = ph.arg();
    if u.scale(ph).max_abs_diff(v) <= tol {
        Some(gamma)
    } else {
        None
    }
}

pub fn equal_up_to_global_phase<T: Real>(u: &Mat<T>, v: &Mat<T>, tol: T) -> bool {
    global_phase_between(u, v, tol).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::operators::spin_op;

    #[test]
    fn thermal_state_is_product() {
        let sys = SpinSystem::<f64>::homonuclear(&[0.0, 5.0], 10.0, 0.2, 2.0, 1.0).unwrap();
        let r = thermal_state(&sys);
        let one = Mat::<f64>::identity(2).scale_real(0.5);
        let iz = spin_op::<f64>(1, 0, 3).scale_real(0.2);
        let f = &one + &iz;
        assert!(r.matrix().max_abs_diff(&f.kron(&f)) < 1e-15);
    }

    #[test]
    fn coupling_half_period_gives_controlled_z_up_to_locals() {
        // 1/(2J) of coupling equals exp(-i pi/2 2IzSz)
        let sys = SpinSystem::<f64>::homonuclear(&[0.0, 0.0], 10.0, 0.0, 2.0, 1.0).unwrap();
        let u = free_propagator(&sys, &[0.0, 0.0], 0.05).unwrap();
        let zz = spin_op::<f64>(2, 0, 3).matmul(&spin_op(2, 1, 3)).scale_real(2.0);
        let want = zz.expm_hermitian(std::f64::consts::FRAC_PI_2);
        assert!(u.max_abs_diff(&want) < 1e-14);
    }

    #[test]
    fn global_phase_detection() {
        let u = spin_op::<f64>(1, 0, 1).expm_hermitian(0.3);
        let v = u.scale(cis(0.7));
        let g = global_phase_between(&u, &v, 1e-12).unwrap();
        assert!((g - 0.7).abs() < 1e-12);
        assert!(global_phase_between(&u, &spin_op::<f64>(1, 0, 2).expm_hermitian(0.3), 1e-6).is_none());
    }
}
