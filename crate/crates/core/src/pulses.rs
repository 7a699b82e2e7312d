//! Single-spin pulses, systematic error models and composite pulses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::{c, cr, Real, C};

/// Rotation by `theta` about the axis with azimuth `phase` and polar angle
/// `colatitude` (pi/2 for an on-resonance pulse).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PulseEvent<T: Real> {
    pub theta: T,
    pub phase: T,
    pub colatitude: T,
    #[serde(default)]
    pub duration_s: T,
}

impl<T: Real> PulseEvent<T> {
    /// On-resonance pulse `theta_phase`.
    pub fn xy(theta: T, phase: T) -> Self {
        PulseEvent { theta, phase, colatitude: T::FRAC_PI_2(), duration_s: T::zero() }
    }

    pub fn from_degrees(theta_deg: f64, phase_deg: f64) -> Self {
        Self::xy(T::lit(theta_deg.to_radians()), T::lit(phase_deg.to_radians()))
    }

    fn axis(&self) -> [T; 3] {
        let s = self.colatitude.sin();
        [s * self.phase.cos(), s * self.phase.sin(), self.colatitude.cos()]
    }
}

/// `exp(-i theta (n . I))` as the closed-form SU(2) matrix.
pub fn rotation_about<T: Real>(theta: T, axis: [T; 3]) -> Mat<T> {
    let h = T::lit(0.5) * theta;
    let (s, co) = (h.sin(), h.cos());
    let [nx, ny, nz] = axis;
    // cos(h) 1 - i sin(h) (nx X + ny Y + nz Z)
    Mat::from_vec(2, 2, vec![c(co, -s * nz), c(-s * ny, -s * nx), c(s * ny, -s * nx), c(co, s * nz)])
}

pub fn pulse_propagator<T: Real>(p: &PulseEvent<T>) -> Mat<T> {
    rotation_about(p.theta, p.axis())
}

/// Product of the pulse propagators; the first pulse acts first.
pub fn sequence_propagator<T: Real>(seq: &[PulseEvent<T>]) -> Mat<T> {
    seq.iter().fold(Mat::identity(2), |u, p| pulse_propagator(p).matmul(&u))
}

/// Which systematic error an [`ErrorModel`] scales.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorAxis {
    None,
    Length,
    Offset,
}

/// Systematic pulse errors: a fractional RF amplitude error and an
/// off-resonance offset as a fraction of the nominal RF amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ErrorModel<T: Real> {
    pub length_fraction: T,
    pub offset_fraction: T,
}

impl<T: Real> ErrorModel<T> {
    pub fn none() -> Self {
        ErrorModel { length_fraction: T::zero(), offset_fraction: T::zero() }
    }

    pub fn along(axis: ErrorAxis, eps: T) -> Self {
        match axis {
            ErrorAxis::None => Self::none(),
            ErrorAxis::Length => ErrorModel { length_fraction: eps, offset_fraction: T::zero() },
            ErrorAxis::Offset => ErrorModel { length_fraction: T::zero(), offset_fraction: eps },
        }
    }

    /// Effective pulse: the nutation vector is `theta (1+eps) n + f theta z`.
    pub fn apply(&self, p: &PulseEvent<T>) -> PulseEvent<T> {
        let a = p.axis();
        let s = T::one() + self.length_fraction;
        let v = [p.theta * s * a[0], p.theta * s * a[1], p.theta * s * a[2] + self.offset_fraction * p.theta];
        let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if len == T::zero() {
            return PulseEvent { theta: T::zero(), ..*p };
        }
        let colat = (v[2] / len).max(-T::one()).min(T::one()).acos();
        let phase = if v[0] == T::zero() && v[1] == T::zero() { p.phase } else { v[1].atan2(v[0]) };
        PulseEvent { theta: len, phase, colatitude: colat, duration_s: p.duration_s }
    }

    pub fn propagate(&self, seq: &[PulseEvent<T>]) -> Mat<T> {
        let applied: Vec<PulseEvent<T>> = seq.iter().map(|p| self.apply(p)).collect();
        sequence_propagator(&applied)
    }
}

/// `theta_z` as `90_y theta_x 90_-y` (time order).
pub fn composite_z<T: Real>(theta: T) -> Vec<PulseEvent<T>> {
    let h = T::FRAC_PI_2();
    vec![PulseEvent::xy(h, h), PulseEvent::xy(theta, T::zero()), PulseEvent::xy(h, -h)]
}

fn check_angle<T: Real>(theta: T, max: T) -> Result<()> {
    if !theta.is_finite() || theta <= T::zero() || theta > max {
        return Err(Error::InvalidParameter(format!("rotation angle {theta} outside (0, {max}]")));
    }
    Ok(())
}

/// CORPSE replacement for `theta_x`: three pulses about `+x`, `-x`, `+x`
/// with
/// `theta1 = 2 pi n1 + theta/2 - asin(sin(theta/2)/2)`,
/// `theta2 = 2 pi n2 - 2 asin(sin(theta/2)/2)`,
/// `theta3 = 2 pi n3 + theta/2 - asin(sin(theta/2)/2)`.
pub fn corpse<T: Real>(theta: T, n: [u32; 3]) -> Result<Vec<PulseEvent<T>>> {
    check_angle(theta, T::lit(2.0) * T::PI())?;
    let two_pi = T::lit(2.0) * T::PI();
    let half = T::lit(0.5) * theta;
    let k = (half.sin() * T::lit(0.5)).asin();
    let f = |m: u32| T::from_u32(m).expect("small integer") * two_pi;
    let angles = [f(n[0]) + half - k, f(n[1]) - T::lit(2.0) * k, f(n[2]) + half - k];
    if angles.iter().any(|&a| a <= T::zero()) {
        return Err(Error::InvalidParameter(format!("CORPSE with n = {n:?} gives a non-positive pulse")));
    }
    Ok(vec![PulseEvent::xy(angles[0], T::zero()), PulseEvent::xy(angles[1], T::PI()), PulseEvent::xy(angles[2], T::zero())])
}

/// Default CORPSE, `n = (1, 1, 0)`.
pub fn corpse_default<T: Real>(theta: T) -> Result<Vec<PulseEvent<T>>> {
    corpse(theta, [1, 1, 0])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bb1Placement {
    Before,
    After,
    Middle,
}

/// BB1 replacement for `theta_x`: the correction
/// `180_phi1 360_(3 phi1) 180_phi1` with `phi1 = ±acos(-theta/(4 pi))`
/// placed before, after or in the middle of the naive pulse.
pub fn bb1<T: Real>(theta: T, negative_root: bool, placement: Bb1Placement) -> Result<Vec<PulseEvent<T>>> {
    check_angle(theta, T::lit(4.0) * T::PI())?;
    let mut phi1 = (-theta / (T::lit(4.0) * T::PI())).acos();
    if negative_root {
        phi1 = -phi1;
    }
    let pi = T::PI();
    let w = [PulseEvent::xy(pi, phi1), PulseEvent::xy(T::lit(2.0) * pi, T::lit(3.0) * phi1), PulseEvent::xy(pi, phi1)];
    let naive = PulseEvent::xy(theta, T::zero());
    let half = PulseEvent::xy(theta * T::lit(0.5), T::zero());
    Ok(match placement {
        Bb1Placement::Before => vec![w[0], w[1], w[2], naive],
        Bb1Placement::After => vec![naive, w[0], w[1], w[2]],
        Bb1Placement::Middle => vec![half, w[0], w[1], w[2], half],
    })
}

/// `|Tr(V U^dagger)| / d`.
pub fn propagator_fidelity<T: Real>(u: &Mat<T>, v: &Mat<T>) -> T {
    v.matmul(&u.adjoint()).trace().norm() / T::from_usize_lossy(u.rows())
}

/// `1 - propagator_fidelity`, evaluated without cancellation as
/// `||e^{-i g} W - 1||_F^2 / (2d)` with `W = V U^dagger`, `g = arg Tr W`.
pub fn infidelity<T: Real>(u: &Mat<T>, v: &Mat<T>) -> T {
    let w = v.matmul(&u.adjoint());
    let tr = w.trace();
    let ph: C<T> = if tr.norm() == T::zero() { cr(T::one()) } else { (tr / cr(tr.norm())).conj() };
    let d = w.rows();
    let mut acc = T::zero();
    for r in 0..d {
        for k in 0..d {
            let mut x = w[(r, k)] * ph;
            if r == k {
                x = x - cr(T::one());
            }
            acc += x.norm_sqr();
        }
    }
    acc / T::from_usize_lossy(2 * d)
}

/// Result of [`error_order`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorOrder {
    /// Infidelity scales as `eps^order`; `slope` is the fitted exponent.
    Order { order: i32, slope: f64 },
    /// Infidelity vanishes (to rounding) at every grid point.
    Exact,
}

/// Error grid used by [`error_order`]: 13 log-spaced points in
/// `[1e-4, 1e-2]`.
pub fn error_grid() -> Vec<f64> {
    (0..13).map(|i| 10f64.powf(-4.0 + 2.0 * i as f64 / 12.0)).collect()
}

/// Infidelity of the sequence under the error model along `axis` at each
/// grid point, against the error-free propagator.
pub fn infidelity_curve<T: Real>(seq: &[PulseEvent<T>], axis: ErrorAxis) -> Vec<(f64, T)> {
    let ideal = sequence_propagator(seq);
    error_grid().into_iter().map(|e| (e, infidelity(&ideal, &ErrorModel::along(axis, T::lit(e)).propagate(seq)))).collect()
}

/// Fit the scaling exponent of the infidelity over the error grid.
pub fn error_order<T: Real>(seq: &[PulseEvent<T>], axis: ErrorAxis) -> Result<ErrorOrder> {
    let curve = infidelity_curve(seq, axis);
    let floor = (T::epsilon() * T::epsilon()).as_f64() * 1e4;
    let vals: Vec<f64> = curve.iter().map(|(_, v)| v.as_f64()).collect();
    if vals.iter().all(|&v| v < floor) {
        return Ok(ErrorOrder::Exact);
    }
    if vals.windows(2).any(|w| !(w[1] > w[0])) || vals[0] <= 0.0 {
        return Err(Error::NonMonotone);
    }
    let xs: Vec<f64> = curve.iter().map(|(e, _)| e.ln()).collect();
    let ys: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(ErrorOrder::Order { order: slope.round() as i32, slope })
}

/// Fidelity of `seq` against its error-free propagator at `points` evenly
/// spaced errors in `[-max, max]` along `axis`.
pub fn fidelity_sweep<T: Real>(seq: &[PulseEvent<T>], axis: ErrorAxis, max: T, points: usize) -> Result<Vec<(T, T)>> {
    if points < 2 || !(max > T::zero()) {
        return Err(Error::InvalidParameter("a sweep needs at least two points and a positive range".into()));
    }
    let ideal = sequence_propagator(seq);
    let step = T::lit(2.0) * max / T::from_usize_lossy(points - 1);
    Ok((0..points)
        .map(|i| {
            let e = -max + step * T::from_usize_lossy(i);
            (e, propagator_fidelity(&ideal, &ErrorModel::along(axis, e).propagate(seq)))
        })
        .collect())
}

pub fn sweep_csv<T: Real>(rows: &[(T, T)]) -> String {
    let mut s = String::from("epsilon,fidelity\n");
    for (e, f) in rows {
        s.push_str(&format!("{},{}\n", e.as_f64(), f.as_f64()));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::operators::{rotation_xy, spin_op};
    use std::f64::consts::PI;

    #[test]
    fn propagator_matches_matrix_exponential() {
        let p = PulseEvent { theta: 1.3, phase: 0.4, colatitude: 1.1, duration_s: 0.0 };
        let h = &(&spin_op::<f64>(1, 0, 1).scale_real(1.1f64.sin() * 0.4f64.cos())
            + &spin_op::<f64>(1, 0, 2).scale_real(1.1f64.sin() * 0.4f64.sin()))
            + &spin_op::<f64>(1, 0, 3).scale_real(1.1f64.cos());
        assert!(pulse_propagator(&p).max_abs_diff(&h.expm_hermitian(1.3)) < 1e-14);
    }

    #[test]
    fn composite_z_is_z_rotation() {
        let th = 0.77;
        let u = sequence_propagator(&composite_z(th));
        let want = spin_op::<f64>(1, 0, 3).expm_hermitian(th);
        assert!(u.max_abs_diff(&want) < 1e-14);
    }

    #[test]
    fn naive_pulse_fidelity_closed_form() {
        let eps = 0.1;
        let p = PulseEvent::<f64>::xy(PI, 0.0);
        let u = pulse_propagator(&p);
        let v = ErrorModel::along(ErrorAxis::Length, eps).propagate(&[p]);
        let f = propagator_fidelity(&u, &v);
        assert!((f - (PI * eps / 2.0).cos()).abs() < 1e-12);
        assert!((1.0 - f - infidelity(&u, &v)).abs() < 1e-14);
    }

    #[test]
    fn corpse_pi_angles() {
        let s = corpse::<f64>(PI, [1, 1, 0]).unwrap();
        let deg: Vec<f64> = s.iter().map(|p| p.theta.to_degrees()).collect();
        assert!((deg[0] - 420.0).abs() < 1e-9);
        assert!((deg[1] - 300.0).abs() < 1e-9);
        assert!((deg[2] - 60.0).abs() < 1e-9);
        assert!(corpse::<f64>(PI, [0, 0, 0]).is_err());
    }

    #[test]
    fn corpse_and_bb1_equal_naive_without_error() {
        for &th in &[PI / 2.0, PI, 1.234] {
            let naive = rotation_xy(th, 0.0);
            let c = sequence_propagator(&corpse_default(th).unwrap());
            assert!(propagator_fidelity(&naive, &c) > 1.0 - 1e-13);
            for pl in [Bb1Placement::Before, Bb1Placement::After, Bb1Placement::Middle] {
                let b = sequence_propagator(&bb1(th, false, pl).unwrap());
                assert!(propagator_fidelity(&naive, &b) > 1.0 - 1e-13);
            }
        }
    }

    #[test]
    fn off_resonance_model_angles() {
        let f = 0.2;
        let p = ErrorModel::along(ErrorAxis::Offset, f).apply(&PulseEvent::<f64>::xy(PI / 2.0, 0.0));
        assert!((p.colatitude - (PI / 2.0 - f.atan())).abs() < 1e-14);
        assert!((p.theta - PI / 2.0 * (1.0 + f * f).sqrt()).abs() < 1e-14);
    }
}
