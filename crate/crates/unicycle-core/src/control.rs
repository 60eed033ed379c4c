//! Linearized lateral and longitudinal models about straight rolling,
//! open-loop root analysis, critical speeds, static output-feedback pole
//! placement, and evaluation of the feedback law.

use crate::dynamics::{Input, State, UnicycleParams, TILT_GUARD};
use nalgebra::{Complex, DMatrix, DVector, SMatrix, SVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Mat7 = SMatrix<f64, 7, 7>;
pub type Vec7 = SVector<f64, 7>;
pub type Mat5 = SMatrix<f64, 5, 5>;
pub type Vec5 = SVector<f64, 5>;

const RANK_REL_TOL: f64 = 1e-8;
const PLACE_VERIFY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Error, PartialEq)]
pub enum CtrlError {
    #[error("gain matching system is singular or inconsistent")]
    PlacementSingular,
    #[error("residual closed-loop pole {0} is unstable")]
    UnstableResidualPole(f64),
    #[error("characteristic discriminant has no positive roots")]
    NoOscillatoryBand,
    #[error("tilt angle too close to the horizontal-wheel singularity")]
    TiltSingular,
}

/// Lateral subsystem [omega1, sigma_r, r, theta, omega3, chi, eps] with the
/// drive force as input, linearized at wheel rate phidot_star.
#[derive(Clone, Debug)]
pub struct LateralLTI {
    pub a: Mat7,
    pub b: Vec7,
    pub c1: f64,
    pub a13: f64,
    pub a14: f64,
    pub a15: f64,
    pub a24: f64,
    pub a25: f64,
    pub a31: f64,
    pub a51: f64,
    pub a76: f64,
    pub b11: f64,
    pub b21: f64,
    pub phidot_star: f64,
    pub a0: f64,
    pub a2: f64,
}

/// Longitudinal subsystem [omega2, sigma_gamma, gamma, phi, s] with the
/// pendulum torque as input; independent of the rolling rate.
#[derive(Clone, Debug)]
pub struct LongitudinalLTI {
    pub a: Mat5,
    pub b: Vec5,
    pub a8a: f64,
    pub a9a: f64,
    pub aa8: f64,
    pub aa9: f64,
    pub ac8: f64,
    pub b82: f64,
    pub b92: f64,
}

/// Output-feedback gains for both subsystems plus the scheduling point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub d_theta: f64,
    pub d_r: f64,
    pub p_r: f64,
    pub p_theta: f64,
    pub p_chi: f64,
    pub p_eps: f64,
    pub d_phi: f64,
    pub d_gamma: f64,
    pub p_gamma: f64,
    pub p_s: f64,
    pub target_pole: f64,
    pub scheduled_phidot: f64,
    pub residual_pole: f64,
}

pub fn lateral_matrices(p: &UnicycleParams, phidot_star: f64) -> LateralLTI {
    let (m, m1, m2, h, rr, g) = (p.m, p.m1, p.m2, p.h, p.radius, p.g);
    let c1 = 5.0 * m * rr * rr + 4.0 * m2 * (rr + h) * (rr + h);
    let a13 = -4.0 * m1 * g / c1;
    let a14 = 4.0 * g * (m * rr + m2 * (rr + h)) / c1;
    let a15 = phidot_star * (6.0 * m * rr * rr + 4.0 * m2 * rr * (rr + h)) / c1;
    let a24 = -g;
    let a25 = -rr * phidot_star;
    let a31 = rr;
    let a51 = -2.0 * phidot_star;
    let a76 = rr * phidot_star;
    let b11 = 4.0 * rr / c1;
    let b21 = 1.0 / m1;
    let mut a = Mat7::zeros();
    a[(0, 2)] = a13;
    a[(0, 3)] = a14;
    a[(0, 4)] = a15;
    a[(1, 3)] = a24;
    a[(1, 4)] = a25;
    a[(2, 0)] = a31;
    a[(2, 1)] = 1.0;
    a[(3, 0)] = 1.0;
    a[(4, 0)] = a51;
    a[(5, 4)] = 1.0;
    a[(6, 5)] = a76;
    let mut b = Vec7::zeros();
    b[0] = -b11;
    b[1] = -b21;
    let a2 = -a13 * a31 - a14 - a15 * a51;
    let a0 = -a13 * (a24 + a25 * a51);
    LateralLTI {
        a,
        b,
        c1,
        a13,
        a14,
        a15,
        a24,
        a25,
        a31,
        a51,
        a76,
        b11,
        b21,
        phidot_star,
        a0,
        a2,
    }
}

pub fn longitudinal_matrices(p: &UnicycleParams) -> LongitudinalLTI {
    let (m, m1, m2, h, rr, g) = (p.m, p.m1, p.m2, p.h, p.radius, p.g);
    let a8a = -m2 * g / (rr * (1.5 * m + m1));
    let a9a = g;
    let aa8 = -rr / h;
    let aa9 = 1.0 / h;
    let ac8 = rr;
    let b82 = -2.0 * (rr + h) / ((3.0 * m + 2.0 * m1) * rr * rr * h);
    let b92 = 1.0 / (m2 * h);
    let mut a = Mat5::zeros();
    a[(0, 2)] = a8a;
    a[(1, 2)] = a9a;
    a[(2, 0)] = aa8;
    a[(2, 1)] = aa9;
    a[(3, 0)] = 1.0;
    a[(4, 0)] = ac8;
    let mut b = Vec5::zeros();
    b[0] = -b82;
    b[1] = -b92;
    LongitudinalLTI {
        a,
        b,
        a8a,
        a9a,
        aa8,
        aa9,
        ac8,
        b82,
        b92,
    }
}

/// Measured outputs of the lateral loop: [omega1, sigma_r, chi, theta, r, eps].
pub fn lateral_output_matrix() -> SMatrix<f64, 6, 7> {
    let mut c = SMatrix::<f64, 6, 7>::zeros();
    for (row, col) in [0usize, 1, 5, 3, 2, 6].iter().enumerate() {
        c[(row, *col)] = 1.0;
    }
    c
}

/// Measured outputs of the longitudinal loop: [omega2, sigma_gamma, gamma, s].
pub fn longitudinal_output_matrix() -> SMatrix<f64, 4, 5> {
    let mut c = SMatrix::<f64, 4, 5>::zeros();
    for (row, col) in [0usize, 1, 2, 4].iter().enumerate() {
        c[(row, *col)] = 1.0;
    }
    c
}

/// Nonzero lateral characteristic roots: the solutions of
/// lambda^4 + a2 lambda^2 + a0 = 0 (a triple zero root is structural).
pub fn lateral_roots(p: &UnicycleParams, phidot_star: f64) -> [Complex<f64>; 4] {
    let lti = lateral_matrices(p, phidot_star);
    let disc = Complex::new(lti.a2 * lti.a2 - 4.0 * lti.a0, 0.0).sqrt();
    let lam2_pos = (-Complex::new(lti.a2, 0.0) + disc) * 0.5;
    let lam2_neg = (-Complex::new(lti.a2, 0.0) - disc) * 0.5;
    let w = lam2_pos.sqrt();
    let z = lam2_neg.sqrt();
    [w, -w, z, -z]
}

/// Nonzero longitudinal roots +-lambda (a triple zero root is structural).
pub fn longitudinal_roots(p: &UnicycleParams) -> (f64, f64) {
    let lam = ((3.0 * p.m + 2.0 * p.m1 + 2.0 * p.m2) * p.g
        / ((3.0 * p.m + 2.0 * p.m1) * p.h))
        .sqrt();
    (lam, -lam)
}

fn discriminant(p: &UnicycleParams, phidot: f64) -> f64 {
    let lti = lateral_matrices(p, phidot);
    lti.a2 * lti.a2 - 4.0 * lti.a0
}

/// Critical wheel-center speeds: v1 where the lateral constant coefficient
/// changes sign (closed form), v2 < v3 bracketing the oscillatory band where
/// the discriminant of the root quartic is negative.
pub fn critical_speeds(p: &UnicycleParams) -> Result<(f64, f64, f64), CtrlError> {
    let v1 = (p.g * p.radius / 2.0).sqrt();
    let mut roots = Vec::new();
    let step = 0.01;
    let mut lo = step;
    let mut flo = discriminant(p, lo);
    let mut x = lo + step;
    while x <= 20.0 + 1e-12 && roots.len() < 2 {
        let fx = discriminant(p, x);
        if flo == 0.0 {
            roots.push(lo);
        } else if flo * fx < 0.0 {
            let (mut a, mut b, mut fa) = (lo, x, flo);
            while b - a > 1e-10 {
                let mid = 0.5 * (a + b);
                let fm = discriminant(p, mid);
                if fa * fm <= 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    fa = fm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        lo = x;
        flo = fx;
        x += step;
    }
    if roots.len() < 2 {
        return Err(CtrlError::NoOscillatoryBand);
    }
    Ok((v1, p.radius * roots[0], p.radius * roots[1]))
}

fn rank_with_relative_threshold(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax <= 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > RANK_REL_TOL * smax).count()
}

fn controllability_ranks(a: &DMatrix<f64>, b: &DVector<f64>, c: &DMatrix<f64>) -> (usize, usize) {
    let n = a.nrows();
    let mut k = DMatrix::zeros(n, n);
    let mut col = b.clone();
    for j in 0..n {
        k.set_column(j, &col);
        col = a * &col;
    }
    let state_rank = rank_with_relative_threshold(&k);
    let output_rank = rank_with_relative_threshold(&(c * &k));
    (state_rank, output_rank)
}

impl LateralLTI {
    pub fn controllability_report(&self) -> (usize, usize) {
        let c = lateral_output_matrix();
        controllability_ranks(
            &DMatrix::from_iterator(7, 7, self.a.iter().cloned()),
            &DVector::from_iterator(7, self.b.iter().cloned()),
            &DMatrix::from_iterator(6, 7, c.iter().cloned()),
        )
    }
}

impl LongitudinalLTI {
    pub fn controllability_report(&self) -> (usize, usize) {
        let c = longitudinal_output_matrix();
        controllability_ranks(
            &DMatrix::from_iterator(5, 5, self.a.iter().cloned()),
            &DVector::from_iterator(5, self.b.iter().cloned()),
            &DMatrix::from_iterator(4, 5, c.iter().cloned()),
        )
    }
}

/// Characteristic coefficients [1, c1, ..., cn] and the adjugate moments
/// M_1..M_n with adj(lambda I - A) = sum M_k lambda^(n-k).
fn faddeev_leverrier(a: &DMatrix<f64>) -> (Vec<f64>, Vec<DMatrix<f64>>) {
    let n = a.nrows();
    let mut coeffs = Vec::with_capacity(n + 1);
    coeffs.push(1.0);
    let mut moments = Vec::with_capacity(n);
    let mut m = DMatrix::identity(n, n);
    for k in 1..=n {
        moments.push(m.clone());
        let am = a * &m;
        let ck = -am.trace() / k as f64;
        coeffs.push(ck);
        m = am + DMatrix::identity(n, n) * ck;
    }
    (coeffs, moments)
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut v = 1.0;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, c| acc * x + c)
}

/// Checks det(lambda I - A - B k C) against the target polynomial at probe
/// points. Repeated closed-loop roots are too ill-conditioned for an
/// eigensolver, so the spectrum is certified through its coefficients.
fn verify_placement(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DMatrix<f64>,
    k: &DVector<f64>,
    target: &[f64],
) -> bool {
    let n = a.nrows();
    let a_cl = a + b * k.transpose() * c;
    for probe in [3.7, -5.3, 17.0] {
        let det = (DMatrix::identity(n, n) * probe - &a_cl).determinant();
        let want = poly_eval(target, probe);
        if (det - want).abs() > PLACE_VERIFY_TOL * (1.0 + want.abs()) {
            return false;
        }
    }
    true
}

fn place_longitudinal(lti: &LongitudinalLTI, pole: f64) -> Result<[f64; 4], CtrlError> {
    let a = DMatrix::from_iterator(5, 5, lti.a.iter().cloned());
    let b = DVector::from_iterator(5, lti.b.iter().cloned());
    let cm = longitudinal_output_matrix();
    let c = DMatrix::from_iterator(4, 5, cm.iter().cloned());
    let (cs, moments) = faddeev_leverrier(&a);
    // q[i][j] multiplies lambda^(5-j-1) in the gain-i char-poly update
    let q: Vec<Vec<f64>> = (0..4)
        .map(|i| {
            (0..5)
                .map(|j| (c.row(i) * &moments[j] * &b)[(0, 0)])
                .collect()
        })
        .collect();
    // target lambda (lambda - pole)^4; the structural zero supplies row 5
    let mut g = DMatrix::zeros(4, 4);
    let mut rhs = DVector::zeros(4);
    for j in 1..=4 {
        for i in 0..4 {
            g[(j - 1, i)] = q[i][j - 1];
        }
        rhs[j - 1] = cs[j] - binomial(4, j) * (-pole).powi(j as i32);
    }
    let sol = g.lu().solve(&rhs).ok_or(CtrlError::PlacementSingular)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(CtrlError::PlacementSingular);
    }
    // (lambda - pole)^4 * lambda expanded highest power first
    let target: Vec<f64> = (0..=4)
        .map(|j| binomial(4, j) * (-pole).powi(j as i32))
        .chain(std::iter::once(0.0))
        .collect();
    if !verify_placement(&a, &b, &c, &sol, &target) {
        return Err(CtrlError::PlacementSingular);
    }
    Ok([sol[0], sol[1], sol[2], sol[3]])
}

fn place_lateral(lti: &LateralLTI, pole: f64) -> Result<([f64; 6], f64), CtrlError> {
    let a = DMatrix::from_iterator(7, 7, lti.a.iter().cloned());
    let b = DVector::from_iterator(7, lti.b.iter().cloned());
    let cm = lateral_output_matrix();
    let c = DMatrix::from_iterator(6, 7, cm.iter().cloned());
    let (cs, moments) = faddeev_leverrier(&a);
    let q: Vec<Vec<f64>> = (0..6)
        .map(|i| {
            (0..7)
                .map(|j| (c.row(i) * &moments[j] * &b)[(0, 0)])
                .collect()
        })
        .collect();
    // target (lambda - pole)^6 (lambda - beta), affine in the unknown beta
    let gc: Vec<f64> = (0..=6)
        .map(|j| binomial(6, j) * (-pole).powi(j as i32))
        .collect();
    let mut g = DMatrix::zeros(7, 7);
    let mut rhs = DVector::zeros(7);
    for j in 1..=7 {
        for i in 0..6 {
            g[(j - 1, i)] = q[i][j - 1];
        }
        g[(j - 1, 6)] = -gc[j - 1];
        rhs[j - 1] = cs[j] - if j <= 6 { gc[j] } else { 0.0 };
    }
    let sol = g.lu().solve(&rhs).ok_or(CtrlError::PlacementSingular)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(CtrlError::PlacementSingular);
    }
    let beta = sol[6];
    let gains = DVector::from_iterator(6, sol.iter().take(6).cloned());
    let mut target = vec![1.0];
    for j in 1..=6 {
        target.push(gc[j] - beta * gc[j - 1]);
    }
    target.push(-beta * gc[6]);
    if !verify_placement(&a, &b, &c, &gains, &target) {
        return Err(CtrlError::PlacementSingular);
    }
    Ok(([sol[0], sol[1], sol[2], sol[3], sol[4], sol[5]], beta))
}

/// Output-feedback gains placing every placeable closed-loop root of both
/// subsystems at target_pole. One lateral root stays at the feedback-invariant
/// marginal mode (omega3 + 2 phidot_star theta is conserved for any static
/// output feedback through F); it is reported as residual_pole.
pub fn synthesize_gains(
    p: &UnicycleParams,
    phidot_star: f64,
    target_pole: f64,
) -> Result<Gains, CtrlError> {
    if !(target_pole < 0.0) || !target_pole.is_finite() {
        return Err(CtrlError::PlacementSingular);
    }
    let k_lon = place_longitudinal(&longitudinal_matrices(p), target_pole)?;
    let (k_lat, beta) = place_lateral(&lateral_matrices(p, phidot_star), target_pole)?;
    if beta > 1e-6 * target_pole.abs() {
        return Err(CtrlError::UnstableResidualPole(beta));
    }
    Ok(Gains {
        d_theta: k_lat[0],
        d_r: k_lat[1],
        p_chi: k_lat[2],
        p_theta: k_lat[3],
        p_r: k_lat[4],
        p_eps: k_lat[5],
        d_phi: k_lon[0],
        d_gamma: k_lon[1],
        p_gamma: k_lon[2],
        p_s: k_lon[3],
        target_pole,
        scheduled_phidot: phidot_star,
        residual_pole: beta,
    })
}

/// Evaluates the output-feedback law against the desired arc position and
/// speed. Lateral references are zero; the longitudinal references are
/// omega2_des = v_des/R and the matching pendulum pseudovelocity.
pub fn feedback(
    p: &UnicycleParams,
    x: &State,
    s_des: f64,
    v_des: f64,
    gains: &Gains,
) -> Result<Input, CtrlError> {
    if x.theta.abs() >= TILT_GUARD {
        return Err(CtrlError::TiltSingular);
    }
    let force = gains.d_theta * x.omega1
        + gains.d_r * x.sigma_r
        + gains.p_r * x.r
        + gains.p_theta * x.theta
        + gains.p_chi * x.chi
        + gains.p_eps * x.eps;
    let omega2_des = v_des / p.radius;
    let sigma_gamma_des =
        omega2_des * p.radius * x.gamma.cos() + x.omega3 * p.h * x.theta.tan();
    let torque = gains.d_phi * (x.omega2 - omega2_des)
        + gains.d_gamma * (x.sigma_gamma - sigma_gamma_des)
        + gains.p_gamma * x.gamma
        + gains.p_s * (x.s - s_des);
    Ok(Input { force, torque })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{rhs, State};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params() -> UnicycleParams {
        UnicycleParams::default()
    }

    fn fd_jacobian(
        p: &UnicycleParams,
        phidot: f64,
        rows: std::ops::Range<usize>,
        cols: std::ops::Range<usize>,
    ) -> DMatrix<f64> {
        let base = State::straight_rolling(p, phidot).to_array();
        let delta = 1e-6;
        let mut jac = DMatrix::zeros(rows.len(), cols.len());
        for (jc, col) in cols.clone().enumerate() {
            let mut hi = base;
            let mut lo = base;
            hi[col] += delta;
            lo[col] -= delta;
            let fhi = rhs(p, &State::from_array(&hi), &Input::default(), 0.0).unwrap();
            let flo = rhs(p, &State::from_array(&lo), &Input::default(), 0.0).unwrap();
            for (jr, row) in rows.clone().enumerate() {
                jac[(jr, jc)] = (fhi[row] - flo[row]) / (2.0 * delta);
            }
        }
        jac
    }

    fn fd_input_column(p: &UnicycleParams, phidot: f64, torque: bool) -> [f64; 12] {
        let x = State::straight_rolling(p, phidot);
        let delta = 1e-6;
        let (hi, lo) = if torque {
            (
                Input { force: 0.0, torque: delta },
                Input { force: 0.0, torque: -delta },
            )
        } else {
            (
                Input { force: delta, torque: 0.0 },
                Input { force: -delta, torque: 0.0 },
            )
        };
        let fhi = rhs(p, &x, &hi, 0.0).unwrap();
        let flo = rhs(p, &x, &lo, 0.0).unwrap();
        let mut col = [0.0; 12];
        for i in 0..12 {
            col[i] = (fhi[i] - flo[i]) / (2.0 * delta);
        }
        col
    }

    #[test]
    fn lateral_coefficients_reference() {
        let lti = lateral_matrices(&params(), 5.0);
        assert_abs_diff_eq!(lti.c1, 16.2, epsilon = 1e-12);
        assert_abs_diff_eq!(lti.a13, -24.222222222222221, epsilon = 1e-12);
        assert_abs_diff_eq!(lti.a14, 17.44, epsilon = 1e-12);
        assert_abs_diff_eq!(lti.a15, 2.8888888888888888, epsilon = 1e-12);
        assert_abs_diff_eq!(lti.a24, -9.81, epsilon = 1e-12);
        assert_abs_diff_eq!(lti.a25, -1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(lti.a31, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(lti.a51, -10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lti.a76, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(lti.b11, 0.074074074074074070, epsilon = 1e-12);
        assert_abs_diff_eq!(lti.b21, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(lti.a0, 125.71333333333333, epsilon = 1e-10);
        assert_abs_diff_eq!(lti.a2, 18.715555555555556, epsilon = 1e-10);
        // standstill zeroes every rate-dependent coupling
        let still = lateral_matrices(&params(), 0.0);
        assert_eq!(still.a15, 0.0);
        assert_eq!(still.a25, 0.0);
        assert_eq!(still.a51, 0.0);
        assert_eq!(still.a76, 0.0);
    }

    #[test]
    fn lateral_char_poly_matches_assembled_matrix() {
        let lti = lateral_matrices(&params(), 5.0);
        let a = DMatrix::from_iterator(7, 7, lti.a.iter().cloned());
        let (cs, _) = faddeev_leverrier(&a);
        assert_abs_diff_eq!(cs[2], lti.a2, epsilon = 1e-9);
        assert_abs_diff_eq!(cs[4], lti.a0, epsilon = 1e-9);
        for idx in [1, 3, 5, 6, 7] {
            assert_abs_diff_eq!(cs[idx], 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn lateral_matches_fd_jacobian() {
        let p = params();
        for phidot in [2.0, 5.0, 10.0] {
            let lti = lateral_matrices(&p, phidot);
            let jac = fd_jacobian(&p, phidot, 0..7, 0..7);
            for i in 0..7 {
                for j in 0..7 {
                    assert!(
                        (lti.a[(i, j)] - jac[(i, j)]).abs() < 1e-5,
                        "A_lat({i},{j}) at phidot {phidot}: {} vs FD {}",
                        lti.a[(i, j)],
                        jac[(i, j)]
                    );
                }
            }
            let col = fd_input_column(&p, phidot, false);
            for i in 0..7 {
                assert!((lti.b[i] - col[i]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn longitudinal_coefficients_reference() {
        let lti = longitudinal_matrices(&params());
        assert_abs_diff_eq!(lti.a8a, -20.4375, epsilon = 1e-12);
        assert_abs_diff_eq!(lti.a9a, 9.81, epsilon = 1e-12);
        assert_abs_diff_eq!(lti.aa8, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lti.aa9, 3.3333333333333335, epsilon = 1e-12);
        assert_abs_diff_eq!(lti.ac8, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(lti.b82, -1.3888888888888888, epsilon = 1e-12);
        assert_abs_diff_eq!(lti.b92, 0.33333333333333331, epsilon = 1e-12);
    }

    #[test]
    fn longitudinal_matches_fd_jacobian() {
        let p = params();
        for phidot in [2.0, 5.0, 10.0] {
            let lti = longitudinal_matrices(&p);
            let jac = fd_jacobian(&p, phidot, 7..12, 7..12);
            for i in 0..5 {
                for j in 0..5 {
                    assert!(
                        (lti.a[(i, j)] - jac[(i, j)]).abs() < 1e-5,
                        "A_lon({i},{j}): {} vs FD {}",
                        lti.a[(i, j)],
                        jac[(i, j)]
                    );
                }
            }
            let col = fd_input_column(&p, phidot, true);
            for i in 0..5 {
                assert!((lti.b[i] - col[i + 7]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn lateral_roots_reference() {
        let p = params();
        let lti = lateral_matrices(&p, 5.0);
        assert!(lti.a2 * lti.a2 - 4.0 * lti.a0 < 0.0);
        let roots = lateral_roots(&p, 5.0);
        let unstable = roots.iter().filter(|r| r.re > 1e-9).count();
        assert_eq!(unstable, 2);
        // every quartic root appears in the assembled-matrix spectrum
        let eigs = lti.a.complex_eigenvalues();
        for r in roots {
            let best = eigs
                .iter()
                .map(|e| (e - r).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-8, "root {r} missing from eig(A), best {best}");
        }
        // above the third critical speed all four are neutral
        let fast = lateral_roots(&p, 8.0);
        for r in fast {
            assert!(r.re.abs() < 1e-10);
        }
    }

    #[test]
    fn critical_speeds_reference() {
        let p = params();
        let (v1, v2, v3) = critical_speeds(&p).unwrap();
        assert_abs_diff_eq!(v1, (p.g * p.radius / 2.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(v1, 1.21305399714934, epsilon = 1e-10);
        assert_abs_diff_eq!(v2, 1.29094718858, epsilon = 1e-8);
        assert_abs_diff_eq!(v3, 1.9586584516607, epsilon = 1e-8);
        assert!(v1 < v2 && v2 < v3);
        // v1 ignores the masses entirely
        let heavier = UnicycleParams {
            m1: 20.0,
            ..p
        };
        let (w1, _, _) = critical_speeds(&heavier).unwrap();
        assert_eq!(w1, v1);
    }

    #[test]
    fn constant_coefficient_sign_change_at_first_critical_rate() {
        let p = params();
        let pivot = (p.g / (2.0 * p.radius)).sqrt();
        assert!(lateral_matrices(&p, pivot - 1e-4).a0 < 0.0);
        assert!(lateral_matrices(&p, pivot + 1e-4).a0 > 0.0);
    }

    #[test]
    fn longitudinal_roots_reference() {
        let p = params();
        let (lam, lam_neg) = longitudinal_roots(&p);
        assert_abs_diff_eq!(lam, 7.28954731104751, epsilon = 1e-10);
        assert!((lam - 7.28955).abs() < 1e-5);
        assert_eq!(lam_neg, -lam);
        let lti = longitudinal_matrices(&p);
        let eigs = lti.a.complex_eigenvalues();
        let best = eigs
            .iter()
            .map(|e| (e - Complex::new(lam, 0.0)).norm())
            .fold(f64::INFINITY, f64::min);
        assert!(best < 1e-8);
        // quadrupling the arm halves the root
        let long_arm = UnicycleParams {
            h: 4.0 * p.h,
            ..p
        };
        assert_abs_diff_eq!(longitudinal_roots(&long_arm).0, lam / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn controllability_reference() {
        let p = params();
        let lat = lateral_matrices(&p, 5.0);
        let (sr, or) = lat.controllability_report();
        assert!(sr < 7);
        assert_eq!(or, 6);
        let lon = longitudinal_matrices(&p);
        let (sr, or) = lon.controllability_report();
        assert!(sr < 5);
        assert_eq!(or, 4);
        let dead = LateralLTI {
            b: Vec7::zeros(),
            ..lat
        };
        assert_eq!(dead.controllability_report(), (0, 0));
    }

    #[test]
    fn gain_synthesis_reference() {
        let p = params();
        let gains = synthesize_gains(&p, 5.0, -12.0).unwrap();
        let rel = 1e-6;
        assert_abs_diff_eq!(gains.d_phi, 116.080733944954, epsilon = rel * 116.0);
        assert_abs_diff_eq!(gains.d_gamma, 627.669724770642, epsilon = rel * 628.0);
        assert_abs_diff_eq!(gains.p_gamma, 874.157752293578, epsilon = rel * 874.0);
        assert_abs_diff_eq!(gains.p_s, 3043.81651376147, epsilon = rel * 3044.0);
        assert_abs_diff_eq!(gains.d_theta, -19200.2266383767, epsilon = rel * 19200.0);
        assert_abs_diff_eq!(gains.d_r, 14942.3901025013, epsilon = rel * 14942.0);
        assert_abs_diff_eq!(gains.p_chi, 61637.2844036697, epsilon = rel * 61637.0);
        assert_abs_diff_eq!(gains.p_theta, -112100.711507635, epsilon = rel * 112101.0);
        assert_abs_diff_eq!(gains.p_r, 85459.4251561426, epsilon = rel * 85459.0);
        assert_abs_diff_eq!(gains.p_eps, 82183.0458715596, epsilon = rel * 82183.0);
        // the residual lateral pole is the feedback-invariant marginal mode
        assert!(gains.residual_pole.abs() < 1e-9);
        assert_eq!(gains.target_pole, -12.0);
        assert_eq!(gains.scheduled_phidot, 5.0);
    }

    #[test]
    fn placement_closed_loop_polynomial_matches_target() {
        let p = params();
        let pole = -12.0;
        let gains = synthesize_gains(&p, 5.0, pole).unwrap();
        let lon = longitudinal_matrices(&p);
        let a = DMatrix::from_iterator(5, 5, lon.a.iter().cloned());
        let b = DVector::from_iterator(5, lon.b.iter().cloned());
        let cm = longitudinal_output_matrix();
        let c = DMatrix::from_iterator(4, 5, cm.iter().cloned());
        let k = DVector::from_vec(vec![gains.d_phi, gains.d_gamma, gains.p_gamma, gains.p_s]);
        let a_cl = &a + &b * k.transpose() * &c;
        for probe in [1.3, -7.7, 25.0] {
            let det = (DMatrix::identity(5, 5) * probe - &a_cl).determinant();
            let want = probe * (probe - pole).powi(4);
            assert!(
                (det - want).abs() < 1e-7 * (1.0 + want.abs()),
                "lon probe {probe}: {det} vs {want}"
            );
        }
        let lat = lateral_matrices(&p, 5.0);
        let a = DMatrix::from_iterator(7, 7, lat.a.iter().cloned());
        let b = DVector::from_iterator(7, lat.b.iter().cloned());
        let cm = lateral_output_matrix();
        let c = DMatrix::from_iterator(6, 7, cm.iter().cloned());
        let k = DVector::from_vec(vec![
            gains.d_theta,
            gains.d_r,
            gains.p_chi,
            gains.p_theta,
            gains.p_r,
            gains.p_eps,
        ]);
        let a_cl = &a + &b * k.transpose() * &c;
        for probe in [1.3, -7.7, 25.0] {
            let det = (DMatrix::identity(7, 7) * probe - &a_cl).determinant();
            let want = (probe - pole).powi(6) * (probe - gains.residual_pole);
            assert!(
                (det - want).abs() < 1e-6 * (1.0 + want.abs()),
                "lat probe {probe}: {det} vs {want}"
            );
        }
    }

    #[test]
    fn placement_rejects_degenerate_requests() {
        let p = params();
        assert_eq!(
            synthesize_gains(&p, 0.0, -12.0).unwrap_err(),
            CtrlError::PlacementSingular
        );
        assert_eq!(
            synthesize_gains(&p, 5.0, 0.5).unwrap_err(),
            CtrlError::PlacementSingular
        );
    }

    #[test]
    fn feedback_reference() {
        let p = params();
        let gains = synthesize_gains(&p, 5.0, -12.0).unwrap();
        // on-plan straight rolling commands nothing
        let x = State::straight_rolling(&p, 5.0);
        let u = feedback(&p, &x, x.s, 1.5, &gains).unwrap();
        assert_abs_diff_eq!(u.force, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(u.torque, 0.0, epsilon = 1e-9);
        // pure lateral offset drives only the force channel
        let off = State {
            eps: 0.1,
            ..State::straight_rolling(&p, 5.0)
        };
        let u = feedback(&p, &off, off.s, 1.5, &gains).unwrap();
        assert_abs_diff_eq!(u.force, gains.p_eps * 0.1, epsilon = 1e-9);
        assert_abs_diff_eq!(u.torque, 0.0, epsilon = 1e-9);
        let tilted = State {
            theta: 1.57,
            ..State::default()
        };
        assert_eq!(
            feedback(&p, &tilted, 0.0, 1.5, &gains).unwrap_err(),
            CtrlError::TiltSingular
        );
    }

    proptest! {
        #[test]
        fn feedback_is_linear_in_the_error(
            a in -0.2f64..0.2, b in -0.2f64..0.2, c in -0.2f64..0.2,
            d in -0.2f64..0.2, e in -0.2f64..0.2,
        ) {
            let p = params();
            let gains = synthesize_gains(&p, 5.0, -12.0).unwrap();
            let base = State::straight_rolling(&p, 5.0);
            let e1 = State { omega1: a, chi: b, eps: c, ..base };
            let e2 = State { theta: d, r: e, gamma: c, ..base };
            let sum = State {
                omega1: a, chi: b, eps: c, theta: d, r: e, gamma: c,
                ..base
            };
            let u1 = feedback(&p, &e1, base.s, 1.5, &gains).unwrap();
            let u2 = feedback(&p, &e2, base.s, 1.5, &gains).unwrap();
            let us = feedback(&p, &sum, base.s, 1.5, &gains).unwrap();
            prop_assert!((u1.force + u2.force - us.force).abs() < 1e-6);
            prop_assert!((u1.torque + u2.torque - us.torque).abs() < 1e-6);
        }

        #[test]
        fn placement_survives_the_scheduling_range(
            phidot in 1.0f64..15.0,
        ) {
            let p = params();
            let gains = synthesize_gains(&p, phidot, -12.0).unwrap();
            prop_assert!(gains.residual_pole.abs() < 1e-6);
            prop_assert!(gains.d_phi.is_finite() && gains.p_eps.is_finite());
        }
    }
}
