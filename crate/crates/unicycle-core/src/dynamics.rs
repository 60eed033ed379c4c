//! Nonlinear dynamics of the wheel + lateral mass + pendulum unicycle in
//! path-following coordinates: dynamical equations in pseudovelocities,
//! kinematic equations, ground contact force, friction demand, actuator
//! powers, and total mechanical energy.

use nalgebra::{Matrix3, Matrix5, Vector5};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tilt guard: tan(theta) terms blow up as the wheel goes horizontal.
pub const TILT_GUARD: f64 = std::f64::consts::FRAC_PI_2 - 0.01;

/// Path guard: the projection is singular where kappa * eps reaches 1.
pub const PATH_GUARD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Error, PartialEq)]
pub enum DynError {
    #[error("tilt angle too close to the horizontal-wheel singularity")]
    TiltSingular,
    #[error("lateral error reaches the path curvature center")]
    PathSingular,
    #[error("vertical contact force is not positive")]
    LiftOff,
}

/// Physical parameters: wheel mass m and radius R, lateral point mass m1,
/// pendulum point mass m2 on an arm of length h, gravity g.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnicycleParams {
    pub m: f64,
    pub m1: f64,
    pub m2: f64,
    pub h: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(default = "default_g")]
    pub g: f64,
}

fn default_g() -> f64 {
    9.81
}

impl Default for UnicycleParams {
    fn default() -> Self {
        UnicycleParams {
            m: 4.0,
            m1: 10.0,
            m2: 10.0,
            h: 0.3,
            radius: 0.3,
            g: 9.81,
        }
    }
}

impl UnicycleParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("m", self.m),
            ("m1", self.m1),
            ("m2", self.m2),
            ("h", self.h),
            ("R", self.radius),
            ("g", self.g),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("parameter {name} must be strictly positive"));
            }
        }
        Ok(())
    }
}

/// Full state, ordered so the lateral block [omega1, sigma_r, r, theta,
/// omega3, chi, eps] comes first and the longitudinal block [omega2,
/// sigma_gamma, gamma, phi, s] second.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub omega1: f64,
    pub sigma_r: f64,
    pub r: f64,
    pub theta: f64,
    pub omega3: f64,
    pub chi: f64,
    pub eps: f64,
    pub omega2: f64,
    pub sigma_gamma: f64,
    pub gamma: f64,
    pub phi: f64,
    pub s: f64,
}

impl State {
    pub fn to_array(&self) -> [f64; 12] {
        [
            self.omega1,
            self.sigma_r,
            self.r,
            self.theta,
            self.omega3,
            self.chi,
            self.eps,
            self.omega2,
            self.sigma_gamma,
            self.gamma,
            self.phi,
            self.s,
        ]
    }

    pub fn from_array(x: &[f64; 12]) -> State {
        State {
            omega1: x[0],
            sigma_r: x[1],
            r: x[2],
            theta: x[3],
            omega3: x[4],
            chi: x[5],
            eps: x[6],
            omega2: x[7],
            sigma_gamma: x[8],
            gamma: x[9],
            phi: x[10],
            s: x[11],
        }
    }

    /// Upright straight-rolling equilibrium at wheel rate omega2.
    pub fn straight_rolling(params: &UnicycleParams, omega2: f64) -> State {
        State {
            omega2,
            sigma_gamma: omega2 * params.radius,
            ..State::default()
        }
    }
}

/// Wheel drive force and pendulum torque.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Input {
    pub force: f64,
    pub torque: f64,
}

/// Ground reaction at the contact point, resolved in the yawed frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactForce {
    pub kx: f64,
    pub ky: f64,
    pub kz: f64,
    pub mu_required: f64,
}

fn check_tilt(theta: f64) -> Result<(), DynError> {
    if theta.abs() >= TILT_GUARD {
        Err(DynError::TiltSingular)
    } else {
        Ok(())
    }
}

/// Mass matrix in the pseudovelocity ordering
/// [omega1, omega2, omega3, sigma_r, sigma_gamma].
pub fn mass_matrix(p: &UnicycleParams, x: &State) -> Matrix5<f64> {
    let (m, m1, m2, h, rr) = (p.m, p.m1, p.m2, p.h, p.radius);
    let (sg, cg) = x.gamma.sin_cos();
    let r = x.r;
    let m11 = 5.0 * m * rr * rr / 4.0 + m1 * r * r + m2 * (rr + h * cg) * (rr + h * cg);
    let m13 = -m2 * h * (rr + h * cg) * sg;
    let m22 = rr * rr * (1.5 * m + m1 + m2 * sg * sg);
    let m23 = -m1 * rr * r;
    let m33 = m * rr * rr / 4.0 + m2 * h * h * sg * sg + m1 * r * r;
    let mut mm = Matrix5::zeros();
    mm[(0, 0)] = m11;
    mm[(0, 2)] = m13;
    mm[(2, 0)] = m13;
    mm[(1, 1)] = m22;
    mm[(1, 2)] = m23;
    mm[(2, 1)] = m23;
    mm[(2, 2)] = m33;
    mm[(3, 3)] = m1;
    mm[(4, 4)] = m2;
    mm
}

/// Inertial (velocity-quadratic) force vector C(q, sigma).
pub fn inertial_vector(p: &UnicycleParams, x: &State) -> Result<Vector5<f64>, DynError> {
    check_tilt(x.theta)?;
    let (m, m1, m2, h, rr) = (p.m, p.m1, p.m2, p.h, p.radius);
    let (sg, cg) = x.gamma.sin_cos();
    let tt = x.theta.tan();
    let r = x.r;
    let (w1, w2, w3, vr, vg) = (x.omega1, x.omega2, x.omega3, x.sigma_r, x.sigma_gamma);

    let c1 = 0.25
        * (4.0 * w1 * w1 * m1 * rr * r + 8.0 * w1 * vr * m1 * r
            + w1 * w2 * m2 * ((8.0 * rr * rr * cg + 8.0 * rr * h) * sg - 8.0 * rr * h * sg * sg * sg)
            - w1 * vg * m2 * (8.0 * rr + 8.0 * h * cg) * sg
            + w1 * w3 * m2 * (4.0 * rr * h + 4.0 * h * h * cg) * sg * tt
            - w3 * vg * m2 * (8.0 * rr * cg + 8.0 * h * cg * cg)
            + w3 * w3
                * (m * rr * rr
                    + 4.0 * m1 * r * r
                    + m2 * (4.0 * rr * h * cg + 4.0 * h * h * cg * cg))
                * tt
            - w2 * w3
                * (6.0 * m * rr * rr + 4.0 * m1 * rr * r * tt
                    - m2 * (4.0 * rr * rr + 4.0 * rr * h * cg) * (cg * cg - sg * sg)));

    let c2 = (1.0 / h)
        * (-w1 * w1 * m2 * rr * h * (rr + h * cg) * sg * cg
            - w2 * w2 * m2 * rr * rr * rr * sg * cg * cg
            - w3 * w3 * m2 * rr * h * h * sg * sg * sg
            - vg * vg * m2 * rr * sg
            + w1 * w3
                * (m * h * rr * rr - m1 * rr * rr * h
                    + m2 * rr * rr * h * sg * sg
                    + 2.0 * m2 * rr * h * h * sg * sg * cg
                    + m1 * rr * h * r * tt)
            - w2 * w3 * m2 * rr * rr * h * sg * cg * tt
            + 2.0 * w2 * vg * m2 * rr * rr * sg * cg
            - 2.0 * w3 * vr * m1 * rr * h);

    let c3 = 0.25
        * (-4.0 * w3 * w3 * m2 * h * h * sg * cg * tt
            + w1 * w2 * (2.0 * m * rr * rr - 8.0 * m2 * rr * h * sg * sg * cg)
            + w1 * w3
                * (-m * rr * rr * tt + 4.0 * m1 * rr * r
                    - 4.0 * m2 * h * h * sg * sg * tt
                    - 4.0 * m1 * r * r * tt)
            + 8.0 * w1 * vg * m2 * h * sg * sg
            + w2 * w3 * (8.0 * m2 * rr * h * sg * sg * sg - 4.0 * m2 * rr * h * sg)
            + 8.0 * w3 * vr * m1 * r
            + 8.0 * w3 * vg * m2 * h * sg * cg);

    let c4 = m1 * rr * w2 * w3 - m1 * w1 * w1 * r - m1 * w3 * w3 * r;

    let c5 = (1.0 / h)
        * (w1 * w1 * (m2 * rr * h * sg + m2 * h * h * sg * cg)
            - w2 * w2 * m2 * rr * rr * sg * cg
            - w3 * w3 * m2 * h * h * sg * cg
            + w1 * w3 * (m2 * rr * h * cg - 2.0 * m2 * h * h * sg * sg + m2 * h * h)
            + w2 * vg * m2 * rr * sg);

    Ok(Vector5::new(c1, c2, c3, c4, c5))
}

/// Applied generalized forces Pi(q, u): gravity plus the two actuators.
pub fn pseudoforce_vector(p: &UnicycleParams, x: &State, u: &Input) -> Vector5<f64> {
    let (m, m1, m2, h, rr, g) = (p.m, p.m1, p.m2, p.h, p.radius, p.g);
    let (sg, cg) = x.gamma.sin_cos();
    let (st, ct) = x.theta.sin_cos();
    let (f, t) = (u.force, u.torque);
    Vector5::new(
        -f * rr + m * g * rr * st - m1 * g * x.r * ct + m2 * g * (rr + h * cg) * st,
        (t / h) * (rr * cg + h) - m2 * g * rr * sg * cg * ct,
        -m2 * g * h * sg * st,
        -f - m1 * g * st,
        -t / h + m2 * g * sg * ct,
    )
}

/// Pseudoaccelerations from M(q) sigma_dot = Pi - C by a dense solve.
pub fn pseudo_accel(p: &UnicycleParams, x: &State, u: &Input) -> Result<Vector5<f64>, DynError> {
    let rhs = pseudoforce_vector(p, x, u) - inertial_vector(p, x)?;
    mass_matrix(p, x)
        .lu()
        .solve(&rhs)
        .ok_or(DynError::TiltSingular)
}

/// Kinematic rates (s_dot, eps_dot, chi_dot, theta_dot, phi_dot, r_dot,
/// gamma_dot) given the path curvature at the current arc position.
pub fn path_kinematics(
    p: &UnicycleParams,
    x: &State,
    kappa: f64,
) -> Result<[f64; 7], DynError> {
    check_tilt(x.theta)?;
    let denom = 1.0 - kappa * x.eps;
    if denom.abs() <= PATH_GUARD {
        return Err(DynError::PathSingular);
    }
    let tt = x.theta.tan();
    let fwd = (x.omega2 - x.omega3 * tt) * p.radius;
    let (s_chi, c_chi) = x.chi.sin_cos();
    let s_dot = fwd * c_chi / denom;
    let eps_dot = fwd * s_chi;
    let chi_dot = x.omega3 / x.theta.cos() - kappa * s_dot;
    let theta_dot = x.omega1;
    let phi_dot = x.omega2 - x.omega3 * tt;
    let r_dot = x.sigma_r + x.omega1 * p.radius;
    let gamma_dot =
        x.sigma_gamma / p.h - x.omega2 * (p.radius / p.h) * x.gamma.cos() - x.omega3 * tt;
    Ok([s_dot, eps_dot, chi_dot, theta_dot, phi_dot, r_dot, gamma_dot])
}

/// Full state derivative in the State field ordering. `kappa` is the
/// path curvature at the current arc position.
pub fn rhs(p: &UnicycleParams, x: &State, u: &Input, kappa: f64) -> Result<[f64; 12], DynError> {
    let sd = pseudo_accel(p, x, u)?;
    let [s_dot, eps_dot, chi_dot, theta_dot, phi_dot, r_dot, gamma_dot] =
        path_kinematics(p, x, kappa)?;
    Ok([
        sd[0], sd[3], r_dot, theta_dot, sd[2], chi_dot, eps_dot, sd[1], sd[4], gamma_dot,
        phi_dot, s_dot,
    ])
}

/// Contact force for a known pseudoacceleration vector (ordering
/// [omega1_dot, omega2_dot, omega3_dot, sigma_r_dot, sigma_gamma_dot]).
/// mu_required is infinite when the wheel is unloading.
pub fn contact_force_given_accel(
    p: &UnicycleParams,
    x: &State,
    sd: &Vector5<f64>,
) -> ContactForce {
    let (m, m1, m2, h, rr, g) = (p.m, p.m1, p.m2, p.h, p.radius, p.g);
    let (sg, cg) = x.gamma.sin_cos();
    let (st, ct) = x.theta.sin_cos();
    let tt = st / ct;
    let r = x.r;
    let (w1, w2, w3, vr, vg) = (x.omega1, x.omega2, x.omega3, x.sigma_r, x.sigma_gamma);
    let (w1d, w2d, w3d, vrd, vgd) = (sd[0], sd[1], sd[2], sd[3], sd[4]);

    let kx = (m2 * sg / h) * (3.0 * w2 * vg * rr * cg - 2.0 * w2 * w2 * rr * rr * cg * cg - vg * vg)
        - m1 * (w3d * r + 2.0 * w3 * vr)
        + w2d * (m * rr + m1 * rr + m2 * rr * sg * sg)
        + m2 * (vgd * cg - w2 * w3 * rr * sg * cg * tt - w3 * w3 * h * sg)
        + w1 * w3 * (m * rr + m1 * (r * tt - rr) + m2 * (rr + h * cg));

    let ky = (m2 * st / h)
        * (w2 * vg * rr * (3.0 * sg * sg - 2.0)
            + vg * vg * cg
            + w2 * w2 * rr * rr * cg * (1.0 - 2.0 * sg * sg))
        - w1d * (m * rr + m1 * r * tt + m2 * (rr + h * cg)) * ct
        + w1 * w1 * (m * rr * st - m1 * (rr * st + r * ct) + m2 * (rr + h * cg) * st)
        - w3 * w3 * (m1 * r * (st * tt + ct) + m2 * h * st * cg)
        + w2 * w3
            * (m * rr / ct
                + m1 * rr * (st * tt + ct)
                + m2 * rr * (cg * cg * st * tt - (1.0 - 2.0 * sg * sg) * ct))
        + m1 * (vrd * ct - 2.0 * vr * w1 * st)
        + m2 * (vgd * sg * st - w2d * rr * sg * st * cg + w3d * h * sg * ct
            - 2.0 * w1 * w2 * rr * sg * cg * ct
            - 2.0 * w1 * w3 * h * sg * st
            + 2.0 * w1 * vg * sg * ct
            + 2.0 * w3 * vg * cg * ct);

    let kz = (m2 * ct / h)
        * (w2 * w2 * rr * rr * (2.0 * sg * sg - 1.0) * cg - vg * vg * cg
            + w2 * vg * rr * (2.0 - 3.0 * sg * sg))
        - w1d * (m * rr * st - m1 * r * ct + m2 * (rr + h * cg) * st)
        - w1 * w1 * (m * rr - m1 * (rr - r * tt) + m2 * (rr + h * cg)) * ct
        + m1 * (vrd * st + 2.0 * vr * w1 * ct)
        + m2 * (w2d * rr * sg * cg * ct + w3d * h * sg * st - vgd * sg * ct
            - w3 * w3 * h * st * cg * tt
            - 2.0 * w1 * w2 * rr * sg * st * cg
            + 2.0 * w1 * vg * sg * st
            + w1 * w3 * h * (ct - st * tt) * sg
            + 2.0 * w3 * vg * st * cg
            + w2 * w3 * rr * (3.0 * sg * sg - 2.0) * st)
        + (m + m1 + m2) * g;

    let mu_required = if kz > 0.0 {
        kx.hypot(ky) / kz
    } else {
        f64::INFINITY
    };
    ContactForce {
        kx,
        ky,
        kz,
        mu_required,
    }
}

/// Contact force under the closed-loop acceleration at (state, input).
pub fn contact_force(p: &UnicycleParams, x: &State, u: &Input) -> Result<ContactForce, DynError> {
    let sd = pseudo_accel(p, x, u)?;
    let k = contact_force_given_accel(p, x, &sd);
    if k.kz <= 0.0 {
        return Err(DynError::LiftOff);
    }
    Ok(k)
}

/// Friction coefficient needed to keep the contact inside the cone.
pub fn required_friction(k: &ContactForce) -> Result<f64, DynError> {
    if k.kz <= 0.0 {
        return Err(DynError::LiftOff);
    }
    Ok(k.kx.hypot(k.ky) / k.kz)
}

/// Mechanical power delivered by the drive force and pendulum torque.
pub fn actuator_powers(p: &UnicycleParams, x: &State, u: &Input) -> (f64, f64) {
    let p_f = -(x.omega1 * p.radius + x.sigma_r) * u.force;
    let p_t = (u.torque / p.h)
        * (x.omega2 * (p.radius * x.gamma.cos() + p.h) - x.sigma_gamma);
    (p_f, p_t)
}

/// Total mechanical energy with the ground as the potential reference.
pub fn total_energy(p: &UnicycleParams, x: &State) -> f64 {
    let (m, m1, m2, h, rr, g) = (p.m, p.m1, p.m2, p.h, p.radius, p.g);
    let (sg, cg) = x.gamma.sin_cos();
    let (st, ct) = x.theta.sin_cos();
    let (w1, w2, w3, vr, vg) = (x.omega1, x.omega2, x.omega3, x.sigma_r, x.sigma_gamma);
    let wheel_trans = 0.5 * m * rr * rr * (w1 * w1 + w2 * w2);
    let wheel_rot = 0.5 * (m * rr * rr / 4.0) * (w1 * w1 + 2.0 * w2 * w2 + w3 * w3);
    let va2 = {
        let vx = w2 * rr - w3 * x.r;
        vx * vx + vr * vr + w1 * w1 * x.r * x.r
    };
    let vb2 = {
        let vy = w1 * (rr + h * cg) - w3 * h * sg;
        vg * vg + vy * vy + w2 * w2 * rr * rr * sg * sg
    };
    let z_c = rr * ct;
    let z_a = rr * ct + x.r * st;
    let z_b = (rr + h * cg) * ct;
    wheel_trans + wheel_rot + 0.5 * m1 * va2 + 0.5 * m2 * vb2
        + g * (m * z_c + m1 * z_a + m2 * z_b)
}

/// Elementary rotations about the yaw, tilt, and pendulum axes; the
/// body frames chain as Rz(psi) * Rx(theta) * Ry(gamma).
pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params() -> UnicycleParams {
        UnicycleParams::default()
    }

    fn generic_state() -> State {
        State {
            omega1: 0.3,
            omega2: 4.0,
            omega3: 0.5,
            sigma_r: 0.2,
            sigma_gamma: 1.2,
            r: 0.1,
            theta: 0.15,
            gamma: 0.4,
            ..State::default()
        }
    }

    #[test]
    fn mass_matrix_reference_entries() {
        let p = params();
        let m0 = mass_matrix(&p, &State::default());
        assert_abs_diff_eq!(m0[(0, 0)], 4.05, epsilon = 1e-12);
        assert_abs_diff_eq!(m0[(1, 1)], 1.44, epsilon = 1e-12);
        assert_abs_diff_eq!(m0[(2, 2)], 0.09, epsilon = 1e-12);
        assert_abs_diff_eq!(m0[(3, 3)], 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m0[(4, 4)], 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m0[(0, 2)], 0.0, epsilon = 1e-12);
        let tilted = State {
            gamma: std::f64::consts::FRAC_PI_2,
            ..State::default()
        };
        let m1 = mass_matrix(&p, &tilted);
        assert_abs_diff_eq!(m1[(0, 2)], -0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(m1[(1, 1)], 2.34, epsilon = 1e-12);
        assert_abs_diff_eq!(m1[(2, 2)], 0.99, epsilon = 1e-12);
    }

    #[test]
    fn inertial_vector_reference() {
        let p = params();
        let c = inertial_vector(&p, &generic_state()).unwrap();
        assert_abs_diff_eq!(c[0], -5.0293682346601081, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1], -0.8176328850690231, epsilon = 1e-12);
        assert_abs_diff_eq!(c[2], 1.2701408610457761, epsilon = 1e-12);
        assert_abs_diff_eq!(c[3], 5.66, epsilon = 1e-12);
        assert_abs_diff_eq!(c[4], 2.1365072063416424, epsilon = 1e-12);
        // single-term row: only omega3 and r set
        let x = State {
            omega3: 1.0,
            r: 0.1,
            ..State::default()
        };
        assert_abs_diff_eq!(inertial_vector(&p, &x).unwrap()[3], -1.0, epsilon = 1e-12);
        assert_eq!(
            inertial_vector(&p, &State { theta: 1.57, ..State::default() }).unwrap_err(),
            DynError::TiltSingular
        );
    }

    #[test]
    fn pseudoforce_reference() {
        let p = params();
        let u = Input {
            force: 2.0,
            torque: -3.0,
        };
        let pi = pseudoforce_vector(&p, &generic_state(), &u);
        assert_abs_diff_eq!(pi[0], -0.091901027090995235, epsilon = 1e-12);
        assert_abs_diff_eq!(pi[1], -16.200546538699385, epsilon = 1e-12);
        assert_abs_diff_eq!(pi[2], -1.7126479433665112, epsilon = 1e-12);
        assert_abs_diff_eq!(pi[3], -16.659880795660083, epsilon = 1e-12);
        assert_abs_diff_eq!(pi[4], 47.772972780483173, epsilon = 1e-12);
        // gravity-only tilt
        let tilt = State {
            theta: 0.1,
            ..State::default()
        };
        let pi0 = pseudoforce_vector(&p, &tilt, &Input::default());
        assert_abs_diff_eq!(pi0[0], 7.0514338845987661, epsilon = 1e-12);
        assert_abs_diff_eq!(pi0[3], -9.7936581730538421, epsilon = 1e-12);
        assert_abs_diff_eq!(pi0[1], 0.0, epsilon = 1e-15);
        // unit force at rest
        let pf = pseudoforce_vector(&p, &State::default(), &Input { force: 1.0, torque: 0.0 });
        assert_abs_diff_eq!(pf[0], -0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(pf[3], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn pseudo_accel_reference() {
        let p = params();
        let u = Input {
            force: 2.0,
            torque: -3.0,
        };
        let sd = pseudo_accel(&p, &generic_state(), &u).unwrap();
        assert_abs_diff_eq!(sd[0], -4.4928649795424072, epsilon = 1e-10);
        assert_abs_diff_eq!(sd[1], -16.069436850708154, epsilon = 1e-10);
        assert_abs_diff_eq!(sd[2], -33.167546610048412, epsilon = 1e-10);
        assert_abs_diff_eq!(sd[3], -2.2319880795660083, epsilon = 1e-10);
        assert_abs_diff_eq!(sd[4], 4.5636465574141534, epsilon = 1e-10);
        // decoupled unit inputs at rest
        let sf = pseudo_accel(&p, &State::default(), &Input { force: 1.0, torque: 0.0 }).unwrap();
        assert_abs_diff_eq!(sf[0], -0.07407407407407407, epsilon = 1e-14);
        assert_abs_diff_eq!(sf[3], -0.1, epsilon = 1e-14);
        assert_abs_diff_eq!(sf[1], 0.0, epsilon = 1e-14);
        let st = pseudo_accel(&p, &State::default(), &Input { force: 0.0, torque: 1.0 }).unwrap();
        assert_abs_diff_eq!(st[1], 1.3888888888888886, epsilon = 1e-12);
        assert_abs_diff_eq!(st[4], -0.33333333333333298, epsilon = 1e-12);
        // offset lateral mass at rest
        let off = State {
            r: 0.2,
            ..State::default()
        };
        let so = pseudo_accel(&p, &off, &Input::default()).unwrap();
        assert_abs_diff_eq!(so[0], -4.4089887640449428, epsilon = 1e-12);
    }

    #[test]
    fn straight_rolling_is_equilibrium() {
        let p = params();
        let x = State::straight_rolling(&p, 5.0);
        let c = inertial_vector(&p, &x).unwrap();
        let pi = pseudoforce_vector(&p, &x, &Input::default());
        assert_eq!(c.norm(), 0.0);
        assert_eq!(pi.norm(), 0.0);
        let dx = rhs(&p, &x, &Input::default(), 0.0).unwrap();
        for (i, d) in dx.iter().enumerate() {
            match i {
                10 => assert_abs_diff_eq!(*d, 5.0, epsilon = 1e-14),
                11 => assert_abs_diff_eq!(*d, 1.5, epsilon = 1e-14),
                _ => assert_abs_diff_eq!(*d, 0.0, epsilon = 1e-14),
            }
        }
    }

    #[test]
    fn path_kinematics_reference() {
        let p = params();
        let x = State::straight_rolling(&p, 5.0);
        let k = path_kinematics(&p, &x, 0.0).unwrap();
        assert_abs_diff_eq!(k[0], 1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(k[4], 5.0, epsilon = 1e-14);
        let skew = State {
            chi: 0.1,
            ..State::straight_rolling(&p, 5.0)
        };
        let k2 = path_kinematics(&p, &skew, 0.0).unwrap();
        assert_abs_diff_eq!(k2[1], 1.5 * 0.1f64.sin(), epsilon = 1e-14);
        let near = State {
            eps: 0.999_999_95,
            ..State::straight_rolling(&p, 5.0)
        };
        assert_eq!(
            path_kinematics(&p, &near, 1.0).unwrap_err(),
            DynError::PathSingular
        );
    }

    #[test]
    fn pendulum_perturbation_is_unstable() {
        let p = params();
        let x = State {
            gamma: 0.05,
            ..State::default()
        };
        let sd = pseudo_accel(&p, &x, &Input::default()).unwrap();
        assert!(sd[4] > 0.0);
    }

    #[test]
    fn rhs_is_affine_in_input() {
        let p = params();
        let x = generic_state();
        let base = rhs(&p, &x, &Input::default(), 0.02).unwrap();
        let ua = Input {
            force: 1.3,
            torque: -0.7,
        };
        let ub = Input {
            force: 2.6,
            torque: -1.4,
        };
        let da = rhs(&p, &x, &ua, 0.02).unwrap();
        let db = rhs(&p, &x, &ub, 0.02).unwrap();
        for i in 0..12 {
            assert_abs_diff_eq!(db[i] - base[i], 2.0 * (da[i] - base[i]), epsilon = 1e-9);
        }
    }

    #[test]
    fn contact_force_reference() {
        let p = params();
        let rest = contact_force(&p, &State::default(), &Input::default()).unwrap();
        assert_abs_diff_eq!(rest.kx, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rest.ky, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rest.kz, 235.44, epsilon = 1e-12);
        assert_abs_diff_eq!(rest.mu_required, 0.0, epsilon = 1e-14);
        let roll = contact_force(&p, &State::straight_rolling(&p, 7.0), &Input::default()).unwrap();
        assert_abs_diff_eq!(roll.kx, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(roll.ky, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(roll.mu_required, 0.0, epsilon = 1e-14);
        let u = Input {
            force: 2.0,
            torque: -3.0,
        };
        let k = contact_force(&p, &generic_state(), &u).unwrap();
        assert_abs_diff_eq!(k.kx, -0.35833788957513946, epsilon = 1e-9);
        assert_abs_diff_eq!(k.ky, -8.4097107215728961, epsilon = 1e-9);
        assert_abs_diff_eq!(k.kz, 192.3105759789442, epsilon = 1e-9);
        // fixed pseudoacceleration decouples the check from the solve
        let sd = Vector5::new(0.4, -0.3, 0.25, 0.6, -0.5);
        let kf = contact_force_given_accel(&p, &generic_state(), &sd);
        assert_abs_diff_eq!(kf.kx, -7.0093764498709286, epsilon = 1e-12);
        assert_abs_diff_eq!(kf.ky, 18.293009480566901, epsilon = 1e-12);
        assert_abs_diff_eq!(kf.kz, 238.39858510665502, epsilon = 1e-12);
        // tilt-only case exercises the gravity block
        let tilt = State {
            theta: 0.1,
            ..State::default()
        };
        let kt = contact_force(&p, &tilt, &Input::default()).unwrap();
        assert_abs_diff_eq!(kt.kx, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(kt.ky, -22.217985940134874, epsilon = 1e-10);
        assert_abs_diff_eq!(kt.kz, 233.21076566629742, epsilon = 1e-10);
        // unit inputs at rest
        let kfu = contact_force(&p, &State::default(), &Input { force: 1.0, torque: 0.0 }).unwrap();
        assert_abs_diff_eq!(kfu.kx, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(kfu.ky, -0.46666666666666679, epsilon = 1e-12);
        assert_abs_diff_eq!(kfu.kz, 235.44, epsilon = 1e-12);
        let ktu = contact_force(&p, &State::default(), &Input { force: 0.0, torque: 1.0 }).unwrap();
        assert_abs_diff_eq!(ktu.kx, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(ktu.ky, 0.0, epsilon = 1e-12);
        let off = State {
            r: 0.2,
            ..State::default()
        };
        let ko = contact_force(&p, &off, &Input::default()).unwrap();
        assert_abs_diff_eq!(ko.ky, 31.744719101123593, epsilon = 1e-10);
        assert_abs_diff_eq!(ko.kz, 226.6220224719101, epsilon = 1e-10);
    }

    #[test]
    fn friction_requirement() {
        let k = ContactForce {
            kx: 1.0,
            ky: 2.0,
            kz: 10.0,
            mu_required: 0.0,
        };
        assert_abs_diff_eq!(required_friction(&k).unwrap(), 0.223606797749979, epsilon = 1e-15);
        let flat = ContactForce {
            kx: 3.0,
            ky: 4.0,
            kz: 0.0,
            mu_required: 0.0,
        };
        assert_eq!(required_friction(&flat).unwrap_err(), DynError::LiftOff);
    }

    #[test]
    fn actuator_power_reference() {
        let p = params();
        let x = State {
            sigma_r: -0.2,
            ..State::default()
        };
        let (pf, _) = actuator_powers(&p, &x, &Input { force: 2.0, torque: 0.0 });
        assert_abs_diff_eq!(pf, 0.4, epsilon = 1e-15);
        // pendulum torque against straight rolling spins with the wheel
        let roll = State::straight_rolling(&p, 5.0);
        let (_, pt) = actuator_powers(&p, &roll, &Input { force: 0.0, torque: 2.0 });
        assert_abs_diff_eq!(pt, 2.0 * 5.0, epsilon = 1e-12);
        let u = Input {
            force: 2.0,
            torque: -3.0,
        };
        let (pf2, pt2) = actuator_powers(&p, &generic_state(), &u);
        assert_abs_diff_eq!(pf2, -0.58, epsilon = 1e-14);
        assert_abs_diff_eq!(pt2, -11.052731928034634, epsilon = 1e-12);
    }

    #[test]
    fn energy_reference_values() {
        let p = params();
        assert_abs_diff_eq!(
            total_energy(&p, &State::default()),
            100.06200000000001,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            total_energy(&p, &State { theta: 0.1, ..State::default() }),
            99.562106786049824,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            total_energy(&p, &State::straight_rolling(&p, 5.0)),
            129.31199999999998,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            total_energy(&p, &generic_state()),
            117.63319881690286,
            epsilon = 1e-12
        );
        // doubling all masses doubles the energy
        let doubled = UnicycleParams {
            m: 8.0,
            m1: 20.0,
            m2: 20.0,
            ..p
        };
        assert_abs_diff_eq!(
            total_energy(&doubled, &generic_state()),
            2.0 * total_energy(&p, &generic_state()),
            epsilon = 1e-9
        );
    }

    #[test]
    fn frames_are_orthonormal() {
        for a in [-1.2, 0.0, 0.4, 2.9] {
            for rot in [rot_z(a), rot_x(a), rot_y(a)] {
                let id = rot * rot.transpose();
                assert!((id - Matrix3::identity()).norm() < 1e-14);
                assert_abs_diff_eq!(rot.determinant(), 1.0, epsilon = 1e-14);
            }
        }
    }

    proptest! {
        #[test]
        fn mass_matrix_symmetric_positive_definite(
            gamma in -std::f64::consts::PI..std::f64::consts::PI,
            r in -1.0f64..1.0,
        ) {
            let p = params();
            let x = State { gamma, r, ..State::default() };
            let m = mass_matrix(&p, &x);
            prop_assert!((m - m.transpose()).norm() == 0.0);
            let eig = m.symmetric_eigenvalues();
            prop_assert!(eig.min() > 0.0);
        }

        #[test]
        fn solve_satisfies_linear_system(
            w1 in -2.0f64..2.0, w2 in -6.0f64..6.0, w3 in -2.0f64..2.0,
            vr in -1.0f64..1.0, vg in -2.0f64..2.0,
            r in -0.5f64..0.5, theta in -0.6f64..0.6, gamma in -1.2f64..1.2,
            f in -5.0f64..5.0, t in -5.0f64..5.0,
        ) {
            let p = params();
            let x = State {
                omega1: w1, omega2: w2, omega3: w3,
                sigma_r: vr, sigma_gamma: vg,
                r, theta, gamma, ..State::default()
            };
            let u = Input { force: f, torque: t };
            let sd = pseudo_accel(&p, &x, &u).unwrap();
            let res = mass_matrix(&p, &x) * sd
                - (pseudoforce_vector(&p, &x, &u) - inertial_vector(&p, &x).unwrap());
            let scale = 1.0 + sd.norm();
            prop_assert!(res.norm() < 1e-10 * scale);
        }

        #[test]
        fn contact_force_affine_in_input(
            f in -5.0f64..5.0, t in -5.0f64..5.0,
        ) {
            let p = params();
            let x = generic_state();
            let k0 = contact_force(&p, &x, &Input::default()).unwrap();
            let k1 = contact_force(&p, &x, &Input { force: f, torque: t }).unwrap();
            let k2 = contact_force(&p, &x, &Input { force: 2.0 * f, torque: 2.0 * t }).unwrap();
            prop_assert!((k2.kx - k0.kx - 2.0 * (k1.kx - k0.kx)).abs() < 1e-9);
            prop_assert!((k2.ky - k0.ky - 2.0 * (k1.ky - k0.ky)).abs() < 1e-9);
            prop_assert!((k2.kz - k0.kz - 2.0 * (k1.kz - k0.kz)).abs() < 1e-9);
        }
    }
}
