//! G2 path construction: lane changes from triples of clothoids with a
//! shared length ratio, raised-cosine speed profiles on straights, and
//! composition into a queryable arc-length/time-parametrized plan.

mod fresnel;

pub use fresnel::fresnel_cs;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Chain tolerance on junction pose and curvature mismatch.
pub const JUNCTION_TOL: f64 = 1e-6;

const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("segment length must be positive")]
    NonPositiveLength,
    #[error("speed pair must not be both zero")]
    ZeroSpeedPair,
    #[error("curved segment requires positive entry speed")]
    ZeroEntrySpeed,
    #[error("no clothoid triple satisfies the boundary conditions")]
    NoSolution,
    #[error("boundary conditions are collinear")]
    Degenerate,
    #[error("query outside the plan domain")]
    OutOfRange,
    #[error("maneuver must contain at least one segment")]
    EmptyManeuver,
    #[error("segment {index} start does not chain: {what} gap of {gap:.3e}")]
    DiscontinuousChain {
        index: usize,
        what: &'static str,
        gap: f64,
    },
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = a % two_pi;
    if w <= -std::f64::consts::PI {
        w += two_pi;
    } else if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

/// Start/end pose and curvature for one curved segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    pub x_s: f64,
    pub y_s: f64,
    pub psi_s: f64,
    pub kappa_s: f64,
    pub x_f: f64,
    pub y_f: f64,
    pub psi_f: f64,
    pub kappa_f: f64,
}

impl BoundaryConditions {
    pub fn start_pose(&self) -> Pose {
        Pose {
            x: self.x_s,
            y: self.y_s,
            psi: self.psi_s,
        }
    }

    pub fn end_pose(&self) -> Pose {
        Pose {
            x: self.x_f,
            y: self.y_f,
            psi: self.psi_f,
        }
    }

    fn chord(&self) -> (f64, f64) {
        let dx = self.x_f - self.x_s;
        let dy = self.y_f - self.y_s;
        (dx.hypot(dy), dy.atan2(dx))
    }

    /// Rigid transform into the frame with the chord along +x from the
    /// origin. Both headings are shifted by a common multiple of 2 pi so
    /// the start heading is canonical while the net heading change is
    /// preserved exactly.
    fn to_chord_frame(&self) -> (BoundaryConditions, f64) {
        let (len, ang) = self.chord();
        let two_pi = 2.0 * std::f64::consts::PI;
        let shift = ((self.psi_s - ang) / two_pi).round() * two_pi;
        (
            BoundaryConditions {
                x_s: 0.0,
                y_s: 0.0,
                psi_s: self.psi_s - ang - shift,
                kappa_s: self.kappa_s,
                x_f: len,
                y_f: 0.0,
                psi_f: self.psi_f - ang - shift,
                kappa_f: self.kappa_f,
            },
            ang,
        )
    }
}

/// Quantities determined once (s0, s1, s2, kp1) are fixed: the outer
/// curvature slopes, the mid-segment center curvature, and the heading
/// at the path midpoint.
#[derive(Clone, Copy, Debug)]
pub struct Eliminated {
    pub kp0: f64,
    pub kp2: f64,
    pub kappa_m: f64,
    pub psi_m: f64,
}

/// Solve the curvature- and heading-continuity chain for the dependent
/// unknowns of a clothoid triple with piecewise-linear curvature.
pub fn eliminate_unknowns(
    bc: &BoundaryConditions,
    s0: f64,
    s1: f64,
    s2: f64,
    kp1: f64,
) -> Result<Eliminated, PlanError> {
    if s0 <= 0.0 || s1 <= 0.0 || s2 <= 0.0 {
        return Err(PlanError::NonPositiveLength);
    }
    let ks = bc.kappa_s;
    let kf = bc.kappa_f;
    let dpsi = bc.psi_f - bc.psi_s;
    let d = s0 + 2.0 * s1 + s2;
    let kp0 =
        (2.0 * dpsi - kp1 * (s1 * s1 + s1 * s2) - kf * s2 - ks * (2.0 * s0 + 2.0 * s1 + s2))
            / (s0 * d);
    let kp2 =
        (ks * s0 - kp1 * (s0 * s1 + s1 * s1) + kf * (s0 + 2.0 * s1 + 2.0 * s2) - 2.0 * dpsi)
            / (s2 * d);
    let kappa_m = (4.0 * dpsi + kp1 * (s0 * s1 - s1 * s2) - 2.0 * kf * s2 - 2.0 * ks * s0)
        / (2.0 * d);
    let psi_m = (8.0 * bc.psi_f * (s0 + s1) + 8.0 * bc.psi_s * (s1 + s2)
        + ks * (4.0 * s0 * s1 + 4.0 * s0 * s2)
        - kf * (4.0 * s0 * s2 + 4.0 * s1 * s2)
        - kp1 * (3.0 * s0 * s1 * s1 + 4.0 * s0 * s1 * s2 + 2.0 * s1 * s1 * s1
            + 3.0 * s1 * s1 * s2))
        / (8.0 * d);
    Ok(Eliminated {
        kp0,
        kp2,
        kappa_m,
        psi_m,
    })
}

/// Position closure error at the far endpoint for a candidate (s1, kp1)
/// with outer lengths s0 = s2 = ratio * s1.
pub fn residual(
    bc: &BoundaryConditions,
    ratio: f64,
    s1: f64,
    kp1: f64,
) -> Result<(f64, f64), PlanError> {
    if !(ratio > 0.0) || !s1.is_finite() || !kp1.is_finite() {
        return Err(PlanError::OutOfRange);
    }
    if s1 <= 0.0 {
        return Err(PlanError::NonPositiveLength);
    }
    let s0 = ratio * s1;
    let s2 = s0;
    let e = eliminate_unknowns(bc, s0, s1, s2, kp1)?;
    let (a0, b0, c0) = (e.kp0 * s0 * s0, bc.kappa_s * s0, bc.psi_s);
    let (a1, b1, c1) = (kp1 * s1 * s1 / 4.0, e.kappa_m * s1 / 2.0, e.psi_m);
    let (a2, b2, c2) = (e.kp2 * s2 * s2, -bc.kappa_f * s2, bc.psi_f);
    let (c_0, s_0) = fresnel_cs(a0, b0, c0);
    let (c_1m, s_1m) = fresnel_cs(a1, -b1, c1);
    let (c_1p, s_1p) = fresnel_cs(a1, b1, c1);
    let (c_2, s_2) = fresnel_cs(a2, b2, c2);
    let half = s1 / 2.0;
    let rx = s0 * c_0 + half * c_1m + half * c_1p + s2 * c_2 - (bc.x_f - bc.x_s);
    let ry = s0 * s_0 + half * s_1m + half * s_1p + s2 * s_2 - (bc.y_f - bc.y_s);
    Ok((rx, ry))
}

/// A G2 lane-change segment: three clothoids with curvature slopes
/// kp0, kp1, kp2 over lengths s0, s1, s2, the outer lengths tied to the
/// middle one by s0 = s2 = ratio * s1.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ClothoidTriple {
    pub s_s: f64,
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub kappa_s: f64,
    pub kappa_m: f64,
    pub kappa_f: f64,
    pub kp0: f64,
    pub kp1: f64,
    pub kp2: f64,
    pub psi_m: f64,
    pub x_m: f64,
    pub y_m: f64,
    pub ratio: f64,
    pub start: Pose,
    pub end: Pose,
}

#[derive(Clone, Copy, Debug)]
struct Junction {
    x: f64,
    y: f64,
    psi: f64,
    kappa: f64,
}

impl ClothoidTriple {
    pub fn arc_length(&self) -> f64 {
        self.s0 + self.s1 + self.s2
    }

    /// Curvature at arc position u from the segment start, clamped to
    /// the segment domain.
    pub fn curvature_local(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, self.arc_length());
        if u <= self.s0 {
            self.kappa_s + self.kp0 * u
        } else if u <= self.s0 + self.s1 {
            self.kappa_m + self.kp1 * (u - self.s0 - 0.5 * self.s1)
        } else {
            self.kappa_f + self.kp2 * (u - self.arc_length())
        }
    }

    /// Largest curvature magnitude, attained at a junction or endpoint.
    pub fn max_abs_kappa(&self) -> f64 {
        let kj1 = self.kappa_m - self.kp1 * self.s1 / 2.0;
        let kj2 = self.kappa_m + self.kp1 * self.s1 / 2.0;
        self.kappa_s
            .abs()
            .max(kj1.abs())
            .max(kj2.abs())
            .max(self.kappa_f.abs())
    }

    fn junctions(&self) -> (Junction, Junction) {
        let (s0, s1) = (self.s0, self.s1);
        let (xs, ys, ps, ks) = (self.start.x, self.start.y, self.start.psi, self.kappa_s);
        let (c0, sn0) = fresnel_cs(self.kp0 * s0 * s0, ks * s0, ps);
        let j1 = Junction {
            x: xs + s0 * c0,
            y: ys + s0 * sn0,
            psi: ps + ks * s0 + 0.5 * self.kp0 * s0 * s0,
            kappa: ks + self.kp0 * s0,
        };
        let (c1, sn1) = fresnel_cs(self.kp1 * s1 * s1, j1.kappa * s1, j1.psi);
        let j2 = Junction {
            x: j1.x + s1 * c1,
            y: j1.y + s1 * sn1,
            psi: j1.psi + j1.kappa * s1 + 0.5 * self.kp1 * s1 * s1,
            kappa: j1.kappa + self.kp1 * s1,
        };
        (j1, j2)
    }

    /// Pose at arc position u from the segment start (u in [0, length]).
    pub fn pose_local(&self, u: f64) -> Pose {
        let u = u.clamp(0.0, self.arc_length());
        let (j1, j2) = self.junctions();
        let from = |x: f64, y: f64, psi: f64, kappa: f64, slope: f64, w: f64| -> Pose {
            if w == 0.0 {
                return Pose { x, y, psi };
            }
            let (c, s) = fresnel_cs(slope * w * w, kappa * w, psi);
            Pose {
                x: x + w * c,
                y: y + w * s,
                psi: psi + kappa * w + 0.5 * slope * w * w,
            }
        };
        if u <= self.s0 {
            from(
                self.start.x,
                self.start.y,
                self.start.psi,
                self.kappa_s,
                self.kp0,
                u,
            )
        } else if u <= self.s0 + self.s1 {
            from(j1.x, j1.y, j1.psi, j1.kappa, self.kp1, u - self.s0)
        } else {
            from(
                j2.x,
                j2.y,
                j2.psi,
                j2.kappa,
                self.kp2,
                u - self.s0 - self.s1,
            )
        }
    }
}

fn residual_norm(bc: &BoundaryConditions, ratio: f64, s1: f64, kp1: f64) -> f64 {
    match residual(bc, ratio, s1, kp1) {
        Ok((rx, ry)) => rx.abs().max(ry.abs()),
        Err(_) => f64::INFINITY,
    }
}

/// Damped Newton iteration on the closure residual; returns the root and
/// its residual norm on convergence.
fn newton(bc: &BoundaryConditions, ratio: f64, s1_0: f64, kp1_0: f64) -> Option<(f64, f64, f64)> {
    let mut s1 = s1_0;
    let mut kp1 = kp1_0;
    let mut r = residual(bc, ratio, s1, kp1).ok()?;
    for _ in 0..50 {
        let rn = r.0.abs().max(r.1.abs());
        if rn < 1e-12 {
            break;
        }
        let hs = 1e-7 * s1.abs().max(1.0);
        let hk = 1e-7 * kp1.abs().max(1e-3);
        let rp_s = residual(bc, ratio, s1 + hs, kp1).ok()?;
        let rm_s = residual(bc, ratio, (s1 - hs).max(1e-12), kp1).ok()?;
        let rp_k = residual(bc, ratio, s1, kp1 + hk).ok()?;
        let rm_k = residual(bc, ratio, s1, kp1 - hk).ok()?;
        let j11 = (rp_s.0 - rm_s.0) / (2.0 * hs);
        let j21 = (rp_s.1 - rm_s.1) / (2.0 * hs);
        let j12 = (rp_k.0 - rm_k.0) / (2.0 * hk);
        let j22 = (rp_k.1 - rm_k.1) / (2.0 * hk);
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-300 {
            return None;
        }
        let ds = (r.0 * j22 - r.1 * j12) / det;
        let dk = (j11 * r.1 - j21 * r.0) / det;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..10 {
            let s1_new = s1 - alpha * ds;
            let kp1_new = kp1 - alpha * dk;
            if s1_new > 0.0 {
                if let Ok(r_new) = residual(bc, ratio, s1_new, kp1_new) {
                    if r_new.0.abs().max(r_new.1.abs()) < rn {
                        s1 = s1_new;
                        kp1 = kp1_new;
                        r = r_new;
                        accepted = true;
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let rn = r.0.abs().max(r.1.abs());
    if rn < RESIDUAL_TOL {
        Some((s1, kp1, rn))
    } else {
        None
    }
}

fn validate_bc(bc: &BoundaryConditions, ratio: f64) -> Result<(f64, f64), PlanError> {
    let vals = [
        bc.x_s, bc.y_s, bc.psi_s, bc.kappa_s, bc.x_f, bc.y_f, bc.psi_f, bc.kappa_f,
    ];
    if vals.iter().any(|v| !v.is_finite()) || !ratio.is_finite() || ratio <= 0.0 {
        return Err(PlanError::OutOfRange);
    }
    let (chord, psi_c) = bc.chord();
    if chord < 1e-12 {
        return Err(PlanError::NonPositiveLength);
    }
    if wrap_angle(bc.psi_s - psi_c).abs() < 1e-12
        && wrap_angle(bc.psi_f - psi_c).abs() < 1e-12
        && bc.kappa_s.abs() < 1e-12
        && bc.kappa_f.abs() < 1e-12
    {
        return Err(PlanError::Degenerate);
    }
    Ok((chord, psi_c))
}

/// Initial guess: middle length from the chord split 1 : 2ratio, slope
/// from inverting the midpoint-heading elimination toward the heading
/// of the point-symmetric solution.
fn initial_guess(bc_local: &BoundaryConditions, ratio: f64, chord: f64) -> (f64, f64) {
    let s1 = chord / (1.0 + 2.0 * ratio);
    let (s0, s2) = (ratio * s1, ratio * s1);
    let psi_m_target = -(bc_local.psi_s + bc_local.psi_f) / 2.0;
    let d = s0 + 2.0 * s1 + s2;
    let p = 3.0 * s0 * s1 * s1 + 4.0 * s0 * s1 * s2 + 2.0 * s1 * s1 * s1 + 3.0 * s1 * s1 * s2;
    let kp1 = (8.0 * bc_local.psi_f * (s0 + s1) + 8.0 * bc_local.psi_s * (s1 + s2)
        + bc_local.kappa_s * (4.0 * s0 * s1 + 4.0 * s0 * s2)
        - bc_local.kappa_f * (4.0 * s0 * s2 + 4.0 * s1 * s2)
        - 8.0 * d * psi_m_target)
        / p;
    (s1, kp1)
}

fn build_triple(
    bc: &BoundaryConditions,
    ratio: f64,
    psi_c: f64,
    s1: f64,
    kp1: f64,
) -> Result<ClothoidTriple, PlanError> {
    let s0 = ratio * s1;
    let s2 = s0;
    let (bc_local, _) = bc.to_chord_frame();
    let e = eliminate_unknowns(bc, s0, s1, s2, kp1)?;
    let e_loc = eliminate_unknowns(&bc_local, s0, s1, s2, kp1)?;
    let (a0, b0, c0) = (e_loc.kp0 * s0 * s0, bc_local.kappa_s * s0, bc_local.psi_s);
    let (a1, b1, c1) = (kp1 * s1 * s1 / 4.0, e_loc.kappa_m * s1 / 2.0, e_loc.psi_m);
    let (c_0, s_0) = fresnel_cs(a0, b0, c0);
    let (c_1m, s_1m) = fresnel_cs(a1, -b1, c1);
    let xm_loc = s0 * c_0 + 0.5 * s1 * c_1m;
    let ym_loc = s0 * s_0 + 0.5 * s1 * s_1m;
    let (cc, ss) = (psi_c.cos(), psi_c.sin());
    Ok(ClothoidTriple {
        s_s: 0.0,
        s0,
        s1,
        s2,
        kappa_s: bc.kappa_s,
        kappa_m: e.kappa_m,
        kappa_f: bc.kappa_f,
        kp0: e.kp0,
        kp1,
        kp2: e.kp2,
        psi_m: e.psi_m,
        x_m: bc.x_s + cc * xm_loc - ss * ym_loc,
        y_m: bc.y_s + ss * xm_loc + cc * ym_loc,
        ratio,
        start: bc.start_pose(),
        end: bc.end_pose(),
    })
}

/// All distinct converged roots from a multi-start sweep over the
/// (s1, kp1) box, sorted by peak curvature magnitude.
pub fn solve_three_clothoid_all(
    bc: &BoundaryConditions,
    ratio: f64,
) -> Result<Vec<ClothoidTriple>, PlanError> {
    let (chord, psi_c) = validate_bc(bc, ratio)?;
    let (bc_local, _) = bc.to_chord_frame();
    let mut starts: Vec<(f64, f64, f64)> = Vec::new();
    let (g_s1, g_kp1) = initial_guess(&bc_local, ratio, chord);
    starts.push((0.0, g_s1, g_kp1));
    let mut scored: Vec<(f64, f64, f64)> = Vec::new();
    for i in 0..40 {
        let s1 = chord * (0.1 + 3.9 * i as f64 / 39.0) / (1.0 + 2.0 * ratio);
        for j in 0..41 {
            let kp1 = -10.0 + 20.0 * j as f64 / 40.0;
            scored.push((residual_norm(&bc_local, ratio, s1, kp1), s1, kp1));
        }
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    starts.extend(scored.into_iter().take(12));
    let mut roots: Vec<(f64, f64)> = Vec::new();
    for (_, s1_0, kp1_0) in starts {
        if let Some((s1, kp1, _)) = newton(&bc_local, ratio, s1_0, kp1_0) {
            let dup = roots.iter().any(|&(a, b)| {
                (a - s1).abs() < 1e-6 * (1.0 + s1.abs()) && (b - kp1).abs() < 1e-6 * (1.0 + kp1.abs())
            });
            if !dup {
                roots.push((s1, kp1));
            }
        }
    }
    if roots.is_empty() {
        return Err(PlanError::NoSolution);
    }
    let mut triples: Vec<ClothoidTriple> = roots
        .into_iter()
        .map(|(s1, kp1)| build_triple(bc, ratio, psi_c, s1, kp1))
        .collect::<Result<_, _>>()?;
    triples.sort_by(|a, b| a.max_abs_kappa().total_cmp(&b.max_abs_kappa()));
    Ok(triples)
}

/// Solve for the clothoid triple joining the boundary conditions. The
/// heading-symmetric initial guess is tried first; a multi-start sweep
/// backs it up. With several roots the flattest (smallest peak |kappa|)
/// wins.
pub fn solve_three_clothoid(
    bc: &BoundaryConditions,
    ratio: f64,
) -> Result<ClothoidTriple, PlanError> {
    let (chord, psi_c) = validate_bc(bc, ratio)?;
    let (bc_local, _) = bc.to_chord_frame();
    let (g_s1, g_kp1) = initial_guess(&bc_local, ratio, chord);
    for (fs, fk) in [(1.0, 1.0), (0.6, 1.0), (1.7, 1.0), (1.0, -1.0)] {
        if let Some((s1, kp1, _)) = newton(&bc_local, ratio, g_s1 * fs, g_kp1 * fk) {
            return build_triple(bc, ratio, psi_c, s1, kp1);
        }
    }
    solve_three_clothoid_all(bc, ratio).map(|v| v[0])
}

/// Raised-cosine speed transition over a straight stretch.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StraightSegment {
    pub s_s: f64,
    pub delta_s: f64,
    pub v_s: f64,
    pub v_f: f64,
    pub delta_t: f64,
}

/// Speed profile over a straight stretch: smooth raised-cosine blend
/// from v_s to v_f whose distance integral equals delta_s.
pub fn straight_profile(v_s: f64, v_f: f64, delta_s: f64) -> Result<StraightSegment, PlanError> {
    if !(delta_s > 0.0) {
        return Err(PlanError::NonPositiveLength);
    }
    if v_s < 0.0 || v_f < 0.0 || (v_s == 0.0 && v_f == 0.0) {
        return Err(PlanError::ZeroSpeedPair);
    }
    Ok(StraightSegment {
        s_s: 0.0,
        delta_s,
        v_s,
        v_f,
        delta_t: 2.0 * delta_s / (v_s + v_f),
    })
}

impl StraightSegment {
    /// Desired speed at elapsed time t in [0, delta_t].
    pub fn v_des(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.delta_t);
        let dv = self.v_f - self.v_s;
        self.v_s + 0.5 * dv * (1.0 - (std::f64::consts::PI * t / self.delta_t).cos())
    }

    /// Distance covered by the desired profile after elapsed time t.
    pub fn s_des(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.delta_t);
        let dv = self.v_f - self.v_s;
        let w = std::f64::consts::PI / self.delta_t;
        (self.v_s + 0.5 * dv) * t - 0.5 * dv / w * (w * t).sin()
    }

    /// Inverse of s_des by bisection (s_des is nondecreasing).
    pub fn t_of_s(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.delta_s);
        let (mut lo, mut hi) = (0.0, self.delta_t);
        for _ in 0..200 {
            if hi - lo <= 1e-13 * self.delta_t {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.s_des(mid) < s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// One leg of a composed maneuver with its own geometry and timing.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum LegGeometry {
    Straight(StraightSegment),
    Clothoid { triple: ClothoidTriple, speed: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanLeg {
    pub start_s: f64,
    pub start_t: f64,
    pub duration: f64,
    pub length: f64,
    pub start_pose: Pose,
    pub geometry: LegGeometry,
}

/// Segment description handed to `compose_maneuver`, carrying explicit
/// geometry so chain mismatches are detectable.
#[derive(Clone, Debug)]
pub enum SegmentSpec {
    Straight { start: Pose, profile: StraightSegment },
    Clothoid { triple: ClothoidTriple, speed: f64 },
}

/// Relative segment description used by config files and sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManeuverLeg {
    Straight { delta_s: f64, v_s: f64, v_f: f64 },
    LaneChange { dx: f64, dy: f64, dpsi: f64, ratio: f64 },
}

/// A chained, time-parametrized path: arc length, pose, curvature and
/// the desired (s, v) profile are all queryable.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathPlan {
    origin: Pose,
    legs: Vec<PlanLeg>,
    total_length: f64,
    total_duration: f64,
    final_speed: f64,
}

/// One row of a sampled path export.
#[derive(Clone, Copy, Debug)]
pub struct PathSample {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub kappa: f64,
    pub t: f64,
    pub v_des: f64,
}

/// Chain explicit segments into a plan, enforcing G2 junctions.
pub fn compose_maneuver(origin: Pose, specs: &[SegmentSpec]) -> Result<PathPlan, PlanError> {
    if specs.is_empty() {
        return Err(PlanError::EmptyManeuver);
    }
    let mut legs = Vec::with_capacity(specs.len());
    let mut pose = origin;
    let mut kappa = 0.0;
    let mut s_acc = 0.0;
    let mut t_acc = 0.0;
    let mut v_last = 0.0;
    for (index, spec) in specs.iter().enumerate() {
        let (start, start_kappa) = match spec {
            SegmentSpec::Straight { start, .. } => (*start, 0.0),
            SegmentSpec::Clothoid { triple, .. } => (triple.start, triple.kappa_s),
        };
        for (what, gap) in [
            ("x", (start.x - pose.x).abs()),
            ("y", (start.y - pose.y).abs()),
            ("psi", wrap_angle(start.psi - pose.psi).abs()),
            ("kappa", (start_kappa - kappa).abs()),
        ] {
            if gap > JUNCTION_TOL {
                return Err(PlanError::DiscontinuousChain { index, what, gap });
            }
        }
        let leg = match spec {
            SegmentSpec::Straight { start, profile } => {
                let mut profile = *profile;
                profile.s_s = s_acc;
                let length = profile.delta_s;
                let duration = profile.delta_t;
                pose = Pose {
                    x: start.x + length * start.psi.cos(),
                    y: start.y + length * start.psi.sin(),
                    psi: start.psi,
                };
                kappa = 0.0;
                v_last = profile.v_f;
                PlanLeg {
                    start_s: s_acc,
                    start_t: t_acc,
                    duration,
                    length,
                    start_pose: *start,
                    geometry: LegGeometry::Straight(profile),
                }
            }
            SegmentSpec::Clothoid { triple, speed } => {
                if !(*speed > 0.0) {
                    return Err(PlanError::ZeroEntrySpeed);
                }
                let mut triple = *triple;
                triple.s_s = s_acc;
                let length = triple.arc_length();
                pose = triple.end;
                kappa = triple.kappa_f;
                v_last = *speed;
                PlanLeg {
                    start_s: s_acc,
                    start_t: t_acc,
                    duration: length / speed,
                    length,
                    start_pose: triple.start,
                    geometry: LegGeometry::Clothoid {
                        triple,
                        speed: *speed,
                    },
                }
            }
        };
        s_acc += leg.length;
        t_acc += leg.duration;
        legs.push(leg);
    }
    Ok(PathPlan {
        origin,
        legs,
        total_length: s_acc,
        total_duration: t_acc,
        final_speed: v_last,
    })
}

/// Resolve relative maneuver legs against a running pose and speed,
/// solving each lane change, then compose.
pub fn plan_maneuver(origin: Pose, legs: &[ManeuverLeg]) -> Result<PathPlan, PlanError> {
    if legs.is_empty() {
        return Err(PlanError::EmptyManeuver);
    }
    let mut specs = Vec::with_capacity(legs.len());
    let mut pose = origin;
    let mut speed = 0.0;
    for leg in legs {
        match *leg {
            ManeuverLeg::Straight { delta_s, v_s, v_f } => {
                let profile = straight_profile(v_s, v_f, delta_s)?;
                specs.push(SegmentSpec::Straight {
                    start: pose,
                    profile,
                });
                pose = Pose {
                    x: pose.x + delta_s * pose.psi.cos(),
                    y: pose.y + delta_s * pose.psi.sin(),
                    psi: pose.psi,
                };
                speed = v_f;
            }
            ManeuverLeg::LaneChange {
                dx,
                dy,
                dpsi,
                ratio,
            } => {
                if !(speed > 0.0) {
                    return Err(PlanError::ZeroEntrySpeed);
                }
                let (cc, ss) = (pose.psi.cos(), pose.psi.sin());
                let bc = BoundaryConditions {
                    x_s: pose.x,
                    y_s: pose.y,
                    psi_s: pose.psi,
                    kappa_s: 0.0,
                    x_f: pose.x + cc * dx - ss * dy,
                    y_f: pose.y + ss * dx + cc * dy,
                    psi_f: pose.psi + dpsi,
                    kappa_f: 0.0,
                };
                let triple = solve_three_clothoid(&bc, ratio)?;
                pose = triple.end;
                specs.push(SegmentSpec::Clothoid { triple, speed });
            }
        }
    }
    compose_maneuver(origin, &specs)
}

impl PathPlan {
    /// Plan with no segments: zero length, zero duration.
    pub fn empty(origin: Pose) -> PathPlan {
        PathPlan {
            origin,
            legs: Vec::new(),
            total_length: 0.0,
            total_duration: 0.0,
            final_speed: 0.0,
        }
    }

    pub fn origin(&self) -> Pose {
        self.origin
    }

    pub fn legs(&self) -> &[PlanLeg] {
        &self.legs
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn total_duration(&self) -> f64 {
        self.total_duration
    }

    pub fn final_speed(&self) -> f64 {
        self.final_speed
    }

    /// Index of the leg whose time window contains t (clamped to ends).
    pub fn leg_index_at_time(&self, t: f64) -> usize {
        if self.legs.is_empty() {
            return 0;
        }
        let mut idx = self.legs.len() - 1;
        for (i, leg) in self.legs.iter().enumerate() {
            if t < leg.start_t + leg.duration {
                idx = i;
                break;
            }
        }
        idx
    }

    /// Desired arc position and speed at time t; clamps outside [0, T].
    pub fn desired_at(&self, t: f64) -> (f64, f64) {
        if self.legs.is_empty() {
            return (0.0, 0.0);
        }
        if t >= self.total_duration {
            return (self.total_length, self.final_speed);
        }
        let leg = &self.legs[self.leg_index_at_time(t)];
        let tau = (t - leg.start_t).max(0.0);
        match &leg.geometry {
            LegGeometry::Straight(p) => (leg.start_s + p.s_des(tau), p.v_des(tau)),
            LegGeometry::Clothoid { speed, .. } => (leg.start_s + speed * tau, *speed),
        }
    }

    fn leg_index_at_arc(&self, s: f64) -> usize {
        let mut idx = self.legs.len() - 1;
        for (i, leg) in self.legs.iter().enumerate() {
            if s < leg.start_s + leg.length {
                idx = i;
                break;
            }
        }
        idx
    }

    /// Path curvature at arc position s.
    pub fn curvature_at(&self, s: f64) -> Result<f64, PlanError> {
        if self.legs.is_empty() || s < -1e-12 || s > self.total_length + 1e-12 {
            return Err(PlanError::OutOfRange);
        }
        Ok(self.curvature_clamped(s))
    }

    /// Path curvature with s clamped into the plan domain.
    pub fn curvature_clamped(&self, s: f64) -> f64 {
        if self.legs.is_empty() {
            return 0.0;
        }
        let s = s.clamp(0.0, self.total_length);
        let leg = &self.legs[self.leg_index_at_arc(s)];
        match &leg.geometry {
            LegGeometry::Straight(_) => 0.0,
            LegGeometry::Clothoid { triple, .. } => triple.curvature_local(s - leg.start_s),
        }
    }

    /// World pose at arc position s.
    pub fn pose_at(&self, s: f64) -> Result<Pose, PlanError> {
        if self.legs.is_empty() || s < -1e-12 || s > self.total_length + 1e-12 {
            return Err(PlanError::OutOfRange);
        }
        let s = s.clamp(0.0, self.total_length);
        let leg = &self.legs[self.leg_index_at_arc(s)];
        let u = s - leg.start_s;
        Ok(match &leg.geometry {
            LegGeometry::Straight(_) => Pose {
                x: leg.start_pose.x + u * leg.start_pose.psi.cos(),
                y: leg.start_pose.y + u * leg.start_pose.psi.sin(),
                psi: leg.start_pose.psi,
            },
            LegGeometry::Clothoid { triple, .. } => triple.pose_local(u),
        })
    }

    /// Time at which the desired profile reaches arc position s.
    pub fn time_at_arc(&self, s: f64) -> Result<f64, PlanError> {
        if self.legs.is_empty() || s < -1e-12 || s > self.total_length + 1e-12 {
            return Err(PlanError::OutOfRange);
        }
        let s = s.clamp(0.0, self.total_length);
        let leg = &self.legs[self.leg_index_at_arc(s)];
        let u = s - leg.start_s;
        Ok(match &leg.geometry {
            LegGeometry::Straight(p) => leg.start_t + p.t_of_s(u),
            LegGeometry::Clothoid { speed, .. } => leg.start_t + u / speed,
        })
    }

    /// Uniform arc-length sampling including the exact final point.
    pub fn sample(&self, ds: f64) -> Result<Vec<PathSample>, PlanError> {
        if !(ds > 0.0) {
            return Err(PlanError::NonPositiveLength);
        }
        let mut out = Vec::new();
        if self.legs.is_empty() {
            return Ok(out);
        }
        let n = (self.total_length / ds).floor() as usize;
        let mut grid: Vec<f64> = (0..=n).map(|i| i as f64 * ds).collect();
        if self.total_length - grid[grid.len() - 1] > 1e-9 {
            grid.push(self.total_length);
        }
        for s in grid {
            let pose = self.pose_at(s)?;
            let t = self.time_at_arc(s)?;
            let (_, v_des) = self.desired_at(t);
            out.push(PathSample {
                s,
                x: pose.x,
                y: pose.y,
                psi: pose.psi,
                kappa: self.curvature_clamped(s),
                t,
                v_des,
            });
        }
        Ok(out)
    }
}
