//! Closed-loop maneuver simulation: fixed-step RK4 integration with gain
//! scheduling on the instantaneous pitch rate, trace recording, per-run
//! metrics, and the ratio/speed sweep harness.

use crate::control::{feedback, synthesize_gains, CtrlError, Gains};
use crate::dynamics::{
    actuator_powers, contact_force_given_accel, pseudo_accel, rhs, total_energy, ContactForce,
    DynError, Input, State, UnicycleParams,
};
use crate::planner::{plan_maneuver, ManeuverLeg, PathPlan, Pose};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

const PHIDOT_QUANTUM: f64 = 0.01;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SimError {
    #[error("trace has no samples")]
    EmptyTrace,
    #[error("gain synthesis failed before any gains were available: {0}")]
    InitialGains(CtrlError),
}

/// Integration and control-loop settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub phidot_min: f64,
    pub target_pole: f64,
    pub fall_threshold: f64,
    pub sample_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            phidot_min: 1.0,
            target_pole: -12.0,
            fall_threshold: 1.0,
            sample_stride: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Fell { t: f64 },
    LiftOff { t: f64 },
    PathSingular { t: f64 },
}

/// One recorded point of a closed-loop run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: State,
    pub input: Input,
    pub contact: ContactForce,
    pub p_f: f64,
    pub p_t: f64,
    pub energy: f64,
    pub work: f64,
    pub kappa: f64,
    pub s_des: f64,
    pub v_des: f64,
    pub phase: usize,
}

/// Per-run maxima and final tracking errors, accumulated every integration
/// step regardless of the sample stride.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub max_abs_tilt: f64,
    pub max_abs_r: f64,
    pub max_abs_f: f64,
    pub max_abs_t: f64,
    pub mu_required: f64,
    pub max_abs_p_f: f64,
    pub max_abs_p_t: f64,
    pub fell: bool,
    pub final_eps: f64,
    pub final_chi: f64,
}

impl Metrics {
    fn absorb(&mut self, x: &State, u: &Input, k: &ContactForce, p_f: f64, p_t: f64) {
        self.max_abs_tilt = self.max_abs_tilt.max(x.theta.abs());
        self.max_abs_r = self.max_abs_r.max(x.r.abs());
        self.max_abs_f = self.max_abs_f.max(u.force.abs());
        self.max_abs_t = self.max_abs_t.max(u.torque.abs());
        self.mu_required = self.mu_required.max(k.mu_required);
        self.max_abs_p_f = self.max_abs_p_f.max(p_f.abs());
        self.max_abs_p_t = self.max_abs_p_t.max(p_t.abs());
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub samples: Vec<Sample>,
    pub outcome: Outcome,
    pub metrics: Metrics,
    pub gain_fallbacks: usize,
}

/// Classical RK4 step with the input held constant; the path curvature is
/// looked up at each stage's arc position.
pub fn step(
    p: &UnicycleParams,
    x: &State,
    u: &Input,
    plan: &PathPlan,
    dt: f64,
) -> Result<State, DynError> {
    let eval = |x: &State| rhs(p, x, u, plan.curvature_clamped(x.s));
    let k1 = eval(x)?;
    let k2 = eval(&advance(x, &k1, 0.5 * dt))?;
    let k3 = eval(&advance(x, &k2, 0.5 * dt))?;
    let k4 = eval(&advance(x, &k3, dt))?;
    let mut out = x.to_array();
    for i in 0..12 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(State::from_array(&out))
}

fn advance(x: &State, d: &[f64; 12], dt: f64) -> State {
    let mut a = x.to_array();
    for i in 0..12 {
        a[i] += dt * d[i];
    }
    State::from_array(&a)
}

fn make_sample(
    plan: &PathPlan,
    x: &State,
    t: f64,
    u: Input,
    contact: ContactForce,
    p_f: f64,
    p_t: f64,
    energy: f64,
    work: f64,
) -> Sample {
    let (s_des, v_des) = plan.desired_at(t);
    Sample {
        t,
        state: *x,
        input: u,
        contact,
        p_f,
        p_t,
        energy,
        work,
        kappa: plan.curvature_clamped(x.s),
        s_des,
        v_des,
        phase: plan.leg_index_at_time(t),
    }
}

/// Runs the closed-loop maneuver from the all-zero state.
pub fn run_maneuver(
    plan: &PathPlan,
    p: &UnicycleParams,
    cfg: &SimConfig,
) -> Result<Trace, SimError> {
    run_maneuver_from(plan, p, cfg, State::default())
}

/// Runs the closed-loop maneuver from a caller-chosen initial state.
pub fn run_maneuver_from(
    plan: &PathPlan,
    p: &UnicycleParams,
    cfg: &SimConfig,
    x0: State,
) -> Result<Trace, SimError> {
    let total = plan.total_duration();
    if plan.legs().is_empty() || total <= 0.0 {
        return Ok(Trace {
            samples: Vec::new(),
            outcome: Outcome::Completed,
            metrics: Metrics::default(),
            gain_fallbacks: 0,
        });
    }
    let mut cache: HashMap<i64, Gains> = HashMap::new();
    let mut prev_gains: Option<Gains> = None;
    let mut gain_fallbacks = 0usize;
    let mut samples = Vec::new();
    let mut metrics = Metrics::default();
    let mut work = 0.0;
    let mut x = x0;
    let mut outcome = Outcome::Completed;
    let n_steps = (total / cfg.dt).ceil().max(1.0) as usize;

    let mut terminated = false;
    for k in 0..n_steps {
        let t = k as f64 * cfg.dt;
        if x.theta.abs() > cfg.fall_threshold || x.gamma.abs() > cfg.fall_threshold {
            outcome = Outcome::Fell { t };
            samples.push(make_sample(
                plan,
                &x,
                t,
                Input::default(),
                ContactForce::default(),
                0.0,
                0.0,
                total_energy(p, &x),
                work,
            ));
            terminated = true;
            break;
        }
        let (s_des, v_des) = plan.desired_at(t);
        let phidot = (x.omega2 - x.omega3 * x.theta.tan()).max(cfg.phidot_min);
        let key = (phidot / PHIDOT_QUANTUM).round() as i64;
        let gains = match cache.get(&key) {
            Some(g) => *g,
            None => match synthesize_gains(p, key as f64 * PHIDOT_QUANTUM, cfg.target_pole) {
                Ok(g) => {
                    cache.insert(key, g);
                    g
                }
                Err(e) => {
                    gain_fallbacks += 1;
                    match prev_gains {
                        Some(g) => g,
                        None => return Err(SimError::InitialGains(e)),
                    }
                }
            },
        };
        prev_gains = Some(gains);
        let u = match feedback(p, &x, s_des, v_des, &gains) {
            Ok(u) => u,
            Err(_) => {
                outcome = Outcome::Fell { t };
                samples.push(make_sample(
                    plan,
                    &x,
                    t,
                    Input::default(),
                    ContactForce::default(),
                    0.0,
                    0.0,
                    total_energy(p, &x),
                    work,
                ));
                terminated = true;
                break;
            }
        };
        let sd = match pseudo_accel(p, &x, &u) {
            Ok(sd) => sd,
            Err(_) => {
                outcome = Outcome::Fell { t };
                samples.push(make_sample(
                    plan,
                    &x,
                    t,
                    u,
                    ContactForce::default(),
                    0.0,
                    0.0,
                    total_energy(p, &x),
                    work,
                ));
                terminated = true;
                break;
            }
        };
        let contact = contact_force_given_accel(p, &x, &sd);
        let (p_f, p_t) = actuator_powers(p, &x, &u);
        let energy = total_energy(p, &x);
        if contact.kz <= 0.0 {
            outcome = Outcome::LiftOff { t };
            samples.push(make_sample(plan, &x, t, u, contact, p_f, p_t, energy, work));
            terminated = true;
            break;
        }
        metrics.absorb(&x, &u, &contact, p_f, p_t);
        if k % cfg.sample_stride == 0 {
            samples.push(make_sample(plan, &x, t, u, contact, p_f, p_t, energy, work));
        }
        let dt_k = cfg.dt.min(total - t);
        match step(p, &x, &u, plan, dt_k) {
            Ok(next) => {
                let (pf_next, pt_next) = actuator_powers(p, &next, &u);
                work += dt_k * 0.5 * ((p_f + p_t) + (pf_next + pt_next));
                x = next;
            }
            Err(e) => {
                let t_fail = t + dt_k;
                outcome = match e {
                    DynError::PathSingular => Outcome::PathSingular { t: t_fail },
                    _ => Outcome::Fell { t: t_fail },
                };
                samples.push(make_sample(plan, &x, t, u, contact, p_f, p_t, energy, work));
                terminated = true;
                break;
            }
        }
    }

    if !terminated {
        let t = total;
        if x.theta.abs() > cfg.fall_threshold || x.gamma.abs() > cfg.fall_threshold {
            outcome = Outcome::Fell { t };
            samples.push(make_sample(
                plan,
                &x,
                t,
                Input::default(),
                ContactForce::default(),
                0.0,
                0.0,
                total_energy(p, &x),
                work,
            ));
        } else {
            let (s_des, v_des) = plan.desired_at(t);
            let u = prev_gains
                .and_then(|g| feedback(p, &x, s_des, v_des, &g).ok())
                .unwrap_or_default();
            let (contact, p_f, p_t) = match pseudo_accel(p, &x, &u) {
                Ok(sd) => {
                    let c = contact_force_given_accel(p, &x, &sd);
                    let (pf, pt) = actuator_powers(p, &x, &u);
                    (c, pf, pt)
                }
                Err(_) => (ContactForce::default(), 0.0, 0.0),
            };
            if contact.kz <= 0.0 {
                outcome = Outcome::LiftOff { t };
            } else {
                metrics.absorb(&x, &u, &contact, p_f, p_t);
            }
            samples.push(make_sample(
                plan,
                &x,
                t,
                u,
                contact,
                p_f,
                p_t,
                total_energy(p, &x),
                work,
            ));
        }
    }

    metrics.fell = matches!(outcome, Outcome::Fell { .. });
    metrics.final_eps = x.eps;
    metrics.final_chi = x.chi;
    Ok(Trace {
        samples,
        outcome,
        metrics,
        gain_fallbacks,
    })
}

/// Per-run maxima of the trace; the values are accumulated at every
/// integration step, so they do not depend on the sample stride.
pub fn compute_metrics(trace: &Trace) -> Result<Metrics, SimError> {
    if trace.samples.is_empty() {
        return Err(SimError::EmptyTrace);
    }
    Ok(trace.metrics)
}

/// The benchmark maneuver: accelerate over 5 m, lane-change 10 m ahead and
/// 3 m across at the given clothoid ratio, then hold speed for 5 m.
pub fn nominal_maneuver(ratio: f64, speed: f64) -> [ManeuverLeg; 3] {
    [
        ManeuverLeg::Straight {
            delta_s: 5.0,
            v_s: 0.0,
            v_f: speed,
        },
        ManeuverLeg::LaneChange {
            dx: 10.0,
            dy: 3.0,
            dpsi: 0.0,
            ratio,
        },
        ManeuverLeg::Straight {
            delta_s: 5.0,
            v_s: speed,
            v_f: speed,
        },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ratio: f64,
    pub speed: f64,
    pub metrics: Option<Metrics>,
    pub outcome: Option<Outcome>,
    pub error: Option<String>,
}

fn run_cell(p: &UnicycleParams, cfg: &SimConfig, ratio: f64, speed: f64) -> SweepRow {
    let origin = Pose {
        x: 0.0,
        y: 0.0,
        psi: 0.0,
    };
    let plan = match plan_maneuver(origin, &nominal_maneuver(ratio, speed)) {
        Ok(plan) => plan,
        Err(e) => {
            return SweepRow {
                ratio,
                speed,
                metrics: None,
                outcome: None,
                error: Some(e.to_string()),
            }
        }
    };
    match run_maneuver(&plan, p, cfg) {
        Ok(trace) => SweepRow {
            ratio,
            speed,
            metrics: Some(trace.metrics),
            outcome: Some(trace.outcome),
            error: None,
        },
        Err(e) => SweepRow {
            ratio,
            speed,
            metrics: None,
            outcome: None,
            error: Some(e.to_string()),
        },
    }
}

/// Runs the benchmark maneuver over every (ratio, speed) cell in the given
/// order. Cells execute in parallel; the row order is deterministic.
pub fn sweep(
    p: &UnicycleParams,
    cfg: &SimConfig,
    ratios: &[f64],
    speeds: &[f64],
) -> Vec<SweepRow> {
    let cells: Vec<(f64, f64)> = ratios
        .iter()
        .flat_map(|r| speeds.iter().map(move |v| (*r, *v)))
        .collect();
    cells
        .par_iter()
        .map(|(ratio, speed)| run_cell(p, cfg, *ratio, *speed))
        .collect()
}
