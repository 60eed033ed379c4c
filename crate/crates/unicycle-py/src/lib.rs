//! Python bindings: parameters, planning, linear analysis, closed-loop
//! simulation and sweeps, mirroring the CLI's data surface.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use unicycle_core::control;
use unicycle_core::dynamics::{State, UnicycleParams};
use unicycle_core::planner::{self, ManeuverLeg, PathPlan, Pose};
use unicycle_core::sim::{self, Metrics, Outcome, SimConfig, Trace};

fn val_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn run_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn origin() -> Pose {
    Pose {
        x: 0.0,
        y: 0.0,
        psi: 0.0,
    }
}

/// Physical parameters of the wheel + frame + pendulum assembly.
#[pyclass(name = "Params", skip_from_py_object)]
#[derive(Clone)]
struct PyParams {
    inner: UnicycleParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (m=4.0, m1=10.0, m2=10.0, h=0.3, radius=0.3, g=9.81))]
    fn new(m: f64, m1: f64, m2: f64, h: f64, radius: f64, g: f64) -> PyResult<Self> {
        let inner = UnicycleParams {
            m,
            m1,
            m2,
            h,
            radius,
            g,
        };
        inner.validate().map_err(val_err)?;
        Ok(PyParams { inner })
    }

    #[getter]
    fn m(&self) -> f64 {
        self.inner.m
    }
    #[getter]
    fn m1(&self) -> f64 {
        self.inner.m1
    }
    #[getter]
    fn m2(&self) -> f64 {
        self.inner.m2
    }
    #[getter]
    fn h(&self) -> f64 {
        self.inner.h
    }
    #[getter]
    fn radius(&self) -> f64 {
        self.inner.radius
    }
    #[getter]
    fn g(&self) -> f64 {
        self.inner.g
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "Params(m={}, m1={}, m2={}, h={}, radius={}, g={})",
            p.m, p.m1, p.m2, p.h, p.radius, p.g
        )
    }
}

/// Integration and control-loop settings.
#[pyclass(name = "SimConfig", skip_from_py_object)]
#[derive(Clone)]
struct PySimConfig {
    inner: SimConfig,
}

#[pymethods]
impl PySimConfig {
    #[new]
    #[pyo3(signature = (dt=1e-3, phidot_min=1.0, target_pole=-12.0, fall_threshold=1.0, sample_stride=10))]
    fn new(
        dt: f64,
        phidot_min: f64,
        target_pole: f64,
        fall_threshold: f64,
        sample_stride: usize,
    ) -> PyResult<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(val_err("dt must be positive and finite"));
        }
        if sample_stride == 0 {
            return Err(val_err("sample_stride must be at least 1"));
        }
        Ok(PySimConfig {
            inner: SimConfig {
                dt,
                phidot_min,
                target_pole,
                fall_threshold,
                sample_stride,
            },
        })
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }
    #[getter]
    fn target_pole(&self) -> f64 {
        self.inner.target_pole
    }
    #[getter]
    fn fall_threshold(&self) -> f64 {
        self.inner.fall_threshold
    }
}

/// A chained, time-parametrized G2 path.
#[pyclass(name = "Plan")]
struct PyPlan {
    inner: PathPlan,
}

#[pymethods]
impl PyPlan {
    fn length(&self) -> f64 {
        self.inner.total_length()
    }

    fn duration(&self) -> f64 {
        self.inner.total_duration()
    }

    fn final_speed(&self) -> f64 {
        self.inner.final_speed()
    }

    fn kappa(&self, s: f64) -> f64 {
        self.inner.curvature_clamped(s)
    }

    /// Pose (x, y, psi) at arc length s.
    fn pose(&self, s: f64) -> PyResult<(f64, f64, f64)> {
        let q = self.inner.pose_at(s).map_err(val_err)?;
        Ok((q.x, q.y, q.psi))
    }

    /// Desired (s, v) at time t.
    fn desired(&self, t: f64) -> (f64, f64) {
        self.inner.desired_at(t)
    }

    /// Rows of (s, x, y, psi, kappa, t, v_des) on a ds-spaced arc grid.
    fn sample(&self, ds: f64) -> PyResult<Vec<(f64, f64, f64, f64, f64, f64, f64)>> {
        let rows = self.inner.sample(ds).map_err(val_err)?;
        Ok(rows
            .iter()
            .map(|q| (q.s, q.x, q.y, q.psi, q.kappa, q.t, q.v_des))
            .collect())
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(run_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyPlan {
            inner: serde_json::from_str(text).map_err(val_err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Plan(legs={}, length={:.4}, duration={:.4})",
            self.inner.legs().len(),
            self.inner.total_length(),
            self.inner.total_duration()
        )
    }
}

fn metrics_dict<'py>(py: Python<'py>, m: &Metrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("max_abs_tilt", m.max_abs_tilt)?;
    d.set_item("max_abs_r", m.max_abs_r)?;
    d.set_item("max_abs_f", m.max_abs_f)?;
    d.set_item("max_abs_t", m.max_abs_t)?;
    d.set_item("mu_required", m.mu_required)?;
    d.set_item("max_abs_p_f", m.max_abs_p_f)?;
    d.set_item("max_abs_p_t", m.max_abs_p_t)?;
    d.set_item("fell", m.fell)?;
    d.set_item("final_eps", m.final_eps)?;
    d.set_item("final_chi", m.final_chi)?;
    Ok(d)
}

fn outcome_string(o: &Outcome) -> String {
    match o {
        Outcome::Completed => "completed".into(),
        Outcome::Fell { .. } => "fell".into(),
        Outcome::LiftOff { .. } => "lift_off".into(),
        Outcome::PathSingular { .. } => "path_singular".into(),
    }
}

/// Closed-loop run result: outcome, metrics and sampled columns.
#[pyclass(name = "SimResult")]
struct PySimResult {
    trace: Trace,
}

#[pymethods]
impl PySimResult {
    #[getter]
    fn outcome(&self) -> String {
        outcome_string(&self.trace.outcome)
    }

    #[getter]
    fn t_end(&self) -> f64 {
        self.trace.samples.last().map(|q| q.t).unwrap_or(0.0)
    }

    #[getter]
    fn n_samples(&self) -> usize {
        self.trace.samples.len()
    }

    #[getter]
    fn gain_fallbacks(&self) -> usize {
        self.trace.gain_fallbacks
    }

    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        metrics_dict(py, &self.trace.metrics)
    }

    /// Sampled column by trace name, e.g. "t", "theta", "F", "Kz", "P_T".
    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        let pick: fn(&sim::Sample) -> f64 = match name {
            "t" => |q| q.t,
            "omega1" => |q| q.state.omega1,
            "sigma_r" => |q| q.state.sigma_r,
            "r" => |q| q.state.r,
            "theta" => |q| q.state.theta,
            "omega3" => |q| q.state.omega3,
            "chi" => |q| q.state.chi,
            "eps" => |q| q.state.eps,
            "omega2" => |q| q.state.omega2,
            "sigma_gamma" => |q| q.state.sigma_gamma,
            "gamma" => |q| q.state.gamma,
            "phi" => |q| q.state.phi,
            "s" => |q| q.state.s,
            "F" => |q| q.input.force,
            "T" => |q| q.input.torque,
            "Kx" => |q| q.contact.kx,
            "Ky" => |q| q.contact.ky,
            "Kz" => |q| q.contact.kz,
            "mu" => |q| q.contact.mu_required,
            "P_F" => |q| q.p_f,
            "P_T" => |q| q.p_t,
            "E" => |q| q.energy,
            "work" => |q| q.work,
            "kappa" => |q| q.kappa,
            "s_des" => |q| q.s_des,
            "v_des" => |q| q.v_des,
            "phase" => |q| q.phase as f64,
            other => return Err(val_err(format!("unknown column {other:?}"))),
        };
        Ok(self.trace.samples.iter().map(pick).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "SimResult(outcome='{}', t_end={:.4}, n_samples={})",
            self.outcome(),
            self.t_end(),
            self.n_samples()
        )
    }
}

fn parse_legs(text: &str) -> PyResult<Vec<ManeuverLeg>> {
    serde_json::from_str(text).map_err(val_err)
}

/// Critical wheel-center speeds (m/s) where lateral stability changes.
#[pyfunction]
fn critical_speeds(params: &PyParams) -> PyResult<(f64, f64, f64)> {
    control::critical_speeds(&params.inner).map_err(run_err)
}

/// Longitudinal open-loop eigenvalue pair (positive, negative).
#[pyfunction]
fn longitudinal_roots(params: &PyParams) -> (f64, f64) {
    let (a, b) = control::longitudinal_roots(&params.inner);
    (a.max(b), a.min(b))
}

/// Lateral open-loop roots at pitch rate phidot as (re, im) pairs.
#[pyfunction]
fn lateral_roots(params: &PyParams, phidot: f64) -> Vec<(f64, f64)> {
    control::lateral_roots(&params.inner, phidot)
        .iter()
        .map(|z| (z.re, z.im))
        .collect()
}

/// Output-feedback gains scheduled at pitch rate phidot.
#[pyfunction]
#[pyo3(signature = (params, phidot, target_pole=-12.0))]
fn gains<'py>(
    py: Python<'py>,
    params: &PyParams,
    phidot: f64,
    target_pole: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let g = control::synthesize_gains(&params.inner, phidot, target_pole).map_err(run_err)?;
    let d = PyDict::new(py);
    d.set_item("d_theta", g.d_theta)?;
    d.set_item("d_r", g.d_r)?;
    d.set_item("p_chi", g.p_chi)?;
    d.set_item("p_theta", g.p_theta)?;
    d.set_item("p_r", g.p_r)?;
    d.set_item("p_eps", g.p_eps)?;
    d.set_item("d_phi", g.d_phi)?;
    d.set_item("d_gamma", g.d_gamma)?;
    d.set_item("p_gamma", g.p_gamma)?;
    d.set_item("p_s", g.p_s)?;
    d.set_item("target_pole", g.target_pole)?;
    d.set_item("scheduled_phidot", g.scheduled_phidot)?;
    d.set_item("residual_pole", g.residual_pole)?;
    Ok(d)
}

/// Solve a G2 lane change (dx ahead, dy across, dpsi turn) at the given
/// clothoid segment ratio; returns segment lengths and curvature slopes.
#[pyfunction]
fn solve_lane_change<'py>(
    py: Python<'py>,
    dx: f64,
    dy: f64,
    dpsi: f64,
    ratio: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let bc = planner::BoundaryConditions {
        x_s: 0.0,
        y_s: 0.0,
        psi_s: 0.0,
        kappa_s: 0.0,
        x_f: dx,
        y_f: dy,
        psi_f: dpsi,
        kappa_f: 0.0,
    };
    let t = planner::solve_three_clothoid(&bc, ratio).map_err(val_err)?;
    let d = PyDict::new(py);
    d.set_item("s0", t.s0)?;
    d.set_item("s1", t.s1)?;
    d.set_item("s2", t.s2)?;
    d.set_item("kp0", t.kp0)?;
    d.set_item("kp1", t.kp1)?;
    d.set_item("kp2", t.kp2)?;
    d.set_item("kappa_max", t.max_abs_kappa())?;
    d.set_item("length", t.arc_length())?;
    Ok(d)
}

/// Plan from a JSON maneuver list, e.g.
/// '[{"type":"straight","delta_s":5,"v_s":0,"v_f":1.5}, ...]'.
#[pyfunction]
fn plan_from_json(maneuver: &str) -> PyResult<PyPlan> {
    let legs = parse_legs(maneuver)?;
    Ok(PyPlan {
        inner: planner::plan_maneuver(origin(), &legs).map_err(val_err)?,
    })
}

/// The benchmark maneuver: accelerate 5 m, lane-change 10 m x 3 m at the
/// given ratio, hold speed 5 m.
#[pyfunction]
fn nominal_plan(ratio: f64, speed: f64) -> PyResult<PyPlan> {
    Ok(PyPlan {
        inner: planner::plan_maneuver(origin(), &sim::nominal_maneuver(ratio, speed))
            .map_err(val_err)?,
    })
}

/// Run the closed-loop maneuver from the all-zero state.
#[pyfunction]
#[pyo3(signature = (plan, params=None, config=None))]
fn simulate(
    plan: &PyPlan,
    params: Option<&PyParams>,
    config: Option<&PySimConfig>,
) -> PyResult<PySimResult> {
    let p = params.map(|p| p.inner).unwrap_or_default();
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    let trace = sim::run_maneuver(&plan.inner, &p, &cfg).map_err(run_err)?;
    Ok(PySimResult { trace })
}

/// Run the closed-loop maneuver from the straight-rolling state at the
/// given wheel rate.
#[pyfunction]
#[pyo3(signature = (plan, omega2, params=None, config=None))]
fn simulate_from_steady(
    plan: &PyPlan,
    omega2: f64,
    params: Option<&PyParams>,
    config: Option<&PySimConfig>,
) -> PyResult<PySimResult> {
    let p = params.map(|p| p.inner).unwrap_or_default();
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    let x0 = State::straight_rolling(&p, omega2);
    let trace = sim::run_maneuver_from(&plan.inner, &p, &cfg, x0).map_err(run_err)?;
    Ok(PySimResult { trace })
}

/// Benchmark-maneuver metrics over a (ratio, speed) grid; one dict per cell.
#[pyfunction]
#[pyo3(signature = (ratios, speeds, params=None, config=None))]
fn sweep_grid<'py>(
    py: Python<'py>,
    ratios: Vec<f64>,
    speeds: Vec<f64>,
    params: Option<&PyParams>,
    config: Option<&PySimConfig>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    if ratios.is_empty() || speeds.is_empty() {
        return Err(val_err("ratio and speed grids must be nonempty"));
    }
    let p = params.map(|p| p.inner).unwrap_or_default();
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    let rows = py.detach(|| sim::sweep(&p, &cfg, &ratios, &speeds));
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let d = PyDict::new(py);
        d.set_item("ratio", row.ratio)?;
        d.set_item("speed", row.speed)?;
        d.set_item("outcome", row.outcome.as_ref().map(outcome_string))?;
        d.set_item("error", row.error.clone())?;
        match row.metrics.as_ref() {
            Some(m) => d.set_item("metrics", metrics_dict(py, m)?)?,
            None => d.set_item("metrics", py.None())?,
        }
        out.push(d);
    }
    Ok(out)
}

#[pymodule]
fn unicycle(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PySimConfig>()?;
    m.add_class::<PyPlan>()?;
    m.add_class::<PySimResult>()?;
    m.add_function(wrap_pyfunction!(critical_speeds, m)?)?;
    m.add_function(wrap_pyfunction!(longitudinal_roots, m)?)?;
    m.add_function(wrap_pyfunction!(lateral_roots, m)?)?;
    m.add_function(wrap_pyfunction!(gains, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lane_change, m)?)?;
    m.add_function(wrap_pyfunction!(plan_from_json, m)?)?;
    m.add_function(wrap_pyfunction!(nominal_plan, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_from_steady, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_grid, m)?)?;
    Ok(())
}
