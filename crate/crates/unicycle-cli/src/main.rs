//! Command-line front end: linear analysis, clothoid path planning,
//! closed-loop simulation and segment-ratio sweeps, exported as CSV
//! tables and static SVG charts.

mod svg;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use unicycle_core::control::{critical_speeds, lateral_roots, longitudinal_roots};
use unicycle_core::dynamics::UnicycleParams;
use unicycle_core::planner::{plan_maneuver, ManeuverLeg, PathPlan, Pose};
use unicycle_core::sim::{
    nominal_maneuver, run_maneuver, sweep, Metrics, Outcome, SimConfig, Trace,
};

/// Prints to stdout, tolerating a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

const DEFAULT_RATIOS: &str = "0.05:0.8:0.05";
const DEFAULT_SWEEP_SPEEDS: &str = "1,1.5,3";
const DEFAULT_ANALYZE_SPEEDS: &str = "0.05:3:0.05";
const PATH_SAMPLE_DS: f64 = 0.05;

/// Numerical laboratory for a wheel + frame + reaction-mass unicycle:
/// linearized stability analysis, G2 lane-change planning, closed-loop
/// simulation and clothoid-ratio sweeps.
#[derive(Parser)]
#[command(name = "unicycle", version, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// JSON run configuration (see docs/config.schema.json)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory for CSV/JSON/SVG artifacts [default: out]
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Emit SVG charts alongside the data files
    #[arg(long, global = true, value_enum, default_value_t = SvgMode::On)]
    svg: SvgMode,
    /// Accepted for interface stability; runs are deterministic by construction
    #[arg(long, global = true)]
    seedless: bool,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum SvgMode {
    On,
    Off,
}

#[derive(Subcommand)]
enum Cmd {
    /// Root locus over speed plus the critical speeds and longitudinal eigenvalues
    Analyze {
        /// Speed grid, "a:b:step" or comma list [default: 0.05:3:0.05]
        #[arg(long, value_name = "GRID", value_parser = parse_grid)]
        speeds: Option<Grid>,
    },
    /// Solve the configured maneuver into a persisted plan and sampled path
    Plan {
        /// Lane-change ratio family, "a:b:step" or comma list (one plan per ratio)
        #[arg(long, value_name = "GRID", value_parser = parse_grid)]
        ratios: Option<Grid>,
    },
    /// Run the closed-loop maneuver; exports trace and summary metrics
    Simulate {
        /// Re-ingest a plan JSON written by `plan` instead of solving from config
        #[arg(long, value_name = "PATH")]
        plan: Option<PathBuf>,
        /// Integration step override [s]
        #[arg(long, value_name = "SECONDS")]
        dt: Option<f64>,
    },
    /// Run the benchmark maneuver over a (ratio, speed) grid and tabulate metrics
    Sweep {
        /// Ratio grid, "a:b:step" or comma list [default: 0.05:0.8:0.05]
        #[arg(long, value_name = "GRID", value_parser = parse_grid)]
        ratios: Option<Grid>,
        /// Speed grid, "a:b:step" or comma list [default: 1,1.5,3]
        #[arg(long, value_name = "GRID", value_parser = parse_grid)]
        speeds: Option<Grid>,
        /// Integration step override [s]
        #[arg(long, value_name = "SECONDS")]
        dt: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
struct Grid(Vec<f64>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty grid".into());
    }
    let parse_one = |p: &str| {
        p.trim()
            .parse::<f64>()
            .map_err(|e| format!("bad number {:?}: {e}", p.trim()))
    };
    let vals: Vec<f64> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected a:b:step, got {s:?}"));
        }
        let (a, b, step) = (parse_one(parts[0])?, parse_one(parts[1])?, parse_one(parts[2])?);
        if !a.is_finite() || !b.is_finite() || !(step > 0.0) {
            return Err("range needs finite bounds and step > 0".into());
        }
        if b < a {
            return Err("range end is below its start".into());
        }
        if (b - a) / step > 100_000.0 {
            return Err("range resolves to more than 100000 points".into());
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| snap(a + i as f64 * step)).collect()
    } else {
        s.split(',').map(parse_one).collect::<Result<_, _>>()?
    };
    if vals.is_empty() || vals.iter().any(|v| !v.is_finite()) {
        return Err("grid values must be finite and nonempty".into());
    }
    Ok(Grid(vals))
}

fn snap(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    params: UnicycleParams,
    sim: SimConfig,
    maneuver: Vec<ManeuverLeg>,
    output: OutputConfig,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OutputConfig {
    dir: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text =
        fs::read_to_string(path).with_context(|| format!("config {}", path.display()))?;
    let cfg: RunConfig = serde_json::from_str(&text)
        .with_context(|| format!("config {}", path.display()))?;
    cfg.params
        .validate()
        .map_err(|e| anyhow!("config {}: {e}", path.display()))?;
    Ok(cfg)
}

fn validate_sim(cfg: &SimConfig) -> Result<()> {
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        bail!("sim.dt must be positive and finite");
    }
    if cfg.sample_stride == 0 {
        bail!("sim.sample_stride must be at least 1");
    }
    if !(cfg.target_pole < 0.0) {
        bail!("sim.target_pole must be negative");
    }
    if !(cfg.fall_threshold > 0.0) {
        bail!("sim.fall_threshold must be positive");
    }
    if !(cfg.phidot_min > 0.0) {
        bail!("sim.phidot_min must be positive");
    }
    Ok(())
}

fn effective_maneuver(cfg: &RunConfig) -> Vec<ManeuverLeg> {
    if cfg.maneuver.is_empty() {
        nominal_maneuver(0.5, 1.5).to_vec()
    } else {
        cfg.maneuver.clone()
    }
}

fn with_ratio(legs: &[ManeuverLeg], ratio: f64) -> Vec<ManeuverLeg> {
    legs.iter()
        .map(|leg| match *leg {
            ManeuverLeg::LaneChange { dx, dy, dpsi, .. } => ManeuverLeg::LaneChange {
                dx,
                dy,
                dpsi,
                ratio,
            },
            straight => straight,
        })
        .collect()
}

fn first_ratio(legs: &[ManeuverLeg]) -> Option<f64> {
    legs.iter().find_map(|leg| match leg {
        ManeuverLeg::LaneChange { ratio, .. } => Some(*ratio),
        _ => None,
    })
}

fn plan_with_context(origin: Pose, legs: &[ManeuverLeg]) -> Result<PathPlan> {
    match plan_maneuver(origin, legs) {
        Ok(plan) => Ok(plan),
        Err(e) => {
            for i in 0..legs.len() {
                if plan_maneuver(origin, &legs[..=i]).is_err() {
                    bail!("maneuver segment {i}: {e}");
                }
            }
            Err(e.into())
        }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).with_context(|| format!("create {}", dir.display()))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).with_context(|| format!("write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("finalize {}", path.display()))?;
    Ok(())
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    Ok(w.into_inner()?)
}

fn fnum(v: f64) -> String {
    format!("{v}")
}

fn outcome_label(o: &Outcome) -> &'static str {
    match o {
        Outcome::Completed => "completed",
        Outcome::Fell { .. } => "fell",
        Outcome::LiftOff { .. } => "lift_off",
        Outcome::PathSingular { .. } => "path_singular",
    }
}

fn outcome_human(o: &Outcome) -> String {
    match o {
        Outcome::Completed => "completed".into(),
        Outcome::Fell { t } => format!("fell at t = {t:.4} s"),
        Outcome::LiftOff { t } => format!("lift_off (wheel unloaded) at t = {t:.4} s"),
        Outcome::PathSingular { t } => format!("path_singular at t = {t:.4} s"),
    }
}

const METRICS_HEADER: [&str; 14] = [
    "ratio",
    "speed",
    "max_abs_tilt",
    "max_abs_r",
    "max_abs_f",
    "max_abs_t",
    "mu_required",
    "max_abs_p_f",
    "max_abs_p_t",
    "fell",
    "final_eps",
    "final_chi",
    "outcome",
    "error",
];

fn metrics_record(
    ratio: Option<f64>,
    speed: f64,
    m: Option<&Metrics>,
    outcome: Option<&Outcome>,
    error: Option<&str>,
) -> Vec<String> {
    let mut row = vec![ratio.map(fnum).unwrap_or_default(), fnum(speed)];
    match m {
        Some(m) => row.extend([
            fnum(m.max_abs_tilt),
            fnum(m.max_abs_r),
            fnum(m.max_abs_f),
            fnum(m.max_abs_t),
            fnum(m.mu_required),
            fnum(m.max_abs_p_f),
            fnum(m.max_abs_p_t),
            m.fell.to_string(),
            fnum(m.final_eps),
            fnum(m.final_chi),
        ]),
        None => row.extend(std::iter::repeat_n(String::new(), 10)),
    }
    row.push(outcome.map(outcome_label).unwrap_or_default().to_string());
    row.push(error.unwrap_or_default().to_string());
    row
}

fn cmd_analyze(cfg: &RunConfig, speeds: &[f64], out: &Path, svg_on: bool) -> Result<ExitCode> {
    let p = &cfg.params;
    let (v1, v2, v3) = critical_speeds(p)?;
    let (la, lb) = longitudinal_roots(p);
    let (lon_pos, lon_neg) = (la.max(lb), la.min(lb));

    let mut rows = Vec::with_capacity(speeds.len());
    let mut re_panel = svg::Panel::new("lateral roots, real part", "v [m/s]", "Re lambda [1/s]");
    let mut im_panel = svg::Panel::new("lateral roots, imag part", "v [m/s]", "Im lambda [1/s]");
    let mut re_series = vec![Vec::new(); 4];
    let mut im_series = vec![Vec::new(); 4];
    for &v in speeds {
        let mut roots = lateral_roots(p, v / p.radius);
        roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let mut row = vec![fnum(v)];
        for (i, root) in roots.iter().enumerate() {
            row.push(fnum(root.re));
            row.push(fnum(root.im));
            re_series[i].push((v, root.re));
            im_series[i].push((v, root.im));
        }
        rows.push(row);
    }
    let header = [
        "speed", "re_lambda1", "im_lambda1", "re_lambda2", "im_lambda2", "re_lambda3",
        "im_lambda3", "re_lambda4", "im_lambda4",
    ];
    write_atomic(&out.join("roots.csv"), &csv_bytes(&header, &rows)?)?;

    let crit_rows: Vec<Vec<String>> = [
        ("v_crit_1", v1),
        ("v_crit_2", v2),
        ("v_crit_3", v3),
        ("lambda_lon_pos", lon_pos),
        ("lambda_lon_neg", lon_neg),
    ]
    .iter()
    .map(|(name, v)| vec![name.to_string(), fnum(*v)])
    .collect();
    write_atomic(
        &out.join("critical_speeds.csv"),
        &csv_bytes(&["name", "value"], &crit_rows)?,
    )?;

    let mut wrote = vec!["roots.csv", "critical_speeds.csv"];
    if svg_on {
        for (i, (re, im)) in re_series.into_iter().zip(im_series).enumerate() {
            re_panel.add(&format!("lambda{}", i + 1), re);
            im_panel.add(&format!("lambda{}", i + 1), im);
        }
        re_panel.v_lines = vec![v1, v2, v3];
        im_panel.v_lines = vec![v1, v2, v3];
        let doc = svg::render(&[re_panel, im_panel], 2);
        write_atomic(&out.join("roots.svg"), doc.as_bytes())?;
        wrote.push("roots.svg");
    }

    say!("critical speeds [m/s]: {v1:.4}  {v2:.4}  {v3:.4}");
    say!("longitudinal eigenvalues [1/s]: {lon_pos:+.4} / {lon_neg:+.4}");
    say!(
        "root locus: {} speeds in [{}, {}] m/s",
        speeds.len(),
        fnum(speeds[0]),
        fnum(speeds[speeds.len() - 1])
    );
    print_wrote(out, &wrote);
    Ok(ExitCode::SUCCESS)
}

fn cmd_plan(cfg: &RunConfig, ratios: Option<&[f64]>, out: &Path, svg_on: bool) -> Result<ExitCode> {
    let origin = Pose {
        x: 0.0,
        y: 0.0,
        psi: 0.0,
    };
    let base = effective_maneuver(cfg);
    let family: Vec<(Option<f64>, Vec<ManeuverLeg>)> = match ratios {
        None => vec![(None, base)],
        Some(list) => {
            if first_ratio(&base).is_none() {
                bail!("--ratios given but the maneuver has no lane_change segment");
            }
            list.iter().map(|&r| (Some(r), with_ratio(&base, r))).collect()
        }
    };

    let mut path_panel = svg::Panel::new("planned path", "x [m]", "y [m]");
    let mut kappa_panel = svg::Panel::new("curvature profile", "s [m]", "kappa [1/m]");
    let mut wrote = Vec::new();
    for (tag, legs) in &family {
        let plan = plan_with_context(origin, legs)?;
        let suffix = tag.map(|r| format!("_r{}", fnum(r))).unwrap_or_default();
        let plan_name = format!("plan{suffix}.json");
        let path_name = format!("path{suffix}.csv");

        let json = serde_json::to_string_pretty(&plan)?;
        write_atomic(&out.join(&plan_name), json.as_bytes())?;

        let samples = plan.sample(PATH_SAMPLE_DS)?;
        let rows: Vec<Vec<String>> = samples
            .iter()
            .map(|q| {
                vec![
                    fnum(q.s),
                    fnum(q.x),
                    fnum(q.y),
                    fnum(q.psi),
                    fnum(q.kappa),
                    fnum(q.t),
                    fnum(q.v_des),
                ]
            })
            .collect();
        write_atomic(
            &out.join(&path_name),
            &csv_bytes(&["s", "x", "y", "psi", "kappa", "t", "v_des"], &rows)?,
        )?;

        let label = tag.map(|r| format!("S={}", fnum(r))).unwrap_or_else(|| "path".into());
        path_panel.add(&label, samples.iter().map(|q| (q.x, q.y)).collect());
        kappa_panel.add(&label, samples.iter().map(|q| (q.s, q.kappa)).collect());

        say!(
            "{plan_name}: {} legs, length {:.4} m, duration {:.4} s, max |kappa| {:.4} 1/m",
            plan.legs().len(),
            plan.total_length(),
            plan.total_duration(),
            samples.iter().fold(0.0f64, |m, q| m.max(q.kappa.abs())),
        );
        wrote.push(plan_name);
        wrote.push(path_name);
    }
    if svg_on {
        let doc = svg::render(&[path_panel, kappa_panel], 2);
        write_atomic(&out.join("path.svg"), doc.as_bytes())?;
        wrote.push("path.svg".into());
    }
    let refs: Vec<&str> = wrote.iter().map(String::as_str).collect();
    print_wrote(out, &refs);
    Ok(ExitCode::SUCCESS)
}

const TRACE_HEADER: [&str; 26] = [
    "t", "omega1", "sigma_r", "r", "theta", "omega3", "chi", "eps", "omega2", "sigma_gamma",
    "gamma", "phi", "s", "F", "T", "Kx", "Ky", "Kz", "mu", "P_F", "P_T", "E", "kappa", "s_des",
    "v_des", "phase",
];

fn trace_rows(trace: &Trace) -> Vec<Vec<String>> {
    trace
        .samples
        .iter()
        .map(|q| {
            let mut row = Vec::with_capacity(TRACE_HEADER.len());
            row.push(fnum(q.t));
            row.extend(q.state.to_array().iter().map(|v| fnum(*v)));
            row.extend([
                fnum(q.input.force),
                fnum(q.input.torque),
                fnum(q.contact.kx),
                fnum(q.contact.ky),
                fnum(q.contact.kz),
                fnum(q.contact.mu_required),
                fnum(q.p_f),
                fnum(q.p_t),
                fnum(q.energy),
                fnum(q.kappa),
                fnum(q.s_des),
                fnum(q.v_des),
                q.phase.to_string(),
            ]);
            row
        })
        .collect()
}

fn trace_panels(trace: &Trace) -> Vec<svg::Panel> {
    let pick = |f: fn(&unicycle_core::sim::Sample) -> f64| -> Vec<(f64, f64)> {
        trace.samples.iter().map(|q| (q.t, f(q))).collect()
    };
    let mut attitude = svg::Panel::new("attitude", "t [s]", "angle [rad]");
    attitude.add("theta", pick(|q| q.state.theta));
    attitude.add("gamma", pick(|q| q.state.gamma));
    let mut inputs = svg::Panel::new("inputs", "t [s]", "F [N], T [N m]");
    inputs.add("F", pick(|q| q.input.force));
    inputs.add("T", pick(|q| q.input.torque));
    let mut powers = svg::Panel::new("actuator power", "t [s]", "P [W]");
    powers.add("P_F", pick(|q| q.p_f));
    powers.add("P_T", pick(|q| q.p_t));
    let mut tracking = svg::Panel::new("tracking error", "t [s]", "eps [m], chi [rad]");
    tracking.add("eps", pick(|q| q.state.eps));
    tracking.add("chi", pick(|q| q.state.chi));
    vec![attitude, inputs, powers, tracking]
}

fn cmd_simulate(
    cfg: &RunConfig,
    plan_path: Option<&Path>,
    dt: Option<f64>,
    out: &Path,
    svg_on: bool,
) -> Result<ExitCode> {
    let mut sim_cfg = cfg.sim;
    if let Some(dt) = dt {
        sim_cfg.dt = dt;
    }
    validate_sim(&sim_cfg)?;

    let maneuver = effective_maneuver(cfg);
    let (plan, ratio) = match plan_path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("plan {}", path.display()))?;
            let plan: PathPlan = serde_json::from_str(&text)
                .with_context(|| format!("plan {}", path.display()))?;
            (plan, None)
        }
        None => {
            let origin = Pose {
                x: 0.0,
                y: 0.0,
                psi: 0.0,
            };
            (plan_with_context(origin, &maneuver)?, first_ratio(&maneuver))
        }
    };

    let trace = run_maneuver(&plan, &cfg.params, &sim_cfg)?;
    write_atomic(
        &out.join("trace.csv"),
        &csv_bytes(&TRACE_HEADER, &trace_rows(&trace))?,
    )?;
    let metrics_row = metrics_record(
        ratio,
        plan.final_speed(),
        Some(&trace.metrics),
        Some(&trace.outcome),
        None,
    );
    write_atomic(
        &out.join("metrics.csv"),
        &csv_bytes(&METRICS_HEADER, &[metrics_row])?,
    )?;
    let mut wrote = vec!["trace.csv", "metrics.csv"];
    if svg_on {
        let doc = svg::render(&trace_panels(&trace), 2);
        write_atomic(&out.join("trace.svg"), doc.as_bytes())?;
        wrote.push("trace.svg");
    }

    let m = &trace.metrics;
    let t_end = trace.samples.last().map(|q| q.t).unwrap_or(0.0);
    say!("outcome: {}", outcome_human(&trace.outcome));
    say!(
        "t_end = {:.4} s, {} samples, {} gain fallbacks",
        t_end,
        trace.samples.len(),
        trace.gain_fallbacks
    );
    say!(
        "final eps = {:.4e} m, final chi = {:.4e} rad",
        m.final_eps, m.final_chi
    );
    say!(
        "max |theta| = {:.4} rad, max |r| = {:.4} rad/s, mu required = {:.4}",
        m.max_abs_tilt, m.max_abs_r, m.mu_required
    );
    say!(
        "max |F| = {:.4} N, max |T| = {:.4} N m, max |P_F| = {:.4} W, max |P_T| = {:.4} W",
        m.max_abs_f, m.max_abs_t, m.max_abs_p_f, m.max_abs_p_t
    );
    print_wrote(out, &wrote);

    Ok(match trace.outcome {
        Outcome::Completed => ExitCode::SUCCESS,
        Outcome::Fell { .. } => ExitCode::from(2),
        Outcome::LiftOff { .. } => ExitCode::from(3),
        Outcome::PathSingular { .. } => ExitCode::from(4),
    })
}

fn cmd_sweep(
    cfg: &RunConfig,
    ratios: &[f64],
    speeds: &[f64],
    dt: Option<f64>,
    out: &Path,
    svg_on: bool,
) -> Result<ExitCode> {
    let mut sim_cfg = cfg.sim;
    if let Some(dt) = dt {
        sim_cfg.dt = dt;
    }
    validate_sim(&sim_cfg)?;

    let rows = sweep(&cfg.params, &sim_cfg, ratios, speeds);
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            metrics_record(
                Some(r.ratio),
                r.speed,
                r.metrics.as_ref(),
                r.outcome.as_ref(),
                r.error.as_deref(),
            )
        })
        .collect();
    write_atomic(
        &out.join("metrics.csv"),
        &csv_bytes(&METRICS_HEADER, &records)?,
    )?;
    let mut wrote = vec!["metrics.csv".to_string()];

    if svg_on {
        for &v in speeds {
            let cells: Vec<_> = rows
                .iter()
                .filter(|r| r.speed == v && r.metrics.is_some())
                .collect();
            let pick = |f: fn(&Metrics) -> f64| -> Vec<(f64, f64)> {
                cells
                    .iter()
                    .map(|r| (r.ratio, f(r.metrics.as_ref().unwrap())))
                    .collect()
            };
            let title = |lhs: &str| format!("{lhs}, v = {} m/s", fnum(v));
            let mut tilt = svg::Panel::new(&title("peak tilt"), "ratio", "max |theta| [rad]");
            tilt.add("max |theta|", pick(|m| m.max_abs_tilt));
            let mut yaw = svg::Panel::new(&title("peak yaw rate"), "ratio", "max |r| [rad/s]");
            yaw.add("max |r|", pick(|m| m.max_abs_r));
            let mut inputs = svg::Panel::new(&title("peak inputs"), "ratio", "F [N], T [N m]");
            inputs.add("max |F|", pick(|m| m.max_abs_f));
            inputs.add("max |T|", pick(|m| m.max_abs_t));
            let mut mu = svg::Panel::new(&title("required friction"), "ratio", "mu");
            mu.add("mu", pick(|m| m.mu_required));
            let doc = svg::render(&[tilt, yaw, inputs, mu], 2);
            let name = format!("sweep_v{}.svg", fnum(v));
            write_atomic(&out.join(&name), doc.as_bytes())?;
            wrote.push(name);
        }
    }

    let mut completed = 0usize;
    let mut lifted = 0usize;
    let mut fell = 0usize;
    let mut errs = 0usize;
    for r in &rows {
        match (&r.outcome, &r.error) {
            (Some(Outcome::Completed), _) => completed += 1,
            (Some(Outcome::LiftOff { .. }), _) => lifted += 1,
            (Some(Outcome::Fell { .. }), _) => fell += 1,
            (_, Some(_)) => errs += 1,
            _ => {}
        }
    }
    say!(
        "{} cells ({} ratios x {} speeds): {completed} completed, {lifted} lift_off, \
         {fell} fell, {errs} errors",
        rows.len(),
        ratios.len(),
        speeds.len()
    );
    let refs: Vec<&str> = wrote.iter().map(String::as_str).collect();
    print_wrote(out, &refs);
    Ok(ExitCode::SUCCESS)
}

fn print_wrote(out: &Path, names: &[&str]) {
    let list: Vec<String> = names
        .iter()
        .map(|n| out.join(n).display().to_string())
        .collect();
    say!("wrote {}", list.join(" "));
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let cfg = load_config(cli.config.as_deref())?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let svg_on = cli.svg == SvgMode::On;
    match &cli.cmd {
        Cmd::Analyze { speeds } => {
            let grid = speeds
                .clone()
                .unwrap_or_else(|| parse_grid(DEFAULT_ANALYZE_SPEEDS).unwrap());
            cmd_analyze(&cfg, &grid.0, &out, svg_on)
        }
        Cmd::Plan { ratios } => cmd_plan(&cfg, ratios.as_ref().map(|g| g.0.as_slice()), &out, svg_on),
        Cmd::Simulate { plan, dt } => cmd_simulate(&cfg, plan.as_deref(), *dt, &out, svg_on),
        Cmd::Sweep { ratios, speeds, dt } => {
            let ratios = ratios
                .clone()
                .unwrap_or_else(|| parse_grid(DEFAULT_RATIOS).unwrap());
            let speeds = speeds
                .clone()
                .unwrap_or_else(|| parse_grid(DEFAULT_SWEEP_SPEEDS).unwrap());
            cmd_sweep(&cfg, &ratios.0, &speeds.0, *dt, &out, svg_on)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(4)
        }
    }
}
