//! CSV and JSON files exchanged between the commands.

use std::fs;
use std::path::Path;

use nalgebra::{DVector, Vector3};
use serde::Serialize;
use spillfree_core::config::Config;
use spillfree_core::manipulator::JointTrajectory;
use spillfree_core::pendulum::{PendulumState, PivotInput};
use spillfree_core::pipeline::RolloutNode;
use spillfree_core::qp::synthesize_velocities;

use crate::CliError;

/// Uniform-spacing tolerance for time columns (s).
pub const SPACING_TOL: f64 = 1e-9;

pub const STATE_COLUMNS: [&str; 10] =
    ["x_p", "y_p", "z_p", "theta", "phi", "vx_p", "vy_p", "vz_p", "theta_dot", "phi_dot"];

/// Fixed 17-significant-digit rendering used by every CSV writer.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    match path {
        None => Ok(Config::default()),
        Some(p) => parse_config(&read_text(p)?).map_err(|e| CliError::Parse(format!("{}: {e}", p.display()))),
    }
}

pub fn parse_config(text: &str) -> Result<Config, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

pub fn config_to_toml(config: &Config) -> Result<String, CliError> {
    toml::to_string(config).map_err(|e| CliError::Io(format!("config: {e}")))
}

fn csv_text(header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
    for row in rows {
        w.write_record(row.iter().map(|v| num(*v))).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

/// Numeric table with its header and the file line of every row.
struct Table {
    header: Vec<String>,
    rows: Vec<(u64, Vec<f64>)>,
}

fn read_table(text: &str, source: &str) -> Result<Table, CliError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = r
        .headers()
        .map_err(|e| CliError::Parse(format!("{source}: line 1: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().any(|h| h.parse::<f64>().is_ok()) {
        return Err(CliError::Parse(format!("{source}: line 1: header row required")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Parse(format!("{source}: line {line}: {e}"))
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .enumerate()
            .map(|(i, f)| {
                f.parse::<f64>().map_err(|_| {
                    CliError::Parse(format!("{source}: line {line}: column {}: cannot parse {f:?}", header[i]))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((line, row));
    }
    if rows.is_empty() {
        return Err(CliError::Parse(format!("{source}: no data rows")));
    }
    Ok(Table { header, rows })
}

fn expect_header(t: &Table, expected: &[String], source: &str) -> Result<(), CliError> {
    if t.header != expected {
        return Err(CliError::Parse(format!(
            "{source}: line 1: expected header {}, found {}",
            expected.join(","),
            t.header.join(",")
        )));
    }
    Ok(())
}

/// Sample time of a strictly increasing, uniformly spaced time column.
fn uniform_spacing(t: &Table, source: &str) -> Result<f64, CliError> {
    if t.rows.len() < 2 {
        return Err(CliError::Parse(format!("{source}: need at least two rows")));
    }
    let dt = t.rows[1].1[0] - t.rows[0].1[0];
    for w in t.rows.windows(2) {
        let (line, ref b) = w[1];
        let step = b[0] - w[0].1[0];
        if !(step > 0.0) {
            return Err(CliError::Parse(format!("{source}: line {line}: time is not strictly increasing")));
        }
        if (step - dt).abs() > SPACING_TOL {
            return Err(CliError::Parse(format!(
                "{source}: line {line}: spacing {step} differs from {dt} by more than {SPACING_TOL}"
            )));
        }
    }
    Ok(dt)
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Desired mass trajectory `t,x,y,z[,vx,vy,vz]`, resampled to `ts`.
///
/// Missing velocity columns are filled with central differences after
/// resampling.
pub fn parse_desired(text: &str, ts: f64, source: &str) -> Result<Vec<[f64; 6]>, CliError> {
    let t = read_table(text, source)?;
    let short = strings(&["t", "x", "y", "z"]);
    let long = strings(&["t", "x", "y", "z", "vx", "vy", "vz"]);
    let with_vel = t.header == long;
    if !with_vel {
        expect_header(&t, &short, source)?;
    }
    let dt = uniform_spacing(&t, source)?;
    let samples: Vec<[f64; 6]> = t
        .rows
        .iter()
        .map(|(_, r)| {
            let mut s = [0.0; 6];
            s[..r.len() - 1].copy_from_slice(&r[1..]);
            s
        })
        .collect();
    let mut rows = if (dt - ts).abs() <= SPACING_TOL {
        samples
    } else {
        resample(&samples, dt, ts)
    };
    if !with_vel {
        synthesize_velocities(&mut rows, ts);
    }
    Ok(rows)
}

/// Linear interpolation of uniformly spaced samples onto a grid of spacing `ts`.
pub fn resample(samples: &[[f64; 6]], dt: f64, ts: f64) -> Vec<[f64; 6]> {
    let duration = dt * (samples.len() - 1) as f64;
    let n = ((duration / ts).round() as usize).max(1);
    (0..=n)
        .map(|k| {
            let s = ((k as f64 * ts) / dt).min((samples.len() - 1) as f64);
            let i = (s.floor() as usize).min(samples.len() - 2);
            let f = s - i as f64;
            let mut out = [0.0; 6];
            for (j, o) in out.iter_mut().enumerate() {
                *o = samples[i][j] * (1.0 - f) + samples[i + 1][j] * f;
            }
            out
        })
        .collect()
}

pub fn desired_csv(rows: &[[f64; 6]], ts: f64) -> Result<String, CliError> {
    let header = strings(&["t", "x", "y", "z", "vx", "vy", "vz"]);
    csv_text(&header, rows.iter().enumerate().map(|(k, r)| {
        let mut v = vec![k as f64 * ts];
        v.extend_from_slice(r);
        v
    }))
}

fn trajectory_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(strings(&STATE_COLUMNS));
    h.extend(strings(&["u1", "u2", "u3"]));
    h
}

/// `t`, the ten states and the three inputs per node; the last node's input columns are zero.
pub fn trajectory_csv(states: &[PendulumState], inputs: &[PivotInput], ts: f64) -> Result<String, CliError> {
    csv_text(&trajectory_header(), states.iter().enumerate().map(|(k, s)| {
        let mut v = vec![k as f64 * ts];
        v.extend_from_slice(&s.to_array());
        let u = inputs.get(k).copied().unwrap_or_default();
        v.extend(u.0.iter());
        v
    }))
}

pub struct TrajectoryFile {
    pub ts: f64,
    pub states: Vec<PendulumState>,
    pub inputs: Vec<PivotInput>,
}

pub fn parse_trajectory(text: &str, source: &str) -> Result<TrajectoryFile, CliError> {
    let t = read_table(text, source)?;
    expect_header(&t, &trajectory_header(), source)?;
    let ts = uniform_spacing(&t, source)?;
    let states = t
        .rows
        .iter()
        .map(|(line, r)| {
            PendulumState::from_slice(&r[1..11]).map_err(|e| CliError::Parse(format!("{source}: line {line}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = t.rows.len() - 1;
    let inputs = t.rows[..n].iter().map(|(_, r)| PivotInput::new(r[11], r[12], r[13])).collect();
    Ok(TrajectoryFile { ts, states, inputs })
}

fn rollout_header() -> Vec<String> {
    let mut h = trajectory_header();
    let vec3 = |p: &str| ["x", "y", "z"].map(|a| format!("{p}{a}"));
    for p in ["m_", "mv_", "ma_", "f_"] {
        h.extend(vec3(p));
    }
    h.extend(STATE_COLUMNS.iter().map(|c| format!("r_{c}")));
    for p in ["r_m_", "r_mv_", "r_ma_", "r_f_"] {
        h.extend(vec3(p));
    }
    h
}

/// Planned execution and nonlinear replay per node.
///
/// `m_*`, `mv_*`, `ma_*` are the planned mass position, velocity and
/// acceleration, `f_*` the external force in the container frame; the
/// `r_` columns repeat these for the replay.
pub fn rollout_csv(rows: &[RolloutNode]) -> Result<String, CliError> {
    csv_text(&rollout_header(), rows.iter().map(|r| {
        let mut v = vec![r.t];
        v.extend_from_slice(&r.state.to_array());
        v.extend(r.input.0.iter());
        for x in [r.mass_position, r.mass_velocity, r.mass_acceleration, r.force] {
            v.extend(x.iter());
        }
        v.extend_from_slice(&r.replay_state.to_array());
        for x in [r.replay_position, r.replay_velocity, r.replay_acceleration, r.replay_force] {
            v.extend(x.iter());
        }
        v
    }))
}

pub fn parse_rollout(text: &str, source: &str) -> Result<(f64, Vec<RolloutNode>), CliError> {
    let t = read_table(text, source)?;
    expect_header(&t, &rollout_header(), source)?;
    let ts = uniform_spacing(&t, source)?;
    let rows = t
        .rows
        .iter()
        .map(|(line, r)| {
            let err = |e: spillfree_core::Error| CliError::Parse(format!("{source}: line {line}: {e}"));
            let v3 = |i: usize| Vector3::new(r[i], r[i + 1], r[i + 2]);
            Ok(RolloutNode {
                t: r[0],
                state: PendulumState::from_slice(&r[1..11]).map_err(err)?,
                input: PivotInput::new(r[11], r[12], r[13]),
                mass_position: v3(14),
                mass_velocity: v3(17),
                mass_acceleration: v3(20),
                force: v3(23),
                replay_state: PendulumState::from_slice(&r[26..36]).map_err(err)?,
                replay_position: v3(36),
                replay_velocity: v3(39),
                replay_acceleration: v3(42),
                replay_force: v3(45),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok((ts, rows))
}

/// `t,q1..qn,dq1..dqn,ddq1..ddqn,dddq1..dddqn[,tau1..taun]`
pub fn joints_csv(jt: &JointTrajectory) -> Result<String, CliError> {
    let n = jt.dof();
    let mut header = vec!["t".to_string()];
    let mut groups: Vec<(&str, &Vec<DVector<f64>>)> = vec![("q", &jt.q), ("dq", &jt.dq), ("ddq", &jt.ddq), ("dddq", &jt.dddq)];
    if let Some(tau) = &jt.tau {
        groups.push(("tau", tau));
    }
    for (name, _) in &groups {
        header.extend((1..=n).map(|i| format!("{name}{i}")));
    }
    csv_text(&header, (0..jt.len()).map(|k| {
        let mut v = vec![jt.time(k)];
        for (_, series) in &groups {
            v.extend(series[k].iter());
        }
        v
    }))
}
