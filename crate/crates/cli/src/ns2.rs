//! NS-2 `setdest` movement files.
//!
//! Export writes each node's initial position as `set X_`/`set Y_`/`set Z_`
//! lines, then one `setdest` per run of identical per-step displacements, so a
//! lane-following node gets one line per straight segment and a group member
//! one line per step. Jumps (lane wrap) become `set X_`/`set Y_` at the later
//! sample time. Parsing replays the commands and samples the motion back onto
//! a regular grid.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use manet_core::geometry::{
    is_relocation, wrap_angle, MobilityTrace, NodeState, SimulationArea, Vec2,
};
use thiserror::Error;

const HEADER: &str = "# manet-ns2";
/// A merged segment may miss an intermediate sample by at most this much.
const MERGE_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Ns2Error {
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("{0}")]
    Invalid(String),
}

/// Writes a float so Tcl reads it back exactly, always with a decimal point.
pub fn fmt_num(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') || !v.is_finite() {
        s
    } else {
        format!("{s}.0")
    }
}

pub fn export_ns2(trace: &MobilityTrace) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{HEADER} nodes {} duration {} sample_interval {} area {} {}",
        trace.node_count,
        fmt_num(trace.duration),
        fmt_num(trace.sample_interval),
        fmt_num(trace.area.width),
        fmt_num(trace.area.height)
    );
    let dt = trace.sample_interval;
    let steps = trace.step_count();
    for node in 0..trace.node_count {
        let p0 = trace.state(0, node).position;
        let _ = writeln!(out, "$node_({node}) set X_ {}", fmt_num(p0.x));
        let _ = writeln!(out, "$node_({node}) set Y_ {}", fmt_num(p0.y));
        let _ = writeln!(out, "$node_({node}) set Z_ 0.0");
    }
    for node in 0..trace.node_count {
        let pos = |k: usize| trace.state(k, node).position;
        let jump =
            |k: usize| is_relocation((pos(k + 1) - pos(k)).norm(), trace.state(k, node).speed, dt);
        let mut k = 0;
        while k + 1 < steps {
            let d = pos(k + 1) - pos(k);
            if jump(k) {
                let p = pos(k + 1);
                let t = fmt_num(trace.time_of(k + 1));
                let _ = writeln!(
                    out,
                    "$ns_ at {t} \"$node_({node}) set X_ {}\"",
                    fmt_num(p.x)
                );
                let _ = writeln!(
                    out,
                    "$ns_ at {t} \"$node_({node}) set Y_ {}\"",
                    fmt_num(p.y)
                );
                k += 1;
                continue;
            }
            if d.norm() <= 1e-12 {
                k += 1;
                continue;
            }
            let mut end = k + 1;
            while end + 1 < steps && !jump(end) {
                let expected = pos(k) + d * ((end + 1 - k) as f64);
                if (pos(end + 1) - expected).norm() > MERGE_TOLERANCE {
                    break;
                }
                end += 1;
            }
            let target = pos(end);
            let speed = (target - pos(k)).norm() / ((end - k) as f64 * dt);
            let _ = writeln!(
                out,
                "$ns_ at {} \"$node_({node}) setdest {} {} {}\"",
                fmt_num(trace.time_of(k)),
                fmt_num(target.x),
                fmt_num(target.y),
                fmt_num(speed)
            );
            k = end;
        }
    }
    out
}

/// Grid and area for parsing files that lack the export header.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Ns2ParseOptions {
    pub sample_interval: Option<f64>,
    pub duration: Option<f64>,
    pub area: Option<SimulationArea>,
}

#[derive(Debug, Clone, Copy)]
enum Command {
    SetX(f64),
    SetY(f64),
    Dest { to: Vec2, speed: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Motion {
    pos: Vec2,
    from_time: f64,
    target: Vec2,
    speed: f64,
}

impl Motion {
    fn at(&self, t: f64) -> Vec2 {
        let delta = self.target - self.pos;
        let dist = delta.norm();
        if dist == 0.0 || self.speed <= 0.0 {
            return self.pos;
        }
        let frac = ((t - self.from_time) * self.speed / dist).clamp(0.0, 1.0);
        if frac >= 1.0 {
            self.target
        } else {
            self.pos + delta * frac
        }
    }

    fn end_time(&self) -> f64 {
        let dist = (self.target - self.pos).norm();
        if dist == 0.0 || self.speed <= 0.0 {
            self.from_time
        } else {
            self.from_time + dist / self.speed
        }
    }
}

fn err(line: usize, reason: impl Into<String>) -> Ns2Error {
    Ns2Error::Line {
        line,
        reason: reason.into(),
    }
}

fn number(tok: Option<&str>, what: &str, line: usize) -> Result<f64, Ns2Error> {
    let raw = tok.ok_or_else(|| err(line, format!("missing {what}")))?;
    let v: f64 = raw
        .parse()
        .map_err(|_| err(line, format!("bad {what} `{raw}`")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(err(line, format!("{what} must be finite")))
    }
}

/// `$node_(12)` → 12.
fn node_ref(tok: Option<&str>, line: usize) -> Result<usize, Ns2Error> {
    let raw = tok.ok_or_else(|| err(line, "missing node"))?;
    raw.strip_prefix("$node_(")
        .and_then(|r| r.strip_suffix(')'))
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| err(line, format!("bad node reference `{raw}`")))
}

/// Parses `$node_(i) set X_ v` or `$node_(i) setdest x y s`.
fn node_command(text: &str, line: usize) -> Result<(usize, Option<Command>), Ns2Error> {
    let mut f = text.split_whitespace();
    let node = node_ref(f.next(), line)?;
    let cmd = match f.next() {
        Some("set") => {
            let axis = f.next();
            let v = number(f.next(), "coordinate", line)?;
            match axis {
                Some("X_") => Some(Command::SetX(v)),
                Some("Y_") => Some(Command::SetY(v)),
                Some("Z_") => None,
                other => {
                    return Err(err(
                        line,
                        format!("unknown attribute `{}`", other.unwrap_or("")),
                    ))
                }
            }
        }
        Some("setdest") => {
            let x = number(f.next(), "destination x", line)?;
            let y = number(f.next(), "destination y", line)?;
            let speed = number(f.next(), "speed", line)?;
            if speed < 0.0 {
                return Err(err(line, "negative speed"));
            }
            Some(Command::Dest {
                to: Vec2::new(x, y),
                speed,
            })
        }
        other => {
            return Err(err(
                line,
                format!("unknown command `{}`", other.unwrap_or("")),
            ))
        }
    };
    if f.next().is_some() {
        return Err(err(line, "trailing tokens"));
    }
    Ok((node, cmd))
}

pub fn parse_ns2(text: &str, options: Ns2ParseOptions) -> Result<MobilityTrace, Ns2Error> {
    let mut opts = options;
    let mut initial: BTreeMap<usize, (Option<f64>, Option<f64>)> = BTreeMap::new();
    let mut timed: BTreeMap<usize, Vec<(f64, Command)>> = BTreeMap::new();
    let mut header_nodes = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if let Some(rest) = l.strip_prefix(HEADER) {
            let f: Vec<&str> = rest.split_whitespace().collect();
            let mut j = 0;
            while j < f.len() {
                match f[j] {
                    "nodes" => {
                        header_nodes =
                            Some(number(f.get(j + 1).copied(), "node count", line)? as usize)
                    }
                    "duration" => {
                        opts.duration =
                            opts.duration
                                .or(Some(number(f.get(j + 1).copied(), "duration", line)?))
                    }
                    "sample_interval" => {
                        opts.sample_interval = opts.sample_interval.or(Some(number(
                            f.get(j + 1).copied(),
                            "sample interval",
                            line,
                        )?))
                    }
                    "area" => {
                        let w = number(f.get(j + 1).copied(), "area width", line)?;
                        let h = number(f.get(j + 2).copied(), "area height", line)?;
                        let area =
                            SimulationArea::new(w, h).map_err(|e| err(line, e.to_string()))?;
                        opts.area = opts.area.or(Some(area));
                        j += 1;
                    }
                    other => return Err(err(line, format!("unknown header field `{other}`"))),
                }
                j += 2;
            }
            continue;
        }
        if l.is_empty() || l.starts_with('#') || l.starts_with("$god_") {
            continue;
        }
        if let Some(rest) = l.strip_prefix("$ns_ at ") {
            let (t_raw, quoted) = rest
                .split_once(' ')
                .ok_or_else(|| err(line, "missing command"))?;
            let t = number(Some(t_raw), "time", line)?;
            if t < 0.0 {
                return Err(err(line, "negative time"));
            }
            let inner = quoted
                .trim()
                .strip_prefix('"')
                .and_then(|q| q.strip_suffix('"'))
                .ok_or_else(|| err(line, "command must be quoted"))?;
            let (node, cmd) = node_command(inner, line)?;
            if let Some(cmd) = cmd {
                timed.entry(node).or_default().push((t, cmd));
            }
            continue;
        }
        if l.starts_with("$node_(") {
            let (node, cmd) = node_command(l, line)?;
            let entry = initial.entry(node).or_default();
            match cmd {
                Some(Command::SetX(x)) => entry.0 = Some(x),
                Some(Command::SetY(y)) => entry.1 = Some(y),
                Some(Command::Dest { .. }) => {
                    return Err(err(line, "setdest needs a `$ns_ at` time"))
                }
                None => {}
            }
            continue;
        }
        return Err(err(line, format!("unrecognised line `{l}`")));
    }

    let max_node = initial.keys().chain(timed.keys()).max().copied();
    let node_count = match (header_nodes, max_node) {
        (Some(n), Some(m)) if m >= n => {
            return Err(Ns2Error::Invalid(format!(
                "node {m} exceeds declared count {n}"
            )));
        }
        (Some(n), _) => n,
        (None, Some(m)) => m + 1,
        (None, None) => return Err(Ns2Error::Invalid("no nodes in file".into())),
    };
    let dt = opts.sample_interval.unwrap_or(1.0);
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Ns2Error::Invalid("sample interval must be positive".into()));
    }

    for cmds in timed.values_mut() {
        cmds.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let mut starts = Vec::with_capacity(node_count);
    for node in 0..node_count {
        match initial.get(&node) {
            Some((Some(x), Some(y))) => starts.push(Vec2::new(*x, *y)),
            _ => {
                return Err(Ns2Error::Invalid(format!(
                    "node {node} has no initial X_/Y_"
                )))
            }
        }
    }

    // Without an explicit duration, run until the last node stops.
    let duration = match opts.duration {
        Some(d) => d,
        None => {
            let mut end: f64 = 0.0;
            for (node, start) in starts.iter().enumerate() {
                let mut m = Motion {
                    pos: *start,
                    from_time: 0.0,
                    target: *start,
                    speed: 0.0,
                };
                for (t, cmd) in timed.get(&node).map(Vec::as_slice).unwrap_or(&[]) {
                    m = apply(m, *t, *cmd);
                    end = end.max(*t).max(m.end_time());
                }
            }
            (end / dt - 1e-9).ceil().max(0.0) * dt
        }
    };
    let steps = (duration / dt).round() as usize;
    if ((steps as f64) * dt - duration).abs() > 1e-6 {
        return Err(Ns2Error::Invalid(format!(
            "duration {duration} is not a multiple of {dt}"
        )));
    }

    let mut paths: Vec<Vec<Vec2>> = Vec::with_capacity(node_count);
    let mut jumps: Vec<Vec<bool>> = Vec::with_capacity(node_count);
    for (node, start) in starts.iter().enumerate() {
        let cmds = timed.get(&node).map(Vec::as_slice).unwrap_or(&[]);
        let mut m = Motion {
            pos: *start,
            from_time: 0.0,
            target: *start,
            speed: 0.0,
        };
        let mut next = 0;
        let mut path = Vec::with_capacity(steps + 1);
        let mut jumped = vec![false; steps + 1];
        for (k, jump) in jumped.iter_mut().enumerate() {
            let t = k as f64 * dt;
            while next < cmds.len() && cmds[next].0 <= t + 1e-9 {
                let (tc, cmd) = cmds[next];
                *jump |= matches!(cmd, Command::SetX(_) | Command::SetY(_)) && tc > 0.0;
                m = apply(m, tc, cmd);
                next += 1;
            }
            path.push(m.at(t));
        }
        paths.push(path);
        jumps.push(jumped);
    }

    let area = match opts.area {
        Some(a) => a,
        None => {
            let (mut w, mut h) = (1.0f64, 1.0f64);
            for p in paths.iter().flatten() {
                w = w.max(p.x.ceil());
                h = h.max(p.y.ceil());
            }
            SimulationArea::new(w, h).map_err(|e| Ns2Error::Invalid(e.to_string()))?
        }
    };

    let states = paths
        .iter()
        .zip(&jumps)
        .map(|(path, jumped)| {
            let mut out = Vec::with_capacity(path.len());
            let mut heading = 0.0;
            for k in 0..path.len() {
                let (speed, h) = if k + 1 < path.len() {
                    let d = path[k + 1] - path[k];
                    if jumped[k + 1] || d.norm() <= 1e-12 {
                        (0.0, heading)
                    } else {
                        (d.norm() / dt, wrap_angle(d.y.atan2(d.x)))
                    }
                } else {
                    (out.last().map_or(0.0, |s: &NodeState| s.speed), heading)
                };
                heading = h;
                out.push(NodeState::new(path[k], speed, heading));
            }
            out
        })
        .collect();
    MobilityTrace::from_paths(area, dt, states).map_err(|e| Ns2Error::Invalid(e.to_string()))
}

fn apply(m: Motion, t: f64, cmd: Command) -> Motion {
    let here = m.at(t);
    match cmd {
        Command::SetX(x) => {
            let p = Vec2::new(x, here.y);
            Motion {
                pos: p,
                from_time: t,
                target: p,
                speed: 0.0,
            }
        }
        Command::SetY(y) => {
            let p = Vec2::new(here.x, y);
            Motion {
                pos: p,
                from_time: t,
                target: p,
                speed: 0.0,
            }
        }
        Command::Dest { to, speed } => Motion {
            pos: here,
            from_time: t,
            target: to,
            speed,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn area() -> SimulationArea {
        SimulationArea::new(200.0, 200.0).unwrap()
    }

    #[test]
    fn setdest_line_matches_the_format() {
        // offsets from 90.4 keep every difference exact
        let (x0, x1) = (90.4 - 30.0, 90.4 - 15.0);
        let steps = vec![
            vec![NodeState::new(Vec2::new(x0, 50.1), 0.0, 0.0)],
            vec![NodeState::new(Vec2::new(x0, 50.1), 15.0, 0.0)],
            vec![NodeState::new(Vec2::new(x1, 50.1), 15.0, 0.0)],
            vec![NodeState::new(Vec2::new(90.4, 50.1), 0.0, 0.0)],
        ];
        let trace = MobilityTrace::from_steps(area(), 1.0, steps).unwrap();
        let text = export_ns2(&trace);
        assert!(
            text.contains(&format!("$node_(0) set X_ {}\n", fmt_num(x0))),
            "{text}"
        );
        assert!(
            text.contains("$ns_ at 1.0 \"$node_(0) setdest 90.4 50.1 15.0\"\n"),
            "{text}"
        );
        assert_eq!(text.matches("setdest").count(), 1);
    }

    #[test]
    fn static_node_has_only_initial_lines() {
        let s = NodeState::new(Vec2::new(3.0, 4.0), 0.0, 0.0);
        let trace = MobilityTrace::from_steps(area(), 1.0, vec![vec![s]; 5]).unwrap();
        let text = export_ns2(&trace);
        assert!(!text.contains("setdest"));
        assert!(!text.contains("$ns_"));
        let back = parse_ns2(&text, Ns2ParseOptions::default()).unwrap();
        assert_eq!(back.step_count(), 5);
        assert_eq!(back.state(4, 0).position, Vec2::new(3.0, 4.0));
    }

    #[test]
    fn relocation_round_trips() {
        let steps = vec![
            vec![NodeState::new(Vec2::new(190.0, 10.0), 10.0, 0.0)],
            vec![NodeState::new(Vec2::new(5.0, 10.0), 10.0, 0.0)],
            vec![NodeState::new(Vec2::new(15.0, 10.0), 10.0, 0.0)],
        ];
        let trace = MobilityTrace::from_steps(area(), 1.0, steps).unwrap();
        let text = export_ns2(&trace);
        assert!(
            text.contains("$ns_ at 1.0 \"$node_(0) set X_ 5.0\""),
            "{text}"
        );
        let back = parse_ns2(&text, Ns2ParseOptions::default()).unwrap();
        for k in 0..3 {
            assert!(
                back.state(k, 0)
                    .position
                    .distance(trace.state(k, 0).position)
                    < 1e-9
            );
        }
        // the jump is kept out of interpolation
        assert_eq!(back.position_at(0, 0.5).unwrap(), Vec2::new(190.0, 10.0));
    }

    #[test]
    fn foreign_files_parse_with_options() {
        let text = "$node_(1) set X_ 0.0\n$node_(1) set Y_ 0.0\n$node_(0) set X_ 10.0\n$node_(0) set Y_ 10.0\n\
                    $god_ set-dist 0 1 2\n$ns_ at 2.0 \"$node_(1) setdest 30.0 40.0 5.0\"\n";
        let trace = parse_ns2(text, Ns2ParseOptions::default()).unwrap();
        assert_eq!(trace.node_count, 2);
        assert_eq!(trace.duration, 12.0);
        assert!(trace.state(12, 1).position.distance(Vec2::new(30.0, 40.0)) < 1e-12);
        assert!(trace.state(7, 1).position.distance(Vec2::new(15.0, 20.0)) < 1e-12);
        assert!((trace.state(7, 1).speed - 5.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_lines_report_their_number() {
        let text = "$node_(0) set X_ 1.0\n$node_(0) set Y_ 1.0\n$ns_ at 1.0 \"$node_(0) setdest 5.0 oops 1.0\"\n";
        assert_eq!(
            parse_ns2(text, Ns2ParseOptions::default()).unwrap_err(),
            Ns2Error::Line {
                line: 3,
                reason: "bad destination y `oops`".into()
            }
        );
        let text = "$node_(0) set X_ 1.0\nset opt(x) 5\n";
        assert!(matches!(
            parse_ns2(text, Ns2ParseOptions::default()),
            Err(Ns2Error::Line { line: 2, .. })
        ));
    }

    #[test]
    fn number_format_keeps_a_decimal_point() {
        assert_eq!(fmt_num(2.0), "2.0");
        assert_eq!(fmt_num(90.4), "90.4");
        assert_eq!(fmt_num(-3.0), "-3.0");
        assert_eq!(fmt_num(1e-7), "0.0000001");
    }
}
