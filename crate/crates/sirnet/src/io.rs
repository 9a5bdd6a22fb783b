//! Text formats: edge lists, trajectory CSV, infection-time CSV.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sirnet_core::graph::GraphError;
use sirnet_core::sir::SirError;
use sirnet_core::{Graph, Stamp, Trajectory};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("edge list lists some edges in both directions and others in one")]
    Asymmetric,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sir(#[from] SirError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn parse_error(line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_to_string(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })
}

/// Parses `u v` lines with 0-based ids; `#` starts a comment. The vertex
/// count is one more than the largest id. Each undirected edge is listed
/// either once or once per direction, consistently for the whole file.
pub fn parse_edge_list(text: &str) -> Result<Graph, IoError> {
    let mut arcs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let ids: Vec<&str> = line.split_whitespace().collect();
        if ids.len() != 2 {
            return Err(parse_error(i + 1, format!("expected two ids, got {:?}", line)));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| parse_error(i + 1, format!("bad vertex id {s:?}")))
        };
        arcs.push((parse(ids[0])?, parse(ids[1])?));
    }
    let n = arcs.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);

    let set: BTreeSet<(usize, usize)> = arcs.iter().copied().collect();
    let mirrored = arcs.iter().filter(|&&(u, v)| u != v && set.contains(&(v, u))).count();
    let edges: Vec<(usize, usize)> = if mirrored == 0 {
        arcs
    } else if mirrored == arcs.len() && set.len() == arcs.len() {
        arcs.into_iter().filter(|&(u, v)| u < v).collect()
    } else if mirrored == arcs.len() {
        // Repeated arcs: let the graph constructor name the duplicate.
        arcs
    } else {
        return Err(IoError::Asymmetric);
    };
    Ok(Graph::from_edges(n, edges)?)
}

pub fn load_edge_list(path: &Path) -> Result<Graph, IoError> {
    parse_edge_list(&read_to_string(path)?)
}

pub fn write_edge_list(g: &Graph) -> String {
    let mut out = String::new();
    for (u, v) in g.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

/// 17 significant digits, `inf` for never, `na` for unresolved.
pub fn format_stamp(stamp: Stamp) -> String {
    match stamp {
        Stamp::At(t) => format!("{t:.16e}"),
        Stamp::Never => "inf".to_string(),
        Stamp::Unresolved => "na".to_string(),
    }
}

pub fn parse_stamp(field: &str) -> Option<Stamp> {
    match field.trim() {
        "inf" | "Inf" | "INF" => Some(Stamp::Never),
        "na" | "NA" => Some(Stamp::Unresolved),
        s => s.parse::<f64>().ok().filter(|t| t.is_finite() && *t >= 0.0).map(Stamp::At),
    }
}

/// `vertex,infection_time,recovery_time`, one row per vertex.
pub fn write_trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("vertex,infection_time,recovery_time\n");
    for v in 0..traj.num_vertices() {
        let _ = writeln!(
            out,
            "{v},{},{}",
            format_stamp(traj.infection_time(v)),
            format_stamp(traj.recovery_time(v))
        );
    }
    out
}

/// Reads `vertex,infection_time[,recovery_time]` rows covering each vertex
/// `0..n` exactly once. Returns infection and recovery stamps in vertex order;
/// recovery is `Unresolved` when the column is absent.
pub fn parse_times_csv(text: &str) -> Result<(Vec<Stamp>, Vec<Stamp>), IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < 2 || names[0] != "vertex" || names[1] != "infection_time" {
        return Err(parse_error(1, "header must start with vertex,infection_time"));
    }
    let with_recovery = names.get(2) == Some(&"recovery_time");

    let mut rows: Vec<(usize, Stamp, Stamp)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i + 2, |p| p.line() as usize);
        let vertex = record[0]
            .parse::<usize>()
            .map_err(|_| parse_error(line, format!("bad vertex id {:?}", &record[0])))?;
        let stamp = |field: &str| parse_stamp(field).ok_or_else(|| parse_error(line, format!("bad time {field:?}")));
        let infection = stamp(&record[1])?;
        let recovery = if with_recovery { stamp(&record[2])? } else { Stamp::Unresolved };
        rows.push((vertex, infection, recovery));
    }
    rows.sort_by_key(|r| r.0);
    for (expected, row) in rows.iter().enumerate() {
        if row.0 != expected {
            return Err(parse_error(0, format!("vertex ids must be 0..{} with no gaps or repeats", rows.len())));
        }
    }
    Ok(rows.into_iter().map(|(_, i, r)| (i, r)).unzip())
}

/// Horizon implied by a times file: unbounded when every stamp is resolved,
/// otherwise the latest recorded time.
pub fn implied_horizon(infection: &[Stamp], recovery: &[Stamp]) -> f64 {
    let all = infection.iter().chain(recovery);
    if infection.iter().all(|s| *s != Stamp::Unresolved) && recovery.iter().all(|s| *s != Stamp::Unresolved) {
        return f64::INFINITY;
    }
    all.filter_map(|s| s.time()).fold(0.0, f64::max)
}

/// Full trajectory from a file written by [`write_trajectory_csv`].
pub fn parse_trajectory_csv(text: &str) -> Result<Trajectory, IoError> {
    let (infection, recovery) = parse_times_csv(text)?;
    let horizon = implied_horizon(&infection, &recovery);
    let observed = Trajectory::from_infection_times(infection.clone(), horizon)?;
    Ok(Trajectory::from_parts(infection, recovery, horizon, observed.patient_zero())?)
}

/// Observed infection times only; patient zero is the unique earliest one.
pub fn parse_infection_times(text: &str, horizon: Option<f64>) -> Result<Trajectory, IoError> {
    let (infection, _) = parse_times_csv(text)?;
    let horizon = horizon.unwrap_or_else(|| implied_horizon(&infection, &[]));
    Ok(Trajectory::from_infection_times(infection, horizon)?)
}
