//! Text artifacts. Every file opens with a `# darepc <kind> v1` line and the
//! config hash and seed; tables are comma-separated with one header row.

use std::fmt::Write as _;

use anyhow::{anyhow, bail, ensure, Context, Result};
use darepc_core::contract::{Calibration, FeatureMap, LinearModel, PerceptionContract};
use darepc_core::env_grid::{CellStatus, EnvGrid};
use darepc_core::geometry::HyperRect;
use darepc_core::reach::ReachTube;
use darepc_core::system::{Requirement, Trajectory};

pub const CONTRACT_MAGIC: &str = "# darepc contract v1";

/// Provenance stamped on every artifact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stamp {
    pub config_hash: String,
    pub seed: u64,
}

impl Stamp {
    pub fn header(&self, kind: &str) -> String {
        format!("# darepc {kind} v1\n# config_hash {}\n# seed {}\n", self.config_hash, self.seed)
    }
}

/// Shortest text that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn join(xs: impl IntoIterator<Item = f64>, sep: &str) -> String {
    xs.into_iter().map(num).collect::<Vec<_>>().join(sep)
}

fn bounds_cols(prefix: &str, n: usize) -> String {
    (0..n).map(|i| format!("{prefix}lo_{i},{prefix}hi_{i}")).collect::<Vec<_>>().join(",")
}

fn bounds_row(r: &HyperRect) -> String {
    join(r.intervals().iter().flat_map(|i| [i.lo(), i.hi()]), ",")
}

pub fn write_contract(c: &PerceptionContract, stamp: &Stamp) -> String {
    let mut s = String::new();
    s.push_str(CONTRACT_MAGIC);
    s.push('\n');
    let _ = write!(s, "# config_hash {}\n# seed {}\n", stamp.config_hash, stamp.seed);
    let _ = writeln!(s, "feature_map {}", c.feature_map.id());
    let _ = writeln!(s, "state_dim {}", c.state_dim());
    let _ = writeln!(s, "obs_dim {}", c.obs_dim());
    for iv in c.domain.intervals() {
        let _ = writeln!(s, "domain {} {}", num(iv.lo()), num(iv.hi()));
    }
    for (tag, models) in [("center", &c.center), ("radius", &c.radius)] {
        for m in models {
            let _ = writeln!(s, "{tag} {} {}", num(m.intercept), join(m.coeffs.iter().copied(), " "));
        }
    }
    let k = &c.calibration;
    let _ = writeln!(s, "pr {}", num(k.pr));
    let _ = writeln!(s, "epsilon {}", num(k.epsilon));
    let _ = writeln!(s, "delta {}", num(k.delta));
    let _ = writeln!(s, "n_samples {}", k.n_samples);
    let _ = writeln!(s, "quantile {}", num(k.quantile));
    let _ = writeln!(s, "empirical_conformance {}", num(k.empirical_conformance));
    let _ = writeln!(s, "per_dim_coverage {}", join(k.per_dim_coverage.iter().copied(), " "));
    let _ = writeln!(s, "clamp_count {}", k.clamp_count);
    s
}

fn floats(words: &[&str], line: usize) -> Result<Vec<f64>> {
    words.iter().map(|w| w.parse::<f64>().map_err(|e| anyhow!("line {line}: {w:?}: {e}"))).collect()
}

/// Inverse of [`write_contract`]; the stamp lines are returned unchecked.
pub fn read_contract(text: &str) -> Result<(PerceptionContract, Option<Stamp>)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l == CONTRACT_MAGIC => {}
        Some((_, l)) if l.starts_with("# darepc contract") => bail!("unsupported contract version: {l}"),
        _ => bail!("not a contract file"),
    }
    let (mut hash, mut seed) = (None, None);
    let (mut fm, mut n, mut m) = (None, None, None);
    let (mut domain, mut center, mut radius) = (Vec::new(), Vec::new(), Vec::new());
    let mut cal = Calibration {
        pr: f64::NAN,
        epsilon: f64::NAN,
        delta: f64::NAN,
        n_samples: 0,
        quantile: f64::NAN,
        empirical_conformance: f64::NAN,
        per_dim_coverage: Vec::new(),
        clamp_count: 0,
    };
    for (i, line) in lines {
        let ln = i + 1;
        let words: Vec<&str> = line.split_whitespace().collect();
        let Some((&key, rest)) = words.split_first() else { continue };
        let one = || -> Result<&str> {
            ensure!(rest.len() == 1, "line {ln}: {key} takes one value");
            Ok(rest[0])
        };
        let f1 = || -> Result<f64> { Ok(floats(&[one()?], ln)?[0]) };
        let u1 = || -> Result<usize> { one()?.parse().with_context(|| format!("line {ln}")) };
        match key {
            "#" => match rest {
                ["config_hash", h] => hash = Some(h.to_string()),
                ["seed", s] => seed = Some(s.parse::<u64>().with_context(|| format!("line {ln}"))?),
                _ => {}
            },
            "feature_map" => fm = Some(FeatureMap::from_id(one()?).ok_or_else(|| anyhow!("line {ln}: unknown feature map"))?),
            "state_dim" => n = Some(u1()?),
            "obs_dim" => m = Some(u1()?),
            "domain" => {
                let v = floats(rest, ln)?;
                ensure!(v.len() == 2, "line {ln}: domain takes lo and hi");
                domain.push((v[0], v[1]));
            }
            "center" | "radius" => {
                let v = floats(rest, ln)?;
                ensure!(!v.is_empty(), "line {ln}: {key} needs an intercept");
                let model = LinearModel { intercept: v[0], coeffs: v[1..].to_vec() };
                if key == "center" { center.push(model) } else { radius.push(model) }
            }
            "pr" => cal.pr = f1()?,
            "epsilon" => cal.epsilon = f1()?,
            "delta" => cal.delta = f1()?,
            "n_samples" => cal.n_samples = u1()?,
            "quantile" => cal.quantile = f1()?,
            "empirical_conformance" => cal.empirical_conformance = f1()?,
            "per_dim_coverage" => cal.per_dim_coverage = floats(rest, ln)?,
            "clamp_count" => cal.clamp_count = u1()?,
            other => bail!("line {ln}: unknown key {other:?}"),
        }
    }
    let fm = fm.ok_or_else(|| anyhow!("missing feature_map"))?;
    let n = n.ok_or_else(|| anyhow!("missing state_dim"))?;
    let m = m.ok_or_else(|| anyhow!("missing obs_dim"))?;
    ensure!(domain.len() == n, "expected {n} domain lines, found {}", domain.len());
    ensure!(center.len() == m && radius.len() == m, "expected {m} center and radius lines");
    for model in center.iter().chain(&radius) {
        ensure!(model.coeffs.len() == fm.len(n), "model has {} coefficients, expected {}", model.coeffs.len(), fm.len(n));
    }
    let domain = HyperRect::from_bounds(&domain)?;
    let stamp = match (hash, seed) {
        (Some(config_hash), Some(seed)) => Some(Stamp { config_hash, seed }),
        _ => None,
    };
    Ok((PerceptionContract { feature_map: fm, domain, center, radius, calibration: cal }, stamp))
}

/// One row per step: `t`, then lo/hi per state dimension.
pub fn write_tube(tube: &ReachTube, stamp: &Stamp) -> String {
    let mut s = stamp.header("tube");
    let n = tube.steps.first().map_or(0, |b| b.dim());
    let _ = writeln!(s, "t,{}", bounds_cols("", n));
    for (t, b) in tube.steps.iter().enumerate() {
        let _ = writeln!(s, "{t},{}", bounds_row(b));
    }
    s
}

/// Cell table: bounds, status and last measured conformance.
pub fn write_grid(grid: &EnvGrid, stamp: &Stamp) -> String {
    let mut s = stamp.header("grid");
    let _ = writeln!(s, "cell,status,conformance,samples_seen,{}", bounds_cols("", grid.dim()));
    for (i, c) in grid.cells().iter().enumerate() {
        let status = match c.status {
            CellStatus::Active => "active",
            CellStatus::Removed => "removed",
        };
        let conf = c.conformance.map(num).unwrap_or_default();
        let _ = writeln!(s, "{i},{status},{conf},{},{}", c.samples_seen, bounds_row(&grid.cell_bounds(i)));
    }
    s
}

/// One row per step with state, the observation consumed at that step
/// (empty on the last row) and whether the state satisfies the requirement.
pub fn write_trajectory(traj: &Trajectory, req: &Requirement, stamp: &Stamp) -> String {
    let mut s = stamp.header("trajectory");
    let n = traj.states.first().map_or(0, Vec::len);
    let m = traj.observations.first().map_or(0, Vec::len);
    let xs: Vec<String> = (0..n).map(|i| format!("x_{i}")).collect();
    let ys: Vec<String> = (0..m).map(|i| format!("y_{i}")).collect();
    let _ = writeln!(s, "# env {}", join(traj.env.iter().copied(), " "));
    let _ = writeln!(s, "t,{},{},satisfied", xs.join(","), ys.join(","));
    for (t, x) in traj.states.iter().enumerate() {
        let y = traj.observations.get(t).map(|y| join(y.iter().copied(), ",")).unwrap_or_else(|| ",".repeat(m.saturating_sub(1)));
        let ok = t <= req.horizon() && req.satisfied_by(x, t);
        let _ = writeln!(s, "{t},{},{y},{ok}", join(x.iter().copied(), ","));
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub cell: usize,
    pub bounds: HyperRect,
    pub runs: usize,
    pub violated: usize,
}

pub fn write_sweep(rows: &[SweepRow], stamp: &Stamp) -> String {
    let mut s = stamp.header("sweep");
    let n = rows.first().map_or(0, |r| r.bounds.dim());
    let _ = writeln!(s, "cell,{},runs,violated,violation_rate", bounds_cols("", n));
    for r in rows {
        let rate = if r.runs == 0 { 0.0 } else { r.violated as f64 / r.runs as f64 };
        let _ = writeln!(s, "{},{},{},{},{}", r.cell, bounds_row(&r.bounds), r.runs, r.violated, num(rate));
    }
    s
}

/// A serializable report as TOML under the stamp header.
pub fn write_report<T: serde::Serialize>(kind: &str, report: &T, stamp: &Stamp) -> Result<String> {
    let body = toml::to_string(report).context("serializing report")?;
    Ok(format!("{}{body}", stamp.header(kind)))
}

/// One JSON object per line, after a stamp object.
pub fn write_jsonl<T: serde::Serialize>(items: &[T], stamp: &Stamp) -> Result<String> {
    let mut s = serde_json::to_string(&serde_json::json!({ "config_hash": stamp.config_hash, "seed": stamp.seed }))?;
    s.push('\n');
    for it in items {
        s.push_str(&serde_json::to_string(it)?);
        s.push('\n');
    }
    Ok(s)
}

pub fn rect_pairs(r: &HyperRect) -> Vec<[f64; 2]> {
    r.intervals().iter().map(|i| [i.lo(), i.hi()]).collect()
}
