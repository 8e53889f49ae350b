//! Navigation metrics computed against ground-truth geodesics: SR, OSR, SPL,
//! NE, oracle error, PL, nDTW, SDTW and CLS, plus matched-path statistics.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envgraph::{EnvGraph, GeoTable, NodeIdx};
use crate::error::{Error, Result};
use crate::feedback::FeedbackSample;

/// Success radius in meters.
pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 3.0;

pub const RESULTS_HEADER: &str = "env,split,style,episodes,SR,OSR,SPL,NE,OE,PL,nDTW,SDTW,CLS";

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub sr: f64,
    pub osr: f64,
    pub spl: f64,
    pub ne: f64,
    pub oe: f64,
    pub pl: f64,
    pub ndtw: f64,
    pub sdtw: f64,
    pub cls: f64,
}

/// Dynamic time warping cost between two node sequences with geodesic local
/// cost; both endpoints are matched.
pub fn dtw(query: &[NodeIdx], reference: &[NodeIdx], geo: &GeoTable) -> f64 {
    let (n, m) = (query.len(), reference.len());
    if n == 0 || m == 0 {
        return f64::INFINITY;
    }
    let mut prev = vec![f64::INFINITY; m];
    let mut cur = vec![f64::INFINITY; m];
    for (i, &q) in query.iter().enumerate() {
        for j in 0..m {
            let cost = geo.dist(q, reference[j]);
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let up = if i > 0 { prev[j] } else { f64::INFINITY };
                let left = if j > 0 { cur[j - 1] } else { f64::INFINITY };
                let diag = if i > 0 && j > 0 { prev[j - 1] } else { f64::INFINITY };
                up.min(left).min(diag)
            };
            cur[j] = cost + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}

pub fn ndtw(query: &[NodeIdx], reference: &[NodeIdx], geo: &GeoTable, d_th: f64) -> f64 {
    (-dtw(query, reference, geo) / (reference.len() as f64 * d_th)).exp()
}

fn path_length(env: &EnvGraph, geo: &GeoTable, path: &[NodeIdx]) -> f64 {
    path.windows(2)
        .map(|w| env.edge_weight(w[0], w[1]).unwrap_or_else(|| geo.dist(w[0], w[1])))
        .sum()
}

/// Coverage weighted by length score.
pub fn cls(env: &EnvGraph, geo: &GeoTable, trajectory: &[NodeIdx], reference: &[NodeIdx], d_th: f64) -> f64 {
    let pc = reference
        .iter()
        .map(|&r| {
            let nearest = trajectory.iter().map(|&p| geo.dist(r, p)).fold(f64::INFINITY, f64::min);
            (-nearest / d_th).exp()
        })
        .sum::<f64>()
        / reference.len() as f64;
    let pl = path_length(env, geo, trajectory);
    let epl = pc * path_length(env, geo, reference);
    if epl == 0.0 && pl == 0.0 {
        return pc;
    }
    let ls = epl / (epl + (epl - pl).abs());
    pc * ls
}

pub fn episode_metrics(
    env: &EnvGraph,
    geo: &GeoTable,
    trajectory: &[NodeIdx],
    gt_path: &[NodeIdx],
    goal: NodeIdx,
    d_th: f64,
) -> Result<EpisodeMetrics> {
    let (Some(&first), Some(&last)) = (trajectory.first(), trajectory.last()) else {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    };
    if gt_path.is_empty() {
        return Err(Error::InvalidArgument("empty reference path".into()));
    }
    let ne = geo.dist(last, goal);
    let sr = if ne <= d_th { 1.0 } else { 0.0 };
    let oe = trajectory
        .iter()
        .map(|&v| geo.dist(v, goal))
        .fold(f64::INFINITY, f64::min);
    let osr = if oe <= d_th { 1.0 } else { 0.0 };
    let pl = path_length(env, geo, trajectory);
    let shortest = geo.dist(first, goal);
    // A shortest path summed in the other direction can differ from the
    // table entry in the last bits; treat that as equal length.
    let executed = if (pl - shortest).abs() <= 1e-12 * shortest {
        shortest
    } else {
        pl
    };
    let spl = if shortest == 0.0 {
        sr
    } else {
        sr * shortest / shortest.max(executed)
    };
    let ndtw = ndtw(trajectory, gt_path, geo, d_th);
    Ok(EpisodeMetrics {
        sr,
        osr,
        spl,
        ne,
        oe,
        pl,
        ndtw,
        sdtw: sr * ndtw,
        cls: cls(env, geo, trajectory, gt_path, d_th),
    })
}

/// Per-episode rows plus their means.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<EpisodeMetrics>,
}

impl MetricsReport {
    pub fn push(&mut self, m: EpisodeMetrics) {
        self.rows.push(m);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn mean(&self) -> EpisodeMetrics {
        let n = self.rows.len().max(1) as f64;
        let mut acc = EpisodeMetrics::default();
        for r in &self.rows {
            acc.sr += r.sr;
            acc.osr += r.osr;
            acc.spl += r.spl;
            acc.ne += r.ne;
            acc.oe += r.oe;
            acc.pl += r.pl;
            acc.ndtw += r.ndtw;
            acc.sdtw += r.sdtw;
            acc.cls += r.cls;
        }
        EpisodeMetrics {
            sr: acc.sr / n,
            osr: acc.osr / n,
            spl: acc.spl / n,
            ne: acc.ne / n,
            oe: acc.oe / n,
            pl: acc.pl / n,
            ndtw: acc.ndtw / n,
            sdtw: acc.sdtw / n,
            cls: acc.cls / n,
        }
    }

    /// Mean success rate in percent.
    pub fn sr_percent(&self) -> f64 {
        self.mean().sr * 100.0
    }
}

/// One line of a results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub env: String,
    pub split: String,
    pub style: String,
    pub episodes: usize,
    pub mean: EpisodeMetrics,
}

impl ResultRow {
    pub fn new(env: &str, split: &str, style: &str, report: &MetricsReport) -> Self {
        ResultRow {
            env: env.to_string(),
            split: split.to_string(),
            style: style.to_string(),
            episodes: report.len(),
            mean: report.mean(),
        }
    }

    /// Rates ×100 and distances in meters, both with two decimals.
    pub fn to_csv_line(&self) -> String {
        let m = &self.mean;
        format!(
            "{},{},{},{},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2}",
            self.env,
            self.split,
            self.style,
            self.episodes,
            m.sr * 100.0,
            m.osr * 100.0,
            m.spl * 100.0,
            m.ne,
            m.oe,
            m.pl,
            m.ndtw * 100.0,
            m.sdtw * 100.0,
            m.cls * 100.0
        )
    }
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.to_csv_line());
    }
    out
}

pub fn write_results_csv(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, results_csv(rows)).map_err(|e| Error::io(path, e))
}

/// A results-CSV line read back: identifying columns plus the nine
/// reported values in file units.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRow {
    pub env: String,
    pub split: String,
    pub style: String,
    pub episodes: usize,
    pub values: [f64; 9],
}

pub fn parse_results_csv(text: &str) -> Result<Vec<ParsedRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == RESULTS_HEADER => {}
        other => return Err(Error::Parse(format!("unexpected results header {other:?}"))),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 13 {
                return Err(Error::Parse(format!("expected 13 columns: {line}")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}")));
            let mut values = [0.0; 9];
            for (k, v) in values.iter_mut().enumerate() {
                *v = num(cols[4 + k])?;
            }
            Ok(ParsedRow {
                env: cols[0].to_string(),
                split: cols[1].to_string(),
                style: cols[2].to_string(),
                episodes: cols[3].parse().map_err(|e| Error::Parse(format!("{}: {e}", cols[3])))?,
                values,
            })
        })
        .collect()
}

/// Share of samples whose corrected path equals the ground-truth route.
pub fn matched_path_rate(env: &EnvGraph, samples: &[FeedbackSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let matched = samples
        .iter()
        .filter(|s| env.ids_of(&s.tau_plus) == s.instruction.gt_path)
        .count();
    matched as f64 / samples.len() as f64
}
