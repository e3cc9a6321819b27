//! Plain-text and binary artifact formats.
//!
//! Floats are written with 17 significant digits so that every value
//! parses back to the identical `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowMap;
use crate::grid::TimeGrid;
use crate::rough_path::GeometricRoughPath;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_row(out: &mut String, cells: impl IntoIterator<Item = String>) {
    let mut first = true;
    for c in cells {
        if !first {
            out.push(',');
        }
        out.push_str(&c);
        first = false;
    }
    out.push('\n');
}

/// Level-1 table `t,Z_1..Z_K`.
pub fn rough_path_level1_csv(path: &GeometricRoughPath) -> String {
    let k = path.dim();
    let mut out = String::new();
    push_row(
        &mut out,
        std::iter::once("t".to_string()).chain((1..=k).map(|j| format!("Z_{j}"))),
    );
    for (i, &t) in path.grid().times().iter().enumerate() {
        push_row(
            &mut out,
            std::iter::once(fmt_f64(t)).chain(path.value(i).iter().map(|&v| fmt_f64(v))),
        );
    }
    out
}

/// Level-2 table `i,ZZ_11..ZZ_KK`, one row per interval, row-major.
pub fn rough_path_level2_csv(path: &GeometricRoughPath) -> String {
    let k = path.dim();
    let mut out = String::new();
    let header = (1..=k).flat_map(|a| (1..=k).map(move |b| format!("ZZ_{a}{b}")));
    push_row(&mut out, std::iter::once("i".to_string()).chain(header));
    for i in 0..path.intervals() {
        push_row(
            &mut out,
            std::iter::once(i.to_string())
                .chain(path.second_level(i).iter().map(|&v| fmt_f64(v))),
        );
    }
    out
}

fn parse_rows(src: &str, what: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = src.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("{what}: empty input")))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|c| {
                c.trim().parse::<f64>().map_err(|e| {
                    Error::Parse(format!("{what}: row {}: '{}': {e}", n + 1, c.trim()))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(Error::Parse(format!(
                "{what}: row {} has {} cells, header has {}",
                n + 1,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Inverse of the two writers above.
pub fn read_rough_path_csv(level1: &str, level2: &str, alpha: f64) -> Result<GeometricRoughPath> {
    let (h1, r1) = parse_rows(level1, "level-1 table")?;
    let k = h1.len().saturating_sub(1);
    if k == 0 || h1[0] != "t" {
        return Err(Error::Parse("level-1 header must be t,Z_1..Z_K".into()));
    }
    let times: Vec<f64> = r1.iter().map(|r| r[0]).collect();
    let values: Vec<f64> = r1.iter().flat_map(|r| r[1..].iter().copied()).collect();
    let grid = TimeGrid::new(times)?;

    let (h2, r2) = parse_rows(level2, "level-2 table")?;
    if h2.len() != k * k + 1 {
        return Err(Error::Parse(format!(
            "level-2 table has {} columns, expected {}",
            h2.len(),
            k * k + 1
        )));
    }
    if r2.len() != grid.intervals() {
        return Err(Error::Parse(format!(
            "level-2 table has {} rows for {} intervals",
            r2.len(),
            grid.intervals()
        )));
    }
    for (i, r) in r2.iter().enumerate() {
        if r[0] != i as f64 {
            return Err(Error::Parse(format!("level-2 row {i} is labelled {}", r[0])));
        }
    }
    let second = r2.iter().flat_map(|r| r[1..].iter().copied()).collect();
    GeometricRoughPath::from_parts(grid, k, values, second, alpha)
}

/// `particle_id,t,x_1..x_d`, grouped by particle.
pub fn trajectories_csv(flow: &FlowMap) -> String {
    let d = flow.dim;
    let mut out = String::new();
    push_row(
        &mut out,
        ["particle_id".to_string(), "t".to_string()]
            .into_iter()
            .chain((1..=d).map(|j| format!("x_{j}"))),
    );
    for m in 0..flow.particles() {
        for (i, &t) in flow.grid.times().iter().enumerate() {
            push_row(
                &mut out,
                [m.to_string(), fmt_f64(t)]
                    .into_iter()
                    .chain(flow.position(m, i).iter().map(|&v| fmt_f64(v))),
            );
        }
    }
    out
}

/// `t,x,u` for a sequence of 1D states on `nodes`.
pub fn snapshots_1d_csv(times: &[f64], nodes: &[f64], states: &[Vec<f64>]) -> String {
    let mut out = String::from("t,x,u\n");
    for (t, s) in times.iter().zip(states) {
        for (x, u) in nodes.iter().zip(s) {
            push_row(&mut out, [fmt_f64(*t), fmt_f64(*x), fmt_f64(*u)]);
        }
    }
    out
}

/// `t,x,y,omega` for 2D states stored with index `iy*n + ix`.
pub fn snapshots_2d_csv(times: &[f64], n: usize, states: &[Vec<f64>]) -> String {
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let mut out = String::from("t,x,y,omega\n");
    for (t, s) in times.iter().zip(states) {
        for iy in 0..n {
            for ix in 0..n {
                push_row(
                    &mut out,
                    [
                        fmt_f64(*t),
                        fmt_f64(ix as f64 * h),
                        fmt_f64(iy as f64 * h),
                        fmt_f64(s[iy * n + ix]),
                    ],
                );
            }
        }
    }
    out
}

/// Sidecar describing a binary snapshot dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    /// Spatial shape of one snapshot, slowest axis first.
    pub grid: Vec<usize>,
    pub times: Vec<f64>,
    pub driver_seed: Option<u64>,
    pub dtype: String,
    pub byte_order: String,
}

impl DumpHeader {
    pub fn new(grid: Vec<usize>, times: Vec<f64>, driver_seed: Option<u64>) -> Self {
        Self {
            grid,
            times,
            driver_seed,
            dtype: "float64".into(),
            byte_order: "little".into(),
        }
    }

    fn snapshot_len(&self) -> usize {
        self.grid.iter().product()
    }
}

/// Row-major little-endian dump of all snapshots, one after another.
pub fn snapshot_dump(header: &DumpHeader, states: &[Vec<f64>]) -> Result<Vec<u8>> {
    let len = header.snapshot_len();
    if states.len() != header.times.len() {
        return Err(Error::Dimension(format!(
            "{} snapshots for {} times",
            states.len(),
            header.times.len()
        )));
    }
    let mut bytes = Vec::with_capacity(len * states.len() * 8);
    for s in states {
        if s.len() != len {
            return Err(Error::Dimension(format!(
                "snapshot has {} values, grid holds {len}",
                s.len()
            )));
        }
        for v in s {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(bytes)
}

pub fn read_snapshot_dump(header: &DumpHeader, bytes: &[u8]) -> Result<Vec<Vec<f64>>> {
    let len = header.snapshot_len();
    if bytes.len() != len * header.times.len() * 8 {
        return Err(Error::Parse(format!(
            "dump holds {} bytes, header implies {}",
            bytes.len(),
            len * header.times.len() * 8
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(values.chunks(len.max(1)).map(|c| c.to_vec()).collect())
}
