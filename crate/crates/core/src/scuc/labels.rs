//! Per-scenario SCUC labels and the label CSV.
//!
//! ```text
//! # gridrisk-labels v1
//! # horizon=12 zones=1,2,3 units=1,2,3 buses=1,2,3,4,5,6 branches=1,...,11
//! # config=<hash>                                  (optional)
//! scenario,status,objective,bound,nodes,clamped,u_g1_t1,...,p_g1_t1,...,
//!   gen_z1_t1,...,shed_z1_t1,...,rshed_z1_t1,...,nshed_z1_t1,...,
//!   inj_b1_t1,...,flow_q1_t1,...,message
//! ```
//!
//! Blocks are ordered unit/zone/bus/branch-major, then by step. `shed` is
//! total zonal shed, `rshed` the reserve-related part and `nshed` the
//! non-reserve part. Failed scenarios carry status `failed`, zeros in every
//! numeric block and the error text in `message`. Solve wall times go to a
//! separate `<name>.timing.csv` so the label file itself is reproducible.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::{cause_aware_shedding, extract_qois, problem_for_scenario, ScucConfig, SolveStatus};
use crate::error::{Error, Result};
use crate::grid::{PowerGrid, PtdfMatrix};
use crate::scenario::ScenarioSet;

const MAGIC: &str = "# gridrisk-labels v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelStatus {
    Optimal,
    GapLimited,
    Failed,
}

impl LabelStatus {
    fn as_str(self) -> &'static str {
        match self {
            LabelStatus::Optimal => "optimal",
            LabelStatus::GapLimited => "gap-limited",
            LabelStatus::Failed => "failed",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "optimal" => Some(LabelStatus::Optimal),
            "gap-limited" => Some(LabelStatus::GapLimited),
            "failed" => Some(LabelStatus::Failed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelRecord {
    pub scenario: usize,
    pub status: LabelStatus,
    pub objective: f64,
    pub bound: f64,
    pub nodes: usize,
    pub clamped: usize,
    /// `[g][t]`
    pub uc: Vec<Vec<bool>>,
    /// `[g][t]` MW
    pub dispatch: Vec<Vec<f64>>,
    /// `[z][t]` MW
    pub thermal_zone: Vec<Vec<f64>>,
    pub shed_zone: Vec<Vec<f64>>,
    pub reserve_shed_zone: Vec<Vec<f64>>,
    pub nonreserve_shed_zone: Vec<Vec<f64>>,
    /// `[t][b]` MW
    pub injections: Vec<Vec<f64>>,
    /// `[t][q]` MW
    pub flows: Vec<Vec<f64>>,
    pub message: String,
}

/// Shape of the label arrays, taken from the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelLayout {
    pub horizon: usize,
    pub zones: Vec<usize>,
    pub units: Vec<usize>,
    pub buses: Vec<usize>,
    pub branches: Vec<usize>,
}

impl LabelLayout {
    pub fn for_grid(grid: &PowerGrid, horizon: usize) -> Self {
        Self {
            horizon,
            zones: grid.zones.iter().map(|z| z.id).collect(),
            units: grid.thermal_units().iter().map(|&g| grid.generators[g].id).collect(),
            buses: grid.buses.iter().map(|b| b.id).collect(),
            branches: grid.branches.iter().map(|b| b.id).collect(),
        }
    }

    fn columns(&self) -> usize {
        let t = self.horizon;
        6 + 2 * self.units.len() * t + 4 * self.zones.len() * t + (self.buses.len() + self.branches.len()) * t + 1
    }

    fn meta_line(&self) -> String {
        let j = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        format!(
            "# horizon={} zones={} units={} buses={} branches={}",
            self.horizon,
            j(&self.zones),
            j(&self.units),
            j(&self.buses),
            j(&self.branches)
        )
    }

    fn header(&self) -> String {
        let mut h: Vec<String> =
            ["scenario", "status", "objective", "bound", "nodes", "clamped"].iter().map(|s| s.to_string()).collect();
        let t = self.horizon;
        for (prefix, ids, tag) in [("u", &self.units, "g"), ("p", &self.units, "g")] {
            for id in ids {
                h.extend((1..=t).map(|k| format!("{prefix}_{tag}{id}_t{k}")));
            }
        }
        for prefix in ["gen", "shed", "rshed", "nshed"] {
            for id in &self.zones {
                h.extend((1..=t).map(|k| format!("{prefix}_z{id}_t{k}")));
            }
        }
        for id in &self.buses {
            h.extend((1..=t).map(|k| format!("inj_b{id}_t{k}")));
        }
        for id in &self.branches {
            h.extend((1..=t).map(|k| format!("flow_q{id}_t{k}")));
        }
        h.push("message".into());
        h.join(",")
    }

    fn failed(&self, scenario: usize, message: String) -> LabelRecord {
        let (t, g, z) = (self.horizon, self.units.len(), self.zones.len());
        LabelRecord {
            scenario,
            status: LabelStatus::Failed,
            objective: 0.0,
            bound: 0.0,
            nodes: 0,
            clamped: 0,
            uc: vec![vec![false; t]; g],
            dispatch: vec![vec![0.0; t]; g],
            thermal_zone: vec![vec![0.0; t]; z],
            shed_zone: vec![vec![0.0; t]; z],
            reserve_shed_zone: vec![vec![0.0; t]; z],
            nonreserve_shed_zone: vec![vec![0.0; t]; z],
            injections: vec![vec![0.0; self.buses.len()]; t],
            flows: vec![vec![0.0; self.branches.len()]; t],
            message,
        }
    }

    fn format_record(&self, r: &LabelRecord) -> String {
        let mut s = format!(
            "{},{},{},{},{},{}",
            r.scenario,
            r.status.as_str(),
            r.objective,
            r.bound,
            r.nodes,
            r.clamped
        );
        for row in &r.uc {
            for &b in row {
                s.push_str(if b { ",1" } else { ",0" });
            }
        }
        let mut push = |m: &Vec<Vec<f64>>| {
            for row in m {
                for v in row {
                    s.push(',');
                    s.push_str(&v.to_string());
                }
            }
        };
        push(&r.dispatch);
        push(&r.thermal_zone);
        push(&r.shed_zone);
        push(&r.reserve_shed_zone);
        push(&r.nonreserve_shed_zone);
        // Injections and flows are stored bus/branch-major.
        let transpose = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            let cols = m.first().map_or(0, |r| r.len());
            (0..cols).map(|c| m.iter().map(|r| r[c]).collect()).collect()
        };
        push(&transpose(&r.injections));
        push(&transpose(&r.flows));
        s.push(',');
        s.push_str(&r.message.replace([',', '\n', '\r'], " "));
        s
    }

    fn parse_record(&self, line: &str) -> Option<LabelRecord> {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != self.columns() {
            return None;
        }
        let t = self.horizon;
        let mut it = cols.iter();
        let scenario = it.next()?.parse().ok()?;
        let status = LabelStatus::parse(it.next()?)?;
        let objective = it.next()?.parse().ok()?;
        let bound = it.next()?.parse().ok()?;
        let nodes = it.next()?.parse().ok()?;
        let clamped = it.next()?.parse().ok()?;
        let mut block = |rows: usize| -> Option<Vec<Vec<f64>>> {
            (0..rows).map(|_| (0..t).map(|_| it.next()?.parse().ok()).collect()).collect()
        };
        let uc_f = block(self.units.len())?;
        let dispatch = block(self.units.len())?;
        let thermal_zone = block(self.zones.len())?;
        let shed_zone = block(self.zones.len())?;
        let reserve_shed_zone = block(self.zones.len())?;
        let nonreserve_shed_zone = block(self.zones.len())?;
        let inj_t = block(self.buses.len())?;
        let flow_t = block(self.branches.len())?;
        let message = it.next()?.to_string();
        let transpose = |m: Vec<Vec<f64>>, cols: usize| -> Vec<Vec<f64>> {
            (0..t).map(|k| (0..cols).map(|c| m[c][k]).collect()).collect()
        };
        Some(LabelRecord {
            scenario,
            status,
            objective,
            bound,
            nodes,
            clamped,
            uc: uc_f.iter().map(|r| r.iter().map(|&v| v > 0.5).collect()).collect(),
            dispatch,
            thermal_zone,
            shed_zone,
            reserve_shed_zone,
            nonreserve_shed_zone,
            injections: transpose(inj_t, self.buses.len()),
            flows: transpose(flow_t, self.branches.len()),
            message,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    pub layout: LabelLayout,
    pub records: Vec<LabelRecord>,
    pub config_hash: Option<String>,
}

impl LabelSet {
    pub fn horizon(&self) -> usize {
        self.layout.horizon
    }

    pub fn thermal_system(&self, i: usize, t: usize) -> f64 {
        self.records[i].thermal_zone.iter().map(|r| r[t]).sum()
    }

    pub fn shed_system(&self, i: usize, t: usize) -> f64 {
        self.records[i].shed_zone.iter().map(|r| r[t]).sum()
    }

    pub fn check_grid(&self, grid: &PowerGrid) -> Result<()> {
        let want = LabelLayout::for_grid(grid, self.layout.horizon);
        if want != self.layout {
            return Err(Error::ConfigMismatch("label layout does not match grid".into()));
        }
        Ok(())
    }
}

pub fn write_labels_csv(set: &LabelSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    write_preamble(&mut w, &set.layout, set.config_hash.as_deref()).map_err(io)?;
    for r in &set.records {
        writeln!(w, "{}", set.layout.format_record(r)).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn write_preamble(w: &mut impl Write, layout: &LabelLayout, hash: Option<&str>) -> std::io::Result<()> {
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "{}", layout.meta_line())?;
    if let Some(h) = hash {
        writeln!(w, "# config={h}")?;
    }
    writeln!(w, "{}", layout.header())
}

fn parse_ids(s: &str) -> Option<Vec<usize>> {
    if s.is_empty() {
        return Some(vec![]);
    }
    s.split(',').map(|x| x.parse().ok()).collect()
}

/// Reads a label file. Complete records are returned along with the byte
/// length they occupy; a trailing partial line is ignored.
fn read_labels_prefix(path: &Path) -> Result<(LabelSet, u64)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let bad = |d: String| Error::format("label file", d);
    let mut line = String::new();
    let mut offset = 0u64;
    let next = |reader: &mut BufReader<File>, line: &mut String| -> Result<Option<bool>> {
        line.clear();
        let n = reader.read_line(line).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            return Ok(None);
        }
        Ok(Some(line.ends_with('\n')))
    };

    let complete = |c: Option<bool>| c == Some(true);
    if !complete(next(&mut reader, &mut line)?) || line.trim_end() != MAGIC {
        return Err(bad("missing header line".into()));
    }
    offset += line.len() as u64;
    if !complete(next(&mut reader, &mut line)?) {
        return Err(bad("missing layout line".into()));
    }
    offset += line.len() as u64;
    let mut layout = LabelLayout { horizon: 0, zones: vec![], units: vec![], buses: vec![], branches: vec![] };
    for kv in line.trim_start_matches('#').split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("layout entry `{kv}`")))?;
        let ids = || parse_ids(v).ok_or_else(|| bad(format!("layout entry `{kv}`")));
        match k {
            "horizon" => layout.horizon = v.parse().map_err(|_| bad(format!("horizon `{v}`")))?,
            "zones" => layout.zones = ids()?,
            "units" => layout.units = ids()?,
            "buses" => layout.buses = ids()?,
            "branches" => layout.branches = ids()?,
            _ => return Err(bad(format!("unknown layout key `{k}`"))),
        }
    }
    let mut config_hash = None;
    if !complete(next(&mut reader, &mut line)?) {
        return Err(bad("missing column header".into()));
    }
    offset += line.len() as u64;
    if let Some(h) = line.trim_end().strip_prefix("# config=") {
        config_hash = Some(h.to_string());
        if !complete(next(&mut reader, &mut line)?) {
            return Err(bad("missing column header".into()));
        }
        offset += line.len() as u64;
    }
    if line.trim_end() != layout.header() {
        return Err(bad("column header does not match layout".into()));
    }
    let mut records = Vec::new();
    while let Some(done) = next(&mut reader, &mut line)? {
        if !done {
            break;
        }
        match layout.parse_record(line.trim_end()) {
            Some(r) if r.scenario == records.len() => records.push(r),
            _ => break,
        }
        offset += line.len() as u64;
    }
    Ok((LabelSet { layout, records, config_hash }, offset))
}

pub fn read_labels_csv(path: &Path) -> Result<LabelSet> {
    read_labels_prefix(path).map(|(s, _)| s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelOptions {
    /// Worker threads; results do not depend on this.
    pub workers: usize,
    /// Scenarios solved between two appends to the label file.
    pub chunk: usize,
    /// Stop after this many scenarios in total (used to emulate interruption).
    pub limit: Option<usize>,
}

impl Default for LabelOptions {
    fn default() -> Self {
        Self { workers: 1, chunk: 16, limit: None }
    }
}

/// Solves scenario `n` and packs its label. Solver errors become a
/// `failed` record rather than an error.
pub fn label_one(
    grid: &PowerGrid,
    ptdf: &PtdfMatrix,
    set: &ScenarioSet,
    n: usize,
    config: &ScucConfig,
    layout: &LabelLayout,
) -> LabelRecord {
    let run = || -> Result<LabelRecord> {
        let problem = problem_for_scenario(grid, ptdf, set, n, config)?;
        let (full, _, split) = cause_aware_shedding(&problem)?;
        let q = extract_qois(&full, grid, ptdf, &problem.bus_load, &problem.bus_wind);
        Ok(LabelRecord {
            scenario: n,
            status: match full.status {
                SolveStatus::Optimal => LabelStatus::Optimal,
                SolveStatus::GapLimited => LabelStatus::GapLimited,
                SolveStatus::Infeasible => LabelStatus::Failed,
            },
            objective: full.objective,
            bound: full.bound,
            nodes: full.nodes,
            clamped: split.clamped,
            uc: full.uc.u.clone(),
            dispatch: full.dispatch.clone(),
            thermal_zone: q.thermal_zone,
            shed_zone: split.total_zone,
            reserve_shed_zone: split.reserve_zone,
            nonreserve_shed_zone: split.nonreserve_zone,
            injections: q.injections,
            flows: q.flows,
            message: String::new(),
        })
    };
    run().unwrap_or_else(|e| layout.failed(n, e.to_string()))
}

fn timing_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.timing.csv"))
}

/// Labels every scenario of `set` into `path`, resuming after the last
/// complete record if the file already exists with the same layout and
/// config hash. Returns the full label set.
pub fn label_scenarios(
    grid: &PowerGrid,
    ptdf: &PtdfMatrix,
    set: &ScenarioSet,
    config: &ScucConfig,
    opts: &LabelOptions,
    path: &Path,
    config_hash: Option<&str>,
) -> Result<LabelSet> {
    set.check_grid(grid)?;
    let layout = LabelLayout::for_grid(grid, set.horizon);
    let io = |e| Error::io(path, e);

    let mut records = Vec::new();
    if path.exists() {
        let (existing, offset) = read_labels_prefix(path)?;
        if existing.layout != layout || existing.config_hash.as_deref() != config_hash {
            return Err(Error::ConfigMismatch(format!(
                "{} was produced with a different grid or config; remove it to relabel",
                path.display()
            )));
        }
        records = existing.records;
        let f = OpenOptions::new().write(true).open(path).map_err(io)?;
        f.set_len(offset).map_err(io)?;
    } else {
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        write_preamble(&mut w, &layout, config_hash).map_err(io)?;
        w.flush().map_err(io)?;
    }
    if records.len() > set.n {
        return Err(Error::ConfigMismatch("label file has more records than scenarios".into()));
    }

    let tpath = timing_path(path);
    let mut timing = OpenOptions::new().create(true).append(true).open(&tpath).map_err(|e| Error::io(&tpath, e))?;
    if timing.metadata().map(|m| m.len()).unwrap_or(0) == 0 {
        writeln!(timing, "scenario,seconds").map_err(|e| Error::io(&tpath, e))?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| Error::Solver(format!("thread pool: {e}")))?;
    let mut out = BufWriter::new(OpenOptions::new().append(true).open(path).map_err(io)?);
    let stop = opts.limit.unwrap_or(set.n).min(set.n);
    let mut next = records.len();
    while next < stop {
        let end = (next + opts.chunk.max(1)).min(stop);
        let batch: Vec<(LabelRecord, f64)> = pool.install(|| {
            (next..end)
                .into_par_iter()
                .map(|n| {
                    let start = Instant::now();
                    let r = label_one(grid, ptdf, set, n, config, &layout);
                    (r, start.elapsed().as_secs_f64())
                })
                .collect()
        });
        for (r, secs) in batch {
            writeln!(out, "{}", layout.format_record(&r)).map_err(io)?;
            writeln!(timing, "{},{secs}", r.scenario).map_err(|e| Error::io(&tpath, e))?;
            records.push(r);
        }
        out.flush().map_err(io)?;
        next = end;
    }
    Ok(LabelSet { layout, records, config_hash: config_hash.map(str::to_string) })
}
