//! Batch certification: random parameter sweeps, regular 2-D grids, CSV
//! tables and histograms of a table column.
//!
//! Every draw gets its own generator, `ChaCha8Rng::seed_from_u64(seed)` on
//! stream `index`, and consumes one uniform per ranged parameter in
//! lexicographic name order.  Rows are therefore reproducible one by one,
//! independent of the thread count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ErrorCategory, QcertError, Result};
use crate::machines::{Machine, MachineKind};
use crate::montecarlo::RNG_NAME;
use crate::thermo::{certify, CertificationReport, Mode};

/// Rows whose first-law residual, entropy production, trace or populations
/// fall outside these bounds are flagged `CONDITIONING`.
pub const FIRST_LAW_TOL: f64 = 1e-10;
pub const ENTROPY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    #[serde(default)]
    pub scale: Scale,
}

impl Range {
    fn check(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(QcertError::Config(format!(
                "range '{name}' needs finite min <= max"
            )));
        }
        if self.scale == Scale::Log && self.min <= 0.0 {
            return Err(QcertError::Config(format!(
                "log-scaled range '{name}' must be strictly positive"
            )));
        }
        Ok(())
    }

    /// Map `u ∈ [0, 1)` onto the range.
    pub fn at(&self, u: f64) -> f64 {
        match self.scale {
            Scale::Linear => self.min + u * (self.max - self.min),
            Scale::Log => (self.min.ln() + u * (self.max.ln() - self.min.ln())).exp(),
        }
    }

    fn describe(&self) -> String {
        let s = match self.scale {
            Scale::Linear => "linear",
            Scale::Log => "log",
        };
        format!("{s}[{},{}]", self.min, self.max)
    }
}

fn default_draws() -> usize {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub machine: String,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    #[serde(default)]
    pub ranges: BTreeMap<String, Range>,
    #[serde(default)]
    pub output: Option<String>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| QcertError::Config(e.to_string()))
    }

    pub fn kind(&self) -> Result<MachineKind> {
        MachineKind::parse(&self.machine)
    }

    pub fn check(&self) -> Result<MachineKind> {
        let kind = self.kind()?;
        if self.draws == 0 {
            return Err(QcertError::Config("draw count must be at least 1".into()));
        }
        for (name, r) in &self.ranges {
            r.check(name)?;
            if self.fixed.contains_key(name) {
                return Err(QcertError::Config(format!(
                    "'{name}' is both fixed and ranged"
                )));
            }
        }
        // Unknown parameter names surface here rather than as per-row errors.
        let mut probe = self.fixed.clone();
        for (name, r) in &self.ranges {
            probe.insert(name.clone(), r.at(0.5));
        }
        if let Err(e @ QcertError::Config(_)) = Machine::from_params(kind, &probe) {
            return Err(e);
        }
        Ok(kind)
    }

    /// Drawn parameters of row `index`.
    pub fn draw(&self, index: usize) -> BTreeMap<String, f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        self.ranges
            .iter()
            .map(|(name, r)| (name.clone(), r.at(rng.random::<f64>())))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RowStatus {
    Ok,
    Equilibrium,
    Infeasible,
    Invalid,
    Conditioning,
    Error,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "OK",
            RowStatus::Equilibrium => "EQUILIBRIUM",
            RowStatus::Infeasible => "INFEASIBLE",
            RowStatus::Invalid => "INVALID",
            RowStatus::Conditioning => "CONDITIONING",
            RowStatus::Error => "ERROR",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub status: RowStatus,
    pub machine: MachineKind,
    pub index: usize,
    /// Varied parameters, in column order.
    pub params: Vec<(String, f64)>,
    pub report: Option<CertificationReport>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn fluctuation_ratio(&self) -> Option<f64> {
        self.report.as_ref().and_then(|r| r.fluctuation_ratio)
    }
}

/// Status of a successfully certified machine.
pub fn status_of(rep: &CertificationReport) -> RowStatus {
    let q = &rep.quantum;
    let laws_ok = q.first_law_residual <= FIRST_LAW_TOL
        && q.entropy_production >= -ENTROPY_TOL
        && rep.trace_error <= TRACE_TOL
        && rep.min_population >= 0.0;
    if !laws_ok {
        RowStatus::Conditioning
    } else if rep.at_equilibrium {
        RowStatus::Equilibrium
    } else if !rep.feasible {
        RowStatus::Infeasible
    } else {
        RowStatus::Ok
    }
}

/// Certify one parameter set.
pub fn evaluate(
    kind: MachineKind,
    fixed: &BTreeMap<String, f64>,
    params: Vec<(String, f64)>,
    index: usize,
) -> SweepRow {
    let mut map = fixed.clone();
    map.extend(params.iter().cloned());
    let result = Machine::from_params(kind, &map).and_then(|m| certify(&m));
    match result {
        Ok(rep) => SweepRow {
            status: status_of(&rep),
            machine: kind,
            index,
            params,
            report: Some(rep),
            error: None,
        },
        Err(e) => SweepRow {
            status: match e.category() {
                ErrorCategory::Validation => RowStatus::Invalid,
                ErrorCategory::Conditioning => RowStatus::Conditioning,
                ErrorCategory::Infeasible => RowStatus::Infeasible,
                ErrorCategory::Other => RowStatus::Error,
            },
            machine: kind,
            index,
            params,
            report: None,
            error: Some(e.to_string()),
        },
    }
}

/// Run every draw of a sweep; rows come back in draw order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let kind = cfg.check()?;
    Ok((0..cfg.draws)
        .into_par_iter()
        .map(|i| evaluate(kind, &cfg.fixed, cfg.draw(i).into_iter().collect(), i))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub n: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        let r = Range { min: self.min, max: self.max, scale: self.scale };
        if self.n == 1 {
            return vec![self.min];
        }
        (0..self.n)
            .map(|k| r.at(k as f64 / (self.n - 1) as f64))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub machine: String,
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    pub x: Axis,
    pub y: Axis,
    #[serde(default)]
    pub output: Option<String>,
}

impl GridConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| QcertError::Config(e.to_string()))
    }
}

/// Certify every cell of a 2-D grid; rows run over `x` fastest.
pub fn grid_scan(cfg: &GridConfig) -> Result<Vec<SweepRow>> {
    let kind = MachineKind::parse(&cfg.machine)?;
    for axis in [&cfg.x, &cfg.y] {
        if axis.n == 0 {
            return Err(QcertError::Config(format!("axis '{}' has no points", axis.name)));
        }
        Range { min: axis.min, max: axis.max, scale: axis.scale }.check(&axis.name)?;
    }
    if cfg.x.name == cfg.y.name {
        return Err(QcertError::Config("grid axes must differ".into()));
    }
    let (xs, ys) = (cfg.x.values(), cfg.y.values());
    let cells: Vec<(usize, f64, f64)> = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
        .enumerate()
        .map(|(k, (x, y))| (k, x, y))
        .collect();
    let mut probe = cfg.fixed.clone();
    probe.insert(cfg.x.name.clone(), xs[0]);
    probe.insert(cfg.y.name.clone(), ys[0]);
    if let Err(e @ QcertError::Config(_)) = Machine::from_params(kind, &probe) {
        return Err(e);
    }
    Ok(cells
        .into_par_iter()
        .map(|(k, x, y)| {
            let params = vec![(cfg.x.name.clone(), x), (cfg.y.name.clone(), y)];
            evaluate(kind, &cfg.fixed, params, k)
        })
        .collect())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::HeatEngine => "engine",
        Mode::Refrigerator => "refrigerator",
        Mode::HeatPump => "heat-pump",
        Mode::Equilibrium => "equilibrium",
        Mode::Unspecified => "unspecified",
    }
}

pub const TABLE_COLUMNS: [&str; 12] = [
    "mode", "c1_q", "c2_q", "c1_cl", "c2_cl", "R", "Q", "S_dot", "eta", "eta_bound", "feasible",
    "error",
];

/// Write rows as CSV.  `header` lines are emitted first, each prefixed
/// with `# `.
pub fn write_csv<W: Write>(out: &mut W, header: &[String], rows: &[SweepRow]) -> std::io::Result<()> {
    for h in header {
        writeln!(out, "# {h}")?;
    }
    let param_names: Vec<&str> = rows
        .first()
        .map(|r| r.params.iter().map(|(n, _)| n.as_str()).collect())
        .unwrap_or_default();
    let mut line = String::from("status,machine,seed_index");
    for n in &param_names {
        line.push(',');
        line.push_str(n);
    }
    for c in TABLE_COLUMNS {
        line.push(',');
        line.push_str(c);
    }
    writeln!(out, "{line}")?;
    for row in rows {
        line.clear();
        let _ = write!(line, "{},{},{}", row.status.as_str(), row.machine.name(), row.index);
        for (_, v) in &row.params {
            let _ = write!(line, ",{v}");
        }
        match &row.report {
            Some(r) => {
                let cl = r.stats_classical;
                let _ = write!(
                    line,
                    ",{},{},{},{},{},{},{},{},{},{},{},",
                    mode_name(r.mode),
                    r.stats_quantum.c1,
                    r.stats_quantum.c2,
                    fmt_opt(cl.map(|s| s.c1)),
                    fmt_opt(cl.map(|s| s.c2)),
                    fmt_opt(r.fluctuation_ratio),
                    fmt_opt(r.tur_ratio),
                    r.quantum.entropy_production,
                    fmt_opt(r.efficiency),
                    fmt_opt(r.efficiency_bound),
                    r.feasible,
                );
            }
            None => {
                let msg = row.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
                let _ = write!(line, ",,,,,,,,,,,{msg}");
            }
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Metadata lines for a sweep table.
pub fn sweep_header(cfg: &SweepConfig) -> Vec<String> {
    let mut sampling = String::new();
    for (name, r) in &cfg.ranges {
        if !sampling.is_empty() {
            sampling.push(';');
        }
        let _ = write!(sampling, "{name}={}", r.describe());
    }
    let fixed: Vec<String> = cfg.fixed.iter().map(|(k, v)| format!("{k}={v}")).collect();
    vec![
        format!("qcert {}", env!("CARGO_PKG_VERSION")),
        format!(
            "sweep machine={} draws={} seed={} rng={RNG_NAME} stream=draw-index",
            cfg.machine, cfg.draws, cfg.seed
        ),
        format!("sampling {sampling}"),
        format!("fixed {}", fixed.join(";")),
    ]
}

pub fn grid_header(cfg: &GridConfig) -> Vec<String> {
    let fixed: Vec<String> = cfg.fixed.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let axis = |a: &Axis| {
        let scale = match a.scale {
            Scale::Linear => "linear",
            Scale::Log => "log",
        };
        format!("{}={scale}[{},{}]x{}", a.name, a.min, a.max, a.n)
    };
    vec![
        format!("qcert {}", env!("CARGO_PKG_VERSION")),
        format!("grid machine={} x {} y {}", cfg.machine, axis(&cfg.x), axis(&cfg.y)),
        format!("fixed {}", fixed.join(";")),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub column: String,
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Rows with status `OK` and a value in the column.
    pub total: u64,
    /// Rows skipped: other statuses or an empty cell.
    pub skipped: u64,
}

/// Bin one column of a sweep table.  Only `OK` rows are counted.  Without
/// an explicit range the observed min and max are used.
pub fn histogram(table: &str, column: &str, bins: usize, range: Option<(f64, f64)>) -> Result<Histogram> {
    if bins == 0 {
        return Err(QcertError::Config("need at least one bin".into()));
    }
    let mut lines = table.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let head = lines
        .next()
        .ok_or_else(|| QcertError::Config("empty table".into()))?;
    let names: Vec<&str> = head.split(',').collect();
    let col = names
        .iter()
        .position(|n| *n == column)
        .ok_or_else(|| QcertError::NotFound(format!("column '{column}'")))?;
    let status = names
        .iter()
        .position(|n| *n == "status")
        .ok_or_else(|| QcertError::Config("table has no status column".into()))?;
    let mut values = Vec::new();
    let mut skipped = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let v = cells.get(col).and_then(|c| c.parse::<f64>().ok());
        match (cells.get(status), v) {
            (Some(&"OK"), Some(v)) if v.is_finite() => values.push(v),
            _ => skipped += 1,
        }
    }
    let (lo, hi) = match range {
        Some(r) => r,
        None if values.is_empty() => (0.0, 1.0),
        None => values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v))),
    };
    if !(hi >= lo) {
        return Err(QcertError::Config(format!("bad histogram range [{lo}, {hi}]")));
    }
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let edges = (0..=bins).map(|k| lo + width * k as f64).collect();
    let mut counts = vec![0u64; bins];
    let mut total = 0;
    for v in values {
        if v < lo || v > hi {
            skipped += 1;
            continue;
        }
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
        total += 1;
    }
    Ok(Histogram { column: column.to_string(), edges, counts, total, skipped })
}

impl Histogram {
    pub fn to_csv(&self) -> String {
        let mut s = format!("# column={} total={} skipped={}\nlo,hi,count\n", self.column, self.total, self.skipped);
        for (k, c) in self.counts.iter().enumerate() {
            let _ = writeln!(s, "{},{},{c}", self.edges[k], self.edges[k + 1]);
        }
        s
    }
}
