//! Configuration, loss-file ingestion and report output for the `riskcap`
//! binary.
//!
//! Loss data live in two files: `year,count` lists every observation year,
//! including years without events, and `year,amount` lists the events.

mod commands;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::capital::{
    BankCapital, CapitalMode, CapitalReport, CapitalSettings, CellCapital, CellModel, LossData,
};
use crate::error::{Error, Result};
use crate::experiments::{BiasCurve, BiasRecord};
use crate::mc_engine::{SimOptions, DEFAULT_BATCH, DEFAULT_K};

pub use commands::{main, run, Cli};

pub const SEED_ENV: &str = "RISKCAP_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeSelection {
    Conditional,
    Predictive,
    #[default]
    Both,
}

impl ModeSelection {
    pub fn modes(self) -> &'static [CapitalMode] {
        match self {
            ModeSelection::Conditional => &[CapitalMode::Conditional],
            ModeSelection::Predictive => &[CapitalMode::Predictive],
            ModeSelection::Both => &[CapitalMode::Conditional, CapitalMode::Predictive],
        }
    }
}

/// A cell plus the files holding its data. Relative paths resolve against the
/// config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    #[serde(flatten)]
    pub model: CellModel,
    #[serde(default)]
    pub counts: Option<PathBuf>,
    #[serde(default)]
    pub events: Option<PathBuf>,
}

fn default_q() -> f64 {
    0.999
}
fn default_k() -> usize {
    DEFAULT_K
}
fn default_gamma() -> f64 {
    0.95
}
fn default_batch() -> usize {
    DEFAULT_BATCH
}

/// JSON run configuration. Every field except each cell's `severity` has a
/// default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub cells: Vec<CellConfig>,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub mode: ModeSelection,
    #[serde(default)]
    pub target_rel_half_width: Option<f64>,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config and resolves cell file paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for c in &mut cfg.cells {
            for p in [&mut c.counts, &mut c.events].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::Validation(format!("q must lie in (0, 1), got {}", self.q)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Validation(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if self.k == 0 || self.batch_size == 0 {
            return Err(Error::Validation("k and batch_size must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Validation("workers must be at least 1".into()));
        }
        if let Some(t) = self.target_rel_half_width {
            if !(t > 0.0) {
                return Err(Error::Validation(format!("target_rel_half_width must be > 0, got {t}")));
            }
        }
        let mut ids = std::collections::HashSet::new();
        for c in &self.cells {
            c.model.validate()?;
            if !ids.insert(&c.model.cell_id) {
                return Err(Error::Validation(format!("duplicate cell_id {:?}", c.model.cell_id)));
            }
        }
        Ok(())
    }

    pub fn settings(&self, seed: u64) -> CapitalSettings {
        CapitalSettings {
            q: self.q,
            k: self.k,
            gamma: self.gamma,
            seed,
            target_rel_half_width: self.target_rel_half_width,
            sim: SimOptions {
                batch_size: self.batch_size,
                workers: self.workers,
            },
        }
    }
}

/// Flag, then config, then `RISKCAP_SEED`, then the clock.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            Error::Validation(format!("{SEED_ENV} must be an unsigned 64-bit integer, got {v:?}"))
        }),
        Err(_) => {
            let t = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .unwrap_or_default();
            Ok(t.as_secs() ^ (t.subsec_nanos() as u64) << 32)
        }
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(f))
}

fn create_csv(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn row_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Row {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn expect_header(path: &Path, rdr: &mut csv::Reader<File>, want: &[&str]) -> Result<()> {
    let h = rdr.headers()?;
    if h.iter().ne(want.iter().copied()) {
        return Err(row_err(
            path,
            1,
            format!("expected header {:?}, got {:?}", want.join(","), h.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    Ok(())
}

/// Iterates data rows as `(line, record)`.
fn records(path: &Path, rdr: csv::Reader<File>) -> impl Iterator<Item = Result<(u64, csv::StringRecord)>> + '_ {
    rdr.into_records().map(move |r| {
        let rec = r.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            row_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        Ok((line, rec))
    })
}

fn field<T: std::str::FromStr>(path: &Path, line: u64, rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| row_err(path, line, format!("{name}: cannot parse {raw:?}")))
}

/// `year,count` rows; every year appears once.
pub fn read_counts(path: &Path) -> Result<BTreeMap<i64, u64>> {
    let mut rdr = open_csv(path)?;
    expect_header(path, &mut rdr, &["year", "count"])?;
    let mut out = BTreeMap::new();
    for r in records(path, rdr) {
        let (line, rec) = r?;
        let year: i64 = field(path, line, &rec, 0, "year")?;
        let count: u64 = field(path, line, &rec, 1, "count (non-negative integer)")?;
        if out.insert(year, count).is_some() {
            return Err(row_err(path, line, format!("year {year} listed twice")));
        }
    }
    if out.is_empty() {
        return Err(row_err(path, 1, "no observation years"));
    }
    Ok(out)
}

/// `year,amount` rows with positive amounts.
pub fn read_events(path: &Path) -> Result<Vec<(u64, i64, f64)>> {
    let mut rdr = open_csv(path)?;
    expect_header(path, &mut rdr, &["year", "amount"])?;
    let mut out = Vec::new();
    for r in records(path, rdr) {
        let (line, rec) = r?;
        let year: i64 = field(path, line, &rec, 0, "year")?;
        let amount: f64 = field(path, line, &rec, 1, "amount")?;
        if !(amount > 0.0 && amount.is_finite()) {
            return Err(row_err(path, line, format!("amount must be finite and > 0, got {amount}")));
        }
        out.push((line, year, amount));
    }
    Ok(out)
}

/// Joins a counts and an events file. Severities are ordered by year, then by
/// file order within a year.
pub fn load_loss_data(counts_path: &Path, events_path: &Path) -> Result<LossData> {
    let counts = read_counts(counts_path)?;
    let events = read_events(events_path)?;
    let mut by_year: BTreeMap<i64, Vec<f64>> = counts.keys().map(|&y| (y, vec![])).collect();
    for (line, year, amount) in events {
        by_year
            .get_mut(&year)
            .ok_or_else(|| row_err(events_path, line, format!("year {year} is not in {}", counts_path.display())))?
            .push(amount);
    }
    for (year, n) in &counts {
        let got = by_year[year].len() as u64;
        if got != *n {
            return Err(Error::Validation(format!(
                "year {year}: {} lists {n} events but {} has {got}",
                counts_path.display(),
                events_path.display()
            )));
        }
    }
    LossData::new(
        counts.values().copied().collect(),
        by_year.into_values().flatten().collect(),
    )
}

/// Writes `data` with years numbered from 1.
pub fn write_loss_files(data: &LossData, counts_path: &Path, events_path: &Path) -> Result<()> {
    let mut c = create_csv(counts_path)?;
    let mut e = create_csv(events_path)?;
    c.write_record(["year", "count"])?;
    e.write_record(["year", "amount"])?;
    let mut sev = data.severities().iter();
    for (i, &n) in data.counts().iter().enumerate() {
        let y = (i + 1).to_string();
        c.write_record([y.as_str(), &n.to_string()])?;
        for x in sev.by_ref().take(n as usize) {
            e.write_record([y.as_str(), &x.to_string()])?;
        }
    }
    c.flush().map_err(|err| Error::io(counts_path, err))?;
    e.flush().map_err(|err| Error::io(events_path, err))?;
    Ok(())
}

/// Four significant digits.
pub fn sig4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-3..6).contains(&mag) {
        return format!("{x:.3e}");
    }
    format!("{:.*}", (3 - mag).max(0) as usize, x)
}

pub const CAPITAL_HEADER: [&str; 8] = ["cell_id", "mode", "q", "K", "value", "ci_lower", "ci_upper", "warnings"];

pub fn write_capital_csv<W: Write>(out: W, reports: &[CapitalReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CAPITAL_HEADER)?;
    for r in reports {
        let warnings: Vec<&str> = r.warnings.iter().map(|w| w.code()).collect();
        w.write_record([
            r.cell_id.clone(),
            r.mode.to_string(),
            r.estimate.q.to_string(),
            r.estimate.k.to_string(),
            r.estimate.value.to_string(),
            r.estimate.ci_lower.to_string(),
            r.estimate.ci_upper.to_string(),
            warnings.join(";"),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<capital csv>", e))?;
    Ok(())
}

/// One row of a capital CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapitalRow {
    pub cell_id: String,
    pub mode: CapitalMode,
    pub q: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub value: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub warnings: String,
}

impl From<&CapitalRow> for CellCapital {
    fn from(r: &CapitalRow) -> Self {
        Self {
            cell_id: r.cell_id.clone(),
            mode: r.mode,
            q: r.q,
            value: r.value,
        }
    }
}

pub fn read_capital_csv(path: &Path) -> Result<Vec<CapitalRow>> {
    let mut rdr = open_csv(path)?;
    expect_header(path, &mut rdr, &CAPITAL_HEADER)?;
    let mut out = vec![];
    for r in rdr.deserialize() {
        let row: CapitalRow = r.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            row_err(path, line, e.to_string())
        })?;
        out.push(row);
    }
    Ok(out)
}

pub const AGGREGATE_HEADER: [&str; 4] = ["cell_id", "mode", "q", "value"];
/// `cell_id` of the bank total row.
pub const TOTAL_ROW: &str = "TOTAL";

pub fn write_aggregate_csv<W: Write>(out: W, bank: &BankCapital) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER)?;
    let mode = bank.mode.to_string();
    for c in &bank.cells {
        w.write_record([c.cell_id.as_str(), &mode, &c.q.to_string(), &c.value.to_string()])?;
    }
    w.write_record([TOTAL_ROW, &mode, &bank.q.to_string(), &bank.total.to_string()])?;
    w.flush().map_err(|e| Error::io("<aggregate csv>", e))?;
    Ok(())
}

/// Reads an aggregate CSV back into its cell rows and total.
pub fn read_aggregate_csv(path: &Path) -> Result<(Vec<CellCapital>, f64)> {
    let mut rdr = open_csv(path)?;
    expect_header(path, &mut rdr, &AGGREGATE_HEADER)?;
    let mut cells = vec![];
    let mut total = None;
    for r in rdr.deserialize() {
        let c: CellCapital = r.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            row_err(path, line, e.to_string())
        })?;
        if c.cell_id == TOTAL_ROW {
            total = Some(c.value);
        } else {
            cells.push(c);
        }
    }
    let total = total.ok_or_else(|| row_err(path, 0, "missing TOTAL row"))?;
    Ok((cells, total))
}

/// `name, name_lower, name_upper` per parameter, the name column holding the
/// MLE, then both quantiles in thousands.
pub fn write_table1_csv<W: Write>(out: W, rows: &[BiasRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = rows.first() else {
        w.flush().map_err(|e| Error::io("<table1 csv>", e))?;
        return Ok(());
    };
    let mut header = vec!["years".to_string(), "events".to_string()];
    for n in &first.posterior.names {
        header.extend([n.clone(), format!("{n}_lower"), format!("{n}_upper")]);
    }
    header.extend(["q_conditional".into(), "q_predictive".into()]);
    w.write_record(&header)?;
    for r in rows {
        let est: BTreeMap<&str, f64> = r.mle.estimates().into_iter().collect();
        let mut rec = vec![r.years.to_string(), r.events.to_string()];
        for (n, iv) in r.posterior.names.iter().zip(&r.posterior.intervals) {
            rec.extend([est[n.as_str()].to_string(), iv.lower.to_string(), iv.upper.to_string()]);
        }
        rec.extend([r.q_conditional.to_string(), r.q_predictive.to_string()]);
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<table1 csv>", e))?;
    Ok(())
}

pub const BIAS_HEADER: [&str; 6] = ["family", "years", "relative_bias", "std_error", "realizations", "q0"];

pub fn write_bias_csv<W: Write>(out: W, curves: &[(&str, BiasCurve)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BIAS_HEADER)?;
    for (family, c) in curves {
        for p in &c.points {
            w.write_record([
                family.to_string(),
                p.years.to_string(),
                p.relative_bias.to_string(),
                p.std_error.to_string(),
                c.realizations.to_string(),
                c.q0.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<bias csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capital::SeverityModel;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn config_defaults() {
        let c = RunConfig::default();
        assert_eq!((c.q, c.k, c.gamma, c.mode), (0.999, 1_000_000, 0.95, ModeSelection::Both));
        assert!(c.cells.is_empty() && c.seed.is_none());
    }

    #[test]
    fn config_parses_cells() {
        let c = RunConfig::from_json(
            r#"{"cells":[{"cell_id":"a","severity":{"family":"pareto","threshold":2.0},
                "pareto_finite_mean":true,"counts":"c.csv","events":"e.csv"},
               {"cell_id":"b","severity":{"family":"lognormal"},
                "prior":{"frequency":{"shape":2.0,"scale":1.0}}}],
               "mode":"predictive","seed":5}"#,
        )
        .unwrap();
        assert_eq!(c.cells.len(), 2);
        assert_eq!(c.cells[0].model.severity, SeverityModel::Pareto { threshold: 2.0 });
        assert!(c.cells[1].model.prior.frequency.is_some());
        assert_eq!(c.mode, ModeSelection::Predictive);
        assert!(RunConfig::from_json(r#"{"qq":0.9}"#).is_err());
        assert!(RunConfig::from_json(r#"{"q":1.0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"cells":[{"cell_id":"a"}]}"#).is_err());
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(1), Some(2)).unwrap(), 1);
        assert_eq!(resolve_seed(None, Some(2)).unwrap(), 2);
    }

    #[test]
    fn loss_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = LossData::new(vec![2, 0, 1], vec![1.5, 2.25, 1e-3]).unwrap();
        let (c, e) = (dir.path().join("c.csv"), dir.path().join("e.csv"));
        write_loss_files(&d, &c, &e).unwrap();
        assert_eq!(load_loss_data(&c, &e).unwrap(), d);
    }

    #[test]
    fn events_are_grouped_by_year() {
        let dir = tempfile::tempdir().unwrap();
        let c = write(dir.path(), "c.csv", "year,count\n2001,1\n2000,2\n");
        let e = write(dir.path(), "e.csv", "year,amount\n2001,9\n2000,1\n2000,2\n");
        let d = load_loss_data(&c, &e).unwrap();
        assert_eq!(d.counts(), &[2, 1]);
        assert_eq!(d.severities(), &[1.0, 2.0, 9.0]);
    }

    #[test]
    fn row_numbered_diagnostics() {
        let dir = tempfile::tempdir().unwrap();
        let c = write(dir.path(), "c.csv", "year,count\n1,2\n2,1\n");
        let e = write(dir.path(), "e.csv", "year,amount\n1,5\n1,-2\n2,3\n");
        let err = load_loss_data(&c, &e).unwrap_err();
        assert!(matches!(err, Error::Row { line: 3, .. }), "{err}");
        assert!(err.to_string().contains(":3:"), "{err}");

        let e = write(dir.path(), "e2.csv", "year,amount\n1,5\n2,3\n");
        let err = load_loss_data(&c, &e).unwrap_err();
        assert!(err.to_string().contains("lists 2 events"), "{err}");

        let e = write(dir.path(), "e3.csv", "year,amount\n1,5\n1,5\n7,3\n");
        assert!(matches!(load_loss_data(&c, &e), Err(Error::Row { line: 4, .. })));

        let bad = write(dir.path(), "c2.csv", "year,n\n1,2\n");
        assert!(matches!(read_counts(&bad), Err(Error::Row { line: 1, .. })));
        let bad = write(dir.path(), "c3.csv", "year,count\n1,2\n1,3\n");
        assert!(matches!(read_counts(&bad), Err(Error::Row { line: 3, .. })));
        let bad = write(dir.path(), "c4.csv", "year,count\n1,-2\n");
        assert!(matches!(read_counts(&bad), Err(Error::Row { line: 2, .. })));
    }

    #[test]
    fn sig4_formatting() {
        assert_eq!(sig4(4912.345), "4912");
        assert_eq!(sig4(2.5), "2.500");
        assert_eq!(sig4(0.012345), "0.01235");
        assert_eq!(sig4(-10.0), "-10.00");
        assert_eq!(sig4(1.25e7), "1.250e7");
        assert_eq!(sig4(0.0), "0");
    }
}
