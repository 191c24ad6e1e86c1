//! On-disk formats. Every CSV starts with a `# pinnlab <schema> v1` line
//! followed by a header row; floats use the shortest representation that
//! parses back to the same bits.
//!
//! The `parse_*` functions take raw bytes and never panic, so they double as
//! fuzzing entry points.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pinnlab::optim::{Phase, TraceRow};
use pinnlab::scenarios::{scale_viscosity, DataPoint, Source};
use serde::Serialize;
use thiserror::Error;

use crate::error::{CliError, Result};

pub const CSV_VERSION: u32 = 1;

pub const DATASET_SCHEMA: &str = "dataset";
pub const FD_SCHEMA: &str = "fd";
pub const TRACE_SCHEMA: &str = "trace";
pub const PARETO_SCHEMA: &str = "pareto";
pub const FRONT_SCHEMA: &str = "front";
pub const CURVE_SCHEMA: &str = "curve";
pub const BOXPLOT_SCHEMA: &str = "boxplot";

const DATASET_COLS: [&str; 5] = ["x", "scaled_nu", "nu", "label", "source_tag"];
const FD_COLS: [&str; 4] = ["x", "u_numeric", "u_analytic", "epsilon"];
const TRACE_COLS: [&str; 9] = ["iter", "phase", "l_pde", "l_bc", "l_d", "sigma_pde", "sigma_bc", "sigma_d", "test_rmse"];
const PARETO_COLS: [&str; 5] = ["alpha", "iter", "l_pde", "l_d", "is_final"];
const FRONT_COLS: [&str; 3] = ["alpha", "l_pde", "l_d"];
const CURVE_COLS: [&str; 3] = ["nu", "rmse_vs_analytic", "numeric_vs_analytic"];
const BOXPLOT_COLS: [&str; 3] = ["tag", "nu", "rmse_vs_analytic"];

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {reason}")]
pub struct ParseError {
    pub line: u64,
    pub reason: String,
}

fn perr(line: u64, reason: impl Into<String>) -> ParseError {
    ParseError {
        line,
        reason: reason.into(),
    }
}

/// Shortest round-trip decimal form.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn schema_line(schema: &str) -> String {
    format!("# pinnlab {schema} v{CSV_VERSION}")
}

/// Renders a CSV document with the schema line and header.
pub fn render_csv(schema: &str, columns: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = schema_line(schema).into_bytes();
    out.push(b'\n');
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(columns).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Checks the schema line and header, then returns the records with their
/// 1-based line numbers.
fn records(bytes: &[u8], schema: &str, columns: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>, ParseError> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| perr(1, "missing schema line"))?;
    let first = std::str::from_utf8(&bytes[..nl]).map_err(|_| perr(1, "schema line is not UTF-8"))?;
    let first = first.strip_suffix('\r').unwrap_or(first);
    if first != schema_line(schema) {
        return Err(perr(1, format!("expected {:?}, found {first:?}", schema_line(schema))));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(&bytes[nl + 1..]);
    let header = rdr.headers().map_err(|e| perr(2, e.to_string()))?;
    if header.iter().ne(columns.iter().copied()) {
        return Err(perr(2, format!("expected columns {}", columns.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 3;
        let rec = rec.map_err(|e| perr(line, e.to_string()))?;
        if rec.len() != columns.len() {
            return Err(perr(line, format!("expected {} fields, found {}", columns.len(), rec.len())));
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn field<T: FromStr>(rec: &csv::StringRecord, line: u64, i: usize, name: &str) -> Result<T, ParseError> {
    rec[i].parse().map_err(|_| perr(line, format!("bad {name} {:?}", &rec[i])))
}

fn finite(rec: &csv::StringRecord, line: u64, i: usize, name: &str) -> Result<f64, ParseError> {
    let v: f64 = field(rec, line, i, name)?;
    if !v.is_finite() {
        return Err(perr(line, format!("{name} is not finite")));
    }
    Ok(v)
}

fn opt_f64(rec: &csv::StringRecord, line: u64, i: usize, name: &str) -> Result<Option<f64>, ParseError> {
    if rec[i].is_empty() {
        Ok(None)
    } else {
        field(rec, line, i, name).map(Some)
    }
}

fn nonneg(rec: &csv::StringRecord, line: u64, i: usize, name: &str) -> Result<f64, ParseError> {
    let v: f64 = field(rec, line, i, name)?;
    if v.is_nan() || v < 0.0 {
        return Err(perr(line, format!("{name} must be non-negative")));
    }
    Ok(v)
}

// ---------- datasets ----------

pub fn dataset_csv(points: &[DataPoint]) -> Result<Vec<u8>> {
    let rows = points
        .iter()
        .map(|p| {
            Ok(vec![
                fmt_f64(p.x),
                fmt_f64(p.scaled_nu()?),
                fmt_f64(p.nu),
                fmt_opt(p.label),
                p.source.to_string(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(render_csv(DATASET_SCHEMA, &DATASET_COLS, &rows))
}

pub fn parse_dataset_csv(bytes: &[u8]) -> Result<Vec<DataPoint>, ParseError> {
    records(bytes, DATASET_SCHEMA, &DATASET_COLS)?
        .into_iter()
        .map(|(line, r)| {
            let x = finite(&r, line, 0, "x")?;
            if !(-1.0..=1.0).contains(&x) {
                return Err(perr(line, "x outside [-1, 1]"));
            }
            let scaled = finite(&r, line, 1, "scaled_nu")?;
            let nu = finite(&r, line, 2, "nu")?;
            let expect = scale_viscosity(nu).map_err(|e| perr(line, e.to_string()))?;
            if scaled.to_bits() != expect.to_bits() {
                return Err(perr(line, "scaled_nu does not match nu"));
            }
            let label = match opt_f64(&r, line, 3, "label")? {
                Some(v) if !v.is_finite() => return Err(perr(line, "label is not finite")),
                l => l,
            };
            let source: Source = field(&r, line, 4, "source_tag")?;
            if label.is_none() != (source == Source::None) {
                return Err(perr(line, "label presence disagrees with source_tag"));
            }
            Ok(DataPoint { x, nu, label, source })
        })
        .collect()
}

// ---------- FD solutions ----------

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdRow {
    pub x: f64,
    pub u_numeric: f64,
    pub u_analytic: f64,
    pub epsilon: f64,
}

pub fn fd_csv(rows: &[FdRow]) -> Vec<u8> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![fmt_f64(r.x), fmt_f64(r.u_numeric), fmt_f64(r.u_analytic), fmt_f64(r.epsilon)])
        .collect();
    render_csv(FD_SCHEMA, &FD_COLS, &rows)
}

pub fn parse_fd_csv(bytes: &[u8]) -> Result<Vec<FdRow>, ParseError> {
    records(bytes, FD_SCHEMA, &FD_COLS)?
        .into_iter()
        .map(|(line, r)| {
            let row = FdRow {
                x: finite(&r, line, 0, "x")?,
                u_numeric: finite(&r, line, 1, "u_numeric")?,
                u_analytic: finite(&r, line, 2, "u_analytic")?,
                epsilon: finite(&r, line, 3, "epsilon")?,
            };
            if row.epsilon.to_bits() != (row.u_analytic - row.u_numeric).to_bits() {
                return Err(perr(line, "epsilon is not u_analytic - u_numeric"));
            }
            Ok(row)
        })
        .collect()
}

// ---------- training traces ----------

pub fn trace_csv(trace: &[TraceRow]) -> Vec<u8> {
    let rows: Vec<Vec<String>> = trace
        .iter()
        .map(|t| {
            let s = |i: usize| fmt_opt(t.sigma.map(|s| s[i]));
            vec![
                t.iter.to_string(),
                t.phase.as_str().to_string(),
                fmt_f64(t.l_pde),
                fmt_f64(t.l_bc),
                fmt_f64(t.l_d),
                s(0),
                s(1),
                s(2),
                fmt_f64(t.test_rmse),
            ]
        })
        .collect();
    render_csv(TRACE_SCHEMA, &TRACE_COLS, &rows)
}

fn parse_phase(s: &str) -> Option<Phase> {
    [Phase::Warmup, Phase::Adamw, Phase::Lbfgs].into_iter().find(|p| p.as_str() == s)
}

pub fn parse_trace_csv(bytes: &[u8]) -> Result<Vec<TraceRow>, ParseError> {
    let mut out: Vec<TraceRow> = Vec::new();
    for (line, r) in records(bytes, TRACE_SCHEMA, &TRACE_COLS)? {
        let iter: usize = field(&r, line, 0, "iter")?;
        if out.last().is_some_and(|p| p.iter >= iter) {
            return Err(perr(line, "iterations must increase"));
        }
        let phase = parse_phase(&r[1]).ok_or_else(|| perr(line, format!("unknown phase {:?}", &r[1])))?;
        let sig = [
            opt_f64(&r, line, 5, "sigma_pde")?,
            opt_f64(&r, line, 6, "sigma_bc")?,
            opt_f64(&r, line, 7, "sigma_d")?,
        ];
        let sigma = match sig {
            [None, None, None] => None,
            [Some(a), Some(b), Some(c)] => Some([a, b, c]),
            _ => return Err(perr(line, "sigma columns must be all present or all empty")),
        };
        out.push(TraceRow {
            iter,
            phase,
            l_pde: nonneg(&r, line, 2, "l_pde")?,
            l_bc: nonneg(&r, line, 3, "l_bc")?,
            l_d: nonneg(&r, line, 4, "l_d")?,
            sigma,
            test_rmse: nonneg(&r, line, 8, "test_rmse")?,
        });
    }
    Ok(out)
}

// ---------- Pareto sweeps ----------

/// The `alpha` column: a fixed weight or the learned-weight overlay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaLabel {
    Fixed(f64),
    LbPinn,
}

impl std::fmt::Display for AlphaLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AlphaLabel::Fixed(a) => f.write_str(&fmt_f64(*a)),
            AlphaLabel::LbPinn => f.write_str("lbpinn"),
        }
    }
}

impl FromStr for AlphaLabel {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        if s == "lbpinn" {
            return Ok(AlphaLabel::LbPinn);
        }
        match s.parse::<f64>() {
            Ok(a) if (0.0..=1.0).contains(&a) => Ok(AlphaLabel::Fixed(a)),
            _ => Err(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParetoRow {
    pub alpha: AlphaLabel,
    pub iter: usize,
    pub l_pde: f64,
    pub l_d: f64,
    pub is_final: bool,
}

pub fn pareto_csv(rows: &[ParetoRow]) -> Vec<u8> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.alpha.to_string(),
                r.iter.to_string(),
                fmt_f64(r.l_pde),
                fmt_f64(r.l_d),
                u8::from(r.is_final).to_string(),
            ]
        })
        .collect();
    render_csv(PARETO_SCHEMA, &PARETO_COLS, &rows)
}

/// Parses a trajectory file and checks that every run has exactly one final
/// row and the learned-weight overlay appears at most once.
pub fn parse_pareto_csv(bytes: &[u8]) -> Result<Vec<ParetoRow>, ParseError> {
    let mut out = Vec::new();
    for (line, r) in records(bytes, PARETO_SCHEMA, &PARETO_COLS)? {
        let alpha: AlphaLabel = field(&r, line, 0, "alpha")?;
        let is_final = match &r[4] {
            "0" => false,
            "1" => true,
            other => return Err(perr(line, format!("bad is_final {other:?}"))),
        };
        out.push(ParetoRow {
            alpha,
            iter: field(&r, line, 1, "iter")?,
            l_pde: nonneg(&r, line, 2, "l_pde")?,
            l_d: nonneg(&r, line, 3, "l_d")?,
            is_final,
        });
    }
    let mut labels: Vec<AlphaLabel> = Vec::new();
    for r in &out {
        if !labels.iter().any(|l| same_label(*l, r.alpha)) {
            labels.push(r.alpha);
        }
    }
    for l in labels {
        let finals = out.iter().filter(|r| r.is_final && same_label(r.alpha, l)).count();
        if finals != 1 {
            return Err(perr(0, format!("run {l} has {finals} final rows")));
        }
    }
    Ok(out)
}

fn same_label(a: AlphaLabel, b: AlphaLabel) -> bool {
    match (a, b) {
        (AlphaLabel::Fixed(x), AlphaLabel::Fixed(y)) => x.to_bits() == y.to_bits(),
        (AlphaLabel::LbPinn, AlphaLabel::LbPinn) => true,
        _ => false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrontPoint {
    pub alpha: f64,
    pub l_pde: f64,
    pub l_d: f64,
}

pub fn front_csv(points: &[FrontPoint]) -> Vec<u8> {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| vec![fmt_f64(p.alpha), fmt_f64(p.l_pde), fmt_f64(p.l_d)])
        .collect();
    render_csv(FRONT_SCHEMA, &FRONT_COLS, &rows)
}

/// Parses a front file and rejects it if any point dominates another.
pub fn parse_front_csv(bytes: &[u8]) -> Result<Vec<FrontPoint>, ParseError> {
    let pts = records(bytes, FRONT_SCHEMA, &FRONT_COLS)?
        .into_iter()
        .map(|(line, r)| {
            let alpha = nonneg(&r, line, 0, "alpha")?;
            if alpha > 1.0 {
                return Err(perr(line, "alpha above 1"));
            }
            Ok(FrontPoint {
                alpha,
                l_pde: nonneg(&r, line, 1, "l_pde")?,
                l_d: nonneg(&r, line, 2, "l_d")?,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let xy: Vec<(f64, f64)> = pts.iter().map(|p| (p.l_pde, p.l_d)).collect();
    if pinnlab::scenarios::pareto_front(&xy).len() != pts.len() {
        return Err(perr(0, "front contains a dominated point"));
    }
    Ok(pts)
}

// ---------- evaluation ----------

pub fn curve_csv(rows: &[pinnlab::scenarios::NuRow]) -> Vec<u8> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![fmt_f64(r.nu), fmt_f64(r.rmse_vs_analytic), fmt_opt(r.numeric_vs_analytic)])
        .collect();
    render_csv(CURVE_SCHEMA, &CURVE_COLS, &rows)
}

pub fn boxplot_csv(rows: &[(String, f64, f64)]) -> Vec<u8> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(t, nu, e)| vec![t.clone(), fmt_f64(*nu), fmt_f64(*e)])
        .collect();
    render_csv(BOXPLOT_SCHEMA, &BOXPLOT_COLS, &rows)
}

// ---------- filesystem ----------

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::format(path, e.to_string()))?;
    s.push('\n');
    write_file(path, s.as_bytes())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Reads and parses a file, attaching the path to parse errors.
pub fn load<T>(path: &Path, parse: impl FnOnce(&[u8]) -> Result<T, ParseError>) -> Result<T> {
    let bytes = read_file(path)?;
    parse(&bytes).map_err(|e| CliError::format(path, e.to_string()))
}

/// Appends a line to a log file. Logs hold wall-clock data and are kept apart
/// from the deterministic outputs.
pub fn append_log(path: &Path, line: &str) -> Result<()> {
    use std::io::Write;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::io(path, e))?;
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    writeln!(f, "[{stamp:.3}] {line}").map_err(|e| CliError::io(path, e))
}

/// File name for an FD solve, e.g. `n641_nu1e-2.csv`.
pub fn fd_file_name(nodes: usize, nu: f64) -> PathBuf {
    PathBuf::from(format!("n{nodes}_nu{nu:e}.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use pinnlab::scenarios::Tag;
    use proptest::prelude::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1e-300, -2.5e17, 8.43e-2, f64::MIN_POSITIVE, 1.0 / 3.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn dataset_round_trip() {
        let pts = vec![
            DataPoint {
                x: -0.3,
                nu: 1e-2,
                label: Some(1.234),
                source: Source::Fd(Tag::C2),
            },
            DataPoint {
                x: 0.5,
                nu: 1e-5,
                label: None,
                source: Source::None,
            },
        ];
        let bytes = dataset_csv(&pts).unwrap();
        assert!(bytes.starts_with(b"# pinnlab dataset v1\nx,scaled_nu,nu,label,source_tag\n"));
        assert_eq!(parse_dataset_csv(&bytes).unwrap(), pts);
    }

    #[test]
    fn header_is_checked() {
        let good = fd_csv(&[]);
        assert!(parse_fd_csv(&good).unwrap().is_empty());
        assert_eq!(parse_fd_csv(b"x,u\n").unwrap_err().line, 1);
        assert!(parse_trace_csv(&good).is_err());
        assert!(parse_fd_csv(b"# pinnlab fd v1\nx,u_numeric\n").is_err());
        assert!(parse_fd_csv(b"# pinnlab fd v2\nx,u_numeric,u_analytic,epsilon\n").is_err());
    }

    #[test]
    fn pareto_requires_one_final_per_run() {
        let row = |alpha, is_final| ParetoRow {
            alpha,
            iter: 3,
            l_pde: 1.0,
            l_d: 2.0,
            is_final,
        };
        let ok = pareto_csv(&[row(AlphaLabel::Fixed(0.5), false), row(AlphaLabel::Fixed(0.5), true), row(AlphaLabel::LbPinn, true)]);
        assert_eq!(parse_pareto_csv(&ok).unwrap().len(), 3);
        let twice = pareto_csv(&[row(AlphaLabel::LbPinn, true), row(AlphaLabel::LbPinn, true)]);
        assert!(parse_pareto_csv(&twice).is_err());
        let none = pareto_csv(&[row(AlphaLabel::Fixed(0.1), false)]);
        assert!(parse_pareto_csv(&none).is_err());
    }

    #[test]
    fn dominated_front_is_rejected() {
        let p = |l_pde, l_d| FrontPoint { alpha: 0.5, l_pde, l_d };
        assert!(parse_front_csv(&front_csv(&[p(1.0, 2.0), p(2.0, 1.0)])).is_ok());
        assert!(parse_front_csv(&front_csv(&[p(1.0, 2.0), p(2.0, 3.0)])).is_err());
    }

    fn arb_row() -> impl Strategy<Value = TraceRow> {
        (
            0usize..3,
            prop::array::uniform4(0.0f64..1e6),
            prop::option::of(prop::array::uniform3(1e-8f64..1e4)),
        )
            .prop_map(|(ph, v, sigma)| TraceRow {
                iter: 0,
                phase: [Phase::Warmup, Phase::Adamw, Phase::Lbfgs][ph],
                l_pde: v[0],
                l_bc: v[1],
                l_d: v[2],
                sigma,
                test_rmse: v[3],
            })
    }

    proptest! {
        #[test]
        fn trace_round_trips(mut rows in prop::collection::vec(arb_row(), 0..20)) {
            for (i, r) in rows.iter_mut().enumerate() {
                r.iter = 7 * i;
            }
            prop_assert_eq!(parse_trace_csv(&trace_csv(&rows)).unwrap(), rows);
        }

        #[test]
        fn fd_round_trips(vals in prop::collection::vec((-1.0f64..1.0, -10.0f64..10.0, -10.0f64..10.0), 0..20)) {
            let rows: Vec<FdRow> = vals
                .into_iter()
                .map(|(x, n, a)| FdRow { x, u_numeric: n, u_analytic: a, epsilon: a - n })
                .collect();
            prop_assert_eq!(parse_fd_csv(&fd_csv(&rows)).unwrap(), rows);
        }

        #[test]
        fn parsers_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
            let mut framed = b"# pinnlab dataset v1\nx,scaled_nu,nu,label,source_tag\n".to_vec();
            framed.extend_from_slice(&bytes);
            let _ = parse_dataset_csv(&framed);
            let _ = parse_dataset_csv(&bytes);
            let _ = parse_fd_csv(&bytes);
            let _ = parse_trace_csv(&bytes);
            let _ = parse_pareto_csv(&bytes);
            let _ = parse_front_csv(&bytes);
        }
    }
}
