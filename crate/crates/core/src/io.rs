//! File formats.
//!
//! * Loss matrix CSV: header `lambda,<λ_1>,...,<λ_m>`, then one row per
//!   sample, `<sample_id>,<L_i(λ_1)>,...`.
//! * True-curve CSV: `lambda,risk,estimated`.
//! * Count-record CSV: `sample_id,lambda_index,n_matched,n_gt,set_size`.
//! * Results CSV: `method,repetition,selected_index,selected_lambda,effective_level,feasible,test_risk,set_size`.
//!
//! Floats are written with 17 significant digits, which round-trips every
//! `f64` exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::generators::{CountRecord, TrueCurve};
use crate::grid::Grid;
use crate::harness::Record;
use crate::matrix::LossMatrix;

/// `f64` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn write_loss_matrix<W: Write>(out: W, matrix: &LossMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["lambda".to_string()];
    header.extend(matrix.grid().values().iter().map(|&v| fmt_f64(v)));
    w.write_record(&header)?;
    for (i, row) in matrix.rows().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|&v| fmt_f64(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_loss_matrix(path: &Path, matrix: &LossMatrix) -> Result<()> {
    write_loss_matrix(BufWriter::new(File::create(path)?), matrix)
}

/// Parse a loss matrix. `bound` is the caller's loss bound; entries outside
/// `[0, bound]` are rejected with their location.
pub fn parse_loss_matrix<R: Read>(input: R, bound: f64, path: &Path) -> Result<LossMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or_else(|| parse_error(path, 1, "empty file"))??;
    if header.get(0) != Some("lambda") {
        return Err(parse_error(path, 1, "header must start with `lambda`"));
    }
    let lambdas = header
        .iter()
        .skip(1)
        .enumerate()
        .map(|(j, s)| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| parse_error(path, 1, format!("grid value {} is not a number: `{s}`", j + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = Grid::new(lambdas).map_err(|e| parse_error(path, 1, e.to_string()))?;
    let m = grid.len();

    let mut entries = Vec::new();
    for (row, rec) in records.enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(row as u64 + 2, |p| p.line());
        if rec.len() != m + 1 {
            return Err(parse_error(
                path,
                line,
                format!("expected {} fields, found {}", m + 1, rec.len()),
            ));
        }
        for (j, field) in rec.iter().skip(1).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                parse_error(path, line, format!("column {}: `{field}` is not a number", j + 1))
            })?;
            if !(0.0..=bound).contains(&v) {
                return Err(Error::LossOutOfRange {
                    row,
                    column: j,
                    value: v,
                    bound,
                });
            }
            entries.push(v);
        }
    }
    if entries.is_empty() {
        return Err(parse_error(path, 2, "no data rows"));
    }
    LossMatrix::from_flat(grid, bound, entries)
}

pub fn read_loss_matrix(path: &Path, bound: f64) -> Result<LossMatrix> {
    parse_loss_matrix(File::open(path)?, bound, path)
}

pub fn write_true_curve<W: Write>(out: W, truth: &TrueCurve) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda", "risk", "estimated"])?;
    for (&l, &r) in truth.curve.grid().values().iter().zip(truth.curve.values()) {
        w.write_record([fmt_f64(l), fmt_f64(r), truth.estimated.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_count_records(path: &Path) -> Result<Vec<CountRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let expected = ["sample_id", "lambda_index", "n_matched", "n_gt", "set_size"];
    let headers = reader.headers()?.clone();
    if headers.iter().map(str::trim).ne(expected) {
        return Err(parse_error(
            path,
            1,
            format!("header must be `{}`", expected.join(",")),
        ));
    }
    reader
        .deserialize()
        .enumerate()
        .map(|(i, rec)| rec.map_err(|e| parse_error(path, i as u64 + 2, e.to_string())))
        .collect()
}

pub const RESULTS_HEADER: [&str; 8] = [
    "method",
    "repetition",
    "selected_index",
    "selected_lambda",
    "effective_level",
    "feasible",
    "test_risk",
    "set_size",
];

pub fn write_results<W: Write>(out: W, records: &[Record]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in records {
        w.write_record([
            r.method.clone(),
            r.repetition.to_string(),
            r.selected_index.to_string(),
            fmt_f64(r.selected_lambda),
            fmt_f64(r.effective_level),
            r.feasible.to_string(),
            fmt_f64(r.test_risk),
            r.set_size.map(fmt_f64).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path() -> &'static Path {
        Path::new("mem.csv")
    }

    #[test]
    fn matrix_round_trip_is_exact() {
        let grid = Grid::new(vec![0.0, 0.1, 1.0 / 3.0]).unwrap();
        let m = LossMatrix::from_rows(
            grid,
            1.0,
            vec![vec![0.1, 2.0f64.sqrt() / 2.0, 1e-300], vec![1.0, 0.0, 0.3]],
        )
        .unwrap();
        let mut buf = vec![];
        write_loss_matrix(&mut buf, &m).unwrap();
        let back = parse_loss_matrix(buf.as_slice(), 1.0, path()).unwrap();
        assert_eq!(back, m);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("lambda,0.0000000000000000e0,1.0000000000000001e-1,"));
    }

    #[test]
    fn out_of_range_reports_cell() {
        let text = "lambda,0,1\n0,0.5,0.2\n1,0.1,1.5\n";
        match parse_loss_matrix(text.as_bytes(), 1.0, path()) {
            Err(Error::LossOutOfRange { row, column, value, .. }) => {
                assert_eq!((row, column, value), (1, 1, 1.5))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_inputs() {
        for (text, line) in [
            ("lambda,0,1\n0,0.5\n", 2),
            ("lambda,0,1\n0,0.5,x\n", 2),
            ("lam,0,1\n0,0.5,0.1\n", 1),
            ("lambda,1,0\n0,0.5,0.1\n", 1),
            ("lambda,0,1\n", 2),
        ] {
            match parse_loss_matrix(text.as_bytes(), 1.0, path()) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }
}
