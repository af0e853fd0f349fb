use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::idfrit::{ExperimentRecord, IdfritError};
use crate::lti::Signal;

use super::CliError;

/// 17 significant digits: parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a CSV with a header row; each row is already formatted.
pub fn write_rows(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record(header).map_err(|e| CliError::io(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Index column `k` followed by one float column per series.
pub fn write_columns(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<(), CliError> {
    let n = columns.iter().map(|c| c.len()).min().unwrap_or(0);
    let rows = (0..n).map(|k| {
        let mut row = vec![k.to_string()];
        row.extend(columns.iter().map(|c| fmt_f64(c[k])));
        row
    });
    let mut full = vec!["k"];
    full.extend_from_slice(header);
    write_rows(path, &full, rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_data(path: &Path, data: &ExperimentRecord) -> Result<(), CliError> {
    let t = data.r0().times();
    write_columns(
        path,
        &["t", "r0", "u0", "y0"],
        &[&t, data.r0().samples(), data.u0().samples(), data.y0().samples()],
    )
}

/// Reads a `k, r0, u0, y0` CSV (optional `t` column) sampled at `ts`.
pub fn read_data(path: &Path, ts: f64) -> Result<ExperimentRecord, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_data(&text, ts)
}

pub fn parse_data(text: &str, ts: f64) -> Result<ExperimentRecord, CliError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| CliError::Data(format!("data: {e}")))?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (Some(ik), Some(ir), Some(iu), Some(iy)) = (col("k"), col("r0"), col("u0"), col("y0")) else {
        return Err(CliError::Data("data: header must contain k, r0, u0, y0".into()));
    };
    let it = col("t");

    let (mut r0, mut u0, mut y0) = (Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("data: {e}")))?;
        let line = row + 2;
        let num = |i: usize, name: &str| -> Result<f64, CliError> {
            let v: f64 = rec[i]
                .parse()
                .map_err(|_| CliError::Data(format!("data line {line}: bad {name} value '{}'", &rec[i])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::Data(format!("data line {line}: non-finite {name}")))
            }
        };
        let k: usize =
            rec[ik].parse().map_err(|_| CliError::Data(format!("data line {line}: bad k '{}'", &rec[ik])))?;
        if k != row {
            return Err(CliError::Data(format!("data line {line}: expected k = {row}, got {k}")));
        }
        if let Some(it) = it {
            let t = num(it, "t")?;
            let expected = row as f64 * ts;
            if (t - expected).abs() > 1e-9 * (1.0 + expected.abs()) {
                return Err(CliError::SampleTime(format!(
                    "data line {line}: t = {t} does not match sample_time {ts} (expected {expected})"
                )));
            }
        }
        r0.push(num(ir, "r0")?);
        u0.push(num(iu, "u0")?);
        y0.push(num(iy, "y0")?);
    }
    if r0.is_empty() {
        return Err(CliError::Data("data: no rows".into()));
    }
    let sig = |v: Vec<f64>| Signal::new(v, ts).map_err(|e| CliError::Data(format!("data: {e}")));
    ExperimentRecord::new(sig(r0)?, sig(u0)?, sig(y0)?).map_err(|e| match e {
        IdfritError::ReferenceHeadZero => CliError::Assumption(e.to_string()),
        other => CliError::Data(format!("data: {other}")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn data_round_trip() {
        let ts = 0.1;
        let r = Signal::step(4, ts).unwrap();
        let u = Signal::new(vec![1.0 / 3.0, -0.25, 1e-17, 2.0], ts).unwrap();
        let y = Signal::new(vec![0.0, 0.1, 0.7, std::f64::consts::PI], ts).unwrap();
        let rec = ExperimentRecord::new(r, u, y).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_data(&path, &rec).unwrap();
        assert_eq!(read_data(&path, ts).unwrap(), rec);
    }

    #[test]
    fn data_errors_map_to_kinds() {
        let ok = "k,r0,u0,y0\n0,1,0.5,0\n1,1,0.4,0.1\n";
        assert!(parse_data(ok, 0.1).is_ok());
        let head_zero = "k,r0,u0,y0\n0,0,0.5,0\n1,1,0.4,0.1\n";
        match parse_data(head_zero, 0.1) {
            Err(CliError::Assumption(msg)) => assert!(msg.contains("reference head must be nonzero")),
            other => panic!("{other:?}"),
        }
        let ragged = "k,r0,u0,y0\n0,1,0.5,0\n1,1,0.4\n";
        assert!(matches!(parse_data(ragged, 0.1), Err(CliError::Data(_))));
        let missing = "k,r0,y0\n0,1,0\n";
        assert!(matches!(parse_data(missing, 0.1), Err(CliError::Data(_))));
        let skipped = "k,r0,u0,y0\n0,1,0.5,0\n2,1,0.4,0.1\n";
        assert!(matches!(parse_data(skipped, 0.1), Err(CliError::Data(_))));
        let nan = "k,r0,u0,y0\n0,1,NaN,0\n";
        assert!(matches!(parse_data(nan, 0.1), Err(CliError::Data(_))));
        let wrong_rate = "k,t,r0,u0,y0\n0,0,1,0.5,0\n1,0.05,1,0.4,0.1\n";
        assert!(matches!(parse_data(wrong_rate, 0.1), Err(CliError::SampleTime(_))));
    }
}
