//! Matrix file formats.
//!
//! CSV: one line per row, comma-separated decimal floats. JSON:
//! `{"n": 3, "entries": [[...], ...]}`. Both are row-major.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{AppraisalMatrix, DIAGONAL_TOL};

#[derive(Debug, Serialize, Deserialize)]
struct MatrixJson {
    n: usize,
    entries: Vec<Vec<f64>>,
}

fn from_rows(rows: Vec<Vec<f64>>) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Empty);
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(Error::Parse(format!(
                "row {} has {} entries, expected {}",
                i + 1,
                r.len(),
                n
            )));
        }
    }
    for (i, r) in rows.iter().enumerate() {
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: j });
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn parse_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|e| {
                    Error::Parse(format!("line {}: {:?}: {}", lineno + 1, tok.trim(), e))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    from_rows(rows)
}

pub fn parse_json(text: &str) -> Result<DMatrix<f64>> {
    let doc: MatrixJson = serde_json::from_str(text)?;
    if doc.entries.len() != doc.n {
        return Err(Error::Parse(format!(
            "declared n = {} but {} rows given",
            doc.n,
            doc.entries.len()
        )));
    }
    from_rows(doc.entries)
}

pub fn to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{:e}", m[(i, j)]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn to_json(m: &DMatrix<f64>) -> String {
    let doc = MatrixJson {
        n: m.nrows(),
        entries: (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect(),
    };
    serde_json::to_string(&doc).expect("matrix serializes")
}

/// Reads a full matrix, choosing the format by extension (`.json` or CSV).
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    let is_json = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("json"))
        .unwrap_or(false);
    if is_json {
        parse_json(&text)
    } else {
        parse_csv(&text)
    }
}

/// Reads a zero-diagonal matrix; diagonals above 1e-12 are rejected.
pub fn read_appraisal(path: &Path) -> Result<AppraisalMatrix> {
    let m = read_matrix(path)?;
    for i in 0..m.nrows().min(m.ncols()) {
        if m[(i, i)].abs() > DIAGONAL_TOL {
            return Err(Error::NonzeroDiagonal {
                index: i,
                value: m[(i, i)],
            });
        }
    }
    AppraisalMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_entries_rejected() {
        assert!(matches!(
            parse_csv("0,nan\n1,0\n"),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        assert!(matches!(
            parse_csv("0,1\ninf,0\n"),
            Err(Error::NonFinite { row: 1, col: 0 })
        ));
    }

    #[test]
    fn csv_and_json_agree() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 1.5, -2.0, 0.25, 0.0, 3.0, -1.0, 1e-3, 0.0]);
        assert_eq!(parse_csv(&to_csv(&m)).unwrap(), m);
        assert_eq!(parse_json(&to_json(&m)).unwrap(), m);
        let text = "# comment\n0, 1\n\n1 ,0\n";
        assert_eq!(
            parse_csv(text).unwrap(),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
        );
    }

    #[test]
    fn malformed_input() {
        assert!(matches!(parse_csv("0,1\n1\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_csv("0,x\n1,0\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_csv(""), Err(Error::Empty)));
        assert!(parse_json(r#"{"n": 3, "entries": [[0,1],[1,0]]}"#).is_err());
    }

    #[test]
    fn reader_rejects_diagonal() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        std::fs::write(&p, "0,1\n1,1e-6\n").unwrap();
        assert!(matches!(
            read_appraisal(&p),
            Err(Error::NonzeroDiagonal { index: 1, .. })
        ));
        std::fs::write(&p, "1e-13,1\n1,0\n").unwrap();
        assert!(read_appraisal(&p).is_ok());
        let pj = dir.path().join("m.json");
        std::fs::write(&pj, r#"{"n":2,"entries":[[0,2],[3,0]]}"#).unwrap();
        assert_eq!(read_appraisal(&pj).unwrap().as_matrix()[(1, 0)], 3.0);
    }
}
