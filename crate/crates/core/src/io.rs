//! MatrixMarket and CSV readers/writers, and problem bundle export.
//!
//! Supported MatrixMarket headers: `matrix coordinate real|integer general|symmetric`
//! and `matrix array real|integer general|symmetric`.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::error::{DsmError, Result};
use crate::problems::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> DsmError {
    DsmError::Parse(format!("MatrixMarket line {line}: {msg}"))
}

pub fn read_matrix_market<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| DsmError::Parse("empty MatrixMarket input".into()))?;
    let header = header?;
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(1, format!("unsupported header '{header}'")));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(parse_err(1, format!("unsupported format '{other}'"))),
    };
    if tokens[3] != "real" && tokens[3] != "integer" && tokens[3] != "double" {
        return Err(parse_err(1, format!("unsupported field '{}'", tokens[3])));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut body = lines.filter_map(|(i, line)| match line {
        Ok(l) => {
            let t = l.trim().to_string();
            if t.is_empty() || t.starts_with('%') {
                None
            } else {
                Some(Ok((i + 1, t)))
            }
        }
        Err(e) => Some(Err(DsmError::from(e))),
    });
    let (size_line, size) = body
        .next()
        .ok_or_else(|| DsmError::Parse("missing MatrixMarket size line".into()))??;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| parse_err(size_line, format!("bad size '{t}'")))
        })
        .collect::<Result<_>>()?;

    let parse_value = |line: usize, t: &str| -> Result<f64> {
        t.parse::<f64>()
            .map_err(|_| parse_err(line, format!("bad value '{t}'")))
    };

    match layout {
        Layout::Coordinate => {
            if dims.len() != 3 {
                return Err(parse_err(
                    size_line,
                    "coordinate size line needs rows cols nnz",
                ));
            }
            let (rows, cols, nnz) = (dims[0], dims[1], dims[2]);
            let mut m = DMatrix::zeros(rows, cols);
            let mut count = 0;
            for entry in body {
                let (line, text) = entry?;
                let parts: Vec<&str> = text.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(parse_err(line, "expected 'row col value'"));
                }
                let i: usize = parts[0]
                    .parse()
                    .map_err(|_| parse_err(line, "bad row index"))?;
                let j: usize = parts[1]
                    .parse()
                    .map_err(|_| parse_err(line, "bad column index"))?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(parse_err(line, format!("index ({i}, {j}) out of range")));
                }
                let v = parse_value(line, parts[2])?;
                m[(i - 1, j - 1)] += v;
                if symmetric && i != j {
                    m[(j - 1, i - 1)] += v;
                }
                count += 1;
            }
            if count != nnz {
                return Err(DsmError::Parse(format!(
                    "expected {nnz} entries, found {count}"
                )));
            }
            Ok(m)
        }
        Layout::Array => {
            if dims.len() != 2 {
                return Err(parse_err(size_line, "array size line needs rows cols"));
            }
            let (rows, cols) = (dims[0], dims[1]);
            let mut values = Vec::with_capacity(rows * cols);
            for entry in body {
                let (line, text) = entry?;
                for t in text.split_whitespace() {
                    values.push(parse_value(line, t)?);
                }
            }
            if symmetric {
                if rows != cols {
                    return Err(DsmError::Parse("symmetric array must be square".into()));
                }
                let expected = rows * (rows + 1) / 2;
                if values.len() != expected {
                    return Err(DsmError::Parse(format!(
                        "expected {expected} lower-triangle values, found {}",
                        values.len()
                    )));
                }
                let mut m = DMatrix::zeros(rows, cols);
                let mut it = values.into_iter();
                for j in 0..cols {
                    for i in j..rows {
                        let v = it.next().expect("counted above");
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                    }
                }
                Ok(m)
            } else {
                if values.len() != rows * cols {
                    return Err(DsmError::Parse(format!(
                        "expected {} values, found {}",
                        rows * cols,
                        values.len()
                    )));
                }
                Ok(DMatrix::from_column_slice(rows, cols, &values))
            }
        }
    }
}

/// Writes in dense `array real general` layout (column-major).
pub fn write_matrix_market<W: Write>(mut writer: W, m: &DMatrix<f64>) -> Result<()> {
    writeln!(writer, "%%MatrixMarket matrix array real general")?;
    writeln!(writer, "{} {}", m.nrows(), m.ncols())?;
    for v in m.iter() {
        writeln!(writer, "{}", format_float(*v))?;
    }
    Ok(())
}

/// Plain CSV: one matrix row per line, comma-separated, no header.
pub fn read_csv_matrix<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| DsmError::Parse(format!("CSV: {e}")))?;
        let row = record
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| DsmError::Parse(format!("CSV row {}: bad value '{t}'", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let n_rows = rows.len();
    let n_cols = rows.first().map_or(0, Vec::len);
    if n_rows == 0 || n_cols == 0 {
        return Err(DsmError::Parse("CSV matrix is empty".into()));
    }
    let flat: Vec<f64> = rows.concat();
    Ok(DMatrix::from_row_slice(n_rows, n_cols, &flat))
}

pub fn write_csv_matrix<W: Write>(writer: W, m: &DMatrix<f64>) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    for row in m.row_iter() {
        wtr.write_record(row.iter().map(|v| format_float(*v)))
            .map_err(|e| DsmError::Parse(format!("CSV: {e}")))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a vector stored either as one column or as a single row.
pub fn read_csv_vector<R: Read>(reader: R) -> Result<DVector<f64>> {
    let m = read_csv_matrix(reader)?;
    match m.shape() {
        (_, 1) => Ok(m.column(0).into_owned()),
        (1, _) => Ok(m.row(0).transpose()),
        (r, c) => Err(DsmError::Parse(format!(
            "expected a vector, got a {r}x{c} table"
        ))),
    }
}

pub fn write_csv_vector<W: Write>(writer: W, v: &DVector<f64>) -> Result<()> {
    write_csv_matrix(
        writer,
        &DMatrix::from_column_slice(v.len(), 1, v.as_slice()),
    )
}

/// Loads a matrix from `.mtx` (MatrixMarket) or any other extension as CSV.
pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let file = fs::File::open(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("mtx") => read_matrix_market(file),
        _ => read_csv_matrix(file),
    }
}

/// `%.16e`: 17 significant digits, round-trip exact.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `A.mtx`, `A.csv`, `f.csv`, `y.csv` and `meta.txt` into `dir`.
/// `extra` lines (e.g. seeds, generator constants) are appended to the metadata.
pub fn export_problem(
    problem: &ProblemInstance,
    dir: &Path,
    extra: &[(String, String)],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let a = problem.operator().matrix();
    let paths: Vec<PathBuf> = ["A.mtx", "A.csv", "f.csv", "y.csv", "meta.txt"]
        .iter()
        .map(|name| dir.join(name))
        .collect();
    write_matrix_market(fs::File::create(&paths[0])?, a)?;
    write_csv_matrix(fs::File::create(&paths[1])?, a)?;
    write_csv_vector(fs::File::create(&paths[2])?, problem.f())?;
    write_csv_vector(fs::File::create(&paths[3])?, problem.y())?;
    let mut meta = fs::File::create(&paths[4])?;
    writeln!(meta, "label={}", problem.label())?;
    writeln!(meta, "rows={}", a.nrows())?;
    writeln!(meta, "cols={}", a.ncols())?;
    writeln!(meta, "rank={}", problem.fact().rank())?;
    writeln!(
        meta,
        "rank_tolerance={}",
        format_float(problem.fact().rank_tolerance())
    )?;
    writeln!(
        meta,
        "sigma_max={}",
        format_float(problem.fact().sigma_max())
    )?;
    if let Some(src) = problem.source() {
        writeln!(meta, "source_gamma={}", format_float(src.gamma))?;
        writeln!(meta, "source_v_norm={}", format_float(src.v_norm))?;
    }
    for (key, value) in extra {
        writeln!(meta, "{key}={value}")?;
    }
    Ok(paths)
}
