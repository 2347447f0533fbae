//! CSV readers and writers for datasets, coefficient vectors and matrices.
//!
//! Datasets carry a header with `y` first and `x_1..x_p` after it. Vectors
//! are a single column, matrices are plain numeric grids; for both, a first
//! row that does not parse as numbers is taken as a header and skipped.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimators::Dataset;

fn parse_row(record: &csv::StringRecord, line: usize) -> Result<Vec<f64>> {
    record
        .iter()
        .map(|field| {
            field
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {line}: `{field}` is not a number")))
        })
        .collect()
}

/// Numeric rows of a CSV, with an optional leading header detected by
/// parse failure. Returns `(header, rows)`.
fn read_grid(path: &Path, header_required: bool) -> Result<(Option<Vec<String>>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut header = None;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if i == 0 {
            let parsed = parse_row(&record, 1);
            if header_required || parsed.is_err() {
                header = Some(record.iter().map(str::to_owned).collect());
                continue;
            }
            rows.push(parsed?);
            continue;
        }
        rows.push(parse_row(&record, i + 1)?);
    }
    if let Some(first) = rows.first() {
        let width = first.len();
        if let Some((k, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
            return Err(Error::Parse(format!("{}: ragged row {}", path.display(), k + 1)));
        }
    }
    Ok((header, rows))
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let m = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(m, p, |i, j| rows[i][j])
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let (_, rows) = read_grid(path, false)?;
    if rows.is_empty() {
        return Err(Error::Parse(format!("{}: no numeric rows", path.display())));
    }
    Ok(to_matrix(&rows))
}

pub fn read_vector_csv(path: impl AsRef<Path>) -> Result<DVector<f64>> {
    let path = path.as_ref();
    let m = read_matrix_csv(path)?;
    if m.ncols() != 1 {
        return Err(Error::Parse(format!("{}: expected one column, found {}", path.display(), m.ncols())));
    }
    Ok(m.column(0).into_owned())
}

/// Header row required; first column is `y`.
pub fn read_dataset_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let (_, rows) = read_grid(path, true)?;
    let grid = to_matrix(&rows);
    if grid.ncols() < 2 {
        return Err(Error::Parse(format!("{}: need a y column and at least one x column", path.display())));
    }
    let y = grid.column(0).into_owned();
    let x = grid.columns(1, grid.ncols() - 1).into_owned();
    Dataset::new(x, y)
}

/// Returns matrix (rows = periods) and asset names from the header.
pub fn read_returns_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, DMatrix<f64>)> {
    let path = path.as_ref();
    let (header, rows) = read_grid(path, true)?;
    let names = header.unwrap_or_default();
    let m = to_matrix(&rows);
    if m.nrows() == 0 || m.ncols() != names.len() {
        return Err(Error::Parse(format!(
            "{}: header lists {} assets but rows have {} columns",
            path.display(),
            names.len(),
            m.ncols()
        )));
    }
    Ok((names, m))
}

pub fn write_dataset_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["y".to_string()];
    header.extend((1..=data.p()).map(|j| format!("x_{j}")));
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut row = vec![data.y()[i].to_string()];
        row.extend(data.x().row(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_vector_csv(path: impl AsRef<Path>, v: &DVector<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for x in v.iter() {
        w.write_record([x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn dataset_round_trip() {
        let f = file("y,x_1,x_2\n1.0,2.0,3.0\n4.0,5.0,6.0\n7,8,9\n");
        let d = read_dataset_csv(f.path()).unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.p(), 2);
        assert_eq!(d.y()[1], 4.0);
        assert_eq!(d.x()[(2, 1)], 9.0);

        let out = tempfile::NamedTempFile::new().unwrap();
        write_dataset_csv(out.path(), &d).unwrap();
        assert_eq!(read_dataset_csv(out.path()).unwrap(), d);
    }

    #[test]
    fn vectors_with_and_without_header() {
        let a = read_vector_csv(file("1\n2.5\n-3\n").path()).unwrap();
        let b = read_vector_csv(file("beta\n1\n2.5\n-3\n").path()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!(matches!(read_vector_csv(file("1,2\n3,4\n").path()), Err(Error::Parse(_))));
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(read_matrix_csv(file("1,2\n3,x\n").path()), Err(Error::Parse(_))));
        assert!(matches!(read_matrix_csv(file("1,2\n3\n").path()), Err(Error::Parse(_))));
        assert!(matches!(read_dataset_csv(file("y\n1\n2\n").path()), Err(Error::Parse(_))));
        assert!(matches!(read_matrix_csv("/nonexistent/file.csv"), Err(Error::Io(_))));
    }

    #[test]
    fn returns_need_matching_header() {
        let (names, m) = read_returns_csv(file("A,B\n0.1,0.2\n-0.1,0.0\n").path()).unwrap();
        assert_eq!(names, vec!["A", "B"]);
        assert_eq!(m.shape(), (2, 2));
        assert!(read_returns_csv(file("A\n0.1,0.2\n").path()).is_err());
    }
}
