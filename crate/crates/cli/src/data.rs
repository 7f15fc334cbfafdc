use std::path::Path;

use spatial_sign::{Dataset, Error, Result};

/// Splits a line on commas, semicolons, tabs or runs of spaces.
fn fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else if line.contains(';') {
        line.split(';').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Parses a dense numeric matrix. Blank lines and `#` comments are skipped;
/// rows and columns in diagnostics are 1-based line and field numbers.
pub fn parse_matrix(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells = fields(line);
        if let Some(w) = width {
            if cells.len() != w {
                return Err(Error::Parse {
                    row,
                    column: cells.len().min(w) + 1,
                    message: format!("expected {w} values, found {}", cells.len()),
                });
            }
        }
        width = Some(cells.len());
        let values = cells
            .iter()
            .enumerate()
            .map(|(j, cell)| match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    row,
                    column: j + 1,
                    message: format!("'{cell}' is not a finite number"),
                }),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    Ok(rows)
}

pub fn read_dataset(path: &Path) -> Result<Dataset<f64>> {
    let text = std::fs::read_to_string(path)?;
    let rows = parse_matrix(&text)?;
    if rows.len() < 4 {
        return Err(Error::Domain(format!(
            "{} holds {} observations; the tests need at least 4",
            path.display(),
            rows.len()
        )));
    }
    Dataset::from_rows(&rows)
}

/// A flat list of numbers in any of the accepted layouts.
pub fn read_numbers(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for (j, cell) in fields(line).iter().enumerate() {
            let v = cell.parse::<f64>().map_err(|_| Error::Parse {
                row: idx + 1,
                column: j + 1,
                message: format!("'{cell}' is not a number"),
            })?;
            out.push(v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delimiters() {
        let m = parse_matrix("1,2\n3;4\n# note\n\n5 6\n7\t8\n").unwrap();
        assert_eq!(
            m,
            vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0], vec![7.0, 8.0]]
        );
    }

    #[test]
    fn bad_token_names_row_and_column() {
        match parse_matrix("1,2\n3,4\n5,x\n").unwrap_err() {
            Error::Parse { row, column, .. } => assert_eq!((row, column), (3, 2)),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn ragged_row() {
        match parse_matrix("1,2\n3,4,5\n").unwrap_err() {
            Error::Parse { row, .. } => assert_eq!(row, 2),
            e => panic!("{e}"),
        }
    }
}
