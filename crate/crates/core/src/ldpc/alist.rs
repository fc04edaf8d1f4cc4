//! Reading and writing parity-check matrices in the alist text layout.
//!
//! ```text
//! n m
//! max_col_weight max_row_weight
//! col_weight_1 ... col_weight_n
//! row_weight_1 ... row_weight_m
//! <one line per column: 1-based row indices, zero padded>
//! <one line per row: 1-based column indices, zero padded>
//! ```
//!
//! Zero padding is optional on input. Column and row lists must describe the
//! same matrix.

use std::fmt::Write as _;

use crate::error::{BerdError, Result};

/// Sparse binary matrix as 0-based row supports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseBinary {
    pub n_cols: usize,
    pub row_supports: Vec<Vec<usize>>,
}

impl SparseBinary {
    pub fn n_rows(&self) -> usize {
        self.row_supports.len()
    }

    pub fn col_supports(&self) -> Vec<Vec<usize>> {
        let mut cols = vec![Vec::new(); self.n_cols];
        for (r, row) in self.row_supports.iter().enumerate() {
            for &c in row {
                cols[c].push(r);
            }
        }
        cols
    }
}

pub fn parse(text: &str) -> Result<SparseBinary> {
    let err = |d: String| BerdError::parse("alist", d);
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let mut numbers = |what: &str| -> Result<Vec<usize>> {
        let line = lines.next().ok_or_else(|| err(format!("missing {what}")))?;
        line.split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|e| err(format!("{what}: `{t}`: {e}")))
            })
            .collect()
    };

    let dims = numbers("dimensions")?;
    let [n, m] = dims[..] else {
        return Err(err(format!("dimension line has {} fields", dims.len())));
    };
    let max_w = numbers("max weights")?;
    if max_w.len() != 2 {
        return Err(err("max weight line needs two fields".into()));
    }
    let col_w = numbers("column weights")?;
    let row_w = numbers("row weights")?;
    if col_w.len() != n || row_w.len() != m {
        return Err(err(format!(
            "weight lists have {}/{} entries for a {m}x{n} matrix",
            col_w.len(),
            row_w.len()
        )));
    }

    let mut from_cols = vec![Vec::new(); m];
    for (c, &w) in col_w.iter().enumerate() {
        let idx: Vec<usize> = numbers("column list")?
            .into_iter()
            .filter(|&i| i != 0)
            .collect();
        if idx.len() != w {
            return Err(err(format!(
                "column {} lists {} rows, weight {w}",
                c + 1,
                idx.len()
            )));
        }
        for i in idx {
            if i > m {
                return Err(err(format!("row index {i} exceeds {m}")));
            }
            from_cols[i - 1].push(c);
        }
    }
    let mut row_supports = Vec::with_capacity(m);
    for (r, &w) in row_w.iter().enumerate() {
        let mut idx: Vec<usize> = numbers("row list")?
            .into_iter()
            .filter(|&i| i != 0)
            .map(|i| i - 1)
            .collect();
        if idx.len() != w {
            return Err(err(format!(
                "row {} lists {} columns, weight {w}",
                r + 1,
                idx.len()
            )));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(err(format!("column index {} exceeds {n}", bad + 1)));
        }
        idx.sort_unstable();
        if idx.windows(2).any(|p| p[0] == p[1]) {
            return Err(err(format!("row {} repeats a column", r + 1)));
        }
        let mut check = from_cols[r].clone();
        check.sort_unstable();
        if check != idx {
            return Err(err(format!(
                "row {} disagrees with the column lists",
                r + 1
            )));
        }
        row_supports.push(idx);
    }
    Ok(SparseBinary {
        n_cols: n,
        row_supports,
    })
}

pub fn write(matrix: &SparseBinary) -> String {
    let cols = matrix.col_supports();
    let max_col = cols.iter().map(Vec::len).max().unwrap_or(0);
    let max_row = matrix.row_supports.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = String::new();
    let join =
        |v: &mut dyn Iterator<Item = usize>| v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let _ = writeln!(out, "{} {}", matrix.n_cols, matrix.n_rows());
    let _ = writeln!(out, "{max_col} {max_row}");
    let _ = writeln!(out, "{}", join(&mut cols.iter().map(Vec::len)));
    let _ = writeln!(
        out,
        "{}",
        join(&mut matrix.row_supports.iter().map(Vec::len))
    );
    for col in &cols {
        let mut it = col
            .iter()
            .map(|r| r + 1)
            .chain(std::iter::repeat(0).take(max_col - col.len()));
        let _ = writeln!(out, "{}", join(&mut it));
    }
    for row in &matrix.row_supports {
        let mut it = row
            .iter()
            .map(|c| c + 1)
            .chain(std::iter::repeat(0).take(max_row - row.len()));
        let _ = writeln!(out, "{}", join(&mut it));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const HAMMING: &str = "7 3
3 4
2 2 2 3 1 1 1
4 4 4
1 2 0
1 3 0
2 3 0
1 2 3
1 0 0
2 0 0
3 0 0
1 2 4 5
1 3 4 6
2 3 4 7
";

    #[test]
    fn parses_padded_hamming() {
        let m = parse(HAMMING).unwrap();
        assert_eq!(m.n_cols, 7);
        assert_eq!(m.row_supports[0], vec![0, 1, 3, 4]);
        assert_eq!(write(&m), HAMMING);
    }

    #[test]
    fn accepts_unpadded_lists() {
        let unpadded = HAMMING.replace(" 0", "");
        assert_eq!(parse(&unpadded).unwrap(), parse(HAMMING).unwrap());
    }

    #[test]
    fn rejects_inconsistent_lists() {
        let bad = HAMMING.replace("1 2 4 5", "1 2 4 6");
        assert!(parse(&bad).is_err());
        assert!(parse("7").is_err());
        assert!(parse("").is_err());
    }
}
