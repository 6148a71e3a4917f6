//! Parallel usage matrix of a pivot token and its Hamming distances.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{Parallel, NULL_FORM};
use crate::corpus::VerseId;
use crate::{Error, Result};

/// One occurrence of the pivot token: verse plus token index in the verse.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowId {
    pub verse: VerseId,
    pub pivot_index: usize,
}

impl RowId {
    pub fn parse(s: &str) -> Result<Self> {
        let (v, i) = s
            .rsplit_once('#')
            .ok_or_else(|| Error::Data(format!("row id {s:?} lacks '#index'")))?;
        Ok(RowId {
            verse: VerseId::parse(v)?,
            pivot_index: i
                .parse()
                .map_err(|_| Error::Data(format!("bad row index in {s:?}")))?,
        })
    }
}

impl fmt::Display for RowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.verse, self.pivot_index)
    }
}

/// Code 0 is the NULL marker; other codes index the column's form list.
pub type Cell = u32;
pub const NULL_CELL: Cell = 0;

/// Rows are pivot usage points, columns are doculects, cells are aligned
/// forms or NULL.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageMatrix {
    rows: Vec<RowId>,
    columns: Vec<String>,
    /// Row-major cell codes.
    cells: Vec<Cell>,
    /// Per column: forms for codes 1.. in first-seen order.
    forms: Vec<Vec<String>>,
}

impl UsageMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn rows(&self) -> &[RowId] {
        &self.rows
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn column_index(&self, iso: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == iso)
    }

    pub fn code(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.columns.len() + col]
    }

    pub fn row_codes(&self, row: usize) -> &[Cell] {
        let w = self.columns.len();
        &self.cells[row * w..(row + 1) * w]
    }

    /// `None` for NULL.
    pub fn form(&self, row: usize, col: usize) -> Option<&str> {
        match self.code(row, col) {
            NULL_CELL => None,
            c => Some(self.forms[col][c as usize - 1].as_str()),
        }
    }

    /// Per-row labels for one doculect, NULL rendered as [`NULL_FORM`].
    pub fn labels(&self, col: usize) -> Vec<String> {
        (0..self.n_rows())
            .map(|r| self.form(r, col).unwrap_or(NULL_FORM).to_string())
            .collect()
    }

    /// Builds a matrix from explicit string cells (`None` = NULL).
    pub fn from_cells(
        rows: Vec<RowId>,
        columns: Vec<String>,
        cells: &[Vec<Option<String>>],
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        if let Some(dup) = rows.iter().find(|r| !seen.insert(*r)) {
            return Err(Error::Data(format!("duplicate row id {dup}")));
        }
        if cells.len() != rows.len() || cells.iter().any(|r| r.len() != columns.len()) {
            return Err(Error::Data(
                "cell grid does not match rows × columns".into(),
            ));
        }
        let mut forms: Vec<Vec<String>> = vec![Vec::new(); columns.len()];
        let mut index: Vec<HashMap<String, Cell>> = vec![HashMap::new(); columns.len()];
        let mut codes = Vec::with_capacity(rows.len() * columns.len());
        for row in cells {
            for (c, cell) in row.iter().enumerate() {
                let code = match cell {
                    None => NULL_CELL,
                    Some(f) => *index[c].entry(f.clone()).or_insert_with(|| {
                        forms[c].push(f.clone());
                        forms[c].len() as Cell
                    }),
                };
                codes.push(code);
            }
        }
        Ok(UsageMatrix {
            rows,
            columns,
            cells: codes,
            forms,
        })
    }

    pub fn to_tsv(&self, header: &str) -> String {
        let mut out = String::new();
        for line in header.lines() {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("row-id");
        for c in &self.columns {
            out.push('\t');
            out.push_str(c);
        }
        out.push('\n');
        for (r, id) in self.rows.iter().enumerate() {
            let _ = write!(out, "{id}");
            for c in 0..self.n_cols() {
                out.push('\t');
                out.push_str(self.form(r, c).unwrap_or(NULL_FORM));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Data("empty matrix TSV".into()))?;
        let columns: Vec<String> = header.split('\t').skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        let mut cells = Vec::new();
        for line in lines {
            let mut parts = line.split('\t');
            rows.push(RowId::parse(parts.next().unwrap_or_default())?);
            cells.push(
                parts
                    .map(|c| (c != NULL_FORM).then(|| c.to_string()))
                    .collect::<Vec<_>>(),
            );
        }
        UsageMatrix::from_cells(rows, columns, &cells)
    }
}

/// Assembles the matrix from per-doculect parallels. Occurrences missing from
/// a doculect's list are NULL.
pub fn build_matrix(
    parallels: &BTreeMap<String, Vec<Parallel>>,
    rows: &[RowId],
) -> Result<UsageMatrix> {
    let columns: Vec<String> = parallels.keys().cloned().collect();
    let lookup: Vec<HashMap<(&VerseId, usize), &Option<String>>> = parallels
        .values()
        .map(|ps| {
            ps.iter()
                .map(|p| ((&p.verse, p.pivot_index), &p.form))
                .collect()
        })
        .collect();
    let cells: Vec<Vec<Option<String>>> = rows
        .iter()
        .map(|r| {
            lookup
                .iter()
                .map(|m| m.get(&(&r.verse, r.pivot_index)).and_then(|f| (*f).clone()))
                .collect()
        })
        .collect();
    UsageMatrix::from_cells(rows.to_vec(), columns, &cells)
}

/// Symmetric distance matrix stored as a packed upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    packed: Vec<u16>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        // row i of the strict upper triangle starts after sum_{r<i} (n-1-r)
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> u16 {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => 0,
            Less => self.packed[self.offset(i, j)],
            Greater => self.packed[self.offset(j, i)],
        }
    }

    /// From a full square matrix; used for tests and small inputs.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> u16) -> Self {
        let mut packed = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                packed.push(f(i, j));
            }
        }
        DistanceMatrix { n, packed }
    }
}

/// Pairwise Hamming distances between rows. NULL is compared like any other
/// value. Rows are processed in parallel blocks; the result is independent of
/// scheduling.
pub fn hamming(m: &UsageMatrix) -> Result<DistanceMatrix> {
    if m.n_rows() == 0 {
        return Err(Error::InvalidArgument("empty usage matrix".into()));
    }
    if m.n_cols() > u16::MAX as usize {
        return Err(Error::InvalidArgument(
            "too many doculects for 16-bit distances".into(),
        ));
    }
    let n = m.n_rows();
    let rows: Vec<Vec<u16>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = m.row_codes(i);
            (i + 1..n)
                .map(|j| a.iter().zip(m.row_codes(j)).filter(|(x, y)| x != y).count() as u16)
                .collect()
        })
        .collect();
    Ok(DistanceMatrix {
        n,
        packed: rows.concat(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: &str) -> RowId {
        RowId {
            verse: VerseId::parse(v).unwrap(),
            pivot_index: 0,
        }
    }

    fn sample() -> UsageMatrix {
        let cols = ["eng", "mri", "por", "fin", "kaz", "kor"]
            .map(String::from)
            .to_vec();
        let cells = vec![
            ["when", "no", "quando", "kun", "қашан", "때에"]
                .map(|s| Some(s.to_string()))
                .to_vec(),
            ["when", "ka", "quando", "jolloin", "кейін", "때에"]
                .map(|s| Some(s.to_string()))
                .to_vec(),
        ];
        UsageMatrix::from_cells(vec![row("MAT:1:1"), row("MAT:1:2")], cols, &cells).unwrap()
    }

    #[test]
    fn sample_rows_differ_in_three_columns() {
        let m = sample();
        let d = hamming(&m).unwrap();
        assert_eq!(d.get(0, 1), 3);
        let differing: Vec<_> = (0..m.n_cols())
            .filter(|&c| m.form(0, c) != m.form(1, c))
            .map(|c| m.columns()[c].as_str())
            .collect();
        assert_eq!(differing, ["mri", "fin", "kaz"]);
    }

    #[test]
    fn missing_doculect_is_null_column() {
        let rows = vec![row("MAT:1:1"), row("MAT:1:2")];
        let parallels = BTreeMap::from([
            (
                "fin".to_string(),
                vec![Parallel {
                    verse: rows[0].verse.clone(),
                    pivot_index: 0,
                    form: Some("kun".into()),
                }],
            ),
            ("xyz".to_string(), vec![]),
        ]);
        let m = build_matrix(&parallels, &rows).unwrap();
        let c = m.column_index("xyz").unwrap();
        assert!((0..2).all(|r| m.form(r, c).is_none()));
        assert_eq!(m.form(1, m.column_index("fin").unwrap()), None);
    }

    #[test]
    fn duplicate_rows_rejected() {
        let rows = vec![row("MAT:1:1"), row("MAT:1:1")];
        assert!(build_matrix(&BTreeMap::new(), &rows).is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let m = sample();
        let back = UsageMatrix::from_tsv(&m.to_tsv("config=abc")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn identical_rows_zero_distance() {
        let cells = vec![vec![Some("a".to_string()), None]; 3];
        let m = UsageMatrix::from_cells(
            vec![row("MAT:1:1"), row("MAT:1:2"), row("MAT:1:3")],
            vec!["x".into(), "y".into()],
            &cells,
        )
        .unwrap();
        let d = hamming(&m).unwrap();
        assert_eq!(d.get(0, 2), 0);
        assert_eq!(d.get(2, 2), 0);
    }

    #[test]
    fn empty_matrix_errors() {
        let m = UsageMatrix::from_cells(vec![], vec!["x".into()], &[]).unwrap();
        assert!(hamming(&m).is_err());
    }
}
