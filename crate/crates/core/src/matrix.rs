//! Dense exact matrices with semantic row and column labels.

use num_traits::Zero;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{DcError, Result};
use crate::partition::{IntegerPartition, Outcome, SetPartition, Subset};
use crate::rational::{format_rational, parse_rational, to_f64, Rational};

/// What a row or column index stands for.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Outcome(Outcome),
    Subset(Subset),
    Partition(SetPartition),
    Shape(IntegerPartition),
    /// Number of ones `k` in the invariant (level) coordinates.
    Level(usize),
    Index(usize),
}

impl Label {
    pub fn kind(&self) -> &'static str {
        match self {
            Label::Outcome(_) => "outcome",
            Label::Subset(_) => "subset",
            Label::Partition(_) => "partition",
            Label::Shape(_) => "shape",
            Label::Level(_) => "level",
            Label::Index(_) => "index",
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Label::Outcome(o) => json!(o.to_string()),
            Label::Subset(s) => json!(s.elements()),
            Label::Partition(p) => json!(p.to_string()),
            Label::Shape(pi) => json!(pi.parts()),
            Label::Level(k) | Label::Index(k) => json!(k),
        }
    }

    fn from_json(kind: &str, value: &Value, n: usize) -> Result<Label> {
        let bad = || DcError::Parse(format!("bad {kind} label {value}"));
        let as_usize_list = || -> Result<Vec<usize>> {
            value
                .as_array()
                .ok_or_else(bad)?
                .iter()
                .map(|v| v.as_u64().map(|x| x as usize).ok_or_else(bad))
                .collect()
        };
        Ok(match kind {
            "outcome" => Label::Outcome(Outcome::parse(value.as_str().ok_or_else(bad)?)?),
            "subset" => Label::Subset(Subset::from_elements(n, &as_usize_list()?)?),
            "partition" => Label::Partition(SetPartition::parse(value.as_str().ok_or_else(bad)?)?),
            "shape" => Label::Shape(IntegerPartition::new(as_usize_list()?)?),
            "level" => Label::Level(value.as_u64().ok_or_else(bad)? as usize),
            "index" => Label::Index(value.as_u64().ok_or_else(bad)? as usize),
            _ => return Err(DcError::Parse(format!("unknown label kind {kind:?}"))),
        })
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::Outcome(o) => write!(f, "{o}"),
            Label::Subset(s) => write!(f, "{s}"),
            Label::Partition(p) => write!(f, "{p}"),
            Label::Shape(pi) => write!(f, "{pi}"),
            Label::Level(k) | Label::Index(k) => write!(f, "{k}"),
        }
    }
}

/// Row-major dense matrix over the rationals.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Rational>,
    row_labels: Vec<Label>,
    col_labels: Vec<Label>,
}

impl RationalMatrix {
    pub fn zeros(row_labels: Vec<Label>, col_labels: Vec<Label>) -> Self {
        let (rows, cols) = (row_labels.len(), col_labels.len());
        Self {
            rows,
            cols,
            entries: vec![Rational::zero(); rows * cols],
            row_labels,
            col_labels,
        }
    }

    /// Unlabelled matrix (index labels) from row vectors.
    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(DcError::Dimension {
                expected: cols,
                got: bad.len(),
            });
        }
        let row_labels = (0..rows.len()).map(Label::Index).collect();
        let col_labels = (0..cols).map(Label::Index).collect();
        let mut m = Self::zeros(row_labels, col_labels);
        m.entries = rows.into_iter().flatten().collect();
        Ok(m)
    }

    pub fn identity(size: usize) -> Self {
        let labels: Vec<Label> = (0..size).map(Label::Index).collect();
        let mut m = Self::zeros(labels.clone(), labels);
        for i in 0..size {
            m.entries[i * size + i] = Rational::from_integer(1.into());
        }
        m
    }

    /// Fills every entry from `f(row, col)`, in parallel over rows.
    pub fn from_fn<F>(row_labels: Vec<Label>, col_labels: Vec<Label>, f: F) -> Self
    where
        F: Fn(usize, usize) -> Rational + Sync,
    {
        let (rows, cols) = (row_labels.len(), col_labels.len());
        let entries = (0..rows)
            .into_par_iter()
            .flat_map_iter(|i| (0..cols).map(move |j| (i, j)).collect::<Vec<_>>())
            .map(|(i, j)| f(i, j))
            .collect();
        Self {
            rows,
            cols,
            entries,
            row_labels,
            col_labels,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row_labels(&self) -> &[Label] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[Label] {
        &self.col_labels
    }

    pub fn with_labels(mut self, row_labels: Vec<Label>, col_labels: Vec<Label>) -> Result<Self> {
        if row_labels.len() != self.rows {
            return Err(DcError::Dimension {
                expected: self.rows,
                got: row_labels.len(),
            });
        }
        if col_labels.len() != self.cols {
            return Err(DcError::Dimension {
                expected: self.cols,
                got: col_labels.len(),
            });
        }
        self.row_labels = row_labels;
        self.col_labels = col_labels;
        Ok(self)
    }

    pub fn get(&self, row: usize, col: usize) -> &Rational {
        &self.entries[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Rational) {
        self.entries[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[Rational] {
        &self.entries[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<Rational> {
        (0..self.rows).map(|i| self.get(i, col).clone()).collect()
    }

    pub fn row_vectors(&self) -> Vec<Vec<Rational>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn row_index(&self, label: &Label) -> Option<usize> {
        self.row_labels.iter().position(|l| l == label)
    }

    pub fn col_index(&self, label: &Label) -> Option<usize> {
        self.col_labels.iter().position(|l| l == label)
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let row_labels = rows.iter().map(|&i| self.row_labels[i].clone()).collect();
        let entries = rows.iter().flat_map(|&i| self.row(i).iter().cloned()).collect();
        Self {
            rows: rows.len(),
            cols: self.cols,
            entries,
            row_labels,
            col_labels: self.col_labels.clone(),
        }
    }

    pub fn transpose(&self) -> Self {
        RationalMatrix::from_fn(self.col_labels.clone(), self.row_labels.clone(), |i, j| {
            self.get(j, i).clone()
        })
    }

    /// Matrix product; rows keep `self`'s labels, columns `other`'s.
    pub fn mul(&self, other: &RationalMatrix) -> Result<RationalMatrix> {
        if self.cols != other.rows {
            return Err(DcError::Dimension {
                expected: self.cols,
                got: other.rows,
            });
        }
        let rows: Vec<Vec<Rational>> = (0..self.rows)
            .into_par_iter()
            .map(|i| {
                let mut acc = vec![Rational::zero(); other.cols];
                for (k, a) in self.row(i).iter().enumerate() {
                    if a.is_zero() {
                        continue;
                    }
                    for (slot, b) in acc.iter_mut().zip(other.row(k)) {
                        if !b.is_zero() {
                            *slot += a * b;
                        }
                    }
                }
                acc
            })
            .collect();
        Ok(RationalMatrix {
            rows: self.rows,
            cols: other.cols,
            entries: rows.into_iter().flatten().collect(),
            row_labels: self.row_labels.clone(),
            col_labels: other.col_labels.clone(),
        })
    }

    pub fn mul_vec(&self, x: &[Rational]) -> Result<Vec<Rational>> {
        if x.len() != self.cols {
            return Err(DcError::Dimension {
                expected: self.cols,
                got: x.len(),
            });
        }
        Ok((0..self.rows)
            .into_par_iter()
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .filter(|(a, b)| !a.is_zero() && !b.is_zero())
                    .fold(Rational::zero(), |acc, (a, b)| acc + a * b)
            })
            .collect())
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Zero::is_zero)
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(to_f64).collect())
            .collect()
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| to_f64(self.get(i, j)))
    }

    /// `{rows, cols, row_kind, col_kind, row_labels, col_labels, entries}` with
    /// entries as row-major `"a/b"` strings.
    pub fn to_json(&self) -> Value {
        let kind = |labels: &[Label]| labels.first().map_or("index", Label::kind);
        json!({
            "rows": self.rows,
            "cols": self.cols,
            "row_kind": kind(&self.row_labels),
            "col_kind": kind(&self.col_labels),
            "row_labels": self.row_labels.iter().map(Label::to_json).collect::<Vec<_>>(),
            "col_labels": self.col_labels.iter().map(Label::to_json).collect::<Vec<_>>(),
            "entries": (0..self.rows)
                .map(|i| self.row(i).iter().map(format_rational).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        })
    }

    /// Inverse of [`RationalMatrix::to_json`]. `n` is the ground-set size,
    /// needed to rebuild subset labels.
    pub fn from_json(value: &Value, n: usize) -> Result<Self> {
        let bad = |what: &str| DcError::Parse(format!("matrix JSON: missing or bad {what}"));
        let field = |name: &str| value.get(name).ok_or_else(|| bad(name));
        let rows = field("rows")?.as_u64().ok_or_else(|| bad("rows"))? as usize;
        let cols = field("cols")?.as_u64().ok_or_else(|| bad("cols"))? as usize;
        let row_kind = value.get("row_kind").and_then(Value::as_str).unwrap_or("index");
        let col_kind = value.get("col_kind").and_then(Value::as_str).unwrap_or("index");
        let labels = |name: &str, kind: &str, expected: usize| -> Result<Vec<Label>> {
            let raw = field(name)?.as_array().ok_or_else(|| bad(name))?;
            if raw.len() != expected {
                return Err(DcError::Dimension {
                    expected,
                    got: raw.len(),
                });
            }
            raw.iter().map(|v| Label::from_json(kind, v, n)).collect()
        };
        let row_labels = labels("row_labels", row_kind, rows)?;
        let col_labels = labels("col_labels", col_kind, cols)?;
        let raw_rows = field("entries")?.as_array().ok_or_else(|| bad("entries"))?;
        if raw_rows.len() != rows {
            return Err(DcError::Dimension {
                expected: rows,
                got: raw_rows.len(),
            });
        }
        let mut entries = Vec::with_capacity(rows * cols);
        for row in raw_rows {
            let row = row.as_array().ok_or_else(|| bad("entries"))?;
            if row.len() != cols {
                return Err(DcError::Dimension {
                    expected: cols,
                    got: row.len(),
                });
            }
            for cell in row {
                entries.push(parse_rational(cell.as_str().ok_or_else(|| bad("entries"))?)?);
            }
        }
        Ok(Self {
            rows,
            cols,
            entries,
            row_labels,
            col_labels,
        })
    }

    /// Numeric approximation as CSV; the header row holds the column labels.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label");
        for l in &self.col_labels {
            out.push_str(&format!(",\"{l}\""));
        }
        out.push('\n');
        for i in 0..self.rows {
            out.push_str(&format!("\"{}\"", self.row_labels[i]));
            for v in self.row(i) {
                out.push_str(&format!(",{}", to_f64(v)));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    #[test]
    fn product_and_vector() {
        let a = RationalMatrix::from_rows(vec![vec![int(1), int(2)], vec![int(3), int(4)]]).unwrap();
        let b = RationalMatrix::from_rows(vec![vec![rat(1, 2)], vec![int(-1)]]).unwrap();
        let c = a.mul(&b).unwrap();
        assert_eq!(c.column(0), vec![rat(-3, 2), rat(-5, 2)]);
        assert_eq!(a.mul_vec(&[rat(1, 2), int(-1)]).unwrap(), c.column(0));
        assert!(a.mul_vec(&[int(1)]).is_err());
        assert_eq!(a.transpose().get(0, 1), &int(3));
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(RationalMatrix::from_rows(vec![vec![int(1)], vec![]]).is_err());
    }

    #[test]
    fn json_round_trip_with_labels() {
        let rows = vec![Label::Subset(Subset::empty(2)), Label::Subset(Subset::full(2))];
        let cols = vec![
            Label::Partition(SetPartition::one_block(2)),
            Label::Partition(SetPartition::singletons(2)),
        ];
        let m = RationalMatrix::from_fn(rows, cols, |i, j| rat(i as i64 + 1, j as i64 + 2));
        let v = m.to_json();
        assert_eq!(v["entries"][1][1], "2/3");
        assert_eq!(v["row_labels"][1], json!([1, 2]));
        assert_eq!(RationalMatrix::from_json(&v, 2).unwrap(), m);
    }
}
