use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Feature taxonomy: static/dynamic by page/network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    SP,
    SN,
    DP,
    DN,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::SP, Category::SN, Category::DP, Category::DN];
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Category::SP => "SP",
            Category::SN => "SN",
            Category::DP => "DP",
            Category::DN => "DN",
        };
        f.write_str(s)
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SP" => Ok(Category::SP),
            "SN" => Ok(Category::SN),
            "DP" => Ok(Category::DP),
            "DN" => Ok(Category::DN),
            _ => Err(Error::invalid(format!("unknown feature category `{s}`"))),
        }
    }
}

/// Registry entry of one feature column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub category: Category,
    /// Part of the look-back/look-around subset.
    pub lbla: bool,
    /// A new-outlink count of the row's own page (dropped for rate targets).
    pub own_history: bool,
    /// A raw semantic-vector component, to be replaced by a reducer.
    pub semantic: bool,
    /// Latest crawl index read to compute the column.
    pub last_crawl: usize,
}

impl Column {
    pub fn new(name: impl Into<String>, category: Category, last_crawl: usize) -> Self {
        Self {
            name: name.into(),
            category,
            lbla: false,
            own_history: false,
            semantic: false,
            last_crawl,
        }
    }

    pub fn lbla(mut self) -> Self {
        self.lbla = true;
        self
    }

    pub fn own_history(mut self) -> Self {
        self.own_history = true;
        self
    }

    pub fn semantic(mut self) -> Self {
        self.semantic = true;
        self
    }
}

/// Column-major real matrix with a named column registry; one row per page.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    columns: Vec<Column>,
    values: Vec<Vec<f64>>,
    row_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<Column>, values: Vec<Vec<f64>>, row_ids: Vec<String>) -> Result<Self> {
        if columns.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} column entries but {} value columns",
                columns.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| v.len() != row_ids.len()) {
            return Err(Error::invalid(format!(
                "column of length {} in a matrix of {} rows",
                v.len(),
                row_ids.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::invalid(format!("duplicate column name `{}`", c.name)));
            }
        }
        for (c, v) in columns.iter().zip(&values) {
            if !v.is_empty() && v.iter().all(|x| x.is_nan()) {
                return Err(Error::invalid(format!("column `{}` is entirely NaN", c.name)));
            }
        }
        Ok(Self {
            columns,
            values,
            row_ids,
        })
    }

    /// Unflagged `SP` columns with generated names `x0, x1, ...`.
    pub fn from_columns(values: Vec<Vec<f64>>) -> Result<Self> {
        let n = values.first().map_or(0, Vec::len);
        let columns = (0..values.len())
            .map(|j| Column::new(format!("x{j}"), Category::SP, 0))
            .collect();
        Self::new(columns, values, (0..n).map(|i| i.to_string()).collect())
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[col][row]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    /// Hash of the ordered (name, category, lbla) registry; models record it.
    pub fn registry_hash(&self) -> String {
        registry_hash(&self.columns)
    }

    /// Rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            columns: self.columns.clone(),
            values: self
                .values
                .iter()
                .map(|v| rows.iter().map(|&r| v[r]).collect())
                .collect(),
            row_ids: rows.iter().map(|&r| self.row_ids[r].clone()).collect(),
        }
    }

    /// Columns satisfying `keep`, in registry order.
    pub fn select_columns(&self, keep: impl Fn(&Column) -> bool) -> FeatureMatrix {
        let (columns, values) = self
            .columns
            .iter()
            .zip(&self.values)
            .filter(|(c, _)| keep(c))
            .map(|(c, v)| (c.clone(), v.clone()))
            .unzip();
        FeatureMatrix {
            columns,
            values,
            row_ids: self.row_ids.clone(),
        }
    }

    /// Copy with column `j` replaced by `values`.
    pub fn with_column_replaced(&self, j: usize, values: Vec<f64>) -> FeatureMatrix {
        assert_eq!(values.len(), self.n_rows(), "replacement column length");
        let mut out = self.clone();
        out.values[j] = values;
        out
    }

    /// Appends columns (names must stay unique).
    pub fn with_columns(mut self, columns: Vec<Column>, values: Vec<Vec<f64>>) -> Result<Self> {
        self.columns.extend(columns);
        self.values.extend(values);
        Self::new(self.columns, self.values, self.row_ids)
    }

    /// Writes the columnar text format: `#category`, `#lbla`, `#own`,
    /// `#semantic` and `#last_crawl` header lines, a name line, then rows.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<feature matrix>", e);
        let header = |tag: &str, f: &dyn Fn(&Column) -> String| {
            let cells: Vec<String> = self.columns.iter().map(f).collect();
            format!("#{tag}\t{}", cells.join("\t"))
        };
        let flag = |b: bool| if b { "1".to_string() } else { "0".to_string() };
        writeln!(out, "{}", header("category", &|c| c.category.to_string())).map_err(io)?;
        writeln!(out, "{}", header("lbla", &|c| flag(c.lbla))).map_err(io)?;
        writeln!(out, "{}", header("own", &|c| flag(c.own_history))).map_err(io)?;
        writeln!(out, "{}", header("semantic", &|c| flag(c.semantic))).map_err(io)?;
        writeln!(out, "{}", header("last_crawl", &|c| c.last_crawl.to_string())).map_err(io)?;
        writeln!(out, "{}", header("row", &|c| c.name.clone())).map_err(io)?;
        let mut line = String::new();
        for r in 0..self.n_rows() {
            line.clear();
            line.push_str(&self.row_ids[r]);
            for v in &self.values {
                line.push('\t');
                line.push_str(&v[r].to_string());
            }
            writeln!(out, "{line}").map_err(io)?;
        }
        Ok(())
    }

    /// Reads [`write_text`](Self::write_text) output; leading `# ` comment
    /// lines (artifact headers) are skipped.
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input
            .lines()
            .skip_while(|l| l.as_ref().is_ok_and(|l| l.starts_with("# ")));
        let mut next_header = |tag: &str| -> Result<Vec<String>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::parse("feature matrix", format!("missing #{tag} line")))?
                .map_err(|e| Error::io("<feature matrix>", e))?;
            let mut cells = line.split('\t');
            if cells.next() != Some(&format!("#{tag}")[..]) {
                return Err(Error::parse("feature matrix", format!("expected #{tag} line")));
            }
            Ok(cells.map(str::to_string).collect())
        };
        let flags = |v: Vec<String>| -> Result<Vec<bool>> {
            v.iter()
                .map(|s| match s.as_str() {
                    "1" => Ok(true),
                    "0" => Ok(false),
                    _ => Err(Error::parse("feature matrix", format!("bad flag `{s}`"))),
                })
                .collect()
        };
        let cats: Vec<Category> = next_header("category")?
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_>>()?;
        let lbla = flags(next_header("lbla")?)?;
        let own = flags(next_header("own")?)?;
        let sem = flags(next_header("semantic")?)?;
        let last: Vec<usize> = next_header("last_crawl")?
            .iter()
            .map(|s| s.parse().map_err(|e| Error::parse("feature matrix", e)))
            .collect::<Result<_>>()?;
        let names = next_header("row")?;
        let n = names.len();
        if [cats.len(), lbla.len(), own.len(), sem.len(), last.len()].iter().any(|&l| l != n) {
            return Err(Error::parse("feature matrix", "header lines differ in length"));
        }
        let columns: Vec<Column> = (0..n)
            .map(|j| Column {
                name: names[j].clone(),
                category: cats[j],
                lbla: lbla[j],
                own_history: own[j],
                semantic: sem[j],
                last_crawl: last[j],
            })
            .collect();
        let mut values = vec![Vec::new(); n];
        let mut row_ids = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io("<feature matrix>", e))?;
            if line.is_empty() {
                continue;
            }
            let mut cells = line.split('\t');
            row_ids.push(cells.next().unwrap_or_default().to_string());
            let mut count = 0;
            for (j, cell) in cells.enumerate() {
                let v: f64 = cell
                    .parse()
                    .map_err(|e| Error::parse(format!("feature matrix row {}", i + 1), e))?;
                values
                    .get_mut(j)
                    .ok_or_else(|| Error::parse(format!("feature matrix row {}", i + 1), "too many cells"))?
                    .push(v);
                count += 1;
            }
            if count != n {
                return Err(Error::parse(format!("feature matrix row {}", i + 1), "too few cells"));
            }
        }
        Self::new(columns, values, row_ids)
    }
}

pub(crate) fn registry_hash(columns: &[Column]) -> String {
    let mut h = Sha256::new();
    for c in columns {
        h.update(format!("{}\t{}\t{}\n", c.name, c.category, c.lbla as u8).as_bytes());
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_is_exact() {
        let cols = vec![
            Column::new("a", Category::SP, 8),
            Column::new("new_int_lag1", Category::DP, 8).lbla().own_history(),
        ];
        let m = FeatureMatrix::new(
            cols,
            vec![vec![0.1, 1e-300, f64::NAN], vec![3.0, -2.5, 1.0 / 3.0]],
            vec!["https://a.org/".into(), "https://b.org/".into(), "https://c.org/".into()],
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = FeatureMatrix::read_text(&buf[..]).unwrap();
        assert_eq!(back.columns(), m.columns());
        assert_eq!(back.row_ids(), m.row_ids());
        for j in 0..2 {
            for r in 0..3 {
                let (a, b) = (m.get(r, j), back.get(r, j));
                assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
            }
        }
        assert_eq!(back.registry_hash(), m.registry_hash());
    }

    #[test]
    fn registry_invariants() {
        let dup = vec![Column::new("a", Category::SP, 0), Column::new("a", Category::SN, 0)];
        assert!(FeatureMatrix::new(dup, vec![vec![1.0], vec![2.0]], vec!["r".into()]).is_err());
        let nan = vec![Column::new("a", Category::SP, 0)];
        assert!(FeatureMatrix::new(nan, vec![vec![f64::NAN, f64::NAN]], vec!["r".into(), "s".into()]).is_err());
    }

    #[test]
    fn hash_tracks_registry_not_values() {
        let a = FeatureMatrix::from_columns(vec![vec![1.0, 2.0]]).unwrap();
        let b = FeatureMatrix::from_columns(vec![vec![5.0, 6.0]]).unwrap();
        let c = FeatureMatrix::from_columns(vec![vec![1.0, 2.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(a.registry_hash(), b.registry_hash());
        assert_ne!(a.registry_hash(), c.registry_hash());
    }
}
