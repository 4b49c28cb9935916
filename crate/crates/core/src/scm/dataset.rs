use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub observed: bool,
}

/// Rectangular row-major sample matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    data: Vec<f64>,
    n_rows: usize,
    seed: Option<u64>,
}

impl Dataset {
    pub fn new(columns: Vec<Column>, data: Vec<f64>, seed: Option<u64>) -> Result<Self> {
        let k = columns.len();
        if k == 0 {
            return Err(Error::InvalidArgument("dataset needs at least one column".into()));
        }
        if data.len() % k != 0 {
            return Err(Error::InvalidArgument("data length is not a multiple of the column count".into()));
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::InvalidArgument(format!("duplicate column `{}`", c.name)));
            }
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                node: columns[i % k].name.clone(),
                row: i / k,
            });
        }
        Ok(Dataset {
            n_rows: data.len() / k,
            columns,
            data,
            seed,
        })
    }

    /// All columns observed.
    pub fn from_columns(cols: &[(&str, &[f64])]) -> Result<Self> {
        let n = cols.first().map(|c| c.1.len()).unwrap_or(0);
        if cols.iter().any(|c| c.1.len() != n) {
            return Err(Error::InvalidArgument("columns differ in length".into()));
        }
        let mut data = Vec::with_capacity(n * cols.len());
        for r in 0..n {
            for c in cols {
                data.push(c.1[r]);
            }
        }
        let columns = cols
            .iter()
            .map(|c| Column {
                name: c.0.to_string(),
                observed: true,
            })
            .collect();
        Self::new(columns, data, None)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let k = self.columns.len();
        &self.data[r * k..(r + 1) * k]
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column_index(name)?;
        let k = self.columns.len();
        Ok((0..self.n_rows).map(|r| self.data[r * k + j]).collect())
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Dataset> {
        let idx: Vec<usize> = names.iter().map(|n| self.column_index(n)).collect::<Result<_>>()?;
        let k = self.columns.len();
        let mut data = Vec::with_capacity(self.n_rows * idx.len());
        for r in 0..self.n_rows {
            for &j in &idx {
                data.push(self.data[r * k + j]);
            }
        }
        Dataset::new(idx.iter().map(|&j| self.columns[j].clone()).collect(), data, self.seed)
    }

    pub fn observed_view(&self) -> Dataset {
        let names: Vec<&str> = self
            .columns
            .iter()
            .filter(|c| c.observed)
            .map(|c| c.name.as_str())
            .collect();
        self.select(&names).expect("observed columns exist")
    }

    /// Rows reordered so that new row `i` is old row `perm[i]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Dataset {
        let k = self.columns.len();
        let mut data = Vec::with_capacity(self.data.len());
        for &p in perm {
            data.extend_from_slice(&self.data[p * k..(p + 1) * k]);
        }
        Dataset {
            columns: self.columns.clone(),
            data,
            n_rows: perm.len(),
            seed: self.seed,
        }
    }

    pub fn with_column(&self, name: &str, values: &[f64]) -> Result<Dataset> {
        if values.len() != self.n_rows {
            return Err(Error::InvalidArgument("column length mismatch".into()));
        }
        let k = self.columns.len();
        let mut data = Vec::with_capacity(self.n_rows * (k + 1));
        for r in 0..self.n_rows {
            data.extend_from_slice(self.row(r));
            data.push(values[r]);
        }
        let mut columns = self.columns.clone();
        columns.push(Column {
            name: name.to_string(),
            observed: true,
        });
        Dataset::new(columns, data, self.seed)
    }

    /// CSV with a leading `# seed=<s> observed=<name>:<0|1>,...` comment line.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into());
        let flags: Vec<String> = self
            .columns
            .iter()
            .map(|c| format!("{}:{}", c.name, c.observed as u8))
            .collect();
        writeln!(w, "# seed={seed} observed={}", flags.join(","))?;
        let mut cw = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        cw.write_record(self.columns.iter().map(|c| c.name.as_str())).map_err(io)?;
        let mut buf = Vec::with_capacity(self.columns.len());
        for r in 0..self.n_rows {
            buf.clear();
            buf.extend(self.row(r).iter().map(|v| format!("{v:?}")));
            cw.write_record(&buf).map_err(io)?;
        }
        cw.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Dataset> {
        let mut reader = BufReader::new(r);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let mut seed = None;
        let mut flags: Vec<(String, bool)> = Vec::new();
        let header_line;
        if let Some(meta) = first.trim_end().strip_prefix('#') {
            for tok in meta.split_whitespace() {
                if let Some(s) = tok.strip_prefix("seed=") {
                    seed = s.parse().ok();
                } else if let Some(o) = tok.strip_prefix("observed=") {
                    for item in o.split(',').filter(|s| !s.is_empty()) {
                        let (n, f) = item.rsplit_once(':').ok_or_else(|| Error::Parse {
                            line: 1,
                            column: 1,
                            message: format!("bad observed flag `{item}`"),
                        })?;
                        flags.push((n.to_string(), f == "1"));
                    }
                }
            }
            header_line = None;
        } else {
            header_line = Some(first);
        }
        let mut rest = String::new();
        if let Some(h) = header_line {
            rest.push_str(&h);
        }
        reader.read_to_string(&mut rest)?;
        let mut cr = csv::ReaderBuilder::new().has_headers(true).from_reader(rest.as_bytes());
        let line_off = if flags.is_empty() && seed.is_none() { 0 } else { 1 };
        let parse_err = |line: usize, message: String| Error::Parse {
            line: line + line_off,
            column: 1,
            message,
        };
        let headers = cr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
        let columns: Vec<Column> = headers
            .iter()
            .map(|h| Column {
                name: h.to_string(),
                observed: flags.iter().find(|f| f.0 == h).map(|f| f.1).unwrap_or(true),
            })
            .collect();
        let mut data = Vec::new();
        for (i, rec) in cr.records().enumerate() {
            let rec = rec.map_err(|e| parse_err(i + 2, e.to_string()))?;
            if rec.len() != columns.len() {
                return Err(parse_err(i + 2, format!("expected {} fields, got {}", columns.len(), rec.len())));
            }
            for f in rec.iter() {
                data.push(
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| parse_err(i + 2, format!("not a number: `{f}`")))?,
                );
            }
        }
        Dataset::new(columns, data, seed)
    }
}
