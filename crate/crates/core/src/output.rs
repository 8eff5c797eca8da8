//! Commented-header CSV tables.
//!
//! ```text
//! # schema=<name> v1
//! # config_sha256=<hex>
//! # seed=<u64>
//! # version=<crate version>
//! # <key>=<value>          (optional run metadata)
//! col_a,col_b,...
//! ```
//!
//! Floats use Rust's shortest round-trip scientific form, so the text is a
//! pure function of the values. Empty fields mark masked entries.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Missing,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

pub fn format_number(x: f64) -> String {
    format!("{x:e}")
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_number(*x),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub schema: String,
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    /// Table with the standard header of `config`.
    pub fn new(schema: &str, config: &ScenarioConfig, columns: &[&str]) -> Self {
        Self {
            schema: schema.to_string(),
            meta: vec![
                ("config_sha256".into(), config.hash()),
                ("seed".into(), config.seed.to_string()),
                ("version".into(), VERSION.into()),
            ],
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<Vec<Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i].clone()).collect())
    }

    /// Numeric column with masked entries as `None`.
    pub fn numbers(&self, name: &str) -> Option<Vec<Option<f64>>> {
        Some(self.column(name)?.iter().map(Cell::as_f64).collect())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# schema={} v1", self.schema)?;
        for (k, v) in &self.meta {
            writeln!(w, "# {k}={v}")?;
        }
        let mut csv = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        csv.write_record(&self.columns)?;
        for row in &self.rows {
            csv.write_record(row.iter().map(Cell::render))?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("tables are UTF-8")
    }

    pub fn save(&self, dir: &Path) -> Result<std::path::PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.csv", self.schema));
        self.write(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
        Ok(path)
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut reader = BufReader::new(r);
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let schema = line
            .trim_end()
            .strip_prefix("# schema=")
            .and_then(|s| s.strip_suffix(" v1"))
            .ok_or_else(|| {
                Error::domain(format!(
                    "missing or unsupported schema line: {:?}",
                    line.trim_end()
                ))
            })?
            .to_string();
        let mut meta = Vec::new();
        let mut body = String::new();
        for l in reader.lines() {
            let l = l?;
            match l.strip_prefix("# ") {
                Some(kv) if body.is_empty() => {
                    let (k, v) = kv.split_once('=').unwrap_or((kv, ""));
                    meta.push((k.to_string(), v.to_string()));
                }
                _ => {
                    body.push_str(&l);
                    body.push('\n');
                }
            }
        }
        let mut csv = csv::ReaderBuilder::new().from_reader(body.as_bytes());
        let columns: Vec<String> = csv.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in csv.records() {
            rows.push(
                rec?.iter()
                    .map(|f| {
                        if f.is_empty() {
                            Cell::Missing
                        } else {
                            f.parse::<f64>()
                                .map_or_else(|_| Cell::Text(f.to_string()), Cell::Num)
                        }
                    })
                    .collect(),
            );
        }
        Ok(Self {
            schema,
            meta,
            columns,
            rows,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(std::fs::File::open(path)?)
    }
}
