//! Tabular benchmarks: losses on a fixed `(config, fidelity)` grid.
//!
//! File format: CSV with header `config_id,fidelity,loss`, integer ids and
//! fidelity steps, decimal losses. Lines starting with `#` are comments. The
//! grid must be rectangular: every configuration has a loss at every
//! fidelity that appears anywhere in the file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::arm::{ConfigId, EvalError, LossOracle};

pub const HEADER: [&str; 3] = ["config_id", "fidelity", "loss"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TabularError {
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("expected header `config_id,fidelity,loss`, found `{found}`")]
    Header { found: String },
    #[error("line {line}: expected 3 fields, found {found}")]
    FieldCount { line: u64, found: usize },
    #[error("line {line}: field `{field}` is not a valid number: {value:?}")]
    BadNumber {
        line: u64,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: loss is not finite")]
    NonFinite { line: u64 },
    #[error("line {line}: fidelity must be at least 1")]
    ZeroFidelity { line: u64 },
    #[error("line {line}: duplicate cell (config {config}, fidelity {fidelity})")]
    Duplicate {
        line: u64,
        config: u64,
        fidelity: u64,
    },
    #[error("missing cell (config {config}, fidelity {fidelity})")]
    MissingCell { config: u64, fidelity: u64 },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularBenchmark {
    configs: Vec<u64>,
    fidelities: Vec<u64>,
    cells: BTreeMap<(u64, u64), f64>,
}

impl TabularBenchmark {
    /// Builds a grid from `(config, fidelity, loss)` cells.
    pub fn from_cells(cells: Vec<(u64, u64, f64)>) -> Result<Self, TabularError> {
        Self::build(cells.into_iter().map(|(c, f, l)| (0, c, f, l)))
    }

    fn build(rows: impl IntoIterator<Item = (u64, u64, u64, f64)>) -> Result<Self, TabularError> {
        let mut cells = BTreeMap::new();
        let mut configs = BTreeSet::new();
        let mut fidelities = BTreeSet::new();
        for (line, config, fidelity, loss) in rows {
            if fidelity == 0 {
                return Err(TabularError::ZeroFidelity { line });
            }
            if !loss.is_finite() {
                return Err(TabularError::NonFinite { line });
            }
            if cells.insert((config, fidelity), loss).is_some() {
                return Err(TabularError::Duplicate {
                    line,
                    config,
                    fidelity,
                });
            }
            configs.insert(config);
            fidelities.insert(fidelity);
        }
        for &c in &configs {
            for &f in &fidelities {
                if !cells.contains_key(&(c, f)) {
                    return Err(TabularError::MissingCell {
                        config: c,
                        fidelity: f,
                    });
                }
            }
        }
        Ok(Self {
            configs: configs.into_iter().collect(),
            fidelities: fidelities.into_iter().collect(),
            cells,
        })
    }

    pub fn parse(text: &str) -> Result<Self, TabularError> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| csv_error(&e))?.clone();
        if headers.iter().collect::<Vec<_>>() != HEADER {
            return Err(TabularError::Header {
                found: headers.iter().collect::<Vec<_>>().join(","),
            });
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_error(&e))?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != 3 {
                return Err(TabularError::FieldCount {
                    line,
                    found: rec.len(),
                });
            }
            let config = parse_field::<u64>(&rec[0], line, "config_id")?;
            let fidelity = parse_field::<u64>(&rec[1], line, "fidelity")?;
            let loss = parse_field::<f64>(&rec[2], line, "loss")?;
            rows.push((line, config, fidelity, loss));
        }
        Self::build(rows)
    }

    pub fn load(path: &Path) -> Result<Self, TabularError> {
        let text = std::fs::read_to_string(path).map_err(|e| TabularError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// CSV rendering, rows ordered by `(config, fidelity)`. Each comment is
    /// written as a `#` line before the header.
    pub fn export(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&HEADER.join(","));
        out.push('\n');
        for (&(c, f), loss) in &self.cells {
            out.push_str(&format!("{c},{f},{loss}\n"));
        }
        out
    }

    pub fn configs(&self) -> &[u64] {
        &self.configs
    }

    pub fn fidelities(&self) -> &[u64] {
        &self.fidelities
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Largest fidelity on the grid.
    pub fn r_cap(&self) -> u64 {
        self.fidelities.last().copied().unwrap_or(0)
    }

    pub fn get(&self, config: u64, fidelity: u64) -> Option<f64> {
        self.cells.get(&(config, fidelity)).copied()
    }
}

fn csv_error(e: &csv::Error) -> TabularError {
    TabularError::Csv {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

fn parse_field<T: std::str::FromStr>(
    raw: &str,
    line: u64,
    field: &'static str,
) -> Result<T, TabularError> {
    raw.parse().map_err(|_| TabularError::BadNumber {
        line,
        field,
        value: raw.to_string(),
    })
}

/// Oracle handing out the rows of a table in a seeded order: configuration
/// `i` is the `i`-th row of a shuffled row list.
#[derive(Debug, Clone)]
pub struct TabularOracle {
    bench: Arc<TabularBenchmark>,
    order: Vec<u64>,
}

impl TabularOracle {
    /// Rows in file order.
    pub fn in_order(bench: Arc<TabularBenchmark>) -> Self {
        let order = bench.configs.clone();
        Self { bench, order }
    }

    pub fn shuffled(bench: Arc<TabularBenchmark>, seed: u64) -> Self {
        let mut order = bench.configs.clone();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self { bench, order }
    }

    /// Table row behind `config`.
    pub fn row(&self, config: ConfigId) -> Option<u64> {
        self.order.get(config.0 as usize).copied()
    }
}

impl LossOracle for TabularOracle {
    fn loss(&self, config: ConfigId, level: u64) -> Result<f64, EvalError> {
        if level == 0 {
            return Err(EvalError::ZeroLevel(level));
        }
        let row = self.row(config).ok_or(EvalError::UnknownConfig(config))?;
        self.bench
            .get(row, level)
            .ok_or(EvalError::LevelOffGrid { config, level })
    }

    /// Loss at the largest fidelity; tables carry no true limits.
    fn limit(&self, config: ConfigId) -> Option<f64> {
        self.bench.get(self.row(config)?, self.bench.r_cap())
    }

    fn capacity(&self) -> Option<u64> {
        Some(self.order.len() as u64)
    }
}
