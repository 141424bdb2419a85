use std::collections::{BTreeSet, HashSet};
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{CovariateRole, CovariateSpace, ObservationRecord, ObservationTable, OutcomeDomain};
use crate::error::{Error, Result};

/// How to read a survey CSV: which column is the outcome, its domain, and
/// which columns form the always-observed `x` and the possibly missing `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub outcome: String,
    /// Outcome restricted to `{0, 1}`.
    #[serde(default)]
    pub binary: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_hi: Option<f64>,
    #[serde(default)]
    pub x: Vec<String>,
    #[serde(default)]
    pub w: Vec<String>,
    /// Field value meaning "missing", in addition to the empty field.
    #[serde(default)]
    pub missing: String,
}

impl DataConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn domain(&self) -> Result<OutcomeDomain> {
        match (self.binary, self.y_lo, self.y_hi) {
            (true, None, None) | (true, Some(0.0), Some(1.0)) => Ok(OutcomeDomain::binary()),
            (true, _, _) => Err(Error::InvalidConfig("a binary outcome has domain [0, 1]".into())),
            (false, Some(lo), Some(hi)) => OutcomeDomain::new(lo, hi),
            (false, _, _) => Err(Error::InvalidConfig("set `binary` or both `y_lo` and `y_hi`".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.domain()?;
        let mut seen = HashSet::new();
        for name in std::iter::once(&self.outcome).chain(&self.x).chain(&self.w) {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidConfig(format!("column {name} is used twice")));
            }
        }
        Ok(())
    }

    fn is_missing(&self, field: &str) -> bool {
        field.is_empty() || (!self.missing.is_empty() && field == self.missing)
    }
}

/// Reads a CSV file into an observation table; see [`ingest_reader`].
pub fn ingest_csv(path: impl AsRef<Path>, cfg: &DataConfig) -> Result<ObservationTable> {
    ingest_reader(std::fs::File::open(path)?, cfg)
}

/// Parses CSV with a header row. Blank or sentinel fields are missing;
/// `x` columns must always be present, and a record with any blank `w`
/// column has its whole `w` missing. Covariate levels are interned in
/// sorted order.
pub fn ingest_reader<R: Read>(input: R, cfg: &DataConfig) -> Result<ObservationTable> {
    cfg.validate()?;
    let domain = cfg.domain()?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers()?.clone();
    let mut names = HashSet::new();
    for h in &headers {
        if !names.insert(h) {
            return Err(Error::InvalidConfig(format!("duplicate header name {h}")));
        }
    }
    let column = |name: &String| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownColumn(name.clone()))
    };
    let y_col = column(&cfg.outcome)?;
    let x_cols = cfg.x.iter().map(column).collect::<Result<Vec<_>>>()?;
    let w_cols = cfg.w.iter().map(column).collect::<Result<Vec<_>>>()?;

    struct Raw {
        line: u64,
        y: Option<f64>,
        x: Vec<String>,
        w: Option<Vec<String>>,
    }
    let mut raws = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(i).map(str::trim).unwrap_or("");
        let y = match field(y_col) {
            f if cfg.is_missing(f) => None,
            f => {
                let v: f64 = f.parse().map_err(|_| Error::MalformedRow {
                    line,
                    reason: format!("outcome {f:?} is not a number"),
                })?;
                if !domain.contains(v) {
                    return Err(Error::OutcomeOutOfDomain {
                        value: v,
                        line: Some(line),
                    });
                }
                Some(v)
            }
        };
        let mut x = Vec::with_capacity(x_cols.len());
        for (&c, name) in x_cols.iter().zip(&cfg.x) {
            let f = field(c);
            if cfg.is_missing(f) {
                return Err(Error::MalformedRow {
                    line,
                    reason: format!("covariate {name} is missing"),
                });
            }
            x.push(f.to_string());
        }
        let w_fields: Vec<&str> = w_cols.iter().map(|&c| field(c)).collect();
        let w = if w_fields.iter().any(|f| cfg.is_missing(f)) {
            None
        } else {
            Some(w_fields.iter().map(|f| f.to_string()).collect())
        };
        raws.push(Raw { line, y, x, w });
    }

    let space = |names: &[String], values: &mut dyn Iterator<Item = &Vec<String>>| -> Result<CovariateSpace> {
        let mut levels: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); names.len()];
        for v in values {
            for (set, level) in levels.iter_mut().zip(v) {
                set.insert(level.as_str());
            }
        }
        let roles = names
            .iter()
            .zip(levels)
            .map(|(name, set)| CovariateRole {
                name: name.clone(),
                levels: set.into_iter().map(String::from).collect(),
            })
            .collect::<Vec<_>>();
        if roles.iter().any(|r| r.levels.is_empty()) {
            return Err(Error::InvalidConfig("a covariate column has no observed values".into()));
        }
        CovariateSpace::new(roles)
    };
    let x_space = Arc::new(space(&cfg.x, &mut raws.iter().map(|r| &r.x))?);
    let w_space = Arc::new(space(&cfg.w, &mut raws.iter().filter_map(|r| r.w.as_ref()))?);

    let encode = |s: &CovariateSpace, levels: &[String]| -> Result<_> {
        let codes: Vec<u32> = levels
            .iter()
            .enumerate()
            .map(|(role, l)| s.level_code(role, l).expect("level was interned"))
            .collect();
        s.encode(&codes)
    };
    let mut records = Vec::with_capacity(raws.len());
    for r in &raws {
        let w = match &r.w {
            Some(levels) => Some(encode(&w_space, levels)?),
            None => None,
        };
        records.push(ObservationRecord {
            y: r.y,
            x: encode(&x_space, &r.x)?,
            w,
        });
    }
    ObservationTable::new(domain, x_space, w_space, records).map_err(|e| match e {
        // point at the first offending row where possible
        Error::RegimeMismatch(msg) => {
            let line = raws.iter().find(|r| r.y.is_none()).map_or(0, |r| r.line);
            Error::MalformedRow { line, reason: msg }
        }
        other => other,
    })
}
