//! Distance-dependent similarity functions.

use core::fmt;
use core::str::FromStr;

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::spaces::{Point, Space};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Similarity {
    /// `1` inside the closed ball of radius `resolution`, `noise` outside.
    Constant { resolution: f64, noise: f64 },
    /// `exp(-decay * d) + noise`.
    Exponential { decay: f64, noise: f64 },
    /// `max(0, 1 - d / resolution)`.
    LinearDecay { resolution: f64 },
    /// Similarities indexed by discrete point, e.g. learned by the toy model.
    Table(SimilarityTable),
}

/// Square table of non-negative similarities `g(x_i, x_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityTable {
    size: usize,
    entries: Vec<f64>,
}

impl SimilarityTable {
    /// `entries` is row-major with `size * size` values.
    pub fn new(size: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != size * size {
            return Err(Error::ShapeMismatch {
                expected_rows: size,
                expected_cols: size,
                rows: size,
                cols: if size == 0 { 0 } else { entries.len() / size },
            });
        }
        if size == 0 {
            return Err(Error::invalid("table", "table must not be empty"));
        }
        if entries.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(
                "table",
                "entries must be finite and non-negative",
            ));
        }
        Ok(SimilarityTable { size, entries })
    }

    /// Builds a table from rows, checking that it is square.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        let mut entries = Vec::with_capacity(size * size);
        for row in rows {
            if row.len() != size {
                return Err(Error::ShapeMismatch {
                    expected_rows: size,
                    expected_cols: size,
                    rows: size,
                    cols: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        SimilarityTable::new(size, entries)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        for index in [i, j] {
            if index >= self.size {
                return Err(Error::IndexOutOfRange {
                    index,
                    size: self.size,
                });
            }
        }
        Ok(self.entries[i * self.size + j])
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.size..(i + 1) * self.size]
    }

    /// Largest `|t[i][j] - t[j][i]|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.size {
            for j in i + 1..self.size {
                let a = self.entries[i * self.size + j];
                let b = self.entries[j * self.size + i];
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }
}

impl Similarity {
    pub fn constant(resolution: f64, noise: f64) -> Result<Self> {
        Similarity::Constant { resolution, noise }.validated()
    }

    pub fn exponential(decay: f64, noise: f64) -> Result<Self> {
        Similarity::Exponential { decay, noise }.validated()
    }

    pub fn linear_decay(resolution: f64) -> Result<Self> {
        Similarity::LinearDecay { resolution }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let reject = |name, value| Err(Error::Domain { name, value });
        match self {
            Similarity::Constant { resolution, noise } => {
                if !(resolution.is_finite() && resolution >= 0.0) {
                    return reject("eps", resolution);
                }
                if !(0.0..=1.0).contains(&noise) {
                    return reject("delta", noise);
                }
            }
            Similarity::Exponential { decay, noise } => {
                if !(decay.is_finite() && decay >= 0.0) {
                    return reject("mu", decay);
                }
                if !(noise.is_finite() && noise >= 0.0) {
                    return reject("delta", noise);
                }
            }
            Similarity::LinearDecay { resolution } => {
                if !(resolution.is_finite() && resolution > 0.0) {
                    return reject("eps", resolution);
                }
            }
            Similarity::Table(_) => {}
        }
        Ok(self)
    }

    /// Noise level `Delta`, zero where the kind has none.
    pub fn noise(&self) -> f64 {
        match self {
            Similarity::Constant { noise, .. } | Similarity::Exponential { noise, .. } => *noise,
            _ => 0.0,
        }
    }

    /// `g(d)` for the parametric kinds.
    pub fn eval(&self, d: f64) -> Result<f64> {
        if d.is_nan() || d < 0.0 {
            return Err(Error::Domain {
                name: "distance",
                value: d,
            });
        }
        Ok(match *self {
            Similarity::Constant { resolution, noise } => {
                if d <= resolution {
                    1.0
                } else {
                    noise
                }
            }
            Similarity::Exponential { decay, noise } => libm::exp(-decay * d) + noise,
            Similarity::LinearDecay { resolution } => (1.0 - d / resolution).max(0.0),
            Similarity::Table(_) => {
                return Err(Error::Unsupported(
                    "a similarity table is indexed by point, use eval_table",
                ))
            }
        })
    }

    pub fn eval_table(&self, i: usize, j: usize) -> Result<f64> {
        match self {
            Similarity::Table(table) => table.get(i, j),
            _ => Err(Error::Unsupported("eval_table needs a similarity table")),
        }
    }

    /// `g(a, b)` between two points of `space`.
    pub fn between(&self, space: &Space, a: &Point, b: &Point) -> Result<f64> {
        match (self, a, b) {
            (Similarity::Table(table), Point::Index(i), Point::Index(j)) => {
                if space.points() != Some(table.size()) {
                    return Err(Error::invalid(
                        "table",
                        "table size must equal the number of points of the space",
                    ));
                }
                table.get(*i, *j)
            }
            (Similarity::Table(_), _, _) => Err(Error::Unsupported(
                "a similarity table needs a discrete space",
            )),
            _ => self.eval(space.distance(a, b)?),
        }
    }

    /// Same kind with the resolution replaced.
    pub fn with_resolution(&self, eps: f64) -> Result<Self> {
        match *self {
            Similarity::Constant { noise, .. } => Similarity::constant(eps, noise),
            Similarity::LinearDecay { .. } => Similarity::linear_decay(eps),
            _ => Err(Error::Unsupported(
                "only constant and linear similarities have a resolution",
            )),
        }
    }
}

impl fmt::Display for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Similarity::Constant { resolution, noise } => {
                write!(f, "constant:eps={resolution},delta={noise}")
            }
            Similarity::Exponential { decay, noise } => write!(f, "exp:mu={decay},delta={noise}"),
            Similarity::LinearDecay { resolution } => write!(f, "linear:eps={resolution}"),
            Similarity::Table(t) => write!(f, "table:{}x{}", t.size, t.size),
        }
    }
}

/// A parsed similarity string. Tables live in files, so their loading is left
/// to the caller.
#[derive(Clone, Debug, PartialEq)]
pub enum SimilaritySource {
    Inline(Similarity),
    TablePath(String),
}

impl FromStr for SimilaritySource {
    type Err = Error;

    /// `constant:eps=0.2,delta=0.1`, `exp:mu=5,delta=0.05`, `linear:eps=0.4`,
    /// `table:path=...`.
    fn from_str(s: &str) -> Result<Self> {
        let parse_err = |reason| Error::Parse {
            input: s.to_string(),
            reason,
        };
        let (kind, params) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| parse_err("expected `<kind>:<key>=<value>,...`"))?;
        let mut pairs: Vec<(&str, &str)> = Vec::new();
        for item in params.split(',') {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| parse_err("parameters must be `key=value`"))?;
            pairs.push((k.trim(), v.trim()));
        }
        let get = |key: &str| pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        let num = |key: &str, default: Option<f64>| -> Result<f64> {
            match get(key) {
                Some(v) => v.parse::<f64>().map_err(|_| parse_err("malformed number")),
                None => default.ok_or_else(|| parse_err("missing required parameter")),
            }
        };
        let allowed: &[&str] = match kind.trim() {
            "constant" => &["eps", "delta"],
            "exp" => &["mu", "delta"],
            "linear" => &["eps"],
            "table" => &["path"],
            _ => return Err(parse_err("unknown similarity kind")),
        };
        if pairs.iter().any(|(k, _)| !allowed.contains(k)) {
            return Err(parse_err("unknown parameter for this kind"));
        }
        let sim = match kind.trim() {
            "constant" => Similarity::constant(num("eps", None)?, num("delta", Some(0.0))?)?,
            "exp" => Similarity::exponential(num("mu", None)?, num("delta", Some(0.0))?)?,
            "linear" => Similarity::linear_decay(num("eps", None)?)?,
            _ => {
                let path = get("path").ok_or_else(|| parse_err("missing `path`"))?;
                return Ok(SimilaritySource::TablePath(path.to_string()));
            }
        };
        Ok(SimilaritySource::Inline(sim))
    }
}
