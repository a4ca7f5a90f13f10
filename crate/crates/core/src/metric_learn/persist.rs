//! Plain-text persistence for [`FitnessMatrix`].
//!
//! ```text
//! cpfilter-fitness-matrix 1
//! factor <16 values, row major>
//! ranges <d_min d_max v_min v_max r_min r_max c_min c_max>
//! score_scale <value>
//! ```
//!
//! `M` is not stored; it is recomputed from the factor on load.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Matrix4;
use thiserror::Error;

use super::{AttrRange, FeatureRanges, FitnessMatrix};

const MAGIC: &str = "cpfilter-fitness-matrix";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MatrixFileError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("unsupported matrix file version {0}")]
    Version(u32),
    #[error("cannot access matrix file {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn fmt_err(line: usize, message: impl Into<String>) -> MatrixFileError {
    MatrixFileError::Format {
        line,
        message: message.into(),
    }
}

impl FitnessMatrix {
    pub fn to_text(&self) -> String {
        let mut s = format!("{MAGIC} {VERSION}\nfactor");
        for i in 0..4 {
            for j in 0..4 {
                write!(s, " {}", self.factor[(i, j)]).unwrap();
            }
        }
        s.push_str("\nranges");
        for r in &self.normalization.0 {
            write!(s, " {} {}", r.min, r.max).unwrap();
        }
        writeln!(s, "\nscore_scale {}", self.score_scale).unwrap();
        s
    }

    pub fn from_text(text: &str) -> Result<Self, MatrixFileError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (n, header) = lines.next().ok_or_else(|| fmt_err(1, "empty file"))?;
        let version = match header.split_whitespace().collect::<Vec<_>>()[..] {
            [MAGIC, v] => v.parse::<u32>().map_err(|_| fmt_err(n, "bad version"))?,
            _ => return Err(fmt_err(n, format!("expected header '{MAGIC} <version>'"))),
        };
        if version != VERSION {
            return Err(MatrixFileError::Version(version));
        }

        let mut field = |key: &str, count: usize| -> Result<Vec<f64>, MatrixFileError> {
            let (n, line) = lines
                .next()
                .ok_or_else(|| fmt_err(0, format!("missing '{key}' line")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(fmt_err(n, format!("expected '{key}'")));
            }
            let vals = parts
                .map(|p| p.parse::<f64>().map_err(|_| fmt_err(n, format!("not a number: {p}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if vals.len() != count {
                return Err(fmt_err(n, format!("'{key}' needs {count} values, found {}", vals.len())));
            }
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(fmt_err(n, format!("'{key}' has non-finite values")));
            }
            Ok(vals)
        };

        let factor = field("factor", 16)?;
        let ranges = field("ranges", 8)?;
        let scale = field("score_scale", 1)?;
        let factor = Matrix4::from_row_slice(&factor);
        let ranges = FeatureRanges(std::array::from_fn(|i| AttrRange::new(ranges[2 * i], ranges[2 * i + 1])));
        FitnessMatrix::from_factor(factor, ranges, scale[0]).map_err(|e| fmt_err(0, e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MatrixFileError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|source| MatrixFileError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MatrixFileError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| MatrixFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text)
    }
}
