//! Plain-text container shared by temperature frames and activation maps.
//!
//! ```text
//! FRAME v1
//! <width> <height>
//! v00 v01 ...
//! ```
//!
//! The first line is a tag (`FRAME v1` or `CAM v1`), the second the grid
//! dimensions, and the remainder row-major whitespace-separated reals. Line
//! breaks inside the value block are not significant.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

pub const FRAME_TAG: &str = "FRAME v1";
pub const CAM_TAG: &str = "CAM v1";

#[derive(Debug, Error)]
pub enum GridError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("expected header {expected:?}, found {found:?}")]
    BadTag { expected: String, found: String },
    #[error("malformed dimension line {0:?}")]
    BadDims(String),
    #[error("grid dimensions must be positive, got {width}x{height}")]
    ZeroDims { width: usize, height: usize },
    #[error("value {index} is not a finite real: {token:?}")]
    BadValue { index: usize, token: String },
    #[error("expected {expected} values for the declared dimensions, found {found}")]
    WrongLength { expected: usize, found: usize },
}

/// A parsed grid: dimensions plus row-major values.
#[derive(Debug, Clone, PartialEq)]
pub struct RawGrid {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

pub fn parse_grid(text: &str, tag: &str) -> Result<RawGrid, GridError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").trim();
    if header != tag {
        return Err(GridError::BadTag {
            expected: tag.to_string(),
            found: header.to_string(),
        });
    }
    let dims_line = lines.next().unwrap_or("");
    let dims: Vec<&str> = dims_line.split_whitespace().collect();
    let (width, height) = match dims.as_slice() {
        [w, h] => match (w.parse::<usize>(), h.parse::<usize>()) {
            (Ok(w), Ok(h)) => (w, h),
            _ => return Err(GridError::BadDims(dims_line.to_string())),
        },
        _ => return Err(GridError::BadDims(dims_line.to_string())),
    };
    if width == 0 || height == 0 {
        return Err(GridError::ZeroDims { width, height });
    }

    let mut values = Vec::with_capacity(width * height);
    for (index, token) in lines.flat_map(str::split_whitespace).enumerate() {
        match token.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ => {
                return Err(GridError::BadValue {
                    index,
                    token: token.to_string(),
                })
            }
        }
    }
    if values.len() != width * height {
        return Err(GridError::WrongLength {
            expected: width * height,
            found: values.len(),
        });
    }
    Ok(RawGrid {
        width,
        height,
        values,
    })
}

/// Renders a grid, one image row per line. Values use Rust's shortest
/// round-trip float formatting, so `parse_grid(render_grid(g))` is exact.
pub fn render_grid(tag: &str, width: usize, height: usize, values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 8 + 32);
    let _ = writeln!(out, "{tag}");
    let _ = writeln!(out, "{width} {height}");
    for row in values.chunks(width.max(1)).take(height) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn read_grid(path: &Path, tag: &str) -> Result<RawGrid, GridError> {
    let text = fs::read_to_string(path).map_err(|source| GridError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_grid(&text, tag)
}
