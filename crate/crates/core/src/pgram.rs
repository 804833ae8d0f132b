//! Frame-level phoneme posteriorgrams and the PGRAM v1 text format.
//!
//! ```text
//! PGRAM 1
//! ih ax n ... pause eos blank
//! frames=<T> step_ms=<s>
//! <T rows of `width` floats, 9 significant digits>
//! ```
//!
//! Nine significant digits round-trip `f32` exactly, so a posteriorgram read
//! as `f32` and written back is bit-identical. The reader validates every row
//! but keeps the stored values; consumers that need exact stochastic rows
//! divide by [`Posteriorgram::row_sum`].

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::phoneme::{label_hash, InventoryError, PhonemeInventory, BLANK};
use crate::scalar::Real;

pub const MAGIC: &str = "PGRAM 1";

/// Allowed deviation of a row sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum PgramError {
    #[error("line {line}: malformed header: {msg}")]
    Header { line: usize, msg: String },
    #[error("bad inventory line: {0}")]
    Inventory(#[from] InventoryError),
    #[error("row {row}: expected {expected} columns, found {found}")]
    Width { row: usize, expected: usize, found: usize },
    #[error("row {row}, column {col}: unparsable or out-of-range value `{value}`")]
    Value { row: usize, col: usize, value: String },
    #[error("row {row} sums to {sum}, outside tolerance {ROW_SUM_TOLERANCE}")]
    RowSum { row: usize, sum: f64 },
    #[error("header declares {declared} frames but {found} rows present")]
    FrameCount { declared: usize, found: usize },
    #[error("posteriorgram inventory hash {found} does not match inventory {expected}")]
    InventoryMismatch { expected: String, found: String },
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// A `T × width` matrix of frame posteriors over an inventory (blank last).
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriorgram<F: Real = f64> {
    labels: Vec<String>,
    frames: Vec<F>,
    num_frames: usize,
    frame_step_ms: f64,
    inventory_hash: String,
}

impl<F: Real> Posteriorgram<F> {
    /// Builds and validates a posteriorgram from rows.
    pub fn new(labels: Vec<String>, rows: Vec<Vec<F>>, frame_step_ms: f64) -> Result<Self, PgramError> {
        let inv = PhonemeInventory::new(&labels)?;
        if inv.labels() != labels.as_slice() {
            return Err(PgramError::Header { line: 2, msg: format!("`{BLANK}` must be the last label") });
        }
        let width = labels.len();
        let num_frames = rows.len();
        let mut frames = Vec::with_capacity(num_frames * width);
        for (t, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(PgramError::Width { row: t, expected: width, found: row.len() });
            }
            frames.extend(row);
        }
        let pg = Self { inventory_hash: label_hash(&labels), labels, frames, num_frames, frame_step_ms };
        pg.validate()?;
        Ok(pg)
    }

    pub fn from_inventory(inventory: &PhonemeInventory, rows: Vec<Vec<F>>, frame_step_ms: f64) -> Result<Self, PgramError> {
        Self::new(inventory.labels().to_vec(), rows, frame_step_ms)
    }

    fn validate(&self) -> Result<(), PgramError> {
        for t in 0..self.num_frames {
            let row = self.row(t);
            for (c, &v) in row.iter().enumerate() {
                if !(v >= F::zero() && v <= F::one()) {
                    return Err(PgramError::Value { row: t, col: c, value: v.to_string() });
                }
            }
            let sum: f64 = row.iter().map(|v| v.as_f64()).sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(PgramError::RowSum { row: t, sum });
            }
        }
        Ok(())
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn width(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn frame_step_ms(&self) -> f64 {
        self.frame_step_ms
    }

    pub fn inventory_hash(&self) -> &str {
        &self.inventory_hash
    }

    pub fn row(&self, t: usize) -> &[F] {
        let w = self.width();
        &self.frames[t * w..(t + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[F]> {
        self.frames.chunks(self.width().max(1)).take(self.num_frames)
    }

    pub fn row_sum(&self, t: usize) -> F {
        self.row(t).iter().copied().sum()
    }

    /// Fails unless this posteriorgram was produced against `inventory`.
    pub fn check_inventory(&self, inventory: &PhonemeInventory) -> Result<(), PgramError> {
        let expected = inventory.hash();
        if expected != self.inventory_hash {
            return Err(PgramError::InventoryMismatch { expected, found: self.inventory_hash.clone() });
        }
        Ok(())
    }

    /// Converts the stored values to another scalar type.
    pub fn cast<G: Real>(&self) -> Posteriorgram<G> {
        Posteriorgram {
            labels: self.labels.clone(),
            frames: self.frames.iter().map(|v| G::from_f64_lossy(v.as_f64())).collect(),
            num_frames: self.num_frames,
            frame_step_ms: self.frame_step_ms,
            inventory_hash: self.inventory_hash.clone(),
        }
    }

    pub fn to_pgram_string(&self) -> String {
        let mut out = String::with_capacity(64 + self.frames.len() * 16);
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "{}", self.labels.join(" "));
        let _ = writeln!(out, "frames={} step_ms={}", self.num_frames, self.frame_step_ms);
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{:.8e}", v.as_f64())).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
        out
    }

    pub fn parse_pgram(text: &str) -> Result<Self, PgramError> {
        let mut lines = text.lines();
        let magic = lines.next().unwrap_or_default();
        if magic.trim_end() != MAGIC {
            return Err(PgramError::Header { line: 1, msg: format!("expected `{MAGIC}`") });
        }
        let labels: Vec<String> = lines
            .next()
            .ok_or_else(|| PgramError::Header { line: 2, msg: "missing inventory line".into() })?
            .split_whitespace()
            .map(String::from)
            .collect();
        let dims = lines
            .next()
            .ok_or_else(|| PgramError::Header { line: 3, msg: "missing dimensions line".into() })?;
        let (declared, step) = parse_dims(dims)?;
        let width = labels.len();
        let mut rows = Vec::with_capacity(declared.min(1 << 20));
        for (t, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .enumerate()
                .map(|(c, cell)| {
                    cell.parse::<F>()
                        .map_err(|_| PgramError::Value { row: t, col: c, value: cell.to_string() })
                })
                .collect::<Result<Vec<F>, _>>()?;
            if row.len() != width {
                return Err(PgramError::Width { row: t, expected: width, found: row.len() });
            }
            rows.push(row);
        }
        if rows.len() != declared {
            return Err(PgramError::FrameCount { declared, found: rows.len() });
        }
        Self::new(labels, rows, step)
    }
}

fn parse_dims(line: &str) -> Result<(usize, f64), PgramError> {
    let bad = |msg: &str| PgramError::Header { line: 3, msg: msg.to_string() };
    let mut frames = None;
    let mut step = None;
    for field in line.split_whitespace() {
        match field.split_once('=') {
            Some(("frames", v)) => frames = Some(v.parse::<usize>().map_err(|_| bad("bad frames"))?),
            Some(("step_ms", v)) => {
                let s = v.parse::<f64>().map_err(|_| bad("bad step_ms"))?;
                if !(s.is_finite() && s > 0.0) {
                    return Err(bad("step_ms must be positive"));
                }
                step = Some(s);
            }
            _ => return Err(bad("unexpected field")),
        }
    }
    Ok((frames.ok_or_else(|| bad("missing frames"))?, step.ok_or_else(|| bad("missing step_ms"))?))
}

pub fn read_posteriorgram<F: Real>(path: &Path) -> Result<Posteriorgram<F>, PgramError> {
    Posteriorgram::parse_pgram(&std::fs::read_to_string(path)?)
}

/// Writes atomically: a sibling temp file is renamed over `path`.
pub fn write_posteriorgram<F: Real>(pgram: &Posteriorgram<F>, path: &Path) -> Result<(), PgramError> {
    crate::io_util::write_atomic(path, pgram.to_pgram_string().as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> Vec<String> {
        ["a", "pause", "eos", "blank"].map(String::from).to_vec()
    }

    #[test]
    fn two_by_four() {
        let pg = Posteriorgram::<f64>::new(
            labels(),
            vec![vec![0.25, 0.25, 0.25, 0.25], vec![0.0, 0.0, 0.0, 1.0]],
            10.0,
        )
        .unwrap();
        let text = pg.to_pgram_string();
        assert_eq!(text.lines().count(), 5);
        assert_eq!(Posteriorgram::<f64>::parse_pgram(&text).unwrap(), pg);
    }

    #[test]
    fn empty_matrix_is_header_only() {
        let pg = Posteriorgram::<f32>::new(labels(), vec![], 10.0).unwrap();
        let text = pg.to_pgram_string();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(Posteriorgram::<f32>::parse_pgram(&text).unwrap().num_frames(), 0);
    }

    #[test]
    fn row_sum_violation_names_row() {
        let text = "PGRAM 1\na pause eos blank\nframes=2 step_ms=10\n0 0 0 1\n0.5 0.1 0.1 0.1\n";
        match Posteriorgram::<f64>::parse_pgram(text) {
            Err(PgramError::RowSum { row, sum }) => {
                assert_eq!(row, 1);
                assert!((sum - 0.8).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_errors() {
        assert!(matches!(Posteriorgram::<f64>::parse_pgram("PGRAM 2\n"), Err(PgramError::Header { line: 1, .. })));
        assert!(matches!(
            Posteriorgram::<f64>::parse_pgram("PGRAM 1\na pause eos blank\nframes=x step_ms=10\n"),
            Err(PgramError::Header { line: 3, .. })
        ));
        assert!(matches!(
            Posteriorgram::<f64>::parse_pgram("PGRAM 1\nblank a pause eos\nframes=0 step_ms=10\n"),
            Err(PgramError::Header { line: 2, .. })
        ));
        assert!(matches!(
            Posteriorgram::<f64>::parse_pgram("PGRAM 1\na pause eos blank\nframes=2 step_ms=10\n0 0 0 1\n"),
            Err(PgramError::FrameCount { declared: 2, found: 1 })
        ));
        assert!(matches!(
            Posteriorgram::<f64>::parse_pgram("PGRAM 1\na pause eos blank\nframes=1 step_ms=10\n0 0 1\n"),
            Err(PgramError::Width { row: 0, expected: 4, found: 3 })
        ));
    }

    #[test]
    fn inventory_check() {
        let pg = Posteriorgram::<f64>::new(labels(), vec![], 10.0).unwrap();
        let same = PhonemeInventory::new(&labels()).unwrap();
        let other = PhonemeInventory::new(&["b", "pause", "eos", "blank"]).unwrap();
        assert!(pg.check_inventory(&same).is_ok());
        assert!(matches!(pg.check_inventory(&other), Err(PgramError::InventoryMismatch { .. })));
    }
}
