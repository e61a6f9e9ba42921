//! Per-iteration solver traces and their CSV form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "iter,objective,step_residual,fp_residual,psnr,seconds";

/// One iteration of a run. Quantities that are not defined for a scheme are
/// stored as NaN.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub step_residual: f64,
    pub fp_residual: f64,
    pub psnr: f64,
    pub seconds: f64,
}

impl TraceRow {
    fn same_as(&self, other: &TraceRow) -> bool {
        let eq = |a: f64, b: f64| (a.is_nan() && b.is_nan()) || a == b;
        self.iter == other.iter
            && eq(self.objective, other.objective)
            && eq(self.step_residual, other.step_residual)
            && eq(self.fp_residual, other.fp_residual)
            && eq(self.psnr, other.psnr)
            && eq(self.seconds, other.seconds)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Trace {
    rows: Vec<TraceRow>,
}

impl PartialEq for Trace {
    /// NaN fields compare equal to NaN.
    fn eq(&self, other: &Self) -> bool {
        self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| a.same_as(b))
    }
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a row. Iteration indices must be strictly increasing.
    pub fn push(&mut self, row: TraceRow) {
        if let Some(last) = self.rows.last() {
            assert!(row.iter > last.iter, "trace iterations must increase");
        }
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.objective).collect()
    }

    pub fn step_residuals(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.step_residual).collect()
    }

    pub fn fp_residuals(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.fp_residual).collect()
    }

    pub fn psnrs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.psnr).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{}", r.iter);
            for v in [r.objective, r.step_residual, r.fp_residual, r.psnr, r.seconds] {
                out.push(',');
                if !v.is_nan() {
                    let _ = write!(out, "{v:e}");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.split_inclusive('\n');
        let mut offset = 0;
        let header = lines.next().ok_or(Error::Parse {
            offset: 0,
            message: "empty trace file".into(),
        })?;
        if header.trim_end_matches(['\r', '\n']) != TRACE_HEADER {
            return Err(Error::Parse {
                offset: 0,
                message: format!("expected header `{TRACE_HEADER}`"),
            });
        }
        offset += header.len();
        let mut trace = Trace::new();
        for line in lines {
            let body = line.trim_end_matches(['\r', '\n']);
            if body.is_empty() {
                offset += line.len();
                continue;
            }
            let bad = |message: String| Error::Parse { offset, message };
            let fields: Vec<&str> = body.split(',').collect();
            if fields.len() != 6 {
                return Err(bad(format!("expected 6 fields, found {}", fields.len())));
            }
            let iter: usize = fields[0]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad iteration index `{}`", fields[0])))?;
            let mut vals = [f64::NAN; 5];
            for (slot, field) in vals.iter_mut().zip(&fields[1..]) {
                let f = field.trim();
                if !f.is_empty() {
                    *slot = f.parse().map_err(|_| bad(format!("bad number `{f}`")))?;
                }
            }
            if trace.rows.last().is_some_and(|r| r.iter >= iter) {
                return Err(bad("iteration indices must increase".into()));
            }
            trace.rows.push(TraceRow {
                iter,
                objective: vals[0],
                step_residual: vals[1],
                fp_residual: vals[2],
                psnr: vals[3],
                seconds: vals[4],
            });
            offset += line.len();
        }
        Ok(trace)
    }
}

pub fn write_trace(t: &Trace, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, t.to_csv())?;
    Ok(())
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Trace> {
    Trace::from_csv(&fs::read_to_string(path)?)
}
