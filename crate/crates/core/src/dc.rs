//! Step-heating (DC) trend fit and removal.
//!
//! Each trace is fitted with `y_DC(t) = a1·t + a2·t^0.75 + a3·t^0.5`,
//! `a_k ≥ 0`, over the whole record (`t_n = n·δt`, uniform weights). The AC
//! part fed to the matched filter is `y - (1 - bias)·y_DC`: a biased code
//! carries part of its energy in the constant term, and that share of the
//! trend must stay in the signal.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::codes::{CodeKind, PnCode};
use crate::nnls::Nnls;
use crate::stack::ThermogramStack;
use crate::waveform::Timing;

pub const EXPONENTS: [f64; 3] = [1.0, 0.75, 0.5];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DcError {
    #[error("degenerate trace: {0}")]
    DegenerateTrace(String),
    #[error("{kind} code carries bias {bias}, expected {expected}")]
    BiasMismatch { kind: CodeKind, bias: f64, expected: f64 },
    #[error("trace has {found} samples, fit expects {expected}")]
    LengthMismatch { expected: usize, found: usize },
}

/// Coefficients of the constrained power-law fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcFit {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    /// RMS of `y - y_DC`.
    pub rms_residual: f64,
    /// Bias of the code used when removing this fit (0 until then).
    pub bias_used: f64,
    /// Sample interval of the fitted trace.
    pub dt: f64,
}

impl DcFit {
    pub fn coefficients(&self) -> [f64; 3] {
        [self.a1, self.a2, self.a3]
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.a1 * t + self.a2 * t.powf(0.75) + self.a3 * t.sqrt()
    }

    /// `y_DC[n]` for `n < len`.
    pub fn evaluate(&self, len: usize) -> Vec<f64> {
        (0..len).map(|n| self.value_at(n as f64 * self.dt)).collect()
    }
}

/// Reusable fitter for traces of one length and frame rate.
pub struct DcFitter {
    len: usize,
    dt: f64,
    solver: Nnls,
}

impl DcFitter {
    pub fn new(len: usize, dt: f64) -> Self {
        let columns: Vec<Vec<f64>> = EXPONENTS
            .iter()
            .map(|&p| (0..len).map(|n| (n as f64 * dt).powf(p)).collect())
            .collect();
        DcFitter { len, dt, solver: Nnls::new(&columns) }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn fit(&self, trace: &[f64]) -> Result<DcFit, DcError> {
        if trace.len() != self.len {
            return Err(DcError::LengthMismatch { expected: self.len, found: trace.len() });
        }
        check_trace(trace)?;
        let sol = self.solver.solve(trace);
        Ok(DcFit {
            a1: sol.x[0],
            a2: sol.x[1],
            a3: sol.x[2],
            rms_residual: sol.residual_norm / (self.len as f64).sqrt(),
            bias_used: 0.0,
            dt: self.dt,
        })
    }
}

fn check_trace(trace: &[f64]) -> Result<(), DcError> {
    if trace.len() < 2 {
        return Err(DcError::DegenerateTrace(format!("{} samples", trace.len())));
    }
    if let Some(i) = trace.iter().position(|v| !v.is_finite()) {
        return Err(DcError::DegenerateTrace(format!("non-finite sample at {i}")));
    }
    if trace.iter().all(|&v| v == trace[0]) {
        return Err(DcError::DegenerateTrace(format!("constant value {}", trace[0])));
    }
    Ok(())
}

/// Fits the DC trend of one trace sampled at `timing.fps()`.
pub fn fit_dc(trace: &[f64], timing: &Timing) -> Result<DcFit, DcError> {
    DcFitter::new(trace.len(), timing.dt()).fit(trace)
}

fn check_code_bias(code: &PnCode) -> Result<(), DcError> {
    if code.check_bias() {
        Ok(())
    } else {
        Err(DcError::BiasMismatch { kind: code.kind(), bias: code.bias(), expected: code.expected_bias() })
    }
}

/// `y - (1 - bias)·y_DC`.
pub fn remove_dc(trace: &[f64], fit: &DcFit, code: &PnCode) -> Result<Vec<f64>, DcError> {
    check_code_bias(code)?;
    let scale = 1.0 - code.bias();
    Ok(trace
        .iter()
        .enumerate()
        .map(|(n, &y)| y - scale * fit.value_at(n as f64 * fit.dt))
        .collect())
}

/// Per-pixel fit outcomes, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FitMap {
    pub nx: usize,
    pub ny: usize,
    pub fits: Vec<Result<DcFit, DcError>>,
}

impl FitMap {
    pub fn get(&self, x: usize, y: usize) -> &Result<DcFit, DcError> {
        &self.fits[y * self.nx + x]
    }

    pub fn degenerate_count(&self) -> usize {
        self.fits.iter().filter(|f| f.is_err()).count()
    }

    /// CSV `j_x,j_y,a1,a2,a3,rms`; degenerate pixels get `NaN` fields.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "j_x,j_y,a1,a2,a3,rms")?;
        for (p, f) in self.fits.iter().enumerate() {
            let (x, y) = (p % self.nx, p / self.nx);
            match f {
                Ok(f) => writeln!(out, "{x},{y},{},{},{},{}", f.a1, f.a2, f.a3, f.rms_residual)?,
                Err(_) => writeln!(out, "{x},{y},NaN,NaN,NaN,NaN")?,
            }
        }
        out.flush()
    }
}

/// Fits and removes the DC trend of every pixel.
///
/// A degenerate pixel does not stop the run: its entry in the fit map holds
/// the error and its output trace is all zeros.
pub fn remove_dc_stack(stack: &ThermogramStack, code: &PnCode) -> Result<(ThermogramStack, FitMap), DcError> {
    check_code_bias(code)?;
    let fitter = DcFitter::new(stack.n_frames(), 1.0 / stack.fps());
    let scale = 1.0 - code.bias();
    let results: Vec<(Vec<f64>, Result<DcFit, DcError>)> = (0..stack.n_pixels())
        .into_par_iter()
        .map(|p| {
            let trace = stack.pixel_trace(p);
            match fitter.fit(&trace) {
                Ok(mut fit) => {
                    fit.bias_used = code.bias();
                    let ac = trace
                        .iter()
                        .enumerate()
                        .map(|(n, &y)| y - scale * fit.value_at(n as f64 * fit.dt))
                        .collect();
                    (ac, Ok(fit))
                }
                Err(e) => (vec![0.0; trace.len()], Err(e)),
            }
        })
        .collect();
    let (traces, fits): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let mut out = ThermogramStack::from_traces(stack.nx(), stack.ny(), stack.fps(), &traces)
        .expect("shape preserved from a valid stack");
    out.metadata = stack.metadata.clone();
    out.metadata.insert("dc_removed".into(), "true".into());
    out.metadata.insert("dc_bias".into(), format!("{:.16e}", code.bias()));
    Ok((out, FitMap { nx: stack.nx(), ny: stack.ny(), fits }))
}
