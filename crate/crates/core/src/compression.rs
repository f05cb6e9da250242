//! Matched filtering of DC-removed traces.
//!
//! The trace is linearly convolved with the `K·N_bit`-tap filter. The first
//! period of the output is the transient; every later complete period is a
//! copy of the compressed response `ĥ`, so those periods are averaged.

use rayon::prelude::*;
use thiserror::Error;

use crate::codes::PnCode;
use crate::dsp::FftConvolver;
use crate::stack::{Region, StackError, ThermogramStack};
use crate::waveform::{build_matched_filter, MatchedFilter, Timing, WaveformError};

#[derive(Debug, Error)]
pub enum CompressionError {
    #[error("need at least 2 excitation periods, got {0}")]
    TooFewPeriods(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("region {0:?} is empty or outside the frame")]
    EmptyRegion(Region),
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error(transparent)]
    Waveform(#[from] WaveformError),
    #[error(transparent)]
    Stack(#[from] StackError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    #[default]
    Raw,
    /// Divide by the PACF gain.
    PerGain,
    /// Divide by the code length `N_bit`.
    PerLength,
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::Raw => "RAW",
            Normalization::PerGain => "PER_GAIN",
            Normalization::PerLength => "PER_LENGTH",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "RAW" => Some(Normalization::Raw),
            "PER_GAIN" => Some(Normalization::PerGain),
            "PER_LENGTH" => Some(Normalization::PerLength),
            _ => None,
        }
    }

    fn divisor(self, filter: &MatchedFilter) -> f64 {
        match self {
            Normalization::Raw => 1.0,
            Normalization::PerGain => filter.gain,
            Normalization::PerLength => filter.n_bit as f64,
        }
    }
}

/// Which post-transient periods make up `ĥ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SteadyState {
    /// Mean of all `N_per - 1` steady periods.
    #[default]
    AverageAll,
    /// Steady period `i` alone (0 = the first after the transient).
    Single(usize),
}

/// One period of compressed output.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedTrace {
    pub values: Vec<f64>,
    pub normalization: Normalization,
    pub periods_averaged: usize,
}

/// A matched filter prepared for repeated use on traces of one length.
pub struct Compressor {
    filter: MatchedFilter,
    convolver: FftConvolver,
    input_len: usize,
    steady: SteadyState,
    normalization: Normalization,
}

impl Compressor {
    /// `input_len` must be a whole number (at least 2) of filter periods.
    pub fn new(
        filter: MatchedFilter,
        input_len: usize,
        steady: SteadyState,
        normalization: Normalization,
    ) -> Result<Self, CompressionError> {
        let period = filter.taps.len();
        if period == 0 || !input_len.is_multiple_of(period) {
            return Err(CompressionError::ShapeMismatch(format!(
                "{input_len} samples is not a whole number of {period}-sample periods"
            )));
        }
        let n_per = input_len / period;
        if n_per < 2 {
            return Err(CompressionError::TooFewPeriods(n_per));
        }
        if let SteadyState::Single(i) = steady {
            if i + 1 >= n_per {
                return Err(CompressionError::InvalidOption(format!(
                    "steady period {i} does not exist with {n_per} periods"
                )));
            }
        }
        let convolver = FftConvolver::new(&filter.taps, input_len);
        Ok(Compressor { filter, convolver, input_len, steady, normalization })
    }

    pub fn filter(&self) -> &MatchedFilter {
        &self.filter
    }

    pub fn period(&self) -> usize {
        self.filter.taps.len()
    }

    /// The post-transient periods of the raw convolution.
    pub fn steady_periods(&self, y: &[f64]) -> Result<Vec<Vec<f64>>, CompressionError> {
        if y.len() != self.input_len {
            return Err(CompressionError::ShapeMismatch(format!(
                "trace has {} samples, compressor expects {}",
                y.len(),
                self.input_len
            )));
        }
        let z = self.convolver.apply(y);
        let l = self.period();
        Ok(z[l..self.input_len].chunks_exact(l).map(<[f64]>::to_vec).collect())
    }

    pub fn compress(&self, y: &[f64]) -> Result<CompressedTrace, CompressionError> {
        let periods = self.steady_periods(y)?;
        let div = self.normalization.divisor(&self.filter);
        let (values, used): (Vec<f64>, usize) = match self.steady {
            SteadyState::Single(i) => (periods[i].iter().map(|v| v / div).collect(), 1),
            SteadyState::AverageAll => {
                let n = periods.len() as f64;
                let mut acc = vec![0.0; self.period()];
                for p in &periods {
                    for (a, v) in acc.iter_mut().zip(p) {
                        *a += v;
                    }
                }
                (acc.into_iter().map(|a| a / n / div).collect(), periods.len())
            }
        };
        Ok(CompressedTrace { values, normalization: self.normalization, periods_averaged: used })
    }
}

/// Compresses one trace with default options (all steady periods, RAW).
pub fn compress_trace(y: &[f64], filter: &MatchedFilter, _timing: &Timing) -> Result<CompressedTrace, CompressionError> {
    compress_trace_with(y, filter, SteadyState::AverageAll, Normalization::Raw)
}

pub fn compress_trace_with(
    y: &[f64],
    filter: &MatchedFilter,
    steady: SteadyState,
    normalization: Normalization,
) -> Result<CompressedTrace, CompressionError> {
    Compressor::new(filter.clone(), y.len(), steady, normalization)?.compress(y)
}

/// A compressed stack: one period per pixel, with its processing flags in the
/// stack metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedStack {
    pub stack: ThermogramStack,
    pub normalization: Normalization,
    pub periods_averaged: usize,
}

pub fn compress_stack(
    stack: &ThermogramStack,
    code: &PnCode,
    timing: &Timing,
    normalization: Normalization,
) -> Result<CompressedStack, CompressionError> {
    compress_stack_with(stack, code, timing, SteadyState::AverageAll, normalization)
}

pub fn compress_stack_with(
    stack: &ThermogramStack,
    code: &PnCode,
    timing: &Timing,
    steady: SteadyState,
    normalization: Normalization,
) -> Result<CompressedStack, CompressionError> {
    if (stack.fps() - timing.fps()).abs() > 1e-6 * timing.fps() {
        return Err(CompressionError::ShapeMismatch(format!(
            "stack recorded at {} FPS, timing says {}",
            stack.fps(),
            timing.fps()
        )));
    }
    let filter = build_matched_filter(code, timing)?;
    let compressor = Compressor::new(filter, stack.n_frames(), steady, normalization)?;
    let results: Vec<CompressedTrace> = (0..stack.n_pixels())
        .into_par_iter()
        .map(|p| compressor.compress(&stack.pixel_trace(p)))
        .collect::<Result<_, _>>()?;
    let periods_averaged = results.first().map_or(0, |r| r.periods_averaged);
    let traces: Vec<Vec<f64>> = results.into_iter().map(|r| r.values).collect();
    let mut out = ThermogramStack::from_traces(stack.nx(), stack.ny(), stack.fps(), &traces)?;
    out.metadata = stack.metadata.clone();
    let meta = &mut out.metadata;
    meta.insert("compressed".into(), "true".into());
    meta.insert("code_kind".into(), code.kind().to_string());
    meta.insert("n_bit".into(), code.n_bit().to_string());
    meta.insert("k".into(), timing.k().to_string());
    meta.insert("t_bit".into(), timing.t_bit().to_string());
    meta.insert("normalization".into(), normalization.as_str().into());
    meta.insert("periods_averaged".into(), periods_averaged.to_string());
    meta.insert("gain".into(), code.gain().to_string());
    Ok(CompressedStack { stack: out, normalization, periods_averaged })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Decimation {
    /// Keep the first frame of each bit.
    #[default]
    FirstFrame,
    /// Average the `K` frames of each bit.
    BinAverage,
}

/// Reduces a stack recorded at `K` frames per bit to one frame per bit.
pub fn decimate_to_bit_rate(stack: &ThermogramStack, timing: &Timing) -> Result<(ThermogramStack, Timing), CompressionError> {
    decimate_to_bit_rate_with(stack, timing, Decimation::FirstFrame)
}

pub fn decimate_to_bit_rate_with(
    stack: &ThermogramStack,
    timing: &Timing,
    mode: Decimation,
) -> Result<(ThermogramStack, Timing), CompressionError> {
    let k = timing.k();
    let new_timing = Timing::new(timing.t_bit(), 1.0 / timing.t_bit(), timing.n_per())?;
    if k == 1 {
        return Ok((stack.clone(), new_timing));
    }
    if !stack.n_frames().is_multiple_of(k) {
        return Err(CompressionError::ShapeMismatch(format!(
            "{} frames is not a whole number of {k}-frame bits",
            stack.n_frames()
        )));
    }
    let bits = stack.n_frames() / k;
    let traces: Vec<Vec<f64>> = stack
        .traces()
        .into_iter()
        .map(|t| match mode {
            Decimation::FirstFrame => t.iter().step_by(k).copied().collect(),
            Decimation::BinAverage => t.chunks_exact(k).map(|c| c.iter().sum::<f64>() / k as f64).collect(),
        })
        .collect();
    debug_assert!(traces.iter().all(|t| t.len() == bits));
    let mut out = ThermogramStack::from_traces(stack.nx(), stack.ny(), new_timing.fps(), &traces)?;
    out.metadata = stack.metadata.clone();
    out.metadata.insert("decimated_from_k".into(), k.to_string());
    out.metadata.insert(
        "decimation".into(),
        match mode {
            Decimation::FirstFrame => "FIRST_FRAME",
            Decimation::BinAverage => "BIN_AVERAGE",
        }
        .into(),
    );
    Ok((out, new_timing))
}

/// SNR figure with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrReport {
    /// `20·log10(contrast / noise)`; `-∞` for zero contrast, `+∞` for zero
    /// noise with nonzero contrast.
    pub db: f64,
    pub contrast: f64,
    pub noise: f64,
    /// Frame of peak contrast.
    pub peak_frame: usize,
}

impl SnrReport {
    pub fn is_saturated(&self) -> bool {
        self.db == f64::INFINITY
    }
}

fn region_mean_trace(stack: &ThermogramStack, region: &Region) -> Vec<f64> {
    let np = region.area() as f64;
    (0..stack.n_frames())
        .map(|f| {
            let frame = stack.frame(f).expect("frame index in range");
            region.pixels(stack.nx()).map(|p| frame[p]).sum::<f64>() / np
        })
        .collect()
}

/// Contrast-to-noise ratio in dB.
///
/// * contrast: peak over frames of `|mean(signal) - mean(reference)|`;
/// * noise: each reference pixel minus the reference mean trace (which
///   removes the smooth common trend); the residual standard deviation
///   `sqrt(Σ r² / ((P - 1)·T))`. A one-pixel reference uses the standard
///   deviation of first differences divided by `√2`.
///
/// Both parts are unchanged by adding a constant to the stack.
pub fn snr_metric(stack: &ThermogramStack, signal: &Region, reference: &Region) -> Result<SnrReport, CompressionError> {
    for r in [signal, reference] {
        if r.is_empty() || !r.fits(stack.nx(), stack.ny()) {
            return Err(CompressionError::EmptyRegion(*r));
        }
    }
    if stack.n_frames() < 2 {
        return Err(CompressionError::ShapeMismatch("SNR needs at least 2 frames".into()));
    }
    let s = region_mean_trace(stack, signal);
    let r = region_mean_trace(stack, reference);
    let (peak_frame, contrast) = s
        .iter()
        .zip(&r)
        .map(|(a, b)| (a - b).abs())
        .enumerate()
        .fold((0, 0.0), |best, (i, c)| if c > best.1 { (i, c) } else { best });

    let t = stack.n_frames();
    let p = reference.area();
    let noise = if p > 1 {
        let mut ss = 0.0;
        for (f, mean) in r.iter().enumerate() {
            let frame = stack.frame(f).expect("frame index in range");
            ss += reference.pixels(stack.nx()).map(|q| (frame[q] - mean).powi(2)).sum::<f64>();
        }
        (ss / ((p - 1) * t) as f64).sqrt()
    } else {
        let d: Vec<f64> = r.windows(2).map(|w| w[1] - w[0]).collect();
        let m = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (d.len().max(2) - 1) as f64;
        var.sqrt() / std::f64::consts::SQRT_2
    };
    let db = if contrast == 0.0 {
        f64::NEG_INFINITY
    } else if noise == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (contrast / noise).log10()
    };
    Ok(SnrReport { db, contrast, noise, peak_frame })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{binarize_ls4, generate_ls, modify_for_perfect_pacf, Sign};
    use crate::waveform::build_bipolar;

    #[test]
    fn code_itself_compresses_to_rect() {
        let code = binarize_ls4(&generate_ls(11).unwrap(), Sign::Plus).unwrap();
        let timing = Timing::new(1.0, 3.0, 2).unwrap();
        let x = build_bipolar(&code, &timing).samples;
        let y: Vec<f64> = x.iter().chain(&x).copied().collect();
        let filter = build_matched_filter(&code, &timing).unwrap();
        let h = compress_trace(&y, &filter, &timing).unwrap();
        for (n, v) in h.values.iter().enumerate() {
            let want = if n < 3 { 12.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-9);
        }
        assert_eq!(h.periods_averaged, 1);
    }

    #[test]
    fn zeros_and_short_input() {
        let code = modify_for_perfect_pacf(&generate_ls(7).unwrap()).unwrap();
        let timing = Timing::new(1.0, 2.0, 2).unwrap();
        let filter = build_matched_filter(&code, &timing).unwrap();
        let h = compress_trace(&[0.0; 28], &filter, &timing).unwrap();
        assert!(h.values.iter().all(|&v| v == 0.0));
        assert!(matches!(compress_trace(&[0.0; 14], &filter, &timing), Err(CompressionError::TooFewPeriods(1))));
        assert!(matches!(compress_trace(&[0.0; 15], &filter, &timing), Err(CompressionError::ShapeMismatch(_))));
    }

    #[test]
    fn decimation_keeps_first_frame() {
        let s = ThermogramStack::from_trace(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], 3.0);
        let t = Timing::new(1.0, 3.0, 2).unwrap();
        let (d, nt) = decimate_to_bit_rate(&s, &t).unwrap();
        assert_eq!(d.pixel_trace(0), vec![0.0, 3.0]);
        assert_eq!(nt.k(), 1);
        let (d, _) = decimate_to_bit_rate_with(&s, &t, Decimation::BinAverage).unwrap();
        assert_eq!(d.pixel_trace(0), vec![1.0, 4.0]);
    }

    #[test]
    fn snr_sentinels() {
        let traces: Vec<Vec<f64>> = (0..4).map(|p| vec![p as f64, p as f64 + 1.0, p as f64]).collect();
        let s = ThermogramStack::from_traces(4, 1, 1.0, &traces).unwrap();
        let a = Region::new(0, 0, 2, 1);
        let same = snr_metric(&s, &a, &a).unwrap();
        assert_eq!(same.db, f64::NEG_INFINITY);
        let flat: Vec<Vec<f64>> = (0..4).map(|p| vec![if p < 2 { 1.0 } else { 0.0 }; 3]).collect();
        let s = ThermogramStack::from_traces(4, 1, 1.0, &flat).unwrap();
        let r = snr_metric(&s, &a, &Region::new(2, 0, 4, 1)).unwrap();
        assert!(r.is_saturated());
        assert!(snr_metric(&s, &Region::new(0, 0, 5, 1), &a).is_err());
    }
}
