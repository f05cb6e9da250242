//! Frame timing, coded excitation waveforms and matched filters.
//!
//! Sample `n` stands for time `n·δt`; bit `b` occupies samples `[bK, (b+1)K)`.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::codes::PnCode;
use crate::dsp::cyclic_convolve;

#[derive(Debug, Error)]
pub enum WaveformError {
    #[error("T_bit * FPS = {product} is not an integer")]
    TimingMismatch { product: f64 },
    #[error("need at least 2 excitation periods, got {0}")]
    TooFewPeriods(usize),
    #[error("invalid timing: {0}")]
    InvalidTiming(String),
    #[error("amplitude must be positive, got {0}")]
    NonPositiveAmplitude(f64),
    #[error("the matched filter needs a modified code, got {0}")]
    UnmodifiedCode(crate::codes::CodeKind),
    #[error("invalid waveform: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Bit duration, frame rate, oversampling factor and number of periods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    t_bit: f64,
    fps: f64,
    k: usize,
    n_per: usize,
}

impl Timing {
    /// `t_bit·fps` must be a positive integer to within 1e-6 relative, loose
    /// enough to accept a frame rate read back from `f32` storage.
    pub fn new(t_bit: f64, fps: f64, n_per: usize) -> Result<Self, WaveformError> {
        if !(t_bit.is_finite() && t_bit > 0.0) {
            return Err(WaveformError::InvalidTiming(format!("T_bit must be positive, got {t_bit}")));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(WaveformError::InvalidTiming(format!("FPS must be positive, got {fps}")));
        }
        let product = t_bit * fps;
        let k = product.round();
        if k < 1.0 || (product - k).abs() > 1e-6 * k {
            return Err(WaveformError::TimingMismatch { product });
        }
        if n_per < 2 {
            return Err(WaveformError::TooFewPeriods(n_per));
        }
        Ok(Timing { t_bit, fps, k: k as usize, n_per })
    }

    pub fn t_bit(&self) -> f64 {
        self.t_bit
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    /// Frames per bit.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_per(&self) -> usize {
        self.n_per
    }

    pub fn f_bit(&self) -> f64 {
        1.0 / self.t_bit
    }

    /// Frame interval δt.
    pub fn dt(&self) -> f64 {
        1.0 / self.fps
    }

    /// Duration of one code period, `N_bit·T_bit`.
    pub fn t_meas(&self, n_bit: usize) -> f64 {
        n_bit as f64 * self.t_bit
    }

    pub fn period_samples(&self, n_bit: usize) -> usize {
        self.k * n_bit
    }

    pub fn total_samples(&self, n_bit: usize) -> usize {
        self.n_per * self.k * n_bit
    }

    pub fn with_n_per(self, n_per: usize) -> Result<Self, WaveformError> {
        Timing::new(self.t_bit, self.fps, n_per)
    }
}

/// A single rectangular heat pulse `A·Π(t, T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectPulse {
    duration: f64,
    amplitude: f64,
}

impl RectPulse {
    pub fn new(duration: f64, amplitude: f64) -> Result<Self, WaveformError> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(WaveformError::InvalidInput(format!("pulse duration must be positive, got {duration}")));
        }
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(WaveformError::NonPositiveAmplitude(amplitude));
        }
        Ok(RectPulse { duration, amplitude })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Frame-averaged samples: the fraction of each frame covered by the
    /// pulse, times the amplitude.
    pub fn samples(&self, dt: f64, n_frames: usize) -> Vec<f64> {
        (0..n_frames)
            .map(|n| {
                let t0 = n as f64 * dt;
                let covered = (self.duration - t0).clamp(0.0, dt);
                self.amplitude * covered / dt
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveformKind {
    /// One period of the oversampled bipolar code.
    BipolarXpn,
    /// `N_per` periods of the unipolar heat-source modulation.
    UnipolarXth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationWaveform {
    pub samples: Vec<f64>,
    pub kind: WaveformKind,
    pub timing: Timing,
    /// Peak heat flux `A` (unipolar only).
    pub amplitude: Option<f64>,
    pub source: PnCode,
}

fn oversample(values: impl Iterator<Item = f64>, k: usize) -> Vec<f64> {
    values.flat_map(|v| std::iter::repeat_n(v, k)).collect()
}

/// One period of `code.values()` with each bit held for `K` frames.
pub fn build_bipolar(code: &PnCode, timing: &Timing) -> ExcitationWaveform {
    ExcitationWaveform {
        samples: oversample(code.values().iter().copied(), timing.k()),
        kind: WaveformKind::BipolarXpn,
        timing: *timing,
        amplitude: None,
        source: code.clone(),
    }
}

/// Like [`build_bipolar`] but from the unshifted base sequence, which is the
/// one a physical source can follow.
pub fn build_physical_bipolar(code: &PnCode, timing: &Timing) -> ExcitationWaveform {
    ExcitationWaveform {
        samples: oversample(code.base().iter().map(|&b| f64::from(b)), timing.k()),
        kind: WaveformKind::BipolarXpn,
        timing: *timing,
        amplitude: None,
        source: code.clone(),
    }
}

/// `x_TH[n] = (A/2)(x_PN[n mod KN] + 1)` over `n_per` periods.
pub fn build_unipolar(bipolar: &ExcitationWaveform, amplitude: f64, n_per: usize) -> Result<ExcitationWaveform, WaveformError> {
    if bipolar.kind != WaveformKind::BipolarXpn {
        return Err(WaveformError::InvalidInput("build_unipolar expects a bipolar waveform".into()));
    }
    if !(amplitude.is_finite() && amplitude > 0.0) {
        return Err(WaveformError::NonPositiveAmplitude(amplitude));
    }
    if bipolar.samples.iter().any(|v| !(-1.0..=1.0).contains(v)) {
        return Err(WaveformError::InvalidInput("bipolar samples must lie in [-1, 1]".into()));
    }
    let timing = bipolar.timing.with_n_per(n_per)?;
    let period = unipolar_samples(&bipolar.samples, amplitude);
    let samples = period.iter().copied().cycle().take(period.len() * n_per).collect();
    Ok(ExcitationWaveform {
        samples,
        kind: WaveformKind::UnipolarXth,
        timing,
        amplitude: Some(amplitude),
        source: bipolar.source.clone(),
    })
}

/// `(A/2)(x + 1)` elementwise.
pub fn unipolar_samples(bipolar: &[f64], amplitude: f64) -> Vec<f64> {
    bipolar.iter().map(|&x| 0.5 * amplitude * (x + 1.0)).collect()
}

impl ExcitationWaveform {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample times `n·δt`.
    pub fn times(&self) -> Vec<f64> {
        let dt = self.timing.dt();
        (0..self.samples.len()).map(|n| n as f64 * dt).collect()
    }

    /// Constant and coded parts `(x_DC, x_AC)` of a unipolar waveform, with
    /// `x_DC = A/2` and `x_AC = (A/2)·x_PN`.
    pub fn decompose(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let a = self.amplitude?;
        let dc = vec![0.5 * a; self.samples.len()];
        let ac = self.samples.iter().map(|&x| x - 0.5 * a).collect();
        Some((dc, ac))
    }

    /// Two-column CSV `time_s,value`.
    pub fn write_csv(&self, path: &Path) -> Result<(), WaveformError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "time_s,value")?;
        for (t, v) in self.times().iter().zip(&self.samples) {
            writeln!(out, "{t},{v}")?;
        }
        out.flush()?;
        Ok(())
    }

    /// The waveform as a 1×1 thermogram stack, for the binary trace format.
    pub fn to_stack(&self) -> crate::stack::ThermogramStack {
        let mut stack = crate::stack::ThermogramStack::from_trace(&self.samples, self.timing.fps());
        let kind = match self.kind {
            WaveformKind::BipolarXpn => "BIPOLAR_XPN",
            WaveformKind::UnipolarXth => "UNIPOLAR_XTH",
        };
        stack.metadata.insert("waveform".into(), kind.into());
        stack.metadata.insert("t_bit".into(), self.timing.t_bit().to_string());
        stack.metadata.insert("n_per".into(), self.timing.n_per().to_string());
        if let Some(a) = self.amplitude {
            stack.metadata.insert("amplitude".into(), a.to_string());
        }
        stack.metadata.insert("code".into(), crate::codes::format_descriptor(&self.source));
        stack
    }
}

/// Time-reversed modified code, zero-padded to `K·N_bit` taps.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedFilter {
    pub taps: Vec<f64>,
    pub gain: f64,
    pub k: usize,
    pub n_bit: usize,
}

pub fn build_matched_filter(code: &PnCode, timing: &Timing) -> Result<MatchedFilter, WaveformError> {
    if !code.is_modified() {
        return Err(WaveformError::UnmodifiedCode(code.kind()));
    }
    let n_bit = code.n_bit();
    let k = timing.k();
    let values = code.values();
    let taps = (0..k * n_bit)
        .map(|n| if n % k == 0 { values[(n_bit - n / k) % n_bit] } else { 0.0 })
        .collect();
    Ok(MatchedFilter { taps, gain: code.gain(), k, n_bit })
}

/// Cyclic convolution of the oversampled modified code with its matched
/// filter. For a perfect code this is `gain` on samples `0..K` and zero
/// elsewhere.
pub fn verify_resolution(code: &PnCode, timing: &Timing) -> Result<Vec<f64>, WaveformError> {
    let filter = build_matched_filter(code, timing)?;
    let x = build_bipolar(code, timing).samples;
    Ok(cyclic_convolve(&x, &filter.taps))
}
