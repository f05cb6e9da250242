use super::PnCode;
use crate::dsp::cyclic_autocorrelation;

/// Periodic autocorrelation of a code.
#[derive(Debug, Clone, PartialEq)]
pub struct Pacf {
    pub values: Vec<f64>,
    pub peak: f64,
    pub max_sidelobe: f64,
}

impl Pacf {
    /// `max_sidelobe / peak`, or 0 for an all-zero sequence.
    pub fn sidelobe_ratio(&self) -> f64 {
        if self.peak == 0.0 {
            0.0
        } else {
            self.max_sidelobe / self.peak.abs()
        }
    }
}

pub fn pacf(code: &PnCode) -> Pacf {
    pacf_of(code.values())
}

/// PACF of an arbitrary real sequence via DFT, squared magnitude, inverse DFT.
pub fn pacf_of(x: &[f64]) -> Pacf {
    if x.is_empty() {
        return Pacf { values: Vec::new(), peak: 0.0, max_sidelobe: 0.0 };
    }
    let (values, max_imag) = cyclic_autocorrelation(x);
    let peak = values[0];
    debug_assert!(max_imag <= 1e-9 * peak.abs().max(1.0), "imaginary residue {max_imag}");
    let max_sidelobe = values[1..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Pacf { values, peak, max_sidelobe }
}
