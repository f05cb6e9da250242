use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Linear convolution of `a` and `b`, truncated to `out_len` samples.
pub(crate) fn convolve(a: &[f64], b: &[f64], out_len: usize) -> Vec<f64> {
    if a.is_empty() || b.is_empty() || out_len == 0 {
        return vec![0.0; out_len];
    }
    let full = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 32 {
        let mut out = vec![0.0; out_len];
        for (n, o) in out.iter_mut().enumerate().take(full) {
            let lo = n.saturating_sub(b.len() - 1);
            let hi = n.min(a.len() - 1);
            *o = (lo..=hi).map(|m| a[m] * b[n - m]).sum();
        }
        return out;
    }
    let conv = FftConvolver::new(b, a.len());
    let mut out = conv.apply(a);
    out.resize(out_len, 0.0);
    out
}

/// Cyclic convolution of two equal-length sequences.
pub(crate) fn cyclic_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut fa: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut fb: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa.iter().map(|c| c.re * scale).collect()
}

/// Periodic autocorrelation via |DFT|² and an inverse DFT.
///
/// Returns the real part and the largest discarded imaginary residue.
pub(crate) fn cyclic_autocorrelation(x: &[f64]) -> (Vec<f64>, f64) {
    let n = x.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex64::new(c.norm_sqr(), 0.0);
    }
    inv.process(&mut buf);
    let scale = 1.0 / n as f64;
    let imag = buf.iter().map(|c| (c.im * scale).abs()).fold(0.0, f64::max);
    (buf.iter().map(|c| c.re * scale).collect(), imag)
}

/// Linear convolution against a fixed kernel, reusable across many inputs.
///
/// Plans and the kernel spectrum are computed once; `apply` is safe to call
/// from several threads.
pub(crate) struct FftConvolver {
    fft_len: usize,
    kernel_len: usize,
    spectrum: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl FftConvolver {
    /// `max_input_len` bounds the inputs later passed to [`apply`](Self::apply).
    pub(crate) fn new(kernel: &[f64], max_input_len: usize) -> Self {
        let fft_len = (max_input_len + kernel.len()).saturating_sub(1).max(1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(fft_len);
        let inv = planner.plan_fft_inverse(fft_len);
        let mut spectrum = vec![Complex64::new(0.0, 0.0); fft_len];
        for (s, &k) in spectrum.iter_mut().zip(kernel) {
            s.re = k;
        }
        fwd.process(&mut spectrum);
        Self { fft_len, kernel_len: kernel.len(), spectrum, fwd, inv }
    }

    /// Full linear convolution (`input.len() + kernel.len() - 1` samples).
    pub(crate) fn apply(&self, input: &[f64]) -> Vec<f64> {
        assert!(input.len() + self.kernel_len - 1 <= self.fft_len);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
        for (b, &x) in buf.iter_mut().zip(input) {
            b.re = x;
        }
        self.fwd.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.inv.process(&mut buf);
        let scale = 1.0 / self.fft_len as f64;
        buf.truncate(input.len() + self.kernel_len - 1);
        buf.iter().map(|c| c.re * scale).collect()
    }
}
