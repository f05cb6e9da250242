//! 1-D surface thermal responses and synthetic thermogram stacks.
//!
//! A sound pixel is a semi-infinite body with surface impulse response
//! `h(τ) = A/√(πτ)`. A defective pixel adds one reflecting interface at depth
//! `d`, giving the image series
//!
//! ```text
//! h(τ) = A/√(πτ) · [1 + 2 Σ_{m≥1} R^m exp(-m²d²/(ατ))]
//! ```
//!
//! Samples are frame averages `(1/δt)∫ h` over `[nδt, (n+1)δt]`, computed in
//! closed form, so the integrable singularity at `τ = 0` causes no trouble.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::dsp::convolve;
use crate::stack::{Region, ThermogramStack};
use crate::waveform::{ExcitationWaveform, RectPulse, Timing};

/// Relative size below which image terms are dropped.
const SERIES_TOLERANCE: f64 = 1e-18;
const MAX_SERIES_TERMS: usize = 100_000;

#[derive(Debug, Error)]
pub enum ThermalError {
    #[error("invalid pixel model: {0}")]
    InvalidModel(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("impulse response sampled at dt = {h_dt}, excitation at dt = {x_dt}")]
    RateMismatch { h_dt: f64, x_dt: f64 },
    #[error("scene config: {0}")]
    Config(String),
    #[error(transparent)]
    Stack(#[from] crate::stack::StackError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn default_reflection() -> f64 {
    0.0
}

fn default_amplitude() -> f64 {
    1.0
}

/// 1-D thermal description of one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PixelModel {
    /// α in m²/s.
    pub diffusivity: f64,
    /// Interface depth in metres; `None` for a sound pixel.
    #[serde(default)]
    pub defect_depth: Option<f64>,
    /// Interface reflection coefficient in (-1, 1].
    #[serde(default = "default_reflection")]
    pub reflection_coeff: f64,
    /// Intensity per unit heat flux.
    #[serde(default = "default_amplitude")]
    pub amplitude_scale: f64,
}

impl PixelModel {
    pub fn sound(diffusivity: f64, amplitude_scale: f64) -> Self {
        PixelModel { diffusivity, defect_depth: None, reflection_coeff: 0.0, amplitude_scale }
    }

    pub fn defective(diffusivity: f64, depth: f64, reflection_coeff: f64, amplitude_scale: f64) -> Self {
        PixelModel { diffusivity, defect_depth: Some(depth), reflection_coeff, amplitude_scale }
    }

    pub fn validate(&self) -> Result<(), ThermalError> {
        let bad = |m: String| Err(ThermalError::InvalidModel(m));
        if !(self.diffusivity.is_finite() && self.diffusivity > 0.0) {
            return bad(format!("diffusivity must be positive, got {}", self.diffusivity));
        }
        if !self.amplitude_scale.is_finite() {
            return bad(format!("amplitude_scale must be finite, got {}", self.amplitude_scale));
        }
        if let Some(d) = self.defect_depth {
            if !(d.is_finite() && d > 0.0) {
                return bad(format!("defect depth must be positive, got {d}"));
            }
        }
        let r = self.reflection_coeff;
        if !(r > -1.0 && r <= 1.0) {
            return bad(format!("reflection coefficient must lie in (-1, 1], got {r}"));
        }
        if self.defect_depth.is_none() && r != 0.0 {
            return bad("a reflection coefficient needs a defect depth".into());
        }
        Ok(())
    }

    /// Image terms kept for responses up to time `t_max`.
    pub fn series_terms(&self, t_max: f64) -> usize {
        let Some(d) = self.defect_depth else { return 0 };
        let r = self.reflection_coeff.abs();
        if r == 0.0 {
            return 0;
        }
        let c = d * d / (self.diffusivity * t_max);
        let mut m = 1usize;
        while m <= MAX_SERIES_TERMS {
            let bound = r.powi(m as i32) * (-(m as f64).powi(2) * c).exp();
            if bound < SERIES_TOLERANCE {
                return m - 1;
            }
            m += 1;
        }
        MAX_SERIES_TERMS
    }

    /// Point value `h(τ)`.
    pub fn kernel(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        let mut s = 1.0;
        if let Some(d) = self.defect_depth {
            let r = self.reflection_coeff;
            for m in 1..=self.series_terms(tau) {
                let mf = m as f64;
                s += 2.0 * r.powi(m as i32) * (-(mf * mf * d * d) / (self.diffusivity * tau)).exp();
            }
        }
        self.amplitude_scale * s / (PI * tau).sqrt()
    }
}

/// `∫₀ᵗ τ^{-1/2} exp(-a/τ) dτ`.
fn image_integral(t: f64, a: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let x = (a / t).sqrt();
    2.0 * t.sqrt() * (-a / t).exp() - 2.0 * (PI * a).sqrt() * erfc(x)
}

/// Frame-averaged impulse response with its sample interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub samples: Vec<f64>,
    pub dt: f64,
}

/// Frames covering `duration` seconds (a trailing partial frame counts).
pub fn frames_for(duration: f64, dt: f64) -> usize {
    let n = duration / dt;
    let r = n.round();
    if (n - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        n.ceil() as usize
    }
}

/// Frame-averaged impulse response over `duration` seconds, optionally with a
/// custom number of image terms.
pub fn impulse_response_with_terms(model: &PixelModel, dt: f64, n_frames: usize, terms: Option<usize>) -> Vec<f64> {
    let t_max = n_frames as f64 * dt;
    let terms = terms.unwrap_or_else(|| model.series_terms(t_max));
    let scale = model.amplitude_scale / (PI.sqrt() * dt);
    let images: Vec<(f64, f64)> = match model.defect_depth {
        Some(d) if terms > 0 => (1..=terms)
            .map(|m| {
                let mf = m as f64;
                (2.0 * model.reflection_coeff.powi(m as i32), mf * mf * d * d / model.diffusivity)
            })
            .collect(),
        _ => Vec::new(),
    };
    let mut prev: Vec<f64> = vec![0.0; images.len()];
    (0..n_frames)
        .map(|n| {
            let t0 = n as f64 * dt;
            let t1 = (n + 1) as f64 * dt;
            // 2(√t1 - √t0) without cancellation
            let mut s = 2.0 * dt / (t1.sqrt() + t0.sqrt());
            for (i, &(w, a)) in images.iter().enumerate() {
                let g = image_integral(t1, a);
                s += w * (g - prev[i]);
                prev[i] = g;
            }
            scale * s
        })
        .collect()
}

/// `h[n] = (1/δt)∫_{nδt}^{(n+1)δt} h(τ) dτ` for `n` covering `duration`.
pub fn impulse_response(model: &PixelModel, timing: &Timing, duration: f64) -> ImpulseResponse {
    let dt = timing.dt();
    ImpulseResponse { samples: impulse_response_with_terms(model, dt, frames_for(duration, dt), None), dt }
}

/// `y[n] = δt Σ_{m≤n} h[n-m] x[m]`, the response at the end of frame `n` to a
/// flux held at `x[m]` during frame `m`. Output length equals `x.len()`.
pub fn respond_samples(h: &[f64], x: &[f64], dt: f64) -> Vec<f64> {
    let mut y = convolve(x, h, x.len());
    for v in &mut y {
        *v *= dt;
    }
    y
}

pub fn respond(h: &ImpulseResponse, excitation: &ExcitationWaveform) -> Result<Vec<f64>, ThermalError> {
    let x_dt = excitation.timing.dt();
    if (h.dt - x_dt).abs() > 1e-12 * x_dt {
        return Err(ThermalError::RateMismatch { h_dt: h.dt, x_dt });
    }
    Ok(respond_samples(&h.samples, &excitation.samples, h.dt))
}

/// Direct response to a single rectangular pulse over `duration` seconds.
pub fn lpt_reference(model: &PixelModel, pulse: &RectPulse, timing: &Timing, duration: f64) -> Vec<f64> {
    let dt = timing.dt();
    let n = frames_for(duration, dt);
    let h = impulse_response_with_terms(model, dt, n, None);
    respond_samples(&h, &pulse.samples(dt, n), dt)
}

/// Noiseless response of one pixel to an excitation.
pub fn simulate_trace(model: &PixelModel, excitation: &ExcitationWaveform) -> Result<Vec<f64>, ThermalError> {
    model.validate()?;
    let dt = excitation.timing.dt();
    let h = impulse_response_with_terms(model, dt, excitation.samples.len(), None);
    Ok(respond_samples(&h, &excitation.samples, dt))
}

/// A rectangular patch with its own pixel model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defect {
    pub region: Region,
    pub model: PixelModel,
}

/// A synthetic scene: a background model, defect patches and white noise.
///
/// TOML schema:
///
/// ```toml
/// nx = 64
/// ny = 64
/// noise_sigma = 0.01
/// rng_seed = 7
///
/// [background]
/// diffusivity = 1e-6
///
/// [[defects]]
/// region = { x0 = 4, y0 = 4, x1 = 12, y1 = 12 }
/// model = { diffusivity = 1e-6, defect_depth = 5e-4, reflection_coeff = 0.9 }
/// ```
///
/// Where patches overlap, the later one wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub nx: usize,
    pub ny: usize,
    pub background: PixelModel,
    #[serde(default)]
    pub defects: Vec<Defect>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

impl SceneConfig {
    pub fn uniform(nx: usize, ny: usize, model: PixelModel) -> Self {
        SceneConfig { nx, ny, background: model, defects: Vec::new(), noise_sigma: 0.0, rng_seed: 0 }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ThermalError> {
        let scene: SceneConfig = toml::from_str(text).map_err(|e| ThermalError::Config(e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: &Path) -> Result<Self, ThermalError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ThermalError> {
        if self.nx == 0 || self.ny == 0 {
            return Err(ThermalError::InvalidScene(format!("empty grid {}x{}", self.nx, self.ny)));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(ThermalError::InvalidScene(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        self.background.validate()?;
        for (i, d) in self.defects.iter().enumerate() {
            if d.region.is_empty() || !d.region.fits(self.nx, self.ny) {
                return Err(ThermalError::InvalidScene(format!(
                    "defect {i} region {:?} is empty or outside the {}x{} grid",
                    d.region, self.nx, self.ny
                )));
            }
            d.model.validate()?;
        }
        Ok(())
    }

    /// Model index per pixel (0 = background, i + 1 = defect i), row-major.
    pub fn model_map(&self) -> Vec<usize> {
        let mut map = vec![0; self.nx * self.ny];
        for (i, d) in self.defects.iter().enumerate() {
            for p in d.region.pixels(self.nx) {
                map[p] = i + 1;
            }
        }
        map
    }

    pub fn models(&self) -> Vec<PixelModel> {
        std::iter::once(self.background).chain(self.defects.iter().map(|d| d.model)).collect()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the noise stream of pixel `(x, y)`.
pub fn pixel_seed(rng_seed: u64, x: usize, y: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(rng_seed) ^ x as u64) ^ y as u64)
}

/// Adds `N(0, σ²)` noise to a trace from the stream of pixel `(x, y)`.
pub fn add_pixel_noise(trace: &mut [f64], sigma: f64, rng_seed: u64, x: usize, y: usize) {
    if sigma == 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(pixel_seed(rng_seed, x, y));
    let normal = Normal::new(0.0, sigma).expect("sigma validated as finite and non-negative");
    for v in trace {
        *v += normal.sample(&mut rng);
    }
}

/// Responds every pixel of `scene` to `excitation` and adds noise.
///
/// Each pixel draws noise from its own stream seeded by
/// `(rng_seed, x, y)`, so the result does not depend on thread scheduling.
pub fn simulate_stack(scene: &SceneConfig, excitation: &ExcitationWaveform) -> Result<ThermogramStack, ThermalError> {
    scene.validate()?;
    let dt = excitation.timing.dt();
    let n = excitation.samples.len();
    let clean: Vec<Vec<f64>> = scene
        .models()
        .par_iter()
        .map(|m| {
            let h = impulse_response_with_terms(m, dt, n, None);
            respond_samples(&h, &excitation.samples, dt)
        })
        .collect();
    let map = scene.model_map();
    let traces: Vec<Vec<f64>> = (0..scene.nx * scene.ny)
        .into_par_iter()
        .map(|p| {
            let mut t = clean[map[p]].clone();
            add_pixel_noise(&mut t, scene.noise_sigma, scene.rng_seed, p % scene.nx, p / scene.nx);
            t
        })
        .collect();
    let mut stack = ThermogramStack::from_traces(scene.nx, scene.ny, excitation.timing.fps(), &traces)?;
    let mut meta = BTreeMap::new();
    meta.insert("source".to_string(), "simulate_stack".to_string());
    meta.insert("rng_seed".to_string(), scene.rng_seed.to_string());
    meta.insert("noise_sigma".to_string(), scene.noise_sigma.to_string());
    meta.insert("t_bit".to_string(), excitation.timing.t_bit().to_string());
    meta.insert("n_per".to_string(), excitation.timing.n_per().to_string());
    meta.insert("code".to_string(), crate::codes::format_descriptor(&excitation.source));
    if let Some(a) = excitation.amplitude {
        meta.insert("amplitude".to_string(), a.to_string());
    }
    stack.metadata = meta;
    Ok(stack)
}
