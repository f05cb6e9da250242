//! Configuration-driven end-to-end run.
//!
//! Stages: code generation, waveform synthesis, simulation (or loading a
//! recorded stack), DC removal, compression and export. Every input is
//! validated before anything is written; `manifest.json` is written last, so
//! a directory without it is an incomplete run.
//!
//! ```toml
//! output_dir = "run"
//!
//! [code]
//! kind = "LS"          # MLS, LS, MLS_PLUS, LS_PLUS, LS_4PLUS
//! n_bit = 31           # or `order = 5` for MLS
//!
//! [timing]
//! t_bit = 1.0
//! fps = 40.0
//! n_per = 2
//! amplitude = 1.0
//!
//! [scene]              # or `input_stack = "raw.tgs"`
//! nx = 16
//! ny = 16
//! [scene.background]
//! diffusivity = 1e-6
//!
//! [processing]
//! normalization = "PER_LENGTH"
//! steady_period = 0    # omit to average all steady periods
//! decimate = false
//!
//! [report]
//! slice_times_s = [0.5, 6.0]
//! pixels = [[0, 0]]
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codes::{build_code, format_descriptor, CodeKind, CodeLength, PnCode, Sign};
use crate::compression::{
    compress_stack_with, compress_trace_with, decimate_to_bit_rate, CompressedTrace, Normalization, SteadyState,
};
use crate::dc::{fit_dc, remove_dc, remove_dc_stack, DcFit};
use crate::stack::{export_pixel_trace, export_slice, read_stack, write_stack, ThermogramStack};
use crate::thermal::{simulate_stack, SceneConfig};
use crate::waveform::{build_matched_filter, build_physical_bipolar, build_unipolar, Timing};
use crate::{CODE_TABLE_VERSION, FORMAT_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Code,
    Waveform,
    Simulate,
    Load,
    Decimate,
    DcRemoval,
    Compress,
    Export,
    Manifest,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Code => "code",
            Stage::Waveform => "waveform",
            Stage::Simulate => "simulate",
            Stage::Load => "load",
            Stage::Decimate => "decimate",
            Stage::DcRemoval => "dc_removal",
            Stage::Compress => "compress",
            Stage::Export => "export",
            Stage::Manifest => "manifest",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

fn at<E: fmt::Display>(stage: Stage) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError { stage, message: e.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeConfig {
    pub kind: String,
    #[serde(default)]
    pub n_bit: Option<usize>,
    #[serde(default)]
    pub order: Option<u32>,
    /// +1 or -1, for `LS_4PLUS`.
    #[serde(default)]
    pub sign: Option<i64>,
}

fn default_n_per() -> usize {
    2
}

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingConfig {
    pub t_bit: f64,
    pub fps: f64,
    #[serde(default = "default_n_per")]
    pub n_per: usize,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessingConfig {
    #[serde(default)]
    pub normalization: Option<String>,
    #[serde(default)]
    pub steady_period: Option<usize>,
    #[serde(default)]
    pub decimate: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    #[serde(default)]
    pub slice_times_s: Vec<f64>,
    #[serde(default)]
    pub pixels: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub output_dir: PathBuf,
    pub code: CodeConfig,
    pub timing: TimingConfig,
    #[serde(default)]
    pub scene: Option<SceneConfig>,
    #[serde(default)]
    pub input_stack: Option<PathBuf>,
    #[serde(default)]
    pub processing: ProcessingConfig,
    #[serde(default)]
    pub report: ReportConfig,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(at(Stage::Config))
    }

    /// Reads a config file; a relative `output_dir` or `input_stack` is
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(at(Stage::Config))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(dir) = path.parent() {
            if cfg.output_dir.is_relative() {
                cfg.output_dir = dir.join(&cfg.output_dir);
            }
            if let Some(p) = cfg.input_stack.as_mut() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }
}

/// Parses the code section into the code used by the matched filter.
///
/// Standard kinds are turned into their perfect-PACF counterparts; the
/// excitation is always built from the code's unshifted base sequence.
pub fn resolve_code(cfg: &CodeConfig) -> Result<PnCode, PipelineError> {
    let err = |m: String| PipelineError { stage: Stage::Code, message: m };
    let kind = CodeKind::parse(&cfg.kind).ok_or_else(|| err(format!("unknown code kind {:?}", cfg.kind)))?;
    let kind = match kind {
        CodeKind::Mls => CodeKind::MlsPlus,
        CodeKind::Ls => CodeKind::LsPlus,
        k => k,
    };
    let length = match (cfg.n_bit, cfg.order) {
        (Some(n), None) => CodeLength::Bits(n),
        (None, Some(m)) => CodeLength::Order(m),
        (Some(_), Some(_)) => return Err(err("give either n_bit or order, not both".into())),
        (None, None) => return Err(err("missing n_bit (or order)".into())),
    };
    let sign = match cfg.sign {
        None => None,
        Some(v) => Some(Sign::from_value(v).ok_or_else(|| err(format!("sign must be +1 or -1, got {v}")))?),
    };
    if sign.is_some() && kind != CodeKind::Ls4Plus {
        return Err(err("sign is only used by LS_4PLUS".into()));
    }
    build_code(kind, length, sign).map_err(at(Stage::Code))
}

/// DC removal followed by compression for a single trace.
pub fn process_trace(
    y: &[f64],
    code: &PnCode,
    timing: &Timing,
    steady: SteadyState,
    normalization: Normalization,
) -> Result<(DcFit, CompressedTrace), PipelineError> {
    let mut fit = fit_dc(y, timing).map_err(at(Stage::DcRemoval))?;
    fit.bias_used = code.bias();
    let ac = remove_dc(y, &fit, code).map_err(at(Stage::DcRemoval))?;
    let filter = build_matched_filter(code, timing).map_err(at(Stage::Compress))?;
    let h = compress_trace_with(&ac, &filter, steady, normalization).map_err(at(Stage::Compress))?;
    Ok((fit, h))
}

/// Files written by a run and the content hashes recorded in the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineArtifacts {
    pub output_dir: PathBuf,
    /// File name (relative to `output_dir`) to SHA-256 hex digest.
    pub hashes: BTreeMap<String, String>,
    pub manifest: PathBuf,
    pub degenerate_pixels: usize,
}

struct Validated {
    code: PnCode,
    timing: Timing,
    normalization: Normalization,
    steady: SteadyState,
    input: Input,
}

enum Input {
    Scene(SceneConfig),
    Stack(ThermogramStack),
}

fn validate(cfg: &PipelineConfig) -> Result<Validated, PipelineError> {
    let code = resolve_code(&cfg.code)?;
    let t = &cfg.timing;
    let timing = Timing::new(t.t_bit, t.fps, t.n_per).map_err(at(Stage::Config))?;
    if !(t.amplitude.is_finite() && t.amplitude > 0.0) {
        return Err(PipelineError { stage: Stage::Config, message: format!("amplitude must be positive, got {}", t.amplitude) });
    }
    let normalization = match &cfg.processing.normalization {
        None => Normalization::Raw,
        Some(s) => Normalization::parse(s)
            .ok_or_else(|| PipelineError { stage: Stage::Config, message: format!("unknown normalization {s:?}") })?,
    };
    let steady = match cfg.processing.steady_period {
        None => SteadyState::AverageAll,
        Some(i) if i + 1 < timing.n_per() => SteadyState::Single(i),
        Some(i) => {
            return Err(PipelineError {
                stage: Stage::Config,
                message: format!("steady_period {i} needs n_per > {}", i + 1),
            })
        }
    };
    let input = match (&cfg.scene, &cfg.input_stack) {
        (Some(scene), None) => {
            scene.validate().map_err(at(Stage::Config))?;
            Input::Scene(scene.clone())
        }
        (None, Some(path)) => {
            let stack = read_stack(path).map_err(at(Stage::Load))?;
            let want = timing.total_samples(code.n_bit());
            if stack.n_frames() != want || (stack.fps() - timing.fps()).abs() > 1e-6 * timing.fps() {
                return Err(PipelineError {
                    stage: Stage::Load,
                    message: format!(
                        "stack has {} frames at {} FPS, configuration needs {want} at {}",
                        stack.n_frames(),
                        stack.fps(),
                        timing.fps()
                    ),
                });
            }
            Input::Stack(stack)
        }
        _ => return Err(PipelineError { stage: Stage::Config, message: "give exactly one of `scene` and `input_stack`".into() }),
    };
    let (nx, ny) = match &input {
        Input::Scene(s) => (s.nx, s.ny),
        Input::Stack(s) => (s.nx(), s.ny()),
    };
    for &[x, y] in &cfg.report.pixels {
        if x >= nx || y >= ny {
            return Err(PipelineError { stage: Stage::Config, message: format!("report pixel ({x}, {y}) outside {nx}x{ny}") });
        }
    }
    let period_s = timing.t_meas(code.n_bit());
    for &ts in &cfg.report.slice_times_s {
        if !(ts.is_finite() && ts >= 0.0 && ts < period_s) {
            return Err(PipelineError { stage: Stage::Config, message: format!("slice time {ts} s outside [0, {period_s})") });
        }
    }
    Ok(Validated { code, timing, normalization, steady, input })
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Runs every stage and writes the artifacts into `cfg.output_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineArtifacts, PipelineError> {
    let v = validate(cfg)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(at(Stage::Export))?;
    let manifest = dir.join("manifest.json");
    if manifest.exists() {
        std::fs::remove_file(&manifest).map_err(at(Stage::Export))?;
    }

    let mut files: Vec<String> = Vec::new();
    let mut note = |name: &str| files.push(name.to_string());

    std::fs::write(dir.join("code.txt"), format_descriptor(&v.code)).map_err(at(Stage::Code))?;
    note("code.txt");

    let bipolar = build_physical_bipolar(&v.code, &v.timing);
    let excitation = build_unipolar(&bipolar, cfg.timing.amplitude, v.timing.n_per()).map_err(at(Stage::Waveform))?;
    excitation.write_csv(&dir.join("waveform.csv")).map_err(at(Stage::Waveform))?;
    note("waveform.csv");

    let raw = match v.input {
        // Process what raw.tgs holds, so replaying it reproduces this run.
        Input::Scene(scene) => simulate_stack(&scene, &excitation).map_err(at(Stage::Simulate))?.narrowed(),
        Input::Stack(stack) => stack,
    };
    write_stack(&raw, &dir.join("raw.tgs")).map_err(at(Stage::Export))?;
    note("raw.tgs");

    let (raw, timing) = if cfg.processing.decimate {
        let (d, t) = decimate_to_bit_rate(&raw, &v.timing).map_err(at(Stage::Decimate))?;
        write_stack(&d, &dir.join("decimated.tgs")).map_err(at(Stage::Export))?;
        note("decimated.tgs");
        (d, t)
    } else {
        (raw, v.timing)
    };

    let (ac, fits) = remove_dc_stack(&raw, &v.code).map_err(at(Stage::DcRemoval))?;
    let ac = ac.narrowed();
    write_stack(&ac, &dir.join("ac.tgs")).map_err(at(Stage::Export))?;
    note("ac.tgs");
    fits.write_csv(&dir.join("dc_fits.csv")).map_err(at(Stage::Export))?;
    note("dc_fits.csv");

    let compressed =
        compress_stack_with(&ac, &v.code, &timing, v.steady, v.normalization).map_err(at(Stage::Compress))?;
    write_stack(&compressed.stack, &dir.join("compressed.tgs")).map_err(at(Stage::Export))?;
    note("compressed.tgs");

    for &ts in &cfg.report.slice_times_s {
        let index = ((ts * timing.fps()).round() as usize).min(compressed.stack.n_frames() - 1);
        let stem = format!("slice_{index:05}");
        export_slice(&compressed.stack, index, &dir.join(&stem)).map_err(at(Stage::Export))?;
        for ext in ["pgm", "csv", "scale.txt"] {
            note(&format!("{stem}.{ext}"));
        }
    }
    for &[x, y] in &cfg.report.pixels {
        let name = format!("pixel_{x}_{y}.csv");
        export_pixel_trace(&compressed.stack, x, y, &dir.join(&name)).map_err(at(Stage::Export))?;
        note(&name);
    }

    let mut hashes = BTreeMap::new();
    for name in &files {
        let bytes = std::fs::read(dir.join(name)).map_err(at(Stage::Manifest))?;
        hashes.insert(name.clone(), sha256_hex(&bytes));
    }
    let mut config = serde_json::to_value(cfg).map_err(at(Stage::Manifest))?;
    if let Some(obj) = config.as_object_mut() {
        obj.remove("output_dir");
    }
    let doc = serde_json::json!({
        "format_version": FORMAT_VERSION,
        "code_table_version": CODE_TABLE_VERSION,
        "config": config,
        "code": {
            "kind": v.code.kind().as_str(),
            "n_bit": v.code.n_bit(),
            "bias": v.code.bias(),
            "gain": v.code.gain(),
        },
        "timing": { "k": timing.k(), "fps": timing.fps(), "t_bit": timing.t_bit(), "n_per": timing.n_per() },
        "degenerate_pixels": fits.degenerate_count(),
        "artifacts": hashes,
    });
    let text = serde_json::to_string_pretty(&doc).map_err(at(Stage::Manifest))?;
    std::fs::write(&manifest, text + "\n").map_err(at(Stage::Manifest))?;

    Ok(PipelineArtifacts { output_dir: dir.clone(), hashes, manifest, degenerate_pixels: fits.degenerate_count() })
}
