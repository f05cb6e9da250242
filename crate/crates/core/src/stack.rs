//! Thermogram stacks and the `TGS1` container.
//!
//! Layout (all little-endian):
//!
//! | bytes        | content                                      |
//! |--------------|----------------------------------------------|
//! | 4            | magic `TGS1`                                 |
//! | 4 × 3        | `u32` nx, ny, n_frames                       |
//! | 4            | `f32` fps                                    |
//! | 4            | `u32` metadata length `m`                    |
//! | m            | metadata, UTF-8 JSON object of strings       |
//! | 4 × frames   | `f32` samples, frame by frame, rows of `nx`  |
//!
//! Data are held as `f64` in memory and narrowed to `f32` on write.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

const MAGIC: &[u8; 4] = b"TGS1";
const HEADER_LEN: usize = 4 + 12 + 4 + 4;

#[derive(Debug, Error)]
pub enum StackError {
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("truncated file: need {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("non-finite sample at frame {frame}, pixel ({x}, {y})")]
    NonFiniteData { frame: usize, x: usize, y: usize },
    #[error("malformed stack: {0}")]
    Malformed(String),
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Region {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Region { x0, y0, x1, y1 }
    }

    pub fn is_empty(&self) -> bool {
        self.x1 <= self.x0 || self.y1 <= self.y0
    }

    pub fn area(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            (self.x1 - self.x0) * (self.y1 - self.y0)
        }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..self.x1).contains(&x) && (self.y0..self.y1).contains(&y)
    }

    pub fn fits(&self, nx: usize, ny: usize) -> bool {
        self.x1 <= nx && self.y1 <= ny
    }

    pub fn overlaps(&self, other: &Region) -> bool {
        !self.is_empty()
            && !other.is_empty()
            && self.x0 < other.x1
            && other.x0 < self.x1
            && self.y0 < other.y1
            && other.y0 < self.y1
    }

    /// Row-major pixel indices on a grid `nx` wide.
    pub fn pixels(&self, nx: usize) -> impl Iterator<Item = usize> + '_ {
        (self.y0..self.y1).flat_map(move |y| (self.x0..self.x1).map(move |x| y * nx + x))
    }
}

/// `n_frames × ny × nx` intensities at a fixed frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermogramStack {
    nx: usize,
    ny: usize,
    n_frames: usize,
    fps: f64,
    data: Vec<f64>,
    pub metadata: BTreeMap<String, String>,
}

impl ThermogramStack {
    pub fn new(nx: usize, ny: usize, n_frames: usize, fps: f64, data: Vec<f64>) -> Result<Self, StackError> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(StackError::Malformed(format!("fps must be positive, got {fps}")));
        }
        if nx == 0 || ny == 0 {
            return Err(StackError::ShapeMismatch(format!("empty frame {nx}x{ny}")));
        }
        let want = nx * ny * n_frames;
        if data.len() != want {
            return Err(StackError::ShapeMismatch(format!("{nx}x{ny}x{n_frames} needs {want} samples, got {}", data.len())));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            let frame = i / (nx * ny);
            let p = i % (nx * ny);
            return Err(StackError::NonFiniteData { frame, x: p % nx, y: p / nx });
        }
        Ok(ThermogramStack { nx, ny, n_frames, fps, data, metadata: BTreeMap::new() })
    }

    pub fn zeros(nx: usize, ny: usize, n_frames: usize, fps: f64) -> Result<Self, StackError> {
        Self::new(nx, ny, n_frames, fps, vec![0.0; nx * ny * n_frames])
    }

    /// A 1×1 stack holding one trace.
    pub fn from_trace(trace: &[f64], fps: f64) -> Self {
        ThermogramStack { nx: 1, ny: 1, n_frames: trace.len(), fps, data: trace.to_vec(), metadata: BTreeMap::new() }
    }

    /// Builds a stack from per-pixel traces in row-major pixel order.
    pub fn from_traces(nx: usize, ny: usize, fps: f64, traces: &[Vec<f64>]) -> Result<Self, StackError> {
        if traces.len() != nx * ny {
            return Err(StackError::ShapeMismatch(format!("{} traces for a {nx}x{ny} grid", traces.len())));
        }
        let n_frames = traces.first().map_or(0, Vec::len);
        if traces.iter().any(|t| t.len() != n_frames) {
            return Err(StackError::ShapeMismatch("traces differ in length".into()));
        }
        let np = nx * ny;
        let mut data = vec![0.0; np * n_frames];
        for (p, trace) in traces.iter().enumerate() {
            for (f, &v) in trace.iter().enumerate() {
                data[f * np + p] = v;
            }
        }
        Self::new(nx, ny, n_frames, fps, data)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn n_pixels(&self) -> usize {
        self.nx * self.ny
    }

    pub fn get(&self, frame: usize, x: usize, y: usize) -> f64 {
        self.data[frame * self.n_pixels() + y * self.nx + x]
    }

    pub fn frame(&self, index: usize) -> Result<&[f64], StackError> {
        if index >= self.n_frames {
            return Err(StackError::IndexOutOfRange { index, limit: self.n_frames });
        }
        let np = self.n_pixels();
        Ok(&self.data[index * np..(index + 1) * np])
    }

    pub fn trace(&self, x: usize, y: usize) -> Result<Vec<f64>, StackError> {
        if x >= self.nx {
            return Err(StackError::IndexOutOfRange { index: x, limit: self.nx });
        }
        if y >= self.ny {
            return Err(StackError::IndexOutOfRange { index: y, limit: self.ny });
        }
        Ok(self.pixel_trace(y * self.nx + x))
    }

    /// Trace of pixel `p` in row-major order.
    pub fn pixel_trace(&self, p: usize) -> Vec<f64> {
        let np = self.n_pixels();
        (0..self.n_frames).map(|f| self.data[f * np + p]).collect()
    }

    /// All traces in row-major pixel order.
    pub fn traces(&self) -> Vec<Vec<f64>> {
        (0..self.n_pixels()).map(|p| self.pixel_trace(p)).collect()
    }

    /// Rounds every sample to `f32`, the precision kept on disk.
    pub fn narrowed(mut self) -> Self {
        for v in &mut self.data {
            *v = f64::from(*v as f32);
        }
        self.fps = f64::from(self.fps as f32);
        self
    }

    pub fn encode(&self) -> Result<Vec<u8>, StackError> {
        let meta = serde_json::to_string(&self.metadata).map_err(|e| StackError::Malformed(e.to_string()))?;
        let to_u32 = |v: usize, what: &str| {
            u32::try_from(v).map_err(|_| StackError::Malformed(format!("{what} = {v} does not fit in u32")))
        };
        let fps = self.fps as f32;
        if !(fps.is_finite() && fps > 0.0) {
            return Err(StackError::Malformed(format!("fps {} not representable", self.fps)));
        }
        let mut out = Vec::with_capacity(HEADER_LEN + meta.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&to_u32(self.nx, "nx")?.to_le_bytes());
        out.extend_from_slice(&to_u32(self.ny, "ny")?.to_le_bytes());
        out.extend_from_slice(&to_u32(self.n_frames, "n_frames")?.to_le_bytes());
        out.extend_from_slice(&fps.to_le_bytes());
        out.extend_from_slice(&to_u32(meta.len(), "metadata length")?.to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        for (i, &v) in self.data.iter().enumerate() {
            let f = v as f32;
            if !f.is_finite() {
                let np = self.n_pixels();
                return Err(StackError::NonFiniteData { frame: i / np, x: i % np % self.nx, y: i % np / self.nx });
            }
            out.extend_from_slice(&f.to_le_bytes());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, StackError> {
        let need = |expected: usize| {
            if bytes.len() < expected {
                Err(StackError::TruncatedFile { expected, found: bytes.len() })
            } else {
                Ok(())
            }
        };
        need(4)?;
        if &bytes[..4] != MAGIC {
            return Err(StackError::BadMagic(bytes[..4].try_into().unwrap()));
        }
        need(HEADER_LEN)?;
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let (nx, ny, n_frames) = (u32_at(4), u32_at(8), u32_at(12));
        let fps = f32::from_le_bytes(bytes[16..20].try_into().unwrap());
        let meta_len = u32_at(20);
        need(HEADER_LEN + meta_len)?;
        let meta_str = std::str::from_utf8(&bytes[HEADER_LEN..HEADER_LEN + meta_len])
            .map_err(|e| StackError::Malformed(format!("metadata is not UTF-8: {e}")))?;
        let metadata: BTreeMap<String, String> =
            serde_json::from_str(meta_str).map_err(|e| StackError::Malformed(format!("metadata: {e}")))?;
        let n = nx
            .checked_mul(ny)
            .and_then(|v| v.checked_mul(n_frames))
            .ok_or_else(|| StackError::Malformed("dimensions overflow".into()))?;
        let start = HEADER_LEN + meta_len;
        let end = start + 4 * n;
        need(end)?;
        if bytes.len() > end {
            return Err(StackError::Malformed(format!("{} trailing bytes", bytes.len() - end)));
        }
        let data = bytes[start..end]
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        let mut stack = Self::new(nx, ny, n_frames, f64::from(fps), data)?;
        stack.metadata = metadata;
        Ok(stack)
    }
}

pub fn write_stack(stack: &ThermogramStack, path: &Path) -> Result<(), StackError> {
    std::fs::write(path, stack.encode()?)?;
    Ok(())
}

pub fn read_stack(path: &Path) -> Result<ThermogramStack, StackError> {
    ThermogramStack::decode(&std::fs::read(path)?)
}

/// Paths written by [`export_slice`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceFiles {
    pub pgm: PathBuf,
    pub csv: PathBuf,
    pub scale: PathBuf,
}

/// Writes frame `time_index` as a 16-bit binary PGM (min-max scaled), a CSV
/// matrix, and a `.scale.txt` sidecar with the scaling bounds. `path` is the
/// common stem; any extension is replaced.
pub fn export_slice(stack: &ThermogramStack, time_index: usize, path: &Path) -> Result<SliceFiles, StackError> {
    let frame = stack.frame(time_index)?;
    let files = SliceFiles {
        pgm: path.with_extension("pgm"),
        csv: path.with_extension("csv"),
        scale: path.with_extension("scale.txt"),
    };
    let lo = frame.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = frame.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;

    let mut pgm = format!("P5\n{} {}\n65535\n", stack.nx(), stack.ny()).into_bytes();
    for &v in frame {
        let level = if span > 0.0 { ((v - lo) / span * 65535.0).round() as u16 } else { 0 };
        pgm.extend_from_slice(&level.to_be_bytes());
    }
    std::fs::write(&files.pgm, pgm)?;

    let mut csv = std::io::BufWriter::new(std::fs::File::create(&files.csv)?);
    for row in frame.chunks(stack.nx()) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(csv, "{}", cells.join(","))?;
    }
    csv.flush()?;

    let t = time_index as f64 / stack.fps();
    std::fs::write(&files.scale, format!("frame = {time_index}\ntime_s = {t}\nmin = {lo}\nmax = {hi}\nlevels = 65535\n"))?;
    Ok(files)
}

/// Two-column CSV `time_s,value` of pixel `(x, y)`.
pub fn export_pixel_trace(stack: &ThermogramStack, x: usize, y: usize, path: &Path) -> Result<(), StackError> {
    let trace = stack.trace(x, y)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "time_s,value")?;
    for (n, v) in trace.iter().enumerate() {
        writeln!(out, "{},{v}", n as f64 / stack.fps())?;
    }
    out.flush()?;
    Ok(())
}
