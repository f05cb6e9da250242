//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

/// Cyclic autocorrelation by direct summation in integer arithmetic.
pub fn direct_pacf_i64(x: &[i8]) -> Vec<i64> {
    let n = x.len();
    (0..n)
        .map(|k| (0..n).map(|i| i64::from(x[i]) * i64::from(x[(i + k) % n])).sum())
        .collect()
}

/// Cyclic autocorrelation by direct summation.
pub fn direct_pacf(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n).map(|k| (0..n).map(|i| x[i] * x[(i + k) % n]).sum()).collect()
}

/// Cyclic convolution by direct summation.
pub fn direct_cyclic_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    (0..n).map(|k| (0..n).map(|m| a[m] * b[(k + n - m) % n]).sum()).collect()
}

/// Full linear convolution by direct summation.
pub fn direct_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn rel_rms(a: &[f64], b: &[f64], scale: f64) -> f64 {
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    (ss / a.len() as f64).sqrt() / scale
}

pub fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Explicit finite-difference surface response of a layer of thickness
/// `depth` on a substrate, both with diffusivity `alpha`.
///
/// The layer has unit conductivity; the substrate conductivity is chosen so
/// the interface reflection coefficient is `r`. Nodes are cell centred on a
/// uniform grid with half cells at the surface and the interface; the back
/// face is insulated, far enough away not to matter. A unit step flux enters
/// at the surface. Returns frame-averaged impulse response samples scaled to
/// unit amplitude (surface effusivity divided out), i.e. `(S(t_{n+1}) -
/// S(t_n))/δt · e`.
pub fn fd_impulse_response(alpha: f64, depth: f64, r: f64, dx: f64, frame_dt: f64, n_frames: usize) -> Vec<f64> {
    assert!(r > -1.0 && r < 1.0, "substrate needs a finite conductivity");
    let k1 = 1.0;
    let c1 = k1 / alpha;
    let k2 = k1 * (1.0 - r) / (1.0 + r);
    let c2 = k2 / alpha;
    let duration = frame_dt * n_frames as f64;
    let extra = 6.0 * (alpha * duration).sqrt() + 2e-3;
    let nodes = ((depth + extra) / dx).round() as usize + 1;
    let j = (depth / dx).round() as usize;
    assert!((j as f64 * dx - depth).abs() < 1e-9 * depth, "depth must be a multiple of dx");

    // Conductance of the segment between node i and i + 1.
    let g: Vec<f64> = (0..nodes - 1).map(|i| if i < j { k1 / dx } else { k2 / dx }).collect();
    // Heat capacity of each control volume.
    let cap: Vec<f64> = (0..nodes)
        .map(|i| {
            let left = if i == 0 { 0.0 } else if i <= j { c1 } else { c2 };
            let right = if i == nodes - 1 { 0.0 } else if i < j { c1 } else { c2 };
            0.5 * dx * (left + right)
        })
        .collect();
    let dt_max = (0..nodes)
        .map(|i| {
            let gs = if i > 0 { g[i - 1] } else { 0.0 } + if i < nodes - 1 { g[i] } else { 0.0 };
            if gs > 0.0 { cap[i] / gs } else { f64::INFINITY }
        })
        .fold(f64::INFINITY, f64::min);
    let steps_per_frame = (frame_dt / (0.5 * dt_max)).ceil() as usize;
    let dt = frame_dt / steps_per_frame as f64;

    let mut t = vec![0.0; nodes];
    let mut flow = vec![0.0; nodes - 1];
    let mut surface = vec![0.0; n_frames + 1];
    for frame in 0..n_frames {
        for _ in 0..steps_per_frame {
            for i in 0..nodes - 1 {
                flow[i] = g[i] * (t[i] - t[i + 1]);
            }
            t[0] += dt * (1.0 - flow[0]) / cap[0];
            for i in 1..nodes - 1 {
                t[i] += dt * (flow[i - 1] - flow[i]) / cap[i];
            }
            t[nodes - 1] += dt * flow[nodes - 2] / cap[nodes - 1];
        }
        surface[frame + 1] = t[0];
    }
    let e = (k1 * c1).sqrt();
    (0..n_frames).map(|n| (surface[n + 1] - surface[n]) / frame_dt * e).collect()
}
