mod common;

use pnpuct::codes::{build_code, CodeKind, CodeLength};
use pnpuct::stack::Region;
use pnpuct::thermal::{
    impulse_response, impulse_response_with_terms, lpt_reference, respond, respond_samples, simulate_stack,
    simulate_trace, Defect, ImpulseResponse, PixelModel, SceneConfig, ThermalError,
};
use pnpuct::waveform::{build_physical_bipolar, build_unipolar, RectPulse, Timing};
use pnpuct::ExcitationWaveform;
use proptest::prelude::*;

const ALPHA: f64 = 1e-6;

fn excitation(order: u32, t_bit: f64, fps: f64, n_per: usize) -> ExcitationWaveform {
    let code = build_code(CodeKind::MlsPlus, CodeLength::Order(order), None).unwrap();
    let timing = Timing::new(t_bit, fps, n_per).unwrap();
    build_unipolar(&build_physical_bipolar(&code, &timing), 1.0, n_per).unwrap()
}

#[test]
fn image_series_matches_finite_differences() {
    let dt = 0.025;
    let n = 400;
    for &d in &[0.5e-3, 1e-3, 2e-3] {
        for &r in &[-0.5, 0.5, 0.9] {
            let model = PixelModel::defective(ALPHA, d, r, 1.0);
            let h = impulse_response_with_terms(&model, dt, n, None);
            let fd = common::fd_impulse_response(ALPHA, d, r, 20e-6, dt, n);
            // Compare responses to a long pulse so the frame-0 singularity is integrated out.
            let x = vec![1.0; n];
            let a = respond_samples(&h, &x, dt);
            let b = respond_samples(&fd, &x, dt);
            let worst = a.iter().zip(&b).map(|(p, q)| ((p - q) / p).abs()).fold(0.0, f64::max);
            assert!(worst < 1e-3, "d {d} r {r}: {worst:e}");
        }
    }
}

#[test]
fn sound_step_response_grows_as_sqrt_t() {
    let model = PixelModel::sound(ALPHA, 1.7);
    let dt = 0.01;
    let n = 500;
    let h = impulse_response_with_terms(&model, dt, n, None);
    let y = respond_samples(&h, &vec![1.0; n], dt);
    for (i, v) in y.iter().enumerate() {
        let t = (i + 1) as f64 * dt;
        let want = 1.7 * 2.0 * (t / std::f64::consts::PI).sqrt();
        assert!((v - want).abs() < 1e-12 * want, "frame {i}");
    }
}

#[test]
fn frame_average_matches_point_kernel_away_from_zero() {
    let model = PixelModel::defective(ALPHA, 1e-3, 0.8, 1.0);
    let dt = 1e-3;
    let h = impulse_response_with_terms(&model, dt, 3000, None);
    for n in [100usize, 500, 1000, 2999] {
        let mid = (n as f64 + 0.5) * dt;
        assert!((h[n] - model.kernel(mid)).abs() < 1e-5 * model.kernel(mid), "frame {n}");
    }
}

#[test]
fn extra_series_terms_do_not_matter() {
    for &(d, r) in &[(0.5e-3, 0.95), (1e-3, -0.9), (2e-3, 1.0)] {
        let model = PixelModel::defective(ALPHA, d, r, 1.0);
        let dt = 0.05;
        let n = 200;
        let default = impulse_response_with_terms(&model, dt, n, None);
        let terms = model.series_terms(n as f64 * dt);
        let more = impulse_response_with_terms(&model, dt, n, Some(terms + 20));
        let y0 = respond_samples(&default, &vec![1.0; n], dt);
        let y1 = respond_samples(&more, &vec![1.0; n], dt);
        for (a, b) in y0.iter().zip(&y1) {
            assert!((a - b).abs() < 1e-10 * b.abs().max(1.0));
        }
    }
}

#[test]
fn lpt_cools_monotonically_after_the_pulse() {
    let model = PixelModel::sound(ALPHA, 1.0);
    let timing = Timing::new(0.5, 20.0, 2).unwrap();
    let pulse = RectPulse::new(0.5, 1.0).unwrap();
    let y = lpt_reference(&model, &pulse, &timing, 10.0);
    assert_eq!(y.len(), 200);
    let peak = y.iter().cloned().fold(f64::MIN, f64::max);
    assert!((y[9] - peak).abs() < 1e-15);
    for w in y[10..].windows(2) {
        assert!(w[1] < w[0]);
    }
}

#[test]
fn lpt_is_causal_in_pulse_length() {
    let model = PixelModel::defective(ALPHA, 1e-3, 0.7, 1.0);
    let timing = Timing::new(0.5, 20.0, 2).unwrap();
    let short = lpt_reference(&model, &RectPulse::new(0.5, 1.0).unwrap(), &timing, 4.0);
    let long = lpt_reference(&model, &RectPulse::new(1.9, 1.0).unwrap(), &timing, 4.0);
    for (s, l) in short[..10].iter().zip(&long[..10]) {
        assert!((s - l).abs() < 1e-12 * s);
    }
    assert!(long[10..].iter().zip(&short[10..]).all(|(l, s)| l > s));
}

#[test]
fn short_pulse_approaches_energy_times_impulse_response() {
    let model = PixelModel::sound(ALPHA, 1.0);
    let timing = Timing::new(0.001, 1000.0, 2).unwrap();
    let energy = 0.002;
    let y = lpt_reference(&model, &RectPulse::new(0.001, energy / 0.001).unwrap(), &timing, 2.0);
    for n in [500usize, 1000, 1999] {
        let t = (n + 1) as f64 * 1e-3;
        let want = energy * model.kernel(t - 0.5e-3);
        assert!((y[n] - want).abs() < 1e-4 * want, "frame {n}");
    }
}

#[test]
fn respond_rejects_mismatched_rates() {
    let x = excitation(3, 0.5, 20.0, 2);
    let h = ImpulseResponse { samples: vec![1.0; 10], dt: 0.1 };
    assert!(matches!(respond(&h, &x), Err(ThermalError::RateMismatch { .. })));
    let h = impulse_response(&PixelModel::sound(ALPHA, 1.0), &x.timing, 7.0);
    assert_eq!(respond(&h, &x).unwrap().len(), x.len());
}

#[test]
fn simulate_trace_agrees_with_respond() {
    let x = excitation(3, 0.5, 20.0, 2);
    let model = PixelModel::defective(ALPHA, 1e-3, -0.6, 2.0);
    let h = impulse_response(&model, &x.timing, 7.0);
    assert_eq!(simulate_trace(&model, &x).unwrap(), respond(&h, &x).unwrap());
}

#[test]
fn invalid_models_are_rejected() {
    let x = excitation(2, 0.5, 10.0, 2);
    for m in [
        PixelModel::sound(-1.0, 1.0),
        PixelModel::sound(ALPHA, f64::NAN),
        PixelModel::defective(ALPHA, 0.0, 0.5, 1.0),
        PixelModel::defective(ALPHA, 1e-3, 1.5, 1.0),
    ] {
        assert!(matches!(simulate_trace(&m, &x), Err(ThermalError::InvalidModel(_))), "{m:?}");
    }
}

fn grid_scene(noise: f64, seed: u64) -> (SceneConfig, Vec<Region>) {
    let mut scene = SceneConfig::uniform(64, 64, PixelModel::sound(ALPHA, 1.0));
    let mut regions = Vec::new();
    for i in 0..9 {
        let depth = 0.5e-3 + 0.25e-3 * i as f64;
        let (cx, cy) = (4 + 20 * (i % 3), 4 + 20 * (i / 3));
        let region = Region::new(cx, cy, cx + 12, cy + 12);
        scene.defects.push(Defect { region, model: PixelModel::defective(ALPHA, depth, 0.9, 1.0) });
        regions.push(region);
    }
    scene.noise_sigma = noise;
    scene.rng_seed = seed;
    (scene, regions)
}

#[test]
fn deeper_defects_give_weaker_contrast() {
    let x = excitation(3, 0.5, 20.0, 2);
    let (scene, regions) = grid_scene(0.0, 0);
    let stack = simulate_stack(&scene, &x).unwrap();
    let background = stack.trace(0, 0).unwrap();
    let contrast: Vec<f64> = regions
        .iter()
        .map(|r| {
            let t = stack.trace(r.x0 + 5, r.y0 + 5).unwrap();
            t.iter().zip(&background).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .collect();
    for w in contrast.windows(2) {
        assert!(w[1] < w[0], "{contrast:?}");
    }
    assert!(contrast[8] > 0.0);
}

#[test]
fn simulate_stack_is_deterministic_and_seeded() {
    let x = excitation(3, 0.5, 10.0, 2);
    let (scene, _) = grid_scene(0.05, 42);
    let a = simulate_stack(&scene, &x).unwrap();
    let b = simulate_stack(&scene, &x).unwrap();
    assert_eq!(a.data(), b.data());
    assert_eq!(a.metadata, b.metadata);
    let (other, _) = grid_scene(0.05, 43);
    assert_ne!(simulate_stack(&other, &x).unwrap().data(), a.data());
}

#[test]
fn simulate_stack_matches_single_thread_reference() {
    let x = excitation(3, 0.5, 10.0, 2);
    let (scene, _) = grid_scene(0.02, 7);
    let parallel = simulate_stack(&scene, &x).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(|| simulate_stack(&scene, &x).unwrap());
    assert_eq!(parallel.data(), serial.data());
    let models = scene.models();
    let map = scene.model_map();
    for &(px, py) in &[(0usize, 0usize), (10, 10), (63, 63)] {
        let mut t = simulate_trace(&models[map[py * 64 + px]], &x).unwrap();
        pnpuct::thermal::add_pixel_noise(&mut t, 0.02, 7, px, py);
        assert_eq!(t, parallel.trace(px, py).unwrap());
    }
}

#[test]
fn scene_toml_round_trip() {
    let text = r#"
nx = 8
ny = 4
noise_sigma = 0.01
rng_seed = 3

[background]
diffusivity = 1e-6
amplitude_scale = 1.0

[[defects]]
region = { x0 = 1, y0 = 1, x1 = 3, y1 = 3 }
model = { diffusivity = 1e-6, defect_depth = 1e-3, reflection_coeff = 0.9, amplitude_scale = 1.0 }
"#;
    let scene = SceneConfig::from_toml_str(text).unwrap();
    assert_eq!((scene.nx, scene.ny, scene.defects.len()), (8, 4, 1));
    let map = scene.model_map();
    assert_eq!(map[8 + 1], 1);
    assert_eq!(map[0], 0);
    let mut bad = scene.clone();
    bad.defects[0].region = Region::new(6, 0, 9, 2);
    assert!(matches!(bad.validate(), Err(ThermalError::InvalidScene(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn response_is_linear(
        a in prop::collection::vec(-1.0f64..1.0, 60),
        b in prop::collection::vec(-1.0f64..1.0, 60),
        ca in -3.0f64..3.0,
        cb in -3.0f64..3.0,
        depth in 0.3e-3f64..3e-3,
        r in -1.0f64..=1.0,
    ) {
        let h = impulse_response_with_terms(&PixelModel::defective(ALPHA, depth, r, 1.0), 0.05, 60, None);
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| ca * x + cb * y).collect();
        let ya = respond_samples(&h, &a, 0.05);
        let yb = respond_samples(&h, &b, 0.05);
        let ym = respond_samples(&h, &mix, 0.05);
        for i in 0..60 {
            let want = ca * ya[i] + cb * yb[i];
            prop_assert!((ym[i] - want).abs() < 1e-10 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn response_is_time_invariant(
        x in prop::collection::vec(0.0f64..1.0, 50),
        shift in 0usize..30,
        depth in 0.3e-3f64..3e-3,
        r in -1.0f64..=1.0,
    ) {
        let n = x.len() + shift;
        let h = impulse_response_with_terms(&PixelModel::defective(ALPHA, depth, r, 1.0), 0.05, n, None);
        let mut xs = vec![0.0; shift];
        xs.extend_from_slice(&x);
        let y = respond_samples(&h, &x, 0.05);
        let ys = respond_samples(&h, &xs, 0.05);
        let scale = 1.0 + common::max_abs(&y);
        prop_assert!(ys[..shift].iter().all(|v| v.abs() < 1e-12 * scale));
        for i in 0..x.len() {
            prop_assert!((ys[i + shift] - y[i]).abs() < 1e-12 * scale);
        }
    }
}
