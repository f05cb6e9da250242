mod common;

use pnpuct::codes::{build_code, generate_ls, CodeKind, CodeLength, PnCode};
use pnpuct::dc::{fit_dc, remove_dc, remove_dc_stack, DcError, DcFitter};
use pnpuct::thermal::{simulate_trace, PixelModel};
use pnpuct::waveform::{build_physical_bipolar, build_unipolar, Timing};
use pnpuct::ThermogramStack;
use proptest::prelude::*;

fn power_law(a: [f64; 3], n: usize, dt: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            a[0] * t + a[1] * t.powf(0.75) + a[2] * t.sqrt()
        })
        .collect()
}

fn residual_ss(y: &[f64], a: [f64; 3], dt: f64) -> f64 {
    power_law(a, y.len(), dt).iter().zip(y).map(|(m, v)| (v - m).powi(2)).sum()
}

fn mls7_plus() -> PnCode {
    build_code(CodeKind::MlsPlus, CodeLength::Order(3), None).unwrap()
}

#[test]
fn recovers_exact_power_laws() {
    let timing = Timing::new(0.5, 20.0, 2).unwrap();
    for a in [[0.3, 0.0, 2.0], [0.0, 0.0, 1.0], [1.0, 0.5, 0.25], [0.0, 4.0, 0.0]] {
        let y = power_law(a, 140, timing.dt());
        let fit = fit_dc(&y, &timing).unwrap();
        for (got, want) in fit.coefficients().iter().zip(&a) {
            assert!((got - want).abs() < 1e-9 * (1.0 + want), "{a:?}: {:?}", fit.coefficients());
        }
        assert!(fit.rms_residual < 1e-9);
    }
}

#[test]
fn falling_trend_fits_to_zero() {
    let timing = Timing::new(0.5, 20.0, 2).unwrap();
    let y = power_law([-1.0, 0.0, 0.0], 140, timing.dt());
    let fit = fit_dc(&y, &timing).unwrap();
    assert_eq!(fit.coefficients(), [0.0, 0.0, 0.0]);
    let rms = (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).sqrt();
    assert!((fit.rms_residual - rms).abs() < 1e-12 * rms);
}

#[test]
fn degenerate_traces_are_reported() {
    let timing = Timing::new(0.5, 20.0, 2).unwrap();
    assert!(matches!(fit_dc(&[3.0; 50], &timing), Err(DcError::DegenerateTrace(_))));
    assert!(matches!(fit_dc(&[1.0], &timing), Err(DcError::DegenerateTrace(_))));
    let mut y = power_law([1.0, 0.0, 0.0], 50, 0.1);
    y[7] = f64::INFINITY;
    assert!(matches!(fit_dc(&y, &timing), Err(DcError::DegenerateTrace(_))));
    let fitter = DcFitter::new(10, 0.1);
    assert_eq!(fitter.fit(&[1.0; 9]), Err(DcError::LengthMismatch { expected: 10, found: 9 }));
}

#[test]
fn unbiased_codes_remove_the_whole_trend() {
    let timing = Timing::new(0.5, 20.0, 2).unwrap();
    let trend = power_law([1.0, 0.0, 1.0], 140, timing.dt());
    let y: Vec<f64> = trend.iter().enumerate().map(|(i, v)| v + if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
    let fit = fit_dc(&y, &timing).unwrap();
    let ls = generate_ls(7).unwrap();
    let ac = remove_dc(&y, &fit, &ls).unwrap();
    assert!(ac.iter().all(|v| (v.abs() - 0.01).abs() < 2e-3), "{:?}", &ac[..6]);
}

fn heated_trace(model: &PixelModel, t_bit: f64, fps: f64) -> (Vec<f64>, PnCode, Timing) {
    let code = mls7_plus();
    let timing = Timing::new(t_bit, fps, 2).unwrap();
    let x = build_unipolar(&build_physical_bipolar(&code, &timing), 1.0, 2).unwrap();
    (simulate_trace(model, &x).unwrap(), code, x.timing)
}

#[test]
fn removal_reconstructs_the_trace() {
    let (y, code, timing) = heated_trace(&PixelModel::defective(1e-6, 1e-3, 0.8, 1.0), 0.5, 20.0);
    let fit = fit_dc(&y, &timing).unwrap();
    let ac = remove_dc(&y, &fit, &code).unwrap();
    let trend = fit.evaluate(y.len());
    for i in 0..y.len() {
        let back = ac[i] + (1.0 - code.bias()) * trend[i];
        assert!((back - y[i]).abs() < 1e-12 * (1.0 + y[i].abs()));
    }
}

#[test]
fn refitting_the_residual_gives_nothing() {
    let (y, _, timing) = heated_trace(&PixelModel::defective(1e-6, 0.7e-3, -0.5, 1.0), 0.5, 20.0);
    let fit = fit_dc(&y, &timing).unwrap();
    let residual: Vec<f64> = y.iter().zip(fit.evaluate(y.len())).map(|(a, b)| a - b).collect();
    let again = fit_dc(&residual, &timing).unwrap();
    let scale = common::max_abs(&fit.coefficients());
    for c in again.coefficients() {
        assert!(c.abs() < 1e-9 * scale, "{:?}", again.coefficients());
    }
}

#[test]
fn sound_pixel_removal_scales_with_bit_length() {
    // A sound pixel has no length scale, so stretching time by c at fixed K
    // scales the trace, its trend and the removed trace by √c.
    let k = 10.0;
    let (y1, code, t1) = heated_trace(&PixelModel::sound(1e-6, 1.0), 0.5, k / 0.5);
    let ac1 = remove_dc(&y1, &fit_dc(&y1, &t1).unwrap(), &code).unwrap();
    let share = |ac: &[f64], y: &[f64]| (ac.iter().map(|v| v * v).sum::<f64>() / y.iter().map(|v| v * v).sum::<f64>()).sqrt();
    for c in [0.25, 2.0, 8.0] {
        let t_bit = 0.5 * c;
        let (y, _, timing) = heated_trace(&PixelModel::sound(1e-6, 1.0), t_bit, k / t_bit);
        let ac = remove_dc(&y, &fit_dc(&y, &timing).unwrap(), &code).unwrap();
        for (a, b) in ac.iter().zip(&ac1) {
            assert!((a - c.sqrt() * b).abs() < 1e-9 * common::max_abs(&ac), "c {c}");
        }
        assert!((share(&ac, &y) - share(&ac1, &y1)).abs() < 1e-9);
    }
}

#[test]
fn dead_pixels_do_not_disturb_neighbours() {
    let (y, code, timing) = heated_trace(&PixelModel::sound(1e-6, 1.0), 0.5, 20.0);
    let dead = vec![0.25; y.len()];
    let stack = ThermogramStack::from_traces(2, 1, timing.fps(), &[dead, y.clone()]).unwrap();
    let (out, map) = remove_dc_stack(&stack, &code).unwrap();
    assert_eq!(map.degenerate_count(), 1);
    assert!(matches!(map.get(0, 0), Err(DcError::DegenerateTrace(_))));
    assert!(out.trace(0, 0).unwrap().iter().all(|&v| v == 0.0));
    let single = remove_dc(&y, &fit_dc(&y, &timing).unwrap(), &code).unwrap();
    assert_eq!(out.trace(1, 0).unwrap(), single);
    assert_eq!(map.get(1, 0).as_ref().unwrap().bias_used, code.bias());
    assert_eq!(out.metadata.get("dc_removed").map(String::as_str), Some("true"));
}

#[test]
fn fit_map_csv() {
    let (y, code, timing) = heated_trace(&PixelModel::sound(1e-6, 1.0), 0.5, 20.0);
    let stack = ThermogramStack::from_traces(1, 2, timing.fps(), &[y, vec![0.0; 140]]).unwrap();
    let (_, map) = remove_dc_stack(&stack, &code).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fits.csv");
    map.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0].split(',').count(), 6);
    assert!(lines[1].starts_with("0,0,"));
    assert_eq!(lines[2], "0,1,NaN,NaN,NaN,NaN");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn fit_is_locally_optimal(
        a in prop::array::uniform3(0.0f64..2.0),
        noise in prop::collection::vec(-0.2f64..0.2, 80),
        d in prop::array::uniform3(-1e-6f64..1e-6),
    ) {
        let dt = 0.05;
        let y: Vec<f64> = power_law(a, 80, dt).iter().zip(&noise).map(|(v, e)| v + e).collect();
        let fit = DcFitter::new(80, dt).fit(&y).unwrap();
        let best = fit.coefficients();
        prop_assert!(best.iter().all(|&c| c >= 0.0));
        let base = residual_ss(&y, best, dt);
        let moved = [(best[0] + d[0]).max(0.0), (best[1] + d[1]).max(0.0), (best[2] + d[2]).max(0.0)];
        prop_assert!(residual_ss(&y, moved, dt) >= base - 1e-12 * (1.0 + base));
        let rms = (base / 80.0).sqrt();
        prop_assert!((rms - fit.rms_residual).abs() < 1e-9 * (1.0 + rms));
    }
}
