//! Plain-text code descriptor.
//!
//! ```text
//! kind = LS_4PLUS
//! n_bit = 7
//! bias = 2.6120387496374143e-1
//! gain = 8.0000000000000000e0
//! sign = +1
//! values = 1.2612038749637414e0, 1.2612038749637414e0, ...
//! ```
//!
//! Reals are written with 17 significant digits, so parsing returns the exact
//! same `f64`s. `sign` is present only for `LS_4PLUS`.

use super::{CodeError, CodeKind, PnCode, Sign};

pub fn format_descriptor(code: &PnCode) -> String {
    let mut s = String::new();
    s.push_str(&format!("kind = {}\n", code.kind()));
    s.push_str(&format!("n_bit = {}\n", code.n_bit()));
    s.push_str(&format!("bias = {:.16e}\n", code.bias()));
    s.push_str(&format!("gain = {:.16e}\n", code.gain()));
    if let Some(sign) = code.sign_choice() {
        s.push_str(&format!("sign = {:+}\n", sign.value()));
    }
    let values: Vec<String> = code.values().iter().map(|v| format!("{v:.16e}")).collect();
    s.push_str(&format!("values = {}\n", values.join(", ")));
    s
}

pub fn parse_descriptor(text: &str) -> Result<PnCode, CodeError> {
    let mut kind = None;
    let mut n_bit = None;
    let mut bias = None;
    let mut gain = None;
    let mut sign = None;
    let mut values: Option<Vec<f64>> = None;
    let err = |line: usize, message: String| CodeError::Descriptor { line, message };

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, "expected `key = value`".into()))?;
        let value = value.trim();
        let real = |v: &str| v.trim().parse::<f64>().map_err(|e| err(line_no, format!("{v:?}: {e}")));
        match key.trim() {
            "kind" => kind = Some(CodeKind::parse(value).ok_or_else(|| err(line_no, format!("unknown kind {value:?}")))?),
            "n_bit" => n_bit = Some(value.parse::<usize>().map_err(|e| err(line_no, e.to_string()))?),
            "bias" => bias = Some(real(value)?),
            "gain" => gain = Some(real(value)?),
            "sign" => {
                let v = value.parse::<i64>().map_err(|e| err(line_no, e.to_string()))?;
                sign = Some(Sign::from_value(v).ok_or_else(|| err(line_no, format!("sign must be +1 or -1, got {v}")))?);
            }
            "values" => values = Some(value.split(',').map(real).collect::<Result<_, _>>()?),
            other => return Err(err(line_no, format!("unknown key {other:?}"))),
        }
    }

    let missing = |k: &str| err(0, format!("missing `{k}`"));
    let kind = kind.ok_or_else(|| missing("kind"))?;
    let n_bit = n_bit.ok_or_else(|| missing("n_bit"))?;
    let bias = bias.ok_or_else(|| missing("bias"))?;
    let gain = gain.ok_or_else(|| missing("gain"))?;
    let values = values.ok_or_else(|| missing("values"))?;
    if values.len() != n_bit {
        return Err(err(0, format!("n_bit = {n_bit} but {} values given", values.len())));
    }
    let mut base = Vec::with_capacity(n_bit);
    for (i, &v) in values.iter().enumerate() {
        let b = (v - bias).round();
        if !(-1.0..=1.0).contains(&b) || (b + bias - v).abs() > 1e-12 {
            return Err(err(0, format!("value {i} = {v} is not an integer offset by the bias")));
        }
        base.push(b as i8);
    }
    let code = PnCode::from_parts(kind, base, bias, gain, sign)?;
    if code.values() != values.as_slice() {
        return Err(err(0, "values differ from base + bias".into()));
    }
    Ok(code)
}
