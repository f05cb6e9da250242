//! Pseudo-noise codes for pulse compression.
//!
//! Two families are generated: maximum-length sequences (MLS, period
//! `2^M - 1`, from a linear-feedback shift register) and Legendre sequences
//! (LS, prime period, from quadratic residues). Both have a two-valued
//! periodic autocorrelation (PACF): a peak at lag 0 and a constant `-1`
//! elsewhere. Adding a constant bias to every element removes that constant
//! and leaves a perfect PACF, which is what the matched filter uses.
//!
//! | kind      | base sequence             | bias                     | gain    |
//! |-----------|---------------------------|--------------------------|---------|
//! | `Mls`     | ±1                        | 0                        | N       |
//! | `Ls`      | 0, ±1                     | 0                        | N - 1   |
//! | `MlsPlus` | ±1                        | (√(N+1) - S) / N         | N + 1   |
//! | `LsPlus`  | 0, ±1                     | 1 / √N                   | N       |
//! | `Ls4Plus` | ±1, first element = sign  | (√(N+1) - sign) / N      | N + 1   |
//!
//! `S` is the element sum of the MLS (`+1` or `-1` depending on the bit
//! mapping, see [`BitMapping`]).

mod descriptor;
mod legendre;
mod mls;
mod pacf;
mod reference;

use std::fmt;

use thiserror::Error;

pub use descriptor::{format_descriptor, parse_descriptor};
pub use legendre::{generate_ls, is_prime};
pub use mls::{generate_mls, BitMapping, Gf2Poly, MlsSpec};
pub use pacf::{pacf, pacf_of, Pacf};
pub use reference::{
    reference_autocorrelation, reference_code, ReferenceAutocorrelation, ReferenceCode,
    ReferenceKind,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodeError {
    #[error("polynomial of degree {order} is not primitive: register period {period}, expected {expected}")]
    NonPrimitivePolynomial { order: u32, period: usize, expected: usize },
    #[error("invalid seed: {0}")]
    InvalidSeed(String),
    #[error("{0} is not a prime >= 3")]
    NotPrime(usize),
    #[error("code of kind {0} is already modified")]
    AlreadyModified(CodeKind),
    #[error("length {0} does not satisfy N mod 4 = 3")]
    NotLs4Compatible(usize),
    #[error("expected a code of kind {expected}, found {found}")]
    WrongKind { expected: CodeKind, found: CodeKind },
    #[error("unsupported length {length} for {kind}")]
    UnsupportedLength { kind: ReferenceKind, length: usize },
    #[error("invalid code: {0}")]
    Invalid(String),
    #[error("descriptor line {line}: {message}")]
    Descriptor { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum CodeKind {
    #[serde(rename = "MLS")]
    Mls,
    #[serde(rename = "LS")]
    Ls,
    #[serde(rename = "MLS_PLUS")]
    MlsPlus,
    #[serde(rename = "LS_PLUS")]
    LsPlus,
    #[serde(rename = "LS_4PLUS")]
    Ls4Plus,
}

impl CodeKind {
    pub fn is_modified(self) -> bool {
        matches!(self, CodeKind::MlsPlus | CodeKind::LsPlus | CodeKind::Ls4Plus)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CodeKind::Mls => "MLS",
            CodeKind::Ls => "LS",
            CodeKind::MlsPlus => "MLS_PLUS",
            CodeKind::LsPlus => "LS_PLUS",
            CodeKind::Ls4Plus => "LS_4PLUS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().replace(['-', ' '], "_").as_str() {
            "MLS" => Some(CodeKind::Mls),
            "LS" => Some(CodeKind::Ls),
            "MLS_PLUS" | "MLS+" => Some(CodeKind::MlsPlus),
            "LS_PLUS" | "LS+" => Some(CodeKind::LsPlus),
            "LS_4PLUS" | "LS4+" | "LS_4+" | "LS4PLUS" => Some(CodeKind::Ls4Plus),
            _ => None,
        }
    }
}

impl fmt::Display for CodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The value that replaces the Legendre zero when binarizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn from_value(v: i64) -> Option<Self> {
        match v {
            1 => Some(Sign::Plus),
            -1 => Some(Sign::Minus),
            _ => None,
        }
    }
}

/// A pseudo-noise sequence, standard or bias-shifted.
///
/// `base` holds the unshifted ternary/binary sequence that drives the heat
/// source; `values` is `base + bias` and is what the matched filter uses.
#[derive(Debug, Clone, PartialEq)]
pub struct PnCode {
    kind: CodeKind,
    base: Vec<i8>,
    values: Vec<f64>,
    bias: f64,
    gain: f64,
    sign_choice: Option<Sign>,
}

impl PnCode {
    fn assemble(kind: CodeKind, base: Vec<i8>, bias: f64, gain: f64, sign_choice: Option<Sign>) -> Self {
        let values = base.iter().map(|&b| f64::from(b) + bias).collect();
        PnCode { kind, base, values, bias, gain, sign_choice }
    }

    /// Rebuilds a code from its parts, checking every structural invariant of
    /// `kind`. The bias and gain are taken as given; [`PnCode::check_bias`]
    /// tells whether the bias is the one the kind prescribes.
    pub fn from_parts(
        kind: CodeKind,
        base: Vec<i8>,
        bias: f64,
        gain: f64,
        sign_choice: Option<Sign>,
    ) -> Result<Self, CodeError> {
        let n = base.len();
        if n == 0 {
            return Err(CodeError::Invalid("empty sequence".into()));
        }
        if !bias.is_finite() || !gain.is_finite() {
            return Err(CodeError::Invalid("bias and gain must be finite".into()));
        }
        let binary = |s: &[i8]| s.iter().all(|&v| v == 1 || v == -1);
        match kind {
            CodeKind::Mls | CodeKind::MlsPlus => {
                if !(n + 1).is_power_of_two() || n < 3 {
                    return Err(CodeError::Invalid(format!("MLS length {n} is not 2^M - 1 with M >= 2")));
                }
                if !binary(&base) {
                    return Err(CodeError::Invalid("MLS values must be +1/-1".into()));
                }
                let sum: i64 = base.iter().map(|&v| i64::from(v)).sum();
                if sum.abs() != 1 {
                    return Err(CodeError::Invalid(format!("MLS element sum {sum} is not +/-1")));
                }
            }
            CodeKind::Ls | CodeKind::LsPlus | CodeKind::Ls4Plus => {
                let reference = generate_ls(n)?;
                if base[1..] != reference.base[1..] {
                    return Err(CodeError::Invalid(format!("sequence is not the Legendre sequence of length {n}")));
                }
                if kind == CodeKind::Ls4Plus {
                    if n % 4 != 3 {
                        return Err(CodeError::NotLs4Compatible(n));
                    }
                    let sign = sign_choice
                        .ok_or_else(|| CodeError::Invalid("LS_4PLUS requires a sign choice".into()))?;
                    if base[0] != sign.value() {
                        return Err(CodeError::Invalid("first element must equal the sign choice".into()));
                    }
                } else if base[0] != 0 {
                    return Err(CodeError::Invalid("Legendre sequence must start with 0".into()));
                }
            }
        }
        if kind != CodeKind::Ls4Plus && sign_choice.is_some() {
            return Err(CodeError::Invalid(format!("sign choice is only meaningful for LS_4PLUS, not {kind}")));
        }
        if !kind.is_modified() && bias != 0.0 {
            return Err(CodeError::Invalid(format!("standard {kind} code cannot carry a bias")));
        }
        Ok(Self::assemble(kind, base, bias, gain, sign_choice))
    }

    pub fn kind(&self) -> CodeKind {
        self.kind
    }

    /// Code length `N_bit` (also called `L`).
    pub fn n_bit(&self) -> usize {
        self.base.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The unshifted sequence (0/±1) that modulates the heat source.
    pub fn base(&self) -> &[i8] {
        &self.base
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// PACF peak of `values`.
    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn sign_choice(&self) -> Option<Sign> {
        self.sign_choice
    }

    pub fn is_modified(&self) -> bool {
        self.kind.is_modified()
    }

    pub fn base_sum(&self) -> i64 {
        self.base.iter().map(|&v| i64::from(v)).sum()
    }

    /// The bias this code's kind prescribes for its base sequence.
    pub fn expected_bias(&self) -> f64 {
        let n = self.n_bit() as f64;
        match self.kind {
            CodeKind::Mls | CodeKind::Ls => 0.0,
            CodeKind::MlsPlus => ((n + 1.0).sqrt() - self.base_sum() as f64) / n,
            CodeKind::LsPlus => 1.0 / n.sqrt(),
            CodeKind::Ls4Plus => {
                let s = self.sign_choice.map_or(0.0, |s| f64::from(s.value()));
                ((n + 1.0).sqrt() - s) / n
            }
        }
    }

    /// True when `bias` matches [`expected_bias`](Self::expected_bias) to
    /// 1e-12 relative.
    pub fn check_bias(&self) -> bool {
        let want = self.expected_bias();
        (self.bias - want).abs() <= 1e-12 * want.abs().max(1.0)
    }

    /// A cyclic shift of the code by `shift` positions to the left.
    pub fn rotated(&self, shift: usize) -> PnCode {
        let mut base = self.base.clone();
        let n = base.len();
        base.rotate_left(shift % n);
        Self::assemble(self.kind, base, self.bias, self.gain, self.sign_choice)
    }
}

/// Adds the constant bias that turns an MLS into MLS⁺ or an LS into LS⁺.
pub fn modify_for_perfect_pacf(code: &PnCode) -> Result<PnCode, CodeError> {
    let n = code.n_bit() as f64;
    match code.kind {
        CodeKind::Mls => {
            let bias = ((n + 1.0).sqrt() - code.base_sum() as f64) / n;
            Ok(PnCode::assemble(CodeKind::MlsPlus, code.base.clone(), bias, n + 1.0, None))
        }
        CodeKind::Ls => {
            let bias = 1.0 / n.sqrt();
            Ok(PnCode::assemble(CodeKind::LsPlus, code.base.clone(), bias, n, None))
        }
        kind => Err(CodeError::AlreadyModified(kind)),
    }
}

/// Replaces the leading zero of an LS with `sign` and adds the matching bias,
/// giving a binary excitation whose biased version has a perfect PACF.
///
/// Only lengths with `N mod 4 = 3` qualify: there the Legendre sequence is odd
/// under `n -> -n`, so the extra ±1 at lag 0 leaves every off-peak PACF value
/// at `-1`.
pub fn binarize_ls4(code: &PnCode, sign: Sign) -> Result<PnCode, CodeError> {
    match code.kind {
        CodeKind::Ls => {}
        k if k.is_modified() => return Err(CodeError::AlreadyModified(k)),
        k => return Err(CodeError::WrongKind { expected: CodeKind::Ls, found: k }),
    }
    let n_bit = code.n_bit();
    if n_bit % 4 != 3 {
        return Err(CodeError::NotLs4Compatible(n_bit));
    }
    let n = n_bit as f64;
    let s = sign.value();
    let mut base = code.base.clone();
    base[0] = s;
    let bias = ((n + 1.0).sqrt() - f64::from(s)) / n;
    Ok(PnCode::assemble(CodeKind::Ls4Plus, base, bias, n + 1.0, Some(sign)))
}

/// Builds the perfect-PACF code of the requested kind in one step.
///
/// Standard kinds return the generated sequence unchanged.
pub fn build_code(kind: CodeKind, length: CodeLength, sign: Option<Sign>) -> Result<PnCode, CodeError> {
    let base = match (kind, length) {
        (CodeKind::Mls | CodeKind::MlsPlus, CodeLength::Order(m)) => generate_mls(&MlsSpec::new(m)?)?,
        (CodeKind::Mls | CodeKind::MlsPlus, CodeLength::Spec(spec)) => generate_mls(&spec)?,
        (CodeKind::Mls | CodeKind::MlsPlus, CodeLength::Bits(n)) => {
            if !(n + 1).is_power_of_two() || n < 3 {
                return Err(CodeError::Invalid(format!("MLS length {n} is not 2^M - 1")));
            }
            generate_mls(&MlsSpec::new((n + 1).trailing_zeros())?)?
        }
        (_, CodeLength::Bits(n)) => generate_ls(n)?,
        (_, _) => return Err(CodeError::Invalid(format!("{kind} codes are specified by their length"))),
    };
    match kind {
        CodeKind::Mls | CodeKind::Ls => Ok(base),
        CodeKind::MlsPlus | CodeKind::LsPlus => modify_for_perfect_pacf(&base),
        CodeKind::Ls4Plus => binarize_ls4(&base, sign.unwrap_or(Sign::Plus)),
    }
}

/// How the length of a code is requested.
#[derive(Debug, Clone, PartialEq)]
pub enum CodeLength {
    /// `N_bit` directly (prime for LS, `2^M - 1` for MLS).
    Bits(usize),
    /// MLS register order `M` with the built-in primitive polynomial.
    Order(u32),
    /// A full MLS specification.
    Spec(MlsSpec),
}
