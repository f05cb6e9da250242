use std::fmt;

use super::CodeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReferenceKind {
    Barker13,
    GolayA,
    GolayB,
}

impl fmt::Display for ReferenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReferenceKind::Barker13 => "BARKER13",
            ReferenceKind::GolayA => "GOLAY_A",
            ReferenceKind::GolayB => "GOLAY_B",
        })
    }
}

/// A bipolar code used only for sidelobe comparisons.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceCode {
    pub kind: ReferenceKind,
    pub values: Vec<i8>,
}

impl ReferenceCode {
    /// Acyclic autocorrelation on lags `0..len`.
    pub fn acyclic_autocorrelation(&self) -> Vec<i64> {
        acyclic(&self.values)
    }
}

const BARKER13: [i8; 13] = [1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1];

fn golay_pair(length: usize) -> Result<(Vec<i8>, Vec<i8>), CodeError> {
    if length < 2 || !length.is_power_of_two() {
        return Err(CodeError::UnsupportedLength { kind: ReferenceKind::GolayA, length });
    }
    let (mut a, mut b) = (vec![1i8], vec![1i8]);
    while a.len() < length {
        let na = [a.as_slice(), b.as_slice()].concat();
        let nb: Vec<i8> = a.iter().copied().chain(b.iter().map(|&v| -v)).collect();
        a = na;
        b = nb;
    }
    Ok((a, b))
}

pub fn reference_code(kind: ReferenceKind, length: usize) -> Result<ReferenceCode, CodeError> {
    let values = match kind {
        ReferenceKind::Barker13 if length == 13 => BARKER13.to_vec(),
        ReferenceKind::Barker13 => return Err(CodeError::UnsupportedLength { kind, length }),
        ReferenceKind::GolayA => golay_pair(length)?.0,
        ReferenceKind::GolayB => {
            golay_pair(length).map_err(|_| CodeError::UnsupportedLength { kind, length })?.1
        }
    };
    Ok(ReferenceCode { kind, values })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReferenceAutocorrelation {
    Single(Vec<i64>),
    Pair { a: Vec<i64>, b: Vec<i64>, sum: Vec<i64> },
}

/// Acyclic autocorrelation of a reference code; Golay kinds return the pair
/// and its sum.
pub fn reference_autocorrelation(kind: ReferenceKind, length: usize) -> Result<ReferenceAutocorrelation, CodeError> {
    match kind {
        ReferenceKind::Barker13 => Ok(ReferenceAutocorrelation::Single(
            reference_code(kind, length)?.acyclic_autocorrelation(),
        )),
        ReferenceKind::GolayA | ReferenceKind::GolayB => {
            let (a, b) = golay_pair(length).map_err(|_| CodeError::UnsupportedLength { kind, length })?;
            let (a, b) = (acyclic(&a), acyclic(&b));
            let sum = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            Ok(ReferenceAutocorrelation::Pair { a, b, sum })
        }
    }
}

fn acyclic(x: &[i8]) -> Vec<i64> {
    (0..x.len())
        .map(|k| x.iter().zip(&x[k..]).map(|(&p, &q)| i64::from(p) * i64::from(q)).sum())
        .collect()
}
