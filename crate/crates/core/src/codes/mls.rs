use super::{CodeError, CodeKind, PnCode};

/// Polynomial over GF(2), stored as its coefficient bits (`bit j` = coefficient of `x^j`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Gf2Poly {
    bits: u64,
}

/// Primitive polynomials for orders 2..=16, as exponent lists.
const PRIMITIVE_TABLE: [&[u32]; 15] = [
    &[2, 1, 0],
    &[3, 1, 0],
    &[4, 1, 0],
    &[5, 2, 0],
    &[6, 1, 0],
    &[7, 1, 0],
    &[8, 4, 3, 2, 0],
    &[9, 4, 0],
    &[10, 3, 0],
    &[11, 2, 0],
    &[12, 6, 4, 1, 0],
    &[13, 4, 3, 1, 0],
    &[14, 10, 6, 1, 0],
    &[15, 1, 0],
    &[16, 12, 3, 1, 0],
];

impl Gf2Poly {
    pub fn from_exponents(exponents: &[u32]) -> Result<Self, CodeError> {
        let mut bits = 0u64;
        for &e in exponents {
            if e >= 63 {
                return Err(CodeError::Invalid(format!("exponent {e} too large")));
            }
            bits ^= 1 << e;
        }
        if bits == 0 {
            return Err(CodeError::Invalid("zero polynomial".into()));
        }
        Ok(Gf2Poly { bits })
    }

    /// Built-in primitive polynomial of the given order (2..=16).
    pub fn primitive(order: u32) -> Result<Self, CodeError> {
        if !(2..=16).contains(&order) {
            return Err(CodeError::Invalid(format!("no built-in primitive polynomial of order {order} (2..=16)")));
        }
        Self::from_exponents(PRIMITIVE_TABLE[order as usize - 2])
    }

    pub fn degree(&self) -> u32 {
        63 - self.bits.leading_zeros()
    }

    pub fn coefficient(&self, j: u32) -> bool {
        self.bits >> j & 1 == 1
    }

    pub fn exponents(&self) -> Vec<u32> {
        (0..=self.degree()).rev().filter(|&j| self.coefficient(j)).collect()
    }
}

/// How register bits map to bipolar values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BitMapping {
    /// bit 1 -> +1, bit 0 -> -1. The all-(+1) seed is valid; sequences have sum +1.
    #[default]
    OnePositive,
    /// bit 0 -> +1, bit 1 -> -1. The all-(+1) seed is the stuck state; sequences have sum -1.
    ZeroPositive,
}

impl BitMapping {
    fn to_bit(self, v: i8) -> u8 {
        match (self, v) {
            (BitMapping::OnePositive, 1) | (BitMapping::ZeroPositive, -1) => 1,
            _ => 0,
        }
    }

    fn to_value(self, bit: u8) -> i8 {
        match (self, bit) {
            (BitMapping::OnePositive, 1) | (BitMapping::ZeroPositive, 0) => 1,
            _ => -1,
        }
    }
}

/// LFSR description: characteristic polynomial, bipolar seed and bit mapping.
///
/// With `p(x) = x^M + Σ c_j x^j` the register obeys
/// `s[n] = Σ_j c_j s[n - M + j] (mod 2)`, equivalently
/// `MLS[n] = Π_i MLS[n - i]^{α_i}` with `α_i = c_{M-i}`. The first `M`
/// outputs are the seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlsSpec {
    pub poly: Gf2Poly,
    pub seed: Vec<i8>,
    pub mapping: BitMapping,
}

impl MlsSpec {
    /// Built-in polynomial of order `m`, all-(+1) seed, default mapping.
    pub fn new(order: u32) -> Result<Self, CodeError> {
        Ok(MlsSpec {
            poly: Gf2Poly::primitive(order)?,
            seed: vec![1; order as usize],
            mapping: BitMapping::default(),
        })
    }

    /// From feedback taps `α_1..α_M` (`α_i` multiplies `MLS[n - i]`).
    pub fn from_taps(taps: &[u8]) -> Result<Self, CodeError> {
        let m = taps.len() as u32;
        if m < 2 {
            return Err(CodeError::Invalid("an LFSR needs at least 2 taps".into()));
        }
        let mut exps = vec![m];
        for (i, &a) in taps.iter().enumerate() {
            match a {
                0 => {}
                1 => exps.push(m - (i as u32 + 1)),
                _ => return Err(CodeError::Invalid(format!("tap coefficient {a} is not binary"))),
            }
        }
        Ok(MlsSpec { poly: Gf2Poly::from_exponents(&exps)?, seed: vec![1; m as usize], mapping: BitMapping::default() })
    }

    pub fn with_seed(mut self, seed: Vec<i8>) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_mapping(mut self, mapping: BitMapping) -> Self {
        self.mapping = mapping;
        self
    }

    pub fn order(&self) -> u32 {
        self.poly.degree()
    }

    /// Feedback taps `α_1..α_M`.
    pub fn taps(&self) -> Vec<u8> {
        let m = self.order();
        (1..=m).map(|i| u8::from(self.poly.coefficient(m - i))).collect()
    }
}

/// Runs the LFSR for one full period and checks that the period is `2^M - 1`.
pub fn generate_mls(spec: &MlsSpec) -> Result<PnCode, CodeError> {
    let m = spec.order();
    if !(2..=30).contains(&m) {
        return Err(CodeError::Invalid(format!("register order {m} outside 2..=30")));
    }
    if !spec.poly.coefficient(0) {
        return Err(CodeError::Invalid("polynomial has no constant term".into()));
    }
    if spec.seed.len() != m as usize {
        return Err(CodeError::InvalidSeed(format!("seed has {} elements, register has {m}", spec.seed.len())));
    }
    if spec.seed.iter().any(|&v| v != 1 && v != -1) {
        return Err(CodeError::InvalidSeed("seed values must be +1/-1".into()));
    }
    let bits: Vec<u8> = spec.seed.iter().map(|&v| spec.mapping.to_bit(v)).collect();
    if bits.iter().all(|&b| b == 0) {
        return Err(CodeError::InvalidSeed("seed is the all-zero register state".into()));
    }

    // State bit k holds s[n + k]; the feedback mask selects c_j.
    let mask = spec.poly.bits & ((1u64 << m) - 1);
    let initial: u64 = bits.iter().enumerate().map(|(k, &b)| u64::from(b) << k).sum();
    let expected = (1usize << m) - 1;
    let mut state = initial;
    let mut out = Vec::with_capacity(expected);
    loop {
        out.push((state & 1) as u8);
        let fb = u64::from((state & mask).count_ones() & 1);
        state = (state >> 1) | (fb << (m - 1));
        if state == initial || out.len() > expected {
            break;
        }
    }
    if out.len() != expected {
        return Err(CodeError::NonPrimitivePolynomial { order: m, period: out.len(), expected });
    }
    let base = out.into_iter().map(|b| spec.mapping.to_value(b)).collect();
    Ok(PnCode::assemble(CodeKind::Mls, base, 0.0, expected as f64, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x3_x_1_from_all_plus_seed() {
        let code = generate_mls(&MlsSpec::new(3).unwrap()).unwrap();
        assert_eq!(code.base(), &[1, 1, 1, -1, -1, 1, -1]);
        assert_eq!(code.base_sum(), 1);
    }

    #[test]
    fn zero_positive_mapping_negates() {
        let spec = MlsSpec::new(3).unwrap().with_mapping(BitMapping::ZeroPositive).with_seed(vec![-1; 3]);
        let code = generate_mls(&spec).unwrap();
        assert_eq!(code.base(), &[-1, -1, -1, 1, 1, -1, 1]);
        assert_eq!(code.base_sum(), -1);
    }

    #[test]
    fn trivial_seed_rejected() {
        let spec = MlsSpec::new(4).unwrap().with_seed(vec![-1; 4]);
        assert!(matches!(generate_mls(&spec), Err(CodeError::InvalidSeed(_))));
        let spec = MlsSpec::new(4).unwrap().with_mapping(BitMapping::ZeroPositive);
        assert!(matches!(generate_mls(&spec), Err(CodeError::InvalidSeed(_))));
    }

    #[test]
    fn non_primitive_rejected() {
        // x^4 + x^3 + x^2 + x + 1 has period 5.
        let poly = Gf2Poly::from_exponents(&[4, 3, 2, 1, 0]).unwrap();
        let spec = MlsSpec { poly, seed: vec![1; 4], mapping: BitMapping::OnePositive };
        assert_eq!(
            generate_mls(&spec),
            Err(CodeError::NonPrimitivePolynomial { order: 4, period: 5, expected: 15 })
        );
    }

    #[test]
    fn taps_round_trip() {
        let spec = MlsSpec::from_taps(&[0, 1, 1]).unwrap();
        assert_eq!(spec.poly, Gf2Poly::from_exponents(&[3, 1, 0]).unwrap());
        assert_eq!(spec.taps(), vec![0, 1, 1]);
    }

    #[test]
    fn table_is_primitive() {
        for m in 2..=16 {
            let code = generate_mls(&MlsSpec::new(m).unwrap()).unwrap();
            assert_eq!(code.n_bit(), (1 << m) - 1);
        }
    }
}
