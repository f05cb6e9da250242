use super::{CodeError, CodeKind, PnCode};

/// Deterministic trial division.
pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Legendre sequence of prime length `n_bit >= 3`.
pub fn generate_ls(n_bit: usize) -> Result<PnCode, CodeError> {
    if n_bit < 3 || !is_prime(n_bit) {
        return Err(CodeError::NotPrime(n_bit));
    }
    let mut residue = vec![false; n_bit];
    for x in 1..n_bit {
        residue[x * x % n_bit] = true;
    }
    let base = (0..n_bit)
        .map(|n| match n {
            0 => 0,
            _ if residue[n] => 1,
            _ => -1,
        })
        .collect();
    Ok(PnCode::assemble(CodeKind::Ls, base, 0.0, (n_bit - 1) as f64, None))
}
