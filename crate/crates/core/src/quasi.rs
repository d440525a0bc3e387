//! Low-discrepancy points and seeded generators shared by the checks.

use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Radical inverse of `i` in `base`.
pub fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// `i`-th Halton point in `[0,1)^dim`, `dim ≤ 8`. Index 0 is skipped so the
/// first point is not the origin.
pub fn halton(i: usize, dim: usize) -> Vec<f64> {
    (0..dim).map(|k| radical_inverse(i as u64 + 1, PRIMES[k])).collect()
}

/// `n` Halton points mapped into the box `[lower, upper]`.
pub fn halton_in_box(n: usize, lower: &[f64], upper: &[f64]) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| halton(i, lower.len()).iter().enumerate().map(|(k, u)| lower[k] + u * (upper[k] - lower[k])).collect())
        .collect()
}

/// Deterministic generator for a `(seed, stream)` pair.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base2() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(1, 3) - 1.0 / 3.0).abs() < 1e-15);
    }
}
