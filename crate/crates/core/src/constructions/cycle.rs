//! The cycle HMM: a deterministic permutation chain that repeats a fixed
//! binary string forever, started at a uniformly random phase. It never
//! mixes, yet short windows suffice to predict it once they pin the phase.

use rand::{Rng, SeedableRng};

use super::ConstructionError;
use crate::hmm::Hmm;

/// Builds the n-state cyclic HMM that deterministically emits `bits`
/// repeated, with a uniform initial phase.
pub fn build_cycle_hmm(bits: &[u8]) -> Result<Hmm, ConstructionError> {
    let n = bits.len();
    if n < 2 {
        return Err(ConstructionError::BadSpec(format!(
            "cycle needs at least 2 bits, got {n}"
        )));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(ConstructionError::BadSpec("cycle bits must be 0/1".into()));
    }
    let mut transition = vec![0.0; n * n];
    let mut emission = vec![0.0; n * 2];
    for i in 0..n {
        transition[i * n + (i + 1) % n] = 1.0;
        emission[i * 2 + bits[i] as usize] = 1.0;
    }
    Ok(Hmm::new(n, 2, transition, emission, vec![1.0 / n as f64; n])?)
}

/// True iff all `bits.len()` cyclic windows of length `w` are distinct, so
/// any `w` consecutive outputs identify the phase.
pub fn has_distinct_cyclic_windows(bits: &[u8], w: usize) -> bool {
    let n = bits.len();
    if w >= 64 {
        return false;
    }
    let window_at = |start: usize| -> u64 {
        (0..w).fold(0u64, |acc, i| (acc << 1) | bits[(start + i) % n] as u64)
    };
    let mut seen: Vec<u64> = (0..n).map(window_at).collect();
    seen.sort_unstable();
    seen.windows(2).all(|p| p[0] != p[1])
}

/// Draws random length-`n` bit strings until one has all length-`w` cyclic
/// windows distinct. Deterministic given `seed`.
pub fn random_cycle_bits_with_distinct_windows(
    n: usize,
    w: usize,
    seed: u64,
) -> Result<Vec<u8>, ConstructionError> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let max_attempts = 100_000;
    for _ in 0..max_attempts {
        let bits: Vec<u8> = (0..n).map(|_| rng.random::<bool>() as u8).collect();
        if has_distinct_cyclic_windows(&bits, w) {
            return Ok(bits);
        }
    }
    Err(ConstructionError::SearchExhausted {
        attempts: max_attempts,
        what: format!("length-{n} string with distinct {w}-windows"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_alternator() {
        let h = build_cycle_hmm(&[0, 1]).unwrap();
        assert_eq!(h.n(), 2);
        let path = h.sample(10, 1);
        for t in 1..10 {
            assert_ne!(path.observed[t], path.observed[t - 1]);
        }
    }

    #[test]
    fn output_is_programmed_string_at_a_random_rotation() {
        let bits = [1u8, 1, 0, 1, 0, 0, 1];
        let h = build_cycle_hmm(&bits).unwrap();
        let path = h.sample(21, 9);
        let phase = path.hidden[0];
        for (t, &sym) in path.observed.iter().enumerate() {
            assert_eq!(sym, bits[(phase + t) % bits.len()] as usize);
        }
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(build_cycle_hmm(&[1]).is_err());
        assert!(build_cycle_hmm(&[0, 2]).is_err());
    }

    #[test]
    fn window_uniqueness_scan() {
        // 0011 has distinct 2-windows (00, 01, 11, 10) but 0101 does not.
        assert!(has_distinct_cyclic_windows(&[0, 0, 1, 1], 2));
        assert!(!has_distinct_cyclic_windows(&[0, 1, 0, 1], 2));
    }

    #[test]
    fn random_search_finds_distinct_window_strings() {
        let n = 32;
        let w = 6;
        let bits = random_cycle_bits_with_distinct_windows(n, w, 12345).unwrap();
        assert_eq!(bits.len(), n);
        assert!(has_distinct_cyclic_windows(&bits, w));
        // Deterministic given the seed.
        let again = random_cycle_bits_with_distinct_windows(n, w, 12345).unwrap();
        assert_eq!(bits, again);
    }

    #[test]
    fn windows_identify_phase_implies_point_mass_prediction() {
        let bits = random_cycle_bits_with_distinct_windows(16, 5, 7).unwrap();
        let h = build_cycle_hmm(&bits).unwrap();
        let prior = vec![1.0 / 16.0; 16];
        // Any 5 consecutive outputs pin the phase; the next prediction is a
        // point mass on the programmed bit.
        for phase in 0..16 {
            let window: Vec<usize> = (0..5).map(|i| bits[(phase + i) % 16] as usize).collect();
            let p = h.window_optimal_predict(&prior, &window).unwrap();
            let next = bits[(phase + 5) % 16] as usize;
            assert_eq!(p[next], 1.0);
        }
    }
}
