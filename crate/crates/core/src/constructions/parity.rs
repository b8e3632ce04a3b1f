//! The parity-with-noise sequential model: `n` uniform input bits followed
//! by `m` noisy parity bits `y = A v + e mod 2`, each noise bit i.i.d.
//! Bernoulli(eta). Includes the compilation to an explicit HMM whose block
//! distribution matches the direct sampler exactly.

use rand::{Rng, SeedableRng};

use super::ConstructionError;
use crate::codes::{gf2_rank, random_matrix, BinaryMatrix};
use crate::hmm::Hmm;

#[derive(Debug, Clone)]
pub struct ParityModelSpec {
    pub n: usize,
    pub m: usize,
    pub a: BinaryMatrix,
    pub eta: f64,
}

impl ParityModelSpec {
    pub fn new(n: usize, m: usize, a: BinaryMatrix, eta: f64) -> Result<Self, ConstructionError> {
        if a.rows() != m || a.cols() != n {
            return Err(ConstructionError::BadSpec(format!(
                "matrix is {}x{}, expected {m}x{n}",
                a.rows(),
                a.cols()
            )));
        }
        // The hardness constructions live in the m <= n/2 regime, but the
        // model itself (and its HMM compilation) is well-defined whenever
        // the matrix can have full row rank.
        if m > n {
            return Err(ConstructionError::BadSpec(format!(
                "need m <= n, got m = {m}, n = {n}"
            )));
        }
        if gf2_rank(&a) != m {
            return Err(ConstructionError::BadSpec(
                "parity matrix must have full row rank".into(),
            ));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(ConstructionError::BadSpec(format!(
                "noise level must lie in [0, 1], got {eta}"
            )));
        }
        Ok(ParityModelSpec { n, m, a, eta })
    }

    pub fn block_len(&self) -> usize {
        self.n + self.m
    }

    /// Fresh spec with a uniformly sampled full-row-rank matrix.
    pub fn random(n: usize, m: usize, eta: f64, seed: u64) -> Result<Self, ConstructionError> {
        let (a, _) = sample_full_row_rank_matrix(m, n, seed)?;
        ParityModelSpec::new(n, m, a, eta)
    }
}

/// Samples i.i.d. uniform matrices until one has full row rank; the success
/// probability per draw is at least `1 - m 2^(m-n)`. Returns the matrix and
/// the number of draws used.
pub fn sample_full_row_rank_matrix(
    m: usize,
    n: usize,
    seed: u64,
) -> Result<(BinaryMatrix, u64), ConstructionError> {
    if m > n {
        return Err(ConstructionError::BadSpec(format!(
            "need m <= n, got m = {m}, n = {n}"
        )));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0u64;
    loop {
        attempts += 1;
        let a = random_matrix(m, n, &mut rng)?;
        if gf2_rank(&a) == m {
            return Ok((a, attempts));
        }
        if attempts > 10_000 {
            return Err(ConstructionError::SearchExhausted {
                attempts: attempts as usize,
                what: format!("full-row-rank {m}x{n} matrix"),
            });
        }
    }
}

/// One block: `n` uniform bits `v`, then `y = A v + e mod 2` with each
/// `e_i ~ Bernoulli(eta)`. Deterministic given `seed`.
pub fn parity_sample_block(spec: &ParityModelSpec, seed: u64) -> Vec<u8> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    parity_sample_block_with(spec, &mut rng)
}

pub fn parity_sample_block_with(spec: &ParityModelSpec, rng: &mut impl Rng) -> Vec<u8> {
    let mut block = Vec::with_capacity(spec.block_len());
    let mut v = 0u64;
    for i in 0..spec.n {
        let bit = rng.random::<bool>() as u64;
        v |= bit << i;
        block.push(bit as u8);
    }
    let y = spec.a.mul_vec(v);
    for j in 0..spec.m {
        let noise = rng.random::<f64>() < spec.eta;
        block.push((((y >> j) & 1) as u8) ^ (noise as u8));
    }
    block
}

/// Exact probability of a full block under the direct sampler.
pub fn parity_block_probability(spec: &ParityModelSpec, block: &[u8]) -> f64 {
    assert_eq!(block.len(), spec.block_len());
    let mut v = 0u64;
    for (i, &b) in block[..spec.n].iter().enumerate() {
        v |= (b as u64) << i;
    }
    let y = spec.a.mul_vec(v);
    let mut p = 0.5f64.powi(spec.n as i32);
    for (j, &b) in block[spec.n..].iter().enumerate() {
        let expected = ((y >> j) & 1) as u8;
        p *= if b == expected {
            1.0 - spec.eta
        } else {
            spec.eta
        };
    }
    p
}

/// Compiles the block sampler into an explicit HMM with exactly
/// `2^m (2n + m) + m` hidden states:
///
/// - `n * 2^(m+1)` input states `(step i, register y, output bit b)` that
///   emit `b` deterministically and accumulate the partial parity of the
///   emitted bits into the register;
/// - `m * 2^m` label states `(step j, register y)` that emit bit `y_j`
///   flipped with probability `eta`, carrying the per-bit channel noise;
/// - `m` uniform-noise states forming the block-noise chain of the layout.
///   With the noise carried per-bit on the label emissions, the main flow
///   assigns them zero inbound probability, keeping the block distribution
///   identical to the direct sampler.
///
/// After the last label step the chain loops back to the input states, so
/// successive blocks are independent.
pub fn compile_parity_to_hmm(
    spec: &ParityModelSpec,
    state_budget: usize,
) -> Result<Hmm, ConstructionError> {
    let (n, m) = (spec.n, spec.m);
    let regs = 1usize << m;
    let required = regs * (2 * n + m) + m;
    if required > state_budget {
        return Err(ConstructionError::StateBudget {
            required,
            budget: state_budget,
        });
    }
    let total = required;
    let input_index = |i: usize, y: usize, b: usize| -> usize { (i * regs + y) * 2 + b };
    let label_index = |j: usize, y: usize| -> usize { n * regs * 2 + j * regs + y };
    let noise_index = |j: usize| -> usize { n * regs * 2 + m * regs + j };
    // Column i of A as an m-bit register increment.
    let col = |i: usize| -> usize { spec.a.mul_vec(1u64 << i) as usize };

    let mut transition = vec![0.0; total * total];
    let mut emission = vec![0.0; total * 2];
    let mut initial = vec![0.0; total];

    // Input steps: emit the stored bit, branch uniformly on the next bit.
    for i in 0..n {
        for y in 0..regs {
            for b in 0..2 {
                let s = input_index(i, y, b);
                emission[s * 2 + b] = 1.0;
                if i + 1 < n {
                    for nb in 0..2 {
                        let ny = y ^ (if nb == 1 { col(i + 1) } else { 0 });
                        transition[s * total + input_index(i + 1, ny, nb)] += 0.5;
                    }
                } else {
                    transition[s * total + label_index(0, y)] = 1.0;
                }
            }
        }
    }
    // Label steps: emit register bit j through the eta-flip channel.
    for j in 0..m {
        for y in 0..regs {
            let s = label_index(j, y);
            let bit = (y >> j) & 1;
            emission[s * 2 + bit] = 1.0 - spec.eta;
            emission[s * 2 + (1 - bit)] = spec.eta;
            if j + 1 < m {
                transition[s * total + label_index(j + 1, y)] = 1.0;
            } else {
                for nb in 0..2 {
                    let ny = if nb == 1 { col(0) } else { 0 };
                    transition[s * total + input_index(0, ny, nb)] += 0.5;
                }
            }
        }
    }
    // Uniform-noise chain: present in the layout, unreachable from the main
    // flow because the per-bit noise already lives on the label emissions.
    for j in 0..m {
        let s = noise_index(j);
        emission[s * 2] = 0.5;
        emission[s * 2 + 1] = 0.5;
        if j + 1 < m {
            transition[s * total + noise_index(j + 1)] = 1.0;
        } else {
            for nb in 0..2 {
                let ny = if nb == 1 { col(0) } else { 0 };
                transition[s * total + input_index(0, ny, nb)] += 0.5;
            }
        }
    }
    for b in 0..2 {
        let y0 = if b == 1 { col(0) } else { 0 };
        initial[input_index(0, y0, b)] += 0.5;
    }
    Ok(Hmm::new(total, 2, transition, emission, initial)?)
}
