//! The planted-CSP sequential model: a block of `k` letters drawn from a
//! partitioned alphabet of size `2n` (each letter encodes a literal over
//! `n` variables), followed by `m` label bits that equal `A v mod 2` for
//! the hidden assignment values `v` with probability `1 - eta` and are
//! uniform otherwise. Plus the clause-space samplers and the coset
//! transform used to retarget labels.

use rand::{Rng, SeedableRng};

use super::ConstructionError;
use crate::codes::{check_t_wise_uniform, gf2_rank, BinaryMatrix, Gf2Solver};
use crate::seeds::child_seed;

/// A literal: variable index plus negation flag. Letter `2i` is the
/// positive literal of variable `i`, letter `2i + 1` its negation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Literal {
    pub variable: usize,
    pub negated: bool,
}

pub fn letter_to_literal(letter: usize) -> Literal {
    Literal {
        variable: letter / 2,
        negated: letter % 2 == 1,
    }
}

pub fn literal_to_letter(lit: Literal) -> usize {
    2 * lit.variable + lit.negated as usize
}

/// An ordered k-clause with its m-bit label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub literals: Vec<Literal>,
    pub label: Vec<u8>,
}

impl Clause {
    /// Values assigned by `sigma` to the clause literals, bit-packed with
    /// literal `i` in bit `i`.
    pub fn values_under(&self, sigma: &[u8]) -> u64 {
        let mut v = 0u64;
        for (i, lit) in self.literals.iter().enumerate() {
            let val = sigma[lit.variable] ^ (lit.negated as u8);
            v |= (val as u64) << i;
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct CspModelSpec {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub a: BinaryMatrix,
    pub sigma: Vec<u8>,
    pub eta: f64,
    /// The nullspace of `a` is certified `certified_t`-wise uniform at
    /// construction time.
    pub certified_t: usize,
}

impl CspModelSpec {
    pub fn new(
        n: usize,
        k: usize,
        m: usize,
        a: BinaryMatrix,
        sigma: Vec<u8>,
        eta: f64,
        certified_t: usize,
    ) -> Result<Self, ConstructionError> {
        if a.rows() != m || a.cols() != k {
            return Err(ConstructionError::BadSpec(format!(
                "matrix is {}x{}, expected {m}x{k}",
                a.rows(),
                a.cols()
            )));
        }
        if k == 0 || (2 * n) % k != 0 {
            return Err(ConstructionError::BadSpec(format!(
                "letters cannot be partitioned: 2n = {} must be divisible by k = {k}",
                2 * n
            )));
        }
        if (2 * n / k) % 2 != 0 {
            return Err(ConstructionError::BadSpec(format!(
                "each letter subset must pair variables: 2n/k = {} must be even",
                2 * n / k
            )));
        }
        if sigma.len() != n || sigma.iter().any(|&b| b > 1) {
            return Err(ConstructionError::BadSpec(
                "planted assignment must be n bits".into(),
            ));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(ConstructionError::BadSpec(format!(
                "noise level must lie in [0, 1], got {eta}"
            )));
        }
        if gf2_rank(&a) != m {
            return Err(ConstructionError::BadSpec(
                "label matrix must have full row rank".into(),
            ));
        }
        if certified_t > 0 && !check_t_wise_uniform(&a, certified_t, 1e9)? {
            return Err(ConstructionError::BadSpec(format!(
                "nullspace is not {certified_t}-wise uniform"
            )));
        }
        Ok(CspModelSpec {
            n,
            k,
            m,
            a,
            sigma,
            eta,
            certified_t,
        })
    }
}

/// One emitted block: `k` alphabet symbols then `m` label bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CspBlock {
    pub symbols: Vec<usize>,
    pub labels: Vec<u8>,
}

/// The sequential sampler handle.
#[derive(Debug, Clone)]
pub struct CspModel {
    spec: CspModelSpec,
    /// Truth value of each letter under the planted assignment.
    letter_truth: Vec<bool>,
}

impl CspModel {
    pub fn new(spec: CspModelSpec) -> Result<Self, ConstructionError> {
        let letter_truth = (0..2 * spec.n)
            .map(|letter| {
                let lit = letter_to_literal(letter);
                spec.sigma[lit.variable] ^ (lit.negated as u8) == 1
            })
            .collect();
        Ok(CspModel { spec, letter_truth })
    }

    pub fn spec(&self) -> &CspModelSpec {
        &self.spec
    }

    pub fn alphabet_size(&self) -> usize {
        2 * self.spec.n
    }

    pub fn block_len(&self) -> usize {
        self.spec.k + self.spec.m
    }

    fn subset_size(&self) -> usize {
        2 * self.spec.n / self.spec.k
    }

    /// The letters of subset `i` whose truth value is `value`.
    fn letters_with_value(&self, i: usize, value: bool) -> Vec<usize> {
        let lo = i * self.subset_size();
        let hi = lo + self.subset_size();
        (lo..hi).filter(|&l| self.letter_truth[l] == value).collect()
    }

    /// Recovers the assignment values `v` encoded by a symbol block.
    pub fn decode_values(&self, symbols: &[usize]) -> u64 {
        let mut v = 0u64;
        for (i, &s) in symbols.iter().enumerate() {
            v |= (self.letter_truth[s] as u64) << i;
        }
        v
    }

    /// `P(labels | symbols)` under the planted model:
    /// `(1 - eta) [y = A v] + eta 2^-m`.
    pub fn label_conditional_probability(&self, v: u64, y: u64) -> f64 {
        let consistent = self.spec.a.mul_vec(v) == y;
        let uniform = 0.5f64.powi(self.spec.m as i32);
        (if consistent { 1.0 - self.spec.eta } else { 0.0 }) + self.spec.eta * uniform
    }

    pub fn sample_block(&self, seed: u64) -> CspBlock {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        self.sample_block_with(&mut rng)
    }

    pub fn sample_block_with(&self, rng: &mut impl Rng) -> CspBlock {
        let k = self.spec.k;
        let mut symbols = Vec::with_capacity(k);
        let mut v = 0u64;
        for i in 0..k {
            let bit = rng.random::<bool>();
            v |= (bit as u64) << i;
            let pool = self.letters_with_value(i, bit);
            symbols.push(pool[(rng.random::<u64>() % pool.len() as u64) as usize]);
        }
        let labels = if rng.random::<f64>() < 1.0 - self.spec.eta {
            let y = self.spec.a.mul_vec(v);
            (0..self.spec.m).map(|j| ((y >> j) & 1) as u8).collect()
        } else {
            (0..self.spec.m).map(|_| rng.random::<bool>() as u8).collect()
        };
        CspBlock { symbols, labels }
    }

    /// A block from the null model: symbols uniform over each subset,
    /// labels uniform and independent.
    pub fn sample_uniform_block_with(&self, rng: &mut impl Rng) -> CspBlock {
        let size = self.subset_size();
        let symbols = (0..self.spec.k)
            .map(|i| i * size + (rng.random::<u64>() % size as u64) as usize)
            .collect();
        let labels = (0..self.spec.m)
            .map(|_| rng.random::<bool>() as u8)
            .collect();
        CspBlock { symbols, labels }
    }
}

fn label_bits_to_int(label: &[u8]) -> u64 {
    label
        .iter()
        .enumerate()
        .fold(0u64, |acc, (j, &b)| acc | ((b as u64) << j))
}

fn int_to_label_bits(y: u64, m: usize) -> Vec<u8> {
    (0..m).map(|j| ((y >> j) & 1) as u8).collect()
}

fn sample_distinct_variables(n: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    // Partial Fisher-Yates over 0..n.
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + (rng.random::<u64>() % (n - i) as u64) as usize;
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

/// Draws a clause from the noisy planted distribution: a uniform label `y`,
/// then (with probability `1 - eta`) a uniformly random clause consistent
/// with `A sigma(C) = y`, sampled by drawing a uniform coset element of the
/// nullspace and mapping it onto negation patterns over a uniform ordered
/// tuple of distinct variables; otherwise a uniform clause.
pub fn sample_planted_clause(spec: &CspModelSpec, seed: u64) -> Result<Clause, ConstructionError> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let solver = Gf2Solver::new(&spec.a)?;
    let y: u64 = rng.random::<u64>() & ((1 << spec.m) - 1);
    let planted = rng.random::<f64>() < 1.0 - spec.eta;
    let variables = sample_distinct_variables(spec.n, spec.k, &mut rng);
    let literals = if planted {
        let v = solver.random_solution(y, &mut rng);
        variables
            .iter()
            .enumerate()
            .map(|(i, &var)| {
                let want = ((v >> i) & 1) as u8;
                Literal {
                    variable: var,
                    negated: spec.sigma[var] != want,
                }
            })
            .collect()
    } else {
        variables
            .iter()
            .map(|&var| Literal {
                variable: var,
                negated: rng.random::<bool>(),
            })
            .collect()
    };
    Ok(Clause {
        literals,
        label: int_to_label_bits(y, spec.m),
    })
}

/// A clause from the null model: distinct variables, independent negations,
/// uniform label.
pub fn sample_uniform_clause(n: usize, k: usize, m: usize, seed: u64) -> Clause {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let variables = sample_distinct_variables(n, k, &mut rng);
    let literals = variables
        .into_iter()
        .map(|variable| Literal {
            variable,
            negated: rng.random::<bool>(),
        })
        .collect();
    Clause {
        literals,
        label: int_to_label_bits(rng.random::<u64>() & ((1 << m) - 1), m),
    }
}

/// Exact probability of one labelled clause under the noisy planted
/// distribution (uniform label, then consistent-uniform vs uniform mix).
pub fn planted_clause_probability(spec: &CspModelSpec, clause: &Clause) -> f64 {
    let tuples: f64 = (0..spec.k).map(|i| (spec.n - i) as f64).product();
    let label_prob = 0.5f64.powi(spec.m as i32);
    let consistent =
        spec.a.mul_vec(clause.values_under(&spec.sigma)) == label_bits_to_int(&clause.label);
    let planted_part = if consistent {
        (1.0 - spec.eta) / (tuples * 2f64.powi((spec.k - spec.m) as i32))
    } else {
        0.0
    };
    let uniform_part = spec.eta / (tuples * 2f64.powi(spec.k as i32));
    label_prob * (planted_part + uniform_part)
}

/// One stored solution of `A v = y` per label value.
#[derive(Debug, Clone)]
pub struct SolutionTable {
    m: usize,
    entries: Vec<Option<u64>>,
}

impl SolutionTable {
    pub fn get(&self, y: u64) -> Option<u64> {
        self.entries.get(y as usize).copied().flatten()
    }
}

/// Pre-computes one random solution of `A v = y` for every `y`.
pub fn precompute_solution_table(
    a: &BinaryMatrix,
    seed: u64,
) -> Result<SolutionTable, ConstructionError> {
    let solver = Gf2Solver::new(a)?;
    let m = a.rows();
    let entries = (0..(1u64 << m))
        .map(|y| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(child_seed(seed, y));
            let v = solver.random_solution(y, &mut rng);
            debug_assert_eq!(a.mul_vec(v), y);
            Some(v)
        })
        .collect();
    Ok(SolutionTable { m, entries })
}

/// Maps a zero-labelled clause onto a clause with label `y_target` by
/// flipping the negation of literal `i` exactly when bit `i` of the stored
/// solution `v(y_target)` is set. An assignment satisfies the output
/// against `y_target` iff it satisfied the input against the zero label.
pub fn transform_clause_c0_to_c(
    clause: &Clause,
    y_target: &[u8],
    table: &SolutionTable,
) -> Result<Clause, ConstructionError> {
    if clause.label.iter().any(|&b| b != 0) {
        return Err(ConstructionError::LabelNotZero);
    }
    if y_target.len() != table.m {
        return Err(ConstructionError::MissingTableEntry);
    }
    let y = label_bits_to_int(y_target);
    let v = table.get(y).ok_or(ConstructionError::MissingTableEntry)?;
    let literals = clause
        .literals
        .iter()
        .enumerate()
        .map(|(i, lit)| Literal {
            variable: lit.variable,
            negated: lit.negated ^ (((v >> i) & 1) == 1),
        })
        .collect();
    Ok(Clause {
        literals,
        label: y_target.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec(n: usize, k: usize, m: usize, eta: f64, seed: u64) -> CspModelSpec {
        use crate::constructions::parity::sample_full_row_rank_matrix;
        let (a, _) = sample_full_row_rank_matrix(m, k, seed).unwrap();
        let mut rng = {
            use rand::SeedableRng;
            rand_chacha::ChaCha8Rng::seed_from_u64(seed + 1)
        };
        let sigma: Vec<u8> = (0..n).map(|_| rng.random::<bool>() as u8).collect();
        CspModelSpec::new(n, k, m, a, sigma, eta, 0).unwrap()
    }

    #[test]
    fn letters_and_literals_are_a_bijection() {
        for letter in 0..20 {
            assert_eq!(literal_to_letter(letter_to_literal(letter)), letter);
        }
        assert_eq!(
            letter_to_literal(0),
            Literal {
                variable: 0,
                negated: false
            }
        );
        assert_eq!(
            letter_to_literal(5),
            Literal {
                variable: 2,
                negated: true
            }
        );
    }

    #[test]
    fn partition_constraints_are_enforced() {
        use crate::constructions::parity::sample_full_row_rank_matrix;
        let (a, _) = sample_full_row_rank_matrix(1, 3, 1).unwrap();
        // 2n = 10 not divisible by k = 3.
        assert!(CspModelSpec::new(5, 3, 1, a.clone(), vec![0; 5], 0.0, 0).is_err());
        // 2n/k = 2*3/3 = 2 is even; but 2n/k odd must fail: n=3, k=2 -> 3.
        let (a2, _) = sample_full_row_rank_matrix(1, 2, 2).unwrap();
        assert!(CspModelSpec::new(3, 2, 1, a2, vec![0; 3], 0.0, 0).is_err());
    }

    #[test]
    fn singleton_subsets_reveal_the_assignment_values() {
        // n = k: each subset holds one variable pair, so the emitted letter
        // determines v_i.
        let spec = tiny_spec(4, 4, 2, 0.0, 3);
        let model = CspModel::new(spec.clone()).unwrap();
        for seed in 0..100 {
            let block = model.sample_block(seed);
            let v = model.decode_values(&block.symbols);
            assert_eq!(spec.a.mul_vec(v), label_bits_to_int(&block.labels));
            // Each letter sits in its own variable's subset.
            for (i, &s) in block.symbols.iter().enumerate() {
                assert_eq!(letter_to_literal(s).variable, i);
            }
        }
    }

    #[test]
    fn noiseless_blocks_always_satisfy_the_label_equation() {
        let spec = tiny_spec(8, 4, 2, 0.0, 4);
        let model = CspModel::new(spec.clone()).unwrap();
        for seed in 0..200 {
            let block = model.sample_block(seed);
            let v = model.decode_values(&block.symbols);
            assert_eq!(spec.a.mul_vec(v), label_bits_to_int(&block.labels));
        }
    }

    #[test]
    fn symbols_are_uniform_within_subsets() {
        // Marginally each letter of a subset is equally likely; check at
        // 3 sigma over 40k blocks.
        let spec = tiny_spec(4, 2, 1, 0.0, 5);
        let model = CspModel::new(spec).unwrap();
        let blocks = 40_000;
        let mut counts = vec![0u64; 8];
        for seed in 0..blocks {
            let b = model.sample_block(seed);
            for &s in &b.symbols {
                counts[s] += 1;
            }
        }
        let expect = blocks as f64 / 4.0;
        let sd = (blocks as f64 * 0.25 * 0.75).sqrt();
        for &c in &counts {
            assert!((c as f64 - expect).abs() <= 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn full_noise_labels_carry_no_information() {
        let spec = tiny_spec(4, 4, 2, 1.0, 6);
        let model = CspModel::new(spec.clone()).unwrap();
        // Exact: P(y | v) is uniform for every v when eta = 1.
        for v in 0u64..(1 << spec.k) {
            for y in 0u64..(1 << spec.m) {
                let p = model.label_conditional_probability(v, y);
                assert!((p - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn planted_clauses_satisfy_their_labels_when_noiseless() {
        let spec = tiny_spec(8, 4, 2, 0.0, 7);
        for seed in 0..200 {
            let c = sample_planted_clause(&spec, seed).unwrap();
            let v = c.values_under(&spec.sigma);
            assert_eq!(spec.a.mul_vec(v), label_bits_to_int(&c.label));
            // No repeated variables.
            let mut vars: Vec<usize> = c.literals.iter().map(|l| l.variable).collect();
            vars.sort_unstable();
            vars.dedup();
            assert_eq!(vars.len(), spec.k);
        }
    }

    #[test]
    fn invertible_label_map_pins_the_clause_values() {
        // m = k with invertible A: sigma(C) is fully determined by y.
        let a = BinaryMatrix::identity(2).unwrap();
        let spec = CspModelSpec::new(2, 2, 2, a, vec![1, 0], 0.0, 0).unwrap();
        for seed in 0..50 {
            let c = sample_planted_clause(&spec, seed).unwrap();
            assert_eq!(
                c.values_under(&spec.sigma),
                label_bits_to_int(&c.label)
            );
        }
    }

    #[test]
    fn empirical_clause_distribution_matches_the_planted_formula() {
        // n=4, k=2, m=1 at eta=0.3: chi-squared against exact probabilities
        // over all (clause, label) outcomes, 3 sigma.
        let spec = tiny_spec(4, 2, 1, 0.3, 8);
        let samples = 200_000u64;
        let mut counts: std::collections::HashMap<(usize, usize, u8), u64> =
            std::collections::HashMap::new();
        for seed in 0..samples {
            let c = sample_planted_clause(&spec, seed).unwrap();
            let key = (
                literal_to_letter(c.literals[0]),
                literal_to_letter(c.literals[1]),
                c.label[0],
            );
            *counts.entry(key).or_default() += 1;
        }
        let mut chi2 = 0.0;
        let mut dof = 0;
        for l0 in 0..8usize {
            for l1 in 0..8usize {
                let lit0 = letter_to_literal(l0);
                let lit1 = letter_to_literal(l1);
                if lit0.variable == lit1.variable {
                    continue;
                }
                for label in 0..2u8 {
                    let clause = Clause {
                        literals: vec![lit0, lit1],
                        label: vec![label],
                    };
                    let p = planted_clause_probability(&spec, &clause);
                    let expect = p * samples as f64;
                    let got = *counts.get(&(l0, l1, label)).unwrap_or(&0) as f64;
                    chi2 += (got - expect).powi(2) / expect;
                    dof += 1;
                }
            }
        }
        let dof = (dof - 1) as f64;
        assert!(
            chi2 <= dof + 3.0 * (2.0 * dof).sqrt(),
            "chi2 = {chi2}, dof = {dof}"
        );
    }

    #[test]
    fn coset_transform_preserves_satisfaction_exactly() {
        // k = 4 exhaustive truth-table check of the satisfied-iff property.
        let spec = tiny_spec(8, 4, 2, 0.0, 9);
        let table = precompute_solution_table(&spec.a, 77).unwrap();
        let clause = Clause {
            literals: vec![
                Literal { variable: 1, negated: false },
                Literal { variable: 3, negated: true },
                Literal { variable: 4, negated: false },
                Literal { variable: 6, negated: true },
            ],
            label: vec![0, 0],
        };
        for y in 0u64..4 {
            let y_bits = int_to_label_bits(y, 2);
            let moved = transform_clause_c0_to_c(&clause, &y_bits, &table).unwrap();
            for assignment in 0u64..16 {
                // Assign the clause's variables the bits of `assignment`.
                let mut sigma = vec![0u8; 8];
                for (i, lit) in clause.literals.iter().enumerate() {
                    sigma[lit.variable] = ((assignment >> i) & 1) as u8;
                }
                let before = spec.a.mul_vec(clause.values_under(&sigma)) == 0;
                let after = spec.a.mul_vec(moved.values_under(&sigma)) == y;
                assert_eq!(before, after, "y = {y}, assignment = {assignment:#b}");
            }
        }
    }

    #[test]
    fn transform_with_zero_solution_is_identity_and_involutive() {
        let a = BinaryMatrix::from_rows(vec![0b0011, 0b0110], 4).unwrap();
        // Hand-build a table whose y=0 entry is the zero vector.
        let table = SolutionTable {
            m: 2,
            entries: vec![Some(0), None, None, None],
        };
        let clause = Clause {
            literals: vec![
                Literal { variable: 0, negated: true },
                Literal { variable: 1, negated: false },
                Literal { variable: 2, negated: false },
                Literal { variable: 3, negated: true },
            ],
            label: vec![0, 0],
        };
        let same = transform_clause_c0_to_c(&clause, &[0, 0], &table).unwrap();
        assert_eq!(same, clause);
        // A nonzero nullspace solution for y = 0 applied twice returns the
        // original clause.
        let null = a.nullspace_basis()[0];
        let table2 = SolutionTable {
            m: 2,
            entries: vec![Some(null), None, None, None],
        };
        let once = transform_clause_c0_to_c(&clause, &[0, 0], &table2).unwrap();
        assert_ne!(once, clause);
        let twice = transform_clause_c0_to_c(&once, &[0, 0], &table2).unwrap();
        assert_eq!(twice, clause);
        // Missing entries are typed errors.
        assert!(matches!(
            transform_clause_c0_to_c(&clause, &[1, 0], &table),
            Err(ConstructionError::MissingTableEntry)
        ));
        // Nonzero input labels are rejected.
        let bad = Clause {
            label: vec![1, 0],
            ..clause.clone()
        };
        assert!(matches!(
            transform_clause_c0_to_c(&bad, &[0, 0], &table),
            Err(ConstructionError::LabelNotZero)
        ));
    }
}
