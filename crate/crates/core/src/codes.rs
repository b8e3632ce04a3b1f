//! GF(2) linear algebra and binary linear codes.
//!
//! Matrices are stored one `u64` per row (at most 64 columns — plenty at
//! desk scale). The convention throughout: a parity matrix `A` is `m x k`
//! and acts on length-`k` column vectors, `y = A v mod 2`. A [`LinearCode`]
//! stores its basis codewords as the rows of an `m x k` matrix, which is the
//! transpose of the column-generator convention; the transposition happens
//! here at the code boundary and nowhere else.

use rand::{Rng, SeedableRng};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CodesError {
    #[error("matrix must have between 1 and 64 columns, got {cols}")]
    BadWidth { cols: usize },
    #[error("matrix must have at least one row")]
    NoRows,
    #[error("rows have inconsistent lengths")]
    RaggedRows,
    #[error("invalid character {c:?} in matrix text")]
    BadChar { c: char },
    #[error("basis matrix has rank {rank}, expected full row rank {rows}")]
    NotFullRank { rank: usize, rows: usize },
    #[error("exhaustive work {required:.3e} exceeds budget {budget:.3e}")]
    Budget { required: f64, budget: f64 },
    #[error("subset size {t} exceeds {cols} coordinates")]
    SubsetTooLarge { t: usize, cols: usize },
    #[error("target distance {target} exceeds code length {k}")]
    TargetExceedsLength { target: usize, k: usize },
    #[error("rank {m} exceeds half the length {k}; need m <= k/2")]
    RateTooHigh { m: usize, k: usize },
    #[error("random search exhausted after {attempts} attempts")]
    SearchExhausted { attempts: u64 },
}

/// A dense GF(2) matrix, row-major, one u64 of column bits per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self, CodesError> {
        if cols == 0 || cols > 64 {
            return Err(CodesError::BadWidth { cols });
        }
        if rows == 0 {
            return Err(CodesError::NoRows);
        }
        Ok(BinaryMatrix {
            rows,
            cols,
            data: vec![0; rows],
        })
    }

    /// Builds from per-row bit masks; bit `j` of `data[i]` is entry `(i, j)`.
    pub fn from_rows(data: Vec<u64>, cols: usize) -> Result<Self, CodesError> {
        if cols == 0 || cols > 64 {
            return Err(CodesError::BadWidth { cols });
        }
        if data.is_empty() {
            return Err(CodesError::NoRows);
        }
        let mask = mask_of(cols);
        if data.iter().any(|&r| r & !mask != 0) {
            return Err(CodesError::BadWidth { cols });
        }
        Ok(BinaryMatrix {
            rows: data.len(),
            cols,
            data,
        })
    }

    pub fn identity(n: usize) -> Result<Self, CodesError> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m.set(i, i, true);
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> u64 {
        self.data[i]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        (self.data[i] >> j) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        if value {
            self.data[i] |= 1 << j;
        } else {
            self.data[i] &= !(1 << j);
        }
    }

    /// `A v mod 2` for a bit-packed length-`cols` vector; bit `i` of the
    /// result is the parity of row `i` masked by `v`.
    pub fn mul_vec(&self, v: u64) -> u64 {
        let mut out = 0u64;
        for (i, &row) in self.data.iter().enumerate() {
            out |= (((row & v).count_ones() as u64) & 1) << i;
        }
        out
    }

    /// Rank over GF(2) by elimination.
    pub fn rank(&self) -> usize {
        let mut rows = self.data.clone();
        let mut rank = 0;
        for col in 0..self.cols {
            let Some(pivot) = (rank..rows.len()).find(|&r| (rows[r] >> col) & 1 == 1) else {
                continue;
            };
            rows.swap(rank, pivot);
            for r in 0..rows.len() {
                if r != rank && (rows[r] >> col) & 1 == 1 {
                    rows[r] ^= rows[rank];
                }
            }
            rank += 1;
            if rank == rows.len() {
                break;
            }
        }
        rank
    }

    /// Basis of `{v : A v = 0 mod 2}`, with `cols - rank` vectors.
    pub fn nullspace_basis(&self) -> Vec<u64> {
        // Reduced row echelon form, tracking pivot columns.
        let mut rows = self.data.clone();
        let mut pivots: Vec<usize> = Vec::new();
        let mut rank = 0;
        for col in 0..self.cols {
            let Some(p) = (rank..rows.len()).find(|&r| (rows[r] >> col) & 1 == 1) else {
                continue;
            };
            rows.swap(rank, p);
            for r in 0..rows.len() {
                if r != rank && (rows[r] >> col) & 1 == 1 {
                    rows[r] ^= rows[rank];
                }
            }
            pivots.push(col);
            rank += 1;
            if rank == rows.len() {
                break;
            }
        }
        let mut basis = Vec::new();
        let pivot_set: u64 = pivots.iter().fold(0, |acc, &c| acc | (1 << c));
        for free in 0..self.cols {
            if (pivot_set >> free) & 1 == 1 {
                continue;
            }
            let mut v = 1u64 << free;
            for (r, &pc) in pivots.iter().enumerate() {
                if (rows[r] >> free) & 1 == 1 {
                    v |= 1 << pc;
                }
            }
            basis.push(v);
        }
        basis
    }

    /// Rows of '0'/'1' characters.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for &row in &self.data {
            for j in 0..self.cols {
                out.push(if (row >> j) & 1 == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self, CodesError> {
        let mut data = Vec::new();
        let mut cols = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            match cols {
                None => cols = Some(line.len()),
                Some(c) if c != line.len() => return Err(CodesError::RaggedRows),
                _ => {}
            }
            let mut row = 0u64;
            for (j, c) in line.chars().enumerate() {
                match c {
                    '1' => row |= 1 << j,
                    '0' => {}
                    other => return Err(CodesError::BadChar { c: other }),
                }
            }
            data.push(row);
        }
        let cols = cols.ok_or(CodesError::NoRows)?;
        BinaryMatrix::from_rows(data, cols)
    }
}

fn mask_of(cols: usize) -> u64 {
    if cols == 64 {
        u64::MAX
    } else {
        (1u64 << cols) - 1
    }
}

/// Free-function form of [`BinaryMatrix::rank`].
pub fn gf2_rank(m: &BinaryMatrix) -> usize {
    m.rank()
}

/// A binary linear code of length `k` and rank `m`, held as an `m x k`
/// full-row-rank basis matrix (rows are basis codewords).
#[derive(Debug, Clone)]
pub struct LinearCode {
    basis: BinaryMatrix,
    cached_distance: Option<usize>,
}

impl LinearCode {
    pub fn new(basis: BinaryMatrix) -> Result<Self, CodesError> {
        let rank = basis.rank();
        if rank != basis.rows() {
            return Err(CodesError::NotFullRank {
                rank,
                rows: basis.rows(),
            });
        }
        Ok(LinearCode {
            basis,
            cached_distance: None,
        })
    }

    pub fn length(&self) -> usize {
        self.basis.cols()
    }

    pub fn rank(&self) -> usize {
        self.basis.rows()
    }

    pub fn basis(&self) -> &BinaryMatrix {
        &self.basis
    }

    /// Iterates all 2^m codewords in Gray-code order.
    pub fn codewords(&self) -> impl Iterator<Item = u64> + '_ {
        let m = self.basis.rows();
        let mut word = 0u64;
        (0u64..(1u64 << m)).map(move |i| {
            if i > 0 {
                word ^= self.basis.row(i.trailing_zeros() as usize);
            }
            word
        })
    }

    /// Minimum Hamming weight over the nonzero codewords, by exhaustive
    /// enumeration (the cached value is always exhaustively verified).
    pub fn min_distance(&mut self, budget: f64) -> Result<usize, CodesError> {
        if let Some(d) = self.cached_distance {
            return Ok(d);
        }
        let required = 2f64.powi(self.basis.rows() as i32);
        if required > budget {
            return Err(CodesError::Budget { required, budget });
        }
        let best = self
            .codewords()
            .skip(1)
            .map(|w| w.count_ones() as usize)
            .min()
            .expect("code has nonzero words");
        self.cached_distance = Some(best);
        Ok(best)
    }
}

/// True iff projecting the uniform distribution over `nullspace(a)` onto
/// every `t`-subset of coordinates gives exactly the uniform distribution
/// on t bits, by exhaustive counting.
pub fn check_t_wise_uniform(a: &BinaryMatrix, t: usize, budget: f64) -> Result<bool, CodesError> {
    let cols = a.cols();
    if t == 0 {
        return Ok(true);
    }
    if t > cols {
        return Err(CodesError::SubsetTooLarge { t, cols });
    }
    let basis = a.nullspace_basis();
    let r = basis.len();
    let span = 1u64 << r;
    let required = binomial(cols, t) * 2f64.powi(r as i32);
    if required > budget {
        return Err(CodesError::Budget { required, budget });
    }
    if r < t {
        // Fewer than 2^t vectors cannot cover all t-bit patterns uniformly.
        return Ok(false);
    }
    let expected = span >> t;
    // Materialize the nullspace once (Gray-code over the basis).
    let mut vectors = Vec::with_capacity(span as usize);
    let mut word = 0u64;
    vectors.push(word);
    for i in 1..span {
        word ^= basis[i.trailing_zeros() as usize];
        vectors.push(word);
    }
    let mut subset: Vec<usize> = (0..t).collect();
    loop {
        let mut counts = vec![0u64; 1 << t];
        for &v in &vectors {
            let mut pattern = 0usize;
            for (bit, &coord) in subset.iter().enumerate() {
                pattern |= (((v >> coord) & 1) as usize) << bit;
            }
            counts[pattern] += 1;
        }
        if counts.iter().any(|&c| c != expected) {
            return Ok(false);
        }
        if !next_combination(&mut subset, cols) {
            return Ok(true);
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Advances `subset` to the next lexicographic k-combination of `0..n`.
fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] != i + n - k {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Solves `A v = y mod 2` for arbitrary right-hand sides, after one
/// elimination pass on `A`. Requires `A` to have full row rank so every
/// `y` is consistent.
#[derive(Debug, Clone)]
pub struct Gf2Solver {
    cols: usize,
    /// Pivot column of each eliminated row.
    pivots: Vec<usize>,
    /// RREF rows of `A` (unused beyond pivots, kept for clarity in debug).
    rref: Vec<u64>,
    /// Row-operation tracker: `transform[i]` holds the combination of
    /// original rows that produced RREF row `i`.
    transform: Vec<u64>,
    nullspace: Vec<u64>,
}

impl Gf2Solver {
    pub fn new(a: &BinaryMatrix) -> Result<Self, CodesError> {
        let m = a.rows();
        let mut rows: Vec<(u64, u64)> = (0..m).map(|i| (a.row(i), 1u64 << i)).collect();
        let mut pivots = Vec::new();
        let mut rank = 0;
        for col in 0..a.cols() {
            let Some(p) = (rank..m).find(|&r| (rows[r].0 >> col) & 1 == 1) else {
                continue;
            };
            rows.swap(rank, p);
            for r in 0..m {
                if r != rank && (rows[r].0 >> col) & 1 == 1 {
                    rows[r].0 ^= rows[rank].0;
                    rows[r].1 ^= rows[rank].1;
                }
            }
            pivots.push(col);
            rank += 1;
            if rank == m {
                break;
            }
        }
        if rank != m {
            return Err(CodesError::NotFullRank { rank, rows: m });
        }
        Ok(Gf2Solver {
            cols: a.cols(),
            pivots,
            rref: rows.iter().map(|r| r.0).collect(),
            transform: rows.iter().map(|r| r.1).collect(),
            nullspace: a.nullspace_basis(),
        })
    }

    /// The particular solution with zeros in all free coordinates.
    pub fn particular_solution(&self, y: u64) -> u64 {
        let mut v = 0u64;
        for (r, &pc) in self.pivots.iter().enumerate() {
            let bit = (self.transform[r] & y).count_ones() as u64 & 1;
            v |= bit << pc;
        }
        debug_assert!(self.rref.len() == self.pivots.len());
        v
    }

    /// A uniformly random solution of `A v = y`: the particular solution
    /// plus a uniform element of the nullspace.
    pub fn random_solution(&self, y: u64, rng: &mut impl Rng) -> u64 {
        let mut v = self.particular_solution(y);
        for &b in &self.nullspace {
            if rng.random::<bool>() {
                v ^= b;
            }
        }
        v
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nullspace(&self) -> &[u64] {
        &self.nullspace
    }
}

/// A uniformly random `rows x cols` GF(2) matrix.
pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Result<BinaryMatrix, CodesError> {
    let mask = if cols == 0 || cols > 64 {
        return Err(CodesError::BadWidth { cols });
    } else {
        mask_of(cols)
    };
    let data: Vec<u64> = (0..rows).map(|_| rng.random::<u64>() & mask).collect();
    BinaryMatrix::from_rows(data, cols)
}

/// The result of the random code search: the `m x k` parity matrix
/// `A` (basis rows of the found code), its exhaustively verified minimum
/// distance, and how many attempts the search used.
#[derive(Debug, Clone)]
pub struct GvCode {
    pub matrix: BinaryMatrix,
    pub distance: usize,
    pub attempts: u64,
}

/// Random search for an `m x k` full-row-rank matrix whose row-span code
/// has minimum distance at least `target_distance`. The returned matrix
/// `A` then has a nullspace that is `(target_distance - 1)`-wise uniform
/// (the dual-distance fact), which the search relies on downstream and
/// which is verified exhaustively via the distance computation here.
pub fn find_code_with_dual_distance(
    k: usize,
    m: usize,
    target_distance: usize,
    max_attempts: u64,
    seed: u64,
) -> Result<GvCode, CodesError> {
    if target_distance > k {
        return Err(CodesError::TargetExceedsLength {
            target: target_distance,
            k,
        });
    }
    if 2 * m > k {
        return Err(CodesError::RateTooHigh { m, k });
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0;
    while attempts < max_attempts {
        attempts += 1;
        let candidate = random_matrix(m, k, &mut rng)?;
        if candidate.rank() != m {
            continue;
        }
        let mut code = LinearCode::new(candidate)?;
        let distance = code.min_distance(2f64.powi(24))?;
        if distance >= target_distance {
            return Ok(GvCode {
                matrix: code.basis().clone(),
                distance,
                attempts,
            });
        }
    }
    Err(CodesError::SearchExhausted { attempts })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent elimination oracle over byte vectors.
    fn rank_oracle(m: &BinaryMatrix) -> usize {
        let mut rows: Vec<Vec<u8>> = (0..m.rows())
            .map(|i| (0..m.cols()).map(|j| m.get(i, j) as u8).collect())
            .collect();
        let mut rank = 0;
        for col in 0..m.cols() {
            if let Some(p) = (rank..rows.len()).find(|&r| rows[r][col] == 1) {
                rows.swap(rank, p);
                for r in 0..rows.len() {
                    if r != rank && rows[r][col] == 1 {
                        for c in 0..m.cols() {
                            rows[r][c] ^= rows[rank][c];
                        }
                    }
                }
                rank += 1;
            }
        }
        rank
    }

    #[test]
    fn rank_of_identity_and_zero() {
        let id = BinaryMatrix::identity(7).unwrap();
        assert_eq!(gf2_rank(&id), 7);
        let z = BinaryMatrix::zeros(4, 9).unwrap();
        assert_eq!(gf2_rank(&z), 0);
    }

    #[test]
    fn rank_matches_independent_oracle() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let m = random_matrix(5, 10, &mut rng).unwrap();
            assert_eq!(m.rank(), rank_oracle(&m));
        }
    }

    #[test]
    fn nullspace_of_identity_is_empty() {
        let id = BinaryMatrix::identity(5).unwrap();
        assert!(id.nullspace_basis().is_empty());
    }

    #[test]
    fn nullspace_of_all_ones_row_is_even_weight() {
        let a = BinaryMatrix::from_rows(vec![0b111], 3).unwrap();
        let basis = a.nullspace_basis();
        assert_eq!(basis.len(), 2);
        for v in basis {
            assert_eq!(v.count_ones() % 2, 0);
            assert_eq!(a.mul_vec(v), 0);
        }
    }

    #[test]
    fn nullspace_spans_exactly_the_kernel() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let a = random_matrix(4, 10, &mut rng).unwrap();
            let basis = a.nullspace_basis();
            assert_eq!(basis.len(), a.cols() - a.rank());
            for &v in &basis {
                assert_eq!(a.mul_vec(v), 0);
            }
            // Enumerate the full space: kernel size must be 2^(cols - rank).
            let kernel = (0u64..(1 << a.cols())).filter(|&v| a.mul_vec(v) == 0).count();
            assert_eq!(kernel, 1usize << (a.cols() - a.rank()));
        }
    }

    #[test]
    fn duality_of_ranks() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_matrix(5, 12, &mut rng).unwrap();
            let basis = a.nullspace_basis();
            if basis.is_empty() {
                assert_eq!(a.rank(), a.cols());
                continue;
            }
            let dual = BinaryMatrix::from_rows(basis, a.cols()).unwrap();
            assert_eq!(a.rank() + dual.rank(), a.cols());
        }
    }

    #[test]
    fn min_distance_of_repetition_and_identity_codes() {
        let mut rep = LinearCode::new(BinaryMatrix::from_rows(vec![0b111], 3).unwrap()).unwrap();
        assert_eq!(rep.min_distance(1e6).unwrap(), 3);
        let mut triv = LinearCode::new(BinaryMatrix::identity(4).unwrap()).unwrap();
        assert_eq!(triv.min_distance(1e6).unwrap(), 1);
    }

    #[test]
    fn min_distance_matches_exhaustive_oracle() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let mut done = 0;
        while done < 10 {
            let a = random_matrix(4, 10, &mut rng).unwrap();
            if a.rank() != 4 {
                continue;
            }
            done += 1;
            let mut code = LinearCode::new(a.clone()).unwrap();
            let fast = code.min_distance(1e6).unwrap();
            // Oracle: explicit message-by-message encoding.
            let mut best = usize::MAX;
            for msg in 1u64..(1 << 4) {
                let mut word = 0u64;
                for bit in 0..4 {
                    if (msg >> bit) & 1 == 1 {
                        word ^= a.row(bit);
                    }
                }
                best = best.min(word.count_ones() as usize);
            }
            assert_eq!(fast, best);
        }
    }

    #[test]
    fn all_ones_row_is_pairwise_but_not_triple_uniform() {
        let a = BinaryMatrix::from_rows(vec![0b111], 3).unwrap();
        assert!(check_t_wise_uniform(&a, 2, 1e9).unwrap());
        assert!(!check_t_wise_uniform(&a, 3, 1e9).unwrap());
    }

    #[test]
    fn trivial_nullspace_is_not_even_one_wise_uniform() {
        let a = BinaryMatrix::identity(3).unwrap();
        assert!(!check_t_wise_uniform(&a, 1, 1e9).unwrap());
    }

    #[test]
    fn found_codes_are_t_wise_uniform_at_distance_minus_one() {
        let gv = find_code_with_dual_distance(8, 4, 2, 10_000, 42).unwrap();
        assert!(gv.distance >= 2);
        assert_eq!(gv.matrix.rank(), 4);
        assert!(check_t_wise_uniform(&gv.matrix, gv.distance - 1, 1e9).unwrap());
    }

    #[test]
    fn impossible_target_fails_immediately() {
        let err = find_code_with_dual_distance(8, 4, 9, 100, 1).unwrap_err();
        assert!(matches!(err, CodesError::TargetExceedsLength { .. }));
    }

    #[test]
    fn search_succeeds_across_seeds() {
        let mut successes = 0;
        for seed in 0..100 {
            if find_code_with_dual_distance(10, 5, 2, 10_000, seed).is_ok() {
                successes += 1;
            }
        }
        assert!(successes >= 1, "no seed produced a distance-2 code");
    }

    #[test]
    fn solver_produces_valid_solutions_for_every_rhs() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let mut done = 0;
        while done < 10 {
            let a = random_matrix(3, 8, &mut rng).unwrap();
            if a.rank() != 3 {
                continue;
            }
            done += 1;
            let solver = Gf2Solver::new(&a).unwrap();
            for y in 0u64..8 {
                let v = solver.particular_solution(y);
                assert_eq!(a.mul_vec(v), y);
                let r = solver.random_solution(y, &mut rng);
                assert_eq!(a.mul_vec(r), y);
            }
        }
    }

    #[test]
    fn text_round_trip() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let a = random_matrix(3, 17, &mut rng).unwrap();
        let text = a.to_text();
        let back = BinaryMatrix::parse_text(&text).unwrap();
        assert_eq!(a, back);
        assert!(BinaryMatrix::parse_text("01\n0").is_err());
        assert!(BinaryMatrix::parse_text("01x\n010").is_err());
    }
}
