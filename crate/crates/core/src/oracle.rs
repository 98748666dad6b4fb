//! Brute-force evaluation of the model over all of `S_n` for small `n`.
//!
//! Enumeration uses Heap's algorithm, so consecutive permutations differ by
//! one transposition and the footrule distance is updated in constant time.
//! The work is split by the image of the last position; each branch is
//! folded independently and the partial results are merged in branch order,
//! which keeps the output independent of the thread schedule.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{MallowsError, Result};
use crate::permutation::{ModelParams, Permutation};

/// Largest `n` accepted by the streaming enumerator.
pub const ORACLE_MAX_N: usize = 10;
/// Largest `n` for which the full probability table is stored.
pub const TABLE_MAX_N: usize = 8;

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

fn check_oracle_n(n: usize, max: usize) -> Result<()> {
    if n > max {
        Err(MallowsError::OracleLimit { n, max })
    } else {
        Ok(())
    }
}

/// Visits every permutation of `S_n` together with its distance to the
/// identity. Returns one accumulator per branch, in branch order.
pub fn fold_permutations<A, I, F>(n: usize, init: I, fold: F) -> Result<Vec<A>>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, &Permutation, u64) + Sync,
{
    if n == 0 {
        return Err(MallowsError::InvalidArgument("n must be at least 1".into()));
    }
    check_oracle_n(n, ORACLE_MAX_N)?;
    Ok((1..=n)
        .into_par_iter()
        .map(|last| {
            let mut acc = init();
            let mut perm = Permutation::identity(n);
            perm.swap_positions(last - 1, n - 1);
            let h = perm.l1_to_identity();
            heap_enumerate(&mut perm, n - 1, h, |p, h| fold(&mut acc, p, h));
            acc
        })
        .collect())
}

/// Heap's algorithm over the first `k` positions of `perm`, maintaining the
/// footrule distance `h` incrementally.
fn heap_enumerate<F: FnMut(&Permutation, u64)>(
    perm: &mut Permutation,
    k: usize,
    mut h: u64,
    mut visit: F,
) {
    visit(perm, h);
    if k < 2 {
        return;
    }
    let displacement = |p: &Permutation, pos: usize| p.images()[pos].abs_diff(pos + 1) as u64;
    let mut counters = vec![0usize; k];
    let mut i = 1;
    while i < k {
        if counters[i] < i {
            let a = if i % 2 == 0 { 0 } else { counters[i] };
            h -= displacement(perm, a) + displacement(perm, i);
            perm.swap_positions(a, i);
            h += displacement(perm, a) + displacement(perm, i);
            visit(perm, h);
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
}

/// Precomputed `exp(−β h)` for every attainable `h`.
struct WeightTable(Vec<f64>);

impl WeightTable {
    fn new(params: &ModelParams) -> Self {
        // max footrule distance is floor(n^2 / 2)
        let max_h = params.n * params.n / 2;
        WeightTable((0..=max_h as u64).map(|h| params.weight(h)).collect())
    }

    #[inline]
    fn get(&self, h: u64) -> f64 {
        self.0[h as usize]
    }
}

/// `Z_{n,β} = Σ_σ exp(−β H(σ, Id))`.
pub fn partition_function(params: &ModelParams) -> Result<f64> {
    let weights = WeightTable::new(params);
    let parts = fold_permutations(params.n, CompensatedSum::default, |acc, _, h| {
        acc.add(weights.get(h))
    })?;
    Ok(merge_sums(&parts).value())
}

fn merge_sums(parts: &[CompensatedSum]) -> CompensatedSum {
    let mut total = CompensatedSum::default();
    for p in parts {
        total.merge(p);
    }
    total
}

/// `P_{n,β}(σ)`.
pub fn exact_probability(sigma: &Permutation, params: &ModelParams) -> Result<f64> {
    if sigma.len() != params.n {
        return Err(MallowsError::SizeMismatch {
            left: sigma.len(),
            right: params.n,
        });
    }
    let z = partition_function(params)?;
    Ok(params.weight(sigma.l1_to_identity()) / z)
}

/// Exact expectation of a vector-valued statistic. `f` writes the statistic
/// of `σ` into its output buffer of length `dim`.
pub fn exact_expectation_vec<F>(params: &ModelParams, dim: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(&Permutation, &mut [f64]) + Sync,
{
    let weights = WeightTable::new(params);
    let parts = fold_permutations(
        params.n,
        || {
            (
                CompensatedSum::default(),
                vec![CompensatedSum::default(); dim],
                vec![0.0; dim],
            )
        },
        |(z, sums, buf), sigma, h| {
            let w = weights.get(h);
            z.add(w);
            f(sigma, buf);
            for (s, &v) in sums.iter_mut().zip(buf.iter()) {
                s.add(w * v);
            }
        },
    )?;
    let mut z = CompensatedSum::default();
    let mut sums = vec![CompensatedSum::default(); dim];
    for (pz, psums, _) in &parts {
        z.merge(pz);
        for (s, p) in sums.iter_mut().zip(psums) {
            s.merge(p);
        }
    }
    let z = z.value();
    Ok(sums.iter().map(|s| s.value() / z).collect())
}

/// `E_{n,β}[f(σ)]`, streamed over `S_n`.
pub fn exact_expectation<F>(params: &ModelParams, f: F) -> Result<f64>
where
    F: Fn(&Permutation) -> f64 + Sync,
{
    Ok(exact_expectation_vec(params, 1, |sigma, out| out[0] = f(sigma))?[0])
}

/// Tail probabilities `P(|D_j(σ)| ≥ r)` for `r = 0, ..., n + 1`.
pub fn exact_tail_distribution_d(params: &ModelParams, j: usize) -> Result<Vec<f64>> {
    let n = params.n;
    if j == 0 || j > n {
        return Err(MallowsError::IndexOutOfRange { index: j, n });
    }
    let mass = exact_expectation_vec(params, n + 1, |sigma, out| {
        out.fill(0.0);
        let (d, _) = sigma.displacement_count(j).expect("j checked above");
        out[d] = 1.0;
    })?;
    let mut tail = vec![0.0; n + 2];
    let mut acc = CompensatedSum::default();
    for r in (0..=n).rev() {
        acc.add(mass[r]);
        tail[r] = acc.value();
    }
    // r = 0 covers every permutation
    tail[0] = 1.0;
    Ok(tail)
}

/// Lexicographic rank of a permutation in `S_n` (identity has rank 0).
pub fn lex_rank(sigma: &Permutation) -> usize {
    let images = sigma.images();
    let n = images.len();
    let mut rank = 0;
    for i in 0..n {
        let smaller_later = images[i + 1..].iter().filter(|&&v| v < images[i]).count();
        rank = rank * (n - i) + smaller_later;
    }
    rank
}

/// Inverse of [`lex_rank`].
pub fn lex_unrank(n: usize, mut rank: usize) -> Permutation {
    let mut digits = vec![0; n];
    for i in (0..n).rev() {
        let base = n - i;
        digits[i] = rank % base;
        rank /= base;
    }
    let mut pool: Vec<usize> = (1..=n).collect();
    let images = digits.into_iter().map(|d| pool.remove(d)).collect();
    Permutation::from_images_unchecked(images)
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// The model at one `(n, β)` with its partition function and, for
/// `n ≤ TABLE_MAX_N`, the full probability table indexed by [`lex_rank`].
#[derive(Debug, Clone)]
pub struct ExactModel {
    pub params: ModelParams,
    pub z: f64,
    table: Option<Vec<f64>>,
}

impl ExactModel {
    pub fn new(params: ModelParams) -> Result<Self> {
        let z = partition_function(&params)?;
        let table = if params.n <= TABLE_MAX_N {
            let weights = WeightTable::new(&params);
            let mut table = vec![0.0; factorial(params.n)];
            let parts = fold_permutations(
                params.n,
                Vec::new,
                |acc: &mut Vec<(usize, f64)>, sigma, h| {
                    acc.push((lex_rank(sigma), weights.get(h) / z));
                },
            )?;
            for (rank, p) in parts.into_iter().flatten() {
                table[rank] = p;
            }
            Some(table)
        } else {
            None
        };
        Ok(ExactModel { params, z, table })
    }

    /// Probability table indexed by lexicographic rank, when materialized.
    pub fn table(&self) -> Option<&[f64]> {
        self.table.as_deref()
    }

    pub fn probability(&self, sigma: &Permutation) -> Result<f64> {
        if sigma.len() != self.params.n {
            return Err(MallowsError::SizeMismatch {
                left: sigma.len(),
                right: self.params.n,
            });
        }
        Ok(self.params.weight(sigma.l1_to_identity()) / self.z)
    }
}

/// Half the L1 distance between the empirical frequencies and the exact law,
/// summed over all of `S_n`.
pub fn total_variation_distance(
    empirical: &HashMap<Permutation, u64>,
    exact: &ExactModel,
) -> Result<f64> {
    let n = exact.params.n;
    let table = exact.table().ok_or(MallowsError::OracleLimit {
        n,
        max: TABLE_MAX_N,
    })?;
    let mut counts = vec![0u64; table.len()];
    let mut total = 0u64;
    for (sigma, &c) in empirical {
        if sigma.len() != n {
            return Err(MallowsError::SizeMismatch {
                left: sigma.len(),
                right: n,
            });
        }
        counts[lex_rank(sigma)] += c;
        total += c;
    }
    if total == 0 {
        return Err(MallowsError::InvalidArgument(
            "empirical distribution is empty".into(),
        ));
    }
    let mut acc = CompensatedSum::default();
    for (&c, &p) in counts.iter().zip(table) {
        acc.add((c as f64 / total as f64 - p).abs());
    }
    Ok(0.5 * acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, beta: f64) -> ModelParams {
        ModelParams::new(n, beta).unwrap()
    }

    #[test]
    fn heap_visits_every_permutation_once_with_correct_distance() {
        for n in 1..=6 {
            let parts = fold_permutations(n, Vec::new, |acc: &mut Vec<Permutation>, p, h| {
                assert_eq!(h, p.l1_to_identity());
                acc.push(p.clone());
            })
            .unwrap();
            let mut all: Vec<_> = parts.into_iter().flatten().collect();
            all.sort();
            all.dedup();
            assert_eq!(all.len(), factorial(n));
        }
    }

    #[test]
    fn rank_roundtrip() {
        for r in 0..factorial(5) {
            assert_eq!(lex_rank(&lex_unrank(5, r)), r);
        }
        assert_eq!(lex_rank(&Permutation::identity(4)), 0);
        assert_eq!(lex_unrank(3, 5).images(), &[3, 2, 1]);
    }

    #[test]
    fn partition_function_small_cases() {
        for beta in [0.1, 1.0, 5.0] {
            assert_eq!(partition_function(&params(1, beta)).unwrap(), 1.0);
            let z2 = 1.0 + (-2.0 * beta).exp();
            assert!((partition_function(&params(2, beta)).unwrap() - z2).abs() < 1e-12);
            let z3 = 1.0 + 2.0 * (-2.0 * beta).exp() + 3.0 * (-4.0 * beta).exp();
            assert!((partition_function(&params(3, beta)).unwrap() - z3).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_limit() {
        assert_eq!(
            partition_function(&params(11, 1.0)),
            Err(MallowsError::OracleLimit { n: 11, max: 10 })
        );
        let model = ExactModel::new(params(9, 1.0)).unwrap();
        assert!(model.table().is_none());
        assert!(total_variation_distance(&HashMap::new(), &model).is_err());
    }

    #[test]
    fn probability_examples() {
        let id2 = Permutation::identity(2);
        let swap = Permutation::new(vec![2, 1]).unwrap();
        let z = partition_function(&params(2, 1.0)).unwrap();
        assert!((exact_probability(&id2, &params(2, 1.0)).unwrap() - 1.0 / z).abs() < 1e-15);
        let e2 = (-2.0f64).exp();
        assert!(
            (exact_probability(&swap, &params(2, 1.0)).unwrap() - e2 / (1.0 + e2)).abs() < 1e-15
        );
        assert!((exact_probability(&swap, &params(2, 1e-9)).unwrap() - 0.5).abs() < 1e-8);
        assert!(exact_probability(&swap, &params(3, 1.0)).is_err());
    }

    #[test]
    fn expectation_examples() {
        let beta = 0.7;
        assert!((exact_expectation(&params(5, beta), |_| 1.0).unwrap() - 1.0).abs() < 1e-12);
        let e = (-2.0 * beta).exp();
        let c1 =
            exact_expectation(&params(2, beta), |s| s.cycle_extent(1).unwrap().len as f64).unwrap();
        assert!((c1 - (1.0 + 2.0 * e) / (1.0 + e)).abs() < 1e-12);
    }

    #[test]
    fn expected_footrule_n3() {
        // S_3 by hand: H = 0 once, 2 twice, 4 three times.
        let e2 = (-2.0f64).exp();
        let e4 = (-4.0f64).exp();
        let want = (2.0 * 2.0 * e2 + 3.0 * 4.0 * e4) / (1.0 + 2.0 * e2 + 3.0 * e4);
        let got = exact_expectation(&params(3, 1.0), |s| s.l1_to_identity() as f64).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn tail_examples() {
        let tail = exact_tail_distribution_d(&params(2, 1.0), 1).unwrap();
        let e2 = (-2.0f64).exp();
        assert_eq!(tail.len(), 4);
        assert_eq!(tail[0], 1.0);
        assert!((tail[1] - e2 / (1.0 + e2)).abs() < 1e-15);
        assert_eq!(tail[3], 0.0);
        assert!(exact_tail_distribution_d(&params(2, 1.0), 0).is_err());
        assert!(exact_tail_distribution_d(&params(2, 1.0), 3).is_err());
    }

    #[test]
    fn tvd_examples() {
        let model = ExactModel::new(params(3, 0.8)).unwrap();
        let n_samples = 1_000_000.0;
        let mut exact_counts = HashMap::new();
        for (r, &p) in model.table().unwrap().iter().enumerate() {
            exact_counts.insert(lex_unrank(3, r), (p * n_samples).round() as u64);
        }
        assert!(total_variation_distance(&exact_counts, &model).unwrap() < 1e-5);

        let mut only_id = HashMap::new();
        only_id.insert(Permutation::identity(2), 10);
        let m2 = ExactModel::new(params(2, 1.0)).unwrap();
        let e2 = (-2.0f64).exp();
        let tvd = total_variation_distance(&only_id, &m2).unwrap();
        assert!((tvd - (1.0 - 1.0 / (1.0 + e2))).abs() < 1e-12);
        let m_cold = ExactModel::new(params(2, 50.0)).unwrap();
        assert!(total_variation_distance(&only_id, &m_cold).unwrap() < 1e-12);

        let mut wrong_n = HashMap::new();
        wrong_n.insert(Permutation::identity(3), 1);
        assert!(total_variation_distance(&wrong_n, &m2).is_err());
    }

    #[test]
    fn compensated_sum_beats_naive_on_near_equal_terms() {
        let mut acc = CompensatedSum::default();
        acc.add(1e16);
        for _ in 0..1000 {
            acc.add(1.0);
        }
        acc.add(-1e16);
        assert_eq!(acc.value(), 1000.0);
    }
}
