//! One step of the hit-and-run chain for the footrule model.
//!
//! A step from `σ₀` draws cutoffs `b_j = max{j, σ₀(j)} + E_j / (2β)` with
//! `E_j` standard exponential, then samples uniformly from
//! `{τ : τ(i) ≤ b_i for all i}` by placing the symbols `n, n − 1, ..., 1`
//! one at a time, each at a uniform eligible place that is still free.
//! The exponential form has the same law as drawing `u_j` uniform on
//! `[0, e^{−2β(σ₀(j)−j)₊}]` and setting `b_j = j − log(u_j) / (2β)`, and it
//! does not underflow when `β` times the displacement is large.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{MallowsError, Result};
use crate::permutation::Permutation;

/// Cutoffs `b_j` of one step together with the counts
/// `N_j = #{k : b_k ≥ j} − n + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    /// `b[j - 1]` holds `b_j`.
    pub b: Vec<f64>,
    /// `counts[j - 1]` holds `N_j`.
    pub counts: Vec<usize>,
}

impl Bounds {
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    /// `b_j` for one-based `j`.
    pub fn cutoff(&self, j: usize) -> f64 {
        self.b[j - 1]
    }

    /// `N_j` for one-based `j`.
    pub fn count(&self, j: usize) -> usize {
        self.counts[j - 1]
    }
}

/// Outcome of the placement pass: `y[k - 1] = Y_k` is the place receiving
/// symbol `k`, and `result(Y_k) = k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementTrace {
    pub y: Vec<usize>,
    pub result: Permutation,
}

impl PlacementTrace {
    /// `Y_k` for one-based symbol `k`.
    pub fn place_of(&self, k: usize) -> usize {
        self.y[k - 1]
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(MallowsError::InvalidBeta(beta))
    }
}

/// Integer level of a cutoff: the largest symbol `k ≤ n` with `b ≥ k`.
#[inline]
fn level(b: f64, n: usize) -> usize {
    if b >= n as f64 {
        n
    } else {
        b.floor() as usize
    }
}

/// Cutoffs from explicit standard-exponential draws.
pub fn bounds_from_draws(sigma0: &Permutation, beta: f64, draws: &[f64]) -> Result<Bounds> {
    check_beta(beta)?;
    if draws.len() != sigma0.len() {
        return Err(MallowsError::SizeMismatch {
            left: draws.len(),
            right: sigma0.len(),
        });
    }
    let scale = 0.5 / beta;
    let b: Vec<f64> = draws
        .iter()
        .enumerate()
        .map(|(k, &e)| (k + 1).max(sigma0.images()[k]) as f64 + e * scale)
        .collect();
    let counts = counts_from_bounds(&b)?;
    Ok(Bounds { b, counts })
}

/// Draws the cutoffs of one hit-and-run step started at `sigma0`.
pub fn sample_bounds<R: Rng + ?Sized>(
    sigma0: &Permutation,
    beta: f64,
    rng: &mut R,
) -> Result<Bounds> {
    let draws: Vec<f64> = (0..sigma0.len()).map(|_| rng.sample(Exp1)).collect();
    bounds_from_draws(sigma0, beta, &draws)
}

/// `N_j = #{k : b_k ≥ j} − n + j`, computed by bucketing the cutoffs by level.
pub fn counts_from_bounds(b: &[f64]) -> Result<Vec<usize>> {
    let n = b.len();
    let mut per_level = vec![0usize; n + 1];
    for (k, &bk) in b.iter().enumerate() {
        if !(bk >= (k + 1) as f64) {
            return Err(MallowsError::InvariantViolation(format!(
                "cutoff b_{} = {bk} is below its index",
                k + 1
            )));
        }
        per_level[level(bk, n)] += 1;
    }
    let mut counts = vec![0; n];
    let mut at_least = 0;
    for j in (1..=n).rev() {
        at_least += per_level[j];
        // at_least >= n - j + 1 because every b_k >= k
        counts[j - 1] = at_least + j - n;
    }
    Ok(counts)
}

/// Uniform sample from `{τ : τ(i) ≤ b_i}` by sequential symbol placement.
pub fn place_symbols<R: Rng + ?Sized>(b: &[f64], rng: &mut R) -> Result<PlacementTrace> {
    let n = b.len();
    if n == 0 {
        return Err(MallowsError::InvalidArgument("empty cutoff vector".into()));
    }
    for (k, &bk) in b.iter().enumerate() {
        if !(bk >= (k + 1) as f64) {
            return Err(MallowsError::InvariantViolation(format!(
                "cutoff b_{} = {bk} is below its index",
                k + 1
            )));
        }
    }
    let mut placer = Placer::new(n);
    let mut images = vec![0; n];
    let mut y = vec![0; n];
    placer.place(b, rng, &mut images, Some(&mut y))?;
    Ok(PlacementTrace {
        y,
        result: Permutation::from_images_unchecked(images),
    })
}

/// Reusable scratch space for the placement pass.
///
/// Places enter the eligible pool in order of decreasing cutoff; a symbol is
/// assigned to a uniformly chosen pool entry which is then swap-removed, so
/// every operation is `O(1)` and a full pass is `O(n)`.
#[derive(Debug, Clone, Default)]
struct Placer {
    pool: Vec<usize>,
    // places sorted by decreasing level
    order: Vec<usize>,
    // bucket offsets, consumed as write cursors during the sort
    level_start: Vec<usize>,
}

impl Placer {
    fn new(n: usize) -> Self {
        Placer {
            pool: Vec::with_capacity(n),
            order: vec![0; n],
            level_start: vec![0; n + 2],
        }
    }

    /// Fills `images` (zero-based positions, one-based symbols) and
    /// optionally `y`.
    fn place<R: Rng + ?Sized>(
        &mut self,
        b: &[f64],
        rng: &mut R,
        images: &mut [usize],
        mut y: Option<&mut [usize]>,
    ) -> Result<()> {
        let n = b.len();
        self.pool.clear();

        // Counting sort of places by level, highest level first.
        self.level_start.iter_mut().for_each(|c| *c = 0);
        for &bk in b {
            self.level_start[n - level(bk, n)] += 1;
        }
        let mut acc = 0;
        for c in self.level_start.iter_mut() {
            let here = *c;
            *c = acc;
            acc += here;
        }
        for (k, &bk) in b.iter().enumerate() {
            let slot = &mut self.level_start[n - level(bk, n)];
            self.order[*slot] = k;
            *slot += 1;
        }

        let mut next = 0;
        for symbol in (1..=n).rev() {
            while next < n && b[self.order[next]] >= symbol as f64 {
                self.pool.push(self.order[next]);
                next += 1;
            }
            let eligible = self.pool.len();
            if eligible == 0 {
                return Err(MallowsError::InvariantViolation(format!(
                    "no free place can take symbol {symbol}"
                )));
            }
            let place = self.pool.swap_remove(rng.random_range(0..eligible));
            images[place] = symbol;
            if let Some(y) = y.as_deref_mut() {
                y[symbol - 1] = place + 1;
            }
        }
        Ok(())
    }
}

/// One hit-and-run transition from `sigma`.
pub fn hit_and_run_step<R: Rng + ?Sized>(
    sigma: &Permutation,
    beta: f64,
    rng: &mut R,
) -> Result<Permutation> {
    let mut kernel = HitAndRun::new(sigma.len(), beta)?;
    let mut next = sigma.clone();
    kernel.step(&mut next, rng);
    Ok(next)
}

/// Hit-and-run transition kernel with reusable buffers, for running long
/// chains without per-step allocation.
#[derive(Debug, Clone)]
pub struct HitAndRun {
    n: usize,
    beta: f64,
    b: Vec<f64>,
    placer: Placer,
}

impl HitAndRun {
    pub fn new(n: usize, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        if n == 0 {
            return Err(MallowsError::InvalidArgument("n must be at least 1".into()));
        }
        Ok(HitAndRun {
            n,
            beta,
            b: vec![0.0; n],
            placer: Placer::new(n),
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Replaces `state` by one transition of the chain.
    pub fn step<R: Rng + ?Sized>(&mut self, state: &mut Permutation, rng: &mut R) {
        assert_eq!(state.len(), self.n, "state size does not match the kernel");
        let scale = 0.5 / self.beta;
        for (k, bk) in self.b.iter_mut().enumerate() {
            let e: f64 = rng.sample(Exp1);
            *bk = (k + 1).max(state.images()[k]) as f64 + e * scale;
        }
        debug_assert!(self
            .b
            .iter()
            .zip(state.images())
            .enumerate()
            .all(|(k, (&bk, &v))| bk >= (k + 1).max(v) as f64));
        self.placer
            .place(&self.b, rng, state.images_mut(), None)
            .expect("cutoffs satisfy b_j >= j by construction");
    }

    /// Like [`HitAndRun::step`] but also returns the cutoffs and the
    /// placement trace, for arc replay.
    pub fn step_traced<R: Rng + ?Sized>(
        &mut self,
        state: &Permutation,
        rng: &mut R,
    ) -> (Bounds, PlacementTrace) {
        let draws: Vec<f64> = (0..self.n).map(|_| rng.sample(Exp1)).collect();
        let bounds = bounds_from_draws(state, self.beta, &draws).expect("valid state and beta");
        let trace = place_symbols(&bounds.b, rng).expect("cutoffs satisfy b_j >= j");
        (bounds, trace)
    }
}
