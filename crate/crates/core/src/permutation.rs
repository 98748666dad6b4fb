//! One-based permutations of `[n]`, the footrule distance, cycle structure and
//! the boundary-crossing statistics used to describe the model.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MallowsError, Result};

/// A bijection of `{1, ..., n}` stored by its images `σ(1), ..., σ(n)`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    /// Builds a permutation from one-based images, rejecting anything that is
    /// not a bijection of `[n]`.
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        if n == 0 {
            return Err(MallowsError::NotAPermutation("empty image list".into()));
        }
        let mut seen = vec![false; n + 1];
        for (i, &v) in images.iter().enumerate() {
            if v == 0 || v > n {
                return Err(MallowsError::NotAPermutation(format!(
                    "image {v} at position {} is outside 1..={n}",
                    i + 1
                )));
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(MallowsError::NotAPermutation(format!(
                    "image {v} appears more than once"
                )));
            }
        }
        Ok(Permutation { images })
    }

    /// Caller guarantees `images` is a bijection of `[n]`.
    pub(crate) fn from_images_unchecked(images: Vec<usize>) -> Self {
        debug_assert!(Permutation::new(images.clone()).is_ok());
        Permutation { images }
    }

    pub fn identity(n: usize) -> Self {
        assert!(n >= 1, "permutations need n >= 1");
        Permutation {
            images: (1..=n).collect(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.images.len()
    }

    /// Always false; kept for the usual `len`/`is_empty` pairing.
    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// `σ(i)` for one-based `i`. Panics when `i` is outside `1..=n`.
    #[inline]
    pub fn image(&self, i: usize) -> usize {
        self.images[i - 1]
    }

    /// Images as a slice; entry `k` holds `σ(k + 1)`.
    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn into_images(self) -> Vec<usize> {
        self.images
    }

    /// Raw image buffer; writers must leave a bijection behind.
    #[inline]
    pub(crate) fn images_mut(&mut self) -> &mut [usize] {
        &mut self.images
    }

    /// Swaps the images at zero-based positions `a` and `b`.
    #[inline]
    pub(crate) fn swap_positions(&mut self, a: usize, b: usize) {
        self.images.swap(a, b);
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(k, &v)| v == k + 1)
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.len()];
        for (k, &v) in self.images.iter().enumerate() {
            inv[v - 1] = k + 1;
        }
        Permutation { images: inv }
    }

    /// Spearman's footrule `Σ |σ(j) − τ(j)|`.
    pub fn l1_distance(&self, other: &Permutation) -> Result<u64> {
        if self.len() != other.len() {
            return Err(MallowsError::SizeMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(self
            .images
            .iter()
            .zip(&other.images)
            .map(|(&a, &b)| a.abs_diff(b) as u64)
            .sum())
    }

    /// Footrule distance to the identity, `H(σ, Id)`.
    pub fn l1_to_identity(&self) -> u64 {
        self.images
            .iter()
            .enumerate()
            .map(|(k, &v)| v.abs_diff(k + 1) as u64)
            .sum()
    }

    fn check_index(&self, s: usize) -> Result<()> {
        if s == 0 || s > self.len() {
            Err(MallowsError::IndexOutOfRange {
                index: s,
                n: self.len(),
            })
        } else {
            Ok(())
        }
    }

    /// The points of the cycle through `s`, in increasing order.
    pub fn cycle_containing(&self, s: usize) -> Result<Vec<usize>> {
        self.check_index(s)?;
        let mut cycle = self.orbit(s);
        cycle.sort_unstable();
        Ok(cycle)
    }

    /// Orbit of `s` in the order `s, σ(s), σ²(s), ...`.
    fn orbit(&self, s: usize) -> Vec<usize> {
        let mut out = vec![s];
        let mut cur = self.image(s);
        while cur != s {
            out.push(cur);
            cur = self.image(cur);
        }
        out
    }

    /// Length, minimum and maximum of the cycle through `s` without
    /// allocating the cycle.
    pub fn cycle_extent(&self, s: usize) -> Result<CycleExtent> {
        self.check_index(s)?;
        let (mut len, mut min, mut max) = (1, s, s);
        let mut cur = self.image(s);
        while cur != s {
            len += 1;
            min = min.min(cur);
            max = max.max(cur);
            cur = self.image(cur);
        }
        Ok(CycleExtent { len, min, max })
    }

    /// Disjoint cycles, each listed as an orbit starting at its minimum, and
    /// ordered by that minimum.
    pub fn cycle_decomposition(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.len() + 1];
        let mut cycles = Vec::new();
        for start in 1..=self.len() {
            if seen[start] {
                continue;
            }
            let cycle = self.orbit(start);
            for &c in &cycle {
                seen[c] = true;
            }
            cycles.push(cycle);
        }
        cycles
    }

    /// Cycle lengths in nonincreasing order.
    pub fn sorted_cycle_lengths(&self) -> Vec<usize> {
        let mut seen = vec![false; self.len() + 1];
        let mut lengths = Vec::new();
        for start in 1..=self.len() {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut cur = start;
            while !seen[cur] {
                seen[cur] = true;
                len += 1;
                cur = self.image(cur);
            }
            lengths.push(len);
        }
        lengths.sort_unstable_by(|a, b| b.cmp(a));
        lengths
    }

    /// `σ̄(j) = n + 1 − σ(n + 1 − j)`: conjugation by the reversal `j ↦ n + 1 − j`.
    pub fn reverse_conjugate(&self) -> Permutation {
        let n = self.len();
        let images = (1..=n).map(|j| n + 1 - self.image(n + 1 - j)).collect();
        Permutation { images }
    }

    /// `(|D_j|, |D'_j|)` where `D_j = {k ≤ j : σ(k) ≥ j + 1}` and
    /// `D'_j = {k ≥ j + 1 : σ(k) ≤ j}`. Both sets are empty for `j = 0`.
    pub fn displacement_count(&self, j: usize) -> Result<(usize, usize)> {
        if j > self.len() {
            return Err(MallowsError::IndexOutOfRange {
                index: j,
                n: self.len(),
            });
        }
        let left = self.images[..j].iter().filter(|&&v| v > j).count();
        let right = self.images[j..].iter().filter(|&&v| v <= j).count();
        Ok((left, right))
    }

    /// Graph points `(x, σ(x))` in the quadrants `x ≥ j + Δ, y ≤ j − Δ` and
    /// `x ≤ j − Δ, y ≥ j + Δ` respectively.
    pub fn quadrant_count(&self, j: usize, delta: f64) -> Result<(usize, usize)> {
        self.check_index(j)?;
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(MallowsError::InvalidArgument(format!(
                "quadrant offset must be positive and finite, got {delta}"
            )));
        }
        let jf = j as f64;
        let mut lower_right = 0;
        let mut upper_left = 0;
        for (k, &y) in self.images.iter().enumerate() {
            let (x, y) = ((k + 1) as f64, y as f64);
            if x >= jf + delta && y <= jf - delta {
                lower_right += 1;
            }
            if x <= jf - delta && y >= jf + delta {
                upper_left += 1;
            }
        }
        Ok((lower_right, upper_left))
    }
}

/// Size and span of one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleExtent {
    pub len: usize,
    pub min: usize,
    pub max: usize,
}

impl CycleExtent {
    pub fn diameter(&self) -> usize {
        self.max - self.min
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation({self})")
    }
}

/// Single line of space separated one-based images, e.g. `2 3 1`.
impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.images.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl FromStr for Permutation {
    type Err = MallowsError;

    fn from_str(s: &str) -> Result<Self> {
        let images = s
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>().map_err(|_| {
                    MallowsError::NotAPermutation(format!("`{tok}` is not a positive integer"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Permutation::new(images)
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = MallowsError;

    fn try_from(images: Vec<usize>) -> Result<Self> {
        Permutation::new(images)
    }
}

/// Size `n` and inverse temperature `β > 0` of the model
/// `P(σ) ∝ exp(−β H(σ, Id))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub beta: f64,
}

impl ModelParams {
    pub fn new(n: usize, beta: f64) -> Result<Self> {
        if n == 0 {
            return Err(MallowsError::InvalidArgument("n must be at least 1".into()));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(MallowsError::InvalidBeta(beta));
        }
        Ok(ModelParams { n, beta })
    }

    /// Unnormalized weight `exp(−β H)`.
    #[inline]
    pub fn weight(&self, h: u64) -> f64 {
        (-self.beta * h as f64).exp()
    }
}
