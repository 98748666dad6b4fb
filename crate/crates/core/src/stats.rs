//! Estimators and reference distributions for cycle statistics.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{run_chains_fold, ChainConfig};
use crate::error::{MallowsError, Result};
use crate::permutation::Permutation;

/// Cycle statistics of one permutation, relative to a marked point `s`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleSummary {
    pub n: usize,
    /// `l_1 ≥ l_2 ≥ ...`, without the zero padding.
    pub sorted_lengths: Vec<usize>,
    /// `|C_s(σ)|`.
    pub len_at_s: usize,
    /// `max(C_s) − min(C_s)`.
    pub diameter_at_s: usize,
}

pub fn summarize(sigma: &Permutation, s: usize) -> Result<CycleSummary> {
    let extent = sigma.cycle_extent(s)?;
    Ok(CycleSummary {
        n: sigma.len(),
        sorted_lengths: sigma.sorted_cycle_lengths(),
        len_at_s: extent.len,
        diameter_at_s: extent.diameter(),
    })
}

impl CycleSummary {
    /// `Σ (l_i / n)²`.
    pub fn sum_squared_fractions(&self) -> f64 {
        let n = self.n as f64;
        self.sorted_lengths
            .iter()
            .map(|&l| (l as f64 / n).powi(2))
            .sum()
    }

    pub fn largest(&self) -> usize {
        self.sorted_lengths[0]
    }
}

/// Running count, sum and sum of squares; merges associatively.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// Unbiased sample variance; zero for fewer than two values.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }
}

impl FromIterator<f64> for Accumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Accumulator::default();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub mean: f64,
    pub std_error: f64,
    pub count: u64,
}

impl EstimateWithError {
    /// Pools per-chain accumulators (merged in the given order). With two or
    /// more chains the standard error comes from the spread of the chain
    /// means; with a single chain it falls back to the within-chain
    /// independent-sample formula.
    pub fn from_chains(chains: &[Accumulator]) -> Result<Self> {
        let mut total = Accumulator::default();
        for c in chains {
            total.merge(c);
        }
        if total.count == 0 {
            return Err(MallowsError::InvalidArgument(
                "no samples to estimate from".into(),
            ));
        }
        let std_error = if chains.len() >= 2 {
            if chains.iter().any(|c| c.count == 0) {
                return Err(MallowsError::InvalidArgument(
                    "a chain produced no samples".into(),
                ));
            }
            let means: Accumulator = chains.iter().map(Accumulator::mean).collect();
            (means.variance() / chains.len() as f64).sqrt()
        } else {
            (total.variance() / total.count as f64).sqrt()
        };
        Ok(EstimateWithError {
            mean: total.mean(),
            std_error,
            count: total.count,
        })
    }

    /// `|mean − target| / std_error`, with a zero error treated as exact.
    pub fn z_score(&self, target: f64) -> f64 {
        let dev = (self.mean - target).abs();
        if self.std_error == 0.0 {
            if dev <= 1e-12 * target.abs().max(1.0) {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            dev / self.std_error
        }
    }
}

/// Runs the chains and estimates the means of a vector statistic; `f`
/// writes the `dim` components for one state.
pub fn estimate_statistics<F>(
    config: &ChainConfig,
    dim: usize,
    f: F,
) -> Result<Vec<EstimateWithError>>
where
    F: Fn(&Permutation, &mut [f64]) + Sync,
{
    let per_chain = run_chains_fold(
        config,
        || (vec![Accumulator::default(); dim], vec![0.0; dim]),
        |(accs, buf), _, _, sigma| {
            f(sigma, buf);
            for (a, &x) in accs.iter_mut().zip(buf.iter()) {
                a.push(x);
            }
        },
    )?;
    (0..dim)
        .map(|d| {
            let chains: Vec<Accumulator> = per_chain.iter().map(|(accs, _)| accs[d]).collect();
            EstimateWithError::from_chains(&chains)
        })
        .collect()
}

/// Runs the chains and estimates `E[f(σ)]`.
pub fn estimate_statistic<F>(config: &ChainConfig, f: F) -> Result<EstimateWithError>
where
    F: Fn(&Permutation) -> f64 + Sync,
{
    Ok(estimate_statistics(config, 1, |sigma, out| out[0] = f(sigma))?[0])
}

fn check_s(s: usize, n: usize) -> Result<()> {
    if s == 0 || s > n {
        Err(MallowsError::IndexOutOfRange { index: s, n })
    } else {
        Ok(())
    }
}

/// Monte Carlo estimate of `E|C_s(σ)|`.
pub fn estimate_cycle_length(s: usize, config: &ChainConfig) -> Result<EstimateWithError> {
    check_s(s, config.params.n)?;
    estimate_statistic(config, |sigma| {
        sigma
            .cycle_extent(s)
            .map(|e| e.len as f64)
            .unwrap_or(f64::NAN)
    })
}

/// Monte Carlo estimate of `E[max(C_s) − min(C_s)]`.
pub fn estimate_cycle_diameter(s: usize, config: &ChainConfig) -> Result<EstimateWithError> {
    check_s(s, config.params.n)?;
    estimate_statistic(config, |sigma| {
        sigma
            .cycle_extent(s)
            .map(|e| e.diameter() as f64)
            .unwrap_or(f64::NAN)
    })
}

/// Cycle length and diameter estimates at `s` from a single run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleEstimates {
    pub length: EstimateWithError,
    pub diameter: EstimateWithError,
}

pub fn estimate_cycle_stats(s: usize, config: &ChainConfig) -> Result<CycleEstimates> {
    check_s(s, config.params.n)?;
    let est = estimate_statistics(config, 2, |sigma, out| {
        let e = sigma.cycle_extent(s).expect("s checked above");
        out[0] = e.len as f64;
        out[1] = e.diameter() as f64;
    })?;
    Ok(CycleEstimates {
        length: est[0],
        diameter: est[1],
    })
}

/// First `k` normalized sorted cycle lengths `l_i / n` of each sample,
/// zero padded.
pub fn normalized_sorted_lengths(samples: &[Permutation], k: usize) -> Vec<Vec<f64>> {
    samples
        .iter()
        .map(|sigma| {
            let n = sigma.len() as f64;
            let lengths = sigma.sorted_cycle_lengths();
            (0..k)
                .map(|i| lengths.get(i).map_or(0.0, |&l| l as f64 / n))
                .collect()
        })
        .collect()
}

/// Residual mass at which stick breaking stops.
pub const GEM_TOLERANCE: f64 = 1e-12;

/// GEM(1) stick-breaking masses in generation order, `p_i = U_i Π_{j<i}(1 − U_j)`,
/// stopped once the unbroken remainder drops below `tolerance`.
pub fn gem_sticks<R: Rng + ?Sized>(rng: &mut R, tolerance: f64) -> Vec<f64> {
    let mut masses = Vec::new();
    let mut rest = 1.0;
    while rest >= tolerance {
        // uniform on (0, 1]: keeps every mass strictly positive
        let u = 1.0 - rng.random::<f64>();
        let piece = u * rest;
        masses.push(piece);
        rest -= piece;
    }
    masses
}

/// A Poisson–Dirichlet(1) sample: GEM(1) masses sorted in decreasing order.
pub fn gem_stick_breaking<R: Rng + ?Sized>(rng: &mut R) -> Vec<f64> {
    let mut masses = gem_sticks(rng, GEM_TOLERANCE);
    masses.sort_unstable_by(|a, b| b.total_cmp(a));
    masses
}

/// Uniform random permutation by Fisher–Yates.
pub fn uniform_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Permutation {
    let mut images: Vec<usize> = (1..=n).collect();
    images.shuffle(rng);
    Permutation::from_images_unchecked(images)
}

/// Cycle summary of a uniform random permutation of `[n]`.
pub fn uniform_permutation_reference<R: Rng + ?Sized>(
    n: usize,
    s: usize,
    rng: &mut R,
) -> Result<CycleSummary> {
    if n == 0 {
        return Err(MallowsError::InvalidArgument("n must be at least 1".into()));
    }
    summarize(&uniform_permutation(n, rng), s)
}

/// Kolmogorov–Smirnov statistic and asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub d: f64,
    pub p_value: f64,
}

/// Kolmogorov survival function `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`,
/// truncated at 40 terms.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=40 {
        let k = k as f64;
        sum += sign * (-2.0 * k * k * lambda * lambda).exp();
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let en = effective_n.sqrt();
    kolmogorov_survival((en + 0.12 + 0.11 / en) * d)
}

fn sorted_finite(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(MallowsError::InvalidArgument("empty sample".into()));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(MallowsError::InvalidArgument(
            "sample contains a non-finite value".into(),
        ));
    }
    let mut v = sample.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    Ok(v)
}

/// One-sample KS test of `sample` against the continuous CDF `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<KsResult> {
    let xs = sorted_finite(sample)?;
    let m = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / m - f).max(f - i as f64 / m)
        })
        .fold(0.0, f64::max);
    Ok(KsResult {
        d,
        p_value: ks_p_value(d, m),
    })
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let xs = sorted_finite(a)?;
    let ys = sorted_finite(b)?;
    let (m, n) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < m && j < n {
        let v = xs[i].min(ys[j]);
        while i < m && xs[i] <= v {
            i += 1;
        }
        while j < n && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / m as f64 - j as f64 / n as f64).abs());
    }
    let (mf, nf) = (m as f64, n as f64);
    Ok(KsResult {
        d,
        p_value: ks_p_value(d, mf * nf / (mf + nf)),
    })
}

/// Ordinary least-squares line fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// NaN when only two points are given.
    pub std_error: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(MallowsError::SizeMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if xs.len() < 2 || !(sxx > 0.0) {
        return Err(MallowsError::InvalidArgument(
            "need at least two distinct x values".into(),
        ));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let std_error = if xs.len() > 2 {
        let rss: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (rss / (m - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Ok(SlopeFit {
        slope,
        intercept,
        std_error,
    })
}

fn checked_ln(v: f64, what: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v.ln())
    } else {
        Err(MallowsError::InvalidArgument(format!(
            "{what} must be positive, got {v}"
        )))
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let xs = points
        .iter()
        .map(|&(x, _)| checked_ln(x, "x"))
        .collect::<Result<Vec<_>>>()?;
    let ys = points
        .iter()
        .map(|&(_, y)| checked_ln(y, "y"))
        .collect::<Result<Vec<_>>>()?;
    linear_fit(&xs, &ys)
}

/// Least-squares slope of `log y` against `x`.
pub fn semilog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let xs: Vec<f64> = points.iter().map(|&(x, _)| x).collect();
    let ys = points
        .iter()
        .map(|&(_, y)| checked_ln(y, "y"))
        .collect::<Result<Vec<_>>>()?;
    linear_fit(&xs, &ys)
}
