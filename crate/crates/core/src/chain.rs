//! Seeded, schedule-independent parallel chain runner.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MallowsError, Result};
use crate::permutation::{ModelParams, Permutation};
use crate::rng::{ChainStream, MAX_STREAM_N};
use crate::sampler::HitAndRun;

/// Run configuration for a set of independent chains started at the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub params: ModelParams,
    pub burnin: u64,
    pub thin: u64,
    /// Total number of emitted states across all chains.
    pub samples: usize,
    pub master_seed: u64,
    pub chains: usize,
}

/// `10 · n · ⌈log₂(n + 1)⌉`.
pub fn default_burnin(n: usize) -> u64 {
    let log = (usize::BITS - n.leading_zeros()) as u64; // ceil(log2(n + 1))
    10 * n as u64 * log
}

impl ChainConfig {
    /// One chain, default burn-in, no thinning.
    pub fn new(params: ModelParams, samples: usize, master_seed: u64) -> Self {
        ChainConfig {
            params,
            burnin: default_burnin(params.n),
            thin: 1,
            samples,
            master_seed,
            chains: 1,
        }
    }

    pub fn with_burnin(mut self, burnin: u64) -> Self {
        self.burnin = burnin;
        self
    }

    pub fn with_thin(mut self, thin: u64) -> Self {
        self.thin = thin;
        self
    }

    pub fn with_chains(mut self, chains: usize) -> Self {
        self.chains = chains;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ModelParams::new(self.params.n, self.params.beta)?;
        if self.thin == 0 {
            return Err(MallowsError::InvalidArgument(
                "thin must be at least 1".into(),
            ));
        }
        if self.samples == 0 {
            return Err(MallowsError::InvalidArgument(
                "samples must be at least 1".into(),
            ));
        }
        if self.chains == 0 {
            return Err(MallowsError::InvalidArgument(
                "chains must be at least 1".into(),
            ));
        }
        if self.params.n > MAX_STREAM_N {
            return Err(MallowsError::InvalidArgument(format!(
                "n = {} exceeds the per-step stream capacity ({MAX_STREAM_N})",
                self.params.n
            )));
        }
        Ok(())
    }

    /// Number of states emitted by chain `chain`; the remainder of an uneven
    /// split goes to the lowest chain ids.
    pub fn samples_for_chain(&self, chain: usize) -> usize {
        self.samples / self.chains + usize::from(chain < self.samples % self.chains)
    }
}

/// One emitted chain state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSample {
    pub chain: usize,
    /// Number of transitions applied since the identity start.
    pub step: u64,
    pub perm: Permutation,
}

/// Runs every chain and maps each emitted state through `f(chain, step, σ)`.
/// Results are grouped by chain id, in emission order; they depend only on
/// the configuration, not on the thread schedule.
pub fn run_chains_with<T, F>(config: &ChainConfig, f: F) -> Result<Vec<Vec<T>>>
where
    T: Send,
    F: Fn(usize, u64, &Permutation) -> T + Sync,
{
    run_chains_fold(config, Vec::new, |out, chain, step, sigma| {
        out.push(f(chain, step, sigma))
    })
}

/// Folds the emitted states of each chain into one accumulator per chain,
/// returned in chain-id order.
pub fn run_chains_fold<A, I, F>(config: &ChainConfig, init: I, fold: F) -> Result<Vec<A>>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, usize, u64, &Permutation) + Sync,
{
    config.validate()?;
    (0..config.chains)
        .into_par_iter()
        .map(|chain| {
            let mut acc = init();
            run_one_chain(config, chain, |chain, step, sigma| {
                fold(&mut acc, chain, step, sigma)
            })?;
            Ok(acc)
        })
        .collect()
}

fn run_one_chain<F>(config: &ChainConfig, chain: usize, mut visit: F) -> Result<()>
where
    F: FnMut(usize, u64, &Permutation),
{
    let params = config.params;
    let mut kernel = HitAndRun::new(params.n, params.beta)?;
    let mut stream = ChainStream::new(config.master_seed, chain as u64);
    let mut state = Permutation::identity(params.n);
    let mut step = 0u64;
    let mut advance = |state: &mut Permutation, count: u64, step: &mut u64| {
        for _ in 0..count {
            *step += 1;
            kernel.step(state, stream.at_step(*step));
        }
    };
    advance(&mut state, config.burnin, &mut step);
    for _ in 0..config.samples_for_chain(chain) {
        advance(&mut state, config.thin, &mut step);
        visit(chain, step, &state);
    }
    Ok(())
}

/// Collects every emitted permutation, ordered by chain id then step.
pub fn run_chain(config: &ChainConfig) -> Result<Vec<ChainSample>> {
    Ok(run_chains_with(config, |chain, step, perm| ChainSample {
        chain,
        step,
        perm: perm.clone(),
    })?
    .into_iter()
    .flatten()
    .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, beta: f64) -> ModelParams {
        ModelParams::new(n, beta).unwrap()
    }

    #[test]
    fn default_burnin_formula() {
        assert_eq!(default_burnin(1), 10);
        assert_eq!(default_burnin(5), 150);
        assert_eq!(default_burnin(7), 210);
        assert_eq!(default_burnin(8), 320);
    }

    #[test]
    fn consecutive_states_without_burnin() {
        let config = ChainConfig::new(params(6, 0.5), 3, 11).with_burnin(0);
        let out = run_chain(&config).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(
            out.iter().map(|s| s.step).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
        assert!(out.iter().all(|s| s.chain == 0));
    }

    #[test]
    fn thinning_and_split() {
        let config = ChainConfig::new(params(4, 1.0), 7, 1)
            .with_burnin(5)
            .with_thin(3)
            .with_chains(3);
        let out = run_chain(&config).unwrap();
        let per_chain: Vec<usize> = (0..3)
            .map(|c| out.iter().filter(|s| s.chain == c).count())
            .collect();
        assert_eq!(per_chain, vec![3, 2, 2]);
        let steps: Vec<u64> = out
            .iter()
            .filter(|s| s.chain == 0)
            .map(|s| s.step)
            .collect();
        assert_eq!(steps, vec![8, 11, 14]);
    }

    #[test]
    fn deterministic_and_chain_distinct() {
        let config = ChainConfig::new(params(50, 0.01), 2, 42)
            .with_burnin(0)
            .with_chains(2);
        let a = run_chain(&config).unwrap();
        let b = run_chain(&config).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].perm, a[1].perm);
        let c = run_chain(&ChainConfig {
            master_seed: 43,
            ..config
        })
        .unwrap();
        assert_ne!(a[0].perm, c[0].perm);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let config = ChainConfig::new(params(30, 0.2), 12, 5)
            .with_burnin(3)
            .with_chains(4);
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let wide = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = serial.install(|| run_chain(&config)).unwrap();
        let b = wide.install(|| run_chain(&config)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_invalid_configs() {
        let base = ChainConfig::new(params(3, 1.0), 1, 0);
        assert!(run_chain(&base.with_thin(0)).is_err());
        assert!(run_chain(&base.with_chains(0)).is_err());
        assert!(run_chain(&ChainConfig { samples: 0, ..base }).is_err());
    }

    #[test]
    fn single_point_chain() {
        let out = run_chain(&ChainConfig::new(params(1, 0.3), 5, 0)).unwrap();
        assert!(out.iter().all(|s| s.perm.to_string() == "1"));
    }
}
