//! Batch-means estimates and inequality verdicts.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("batch size must be at least 1")]
    ZeroBatch,
    #[error("too few samples: {samples} < 2 x batch size {batch_size}")]
    TooFewSamples { samples: usize, batch_size: usize },
}

pub const DEFAULT_BATCH_SIZE: usize = 100;
pub const DEFAULT_K_SIGMA: f64 = 3.0;

/// Sample mean with a batch-means standard error.
///
/// The sum is kept as a multiset of partial sums (one per batch plus the
/// remainder) and added up in sorted order, so merging is exactly associative
/// and commutative.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    partial_sums: Vec<f64>,
    batch_means: Vec<f64>,
    n_samples: usize,
    seeds: Vec<u64>,
}

impl Estimate {
    pub fn mean(&self) -> f64 {
        let mut parts = self.partial_sums.clone();
        parts.sort_by(f64::total_cmp);
        parts.iter().sum::<f64>() / self.n_samples as f64
    }

    pub fn stderr(&self) -> f64 {
        let k = self.batch_means.len();
        if k < 2 {
            return 0.0;
        }
        let mut means = self.batch_means.clone();
        means.sort_by(f64::total_cmp);
        let avg = means.iter().sum::<f64>() / k as f64;
        let var = means.iter().map(|m| (m - avg).powi(2)).sum::<f64>() / (k - 1) as f64;
        (var / k as f64).sqrt()
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_batches(&self) -> usize {
        self.batch_means.len()
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seeds.push(seed);
        self.seeds.sort_unstable();
        self
    }

    /// Pools two estimates; the result's error bar comes from all batches.
    pub fn merge(&self, other: &Estimate) -> Estimate {
        let mut partial_sums = self.partial_sums.clone();
        partial_sums.extend_from_slice(&other.partial_sums);
        partial_sums.sort_by(f64::total_cmp);
        let mut batch_means = self.batch_means.clone();
        batch_means.extend_from_slice(&other.batch_means);
        batch_means.sort_by(f64::total_cmp);
        let mut seeds = self.seeds.clone();
        seeds.extend_from_slice(&other.seeds);
        seeds.sort_unstable();
        Estimate {
            partial_sums,
            batch_means,
            n_samples: self.n_samples + other.n_samples,
            seeds,
        }
    }

    pub fn merge_all<'a>(estimates: impl IntoIterator<Item = &'a Estimate>) -> Option<Estimate> {
        estimates.into_iter().fold(None, |acc, e| match acc {
            None => Some(e.clone()),
            Some(a) => Some(a.merge(e)),
        })
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ± {} (n={})", self.mean(), self.stderr(), self.n_samples)
    }
}

/// Splits the stream into consecutive batches of `batch_size`. Samples past the
/// last full batch count toward the mean but not toward the error bar.
pub fn accumulate(stream: &[f64], batch_size: usize) -> Result<Estimate, StatsError> {
    if batch_size == 0 {
        return Err(StatsError::ZeroBatch);
    }
    if stream.len() < 2 * batch_size {
        return Err(StatsError::TooFewSamples {
            samples: stream.len(),
            batch_size,
        });
    }
    let mut partial_sums = Vec::new();
    let mut batch_means = Vec::new();
    let mut chunks = stream.chunks_exact(batch_size);
    for chunk in &mut chunks {
        let s: f64 = chunk.iter().sum();
        partial_sums.push(s);
        batch_means.push(s / batch_size as f64);
    }
    let rest = chunks.remainder();
    if !rest.is_empty() {
        partial_sums.push(rest.iter().sum());
    }
    Ok(Estimate {
        partial_sums,
        batch_means,
        n_samples: stream.len(),
        seeds: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn swapped(self) -> Self {
        match self {
            Verdict::Holds => Verdict::Violated,
            Verdict::Violated => Verdict::Holds,
            Verdict::Inconclusive => Verdict::Inconclusive,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classifies a signed margin `rhs - lhs` with standard error `sigma`.
pub fn margin_verdict(margin: f64, sigma: f64, k_sigma: f64) -> Verdict {
    let band = k_sigma * sigma;
    if margin > band {
        Verdict::Holds
    } else if -margin > band {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    }
}

/// Verdict on `lhs <= rhs` for independently sampled estimates.
pub fn inequality_verdict(lhs: &Estimate, rhs: &Estimate, k_sigma: f64) -> Verdict {
    let sigma = lhs.stderr().hypot(rhs.stderr());
    margin_verdict(rhs.mean() - lhs.mean(), sigma, k_sigma)
}

/// Verdict on `lhs <= rhs` for jointly sampled observables, given the estimate
/// of the per-sample difference `rhs - lhs`.
pub fn paired_verdict(difference: &Estimate, k_sigma: f64) -> Verdict {
    margin_verdict(difference.mean(), difference.stderr(), k_sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn fixed(mean: f64, stderr: f64) -> Estimate {
        // two batches of one sample at mean +- stderr: sd/sqrt(2) = stderr
        let d = stderr;
        Estimate {
            partial_sums: vec![mean - d, mean + d],
            batch_means: vec![mean - d, mean + d],
            n_samples: 2,
            seeds: Vec::new(),
        }
    }

    #[test]
    fn constant_stream() {
        let e = accumulate(&[1.0; 1000], 100).unwrap();
        assert_eq!(e.mean(), 1.0);
        assert_eq!(e.stderr(), 0.0);
        assert_eq!(e.n_batches(), 10);
    }

    #[test]
    fn alternating_stream() {
        let s: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let e = accumulate(&s, 2).unwrap();
        assert_eq!(e.mean(), 0.0);
        assert_eq!(e.stderr(), 0.0);
    }

    #[test]
    fn iid_signs_have_binomial_error() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(12);
        let s: Vec<f64> = (0..10_000).map(|_| if rng.gen() { 1.0 } else { -1.0 }).collect();
        let e = accumulate(&s, 100).unwrap();
        assert!(e.stderr() > 0.005 && e.stderr() < 0.02, "{}", e.stderr());
    }

    #[test]
    fn remainder_counts_toward_mean() {
        let e = accumulate(&[1.0, 1.0, 1.0, 1.0, 4.0], 2).unwrap();
        assert_eq!(e.n_samples(), 5);
        assert_eq!(e.n_batches(), 2);
        assert!((e.mean() - 8.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert_eq!(accumulate(&[1.0; 10], 0), Err(StatsError::ZeroBatch));
        assert_eq!(
            accumulate(&[1.0; 10], 6),
            Err(StatsError::TooFewSamples { samples: 10, batch_size: 6 })
        );
    }

    #[test]
    fn verdict_examples() {
        let v = inequality_verdict(&fixed(0.90, 0.01), &fixed(0.95, 0.01), 3.0);
        assert_eq!(v, Verdict::Holds);
        assert_eq!(inequality_verdict(&fixed(0.5, 0.01), &fixed(0.5, 0.01), 3.0), Verdict::Inconclusive);
        assert_eq!(inequality_verdict(&fixed(0.99, 0.001), &fixed(0.90, 0.001), 3.0), Verdict::Violated);
        assert!((fixed(0.9, 0.01).stderr() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn merge_pools_batches_and_seeds() {
        let a = accumulate(&[1.0; 400], 100).unwrap().with_seed(3);
        let b = accumulate(&[0.0; 200], 100).unwrap().with_seed(1);
        let m = a.merge(&b);
        assert_eq!(m.n_samples(), 600);
        assert_eq!(m.n_batches(), 6);
        assert!((m.mean() - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(m.seeds(), &[1, 3]);
        assert!(m.stderr() > 0.0);
    }

    proptest! {
        #[test]
        fn merge_is_associative_and_commutative(
            xs in prop::collection::vec(-1e3f64..1e3, 4..40),
            ys in prop::collection::vec(-1e3f64..1e3, 4..40),
            zs in prop::collection::vec(-1e3f64..1e3, 4..40),
        ) {
            let (a, b, c) = (accumulate(&xs, 2).unwrap(), accumulate(&ys, 2).unwrap(), accumulate(&zs, 2).unwrap());
            let left = a.merge(&b).merge(&c);
            let right = a.merge(&b.merge(&c));
            prop_assert_eq!(left.mean(), right.mean());
            prop_assert_eq!(left.stderr(), right.stderr());
            prop_assert_eq!(a.merge(&b).mean(), b.merge(&a).mean());
            prop_assert_eq!(a.merge(&b).stderr(), b.merge(&a).stderr());
        }

        #[test]
        fn verdicts_swap_with_arguments(
            m1 in -1.0f64..1.0, s1 in 0.0f64..0.1, m2 in -1.0f64..1.0, s2 in 0.0f64..0.1, k in 0.5f64..5.0,
        ) {
            let (a, b) = (fixed(m1, s1), fixed(m2, s2));
            prop_assert_eq!(inequality_verdict(&a, &b, k), inequality_verdict(&b, &a, k).swapped());
        }

        #[test]
        fn stderr_nonnegative(xs in prop::collection::vec(-10f64..10.0, 2..200), bs in 1usize..10) {
            if let Ok(e) = accumulate(&xs, bs) {
                prop_assert!(e.stderr() >= 0.0);
            }
        }
    }
}
