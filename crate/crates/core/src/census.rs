//! Exact height census of `[1, x]` by a segmented sieve.
//!
//! Only primes with `p^2 <= hi` are sieved, and only their multiples of
//! `p^2` receive per-element work: a prime dividing `n` exactly once never
//! changes `h(n)`, and neither does whatever cofactor is left after the
//! square-dividing primes are stripped. For each touched `n` the exact
//! exponent `e` of `p` is extracted and the running maximum of `h(e)` is
//! kept in one byte; then `h(n) = 1 + max` for `n >= 2`.
//!
//! Segments are independent, so `census` tallies them in parallel and sums
//! the per-segment counts. `first_run` consumes segments in ascending order
//! and carries the length of the current run across segment boundaries.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::arith::{isqrt, primes_up_to};
use crate::tower::small_height;

pub const DEFAULT_SEGMENT_SIZE: u64 = 1 << 20;

/// Heights of `u64` values never exceed 4; one slot of slack.
const HEIGHT_SLOTS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CensusError {
    #[error("segment size must be at least 2, got {0}")]
    SegmentTooSmall(u64),
    #[error("limit must be at least 1")]
    ZeroLimit,
    #[error("worker count must be at least 1")]
    ZeroWorkers,
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

/// Segmenting and threading parameters shared by the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepConfig {
    pub segment_size: u64,
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            segment_size: DEFAULT_SEGMENT_SIZE,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

impl SweepConfig {
    fn validate(&self) -> Result<(), CensusError> {
        if self.segment_size < 2 {
            return Err(CensusError::SegmentTooSmall(self.segment_size));
        }
        if self.workers == 0 {
            return Err(CensusError::ZeroWorkers);
        }
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool, CensusError> {
        rayon::ThreadPoolBuilder::new().num_threads(self.workers).build().map_err(|e| CensusError::Pool(e.to_string()))
    }
}

/// Counts of `{n <= x : h(n) = k}` for every `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeightCensus {
    limit: u64,
    counts: Vec<u64>,
    elapsed: Duration,
}

impl HeightCensus {
    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// `counts()[k]` is the number of `n <= x` with `h(n) = k`, up to the
    /// largest height observed.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, k: usize) -> u64 {
        self.counts.get(k).copied().unwrap_or(0)
    }

    /// `T_k(x)`, the number of `n <= x` with at least `k` floors.
    pub fn at_least(&self, k: usize) -> u64 {
        self.counts.iter().skip(k).sum()
    }

    pub fn max_height(&self) -> usize {
        self.counts.len().saturating_sub(1)
    }

    pub fn elapsed(&self) -> Duration {
        self.elapsed
    }
}

/// Fills `out[i]` with `h(lo + i)` for `lo..=hi`. `primes` must contain every
/// prime up to `isqrt(hi)`.
pub fn segment_heights(lo: u64, hi: u64, primes: &[u64], out: &mut Vec<u8>) {
    debug_assert!(1 <= lo && lo <= hi);
    let len = usize::try_from(hi - lo + 1).expect("segment fits in memory");
    out.clear();
    out.resize(len, 0);

    for &p in primes {
        let sq = p * p;
        if sq > hi {
            break;
        }
        let Some(mut m) = lo.div_ceil(sq).checked_mul(sq) else { continue };
        while m <= hi {
            let mut q = m / sq;
            let mut e = 2;
            while q % p == 0 {
                q /= p;
                e += 1;
            }
            let h = small_height(e);
            let slot = &mut out[(m - lo) as usize];
            if h > *slot {
                *slot = h;
            }
            match m.checked_add(sq) {
                Some(next) => m = next,
                None => break,
            }
        }
    }

    for slot in out.iter_mut() {
        *slot += 1;
    }
    if lo == 1 {
        out[0] = 0;
    }
}

fn segments(lo: u64, hi: u64, size: u64) -> impl Iterator<Item = (u64, u64)> {
    let mut next = Some(lo);
    std::iter::from_fn(move || {
        let start = next?;
        if start > hi {
            return None;
        }
        let end = start.saturating_add(size - 1).min(hi);
        next = end.checked_add(1);
        Some((start, end))
    })
}

fn tally(heights: &[u8]) -> [u64; HEIGHT_SLOTS] {
    let mut counts = [0u64; HEIGHT_SLOTS];
    for &h in heights {
        counts[h as usize] += 1;
    }
    counts
}

/// Exact height counts for `1..=x`.
pub fn census(x: u64, segment_size: u64, workers: usize) -> Result<HeightCensus, CensusError> {
    census_with(x, &SweepConfig { segment_size, workers })
}

pub fn census_with(x: u64, config: &SweepConfig) -> Result<HeightCensus, CensusError> {
    config.validate()?;
    if x == 0 {
        return Err(CensusError::ZeroLimit);
    }
    let start = Instant::now();
    let primes = primes_up_to(isqrt(x));
    let ranges: Vec<(u64, u64)> = segments(1, x, config.segment_size).collect();

    let totals = config.pool()?.install(|| {
        ranges
            .par_iter()
            .map_init(Vec::new, |buf, &(lo, hi)| {
                segment_heights(lo, hi, &primes, buf);
                tally(buf)
            })
            .reduce(
                || [0u64; HEIGHT_SLOTS],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    });

    let top = totals.iter().rposition(|&c| c > 0).unwrap_or(0);
    Ok(HeightCensus { limit: x, counts: totals[..=top].to_vec(), elapsed: start.elapsed() })
}

/// Smallest `n` with `n + length - 1 <= limit` and `h(n + j) >= min_height`
/// for `j = 0..length`, or `None` if there is none.
pub fn first_run(length: u64, min_height: u32, limit: u64) -> Option<u64> {
    first_run_with(length, min_height, limit, &SweepConfig::default()).expect("default sweep configuration is valid")
}

pub fn first_run_with(
    length: u64,
    min_height: u32,
    limit: u64,
    config: &SweepConfig,
) -> Result<Option<u64>, CensusError> {
    config.validate()?;
    if length == 0 {
        return Ok((limit >= 1).then_some(1));
    }
    if limit < length {
        return Ok(None);
    }
    let primes = primes_up_to(isqrt(limit));
    let pool = config.pool()?;
    let mut ranges = segments(1, limit, config.segment_size).peekable();
    let mut run = 0u64;

    // Batches of segments are sieved in parallel and scanned in order.
    while ranges.peek().is_some() {
        let batch: Vec<(u64, u64)> = ranges.by_ref().take(config.workers).collect();
        let heights: Vec<Vec<u8>> = pool.install(|| {
            batch
                .par_iter()
                .map(|&(lo, hi)| {
                    let mut buf = Vec::new();
                    segment_heights(lo, hi, &primes, &mut buf);
                    buf
                })
                .collect()
        });
        for (&(lo, _), hs) in batch.iter().zip(&heights) {
            for (n, &h) in (lo..).zip(hs) {
                if u32::from(h) >= min_height {
                    run += 1;
                    if run >= length {
                        return Ok(Some(n + 1 - length));
                    }
                } else {
                    run = 0;
                }
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tower::height;

    fn brute_census(x: u64) -> Vec<u64> {
        let mut counts = vec![0u64; HEIGHT_SLOTS];
        for n in 1..=x {
            counts[height(n).unwrap() as usize] += 1;
        }
        let top = counts.iter().rposition(|&c| c > 0).unwrap();
        counts.truncate(top + 1);
        counts
    }

    #[test]
    fn table_examples_small() {
        let c = census(1000, 64, 1).unwrap();
        assert_eq!(c.at_least(3), 43);
        let c = census(10_000, 1000, 2).unwrap();
        assert_eq!(c.at_least(3), 440);
        assert_eq!(c.at_least(4), 0);
        let c = census(100_000, DEFAULT_SEGMENT_SIZE, 2).unwrap();
        assert_eq!(c.at_least(4), 1);
        assert_eq!(census(10, 2, 1).unwrap().at_least(3), 0);
    }

    #[test]
    fn squarefree_count_to_one_hundred() {
        let oracle = (1..=100u64).filter(|&n| crate::tower::mobius_squared(n).unwrap() == 1).count();
        assert_eq!(oracle, 61);
        // the squarefree count includes n = 1, which has height 0
        let c = census(100, 7, 3).unwrap();
        assert_eq!(c.count(0) + c.count(1), 61);
        assert_eq!(c.count(1), 60);
    }

    #[test]
    fn invariants_hold() {
        let c = census(54_321, 1000, 2).unwrap();
        assert_eq!(c.counts().iter().sum::<u64>(), 54_321);
        assert_eq!(c.count(0), 1);
        for k in 0..c.counts().len() {
            assert!(c.at_least(k) >= c.at_least(k + 1));
        }
        assert_eq!(c.at_least(0), c.limit());
    }

    #[test]
    fn matches_per_n_heights() {
        for (x, seg) in [(1, 2), (2, 2), (97, 5), (5000, 2), (20_000, 333), (20_000, 1 << 20)] {
            assert_eq!(census(x, seg, 2).unwrap().counts(), brute_census(x).as_slice(), "x = {x}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(census(10, 1, 1), Err(CensusError::SegmentTooSmall(1)));
        assert_eq!(census(0, 10, 1), Err(CensusError::ZeroLimit));
        assert_eq!(census(10, 10, 0), Err(CensusError::ZeroWorkers));
    }

    #[test]
    fn segment_heights_near_u64_max() {
        let hi = u64::MAX;
        let lo = hi - 999;
        let primes = primes_up_to(1 << 16);
        let mut buf = Vec::new();
        // only check the small-prime part: spot values with known heights
        segment_heights(lo, hi, &primes[..10], &mut buf);
        assert_eq!(buf.len(), 1000);
        // 2^64 - 1 = 3 * 5 * 17 * 257 * 641 * 65537 * 6700417 is squarefree
        assert_eq!(*buf.last().unwrap(), 1);
    }

    #[test]
    fn segments_cover_range() {
        let segs: Vec<_> = segments(1, 10, 3).collect();
        assert_eq!(segs, vec![(1, 3), (4, 6), (7, 9), (10, 10)]);
        let segs: Vec<_> = segments(u64::MAX - 4, u64::MAX, 3).collect();
        assert_eq!(segs, vec![(u64::MAX - 4, u64::MAX - 2), (u64::MAX - 1, u64::MAX)]);
    }

    fn brute_first_run(length: u64, k: u32, limit: u64) -> Option<u64> {
        (1..=limit.checked_sub(length)? + 1).find(|&n| (0..length).all(|j| height(n + j).unwrap() >= k))
    }

    #[test]
    fn first_run_examples() {
        let cfg = SweepConfig { segment_size: 1000, workers: 2 };
        assert_eq!(first_run_with(1, 1, 10, &cfg).unwrap(), Some(2));
        assert_eq!(first_run_with(2, 2, 100, &cfg).unwrap(), Some(8));
        assert_eq!(brute_first_run(2, 2, 100), Some(8));
    }

    #[test]
    fn first_run_across_segment_boundaries() {
        for seg in [2, 3, 7, 50] {
            let cfg = SweepConfig { segment_size: seg, workers: 3 };
            for (l, k, limit) in [(2, 2, 2000), (3, 2, 2000), (1, 3, 100), (2, 3, 3000), (4, 2, 2000)] {
                assert_eq!(
                    first_run_with(l, k, limit, &cfg).unwrap(),
                    brute_first_run(l, k, limit),
                    "l={l} k={k} limit={limit} seg={seg}"
                );
            }
        }
    }

    #[test]
    fn first_run_absent_and_limit_edges() {
        let cfg = SweepConfig { segment_size: 16, workers: 1 };
        assert_eq!(first_run_with(3, 3, 1000, &cfg).unwrap(), None);
        assert_eq!(first_run_with(2, 2, 8, &cfg).unwrap(), None);
        assert_eq!(first_run_with(2, 2, 9, &cfg).unwrap(), Some(8));
        assert_eq!(first_run_with(5, 1, 3, &cfg).unwrap(), None);
    }
}
