//! Certified values of the densities `c_k`, `d_k` and of the average height.
//!
//! `c_k` is the Euler product `prod_p f_k(p)` with
//!
//! ```text
//! f_k(p) = (1 - 1/p) (1 + sum_{r>=1} lambda_{k-1}(r) p^-r)
//!        = 1 - (1 - 1/p) sum_{r in Z_k} p^-r,     Z_k = { r : h(r) >= k }.
//! ```
//!
//! With `m = min Z_k` (the power tower of `k` twos) and `m'` the first
//! integer above `m` outside `Z_k`, every factor satisfies
//! `0 <= f_k(p) - (1 - p^-m) <= p^-m'`. Primes up to a cutoff `P` are
//! multiplied out in double-double arithmetic; for `p > P` the product of
//! `1 - p^-m` is `1 / (zeta(m) prod_{p<=P} (1 - p^-m))` when that tail is
//! not negligible, and the remaining factors are bounded through the integral
//! `sum_{n>P} n^-a <= P^{1-a} / (a-1)`. Every truncation and every rounding
//! step is charged to the reported bound.

pub mod dd;
mod zeta;

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::arith::{is_prime, primes_up_to};
use crate::tower::lambda;
use dd::{up, Dd, OP_REL_ERROR};

/// Smallest target precision accepted; estimates are reported as `f64`.
pub const WORKING_FLOOR: f64 = 1e-15;
pub const DEFAULT_PRIME_CUTOFF: u64 = 100_000;
pub const DEFAULT_SERIES_CUTOFF: u32 = 128;
pub const DEFAULT_HEIGHT_CUTOFF: u32 = 4;
pub const DEFAULT_PRIME_SUM_CUTOFF: u64 = 1_000_000;

const MAX_PRIME_CUTOFF: u64 = 1 << 24;
const MAX_SERIES_CUTOFF: u32 = 4096;
const PRODUCT_BLOCK: usize = 4096;
// Series terms below 2^-130 are not summed; they are charged as truncation.
const NEGLIGIBLE_LOG2: f64 = 130.0;
// Tails of prod (1 - p^-m) below this are bounded rather than computed.
const ZETA_TAIL_THRESHOLD: f64 = 1e-40;
const ZETA_MAX_EXPONENT: u64 = 64;
// Upper bound used in place of quantities that underflow f64.
const TINY: f64 = 1e-299;
// Reported error bounds are rounded up to a multiple of this.
const REPORT_GRID: f64 = 2.168404344971009e-19; // 2^-62

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DensityError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error(
        "target precision {target:e} is unreachable: best certified bound {best:e} \
         (working floor {floor:e}, prime cutoff {prime_cutoff}, series cutoff {series_cutoff})"
    )]
    Unreachable { target: f64, best: f64, floor: f64, prime_cutoff: u64, series_cutoff: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMethod {
    /// Single Euler factor; only the series is truncated.
    SeriesTruncation,
    /// Omitted primes bounded through the integral of `n^-m`.
    GeometricBound,
    /// Omitted primes handled exactly through `zeta(m)`, remainder bounded.
    ZetaAccelerated,
    /// Omitted heights bounded by `d_k < 4 / 2^(k)`.
    Lemma,
}

/// Truncation parameters behind a certified value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Provenance {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prime_cutoff: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series_cutoff: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height_cutoff: Option<u32>,
    pub tail: TailMethod,
}

/// A value with a rigorous absolute error bound: the true value lies in
/// `[estimate - error_bound, estimate + error_bound]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifiedValue {
    pub estimate: f64,
    pub error_bound: f64,
    pub provenance: Provenance,
    #[serde(skip)]
    precise: Dd,
    #[serde(skip)]
    precise_error: f64,
}

impl CertifiedValue {
    fn from_dd(value: Dd, error: f64, provenance: Provenance) -> Self {
        let estimate = value.hi();
        let half_ulp = if estimate == 0.0 { 0.0 } else { 2f64.powi(estimate.abs().log2().floor() as i32 - 53) };
        let total = up(error + half_ulp);
        let error_bound = (total / REPORT_GRID).ceil() * REPORT_GRID;
        CertifiedValue { estimate, error_bound, provenance, precise: value, precise_error: error }
    }

    pub fn lower(&self) -> f64 {
        self.estimate - self.error_bound
    }

    pub fn upper(&self) -> f64 {
        self.estimate + self.error_bound
    }

    /// Whether `x` lies in the certified interval.
    pub fn contains(&self, x: f64) -> bool {
        self.lower() <= x && x <= self.upper()
    }

    /// The double-double value before rounding to `f64`, and its bound.
    pub fn precise(&self) -> (Dd, f64) {
        (self.precise, self.precise_error)
    }
}

impl fmt::Display for CertifiedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.12} ± {:.1e}", self.estimate, self.error_bound)
    }
}

/// The power tower `2^(k)` of `k` twos (`2^(0) = 1`), the smallest integer of
/// height `k`. `None` once it exceeds `u64`.
pub fn power_tower_of_twos(k: u32) -> Option<u64> {
    (0..k).try_fold(1u64, |acc, _| u32::try_from(acc).ok().and_then(|e| 2u64.checked_pow(e)))
}

/// Upper bound on `p^-e` that stays valid when the true value underflows.
fn pow_neg_upper(p: f64, e: f64) -> f64 {
    let l = e * p.ln();
    if l > 690.0 {
        TINY
    } else {
        up((-l).exp() * (1.0 + 1e-13))
    }
}

/// Upper bound on `sum_{n > cutoff} n^-a` for `a > 1`.
fn integer_tail_upper(cutoff: u64, a: f64) -> f64 {
    debug_assert!(a > 1.0);
    up(pow_neg_upper(cutoff as f64, a - 1.0) / (a - 1.0))
}

/// Deviation structure of the Euler factor `f_k(p)` from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EulerFactorSpec {
    pub k: u32,
    /// `m_k`, the smallest `r` with `lambda_{k-1}(r) = 0`. `None` when it
    /// exceeds `u64` (from `k = 5` on).
    pub first_deviation: Option<u64>,
    /// Smallest `r > m_k` with `lambda_{k-1}(r) = 1`; `None` for `k = 1`,
    /// where every `r >= 2` deviates, and when `m_k` is out of range.
    pub next_regular: Option<u64>,
}

impl EulerFactorSpec {
    pub fn new(k: u32) -> Result<Self, DensityError> {
        if k == 0 {
            return Err(DensityError::InvalidArgument("k must be at least 1".into()));
        }
        let first_deviation = power_tower_of_twos(k);
        let next_regular = match first_deviation {
            Some(m) if k >= 2 => {
                let mut r = m + 1;
                while deviates(k, r) {
                    r += 1;
                }
                Some(r)
            }
            _ => None,
        };
        Ok(EulerFactorSpec { k, first_deviation, next_regular })
    }

    /// Upper bound on `|f_k(p) - 1|`, which is at most `p^-m_k`.
    pub fn deviation_bound(&self, p: u64) -> f64 {
        match self.first_deviation {
            Some(m) => pow_neg_upper(p as f64, m as f64),
            None => TINY,
        }
    }
}

/// Whether `r` lies in `Z_k`, i.e. `lambda_{k-1}(r) = 0`.
fn deviates(k: u32, r: u64) -> bool {
    lambda(k - 1, r).expect("r >= 1") == 0
}

/// Per-prime evaluation of `f_k(p)`: `f` lies in
/// `[value - truncation - rounding, value + rounding]`.
#[derive(Debug, Clone, Copy)]
struct FactorEval {
    value: Dd,
    rounding: f64,
    truncation: f64,
}

fn eval_factor(p: u64, deviating: &[bool], spec: &EulerFactorSpec) -> FactorEval {
    let series_cutoff = deviating.len() as u64 - 1;
    let log2p = (p as f64).log2();
    let effective = series_cutoff.min((NEGLIGIBLE_LOG2 / log2p).floor() as u64);

    let x = Dd::from_u64(p).recip();
    let mut power = Dd::ONE;
    let mut sum = Dd::ZERO;
    let mut any = false;
    for r in 1..=effective {
        power = power * x;
        if deviating[r as usize] {
            sum = sum + power;
            any = true;
        }
    }

    // dropped part (1 - x) sum_{r in Z, r > effective} x^r lies in [0, x^start]
    let truncation = match spec.first_deviation {
        Some(m) => pow_neg_upper(p as f64, (effective + 1).max(m) as f64),
        None => TINY,
    };

    if !any {
        return FactorEval { value: Dd::ONE, rounding: 0.0, truncation };
    }
    let t = (Dd::ONE - x) * sum;
    let value = Dd::ONE - t;
    // sum: (2 * effective + 2) ops relative; 1 - x, product, difference: 3 more
    let rounding = up(((2 * effective + 5) as f64 * t.hi() + 1.0) * OP_REL_ERROR * 1.01);
    FactorEval { value, rounding, truncation }
}

fn deviation_table(k: u32, series_cutoff: u32) -> Vec<bool> {
    (0..=u64::from(series_cutoff)).map(|r| r >= 1 && deviates(k, r)).collect()
}

/// One Euler factor `f_k(p)` truncated after `series_cutoff` terms.
pub fn euler_factor(k: u32, p: u64, series_cutoff: u32) -> Result<CertifiedValue, DensityError> {
    let spec = EulerFactorSpec::new(k)?;
    if !is_prime(p) {
        return Err(DensityError::NotPrime(p));
    }
    if series_cutoff < 2 {
        return Err(DensityError::InvalidArgument("series cutoff must be at least 2".into()));
    }
    let eval = eval_factor(p, &deviation_table(k, series_cutoff), &spec);
    let provenance = Provenance {
        prime_cutoff: Some(p),
        series_cutoff: Some(series_cutoff),
        height_cutoff: None,
        tail: TailMethod::SeriesTruncation,
    };
    Ok(CertifiedValue::from_dd(eval.value, up(eval.rounding + eval.truncation), provenance))
}

/// Truncation and search limits for the Euler products.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DensityConfig {
    pub prime_cutoff: u64,
    pub series_cutoff: u32,
    pub max_prime_cutoff: u64,
    pub max_series_cutoff: u32,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            prime_cutoff: DEFAULT_PRIME_CUTOFF,
            series_cutoff: DEFAULT_SERIES_CUTOFF,
            max_prime_cutoff: MAX_PRIME_CUTOFF,
            max_series_cutoff: MAX_SERIES_CUTOFF,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Block {
    product: Dd,
    aux: Dd,
    log_error: f64,
}

/// `c_k` at fixed cutoffs, without the adaptive loop.
pub fn density_c_fixed(k: u32, prime_cutoff: u64, series_cutoff: u32) -> Result<CertifiedValue, DensityError> {
    let spec = EulerFactorSpec::new(k)?;
    if prime_cutoff < 100 {
        return Err(DensityError::InvalidArgument("prime cutoff must be at least 100".into()));
    }
    if series_cutoff < 2 {
        return Err(DensityError::InvalidArgument("series cutoff must be at least 2".into()));
    }
    let deviating = deviation_table(k, series_cutoff);
    let primes = primes_up_to(prime_cutoff);

    let plain_tail = spec.first_deviation.map(|m| integer_tail_upper(prime_cutoff, m as f64));
    let zeta_exponent = match (spec.first_deviation, plain_tail) {
        (Some(m), Some(tail)) if tail > ZETA_TAIL_THRESHOLD && m <= ZETA_MAX_EXPONENT => Some(m),
        _ => None,
    };

    let blocks: Vec<Block> = primes
        .par_chunks(PRODUCT_BLOCK)
        .map(|chunk| {
            let mut block = Block { product: Dd::ONE, aux: Dd::ONE, log_error: 0.0 };
            for &p in chunk {
                let f = eval_factor(p, &deviating, &spec);
                block.product = block.product * f.value;
                // f_k(p) >= 3/4, so |log f - log f~| <= 2 |f - f~|
                block.log_error += 2.0 * (f.rounding + f.truncation) + OP_REL_ERROR;
                if let Some(m) = zeta_exponent {
                    let xm = Dd::from_u64(p).recip().powu(m);
                    block.aux = block.aux * (Dd::ONE - xm);
                    let ops = (Dd::powu_ops(m) + 2) as f64;
                    block.log_error += 2.0 * (ops * xm.hi() + 1.0) * OP_REL_ERROR + OP_REL_ERROR;
                }
            }
            block.log_error = up(block.log_error * 1.01);
            block
        })
        .collect();

    let mut head = Dd::ONE;
    let mut aux = Dd::ONE;
    let mut log_error = 0.0;
    for b in &blocks {
        head = head * b.product;
        aux = aux * b.aux;
        log_error += b.log_error + 2.0 * OP_REL_ERROR;
    }

    let cutoff_power = |m: u64| pow_neg_upper(prime_cutoff as f64, m as f64);
    let mut value = head;
    let tail = match (spec.first_deviation, zeta_exponent) {
        (Some(_), Some(m)) => {
            // prod_{p > P} (1 - p^-m) = 1 / (zeta(m) prod_{p <= P} (1 - p^-m))
            let (z, z_err) = zeta::zeta(m);
            value = value / (z * aux);
            log_error += 2.0 * z_err / z.hi() + 3.0 * OP_REL_ERROR;
            TailMethod::ZetaAccelerated
        }
        (Some(m), None) => {
            // -log prod_{p > P} (1 - p^-m) <= S_m / (1 - P^-m)
            log_error += plain_tail.unwrap_or(TINY) / (1.0 - cutoff_power(m));
            TailMethod::GeometricBound
        }
        (None, _) => {
            log_error += TINY;
            TailMethod::GeometricBound
        }
    };
    // remaining factors g(p) = f(p) / (1 - p^-m) lie in [1, 1 + p^-m' / (1 - p^-m)]
    if let (Some(m), Some(m_next)) = (spec.first_deviation, spec.next_regular) {
        log_error += integer_tail_upper(prime_cutoff, m_next as f64) / (1.0 - cutoff_power(m));
    }

    let log_error = up(log_error * 1.01);
    let abs_error = up(value.hi().abs() * log_error.exp_m1() * 1.01);
    let provenance =
        Provenance { prime_cutoff: Some(prime_cutoff), series_cutoff: Some(series_cutoff), height_cutoff: None, tail };
    Ok(CertifiedValue::from_dd(value, abs_error, provenance))
}

fn check_target(target: f64, config: &DensityConfig) -> Result<(), DensityError> {
    if !(target.is_finite() && target > 0.0) {
        return Err(DensityError::InvalidArgument(format!("target precision must be positive, got {target}")));
    }
    if target < WORKING_FLOOR {
        return Err(DensityError::Unreachable {
            target,
            best: WORKING_FLOOR,
            floor: WORKING_FLOOR,
            prime_cutoff: config.prime_cutoff,
            series_cutoff: config.series_cutoff,
        });
    }
    Ok(())
}

/// Doubles both cutoffs until `accept` holds or the limits are reached.
fn certify_c(
    k: u32,
    target: f64,
    config: &DensityConfig,
    accept: impl Fn(&CertifiedValue) -> bool,
) -> Result<CertifiedValue, DensityError> {
    let mut prime_cutoff = config.prime_cutoff;
    let mut series_cutoff = config.series_cutoff;
    loop {
        let value = density_c_fixed(k, prime_cutoff, series_cutoff)?;
        if accept(&value) {
            return Ok(value);
        }
        if prime_cutoff >= config.max_prime_cutoff && series_cutoff >= config.max_series_cutoff {
            return Err(DensityError::Unreachable {
                target,
                best: value.error_bound,
                floor: WORKING_FLOOR,
                prime_cutoff,
                series_cutoff,
            });
        }
        prime_cutoff = (prime_cutoff * 2).min(config.max_prime_cutoff.max(prime_cutoff));
        series_cutoff = (series_cutoff * 2).min(config.max_series_cutoff.max(series_cutoff));
    }
}

/// `c_k`, the density of `{n : h(n) <= k}`, to within `target`.
pub fn density_c(k: u32, target: f64) -> Result<CertifiedValue, DensityError> {
    density_c_with(k, target, &DensityConfig::default())
}

pub fn density_c_with(k: u32, target: f64, config: &DensityConfig) -> Result<CertifiedValue, DensityError> {
    check_target(target, config)?;
    certify_c(k, target, config, |v| v.error_bound <= target)
}

/// `d_k = c_k - c_{k-1}` (`d_1 = c_1`), the density of `{n : h(n) = k}`.
pub fn density_d(k: u32, target: f64) -> Result<CertifiedValue, DensityError> {
    density_d_with(k, target, &DensityConfig::default())
}

pub fn density_d_with(k: u32, target: f64, config: &DensityConfig) -> Result<CertifiedValue, DensityError> {
    check_target(target, config)?;
    if k == 0 {
        return Err(DensityError::InvalidArgument("k must be at least 1".into()));
    }
    if k == 1 {
        return density_c_with(1, target, config);
    }
    let share = target / 4.0;
    let upper = certify_c(k, share, config, |v| v.precise_error <= share)?;
    let lower = certify_c(k - 1, share, config, |v| v.precise_error <= share)?;
    let value = upper.precise - lower.precise;
    let error = up(upper.precise_error + lower.precise_error + 2.0 * OP_REL_ERROR);
    let result = CertifiedValue::from_dd(value, error, upper.provenance);
    if result.error_bound > target {
        return Err(DensityError::Unreachable {
            target,
            best: result.error_bound,
            floor: WORKING_FLOOR,
            prime_cutoff: upper.provenance.prime_cutoff.unwrap_or(0),
            series_cutoff: upper.provenance.series_cutoff.unwrap_or(0),
        });
    }
    Ok(result)
}

/// Upper bound `4 / 2^(k)` on `d_k`, `k >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaBound {
    pub k: u32,
    pub value: f64,
    /// Set when `4 / 2^(k)` is below the smallest positive `f64` and
    /// `value` is reported as 0.
    pub underflow: bool,
}

pub fn lemma1_bound(k: u32) -> Result<LemmaBound, DensityError> {
    if k < 2 {
        return Err(DensityError::InvalidArgument("the bound on d_k needs k >= 2".into()));
    }
    // 2^(k) = 2^(2^(k-1)), so the bound is 2^(2 - 2^(k-1))
    let exponent = power_tower_of_twos(k - 1).filter(|&e| e < 1100);
    let value = exponent.map_or(0.0, |e| 2f64.powi(2 - e as i32));
    Ok(LemmaBound { k, value, underflow: value == 0.0 })
}

/// Upper bound on `sum_{k > K} k d_k` from `d_k < 4 / 2^(k)`.
fn lemma_tail(height_cutoff: u32) -> f64 {
    // from k = 5 on, 2^(k) >= 2^65536 and the whole remainder is below TINY
    let finite: f64 =
        (height_cutoff.max(1) + 1..=4).map(|k| f64::from(k) * lemma1_bound(k).expect("k >= 2").value).sum();
    up(finite + TINY)
}

/// `sum_p p^-a` over primes up to a cutoff plus an integral tail, next to
/// the bound `2 / 2^a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrimeSumBound {
    pub exponent: u32,
    pub estimate: f64,
    pub error_bound: f64,
    pub lemma_bound: f64,
    pub prime_cutoff: u64,
}

impl PrimeSumBound {
    pub fn upper(&self) -> f64 {
        self.estimate + self.error_bound
    }

    /// Whether the whole certified interval lies below `2 / 2^a`.
    pub fn certified_below_lemma(&self) -> bool {
        self.upper() < self.lemma_bound
    }
}

pub fn prime_power_sum_bound(a: u32) -> Result<PrimeSumBound, DensityError> {
    prime_power_sum_bound_with(a, DEFAULT_PRIME_SUM_CUTOFF)
}

pub fn prime_power_sum_bound_with(a: u32, prime_cutoff: u64) -> Result<PrimeSumBound, DensityError> {
    if a < 2 {
        return Err(DensityError::InvalidArgument("exponent must be at least 2".into()));
    }
    if prime_cutoff < 2 {
        return Err(DensityError::InvalidArgument("prime cutoff must be at least 2".into()));
    }
    let mut sum = Dd::ZERO;
    let mut ops = 0u64;
    // smallest terms first
    for &p in primes_up_to(prime_cutoff).iter().rev() {
        if (p as f64).log2() * f64::from(a) > NEGLIGIBLE_LOG2 + 20.0 {
            continue;
        }
        sum = sum + Dd::from_u64(p).powu(a.into()).recip();
        ops += Dd::powu_ops(a.into()) + 2;
    }
    // skipped terms are each below 2^-150 and at most one per integer
    let skipped = 1e-45 * prime_cutoff as f64;
    let tail = integer_tail_upper(prime_cutoff, f64::from(a));
    let rounding = ops as f64 * OP_REL_ERROR * sum.hi();
    let value = sum + Dd::from_f64(tail / 2.0);
    let error = up(tail / 2.0 + skipped + rounding * 1.01);
    let cv = CertifiedValue::from_dd(
        value,
        error,
        Provenance {
            prime_cutoff: Some(prime_cutoff),
            series_cutoff: None,
            height_cutoff: None,
            tail: TailMethod::GeometricBound,
        },
    );
    Ok(PrimeSumBound {
        exponent: a,
        estimate: cv.estimate,
        error_bound: cv.error_bound,
        lemma_bound: 2f64.powi(1 - a as i32),
        prime_cutoff,
    })
}

/// The average height `sum_k k d_k`, summed to `DEFAULT_HEIGHT_CUTOFF` with
/// the remainder bounded by `d_k < 4 / 2^(k)`.
pub fn average_height(target: f64) -> Result<CertifiedValue, DensityError> {
    average_height_with(target, DEFAULT_HEIGHT_CUTOFF, &DensityConfig::default())
}

pub fn average_height_with(
    target: f64,
    height_cutoff: u32,
    config: &DensityConfig,
) -> Result<CertifiedValue, DensityError> {
    check_target(target, config)?;
    if height_cutoff == 0 {
        return Err(DensityError::InvalidArgument("height cutoff must be at least 1".into()));
    }
    let kk = height_cutoff;
    let share = target / (4.0 * f64::from(kk));
    let cs: Vec<CertifiedValue> =
        (1..=kk).map(|k| certify_c(k, share, config, |v| v.precise_error <= share)).collect::<Result<_, _>>()?;

    // sum_{k<=K} k (c_k - c_{k-1}) = K c_K - sum_{k<K} c_k
    let last = cs.last().expect("K >= 1");
    let mut value = last.precise * f64::from(kk);
    let mut error = f64::from(kk) * last.precise_error;
    for c in &cs[..cs.len() - 1] {
        value = value - c.precise;
        error += c.precise_error;
    }
    error += 2.0 * f64::from(kk) * f64::from(kk) * OP_REL_ERROR;

    let tail = lemma_tail(kk);
    let value = value + Dd::from_f64(tail / 2.0);
    let error = up(error + tail / 2.0);
    let provenance = Provenance { height_cutoff: Some(kk), tail: TailMethod::Lemma, ..last.provenance };
    let result = CertifiedValue::from_dd(value, error, provenance);
    if result.error_bound > target {
        return Err(DensityError::Unreachable {
            target,
            best: result.error_bound,
            floor: WORKING_FLOOR,
            prime_cutoff: provenance.prime_cutoff.unwrap_or(0),
            series_cutoff: provenance.series_cutoff.unwrap_or(0),
        });
    }
    Ok(result)
}
