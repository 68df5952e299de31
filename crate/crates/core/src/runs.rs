//! Runs of consecutive integers of prescribed minimum height.
//!
//! A run of length `l` with `h(n0 + j) >= k` is forced by the congruences
//! `n0 + j = p_{j+1}^T (mod p_{j+1}^{T+1})` with `T = 2^(k-1)`: the exponent
//! of `p_{j+1}` in `n0 + j` is then exactly `T`, of height `k - 1`. Any
//! `n0 + r Q`, with `Q` the product of the moduli, works as well.
//!
//! Certificates record one witness prime power per position and are checked
//! independently of how they were produced.

use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{first_primes, is_prime, primes_up_to};
use crate::densities::power_tower_of_twos;
use crate::tower::height;

pub const DEFAULT_BITS_BUDGET: u64 = 1_000_000;
pub const DEFAULT_SCAN_BOUND: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("empty congruence system")]
    EmptySystem,
    #[error("modulus #{index} is {modulus}; moduli must be at least 2")]
    InvalidModulus { index: usize, modulus: BigUint },
    #[error("moduli #{first} ({first_modulus}) and #{second} ({second_modulus}) share the factor {common}")]
    NotCoprime { first: usize, second: usize, first_modulus: BigUint, second_modulus: BigUint, common: BigUint },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{}", bit_budget_message(*.required_bits, *.budget))]
    BitBudget { required_bits: Option<u64>, budget: u64 },
    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),
}

fn bit_budget_message(required: Option<u64>, budget: u64) -> String {
    match required {
        Some(bits) => format!("the moduli need {bits} bits, over the budget of {budget} bits"),
        None => format!(
            "the tower exponent 2^(k-1) does not fit in 64 bits; the moduli would need \
             more than 2^64 bits (budget {budget} bits)"
        ),
    }
}

/// `n = residue (mod modulus)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Congruence {
    pub residue: BigInt,
    pub modulus: BigUint,
}

impl Congruence {
    pub fn new(residue: impl Into<BigInt>, modulus: impl Into<BigUint>) -> Self {
        Congruence { residue: residue.into(), modulus: modulus.into() }
    }
}

fn reduce(residue: &BigInt, modulus: &BigUint) -> BigUint {
    let m = BigInt::from_biguint(Sign::Plus, modulus.clone());
    residue.mod_floor(&m).to_biguint().expect("mod_floor is nonnegative")
}

fn inverse_mod(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    let a = BigInt::from_biguint(Sign::Plus, a % m);
    let m = BigInt::from_biguint(Sign::Plus, m.clone());
    let egcd = a.extended_gcd(&m);
    egcd.gcd.is_one().then(|| egcd.x.mod_floor(&m).to_biguint().expect("nonnegative"))
}

/// Inverse of `a` modulo `p^e` by Newton lifting from the inverse mod `p`,
/// which avoids a gcd on numbers of `e log p` bits.
fn inverse_mod_prime_power(a: &BigUint, p: u64, e: u32) -> Option<BigUint> {
    let a0 = (a % p).iter_u64_digits().next().unwrap_or(0);
    if a0 == 0 {
        return None;
    }
    // a0^(p-2) mod p
    let mut x = BigUint::from(a0).modpow(&BigUint::from(p - 2), &BigUint::from(p));
    let mut precision = 1;
    while precision < e {
        precision = (2 * precision).min(e);
        let m = BigUint::from(p).pow(precision);
        let t = (a % &m) * &x % &m;
        x = x * ((&m + 2u32 - t) % &m) % &m;
    }
    Some(x)
}

/// The unique solution in `[0, prod moduli)` of a system with pairwise
/// coprime moduli. Residues may be any integers; they are reduced first.
pub fn crt_solve(congruences: &[Congruence]) -> Result<BigUint, RunError> {
    crt_combine(congruences, |a, i| inverse_mod(a, &congruences[i].modulus))
}

fn crt_combine(
    congruences: &[Congruence],
    inverse: impl Fn(&BigUint, usize) -> Option<BigUint>,
) -> Result<BigUint, RunError> {
    if congruences.is_empty() {
        return Err(RunError::EmptySystem);
    }
    let mut x = BigUint::zero();
    let mut product = BigUint::one();
    for (i, c) in congruences.iter().enumerate() {
        if c.modulus < BigUint::from(2u8) {
            return Err(RunError::InvalidModulus { index: i, modulus: c.modulus.clone() });
        }
        let Some(inv) = inverse(&(&product % &c.modulus), i) else {
            return Err(offending_pair(congruences, i));
        };
        let b = reduce(&c.residue, &c.modulus);
        let x_mod = &x % &c.modulus;
        let diff = (&b + &c.modulus - x_mod) % &c.modulus;
        let t = diff * inv % &c.modulus;
        x += &product * t;
        product *= &c.modulus;
    }
    Ok(x)
}

fn offending_pair(congruences: &[Congruence], second: usize) -> RunError {
    let m = &congruences[second].modulus;
    let (first, common) = congruences[..second]
        .iter()
        .enumerate()
        .map(|(i, c)| (i, c.modulus.gcd(m)))
        .find(|(_, g)| !g.is_one())
        .expect("a shared factor with the running product comes from one earlier modulus");
    RunError::NotCoprime {
        first,
        second,
        first_modulus: congruences[first].modulus.clone(),
        second_modulus: m.clone(),
        common,
    }
}

/// One witness: `prime^exponent` exactly divides `n0 + index`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub index: u64,
    pub prime: u64,
    pub exponent: u64,
    pub exponent_height: u32,
}

/// A run `n0, ..., n0 + length - 1` of integers of height at least
/// `min_height`, with the period `modulus`: every `p^(e+1)` of the evidence
/// divides it, so `n0 + r * modulus` carries the same evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCertificate {
    #[serde(with = "decimal")]
    pub n0: BigUint,
    pub length: u64,
    pub min_height: u32,
    #[serde(with = "decimal")]
    pub modulus: BigUint,
    pub evidence: Vec<Evidence>,
}

mod decimal {
    use num_bigint::BigUint;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(n)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(|_| D::Error::custom(format!("not a decimal integer: {s:?}")))
    }
}

impl RunCertificate {
    /// Re-checks every witness from scratch.
    pub fn check(&self) -> Result<(), RunError> {
        let fail = |msg: String| Err(RunError::InvalidCertificate(msg));
        if self.length == 0 || self.min_height == 0 {
            return fail("length and minimum height must be positive".into());
        }
        if self.n0.is_zero() {
            return fail("n0 must be positive".into());
        }
        if self.evidence.len() as u64 != self.length {
            return fail(format!("{} witnesses for a run of length {}", self.evidence.len(), self.length));
        }
        if let Some((j, ev)) = self.evidence.iter().enumerate().find(|(j, ev)| ev.index != *j as u64) {
            return fail(format!("witness #{j} has index {}", ev.index));
        }
        self.evidence.par_iter().try_for_each(|ev| self.check_witness(ev))
    }

    fn check_witness(&self, ev: &Evidence) -> Result<(), RunError> {
        let j = ev.index;
        let fail = |msg: String| Err(RunError::InvalidCertificate(format!("position {j}: {msg}")));
        if !is_prime(ev.prime) {
            return fail(format!("{} is not prime", ev.prime));
        }
        let Ok(e) = u32::try_from(ev.exponent) else {
            return fail(format!("exponent {} is too large to check", ev.exponent));
        };
        if e == 0 {
            return fail("exponent must be positive".into());
        }
        let h = height(ev.exponent).expect("exponent is positive");
        if h != ev.exponent_height {
            return fail(format!("h({}) is {h}, not {}", ev.exponent, ev.exponent_height));
        }
        if h + 1 < self.min_height {
            return fail(format!("h({}) = {h} is below {}", ev.exponent, self.min_height - 1));
        }
        let p = BigUint::from(ev.prime);
        let pe = p.pow(e);
        let (q, rem) = (&self.n0 + j).div_rem(&pe);
        if !rem.is_zero() {
            return fail(format!("{}^{} does not divide n0 + {j}", ev.prime, e));
        }
        if (&q % &p).is_zero() {
            return fail(format!("{}^{} divides n0 + {j}", ev.prime, e + 1));
        }
        if !(&self.modulus % (pe * &p)).is_zero() {
            return fail(format!("{}^{} does not divide the modulus", ev.prime, e + 1));
        }
        Ok(())
    }

    /// The certificate for `n0 + r * modulus`.
    pub fn shifted(&self, r: &BigUint) -> RunCertificate {
        RunCertificate { n0: &self.n0 + r * &self.modulus, ..self.clone() }
    }
}

impl fmt::Display for RunCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n0 = {}", self.n0)?;
        writeln!(f, "length {}, minimum height {}", self.length, self.min_height)?;
        write!(f, "period {}", self.modulus)?;
        for ev in &self.evidence {
            write!(
                f,
                "\n  n0 + {}: {}^{} exactly, h({}) = {}",
                ev.index, ev.prime, ev.exponent, ev.exponent, ev.exponent_height
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    /// Upper bound on the bit length of the product of the moduli.
    pub bits_budget: u64,
    /// Largest prime tried as a witness by [`verify_run_with`].
    pub scan_bound: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { bits_budget: DEFAULT_BITS_BUDGET, scan_bound: DEFAULT_SCAN_BOUND }
    }
}

/// Builds the `r`-th run (`r = 0` is the CRT solution below the period) of
/// `length` integers of height at least `min_height`.
pub fn construct_run(length: u64, min_height: u32, occurrence: &BigUint) -> Result<RunCertificate, RunError> {
    construct_run_with(length, min_height, occurrence, &RunConfig::default())
}

pub fn construct_run_with(
    length: u64,
    min_height: u32,
    occurrence: &BigUint,
    config: &RunConfig,
) -> Result<RunCertificate, RunError> {
    if length == 0 {
        return Err(RunError::InvalidArgument("run length must be positive".into()));
    }
    if min_height < 2 {
        return Err(RunError::InvalidArgument("minimum height must be at least 2".into()));
    }
    let budget = config.bits_budget;
    let Some(t) = power_tower_of_twos(min_height - 1) else {
        return Err(RunError::BitBudget { required_bits: None, budget });
    };
    let count = usize::try_from(length).map_err(|_| RunError::BitBudget { required_bits: None, budget })?;
    // every modulus has at least T + 1 bits, so this bounds the prime count
    if (t + 1).saturating_mul(length) > budget {
        return Err(RunError::BitBudget { required_bits: Some((t + 1).saturating_mul(length)), budget });
    }
    let primes = first_primes(count);
    let required: f64 = primes.iter().map(|&p| (t + 1) as f64 * (p as f64).log2()).sum();
    let required = required.ceil() as u64;
    if required > budget {
        return Err(RunError::BitBudget { required_bits: Some(required), budget });
    }

    let t32 = u32::try_from(t).expect("T is at most 2^16 within any u64 budget");
    let congruences: Vec<Congruence> = primes
        .par_iter()
        .enumerate()
        .map(|(j, &p)| {
            let pt = BigUint::from(p).pow(t32);
            let modulus = &pt * p;
            Congruence::new(BigInt::from(pt) - j, modulus)
        })
        .collect();
    let base = crt_combine(&congruences, |a, j| inverse_mod_prime_power(a, primes[j], t32 + 1))?;
    let modulus: BigUint = congruences.iter().map(|c| &c.modulus).product();
    let exponent_height = min_height - 1;
    let evidence = primes
        .iter()
        .enumerate()
        .map(|(j, &p)| Evidence { index: j as u64, prime: p, exponent: t, exponent_height })
        .collect();
    let mut n0 = base + occurrence * &modulus;
    if n0.is_zero() {
        // only possible for a single congruence with residue 0, which never occurs
        n0 = modulus.clone();
    }
    Ok(RunCertificate { n0, length, min_height, modulus, evidence })
}

/// Outcome of a witness search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunVerification {
    Verified(RunCertificate),
    /// No prime up to `scan_bound` certifies position `index`. The integer
    /// there may still have the required height.
    Unverified {
        index: u64,
        scan_bound: u64,
    },
}

impl RunVerification {
    pub fn is_verified(&self) -> bool {
        matches!(self, RunVerification::Verified(_))
    }
}

/// Exact exponent of `p` in `n > 0`, by repeated squaring of `p`.
pub fn valuation(n: &BigUint, p: u64) -> u64 {
    debug_assert!(p >= 2 && !n.is_zero());
    if p == 2 {
        return n.trailing_zeros().unwrap_or(0);
    }
    if (n % p).is_zero() {
        // powers[i] = p^(2^i) while it divides n
        let mut powers = vec![BigUint::from(p)];
        loop {
            let next = powers.last().unwrap() * powers.last().unwrap();
            if next.bits() > n.bits() || !(n % &next).is_zero() {
                break;
            }
            powers.push(next);
        }
        let mut rest = n.clone();
        let mut e = 0u64;
        for (i, pw) in powers.iter().enumerate().rev() {
            let (q, r) = rest.div_rem(pw);
            if r.is_zero() {
                rest = q;
                e += 1 << i;
            }
        }
        e
    } else {
        0
    }
}

/// Searches witnesses for `h(n0 + j) >= min_height`, `0 <= j < length`,
/// among primes up to the default scan bound.
pub fn verify_run(n0: &BigUint, length: u64, min_height: u32) -> Result<RunVerification, RunError> {
    verify_run_with(n0, length, min_height, &RunConfig::default())
}

pub fn verify_run_with(
    n0: &BigUint,
    length: u64,
    min_height: u32,
    config: &RunConfig,
) -> Result<RunVerification, RunError> {
    if *n0 < BigUint::from(2u8) {
        return Err(RunError::InvalidArgument("n0 must be at least 2".into()));
    }
    if length == 0 || min_height == 0 {
        return Err(RunError::InvalidArgument("length and minimum height must be positive".into()));
    }
    let primes = primes_up_to(config.scan_bound);
    let witnesses: Vec<Option<Evidence>> = (0..length)
        .into_par_iter()
        .map(|j| {
            let n = n0 + j;
            primes.iter().find_map(|&p| {
                let e = valuation(&n, p);
                let h = if e == 0 { 0 } else { height(e).expect("positive") };
                (e > 0 && h + 1 >= min_height).then_some(Evidence {
                    index: j,
                    prime: p,
                    exponent: e,
                    exponent_height: h,
                })
            })
        })
        .collect();
    if let Some(index) = witnesses.iter().position(Option::is_none) {
        return Ok(RunVerification::Unverified { index: index as u64, scan_bound: config.scan_bound });
    }
    let evidence: Vec<Evidence> = witnesses.into_iter().map(Option::unwrap).collect();
    let modulus = evidence
        .iter()
        .map(|ev| {
            let e = u32::try_from(ev.exponent + 1).expect("exponent bounded by the bit length");
            BigUint::from(ev.prime).pow(e)
        })
        .fold(BigUint::one(), |acc, m| acc.lcm(&m));
    Ok(RunVerification::Verified(RunCertificate { n0: n0.clone(), length, min_height, modulus, evidence }))
}

/// Decimal digits of a possibly huge integer, abbreviated past `max_digits`.
pub fn abbreviate(n: &BigUint, max_digits: usize) -> String {
    let s = n.to_string();
    if s.len() <= max_digits {
        return s;
    }
    let keep = max_digits / 2;
    format!("{}...{} ({} digits)", &s[..keep], &s[s.len() - keep..], s.len())
}

/// Approximate bit length needed by [`construct_run`], or `None` when the
/// tower exponent does not fit in 64 bits.
pub fn required_bits(length: u64, min_height: u32) -> Option<f64> {
    let t = power_tower_of_twos(min_height.checked_sub(1)?)?;
    let count = usize::try_from(length).ok()?;
    Some(first_primes(count).iter().map(|&p| (t + 1) as f64 * (p as f64).log2()).sum())
}
