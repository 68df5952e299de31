//! Tower factorizations and heights of integers.
//!
//! - [`arith`]: deterministic 64-bit primality and canonical factorization.
//! - [`tower`]: tower factorizations, the height `h(n)`, the indicators
//!   `lambda_k` and the tower expression grammar.
//! - [`census`]: segmented-sieve height counts and first runs of tall
//!   consecutive integers.
//! - [`densities`]: certified Euler-product values of the densities `c_k`,
//!   `d_k` and the average height.
//! - [`runs`]: CRT construction and verification of runs of consecutive
//!   integers with a prescribed minimum height.

pub mod arith;
pub mod census;
pub mod densities;
pub mod runs;
pub mod tower;

pub use arith::{factorize, is_prime, ArithError, Factorization};
pub use census::{census, first_run, CensusError, HeightCensus, SweepConfig};
pub use densities::{
    average_height, density_c, density_d, euler_factor, lemma1_bound, prime_power_sum_bound, CertifiedValue,
    DensityError, EulerFactorSpec,
};
pub use runs::{
    construct_run, crt_solve, verify_run, Congruence, Evidence, RunCertificate, RunConfig, RunError, RunVerification,
};
pub use tower::{height, lambda, mobius_squared, parse_tower, render_tower, tower_of, Tower, TowerNode};
