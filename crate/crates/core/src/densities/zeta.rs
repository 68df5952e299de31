//! Certified `zeta(s)` at integers `s >= 2` by Euler-Maclaurin summation.
//!
//! `zeta(s) = sum_{n<N} n^-s + N^{1-s}/(s-1) + N^-s/2
//!          + sum_{j=1}^{M} B_{2j}/(2j)! * s(s+1)...(s+2j-2) * N^{-s-2j+1} + R`
//!
//! and for real `s > -(2M+1)` the remainder is bounded by the first omitted
//! correction term.

use super::dd::{up, Dd, OP_REL_ERROR};

const N: u64 = 64;

/// `B_2, B_4, ..., B_22` as (numerator, denominator).
const BERNOULLI: [(i64, u64); 11] = [
    (1, 6),
    (-1, 30),
    (1, 42),
    (-1, 30),
    (5, 66),
    (-691, 2730),
    (7, 6),
    (-3617, 510),
    (43867, 798),
    (-174611, 330),
    (854513, 138),
];

/// `zeta(s)` and an absolute error bound.
pub fn zeta(s: u64) -> (Dd, f64) {
    assert!(s >= 2, "zeta is evaluated only at integers s >= 2");
    let mut ops = 0u64;

    let mut sum = Dd::ZERO;
    for n in (1..N).rev() {
        sum = sum + Dd::from_u64(n).powu(s).recip();
        ops += Dd::powu_ops(s) + 2;
    }

    let n = Dd::from_u64(N);
    let n_pow = n.powu(s); // N^s
    let inv_n_pow = n_pow.recip();
    ops += Dd::powu_ops(s) + 1;

    // N^{1-s}/(s-1) + N^{-s}/2
    sum = sum + (n * inv_n_pow) / Dd::from_u64(s - 1) + inv_n_pow * 0.5;
    ops += 5;

    // Corrections: term_j = B_2j / (2j)! * rising(s, 2j-1) * N^{-s-2j+1}.
    // `scale` carries rising(s, 2j-1) / (2j)! * N^{-s-2j+1}.
    let inv_n = n.recip();
    let mut scale = Dd::from_u64(s) * inv_n_pow * inv_n * 0.5; // j = 1: s / 2! * N^{-s-1}
    ops += 4;
    let (last, corrections) = BERNOULLI.split_last().expect("table is nonempty");
    for (j, &(num, den)) in corrections.iter().enumerate() {
        let j = j as u64 + 1;
        let b = Dd::from_f64(num as f64) / Dd::from_u64(den);
        sum = sum + b * scale;
        ops += 3;
        // advance to j + 1: multiply by (s+2j-1)(s+2j) / ((2j+1)(2j+2)) / N^2
        let num = Dd::from_u64((s + 2 * j - 1) * (s + 2 * j));
        let den = Dd::from_u64((2 * j + 1) * (2 * j + 2));
        scale = scale * num / den * inv_n * inv_n;
        ops += 4;
    }
    let remainder = (last.0 as f64 / last.1 as f64).abs() * scale.to_f64().abs();

    // All terms are bounded by 2 * zeta(s) in magnitude.
    let rounding = 2.0 * ops as f64 * OP_REL_ERROR * sum.hi().abs();
    (sum, up(up(remainder * 1.01) + up(rounding * 1.01)))
}
