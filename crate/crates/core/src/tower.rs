//! Tower factorizations, the height function and the indicators `lambda_k`.
//!
//! The tower factorization expands every exponent `a > 1` of the canonical
//! factorization into its own canonical factorization, recursively. The
//! height `h(n)` counts the floors: `h(1) = 0` and otherwise
//! `h(n) = 1 + max h(a_i)` over exponents `a_i >= 2` (0 when all exponents
//! are 1).
//!
//! Towers have a textual form that round-trips through [`render_tower`] and
//! [`parse_tower`]:
//!
//! ```text
//! tower    := "1" | factor (" * " factor)*
//! factor   := prime | prime "^" exponent
//! exponent := prime | "(" tower ")"
//! ```

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::arith::{factorize, is_prime, ArithError, Factorization};

/// Largest exponent that can occur in the factorization of a `u64`.
pub const MAX_U64_EXPONENT: u32 = 63;

const SMALL_HEIGHT_LEN: usize = 65;

static SMALL_HEIGHTS: [u8; SMALL_HEIGHT_LEN] = build_small_heights();

const fn build_small_heights() -> [u8; SMALL_HEIGHT_LEN] {
    let mut h = [0u8; SMALL_HEIGHT_LEN];
    let mut n = 2;
    while n < SMALL_HEIGHT_LEN {
        let mut m = n;
        let mut p = 2;
        let mut best = 0;
        while m > 1 {
            if m % p == 0 {
                let mut a = 0;
                while m % p == 0 {
                    m /= p;
                    a += 1;
                }
                // a < n, so h[a] is already final
                if a >= 2 && h[a] > best {
                    best = h[a];
                }
            }
            p += 1;
        }
        h[n] = best + 1;
        n += 1;
    }
    h
}

/// Height of a small exponent (`e <= 64`), read from a table built at
/// compile time. Any exponent of a `u64` qualifies.
#[inline]
pub fn small_height(e: u32) -> u8 {
    SMALL_HEIGHTS[e as usize]
}

/// Height of an integer already in factored form.
pub fn height_of(f: &Factorization) -> u32 {
    f.exponents()
        .filter(|&a| a >= 2)
        .map(|a| u32::from(small_height(a)))
        .max()
        .map_or(if f.is_one() { 0 } else { 1 }, |m| m + 1)
}

/// The height `h(n)`; `h(1) = 0`.
pub fn height(n: u64) -> Result<u32, ArithError> {
    factorize(n).map(|f| height_of(&f))
}

/// `lambda_k(n)`: 1 if `h(n) <= k`, else 0. With `k = 0` this is the
/// indicator of `n = 1`.
pub fn lambda(k: u32, n: u64) -> Result<u8, ArithError> {
    Ok(u8::from(height(n)? <= k))
}

/// `lambda_k(n)` through the product recursion `lambda_k(n) = prod
/// lambda_{k-1}(a_i)` over the exponents of `n`, bottoming out at
/// `lambda_0(m) = [m = 1]`. Does not touch the height table.
pub fn lambda_recursive(k: u32, n: u64) -> Result<u8, ArithError> {
    if n == 0 {
        return Err(ArithError::Zero);
    }
    if k == 0 {
        return Ok(u8::from(n == 1));
    }
    let f = factorize(n)?;
    for a in f.exponents() {
        if lambda_recursive(k - 1, u64::from(a))? == 0 {
            return Ok(0);
        }
    }
    Ok(1)
}

/// `mu(n)^2`, the squarefree indicator.
pub fn mobius_squared(n: u64) -> Result<u8, ArithError> {
    let squarefree = factorize(n)?.exponents().all(|a| a == 1);
    Ok(u8::from(squarefree))
}

/// One prime of a tower together with the tower of its exponent. An empty
/// exponent tower stands for exponent 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct TowerNode {
    base: u64,
    exponent: Vec<TowerNode>,
}

impl TowerNode {
    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn exponent_tower(&self) -> &[TowerNode] {
        &self.exponent
    }

    /// Integer value of the exponent, `None` if it overflows `u64`.
    pub fn exponent_value(&self) -> Option<u64> {
        product_value(&self.exponent)
    }

    fn height(&self) -> u32 {
        1 + floors_height(&self.exponent)
    }
}

fn floors_height(nodes: &[TowerNode]) -> u32 {
    nodes.iter().map(TowerNode::height).max().unwrap_or(0)
}

fn product_value(nodes: &[TowerNode]) -> Option<u64> {
    nodes.iter().try_fold(1u64, |acc, node| {
        let e = u32::try_from(node.exponent_value()?).ok()?;
        node.base.checked_pow(e).and_then(|q| acc.checked_mul(q))
    })
}

/// The tower factorization of a positive integer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Tower {
    value: u64,
    floors: Vec<TowerNode>,
    height: u32,
}

impl Tower {
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn floors(&self) -> &[TowerNode] {
        &self.floors
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Multiplies the tree back out.
    pub fn recompose(&self) -> Option<u64> {
        product_value(&self.floors)
    }
}

impl fmt::Display for Tower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.floors.is_empty() {
            return f.write_str("1");
        }
        write_nodes(f, &self.floors)
    }
}

fn write_nodes(f: &mut fmt::Formatter<'_>, nodes: &[TowerNode]) -> fmt::Result {
    for (i, node) in nodes.iter().enumerate() {
        if i > 0 {
            f.write_str(" * ")?;
        }
        write!(f, "{}", node.base)?;
        match node.exponent.as_slice() {
            [] => {}
            [single] if single.exponent.is_empty() => write!(f, "^{}", single.base)?,
            nested => {
                f.write_str("^(")?;
                write_nodes(f, nested)?;
                f.write_str(")")?;
            }
        }
    }
    Ok(())
}

fn exponent_nodes(a: u32) -> Vec<TowerNode> {
    if a <= 1 {
        return Vec::new();
    }
    let f = factorize(u64::from(a)).expect("exponent is positive");
    nodes_of(&f)
}

fn nodes_of(f: &Factorization) -> Vec<TowerNode> {
    f.factors().iter().map(|&(p, a)| TowerNode { base: p, exponent: exponent_nodes(a) }).collect()
}

/// Expands a canonical factorization into its tower factorization.
pub fn tower_of(f: &Factorization) -> Tower {
    let floors = nodes_of(f);
    let height = floors_height(&floors);
    Tower { value: f.value(), floors, height }
}

/// Canonical text of a tower, e.g. `2^(2^3) * 3^(3^2) * 7^2 * 11`.
pub fn render_tower(t: &Tower) -> String {
    t.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TowerParseError {
    #[error("syntax error at byte {pos}: expected {expected}")]
    Syntax { pos: usize, expected: &'static str },
    #[error("base {base} at byte {pos} is not prime")]
    NotPrime { base: u64, pos: usize },
    #[error("base {base} at byte {pos} does not exceed the preceding base {previous}")]
    NotIncreasing { previous: u64, base: u64, pos: usize },
    #[error("zero exponent at byte {pos}")]
    ZeroExponent { pos: usize },
    #[error("exponent {value} at byte {pos} is not in tower form (write composite exponents as a parenthesized tower, omit exponent 1)")]
    NonCanonicalExponent { value: u64, pos: usize },
    #[error("value overflows 64 bits at byte {pos}")]
    Overflow { pos: usize },
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn integer(&mut self) -> Result<(u64, usize), TowerParseError> {
        self.skip_ws();
        let start = self.pos;
        let mut v: u64 = 0;
        while let Some(&c) = self.src.get(self.pos) {
            if !c.is_ascii_digit() {
                break;
            }
            v = v
                .checked_mul(10)
                .and_then(|v| v.checked_add(u64::from(c - b'0')))
                .ok_or(TowerParseError::Overflow { pos: start })?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(TowerParseError::Syntax { pos: start, expected: "an integer" });
        }
        Ok((v, start))
    }

    /// product := factor ("*" factor)*, with validated bases.
    fn product(&mut self) -> Result<(Vec<TowerNode>, u64), TowerParseError> {
        let mut nodes: Vec<TowerNode> = Vec::new();
        let mut value = 1u64;
        loop {
            let (base, pos) = self.integer()?;
            if !is_prime(base) {
                return Err(TowerParseError::NotPrime { base, pos });
            }
            if let Some(prev) = nodes.last() {
                if prev.base >= base {
                    return Err(TowerParseError::NotIncreasing { previous: prev.base, base, pos });
                }
            }
            let (exponent, e) = if self.eat(b'^') { self.exponent()? } else { (Vec::new(), 1) };
            let power =
                u32::try_from(e).ok().and_then(|e| base.checked_pow(e)).ok_or(TowerParseError::Overflow { pos })?;
            value = value.checked_mul(power).ok_or(TowerParseError::Overflow { pos })?;
            nodes.push(TowerNode { base, exponent });
            if !self.eat(b'*') {
                return Ok((nodes, value));
            }
        }
    }

    fn exponent(&mut self) -> Result<(Vec<TowerNode>, u64), TowerParseError> {
        if self.eat(b'(') {
            let (nodes, value) = self.product()?;
            if !self.eat(b')') {
                return Err(TowerParseError::Syntax { pos: self.pos, expected: "')'" });
            }
            return Ok((nodes, value));
        }
        let (e, pos) = self.integer()?;
        match e {
            0 => Err(TowerParseError::ZeroExponent { pos }),
            e if is_prime(e) => Ok((vec![TowerNode { base: e, exponent: Vec::new() }], e)),
            value => Err(TowerParseError::NonCanonicalExponent { value, pos }),
        }
    }
}

/// Parses and validates a tower expression.
pub fn parse_tower(s: &str) -> Result<Tower, TowerParseError> {
    let mut parser = Parser { src: s.as_bytes(), pos: 0 };

    let save = parser.pos;
    if let Ok((1, _)) = parser.integer() {
        if parser.peek().is_none() {
            return Ok(Tower { value: 1, floors: Vec::new(), height: 0 });
        }
    }
    parser.pos = save;

    let (floors, value) = parser.product()?;
    if parser.peek().is_some() {
        return Err(TowerParseError::Syntax { pos: parser.pos, expected: "'*' or end of input" });
    }
    let height = floors_height(&floors);
    Ok(Tower { value, floors, height })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tower(n: u64) -> Tower {
        tower_of(&factorize(n).unwrap())
    }

    /// Height straight from the recursive definition, factoring every
    /// exponent again instead of using the table.
    fn brute_height(n: u64) -> u32 {
        if n == 1 {
            return 0;
        }
        let f = factorize(n).unwrap();
        1 + f.exponents().filter(|&a| a >= 2).map(|a| brute_height(a.into())).max().unwrap_or(0)
    }

    #[test]
    fn small_height_table() {
        let expect: [(u32, u8); 12] =
            [(1, 0), (2, 1), (3, 1), (4, 2), (6, 1), (8, 2), (9, 2), (16, 3), (32, 2), (48, 3), (63, 2), (64, 2)];
        for (e, h) in expect {
            assert_eq!(small_height(e), h, "e = {e}");
        }
        for e in 1..=64u32 {
            assert_eq!(u32::from(small_height(e)), brute_height(e.into()));
        }
    }

    #[test]
    fn height_examples() {
        assert_eq!(height(30).unwrap(), 1);
        assert_eq!(height(49).unwrap(), 2);
        assert_eq!(height(2_715_939_072).unwrap(), 3);
        assert_eq!(height(65536).unwrap(), 4);
        assert_eq!(height(1).unwrap(), 0);
        assert_eq!(height(0), Err(ArithError::Zero));
    }

    #[test]
    fn tower_examples() {
        let t = tower(2_715_939_072);
        assert_eq!(t.height(), 3);
        assert_eq!(render_tower(&t), "2^(2^3) * 3^(3^2) * 7^2 * 11");
        let one = tower(1);
        assert!(one.floors().is_empty());
        assert_eq!(one.height(), 0);
        assert_eq!(render_tower(&one), "1");
        let t = tower(65536);
        assert_eq!(render_tower(&t), "2^(2^(2^2))");
        assert_eq!(t.height(), 4);
        // chain 2 -> 2 -> 2 -> 2
        let mut node = &t.floors()[0];
        for _ in 0..3 {
            assert_eq!(node.base(), 2);
            node = &node.exponent_tower()[0];
        }
        assert!(node.exponent_tower().is_empty());
        assert_eq!(render_tower(&tower(2u64.pow(6) * 5)), "2^(2 * 3) * 5");
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda(1, 12).unwrap(), 0);
        assert_eq!(lambda(1, 1).unwrap(), 1);
        assert_eq!(lambda(2, 256).unwrap(), 0);
        assert_eq!(brute_height(256), 3);
        assert_eq!(lambda_recursive(2, 256).unwrap(), 0);
    }

    #[test]
    fn lambda_two_on_prime_powers_is_mobius_squared_of_exponent() {
        for p in crate::arith::primes_up_to(100) {
            for r in 1..=30u32 {
                let Some(n) = p.checked_pow(r) else { break };
                assert_eq!(lambda(2, n).unwrap(), mobius_squared(r.into()).unwrap(), "{p}^{r}");
            }
        }
    }

    #[test]
    fn mobius_squared_examples() {
        assert_eq!(mobius_squared(1).unwrap(), 1);
        assert_eq!(mobius_squared(4).unwrap(), 0);
        assert_eq!(mobius_squared(2310).unwrap(), 1);
    }

    #[test]
    fn lambda_one_is_mobius_squared() {
        for n in 1..=100_000 {
            assert_eq!(lambda(1, n).unwrap(), mobius_squared(n).unwrap());
        }
    }

    #[test]
    fn height_recursion_and_lambda_consistency() {
        for n in 1..=10_000u64 {
            let h = height(n).unwrap();
            assert_eq!(h, brute_height(n));
            for k in 1..=5 {
                let l = lambda(k, n).unwrap();
                assert_eq!(l == 1, h <= k);
                assert_eq!(l, lambda_recursive(k, n).unwrap(), "k = {k}, n = {n}");
            }
        }
    }

    #[test]
    fn parse_examples() {
        let t = parse_tower("2^(2^3) * 3^(3^2) * 7^2 * 11").unwrap();
        assert_eq!(t.value(), 2_715_939_072);
        assert_eq!(t, tower(2_715_939_072));
        assert_eq!(parse_tower("1").unwrap(), tower(1));
        assert_eq!(parse_tower("  2 ^ ( 2 ^ ( 2^2 ) )").unwrap(), tower(65536));
        assert_eq!(parse_tower("4^2"), Err(TowerParseError::NotPrime { base: 4, pos: 0 }));
    }

    #[test]
    fn parse_errors() {
        use TowerParseError::*;
        assert_eq!(parse_tower("3 * 2"), Err(NotIncreasing { previous: 3, base: 2, pos: 4 }));
        assert_eq!(parse_tower("3 * 3"), Err(NotIncreasing { previous: 3, base: 3, pos: 4 }));
        assert_eq!(parse_tower("2^0"), Err(ZeroExponent { pos: 2 }));
        assert_eq!(parse_tower("2^4"), Err(NonCanonicalExponent { value: 4, pos: 2 }));
        assert_eq!(parse_tower("2^1"), Err(NonCanonicalExponent { value: 1, pos: 2 }));
        assert!(matches!(parse_tower("2^(1)"), Err(NotPrime { base: 1, .. })));
        assert!(matches!(parse_tower(""), Err(Syntax { pos: 0, .. })));
        assert!(matches!(parse_tower("2 *"), Err(Syntax { pos: 3, .. })));
        assert!(matches!(parse_tower("2^(3"), Err(Syntax { pos: 4, .. })));
        assert!(matches!(parse_tower("2 3"), Err(Syntax { pos: 2, .. })));
        assert!(matches!(parse_tower("1 * 2"), Err(NotPrime { base: 1, .. })));
        assert!(matches!(parse_tower("2^(2^(2^(2^2)))"), Err(Overflow { .. })));
        assert!(matches!(parse_tower("99999999999999999999"), Err(Overflow { .. })));
    }

    #[test]
    fn render_parse_round_trip() {
        for n in 1..=100_000u64 {
            let t = tower(n);
            let s = render_tower(&t);
            let back = parse_tower(&s).unwrap_or_else(|e| panic!("{s}: {e}"));
            assert_eq!(back, t);
            assert_eq!(back.recompose(), Some(n));
        }
    }
}
