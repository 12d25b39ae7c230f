//! Coefficient tables of the two bivariate generating functions
//! `Σ_n Σ_{π ∈ Iv_n(σ)} q^fp(π) z^n` for the length-three pattern classes.
//!
//! * `{321, 132, 213}`: `G = 2 / (1 − 2qz + √(1 − 4z²))`. Writing
//!   `s(z) = (1 − √(1 − 4z²)) / 2 = Σ_{m≥1} Cat(m−1) z^{2m}` gives
//!   `G = 1 / (1 − qz − s(z))`, hence
//!   `a_n = q·a_{n−1} + Σ_{m≥1} Cat(m−1)·a_{n−2m}`.
//! * `{231, 312}`: `G = (1 − z²) / (1 − 2z² − qz)`, a rational function.
//!
//! Rows are dense polynomials in `q` with exact integer coefficients.
//! [`path_weights`] is an `O(n²)` ballot-walk table that reproduces the first
//! class's rows and is what large-`n` experiments use.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::dist::{Real, WeightPolynomial};
use crate::error::{Error, Result};
use crate::perm::Pattern;

/// Rows beyond this are only built through [`path_weights`] (class 321) in
/// the harness; the polynomial expansion itself has no hard cap.
pub const MAX_POLY_ROWS: usize = 60;
pub const MAX_PATH_ROWS: usize = 4000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SigmaClass {
    /// `{321, 132, 213}`
    #[serde(rename = "c321")]
    Class321,
    /// `{231, 312}`
    #[serde(rename = "c231")]
    Class231,
}

impl SigmaClass {
    pub fn members(self) -> &'static [Pattern] {
        match self {
            SigmaClass::Class321 => &[Pattern::P321, Pattern::P132, Pattern::P213],
            SigmaClass::Class231 => &[Pattern::P231, Pattern::P312],
        }
    }

    pub fn of(pattern: &Pattern) -> Option<SigmaClass> {
        match pattern {
            Pattern::P321 | Pattern::P132 | Pattern::P213 => Some(SigmaClass::Class321),
            Pattern::P231 | Pattern::P312 => Some(SigmaClass::Class231),
            Pattern::Explicit(p) => Pattern::length_three()
                .into_iter()
                .find(|named| &named.to_permutation() == p)
                .and_then(|named| SigmaClass::of(&named)),
            Pattern::Decreasing(3) => Some(SigmaClass::Class321),
            _ => None,
        }
    }
}

impl fmt::Display for SigmaClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SigmaClass::Class321 => "c321",
            SigmaClass::Class231 => "c231",
        })
    }
}

impl FromStr for SigmaClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "c321" | "321" | "132" | "213" => Ok(SigmaClass::Class321),
            "c231" | "231" | "312" => Ok(SigmaClass::Class231),
            _ => Err(Error::Parse {
                input: s.to_string(),
                what: "pattern class (c321 or c231)",
            }),
        }
    }
}

/// Rows `0..=n_max` of a class's weight table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesTable {
    #[serde(rename = "class")]
    pub sigma_class: SigmaClass,
    pub rows: Vec<WeightPolynomial>,
}

impl SeriesTable {
    pub fn n_max(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    pub fn row(&self, n: usize) -> &WeightPolynomial {
        &self.rows[n]
    }

    /// `n,j,count` lines for every nonzero coefficient, with header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_weights_csv(&self.rows, out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// CSV shared by every engine: header `n,j,count`, counts as decimal strings.
pub fn write_weights_csv<'a, W: Write>(
    rows: impl IntoIterator<Item = &'a WeightPolynomial>,
    mut out: W,
) -> Result<()> {
    writeln!(out, "n,j,count")?;
    for row in rows {
        for (j, c) in row.nonzero() {
            writeln!(out, "{},{},{}", row.n(), j, c)?;
        }
    }
    Ok(())
}

/// Dense polynomial helpers on `Vec<BigUint>` (index = power of q).
fn add_into(acc: &mut Vec<BigUint>, p: &[BigUint], shift: usize, scale: &BigUint) {
    if acc.len() < p.len() + shift {
        acc.resize(p.len() + shift, BigUint::zero());
    }
    for (i, c) in p.iter().enumerate() {
        if !c.is_zero() {
            acc[i + shift] += c * scale;
        }
    }
}

/// `c_m = Cat(m−1)` for `m = 0..=m_max` (with `c_0 = 0`): the coefficients of
/// `z^{2m}` in `(1 − √(1 − 4z²)) / 2`.
pub fn sqrt_series_coefficients(m_max: usize) -> Vec<BigUint> {
    let mut c = vec![BigUint::zero(); m_max + 1];
    let mut catalan = BigUint::one();
    for (m, slot) in c.iter_mut().enumerate().skip(1) {
        *slot = catalan.clone();
        // Cat(i+1) = Cat(i)·2(2i+1)/(i+2) with i = m−1; the division is exact.
        let i = (m - 1) as u64;
        catalan = catalan * BigUint::from(2 * (2 * i + 1)) / BigUint::from(i + 2);
    }
    c
}

/// Rows of `2 / (1 − 2qz + √(1 − 4z²))`.
pub fn expand_class321(n_max: usize) -> SeriesTable {
    let c = sqrt_series_coefficients(n_max / 2);
    let one = BigUint::one();
    let mut rows: Vec<Vec<BigUint>> = Vec::with_capacity(n_max + 1);
    rows.push(vec![BigUint::one()]);
    for n in 1..=n_max {
        let mut a = Vec::with_capacity(n + 1);
        add_into(&mut a, &rows[n - 1], 1, &one);
        for m in 1..=n / 2 {
            add_into(&mut a, &rows[n - 2 * m], 0, &c[m]);
        }
        rows.push(a);
    }
    SeriesTable {
        sigma_class: SigmaClass::Class321,
        rows: rows
            .into_iter()
            .enumerate()
            .map(|(n, r)| WeightPolynomial::new(n, r))
            .collect(),
    }
}

/// Rows of `(1 − z²) / (1 − 2z² − qz)`.
///
/// With `c_n = q c_{n−1} + 2 c_{n−2}` (`c_0 = 1`) the rows are
/// `c_n − c_{n−2} = q c_{n−1} + c_{n−2}`; the second form keeps everything in
/// unsigned arithmetic.
pub fn expand_class231(n_max: usize) -> SeriesTable {
    let one = BigUint::one();
    let two = BigUint::from(2u8);
    let mut c: Vec<Vec<BigUint>> = Vec::with_capacity(n_max + 1);
    let mut rows = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut cn = Vec::new();
        let mut row = Vec::new();
        if n == 0 {
            cn.push(BigUint::one());
            row.push(BigUint::one());
        } else {
            add_into(&mut cn, &c[n - 1], 1, &one);
            add_into(&mut row, &c[n - 1], 1, &one);
            if n >= 2 {
                add_into(&mut cn, &c[n - 2], 0, &two);
                add_into(&mut row, &c[n - 2], 0, &one);
            }
        }
        c.push(cn);
        rows.push(WeightPolynomial::new(n, row));
    }
    SeriesTable {
        sigma_class: SigmaClass::Class231,
        rows,
    }
}

/// A single row of the class-231 table, `O(n²)` big-integer work.
pub fn class231_row(n: usize) -> WeightPolynomial {
    expand_class231(n).rows.pop().expect("at least row 0")
}

/// Ballot walks: `b(n, j)` = number of ±1 walks of length `n` from 0 that stay
/// nonnegative and end at height `j`.
pub fn path_weights(n_max: usize) -> SeriesTable {
    path_weights_with(n_max, false)
}

/// Same as [`path_weights`], with `reflect_at_floor` treating the height −1
/// as a copy of height 1 (an off-by-one boundary). Only for fault-injection
/// tests of the cross-engine check.
#[doc(hidden)]
pub fn path_weights_with(n_max: usize, reflect_at_floor: bool) -> SeriesTable {
    let mut rows = Vec::with_capacity(n_max + 1);
    let mut prev = vec![BigUint::one()];
    rows.push(WeightPolynomial::new(0, prev.clone()));
    for n in 1..=n_max {
        let mut cur = vec![BigUint::zero(); n + 1];
        for (j, slot) in cur.iter_mut().enumerate() {
            let below = if j >= 1 { prev.get(j - 1) } else { None };
            let above = prev.get(j + 1);
            let mut v = BigUint::zero();
            if let Some(b) = below {
                v += b;
            }
            if let Some(a) = above {
                v += a;
            }
            if j == 0 && reflect_at_floor {
                if let Some(a) = above {
                    v += a;
                }
            }
            *slot = v;
        }
        rows.push(WeightPolynomial::new(n, cur.clone()));
        prev = cur;
    }
    SeriesTable {
        sigma_class: SigmaClass::Class321,
        rows,
    }
}

/// Last row of [`path_weights`] without keeping the whole table.
pub fn path_row(n: usize) -> WeightPolynomial {
    let mut prev = vec![BigUint::one()];
    for m in 1..=n {
        let mut cur = vec![BigUint::zero(); m + 1];
        for (j, slot) in cur.iter_mut().enumerate() {
            if j >= 1 {
                if let Some(b) = prev.get(j - 1) {
                    *slot += b;
                }
            }
            if let Some(a) = prev.get(j + 1) {
                *slot += a;
            }
        }
        prev = cur;
    }
    WeightPolynomial::new(n, prev)
}

/// Ballot-walk rows at each requested `n`, streaming the DP so only two rows
/// are alive at a time.
pub fn path_rows_at(ns: &[usize]) -> Vec<WeightPolynomial> {
    let max = ns.iter().copied().max().unwrap_or(0);
    let mut found: std::collections::BTreeMap<usize, WeightPolynomial> = Default::default();
    let mut prev = vec![BigUint::one()];
    if ns.contains(&0) {
        found.insert(0, WeightPolynomial::new(0, prev.clone()));
    }
    for m in 1..=max {
        let mut cur = vec![BigUint::zero(); m + 1];
        for (j, slot) in cur.iter_mut().enumerate() {
            if j >= 1 {
                if let Some(b) = prev.get(j - 1) {
                    *slot += b;
                }
            }
            if let Some(a) = prev.get(j + 1) {
                *slot += a;
            }
        }
        if ns.contains(&m) {
            found.insert(m, WeightPolynomial::new(m, cur.clone()));
        }
        prev = cur;
    }
    ns.iter().map(|n| found[n].clone()).collect()
}

/// Class-231 rows at each requested `n`, streaming the denominator recurrence.
pub fn class231_rows_at(ns: &[usize]) -> Vec<WeightPolynomial> {
    let max = ns.iter().copied().max().unwrap_or(0);
    let one = BigUint::one();
    let two = BigUint::from(2u8);
    let mut found: std::collections::BTreeMap<usize, WeightPolynomial> = Default::default();
    // (c_{n-2}, c_{n-1})
    let mut older: Vec<BigUint> = Vec::new();
    let mut old: Vec<BigUint> = vec![BigUint::one()];
    if ns.contains(&0) {
        found.insert(0, WeightPolynomial::new(0, old.clone()));
    }
    for n in 1..=max {
        let mut cn = Vec::new();
        add_into(&mut cn, &old, 1, &one);
        if ns.contains(&n) {
            let mut row = cn.clone();
            add_into(&mut row, &older, 0, &one);
            found.insert(n, WeightPolynomial::new(n, row));
        }
        add_into(&mut cn, &older, 0, &two);
        older = std::mem::replace(&mut old, cn);
    }
    ns.iter().map(|n| found[n].clone()).collect()
}

/// Finite-`n` probability generating function `Σ w[j](uq)^j / Σ w[j] q^j`.
pub fn pgf_eval(w: &WeightPolynomial, q: &BigRational, u: &BigRational) -> Result<BigRational> {
    if !q.is_positive_rational() {
        return Err(Error::NonPositiveBias(crate::numeric::format_rational(q)));
    }
    // u = 0 is allowed: the value is P(fp = 0).
    if u < &BigRational::zero() {
        return Err(Error::out_of_range(
            "u",
            crate::numeric::format_rational(u),
            "[0, ∞)",
        ));
    }
    let denom = w.eval(q);
    if denom.is_zero() {
        return Err(Error::ZeroWeights);
    }
    Ok(w.eval(&(u * q)) / denom)
}

trait PositiveRational {
    fn is_positive_rational(&self) -> bool;
}

impl PositiveRational for BigRational {
    fn is_positive_rational(&self) -> bool {
        self > &BigRational::zero()
    }
}

/// Convenience wrapper taking [`Real`]s; both must be exact.
pub fn pgf_eval_real(w: &WeightPolynomial, q: &Real, u: &Real) -> Result<BigRational> {
    match (q, u) {
        (Real::Exact(q), Real::Exact(u)) => pgf_eval(w, q, u),
        _ => Err(Error::Parse {
            input: format!("q={q}, u={u}"),
            what: "exact rationals",
        }),
    }
}

/// Central binomial `C(n, ⌊n/2⌋)`, used as an independent row-sum check.
pub fn central_binomial(n: usize) -> BigUint {
    let k = n / 2;
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc.to_biguint().expect("positive")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::brute_force_weights;

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    #[test]
    fn class321_small_rows() {
        let t = expand_class321(3);
        assert_eq!(t.row(0).coeffs_u64(), vec![1]);
        assert_eq!(t.row(1).coeffs_u64(), vec![0, 1]);
        assert_eq!(t.row(2).coeffs_u64(), vec![1, 0, 1]);
        assert_eq!(t.row(3).coeffs_u64(), vec![0, 2, 0, 1]);
    }

    #[test]
    fn class231_small_rows() {
        let t = expand_class231(3);
        assert_eq!(t.row(0).coeffs_u64(), vec![1]);
        assert_eq!(t.row(1).coeffs_u64(), vec![0, 1]);
        assert_eq!(t.row(2).coeffs_u64(), vec![1, 0, 1]);
        assert_eq!(t.row(3).coeffs_u64(), vec![0, 3, 0, 1]);
    }

    #[test]
    fn sqrt_coefficients_are_catalan() {
        let c = sqrt_series_coefficients(8);
        let expected = [0u32, 1, 1, 2, 5, 14, 42, 132, 429];
        assert_eq!(
            c,
            expected
                .iter()
                .map(|&x| BigUint::from(x))
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn gf_rows_match_brute_force() {
        let t321 = expand_class321(10);
        let t231 = expand_class231(10);
        for n in 0..=10 {
            for sigma in SigmaClass::Class321.members() {
                assert_eq!(
                    t321.row(n),
                    &brute_force_weights(n, sigma).unwrap(),
                    "n={n} {sigma}"
                );
            }
            for sigma in SigmaClass::Class231.members() {
                assert_eq!(
                    t231.row(n),
                    &brute_force_weights(n, sigma).unwrap(),
                    "n={n} {sigma}"
                );
            }
        }
    }

    #[test]
    fn path_table_matches_gf_table() {
        let gf = expand_class321(60);
        let path = path_weights(60);
        assert_eq!(gf.rows, path.rows);
        assert_eq!(path_row(60), path.rows[60]);
    }

    #[test]
    fn streaming_rows_match_tables() {
        let ns = [0, 1, 7, 30, 31];
        let path = path_weights(31);
        let c231 = expand_class231(31);
        for (n, row) in ns.iter().zip(path_rows_at(&ns)) {
            assert_eq!(&row, path.row(*n));
        }
        for (n, row) in ns.iter().zip(class231_rows_at(&ns)) {
            assert_eq!(&row, c231.row(*n));
        }
        assert_eq!(class231_row(9), c231.rows[9]);
    }

    #[test]
    fn row_sums() {
        let t321 = expand_class321(30);
        for n in 0..=30 {
            assert_eq!(t321.row(n).total(), central_binomial(n), "n={n}");
        }
        let t231 = expand_class231(12);
        for n in 1..=12 {
            assert_eq!(t231.row(n).total(), BigUint::one() << (n - 1), "n={n}");
        }
    }

    #[test]
    fn binomial_table_spot_values() {
        assert_eq!(central_binomial(0), BigUint::one());
        assert_eq!(central_binomial(5), BigUint::from(10u8));
        assert_eq!(central_binomial(6), BigUint::from(20u8));
        assert_eq!(central_binomial(30), BigUint::from(155_117_520u64));
    }

    #[test]
    fn parity_everywhere() {
        for t in [expand_class321(40), expand_class231(40), path_weights(80)] {
            assert!(t.rows.iter().all(WeightPolynomial::parity_holds));
        }
    }

    #[test]
    fn path_walk_counts() {
        let t = path_weights(3);
        assert_eq!(t.row(2).coeffs_u64(), vec![1, 0, 1]);
        assert_eq!(t.row(3).coeffs_u64(), vec![0, 2, 0, 1]);
    }

    #[test]
    fn reflected_floor_fault_shows_at_n2() {
        let bad = path_weights_with(4, true);
        assert_eq!(bad.row(1).coeffs_u64(), vec![0, 1]);
        assert_eq!(bad.row(2).coeffs_u64(), vec![2, 0, 1]);
    }

    #[test]
    fn pgf_examples() {
        let w = expand_class321(3).rows[3].clone();
        assert_eq!(pgf_eval(&w, &rat(1, 1), &rat(2, 1)).unwrap(), rat(4, 1));
        let w2 = expand_class231(2).rows[2].clone();
        assert_eq!(pgf_eval(&w2, &rat(1, 1), &rat(0, 1)).unwrap(), rat(1, 2));
        assert!(pgf_eval(&w2, &rat(1, 1), &rat(-1, 1)).is_err());
        assert!(pgf_eval(&w2, &rat(-1, 1), &rat(1, 1)).is_err());
    }

    #[test]
    fn pgf_at_one_is_one() {
        let t = path_weights(60);
        for row in &t.rows {
            for q in [rat(1, 2), rat(1, 1), rat(2, 1)] {
                assert_eq!(pgf_eval(row, &q, &rat(1, 1)).unwrap(), rat(1, 1));
            }
        }
    }

    #[test]
    fn csv_and_json_emission() {
        let t = expand_class321(3);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "n,j,count\n0,0,1\n1,1,1\n2,0,1\n2,2,1\n3,1,2\n3,3,1\n"
        );
        let back: SeriesTable = serde_json::from_str(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
    }
}
