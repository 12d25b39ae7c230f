//! Weight polynomials for monotone patterns through Young shapes.
//!
//! An involution avoiding `12⋯(k+1)` has an RSK shape with at most `k`
//! columns, one avoiding `(k+1)⋯21` a shape with at most `k` rows, and its
//! fixed points are the odd-length columns of that shape. Each shape `λ`
//! carries `f^λ` involutions, so
//! `w[j] = Σ { f^λ : λ bounded, odd_columns(λ) = j }`.
//! These correspondences are checked against brute force in the tests.

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::dist::WeightPolynomial;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeBound {
    /// Largest part (number of columns) at most the bound.
    MaxColumns,
    /// Number of parts (rows) at most the bound.
    MaxRows,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Avoid `12⋯(k+1)`.
    Increasing,
    /// Avoid `(k+1)⋯21`.
    Decreasing,
}

impl Direction {
    pub fn bound(self) -> ShapeBound {
        match self {
            Direction::Increasing => ShapeBound::MaxColumns,
            Direction::Decreasing => ShapeBound::MaxRows,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Increasing => "inc",
            Direction::Decreasing => "dec",
        })
    }
}

/// An integer partition, parts weakly decreasing and positive.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Shape {
    parts: Vec<usize>,
}

impl Shape {
    pub fn new(parts: Vec<usize>) -> Result<Self> {
        if parts.contains(&0) || parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Parse {
                input: format!("{parts:?}"),
                what: "partition (positive, weakly decreasing parts)",
            });
        }
        Ok(Shape { parts })
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn size(&self) -> usize {
        self.parts.iter().sum()
    }

    pub fn conjugate(&self) -> Shape {
        let width = self.parts.first().copied().unwrap_or(0);
        let parts = (0..width)
            .map(|c| self.parts.iter().take_while(|&&p| p > c).count())
            .collect();
        Shape { parts }
    }

    /// Number of odd-length columns.
    pub fn odd_columns(&self) -> usize {
        self.conjugate()
            .parts
            .iter()
            .filter(|&&c| c % 2 == 1)
            .count()
    }

    /// Number of standard Young tableaux, `n! / Π hooks`.
    pub fn hook_count(&self) -> BigUint {
        hook_count_with_factorial(self, &factorial(self.size()))
    }
}

pub fn odd_columns(s: &Shape) -> usize {
    s.odd_columns()
}

pub fn hook_count(s: &Shape) -> BigUint {
    s.hook_count()
}

pub fn factorial(n: usize) -> BigUint {
    (1..=n as u64).fold(BigUint::one(), |acc, i| acc * i)
}

fn hook_product(s: &Shape) -> BigUint {
    let conj = s.conjugate();
    let mut product = BigUint::one();
    // Batch small factors in a u64 before touching the big integer.
    let mut chunk: u64 = 1;
    for (i, &row) in s.parts.iter().enumerate() {
        for (j, &col) in conj.parts.iter().enumerate().take(row) {
            let hook = (row - j) + (col - i) - 1;
            match chunk.checked_mul(hook as u64) {
                Some(c) => chunk = c,
                None => {
                    product *= chunk;
                    chunk = hook as u64;
                }
            }
        }
    }
    product * chunk
}

fn hook_count_with_factorial(s: &Shape, n_factorial: &BigUint) -> BigUint {
    let (count, rem) = n_factorial.div_rem(&hook_product(s));
    debug_assert!(rem.is_zero(), "hook product does not divide n! for {s:?}");
    count
}

/// Partitions of `n` with every part ≤ `bound` (`MaxColumns`) or with at most
/// `bound` parts (`MaxRows`), largest first part first, lexicographically
/// descending.
pub struct Partitions {
    max_len: usize,
    current: Option<Vec<usize>>,
    started: bool,
}

impl Partitions {
    pub fn new(n: usize, bound: usize, mode: ShapeBound) -> Self {
        let (max_part, max_len) = match mode {
            ShapeBound::MaxColumns => (bound, usize::MAX),
            ShapeBound::MaxRows => (n.max(1), bound),
        };
        let mut parts = Vec::new();
        let current = if bound == 0 && n > 0 {
            None
        } else if greedy_fill(&mut parts, n, max_part.max(1), max_len) {
            Some(parts)
        } else {
            None
        };
        Partitions {
            max_len,
            current,
            started: false,
        }
    }
}

/// Appends the lexicographically largest completion of `remaining` with parts
/// ≤ `cap`; false if it needs more than `max_len` parts in total.
fn greedy_fill(parts: &mut Vec<usize>, mut remaining: usize, cap: usize, max_len: usize) -> bool {
    if remaining == 0 {
        return true;
    }
    let needed = remaining.div_ceil(cap);
    if parts.len() + needed > max_len {
        return false;
    }
    while remaining > 0 {
        let p = cap.min(remaining);
        parts.push(p);
        remaining -= p;
    }
    true
}

impl Iterator for Partitions {
    type Item = Shape;

    fn next(&mut self) -> Option<Shape> {
        if !self.started {
            self.started = true;
            return self.current.clone().map(|parts| Shape { parts });
        }
        let parts = self.current.as_mut()?;
        // Rightmost part that can shrink by one with a feasible refill.
        let mut suffix: usize = 0;
        for i in (0..parts.len()).rev() {
            suffix += parts[i];
            if parts[i] > 1 {
                let v = parts[i] - 1;
                let remaining = suffix - v;
                if (i + 1) + remaining.div_ceil(v) <= self.max_len {
                    parts.truncate(i);
                    parts.push(v);
                    greedy_fill(parts, remaining, v, self.max_len);
                    return Some(Shape {
                        parts: parts.clone(),
                    });
                }
            }
        }
        self.current = None;
        None
    }
}

pub fn partitions_bounded(n: usize, bound: usize, mode: ShapeBound) -> Partitions {
    Partitions::new(n, bound, mode)
}

/// Largest `n` allowed for a given `k` in [`monotone_weights`].
pub fn max_monotone_n(k: usize) -> usize {
    match k {
        0..=3 => 400,
        4..=5 => 120,
        _ => 50,
    }
}

/// Weight polynomial of involutions of `[n]` avoiding the monotone pattern
/// of length `k + 1` in the given direction.
pub fn monotone_weights(n: usize, k: usize, direction: Direction) -> Result<WeightPolynomial> {
    if k == 0 {
        return Err(Error::out_of_range("k", k, "1.."));
    }
    let limit = max_monotone_n(k);
    if n > limit {
        return Err(Error::out_of_range(
            "n",
            n,
            format!("0..={limit} for k={k}"),
        ));
    }
    let n_factorial = factorial(n);
    let mut coeffs = vec![BigUint::zero(); n + 1];
    for shape in Partitions::new(n, k, direction.bound()) {
        coeffs[shape.odd_columns()] += hook_count_with_factorial(&shape, &n_factorial);
    }
    Ok(WeightPolynomial::new(n, coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::{brute_force_weights, involution_count, Pattern};

    fn shape(parts: &[usize]) -> Shape {
        Shape::new(parts.to_vec()).unwrap()
    }

    fn list(n: usize, bound: usize, mode: ShapeBound) -> Vec<Vec<usize>> {
        Partitions::new(n, bound, mode)
            .map(|s| s.parts().to_vec())
            .collect()
    }

    #[test]
    fn bounded_partition_examples() {
        assert_eq!(
            list(3, 2, ShapeBound::MaxColumns),
            vec![vec![2, 1], vec![1, 1, 1]]
        );
        assert_eq!(list(3, 2, ShapeBound::MaxRows), vec![vec![3], vec![2, 1]]);
        assert_eq!(list(0, 4, ShapeBound::MaxRows), vec![Vec::<usize>::new()]);
        assert_eq!(
            list(0, 4, ShapeBound::MaxColumns),
            vec![Vec::<usize>::new()]
        );
        assert_eq!(
            list(5, 5, ShapeBound::MaxRows),
            vec![
                vec![5],
                vec![4, 1],
                vec![3, 2],
                vec![3, 1, 1],
                vec![2, 2, 1],
                vec![2, 1, 1, 1],
                vec![1, 1, 1, 1, 1]
            ]
        );
    }

    /// Partition counts p(n) and bounded counts by a simple DP.
    fn count_parts_at_most(n: usize, k: usize) -> usize {
        let mut ways = vec![0usize; n + 1];
        ways[0] = 1;
        for part in 1..=k {
            for m in part..=n {
                ways[m] += ways[m - part];
            }
        }
        ways[n]
    }

    #[test]
    fn partition_counts_and_conjugate_symmetry() {
        for n in 0..=25 {
            for k in 1..=6 {
                let cols = list(n, k, ShapeBound::MaxColumns);
                let rows = list(n, k, ShapeBound::MaxRows);
                assert_eq!(cols.len(), count_parts_at_most(n, k), "n={n} k={k}");
                assert_eq!(rows.len(), cols.len(), "n={n} k={k}");
                assert!(cols.iter().all(|p| p.iter().sum::<usize>() == n));
                assert!(rows.iter().all(|p| p.len() <= k));
                let mut sorted = cols.clone();
                sorted.sort_by(|a, b| b.cmp(a));
                sorted.dedup();
                assert_eq!(sorted, cols, "not strictly descending lex order");
            }
        }
    }

    #[test]
    fn hook_count_examples() {
        assert_eq!(shape(&[2, 1]).hook_count(), BigUint::from(2u8));
        assert_eq!(shape(&[1, 1, 1]).hook_count(), BigUint::one());
        assert_eq!(shape(&[3, 2]).hook_count(), BigUint::from(5u8));
        assert_eq!(shape(&[]).hook_count(), BigUint::one());
        assert_eq!(shape(&[4, 3, 2, 1]).hook_count(), BigUint::from(768u32));
    }

    #[test]
    fn odd_column_examples() {
        assert_eq!(shape(&[2, 1]).odd_columns(), 1);
        assert_eq!(shape(&[1, 1, 1]).odd_columns(), 1);
        assert_eq!(shape(&[2, 2]).odd_columns(), 0);
        assert_eq!(shape(&[3, 1]).conjugate(), shape(&[2, 1, 1]));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Shape::new(vec![1, 2]).is_err());
        assert!(Shape::new(vec![2, 0]).is_err());
    }

    #[test]
    fn monotone_examples() {
        let w = monotone_weights(3, 2, Direction::Increasing).unwrap();
        assert_eq!(w.coeffs_u64(), vec![0, 3, 0, 0]);
        let w = monotone_weights(2, 1, Direction::Increasing).unwrap();
        assert_eq!(w.coeffs_u64(), vec![1, 0, 0]);
        for n in 0..=8 {
            for dir in [Direction::Increasing, Direction::Decreasing] {
                let w = monotone_weights(n, n.max(1), dir).unwrap();
                assert_eq!(w.total(), involution_count(n));
            }
        }
    }

    #[test]
    fn certified_against_brute_force() {
        for n in 0..=9 {
            for k in 1..=4 {
                assert_eq!(
                    monotone_weights(n, k, Direction::Increasing).unwrap(),
                    brute_force_weights(n, &Pattern::Increasing(k + 1)).unwrap(),
                    "inc n={n} k={k}"
                );
                assert_eq!(
                    monotone_weights(n, k, Direction::Decreasing).unwrap(),
                    brute_force_weights(n, &Pattern::Decreasing(k + 1)).unwrap(),
                    "dec n={n} k={k}"
                );
            }
        }
    }

    #[test]
    fn increasing_support_is_bounded_by_k() {
        for k in 1..=4 {
            let w = monotone_weights(30, k, Direction::Increasing).unwrap();
            assert!(w.nonzero().all(|(j, _)| j <= k));
        }
    }

    #[test]
    fn conjugation_totals_agree() {
        for n in [10, 17, 24] {
            for k in 1..=4 {
                let inc = monotone_weights(n, k, Direction::Increasing)
                    .unwrap()
                    .total();
                let dec_via_conjugates: BigUint = Partitions::new(n, k, ShapeBound::MaxColumns)
                    .map(|s| s.conjugate())
                    .inspect(|c| assert!(c.parts().len() <= k))
                    .map(|c| c.hook_count())
                    .sum();
                assert_eq!(inc, dec_via_conjugates);
                let dec = monotone_weights(n, k, Direction::Decreasing)
                    .unwrap()
                    .total();
                assert_eq!(inc, dec);
            }
        }
    }

    #[test]
    fn hook_counts_divide_and_sum_to_involutions() {
        for n in 0..=40 {
            let nf = factorial(n);
            let mut total = BigUint::zero();
            for s in Partitions::new(n, n.max(1), ShapeBound::MaxRows) {
                let hp = hook_product(&s);
                if n <= 60 {
                    assert!((&nf % &hp).is_zero());
                }
                total += &nf / hp;
            }
            assert_eq!(total, involution_count(n), "n={n}");
        }
    }

    #[test]
    fn guards() {
        assert!(monotone_weights(401, 3, Direction::Decreasing).is_err());
        assert!(monotone_weights(121, 5, Direction::Increasing).is_err());
        assert!(monotone_weights(5, 0, Direction::Increasing).is_err());
        assert!(monotone_weights(400, 2, Direction::Decreasing).is_ok());
    }
}
