//! Permutations, pattern containment and the exhaustive involution oracle.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::dist::WeightPolynomial;
use crate::error::{Error, Result};

/// Largest `n` accepted by [`Involutions::new`].
pub const MAX_ENUMERATE_N: usize = 14;
/// Largest `n` accepted by [`brute_force_weights`].
pub const MAX_BRUTE_FORCE_N: usize = 12;

/// A permutation of `[n]` in one-line notation, values `1..=n`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    image: Vec<usize>,
}

impl Permutation {
    pub fn new(image: Vec<usize>) -> Result<Self> {
        let n = image.len();
        let mut seen = vec![false; n + 1];
        for &v in &image {
            if v == 0 || v > n || seen[v] {
                return Err(Error::InvalidPermutation(format!(
                    "{image:?} is not a bijection on 1..={n}"
                )));
            }
            seen[v] = true;
        }
        Ok(Permutation { image })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            image: (1..=n).collect(),
        }
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    /// True iff `π(π(i)) = i` for every `i`.
    pub fn is_involution(&self) -> bool {
        self.image
            .iter()
            .enumerate()
            .all(|(i, &v)| self.image[v - 1] == i + 1)
    }

    pub fn fixed_points(&self) -> usize {
        self.image
            .iter()
            .enumerate()
            .filter(|&(i, &v)| v == i + 1)
            .count()
    }

    /// True iff some subsequence of `self` is order-isomorphic to `pattern`.
    pub fn contains(&self, pattern: &Permutation) -> bool {
        contains(self, pattern)
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(image: Vec<usize>) -> Result<Self> {
        Permutation::new(image)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.image
    }
}

impl fmt::Display for Permutation {
    /// Digits are concatenated while every value is a single digit, otherwise
    /// values are space separated.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.image.iter().all(|&v| v < 10) {
            for v in &self.image {
                write!(f, "{v}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.image.iter().map(|v| v.to_string()).collect();
            f.write_str(&parts.join(" "))
        }
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation({self})")
    }
}

impl FromStr for Permutation {
    type Err = Error;

    /// Accepts `"3412"` (single digits) or `"10 2 3 ..."` (whitespace separated).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let image: Option<Vec<usize>> = if s.contains(char::is_whitespace) || s.contains(',') {
            s.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse().ok())
                .collect()
        } else {
            s.chars()
                .map(|c| c.to_digit(10).map(|d| d as usize))
                .collect()
        };
        let image = image.ok_or_else(|| Error::Parse {
            input: s.to_string(),
            what: "permutation",
        })?;
        Permutation::new(image)
    }
}

/// A pattern to avoid: an explicit permutation or one of the named classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Explicit(Permutation),
    /// `12⋯m` of the given length `m = k + 1`.
    Increasing(usize),
    /// `m⋯21` of the given length `m = k + 1`.
    Decreasing(usize),
    P321,
    P132,
    P213,
    P231,
    P312,
}

impl Pattern {
    pub fn to_permutation(&self) -> Permutation {
        let digits = |v: &[usize]| Permutation::new(v.to_vec()).expect("named pattern");
        match self {
            Pattern::Explicit(p) => p.clone(),
            Pattern::Increasing(m) => Permutation::identity(*m),
            Pattern::Decreasing(m) => Permutation {
                image: (1..=*m).rev().collect(),
            },
            Pattern::P321 => digits(&[3, 2, 1]),
            Pattern::P132 => digits(&[1, 3, 2]),
            Pattern::P213 => digits(&[2, 1, 3]),
            Pattern::P231 => digits(&[2, 3, 1]),
            Pattern::P312 => digits(&[3, 1, 2]),
        }
    }

    /// All five patterns of length three that have their own variant.
    pub fn length_three() -> [Pattern; 5] {
        [
            Pattern::P321,
            Pattern::P132,
            Pattern::P213,
            Pattern::P231,
            Pattern::P312,
        ]
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Increasing(m) => write!(f, "inc{m}"),
            Pattern::Decreasing(m) => write!(f, "dec{m}"),
            other => write!(f, "{}", other.to_permutation()),
        }
    }
}

impl FromStr for Pattern {
    type Err = Error;

    /// `321`, `132`, `213`, `231`, `312`, `incM`/`decM` (pattern length `M`),
    /// or any other permutation in one-line notation.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let lower = s.to_ascii_lowercase();
        let length = |rest: &str| {
            rest.trim_start_matches(':')
                .parse::<usize>()
                .ok()
                .filter(|&m| m >= 1)
                .ok_or_else(|| Error::InvalidPattern(s.to_string()))
        };
        if let Some(rest) = lower.strip_prefix("inc") {
            return Ok(Pattern::Increasing(length(rest)?));
        }
        if let Some(rest) = lower.strip_prefix("dec") {
            return Ok(Pattern::Decreasing(length(rest)?));
        }
        Ok(match s {
            "321" => Pattern::P321,
            "132" => Pattern::P132,
            "213" => Pattern::P213,
            "231" => Pattern::P231,
            "312" => Pattern::P312,
            _ => {
                let p: Permutation = s.parse()?;
                if p.is_empty() {
                    return Err(Error::InvalidPattern("empty pattern".into()));
                }
                Pattern::Explicit(p)
            }
        })
    }
}

/// Pattern containment.
///
/// Length-3 patterns use a direct triple loop; longer ones use backtracking
/// over index choices, pruned when too few positions remain.
pub fn contains(pi: &Permutation, sigma: &Permutation) -> bool {
    let (p, s) = (pi.image(), sigma.image());
    if s.len() > p.len() {
        return false;
    }
    match s.len() {
        0 => true,
        1 => true,
        3 => contains_length_three(p, s),
        _ => {
            let mut chosen = Vec::with_capacity(s.len());
            extend_match(p, s, 0, &mut chosen)
        }
    }
}

fn contains_length_three(p: &[usize], s: &[usize]) -> bool {
    let n = p.len();
    let lt01 = s[0] < s[1];
    let lt02 = s[0] < s[2];
    let lt12 = s[1] < s[2];
    for j in 1..n - 1 {
        let mid = p[j];
        // Skip the middle index unless both sides have a candidate.
        if !p[..j].iter().any(|&a| (a < mid) == lt01) {
            continue;
        }
        if !p[j + 1..].iter().any(|&c| (mid < c) == lt12) {
            continue;
        }
        for &a in p[..j].iter().filter(|&&a| (a < mid) == lt01) {
            if p[j + 1..]
                .iter()
                .any(|&c| (mid < c) == lt12 && (a < c) == lt02)
            {
                return true;
            }
        }
    }
    false
}

fn extend_match(p: &[usize], s: &[usize], start: usize, chosen: &mut Vec<usize>) -> bool {
    let depth = chosen.len();
    if depth == s.len() {
        return true;
    }
    let needed = s.len() - depth;
    for i in start..=p.len() - needed {
        let v = p[i];
        let consistent = chosen
            .iter()
            .enumerate()
            .all(|(l, &idx)| (p[idx] < v) == (s[l] < s[depth]));
        if consistent {
            chosen.push(i);
            if extend_match(p, s, i + 1, chosen) {
                return true;
            }
            chosen.pop();
        }
    }
    false
}

/// Every involution of `[n]`, built by deciding for the largest unassigned
/// element whether it is fixed or paired with a smaller unassigned element.
pub struct Involutions {
    n: usize,
    /// `img[e]` for `e` in `1..=n`; zero means unassigned.
    img: Vec<usize>,
    /// Decisions in order: `(element, partner)`, partner == element when fixed.
    stack: Vec<(usize, usize)>,
    started: bool,
    done: bool,
}

impl Involutions {
    pub fn new(n: usize) -> Result<Self> {
        if n > MAX_ENUMERATE_N {
            return Err(Error::out_of_range(
                "n",
                n,
                format!("0..={MAX_ENUMERATE_N}"),
            ));
        }
        Ok(Involutions {
            n,
            img: vec![0; n + 1],
            stack: Vec::with_capacity(n),
            started: false,
            done: false,
        })
    }

    fn largest_unassigned(&self, below: usize) -> Option<usize> {
        (1..below).rev().find(|&e| self.img[e] == 0)
    }

    fn assign(&mut self, e: usize, partner: usize) {
        self.img[e] = partner;
        self.img[partner] = e;
        self.stack.push((e, partner));
    }

    fn fill_with_fixed_points(&mut self) {
        while let Some(e) = self.largest_unassigned(self.n + 1) {
            self.assign(e, e);
        }
    }

    fn current(&self) -> Permutation {
        Permutation {
            image: self.img[1..].to_vec(),
        }
    }
}

impl Iterator for Involutions {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            self.fill_with_fixed_points();
            return Some(self.current());
        }
        while let Some((e, partner)) = self.stack.pop() {
            self.img[e] = 0;
            self.img[partner] = 0;
            // Partners are tried in the order: fixed, then 1, 2, ... below e.
            let from = if partner == e { 1 } else { partner + 1 };
            if let Some(next) = (from..e).find(|&i| self.img[i] == 0) {
                self.assign(e, next);
                self.fill_with_fixed_points();
                return Some(self.current());
            }
        }
        self.done = true;
        None
    }
}

pub fn enumerate_involutions(n: usize) -> Result<Involutions> {
    Involutions::new(n)
}

/// Number of involutions of `[n]` via `I(n) = I(n-1) + (n-1) I(n-2)`.
pub fn involution_count(n: usize) -> BigUint {
    let (mut prev, mut cur) = (BigUint::one(), BigUint::one());
    for m in 2..=n {
        let next = &cur + &prev * BigUint::from(m - 1);
        prev = std::mem::replace(&mut cur, next);
    }
    cur
}

/// Weight polynomial of `Iv_n(sigma)` by exhaustive enumeration.
pub fn brute_force_weights(n: usize, sigma: &Pattern) -> Result<WeightPolynomial> {
    if n > MAX_BRUTE_FORCE_N {
        return Err(Error::out_of_range(
            "n",
            n,
            format!("0..={MAX_BRUTE_FORCE_N}"),
        ));
    }
    let pattern = sigma.to_permutation();
    let mut counts = vec![0u64; n + 1];
    for pi in Involutions::new(n)? {
        if !contains(&pi, &pattern) {
            counts[pi.fixed_points()] += 1;
        }
    }
    Ok(WeightPolynomial::new(
        n,
        counts.into_iter().map(BigUint::from).collect(),
    ))
}

/// Involutions of `[n]` avoiding `sigma`, in enumeration order.
pub fn avoiding_involutions(n: usize, sigma: &Pattern) -> Result<Vec<Permutation>> {
    if n > MAX_BRUTE_FORCE_N {
        return Err(Error::out_of_range(
            "n",
            n,
            format!("0..={MAX_BRUTE_FORCE_N}"),
        ));
    }
    let pattern = sigma.to_permutation();
    Ok(Involutions::new(n)?
        .filter(|pi| !contains(pi, &pattern))
        .collect())
}
