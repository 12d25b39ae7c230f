//! Weight polynomials and the fixed-point laws they induce under a bias `q`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numeric::{format_rational, is_positive, ln_biguint, log_sum_exp, rational_to_f64};

/// `coeffs[j]` counts the avoiding involutions of length `n` with `j` fixed
/// points; the polynomial is `Σ coeffs[j] q^j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightPolynomial {
    n: usize,
    coeffs: Vec<BigUint>,
}

impl WeightPolynomial {
    /// Trailing zeros are padded or trimmed so that `coeffs.len() == n + 1`.
    pub fn new(n: usize, mut coeffs: Vec<BigUint>) -> Self {
        assert!(
            coeffs[(n + 1).min(coeffs.len())..]
                .iter()
                .all(Zero::is_zero),
            "degree exceeds n"
        );
        coeffs.resize(n + 1, BigUint::zero());
        WeightPolynomial { n, coeffs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[BigUint] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> &BigUint {
        &self.coeffs[j]
    }

    /// Coefficients as `u64`; panics if any does not fit. Test convenience.
    pub fn coeffs_u64(&self) -> Vec<u64> {
        self.coeffs
            .iter()
            .map(|c| c.to_u64().expect("coefficient fits in u64"))
            .collect()
    }

    /// Value at `q = 1`, the number of avoiding involutions.
    pub fn total(&self) -> BigUint {
        self.coeffs.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    /// `(j, count)` for every nonzero coefficient.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, &BigUint)> {
        self.coeffs.iter().enumerate().filter(|(_, c)| !c.is_zero())
    }

    /// Every nonzero coefficient sits at `j ≡ n (mod 2)`.
    pub fn parity_holds(&self) -> bool {
        self.nonzero().all(|(j, _)| (j + self.n) % 2 == 0)
    }

    /// Exact value `Σ coeffs[j] x^j`.
    pub fn eval(&self, x: &BigRational) -> BigRational {
        // Horner.
        self.coeffs
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| {
                acc * x + BigRational::from_integer(BigInt::from(c.clone()))
            })
    }

    pub fn eval_u64(&self, x: u64) -> BigUint {
        let x = BigUint::from(x);
        self.coeffs
            .iter()
            .rev()
            .fold(BigUint::zero(), |acc, c| acc * &x + c)
    }
}

#[derive(Serialize, Deserialize)]
struct WeightPolynomialRepr {
    n: usize,
    coeffs: Vec<String>,
}

impl Serialize for WeightPolynomial {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WeightPolynomialRepr {
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| c.to_string()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightPolynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = WeightPolynomialRepr::deserialize(d)?;
        let coeffs = repr
            .coeffs
            .iter()
            .map(|s| s.parse::<BigUint>().map_err(D::Error::custom))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if coeffs.len() > repr.n + 1 {
            return Err(D::Error::custom("more coefficients than n + 1"));
        }
        Ok(WeightPolynomial::new(repr.n, coeffs))
    }
}

/// A real number that is either an exact rational or a float.
#[derive(Clone, Debug, PartialEq)]
pub enum Real {
    Exact(BigRational),
    Float(f64),
}

impl Real {
    pub fn to_f64(&self) -> f64 {
        match self {
            Real::Exact(r) => rational_to_f64(r),
            Real::Float(x) => *x,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Real::Exact(_))
    }

    pub fn is_positive(&self) -> bool {
        match self {
            Real::Exact(r) => is_positive(r),
            Real::Float(x) => *x > 0.0 && x.is_finite(),
        }
    }

    pub fn ratio(num: i64, den: i64) -> Real {
        Real::Exact(BigRational::new(num.into(), den.into()))
    }

    pub fn integer(n: i64) -> Real {
        Real::ratio(n, 1)
    }
}

impl From<f64> for Real {
    fn from(x: f64) -> Self {
        Real::Float(x)
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Real::Exact(r) => f.write_str(&format_rational(r)),
            Real::Float(x) => write!(f, "{x}"),
        }
    }
}

impl FromStr for Real {
    type Err = Error;

    /// `p/q` and plain decimals (`0.25`, `-3`, `1.5`) parse exactly; anything
    /// using an exponent (`1e-3`) or `inf`/`nan` falls back to a float.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let err = || Error::Parse {
            input: s.to_string(),
            what: "rational or decimal number",
        };
        if let Some((p, q)) = s.split_once('/') {
            let p: BigInt = p.trim().parse().map_err(|_| err())?;
            let q: BigInt = q.trim().parse().map_err(|_| err())?;
            if q.is_zero() {
                return Err(err());
            }
            return Ok(Real::Exact(BigRational::new(p, q)));
        }
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        let digits_only = |t: &str| t.chars().all(|c| c.is_ascii_digit());
        if !(int.is_empty() && frac.is_empty()) && digits_only(int) && digits_only(frac) {
            let mut num: BigInt = format!("0{int}{frac}").parse().map_err(|_| err())?;
            if negative {
                num = -num;
            }
            let den = Pow::pow(&BigInt::from(10), frac.len());
            return Ok(Real::Exact(BigRational::new(num, den)));
        }
        s.parse::<f64>().map(Real::Float).map_err(|_| err())
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Real::Exact(r) => s.serialize_str(&format_rational(r)),
            Real::Float(x) => s.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(Real::Float(x)),
            Repr::Text(t) => t.parse().map_err(D::Error::custom),
        }
    }
}

/// Probabilities keyed by fixed-point count; only atoms with positive mass
/// are stored.
#[derive(Clone, Debug, PartialEq)]
pub enum Probabilities {
    Exact(BTreeMap<usize, BigRational>),
    Float(BTreeMap<usize, f64>),
}

/// Law of `fp` under the measure `∝ q^fp` on a finite set of involutions.
#[derive(Clone, Debug, PartialEq)]
pub struct FpDistribution {
    n: usize,
    q: Real,
    probs: Probabilities,
}

impl FpDistribution {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> &Real {
        &self.q
    }

    pub fn probs(&self) -> &Probabilities {
        &self.probs
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.probs, Probabilities::Exact(_))
    }

    /// Builds a floating-mode law directly from `(j, p)` pairs. Used for
    /// tests and for laws assembled outside [`biased_distribution`].
    pub fn from_float_pmf(n: usize, q: f64, pmf: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let probs = pmf.into_iter().filter(|&(_, p)| p > 0.0).collect();
        FpDistribution {
            n,
            q: Real::Float(q),
            probs: Probabilities::Float(probs),
        }
    }

    pub fn from_exact_pmf(
        n: usize,
        q: Real,
        pmf: impl IntoIterator<Item = (usize, BigRational)>,
    ) -> Self {
        let probs = pmf.into_iter().filter(|(_, p)| p.is_positive()).collect();
        FpDistribution {
            n,
            q,
            probs: Probabilities::Exact(probs),
        }
    }

    /// Support and probabilities as `f64`, ascending in `j`.
    pub fn pmf_f64(&self) -> Vec<(usize, f64)> {
        match &self.probs {
            Probabilities::Exact(m) => m.iter().map(|(&j, p)| (j, rational_to_f64(p))).collect(),
            Probabilities::Float(m) => m.iter().map(|(&j, &p)| (j, p)).collect(),
        }
    }

    pub fn prob_f64(&self, j: usize) -> f64 {
        match &self.probs {
            Probabilities::Exact(m) => m.get(&j).map(rational_to_f64).unwrap_or(0.0),
            Probabilities::Float(m) => m.get(&j).copied().unwrap_or(0.0),
        }
    }

    pub fn support(&self) -> Vec<usize> {
        match &self.probs {
            Probabilities::Exact(m) => m.keys().copied().collect(),
            Probabilities::Float(m) => m.keys().copied().collect(),
        }
    }

    /// Exact sum of the probabilities (always 1 for laws built here).
    pub fn total_exact(&self) -> Option<BigRational> {
        match &self.probs {
            Probabilities::Exact(m) => Some(m.values().sum()),
            Probabilities::Float(_) => None,
        }
    }
}

/// `P(fp = j) = q^j w[j] / Σ_i q^i w[i]`.
///
/// An exact `q` yields an exact law; a float `q` is handled in log space so
/// that counts far beyond `f64::MAX` are fine.
pub fn biased_distribution(w: &WeightPolynomial, q: &Real) -> Result<FpDistribution> {
    if !q.is_positive() {
        return Err(Error::NonPositiveBias(q.to_string()));
    }
    if w.is_zero() {
        return Err(Error::ZeroWeights);
    }
    let n = w.n();
    let probs = match q {
        Real::Exact(r) => {
            // Scale every term by den^n so each q^j w[j] is an integer.
            let num = r.numer().magnitude().clone();
            let den = r.denom().magnitude().clone();
            let mut num_pow = vec![BigUint::one(); n + 1];
            let mut den_pow = vec![BigUint::one(); n + 1];
            for j in 1..=n {
                num_pow[j] = &num_pow[j - 1] * &num;
                den_pow[j] = &den_pow[j - 1] * &den;
            }
            let terms: Vec<(usize, BigUint)> = w
                .nonzero()
                .map(|(j, c)| (j, c * &num_pow[j] * &den_pow[n - j]))
                .collect();
            let total = BigInt::from(terms.iter().map(|(_, t)| t).sum::<BigUint>());
            Probabilities::Exact(
                terms
                    .into_iter()
                    .map(|(j, t)| (j, BigRational::new(BigInt::from(t), total.clone())))
                    .collect(),
            )
        }
        Real::Float(x) => {
            let ln_q = x.ln();
            let logs: Vec<(usize, f64)> = w
                .nonzero()
                .map(|(j, c)| (j, ln_biguint(c) + j as f64 * ln_q))
                .collect();
            let ln_total = log_sum_exp(&logs.iter().map(|&(_, l)| l).collect::<Vec<_>>());
            Probabilities::Float(
                logs.into_iter()
                    .map(|(j, l)| (j, (l - ln_total).exp()))
                    .filter(|&(_, p)| p > 0.0)
                    .collect(),
            )
        }
    };
    Ok(FpDistribution {
        n,
        q: q.clone(),
        probs,
    })
}

/// Mean and variance of `fp`; exact when the law is exact.
pub fn exact_moments(d: &FpDistribution) -> (Real, Real) {
    match d.probs() {
        Probabilities::Exact(m) => {
            let mut mean = BigRational::zero();
            let mut second = BigRational::zero();
            for (&j, p) in m {
                let j = BigRational::from_integer(BigInt::from(j));
                let jp = &j * p;
                second += &j * &jp;
                mean += jp;
            }
            let var = second - &mean * &mean;
            (Real::Exact(mean), Real::Exact(var))
        }
        Probabilities::Float(m) => {
            let mean: f64 = m.iter().map(|(&j, &p)| j as f64 * p).sum();
            let var: f64 = m.iter().map(|(&j, &p)| (j as f64 - mean).powi(2) * p).sum();
            (Real::Float(mean), Real::Float(var))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::{brute_force_weights, Pattern};

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    fn w321_3() -> WeightPolynomial {
        brute_force_weights(3, &Pattern::P321).unwrap()
    }

    #[test]
    fn uniform_and_biased_examples() {
        let d = biased_distribution(&w321_3(), &Real::integer(1)).unwrap();
        let Probabilities::Exact(m) = d.probs() else {
            panic!("expected exact law")
        };
        assert_eq!(m[&1], rat(2, 3));
        assert_eq!(m[&3], rat(1, 3));

        let d = biased_distribution(&w321_3(), &Real::integer(2)).unwrap();
        let Probabilities::Exact(m) = d.probs() else {
            panic!("expected exact law")
        };
        assert_eq!(m[&1], rat(4, 12));
        assert_eq!(m[&3], rat(8, 12));
        assert_eq!(d.total_exact().unwrap(), BigRational::one());
    }

    #[test]
    fn q_one_is_uniform() {
        let w = brute_force_weights(8, &Pattern::P231).unwrap();
        let d = biased_distribution(&w, &Real::integer(1)).unwrap();
        let total = BigInt::from(w.total());
        for (j, c) in w.nonzero() {
            let Probabilities::Exact(m) = d.probs() else {
                unreachable!()
            };
            assert_eq!(
                m[&j],
                BigRational::new(BigInt::from(c.clone()), total.clone())
            );
        }
    }

    #[test]
    fn rational_bias_sums_to_one_exactly() {
        let w = brute_force_weights(10, &Pattern::P321).unwrap();
        for q in [rat(1, 2), rat(7, 3), rat(1, 1)] {
            let d = biased_distribution(&w, &Real::Exact(q)).unwrap();
            assert_eq!(d.total_exact().unwrap(), BigRational::one());
            assert!(d.support().iter().all(|j| j % 2 == 0));
        }
    }

    #[test]
    fn float_mode_agrees_with_exact() {
        let w = brute_force_weights(10, &Pattern::P132).unwrap();
        let exact = biased_distribution(&w, &Real::ratio(3, 2)).unwrap();
        let float = biased_distribution(&w, &Real::Float(1.5)).unwrap();
        let total: f64 = float.pmf_f64().iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (j, p) in exact.pmf_f64() {
            assert!((p - float.prob_f64(j)).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            biased_distribution(&w321_3(), &Real::integer(0)),
            Err(Error::NonPositiveBias(_))
        ));
        assert!(biased_distribution(&w321_3(), &Real::Float(-1.0)).is_err());
        let zero = WeightPolynomial::new(2, vec![BigUint::zero(); 3]);
        assert!(matches!(
            biased_distribution(&zero, &Real::integer(1)),
            Err(Error::ZeroWeights)
        ));
    }

    #[test]
    fn moment_examples() {
        let d = biased_distribution(&w321_3(), &Real::integer(1)).unwrap();
        let (mean, var) = exact_moments(&d);
        assert_eq!(mean, Real::Exact(rat(5, 3)));
        assert_eq!(var, Real::Exact(rat(8, 9)));

        let point = FpDistribution::from_exact_pmf(4, Real::integer(1), [(0, rat(1, 1))]);
        assert_eq!(
            exact_moments(&point),
            (Real::Exact(rat(0, 1)), Real::Exact(rat(0, 1)))
        );

        let two =
            FpDistribution::from_exact_pmf(2, Real::integer(1), [(0, rat(1, 2)), (2, rat(1, 2))]);
        assert_eq!(
            exact_moments(&two),
            (Real::Exact(rat(1, 1)), Real::Exact(rat(1, 1)))
        );
        let two_f = FpDistribution::from_float_pmf(2, 1.0, [(0, 0.5), (2, 0.5)]);
        assert_eq!(exact_moments(&two_f), (Real::Float(1.0), Real::Float(1.0)));
    }

    #[test]
    fn real_parsing() {
        assert_eq!("1/2".parse::<Real>().unwrap(), Real::ratio(1, 2));
        assert_eq!("0.5".parse::<Real>().unwrap(), Real::ratio(1, 2));
        assert_eq!("1.25".parse::<Real>().unwrap(), Real::ratio(5, 4));
        assert_eq!("2".parse::<Real>().unwrap(), Real::integer(2));
        assert_eq!(".5".parse::<Real>().unwrap(), Real::ratio(1, 2));
        assert_eq!("-3".parse::<Real>().unwrap(), Real::integer(-3));
        assert_eq!("1e-3".parse::<Real>().unwrap(), Real::Float(1e-3));
        assert!("1/0".parse::<Real>().is_err());
        assert!("abc".parse::<Real>().is_err());
        assert_eq!(Real::ratio(6, 4).to_string(), "3/2");
    }

    #[test]
    fn weight_polynomial_json_uses_decimal_strings() {
        let w = w321_3();
        let json = serde_json::to_string(&w).unwrap();
        assert_eq!(json, r#"{"n":3,"coeffs":["0","2","0","1"]}"#);
        let back: WeightPolynomial = serde_json::from_str(&json).unwrap();
        assert_eq!(back, w);
    }
}
