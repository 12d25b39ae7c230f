//! Limiting distributions of the number of fixed points, and the tools to
//! compare finite laws against them.

mod distance;
mod goe;

pub use distance::{ks_distance, ks_distance_atoms, tv_distance, Cdf, DiscretePmf, WeightedEcdf};
pub use goe::{alternating_sum, sample_goe_traceless, xk_weighted_sample, WeightedSample};

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::SigmaClass;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(i: usize) -> Parity {
        if i % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn matches(self, i: usize) -> bool {
        Parity::of(i) == self
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        })
    }
}

impl FromStr for Parity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "even" => Ok(Parity::Even),
            "odd" => Ok(Parity::Odd),
            _ => Err(Error::Parse {
                input: s.to_string(),
                what: "parity (even or odd)",
            }),
        }
    }
}

/// Negative Binomial(r = 2, p = 1 − q), `P(i) = (i+1)(1−q)² qⁱ`, conditioned
/// on the parity of `i`.
///
/// The conditioning masses are `(1−q)²(1+q²)/(1−q²)²` (even) and
/// `(1−q)²·2q/(1−q²)²` (odd), so the conditioned pmf simplifies to
/// `(i+1) qⁱ (1−q²)² / (1+q²)` and `(i+1) qⁱ (1−q²)² / (2q)`.
pub fn nb_parity_pmf(q: f64, parity: Parity, i: usize) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::out_of_range("q", q, "(0, 1)"));
    }
    if !parity.matches(i) {
        return Ok(0.0);
    }
    let scale = (1.0 - q * q).powi(2)
        / match parity {
            Parity::Even => 1.0 + q * q,
            Parity::Odd => 2.0 * q,
        };
    Ok((i as f64 + 1.0) * q.powi(i as i32) * scale)
}

fn binomial_f64(k: usize, i: usize) -> f64 {
    (0..i).fold(1.0, |acc, t| acc * (k - t) as f64 / (t + 1) as f64)
}

/// pmf `∝ qⁱ C(k, i)` on `{0..=k} ∩ parity`, normalised by the finite sum.
pub fn monotone_parity_pmf(k: usize, q: f64, parity: Parity, i: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::out_of_range("k", k, "1.."));
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::NonPositiveBias(q.to_string()));
    }
    if i > k {
        return Err(Error::out_of_range("i", i, format!("0..={k}")));
    }
    if !parity.matches(i) {
        return Ok(0.0);
    }
    let term = |t: usize| q.powi(t as i32) * binomial_f64(k, t);
    let mass: f64 = (0..=k).filter(|&t| parity.matches(t)).map(term).sum();
    Ok(term(i) / mass)
}

/// The normaliser `2^{k−2}((q+1)^k + (q−1)^k)` as printed alongside the
/// monotone-pattern limit. Kept only to quantify how far it is from the
/// actual parity-class mass.
pub fn stated_monotone_normalizer(k: usize, q: f64) -> f64 {
    2f64.powi(k as i32 - 2) * ((q + 1.0).powi(k as i32) + (q - 1.0).powi(k as i32))
}

/// Total mass of `qⁱ C(k,i) / stated_monotone_normalizer(k, q)` over the
/// parity class. Equals 1 only when the printed constant is right.
pub fn stated_monotone_mass(k: usize, q: f64, parity: Parity) -> f64 {
    let norm = stated_monotone_normalizer(k, q);
    (0..=k)
        .filter(|&t| parity.matches(t))
        .map(|t| q.powi(t as i32) * binomial_f64(k, t) / norm)
        .sum()
}

/// Exact parity-class mass `((1+q)^k ± (1−q)^k) / 2` of `Σ qⁱ C(k,i)`.
pub fn monotone_parity_mass(k: usize, q: f64, parity: Parity) -> f64 {
    let a = (1.0 + q).powi(k as i32);
    let b = (1.0 - q).powi(k as i32);
    match parity {
        Parity::Even => (a + b) / 2.0,
        Parity::Odd => (a - b) / 2.0,
    }
}

/// `P(R ≤ x)` for `R ~ Rayleigh(1)`.
pub fn rayleigh_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-x * x / 2.0).exp_m1()
    }
}

/// `Φ(x)`.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// cdf of the law with density `∝ qˢ (s/2) e^{−s²/4}` on `s ≥ 0`: the
/// law of `√2·Rayleigh(1)` exponentially tilted by `qˢ`.
///
/// With `m = 2 ln q`, `qˢ e^{−s²/4} ∝ e^{−(s−m)²/4}` and
/// `∫ s e^{−(s−m)²/4} ds = −2e^{−(s−m)²/4} + m√π erf((s−m)/2)`.
pub fn tilted_rayleigh2_cdf(q: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let m = 2.0 * q.ln();
    let sqrt_pi = PI.sqrt();
    let at = |s: f64| 2.0 * (-(m * m) / 4.0).exp() - 2.0 * (-(s - m).powi(2) / 4.0).exp();
    // erf((x−m)/2) − erf(−m/2), written through erfc to stay accurate.
    let erf_part = |s: f64| erfc(-m / 2.0) - erfc((s - m) / 2.0);
    let partial = at(x) + m * sqrt_pi * erf_part(x);
    let total = 2.0 * (-(m * m) / 4.0).exp() + m * sqrt_pi * erfc(-m / 2.0);
    (partial / total).clamp(0.0, 1.0)
}

/// The limiting laws, one variant per limit statement.
#[derive(Clone, Debug)]
pub enum LimitLaw {
    /// Parity-conditioned Negative Binomial(2, 1 − q), `0 < q < 1`.
    NbParity {
        q: f64,
        parity: Parity,
    },
    /// `∝ qⁱ C(k,i)` on the parity class (numerically normalised).
    MonotoneParity {
        k: usize,
        q: f64,
        parity: Parity,
    },
    Rayleigh1,
    StdNormal,
    /// Closed-form `X₂`: `√2·Rayleigh(1)` tilted by `qˢ`.
    TiltedRayleigh2 {
        q: f64,
    },
    /// `X_k` approximated by a self-normalised weighted GOE sample.
    TiltedAlternatingGoe {
        k: usize,
        q: f64,
        ecdf: WeightedEcdf,
    },
}

/// Atoms beyond this index carry less than 1e-15 mass for `q ≤ 0.9`.
const NB_TRUNCATION: usize = 600;

impl LimitLaw {
    pub fn tilted_goe(sample: &WeightedSample) -> LimitLaw {
        LimitLaw::TiltedAlternatingGoe {
            k: sample.k,
            q: sample.q,
            ecdf: WeightedEcdf::from_sample(sample),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(
            self,
            LimitLaw::NbParity { .. } | LimitLaw::MonotoneParity { .. }
        )
    }

    /// pmf of a discrete variant; `None` for continuous ones.
    pub fn pmf(&self, i: usize) -> Option<f64> {
        match *self {
            LimitLaw::NbParity { q, parity } => nb_parity_pmf(q, parity, i).ok(),
            LimitLaw::MonotoneParity { k, q, parity } => {
                if i > k {
                    Some(0.0)
                } else {
                    monotone_parity_pmf(k, q, parity, i).ok()
                }
            }
            _ => None,
        }
    }

    /// Truncated pmf table of a discrete variant, zero atoms omitted.
    pub fn pmf_table(&self) -> Option<DiscretePmf> {
        let max = match *self {
            LimitLaw::NbParity { q, .. } => {
                // Tail (i+1) qⁱ below 1e-17.
                let mut i = 0usize;
                while i < NB_TRUNCATION * 20 && (i as f64 + 1.0) * q.powi(i as i32) > 1e-17 {
                    i += 1;
                }
                i.max(NB_TRUNCATION)
            }
            LimitLaw::MonotoneParity { k, .. } => k,
            _ => return None,
        };
        Some(
            (0..=max)
                .filter_map(|i| self.pmf(i).map(|p| (i, p)))
                .filter(|&(_, p)| p > 0.0)
                .collect(),
        )
    }
}

impl Cdf for LimitLaw {
    fn cdf(&self, x: f64) -> f64 {
        match self {
            LimitLaw::Rayleigh1 => rayleigh_cdf(x),
            LimitLaw::StdNormal => std_normal_cdf(x),
            LimitLaw::TiltedRayleigh2 { q } => tilted_rayleigh2_cdf(*q, x),
            LimitLaw::TiltedAlternatingGoe { ecdf, .. } => ecdf.cdf(x),
            discrete => {
                if x < 0.0 {
                    return 0.0;
                }
                let table = discrete.pmf_table().expect("discrete");
                table
                    .range(..=x.floor() as usize)
                    .map(|(_, p)| p)
                    .sum::<f64>()
                    .min(1.0)
            }
        }
    }

    fn cdf_left(&self, x: f64) -> f64 {
        match self {
            LimitLaw::TiltedAlternatingGoe { ecdf, .. } => ecdf.cdf_left(x),
            d if d.is_discrete() => {
                if x <= 0.0 {
                    return 0.0;
                }
                let table = d.pmf_table().expect("discrete");
                let upper = x.ceil() as usize;
                table.range(..upper).map(|(_, p)| p).sum::<f64>().min(1.0)
            }
            other => other.cdf(x),
        }
    }

    fn jump_points(&self) -> Vec<f64> {
        match self {
            LimitLaw::TiltedAlternatingGoe { ecdf, .. } => ecdf.values().to_vec(),
            d if d.is_discrete() => d
                .pmf_table()
                .expect("discrete")
                .keys()
                .map(|&i| i as f64)
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// Mean and variance slopes attached to a length-three pattern class at bias
/// `q`, including competing variance constants where they disagree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassConstants {
    pub sigma_class: SigmaClass,
    pub q: f64,
    pub mean_slope: f64,
    /// `(label, value)`; labels are `"paper"` and `"rederived"`.
    pub variance_slope_candidates: Vec<(String, f64)>,
    pub centering: String,
}

impl ClassConstants {
    pub fn new(sigma_class: SigmaClass, q: f64) -> ClassConstants {
        let q2 = q * q;
        match sigma_class {
            SigmaClass::Class321 => ClassConstants {
                sigma_class,
                q,
                mean_slope: (q2 - 1.0) / (q2 + 1.0),
                variance_slope_candidates: vec![
                    ("paper".into(), 4.0 * q2 / (q2 + 1.0)),
                    ("rederived".into(), 4.0 * q2 / (q2 + 1.0).powi(2)),
                ],
                centering: "(fp - n(q^2-1)/(q^2+1)) / sqrt(v n)".into(),
            },
            SigmaClass::Class231 => ClassConstants {
                sigma_class,
                q,
                mean_slope: q / (q2 + 8.0).sqrt(),
                variance_slope_candidates: vec![("paper".into(), 8.0 * q / (8.0 + q2).powf(1.5))],
                centering: "(fp - n q/sqrt(q^2+8)) / sqrt(v n)".into(),
            },
        }
    }
}

/// `f''(1) + f'(1) − f'(1)²` for `f(u) = ρ(1)/ρ(u)`, by central finite
/// differences of a user-supplied `ρ`. Used to re-derive the variance slopes.
pub fn variance_slope_from_root(rho: impl Fn(f64) -> f64) -> (f64, f64) {
    let f = |u: f64| rho(1.0) / rho(u);
    let h = 1e-4;
    let d1 = (f(1.0 + h) - f(1.0 - h)) / (2.0 * h);
    let d2 = (f(1.0 + h) - 2.0 * f(1.0) + f(1.0 - h)) / (h * h);
    (d1, d2 + d1 - d1 * d1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nb_examples() {
        assert!((nb_parity_pmf(0.5, Parity::Even, 0).unwrap() - 0.45).abs() < 1e-15);
        assert_eq!(nb_parity_pmf(0.3, Parity::Even, 1).unwrap(), 0.0);
        assert_eq!(nb_parity_pmf(0.3, Parity::Odd, 4).unwrap(), 0.0);
        assert!(nb_parity_pmf(1.0, Parity::Even, 0).is_err());
        assert!(nb_parity_pmf(0.0, Parity::Even, 0).is_err());
        for parity in [Parity::Even, Parity::Odd] {
            let total: f64 = (0..=200)
                .map(|i| nb_parity_pmf(0.5, parity, i).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "{parity}: {total}");
        }
    }

    /// The parity-conditioned pmf reproduces the limit PGF
    /// `[1/(1−uq)² ± 1/(1+uq)²] / [1/(1−q)² ± 1/(1+q)²]`.
    #[test]
    fn nb_matches_ratio_of_pgfs() {
        for q in [0.2, 0.5, 0.8] {
            for u in [0.3f64, 0.7, 1.0] {
                for (parity, sign) in [(Parity::Even, 1.0), (Parity::Odd, -1.0)] {
                    let from_pmf: f64 = (0..=300)
                        .map(|i| u.powi(i) * nb_parity_pmf(q, parity, i as usize).unwrap())
                        .sum();
                    let closed = (1.0 / (1.0 - u * q).powi(2) + sign / (1.0 + u * q).powi(2))
                        / (1.0 / (1.0 - q).powi(2) + sign / (1.0 + q).powi(2));
                    assert!((from_pmf - closed).abs() < 1e-9, "q={q} u={u} {parity}");
                }
            }
        }
    }

    #[test]
    fn monotone_examples() {
        let p = |k, q, parity, i| monotone_parity_pmf(k, q, parity, i).unwrap();
        assert!((p(2, 1.0, Parity::Even, 0) - 0.5).abs() < 1e-15);
        assert!((p(2, 1.0, Parity::Even, 2) - 0.5).abs() < 1e-15);
        assert_eq!(p(1, 3.0, Parity::Even, 0), 1.0);
        assert!((p(3, 2.0, Parity::Odd, 1) - 3.0 / 7.0).abs() < 1e-15);
        assert_eq!(p(3, 2.0, Parity::Odd, 2), 0.0);
        assert!(monotone_parity_pmf(3, 2.0, Parity::Odd, 4).is_err());
        assert!(monotone_parity_pmf(0, 2.0, Parity::Odd, 0).is_err());
    }

    #[test]
    fn monotone_sums_to_one_and_mass_formula() {
        for k in 1..=6 {
            for q in [0.25, 1.0, 2.0, 5.0] {
                for parity in [Parity::Even, Parity::Odd] {
                    let total: f64 = (0..=k)
                        .map(|i| monotone_parity_pmf(k, q, parity, i).unwrap())
                        .sum();
                    assert!((total - 1.0).abs() < 1e-12);
                    let direct: f64 = (0..=k)
                        .filter(|&i| parity.matches(i))
                        .map(|i| q.powi(i as i32) * binomial_f64(k, i))
                        .sum();
                    let mass = monotone_parity_mass(k, q, parity);
                    assert!((direct - mass).abs() < 1e-9 * mass.max(1.0));
                }
            }
        }
    }

    #[test]
    fn stated_normalizer_fails_k1() {
        // k = 1, even class: only i = 0, mass 1 / (2^{-1} (q+1+q-1)) = 1/q.
        for q in [0.5, 2.0, 3.0] {
            let mass = stated_monotone_mass(1, q, Parity::Even);
            assert!((mass - 1.0 / q).abs() < 1e-14);
        }
    }

    #[test]
    fn rayleigh_and_normal() {
        assert_eq!(rayleigh_cdf(0.0), 0.0);
        assert_eq!(rayleigh_cdf(-3.0), 0.0);
        assert!((rayleigh_cdf(1.0) - (1.0 - (-0.5f64).exp())).abs() < 1e-15);
        assert!((rayleigh_cdf(40.0) - 1.0).abs() < 1e-15);
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!((std_normal_cdf(1.959964) - 0.975).abs() < 1e-6);
        for x in [0.1, 0.7, 1.3, 2.9, 6.0] {
            assert!((std_normal_cdf(x) + std_normal_cdf(-x) - 1.0).abs() < 1e-15);
        }
        // Reference values of Φ.
        assert!((std_normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-13);
        assert!((std_normal_cdf(-3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-13);
    }

    /// Composite Simpson on the unnormalised tilted density, independent of
    /// the erf closed form.
    fn tilted_cdf_by_quadrature(q: f64, x: f64) -> f64 {
        let density = |s: f64| q.powf(s) * s / 2.0 * (-s * s / 4.0).exp();
        let simpson = |a: f64, b: f64, steps: usize| {
            let h = (b - a) / steps as f64;
            let mut acc = density(a) + density(b);
            for i in 1..steps {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * density(a + i as f64 * h);
            }
            acc * h / 3.0
        };
        simpson(0.0, x, 20_000) / simpson(0.0, 40.0, 200_000)
    }

    #[test]
    fn tilted_closed_form_matches_quadrature() {
        for q in [0.1, 0.5, 0.9, 1.0] {
            for x in [0.2, 0.8, 1.5, 2.5, 4.0, 7.0] {
                let a = tilted_rayleigh2_cdf(q, x);
                let b = tilted_cdf_by_quadrature(q, x);
                assert!((a - b).abs() < 1e-10, "q={q} x={x}: {a} vs {b}");
            }
        }
        // q = 1 is √2·Rayleigh(1).
        for x in [0.5, 1.0, 3.0] {
            let r = rayleigh_cdf(x / std::f64::consts::SQRT_2);
            assert!((tilted_rayleigh2_cdf(1.0, x) - r).abs() < 1e-14);
        }
    }

    #[test]
    fn discrete_limit_cdf_steps() {
        let law = LimitLaw::MonotoneParity {
            k: 2,
            q: 1.0,
            parity: Parity::Even,
        };
        assert_eq!(law.cdf(-0.5), 0.0);
        assert!((law.cdf(0.0) - 0.5).abs() < 1e-15);
        assert_eq!(law.cdf_left(0.0), 0.0);
        assert!((law.cdf(1.9) - 0.5).abs() < 1e-15);
        assert!((law.cdf_left(2.0) - 0.5).abs() < 1e-15);
        assert!((law.cdf(2.0) - 1.0).abs() < 1e-15);
        assert_eq!(law.jump_points(), vec![0.0, 2.0]);
        let nb = LimitLaw::NbParity {
            q: 0.5,
            parity: Parity::Odd,
        };
        let table = nb.pmf_table().unwrap();
        assert!((table.values().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(table.keys().all(|i| i % 2 == 1));
    }

    #[test]
    fn class_constants_rederive() {
        for q in [1.5, 2.0, 3.0] {
            let c = ClassConstants::new(SigmaClass::Class321, q);
            let rho = |u: f64| u * q / (u * u * q * q + 1.0);
            let (d1, v) = variance_slope_from_root(rho);
            assert!((d1 - c.mean_slope).abs() < 1e-7);
            let rederived = c.variance_slope_candidates[1].1;
            let stated = c.variance_slope_candidates[0].1;
            assert!((v - rederived).abs() < 1e-6, "q={q}: {v} vs {rederived}");
            assert!((v - stated).abs() > 0.1);
        }
        for q in [0.5, 1.0, 2.0] {
            let c = ClassConstants::new(SigmaClass::Class231, q);
            let rho = |u: f64| (-q * u + (q * q * u * u + 8.0).sqrt()) / 4.0;
            let (d1, v) = variance_slope_from_root(rho);
            assert!((d1 - c.mean_slope).abs() < 1e-7);
            assert!((v - c.variance_slope_candidates[0].1).abs() < 1e-6);
        }
        let c = ClassConstants::new(SigmaClass::Class231, 1.0);
        assert!((c.mean_slope - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.variance_slope_candidates[0].1 - 8.0 / 27.0).abs() < 1e-15);
    }
}
