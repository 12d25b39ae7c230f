use std::collections::BTreeMap;

use crate::dist::FpDistribution;
use crate::error::{Error, Result};

use super::goe::WeightedSample;

/// A pmf on the nonnegative integers, zero atoms omitted.
pub type DiscretePmf = BTreeMap<usize, f64>;

/// A right-continuous distribution function.
pub trait Cdf {
    /// `P(X ≤ x)`.
    fn cdf(&self, x: f64) -> f64;

    /// `P(X < x)`; equal to `cdf` for continuous laws.
    fn cdf_left(&self, x: f64) -> f64 {
        self.cdf(x)
    }

    /// Locations of the jumps, ascending. Empty for continuous laws.
    fn jump_points(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<F: Fn(f64) -> f64> Cdf for F {
    fn cdf(&self, x: f64) -> f64 {
        self(x)
    }
}

/// Empirical cdf of a weighted sample, weights self-normalised.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedEcdf {
    values: Vec<f64>,
    /// `cumulative[i]` = normalised weight of all values ≤ `values[i]`.
    cumulative: Vec<f64>,
}

impl WeightedEcdf {
    pub fn new(values: &[f64], weights: &[f64]) -> WeightedEcdf {
        assert_eq!(values.len(), weights.len());
        let mut pairs: Vec<(f64, f64)> = values
            .iter()
            .copied()
            .zip(weights.iter().copied())
            .filter(|&(_, w)| w > 0.0)
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let mut out_values: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut cumulative: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut running = 0.0;
        for (v, w) in pairs {
            running += w;
            if out_values.last() == Some(&v) {
                *cumulative.last_mut().expect("nonempty") = running / total;
            } else {
                out_values.push(v);
                cumulative.push(running / total);
            }
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        WeightedEcdf {
            values: out_values,
            cumulative,
        }
    }

    pub fn from_sample(sample: &WeightedSample) -> WeightedEcdf {
        WeightedEcdf::new(&sample.values, &sample.weights)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Cdf for WeightedEcdf {
    fn cdf(&self, x: f64) -> f64 {
        let idx = self.values.partition_point(|&v| v <= x);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    fn cdf_left(&self, x: f64) -> f64 {
        let idx = self.values.partition_point(|&v| v < x);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    fn jump_points(&self) -> Vec<f64> {
        self.values.clone()
    }
}

/// `½ Σ |a_j − b_j|` over the union of the supports.
pub fn tv_distance(a: &FpDistribution, b: &DiscretePmf) -> f64 {
    let a: DiscretePmf = a.pmf_f64().into_iter().collect();
    let mut sum = 0.0;
    for (j, pa) in &a {
        sum += (pa - b.get(j).copied().unwrap_or(0.0)).abs();
    }
    for (j, pb) in b {
        if !a.contains_key(j) {
            sum += pb.abs();
        }
    }
    (sum / 2.0).min(1.0)
}

/// Kolmogorov–Smirnov distance between a finite law rescaled by
/// `x ↦ (x − center) / scale` and a limit cdf.
pub fn ks_distance(
    finite: &FpDistribution,
    center: f64,
    scale: f64,
    limit: &dyn Cdf,
) -> Result<f64> {
    if !(scale > 0.0) {
        return Err(Error::NonPositiveScale(scale));
    }
    let atoms: Vec<(f64, f64)> = finite
        .pmf_f64()
        .into_iter()
        .map(|(j, p)| ((j as f64 - center) / scale, p))
        .collect();
    Ok(ks_distance_atoms(&atoms, limit))
}

/// KS distance between a discrete law given as ascending `(atom, mass)` pairs
/// and a limit cdf.
///
/// Between consecutive jumps of either function the finite cdf is flat and
/// the limit monotone, so the supremum is attained at a jump point of one of
/// them, approached from the left or taken at the point.
pub fn ks_distance_atoms(atoms: &[(f64, f64)], limit: &dyn Cdf) -> f64 {
    let xs: Vec<f64> = atoms.iter().map(|a| a.0).collect();
    let mut cumulative = Vec::with_capacity(atoms.len());
    let mut running = 0.0;
    for &(_, p) in atoms {
        running += p;
        cumulative.push(running);
    }
    let finite_cdf = |x: f64| {
        let idx = xs.partition_point(|&v| v <= x);
        if idx == 0 {
            0.0
        } else {
            cumulative[idx - 1]
        }
    };
    let finite_left = |x: f64| {
        let idx = xs.partition_point(|&v| v < x);
        if idx == 0 {
            0.0
        } else {
            cumulative[idx - 1]
        }
    };
    let gap = |x: f64| {
        let right = (finite_cdf(x) - limit.cdf(x)).abs();
        let left = (finite_left(x) - limit.cdf_left(x)).abs();
        right.max(left)
    };
    let from_atoms = xs.iter().map(|&x| gap(x)).fold(0.0, f64::max);
    let from_limit = limit.jump_points().into_iter().map(gap).fold(0.0, f64::max);
    from_atoms.max(from_limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limits::{std_normal_cdf, LimitLaw};

    fn law(pmf: &[(usize, f64)]) -> FpDistribution {
        FpDistribution::from_float_pmf(0, 1.0, pmf.iter().copied())
    }

    #[test]
    fn tv_examples() {
        let a = law(&[(0, 0.25), (2, 0.75)]);
        let same: DiscretePmf = [(0, 0.25), (2, 0.75)].into_iter().collect();
        assert_eq!(tv_distance(&a, &same), 0.0);
        let p0 = law(&[(0, 1.0)]);
        let p1: DiscretePmf = [(1, 1.0)].into_iter().collect();
        assert_eq!(tv_distance(&p0, &p1), 1.0);
        let half = law(&[(0, 0.5), (2, 0.5)]);
        let point: DiscretePmf = [(0, 1.0)].into_iter().collect();
        assert_eq!(tv_distance(&half, &point), 0.5);
    }

    #[test]
    fn ks_point_mass_vs_normal() {
        let p0 = law(&[(0, 1.0)]);
        let d = ks_distance(&p0, 0.0, 1.0, &LimitLaw::StdNormal).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        assert!(matches!(
            ks_distance(&p0, 0.0, 0.0, &LimitLaw::StdNormal),
            Err(Error::NonPositiveScale(_))
        ));
        assert!(ks_distance(&p0, 0.0, -1.0, &LimitLaw::StdNormal).is_err());
    }

    #[test]
    fn ks_of_fine_discretisation_is_small() {
        // Masses Φ(x+h/2) − Φ(x−h/2) on a grid of width h: the gap is at most
        // the largest single atom.
        let h = 0.01;
        let atoms: Vec<(f64, f64)> = (-800..=800)
            .map(|i| {
                let x = i as f64 * h;
                (x, std_normal_cdf(x + h / 2.0) - std_normal_cdf(x - h / 2.0))
            })
            .collect();
        let biggest = atoms.iter().map(|a| a.1).fold(0.0, f64::max);
        let d = ks_distance_atoms(&atoms, &LimitLaw::StdNormal);
        assert!(d <= biggest + 1e-12, "{d} > {biggest}");
    }

    #[test]
    fn ks_against_step_cdf_uses_its_jumps() {
        // Finite law at {0, 1}, limit law at {0.5}: the gap peaks at 0.5 on
        // the limit's jump, not on either finite atom.
        let atoms = [(0.0, 0.5), (1.0, 0.5)];
        let limit = WeightedEcdf::new(&[0.5], &[1.0]);
        let d = ks_distance_atoms(&atoms, &limit);
        assert!((d - 0.5).abs() < 1e-15);
        let identical = WeightedEcdf::new(&[0.0, 1.0], &[1.0, 1.0]);
        assert!(ks_distance_atoms(&atoms, &identical) < 1e-15);
    }

    #[test]
    fn weighted_ecdf_merges_ties_and_normalises() {
        let e = WeightedEcdf::new(&[2.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 1.0, 0.0]);
        assert_eq!(e.values(), &[1.0, 2.0]);
        assert!((e.cdf(1.0) - 0.5).abs() < 1e-15);
        assert_eq!(e.cdf_left(1.0), 0.0);
        assert!((e.cdf_left(2.0) - 0.5).abs() < 1e-15);
        assert_eq!(e.cdf(2.0), 1.0);
        assert_eq!(e.cdf(0.0), 0.0);
    }
}
