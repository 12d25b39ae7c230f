//! Traceless GOE spectra and the tilted alternating-sum sampler.
//!
//! Convention: diagonal entries `N(0, 1)`, off-diagonal `N(0, 1/2)`. Under
//! this scaling the `k = 2` alternating sum `Λ₁ − Λ₂` is `√2·Rayleigh(1)`.
//! Conditioning on zero trace is done by subtracting `(tr M / k)·I`, which
//! is exact for Gaussian ensembles because the trace is independent of the
//! traceless part.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalues of a traceless GOE matrix, sorted descending.
pub fn sample_goe_traceless<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    assert!(k >= 2, "need k >= 2");
    let off_sd = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        m[(i, i)] = rng.sample::<f64, _>(StandardNormal);
        for j in i + 1..k {
            let v = off_sd * rng.sample::<f64, _>(StandardNormal);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let shift = m.trace() / k as f64;
    for i in 0..k {
        m[(i, i)] -= shift;
    }
    let mut eigs: Vec<f64> = if k == 2 {
        // Closed form for the 2×2 traceless case: ±√(a² + b²).
        let r = m[(0, 0)].hypot(m[(0, 1)]);
        vec![r, -r]
    } else {
        SymmetricEigen::new(m).eigenvalues.iter().copied().collect()
    };
    eigs.sort_by(|a, b| b.total_cmp(a));
    eigs
}

/// `Σ_j (−1)^{j+1} Λ_j` over eigenvalues sorted descending.
pub fn alternating_sum(eigs: &[f64]) -> Result<f64> {
    if eigs.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Unsorted);
    }
    Ok(eigs
        .iter()
        .enumerate()
        .map(|(j, &l)| if j % 2 == 0 { l } else { -l })
        .sum())
}

/// Draws of `S_k` with tilting weights `q^{S_k}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub k: usize,
    pub q: f64,
    pub seed: u64,
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    /// `(Σw)² / Σw²`.
    pub ess: f64,
}

impl WeightedSample {
    pub fn new(k: usize, q: f64, seed: u64, values: Vec<f64>, weights: Vec<f64>) -> Self {
        let ess = effective_sample_size(&weights);
        WeightedSample {
            k,
            q,
            seed,
            values,
            weights,
            ess,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// ESS below a tenth of the draw count.
    pub fn low_ess(&self) -> bool {
        self.ess < self.len() as f64 / 10.0
    }

    /// Concatenates two samples of the same `(k, q)`. Self-normalisation
    /// commutes with concatenation, so the merged weights need no rescaling.
    pub fn merge(mut self, other: WeightedSample) -> WeightedSample {
        assert_eq!((self.k, self.q), (other.k, other.q));
        self.values.extend(other.values);
        self.weights.extend(other.weights);
        self.ess = effective_sample_size(&self.weights);
        self
    }

    /// Weighted mean of `S_k` under the tilted law.
    pub fn tilted_mean(&self) -> f64 {
        let total: f64 = self.weights.iter().sum();
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v * w)
            .sum::<f64>()
            / total
    }

    /// CSV with a `# k=..,q=..,seed=..,ess=..` header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# k={},q={},seed={},ess={}",
            self.k, self.q, self.seed, self.ess
        )?;
        writeln!(out, "value,weight")?;
        for (v, w) in self.values.iter().zip(&self.weights) {
            writeln!(out, "{v},{w}")?;
        }
        Ok(())
    }
}

pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}

/// `count` draws of `S_k` from the traceless GOE with self-normalised weights
/// `q^{S_k}`; deterministic in `seed`.
pub fn xk_weighted_sample(k: usize, q: f64, count: usize, seed: u64) -> Result<WeightedSample> {
    if k < 2 {
        return Err(Error::out_of_range("k", k, "2.."));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::out_of_range("q", q, "(0, 1]"));
    }
    if count == 0 {
        return Err(Error::out_of_range("count", count, "1.."));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ln_q = q.ln();
    let mut values = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    for _ in 0..count {
        let eigs = sample_goe_traceless(k, &mut rng);
        let s = alternating_sum(&eigs)?;
        values.push(s);
        weights.push((s * ln_q).exp());
    }
    Ok(WeightedSample::new(k, q, seed, values, weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limits::{ks_distance_atoms, rayleigh_cdf, Cdf, WeightedEcdf};

    #[test]
    fn traceless_and_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 2..=7 {
            for _ in 0..50 {
                let eigs = sample_goe_traceless(k, &mut rng);
                assert_eq!(eigs.len(), k);
                assert!(eigs.iter().sum::<f64>().abs() < 1e-10);
                assert!(eigs.windows(2).all(|w| w[0] >= w[1]));
            }
        }
    }

    #[test]
    fn reproducible_stream() {
        let a = xk_weighted_sample(3, 0.7, 500, 11).unwrap();
        let b = xk_weighted_sample(3, 0.7, 500, 11).unwrap();
        assert_eq!(a, b);
        assert!(a
            .values
            .iter()
            .zip(&b.values)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = xk_weighted_sample(3, 0.7, 500, 12).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn alternating_sum_examples() {
        assert_eq!(alternating_sum(&[1.0, -1.0]).unwrap(), 2.0);
        assert!((alternating_sum(&[1.0, 0.2, -1.2]).unwrap() + 0.4).abs() < 1e-15);
        assert!(matches!(alternating_sum(&[0.0, 1.0]), Err(Error::Unsorted)));
    }

    #[test]
    fn even_k_sums_are_nonnegative() {
        for k in [2, 4, 6] {
            let s = xk_weighted_sample(k, 1.0, 2000, 5).unwrap();
            assert!(s.values.iter().all(|&v| v >= -1e-10));
        }
    }

    #[test]
    fn untilted_weights_are_uniform() {
        let s = xk_weighted_sample(3, 1.0, 1000, 1).unwrap();
        assert!(s.weights.iter().all(|&w| w == 1.0));
        assert!((s.ess - 1000.0).abs() < 1e-9);
        assert!(!s.low_ess());
    }

    #[test]
    fn strong_tilt_flags_low_ess() {
        let s = xk_weighted_sample(5, 1e-6, 2000, 2).unwrap();
        assert!(s.ess >= 1.0 && s.ess <= 2000.0);
        assert!(s.low_ess());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(xk_weighted_sample(1, 0.5, 10, 0).is_err());
        assert!(xk_weighted_sample(2, 1.5, 10, 0).is_err());
        assert!(xk_weighted_sample(2, 0.0, 10, 0).is_err());
        assert!(xk_weighted_sample(2, 0.5, 0, 0).is_err());
    }

    #[test]
    fn k2_is_scaled_rayleigh() {
        let count = 100_000;
        let s = xk_weighted_sample(2, 1.0, count, 99).unwrap();
        let ecdf = WeightedEcdf::from_sample(&s);
        let atoms: Vec<(f64, f64)> = ecdf
            .values()
            .iter()
            .map(|&v| (v, 1.0 / count as f64))
            .collect();
        let limit = |x: f64| rayleigh_cdf(x / std::f64::consts::SQRT_2);
        let d = ks_distance_atoms(&atoms, &limit);
        // 1% critical value of the one-sample KS statistic.
        assert!(d < 1.63 / (count as f64).sqrt(), "KS = {d}");
        assert!(ecdf.cdf(f64::INFINITY) == 1.0);
    }

    #[test]
    fn merge_concatenates() {
        let a = xk_weighted_sample(2, 0.5, 100, 1).unwrap();
        let b = xk_weighted_sample(2, 0.5, 50, 2).unwrap();
        let m = a.clone().merge(b.clone());
        assert_eq!(m.len(), 150);
        assert_eq!(&m.values[..100], &a.values[..]);
        assert_eq!(&m.weights[100..], &b.weights[..]);
    }

    #[test]
    fn csv_header() {
        let s = WeightedSample::new(2, 0.5, 7, vec![1.0, 2.0], vec![0.5, 0.25]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            format!("# k=2,q=0.5,seed=7,ess={}", s.ess)
        );
        assert_eq!(lines.next().unwrap(), "value,weight");
        assert_eq!(lines.next().unwrap(), "1,0.5");
    }
}
