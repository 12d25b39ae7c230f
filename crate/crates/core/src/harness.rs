//! Convergence experiments: exact finite-`n` laws against their limits.
//!
//! Each runner builds the exact law of `fp` for every `n` in a sweep,
//! rescales it the way the corresponding limit statement does, and records a
//! TV or KS distance together with the exact mean and variance. Absolute
//! thresholds are attached as [`Check`]s only from the sizes listed in
//! [`thresholds`]; smaller `n` only feed the trend check.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{biased_distribution, exact_moments, FpDistribution, Real, WeightPolynomial};
use crate::error::{Error, Result};
use crate::limits::{
    ks_distance, monotone_parity_mass, stated_monotone_mass, tv_distance, xk_weighted_sample,
    ClassConstants, LimitLaw, Parity,
};
use crate::perm::{brute_force_weights, Pattern};
use crate::series::{
    central_binomial, class231_row, class231_rows_at, expand_class231, expand_class321, path_row,
    path_rows_at, path_weights, SeriesTable, SigmaClass, MAX_PATH_ROWS, MAX_POLY_ROWS,
};
use crate::shape::{max_monotone_n, monotone_weights, Direction};

/// Pinned thresholds. These are artifact choices: the limit statements give
/// no rates.
pub mod thresholds {
    /// Monotone increasing patterns: TV from `n ≥ 40`.
    pub const T1_MIN_N: usize = 40;
    pub const T1_TV: f64 = 0.02;
    /// Monotone decreasing, even `k`: KS from `n ≥ 400`.
    pub const T2_EVEN_MIN_N: usize = 400;
    pub const T2_EVEN_KS: f64 = 0.08;
    /// Monotone decreasing, odd `k`: KS from `n ≥ 120`.
    pub const T2_ODD_MIN_N: usize = 120;
    pub const T2_ODD_KS: f64 = 0.1;
    /// Class 321, `q < 1`: TV from `n ≥ 100`.
    pub const T3A_MIN_N: usize = 100;
    pub const T3A_TV: f64 = 0.02;
    /// Class 321, `q = 1`: KS from `n ≥ 2000`.
    pub const T3B_MIN_N: usize = 2000;
    pub const T3B_KS: f64 = 0.03;
    /// Class 321, `q > 1`, from `n ≥ 500`.
    pub const T3C_MIN_N: usize = 500;
    pub const T3C_MEAN_REL: f64 = 0.01;
    pub const T3C_WIN_REL: f64 = 0.05;
    pub const T3C_LOSE_REL: f64 = 0.20;
    pub const T3C_KS: f64 = 0.05;
    /// Class 231, from `n ≥ 500`.
    pub const T4_MIN_N: usize = 500;
    pub const T4_MEAN_REL: f64 = 0.01;
    pub const T4_VAR_REL: f64 = 0.03;
    pub const T4_KS: f64 = 0.05;
    /// Allowed increase between consecutive distances of a sweep.
    pub const TREND_NOISE_EXACT: f64 = 0.005;
    pub const TREND_NOISE_MONTE_CARLO: f64 = 0.01;
    /// Default Monte Carlo size for the GOE limit.
    pub const DEFAULT_SAMPLES: usize = 1_000_000;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theorem {
    /// Increasing monotone pattern, fixed bias.
    T1,
    /// Decreasing monotone pattern, bias `q^{√(k/n)}`.
    T2,
    /// Class 321, `q < 1`. `t3` parses here; [`run_t3`] picks the regime from `q`.
    #[serde(alias = "t3")]
    T3a,
    /// Class 321, `q = 1`.
    T3b,
    /// Class 321, `q > 1`.
    T3c,
    /// Class 231.
    T4,
    /// Engine equivalence self-test.
    Selftest,
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

impl FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.trim().to_ascii_lowercase())).map_err(
            |_| Error::Parse {
                input: s.to_string(),
                what: "theorem (t1, t2, t3, t3a, t3b, t3c, t4)",
            },
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Bruteforce,
    Gf,
    Path,
    Shape,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Bruteforce => "bruteforce",
            Engine::Gf => "gf",
            Engine::Path => "path",
            Engine::Shape => "shape",
        })
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bruteforce" | "brute" => Ok(Engine::Bruteforce),
            "gf" => Ok(Engine::Gf),
            "path" => Ok(Engine::Path),
            "shape" => Ok(Engine::Shape),
            _ => Err(Error::Parse {
                input: s.to_string(),
                what: "engine (bruteforce, gf, path, shape)",
            }),
        }
    }
}

/// What the experiment is about: a length-three class or a monotone pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    Class(SigmaClass),
    Monotone { k: usize, direction: Direction },
    AllEngines,
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Class(c) => write!(f, "{c}"),
            Subject::Monotone { k, direction } => write!(f, "{direction}-k{k}"),
            Subject::AllEngines => f.write_str("all"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub theorem: Theorem,
    pub subject: Subject,
    pub q: Real,
    pub n_list: Vec<usize>,
    pub engine: Engine,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub parity: Option<Parity>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub samples: Option<usize>,
    pub seed: u64,
}

impl ExperimentSpec {
    /// Engine/pattern compatibility and size guards.
    pub fn validate(&self) -> Result<()> {
        let incompatible = |what: String| Error::IncompatibleEngine {
            engine: self.engine.to_string(),
            what,
        };
        if !self.q.is_positive() {
            return Err(Error::NonPositiveBias(self.q.to_string()));
        }
        let max_n = self.n_list.iter().copied().max().unwrap_or(0);
        match (&self.subject, self.engine) {
            (Subject::AllEngines, _) => {}
            (Subject::Monotone { k, .. }, Engine::Shape) => {
                if max_n > max_monotone_n(*k) {
                    return Err(Error::out_of_range(
                        "n",
                        max_n,
                        format!("0..={} for k={k}", max_monotone_n(*k)),
                    ));
                }
            }
            (Subject::Monotone { .. }, Engine::Bruteforce)
            | (Subject::Class(_), Engine::Bruteforce) => {
                if max_n > crate::perm::MAX_BRUTE_FORCE_N {
                    return Err(Error::out_of_range("n", max_n, "0..=12 for bruteforce"));
                }
            }
            (Subject::Class(SigmaClass::Class321), Engine::Path) => {
                if max_n > MAX_PATH_ROWS {
                    return Err(Error::out_of_range(
                        "n",
                        max_n,
                        format!("0..={MAX_PATH_ROWS}"),
                    ));
                }
            }
            (Subject::Class(SigmaClass::Class321), Engine::Gf) => {
                if max_n > MAX_POLY_ROWS {
                    return Err(Error::out_of_range(
                        "n",
                        max_n,
                        format!("0..={MAX_POLY_ROWS} for gf polynomial rows"),
                    ));
                }
            }
            (Subject::Class(SigmaClass::Class231), Engine::Gf) => {
                if max_n > MAX_PATH_ROWS {
                    return Err(Error::out_of_range(
                        "n",
                        max_n,
                        format!("0..={MAX_PATH_ROWS}"),
                    ));
                }
            }
            (subject, engine) => {
                return Err(incompatible(format!("{subject} with engine {engine}")));
            }
        }
        Ok(())
    }

    /// `reports/{theorem}_{subject}_{q}_{timestamp}.json`
    pub fn default_report_path(&self, timestamp: u64) -> PathBuf {
        let q = self.q.to_string().replace('/', "over");
        PathBuf::from("reports").join(format!(
            "{}_{}_{}_{}.json",
            self.theorem, self.subject, q, timestamp
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceType {
    Tv,
    Ks,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: usize,
    pub distance: f64,
    pub distance_type: DistanceType,
    pub mean: f64,
    pub variance: f64,
    /// Row-specific diagnostics (relative errors, per-candidate KS, ...).
    #[serde(default)]
    pub extra: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adjudication {
    pub n: usize,
    /// Candidate label → relative error of `Var/n` against it.
    pub relative_errors: BTreeMap<String, f64>,
    /// The unique candidate within the win tolerance while every other
    /// misses by more than the lose tolerance; `None` if that fails.
    pub winner: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn below(name: impl Into<String>, value: f64, threshold: f64) -> Check {
        Check {
            name: name.into(),
            value,
            threshold,
            passed: value < threshold,
        }
    }

    fn flag(name: impl Into<String>, passed: bool) -> Check {
        Check {
            name: name.into(),
            value: if passed { 1.0 } else { 0.0 },
            threshold: 1.0,
            passed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub check: String,
    pub n: usize,
    pub j: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub rows: Vec<ReportRow>,
    #[serde(default)]
    pub adjudication: Vec<Adjudication>,
    pub checks: Vec<Check>,
    #[serde(default)]
    pub mismatches: Vec<Mismatch>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub vacuous: bool,
    pub version: String,
    /// Omitted unless requested, so reports stay byte-identical across runs.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_clock_ms: Option<u64>,
}

impl ExperimentReport {
    fn new(spec: ExperimentSpec) -> Self {
        ExperimentReport {
            spec,
            rows: Vec::new(),
            adjudication: Vec::new(),
            checks: Vec::new(),
            mismatches: Vec::new(),
            warnings: Vec::new(),
            vacuous: false,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_ms: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed) && self.mismatches.is_empty()
    }

    /// Pretty JSON with keys in sorted order.
    pub fn to_json(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string_pretty(&value)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Flat per-`n` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,distance,distance_type,mean,variance")?;
        for r in &self.rows {
            let ty = match r.distance_type {
                DistanceType::Tv => "tv",
                DistanceType::Ks => "ks",
                DistanceType::None => "none",
            };
            writeln!(
                out,
                "{},{},{},{},{}",
                r.n, r.distance, ty, r.mean, r.variance
            )?;
        }
        Ok(())
    }

    fn add_trend_check(&mut self, noise: f64) {
        let mut rows: Vec<&ReportRow> = self
            .rows
            .iter()
            .filter(|r| r.distance_type != DistanceType::None)
            .collect();
        rows.sort_by_key(|r| r.n);
        let worst = rows
            .windows(2)
            .map(|w| w[1].distance - w[0].distance)
            .fold(f64::NEG_INFINITY, f64::max);
        if worst.is_finite() {
            self.checks.push(Check::below(
                "distance non-increasing in n (max rise)",
                worst,
                noise,
            ));
        }
    }
}

fn moments_f64(d: &FpDistribution) -> (f64, f64) {
    let (m, v) = exact_moments(d);
    (m.to_f64(), v.to_f64())
}

fn relative_error(value: f64, target: f64) -> f64 {
    ((value - target) / target).abs()
}

fn timed<F: FnOnce() -> Result<ExperimentReport>>(f: F) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut report = f()?;
    if std::env::var_os("FPBIAS_REPORT_TIMING").is_some() {
        report.wall_clock_ms = Some(start.elapsed().as_millis() as u64);
    }
    Ok(report)
}

/// Increasing monotone pattern of length `k + 1` at fixed bias `q`: TV
/// against `∝ qⁱ C(k,i)` on the parity class, for each `n` of that parity.
pub fn run_t1(k: usize, q: &Real, parity: Parity, n_list: &[usize]) -> Result<ExperimentReport> {
    timed(|| {
        let spec = ExperimentSpec {
            theorem: Theorem::T1,
            subject: Subject::Monotone {
                k,
                direction: Direction::Increasing,
            },
            q: q.clone(),
            n_list: n_list.to_vec(),
            engine: Engine::Shape,
            parity: Some(parity),
            samples: None,
            seed: 0,
        };
        spec.validate()?;
        let qf = q.to_f64();
        let limit = LimitLaw::MonotoneParity { k, q: qf, parity }
            .pmf_table()
            .expect("discrete");
        let ns: Vec<usize> = n_list
            .iter()
            .copied()
            .filter(|&n| parity.matches(n))
            .collect();
        let mut report = ExperimentReport::new(spec);
        if ns.len() < n_list.len() {
            report.warnings.push(format!(
                "skipped n of the wrong parity for the {parity} limit"
            ));
        }
        let stated_mass = stated_monotone_mass(k, qf, parity);
        let discrepancy = (stated_mass - 1.0).abs();
        let rows: Vec<Result<ReportRow>> = ns
            .par_iter()
            .map(|&n| {
                let w = monotone_weights(n, k, Direction::Increasing)?;
                let d = biased_distribution(&w, q)?;
                let (mean, variance) = moments_f64(&d);
                let mut extra = BTreeMap::new();
                extra.insert("stated_normalizer_mass".into(), stated_mass);
                extra.insert("stated_normalizer_discrepancy".into(), discrepancy);
                Ok(ReportRow {
                    n,
                    distance: tv_distance(&d, &limit),
                    distance_type: DistanceType::Tv,
                    mean,
                    variance,
                    extra,
                })
            })
            .collect();
        report.rows = rows.into_iter().collect::<Result<_>>()?;
        for r in &report.rows {
            if r.n >= thresholds::T1_MIN_N {
                report.checks.push(Check::below(
                    format!("tv n={}", r.n),
                    r.distance,
                    thresholds::T1_TV,
                ));
            }
        }
        if discrepancy > 1e-12 {
            report.warnings.push(format!(
                "stated normalizer 2^(k-2)((q+1)^k+(q-1)^k) gives total mass {stated_mass} \
                 on the {parity} class (discrepancy {discrepancy}); the parity-class mass is {}",
                monotone_parity_mass(k, qf, parity)
            ));
        }
        report.add_trend_check(thresholds::TREND_NOISE_EXACT);
        Ok(report)
    })
}

/// Decreasing monotone pattern of length `k + 1` with bias `q^{√(k/n)}`:
/// KS of the rescaled law against `X_k`.
///
/// `k = 2` uses the closed-form tilted `√2·Rayleigh(1)` cdf; other `k` use a
/// weighted GOE sample of `samples` draws from `seed`.
pub fn run_t2(
    k: usize,
    q: f64,
    n_list: &[usize],
    samples: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    timed(|| {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::out_of_range("q", q, "(0, 1]"));
        }
        if k < 2 {
            return Err(Error::out_of_range("k", k, "2.."));
        }
        let spec = ExperimentSpec {
            theorem: Theorem::T2,
            subject: Subject::Monotone {
                k,
                direction: Direction::Decreasing,
            },
            q: Real::Float(q),
            n_list: n_list.to_vec(),
            engine: Engine::Shape,
            parity: None,
            samples: (k != 2).then_some(samples),
            seed,
        };
        spec.validate()?;
        let mut report = ExperimentReport::new(spec);
        let limit = if k == 2 {
            LimitLaw::TiltedRayleigh2 { q }
        } else {
            let sample = xk_weighted_sample(k, q, samples, seed)?;
            if sample.low_ess() {
                report.warnings.push(format!(
                    "low effective sample size {} of {} draws",
                    sample.ess,
                    sample.len()
                ));
            }
            report.warnings.push(format!("ess={}", sample.ess));
            LimitLaw::tilted_goe(&sample)
        };
        let rows: Vec<Result<ReportRow>> = n_list
            .par_iter()
            .map(|&n| {
                if n == 0 {
                    return Err(Error::out_of_range("n", n, "1.."));
                }
                let w = monotone_weights(n, k, Direction::Decreasing)?;
                let ratio = (k as f64 / n as f64).sqrt();
                let qn = q.powf(ratio);
                let d = biased_distribution(&w, &Real::Float(qn))?;
                let center = if k % 2 == 0 { 0.0 } else { n as f64 / k as f64 };
                let distance = ks_distance(&d, center, 1.0 / ratio, &limit)?;
                let (mean, variance) = moments_f64(&d);
                let mut extra = BTreeMap::new();
                extra.insert("q_n".into(), qn);
                Ok(ReportRow {
                    n,
                    distance,
                    distance_type: DistanceType::Ks,
                    mean,
                    variance,
                    extra,
                })
            })
            .collect();
        report.rows = rows.into_iter().collect::<Result<_>>()?;
        let (min_n, tol) = if k % 2 == 0 {
            (thresholds::T2_EVEN_MIN_N, thresholds::T2_EVEN_KS)
        } else {
            (thresholds::T2_ODD_MIN_N, thresholds::T2_ODD_KS)
        };
        for r in &report.rows {
            if r.n >= min_n {
                report
                    .checks
                    .push(Check::below(format!("ks n={}", r.n), r.distance, tol));
            }
        }
        report.add_trend_check(thresholds::TREND_NOISE_MONTE_CARLO);
        Ok(report)
    })
}

/// Class `{321, 132, 213}`; dispatches on `q` to the three regimes.
pub fn run_t3(q: &Real, n_list: &[usize]) -> Result<ExperimentReport> {
    if !q.is_positive() {
        return Err(Error::NonPositiveBias(q.to_string()));
    }
    let qf = q.to_f64();
    let theorem = if qf < 1.0 {
        Theorem::T3a
    } else if qf == 1.0 {
        Theorem::T3b
    } else {
        Theorem::T3c
    };
    timed(|| {
        let spec = ExperimentSpec {
            theorem,
            subject: Subject::Class(SigmaClass::Class321),
            q: q.clone(),
            n_list: n_list.to_vec(),
            engine: Engine::Path,
            parity: None,
            samples: None,
            seed: 0,
        };
        spec.validate()?;
        let mut report = ExperimentReport::new(spec);
        let weights = path_rows_at(n_list);
        let laws: Vec<FpDistribution> = weights
            .par_iter()
            .map(|w| biased_distribution(w, q))
            .collect::<Result<_>>()?;
        match theorem {
            Theorem::T3a => t3_subcritical(&mut report, qf, &laws),
            Theorem::T3b => t3_critical(&mut report, &laws)?,
            _ => t3_supercritical(&mut report, qf, &laws)?,
        }
        Ok(report)
    })
}

fn t3_subcritical(report: &mut ExperimentReport, q: f64, laws: &[FpDistribution]) {
    let limits: BTreeMap<Parity, _> = [Parity::Even, Parity::Odd]
        .into_iter()
        .map(|p| {
            (
                p,
                LimitLaw::NbParity { q, parity: p }
                    .pmf_table()
                    .expect("discrete"),
            )
        })
        .collect();
    report.rows = laws
        .par_iter()
        .map(|d| {
            let (mean, variance) = moments_f64(d);
            ReportRow {
                n: d.n(),
                distance: tv_distance(d, &limits[&Parity::of(d.n())]),
                distance_type: DistanceType::Tv,
                mean,
                variance,
                extra: BTreeMap::new(),
            }
        })
        .collect();
    for r in &report.rows {
        if r.n >= thresholds::T3A_MIN_N {
            report.checks.push(Check::below(
                format!("tv n={} ({})", r.n, Parity::of(r.n)),
                r.distance,
                thresholds::T3A_TV,
            ));
        }
    }
    report.add_trend_check(thresholds::TREND_NOISE_EXACT);
}

fn t3_critical(report: &mut ExperimentReport, laws: &[FpDistribution]) -> Result<()> {
    let rows: Vec<Result<ReportRow>> = laws
        .par_iter()
        .map(|d| {
            let (mean, variance) = moments_f64(d);
            let scale = (d.n().max(1) as f64).sqrt();
            Ok(ReportRow {
                n: d.n(),
                distance: ks_distance(d, 0.0, scale, &LimitLaw::Rayleigh1)?,
                distance_type: DistanceType::Ks,
                mean,
                variance,
                extra: BTreeMap::new(),
            })
        })
        .collect();
    report.rows = rows.into_iter().collect::<Result<_>>()?;
    for r in &report.rows {
        if r.n >= thresholds::T3B_MIN_N {
            report.checks.push(Check::below(
                format!("ks n={}", r.n),
                r.distance,
                thresholds::T3B_KS,
            ));
        }
    }
    report.add_trend_check(thresholds::TREND_NOISE_EXACT);
    Ok(())
}

/// Picks the unique candidate within `win` while all others exceed `lose`.
fn adjudicate(errors: &BTreeMap<String, f64>, win: f64, lose: f64) -> Option<String> {
    let winners: Vec<&String> = errors
        .iter()
        .filter(|(_, &e)| e < win)
        .map(|(l, _)| l)
        .collect();
    let [winner] = winners.as_slice() else {
        return None;
    };
    errors
        .iter()
        .filter(|(l, _)| l != winner)
        .all(|(_, &e)| e > lose)
        .then(|| (*winner).clone())
}

fn t3_supercritical(report: &mut ExperimentReport, q: f64, laws: &[FpDistribution]) -> Result<()> {
    let constants = ClassConstants::new(SigmaClass::Class321, q);
    let rows: Vec<Result<(ReportRow, Adjudication)>> = laws
        .par_iter()
        .map(|d| {
            let n = d.n() as f64;
            let (mean, variance) = moments_f64(d);
            let mut extra = BTreeMap::new();
            let mean_err = relative_error(mean / n, constants.mean_slope);
            extra.insert("mean_slope_rel_err".into(), mean_err);
            let mut errors = BTreeMap::new();
            let mut ks_by_label = BTreeMap::new();
            for (label, v) in &constants.variance_slope_candidates {
                let err = relative_error(variance / n, *v);
                errors.insert(label.clone(), err);
                extra.insert(format!("var_slope_rel_err_{label}"), err);
                let ks = ks_distance(
                    d,
                    constants.mean_slope * n,
                    (v * n).sqrt(),
                    &LimitLaw::StdNormal,
                )?;
                extra.insert(format!("ks_{label}"), ks);
                ks_by_label.insert(label.clone(), ks);
            }
            let winner = adjudicate(&errors, thresholds::T3C_WIN_REL, thresholds::T3C_LOSE_REL);
            // Report the KS of whichever candidate fits the variance best.
            let best = errors
                .iter()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(l, _)| l.clone())
                .expect("at least one candidate");
            Ok((
                ReportRow {
                    n: d.n(),
                    distance: ks_by_label[&best],
                    distance_type: DistanceType::Ks,
                    mean,
                    variance,
                    extra,
                },
                Adjudication {
                    n: d.n(),
                    relative_errors: errors,
                    winner,
                },
            ))
        })
        .collect();
    for row in rows {
        let (row, adj) = row?;
        if row.n >= thresholds::T3C_MIN_N {
            report.checks.push(Check::below(
                format!("mean slope rel err n={}", row.n),
                row.extra["mean_slope_rel_err"],
                thresholds::T3C_MEAN_REL,
            ));
            report.checks.push(Check::flag(
                format!(
                    "variance adjudication n={} winner={}",
                    row.n,
                    adj.winner.as_deref().unwrap_or("none")
                ),
                adj.winner.is_some(),
            ));
            if let Some(w) = &adj.winner {
                report.checks.push(Check::below(
                    format!("ks n={} ({w} variance)", row.n),
                    row.extra[&format!("ks_{w}")],
                    thresholds::T3C_KS,
                ));
            }
        }
        report.rows.push(row);
        report.adjudication.push(adj);
    }
    report.add_trend_check(thresholds::TREND_NOISE_EXACT);
    Ok(())
}

/// Class `{231, 312}`: mean and variance slopes and standardized KS.
pub fn run_t4(q: &Real, n_list: &[usize]) -> Result<ExperimentReport> {
    timed(|| {
        let spec = ExperimentSpec {
            theorem: Theorem::T4,
            subject: Subject::Class(SigmaClass::Class231),
            q: q.clone(),
            n_list: n_list.to_vec(),
            engine: Engine::Gf,
            parity: None,
            samples: None,
            seed: 0,
        };
        spec.validate()?;
        let qf = q.to_f64();
        let constants = ClassConstants::new(SigmaClass::Class231, qf);
        let var_slope = constants.variance_slope_candidates[0].1;
        let mut report = ExperimentReport::new(spec);
        let weights = class231_rows_at(n_list);
        let rows: Vec<Result<ReportRow>> = weights
            .par_iter()
            .map(|w| {
                let d = biased_distribution(w, q)?;
                let n = d.n() as f64;
                let (mean, variance) = moments_f64(&d);
                let mut extra = BTreeMap::new();
                extra.insert(
                    "mean_slope_rel_err".into(),
                    relative_error(mean / n, constants.mean_slope),
                );
                extra.insert(
                    "var_slope_rel_err".into(),
                    relative_error(variance / n, var_slope),
                );
                let distance = ks_distance(
                    &d,
                    constants.mean_slope * n,
                    (var_slope * n).sqrt(),
                    &LimitLaw::StdNormal,
                )?;
                Ok(ReportRow {
                    n: d.n(),
                    distance,
                    distance_type: DistanceType::Ks,
                    mean,
                    variance,
                    extra,
                })
            })
            .collect();
        report.rows = rows.into_iter().collect::<Result<_>>()?;
        for r in &report.rows {
            if r.n >= thresholds::T4_MIN_N {
                report.checks.push(Check::below(
                    format!("mean slope rel err n={}", r.n),
                    r.extra["mean_slope_rel_err"],
                    thresholds::T4_MEAN_REL,
                ));
                report.checks.push(Check::below(
                    format!("variance slope rel err n={}", r.n),
                    r.extra["var_slope_rel_err"],
                    thresholds::T4_VAR_REL,
                ));
                report.checks.push(Check::below(
                    format!("ks n={}", r.n),
                    r.distance,
                    thresholds::T4_KS,
                ));
            }
        }
        report.add_trend_check(thresholds::TREND_NOISE_EXACT);
        Ok(report)
    })
}

/// Tables substituted for the engines' own output in
/// [`cross_engine_check_with`]; used to inject faults.
#[derive(Clone, Debug, Default)]
pub struct EngineOverrides {
    pub class321: Option<SeriesTable>,
    pub class231: Option<SeriesTable>,
    pub path: Option<SeriesTable>,
}

impl EngineOverrides {
    /// Routes a loaded table to the slot matching its class.
    pub fn with_gf_table(table: SeriesTable) -> Self {
        match table.sigma_class {
            SigmaClass::Class321 => EngineOverrides {
                class321: Some(table),
                ..Default::default()
            },
            SigmaClass::Class231 => EngineOverrides {
                class231: Some(table),
                ..Default::default()
            },
        }
    }
}

pub const DEFAULT_CROSS_POLY: usize = 60;
pub const DEFAULT_CROSS_PATH: usize = 200;

/// Compares two rows coefficient by coefficient; first difference wins.
fn first_difference(
    check: &str,
    expected: &WeightPolynomial,
    found: Option<&WeightPolynomial>,
) -> Option<Mismatch> {
    let n = expected.n();
    let Some(found) = found else {
        return Some(Mismatch {
            check: check.into(),
            n,
            j: 0,
            expected: "row".into(),
            found: "missing".into(),
        });
    };
    let width = expected.coeffs().len().max(found.coeffs().len());
    (0..width).find_map(|j| {
        let e = expected.coeffs().get(j).cloned().unwrap_or_default();
        let f = found.coeffs().get(j).cloned().unwrap_or_default();
        (e != f).then(|| Mismatch {
            check: check.into(),
            n,
            j,
            expected: e.to_string(),
            found: f.to_string(),
        })
    })
}

pub fn cross_engine_check(n_max_poly: usize, n_max_path: usize) -> Result<ExperimentReport> {
    cross_engine_check_with(n_max_poly, n_max_path, EngineOverrides::default())
}

/// Brute force vs gf (`n ≤ 10`, all five length-3 patterns), path vs gf
/// (`n ≤ n_max_poly`), shape vs brute force (`n ≤ 9`, `k ≤ 4`, both
/// directions) and path row sums vs central binomials (`n ≤ n_max_path`).
/// Every range is additionally capped by `n_max_poly`.
pub fn cross_engine_check_with(
    n_max_poly: usize,
    n_max_path: usize,
    overrides: EngineOverrides,
) -> Result<ExperimentReport> {
    if n_max_poly > MAX_POLY_ROWS {
        return Err(Error::out_of_range(
            "n_max_poly",
            n_max_poly,
            format!("0..={MAX_POLY_ROWS}"),
        ));
    }
    if n_max_path > MAX_PATH_ROWS {
        return Err(Error::out_of_range(
            "n_max_path",
            n_max_path,
            format!("0..={MAX_PATH_ROWS}"),
        ));
    }
    let n_max_path = n_max_path.max(n_max_poly);
    timed(|| {
        let spec = ExperimentSpec {
            theorem: Theorem::Selftest,
            subject: Subject::AllEngines,
            q: Real::integer(1),
            n_list: vec![n_max_poly, n_max_path],
            engine: Engine::Bruteforce,
            parity: None,
            samples: None,
            seed: 0,
        };
        let mut report = ExperimentReport::new(spec);
        report.vacuous = n_max_poly == 0;

        let brute_max = n_max_poly.min(10);
        let gf321 = overrides
            .class321
            .unwrap_or_else(|| expand_class321(n_max_poly));
        let gf231 = overrides
            .class231
            .unwrap_or_else(|| expand_class231(n_max_poly));
        let path = overrides.path.unwrap_or_else(|| path_weights(n_max_path));

        let mut run = |name: &str, mismatches: Vec<Mismatch>| {
            report.checks.push(Check::flag(name, mismatches.is_empty()));
            report.mismatches.extend(mismatches);
        };

        let brute_vs_gf: Vec<Mismatch> = (0..=brute_max)
            .into_par_iter()
            .flat_map_iter(|n| {
                let mut out = Vec::new();
                for (table, class) in [
                    (&gf321, SigmaClass::Class321),
                    (&gf231, SigmaClass::Class231),
                ] {
                    for sigma in class.members() {
                        let truth = brute_force_weights(n, sigma).expect("n <= 10");
                        out.extend(first_difference(
                            &format!("gf vs bruteforce ({sigma})"),
                            &truth,
                            table.rows.get(n),
                        ));
                    }
                }
                out
            })
            .collect();
        run(
            "gf rows equal brute force, all length-3 patterns",
            brute_vs_gf,
        );

        let path_vs_gf: Vec<Mismatch> = (0..=n_max_poly)
            .filter_map(|n| match gf321.rows.get(n) {
                Some(row) => first_difference("path vs gf (c321)", row, path.rows.get(n)),
                None => Some(Mismatch {
                    check: "path vs gf (c321)".into(),
                    n,
                    j: 0,
                    expected: "row".into(),
                    found: "missing gf row".into(),
                }),
            })
            .collect();
        run("path rows equal gf rows", path_vs_gf);

        let shape_max = n_max_poly.min(9);
        let shape_vs_brute: Vec<Mismatch> = (0..=shape_max)
            .into_par_iter()
            .flat_map_iter(|n| {
                let mut out = Vec::new();
                for k in 1..=4 {
                    for (dir, pattern) in [
                        (Direction::Increasing, Pattern::Increasing(k + 1)),
                        (Direction::Decreasing, Pattern::Decreasing(k + 1)),
                    ] {
                        let truth = brute_force_weights(n, &pattern).expect("n <= 9");
                        let shape = monotone_weights(n, k, dir).expect("within guards");
                        out.extend(first_difference(
                            &format!("shape vs bruteforce ({pattern})"),
                            &truth,
                            Some(&shape),
                        ));
                    }
                }
                out
            })
            .collect();
        run("shape rows equal brute force, k <= 4", shape_vs_brute);

        let sums: Vec<Mismatch> = (0..=n_max_path)
            .filter_map(|n| {
                let expected = central_binomial(n);
                let found = path.rows.get(n).map(|r| r.total());
                (found.as_ref() != Some(&expected) || !path.rows[n].parity_holds()).then(|| {
                    Mismatch {
                        check: "path row sum vs central binomial".into(),
                        n,
                        j: 0,
                        expected: expected.to_string(),
                        found: found
                            .map(|f| f.to_string())
                            .unwrap_or_else(|| "missing".into()),
                    }
                })
            })
            .collect();
        run("path row sums equal central binomials", sums);

        if report.vacuous {
            report
                .warnings
                .push("vacuous: n_max_poly = 0 compares only the n = 0 rows".into());
        }
        Ok(report)
    })
}

/// Row `n` of the weight table for `subject`, computed by `engine`.
pub fn compute_weights(subject: &Subject, engine: Engine, n: usize) -> Result<WeightPolynomial> {
    let incompatible = || Error::IncompatibleEngine {
        engine: engine.to_string(),
        what: subject.to_string(),
    };
    match (subject, engine) {
        (Subject::Class(class), Engine::Bruteforce) => brute_force_weights(n, &class.members()[0]),
        (Subject::Monotone { k, direction }, Engine::Bruteforce) => {
            let pattern = match direction {
                Direction::Increasing => Pattern::Increasing(k + 1),
                Direction::Decreasing => Pattern::Decreasing(k + 1),
            };
            brute_force_weights(n, &pattern)
        }
        (Subject::Monotone { k, direction }, Engine::Shape) => monotone_weights(n, *k, *direction),
        (Subject::Class(SigmaClass::Class321), Engine::Gf) => {
            if n > MAX_POLY_ROWS {
                return Err(Error::out_of_range("n", n, format!("0..={MAX_POLY_ROWS}")));
            }
            Ok(expand_class321(n).rows.swap_remove(n))
        }
        (Subject::Class(SigmaClass::Class321), Engine::Path) => {
            if n > MAX_PATH_ROWS {
                return Err(Error::out_of_range("n", n, format!("0..={MAX_PATH_ROWS}")));
            }
            Ok(path_row(n))
        }
        (Subject::Class(SigmaClass::Class231), Engine::Gf) => {
            if n > MAX_PATH_ROWS {
                return Err(Error::out_of_range("n", n, format!("0..={MAX_PATH_ROWS}")));
            }
            Ok(class231_row(n))
        }
        _ => Err(incompatible()),
    }
}

/// Runs the experiment an [`ExperimentSpec`] describes.
pub fn run(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    match (spec.theorem, &spec.subject) {
        (Theorem::T1, Subject::Monotone { k, .. }) => run_t1(
            *k,
            &spec.q,
            spec.parity.unwrap_or(Parity::Even),
            &spec.n_list,
        ),
        (Theorem::T2, Subject::Monotone { k, .. }) => run_t2(
            *k,
            spec.q.to_f64(),
            &spec.n_list,
            spec.samples.unwrap_or(thresholds::DEFAULT_SAMPLES),
            spec.seed,
        ),
        (Theorem::T3a | Theorem::T3b | Theorem::T3c, _) => run_t3(&spec.q, &spec.n_list),
        (Theorem::T4, _) => run_t4(&spec.q, &spec.n_list),
        (Theorem::Selftest, _) => cross_engine_check(
            spec.n_list.first().copied().unwrap_or(DEFAULT_CROSS_POLY),
            spec.n_list.get(1).copied().unwrap_or(DEFAULT_CROSS_PATH),
        ),
        (theorem, subject) => Err(Error::IncompatibleEngine {
            engine: spec.engine.to_string(),
            what: format!("{theorem} with {subject}"),
        }),
    }
}
