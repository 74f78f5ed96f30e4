//! Empirical checks on the distribution of generated matrices.
//!
//! Moments, one- and two-sample Kolmogorov–Smirnov tests with asymptotic
//! critical values, a sign-corrected QR oracle for Haar-distributed
//! orthogonal matrices, and entry-pair correlation scans over ensembles.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::givens::{materialize, UnitarySpec};
use crate::paraunitary::{coefficients, ParaunitarySpec};
use crate::prng::{derive_child_seed, SeedStream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSummary {
    pub count: usize,
    pub mean: f64,
    /// Unbiased (`n - 1`) sample variance.
    pub variance: f64,
    /// Adjusted Fisher–Pearson skewness `G1`; zero for constant samples.
    pub skewness: f64,
    /// Bias-corrected excess kurtosis `G2`; zero for constant samples.
    pub excess_kurtosis: f64,
}

pub fn entry_moments(samples: &[f64]) -> Result<SampleSummary> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let variance = m2 * nf / (nf - 1.0);
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        let g1 = m3 / m2.powf(1.5);
        let g2 = m4 / (m2 * m2) - 3.0;
        let skew = if n > 2 {
            g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0)
        } else {
            g1
        };
        let kurt = if n > 3 {
            (nf - 1.0) / ((nf - 2.0) * (nf - 3.0)) * ((nf + 1.0) * g2 + 6.0)
        } else {
            g2
        };
        (skew, kurt)
    } else {
        (0.0, 0.0)
    };
    Ok(SampleSummary {
        count: n,
        mean,
        variance,
        skewness,
        excess_kurtosis,
    })
}

/// Outcome of a Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical: f64,
    pub alpha: f64,
    pub pass: bool,
}

/// Asymptotic Kolmogorov quantile `c(α) = sqrt(-ln(α/2) / 2)`.
pub fn kolmogorov_quantile(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")))
    }
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `Φ(x / σ)`.
pub fn normal_cdf(x: f64, sigma: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / (sigma * std::f64::consts::SQRT_2)))
}

/// One-sample KS statistic against an arbitrary CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let xs = sorted(samples);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d: f64, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// One-sample KS test against `N(0, σ²)`.
pub fn ks_normal(samples: &[f64], sigma: f64, alpha: f64) -> Result<KsOutcome> {
    if samples.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(invalid("sigma", "must be positive"));
    }
    check_alpha(alpha)?;
    let statistic = ks_statistic(samples, |x| normal_cdf(x, sigma));
    let critical = kolmogorov_quantile(alpha) / (samples.len() as f64).sqrt();
    Ok(KsOutcome {
        statistic,
        critical,
        alpha,
        pass: statistic <= critical,
    })
}

/// Two-sample KS test of `a` against `b`.
pub fn two_sample_ks(a: &[f64], b: &[f64], alpha: f64) -> Result<KsOutcome> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientSamples {
            needed: 1,
            got: a.len().min(b.len()),
        });
    }
    check_alpha(alpha)?;
    let (xs, ys) = (sorted(a), sorted(b));
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut statistic: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        statistic = statistic.max((i as f64 / n - j as f64 / m).abs());
    }
    let critical = kolmogorov_quantile(alpha) * ((n + m) / (n * m)).sqrt();
    Ok(KsOutcome {
        statistic,
        critical,
        alpha,
        pass: statistic <= critical,
    })
}

/// Haar-distributed orthogonal matrix from the QR factorization of a
/// standard-normal matrix, with `R`'s diagonal signs folded into `Q`.
pub fn haar_qr(m: usize, stream: &mut SeedStream) -> Result<DMatrix<f64>> {
    if m == 0 {
        return Err(invalid("m", "must be at least 1"));
    }
    let a = DMatrix::from_fn(m, m, |_, _| StandardNormal.sample(stream));
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (k, mut col) in q.column_iter_mut().enumerate() {
        if r[(k, k)] < 0.0 {
            col.neg_mut();
        }
    }
    Ok(q)
}

/// Maximum off-diagonal entry-pair correlation across an ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationReport {
    pub max_abs_correlation: f64,
    pub pairs_tested: usize,
    /// Pairs skipped because one position never varies across the ensemble.
    pub degenerate_pairs: usize,
}

impl CorrelationReport {
    pub fn is_degenerate(&self) -> bool {
        self.pairs_tested == 0 && self.degenerate_pairs > 0
    }
}

/// Sample correlation between `pairs` randomly chosen pairs of distinct entry
/// positions, each position observed once per ensemble member.
pub fn correlation_impulse(
    ensemble: &[DMatrix<f64>],
    pairs: usize,
    stream: &mut SeedStream,
) -> Result<CorrelationReport> {
    if ensemble.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: ensemble.len(),
        });
    }
    let shape = ensemble[0].shape();
    if ensemble.iter().any(|u| u.shape() != shape) {
        return Err(invalid("ensemble", "matrices differ in shape"));
    }
    let positions = shape.0 * shape.1;
    if positions < 2 {
        return Err(invalid("ensemble", "need at least two entries per matrix"));
    }
    let n = ensemble.len() as f64;
    let centered: Vec<Vec<f64>> = (0..positions)
        .map(|p| {
            let vals: Vec<f64> = ensemble.iter().map(|u| u.as_slice()[p]).collect();
            let mean = vals.iter().sum::<f64>() / n;
            vals.into_iter().map(|v| v - mean).collect()
        })
        .collect();
    // positions that never change get norm 0 even if the mean rounds
    let norms: Vec<f64> = (0..positions)
        .map(|p| {
            let first = ensemble[0].as_slice()[p];
            if ensemble.iter().all(|u| u.as_slice()[p] == first) {
                0.0
            } else {
                centered[p].iter().map(|v| v * v).sum::<f64>().sqrt()
            }
        })
        .collect();

    let mut report = CorrelationReport {
        max_abs_correlation: 0.0,
        pairs_tested: 0,
        degenerate_pairs: 0,
    };
    let pick = |s: &mut SeedStream| (s.uniform_unit() * positions as f64) as usize % positions;
    for _ in 0..pairs {
        let a = pick(stream);
        let mut b = pick(stream);
        while b == a {
            b = pick(stream);
        }
        let denom = norms[a] * norms[b];
        if denom == 0.0 {
            report.degenerate_pairs += 1;
            continue;
        }
        let dot: f64 = centered[a].iter().zip(&centered[b]).map(|(x, y)| x * y).sum();
        report.max_abs_correlation = report.max_abs_correlation.max((dot / denom).abs());
        report.pairs_tested += 1;
    }
    Ok(report)
}

/// `count` transforms of size `m`, member `i` seeded with `derive_child_seed(root, i)`.
pub fn unitary_ensemble(m: usize, count: usize, root: u64) -> Result<Vec<DMatrix<f64>>> {
    (0..count)
        .map(|i| Ok(materialize(&UnitarySpec::new(m, derive_child_seed(root, i as u64))?)))
        .collect()
}

pub fn haar_ensemble(m: usize, count: usize, root: u64) -> Result<Vec<DMatrix<f64>>> {
    let mut stream = SeedStream::new(root);
    (0..count).map(|_| haar_qr(m, &mut stream)).collect()
}

/// Coefficient `H_index` of `count` random paraunitary systems.
pub fn coefficient_ensemble(
    m: usize,
    order: usize,
    index: usize,
    count: usize,
    root: u64,
) -> Result<Vec<DMatrix<f64>>> {
    if index > order {
        return Err(invalid("index", format!("must be <= order {order}")));
    }
    (0..count)
        .map(|i| {
            let spec = ParaunitarySpec::new(m, order, derive_child_seed(root, i as u64))?;
            Ok(coefficients(&spec).matrices()[index].clone())
        })
        .collect()
}

/// Every entry of every member, in member order.
pub fn pooled_entries(ensemble: &[DMatrix<f64>]) -> Vec<f64> {
    ensemble.iter().flat_map(|u| u.iter().copied()).collect()
}

/// One line of a statistics report.
#[derive(Debug, Clone, PartialEq)]
pub struct StatRow {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl StatRow {
    /// Passes when `statistic <= threshold`.
    pub fn at_most(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
            pass: statistic <= threshold,
        }
    }
}

pub const REPORT_HEADER: &str = "test,statistic,threshold,pass";

/// CSV with columns `test,statistic,threshold,pass`.
pub fn report_csv(rows: &[StatRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{:.9e},{:.9e},{}", r.name, r.statistic, r.threshold, r.pass);
    }
    out
}

/// Sizes, seeds and significance level of the standard battery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryConfig {
    pub seed: u64,
    pub alpha: f64,
    pub gaussian_m: usize,
    pub gaussian_count: usize,
    pub correlation_m: usize,
    pub correlation_count: usize,
    pub correlation_pairs: usize,
    pub coefficient_m: usize,
    pub coefficient_order: usize,
    pub cross_m: usize,
    pub cross_count: usize,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            seed: 0x005E_ED0F_0A7A_u64,
            alpha: 0.01,
            gaussian_m: 64,
            gaussian_count: 200,
            correlation_m: 16,
            correlation_count: 500,
            correlation_pairs: 1000,
            coefficient_m: 16,
            coefficient_order: 3,
            cross_m: 32,
            cross_count: 200,
        }
    }
}

/// Variance within ±5% of `1/M`.
pub const VARIANCE_TOLERANCE: f64 = 0.05;
/// Excess kurtosis within ±0.15.
pub const KURTOSIS_TOLERANCE: f64 = 0.15;

/// Null bound `4/√n` on the largest sample correlation over an `n`-member ensemble.
pub fn correlation_bound(members: usize) -> f64 {
    4.0 / (members as f64).sqrt()
}

pub fn gaussianity_rows(cfg: &BatteryConfig) -> Result<Vec<StatRow>> {
    let m = cfg.gaussian_m;
    let ensemble = unitary_ensemble(m, cfg.gaussian_count, derive_child_seed(cfg.seed, 1))?;
    let entries = pooled_entries(&ensemble);
    let summary = entry_moments(&entries)?;
    let ks = ks_normal(&entries, 1.0 / (m as f64).sqrt(), cfg.alpha)?;
    let mean_bound = 3.0 * (1.0 / (m as f64 * entries.len() as f64)).sqrt();
    Ok(vec![
        StatRow::at_most(
            format!("entry_variance_rel_dev_m{m}"),
            (summary.variance * m as f64 - 1.0).abs(),
            VARIANCE_TOLERANCE,
        ),
        StatRow::at_most(format!("entry_mean_abs_m{m}"), summary.mean.abs(), mean_bound),
        StatRow::at_most(
            format!("entry_excess_kurtosis_abs_m{m}"),
            summary.excess_kurtosis.abs(),
            KURTOSIS_TOLERANCE,
        ),
        StatRow::at_most(format!("ks_normal_m{m}"), ks.statistic, ks.critical),
    ])
}

pub fn correlation_rows(cfg: &BatteryConfig) -> Result<Vec<StatRow>> {
    let bound = correlation_bound(cfg.correlation_count);
    let mut stream = SeedStream::new(derive_child_seed(cfg.seed, 2));
    let ensemble = unitary_ensemble(cfg.correlation_m, cfg.correlation_count, derive_child_seed(cfg.seed, 3))?;
    let unitary = correlation_impulse(&ensemble, cfg.correlation_pairs, &mut stream)?;
    let coeffs = coefficient_ensemble(
        cfg.coefficient_m,
        cfg.coefficient_order,
        cfg.coefficient_order / 2,
        cfg.correlation_count,
        derive_child_seed(cfg.seed, 4),
    )?;
    let para = correlation_impulse(&coeffs, cfg.correlation_pairs, &mut stream)?;
    Ok(vec![
        StatRow::at_most(
            format!("max_entry_correlation_m{}", cfg.correlation_m),
            unitary.max_abs_correlation,
            bound,
        ),
        StatRow::at_most(
            format!(
                "max_coefficient_correlation_m{}_k{}",
                cfg.coefficient_m, cfg.coefficient_order
            ),
            para.max_abs_correlation,
            bound,
        ),
    ])
}

pub fn cross_method_rows(cfg: &BatteryConfig) -> Result<Vec<StatRow>> {
    let m = cfg.cross_m;
    let givens = pooled_entries(&unitary_ensemble(m, cfg.cross_count, derive_child_seed(cfg.seed, 5))?);
    let haar = pooled_entries(&haar_ensemble(m, cfg.cross_count, derive_child_seed(cfg.seed, 6))?);
    let ks = two_sample_ks(&givens, &haar, cfg.alpha)?;
    Ok(vec![StatRow::at_most(
        format!("two_sample_ks_givens_vs_haar_m{m}"),
        ks.statistic,
        ks.critical,
    )])
}

/// The full battery in a fixed order.
pub fn default_battery(cfg: &BatteryConfig) -> Result<Vec<StatRow>> {
    let mut rows = gaussianity_rows(cfg)?;
    rows.extend(correlation_rows(cfg)?);
    rows.extend(cross_method_rows(cfg)?);
    Ok(rows)
}
