//! Monte Carlo size and power of the T², U and W tests.
//!
//! Critical values are the empirical `(1 − α)` quantiles of each statistic
//! under `θ = 0`; each test is calibrated on its own substream family, and the
//! power estimates run on yet another family shared by all three tests (one
//! per grid point), so the tests see the same simulated datasets.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::machine;
use crate::matrix::PartitionedSpdMatrix;
use crate::stats::{compute_statistics, invariant_params, SufficientStats, TestId, TestStatistics};
use crate::streams::{domain, standard_normal_vector, substream};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Singular-scatter redraws tolerated per replicate.
const MAX_RESAMPLES: usize = 1_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub reps: usize,
    pub n: usize,
    pub alpha: f64,
    pub sigma: PartitionedSpdMatrix,
    pub theta_grid: Vec<DVector<f64>>,
}

impl SimConfig {
    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    pub fn split(&self) -> usize {
        self.sigma.split()
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.n < self.dim() + 1 {
            return Err(Error::Config(format!("n = {} must be at least p + 1 = {}", self.n, self.dim() + 1)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if let Some(t) = self.theta_grid.iter().find(|t| t.len() != self.dim()) {
            return Err(Error::Config(format!("theta of length {} in a p = {} model", t.len(), self.dim())));
        }
        if self.theta_grid.iter().flat_map(|t| t.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Config("theta grid contains a non-finite value".into()));
        }
        Ok(())
    }
}

/// Serializable description of a power study, as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSpec {
    pub n: usize,
    pub p: usize,
    pub p1: usize,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
    /// Defaults to the identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<f64>>>,
    pub theta_grid: Vec<Vec<f64>>,
}

impl PowerSpec {
    pub fn to_config(&self) -> Result<SimConfig> {
        let sigma = match &self.sigma {
            None => DMatrix::identity(self.p, self.p),
            Some(rows) => {
                if rows.len() != self.p || rows.iter().any(|r| r.len() != self.p) {
                    return Err(Error::Config(format!("sigma must be {0}x{0}", self.p)));
                }
                DMatrix::from_fn(self.p, self.p, |i, j| rows[i][j])
            }
        };
        let sigma = PartitionedSpdMatrix::new(sigma, self.p1).map_err(|e| Error::Config(format!("sigma: {e}")))?;
        let cfg = SimConfig {
            seed: self.seed,
            reps: self.reps,
            n: self.n,
            alpha: self.alpha,
            sigma,
            theta_grid: self.theta_grid.iter().map(|t| DVector::from_vec(t.clone())).collect(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Draws `θ + L·z` with `Σ = L·L'`.
#[derive(Debug, Clone)]
pub struct MvnSampler {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl MvnSampler {
    pub fn new(theta: &DVector<f64>, sigma: &PartitionedSpdMatrix) -> Result<Self> {
        if theta.len() != sigma.dim() {
            return Err(Error::Dim(format!("theta has length {}, sigma is {}x{}", theta.len(), sigma.dim(), sigma.dim())));
        }
        let chol = sigma
            .matrix()
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NonPd("sigma has no Cholesky factor".into()))?;
        Ok(Self { mean: theta.clone(), factor: chol.l() })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> DMatrix<f64> {
        let p = self.mean.len();
        let mut out = DMatrix::zeros(n, p);
        for i in 0..n {
            let z = standard_normal_vector(rng, p);
            let x = &self.mean + &self.factor * z;
            out.row_mut(i).copy_from(&x.transpose());
        }
        out
    }
}

/// `n` iid rows from `N_p(θ, Σ)`.
pub fn sample_dataset<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    theta: &DVector<f64>,
    sigma: &PartitionedSpdMatrix,
) -> Result<DMatrix<f64>> {
    Ok(MvnSampler::new(theta, sigma)?.sample(rng, n))
}

/// Statistics of one batch of replicates drawn at a single `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub stats: Vec<TestStatistics>,
    /// Datasets redrawn because their scatter matrix was singular.
    pub resamples: usize,
    /// Replicates where `T² = U + M` failed at relative `1e-10`.
    pub identity_failures: usize,
}

impl Batch {
    pub fn rejections(&self, test: TestId, critical: f64) -> usize {
        self.stats.iter().filter(|s| s.get(test) > critical).count()
    }
}

/// Simulates `reps` datasets at `θ`, replicate `r` on substream `(seed, dom, r)`.
pub fn simulate_batch(cfg: &SimConfig, theta: &DVector<f64>, dom: u64) -> Result<Batch> {
    let sampler = MvnSampler::new(theta, &cfg.sigma)?;
    let split = cfg.split();
    let results: Vec<(TestStatistics, usize)> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| -> Result<(TestStatistics, usize)> {
            let mut rng = substream(cfg.seed, dom, r as u64);
            for redraws in 0..MAX_RESAMPLES {
                let data = sampler.sample(&mut rng, cfg.n);
                match SufficientStats::from_data(&data, split) {
                    Ok(stats) => return Ok((compute_statistics(&stats)?, redraws)),
                    Err(Error::SingularScatter { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::SingularScatter { n: cfg.n, p: cfg.dim() })
        })
        .collect::<Result<_>>()?;
    let resamples = results.iter().map(|r| r.1).sum();
    let identity_failures = results
        .iter()
        .filter(|(s, _)| (s.t2 - (s.u + s.m)).abs() > 1e-10 * s.t2.abs().max(f64::MIN_POSITIVE))
        .count();
    Ok(Batch { stats: results.into_iter().map(|r| r.0).collect(), resamples, identity_failures })
}

/// Empirical `(1 − α)` quantile: the `⌈(1 − α)·R⌉`-th order statistic.
pub fn upper_quantile(values: &mut [f64], alpha: f64) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let idx = ((1.0 - alpha) * values.len() as f64).ceil() as usize;
    values[idx.clamp(1, values.len()) - 1]
}

fn calibration_domain(test: TestId) -> u64 {
    domain::CALIBRATION_BASE + test as u64
}

fn power_domain(grid_index: usize) -> u64 {
    domain::POWER_BASE + grid_index as u64
}

/// Critical value plus the bookkeeping of the null simulation that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub test: TestId,
    pub critical: f64,
    pub resamples: usize,
}

pub fn calibrate(cfg: &SimConfig, test: TestId) -> Result<Calibration> {
    cfg.validate()?;
    let batch = simulate_batch(cfg, &DVector::zeros(cfg.dim()), calibration_domain(test))?;
    let mut values: Vec<f64> = batch.stats.iter().map(|s| s.get(test)).collect();
    Ok(Calibration { test, critical: upper_quantile(&mut values, cfg.alpha), resamples: batch.resamples })
}

/// Monte Carlo `(1 − α)` point of `test` under `θ = 0`.
pub fn calibrate_critical(cfg: &SimConfig, test: TestId) -> Result<f64> {
    Ok(calibrate(cfg, test)?.critical)
}

/// Exact null critical value of `T²`: `(n−1)p/(n−p)·F_{1−α}(p, n−p)`, given the F quantile.
pub fn t2_critical_from_f(n: usize, p: usize, f_quantile: f64) -> f64 {
    (n - 1) as f64 * p as f64 / (n - p) as f64 * f_quantile
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerRow {
    pub test_id: TestId,
    pub delta1: f64,
    pub delta2: f64,
    pub power_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub reps: usize,
    pub critical_value: f64,
    pub resamples: usize,
}

impl PowerRow {
    /// Whether the Wilson intervals of two rows are disjoint.
    pub fn separated_from(&self, other: &PowerRow) -> bool {
        self.ci_low > other.ci_high || other.ci_low > self.ci_high
    }
}

fn row_for(cfg: &SimConfig, test: TestId, critical: f64, theta: &DVector<f64>, batch: &Batch) -> Result<PowerRow> {
    let params = invariant_params(theta, &cfg.sigma, cfg.n)?;
    let hits = batch.rejections(test, critical);
    let (ci_low, ci_high) = wilson_interval(hits, batch.stats.len(), Z_95);
    Ok(PowerRow {
        test_id: test,
        delta1: params.delta1,
        delta2: params.delta2,
        power_hat: hits as f64 / batch.stats.len() as f64,
        ci_low,
        ci_high,
        reps: batch.stats.len(),
        critical_value: critical,
        resamples: batch.resamples,
    })
}

fn simulate_grid(cfg: &SimConfig) -> Result<Vec<Batch>> {
    cfg.theta_grid.iter().enumerate().map(|(j, theta)| simulate_batch(cfg, theta, power_domain(j))).collect()
}

/// Rejection frequency of `{statistic > critical}` at every grid point, in grid order.
pub fn estimate_power(cfg: &SimConfig, test: TestId, critical: f64) -> Result<Vec<PowerRow>> {
    cfg.validate()?;
    if !(critical >= 0.0) {
        return Err(Error::OutOfRange(format!("critical value {critical} must be nonnegative")));
    }
    let batches = simulate_grid(cfg)?;
    cfg.theta_grid.iter().zip(&batches).map(|(theta, b)| row_for(cfg, test, critical, theta, b)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerTable {
    pub n: usize,
    pub p1: usize,
    pub p2: usize,
    pub calibrations: Vec<Calibration>,
    /// Sorted by `(test, Δ₁)`; grid order breaks ties.
    pub rows: Vec<PowerRow>,
    pub identity_failures: usize,
}

pub const TSV_HEADER: &str = "test\tn\tp1\tp2\tdelta1\tdelta2\tcritical\tpower\tci_low\tci_high\treps\tresamples";

impl PowerTable {
    pub fn row(&self, test: TestId, grid_index: usize) -> Option<&PowerRow> {
        self.rows.iter().filter(|r| r.test_id == test).nth(grid_index)
    }

    pub fn write_tsv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{TSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.test_id,
                self.n,
                self.p1,
                self.p2,
                machine(r.delta1),
                machine(r.delta2),
                machine(r.critical_value),
                machine(r.power_hat),
                machine(r.ci_low),
                machine(r.ci_high),
                r.reps,
                r.resamples
            )?;
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ASCII output")
    }
}

/// Calibrates all three tests, then estimates their power over the grid.
pub fn power_table(cfg: &SimConfig) -> Result<PowerTable> {
    cfg.validate()?;
    let calibrations = TestId::ALL.iter().map(|&t| calibrate(cfg, t)).collect::<Result<Vec<_>>>()?;
    let batches = simulate_grid(cfg)?;
    let mut rows = Vec::with_capacity(3 * batches.len());
    for cal in &calibrations {
        for (theta, batch) in cfg.theta_grid.iter().zip(&batches) {
            rows.push(row_for(cfg, cal.test, cal.critical, theta, batch)?);
        }
    }
    rows.sort_by(|a, b| a.test_id.cmp(&b.test_id).then(a.delta1.total_cmp(&b.delta1)));
    Ok(PowerTable {
        n: cfg.n,
        p1: cfg.split(),
        p2: cfg.dim() - cfg.split(),
        calibrations,
        rows,
        identity_failures: batches.iter().map(|b| b.identity_failures).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(reps: usize, n: usize, p: usize, p1: usize, grid: Vec<Vec<f64>>) -> SimConfig {
        SimConfig {
            seed: 7,
            reps,
            n,
            alpha: 0.05,
            sigma: PartitionedSpdMatrix::identity(p, p1).unwrap(),
            theta_grid: grid.into_iter().map(DVector::from_vec).collect(),
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(10, 3, 3, 1, vec![]).validate().is_err());
        assert!(cfg(0, 10, 3, 1, vec![]).validate().is_err());
        assert!(cfg(10, 10, 3, 1, vec![vec![0.0, 0.0]]).validate().is_err());
        let mut c = cfg(10, 10, 3, 1, vec![]);
        c.alpha = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn location_shift_moves_samples_exactly() {
        let sigma = PartitionedSpdMatrix::identity(2, 1).unwrap();
        let a = sample_dataset(&mut substream(1, 0, 0), 50, &DVector::zeros(2), &sigma).unwrap();
        let b = sample_dataset(&mut substream(1, 0, 0), 50, &DVector::from_vec(vec![5.0, 0.0]), &sigma).unwrap();
        let diff = b - a;
        assert!(diff.column(0).iter().all(|d| (d - 5.0).abs() < 1e-12));
        assert!(diff.column(1).iter().all(|d| *d == 0.0));
    }

    #[test]
    fn wilson_interval_brackets_estimate() {
        let (lo, hi) = wilson_interval(0, 100, Z_95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(100, 100, Z_95);
        assert!(lo > 0.95 && hi == 1.0);
        // Reference value for 50/100 computed by hand: 0.5 ± 0.0961.
        let (lo, hi) = wilson_interval(50, 100, Z_95);
        assert!((lo - 0.403832).abs() < 1e-5 && (hi - 0.596168).abs() < 1e-5);
    }

    #[test]
    fn upper_quantile_orders() {
        let mut v: Vec<f64> = (1..=100).map(f64::from).collect();
        v.reverse();
        assert_eq!(upper_quantile(&mut v, 0.05), 95.0);
        assert_eq!(upper_quantile(&mut v, 0.999), 1.0);
    }

    #[test]
    fn critical_value_vanishes_as_alpha_approaches_one() {
        let mut c = cfg(400, 10, 2, 1, vec![]);
        c.alpha = 0.999;
        let crit = calibrate_critical(&c, TestId::T2).unwrap();
        let typical = calibrate_critical(&cfg(400, 10, 2, 1, vec![]), TestId::T2).unwrap();
        assert!(crit >= 0.0 && crit < 0.02 * typical, "{crit} vs {typical}");
    }

    #[test]
    fn table_rows_are_sorted_and_bookkept() {
        let c = cfg(300, 12, 3, 1, vec![vec![0.4, 0.0, 0.0], vec![0.0, 0.0, 0.0], vec![0.0, 0.5, 0.0]]);
        let t = power_table(&c).unwrap();
        assert_eq!(t.rows.len(), 9);
        assert_eq!(t.identity_failures, 0);
        for w in t.rows.windows(2) {
            assert!(w[0].test_id < w[1].test_id || (w[0].test_id == w[1].test_id && w[0].delta1 <= w[1].delta1));
        }
        assert!(t.rows.iter().any(|r| r.delta2 > 0.0));
        for r in &t.rows {
            assert!(r.ci_low <= r.power_hat && r.power_hat <= r.ci_high);
        }
        let tsv = t.to_tsv();
        assert!(tsv.starts_with(TSV_HEADER));
        assert_eq!(tsv.lines().count(), 10);
    }
}
