//! Randomized certification of the matrix inequalities behind the U test.
//!
//! Each verifier draws `trials` independent instances, evaluates a signed
//! margin per instance (nonnegative when the inequality holds) and reports
//! the most negative one. Margins are normalized by the spectral scale of the
//! matrices being compared, so `tol` is a relative tolerance.
//!
//! Trial `i` draws from substream `(seed, LEMMA_BASE + lemma, i)`, which makes
//! every report a pure function of the configuration regardless of thread
//! count.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::matrix::{
    b_mp, b_plus, gen_inv_quadratic, loewner_compare, min_eigenpair, penrose_residuals, pseudo_inverse,
    sym_spectral_norm, PartitionedSpdMatrix,
};
use crate::stats::{compute_statistics, Region, SufficientStats};
use crate::streams::{domain, random_spd, standard_normal_matrix, standard_normal_vector, substream, unit_vector};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_STEP: f64 = 1e-3;

/// Fresh draws allowed per trial before the generator is declared broken.
const MAX_REDRAWS: usize = 10_000;
/// Interior grid for the scalar curvature scan: `β = j/16`, `j = 1..15`.
const CURVATURE_GRID: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifierConfig {
    pub seed: u64,
    pub trials: usize,
    pub dim: usize,
    pub split: usize,
    pub tol: f64,
    /// Finite-difference step for the scalar curvature checks.
    pub step: f64,
}

impl VerifierConfig {
    pub fn new(seed: u64, trials: usize, dim: usize, split: usize) -> Self {
        Self { seed, trials, dim, split, tol: DEFAULT_TOL, step: DEFAULT_STEP }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.split == 0 || self.split >= self.dim {
            return Err(Error::Config(format!("split {} must satisfy 0 < p1 < p = {}", self.split, self.dim)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol {} must be positive", self.tol)));
        }
        if !(self.step > 0.0 && self.step < 0.5) {
            return Err(Error::Config(format!("step {} must lie in (0, 0.5)", self.step)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum LemmaId {
    #[serde(rename = "L1_BPLUS_CONVEX")]
    L1BplusConvex,
    #[serde(rename = "L2_PENROSE")]
    L2Penrose,
    #[serde(rename = "L4_B_CONCAVE")]
    L4BConcave,
    #[serde(rename = "L6_QUAD_CONVEX")]
    L6QuadConvex,
    #[serde(rename = "EQ28_CHAIN")]
    MixedInverseBound,
    #[serde(rename = "EQ29_CHAIN")]
    QuadraticChain,
    #[serde(rename = "THM1_AU_CONVEX")]
    Thm1AuConvex,
    #[serde(rename = "T2_REGION_CONVEX")]
    T2RegionConvex,
    #[serde(rename = "W_REGION_NONCONVEX")]
    WRegionNonconvex,
}

impl LemmaId {
    pub const ALL: [LemmaId; 9] = [
        LemmaId::L1BplusConvex,
        LemmaId::L2Penrose,
        LemmaId::L4BConcave,
        LemmaId::L6QuadConvex,
        LemmaId::MixedInverseBound,
        LemmaId::QuadraticChain,
        LemmaId::Thm1AuConvex,
        LemmaId::T2RegionConvex,
        LemmaId::WRegionNonconvex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LemmaId::L1BplusConvex => "L1_BPLUS_CONVEX",
            LemmaId::L2Penrose => "L2_PENROSE",
            LemmaId::L4BConcave => "L4_B_CONCAVE",
            LemmaId::L6QuadConvex => "L6_QUAD_CONVEX",
            LemmaId::MixedInverseBound => "EQ28_CHAIN",
            LemmaId::QuadraticChain => "EQ29_CHAIN",
            LemmaId::Thm1AuConvex => "THM1_AU_CONVEX",
            LemmaId::T2RegionConvex => "T2_REGION_CONVEX",
            LemmaId::WRegionNonconvex => "W_REGION_NONCONVEX",
        }
    }

    /// Substream domain for this verifier's trials; trial `i` uses index `i`.
    pub fn stream_domain(self) -> u64 {
        domain::LEMMA_BASE + Self::ALL.iter().position(|&l| l == self).unwrap_or(0) as u64
    }
}

impl std::str::FromStr for LemmaId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown lemma id {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    WitnessFound,
}

impl Verdict {
    /// Whether the outcome agrees with the mathematical claim being checked.
    pub fn is_success(self) -> bool {
        matches!(self, Verdict::Pass | Verdict::WitnessFound)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifierReport {
    pub lemma_id: LemmaId,
    pub seed: u64,
    #[serde(rename = "trials")]
    pub trials_run: usize,
    pub dim: usize,
    pub split: usize,
    /// Most negative normalized margin observed.
    pub worst_violation: f64,
    pub tol: f64,
    pub verdict: Verdict,
    /// Trials whose margin fell below `−tol` (witness count for the W search).
    pub violations: usize,
    /// Most negative normalized second difference along the scalarized segments.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scalar_worst: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scalar_verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl VerifierReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

struct Outcome {
    margin: f64,
    scalar: Option<f64>,
    witness: Option<Value>,
}

fn matrix_json(a: &DMatrix<f64>) -> Value {
    Value::Array(a.row_iter().map(|r| json!(r.iter().copied().collect::<Vec<f64>>())).collect())
}

fn vector_json(v: &DVector<f64>) -> Value {
    json!(v.iter().copied().collect::<Vec<f64>>())
}

/// Runs `trial` on every index, redrawing on generation failures, and folds
/// the outcomes in index order.
fn run_trials<F>(cfg: &VerifierConfig, lemma: LemmaId, trial: F) -> Result<VerifierReport>
where
    F: Fn(&mut ChaCha8Rng, bool) -> Result<Outcome> + Sync,
{
    cfg.validate()?;
    let dom = lemma.stream_domain();
    let attempt = |i: usize, witness: bool| -> Result<Outcome> {
        let mut rng = substream(cfg.seed, dom, i as u64);
        let mut last = None;
        for _ in 0..MAX_REDRAWS {
            match trial(&mut rng, witness) {
                Ok(o) => return Ok(o),
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap_or_else(|| Error::Config("trial generation failed".into())))
    };
    let outcomes: Vec<Outcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| attempt(i, false))
        .collect::<Result<_>>()?;

    let mut worst = (f64::INFINITY, 0usize);
    let mut scalar_worst: Option<f64> = None;
    let mut violations = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.margin < worst.0 {
            worst = (o.margin, i);
        }
        if o.margin < -cfg.tol {
            violations += 1;
        }
        if let Some(s) = o.scalar {
            scalar_worst = Some(scalar_worst.map_or(s, |w: f64| w.min(s)));
        }
    }
    let verdict = if worst.0 >= -cfg.tol { Verdict::Pass } else { Verdict::Fail };
    let witness = if verdict == Verdict::Fail {
        attempt(worst.1, true)?.witness.map(|mut w| {
            w["trial"] = json!(worst.1);
            w
        })
    } else {
        None
    };
    let scalar_verdict = scalar_worst.map(|s| if s >= -cfg.tol { Verdict::Pass } else { Verdict::Fail });
    Ok(VerifierReport {
        lemma_id: lemma,
        seed: cfg.seed,
        trials_run: cfg.trials,
        dim: cfg.dim,
        split: cfg.split,
        worst_violation: worst.0,
        tol: cfg.tol,
        verdict,
        violations,
        scalar_worst,
        scalar_verdict,
        witness,
        note: None,
    })
}

fn draw_spd(rng: &mut ChaCha8Rng, cfg: &VerifierConfig) -> Result<PartitionedSpdMatrix> {
    PartitionedSpdMatrix::new(random_spd(rng, cfg.dim), cfg.split)
}

fn segment(s: &PartitionedSpdMatrix, t: &PartitionedSpdMatrix, beta: f64) -> Result<PartitionedSpdMatrix> {
    PartitionedSpdMatrix::new(s.matrix() * (1.0 - beta) + t.matrix() * beta, s.split())
}

/// Most negative `sign · Δ²g / (h²·max(scale, 1))` over the interior grid and
/// `alpha`, where `g(β) = v'·F((1−β)S + βT)·v`.
fn scalar_curvature(
    map: fn(&PartitionedSpdMatrix) -> Result<DMatrix<f64>>,
    s: &PartitionedSpdMatrix,
    t: &PartitionedSpdMatrix,
    directions: &[DVector<f64>],
    alpha: f64,
    step: f64,
    scale: f64,
    sign: f64,
) -> Result<f64> {
    let mut points: Vec<f64> = (1..CURVATURE_GRID).map(|j| j as f64 / CURVATURE_GRID as f64).collect();
    points.push(alpha.clamp(step, 1.0 - step));
    let mut worst = f64::INFINITY;
    for &beta in &points {
        let lo = map(&segment(s, t, beta - step)?)?;
        let mid = map(&segment(s, t, beta)?)?;
        let hi = map(&segment(s, t, beta + step)?)?;
        for v in directions {
            let g = |m: &DMatrix<f64>| v.dot(&(m * v));
            let second = (g(&lo) - 2.0 * g(&mid) + g(&hi)) / (step * step);
            worst = worst.min(sign * second / scale.max(1.0));
        }
    }
    Ok(worst)
}

fn segment_check(
    cfg: &VerifierConfig,
    lemma: LemmaId,
    map: fn(&PartitionedSpdMatrix) -> Result<DMatrix<f64>>,
    convex: bool,
) -> Result<VerifierReport> {
    run_trials(cfg, lemma, |rng, want_witness| {
        let s = draw_spd(rng, cfg)?;
        let t = draw_spd(rng, cfg)?;
        let alpha: f64 = rng.random_range(0.0..1.0);
        let fs = map(&s)?;
        let ft = map(&t)?;
        let fm = map(&segment(&s, &t, 1.0 - alpha)?)?;
        let chord = &fs * alpha + &ft * (1.0 - alpha);
        // Convex: chord ⪰ F(mix). Concave: F(mix) ⪰ chord.
        let (upper, lower) = if convex { (&chord, &fm) } else { (&fm, &chord) };
        let report = loewner_compare(upper, lower, cfg.tol)?;
        let scale = sym_spectral_norm(&fs) + sym_spectral_norm(&ft);
        let (_, worst_dir) = min_eigenpair(&(upper - lower));
        let random_dir = unit_vector(rng, cfg.dim);
        let sign = if convex { 1.0 } else { -1.0 };
        let scalar = scalar_curvature(map, &s, &t, &[worst_dir, random_dir], alpha, cfg.step, scale, sign)?;
        let witness = want_witness.then(|| {
            json!({
                "s": matrix_json(s.matrix()),
                "t": matrix_json(t.matrix()),
                "alpha": alpha,
                "min_eig": report.min_eig,
                "scale": report.scale,
            })
        });
        Ok(Outcome { margin: report.min_eig / scale.max(1.0), scalar: Some(scalar), witness })
    })
}

/// `α·B⁺(S) + (1−α)·B⁺(T) ⪰ B⁺(α·S + (1−α)·T)`, plus scalar convexity of
/// `β ↦ v'B⁺((1−β)S + βT)v`.
pub fn verify_bplus_convex(cfg: &VerifierConfig) -> Result<VerifierReport> {
    segment_check(cfg, LemmaId::L1BplusConvex, b_plus, true)
}

/// `B(α·S + (1−α)·T) ⪰ α·B(S) + (1−α)·B(T)`, plus scalar concavity along the segment.
pub fn verify_b_concave(cfg: &VerifierConfig) -> Result<VerifierReport> {
    segment_check(cfg, LemmaId::L4BConcave, b_mp, false)
}

/// Penrose conditions for the pair `(B⁺(S), B(S))`.
pub fn verify_penrose(cfg: &VerifierConfig) -> Result<VerifierReport> {
    run_trials(cfg, LemmaId::L2Penrose, |rng, want_witness| {
        let s = draw_spd(rng, cfg)?;
        let bp = b_plus(&s)?;
        let b = b_mp(&s)?;
        let res = penrose_residuals(&bp, &b);
        let scale = sym_spectral_norm(&bp) + sym_spectral_norm(&b);
        let witness = want_witness.then(|| {
            json!({
                "s": matrix_json(s.matrix()),
                "residuals": [res.aga, res.gag, res.ag_symmetric, res.ga_symmetric],
                "scale": scale,
            })
        });
        Ok(Outcome { margin: -res.max() / scale.max(1.0), scalar: None, witness })
    })
}

/// `f(αx + (1−α)y, αA₁ + (1−α)A₂) ≤ α·f(x, A₁) + (1−α)·f(y, A₂)` with
/// `f(x, A) = x'A⁺x`, for p.s.d. `A₁, A₂` sharing a rank-`p₁` column space
/// and `x, y` in that space.
pub fn verify_quad_convex(cfg: &VerifierConfig) -> Result<VerifierReport> {
    let r = cfg.split;
    run_trials(cfg, LemmaId::L6QuadConvex, |rng, want_witness| {
        let basis = standard_normal_matrix(rng, cfg.dim, r);
        let c1 = random_spd(rng, r);
        let c2 = random_spd(rng, r);
        let a1 = crate::matrix::symmetrize(&(&basis * c1 * basis.transpose()));
        let a2 = crate::matrix::symmetrize(&(&basis * c2 * basis.transpose()));
        let x = &basis * standard_normal_vector(rng, r);
        let y = &basis * standard_normal_vector(rng, r);
        let alpha: f64 = rng.random_range(0.0..1.0);
        let lhs = gen_inv_quadratic(&(&x * alpha + &y * (1.0 - alpha)), &(&a1 * alpha + &a2 * (1.0 - alpha)))?;
        let rhs = alpha * gen_inv_quadratic(&x, &a1)? + (1.0 - alpha) * gen_inv_quadratic(&y, &a2)?;
        let witness = want_witness.then(|| {
            json!({
                "a1": matrix_json(&a1),
                "a2": matrix_json(&a2),
                "x": vector_json(&x),
                "y": vector_json(&y),
                "alpha": alpha,
                "lhs": lhs,
                "rhs": rhs,
            })
        });
        Ok(Outcome { margin: (rhs - lhs) / rhs.abs().max(lhs.abs()).max(1.0), scalar: None, witness })
    })
}

fn mixed_b(s: &PartitionedSpdMatrix, t: &PartitionedSpdMatrix, alpha: f64) -> Result<DMatrix<f64>> {
    Ok(b_mp(s)? * alpha + b_mp(t)? * (1.0 - alpha))
}

/// `B⁺(α·S + (1−α)·T) ⪯ (α·B(S) + (1−α)·B(T))⁺`.
pub fn verify_mixed_inverse_bound(cfg: &VerifierConfig) -> Result<VerifierReport> {
    run_trials(cfg, LemmaId::MixedInverseBound, |rng, want_witness| {
        let s = draw_spd(rng, cfg)?;
        let t = draw_spd(rng, cfg)?;
        let alpha: f64 = rng.random_range(0.0..1.0);
        let upper = pseudo_inverse(&mixed_b(&s, &t, alpha)?)?;
        let lower = b_plus(&segment(&s, &t, 1.0 - alpha)?)?;
        let report = loewner_compare(&upper, &lower, cfg.tol)?;
        let witness = want_witness.then(|| {
            json!({
                "s": matrix_json(s.matrix()),
                "t": matrix_json(t.matrix()),
                "alpha": alpha,
                "min_eig": report.min_eig,
                "scale": report.scale,
            })
        });
        Ok(Outcome { margin: report.normalized_margin(), scalar: None, witness })
    })
}

/// Both steps of
/// `z'B⁺(M)z ≤ z'(α·B(S) + (1−α)·B(T))⁺z ≤ α·X̄'B⁺(S)X̄ + (1−α)·Ȳ'B⁺(T)Ȳ`
/// with `z = αX̄ + (1−α)Ȳ` and `M = αS + (1−α)T`.
pub fn verify_quadratic_chain(cfg: &VerifierConfig) -> Result<VerifierReport> {
    run_trials(cfg, LemmaId::QuadraticChain, |rng, want_witness| {
        let s = draw_spd(rng, cfg)?;
        let t = draw_spd(rng, cfg)?;
        let x = standard_normal_vector(rng, cfg.dim);
        let y = standard_normal_vector(rng, cfg.dim);
        let alpha: f64 = rng.random_range(0.0..1.0);
        let (left, middle, right) = quadratic_chain_terms(&x, &s, &y, &t, alpha)?;
        let scale = left.abs().max(middle.abs()).max(right.abs()).max(1.0);
        let margin = (middle - left).min(right - middle) / scale;
        let witness = want_witness.then(|| {
            json!({
                "s": matrix_json(s.matrix()),
                "t": matrix_json(t.matrix()),
                "x": vector_json(&x),
                "y": vector_json(&y),
                "alpha": alpha,
                "terms": [left, middle, right],
            })
        });
        Ok(Outcome { margin, scalar: None, witness })
    })
}

/// The three terms of the two-step chain, left to right.
pub fn quadratic_chain_terms(
    x: &DVector<f64>,
    s: &PartitionedSpdMatrix,
    y: &DVector<f64>,
    t: &PartitionedSpdMatrix,
    alpha: f64,
) -> Result<(f64, f64, f64)> {
    let z = x * alpha + y * (1.0 - alpha);
    let left = z.dot(&(b_plus(&segment(s, t, 1.0 - alpha)?)? * &z));
    let middle = gen_inv_quadratic(&z, &mixed_b(s, t, alpha)?)?;
    let right = alpha * x.dot(&(b_plus(s)? * x)) + (1.0 - alpha) * y.dot(&(b_plus(t)? * y));
    Ok((left, middle, right))
}

/// Sample size and threshold defining the acceptance region under test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionSetup {
    pub n: usize,
    pub k: f64,
}

impl Default for RegionSetup {
    /// `n = 2`, `k = 2`: the region `X̄'AX̄ ≤ 1` for the relevant quadratic form `A`.
    fn default() -> Self {
        Self { n: 2, k: 2.0 }
    }
}

fn draw_point(rng: &mut ChaCha8Rng, cfg: &VerifierConfig, n: usize) -> Result<SufficientStats> {
    let s = draw_spd(rng, cfg)?;
    let x = standard_normal_vector(rng, cfg.dim);
    SufficientStats::new(n, x, s)
}

fn draw_accepted(rng: &mut ChaCha8Rng, cfg: &VerifierConfig, region: Region, setup: RegionSetup) -> Result<SufficientStats> {
    for _ in 0..MAX_REDRAWS {
        let point = draw_point(rng, cfg, setup.n)?;
        if region.statistic(&point)? <= setup.k {
            return Ok(point);
        }
    }
    Err(Error::Config(format!("no accepted point in {MAX_REDRAWS} draws at k = {}", setup.k)))
}

/// Joint convex combination `(αX̄ + (1−α)Ȳ, αS + (1−α)T)` at the common `n`.
pub fn mix_points(a: &SufficientStats, b: &SufficientStats, alpha: f64) -> Result<SufficientStats> {
    if a.dim() != b.dim() || a.split() != b.split() || a.n() != b.n() {
        return Err(Error::Dim("points must share n, p and split".into()));
    }
    let x = a.xbar() * alpha + b.xbar() * (1.0 - alpha);
    let s = PartitionedSpdMatrix::new(a.scatter().matrix() * alpha + b.scatter().matrix() * (1.0 - alpha), a.split())?;
    SufficientStats::new(a.n(), x, s)
}

fn point_json(p: &SufficientStats) -> Value {
    json!({ "n": p.n(), "xbar": vector_json(p.xbar()), "s": matrix_json(p.scatter().matrix()) })
}

/// Pairs of accepted points; margin `(k − stat(mix)) / max(k, 1)`.
pub fn verify_region_convex(cfg: &VerifierConfig, region: Region, setup: RegionSetup) -> Result<VerifierReport> {
    if !(setup.k > 0.0) || setup.n < 2 {
        return Err(Error::Config("region setup needs k > 0 and n >= 2".into()));
    }
    let lemma = match region {
        Region::U => LemmaId::Thm1AuConvex,
        Region::T2 => LemmaId::T2RegionConvex,
    };
    let mut report = run_trials(cfg, lemma, |rng, want_witness| {
        let a = draw_accepted(rng, cfg, region, setup)?;
        let b = draw_accepted(rng, cfg, region, setup)?;
        let alpha: f64 = rng.random_range(0.0..1.0);
        let mid = region.statistic(&mix_points(&a, &b, alpha)?)?;
        let witness = want_witness.then(|| {
            json!({
                "first": point_json(&a),
                "second": point_json(&b),
                "alpha": alpha,
                "k": setup.k,
                "statistic_at_mix": mid,
            })
        });
        Ok(Outcome { margin: (setup.k - mid) / setup.k.max(1.0), scalar: None, witness })
    })?;
    report.note = Some(format!("region {} with n = {}, k = {}", region.name(), setup.n, setup.k));
    Ok(report)
}

/// The hand-computable witness: `n = 2`, `S = I₂`, `X̄ = (1, ±1)`.
pub fn canonical_w_points() -> (SufficientStats, SufficientStats) {
    let i2 = PartitionedSpdMatrix::identity(2, 1).expect("identity is p.d.");
    let a = SufficientStats::new(2, DVector::from_vec(vec![1.0, 1.0]), i2.clone()).expect("valid");
    let b = SufficientStats::new(2, DVector::from_vec(vec![1.0, -1.0]), i2).expect("valid");
    (a, b)
}

/// `Some((w_a, w_b, w_mid))` when both points satisfy `W ≤ k` and the midpoint does not.
pub fn w_witness(a: &SufficientStats, b: &SufficientStats, alpha: f64, k: f64) -> Result<Option<(f64, f64, f64)>> {
    let wa = compute_statistics(a)?.w;
    let wb = compute_statistics(b)?.w;
    if wa > k || wb > k {
        return Ok(None);
    }
    let wm = compute_statistics(&mix_points(a, b, alpha)?)?.w;
    Ok((wm > k).then_some((wa, wb, wm)))
}

fn w_witness_json(a: &SufficientStats, b: &SufficientStats, alpha: f64, k: f64, w: (f64, f64, f64)) -> Value {
    json!({
        "first": point_json(a),
        "second": point_json(b),
        "alpha": alpha,
        "k": k,
        "w": [w.0, w.1, w.2],
    })
}

/// Searches for two points of `{W ≤ k}` whose midpoint leaves the region.
///
/// The canonical two-dimensional pair is always checked first. The random
/// search then draws `cfg.trials` pairs at `(cfg.dim, cfg.split)` with
/// `n = 2`; the second mean reflects the covariate block of the first and
/// adds noise, which is where the region bends.
pub fn find_w_nonconvexity(cfg: &VerifierConfig, k: f64) -> Result<VerifierReport> {
    cfg.validate()?;
    if !(k > 0.0) {
        return Err(Error::Config(format!("threshold k = {k} must be positive")));
    }
    let (ca, cb) = canonical_w_points();
    let canonical = w_witness(&ca, &cb, 0.5, k)?;

    let dom = LemmaId::WRegionNonconvex.stream_domain();
    let found: Vec<Option<(f64, Value)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| -> Result<Option<(f64, Value)>> {
            let mut rng = substream(cfg.seed, dom, i as u64);
            let s = draw_spd(&mut rng, cfg)?;
            let t = draw_spd(&mut rng, cfg)?;
            let x = standard_normal_vector(&mut rng, cfg.dim);
            let mut y = standard_normal_vector(&mut rng, cfg.dim) * 0.5;
            for j in cfg.split..cfg.dim {
                y[j] -= x[j];
            }
            for j in 0..cfg.split {
                y[j] += x[j];
            }
            let alpha = 0.5;
            let a = SufficientStats::new(2, x, s)?;
            let b = SufficientStats::new(2, y, t)?;
            Ok(w_witness(&a, &b, alpha, k)?.map(|w| ((k - w.2) / k.max(1.0), w_witness_json(&a, &b, alpha, k, w))))
        })
        .collect::<Result<_>>()?;

    let mut random_count = 0;
    let mut first_random = None;
    let mut worst = f64::INFINITY;
    for (i, f) in found.into_iter().enumerate() {
        if let Some((margin, mut w)) = f {
            random_count += 1;
            worst = worst.min(margin);
            if first_random.is_none() {
                w["trial"] = json!(i);
                first_random = Some(w);
            }
        }
    }
    let mut witness = serde_json::Map::new();
    if let Some(w) = canonical {
        witness.insert("canonical".into(), w_witness_json(&ca, &cb, 0.5, k, w));
        worst = worst.min((k - w.2) / k.max(1.0));
    }
    if let Some(w) = first_random {
        witness.insert("random".into(), w);
    }
    let total = random_count + usize::from(canonical.is_some());
    let note = format!(
        "canonical witness {}; {random_count} random witness(es) in {} trials at k = {k}",
        if canonical.is_some() { "found" } else { "not found at this k" },
        cfg.trials
    );
    Ok(VerifierReport {
        lemma_id: LemmaId::WRegionNonconvex,
        seed: cfg.seed,
        trials_run: cfg.trials,
        dim: cfg.dim,
        split: cfg.split,
        worst_violation: if total > 0 { worst } else { 0.0 },
        tol: cfg.tol,
        verdict: if total > 0 { Verdict::WitnessFound } else { Verdict::Fail },
        violations: total,
        scalar_worst: None,
        scalar_verdict: None,
        witness: (!witness.is_empty()).then_some(Value::Object(witness)),
        note: Some(note),
    })
}

/// Threshold used by [`run_lemma`] for the W-region search.
pub const DEFAULT_W_THRESHOLD: f64 = 1.0;

pub fn run_lemma(cfg: &VerifierConfig, lemma: LemmaId) -> Result<VerifierReport> {
    match lemma {
        LemmaId::L1BplusConvex => verify_bplus_convex(cfg),
        LemmaId::L2Penrose => verify_penrose(cfg),
        LemmaId::L4BConcave => verify_b_concave(cfg),
        LemmaId::L6QuadConvex => verify_quad_convex(cfg),
        LemmaId::MixedInverseBound => verify_mixed_inverse_bound(cfg),
        LemmaId::QuadraticChain => verify_quadratic_chain(cfg),
        LemmaId::Thm1AuConvex => verify_region_convex(cfg, Region::U, RegionSetup::default()),
        LemmaId::T2RegionConvex => verify_region_convex(cfg, Region::T2, RegionSetup::default()),
        LemmaId::WRegionNonconvex => find_w_nonconvexity(cfg, DEFAULT_W_THRESHOLD),
    }
}
