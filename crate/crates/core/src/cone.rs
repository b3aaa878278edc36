//! Geometry of the acceptance regions.
//!
//! For fixed `S`, the slice of the `T²` region is an ellipsoid around the
//! origin, while the slice of the `U` region is a cylinder whose axis is the
//! `p₂`-dimensional subspace `{X̄ : X̄1:2 = 0}`. The probes here measure how far
//! each region extends along a ray, test membership in the dual cone of the
//! restricted alternative, and evaluate the half-spaces used to compare
//! acceptance regions.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::ser::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix::{adjusted_mean, schur_complement, sym_spectral_norm, PartitionedSpdMatrix};
use crate::stats::{accept_u, Region, SufficientStats};
use crate::streams::{domain, random_spd, standard_normal_vector, substream, unit_vector};

/// Relative size below which a quadratic form along a ray counts as zero.
pub const NULL_FORM_TOL: f64 = 1e-12;
/// Relative tolerance on `θ₁'Σ11:2⁻¹w̃₁ ≤ 0`.
pub const DUAL_CONE_TOL: f64 = 1e-10;

/// Substream index offset separating null-subspace directions from random ones.
const NULL_DIRECTION_OFFSET: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExitRadius {
    Finite(f64),
    Infinite,
}

impl ExitRadius {
    pub fn is_finite(self) -> bool {
        matches!(self, ExitRadius::Finite(_))
    }

    pub fn value(self) -> f64 {
        match self {
            ExitRadius::Finite(r) => r,
            ExitRadius::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for ExitRadius {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExitRadius::Finite(r) => s.serialize_f64(*r),
            ExitRadius::Infinite => s.serialize_str("inf"),
        }
    }
}

impl std::fmt::Display for ExitRadius {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExitRadius::Finite(r) => write!(f, "{}", crate::fmt::machine(*r)),
            ExitRadius::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ConeProbeResult {
    pub region: Region,
    #[serde(serialize_with = "serialize_vector")]
    pub direction: DVector<f64>,
    pub exit_radius: ExitRadius,
}

fn serialize_vector<S: Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

impl ConeProbeResult {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("probe results serialize")
    }
}

fn normalized(direction: &DVector<f64>) -> Result<DVector<f64>> {
    let norm = direction.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::OutOfRange("direction must be a nonzero finite vector".into()));
    }
    Ok(direction / norm)
}

/// `q(d)` such that the region's statistic at `X̄ = t·d` equals `n(n−1)·t²·q(d)`,
/// together with the scale against which `q` is judged to vanish.
fn ray_form(region: Region, d: &DVector<f64>, s: &PartitionedSpdMatrix) -> Result<(f64, f64)> {
    let s_inv = s.inverse()?;
    let scale = sym_spectral_norm(&s_inv) * d.norm_squared();
    let q = match region {
        Region::T2 => d.dot(&(&s_inv * d)),
        Region::U => {
            let adj = adjusted_mean(d, s)?;
            let chol = schur_complement(s)?.cholesky().ok_or_else(|| Error::NonPd("S11:2".into()))?;
            adj.dot(&chol.solve(&adj))
        }
    };
    Ok((q, scale))
}

/// Largest `t` with the region's statistic at `X̄ = t·direction` still `≤ k`.
pub fn region_exit_radius(
    region: Region,
    direction: &DVector<f64>,
    s: &PartitionedSpdMatrix,
    n: usize,
    k: f64,
) -> Result<ConeProbeResult> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::OutOfRange(format!("k = {k} must be positive and finite")));
    }
    if n < 2 {
        return Err(Error::OutOfRange(format!("n = {n} must be at least 2")));
    }
    if direction.len() != s.dim() {
        return Err(Error::Dim(format!("direction of length {} against a {}x{} S", direction.len(), s.dim(), s.dim())));
    }
    let d = normalized(direction)?;
    let (q, scale) = ray_form(region, &d, s)?;
    let exit_radius = if q <= NULL_FORM_TOL * scale {
        ExitRadius::Infinite
    } else {
        ExitRadius::Finite((k / ((n * (n - 1)) as f64 * q)).sqrt())
    };
    Ok(ConeProbeResult { region, direction: d, exit_radius })
}

/// A unit vector with `d₁ = S12·S22⁻¹·d₂`, so that `d1:2 = 0`.
pub fn null_direction<R: Rng + ?Sized>(rng: &mut R, s: &PartitionedSpdMatrix) -> Result<DVector<f64>> {
    let d2 = standard_normal_vector(rng, s.p2());
    let d1 = s.regression_coefficients()?.transpose() * &d2;
    let mut d = DVector::zeros(s.dim());
    d.rows_mut(0, s.split()).copy_from(&d1);
    d.rows_mut(s.split(), s.p2()).copy_from(&d2);
    normalized(&d)
}

/// Exit radii along `directions` uniformly random unit vectors; direction `i` uses
/// substream `(seed, GEOMETRY, i)`.
pub fn exit_radius_sweep(
    region: Region,
    s: &PartitionedSpdMatrix,
    n: usize,
    k: f64,
    directions: usize,
    seed: u64,
) -> Result<Vec<ConeProbeResult>> {
    (0..directions)
        .into_par_iter()
        .map(|i| {
            let d = unit_vector(&mut substream(seed, domain::GEOMETRY, i as u64), s.dim());
            region_exit_radius(region, &d, s, n, k)
        })
        .collect()
}

/// Exit radii along random directions of the subspace `{X̄1:2 = 0}`.
pub fn null_subspace_sweep(
    region: Region,
    s: &PartitionedSpdMatrix,
    n: usize,
    k: f64,
    directions: usize,
    seed: u64,
) -> Result<Vec<ConeProbeResult>> {
    (0..directions)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, domain::GEOMETRY, NULL_DIRECTION_OFFSET + i as u64);
            region_exit_radius(region, &null_direction(&mut rng, s)?, s, n, k)
        })
        .collect()
}

/// The probe matrix used by geometry sweeps: a random p.d. `S` drawn from the
/// last substream of the geometry domain.
pub fn random_probe_matrix(seed: u64, dim: usize, split: usize) -> Result<PartitionedSpdMatrix> {
    let s = random_spd(&mut substream(seed, domain::GEOMETRY, u64::MAX), dim);
    PartitionedSpdMatrix::new(s, split)
}

/// `w̃ = (w₁ − Σ12·Σ22⁻¹·w₂, w₂)`.
pub fn dual_cone_transform(w: &DVector<f64>, sigma: &PartitionedSpdMatrix) -> Result<DVector<f64>> {
    if w.len() != sigma.dim() {
        return Err(Error::Dim(format!("w has length {}, sigma is {}x{}", w.len(), sigma.dim(), sigma.dim())));
    }
    let p1 = sigma.split();
    let w2 = w.rows(p1, sigma.p2()).into_owned();
    let beta_t = sigma.regression_coefficients()?.transpose();
    let mut out = w.clone();
    let w1 = w.rows(0, p1) - &beta_t * &w2;
    out.rows_mut(0, p1).copy_from(&w1);
    Ok(out)
}

/// Whether `θ₁'Σ11:2⁻¹w̃₁ ≤ 0` for `samples` random `θ₁` and their negatives.
///
/// Since both signs of every `θ₁` are tried, this accepts exactly the `w`
/// with `w̃₁ = 0`, up to a tolerance proportional to `‖w‖` (so membership is
/// invariant under positive scaling of `w`). `θ₁` number `i` is drawn from
/// substream `(seed, DUAL_CONE, i)`.
pub fn dual_cone_membership(w: &DVector<f64>, sigma: &PartitionedSpdMatrix, samples: usize, seed: u64) -> Result<bool> {
    if samples == 0 {
        return Err(Error::OutOfRange("samples must be at least 1".into()));
    }
    let w_tilde = dual_cone_transform(w, sigma)?;
    let p1 = sigma.split();
    let schur = schur_complement(sigma)?;
    let chol = schur.clone().cholesky().ok_or_else(|| Error::NonPd("Sigma11:2".into()))?;
    let v = chol.solve(&w_tilde.rows(0, p1).into_owned());
    let beta = sigma.regression_coefficients()?;
    let w_scale = w.rows(0, p1).norm() + sym_spectral_norm(&(beta.transpose() * &beta)).sqrt() * w.rows(p1, sigma.p2()).norm();
    let inv_norm = 1.0 / sym_eigen_min(&schur);
    for i in 0..samples {
        let theta1 = standard_normal_vector(&mut substream(seed, domain::DUAL_CONE, i as u64), p1);
        let tol = DUAL_CONE_TOL * theta1.norm() * inv_norm * w_scale;
        let ip = theta1.dot(&v);
        if ip > tol || -ip > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

fn sym_eigen_min(a: &DMatrix<f64>) -> f64 {
    crate::matrix::sym_eigen(a).eigenvalues.min()
}

/// Outcome of a membership sweep against the closed-form criterion `w̃₁ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct DualConeSweep {
    pub points: usize,
    pub members: usize,
    pub mismatches: usize,
}

/// Alternates points constructed on the dual cone with generic points and
/// compares the sampled predicate against `w̃₁ = 0`.
pub fn dual_cone_sweep(sigma: &PartitionedSpdMatrix, points: usize, samples: usize, seed: u64) -> Result<DualConeSweep> {
    let beta_t = sigma.regression_coefficients()?.transpose();
    let p1 = sigma.split();
    let outcomes: Vec<(bool, bool)> = (0..points)
        .into_par_iter()
        .map(|i| -> Result<(bool, bool)> {
            let mut rng = substream(seed, domain::DUAL_CONE, NULL_DIRECTION_OFFSET + i as u64);
            let scale = 10f64.powf(rng.random_range(-3.0..3.0));
            let mut w = standard_normal_vector(&mut rng, sigma.dim()) * scale;
            if i % 2 == 0 {
                let w1 = &beta_t * w.rows(p1, sigma.p2());
                w.rows_mut(0, p1).copy_from(&w1);
            }
            let expected = i % 2 == 0;
            let member = dual_cone_membership(&w, sigma, samples, seed.wrapping_add(i as u64))?;
            Ok((member, expected))
        })
        .collect::<Result<_>>()?;
    Ok(DualConeSweep {
        points,
        members: outcomes.iter().filter(|o| o.0).count(),
        mismatches: outcomes.iter().filter(|o| o.0 != o.1).count(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HalfSpaceVariant {
    /// `nθ'Σ⁻¹X̄ − ½tr(Σ⁻¹S) > c`.
    HStar,
    /// `nθ'Σ⁻¹X̄ − ½tr[Σ⁻¹(S + nX̄X̄')] > c`.
    HA,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpaceSpec {
    pub theta: DVector<f64>,
    pub sigma: PartitionedSpdMatrix,
    pub c: f64,
    pub variant: HalfSpaceVariant,
}

impl HalfSpaceSpec {
    pub fn with_variant(&self, variant: HalfSpaceVariant) -> Self {
        Self { variant, ..self.clone() }
    }
}

/// Left-hand side of the defining inequality.
pub fn half_space_value(spec: &HalfSpaceSpec, stats: &SufficientStats) -> Result<f64> {
    let p = stats.dim();
    if spec.theta.len() != p || spec.sigma.dim() != p {
        return Err(Error::Dim(format!(
            "theta has length {}, sigma is {}x{}, data has p = {p}",
            spec.theta.len(),
            spec.sigma.dim(),
            spec.sigma.dim()
        )));
    }
    let n = stats.n() as f64;
    let chol = spec.sigma.matrix().clone().cholesky().ok_or_else(|| Error::NonPd("sigma".into()))?;
    let xbar = stats.xbar();
    let linear = n * chol.solve(&spec.theta).dot(xbar);
    let mut trace = chol.solve(stats.scatter().matrix()).trace();
    if spec.variant == HalfSpaceVariant::HA {
        trace += n * xbar.dot(&chol.solve(xbar));
    }
    Ok(linear - 0.5 * trace)
}

pub fn half_space_membership(spec: &HalfSpaceSpec, stats: &SufficientStats) -> Result<bool> {
    Ok(half_space_value(spec, stats)? > spec.c)
}

/// Counts from [`half_space_probe`]. A zero `in_both` is an observation about
/// the sample, not a proof that `A_U` and `H_A` are disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct HalfSpaceProbe {
    pub sampled: usize,
    pub accepted_u: usize,
    pub in_h_a: usize,
    pub in_h_star: usize,
    /// Points of `A_U` that also lie in `H_A`.
    pub in_both: usize,
    /// Points in `H_A` but not in `H*`; always zero since `H_A ⊆ H*`.
    pub containment_violations: usize,
}

/// Samples datasets of size `n`, alternately from `N(0, Σ)` and `N(θ, Σ)`,
/// and tallies membership in `A_U = {U ≤ k}`, `H_A` and `H*`.
pub fn half_space_probe(spec: &HalfSpaceSpec, n: usize, k: f64, samples: usize, seed: u64) -> Result<HalfSpaceProbe> {
    let p = spec.sigma.dim();
    let split = spec.sigma.split();
    let ha = spec.with_variant(HalfSpaceVariant::HA);
    let hs = spec.with_variant(HalfSpaceVariant::HStar);
    let zero = DVector::zeros(p);
    let flags: Vec<Option<(bool, bool, bool)>> = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<Option<(bool, bool, bool)>> {
            let theta = if i % 2 == 0 { &zero } else { &spec.theta };
            let mut rng = substream(seed, domain::HALF_SPACE, i as u64);
            let data = crate::power::sample_dataset(&mut rng, n, theta, &spec.sigma)?;
            let stats = match SufficientStats::from_data(&data, split) {
                Ok(s) => s,
                Err(Error::SingularScatter { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            Ok(Some((accept_u(&stats, k)?, half_space_membership(&ha, &stats)?, half_space_membership(&hs, &stats)?)))
        })
        .collect::<Result<_>>()?;
    let valid: Vec<_> = flags.into_iter().flatten().collect();
    Ok(HalfSpaceProbe {
        sampled: valid.len(),
        accepted_u: valid.iter().filter(|f| f.0).count(),
        in_h_a: valid.iter().filter(|f| f.1).count(),
        in_h_star: valid.iter().filter(|f| f.2).count(),
        in_both: valid.iter().filter(|f| f.0 && f.1).count(),
        containment_violations: valid.iter().filter(|f| f.1 && !f.2).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{hotelling_t2, rao_u};

    fn identity(p: usize, p1: usize) -> PartitionedSpdMatrix {
        PartitionedSpdMatrix::identity(p, p1).unwrap()
    }

    #[test]
    fn t2_exit_radius_on_identity() {
        let r = region_exit_radius(Region::T2, &DVector::from_vec(vec![0.0, 1.0]), &identity(2, 1), 2, 2.0).unwrap();
        assert_eq!(r.exit_radius, ExitRadius::Finite(1.0));
    }

    #[test]
    fn u_exit_radius_infinite_on_covariate_axis() {
        let s = PartitionedSpdMatrix::from_rows(&[&[2.0, 0.0], &[0.0, 3.0]], 1).unwrap();
        let r = region_exit_radius(Region::U, &DVector::from_vec(vec![0.0, 1.0]), &s, 5, 0.3).unwrap();
        assert_eq!(r.exit_radius, ExitRadius::Infinite);
        assert_eq!(r.to_json_line(), r#"{"region":"u","direction":[0.0,1.0],"exit_radius":"inf"}"#);
    }

    #[test]
    fn exit_radius_lands_on_the_boundary() {
        let s = random_probe_matrix(3, 4, 2).unwrap();
        for region in [Region::T2, Region::U] {
            for probe in exit_radius_sweep(region, &s, 7, 4.5, 20, 9).unwrap() {
                let t = probe.exit_radius.value();
                let stats = SufficientStats::new(7, &probe.direction * t, s.clone()).unwrap();
                let value = match region {
                    Region::T2 => hotelling_t2(&stats).unwrap(),
                    Region::U => rao_u(&stats).unwrap(),
                };
                assert!((value - 4.5).abs() < 1e-9 * 4.5, "{value}");
            }
        }
    }

    #[test]
    fn null_directions_are_unbounded_for_u_only() {
        let s = random_probe_matrix(11, 5, 2).unwrap();
        for probe in null_subspace_sweep(Region::U, &s, 10, 1.0, 50, 4).unwrap() {
            assert_eq!(probe.exit_radius, ExitRadius::Infinite);
        }
        assert!(null_subspace_sweep(Region::T2, &s, 10, 1.0, 50, 4).unwrap().iter().all(|p| p.exit_radius.is_finite()));
    }

    #[test]
    fn rejects_bad_k() {
        let e = region_exit_radius(Region::T2, &DVector::from_vec(vec![1.0, 0.0]), &identity(2, 1), 2, 0.0);
        assert!(matches!(e, Err(Error::OutOfRange(_))));
    }

    #[test]
    fn dual_cone_examples() {
        let id = identity(2, 1);
        assert!(dual_cone_membership(&DVector::from_vec(vec![0.0, -4.0]), &id, 16, 1).unwrap());
        assert!(!dual_cone_membership(&DVector::from_vec(vec![1.0, 0.0]), &id, 16, 1).unwrap());
        let sigma = PartitionedSpdMatrix::from_rows(&[&[2.0, 1.0], &[1.0, 1.0]], 1).unwrap();
        let w = DVector::from_vec(vec![1.0, 1.0]);
        assert_eq!(dual_cone_transform(&w, &sigma).unwrap()[0], 0.0);
        assert!(dual_cone_membership(&w, &sigma, 16, 1).unwrap());
        for scale in [1e-6, 1.0, 1e6] {
            assert!(dual_cone_membership(&(&w * scale), &sigma, 16, 1).unwrap());
            let off = DVector::from_vec(vec![1.5, 1.0]) * scale;
            assert!(!dual_cone_membership(&off, &sigma, 16, 1).unwrap());
        }
    }

    #[test]
    fn dual_cone_sweep_matches_closed_form() {
        let s = random_probe_matrix(5, 4, 2).unwrap();
        let sweep = dual_cone_sweep(&s, 200, 8, 5).unwrap();
        assert_eq!(sweep.mismatches, 0);
        assert_eq!(sweep.members, 100);
    }

    #[test]
    fn half_space_values() {
        let p = 3;
        let spec = HalfSpaceSpec { theta: DVector::zeros(p), sigma: identity(p, 1), c: -10.0 * p as f64, variant: HalfSpaceVariant::HStar };
        let stats = SufficientStats::new(2, DVector::zeros(p), identity(p, 1)).unwrap();
        assert_eq!(half_space_value(&spec, &stats).unwrap(), -1.5);
        assert!(half_space_membership(&spec, &stats).unwrap());
        assert!(half_space_membership(&spec.with_variant(HalfSpaceVariant::HA), &stats).unwrap());
    }

    #[test]
    fn half_space_probe_keeps_containment() {
        let spec = HalfSpaceSpec {
            theta: DVector::from_vec(vec![0.8, 0.0, 0.0]),
            sigma: identity(3, 1),
            c: -12.0,
            variant: HalfSpaceVariant::HA,
        };
        let probe = half_space_probe(&spec, 20, 4.0, 400, 2).unwrap();
        assert_eq!(probe.sampled, 400);
        assert_eq!(probe.containment_violations, 0);
        assert!(probe.in_h_a <= probe.in_h_star);
    }
}
