//! Sufficient statistics and the Hotelling/Rao test statistics.
//!
//! For `n` observations with mean `X̄` and unnormalized scatter `S`:
//!
//! ```text
//!     T² = n(n−1)·X̄'S⁻¹X̄
//!     U  = n(n−1)·X̄1:2'·S11:2⁻¹·X̄1:2  = n(n−1)·X̄'B⁺(S)X̄
//!     M  = n(n−1)·X̄2'·S22⁻¹·X̄2
//!     W  = U / (1 + M)
//! ```
//!
//! so that `T² = U + M`. All statistics are invariant under the block
//! upper-triangular group `g = [[g11, g12], [0, g22]]` acting by
//! `(X̄, S) ↦ (gX̄, gSg')`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{self, adjusted_mean, b_plus, is_positive_definite, schur_complement, PartitionedSpdMatrix};

/// `(n, X̄, S)` with `S = Σ (xᵢ − x̄)(xᵢ − x̄)'`, not divided by `n − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    n: usize,
    xbar: DVector<f64>,
    scatter: PartitionedSpdMatrix,
}

impl SufficientStats {
    /// Assemble from precomputed parts. Requires `n ≥ 2` and a positive definite scatter.
    pub fn new(n: usize, xbar: DVector<f64>, scatter: PartitionedSpdMatrix) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewRows { n, needed: 2 });
        }
        if xbar.len() != scatter.dim() {
            return Err(Error::Dim(format!("mean has length {}, scatter is {}x{}", xbar.len(), scatter.dim(), scatter.dim())));
        }
        if let Some(i) = xbar.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row: 0, col: i });
        }
        Ok(Self { n, xbar, scatter })
    }

    /// Mean and scatter of the rows of `data` (n × p).
    pub fn from_data(data: &DMatrix<f64>, split: usize) -> Result<Self> {
        let (n, p) = data.shape();
        if n < 2 {
            return Err(Error::TooFewRows { n, needed: 2 });
        }
        if split == 0 || split >= p {
            return Err(Error::Dim(format!("split p1 = {split} must satisfy 0 < p1 < p = {p}")));
        }
        for i in 0..n {
            for j in 0..p {
                if !data[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        let xbar = DVector::from_fn(p, |j, _| data.column(j).sum() / n as f64);
        let mut centered = data.clone();
        for mut row in centered.row_iter_mut() {
            row -= xbar.transpose();
        }
        let scatter = matrix::symmetrize(&(centered.transpose() * &centered));
        // With n ≤ p the centered rows span at most n − 1 < p dimensions.
        if n < p + 1 || !is_positive_definite(&scatter) {
            return Err(Error::SingularScatter { n, p });
        }
        let scatter = PartitionedSpdMatrix::new(scatter, split).map_err(|_| Error::SingularScatter { n, p })?;
        Ok(Self { n, xbar, scatter })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.xbar.len()
    }

    pub fn split(&self) -> usize {
        self.scatter.split()
    }

    pub fn xbar(&self) -> &DVector<f64> {
        &self.xbar
    }

    pub fn scatter(&self) -> &PartitionedSpdMatrix {
        &self.scatter
    }

    /// `n(n−1)`, the factor carried by every statistic.
    pub fn scale_factor(&self) -> f64 {
        let n = self.n as f64;
        n * (n - 1.0)
    }

    fn xbar2(&self) -> DVector<f64> {
        self.xbar.rows(self.split(), self.scatter.p2()).into_owned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestStatistics {
    pub t2: f64,
    pub u: f64,
    pub w: f64,
    pub m: f64,
    /// Same value as `w`; the maximal invariant is `(l·(1+m), m)`.
    pub l: f64,
}

impl TestStatistics {
    pub fn get(&self, test: TestId) -> f64 {
        match test {
            TestId::T2 => self.t2,
            TestId::U => self.u,
            TestId::W => self.w,
        }
    }

    /// The maximal invariant pair `(L(1+M), M)`.
    pub fn maximal_invariant(&self) -> (f64, f64) {
        (self.l * (1.0 + self.m), self.m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum TestId {
    T2,
    U,
    W,
}

impl TestId {
    pub const ALL: [TestId; 3] = [TestId::T2, TestId::U, TestId::W];

    pub fn name(self) -> &'static str {
        match self {
            TestId::T2 => "T2",
            TestId::U => "U",
            TestId::W => "W",
        }
    }
}

impl std::fmt::Display for TestId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TestId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "T2" => Ok(TestId::T2),
            "U" => Ok(TestId::U),
            "W" => Ok(TestId::W),
            other => Err(Error::Config(format!("unknown test {other:?}"))),
        }
    }
}

fn quad_spd(x: &DVector<f64>, a: &DMatrix<f64>) -> Result<f64> {
    let ch = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NonPd("Cholesky factorization failed".into()))?;
    let y = ch.l().solve_lower_triangular(x).ok_or_else(|| Error::NonPd("singular factor".into()))?;
    Ok(y.norm_squared())
}

/// `n(n−1)·X̄'S⁻¹X̄`.
pub fn hotelling_t2(stats: &SufficientStats) -> Result<f64> {
    Ok(stats.scale_factor() * quad_spd(&stats.xbar, stats.scatter.matrix())?)
}

/// `U` through the Schur complement and the regression-adjusted mean.
pub fn rao_u(stats: &SufficientStats) -> Result<f64> {
    let xa = adjusted_mean(&stats.xbar, &stats.scatter)?;
    Ok(stats.scale_factor() * quad_spd(&xa, &schur_complement(&stats.scatter)?)?)
}

/// `U` as the quadratic form `n(n−1)·X̄'B⁺(S)X̄`.
pub fn rao_u_via_b_plus(stats: &SufficientStats) -> Result<f64> {
    let bp = b_plus(&stats.scatter)?;
    Ok(stats.scale_factor() * stats.xbar.dot(&(bp * &stats.xbar)))
}

/// `n(n−1)·X̄2'S22⁻¹X̄2`.
pub fn covariate_m(stats: &SufficientStats) -> Result<f64> {
    Ok(stats.scale_factor() * quad_spd(&stats.xbar2(), &stats.scatter.s22())?)
}

pub fn compute_statistics(stats: &SufficientStats) -> Result<TestStatistics> {
    let t2 = hotelling_t2(stats)?;
    let u = rao_u(stats)?;
    let m = covariate_m(stats)?;
    let w = u / (1.0 + m);
    Ok(TestStatistics { t2, u, w, m, l: w })
}

/// Acceptance region of a quadratic-form test: `T²` or `U` below a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    #[serde(rename = "t2")]
    T2,
    #[serde(rename = "u")]
    U,
}

impl Region {
    pub fn statistic(self, stats: &SufficientStats) -> Result<f64> {
        match self {
            Region::T2 => hotelling_t2(stats),
            Region::U => rao_u(stats),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::T2 => "t2",
            Region::U => "u",
        }
    }
}

impl std::str::FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t2" => Ok(Region::T2),
            "u" => Ok(Region::U),
            other => Err(Error::Config(format!("unknown region {other:?}"))),
        }
    }
}

/// Noncentrality quantities of `(θ, Σ, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantParams {
    /// `n·θ1:2'·Σ11:2⁻¹·θ1:2`
    pub delta1: f64,
    /// `n·θ2'·Σ22⁻¹·θ2`
    pub delta2: f64,
    /// `delta1 + delta2`
    pub delta_star: f64,
    /// `n·θ1'·Σ11:2⁻¹·θ1`
    pub delta: f64,
}

pub fn invariant_params(theta: &DVector<f64>, sigma: &PartitionedSpdMatrix, n: usize) -> Result<InvariantParams> {
    if n == 0 {
        return Err(Error::OutOfRange("n must be at least 1".into()));
    }
    if theta.len() != sigma.dim() {
        return Err(Error::Dim(format!("theta has length {}, sigma is {}x{}", theta.len(), sigma.dim(), sigma.dim())));
    }
    let n = n as f64;
    let p1 = sigma.split();
    let schur = schur_complement(sigma)?;
    let theta_adj = adjusted_mean(theta, sigma)?;
    let theta1 = theta.rows(0, p1).into_owned();
    let theta2 = theta.rows(p1, sigma.p2()).into_owned();
    let delta1 = n * quad_spd(&theta_adj, &schur)?;
    let delta2 = n * quad_spd(&theta2, &sigma.s22())?;
    let delta = n * quad_spd(&theta1, &schur)?;
    Ok(InvariantParams { delta1, delta2, delta_star: delta1 + delta2, delta })
}

fn check_threshold(k: f64) -> Result<()> {
    if k.is_nan() || k < 0.0 {
        return Err(Error::OutOfRange(format!("threshold k = {k} must be nonnegative")));
    }
    Ok(())
}

/// `U ≤ k`.
pub fn accept_u(stats: &SufficientStats, k: f64) -> Result<bool> {
    check_threshold(k)?;
    Ok(rao_u(stats)? <= k)
}

/// `T² ≤ k`.
pub fn accept_t2(stats: &SufficientStats, k: f64) -> Result<bool> {
    check_threshold(k)?;
    Ok(hotelling_t2(stats)? <= k)
}

/// `W ≤ k`.
pub fn accept_w(stats: &SufficientStats, k: f64) -> Result<bool> {
    check_threshold(k)?;
    Ok(compute_statistics(stats)?.w <= k)
}

/// `k*/(1 − k*)` for `k*` in `[0, 1)`.
pub fn threshold_map(k_star: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k_star) {
        return Err(Error::OutOfRange(format!("k* = {k_star} must lie in [0, 1)")));
    }
    Ok(k_star / (1.0 - k_star))
}

/// Element of the block upper-triangular group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    g11: DMatrix<f64>,
    g12: DMatrix<f64>,
    g22: DMatrix<f64>,
}

fn is_nonsingular(a: &DMatrix<f64>) -> bool {
    if a.nrows() != a.ncols() || a.is_empty() || a.iter().any(|x| !x.is_finite()) {
        return false;
    }
    let sv = a.clone().svd(false, false).singular_values;
    sv.min() > a.nrows() as f64 * f64::EPSILON * sv.max()
}

impl GroupElement {
    pub fn new(g11: DMatrix<f64>, g12: DMatrix<f64>, g22: DMatrix<f64>) -> Result<Self> {
        let (p1, p2) = (g11.nrows(), g22.nrows());
        if g11.ncols() != p1 || g22.ncols() != p2 || g12.shape() != (p1, p2) {
            return Err(Error::Dim(format!(
                "blocks {:?}, {:?}, {:?} do not form a {}x{} block triangular matrix",
                g11.shape(),
                g12.shape(),
                g22.shape(),
                p1 + p2,
                p1 + p2
            )));
        }
        if !is_nonsingular(&g11) || !is_nonsingular(&g22) {
            return Err(Error::SingularG);
        }
        Ok(Self { g11, g12, g22 })
    }

    pub fn identity(p1: usize, p2: usize) -> Self {
        Self { g11: DMatrix::identity(p1, p1), g12: DMatrix::zeros(p1, p2), g22: DMatrix::identity(p2, p2) }
    }

    pub fn split(&self) -> usize {
        self.g11.nrows()
    }

    pub fn dim(&self) -> usize {
        self.g11.nrows() + self.g22.nrows()
    }

    /// `[[g11, g12], [0, g22]]`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let (p1, p) = (self.split(), self.dim());
        let mut g = DMatrix::zeros(p, p);
        g.view_mut((0, 0), (p1, p1)).copy_from(&self.g11);
        g.view_mut((0, p1), (p1, p - p1)).copy_from(&self.g12);
        g.view_mut((p1, p1), (p - p1, p - p1)).copy_from(&self.g22);
        g
    }
}

/// `(X̄, S) ↦ (gX̄, gSg')`.
pub fn group_act(g: &GroupElement, stats: &SufficientStats) -> Result<SufficientStats> {
    if g.dim() != stats.dim() || g.split() != stats.split() {
        return Err(Error::Dim(format!(
            "group element is {}x{} split {}, statistics are p = {} split {}",
            g.dim(),
            g.dim(),
            g.split(),
            stats.dim(),
            stats.split()
        )));
    }
    let gm = g.matrix();
    let xbar = &gm * &stats.xbar;
    let scatter = matrix::symmetrize(&(&gm * stats.scatter.matrix() * gm.transpose()));
    let scatter = PartitionedSpdMatrix::new(scatter, stats.split())?;
    SufficientStats::new(stats.n, xbar, scatter)
}

/// The element `[[I, −Σ12Σ22⁻¹], [0, I]]` that block-diagonalizes `Σ`.
pub fn whitening_element(sigma: &PartitionedSpdMatrix) -> Result<GroupElement> {
    let coef = sigma.regression_coefficients()?;
    GroupElement::new(
        DMatrix::identity(sigma.split(), sigma.split()),
        -coef.transpose(),
        DMatrix::identity(sigma.p2(), sigma.p2()),
    )
}

/// `Σ̃ = diag(Σ11:2, Σ22)`.
pub fn whitened_sigma(sigma: &PartitionedSpdMatrix) -> Result<DMatrix<f64>> {
    let (p1, p) = (sigma.split(), sigma.dim());
    let mut out = DMatrix::zeros(p, p);
    out.view_mut((0, 0), (p1, p1)).copy_from(&schur_complement(sigma)?);
    out.view_mut((p1, p1), (p - p1, p - p1)).copy_from(&sigma.s22());
    Ok(out)
}

/// `(Z, S₀) = (gX̄, gSg')` for the covariate-whitening element of `Σ`.
///
/// `S₀` is returned unchecked as a plain matrix: it is positive definite
/// whenever `S` is, but callers comparing against `Σ̃` want the raw product.
pub fn whiten_covariates(stats: &SufficientStats, sigma: &PartitionedSpdMatrix) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if sigma.dim() != stats.dim() || sigma.split() != stats.split() {
        return Err(Error::Dim("sigma and statistics have different partitions".into()));
    }
    let g = whitening_element(sigma)?.matrix();
    let z = &g * &stats.xbar;
    let s0 = matrix::symmetrize(&(&g * stats.scatter.matrix() * g.transpose()));
    Ok((z, s0))
}
