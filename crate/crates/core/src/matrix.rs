//! Partitioned symmetric matrix algebra.
//!
//! A `p×p` matrix `S` with a `(p₁, p₂)` split is written in blocks as
//!
//! ```text
//!     S = [ S11  S12 ]
//!         [ S21  S22 ]
//! ```
//!
//! From it we build the Schur complement `S11:2 = S11 − S12·S22⁻¹·S21`, the
//! rank-`p₁` matrix `B⁺(S) = S⁻¹ − diag(0, S22⁻¹)` and its Moore-Penrose
//! inverse `B(S)`. The module also carries the Loewner-order comparison and
//! the simultaneous diagonalization of two p.s.d. matrices sharing a range.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative asymmetry tolerated by [`PartitionedSpdMatrix::new`].
pub const SPD_SYMMETRY_TOL: f64 = 1e-12;
/// Relative asymmetry tolerated by the generalized-inverse routines.
pub const PINV_SYMMETRY_TOL: f64 = 1e-8;
/// Default Loewner tolerance, applied as `tol·max(scale, 1)`.
pub const DEFAULT_LOEWNER_TOL: f64 = 1e-8;
/// Relative tolerance for the range check in [`simultaneous_diagonalize`].
pub const RANGE_TOL: f64 = 1e-8;

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Largest `|a_ij − a_ji|` divided by the largest `|a_ij|` (zero for the zero matrix).
pub fn relative_asymmetry(a: &DMatrix<f64>) -> f64 {
    let scale = a.amax();
    if scale == 0.0 {
        return 0.0;
    }
    (a - a.transpose()).amax() / scale
}

fn require_square(a: &DMatrix<f64>, what: &str) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dim(format!("{what} is {}x{}, expected square", a.nrows(), a.ncols())));
    }
    Ok(a.nrows())
}

fn checked_symmetric(a: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    require_square(a, "matrix")?;
    let asym = relative_asymmetry(a);
    if !(asym <= tol) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(symmetrize(a))
}

/// Eigendecomposition of the symmetric part of `a`.
pub fn sym_eigen(a: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::new(symmetrize(a))
}

/// Spectral norm of the symmetric part of `a`.
pub fn sym_spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    sym_eigen(a).eigenvalues.amax()
}

/// Eigenvalues with magnitude below `p·ε·max|λ|` are treated as exact zeros.
pub fn rank_cutoff(eigenvalues: &DVector<f64>) -> f64 {
    eigenvalues.len() as f64 * f64::EPSILON * eigenvalues.amax()
}

pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    let eig = sym_eigen(a);
    let cut = rank_cutoff(&eig.eigenvalues);
    eig.eigenvalues.iter().filter(|l| l.abs() > cut).count()
}

/// Smallest eigenvalue of the symmetric part of `a` with a unit eigenvector.
pub fn min_eigenpair(a: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = sym_eigen(a);
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &l)| if l < acc.1 { (i, l) } else { acc });
    (val, eig.eigenvectors.column(idx).into_owned())
}

/// Factorization-based positive-definiteness check with an eigenvalue fallback.
///
/// A Cholesky pivot whose square falls below `p·ε·max(diag)` counts as a
/// failure, so rank-deficient scatter matrices are rejected even when the
/// rounding leaves a tiny positive pivot.
pub fn is_positive_definite(a: &DMatrix<f64>) -> bool {
    let p = a.nrows();
    if p == 0 || p != a.ncols() || a.iter().any(|x| !x.is_finite()) {
        return false;
    }
    let sym = symmetrize(a);
    let max_diag = sym.diagonal().max();
    if !(max_diag > 0.0) {
        return false;
    }
    let floor = p as f64 * f64::EPSILON * max_diag;
    match sym.clone().cholesky() {
        Some(ch) => ch.l().diagonal().iter().all(|d| d * d > floor),
        None => {
            let eig = SymmetricEigen::new(sym);
            eig.eigenvalues.min() > floor
        }
    }
}

fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !is_positive_definite(a) {
        return Err(Error::NonPd("Cholesky factorization failed".into()));
    }
    let ch = symmetrize(a)
        .cholesky()
        .ok_or_else(|| Error::NonPd("Cholesky factorization failed".into()))?;
    Ok(symmetrize(&ch.inverse()))
}

fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !is_positive_definite(a) {
        return Err(Error::NonPd("Cholesky factorization failed".into()));
    }
    let ch = symmetrize(a)
        .cholesky()
        .ok_or_else(|| Error::NonPd("Cholesky factorization failed".into()))?;
    Ok(ch.solve(b))
}

/// A symmetric positive definite `p×p` matrix with a declared `(p₁, p₂)` split.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedSpdMatrix {
    entries: DMatrix<f64>,
    split: usize,
}

impl PartitionedSpdMatrix {
    pub fn new(entries: DMatrix<f64>, split: usize) -> Result<Self> {
        let p = require_square(&entries, "partitioned matrix")?;
        if split == 0 || split >= p {
            return Err(Error::Dim(format!("split p1 = {split} must satisfy 0 < p1 < p = {p}")));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonPd("non-finite entry".into()));
        }
        let asym = relative_asymmetry(&entries);
        if asym > SPD_SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        let entries = symmetrize(&entries);
        if !is_positive_definite(&entries) {
            return Err(Error::NonPd(format!("{p}x{p} matrix failed the definiteness check")));
        }
        Ok(Self { entries, split })
    }

    pub fn from_rows(rows: &[&[f64]], split: usize) -> Result<Self> {
        let p = rows.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Dim("rows must all have length p".into()));
        }
        Self::new(DMatrix::from_fn(p, p, |i, j| rows[i][j]), split)
    }

    pub fn identity(p: usize, split: usize) -> Result<Self> {
        Self::new(DMatrix::identity(p, p), split)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn p2(&self) -> usize {
        self.dim() - self.split
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn s11(&self) -> DMatrix<f64> {
        self.entries.view((0, 0), (self.split, self.split)).into_owned()
    }

    pub fn s12(&self) -> DMatrix<f64> {
        self.entries.view((0, self.split), (self.split, self.p2())).into_owned()
    }

    pub fn s21(&self) -> DMatrix<f64> {
        self.entries.view((self.split, 0), (self.p2(), self.split)).into_owned()
    }

    pub fn s22(&self) -> DMatrix<f64> {
        self.entries.view((self.split, self.split), (self.p2(), self.p2())).into_owned()
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        spd_inverse(&self.entries)
    }

    /// Same matrix, different split.
    pub fn with_split(&self, split: usize) -> Result<Self> {
        Self::new(self.entries.clone(), split)
    }

    /// `S22⁻¹·S21`, the regression coefficients of block 1 on block 2.
    pub fn regression_coefficients(&self) -> Result<DMatrix<f64>> {
        spd_solve(&self.s22(), &self.s21())
    }

    /// `V = [I; −S22⁻¹S21]`, the `p×p₁` factor shared by `B⁺(S)` and `B(S)`.
    fn lift(&self) -> Result<DMatrix<f64>> {
        let coef = self.regression_coefficients()?;
        let mut v = DMatrix::zeros(self.dim(), self.split);
        v.view_mut((0, 0), (self.split, self.split)).fill_with_identity();
        v.view_mut((self.split, 0), (self.p2(), self.split)).copy_from(&(-coef));
        Ok(v)
    }
}

/// `S11:2 = S11 − S12·S22⁻¹·S21`.
pub fn schur_complement(m: &PartitionedSpdMatrix) -> Result<DMatrix<f64>> {
    let coef = m.regression_coefficients()?;
    Ok(symmetrize(&(m.s11() - m.s12() * coef)))
}

/// `X̄1:2 = X̄1 − S12·S22⁻¹·X̄2`.
pub fn adjusted_mean(xbar: &DVector<f64>, m: &PartitionedSpdMatrix) -> Result<DVector<f64>> {
    if xbar.len() != m.dim() {
        return Err(Error::Dim(format!("vector has length {}, matrix is {}x{}", xbar.len(), m.dim(), m.dim())));
    }
    let x1 = xbar.rows(0, m.split()).into_owned();
    let x2 = DMatrix::from_column_slice(m.p2(), 1, xbar.rows(m.split(), m.p2()).as_slice());
    let y = spd_solve(&m.s22(), &x2)?;
    Ok(x1 - m.s12() * y.column(0))
}

/// Moore-Penrose inverse of a symmetric matrix through its eigendecomposition.
///
/// Eigenvalues with magnitude at or below [`rank_cutoff`] are treated as zeros.
pub fn pseudo_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = checked_symmetric(a, PINV_SYMMETRY_TOL)?;
    if sym.is_empty() {
        return Ok(sym);
    }
    let eig = SymmetricEigen::new(sym);
    let cut = rank_cutoff(&eig.eigenvalues);
    let inv = eig.eigenvalues.map(|l| if l.abs() > cut { 1.0 / l } else { 0.0 });
    let q = &eig.eigenvectors;
    Ok(symmetrize(&(q * DMatrix::from_diagonal(&inv) * q.transpose())))
}

/// Frobenius residuals of the four Penrose conditions for a candidate inverse `g` of `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenroseResiduals {
    /// `‖A·G·A − A‖`
    pub aga: f64,
    /// `‖G·A·G − G‖`
    pub gag: f64,
    /// `‖(A·G)' − A·G‖`
    pub ag_symmetric: f64,
    /// `‖(G·A)' − G·A‖`
    pub ga_symmetric: f64,
}

impl PenroseResiduals {
    pub fn max(&self) -> f64 {
        self.aga.max(self.gag).max(self.ag_symmetric).max(self.ga_symmetric)
    }
}

pub fn penrose_residuals(a: &DMatrix<f64>, g: &DMatrix<f64>) -> PenroseResiduals {
    let ag = a * g;
    let ga = g * a;
    PenroseResiduals {
        aga: (&ag * a - a).norm(),
        gag: (&ga * g - g).norm(),
        ag_symmetric: (ag.transpose() - &ag).norm(),
        ga_symmetric: (ga.transpose() - &ga).norm(),
    }
}

/// `B⁺(S)` in factored form `V·S11:2⁻¹·V'` with `V = [I; −S22⁻¹S21]`.
pub fn b_plus(m: &PartitionedSpdMatrix) -> Result<DMatrix<f64>> {
    let v = m.lift()?;
    let schur_inv = spd_inverse(&schur_complement(m)?)?;
    Ok(symmetrize(&(&v * schur_inv * v.transpose())))
}

/// `B⁺(S)` in block form `S⁻¹ − diag(0, S22⁻¹)`.
pub fn b_plus_block_form(m: &PartitionedSpdMatrix) -> Result<DMatrix<f64>> {
    let mut out = m.inverse()?;
    let s22_inv = spd_inverse(&m.s22())?;
    let (p1, p2) = (m.split(), m.p2());
    let mut block = out.view_mut((p1, p1), (p2, p2));
    block -= s22_inv;
    Ok(symmetrize(&out))
}

/// `B(S) = V·(V'V)⁻¹·S11:2·(V'V)⁻¹·V'`, the explicit Moore-Penrose inverse of `B⁺(S)`.
///
/// `V'V = I + S12·S22⁻¹·S22⁻¹·S21`.
pub fn b_mp(m: &PartitionedSpdMatrix) -> Result<DMatrix<f64>> {
    let v = m.lift()?;
    let gram_inv = spd_inverse(&(v.transpose() * &v))?;
    let schur = schur_complement(m)?;
    let core = &gram_inv * schur * &gram_inv;
    Ok(symmetrize(&(&v * core * v.transpose())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LoewnerVerdict {
    Psd,
    NotPsd,
}

/// Outcome of checking `A ⪰ B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoewnerReport {
    /// Smallest eigenvalue of the symmetrized `A − B`.
    pub min_eig: f64,
    /// `‖A‖₂ + ‖B‖₂`.
    pub scale: f64,
    pub tol: f64,
    pub verdict: LoewnerVerdict,
}

impl LoewnerReport {
    pub fn is_psd(&self) -> bool {
        self.verdict == LoewnerVerdict::Psd
    }

    /// `min_eig / max(scale, 1)`: the margin compared against `−tol`.
    pub fn normalized_margin(&self) -> f64 {
        self.min_eig / self.scale.max(1.0)
    }
}

pub fn loewner_compare(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> Result<LoewnerReport> {
    require_square(a, "left operand")?;
    if a.shape() != b.shape() {
        return Err(Error::Dim(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    if !(tol >= 0.0) {
        return Err(Error::OutOfRange(format!("tolerance {tol} must be nonnegative")));
    }
    let diff = symmetrize(&(a - b));
    let min_eig = if diff.is_empty() { 0.0 } else { SymmetricEigen::new(diff).eigenvalues.min() };
    let scale = sym_spectral_norm(a) + sym_spectral_norm(b);
    let verdict = if min_eig >= -tol * scale.max(1.0) { LoewnerVerdict::Psd } else { LoewnerVerdict::NotPsd };
    Ok(LoewnerReport { min_eig, scale, tol, verdict })
}

/// `A1 = G·diag(I_r, 0)·G'` and `A2 = G·diag(D_r, 0)·G'`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDiagResult {
    pub g: DMatrix<f64>,
    /// Nonzero eigenvalues of `A2·A1⁺`, descending.
    pub d: Vec<f64>,
    pub rank: usize,
}

impl SimDiagResult {
    /// `G·diag(values, 0)·G'`.
    pub fn reconstruct(&self, values: &[f64]) -> DMatrix<f64> {
        let p = self.g.nrows();
        let mut diag = DVector::zeros(p);
        for (i, v) in values.iter().enumerate().take(self.rank) {
            diag[i] = *v;
        }
        &self.g * DMatrix::from_diagonal(&diag) * self.g.transpose()
    }
}

/// Simultaneous diagonalization of two p.s.d. matrices of equal rank and equal range.
///
/// With `A1 = U_r·Λ·U_r'` and `F = U_r·Λ^{1/2}`, the `r×r` matrix
/// `C = F⁺·A2·F⁺'` is p.d.; its eigendecomposition `C = Q·D·Q'` gives the
/// first `r` columns `F·Q` of `G`. The remaining columns span the null space
/// of `A1`.
pub fn simultaneous_diagonalize(a1: &DMatrix<f64>, a2: &DMatrix<f64>) -> Result<SimDiagResult> {
    let a1 = checked_symmetric(a1, PINV_SYMMETRY_TOL)?;
    let a2 = checked_symmetric(a2, PINV_SYMMETRY_TOL)?;
    if a1.shape() != a2.shape() {
        return Err(Error::Dim(format!("{:?} vs {:?}", a1.shape(), a2.shape())));
    }
    let p = a1.nrows();
    let e1 = SymmetricEigen::new(a1.clone());
    let cut1 = rank_cutoff(&e1.eigenvalues);
    let r1 = e1.eigenvalues.iter().filter(|l| l.abs() > cut1).count();
    let r2 = numerical_rank(&a2);
    if r1 != r2 {
        return Err(Error::RankMismatch(r1, r2));
    }
    if e1.eigenvalues.iter().any(|&l| l < -cut1) {
        return Err(Error::NonPd("first matrix has a negative eigenvalue".into()));
    }

    // Eigenvalue indices ordered descending so the range block comes first.
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| e1.eigenvalues[j].total_cmp(&e1.eigenvalues[i]));
    let range = DMatrix::from_fn(p, r1, |i, j| e1.eigenvectors[(i, order[j])]);
    let null = DMatrix::from_fn(p, p - r1, |i, j| e1.eigenvectors[(i, order[r1 + j])]);

    let projected = &range * (range.transpose() * &a2);
    let resid = (&projected - &a2).norm() / a2.norm().max(f64::MIN_POSITIVE);
    if resid > RANGE_TOL {
        return Err(Error::RangeMismatch(resid));
    }

    let sqrt_l = DVector::from_fn(r1, |j, _| e1.eigenvalues[order[j]].sqrt());
    let f = &range * DMatrix::from_diagonal(&sqrt_l);
    let f_pinv = DMatrix::from_diagonal(&sqrt_l.map(|s| 1.0 / s)) * range.transpose();
    let c = symmetrize(&(&f_pinv * &a2 * f_pinv.transpose()));
    let ec = SymmetricEigen::new(c);
    let mut corder: Vec<usize> = (0..r1).collect();
    corder.sort_by(|&i, &j| ec.eigenvalues[j].total_cmp(&ec.eigenvalues[i]));
    let q = DMatrix::from_fn(r1, r1, |i, j| ec.eigenvectors[(i, corder[j])]);
    let d: Vec<f64> = corder.iter().map(|&j| ec.eigenvalues[j]).collect();

    let mut g = DMatrix::zeros(p, p);
    g.view_mut((0, 0), (p, r1)).copy_from(&(f * q));
    g.view_mut((0, r1), (p, p - r1)).copy_from(&null);
    Ok(SimDiagResult { g, d, rank: r1 })
}

/// `x'·A⁺·x` with `A⁺` the Moore-Penrose inverse.
pub fn gen_inv_quadratic(x: &DVector<f64>, a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != x.len() {
        return Err(Error::Dim(format!("vector has length {}, matrix is {}x{}", x.len(), a.nrows(), a.ncols())));
    }
    let g = pseudo_inverse(a)?;
    Ok(x.dot(&(g * x)))
}
