//! Small dense complex-matrix kernel.
//!
//! Everything here works on `n x n` matrices with `n` in the single digits, so
//! the routines favour clarity over blocking or workspace reuse. Dense
//! factorizations are delegated to `nalgebra`.

use std::cmp::Ordering;
use std::f64::consts::{PI, TAU};

use nalgebra::linalg::Schur;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Default bound on `‖U U* − I‖` for a matrix to count as unitary.
pub const UNITARITY_TOL: f64 = 1e-10;
/// Eigenvalues closer than this are treated as one cluster.
pub const CLUSTER_TOL: f64 = 1e-8;

const SCHUR_MAX_ITER: usize = 10_000;

/// Principal argument in `(−π, π]`.
pub fn principal_arg(z: Complex64) -> f64 {
    let a = z.arg();
    // atan2 returns −π for (−x, −0.0); fold it onto the closed end.
    if a <= -PI {
        PI
    } else {
        a
    }
}

pub fn unit(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}

fn ensure_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::Dimension(format!("expected a non-empty square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(m.nrows())
}

fn ensure_finite(m: &ComplexMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// `‖M M* − I‖_op` for a square matrix.
pub fn unitarity_defect(m: &ComplexMatrix) -> Result<f64> {
    let n = ensure_square(m)?;
    let gram = m * m.adjoint() - ComplexMatrix::identity(n, n);
    Ok(operator_norm(&gram))
}

pub fn check_unitary(m: &ComplexMatrix, tol: f64) -> Result<bool> {
    Ok(unitarity_defect(m)? <= tol)
}

/// Largest singular value.
pub fn operator_norm(m: &ComplexMatrix) -> f64 {
    match (m.nrows(), m.ncols()) {
        (0, _) | (_, 0) => 0.0,
        (1, 1) => m[(0, 0)].norm(),
        _ => m.singular_values().max(),
    }
}

/// A square complex matrix validated to be unitary.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix(ComplexMatrix);

impl UnitaryMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(m, UNITARITY_TOL)
    }

    pub fn with_tolerance(m: ComplexMatrix, tol: f64) -> Result<Self> {
        ensure_finite(&m)?;
        let defect = unitarity_defect(&m)?;
        if defect > tol {
            return Err(Error::NotUnitary { defect, tol });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix the caller already knows to be unitary (products of
    /// unitaries, factors returned by a Schur decomposition, ...).
    pub(crate) fn new_unchecked(m: ComplexMatrix) -> Self {
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n, n))
    }

    pub fn diagonal(values: &[Complex64]) -> Result<Self> {
        Self::new(ComplexMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn mul(&self, other: &UnitaryMatrix) -> Self {
        Self(&self.0 * &other.0)
    }

    pub fn scaled(&self, phase: Complex64) -> Self {
        Self(&self.0 * phase)
    }

    /// `U^k` for any integer `k`; negative powers use the adjoint.
    pub fn pow(&self, k: i64) -> ComplexMatrix {
        let n = self.dim();
        let base = if k < 0 { self.0.adjoint() } else { self.0.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = ComplexMatrix::identity(n, n);
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &sq;
            }
            e >>= 1;
            if e > 0 {
                sq = &sq * &sq;
            }
        }
        acc
    }

    /// `U X U*`.
    pub fn conjugate(&self, x: &ComplexMatrix) -> ComplexMatrix {
        &self.0 * x * self.0.adjoint()
    }
}

/// Eigendata of a unitary matrix: unimodular eigenvalues and an orthonormal
/// eigenbasis stored column-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitarySpectrum {
    pub eigenvalues: Vec<Complex64>,
    pub vectors: UnitaryMatrix,
}

impl UnitarySpectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn diagonal(&self) -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.eigenvalues))
    }

    /// `‖S* A S − diag(a)‖_op`.
    pub fn residual(&self, a: &ComplexMatrix) -> f64 {
        let s = self.vectors.matrix();
        operator_norm(&(s.adjoint() * a * s - self.diagonal()))
    }

    /// `S diag(a) S*`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.vectors.conjugate(&self.diagonal())
    }
}

/// Index of the first component whose modulus is within `1e-12` of the
/// largest one.
pub(crate) fn dominant_index(v: nalgebra::DVectorView<'_, Complex64>) -> usize {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    v.iter().position(|z| z.norm() >= max - 1e-12).unwrap_or(0)
}

/// Rotates each column so that its dominant component is real and positive.
pub(crate) fn normalize_column_phases(m: &mut ComplexMatrix) {
    for mut col in m.column_iter_mut() {
        let p = dominant_index(col.as_view());
        let c = col[p];
        if c.norm() > 0.0 {
            let phase = c.conj() / c.norm();
            col *= phase;
        }
    }
}

/// Modified Gram–Schmidt over the selected columns, in place.
pub(crate) fn reorthonormalize(m: &mut ComplexMatrix, cols: &[usize]) {
    for (i, &c) in cols.iter().enumerate() {
        for &prev in &cols[..i] {
            let proj = m.column(prev).dotc(&m.column(c));
            let p = m.column(prev).clone_owned();
            let mut col = m.column_mut(c);
            col -= p * proj;
        }
        let norm = m.column(c).norm();
        if norm > 0.0 {
            let mut col = m.column_mut(c);
            col /= Complex64::new(norm, 0.0);
        }
    }
}

/// Sort key for unimodular eigenvalues: principal argument, with values within
/// the cluster tolerance of the branch cut counted as `π`.
pub(crate) fn sort_arg(z: Complex64) -> f64 {
    let a = principal_arg(z);
    if a <= -PI + CLUSTER_TOL {
        PI
    } else {
        a
    }
}

/// Unitary eigendecomposition via the complex Schur form. For a normal matrix
/// the triangular factor is diagonal up to rounding and the Schur vectors are
/// already an orthonormal eigenbasis.
///
/// Eigenvalues come back sorted by principal argument; eigenvalues closer than
/// [`CLUSTER_TOL`] form a cluster ordered by the dominant component of their
/// eigenvectors.
pub fn eig_unitary(u: &UnitaryMatrix) -> Result<UnitarySpectrum> {
    let n = u.dim();
    let schur = Schur::try_new(u.matrix().clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    let (mut q, t) = schur.unpack();
    normalize_column_phases(&mut q);

    let values: Vec<Complex64> = (0..n)
        .map(|i| {
            let d = t[(i, i)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sort_arg(values[i]).total_cmp(&sort_arg(values[j])));

    let clusters = cluster_runs(&order, |i| sort_arg(values[i]));
    let mut sorted = Vec::with_capacity(n);
    for run in clusters {
        let mut run = run;
        run.sort_by_key(|&i| dominant_index(q.column(i)));
        sorted.extend(run);
    }

    let mut s = ComplexMatrix::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    for (dst, &src) in sorted.iter().enumerate() {
        s.set_column(dst, &q.column(src));
        eigenvalues.push(values[src]);
    }
    for run in cluster_runs(&(0..n).collect::<Vec<_>>(), |i| sort_arg(eigenvalues[i])) {
        if run.len() > 1 {
            reorthonormalize(&mut s, &run);
        }
    }

    Ok(UnitarySpectrum { eigenvalues, vectors: UnitaryMatrix::new_unchecked(s) })
}

/// Splits an already sorted index list into runs whose consecutive keys differ
/// by less than [`CLUSTER_TOL`].
fn cluster_runs(order: &[usize], key: impl Fn(usize) -> f64) -> Vec<Vec<usize>> {
    let mut runs: Vec<Vec<usize>> = Vec::new();
    for &i in order {
        match runs.last_mut() {
            Some(run) if (key(i) - key(*run.last().unwrap())).abs() < CLUSTER_TOL => run.push(i),
            _ => runs.push(vec![i]),
        }
    }
    runs
}

/// Canonical up-to-phase representative of a multiset of unimodular numbers,
/// together with the pivot that produced it and the sorted index order.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct CanonicalRotation {
    pub form: Vec<f64>,
    pub pivot: usize,
    pub order: Vec<usize>,
}

fn reduce_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r >= TAU - CLUSTER_TOL {
        0.0
    } else {
        r
    }
}

fn lex_cmp_tol(a: &[f64], b: &[f64], tol: f64) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > tol {
            return x.total_cmp(y);
        }
    }
    Ordering::Equal
}

fn sorted_angles(spectrum: &[Complex64], shift: f64) -> (Vec<f64>, Vec<usize>) {
    let angles: Vec<f64> = spectrum.iter().map(|z| reduce_angle(z.arg() - shift)).collect();
    let mut order: Vec<usize> = (0..spectrum.len()).collect();
    order.sort_by(|&i, &j| angles[i].total_cmp(&angles[j]));
    (order.iter().map(|&i| angles[i]).collect(), order)
}

fn validate_unimodular(spectrum: &[Complex64]) -> Result<()> {
    if spectrum.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    if let Some(z) = spectrum.iter().find(|z| (z.norm() - 1.0).abs() > 1e-8) {
        return Err(Error::Validation(format!("spectrum value {z} is not unit-modulus")));
    }
    Ok(())
}

pub(crate) fn canonical_rotation(spectrum: &[Complex64]) -> Result<CanonicalRotation> {
    validate_unimodular(spectrum)?;
    let mut best: Option<CanonicalRotation> = None;
    for (pivot, z) in spectrum.iter().enumerate() {
        let (form, order) = sorted_angles(spectrum, z.arg());
        let better = match &best {
            None => true,
            Some(b) => lex_cmp_tol(&form, &b.form, CLUSTER_TOL) == Ordering::Less,
        };
        if better {
            best = Some(CanonicalRotation { form, pivot, order });
        }
    }
    Ok(best.expect("non-empty spectrum"))
}

/// Sorted arguments in `[0, 2π)` without any rotation; the strict-mode
/// counterpart of [`canonical_phase_form`].
pub(crate) fn sorted_phase_form(spectrum: &[Complex64]) -> Result<(Vec<f64>, Vec<usize>)> {
    validate_unimodular(spectrum)?;
    Ok(sorted_angles(spectrum, 0.0))
}

/// Lexicographically smallest sorted argument vector over all rotations that
/// send one eigenvalue to `1`. Two spectra that differ by a global unimodular
/// factor map to the same vector.
pub fn canonical_phase_form(spectrum: &[Complex64]) -> Result<Vec<f64>> {
    canonical_rotation(spectrum).map(|c| c.form)
}

/// Sup-metric between two argument vectors of equal length; `∞` otherwise.
pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn random_gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) / std::f64::consts::SQRT_2
}

pub fn random_phase<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    unit(rng.random_range(-PI..PI))
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the phases
/// of `diag(R)` pushed back into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> UnitaryMatrix {
    let g = ComplexMatrix::from_fn(n, n, |_, _| random_gaussian_complex(rng));
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            let mut col = q.column_mut(j);
            col *= phase;
        }
    }
    UnitaryMatrix::new_unchecked(q)
}
