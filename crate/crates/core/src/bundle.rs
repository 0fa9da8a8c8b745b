//! Flat `PU_n` bundles over the closed annulus `1 ≤ |w| ≤ r1`.
//!
//! A bundle is fixed by one unitary generator `A`: the deck step `z ↦ z + 2πi`
//! on the strip cover acts on fibres by `Ad(A)`. Everything derived from `A`
//! (eigenvalues, eigenbasis, exponent table) is computed once at construction.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::BundleJson;
use crate::numerics::{
    canonical_rotation, eig_unitary, operator_norm, principal_arg, sorted_phase_form, sup_distance, ComplexMatrix,
    UnitaryMatrix, UnitarySpectrum,
};

/// Default tolerance on canonical-form mismatch when deciding conjugacy.
pub const DECISION_TOL: f64 = 1e-7;
/// Default number of charts in an atlas.
pub const DEFAULT_CHARTS: usize = 4;

const EDGE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    r1: f64,
}

impl Annulus {
    pub fn new(r1: f64) -> Result<Self> {
        if !(r1.is_finite() && r1 > 1.0) {
            return Err(Error::InvalidRadius(r1));
        }
        Ok(Self { r1 })
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    /// Width of the strip cover, `ln r1`.
    pub fn log_r1(&self) -> f64 {
        self.r1.ln()
    }

    pub fn contains(&self, w: Complex64) -> bool {
        let r = w.norm();
        r >= 1.0 - EDGE_TOL && r <= self.r1 * (1.0 + EDGE_TOL)
    }

    pub fn strip_contains(&self, z: Complex64) -> bool {
        z.re >= -EDGE_TOL && z.re <= self.log_r1() + EDGE_TOL
    }
}

/// Exponent table with `e^{2πi K[j][k]} = a_j / a_k`.
///
/// The upper triangle takes the principal branch `(−1/2, 1/2]`; the lower
/// triangle is its negation, so the table is exactly antisymmetric.
pub fn exponent_table(eigenvalues: &[Complex64]) -> DMatrix<f64> {
    let n = eigenvalues.len();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        for l in (j + 1)..n {
            let ratio = eigenvalues[j] * eigenvalues[l].conj();
            let e = principal_arg(ratio) / TAU;
            k[(j, l)] = e;
            k[(l, j)] = -e;
        }
    }
    k
}

/// A flat `PU_n(ℂ)` bundle over the annulus with cached eigendata.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatBundle {
    annulus: Annulus,
    generator: UnitaryMatrix,
    spectrum: UnitarySpectrum,
    exponents: DMatrix<f64>,
}

impl FlatBundle {
    pub fn new(generator: UnitaryMatrix, r1: f64) -> Result<Self> {
        let annulus = Annulus::new(r1)?;
        let spectrum = eig_unitary(&generator)?;
        let exponents = exponent_table(&spectrum.eigenvalues);
        Ok(Self { annulus, generator, spectrum, exponents })
    }

    /// The bundle generated by `T* A T`, carrying the eigenbasis `T* S` so that
    /// eigenvalue order and exponents are unchanged.
    pub fn conjugated(&self, t: &UnitaryMatrix) -> Result<Self> {
        if t.dim() != self.dim() {
            return Err(Error::Dimension(format!("frame change of size {} on a rank-{} bundle", t.dim(), self.dim())));
        }
        let tm = t.matrix();
        let generator = UnitaryMatrix::new_unchecked(tm.adjoint() * self.generator.matrix() * tm);
        let vectors = UnitaryMatrix::new_unchecked(tm.adjoint() * self.spectrum.vectors.matrix());
        Ok(Self {
            annulus: self.annulus,
            generator,
            spectrum: UnitarySpectrum { eigenvalues: self.spectrum.eigenvalues.clone(), vectors },
            exponents: self.exponents.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    pub fn annulus(&self) -> Annulus {
        self.annulus
    }

    pub fn generator(&self) -> &UnitaryMatrix {
        &self.generator
    }

    pub fn spectrum(&self) -> &UnitarySpectrum {
        &self.spectrum
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.spectrum.eigenvalues
    }

    pub fn exponents(&self) -> &DMatrix<f64> {
        &self.exponents
    }

    pub fn exponent(&self, j: usize, k: usize) -> f64 {
        self.exponents[(j, k)]
    }

    /// `a_j / a_k`, the deck multiplier of entry `(j, k)` in the eigenframe.
    pub fn multiplier(&self, j: usize, k: usize) -> Complex64 {
        let a = &self.spectrum.eigenvalues;
        a[j] * a[k].conj()
    }

    /// `max |e^{2πi K[j][k]} − a_j/a_k|`.
    pub fn exponent_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in 0..n {
                let lhs = Complex64::from_polar(1.0, TAU * self.exponents[(j, k)]);
                worst = worst.max((lhs - self.multiplier(j, k)).norm());
            }
        }
        worst
    }

    /// `A^k X A^{−k}`.
    pub fn deck_action(&self, k: i64, x: &ComplexMatrix) -> ComplexMatrix {
        let p = self.generator.pow(k);
        &p * x * p.adjoint()
    }

    pub fn to_json(&self) -> BundleJson {
        BundleJson { r1: self.annulus.r1, generator: self.generator.matrix().clone() }
    }

    pub fn from_json(doc: &BundleJson) -> Result<Self> {
        Self::new(UnitaryMatrix::new(doc.generator.clone())?, doc.r1)
    }
}

pub fn make_bundle(a: UnitaryMatrix, r1: f64) -> Result<FlatBundle> {
    FlatBundle::new(a, r1)
}

/// Deck transformation of the strip cover.
pub fn deck(z: Complex64, k: i64) -> Complex64 {
    z + Complex64::new(0.0, TAU * k as f64)
}

/// An angular sector of the annulus with a fixed branch of the logarithm.
///
/// `ln_U(w) = ln|w| + i(θ + 2π·branch_offset)` where `θ` is the representative
/// of `arg w` inside `(theta_lo, theta_hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub index: usize,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub branch_offset: i64,
}

impl Chart {
    fn local_angle(&self, w: Complex64) -> Option<f64> {
        let theta = self.theta_lo + (w.arg() - self.theta_lo).rem_euclid(TAU);
        (theta > self.theta_lo && theta < self.theta_hi).then_some(theta)
    }

    pub fn contains(&self, w: Complex64) -> bool {
        w.norm() > 0.0 && self.local_angle(w).is_some()
    }

    /// The chart's logarithm, landing in the strip cover.
    pub fn log(&self, w: Complex64) -> Result<Complex64> {
        if w.norm() == 0.0 {
            return Err(Error::OutsideChart(w.to_string()));
        }
        let theta = self.local_angle(w).ok_or_else(|| Error::OutsideChart(w.to_string()))?;
        Ok(Complex64::new(w.norm().ln(), theta + TAU * self.branch_offset as f64))
    }
}

/// `m` equal overlapping sectors of width `(5/4)·2π/m`, counter-clockwise from
/// angle 0. Lower edges are reduced into `[−π, π)` and the number of turns
/// removed becomes the branch offset, so each chart's logarithm continues the
/// previous chart's and the last chart meets the first one deck step higher.
pub fn atlas(_annulus: &Annulus, m: usize) -> Result<Vec<Chart>> {
    if m < 3 {
        return Err(Error::ChartCount(m));
    }
    let step = TAU / m as f64;
    let pad = step / 8.0;
    Ok((0..m)
        .map(|i| {
            let lo = i as f64 * step - pad;
            let hi = (i + 1) as f64 * step + pad;
            let offset = ((lo + PI) / TAU).floor() as i64;
            let shift = TAU * offset as f64;
            Chart { index: i, theta_lo: lo - shift, theta_hi: hi - shift, branch_offset: offset }
        })
        .collect())
}

/// Transition data between two charts at a shared point: `σ_U = Ad(A^k) σ_V`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub k: i64,
    pub conjugator: ComplexMatrix,
}

impl Transition {
    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        &self.conjugator * x * self.conjugator.adjoint()
    }
}

pub fn transition(bundle: &FlatBundle, u: &Chart, v: &Chart, w: Complex64) -> Result<Transition> {
    let lu = u.log(w)?;
    let lv = v.log(w)?;
    let k = ((lu.im - lv.im) / TAU).round() as i64;
    Ok(Transition { k, conjugator: bundle.generator().pow(k) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Equivalent,
    NotEquivalent,
}

/// Whether the scalar in `V A V* = λ B` is free (`Projective`) or pinned to 1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConjugacyMode {
    #[default]
    Projective,
    Strict,
}

/// Outcome of a conjugacy decision between two generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub verdict: Verdict,
    pub lambda: Option<Complex64>,
    #[serde(rename = "V")]
    pub v: Option<UnitaryMatrix>,
    /// `‖V A V* − λ B‖` for the returned witness.
    pub residual: Option<f64>,
    #[serde(rename = "invariantA")]
    pub invariant_a: Vec<f64>,
    #[serde(rename = "invariantB")]
    pub invariant_b: Vec<f64>,
    /// Sup-distance between the two invariants.
    pub gap: f64,
}

impl EquivalenceReport {
    pub fn is_equivalent(&self) -> bool {
        self.verdict == Verdict::Equivalent
    }

    pub fn witness(&self) -> Option<(&UnitaryMatrix, Complex64)> {
        Some((self.v.as_ref()?, self.lambda?))
    }
}

fn check_same_dim(a: &UnitaryMatrix, b: &UnitaryMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("{}x{} vs {}x{}", a.dim(), a.dim(), b.dim(), b.dim())));
    }
    Ok(())
}

/// `Σ_t s^B_{order_b[t]} (s^A_{order_a[t]})*`.
pub(crate) fn matched_basis_map(
    sa: &UnitarySpectrum,
    sb: &UnitarySpectrum,
    order_a: &[usize],
    order_b: &[usize],
) -> ComplexMatrix {
    let n = sa.dim();
    let mut v = ComplexMatrix::zeros(n, n);
    for (&i, &j) in order_a.iter().zip(order_b) {
        v += sb.vectors.matrix().column(j) * sa.vectors.matrix().column(i).adjoint();
    }
    v
}

pub(crate) fn witness_residual(a: &ComplexMatrix, b: &ComplexMatrix, v: &ComplexMatrix, lambda: Complex64) -> f64 {
    operator_norm(&(v * a * v.adjoint() - b * lambda))
}

pub fn conjugacy(a: &UnitaryMatrix, b: &UnitaryMatrix, tol: f64, mode: ConjugacyMode) -> Result<EquivalenceReport> {
    check_same_dim(a, b)?;
    let sa = eig_unitary(a)?;
    let sb = eig_unitary(b)?;

    let (form_a, order_a, form_b, order_b, lambda) = match mode {
        ConjugacyMode::Projective => {
            let ca = canonical_rotation(&sa.eigenvalues)?;
            let cb = canonical_rotation(&sb.eigenvalues)?;
            let lambda = sa.eigenvalues[ca.pivot] * sb.eigenvalues[cb.pivot].conj();
            (ca.form, ca.order, cb.form, cb.order, lambda)
        }
        ConjugacyMode::Strict => {
            let (fa, oa) = sorted_phase_form(&sa.eigenvalues)?;
            let (fb, ob) = sorted_phase_form(&sb.eigenvalues)?;
            (fa, oa, fb, ob, Complex64::new(1.0, 0.0))
        }
    };
    let gap = sup_distance(&form_a, &form_b);
    if gap > tol {
        return Ok(EquivalenceReport {
            verdict: Verdict::NotEquivalent,
            lambda: None,
            v: None,
            residual: None,
            invariant_a: form_a,
            invariant_b: form_b,
            gap,
        });
    }

    let v = matched_basis_map(&sa, &sb, &order_a, &order_b);
    let residual = witness_residual(a.matrix(), b.matrix(), &v, lambda);
    if residual > tol {
        return Err(Error::Numerical(format!(
            "spectra agree to {gap:.2e} but the matched-eigenbasis witness has residual {residual:.2e}"
        )));
    }
    Ok(EquivalenceReport {
        verdict: Verdict::Equivalent,
        lambda: Some(lambda),
        v: Some(UnitaryMatrix::new_unchecked(v)),
        residual: Some(residual),
        invariant_a: form_a,
        invariant_b: form_b,
        gap,
    })
}

/// Decides whether `V A V* = λ B` for some unitary `V` and unimodular `λ`,
/// i.e. whether the two generators define conjugate `PU_n` representations.
pub fn pu_equivalent(a: &UnitaryMatrix, b: &UnitaryMatrix, tol: f64) -> Result<EquivalenceReport> {
    conjugacy(a, b, tol, ConjugacyMode::Projective)
}

/// Plain unitary conjugacy, `V A V* = B`.
pub fn strictly_conjugate(a: &UnitaryMatrix, b: &UnitaryMatrix, tol: f64) -> Result<EquivalenceReport> {
    conjugacy(a, b, tol, ConjugacyMode::Strict)
}
