//! Continuous-holomorphic sections of a flat bundle, stored as concomitants on
//! the strip cover `{0 ≤ Re z ≤ ln r1}`.
//!
//! In an eigenframe `S` of the generator (`A = S diag(a) S*`) a section is an
//! `n x n` grid of entries `f_jk(z) = Σ_m c_m e^{(K_jk + m) z}` and its value is
//! `F(z) = S (f_jk(z)) S*`. Because `e^{2πi K_jk} = a_j / a_k`, every such grid
//! satisfies `F(z + 2πik) = A^k F(z) A^{−k}`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bundle::{deck, transition, Chart, FlatBundle};
use crate::error::{Error, Result};
use crate::io::{EntryJson, SectionJson};
use crate::numerics::{operator_norm, random_gaussian_complex, ComplexMatrix, UnitaryMatrix};

/// Finite Laurent coefficient map `m ↦ c_m`.
pub type Laurent = BTreeMap<i64, Complex64>;

/// Tolerance on the integer part of exponent sums when multiplying.
pub const EXPONENT_DRIFT_TOL: f64 = 1e-9;
/// Bound on `‖S* A S − diag(a)‖` for a frame to be accepted.
pub const FRAME_TOL: f64 = 1e-9;

/// One modulus-automorphic entry `f(z) = Σ_m c_m e^{(K + m) z}`.
///
/// `f(z + 2πi) = e^{2πiK} f(z)` holds term by term, so `|f|` descends to the
/// annulus. Exact zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct ModAutoEntry {
    exponent: f64,
    laurent: Laurent,
}

impl ModAutoEntry {
    pub fn new(exponent: f64, laurent: Laurent) -> Self {
        let laurent = laurent.into_iter().filter(|(_, c)| *c != Complex64::new(0.0, 0.0)).collect();
        Self { exponent, laurent }
    }

    pub fn zero(exponent: f64) -> Self {
        Self { exponent, laurent: Laurent::new() }
    }

    pub fn constant(exponent: f64, c: Complex64) -> Self {
        Self::new(exponent, Laurent::from([(0, c)]))
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn laurent(&self) -> &Laurent {
        &self.laurent
    }

    pub fn is_zero(&self) -> bool {
        self.laurent.is_empty()
    }

    /// `e^{2πiK}`.
    pub fn multiplier(&self) -> Complex64 {
        Complex64::from_polar(1.0, TAU * self.exponent)
    }

    pub fn value(&self, z: Complex64) -> Complex64 {
        if self.laurent.is_empty() {
            return Complex64::new(0.0, 0.0);
        }
        let w = z.exp();
        let winv = w.inv();
        let sum: Complex64 = self
            .laurent
            .iter()
            .map(|(&m, &c)| {
                let p = if m >= 0 { w.powi(m as i32) } else { winv.powi((-m) as i32) };
                c * p
            })
            .sum();
        if self.exponent == 0.0 {
            sum
        } else {
            (z * self.exponent).exp() * sum
        }
    }

    /// Coefficient-wise sum; both entries must carry the same exponent.
    fn add(&self, other: &Self) -> Self {
        let mut laurent = self.laurent.clone();
        for (&m, &c) in &other.laurent {
            *laurent.entry(m).or_default() += c;
        }
        Self::new(self.exponent, laurent)
    }

    fn scale(&self, c: Complex64) -> Self {
        Self::new(self.exponent, self.laurent.iter().map(|(&m, &v)| (m, v * c)).collect())
    }

    /// Accumulates `self · other` into `acc`, re-expressed against `exponent`.
    fn mul_into(&self, other: &Self, exponent: f64, acc: &mut Laurent) -> Result<()> {
        if self.is_zero() || other.is_zero() {
            return Ok(());
        }
        let drift = self.exponent + other.exponent - exponent;
        let shift = drift.round();
        if (drift - shift).abs() > EXPONENT_DRIFT_TOL {
            return Err(Error::ExponentDrift(drift));
        }
        let shift = shift as i64;
        for (&m1, &c1) in &self.laurent {
            for (&m2, &c2) in &other.laurent {
                *acc.entry(m1 + m2 + shift).or_default() += c1 * c2;
            }
        }
        Ok(())
    }

    /// The same function written against `exponent`, which must differ from
    /// the stored one by an integer (within [`EXPONENT_DRIFT_TOL`]).
    pub(crate) fn rebased(&self, exponent: f64, phase: Complex64) -> Result<Self> {
        let drift = self.exponent - exponent;
        let shift = drift.round();
        if (drift - shift).abs() > EXPONENT_DRIFT_TOL {
            return Err(Error::ExponentDrift(drift));
        }
        let shift = shift as i64;
        Ok(Self::new(exponent, self.laurent.iter().map(|(&m, &c)| (m + shift, c * phase)).collect()))
    }

    fn to_json(&self) -> EntryJson {
        EntryJson { exponent: self.exponent, laurent: self.laurent.clone() }
    }
}

/// Result of a multiplier test on one entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultiplierCheck {
    /// `max |f(z + 2πi) − u f(z)|`.
    pub residual: f64,
    /// `max ||f(z + 2πi)| − |f(z)||`.
    pub modulus_defect: f64,
}

pub fn multiplier_check(entry: &ModAutoEntry, expected: Complex64, samples: &[Complex64]) -> MultiplierCheck {
    let mut out = MultiplierCheck { residual: 0.0, modulus_defect: 0.0 };
    for &z in samples {
        let f0 = entry.value(z);
        let f1 = entry.value(deck(z, 1));
        out.residual = out.residual.max((f1 - expected * f0).norm());
        out.modulus_defect = out.modulus_defect.max((f1.norm() - f0.norm()).abs());
    }
    out
}

/// `nre x nim` lattice over `[0, ln r1] x [0, 2π)`.
pub fn strip_samples(log_r1: f64, nre: usize, nim: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(nre * nim);
    for i in 0..nre {
        let re = if nre > 1 { log_r1 * i as f64 / (nre - 1) as f64 } else { 0.0 };
        for j in 0..nim {
            out.push(Complex64::new(re, TAU * j as f64 / nim as f64));
        }
    }
    out
}

/// The default 8 x 8 residual lattice.
pub fn default_samples(bundle: &FlatBundle) -> Vec<Complex64> {
    strip_samples(bundle.annulus().log_r1(), 8, 8)
}

pub const DEFAULT_K_RANGE: i64 = 3;

/// A continuous-holomorphic section of a flat bundle.
#[derive(Clone, Debug)]
pub struct Section {
    bundle: Arc<FlatBundle>,
    frame: UnitaryMatrix,
    entries: Vec<ModAutoEntry>,
}

impl PartialEq for Section {
    fn eq(&self, other: &Self) -> bool {
        self.same_space(other) && self.entries == other.entries
    }
}

fn frame_residual(bundle: &FlatBundle, frame: &ComplexMatrix) -> f64 {
    let d = bundle.spectrum().diagonal();
    operator_norm(&(frame.adjoint() * bundle.generator().matrix() * frame - d))
}

impl Section {
    /// Builds a section, checking the frame against the generator and every
    /// entry exponent against the bundle's exponent table.
    pub fn new(bundle: Arc<FlatBundle>, frame: UnitaryMatrix, entries: Vec<ModAutoEntry>) -> Result<Self> {
        let s = Self::from_parts_unchecked(bundle, frame, entries)?;
        let fr = s.frame_residual();
        if fr > FRAME_TOL {
            return Err(Error::FrameMismatch(format!(
                "frame does not diagonalize the generator in eigenvalue order (residual {fr:.2e})"
            )));
        }
        let drift = s.exponent_conformance();
        if drift != 0.0 {
            return Err(Error::Validation(format!("entry exponents deviate from the bundle table by {drift:.3e}")));
        }
        Ok(s)
    }

    /// Shape checks only; used to load data that is about to be verified.
    pub fn from_parts_unchecked(
        bundle: Arc<FlatBundle>,
        frame: UnitaryMatrix,
        entries: Vec<ModAutoEntry>,
    ) -> Result<Self> {
        let n = bundle.dim();
        if frame.dim() != n {
            return Err(Error::Dimension(format!("frame is {}x{}, bundle rank {n}", frame.dim(), frame.dim())));
        }
        if entries.len() != n * n {
            return Err(Error::LengthMismatch { expected: n * n, got: entries.len() });
        }
        Ok(Self { bundle, frame, entries })
    }

    /// Section over `bundle` in its own eigenframe with entries from `f(j, k)`.
    fn from_fn(bundle: &Arc<FlatBundle>, mut f: impl FnMut(usize, usize, f64) -> ModAutoEntry) -> Self {
        let n = bundle.dim();
        let mut entries = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                entries.push(f(j, k, bundle.exponent(j, k)));
            }
        }
        Self { bundle: bundle.clone(), frame: bundle.spectrum().vectors.clone(), entries }
    }

    pub fn zero(bundle: &Arc<FlatBundle>) -> Self {
        Self::from_fn(bundle, |_, _, e| ModAutoEntry::zero(e))
    }

    pub fn identity(bundle: &Arc<FlatBundle>) -> Self {
        scalar_section(bundle, &Laurent::from([(0, Complex64::new(1.0, 0.0))]))
    }

    pub fn bundle(&self) -> &Arc<FlatBundle> {
        &self.bundle
    }

    pub fn frame(&self) -> &UnitaryMatrix {
        &self.frame
    }

    pub fn dim(&self) -> usize {
        self.bundle.dim()
    }

    pub fn entry(&self, j: usize, k: usize) -> &ModAutoEntry {
        &self.entries[j * self.dim() + k]
    }

    pub fn entries(&self) -> &[ModAutoEntry] {
        &self.entries
    }

    /// Same bundle and same frame.
    pub fn same_space(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.bundle, &other.bundle) || *self.bundle == *other.bundle) && self.frame == other.frame
    }

    fn require_same_space(&self, other: &Self) -> Result<()> {
        if self.same_space(other) {
            Ok(())
        } else {
            Err(Error::BundleMismatch)
        }
    }

    pub fn frame_residual(&self) -> f64 {
        frame_residual(&self.bundle, self.frame.matrix())
    }

    /// `max |K_entry − K_bundle|` over all entries.
    pub fn exponent_conformance(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in 0..n {
                worst = worst.max((self.entry(j, k).exponent - self.bundle.exponent(j, k)).abs());
            }
        }
        worst
    }

    /// Entry values `(f_jk(z))` in the eigenframe.
    pub fn eval_frame(&self, z: Complex64) -> ComplexMatrix {
        let n = self.dim();
        ComplexMatrix::from_fn(n, n, |j, k| self.entry(j, k).value(z))
    }

    /// `S (f_jk(z)) S*` without the strip check; `z` may lie in any deck
    /// translate of the strip.
    pub fn value_at(&self, z: Complex64) -> ComplexMatrix {
        self.frame.conjugate(&self.eval_frame(z))
    }

    pub fn eval_strip(&self, z: Complex64) -> Result<ComplexMatrix> {
        if !self.bundle.annulus().strip_contains(z) {
            return Err(Error::OutsideStrip(z.to_string()));
        }
        Ok(self.value_at(z))
    }

    /// Pointwise adjoint `F(z)*`. Not a section of the holomorphic algebra;
    /// provided for norm experiments.
    pub fn eval_adjoint_strip(&self, z: Complex64) -> Result<ComplexMatrix> {
        self.eval_strip(z).map(|m| m.adjoint())
    }

    /// `σ_U(w) = F(ln_U(w))`.
    pub fn eval_annulus(&self, w: Complex64, chart: &Chart) -> Result<ComplexMatrix> {
        if !self.bundle.annulus().contains(w) {
            return Err(Error::OutsideAnnulus(w.to_string()));
        }
        self.eval_strip(chart.log(w)?)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.require_same_space(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a.add(b)).collect();
        Ok(Self { entries, ..self.clone() })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { entries: self.entries.iter().map(|e| e.scale(c)).collect(), ..self.clone() }
    }

    /// Pointwise product. Integer exponent drift from `K_jq + K_qk − K_jk` is
    /// folded into the Laurent indices, so the result conforms to the bundle's
    /// exponent table exactly.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.require_same_space(other)?;
        let n = self.dim();
        let mut entries = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                let exponent = self.bundle.exponent(j, k);
                let mut acc = Laurent::new();
                for q in 0..n {
                    self.entry(j, q).mul_into(other.entry(q, k), exponent, &mut acc)?;
                }
                entries.push(ModAutoEntry::new(exponent, acc));
            }
        }
        Ok(Self { entries, ..self.clone() })
    }

    /// `max ‖F(z + 2πik) − A^k F(z) A^{−k}‖` over samples and `|k| ≤ k_range`.
    pub fn concomitant_residual(&self, samples: &[Complex64], k_range: i64) -> f64 {
        let powers: Vec<(i64, ComplexMatrix)> =
            (-k_range..=k_range).map(|k| (k, self.bundle.generator().pow(k))).collect();
        let mut worst: f64 = 0.0;
        for &z in samples {
            let f = self.value_at(z);
            for (k, p) in &powers {
                let lhs = self.value_at(deck(z, *k));
                let rhs = p * &f * p.adjoint();
                worst = worst.max(operator_norm(&(lhs - rhs)));
            }
        }
        worst
    }

    /// Worst multiplier-law violation over the entries, each tested against
    /// `a_j / a_k`.
    pub fn multiplier_residual(&self, samples: &[Complex64]) -> MultiplierCheck {
        let n = self.dim();
        let mut out = MultiplierCheck { residual: 0.0, modulus_defect: 0.0 };
        for j in 0..n {
            for k in 0..n {
                let c = multiplier_check(self.entry(j, k), self.bundle.multiplier(j, k), samples);
                out.residual = out.residual.max(c.residual);
                out.modulus_defect = out.modulus_defect.max(c.modulus_defect);
            }
        }
        out
    }

    /// Largest disagreement between chart representatives at shared points,
    /// after applying the transition conjugation.
    pub fn chart_consistency(&self, charts: &[Chart], points: &[Complex64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &w in points {
            let hits: Vec<&Chart> = charts.iter().filter(|c| c.contains(w)).collect();
            for u in &hits {
                let su = self.eval_annulus(w, u)?;
                for v in &hits {
                    let t = transition(&self.bundle, u, v, w)?;
                    let sv = self.eval_annulus(w, v)?;
                    worst = worst.max(operator_norm(&(su.clone() - t.apply(&sv))));
                }
            }
        }
        Ok(worst)
    }

    /// The same section seen through the frame change `T`: a section of the
    /// bundle generated by `T* A T` with values `T* F(z) T`.
    pub fn to_frame(&self, t: &UnitaryMatrix) -> Result<Self> {
        let bundle = Arc::new(self.bundle.conjugated(t)?);
        let frame = UnitaryMatrix::new_unchecked(t.matrix().adjoint() * self.frame.matrix());
        Ok(Self { bundle, frame, entries: self.entries.clone() })
    }

    pub(crate) fn with_entries(
        &self,
        bundle: Arc<FlatBundle>,
        frame: UnitaryMatrix,
        entries: Vec<ModAutoEntry>,
    ) -> Self {
        debug_assert_eq!(entries.len(), self.entries.len());
        Self { bundle, frame, entries }
    }

    pub fn to_json(&self) -> SectionJson {
        let n = self.dim();
        SectionJson {
            bundle: self.bundle.to_json(),
            frame: self.frame.matrix().clone(),
            entries: (0..n).map(|j| (0..n).map(|k| self.entry(j, k).to_json()).collect()).collect(),
        }
    }

    /// Loads a section. With `strict` the frame and exponent checks of
    /// [`Section::new`] apply; without it only shapes are checked.
    pub fn from_json(doc: &SectionJson, strict: bool) -> Result<Self> {
        let bundle = Arc::new(FlatBundle::from_json(&doc.bundle)?);
        Self::from_json_in(bundle, doc, strict)
    }

    /// Like [`Section::from_json`] but reuses an already loaded bundle, which
    /// must match the document's.
    pub fn from_json_in(bundle: Arc<FlatBundle>, doc: &SectionJson, strict: bool) -> Result<Self> {
        if doc.bundle.r1 != bundle.annulus().r1() || doc.bundle.generator != *bundle.generator().matrix() {
            return Err(Error::BundleMismatch);
        }
        let n = bundle.dim();
        if doc.entries.len() != n || doc.entries.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(format!("entries must be a {n}x{n} grid")));
        }
        let frame = UnitaryMatrix::new(doc.frame.clone())?;
        let entries = doc.entries.iter().flatten().map(|e| ModAutoEntry::new(e.exponent, e.laurent.clone())).collect();
        if strict {
            Self::new(bundle, frame, entries)
        } else {
            Self::from_parts_unchecked(bundle, frame, entries)
        }
    }
}

/// Constant diagonal section `diag(D_1, …, D_n)` in the eigenframe.
pub fn family_d(bundle: &Arc<FlatBundle>, d: &[Complex64]) -> Result<Section> {
    let n = bundle.dim();
    if d.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: d.len() });
    }
    Ok(Section::from_fn(bundle, |j, k, e| if j == k { ModAutoEntry::constant(e, d[j]) } else { ModAutoEntry::zero(e) }))
}

/// Off-diagonal section with entries `C_jk e^{K_jk z}`.
pub fn family_c(bundle: &Arc<FlatBundle>, c: &ComplexMatrix) -> Result<Section> {
    let n = bundle.dim();
    if c.nrows() != n || c.ncols() != n {
        return Err(Error::Dimension(format!("coefficients are {}x{}, bundle rank {n}", c.nrows(), c.ncols())));
    }
    if let Some(j) = (0..n).find(|&j| c[(j, j)] != Complex64::new(0.0, 0.0)) {
        return Err(Error::NonZeroDiagonal(j));
    }
    Ok(Section::from_fn(bundle, |j, k, e| ModAutoEntry::constant(e, c[(j, k)])))
}

/// Central section `p(w) I_n` for a Laurent polynomial `p`.
pub fn scalar_section(bundle: &Arc<FlatBundle>, p: &Laurent) -> Section {
    Section::from_fn(bundle, |j, k, e| if j == k { ModAutoEntry::new(e, p.clone()) } else { ModAutoEntry::zero(e) })
}

/// Seeded section whose entries carry Gaussian coefficients for
/// `m ∈ [−degree, degree]`.
pub fn random_section(bundle: &Arc<FlatBundle>, degree: u32, seed: u64) -> Section {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = degree as i64;
    Section::from_fn(bundle, |_, _, e| {
        let laurent = (-d..=d).map(|m| (m, random_gaussian_complex(&mut rng))).collect();
        ModAutoEntry::new(e, laurent)
    })
}
