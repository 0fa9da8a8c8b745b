//! The section-algebra isomorphism `F ↦ V F V*` induced by a witness
//! `V A V* = λ B`, and the checks that it is a completely isometric,
//! center-fixing homomorphism.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::{
    conjugacy, make_bundle, witness_residual, ConjugacyMode, EquivalenceReport, FlatBundle, DECISION_TOL,
};
use crate::error::{Error, Result};
use crate::norms::{complete_norm, GridSpec};
use crate::numerics::{operator_norm, ComplexMatrix, UnitaryMatrix};
use crate::sections::{
    default_samples, family_c, family_d, random_section, scalar_section, Laurent, ModAutoEntry, Section, FRAME_TOL,
};

/// How far `S_B* V S_A` may stray from a phased permutation.
pub const PERMUTATION_TOL: f64 = 1e-7;

/// How the eigenframe of a source section lines up with the target bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameAlignment {
    /// Frame of the mapped sections.
    pub target_frame: UnitaryMatrix,
    /// Source eigen-index `j` lands on target index `perm[j]`.
    pub perm: Vec<usize>,
    pub phases: Vec<Complex64>,
    /// The target eigenbasis was rebuilt from `V S_A` because `S_B* V S_A`
    /// was not a phased permutation (degenerate eigenspaces).
    pub realigned: bool,
}

/// `F ↦ V F V*` from sections of the source bundle to sections of the target.
#[derive(Clone, Debug)]
pub struct InducedMap {
    source: Arc<FlatBundle>,
    target: Arc<FlatBundle>,
    v: UnitaryMatrix,
    lambda: Complex64,
    residual: f64,
    alignment: FrameAlignment,
}

fn phased_permutation(p: &ComplexMatrix) -> Option<(Vec<usize>, Vec<Complex64>)> {
    let n = p.nrows();
    let mut perm = Vec::with_capacity(n);
    let mut phases = Vec::with_capacity(n);
    let mut used = vec![false; n];
    for j in 0..n {
        let (i, z) = p.column(j).iter().copied().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))?;
        if used[i] || z.norm() < 1.0 - PERMUTATION_TOL {
            return None;
        }
        used[i] = true;
        perm.push(i);
        phases.push(z / z.norm());
    }
    Some((perm, phases))
}

impl InducedMap {
    pub fn new(
        source: Arc<FlatBundle>,
        target: Arc<FlatBundle>,
        v: UnitaryMatrix,
        lambda: Complex64,
        tol: f64,
    ) -> Result<Self> {
        if source.dim() != target.dim() || v.dim() != source.dim() {
            return Err(Error::Dimension("witness, source and target ranks differ".into()));
        }
        if source.annulus() != target.annulus() {
            return Err(Error::Validation("source and target live over different annuli".into()));
        }
        let residual = witness_residual(source.generator().matrix(), target.generator().matrix(), v.matrix(), lambda);
        if residual > tol {
            return Err(Error::InvalidWitness { residual, tol });
        }
        let mut map = Self {
            alignment: FrameAlignment {
                target_frame: target.spectrum().vectors.clone(),
                perm: Vec::new(),
                phases: Vec::new(),
                realigned: false,
            },
            source,
            target,
            v,
            lambda,
            residual,
        };
        map.alignment = map.align(&map.source.spectrum().vectors)?;
        Ok(map)
    }

    pub fn from_report(
        source: Arc<FlatBundle>,
        target: Arc<FlatBundle>,
        report: &EquivalenceReport,
        tol: f64,
    ) -> Result<Self> {
        let (v, lambda) = report.witness().ok_or_else(|| Error::Validation("report carries no witness".into()))?;
        Self::new(source, target, v.clone(), lambda, tol)
    }

    pub fn source(&self) -> &Arc<FlatBundle> {
        &self.source
    }

    pub fn target(&self) -> &Arc<FlatBundle> {
        &self.target
    }

    pub fn witness(&self) -> (&UnitaryMatrix, Complex64) {
        (&self.v, self.lambda)
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Alignment of the source bundle's own eigenframe.
    pub fn alignment(&self) -> &FrameAlignment {
        &self.alignment
    }

    /// Lines up a source frame with the target: first against the target's
    /// eigenbasis, then, if `S_B* V S` is not a phased permutation, against a
    /// target eigenbasis rebuilt from `V S`.
    fn align(&self, source_frame: &UnitaryMatrix) -> Result<FrameAlignment> {
        let sb = &self.target.spectrum().vectors;
        let vs = self.v.matrix() * source_frame.matrix();
        let p = sb.matrix().adjoint() * &vs;
        if let Some((perm, phases)) = phased_permutation(&p) {
            return Ok(FrameAlignment { target_frame: sb.clone(), perm, phases, realigned: false });
        }

        // V s_j is an eigenvector of B for a_j / λ; give it the slot of the
        // closest unused target eigenvalue.
        let n = self.source.dim();
        let a = self.source.eigenvalues();
        let b = self.target.eigenvalues();
        let mut used = vec![false; n];
        let mut perm = Vec::with_capacity(n);
        for aj in a {
            let want = aj / self.lambda;
            let slot = (0..n)
                .filter(|&i| !used[i])
                .min_by(|&x, &y| (b[x] - want).norm().total_cmp(&(b[y] - want).norm()))
                .expect("unused slot");
            used[slot] = true;
            perm.push(slot);
        }
        let mut frame = ComplexMatrix::zeros(n, n);
        for (j, &i) in perm.iter().enumerate() {
            frame.set_column(i, &vs.column(j));
        }
        let residual = operator_norm(
            &(frame.adjoint() * self.target.generator().matrix() * &frame - self.target.spectrum().diagonal()),
        );
        if residual > FRAME_TOL {
            return Err(Error::FrameMismatch(format!(
                "realigned target frame leaves residual {residual:.2e}; eigenbases cannot be matched"
            )));
        }
        Ok(FrameAlignment {
            target_frame: UnitaryMatrix::new_unchecked(frame),
            perm,
            phases: vec![Complex64::new(1.0, 0.0); n],
            realigned: true,
        })
    }

    /// Maps a source section to the target: entries are permuted by the
    /// alignment, phases folded into coefficients and integer exponent drift
    /// into Laurent indices.
    pub fn apply(&self, section: &Section) -> Result<Section> {
        let bundle = section.bundle();
        if !(Arc::ptr_eq(bundle, &self.source) || **bundle == *self.source) {
            return Err(Error::BundleMismatch);
        }
        let computed;
        let al = if *section.frame() == self.source.spectrum().vectors {
            &self.alignment
        } else {
            computed = self.align(section.frame())?;
            &computed
        };
        let n = section.dim();
        let mut entries = vec![ModAutoEntry::zero(0.0); n * n];
        for j in 0..n {
            for k in 0..n {
                let (pj, pk) = (al.perm[j], al.perm[k]);
                let phase = al.phases[j] * al.phases[k].conj();
                entries[pj * n + pk] = section.entry(j, k).rebased(self.target.exponent(pj, pk), phase)?;
            }
        }
        Ok(section.with_entries(self.target.clone(), al.target_frame.clone(), entries))
    }

    /// `map_BC ∘ map_AB` as a single map with witness `(V_BC V_AB, λ_BC λ_AB)`.
    pub fn compose(&self, next: &InducedMap, tol: f64) -> Result<InducedMap> {
        if *self.target != *next.source {
            return Err(Error::BundleMismatch);
        }
        InducedMap::new(self.source.clone(), next.target.clone(), next.v.mul(&self.v), next.lambda * self.lambda, tol)
    }
}

fn cyclic_blocks(sections: &[Section], level: usize) -> Vec<Vec<Vec<Section>>> {
    let per = level * level;
    let count = (sections.len() / per).max(1);
    (0..count)
        .map(|b| {
            (0..level)
                .map(|p| (0..level).map(|q| sections[(b * per + p * level + q) % sections.len()].clone()).collect())
                .collect()
        })
        .collect()
}

/// For each level `ℓ` in `1..=levels`, the largest gap between the complete
/// norm of an `ℓ x ℓ` block of test sections and that of its image. Blocks
/// are filled from `sections` cyclically.
pub fn verify_isometry(map: &InducedMap, sections: &[Section], levels: usize, grid: &GridSpec) -> Result<Vec<f64>> {
    if levels == 0 {
        return Err(Error::Validation("levels must be at least 1".into()));
    }
    if sections.is_empty() {
        return Ok(vec![0.0; levels]);
    }
    let mapped: Vec<Section> = sections.iter().map(|s| map.apply(s)).collect::<Result<_>>()?;
    (1..=levels)
        .map(|level| {
            let before = cyclic_blocks(sections, level);
            let after = cyclic_blocks(&mapped, level);
            let mut worst: f64 = 0.0;
            for (x, y) in before.iter().zip(&after) {
                worst = worst.max((complete_norm(x, grid)? - complete_norm(y, grid)?).abs());
            }
            Ok(worst)
        })
        .collect()
}

pub fn eval_laurent(p: &Laurent, z: Complex64) -> Complex64 {
    ModAutoEntry::new(0.0, p.clone()).value(z)
}

/// `max ‖apply(p·I)(z) − p(e^z) I‖` over polynomials and sample points.
pub fn verify_center(map: &InducedMap, polys: &[Laurent], samples: &[Complex64]) -> Result<f64> {
    let n = map.source.dim();
    let mut worst: f64 = 0.0;
    for p in polys {
        let image = map.apply(&scalar_section(&map.source, p))?;
        for &z in samples {
            let want = ComplexMatrix::identity(n, n) * eval_laurent(p, z);
            worst = worst.max(operator_norm(&(image.value_at(z) - want)));
        }
    }
    Ok(worst)
}

/// `max ‖apply(σ)(z) − V F_σ(z) V*‖`.
pub fn conjugation_residual(map: &InducedMap, sections: &[Section], samples: &[Complex64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in sections {
        let image = map.apply(s)?;
        for &z in samples {
            worst = worst.max(operator_norm(&(image.value_at(z) - map.v.conjugate(&s.value_at(z)))));
        }
    }
    Ok(worst)
}

/// `max ‖apply(στ)(z) − apply(σ)(z) apply(τ)(z)‖` over the given pairs.
pub fn homomorphism_residual(map: &InducedMap, pairs: &[(Section, Section)], samples: &[Complex64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (s, t) in pairs {
        let lhs = map.apply(&s.multiply(t)?)?;
        let (ms, mt) = (map.apply(s)?, map.apply(t)?);
        for &z in samples {
            worst = worst.max(operator_norm(&(lhs.value_at(z) - ms.value_at(z) * mt.value_at(z))));
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub tol: f64,
    pub mode: ConjugacyMode,
    /// Highest matrix level for the isometry sweep.
    pub levels: usize,
    pub seed: u64,
    pub grid: GridSpec,
    /// Random test sections generated over the source bundle.
    pub sections: usize,
    pub degree: u32,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            tol: DECISION_TOL,
            mode: ConjugacyMode::Projective,
            levels: 3,
            seed: 0,
            grid: GridSpec::default(),
            sections: 4,
            degree: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    /// Entry `ℓ − 1` holds the worst deviation at matrix level `ℓ`.
    pub isometry_deviation: Vec<f64>,
    pub center_residual: f64,
    pub conjugation_residual: f64,
    pub concomitant_residual: f64,
    pub homomorphism_residual: f64,
    pub frame_realigned: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub invariant_a: Vec<f64>,
    pub invariant_b: Vec<f64>,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub equivalence: EquivalenceReport,
    pub verification: Option<Verification>,
    pub certificate: Option<Certificate>,
}

impl ClassificationReport {
    pub fn is_equivalent(&self) -> bool {
        self.equivalence.is_equivalent()
    }
}

/// Test sections for a bundle: the constant diagonal and off-diagonal
/// families, a central section and `count` seeded random sections.
pub fn test_sections(bundle: &Arc<FlatBundle>, count: usize, degree: u32, seed: u64) -> Result<Vec<Section>> {
    let n = bundle.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0 + i as f64, 0.5 - i as f64)).collect();
    let c = ComplexMatrix::from_fn(n, n, |j, k| {
        if j == k {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0, (j as f64) - (k as f64))
        }
    });
    let mut out = vec![
        family_d(bundle, &d)?,
        family_c(bundle, &c)?,
        scalar_section(bundle, &Laurent::from([(1, Complex64::new(1.0, 0.0)), (-1, Complex64::new(0.0, 0.5))])),
    ];
    out.extend((0..count).map(|_| random_section(bundle, degree, rng.next_u64())));
    Ok(out)
}

pub fn center_polynomials() -> Vec<Laurent> {
    vec![
        Laurent::from([(0, Complex64::new(1.0, 0.0))]),
        Laurent::from([(1, Complex64::new(1.0, 0.0))]),
        Laurent::from([(2, Complex64::new(3.0, 0.0)), (-1, Complex64::new(-1.0, 0.0))]),
    ]
}

/// Builds the induced map for an equivalent pair and runs the isometry,
/// center, conjugation, concomitant and homomorphism checks.
pub fn verify_map(map: &InducedMap, config: &ClassifyConfig) -> Result<Verification> {
    let sections = test_sections(&map.source, config.sections, config.degree, config.seed)?;
    let samples = default_samples(&map.source);
    let isometry_deviation = verify_isometry(map, &sections, config.levels, &config.grid)?;
    let center_residual = verify_center(map, &center_polynomials(), &samples)?;
    let conjugation_residual = conjugation_residual(map, &sections, &samples)?;
    let mut concomitant_residual: f64 = 0.0;
    for s in &sections {
        concomitant_residual = concomitant_residual.max(map.apply(s)?.concomitant_residual(&samples, 3));
    }
    let pairs: Vec<(Section, Section)> =
        sections.iter().zip(sections.iter().cycle().skip(1)).map(|(a, b)| (a.clone(), b.clone())).collect();
    let homomorphism_residual = homomorphism_residual(map, &pairs, &samples)?;
    Ok(Verification {
        isometry_deviation,
        center_residual,
        conjugation_residual,
        concomitant_residual,
        homomorphism_residual,
        frame_realigned: map.alignment.realigned,
    })
}

/// Decides equivalence of the bundles generated by `a` and `b` over the
/// annulus of outer radius `r1`; on success verifies the induced isomorphism,
/// otherwise returns the spectral invariants as an obstruction certificate.
pub fn classify_pair(
    a: &UnitaryMatrix,
    b: &UnitaryMatrix,
    r1: f64,
    config: &ClassifyConfig,
) -> Result<ClassificationReport> {
    let equivalence = conjugacy(a, b, config.tol, config.mode)?;
    if !equivalence.is_equivalent() {
        let certificate = Certificate {
            invariant_a: equivalence.invariant_a.clone(),
            invariant_b: equivalence.invariant_b.clone(),
            gap: equivalence.gap,
        };
        return Ok(ClassificationReport { equivalence, verification: None, certificate: Some(certificate) });
    }
    let source = Arc::new(make_bundle(a.clone(), r1)?);
    let target = Arc::new(make_bundle(b.clone(), r1)?);
    let map = InducedMap::from_report(source, target, &equivalence, config.tol)?;
    let verification = verify_map(&map, config)?;
    Ok(ClassificationReport { equivalence, verification: Some(verification), certificate: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::pu_equivalent;
    use crate::numerics::{haar_unitary, unit};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn bundle(a: &UnitaryMatrix) -> Arc<FlatBundle> {
        Arc::new(make_bundle(a.clone(), 2.0).unwrap())
    }

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        operator_norm(&(a - b)) <= tol
    }

    fn map_for(a: &UnitaryMatrix, b: &UnitaryMatrix) -> InducedMap {
        let r = pu_equivalent(a, b, DECISION_TOL).unwrap();
        InducedMap::from_report(bundle(a), bundle(b), &r, DECISION_TOL).unwrap()
    }

    #[test]
    fn identity_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = haar_unitary(&mut rng, 3);
        let src = bundle(&a);
        let map =
            InducedMap::new(src.clone(), src.clone(), UnitaryMatrix::identity(3), c(1., 0.), DECISION_TOL).unwrap();
        assert_eq!(map.alignment().perm, vec![0, 1, 2]);
        let s = random_section(&src, 2, 3);
        assert_eq!(map.apply(&s).unwrap(), s);
    }

    #[test]
    fn conjugated_target_has_identity_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = haar_unitary(&mut rng, 3);
        let u = haar_unitary(&mut rng, 3);
        let b = UnitaryMatrix::new(u.conjugate(a.matrix())).unwrap();
        let map = InducedMap::new(bundle(&a), bundle(&b), u, c(1., 0.), DECISION_TOL).unwrap();
        assert_eq!(map.alignment().perm, vec![0, 1, 2]);
        assert!(!map.alignment().realigned);
    }

    #[test]
    fn global_phase_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = haar_unitary(&mut rng, 3);
        let lambda = unit(0.1);
        let b = UnitaryMatrix::new(a.matrix() * lambda.conj()).unwrap();
        let (sa, sb) = (bundle(&a), bundle(&b));
        let map = InducedMap::new(sa.clone(), sb.clone(), UnitaryMatrix::identity(3), lambda, DECISION_TOL).unwrap();
        assert_eq!(map.alignment().perm, vec![0, 1, 2]);
        assert!((sa.exponents() - sb.exponents()).abs().max() < 1e-12);
        let d = [c(1., 0.), c(0., 2.), c(-1., 1.)];
        let image = map.apply(&family_d(&sa, &d).unwrap()).unwrap();
        assert_eq!(image, family_d(&sb, &d).unwrap());
    }

    #[test]
    fn invalid_witness_is_rejected() {
        let a = UnitaryMatrix::diagonal(&[c(1., 0.), c(-1., 0.)]).unwrap();
        let b = UnitaryMatrix::diagonal(&[c(1., 0.), c(1., 0.)]).unwrap();
        let r = InducedMap::new(bundle(&a), bundle(&b), UnitaryMatrix::identity(2), c(1., 0.), DECISION_TOL);
        assert!(matches!(r, Err(Error::InvalidWitness { .. })));
    }

    #[test]
    fn apply_matches_pointwise_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..=4 {
            let a = haar_unitary(&mut rng, n);
            let u = haar_unitary(&mut rng, n);
            let b = UnitaryMatrix::new(u.conjugate(&(a.matrix() * unit(2.0)))).unwrap();
            let map = map_for(&a, &b);
            let secs = test_sections(map.source(), 3, 2, 9).unwrap();
            let samples = default_samples(map.source());
            assert!(conjugation_residual(&map, &secs, &samples).unwrap() < 1e-9);
            for s in &secs {
                let image = map.apply(s).unwrap();
                assert_eq!(image.exponent_conformance(), 0.0);
                assert!(image.concomitant_residual(&samples, 3) < 1e-9);
            }
        }
    }

    #[test]
    fn center_is_fixed_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = haar_unitary(&mut rng, 3);
        let u = haar_unitary(&mut rng, 3);
        let b = UnitaryMatrix::new(u.conjugate(a.matrix())).unwrap();
        let map = map_for(&a, &b);
        let samples = default_samples(map.source());
        let polys = center_polynomials();
        assert!(verify_center(&map, &polys[..1], &samples).unwrap() < 1e-13);
        assert!(verify_center(&map, &polys[1..2], &samples).unwrap() <= 1e-12);
        assert!(verify_center(&map, &polys[2..], &samples).unwrap() <= 1e-11);
    }

    #[test]
    fn isometry_levels() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = haar_unitary(&mut rng, 2);
        let u = haar_unitary(&mut rng, 2);
        let b = UnitaryMatrix::new(u.conjugate(&(a.matrix() * unit(-0.7)))).unwrap();
        let map = map_for(&a, &b);
        let grid = GridSpec::with_boundary(64);
        let scalars = vec![scalar_section(map.source(), &center_polynomials()[2])];
        assert!(verify_isometry(&map, &scalars, 1, &grid).unwrap()[0] <= 1e-10);
        let secs = test_sections(map.source(), 8, 2, 1).unwrap();
        let dev = verify_isometry(&map, &secs, 2, &grid).unwrap();
        assert_eq!(dev.len(), 2);
        assert!(dev.iter().all(|&d| d <= 1e-9), "{dev:?}");
        assert!(verify_isometry(&map, &secs, 0, &grid).is_err());
    }

    #[test]
    fn degenerate_spectrum_needs_realignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = UnitaryMatrix::diagonal(&[c(1., 0.), c(1., 0.), c(-1., 0.)]).unwrap();
        let u = haar_unitary(&mut rng, 3);
        let b = UnitaryMatrix::new(u.conjugate(a.matrix())).unwrap();
        let map = InducedMap::new(bundle(&a), bundle(&b), u, c(1., 0.), DECISION_TOL).unwrap();
        let secs = test_sections(map.source(), 3, 1, 2).unwrap();
        let samples = default_samples(map.source());
        assert!(conjugation_residual(&map, &secs, &samples).unwrap() < 1e-9);
        let pairs: Vec<_> = secs.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
        assert!(homomorphism_residual(&map, &pairs, &samples).unwrap() < 1e-9);
    }

    #[test]
    fn composition_is_functorial() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = haar_unitary(&mut rng, 3);
        let (u1, u2) = (haar_unitary(&mut rng, 3), haar_unitary(&mut rng, 3));
        let (l1, l2) = (unit(0.4), unit(-1.9));
        let b = UnitaryMatrix::new(u1.conjugate(&(a.matrix() * l1.conj()))).unwrap();
        let cm = UnitaryMatrix::new(u2.conjugate(&(b.matrix() * l2.conj()))).unwrap();
        let (sa, sb, sc) = (bundle(&a), bundle(&b), bundle(&cm));
        let ab = InducedMap::new(sa.clone(), sb.clone(), u1, l1, DECISION_TOL).unwrap();
        let bc = InducedMap::new(sb, sc, u2, l2, DECISION_TOL).unwrap();
        let ac = ab.compose(&bc, DECISION_TOL).unwrap();
        let s = random_section(&sa, 2, 4);
        let two_step = bc.apply(&ab.apply(&s).unwrap()).unwrap();
        let one_step = ac.apply(&s).unwrap();
        for z in default_samples(&sa) {
            assert!(close(&two_step.value_at(z), &one_step.value_at(z), 1e-9));
        }
    }

    #[test]
    fn classify_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = ClassifyConfig { grid: GridSpec::with_boundary(64), ..Default::default() };
        let a = haar_unitary(&mut rng, 2);
        let r = classify_pair(&a, &a, 2.0, &cfg).unwrap();
        assert!(r.is_equivalent());
        let v = r.verification.unwrap();
        assert_eq!(v.isometry_deviation.len(), 3);
        assert!(v.isometry_deviation.iter().all(|&d| d <= 1e-9));
        assert!(v.center_residual <= 1e-9 && v.homomorphism_residual <= 1e-9 && v.concomitant_residual <= 1e-9);

        let d = UnitaryMatrix::diagonal(&[c(1., 0.), c(-1., 0.)]).unwrap();
        let u = haar_unitary(&mut rng, 2);
        let b = UnitaryMatrix::new(u.conjugate(d.matrix())).unwrap();
        let r = classify_pair(&d, &b, 2.0, &cfg).unwrap();
        assert!(r.is_equivalent());
        assert!(r.verification.unwrap().isometry_deviation.iter().all(|&x| x <= 1e-9));

        let one = UnitaryMatrix::identity(2);
        let r = classify_pair(&one, &d, 2.0, &cfg).unwrap();
        assert!(!r.is_equivalent());
        let cert = r.certificate.unwrap();
        assert_eq!(cert.invariant_a, vec![0.0, 0.0]);
        assert!((cert.invariant_b[1] - std::f64::consts::PI).abs() < 1e-15);
    }
}
