//! Commuting tuples of unitaries: the holonomy of a flat bundle over a domain
//! with several holes when the generators commute.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::{Verdict, DECISION_TOL};
use crate::error::{Error, Result};
use crate::io::{MatrixJson, TupleJson};
use crate::numerics::{
    eig_unitary, normalize_column_phases, operator_norm, sort_arg, ComplexMatrix, UnitaryMatrix, UnitarySpectrum,
};

pub const COMMUTING_TOL: f64 = 1e-9;
/// Eigenvalues of the Hermitian combination closer than this share a cluster.
const HERMITIAN_CLUSTER_TOL: f64 = 1e-6;
/// Eigenvalues of a compressed generator closer than this stay in one cluster.
const SPLIT_TOL: f64 = 1e-7;
const WEIGHT_SEED: u64 = 0x005e_ed0f_1ead;

/// Largest `‖A_i A_j − A_j A_i‖` over pairs `i < j`.
pub fn check_commuting(generators: &[UnitaryMatrix]) -> Result<f64> {
    let Some(first) = generators.first() else {
        return Ok(0.0);
    };
    if let Some(g) = generators.iter().find(|g| g.dim() != first.dim()) {
        return Err(Error::Dimension(format!("generators of size {} and {}", first.dim(), g.dim())));
    }
    let mut worst: f64 = 0.0;
    for (i, a) in generators.iter().enumerate() {
        for b in &generators[i + 1..] {
            let (a, b) = (a.matrix(), b.matrix());
            worst = worst.max(operator_norm(&(a * b - b * a)));
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommutingTuple {
    generators: Vec<UnitaryMatrix>,
    commutator: f64,
}

impl CommutingTuple {
    pub fn new(generators: Vec<UnitaryMatrix>) -> Result<Self> {
        Self::with_tolerance(generators, COMMUTING_TOL)
    }

    pub fn with_tolerance(generators: Vec<UnitaryMatrix>, tol: f64) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::Validation("a tuple needs at least one generator".into()));
        }
        let commutator = check_commuting(&generators)?;
        if commutator > tol {
            return Err(Error::NotCommuting(commutator));
        }
        Ok(Self { generators, commutator })
    }

    pub fn generators(&self) -> &[UnitaryMatrix] {
        &self.generators
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.generators[0].dim()
    }

    pub fn commutator(&self) -> f64 {
        self.commutator
    }

    pub fn to_json(&self) -> TupleJson {
        TupleJson { generators: self.generators.iter().map(|g| MatrixJson(g.matrix().clone())).collect() }
    }

    pub fn from_json(doc: &TupleJson) -> Result<Self> {
        let gens = doc.generators.iter().map(|m| UnitaryMatrix::new(m.0.clone())).collect::<Result<Vec<_>>>()?;
        Self::new(gens)
    }
}

/// A common eigenbasis `S` with `S* A_i S = diag(joint[·][i])`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointSpectrum {
    pub vectors: UnitaryMatrix,
    /// One entry per eigenvector, holding its eigenvalue under each generator.
    pub joint: Vec<Vec<Complex64>>,
}

impl JointSpectrum {
    pub fn dim(&self) -> usize {
        self.joint.len()
    }

    /// `max_i ‖S* A_i S − diag_i‖`.
    pub fn residual(&self, tuple: &CommutingTuple) -> f64 {
        let s = self.vectors.matrix();
        tuple
            .generators()
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let d = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    self.dim(),
                    self.joint.iter().map(|v| v[i]),
                ));
                operator_norm(&(s.adjoint() * g.matrix() * s - d))
            })
            .fold(0.0, f64::max)
    }
}

fn split_clusters(values: impl Iterator<Item = f64>, tol: f64) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for (i, x) in values.enumerate() {
        match out.last_mut() {
            Some(c) if x - last <= tol => c.push(i),
            _ => out.push(vec![i]),
        }
        last = x;
    }
    out
}

fn hermitian_combination(tuple: &CommutingTuple) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(WEIGHT_SEED);
    let n = tuple.dim();
    let i = Complex64::new(0.0, 1.0);
    let mut h = ComplexMatrix::zeros(n, n);
    for g in tuple.generators() {
        let (w, w2): (f64, f64) = (rng.random_range(0.5..1.5), rng.random_range(0.5..1.5));
        let a = g.matrix();
        let adj = a.adjoint();
        h += (a + &adj) * Complex64::new(w, 0.0) + (a - &adj) * (i * w2);
    }
    (&h + h.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Diagonalizes a random-weight Hermitian combination of the generators, then
/// splits any remaining clusters by compressing each generator in turn onto
/// the cluster and diagonalizing there.
///
/// Columns are phase-normalized and ordered lexicographically by the
/// arguments of their joint eigenvalues.
pub fn simultaneous_diagonalize(tuple: &CommutingTuple) -> Result<JointSpectrum> {
    let n = tuple.dim();
    if tuple.len() == 1 {
        let UnitarySpectrum { eigenvalues, vectors } = eig_unitary(&tuple.generators()[0])?;
        return Ok(JointSpectrum { vectors, joint: eigenvalues.into_iter().map(|e| vec![e]).collect() });
    }

    let eig = SymmetricEigen::try_new(hermitian_combination(tuple), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let mut s = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    let mut clusters: Vec<Vec<usize>> =
        split_clusters(order.iter().map(|&k| eig.eigenvalues[k]), HERMITIAN_CLUSTER_TOL);

    for g in tuple.generators() {
        let mut next = Vec::with_capacity(clusters.len());
        for cluster in clusters {
            if cluster.len() == 1 {
                next.push(cluster);
                continue;
            }
            let q = ComplexMatrix::from_fn(n, cluster.len(), |r, c| s[(r, cluster[c])]);
            let compressed = q.adjoint() * g.matrix() * &q;
            let local = eig_unitary(&UnitaryMatrix::new_unchecked(compressed))?;
            let rotated = q * local.vectors.matrix();
            for (c, &col) in cluster.iter().enumerate() {
                s.set_column(col, &rotated.column(c));
            }
            let args = local.eigenvalues.iter().map(|&e| sort_arg(e));
            for part in split_clusters(args, SPLIT_TOL) {
                next.push(part.into_iter().map(|c| cluster[c]).collect());
            }
        }
        clusters = next;
    }

    normalize_column_phases(&mut s);
    let mut joint: Vec<(Vec<Complex64>, usize)> = (0..n)
        .map(|c| {
            let v =
                tuple.generators().iter().map(|g| (s.column(c).adjoint() * g.matrix() * s.column(c))[(0, 0)]).collect();
            (v, c)
        })
        .collect();
    joint.sort_by(|(x, _), (y, _)| {
        x.iter()
            .zip(y)
            .map(|(&p, &q)| sort_arg(p).total_cmp(&sort_arg(q)))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| s[(r, joint[c].1)]);
    Ok(JointSpectrum {
        vectors: UnitaryMatrix::new_unchecked(vectors),
        joint: joint.into_iter().map(|(v, _)| v).collect(),
    })
}

/// Outcome of a tuple conjugacy decision: one `V` and a phase per generator
/// with `V A_i V* = λ_i B_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TupleEquivalenceReport {
    pub verdict: Verdict,
    /// Phase for the first generator.
    pub lambda: Option<Complex64>,
    pub lambdas: Vec<Complex64>,
    #[serde(rename = "V")]
    pub v: Option<UnitaryMatrix>,
    /// Worst per-generator residual of the witness.
    pub residual: Option<f64>,
    pub residuals: Vec<f64>,
    /// Smallest joint-spectrum mismatch over all candidate phase vectors.
    pub gap: f64,
}

impl TupleEquivalenceReport {
    pub fn is_equivalent(&self) -> bool {
        self.verdict == Verdict::Equivalent
    }
}

fn joint_distance(x: &[Complex64], lambdas: &[Complex64], y: &[Complex64]) -> f64 {
    x.iter().zip(lambdas).zip(y).map(|((&a, &l), &b)| (a - l * b).norm()).fold(0.0, f64::max)
}

/// Greedy nearest matching of `α_p` to `λ ⊙ β_q`; returns the pairing and its
/// worst distance.
fn match_joint(ja: &JointSpectrum, jb: &JointSpectrum, lambdas: &[Complex64]) -> (Vec<usize>, f64) {
    let n = ja.dim();
    let mut used = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    let mut worst: f64 = 0.0;
    for alpha in &ja.joint {
        let (q, d) = (0..n)
            .filter(|&q| !used[q])
            .map(|q| (q, joint_distance(alpha, lambdas, &jb.joint[q])))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("unused slot");
        used[q] = true;
        perm.push(q);
        worst = worst.max(d);
    }
    (perm, worst)
}

/// Decides whether one unitary `V` and phases `λ_i` give `V A_i V* ≈ λ_i B_i`
/// for every generator. Candidate phase vectors come from pairing the first
/// joint eigenvector of `A` with each joint eigenvector of `B`; the first
/// candidate whose witness passes wins.
pub fn tuple_pu_equivalent(a: &CommutingTuple, b: &CommutingTuple, tol: f64) -> Result<TupleEquivalenceReport> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), got: b.len() });
    }
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("tuples of size {} and {}", a.dim(), b.dim())));
    }
    let ja = simultaneous_diagonalize(a)?;
    let jb = simultaneous_diagonalize(b)?;
    let (sa, sb) = (ja.vectors.matrix(), jb.vectors.matrix());
    let mut gap = f64::INFINITY;
    for beta in &jb.joint {
        let lambdas: Vec<Complex64> = ja.joint[0].iter().zip(beta).map(|(&x, &y)| x / y).collect();
        let (perm, worst) = match_joint(&ja, &jb, &lambdas);
        gap = gap.min(worst);
        if worst > tol {
            continue;
        }
        let mut v = ComplexMatrix::zeros(a.dim(), a.dim());
        for (p, &q) in perm.iter().enumerate() {
            v += sb.column(q) * sa.column(p).adjoint();
        }
        let residuals: Vec<f64> = a
            .generators()
            .iter()
            .zip(b.generators())
            .zip(&lambdas)
            .map(|((x, y), &l)| operator_norm(&(&v * x.matrix() * v.adjoint() - y.matrix() * l)))
            .collect();
        let residual = residuals.iter().copied().fold(0.0, f64::max);
        if residual <= tol {
            return Ok(TupleEquivalenceReport {
                verdict: Verdict::Equivalent,
                lambda: Some(lambdas[0]),
                lambdas,
                v: Some(UnitaryMatrix::new_unchecked(v)),
                residual: Some(residual),
                residuals,
                gap: worst,
            });
        }
    }
    Ok(TupleEquivalenceReport {
        verdict: Verdict::NotEquivalent,
        lambda: None,
        lambdas: Vec::new(),
        v: None,
        residual: None,
        residuals: Vec::new(),
        gap,
    })
}

/// [`tuple_pu_equivalent`] at the default decision tolerance.
pub fn tuple_equivalent(a: &CommutingTuple, b: &CommutingTuple) -> Result<TupleEquivalenceReport> {
    tuple_pu_equivalent(a, b, DECISION_TOL)
}
