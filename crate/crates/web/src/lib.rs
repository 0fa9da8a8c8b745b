//! WebAssembly bindings for the browser demo in `www/`. Exports take and
//! return JSON strings; matrices use the same `[[[re, im], ...], ...]`
//! encoding as the command-line tool.

use std::sync::Arc;

use bundlealg::bundle::{make_bundle, ConjugacyMode, FlatBundle};
use bundlealg::io::{matrix_to_rows, MatrixJson};
use bundlealg::isomorphism::{classify_pair, ClassifyConfig};
use bundlealg::norms::{annulus_grid, boundary_dominates, GridSpec};
use bundlealg::numerics::{canonical_phase_form, haar_unitary, principal_arg, random_phase, UnitaryMatrix};
use bundlealg::sections::random_section;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

type Out = Result<String, String>;

const MAX_DIM: usize = 6;

fn to_json<T: Serialize>(v: &T) -> Out {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn parse_matrix(text: &str, name: &str) -> Result<UnitaryMatrix, String> {
    let MatrixJson(m) = serde_json::from_str(text).map_err(|e| format!("{name}: {e}"))?;
    if m.nrows() > MAX_DIM {
        return Err(format!("{name}: the demo handles matrices up to {MAX_DIM}x{MAX_DIM}"));
    }
    UnitaryMatrix::new(m).map_err(|e| format!("{name}: {e}"))
}

fn bundle(a: &str, r1: f64) -> Result<Arc<FlatBundle>, String> {
    Ok(Arc::new(make_bundle(parse_matrix(a, "A")?, r1).map_err(|e| e.to_string())?))
}

#[derive(Serialize)]
struct Pair {
    #[serde(rename = "A")]
    a: Vec<Vec<Complex64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<Complex64>>,
}

/// A Haar-random `A` and either `B = U(λA)U*` or an independent `B`.
pub fn sample_pair_json(n: usize, seed: u32, equivalent: bool) -> Out {
    if n == 0 || n > MAX_DIM {
        return Err(format!("n must lie in 1..={MAX_DIM}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.into());
    let a = haar_unitary(&mut rng, n);
    let b = if equivalent {
        let u = haar_unitary(&mut rng, n);
        let lambda = random_phase(&mut rng);
        u.conjugate(&(a.matrix() * lambda))
    } else {
        haar_unitary(&mut rng, n).into_inner()
    };
    to_json(&Pair { a: matrix_to_rows(a.matrix()), b: matrix_to_rows(&b) })
}

#[derive(Serialize)]
struct Spectrum {
    eigenvalues: Vec<Complex64>,
    args: Vec<f64>,
    canonical_form: Vec<f64>,
    exponents: Vec<Vec<f64>>,
}

/// Eigenvalues, their canonical phase form and the exponent table.
pub fn spectrum_json(a: &str, r1: f64) -> Out {
    let b = bundle(a, r1)?;
    let eigenvalues = b.eigenvalues().to_vec();
    let n = b.dim();
    to_json(&Spectrum {
        args: eigenvalues.iter().map(|&z| principal_arg(z)).collect(),
        canonical_form: canonical_phase_form(&eigenvalues).map_err(|e| e.to_string())?,
        exponents: (0..n).map(|j| (0..n).map(|k| b.exponent(j, k)).collect()).collect(),
        eigenvalues,
    })
}

/// Full classification with a light verification pass sized for the browser.
pub fn classify_json(a: &str, b: &str, r1: f64, strict: bool) -> Out {
    let (a, b) = (parse_matrix(a, "A")?, parse_matrix(b, "B")?);
    let config = ClassifyConfig {
        mode: if strict { ConjugacyMode::Strict } else { ConjugacyMode::Projective },
        levels: 2,
        grid: GridSpec::with_boundary(128),
        sections: 2,
        ..ClassifyConfig::default()
    };
    to_json(&classify_pair(&a, &b, r1, &config).map_err(|e| e.to_string())?)
}

#[derive(Serialize)]
struct Heatmap {
    radial: usize,
    angular: usize,
    r: Vec<f64>,
    theta: Vec<f64>,
    /// Row-major, one row per radius.
    opnorm: Vec<f64>,
    max: f64,
    boundary_max: f64,
    interior_max: f64,
}

/// Pointwise operator norm of a seeded random section over a polar grid,
/// with the boundary and interior maxima.
pub fn heatmap_json(a: &str, r1: f64, degree: u32, seed: u32, radial: usize, angular: usize) -> Out {
    if !(2..=200).contains(&radial) || !(1..=720).contains(&angular) || degree > 8 {
        return Err("grid must be at most 200x720 with degree at most 8".into());
    }
    let b = bundle(a, r1)?;
    let section = random_section(&b, degree, seed.into());
    let samples = annulus_grid(&section, radial, angular);
    let dominance = boundary_dominates(&section, &GridSpec::with_boundary(256)).map_err(|e| e.to_string())?;
    let opnorm: Vec<f64> = samples.iter().map(|s| s.opnorm).collect();
    to_json(&Heatmap {
        radial,
        angular,
        r: samples.iter().step_by(angular).map(|s| s.r).collect(),
        theta: samples[..angular].iter().map(|s| s.theta).collect(),
        max: opnorm.iter().copied().fold(0.0, f64::max),
        opnorm,
        boundary_max: dominance.boundary_max,
        interior_max: dominance.interior_max,
    })
}

#[wasm_bindgen(js_name = samplePair)]
pub fn sample_pair(n: usize, seed: u32, equivalent: bool) -> Result<String, JsValue> {
    sample_pair_json(n, seed, equivalent).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn spectrum(a: &str, r1: f64) -> Result<String, JsValue> {
    spectrum_json(a, r1).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn classify(a: &str, b: &str, r1: f64, strict: bool) -> Result<String, JsValue> {
    classify_json(a, b, r1, strict).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn heatmap(a: &str, r1: f64, degree: u32, seed: u32, radial: usize, angular: usize) -> Result<String, JsValue> {
    heatmap_json(a, r1, degree, seed, radial, angular).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: Out) -> Value {
        serde_json::from_str(&s.unwrap()).unwrap()
    }

    #[test]
    fn constructed_pair_classifies_as_equivalent() {
        let pair = parse(sample_pair_json(3, 4, true));
        let (a, b) = (pair["A"].to_string(), pair["B"].to_string());
        let r = parse(classify_json(&a, &b, 2.0, false));
        assert_eq!(r["equivalence"]["verdict"], "equivalent");
        let pair = parse(sample_pair_json(3, 4, false));
        let r = parse(classify_json(&pair["A"].to_string(), &pair["B"].to_string(), 2.0, false));
        assert_eq!(r["equivalence"]["verdict"], "not_equivalent");
    }

    #[test]
    fn spectrum_of_a_reflection() {
        let s = parse(spectrum_json("[[[1,0],[0,0]],[[0,0],[-1,0]]]", 2.0));
        assert_eq!(s["canonical_form"], serde_json::json!([0.0, std::f64::consts::PI]));
        assert_eq!(s["exponents"][0][1], 0.5);
        assert_eq!(s["exponents"][1][0], -0.5);
    }

    #[test]
    fn heatmap_shape_and_boundary_maximum() {
        let pair = parse(sample_pair_json(2, 1, true));
        let h = parse(heatmap_json(&pair["A"].to_string(), 2.0, 2, 9, 6, 12));
        assert_eq!(h["opnorm"].as_array().unwrap().len(), 72);
        assert_eq!(h["r"].as_array().unwrap().len(), 6);
        assert_eq!(h["theta"].as_array().unwrap().len(), 12);
        assert!(h["interior_max"].as_f64().unwrap() <= h["boundary_max"].as_f64().unwrap() + 1e-6);
    }

    #[test]
    fn bad_inputs_are_reported() {
        assert!(sample_pair_json(0, 1, true).is_err());
        assert!(spectrum_json("[[[2,0]]]", 2.0).unwrap_err().contains("A"));
        assert!(spectrum_json("[[[1,0]]]", 0.5).is_err());
        assert!(heatmap_json("[[[1,0]]]", 2.0, 1, 1, 1, 4).is_err());
    }
}
