//! JSON encodings shared by the library and the CLI.
//!
//! Complex scalars are `[re, im]`; matrices are row-major arrays of rows.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::numerics::{ComplexMatrix, UnitaryMatrix};

pub fn matrix_to_rows(m: &ComplexMatrix) -> Vec<Vec<Complex64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn rows_to_matrix(rows: &[Vec<Complex64>]) -> Result<ComplexMatrix, String> {
    let n = rows.len();
    if n == 0 {
        return Err("matrix has no rows".into());
    }
    let m = rows[0].len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
        return Err(format!("row {i} has {} entries, expected {m}", r.len()));
    }
    Ok(ComplexMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// `#[serde(with = "matrix_serde")]` for [`ComplexMatrix`] fields.
pub mod matrix_serde {
    use super::*;

    pub fn serialize<S: Serializer>(m: &ComplexMatrix, s: S) -> Result<S::Ok, S::Error> {
        matrix_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ComplexMatrix, D::Error> {
        let rows = Vec::<Vec<Complex64>>::deserialize(d)?;
        rows_to_matrix(&rows).map_err(de::Error::custom)
    }
}

impl Serialize for UnitaryMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        matrix_serde::serialize(self.matrix(), s)
    }
}

impl<'de> Deserialize<'de> for UnitaryMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let m = matrix_serde::deserialize(d)?;
        UnitaryMatrix::new(m).map_err(de::Error::custom)
    }
}

/// `{ "r1": real, "A": matrix }`
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BundleJson {
    pub r1: f64,
    #[serde(rename = "A", with = "matrix_serde")]
    pub generator: ComplexMatrix,
}

/// `{ "K": real, "laurent": { "m": [re, im] } }`
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntryJson {
    #[serde(rename = "K")]
    pub exponent: f64,
    pub laurent: BTreeMap<i64, Complex64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectionJson {
    pub bundle: BundleJson,
    #[serde(with = "matrix_serde")]
    pub frame: ComplexMatrix,
    pub entries: Vec<Vec<EntryJson>>,
}

/// `{ "generators": [matrix, ...] }`
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TupleJson {
    pub generators: Vec<MatrixJson>,
}

/// A bare matrix document.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixJson(#[serde(with = "matrix_serde")] pub ComplexMatrix);

/// A square block of sections, `{ "blocks": [[section, ...], ...] }`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockJson {
    pub blocks: Vec<Vec<SectionJson>>,
}
