//! Serde adapters for the JSON wire formats.
//!
//! Complex numbers are `[re, im]` pairs; matrices are row-major arrays of rows of pairs.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::{CMat, C64};

pub type Pair = [f64; 2];

pub fn to_pair(z: C64) -> Pair {
    [z.re, z.im]
}

pub fn from_pair(p: Pair) -> C64 {
    C64::new(p[0], p[1])
}

pub fn matrix_to_rows(m: &CMat) -> Vec<Vec<Pair>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| to_pair(m[(i, j)])).collect())
        .collect()
}

pub fn rows_to_matrix(rows: &[Vec<Pair>]) -> Result<CMat, String> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err("ragged matrix rows".into());
    }
    Ok(CMat::from_fn(nrows, ncols, |i, j| from_pair(rows[i][j])))
}

pub mod complex {
    use super::*;

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        to_pair(*z).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        Ok(from_pair(Pair::deserialize(d)?))
    }
}

pub mod complex_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| to_pair(*z)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        Ok(Vec::<Pair>::deserialize(d)?.into_iter().map(from_pair).collect())
    }
}

pub mod points {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Vec<C64>], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|p| p.iter().map(|z| to_pair(*z)).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<C64>>, D::Error> {
        Ok(Vec::<Vec<Pair>>::deserialize(d)?
            .into_iter()
            .map(|p| p.into_iter().map(from_pair).collect())
            .collect())
    }
}

pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        matrix_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        let rows = Vec::<Vec<Pair>>::deserialize(d)?;
        rows_to_matrix(&rows).map_err(D::Error::custom)
    }
}

pub mod matrix_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[CMat], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(matrix_to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMat>, D::Error> {
        Vec::<Vec<Vec<Pair>>>::deserialize(d)?
            .iter()
            .map(|rows| rows_to_matrix(rows).map_err(D::Error::custom))
            .collect()
    }
}
