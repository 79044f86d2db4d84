//! Serde adapters writing complex vectors as `[[re, im], ...]` and complex
//! matrices as rows of such pairs.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::{CMat, CVec, C64};

pub mod vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &CVec, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CVec, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(CVec::from_iterator(
            pairs.len(),
            pairs.iter().map(|p| C64::new(p[0], p[1])),
        ))
    }
}

pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(serde::de::Error::custom("ragged complex matrix"));
        }
        Ok(CMat::from_fn(nrows, ncols, |i, j| {
            C64::new(rows[i][j][0], rows[i][j][1])
        }))
    }
}
