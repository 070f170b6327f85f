//! JSON encoding shared by every report and input file.
//!
//! A complex matrix is written as `{"rows": n, "cols": n, "data": [[re, im], ...]}`
//! with `data` in row-major order. The helper modules below plug into
//! `#[serde(with = "...")]` for plain, optional and list-valued fields.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::operator::{CMatrix, C64};

#[derive(Serialize, Deserialize)]
struct Encoded {
    rows: usize,
    cols: usize,
    data: Vec<[f64; 2]>,
}

impl Encoded {
    fn from_matrix(m: &CMatrix) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let z = m[(r, c)];
                data.push([z.re, z.im]);
            }
        }
        Encoded {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    fn into_matrix(self) -> Result<CMatrix, String> {
        if self.rows == 0 || self.cols == 0 {
            return Err("matrix must have positive rows and cols".into());
        }
        if self.data.len() != self.rows * self.cols {
            return Err(format!(
                "matrix data has {} entries, expected rows*cols = {}",
                self.data.len(),
                self.rows * self.cols
            ));
        }
        if self.data.iter().flatten().any(|v| !v.is_finite()) {
            return Err("matrix data contains non-finite values".into());
        }
        Ok(CMatrix::from_row_iterator(
            self.rows,
            self.cols,
            self.data.into_iter().map(|[re, im]| C64::new(re, im)),
        ))
    }
}

/// Owned wrapper so a bare matrix can be (de)serialized on its own.
#[derive(Debug, Clone, PartialEq)]
pub struct JsonMatrix(pub CMatrix);

impl Serialize for JsonMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        matrix::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for JsonMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        matrix::deserialize(d).map(JsonMatrix)
    }
}

pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        Encoded::from_matrix(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        Encoded::deserialize(d)?
            .into_matrix()
            .map_err(D::Error::custom)
    }
}

pub mod matrix_opt {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Option<CMatrix>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(Encoded::from_matrix).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<CMatrix>, D::Error> {
        Option::<Encoded>::deserialize(d)?
            .map(|e| e.into_matrix().map_err(D::Error::custom))
            .transpose()
    }
}

pub mod matrix_vec {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[CMatrix], s: S) -> Result<S::Ok, S::Error> {
        let enc: Vec<Encoded> = ms.iter().map(Encoded::from_matrix).collect();
        enc.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMatrix>, D::Error> {
        Vec::<Encoded>::deserialize(d)?
            .into_iter()
            .map(|e| e.into_matrix().map_err(D::Error::custom))
            .collect()
    }
}

pub mod matrix_pairs {
    use super::*;

    pub fn serialize<S: Serializer>(ps: &[(CMatrix, CMatrix)], s: S) -> Result<S::Ok, S::Error> {
        let enc: Vec<(Encoded, Encoded)> = ps
            .iter()
            .map(|(a, b)| (Encoded::from_matrix(a), Encoded::from_matrix(b)))
            .collect();
        enc.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Vec<(CMatrix, CMatrix)>, D::Error> {
        Vec::<(Encoded, Encoded)>::deserialize(d)?
            .into_iter()
            .map(|(a, b)| {
                Ok((
                    a.into_matrix().map_err(D::Error::custom)?,
                    b.into_matrix().map_err(D::Error::custom)?,
                ))
            })
            .collect()
    }
}
