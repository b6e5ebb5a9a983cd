//! Dense matrices as row-major nested JSON arrays.

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Builds a matrix from rows; `cols` fixes the width when there are no rows.
pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Result<DMatrix<f64>> {
    let c = rows.first().map_or(cols, |r| r.len());
    if rows.iter().any(|r| r.len() != c) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    let m = DMatrix::from_fn(rows.len(), c, |i, j| rows[i][j]);
    crate::matops::check_finite(&m)?;
    Ok(m)
}

pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    to_rows(m).serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DMatrix<f64>, D::Error> {
    let rows = Vec::<Vec<f64>>::deserialize(d)?;
    from_rows(&rows, 0).map_err(serde::de::Error::custom)
}
