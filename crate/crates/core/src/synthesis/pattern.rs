use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{dim_err, Error, Result};

/// Binary sparsity pattern `I_S` of a gain: `1` marks a free entry.
#[derive(Clone, Debug, PartialEq)]
pub struct StructurePattern {
    mask: DMatrix<f64>,
}

impl StructurePattern {
    pub fn new(mask: DMatrix<f64>) -> Result<Self> {
        if mask.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Parse("pattern entries must be 0 or 1".into()));
        }
        Ok(Self { mask })
    }

    /// All entries free.
    pub fn full(nu: usize, nx: usize) -> Self {
        Self { mask: DMatrix::from_element(nu, nx, 1.0) }
    }

    pub fn mask(&self) -> &DMatrix<f64> {
        &self.mask
    }

    /// `I_{S^c} = 1 − I_S`.
    pub fn complement(&self) -> DMatrix<f64> {
        self.mask.map(|v| 1.0 - v)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mask.shape()
    }

    pub fn is_free(&self, i: usize, j: usize) -> bool {
        self.mask[(i, j)] == 1.0
    }

    pub fn check_dims(&self, nu: usize, nx: usize) -> Result<()> {
        if self.shape() != (nu, nx) {
            return Err(dim_err("pattern", format!("{:?}", (nu, nx)), format!("{:?}", self.shape())));
        }
        Ok(())
    }

    /// `max |K ∘ I_{S^c}|`.
    pub fn violation(&self, k: &DMatrix<f64>) -> f64 {
        k.component_mul(&self.complement()).amax()
    }
}

impl FromStr for StructurePattern {
    type Err = Error;

    /// Rows of `0`/`1` characters separated by `;`, e.g. `"110;011"`.
    fn from_str(s: &str) -> Result<Self> {
        let rows: Vec<&str> = s.split(';').map(str::trim).filter(|r| !r.is_empty()).collect();
        if rows.is_empty() {
            return Err(Error::Parse("empty pattern".into()));
        }
        let cols = rows[0].len();
        let mut mask = DMatrix::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Parse(format!("ragged pattern row `{row}`")));
            }
            for (j, ch) in row.chars().enumerate() {
                mask[(i, j)] = match ch {
                    '0' => 0.0,
                    '1' => 1.0,
                    other => return Err(Error::Parse(format!("invalid pattern character `{other}`"))),
                };
            }
        }
        Ok(Self { mask })
    }
}

impl fmt::Display for StructurePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .mask
            .row_iter()
            .map(|r| r.iter().map(|&v| if v == 1.0 { '1' } else { '0' }).collect())
            .collect();
        f.write_str(&rows.join(";"))
    }
}

impl Serialize for StructurePattern {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for StructurePattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let p: StructurePattern = "110;011".parse().unwrap();
        assert_eq!(p.shape(), (2, 3));
        assert!(p.is_free(0, 1) && !p.is_free(0, 2) && !p.is_free(1, 0));
        assert_eq!(p.to_string(), "110;011");
        assert_eq!(p.complement(), DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn parse_errors() {
        assert!("".parse::<StructurePattern>().is_err());
        assert!("11;0".parse::<StructurePattern>().is_err());
        assert!("12".parse::<StructurePattern>().is_err());
    }

    #[test]
    fn violation_measures_forbidden_entries() {
        let p: StructurePattern = "10;01".parse().unwrap();
        let k = DMatrix::from_row_slice(2, 2, &[5.0, -0.25, 0.0, 3.0]);
        assert_eq!(p.violation(&k), 0.25);
        assert!(p.check_dims(2, 2).is_ok());
        assert!(p.check_dims(2, 3).is_err());
    }

    #[test]
    fn json_as_string() {
        let p: StructurePattern = "110;110".parse().unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "\"110;110\"");
        assert_eq!(serde_json::from_str::<StructurePattern>(&s).unwrap(), p);
    }
}
