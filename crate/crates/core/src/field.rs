//! Per-vertex scalar fields and the `FIELD` text format.

use std::fmt::Write as _;
use std::ops::{Index, IndexMut};
use std::path::Path;

use crate::error::{Error, Result};

/// A real value per mesh vertex.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn zeros(n: usize) -> Self {
        Field(vec![0.0; n])
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Field(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Integral against lumped vertex masses.
    pub fn integral(&self, mass: &[f64]) -> f64 {
        self.0.iter().zip(mass).map(|(v, a)| v * a).sum()
    }

    /// Area-weighted mean.
    pub fn mean(&self, mass: &[f64]) -> f64 {
        self.integral(mass) / mass.iter().sum::<f64>()
    }

    /// Zero-mean representative `v - mean(v)`.
    pub fn to_zero_mean(&self, mass: &[f64]) -> Field {
        let m = self.mean(mass);
        Field(self.0.iter().map(|v| v - m).collect())
    }

    /// Whether `|∫v dA| <= 1e-10 |M| (1 + ‖v‖∞)`.
    pub fn is_zero_mean(&self, mass: &[f64]) -> bool {
        let area: f64 = mass.iter().sum();
        self.integral(mass).abs() <= 1e-10 * area * (1.0 + self.sup_norm())
    }

    pub fn has_non_finite(&self) -> bool {
        self.0.iter().any(|v| !v.is_finite())
    }

    pub fn add_scaled(&self, s: f64, other: &Field) -> Field {
        Field(self.0.iter().zip(&other.0).map(|(a, b)| a + s * b).collect())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.len() * 28 + 16);
        let _ = writeln!(out, "FIELD {}", self.len());
        for (i, v) in self.0.iter().enumerate() {
            let _ = writeln!(out, "{i} {v:.16e}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Field> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (ln, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty field file".into(),
        })?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("FIELD") {
            return Err(Error::Parse {
                line: ln,
                message: "expected 'FIELD n'".into(),
            });
        }
        let n: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or(Error::Parse {
                line: ln,
                message: "bad field length".into(),
            })?;
        let mut values = vec![f64::NAN; n];
        let mut seen = vec![false; n];
        for (ln, line) in lines {
            let mut parts = line.split_whitespace();
            let idx: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or(Error::Parse {
                    line: ln,
                    message: "bad vertex index".into(),
                })?;
            let val: f64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or(Error::Parse {
                    line: ln,
                    message: "bad value".into(),
                })?;
            if idx >= n || seen[idx] {
                return Err(Error::Parse {
                    line: ln,
                    message: format!("vertex index {idx} out of range or repeated"),
                });
            }
            seen[idx] = true;
            values[idx] = val;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Parse {
                line: ln,
                message: format!("no value for vertex {missing}"),
            });
        }
        Ok(Field(values))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Field> {
        Field::parse(&std::fs::read_to_string(path)?)
    }
}

impl Index<usize> for Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Field {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Field(v)
    }
}

/// Euclidean dot product of two vertex arrays.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log Σ w_i e^{v_i}` with max-subtraction, for positive weights.
pub fn log_sum_exp(weights: &[f64], v: &[f64]) -> f64 {
    let shift = v
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(x, _)| *x)
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return f64::NEG_INFINITY;
    }
    let s: f64 = v
        .iter()
        .zip(weights)
        .map(|(x, w)| w * (x - shift).exp())
        .sum();
    shift + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_is_exact() {
        let f = Field(vec![0.1, -1.0 / 3.0, 1e-300, 12345.678901234567]);
        assert_eq!(Field::parse(&f.to_text()).unwrap(), f);
    }

    #[test]
    fn parse_rejects_missing_vertices() {
        assert!(Field::parse("FIELD 2\n0 1.0\n").is_err());
        assert!(Field::parse("FIELD 1\n0 abc\n").is_err());
    }

    #[test]
    fn log_sum_exp_survives_large_exponents() {
        let w = [1.0, 2.0];
        let v = [800.0, 799.0];
        let direct = 800.0 + (1.0 + 2.0 * (-1.0f64).exp()).ln();
        assert!((log_sum_exp(&w, &v) - direct).abs() < 1e-12);
    }

    #[test]
    fn zero_mean_representative() {
        let mass = [1.0, 2.0, 3.0];
        let f = Field(vec![1.0, 5.0, -2.0]).to_zero_mean(&mass);
        assert!(f.is_zero_mean(&mass));
    }
}
