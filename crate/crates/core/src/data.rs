//! Validated record containers for the three data conventions: the unit
//! cube (grid mechanisms), the unit ball with labels (linear models), and
//! bit vectors / `[-1, 1]` boxes (query release).

use crate::error::{LdpError, Result};

/// Row-major matrix of `n` records with `dim` reals each.
#[derive(Debug, Clone, PartialEq)]
pub struct Records {
    dim: usize,
    data: Vec<f64>,
}

impl Records {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(LdpError::param("record dimension must be positive"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(LdpError::param(format!(
                "{} values do not split into rows of {dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LdpError::param("records must be finite"));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| LdpError::param("no rows"))?;
        if rows.iter().any(|r| r.len() != dim) {
            return Err(LdpError::param("rows have inconsistent dimensions"));
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Column means.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for r in self.rows() {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        let n = self.len().max(1) as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }
}

/// Features in the unit ball with labels in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallDataset {
    features: Records,
    labels: Vec<f64>,
}

impl BallDataset {
    pub fn new(features: Records, labels: Vec<f64>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(LdpError::param(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if features.is_empty() {
            return Err(LdpError::param("dataset is empty"));
        }
        for (i, r) in features.rows().enumerate() {
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1.0 + 1e-12 {
                return Err(LdpError::param(format!("record {i} has norm {norm} > 1")));
            }
        }
        if let Some(i) = labels.iter().position(|y| y.abs() > 1.0) {
            return Err(LdpError::param(format!("label {i} outside [-1, 1]")));
        }
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> &Records {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn y(&self, i: usize) -> f64 {
        self.labels[i]
    }
}

/// Rows of bits.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDataset {
    p: usize,
    bits: Vec<u8>,
}

impl BinaryDataset {
    pub fn new(p: usize, bits: Vec<u8>) -> Result<Self> {
        if p == 0 || !bits.len().is_multiple_of(p) || bits.is_empty() {
            return Err(LdpError::param(
                "binary dataset needs p >= 1 and whole non-empty rows",
            ));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(LdpError::param("binary dataset entries must be 0 or 1"));
        }
        Ok(Self { p, bits })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let p = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| LdpError::param("no rows"))?;
        if rows.iter().any(|r| r.len() != p) {
            return Err(LdpError::param("rows have inconsistent dimensions"));
        }
        Self::new(p, rows.concat())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.bits.len() / self.p
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.bits[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        self.bits.chunks_exact(self.p)
    }
}

/// Rows in `[-1, 1]^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDataset {
    records: Records,
}

impl BoxDataset {
    pub fn new(records: Records) -> Result<Self> {
        if records.is_empty() {
            return Err(LdpError::param("dataset is empty"));
        }
        if records.as_slice().iter().any(|v| v.abs() > 1.0) {
            return Err(LdpError::param(
                "box dataset coordinates must lie in [-1, 1]",
            ));
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &Records {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn p(&self) -> usize {
        self.records.dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Records::new(2, vec![1.0, 2.0, 3.0]).is_err());
        let r = Records::from_rows(&[vec![0.6, 0.8], vec![0.0, 0.1]]).unwrap();
        assert_eq!(r.len(), 2);
        assert!(BallDataset::new(r.clone(), vec![1.0, -1.0]).is_ok());
        assert!(BallDataset::new(r.clone(), vec![1.5, -1.0]).is_err());
        let big = Records::from_rows(&[vec![0.9, 0.9]]).unwrap();
        assert!(BallDataset::new(big, vec![1.0]).is_err());
        assert!(BinaryDataset::new(2, vec![0, 2]).is_err());
        assert!(BoxDataset::new(Records::from_rows(&[vec![1.1]]).unwrap()).is_err());
    }
}
