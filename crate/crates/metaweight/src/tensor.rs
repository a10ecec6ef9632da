//! Dense row-major matrices and named flat parameter storage.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Row-major dense matrix of f64.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// y = self * x for a column vector x (len = cols).
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Length {
                expected: self.cols,
                got: x.len(),
                context: "matvec input".into(),
            });
        }
        let mut y = vec![0.0; self.rows];
        for (r, out) in y.iter_mut().enumerate() {
            let row = self.row(r);
            *out = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        Ok(y)
    }

    /// y = self^T * x for a column vector x (len = rows).
    pub fn matvec_t(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::Length {
                expected: self.rows,
                got: x.len(),
                context: "matvec_t input".into(),
            });
        }
        let mut y = vec![0.0; self.cols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for (yo, &a) in y.iter_mut().zip(self.row(r)) {
                *yo += xr * a;
            }
        }
        Ok(y)
    }
}

/// Flat parameter storage with named segments. Houses every model's
/// trainable parameters and the optimizer moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub values: DenseMatrix,
}

impl ParamVector {
    pub fn new(segments: Vec<(&str, DenseMatrix)>) -> Result<Self> {
        let mut names: Vec<&str> = segments.iter().map(|(n, _)| *n).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != segments.len() {
            return Err(Error::Config("duplicate segment name".into()));
        }
        Ok(ParamVector {
            segments: segments
                .into_iter()
                .map(|(name, values)| Segment {
                    name: name.to_string(),
                    values,
                })
                .collect(),
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, name: &str) -> &DenseMatrix {
        &self
            .segments
            .iter()
            .find(|s| s.name == name)
            .unwrap_or_else(|| panic!("no segment named {name}"))
            .values
    }

    pub fn segment_mut(&mut self, name: &str) -> &mut DenseMatrix {
        &mut self
            .segments
            .iter_mut()
            .find(|s| s.name == name)
            .unwrap_or_else(|| panic!("no segment named {name}"))
            .values
    }

    pub fn has_segment(&self, name: &str) -> bool {
        self.segments.iter().any(|s| s.name == name)
    }

    /// Total number of scalar parameters across segments.
    pub fn len(&self) -> usize {
        self.segments.iter().map(|s| s.values.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same segment names and shapes, all zeros.
    pub fn zeros_like(&self) -> ParamVector {
        ParamVector {
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    name: s.name.clone(),
                    values: DenseMatrix::zeros(s.values.rows(), s.values.cols()),
                })
                .collect(),
        }
    }

    pub fn same_shape(&self, other: &ParamVector) -> bool {
        self.segments.len() == other.segments.len()
            && self.segments.iter().zip(&other.segments).all(|(a, b)| {
                a.name == b.name
                    && a.values.rows() == b.values.rows()
                    && a.values.cols() == b.values.cols()
            })
    }

    /// self += scale * other.
    pub fn axpy(&mut self, scale: f64, other: &ParamVector) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Shape("axpy segment shapes differ".into()));
        }
        for (a, b) in self.segments.iter_mut().zip(&other.segments) {
            for (x, y) in a.values.data_mut().iter_mut().zip(b.values.data()) {
                *x += scale * y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for s in &mut self.segments {
            for x in s.values.data_mut() {
                *x *= factor;
            }
        }
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        if !self.same_shape(other) {
            return Err(Error::Shape("dot segment shapes differ".into()));
        }
        Ok(self
            .segments
            .iter()
            .zip(&other.segments)
            .map(|(a, b)| {
                a.values
                    .data()
                    .iter()
                    .zip(b.values.data())
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
            })
            .sum())
    }

    pub fn iter_flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.segments.iter().flat_map(|s| s.values.data().iter().copied())
    }

    /// Mutable access by flat index across segments, in segment order.
    pub fn flat_mut(&mut self, mut index: usize) -> &mut f64 {
        for s in &mut self.segments {
            let n = s.values.len();
            if index < n {
                return &mut s.values.data_mut()[index];
            }
            index -= n;
        }
        panic!("flat index out of range");
    }

    pub fn all_finite(&self) -> bool {
        self.segments.iter().all(|s| s.values.all_finite())
    }

    /// Maximum absolute entry, for diagnostics and relative-error checks.
    pub fn max_abs(&self) -> f64 {
        self.iter_flat().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(DenseMatrix::from_vec(2, 3, vec![0.0; 5]).is_err());
    }

    #[test]
    fn matvec_basics() {
        let m = DenseMatrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.matvec(&[1.0, 0.0, -1.0]).unwrap(), vec![-2.0, -2.0]);
        assert_eq!(m.matvec_t(&[1.0, 1.0]).unwrap(), vec![5.0, 7.0, 9.0]);
        assert!(m.matvec(&[1.0]).is_err());
    }

    #[test]
    fn param_vector_segments() {
        let p = ParamVector::new(vec![
            ("w", DenseMatrix::zeros(2, 2)),
            ("b", DenseMatrix::zeros(1, 2)),
        ])
        .unwrap();
        assert_eq!(p.len(), 6);
        assert!(p.has_segment("w"));
        assert!(!p.has_segment("x"));
    }

    #[test]
    fn duplicate_segment_names_rejected() {
        let r = ParamVector::new(vec![
            ("w", DenseMatrix::zeros(1, 1)),
            ("w", DenseMatrix::zeros(1, 1)),
        ]);
        assert!(r.is_err());
    }

    #[test]
    fn axpy_and_dot() {
        let mut a = ParamVector::new(vec![("w", DenseMatrix::from_vec(1, 2, vec![1.0, 2.0]).unwrap())])
            .unwrap();
        let b = ParamVector::new(vec![("w", DenseMatrix::from_vec(1, 2, vec![3.0, 4.0]).unwrap())])
            .unwrap();
        a.axpy(2.0, &b).unwrap();
        assert_eq!(a.segment("w").data(), &[7.0, 10.0]);
        assert_eq!(a.dot(&b).unwrap(), 61.0);
    }
}
