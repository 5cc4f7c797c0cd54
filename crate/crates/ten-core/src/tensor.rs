//! Dense row-major fp64 tensors of rank 0, 1, or 2.
//!
//! Deliberately minimal: just a shape + flat buffer value type. All
//! arithmetic lives on the tape (`crate::tape`) so every op records its
//! backward rule in one place.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn scalar(v: f64) -> Self {
        Tensor { dims: vec![], data: vec![v] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor { dims: vec![data.len()], data }
    }

    /// Row-major rank-2 tensor. Panics if `data.len() != rows * cols`
    /// (construction sites are all internal and shape-known).
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Tensor { dims: vec![rows, cols], data }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let numel = dims.iter().product();
        Tensor { dims: dims.to_vec(), data: vec![0.0; numel] }
    }

    /// Internal constructor for ops that already know the target shape.
    pub(crate) fn from_parts(dims: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        Tensor { dims, data }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn is_vector(&self) -> bool {
        self.dims.len() == 1
    }

    pub fn is_matrix(&self) -> bool {
        self.dims.len() == 2
    }

    /// Rank-2 row count (callers check `is_matrix` first).
    pub fn rows(&self) -> usize {
        self.dims[0]
    }

    /// Rank-2 column count.
    pub fn cols(&self) -> usize {
        self.dims[1]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn as_scalar(&self) -> f64 {
        debug_assert!(self.is_scalar());
        self.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Human-readable shape like `[3x4]`, `[7]`, or `[scalar]` for errors.
    pub fn shape_string(&self) -> String {
        shape_string(&self.dims)
    }
}

pub fn shape_string(dims: &[usize]) -> String {
    if dims.is_empty() {
        return String::from("[scalar]");
    }
    let mut s = String::from("[");
    for (i, d) in dims.iter().enumerate() {
        if i > 0 {
            s.push('x');
        }
        let _ = write!(s, "{d}");
    }
    s.push(']');
    s
}
