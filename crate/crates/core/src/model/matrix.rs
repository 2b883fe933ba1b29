use super::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `selfᵀ · x` for `x` of length `rows`.
    pub fn t_mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for (r, &xv) in x.iter().enumerate() {
            if xv != T::zero() {
                super::scalar::axpy(&mut out, xv, self.row(r));
            }
        }
        out
    }

    /// `self · y` for `y` of length `cols`.
    pub fn mul_vec(&self, y: &[T]) -> Vec<T> {
        (0..self.rows).map(|r| super::scalar::dot(self.row(r), y)).collect()
    }

    /// `self += scale · x yᵀ`
    pub fn add_outer(&mut self, scale: T, x: &[T], y: &[T]) {
        for (r, &xv) in x.iter().enumerate() {
            let s = scale * xv;
            if s != T::zero() {
                super::scalar::axpy(self.row_mut(r), s, y);
            }
        }
    }
}
