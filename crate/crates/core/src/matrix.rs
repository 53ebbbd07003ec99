use std::ops::{Index, IndexMut};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Dense square matrix indexed by `(row, col)`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Clone> Matrix<T> {
    pub fn filled(dim: usize, value: T) -> Self {
        Self {
            dim,
            data: vec![value; dim * dim],
        }
    }
}

impl<T> Matrix<T> {
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    /// Builds a matrix from rows; `None` if the rows are ragged or not square.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Option<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return None;
        }
        Some(Self {
            dim,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Row-major view of all entries.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn iter_indexed(&self) -> impl Iterator<Item = ((usize, usize), &T)> {
        let dim = self.dim;
        self.data.iter().enumerate().map(move |(k, v)| ((k / dim, k % dim), v))
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Matrix<U> {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T: Clone> Matrix<T> {
    pub fn rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.dim.max(1)).map(|r| r.to_vec()).collect()
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        assert!(i < self.dim && j < self.dim, "index ({i},{j}) out of bounds");
        &self.data[i * self.dim + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        assert!(i < self.dim && j < self.dim, "index ({i},{j}) out of bounds");
        &mut self.data[i * self.dim + j]
    }
}

impl<T: Serialize + Clone> Serialize for Matrix<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(serializer)
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Matrix<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<T>>::deserialize(deserializer)?;
        Matrix::from_rows(rows).ok_or_else(|| serde::de::Error::custom("matrix must be square"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip() {
        let m = Matrix::from_fn(3, |i, j| (i * 3 + j) as f64);
        assert_eq!(m[(1, 2)], 5.0);
        assert_eq!(Matrix::from_rows(m.rows()).unwrap(), m);
        let js = serde_json::to_string(&m).unwrap();
        assert_eq!(js, "[[0.0,1.0,2.0],[3.0,4.0,5.0],[6.0,7.0,8.0]]");
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Matrix::from_rows(vec![vec![1, 2], vec![3]]).is_none());
        assert!(serde_json::from_str::<Matrix<f64>>("[[1.0,2.0]]").is_err());
    }
}
