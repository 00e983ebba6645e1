//! Sparse and dense vector representations shared by the lexical and
//! semantic similarity paths.

use serde::{Deserialize, Serialize};

/// Sparse vector with strictly increasing column indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    /// Builds from `(index, value)` entries. Entries are sorted; zero values
    /// are dropped and duplicate indices are summed.
    pub fn from_entries(mut entries: Vec<(u32, f64)>) -> Self {
        entries.sort_by_key(|&(i, _)| i);
        let mut indices: Vec<u32> = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            if indices.last() == Some(&i) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        let mut out = SparseVector { indices, values };
        out.prune_zeros();
        out
    }

    fn prune_zeros(&mut self) {
        if self.values.iter().all(|v| *v != 0.0) {
            return;
        }
        let (indices, values) = self
            .indices
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (*i, *v))
            .unzip();
        self.indices = indices;
        self.values = values;
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Largest index + 1, or 0 for the zero vector.
    pub fn min_dim(&self) -> usize {
        self.indices.last().map_or(0, |&i| i as usize + 1)
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Dot product accumulated in ascending index order.
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[i] * other.values[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.values.iter_mut().for_each(|v| *v /= n);
        }
        self
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (i, v) in self.iter() {
            out[i as usize] = v;
        }
        out
    }
}

/// A single vector of either representation.
#[derive(Debug, Clone, PartialEq)]
pub enum Vector {
    Sparse(SparseVector),
    Dense(Vec<f64>),
}

impl Vector {
    pub fn norm(&self) -> f64 {
        match self {
            Vector::Sparse(s) => s.norm(),
            Vector::Dense(d) => dense_norm(d),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Vector::Sparse(s) => s.is_zero(),
            Vector::Dense(d) => d.iter().all(|v| *v == 0.0),
        }
    }
}

pub(crate) fn dense_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dense_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_are_sorted_merged_and_pruned() {
        let v = SparseVector::from_entries(vec![(3, 1.0), (1, 2.0), (3, 0.5), (2, 0.0)]);
        assert_eq!(v.indices(), &[1, 3]);
        assert_eq!(v.values(), &[2.0, 1.5]);
        assert_eq!(v.min_dim(), 4);
    }

    #[test]
    fn sparse_dot_matches_dense() {
        let a = SparseVector::from_entries(vec![(0, 1.0), (2, 3.0), (5, -1.0)]);
        let b = SparseVector::from_entries(vec![(2, 2.0), (4, 7.0), (5, 2.0)]);
        assert_eq!(a.dot(&b), dense_dot(&a.to_dense(6), &b.to_dense(6)));
        assert_eq!(a.dot(&b), 4.0);
    }

    #[test]
    fn normalized_has_unit_norm() {
        let v = SparseVector::from_entries(vec![(0, 3.0), (1, 4.0)]).normalized();
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert!(SparseVector::default().normalized().is_zero());
    }
}
