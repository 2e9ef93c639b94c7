//! Dense node-feature matrices: one-hot colors, one-hot positional
//! encodings and their column-wise concatenation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ColoredGraph, DiscreteColouring, Permutation};

/// Row-major `rows × cols` real matrix, one row per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureTensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        FeatureTensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "{} values cannot fill a {rows}×{cols} tensor",
                data.len()
            )));
        }
        Ok(FeatureTensor { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dim("ragged feature rows"));
        }
        Ok(FeatureTensor {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    /// Row `v` is one-hot at column `indices[v]`.
    pub fn one_hot(indices: &[usize], width: usize) -> Result<Self> {
        let mut t = FeatureTensor::zeros(indices.len(), width);
        for (v, &i) in indices.iter().enumerate() {
            if i >= width {
                return Err(Error::Width { value: i, width });
            }
            t.data[v * width + i] = 1.0;
        }
        Ok(t)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// Moves row `v` to row `p(v)`, matching [`crate::graph::apply_permutation`].
    pub fn permute_rows(&self, p: &Permutation) -> Result<Self> {
        if p.len() != self.rows {
            return Err(Error::dim("permutation length differs from row count"));
        }
        let mut out = FeatureTensor::zeros(self.rows, self.cols);
        for v in 0..self.rows {
            let dst = p.apply(v);
            out.data[dst * self.cols..(dst + 1) * self.cols].copy_from_slice(self.row(v));
        }
        Ok(out)
    }
}

/// One-hot node colors: row `v` has a 1 at column `c(v)`.
pub fn one_hot_colors(g: &ColoredGraph, width: usize) -> Result<FeatureTensor> {
    let idx: Vec<usize> = g.colors().iter().map(|&c| c as usize).collect();
    FeatureTensor::one_hot(&idx, width)
}

/// One-hot ranks of a discrete colouring: row `v` has a 1 at column `rank(v) - 1`.
pub fn one_hot_ranks(c: &DiscreteColouring, width: usize) -> Result<FeatureTensor> {
    let idx: Vec<usize> = c.ranks().iter().map(|&r| r - 1).collect();
    FeatureTensor::one_hot(&idx, width)
}

/// Column-wise concatenation `x ⊕ p`.
pub fn concat_features(x: &FeatureTensor, p: &FeatureTensor) -> Result<FeatureTensor> {
    if x.rows != p.rows {
        return Err(Error::dim(format!(
            "cannot concatenate tensors with {} and {} rows",
            x.rows, p.rows
        )));
    }
    let cols = x.cols + p.cols;
    let mut data = Vec::with_capacity(x.rows * cols);
    for r in 0..x.rows {
        data.extend_from_slice(x.row(r));
        data.extend_from_slice(p.row(r));
    }
    Ok(FeatureTensor {
        rows: x.rows,
        cols,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn colored(colors: Vec<u32>) -> ColoredGraph {
        ColoredGraph::new("g", colors.len(), &[], colors).unwrap()
    }

    #[test]
    fn one_hot_examples() {
        let t = one_hot_colors(&colored(vec![0, 1]), 2).unwrap();
        assert_eq!(t.to_rows(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let t = one_hot_colors(&colored(vec![2]), 4).unwrap();
        assert_eq!(t.to_rows(), vec![vec![0.0, 0.0, 1.0, 0.0]]);
        let t = one_hot_colors(&colored(vec![0, 0, 0]), 1).unwrap();
        assert_eq!(t.to_rows(), vec![vec![1.0]; 3]);
    }

    #[test]
    fn one_hot_width_error() {
        let err = one_hot_colors(&colored(vec![0, 3]), 3).unwrap_err();
        assert!(matches!(err, Error::Width { value: 3, width: 3 }));
    }

    #[test]
    fn concat_examples() {
        let z = concat_features(&FeatureTensor::zeros(3, 2), &FeatureTensor::zeros(3, 4)).unwrap();
        assert_eq!((z.rows(), z.cols()), (3, 6));
        assert!(z.as_slice().iter().all(|&v| v == 0.0));

        let a = FeatureTensor::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let b = FeatureTensor::from_rows(&[vec![0.0, 1.0]]).unwrap();
        assert_eq!(concat_features(&a, &b).unwrap().to_rows(), vec![vec![1.0, 0.0, 0.0, 1.0]]);

        let err = concat_features(&FeatureTensor::zeros(2, 1), &FeatureTensor::zeros(3, 1));
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn one_hot_rows_sum_to_one() {
        let t = one_hot_colors(&colored(vec![3, 1, 4, 1, 5]), 6).unwrap();
        for r in 0..t.rows() {
            assert_eq!(t.row(r).iter().sum::<f64>(), 1.0);
        }
    }
}
