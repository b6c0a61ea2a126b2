//! Supervised datasets: an input matrix plus class or real-valued labels.

use crate::numerics::{Matrix, NumericsError};

/// Label storage for a dataset.
#[derive(Clone, Debug, PartialEq)]
pub enum Labels {
    /// Class ids in `[0, C)`.
    Classes(Vec<usize>),
    /// Real-valued regression targets.
    Reals(Vec<f64>),
}

/// One label, as handed to a loss function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Target {
    Class(usize),
    Real(f64),
}

/// Inputs (T x D) with one label per row.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    pub inputs: Matrix,
    pub labels: Labels,
}

impl LabeledDataset {
    pub fn new(inputs: Matrix, labels: Labels) -> Result<Self, NumericsError> {
        let n = match &labels {
            Labels::Classes(v) => v.len(),
            Labels::Reals(v) => v.len(),
        };
        if n != inputs.rows() || n == 0 {
            return Err(NumericsError::Dimension {
                context: "LabeledDataset labels".into(),
                expected: inputs.rows(),
                got: n,
            });
        }
        Ok(LabeledDataset { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input(&self, i: usize) -> &[f64] {
        self.inputs.row(i)
    }

    pub fn target(&self, i: usize) -> Target {
        match &self.labels {
            Labels::Classes(v) => Target::Class(v[i]),
            Labels::Reals(v) => Target::Real(v[i]),
        }
    }

    /// Class id of row `i`; panics if the dataset is regression-labeled.
    pub fn class(&self, i: usize) -> usize {
        match &self.labels {
            Labels::Classes(v) => v[i],
            Labels::Reals(_) => panic!("class() on regression labels"),
        }
    }
}
