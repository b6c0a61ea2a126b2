//! Flat parameter vector with named, typed views.
//!
//! Every model stores all of its numbers — trainable weights, frozen prior
//! weights, normalization constants — in one `ParamStore`. Views partition
//! the flat vector exactly (no gaps, no overlaps) in a deterministic order
//! fixed by the architecture, which is what makes checkpoints, optimizer
//! state, and gradient stores layout-compatible by construction.

use serde::{Deserialize, Serialize};

/// Shape of a single named view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViewShape {
    Matrix { rows: usize, cols: usize },
    Vector { len: usize },
}

impl ViewShape {
    pub fn len(&self) -> usize {
        match *self {
            ViewShape::Matrix { rows, cols } => rows * cols,
            ViewShape::Vector { len } => len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A named slice of the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub name: String,
    pub offset: usize,
    pub shape: ViewShape,
    /// Views marked non-trainable receive no data-loss gradient and no
    /// regularization gradient; their entries stay bit-identical to
    /// initialization through any number of optimizer steps.
    pub trainable: bool,
}

impl ViewSpec {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.shape.len()
    }
}

/// Index of a view inside its `ParamStore`, valid for any store with the
/// same layout. Hot paths address views by id; names are for checkpoints,
/// debugging, and tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ViewId(pub(crate) usize);

/// Builder that lays out views back to back.
#[derive(Default)]
pub struct ParamStoreBuilder {
    views: Vec<ViewSpec>,
    len: usize,
}

impl ParamStoreBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_view(&mut self, name: impl Into<String>, shape: ViewShape, trainable: bool) -> ViewId {
        let id = ViewId(self.views.len());
        self.views.push(ViewSpec {
            name: name.into(),
            offset: self.len,
            shape,
            trainable,
        });
        self.len += shape.len();
        id
    }

    /// Add one view per layer of an MLP laid out as `{prefix}/l{i}/w` then
    /// `{prefix}/l{i}/b`, returning the flat range covering the whole net.
    pub fn add_mlp(
        &mut self,
        prefix: &str,
        arch: &super::MlpArch,
        trainable: bool,
    ) -> std::ops::Range<usize> {
        let start = self.len;
        for (i, (fan_in, fan_out)) in arch.layer_dims().into_iter().enumerate() {
            self.add_view(
                format!("{prefix}/l{i}/w"),
                ViewShape::Matrix {
                    rows: fan_out,
                    cols: fan_in,
                },
                trainable,
            );
            self.add_view(format!("{prefix}/l{i}/b"), ViewShape::Vector { len: fan_out }, trainable);
        }
        start..self.len
    }

    pub fn build(self) -> ParamStore {
        ParamStore {
            flat: vec![0.0; self.len],
            views: self.views,
        }
    }
}

/// Flat `f64` vector of all model parameters plus the view table.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore {
    flat: Vec<f64>,
    views: Vec<ViewSpec>,
}

impl ParamStore {
    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    pub fn views(&self) -> &[ViewSpec] {
        &self.views
    }

    pub fn view_spec(&self, id: ViewId) -> &ViewSpec {
        &self.views[id.0]
    }

    pub fn view(&self, id: ViewId) -> &[f64] {
        &self.flat[self.views[id.0].range()]
    }

    pub fn view_mut(&mut self, id: ViewId) -> &mut [f64] {
        let r = self.views[id.0].range();
        &mut self.flat[r]
    }

    pub fn view_by_name(&self, name: &str) -> Option<(&ViewSpec, &[f64])> {
        let spec = self.views.iter().find(|v| v.name == name)?;
        Some((spec, &self.flat[spec.range()]))
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> &[f64] {
        &self.flat[range]
    }

    pub fn slice_mut(&mut self, range: std::ops::Range<usize>) -> &mut [f64] {
        &mut self.flat[range]
    }

    /// Same views, all-zero values. Used for gradients and moment buffers.
    pub fn zeros_like(&self) -> ParamStore {
        ParamStore {
            flat: vec![0.0; self.flat.len()],
            views: self.views.clone(),
        }
    }

    pub fn fill(&mut self, v: f64) {
        self.flat.fill(v);
    }

    pub fn same_layout(&self, other: &ParamStore) -> bool {
        self.views == other.views
    }

    /// Iterator over the flat ranges of trainable views.
    pub fn trainable_ranges(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        self.views.iter().filter(|v| v.trainable).map(|v| v.range())
    }

    /// Number of entries in trainable views.
    pub fn trainable_len(&self) -> usize {
        self.views
            .iter()
            .filter(|v| v.trainable)
            .map(|v| v.shape.len())
            .sum()
    }

    /// Squared L2 norm over trainable views only.
    pub fn trainable_sq_norm(&self) -> f64 {
        self.trainable_ranges()
            .map(|r| self.flat[r].iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// Checks the partition invariant: views tile the flat vector exactly.
    pub fn views_partition_exactly(&self) -> bool {
        let mut offset = 0;
        for v in &self.views {
            if v.offset != offset {
                return false;
            }
            offset += v.shape.len();
        }
        offset == self.flat.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_store() -> (ParamStore, ViewId, ViewId, ViewId) {
        let mut b = ParamStoreBuilder::new();
        let w = b.add_view("w", ViewShape::Matrix { rows: 2, cols: 3 }, true);
        let bias = b.add_view("b", ViewShape::Vector { len: 2 }, true);
        let frozen = b.add_view("prior", ViewShape::Vector { len: 4 }, false);
        (b.build(), w, bias, frozen)
    }

    #[test]
    fn views_partition_flat_vector() {
        let (s, ..) = sample_store();
        assert_eq!(s.len(), 12);
        assert!(s.views_partition_exactly());
        let total: usize = s.views().iter().map(|v| v.shape.len()).sum();
        assert_eq!(total, s.len());
    }

    #[test]
    fn pack_unpack_round_trip_is_identity() {
        let (mut s, w, bias, frozen) = sample_store();
        for (i, v) in s.flat_mut().iter_mut().enumerate() {
            *v = i as f64 + 0.5;
        }
        let flat_copy = s.flat().to_vec();
        // Reassemble from views in order; must reproduce the flat vector.
        let mut packed = Vec::new();
        for id in [w, bias, frozen] {
            packed.extend_from_slice(s.view(id));
        }
        assert_eq!(packed, flat_copy);
    }

    #[test]
    fn trainable_accounting_excludes_frozen_views() {
        let (mut s, _, _, frozen) = sample_store();
        s.fill(2.0);
        assert_eq!(s.trainable_len(), 8);
        assert_eq!(s.trainable_sq_norm(), 8.0 * 4.0);
        assert_eq!(s.view(frozen), &[2.0; 4]);
    }

    #[test]
    fn lookup_by_name() {
        let (s, ..) = sample_store();
        let (spec, data) = s.view_by_name("prior").unwrap();
        assert!(!spec.trainable);
        assert_eq!(data.len(), 4);
        assert!(s.view_by_name("nope").is_none());
    }
}
