//! Plain MLP wrapped as an ENN that ignores its index.

use crate::numerics::{
    mlp_backward, mlp_forward, MlpArch, ParamStore, ParamStoreBuilder, StreamKey,
};

use super::{arch_flops, check_index, Enn, EnnError, EpistemicIndex, ModelSpec, ReferenceDistribution};

/// A conventional MLP. The reference distribution is a 1-dimensional
/// Gaussian whose draws are never read, so joint predictions collapse to the
/// product of marginals.
pub struct MlpEnn {
    arch: MlpArch,
    reference: ReferenceDistribution,
    range: std::ops::Range<usize>,
}

impl MlpEnn {
    pub fn new(arch: MlpArch) -> Self {
        let mut b = ParamStoreBuilder::new();
        let range = b.add_mlp("mlp", &arch, true);
        MlpEnn {
            arch,
            reference: ReferenceDistribution::Gaussian { dim: 1 },
            range,
        }
    }

    fn layout(&self) -> ParamStore {
        let mut b = ParamStoreBuilder::new();
        b.add_mlp("mlp", &self.arch, true);
        b.build()
    }

    pub fn arch(&self) -> &MlpArch {
        &self.arch
    }
}

impl Enn for MlpEnn {
    fn input_dim(&self) -> usize {
        self.arch.input_dim
    }

    fn output_dim(&self) -> usize {
        self.arch.output_dim
    }

    fn reference(&self) -> &ReferenceDistribution {
        &self.reference
    }

    fn init_params(&self, key: StreamKey) -> ParamStore {
        let mut params = self.layout();
        params
            .slice_mut(self.range.clone())
            .copy_from_slice(&self.arch.init_glorot(key));
        params
    }

    fn forward(
        &self,
        params: &ParamStore,
        x: &[f64],
        z: &EpistemicIndex,
    ) -> Result<Vec<f64>, EnnError> {
        check_index(&self.reference, z)?;
        let (y, _) = mlp_forward(&self.arch, params.slice(self.range.clone()), x)?;
        Ok(y)
    }

    fn backward(
        &self,
        params: &ParamStore,
        x: &[f64],
        z: &EpistemicIndex,
        upstream: &[f64],
        grad: &mut ParamStore,
    ) -> Result<(), EnnError> {
        check_index(&self.reference, z)?;
        let p = params.slice(self.range.clone());
        let (_, tape) = mlp_forward(&self.arch, p, x)?;
        mlp_backward(&self.arch, p, &tape, upstream, grad.slice_mut(self.range.clone()))?;
        Ok(())
    }

    fn forward_many(
        &self,
        params: &ParamStore,
        x: &[f64],
        zs: &[EpistemicIndex],
    ) -> Result<Vec<Vec<f64>>, EnnError> {
        for z in zs {
            check_index(&self.reference, z)?;
        }
        let (y, _) = mlp_forward(&self.arch, params.slice(self.range.clone()), x)?;
        Ok(vec![y; zs.len()])
    }

    fn backward_many(
        &self,
        params: &ParamStore,
        x: &[f64],
        zs: &[EpistemicIndex],
        upstreams: &[Vec<f64>],
        grad: &mut ParamStore,
    ) -> Result<(), EnnError> {
        // Index-independent forward: one backward with the summed upstream.
        for z in zs {
            check_index(&self.reference, z)?;
        }
        let mut summed = vec![0.0; self.arch.output_dim];
        for u in upstreams {
            for (s, v) in summed.iter_mut().zip(u) {
                *s += v;
            }
        }
        let p = params.slice(self.range.clone());
        let (_, tape) = mlp_forward(&self.arch, p, x)?;
        mlp_backward(&self.arch, p, &tape, &summed, grad.slice_mut(self.range.clone()))?;
        Ok(())
    }

    fn descriptor(&self) -> ModelSpec {
        ModelSpec::Mlp {
            arch: self.arch.clone(),
        }
    }

    fn flops_per_forward(&self) -> u64 {
        arch_flops(&self.arch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ignores_index_values() {
        let m = MlpEnn::new(MlpArch::new(3, vec![4], 2));
        let p = m.init_params(StreamKey::new(1));
        let x = [0.4, -0.2, 0.9];
        let a = m
            .forward(&p, &x, &EpistemicIndex::Vector(vec![5.0]))
            .unwrap();
        let b = m
            .forward(&p, &x, &EpistemicIndex::Vector(vec![-3.0]))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_mismatched_index() {
        let m = MlpEnn::new(MlpArch::new(2, vec![], 2));
        let p = m.init_params(StreamKey::new(1));
        let err = m
            .forward(&p, &[1.0, 2.0], &EpistemicIndex::Particle(0))
            .unwrap_err();
        assert!(matches!(err, EnnError::IndexMismatch { .. }));
    }
}
