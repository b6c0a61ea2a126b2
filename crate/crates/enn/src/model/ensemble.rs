//! Deep ensembles, with and without additive frozen prior networks.

use crate::numerics::{
    mlp_backward, mlp_forward, MlpArch, ParamStore, ParamStoreBuilder, StreamKey, ViewId,
    ViewShape,
};

use super::{
    add_scaled_prior, arch_flops, check_index, Enn, EnnError, EpistemicIndex, ModelSpec,
    ReferenceDistribution,
};

/// Deep ensemble of K identically-shaped MLPs. The epistemic index is the
/// particle id, uniform over `0..K`; particles differ only by their
/// initialization stream.
pub struct Ensemble {
    arch: MlpArch,
    particles: usize,
    reference: ReferenceDistribution,
    ranges: Vec<std::ops::Range<usize>>,
}

impl Ensemble {
    pub fn new(arch: MlpArch, particles: usize) -> Result<Self, EnnError> {
        if particles == 0 {
            return Err(EnnError::InvalidConfig("ensemble needs at least 1 particle".into()));
        }
        let mut b = ParamStoreBuilder::new();
        let ranges = (0..particles)
            .map(|k| b.add_mlp(&format!("particle{k}"), &arch, true))
            .collect();
        Ok(Ensemble {
            arch,
            particles,
            reference: ReferenceDistribution::Uniform { count: particles },
            ranges,
        })
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    fn layout(&self) -> ParamStore {
        let mut b = ParamStoreBuilder::new();
        for k in 0..self.particles {
            b.add_mlp(&format!("particle{k}"), &self.arch, true);
        }
        b.build()
    }

    fn particle_of(&self, z: &EpistemicIndex) -> Result<usize, EnnError> {
        check_index(&self.reference, z)?;
        match *z {
            EpistemicIndex::Particle(k) => Ok(k),
            _ => unreachable!("check_index enforces particle ids"),
        }
    }
}

impl Enn for Ensemble {
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
        for (k, range) in self.ranges.iter().enumerate() {
            params
                .slice_mut(range.clone())
                .copy_from_slice(&self.arch.init_glorot(key.child(k as u64)));
        }
        params
    }

    fn forward(
        &self,
        params: &ParamStore,
        x: &[f64],
        z: &EpistemicIndex,
    ) -> Result<Vec<f64>, EnnError> {
        let k = self.particle_of(z)?;
        let (y, _) = mlp_forward(&self.arch, params.slice(self.ranges[k].clone()), x)?;
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
        let k = self.particle_of(z)?;
        let p = params.slice(self.ranges[k].clone());
        let (_, tape) = mlp_forward(&self.arch, p, x)?;
        mlp_backward(&self.arch, p, &tape, upstream, grad.slice_mut(self.ranges[k].clone()))?;
        Ok(())
    }

    fn forward_many(
        &self,
        params: &ParamStore,
        x: &[f64],
        zs: &[EpistemicIndex],
    ) -> Result<Vec<Vec<f64>>, EnnError> {
        let mut cache: Vec<Option<Vec<f64>>> = vec![None; self.particles];
        let mut out = Vec::with_capacity(zs.len());
        for z in zs {
            let k = self.particle_of(z)?;
            if cache[k].is_none() {
                let (y, _) = mlp_forward(&self.arch, params.slice(self.ranges[k].clone()), x)?;
                cache[k] = Some(y);
            }
            out.push(cache[k].clone().unwrap());
        }
        Ok(out)
    }

    fn backward_many(
        &self,
        params: &ParamStore,
        x: &[f64],
        zs: &[EpistemicIndex],
        upstreams: &[Vec<f64>],
        grad: &mut ParamStore,
    ) -> Result<(), EnnError> {
        // Sum upstreams per particle, then run one backward per particle hit.
        let mut summed: Vec<Option<Vec<f64>>> = vec![None; self.particles];
        for (z, u) in zs.iter().zip(upstreams) {
            let k = self.particle_of(z)?;
            let acc = summed[k].get_or_insert_with(|| vec![0.0; self.arch.output_dim]);
            for (a, v) in acc.iter_mut().zip(u) {
                *a += v;
            }
        }
        for (k, u) in summed.into_iter().enumerate() {
            if let Some(u) = u {
                let p = params.slice(self.ranges[k].clone());
                let (_, tape) = mlp_forward(&self.arch, p, x)?;
                mlp_backward(&self.arch, p, &tape, &u, grad.slice_mut(self.ranges[k].clone()))?;
            }
        }
        Ok(())
    }

    fn descriptor(&self) -> ModelSpec {
        ModelSpec::Ensemble {
            arch: self.arch.clone(),
            particles: self.particles,
        }
    }

    fn flops_per_forward(&self) -> u64 {
        arch_flops(&self.arch)
    }
}

/// Ensemble whose particle k outputs `f_k(x) + prior_scale * p_k(x)` with
/// `p_k` a frozen randomly-initialized prior network.
pub struct EnsemblePlus {
    arch: MlpArch,
    prior_arch: MlpArch,
    particles: usize,
    prior_scale: f64,
    reference: ReferenceDistribution,
    ranges: Vec<std::ops::Range<usize>>,
    prior_ranges: Vec<std::ops::Range<usize>>,
    norm_shift: ViewId,
    norm_scale: ViewId,
}

impl EnsemblePlus {
    pub fn new(
        arch: MlpArch,
        prior_arch: MlpArch,
        particles: usize,
        prior_scale: f64,
    ) -> Result<Self, EnnError> {
        if particles == 0 {
            return Err(EnnError::InvalidConfig("ensemble needs at least 1 particle".into()));
        }
        if prior_arch.input_dim != arch.input_dim || prior_arch.output_dim != arch.output_dim {
            return Err(EnnError::InvalidConfig(
                "prior network must share the ensemble's input/output dims".into(),
            ));
        }
        let mut b = ParamStoreBuilder::new();
        let mut ranges = Vec::new();
        let mut prior_ranges = Vec::new();
        for k in 0..particles {
            ranges.push(b.add_mlp(&format!("particle{k}"), &arch, true));
        }
        for k in 0..particles {
            prior_ranges.push(b.add_mlp(&format!("prior{k}"), &prior_arch, false));
        }
        let norm_shift = b.add_view(
            "prior_norm/shift",
            ViewShape::Vector { len: arch.output_dim },
            false,
        );
        let norm_scale = b.add_view(
            "prior_norm/scale",
            ViewShape::Vector { len: arch.output_dim },
            false,
        );
        Ok(EnsemblePlus {
            arch,
            prior_arch,
            particles,
            prior_scale,
            reference: ReferenceDistribution::Uniform { count: particles },
            ranges,
            prior_ranges,
            norm_shift,
            norm_scale,
        })
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    fn layout(&self) -> ParamStore {
        let mut b = ParamStoreBuilder::new();
        for k in 0..self.particles {
            b.add_mlp(&format!("particle{k}"), &self.arch, true);
        }
        for k in 0..self.particles {
            b.add_mlp(&format!("prior{k}"), &self.prior_arch, false);
        }
        b.add_view(
            "prior_norm/shift",
            ViewShape::Vector { len: self.arch.output_dim },
            false,
        );
        b.add_view(
            "prior_norm/scale",
            ViewShape::Vector { len: self.arch.output_dim },
            false,
        );
        b.build()
    }

    fn particle_of(&self, z: &EpistemicIndex) -> Result<usize, EnnError> {
        check_index(&self.reference, z)?;
        match *z {
            EpistemicIndex::Particle(k) => Ok(k),
            _ => unreachable!("check_index enforces particle ids"),
        }
    }

    fn prior_of(&self, params: &ParamStore, x: &[f64], k: usize) -> Result<Vec<f64>, EnnError> {
        let (p, _) = mlp_forward(&self.prior_arch, params.slice(self.prior_ranges[k].clone()), x)?;
        Ok(p)
    }
}

impl Enn for EnsemblePlus {
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
        for (k, range) in self.ranges.iter().enumerate() {
            params
                .slice_mut(range.clone())
                .copy_from_slice(&self.arch.init_glorot(key.child(k as u64)));
        }
        // Prior streams are disjoint from particle streams by tag offset.
        for (k, range) in self.prior_ranges.iter().enumerate() {
            params
                .slice_mut(range.clone())
                .copy_from_slice(&self.prior_arch.init_glorot(key.child(1_000_000 + k as u64)));
        }
        params.view_mut(self.norm_scale).fill(1.0);
        params
    }

    fn forward(
        &self,
        params: &ParamStore,
        x: &[f64],
        z: &EpistemicIndex,
    ) -> Result<Vec<f64>, EnnError> {
        let k = self.particle_of(z)?;
        let (mut y, _) = mlp_forward(&self.arch, params.slice(self.ranges[k].clone()), x)?;
        let prior = self.prior_of(params, x, k)?;
        add_scaled_prior(
            &mut y,
            &prior,
            params.view(self.norm_shift),
            params.view(self.norm_scale),
            self.prior_scale,
        );
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
        // Prior networks are frozen; only the particle path gets gradient.
        let k = self.particle_of(z)?;
        let p = params.slice(self.ranges[k].clone());
        let (_, tape) = mlp_forward(&self.arch, p, x)?;
        mlp_backward(&self.arch, p, &tape, upstream, grad.slice_mut(self.ranges[k].clone()))?;
        Ok(())
    }

    fn descriptor(&self) -> ModelSpec {
        ModelSpec::EnsemblePlus {
            arch: self.arch.clone(),
            prior_arch: self.prior_arch.clone(),
            particles: self.particles,
            prior_scale: self.prior_scale,
        }
    }

    fn raw_prior_output(
        &self,
        params: &ParamStore,
        x: &[f64],
        z: &EpistemicIndex,
    ) -> Result<Option<Vec<f64>>, EnnError> {
        let k = self.particle_of(z)?;
        Ok(Some(self.prior_of(params, x, k)?))
    }

    fn prior_norm_views(&self) -> Option<(ViewId, ViewId)> {
        Some((self.norm_shift, self.norm_scale))
    }

    fn flops_per_forward(&self) -> u64 {
        arch_flops(&self.arch) + arch_flops(&self.prior_arch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Activation;

    fn softmax(v: &[f64]) -> Vec<f64> {
        let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|x| x / s).collect()
    }

    #[test]
    fn zero_particles_is_an_error() {
        assert!(Ensemble::new(MlpArch::new(2, vec![3], 2), 0).is_err());
    }

    #[test]
    fn single_particle_is_index_independent() {
        let m = Ensemble::new(MlpArch::new(2, vec![3], 2), 1).unwrap();
        let p = m.init_params(StreamKey::new(3));
        let y = m
            .forward(&p, &[1.0, -1.0], &EpistemicIndex::Particle(0))
            .unwrap();
        assert_eq!(y.len(), 2);
        assert!(m
            .forward(&p, &[1.0, -1.0], &EpistemicIndex::Particle(1))
            .is_err());
    }

    #[test]
    fn particles_match_independent_mlp_forwards() {
        let arch = MlpArch::new(3, vec![4], 2);
        let m = Ensemble::new(arch.clone(), 3).unwrap();
        let key = StreamKey::new(17);
        let p = m.init_params(key);
        let x = [0.2, -0.7, 1.1];
        for k in 0..3 {
            let standalone = arch.init_glorot(key.child(k as u64));
            let (want, _) = mlp_forward(&arch, &standalone, &x).unwrap();
            let got = m.forward(&p, &x, &EpistemicIndex::Particle(k)).unwrap();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn average_prediction_matches_direct_summation() {
        let arch = MlpArch::new(2, vec![5], 3);
        let m = Ensemble::new(arch, 4).unwrap();
        let p = m.init_params(StreamKey::new(8));
        let x = [0.9, -0.3];
        // Direct summation oracle: (1/K) sum_k softmax(f_k(x)).
        let mut want = vec![0.0; 3];
        for k in 0..4 {
            let y = m.forward(&p, &x, &EpistemicIndex::Particle(k)).unwrap();
            for (w, s) in want.iter_mut().zip(softmax(&y)) {
                *w += s / 4.0;
            }
        }
        let zs: Vec<EpistemicIndex> = (0..4).map(EpistemicIndex::Particle).collect();
        let outs = m.forward_many(&p, &x, &zs).unwrap();
        let mut got = vec![0.0; 3];
        for y in &outs {
            for (g, s) in got.iter_mut().zip(softmax(y)) {
                *g += s / 4.0;
            }
        }
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_prior_scale_matches_plain_ensemble() {
        let arch = MlpArch::new(2, vec![4], 2);
        let prior = MlpArch {
            input_dim: 2,
            hidden: vec![3],
            output_dim: 2,
            activation: Activation::Relu,
        };
        let plain = Ensemble::new(arch.clone(), 2).unwrap();
        let plus = EnsemblePlus::new(arch, prior, 2, 0.0).unwrap();
        let key = StreamKey::new(12);
        let pp = plain.init_params(key);
        let pq = plus.init_params(key);
        let x = [0.5, 0.5];
        for k in 0..2 {
            let a = plain.forward(&pp, &x, &EpistemicIndex::Particle(k)).unwrap();
            let b = plus.forward(&pq, &x, &EpistemicIndex::Particle(k)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn zeroed_learnable_weights_leave_pure_prior() {
        let arch = MlpArch::new(2, vec![3], 2);
        let prior_arch = MlpArch::new(2, vec![3], 2);
        let m = EnsemblePlus::new(arch, prior_arch, 2, 0.7).unwrap();
        let mut p = m.init_params(StreamKey::new(5));
        for range in m.ranges.clone() {
            p.slice_mut(range).fill(0.0);
        }
        let x = [1.0, 2.0];
        for k in 0..2 {
            let y = m.forward(&p, &x, &EpistemicIndex::Particle(k)).unwrap();
            let raw = m
                .raw_prior_output(&p, &x, &EpistemicIndex::Particle(k))
                .unwrap()
                .unwrap();
            for (a, b) in y.iter().zip(&raw) {
                assert!((a - 0.7 * b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn prior_parameters_get_zero_gradient() {
        let arch = MlpArch::new(2, vec![3], 2);
        let prior_arch = MlpArch::new(2, vec![3], 2);
        let m = EnsemblePlus::new(arch, prior_arch, 2, 1.0).unwrap();
        let p = m.init_params(StreamKey::new(5));
        let mut grad = p.zeros_like();
        m.backward(
            &p,
            &[1.0, -1.0],
            &EpistemicIndex::Particle(0),
            &[1.0, 1.0],
            &mut grad,
        )
        .unwrap();
        for range in m.prior_ranges.clone() {
            assert!(grad.slice(range).iter().all(|&g| g == 0.0));
        }
        assert!(grad.slice(m.ranges[0].clone()).iter().any(|&g| g != 0.0));
        assert!(grad.slice(m.ranges[1].clone()).iter().all(|&g| g == 0.0));
    }
}
