//! Volume rendering: the coarse ray renderer (per-sample density and
//! features, one colour decode per ray) and the fine voxel renderer
//! (per-sample density and colour on importance-resampled depths).

mod coarse;
mod fine;
mod transmittance;

pub use coarse::{render_ray_coarse, CoarseOutput, CoarseRenderer, CoarseTrace};
pub use fine::{render_ray_fine, FineOutput, FineRenderer, FineTrace};
pub use transmittance::{
    aggregate_features, composite, residual_transmittance, transmittance_backward,
    transmittance_weights,
};

use crate::geometry::deltas;
use crate::real::Real;
use crate::vec3::Vec3;

/// Rays traced together, each with the same number of depth samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RayBatch<F> {
    pub origins: Vec<Vec3<F>>,
    pub dirs: Vec<Vec3<F>>,
    pub n_samples: usize,
    /// `(rays, n_samples)` depths.
    pub t: Vec<F>,
    /// `(rays, n_samples)` intervals.
    pub delta: Vec<F>,
}

impl<F: Real> RayBatch<F> {
    /// Builds a batch from per-ray depth lists; intervals end at `far`.
    pub fn new(origins: Vec<Vec3<F>>, dirs: Vec<Vec3<F>>, depths: &[Vec<F>], far: F) -> Self {
        assert_eq!(origins.len(), dirs.len());
        assert_eq!(origins.len(), depths.len());
        let n_samples = depths.first().map_or(0, Vec::len);
        let mut t = Vec::with_capacity(depths.len() * n_samples);
        let mut delta = Vec::with_capacity(depths.len() * n_samples);
        for d in depths {
            assert_eq!(d.len(), n_samples, "ragged depth lists");
            t.extend_from_slice(d);
            delta.extend(deltas(d, far));
        }
        Self {
            origins,
            dirs,
            n_samples,
            t,
            delta,
        }
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn point(&self, ray: usize, sample: usize) -> Vec3<F> {
        self.origins[ray] + self.dirs[ray] * self.t[ray * self.n_samples + sample]
    }

    pub fn depths(&self, ray: usize) -> &[F] {
        &self.t[ray * self.n_samples..(ray + 1) * self.n_samples]
    }
}

/// Gradients with respect to each ray's origin and direction.
#[derive(Debug, Clone, PartialEq)]
pub struct RayGrads<F> {
    pub origins: Vec<Vec3<F>>,
    pub dirs: Vec<Vec3<F>>,
}

impl<F: Real> RayGrads<F> {
    pub fn zeros(n: usize) -> Self {
        Self {
            origins: vec![Vec3::zero(); n],
            dirs: vec![Vec3::zero(); n],
        }
    }
}

/// Accumulates a point gradient into its ray's origin and direction.
#[inline]
pub(crate) fn scatter_point_grad<F: Real>(
    grads: &mut RayGrads<F>,
    ray: usize,
    t: F,
    g: Vec3<F>,
) {
    grads.origins[ray] += g;
    grads.dirs[ray] += g * t;
}
