//! Axis-decomposed explicit feature volumes.
//!
//! Each axis carries a `(channels, resolution)` factor. A query linearly
//! interpolates every factor at the point's 1-D coordinate along that axis
//! and concatenates the three results, so the output has `Cx + Cy + Cz`
//! entries. Points outside the bounds are clamped to the box.

use rand::Rng;

use crate::geometry::Aabb;
use crate::real::Real;
use crate::tensor::{ParamTensor, Parameters};
use crate::vec3::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid<F> {
    pub resolution: [usize; 3],
    pub channels: [usize; 3],
    /// Factor `a` has shape `(channels[a], resolution[a])`.
    pub factors: [ParamTensor<F>; 3],
    pub bounds: Aabb<F>,
}

#[derive(Debug, Clone, Copy)]
struct AxisCoord<F> {
    i0: usize,
    i1: usize,
    frac: F,
    /// d(pos)/d(world coordinate); zero when clamped.
    dpos: F,
}

const AXIS_NAMES: [&str; 3] = ["x", "y", "z"];

impl<F: Real> FeatureGrid<F> {
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        resolution: [usize; 3],
        channels: [usize; 3],
        bounds: Aabb<F>,
        init_bound: f64,
        rng: &mut R,
    ) -> Self {
        assert!(resolution.iter().all(|r| *r >= 1));
        let factors = std::array::from_fn(|a| {
            ParamTensor::uniform(
                format!("{name}.{}", AXIS_NAMES[a]),
                &[channels[a], resolution[a]],
                init_bound,
                rng,
            )
        });
        Self {
            resolution,
            channels,
            factors,
            bounds,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.channels.iter().sum()
    }

    fn axis_coord(&self, a: usize, x: F) -> AxisCoord<F> {
        let res = self.resolution[a];
        if res == 1 {
            return AxisCoord {
                i0: 0,
                i1: 0,
                frac: F::zero(),
                dpos: F::zero(),
            };
        }
        let (lo, hi) = (self.bounds.min[a], self.bounds.max[a]);
        let scale = F::lit((res - 1) as f64) / (hi - lo);
        let (xc, dpos) = if x < lo {
            (lo, F::zero())
        } else if x > hi {
            (hi, F::zero())
        } else {
            (x, scale)
        };
        let pos = (xc - lo) * scale;
        let i0 = pos.floor().to_usize().unwrap_or(0).min(res - 2);
        AxisCoord {
            i0,
            i1: i0 + 1,
            frac: pos - F::lit(i0 as f64),
            dpos,
        }
    }

    /// Writes the concatenated feature vector for `p` into `out`.
    pub fn query_into(&self, p: &Vec3<F>, out: &mut [F]) {
        let mut o = 0;
        for a in 0..3 {
            let c = self.axis_coord(a, p[a]);
            let res = self.resolution[a];
            let f = &self.factors[a].values;
            for ch in 0..self.channels[a] {
                let row = ch * res;
                out[o] = f[row + c.i0] * (F::one() - c.frac) + f[row + c.i1] * c.frac;
                o += 1;
            }
        }
    }

    pub fn query(&self, p: &Vec3<F>) -> Vec<F> {
        let mut out = vec![F::zero(); self.feature_dim()];
        self.query_into(p, &mut out);
        out
    }

    /// Adds factor gradients for one query and returns `∂L/∂p`.
    pub fn backward_point(&mut self, p: &Vec3<F>, grad_out: &[F]) -> Vec3<F> {
        let mut gp = Vec3::zero();
        let mut o = 0;
        for a in 0..3 {
            let c = self.axis_coord(a, p[a]);
            let res = self.resolution[a];
            let factor = &mut self.factors[a];
            let mut gpos = F::zero();
            for ch in 0..self.channels[a] {
                let row = ch * res;
                let g = grad_out[o];
                factor.grad[row + c.i0] += g * (F::one() - c.frac);
                factor.grad[row + c.i1] += g * c.frac;
                gpos += g * (factor.values[row + c.i1] - factor.values[row + c.i0]);
                o += 1;
            }
            gp[a] = gpos * c.dpos;
        }
        gp
    }

    /// Sum over axes of the mean squared difference between neighbouring
    /// entries along each factor's resolution dimension.
    pub fn tv_loss(&self) -> F {
        let mut total = F::zero();
        for a in 0..3 {
            let res = self.resolution[a];
            if res < 2 || self.channels[a] == 0 {
                continue;
            }
            let f = &self.factors[a].values;
            let mut s = F::zero();
            for ch in 0..self.channels[a] {
                let row = &f[ch * res..(ch + 1) * res];
                for w in row.windows(2) {
                    let d = w[1] - w[0];
                    s += d * d;
                }
            }
            total += s / F::lit((self.channels[a] * (res - 1)) as f64);
        }
        total
    }

    /// Adds `scale · ∂tv/∂factors` into the factor gradients.
    pub fn tv_backward(&mut self, scale: F) {
        for a in 0..3 {
            let res = self.resolution[a];
            if res < 2 || self.channels[a] == 0 {
                continue;
            }
            let n = F::lit((self.channels[a] * (res - 1)) as f64);
            let k = scale * F::lit(2.0) / n;
            let factor = &mut self.factors[a];
            for ch in 0..self.channels[a] {
                let row = ch * res;
                for i in 0..res - 1 {
                    let d = factor.values[row + i + 1] - factor.values[row + i];
                    factor.grad[row + i + 1] += k * d;
                    factor.grad[row + i] -= k * d;
                }
            }
        }
    }

    pub fn cast<G: Real>(&self) -> FeatureGrid<G> {
        FeatureGrid {
            resolution: self.resolution,
            channels: self.channels,
            factors: std::array::from_fn(|a| self.factors[a].cast()),
            bounds: self.bounds.cast(),
        }
    }
}

impl<F> Parameters<F> for FeatureGrid<F> {
    fn params(&self) -> Vec<&ParamTensor<F>> {
        self.factors.iter().collect()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor<F>> {
        self.factors.iter_mut().collect()
    }
}

/// Feature vector of `grid` at `p`.
pub fn grid_query<F: Real>(grid: &FeatureGrid<F>, p: &Vec3<F>) -> Vec<F> {
    grid.query(p)
}

pub fn tv_loss<F: Real>(grid: &FeatureGrid<F>) -> F {
    grid.tv_loss()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_box() -> Aabb<f64> {
        Aabb::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 1.0))
    }

    fn grid(res: [usize; 3], ch: [usize; 3]) -> FeatureGrid<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        FeatureGrid::new("g", res, ch, unit_box(), 0.1, &mut rng)
    }

    #[test]
    fn constant_field() {
        let mut g = grid([4, 5, 6], [2, 1, 3]);
        for f in g.params_mut() {
            f.values.iter_mut().for_each(|v| *v = 0.3);
        }
        for p in [Vec3::new(0.1, 0.5, 0.9), Vec3::new(0.77, 0.0, 1.0)] {
            assert!(g.query(&p).iter().all(|v| (*v - 0.3).abs() < 1e-15));
        }
        assert_eq!(g.query(&Vec3::zero()).len(), 6);
        assert_eq!(g.tv_loss(), 0.0);
    }

    #[test]
    fn exact_at_nodes() {
        let g = grid([5, 5, 5], [2, 2, 2]);
        // node (1, 2, 4) is at (0.25, 0.5, 1.0)
        let q = g.query(&Vec3::new(0.25, 0.5, 1.0));
        let node = [1, 2, 4];
        let mut o = 0;
        for a in 0..3 {
            for ch in 0..2 {
                assert!((q[o] - g.factors[a].values[ch * 5 + node[a]]).abs() < 1e-15);
                o += 1;
            }
        }
    }

    #[test]
    fn midpoint_interpolation() {
        let mut g = grid([2, 2, 2], [1, 1, 1]);
        g.factors[0].values = vec![0.0, 1.0];
        let q = g.query(&Vec3::new(0.5, 0.2, 0.2));
        assert!((q[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn linear_between_nodes() {
        let g = grid([3, 3, 3], [2, 1, 1]);
        for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let x = 0.5 + 0.5 * t;
            let q = g.query(&Vec3::new(x, 0.3, 0.3));
            for ch in 0..2 {
                let a = g.factors[0].values[ch * 3 + 1];
                let b = g.factors[0].values[ch * 3 + 2];
                assert!((q[ch] - (a + t * (b - a))).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn out_of_bounds_clamps() {
        let g = grid([4, 4, 4], [1, 1, 1]);
        let inside = g.query(&Vec3::new(1.0, 0.0, 0.5));
        let outside = g.query(&Vec3::new(3.0, -2.0, 0.5));
        assert_eq!(inside, outside);
    }

    #[test]
    fn tv_hand_row() {
        let mut g = grid([3, 1, 1], [1, 1, 1]);
        g.factors[0].values = vec![0.0, 1.0, 0.0];
        assert!((g.tv_loss() - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn tv_homogeneous_degree_two(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = FeatureGrid::<f64>::new("h", [4, 3, 5], [2, 3, 1], unit_box(), 1.0, &mut rng);
            let mut d = g.clone();
            for f in d.params_mut() {
                f.values.iter_mut().for_each(|v| *v *= 2.0);
            }
            prop_assert!((d.tv_loss() - 4.0 * g.tv_loss()).abs() <= 1e-12 * (1.0 + g.tv_loss()));
            prop_assert!(g.tv_loss() >= 0.0);
        }

        #[test]
        fn tv_zero_iff_constant_rows(seed in 0u64..1000, constant in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut g = FeatureGrid::<f64>::new("c", [4, 4, 4], [2, 2, 2], unit_box(), 1.0, &mut rng);
            if constant {
                for f in g.params_mut() {
                    let res = f.shape[1];
                    for ch in 0..f.shape[0] {
                        let v = f.values[ch * res];
                        f.values[ch * res..(ch + 1) * res].iter_mut().for_each(|x| *x = v);
                    }
                }
            }
            prop_assert_eq!(g.tv_loss() == 0.0, constant);
        }
    }
}
