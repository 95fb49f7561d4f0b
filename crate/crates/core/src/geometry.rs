//! Pinhole cameras, ray generation and depth sampling along rays.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::real::Real;
use crate::vec3::{Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb<F> {
    pub min: Vec3<F>,
    pub max: Vec3<F>,
}

impl<F: Real> Aabb<F> {
    pub fn new(min: Vec3<F>, max: Vec3<F>) -> Self {
        Self { min, max }
    }

    /// Largest side length.
    pub fn extent(&self) -> F {
        let d = self.max - self.min;
        d[0].max(d[1]).max(d[2])
    }

    pub fn contains(&self, p: &Vec3<F>) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    /// Maps `p` to `[-1, 1]^3` (not clamped).
    #[inline]
    pub fn normalize(&self, p: &Vec3<F>) -> Vec3<F> {
        let two = F::lit(2.0);
        Vec3(std::array::from_fn(|a| {
            two * (p[a] - self.min[a]) / (self.max[a] - self.min[a]) - F::one()
        }))
    }

    /// d(normalize(p))/dp per axis.
    #[inline]
    pub fn normalize_scale(&self) -> Vec3<F> {
        Vec3(std::array::from_fn(|a| {
            F::lit(2.0) / (self.max[a] - self.min[a])
        }))
    }

    pub fn cast<G: Real>(&self) -> Aabb<G> {
        Aabb {
            min: self.min.cast(),
            max: self.max.cast(),
        }
    }
}

/// Pinhole camera. Camera-space rays are `[(px-cx)/f, (py-cy)/f, -1]`
/// rotated into the world by `rotation` (world-from-camera).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera<F> {
    pub rotation: Mat3<F>,
    pub origin: Vec3<F>,
    pub focal: F,
    pub cx: F,
    pub cy: F,
    pub width: usize,
    pub height: usize,
}

impl<F: Real> Camera<F> {
    /// Camera at `eye` looking at `target`; image rows run opposite to `up`.
    pub fn look_at(
        eye: Vec3<F>,
        target: Vec3<F>,
        up: Vec3<F>,
        focal: F,
        width: usize,
        height: usize,
    ) -> Self {
        let forward = (target - eye).normalized();
        let back = -forward;
        let up_orth = (up - forward * up.dot(&forward)).normalized();
        let down = -up_orth;
        let side = down.cross(&back);
        Self {
            rotation: Mat3::from_columns(side, down, back),
            origin: eye,
            focal,
            cx: F::lit(width as f64 * 0.5),
            cy: F::lit(height as f64 * 0.5),
            width,
            height,
        }
    }

    /// Unit-length world direction through (fractional) pixel coordinates.
    pub fn direction(&self, pixel: [F; 2]) -> Vec3<F> {
        self.rotation.mul_vec(&self.camera_vector(pixel)).normalized()
    }

    #[inline]
    fn camera_vector(&self, pixel: [F; 2]) -> Vec3<F> {
        Vec3::new(
            (pixel[0] - self.cx) / self.focal,
            (pixel[1] - self.cy) / self.focal,
            -F::one(),
        )
    }

    pub fn generate_ray(&self, pixel: [F; 2]) -> (Vec3<F>, Vec3<F>) {
        (self.origin, self.direction(pixel))
    }

    /// Pulls a gradient on the direction back to the pixel coordinates.
    pub fn direction_backward(&self, pixel: [F; 2], grad_dir: &Vec3<F>) -> [F; 2] {
        let n = self.rotation.mul_vec(&self.camera_vector(pixel));
        let len = n.norm();
        let d = n * (F::one() / len);
        let gn = (*grad_dir - d * d.dot(grad_dir)) * (F::one() / len);
        let gv = self.rotation.transpose_mul_vec(&gn);
        [gv[0] / self.focal, gv[1] / self.focal]
    }

    /// Pixel coordinates of a world point, or `None` behind the camera.
    pub fn project(&self, p: &Vec3<F>) -> Option<[F; 2]> {
        let c = self.rotation.transpose_mul_vec(&(*p - self.origin));
        if c[2] >= F::zero() {
            return None;
        }
        let depth = -c[2];
        Some([
            self.cx + self.focal * c[0] / depth,
            self.cy + self.focal * c[1] / depth,
        ])
    }

    /// Forward axis in world space.
    pub fn forward(&self) -> Vec3<F> {
        let m = &self.rotation.0;
        Vec3::new(-m[0][2], -m[1][2], -m[2][2])
    }

    pub fn cast<G: Real>(&self) -> Camera<G> {
        Camera {
            rotation: self.rotation.cast(),
            origin: self.origin.cast(),
            focal: G::lit(self.focal.as_f64()),
            cx: G::lit(self.cx.as_f64()),
            cy: G::lit(self.cy.as_f64()),
            width: self.width,
            height: self.height,
        }
    }
}

pub fn generate_ray<F: Real>(camera: &Camera<F>, pixel: [F; 2]) -> (Vec3<F>, Vec3<F>) {
    camera.generate_ray(pixel)
}

/// Depths, intervals and points along one ray.
#[derive(Debug, Clone, PartialEq)]
pub struct RaySamples<F> {
    pub t: Vec<F>,
    pub delta: Vec<F>,
    pub points: Vec<Vec3<F>>,
}

impl<F: Real> RaySamples<F> {
    pub fn new(origin: Vec3<F>, dir: Vec3<F>, t: Vec<F>, far: F) -> Self {
        let delta = deltas(&t, far);
        let points = t.iter().map(|&ti| origin + dir * ti).collect();
        Self { t, delta, points }
    }
}

/// `delta_i = t_{i+1} - t_i`, last one `far - t_N` (kept positive).
pub fn deltas<F: Real>(t: &[F], far: F) -> Vec<F> {
    let n = t.len();
    let mut d = Vec::with_capacity(n);
    for i in 0..n {
        let next = if i + 1 < n { t[i + 1] } else { far };
        d.push((next - t[i]).max(F::lit(1e-9)));
    }
    d
}

/// Edges of `n` equal bins partitioning `[near, far]`.
pub fn bin_edges<F: Real>(near: F, far: F, n: usize) -> Vec<F> {
    let step = (far - near) / F::lit(n as f64);
    (0..=n)
        .map(|i| {
            if i == n {
                far
            } else {
                near + step * F::lit(i as f64)
            }
        })
        .collect()
}

/// One depth per equal bin of `[near, far]`: the midpoint, or a uniform
/// draw inside the bin when `rng` is given.
pub fn stratified_samples<F: Real, R: Rng + ?Sized>(
    near: F,
    far: F,
    n: usize,
    rng: Option<&mut R>,
) -> Result<Vec<F>> {
    if !(near >= F::zero() && near < far) || n == 0 {
        return Err(contract(format!(
            "stratified sampling needs 0 <= near < far and n >= 1 (got near={near}, far={far}, n={n})"
        )));
    }
    let step = (far - near) / F::lit(n as f64);
    let t = match rng {
        None => (0..n)
            .map(|i| near + step * (F::lit(i as f64) + F::lit(0.5)))
            .collect(),
        Some(rng) => (0..n)
            .map(|i| {
                let u: f64 = rng.gen();
                let t = near + step * (F::lit(i as f64) + F::lit(u));
                // keep strictly inside the half-open bin
                let hi = near + step * F::lit((i + 1) as f64);
                if t >= hi {
                    near + step * F::lit(i as f64)
                } else {
                    t
                }
            })
            .collect(),
    };
    Ok(t)
}

/// Inverts the piecewise-constant CDF defined by `weights` over the bins
/// delimited by `edges` at `n` stratified variates `(k + ξ_k)/n`; `ξ = 0.5`
/// when no rng is given. All-zero weights fall back to a flat PDF.
/// Output depths are sorted.
pub fn importance_sample<F: Real, R: Rng + ?Sized>(
    weights: &[F],
    edges: &[F],
    n: usize,
    mut rng: Option<&mut R>,
) -> Vec<F> {
    assert_eq!(edges.len(), weights.len() + 1, "need one more edge than bins");
    let bins = weights.len();
    let total: F = weights.iter().map(|w| w.max(F::zero())).sum();
    let mut cdf = Vec::with_capacity(bins + 1);
    cdf.push(F::zero());
    if total > F::zero() && total.is_finite() {
        let mut acc = F::zero();
        for w in weights {
            acc += w.max(F::zero()) / total;
            cdf.push(acc);
        }
    } else {
        for i in 1..=bins {
            cdf.push(F::lit(i as f64 / bins as f64));
        }
    }
    cdf[bins] = F::one();

    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let xi = match rng.as_deref_mut() {
            Some(r) => r.gen::<f64>(),
            None => 0.5,
        };
        let u = F::lit((k as f64 + xi) / n as f64);
        out.push(invert_cdf(&cdf, edges, u));
    }
    out
}

/// Depth at which the CDF reaches `u`, linear inside the bin.
pub fn invert_cdf<F: Real>(cdf: &[F], edges: &[F], u: F) -> F {
    let bins = cdf.len() - 1;
    let i = cdf.partition_point(|c| *c <= u).saturating_sub(1).min(bins - 1);
    let mass = cdf[i + 1] - cdf[i];
    let frac = if mass > F::zero() {
        ((u - cdf[i]) / mass).max(F::zero()).min(F::one())
    } else {
        F::lit(0.5)
    };
    edges[i] + frac * (edges[i + 1] - edges[i])
}

/// Sorted union of two depth lists, nudging ties so the result is
/// strictly increasing.
pub fn merge_depths<F: Real>(coarse: &[F], fine: &[F], near: F, far: F) -> Vec<F> {
    let mut t: Vec<F> = coarse.iter().chain(fine).copied().collect();
    t.sort_by(|a, b| a.partial_cmp(b).expect("finite depths"));
    let nudge = F::lit(1e-6) * (far - near);
    for i in 1..t.len() {
        if t[i] <= t[i - 1] {
            t[i] = t[i - 1] + nudge;
        }
    }
    t
}
