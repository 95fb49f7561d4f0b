use crate::geometry::{Aabb, Camera};
use crate::raster::Image;
use crate::vec3::Vec3;

type V3 = Vec3<f64>;

#[derive(Debug, Clone, PartialEq)]
pub enum Albedo {
    Solid([f64; 3]),
    /// Alternating squares of side `scale` on the x/z coordinates.
    Checker { a: [f64; 3], b: [f64; 3], scale: f64 },
    /// `a` where the world coordinate `axis` is below `threshold`, else `b`.
    Step {
        axis: usize,
        threshold: f64,
        a: [f64; 3],
        b: [f64; 3],
    },
}

impl Albedo {
    pub fn at(&self, p: &V3) -> [f64; 3] {
        match self {
            Albedo::Solid(c) => *c,
            Albedo::Checker { a, b, scale } => {
                let i = (p.x() / scale).floor() as i64 + (p.z() / scale).floor() as i64;
                if i.rem_euclid(2) == 0 {
                    *a
                } else {
                    *b
                }
            }
            Albedo::Step {
                axis,
                threshold,
                a,
                b,
            } => {
                if p[*axis] < *threshold {
                    *a
                } else {
                    *b
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Sphere { center: V3, radius: f64 },
    Box { min: V3, max: V3 },
    /// Infinite plane, clipped to the scene bounds when traced.
    Plane { point: V3, normal: V3 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub albedo: Albedo,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shading {
    Flat,
    Lambert { light: V3, ambient: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticScene {
    pub primitives: Vec<Primitive>,
    pub background: [f64; 3],
    pub bounds: Aabb<f64>,
    pub shading: Shading,
}

/// Nearest surface hit along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: V3,
    pub normal: V3,
    pub primitive: usize,
}

const T_MIN: f64 = 1e-9;

fn hit_sphere(o: &V3, d: &V3, c: &V3, r: f64) -> Option<(f64, V3)> {
    let oc = *o - *c;
    let b = oc.dot(d);
    let cc = oc.dot(&oc) - r * r;
    let a = d.dot(d);
    let disc = b * b - a * cc;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let t = [(-b - s) / a, (-b + s) / a]
        .into_iter()
        .find(|t| *t > T_MIN)?;
    let p = *o + *d * t;
    Some((t, (p - *c) * (1.0 / r)))
}

fn hit_box(o: &V3, d: &V3, min: &V3, max: &V3) -> Option<(f64, V3)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    let mut n0 = V3::zero();
    for k in 0..3 {
        if d[k].abs() < 1e-300 {
            if o[k] < min[k] || o[k] > max[k] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[k];
        let (mut a, mut b) = ((min[k] - o[k]) * inv, (max[k] - o[k]) * inv);
        let mut sign = -1.0;
        if a > b {
            std::mem::swap(&mut a, &mut b);
            sign = 1.0;
        }
        if a > t0 {
            t0 = a;
            n0 = V3::zero();
            n0[k] = sign;
        }
        t1 = t1.min(b);
    }
    if t0 > t1 || t0 <= T_MIN {
        return None;
    }
    Some((t0, n0))
}

fn hit_plane(o: &V3, d: &V3, p0: &V3, n: &V3, bounds: &Aabb<f64>) -> Option<(f64, V3)> {
    let denom = d.dot(n);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = (*p0 - *o).dot(n) / denom;
    if t <= T_MIN {
        return None;
    }
    let p = *o + *d * t;
    let eps = 1e-9;
    for k in 0..3 {
        if p[k] < bounds.min[k] - eps || p[k] > bounds.max[k] + eps {
            return None;
        }
    }
    let normal = if denom < 0.0 { *n } else { -*n };
    Some((t, normal))
}

impl AnalyticScene {
    pub fn empty(bounds: Aabb<f64>, background: [f64; 3]) -> Self {
        Self {
            primitives: Vec::new(),
            background,
            bounds,
            shading: Shading::Flat,
        }
    }

    pub fn intersect(&self, o: &V3, d: &V3) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for (i, prim) in self.primitives.iter().enumerate() {
            let hit = match &prim.shape {
                Shape::Sphere { center, radius } => hit_sphere(o, d, center, *radius),
                Shape::Box { min, max } => hit_box(o, d, min, max),
                Shape::Plane { point, normal } => hit_plane(o, d, point, normal, &self.bounds),
            };
            if let Some((t, normal)) = hit {
                if best.is_none_or(|b| t < b.t) {
                    best = Some(Hit {
                        t,
                        point: *o + *d * t,
                        normal,
                        primitive: i,
                    });
                }
            }
        }
        best
    }

    /// Linear radiance along a ray.
    pub fn radiance(&self, o: &V3, d: &V3) -> [f64; 3] {
        let Some(hit) = self.intersect(o, d) else {
            return self.background;
        };
        let albedo = self.primitives[hit.primitive].albedo.at(&hit.point);
        let s = match &self.shading {
            Shading::Flat => 1.0,
            Shading::Lambert { light, ambient } => {
                ambient + (1.0 - ambient) * hit.normal.dot(light).max(0.0)
            }
        };
        [albedo[0] * s, albedo[1] * s, albedo[2] * s]
    }
}

/// Pinhole render of linear radiance through pixel centres.
pub fn trace_ground_truth(scene: &AnalyticScene, camera: &Camera<f64>) -> Image {
    let mut img = Image::new(camera.width, camera.height);
    for y in 0..camera.height {
        for x in 0..camera.width {
            let (o, d) = camera.generate_ray([x as f64 + 0.5, y as f64 + 0.5]);
            let c = scene.radiance(&o, &d);
            img.set(x, y, [c[0] as f32, c[1] as f32, c[2] as f32]);
        }
    }
    img
}

/// Depth along the ray through the centre pixel, if anything is hit.
pub fn center_hit_depth(scene: &AnalyticScene, camera: &Camera<f64>) -> Option<f64> {
    let (o, d) = camera.generate_ray([camera.cx, camera.cy]);
    scene.intersect(&o, &d).map(|h| h.t)
}
