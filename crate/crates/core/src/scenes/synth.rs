use super::trace::{trace_ground_truth, AnalyticScene};
use crate::geometry::Camera;
use crate::raster::Image;
use crate::vec3::Vec3;

/// Average of pinhole renders over a list of camera poses.
pub fn synthesize_motion_blur(scene: &AnalyticScene, trajectory: &[Camera<f64>]) -> Image {
    assert!(!trajectory.is_empty(), "a trajectory needs at least one pose");
    let first = &trajectory[0];
    let mut acc = vec![0.0f64; first.width * first.height * 3];
    for cam in trajectory {
        let img = trace_ground_truth(scene, cam);
        for (a, v) in acc.iter_mut().zip(&img.data) {
            *a += f64::from(*v);
        }
    }
    let inv = 1.0 / trajectory.len() as f64;
    Image {
        width: first.width,
        height: first.height,
        data: acc.into_iter().map(|v| (v * inv) as f32).collect(),
    }
}

/// `m` poses translating the camera origin linearly through `shift`,
/// centred on the original pose.
pub fn linear_trajectory(camera: &Camera<f64>, shift: Vec3<f64>, m: usize) -> Vec<Camera<f64>> {
    (0..m)
        .map(|k| {
            let s = if m == 1 {
                0.0
            } else {
                k as f64 / (m - 1) as f64 - 0.5
            };
            let mut c = *camera;
            c.origin = camera.origin + shift * s;
            c
        })
        .collect()
}

/// Deterministic points covering the unit disc (golden-angle spiral).
pub fn lens_pattern(n: usize) -> Vec<[f64; 2]> {
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    (0..n)
        .map(|k| {
            let r = ((k as f64 + 0.5) / n as f64).sqrt();
            let th = k as f64 * golden;
            [r * th.cos(), r * th.sin()]
        })
        .collect()
}

/// Thin-lens render: per pixel, rays from points on an aperture disc of
/// radius `aperture` through the central ray's point at axial depth
/// `focus_depth`.
pub fn synthesize_defocus_blur(
    scene: &AnalyticScene,
    camera: &Camera<f64>,
    aperture: f64,
    focus_depth: f64,
    lens_samples: usize,
) -> Image {
    assert!(focus_depth > 0.0, "focus depth must be positive");
    let lens = lens_pattern(lens_samples.max(1));
    let m = &camera.rotation.0;
    let side = Vec3::new(m[0][0], m[1][0], m[2][0]);
    let down = Vec3::new(m[0][1], m[1][1], m[2][1]);
    let forward = camera.forward();
    let mut img = Image::new(camera.width, camera.height);
    for y in 0..camera.height {
        for x in 0..camera.width {
            let d = camera.direction([x as f64 + 0.5, y as f64 + 0.5]);
            let focus = camera.origin + d * (focus_depth / d.dot(&forward));
            let mut acc = [0.0f64; 3];
            for l in &lens {
                let o = camera.origin + side * (aperture * l[0]) + down * (aperture * l[1]);
                let c = scene.radiance(&o, &(focus - o).normalized());
                for k in 0..3 {
                    acc[k] += c[k];
                }
            }
            let inv = 1.0 / lens.len() as f64;
            img.set(
                x,
                y,
                [
                    (acc[0] * inv) as f32,
                    (acc[1] * inv) as f32,
                    (acc[2] * inv) as f32,
                ],
            );
        }
    }
    img
}

/// Axial depth of the first surface through each pixel centre, row-major;
/// `None` where the ray escapes.
pub fn depth_map(scene: &AnalyticScene, camera: &Camera<f64>) -> Vec<Option<f64>> {
    let forward = camera.forward();
    let mut out = Vec::with_capacity(camera.width * camera.height);
    for y in 0..camera.height {
        for x in 0..camera.width {
            let (o, d) = camera.generate_ray([x as f64 + 0.5, y as f64 + 0.5]);
            out.push(scene.intersect(&o, &d).map(|h| h.t * d.dot(&forward)));
        }
    }
    out
}

/// Per-pixel circle-of-confusion radius in pixels.
pub fn coc_map(
    scene: &AnalyticScene,
    camera: &Camera<f64>,
    aperture: f64,
    focus_depth: f64,
) -> Vec<Option<f64>> {
    depth_map(scene, camera)
        .into_iter()
        .map(|z| z.map(|z| coc_radius(camera.focal, aperture, focus_depth, z)))
        .collect()
}

/// Circle-of-confusion radius in pixels for a point at axial depth `z`.
pub fn coc_radius(focal: f64, aperture: f64, focus_depth: f64, z: f64) -> f64 {
    focal * aperture * (z - focus_depth).abs() / (focus_depth * z)
}
