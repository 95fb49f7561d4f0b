//! Synthetic ground truth: an analytic ray tracer, camera-motion and
//! thin-lens blur synthesis, presets and the on-disk dataset format.

mod manifest;
mod synth;
mod trace;

pub use manifest::{read_manifest, write_manifest, MANIFEST_FILE, MANIFEST_HEADER};
pub use synth::{
    coc_map, coc_radius, depth_map, lens_pattern, linear_trajectory, synthesize_defocus_blur, synthesize_motion_blur,
};
pub use trace::{center_hit_depth, trace_ground_truth, Albedo, AnalyticScene, Hit, Primitive, Shading, Shape};

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Aabb, Camera};
use crate::raster::Image;
use crate::vec3::Vec3;

/// Per-view blur descriptor.
#[derive(Debug, Clone, PartialEq)]
pub enum BlurMeta {
    None,
    Motion { shift: Vec3<f64>, steps: usize },
    Defocus {
        aperture: f64,
        focus_depth: f64,
        lens_samples: usize,
    },
    /// Sharp evaluation view, not used for training.
    HeldOut,
}

impl BlurMeta {
    pub fn is_heldout(&self) -> bool {
        matches!(self, BlurMeta::HeldOut)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub name: String,
    pub camera: Camera<f64>,
    pub blur: BlurMeta,
    /// Gamma-encoded colours.
    pub image: Image,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneDataset {
    pub bounds: Aabb<f64>,
    pub near: f64,
    pub far: f64,
    pub views: Vec<View>,
}

impl SceneDataset {
    pub fn training(&self) -> impl Iterator<Item = &View> {
        self.views.iter().filter(|v| !v.blur.is_heldout())
    }

    pub fn heldout(&self) -> impl Iterator<Item = &View> {
        self.views.iter().filter(|v| v.blur.is_heldout())
    }

    pub fn training_cameras(&self) -> Vec<Camera<f64>> {
        self.training().map(|v| v.camera).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlurKind {
    None,
    Motion,
    Defocus,
}

impl FromStr for BlurKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(BlurKind::None),
            "motion" => Ok(BlurKind::Motion),
            "defocus" => Ok(BlurKind::Defocus),
            _ => Err(format!("unknown blur type `{s}` (expected none, motion or defocus)")),
        }
    }
}

impl fmt::Display for BlurKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlurKind::None => "none",
            BlurKind::Motion => "motion",
            BlurKind::Defocus => "defocus",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Three spheres over a checkerboard floor.
    Spheres,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "spheres" => Ok(Preset::Spheres),
            _ => Err(format!("unknown preset `{s}` (available: spheres)")),
        }
    }
}

/// Dataset generation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub preset: Preset,
    pub blur: BlurKind,
    pub views: usize,
    pub resolution: usize,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            preset: Preset::Spheres,
            blur: BlurKind::Defocus,
            views: 8,
            resolution: 64,
            seed: 0,
        }
    }
}

const CAMERA_DISTANCE: f64 = 4.0;
/// Azimuth span of the training cameras.
const CAMERA_ARC_DEG: f64 = 90.0;
const ELEVATION_DEG: f64 = 30.0;
/// Focal length per pixel of image width (68.6 px at 64 px).
const FOCAL_PER_PIXEL: f64 = 68.6 / 64.0;
pub const MOTION_STEPS: usize = 9;
pub const LENS_SAMPLES: usize = 64;
pub const DEFOCUS_APERTURE: f64 = 0.5;

impl Preset {
    pub fn scene(self) -> AnalyticScene {
        match self {
            Preset::Spheres => {
                let b = 1.5;
                AnalyticScene {
                    primitives: vec![
                        Primitive {
                            shape: Shape::Plane {
                                point: Vec3::new(0.0, -0.75, 0.0),
                                normal: Vec3::new(0.0, 1.0, 0.0),
                            },
                            albedo: Albedo::Checker {
                                a: [0.85, 0.85, 0.8],
                                b: [0.12, 0.12, 0.18],
                                scale: 0.375,
                            },
                        },
                        Primitive {
                            shape: Shape::Sphere {
                                center: Vec3::new(-0.55, -0.25, 0.45),
                                radius: 0.5,
                            },
                            albedo: Albedo::Solid([0.85, 0.2, 0.15]),
                        },
                        Primitive {
                            shape: Shape::Sphere {
                                center: Vec3::new(0.6, -0.35, -0.35),
                                radius: 0.4,
                            },
                            albedo: Albedo::Solid([0.15, 0.55, 0.85]),
                        },
                        Primitive {
                            shape: Shape::Sphere {
                                center: Vec3::new(0.05, 0.3, -0.8),
                                radius: 0.45,
                            },
                            albedo: Albedo::Solid([0.9, 0.8, 0.2]),
                        },
                    ],
                    background: [0.0; 3],
                    bounds: Aabb::new(Vec3::new(-b, -b, -b), Vec3::new(b, b, b)),
                    shading: Shading::Lambert {
                        light: Vec3::new(0.4, 1.0, 0.3).normalized(),
                        ambient: 0.3,
                    },
                }
            }
        }
    }

    fn target(self) -> Vec3<f64> {
        Vec3::new(0.0, -0.2, 0.0)
    }

    pub fn camera(self, azimuth: f64, resolution: usize) -> Camera<f64> {
        let el = ELEVATION_DEG.to_radians();
        let target = self.target();
        let eye = target
            + Vec3::new(el.cos() * azimuth.sin(), el.sin(), el.cos() * azimuth.cos()) * CAMERA_DISTANCE;
        Camera::look_at(
            eye,
            target,
            Vec3::new(0.0, 1.0, 0.0),
            FOCAL_PER_PIXEL * resolution as f64,
            resolution,
            resolution,
        )
    }

    pub fn depth_range(self) -> (f64, f64) {
        (1.0, 7.0)
    }
}

pub fn gamma_encode_image(img: &Image) -> Image {
    Image {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|v| v.max(0.0).powf(1.0 / 2.2)).collect(),
    }
}

/// Renders a full dataset: blurred, 8-bit training views spread evenly over
/// a forward-facing arc at a seeded heading, and two sharp 16-bit held-out
/// views halfway between training cameras.
pub fn make_dataset(spec: &SceneSpec) -> SceneDataset {
    assert!(spec.views >= 1 && spec.resolution >= 1);
    let scene = spec.preset.scene();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let arc = CAMERA_ARC_DEG.to_radians();
    let step = if spec.views > 1 { arc / (spec.views - 1) as f64 } else { 0.0 };
    let start = rng.gen_range(0.0..std::f64::consts::TAU) - 0.5 * arc;
    let mut views = Vec::new();
    for k in 0..spec.views {
        let cam = spec.preset.camera(start + step * k as f64, spec.resolution);
        let (linear, blur) = match spec.blur {
            BlurKind::None => (trace_ground_truth(&scene, &cam), BlurMeta::None),
            BlurKind::Motion => {
                let len = rng.gen_range(0.2..0.4);
                let ang: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let m = &cam.rotation.0;
                let side = Vec3::new(m[0][0], m[1][0], m[2][0]);
                let down = Vec3::new(m[0][1], m[1][1], m[2][1]);
                let shift = (side * ang.cos() + down * ang.sin()) * len;
                let traj = linear_trajectory(&cam, shift, MOTION_STEPS);
                (
                    synthesize_motion_blur(&scene, &traj),
                    BlurMeta::Motion {
                        shift,
                        steps: MOTION_STEPS,
                    },
                )
            }
            BlurKind::Defocus => {
                let focus = rng.gen_range(3.2..4.8);
                (
                    synthesize_defocus_blur(&scene, &cam, DEFOCUS_APERTURE, focus, LENS_SAMPLES),
                    BlurMeta::Defocus {
                        aperture: DEFOCUS_APERTURE,
                        focus_depth: focus,
                        lens_samples: LENS_SAMPLES,
                    },
                )
            }
        };
        views.push(View {
            name: format!("train_{k:03}.png"),
            camera: cam,
            blur,
            image: gamma_encode_image(&linear).quantized_8bit(),
        });
    }
    let last = spec.views.saturating_sub(1);
    for (j, k) in [last / 4, 3 * last / 4].into_iter().enumerate() {
        let cam = spec.preset.camera(start + step * (k as f64 + 0.5), spec.resolution);
        let sharp = trace_ground_truth(&scene, &cam);
        views.push(View {
            name: format!("heldout_{j:03}.png"),
            camera: cam,
            blur: BlurMeta::HeldOut,
            image: gamma_encode_image(&sharp).quantized_16bit(),
        });
    }
    let (near, far) = spec.preset.depth_range();
    SceneDataset {
        bounds: scene.bounds,
        near,
        far,
        views,
    }
}
