//! wasm-bindgen entry points for the static demo page in `www/`.
//!
//! Every function returns a row-major RGBA8 buffer of `res * res * 4` bytes
//! ready for `ImageData`.

use pdrf::raster::Image;
use pdrf::scenes::{
    center_hit_depth, coc_map as scene_coc_map, gamma_encode_image, synthesize_defocus_blur,
    trace_ground_truth, Preset,
};
use wasm_bindgen::prelude::*;

const MAX_RES: usize = 256;
const MAX_LENS_SAMPLES: usize = 256;
/// CoC radius (pixels) mapped to full brightness.
const COC_DISPLAY_MAX: f64 = 10.0;

fn camera(azimuth_deg: f64, res: usize) -> pdrf::geometry::Camera<f64> {
    Preset::Spheres.camera(azimuth_deg.to_radians(), res.clamp(8, MAX_RES))
}

fn to_rgba(img: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.width * img.height * 4);
    for px in img.data.chunks(3) {
        for v in px {
            out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
        out.push(255);
    }
    out
}

/// Depth of the surface under the image centre; a sensible default focus.
#[wasm_bindgen]
pub fn default_focus(azimuth_deg: f64) -> f64 {
    let scene = Preset::Spheres.scene();
    center_hit_depth(&scene, &camera(azimuth_deg, 64)).unwrap_or(4.0)
}

/// Pinhole render of the preset scene.
#[wasm_bindgen]
pub fn render_sharp(azimuth_deg: f64, res: usize) -> Vec<u8> {
    let scene = Preset::Spheres.scene();
    to_rgba(&gamma_encode_image(&trace_ground_truth(&scene, &camera(azimuth_deg, res))))
}

/// Thin-lens render focused at axial depth `focus`.
#[wasm_bindgen]
pub fn render_defocus(azimuth_deg: f64, res: usize, aperture: f64, focus: f64, samples: usize) -> Vec<u8> {
    let scene = Preset::Spheres.scene();
    let cam = camera(azimuth_deg, res);
    let img = synthesize_defocus_blur(
        &scene,
        &cam,
        aperture.max(0.0),
        focus.max(1e-3),
        samples.clamp(1, MAX_LENS_SAMPLES),
    );
    to_rgba(&gamma_encode_image(&img))
}

/// Circle-of-confusion radius per pixel as a heat map; escaped rays are blue.
#[wasm_bindgen]
pub fn coc_map(azimuth_deg: f64, res: usize, aperture: f64, focus: f64) -> Vec<u8> {
    let scene = Preset::Spheres.scene();
    let cam = camera(azimuth_deg, res);
    let mut out = Vec::with_capacity(cam.width * cam.height * 4);
    for r in scene_coc_map(&scene, &cam, aperture.max(0.0), focus.max(1e-3)) {
        match r {
            Some(r) => {
                let t = (r / COC_DISPLAY_MAX).clamp(0.0, 1.0);
                let v = (t * 255.0).round() as u8;
                out.extend_from_slice(&[v, (v as f64 * 0.6) as u8, 255 - v, 255]);
            }
            None => out.extend_from_slice(&[0, 0, 40, 255]),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffers_are_rgba_sized() {
        assert_eq!(render_sharp(30.0, 16).len(), 16 * 16 * 4);
        assert_eq!(render_defocus(30.0, 16, 0.5, 4.0, 4).len(), 16 * 16 * 4);
        assert_eq!(coc_map(30.0, 16, 0.5, 4.0).len(), 16 * 16 * 4);
    }

    #[test]
    fn zero_aperture_matches_pinhole() {
        let sharp = render_sharp(10.0, 16);
        let lens = render_defocus(10.0, 16, 0.0, 4.0, 8);
        let worst = sharp.iter().zip(&lens).map(|(a, b)| a.abs_diff(*b)).max().unwrap();
        assert!(worst <= 1, "max channel difference {worst}");
    }

    #[test]
    fn coc_is_zero_at_focus_depth() {
        let focus = default_focus(0.0);
        let buf = coc_map(0.0, 33, 0.5, focus);
        let c = (16 * 33 + 16) * 4;
        assert_eq!(buf[c], 0);
    }

    #[test]
    fn resolution_is_clamped() {
        assert_eq!(render_sharp(0.0, 1).len(), 8 * 8 * 4);
    }
}
