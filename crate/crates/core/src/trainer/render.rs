use super::model::Model;
use super::step::central_rays;
use crate::blur::blur_variance_map;
use crate::blur::gamma_encode;
use crate::error::{contract, Result};
use crate::geometry::{bin_edges, importance_sample, merge_depths, stratified_samples, Camera};
use crate::metrics::MetricReport;
use crate::raster::Image;
use crate::renderer::RayBatch;
use crate::scenes::SceneDataset;

const CHUNK: usize = 256;

/// Renders the sharp field through the central ray of every pixel:
/// coarse densities, importance resampling, then the fine renderer.
pub fn render_deblurred(model: &Model<f32>, camera: &Camera<f64>) -> Result<Image> {
    let cam: Camera<f32> = camera.cast();
    let cams = [cam];
    let (w, h) = (camera.width, camera.height);
    let (near, far) = model.near_far();
    let nc = model.arch.n_coarse;
    let edges = bin_edges(near, far, nc);
    let coarse_t = stratified_samples::<f32, rand_chacha::ChaCha8Rng>(near, far, nc, None)?;
    let pixels: Vec<[f32; 2]> = (0..w * h)
        .map(|i| [(i % w) as f32 + 0.5, (i / w) as f32 + 0.5])
        .collect();
    let mut data = Vec::with_capacity(w * h * 3);
    for chunk in pixels.chunks(CHUNK) {
        let views = vec![0; chunk.len()];
        let k = central_rays(&cams, &views, chunk)?;
        let depths = vec![coarse_t.clone(); chunk.len()];
        let rays = RayBatch::new(k.origins.clone(), k.dirs.clone(), &depths, far);
        let (co, _) = model.crr.forward(&model.grid_coarse, &rays)?;
        let merged: Vec<Vec<f32>> = (0..chunk.len())
            .map(|r| {
                let fine = importance_sample::<f32, rand_chacha::ChaCha8Rng>(
                    &co.weights[r * nc..(r + 1) * nc],
                    &edges,
                    model.arch.n_fine,
                    None,
                );
                merge_depths(&coarse_t, &fine, near, far)
            })
            .collect();
        let frays = RayBatch::new(k.origins, k.dirs, &merged, far);
        let (fo, _) = model.fvr.forward(&model.grid_coarse, &model.grid_fine, &frays)?;
        for v in fo.color {
            let v = if model.arch.gamma_correct { gamma_encode(v) } else { v };
            data.push(v.clamp(0.0, 1.0));
        }
    }
    Image::from_data(w, h, data)
}

/// Per-pixel variance of the stage-two origin offsets for one training
/// view, row-major.
pub fn variance_map(model: &Model<f32>, cameras: &[Camera<f64>], view: usize) -> Result<Vec<f32>> {
    if view >= cameras.len() || view >= model.arch.views {
        return Err(contract(format!(
            "view {view} out of range ({} training views)",
            cameras.len().min(model.arch.views)
        )));
    }
    let cams: Vec<Camera<f32>> = cameras.iter().map(|c| c.cast()).collect();
    if !model.arch.blur_model {
        let c = &cams[view];
        return Ok(vec![0.0; c.width * c.height]);
    }
    let (near, far) = model.near_far();
    let coarse_t =
        stratified_samples::<f32, rand_chacha::ChaCha8Rng>(near, far, model.arch.n_coarse, None)?;
    blur_variance_map(&model.blur, &model.pbe, &cams, view, |k| {
        let depths = vec![coarse_t.clone(); k.num_rays()];
        let rays = RayBatch::new(k.origins.clone(), k.dirs.clone(), &depths, far);
        Ok(model.crr.forward(&model.grid_coarse, &rays)?.0.f_ray)
    })
}

/// Renders every held-out view and scores it against its sharp reference.
pub fn evaluate_heldout(model: &Model<f32>, ds: &SceneDataset) -> Result<MetricReport> {
    let mut rendered = Vec::new();
    for v in ds.heldout() {
        model.geometry.check_camera(&v.camera)?;
        rendered.push((v, render_deblurred(model, &v.camera)?));
    }
    if rendered.is_empty() {
        return Err(contract("dataset has no held-out views"));
    }
    MetricReport::evaluate(rendered.iter().map(|(v, img)| (v.name.as_str(), img, &v.image)))
}
