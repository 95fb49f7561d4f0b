//! One forward/backward pass over a shard of pixels.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::losses::{photometric_grad, photometric_loss};
use super::model::Model;
use crate::blur::{
    blend_backward, blend_batch, pbe_backward, pbe_stage1, pbe_stage2, KernelGrads, KernelRays,
    PbeTrace,
};
use crate::error::{contract, Result};
use crate::geometry::{bin_edges, importance_sample, merge_depths, stratified_samples, Camera};
use crate::real::Real;
use crate::renderer::{CoarseOutput, CoarseTrace, FineOutput, FineTrace, RayBatch, RayGrads};
use crate::vec3::Vec3;

/// Anchor pixels with their observed (blurry) colours.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelBatch<F> {
    pub views: Vec<usize>,
    pub pixels: Vec<[F; 2]>,
    /// `(pixels, 3)`
    pub targets: Vec<F>,
}

impl<F: Clone> PixelBatch<F> {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            views: self.views[range.clone()].to_vec(),
            pixels: self.pixels[range.clone()].to_vec(),
            targets: self.targets[range.start * 3..range.end * 3].to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepOptions<'a, F> {
    pub single_stage: bool,
    /// Weight of each pixel's squared error (1 / total batch size).
    pub loss_scale: F,
    /// Jitters coarse depths and importance variates; `None` is fully
    /// deterministic (bin midpoints, centred variates).
    pub rng_seed: Option<u64>,
    /// Replaces the merged fine depths of every final ray.
    pub fine_depths: Option<&'a [Vec<F>]>,
}

/// Scaled loss sums for one shard.
#[derive(Debug, Clone, PartialEq)]
pub struct ShardLoss<F> {
    pub crr_stage1: F,
    pub crr_stage2: F,
    pub fvr: F,
    /// Merged depths used by the fine renderer, per final ray.
    pub fine_depths: Vec<Vec<F>>,
}

impl<F: Real> ShardLoss<F> {
    pub fn crr(&self) -> F {
        self.crr_stage1 + self.crr_stage2
    }
}

struct CoarsePass<F> {
    rays: RayBatch<F>,
    out: CoarseOutput<F>,
    trace: CoarseTrace<F>,
    blend: Vec<F>,
    linear: Vec<F>,
}

struct Stage2<F> {
    kernel: KernelRays<F>,
    pbe: PbeTrace<F>,
    coarse: CoarsePass<F>,
}

struct Forward<F> {
    stage1: KernelRays<F>,
    stage1_pbe: Option<PbeTrace<F>>,
    coarse1: CoarsePass<F>,
    stage2: Option<Stage2<F>>,
    fine_rays: RayBatch<F>,
    fine: FineOutput<F>,
    fine_trace: FineTrace<F>,
    fine_blend: Vec<F>,
    fine_linear: Vec<F>,
    loss: ShardLoss<F>,
}

/// Central rays only, used when the blur model is disabled.
pub fn central_rays<F: Real>(
    cameras: &[Camera<F>],
    views: &[usize],
    pixels: &[[F; 2]],
) -> Result<KernelRays<F>> {
    let mut origins = Vec::with_capacity(pixels.len());
    let mut dirs = Vec::with_capacity(pixels.len());
    for (v, px) in views.iter().zip(pixels) {
        let cam = cameras
            .get(*v)
            .ok_or_else(|| contract(format!("view {v} out of range")))?;
        let (o, d) = cam.generate_ray(*px);
        origins.push(o);
        dirs.push(d);
    }
    Ok(KernelRays {
        p: 1,
        views: views.to_vec(),
        pixels: pixels.to_vec(),
        kernel: vec![[F::zero(); 2]; pixels.len()],
        delta_o: vec![Vec3::zero(); pixels.len()],
        weights: vec![F::one(); pixels.len()],
        origins,
        dirs,
    })
}

fn coarse_pass<F: Real>(
    model: &Model<F>,
    kernel: &KernelRays<F>,
    depths: &[Vec<F>],
    far: F,
    target: &[F],
    scale: F,
) -> Result<(CoarsePass<F>, F)> {
    let rays = RayBatch::new(kernel.origins.clone(), kernel.dirs.clone(), depths, far);
    let (out, trace) = model.crr.forward(&model.grid_coarse, &rays)?;
    let (blend, linear) = blend_batch(&out.color, &kernel.weights, kernel.p, model.arch.gamma_correct);
    let loss = photometric_loss(&blend, target) * F::lit(kernel.num_pixels() as f64) * scale;
    Ok((
        CoarsePass {
            rays,
            out,
            trace,
            blend,
            linear,
        },
        loss,
    ))
}

fn forward<F: Real>(
    model: &Model<F>,
    cameras: &[Camera<F>],
    batch: &PixelBatch<F>,
    opts: &StepOptions<'_, F>,
) -> Result<Forward<F>> {
    let arch = &model.arch;
    let (near, far) = model.near_far();
    let mut rng = opts.rng_seed.map(ChaCha8Rng::seed_from_u64);
    let (stage1, stage1_pbe) = if arch.blur_model {
        let (k, t) = pbe_stage1(&model.blur, &model.pbe, cameras, &batch.views, &batch.pixels)?;
        (k, Some(t))
    } else {
        (central_rays(cameras, &batch.views, &batch.pixels)?, None)
    };
    let n_rays = stage1.num_rays();
    let depths = (0..n_rays)
        .map(|_| stratified_samples(near, far, arch.n_coarse, rng.as_mut()))
        .collect::<Result<Vec<_>>>()?;

    let (coarse1, crr_stage1) =
        coarse_pass(model, &stage1, &depths, far, &batch.targets, opts.loss_scale)?;

    let two_stage = arch.blur_model && !opts.single_stage;
    let stage2 = if two_stage {
        let (kernel, pbe) =
            pbe_stage2(&model.blur, &model.pbe, cameras, &stage1, &coarse1.out.f_ray)?;
        let (coarse, _) = coarse_pass(model, &kernel, &depths, far, &batch.targets, opts.loss_scale)?;
        Some(Stage2 {
            kernel,
            pbe,
            coarse,
        })
    } else {
        None
    };
    let crr_stage2 = match &stage2 {
        Some(s) => photometric_loss(&s.coarse.blend, &batch.targets)
            * F::lit(batch.len() as f64)
            * opts.loss_scale,
        None => F::zero(),
    };

    let (final_kernel, final_coarse) = match &stage2 {
        Some(s) => (&s.kernel, &s.coarse),
        None => (&stage1, &coarse1),
    };
    let fine_depths: Vec<Vec<F>> = match opts.fine_depths {
        Some(d) => {
            if d.len() != n_rays {
                return Err(contract("fine depth override has the wrong ray count"));
            }
            d.to_vec()
        }
        None => {
            let edges = bin_edges(near, far, arch.n_coarse);
            let nc = arch.n_coarse;
            (0..n_rays)
                .map(|r| {
                    let w = &final_coarse.out.weights[r * nc..(r + 1) * nc];
                    let fine = importance_sample(w, &edges, arch.n_fine, rng.as_mut());
                    merge_depths(&depths[r], &fine, near, far)
                })
                .collect()
        }
    };
    let fine_rays = RayBatch::new(
        final_kernel.origins.clone(),
        final_kernel.dirs.clone(),
        &fine_depths,
        far,
    );
    let (fine, fine_trace) = model
        .fvr
        .forward(&model.grid_coarse, &model.grid_fine, &fine_rays)?;
    let (fine_blend, fine_linear) = blend_batch(
        &fine.color,
        &final_kernel.weights,
        final_kernel.p,
        arch.gamma_correct,
    );
    let fvr = photometric_loss(&fine_blend, &batch.targets) * F::lit(batch.len() as f64) * opts.loss_scale;
    Ok(Forward {
        stage1,
        stage1_pbe,
        coarse1,
        stage2,
        fine_rays,
        fine,
        fine_trace,
        fine_blend,
        fine_linear,
        loss: ShardLoss {
            crr_stage1,
            crr_stage2,
            fvr,
            fine_depths,
        },
    })
}

/// Loss of a shard without touching gradients.
pub fn shard_loss<F: Real>(
    model: &Model<F>,
    cameras: &[Camera<F>],
    batch: &PixelBatch<F>,
    opts: &StepOptions<'_, F>,
) -> Result<ShardLoss<F>> {
    Ok(forward(model, cameras, batch, opts)?.loss)
}

fn add_ray_grads<F: Real>(k: &mut KernelGrads<F>, g: &RayGrads<F>) {
    for (a, b) in k.origins.iter_mut().zip(&g.origins) {
        *a += *b;
    }
    for (a, b) in k.dirs.iter_mut().zip(&g.dirs) {
        *a += *b;
    }
}

/// Backpropagates a coarse blend term; returns the ray gradients and the
/// gradient on the blend weights.
fn coarse_backward<F: Real>(
    model: &mut Model<F>,
    kernel: &KernelRays<F>,
    pass: &CoarsePass<F>,
    target: &[F],
    scale: F,
    grad_f_ray: Option<&[F]>,
) -> Result<(RayGrads<F>, Vec<F>)> {
    let g_blend = photometric_grad(&pass.blend, target, scale);
    let (g_color, g_w) = blend_backward(
        &pass.out.color,
        &kernel.weights,
        kernel.p,
        &pass.linear,
        model.arch.gamma_correct,
        &g_blend,
    );
    let Model {
        crr, grid_coarse, ..
    } = model;
    let rg = crr.backward(grid_coarse, &pass.rays, &pass.out, &pass.trace, &g_color, grad_f_ray)?;
    Ok((rg, g_w))
}

/// Forward and backward for one shard; gradients accumulate into `model`.
pub fn shard_loss_and_grad<F: Real>(
    model: &mut Model<F>,
    cameras: &[Camera<F>],
    batch: &PixelBatch<F>,
    opts: &StepOptions<'_, F>,
) -> Result<ShardLoss<F>> {
    let fw = forward(model, cameras, batch, opts)?;
    let scale = opts.loss_scale;
    let t = &batch.targets;
    let gamma = model.arch.gamma_correct;

    let (final_kernel, stage2_pbe) = match &fw.stage2 {
        Some(s) => (&s.kernel, Some(&s.pbe)),
        None => (&fw.stage1, None),
    };
    let n_final = final_kernel.num_rays();
    let mut g_final = KernelGrads::zeros(n_final);

    // fine term
    let g_blend = photometric_grad(&fw.fine_blend, t, scale);
    let (g_color, g_w) = blend_backward(
        &fw.fine.color,
        &final_kernel.weights,
        final_kernel.p,
        &fw.fine_linear,
        gamma,
        &g_blend,
    );
    {
        let Model {
            fvr,
            grid_coarse,
            grid_fine,
            ..
        } = model;
        let rg = fvr.backward(grid_coarse, grid_fine, &fw.fine_rays, &fw.fine, &fw.fine_trace, &g_color)?;
        add_ray_grads(&mut g_final, &rg);
    }
    for (a, b) in g_final.weights.iter_mut().zip(&g_w) {
        *a += *b;
    }

    match (&fw.stage2, stage2_pbe) {
        (Some(s2), Some(pbe_trace)) => {
            let (rg, g_w) = coarse_backward(model, &s2.kernel, &s2.coarse, t, scale, None)?;
            add_ray_grads(&mut g_final, &rg);
            for (a, b) in g_final.weights.iter_mut().zip(&g_w) {
                *a += *b;
            }
            let Model { blur, pbe, .. } = model;
            let in_grads = pbe_backward(blur, pbe, cameras, &s2.kernel, pbe_trace, &g_final)?;

            let (rg1, g_w1) = coarse_backward(
                model,
                &fw.stage1,
                &fw.coarse1,
                t,
                scale,
                Some(&in_grads.features),
            )?;
            let mut g1 = KernelGrads::zeros(fw.stage1.num_rays());
            add_ray_grads(&mut g1, &rg1);
            g1.weights = g_w1;
            g1.kernel = in_grads.kernel_in;
            let trace = fw.stage1_pbe.as_ref().expect("stage 1 ran");
            let Model { blur, pbe, .. } = model;
            pbe_backward(blur, pbe, cameras, &fw.stage1, trace, &g1)?;
        }
        _ => {
            let (rg1, g_w1) = coarse_backward(model, &fw.stage1, &fw.coarse1, t, scale, None)?;
            add_ray_grads(&mut g_final, &rg1);
            for (a, b) in g_final.weights.iter_mut().zip(&g_w1) {
                *a += *b;
            }
            if let Some(trace) = &fw.stage1_pbe {
                let Model { blur, pbe, .. } = model;
                pbe_backward(blur, pbe, cameras, &fw.stage1, trace, &g_final)?;
            }
        }
    }
    Ok(fw.loss)
}
