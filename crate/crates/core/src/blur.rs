//! Progressive blur estimation: per-view kernel state, the shared head `H`
//! evaluated in two passes, blur blending and the offset-variance map.

use rand::Rng;

use crate::encoding::EncodingSpec;
use crate::error::{contract, Result};
use crate::geometry::Camera;
use crate::mlp::{Mlp, MlpTrace};
use crate::real::Real;
use crate::tensor::{ParamTensor, Parameters};
use crate::vec3::Vec3;

/// Largest kernel offset from the anchor pixel, in pixels.
pub const KERNEL_BOUND: f64 = 10.0;
pub const EMBED_DIM: usize = 32;
pub const FEATURE_DIM: usize = 15;
/// Origin offsets are bounded to this fraction of the scene extent.
pub const ORIGIN_FRACTION: f64 = 0.02;
pub const GAMMA: f64 = 1.0 / 2.2;
pub const GAMMA_EPS: f64 = 1e-6;
const HEAD_OUT: usize = 6;

/// Canonical kernel offsets `(V, P, 2)` and view embeddings `(V, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurKernelState<F> {
    pub canonical_offsets: ParamTensor<F>,
    pub view_embeddings: ParamTensor<F>,
}

impl<F: Real> BlurKernelState<F> {
    pub fn new<R: Rng + ?Sized>(views: usize, p: usize, embed_dim: usize, rng: &mut R) -> Self {
        let mut canonical_offsets = ParamTensor::uniform("pbe.offsets", &[views, p, 2], 2.0, rng);
        for v in 0..views {
            canonical_offsets.values[v * p * 2] = F::zero();
            canonical_offsets.values[v * p * 2 + 1] = F::zero();
        }
        let view_embeddings = ParamTensor::uniform("pbe.embed", &[views, embed_dim], 0.1, rng);
        Self {
            canonical_offsets,
            view_embeddings,
        }
    }

    pub fn views(&self) -> usize {
        self.canonical_offsets.shape[0]
    }

    pub fn kernel_size(&self) -> usize {
        self.canonical_offsets.shape[1]
    }

    pub fn embed_dim(&self) -> usize {
        self.view_embeddings.shape[1]
    }

    fn canonical(&self, view: usize, i: usize) -> [F; 2] {
        let o = (view * self.kernel_size() + i) * 2;
        let v = &self.canonical_offsets.values;
        [v[o], v[o + 1]]
    }

    pub fn cast<G: Real>(&self) -> BlurKernelState<G> {
        BlurKernelState {
            canonical_offsets: self.canonical_offsets.cast(),
            view_embeddings: self.view_embeddings.cast(),
        }
    }
}

impl<F> Parameters<F> for BlurKernelState<F> {
    fn params(&self) -> Vec<&ParamTensor<F>> {
        vec![&self.canonical_offsets, &self.view_embeddings]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor<F>> {
        vec![&mut self.canonical_offsets, &mut self.view_embeddings]
    }
}

/// The head `H`: `[l, γ(x), γ(kernel), features] -> (Δo, Δx, logit)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PbeNet<F> {
    pub net: Mlp<F>,
    pub coord_enc: EncodingSpec,
    pub embed_dim: usize,
    pub feature_dim: usize,
    /// Bound on each origin offset component, in world units.
    pub origin_scale: F,
}

impl<F: Real> PbeNet<F> {
    pub fn new<R: Rng + ?Sized>(
        embed_dim: usize,
        feature_dim: usize,
        hidden: usize,
        scene_extent: F,
        rng: &mut R,
    ) -> Self {
        let coord_enc = EncodingSpec::new(5, true);
        let in_dim = embed_dim + 2 * coord_enc.output_dim(2) + feature_dim;
        let mut net = Mlp::new("pbe.h", &[in_dim, hidden, hidden, hidden, HEAD_OUT], rng);
        net.scale_output_layer(F::lit(0.01));
        Self {
            net,
            coord_enc,
            embed_dim,
            feature_dim,
            origin_scale: F::lit(ORIGIN_FRACTION) * scene_extent,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.net.in_dim()
    }

    pub fn cast<G: Real>(&self) -> PbeNet<G> {
        PbeNet {
            net: self.net.cast(),
            coord_enc: self.coord_enc,
            embed_dim: self.embed_dim,
            feature_dim: self.feature_dim,
            origin_scale: G::lit(self.origin_scale.as_f64()),
        }
    }
}

impl<F> Parameters<F> for PbeNet<F> {
    fn params(&self) -> Vec<&ParamTensor<F>> {
        self.net.params()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor<F>> {
        self.net.params_mut()
    }
}

/// Kernel rays for a batch of anchor pixels; per-element arrays are
/// `(pixels, P)` flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRays<F> {
    pub p: usize,
    pub views: Vec<usize>,
    pub pixels: Vec<[F; 2]>,
    /// Offset of each kernel element from its anchor pixel.
    pub kernel: Vec<[F; 2]>,
    pub delta_o: Vec<Vec3<F>>,
    pub weights: Vec<F>,
    pub origins: Vec<Vec3<F>>,
    pub dirs: Vec<Vec3<F>>,
}

impl<F> KernelRays<F> {
    pub fn num_pixels(&self) -> usize {
        self.pixels.len()
    }

    pub fn num_rays(&self) -> usize {
        self.kernel.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KernelSource {
    Canonical,
    Refined,
}

#[derive(Debug, Clone)]
pub struct PbeTrace<F> {
    source: KernelSource,
    kernel_in: Vec<[F; 2]>,
    raw: Vec<F>,
    mlp: MlpTrace<F>,
}

/// Upstream gradients on a [`KernelRays`].
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrads<F> {
    pub origins: Vec<Vec3<F>>,
    pub dirs: Vec<Vec3<F>>,
    pub weights: Vec<F>,
    /// Extra gradient on `kernel` beyond what flows through `dirs`.
    pub kernel: Vec<[F; 2]>,
}

impl<F: Real> KernelGrads<F> {
    pub fn zeros(n: usize) -> Self {
        Self {
            origins: vec![Vec3::zero(); n],
            dirs: vec![Vec3::zero(); n],
            weights: vec![F::zero(); n],
            kernel: vec![[F::zero(); 2]; n],
        }
    }
}

/// Gradients with respect to a pass's non-parameter inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PbeInputGrads<F> {
    pub kernel_in: Vec<[F; 2]>,
    pub features: Vec<F>,
}

#[inline]
fn clamp_bound<F: Real>(v: F) -> F {
    let b = F::lit(KERNEL_BOUND);
    v.max(-b).min(b)
}

#[inline]
fn inside_bound<F: Real>(v: F) -> bool {
    v.abs() < F::lit(KERNEL_BOUND)
}

fn normalized_pixel<F: Real>(camera: &Camera<F>, px: [F; 2]) -> [F; 2] {
    let two = F::lit(2.0);
    [
        px[0] / F::lit(camera.width as f64) * two - F::one(),
        px[1] / F::lit(camera.height as f64) * two - F::one(),
    ]
}

#[allow(clippy::too_many_arguments)]
fn pbe_pass<F: Real>(
    state: &BlurKernelState<F>,
    net: &PbeNet<F>,
    cameras: &[Camera<F>],
    views: &[usize],
    pixels: &[[F; 2]],
    source: KernelSource,
    refined_in: Option<&[[F; 2]]>,
    features: Option<&[F]>,
) -> Result<(KernelRays<F>, PbeTrace<F>)> {
    let p = state.kernel_size();
    let n_pix = pixels.len();
    let rows = n_pix * p;
    if views.len() != n_pix {
        return Err(contract("pbe: views and pixels differ in length"));
    }
    if let Some(k) = refined_in {
        if k.len() != rows {
            return Err(contract(format!(
                "pbe stage 2: got {} kernel locations, expected {} pixels x P={}",
                k.len(),
                n_pix,
                p
            )));
        }
    }
    if let Some(f) = features {
        if f.len() != rows * net.feature_dim {
            return Err(contract(format!(
                "pbe stage 2: got {} feature values, expected {} rays x {}",
                f.len(),
                rows,
                net.feature_dim
            )));
        }
    }
    if state.embed_dim() != net.embed_dim {
        return Err(contract("pbe: embedding width does not match the head"));
    }
    let k_dim = net.embed_dim;
    let c_dim = net.coord_enc.output_dim(2);
    let in_dim = net.in_dim();
    let inv_bound = F::one() / F::lit(KERNEL_BOUND);

    let mut kernel_in = Vec::with_capacity(rows);
    let mut input = vec![F::zero(); rows * in_dim];
    for (b, (&view, &px)) in views.iter().zip(pixels).enumerate() {
        if view >= state.views() || view >= cameras.len() {
            return Err(contract(format!("pbe: view {view} out of range")));
        }
        let xn = normalized_pixel(&cameras[view], px);
        let embed = &state.view_embeddings.values[view * k_dim..(view + 1) * k_dim];
        for i in 0..p {
            let row = b * p + i;
            let kin = match refined_in {
                Some(k) => k[row],
                None => {
                    let c = state.canonical(view, i);
                    [clamp_bound(c[0]), clamp_bound(c[1])]
                }
            };
            kernel_in.push(kin);
            let x = &mut input[row * in_dim..(row + 1) * in_dim];
            x[..k_dim].copy_from_slice(embed);
            net.coord_enc.encode_into(&xn, &mut x[k_dim..k_dim + c_dim]);
            net.coord_enc.encode_into(
                &[kin[0] * inv_bound, kin[1] * inv_bound],
                &mut x[k_dim + c_dim..k_dim + 2 * c_dim],
            );
            if let Some(f) = features {
                let fd = net.feature_dim;
                x[k_dim + 2 * c_dim..].copy_from_slice(&f[row * fd..(row + 1) * fd]);
            }
        }
    }
    let (raw, mlp) = net.net.forward_batch(&input, rows)?;
    drop(input);

    let bound = F::lit(KERNEL_BOUND);
    let mut out = KernelRays {
        p,
        views: views.to_vec(),
        pixels: pixels.to_vec(),
        kernel: Vec::with_capacity(rows),
        delta_o: Vec::with_capacity(rows),
        weights: Vec::with_capacity(rows),
        origins: Vec::with_capacity(rows),
        dirs: Vec::with_capacity(rows),
    };
    for b in 0..n_pix {
        let cam = &cameras[views[b]];
        let logits: Vec<F> = (0..p).map(|i| raw[(b * p + i) * HEAD_OUT + 5]).collect();
        out.weights.extend(softmax(&logits));
        for i in 0..p {
            let row = b * p + i;
            let r = &raw[row * HEAD_OUT..(row + 1) * HEAD_OUT];
            // element 0 is the observed pixel's own ray; only its weight is learned
            let (d_o, k) = if i == 0 {
                (Vec3::zero(), [F::zero(), F::zero()])
            } else {
                let kin = kernel_in[row];
                (
                    Vec3::new(r[0].tanh(), r[1].tanh(), r[2].tanh()) * net.origin_scale,
                    [
                        clamp_bound(kin[0] + bound * r[3].tanh()),
                        clamp_bound(kin[1] + bound * r[4].tanh()),
                    ],
                )
            };
            let px = [pixels[b][0] + k[0], pixels[b][1] + k[1]];
            out.kernel.push(k);
            out.delta_o.push(d_o);
            out.origins.push(cam.origin + d_o);
            out.dirs.push(cam.direction(px));
        }
    }
    Ok((
        out,
        PbeTrace {
            source,
            kernel_in,
            raw,
            mlp,
        },
    ))
}

/// Stage one: canonical offsets, zero feature slot.
pub fn pbe_stage1<F: Real>(
    state: &BlurKernelState<F>,
    net: &PbeNet<F>,
    cameras: &[Camera<F>],
    views: &[usize],
    pixels: &[[F; 2]],
) -> Result<(KernelRays<F>, PbeTrace<F>)> {
    pbe_pass(
        state,
        net,
        cameras,
        views,
        pixels,
        KernelSource::Canonical,
        None,
        None,
    )
}

/// Stage two: refines the stage-one kernel using per-ray features
/// `(pixels * P, feature_dim)`.
pub fn pbe_stage2<F: Real>(
    state: &BlurKernelState<F>,
    net: &PbeNet<F>,
    cameras: &[Camera<F>],
    stage1: &KernelRays<F>,
    ray_features: &[F],
) -> Result<(KernelRays<F>, PbeTrace<F>)> {
    if stage1.p != state.kernel_size() {
        return Err(contract(format!(
            "pbe stage 2: stage-1 kernel size {} differs from P={}",
            stage1.p,
            state.kernel_size()
        )));
    }
    pbe_pass(
        state,
        net,
        cameras,
        &stage1.views,
        &stage1.pixels,
        KernelSource::Refined,
        Some(&stage1.kernel),
        Some(ray_features),
    )
}

/// Reverse pass of either stage. Accumulates into `H`, the embeddings and
/// (for stage one) the canonical offsets.
pub fn pbe_backward<F: Real>(
    state: &mut BlurKernelState<F>,
    net: &mut PbeNet<F>,
    cameras: &[Camera<F>],
    rays: &KernelRays<F>,
    trace: &PbeTrace<F>,
    grads: &KernelGrads<F>,
) -> Result<PbeInputGrads<F>> {
    let p = rays.p;
    let rows = rays.num_rays();
    if grads.weights.len() != rows
        || grads.origins.len() != rows
        || grads.dirs.len() != rows
        || grads.kernel.len() != rows
    {
        return Err(contract("pbe backward: gradient lengths do not match the kernel rays"));
    }
    let bound = F::lit(KERNEL_BOUND);
    let mut g_raw = vec![F::zero(); rows * HEAD_OUT];
    for b in 0..rays.num_pixels() {
        let cam = &cameras[rays.views[b]];
        let h = &rays.weights[b * p..(b + 1) * p];
        let gh = &grads.weights[b * p..(b + 1) * p];
        let dot: F = h.iter().zip(gh).map(|(a, g)| *a * *g).sum();
        for i in 0..p {
            let row = b * p + i;
            let r = &trace.raw[row * HEAD_OUT..(row + 1) * HEAD_OUT];
            let g = &mut g_raw[row * HEAD_OUT..(row + 1) * HEAD_OUT];
            g[5] = h[i] * (gh[i] - dot);
            if i == 0 {
                continue;
            }
            for c in 0..3 {
                let t = r[c].tanh();
                g[c] = grads.origins[row][c] * net.origin_scale * (F::one() - t * t);
            }
            let k = rays.kernel[row];
            let px = [rays.pixels[b][0] + k[0], rays.pixels[b][1] + k[1]];
            let gp = cam.direction_backward(px, &grads.dirs[row]);
            let kin = trace.kernel_in[row];
            for c in 0..2 {
                let t = r[3 + c].tanh();
                if inside_bound(kin[c] + bound * t) {
                    g[3 + c] = (gp[c] + grads.kernel[row][c]) * bound * (F::one() - t * t);
                }
            }
        }
    }
    let g_in = net.net.backward_batch(&trace.mlp, &g_raw)?;

    let k_dim = net.embed_dim;
    let c_dim = net.coord_enc.output_dim(2);
    let in_dim = net.in_dim();
    let fd = net.feature_dim;
    let inv_bound = F::one() / F::lit(KERNEL_BOUND);
    let mut kernel_in = vec![[F::zero(); 2]; rows];
    let mut features = vec![F::zero(); rows * fd];
    for b in 0..rays.num_pixels() {
        let view = rays.views[b];
        for i in 0..p {
            let row = b * p + i;
            let gi = &g_in[row * in_dim..(row + 1) * in_dim];
            let emb = &mut state.view_embeddings.grad[view * k_dim..(view + 1) * k_dim];
            for (e, g) in emb.iter_mut().zip(&gi[..k_dim]) {
                *e += *g;
            }
            let kin = trace.kernel_in[row];
            let mut gk = [F::zero(); 2];
            net.coord_enc.backward_into(
                &[kin[0] * inv_bound, kin[1] * inv_bound],
                &gi[k_dim + c_dim..k_dim + 2 * c_dim],
                &mut gk,
            );
            gk = [gk[0] * inv_bound, gk[1] * inv_bound];
            if i != 0 {
                // kernel = clamp(kin + Δ), pass-through inside the bound
                let r = &trace.raw[row * HEAD_OUT..(row + 1) * HEAD_OUT];
                let k = rays.kernel[row];
                let px = [rays.pixels[b][0] + k[0], rays.pixels[b][1] + k[1]];
                let gp = cameras[view].direction_backward(px, &grads.dirs[row]);
                for c in 0..2 {
                    if inside_bound(kin[c] + bound * r[3 + c].tanh()) {
                        gk[c] += gp[c] + grads.kernel[row][c];
                    }
                }
            }
            kernel_in[row] = gk;
            features[row * fd..(row + 1) * fd].copy_from_slice(&gi[k_dim + 2 * c_dim..]);
        }
    }
    if trace.source == KernelSource::Canonical {
        for b in 0..rays.num_pixels() {
            let view = rays.views[b];
            for i in 0..p {
                let o = (view * p + i) * 2;
                for c in 0..2 {
                    if inside_bound(state.canonical_offsets.values[o + c]) {
                        state.canonical_offsets.grad[o + c] += kernel_in[b * p + i][c];
                    }
                }
            }
        }
    }
    Ok(PbeInputGrads {
        kernel_in,
        features,
    })
}

pub fn softmax<F: Real>(logits: &[F]) -> Vec<F> {
    let m = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let e: Vec<F> = logits.iter().map(|z| (*z - m).exp()).collect();
    let s: F = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[inline]
pub fn gamma_encode<F: Real>(x: F) -> F {
    (x + F::lit(GAMMA_EPS)).powf(F::lit(GAMMA))
}

#[inline]
pub fn gamma_derivative<F: Real>(x: F) -> F {
    F::lit(GAMMA) * (x + F::lit(GAMMA_EPS)).powf(F::lit(GAMMA - 1.0))
}

/// `Σ_i h_i c_i`, gamma-encoded when requested.
pub fn blend_blurry<F: Real>(colors: &[[F; 3]], weights: &[F], gamma: bool) -> [F; 3] {
    let mut out = [F::zero(); 3];
    for (c, w) in colors.iter().zip(weights) {
        for k in 0..3 {
            out[k] += *w * c[k];
        }
    }
    if gamma {
        out.iter_mut().for_each(|v| *v = gamma_encode(*v));
    }
    out
}

/// Batched blend over `(pixels, P)` colours `(.., 3)`. Returns
/// `(blend, linear_blend)`, both `(pixels, 3)`.
pub fn blend_batch<F: Real>(colors: &[F], weights: &[F], p: usize, gamma: bool) -> (Vec<F>, Vec<F>) {
    let n = weights.len() / p;
    let mut lin = vec![F::zero(); n * 3];
    for b in 0..n {
        for i in 0..p {
            let row = b * p + i;
            for k in 0..3 {
                lin[b * 3 + k] += weights[row] * colors[row * 3 + k];
            }
        }
    }
    let out = if gamma {
        lin.iter().map(|v| gamma_encode(*v)).collect()
    } else {
        lin.clone()
    };
    (out, lin)
}

/// Reverse of [`blend_batch`]: `(grad_colors, grad_weights)`.
pub fn blend_backward<F: Real>(
    colors: &[F],
    weights: &[F],
    p: usize,
    linear_blend: &[F],
    gamma: bool,
    grad_out: &[F],
) -> (Vec<F>, Vec<F>) {
    let n = weights.len() / p;
    let mut gc = vec![F::zero(); colors.len()];
    let mut gw = vec![F::zero(); weights.len()];
    for b in 0..n {
        let mut g = [F::zero(); 3];
        for k in 0..3 {
            g[k] = grad_out[b * 3 + k];
            if gamma {
                g[k] *= gamma_derivative(linear_blend[b * 3 + k]);
            }
        }
        for i in 0..p {
            let row = b * p + i;
            for k in 0..3 {
                gc[row * 3 + k] = weights[row] * g[k];
                gw[row] += colors[row * 3 + k] * g[k];
            }
        }
    }
    (gc, gw)
}

/// Per pixel, the summed componentwise population variance of the `P`
/// origin offsets.
pub fn offset_variance<F: Real>(delta_o: &[Vec3<F>], p: usize) -> Vec<F> {
    let inv = F::one() / F::lit(p as f64);
    delta_o
        .chunks(p)
        .map(|ks| {
            let mut mean = Vec3::zero();
            for d in ks {
                mean += *d;
            }
            mean = mean * inv;
            ks.iter()
                .map(|d| {
                    let e = *d - mean;
                    e.dot(&e)
                })
                .sum::<F>()
                * inv
        })
        .collect()
}

/// Offset-variance image of one view, row-major `(height, width)`.
/// `features` supplies stage-two ray features for a stage-one kernel.
pub fn blur_variance_map<F, G>(
    state: &BlurKernelState<F>,
    net: &PbeNet<F>,
    cameras: &[Camera<F>],
    view: usize,
    mut features: G,
) -> Result<Vec<F>>
where
    F: Real,
    G: FnMut(&KernelRays<F>) -> Result<Vec<F>>,
{
    let cam = cameras
        .get(view)
        .ok_or_else(|| contract(format!("view {view} out of range")))?;
    let (w, h) = (cam.width, cam.height);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let pixels: Vec<[F; 2]> = (0..w)
            .map(|x| [F::lit(x as f64 + 0.5), F::lit(y as f64 + 0.5)])
            .collect();
        let views = vec![view; w];
        let (s1, _) = pbe_stage1(state, net, cameras, &views, &pixels)?;
        let f = features(&s1)?;
        let (s2, _) = pbe_stage2(state, net, cameras, &s1, &f)?;
        out.extend(offset_variance(&s2.delta_o, s2.p));
    }
    Ok(out)
}
