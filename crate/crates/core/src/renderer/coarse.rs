use rand::Rng;

use super::transmittance::{transmittance_backward, transmittance_weights};
use super::{scatter_point_grad, RayBatch, RayGrads};
use crate::encoding::EncodingSpec;
use crate::error::{contract, Result};
use crate::field::FeatureGrid;
use crate::geometry::RaySamples;
use crate::mlp::{Mlp, MlpTrace};
use crate::real::{sigmoid, softplus, Real};
use crate::tensor::{ParamTensor, Parameters};
use crate::vec3::Vec3;

/// Density/feature network over `[γ(X), G(X)]` plus a colour network
/// evaluated once per ray on the aggregated feature.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseRenderer<F> {
    pub sigma_net: Mlp<F>,
    pub color_net: Mlp<F>,
    pub pos_enc: EncodingSpec,
    pub dir_enc: EncodingSpec,
    pub feature_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseOutput<F> {
    /// `(rays, feature_dim)`
    pub f_ray: Vec<F>,
    /// `(rays, 3)` in `[0, 1]`
    pub color: Vec<F>,
    /// `(rays, n_samples)`
    pub weights: Vec<F>,
    /// `(rays, n_samples)`
    pub sigma: Vec<F>,
}

#[derive(Debug, Clone)]
pub struct CoarseTrace<F> {
    raw: Vec<F>,
    transmittance: Vec<F>,
    sigma_trace: MlpTrace<F>,
    color_trace: MlpTrace<F>,
}

impl<F: Real> CoarseRenderer<F> {
    pub fn new<R: Rng + ?Sized>(
        grid_dim: usize,
        hidden: usize,
        feature_dim: usize,
        pos_enc: EncodingSpec,
        dir_enc: EncodingSpec,
        rng: &mut R,
    ) -> Self {
        let mut sigma_net = Mlp::new(
            "crr.sigma",
            &[pos_enc.output_dim(3) + grid_dim, hidden, 1 + feature_dim],
            rng,
        );
        // slightly transparent start
        sigma_net.layers.last_mut().unwrap().bias.values[0] = F::lit(-1.0);
        let color_net = Mlp::new(
            "crr.color",
            &[feature_dim + dir_enc.output_dim(3), hidden, hidden, 3],
            rng,
        );
        Self {
            sigma_net,
            color_net,
            pos_enc,
            dir_enc,
            feature_dim,
        }
    }

    pub fn forward(
        &self,
        grid: &FeatureGrid<F>,
        rays: &RayBatch<F>,
    ) -> Result<(CoarseOutput<F>, CoarseTrace<F>)> {
        let n = rays.n_samples;
        let n_rays = rays.len();
        let rows = n_rays * n;
        let pos_dim = self.pos_enc.output_dim(3);
        let gdim = grid.feature_dim();
        let in_dim = pos_dim + gdim;
        if in_dim != self.sigma_net.in_dim() {
            return Err(contract("coarse density network does not match grid width"));
        }
        let mut input = vec![F::zero(); rows * in_dim];
        for r in 0..n_rays {
            for s in 0..n {
                let p = rays.point(r, s);
                let row = &mut input[(r * n + s) * in_dim..(r * n + s + 1) * in_dim];
                self.pos_enc.encode_into(&grid.bounds.normalize(&p).0, &mut row[..pos_dim]);
                grid.query_into(&p, &mut row[pos_dim..]);
            }
        }
        let (raw, sigma_trace) = self.sigma_net.forward_batch(&input, rows)?;
        drop(input);
        let out_w = 1 + self.feature_dim;
        let sigma: Vec<F> = (0..rows).map(|i| softplus(raw[i * out_w])).collect();

        let fd = self.feature_dim;
        let dir_dim = self.dir_enc.output_dim(3);
        let mut weights = Vec::with_capacity(rows);
        let mut transmittance = Vec::with_capacity(rows);
        let mut f_ray = vec![F::zero(); n_rays * fd];
        let mut color_in = vec![F::zero(); n_rays * (fd + dir_dim)];
        for r in 0..n_rays {
            let range = r * n..(r + 1) * n;
            let (t, w) = transmittance_weights(&sigma[range.clone()], &rays.delta[range]);
            let fr = &mut f_ray[r * fd..(r + 1) * fd];
            for (s, wi) in w.iter().enumerate() {
                let feat = &raw[(r * n + s) * out_w + 1..(r * n + s + 1) * out_w];
                for (o, v) in fr.iter_mut().zip(feat) {
                    *o += *wi * *v;
                }
            }
            let ci = &mut color_in[r * (fd + dir_dim)..(r + 1) * (fd + dir_dim)];
            ci[..fd].copy_from_slice(fr);
            self.dir_enc.encode_into(&rays.dirs[r].0, &mut ci[fd..]);
            weights.extend(w);
            transmittance.extend(t);
        }
        let (logits, color_trace) = self.color_net.forward_batch(&color_in, n_rays)?;
        let color = logits.iter().map(|z| sigmoid(*z)).collect();
        Ok((
            CoarseOutput {
                f_ray,
                color,
                weights,
                sigma,
            },
            CoarseTrace {
                raw,
                transmittance,
                sigma_trace,
                color_trace,
            },
        ))
    }

    /// Reverse pass. `grad_color` is `(rays, 3)`; `grad_f_ray` optionally
    /// adds an external gradient on the aggregated features.
    pub fn backward(
        &mut self,
        grid: &mut FeatureGrid<F>,
        rays: &RayBatch<F>,
        out: &CoarseOutput<F>,
        trace: &CoarseTrace<F>,
        grad_color: &[F],
        grad_f_ray: Option<&[F]>,
    ) -> Result<RayGrads<F>> {
        let n = rays.n_samples;
        let n_rays = rays.len();
        let rows = n_rays * n;
        let fd = self.feature_dim;
        let dir_dim = self.dir_enc.output_dim(3);
        if grad_color.len() != n_rays * 3 {
            return Err(contract("coarse colour gradient has the wrong length"));
        }
        let mut grads = RayGrads::zeros(n_rays);

        let gz: Vec<F> = grad_color
            .iter()
            .zip(&out.color)
            .map(|(g, c)| *g * *c * (F::one() - *c))
            .collect();
        let g_color_in = self.color_net.backward_batch(&trace.color_trace, &gz)?;

        let out_w = 1 + fd;
        let mut g_raw = vec![F::zero(); rows * out_w];
        for r in 0..n_rays {
            let gin = &g_color_in[r * (fd + dir_dim)..(r + 1) * (fd + dir_dim)];
            let mut g_fray: Vec<F> = gin[..fd].to_vec();
            if let Some(ext) = grad_f_ray {
                for (g, e) in g_fray.iter_mut().zip(&ext[r * fd..(r + 1) * fd]) {
                    *g += *e;
                }
            }
            let mut gd = [F::zero(); 3];
            self.dir_enc.backward_into(&rays.dirs[r].0, &gin[fd..], &mut gd);
            grads.dirs[r] += Vec3(gd);

            let range = r * n..(r + 1) * n;
            let mut g_w = vec![F::zero(); n];
            for s in 0..n {
                let row = r * n + s;
                let feat = &trace.raw[row * out_w + 1..(row + 1) * out_w];
                let w = out.weights[row];
                g_w[s] = feat.iter().zip(&g_fray).map(|(f, g)| *f * *g).sum();
                let gr = &mut g_raw[row * out_w + 1..(row + 1) * out_w];
                for (o, g) in gr.iter_mut().zip(&g_fray) {
                    *o = w * *g;
                }
            }
            let g_sigma = transmittance_backward(
                &out.sigma[range.clone()],
                &rays.delta[range.clone()],
                &trace.transmittance[range.clone()],
                &out.weights[range],
                &g_w,
            );
            for s in 0..n {
                let row = r * n + s;
                g_raw[row * out_w] = g_sigma[s] * sigmoid(trace.raw[row * out_w]);
            }
        }

        let g_in = self.sigma_net.backward_batch(&trace.sigma_trace, &g_raw)?;
        let pos_dim = self.pos_enc.output_dim(3);
        let in_dim = self.sigma_net.in_dim();
        let scale = grid.bounds.normalize_scale();
        for r in 0..n_rays {
            for s in 0..n {
                let row = r * n + s;
                let gi = &g_in[row * in_dim..(row + 1) * in_dim];
                let p = rays.point(r, s);
                let mut gn = [F::zero(); 3];
                self.pos_enc
                    .backward_into(&grid.bounds.normalize(&p).0, &gi[..pos_dim], &mut gn);
                let mut gp = Vec3([gn[0] * scale[0], gn[1] * scale[1], gn[2] * scale[2]]);
                gp += grid.backward_point(&p, &gi[pos_dim..]);
                scatter_point_grad(&mut grads, r, rays.t[row], gp);
            }
        }
        Ok(grads)
    }

    pub fn cast<G: Real>(&self) -> CoarseRenderer<G> {
        CoarseRenderer {
            sigma_net: self.sigma_net.cast(),
            color_net: self.color_net.cast(),
            pos_enc: self.pos_enc,
            dir_enc: self.dir_enc,
            feature_dim: self.feature_dim,
        }
    }
}

impl<F> Parameters<F> for CoarseRenderer<F> {
    fn params(&self) -> Vec<&ParamTensor<F>> {
        let mut p = self.sigma_net.params();
        p.extend(self.color_net.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor<F>> {
        let mut p = self.sigma_net.params_mut();
        p.extend(self.color_net.params_mut());
        p
    }
}

/// Renders one ray: `(f_ray, rgb, weights)`.
pub fn render_ray_coarse<F: Real>(
    crr: &CoarseRenderer<F>,
    grid: &FeatureGrid<F>,
    origin: Vec3<F>,
    dir: Vec3<F>,
    samples: &RaySamples<F>,
) -> Result<(Vec<F>, [F; 3], Vec<F>)> {
    let rays = RayBatch {
        origins: vec![origin],
        dirs: vec![dir],
        n_samples: samples.t.len(),
        t: samples.t.clone(),
        delta: samples.delta.clone(),
    };
    let (out, _) = crr.forward(grid, &rays)?;
    Ok((out.f_ray, [out.color[0], out.color[1], out.color[2]], out.weights))
}
