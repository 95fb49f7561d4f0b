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

/// Per-sample density over `[γ(X), G_coar(X) ⊕ G_fine(X)]` and per-sample
/// colour from `[f_X, γ(d)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FineRenderer<F> {
    pub sigma_net: Mlp<F>,
    pub color_net: Mlp<F>,
    pub pos_enc: EncodingSpec,
    pub dir_enc: EncodingSpec,
    pub feature_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineOutput<F> {
    /// `(rays, 3)`
    pub color: Vec<F>,
    /// `(rays, n_samples)`
    pub weights: Vec<F>,
    pub sigma: Vec<F>,
    /// `(rays, n_samples, 3)`
    pub sample_colors: Vec<F>,
}

#[derive(Debug, Clone)]
pub struct FineTrace<F> {
    raw: Vec<F>,
    transmittance: Vec<F>,
    sigma_trace: MlpTrace<F>,
    color_trace: MlpTrace<F>,
}

impl<F: Real> FineRenderer<F> {
    pub fn new<R: Rng + ?Sized>(
        grid_dim: usize,
        hidden: usize,
        feature_dim: usize,
        pos_enc: EncodingSpec,
        dir_enc: EncodingSpec,
        rng: &mut R,
    ) -> Self {
        let mut sigma_net = Mlp::new(
            "fvr.sigma",
            &[pos_enc.output_dim(3) + grid_dim, hidden, 1 + feature_dim],
            rng,
        );
        sigma_net.layers.last_mut().unwrap().bias.values[0] = F::lit(-1.0);
        let color_net = Mlp::new(
            "fvr.color",
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
        coarse_grid: &FeatureGrid<F>,
        fine_grid: &FeatureGrid<F>,
        rays: &RayBatch<F>,
    ) -> Result<(FineOutput<F>, FineTrace<F>)> {
        let n = rays.n_samples;
        let n_rays = rays.len();
        let rows = n_rays * n;
        let pos_dim = self.pos_enc.output_dim(3);
        let (gc, gf) = (coarse_grid.feature_dim(), fine_grid.feature_dim());
        let in_dim = pos_dim + gc + gf;
        if in_dim != self.sigma_net.in_dim() {
            return Err(contract("fine density network does not match grid widths"));
        }
        let mut input = vec![F::zero(); rows * in_dim];
        for r in 0..n_rays {
            for s in 0..n {
                let p = rays.point(r, s);
                let row = &mut input[(r * n + s) * in_dim..(r * n + s + 1) * in_dim];
                self.pos_enc
                    .encode_into(&coarse_grid.bounds.normalize(&p).0, &mut row[..pos_dim]);
                coarse_grid.query_into(&p, &mut row[pos_dim..pos_dim + gc]);
                fine_grid.query_into(&p, &mut row[pos_dim + gc..]);
            }
        }
        let (raw, sigma_trace) = self.sigma_net.forward_batch(&input, rows)?;
        drop(input);
        let fd = self.feature_dim;
        let out_w = 1 + fd;
        let dir_dim = self.dir_enc.output_dim(3);
        let sigma: Vec<F> = (0..rows).map(|i| softplus(raw[i * out_w])).collect();

        let c_in_dim = fd + dir_dim;
        let mut color_in = vec![F::zero(); rows * c_in_dim];
        let mut dir_code = vec![F::zero(); dir_dim];
        for r in 0..n_rays {
            self.dir_enc.encode_into(&rays.dirs[r].0, &mut dir_code);
            for s in 0..n {
                let row = r * n + s;
                let ci = &mut color_in[row * c_in_dim..(row + 1) * c_in_dim];
                ci[..fd].copy_from_slice(&raw[row * out_w + 1..(row + 1) * out_w]);
                ci[fd..].copy_from_slice(&dir_code);
            }
        }
        let (logits, color_trace) = self.color_net.forward_batch(&color_in, rows)?;
        drop(color_in);
        let sample_colors: Vec<F> = logits.iter().map(|z| sigmoid(*z)).collect();

        let mut weights = Vec::with_capacity(rows);
        let mut transmittance = Vec::with_capacity(rows);
        let mut color = vec![F::zero(); n_rays * 3];
        for r in 0..n_rays {
            let range = r * n..(r + 1) * n;
            let (t, w) = transmittance_weights(&sigma[range.clone()], &rays.delta[range]);
            for (s, wi) in w.iter().enumerate() {
                let row = r * n + s;
                for k in 0..3 {
                    color[r * 3 + k] += *wi * sample_colors[row * 3 + k];
                }
            }
            weights.extend(w);
            transmittance.extend(t);
        }
        Ok((
            FineOutput {
                color,
                weights,
                sigma,
                sample_colors,
            },
            FineTrace {
                raw,
                transmittance,
                sigma_trace,
                color_trace,
            },
        ))
    }

    pub fn backward(
        &mut self,
        coarse_grid: &mut FeatureGrid<F>,
        fine_grid: &mut FeatureGrid<F>,
        rays: &RayBatch<F>,
        out: &FineOutput<F>,
        trace: &FineTrace<F>,
        grad_color: &[F],
    ) -> Result<RayGrads<F>> {
        let n = rays.n_samples;
        let n_rays = rays.len();
        let rows = n_rays * n;
        let fd = self.feature_dim;
        let out_w = 1 + fd;
        let dir_dim = self.dir_enc.output_dim(3);
        if grad_color.len() != n_rays * 3 {
            return Err(contract("fine colour gradient has the wrong length"));
        }
        let mut grads = RayGrads::zeros(n_rays);

        let mut gz = vec![F::zero(); rows * 3];
        let mut g_raw = vec![F::zero(); rows * out_w];
        let mut g_sigma_all = vec![F::zero(); rows];
        for r in 0..n_rays {
            let gc = &grad_color[r * 3..r * 3 + 3];
            let range = r * n..(r + 1) * n;
            let mut g_w = vec![F::zero(); n];
            for s in 0..n {
                let row = r * n + s;
                let c = &out.sample_colors[row * 3..row * 3 + 3];
                let w = out.weights[row];
                g_w[s] = c[0] * gc[0] + c[1] * gc[1] + c[2] * gc[2];
                for k in 0..3 {
                    gz[row * 3 + k] = w * gc[k] * c[k] * (F::one() - c[k]);
                }
            }
            let g_sigma = transmittance_backward(
                &out.sigma[range.clone()],
                &rays.delta[range.clone()],
                &trace.transmittance[range.clone()],
                &out.weights[range.clone()],
                &g_w,
            );
            g_sigma_all[range].copy_from_slice(&g_sigma);
        }
        let g_color_in = self.color_net.backward_batch(&trace.color_trace, &gz)?;
        drop(gz);
        let c_in_dim = fd + dir_dim;
        for r in 0..n_rays {
            let mut g_code = vec![F::zero(); dir_dim];
            for s in 0..n {
                let row = r * n + s;
                let gi = &g_color_in[row * c_in_dim..(row + 1) * c_in_dim];
                g_raw[row * out_w] = g_sigma_all[row] * sigmoid(trace.raw[row * out_w]);
                g_raw[row * out_w + 1..(row + 1) * out_w].copy_from_slice(&gi[..fd]);
                for (a, b) in g_code.iter_mut().zip(&gi[fd..]) {
                    *a += *b;
                }
            }
            let mut gd = [F::zero(); 3];
            self.dir_enc.backward_into(&rays.dirs[r].0, &g_code, &mut gd);
            grads.dirs[r] += Vec3(gd);
        }
        drop(g_color_in);

        let g_in = self.sigma_net.backward_batch(&trace.sigma_trace, &g_raw)?;
        let pos_dim = self.pos_enc.output_dim(3);
        let gc_dim = coarse_grid.feature_dim();
        let in_dim = self.sigma_net.in_dim();
        let scale = coarse_grid.bounds.normalize_scale();
        for r in 0..n_rays {
            for s in 0..n {
                let row = r * n + s;
                let gi = &g_in[row * in_dim..(row + 1) * in_dim];
                let p = rays.point(r, s);
                let mut gn = [F::zero(); 3];
                self.pos_enc.backward_into(
                    &coarse_grid.bounds.normalize(&p).0,
                    &gi[..pos_dim],
                    &mut gn,
                );
                let mut gp = Vec3([gn[0] * scale[0], gn[1] * scale[1], gn[2] * scale[2]]);
                gp += coarse_grid.backward_point(&p, &gi[pos_dim..pos_dim + gc_dim]);
                gp += fine_grid.backward_point(&p, &gi[pos_dim + gc_dim..]);
                scatter_point_grad(&mut grads, r, rays.t[row], gp);
            }
        }
        Ok(grads)
    }

    pub fn cast<G: Real>(&self) -> FineRenderer<G> {
        FineRenderer {
            sigma_net: self.sigma_net.cast(),
            color_net: self.color_net.cast(),
            pos_enc: self.pos_enc,
            dir_enc: self.dir_enc,
            feature_dim: self.feature_dim,
        }
    }
}

impl<F> Parameters<F> for FineRenderer<F> {
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

/// Renders one ray on merged depths; returns the composited colour.
pub fn render_ray_fine<F: Real>(
    fvr: &FineRenderer<F>,
    grids: (&FeatureGrid<F>, &FeatureGrid<F>),
    origin: Vec3<F>,
    dir: Vec3<F>,
    samples: &RaySamples<F>,
) -> Result<[F; 3]> {
    let rays = RayBatch {
        origins: vec![origin],
        dirs: vec![dir],
        n_samples: samples.t.len(),
        t: samples.t.clone(),
        delta: samples.delta.clone(),
    };
    let (out, _) = fvr.forward(grids.0, grids.1, &rays)?;
    Ok([out.color[0], out.color[1], out.color[2]])
}
