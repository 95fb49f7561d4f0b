//! Central finite-difference checks for every hand-written backward pass.
//!
//! All checks run in `f64` on small random instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blur::{
    blend_backward, blend_batch, gamma_derivative, gamma_encode, pbe_backward, pbe_stage1,
    pbe_stage2, BlurKernelState, KernelGrads, KernelRays, PbeNet,
};
use crate::encoding::EncodingSpec;
use crate::error::Result;
use crate::field::FeatureGrid;
use crate::geometry::{stratified_samples, Aabb, Camera};
use crate::mlp::Mlp;
use crate::renderer::{transmittance_backward, transmittance_weights};
use crate::renderer::{CoarseRenderer, FineRenderer, RayBatch};
use crate::tensor::Parameters;
use crate::trainer::{
    photometric_grad, photometric_loss, shard_loss, shard_loss_and_grad, Architecture, Model,
    PixelBatch, SceneGeometry, StepOptions,
};
use crate::vec3::Vec3;

pub const FD_STEP: f64 = 1e-4;
pub const REL_TOL: f64 = 1e-3;
pub const ABS_FLOOR: f64 = 1e-6;

/// `(f(h) - f(-h)) / 2h`
pub fn central_difference(mut f: impl FnMut(f64) -> f64, h: f64) -> f64 {
    (f(h) - f(-h)) / (2.0 * h)
}

/// Step used to tell a kink inside `[-FD_STEP, FD_STEP]` from a wrong
/// gradient.
pub const REFINED_STEP: f64 = 1e-6;

/// Central difference at `h`, both one-sided differences and the central
/// difference at [`REFINED_STEP`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Differences {
    pub central: f64,
    pub forward: f64,
    pub backward: f64,
    pub refined: f64,
}

pub fn differences(mut f: impl FnMut(f64) -> f64, h: f64) -> Differences {
    let (up, mid, down) = (f(h), f(0.0), f(-h));
    Differences {
        central: (up - down) / (2.0 * h),
        forward: (up - mid) / h,
        backward: (mid - down) / h,
        refined: central_difference(&mut f, REFINED_STEP),
    }
}

fn loosely_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= 10.0 * ABS_FLOOR + 1e-2 * a.abs().max(b.abs())
}

pub fn grads_agree(analytic: f64, numeric: f64) -> bool {
    let d = (analytic - numeric).abs();
    d <= ABS_FLOOR || d <= REL_TOL * analytic.abs().max(numeric.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub label: String,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradReport {
    pub checks: usize,
    /// Checks where either gradient is above the absolute floor.
    pub nonzero: usize,
    /// Probes whose step straddled a ReLU, clamp or grid-cell kink: the
    /// analytic value misses the central difference but equals a one-sided
    /// slope, or the central difference at [`REFINED_STEP`]. Not counted in
    /// `checks`.
    pub kinks: usize,
    pub mismatches: Vec<Mismatch>,
}

impl GradReport {
    pub fn compare(&mut self, label: impl FnOnce() -> String, analytic: f64, numeric: f64) {
        self.checks += 1;
        if analytic.abs().max(numeric.abs()) > ABS_FLOOR {
            self.nonzero += 1;
        }
        if !grads_agree(analytic, numeric) {
            self.mismatches.push(Mismatch {
                label: label(),
                analytic,
                numeric,
            });
        }
    }

    /// Like [`GradReport::compare`], but classifies a kink-straddling probe
    /// separately instead of comparing against the central difference.
    pub fn compare_differences(&mut self, label: impl FnOnce() -> String, analytic: f64, d: Differences) {
        let one_sided = !loosely_equal(d.forward, d.backward)
            && (loosely_equal(analytic, d.forward) || loosely_equal(analytic, d.backward));
        if !grads_agree(analytic, d.central) && (one_sided || grads_agree(analytic, d.refined)) {
            self.kinks += 1;
            return;
        }
        self.compare(label, analytic, d.central);
    }

    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn merge(&mut self, other: GradReport) {
        self.checks += other.checks;
        self.nonzero += other.nonzero;
        self.kinks += other.kinks;
        self.mismatches.extend(other.mismatches);
    }
}

/// Which entries of each tensor or input vector to probe.
#[derive(Debug, Clone, Copy)]
pub enum Probe {
    All,
    /// Up to `n` random entries, at least half with a nonzero analytic
    /// gradient when there are any.
    Random(usize),
}

fn pick(grad: &[f64], probe: Probe, rng: &mut ChaCha8Rng) -> Vec<usize> {
    match probe {
        Probe::All => (0..grad.len()).collect(),
        Probe::Random(n) => {
            if grad.len() <= n {
                return (0..grad.len()).collect();
            }
            let live: Vec<usize> = (0..grad.len()).filter(|i| grad[*i] != 0.0).collect();
            let mut out = Vec::with_capacity(n);
            for k in 0..n {
                let i = if k % 2 == 0 && !live.is_empty() {
                    live[rng.gen_range(0..live.len())]
                } else {
                    rng.gen_range(0..grad.len())
                };
                if !out.contains(&i) {
                    out.push(i);
                }
            }
            out
        }
    }
}

/// Compares the gradients stored in `with_grads` against finite differences
/// of `loss` over its parameter values.
pub fn check_params<M: Clone + Parameters<f64>>(
    report: &mut GradReport,
    label: &str,
    with_grads: &M,
    probe: Probe,
    rng: &mut ChaCha8Rng,
    loss: impl Fn(&M) -> f64,
) {
    let tensors: Vec<(String, Vec<f64>)> = with_grads
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.grad.clone()))
        .collect();
    for (pi, (name, grad)) in tensors.iter().enumerate() {
        for j in pick(grad, probe, rng) {
            let d = differences(
                |d| {
                    let mut m = with_grads.clone();
                    m.params_mut()[pi].values[j] += d;
                    loss(&m)
                },
                FD_STEP,
            );
            report.compare_differences(|| format!("{label}: {name}[{j}]"), grad[j], d);
        }
    }
}

/// Same for a flat input vector.
pub fn check_inputs(
    report: &mut GradReport,
    label: &str,
    x: &[f64],
    grad: &[f64],
    probe: Probe,
    rng: &mut ChaCha8Rng,
    loss: impl Fn(&[f64]) -> f64,
) {
    for j in pick(grad, probe, rng) {
        let d = differences(
            |d| {
                let mut y = x.to_vec();
                y[j] += d;
                loss(&y)
            },
            FD_STEP,
        );
        report.compare_differences(|| format!("{label}[{j}]"), grad[j], d);
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn flatten(v: &[Vec3<f64>]) -> Vec<f64> {
    v.iter().flat_map(|p| p.0).collect()
}

fn unflatten(v: &[f64]) -> Vec<Vec3<f64>> {
    v.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
}

/// Zero biases put whole layers exactly on the ReLU kink when the layer
/// below is dead; random ones avoid that.
fn randomize_biases<M: Parameters<f64>>(m: &mut M, rng: &mut ChaCha8Rng) {
    for p in m.params_mut() {
        if p.name.ends_with(".bias") {
            p.values = uniform(rng, p.values.len(), -0.2, 0.2);
        }
    }
}

fn micro_bounds() -> Aabb<f64> {
    Aabb::new(Vec3::new(-1.5, -1.5, -1.5), Vec3::new(1.5, 1.5, 1.5))
}

fn mlp_checks(rng: &mut ChaCha8Rng, report: &mut GradReport) -> Result<()> {
    let dims = [4, 6, 5, 3];
    let rows = 3;
    let mut net = Mlp::<f64>::new("mlp", &dims, rng);
    randomize_biases(&mut net, rng);
    let x = uniform(rng, rows * dims[0], -1.0, 1.0);
    let r = uniform(rng, rows * 3, -1.0, 1.0);
    let loss = |n: &Mlp<f64>, x: &[f64]| dot(&n.forward_batch(x, rows).unwrap().0, &r);
    let (_, trace) = net.forward_batch(&x, rows)?;
    let mut g = net.clone();
    let gx = g.backward_batch(&trace, &r)?;
    check_params(report, "mlp", &g, Probe::Random(4), rng, |m| loss(m, &x));
    check_inputs(report, "mlp input", &x, &gx, Probe::All, rng, |x| loss(&net, x));
    Ok(())
}

fn grid_checks(rng: &mut ChaCha8Rng, report: &mut GradReport) {
    let grid = FeatureGrid::new("grid", [4, 5, 3], [2, 3, 2], micro_bounds(), 1.0, rng);
    let points = uniform(rng, 9, -1.4, 1.4);
    let r = uniform(rng, 3 * grid.feature_dim(), -1.0, 1.0);
    let fd = grid.feature_dim();
    let loss = |g: &FeatureGrid<f64>, pts: &[f64]| -> f64 {
        unflatten(pts)
            .iter()
            .enumerate()
            .map(|(k, p)| dot(&g.query(p), &r[k * fd..(k + 1) * fd]))
            .sum()
    };
    let mut g = grid.clone();
    let gp: Vec<Vec3<f64>> = unflatten(&points)
        .iter()
        .enumerate()
        .map(|(k, p)| g.backward_point(p, &r[k * fd..(k + 1) * fd]))
        .collect();
    check_params(report, "grid_query", &g, Probe::Random(6), rng, |m| loss(m, &points));
    check_inputs(report, "grid_query point", &points, &flatten(&gp), Probe::All, rng, |x| {
        loss(&grid, x)
    });

    let mut t = grid.clone();
    t.tv_backward(1.0);
    check_params(report, "tv_loss", &t, Probe::Random(6), rng, |m| m.tv_loss());
}

fn transmittance_checks(rng: &mut ChaCha8Rng, report: &mut GradReport) {
    for _ in 0..2 {
        let n = 8;
        let sigma = uniform(rng, n, 0.0, 3.0);
        let delta = uniform(rng, n, 0.05, 0.5);
        let r = uniform(rng, n, -1.0, 1.0);
        let (t, w) = transmittance_weights(&sigma, &delta);
        let g = transmittance_backward(&sigma, &delta, &t, &w, &r);
        check_inputs(report, "transmittance sigma", &sigma, &g, Probe::All, rng, |s| {
            dot(&transmittance_weights(s, &delta).1, &r)
        });
    }
}

struct RayFixture {
    origins: Vec<f64>,
    dirs: Vec<f64>,
    depths: Vec<Vec<f64>>,
    far: f64,
}

impl RayFixture {
    fn new(rng: &mut ChaCha8Rng, rays: usize, samples: usize) -> Self {
        let (near, far) = (1.0, 4.0);
        let mut origins = Vec::new();
        let mut dirs = Vec::new();
        let mut depths = Vec::new();
        for _ in 0..rays {
            origins.extend([
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
                2.5 + rng.gen_range(-0.2..0.2),
            ]);
            let d = Vec3::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), -1.0).normalized();
            dirs.extend(d.0);
            depths.push(stratified_samples(near, far, samples, Some(&mut *rng)).unwrap());
        }
        Self {
            origins,
            dirs,
            depths,
            far,
        }
    }

    fn batch(&self, origins: &[f64], dirs: &[f64]) -> RayBatch<f64> {
        RayBatch::new(unflatten(origins), unflatten(dirs), &self.depths, self.far)
    }
}

fn coarse_checks(rng: &mut ChaCha8Rng, report: &mut GradReport) -> Result<()> {
    let pos = EncodingSpec::new(2, true);
    let dir = EncodingSpec::new(1, true);
    let grid = FeatureGrid::new("grid", [5; 3], [2, 2, 2], micro_bounds(), 0.5, rng);
    let mut crr = CoarseRenderer::<f64>::new(6, 8, 4, pos, dir, rng);
    randomize_biases(&mut crr, rng);
    let fx = RayFixture::new(rng, 3, 6);
    let rc = uniform(rng, 9, -1.0, 1.0);
    let rf = uniform(rng, 12, -1.0, 1.0);
    let loss = |c: &CoarseRenderer<f64>, g: &FeatureGrid<f64>, o: &[f64], d: &[f64]| {
        let (out, _) = c.forward(g, &fx.batch(o, d)).unwrap();
        dot(&out.color, &rc) + dot(&out.f_ray, &rf)
    };
    let rays = fx.batch(&fx.origins, &fx.dirs);
    let (out, trace) = crr.forward(&grid, &rays)?;
    let (mut gc, mut gg) = (crr.clone(), grid.clone());
    let rg = gc.backward(&mut gg, &rays, &out, &trace, &rc, Some(&rf))?;
    check_params(report, "crr", &gc, Probe::Random(3), rng, |m| {
        loss(m, &grid, &fx.origins, &fx.dirs)
    });
    check_params(report, "crr grid", &gg, Probe::Random(4), rng, |m| {
        loss(&crr, m, &fx.origins, &fx.dirs)
    });
    check_inputs(report, "crr origin", &fx.origins, &flatten(&rg.origins), Probe::All, rng, |o| {
        loss(&crr, &grid, o, &fx.dirs)
    });
    check_inputs(report, "crr dir", &fx.dirs, &flatten(&rg.dirs), Probe::All, rng, |d| {
        loss(&crr, &grid, &fx.origins, d)
    });
    Ok(())
}

fn fine_checks(rng: &mut ChaCha8Rng, report: &mut GradReport) -> Result<()> {
    let pos = EncodingSpec::new(2, true);
    let dir = EncodingSpec::new(1, true);
    let gc = FeatureGrid::new("coarse", [4; 3], [2, 2, 2], micro_bounds(), 0.5, rng);
    let gf = FeatureGrid::new("fine", [6; 3], [2, 2, 2], micro_bounds(), 0.5, rng);
    let mut fvr = FineRenderer::<f64>::new(12, 8, 4, pos, dir, rng);
    randomize_biases(&mut fvr, rng);
    let fx = RayFixture::new(rng, 3, 6);
    let r = uniform(rng, 9, -1.0, 1.0);
    let loss = |f: &FineRenderer<f64>, c: &FeatureGrid<f64>, g: &FeatureGrid<f64>, o: &[f64], d: &[f64]| {
        dot(&f.forward(c, g, &fx.batch(o, d)).unwrap().0.color, &r)
    };
    let rays = fx.batch(&fx.origins, &fx.dirs);
    let (out, trace) = fvr.forward(&gc, &gf, &rays)?;
    let (mut a, mut b, mut c) = (fvr.clone(), gc.clone(), gf.clone());
    let rg = a.backward(&mut b, &mut c, &rays, &out, &trace, &r)?;
    let (o, d) = (&fx.origins, &fx.dirs);
    check_params(report, "fvr", &a, Probe::Random(3), rng, |m| loss(m, &gc, &gf, o, d));
    check_params(report, "fvr coarse grid", &b, Probe::Random(3), rng, |m| {
        loss(&fvr, m, &gf, o, d)
    });
    check_params(report, "fvr fine grid", &c, Probe::Random(3), rng, |m| {
        loss(&fvr, &gc, m, o, d)
    });
    check_inputs(report, "fvr origin", o, &flatten(&rg.origins), Probe::All, rng, |x| {
        loss(&fvr, &gc, &gf, x, d)
    });
    check_inputs(report, "fvr dir", d, &flatten(&rg.dirs), Probe::All, rng, |x| {
        loss(&fvr, &gc, &gf, o, x)
    });
    Ok(())
}

fn micro_cameras() -> Vec<Camera<f64>> {
    let up = Vec3::new(0.0, 1.0, 0.0);
    let target = Vec3::zero();
    vec![
        Camera::look_at(Vec3::new(0.3, 0.8, 3.0), target, up, 20.0, 16, 16),
        Camera::look_at(Vec3::new(-2.0, 0.5, 2.2), target, up, 20.0, 16, 16),
    ]
}

struct KernelProbe {
    origins: Vec<f64>,
    dirs: Vec<f64>,
    weights: Vec<f64>,
    kernel: Vec<f64>,
}

impl KernelProbe {
    fn new(rng: &mut ChaCha8Rng, rows: usize) -> Self {
        Self {
            origins: uniform(rng, rows * 3, -1.0, 1.0),
            dirs: uniform(rng, rows * 3, -1.0, 1.0),
            weights: uniform(rng, rows, -1.0, 1.0),
            kernel: uniform(rng, rows * 2, -1.0, 1.0),
        }
    }

    fn eval(&self, k: &KernelRays<f64>) -> f64 {
        let kernel: Vec<f64> = k.kernel.iter().flatten().copied().collect();
        dot(&flatten(&k.origins), &self.origins)
            + dot(&flatten(&k.dirs), &self.dirs)
            + dot(&k.weights, &self.weights)
            + dot(&kernel, &self.kernel)
    }

    fn grads(&self) -> KernelGrads<f64> {
        KernelGrads {
            origins: unflatten(&self.origins),
            dirs: unflatten(&self.dirs),
            weights: self.weights.clone(),
            kernel: self.kernel.chunks(2).map(|c| [c[0], c[1]]).collect(),
        }
    }
}

fn pbe_checks(rng: &mut ChaCha8Rng, report: &mut GradReport) -> Result<()> {
    let cams = micro_cameras();
    let p = 3;
    let state = BlurKernelState::<f64>::new(2, p, 4, rng);
    let mut net = PbeNet::<f64>::new(4, 3, 6, 3.0, rng);
    randomize_biases(&mut net, rng);
    // undo the small output init so the tanh/clamp heads are exercised
    net.net.scale_output_layer(60.0);
    let views = vec![0, 1];
    let pixels = vec![[5.3, 7.1], [10.2, 3.7]];
    let probe = KernelProbe::new(rng, views.len() * p);

    // stage one
    let loss1 = |s: &BlurKernelState<f64>, n: &PbeNet<f64>| {
        probe.eval(&pbe_stage1(s, n, &cams, &views, &pixels).unwrap().0)
    };
    let (k1, t1) = pbe_stage1(&state, &net, &cams, &views, &pixels)?;
    let (mut s, mut n) = (state.clone(), net.clone());
    pbe_backward(&mut s, &mut n, &cams, &k1, &t1, &probe.grads())?;
    check_params(report, "pbe stage1 state", &s, Probe::All, rng, |m| loss1(m, &net));
    check_params(report, "pbe stage1 head", &n, Probe::Random(4), rng, |m| loss1(&state, m));

    // stage two, with the stage-one kernel and ray features as inputs
    let feats = uniform(rng, views.len() * p * 3, -1.0, 1.0);
    let kin: Vec<f64> = k1.kernel.iter().flatten().copied().collect();
    let loss2 = |s: &BlurKernelState<f64>, n: &PbeNet<f64>, kin: &[f64], f: &[f64]| {
        let mut base = k1.clone();
        base.kernel = kin.chunks(2).map(|c| [c[0], c[1]]).collect();
        probe.eval(&pbe_stage2(s, n, &cams, &base, f).unwrap().0)
    };
    let (k2, t2) = pbe_stage2(&state, &net, &cams, &k1, &feats)?;
    let (mut s, mut n) = (state.clone(), net.clone());
    let gin = pbe_backward(&mut s, &mut n, &cams, &k2, &t2, &probe.grads())?;
    check_params(report, "pbe stage2 state", &s, Probe::All, rng, |m| {
        loss2(m, &net, &kin, &feats)
    });
    check_params(report, "pbe stage2 head", &n, Probe::Random(4), rng, |m| {
        loss2(&state, m, &kin, &feats)
    });
    let gk: Vec<f64> = gin.kernel_in.iter().flatten().copied().collect();
    check_inputs(report, "pbe stage2 kernel_in", &kin, &gk, Probe::All, rng, |x| {
        loss2(&state, &net, x, &feats)
    });
    check_inputs(report, "pbe stage2 features", &feats, &gin.features, Probe::All, rng, |x| {
        loss2(&state, &net, &kin, x)
    });
    Ok(())
}

fn blend_checks(rng: &mut ChaCha8Rng, report: &mut GradReport) {
    let p = 3;
    for gamma in [true, false] {
        let colors = uniform(rng, 2 * p * 3, 0.05, 0.95);
        let weights = uniform(rng, 2 * p, 0.1, 0.6);
        let r = uniform(rng, 6, -1.0, 1.0);
        let (_, lin) = blend_batch(&colors, &weights, p, gamma);
        let (gc, gw) = blend_backward(&colors, &weights, p, &lin, gamma, &r);
        let label = if gamma { "blend+gamma" } else { "blend" };
        check_inputs(report, &format!("{label} colors"), &colors, &gc, Probe::All, rng, |c| {
            dot(&blend_batch(c, &weights, p, gamma).0, &r)
        });
        check_inputs(report, &format!("{label} weights"), &weights, &gw, Probe::All, rng, |w| {
            dot(&blend_batch(&colors, w, p, gamma).0, &r)
        });
    }
    let xs = uniform(rng, 6, 0.02, 1.0);
    let gs: Vec<f64> = xs.iter().map(|x| gamma_derivative(*x)).collect();
    for (j, x) in xs.iter().enumerate() {
        let d = differences(|d| gamma_encode(x + d), FD_STEP);
        report.compare_differences(|| format!("gamma[{j}]"), gs[j], d);
    }
}

fn loss_checks(rng: &mut ChaCha8Rng, report: &mut GradReport) {
    let pred = uniform(rng, 12, 0.0, 1.0);
    let target = uniform(rng, 12, 0.0, 1.0);
    // photometric_loss is a mean over the 4 pixels
    let g = photometric_grad(&pred, &target, 0.25);
    check_inputs(report, "photometric", &pred, &g, Probe::All, rng, |x| {
        photometric_loss(x, &target)
    });
}

/// Layout of the end-to-end micro fixture: 2 pixels, `P = 2`,
/// `N_c = 4`, `N_f = 2`, 8³ grids.
pub fn micro_architecture(blur_model: bool) -> Architecture {
    Architecture {
        kernel_size: if blur_model { 2 } else { 1 },
        views: 2,
        embed_dim: 4,
        feature_dim: 3,
        pbe_hidden: 6,
        crr_hidden: 6,
        fvr_hidden: 6,
        pos_bands: 1,
        dir_bands: 1,
        coarse_resolution: 8,
        fine_resolution: 8,
        grid_channels: [2, 2, 2],
        n_coarse: 4,
        n_fine: 2,
        gamma_correct: true,
        blur_model,
    }
}

fn micro_geometry() -> SceneGeometry {
    SceneGeometry {
        bounds: micro_bounds().cast(),
        near: 1.0,
        far: 5.0,
        width: 16,
        height: 16,
        focal: 20.0,
        cx: 8.0,
        cy: 8.0,
    }
}

fn end_to_end_checks(
    rng: &mut ChaCha8Rng,
    report: &mut GradReport,
    blur_model: bool,
    single_stage: bool,
) -> Result<()> {
    let mut model = Model::<f64>::new(micro_architecture(blur_model), micro_geometry(), rng.gen());
    model.pbe.net.scale_output_layer(30.0);
    randomize_biases(&mut model.crr, rng);
    randomize_biases(&mut model.fvr, rng);
    randomize_biases(&mut model.pbe, rng);
    // dense enough that blends stay away from the steep part of the gamma curve
    model.crr.sigma_net.layers.last_mut().unwrap().bias.values[0] = 1.5;
    model.fvr.sigma_net.layers.last_mut().unwrap().bias.values[0] = 1.5;
    for f in &mut model.grid_coarse.factors {
        f.values = uniform(rng, f.values.len(), -0.8, 0.8);
    }
    let cams = micro_cameras();
    let batch = PixelBatch {
        views: vec![0, 1],
        pixels: vec![[6.5, 8.5], [9.5, 7.5]],
        targets: uniform(rng, 6, 0.0, 1.0),
    };
    let free = StepOptions {
        single_stage,
        loss_scale: 0.5,
        rng_seed: None,
        fine_depths: None,
    };
    let depths = shard_loss(&model, &cams, &batch, &free)?.fine_depths;
    let opts = StepOptions {
        fine_depths: Some(&depths),
        ..free
    };
    let mut g = model.clone();
    shard_loss_and_grad(&mut g, &cams, &batch, &opts)?;
    let label = match (blur_model, single_stage) {
        (false, _) => "end-to-end baseline",
        (true, true) => "end-to-end single-stage",
        (true, false) => "end-to-end two-stage",
    };
    check_params(report, label, &g, Probe::All, rng, |m| {
        let l = shard_loss(m, &cams, &batch, &opts).unwrap();
        l.crr() + l.fvr
    });
    Ok(())
}

/// Every FD check in the suite. The two-stage end-to-end fixture probes
/// every trainable scalar.
pub fn gradient_suite(seed: u64) -> Result<GradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradReport::default();
    for _ in 0..2 {
        mlp_checks(&mut rng, &mut report)?;
    }
    grid_checks(&mut rng, &mut report);
    transmittance_checks(&mut rng, &mut report);
    coarse_checks(&mut rng, &mut report)?;
    fine_checks(&mut rng, &mut report)?;
    pbe_checks(&mut rng, &mut report)?;
    blend_checks(&mut rng, &mut report);
    loss_checks(&mut rng, &mut report);
    end_to_end_checks(&mut rng, &mut report, true, false)?;
    end_to_end_checks(&mut rng, &mut report, true, true)?;
    end_to_end_checks(&mut rng, &mut report, false, false)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn difference_of_a_cubic() {
        let d = central_difference(|h| (2.0 + h).powi(3), 1e-4);
        assert!((d - 12.0).abs() < 1e-7);
    }

    #[test]
    fn kinks_are_classified_not_passed() {
        let relu = |x: f64| x.max(0.0);
        let mut r = GradReport::default();
        r.compare_differences(|| "at kink".into(), 0.0, differences(relu, 1e-4));
        assert_eq!((r.checks, r.kinks), (0, 1));
        // kink just inside the step
        r.compare_differences(|| "near".into(), 1.0, differences(|h| (h + 2e-5).max(0.0), 1e-4));
        assert_eq!((r.checks, r.kinks), (0, 2));
        // a wrong value is still a mismatch
        r.compare_differences(|| "wrong".into(), 3.0, differences(relu, 1e-4));
        assert_eq!(r.mismatches.len(), 1);
    }

    #[test]
    fn agreement_has_an_absolute_floor() {
        assert!(grads_agree(0.0, 5e-7));
        assert!(grads_agree(1.0, 1.0005));
        assert!(!grads_agree(1.0, 1.01));
    }
}
