//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails.
//!
//! `PDRF_ACCEPT=1,2,5` restricts the run to the listed criteria.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use pdrf::blur::{pbe_stage1, pbe_stage2, BlurKernelState, PbeNet, KERNEL_BOUND};
use pdrf::checkpoint;
use pdrf::field::FeatureGrid;
use pdrf::geometry::{importance_sample, stratified_samples, Aabb, Camera, RaySamples};
use pdrf::metrics::{psnr, psnr_from_mse, ssim, PSNR_CAP};
use pdrf::raster::Image;
use pdrf::renderer::{aggregate_features, render_ray_fine, transmittance_weights, FineRenderer, RayBatch};
use pdrf::encoding::EncodingSpec;
use pdrf::real::softplus;
use pdrf::scenes::{coc_map, make_dataset, read_manifest, write_manifest, BlurKind, BlurMeta, Preset, SceneSpec};
use pdrf::trainer::{evaluate_heldout, train, variance_map, Model, TrainConfig};
use pdrf::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

type Outcome = Result<String, String>;

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 1
fn gradient_suite() -> Outcome {
    let t0 = Instant::now();
    let report = pdrf::verify::gradient_suite(7).map_err(|e| e.to_string())?;
    let secs = t0.elapsed().as_secs_f64();
    let detail = format!(
        "{} checks ({} nonzero, {} kinks), {} mismatches, {secs:.1}s",
        report.checks,
        report.nonzero,
        report.kinks,
        report.mismatches.len()
    );
    check(report.passed() && report.checks >= 200 && secs < 60.0, detail)
}

/// Alpha compositing written as a product of survival probabilities.
fn brute_force_color(sigma: &[f64], delta: &[f64], colors: &[[f64; 3]]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..sigma.len() {
        let mut survive = 1.0;
        for j in 0..i {
            survive *= (-sigma[j] * delta[j]).exp();
        }
        let alpha = 1.0 - (-sigma[i] * delta[i]).exp();
        for k in 0..3 {
            out[k] += survive * alpha * colors[i][k];
        }
    }
    out
}

// 2
fn rendering_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let bounds = Aabb::new(Vec3::new(-1.5, -1.5, -1.5), Vec3::new(1.5, 1.5, 1.5));
    let mut worst = 0.0f64;
    let mut instances = 0;
    while instances < 1000 {
        let gc = FeatureGrid::<f64>::new("c", [6; 3], [2, 2, 2], bounds, 0.5, &mut rng);
        let gf = FeatureGrid::<f64>::new("f", [9; 3], [2, 2, 2], bounds, 0.5, &mut rng);
        let mut fvr = FineRenderer::<f64>::new(12, 16, 4, EncodingSpec::new(3, true), EncodingSpec::new(2, true), &mut rng);
        // spread densities over several decades
        let gain = 10f64.powf(rng.gen_range(-1.0..1.5));
        for w in &mut fvr.sigma_net.layers.last_mut().unwrap().weight.values {
            *w *= gain;
        }
        for _ in 0..50 {
            let n = rng.gen_range(1..=32);
            let origin = Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), 2.5);
            let dir = Vec3::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), -1.0).normalized();
            let t = stratified_samples(1.0, 4.0, n, Some(&mut rng)).map_err(|e| e.to_string())?;
            let samples = RaySamples::new(origin, dir, t.clone(), 4.0);
            let got = render_ray_fine(&fvr, (&gc, &gf), origin, dir, &samples).map_err(|e| e.to_string())?;
            let rays = RayBatch::new(vec![origin], vec![dir], &[t], 4.0);
            let (out, _) = fvr.forward(&gc, &gf, &rays).map_err(|e| e.to_string())?;
            let colors: Vec<[f64; 3]> = out.sample_colors.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
            let want = brute_force_color(&out.sigma, &rays.delta, &colors);
            for k in 0..3 {
                worst = worst.max((got[k] - want[k]).abs());
            }
            instances += 1;
        }
    }
    check(worst <= 1e-12, format!("{instances} instances, max |error| {worst:.2e}"))
}

/// Pre-activation density of the spike sample.
const SPIKE_LOGIT: f64 = 1e3;

// 3
fn dirac_spike() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (near, far) = Preset::Spheres.depth_range();
    let dim = 15;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.gen_range(8..=64);
        let t = stratified_samples(near, far, n, Some(&mut rng)).map_err(|e| e.to_string())?;
        let delta = pdrf::geometry::deltas(&t, far);
        let spike = rng.gen_range(0..n);
        let mut sigma = vec![0.0; n];
        // deep in the linear regime of softplus
        sigma[spike] = softplus(SPIKE_LOGIT);
        let features: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, w) = transmittance_weights(&sigma, &delta);
        let f_ray = aggregate_features(&w, &features, dim);
        let f_spike = &features[spike * dim..(spike + 1) * dim];
        let err: f64 = f_ray.iter().zip(f_spike).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = f_spike.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(err / norm);
    }
    check(worst <= 0.01, format!("max relative error {:.3}%", worst * 100.0))
}

// 4
fn importance_sampler() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let bins = 64;
    let edges: Vec<f64> = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let pdf: Vec<f64> = (0..bins)
            .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..1.0f64).powi(3) })
            .collect();
        let total: f64 = pdf.iter().sum();
        let samples = importance_sample(&pdf, &edges, 100_000, Some(&mut rng));
        let mut hist = vec![0.0; bins];
        for s in &samples {
            hist[((s * bins as f64) as usize).min(bins - 1)] += 1.0 / samples.len() as f64;
        }
        let l1: f64 = hist.iter().zip(&pdf).map(|(h, p)| (h - p / total).abs()).sum();
        worst = worst.max(l1);
    }
    check(worst < 0.05, format!("20 pdfs, max L1 {worst:.4}"))
}

// 5
fn blur_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pixels_seen = 0;
    let mut worst_sum = 0.0f64;
    let mut worst_kernel = 0.0f64;
    let mut exact = true;
    while pixels_seen < 1000 {
        let views = 3;
        let p = rng.gen_range(2..=9);
        let mut state = BlurKernelState::<f64>::new(views, p, 8, &mut rng);
        let mut net = PbeNet::<f64>::new(8, 6, 16, 3.0, &mut rng);
        // large offsets and a loud head exercise the clamp
        for v in state.canonical_offsets.values.iter_mut().skip(2) {
            *v *= rng.gen_range(1.0..8.0);
        }
        net.net.scale_output_layer(rng.gen_range(10.0..400.0));
        let cams: Vec<Camera<f64>> = (0..views).map(|v| Preset::Spheres.camera(v as f64, 32)).collect();
        let n = 50;
        let vs: Vec<usize> = (0..n).map(|_| rng.gen_range(0..views)).collect();
        let px: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen_range(0.0..32.0), rng.gen_range(0.0..32.0)]).collect();
        let (s1, _) = pbe_stage1(&state, &net, &cams, &vs, &px).map_err(|e| e.to_string())?;
        let feats: Vec<f64> = (0..s1.num_rays() * 6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (s2, _) = pbe_stage2(&state, &net, &cams, &s1, &feats).map_err(|e| e.to_string())?;
        for rays in [&s1, &s2] {
            for w in rays.weights.chunks(p) {
                worst_sum = worst_sum.max((w.iter().sum::<f64>() - 1.0).abs());
            }
            for k in &rays.kernel {
                worst_kernel = worst_kernel.max(k[0].abs()).max(k[1].abs());
            }
        }
        // stage two fed the canonical kernel and zero features is stage one
        let mut canonical = s1.clone();
        for (b, &v) in vs.iter().enumerate() {
            for i in 0..p {
                let o = (v * p + i) * 2;
                let c = &state.canonical_offsets.values[o..o + 2];
                canonical.kernel[b * p + i] = [c[0].clamp(-KERNEL_BOUND, KERNEL_BOUND), c[1].clamp(-KERNEL_BOUND, KERNEL_BOUND)];
            }
        }
        let zeros = vec![0.0; s1.num_rays() * 6];
        let (again, _) = pbe_stage2(&state, &net, &cams, &canonical, &zeros).map_err(|e| e.to_string())?;
        exact &= again == s1;
        pixels_seen += n;
    }
    check(
        worst_sum <= 1e-6 && worst_kernel <= KERNEL_BOUND && exact,
        format!(
            "{pixels_seen} pixels, max |sum h - 1| {worst_sum:.1e}, max |offset| {worst_kernel:.2} px, zero-feature stage 2 {}",
            if exact { "bit-exact" } else { "differs" }
        ),
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrendFixture {
    data_seed: u64,
    train_seed: u64,
    preset: String,
    min_margin_db: f64,
    min_variance_ratio: f64,
    in_focus_coc_px: f64,
    out_of_focus_coc_px: f64,
}

fn trend_fixture() -> Result<TrendFixture, String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/trend.toml");
    let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

struct TrendRun {
    pdrf5: Option<Model<f32>>,
    ds: pdrf::scenes::SceneDataset,
}

// 6
fn defocus_trend(fx: &TrendFixture, keep: &mut Option<TrendRun>) -> Outcome {
    let ds = make_dataset(&SceneSpec {
        blur: BlurKind::Defocus,
        seed: fx.data_seed,
        ..SceneSpec::default()
    });
    let base = TrainConfig::load(&workspace().join(&fx.preset)).map_err(|e| e.to_string())?;
    let base = TrainConfig { seed: fx.train_seed, ..base };
    let variants = [
        ("PDRF-5", TrainConfig { kernel_size: 5, ..base.clone() }),
        ("single-5", TrainConfig { kernel_size: 5, single_stage: true, ..base.clone() }),
        ("baseline", TrainConfig { blur_model: false, ..base.clone() }),
    ];
    let mut scores = Vec::new();
    let mut pdrf5 = None;
    for (name, cfg) in variants {
        let t0 = Instant::now();
        let (model, _) = train(&ds, &cfg).map_err(|e| format!("{name}: {e}"))?;
        let report = evaluate_heldout(&model, &ds).map_err(|e| format!("{name}: {e}"))?;
        let secs = t0.elapsed().as_secs_f64();
        println!("    {name:<9} held-out PSNR {:.2} dB, SSIM {:.3} ({secs:.0}s)", report.mean_psnr, report.mean_ssim);
        scores.push((report.mean_psnr, secs));
        if name == "PDRF-5" {
            pdrf5 = Some(model);
        }
    }
    *keep = Some(TrendRun { pdrf5, ds });
    let (full, single, baseline) = (scores[0].0, scores[1].0, scores[2].0);
    let slowest = scores.iter().map(|s| s.1).fold(0.0, f64::max);
    check(
        full > single && single > baseline && full - baseline >= fx.min_margin_db && slowest < 1800.0,
        format!(
            "PDRF-5 {full:.2} / single-5 {single:.2} / baseline {baseline:.2} dB, margin {:.2} dB (need {:.1}), slowest run {slowest:.0}s",
            full - baseline,
            fx.min_margin_db
        ),
    )
}

// 7
fn variance_trend(fx: &TrendFixture, run: Option<&TrendRun>) -> Outcome {
    let run = run.ok_or("needs the PDRF-5 model from criterion 6")?;
    let model = run.pdrf5.as_ref().ok_or("PDRF-5 run missing")?;
    let scene = Preset::Spheres.scene();
    let cams = run.ds.training_cameras();
    let (mut inside, mut outside) = (Vec::new(), Vec::new());
    for (i, v) in run.ds.training().enumerate() {
        let BlurMeta::Defocus { aperture, focus_depth, .. } = v.blur else {
            return Err(format!("view {} is not defocused", v.name));
        };
        let var = variance_map(model, &cams, i).map_err(|e| e.to_string())?;
        for (r, s) in coc_map(&scene, &v.camera, aperture, focus_depth).iter().zip(&var) {
            match r {
                Some(r) if *r < fx.in_focus_coc_px => inside.push(f64::from(*s)),
                Some(r) if *r > fx.out_of_focus_coc_px => outside.push(f64::from(*s)),
                _ => {}
            }
        }
    }
    if inside.is_empty() || outside.is_empty() {
        return Err(format!("empty region ({} in focus, {} out of focus)", inside.len(), outside.len()));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mi, mo) = (mean(&inside), mean(&outside));
    let ratio = mo / mi;
    check(
        ratio >= fx.min_variance_ratio,
        format!(
            "out-of-focus {mo:.3e} ({} px) / in-focus {mi:.3e} ({} px) = {ratio:.2} (need {:.1})",
            outside.len(),
            inside.len(),
            fx.min_variance_ratio
        ),
    )
}

fn pdrf_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_pdrf"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn bytes(p: &Path) -> Result<Vec<u8>, String> {
    fs::read(p).map_err(|e| format!("{}: {e}", p.display()))
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

const SMALL: &str = "\
batch_rays = 32
n_coarse = 8
n_fine = 8
iterations = 20
coarse_resolution = 8
fine_resolution = 16
grid_channels = [8, 4, 4]
crr_hidden = 16
fvr_hidden = 32
pbe_hidden = 16
pos_bands = 4
dir_bands = 2
";

// 8
fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = tmp.path();
    let data = d.join("scene");
    pdrf_cli(&["make-scene", "--out", s(&data), "--views", "4", "--res", "24", "--seed", "5"])?;
    let cfg = d.join("small.toml");
    fs::write(&cfg, SMALL).map_err(|e| e.to_string())?;
    let mut ckpts = Vec::new();
    let mut renders = Vec::new();
    let mut evals = Vec::new();
    for run in ["a", "b"] {
        let ckpt = d.join(format!("{run}.pdrf"));
        pdrf_cli(&["train", "--data", s(&data), "--config", s(&cfg), "--out", s(&ckpt), "--threads", "1", "--seed", "11", "--quiet"])?;
        let rdir = d.join(format!("render_{run}"));
        pdrf_cli(&["render", "--ckpt", s(&ckpt), "--data", s(&data), "--out", s(&rdir)])?;
        let csv = d.join(format!("eval_{run}.csv"));
        pdrf_cli(&["eval", "--ckpt", s(&ckpt), "--data", s(&data), "--out", s(&csv)])?;
        ckpts.push(bytes(&ckpt)?);
        let mut pngs: Vec<PathBuf> = fs::read_dir(&rdir)
            .map_err(|e| e.to_string())?
            .map(|e| e.map(|e| e.path()).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        pngs.sort();
        renders.push(pngs.iter().map(|p| bytes(p)).collect::<Result<Vec<_>, _>>()?);
        evals.push(bytes(&csv)?);
    }
    let same_ckpt = ckpts[0] == ckpts[1];
    let same_render = !renders[0].is_empty() && renders[0] == renders[1];
    let same_eval = evals[0] == evals[1];
    check(
        same_ckpt && same_render && same_eval,
        format!(
            "checkpoint {}, {} rendered PNGs {}, eval CSV {}",
            verdict(same_ckpt),
            renders[0].len(),
            verdict(same_render),
            verdict(same_eval)
        ),
    )
}

fn verdict(same: bool) -> &'static str {
    if same {
        "identical"
    } else {
        "differs"
    }
}

// 9
fn round_trips() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = tmp.path();
    let ds = make_dataset(&SceneSpec {
        blur: BlurKind::Motion,
        views: 4,
        resolution: 16,
        seed: 9,
        ..SceneSpec::default()
    });
    let cfg = TrainConfig { kernel_size: 3, ..TrainConfig::default() };
    let model = Model::<f32>::new(
        pdrf::trainer::Architecture::from_config(&cfg, ds.training().count()),
        pdrf::trainer::SceneGeometry::from_dataset(&ds).map_err(|e| e.to_string())?,
        4,
    );
    let (a, b) = (d.join("a.pdrf"), d.join("b.pdrf"));
    model.save(&a).map_err(|e| e.to_string())?;
    Model::<f32>::load(&a).map_err(|e| e.to_string())?.save(&b).map_err(|e| e.to_string())?;
    let model_same = bytes(&a)? == bytes(&b)?;
    let c = d.join("c.pdrf");
    checkpoint::save(&c, &checkpoint::load(&a).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let records_same = bytes(&a)? == bytes(&c)?;

    let (m1, m2) = (d.join("m1"), d.join("m2"));
    write_manifest(&ds, &m1).map_err(|e| e.to_string())?;
    write_manifest(&read_manifest(&m1).map_err(|e| e.to_string())?, &m2).map_err(|e| e.to_string())?;
    let mut files: Vec<_> = fs::read_dir(&m1)
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.file_name()).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    files.sort();
    let mut dataset_same = !files.is_empty();
    for f in &files {
        dataset_same &= bytes(&m1.join(f))? == bytes(&m2.join(f))?;
    }
    check(
        model_same && records_same && dataset_same,
        format!(
            "model checkpoint {}, raw records {}, manifest + {} files {}",
            verdict(model_same),
            verdict(records_same),
            files.len(),
            verdict(dataset_same)
        ),
    )
}

/// Deterministic pseudo-random values in `[0, 1)`.
fn lcg(seed: u64, n: usize) -> Vec<f32> {
    let mut x = seed;
    (0..n)
        .map(|_| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 40) as f32 / (1u64 << 24) as f32
        })
        .collect()
}

/// Frozen SSIM of the fixture pair below.
const FROZEN_SSIM: f64 = 0.907_209_763_022_056_1;

/// Mean SSIM on luminance over every 11x11 window, Gaussian sigma 1.5,
/// evaluated directly with centred second moments.
fn ssim_oracle(a: &Image, b: &Image) -> f64 {
    let lum = |img: &Image, x: usize, y: usize| {
        let p = img.get(x, y);
        (f64::from(p[0]) + f64::from(p[1]) + f64::from(p[2])) / 3.0
    };
    let g: Vec<f64> = (0..11).map(|i| (-((i as f64 - 5.0).powi(2)) / 4.5).exp()).collect();
    let norm: f64 = g.iter().sum::<f64>().powi(2);
    let mut total = 0.0;
    let mut windows = 0;
    for oy in 0..=a.height - 11 {
        for ox in 0..=a.width - 11 {
            let w = |i: usize, j: usize| g[i] * g[j] / norm;
            let (mut mx, mut my) = (0.0, 0.0);
            for j in 0..11 {
                for i in 0..11 {
                    mx += w(i, j) * lum(a, ox + i, oy + j);
                    my += w(i, j) * lum(b, ox + i, oy + j);
                }
            }
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for j in 0..11 {
                for i in 0..11 {
                    let dx = lum(a, ox + i, oy + j) - mx;
                    let dy = lum(b, ox + i, oy + j) - my;
                    vx += w(i, j) * dx * dx;
                    vy += w(i, j) * dy * dy;
                    cxy += w(i, j) * dx * dy;
                }
            }
            let (c1, c2) = (1e-4, 9e-4);
            total += (2.0 * mx * my + c1) * (2.0 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            windows += 1;
        }
    }
    total / windows as f64
}

// 10
fn metric_fixtures() -> Outcome {
    let a = Image::from_data(16, 16, lcg(1, 16 * 16 * 3)).map_err(|e| e.to_string())?;
    let b = Image::from_data(
        16,
        16,
        a.data.iter().zip(lcg(2, 16 * 16 * 3)).map(|(v, n)| (v * 0.7 + 0.3 * n).clamp(0.0, 1.0)).collect(),
    )
    .map_err(|e| e.to_string())?;
    let identical_psnr = psnr(&a, &a).map_err(|e| e.to_string())?;
    let identical_ssim = ssim(&a, &a).map_err(|e| e.to_string())?;
    let black = Image::new(8, 8);
    let grey = Image::filled(8, 8, [0.1; 3]);
    let mse_psnr = psnr(&black, &grey).map_err(|e| e.to_string())?;
    let fixture = ssim(&a, &b).map_err(|e| e.to_string())?;
    let oracle = ssim_oracle(&a, &b);
    let ok = identical_psnr == PSNR_CAP
        && identical_ssim == 1.0
        && psnr_from_mse(0.01) == 20.0
        && (mse_psnr - 20.0).abs() < 1e-5
        && fixture == FROZEN_SSIM
        && (oracle - FROZEN_SSIM).abs() < 1e-12;
    check(
        ok,
        format!(
            "identical {identical_psnr} dB / SSIM {identical_ssim}, MSE 0.01 -> {:.6} dB, fixture SSIM {fixture:.17} (oracle {oracle:.17})",
            mse_psnr
        ),
    )
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> = std::env::var("PDRF_ACCEPT")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let listed = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));
    // the variance map is read off the PDRF-5 model trained for criterion 6
    let wanted = |n: usize| listed(n) || (n == 6 && listed(7));
    let fixture = trend_fixture();
    let mut trend = None;
    let mut failed = 0;
    let mut ran = 0;
    for n in 1..=10 {
        if !wanted(n) {
            continue;
        }
        let t0 = Instant::now();
        let (name, outcome) = match n {
            1 => ("gradient suite", gradient_suite()),
            2 => ("rendering oracle", rendering_oracle()),
            3 => ("dirac spike", dirac_spike()),
            4 => ("importance sampler", importance_sampler()),
            5 => ("blur-model invariants", blur_invariants()),
            6 => ("defocus trend", fixture.as_ref().map_err(Clone::clone).and_then(|f| defocus_trend(f, &mut trend))),
            7 => ("variance-map trend", fixture.as_ref().map_err(Clone::clone).and_then(|f| variance_trend(f, trend.as_ref()))),
            8 => ("determinism", determinism()),
            9 => ("round trips", round_trips()),
            _ => ("metrics", metric_fixtures()),
        };
        ran += 1;
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS  {n:>2} {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {n:>2} {name}: {d} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
