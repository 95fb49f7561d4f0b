use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::losses::tv_sum;
use super::model::{Architecture, Model, SceneGeometry};
use super::step::{shard_loss_and_grad, PixelBatch, ShardLoss, StepOptions};
use crate::error::{Error, Result};
use crate::geometry::Camera;
use crate::optim::{Adam, AdamConfig};
use crate::raster::Image;
use crate::scenes::SceneDataset;
use crate::tensor::Parameters;

/// Training views as cameras and target images.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub cameras: Vec<Camera<f32>>,
    pub images: Vec<Image>,
}

impl TrainData {
    pub fn from_dataset(ds: &SceneDataset) -> Result<Self> {
        let views: Vec<_> = ds.training().collect();
        if views.is_empty() {
            return Err(Error::Config("dataset has no training views".into()));
        }
        Ok(Self {
            cameras: views.iter().map(|v| v.camera.cast()).collect(),
            images: views.iter().map(|v| v.image.clone()).collect(),
        })
    }
}

/// One line of the loss log. `l_tv` is the weighted TV term, so the
/// components add up to `l_total`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub iteration: usize,
    pub l_crr: f64,
    pub l_fvr: f64,
    pub l_tv: f64,
    pub l_total: f64,
}

pub fn loss_log_csv(records: &[LossRecord]) -> String {
    let mut s = String::from("iteration,l_crr,l_fvr,l_tv,l_total\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{:.9e},{:.9e},{:.9e},{:.9e}",
            r.iteration, r.l_crr, r.l_fvr, r.l_tv, r.l_total
        );
    }
    s
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 finaliser over the combined words
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_batch(data: &TrainData, n: usize, rng: &mut ChaCha8Rng) -> PixelBatch<f32> {
    let mut batch = PixelBatch {
        views: Vec::with_capacity(n),
        pixels: Vec::with_capacity(n),
        targets: Vec::with_capacity(n * 3),
    };
    for _ in 0..n {
        let v = rng.gen_range(0..data.images.len());
        let img = &data.images[v];
        let x = rng.gen_range(0..img.width);
        let y = rng.gen_range(0..img.height);
        batch.views.push(v);
        batch.pixels.push([x as f32 + 0.5, y as f32 + 0.5]);
        batch.targets.extend(img.get(x, y));
    }
    batch
}

fn run_shard(
    base: &Model<f32>,
    cameras: &[Camera<f32>],
    shard: &PixelBatch<f32>,
    opts: &StepOptions<'_, f32>,
) -> Result<(Model<f32>, ShardLoss<f32>)> {
    let mut local = base.clone();
    local.zero_grads();
    let loss = shard_loss_and_grad(&mut local, cameras, shard, opts)?;
    Ok((local, loss))
}

#[cfg(feature = "parallel")]
fn run_shards(
    pool: Option<&rayon::ThreadPool>,
    base: &Model<f32>,
    cameras: &[Camera<f32>],
    shards: &[(PixelBatch<f32>, StepOptions<'_, f32>)],
) -> Vec<Result<(Model<f32>, ShardLoss<f32>)>> {
    use rayon::prelude::*;
    match pool {
        Some(pool) => pool.install(|| {
            shards
                .par_iter()
                .map(|(b, o)| run_shard(base, cameras, b, o))
                .collect()
        }),
        None => shards
            .iter()
            .map(|(b, o)| run_shard(base, cameras, b, o))
            .collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_shards(
    _pool: Option<&()>,
    base: &Model<f32>,
    cameras: &[Camera<f32>],
    shards: &[(PixelBatch<f32>, StepOptions<'_, f32>)],
) -> Vec<Result<(Model<f32>, ShardLoss<f32>)>> {
    shards
        .iter()
        .map(|(b, o)| run_shard(base, cameras, b, o))
        .collect()
}

/// Passed to the observer after every optimizer step.
pub struct Progress<'a> {
    pub record: LossRecord,
    pub model: &'a Model<f32>,
}

/// Trains a fresh model. `observer` runs after every step (logging,
/// periodic checkpoints) and may abort by returning an error.
pub fn train_with<O>(ds: &SceneDataset, cfg: &TrainConfig, mut observer: O) -> Result<(Model<f32>, Vec<LossRecord>)>
where
    O: FnMut(&Progress<'_>) -> Result<()>,
{
    cfg.validate()?;
    let data = TrainData::from_dataset(ds)?;
    let arch = Architecture::from_config(cfg, data.cameras.len());
    let geometry = SceneGeometry::from_dataset(ds)?;
    let mut model = Model::<f32>::new(arch, geometry, cfg.seed);
    let mut adam = Adam::<f32>::new();
    let mut batch_rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, 1, 0));
    let scale = 1.0 / cfg.batch_rays as f32;
    let tv_weight = cfg.tv_weight as f32;

    #[cfg(feature = "parallel")]
    let pool = if cfg.threads == 1 {
        None
    } else {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
        )
    };
    #[cfg(not(feature = "parallel"))]
    let pool: Option<()> = None;

    let mut log = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let batch = sample_batch(&data, cfg.batch_rays, &mut batch_rng);
        let shards: Vec<_> = (0..batch.len())
            .step_by(cfg.shard_pixels)
            .enumerate()
            .map(|(s, start)| {
                let end = (start + cfg.shard_pixels).min(batch.len());
                (
                    batch.slice(start..end),
                    StepOptions {
                        single_stage: cfg.single_stage,
                        loss_scale: scale,
                        rng_seed: Some(mix(cfg.seed, 2 + it as u64, s as u64)),
                        fine_depths: None,
                    },
                )
            })
            .collect();
        let results = run_shards(pool.as_ref(), &model, &data.cameras, &shards);

        model.zero_grads();
        let (mut l_crr, mut l_fvr) = (0.0f64, 0.0f64);
        for r in results {
            let (local, loss) = r?;
            model.accumulate_grads(&local);
            l_crr += f64::from(loss.crr());
            l_fvr += f64::from(loss.fvr);
        }
        let tv = tv_sum(&model.grid_coarse, &model.grid_fine);
        model.grid_coarse.tv_backward(tv_weight);
        model.grid_fine.tv_backward(tv_weight);
        let l_tv = f64::from(tv_weight * tv);
        for (term, v) in [("crr", l_crr), ("fvr", l_fvr), ("tv", l_tv)] {
            if !v.is_finite() {
                return Err(Error::NonFiniteLoss { iteration: it, term });
            }
        }

        let lr_scale = cfg.lr_scale(it);
        let (mut grids, rest): (Vec<_>, Vec<_>) = model
            .params_mut()
            .into_iter()
            .partition(|p| p.name.starts_with("grid."));
        let (mut pbe, mut mlps): (Vec<_>, Vec<_>) = rest.into_iter().partition(|p| p.name.starts_with("pbe."));
        adam.step(&mut grids, &AdamConfig::with_lr(cfg.lr_grid * lr_scale), it + 1)?;
        adam.step(&mut pbe, &AdamConfig::with_lr(cfg.lr_pbe * lr_scale), it + 1)?;
        adam.step(&mut mlps, &AdamConfig::with_lr(cfg.lr_mlp * lr_scale), it + 1)?;

        let record = LossRecord {
            iteration: it,
            l_crr,
            l_fvr,
            l_tv,
            l_total: l_crr + l_fvr + l_tv,
        };
        log.push(record);
        observer(&Progress {
            record,
            model: &model,
        })?;
    }
    Ok((model, log))
}

pub fn train(ds: &SceneDataset, cfg: &TrainConfig) -> Result<(Model<f32>, Vec<LossRecord>)> {
    train_with(ds, cfg, |_| Ok(()))
}
