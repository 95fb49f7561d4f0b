use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use crate::blur::{BlurKernelState, PbeNet};
use crate::checkpoint::{self, Record};
use crate::encoding::EncodingSpec;
use crate::error::{Error, Result};
use crate::field::FeatureGrid;
use crate::geometry::{Aabb, Camera};
use crate::real::Real;
use crate::renderer::{CoarseRenderer, FineRenderer};
use crate::scenes::SceneDataset;
use crate::tensor::{ParamTensor, Parameters};
use crate::vec3::Vec3;

/// Network and grid sizes; everything needed to rebuild an empty model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub kernel_size: usize,
    pub views: usize,
    pub embed_dim: usize,
    pub feature_dim: usize,
    pub pbe_hidden: usize,
    pub crr_hidden: usize,
    pub fvr_hidden: usize,
    pub pos_bands: usize,
    pub dir_bands: usize,
    pub coarse_resolution: usize,
    pub fine_resolution: usize,
    pub grid_channels: [usize; 3],
    pub n_coarse: usize,
    pub n_fine: usize,
    pub gamma_correct: bool,
    pub blur_model: bool,
}

impl Architecture {
    pub fn from_config(cfg: &TrainConfig, views: usize) -> Self {
        Self {
            kernel_size: cfg.effective_kernel(),
            views,
            embed_dim: cfg.embed_dim,
            feature_dim: cfg.feature_dim,
            pbe_hidden: cfg.pbe_hidden,
            crr_hidden: cfg.crr_hidden,
            fvr_hidden: cfg.fvr_hidden,
            pos_bands: cfg.pos_bands,
            dir_bands: cfg.dir_bands,
            coarse_resolution: cfg.coarse_resolution,
            fine_resolution: cfg.fine_resolution,
            grid_channels: cfg.grid_channels,
            n_coarse: cfg.n_coarse,
            n_fine: cfg.n_fine,
            gamma_correct: cfg.gamma_correct,
            blur_model: cfg.blur_model,
        }
    }

    fn to_values(&self) -> Vec<usize> {
        vec![
            self.kernel_size,
            self.views,
            self.embed_dim,
            self.feature_dim,
            self.pbe_hidden,
            self.crr_hidden,
            self.fvr_hidden,
            self.pos_bands,
            self.dir_bands,
            self.coarse_resolution,
            self.fine_resolution,
            self.grid_channels[0],
            self.grid_channels[1],
            self.grid_channels[2],
            self.n_coarse,
            self.n_fine,
            usize::from(self.gamma_correct),
            usize::from(self.blur_model),
        ]
    }

    fn from_values(v: &[usize]) -> Result<Self> {
        if v.len() != 18 {
            return Err(Error::Checkpoint(format!(
                "meta.arch has {} entries, expected 18",
                v.len()
            )));
        }
        Ok(Self {
            kernel_size: v[0],
            views: v[1],
            embed_dim: v[2],
            feature_dim: v[3],
            pbe_hidden: v[4],
            crr_hidden: v[5],
            fvr_hidden: v[6],
            pos_bands: v[7],
            dir_bands: v[8],
            coarse_resolution: v[9],
            fine_resolution: v[10],
            grid_channels: [v[11], v[12], v[13]],
            n_coarse: v[14],
            n_fine: v[15],
            gamma_correct: v[16] != 0,
            blur_model: v[17] != 0,
        })
    }
}

/// Scene box, depth range and the intrinsics the model was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGeometry {
    pub bounds: Aabb<f32>,
    pub near: f32,
    pub far: f32,
    pub width: usize,
    pub height: usize,
    pub focal: f32,
    pub cx: f32,
    pub cy: f32,
}

impl SceneGeometry {
    pub fn from_dataset(ds: &SceneDataset) -> Result<Self> {
        let cam = ds
            .training()
            .next()
            .map(|v| &v.camera)
            .ok_or_else(|| Error::Config("dataset has no training views".into()))?;
        Ok(Self {
            bounds: ds.bounds.cast(),
            near: ds.near as f32,
            far: ds.far as f32,
            width: cam.width,
            height: cam.height,
            focal: cam.focal as f32,
            cx: cam.cx as f32,
            cy: cam.cy as f32,
        })
    }

    fn to_values(&self) -> Vec<f32> {
        let mut v = Vec::with_capacity(13);
        v.extend_from_slice(&self.bounds.min.0);
        v.extend_from_slice(&self.bounds.max.0);
        v.extend([
            self.near,
            self.far,
            self.width as f32,
            self.height as f32,
            self.focal,
            self.cx,
            self.cy,
        ]);
        v
    }

    fn from_values(v: &[f32]) -> Result<Self> {
        if v.len() != 13 {
            return Err(Error::Checkpoint(format!(
                "meta.scene has {} entries, expected 13",
                v.len()
            )));
        }
        Ok(Self {
            bounds: Aabb::new(Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5])),
            near: v[6],
            far: v[7],
            width: v[8] as usize,
            height: v[9] as usize,
            focal: v[10],
            cx: v[11],
            cy: v[12],
        })
    }

    /// Fails unless `camera` has this geometry's resolution and intrinsics.
    pub fn check_camera(&self, camera: &Camera<f64>) -> Result<()> {
        let close = |a: f64, b: f32| (a - f64::from(b)).abs() <= 1e-3 * (1.0 + a.abs());
        if camera.width != self.width
            || camera.height != self.height
            || !close(camera.focal, self.focal)
            || !close(camera.cx, self.cx)
            || !close(camera.cy, self.cy)
        {
            return Err(Error::Shape(format!(
                "camera {}x{} f={:.3} c=({:.2},{:.2}) does not match the checkpoint's {}x{} f={:.3} c=({:.2},{:.2})",
                camera.width,
                camera.height,
                camera.focal,
                camera.cx,
                camera.cy,
                self.width,
                self.height,
                self.focal,
                self.cx,
                self.cy
            )));
        }
        Ok(())
    }
}

/// Every trainable part of the system.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<F> {
    pub arch: Architecture,
    pub geometry: SceneGeometry,
    pub blur: BlurKernelState<F>,
    pub pbe: PbeNet<F>,
    pub grid_coarse: FeatureGrid<F>,
    pub grid_fine: FeatureGrid<F>,
    pub crr: CoarseRenderer<F>,
    pub fvr: FineRenderer<F>,
}

const GRID_INIT: f64 = 0.1;

impl<F: Real> Model<F> {
    pub fn new(arch: Architecture, geometry: SceneGeometry, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bounds: Aabb<F> = geometry.bounds.cast();
        let cr = arch.coarse_resolution;
        let fr = arch.fine_resolution;
        let grid_coarse =
            FeatureGrid::new("grid.coar", [cr; 3], arch.grid_channels, bounds, GRID_INIT, &mut rng);
        let grid_fine =
            FeatureGrid::new("grid.fine", [fr; 3], arch.grid_channels, bounds, GRID_INIT, &mut rng);
        let gdim: usize = arch.grid_channels.iter().sum();
        let pos = EncodingSpec::new(arch.pos_bands, true);
        let dir = EncodingSpec::new(arch.dir_bands, true);
        let crr = CoarseRenderer::new(gdim, arch.crr_hidden, arch.feature_dim, pos, dir, &mut rng);
        let fvr = FineRenderer::new(2 * gdim, arch.fvr_hidden, arch.feature_dim, pos, dir, &mut rng);
        let blur = BlurKernelState::new(arch.views, arch.kernel_size, arch.embed_dim, &mut rng);
        let extent = bounds.extent();
        let pbe = PbeNet::new(arch.embed_dim, arch.feature_dim, arch.pbe_hidden, extent, &mut rng);
        Self {
            arch,
            geometry,
            blur,
            pbe,
            grid_coarse,
            grid_fine,
            crr,
            fvr,
        }
    }

    pub fn near_far(&self) -> (F, F) {
        (F::lit(f64::from(self.geometry.near)), F::lit(f64::from(self.geometry.far)))
    }

    pub fn cast<G: Real>(&self) -> Model<G> {
        Model {
            arch: self.arch.clone(),
            geometry: self.geometry.clone(),
            blur: self.blur.cast(),
            pbe: self.pbe.cast(),
            grid_coarse: self.grid_coarse.cast(),
            grid_fine: self.grid_fine.cast(),
            crr: self.crr.cast(),
            fvr: self.fvr.cast(),
        }
    }

    /// Adds every gradient of `other` (same architecture) into `self`.
    pub fn accumulate_grads(&mut self, other: &Self) {
        for (a, b) in self.params_mut().into_iter().zip(other.params()) {
            a.accumulate_grad(b);
        }
    }

    pub fn to_records(&self) -> Vec<Record> {
        let mut out = vec![
            Record::new(
                "meta.arch",
                &[18],
                self.arch.to_values().into_iter().map(|v| v as f32).collect(),
            ),
            Record::new("meta.scene", &[13], self.geometry.to_values()),
        ];
        out.extend(self.params().into_iter().map(Record::from_param));
        out
    }

    pub fn from_records(records: &[Record]) -> Result<Self> {
        let by_name: HashMap<&str, &Record> =
            records.iter().map(|r| (r.name.as_str(), r)).collect();
        let get = |name: &str| {
            by_name
                .get(name)
                .copied()
                .ok_or_else(|| Error::Checkpoint(format!("missing record `{name}`")))
        };
        let arch_vals: Vec<usize> = get("meta.arch")?
            .values
            .iter()
            .map(|v| *v as usize)
            .collect();
        let arch = Architecture::from_values(&arch_vals)?;
        let geometry = SceneGeometry::from_values(&get("meta.scene")?.values)?;
        let mut model = Self::new(arch, geometry, 0);
        for p in model.params_mut() {
            let r = get(&p.name)?;
            if r.dims != p.shape {
                return Err(Error::Checkpoint(format!(
                    "record `{}` has shape {:?}, expected {:?}",
                    r.name, r.dims, p.shape
                )));
            }
            for (dst, src) in p.values.iter_mut().zip(&r.values) {
                *dst = F::lit(f64::from(*src));
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, &self.to_records())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_records(&checkpoint::load(path)?)
    }
}

impl<F> Parameters<F> for Model<F> {
    fn params(&self) -> Vec<&ParamTensor<F>> {
        let mut p = self.grid_coarse.params();
        p.extend(self.grid_fine.params());
        p.extend(self.crr.params());
        p.extend(self.fvr.params());
        p.extend(self.blur.params());
        p.extend(self.pbe.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor<F>> {
        let mut p = self.grid_coarse.params_mut();
        p.extend(self.grid_fine.params_mut());
        p.extend(self.crr.params_mut());
        p.extend(self.fvr.params_mut());
        p.extend(self.blur.params_mut());
        p.extend(self.pbe.params_mut());
        p
    }
}
