use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training settings. Every field can be set from a TOML file; missing
/// fields take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Kernel size `P`.
    pub kernel_size: usize,
    /// Skip the second PBE pass and its coarse term.
    pub single_stage: bool,
    /// `false` renders only the central ray (no PBE at all).
    pub blur_model: bool,
    pub n_coarse: usize,
    pub n_fine: usize,
    pub batch_rays: usize,
    pub iterations: usize,
    pub tv_weight: f64,
    pub gamma_correct: bool,
    pub seed: u64,
    /// Renderer networks.
    pub lr_mlp: f64,
    /// Blur estimator: head, canonical offsets and view embeddings.
    pub lr_pbe: f64,
    pub lr_grid: f64,
    /// Learning rates decay exponentially to this fraction by the last step.
    pub lr_decay: f64,
    pub coarse_resolution: usize,
    pub fine_resolution: usize,
    pub grid_channels: [usize; 3],
    pub crr_hidden: usize,
    pub fvr_hidden: usize,
    pub pbe_hidden: usize,
    pub embed_dim: usize,
    pub feature_dim: usize,
    pub pos_bands: usize,
    pub dir_bands: usize,
    /// Pixels per worker shard; fixes the reduction order.
    pub shard_pixels: usize,
    /// Worker threads (0 = all cores).
    pub threads: usize,
    /// Write an intermediate checkpoint every this many steps (0 = never).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kernel_size: 5,
            single_stage: false,
            blur_model: true,
            n_coarse: 64,
            n_fine: 64,
            batch_rays: 1024,
            iterations: 3000,
            tv_weight: 1e-3,
            gamma_correct: true,
            seed: 0,
            lr_mlp: 5e-4,
            lr_pbe: 5e-4,
            lr_grid: 2e-2,
            lr_decay: 0.1,
            coarse_resolution: 64,
            fine_resolution: 128,
            grid_channels: [64, 16, 16],
            crr_hidden: 64,
            fvr_hidden: 256,
            pbe_hidden: 64,
            embed_dim: 32,
            feature_dim: 15,
            pos_bands: 10,
            dir_bands: 4,
            shard_pixels: 64,
            threads: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.kernel_size < 1 {
            return bad("kernel_size must be at least 1");
        }
        if self.n_coarse < 2 {
            return bad("n_coarse must be at least 2");
        }
        if self.batch_rays < 1 {
            return bad("batch_rays must be at least 1");
        }
        if self.shard_pixels < 1 {
            return bad("shard_pixels must be at least 1");
        }
        if self.coarse_resolution < 2 || self.fine_resolution < 2 {
            return bad("grid resolutions must be at least 2");
        }
        if ![self.lr_decay, self.lr_mlp, self.lr_pbe, self.lr_grid].iter().all(|v| *v > 0.0) {
            return bad("learning rates and decay must be positive");
        }
        if self.tv_weight < 0.0 {
            return bad("tv_weight must be non-negative");
        }
        Ok(())
    }

    /// Kernel size actually used: 1 when the blur model is off.
    pub fn effective_kernel(&self) -> usize {
        if self.blur_model {
            self.kernel_size
        } else {
            1
        }
    }

    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(1);
            Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_toml_str(&std::fs::read_to_string(path)?, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Learning-rate multiplier at 0-based `step`.
    pub fn lr_scale(&self, step: usize) -> f64 {
        let frac = step as f64 / self.iterations.max(1) as f64;
        self.lr_decay.powf(frac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = TrainConfig::default();
        let back = TrainConfig::from_toml_str(&c.to_toml(), Path::new("x")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = TrainConfig::from_toml_str("kernel_size = 10\nsingle_stage = true\n", Path::new("c.toml"))
            .unwrap();
        assert_eq!(c.kernel_size, 10);
        assert!(c.single_stage);
        assert_eq!(c.n_coarse, 64);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = TrainConfig::from_toml_str("n_fine = 8\n\nbogus = 1\n", Path::new("c.toml"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 3"), "{err}");
        let err = TrainConfig::from_toml_str("n_fine = 8\nn_coarse = \"x\"\n", Path::new("c.toml"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(TrainConfig::from_toml_str("n_coarse = 1\n", Path::new("c.toml")).is_err());
    }

    #[test]
    fn lr_schedule_ends_at_decay() {
        let c = TrainConfig {
            iterations: 100,
            ..TrainConfig::default()
        };
        assert_eq!(c.lr_scale(0), 1.0);
        assert!((c.lr_scale(100) - 0.1).abs() < 1e-12);
    }
}
