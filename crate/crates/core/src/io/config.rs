use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{LossWeights, SelfProjectionConfig, UniformConfig};
use crate::network::NetworkConfig;
use crate::training::TrainConfig;

/// Flat run configuration, read from a TOML file.
///
/// The `preset` key (`"desk"` or `"full"`) picks the defaults; every other
/// key overrides one field. Unknown keys are an error. [`RunConfig::to_toml`]
/// of a preset lists all keys with their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: String,
    pub seed: u64,
    pub patch_size: usize,
    pub rate: usize,
    pub patches_per_model: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many optimizer steps instead of `epochs`; 0 disables.
    pub max_steps: u64,
    pub lr0: f64,
    pub decay_rate: f64,
    pub decay_every: u64,
    pub lr_floor: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub k: usize,
    pub d: usize,
    pub c: usize,
    pub c_prime: usize,
    pub head_hidden: usize,
    pub fixed_grid_span: f64,
    pub use_self_attention: bool,
    pub use_learnable_grid: bool,
    pub use_hierarchical_folding: bool,
    pub uniform_seeds: usize,
    pub uniform_p: Vec<f64>,
    pub sp_k: usize,
    pub graph_k: usize,
    /// Points sampled from each mesh found in the dataset directory.
    pub mesh_points: usize,
    pub dataset_dir: PathBuf,
    pub output_dir: PathBuf,
    pub checkpoint: PathBuf,
    /// Save the checkpoint every this many steps; 0 saves only at the end.
    pub checkpoint_every: u64,
    pub gradcheck_eps: f64,
    pub gradcheck_patch: usize,
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let train = match name {
            "desk" => TrainConfig::desk(),
            "full" => TrainConfig::full(),
            other => return Err(Error::Config(format!("unknown preset '{other}'"))),
        };
        let mesh_points = if name == "full" { 2048 } else { 512 };
        Ok(Self::from_train(name, &train, mesh_points))
    }

    fn from_train(preset: &str, t: &TrainConfig, mesh_points: usize) -> Self {
        Self {
            preset: preset.to_string(),
            seed: t.seed,
            patch_size: t.patch_size,
            rate: t.net.r,
            patches_per_model: t.patches_per_model,
            batch_size: t.batch_size,
            epochs: t.epochs,
            max_steps: 0,
            lr0: t.lr0,
            decay_rate: t.decay_rate,
            decay_every: t.decay_every,
            lr_floor: t.lr_floor,
            alpha: t.weights.alpha,
            beta: t.weights.beta,
            gamma: t.weights.gamma,
            k: t.net.k,
            d: t.net.d,
            c: t.net.c,
            c_prime: t.net.c_prime,
            head_hidden: t.net.head_hidden,
            fixed_grid_span: t.net.fixed_grid_span,
            use_self_attention: t.net.use_self_attention,
            use_learnable_grid: t.net.use_learnable_grid,
            use_hierarchical_folding: t.net.use_hierarchical_folding,
            uniform_seeds: t.uniform.seeds,
            uniform_p: t.uniform.p_values.clone(),
            sp_k: t.sp.k,
            graph_k: t.graph_k,
            mesh_points,
            dataset_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
            checkpoint: PathBuf::from("out/model.ckpt"),
            checkpoint_every: 0,
            gradcheck_eps: 1e-5,
            gradcheck_patch: 16,
        }
    }

    /// Parse TOML text: preset defaults overlaid with the given keys.
    pub fn parse(text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let preset = match user.get("preset") {
            None => "desk",
            Some(toml::Value::String(s)) => s.as_str(),
            Some(_) => return Err(Error::Config("preset must be a string".into())),
        };
        let mut merged = toml::Table::try_from(Self::preset(preset)?)
            .map_err(|e| Error::Config(e.to_string()))?;
        merged.extend(user);
        let cfg: Self = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.train_config()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The validated training configuration.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = TrainConfig {
            patch_size: self.patch_size,
            patches_per_model: self.patches_per_model,
            batch_size: self.batch_size,
            epochs: self.epochs,
            lr0: self.lr0,
            decay_rate: self.decay_rate,
            decay_every: self.decay_every,
            lr_floor: self.lr_floor,
            graph_k: self.graph_k,
            weights: LossWeights {
                alpha: self.alpha,
                beta: self.beta,
                gamma: self.gamma,
            },
            net: NetworkConfig {
                k: self.k,
                d: self.d,
                c: self.c,
                c_prime: self.c_prime,
                r: self.rate,
                head_hidden: self.head_hidden,
                fixed_grid_span: self.fixed_grid_span,
                use_self_attention: self.use_self_attention,
                use_learnable_grid: self.use_learnable_grid,
                use_hierarchical_folding: self.use_hierarchical_folding,
            },
            uniform: UniformConfig {
                seeds: self.uniform_seeds,
                p_values: self.uniform_p.clone(),
            },
            sp: SelfProjectionConfig { k: self.sp_k },
            seed: self.seed,
        };
        t.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_desk_preset() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.train_config().unwrap(), TrainConfig::desk());
    }

    #[test]
    fn overrides_and_presets() {
        let cfg = RunConfig::parse("preset = \"full\"\nseed = 9\nbeta = 0.0\n").unwrap();
        let t = cfg.train_config().unwrap();
        assert_eq!(t.seed, 9);
        assert_eq!(t.weights.beta, 0.0);
        assert_eq!(t.net.c, 480);
    }

    #[test]
    fn unknown_and_invalid_keys_fail() {
        assert!(matches!(RunConfig::parse("sede = 1"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("rate = 3"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("seed = \"x\""), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("preset = \"huge\""), Err(Error::Config(_))));
    }

    #[test]
    fn dump_round_trips() {
        let cfg = RunConfig::preset("full").unwrap();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }
}
