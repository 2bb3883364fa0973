//! Run configuration files.
//!
//! Configs are flat TOML documents; unknown keys are rejected. Every key
//! has a default, command-line flags override file values, and the fully
//! resolved configuration is echoed to `run.json` next to the artifacts.
//!
//! | key | default |
//! |-----|---------|
//! | `env` | `"pendulum"` |
//! | `method` | `"dea"` |
//! | `regime` | `"desk-interactive"` |
//! | `seed` | `1` |
//! | `seeds` | unset (sweeps only; list or `"a..b"`) |
//! | `gamma` | `0.99` |
//! | `tau` | `0.005` |
//! | `batch_size` | `256` |
//! | `warmup_steps` | regime preset (full: 10000, desk: 1000) |
//! | `lr` | `3e-4` |
//! | `lr_kappa_bar` | `lr` |
//! | `lr_kappa` | `lr` |
//! | `alpha_init` | `0.2` |
//! | `h_target_scale` | `0.5` (target entropy `-0.5 * act_dim`) |
//! | `kappa_bar_init` | `-0.8` |
//! | `kappa_init` | `0.0` |
//! | `freeze_kappa_bar` | `false` |
//! | `freeze_kappa` | `false` |
//! | `eval_interval` | `1000` |
//! | `eval_episodes` | `5` |
//! | `out_dir` | unset (CLI falls back to `$DEA_OUT_DIR` or `./runs`) |
//! | `ensemble_size` | regime preset |
//! | `total_steps` | regime preset |
//! | `utd` | regime preset |
//! | `layer_size` | regime preset (full: 256, desk: 16) |
//! | `hidden_layers` | `2` |
//! | `replay_capacity` | `1000000` |

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::env::EnvKind;
use crate::error::ConfigError;
use crate::trainer::{regime_preset, Method, RunConfig};

/// Raw file contents; all keys optional, unknown keys rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub env: Option<String>,
    pub method: Option<String>,
    pub regime: Option<String>,
    pub seed: Option<u64>,
    pub seeds: Option<SeedSpec>,
    pub gamma: Option<f64>,
    pub tau: Option<f64>,
    pub batch_size: Option<usize>,
    pub warmup_steps: Option<usize>,
    pub lr: Option<f64>,
    pub lr_kappa_bar: Option<f64>,
    pub lr_kappa: Option<f64>,
    pub alpha_init: Option<f64>,
    pub h_target_scale: Option<f64>,
    pub kappa_bar_init: Option<f64>,
    pub kappa_init: Option<f64>,
    pub freeze_kappa_bar: Option<bool>,
    pub freeze_kappa: Option<bool>,
    pub eval_interval: Option<usize>,
    pub eval_episodes: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub ensemble_size: Option<usize>,
    pub total_steps: Option<usize>,
    pub utd: Option<usize>,
    pub layer_size: Option<usize>,
    pub hidden_layers: Option<usize>,
    pub replay_capacity: Option<usize>,
}

/// Seed list, either explicit (`seeds = [1, 2, 3]`) or a range string
/// (`seeds = "1..5"`, inclusive on both ends).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range(String),
}

impl SeedSpec {
    pub fn expand(&self) -> Result<Vec<u64>, ConfigError> {
        match self {
            Self::List(v) => Ok(v.clone()),
            Self::Range(s) => parse_seed_list(s),
        }
    }
}

/// Parse `"a..b"` (inclusive), `"1,2,3"`, or a single integer.
pub fn parse_seed_list(text: &str) -> Result<Vec<u64>, ConfigError> {
    let bad = || ConfigError::BadSeedList(text.to_string());
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let lo: u64 = a.trim().parse().map_err(|_| bad())?;
        let hi: u64 = b.trim().parse().map_err(|_| bad())?;
        if hi < lo {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    let seeds: Result<Vec<u64>, _> = text.split(',').map(|p| p.trim().parse::<u64>()).collect();
    let seeds = seeds.map_err(|_| bad())?;
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

/// Command-line overrides, applied on top of the file values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub method: Option<String>,
    pub env: Option<String>,
    pub regime: Option<String>,
    pub out_dir: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.to_path_buf(), source: e })?;
        toml::from_str(&text)
            .map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    /// Parse config text without a backing file (used by the C ABI).
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::from("<string>"),
            message: e.to_string(),
        })
    }

    /// Resolve into a validated [`RunConfig`]; flag overrides win over file
    /// values, which win over defaults.
    pub fn resolve(&self, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
        let env_name =
            overrides.env.clone().or_else(|| self.env.clone()).unwrap_or_else(|| "pendulum".into());
        let env = EnvKind::parse(&env_name)?;
        let method_name =
            overrides.method.clone().or_else(|| self.method.clone()).unwrap_or_else(|| "dea".into());
        let method = Method::parse(&method_name)?;
        let regime_name = overrides
            .regime
            .clone()
            .or_else(|| self.regime.clone())
            .unwrap_or_else(|| "desk-interactive".into());
        let preset = regime_preset(&regime_name)?;

        let lr = self.lr.unwrap_or(3e-4);
        let cfg = RunConfig {
            env,
            method,
            regime: regime_name,
            ensemble_size: self.ensemble_size.unwrap_or(preset.regime.ensemble_size),
            total_steps: self.total_steps.unwrap_or(preset.regime.total_steps),
            utd: self.utd.unwrap_or(preset.regime.utd),
            seed: overrides.seed.or(self.seed).unwrap_or(1),
            gamma: self.gamma.unwrap_or(0.99),
            tau: self.tau.unwrap_or(5e-3),
            batch_size: self.batch_size.unwrap_or(256),
            warmup_steps: self.warmup_steps.unwrap_or(preset.default_warmup),
            lr,
            lr_kappa_bar: self.lr_kappa_bar.unwrap_or(lr),
            lr_kappa: self.lr_kappa.unwrap_or(lr),
            alpha_init: self.alpha_init.unwrap_or(0.2),
            h_target_scale: self.h_target_scale.unwrap_or(0.5),
            kappa_bar_init: self.kappa_bar_init.unwrap_or(-0.8),
            kappa_init: self.kappa_init.unwrap_or(0.0),
            freeze_kappa_bar: self.freeze_kappa_bar.unwrap_or(false),
            freeze_kappa: self.freeze_kappa.unwrap_or(false),
            eval_interval: self.eval_interval.unwrap_or(1_000),
            eval_episodes: self.eval_episodes.unwrap_or(5),
            layer_size: self.layer_size.unwrap_or(preset.default_layer_size),
            hidden_layers: self.hidden_layers.unwrap_or(2),
            replay_capacity: self.replay_capacity.unwrap_or(1_000_000),
            out_dir: overrides.out_dir.clone().or_else(|| self.out_dir.clone()),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_str(text: &str) -> ConfigFile {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn defaults_resolve_to_desk_interactive_dea() {
        let cfg = ConfigFile::default().resolve(&Overrides::default()).unwrap();
        assert_eq!(cfg.env, EnvKind::Pendulum);
        assert_eq!(cfg.method, Method::Dea);
        assert_eq!(cfg.ensemble_size, 2);
        assert_eq!(cfg.total_steps, 30_000);
        assert_eq!(cfg.utd, 1);
        assert_eq!(cfg.warmup_steps, 1_000);
        assert_eq!(cfg.gamma, 0.99);
        assert_eq!(cfg.batch_size, 256);
        assert_eq!(cfg.kappa_bar_init, -0.8);
    }

    #[test]
    fn regime_presets_expose_table_values() {
        let f = from_str("regime = \"sample-efficient\"");
        let cfg = f.resolve(&Overrides::default()).unwrap();
        assert_eq!(cfg.ensemble_size, 10);
        assert_eq!(cfg.total_steps, 300_000);
        assert_eq!(cfg.utd, 20);
        assert_eq!(cfg.warmup_steps, 10_000);
        assert_eq!(cfg.layer_size, 256);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<ConfigFile>("bogus_key = 3").unwrap_err();
        assert!(err.to_string().contains("bogus_key"));
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = toml::from_str::<ConfigFile>("gamma = \"high\"").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "missing location in: {msg}");
    }

    #[test]
    fn overrides_beat_file_values() {
        let f = from_str("env = \"pendulum\"\nmethod = \"sac\"\nseed = 5");
        let ov = Overrides {
            env: Some("pointreach".into()),
            method: Some("redq".into()),
            seed: Some(9),
            ..Default::default()
        };
        let cfg = f.resolve(&ov).unwrap();
        assert_eq!(cfg.env, EnvKind::PointReach);
        assert_eq!(cfg.method, Method::Redq);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn explicit_regime_fields_override_preset() {
        let f = from_str("regime = \"desk-interactive\"\nensemble_size = 4\nutd = 2");
        let cfg = f.resolve(&Overrides::default()).unwrap();
        assert_eq!(cfg.ensemble_size, 4);
        assert_eq!(cfg.utd, 2);
        assert_eq!(cfg.total_steps, 30_000);
    }

    #[test]
    fn unknown_names_error() {
        assert!(matches!(
            from_str("env = \"cartpole\"").resolve(&Overrides::default()),
            Err(ConfigError::UnknownEnv(_))
        ));
        assert!(matches!(
            from_str("method = \"td3\"").resolve(&Overrides::default()),
            Err(ConfigError::UnknownMethod(_))
        ));
        assert!(matches!(
            from_str("regime = \"huge\"").resolve(&Overrides::default()),
            Err(ConfigError::UnknownRegime(_))
        ));
    }

    #[test]
    fn seed_specs_expand() {
        assert_eq!(parse_seed_list("1..5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_seed_list("7").unwrap(), vec![7]);
        assert_eq!(parse_seed_list("3, 1, 2").unwrap(), vec![3, 1, 2]);
        assert!(parse_seed_list("5..1").is_err());
        assert!(parse_seed_list("one..two").is_err());
        let f = from_str("seeds = [4, 5]");
        assert_eq!(f.seeds.unwrap().expand().unwrap(), vec![4, 5]);
        let f = from_str("seeds = \"2..3\"");
        assert_eq!(f.seeds.unwrap().expand().unwrap(), vec![2, 3]);
    }
}
