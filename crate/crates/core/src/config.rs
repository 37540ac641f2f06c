//! Run configuration: model parameters, sweep steps, Monte Carlo settings
//! and the output directory, read from a TOML file. Every section is
//! optional and defaults to the base case.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::MarketParams;
use crate::pareto::Steps;
use crate::preferences::HaraParams;
use crate::valuation::Model;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "FIRSTLOSS_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub market: MarketParams,
    pub manager: HaraParams,
    pub investor: HaraParams,
    pub steps: Steps,
    /// Seed for every Monte Carlo check.
    pub seed: u64,
    /// Monte Carlo draws per check.
    pub mc_draws: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            market: MarketParams::base_case(),
            manager: HaraParams::base_case(),
            investor: HaraParams::base_case(),
            steps: Steps::default(),
            seed: 20_240_601,
            mc_draws: 1_000_000,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn at(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => Error::Config {
            path: format!("{section}.{field}"),
            reason,
        },
        other => Error::Config {
            path: section.into(),
            reason: other.to_string(),
        },
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config {
            path: e
                .span()
                .map_or_else(String::new, |s| format!("bytes {}..{}", s.start, s.end)),
            reason: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config { path: field, reason } => Error::Config {
                path: format!("{}: {field}", path.display()),
                reason,
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.market.validate().map_err(|e| at("market", e))?;
        self.manager.validate().map_err(|e| at("manager", e))?;
        self.investor.validate().map_err(|e| at("investor", e))?;
        self.steps.validate().map_err(|e| at("steps", e))?;
        if self.mc_draws < crate::oracle::MIN_DRAWS {
            return Err(Error::Config {
                path: "mc_draws".into(),
                reason: format!("need at least {} draws", crate::oracle::MIN_DRAWS),
            });
        }
        Ok(())
    }

    pub fn model(&self) -> Model {
        Model {
            market: self.market,
            manager: self.manager,
            investor: self.investor,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_base_case() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.model(), Model::base_case());
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let cfg =
            RunConfig::from_toml("[market]\nr = 0.04\ngamma = 0.4\nhorizon = 1.0\nv0 = 1.0\n[steps]\nphi_steps = 50\n")
                .unwrap();
        assert_eq!(cfg.market.r, 0.04);
        assert_eq!(cfg.market.sigma, None);
        assert_eq!(cfg.steps.phi_steps, 50);
        assert_eq!(cfg.steps.dm, 0.0025);
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn errors_name_the_field() {
        let err = RunConfig::from_toml("[manager]\na = 0.3\nb = 1.0\n").unwrap_err();
        assert!(
            matches!(err, Error::Config { ref path, .. } if path == "manager.b"),
            "{err}"
        );
        let err = RunConfig::from_toml("[market]\nrate = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("rate"), "{err}");
    }
}
