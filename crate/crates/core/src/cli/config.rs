use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::margins::MarginScale;
use crate::model::ModelSpec;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub data: Option<DataConfig>,
    /// Inline model; alternatively `model_file` names a TOML document holding one,
    /// such as the `fitted_model.toml` written by `fit`.
    pub model: Option<ModelSpec>,
    pub model_file: Option<PathBuf>,
    pub fit: Option<FitConfig>,
    pub simulate: Option<SimulateConfig>,
    pub diagnose: Option<DiagnoseConfig>,
    pub bootstrap: Option<BootstrapConfig>,
    pub transform: Option<TransformConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinates {
    #[default]
    Planar,
    /// Longitude and latitude in degrees, projected to kilometres.
    Lonlat,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub observations: Option<PathBuf>,
    pub stations: PathBuf,
    /// Margins of the observations file; `raw` data get empirical rank margins.
    pub scale: Option<MarginScale>,
    #[serde(default)]
    pub coordinates: Coordinates,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Censoring or conditioning level as a marginal probability.
    pub u: Option<f64>,
    pub free: Option<Vec<String>>,
    #[serde(default)]
    pub anisotropy_prefit: bool,
    /// Censoring of the pairwise likelihood for inverted max-stable and max-mixture models.
    pub censored: Option<bool>,
    /// Number of conditioning sites for the conditional extremes composite likelihood.
    pub conditioning_sites: Option<usize>,
    #[serde(default = "yes")]
    pub stderr: bool,
    pub max_evals: Option<usize>,
    pub restarts: Option<usize>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub n: usize,
    /// Conditional extremes only: conditioning site index and level.
    pub conditioning_site: Option<usize>,
    pub u: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
    /// Sites for extremogram tables; all when absent.
    pub extremogram_sites: Option<Vec<usize>>,
    /// Laplace-scale levels `v` for the `Pr{max > v}` curve.
    #[serde(default)]
    pub exceedance_levels: Vec<f64>,
    #[serde(default = "default_nsim")]
    pub nsim: usize,
}

fn default_levels() -> Vec<f64> {
    vec![0.95, 0.99]
}

fn default_max_lag() -> usize {
    10
}

fn default_nsim() -> usize {
    10_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_block")]
    pub mean_block: f64,
    #[serde(default = "default_quantiles")]
    pub levels: Vec<f64>,
}

fn default_replicates() -> usize {
    100
}

fn default_block() -> f64 {
    10.0
}

fn default_quantiles() -> Vec<f64> {
    vec![0.05, 0.95]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformConfig {
    pub psi: f64,
    #[serde(rename = "L")]
    pub l: f64,
}

impl RunConfig {
    /// Parses `path`, resolving relative file names against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(d) = &mut cfg.data {
            resolve(&mut d.stations);
            if let Some(o) = &mut d.observations {
                resolve(o);
            }
        }
        if let Some(m) = &mut cfg.model_file {
            resolve(m);
        }
        if let Some(o) = &mut cfg.output {
            resolve(o);
        }
        Ok(cfg)
    }

    pub fn data(&self) -> Result<&DataConfig> {
        self.data.as_ref().ok_or_else(|| Error::Config("missing [data] section".into()))
    }

    pub fn model(&self) -> Result<ModelSpec> {
        let m = match (&self.model, &self.model_file) {
            (Some(_), Some(_)) => return Err(Error::Config("give either [model] or model_file, not both".into())),
            (Some(m), None) => *m,
            (None, Some(p)) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read model file {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            (None, None) => return Err(Error::Config("missing [model] section".into())),
        };
        m.validate().map_err(|e| Error::Config(format!("model: {e}")))?;
        Ok(m)
    }

    pub fn fit(&self) -> Result<&FitConfig> {
        self.fit.as_ref().ok_or_else(|| Error::Config("missing [fit] section".into()))
    }
}

impl FitConfig {
    pub fn level(&self, why: &str) -> Result<f64> {
        match self.u {
            Some(u) if u > 0.0 && u < 1.0 => Ok(u),
            Some(u) => Err(Error::Config(format!("fit.u = {u} must lie in (0, 1)"))),
            None => Err(Error::Config(format!("fit.u is required for {why}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_document() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            r#"
seed = 7
[data]
observations = "obs.csv"
stations = "st.csv"
scale = "raw"
[model]
model = "hw"
delta = 0.6
cov = { phi = 1.0, nu = 1.0 }
[fit]
u = 0.95
free = ["delta", "phi"]
anisotropy_prefit = true
"#,
        )
        .unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.data().unwrap().stations, dir.path().join("st.csv"));
        assert_eq!(cfg.model().unwrap().name(), "hw");
        assert!(cfg.fit().unwrap().stderr);
        assert_eq!(cfg.fit().unwrap().level("x").unwrap(), 0.95);
    }

    #[test]
    fn rejects_unknown_keys_and_missing_level() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "sed = 1\n").unwrap();
        assert!(matches!(RunConfig::load(&path), Err(Error::Config(_))));
        let f = FitConfig {
            u: None,
            free: None,
            anisotropy_prefit: false,
            censored: None,
            conditioning_sites: None,
            stderr: true,
            max_evals: None,
            restarts: None,
        };
        assert!(f.level("censoring").is_err());
    }
}
