//! Flat TOML study configuration with flag and environment overrides.

use std::path::Path;

use clap::Args;
use serde::{Deserialize, Serialize};
use wm_core::errors::NormTag;
use wm_core::study::StudyConfig;

use crate::CliError;

/// Keys accepted in a config file; every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub kappa: Option<f64>,
    pub n0: Option<usize>,
    pub n0_sup: Option<usize>,
    pub max_level: Option<u32>,
    pub p: Option<Vec<usize>>,
    pub betas: Option<Vec<f64>>,
    pub n_mc: Option<usize>,
    pub n_kl: Option<usize>,
    pub n_ok: Option<usize>,
    pub seed: Option<u64>,
    pub norms: Option<Vec<String>>,
    pub fit_levels: Option<[u32; 2]>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("config: cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("config: {}: {e}", path.display())))
    }
}

/// Per-key overrides shared by the study subcommands.
#[derive(Debug, Default, Clone, Args)]
pub struct Overrides {
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub n0: Option<usize>,
    #[arg(long = "n0-sup")]
    pub n0_sup: Option<usize>,
    /// Finest level; levels 0..=max-level are computed.
    #[arg(long = "max-level")]
    pub max_level: Option<u32>,
    /// Polynomial degrees, e.g. `--p 1,2`.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    #[arg(long = "n-mc")]
    pub n_mc: Option<usize>,
    #[arg(long = "n-kl")]
    pub n_kl: Option<usize>,
    #[arg(long = "n-ok")]
    pub n_ok: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Norm tags, e.g. `--norms L2,Linf`.
    #[arg(long, value_delimiter = ',')]
    pub norms: Option<Vec<String>>,
    /// Fit window as two levels, e.g. `--fit-levels 2,4`.
    #[arg(long = "fit-levels", value_delimiter = ',', num_args = 2)]
    pub fit_levels: Option<Vec<u32>>,
}

/// Effective configuration echoed into the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub kappa: f64,
    pub n0: usize,
    pub n0_sup: usize,
    pub max_level: u32,
    pub p: Vec<usize>,
    pub betas: Vec<f64>,
    pub n_mc: usize,
    pub n_kl: usize,
    pub n_ok: usize,
    pub seed: u64,
    pub norms: Vec<String>,
    pub fit_levels: [u32; 2],
}

impl From<&StudyConfig> for ConfigEcho {
    fn from(c: &StudyConfig) -> Self {
        Self {
            kappa: c.kappa,
            n0: c.n0,
            n0_sup: c.n0_sup,
            max_level: c.max_level,
            p: c.degrees.clone(),
            betas: c.betas.clone(),
            n_mc: c.n_mc,
            n_kl: c.n_kl,
            n_ok: c.n_ok,
            seed: c.base_seed,
            norms: c.norms.iter().map(|n| n.as_str().to_string()).collect(),
            fit_levels: [c.fit_levels.0, c.fit_levels.1],
        }
    }
}

fn parse_norms(names: &[String]) -> Result<Vec<NormTag>, CliError> {
    names
        .iter()
        .map(|s| {
            s.parse::<NormTag>()
                .map_err(|_| CliError::Config(format!("norms: unknown norm tag '{s}'")))
        })
        .collect()
}

fn fit_window(v: &[u32]) -> Result<(u32, u32), CliError> {
    match v {
        [lo, hi] => Ok((*lo, *hi)),
        _ => Err(CliError::Config("fit_levels: expected two levels".into())),
    }
}

pub fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var("WM_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("WM_SEED: not an unsigned integer: '{s}'"))),
        Err(_) => Ok(None),
    }
}

/// Defaults, then the file, then `WM_SEED`, then flags.
pub fn resolve(
    mut cfg: StudyConfig,
    file: Option<FileConfig>,
    flags: &Overrides,
) -> Result<StudyConfig, CliError> {
    if let Some(f) = file {
        apply(
            &mut cfg,
            Overrides {
                kappa: f.kappa,
                n0: f.n0,
                n0_sup: f.n0_sup,
                max_level: f.max_level,
                p: f.p,
                betas: f.betas,
                n_mc: f.n_mc,
                n_kl: f.n_kl,
                n_ok: f.n_ok,
                seed: f.seed,
                norms: f.norms,
                fit_levels: f.fit_levels.map(|w| w.to_vec()),
            },
        )?;
    }
    if let Some(seed) = env_seed()? {
        cfg.base_seed = seed;
    }
    apply(&mut cfg, flags.clone())?;
    Ok(cfg)
}

fn apply(cfg: &mut StudyConfig, o: Overrides) -> Result<(), CliError> {
    if let Some(v) = o.kappa {
        cfg.kappa = v;
    }
    if let Some(v) = o.n0 {
        cfg.n0 = v;
    }
    if let Some(v) = o.n0_sup {
        cfg.n0_sup = v;
    }
    if let Some(v) = o.max_level {
        cfg.max_level = v;
        if o.fit_levels.is_none() && cfg.fit_levels.1 > v {
            // keep the default window inside the requested levels
            cfg.fit_levels = (v.saturating_sub(2), v);
        }
    }
    if let Some(v) = o.p {
        cfg.degrees = v;
    }
    if let Some(v) = o.betas {
        cfg.betas = v;
    }
    if let Some(v) = o.n_mc {
        cfg.n_mc = v;
    }
    if let Some(v) = o.n_kl {
        cfg.n_kl = v;
    }
    if let Some(v) = o.n_ok {
        cfg.n_ok = v;
    }
    if let Some(v) = o.seed {
        cfg.base_seed = v;
    }
    if let Some(v) = o.norms {
        cfg.norms = parse_norms(&v)?;
    }
    if let Some(v) = o.fit_levels {
        cfg.fit_levels = fit_window(&v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_file_then_flags() {
        let file: FileConfig = toml::from_str("betas = [0.5, 0.8]\nn_mc = 7\nnorms = [\"L2\"]").unwrap();
        let flags = Overrides {
            n_mc: Some(3),
            ..Default::default()
        };
        let cfg = resolve(StudyConfig::field_default(), Some(file), &flags).unwrap();
        assert_eq!(cfg.betas, vec![0.5, 0.8]);
        assert_eq!(cfg.n_mc, 3);
        assert_eq!(cfg.norms, vec![NormTag::L2]);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = toml::from_str::<FileConfig>("n_samples = 3").unwrap_err();
        assert!(err.to_string().contains("n_samples"));
    }

    #[test]
    fn bad_norm_names_key() {
        let flags = Overrides {
            norms: Some(vec!["L3".into()]),
            ..Default::default()
        };
        let err = resolve(StudyConfig::field_default(), None, &flags).unwrap_err();
        assert!(err.to_string().starts_with("norms:"));
    }

    #[test]
    fn lowering_max_level_moves_fit_window() {
        let flags = Overrides {
            max_level: Some(2),
            ..Default::default()
        };
        let cfg = resolve(StudyConfig::field_default(), None, &flags).unwrap();
        assert_eq!(cfg.fit_levels, (0, 2));
    }
}
