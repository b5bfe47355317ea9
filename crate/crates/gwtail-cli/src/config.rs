//! Model configuration files (TOML or JSON).

use anyhow::{anyhow, bail, Context, Result};
use gwtail_core::{EvalContext, ImmigrationModel, OffspringModel};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Offspring probabilities starting at one child: `offspring[i]` is the
    /// mass on `i + 1` offspring.
    pub offspring: Vec<f64>,
    /// Optional immigration probabilities, same indexing.
    pub immigration: Option<Vec<f64>>,
    #[serde(default)]
    pub context: ContextConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextConfig {
    pub product_tol: Option<f64>,
    pub base_radius: Option<f64>,
    pub quad_rel_tol: Option<f64>,
    pub max_iters: Option<u32>,
    pub seed: Option<u64>,
}

pub struct LoadedModel {
    pub offspring: OffspringModel,
    pub immigration: Option<ImmigrationModel>,
    pub ctx: EvalContext,
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let raw = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read model file {}", path.display()))?;
    let cfg: ModelConfig = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(&raw).context("invalid JSON model file")?,
        Some("toml") => toml::from_str(&raw).context("invalid TOML model file")?,
        _ => toml::from_str(&raw)
            .or_else(|_| serde_json::from_str(&raw))
            .context("model file is neither valid TOML nor valid JSON")?,
    };
    let offspring = OffspringModel::new(&cfg.offspring).map_err(|e| anyhow!("offspring law: {e}"))?;
    let immigration = match &cfg.immigration {
        Some(q) => {
            Some(ImmigrationModel::new(q, &offspring).map_err(|e| anyhow!("immigration law: {e}"))?)
        }
        None => None,
    };
    let mut ctx = EvalContext::default();
    if let Some(v) = cfg.context.product_tol {
        ctx.product_tol = v;
    }
    if let Some(v) = cfg.context.base_radius {
        ctx.base_radius = v;
    }
    if let Some(v) = cfg.context.quad_rel_tol {
        ctx.quad_rel_tol = v;
    }
    if let Some(v) = cfg.context.max_iters {
        ctx.max_iters = v;
    }
    if let Some(v) = cfg.context.seed {
        ctx.mc_seed = v;
    }
    ctx.validate().map_err(|e| anyhow!("context: {e}"))?;
    if !(ctx.quad_rel_tol > 0.0) || !(ctx.product_tol > 0.0) {
        bail!("tolerances must be positive");
    }
    Ok(LoadedModel { offspring, immigration, ctx })
}
