pub mod fluctuation;
pub mod scales;
pub mod simulate;
pub mod tail;
pub mod verify;

use crate::config::{load_model, LoadedModel};
use crate::{CliError, CliResult, CommonArgs};
use std::path::{Path, PathBuf};

pub fn prepare(common: &CommonArgs) -> CliResult<LoadedModel> {
    let mut loaded = load_model(&common.model).map_err(CliError::Config)?;
    if let Some(seed) = common.seed {
        loaded.ctx.mc_seed = seed;
    }
    std::fs::create_dir_all(&common.out)
        .map_err(|e| CliError::Config(anyhow::anyhow!("cannot create output dir: {e}")))?;
    Ok(loaded)
}

pub fn csv_writer(dir: &Path, name: &str) -> CliResult<(csv::Writer<std::fs::File>, PathBuf)> {
    let path = dir.join(name);
    let file = std::fs::File::create(&path)
        .map_err(|e| CliError::Config(anyhow::anyhow!("cannot create {}: {e}", path.display())))?;
    Ok((csv::Writer::from_writer(file), path))
}

/// Parses an inclusive integer range written as "lo..hi" (or a single value).
pub fn parse_range(spec: &str) -> CliResult<Vec<i64>> {
    let parse =
        |s: &str| s.trim().parse::<i64>().map_err(|e| CliError::Config(anyhow::anyhow!("{e}")));
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo = parse(lo)?;
        let hi = parse(hi)?;
        if hi < lo {
            return Err(CliError::Config(anyhow::anyhow!("empty range {spec}")));
        }
        Ok((lo..=hi).collect())
    } else {
        Ok(vec![parse(spec)?])
    }
}
