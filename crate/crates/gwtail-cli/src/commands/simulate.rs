//! `simulate`: Monte Carlo tail estimates with parallel chunked sampling.

use super::{csv_writer, prepare};
use crate::manifest::RunManifest;
use crate::{numerical, CliError, CliResult, CommonArgs};
use gwtail_core::model::{ImmigrationModel, OffspringModel};
use gwtail_core::simulate::{chunk_layout, tail_chunk, tail_results_from_counts, SimConfig};
use gwtail_core::TailResult;
use rayon::prelude::*;

/// Chunked Monte Carlo with rayon: each chunk owns an RNG stream keyed by
/// its index, and the integer hit counts merge associatively, so the result
/// is identical to the serial estimator regardless of scheduling.
pub fn parallel_tail_mc(
    off: &OffspringModel,
    imm: Option<&ImmigrationModel>,
    eps_list: &[f64],
    cfg: &SimConfig,
) -> gwtail_core::model::Result<Vec<TailResult>> {
    let chunks = chunk_layout(cfg.samples);
    let counts = chunks
        .par_iter()
        .map(|&(chunk, n)| {
            tail_chunk(off, imm, eps_list, cfg.generations, cfg.population_cap, cfg.seed, chunk, n)
        })
        .collect::<gwtail_core::model::Result<Vec<_>>>()?;
    let mut hits = vec![0u64; eps_list.len()];
    let mut total = 0u64;
    for c in counts {
        total += c.samples;
        for (h, ch) in hits.iter_mut().zip(&c.hits) {
            *h += ch;
        }
    }
    tail_results_from_counts(&hits, total)
}

pub fn run(common: &CommonArgs, eps_list: &[f64], samples: u64, gens: u32) -> CliResult<()> {
    let loaded = prepare(common)?;
    let cfg = SimConfig {
        generations: gens,
        samples,
        seed: loaded.ctx.mc_seed,
        ..Default::default()
    };
    let results = parallel_tail_mc(&loaded.offspring, loaded.immigration.as_ref(), eps_list, &cfg)
        .map_err(numerical)?;

    let (mut w, path) = csv_writer(&common.out, "simulate.csv")?;
    w.write_record(["eps", "value", "log_value", "error_est", "method"])
        .map_err(|e| CliError::Numerical(anyhow::anyhow!("csv: {e}")))?;
    for (eps, r) in eps_list.iter().zip(&results) {
        w.write_record([
            format!("{eps}"),
            format!("{:e}", r.value),
            format!("{}", r.log_value),
            format!("{:e}", r.abs_error_est),
            r.method.as_str().to_string(),
        ])
        .map_err(|e| CliError::Numerical(anyhow::anyhow!("csv: {e}")))?;
    }
    w.flush().map_err(|e| CliError::Numerical(anyhow::anyhow!("csv: {e}")))?;

    let mut manifest = RunManifest::new("simulate", &common.model, cfg.seed);
    manifest
        .param("eps", eps_list.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(","))
        .param("samples", samples)
        .param("gens", gens);
    manifest.output(&path);
    manifest.write(&common.out).map_err(CliError::Config)?;
    println!("wrote {}", path.display());
    Ok(())
}
