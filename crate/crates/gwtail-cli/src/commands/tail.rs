//! `tail`: left-tail probabilities for a list of eps.

use super::{csv_writer, prepare};
use crate::manifest::RunManifest;
use crate::{numerical, CliError, CliResult, CommonArgs};
use gwtail_core::laplace::PhiEvaluator;
use gwtail_core::scales::{predict_tail_w_immigration, predict_tail_w_schroder};
use gwtail_core::simulate::SimConfig;
use gwtail_core::{inversion, TailMethod, TailResult};

pub fn run(
    common: &CommonArgs,
    eps_list: &[f64],
    method: &str,
    samples: u64,
    gens: u32,
) -> CliResult<()> {
    let loaded = prepare(common)?;
    let off = &loaded.offspring;
    let ctx = &loaded.ctx;
    let ev = PhiEvaluator::new(off, ctx);

    let rows: Vec<(f64, TailResult)> = match method {
        "invert" => {
            let mut rows = Vec::new();
            for &eps in eps_list {
                let r = match &loaded.immigration {
                    Some(imm) => {
                        inversion::joint_prob(off, imm, &ev, eps, -1, ctx).map_err(numerical)?
                    }
                    None => inversion::w_tail(off, &ev, eps, ctx).map_err(numerical)?,
                };
                rows.push((eps, r));
            }
            rows
        }
        "mc" => {
            let cfg = SimConfig {
                generations: gens,
                samples,
                seed: loaded.ctx.mc_seed,
                ..Default::default()
            };
            super::simulate::parallel_tail_mc(off, loaded.immigration.as_ref(), eps_list, &cfg)
                .map_err(numerical)?
                .into_iter()
                .zip(eps_list)
                .map(|(r, &e)| (e, r))
                .collect()
        }
        "predict" => {
            let mut rows = Vec::new();
            for &eps in eps_list {
                let r = match &loaded.immigration {
                    Some(imm) => {
                        let log_p = predict_tail_w_immigration(off, imm, &ev, eps, ctx)
                            .map_err(numerical)?;
                        TailResult {
                            value: log_p.exp().min(1.0),
                            log_value: log_p,
                            abs_error_est: f64::NAN,
                            method: TailMethod::ClosedForm,
                            contour_shift: 0.0,
                            t_truncation: 0.0,
                        }
                    }
                    None => {
                        let p = predict_tail_w_schroder(off, &ev, eps, ctx).map_err(numerical)?;
                        TailResult {
                            value: p.min(1.0),
                            log_value: p.ln(),
                            abs_error_est: f64::NAN,
                            method: TailMethod::ClosedForm,
                            contour_shift: 0.0,
                            t_truncation: 0.0,
                        }
                    }
                };
                rows.push((eps, r));
            }
            rows
        }
        other => {
            return Err(CliError::Config(anyhow::anyhow!(
                "unknown method '{other}' (expected invert, mc, or predict)"
            )))
        }
    };

    let (mut w, path) = csv_writer(&common.out, "tail.csv")?;
    w.write_record(["eps", "value", "log_value", "error_est", "method"])
        .and_then(|_| {
            for (eps, r) in &rows {
                w.write_record([
                    format!("{eps}"),
                    format!("{:e}", r.value),
                    format!("{}", r.log_value),
                    format!("{:e}", r.abs_error_est),
                    r.method.as_str().to_string(),
                ])?;
            }
            w.flush().map_err(csv::Error::from)
        })
        .map_err(|e| CliError::Numerical(anyhow::anyhow!("csv: {e}")))?;

    let mut manifest = RunManifest::new("tail", &common.model, loaded.ctx.mc_seed);
    manifest
        .param("eps", eps_list.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(","))
        .param("method", method)
        .param("samples", samples)
        .param("gens", gens);
    manifest.output(&path);
    manifest.write(&common.out).map_err(CliError::Config)?;
    println!("wrote {}", path.display());
    Ok(())
}
