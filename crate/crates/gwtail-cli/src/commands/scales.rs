//! `scales`: solved scale bundle per eps.

use super::{csv_writer, prepare};
use crate::manifest::RunManifest;
use crate::{numerical, CliError, CliResult, CommonArgs};
use gwtail_core::laplace::PhiEvaluator;
use gwtail_core::scales::{gamma_s, solve_omega, solve_rho, solve_scales, u_bracket};

pub fn run(common: &CommonArgs, eps_list: &[f64]) -> CliResult<()> {
    let loaded = prepare(common)?;
    let off = &loaded.offspring;
    let ctx = &loaded.ctx;
    let ev = PhiEvaluator::new(off, ctx);

    let (mut w, path) = csv_writer(&common.out, "scales.csv")?;
    w.write_record([
        "eps", "omega", "rho", "n_floor", "frac_rho", "gamma", "gamma_s", "u",
    ])
    .map_err(|e| CliError::Numerical(anyhow::anyhow!("csv: {e}")))?;

    for &eps in eps_list {
        match &loaded.immigration {
            Some(imm) => {
                let sc = solve_scales(off, imm, &ev, eps, ctx).map_err(numerical)?;
                w.write_record([
                    format!("{eps}"),
                    format!("{}", sc.omega),
                    format!("{}", sc.rho),
                    format!("{}", sc.n_floor),
                    format!("{}", sc.frac_rho),
                    format!("{}", sc.gamma),
                    format!("{}", sc.gamma_s),
                    format!("{}", sc.u),
                ])
            }
            None => {
                // without immigration only the immigration-free scales apply
                let omega = solve_omega(off, eps, ctx).map_err(numerical)?;
                let rho = solve_rho(off, eps, ctx).map_err(numerical)?;
                w.write_record([
                    format!("{eps}"),
                    format!("{omega}"),
                    format!("{rho}"),
                    format!("{}", rho.floor() as i64),
                    format!("{}", rho - rho.floor()),
                    String::new(),
                    format!("{}", gamma_s(off, eps)),
                    String::new(),
                ])
            }
        }
        .map_err(|e| CliError::Numerical(anyhow::anyhow!("csv: {e}")))?;
    }
    w.flush().map_err(|e| CliError::Numerical(anyhow::anyhow!("csv: {e}")))?;

    let mut manifest = RunManifest::new("scales", &common.model, loaded.ctx.mc_seed);
    manifest.param("eps", eps_list.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(","));
    if let Some(imm) = &loaded.immigration {
        // report the numerically computed saddle bracket over one period
        let (lo, hi) = u_bracket(imm, &ev, ctx).map_err(numerical)?;
        manifest.param("u_bracket", format!("[{lo}, {hi}]"));
    }
    manifest.output(&path);
    manifest.write(&common.out).map_err(CliError::Config)?;
    println!("wrote {}", path.display());
    Ok(())
}
