//! `fluctuation`: conditional first-branching law around floor(gamma),
//! quadrature against the double-exponential predictor.

use super::{csv_writer, parse_range, prepare};
use crate::manifest::RunManifest;
use crate::{numerical, CliError, CliResult, CommonArgs};
use gwtail_core::laplace::PhiEvaluator;
use gwtail_core::scales::{gamma, predict_fluctuation};
use gwtail_core::inversion;

pub fn run(common: &CommonArgs, eps: f64, x_spec: &str) -> CliResult<()> {
    let loaded = prepare(common)?;
    let imm = loaded.immigration.as_ref().ok_or_else(|| {
        CliError::Config(anyhow::anyhow!("fluctuation requires an immigration law"))
    })?;
    let off = &loaded.offspring;
    let ctx = &loaded.ctx;
    let ev = PhiEvaluator::new(off, ctx);
    let xs = parse_range(x_spec)?;

    let denom = inversion::joint_prob(off, imm, &ev, eps, -1, ctx).map_err(numerical)?;
    let g_floor = gamma(off, eps).floor() as i64;

    let (mut w, path) = csv_writer(&common.out, "fluctuation.csv")?;
    w.write_record(["x", "conditional_quadrature", "conditional_predictor"])
        .map_err(|e| CliError::Numerical(anyhow::anyhow!("csv: {e}")))?;
    for &x in &xs {
        let joint = inversion::joint_prob(off, imm, &ev, eps, g_floor + x, ctx).map_err(numerical)?;
        let cond = (joint.log_value - denom.log_value).exp();
        let pred = predict_fluctuation(off, imm, &ev, eps, x, ctx).map_err(numerical)?;
        w.write_record([format!("{x}"), format!("{cond}"), format!("{pred}")])
            .map_err(|e| CliError::Numerical(anyhow::anyhow!("csv: {e}")))?;
    }
    w.flush().map_err(|e| CliError::Numerical(anyhow::anyhow!("csv: {e}")))?;

    let mut manifest = RunManifest::new("fluctuation", &common.model, loaded.ctx.mc_seed);
    manifest.param("eps", eps).param("x", x_spec).param("floor_gamma", g_floor);
    manifest.output(&path);
    manifest.write(&common.out).map_err(CliError::Config)?;
    println!("wrote {}", path.display());
    Ok(())
}
