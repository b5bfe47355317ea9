//! `verify`: run the named invariant suite and emit a JSON report.

use super::prepare;
use crate::manifest::RunManifest;
use crate::{CliError, CliResult, CommonArgs};
use gwtail_core::checks::run_checks;
use serde::Serialize;

#[derive(Serialize)]
struct CheckRow {
    name: String,
    passed: bool,
    measured: Option<f64>,
    threshold: Option<f64>,
    detail: String,
}

#[derive(Serialize)]
struct Report {
    model: String,
    with_immigration: bool,
    checks: Vec<CheckRow>,
    passed: usize,
    failed: usize,
}

pub fn run(common: &CommonArgs) -> CliResult<()> {
    let loaded = prepare(common)?;
    let results = run_checks(&loaded.offspring, loaded.immigration.as_ref(), &loaded.ctx);
    let failed = results.iter().filter(|r| !r.passed).count();
    let report = Report {
        model: common.model.display().to_string(),
        with_immigration: loaded.immigration.is_some(),
        passed: results.len() - failed,
        failed,
        checks: results
            .iter()
            .map(|r| CheckRow {
                name: r.name.to_string(),
                passed: r.passed,
                measured: if r.measured.is_finite() { Some(r.measured) } else { None },
                threshold: if r.threshold.is_finite() { Some(r.threshold) } else { None },
                detail: r.detail.clone(),
            })
            .collect(),
    };
    let body = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Numerical(anyhow::anyhow!("{e}")))?;
    println!("{body}");
    let path = common.out.join("verify.json");
    std::fs::write(&path, &body)
        .map_err(|e| CliError::Config(anyhow::anyhow!("cannot write report: {e}")))?;

    let mut manifest = RunManifest::new("verify", &common.model, loaded.ctx.mc_seed);
    manifest.param("checks", report.checks.len());
    manifest.output(&path);
    manifest.write(&common.out).map_err(CliError::Config)?;

    if failed > 0 {
        return Err(CliError::ChecksFailed);
    }
    Ok(())
}
