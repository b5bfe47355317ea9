//! Shared fixtures for the integration suites.

use gwtail_core::model::{EvalContext, ImmigrationModel, OffspringModel};

/// Offspring law with one or two children, each with probability 1/2.
pub fn half_half() -> OffspringModel {
    OffspringModel::new(&[0.5, 0.5]).unwrap()
}

/// Truncated geometric reference: the untruncated law has the
/// fractional-linear generating function `f(s) = s / (2 - s)`, exponential
/// martingale limit, and closed forms for every derived object.
pub fn geometric() -> OffspringModel {
    let w: Vec<f64> = (1..=40).map(|k| 0.5f64.powi(k)).collect();
    OffspringModel::from_truncated(&w).unwrap()
}

pub fn single_immigrant(off: &OffspringModel) -> ImmigrationModel {
    ImmigrationModel::new(&[1.0], off).unwrap()
}

pub fn ctx() -> EvalContext {
    EvalContext::default()
}

/// Upper 1% critical values of the chi-square distribution.
pub fn chi2_crit_1pct(df: usize) -> f64 {
    const TABLE: [f64; 16] = [
        0.0, 6.635, 9.210, 11.345, 13.277, 15.086, 16.812, 18.475, 20.090, 21.666, 23.209,
        24.725, 26.217, 27.688, 29.141, 30.578,
    ];
    TABLE[df]
}

/// Pearson statistic against expected probabilities; cells with fewer than
/// five expected counts are pooled into the last bin.
pub fn chi2_statistic(observed: &[u64], expected_probs: &[f64], n: u64) -> (f64, usize) {
    let mut obs_pooled: Vec<f64> = Vec::new();
    let mut exp_pooled: Vec<f64> = Vec::new();
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    for (o, p) in observed.iter().zip(expected_probs) {
        acc_o += *o as f64;
        acc_e += p * n as f64;
        if acc_e >= 5.0 {
            obs_pooled.push(acc_o);
            exp_pooled.push(acc_e);
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 {
        obs_pooled.push(acc_o);
        exp_pooled.push(acc_e);
    }
    let stat: f64 = obs_pooled
        .iter()
        .zip(&exp_pooled)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    (stat, obs_pooled.len().saturating_sub(1))
}

/// Least-squares slope of `y` against integer abscissae `xs`.
pub fn regression_slope(xs: &[i64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx: f64 = xs.iter().map(|&x| x as f64).sum::<f64>() / n;
    let my: f64 = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        num += (x as f64 - mx) * (y - my);
        den += (x as f64 - mx) * (x as f64 - mx);
    }
    num / den
}
