//! Implicit scale equations and closed asymptotic predictors.
//!
//! For a target left-tail level `eps` the contour machinery needs the bundle
//! `(omega, rho, N, {rho}, gamma, gamma_s, u)`:
//!
//! ```text
//! omega - log omega + log log a = log(1/eps)
//! rho a^{-rho} = eps,            omega = rho log a,   N = floor(rho)
//! nu psi'(u) = -a^{-{rho}}
//! gamma_s = log(1/eps) / log a
//! gamma   = gamma_s + [1/log a + 1/((lambda-1) log p_1)] log log(1/eps)
//! ```
//!
//! On top of the solved bundle sit the closed tail predictors: the periodic
//! second-order expansion of `log P{W_imm < eps}`, the joint-probability
//! asymptotics, the double-exponential fluctuation law of the first
//! branching time, and the Schröder-case leading term `L(eps) eps^tau`.

use crate::genfun::{big_f, schroder, schroder_split};
use crate::inversion;
use crate::laplace::{phi_star, psi_d1, psi_d2, PhiEvaluator};
use crate::model::{Error, EvalContext, ImmigrationModel, OffspringModel, Result};
use crate::C64;
use alloc::format;
use num_traits::Float;

/// Solved `eps`-dependent scale bundle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleSolution {
    pub eps: f64,
    pub omega: f64,
    pub rho: f64,
    /// `N = floor(rho)`.
    pub n_floor: i64,
    /// `{rho} = rho - N`.
    pub frac_rho: f64,
    pub gamma: f64,
    pub gamma_s: f64,
    /// Saddle parameter: `nu psi'(u) = -a^{-{rho}}`.
    pub u: f64,
}

/// Solves `omega - log omega = log(1/eps) - log log a` on the branch
/// `omega > 1` by Newton with derivative `1 - 1/omega`.
pub fn solve_omega(off: &OffspringModel, eps: f64, ctx: &EvalContext) -> Result<f64> {
    let target = Float::ln(1.0 / eps) - Float::ln(Float::ln(off.mean()));
    if target <= 1.0 {
        return Err(Error::EpsTooLarge { eps });
    }
    let mut w = Float::ln(1.0 / eps).max(1.5);
    for _ in 0..ctx.max_iters {
        let g = w - Float::ln(w) - target;
        if Float::abs(g) < 1e-13 {
            return Ok(w);
        }
        let step = g / (1.0 - 1.0 / w);
        w = (w - step).max(1.0 + 1e-9);
    }
    Err(Error::Numerical(format!("omega iteration stalled for eps = {eps}")))
}

/// Solves `rho a^{-rho} = eps` in log form on the decreasing branch
/// `rho > 1 / log a`, Newton safeguarded by a bracket.
pub fn solve_rho(off: &OffspringModel, eps: f64, ctx: &EvalContext) -> Result<f64> {
    let la = Float::ln(off.mean());
    let g = |r: f64| Float::ln(r) - r * la - Float::ln(eps);
    // the branch maximum of rho a^{-rho} sits at rho = 1/log a
    let mut lo = 1.0 / la;
    if eps >= lo * Float::exp(-1.0) {
        return Err(Error::EpsTooLarge { eps });
    }
    let mut hi = 2.0 * lo;
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut r = (Float::ln(1.0 / eps) / la).clamp(lo * (1.0 + 1e-12), hi);
    for _ in 0..ctx.max_iters {
        let gv = g(r);
        if Float::abs(gv) < 1e-14 * (1.0 + r * la) {
            if r <= 1.0 {
                return Err(Error::EpsTooLarge { eps });
            }
            return Ok(r);
        }
        if gv > 0.0 {
            lo = lo.max(r);
        } else {
            hi = hi.min(r);
        }
        let newton = r - gv / (1.0 / r - la);
        r = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    Err(Error::Numerical(format!("rho iteration stalled for eps = {eps}")))
}

/// Typical first-branching scale without immigration.
pub fn gamma_s(off: &OffspringModel, eps: f64) -> f64 {
    Float::ln(1.0 / eps) / Float::ln(off.mean())
}

/// Typical first-branching scale with immigration.
pub fn gamma(off: &OffspringModel, eps: f64) -> f64 {
    let l = Float::ln(1.0 / eps);
    let lam = off.second_index() as f64;
    gamma_s(off, eps)
        + (1.0 / Float::ln(off.mean()) + 1.0 / ((lam - 1.0) * Float::ln(off.p1()))) * Float::ln(l)
}

/// Solves `nu psi'(u) = -a^{-frac_rho}` by a geometric bracket scan followed
/// by bisection; `psi'` is increasing so the root is unique.
pub fn solve_u(
    imm: &ImmigrationModel,
    ev: &PhiEvaluator,
    frac_rho: f64,
    ctx: &EvalContext,
) -> Result<f64> {
    let off = ev.offspring();
    let nu = imm.min_index() as f64;
    let target = -Float::powf(off.mean(), -frac_rho) / nu;
    let a = off.mean();
    let mut lo = 1.0;
    let mut n = 0;
    while psi_d1(ev, lo, ctx)? > target {
        lo /= a;
        n += 1;
        if n > 200 {
            return Err(Error::Numerical(alloc::string::String::from("u bracket scan failed")));
        }
    }
    let mut hi = lo;
    while psi_d1(ev, hi, ctx)? < target {
        hi *= a;
        n += 1;
        if n > 400 {
            return Err(Error::Numerical(alloc::string::String::from("u bracket scan failed")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if psi_d1(ev, mid, ctx)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solves the full scale bundle at `eps`.
pub fn solve_scales(
    off: &OffspringModel,
    imm: &ImmigrationModel,
    ev: &PhiEvaluator,
    eps: f64,
    ctx: &EvalContext,
) -> Result<ScaleSolution> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps = {eps} must be positive")));
    }
    let omega = solve_omega(off, eps, ctx)?;
    let rho = solve_rho(off, eps, ctx)?;
    if omega <= 1.0 || rho <= 1.0 {
        return Err(Error::EpsTooLarge { eps });
    }
    let n_floor = Float::floor(rho) as i64;
    let frac_rho = rho - n_floor as f64;
    let u = solve_u(imm, ev, frac_rho, ctx)?;
    Ok(ScaleSolution {
        eps,
        omega,
        rho,
        n_floor,
        frac_rho,
        gamma: gamma(off, eps),
        gamma_s: gamma_s(off, eps),
        u,
    })
}

/// Range of the saddle parameter over one period of `{rho}`, reported as the
/// numerically computed bracket `[u({rho} -> 1), u({rho} -> 0)]`.
pub fn u_bracket(
    imm: &ImmigrationModel,
    ev: &PhiEvaluator,
    ctx: &EvalContext,
) -> Result<(f64, f64)> {
    let lo = solve_u(imm, ev, 1.0, ctx)?;
    let hi = solve_u(imm, ev, 0.0, ctx)?;
    Ok((lo.min(hi), lo.max(hi)))
}

/// Rate constant of the correction factors:
/// `A_n - 1 ~ (p_lambda / p_1) S(z) p_1^{n(lambda-1)}`.
pub fn a_rate_constant(off: &OffspringModel) -> f64 {
    off.p_lambda() / off.p1()
}

/// Rate constant of `R_n ~ c S(z)^2 p_1^{n(lambda-1)}`, the geometric sum of
/// the factor rates: `c = p_lambda / (p_1 (1 - p_1^{lambda-1}))`.
pub fn r_rate_constant(off: &OffspringModel) -> f64 {
    let lam = off.second_index() as i32;
    off.p_lambda() / (off.p1() * (1.0 - off.p1().powi(lam - 1)))
}

/// Saddle ingredients shared by the predictors.
struct Saddle {
    s_phi_u: f64,
    psi2: f64,
    phi_star_u: f64,
    big_f_u: f64,
}

fn saddle_values(
    off: &OffspringModel,
    imm: &ImmigrationModel,
    ev: &PhiEvaluator,
    u: f64,
    ctx: &EvalContext,
) -> Result<Saddle> {
    let pu = ev.phi(C64::new(u, 0.0))?;
    let s_phi_u = schroder(off, pu, ctx)?.value.re;
    let psi2 = psi_d2(ev, u, ctx)?;
    let phi_star_u = phi_star(off, imm, ev, C64::new(u, 0.0), ctx)?.re;
    let big_f_u = big_f(off, imm, pu, ctx)?.re;
    Ok(Saddle { s_phi_u, psi2, phi_star_u, big_f_u })
}

/// Periodic first-order coefficient of the tail expansion, a function of
/// `{rho}` through the saddle point `u`.
pub fn m_hat_1(
    off: &OffspringModel,
    imm: &ImmigrationModel,
    ev: &PhiEvaluator,
    frac_rho: f64,
    ctx: &EvalContext,
) -> Result<f64> {
    let u = solve_u(imm, ev, frac_rho, ctx)?;
    let sad = saddle_values(off, imm, ev, u, ctx)?;
    let nu = imm.min_index() as f64;
    Ok(0.5 * nu * Float::ln(off.p1()) * (1.0 - 2.0 * frac_rho)
        + u * Float::powf(off.mean(), -frac_rho)
        + nu * Float::ln(sad.s_phi_u)
        + Float::ln(imm.q_nu()))
}

/// Periodic zeroth-order coefficient of the tail expansion.
pub fn m_hat_2(
    off: &OffspringModel,
    imm: &ImmigrationModel,
    ev: &PhiEvaluator,
    frac_rho: f64,
    ctx: &EvalContext,
) -> Result<f64> {
    let u = solve_u(imm, ev, frac_rho, ctx)?;
    let sad = saddle_values(off, imm, ev, u, ctx)?;
    let nu = imm.min_index() as f64;
    let two_pi = 2.0 * core::f64::consts::PI;
    Ok(
        Float::ln(sad.phi_star_u * sad.big_f_u / (u * Float::sqrt(two_pi * nu * sad.psi2)))
            + 0.5 * nu * Float::ln(off.p1()) * (frac_rho * frac_rho - frac_rho)
            - nu * frac_rho * Float::ln(sad.s_phi_u)
            - frac_rho * Float::ln(imm.q_nu()),
    )
}

/// Closed second-order prediction of `log P{W_imm < eps}`:
/// `-sigma omega^2 + omega M_1(omega) - log(omega)/2 + M_2(omega)`,
/// assembled in the `rho` variables.
pub fn predict_tail_w_immigration(
    off: &OffspringModel,
    imm: &ImmigrationModel,
    ev: &PhiEvaluator,
    eps: f64,
    ctx: &EvalContext,
) -> Result<f64> {
    let sc = solve_scales(off, imm, ev, eps, ctx)?;
    let sigma = imm.sigma();
    let m1 = m_hat_1(off, imm, ev, sc.frac_rho, ctx)?;
    let m2 = m_hat_2(off, imm, ev, sc.frac_rho, ctx)?;
    Ok(-sigma * sc.omega * sc.omega + sc.rho * m1 - 0.5 * Float::ln(sc.rho) + m2)
}

/// Log of the exact tail factor
/// `Psi_{k,N}(z) = (1 - R_{N-k}(z)/S(z))^{nu N}`, evaluated as
/// `exp(-nu N tail_{N-k}(z))` through the split Schröder product.
pub fn log_psi_kn(
    off: &OffspringModel,
    imm: &ImmigrationModel,
    z: C64,
    k: i64,
    n_floor: i64,
    ctx: &EvalContext,
) -> Result<C64> {
    let m = n_floor - k;
    if m < 1 {
        return Err(Error::Domain(format!("need k < N, got k = {k}, N = {n_floor}")));
    }
    let split = schroder_split(off, z, m as usize, ctx)?;
    let nu_n = (imm.min_index() as i64 * n_floor) as f64;
    Ok(-split.log_tail * nu_n)
}

/// Closed asymptotic `log P{K_imm > k, W_imm < eps}` for `k = -1` or `k`
/// near `floor(gamma)`.
pub fn predict_joint(
    off: &OffspringModel,
    imm: &ImmigrationModel,
    ev: &PhiEvaluator,
    eps: f64,
    k: i64,
    ctx: &EvalContext,
) -> Result<f64> {
    let sc = solve_scales(off, imm, ev, eps, ctx)?;
    if k < -1 {
        return Err(Error::Domain(format!("k = {k} below -1")));
    }
    if k != -1 {
        let x = k - Float::floor(sc.gamma) as i64;
        if x.abs() > 30 || sc.n_floor - k < 1 {
            return Err(Error::Domain(format!(
                "k = {k} outside the supported regimes (floor gamma = {}, N = {})",
                Float::floor(sc.gamma),
                sc.n_floor
            )));
        }
    }
    let nu = imm.min_index() as f64;
    let nn = sc.n_floor as f64;
    let sad = saddle_values(off, imm, ev, sc.u, ctx)?;
    let two_pi = 2.0 * core::f64::consts::PI;
    let log_psi = log_psi_kn(off, imm, ev.phi(C64::new(sc.u, 0.0))?, k, sc.n_floor, ctx)?.re;
    let log_phi_kn =
        Float::ln(sad.phi_star_u * sad.big_f_u / (sc.u * Float::sqrt(two_pi * nu * sad.psi2)))
            + log_psi;
    Ok(nn * Float::ln(imm.q_nu())
        + 0.5 * nu * nn * (nn + 1.0) * Float::ln(off.p1())
        + log_phi_kn
        + sc.u * eps * Float::powf(off.mean(), nn)
        + nu * nn * Float::ln(sad.s_phi_u)
        - 0.5 * Float::ln(nn))
}

/// Fluctuation weight `w(eps) = c_R rho p_1^{(lambda-1)(rho-gamma)}
/// p_1^{(lambda-1)({gamma}-{rho})}` with the rate constant of `R_n`.
pub fn fluctuation_weight(off: &OffspringModel, sc: &ScaleSolution) -> f64 {
    let lam1 = off.second_index() as f64 - 1.0;
    let frac_gamma = sc.gamma - Float::floor(sc.gamma);
    r_rate_constant(off)
        * sc.rho
        * Float::powf(off.p1(), lam1 * (sc.rho - sc.gamma))
        * Float::powf(off.p1(), lam1 * (frac_gamma - sc.frac_rho))
}

/// Double-exponential fluctuation law: the asymptotic value of
/// `P{K_imm > floor(gamma) + x | W_imm < eps}`.
pub fn predict_fluctuation(
    off: &OffspringModel,
    imm: &ImmigrationModel,
    ev: &PhiEvaluator,
    eps: f64,
    x: i64,
    ctx: &EvalContext,
) -> Result<f64> {
    let sc = solve_scales(off, imm, ev, eps, ctx)?;
    let pu = ev.phi(C64::new(sc.u, 0.0))?;
    let s_phi_u = schroder(off, pu, ctx)?.value.re;
    let w = fluctuation_weight(off, &sc);
    let lam1 = off.second_index() as f64 - 1.0;
    let nu = imm.min_index() as f64;
    Ok(Float::exp(-w * nu * Float::powf(off.p1(), -lam1 * x as f64) * s_phi_u))
}

/// Schröder-case left tail `P{W < eps} ~ L(eps) eps^tau` with the periodic
/// factor `L` computed by contour quadrature.
pub fn predict_tail_w_schroder(
    off: &OffspringModel,
    ev: &PhiEvaluator,
    eps: f64,
    ctx: &EvalContext,
) -> Result<f64> {
    let l = inversion::l_periodic(off, ev, eps, ctx)?;
    Ok(l.0 * Float::powf(eps, off.tau()))
}

/// Exact conditional identity for the immigration-free branching time:
/// `P{K > gamma_s + x | W < eps} = p_1^{floor(gamma_s) + x}
/// P{W < a^{x - {gamma_s}}} / P{W < eps}`, all tails by inversion.
pub fn predict_k_conditional_schroder(
    off: &OffspringModel,
    ev: &PhiEvaluator,
    eps: f64,
    x: i64,
    ctx: &EvalContext,
) -> Result<f64> {
    let gs = gamma_s(off, eps);
    let g_floor = Float::floor(gs);
    let frac = gs - g_floor;
    let shifted_eps = Float::powf(off.mean(), x as f64 - frac);
    let num = inversion::w_tail(off, ev, shifted_eps, ctx)?;
    let den = inversion::w_tail(off, ev, eps, ctx)?;
    let log_cond = (g_floor + x as f64) * Float::ln(off.p1()) + num.log_value - den.log_value;
    Ok(Float::exp(log_cond))
}
