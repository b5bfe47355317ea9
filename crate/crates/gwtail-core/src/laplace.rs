//! Laplace transforms of the martingale limits.
//!
//! `phi(z) = E exp(-z W)` is evaluated through the Poincaré functional
//! equation `phi(z a^n) = f_n(phi(z))`: the argument is pulled below the base
//! radius where a second-order expansion in the moments of `W` is certified,
//! then lifted back by iterating the offspring generating function.  The
//! immigration transform `phi_*` is the infinite product of `h(phi(z a^-n))`
//! over generations, and the minimal-tree transforms `phi_k` combine both.
//!
//! `psi = log S(phi(.))` is the saddle log-height; its derivatives drive the
//! contour placement and the Gaussian factor of the asymptotic predictors.

use crate::genfun::{poly_f, poly_h, schroder};
use crate::model::{Error, EvalContext, ImmigrationModel, OffspringModel, Result};
use crate::C64;
use alloc::format;
use num_traits::Float;

/// Target bound for the quartic remainder of the base expansion.  The
/// working radius is shrunk until `E[W^4] |w|^4 / 24` falls below it, which
/// keeps the expansion error under one ulp before the lift amplifies it.
const BASE_REMAINDER_TARGET: f64 = 1e-16;

/// Relative step for the Richardson-extrapolated central differences of
/// `psi`.  Large enough that evaluation noise stays below the extrapolation
/// accuracy, small enough that the fourth-order term is negligible.
const PSI_STEP: f64 = 5e-3;

/// Evaluator for `phi` with derived moment coefficients.
#[derive(Debug, Clone)]
pub struct PhiEvaluator<'a> {
    off: &'a OffspringModel,
    base_radius: f64,
    /// `E[W^2] = Var X / (a^2 - a) + 1`, from differentiating the Poincaré
    /// equation twice at zero; the higher moments follow the same way.
    second_w_moment: f64,
    third_w_moment: f64,
    fourth_w_moment: f64,
}

impl<'a> PhiEvaluator<'a> {
    pub fn new(off: &'a OffspringModel, ctx: &EvalContext) -> Self {
        let a = off.mean();
        let var = off.second_moment() - a * a;
        let ew2 = var / (a * a - a) + 1.0;
        // higher derivatives of the Poincaré equation at zero
        let f2 = off.factorial_moment(2);
        let f3 = off.factorial_moment(3);
        let f4 = off.factorial_moment(4);
        let ew3 = (f3 + 3.0 * f2 * ew2) / (a * a * a - a);
        let ew4 =
            (f4 + 6.0 * f3 * ew2 + f2 * (3.0 * ew2 * ew2 + 4.0 * ew3)) / (a.powi(4) - a);
        let base_radius = ctx
            .base_radius
            .min((24.0 * BASE_REMAINDER_TARGET / ew4).powf(0.25));
        Self { off, base_radius, second_w_moment: ew2, third_w_moment: ew3, fourth_w_moment: ew4 }
    }

    pub fn offspring(&self) -> &OffspringModel {
        self.off
    }

    pub fn base_radius(&self) -> f64 {
        self.base_radius
    }

    pub fn second_w_moment(&self) -> f64 {
        self.second_w_moment
    }

    pub fn third_w_moment(&self) -> f64 {
        self.third_w_moment
    }

    pub fn fourth_w_moment(&self) -> f64 {
        self.fourth_w_moment
    }

    /// Lift depth for an argument of modulus `r`: the smallest `n` with
    /// `r a^-n` inside the base radius.
    pub fn lift_depth(&self, r: f64) -> u32 {
        if r <= self.base_radius {
            return 0;
        }
        Float::ceil(Float::ln(r / self.base_radius) / Float::ln(self.off.mean())) as u32
    }

    /// Base expansion lifted a fixed number of generations; the caller
    /// guarantees `|z| a^-n` is inside the base radius.
    fn phi_lifted(&self, z: C64, n: u32) -> C64 {
        let w = z * self.off.mean().powi(-(n as i32));
        let base = C64::new(1.0, 0.0) - w + w * w * (0.5 * self.second_w_moment)
            - w * w * w * (self.third_w_moment / 6.0);
        let mut v = base;
        for _ in 0..n {
            v = poly_f(self.off, v);
        }
        v
    }

    /// `phi(z) = E exp(-z W)` for `Re z >= 0`.
    pub fn phi(&self, z: C64) -> Result<C64> {
        if z.re < -1e-12 {
            return Err(Error::Domain(format!("Re z = {} negative", z.re)));
        }
        if z.norm() == 0.0 {
            return Ok(C64::new(1.0, 0.0));
        }
        Ok(self.phi_lifted(z, self.lift_depth(z.norm())))
    }
}

/// `phi_*(z) = E exp(-z W_imm)` as the product over generations of
/// `h(phi(z a^-n))`, truncated once the factors are within `product_tol`
/// of one and the geometric tail is accounted.
pub fn phi_star(
    off: &OffspringModel,
    imm: &ImmigrationModel,
    ev: &PhiEvaluator,
    z: C64,
    ctx: &EvalContext,
) -> Result<C64> {
    Ok(log_phi_star(off, imm, ev, z, ctx)?.exp())
}

/// Log of `phi_*`; summing factor logs keeps the value usable far below the
/// underflow threshold on saddle contours.
pub(crate) fn log_phi_star(
    off: &OffspringModel,
    imm: &ImmigrationModel,
    ev: &PhiEvaluator,
    z: C64,
    ctx: &EvalContext,
) -> Result<C64> {
    if z.re < -1e-12 {
        return Err(Error::Domain(format!("Re z = {} negative", z.re)));
    }
    let a = off.mean();
    let mut zz = z;
    let mut acc = C64::new(0.0, 0.0);
    for n in 0..4096u32 {
        let fac = poly_h(imm, ev.phi(zz)?);
        if fac.norm() == 0.0 {
            return Ok(C64::new(f64::NEG_INFINITY, 0.0));
        }
        acc += fac.ln();
        let dist = (fac - C64::new(1.0, 0.0)).norm();
        // remaining factors deviate from one by ~ E[Y] E[W] |z| a^{-n},
        // a geometric tail with ratio 1/a
        if n >= 4 && dist / (a - 1.0) < ctx.product_tol {
            return Ok(acc);
        }
        zz /= a;
    }
    Err(Error::Numerical(alloc::string::String::from(
        "phi_* product did not converge",
    )))
}

/// Laplace transform of the minimal-tree variable: for `k >= 0`
/// `phi_k(z) = phi(z a^-k)^{nu(k+1)} phi_*(z a^{-k-1})`; `phi_{-1} = phi_*`.
pub fn phi_k(
    off: &OffspringModel,
    imm: &ImmigrationModel,
    ev: &PhiEvaluator,
    z: C64,
    k: i64,
    ctx: &EvalContext,
) -> Result<C64> {
    if k < -1 {
        return Err(Error::Domain(format!("k = {k} below -1")));
    }
    if k == -1 {
        return phi_star(off, imm, ev, z, ctx);
    }
    let a = off.mean();
    let nu = imm.min_index() as i32;
    let zk = z * a.powi(-(k as i32));
    let head = ev.phi(zk)?.powi(nu * (k as i32 + 1));
    let rest = phi_star(off, imm, ev, zk / a, ctx)?;
    Ok(head * rest)
}

/// `psi(s) = log S(phi(s))` for real `s > 0`.
pub fn psi(ev: &PhiEvaluator, s: f64, ctx: &EvalContext) -> Result<f64> {
    if s <= 0.0 {
        return Err(Error::Domain(format!("psi needs s > 0, got {s}")));
    }
    let p = ev.phi(C64::new(s, 0.0))?;
    let sv = schroder(ev.offspring(), p, ctx)?.value.re;
    if sv <= 0.0 {
        return Err(Error::Numerical(format!("S(phi({s})) = {sv} not positive")));
    }
    Ok(Float::ln(sv))
}

fn richardson<F: Fn(f64) -> Result<f64>>(f: F, h: f64) -> Result<f64> {
    let a1 = f(h)?;
    let a2 = f(0.5 * h)?;
    Ok((4.0 * a2 - a1) / 3.0)
}

/// `psi` for the difference stencils: all points share one lift depth so
/// the stencil sees a single smooth evaluation branch.
fn psi_pinned(ev: &PhiEvaluator, s: f64, depth: u32, ctx: &EvalContext) -> Result<f64> {
    let p = ev.phi_lifted(C64::new(s, 0.0), depth);
    let sv = schroder(ev.offspring(), p, ctx)?.value.re;
    if sv <= 0.0 {
        return Err(Error::Numerical(format!("S(phi({s})) = {sv} not positive")));
    }
    Ok(Float::ln(sv))
}

/// First derivative of `psi` by Richardson-extrapolated central differences.
pub fn psi_d1(ev: &PhiEvaluator, s: f64, ctx: &EvalContext) -> Result<f64> {
    if s <= 0.0 {
        return Err(Error::Domain(format!("psi' needs s > 0, got {s}")));
    }
    let h = PSI_STEP * s;
    let depth = ev.lift_depth(s + h);
    richardson(
        |hh| {
            Ok((psi_pinned(ev, s + hh, depth, ctx)? - psi_pinned(ev, s - hh, depth, ctx)?)
                / (2.0 * hh))
        },
        h,
    )
}

/// Second derivative of `psi`; reports non-convexity as a failure since the
/// saddle construction requires `psi'' > 0`.
pub fn psi_d2(ev: &PhiEvaluator, s: f64, ctx: &EvalContext) -> Result<f64> {
    if s <= 0.0 {
        return Err(Error::Domain(format!("psi'' needs s > 0, got {s}")));
    }
    let h = PSI_STEP * s;
    let depth = ev.lift_depth(s + h);
    let mid = psi_pinned(ev, s, depth, ctx)?;
    let v = richardson(
        |hh| {
            Ok((psi_pinned(ev, s + hh, depth, ctx)? - 2.0 * mid
                + psi_pinned(ev, s - hh, depth, ctx)?)
                / (hh * hh))
        },
        h,
    )?;
    if v <= 0.0 {
        return Err(Error::Numerical(format!("psi''({s}) = {v} not positive")));
    }
    Ok(v)
}
