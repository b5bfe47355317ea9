//! Generating-function kernel.
//!
//! For an offspring law with generating function `f(z) = sum p_n z^n` the
//! iterates factor as `f_n(z) = p_1^n z prod_{j<n} A_j(z)` with correction
//! factors
//!
//! ```text
//! A_j(z) = 1 + p_1^{-1} sum_{l>1} p_l f_j(z)^{l-1},
//! ```
//!
//! whose infinite product is the Schröder function `S`.  Everything here is
//! built from the forward orbit `f_0(z), f_1(z), ...` and the corrections
//! `A_j - 1`, kept separate from 1 so that factors far below machine epsilon
//! still contribute through `log1p`.  The immigration analogues `B_n`, and
//! the limit products `B`, `C`, `F = B C^nu`, follow the same pattern.

use crate::cmath;
use crate::model::{Error, EvalContext, ImmigrationModel, OffspringModel, Result};
use crate::C64;
use alloc::format;
use alloc::string::String;
// used by the no_std build; under test the inherent std methods win
#[allow(unused_imports)]
use num_traits::Float;

const MIN_FACTORS: usize = 10;
const MAX_FACTORS: usize = 20_000;

/// Offspring generating function evaluated without a domain check.
#[inline]
pub(crate) fn poly_f(off: &OffspringModel, z: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for &p in off.probs().iter().rev() {
        acc = (acc + p) * z;
    }
    acc
}

/// `A_j - 1` given `w = f_j(z)`, i.e. `p_1^{-1} sum_{l>1} p_l w^{l-1}`.
#[inline]
pub(crate) fn a_correction(off: &OffspringModel, w: C64) -> C64 {
    let probs = off.probs();
    let mut acc = C64::new(0.0, 0.0);
    for &p in probs.iter().skip(1).rev() {
        acc = (acc + p) * w;
    }
    acc / off.p1()
}

/// `B_n - 1` given `w = f_n(z)`, i.e. `q_nu^{-1} sum_{l>nu} q_l w^{l-nu}`.
#[inline]
pub(crate) fn b_correction(imm: &ImmigrationModel, w: C64) -> C64 {
    let probs = imm.probs();
    let nu = imm.min_index();
    let mut acc = C64::new(0.0, 0.0);
    for &q in probs.iter().skip(nu).rev() {
        acc = (acc + q) * w;
    }
    acc / imm.q_nu()
}

/// Immigration generating function `h(z) = sum q_n z^n`.
#[inline]
pub(crate) fn poly_h(imm: &ImmigrationModel, z: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for &q in imm.probs().iter().rev() {
        acc = (acc + q) * z;
    }
    acc
}

fn check_disk(z: C64) -> Result<()> {
    if z.norm() > 1.0 + 1e-12 {
        return Err(Error::Domain(format!("|z| = {} exceeds 1", z.norm())));
    }
    Ok(())
}

/// Offspring generating function `f(z)` on the closed unit disk.
pub fn pgf(off: &OffspringModel, z: C64) -> Result<C64> {
    check_disk(z)?;
    Ok(poly_f(off, z))
}

/// `n`-fold iterate `f_n(z)`; `f_0` is the identity.
pub fn pgf_iter(off: &OffspringModel, z: C64, n: u32) -> Result<C64> {
    check_disk(z)?;
    let mut w = z;
    for _ in 0..n {
        w = poly_f(off, w);
    }
    Ok(w)
}

/// Correction factor `A_j(z)`.
pub fn a_factor(off: &OffspringModel, z: C64, j: u32) -> Result<C64> {
    check_disk(z)?;
    let mut w = z;
    for _ in 0..j {
        w = poly_f(off, w);
    }
    Ok(C64::new(1.0, 0.0) + a_correction(off, w))
}

/// Immigration correction factor `B_n(z)`.
pub fn b_factor(off: &OffspringModel, imm: &ImmigrationModel, z: C64, n: u32) -> Result<C64> {
    check_disk(z)?;
    let mut w = z;
    for _ in 0..n {
        w = poly_f(off, w);
    }
    Ok(C64::new(1.0, 0.0) + b_correction(imm, w))
}

/// A converged infinite product together with where it was truncated and a
/// bound on the neglected log-tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductTail {
    pub value: C64,
    pub truncation_index: usize,
    pub tail_bound: f64,
}

fn domain_lt_one(z: C64) -> Result<()> {
    if z.norm() >= 1.0 - 1e-12 {
        return Err(Error::Domain(format!(
            "|z| = {} not strictly inside the unit disk",
            z.norm()
        )));
    }
    Ok(())
}

/// Log of the Schröder product split at index `n`:
/// `prefix = log z + sum_{j<n} log A_j(z)` and `tail = sum_{j>=n} log A_j(z)`,
/// so that `S = exp(prefix + tail)`, `p_1^{-n} f_n = exp(prefix)` and
/// `R_n = exp(prefix) (exp(tail) - 1)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SchroderSplit {
    pub log_prefix: C64,
    pub log_tail: C64,
}

pub(crate) fn schroder_split(
    off: &OffspringModel,
    z: C64,
    n: usize,
    _ctx: &EvalContext,
) -> Result<SchroderSplit> {
    domain_lt_one(z)?;
    let mut w = z;
    let mut log_prefix = z.ln();
    let mut log_tail = C64::new(0.0, 0.0);
    let mut first_tail = 0.0f64;
    let mut j = 0usize;
    loop {
        let c = a_correction(off, w);
        let lc = cmath::log1p(c);
        if lc.re == f64::NEG_INFINITY {
            return Err(Error::Numerical(format!(
                "correction factor vanished at index {j}"
            )));
        }
        let cn = c.norm();
        if j < n {
            log_prefix += lc;
        } else {
            log_tail += lc;
            if first_tail == 0.0 {
                first_tail = cn.max(f64::MIN_POSITIVE);
            }
        }
        j += 1;
        // the tail sum only needs relative accuracy: its terms decay
        // geometrically, so stop once they are negligible against the head
        if j > n && j >= MIN_FACTORS && (cn == 0.0 || cn <= 1e-17 * first_tail) {
            return Ok(SchroderSplit { log_prefix, log_tail });
        }
        if j >= MAX_FACTORS {
            return Err(Error::Numerical(format!(
                "Schröder product did not converge within {MAX_FACTORS} factors"
            )));
        }
        w = poly_f(off, w);
    }
}

/// Schröder function `S(z) = z prod_{j>=0} A_j(z)`, truncated once the
/// geometric log-tail bound drops below `product_tol`.
pub fn schroder(off: &OffspringModel, z: C64, ctx: &EvalContext) -> Result<ProductTail> {
    domain_lt_one(z)?;
    if z.norm() == 0.0 {
        return Ok(ProductTail { value: C64::new(0.0, 0.0), truncation_index: 0, tail_bound: 0.0 });
    }
    let ratio = off.p1().powi(off.second_index() as i32 - 1);
    let mut w = z;
    let mut value = z;
    let mut j = 0usize;
    loop {
        let c = a_correction(off, w);
        value *= C64::new(1.0, 0.0) + c;
        j += 1;
        let bound = c.norm() * ratio / (1.0 - ratio);
        if j >= MIN_FACTORS && bound < ctx.product_tol {
            return Ok(ProductTail { value, truncation_index: j, tail_bound: bound });
        }
        if j >= MAX_FACTORS {
            return Err(Error::Numerical(String::from("Schröder product did not converge")));
        }
        w = poly_f(off, w);
    }
}

/// `R_n(z) = S(z) - p_1^{-n} f_n(z)`, evaluated through the split product so
/// the cancellation between the two terms costs no precision.
pub fn r_correction(off: &OffspringModel, z: C64, n: u32, ctx: &EvalContext) -> Result<C64> {
    if z.norm() == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let split = schroder_split(off, z, n as usize, ctx)?;
    Ok(split.log_prefix.exp() * cmath::expm1(split.log_tail))
}

/// Limit `B(z)` of the immigration correction products `prod_{j=1}^n B_j(z)`.
pub fn big_b(
    off: &OffspringModel,
    imm: &ImmigrationModel,
    z: C64,
    ctx: &EvalContext,
) -> Result<ProductTail> {
    domain_lt_one(z)?;
    if imm.support_max() == imm.min_index() {
        // single atom: every B_n is exactly 1
        return Ok(ProductTail { value: C64::new(1.0, 0.0), truncation_index: 0, tail_bound: 0.0 });
    }
    let ratio = off.p1();
    let mut w = poly_f(off, z); // f_1
    let mut value = C64::new(1.0, 0.0);
    let mut j = 1usize;
    loop {
        let c = b_correction(imm, w);
        value *= C64::new(1.0, 0.0) + c;
        let bound = c.norm() * ratio / (1.0 - ratio);
        if j >= MIN_FACTORS && bound < ctx.product_tol {
            return Ok(ProductTail { value, truncation_index: j, tail_bound: bound });
        }
        if j >= MAX_FACTORS {
            return Err(Error::Numerical(String::from("B product did not converge")));
        }
        w = poly_f(off, w);
        j += 1;
    }
}

/// Limit `C(z)` of `prod_{j=1}^n A_j(z)^{-j}`.  Fails if a factor vanishes,
/// which signals a point outside the validated sector.
pub fn big_c(off: &OffspringModel, z: C64, ctx: &EvalContext) -> Result<ProductTail> {
    domain_lt_one(z)?;
    let ratio = off.p1().powi(off.second_index() as i32 - 1);
    let mut w = poly_f(off, z); // f_1
    let mut log_sum = C64::new(0.0, 0.0);
    let mut j = 1usize;
    loop {
        let c = a_correction(off, w);
        let lc = cmath::log1p(c);
        if lc.re == f64::NEG_INFINITY {
            return Err(Error::Numerical(format!("A_{j} vanished; point outside sector")));
        }
        log_sum += lc * j as f64;
        // tail of sum_{i>j} i |log A_i| for a geometric tail with this ratio
        let bound = lc.norm() * (j as f64 * ratio / (1.0 - ratio) + ratio / (1.0 - ratio).powi(2));
        if j >= MIN_FACTORS && bound < ctx.product_tol {
            return Ok(ProductTail {
                value: (-log_sum).exp(),
                truncation_index: j,
                tail_bound: bound,
            });
        }
        if j >= MAX_FACTORS {
            return Err(Error::Numerical(String::from("C product did not converge")));
        }
        w = poly_f(off, w);
        j += 1;
    }
}

/// `F(z) = B(z) C(z)^nu`, the limit prefactor of the immigration products.
pub fn big_f(
    off: &OffspringModel,
    imm: &ImmigrationModel,
    z: C64,
    ctx: &EvalContext,
) -> Result<C64> {
    let b = big_b(off, imm, z, ctx)?;
    let c = big_c(off, z, ctx)?;
    Ok(b.value * c.value.powi(imm.min_index() as i32))
}

/// Empirically validated evaluation sector: the largest half-angle `theta`
/// such that `|S(z)/z|` (and `|B(z)|` when immigration is present) stays
/// above `1e-6` on the boundary of `{|z| <= radius, |arg z| <= theta}`.
#[derive(Debug, Clone, Copy)]
pub struct Sector {
    pub radius: f64,
    pub half_angle: f64,
    pub min_schroder_ratio: f64,
    pub min_b: f64,
}

pub const SECTOR_RADIUS: f64 = 0.95;
const SECTOR_FLOOR: f64 = 1e-6;

fn sector_min(
    off: &OffspringModel,
    imm: Option<&ImmigrationModel>,
    theta: f64,
    ctx: &EvalContext,
) -> Result<(f64, f64)> {
    let mut min_s = f64::INFINITY;
    let mut min_b = f64::INFINITY;
    let mut probe = |z: C64| -> Result<()> {
        let s = schroder(off, z, ctx)?;
        min_s = min_s.min(s.value.norm() / z.norm());
        if let Some(imm) = imm {
            let b = big_b(off, imm, z, ctx)?;
            min_b = min_b.min(b.value.norm());
        }
        Ok(())
    };
    for i in 0..=64 {
        let phi = theta * (2.0 * i as f64 / 64.0 - 1.0);
        probe(C64::from_polar(SECTOR_RADIUS, phi))?;
    }
    for i in 1..=32 {
        let r = SECTOR_RADIUS * i as f64 / 32.0;
        probe(C64::from_polar(r, theta))?;
        probe(C64::from_polar(r, -theta))?;
    }
    Ok((min_s, min_b))
}

impl Sector {
    /// Binary-searches the largest admissible half-angle for this model.
    pub fn compute(
        off: &OffspringModel,
        imm: Option<&ImmigrationModel>,
        ctx: &EvalContext,
    ) -> Result<Sector> {
        let mut lo = 0.0f64;
        let mut hi = core::f64::consts::FRAC_PI_2 - 1e-3;
        let (s0, b0) = sector_min(off, imm, 1e-3, ctx)?;
        if s0 <= SECTOR_FLOOR || b0 <= SECTOR_FLOOR {
            return Err(Error::Numerical(String::from(
                "no admissible sector at the working radius",
            )));
        }
        let mut best = (1e-3, s0, b0);
        if let Ok((s, b)) = sector_min(off, imm, hi, ctx) {
            if s > SECTOR_FLOOR && b > SECTOR_FLOOR {
                return Ok(Sector {
                    radius: SECTOR_RADIUS,
                    half_angle: hi,
                    min_schroder_ratio: s,
                    min_b: b,
                });
            }
        }
        for _ in 0..24 {
            let mid = 0.5 * (lo + hi);
            match sector_min(off, imm, mid, ctx) {
                Ok((s, b)) if s > SECTOR_FLOOR && b > SECTOR_FLOOR => {
                    best = (mid, s, b);
                    lo = mid;
                }
                _ => hi = mid,
            }
        }
        Ok(Sector {
            radius: SECTOR_RADIUS,
            half_angle: best.0,
            min_schroder_ratio: best.1,
            min_b: best.2,
        })
    }
}
