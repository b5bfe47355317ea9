//! Offspring and immigration laws with their derived constants.
//!
//! Probability vectors index from count one: `probs[i]` is the mass on
//! `i + 1` individuals.  Mass on zero is structurally excluded, which keeps
//! every process here supercritical and extinction-free.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use num_traits::Float;

/// Maximum tolerated deviation of a probability vector from total mass one.
/// Below it the vector is silently renormalized, above it rejected.
pub const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Empty or all-zero probability vector.
    EmptySupport,
    /// A probability entry is negative.
    NegativeEntry { index: usize, value: f64 },
    /// The entries do not sum to one within `PROB_SUM_TOL`.
    SumNotOne { sum: f64 },
    /// `p_1 = 0`: the minimal tree grows exponentially and the Schröder
    /// machinery of this crate does not apply.
    BoettcherUnsupported,
    /// The offspring law is a single atom, so the process is deterministic.
    DegenerateOffspring,
    /// Argument outside the evaluator's domain.
    Domain(String),
    /// An iteration failed to converge or a consistency check failed.
    Numerical(String),
    /// Requested epsilon is too large for the implicit scale equations.
    EpsTooLarge { eps: f64 },
    /// Monte Carlo population exceeded the configured cap.
    PopulationCap { generation: u32 },
    /// Rare-event estimate refused: too few hits for a meaningful frequency.
    RareEventInfeasible { hits: u64, needed: u64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptySupport => write!(f, "probability vector has no positive mass"),
            Error::NegativeEntry { index, value } => {
                write!(f, "negative probability {value} at count {}", index + 1)
            }
            Error::SumNotOne { sum } => {
                write!(f, "probabilities sum to {sum}, beyond tolerance {PROB_SUM_TOL}")
            }
            Error::BoettcherUnsupported => {
                write!(f, "p_1 = 0 (Böttcher case) is unsupported")
            }
            Error::DegenerateOffspring => {
                write!(f, "offspring law must put mass on some count above one")
            }
            Error::Domain(s) => write!(f, "domain error: {s}"),
            Error::Numerical(s) => write!(f, "numerical failure: {s}"),
            Error::EpsTooLarge { eps } => {
                write!(f, "eps = {eps} too large for the implicit scale equations")
            }
            Error::PopulationCap { generation } => {
                write!(f, "population cap exceeded in generation {generation}")
            }
            Error::RareEventInfeasible { hits, needed } => write!(
                f,
                "rare-event infeasible: {hits} hits observed, at least {needed} required; \
                 use the inversion method for this regime"
            ),
        }
    }
}

#[cfg(test)]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

fn validate(probs: &[f64]) -> Result<Vec<f64>> {
    let mut v: Vec<f64> = probs.to_vec();
    for (i, &p) in v.iter().enumerate() {
        if p < 0.0 || !p.is_finite() {
            return Err(Error::NegativeEntry { index: i, value: p });
        }
    }
    while v.last() == Some(&0.0) {
        v.pop();
    }
    if v.is_empty() {
        return Err(Error::EmptySupport);
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::SumNotOne { sum });
    }
    if sum != 1.0 {
        for p in v.iter_mut() {
            *p /= sum;
        }
    }
    Ok(v)
}

/// Finite-support offspring law `(p_k)` with `p_0 = 0` and `p_1 > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringModel {
    probs: Vec<f64>,
    mean: f64,
    second_index: usize,
    tau: f64,
    second_moment: f64,
}

impl OffspringModel {
    /// Validates the vector (`probs[0]` is the mass on one offspring) and
    /// derives the constants used downstream.
    pub fn new(probs: &[f64]) -> Result<Self> {
        let v = validate(probs)?;
        if v[0] <= 0.0 {
            return Err(Error::BoettcherUnsupported);
        }
        let second_index = match v.iter().enumerate().skip(1).find(|(_, &p)| p > 0.0) {
            Some((i, _)) => i + 1,
            None => return Err(Error::DegenerateOffspring),
        };
        let mean: f64 = v.iter().enumerate().map(|(i, &p)| (i + 1) as f64 * p).sum();
        let second_moment: f64 = v
            .iter()
            .enumerate()
            .map(|(i, &p)| ((i + 1) as f64).powi(2) * p)
            .sum();
        let tau = -Float::ln(v[0]) / Float::ln(mean);
        Ok(Self { probs: v, mean, second_index, tau, second_moment })
    }

    /// Mass on `k` offspring (`k >= 1`).
    pub fn prob(&self, k: usize) -> f64 {
        if k >= 1 && k <= self.probs.len() {
            self.probs[k - 1]
        } else {
            0.0
        }
    }

    /// Probability vector starting at count one.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Largest count with positive mass.
    pub fn support_max(&self) -> usize {
        self.probs.len()
    }

    /// Mean offspring number `a > 1`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `p_1`, the probability of exactly one offspring.
    pub fn p1(&self) -> f64 {
        self.probs[0]
    }

    /// Second smallest count with positive mass, `lambda >= 2`.
    pub fn second_index(&self) -> usize {
        self.second_index
    }

    /// Mass on `lambda` offspring.
    pub fn p_lambda(&self) -> f64 {
        self.probs[self.second_index - 1]
    }

    /// Left-tail exponent `tau = -log p_1 / log a`.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Second moment of the offspring count.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// `k`-th factorial moment `E[X (X-1) ... (X-k+1)]`.
    pub fn factorial_moment(&self, k: u32) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let n = (i + 1) as f64;
                let mut m = 1.0;
                for j in 0..k {
                    m *= n - j as f64;
                }
                m * p
            })
            .sum()
    }

    /// Builds a truncated geometric law `p_k ~ r^(k-1) (1-r)`-style with the
    /// residual tail folded into the largest kept atom.  `weights[k]` are the
    /// untruncated masses on counts `k+1, ...`; callers pass the raw prefix.
    pub fn from_truncated(weights: &[f64]) -> Result<Self> {
        let mut v = weights.to_vec();
        let sum: f64 = v.iter().sum();
        if let Some(last) = v.last_mut() {
            *last += 1.0 - sum;
        }
        Self::new(&v)
    }
}

/// Finite-support immigration law `(q_k)` with `q_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImmigrationModel {
    probs: Vec<f64>,
    min_index: usize,
    sigma: f64,
    mean: f64,
}

impl ImmigrationModel {
    /// Validates the vector (`probs[0]` is the mass on one immigrant) and
    /// derives `nu` and the tail curvature `sigma` for the paired offspring
    /// law.
    pub fn new(probs: &[f64], off: &OffspringModel) -> Result<Self> {
        let v = validate(probs)?;
        let min_index = v
            .iter()
            .enumerate()
            .find(|(_, &q)| q > 0.0)
            .map(|(i, _)| i + 1)
            .ok_or(Error::EmptySupport)?;
        let nu = min_index as f64;
        let sigma = nu * Float::ln(1.0 / off.p1()) / (2.0 * Float::ln(off.mean()).powi(2));
        let mean: f64 = v.iter().enumerate().map(|(i, &q)| (i + 1) as f64 * q).sum();
        Ok(Self { probs: v, min_index, sigma, mean })
    }

    /// Mass on `k` immigrants (`k >= 1`).
    pub fn prob(&self, k: usize) -> f64 {
        if k >= 1 && k <= self.probs.len() {
            self.probs[k - 1]
        } else {
            0.0
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn support_max(&self) -> usize {
        self.probs.len()
    }

    /// Minimal immigrant count `nu >= 1`.
    pub fn min_index(&self) -> usize {
        self.min_index
    }

    /// Mass on the minimal count, `q_nu`.
    pub fn q_nu(&self) -> f64 {
        self.probs[self.min_index - 1]
    }

    /// Curvature `sigma = nu log(1/p_1) / (2 log^2 a)` of the logarithmic
    /// left tail.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Mean immigrant count.
    pub fn mean(&self) -> f64 {
        self.mean
    }
}

/// Truncation orders and tolerances shared by every evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalContext {
    /// Tail tolerance for all infinite products.
    pub product_tol: f64,
    /// Cap on the base-expansion radius of the Laplace transform; the
    /// evaluator shrinks it further until the cubic remainder is negligible.
    pub base_radius: f64,
    /// Target relative quadrature error for contour inversion.
    pub quad_rel_tol: f64,
    /// Iteration cap for implicit-equation solvers and quadrature panels.
    pub max_iters: u32,
    /// Seed for Monte Carlo runs driven through this context.
    pub mc_seed: u64,
}

impl Default for EvalContext {
    fn default() -> Self {
        Self {
            product_tol: 1e-12,
            base_radius: 1e-3,
            quad_rel_tol: 1e-9,
            max_iters: 200,
            mc_seed: 0x5eed_1e5,
        }
    }
}

impl EvalContext {
    pub fn validate(&self) -> Result<()> {
        if !(self.product_tol > 0.0 && self.base_radius > 0.0 && self.quad_rel_tol > 0.0) {
            return Err(Error::Domain(String::from(
                "tolerances must be strictly positive",
            )));
        }
        if self.base_radius > 1e-3 {
            return Err(Error::Domain(String::from("base_radius must not exceed 1e-3")));
        }
        Ok(())
    }
}
