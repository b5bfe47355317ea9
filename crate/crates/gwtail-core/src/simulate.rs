//! Monte Carlo sampling and exact small-generation distributions.
//!
//! Population steps draw the offspring counts of a whole generation at once:
//! small populations through a Vose alias table (O(1) per individual), large
//! ones through the multinomial decomposition into successive binomials,
//! which keeps a 30-generation path at a handful of draws per generation.
//!
//! Sampling is organized in fixed-size chunks, each driven by its own
//! ChaCha stream (`stream = chunk index`, seeded from the run seed), so the
//! merge over chunks is deterministic no matter how the chunks are scheduled
//! across workers.
//!
//! `exact_zn_pmf` composes generating-function coefficient vectors and is
//! the brute-force oracle for everything at small `n`.

use crate::inversion::{TailMethod, TailResult};
use crate::model::{Error, ImmigrationModel, OffspringModel, Result};
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

/// Monte Carlo run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    /// Truncation depth: `W` is approximated by `Z_generations / a^generations`.
    pub generations: u32,
    pub samples: u64,
    pub seed: u64,
    /// Abort guard against runaway paths.
    pub population_cap: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { generations: 30, samples: 1_000_000, seed: 1, population_cap: 1 << 40 }
    }
}

/// Minimum observed hits for a frequency estimate to be reported.
pub const MIN_HITS: u64 = 100;

/// Samples per RNG stream; the stream index is the chunk index.
pub const CHUNK: u64 = 1 << 14;

/// Vose alias table for O(1) draws from a finite law on `1..=K`.
#[derive(Debug, Clone)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    pub fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        let total: f64 = weights.iter().sum();
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut alias = vec![0usize; n];
        let mut prob = vec![0.0f64; n];
        let mut small: Vec<usize> = (0..n).filter(|&i| scaled[i] < 1.0).collect();
        let mut large: Vec<usize> = (0..n).filter(|&i| scaled[i] >= 1.0).collect();
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        for &i in large.iter().chain(small.iter()) {
            prob[i] = 1.0;
        }
        AliasTable { prob, alias }
    }

    /// Draws an index in `0..K`; add one for the count.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let n = self.prob.len();
        let i = rng.random_range(0..n);
        if rng.random::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i]
        }
    }
}

/// Reusable per-model sampling state.
#[derive(Debug, Clone)]
pub struct Sampler {
    off: OffspringModel,
    imm: Option<ImmigrationModel>,
    off_alias: AliasTable,
    imm_alias: Option<AliasTable>,
}

/// Above this population the generation step switches from per-individual
/// alias draws to the binomial decomposition of the multinomial counts.
const BINOMIAL_BLOCK: u64 = 32;

impl Sampler {
    pub fn new(off: &OffspringModel, imm: Option<&ImmigrationModel>) -> Self {
        Sampler {
            off: off.clone(),
            imm: imm.cloned(),
            off_alias: AliasTable::new(off.probs()),
            imm_alias: imm.map(|m| AliasTable::new(m.probs())),
        }
    }

    /// Total offspring of `z` independent individuals.
    fn step<R: Rng + ?Sized>(&self, z: u64, rng: &mut R) -> u64 {
        let probs = self.off.probs();
        if probs.len() == 1 {
            return z; // deterministic single-child law is rejected upstream,
                      // but keep the arithmetic total
        }
        if z < BINOMIAL_BLOCK {
            let mut total = 0u64;
            for _ in 0..z {
                total += (self.off_alias.sample(rng) + 1) as u64;
            }
            return total;
        }
        // multinomial by conditional binomials
        let mut total = 0u64;
        let mut remaining = z;
        let mut mass_left = 1.0f64;
        for (i, &p) in probs.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            if i + 1 == probs.len() {
                total += (i as u64 + 1) * remaining;
                break;
            }
            let q = (p / mass_left).clamp(0.0, 1.0);
            let draw = Binomial::new(remaining, q).map(|b| b.sample(rng)).unwrap_or(0);
            total += (i as u64 + 1) * draw;
            remaining -= draw;
            mass_left -= p;
        }
        total
    }

    fn immigrant<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match &self.imm_alias {
            Some(t) => (t.sample(rng) + 1) as u64,
            None => 0,
        }
    }
}

/// One Galton-Watson path `Z_0 = 1, ..., Z_gens`.
pub fn sample_gw_path<R: Rng + ?Sized>(
    off: &OffspringModel,
    gens: u32,
    cap: u64,
    rng: &mut R,
) -> Result<Vec<u64>> {
    let sampler = Sampler::new(off, None);
    sample_path_with(&sampler, gens, cap, rng)
}

/// One path with immigration: `Z_0 = Y_0`, then offspring plus a fresh
/// immigrant batch each generation.
pub fn sample_gwi_path<R: Rng + ?Sized>(
    off: &OffspringModel,
    imm: &ImmigrationModel,
    gens: u32,
    cap: u64,
    rng: &mut R,
) -> Result<Vec<u64>> {
    let sampler = Sampler::new(off, Some(imm));
    sample_path_with(&sampler, gens, cap, rng)
}

fn sample_path_with<R: Rng + ?Sized>(
    sampler: &Sampler,
    gens: u32,
    cap: u64,
    rng: &mut R,
) -> Result<Vec<u64>> {
    let mut path = Vec::with_capacity(gens as usize + 1);
    let mut z = if sampler.imm.is_some() { sampler.immigrant(rng) } else { 1 };
    path.push(z);
    for g in 0..gens {
        z = sampler.step(z, rng);
        if sampler.imm.is_some() {
            z += sampler.immigrant(rng);
        }
        if z > cap {
            return Err(Error::PopulationCap { generation: g + 1 });
        }
        path.push(z);
    }
    Ok(path)
}

fn rng_for_chunk(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Per-chunk tally: hits below each `eps` and, when requested, the
/// first-branching histogram on those hit paths.
#[derive(Debug, Clone, Default)]
pub struct ChunkCounts {
    pub samples: u64,
    pub hits: Vec<u64>,
    /// For each eps, counts of `K > threshold + x` with `x` indexing
    /// `K_OFFSETS`; only filled by the conditional estimator.
    pub cond: Vec<Vec<u64>>,
}

/// Runs one chunk of the tail estimator; pure in `(seed, chunk)`, so any
/// scheduler that sums the outputs reproduces the serial result.
pub fn tail_chunk(
    off: &OffspringModel,
    imm: Option<&ImmigrationModel>,
    eps_list: &[f64],
    gens: u32,
    cap: u64,
    seed: u64,
    chunk: u64,
    n: u64,
) -> Result<ChunkCounts> {
    let sampler = Sampler::new(off, imm);
    let mut rng = rng_for_chunk(seed, chunk);
    let norm = Float::powi(off.mean(), gens as i32);
    let mut hits = vec![0u64; eps_list.len()];
    for _ in 0..n {
        let mut z = if sampler.imm.is_some() { sampler.immigrant(&mut rng) } else { 1 };
        for g in 0..gens {
            z = sampler.step(z, &mut rng);
            if sampler.imm.is_some() {
                z += sampler.immigrant(&mut rng);
            }
            if z > cap {
                return Err(Error::PopulationCap { generation: g + 1 });
            }
        }
        let w = z as f64 / norm;
        for (i, &e) in eps_list.iter().enumerate() {
            if w < e {
                hits[i] += 1;
            }
        }
    }
    Ok(ChunkCounts { samples: n, hits, cond: Vec::new() })
}

fn chunks_of(samples: u64) -> impl Iterator<Item = (u64, u64)> {
    let full = samples / CHUNK;
    let rest = samples % CHUNK;
    (0..full)
        .map(|i| (i, CHUNK))
        .chain(core::iter::once((full, rest)).filter(|&(_, n)| n > 0))
}

/// Chunk layout for a sample budget: `(chunk index, samples in chunk)`.
pub fn chunk_layout(samples: u64) -> Vec<(u64, u64)> {
    chunks_of(samples).collect()
}

/// Turns merged hit counts into frequency estimates with binomial standard
/// errors, refusing any eps whose hit count falls below `MIN_HITS`.
pub fn tail_results_from_counts(hits: &[u64], total: u64) -> Result<Vec<TailResult>> {
    hits.iter()
        .map(|&h| {
            if h < MIN_HITS {
                return Err(Error::RareEventInfeasible { hits: h, needed: MIN_HITS });
            }
            let p = h as f64 / total as f64;
            let se = Float::sqrt(p * (1.0 - p) / total as f64);
            Ok(TailResult {
                value: p,
                log_value: Float::ln(p),
                abs_error_est: se,
                method: TailMethod::MonteCarlo,
                contour_shift: 0.0,
                t_truncation: 0.0,
            })
        })
        .collect()
}

/// Empirical `P{W_approx < eps}` for several eps in a single pass.
/// Refuses any eps whose hit count falls below `MIN_HITS`.
pub fn estimate_tail_mc_multi(
    off: &OffspringModel,
    imm: Option<&ImmigrationModel>,
    eps_list: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<TailResult>> {
    let mut hits = vec![0u64; eps_list.len()];
    let mut total = 0u64;
    for (chunk, n) in chunks_of(cfg.samples) {
        let c = tail_chunk(off, imm, eps_list, cfg.generations, cfg.population_cap, cfg.seed, chunk, n)?;
        total += c.samples;
        for (h, ch) in hits.iter_mut().zip(c.hits) {
            *h += ch;
        }
    }
    tail_results_from_counts(&hits, total)
}

/// Empirical `P{W_approx < eps}` with binomial standard error.
pub fn estimate_tail_mc(
    off: &OffspringModel,
    imm: Option<&ImmigrationModel>,
    eps: f64,
    cfg: &SimConfig,
) -> Result<TailResult> {
    Ok(estimate_tail_mc_multi(off, imm, &[eps], cfg)?.remove(0))
}

/// First generation in which a path exceeds its essential minimum: one per
/// lineage without immigration, `nu (n+1)` with.  Paths that never branch
/// within the horizon report `horizon + 1`.
pub fn first_branching(path: &[u64], nu: u64, with_imm: bool) -> u32 {
    for (n, &z) in path.iter().enumerate() {
        let min = if with_imm { nu * (n as u64 + 1) } else { 1 };
        if z > min {
            return n as u32;
        }
    }
    path.len() as u32
}

/// Conditional `P{K > threshold + x | W_approx < eps}` by rejection on the
/// tail event.  `threshold` is the integer part of the relevant branching
/// scale; the caller picks it.
pub fn estimate_k_conditional(
    off: &OffspringModel,
    imm: Option<&ImmigrationModel>,
    eps: f64,
    threshold: i64,
    x: i64,
    cfg: &SimConfig,
) -> Result<f64> {
    let nu = imm.map(|m| m.min_index() as u64).unwrap_or(1);
    let with_imm = imm.is_some();
    let sampler = Sampler::new(off, imm);
    let norm = Float::powi(off.mean(), cfg.generations as i32);
    let bar = threshold + x;
    let mut cond_hits = 0u64;
    let mut exceed = 0u64;
    for (chunk, n) in chunks_of(cfg.samples) {
        let mut rng = rng_for_chunk(cfg.seed, chunk);
        for _ in 0..n {
            let path =
                sample_path_with(&sampler, cfg.generations, cfg.population_cap, &mut rng)?;
            let w = *path.last().unwrap() as f64 / norm;
            if w < eps {
                cond_hits += 1;
                if first_branching(&path, nu, with_imm) as i64 > bar {
                    exceed += 1;
                }
            }
        }
    }
    if cond_hits < MIN_HITS {
        return Err(Error::RareEventInfeasible { hits: cond_hits, needed: MIN_HITS });
    }
    Ok(exceed as f64 / cond_hits as f64)
}

/// One sample of the minimal-tree variable
/// `V_k = a^{-k} sum_{i<=nu(k+1)} W_i + a^{-k-1} W_imm`,
/// with each limit approximated at the configured depth.
pub fn sample_v_k<R: Rng + ?Sized>(
    off: &OffspringModel,
    imm: &ImmigrationModel,
    k: i64,
    gens: u32,
    cap: u64,
    rng: &mut R,
) -> Result<f64> {
    let norm = Float::powi(off.mean(), gens as i32);
    if k == -1 {
        let path = sample_gwi_path(off, imm, gens, cap, rng)?;
        return Ok(*path.last().unwrap() as f64 / norm);
    }
    let nu = imm.min_index() as i64;
    let mut sum = 0.0;
    for _ in 0..nu * (k + 1) {
        let path = sample_gw_path(off, gens, cap, rng)?;
        sum += *path.last().unwrap() as f64 / norm;
    }
    let wi = sample_gwi_path(off, imm, gens, cap, rng)?;
    let a = off.mean();
    Ok(Float::powi(a, -(k as i32)) * sum
        + Float::powi(a, -(k as i32 + 1)) * (*wi.last().unwrap() as f64 / norm))
}

/// Exact law of `Z_n` (or `Z_n` with immigration) by coefficient-level
/// composition of generating functions, truncated at `support_cap` with the
/// lost mass checked against `1e-9`.
pub fn exact_zn_pmf(
    off: &OffspringModel,
    imm: Option<&ImmigrationModel>,
    n: u32,
    support_cap: usize,
) -> Result<Vec<f64>> {
    let cap = support_cap;
    // coefficients of f applied to a polynomial g: f(g) = sum_k p_k g^k
    let compose_f = |g: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; cap + 1];
        let mut power = vec![0.0; cap + 1];
        power[0] = 1.0;
        for &p in off.probs() {
            power = poly_mul(&power, g, cap);
            if p != 0.0 {
                for (o, &c) in out.iter_mut().zip(power.iter()) {
                    *o += p * c;
                }
            }
        }
        out
    };
    let mut identity = vec![0.0; cap + 1];
    if cap >= 1 {
        identity[1] = 1.0;
    }
    let pmf = match imm {
        None => {
            let mut g = identity;
            for _ in 0..n {
                g = compose_f(&g);
            }
            g
        }
        Some(imm) => {
            // pgf of the immigration process: prod_{m=0}^{n} h(f_m(z))
            let apply_h = |g: &[f64]| -> Vec<f64> {
                let mut out = vec![0.0; cap + 1];
                let mut power = vec![0.0; cap + 1];
                power[0] = 1.0;
                for &q in imm.probs() {
                    power = poly_mul(&power, g, cap);
                    if q != 0.0 {
                        for (o, &c) in out.iter_mut().zip(power.iter()) {
                            *o += q * c;
                        }
                    }
                }
                out
            };
            let mut fm = identity;
            let mut prod = vec![0.0; cap + 1];
            prod[0] = 1.0;
            for m in 0..=n {
                prod = poly_mul(&prod, &apply_h(&fm), cap);
                if m < n {
                    fm = compose_f(&fm);
                }
            }
            prod
        }
    };
    let lost = 1.0 - pmf.iter().sum::<f64>();
    if lost > 1e-9 {
        return Err(Error::Numerical(alloc::format!(
            "support cap {support_cap} loses probability mass {lost:e}"
        )));
    }
    Ok(pmf)
}

fn poly_mul(a: &[f64], b: &[f64], cap: usize) -> Vec<f64> {
    let mut out = vec![0.0; cap + 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            if i + j > cap {
                break;
            }
            out[i + j] += ai * bj;
        }
    }
    out
}
