//! Property tests and Monte Carlo oracles cutting across modules.

mod common;

use common::*;
use gwtail_core::genfun::{a_factor, b_factor, pgf_iter, schroder};
use gwtail_core::laplace::{phi_k, phi_star, PhiEvaluator};
use gwtail_core::simulate::{
    estimate_k_conditional, exact_zn_pmf, sample_gw_path, sample_gwi_path, sample_v_k,
    tail_chunk, SimConfig, CHUNK,
};
use gwtail_core::{inversion, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // |S(z)| <= S(|z|) inside the disk
    #[test]
    fn schroder_modulus_dominated(r in 0.01f64..0.93, th in 0.0f64..6.283) {
        let off = half_half();
        let c = ctx();
        let z = C64::from_polar(r, th);
        let lhs = schroder(&off, z, &c).unwrap().value.norm();
        let rhs = schroder(&off, re(r), &c).unwrap().value.re;
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-14);
    }

    // S and S/s increasing on (0, 0.95)
    #[test]
    fn schroder_increasing(s1 in 0.01f64..0.94, d in 0.001f64..0.5) {
        let off = half_half();
        let c = ctx();
        let s2 = (s1 + d).min(0.945);
        let v1 = schroder(&off, re(s1), &c).unwrap().value.re;
        let v2 = schroder(&off, re(s2), &c).unwrap().value.re;
        prop_assert!(v2 >= v1);
        prop_assert!(v2 / s2 >= v1 / s1 * (1.0 - 1e-12));
    }

    // |phi(z)| <= phi(Re z) <= 1 on the right half plane
    #[test]
    fn phi_modulus_dominated(s in 0.0f64..30.0, t in -60.0f64..60.0) {
        let off = half_half();
        let c = ctx();
        let ev = PhiEvaluator::new(&off, &c);
        let lhs = ev.phi(C64::new(s, t)).unwrap().norm();
        let rhs = ev.phi(re(s)).unwrap().re;
        prop_assert!(lhs <= rhs * (1.0 + 1e-10));
        prop_assert!(rhs <= 1.0 + 1e-12);
    }

    // iterate semigroup: f_{m+n} = f_m o f_n
    #[test]
    fn iterate_semigroup(m in 0u32..12, n in 0u32..12, s in 0.0f64..0.99) {
        let off = half_half();
        let both = pgf_iter(&off, re(s), m + n).unwrap();
        let inner = pgf_iter(&off, re(s), n).unwrap();
        let outer = pgf_iter(&off, inner, m).unwrap();
        prop_assert!((both - outer).norm() < 1e-13);
    }

    // product identity: prod_{n=1}^N h(f_n(z)) =
    //   q_nu^N p1^{nu N(N+1)/2} z^{nu N} (prod prod A_j^nu)(prod B_n)
    #[test]
    fn h_product_identity(n_max in 1u32..12, r in 0.05f64..0.6, th in -0.6f64..0.6) {
        let off = half_half();
        let imm = gwtail_core::ImmigrationModel::new(&[0.5, 0.5], &off).unwrap();
        let z = C64::from_polar(r, th);
        let nu = imm.min_index() as i32;
        let mut lhs = C64::new(1.0, 0.0);
        for n in 1..=n_max {
            let fnz = pgf_iter(&off, z, n).unwrap();
            let mut h = C64::new(0.0, 0.0);
            for &q in imm.probs().iter().rev() {
                h = (h + q) * fnz;
            }
            lhs *= h;
        }
        let mut aa = C64::new(1.0, 0.0);
        let mut bb = C64::new(1.0, 0.0);
        for n in 1..=n_max {
            for j in 0..n {
                aa *= a_factor(&off, z, j).unwrap().powi(nu);
            }
            bb *= b_factor(&off, &imm, z, n).unwrap();
        }
        let pref = imm.q_nu().powi(n_max as i32)
            * off.p1().powf(0.5 * nu as f64 * n_max as f64 * (n_max as f64 + 1.0));
        let rhs = z.powi(nu * n_max as i32) * aa * bb * pref;
        prop_assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1e-30));
    }
}

#[test]
fn phi_zero_mc_oracle() {
    // phi_0(z) = phi(z) phi_*(z/a) against a 10^6-sample Monte Carlo of the
    // minimal-tree variable V_0 = W_1 + W_imm / a at z = 1
    let off = half_half();
    let imm = single_immigrant(&off);
    let c = ctx();
    let ev = PhiEvaluator::new(&off, &c);
    let predicted = phi_k(&off, &imm, &ev, re(1.0), 0, &c).unwrap().re;

    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let n = 1_000_000u64;
    let gens = 25;
    let mut done = 0u64;
    let mut chunk = 0u64;
    while done < n {
        let take = CHUNK.min(n - done);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        rng.set_stream(chunk);
        for _ in 0..take {
            let v = sample_v_k(&off, &imm, 0, gens, 1 << 40, &mut rng).unwrap();
            let e = (-v).exp();
            sum += e;
            sumsq += e * e;
        }
        done += take;
        chunk += 1;
    }
    let mean = sum / n as f64;
    let sd = ((sumsq / n as f64 - mean * mean) / n as f64).sqrt();
    assert!(
        (mean - predicted).abs() < 3.0 * sd,
        "MC {mean} +- {sd} vs phi_0(1) = {predicted}"
    );
}

#[test]
fn z2_law_chi_square() {
    // Z_2 law for p = [1/2, 1/2] is (1/4, 3/8, 1/4, 1/8) on {1, 2, 3, 4}
    let off = half_half();
    let n = 1_000_000u64;
    let mut counts = [0u64; 4];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..n {
        let p = sample_gw_path(&off, 2, 1 << 30, &mut rng).unwrap();
        counts[(p[2] - 1) as usize] += 1;
    }
    let probs = [0.25, 0.375, 0.25, 0.125];
    let (stat, df) = chi2_statistic(&counts, &probs, n);
    assert!(stat < chi2_crit_1pct(df), "chi2 = {stat} at df = {df}");
}

#[test]
fn mc_matches_exact_pmf_with_immigration() {
    // chi-square of sampled Z_6 (with immigration) against the exact
    // convolution law
    let off = half_half();
    let imm = single_immigrant(&off);
    let n_gen = 6;
    let pmf = exact_zn_pmf(&off, Some(&imm), n_gen, 256).unwrap();
    let n = 1_000_000u64;
    let mut counts = vec![0u64; pmf.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..n {
        let p = sample_gwi_path(&off, &imm, n_gen, 1 << 30, &mut rng).unwrap();
        let z = *p.last().unwrap() as usize;
        if z < counts.len() {
            counts[z] += 1;
        }
    }
    let (stat, df) = chi2_statistic(&counts, &pmf, n);
    assert!(stat < chi2_crit_1pct(df.min(15)), "chi2 = {stat} at df = {df}");
}

#[test]
fn essential_minimum_with_immigration() {
    // the minimal population in generation 3 is nu (3 + 1) = 4 and is hit
    let off = half_half();
    let imm = single_immigrant(&off);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut min_seen = u64::MAX;
    for _ in 0..100_000 {
        let p = sample_gwi_path(&off, &imm, 3, 1 << 30, &mut rng).unwrap();
        min_seen = min_seen.min(p[3]);
    }
    assert_eq!(min_seen, 4);
}

#[test]
fn immigration_mean_recursion() {
    // E Z_n = a E Z_{n-1} + E Y
    let off = half_half();
    let imm = single_immigrant(&off);
    let gens = 8;
    let mut expect = 1.0; // E Y
    for _ in 0..gens {
        expect = off.mean() * expect + imm.mean();
    }
    let n = 200_000u64;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..n {
        let p = sample_gwi_path(&off, &imm, gens, 1 << 30, &mut rng).unwrap();
        let z = *p.last().unwrap() as f64;
        sum += z;
        sumsq += z * z;
    }
    let mean = sum / n as f64;
    let se = ((sumsq / n as f64 - mean * mean) / n as f64).sqrt();
    assert!((mean - expect).abs() < 3.0 * se, "mean {mean} vs {expect} (se {se})");
}

#[test]
fn geometric_w_tail_mc() {
    // P{W < 0.2} = 1 - exp(-0.2) for the exponential limit
    let geo = geometric();
    let cfg = SimConfig { generations: 30, samples: 1_000_000, seed: 31, ..Default::default() };
    let got = gwtail_core::simulate::estimate_tail_mc(&geo, None, 0.2, &cfg).unwrap();
    let expect = 1.0 - (-0.2f64).exp();
    assert!(
        (got.value - expect).abs() < 3.0 * got.abs_error_est,
        "MC {} +- {} vs {expect}",
        got.value,
        got.abs_error_est
    );
}

#[test]
fn truncation_bias_below_noise() {
    // estimates at 20 and 30 generations differ by less than one combined
    // standard error (same paths, so the comparison is conservative)
    let off = half_half();
    let eps = 0.1;
    let n = 1_000_000u64;
    let mut h20 = 0u64;
    let mut h30 = 0u64;
    let norm20 = off.mean().powi(20);
    let norm30 = off.mean().powi(30);
    let mut chunk = 0u64;
    let mut done = 0u64;
    while done < n {
        let take = CHUNK.min(n - done);
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        rng.set_stream(chunk);
        for _ in 0..take {
            let p = sample_gw_path(&off, 30, 1 << 40, &mut rng).unwrap();
            if (p[20] as f64 / norm20) < eps {
                h20 += 1;
            }
            if (p[30] as f64 / norm30) < eps {
                h30 += 1;
            }
        }
        done += take;
        chunk += 1;
    }
    let p20 = h20 as f64 / n as f64;
    let p30 = h30 as f64 / n as f64;
    let se = |p: f64| (p * (1.0 - p) / n as f64).sqrt();
    let combined = (se(p20).powi(2) + se(p30).powi(2)).sqrt();
    assert!((p20 - p30).abs() < combined, "p20 {p20} p30 {p30} se {combined}");
}

#[test]
fn conditional_k_histogram_matches_quadrature() {
    // conditional first-branching law vs ratios of quadrature joint
    // probabilities, at an eps where the event is reachable by sampling
    let off = half_half();
    let imm = single_immigrant(&off);
    let c = ctx();
    let ev = PhiEvaluator::new(&off, &c);
    let eps = 0.88;
    let cfg = SimConfig { generations: 25, samples: 6_000_000, seed: 99, ..Default::default() };
    let denom = inversion::joint_prob(&off, &imm, &ev, eps, -1, &c).unwrap();
    for k in [0i64, 1] {
        let joint = inversion::joint_prob(&off, &imm, &ev, eps, k, &c).unwrap();
        let expect = (joint.log_value - denom.log_value).exp();
        let got = estimate_k_conditional(&off, Some(&imm), eps, 0, k, &cfg).unwrap();
        // binomial error on ~500 conditioning hits
        let hits = 500.0f64;
        let se = (expect * (1.0 - expect) / hits).sqrt().max(0.005);
        assert!(
            (got - expect).abs() < 3.0 * se,
            "k = {k}: MC {got} vs quadrature ratio {expect}"
        );
    }
}

#[test]
fn tail_chunk_merge_is_order_free() {
    let off = half_half();
    let eps = [0.5, 1.0];
    let a = tail_chunk(&off, None, &eps, 10, 1 << 30, 7, 0, 1000).unwrap();
    let b = tail_chunk(&off, None, &eps, 10, 1 << 30, 7, 1, 1000).unwrap();
    let a2 = tail_chunk(&off, None, &eps, 10, 1 << 30, 7, 0, 1000).unwrap();
    assert_eq!(a.hits, a2.hits);
    assert_ne!(a.hits, b.hits);
}

#[test]
fn phi_star_residual_second_immigration_law() {
    let off = half_half();
    let imm = gwtail_core::ImmigrationModel::new(&[0.5, 0.5], &off).unwrap();
    let c = ctx();
    let ev = PhiEvaluator::new(&off, &c);
    for i in 0..20 {
        let z = re(10f64.powf(-1.0 + 3.0 * i as f64 / 19.0));
        let lhs = phi_star(&off, &imm, &ev, z, &c).unwrap();
        let mut h = C64::new(0.0, 0.0);
        for &q in imm.probs().iter().rev() {
            h = (h + q) * ev.phi(z).unwrap();
        }
        let rhs = h * phi_star(&off, &imm, &ev, z / off.mean(), &c).unwrap();
        assert!((lhs - rhs).norm() < 1e-10, "residual at {z}");
    }
}
