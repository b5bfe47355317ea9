//! Acceptance suite.
//!
//! One test per criterion; each prints a `ACCEPTANCE <id>: PASS/FAIL` line
//! (run with `--nocapture` to see them all) and asserts every clause at its
//! stated tolerance.  The probed scales are desk-sized on purpose: the
//! asymptotic laws are compared against exact quadrature, Monte Carlo, and
//! closed-form oracles.
//!
//! Four clauses probe asymptotic tolerances that the exact numbers do not
//! reach at the stated scales (the measured values and their trends are
//! printed); they are asserted as stated rather than loosened, so this
//! binary reports them red with the evidence in the output.

mod common;

use common::*;
use gwtail_core::genfun::{pgf, r_correction, schroder};
use gwtail_core::laplace::{phi_star, psi_d1, PhiEvaluator};
use gwtail_core::model::ImmigrationModel;
use gwtail_core::scales::{
    predict_fluctuation, predict_joint, predict_k_conditional_schroder, r_rate_constant,
    solve_omega,
};
use gwtail_core::simulate::{estimate_tail_mc_multi, SimConfig};
use gwtail_core::{inversion, C64};
use std::time::Instant;

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

struct Clause {
    label: String,
    pass: bool,
    detail: String,
}

fn report(id: &str, clauses: &[Clause], started: Instant, budget_s: u64) {
    let elapsed = started.elapsed();
    let mut all = elapsed.as_secs() < budget_s;
    for c in clauses {
        all &= c.pass;
    }
    println!(
        "ACCEPTANCE {id}: {} ({:.1}s)",
        if all { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    for c in clauses {
        println!("  [{}] {} - {}", if c.pass { "ok" } else { "FAIL" }, c.label, c.detail);
    }
    assert!(
        elapsed.as_secs() < budget_s,
        "runtime budget exceeded: {:.1}s >= {budget_s}s",
        elapsed.as_secs_f64()
    );
    for c in clauses {
        assert!(c.pass, "{id} clause failed: {} - {}", c.label, c.detail);
    }
}

#[test]
fn criterion_1_closed_form_oracles() {
    let t0 = Instant::now();
    let geo = geometric();
    let c = ctx();
    let ev = PhiEvaluator::new(&geo, &c);
    let mut clauses = Vec::new();

    let mut worst = 0.0f64;
    for i in 0..50 {
        let z = re(10f64.powf(-2.0 + 4.0 * i as f64 / 49.0));
        let expect = C64::new(1.0, 0.0) / (C64::new(1.0, 0.0) + z);
        worst = worst.max((ev.phi(z).unwrap() - expect).norm());
    }
    clauses.push(Clause {
        label: "phi(z) = 1/(1+z) within 1e-8 on 50-point grid".into(),
        pass: worst < 1e-8,
        detail: format!("max error {worst:.3e}"),
    });

    let mut worst = 0.0f64;
    for i in 1..=45 {
        let s = 0.9 * i as f64 / 45.0;
        let got = schroder(&geo, re(s), &c).unwrap().value.re;
        worst = worst.max((got - s / (1.0 - s)).abs());
    }
    clauses.push(Clause {
        label: "S(s) = s/(1-s) within 1e-8 on (0, 0.9]".into(),
        pass: worst < 1e-8,
        detail: format!("max error {worst:.3e}"),
    });

    let mut worst = 0.0f64;
    for i in 0..25 {
        let s = 0.2 + 4.8 * i as f64 / 24.0;
        worst = worst.max((psi_d1(&ev, s, &c).unwrap() + 1.0 / s).abs());
    }
    clauses.push(Clause {
        label: "psi'(s) = -1/s within 1e-6".into(),
        pass: worst < 1e-6,
        detail: format!("max error {worst:.3e}"),
    });

    let mut worst = 0.0f64;
    for eps in [0.01, 0.1, 0.5] {
        let got = inversion::w_tail(&geo, &ev, eps, &c).unwrap().value;
        let expect = 1.0 - (-eps as f64).exp();
        worst = worst.max((got - expect).abs());
    }
    clauses.push(Clause {
        label: "inversion reproduces 1 - exp(-eps) within 1e-6".into(),
        pass: worst < 1e-6,
        detail: format!("max error {worst:.3e}"),
    });

    report("1 closed-form oracle suite", &clauses, t0, 10);
}

#[test]
fn criterion_2_functional_equation_residuals() {
    let t0 = Instant::now();
    let off = half_half();
    let c = ctx();
    let ev = PhiEvaluator::new(&off, &c);
    let mut clauses = Vec::new();

    let mut worst = 0.0f64;
    for i in 0..40 {
        let z = re(10f64.powf(-2.0 + 4.0 * i as f64 / 39.0));
        let lhs = ev.phi(z * off.mean()).unwrap();
        let rhs = pgf(&off, ev.phi(z).unwrap()).unwrap();
        worst = worst.max((lhs - rhs).norm());
    }
    clauses.push(Clause {
        label: "|phi(az) - f(phi(z))| <= 1e-10 on 40-point log grid".into(),
        pass: worst <= 1e-10,
        detail: format!("max residual {worst:.3e}"),
    });

    for probs in [&[1.0][..], &[0.5, 0.5][..]] {
        let imm = ImmigrationModel::new(probs, &off).unwrap();
        let mut worst = 0.0f64;
        for i in 0..40 {
            let z = re(10f64.powf(-2.0 + 4.0 * i as f64 / 39.0));
            let lhs = phi_star(&off, &imm, &ev, z, &c).unwrap();
            let mut h = C64::new(0.0, 0.0);
            for &q in imm.probs().iter().rev() {
                h = (h + q) * ev.phi(z).unwrap();
            }
            let rhs = h * phi_star(&off, &imm, &ev, z / off.mean(), &c).unwrap();
            worst = worst.max((lhs - rhs).norm());
        }
        clauses.push(Clause {
            label: format!("|phi*(z) - h(phi(z)) phi*(z/a)| <= 1e-10, q = {probs:?}"),
            pass: worst <= 1e-10,
            detail: format!("max residual {worst:.3e}"),
        });
    }

    report("2 functional-equation residuals", &clauses, t0, 10);
}

#[test]
fn criterion_3_mc_cross_validation() {
    let t0 = Instant::now();
    let off = half_half();
    let imm = single_immigrant(&off);
    let c = ctx();
    let ev = PhiEvaluator::new(&off, &c);
    let cfg = SimConfig { generations: 30, samples: 1_000_000, seed: 20_240_811, ..Default::default() };
    let mut clauses = Vec::new();

    // immigration-free side
    let eps_w = [0.1, 0.3];
    let mc = estimate_tail_mc_multi(&off, None, &eps_w, &cfg).unwrap();
    for (e, m) in eps_w.iter().zip(&mc) {
        let inv = inversion::w_tail(&off, &ev, *e, &c).unwrap();
        let dev = (m.value - inv.value).abs() / m.abs_error_est;
        clauses.push(Clause {
            label: format!("P(W < {e}) MC vs inversion within 3 SE"),
            pass: dev < 3.0,
            detail: format!("MC {:.6} +- {:.6}, inversion {:.6} ({dev:.2} SE)", m.value, m.abs_error_est, inv.value),
        });
    }

    // immigration side: the stated eps are unreachable by direct sampling;
    // the estimator's rare-event guard refuses them
    for e in [0.2, 0.4] {
        let inv = inversion::joint_prob(&off, &imm, &ev, e, -1, &c).unwrap();
        match estimate_tail_mc_multi(&off, Some(&imm), &[e], &cfg) {
            Ok(res) => {
                let m = &res[0];
                let dev = (m.value - inv.value).abs() / m.abs_error_est;
                clauses.push(Clause {
                    label: format!("P(W_imm < {e}) MC vs inversion within 3 SE"),
                    pass: dev < 3.0,
                    detail: format!("MC {:.3e}, inversion {:.3e}", m.value, inv.value),
                });
            }
            Err(err) => {
                clauses.push(Clause {
                    label: format!("P(W_imm < {e}) MC vs inversion within 3 SE"),
                    pass: false,
                    detail: format!(
                        "inversion gives {:.3e}; a 1e6-sample run cannot see this event ({err})",
                        inv.value
                    ),
                });
            }
        }
    }

    report("3 MC cross-validation at moderate eps", &clauses, t0, 300);
}

#[test]
fn criterion_4_leading_order_and_full_predictor() {
    let t0 = Instant::now();
    let off = half_half();
    let imm = single_immigrant(&off);
    let c = ctx();
    let ev = PhiEvaluator::new(&off, &c);
    let mut clauses = Vec::new();

    let sigma = imm.sigma();
    let mut ratios = Vec::new();
    for eps in [1e-2, 1e-3, 1e-4] {
        let p = inversion::joint_prob(&off, &imm, &ev, eps, -1, &c).unwrap();
        let omega = solve_omega(&off, eps, &c).unwrap();
        ratios.push((eps, -p.log_value / (sigma * omega * omega)));
    }
    let at_1e4 = ratios[2].1;
    clauses.push(Clause {
        label: "-log P / (sigma omega^2) in [0.8, 1.2] at eps = 1e-4".into(),
        pass: (0.8..=1.2).contains(&at_1e4),
        detail: format!("ratio {at_1e4:.6}"),
    });
    let devs: Vec<f64> = ratios.iter().map(|r| (r.1 - 1.0).abs()).collect();
    clauses.push(Clause {
        label: "|ratio - 1| decreases monotonically over eps = 1e-2, 1e-3, 1e-4".into(),
        pass: devs[0] > devs[1] && devs[1] > devs[2],
        detail: format!(
            "|ratio-1| = {:.6}, {:.6}, {:.6} (log-periodic modulation dominates between \
             adjacent decades; decay sets in below 1e-5)",
            devs[0], devs[1], devs[2]
        ),
    });

    let mut rels = Vec::new();
    for eps in [1e-4, 1e-5] {
        let p = inversion::joint_prob(&off, &imm, &ev, eps, -1, &c).unwrap();
        let pred = predict_joint(&off, &imm, &ev, eps, -1, &c).unwrap();
        rels.push(((pred - p.log_value) as f64).exp_m1().abs());
    }
    clauses.push(Clause {
        label: "Proposition-assembly predictor within 15% of inversion at eps = 1e-5".into(),
        pass: rels[1] < 0.15,
        detail: format!("relative gap {:.4}", rels[1]),
    });
    clauses.push(Clause {
        label: "predictor gap improves as eps decreases".into(),
        pass: rels[1] < rels[0],
        detail: format!("{:.4} at 1e-4 -> {:.4} at 1e-5", rels[0], rels[1]),
    });

    report("4 second-order tail law", &clauses, t0, 120);
}

#[test]
fn criterion_5_fluctuation_law() {
    let t0 = Instant::now();
    let off = half_half();
    let imm = single_immigrant(&off);
    let c = ctx();
    let ev = PhiEvaluator::new(&off, &c);
    let mut clauses = Vec::new();

    let max_dev = |eps: f64| -> f64 {
        let denom = inversion::joint_prob(&off, &imm, &ev, eps, -1, &c).unwrap();
        let gamma = gwtail_core::scales::gamma(&off, eps).floor() as i64;
        let mut worst = 0.0f64;
        for x in -2..=3 {
            let joint = inversion::joint_prob(&off, &imm, &ev, eps, gamma + x, &c).unwrap();
            let cond = (joint.log_value - denom.log_value).exp();
            let pred = predict_fluctuation(&off, &imm, &ev, eps, x, &c).unwrap();
            worst = worst.max((cond - pred).abs());
        }
        worst
    };
    let d3 = max_dev(1e-3);
    let d5 = max_dev(1e-5);
    clauses.push(Clause {
        label: "max |conditional - predictor| <= 0.05 over x in -2..3 at eps = 1e-5".into(),
        pass: d5 <= 0.05,
        detail: format!(
            "max deviation {d5:.4} (the double-exponential limit law converges \
             logarithmically; 0.05 is reached only near eps = 1e-13)"
        ),
    });
    clauses.push(Clause {
        label: "deviation decreases from eps = 1e-3 to 1e-5".into(),
        pass: d5 < d3,
        detail: format!("{d3:.4} -> {d5:.4}"),
    });

    report("5 first-branching fluctuation law", &clauses, t0, 120);
}

#[test]
fn criterion_6_schroder_conditional_slopes() {
    let t0 = Instant::now();
    let off = half_half();
    let c = ctx();
    let ev = PhiEvaluator::new(&off, &c);
    let mut clauses = Vec::new();
    let eps = 1e-4;

    let xs: Vec<i64> = (1..=5).collect();
    let logs: Vec<f64> = xs
        .iter()
        .map(|&x| predict_k_conditional_schroder(&off, &ev, eps, x, &c).unwrap().ln())
        .collect();
    let slope = regression_slope(&xs, &logs);
    let target = off.p1().ln();
    let rel = (slope / target - 1.0).abs();
    clauses.push(Clause {
        label: "right-tail slope within 10% of log p_1 over x = 1..5".into(),
        pass: rel <= 0.10,
        detail: format!(
            "slope {slope:.5} vs log p1 {target:.5} ({:.1}%); the tail-probability \
             prefactor still grows over x = 1..5 at this eps, the window 2..6 \
             gives ~2%",
            100.0 * rel
        ),
    });

    let logs_left: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let cond = predict_k_conditional_schroder(&off, &ev, eps, -x, &c).unwrap();
            (1.0 - cond).ln()
        })
        .collect();
    let slope_left = regression_slope(&xs, &logs_left);
    let target_left = (off.second_index() as f64 - 1.0) * off.p1().ln();
    let rel_left = (slope_left / target_left - 1.0).abs();
    clauses.push(Clause {
        label: "left-tail slope within 15% of (lambda-1) log p_1".into(),
        pass: rel_left <= 0.15,
        detail: format!("slope {slope_left:.5} vs {target_left:.5} ({:.1}%)", 100.0 * rel_left),
    });

    let x0 = predict_k_conditional_schroder(&off, &ev, eps, 0, &c).unwrap();
    clauses.push(Clause {
        label: "conditional at x = 0 is a probability".into(),
        pass: x0 > 0.0 && x0 < 1.0,
        detail: format!("value {x0:.6}"),
    });

    report("6 immigration-free branching-time tails", &clauses, t0, 120);
}

#[test]
fn criterion_7_r_correction_rate() {
    let t0 = Instant::now();
    let off = half_half();
    let c = ctx();
    let s = schroder(&off, re(0.5), &c).unwrap().value.re;
    let rate = |n: u32| {
        r_correction(&off, re(0.5), n, &c).unwrap().re / (s * s * off.p1().powi(n as i32))
    };
    let r40 = rate(40);
    let r60 = rate(60);
    let expect = r_rate_constant(&off);
    let clauses = vec![
        Clause {
            label: "rate changes by < 1% between n = 40 and 60".into(),
            pass: (r60 / r40 - 1.0).abs() < 0.01,
            detail: format!("rate(40) = {r40:.8}, rate(60) = {r60:.8}"),
        },
        Clause {
            label: "limit equals p_lambda / (p_1 (1 - p_1^(lambda-1))) = 2 within 1%".into(),
            pass: (r60 / expect - 1.0).abs() < 0.01,
            detail: format!("rate(60) = {r60:.8} vs {expect}"),
        },
    ];
    report("7 correction-term decay rate", &clauses, t0, 1);
}

#[test]
fn criterion_8_second_order_term_bounded() {
    let t0 = Instant::now();
    let off = half_half();
    let c = ctx();
    let ev = PhiEvaluator::new(&off, &c);
    let tau_lam = off.tau() * off.second_index() as f64;

    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    let mut detail = String::new();
    for eps in [1e-2, 1e-3, 1e-4] {
        let (d, _) = inversion::schroder_tail_correction(&off, &ev, eps, &c).unwrap();
        let r = d.abs() / eps.powf(tau_lam);
        lo = lo.min(r);
        hi = hi.max(r);
        detail += &format!("eps = {eps:.0e}: {r:.6}; ");
    }
    let mut clauses = vec![Clause {
        label: "|L eps^tau - P| / eps^(tau lambda) within a factor 10 across eps".into(),
        pass: hi / lo <= 10.0 && hi.is_finite(),
        detail: format!("{detail}spread {:.6}", hi / lo),
    }];

    // cross-check the direct subtraction at the eps where it is resolvable
    let eps = 1e-2;
    let (d, derr) = inversion::schroder_tail_correction(&off, &ev, eps, &c).unwrap();
    let (l, lerr) = inversion::l_periodic(&off, &ev, eps, &c).unwrap();
    let p = inversion::w_tail(&off, &ev, eps, &c).unwrap();
    let direct = l * eps.powf(off.tau()) - p.value;
    let bar = 8.0 * (derr + lerr * eps.powf(off.tau()) + p.abs_error_est) + 1e-13;
    clauses.push(Clause {
        label: "contour form agrees with direct subtraction at eps = 1e-2".into(),
        pass: (d - direct).abs() <= bar,
        detail: format!("contour {d:.6e} vs direct {direct:.6e}"),
    });

    report("8 second-order error term", &clauses, t0, 60);
}
