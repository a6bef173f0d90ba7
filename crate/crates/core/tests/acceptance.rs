//! Acceptance suite. Every test prints one `[PASS]`/`[FAIL]` line with the
//! measured quantity and its pinned tolerance, then asserts.
//!
//! Training-based checks run at reduced network width and batch size and
//! are marked `#[ignore]`; run them with `cargo test --release --test
//! acceptance -- --ignored --nocapture`. Each has a fast smoke companion
//! that exercises the same pipeline in the default suite.

use rand::Rng;

use sjrp_core::bench::{
    can_order_from, can_order_search, independent_ss_search, make_independent_ss, qs_analytic_cost, qs_optimal_basestock,
    qs_search, rs_analytic_cost, rs_optimal_basestock, rs_search, QsPolicy, RsPolicy,
};
use sjrp_core::bsde::{
    euler_maruyama, loss, loss_and_gradients, path_slacks, train, IterationRecord, PreparedBatch,
    ReferencePolicy, ScheduleStep, TrainConfig, TrainOutput,
};
use sjrp_core::demand::path_rng;
use sjrp_core::mdp::{bellman_residual, policy_iteration, MdpPolicy, MdpSolution, QviGrid, TruncatedMdpSpec};
use sjrp_core::model::{diffusion_moments, holding_backlog_cost, ordering_cost, weekly_discount, CostParams, DemandModel, DiffusionParams, InventoryState};
use sjrp_core::nn::Mlp;
use sjrp_core::optim::{minimize_box, BoxOptions};
use sjrp_core::policy::{compute_order_up_to, order_region, ClosureModel, ExtractionConfig, ExtractionMethod, NetworkPair, NeuralNetPolicy, ValueModel};
use sjrp_core::problems::{twelve_item, two_item, two_item_base_case, Variability};
use sjrp_core::qvi::solve_1d_qvi;
use sjrp_core::sim::{simulate_policy, trace_path, CostEstimate, SimConfig};

// reference costs of the 2-item base case
const MDP_COST: f64 = 2936.24;
const RS_COST: f64 = 4337.42;
const QS_COST: f64 = 4356.86;
const CAN_ORDER_COST: f64 = 2965.83;
const INDEPENDENT_SS_COST: f64 = 3380.97;

const MDP_REL_TOL: f64 = 0.01;
const RESIDUAL_REL_TOL: f64 = 1e-8;
const BENCH_REL_TOL: f64 = 0.02;
const NN_GAP_TOL: f64 = 0.015;
const H_SUP_TOL: f64 = 0.02;
const G_SUP_TOL: f64 = 0.05;
const VIOLATION_1D_TOL: f64 = 0.01;
const COMBINED_SE_TOL: f64 = 3.0;
const FD_REL_TOL: f64 = 1e-5;
const VIOLATION_12D_TOL: f64 = 0.05;

fn report(id: &str, what: &str, pass: bool, detail: String) {
    println!("[{}] {id} {what}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{id} {what}: {detail}");
}

fn base_case_mdp() -> (TruncatedMdpSpec, MdpSolution) {
    let (model, params) = two_item_base_case().unwrap();
    let spec = TruncatedMdpSpec::uniform(model, params, -200, 100, 100);
    let sol = policy_iteration(&spec).unwrap();
    (spec, sol)
}

#[test]
fn c1_two_item_optimal_value() {
    let (spec, sol) = base_case_mdp();
    let v0 = sol.value_at(&[0, 0]).unwrap();
    let scale = 1.0 + sol.value.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let residual = bellman_residual(&sol, &spec).unwrap();
    let rel = (v0 / MDP_COST - 1.0).abs();
    let pass = rel <= MDP_REL_TOL && residual <= RESIDUAL_REL_TOL * scale;
    report(
        "C1",
        "2-item optimal value",
        pass,
        format!("V(0)={v0:.2} vs {MDP_COST} (rel {rel:.4} <= {MDP_REL_TOL}); residual {residual:.2e} <= {:.2e}", RESIDUAL_REL_TOL * scale),
    );
}

#[test]
fn c1_truncation_box_is_not_reached() {
    let (spec, sol) = base_case_mdp();
    let policy = MdpPolicy { solution: sol };
    let cfg = SimConfig::new(1000, 200, 4);
    let (mut lowest, mut highest) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for path in 0..cfg.n_paths {
        let (records, _) = trace_path(&policy, &spec.model, &spec.params, &cfg, path).unwrap();
        for r in &records {
            for i in 0..2 {
                lowest[i] = lowest[i].min(r.start[i]);
                highest[i] = highest[i].max(r.start[i] + r.order[i]);
            }
        }
    }
    let pass = (0..2).all(|i| lowest[i] > spec.state_lo[i] as f64 && highest[i] < spec.action_hi[i] as f64);
    report(
        "C1b",
        "optimal policy stays inside the truncation box",
        pass,
        format!("visited [{lowest:?}, {highest:?}] inside ({:?}, {:?})", spec.state_lo, spec.action_hi),
    );
}

#[test]
fn c3_benchmark_reproduction() {
    let (model, params) = two_item_base_case().unwrap();
    let search = SimConfig::new(2000, 500, 101);
    // 5000 periods would drop ~0.8% of the discounted cost
    let full = SimConfig::new(10_000, 10_000, 202);
    let rs = rs_search(&model, &params, 100, &search).unwrap();
    let qs = qs_search(&model, &params, rs.best.r, &search, 2000).unwrap();
    let ss = independent_ss_search(&model, &params, &search).unwrap();
    let co = can_order_search(&model, &params, &search).unwrap();
    let rows = [
        ("(R,S)", simulate_policy(&rs.best, &model, &params, &full).unwrap(), RS_COST),
        ("(Q,S)", simulate_policy(&qs.best, &model, &params, &full).unwrap(), QS_COST),
        ("independent (s,S)", simulate_policy(&ss.best, &model, &params, &full).unwrap(), INDEPENDENT_SS_COST),
        ("can-order", simulate_policy(&co.best, &model, &params, &full).unwrap(), CAN_ORDER_COST),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, est, reference) in &rows {
        let rel = est.mean / reference - 1.0;
        pass &= rel.abs() <= BENCH_REL_TOL;
        parts.push(format!("{name} {:.2}±{:.2} vs {reference} ({:+.2}%)", est.mean, est.std_error, 100.0 * rel));
    }
    report("C3", "benchmark costs within 2%", pass, parts.join("; "));
}

fn random_instance(rng: &mut impl Rng) -> (DemandModel, CostParams) {
    let means = vec![rng.gen_range(10.0..60.0), rng.gen_range(10.0..60.0)];
    let model = if rng.gen_bool(0.5) {
        DemandModel::poisson(means).unwrap()
    } else {
        DemandModel::neg_binomial(means, vec![rng.gen_range(0.3..1.0), rng.gen_range(0.3..1.0)]).unwrap()
    };
    let params = CostParams::new(
        rng.gen_range(20.0..200.0),
        vec![rng.gen_range(0.1..0.8), rng.gen_range(0.1..0.8)],
        vec![rng.gen_range(1.0..4.0), rng.gen_range(1.0..4.0)],
        vec![rng.gen_range(10.0..100.0), rng.gen_range(10.0..100.0)],
        0.05,
    )
    .unwrap();
    (model, params)
}

#[test]
fn c5_analytic_costs_agree_with_simulation() {
    let mut rng = path_rng(55, 0);
    // gamma^12000 ~ 1e-5 of the infinite-horizon cost
    let sim = SimConfig::new(12_000, 4000, 77);
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for k in 0..5 {
        let (model, params) = random_instance(&mut rng);
        let r = rng.gen_range(1..7);
        let s = (0..2).map(|i| rs_optimal_basestock(r, i, &model, &params).unwrap() as f64).collect();
        let rs = RsPolicy { r, s };
        let exact = rs_analytic_cost(&rs, &model, &params).unwrap();
        let est = simulate_policy(&rs, &model, &params, &sim).unwrap();
        let z_rs = (exact - est.mean).abs() / est.std_error;

        let weekly: f64 = (0..2).map(|i| model.period_mean(i)).sum();
        let q = (rng.gen_range(1.0..6.0) * weekly).round();
        let s = (0..2).map(|i| qs_optimal_basestock(q, i, &model, &params, 2000, k).unwrap() as f64).collect();
        let qs = QsPolicy { q, s };
        // renewal estimate replicated over independent cycle seeds
        let reps: Vec<f64> = (0..10).map(|j| qs_analytic_cost(&qs, &model, &params, 4000, 1000 + 10 * k + j).unwrap()).collect();
        let mean = reps.iter().sum::<f64>() / 10.0;
        let se_renewal = (reps.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9.0 / 10.0).sqrt();
        let est = simulate_policy(&qs, &model, &params, &sim).unwrap();
        let z_qs = (mean - est.mean).abs() / (est.std_error.powi(2) + se_renewal.powi(2)).sqrt();
        println!("  instance {k}: (R,S) R={r} z={z_rs:.2}; (Q,S) Q={q} z={z_qs:.2}");
        worst = worst.max(z_rs).max(z_qs);
        pass &= z_rs <= COMBINED_SE_TOL && z_qs <= COMBINED_SE_TOL;
    }
    report("C5", "closed-form and renewal costs vs simulation", pass, format!("5 instances, worst |diff| = {worst:.2} combined SE <= {COMBINED_SE_TOL}"));
}

fn fd_rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / fd.abs().max(1e-4)
}

fn check_network_derivatives() -> f64 {
    let net = Mlp::he_init(&[3, 7, 6, 2], &mut path_rng(61, 0)).unwrap();
    let x = [0.3, -1.2, 0.8];
    let mut worst: f64 = 0.0;
    let (_, jac) = net.forward_with_jacobian(&x).unwrap();
    let h = 1e-6;
    for j in 0..3 {
        let mut xp = x;
        xp[j] += h;
        let mut xm = x;
        xm[j] -= h;
        let (p, m) = (net.forward(&xp).unwrap(), net.forward(&xm).unwrap());
        for i in 0..2 {
            worst = worst.max(fd_rel_err(jac[i * 3 + j], (p[i] - m[i]) / (2.0 * h)));
        }
    }
    // parameter gradient of sum(w .* output)
    let w = [0.7, -1.3];
    let tape = net.forward_tape(&x, 1).unwrap();
    let mut grads = vec![0.0; net.n_params()];
    net.backward(&tape, &w, &mut grads).unwrap();
    for k in 0..net.n_params() {
        let eval = |delta: f64| {
            let mut n = net.clone();
            n.params_mut()[k] += delta;
            let o = n.forward(&x).unwrap();
            w[0] * o[0] + w[1] * o[1]
        };
        worst = worst.max(fd_rel_err(grads[k], (eval(h) - eval(-h)) / (2.0 * h)));
    }
    worst
}

fn check_loss_derivatives() -> f64 {
    let policy = ReferencePolicy { lambda: 30.0, order_up_to_mean: vec![2.0, 1.5], nu: 0.3, alpha: 0.2 };
    let diff = DiffusionParams::diagonal(vec![1.0, 0.7], vec![0.4, 0.3]);
    let params = CostParams::new(1.0, vec![0.5, 0.3], vec![0.5, 0.4], vec![2.0, 3.0], 0.05).unwrap();
    let paths: Vec<_> = (0..8)
        .map(|k| euler_maruyama(&policy, &diff, 10, 0.005, &[0.3, -0.2], &mut path_rng(62, k)).unwrap())
        .collect();
    let batch = PreparedBatch::new(&paths, &params, &diff).unwrap();
    let mut h = Mlp::he_init(&[2, 5, 1], &mut path_rng(62, 90)).unwrap();
    let g = Mlp::he_init(&[2, 5, 2], &mut path_rng(62, 91)).unwrap();
    // put the median path on the penalty boundary so both branches are exercised
    let mut slack = path_slacks(&h, &g, &batch).unwrap();
    slack.sort_by(f64::total_cmp);
    let nh = h.n_params();
    h.params_mut()[nh - 1] -= (slack[3] + slack[4]) / 2.0 / (1.0 - batch.discount_t);
    let beta = 20.0;
    let mut gh = vec![0.0; h.n_params()];
    let mut gg = vec![0.0; g.n_params()];
    loss_and_gradients(&h, &g, &batch, beta, &mut gh, &mut gg).unwrap();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..h.n_params() {
        let mut p = h.clone();
        p.params_mut()[k] += eps;
        let mut m = h.clone();
        m.params_mut()[k] -= eps;
        let fd = (loss(&p, &g, &batch, beta).unwrap().loss - loss(&m, &g, &batch, beta).unwrap().loss) / (2.0 * eps);
        worst = worst.max(fd_rel_err(gh[k], fd));
    }
    for k in 0..g.n_params() {
        let mut p = g.clone();
        p.params_mut()[k] += eps;
        let mut m = g.clone();
        m.params_mut()[k] -= eps;
        let fd = (loss(&h, &p, &batch, beta).unwrap().loss - loss(&h, &m, &batch, beta).unwrap().loss) / (2.0 * eps);
        worst = worst.max(fd_rel_err(gg[k], fd));
    }
    worst
}

fn check_path_reconstruction() -> bool {
    let policy = ReferencePolicy { lambda: 25.0, order_up_to_mean: vec![35.0, 20.0], nu: 0.2, alpha: 0.4 };
    let diff = DiffusionParams::diagonal(vec![40.0, 20.0], vec![20.0, 10.0]);
    (0..20).all(|k| {
        let p = euler_maruyama(&policy, &diff, 50, 0.002, &[5.0, -3.0], &mut path_rng(63, k)).unwrap();
        let mut x = vec![5.0, -3.0];
        let mut noise = [0.0; 2];
        let mut ok = true;
        for n in 0..50 {
            ok &= p.state(n) == &x[..];
            diff.apply_sigma(&p.brownian[2 * n..2 * n + 2], &mut noise);
            for i in 0..2 {
                ok &= p.orders[2 * n + i] >= 0.0;
                x[i] = x[i] - diff.mu[i] * 0.002 - noise[i] + p.orders[2 * n + i];
            }
        }
        ok && p.terminal() == &x[..]
    })
}

fn check_cost_homogeneity() -> bool {
    let (model, params) = two_item(Variability::Medium, 50.0, 50.0).unwrap();
    let policy = RsPolicy { r: 3, s: vec![30.0, 15.0] };
    let cfg = SimConfig::new(500, 200, 64);
    let base = simulate_policy(&policy, &model, &params, &cfg).unwrap();
    let mut ok = true;
    for kappa in [0.125, 0.5, 4.0, 1024.0] {
        let sp = params.scaled(kappa);
        let scaled = simulate_policy(&policy, &model, &sp, &cfg).unwrap();
        ok &= scaled.mean == kappa * base.mean;
        let y = [7.0, 3.0];
        ok &= ordering_cost(&y, &sp).unwrap() == kappa * ordering_cost(&y, &params).unwrap();
        let x = InventoryState(vec![-4.0, 9.0]);
        ok &= holding_backlog_cost(&x, &sp).unwrap() == kappa * holding_backlog_cost(&x, &params).unwrap();
    }
    ok
}

/// Value iteration over order quantities on a small 2-item instance.
fn quantity_enumeration(spec: &TruncatedMdpSpec) -> Vec<f64> {
    let (lo, hi, ah) = (spec.state_lo.clone(), spec.state_hi.clone(), spec.action_hi.clone());
    let p = &spec.params;
    let gamma = weekly_discount(p);
    let pmf: Vec<Vec<f64>> = (0..2)
        .map(|i| {
            let m = spec.model.period_mean(i);
            let mut probs = vec![(-m).exp()];
            while probs.iter().sum::<f64>() < 1.0 - 1e-16 && probs.len() < 60 {
                let k = probs.len() as f64;
                probs.push(probs.last().unwrap() * m / k);
            }
            probs
        })
        .collect();
    let n = [(hi[0] - lo[0] + 1) as usize, (hi[1] - lo[1] + 1) as usize];
    let idx = |a: i64, b: i64| ((a - lo[0]) as usize) * n[1] + (b - lo[1]) as usize;
    let f = |i: usize, t: i64| (if t >= 0 { p.h[i] * t as f64 } else { -p.p[i] * t as f64 }) / 52.0;
    let mut v = vec![0.0; n[0] * n[1]];
    loop {
        // expected cost-to-go from each post-order level before demand
        let mut after = vec![0.0; v.len()];
        for z0 in lo[0]..=hi[0] {
            for z1 in lo[1]..=hi[1] {
                let mut e = 0.0;
                for (k0, p0) in pmf[0].iter().enumerate() {
                    for (k1, p1) in pmf[1].iter().enumerate() {
                        let (t0, t1) = (z0 - k0 as i64, z1 - k1 as i64);
                        e += p0 * p1 * (f(0, t0) + f(1, t1) + gamma * v[idx(t0.max(lo[0]), t1.max(lo[1]))]);
                    }
                }
                after[idx(z0, z1)] = e;
            }
        }
        let mut next = vec![0.0; v.len()];
        for a in lo[0]..=hi[0] {
            for b in lo[1]..=hi[1] {
                let mut best = after[idx(a, b)];
                for y0 in 0..=(ah[0] - a).max(0) {
                    for y1 in 0..=(ah[1] - b).max(0) {
                        if y0 + y1 > 0 {
                            let oc = p.c0 + p.c[0] * y0 as f64 + p.c[1] * y1 as f64;
                            best = best.min(oc + after[idx(a + y0, b + y1)]);
                        }
                    }
                }
                next[idx(a, b)] = best;
            }
        }
        let delta = next.iter().zip(&v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        v = next;
        if delta < 1e-12 {
            return v;
        }
    }
}

fn check_order_up_to_form() -> f64 {
    let model = DemandModel::poisson(vec![26.0, 13.0]).unwrap();
    // a steep discount keeps value iteration short
    let params = CostParams::new(8.0, vec![0.2, 0.4], vec![2.0, 2.0], vec![30.0, 30.0], 2.6).unwrap();
    let spec = TruncatedMdpSpec { state_lo: vec![-6, -6], state_hi: vec![7, 7], action_hi: vec![6, 6], model, params };
    let sol = policy_iteration(&spec).unwrap();
    let oracle = quantity_enumeration(&spec);
    sol.value.iter().zip(&oracle).map(|(a, b)| (a - b).abs() / (1.0 + b.abs())).fold(0.0, f64::max)
}

fn check_zero_trigger() -> bool {
    let (model, params) = two_item(Variability::High, 100.0, 10.0).unwrap();
    let s = vec![25.0, 12.0];
    let rs = RsPolicy { r: 1, s: s.clone() };
    let qs = QsPolicy { q: 0.0, s };
    let cfg = SimConfig::new(300, 10, 65);
    let paths = (0..10).all(|k| trace_path(&rs, &model, &params, &cfg, k).unwrap() == trace_path(&qs, &model, &params, &cfg, k).unwrap());
    let a = rs_analytic_cost(&rs, &model, &params).unwrap();
    let b = qs_analytic_cost(&qs, &model, &params, 500, 3).unwrap();
    paths && (a - b).abs() <= 1e-10 * a
}

fn check_uncoordinated_can_order() -> bool {
    let (model, params) = two_item_base_case().unwrap();
    [0.1, 0.5, 1.0].iter().all(|&alpha| {
        let ss = make_independent_ss(alpha, &model, &params).unwrap();
        let co = can_order_from(&ss, 1.0);
        let cfg = SimConfig::new(400, 10, 66);
        (0..10).all(|k| trace_path(&ss, &model, &params, &cfg, k).unwrap() == trace_path(&co, &model, &params, &cfg, k).unwrap())
    })
}

fn check_order_up_to_equivalence() -> f64 {
    // convex, non-separable value surrogate
    let model = ClosureModel {
        d: 2,
        value: |z: &[f64]| {
            let (u, v) = (z[0] - 30.0, z[1] - 18.0);
            0.02 * u * u + 0.015 * u * v + 0.03 * v * v + (0.1 * (u + v)).exp()
        },
        gradient: |z: &[f64]| {
            let (u, v) = (z[0] - 30.0, z[1] - 18.0);
            let e = 0.1 * (0.1 * (u + v)).exp();
            vec![0.04 * u + 0.015 * v + e, 0.015 * u + 0.06 * v + e]
        },
    };
    let params = CostParams::new(5.0, vec![0.01, 0.04], vec![0.2, 0.2], vec![5.0, 5.0], 0.05).unwrap();
    let cfg = ExtractionConfig {
        epsilon: -2.5,
        bounds: [0.0, 1.5],
        start: 1.0,
        method: ExtractionMethod::MinimizeValue,
        reference: vec![35.0, 20.0],
        restarts: 10,
        seed: 4,
    };
    let z = compute_order_up_to(&model, &params, &cfg).unwrap().z;
    let hi = cfg.upper();
    let mut rng = path_rng(67, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x: Vec<f64> = (0..2).map(|i| z[i] - rng.gen_range(0.0..40.0)).collect();
        let upper: Vec<f64> = (0..2).map(|i| hi[i] - x[i]).collect();
        let y = minimize_box(
            |y| {
                let p: Vec<f64> = (0..2).map(|i| x[i] + y[i]).collect();
                let v = model.value(&p)? + params.c0 + params.c[0] * y[0] + params.c[1] * y[1];
                let g = model.gradient(&p)?.iter().zip(&params.c).map(|(a, b)| a + b).collect();
                Ok((v, g))
            },
            &[0.0, 0.0],
            &[0.0, 0.0],
            &upper,
            BoxOptions::default(),
        )
        .unwrap()
        .x;
        for i in 0..2 {
            worst = worst.max((y[i] - (z[i] - x[i])).abs());
        }
    }
    worst
}

#[test]
fn c6_property_suite() {
    let started = std::time::Instant::now();
    let net = check_network_derivatives();
    let lossd = check_loss_derivatives();
    let recon = check_path_reconstruction();
    let homog = check_cost_homogeneity();
    let yz = check_order_up_to_form();
    let q0 = check_zero_trigger();
    let co = check_uncoordinated_can_order();
    let equiv = check_order_up_to_equivalence();
    let secs = started.elapsed().as_secs_f64();
    println!("  network Jacobian/parameter gradients: worst rel err {net:.2e}");
    println!("  loss gradients: worst rel err {lossd:.2e}");
    println!("  path recursion exact: {recon}; cost homogeneity exact: {homog}");
    println!("  quantity vs order-up-to enumeration: worst rel diff {yz:.2e}");
    println!("  Q=0 equals R=1: {q0}; uncoordinated can-order equals (s,S): {co}");
    println!("  order-up-to equivalence at 20 states: worst |y - (z* - x)| {equiv:.2e}");
    let pass = net < FD_REL_TOL && lossd < FD_REL_TOL && recon && homog && yz < 1e-8 && q0 && co && equiv < 1e-5 && secs < 120.0;
    report("C6", "property suite", pass, format!("all sub-checks within tolerance in {secs:.1}s (< 120s)"));
}

/// Stretches a schedule written for `total` iterations onto `iterations`.
fn rescale(steps: &[(u64, f64)], total: u64, iterations: u64) -> Vec<ScheduleStep> {
    steps.iter().map(|&(from, value)| ScheduleStep { from: 1 + (from - 1) * iterations / total, value }).collect()
}

fn tail_violation(out: &TrainOutput, window: usize) -> f64 {
    let tail = &out.diagnostics[out.diagnostics.len().saturating_sub(window)..];
    tail.iter().map(|r| r.violation).sum::<f64>() / tail.len() as f64
}

struct Scale {
    iterations: u64,
    batch: usize,
    hidden: Vec<usize>,
    eval: SimConfig,
}

struct TwoItemRun {
    nn: CostEstimate,
    mdp: CostEstimate,
    region_diff: usize,
    region_size: usize,
}

fn two_item_nn_vs_mdp(scale: &Scale) -> TwoItemRun {
    let (model, params) = two_item_base_case().unwrap();
    let diff = diffusion_moments(&model);
    let reference = ReferencePolicy { lambda: 1.0, order_up_to_mean: vec![35.0, 20.0], nu: 0.2, alpha: 0.0 };
    let total = 25_000;
    let cfg = TrainConfig {
        horizon: 0.1,
        n_steps: 50,
        batch_size: scale.batch,
        iterations: scale.iterations,
        hidden: scale.hidden.clone(),
        lr_schedule: rescale(&[(1, 1e-3), (10_001, 1e-4), (15_001, 1e-5), (20_001, 1e-6)], total, scale.iterations),
        beta_schedule: rescale(
            &[(1, 1.0), (2501, 10.0), (5001, 1e2), (7501, 1e3), (10_001, 1e4), (15_001, 1e5), (20_001, 1e6)],
            total,
            scale.iterations,
        ),
        kappa: 0.1,
        seed: 11,
        checkpoint_every: None,
    };
    let out = train(&cfg, &reference, &diff, &params, &[0.0, 0.0]).unwrap();
    let nets = NetworkPair::new(out.h, out.g).unwrap();
    let scaled = params.scaled(cfg.kappa);
    let ext = ExtractionConfig {
        epsilon: -2.5,
        bounds: [0.0, 1.5],
        start: 1.0,
        method: ExtractionMethod::MinimizeValue,
        reference: vec![35.0, 20.0],
        restarts: 10,
        seed: 0,
    };
    let z = compute_order_up_to(&nets, &scaled, &ext).unwrap().z;
    let nn = NeuralNetPolicy::new(nets, z, ext.epsilon, scaled, diff).unwrap();
    let (_, sol) = base_case_mdp();
    let mdp = MdpPolicy { solution: sol };
    let nn_region = order_region(&nn, [-30, -30], [70, 50]).unwrap();
    let mdp_region = order_region(&mdp, [-30, -30], [70, 50]).unwrap();
    TwoItemRun {
        nn: simulate_policy(&nn, &model, &params, &scale.eval).unwrap(),
        mdp: simulate_policy(&mdp, &model, &params, &scale.eval).unwrap(),
        region_diff: nn_region.symmetric_difference(&mdp_region).unwrap(),
        region_size: mdp_region.count(),
    }
}

fn describe_gap(run: &TwoItemRun) -> (f64, String) {
    let gap = run.nn.mean / run.mdp.mean - 1.0;
    let detail = format!(
        "NN {:.2}±{:.2} vs MDP {:.2}±{:.2}, gap {:+.3}%; order regions differ in {} of {} MDP order states",
        run.nn.mean,
        run.nn.std_error,
        run.mdp.mean,
        run.mdp.std_error,
        100.0 * gap,
        run.region_diff,
        run.region_size
    );
    (gap, detail)
}

#[test]
#[ignore = "trains networks for tens of minutes"]
fn c2_two_item_nn_gap() {
    let scale = Scale { iterations: 6000, batch: 256, hidden: vec![64; 4], eval: SimConfig::new(5000, 1000, 303) };
    let run = two_item_nn_vs_mdp(&scale);
    let (gap, detail) = describe_gap(&run);
    report("C2", "NN cost within 1.5% of the MDP policy", gap <= NN_GAP_TOL, detail);
}

#[test]
fn c2_smoke() {
    let scale = Scale { iterations: 20, batch: 16, hidden: vec![8; 2], eval: SimConfig::new(200, 20, 303) };
    let run = two_item_nn_vs_mdp(&scale);
    let (gap, detail) = describe_gap(&run);
    report("C2-smoke", "tiny training run extracts a policy with finite cost", run.nn.mean.is_finite() && gap.is_finite(), detail);
}

struct OneItemReport {
    value_err: f64,
    gradient_err: f64,
    violation: f64,
}

fn one_item_validation(scale: &Scale) -> OneItemReport {
    let params = CostParams::new(1.5, vec![1.0], vec![0.5], vec![2.0], 0.05).unwrap();
    let diff = DiffusionParams::diagonal(vec![1.0], vec![0.2]);
    let oracle = solve_1d_qvi(&params, &diff, QviGrid::new(-3.0, 6.0, 1801)).unwrap();
    let reference = ReferencePolicy { lambda: 0.4, order_up_to_mean: vec![2.0], nu: 0.5, alpha: 0.0 };
    let total = 15_000;
    let cfg = TrainConfig {
        horizon: 0.8,
        n_steps: 200,
        batch_size: scale.batch,
        iterations: scale.iterations,
        hidden: scale.hidden.clone(),
        lr_schedule: rescale(&[(1, 1e-3), (5001, 1e-4), (10_001, 1e-5)], total, scale.iterations),
        beta_schedule: rescale(&[(1, 1e2), (5001, 1e4), (10_001, 2e5)], total, scale.iterations),
        kappa: 1.0,
        seed: 7,
        checkpoint_every: None,
    };
    let out = train(&cfg, &reference, &diff, &params, &[0.0]).unwrap();
    let (mut err_h, mut err_g, mut sup_v, mut sup_dv) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..=400 {
        let x = -1.0 + 4.0 * k as f64 / 400.0;
        let (v, dv) = (oracle.value_at(x), oracle.gradient_at(x));
        err_h = err_h.max((out.h.forward(&[x]).unwrap()[0] - v).abs());
        err_g = err_g.max((out.g.forward(&[x]).unwrap()[0] - dv).abs());
        sup_v = sup_v.max(v.abs());
        sup_dv = sup_dv.max(dv.abs());
    }
    OneItemReport { value_err: err_h / sup_v, gradient_err: err_g / sup_dv, violation: tail_violation(&out, 200) }
}

#[test]
#[ignore = "trains networks for about 40 minutes"]
fn c4_one_item_validation() {
    let scale = Scale { iterations: 9000, batch: 256, hidden: vec![32; 4], eval: SimConfig::new(0, 1, 0) };
    let r = one_item_validation(&scale);
    let pass = r.value_err <= H_SUP_TOL && r.gradient_err <= G_SUP_TOL && r.violation < VIOLATION_1D_TOL;
    let detail = format!(
        "sup|H-V|/sup|V| {:.4} (<= {H_SUP_TOL}), sup|G-V'|/sup|V'| {:.4} (<= {G_SUP_TOL}), violation {:.4} (< {VIOLATION_1D_TOL})",
        r.value_err, r.gradient_err, r.violation
    );
    report("C4", "1-item networks match the QVI solution", pass, detail);
}

#[test]
fn c4_smoke() {
    let scale = Scale { iterations: 10, batch: 16, hidden: vec![8; 2], eval: SimConfig::new(0, 1, 0) };
    let r = one_item_validation(&scale);
    let pass = r.value_err.is_finite() && r.gradient_err.is_finite() && (0.0..=1.0).contains(&r.violation);
    let detail = format!("value err {:.3}, gradient err {:.3}, violation {:.3}", r.value_err, r.gradient_err, r.violation);
    report("C4-smoke", "tiny 1-item run yields finite error measures", pass, detail);
}

struct TwelveItemRun {
    /// Mean loss over the first and last tenth of each penalty stage.
    stages: Vec<(f64, f64, f64)>,
    violation: f64,
    nn: CostEstimate,
    independent: CostEstimate,
}

fn twelve_item_pipeline(scale: &Scale, search: Option<&SimConfig>) -> TwelveItemRun {
    let (model, params) = twelve_item(Variability::Low, 20.0, 10.0).unwrap();
    let diff = diffusion_moments(&model);
    let (order_up_to, independent) = match search {
        Some(s) => {
            let rs = rs_search(&model, &params, 100, s).unwrap();
            let qs = qs_search(&model, &params, rs.best.r, s, 2000).unwrap();
            (qs.best.s, independent_ss_search(&model, &params, s).unwrap().best)
        }
        None => {
            let s = (0..12).map(|i| rs_optimal_basestock(13, i, &model, &params).unwrap().max(1) as f64).collect();
            (s, make_independent_ss(1.0, &model, &params).unwrap())
        }
    };
    let reference = ReferencePolicy { lambda: 4.0, order_up_to_mean: order_up_to.clone(), nu: 0.2, alpha: 0.4 };
    let total = 40_000;
    let cfg = TrainConfig {
        horizon: 0.1,
        n_steps: 50,
        batch_size: scale.batch,
        iterations: scale.iterations,
        hidden: scale.hidden.clone(),
        lr_schedule: rescale(&[(1, 1e-3), (5001, 5e-4), (10_001, 1e-4), (15_001, 1e-5), (20_001, 1e-6)], total, scale.iterations),
        beta_schedule: rescale(
            &[(1, 1.0), (2501, 10.0), (5001, 1e2), (7501, 1e3), (10_001, 1e4), (15_001, 1e5), (20_001, 1e6)],
            total,
            scale.iterations,
        ),
        kappa: 0.1,
        seed: 13,
        checkpoint_every: None,
    };
    let out = train(&cfg, &reference, &diff, &params, &[0.0; 12]).unwrap();
    let mut stages = Vec::new();
    let mut start = 0;
    while start < out.diagnostics.len() {
        let beta = out.diagnostics[start].beta;
        let end = start + out.diagnostics[start..].iter().take_while(|r| r.beta == beta).count();
        let tenth = ((end - start) / 10).max(1);
        let mean = |rs: &[IterationRecord]| rs.iter().map(|r| r.loss).sum::<f64>() / rs.len() as f64;
        stages.push((beta, mean(&out.diagnostics[start..start + tenth]), mean(&out.diagnostics[end - tenth..end])));
        start = end;
    }
    let violation = tail_violation(&out, 200);
    let nets = NetworkPair::new(out.h, out.g).unwrap();
    let scaled = params.scaled(cfg.kappa);
    let ext = ExtractionConfig {
        epsilon: -2.5,
        bounds: [0.0, 2.0],
        start: 0.5,
        method: ExtractionMethod::MinimizeValue,
        reference: order_up_to,
        restarts: 10,
        seed: 0,
    };
    let z = compute_order_up_to(&nets, &scaled, &ext).unwrap().z;
    let nn = NeuralNetPolicy::new(nets, z, ext.epsilon, scaled, diff).unwrap();
    TwelveItemRun {
        stages,
        violation,
        nn: simulate_policy(&nn, &model, &params, &scale.eval).unwrap(),
        independent: simulate_policy(&independent, &model, &params, &scale.eval).unwrap(),
    }
}

fn describe_twelve(run: &TwelveItemRun) -> String {
    let stages: Vec<String> = run.stages.iter().map(|(b, first, last)| format!("beta {b:e}: {first:.3} -> {last:.3}")).collect();
    format!(
        "{}; violation {:.4}; NN {:.2}±{:.2} vs independent (s,S) {:.2}±{:.2}",
        stages.join(", "),
        run.violation,
        run.nn.mean,
        run.nn.std_error,
        run.independent.mean,
        run.independent.std_error
    )
}

#[test]
#[ignore = "trains 12-item networks for about half an hour"]
fn c7_twelve_item_pipeline() {
    let scale = Scale { iterations: 4000, batch: 1000, hidden: vec![64; 3], eval: SimConfig::new(2000, 10, 404) };
    let run = twelve_item_pipeline(&scale, Some(&SimConfig::new(2000, 500, 101)));
    let decreasing = run.stages.iter().all(|(_, first, last)| last < first);
    let pass = decreasing && run.violation < VIOLATION_12D_TOL && run.nn.mean < run.independent.mean;
    report("C7", "12-item pipeline trains, extracts and beats independent (s,S)", pass, describe_twelve(&run));
}

#[test]
fn c7_smoke() {
    let scale = Scale { iterations: 20, batch: 16, hidden: vec![8; 2], eval: SimConfig::new(50, 2, 404) };
    let run = twelve_item_pipeline(&scale, None);
    let pass = run.stages.len() >= 2 && run.nn.mean.is_finite() && run.independent.mean.is_finite();
    report("C7-smoke", "tiny 12-item run trains, extracts and simulates", pass, describe_twelve(&run));
}
