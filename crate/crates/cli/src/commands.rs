//! Subcommand implementations. Each writes CSV tables into the output
//! directory and returns the files it produced.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Result};
use serde::{Deserialize, Serialize};

use sjrp_core::bench::{can_order_search, independent_ss_search, qs_search, rs_search, Candidate};
use sjrp_core::bsde::{train_with, ReferencePolicy};
use sjrp_core::mdp::{policy_iteration, MdpSolution};
use sjrp_core::nn::write_checkpoint;
use sjrp_core::policy::{compute_order_up_to, order_region, NetworkPair, PolicySpec};
use sjrp_core::qvi::{solve_1d_qvi, QviGrid};
use sjrp_core::sim::{simulate_policy, CostEstimate};

use crate::config::{ExperimentConfig, Family};
use crate::output::write_table;
use crate::CliError;

pub struct Run {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub policies: Vec<PathBuf>,
    pub files: Vec<PathBuf>,
    pub timings: Vec<(String, f64)>,
}

impl Run {
    fn policy_dir(&self) -> PathBuf {
        self.out.join("policies")
    }

    fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.out.join("nets.ckpt"))
    }

    fn table<R: Serialize>(&mut self, file: &str, table: &str, rows: &[R]) -> Result<()> {
        write_table(&self.out.join(file), table, rows)?;
        self.files.push(file.into());
        Ok(())
    }

    fn write_policy(&mut self, id: &str, spec: &PolicySpec) -> Result<()> {
        std::fs::create_dir_all(self.policy_dir())?;
        let rel = PathBuf::from("policies").join(format!("{id}.toml"));
        std::fs::write(self.out.join(&rel), toml::to_string(spec)?)?;
        self.files.push(rel);
        Ok(())
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let v = f(self)?;
        self.timings.push((stage.into(), t.elapsed().as_secs_f64()));
        Ok(v)
    }
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T> {
    s.as_ref().ok_or_else(|| CliError::Config(format!("config has no [{name}] section")).into())
}

fn config_err(e: String) -> anyhow::Error {
    CliError::Config(e).into()
}

pub fn read_policy(path: &Path) -> Result<PolicySpec> {
    let text = std::fs::read_to_string(path).map_err(|_| CliError::Missing(format!("policy file {}", path.display())))?;
    let mut spec: PolicySpec = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    spec.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub policy: String,
    pub mean: f64,
    pub std_error: f64,
    pub paths: u64,
    pub periods: u64,
    pub ordering: f64,
    pub holding: f64,
    pub backlog: f64,
    pub variable: f64,
    pub orders_per_year: f64,
}

impl EstimateRow {
    fn new(policy: &str, est: &CostEstimate, periods: u64) -> Self {
        Self {
            policy: policy.into(),
            mean: est.mean,
            std_error: est.std_error,
            paths: est.n_paths,
            periods,
            ordering: est.components.ordering,
            holding: est.components.holding,
            backlog: est.components.backlog,
            variable: est.components.variable,
            orders_per_year: est.orders_per_year,
        }
    }
}

#[derive(Serialize)]
struct CandidateRow<'a> {
    family: &'a str,
    candidate: &'a str,
    mean: f64,
    std_error: f64,
}

/// Tunes each benchmark family and evaluates the winners.
pub fn bench(run: &mut Run) -> Result<()> {
    let b = section(&run.cfg.benchmarks, "benchmarks")?.clone();
    let model = run.cfg.demand().map_err(config_err)?.clone();
    let params = run.cfg.problem.costs.clone();
    let search = sjrp_core::sim::SimConfig::new(b.search_periods, b.search_paths, run.cfg.seeds().search);
    let mut candidates: Vec<(Family, Vec<Candidate>)> = Vec::new();
    let mut winners: Vec<(Family, PolicySpec)> = Vec::new();
    let mut r_star = None;
    let mut families = b.families.clone();
    // (Q,S) scans around the best review period
    if families.contains(&Family::Qs) && !families.contains(&Family::Rs) {
        families.insert(0, Family::Rs);
    }
    families.sort_by_key(|f| *f != Family::Rs);
    for family in families {
        let (spec, cands) = run.timed(&format!("search {}", family.id()), |_| {
            Ok(match family {
                Family::Rs => {
                    let s = rs_search(&model, &params, b.r_max, &search)?;
                    r_star = Some(s.best.r);
                    (PolicySpec::Rs(s.best), s.candidates)
                }
                Family::Qs => {
                    let s = qs_search(&model, &params, r_star.expect("searched first"), &search, b.cycle_samples)?;
                    (PolicySpec::Qs(s.best), s.candidates)
                }
                Family::CanOrder => {
                    let s = can_order_search(&model, &params, &search)?;
                    (PolicySpec::CanOrder(s.best), s.candidates)
                }
                Family::IndependentSs => {
                    let s = independent_ss_search(&model, &params, &search)?;
                    (PolicySpec::IndependentSs(s.best), s.candidates)
                }
            })
        })?;
        if b.families.contains(&family) {
            candidates.push((family, cands));
            winners.push((family, spec));
        }
    }
    let rows: Vec<CandidateRow> = candidates
        .iter()
        .flat_map(|(f, cs)| {
            cs.iter().map(move |c| CandidateRow { family: f.id(), candidate: &c.label, mean: c.estimate.mean, std_error: c.estimate.std_error })
        })
        .collect();
    write_table(&run.out.join("bench_search.csv"), "bench_search", &rows)?;
    run.files.push("bench_search.csv".into());

    let mut est_rows = Vec::new();
    for (family, spec) in &winners {
        run.write_policy(family.id(), spec)?;
        if let Some(e) = run.cfg.evaluation.clone() {
            let sim = run.cfg.sim_config(&e, e.paths);
            let policy = spec.build(&model, &params)?;
            let est = run.timed(&format!("evaluate {}", family.id()), |_| Ok(simulate_policy(&policy, &model, &params, &sim)?))?;
            est_rows.push(EstimateRow::new(family.id(), &est, e.periods));
        }
    }
    if !est_rows.is_empty() {
        run.table("bench.csv", "estimates", &est_rows)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct MdpRow {
    value_at_zero: f64,
    residual: f64,
    iterations: usize,
    states: usize,
}

/// Exact solve of a truncated problem with one or two items.
pub fn mdp(run: &mut Run) -> Result<()> {
    let spec = run.cfg.mdp_spec().map_err(config_err)?;
    let sol: MdpSolution = run.timed("policy iteration", |_| Ok(policy_iteration(&spec)?))?;
    let zero = vec![0; spec.dim()];
    let v0 = sol.value_at(&zero).ok_or_else(|| config_err("the truncation box must contain the zero state".into()))?;
    sol.write_binary(&run.out.join("mdp_table.bin"))?;
    sol.write_csv(&run.out.join("mdp_table.csv"))?;
    run.files.push("mdp_table.bin".into());
    run.files.push("mdp_table.csv".into());
    run.table("mdp.csv", "mdp_summary", &[MdpRow { value_at_zero: v0, residual: sol.residual, iterations: sol.iterations, states: sol.value.len() }])?;
    run.write_policy("mdp", &PolicySpec::Mdp { table: "../mdp_table.bin".into() })?;
    Ok(())
}

fn order_up_to_of(spec: &PolicySpec) -> Option<Vec<f64>> {
    match spec {
        PolicySpec::Rs(p) => Some(p.s.clone()),
        PolicySpec::Qs(p) => Some(p.s.clone()),
        PolicySpec::CanOrder(p) => Some(p.big_s.clone()),
        PolicySpec::IndependentSs(p) => Some(p.big_s.clone()),
        _ => None,
    }
}

/// Mean order-up-to vector of the reference policy.
fn reference_target(run: &Run) -> Result<Vec<f64>> {
    let r = section(&run.cfg.reference, "reference")?;
    if let Some(v) = &r.order_up_to_mean {
        return Ok(v.clone());
    }
    let family = r.order_up_to_from.expect("validated");
    let path = run.policy_dir().join(format!("{}.toml", family.id()));
    if !path.exists() {
        return Err(CliError::Missing(format!("{} (run `bench` first)", path.display())).into());
    }
    let spec = read_policy(&path)?;
    let target = order_up_to_of(&spec).ok_or_else(|| config_err(format!("{} has no order-up-to vector", path.display())))?;
    if target.iter().any(|v| !(*v > 0.0)) {
        return Err(config_err(format!("reference order-up-to levels from {} must be positive", family.id())));
    }
    Ok(target)
}

fn reference_policy(run: &Run) -> Result<(ReferencePolicy, Vec<f64>)> {
    let r = section(&run.cfg.reference, "reference")?;
    let target = reference_target(run)?;
    let x0 = r.initial_state.clone().unwrap_or_else(|| vec![0.0; run.cfg.dim()]);
    Ok((ReferencePolicy { lambda: r.lambda, order_up_to_mean: target, nu: r.nu, alpha: r.alpha }, x0))
}

fn train_networks(run: &mut Run) -> Result<(NetworkPair, Vec<sjrp_core::bsde::IterationRecord>)> {
    let t = section(&run.cfg.training, "training")?.clone();
    let cfg = run.cfg.train_config(&t);
    let (policy, x0) = reference_policy(run)?;
    let diff = run.cfg.diffusion();
    let params = run.cfg.problem.costs.clone();
    let ckpt = run.checkpoint_path();
    let snapshots = run.out.join("checkpoints");
    let mut written = Vec::new();
    let result = run.timed("training", |_| {
        Ok(train_with(&cfg, &policy, &diff, &params, &x0, |m, h, g| {
            std::fs::create_dir_all(&snapshots)?;
            let path = snapshots.join(format!("nets_{m:06}.ckpt"));
            write_checkpoint(&path, &[h, g])?;
            written.push(path);
            Ok(())
        }))
    })?;
    for p in written {
        if let Ok(rel) = p.strip_prefix(&run.out) {
            run.files.push(rel.to_path_buf());
        }
    }
    let out = result?;
    write_checkpoint(&ckpt, &[&out.h, &out.g])?;
    if let Ok(rel) = ckpt.strip_prefix(&run.out) {
        run.files.push(rel.to_path_buf());
    }
    run.table("train_diagnostics.csv", "train_diagnostics", &out.diagnostics)?;
    Ok((NetworkPair::new(out.h, out.g)?, out.diagnostics))
}

pub fn train(run: &mut Run) -> Result<()> {
    train_networks(run).map(|_| ())
}

#[derive(Serialize)]
struct ExtractRow {
    item: usize,
    z: f64,
    reference: f64,
    lower: f64,
    upper: f64,
    pinned: bool,
}

/// Computes `z*` from trained networks and writes the neural policy file.
pub fn extract(run: &mut Run) -> Result<()> {
    let x = section(&run.cfg.extraction, "extraction")?.clone();
    let kappa = section(&run.cfg.training, "training")?.kappa;
    let ckpt = run.checkpoint_path();
    if !ckpt.exists() {
        return Err(CliError::Missing(format!("checkpoint {}", ckpt.display())).into());
    }
    let pair = NetworkPair::load(&ckpt)?;
    let reference = reference_target(run)?;
    let cfg = run.cfg.extraction_config(&x, reference.clone());
    let scaled = run.cfg.problem.costs.scaled(kappa);
    let found = run.timed("extraction", |_| Ok(compute_order_up_to(&pair, &scaled, &cfg)?))?;
    for w in &found.warnings {
        eprintln!("warning: {w}");
    }
    let (lo, hi) = (cfg.lower(), cfg.upper());
    let rows: Vec<ExtractRow> = (0..found.z.len())
        .map(|i| ExtractRow { item: i + 1, z: found.z[i], reference: reference[i], lower: lo[i], upper: hi[i], pinned: found.pinned.contains(&i) })
        .collect();
    run.table("extract.csv", "extract", &rows)?;
    let rel_ckpt = match ckpt.strip_prefix(&run.out) {
        Ok(r) => Path::new("..").join(r),
        Err(_) => std::path::absolute(&ckpt)?,
    };
    run.write_policy("neural", &PolicySpec::NeuralNet { checkpoint: rel_ckpt, z_star: found.z, epsilon: x.epsilon, kappa })
}

#[derive(Serialize)]
struct RegionRow {
    policy: String,
    cells: usize,
    ordering_cells: usize,
    differs_from_mdp: Option<usize>,
}

/// Simulates every policy file (all of `policies/` by default).
pub fn eval(run: &mut Run) -> Result<()> {
    let e = section(&run.cfg.evaluation, "evaluation")?.clone();
    let model = run.cfg.demand().map_err(config_err)?.clone();
    let params = run.cfg.problem.costs.clone();
    let files = if run.policies.is_empty() {
        let dir = run.policy_dir();
        let mut v: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|_| CliError::Missing(format!("policy directory {}", dir.display())))?
            .filter_map(|f| f.ok().map(|f| f.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        v.sort();
        v
    } else {
        run.policies.clone()
    };
    if files.is_empty() {
        return Err(CliError::Missing("no policy files to evaluate".into()).into());
    }
    let mut rows = Vec::new();
    let mut regions = Vec::new();
    for f in &files {
        let id = f.file_stem().and_then(|s| s.to_str()).ok_or_else(|| anyhow!("bad policy file name {}", f.display()))?.to_string();
        let spec = read_policy(f)?;
        let paths = match spec {
            PolicySpec::NeuralNet { .. } => e.neural_paths.unwrap_or(e.paths),
            _ => e.paths,
        };
        let policy = spec.build(&model, &params).map_err(|err| match err {
            sjrp_core::Error::Io(_) | sjrp_core::Error::Checkpoint(_) => anyhow::Error::from(CliError::Missing(format!("{id}: {err}"))),
            other => other.into(),
        })?;
        let sim = run.cfg.sim_config(&e, paths);
        let est = run.timed(&format!("evaluate {id}"), |_| Ok(simulate_policy(&policy, &model, &params, &sim)?))?;
        rows.push(EstimateRow::new(&id, &est, e.periods));
        if let (Some(lo), Some(hi)) = (e.region_lo, e.region_hi) {
            regions.push((id, order_region(&policy, lo, hi)?));
        }
    }
    run.table("eval.csv", "estimates", &rows)?;
    if !regions.is_empty() {
        let mdp = regions.iter().find(|(id, _)| id == "mdp").map(|(_, r)| r.clone());
        let mut summary = Vec::new();
        for (id, r) in &regions {
            let file = format!("region_{id}.csv");
            r.write_csv(&run.out.join(&file))?;
            run.files.push(file.into());
            summary.push(RegionRow {
                policy: id.clone(),
                cells: r.cells.len(),
                ordering_cells: r.count(),
                differs_from_mdp: mdp.as_ref().map(|m| r.symmetric_difference(m)).transpose()?,
            });
        }
        run.table("regions.csv", "regions", &summary)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub policy: String,
    pub mean: f64,
    pub std_error: f64,
    /// `(policy - baseline) / baseline`.
    pub gap: f64,
    pub gap_std_error: f64,
    pub label: String,
}

/// Relative gap of `other` against `base` with a delta-method standard error
/// treating the two estimates as independent.
pub fn relative_gap(other: (f64, f64), base: (f64, f64)) -> (f64, f64) {
    let (m, s) = other;
    let (b, sb) = base;
    let gap = (m - b) / b;
    let se = (m / b) * ((s / m).powi(2) + (sb / b).powi(2)).sqrt();
    (gap, if se.is_finite() { se } else { 0.0 })
}

pub fn classify(gap: f64, threshold: f64) -> &'static str {
    if gap <= threshold {
        "match"
    } else {
        "beat"
    }
}

/// Gap table against the configured baseline, from `eval.csv` and `bench.csv`.
pub fn compare(run: &mut Run) -> Result<()> {
    let mut rows: Vec<EstimateRow> = Vec::new();
    for (file, required) in [("eval.csv", true), ("bench.csv", false)] {
        let path = run.out.join(file);
        if !path.exists() {
            if required {
                return Err(CliError::Missing(format!("{} (run `eval` first)", path.display())).into());
            }
            continue;
        }
        for r in crate::output::read_table::<EstimateRow>(&path, "estimates")? {
            if !rows.iter().any(|x| x.policy == r.policy) {
                rows.push(r);
            }
        }
    }
    let cc = run.cfg.compare.clone();
    let base = rows
        .iter()
        .find(|r| r.policy == cc.baseline)
        .ok_or_else(|| CliError::Missing(format!("baseline policy `{}` has no estimate", cc.baseline)))?
        .clone();
    let table: Vec<CompareRow> = rows
        .iter()
        .map(|r| {
            let (gap, se) = relative_gap((r.mean, r.std_error), (base.mean, base.std_error));
            let label = if r.policy == base.policy { "baseline" } else { classify(gap, cc.match_threshold) };
            CompareRow { policy: r.policy.clone(), mean: r.mean, std_error: r.std_error, gap, gap_std_error: se, label: label.into() }
        })
        .collect();
    run.table("compare.csv", "compare", &table)
}

#[derive(Serialize)]
struct CurveRow {
    x: f64,
    value: f64,
    h: f64,
    gradient: f64,
    g: f64,
}

#[derive(Serialize)]
struct CheckRow {
    metric: &'static str,
    value: f64,
    tolerance: f64,
    pass: bool,
}

/// Grid QVI oracle, training, and sup-norm comparison for one item.
pub fn validate1d(run: &mut Run) -> Result<()> {
    let v = section(&run.cfg.validate1d, "validate1d")?.clone();
    let kappa = section(&run.cfg.training, "training")?.kappa;
    let diff = run.cfg.diffusion();
    let params = run.cfg.problem.costs.clone();
    let oracle = run.timed("qvi", |_| Ok(solve_1d_qvi(&params, &diff, QviGrid::new(v.grid_lo, v.grid_hi, v.grid_points))?))?;
    let (nets, diagnostics) = train_networks(run)?;
    let [a, b] = v.check_range;
    let mut curve = Vec::with_capacity(v.check_points);
    let (mut err_h, mut err_g, mut sup_v, mut sup_dv) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..v.check_points {
        let x = a + (b - a) * k as f64 / (v.check_points - 1) as f64;
        let h = nets.h.forward(&[x])?[0] / kappa;
        let g = nets.g.forward(&[x])?[0] / kappa;
        let (val, grad) = (oracle.value_at(x), oracle.gradient_at(x));
        err_h = err_h.max((h - val).abs());
        err_g = err_g.max((g - grad).abs());
        sup_v = sup_v.max(val.abs());
        sup_dv = sup_dv.max(grad.abs());
        curve.push(CurveRow { x, value: val, h, gradient: grad, g });
    }
    let tail = &diagnostics[diagnostics.len().saturating_sub(v.violation_window)..];
    let violation = tail.iter().map(|r| r.violation).sum::<f64>() / tail.len().max(1) as f64;
    let checks = [
        ("value_sup_relative_error", err_h / sup_v, v.value_tolerance),
        ("gradient_sup_relative_error", err_g / sup_dv, v.gradient_tolerance),
        ("final_violation_probability", violation, v.violation_tolerance),
    ];
    let rows: Vec<CheckRow> = checks.iter().map(|&(metric, value, tolerance)| CheckRow { metric, value, tolerance, pass: value < tolerance }).collect();
    for r in &rows {
        println!("[{}] {}: {:.4} (tolerance {})", if r.pass { "PASS" } else { "FAIL" }, r.metric, r.value, r.tolerance);
    }
    run.table("validate1d_curve.csv", "validate1d_curve", &curve)?;
    run.table("validate1d.csv", "validate1d", &rows)
}
