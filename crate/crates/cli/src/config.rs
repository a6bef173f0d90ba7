//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sjrp_core::bsde::{ReferencePolicy, ScheduleStep, TrainConfig};
use sjrp_core::mdp::TruncatedMdpSpec;
use sjrp_core::model::{diffusion_moments, CostParams, DemandModel, DiffusionParams};
use sjrp_core::policy::{ExtractionConfig, ExtractionMethod};
use sjrp_core::sim::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Master seed; every stage derives its own stream from it.
    pub seed: u64,
    /// Output directory, relative to the config file.
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub problem: Problem,
    #[serde(default)]
    pub mdp: Option<MdpSection>,
    #[serde(default)]
    pub benchmarks: Option<BenchSection>,
    #[serde(default)]
    pub reference: Option<ReferenceSection>,
    #[serde(default)]
    pub training: Option<TrainingSection>,
    #[serde(default)]
    pub extraction: Option<ExtractionSection>,
    #[serde(default)]
    pub evaluation: Option<EvaluationSection>,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub validate1d: Option<Validate1dSection>,
}

/// Demand and costs. Discrete problems give `demand`; the continuous
/// single-item problem gives `diffusion` instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    #[serde(default)]
    pub demand: Option<DemandModel>,
    #[serde(default)]
    pub diffusion: Option<DiffusionSection>,
    pub costs: CostParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSection {
    /// Annual demand drift per item.
    pub mu: Vec<f64>,
    /// Annual demand standard deviation per item.
    pub sd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpSection {
    pub state_lo: i64,
    pub state_hi: i64,
    pub action_hi: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Rs,
    Qs,
    CanOrder,
    IndependentSs,
}

impl Family {
    pub fn id(self) -> &'static str {
        match self {
            Family::Rs => "rs",
            Family::Qs => "qs",
            Family::CanOrder => "can_order",
            Family::IndependentSs => "independent_ss",
        }
    }
}

fn default_families() -> Vec<Family> {
    vec![Family::Rs, Family::Qs, Family::CanOrder, Family::IndependentSs]
}

fn default_r_max() -> u32 {
    100
}

fn default_cycle_samples() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    #[serde(default = "default_families")]
    pub families: Vec<Family>,
    /// Largest review period tried by the (R,S) search.
    #[serde(default = "default_r_max")]
    pub r_max: u32,
    /// Simulated cycles per (Q,S) base-stock estimate.
    #[serde(default = "default_cycle_samples")]
    pub cycle_samples: usize,
    /// Paths and periods used to rank candidates.
    pub search_periods: u64,
    pub search_paths: u64,
}

/// Reference policy; `order_up_to_from` names a benchmark whose `S` is used
/// once `bench` has written it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    pub lambda: f64,
    pub nu: f64,
    pub alpha: f64,
    #[serde(default)]
    pub order_up_to_mean: Option<Vec<f64>>,
    #[serde(default)]
    pub order_up_to_from: Option<Family>,
    /// Initial training state; zero when absent.
    #[serde(default)]
    pub initial_state: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub horizon: f64,
    pub n_steps: usize,
    pub batch_size: usize,
    pub iterations: u64,
    pub hidden: Vec<usize>,
    pub lr_schedule: Vec<ScheduleStep>,
    pub beta_schedule: Vec<ScheduleStep>,
    pub kappa: f64,
    #[serde(default)]
    pub checkpoint_every: Option<u64>,
}

fn default_restarts() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionSection {
    pub epsilon: f64,
    /// Box bounds as multiples of the reference order-up-to vector.
    pub bounds: [f64; 2],
    pub start: f64,
    pub method: ExtractionMethod,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSection {
    pub periods: u64,
    pub paths: u64,
    /// Path count for the neural policy, whose decisions are costlier.
    #[serde(default)]
    pub neural_paths: Option<u64>,
    #[serde(default)]
    pub initial_state: Option<Vec<f64>>,
    /// Corners of the integer grid on which 2-item order regions are dumped.
    #[serde(default)]
    pub region_lo: Option<[i64; 2]>,
    #[serde(default)]
    pub region_hi: Option<[i64; 2]>,
}

fn default_baseline() -> String {
    "neural".into()
}

fn default_match_threshold() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    #[serde(default = "default_baseline")]
    pub baseline: String,
    /// Relative gap at or below which a policy matches the baseline.
    #[serde(default = "default_match_threshold")]
    pub match_threshold: f64,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self { baseline: default_baseline(), match_threshold: default_match_threshold() }
    }
}

fn default_check_range() -> [f64; 2] {
    [-1.0, 3.0]
}

fn default_check_points() -> usize {
    401
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Validate1dSection {
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
    #[serde(default = "default_check_range")]
    pub check_range: [f64; 2],
    #[serde(default = "default_check_points")]
    pub check_points: usize,
    pub value_tolerance: f64,
    pub gradient_tolerance: f64,
    pub violation_tolerance: f64,
    /// Trailing iterations averaged for the final violation probability.
    pub violation_window: usize,
}

/// Seeds of the individual stages.
pub struct Seeds {
    pub search: u64,
    pub evaluation: u64,
    pub training: u64,
    pub extraction: u64,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    pub fn dim(&self) -> usize {
        self.problem.costs.dim()
    }

    pub fn seeds(&self) -> Seeds {
        Seeds { search: self.seed, evaluation: self.seed + 1, training: self.seed + 2, extraction: self.seed + 3 }
    }

    pub fn validate(&self) -> Result<(), String> {
        let p = &self.problem;
        p.costs.validate().map_err(|e| e.to_string())?;
        let d = self.dim();
        match (&p.demand, &p.diffusion) {
            (Some(m), None) => {
                m.validate().map_err(|e| e.to_string())?;
                dims("problem.demand", m.dim(), d)?;
            }
            (None, Some(s)) => {
                dims("problem.diffusion.mu", s.mu.len(), d)?;
                dims("problem.diffusion.sd", s.sd.len(), d)?;
                if s.sd.iter().any(|v| !(*v >= 0.0)) {
                    return Err("problem.diffusion.sd must be >= 0".into());
                }
            }
            _ => return Err("problem needs exactly one of `demand` and `diffusion`".into()),
        }
        if let Some(m) = &self.mdp {
            if d > 2 {
                return Err(format!("[mdp] needs at most 2 items, problem has {d}"));
            }
            self.mdp_spec().map_err(|e| e.to_string())?.validate().map_err(|e| e.to_string())?;
            let _ = m;
        }
        if let Some(b) = &self.benchmarks {
            if p.demand.is_none() {
                return Err("[benchmarks] needs a discrete demand model".into());
            }
            if b.families.is_empty() || b.search_periods == 0 || b.search_paths == 0 || b.r_max == 0 {
                return Err("[benchmarks] needs families, r_max, search_periods and search_paths > 0".into());
            }
        }
        if let Some(r) = &self.reference {
            if r.order_up_to_mean.is_some() == r.order_up_to_from.is_some() {
                return Err("[reference] needs exactly one of `order_up_to_mean` and `order_up_to_from`".into());
            }
            if let Some(v) = &r.order_up_to_mean {
                dims("reference.order_up_to_mean", v.len(), d)?;
            }
            if let Some(v) = &r.initial_state {
                dims("reference.initial_state", v.len(), d)?;
            }
            if r.order_up_to_from.is_some() && self.benchmarks.is_none() {
                return Err("reference.order_up_to_from needs a [benchmarks] section".into());
            }
        }
        if let Some(t) = &self.training {
            let r = self.reference.as_ref().ok_or("[training] needs a [reference] section")?;
            let policy = ReferencePolicy {
                lambda: r.lambda,
                order_up_to_mean: vec![1.0; d],
                nu: r.nu,
                alpha: r.alpha,
            };
            self.train_config(t).validate(&policy).map_err(|e| e.to_string())?;
        }
        if let Some(x) = &self.extraction {
            if self.reference.is_none() {
                return Err("[extraction] needs a [reference] section".into());
            }
            self.extraction_config(x, vec![1.0; d]).validate().map_err(|e| e.to_string())?;
        }
        if let Some(e) = &self.evaluation {
            if let Some(v) = &e.initial_state {
                dims("evaluation.initial_state", v.len(), d)?;
            }
            match (e.region_lo, e.region_hi) {
                (None, None) => {}
                (Some(lo), Some(hi)) if d == 2 && lo[0] <= hi[0] && lo[1] <= hi[1] => {}
                _ => return Err("evaluation.region_lo/region_hi need 2 items and lo <= hi".into()),
            }
        }
        if !(self.compare.match_threshold >= 0.0) {
            return Err("compare.match_threshold must be >= 0".into());
        }
        if let Some(v) = &self.validate1d {
            if d != 1 || p.diffusion.is_none() {
                return Err("[validate1d] needs a single-item diffusion problem".into());
            }
            if self.training.is_none() {
                return Err("[validate1d] needs a [training] section".into());
            }
            if !(v.grid_lo < v.check_range[0] && v.check_range[0] < v.check_range[1] && v.check_range[1] < v.grid_hi) {
                return Err("validate1d.check_range must lie strictly inside the grid".into());
            }
            if v.grid_points < 3 || v.check_points < 2 || v.violation_window == 0 {
                return Err("validate1d needs grid_points >= 3, check_points >= 2, violation_window >= 1".into());
            }
        }
        Ok(())
    }

    pub fn demand(&self) -> Result<&DemandModel, String> {
        self.problem.demand.as_ref().ok_or_else(|| "problem has no discrete demand model".into())
    }

    pub fn diffusion(&self) -> DiffusionParams {
        match (&self.problem.diffusion, &self.problem.demand) {
            (Some(s), _) => DiffusionParams::diagonal(s.mu.clone(), s.sd.clone()),
            (None, Some(m)) => diffusion_moments(m),
            (None, None) => unreachable!("validated"),
        }
    }

    pub fn mdp_spec(&self) -> Result<TruncatedMdpSpec, String> {
        let m = self.mdp.as_ref().ok_or("config has no [mdp] section")?;
        Ok(TruncatedMdpSpec::uniform(self.demand()?.clone(), self.problem.costs.clone(), m.state_lo, m.state_hi, m.action_hi))
    }

    pub fn train_config(&self, t: &TrainingSection) -> TrainConfig {
        TrainConfig {
            horizon: t.horizon,
            n_steps: t.n_steps,
            batch_size: t.batch_size,
            iterations: t.iterations,
            hidden: t.hidden.clone(),
            lr_schedule: t.lr_schedule.clone(),
            beta_schedule: t.beta_schedule.clone(),
            kappa: t.kappa,
            seed: self.seeds().training,
            checkpoint_every: t.checkpoint_every,
        }
    }

    pub fn extraction_config(&self, x: &ExtractionSection, reference: Vec<f64>) -> ExtractionConfig {
        ExtractionConfig {
            epsilon: x.epsilon,
            bounds: x.bounds,
            start: x.start,
            method: x.method,
            reference,
            restarts: x.restarts,
            seed: self.seeds().extraction,
        }
    }

    pub fn sim_config(&self, e: &EvaluationSection, paths: u64) -> SimConfig {
        SimConfig {
            horizon_periods: e.periods,
            n_paths: paths,
            seed: self.seeds().evaluation,
            initial_state: e.initial_state.clone(),
        }
    }
}

fn dims(what: &str, got: usize, expected: usize) -> Result<(), String> {
    if got == expected {
        Ok(())
    } else {
        Err(format!("{what} has {got} entries, expected {expected}"))
    }
}
