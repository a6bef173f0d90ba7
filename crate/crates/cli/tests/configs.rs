use std::path::{Path, PathBuf};

use sjrp_cli::config::{ExperimentConfig, Family};
use sjrp_core::model::{DemandKind, DemandModel};
use sjrp_core::bench::{CanOrderPolicy, IndependentSsPolicy, QsPolicy, RsPolicy};
use sjrp_core::policy::{ExtractionMethod, PolicySpec};
use sjrp_core::problems::{fifty_item, twelve_item, two_item, two_item_base_case, Variability};

fn configs(group: &str) -> Vec<(PathBuf, ExperimentConfig)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(group);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .map(|p| {
            let cfg = ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{e}"));
            (p, cfg)
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Poisson models built in code carry their implied CV; files leave it out.
fn same_demand(a: &DemandModel, b: &DemandModel) -> bool {
    a.kind == b.kind
        && a.annual_mean == b.annual_mean
        && a.periods_per_year == b.periods_per_year
        && (a.kind == DemandKind::Poisson || a.annual_cv == b.annual_cv)
}

fn variability(name: &str) -> Variability {
    match name {
        "low" => Variability::Low,
        "medium" => Variability::Medium,
        "high" => Variability::High,
        other => panic!("unknown variability {other}"),
    }
}

#[test]
fn every_shipped_config_parses() {
    assert_eq!(configs("two_item").len(), 7);
    assert_eq!(configs("twelve_item").len(), 27);
    assert_eq!(configs("fifty_item").len(), 9);
    assert_eq!(configs("single_item").len(), 1);
}

#[test]
fn base_case_config_holds_its_hyperparameter_row() {
    let (_, cfg) = configs("two_item").into_iter().find(|(p, _)| p.ends_with("base_case.toml")).unwrap();
    let r = cfg.reference.as_ref().unwrap();
    assert_eq!((r.lambda, r.nu, r.alpha), (1.0, 0.2, 0.0));
    assert_eq!(r.order_up_to_mean.as_deref(), Some(&[35.0, 20.0][..]));
    let t = cfg.training.as_ref().unwrap();
    assert_eq!((t.horizon, t.n_steps, t.batch_size, t.iterations, t.kappa), (0.1, 50, 2500, 25_000, 0.1));
    assert_eq!(t.hidden, vec![500; 4]);
    assert_eq!(t.lr_schedule.iter().map(|s| s.value).collect::<Vec<_>>(), vec![1e-3, 1e-4, 1e-5, 1e-6]);
    assert_eq!(t.beta_schedule.last().unwrap().value, 1e6);
    let x = cfg.extraction.as_ref().unwrap();
    assert_eq!((x.epsilon, x.bounds, x.start, x.method), (-2.5, [0.0, 1.5], 1.0, ExtractionMethod::MinimizeValue));
    let (model, params) = two_item_base_case().unwrap();
    assert!(same_demand(cfg.problem.demand.as_ref().unwrap(), &model));
    assert_eq!(cfg.problem.costs, params);
}

#[test]
fn shipped_problems_match_the_catalog() {
    for (path, cfg) in configs("two_item") {
        let stem = path.file_stem().unwrap().to_str().unwrap();
        let (var, c0, p) = match stem {
            "base_case" => ("medium", 50.0, 50.0),
            "low_cv" => ("low", 50.0, 50.0),
            "high_cv" => ("high", 50.0, 50.0),
            "c0_20" => ("medium", 20.0, 50.0),
            "c0_100" => ("medium", 100.0, 50.0),
            "p_10" => ("medium", 50.0, 10.0),
            "p_100" => ("medium", 50.0, 100.0),
            other => panic!("unexpected config {other}"),
        };
        let (model, params) = two_item(variability(var), c0, p).unwrap();
        assert!(same_demand(cfg.problem.demand.as_ref().unwrap(), &model), "{stem}");
        assert_eq!(cfg.problem.costs, params, "{stem}");
    }
    for (path, cfg) in configs("twelve_item") {
        let stem = path.file_stem().unwrap().to_str().unwrap().to_string();
        let parts: Vec<&str> = stem.split('_').collect();
        let (c0, p): (f64, f64) = (parts[2].parse().unwrap(), parts[4].parse().unwrap());
        let (model, params) = twelve_item(variability(parts[0]), c0, p).unwrap();
        assert!(same_demand(cfg.problem.demand.as_ref().unwrap(), &model), "{stem}");
        assert_eq!(cfg.problem.costs, params, "{stem}");
        assert!(cfg.reference.as_ref().unwrap().order_up_to_from.is_some());
    }
    for (path, cfg) in configs("fifty_item") {
        let stem = path.file_stem().unwrap().to_str().unwrap().to_string();
        let parts: Vec<&str> = stem.split('_').collect();
        let (model, params) = fifty_item(variability(parts[0]), parts[2].parse().unwrap()).unwrap();
        assert!(same_demand(cfg.problem.demand.as_ref().unwrap(), &model), "{stem}");
        assert_eq!(cfg.problem.costs, params, "{stem}");
        assert_eq!(cfg.training.as_ref().unwrap().kappa, 0.01);
    }
    let (_, one) = configs("single_item").remove(0);
    let diff = one.diffusion();
    assert_eq!((diff.mu[0], diff.sigma[0]), (1.0, 0.2));
    assert_eq!(one.problem.costs.c0, 1.5);
}

#[test]
fn twelve_item_reference_sources_follow_the_tables() {
    let from = |name: &str| {
        configs("twelve_item")
            .into_iter()
            .find(|(p, _)| p.file_stem().unwrap() == name)
            .unwrap()
            .1
            .reference
            .unwrap()
            .order_up_to_from
            .unwrap()
    };
    assert_eq!(from("low_c0_20_p_10"), Family::Qs);
    assert_eq!(from("high_c0_20_p_50"), Family::CanOrder);
    assert_eq!(from("high_c0_200_p_10"), Family::Qs);
}

#[test]
fn empty_and_unknown_keys_are_rejected() {
    assert!(ExperimentConfig::parse("").is_err());
    let base = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/two_item/base_case.toml")).unwrap();
    assert!(ExperimentConfig::parse(&base).is_ok());
    let typo = base.replace("[training]\n", "[training]\nbatchsize = 3\n");
    let err = ExperimentConfig::parse(&typo).unwrap_err();
    assert!(err.contains("batchsize"), "{err}");
    let nested = base.replace("c0 = 50.0", "c0 = 50.0\nfixed = 1.0");
    assert!(ExperimentConfig::parse(&nested).is_err());
    let both = base.replace("order_up_to_mean = [35.0, 20.0]", "order_up_to_mean = [35.0, 20.0]\norder_up_to_from = \"qs\"");
    assert!(ExperimentConfig::parse(&both).is_err());
    let wrong_dim = base.replace("order_up_to_mean = [35.0, 20.0]", "order_up_to_mean = [35.0]");
    assert!(ExperimentConfig::parse(&wrong_dim).is_err());
    let coarse = base.replace("n_steps = 50", "n_steps = 10");
    assert!(ExperimentConfig::parse(&coarse).unwrap_err().contains("time step"));
}

#[test]
fn save_then_load_is_identity() {
    for group in ["two_item", "twelve_item", "fifty_item", "single_item"] {
        for (path, cfg) in configs(group) {
            let again = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
            assert_eq!(again, cfg, "{}", path.display());
        }
    }
}

#[test]
fn defaults_are_filled_in() {
    let (_, cfg) = configs("two_item").remove(0);
    let b = cfg.benchmarks.as_ref().unwrap();
    assert_eq!(b.families.len(), 4);
    assert_eq!((b.r_max, b.cycle_samples), (100, 2000));
    assert_eq!(cfg.compare.match_threshold, 0.01);
    assert_eq!(cfg.extraction.as_ref().unwrap().restarts, 10);
    let text = cfg.to_toml();
    assert!(text.contains("match_threshold") && text.contains("cycle_samples"));
}

#[test]
fn policy_files_round_trip_and_reject_unknown_keys() {
    let specs = vec![
        PolicySpec::NeverOrder { d: 2 },
        PolicySpec::Rs(RsPolicy { r: 3, s: vec![30.0, 15.0] }),
        PolicySpec::Qs(QsPolicy { q: 12.0, s: vec![30.0, 15.0] }),
        PolicySpec::CanOrder(CanOrderPolicy::new(vec![5.0, 2.0], vec![10.0, 6.0], vec![30.0, 15.0]).unwrap()),
        PolicySpec::IndependentSs(IndependentSsPolicy { s: vec![5.0, 2.0], big_s: vec![30.0, 15.0], alpha: 0.5 }),
        PolicySpec::Mdp { table: "mdp_table.bin".into() },
        PolicySpec::NeuralNet { checkpoint: "nets.ckpt".into(), z_star: vec![35.5, 20.25], epsilon: -2.5, kappa: 0.1 },
    ];
    for spec in specs {
        let text = toml::to_string(&spec).unwrap();
        let back: PolicySpec = toml::from_str(&text).unwrap();
        assert_eq!(back, spec, "{text}");
        let extra = format!("{text}bogus = 1\n");
        assert!(toml::from_str::<PolicySpec>(&extra).is_err(), "accepted {extra}");
    }
    let can_order: PolicySpec = toml::from_str("kind = \"can_order\"\ns = [1.0]\no = [2.0]\nS = [5.0]\n").unwrap();
    assert!(matches!(can_order, PolicySpec::CanOrder(_)));
    assert!(toml::from_str::<PolicySpec>("kind = \"sS\"\n").is_err());
}
