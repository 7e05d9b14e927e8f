use vrbip_core::config::Arm;
use vrbip_core::sim::{self, output::RUN_FILES};
use vrbip_core::ScenarioConfig;

fn small(seed: u64) -> ScenarioConfig {
    let text = format!(
        "seed = {seed}\nusers = 4\nbase_stations = 3\nt_train = 120\nt_eval = 25\nhorizon = 3\nesn.neurons = 10\ntrain.max_rounds = 200\n"
    );
    ScenarioConfig::parse(&text, "small").unwrap()
}

#[test]
fn same_seed_same_files() {
    let cfg = small(9);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    sim::write_run(a.path(), &sim::run_scenario(&cfg).unwrap()).unwrap();
    sim::write_run(b.path(), &sim::run_scenario(&cfg).unwrap()).unwrap();
    for f in RUN_FILES.iter().chain(["config.txt"].iter()) {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(!x.is_empty(), "{f} empty");
        assert_eq!(x, y, "{f} differs between runs");
    }
}

#[test]
fn other_seed_other_traces() {
    let a = sim::run_scenario(&small(1)).unwrap();
    let b = sim::run_scenario(&small(2)).unwrap();
    assert_ne!(a.traces[0].positions, b.traces[0].positions);
}

#[test]
fn shapes_of_outcome() {
    let cfg = small(4);
    let out = sim::run_scenario(&cfg).unwrap();
    assert_eq!(out.traces.len(), 4);
    assert_eq!(out.bs.len(), 3);
    assert_eq!(out.arms.len(), Arm::ALL.len());
    for a in &out.arms {
        assert_eq!(a.ledger.len(), cfg.n_users * cfg.t_eval);
        assert_eq!(a.user_bip.len(), cfg.n_users);
        let sum: f64 = a.user_bip.iter().sum();
        assert!((sum - a.total_bip()).abs() < 1e-9 * sum.max(1.0));
        assert!(a.ledger.iter().all(|r| r.uplink < 3 && r.downlink < 3));
        assert!((0.0..=1.0).contains(&a.mean_omega()));
    }
    assert!(out.arm(Arm::Perfect).unwrap().nrmse.is_none());
    assert!(out.arm(Arm::Federated).unwrap().nrmse.unwrap().is_finite());
}

#[test]
fn perfect_arm_knows_its_outcome() {
    let out = sim::run_scenario(&small(5)).unwrap();
    for r in &out.arm(Arm::Perfect).unwrap().ledger {
        assert_eq!(r.predicted_omega, Some(r.outcome.omega));
    }
}

#[test]
fn perfect_not_worse_than_random_on_average() {
    let mut gap = 0.0;
    for s in 0..4 {
        let out = sim::run_scenario(&small(100 + s)).unwrap();
        gap += out.arm(Arm::Random).unwrap().total_bip() - out.arm(Arm::Perfect).unwrap().total_bip();
    }
    assert!(gap > 0.0, "gap {gap}");
}

#[test]
fn arm_subset_keeps_shared_scores() {
    let all = sim::run_scenario(&small(6)).unwrap();
    let mut cfg = small(6);
    cfg.set("arms", "federated", "test").unwrap();
    let one = sim::run_scenario(&cfg).unwrap();
    assert_eq!(one.arms.len(), 1);
    assert_eq!(one.arms[0].ledger, all.arm(Arm::Federated).unwrap().ledger);
}

#[test]
fn single_value_sweep_matches_run() {
    let cfg = small(11);
    let points = sim::run_sweep(&cfg, "users", &["4".to_string()], 2).unwrap();
    assert_eq!(points.len(), 1);
    assert_eq!(points[0].seeds, vec![11, 12]);
    for (r, &seed) in points[0].seeds.iter().enumerate() {
        let mut c = cfg.clone();
        c.seed = seed;
        let out = sim::run_scenario(&c).unwrap();
        assert_eq!(points[0].totals[r], sim::output::totals(&out));
    }
    let rows = sim::summarize_sweep("users", &points);
    assert_eq!(rows.len(), Arm::ALL.len());
    assert!(rows.iter().all(|r| r.seeds == 2 && r.std_bip >= 0.0));
}

#[test]
fn sweep_rejects_unknown_key() {
    let e = sim::run_sweep(&small(1), "nope", &["1".to_string()], 1).unwrap_err();
    assert!(e.to_string().contains("nope"));
}

#[test]
fn trained_models_cover_every_stage() {
    let cfg = small(8);
    let trained = sim::train_scenario(&cfg).unwrap();
    for m in &trained.models {
        assert_eq!(m.readouts.len(), cfg.topology.layers());
        for w in &m.readouts {
            assert_eq!(w.nrows(), cfg.n_outputs());
            assert!(w.iter().all(|v| v.is_finite()));
        }
    }
    let dir = tempfile::tempdir().unwrap();
    sim::output::write_training(dir.path(), &trained).unwrap();
    let res = std::fs::read_to_string(dir.path().join("residuals.csv")).unwrap();
    assert!(res.starts_with("user,stage,round,max_primal,dual,shards,converged"));
    assert!(res.lines().count() > 1);
}

#[test]
fn link_dump_has_every_pair() {
    let out = sim::run_scenario(&small(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    sim::write_link_dump(dir.path(), &out, 121).unwrap();
    let text = std::fs::read_to_string(dir.path().join("links.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 4 * 3);
    assert!(sim::write_link_dump(dir.path(), &out, 10_000).is_err());
}
