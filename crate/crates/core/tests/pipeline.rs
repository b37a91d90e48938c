use ritzfem::harness::{run_experiment, ExperimentConfig};
use ritzfem::network::{read_checkpoint, write_checkpoint, Precision};
use ritzfem::training::{train, Method, Stage, TrainConfig};

fn small(method: Method) -> TrainConfig {
    let mut cfg = TrainConfig::new(method, vec![Stage { m: 6, epochs: 150 }, Stage { m: 8, epochs: 100 }]);
    cfg.width = 8;
    cfg.log_every = 25;
    cfg.clr_half_cycle = 50;
    cfg.lr_high = 1e-2;
    cfg
}

#[test]
fn every_method_lowers_the_loss() {
    for method in [Method::Mc, Method::Quad, Method::Fem] {
        let (report, _) = train(&small(method), None).unwrap();
        let first = report.log.first().unwrap().loss;
        let last = report.final_stage().unwrap().final_loss;
        assert!(last < first - 0.5, "{method}: {first} -> {last}");
        let stage0 = &report.stages[0];
        assert!(stage0.l2_error < 0.5, "{method}: {}", stage0.l2_error);
    }
}

#[test]
fn resumed_training_matches_one_long_ladder() {
    let full = small(Method::Fem);
    let (whole, _) = train(&full, None).unwrap();

    let mut first = full.clone();
    first.ladder.truncate(1);
    let (_, net) = train(&first, None).unwrap();
    let mut bytes = Vec::new();
    write_checkpoint(&net, &mut bytes).unwrap();
    let restored = read_checkpoint(bytes.as_slice()).unwrap();

    let mut second = full.clone();
    second.ladder.remove(0);
    let (rest, _) = train(&second, Some(restored)).unwrap();
    assert_eq!(rest.stages[0].final_loss, whole.stages[1].final_loss);
    assert_eq!(rest.stages[0].l2_error, whole.stages[1].l2_error);
}

#[test]
fn f32_training_tracks_f64() {
    let cfg = small(Method::Fem);
    let (r64, _) = train(&cfg, None).unwrap();
    let mut cfg32 = cfg.clone();
    cfg32.precision = Precision::F32;
    let (r32, net) = train(&cfg32, None).unwrap();
    assert_eq!(net.precision(), Precision::F32);
    let (a, b) = (r64.final_stage().unwrap().final_loss, r32.final_stage().unwrap().final_loss);
    assert!((a - b).abs() < 1e-2 * a.abs(), "{a} {b}");
}

#[test]
fn smoke_config_runs_quickly() {
    let text = include_str!("../../../configs/smoke.json");
    let cfg = ExperimentConfig::from_json(text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let start = std::time::Instant::now();
    let out = run_experiment(&cfg, dir.path(), |_| {}).unwrap();
    assert!(start.elapsed().as_secs_f64() < 60.0);
    assert_eq!(out.rows.len(), 1);
    for file in ["comparison.csv", "comparison.json", "fem_b1_l0_s0.csv", "fem_b1_l0_s0.json", "fem_b1_l0_s0.ckpt"] {
        assert!(dir.path().join(file).exists(), "{file}");
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let cfg = ExperimentConfig::load(&path).unwrap();
            assert!(!cfg.cells().is_empty(), "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 7);
}
