use std::fs;
use std::path::Path;
use std::process::Command;

use hybrid_sched::{Algorithm, BookingLedger, EventSchedule, Matrix, Schedule, SearchStrategy, SystemParams};
use hybrid_sched_cli::{read_results, run_single, run_sweep, validate_files, ExperimentConfig, Grid};

fn smoke_config(algorithms: Vec<Algorithm>, runs: usize) -> ExperimentConfig {
    ExperimentConfig {
        algorithms,
        n: 16,
        runs,
        grid: Grid {
            flows: vec![[4, 8]],
            ..Grid::default()
        },
        ..ExperimentConfig::default()
    }
}

#[test]
fn smoke_sweep_writes_two_clean_rows() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_sweep(&smoke_config(vec![Algorithm::Eclipse], 2), dir.path()).unwrap();
    let rows = read_results(&report.csv_path).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.valid));
    assert_eq!(rows[0].seed, 0);
    assert_eq!(rows[1].seed, 1);
    let header = fs::read_to_string(&report.csv_path).unwrap();
    assert!(header.starts_with("algorithm,seed,delta,rp_ratio,T,K,wall_time_ms,"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report.summary_path).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 1);
}

#[test]
fn rows_cover_every_cell_run_and_algorithm() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = smoke_config(Algorithm::ALL.to_vec(), 3);
    cfg.grid.delta = vec![0.01, 0.04];
    cfg.grid.search = vec![SearchStrategy::BitonicBinary, SearchStrategy::Sampled { m: 16 }];
    let report = run_sweep(&cfg, dir.path()).unwrap();
    assert_eq!(report.rows.len(), cfg.cells().len() * cfg.runs * cfg.algorithms.len());
    assert_eq!(report.summaries.len(), cfg.cells().len() * cfg.algorithms.len());
    assert_eq!(report.invalid_runs(), 0);
    // Paired design: all algorithms in a cell see the same seeds.
    for s in &report.summaries {
        assert_eq!(s.transmission_time.runs, 3);
    }
}

#[test]
fn repeated_sweeps_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut cfg = smoke_config(Algorithm::ALL.to_vec(), 3);
    cfg.timing = false;
    cfg.jobs = 3;
    let ra = run_sweep(&cfg, a.path()).unwrap();
    cfg.jobs = 1;
    let rb = run_sweep(&cfg, b.path()).unwrap();
    assert_eq!(fs::read(&ra.csv_path).unwrap(), fs::read(&rb.csv_path).unwrap());
    assert_eq!(fs::read(&ra.summary_path).unwrap(), fs::read(&rb.summary_path).unwrap());
}

fn write_diag10(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("diag10.csv");
    fs::write(&path, Matrix::from_rows(&[[10.0, 0.0], [0.0, 10.0]]).unwrap().to_csv()).unwrap();
    path
}

#[test]
fn diag10_gives_eleven_for_eclipse_and_bff() {
    let dir = tempfile::tempdir().unwrap();
    let demand = write_diag10(dir.path());
    let p = SystemParams::new(1.0, 0.1).unwrap();
    for alg in [Algorithm::Eclipse, Algorithm::Bff, Algorithm::TwoHop] {
        let r = run_single(alg, &demand, &p, SearchStrategy::BitonicBinary, dir.path()).unwrap();
        assert_eq!(r.outcome.transmission_time(), 11.0, "{alg}");
    }
}

#[test]
fn zero_demand_gives_an_empty_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let demand = dir.path().join("zero.json");
    fs::write(&demand, Matrix::zeros(4).to_json()).unwrap();
    let p = SystemParams::new(0.01, 0.1).unwrap();
    for alg in Algorithm::ALL {
        let r = run_single(alg, &demand, &p, SearchStrategy::FullScan, dir.path()).unwrap();
        assert_eq!(r.outcome.transmission_time(), 0.0);
        assert_eq!(r.outcome.configurations(), 0);
    }
}

#[test]
fn written_artifacts_parse_back_and_audit_clean() {
    let dir = tempfile::tempdir().unwrap();
    let demand_path = dir.path().join("d.csv");
    let d = hybrid_sched::generate_demand(&hybrid_sched::TrafficGenConfig {
        n_small: 6,
        ..hybrid_sched::TrafficGenConfig::with_size(12, 4)
    })
    .unwrap();
    fs::write(&demand_path, d.to_csv()).unwrap();
    assert_eq!(hybrid_sched_cli::read_demand(&demand_path).unwrap(), d);
    let p = SystemParams::from_ratio(0.01, 10.0).unwrap();
    for alg in Algorithm::ALL {
        let r = run_single(alg, &demand_path, &p, SearchStrategy::BitonicBinary, dir.path()).unwrap();
        let text = fs::read_to_string(&r.schedule_path).unwrap();
        match alg {
            Algorithm::Bff => {
                EventSchedule::from_json(&text).unwrap();
            }
            _ => {
                Schedule::from_json(&text).unwrap();
            }
        }
        if let Some(ledger) = &r.ledger_path {
            BookingLedger::from_json_lines(&fs::read_to_string(ledger).unwrap()).unwrap();
        }
        let report = validate_files(&demand_path, &r.schedule_path, r.ledger_path.as_deref(), &p).unwrap();
        assert!(report.is_clean(), "{alg}: {:?}", report.violations);
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hybrid-sched"))
}

#[test]
fn binary_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let demand = dir.path().join("d.json");
    let status = bin()
        .args(["gen", "--n", "16", "--n-small", "8", "--seed", "3", "--format", "json", "--out"])
        .arg(&demand)
        .status()
        .unwrap();
    assert!(status.success());

    let out = bin()
        .args(["run", "--algorithm", "twohop", "--delta", "0.01", "--ratio", "10", "--demand"])
        .arg(&demand)
        .env("HYBRID_SCHED_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("T = "));
    assert!(stdout.contains("K = ") && stdout.contains("wall_time_ms = "));

    let schedule = dir.path().join("twohop_schedule.json");
    let ledger = dir.path().join("twohop_ledger.jsonl");
    let audit = |ledger: &Path| {
        bin()
            .args(["validate", "--delta", "0.01", "--ratio", "10", "--demand"])
            .arg(&demand)
            .arg("--schedule")
            .arg(&schedule)
            .arg("--ledger")
            .arg(ledger)
            .status()
            .unwrap()
    };
    assert!(audit(&ledger).success());

    // Inflate one indirect booking: the audit must exit nonzero.
    let tampered = dir.path().join("tampered.jsonl");
    let mut lines: Vec<serde_json::Value> = fs::read_to_string(&ledger)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let victim = lines
        .iter_mut()
        .find(|v| v["kind"] == "indirect")
        .expect("some traffic goes two hops");
    victim["amount"] = (victim["amount"].as_f64().unwrap() + 1.0).into();
    let text: Vec<String> = lines.iter().map(|v| v.to_string()).collect();
    fs::write(&tampered, text.join("\n") + "\n").unwrap();
    let status = audit(&tampered);
    assert_eq!(status.code(), Some(1));

    let status = bin()
        .args(["run", "--algorithm", "solstice", "--demand"])
        .arg(&demand)
        .status()
        .unwrap();
    assert!(!status.success());
}

#[test]
fn sweep_subcommand_reads_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.toml");
    fs::write(
        &cfg_path,
        "algorithms = [\"bff\"]\nn = 16\nruns = 4\n[grid]\nflows = [[4, 8]]\n",
    )
    .unwrap();
    let out_dir = dir.path().join("results");
    let status = bin()
        .args(["sweep", "--runs", "2", "--config"])
        .arg(&cfg_path)
        .arg("--out-dir")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    let rows = read_results(&out_dir.join("results.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.algorithm == Algorithm::Bff));
}
