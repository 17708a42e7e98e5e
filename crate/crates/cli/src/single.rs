use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use hybrid_sched::{
    run_algorithm, validate, Algorithm, BookingLedger, DemandMatrix, EventSchedule, Outcome, Plan,
    Schedule, SearchStrategy, SystemParams, ValidationReport,
};

pub fn read_demand(path: &Path) -> Result<DemandMatrix> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let demand = DemandMatrix::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    demand.check_demand()?;
    Ok(demand)
}

#[derive(Debug)]
pub struct SingleRun {
    pub outcome: Outcome,
    pub wall_time: Duration,
    pub schedule_path: PathBuf,
    pub ledger_path: Option<PathBuf>,
}

/// Schedules one demand file and writes `<alg>_schedule.json` (plus
/// `twohop_ledger.jsonl` for 2-hop) into `out_dir`.
pub fn run_single(
    algorithm: Algorithm,
    demand_path: &Path,
    params: &SystemParams,
    search: SearchStrategy,
    out_dir: &Path,
) -> Result<SingleRun> {
    let demand = read_demand(demand_path)?;
    let (outcome, wall_time) = run_algorithm(algorithm, &demand, params, search)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let schedule_path = out_dir.join(format!("{algorithm}_schedule.json"));
    let mut ledger_path = None;
    let json = match &outcome {
        Outcome::Eclipse(o) => o.schedule.to_json(),
        Outcome::TwoHop(o) => {
            let path = out_dir.join("twohop_ledger.jsonl");
            fs::write(&path, o.ledger.to_json_lines())
                .with_context(|| format!("writing {}", path.display()))?;
            ledger_path = Some(path);
            o.schedule.to_json()
        }
        Outcome::Bff(o) => o.schedule.to_json(),
    };
    fs::write(&schedule_path, json + "\n")
        .with_context(|| format!("writing {}", schedule_path.display()))?;
    Ok(SingleRun {
        outcome,
        wall_time,
        schedule_path,
        ledger_path,
    })
}

/// Audits a schedule file against its demand. BFF timelines are recognized
/// by their `connections` key.
pub fn validate_files(
    demand_path: &Path,
    schedule_path: &Path,
    ledger_path: Option<&Path>,
    params: &SystemParams,
) -> Result<ValidationReport> {
    let demand = read_demand(demand_path)?;
    let text = fs::read_to_string(schedule_path)
        .with_context(|| format!("reading {}", schedule_path.display()))?;
    let probe: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", schedule_path.display()))?;
    if probe.get("connections").is_some() {
        if ledger_path.is_some() {
            bail!("a ledger only applies to matching schedules");
        }
        let timeline = EventSchedule::from_json(&text)?;
        return Ok(validate(&demand, params, Plan::Timeline(&timeline), None));
    }
    let schedule = Schedule::from_json(&text)?;
    let ledger = match ledger_path {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(BookingLedger::from_json_lines(&text).with_context(|| format!("parsing {}", path.display()))?)
        }
        None => None,
    };
    let plan = Plan::Matchings {
        schedule: &schedule,
        ledger: ledger.as_ref(),
    };
    Ok(validate(&demand, params, plan, None))
}
