//! Transmission-time accounting, schedule audits and run statistics.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::bff::{bff_schedule, BffOutcome, EventSchedule};
use crate::eclipse::{eclipse_schedule, EclipseOutcome, Schedule, SearchStrategy, SystemParams};
use crate::error::{Error, Result};
use crate::matrix::{max_load, DemandMatrix, Matrix};
use crate::twohop::{two_hop_schedule, BookingLedger, TwoHopOutcome};

/// Slack allowed by the audits for floating-point bookkeeping.
pub const AUDIT_TOLERANCE: f64 = 1e-9;

/// Time until circuit and packet switch together clear the demand: the
/// circuit runs for `t_c` while the packet switch drains the residual
/// concurrently at rate `r_p` per port.
pub fn transmission_time(t_c: f64, residual: &Matrix, r_p: f64) -> Result<f64> {
    if !(r_p > 0.0) {
        return Err(Error::Argument(format!("packet rate {r_p} must be > 0")));
    }
    Ok(t_c.max(max_load(residual) / r_p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Eclipse,
    #[serde(rename = "twohop")]
    TwoHop,
    Bff,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Eclipse, Algorithm::TwoHop, Algorithm::Bff];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Eclipse => "eclipse",
            Algorithm::TwoHop => "twohop",
            Algorithm::Bff => "bff",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eclipse" => Ok(Algorithm::Eclipse),
            "twohop" | "2hop" | "two-hop" => Ok(Algorithm::TwoHop),
            "bff" => Ok(Algorithm::Bff),
            other => Err(Error::Argument(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Output of any of the three schedulers.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Eclipse(EclipseOutcome),
    TwoHop(TwoHopOutcome),
    Bff(BffOutcome),
}

impl Outcome {
    pub fn transmission_time(&self) -> f64 {
        match self {
            Outcome::Eclipse(o) => o.transmission_time,
            Outcome::TwoHop(o) => o.transmission_time,
            Outcome::Bff(o) => o.transmission_time,
        }
    }

    /// Configurations for the Eclipse family, connections for BFF.
    pub fn configurations(&self) -> usize {
        match self {
            Outcome::Eclipse(o) => o.schedule.len(),
            Outcome::TwoHop(o) => o.schedule.len(),
            Outcome::Bff(o) => o.schedule.connections.len(),
        }
    }

    pub fn residual(&self) -> &DemandMatrix {
        match self {
            Outcome::Eclipse(o) => &o.residual,
            Outcome::TwoHop(o) => &o.residual,
            Outcome::Bff(o) => &o.residual,
        }
    }

    pub fn plan(&self) -> Plan<'_> {
        match self {
            Outcome::Eclipse(o) => Plan::Matchings {
                schedule: &o.schedule,
                ledger: None,
            },
            Outcome::TwoHop(o) => Plan::Matchings {
                schedule: &o.schedule,
                ledger: Some(&o.ledger),
            },
            Outcome::Bff(o) => Plan::Timeline(&o.schedule),
        }
    }
}

/// Runs `algorithm`, timing only the scheduler call.
pub fn run_algorithm(
    algorithm: Algorithm,
    demand: &DemandMatrix,
    params: &SystemParams,
    strategy: SearchStrategy,
) -> Result<(Outcome, Duration)> {
    let start = Instant::now();
    let outcome = match algorithm {
        Algorithm::Eclipse => Outcome::Eclipse(eclipse_schedule(demand, params, strategy)?),
        Algorithm::TwoHop => Outcome::TwoHop(two_hop_schedule(demand, params, strategy)?),
        Algorithm::Bff => Outcome::Bff(bff_schedule(demand, params)?),
    };
    Ok((outcome, start.elapsed()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub delta: f64,
    pub rp_ratio: f64,
    #[serde(rename = "T")]
    pub transmission_time: f64,
    #[serde(rename = "K")]
    pub configurations: usize,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub runs: usize,
    pub mean: f64,
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
    /// `1.57 * IQR / sqrt(runs)`: half-width of the boxplot notch.
    pub notch: f64,
}

/// Linear interpolation between order statistics of sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn summarize(values: &[f64]) -> Result<SummaryStats> {
    if values.is_empty() {
        return Err(Error::Argument("cannot summarize an empty list".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let runs = sorted.len();
    let (p25, median, p75) = (
        percentile(&sorted, 0.25),
        percentile(&sorted, 0.5),
        percentile(&sorted, 0.75),
    );
    Ok(SummaryStats {
        runs,
        mean: sorted.iter().sum::<f64>() / runs as f64,
        median,
        p25,
        p75,
        notch: 1.57 * (p75 - p25) / (runs as f64).sqrt(),
    })
}

/// A schedule to audit.
#[derive(Debug, Clone, Copy)]
pub enum Plan<'a> {
    /// (matching, duration) sequence; with a ledger for 2-hop runs.
    Matchings {
        schedule: &'a Schedule,
        ledger: Option<&'a BookingLedger>,
    },
    Timeline(&'a EventSchedule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    IllegalMatching,
    NonPositiveDuration,
    CircuitTimeMismatch,
    BookingOffMatching,
    EdgeOverbooked,
    ResidueOverdraft,
    NonPositiveBooking,
    NegativeResidual,
    ConservationMismatch,
    PacketBacklog,
    InputGap,
    OutputOverlap,
    NotSubPermutation,
    ConnectionAmount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Circuit time: `t_c` for matching schedules, the stop time for timelines.
    pub circuit_time: f64,
    pub transmission_time: f64,
    /// Residual implied by replaying the plan against the demand.
    #[serde(skip)]
    pub residual: Matrix,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

struct Audit {
    violations: Vec<Violation>,
}

impl Audit {
    fn flag(&mut self, kind: ViolationKind, message: String) {
        self.violations.push(Violation { kind, message });
    }
}

/// Audits `plan` for `demand`; violations are collected, never raised.
///
/// When `claimed_residual` is given (the residual a scheduler reported), it
/// must match the replayed residual entry by entry.
pub fn validate(
    demand: &DemandMatrix,
    params: &SystemParams,
    plan: Plan<'_>,
    claimed_residual: Option<&Matrix>,
) -> ValidationReport {
    let mut audit = Audit {
        violations: Vec::new(),
    };
    let (residual, circuit_time) = match plan {
        Plan::Matchings { schedule, ledger } => {
            let residual = match ledger {
                None => replay_direct(demand, schedule, &mut audit),
                Some(ledger) => replay_ledger(demand, schedule, ledger, &mut audit),
            };
            audit_matchings(demand.n(), schedule, params, &mut audit);
            (residual, schedule.t_c)
        }
        Plan::Timeline(timeline) => {
            let residual = audit_timeline(demand, timeline, params, &mut audit);
            (residual, timeline.stop_time)
        }
    };

    for (i, j, x) in (0..residual.n())
        .flat_map(|i| (0..residual.n()).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, residual.get(i, j)))
    {
        if x < -AUDIT_TOLERANCE {
            audit.flag(
                ViolationKind::NegativeResidual,
                format!("negative residual {x} at ({i},{j})"),
            );
        }
    }
    if let Some(claimed) = claimed_residual {
        let worst = claimed
            .as_slice()
            .iter()
            .zip(residual.as_slice())
            .enumerate()
            .map(|(k, (a, b))| (k, (a - b).abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        if claimed.n() != residual.n() {
            audit.flag(
                ViolationKind::ConservationMismatch,
                "reported residual has the wrong size".into(),
            );
        } else if let Some((k, diff)) = worst.filter(|w| w.1 > AUDIT_TOLERANCE) {
            let n = residual.n();
            audit.flag(
                ViolationKind::ConservationMismatch,
                format!(
                    "conservation broken at ({},{}): reported residual differs by {diff}",
                    k / n,
                    k % n
                ),
            );
        }
    }
    let backlog = max_load(&residual);
    if backlog > params.r_p * circuit_time + AUDIT_TOLERANCE {
        audit.flag(
            ViolationKind::PacketBacklog,
            format!(
                "residual load {backlog} exceeds r_p * circuit time = {}",
                params.r_p * circuit_time
            ),
        );
    }
    let transmission_time = circuit_time.max(backlog / params.r_p);
    ValidationReport {
        violations: audit.violations,
        circuit_time,
        transmission_time,
        residual,
    }
}

fn audit_matchings(n: usize, schedule: &Schedule, params: &SystemParams, audit: &mut Audit) {
    let mut t_c = 0.0;
    for (k, step) in schedule.steps.iter().enumerate() {
        if !step.pairs.is_legal() || step.pairs.iter().any(|(i, j)| i >= n || j >= n) {
            audit.flag(
                ViolationKind::IllegalMatching,
                format!("illegal matching at step {k}: {:?}", step.pairs.pairs()),
            );
        }
        if !(step.duration > 0.0) {
            audit.flag(
                ViolationKind::NonPositiveDuration,
                format!("non-positive duration {} at step {k}", step.duration),
            );
        }
        t_c += params.delta + step.duration;
    }
    if (t_c - schedule.t_c).abs() > AUDIT_TOLERANCE * t_c.max(1.0) {
        audit.flag(
            ViolationKind::CircuitTimeMismatch,
            format!(
                "t_c = {} but K * delta + sum of durations = {t_c}",
                schedule.t_c
            ),
        );
    }
}

/// Direct routing: each matched edge serves `min(duration, remaining)`.
fn replay_direct(demand: &DemandMatrix, schedule: &Schedule, audit: &mut Audit) -> Matrix {
    let n = demand.n();
    let mut residual = demand.clone();
    for (k, step) in schedule.steps.iter().enumerate() {
        for (i, j) in step.pairs.iter() {
            if i >= n || j >= n {
                audit.flag(
                    ViolationKind::IllegalMatching,
                    format!("illegal matching at step {k}: port out of range in ({i},{j})"),
                );
                continue;
            }
            let left = residual.get(i, j);
            residual.set(i, j, left - step.duration.min(left));
        }
    }
    residual
}

/// Replays a 2-hop ledger: every booking must ride an edge of its step's
/// matching, edges may not carry more than their duration, and every first
/// hop must fit in residue accrued by strictly earlier steps.
fn replay_ledger(
    demand: &DemandMatrix,
    schedule: &Schedule,
    ledger: &BookingLedger,
    audit: &mut Audit,
) -> Matrix {
    let n = demand.n();
    let steps = schedule.steps.len();
    let mut residual = demand.clone();
    let mut residue = Matrix::zeros(n);
    // Per step: load carried on each edge, and first-hop draws per (origin, relay).
    let mut carried: Vec<Vec<((usize, usize), f64)>> = vec![Vec::new(); steps];
    let mut draws: Vec<Vec<((usize, usize), f64)>> = vec![Vec::new(); steps];

    let in_range = |k: usize, ports: &[usize]| k < steps && ports.iter().all(|&p| p < n);
    for b in &ledger.direct {
        if !in_range(b.step, &[b.input, b.output]) || !schedule.steps[b.step].pairs.contains(b.input, b.output) {
            audit.flag(
                ViolationKind::BookingOffMatching,
                format!("direct booking ({},{}) at step {} is not on that step's matching", b.input, b.output, b.step),
            );
            continue;
        }
        if !(b.amount > 0.0) {
            audit.flag(
                ViolationKind::NonPositiveBooking,
                format!("non-positive booking {} at step {}", b.amount, b.step),
            );
        }
        residual.add(b.input, b.output, -b.amount);
        carried[b.step].push(((b.input, b.output), b.amount));
    }
    for b in &ledger.indirect {
        if !in_range(b.step, &[b.origin, b.relay, b.dest])
            || !schedule.steps[b.step].pairs.contains(b.relay, b.dest)
            || b.origin == b.relay
            || b.relay == b.dest
            || b.origin == b.dest
        {
            audit.flag(
                ViolationKind::BookingOffMatching,
                format!(
                    "indirect booking {}->{}->{} at step {} is not a two-hop path ending on that step's matching",
                    b.origin, b.relay, b.dest, b.step
                ),
            );
            continue;
        }
        if !(b.amount > 0.0) {
            audit.flag(
                ViolationKind::NonPositiveBooking,
                format!("non-positive booking {} at step {}", b.amount, b.step),
            );
        }
        residual.add(b.origin, b.dest, -b.amount);
        carried[b.step].push(((b.relay, b.dest), b.amount));
        draws[b.step].push(((b.origin, b.relay), b.amount));
    }

    for (k, step) in schedule.steps.iter().enumerate() {
        let mut drawn = Matrix::zeros(n);
        for &((l, i), amount) in &draws[k] {
            drawn.add(l, i, amount);
        }
        for (l, i, want) in drawn.positive_entries() {
            let have = residue.get(l, i);
            if want > have + AUDIT_TOLERANCE {
                audit.flag(
                    ViolationKind::ResidueOverdraft,
                    format!("residue overdraft at ({l},{i}) in step {k}: needs {want}, has {have}"),
                );
            }
            residue.add(l, i, -want);
        }
        let mut load = Matrix::zeros(n);
        for &((i, j), amount) in &carried[k] {
            load.add(i, j, amount);
        }
        for (i, j) in step.pairs.iter().filter(|&(i, j)| i < n && j < n) {
            let spare = step.duration - load.get(i, j);
            if spare < -AUDIT_TOLERANCE {
                audit.flag(
                    ViolationKind::EdgeOverbooked,
                    format!("edge ({i},{j}) at step {k} carries {} > duration {}", load.get(i, j), step.duration),
                );
            }
            residue.add(i, j, spare.max(0.0));
        }
    }
    residual
}

fn audit_timeline(
    demand: &DemandMatrix,
    timeline: &EventSchedule,
    params: &SystemParams,
    audit: &mut Audit,
) -> Matrix {
    let n = demand.n();
    let mut residual = demand.clone();
    let mut by_input: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n];
    let mut by_output: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n];
    for c in &timeline.connections {
        if c.i >= n || c.j >= n {
            audit.flag(
                ViolationKind::NotSubPermutation,
                format!("connection ({},{}) references a port out of range", c.i, c.j),
            );
            continue;
        }
        if !(c.end >= c.start) || (c.amount - (c.end - c.start)).abs() > AUDIT_TOLERANCE * c.end.max(1.0) {
            audit.flag(
                ViolationKind::ConnectionAmount,
                format!(
                    "connection ({},{}) over [{}, {}] claims amount {}",
                    c.i, c.j, c.start, c.end, c.amount
                ),
            );
        }
        if c.end > timeline.stop_time + AUDIT_TOLERANCE {
            audit.flag(
                ViolationKind::ConnectionAmount,
                format!("connection ({},{}) ends at {} after stop time {}", c.i, c.j, c.end, timeline.stop_time),
            );
        }
        residual.add(c.i, c.j, -c.amount);
        by_input[c.i].push((c.start, c.end));
        by_output[c.j].push((c.start, c.end));
    }

    for (i, spans) in by_input.iter_mut().enumerate() {
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in spans.windows(2) {
            let gap = w[1].0 - w[0].1;
            if gap < params.delta - AUDIT_TOLERANCE {
                audit.flag(
                    ViolationKind::InputGap,
                    format!("input {i}: gap {gap} before connection at {} is below delta", w[1].0),
                );
            }
        }
    }
    for (j, spans) in by_output.iter_mut().enumerate() {
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in spans.windows(2) {
            if w[1].0 < w[0].1 - AUDIT_TOLERANCE {
                audit.flag(
                    ViolationKind::OutputOverlap,
                    format!("output {j}: connections overlap at {}", w[1].0),
                );
            }
        }
    }

    // Sweep: at every instant the connected pairs form a sub-permutation.
    let mut edges: Vec<(f64, bool, usize, usize)> = Vec::new();
    for c in timeline.connections.iter().filter(|c| c.i < n && c.j < n && c.end > c.start) {
        edges.push((c.start, true, c.i, c.j));
        edges.push((c.end - AUDIT_TOLERANCE, false, c.i, c.j));
    }
    // Closings sort before openings at equal instants.
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut input_load = vec![0usize; n];
    let mut output_load = vec![0usize; n];
    let mut flagged = false;
    for (t, opening, i, j) in edges {
        if opening {
            input_load[i] += 1;
            output_load[j] += 1;
            if !flagged && (input_load[i] > 1 || output_load[j] > 1) {
                audit.flag(
                    ViolationKind::NotSubPermutation,
                    format!("at t = {t} port {i} or output {j} holds two connections"),
                );
                flagged = true;
            }
        } else {
            input_load[i] -= 1;
            output_load[j] -= 1;
        }
    }
    residual
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::Matching;

    #[test]
    fn transmission_time_examples() {
        let zero = Matrix::zeros(3);
        assert_eq!(transmission_time(38.0, &zero, 0.1).unwrap(), 38.0);
        let mut r = Matrix::zeros(3);
        r.set(0, 1, 4.0);
        assert!((transmission_time(38.0, &r, 0.1).unwrap() - 40.0).abs() < 1e-12);
        r.set(0, 1, 0.5);
        assert_eq!(transmission_time(10.0, &r, 0.05).unwrap(), 10.0);
        assert!(matches!(transmission_time(1.0, &r, 0.0), Err(Error::Argument(_))));
    }

    #[test]
    fn summarize_examples() {
        let s = summarize(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.median), (2.0, 2.0));
        let s = summarize(&[5.0]).unwrap();
        assert_eq!((s.mean, s.median, s.p25, s.p75, s.notch), (5.0, 5.0, 5.0, 5.0, 0.0));
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.p25, s.p75), (1.75, 3.25));
        assert!((s.notch - 1.57 * 1.5 / 2.0).abs() < 1e-15);
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn algorithm_names() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!("eclipse++".parse::<Algorithm>().is_err());
    }

    #[test]
    fn flags_shared_column() {
        let d = Matrix::from_fn(2, |_, _| 1.0);
        let mut s = Schedule::default();
        s.push(Matching::from_pairs_unchecked(vec![(0, 1), (1, 1)]), 1.0, 0.1);
        let p = SystemParams::new(0.1, 0.5).unwrap();
        let report = validate(&d, &p, Plan::Matchings { schedule: &s, ledger: None }, None);
        assert!(report.has(ViolationKind::IllegalMatching));
        assert!(report.violations[0].message.starts_with("illegal matching at step 0"));
    }

    #[test]
    fn flags_input_gap_and_output_overlap() {
        use crate::bff::Connection;
        let d = Matrix::from_fn(2, |_, _| 5.0);
        let p = SystemParams::new(1.0, 0.1).unwrap();
        let c = |i, j, start: f64, end: f64| Connection { i, j, start, end, amount: end - start };
        let tl = EventSchedule {
            connections: vec![c(0, 0, 0.0, 2.0), c(0, 1, 2.5, 4.0), c(1, 1, 3.0, 5.0)],
            stop_time: 100.0,
        };
        let report = validate(&d, &p, Plan::Timeline(&tl), None);
        assert!(report.has(ViolationKind::InputGap));
        assert!(report.has(ViolationKind::OutputOverlap));
        assert!(report.has(ViolationKind::NotSubPermutation));
    }

    #[test]
    fn inflated_ledger_entry_is_an_overdraft() {
        use crate::twohop::{DirectBooking, IndirectBooking};
        let d = Matrix::from_rows(&[[0.0, 1.0, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]).unwrap();
        let p = SystemParams::new(0.1, 0.5).unwrap();
        let mut s = Schedule::default();
        s.push(Matching::new(vec![(0, 1)]).unwrap(), 2.0, 0.1);
        s.push(Matching::new(vec![(1, 2)]).unwrap(), 2.0, 0.1);
        let mut ledger = BookingLedger {
            direct: vec![DirectBooking { step: 0, input: 0, output: 1, amount: 1.0 }],
            indirect: vec![IndirectBooking { step: 1, origin: 0, relay: 1, dest: 2, amount: 1.0 }],
        };
        let plan = Plan::Matchings { schedule: &s, ledger: Some(&ledger) };
        assert!(validate(&d, &p, plan, Some(&Matrix::zeros(3))).is_clean());

        ledger.indirect[0].amount += 1.0;
        let plan = Plan::Matchings { schedule: &s, ledger: Some(&ledger) };
        let report = validate(&d, &p, plan, None);
        assert!(report.has(ViolationKind::ResidueOverdraft));
        assert!(report.violations.iter().any(|v| v.message.starts_with("residue overdraft at (0,1)")));
    }
}
