//! 2-hop Eclipse.
//!
//! Same greedy loop as Eclipse, but each step maximizes utility over
//! `D_rem + I_rem`, where `I_rem(i, j)` counts traffic from other origins `l`
//! that could reach `i` over spare capacity `R(l, i)` left on earlier
//! matchings and then ride a new `i -> j` circuit. Bookings are recorded in a
//! ledger so every indirect route can be audited against the residue it used.

use serde::{Deserialize, Serialize};

use crate::eclipse::{best_configuration, Schedule, SearchStrategy, SystemParams};
use crate::error::{Error, Result};
use crate::eval::transmission_time;
use crate::matching::Matching;
use crate::matrix::{max_load, DemandMatrix, Matrix};

/// Amounts below this are neither booked nor applied.
pub const MIN_BOOKING: f64 = 1e-12;
/// Largest negative excursion tolerated (and snapped to zero) after an update.
pub const NEGATIVE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ResidueState {
    /// `R(l, i)`: unused capacity accumulated on earlier `l -> i` circuits.
    pub residue: Matrix,
    /// Direct demand not yet booked.
    pub remaining: DemandMatrix,
}

impl ResidueState {
    pub fn new(demand: &DemandMatrix) -> Self {
        ResidueState {
            residue: Matrix::zeros(demand.n()),
            remaining: demand.clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.remaining.n()
    }
}

/// `I_rem` with its per-origin breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct IndirectDemand {
    pub totals: Matrix,
    /// Indexed `i * n + j`: `(origin l, I_rem^(l)(i, j))` for every positive term, by ascending `l`.
    per_origin: Vec<Vec<(usize, f64)>>,
}

impl IndirectDemand {
    pub fn origins(&self, i: usize, j: usize) -> &[(usize, f64)] {
        &self.per_origin[i * self.totals.n() + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectBooking {
    pub step: usize,
    pub input: usize,
    pub output: usize,
    pub amount: f64,
}

/// Traffic `origin -> relay` on earlier spare capacity, then `relay -> dest` at `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndirectBooking {
    pub step: usize,
    pub origin: usize,
    pub relay: usize,
    pub dest: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BookingKind {
    Direct,
    Indirect,
}

/// One line of the JSON-lines ledger format.
#[derive(Debug, Serialize, Deserialize)]
struct LedgerRecord {
    step: usize,
    kind: BookingKind,
    origin: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    relay: Option<usize>,
    dest: usize,
    amount: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BookingLedger {
    pub direct: Vec<DirectBooking>,
    pub indirect: Vec<IndirectBooking>,
}

impl BookingLedger {
    pub fn extend(&mut self, other: BookingLedger) {
        self.direct.extend(other.direct);
        self.indirect.extend(other.indirect);
    }

    pub fn is_empty(&self) -> bool {
        self.direct.is_empty() && self.indirect.is_empty()
    }

    /// One JSON object per line, ordered by step; direct bookings first within a step.
    pub fn to_json_lines(&self) -> String {
        let mut records: Vec<(usize, u8, LedgerRecord)> = self
            .direct
            .iter()
            .map(|b| {
                let rec = LedgerRecord {
                    step: b.step,
                    kind: BookingKind::Direct,
                    origin: b.input,
                    relay: None,
                    dest: b.output,
                    amount: b.amount,
                };
                (b.step, 0, rec)
            })
            .chain(self.indirect.iter().map(|b| {
                let rec = LedgerRecord {
                    step: b.step,
                    kind: BookingKind::Indirect,
                    origin: b.origin,
                    relay: Some(b.relay),
                    dest: b.dest,
                    amount: b.amount,
                };
                (b.step, 1, rec)
            }))
            .collect();
        records.sort_by_key(|(step, kind, _)| (*step, *kind));
        let mut out = String::new();
        for (_, _, rec) in records {
            out.push_str(&serde_json::to_string(&rec).expect("ledger record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_json_lines(text: &str) -> Result<Self> {
        let mut ledger = BookingLedger::default();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: LedgerRecord = serde_json::from_str(line)?;
            match (rec.kind, rec.relay) {
                (BookingKind::Direct, None) => ledger.direct.push(DirectBooking {
                    step: rec.step,
                    input: rec.origin,
                    output: rec.dest,
                    amount: rec.amount,
                }),
                (BookingKind::Indirect, Some(relay)) => ledger.indirect.push(IndirectBooking {
                    step: rec.step,
                    origin: rec.origin,
                    relay,
                    dest: rec.dest,
                    amount: rec.amount,
                }),
                (kind, relay) => {
                    return Err(Error::Parse(format!(
                        "ledger line {}: kind {kind:?} inconsistent with relay {relay:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(ledger)
    }
}

/// Builds `I_rem` from the remaining demand and the residue capacities:
/// `I_rem^(l)(i, j) = min(D_rem(l, j), R(l, i))` for `l` outside `{i, j}`,
/// summed over origins. Only rows of `R` with positive entries are visited.
pub fn build_irem(state: &ResidueState) -> IndirectDemand {
    let n = state.n();
    let mut totals = Matrix::zeros(n);
    let mut per_origin: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n * n];
    for l in 0..n {
        let demand_row = state.remaining.row(l);
        for (i, &capacity) in state.residue.row(l).iter().enumerate() {
            if capacity <= 0.0 || i == l {
                continue;
            }
            for (j, &want) in demand_row.iter().enumerate() {
                if want <= 0.0 || j == i || j == l {
                    continue;
                }
                let amount = want.min(capacity);
                totals.add(i, j, amount);
                per_origin[i * n + j].push((l, amount));
            }
        }
    }
    IndirectDemand { totals, per_origin }
}

/// Subtracts `amount` from `m(i, j)`, snapping tiny results to zero and
/// rejecting real overdrafts.
fn draw_down(m: &mut Matrix, i: usize, j: usize, amount: f64, what: &str) -> Result<()> {
    let left = m.get(i, j) - amount;
    if left < -NEGATIVE_TOLERANCE {
        return Err(Error::Consistency(format!(
            "{what}({i}, {j}) would become {left}"
        )));
    }
    m.set(i, j, if left < MIN_BOOKING { 0.0 } else { left });
    Ok(())
}

/// Books traffic on every edge of `(matching, alpha)` and updates `D_rem` and `R`.
///
/// Local demand on an edge is served first. Spare seats go to indirect
/// traffic: entirely when they suffice, otherwise proportionally across
/// origins. Leftover capacity after all bookings is added to `R(i, j)`.
pub fn apply_configuration(
    state: &mut ResidueState,
    irem: &IndirectDemand,
    matching: &Matching,
    alpha: f64,
    step: usize,
) -> Result<BookingLedger> {
    let n = state.n();
    let mut ledger = BookingLedger::default();
    let mut written = if cfg!(debug_assertions) {
        vec![false; n * n]
    } else {
        Vec::new()
    };
    let mut mark = |i: usize, j: usize| {
        if let Some(w) = written.get_mut(i * n + j) {
            debug_assert!(!*w, "D_rem({i}, {j}) written twice in one configuration");
            *w = true;
        }
    };

    for (i, j) in matching.iter() {
        let local = state.remaining.get(i, j);
        let nonlocal = irem.totals.get(i, j);
        if local + nonlocal <= 0.0 {
            continue;
        }
        mark(i, j);
        if alpha <= local {
            let amount = if local - alpha < MIN_BOOKING { local } else { alpha };
            state.remaining.set(i, j, local - amount);
            ledger.direct.push(DirectBooking {
                step,
                input: i,
                output: j,
                amount,
            });
            continue;
        }

        if local > 0.0 {
            state.remaining.set(i, j, 0.0);
            ledger.direct.push(DirectBooking {
                step,
                input: i,
                output: j,
                amount: local,
            });
        }
        let share = if alpha >= local + nonlocal {
            1.0
        } else {
            (alpha - local) / nonlocal
        };
        for &(l, offered) in irem.origins(i, j) {
            let mut amount = share * offered;
            if amount < MIN_BOOKING {
                continue;
            }
            let pending = state.remaining.get(l, j);
            if pending - amount < MIN_BOOKING && pending - amount > -NEGATIVE_TOLERANCE {
                amount = pending;
            }
            mark(l, j);
            draw_down(&mut state.remaining, l, j, amount, "D_rem")?;
            draw_down(&mut state.residue, l, i, amount, "R")?;
            ledger.indirect.push(IndirectBooking {
                step,
                origin: l,
                relay: i,
                dest: j,
                amount,
            });
        }
        if alpha >= local + nonlocal {
            state.residue.add(i, j, alpha - (local + nonlocal));
        }
    }
    Ok(ledger)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoHopOutcome {
    pub schedule: Schedule,
    pub ledger: BookingLedger,
    pub residual: DemandMatrix,
    pub transmission_time: f64,
}

/// Runs 2-hop Eclipse on `demand`.
pub fn two_hop_schedule(
    demand: &DemandMatrix,
    params: &SystemParams,
    strategy: SearchStrategy,
) -> Result<TwoHopOutcome> {
    demand.check_demand()?;
    params.validate()?;
    strategy.validate()?;
    let mut state = ResidueState::new(demand);
    let mut schedule = Schedule::default();
    let mut ledger = BookingLedger::default();
    while max_load(&state.remaining) > params.r_p * schedule.t_c {
        let irem = build_irem(&state);
        let effective = state.remaining.sum(&irem.totals);
        let cfg = best_configuration(&effective, params, strategy)?;
        let step = schedule.len();
        ledger.extend(apply_configuration(
            &mut state,
            &irem,
            &cfg.matching,
            cfg.alpha,
            step,
        )?);
        schedule.push(cfg.matching, cfg.alpha, params.delta);
    }
    let transmission_time = transmission_time(schedule.t_c, &state.remaining, params.r_p)?;
    Ok(TwoHopOutcome {
        schedule,
        ledger,
        residual: state.remaining,
        transmission_time,
    })
}
