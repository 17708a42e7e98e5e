//! Best First Fit (BFF) for a partially reconfigurable circuit switch.
//!
//! Inputs are jobs and outputs are machines of an open shop; VOQ `(i, j)` is
//! a task of length `D(i, j)`. The schedule starts from a maximum-weight
//! matching of `D`, then runs non-preemptive LPT list scheduling: when input
//! `i` finishes VOQ `(i, j)` at `tau`, output `j` immediately takes the
//! available input with the most traffic for it, while input `i` spends
//! `[tau, tau + delta]` reconfiguring before picking the available output it
//! has the most traffic for. Only inputs pay the reconfiguration delay.
//!
//! Scheduling stops at the first event time `t` where the packet switch
//! could carry everything left by `t`, i.e. every row and column sum of the
//! residual is at most `r_p * t`.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::eclipse::SystemParams;
use crate::error::Result;
use crate::eval::transmission_time;
use crate::matching::max_weight_matching;
use crate::matrix::{max_load, DemandMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BffOptions {
    /// Pay one reconfiguration delay before the initial matching starts.
    pub charge_initial_delay: bool,
}

impl Default for BffOptions {
    fn default() -> Self {
        BffOptions {
            charge_initial_delay: true,
        }
    }
}

/// A circuit held from `start` to `end`, carrying `amount` (= `end - start` at rate 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub i: usize,
    pub j: usize,
    pub start: f64,
    pub end: f64,
    pub amount: f64,
}

/// Per-port connection timeline: the sub-permutation process `S(t)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventSchedule {
    pub connections: Vec<Connection>,
    pub stop_time: f64,
}

impl EventSchedule {
    /// Pairs connected at instant `t` (half-open intervals `[start, end)`).
    pub fn active_at(&self, t: f64) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = self
            .connections
            .iter()
            .filter(|c| c.start <= t && t < c.end)
            .map(|c| (c.i, c.j))
            .collect();
        pairs.sort_unstable();
        pairs
    }

    pub fn served(&self) -> f64 {
        self.connections.iter().map(|c| c.amount).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("event schedule serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    /// Input finishes draining its VOQ.
    Completion,
    /// Input finishes reconfiguring and looks for an output.
    InputReady,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    kind: EventKind,
    input: usize,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.cmp(&other.kind))
            .then(self.input.cmp(&other.input))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy)]
struct Active {
    output: usize,
    start: f64,
    amount: f64,
}

/// Simulation state: available port sets `I_a`/`O_a`, unassigned demand,
/// the in-flight connections and the event queue.
#[derive(Debug, Clone)]
pub struct BffState {
    /// Demand not yet assigned to any connection.
    unassigned: DemandMatrix,
    available_inputs: Vec<bool>,
    available_outputs: Vec<bool>,
    active: Vec<Option<Active>>,
    output_busy: Vec<bool>,
    events: BinaryHeap<Reverse<Event>>,
    connections: Vec<Connection>,
    delta: f64,
}

impl BffState {
    /// All ports idle and unavailable; nothing scheduled.
    pub fn new(demand: &DemandMatrix, delta: f64) -> Self {
        let n = demand.n();
        BffState {
            unassigned: demand.clone(),
            available_inputs: vec![false; n],
            available_outputs: vec![false; n],
            active: vec![None; n],
            output_busy: vec![false; n],
            events: BinaryHeap::new(),
            connections: Vec::new(),
            delta,
        }
    }

    pub fn remaining(&self) -> &DemandMatrix {
        &self.unassigned
    }

    pub fn mark_input_available(&mut self, i: usize) {
        self.available_inputs[i] = true;
    }

    pub fn mark_output_available(&mut self, j: usize) {
        self.available_outputs[j] = true;
    }

    pub fn input_available(&self, i: usize) -> bool {
        self.available_inputs[i]
    }

    pub fn output_available(&self, j: usize) -> bool {
        self.available_outputs[j]
    }

    /// Output of the connection input `i` is currently draining, if any.
    pub fn active_output(&self, i: usize) -> Option<usize> {
        self.active[i].map(|a| a.output)
    }

    fn connect(&mut self, i: usize, j: usize, t: f64) -> Connection {
        let amount = self.unassigned.get(i, j);
        self.unassigned.set(i, j, 0.0);
        self.available_inputs[i] = false;
        self.available_outputs[j] = false;
        self.output_busy[j] = true;
        self.active[i] = Some(Active {
            output: j,
            start: t,
            amount,
        });
        self.events.push(Reverse(Event {
            time: t + amount,
            kind: EventKind::Completion,
            input: i,
        }));
        Connection {
            i,
            j,
            start: t,
            end: t + amount,
            amount,
        }
    }

    /// Output `j` is idle at `t`: connect it to the available input with the
    /// most traffic for it (lowest index on ties), else make it available.
    pub fn output_seek_pairing(&mut self, j: usize, t: f64) -> Option<Connection> {
        let mut best: Option<(usize, f64)> = None;
        for (l, _) in self.available_inputs.iter().enumerate().filter(|(_, &a)| a) {
            let x = self.unassigned.get(l, j);
            if x > 0.0 && best.is_none_or(|(_, b)| x > b) {
                best = Some((l, x));
            }
        }
        match best {
            Some((l, _)) => Some(self.connect(l, j, t)),
            None => {
                self.available_outputs[j] = true;
                None
            }
        }
    }

    /// Input `i` has finished reconfiguring at `t`: connect it to the available
    /// output it has the most traffic for (lowest index on ties), else make it available.
    pub fn input_seek_pairing(&mut self, i: usize, t: f64) -> Option<Connection> {
        let mut best: Option<(usize, f64)> = None;
        for (v, _) in self.available_outputs.iter().enumerate().filter(|(_, &a)| a) {
            let x = self.unassigned.get(i, v);
            if x > 0.0 && best.is_none_or(|(_, b)| x > b) {
                best = Some((v, x));
            }
        }
        match best {
            Some((v, _)) => Some(self.connect(i, v, t)),
            None => {
                self.available_inputs[i] = true;
                None
            }
        }
    }

    /// Closes input `i`'s connection at its natural end; returns the freed output.
    fn complete(&mut self, i: usize) -> usize {
        let a = self.active[i].take().expect("completion for an idle input");
        self.output_busy[a.output] = false;
        self.connections.push(Connection {
            i,
            j: a.output,
            start: a.start,
            end: a.start + a.amount,
            amount: a.amount,
        });
        self.events.push(Reverse(Event {
            time: a.start + a.amount + self.delta,
            kind: EventKind::InputReady,
            input: i,
        }));
        a.output
    }

    /// Residual demand as of `t`, counting partial service of in-flight connections.
    fn residual_at(&self, t: f64) -> DemandMatrix {
        let mut residual = self.unassigned.clone();
        for (i, a) in self.active.iter().enumerate() {
            if let Some(a) = a {
                let served = (t - a.start).clamp(0.0, a.amount);
                residual.add(i, a.output, a.amount - served);
            }
        }
        residual
    }

    /// Cuts every in-flight connection at `t`.
    fn truncate_at(&mut self, t: f64) {
        for i in 0..self.active.len() {
            if let Some(a) = self.active[i].take() {
                let served = (t - a.start).clamp(0.0, a.amount);
                if served > 0.0 {
                    self.connections.push(Connection {
                        i,
                        j: a.output,
                        start: a.start,
                        end: t,
                        amount: served,
                    });
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BffOutcome {
    pub schedule: EventSchedule,
    pub residual: DemandMatrix,
    pub transmission_time: f64,
}

pub fn bff_schedule(demand: &DemandMatrix, params: &SystemParams) -> Result<BffOutcome> {
    bff_schedule_with(demand, params, BffOptions::default())
}

pub fn bff_schedule_with(
    demand: &DemandMatrix,
    params: &SystemParams,
    options: BffOptions,
) -> Result<BffOutcome> {
    demand.check_demand()?;
    params.validate()?;
    let n = demand.n();
    if max_load(demand) == 0.0 {
        return Ok(BffOutcome {
            schedule: EventSchedule::default(),
            residual: demand.clone(),
            transmission_time: 0.0,
        });
    }

    let mut state = BffState::new(demand, params.delta);
    let begin = if options.charge_initial_delay {
        params.delta
    } else {
        0.0
    };
    let initial = max_weight_matching(demand)?;
    let mut matched_input = vec![false; n];
    for (i, j) in initial.iter() {
        if demand.get(i, j) > 0.0 {
            state.connect(i, j, begin);
            matched_input[i] = true;
        }
    }
    for j in 0..n {
        if !state.output_busy[j] {
            state.mark_output_available(j);
        }
    }
    for (i, _) in matched_input.iter().enumerate().filter(|(_, &m)| !m) {
        state.events.push(Reverse(Event {
            time: begin,
            kind: EventKind::InputReady,
            input: i,
        }));
    }

    // Row/column sums of the unassigned demand plus full in-flight amounts;
    // a cheap upper bound used to skip exact stop checks.
    let mut committed_rows = demand.row_sums();
    let mut committed_cols = demand.col_sums();
    let mut last_time = 0.0;

    while let Some(Reverse(first)) = state.events.peek().copied() {
        let t = first.time;
        let mut completed = Vec::new();
        while let Some(Reverse(ev)) = state.events.peek().copied() {
            if ev.time != t || ev.kind != EventKind::Completion {
                break;
            }
            state.events.pop();
            let amount = state.active[ev.input].map(|a| a.amount).unwrap_or(0.0);
            let j = state.complete(ev.input);
            committed_rows[ev.input] -= amount;
            committed_cols[j] -= amount;
            completed.push(j);
        }
        last_time = t;

        let mut served_by_output = vec![0.0; n];
        let mut approx = 0.0f64;
        for (i, a) in state.active.iter().enumerate() {
            let served = a.map_or(0.0, |a| (t - a.start).clamp(0.0, a.amount));
            if let Some(a) = a {
                served_by_output[a.output] = served;
            }
            approx = approx.max(committed_rows[i] - served);
        }
        for (c, served) in committed_cols.iter().zip(&served_by_output) {
            approx = approx.max(c - served);
        }
        if approx <= params.r_p * t + 1e-9 {
            let residual = state.residual_at(t);
            if max_load(&residual) <= params.r_p * t {
                state.truncate_at(t);
                return Ok(BffOutcome {
                    schedule: EventSchedule {
                        connections: sorted(state.connections),
                        stop_time: t,
                    },
                    residual,
                    transmission_time: t,
                });
            }
        }

        completed.sort_unstable();
        for j in completed {
            state.output_seek_pairing(j, t);
        }
        let mut ready = Vec::new();
        while let Some(Reverse(ev)) = state.events.peek().copied() {
            if ev.time != t || ev.kind != EventKind::InputReady {
                break;
            }
            state.events.pop();
            ready.push(ev.input);
        }
        for i in ready {
            state.input_seek_pairing(i, t);
        }
    }

    let residual = state.unassigned.clone();
    let transmission_time = transmission_time(last_time, &residual, params.r_p)?;
    Ok(BffOutcome {
        schedule: EventSchedule {
            connections: sorted(state.connections),
            stop_time: last_time,
        },
        residual,
        transmission_time,
    })
}

fn sorted(mut connections: Vec<Connection>) -> Vec<Connection> {
    connections.sort_by(|a, b| {
        a.start
            .total_cmp(&b.start)
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });
    connections
}
