//! Eclipse: repeatedly extract the configuration `(M, alpha)` with the
//! largest cost-adjusted utility `sum_{(i,j) in M} min(alpha, D(i,j)) / (delta + alpha)`
//! until the packet switch can absorb what is left.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::transmission_time;
use crate::matching::{Matching, MwmSolver};
use crate::matrix::{max_load, DemandMatrix, Matrix};

/// Switch parameters. The circuit rate is normalized to 1, so `r_p` is the
/// packet-switch per-port rate as a fraction of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Reconfiguration delay.
    pub delta: f64,
    pub r_p: f64,
}

impl SystemParams {
    pub fn new(delta: f64, r_p: f64) -> Result<Self> {
        let p = SystemParams { delta, r_p };
        p.validate()?;
        Ok(p)
    }

    /// Parameters from the circuit-to-packet rate ratio `r_c / r_p`.
    pub fn from_ratio(delta: f64, rate_ratio: f64) -> Result<Self> {
        Self::new(delta, 1.0 / rate_ratio)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Argument(format!(
                "reconfiguration delay {} must be finite and >= 0",
                self.delta
            )));
        }
        if !(self.r_p > 0.0 && self.r_p.is_finite()) {
            return Err(Error::Argument(format!(
                "packet rate {} must be finite and > 0",
                self.r_p
            )));
        }
        Ok(())
    }

    pub fn rate_ratio(&self) -> f64 {
        1.0 / self.r_p
    }
}

/// How the duration `alpha` is searched among the distinct positive entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SearchStrategy {
    /// Every candidate; the reference mode.
    FullScan,
    /// Discrete peak search over the sorted candidates, two MWMs per probe.
    BitonicBinary,
    /// Every `m`-th order statistic `v_(m), v_(2m), ...` of the sorted candidates.
    Sampled { m: usize },
}

impl SearchStrategy {
    pub fn validate(&self) -> Result<()> {
        match self {
            SearchStrategy::Sampled { m: 0 } => Err(Error::Argument(
                "sampling decimation factor must be >= 1".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleStep {
    pub duration: f64,
    pub pairs: Matching,
}

/// Sequence of (matching, duration) configurations with accumulated circuit time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub steps: Vec<ScheduleStep>,
    /// Total circuit time, `K * delta + sum of durations`.
    pub t_c: f64,
}

impl Schedule {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn push(&mut self, pairs: Matching, duration: f64, delta: f64) {
        self.steps.push(ScheduleStep { duration, pairs });
        self.t_c += delta + duration;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("schedule serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Served traffic `sum_{(i,j) in M} min(alpha, D_eff(i,j))`.
pub fn utility(matching: &Matching, alpha: f64, d_eff: &Matrix) -> f64 {
    matching.iter().map(|(i, j)| alpha.min(d_eff.get(i, j))).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    /// Pairs that carry traffic (zero-weight edges of the MWM are dropped).
    pub matching: Matching,
    pub alpha: f64,
    /// Cost-adjusted utility `U / (delta + alpha)`.
    pub ratio: f64,
}

/// Sorted distinct positive entries.
fn candidate_durations(d_eff: &Matrix) -> Vec<f64> {
    let mut values: Vec<f64> = d_eff
        .as_slice()
        .iter()
        .copied()
        .filter(|&x| x > 0.0)
        .collect();
    values.sort_unstable_by(f64::total_cmp);
    values.dedup();
    values
}

struct Evaluator<'a> {
    d_eff: &'a Matrix,
    delta: f64,
    solver: MwmSolver,
    weights: Vec<f64>,
}

impl Evaluator<'_> {
    fn ratio_at(&mut self, alpha: f64) -> (f64, Vec<usize>) {
        for (w, &d) in self.weights.iter_mut().zip(self.d_eff.as_slice()) {
            *w = alpha.min(d);
        }
        let assignment = self.solver.solve(&self.weights).to_vec();
        let n = self.d_eff.n();
        let served: f64 = assignment
            .iter()
            .enumerate()
            .map(|(i, &j)| self.weights[i * n + j])
            .sum();
        (served / (self.delta + alpha), assignment)
    }
}

/// Indices of the candidates examined by a non-adaptive strategy.
fn sampled_indices(len: usize, m: usize) -> Vec<usize> {
    let picked: Vec<usize> = (1..=len / m).map(|k| k * m - 1).collect();
    if picked.is_empty() {
        vec![len - 1]
    } else {
        picked
    }
}

/// Finds the configuration with the largest cost-adjusted utility for `d_eff`.
///
/// Candidate durations are the distinct positive entries of `d_eff`. Among
/// the candidates examined, the best ratio wins; ties go to the smaller
/// duration.
pub fn best_configuration(
    d_eff: &Matrix,
    params: &SystemParams,
    strategy: SearchStrategy,
) -> Result<Configuration> {
    params.validate()?;
    strategy.validate()?;
    let values = candidate_durations(d_eff);
    if values.is_empty() {
        return Err(Error::NoConfiguration);
    }
    let n = d_eff.n();
    let mut eval = Evaluator {
        d_eff,
        delta: params.delta,
        solver: MwmSolver::new(n),
        weights: vec![0.0; n * n],
    };

    // (candidate index, ratio, assignment), collected in evaluation order.
    let mut examined: Vec<(usize, f64, Vec<usize>)> = Vec::new();
    match strategy {
        SearchStrategy::FullScan => {
            for (k, &alpha) in values.iter().enumerate() {
                let (ratio, a) = eval.ratio_at(alpha);
                examined.push((k, ratio, a));
            }
        }
        SearchStrategy::Sampled { m } => {
            for k in sampled_indices(values.len(), m) {
                let (ratio, a) = eval.ratio_at(values[k]);
                examined.push((k, ratio, a));
            }
        }
        SearchStrategy::BitonicBinary => {
            let mut cache: Vec<Option<f64>> = vec![None; values.len()];
            let mut probe = |k: usize, examined: &mut Vec<(usize, f64, Vec<usize>)>| -> f64 {
                if let Some(r) = cache[k] {
                    return r;
                }
                let (ratio, a) = eval.ratio_at(values[k]);
                cache[k] = Some(ratio);
                examined.push((k, ratio, a));
                ratio
            };
            let (mut lo, mut hi) = (0, values.len() - 1);
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if probe(mid, &mut examined) < probe(mid + 1, &mut examined) {
                    lo = mid + 1;
                } else {
                    hi = mid;
                }
            }
            probe(lo, &mut examined);
        }
    }

    let (k, ratio, assignment) = examined
        .into_iter()
        .max_by(|a, b| match a.1.total_cmp(&b.1) {
            Ordering::Equal => b.0.cmp(&a.0),
            other => other,
        })
        .expect("at least one candidate is examined");
    let mut matching = Matching::from_assignment(&assignment);
    matching.retain(|i, j| d_eff.get(i, j) > 0.0);
    Ok(Configuration {
        matching,
        alpha: values[k],
        ratio,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EclipseOutcome {
    pub schedule: Schedule,
    /// Demand left for the packet switch.
    pub residual: DemandMatrix,
    pub transmission_time: f64,
}

/// Runs Eclipse (direct routing only) on `demand`.
pub fn eclipse_schedule(
    demand: &DemandMatrix,
    params: &SystemParams,
    strategy: SearchStrategy,
) -> Result<EclipseOutcome> {
    demand.check_demand()?;
    params.validate()?;
    strategy.validate()?;
    let mut residual = demand.clone();
    let mut schedule = Schedule::default();
    while max_load(&residual) > params.r_p * schedule.t_c {
        let cfg = best_configuration(&residual, params, strategy)?;
        for (i, j) in cfg.matching.iter() {
            let left = residual.get(i, j);
            residual.set(i, j, left - cfg.alpha.min(left));
        }
        schedule.push(cfg.matching, cfg.alpha, params.delta);
    }
    let transmission_time = transmission_time(schedule.t_c, &residual, params.r_p)?;
    Ok(EclipseOutcome {
        schedule,
        residual,
        transmission_time,
    })
}
