//! Iterative precoder design: the SCA loop and the Dinkelbach baseline.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channel::Scenario;
use crate::conic::DEFAULT_SOLVE_TOL;
use crate::error::{Error, Result};
use crate::model::{check_weight, energy_efficiency, scalarized_objective_with, sum_se, Approach, PrecoderSet};
use crate::subproblems::{
    build, build_parametric, extract, feasible_precoders, initialize, matched_filter_start,
    Bound, ScaState, Strategy, SubproblemSpec,
};

pub const DINKELBACH_INNER_TOL: f64 = 1e-5;
pub const DINKELBACH_INNER_MAX: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Relative change of the subproblem objective that ends the run.
    pub tol: f64,
    pub max_iters: usize,
    /// Keep every iteration, not just the first and last.
    pub record_trace: bool,
    /// Record wall-clock time per iteration.
    pub timer: bool,
    pub solver_tol: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 200,
            record_trace: true,
            timer: false,
            solver_tol: DEFAULT_SOLVE_TOL,
        }
    }
}

impl RunOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.solver_tol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        Ok(())
    }
}

/// Precoder design methods, named as in the usual comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "RS-SOCP")]
    RsSocp,
    #[serde(rename = "RS-GCP")]
    RsGcp,
    #[serde(rename = "NoRS-SOCP")]
    NoRsSocp,
    #[serde(rename = "NoRS-GCP")]
    NoRsGcp,
    #[serde(rename = "RS-D-MMSE")]
    RsDMmse,
    #[serde(rename = "NoRS-D-MMSE")]
    NoRsDMmse,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::RsSocp,
        Method::RsGcp,
        Method::NoRsSocp,
        Method::NoRsGcp,
        Method::RsDMmse,
        Method::NoRsDMmse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::RsSocp => "RS-SOCP",
            Method::RsGcp => "RS-GCP",
            Method::NoRsSocp => "NoRS-SOCP",
            Method::NoRsGcp => "NoRS-GCP",
            Method::RsDMmse => "RS-D-MMSE",
            Method::NoRsDMmse => "NoRS-D-MMSE",
        }
    }

    pub fn strategy(self) -> Strategy {
        match self {
            Method::RsSocp | Method::RsGcp | Method::RsDMmse => Strategy::Rs,
            _ => Strategy::NoRs,
        }
    }

    /// Rate bound of an SCA method; `None` for the Dinkelbach methods.
    pub fn bound(self) -> Option<Bound> {
        match self {
            Method::RsSocp | Method::NoRsSocp => Some(Bound::Lb1),
            Method::RsGcp | Method::NoRsGcp => Some(Bound::Lb2),
            Method::RsDMmse | Method::NoRsDMmse => None,
        }
    }

    pub fn from_parts(strategy: Strategy, bound: Bound) -> Self {
        match (strategy, bound) {
            (Strategy::Rs, Bound::Lb1) => Method::RsSocp,
            (Strategy::Rs, Bound::Lb2) => Method::RsGcp,
            (Strategy::NoRs, Bound::Lb1) => Method::NoRsSocp,
            (Strategy::NoRs, Bound::Lb2) => Method::NoRsGcp,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name().to_ascii_uppercase() == key)
            .ok_or_else(|| Error::Parse(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Subproblem optimum (SCA) or parametric objective (Dinkelbach).
    pub surrogate_objective: f64,
    pub true_objective: f64,
    pub se_bits: f64,
    pub ee: f64,
    pub transmit_power_w: f64,
    pub elapsed_ms: Option<f64>,
    /// Dinkelbach ratio in force during this iteration.
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum RunStatus {
    Converged,
    MaxIterations,
    SolverFailure(String),
}

impl RunStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIterations => "max_iterations",
            RunStatus::SolverFailure(_) => "solver_failure",
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, RunStatus::SolverFailure(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub method: String,
    pub records: Vec<IterationRecord>,
    pub final_precoders: PrecoderSet,
    /// Solver calls made; inner iterations for Dinkelbach.
    pub iterations: usize,
    /// Outer ratio updates of Dinkelbach; equal to `iterations` for SCA.
    pub outer_iterations: usize,
    pub status: RunStatus,
    pub final_objective: f64,
    pub final_se_bits: f64,
    pub final_ee: f64,
    pub elapsed_ms: Option<f64>,
}

impl RunTrace {
    pub fn surrogate_objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.surrogate_objective).collect()
    }

    /// Largest drop between consecutive surrogate objectives; zero when the
    /// sequence never decreases.
    pub fn worst_decrease(&self) -> f64 {
        self.records
            .windows(2)
            .map(|p| p[0].surrogate_objective - p[1].surrogate_objective)
            .fold(0.0, f64::max)
    }
}

struct Recorder {
    start: Option<Instant>,
    keep_all: bool,
    records: Vec<IterationRecord>,
}

impl Recorder {
    fn new(opts: &RunOptions) -> Self {
        Self {
            start: opts.timer.then(Instant::now),
            keep_all: opts.record_trace,
            records: Vec::new(),
        }
    }

    fn elapsed(&self) -> Option<f64> {
        self.start.map(|t| t.elapsed().as_secs_f64() * 1e3)
    }

    fn push(&mut self, s: &Scenario, iteration: usize, surrogate: f64, true_objective: f64, f: &PrecoderSet, lambda: Option<f64>) {
        let rec = IterationRecord {
            iteration,
            surrogate_objective: surrogate,
            true_objective,
            se_bits: sum_se(f, s),
            ee: energy_efficiency(f, s),
            transmit_power_w: f.frobenius_sq(),
            elapsed_ms: self.elapsed(),
            lambda,
        };
        if !self.keep_all && self.records.len() >= 2 {
            self.records.pop();
        }
        self.records.push(rec);
    }
}

fn converged(prev: f64, next: f64, tol: f64) -> bool {
    (next - prev).abs() <= tol * next.abs().max(prev.abs()).max(f64::MIN_POSITIVE)
}

/// Runs the SCA loop from the matched-filter start.
pub fn sca_solve(spec: &SubproblemSpec, s: &Scenario, opts: &RunOptions) -> Result<RunTrace> {
    let state = initialize(spec, s)?;
    sca_solve_from(spec, s, state, opts)
}

/// Runs the SCA loop from a given feasible state.
pub fn sca_solve_from(spec: &SubproblemSpec, s: &Scenario, mut state: ScaState, opts: &RunOptions) -> Result<RunTrace> {
    opts.validate()?;
    let mut rec = Recorder::new(opts);
    rec.push(s, 0, state.surrogate_objective, state.true_objective, &state.precoders, None);
    let mut status = RunStatus::MaxIterations;
    let mut iterations = 0;
    for n in 1..=opts.max_iters {
        let sub = build(spec, s, &state)?;
        let solution = sub.program.solve(opts.solver_tol)?;
        let next = match extract(spec, s, &sub, &solution) {
            Ok(next) => next,
            Err(Error::Solver { status: st, detail }) => {
                status = RunStatus::SolverFailure(format!("iteration {n}: {st} ({detail})"));
                break;
            }
            Err(e) => return Err(e),
        };
        iterations = n;
        rec.push(s, n, next.surrogate_objective, next.true_objective, &next.precoders, None);
        let done = converged(state.surrogate_objective, next.surrogate_objective, opts.tol);
        state = next;
        if done {
            status = RunStatus::Converged;
            break;
        }
    }
    let method = Method::from_parts(spec.strategy, spec.bound).name().to_string();
    Ok(finish(method, s, rec, state.precoders, state.true_objective, iterations, iterations, status))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    method: String,
    s: &Scenario,
    rec: Recorder,
    f: PrecoderSet,
    objective: f64,
    iterations: usize,
    outer_iterations: usize,
    status: RunStatus,
) -> RunTrace {
    RunTrace {
        method,
        elapsed_ms: rec.elapsed(),
        records: rec.records,
        final_se_bits: sum_se(&f, s),
        final_ee: energy_efficiency(&f, s),
        final_precoders: f,
        iterations,
        outer_iterations,
        status,
        final_objective: objective,
    }
}

/// Value of the parametric objective `w (SE - lambda g) + (1 - w) SE / norm`.
fn parametric_value(w: f64, lambda: f64, norm: f64, f: &PrecoderSet, s: &Scenario) -> f64 {
    let se = sum_se(f, s);
    let g = f.frobenius_sq() + s.p_circuit() + s.chi() * se;
    w * (se - lambda * g) + (1.0 - w) * se / norm
}

/// Alternating WMMSE-type ascent on the parametric objective for a fixed
/// ratio `lambda`. Returns the final precoders and the number of solves, or a
/// failure description.
fn parametric_ascent(
    strategy: Strategy,
    w: f64,
    lambda: f64,
    norm: f64,
    s: &Scenario,
    mut f: PrecoderSet,
    opts: &RunOptions,
    rec: &mut Recorder,
    counter: &mut usize,
) -> Result<(PrecoderSet, Option<String>)> {
    let mut value = parametric_value(w, lambda, norm, &f, s);
    for _ in 0..DINKELBACH_INNER_MAX {
        if *counter >= opts.max_iters * DINKELBACH_INNER_MAX {
            break;
        }
        let sub = build_parametric(strategy, w, lambda, norm, s, &f)?;
        let solution = sub.program.solve(opts.solver_tol)?;
        if !solution.is_optimal() {
            return Ok((f, Some(format!("inner solve {}: {}", *counter + 1, solution.status))));
        }
        *counter += 1;
        f = feasible_precoders(&sub, &solution, s)?;
        let next = parametric_value(w, lambda, norm, &f, s);
        let objective = scalarized_objective_with(Approach::WeightedSum, w, &f, s, Some(norm))?;
        rec.push(s, *counter, next, objective, &f, Some(lambda));
        let done = converged(value, next, DINKELBACH_INNER_TOL);
        value = next;
        if done {
            break;
        }
    }
    Ok((f, None))
}

/// Dinkelbach's method with a WMMSE-form inner solver on the weighted-sum
/// objective `w EE + (1 - w) SE / P_c`.
pub fn dinkelbach_wmmse(strategy: Strategy, w: f64, s: &Scenario, opts: &RunOptions) -> Result<RunTrace> {
    check_weight(w)?;
    opts.validate()?;
    let norm = s.p_circuit();
    let mut rec = Recorder::new(opts);
    let mut f = matched_filter_start(s, strategy);
    let objective = |f: &PrecoderSet| scalarized_objective_with(Approach::WeightedSum, w, f, s, Some(norm));
    rec.push(s, 0, parametric_value(w, 0.0, norm, &f, s), objective(&f)?, &f, Some(0.0));

    let mut lambda = 0.0;
    let mut inner = 0;
    let mut outer = 0;
    let mut status = RunStatus::MaxIterations;
    while outer < opts.max_iters {
        outer += 1;
        let (next, failure) = parametric_ascent(strategy, w, lambda, norm, s, f.clone(), opts, &mut rec, &mut inner)?;
        if let Some(msg) = failure {
            status = RunStatus::SolverFailure(msg);
            break;
        }
        f = next;
        let se = sum_se(&f, s);
        let g = f.frobenius_sq() + s.p_circuit() + s.chi() * se;
        let gap = se - lambda * g;
        lambda = se / g;
        if gap < opts.tol * g {
            status = RunStatus::Converged;
            break;
        }
    }
    let method = match strategy {
        Strategy::Rs => Method::RsDMmse,
        Strategy::NoRs => Method::NoRsDMmse,
    };
    let final_objective = objective(&f)?;
    Ok(finish(method.name().to_string(), s, rec, f, final_objective, inner, outer, status))
}

/// Sum-SE maximization on its own: rate-minorant ascent with no power term.
pub fn se_max(strategy: Strategy, s: &Scenario, opts: &RunOptions) -> Result<RunTrace> {
    opts.validate()?;
    let mut rec = Recorder::new(opts);
    let mut f = matched_filter_start(s, strategy);
    rec.push(s, 0, sum_se(&f, s), sum_se(&f, s), &f, None);
    let mut status = RunStatus::MaxIterations;
    let mut iterations = 0;
    let mut value = sum_se(&f, s);
    for n in 1..=opts.max_iters {
        let sub = build_parametric(strategy, 0.0, 0.0, 1.0, s, &f)?;
        let solution = sub.program.solve(opts.solver_tol)?;
        if !solution.is_optimal() {
            status = RunStatus::SolverFailure(format!("iteration {n}: {}", solution.status));
            break;
        }
        iterations = n;
        f = feasible_precoders(&sub, &solution, s)?;
        let se = sum_se(&f, s);
        rec.push(s, n, solution.objective, se, &f, None);
        let done = converged(value, solution.objective, opts.tol);
        value = solution.objective;
        if done {
            status = RunStatus::Converged;
            break;
        }
    }
    let label = format!("{}-SE-MAX", strategy.name());
    let se = sum_se(&f, s);
    Ok(finish(label, s, rec, f, se, iterations, iterations, status))
}

/// Runs `method` for the given tradeoff weight.
pub fn run_method(method: Method, approach: Approach, w: f64, s: &Scenario, opts: &RunOptions) -> Result<RunTrace> {
    match method.bound() {
        Some(bound) => {
            let spec = SubproblemSpec::new(approach, bound, method.strategy(), w)?;
            sca_solve(&spec, s, opts)
        }
        None => dinkelbach_wmmse(method.strategy(), w, s, opts),
    }
}
