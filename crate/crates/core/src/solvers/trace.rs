use std::time::Instant;

use crate::Vector;

/// Per-step diagnostics; which fields are set depends on the solver.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepInfo {
    /// nmAPG: whether the extrapolated candidate passed the decrease test.
    pub accepted: Option<bool>,
    /// nmAPG: reference value `c_t` the step was tested against.
    pub reference: Option<f64>,
    /// nmAPG: squared distance from the returned point to its anchor
    /// (`y_t` when accepted, `x_t` for the fallback step).
    pub step_sq: Option<f64>,
    /// DCA: iterations spent in the inner solver.
    pub inner_iters: Option<usize>,
    /// CGD iterations or power-iteration rounds, where relevant.
    pub aux_iters: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Seconds since the solver started.
    pub elapsed: f64,
    pub objective: f64,
    pub step: StepInfo,
}

#[derive(Debug, Clone, Default)]
pub struct SolverTrace {
    pub records: Vec<TraceRecord>,
    /// Every iterate after the starting point, when requested.
    pub iterates: Vec<Vector>,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
    /// Total wall time of the run.
    pub elapsed: f64,
    /// Seconds spent evaluating objectives only to fill the trace. The
    /// solver itself would not need them (PG, FISTA, SCP, DCA).
    pub reporting_seconds: f64,
}

impl SolverTrace {
    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    /// Largest increase between consecutive recorded objectives (≤ 0 for a
    /// monotone trace).
    pub fn max_increase(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[1].objective - w[0].objective)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) struct Recorder {
    start: Instant,
    pub trace: SolverTrace,
    enabled: bool,
}

impl Recorder {
    pub fn new(enabled: bool) -> Self {
        Recorder {
            start: Instant::now(),
            trace: SolverTrace::default(),
            enabled,
        }
    }

    pub fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    pub fn push(&mut self, iteration: usize, objective: f64, step: StepInfo) {
        if self.enabled {
            let elapsed = self.elapsed();
            self.trace.records.push(TraceRecord {
                iteration,
                elapsed,
                objective,
                step,
            });
        }
    }

    /// Evaluates `objective` for the trace only, charging its cost to
    /// `reporting_seconds`. Returns `None` when recording is off.
    pub fn report(&mut self, objective: impl FnOnce() -> f64) -> Option<f64> {
        if !self.enabled {
            return None;
        }
        let t = Instant::now();
        let v = objective();
        self.trace.reporting_seconds += t.elapsed().as_secs_f64();
        Some(v)
    }

    pub fn finish(mut self, iterations: usize, converged: bool) -> SolverTrace {
        self.trace.iterations = iterations;
        self.trace.converged = converged;
        self.trace.elapsed = self.elapsed();
        self.trace
    }
}
