//! Outer iterative receiver: per-hypothesis alternation between detection
//! and channel estimation, then the multistage decision.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{ChannelParams, ReceivedFrame};
use crate::decision::{decide, log_likelihood, FinalDecision, HypothesisRecord};
use crate::detector::{detect_and_regenerate, DetectionResult};
use crate::error::{BerdError, Result};
use crate::estimator::{init_biased_truth, init_moment_based, run_em, EstimatorConfig, InitMode};
use crate::ldpc::gamma_prefix;
use crate::mcs::{CandidateGrid, Mcs};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Single,
    Cooperative,
    Distributed,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Single => "single",
            Mode::Cooperative => "cooperative",
            Mode::Distributed => "distributed",
        })
    }
}

impl FromStr for Mode {
    type Err = BerdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "single" => Ok(Mode::Single),
            "cooperative" | "coop" => Ok(Mode::Cooperative),
            "distributed" | "dist" => Ok(Mode::Distributed),
            other => Err(BerdError::parse("mode", format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReceiverConfig {
    pub i_max: usize,
    pub eps: f64,
    pub mode: Mode,
    pub estimator: EstimatorConfig,
    pub candidates: CandidateGrid,
    /// Syndrome prefix for the code decision; `None` uses all `n-q` checks.
    pub iota: Option<usize>,
    pub bp_iters: usize,
    /// Number of channel paths assumed by the moment initialiser.
    pub n_paths: usize,
    /// Seed of the per-receiver initialiser streams.
    pub init_seed: u64,
}

impl ReceiverConfig {
    pub fn new(candidates: CandidateGrid) -> Self {
        ReceiverConfig {
            i_max: 30,
            eps: 1e-3,
            mode: Mode::Single,
            estimator: EstimatorConfig::default(),
            candidates,
            iota: None,
            bp_iters: 50,
            n_paths: 6,
            init_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.i_max == 0 {
            return Err(BerdError::InvalidParameter("i_max must be >= 1".into()));
        }
        if !(self.eps > 0.0) {
            return Err(BerdError::InvalidParameter(format!("eps {}", self.eps)));
        }
        if self.bp_iters == 0 || self.n_paths == 0 {
            return Err(BerdError::InvalidParameter(
                "bp_iters and n_paths must be >= 1".into(),
            ));
        }
        if self.iota == Some(0) {
            return Err(BerdError::InvalidParameter("iota must be >= 1".into()));
        }
        if self.candidates.is_empty() {
            return Err(BerdError::InvalidParameter("empty candidate grid".into()));
        }
        self.estimator.validate()
    }
}

/// Decision plus the full per-hypothesis records, in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverOutput {
    pub decision: FinalDecision,
    pub records: Vec<HypothesisRecord>,
}

impl ReceiverOutput {
    pub fn winner(&self) -> &HypothesisRecord {
        &self.records[self.decision.record]
    }
}

/// Starting estimates for every receiver under one hypothesis. The biased
/// initialiser draws from stream `k` of `init_seed`, so it is the same for
/// every hypothesis.
pub fn initial_estimates(
    frame: &ReceivedFrame,
    mcs: &Mcs,
    config: &ReceiverConfig,
) -> Result<Vec<ChannelParams>> {
    match config.estimator.init_mode {
        InitMode::BiasedTruth(deltas) => {
            let truth = frame.true_params()?;
            truth
                .iter()
                .enumerate()
                .map(|(k, t)| {
                    init_biased_truth(Some(t), &mut stream_rng(config.init_seed, k as u64), deltas)
                })
                .collect()
        }
        InitMode::MomentBased { step } => frame
            .samples
            .iter()
            .map(|r| init_moment_based(r, config.n_paths, step, &mcs.constellation))
            .collect(),
    }
}

struct LoopState {
    betas: Vec<ChannelParams>,
    iterations: usize,
    deltas: Vec<f64>,
}

// Detect, then re-estimate every receiver's channel on the regenerated
// symbols, until the summed squared change drops below eps.
fn iterate(
    rows: &[Vec<Complex64>],
    mut betas: Vec<ChannelParams>,
    mcs: &Mcs,
    config: &ReceiverConfig,
) -> Result<LoopState> {
    let mut deltas = Vec::new();
    while deltas.len() < config.i_max {
        let det =
            detect_and_regenerate(rows, &betas, &mcs.constellation, &mcs.code, config.bp_iters)?;
        let mut delta = 0.0;
        for (row, beta) in rows.iter().zip(betas.iter_mut()) {
            let em = run_em(row, &det.symbols_hat, beta, &config.estimator)?;
            delta += em.beta_hat.distance_sq(beta);
            *beta = em.beta_hat;
        }
        deltas.push(delta);
        if delta < config.eps {
            break;
        }
    }
    Ok(LoopState {
        iterations: deltas.len(),
        betas,
        deltas,
    })
}

fn package(
    rows: &[Vec<Complex64>],
    mcs: &Mcs,
    betas: Vec<ChannelParams>,
    det: DetectionResult,
    iterations: usize,
    deltas: Vec<f64>,
) -> Result<HypothesisRecord> {
    let loglik = log_likelihood(rows, &betas, &det.symbols_hat);
    let gamma = gamma_prefix(&mcs.code, &det.codeword_llrs)?;
    Ok(HypothesisRecord {
        theta: mcs.theta(),
        feasible: true,
        beta_hat: betas,
        loglik,
        gamma_prefix: gamma,
        detection: Some(det),
        outer_iterations: iterations,
        delta_trace: deltas,
    })
}

/// Joint iteration over all receivers with fused detection.
pub fn run_hypothesis(
    frame: &ReceivedFrame,
    mcs: &Mcs,
    config: &ReceiverConfig,
) -> Result<HypothesisRecord> {
    if mcs.codewords(frame.n_symbols()).is_none() {
        return Ok(HypothesisRecord::infeasible(mcs.theta()));
    }
    let init = initial_estimates(frame, mcs, config)?;
    let state = iterate(&frame.samples, init, mcs, config)?;
    let det = detect_and_regenerate(
        &frame.samples,
        &state.betas,
        &mcs.constellation,
        &mcs.code,
        config.bp_iters,
    )?;
    package(
        &frame.samples,
        mcs,
        state.betas,
        det,
        state.iterations,
        state.deltas,
    )
}

/// Each receiver iterates on its own row; one fused detection follows.
pub fn run_hypothesis_distributed(
    frame: &ReceivedFrame,
    mcs: &Mcs,
    config: &ReceiverConfig,
) -> Result<HypothesisRecord> {
    if mcs.codewords(frame.n_symbols()).is_none() {
        return Ok(HypothesisRecord::infeasible(mcs.theta()));
    }
    let init = initial_estimates(frame, mcs, config)?;
    let mut betas = Vec::with_capacity(init.len());
    let mut iterations = 0;
    let mut deltas: Vec<f64> = Vec::new();
    for (row, beta) in frame.samples.iter().zip(init) {
        let state = iterate(std::slice::from_ref(row), vec![beta], mcs, config)?;
        iterations = iterations.max(state.iterations);
        if deltas.len() < state.deltas.len() {
            deltas.resize(state.deltas.len(), 0.0);
        }
        for (acc, d) in deltas.iter_mut().zip(&state.deltas) {
            *acc += d;
        }
        betas.extend(state.betas);
    }
    let det = detect_and_regenerate(
        &frame.samples,
        &betas,
        &mcs.constellation,
        &mcs.code,
        config.bp_iters,
    )?;
    package(&frame.samples, mcs, betas, det, iterations, deltas)
}

/// One detection with the given channel parameters and no estimation.
pub fn run_hypothesis_known(
    frame: &ReceivedFrame,
    mcs: &Mcs,
    betas: &[ChannelParams],
    config: &ReceiverConfig,
) -> Result<HypothesisRecord> {
    if mcs.codewords(frame.n_symbols()).is_none() {
        return Ok(HypothesisRecord::infeasible(mcs.theta()));
    }
    let det = detect_and_regenerate(
        &frame.samples,
        betas,
        &mcs.constellation,
        &mcs.code,
        config.bp_iters,
    )?;
    package(&frame.samples, mcs, betas.to_vec(), det, 0, Vec::new())
}

fn run_grid<F>(config: &ReceiverConfig, per_hypothesis: F) -> Result<ReceiverOutput>
where
    F: Fn(&Mcs) -> Result<HypothesisRecord> + Sync,
{
    config.validate()?;
    let records = config
        .candidates
        .hypotheses()
        .par_iter()
        .map(&per_hypothesis)
        .collect::<Result<Vec<_>>>()?;
    let decision = decide(&records, config.iota)?;
    Ok(ReceiverOutput { decision, records })
}

/// Runs the configured mode over every hypothesis and decides.
pub fn receive(frame: &ReceivedFrame, config: &ReceiverConfig) -> Result<ReceiverOutput> {
    match config.mode {
        Mode::Single if frame.n_receivers() != 1 => Err(BerdError::InvalidParameter(format!(
            "single mode needs one receiver, got {}",
            frame.n_receivers()
        ))),
        Mode::Single | Mode::Cooperative => run_grid(config, |h| run_hypothesis(frame, h, config)),
        Mode::Distributed => run_grid(config, |h| run_hypothesis_distributed(frame, h, config)),
    }
}

/// Receiver fed the given channel parameters instead of estimating them.
pub fn receive_known_channel(
    frame: &ReceivedFrame,
    betas: &[ChannelParams],
    config: &ReceiverConfig,
) -> Result<ReceiverOutput> {
    if betas.len() != frame.n_receivers() {
        return Err(BerdError::LengthMismatch {
            expected: frame.n_receivers(),
            actual: betas.len(),
        });
    }
    run_grid(config, |h| run_hypothesis_known(frame, h, betas, config))
}

fn with_mode(config: &ReceiverConfig, mode: Mode) -> ReceiverConfig {
    ReceiverConfig {
        mode,
        ..config.clone()
    }
}

pub fn run_single(frame: &ReceivedFrame, config: &ReceiverConfig) -> Result<FinalDecision> {
    receive(frame, &with_mode(config, Mode::Single)).map(|o| o.decision)
}

pub fn run_cooperative(frame: &ReceivedFrame, config: &ReceiverConfig) -> Result<FinalDecision> {
    receive(frame, &with_mode(config, Mode::Cooperative)).map(|o| o.decision)
}

pub fn run_distributed(frame: &ReceivedFrame, config: &ReceiverConfig) -> Result<FinalDecision> {
    receive(frame, &with_mode(config, Mode::Distributed)).map(|o| o.decision)
}
