//! Multistage likelihood decision over the candidate grid: per-hypothesis
//! log-likelihood, modulation majority vote and syndrome-LLR code decision.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;

use crate::channel::{residual_energy, ChannelParams};
use crate::detector::DetectionResult;
use crate::error::{BerdError, Result};
use crate::mcs::Theta;
use crate::modem::{Modulation, SymbolFrame};

/// `-sum_j |r_j - (h * s)_j|^2 / s2 - N ln s` for one receiver.
pub fn log_likelihood_row(
    received: &[Complex64],
    beta: &ChannelParams,
    symbols: &SymbolFrame,
) -> f64 {
    let e = residual_energy(&beta.taps(), received, symbols.symbols());
    -e / beta.noise_power - received.len() as f64 * 0.5 * beta.noise_power.ln()
}

/// Sum of the per-receiver log-likelihoods.
pub fn log_likelihood(
    rows: &[Vec<Complex64>],
    betas: &[ChannelParams],
    symbols: &SymbolFrame,
) -> f64 {
    rows.iter()
        .zip(betas)
        .map(|(r, b)| log_likelihood_row(r, b, symbols))
        .sum()
}

/// Outcome of one hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisRecord {
    pub theta: Theta,
    pub feasible: bool,
    pub beta_hat: Vec<ChannelParams>,
    pub loglik: f64,
    /// `Gamma(1) .. Gamma(n-q)`.
    pub gamma_prefix: Vec<f64>,
    pub detection: Option<DetectionResult>,
    pub outer_iterations: usize,
    pub delta_trace: Vec<f64>,
}

impl HypothesisRecord {
    pub fn infeasible(theta: Theta) -> Self {
        HypothesisRecord {
            theta,
            feasible: false,
            beta_hat: Vec::new(),
            loglik: f64::NEG_INFINITY,
            gamma_prefix: Vec::new(),
            detection: None,
            outer_iterations: 0,
            delta_trace: Vec::new(),
        }
    }

    /// `Gamma(iota)`, with `iota` capped at `n-q`; `None` means `n-q`.
    pub fn gamma_at(&self, iota: Option<usize>) -> f64 {
        let m = self.gamma_prefix.len();
        if !self.feasible || m == 0 {
            return f64::NEG_INFINITY;
        }
        let i = iota.unwrap_or(m).clamp(1, m);
        self.gamma_prefix[i - 1]
    }
}

fn metric(x: f64) -> f64 {
    if x.is_nan() {
        f64::NEG_INFINITY
    } else {
        x
    }
}

// Larger metric first, then the lexicographically smaller theta.
fn rank(a: (f64, &Theta), b: (f64, &Theta)) -> Ordering {
    metric(a.0)
        .total_cmp(&metric(b.0))
        .then_with(|| b.1.cmp(a.1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vote {
    Winner(Modulation),
    Tie,
}

/// Each code votes for the modulation with the largest log-likelihood; the
/// modulation with strictly the most votes wins.
pub fn modulation_vote(records: &[HypothesisRecord]) -> Result<Vote> {
    let mut best_per_code: BTreeMap<&str, &HypothesisRecord> = BTreeMap::new();
    for r in records.iter().filter(|r| r.feasible) {
        best_per_code
            .entry(r.theta.code_id.as_str())
            .and_modify(|cur| {
                if rank((r.loglik, &r.theta), (cur.loglik, &cur.theta)) == Ordering::Greater {
                    *cur = r;
                }
            })
            .or_insert(r);
    }
    if best_per_code.is_empty() {
        return Err(BerdError::NoFeasibleHypothesis);
    }
    let mut votes: BTreeMap<&str, (Modulation, usize)> = BTreeMap::new();
    for r in best_per_code.values() {
        votes
            .entry(r.theta.modulation.id())
            .or_insert((r.theta.modulation, 0))
            .1 += 1;
    }
    let top = votes.values().map(|v| v.1).max().unwrap_or(0);
    let mut leaders = votes.values().filter(|v| v.1 == top);
    match (leaders.next(), leaders.next()) {
        (Some(&(m, _)), None) => Ok(Vote::Winner(m)),
        _ => Ok(Vote::Tie),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalDecision {
    pub theta_hat: Theta,
    pub bits_hat: Vec<u8>,
    pub beta_hat: Vec<ChannelParams>,
    pub vote: Vote,
    /// Index of the winning record in the input slice.
    pub record: usize,
}

/// Modulation by majority vote, then the code with the largest `Gamma(iota)`
/// under that modulation. On a tie in the vote the largest `Gamma(iota)` over
/// the whole grid decides both. Ties in `Gamma` go to the larger
/// log-likelihood, then to the lexicographically smaller theta.
pub fn decide(records: &[HypothesisRecord], iota: Option<usize>) -> Result<FinalDecision> {
    let vote = modulation_vote(records)?;
    let eligible = records.iter().enumerate().filter(|(_, r)| {
        r.feasible
            && match vote {
                Vote::Winner(m) => r.theta.modulation == m,
                Vote::Tie => true,
            }
    });
    let (idx, best) = eligible
        .max_by(|(_, a), (_, b)| {
            metric(a.gamma_at(iota))
                .total_cmp(&metric(b.gamma_at(iota)))
                .then_with(|| rank((a.loglik, &a.theta), (b.loglik, &b.theta)))
        })
        .ok_or(BerdError::NoFeasibleHypothesis)?;
    Ok(FinalDecision {
        theta_hat: best.theta.clone(),
        bits_hat: best
            .detection
            .as_ref()
            .map(|d| d.bits_hat.clone())
            .unwrap_or_default(),
        beta_hat: best.beta_hat.clone(),
        vote,
        record: idx,
    })
}

/// One line per hypothesis: `theta,feasible,loglik,outer_iterations,gamma_full`.
pub fn write_metric_csv<W: Write>(records: &[HypothesisRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "theta,feasible,loglik,outer_iterations,gamma_full")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.theta,
            r.feasible,
            r.loglik,
            r.outer_iterations,
            r.gamma_at(None)
        )?;
    }
    Ok(())
}
