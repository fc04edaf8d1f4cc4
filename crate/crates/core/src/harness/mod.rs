//! Monte Carlo driver: SNR sweeps, benchmark receivers, metric accumulation
//! and CSV output.

mod scenario;

pub use scenario::{Benchmark, Scenario, TruthPolicy};

use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{
    draw_channel, noise_power_from_snr_db, transmit, ChannelParams, ReceivedFrame, TxRecord,
};
use crate::decision::HypothesisRecord;
use crate::error::{BerdError, Result};
use crate::estimator::{pilot_lmmse, pilot_zf};
use crate::mcs::{CandidateGrid, Mcs, Theta};
use crate::receiver::{receive, receive_known_channel, ReceiverConfig, ReceiverOutput};
use crate::rng::trial_rng;

/// One simulated frame with its ground truth.
#[derive(Debug, Clone)]
pub struct Trial {
    pub frame: ReceivedFrame,
    pub truth: Mcs,
    pub message: Vec<u8>,
    pub init_seed: u64,
}

/// Draws trial `trial` at SNR index `snr_idx`: the true MCS, the channels,
/// the message, the noise and the initialiser seed, in that order, all from
/// the trial's own stream.
pub fn draw_trial(
    scenario: &Scenario,
    grid: &CandidateGrid,
    snr_idx: usize,
    trial: usize,
) -> Result<Trial> {
    let mut rng = trial_rng(scenario.seed, snr_idx, trial);
    let truth = match &scenario.truth {
        TruthPolicy::Fixed(theta) => grid.find(theta).ok_or_else(|| {
            BerdError::InvalidParameter(format!("{theta} is not in the candidate grid"))
        })?,
        TruthPolicy::Uniform => {
            let feasible: Vec<Mcs> = grid
                .hypotheses()
                .into_iter()
                .filter(|h| h.codewords(scenario.symbols).is_some())
                .collect();
            if feasible.is_empty() {
                return Err(BerdError::NoFeasibleHypothesis);
            }
            let i = rng.random_range(0..feasible.len());
            feasible[i].clone()
        }
    };
    let q = truth.message_bits(scenario.symbols).ok_or_else(|| {
        BerdError::Infeasible(format!(
            "{} with {} symbols",
            truth.theta(),
            scenario.symbols
        ))
    })?;
    let noise = noise_power_from_snr_db(scenario.snr_db[snr_idx]);
    let params = (0..scenario.receivers)
        .map(|_| {
            draw_channel(
                &mut rng,
                scenario.paths,
                scenario.tap_variance,
                scenario.fix_leading,
                noise,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let message: Vec<u8> = (0..q).map(|_| rng.random_range(0..2u8)).collect();
    let symbols = truth
        .constellation
        .modulate(&truth.code.encode_blocks(&message)?)?;
    let mut frame = transmit(&symbols, &params, &mut rng)?;
    let init_seed = rng.random();
    if let Some(t) = frame.truth.as_mut() {
        t.tx = Some(TxRecord {
            modulation: truth.constellation.modulation(),
            code_id: truth.code.id().to_string(),
            message: message.clone(),
            symbols,
        });
    }
    Ok(Trial {
        frame,
        truth,
        message,
        init_seed,
    })
}

/// Per-trial metrics before averaging.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrialOutcome {
    pub bit_errors: u64,
    pub bits: u64,
    pub mcs_ok: bool,
    pub mod_ok: bool,
    pub code_ok: bool,
    /// Squared tap error averaged over receivers; `None` when the receiver failed.
    pub channel_se: Option<f64>,
    pub noise_se: Option<f64>,
    pub outer_iterations: usize,
}

/// Errors over the common prefix; true bits without a counterpart count as errors.
pub fn count_bit_errors(truth: &[u8], decided: &[u8]) -> u64 {
    let common = truth.len().min(decided.len());
    let mismatched = truth[..common]
        .iter()
        .zip(&decided[..common])
        .filter(|(a, b)| a != b)
        .count();
    (mismatched + truth.len() - common) as u64
}

fn estimation_errors(
    estimates: &[ChannelParams],
    truth: &[ChannelParams],
) -> (Option<f64>, Option<f64>) {
    if estimates.len() != truth.len() || truth.is_empty() {
        return (None, None);
    }
    let k = truth.len() as f64;
    let ch = estimates
        .iter()
        .zip(truth)
        .map(|(e, t)| e.tap_error(t))
        .sum::<f64>()
        / k;
    let nz = estimates
        .iter()
        .zip(truth)
        .map(|(e, t)| (e.noise_power - t.noise_power).powi(2))
        .sum::<f64>()
        / k;
    (Some(ch), Some(nz))
}

/// Scores a receiver output against the trial's truth.
pub fn score(trial: &Trial, output: &Result<ReceiverOutput>) -> TrialOutcome {
    let bits = trial.message.len() as u64;
    let Ok(out) = output else {
        return TrialOutcome {
            bit_errors: bits,
            bits,
            ..TrialOutcome::default()
        };
    };
    let d = &out.decision;
    let truth = trial.truth.theta();
    let params = trial.frame.true_params().unwrap_or(&[]);
    let (channel_se, noise_se) = estimation_errors(&d.beta_hat, params);
    TrialOutcome {
        bit_errors: count_bit_errors(&trial.message, &d.bits_hat),
        bits,
        mcs_ok: d.theta_hat == truth,
        mod_ok: d.theta_hat.modulation == truth.modulation,
        code_ok: d.theta_hat.code_id == truth.code_id,
        channel_se,
        noise_se,
        outer_iterations: out.winner().outer_iterations,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub snr_db: f64,
    pub ber: f64,
    pub pcc_mcs: f64,
    pub pcc_mod: f64,
    pub pcc_code: f64,
    pub mse_channel: f64,
    pub mse_noise: f64,
    pub mean_outer_iters: f64,
    pub trials: u64,
}

pub const CSV_HEADER: &str =
    "snr_db,ber,pcc_mcs,pcc_mod,pcc_code,mse_channel,mse_noise,mean_outer_iters,trials";

impl MetricRow {
    /// Folds outcomes in the order given.
    pub fn aggregate(snr_db: f64, outcomes: &[TrialOutcome]) -> Self {
        let n = outcomes.len() as f64;
        let mut errors = 0u64;
        let mut bits = 0u64;
        let (mut mcs, mut m, mut c) = (0u64, 0u64, 0u64);
        let (mut ch, mut nz, mut scored) = (0.0, 0.0, 0u64);
        let mut iters = 0u64;
        for o in outcomes {
            errors += o.bit_errors;
            bits += o.bits;
            mcs += u64::from(o.mcs_ok);
            m += u64::from(o.mod_ok);
            c += u64::from(o.code_ok);
            if let (Some(a), Some(b)) = (o.channel_se, o.noise_se) {
                ch += a;
                nz += b;
                scored += 1;
            }
            iters += o.outer_iterations as u64;
        }
        let ratio = |a: u64, b: f64| if b > 0.0 { a as f64 / b } else { f64::NAN };
        MetricRow {
            snr_db,
            ber: ratio(errors, bits as f64),
            pcc_mcs: ratio(mcs, n),
            pcc_mod: ratio(m, n),
            pcc_code: ratio(c, n),
            mse_channel: if scored > 0 {
                ch / scored as f64
            } else {
                f64::NAN
            },
            mse_noise: if scored > 0 {
                nz / scored as f64
            } else {
                f64::NAN
            },
            mean_outer_iters: ratio(iters, n),
            trials: outcomes.len() as u64,
        }
    }

    fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.snr_db,
            self.ber,
            self.pcc_mcs,
            self.pcc_mod,
            self.pcc_code,
            self.mse_channel,
            self.mse_noise,
            self.mean_outer_iters,
            self.trials
        )
    }

    fn from_csv_line(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(BerdError::parse(
                "metric csv",
                format!("expected 9 fields in `{line}`"),
            ));
        }
        let x = |i: usize| -> Result<f64> {
            f[i].parse()
                .map_err(|_| BerdError::parse("metric csv", format!("bad number `{}`", f[i])))
        };
        Ok(MetricRow {
            snr_db: x(0)?,
            ber: x(1)?,
            pcc_mcs: x(2)?,
            pcc_mod: x(3)?,
            pcc_code: x(4)?,
            mse_channel: x(5)?,
            mse_noise: x(6)?,
            mean_outer_iters: x(7)?,
            trials: f[8]
                .parse()
                .map_err(|_| BerdError::parse("metric csv", format!("bad count `{}`", f[8])))?,
        })
    }
}

/// Runs `per_trial` over every (SNR, trial) pair; trials fan out across the
/// rayon pool and are folded in trial order.
pub fn sweep<F>(scenario: &Scenario, per_trial: F) -> Result<Vec<MetricRow>>
where
    F: Fn(usize, usize) -> Result<TrialOutcome> + Sync,
{
    scenario
        .snr_db
        .iter()
        .enumerate()
        .map(|(si, &snr)| {
            let outcomes = (0..scenario.trials)
                .into_par_iter()
                .map(|t| per_trial(si, t))
                .collect::<Result<Vec<_>>>()?;
            Ok(MetricRow::aggregate(snr, &outcomes))
        })
        .collect()
}

fn config_for(base: &ReceiverConfig, trial: &Trial) -> ReceiverConfig {
    ReceiverConfig {
        init_seed: trial.init_seed,
        ..base.clone()
    }
}

/// Blind receiver sweep.
pub fn run_scenario(scenario: &Scenario) -> Result<Vec<MetricRow>> {
    scenario.validate()?;
    let grid = scenario.grid()?;
    let base = scenario.receiver_config(grid.clone())?;
    sweep(scenario, |si, t| {
        let trial = draw_trial(scenario, &grid, si, t)?;
        let out = receive(&trial.frame, &config_for(&base, &trial));
        Ok(score(&trial, &out))
    })
}

fn true_theta_grid(trial: &Trial) -> Result<CandidateGrid> {
    CandidateGrid::new(
        vec![trial.truth.constellation.modulation()],
        vec![trial.truth.code.clone()],
    )
}

/// Output of one benchmark receiver on one trial.
pub fn run_benchmark_trial(
    scenario: &Scenario,
    base: &ReceiverConfig,
    bench: Benchmark,
    trial: &Trial,
) -> TrialOutcome {
    let result = (|| -> Result<ReceiverOutput> {
        let truth = trial.frame.true_params()?;
        match bench {
            Benchmark::PerfectCsi => receive_known_channel(&trial.frame, truth, base),
            Benchmark::PerfectCsiTrueTheta => {
                let cfg = ReceiverConfig {
                    candidates: true_theta_grid(trial)?,
                    ..base.clone()
                };
                receive_known_channel(&trial.frame, truth, &cfg)
            }
            Benchmark::Zf | Benchmark::Lmmse => {
                let tx = trial
                    .frame
                    .truth
                    .as_ref()
                    .and_then(|t| t.tx.as_ref())
                    .ok_or(BerdError::MissingTruth)?;
                let estimates = trial
                    .frame
                    .samples
                    .iter()
                    .zip(truth)
                    .map(|(row, t)| match bench {
                        Benchmark::Zf => pilot_zf(row, &tx.symbols, scenario.paths),
                        _ => {
                            let (mean, var) = lmmse_prior(scenario);
                            pilot_lmmse(row, &tx.symbols, &mean, &var, t.noise_power)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                let cfg = ReceiverConfig {
                    candidates: true_theta_grid(trial)?,
                    ..base.clone()
                };
                receive_known_channel(&trial.frame, &estimates, &cfg)
            }
        }
    })();
    score(trial, &result)
}

/// Prior of the channel draw: a fixed unit leading tap, then zero-mean taps
/// of the scenario variance.
pub fn lmmse_prior(scenario: &Scenario) -> (Vec<Complex64>, Vec<f64>) {
    (0..scenario.paths)
        .map(|l| {
            if l == 0 && scenario.fix_leading {
                (Complex64::new(1.0, 0.0), 0.0)
            } else {
                (Complex64::new(0.0, 0.0), scenario.tap_variance)
            }
        })
        .unzip()
}

/// Benchmark sweeps over the same trials as `run_scenario`.
pub fn run_benchmarks(scenario: &Scenario) -> Result<Vec<(Benchmark, Vec<MetricRow>)>> {
    scenario.validate()?;
    let grid = scenario.grid()?;
    let base = scenario.receiver_config(grid.clone())?;
    scenario
        .benchmarks
        .iter()
        .map(|&b| {
            let rows = sweep(scenario, |si, t| {
                let trial = draw_trial(scenario, &grid, si, t)?;
                Ok(run_benchmark_trial(scenario, &base, b, &trial))
            })?;
            Ok((b, rows))
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[MetricRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.to_csv_line())?;
    }
    Ok(())
}

pub fn emit_csv(rows: &[MetricRow], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).map_err(|e| BerdError::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| BerdError::io(path, e))
}

pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<MetricRow>> {
    let mut lines = input.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(BerdError::parse("metric csv", "missing header")),
    }
    lines
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| {
            let l = l.map_err(|e| BerdError::parse("metric csv", e.to_string()))?;
            MetricRow::from_csv_line(l.trim())
        })
        .collect()
}

/// `iota,gamma_avg,theta_id` rows for each record, in record order.
pub fn write_gamma_trace<W: Write>(
    records: &[HypothesisRecord],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "iota,gamma_avg,theta_id")?;
    for r in records {
        for (i, g) in r.gamma_prefix.iter().enumerate() {
            writeln!(out, "{},{},{}", i + 1, g, r.theta)?;
        }
    }
    Ok(())
}

pub fn emit_gamma_trace(records: &[HypothesisRecord], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_gamma_trace(records, &mut buf).map_err(|e| BerdError::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| BerdError::io(path, e))
}

/// Runs the blind receiver on one trial and returns its records and truth.
pub fn gamma_trace_trial(
    scenario: &Scenario,
    snr_idx: usize,
    trial: usize,
) -> Result<(Theta, ReceiverOutput)> {
    if snr_idx >= scenario.snr_db.len() {
        return Err(BerdError::IndexOutOfRange {
            index: snr_idx + 1,
            max: scenario.snr_db.len(),
        });
    }
    let grid = scenario.grid()?;
    let base = scenario.receiver_config(grid.clone())?;
    let t = draw_trial(scenario, &grid, snr_idx, trial)?;
    let out = receive(&t.frame, &config_for(&base, &t))?;
    Ok((t.truth.theta(), out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(snr: f64) -> MetricRow {
        MetricRow {
            snr_db: snr,
            ber: 0.125,
            pcc_mcs: 0.5,
            pcc_mod: 0.75,
            pcc_code: 1.0,
            mse_channel: 1e-3,
            mse_noise: f64::NAN,
            mean_outer_iters: 2.5,
            trials: 4,
        }
    }

    #[test]
    fn csv_header_only_for_no_rows() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![row(-2.0), row(0.5)];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.to_csv_line(), b.to_csv_line());
        }
        assert!(read_csv("nope\n".as_bytes()).is_err());
    }

    #[test]
    fn bit_error_accounting() {
        assert_eq!(count_bit_errors(&[0, 1, 1], &[0, 1, 1]), 0);
        assert_eq!(count_bit_errors(&[0, 1, 1, 0], &[1, 1]), 3);
        assert_eq!(count_bit_errors(&[0, 1], &[0, 0, 1, 1]), 1);
        assert_eq!(count_bit_errors(&[1, 1], &[]), 2);
    }

    #[test]
    fn aggregate_counts() {
        let outcomes = [
            TrialOutcome {
                bit_errors: 2,
                bits: 10,
                mcs_ok: true,
                mod_ok: true,
                code_ok: true,
                channel_se: Some(0.2),
                noise_se: Some(0.1),
                outer_iterations: 3,
            },
            TrialOutcome {
                bit_errors: 10,
                bits: 10,
                ..TrialOutcome::default()
            },
        ];
        let r = MetricRow::aggregate(4.0, &outcomes);
        assert_eq!(r.ber, 0.6);
        assert_eq!(r.pcc_mcs, 0.5);
        assert_eq!(r.mse_channel, 0.2);
        assert_eq!(r.mean_outer_iters, 1.5);
        assert_eq!(r.trials, 2);
    }

    #[test]
    fn trials_are_reproducible() {
        let s = Scenario {
            modulations: vec![
                crate::modem::Modulation::Qpsk,
                crate::modem::Modulation::Psk8,
            ],
            codes: vec!["ldpc_1296_r12".into()],
            ..Scenario::default()
        };
        let g = s.grid().unwrap();
        let a = draw_trial(&s, &g, 1, 7).unwrap();
        let b = draw_trial(&s, &g, 1, 7).unwrap();
        assert_eq!(a.frame, b.frame);
        assert_eq!(a.init_seed, b.init_seed);
        // 8PSK cannot carry a 1296-bit codeword in 648 symbols.
        assert_eq!(a.truth.theta().to_string(), "qpsk/ldpc_1296_r12");
        assert_ne!(draw_trial(&s, &g, 1, 8).unwrap().frame, a.frame);
    }

    #[test]
    fn lmmse_prior_shape() {
        let (m, v) = lmmse_prior(&Scenario::default());
        assert_eq!(m[0], Complex64::new(1.0, 0.0));
        assert_eq!(v, vec![0.0, 0.1, 0.1, 0.1, 0.1, 0.1]);
    }
}
