//! Blind channel and noise-power estimation by expectation-maximisation,
//! with the two initialisers and the linear-convergence diagnostic.
//!
//! The complete data splits each received sample into per-path components
//! `z_{l,j} = h_l s_{j-l} + v_{l,j}` where path `l` carries the fraction
//! `w_l` of the noise power.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{residual_energy, wrap_to_tau, ChannelParams};
use crate::decision::log_likelihood_row;
use crate::detector::bayes_equalize;
use crate::error::{BerdError, Result};
use crate::modem::{Constellation, SymbolFrame};

/// Lower bound applied to estimated noise powers so that the equaliser and
/// the likelihood stay finite on noiseless data.
pub const NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSplit {
    Uniform,
    Custom(Vec<f64>),
}

impl NoiseSplit {
    pub fn weights(&self, n_paths: usize) -> Result<Vec<f64>> {
        match self {
            NoiseSplit::Uniform => Ok(vec![1.0 / n_paths as f64; n_paths]),
            NoiseSplit::Custom(w) => {
                if w.len() != n_paths {
                    return Err(BerdError::LengthMismatch {
                        expected: n_paths,
                        actual: w.len(),
                    });
                }
                if w.iter().any(|&x| !(x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    return Err(BerdError::InvalidParameter(
                        "noise split must be nonnegative and sum to 1".into(),
                    ));
                }
                Ok(w.clone())
            }
        }
    }
}

/// Maximum biases of the truth-based initialiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasDeltas {
    pub gain: f64,
    pub phase: f64,
    pub noise: f64,
}

impl Default for BiasDeltas {
    fn default() -> Self {
        BiasDeltas {
            gain: 0.1,
            phase: PI / 20.0,
            noise: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitMode {
    BiasedTruth(BiasDeltas),
    /// Fourth-order moment taps and a noise-power grid of this step.
    MomentBased {
        step: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub t_max: usize,
    pub eps: f64,
    pub noise_split: NoiseSplit,
    pub init_mode: InitMode,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            t_max: 30,
            eps: 1e-3,
            noise_split: NoiseSplit::Uniform,
            init_mode: InitMode::BiasedTruth(BiasDeltas::default()),
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_max == 0 {
            return Err(BerdError::InvalidParameter("t_max must be >= 1".into()));
        }
        if !(self.eps > 0.0) {
            return Err(BerdError::InvalidParameter(format!("eps {}", self.eps)));
        }
        if let InitMode::MomentBased { step } = self.init_mode {
            if !(step > 0.0) {
                return Err(BerdError::InvalidParameter(format!("grid step {step}")));
            }
        }
        Ok(())
    }
}

/// Expected complete data given the current estimate:
/// `z_{l,j} = zbar_{l,j} + w_l (r_j - sum_l zbar_{l,j})`, `zbar_{l,j} = h_l s_{j-l}`.
pub fn e_step(
    received: &[Complex64],
    symbols: &SymbolFrame,
    beta: &ChannelParams,
    noise_split: &[f64],
) -> Vec<Vec<Complex64>> {
    let taps = beta.taps();
    let n = received.len();
    let mut z: Vec<Vec<Complex64>> = taps
        .iter()
        .enumerate()
        .map(|(l, h)| (0..n).map(|j| h * symbols.delayed(j, l)).collect())
        .collect();
    for j in 0..n {
        let residual = received[j] - z.iter().map(|row| row[j]).sum::<Complex64>();
        for (row, &w) in z.iter_mut().zip(noise_split) {
            row[j] += residual * w;
        }
    }
    z
}

/// Per-path least-squares fit of the complete data. Path `l` is normalised by
/// the energy of the symbols it actually sees, `P_l = sum_j |s_{j-l}|^2`.
/// Paths that see no energy get a zero tap.
pub fn m_step(complete: &[Vec<Complex64>], symbols: &SymbolFrame) -> Result<(Vec<f64>, Vec<f64>)> {
    if symbols.energy() == 0.0 {
        return Err(BerdError::InvalidParameter("symbol energy is zero".into()));
    }
    let n = symbols.len();
    let mut gains = Vec::with_capacity(complete.len());
    let mut phases = Vec::with_capacity(complete.len());
    for (l, row) in complete.iter().enumerate() {
        let mut corr = Complex64::new(0.0, 0.0);
        let mut power = 0.0;
        for j in l..n {
            let s = symbols.symbols()[j - l];
            corr += s.conj() * row[j];
            power += s.norm_sqr();
        }
        if power == 0.0 {
            gains.push(0.0);
            phases.push(0.0);
            continue;
        }
        let phase = corr.im.atan2(corr.re);
        let gain = (corr * Complex64::from_polar(1.0, -phase)).re / power;
        gains.push(gain.max(0.0));
        phases.push(wrap_to_tau(phase));
    }
    Ok((gains, phases))
}

/// `(1/N) sum_j |r_j - sum_l a_l e^{i phi_l} s_{j-l}|^2`.
pub fn update_noise_power(
    received: &[Complex64],
    gains: &[f64],
    phases: &[f64],
    symbols: &SymbolFrame,
) -> f64 {
    let taps: Vec<Complex64> = gains
        .iter()
        .zip(phases)
        .map(|(&a, &p)| Complex64::from_polar(a, p))
        .collect();
    residual_energy(&taps, received, symbols.symbols()) / received.len() as f64
}

/// Iteration state of one EM run.
#[derive(Debug, Clone)]
pub struct EmState {
    pub beta_hat: ChannelParams,
    pub complete_data: Vec<Vec<Complex64>>,
    pub noise_split: Vec<f64>,
    pub iter: usize,
    pub last_delta: f64,
}

impl EmState {
    pub fn new(init: ChannelParams, noise_split: &NoiseSplit) -> Result<Self> {
        let noise_split = noise_split.weights(init.n_paths())?;
        Ok(EmState {
            beta_hat: init,
            complete_data: Vec::new(),
            noise_split,
            iter: 0,
            last_delta: f64::INFINITY,
        })
    }

    /// One E-step, M-step and noise update. Returns the squared parameter change.
    pub fn step(&mut self, received: &[Complex64], symbols: &SymbolFrame) -> Result<f64> {
        self.complete_data = e_step(received, symbols, &self.beta_hat, &self.noise_split);
        let (gains, phases) = m_step(&self.complete_data, symbols)?;
        let noise = update_noise_power(received, &gains, &phases, symbols).max(NOISE_FLOOR);
        let next = ChannelParams {
            gains,
            phases,
            noise_power: noise,
        };
        self.last_delta = next.distance_sq(&self.beta_hat);
        self.beta_hat = next;
        self.iter += 1;
        Ok(self.last_delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmTracePoint {
    pub iter: usize,
    pub delta: f64,
    pub loglik: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmOutcome {
    pub beta_hat: ChannelParams,
    pub iterations: usize,
    pub trace: Vec<EmTracePoint>,
}

/// Runs EM with the symbols held fixed until the parameter change drops
/// below `eps` or `t_max` iterations have run.
pub fn run_em(
    received: &[Complex64],
    symbols: &SymbolFrame,
    init: &ChannelParams,
    config: &EstimatorConfig,
) -> Result<EmOutcome> {
    config.validate()?;
    if received.len() != symbols.len() {
        return Err(BerdError::LengthMismatch {
            expected: received.len(),
            actual: symbols.len(),
        });
    }
    let mut state = EmState::new(init.clone(), &config.noise_split)?;
    let mut trace = Vec::new();
    while state.iter < config.t_max {
        let delta = state.step(received, symbols)?;
        trace.push(EmTracePoint {
            iter: state.iter,
            delta,
            loglik: log_likelihood_row(received, &state.beta_hat, symbols),
        });
        if delta < config.eps {
            break;
        }
    }
    Ok(EmOutcome {
        beta_hat: state.beta_hat,
        iterations: state.iter,
        trace,
    })
}

pub fn write_trace_csv<W: Write>(trace: &[EmTracePoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "iter,delta,loglik")?;
    for p in trace {
        writeln!(out, "{},{},{}", p.iter, p.delta, p.loglik)?;
    }
    Ok(())
}

fn uniform_half_open<R: Rng + ?Sized>(rng: &mut R, upper: f64) -> f64 {
    // (0, upper]
    upper * (1.0 - rng.random::<f64>())
}

/// Truth with uniform bias: gains on `(0, a+da]`, phases on
/// `[phi-dphi, phi+dphi]`, noise power on `(0, s2+ds]`.
pub fn init_biased_truth<R: Rng + ?Sized>(
    truth: Option<&ChannelParams>,
    rng: &mut R,
    deltas: BiasDeltas,
) -> Result<ChannelParams> {
    let truth = truth.ok_or(BerdError::MissingTruth)?;
    let gains = truth
        .gains
        .iter()
        .map(|&a| uniform_half_open(rng, a + deltas.gain))
        .collect();
    let phases = truth
        .phases
        .iter()
        .map(|&p| wrap_to_tau(p + deltas.phase * (2.0 * rng.random::<f64>() - 1.0)))
        .collect();
    let noise_power = uniform_half_open(rng, truth.noise_power + deltas.noise);
    Ok(ChannelParams {
        gains,
        phases,
        noise_power,
    })
}

/// `m4(0,0,0,k) = (1/N) sum_j r_j^3 r_{j+k}`, truncated at the frame end.
pub fn fourth_moment(received: &[Complex64], lag: usize) -> Complex64 {
    let n = received.len();
    let sum: Complex64 = (0..n.saturating_sub(lag))
        .map(|j| received[j].powu(3) * received[j + lag])
        .sum();
    sum / n as f64
}

/// Normalised taps `h_l = m4(0,0,0,l) / m4(0,0,0,0)`; `h_0 = 1`. Returns all
/// zero trailing taps when the denominator vanishes.
pub fn moment_taps(received: &[Complex64], n_paths: usize) -> Vec<Complex64> {
    let denom = fourth_moment(received, 0);
    (0..n_paths)
        .map(|l| {
            if l == 0 {
                Complex64::new(1.0, 0.0)
            } else if denom.norm() < 1e-12 {
                Complex64::new(0.0, 0.0)
            } else {
                fourth_moment(received, l) / denom
            }
        })
        .collect()
}

/// Noise-power candidates `step, 2 step, ...` below the received power; the
/// candidate maximising the log-likelihood of the soft symbols produced by
/// the equaliser at that noise power wins.
pub fn noise_grid_search(
    received: &[Complex64],
    taps: &[Complex64],
    step: f64,
    constellation: &Constellation,
) -> Result<f64> {
    let power = received.iter().map(|x| x.norm_sqr()).sum::<f64>() / received.len() as f64;
    let mut candidates: Vec<f64> = (1..)
        .map(|k| k as f64 * step)
        .take_while(|&s| s < power)
        .collect();
    if candidates.is_empty() {
        candidates.push(0.5 * power.max(NOISE_FLOOR));
    }
    let row = [received.to_vec()];
    let mut best = (f64::NEG_INFINITY, candidates[0]);
    for s2 in candidates {
        let beta = ChannelParams::from_taps(taps, s2)?;
        let grid = bayes_equalize(&row, std::slice::from_ref(&beta), constellation)?;
        let ll = log_likelihood_row(received, &beta, grid.soft_symbols());
        if ll > best.0 {
            best = (ll, s2);
        }
    }
    Ok(best.1)
}

pub fn init_moment_based(
    received: &[Complex64],
    n_paths: usize,
    step: f64,
    constellation: &Constellation,
) -> Result<ChannelParams> {
    if received.len() < n_paths || n_paths == 0 {
        return Err(BerdError::InvalidParameter(format!(
            "{} samples for {n_paths} paths",
            received.len()
        )));
    }
    let taps = moment_taps(received, n_paths);
    let noise = noise_grid_search(received, &taps, step, constellation)?;
    ChannelParams::from_taps(&taps, noise)
}

/// `G_{lm} = sum_j conj(s_{j-l}) s_{j-m}`.
pub fn gram(symbols: &SymbolFrame, n_paths: usize) -> DMatrix<Complex64> {
    let n = symbols.len();
    DMatrix::from_fn(n_paths, n_paths, |l, m| {
        (0..n)
            .map(|j| symbols.delayed(j, l).conj() * symbols.delayed(j, m))
            .sum()
    })
}

fn cross(symbols: &SymbolFrame, received: &[Complex64], n_paths: usize) -> DVector<Complex64> {
    DVector::from_fn(n_paths, |l, _| {
        received
            .iter()
            .enumerate()
            .map(|(j, r)| symbols.delayed(j, l).conj() * r)
            .sum()
    })
}

#[derive(Debug, Clone)]
pub struct ConvergenceDiagnostics {
    /// Jacobian of the EM map on the complex taps.
    pub u: DMatrix<Complex64>,
    /// Largest eigenvalue magnitude of `u`.
    pub spectral_radius: f64,
}

/// `U = I - diag(w_l / P_l) G`, the linear rate of the EM tap iteration
/// around its fixed point. Frozen paths (`P_l = 0`) contribute eigenvalue 1.
pub fn convergence_matrix(
    symbols: &SymbolFrame,
    noise_split: &[f64],
) -> Result<ConvergenceDiagnostics> {
    let l = noise_split.len();
    if symbols.energy() == 0.0 {
        return Err(BerdError::InvalidParameter("symbol energy is zero".into()));
    }
    let g = gram(symbols, l);
    let d: Vec<f64> = (0..l)
        .map(|k| {
            let p = g[(k, k)].re;
            if p > 0.0 {
                noise_split[k] / p
            } else {
                0.0
            }
        })
        .collect();
    let u = DMatrix::from_fn(l, l, |a, b| {
        let id = if a == b { 1.0 } else { 0.0 };
        Complex64::new(id, 0.0) - g[(a, b)] * d[a]
    });
    let sym = DMatrix::from_fn(l, l, |a, b| g[(a, b)] * (d[a] * d[b]).sqrt());
    let eig = nalgebra::SymmetricEigen::new(sym);
    let spectral_radius = eig
        .eigenvalues
        .iter()
        .map(|&lambda| (1.0 - lambda).abs())
        .fold(0.0, f64::max);
    Ok(ConvergenceDiagnostics { u, spectral_radius })
}

fn check_pilot_shapes(received: &[Complex64], symbols: &SymbolFrame, n_paths: usize) -> Result<()> {
    if received.len() != symbols.len() {
        return Err(BerdError::LengthMismatch {
            expected: symbols.len(),
            actual: received.len(),
        });
    }
    if n_paths == 0 || received.len() < n_paths {
        return Err(BerdError::InvalidParameter(format!(
            "{} samples for {n_paths} paths",
            received.len()
        )));
    }
    Ok(())
}

fn params_with_residual_noise(
    taps: &[Complex64],
    received: &[Complex64],
    symbols: &SymbolFrame,
) -> Result<ChannelParams> {
    let noise = residual_energy(taps, received, symbols.symbols()) / received.len() as f64;
    ChannelParams::from_taps(taps, noise.max(NOISE_FLOOR))
}

/// Least-squares taps with every symbol known; noise power from the residual.
pub fn pilot_zf(
    received: &[Complex64],
    symbols: &SymbolFrame,
    n_paths: usize,
) -> Result<ChannelParams> {
    check_pilot_shapes(received, symbols, n_paths)?;
    let g = gram(symbols, n_paths);
    let b = cross(symbols, received, n_paths);
    let rank = g.clone().svd(false, false).rank(1e-12);
    if rank < n_paths {
        return Err(BerdError::RankDeficient {
            rank,
            rows: n_paths,
        });
    }
    let h = g.lu().solve(&b).ok_or(BerdError::RankDeficient {
        rank,
        rows: n_paths,
    })?;
    params_with_residual_noise(h.as_slice(), received, symbols)
}

/// Linear MMSE taps under a diagonal Gaussian prior:
/// `h = m + C (G C + s2 I)^{-1} (b - G m)`.
pub fn pilot_lmmse(
    received: &[Complex64],
    symbols: &SymbolFrame,
    prior_mean: &[Complex64],
    prior_var: &[f64],
    noise_power: f64,
) -> Result<ChannelParams> {
    let l = prior_mean.len();
    check_pilot_shapes(received, symbols, l)?;
    if prior_var.len() != l {
        return Err(BerdError::LengthMismatch {
            expected: l,
            actual: prior_var.len(),
        });
    }
    if !(noise_power > 0.0) {
        return Err(BerdError::InvalidParameter(format!(
            "noise power {noise_power}"
        )));
    }
    let g = gram(symbols, l);
    let b = cross(symbols, received, l);
    let m = DVector::from_column_slice(prior_mean);
    let c = DMatrix::from_diagonal(&DVector::from_fn(l, |k, _| {
        Complex64::new(prior_var[k], 0.0)
    }));
    let a = &g * &c + DMatrix::identity(l, l) * Complex64::new(noise_power, 0.0);
    let rhs = b - &g * &m;
    let x = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| BerdError::InvalidParameter("singular LMMSE system".into()))?;
    let h = m + c * x;
    params_with_residual_noise(h.as_slice(), received, symbols)
}
