//! Multipath channel model with circularly symmetric complex Gaussian noise,
//! for one or several receivers.
//!
//! `r_{k,j} = sum_l a_{k,l} e^{i phi_{k,l}} s_{j-l} + v_{k,j}` with
//! `s_{j-l} = 0` before the start of the frame.

use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{BerdError, Result};
use crate::modem::{Modulation, SymbolFrame};

/// Per-receiver channel: path gains, phases in `[0, 2pi)` and noise power.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub gains: Vec<f64>,
    pub phases: Vec<f64>,
    pub noise_power: f64,
}

impl ChannelParams {
    pub fn new(gains: Vec<f64>, phases: Vec<f64>, noise_power: f64) -> Result<Self> {
        if gains.len() != phases.len() || gains.is_empty() {
            return Err(BerdError::InvalidParameter(format!(
                "{} gains and {} phases",
                gains.len(),
                phases.len()
            )));
        }
        if gains.iter().any(|&a| !(a >= 0.0) || !a.is_finite()) {
            return Err(BerdError::InvalidParameter(
                "gains must be finite and >= 0".into(),
            ));
        }
        if !(noise_power > 0.0) || !noise_power.is_finite() {
            return Err(BerdError::InvalidParameter(format!(
                "noise power {noise_power}"
            )));
        }
        let phases = phases.into_iter().map(wrap_to_tau).collect();
        Ok(ChannelParams {
            gains,
            phases,
            noise_power,
        })
    }

    pub fn from_taps(taps: &[Complex64], noise_power: f64) -> Result<Self> {
        Self::new(
            taps.iter().map(|h| h.norm()).collect(),
            taps.iter().map(|h| h.arg()).collect(),
            noise_power,
        )
    }

    /// Single unit tap.
    pub fn identity(noise_power: f64) -> Self {
        ChannelParams {
            gains: vec![1.0],
            phases: vec![0.0],
            noise_power,
        }
    }

    pub fn n_paths(&self) -> usize {
        self.gains.len()
    }

    pub fn taps(&self) -> Vec<Complex64> {
        self.gains
            .iter()
            .zip(&self.phases)
            .map(|(&a, &p)| Complex64::from_polar(a, p))
            .collect()
    }

    /// Noiseless channel output for `symbols`.
    pub fn convolve(&self, symbols: &[Complex64]) -> Vec<Complex64> {
        convolve(&self.taps(), symbols)
    }

    /// `sum_j |r_j - (h * s)_j|^2`.
    pub fn residual_energy(&self, received: &[Complex64], symbols: &[Complex64]) -> f64 {
        residual_energy(&self.taps(), received, symbols)
    }

    /// Squared parameter distance with phase differences wrapped to `(-pi, pi]`.
    pub fn distance_sq(&self, other: &ChannelParams) -> f64 {
        let da: f64 = self
            .gains
            .iter()
            .zip(&other.gains)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let dp: f64 = self
            .phases
            .iter()
            .zip(&other.phases)
            .map(|(a, b)| wrap_to_pi(a - b).powi(2))
            .sum();
        da + dp + (self.noise_power - other.noise_power).powi(2)
    }

    /// `||h_self - h_other||^2` over complex taps.
    pub fn tap_error(&self, other: &ChannelParams) -> f64 {
        self.taps()
            .iter()
            .zip(other.taps())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum()
    }
}

pub fn convolve(taps: &[Complex64], symbols: &[Complex64]) -> Vec<Complex64> {
    (0..symbols.len())
        .map(|j| {
            taps.iter()
                .enumerate()
                .take(j + 1)
                .map(|(l, h)| h * symbols[j - l])
                .sum()
        })
        .collect()
}

pub fn residual_energy(taps: &[Complex64], received: &[Complex64], symbols: &[Complex64]) -> f64 {
    received
        .iter()
        .enumerate()
        .map(|(j, r)| {
            let y: Complex64 = taps
                .iter()
                .enumerate()
                .take(j + 1)
                .map(|(l, h)| h * symbols[j - l])
                .sum();
            (r - y).norm_sqr()
        })
        .sum()
}

/// Maps an angle into `[0, 2pi)`.
pub fn wrap_to_tau(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y >= TAU {
        0.0
    } else {
        y
    }
}

/// Maps an angle into `(-pi, pi]`.
pub fn wrap_to_pi(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

pub fn noise_power_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

pub fn snr_db_from_noise_power(noise_power: f64) -> f64 {
    -10.0 * noise_power.log10()
}

/// Draws a CSCG sample with variance `var`.
pub fn cscg<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Draws `L` taps: CSCG with variance `tap_variance`, except that
/// `fix_leading` pins the first tap to 1.
pub fn draw_channel<R: Rng + ?Sized>(
    rng: &mut R,
    n_paths: usize,
    tap_variance: f64,
    fix_leading: bool,
    noise_power: f64,
) -> Result<ChannelParams> {
    if n_paths == 0 {
        return Err(BerdError::InvalidParameter("at least one path".into()));
    }
    if !(tap_variance > 0.0) {
        return Err(BerdError::InvalidParameter(format!(
            "tap variance {tap_variance}"
        )));
    }
    let taps: Vec<Complex64> = (0..n_paths)
        .map(|l| {
            if l == 0 && fix_leading {
                Complex64::new(1.0, 0.0)
            } else {
                cscg(rng, tap_variance)
            }
        })
        .collect();
    ChannelParams::from_taps(&taps, noise_power)
}

/// Transmitted MCS and payload, known only in simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct TxRecord {
    pub modulation: Modulation,
    pub code_id: String,
    pub message: Vec<u8>,
    pub symbols: SymbolFrame,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameTruth {
    pub params: Vec<ChannelParams>,
    pub tx: Option<TxRecord>,
}

/// Samples of `K` receivers, one row each, plus optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedFrame {
    pub samples: Vec<Vec<Complex64>>,
    pub truth: Option<FrameTruth>,
}

impl ReceivedFrame {
    pub fn new(samples: Vec<Vec<Complex64>>) -> Result<Self> {
        let n = samples.first().map_or(0, Vec::len);
        if n == 0 {
            return Err(BerdError::InvalidParameter("empty frame".into()));
        }
        if let Some(row) = samples.iter().find(|r| r.len() != n) {
            return Err(BerdError::LengthMismatch {
                expected: n,
                actual: row.len(),
            });
        }
        Ok(ReceivedFrame {
            samples,
            truth: None,
        })
    }

    pub fn n_receivers(&self) -> usize {
        self.samples.len()
    }

    pub fn n_symbols(&self) -> usize {
        self.samples[0].len()
    }

    /// Frame restricted to receiver `k`.
    pub fn receiver(&self, k: usize) -> ReceivedFrame {
        ReceivedFrame {
            samples: vec![self.samples[k].clone()],
            truth: self.truth.as_ref().map(|t| FrameTruth {
                params: vec![t.params[k].clone()],
                tx: t.tx.clone(),
            }),
        }
    }

    pub fn true_params(&self) -> Result<&[ChannelParams]> {
        self.truth
            .as_ref()
            .map(|t| t.params.as_slice())
            .ok_or(BerdError::MissingTruth)
    }
}

/// Passes `symbols` through each receiver's channel and adds noise. Noise is
/// drawn receiver by receiver, sample by sample, real part first.
pub fn transmit<R: Rng + ?Sized>(
    symbols: &SymbolFrame,
    params: &[ChannelParams],
    rng: &mut R,
) -> Result<ReceivedFrame> {
    let Some(first) = params.first() else {
        return Err(BerdError::InvalidParameter("no receivers".into()));
    };
    if let Some(p) = params.iter().find(|p| p.n_paths() != first.n_paths()) {
        return Err(BerdError::LengthMismatch {
            expected: first.n_paths(),
            actual: p.n_paths(),
        });
    }
    if symbols.is_empty() {
        return Err(BerdError::InvalidParameter("empty symbol frame".into()));
    }
    let samples = params
        .iter()
        .map(|p| {
            let mut row = p.convolve(symbols.symbols());
            for r in &mut row {
                *r += cscg(rng, p.noise_power);
            }
            row
        })
        .collect();
    Ok(ReceivedFrame {
        samples,
        truth: Some(FrameTruth {
            params: params.to_vec(),
            tx: None,
        }),
    })
}

/// Writes the frame in the little-endian dump layout: `u32` K, N, L (L = 0
/// when no truth is attached), then K*N `(re, im)` f64 pairs row by row,
/// then per receiver L gains, L phases and the noise power.
pub fn dump_frame<W: Write>(frame: &ReceivedFrame, mut out: W) -> std::io::Result<()> {
    let l = frame.truth.as_ref().map_or(0, |t| t.params[0].n_paths());
    for v in [frame.n_receivers(), frame.n_symbols(), l] {
        out.write_all(&(v as u32).to_le_bytes())?;
    }
    for row in &frame.samples {
        for x in row {
            out.write_all(&x.re.to_le_bytes())?;
            out.write_all(&x.im.to_le_bytes())?;
        }
    }
    if let Some(t) = &frame.truth {
        for p in &t.params {
            for v in p.gains.iter().chain(&p.phases).chain([&p.noise_power]) {
                out.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn load_frame<R: Read>(mut input: R) -> Result<ReceivedFrame> {
    let err = |d: &str| BerdError::parse("frame dump", d);
    let mut u32buf = [0u8; 4];
    let mut header = [0usize; 3];
    for h in &mut header {
        input
            .read_exact(&mut u32buf)
            .map_err(|_| err("truncated header"))?;
        *h = u32::from_le_bytes(u32buf) as usize;
    }
    let [k, n, l] = header;
    if k == 0 || n == 0 {
        return Err(err("empty frame"));
    }
    let mut f64buf = [0u8; 8];
    let mut next = || -> Result<f64> {
        input
            .read_exact(&mut f64buf)
            .map_err(|_| err("truncated body"))?;
        Ok(f64::from_le_bytes(f64buf))
    };
    let mut samples = Vec::with_capacity(k);
    for _ in 0..k {
        let mut row = Vec::with_capacity(n);
        for _ in 0..n {
            let re = next()?;
            row.push(Complex64::new(re, next()?));
        }
        samples.push(row);
    }
    let mut frame = ReceivedFrame::new(samples)?;
    if l > 0 {
        let mut params = Vec::with_capacity(k);
        for _ in 0..k {
            let gains = (0..l).map(|_| next()).collect::<Result<Vec<_>>>()?;
            let phases = (0..l).map(|_| next()).collect::<Result<Vec<_>>>()?;
            params.push(ChannelParams::new(gains, phases, next()?)?);
        }
        frame.truth = Some(FrameTruth { params, tx: None });
    }
    Ok(frame)
}

pub fn dump_frame_file(frame: &ReceivedFrame, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| BerdError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    dump_frame(frame, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| BerdError::io(path, e))
}

pub fn load_frame_file(path: &Path) -> Result<ReceivedFrame> {
    let file = std::fs::File::open(path).map_err(|e| BerdError::io(path, e))?;
    load_frame(std::io::BufReader::new(file))
}
