//! Flat `key = value` scenario files.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{BerdError, Result};
use crate::estimator::{BiasDeltas, EstimatorConfig, InitMode, NoiseSplit};
use crate::mcs::{CandidateGrid, Theta};
use crate::modem::Modulation;
use crate::receiver::{Mode, ReceiverConfig};

fn parse(what: &'static str, detail: impl Into<String>) -> BerdError {
    BerdError::parse(what, detail)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TruthPolicy {
    /// Uniform over the feasible candidates, drawn per frame.
    Uniform,
    Fixed(Theta),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Benchmark {
    PerfectCsi,
    PerfectCsiTrueTheta,
    Zf,
    Lmmse,
}

impl Benchmark {
    pub const ALL: [Benchmark; 4] = [
        Benchmark::PerfectCsi,
        Benchmark::PerfectCsiTrueTheta,
        Benchmark::Zf,
        Benchmark::Lmmse,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Benchmark::PerfectCsi => "perfect_csi",
            Benchmark::PerfectCsiTrueTheta => "perfect_csi_true_theta",
            Benchmark::Zf => "zf",
            Benchmark::Lmmse => "lmmse",
        }
    }
}

impl FromStr for Benchmark {
    type Err = BerdError;

    fn from_str(s: &str) -> Result<Self> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.id() == s.trim())
            .ok_or_else(|| parse("benchmark", format!("unknown benchmark `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub modulations: Vec<Modulation>,
    pub codes: Vec<String>,
    pub truth: TruthPolicy,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub receivers: usize,
    pub paths: usize,
    pub tap_variance: f64,
    /// Unit leading tap with zero phase.
    pub fix_leading: bool,
    pub symbols: usize,
    pub init: InitMode,
    pub noise_split: NoiseSplit,
    pub seed: u64,
    pub mode: Mode,
    pub i_max: usize,
    pub eps: f64,
    pub t_max: usize,
    pub em_eps: f64,
    pub bp_iters: usize,
    pub iota: Option<usize>,
    pub benchmarks: Vec<Benchmark>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            modulations: Modulation::ALL.to_vec(),
            codes: [
                "ldpc_648_r12",
                "ldpc_648_r23",
                "ldpc_648_r34",
                "ldpc_648_r56",
            ]
            .map(String::from)
            .to_vec(),
            truth: TruthPolicy::Uniform,
            snr_db: (0..8).map(|i| -2.0 + 2.0 * i as f64).collect(),
            trials: 200,
            receivers: 1,
            paths: 6,
            tap_variance: 0.1,
            fix_leading: true,
            symbols: 648,
            init: InitMode::BiasedTruth(BiasDeltas::default()),
            noise_split: NoiseSplit::Uniform,
            seed: 1,
            mode: Mode::Single,
            i_max: 30,
            eps: 1e-3,
            t_max: 30,
            em_eps: 1e-3,
            bp_iters: 50,
            iota: None,
            benchmarks: Benchmark::ALL.to_vec(),
        }
    }
}

fn list<T: FromStr<Err = BerdError>>(v: &str) -> Result<Vec<T>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse())
        .collect()
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| parse("scenario", format!("bad value `{v}` for `{key}`")))
}

fn floats(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| num(key, s.trim())).collect()
}

/// `a:b:step` inclusive ranges or comma lists.
fn snr_grid(v: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = v.split(':').collect();
    match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step): (f64, f64, f64) =
                (num("snr_db", a)?, num("snr_db", b)?, num("snr_db", step)?);
            if !(step > 0.0) || b < a {
                return Err(parse("scenario", format!("bad SNR range `{v}`")));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| a + step * i as f64).collect())
        }
        _ => floats("snr_db", v),
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Scenario::default();
        let mut deltas = BiasDeltas::default();
        let mut init = "biased".to_string();
        let mut step = 0.05;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                parse("scenario", format!("line {}: expected key = value", no + 1))
            })?;
            let (key, v) = (key.trim(), value.trim());
            match key {
                "modulations" => s.modulations = list(v)?,
                "codes" => {
                    s.codes = v
                        .split(',')
                        .map(|c| c.trim().to_string())
                        .filter(|c| !c.is_empty())
                        .collect()
                }
                "truth" => {
                    s.truth = if v == "uniform" {
                        TruthPolicy::Uniform
                    } else {
                        TruthPolicy::Fixed(v.parse()?)
                    }
                }
                "snr_db" => s.snr_db = snr_grid(v)?,
                "trials" => s.trials = num(key, v)?,
                "receivers" => s.receivers = num(key, v)?,
                "paths" => s.paths = num(key, v)?,
                "tap_variance" => s.tap_variance = num(key, v)?,
                "fix_leading" => s.fix_leading = num(key, v)?,
                "symbols" => s.symbols = num(key, v)?,
                "init" => init = v.to_string(),
                "bias_gain" => deltas.gain = num(key, v)?,
                "bias_phase" => deltas.phase = num(key, v)?,
                "bias_phase_over_pi" => deltas.phase = num::<f64>(key, v)? * PI,
                "bias_noise" => deltas.noise = num(key, v)?,
                "moment_step" => step = num(key, v)?,
                "noise_split" => {
                    s.noise_split = if v == "uniform" {
                        NoiseSplit::Uniform
                    } else {
                        NoiseSplit::Custom(floats(key, v)?)
                    }
                }
                "seed" => s.seed = num(key, v)?,
                "mode" => s.mode = v.parse()?,
                "i_max" => s.i_max = num(key, v)?,
                "eps" => s.eps = num(key, v)?,
                "t_max" => s.t_max = num(key, v)?,
                "em_eps" => s.em_eps = num(key, v)?,
                "bp_iters" => s.bp_iters = num(key, v)?,
                "iota" => {
                    s.iota = if v == "full" {
                        None
                    } else {
                        Some(num(key, v)?)
                    }
                }
                "benchmarks" => s.benchmarks = if v == "none" { Vec::new() } else { list(v)? },
                other => {
                    return Err(parse(
                        "scenario",
                        format!("line {}: unknown key `{other}`", no + 1),
                    ))
                }
            }
        }
        s.init = match init.as_str() {
            "biased" => InitMode::BiasedTruth(deltas),
            "moment" => InitMode::MomentBased { step },
            other => return Err(parse("scenario", format!("unknown init `{other}`"))),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BerdError::io(path, e))?;
        Self::parse(&text)
    }

    /// Serialises every field; `parse(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let join = |v: Vec<String>| v.join(",");
        let _ = writeln!(
            out,
            "modulations = {}",
            join(self.modulations.iter().map(|m| m.to_string()).collect())
        );
        let _ = writeln!(out, "codes = {}", self.codes.join(","));
        let _ = writeln!(
            out,
            "truth = {}",
            match &self.truth {
                TruthPolicy::Uniform => "uniform".to_string(),
                TruthPolicy::Fixed(t) => t.to_string(),
            }
        );
        let _ = writeln!(
            out,
            "snr_db = {}",
            join(self.snr_db.iter().map(|x| x.to_string()).collect())
        );
        let _ = writeln!(out, "trials = {}", self.trials);
        let _ = writeln!(out, "receivers = {}", self.receivers);
        let _ = writeln!(out, "paths = {}", self.paths);
        let _ = writeln!(out, "tap_variance = {}", self.tap_variance);
        let _ = writeln!(out, "fix_leading = {}", self.fix_leading);
        let _ = writeln!(out, "symbols = {}", self.symbols);
        match self.init {
            InitMode::BiasedTruth(d) => {
                let _ = writeln!(out, "init = biased");
                let _ = writeln!(out, "bias_gain = {}", d.gain);
                let _ = writeln!(out, "bias_phase = {}", d.phase);
                let _ = writeln!(out, "bias_noise = {}", d.noise);
            }
            InitMode::MomentBased { step } => {
                let _ = writeln!(out, "init = moment");
                let _ = writeln!(out, "moment_step = {step}");
            }
        }
        let _ = writeln!(
            out,
            "noise_split = {}",
            match &self.noise_split {
                NoiseSplit::Uniform => "uniform".to_string(),
                NoiseSplit::Custom(w) => join(w.iter().map(|x| x.to_string()).collect()),
            }
        );
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "mode = {}", self.mode);
        let _ = writeln!(out, "i_max = {}", self.i_max);
        let _ = writeln!(out, "eps = {}", self.eps);
        let _ = writeln!(out, "t_max = {}", self.t_max);
        let _ = writeln!(out, "em_eps = {}", self.em_eps);
        let _ = writeln!(out, "bp_iters = {}", self.bp_iters);
        let _ = writeln!(
            out,
            "iota = {}",
            self.iota.map_or("full".to_string(), |i| i.to_string())
        );
        let _ = writeln!(
            out,
            "benchmarks = {}",
            if self.benchmarks.is_empty() {
                "none".to_string()
            } else {
                join(self.benchmarks.iter().map(|b| b.id().to_string()).collect())
            }
        );
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(BerdError::InvalidParameter(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be >= 1");
        }
        if self.snr_db.is_empty() {
            return bad("empty SNR grid");
        }
        if self.receivers == 0 || self.paths == 0 || self.symbols == 0 {
            return bad("receivers, paths and symbols must be >= 1");
        }
        if !(self.tap_variance > 0.0) {
            return bad("tap variance must be positive");
        }
        if self.mode == Mode::Single && self.receivers != 1 {
            return bad("single mode needs receivers = 1");
        }
        self.receiver_config(self.grid()?)?.validate()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<CandidateGrid> {
        CandidateGrid::load(&self.modulations, &self.codes)
    }

    pub fn receiver_config(&self, candidates: CandidateGrid) -> Result<ReceiverConfig> {
        Ok(ReceiverConfig {
            i_max: self.i_max,
            eps: self.eps,
            mode: self.mode,
            estimator: EstimatorConfig {
                t_max: self.t_max,
                eps: self.em_eps,
                noise_split: self.noise_split.clone(),
                init_mode: self.init,
            },
            candidates,
            iota: self.iota,
            bp_iters: self.bp_iters,
            n_paths: self.paths,
            init_seed: 0,
        })
    }
}
