//! Soft-information detection: sequential Bayes equalisation, soft
//! demodulation, decoding, hard decision and regeneration of the symbols.

use num_complex::Complex64;

use crate::channel::ChannelParams;
use crate::error::{BerdError, Result};
use crate::ldpc::{bp_decode, clamp_llr, LinearBlockCode, LlrVector};
use crate::modem::{Constellation, SymbolFrame};

/// Posteriors `rho_{m,j}` of every constellation point for every symbol,
/// together with the posterior-mean symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrid {
    probs: Vec<f64>,
    n_points: usize,
    soft: SymbolFrame,
}

impl PosteriorGrid {
    pub fn n_symbols(&self) -> usize {
        self.soft.len()
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Posterior over the points for symbol `j` (0-based).
    pub fn column(&self, j: usize) -> &[f64] {
        &self.probs[j * self.n_points..(j + 1) * self.n_points]
    }

    pub fn soft_symbols(&self) -> &SymbolFrame {
        &self.soft
    }

    /// Mean Shannon entropy (nats) of the columns.
    pub fn mean_entropy(&self) -> f64 {
        let total: f64 = self
            .probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum();
        total / self.n_symbols() as f64
    }

    /// Builds a grid from explicit columns (each of length |S|).
    pub fn from_columns(columns: &[Vec<f64>], constellation: &Constellation) -> Result<Self> {
        let size = constellation.size();
        let mut probs = Vec::with_capacity(columns.len() * size);
        let mut soft = Vec::with_capacity(columns.len());
        for col in columns {
            soft.push(constellation.soft_symbol(col)?);
            probs.extend_from_slice(col);
        }
        Ok(PosteriorGrid {
            probs,
            n_points: size,
            soft: SymbolFrame::new(soft),
        })
    }
}

fn check_inputs(rows: &[Vec<Complex64>], betas: &[ChannelParams]) -> Result<usize> {
    let Some(first) = rows.first() else {
        return Err(BerdError::InvalidParameter("no received rows".into()));
    };
    if betas.len() != rows.len() {
        return Err(BerdError::LengthMismatch {
            expected: rows.len(),
            actual: betas.len(),
        });
    }
    let n = first.len();
    if let Some(r) = rows.iter().find(|r| r.len() != n) {
        return Err(BerdError::LengthMismatch {
            expected: n,
            actual: r.len(),
        });
    }
    for b in betas {
        if !(b.noise_power > 0.0) || !b.noise_power.is_finite() {
            return Err(BerdError::InvalidParameter(format!(
                "noise power {}",
                b.noise_power
            )));
        }
        if b.gains.iter().chain(&b.phases).any(|x| !x.is_finite()) {
            return Err(BerdError::InvalidParameter(
                "non-finite channel estimate".into(),
            ));
        }
    }
    Ok(n)
}

/// Forward pass over the frame. For symbol `j` the interference of earlier
/// symbols uses the posterior means already computed in this pass, and the
/// per-point likelihoods of all receivers are multiplied (uniform prior).
pub fn bayes_equalize(
    rows: &[Vec<Complex64>],
    betas: &[ChannelParams],
    constellation: &Constellation,
) -> Result<PosteriorGrid> {
    let n = check_inputs(rows, betas)?;
    let size = constellation.size();
    let taps: Vec<Vec<Complex64>> = betas.iter().map(ChannelParams::taps).collect();
    let inv_noise: Vec<f64> = betas.iter().map(|b| 1.0 / b.noise_power).collect();
    // leading tap times each point, per receiver
    let lead: Vec<Vec<Complex64>> = taps
        .iter()
        .map(|h| constellation.points().iter().map(|mu| h[0] * mu).collect())
        .collect();

    let mut probs = vec![0.0; n * size];
    let mut soft = Vec::with_capacity(n);
    let mut metric = vec![0.0; size];
    let mut target = vec![Complex64::new(0.0, 0.0); rows.len()];
    for j in 0..n {
        for (k, h) in taps.iter().enumerate() {
            let isi: Complex64 = h
                .iter()
                .enumerate()
                .skip(1)
                .take_while(|(l, _)| *l <= j)
                .map(|(l, hl)| hl * soft[j - l])
                .sum();
            target[k] = rows[k][j] - isi;
        }
        for (m, slot) in metric.iter_mut().enumerate() {
            *slot = -(0..rows.len())
                .map(|k| (target[k] - lead[k][m]).norm_sqr() * inv_noise[k])
                .sum::<f64>();
        }
        let peak = metric.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let col = &mut probs[j * size..(j + 1) * size];
        let mut total = 0.0;
        for (p, &x) in col.iter_mut().zip(&metric) {
            *p = (x - peak).exp();
            total += *p;
        }
        for p in col.iter_mut() {
            *p /= total;
        }
        soft.push(constellation.mean_unchecked(col));
    }
    Ok(PosteriorGrid {
        probs,
        n_points: size,
        soft: SymbolFrame::new(soft),
    })
}

/// `lambda_{j,g} = ln(sum_{A_g} rho / sum_{A_g^c} rho)`, clamped, in codeword
/// bit order (symbol-major, label bit 1 first).
pub fn soft_demodulate(grid: &PosteriorGrid, constellation: &Constellation) -> LlrVector {
    let bps = constellation.bits_per_symbol();
    let mut out = Vec::with_capacity(grid.n_symbols() * bps);
    for j in 0..grid.n_symbols() {
        let col = grid.column(j);
        for zero_set in constellation.zero_sets() {
            let p0: f64 = zero_set.iter().map(|&m| col[m]).sum();
            let p1 = (col.iter().sum::<f64>() - p0).max(0.0);
            out.push(clamp_llr(p0.ln() - p1.ln()));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// Decided message bits, all codewords of the frame concatenated.
    pub bits_hat: Vec<u8>,
    /// Re-encoded codewords.
    pub codewords_hat: Vec<u8>,
    /// Demodulator output used as the syndrome-LLR input.
    pub codeword_llrs: LlrVector,
    /// Extrinsic LLRs of the message bits.
    pub message_llrs: LlrVector,
    /// Re-modulated symbols.
    pub symbols_hat: SymbolFrame,
    pub grid: PosteriorGrid,
    /// Codewords whose decoder output satisfied every check.
    pub decoded_codewords: usize,
}

/// Number of whole codewords a frame of `n_symbols` carries, if it fits.
pub fn codewords_in_frame(
    n_symbols: usize,
    constellation: &Constellation,
    code: &LinearBlockCode,
) -> Option<usize> {
    let bits = n_symbols * constellation.bits_per_symbol();
    (bits > 0 && bits % code.n() == 0).then(|| bits / code.n())
}

/// One pass of equalise, demodulate, decode, decide and regenerate.
pub fn detect_and_regenerate(
    rows: &[Vec<Complex64>],
    betas: &[ChannelParams],
    constellation: &Constellation,
    code: &LinearBlockCode,
    bp_iters: usize,
) -> Result<DetectionResult> {
    let n_symbols = rows.first().map_or(0, Vec::len);
    if codewords_in_frame(n_symbols, constellation, code).is_none() {
        return Err(BerdError::Infeasible(format!(
            "{}/{} with {n_symbols} symbols",
            constellation.name(),
            code.id()
        )));
    }
    let grid = bayes_equalize(rows, betas, constellation)?;
    let llr_out = soft_demodulate(&grid, constellation);
    let mut bits_hat = Vec::new();
    let mut message_llrs = Vec::new();
    let mut codewords_hat = Vec::with_capacity(llr_out.len());
    let mut decoded = 0;
    for block in llr_out.chunks(code.n()) {
        let bp = bp_decode(code, block, bp_iters);
        decoded += usize::from(bp.converged);
        for &pos in code.info_positions() {
            let extrinsic = bp.posterior[pos] - block[pos];
            message_llrs.push(extrinsic);
        }
        let start = bits_hat.len();
        bits_hat.extend(message_llrs[start..].iter().map(|&l| u8::from(!(l > 0.0))));
        codewords_hat.extend(code.encode(&bits_hat[start..])?);
    }
    let symbols_hat = constellation.modulate(&codewords_hat)?;
    Ok(DetectionResult {
        bits_hat,
        codewords_hat,
        codeword_llrs: llr_out,
        message_llrs,
        symbols_hat,
        grid,
        decoded_codewords: decoded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel, transmit};
    use crate::ldpc::{hamming_7_4, LinearBlockCode};
    use crate::modem::Modulation;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn vanishing_noise_gives_one_hot() {
        let con = Modulation::Qam16.constellation();
        let r = vec![con.points()[3], con.points()[9]];
        let beta = ChannelParams::identity(1e-6);
        let grid = bayes_equalize(&[r], &[beta], &con).unwrap();
        assert!((grid.column(0)[3] - 1.0).abs() < 1e-12);
        assert!((grid.column(1)[9] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equidistant_points_share_mass() {
        let con = Modulation::Qpsk.constellation();
        let p = con.points();
        let mid = (p[0] + p[1]) * 0.5;
        let grid = bayes_equalize(&[vec![mid]], &[ChannelParams::identity(0.7)], &con).unwrap();
        let col = grid.column(0);
        assert!((col[0] - col[1]).abs() < 1e-15);
        assert!((col.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    // Hand-rolled sequential oracle for two receivers, two paths and N = 3.
    #[test]
    fn matches_sequential_oracle() {
        let con = Modulation::Psk8.constellation();
        let betas = [
            ChannelParams::new(vec![1.0, 0.4], vec![0.2, 2.0], 0.5).unwrap(),
            ChannelParams::new(vec![0.8, 0.3], vec![1.0, 4.0], 0.9).unwrap(),
        ];
        let rows = vec![
            vec![c(0.3, 0.9), c(-0.7, 0.2), c(0.1, -1.1)],
            vec![c(0.5, -0.2), c(0.9, 0.4), c(-0.6, -0.3)],
        ];
        let grid = bayes_equalize(&rows, &betas, &con).unwrap();
        let mut past: Vec<Complex64> = Vec::new();
        for j in 0..3 {
            let mut w: Vec<f64> = con
                .points()
                .iter()
                .map(|mu| {
                    let mut e = 0.0;
                    for (row, b) in rows.iter().zip(&betas) {
                        let h = b.taps();
                        let mut y = h[0] * mu;
                        if j >= 1 {
                            y += h[1] * past[j - 1];
                        }
                        e += (row[j] - y).norm_sqr() / b.noise_power;
                    }
                    (-e).exp()
                })
                .collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= total);
            for (a, b) in grid.column(j).iter().zip(&w) {
                assert!((a - b).abs() < 1e-12);
            }
            past.push(con.points().iter().zip(&w).map(|(m, p)| m * p).sum());
        }
    }

    #[test]
    fn nonpositive_noise_rejected() {
        let con = Modulation::Qpsk.constellation();
        let mut beta = ChannelParams::identity(1.0);
        beta.noise_power = 0.0;
        assert!(bayes_equalize(&[vec![c(1.0, 0.0)]], &[beta], &con).is_err());
    }

    #[test]
    fn demodulator_examples() {
        let con = Modulation::Qpsk.constellation();
        let uniform = PosteriorGrid::from_columns(&[vec![0.25; 4]], &con).unwrap();
        assert!(soft_demodulate(&uniform, &con)
            .iter()
            .all(|&l| l.abs() < 1e-15));

        let zero_label = (0..4).find(|&m| con.label(m) == vec![0, 0]).unwrap();
        let mut one_hot = vec![0.0; 4];
        one_hot[zero_label] = 1.0;
        let grid = PosteriorGrid::from_columns(&[one_hot], &con).unwrap();
        assert_eq!(soft_demodulate(&grid, &con), vec![30.0, 30.0]);

        let col = vec![0.7, 0.1, 0.1, 0.1];
        let grid = PosteriorGrid::from_columns(std::slice::from_ref(&col), &con).unwrap();
        let llr = soft_demodulate(&grid, &con);
        for g in 1..=2 {
            let p0: f64 = con.bit_zero_set(g).unwrap().iter().map(|&m| col[m]).sum();
            assert!((llr[g - 1] - (p0 / (1.0 - p0)).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn one_hot_llr_signs_follow_labels() {
        for m in Modulation::ALL {
            let con = m.constellation();
            for point in 0..con.size() {
                let mut col = vec![0.0; con.size()];
                col[point] = 1.0;
                let grid = PosteriorGrid::from_columns(&[col], &con).unwrap();
                let signs: Vec<u8> = soft_demodulate(&grid, &con)
                    .iter()
                    .map(|&l| u8::from(l < 0.0))
                    .collect();
                assert_eq!(signs, con.label(point));
            }
        }
    }

    #[test]
    fn noiseless_identity_round_trip() {
        let code = hamming_7_4();
        let con = Modulation::Qpsk.constellation();
        // 14 bits = 2 codewords = 7 QPSK symbols
        let msg = [1, 0, 1, 1, 0, 1, 1, 0];
        let cw = code.encode_blocks(&msg).unwrap();
        let s = con.modulate(&cw).unwrap();
        let beta = ChannelParams::identity(1e-6);
        let det = detect_and_regenerate(&[s.symbols().to_vec()], &[beta], &con, &code, 50).unwrap();
        assert_eq!(det.bits_hat, msg);
        assert_eq!(det.symbols_hat, s);
        assert_eq!(det.codewords_hat, cw);
        assert_eq!(det.decoded_codewords, 2);
    }

    #[test]
    fn infeasible_shape_rejected() {
        let code = hamming_7_4();
        let con = Modulation::Qpsk.constellation();
        let rows = vec![vec![c(1.0, 0.0); 5]];
        let err = detect_and_regenerate(&rows, &[ChannelParams::identity(1.0)], &con, &code, 5);
        assert!(matches!(err, Err(BerdError::Infeasible(_))));
    }

    #[test]
    fn zero_extrinsic_decides_one() {
        let code = hamming_7_4();
        let con = Modulation::Qpsk.constellation();
        // Received all zeros: every LLR is exactly 0, so is every extrinsic.
        let rows = vec![vec![c(0.0, 0.0); 7]];
        let det =
            detect_and_regenerate(&rows, &[ChannelParams::identity(1.0)], &con, &code, 5).unwrap();
        assert!(det.message_llrs.iter().all(|&l| l == 0.0));
        assert!(det.bits_hat.iter().all(|&b| b == 1));
    }

    #[test]
    fn regenerated_symbols_are_codewords() {
        let code = LinearBlockCode::load("ldpc_648_r12").unwrap();
        let con = Modulation::Qpsk.constellation();
        let mut rng = stream_rng(3, 0);
        let msg: Vec<u8> = (0..2 * code.q()).map(|_| rng.random_range(0..2)).collect();
        let s = con.modulate(&code.encode_blocks(&msg).unwrap()).unwrap();
        let p = draw_channel(&mut rng, 6, 0.1, true, 1.0).unwrap();
        let frame = transmit(&s, std::slice::from_ref(&p), &mut rng).unwrap();
        let det = detect_and_regenerate(&frame.samples, &[p], &con, &code, 50).unwrap();
        for cw in con.demap(&det.symbols_hat).chunks(code.n()) {
            assert!(code.is_codeword(cw));
        }
        for j in 0..det.grid.n_symbols() {
            assert!((det.grid.column(j).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn true_channel_decodes_at_ten_db() {
        let code = LinearBlockCode::load("ldpc_648_r12").unwrap();
        let con = Modulation::Qpsk.constellation();
        let mut errors = 0usize;
        for trial in 0..50 {
            let mut rng = stream_rng(4, trial);
            let msg: Vec<u8> = (0..2 * code.q()).map(|_| rng.random_range(0..2)).collect();
            let s = con.modulate(&code.encode_blocks(&msg).unwrap()).unwrap();
            let p = draw_channel(
                &mut rng,
                6,
                0.1,
                true,
                crate::channel::noise_power_from_snr_db(10.0),
            )
            .unwrap();
            let frame = transmit(&s, std::slice::from_ref(&p), &mut rng).unwrap();
            let det = detect_and_regenerate(&frame.samples, &[p], &con, &code, 50).unwrap();
            errors += det
                .bits_hat
                .iter()
                .zip(&msg)
                .filter(|(a, b)| a != b)
                .count();
        }
        let ber = errors as f64 / (50 * 2 * code.q()) as f64;
        assert!(ber < 1e-3, "{ber}");
    }
}
