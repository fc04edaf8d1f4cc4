//! LLRs of parity-check satisfaction (syndrome a-posteriori probabilities).

use super::{clamp_llr, LinearBlockCode};
use crate::error::{BerdError, Result};

const TANH_BOUND: f64 = 1.0 - 1e-12;

/// LLR that the XOR of independent bits with the given LLRs is zero:
/// `2 atanh(prod tanh(l/2))`.
pub fn parity_llr(llrs: impl IntoIterator<Item = f64>) -> f64 {
    let prod: f64 = llrs
        .into_iter()
        .map(|l| (0.5 * clamp_llr(l)).tanh())
        .product();
    2.0 * prod.clamp(-TANH_BOUND, TANH_BOUND).atanh()
}

/// `γ_i` for the 1-based check index `i` of one codeword.
pub fn syndrome_llr(code: &LinearBlockCode, psi: &[f64], i: usize) -> Result<f64> {
    check_len(code, psi)?;
    let m = code.n_checks();
    if i == 0 || i > m {
        return Err(BerdError::IndexOutOfRange { index: i, max: m });
    }
    Ok(parity_llr(
        code.row_supports()[i - 1].iter().map(|&c| psi[c]),
    ))
}

/// `γ_1 .. γ_{n-q}` for one codeword.
pub fn syndrome_llrs(code: &LinearBlockCode, psi: &[f64]) -> Result<Vec<f64>> {
    check_len(code, psi)?;
    Ok(row_llrs(code, psi))
}

fn row_llrs(code: &LinearBlockCode, psi: &[f64]) -> Vec<f64> {
    code.row_supports()
        .iter()
        .map(|row| parity_llr(row.iter().map(|&c| psi[c])))
        .collect()
}

/// `Γ(ι)`: mean of the first `ι` syndrome LLRs of one codeword.
pub fn average_syndrome_llr(code: &LinearBlockCode, psi: &[f64], iota: usize) -> Result<f64> {
    check_len(code, psi)?;
    let m = code.n_checks();
    if iota == 0 || iota > m {
        return Err(BerdError::IndexOutOfRange {
            index: iota,
            max: m,
        });
    }
    let rows = &code.row_supports()[..iota];
    let sum: f64 = rows
        .iter()
        .map(|row| parity_llr(row.iter().map(|&c| psi[c])))
        .sum();
    Ok(sum / iota as f64)
}

/// `Γ(1) .. Γ(n-q)` for a frame of one or more concatenated codewords.
/// Each `γ_i` is first averaged across the codewords of the frame.
pub fn gamma_prefix(code: &LinearBlockCode, psi: &[f64]) -> Result<Vec<f64>> {
    let n = code.n();
    if psi.is_empty() || psi.len() % n != 0 {
        return Err(BerdError::NotMultiple {
            len: psi.len(),
            multiple: n,
        });
    }
    let blocks = psi.len() / n;
    let mut gamma = vec![0.0; code.n_checks()];
    for block in psi.chunks(n) {
        for (g, v) in gamma.iter_mut().zip(row_llrs(code, block)) {
            *g += v;
        }
    }
    let mut acc = 0.0;
    Ok(gamma
        .iter()
        .enumerate()
        .map(|(i, g)| {
            acc += g / blocks as f64;
            acc / (i + 1) as f64
        })
        .collect())
}

fn check_len(code: &LinearBlockCode, psi: &[f64]) -> Result<()> {
    if psi.len() != code.n() {
        return Err(BerdError::LengthMismatch {
            expected: code.n(),
            actual: psi.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::{hamming_7_4, LLR_CLAMP};
    use proptest::prelude::*;

    fn p0(l: f64) -> f64 {
        1.0 / (1.0 + (-l).exp())
    }

    // Probability that the XOR is zero, by enumerating all 2^N outcomes.
    fn brute_force(llrs: &[f64]) -> f64 {
        let n = llrs.len();
        let mut p_even = 0.0;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() % 2 == 1 {
                continue;
            }
            p_even += llrs
                .iter()
                .enumerate()
                .map(|(k, &l)| {
                    if mask >> k & 1 == 1 {
                        1.0 - p0(l)
                    } else {
                        p0(l)
                    }
                })
                .product::<f64>();
        }
        (p_even / (1.0 - p_even)).ln()
    }

    #[test]
    fn weight_two_examples() {
        for (l, want) in [
            (10.0, brute_force(&[10.0, 10.0])),
            (2.0, brute_force(&[2.0, 2.0])),
        ] {
            assert!((parity_llr([l, l]) - want).abs() < 1e-9);
        }
        assert!((parity_llr([2.0, 2.0]) - (0.790_012_7_f64 / 0.209_987_3).ln()).abs() < 1e-5);
        assert!((parity_llr([10.0, 10.0]) - 9.306_853).abs() < 1e-6);
    }

    #[test]
    fn zero_llr_annihilates() {
        assert_eq!(parity_llr([5.0, 0.0, -3.0]), 0.0);
        let code = hamming_7_4();
        let mut psi = vec![4.0; 7];
        psi[0] = 0.0;
        assert_eq!(syndrome_llr(&code, &psi, 1).unwrap(), 0.0);
    }

    #[test]
    fn saturates_with_sign_parity() {
        let bound = parity_llr([LLR_CLAMP; 3]);
        assert!(bound > 25.0);
        assert_eq!(parity_llr([1e6, -1e6, -1e6]), bound);
        assert!((parity_llr([1e6, -1e6, 1e6]) + bound).abs() < 1e-3);
        assert_eq!(
            parity_llr([f64::INFINITY, f64::INFINITY]),
            parity_llr([LLR_CLAMP; 2])
        );
    }

    #[test]
    fn prefix_average_and_ranges() {
        let code = hamming_7_4();
        let psi = [1.0, -2.0, 0.5, 3.0, -1.0, 2.5, 0.7];
        let g = syndrome_llrs(&code, &psi).unwrap();
        assert_eq!(average_syndrome_llr(&code, &psi, 1).unwrap(), g[0]);
        let full = average_syndrome_llr(&code, &psi, 3).unwrap();
        assert!((full - g.iter().sum::<f64>() / 3.0).abs() < 1e-15);
        assert!(average_syndrome_llr(&code, &psi, 0).is_err());
        assert!(average_syndrome_llr(&code, &psi, 4).is_err());
        assert!(syndrome_llr(&code, &psi, 4).is_err());
        let prefix = gamma_prefix(&code, &psi).unwrap();
        assert!((prefix[2] - full).abs() < 1e-15);
    }

    #[test]
    fn multi_block_prefix_averages_blocks() {
        let code = hamming_7_4();
        let a = [1.0, -2.0, 0.5, 3.0, -1.0, 2.5, 0.7];
        let b = [4.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0];
        let both: Vec<f64> = a.iter().chain(&b).copied().collect();
        let pa = gamma_prefix(&code, &a).unwrap();
        let pb = gamma_prefix(&code, &b).unwrap();
        let pab = gamma_prefix(&code, &both).unwrap();
        for i in 0..3 {
            assert!((pab[i] - 0.5 * (pa[i] + pb[i])).abs() < 1e-12);
        }
        assert!(gamma_prefix(&code, &a[..6]).is_err());
    }

    proptest! {
        #[test]
        fn matches_enumeration(llrs in prop::collection::vec(-5.0f64..5.0, 1..=8)) {
            prop_assert!((parity_llr(llrs.iter().copied()) - brute_force(&llrs)).abs() < 1e-9);
        }

        #[test]
        fn permutation_invariant(mut llrs in prop::collection::vec(-8.0f64..8.0, 2..=8), k in 0usize..8) {
            let before = parity_llr(llrs.iter().copied());
            let k = k % llrs.len();
            llrs.rotate_left(k);
            let last = llrs.len() - 1;
            llrs.swap(0, last);
            prop_assert!((parity_llr(llrs.iter().copied()) - before).abs() < 1e-12);
        }
    }
}
