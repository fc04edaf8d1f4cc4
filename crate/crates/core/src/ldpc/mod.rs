//! Binary linear block codes: parity-check matrices, systematic encoding,
//! belief-propagation decoding and syndrome LLRs.

pub mod alist;
pub mod bp;
pub mod gf2;
pub mod qc;
pub mod syndrome;

use std::path::{Path, PathBuf};

use crate::error::{BerdError, Result};
use alist::SparseBinary;
use gf2::BitMatrix;

pub use bp::{bp_decode, BpOutput};
pub use syndrome::{average_syndrome_llr, gamma_prefix, syndrome_llr, syndrome_llrs};

/// Natural-log likelihood ratios, positive favouring bit 0.
pub type LlrVector = Vec<f64>;

/// Magnitude bound applied to every LLR that enters or leaves the decoder.
pub const LLR_CLAMP: f64 = 30.0;

#[inline]
pub fn clamp_llr(x: f64) -> f64 {
    x.clamp(-LLR_CLAMP, LLR_CLAMP)
}

/// Identifiers of the codes shipped under `assets/codes`.
pub const SHIPPED_CODES: [&str; 14] = [
    "ldpc_648_r12",
    "ldpc_648_r23",
    "ldpc_648_r34",
    "ldpc_648_r56",
    "ldpc_1296_r12",
    "ldpc_1296_r23",
    "ldpc_1296_r34",
    "ldpc_1296_r56",
    "ldpc_1944_r12",
    "ldpc_1944_r23",
    "ldpc_1944_r34",
    "ldpc_1944_r56",
    "hamming_7_4",
    "hamming_8_4",
];

/// Asset root: `$BERD_ASSET_DIR` if set, otherwise the crate's `assets/`.
pub fn asset_dir() -> PathBuf {
    match std::env::var_os("BERD_ASSET_DIR") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/assets")),
    }
}

/// A binary linear block code defined by a full-rank parity-check matrix.
///
/// Encoding is systematic on `info_positions`: the message occupies those
/// codeword positions in order and the remaining `parity_positions` are
/// solved from the reduced-row-echelon form of `H`.
#[derive(Debug, Clone)]
pub struct LinearBlockCode {
    id: String,
    n: usize,
    q: usize,
    h: BitMatrix,
    row_supports: Vec<Vec<usize>>,
    col_supports: Vec<Vec<usize>>,
    g: BitMatrix,
    info_positions: Vec<usize>,
    parity_positions: Vec<usize>,
    // row r: parity bit parity_positions[r] as a GF(2) combination of message bits
    parity_eq: BitMatrix,
    graph: bp::TannerGraph,
}

impl LinearBlockCode {
    pub fn from_sparse(id: impl Into<String>, h: &SparseBinary) -> Result<Self> {
        let n = h.n_cols;
        let m = h.n_rows();
        let mut dense = BitMatrix::zeros(m, n);
        for (r, row) in h.row_supports.iter().enumerate() {
            for &c in row {
                dense.set(r, c, true);
            }
        }
        let mut reduced = dense.clone();
        let pivots = reduced.reduce((0..n).rev());
        if pivots.len() != m {
            return Err(BerdError::RankDeficient {
                rank: pivots.len(),
                rows: m,
            });
        }
        let mut is_pivot = vec![false; n];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let info_positions: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        let q = info_positions.len();
        let mut parity_eq = BitMatrix::zeros(m, q);
        for r in 0..m {
            for (k, &c) in info_positions.iter().enumerate() {
                if reduced.get(r, c) {
                    parity_eq.set(r, k, true);
                }
            }
        }
        let mut code = LinearBlockCode {
            id: id.into(),
            n,
            q,
            row_supports: h.row_supports.clone(),
            col_supports: h.col_supports(),
            h: dense,
            g: BitMatrix::zeros(q, n),
            info_positions,
            parity_positions: pivots,
            parity_eq,
            graph: bp::TannerGraph::new(n, &h.row_supports),
        };
        let mut g = BitMatrix::zeros(q, n);
        let mut unit = vec![0u8; q];
        for k in 0..q {
            unit[k] = 1;
            for (c, &b) in code.encode_unchecked(&unit).iter().enumerate() {
                if b == 1 {
                    g.set(k, c, true);
                }
            }
            unit[k] = 0;
        }
        code.g = g;
        Ok(code)
    }

    pub fn from_alist_file(id: impl Into<String>, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BerdError::io(path, e))?;
        Self::from_sparse(id, &alist::parse(&text)?)
    }

    /// Loads `<asset_dir>/codes/<id>.alist`.
    pub fn load(id: &str) -> Result<Self> {
        Self::load_from(&asset_dir(), id)
    }

    pub fn load_from(asset_dir: &Path, id: &str) -> Result<Self> {
        let path = asset_dir.join("codes").join(format!("{id}.alist"));
        if !path.is_file() {
            return Err(BerdError::UnknownCode(format!(
                "{id} (looked in {})",
                path.display()
            )));
        }
        Self::from_alist_file(id, &path)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Number of parity checks, `n - q`.
    pub fn n_checks(&self) -> usize {
        self.row_supports.len()
    }

    pub fn rate(&self) -> f64 {
        self.q as f64 / self.n as f64
    }

    pub(crate) fn graph(&self) -> &bp::TannerGraph {
        &self.graph
    }

    pub fn h(&self) -> &BitMatrix {
        &self.h
    }

    pub fn g(&self) -> &BitMatrix {
        &self.g
    }

    /// 0-based column indices of each parity check.
    pub fn row_supports(&self) -> &[Vec<usize>] {
        &self.row_supports
    }

    pub fn col_supports(&self) -> &[Vec<usize>] {
        &self.col_supports
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn parity_positions(&self) -> &[usize] {
        &self.parity_positions
    }

    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>> {
        if message.len() != self.q {
            return Err(BerdError::LengthMismatch {
                expected: self.q,
                actual: message.len(),
            });
        }
        Ok(self.encode_unchecked(message))
    }

    fn encode_unchecked(&self, message: &[u8]) -> Vec<u8> {
        let mut cw = vec![0u8; self.n];
        for (&pos, &b) in self.info_positions.iter().zip(message) {
            cw[pos] = b & 1;
        }
        let parity = self.parity_eq.mul_vec(message);
        for (&pos, b) in self.parity_positions.iter().zip(parity) {
            cw[pos] = b;
        }
        cw
    }

    /// Encodes a concatenation of whole messages into concatenated codewords.
    pub fn encode_blocks(&self, messages: &[u8]) -> Result<Vec<u8>> {
        if self.q == 0 || messages.len() % self.q != 0 {
            return Err(BerdError::NotMultiple {
                len: messages.len(),
                multiple: self.q,
            });
        }
        Ok(messages
            .chunks(self.q)
            .flat_map(|m| self.encode_unchecked(m))
            .collect())
    }

    pub fn syndrome(&self, word: &[u8]) -> Vec<u8> {
        self.h.mul_vec(word)
    }

    pub fn is_codeword(&self, word: &[u8]) -> bool {
        word.len() == self.n
            && self
                .row_supports
                .iter()
                .all(|row| row.iter().fold(0u8, |acc, &c| acc ^ (word[c] & 1)) == 0)
    }

    /// Message bits of a codeword (or any length-`n` vector).
    pub fn extract_message<T: Copy>(&self, word: &[T]) -> Vec<T> {
        self.info_positions.iter().map(|&p| word[p]).collect()
    }
}

/// (7,4) Hamming code with message bits first.
pub fn hamming_7_4() -> LinearBlockCode {
    let h = SparseBinary {
        n_cols: 7,
        row_supports: vec![vec![0, 1, 3, 4], vec![0, 2, 3, 5], vec![1, 2, 3, 6]],
    };
    LinearBlockCode::from_sparse("hamming_7_4", &h).expect("full rank")
}

/// (8,4) extended Hamming code: the (7,4) code plus an overall parity bit.
pub fn hamming_8_4() -> LinearBlockCode {
    let h = SparseBinary {
        n_cols: 8,
        row_supports: vec![
            vec![0, 1, 3, 4],
            vec![0, 2, 3, 5],
            vec![1, 2, 3, 6],
            (0..8).collect(),
        ],
    };
    LinearBlockCode::from_sparse("hamming_8_4", &h).expect("full rank")
}

/// Parity-check matrix of a shipped code, built in memory.
pub fn builtin_matrix(id: &str) -> Option<SparseBinary> {
    match id {
        "hamming_7_4" => Some(sparse_of(&hamming_7_4())),
        "hamming_8_4" => Some(sparse_of(&hamming_8_4())),
        _ => qc::prototype(id).map(|p| p.expand()),
    }
}

fn sparse_of(code: &LinearBlockCode) -> SparseBinary {
    SparseBinary {
        n_cols: code.n,
        row_supports: code.row_supports.clone(),
    }
}
