//! Modulation-and-coding-scheme hypotheses and candidate grids.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{BerdError, Result};
use crate::ldpc::LinearBlockCode;
use crate::modem::{Constellation, Modulation};

/// Identifier of one (modulation, code) pair. Orders lexicographically by
/// modulation id, then code id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Theta {
    pub modulation: Modulation,
    pub code_id: String,
}

impl Theta {
    pub fn new(modulation: Modulation, code_id: impl Into<String>) -> Self {
        Theta {
            modulation,
            code_id: code_id.into(),
        }
    }
}

impl PartialOrd for Theta {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Theta {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.modulation.id(), self.code_id.as_str())
            .cmp(&(other.modulation.id(), other.code_id.as_str()))
    }
}

impl fmt::Display for Theta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.modulation, self.code_id)
    }
}

impl FromStr for Theta {
    type Err = BerdError;

    fn from_str(s: &str) -> Result<Self> {
        let (m, c) = s
            .split_once('/')
            .ok_or_else(|| BerdError::parse("mcs", format!("`{s}` is not <modulation>/<code>")))?;
        Ok(Theta::new(m.trim().parse()?, c.trim()))
    }
}

/// A loaded hypothesis: constellation and code.
#[derive(Debug, Clone)]
pub struct Mcs {
    pub constellation: Constellation,
    pub code: Arc<LinearBlockCode>,
}

impl Mcs {
    pub fn new(modulation: Modulation, code: Arc<LinearBlockCode>) -> Self {
        Mcs {
            constellation: modulation.constellation(),
            code,
        }
    }

    pub fn theta(&self) -> Theta {
        Theta::new(self.constellation.modulation(), self.code.id())
    }

    /// Codewords carried by a frame of `n_symbols`, if it divides evenly.
    pub fn codewords(&self, n_symbols: usize) -> Option<usize> {
        crate::detector::codewords_in_frame(n_symbols, &self.constellation, &self.code)
    }

    pub fn message_bits(&self, n_symbols: usize) -> Option<usize> {
        self.codewords(n_symbols).map(|c| c * self.code.q())
    }
}

/// Candidate modulations `M` times candidate codes `C`.
#[derive(Debug, Clone)]
pub struct CandidateGrid {
    pub modulations: Vec<Modulation>,
    pub codes: Vec<Arc<LinearBlockCode>>,
}

impl CandidateGrid {
    pub fn new(modulations: Vec<Modulation>, codes: Vec<Arc<LinearBlockCode>>) -> Result<Self> {
        if modulations.is_empty() || codes.is_empty() {
            return Err(BerdError::InvalidParameter("empty candidate grid".into()));
        }
        Ok(CandidateGrid { modulations, codes })
    }

    /// Loads codes by id from the asset directory.
    pub fn load(modulations: &[Modulation], code_ids: &[String]) -> Result<Self> {
        let codes = code_ids
            .iter()
            .map(|id| LinearBlockCode::load(id).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        Self::new(modulations.to_vec(), codes)
    }

    /// Hypotheses in modulation-major order.
    pub fn hypotheses(&self) -> Vec<Mcs> {
        self.modulations
            .iter()
            .flat_map(|&m| self.codes.iter().map(move |c| Mcs::new(m, Arc::clone(c))))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.modulations.len() * self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn find(&self, theta: &Theta) -> Option<Mcs> {
        self.hypotheses().into_iter().find(|h| &h.theta() == theta)
    }
}
