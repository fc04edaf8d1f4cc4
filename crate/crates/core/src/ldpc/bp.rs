//! Sum-product belief propagation with a flooding schedule.

use super::{clamp_llr, LinearBlockCode};

const TANH_BOUND: f64 = 1.0 - 1e-12;

/// Edge layout of the Tanner graph, check-major.
#[derive(Debug, Clone)]
pub(crate) struct TannerGraph {
    edge_var: Vec<usize>,
    check_start: Vec<usize>,
    var_edges: Vec<usize>,
    var_start: Vec<usize>,
}

impl TannerGraph {
    pub(crate) fn new(n: usize, row_supports: &[Vec<usize>]) -> Self {
        let mut edge_var = Vec::new();
        let mut check_start = vec![0];
        for row in row_supports {
            edge_var.extend_from_slice(row);
            check_start.push(edge_var.len());
        }
        let mut per_var = vec![Vec::new(); n];
        for (e, &v) in edge_var.iter().enumerate() {
            per_var[v].push(e);
        }
        let mut var_edges = Vec::with_capacity(edge_var.len());
        let mut var_start = vec![0];
        for edges in per_var {
            var_edges.extend(edges);
            var_start.push(var_edges.len());
        }
        TannerGraph {
            edge_var,
            check_start,
            var_edges,
            var_start,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpOutput {
    /// Posterior LLRs of all `n` codeword bits.
    pub posterior: Vec<f64>,
    /// Message-passing rounds performed.
    pub iterations: usize,
    /// Whether the final hard decision satisfies every check.
    pub converged: bool,
}

impl BpOutput {
    pub fn hard_decision(&self) -> Vec<u8> {
        self.posterior.iter().map(|&l| u8::from(l < 0.0)).collect()
    }
}

/// Decodes one codeword. At least one round of message passing always runs,
/// so the posterior carries extrinsic information even for inputs that are
/// already valid codewords; the syndrome check then ends decoding early.
pub fn bp_decode(code: &LinearBlockCode, channel_llrs: &[f64], max_iters: usize) -> BpOutput {
    assert_eq!(channel_llrs.len(), code.n(), "LLR vector length");
    let g = code.graph();
    let ch: Vec<f64> = channel_llrs.iter().map(|&l| clamp_llr(l)).collect();
    let n_edges = g.edge_var.len();
    let mut v2c: Vec<f64> = g.edge_var.iter().map(|&v| ch[v]).collect();
    let mut c2v = vec![0.0; n_edges];
    let mut posterior = ch.clone();
    let mut t = Vec::new();
    let mut suffix = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iters.max(1) {
        iterations += 1;
        for c in 0..g.check_start.len() - 1 {
            let (lo, hi) = (g.check_start[c], g.check_start[c + 1]);
            t.clear();
            t.extend(v2c[lo..hi].iter().map(|&m| (0.5 * m).tanh()));
            suffix.clear();
            suffix.resize(t.len() + 1, 1.0);
            for k in (0..t.len()).rev() {
                suffix[k] = suffix[k + 1] * t[k];
            }
            let mut prefix = 1.0;
            for k in 0..t.len() {
                let p = (prefix * suffix[k + 1]).clamp(-TANH_BOUND, TANH_BOUND);
                c2v[lo + k] = clamp_llr(2.0 * p.atanh());
                prefix *= t[k];
            }
        }
        for v in 0..code.n() {
            let edges = &g.var_edges[g.var_start[v]..g.var_start[v + 1]];
            let total = ch[v] + edges.iter().map(|&e| c2v[e]).sum::<f64>();
            posterior[v] = total;
            for &e in edges {
                v2c[e] = clamp_llr(total - c2v[e]);
            }
        }
        if satisfies_checks(g, &posterior) {
            converged = true;
            break;
        }
    }
    BpOutput {
        posterior,
        iterations,
        converged,
    }
}

fn satisfies_checks(g: &TannerGraph, posterior: &[f64]) -> bool {
    g.check_start.windows(2).all(|w| {
        !g.edge_var[w[0]..w[1]]
            .iter()
            .fold(false, |acc, &v| acc ^ (posterior[v] < 0.0))
    })
}
