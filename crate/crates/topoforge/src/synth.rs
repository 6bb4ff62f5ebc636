//! Free-running generation from a trained model: autoregressive edge
//! emission, threshold decoding into an adjacency, connected-component
//! extraction, and node-count filtering until the requested number of
//! graphs exists.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dggm::{sequence_to_graph, EdgeSequence, ModelParams, SequenceError};
use crate::graph::Graph;
use crate::util::{derive_seed, seeded_rng};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthesis configuration: {0}")]
    Invalid(String),
    #[error(
        "attempt budget exhausted: {accepted}/{needed} graphs accepted after {attempts} \
         free-runs; the size range and the model's output may be mismatched"
    )]
    BudgetExhausted {
        attempts: usize,
        accepted: usize,
        needed: usize,
    },
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

/// When the decoding threshold is redrawn: once per node (each node's
/// window gets a fresh draw) or once per generated graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TauPolicy {
    #[default]
    PerNode,
    PerGraph,
}

impl std::str::FromStr for TauPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "per-node" | "per_node" => Ok(TauPolicy::PerNode),
            "per-graph" | "per_graph" => Ok(TauPolicy::PerGraph),
            other => Err(format!("unknown tau policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Number of graphs to return.
    pub count: usize,
    /// Accepted node counts; when absent, `n_min..=n_max`.
    pub allowed_sizes: Option<BTreeSet<usize>>,
    pub n_min: usize,
    pub n_max: usize,
    pub tau_policy: TauPolicy,
    /// Free-run budget before giving up.
    pub max_attempts: usize,
    /// Stop a run early when a node emits an all-zero window (opt-in; the
    /// default reproduces fixed-length generation plus component
    /// filtering).
    pub early_stop: bool,
    pub rng_seed: u64,
}

impl SynthConfig {
    pub fn with_bounds(count: usize, n_min: usize, n_max: usize, rng_seed: u64) -> Self {
        SynthConfig {
            count,
            allowed_sizes: None,
            n_min,
            n_max,
            tau_policy: TauPolicy::default(),
            max_attempts: 200 * count.max(1),
            early_stop: false,
            rng_seed,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.count == 0 {
            return Err(SynthError::Invalid("count must be >= 1".into()));
        }
        match &self.allowed_sizes {
            Some(sizes) if sizes.is_empty() => {
                return Err(SynthError::Invalid("allowed size list is empty".into()))
            }
            Some(_) => {}
            None if self.n_min > self.n_max || self.n_max == 0 => {
                return Err(SynthError::Invalid(format!(
                    "need n_min <= n_max >= 1, got ({}, {})",
                    self.n_min, self.n_max
                )))
            }
            None => {}
        }
        if self.max_attempts == 0 {
            return Err(SynthError::Invalid("max_attempts must be >= 1".into()));
        }
        Ok(())
    }

    fn size_allowed(&self, n: usize) -> bool {
        match &self.allowed_sizes {
            Some(sizes) => sizes.contains(&n),
            None => (self.n_min..=self.n_max).contains(&n),
        }
    }

    /// How many node positions each free-run generates.
    fn generation_length(&self) -> usize {
        match &self.allowed_sizes {
            Some(sizes) => *sizes.iter().next_back().expect("validated nonempty"),
            None => self.n_max,
        }
    }
}

/// Draw from the open interval (0, 1).
fn draw_tau(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u = rng.gen::<f64>();
        if u > 0.0 {
            return u;
        }
    }
}

/// One autoregressive pass of `n_max` node positions.
///
/// `prob_rows` follows the training shape: entry 0 is the (empty) start
/// position, entry `i` carries `min(i, M)` probabilities. Each emitted bit
/// is the thresholded decision and is fed forward as the next input.
/// With `early_stop`, an all-zero row ends the run and is not included.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeRunOutput {
    pub prob_rows: Vec<Vec<f64>>,
    pub bit_rows: Vec<Vec<u8>>,
    pub taus: Vec<f64>,
}

pub fn free_run(
    params: &ModelParams,
    n_max: usize,
    policy: TauPolicy,
    early_stop: bool,
    rng: &mut ChaCha8Rng,
) -> FreeRunOutput {
    let m = params.dims.transient;
    let mut taus = Vec::new();
    let graph_tau = match policy {
        TauPolicy::PerGraph => {
            let t = draw_tau(rng);
            taus.push(t);
            Some(t)
        }
        TauPolicy::PerNode => None,
    };
    let mut prob_rows: Vec<Vec<f64>> = vec![Vec::new()];
    let mut bit_rows: Vec<Vec<u8>> = Vec::new();
    let mut stepper = params.generation_stepper();
    let mut x = params.sos_token().to_vec();
    for p in 1..n_max {
        let tau = match policy {
            TauPolicy::PerNode => {
                let t = draw_tau(rng);
                taus.push(t);
                t
            }
            TauPolicy::PerGraph => graph_tau.expect("drawn above"),
        };
        let width = p.min(m);
        let (probs, bits) = stepper.emit_row(&x, width, tau);
        if early_stop && bits.iter().all(|&b| b == 0) {
            break;
        }
        x = crate::dggm::pad_row(&bits, m);
        prob_rows.push(probs);
        bit_rows.push(bits);
    }
    FreeRunOutput {
        prob_rows,
        bit_rows,
        taus,
    }
}

/// Map probability rows to a symmetric adjacency over `prob_rows.len()`
/// nodes: bit = 1 iff probability >= tau, tau redrawn per the policy in
/// the same order a free-run draws it.
pub fn threshold_decode(prob_rows: &[Vec<f64>], policy: TauPolicy, rng: &mut ChaCha8Rng) -> Graph {
    let n = prob_rows.len();
    let mut g = Graph::new(n);
    let graph_tau = match policy {
        TauPolicy::PerGraph => Some(draw_tau(rng)),
        TauPolicy::PerNode => None,
    };
    for (p, row) in prob_rows.iter().enumerate().skip(1) {
        let tau = match policy {
            TauPolicy::PerNode => draw_tau(rng),
            TauPolicy::PerGraph => graph_tau.expect("drawn above"),
        };
        decode_row_into(&mut g, p, row, tau);
    }
    g
}

fn decode_row_into(g: &mut Graph, p: usize, row: &[f64], tau: f64) {
    let w = row.len();
    for (j, &prob) in row.iter().enumerate() {
        if prob >= tau {
            g.add_edge(p, p - w + j);
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SynthStats {
    pub runs: usize,
    pub components_seen: usize,
    pub accepted: usize,
    pub tau_draws: usize,
    pub tau_mean: f64,
}

impl SynthStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.components_seen == 0 {
            0.0
        } else {
            self.accepted as f64 / self.components_seen as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthRun {
    pub graphs: Vec<Graph>,
    pub stats: SynthStats,
}

fn synthesize_inner(params: &ModelParams, cfg: &SynthConfig) -> Result<SynthRun, SynthError> {
    cfg.validate()?;
    let gen_len = cfg.generation_length();
    let mut graphs: Vec<Graph> = Vec::with_capacity(cfg.count);
    let mut stats = SynthStats::default();
    let mut tau_sum = 0.0;
    for run in 0..cfg.max_attempts {
        if graphs.len() >= cfg.count {
            break;
        }
        let mut run_rng = seeded_rng(derive_seed(cfg.rng_seed, run as u64));
        let out = free_run(params, gen_len, cfg.tau_policy, cfg.early_stop, &mut run_rng);
        stats.runs += 1;
        stats.tau_draws += out.taus.len();
        tau_sum += out.taus.iter().sum::<f64>();
        let seq = EdgeSequence::from_rows(out.bit_rows, params.dims.transient)?;
        let decoded = sequence_to_graph(&seq);
        for component in decoded.connected_components() {
            stats.components_seen += 1;
            if cfg.size_allowed(component.graph.node_count()) && graphs.len() < cfg.count {
                graphs.push(component.graph);
                stats.accepted += 1;
            }
        }
    }
    stats.tau_mean = if stats.tau_draws == 0 {
        0.0
    } else {
        tau_sum / stats.tau_draws as f64
    };
    Ok(SynthRun { graphs, stats })
}

/// Generate until `cfg.count` accepted graphs exist; every returned graph
/// is connected, simple, and has an allowed node count. Errors when the
/// attempt budget runs out first.
pub fn synthesize(params: &ModelParams, cfg: &SynthConfig) -> Result<SynthRun, SynthError> {
    let run = synthesize_inner(params, cfg)?;
    if run.graphs.len() < cfg.count {
        return Err(SynthError::BudgetExhausted {
            attempts: run.stats.runs,
            accepted: run.graphs.len(),
            needed: cfg.count,
        });
    }
    Ok(run)
}

/// Like [`synthesize`] but returns whatever was accepted inside the
/// budget; used by the training-time validation hook.
pub fn synthesize_best_effort(params: &ModelParams, cfg: &SynthConfig) -> Result<SynthRun, SynthError> {
    synthesize_inner(params, cfg)
}
