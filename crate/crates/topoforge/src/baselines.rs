//! Preferential-attachment baseline generators (plain, extended, dual, and
//! fitness-weighted growth) plus the shifted-gamma node-count model used to
//! match a real corpus' size distribution.
//!
//! Every generator owns three ChaCha streams derived from its seed: one for
//! attachment targets, one for growth-event choices, one for fitness draws.
//! Because the streams are separate, the degenerate configurations (extended
//! model with only BA events, dual model with no single links, constant
//! fitness) reproduce the plain generator bit for bit under a shared seed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::graph::Graph;
use crate::util::{derive_seed, seeded_rng};

const STREAM_ATTACH: u64 = 0;
const STREAM_EVENT: u64 = 1;
const STREAM_FITNESS: u64 = 2;

/// Bounded retries for edge additions and rewires that may have no legal
/// target (e.g. on a complete graph).
const LOCAL_TRIES: usize = 32;

/// Rejection budget for the bounded node-count sampler.
const SAMPLE_BUDGET: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("n = {n} is too small (need at least {min})")]
    TooSmall { n: usize, min: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least {min} samples with at least two distinct values")]
    DegenerateSamples { min: usize },
    #[error("node-count sampler exhausted its budget of {0} draws")]
    SampleBudget(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    Ba,
    Eba,
    Dba,
    Bb,
}

impl std::str::FromStr for BaselineKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ba" => Ok(BaselineKind::Ba),
            "eba" => Ok(BaselineKind::Eba),
            "dba" => Ok(BaselineKind::Dba),
            "bb" => Ok(BaselineKind::Bb),
            other => Err(format!("unknown baseline kind `{other}`")),
        }
    }
}

/// Per-node fitness distribution for the fitness-weighted generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitnessSpec {
    Constant(f64),
    /// Uniform on the half-open interval `(lo, hi]`.
    Uniform { lo: f64, hi: f64 },
}

impl Default for FitnessSpec {
    fn default() -> Self {
        FitnessSpec::Uniform { lo: 0.0, hi: 1.0 }
    }
}

impl FitnessSpec {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            FitnessSpec::Constant(v) => v,
            // 1 - gen() lies in (0, 1], keeping fitness positive.
            FitnessSpec::Uniform { lo, hi } => lo + (hi - lo) * (1.0 - rng.gen::<f64>()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    pub m_links: usize,
    pub eba_p_ba: f64,
    pub eba_p_add: f64,
    pub eba_p_rewire: f64,
    pub dba_p_single: f64,
    pub bb_fitness: FitnessSpec,
    pub rng_seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            kind: BaselineKind::Ba,
            m_links: 2,
            eba_p_ba: 0.5,
            eba_p_add: 0.25,
            eba_p_rewire: 0.25,
            dba_p_single: 0.35,
            bb_fitness: FitnessSpec::default(),
            rng_seed: 0,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if self.m_links == 0 {
            return Err(BaselineError::InvalidConfig("m_links must be >= 1".into()));
        }
        let probs = [
            self.eba_p_ba,
            self.eba_p_add,
            self.eba_p_rewire,
            self.dba_p_single,
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(BaselineError::InvalidConfig(
                "probabilities must lie in [0, 1]".into(),
            ));
        }
        let sum = self.eba_p_ba + self.eba_p_add + self.eba_p_rewire;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(BaselineError::InvalidConfig(format!(
                "eba probabilities must sum to 1, got {sum}"
            )));
        }
        if let FitnessSpec::Uniform { lo, hi } = self.bb_fitness {
            if !(hi > lo && lo >= 0.0) {
                return Err(BaselineError::InvalidConfig(
                    "fitness bounds must satisfy 0 <= lo < hi".into(),
                ));
            }
        }
        if let FitnessSpec::Constant(v) = self.bb_fitness {
            if v <= 0.0 {
                return Err(BaselineError::InvalidConfig(
                    "constant fitness must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    fn streams(&self) -> (ChaCha8Rng, ChaCha8Rng, ChaCha8Rng) {
        (
            seeded_rng(derive_seed(self.rng_seed, STREAM_ATTACH)),
            seeded_rng(derive_seed(self.rng_seed, STREAM_EVENT)),
            seeded_rng(derive_seed(self.rng_seed, STREAM_FITNESS)),
        )
    }
}

/// Connected clique seed on `size` nodes inside a graph of `n` slots.
fn clique_seed(n: usize, size: usize) -> Graph {
    let mut g = Graph::new(n);
    for u in 0..size {
        for v in (u + 1)..size {
            g.add_edge(u, v);
        }
    }
    g
}

/// Draw `count` distinct indices with probability proportional to
/// `weights`, consuming exactly one uniform per pick (chosen entries are
/// zeroed rather than rejected, so the stream layout is shape-independent).
fn pick_weighted_distinct(weights: &mut [f64], count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut picks = Vec::with_capacity(count);
    for _ in 0..count {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.gen::<f64>() * total;
        let mut chosen = weights.len() - 1;
        for (i, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            if target < w {
                chosen = i;
                break;
            }
            target -= w;
        }
        picks.push(chosen);
        weights[chosen] = 0.0;
    }
    picks
}

/// Attach node `new` to `m` distinct existing nodes drawn preferentially
/// by `weights` (indexed over `0..new`).
fn attach_preferentially(
    g: &mut Graph,
    new: usize,
    m: usize,
    mut weights: Vec<f64>,
    rng: &mut ChaCha8Rng,
) {
    for target in pick_weighted_distinct(&mut weights, m.min(new), rng) {
        g.add_edge(new, target);
    }
}

fn degree_weights(g: &Graph, upto: usize) -> Vec<f64> {
    (0..upto).map(|i| g.degree(i) as f64).collect()
}

/// Plain preferential attachment: grow from an `m+1`-clique, each arriving
/// node attaching `m_links` edges with probability proportional to degree.
pub fn ba_generate(n: usize, cfg: &BaselineConfig) -> Result<Graph, BaselineError> {
    cfg.validate()?;
    let m = cfg.m_links;
    if n < m + 1 {
        return Err(BaselineError::TooSmall { n, min: m + 1 });
    }
    let (mut attach_rng, _, _) = cfg.streams();
    let mut g = clique_seed(n, m + 1);
    for new in (m + 1)..n {
        let weights = degree_weights(&g, new);
        attach_preferentially(&mut g, new, m, weights, &mut attach_rng);
    }
    Ok(g)
}

/// Extended model: each growth event is a BA node arrival, a batch of `m`
/// preferential edge additions between existing nodes, or a batch of `m`
/// rewires, until `n` nodes exist.
pub fn eba_generate(n: usize, cfg: &BaselineConfig) -> Result<Graph, BaselineError> {
    cfg.validate()?;
    let m = cfg.m_links;
    let seed_size = m + 1;
    if n < 3 || n < seed_size {
        return Err(BaselineError::TooSmall {
            n,
            min: 3.max(seed_size),
        });
    }
    if cfg.eba_p_ba <= 0.0 {
        return Err(BaselineError::InvalidConfig(
            "eba_p_ba must be positive so the target node count is reached".into(),
        ));
    }
    let (mut attach_rng, mut event_rng, _) = cfg.streams();
    let mut g = clique_seed(n, seed_size);
    let mut nodes = seed_size;
    while nodes < n {
        let u = event_rng.gen::<f64>();
        if u < cfg.eba_p_ba {
            let weights = degree_weights(&g, nodes);
            attach_preferentially(&mut g, nodes, m, weights, &mut attach_rng);
            nodes += 1;
        } else if u < cfg.eba_p_ba + cfg.eba_p_add {
            for _ in 0..m {
                add_preferential_edge(&mut g, nodes, &mut attach_rng);
            }
        } else {
            for _ in 0..m {
                rewire_random_edge(&mut g, &mut attach_rng);
            }
        }
    }
    Ok(g)
}

/// Add one edge: a uniformly random existing endpoint, the other end drawn
/// preferentially among non-neighbors. Skips after bounded tries when the
/// graph is saturated.
fn add_preferential_edge(g: &mut Graph, nodes: usize, rng: &mut ChaCha8Rng) {
    for _ in 0..LOCAL_TRIES {
        let a = rng.gen_range(0..nodes);
        let mut weights = degree_weights(g, nodes);
        weights[a] = 0.0;
        for &nb in g.neighbors(a) {
            weights[nb] = 0.0;
        }
        if let Some(&b) = pick_weighted_distinct(&mut weights, 1, rng).first() {
            g.add_edge(a, b);
            return;
        }
    }
}

/// Rewire one edge: pick a uniformly random edge `(u, v)` (sorted pair),
/// detach the `v` end and reattach it preferentially to some `w` not in
/// `{u}` with `(u, w)` absent. Skips after bounded tries.
fn rewire_random_edge(g: &mut Graph, rng: &mut ChaCha8Rng) {
    let edges: Vec<(usize, usize)> = g.edges().collect();
    if edges.is_empty() {
        return;
    }
    for _ in 0..LOCAL_TRIES {
        let (u, v) = edges[rng.gen_range(0..edges.len())];
        if !g.has_edge(u, v) {
            continue; // already rewired this round
        }
        let mut weights = degree_weights(g, g.node_count());
        weights[u] = 0.0;
        for &nb in g.neighbors(u) {
            weights[nb] = 0.0;
        }
        if let Some(&w) = pick_weighted_distinct(&mut weights, 1, rng).first() {
            g.remove_edge(u, v);
            g.add_edge(u, w);
            return;
        }
    }
}

/// Dual model: each arriving node attaches a single link with probability
/// `dba_p_single`, otherwise `m_links` links. The seed shrinks to a single
/// edge when every attachment is single, so that case grows a tree.
pub fn dba_generate(n: usize, cfg: &BaselineConfig) -> Result<Graph, BaselineError> {
    cfg.validate()?;
    let m = cfg.m_links;
    let seed_size = if cfg.dba_p_single >= 1.0 { 2 } else { m + 1 };
    if n < 3 || n < seed_size {
        return Err(BaselineError::TooSmall {
            n,
            min: 3.max(seed_size),
        });
    }
    let (mut attach_rng, mut event_rng, _) = cfg.streams();
    let mut g = clique_seed(n, seed_size);
    for new in seed_size..n {
        let links = if event_rng.gen::<f64>() < cfg.dba_p_single {
            1
        } else {
            m
        };
        let weights = degree_weights(&g, new);
        attach_preferentially(&mut g, new, links, weights, &mut attach_rng);
    }
    Ok(g)
}

/// Fitness-weighted growth: attachment probability proportional to
/// `fitness_i * degree_i`, fitness drawn once per node at birth.
pub fn bb_generate(n: usize, cfg: &BaselineConfig) -> Result<Graph, BaselineError> {
    cfg.validate()?;
    let m = cfg.m_links;
    if n < m + 1 {
        return Err(BaselineError::TooSmall { n, min: m + 1 });
    }
    let (mut attach_rng, _, mut fitness_rng) = cfg.streams();
    let mut g = clique_seed(n, m + 1);
    let mut fitness: Vec<f64> = (0..m + 1)
        .map(|_| cfg.bb_fitness.draw(&mut fitness_rng))
        .collect();
    for new in (m + 1)..n {
        let weights: Vec<f64> = (0..new).map(|i| fitness[i] * g.degree(i) as f64).collect();
        attach_preferentially(&mut g, new, m, weights, &mut attach_rng);
        fitness.push(cfg.bb_fitness.draw(&mut fitness_rng));
    }
    Ok(g)
}

/// Dispatch on `cfg.kind`.
pub fn generate(n: usize, cfg: &BaselineConfig) -> Result<Graph, BaselineError> {
    match cfg.kind {
        BaselineKind::Ba => ba_generate(n, cfg),
        BaselineKind::Eba => eba_generate(n, cfg),
        BaselineKind::Dba => dba_generate(n, cfg),
        BaselineKind::Bb => bb_generate(n, cfg),
    }
}

/// Shifted gamma: density `y^(a-1) exp(-y) / (s * Gamma(a))` with
/// `y = (x - m) / s` for `x > m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub shape: f64,
    pub scale: f64,
    pub location: f64,
}

impl GammaParams {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if !(self.shape > 0.0 && self.scale > 0.0) {
            return Err(BaselineError::InvalidConfig(
                "gamma shape and scale must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Log-likelihood of `samples` under a shifted gamma; `-inf` when any
/// sample does not exceed the location.
pub fn gamma_log_likelihood(params: &GammaParams, samples: &[f64]) -> f64 {
    let (a, s, m) = (params.shape, params.scale, params.location);
    let mut ll = 0.0;
    for &x in samples {
        if x <= m {
            return f64::NEG_INFINITY;
        }
        let y = (x - m) / s;
        ll += (a - 1.0) * y.ln() - y - s.ln() - ln_gamma(a);
    }
    ll
}

/// Fit `(shape, scale)` by maximum likelihood with the location pinned
/// just below the sample minimum. Scale has a closed form given shape, so
/// the profile likelihood is maximized by golden-section search over
/// `ln(shape)`.
pub fn fit_gamma_mle(samples: &[f64]) -> Result<GammaParams, BaselineError> {
    const MIN_SAMPLES: usize = 10;
    if samples.len() < MIN_SAMPLES {
        return Err(BaselineError::DegenerateSamples { min: MIN_SAMPLES });
    }
    let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(BaselineError::DegenerateSamples { min: MIN_SAMPLES });
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    // Offset below the minimum: a hard zero would put integer-valued data
    // on the density's support boundary.
    let location = min - (0.005 * (mean - min)).max(1e-9);
    fit_gamma_mle_at(samples, location)
}

/// Same fit with a caller-chosen location.
pub fn fit_gamma_mle_at(samples: &[f64], location: f64) -> Result<GammaParams, BaselineError> {
    let n = samples.len() as f64;
    let mut sum_ln = 0.0;
    let mut sum_d = 0.0;
    for &x in samples {
        let d = x - location;
        if d <= 0.0 {
            return Err(BaselineError::InvalidConfig(
                "location must lie strictly below every sample".into(),
            ));
        }
        sum_ln += d.ln();
        sum_d += d;
    }
    let mean_d = sum_d / n;
    // Profile log-likelihood in ln(a); scale is mean_d / a at the optimum.
    let profile = |ln_a: f64| -> f64 {
        let a = ln_a.exp();
        let s = mean_d / a;
        (a - 1.0) * (sum_ln - n * s.ln()) - n * a - n * s.ln() - n * ln_gamma(a)
    };
    let (mut lo, mut hi) = ((1e-3_f64).ln(), (1e3_f64).ln());
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (profile(x1), profile(x2));
    for _ in 0..200 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = profile(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = profile(x1);
        }
    }
    let shape = ((lo + hi) / 2.0).exp();
    Ok(GammaParams {
        shape,
        scale: mean_d / shape,
        location,
    })
}

/// Draw node counts from the shifted gamma, rounding and rejecting until
/// the value lands in `[n_min, n_max]`; a hard error after the budget.
pub fn sample_node_count(
    params: &GammaParams,
    n_min: usize,
    n_max: usize,
    rng: &mut ChaCha8Rng,
) -> Result<usize, BaselineError> {
    params.validate()?;
    if n_min >= n_max {
        return Err(BaselineError::InvalidConfig(format!(
            "need n_min < n_max, got ({n_min}, {n_max})"
        )));
    }
    let gamma = Gamma::new(params.shape, params.scale)
        .map_err(|e| BaselineError::InvalidConfig(e.to_string()))?;
    for _ in 0..SAMPLE_BUDGET {
        let x = params.location + gamma.sample(rng);
        let rounded = x.round();
        if rounded >= n_min as f64 && rounded <= n_max as f64 {
            return Ok(rounded as usize);
        }
    }
    Err(BaselineError::SampleBudget(SAMPLE_BUDGET))
}
