//! Distributional similarity between graph corpora: per-graph metric
//! distributions, exact 1-D Wasserstein distance, an exponential
//! Wasserstein kernel, the squared-MMD estimator, and the bootstrap
//! protocol producing mean-and-spread reports per metric.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::Graph;
use crate::metrics::{self, ScalarMetric};
use crate::util::{derive_seed, parallel_map_indexed, seeded_rng};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("the {side} corpus has no graphs with a defined {metric} distribution")]
    EmptySide {
        side: &'static str,
        metric: &'static str,
    },
    #[error("both distribution sets must be nonempty")]
    EmptySet,
    #[error("sigma must be positive, got {0}")]
    BadSigma(f64),
    #[error("invalid protocol: {0}")]
    Invalid(String),
}

/// Which per-graph distribution is being compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Degree,
    Clustering,
    Betweenness,
    Assortativity,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Degree,
        MetricKind::Clustering,
        MetricKind::Betweenness,
        MetricKind::Assortativity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Degree => "degree",
            MetricKind::Clustering => "clustering",
            MetricKind::Betweenness => "betweenness",
            MetricKind::Assortativity => "assortativity",
        }
    }
}

impl std::str::FromStr for MetricKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "degree" => Ok(MetricKind::Degree),
            "clustering" => Ok(MetricKind::Clustering),
            "betweenness" => Ok(MetricKind::Betweenness),
            "assortativity" => Ok(MetricKind::Assortativity),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}

/// A discrete probability distribution on the real line: strictly
/// increasing support with masses summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricDistribution {
    pub kind: MetricKind,
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MetricDistribution {
    fn from_values(kind: MetricKind, mut values: Vec<f64>) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("metric values are finite"));
        let n = values.len() as f64;
        let mut support = Vec::new();
        let mut weights = Vec::new();
        for v in values {
            match support.last() {
                Some(&last) if last == v => *weights.last_mut().unwrap() += 1.0 / n,
                _ => {
                    support.push(v);
                    weights.push(1.0 / n);
                }
            }
        }
        Some(MetricDistribution {
            kind,
            support,
            weights,
        })
    }
}

/// Empirical distribution of a per-node metric (or a one-point
/// distribution for the scalar assortativity). `None` signals an
/// undefined metric; callers skip the graph with a counted warning.
pub fn metric_distribution(g: &Graph, kind: MetricKind) -> Option<MetricDistribution> {
    let values = match kind {
        MetricKind::Degree => metrics::degree_vector(g).values,
        MetricKind::Clustering => metrics::local_clustering(g).values,
        MetricKind::Betweenness => metrics::betweenness(g).values,
        MetricKind::Assortativity => match metrics::assortativity(g) {
            ScalarMetric::Defined(v) => vec![v],
            ScalarMetric::Undefined => return None,
        },
    };
    MetricDistribution::from_values(kind, values)
}

/// Exact first-order Wasserstein distance between two discrete
/// distributions: the integral of |CDF_p - CDF_q| over the merged support.
pub fn wasserstein_1d(p: &MetricDistribution, q: &MetricDistribution) -> f64 {
    let mut i = 0;
    let mut j = 0;
    let mut cdf_p = 0.0_f64;
    let mut cdf_q = 0.0_f64;
    let mut prev_x: Option<f64> = None;
    let mut total = 0.0_f64;
    while i < p.support.len() || j < q.support.len() {
        let x = match (p.support.get(i), q.support.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        if let Some(prev) = prev_x {
            total += (cdf_p - cdf_q).abs() * (x - prev);
        }
        if i < p.support.len() && p.support[i] == x {
            cdf_p += p.weights[i];
            i += 1;
        }
        if j < q.support.len() && q.support[j] == x {
            cdf_q += q.weights[j];
            j += 1;
        }
        prev_x = Some(x);
    }
    total
}

/// Similarity kernel `exp(-W(p, q) / (2 sigma^2))`, in (0, 1].
pub fn kernel_w(p: &MetricDistribution, q: &MetricDistribution, sigma: f64) -> f64 {
    debug_assert!(sigma > 0.0);
    (-wasserstein_1d(p, q) / (2.0 * sigma * sigma)).exp()
}

/// Biased V-statistic estimator of squared MMD: full double sums over
/// both sets, diagonal included, which keeps the estimate non-negative.
pub fn mmd_squared(
    set_p: &[MetricDistribution],
    set_q: &[MetricDistribution],
    sigma: f64,
) -> Result<f64, EvalError> {
    if set_p.is_empty() || set_q.is_empty() {
        return Err(EvalError::EmptySet);
    }
    if !(sigma > 0.0) {
        return Err(EvalError::BadSigma(sigma));
    }
    let n = set_p.len() as f64;
    let m = set_q.len() as f64;
    let mut pp = 0.0;
    for a in set_p {
        for b in set_p {
            pp += kernel_w(a, b, sigma);
        }
    }
    let mut qq = 0.0;
    for a in set_q {
        for b in set_q {
            qq += kernel_w(a, b, sigma);
        }
    }
    let mut pq = 0.0;
    for a in set_p {
        for b in set_q {
            pq += kernel_w(a, b, sigma);
        }
    }
    Ok(pp / (n * n) + qq / (m * m) - 2.0 * pq / (n * m))
}

/// Bootstrap protocol parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    pub sample_size: usize,
    pub repetitions: usize,
    /// Kernel bandwidth; `None` selects the median heuristic (sigma^2 =
    /// median pairwise Wasserstein distance over a 200-pair probe of the
    /// real corpus).
    pub sigma: Option<f64>,
    pub rng_seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            sample_size: 500,
            repetitions: 100,
            sigma: None,
            rng_seed: 0,
        }
    }
}

/// Protocol echo embedded in every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MmdProtocol {
    pub sample_size: usize,
    pub repetitions: usize,
    pub sigma: f64,
}

/// Per-metric bootstrap result. The spread field is the sample standard
/// deviation of the point estimates (0 by convention for one repetition).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MmdReport {
    pub metric: MetricKind,
    pub point_estimates: Vec<f64>,
    pub mean: f64,
    pub stddev: f64,
    pub protocol: MmdProtocol,
    /// Graphs dropped because the metric was undefined on them.
    pub skipped_real: usize,
    pub skipped_synth: usize,
}

const SIGMA_PROBE_PAIRS: usize = 200;
const STREAM_SIGMA: u64 = 0x5153;
const STREAM_REPS: u64 = 0x5250;

fn median_heuristic_sigma(dists: &[MetricDistribution], seed: u64) -> f64 {
    if dists.len() < 2 {
        return 1.0;
    }
    let mut rng = seeded_rng(derive_seed(seed, STREAM_SIGMA));
    let mut probes: Vec<f64> = (0..SIGMA_PROBE_PAIRS)
        .map(|_| {
            let i = rng.gen_range(0..dists.len());
            let mut j = rng.gen_range(0..dists.len() - 1);
            if j >= i {
                j += 1;
            }
            wasserstein_1d(&dists[i], &dists[j])
        })
        .collect();
    probes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = probes[probes.len() / 2];
    if median > 0.0 {
        median.sqrt()
    } else {
        1.0
    }
}

/// Kernel values between every pair of (cached) distributions.
struct KernelTables {
    rr: Vec<f64>,
    ss: Vec<f64>,
    rs: Vec<f64>,
    n_real: usize,
    n_synth: usize,
}

impl KernelTables {
    fn build(real: &[MetricDistribution], synth: &[MetricDistribution], sigma: f64) -> Self {
        let n_real = real.len();
        let n_synth = synth.len();
        let rr_rows = parallel_map_indexed(n_real, |i| {
            (0..n_real)
                .map(|j| kernel_w(&real[i], &real[j], sigma))
                .collect::<Vec<f64>>()
        });
        let ss_rows = parallel_map_indexed(n_synth, |i| {
            (0..n_synth)
                .map(|j| kernel_w(&synth[i], &synth[j], sigma))
                .collect::<Vec<f64>>()
        });
        let rs_rows = parallel_map_indexed(n_real, |i| {
            (0..n_synth)
                .map(|j| kernel_w(&real[i], &synth[j], sigma))
                .collect::<Vec<f64>>()
        });
        KernelTables {
            rr: rr_rows.concat(),
            ss: ss_rows.concat(),
            rs: rs_rows.concat(),
            n_real,
            n_synth,
        }
    }

    fn mmd_for_indices(&self, real_idx: &[usize], synth_idx: &[usize]) -> f64 {
        let n = real_idx.len() as f64;
        let m = synth_idx.len() as f64;
        let mut pp = 0.0;
        for &i in real_idx {
            for &j in real_idx {
                pp += self.rr[i * self.n_real + j];
            }
        }
        let mut qq = 0.0;
        for &i in synth_idx {
            for &j in synth_idx {
                qq += self.ss[i * self.n_synth + j];
            }
        }
        let mut pq = 0.0;
        for &i in real_idx {
            for &j in synth_idx {
                pq += self.rs[i * self.n_synth + j];
            }
        }
        pp / (n * n) + qq / (m * m) - 2.0 * pq / (n * m)
    }
}

/// Per repetition: draw `sample_size` real graphs with replacement and
/// `sample_size` synthetic graphs (without replacement when the corpus is
/// large enough, with replacement otherwise), estimate squared MMD, and
/// report the mean and spread over repetitions.
pub fn bootstrap_mmd(
    real: &[Graph],
    synth: &[Graph],
    kind: MetricKind,
    cfg: &BootstrapConfig,
) -> Result<MmdReport, EvalError> {
    if cfg.sample_size == 0 || cfg.repetitions == 0 {
        return Err(EvalError::Invalid(
            "sample_size and repetitions must be >= 1".into(),
        ));
    }
    let real_dists: Vec<MetricDistribution> = real
        .iter()
        .filter_map(|g| metric_distribution(g, kind))
        .collect();
    let synth_dists: Vec<MetricDistribution> = synth
        .iter()
        .filter_map(|g| metric_distribution(g, kind))
        .collect();
    let skipped_real = real.len() - real_dists.len();
    let skipped_synth = synth.len() - synth_dists.len();
    if real_dists.is_empty() {
        return Err(EvalError::EmptySide {
            side: "real",
            metric: kind.name(),
        });
    }
    if synth_dists.is_empty() {
        return Err(EvalError::EmptySide {
            side: "synthetic",
            metric: kind.name(),
        });
    }
    let sigma = match cfg.sigma {
        Some(s) if s > 0.0 => s,
        Some(s) => return Err(EvalError::BadSigma(s)),
        None => median_heuristic_sigma(&real_dists, cfg.rng_seed),
    };
    let tables = KernelTables::build(&real_dists, &synth_dists, sigma);

    let point_estimates = parallel_map_indexed(cfg.repetitions, |rep| {
        let mut rng = seeded_rng(derive_seed(
            cfg.rng_seed,
            STREAM_REPS.wrapping_add(rep as u64),
        ));
        let real_idx: Vec<usize> = (0..cfg.sample_size)
            .map(|_| rng.gen_range(0..real_dists.len()))
            .collect();
        let synth_idx: Vec<usize> = if synth_dists.len() >= cfg.sample_size {
            // partial Fisher-Yates: a uniform sample without replacement
            let mut pool: Vec<usize> = (0..synth_dists.len()).collect();
            for k in 0..cfg.sample_size {
                let pick = rng.gen_range(k..pool.len());
                pool.swap(k, pick);
            }
            pool.truncate(cfg.sample_size);
            pool
        } else {
            (0..cfg.sample_size)
                .map(|_| rng.gen_range(0..synth_dists.len()))
                .collect()
        };
        tables.mmd_for_indices(&real_idx, &synth_idx)
    });

    let mean = point_estimates.iter().sum::<f64>() / point_estimates.len() as f64;
    let stddev = if point_estimates.len() < 2 {
        0.0
    } else {
        let var = point_estimates
            .iter()
            .map(|x| (x - mean).powi(2))
            .sum::<f64>()
            / (point_estimates.len() - 1) as f64;
        var.sqrt()
    };
    Ok(MmdReport {
        metric: kind,
        point_estimates,
        mean,
        stddev,
        protocol: MmdProtocol {
            sample_size: cfg.sample_size,
            repetitions: cfg.repetitions,
            sigma,
        },
        skipped_real,
        skipped_synth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{ba_generate, BaselineConfig};

    fn dist(kind: MetricKind, pairs: &[(f64, f64)]) -> MetricDistribution {
        MetricDistribution {
            kind,
            support: pairs.iter().map(|&(x, _)| x).collect(),
            weights: pairs.iter().map(|&(_, w)| w).collect(),
        }
    }

    fn triangle() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    fn star(n: usize) -> Graph {
        Graph::from_edges(n, (1..n).map(|i| (0, i))).unwrap()
    }

    fn path(n: usize) -> Graph {
        Graph::from_edges(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    #[test]
    fn distribution_examples() {
        let d = metric_distribution(&triangle(), MetricKind::Degree).unwrap();
        assert_eq!(d.support, vec![2.0]);
        assert_eq!(d.weights, vec![1.0]);

        let b = metric_distribution(&star(5), MetricKind::Betweenness).unwrap();
        assert_eq!(b.support, vec![0.0, 1.0]);
        assert!((b.weights[0] - 0.8).abs() < 1e-12);
        assert!((b.weights[1] - 0.2).abs() < 1e-12);

        // regular graph: assortativity undefined -> skip signal
        assert!(metric_distribution(&triangle(), MetricKind::Assortativity).is_none());
        let p = metric_distribution(&path(4), MetricKind::Assortativity).unwrap();
        assert_eq!(p.support, vec![-0.5]);
    }

    #[test]
    fn distribution_masses_sum_to_one() {
        let g = ba_generate(40, &BaselineConfig::default()).unwrap();
        for kind in MetricKind::ALL {
            if let Some(d) = metric_distribution(&g, kind) {
                let total: f64 = d.weights.iter().sum();
                assert!((total - 1.0).abs() < 1e-12);
                assert!(d.support.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn wasserstein_examples() {
        let p = dist(MetricKind::Degree, &[(0.0, 1.0)]);
        let q = dist(MetricKind::Degree, &[(3.0, 1.0)]);
        assert_eq!(wasserstein_1d(&p, &p), 0.0);
        assert_eq!(wasserstein_1d(&p, &q), 3.0);

        let uniform = dist(MetricKind::Degree, &[(0.0, 0.5), (1.0, 0.5)]);
        let point = dist(MetricKind::Degree, &[(0.0, 1.0)]);
        assert_eq!(wasserstein_1d(&uniform, &point), 0.5);
    }

    #[test]
    fn wasserstein_symmetry_and_triangle_inequality() {
        let mut rng = seeded_rng(10);
        for _ in 0..200 {
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                let n = rng.gen_range(1..6);
                let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
                MetricDistribution::from_values(MetricKind::Degree, values).unwrap()
            };
            let (a, b, c) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
            let (ab, ba) = (wasserstein_1d(&a, &b), wasserstein_1d(&b, &a));
            assert!((ab - ba).abs() < 1e-12);
            let (ac, cb) = (wasserstein_1d(&a, &c), wasserstein_1d(&c, &b));
            assert!(ab <= ac + cb + 1e-10);
        }
    }

    #[test]
    fn kernel_examples() {
        let p = dist(MetricKind::Degree, &[(0.0, 1.0)]);
        assert_eq!(kernel_w(&p, &p, 0.7), 1.0);

        // W = 2 sigma^2 gives exp(-1)
        let sigma = 1.3_f64;
        let q = dist(MetricKind::Degree, &[(2.0 * sigma * sigma, 1.0)]);
        assert!((kernel_w(&p, &q, sigma) - (-1.0_f64).exp()).abs() < 1e-12);

        // monotone: farther distributions, smaller kernel
        let near = dist(MetricKind::Degree, &[(1.0, 1.0)]);
        let far = dist(MetricKind::Degree, &[(4.0, 1.0)]);
        assert!(kernel_w(&p, &near, 1.0) > kernel_w(&p, &far, 1.0));
    }

    #[test]
    fn mmd_identities() {
        let set: Vec<MetricDistribution> = vec![
            dist(MetricKind::Degree, &[(0.0, 0.5), (2.0, 0.5)]),
            dist(MetricKind::Degree, &[(1.0, 1.0)]),
            dist(MetricKind::Degree, &[(0.5, 0.25), (1.5, 0.75)]),
        ];
        let self_mmd = mmd_squared(&set, &set, 0.9).unwrap();
        assert!(self_mmd.abs() <= 1e-12);

        let other = vec![dist(MetricKind::Degree, &[(5.0, 1.0)])];
        let ab = mmd_squared(&set, &other, 0.9).unwrap();
        let ba = mmd_squared(&other, &set, 0.9).unwrap();
        assert_eq!(ab, ba);
        assert!(ab >= 0.0);

        // two singleton sets with distance d: 2 - 2 exp(-d / (2 sigma^2))
        let a = vec![dist(MetricKind::Degree, &[(0.0, 1.0)])];
        let b = vec![dist(MetricKind::Degree, &[(3.0, 1.0)])];
        let sigma = 1.1_f64;
        let expected = 2.0 - 2.0 * (-3.0 / (2.0 * sigma * sigma)).exp();
        assert!((mmd_squared(&a, &b, sigma).unwrap() - expected).abs() < 1e-12);

        assert!(matches!(
            mmd_squared(&[], &set, 1.0),
            Err(EvalError::EmptySet)
        ));
    }

    #[test]
    fn bootstrap_is_deterministic_and_separates_corpora() {
        let paths: Vec<Graph> = (4..24).map(path).collect();
        let stars: Vec<Graph> = (4..24).map(star).collect();
        let cfg = BootstrapConfig {
            sample_size: 30,
            repetitions: 12,
            sigma: None,
            rng_seed: 77,
        };
        let self_report = bootstrap_mmd(&paths, &paths, MetricKind::Degree, &cfg).unwrap();
        let cross_report = bootstrap_mmd(&paths, &stars, MetricKind::Degree, &cfg).unwrap();
        assert!(cross_report.mean > 10.0 * self_report.mean);
        assert_eq!(self_report.point_estimates.len(), 12);

        let again = bootstrap_mmd(&paths, &stars, MetricKind::Degree, &cfg).unwrap();
        assert_eq!(cross_report, again);
    }

    #[test]
    fn bootstrap_single_repetition_has_zero_spread() {
        let graphs: Vec<Graph> = (4..14).map(path).collect();
        let cfg = BootstrapConfig {
            sample_size: 10,
            repetitions: 1,
            sigma: Some(1.0),
            rng_seed: 5,
        };
        let report = bootstrap_mmd(&graphs, &graphs, MetricKind::Degree, &cfg).unwrap();
        assert_eq!(report.stddev, 0.0);
        assert_eq!(report.point_estimates.len(), 1);
    }

    #[test]
    fn bootstrap_counts_skipped_undefined_graphs() {
        // triangles are regular: assortativity undefined, all skipped
        let mixed: Vec<Graph> = vec![triangle(), path(4), triangle(), path(5)];
        let cfg = BootstrapConfig {
            sample_size: 8,
            repetitions: 2,
            sigma: Some(1.0),
            rng_seed: 9,
        };
        let report = bootstrap_mmd(&mixed, &mixed, MetricKind::Assortativity, &cfg).unwrap();
        assert_eq!(report.skipped_real, 2);
        assert_eq!(report.skipped_synth, 2);

        let only_triangles: Vec<Graph> = vec![triangle(); 3];
        assert!(matches!(
            bootstrap_mmd(&only_triangles, &mixed, MetricKind::Assortativity, &cfg),
            Err(EvalError::EmptySide { side: "real", .. })
        ));
    }

    #[test]
    fn cached_tables_agree_with_direct_estimator() {
        let paths: Vec<Graph> = (4..10).map(path).collect();
        let stars: Vec<Graph> = (4..10).map(star).collect();
        let p: Vec<MetricDistribution> = paths
            .iter()
            .map(|g| metric_distribution(g, MetricKind::Degree).unwrap())
            .collect();
        let q: Vec<MetricDistribution> = stars
            .iter()
            .map(|g| metric_distribution(g, MetricKind::Degree).unwrap())
            .collect();
        let sigma = 0.8;
        let direct = mmd_squared(&p, &q, sigma).unwrap();
        let tables = KernelTables::build(&p, &q, sigma);
        let all_p: Vec<usize> = (0..p.len()).collect();
        let all_q: Vec<usize> = (0..q.len()).collect();
        let cached = tables.mmd_for_indices(&all_p, &all_q);
        assert!((direct - cached).abs() < 1e-12);
    }
}
