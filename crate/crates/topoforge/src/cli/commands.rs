//! Implementations of the subcommands.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{
    CliError, EvalArgs, ExtractArgs, GenerateArgs, GenerateBaselineArgs, IngestArgs, MetricsArgs,
    Settings, TrainArgs,
};
use crate::baselines::{self, BaselineConfig, BaselineKind, FitnessSpec, GammaParams};
use crate::community::{frm_extract_outcome, FrmConfig};
use crate::dggm::{
    estimate_transient_dim, load_checkpoint, save_checkpoint, train as train_model, ModelDims,
    TrainConfig, ValidationConfig,
};
use crate::eval::{bootstrap_mmd, metric_distribution, BootstrapConfig, MetricKind};
use crate::graph::{load_edge_list_dir, Graph};
use crate::ingest::{
    build_intra_as_graphs, expand_links_to_edges, parse_geo, parse_links, parse_router_as,
    ParseMode,
};
use crate::manifest::PipelineManifest;
use crate::metrics::{average_degree, betweenness_ratio, global_clustering};
use crate::synth::{synthesize, SynthConfig, TauPolicy};
use crate::util::{derive_seed, parallel_map_indexed, seeded_rng, worker_threads};

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))
}

fn open_input(path: &Path) -> Result<BufReader<std::fs::File>, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::input(format!("cannot open {}: {e}", path.display())))?;
    Ok(BufReader::new(file))
}

/// Load a nonempty, name-sorted corpus of edge lists.
fn load_corpus(dir: &Path) -> Result<Vec<(String, Graph)>, CliError> {
    let graphs = load_edge_list_dir(dir)
        .map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    if graphs.is_empty() {
        return Err(CliError::input(format!(
            "no *.edges files in {}",
            dir.display()
        )));
    }
    Ok(graphs)
}

fn base_manifest(stage: &str, settings: &Settings) -> PipelineManifest {
    let mut manifest = PipelineManifest::new(stage);
    for (key, value) in &settings.effective {
        manifest.config(key, value);
    }
    manifest.config("threads", worker_threads());
    manifest
}

pub(super) fn ingest(args: IngestArgs, mut settings: Settings) -> Result<(), CliError> {
    let strict = settings.resolve(args.strict.then_some(true), "strict", false)?;
    let mode = if strict {
        ParseMode::Strict
    } else {
        ParseMode::Skip
    };

    let (links, link_warnings) = parse_links(open_input(&args.links)?, mode)?;
    let (router_as, ras_warnings) = parse_router_as(open_input(&args.router_as)?, mode)?;
    let geo = match &args.geo {
        Some(path) => Some(parse_geo(open_input(path)?, mode)?),
        None => None,
    };
    let edges = expand_links_to_edges(&links);
    let (as_graphs, warnings) =
        build_intra_as_graphs(&edges, &router_as, geo.as_ref().map(|(map, _)| map))?;

    ensure_out_dir(&args.out)?;
    let mut manifest = base_manifest("ingest", &settings);
    manifest.digest_input(&args.links)?;
    manifest.digest_input(&args.router_as)?;
    if let Some(path) = &args.geo {
        manifest.digest_input(path)?;
    }
    manifest
        .counter("links", links.len() as u64)
        .counter("routers", router_as.len() as u64)
        .counter("expanded_edges", edges.len() as u64)
        .counter("as_graphs", as_graphs.len() as u64)
        .counter("unknown_as_routers", warnings.unknown_as_routers as u64)
        .counter("multi_edges_collapsed", warnings.multi_edges_collapsed as u64)
        .counter("self_edges_dropped", warnings.self_edges_dropped as u64)
        .counter(
            "malformed_lines_skipped",
            (link_warnings.malformed_lines.len()
                + ras_warnings.malformed_lines.len()
                + geo.as_ref().map_or(0, |(_, w)| w.malformed_lines.len()))
                as u64,
        );

    for (asn, as_graph) in &as_graphs {
        let edges_name = format!("as{asn}.edges");
        as_graph
            .graph
            .write_edge_list_path(&args.out.join(&edges_name))?;
        let mut nodes = String::new();
        for (idx, router) in as_graph.routers.iter().enumerate() {
            nodes.push_str(&format!("{idx} {router}"));
            if let Some(attrs) = as_graph.graph.node_attrs(idx) {
                if let (Some(lat), Some(lon)) = (attrs.get("lat"), attrs.get("lon")) {
                    nodes.push_str(&format!(" {lat} {lon}"));
                }
            }
            nodes.push('\n');
        }
        let nodes_name = format!("as{asn}.nodes");
        std::fs::write(args.out.join(&nodes_name), nodes)?;
        manifest.output(format!(
            "{edges_name} nodes={} edges={}",
            as_graph.graph.node_count(),
            as_graph.graph.edge_count()
        ));
    }
    manifest.write_into(&args.out)?;
    Ok(())
}

pub(super) fn extract(args: ExtractArgs, mut settings: Settings) -> Result<(), CliError> {
    let n_min = settings.resolve(args.min, "min", 12)?;
    let n_max = settings.resolve(args.max, "max", 250)?;
    let seed = settings.resolve(args.seed, "seed", 0)?;
    let inputs = load_corpus(&args.input)?;
    ensure_out_dir(&args.out)?;

    let mut manifest = base_manifest("extract", &settings);
    manifest.seed("root", seed);
    let mut accepted_total = 0u64;
    for (index, (stem, graph)) in inputs.iter().enumerate() {
        let cfg = FrmConfig {
            n_min,
            n_max,
            rng_seed: derive_seed(seed, index as u64),
        };
        let outcome = frm_extract_outcome(graph, &cfg)?;
        manifest
            .add_counter("inputs", 1)
            .add_counter("accepted", outcome.stats.accepted as u64)
            .add_counter("discarded_small", outcome.stats.discarded_small as u64)
            .add_counter("discarded_star", outcome.stats.discarded_star as u64)
            .add_counter("unsplittable", outcome.stats.unsplittable as u64);
        manifest.counter(
            "max_recursion_depth",
            manifest
                .counters
                .get("max_recursion_depth")
                .copied()
                .unwrap_or(0)
                .max(outcome.stats.max_depth as u64),
        );
        for (k, sub) in outcome.subgraphs.iter().enumerate() {
            let name = format!("{stem}-{k:04}.edges");
            sub.graph.write_edge_list_path(&args.out.join(&name))?;
            manifest.output(format!(
                "{name} source={stem} path={} nodes={}",
                sub.recursion_path,
                sub.graph.node_count()
            ));
            accepted_total += 1;
        }
    }
    manifest.counter("outputs", accepted_total);
    manifest.write_into(&args.out)?;
    Ok(())
}

pub(super) fn train(args: TrainArgs, mut settings: Settings) -> Result<(), CliError> {
    let epochs = settings.resolve(args.epochs, "epochs", 500)?;
    let batch = settings.resolve(args.batch, "batch", 40)?;
    let lr = settings.resolve(args.lr, "lr", 0.003)?;
    let lr_decay = settings.resolve(args.lr_decay, "lr-decay", 0.3)?;
    let decay_epochs_raw =
        settings.resolve(args.decay_epochs, "decay-epochs", "300,400".to_string())?;
    let grad_clip = settings.resolve(args.grad_clip, "grad-clip", 5.0)?;
    let dim_l = settings.resolve(args.dim_l, "dim-l", 64)?;
    let seed = settings.resolve(args.seed, "seed", 0)?;
    let val_interval = settings.resolve(args.val_interval, "val-interval", 10)?;

    let decay_epochs: Vec<usize> = decay_epochs_raw
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::input(format!("bad decay epoch `{s}`")))
        })
        .collect::<Result<_, _>>()?;

    let inputs = load_corpus(&args.input)?;
    let mut corpus: Vec<Graph> = Vec::with_capacity(inputs.len());
    let mut skipped_disconnected = 0u64;
    for (_, g) in inputs {
        if g.is_connected() && g.node_count() > 1 {
            corpus.push(g);
        } else {
            skipped_disconnected += 1;
        }
    }
    if corpus.is_empty() {
        return Err(CliError::data(format!(
            "no connected training graphs in {}",
            args.input.display()
        )));
    }

    let dim_m = match settings.resolve_opt(args.dim_m, "dim-m")? {
        Some(m) => m,
        None => {
            let mut rng = seeded_rng(derive_seed(seed, 0x4d));
            estimate_transient_dim(&corpus, 1.0, 10, &mut rng)?
        }
    };
    let dims = match settings.resolve_opt(args.dim_edge, "dim-edge")? {
        Some(edge) => ModelDims {
            transient: dim_m,
            latent: dim_l,
            edge_latent: edge,
        },
        None => ModelDims::new(dim_m, dim_l),
    };

    let validation = match &args.val {
        Some(dir) => {
            let graphs: Vec<Graph> = load_corpus(dir)?
                .into_iter()
                .map(|(_, g)| g)
                .filter(|g| g.is_connected() && g.node_count() > 1)
                .collect();
            if graphs.is_empty() {
                return Err(CliError::data(format!(
                    "no connected validation graphs in {}",
                    dir.display()
                )));
            }
            Some(ValidationConfig::new(graphs, val_interval))
        }
        None => None,
    };

    let cfg = TrainConfig {
        epochs,
        batch_size: batch,
        lr,
        lr_decay,
        decay_epochs,
        grad_clip,
        rng_seed: seed,
        ..TrainConfig::default()
    };
    let outcome = train_model(&corpus, validation.as_ref(), &cfg, dims)?;

    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_out_dir(parent)?;
        }
    }
    save_checkpoint(&args.out, &outcome.params, Some(&outcome.moments))?;
    let history_path = args
        .history
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.history.csv", args.out.display())));
    std::fs::write(&history_path, outcome.history.to_csv())?;

    let mut manifest = base_manifest("train", &settings);
    manifest
        .seed("root", seed)
        .config("dim-m", dims.transient)
        .config("dim-l", dims.latent)
        .config("dim-edge", dims.edge_latent)
        .counter("corpus_graphs", corpus.len() as u64)
        .counter("skipped_disconnected", skipped_disconnected)
        .counter("epochs_run", outcome.history.records.len() as u64)
        .counter("parameters", outcome.params.len() as u64);
    if let Some(best) = outcome.best_epoch {
        manifest.counter("best_epoch", best as u64);
    }
    if let Some(last) = outcome.history.records.last() {
        manifest.config("final_mean_loss", format!("{:.6e}", last.mean_loss));
    }
    manifest
        .output(args.out.display().to_string())
        .output(history_path.display().to_string());
    std::fs::write(
        PathBuf::from(format!("{}.manifest.json", args.out.display())),
        manifest.to_json() + "\n",
    )?;
    Ok(())
}

fn parse_size_range(raw: &str) -> Result<(usize, usize), CliError> {
    let (lo, hi) = raw
        .split_once("..")
        .ok_or_else(|| CliError::input(format!("expected MIN..MAX, got `{raw}`")))?;
    let lo = lo
        .trim()
        .parse::<usize>()
        .map_err(|_| CliError::input(format!("bad size `{lo}`")))?;
    let hi = hi
        .trim()
        .parse::<usize>()
        .map_err(|_| CliError::input(format!("bad size `{hi}`")))?;
    if lo > hi || hi == 0 {
        return Err(CliError::input(format!("empty size range `{raw}`")));
    }
    Ok((lo, hi))
}

pub(super) fn generate(args: GenerateArgs, mut settings: Settings) -> Result<(), CliError> {
    let count = settings.resolve(args.count, "count", 100)?;
    let sizes_raw = settings.resolve(args.sizes, "sizes", "12..250".to_string())?;
    let tau_raw = settings.resolve(args.tau, "tau", "per-node".to_string())?;
    let seed = settings.resolve(args.seed, "seed", 0)?;
    let max_attempts = settings.resolve(args.max_attempts, "max-attempts", 200 * count.max(1))?;
    let early_stop = settings.resolve(args.early_stop.then_some(true), "early-stop", false)?;

    let tau_policy: TauPolicy = tau_raw.parse().map_err(CliError::input)?;
    let (n_min, n_max) = parse_size_range(&sizes_raw)?;
    let allowed_sizes: Option<BTreeSet<usize>> = match &args.size_list {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            let sizes = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| {
                    l.parse::<usize>()
                        .map_err(|_| CliError::input(format!("bad size `{l}` in size list")))
                })
                .collect::<Result<BTreeSet<usize>, _>>()?;
            Some(sizes)
        }
        None => None,
    };

    let checkpoint = load_checkpoint(&args.model)?;
    let cfg = SynthConfig {
        count,
        allowed_sizes,
        n_min,
        n_max,
        tau_policy,
        max_attempts,
        early_stop,
        rng_seed: seed,
    };
    let run = synthesize(&checkpoint.params, &cfg)?;

    ensure_out_dir(&args.out)?;
    let mut manifest = base_manifest("generate", &settings);
    manifest.digest_input(&args.model)?;
    manifest
        .seed("root", seed)
        .config("model_dims", format!(
            "M={} L={} L'={}",
            checkpoint.params.dims.transient,
            checkpoint.params.dims.latent,
            checkpoint.params.dims.edge_latent
        ))
        .counter("graphs", run.graphs.len() as u64)
        .counter("free_runs", run.stats.runs as u64)
        .counter("components_seen", run.stats.components_seen as u64)
        .counter("tau_draws", run.stats.tau_draws as u64)
        .config("tau_mean", format!("{:.6}", run.stats.tau_mean))
        .config(
            "acceptance_rate",
            format!("{:.6}", run.stats.acceptance_rate()),
        );
    for (i, g) in run.graphs.iter().enumerate() {
        let name = format!("gen-{i:04}.edges");
        g.write_edge_list_path(&args.out.join(&name))?;
        manifest.output(format!("{name} nodes={}", g.node_count()));
    }
    manifest.write_into(&args.out)?;
    Ok(())
}

fn parse_gamma(raw: &str) -> Result<GammaParams, CliError> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(CliError::input(format!(
            "expected `shape,scale,location`, got `{raw}`"
        )));
    }
    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| CliError::input(format!("bad gamma component `{s}`")))
    };
    let params = GammaParams {
        shape: parse(parts[0])?,
        scale: parse(parts[1])?,
        location: parse(parts[2])?,
    };
    params.validate()?;
    Ok(params)
}

fn parse_fitness(raw: &str) -> Result<FitnessSpec, CliError> {
    let (kind, rest) = raw
        .split_once(':')
        .ok_or_else(|| CliError::input(format!("expected `uniform:LO,HI` or `constant:V`, got `{raw}`")))?;
    match kind.trim() {
        "constant" => Ok(FitnessSpec::Constant(rest.trim().parse::<f64>().map_err(
            |_| CliError::input(format!("bad fitness constant `{rest}`")),
        )?)),
        "uniform" => {
            let (lo, hi) = rest
                .split_once(',')
                .ok_or_else(|| CliError::input(format!("expected `uniform:LO,HI`, got `{raw}`")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::input(format!("bad fitness bound `{s}`")))
            };
            Ok(FitnessSpec::Uniform {
                lo: parse(lo)?,
                hi: parse(hi)?,
            })
        }
        other => Err(CliError::input(format!("unknown fitness kind `{other}`"))),
    }
}

pub(super) fn generate_baseline(
    args: GenerateBaselineArgs,
    mut settings: Settings,
) -> Result<(), CliError> {
    let kind: BaselineKind = settings
        .resolve(Some(args.kind.clone()), "kind", String::new())?
        .parse()
        .map_err(CliError::input)?;
    let count = settings.resolve(args.count, "count", 100)?;
    let n_min = settings.resolve(args.min, "min", 12)?;
    let n_max = settings.resolve(args.max, "max", 250)?;
    let seed = settings.resolve(args.seed, "seed", 0)?;
    let m_links = settings.resolve(args.m_links, "m-links", 2)?;
    let dba_p_single = settings.resolve(args.dba_p_single, "dba-p-single", 0.35)?;
    let eba_raw = settings.resolve(args.eba_probs, "eba-probs", "0.5,0.25,0.25".to_string())?;
    let fitness_raw = settings.resolve(args.bb_fitness, "bb-fitness", "uniform:0,1".to_string())?;

    let eba: Vec<f64> = eba_raw
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::input(format!("bad probability `{s}`")))
        })
        .collect::<Result<_, _>>()?;
    if eba.len() != 3 {
        return Err(CliError::input("eba-probs needs three values".to_string()));
    }
    let bb_fitness = parse_fitness(&fitness_raw)?;

    let gamma = match &args.gamma_from {
        Some(dir) => {
            let counts: Vec<f64> = load_corpus(dir)?
                .iter()
                .map(|(_, g)| g.node_count() as f64)
                .collect();
            let fitted = baselines::fit_gamma_mle(&counts)?;
            settings.effective.insert(
                "gamma".to_string(),
                format!(
                    "{:.6},{:.6},{:.6} (fitted from {})",
                    fitted.shape,
                    fitted.scale,
                    fitted.location,
                    dir.display()
                ),
            );
            fitted
        }
        None => {
            let raw = settings.resolve(args.gamma, "gamma", "0.852,59.64,11.99".to_string())?;
            parse_gamma(&raw)?
        }
    };

    ensure_out_dir(&args.out)?;
    let mut manifest = base_manifest("generate-baseline", &settings);
    manifest.seed("root", seed);
    let mut size_rng = seeded_rng(derive_seed(seed, 0x5a));
    for i in 0..count {
        let n = if n_min == n_max {
            n_min
        } else {
            baselines::sample_node_count(&gamma, n_min, n_max, &mut size_rng)?
        };
        let graph_seed = derive_seed(seed, 0x100 + i as u64);
        let cfg = BaselineConfig {
            kind,
            m_links,
            eba_p_ba: eba[0],
            eba_p_add: eba[1],
            eba_p_rewire: eba[2],
            dba_p_single,
            bb_fitness,
            rng_seed: graph_seed,
        };
        let g = baselines::generate(n, &cfg)?;
        let name = format!("{}-{i:04}.edges", kind_name(kind));
        g.write_edge_list_path(&args.out.join(&name))?;
        manifest.output(format!("{name} seed={graph_seed} nodes={n}"));
    }
    manifest.counter("graphs", count as u64);
    manifest.write_into(&args.out)?;
    Ok(())
}

fn kind_name(kind: BaselineKind) -> &'static str {
    match kind {
        BaselineKind::Ba => "ba",
        BaselineKind::Eba => "eba",
        BaselineKind::Dba => "dba",
        BaselineKind::Bb => "bb",
    }
}

#[derive(Serialize)]
struct EvalReportEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stddev: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped_real: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped_synth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    point_estimates: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct EvalReport {
    /// What the `+/- spread` denotes in this report.
    spread_kind: &'static str,
    sample_size: usize,
    repetitions: usize,
    metrics: BTreeMap<String, EvalReportEntry>,
}

/// Uniform mixture of the per-graph distributions, for histogram dumps.
fn pooled_distribution(graphs: &[Graph], kind: MetricKind) -> Vec<(f64, f64)> {
    let dists: Vec<_> = graphs
        .iter()
        .filter_map(|g| metric_distribution(g, kind))
        .collect();
    if dists.is_empty() {
        return Vec::new();
    }
    let share = 1.0 / dists.len() as f64;
    let mut pairs: Vec<(f64, f64)> = dists
        .iter()
        .flat_map(|d| {
            d.support
                .iter()
                .zip(&d.weights)
                .map(|(&x, &w)| (x, w * share))
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (x, w) in pairs {
        match merged.last_mut() {
            Some((last_x, last_w)) if *last_x == x => *last_w += w,
            _ => merged.push((x, w)),
        }
    }
    merged
}

fn write_histogram(path: &Path, pairs: &[(f64, f64)]) -> Result<(), CliError> {
    let mut csv = String::from("value,weight\n");
    for (x, w) in pairs {
        csv.push_str(&format!("{x},{w}\n"));
    }
    std::fs::write(path, csv)?;
    Ok(())
}

pub(super) fn eval(args: EvalArgs, mut settings: Settings) -> Result<(), CliError> {
    let samples = settings.resolve(args.samples, "samples", 500)?;
    let reps = settings.resolve(args.reps, "reps", 100)?;
    let seed = settings.resolve(args.seed, "seed", 0)?;
    let sigma = settings.resolve_opt(args.sigma, "sigma")?;
    let metrics_raw = settings.resolve(
        args.metrics,
        "metrics",
        "degree,clustering,betweenness,assortativity".to_string(),
    )?;
    let kinds: Vec<MetricKind> = metrics_raw
        .split(',')
        .map(|s| s.trim().parse::<MetricKind>().map_err(CliError::input))
        .collect::<Result<_, _>>()?;

    let real: Vec<Graph> = load_corpus(&args.real)?.into_iter().map(|(_, g)| g).collect();
    let synth: Vec<Graph> = load_corpus(&args.synth)?
        .into_iter()
        .map(|(_, g)| g)
        .collect();

    let mut report = EvalReport {
        spread_kind: "stddev",
        sample_size: samples,
        repetitions: reps,
        metrics: BTreeMap::new(),
    };
    let mut any_ok = false;
    let out_stem = args.out.with_extension("");
    for (idx, kind) in kinds.iter().enumerate() {
        let cfg = BootstrapConfig {
            sample_size: samples,
            repetitions: reps,
            sigma,
            rng_seed: derive_seed(seed, idx as u64),
        };
        let entry = match bootstrap_mmd(&real, &synth, *kind, &cfg) {
            Ok(r) => {
                any_ok = true;
                EvalReportEntry {
                    mean: Some(r.mean),
                    stddev: Some(r.stddev),
                    sigma: Some(r.protocol.sigma),
                    skipped_real: Some(r.skipped_real),
                    skipped_synth: Some(r.skipped_synth),
                    point_estimates: Some(r.point_estimates),
                    error: None,
                }
            }
            Err(e) => EvalReportEntry {
                mean: None,
                stddev: None,
                sigma: None,
                skipped_real: None,
                skipped_synth: None,
                point_estimates: None,
                error: Some(e.to_string()),
            },
        };
        report.metrics.insert(kind.name().to_string(), entry);
        // Fig-style histogram dumps for plotting
        let real_hist = pooled_distribution(&real, *kind);
        let synth_hist = pooled_distribution(&synth, *kind);
        write_histogram(
            &PathBuf::from(format!("{}_hist_{}_real.csv", out_stem.display(), kind.name())),
            &real_hist,
        )?;
        write_histogram(
            &PathBuf::from(format!(
                "{}_hist_{}_synth.csv",
                out_stem.display(),
                kind.name()
            )),
            &synth_hist,
        )?;
    }
    if !any_ok {
        return Err(CliError::data(
            "no requested metric produced a defined distribution on both corpora".to_string(),
        ));
    }
    std::fs::write(
        &args.out,
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    )?;

    let mut manifest = base_manifest("eval", &settings);
    manifest
        .seed("root", seed)
        .counter("real_graphs", real.len() as u64)
        .counter("synth_graphs", synth.len() as u64)
        .output(args.out.display().to_string());
    std::fs::write(
        PathBuf::from(format!("{}.manifest.json", args.out.display())),
        manifest.to_json() + "\n",
    )?;
    Ok(())
}

pub(super) fn metrics(args: MetricsArgs, settings: Settings) -> Result<(), CliError> {
    let inputs = load_corpus(&args.input)?;
    let rows = parallel_map_indexed(inputs.len(), |i| {
        let (stem, g) = &inputs[i];
        let fmt = |m: crate::metrics::ScalarMetric| m.value().map(|v| v.to_string()).unwrap_or_default();
        (
            format!(
                "{stem},{},{},{},{},{}\n",
                g.node_count(),
                fmt(average_degree(g)),
                fmt(crate::metrics::assortativity(g)),
                fmt(global_clustering(g)),
                fmt(betweenness_ratio(g))
            ),
            [
                crate::metrics::assortativity(g).is_defined(),
                global_clustering(g).is_defined(),
                betweenness_ratio(g).is_defined(),
            ],
        )
    });
    let mut csv =
        String::from("graph,nodes,avg_degree,assortativity,global_clustering,betweenness_ratio\n");
    let mut undefined = [0u64; 3];
    for (line, defined) in rows {
        csv.push_str(&line);
        for (slot, ok) in undefined.iter_mut().zip(defined) {
            if !ok {
                *slot += 1;
            }
        }
    }
    std::fs::write(&args.out, csv)?;

    let mut manifest = base_manifest("metrics", &settings);
    manifest
        .counter("graphs", inputs.len() as u64)
        .counter("undefined_assortativity", undefined[0])
        .counter("undefined_global_clustering", undefined[1])
        .counter("undefined_betweenness_ratio", undefined[2])
        .output(args.out.display().to_string());
    std::fs::write(
        PathBuf::from(format!("{}.manifest.json", args.out.display())),
        manifest.to_json() + "\n",
    )?;
    Ok(())
}
