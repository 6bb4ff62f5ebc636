//! The training loop: bootstrap-sampled mini-batches, teacher forcing
//! with a stop row appended to every sample, Adam with gradient clipping,
//! a step learning-rate schedule, and an optional validation hook that
//! keeps the checkpoint with the best degree-distribution MMD.

use rand::Rng;
use thiserror::Error;

use super::adam::{adam_step, AdamConfig, AdamError, AdamState};
use super::gradient::backward;
use super::model::{bce_loss, forward, ModelDims, ModelError, ModelParams};
use super::sequence::{bfs_order, to_sequence, SequenceError};
use crate::eval::{bootstrap_mmd, BootstrapConfig, MetricKind};
use crate::graph::Graph;
use crate::synth::{synthesize_best_effort, SynthConfig};
use crate::util::{derive_seed, seeded_rng};

const STREAM_INIT: u64 = 0x11;
const STREAM_BATCHES: u64 = 0x22;
const STREAM_VALIDATION: u64 = 0x33;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("corpus graph {index} is disconnected; training requires connected graphs")]
    DisconnectedGraph { index: usize },
    #[error("non-finite loss at epoch {epoch}; lowering the learning rate usually helps")]
    NonFiniteLoss { epoch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Adam(#[from] AdamError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay: f64,
    /// Learning rate is multiplied by `lr_decay` once training has passed
    /// each of these epochs.
    pub decay_epochs: Vec<usize>,
    pub adam: AdamConfig,
    pub grad_clip: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            batch_size: 40,
            lr: 0.003,
            lr_decay: 0.3,
            decay_epochs: vec![300, 400],
            adam: AdamConfig::default(),
            grad_clip: 5.0,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(TrainError::Model(ModelError::DimMismatch(
                "epochs and batch_size must be >= 1".into(),
            )));
        }
        if !(self.lr > 0.0) || !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(TrainError::Model(ModelError::DimMismatch(
                "need lr > 0 and 0 < lr_decay <= 1".into(),
            )));
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (1-based).
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        let decays = self.decay_epochs.iter().filter(|&&d| epoch > d).count();
        self.lr * self.lr_decay.powi(decays as i32)
    }
}

/// Validation corpus and the reduced MMD protocol evaluated during
/// training (kept cheaper than the final evaluation protocol).
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationConfig {
    pub graphs: Vec<Graph>,
    /// Evaluate every this many epochs.
    pub interval: usize,
    pub synth_count: usize,
    pub sample_size: usize,
    pub repetitions: usize,
}

impl ValidationConfig {
    pub fn new(graphs: Vec<Graph>, interval: usize) -> Self {
        ValidationConfig {
            graphs,
            interval: interval.max(1),
            synth_count: 100,
            sample_size: 100,
            repetitions: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub lr: f64,
    pub val_mmd_degree: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainingHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,mean_loss,lr,val_mmd_degree\n");
        for r in &self.records {
            let val = r
                .val_mmd_degree
                .map(|v| format!("{v:.12e}"))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{:.12e},{:.6e},{}\n",
                r.epoch, r.mean_loss, r.lr, val
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub moments: AdamState,
    pub history: TrainingHistory,
    /// Epoch whose checkpoint was retained when validation ran.
    pub best_epoch: Option<usize>,
}

/// Train on `corpus` for `cfg.epochs`. Each epoch draws
/// `ceil(|corpus| / batch_size)` mini-batches by uniform bootstrap
/// sampling; every visit re-orders the graph with a fresh random BFS.
/// Bit-reproducible given (corpus, seed, dims).
pub fn train(
    corpus: &[Graph],
    validation: Option<&ValidationConfig>,
    cfg: &TrainConfig,
    dims: ModelDims,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    dims.validate()?;
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    if let Some(index) = (0..corpus.len()).find(|&i| !corpus[i].is_connected()) {
        return Err(TrainError::DisconnectedGraph { index });
    }

    let mut params = ModelParams::init(dims, derive_seed(cfg.rng_seed, STREAM_INIT));
    let mut adam = AdamState::new(params.len());
    let mut rng = seeded_rng(derive_seed(cfg.rng_seed, STREAM_BATCHES));
    let batches_per_epoch = corpus.len().div_ceil(cfg.batch_size).max(1);
    let mut history = TrainingHistory::default();
    let mut best: Option<(f64, ModelParams, usize)> = None;

    for epoch in 1..=cfg.epochs {
        let lr = cfg.lr_at_epoch(epoch);
        let mut loss_sum = 0.0;
        let mut sample_count = 0usize;
        for _ in 0..batches_per_epoch {
            let mut grad_acc = vec![0.0; params.len()];
            for _ in 0..cfg.batch_size {
                let g = &corpus[rng.gen_range(0..corpus.len())];
                let order = bfs_order(g, &mut rng)?;
                let target = to_sequence(g, &order, dims.transient)?.with_stop_row();
                let (probs, cache) = forward(&params, &target)?;
                let loss = bce_loss(&probs, &target)?;
                if !loss.is_finite() {
                    return Err(TrainError::NonFiniteLoss { epoch });
                }
                loss_sum += loss;
                sample_count += 1;
                let grads = backward(&params, &cache, &target)?;
                for (acc, g) in grad_acc.iter_mut().zip(&grads) {
                    *acc += g;
                }
            }
            for g in grad_acc.iter_mut() {
                *g /= cfg.batch_size as f64;
            }
            adam_step(
                params.data_mut(),
                &mut grad_acc,
                &mut adam,
                lr,
                cfg.grad_clip,
                &cfg.adam,
            )?;
        }
        let mean_loss = loss_sum / sample_count as f64;

        let mut val_mmd = None;
        if let Some(vc) = validation {
            if epoch % vc.interval == 0 || epoch == cfg.epochs {
                let seed = derive_seed(cfg.rng_seed, STREAM_VALIDATION ^ (epoch as u64) << 8);
                val_mmd = validation_mmd(&params, vc, seed);
                if let Some(mmd) = val_mmd {
                    if best.as_ref().map_or(true, |(b, _, _)| mmd < *b) {
                        best = Some((mmd, params.clone(), epoch));
                    }
                }
            }
        }
        history.records.push(EpochRecord {
            epoch,
            mean_loss,
            lr,
            val_mmd_degree: val_mmd,
        });
    }

    let (params, best_epoch) = match best {
        Some((_, p, e)) => (p, Some(e)),
        None => (params, None),
    };
    Ok(TrainOutcome {
        params,
        moments: adam,
        history,
        best_epoch,
    })
}

/// Degree-distribution MMD of freshly synthesized graphs against the
/// validation corpus; `None` when the model cannot yet produce any
/// in-range graph.
fn validation_mmd(params: &ModelParams, vc: &ValidationConfig, seed: u64) -> Option<f64> {
    let n_min = vc.graphs.iter().map(Graph::node_count).min()?;
    let n_max = vc.graphs.iter().map(Graph::node_count).max()?;
    let synth_cfg = SynthConfig {
        max_attempts: vc.synth_count * 20,
        ..SynthConfig::with_bounds(vc.synth_count, n_min, n_max, derive_seed(seed, 0))
    };
    let run = synthesize_best_effort(params, &synth_cfg).ok()?;
    if run.graphs.is_empty() {
        return None;
    }
    let cfg = BootstrapConfig {
        sample_size: vc.sample_size,
        repetitions: vc.repetitions,
        sigma: None,
        rng_seed: derive_seed(seed, 1),
    };
    bootstrap_mmd(&vc.graphs, &run.graphs, MetricKind::Degree, &cfg)
        .ok()
        .map(|r| r.mean)
}
