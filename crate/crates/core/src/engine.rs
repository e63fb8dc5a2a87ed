//! Experiment orchestration: expert pretraining, the lifelong learning loop
//! for the four expert-based modes, and the Shared-Bottom comparison runner.
//!
//! Every SDL row is `image | feature | context`. The context slot holds the
//! attention context in attention modes once replay data exists for the
//! routed expert, and zeros otherwise, so all modes share one architecture.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::attention::attend;
use crate::metrics::{accuracy, auroc, TaskRecord};
use crate::nn::{bce_logit_grad, bce_loss, Adam, AdamConfig, CnnConfig, ExpertCnn, Sdl, SdlConfig, SharedBottom};
use crate::replay::{ReplayBuffer, ReplayEntry};
use crate::rng::{self, tag, Rng};
use crate::similarity::{feature_stats, select_expert, FeatureStats, SimilarityMetric};
use crate::task::{Sequence, Task};
use crate::{Error, Real, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Tame,
    AeTame,
    Baseline,
    AeBaseline,
    SharedBottom,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Tame, Mode::AeTame, Mode::Baseline, Mode::AeBaseline, Mode::SharedBottom];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Tame => "tame",
            Mode::AeTame => "ae-tame",
            Mode::Baseline => "baseline",
            Mode::AeBaseline => "ae-baseline",
            Mode::SharedBottom => "shared-bottom",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        let norm: String = s.chars().map(|c| if c == '_' { '-' } else { c.to_ascii_lowercase() }).collect();
        Mode::ALL.into_iter().find(|m| m.name() == norm)
    }

    pub fn uses_attention(self) -> bool {
        matches!(self, Mode::AeTame | Mode::AeBaseline)
    }

    pub fn uses_similarity(self) -> bool {
        matches!(self, Mode::Tame | Mode::AeTame)
    }

    pub fn uses_experts(self) -> bool {
        self != Mode::SharedBottom
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub mode: Mode,
    pub metric: SimilarityMetric,
    pub pretrain_epochs: usize,
    pub lifelong_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub buffer_capacity: usize,
    pub master_seed: u64,
    /// Stratified share of each lifelong task held out for evaluation.
    pub eval_fraction: f64,
    /// Replay ablation switch; when false the buffer is never consulted.
    pub replay: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: Mode::Tame,
            metric: SimilarityMetric::Fid,
            pretrain_epochs: 5,
            lifelong_epochs: 3,
            batch_size: 32,
            learning_rate: 1e-3,
            buffer_capacity: 1000,
            master_seed: 0,
            eval_fraction: 0.25,
            replay: true,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pretrain_epochs == 0 || self.lifelong_epochs == 0 || self.batch_size == 0 || self.buffer_capacity == 0 {
            return Err(Error::invalid("epochs, batch size and buffer capacity must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.eval_fraction) {
            return Err(Error::invalid("eval fraction must be in [0, 1)"));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }
}

/// Frozen experts, their cached initialization statistics and the shared dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertPool<S> {
    pub experts: Vec<ExpertCnn<S>>,
    pub sdl: Sdl<S>,
    pub init_stats: Vec<FeatureStats>,
}

impl<S: Real> ExpertPool<S> {
    /// Randomly initialized pool of `n` experts plus an SDL sized for `cnn`.
    pub fn new(cnn: CnnConfig, n: usize, master_seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("expert pool"));
        }
        let experts = (0..n)
            .map(|i| ExpertCnn::new(cnn, &mut rng::stream(master_seed, &[tag::EXPERT_INIT, i as u64])))
            .collect::<Result<Vec<_>>>()?;
        let sdl_cfg = SdlConfig::new(SdlConfig::row_width(cnn.image_dim(), cnn.feature_dim));
        let sdl = Sdl::new(sdl_cfg, &mut rng::stream(master_seed, &[tag::SDL_INIT]))?;
        Ok(ExpertPool {
            experts,
            sdl,
            init_stats: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.experts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experts.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.experts[0].feature_dim()
    }

    pub fn cnn_config(&self) -> &CnnConfig {
        self.experts[0].config()
    }

    pub fn expert_hashes(&self) -> Vec<[u8; 32]> {
        self.experts.iter().map(ExpertCnn::content_hash).collect()
    }

    pub fn is_pretrained(&self) -> bool {
        self.experts.iter().all(ExpertCnn::is_frozen) && self.init_stats.len() == self.experts.len()
    }
}

/// Per-expert pretraining outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainReport {
    pub epoch_losses: Vec<Vec<f64>>,
    pub train_accuracy: Vec<f64>,
}

fn epoch_order(n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}

/// Trains each expert on its own initialization task through its head, then
/// freezes it and caches the statistics of its features on that task.
pub fn pretrain<S: Real>(pool: &mut ExpertPool<S>, init_tasks: &[Task], config: &EngineConfig) -> Result<PretrainReport> {
    config.validate()?;
    if init_tasks.len() != pool.len() {
        return Err(Error::shape("pretrain tasks per expert", &[pool.len()], &[init_tasks.len()]));
    }
    let mut report = PretrainReport {
        epoch_losses: Vec::new(),
        train_accuracy: Vec::new(),
    };
    let mut stats = Vec::with_capacity(pool.len());
    for (i, (expert, task)) in pool.experts.iter_mut().zip(init_tasks).enumerate() {
        task.validate()?;
        if task.is_empty() {
            return Err(Error::Empty("initialization task"));
        }
        let mut adam = Adam::new(config.adam());
        let mut losses = Vec::with_capacity(config.pretrain_epochs);
        for epoch in 0..config.pretrain_epochs {
            let mut r = rng::stream(config.master_seed, &[tag::PRETRAIN_SHUFFLE, i as u64, epoch as u64]);
            let order = epoch_order(task.len(), &mut r);
            let mut total = 0.0;
            for batch in order.chunks(config.batch_size) {
                let images = task.images_at::<S>(batch);
                let labels: Vec<u8> = batch.iter().map(|&k| task.labels[k]).collect();
                let mut trace = expert.forward_trace(&images)?;
                let probs: Vec<S> = trace.output().logits.data().iter().map(|&z| crate::nn::layers::sigmoid(z)).collect();
                total += bce_loss(&probs, &labels)?.as_f64() * batch.len() as f64;
                let seed = bce_logit_grad(&probs, &labels)?;
                let grads = trace.backward(expert, &seed)?;
                adam.step(expert.params_mut()?, &grads)?;
            }
            losses.push(total / task.len() as f64);
        }
        expert.freeze();
        let features = expert.features(&task.images::<S>())?;
        let out_logits = expert.forward(&task.images::<S>())?.logits;
        let probs: Vec<f64> = out_logits.data().iter().map(|&z| crate::nn::layers::sigmoid(z).as_f64()).collect();
        report.train_accuracy.push(accuracy(&probs, &task.labels)?);
        report.epoch_losses.push(losses);
        stats.push(feature_stats(&features)?);
    }
    pool.init_stats = stats;
    Ok(report)
}

/// Uniform expert draw used by the random-assignment baselines.
pub fn random_expert(rng: &mut Rng, n: usize) -> usize {
    rng.gen_range(0..n)
}

fn mean_rows<S: Real>(t: &Tensor<S>) -> Vec<f64> {
    let d = t.row_len();
    let mut m = vec![0.0; d];
    for i in 0..t.rows() {
        for (a, &v) in m.iter_mut().zip(t.row(i)) {
            *a += v.as_f64();
        }
    }
    let n = t.rows().max(1) as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

/// Row-major `[n, image | feature | context]` matrix plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SdlRows<S> {
    pub width: usize,
    pub data: Vec<S>,
    pub labels: Vec<u8>,
}

impl<S: Real> SdlRows<S> {
    fn new(width: usize) -> Self {
        SdlRows {
            width,
            data: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn push(&mut self, image: impl Iterator<Item = S>, feature: &[S], context: &[S], label: u8) {
        let before = self.data.len();
        self.data.extend(image);
        self.data.extend_from_slice(feature);
        self.data.extend_from_slice(context);
        debug_assert_eq!(self.data.len() - before, self.width);
        self.labels.push(label);
    }

    fn push_task(&mut self, task: &Task, features: &Tensor<S>, context: &[S]) {
        let d = task.image_dim();
        for i in 0..task.len() {
            let px = task.pixels[i * d..(i + 1) * d].iter().map(|&b| S::from_f64(b as f64 / 255.0));
            self.push(px, features.row(i), context, task.labels[i]);
        }
    }

    fn batch(&self, idx: &[usize]) -> (Tensor<S>, Vec<u8>) {
        let mut data = Vec::with_capacity(idx.len() * self.width);
        for &i in idx {
            data.extend_from_slice(&self.data[i * self.width..(i + 1) * self.width]);
        }
        let t = Tensor::from_vec(&[idx.len(), self.width], data).expect("rows are rectangular");
        (t, idx.iter().map(|&i| self.labels[i]).collect())
    }

    pub fn as_tensor(&self) -> Tensor<S> {
        Tensor::from_vec(&[self.len(), self.width], self.data.clone()).expect("rows are rectangular")
    }
}

/// Trains the SDL on `rows` for `epochs` shuffled passes; returns mean loss per epoch.
pub fn train_sdl<S: Real>(
    sdl: &mut Sdl<S>,
    adam: &mut Adam<S>,
    rows: &SdlRows<S>,
    epochs: usize,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::Empty("sdl training rows"));
    }
    let mut losses = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let order = epoch_order(rows.len(), rng);
        let mut total = 0.0;
        for batch in order.chunks(batch_size) {
            let (x, y) = rows.batch(batch);
            let mut trace = sdl.forward_trace(&x)?;
            total += bce_loss(trace.probabilities(), &y)?.as_f64() * batch.len() as f64;
            let seed = bce_logit_grad(trace.probabilities(), &y)?;
            let grads = trace.backward(sdl, &seed)?;
            adam.step(sdl.params_mut(), &grads)?;
        }
        losses.push(total / rows.len() as f64);
    }
    Ok(losses)
}

/// Everything a lifelong step produced, for records and the event stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub record: TaskRecord,
    pub chosen_expert: usize,
    /// Similarity per expert; empty for random-assignment modes.
    pub scores: Vec<f64>,
    pub current_rows: usize,
    pub replay_rows: usize,
    pub attention_weights: Vec<f64>,
    pub epoch_losses: Vec<f64>,
    pub evicted: Vec<String>,
}

struct SeenTask<S> {
    eval: Task,
    expert: usize,
    /// Context slot of the most recent training step that included this task.
    context: Vec<S>,
    eval_features: Tensor<S>,
}

/// Lifelong learner for one sequence in one of the four expert-based modes.
pub struct Learner<S> {
    pool: ExpertPool<S>,
    config: EngineConfig,
    buffer: ReplayBuffer<S>,
    adam: Adam<S>,
    routing: Rng,
    seen: Vec<SeenTask<S>>,
}

impl<S: Real> Learner<S> {
    pub fn new(pool: ExpertPool<S>, config: EngineConfig) -> Result<Self> {
        config.validate()?;
        if !config.mode.uses_experts() {
            return Err(Error::invalid("shared-bottom runs through run_shared_bottom"));
        }
        if !pool.is_pretrained() {
            return Err(Error::invalid("expert pool must be pretrained and frozen"));
        }
        Ok(Learner {
            buffer: ReplayBuffer::new(config.buffer_capacity),
            adam: Adam::new(config.adam()),
            routing: rng::stream(config.master_seed, &[tag::BASELINE_ROUTING]),
            seen: Vec::new(),
            pool,
            config,
        })
    }

    pub fn pool(&self) -> &ExpertPool<S> {
        &self.pool
    }

    pub fn buffer(&self) -> &ReplayBuffer<S> {
        &self.buffer
    }

    pub fn steps(&self) -> usize {
        self.seen.len()
    }

    fn row_width(&self) -> usize {
        self.pool.sdl.config().input_dim
    }

    /// Routes, stores and trains on one incoming task, then evaluates every task seen so far.
    pub fn step(&mut self, task: &Task) -> Result<StepOutcome> {
        task.validate()?;
        if task.is_empty() {
            return Err(Error::Empty("lifelong task"));
        }
        let t = self.seen.len();
        let (train, eval) = task.split(self.config.eval_fraction, rng::derive_seed(self.config.master_seed, &[t as u64]))?;
        if train.len() < 2 {
            return Err(Error::InsufficientData("lifelong task needs at least two training images".into()));
        }
        let images = train.images::<S>();

        // step 1: routing
        let (expert, scores, features) = if self.config.mode.uses_similarity() {
            let sel = select_expert(&images, &self.pool.experts, &self.pool.init_stats, self.config.metric)?;
            (sel.expert, sel.scores, sel.features)
        } else {
            let i = random_expert(&mut self.routing, self.pool.len());
            (i, Vec::new(), self.pool.experts[i].features(&images)?)
        };

        // step 2: store, retrieve prior entries of the routed expert, attend
        let report = self.buffer.store(expert, ReplayEntry::new(&train, features.clone())?)?;
        let stored = self.buffer.retrieve(expert);
        let prior: &[ReplayEntry<S>] = if self.config.replay {
            &stored[..stored.len().saturating_sub(1)]
        } else {
            &[]
        };
        let fd = self.pool.feature_dim();
        let mut attention_weights = Vec::new();
        let context: Vec<S> = if self.config.mode.uses_attention() && !prior.is_empty() {
            let keys: Vec<Vec<f64>> = prior.iter().map(ReplayEntry::mean_feature).collect();
            let att = attend(&mean_rows(&features), &keys)?;
            attention_weights = att.weights;
            att.context.into_iter().map(S::from_f64).collect()
        } else {
            vec![S::zero(); fd]
        };

        let mut rows = SdlRows::new(self.row_width());
        rows.push_task(&train, &features, &context);
        let current_rows = rows.len();
        for entry in prior {
            for i in 0..entry.len() {
                rows.push(entry.image(i), entry.features.row(i), &context, entry.labels[i]);
            }
        }
        let replay_rows = rows.len() - current_rows;
        // one store per step, so insertion steps index `seen`
        let replayed: Vec<usize> = prior.iter().map(|e| e.insertion_step as usize).collect();

        let mut shuffle = rng::stream(self.config.master_seed, &[tag::LIFELONG_SHUFFLE, t as u64]);
        let epoch_losses = train_sdl(
            &mut self.pool.sdl,
            &mut self.adam,
            &rows,
            self.config.lifelong_epochs,
            self.config.batch_size,
            &mut shuffle,
        )?;

        for j in replayed {
            self.seen[j].context.clone_from(&context);
        }
        let eval_features = self.pool.experts[expert].features(&eval.images::<S>())?;
        self.seen.push(SeenTask {
            eval,
            expert,
            context,
            eval_features,
        });
        let (accuracies, aurocs) = self.evaluate()?;
        let record = TaskRecord {
            task_id: task.task_id.clone(),
            step: t + 1,
            auroc: aurocs[t],
            accuracies,
            aurocs,
            chosen_expert: Some(expert),
        };
        Ok(StepOutcome {
            record,
            chosen_expert: expert,
            scores,
            current_rows,
            replay_rows,
            attention_weights,
            epoch_losses,
            evicted: report.evicted.into_iter().map(|(_, id)| id).collect(),
        })
    }

    /// Accuracy and AUROC of the current SDL on every seen task's held-out split,
    /// each through its routed expert and the context it was last trained with.
    pub fn evaluate(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut accs = Vec::with_capacity(self.seen.len());
        let mut aucs = Vec::with_capacity(self.seen.len());
        for s in &self.seen {
            let mut rows = SdlRows::new(self.row_width());
            rows.push_task(&s.eval, &s.eval_features, &s.context);
            let probs: Vec<f64> = self.pool.sdl.forward(&rows.as_tensor())?.data().iter().map(|v| v.as_f64()).collect();
            accs.push(accuracy(&probs, &s.eval.labels)?);
            aucs.push(auroc(&probs, &s.eval.labels)?);
        }
        Ok((accs, aucs))
    }

    /// Experts each seen task was routed to, in order.
    pub fn assignments(&self) -> Vec<usize> {
        self.seen.iter().map(|s| s.expert).collect()
    }

    pub fn into_pool(self) -> ExpertPool<S> {
        self.pool
    }
}

/// Result of running one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRun<S> {
    pub steps: Vec<StepOutcome>,
    /// Pool after the run (trained SDL, experts untouched).
    pub pool: ExpertPool<S>,
}

impl<S> SequenceRun<S> {
    pub fn records(&self) -> Vec<TaskRecord> {
        self.steps.iter().map(|s| s.record.clone()).collect()
    }
}

/// Runs every task of `sequence` through a fresh learner built from `pool`.
pub fn run_sequence<S: Real>(pool: &ExpertPool<S>, sequence: &Sequence, config: &EngineConfig) -> Result<SequenceRun<S>> {
    let before = pool.expert_hashes();
    let mut learner = Learner::new(pool.clone(), config.clone())?;
    let steps = sequence
        .tasks
        .iter()
        .map(|task| learner.step(task))
        .collect::<Result<Vec<_>>>()?;
    let pool = learner.into_pool();
    if pool.expert_hashes() != before {
        return Err(Error::invalid("expert parameters changed during the lifelong phase"));
    }
    Ok(SequenceRun { steps, pool })
}

/// Outcome of the Shared-Bottom comparison on one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedBottomRun<S> {
    pub steps: Vec<StepOutcome>,
    pub model: SharedBottom<S>,
    /// Trunk hash after each lifelong task.
    pub trunk_hashes: Vec<[u8; 32]>,
}

impl<S> SharedBottomRun<S> {
    pub fn records(&self) -> Vec<TaskRecord> {
        self.steps.iter().map(|s| s.record.clone()).collect()
    }
}

struct SbTrainer<'a, S> {
    model: &'a mut SharedBottom<S>,
    trunk_adam: Adam<S>,
    batch_size: usize,
    adam: AdamConfig,
}

impl<S: Real> SbTrainer<'_, S> {
    fn train(&mut self, task: &Task, head: usize, epochs: usize, rng: &mut Rng) -> Result<Vec<f64>> {
        let mut head_adam = Adam::new(self.adam);
        let mut losses = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            let order = epoch_order(task.len(), rng);
            let mut total = 0.0;
            for batch in order.chunks(self.batch_size) {
                let images = task.images_at::<S>(batch);
                let labels: Vec<u8> = batch.iter().map(|&k| task.labels[k]).collect();
                let mut trace = self.model.forward_trace(&images, head)?;
                total += bce_loss(trace.probabilities(), &labels)?.as_f64() * batch.len() as f64;
                let seed = bce_logit_grad(trace.probabilities(), &labels)?;
                let (gt, gh) = trace.backward(self.model, &seed)?;
                self.trunk_adam.step(self.model.trunk_mut(), &gt)?;
                head_adam.step(self.model.head_mut(head)?, &gh)?;
            }
            losses.push(total / task.len() as f64);
        }
        Ok(losses)
    }
}

/// Shared trunk (parameter-matched to the expert pool plus SDL) with one head
/// per task. The trunk is first trained on the initialization tasks, then on
/// each lifelong task with a fresh head; all lifelong heads are re-evaluated
/// through the updated trunk after every task.
pub fn run_shared_bottom<S: Real>(
    sequence: &Sequence,
    init_tasks: &[Task],
    expert_config: &CnnConfig,
    config: &EngineConfig,
) -> Result<SharedBottomRun<S>> {
    config.validate()?;
    if init_tasks.is_empty() {
        return Err(Error::Empty("initialization tasks"));
    }
    let sdl_cfg = SdlConfig::new(SdlConfig::row_width(expert_config.image_dim(), expert_config.feature_dim));
    let trunk_cfg = SharedBottom::<S>::matched_config(expert_config, init_tasks.len(), &sdl_cfg);
    let mut init_rng = rng::stream(config.master_seed, &[tag::SHARED_BOTTOM]);
    let mut model = SharedBottom::new(trunk_cfg, &mut init_rng)?;
    let mut trainer = SbTrainer {
        model: &mut model,
        trunk_adam: Adam::new(config.adam()),
        batch_size: config.batch_size,
        adam: config.adam(),
    };
    for (i, task) in init_tasks.iter().enumerate() {
        let head = trainer.model.add_head(&mut init_rng);
        let mut r = rng::stream(config.master_seed, &[tag::SHARED_BOTTOM, tag::PRETRAIN_SHUFFLE, i as u64]);
        trainer.train(task, head, config.pretrain_epochs, &mut r)?;
    }

    let mut seen: Vec<(Task, usize)> = Vec::new();
    let mut steps = Vec::with_capacity(sequence.tasks.len());
    let mut trunk_hashes = Vec::with_capacity(sequence.tasks.len());
    for (t, task) in sequence.tasks.iter().enumerate() {
        task.validate()?;
        if task.is_empty() {
            return Err(Error::Empty("lifelong task"));
        }
        let (train, eval) = task.split(config.eval_fraction, rng::derive_seed(config.master_seed, &[t as u64]))?;
        let head = trainer.model.add_head(&mut init_rng);
        let mut r = rng::stream(config.master_seed, &[tag::SHARED_BOTTOM, tag::LIFELONG_SHUFFLE, t as u64]);
        let epoch_losses = trainer.train(&train, head, config.lifelong_epochs, &mut r)?;
        let current_rows = train.len();
        seen.push((eval, head));
        let mut accuracies = Vec::with_capacity(seen.len());
        let mut aurocs = Vec::with_capacity(seen.len());
        for (eval, h) in &seen {
            let probs: Vec<f64> = trainer.model.forward(&eval.images::<S>(), *h)?.data().iter().map(|v| v.as_f64()).collect();
            accuracies.push(accuracy(&probs, &eval.labels)?);
            aurocs.push(auroc(&probs, &eval.labels)?);
        }
        trunk_hashes.push(trainer.model.trunk_hash());
        steps.push(StepOutcome {
            record: TaskRecord {
                task_id: task.task_id.clone(),
                step: t + 1,
                auroc: aurocs[t],
                accuracies,
                aurocs,
                chosen_expert: None,
            },
            chosen_expert: 0,
            scores: Vec::new(),
            current_rows,
            replay_rows: 0,
            attention_weights: Vec::new(),
            epoch_losses,
            evicted: Vec::new(),
        });
    }
    Ok(SharedBottomRun {
        steps,
        model,
        trunk_hashes,
    })
}
