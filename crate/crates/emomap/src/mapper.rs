//! The multi-way mapping model: per-format label encoders and bias-free
//! linear prediction heads sharing one d-dimensional emotion space, trained
//! jointly on mapping datasets with four objectives (mapping, autoencoder,
//! embedding similarity, and soft parameter sharing between heads).

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{EmoError, Result};
use crate::formats::{EmotionLabel, FormatRegistry, Problem};
use crate::numeric::{
    create_optimizer, Activation, FeedForward, LossKind, NodeId, OptimizerConfig, ParamRef, Tape,
};

/// A point in the shared emotion space.
pub type EmotionEmbedding = Vec<f64>;

/// Feed-forward network mapping an encoded label into the emotion space.
pub struct LabelEncoder {
    pub format_id: String,
    pub net: FeedForward,
}

/// Bias-free linear head `h(x) = z(Wx)` producing a label from an embedding.
pub struct PredictionHead {
    pub format_id: String,
    pub w: ParamRef,
    pub activation: Activation,
}

impl PredictionHead {
    pub fn logits(&self, e: &[f64]) -> Result<Vec<f64>> {
        self.w.borrow().value.matvec(e)
    }
}

pub fn head_activation(problem: Problem) -> Activation {
    match problem {
        Problem::Regression => Activation::Identity,
        Problem::SingleLabel => Activation::Softmax,
        Problem::MultiLabel => Activation::Sigmoid,
    }
}

pub fn format_criterion(problem: Problem) -> LossKind {
    match problem {
        Problem::Regression => LossKind::Mse,
        Problem::SingleLabel => LossKind::CrossEntropy,
        Problem::MultiLabel => LossKind::BinaryCrossEntropy,
    }
}

/// Two aligned label lists in distinct formats describing the same items.
#[derive(Debug, Clone)]
pub struct MappingDataset {
    pub id: String,
    pub format_a: String,
    pub format_b: String,
    pub pairs: Vec<(EmotionLabel, EmotionLabel)>,
}

impl MappingDataset {
    pub fn validate(&self, registry: &FormatRegistry) -> Result<()> {
        if self.format_a == self.format_b {
            return Err(EmoError::Validation(format!(
                "mapping dataset '{}' pairs a format with itself",
                self.id
            )));
        }
        registry.get(&self.format_a)?;
        registry.get(&self.format_b)?;
        if self.pairs.is_empty() {
            return Err(EmoError::Validation(format!(
                "mapping dataset '{}' is empty",
                self.id
            )));
        }
        for (a, b) in &self.pairs {
            if a.format_id != self.format_a || b.format_id != self.format_b {
                return Err(EmoError::Validation(format!(
                    "mapping dataset '{}' contains a mislabelled pair",
                    self.id
                )));
            }
            registry.validate_label(a)?;
            registry.validate_label(b)?;
        }
        Ok(())
    }

    /// Index-based split into (train, rest) keeping pair alignment.
    pub fn subset(&self, indices: &[usize]) -> MappingDataset {
        MappingDataset {
            id: self.id.clone(),
            format_a: self.format_a.clone(),
            format_b: self.format_b.clone(),
            pairs: indices.iter().map(|i| self.pairs[*i].clone()).collect(),
        }
    }
}

/// Per-term global weights on the total loss; the default is the plain
/// unweighted sum.
#[derive(Debug, Clone, Copy)]
pub struct TermWeights {
    pub map: f64,
    pub auto: f64,
    pub sim: f64,
    pub para: f64,
}

impl Default for TermWeights {
    fn default() -> Self {
        TermWeights {
            map: 1.0,
            auto: 1.0,
            sim: 1.0,
            para: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MapperTrainConfig {
    pub n_steps: usize,
    pub batch_size: usize,
    /// Per-format loss weights; formats not listed default to 1.
    pub alphas: HashMap<String, f64>,
    /// Sample datasets proportionally to their size instead of uniformly.
    pub size_proportional_sampling: bool,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub d: usize,
    pub hidden_widths: Vec<usize>,
    pub term_weights: TermWeights,
    /// Emit a `step=<n> l_map=... l_auto=... l_sim=... l_para=...` log line
    /// every this many steps (0 disables).
    pub log_every: usize,
}

impl Default for MapperTrainConfig {
    fn default() -> Self {
        MapperTrainConfig {
            n_steps: 10_000,
            batch_size: 32,
            alphas: HashMap::new(),
            size_proportional_sampling: false,
            optimizer: OptimizerConfig::default(),
            seed: 0,
            d: 100,
            hidden_widths: vec![128, 128],
            term_weights: TermWeights::default(),
            log_every: 0,
        }
    }
}

impl MapperTrainConfig {
    pub fn alpha(&self, format_id: &str) -> f64 {
        self.alphas.get(format_id).copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(EmoError::Config("n_steps must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(EmoError::Config("batch_size must be >= 1".into()));
        }
        if self.alphas.values().any(|a| !(*a > 0.0)) {
            return Err(EmoError::Config("loss weights must be positive".into()));
        }
        Ok(())
    }
}

/// Loss nodes of one training step.
pub struct LossNodes {
    pub map: NodeId,
    pub auto: NodeId,
    pub sim: NodeId,
    pub para: NodeId,
    pub total: NodeId,
}

/// The trained bundle: registry, one label encoder and one prediction head
/// per format, and the shared dimensionality. Formats sharing an id share
/// encoder and head object identity.
pub struct MultiWayMapper {
    registry: FormatRegistry,
    d: usize,
    encoders: Vec<LabelEncoder>,
    heads: Vec<PredictionHead>,
}

impl MultiWayMapper {
    /// Randomly initialized mapper over all registry formats.
    pub fn new(
        registry: FormatRegistry,
        d: usize,
        hidden_widths: &[usize],
        seed: u64,
    ) -> Result<Self> {
        if registry.is_empty() {
            return Err(EmoError::Validation("registry has no formats".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut encoders = Vec::new();
        let mut heads = Vec::new();
        for format in registry.formats() {
            let mut widths = vec![format.arity()];
            widths.extend_from_slice(hidden_widths);
            widths.push(d);
            let net = FeedForward::new(
                &widths,
                Activation::Relu,
                Activation::Identity,
                true,
                &mut rng,
            );
            encoders.push(LabelEncoder {
                format_id: format.id.clone(),
                net,
            });
            // bias-free head row init, same Glorot scheme as the layers
            let limit = (6.0 / (format.arity() + d) as f64).sqrt();
            let data: Vec<f64> = (0..format.arity() * d)
                .map(|_| rng.gen_range(-limit..limit))
                .collect();
            let w = crate::numeric::Matrix::from_vec(format.arity(), d, data)?;
            heads.push(PredictionHead {
                format_id: format.id.clone(),
                w: std::rc::Rc::new(std::cell::RefCell::new(
                    crate::numeric::Parameter::new(w),
                )),
                activation: head_activation(format.problem),
            });
        }
        Ok(MultiWayMapper {
            registry,
            d,
            encoders,
            heads,
        })
    }

    /// Rebuilds a mapper from deserialized components.
    pub fn from_parts(
        registry: FormatRegistry,
        d: usize,
        encoders: Vec<LabelEncoder>,
        heads: Vec<PredictionHead>,
    ) -> Result<Self> {
        if encoders.len() != registry.len() || heads.len() != registry.len() {
            return Err(EmoError::Validation(
                "encoder/head count differs from registry format count".into(),
            ));
        }
        for ((f, e), h) in registry.formats().iter().zip(&encoders).zip(&heads) {
            if e.format_id != f.id || h.format_id != f.id {
                return Err(EmoError::Validation(
                    "encoders/heads not keyed identically to registry formats".into(),
                ));
            }
            if e.net.output_width() != d || h.w.borrow().value.cols() != d {
                return Err(EmoError::Dimension(
                    "component width differs from shared d".into(),
                ));
            }
        }
        Ok(MultiWayMapper {
            registry,
            d,
            encoders,
            heads,
        })
    }

    pub fn registry(&self) -> &FormatRegistry {
        &self.registry
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn encoders(&self) -> &[LabelEncoder] {
        &self.encoders
    }

    pub fn heads(&self) -> &[PredictionHead] {
        &self.heads
    }

    pub fn encoder(&self, format_id: &str) -> Result<&LabelEncoder> {
        Ok(&self.encoders[self.registry.position(format_id)?])
    }

    pub fn head(&self, format_id: &str) -> Result<&PredictionHead> {
        Ok(&self.heads[self.registry.position(format_id)?])
    }

    pub fn params(&self) -> Vec<ParamRef> {
        let mut out = Vec::new();
        for e in &self.encoders {
            out.extend(e.net.params());
        }
        for h in &self.heads {
            out.push(h.w.clone());
        }
        out
    }

    pub fn set_trainable(&self, trainable: bool) {
        for p in self.params() {
            p.borrow_mut().trainable = trainable;
        }
    }

    /// g_i(y): deterministic embedding of a label.
    pub fn encode_label(&self, label: &EmotionLabel) -> Result<EmotionEmbedding> {
        let format = self.registry.get(&label.format_id)?;
        let input = crate::formats::encode_input(label, format)?;
        self.encoder(&label.format_id)?.net.infer(&input)
    }

    /// h_j(e): decodes an embedding into the target format. Single-label
    /// outputs stay probability vectors; argmax happens only at evaluation.
    pub fn decode_embedding(&self, e: &[f64], target_format: &str) -> Result<EmotionLabel> {
        if e.len() != self.d {
            return Err(EmoError::Dimension(format!(
                "embedding length {} differs from d={}",
                e.len(),
                self.d
            )));
        }
        let head = self.head(target_format)?;
        let logits = head.logits(e)?;
        Ok(EmotionLabel::new(
            target_format.to_string(),
            head.activation.apply(&logits),
        ))
    }

    /// ŷ_j = h_j(g_i(y_i)).
    pub fn translate(&self, label: &EmotionLabel, target_format: &str) -> Result<EmotionLabel> {
        let e = self.encode_label(label)?;
        self.decode_embedding(&e, target_format)
    }

    /// Rows of the head weight matrix in variable order, one per variable.
    pub fn head_rows(&self, format_id: &str) -> Result<Vec<(String, Vec<f64>)>> {
        let format = self.registry.get(format_id)?;
        let head = self.head(format_id)?;
        let w = head.w.borrow();
        Ok(format
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), w.value.row(i).to_vec()))
            .collect())
    }

    fn check_pair(&self, y1: &EmotionLabel, y2: &EmotionLabel) -> Result<()> {
        if y1.format_id == y2.format_id {
            return Err(EmoError::Validation(
                "loss over a same-format pair".into(),
            ));
        }
        self.registry.validate_label(y1)?;
        self.registry.validate_label(y2)?;
        Ok(())
    }

    /// Encoder forward for one label on a live tape.
    fn encode_on_tape(&self, tape: &mut Tape, label: &EmotionLabel) -> Result<NodeId> {
        let format = self.registry.get(&label.format_id)?;
        let input = crate::formats::encode_input(label, format)?;
        let x = tape.input(input);
        self.encoder(&label.format_id)?.net.forward(tape, x)
    }

    /// Format-appropriate criterion applied to head output on a live tape.
    /// Cross-entropy consumes the raw logits; BCE goes through sigmoid.
    fn head_loss_on_tape(
        &self,
        tape: &mut Tape,
        embedding: NodeId,
        gold: &EmotionLabel,
    ) -> Result<NodeId> {
        let format = self.registry.get(&gold.format_id)?;
        let head = self.head(&gold.format_id)?;
        let logits = tape.affine(&head.w, None, embedding)?;
        match format_criterion(format.problem) {
            LossKind::Mse => tape.loss(LossKind::Mse, logits, gold.values.clone()),
            LossKind::CrossEntropy => {
                tape.loss(LossKind::CrossEntropy, logits, gold.values.clone())
            }
            LossKind::BinaryCrossEntropy => {
                let probs = tape.activation(Activation::Sigmoid, logits);
                tape.loss(LossKind::BinaryCrossEntropy, probs, gold.values.clone())
            }
        }
    }

    /// Builds all four loss terms for one batch of aligned pairs. Batch
    /// losses are means over the batch; L_para is batch-independent.
    pub fn build_batch_losses(
        &self,
        tape: &mut Tape,
        batch: &[(&EmotionLabel, &EmotionLabel)],
        alpha1: f64,
        alpha2: f64,
        weights: TermWeights,
    ) -> Result<LossNodes> {
        if batch.is_empty() {
            return Err(EmoError::Validation("empty batch".into()));
        }
        let inv = 1.0 / batch.len() as f64;
        let mut map_terms = Vec::new();
        let mut auto_terms = Vec::new();
        let mut sim_terms = Vec::new();
        for (y1, y2) in batch {
            self.check_pair(y1, y2)?;
            let e1 = self.encode_on_tape(tape, y1)?;
            let e2 = self.encode_on_tape(tape, y2)?;
            // L_map: cross predictions
            let c1 = self.head_loss_on_tape(tape, e2, y1)?;
            let c2 = self.head_loss_on_tape(tape, e1, y2)?;
            map_terms.push((inv * alpha1, c1));
            map_terms.push((inv * alpha2, c2));
            // L_auto: reconstructions
            let a1 = self.head_loss_on_tape(tape, e1, y1)?;
            let a2 = self.head_loss_on_tape(tape, e2, y2)?;
            auto_terms.push((inv * alpha1, a1));
            auto_terms.push((inv * alpha2, a2));
            // L_sim
            let s = tape.squared_diff_mean(e1, e2)?;
            sim_terms.push((inv, s));
        }
        let map = tape.weighted_sum(map_terms)?;
        let auto = tape.weighted_sum(auto_terms)?;
        let sim = tape.weighted_sum(sim_terms)?;
        let para = self.build_parameter_sharing_loss(tape)?;
        let total = tape.weighted_sum(vec![
            (weights.map, map),
            (weights.auto, auto),
            (weights.sim, sim),
            (weights.para, para),
        ])?;
        Ok(LossNodes {
            map,
            auto,
            sim,
            para,
            total,
        })
    }

    /// Sum over equivalence classes of `1 - cos(u, v)` for each unordered
    /// pair of head rows in the class.
    pub fn build_parameter_sharing_loss(&self, tape: &mut Tape) -> Result<NodeId> {
        let mut terms = Vec::new();
        for class in self.registry.classes().classes() {
            let members: Vec<(&ParamRef, usize)> = class
                .iter()
                .map(|(fid, var)| {
                    let format = self.registry.get(fid)?;
                    let row = format.variable_index(var).ok_or_else(|| {
                        EmoError::Validation(format!("unknown variable {fid}:{var}"))
                    })?;
                    Ok((&self.head(fid)?.w, row))
                })
                .collect::<Result<Vec<_>>>()?;
            for i in 0..members.len() {
                for j in i + 1..members.len() {
                    let node = tape.row_cosine_loss(
                        members[i].0,
                        members[i].1,
                        members[j].0,
                        members[j].1,
                    )?;
                    terms.push((1.0, node));
                }
            }
        }
        if terms.is_empty() {
            let zero = tape.input(vec![0.0]);
            return Ok(zero);
        }
        tape.weighted_sum(terms)
    }

    /// Eq.-style mapping loss for a single pair (evaluation helper).
    pub fn mapping_loss(
        &self,
        y1: &EmotionLabel,
        y2: &EmotionLabel,
        alpha1: f64,
        alpha2: f64,
    ) -> Result<f64> {
        let mut tape = Tape::new();
        self.check_pair(y1, y2)?;
        let e1 = self.encode_on_tape(&mut tape, y1)?;
        let e2 = self.encode_on_tape(&mut tape, y2)?;
        let c1 = self.head_loss_on_tape(&mut tape, e2, y1)?;
        let c2 = self.head_loss_on_tape(&mut tape, e1, y2)?;
        let total = tape.weighted_sum(vec![(alpha1, c1), (alpha2, c2)])?;
        Ok(tape.scalar(total))
    }

    pub fn autoencoder_loss(
        &self,
        y1: &EmotionLabel,
        y2: &EmotionLabel,
        alpha1: f64,
        alpha2: f64,
    ) -> Result<f64> {
        let mut tape = Tape::new();
        self.check_pair(y1, y2)?;
        let e1 = self.encode_on_tape(&mut tape, y1)?;
        let e2 = self.encode_on_tape(&mut tape, y2)?;
        let a1 = self.head_loss_on_tape(&mut tape, e1, y1)?;
        let a2 = self.head_loss_on_tape(&mut tape, e2, y2)?;
        let total = tape.weighted_sum(vec![(alpha1, a1), (alpha2, a2)])?;
        Ok(tape.scalar(total))
    }

    pub fn similarity_loss(&self, y1: &EmotionLabel, y2: &EmotionLabel) -> Result<f64> {
        self.check_pair(y1, y2)?;
        let e1 = self.encode_label(y1)?;
        let e2 = self.encode_label(y2)?;
        let n = e1.len() as f64;
        Ok(e1
            .iter()
            .zip(&e2)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n)
    }

    pub fn parameter_sharing_loss(&self) -> Result<f64> {
        let mut tape = Tape::new();
        let node = self.build_parameter_sharing_loss(&mut tape)?;
        Ok(tape.scalar(node))
    }
}

/// Algorithm-1 training loop: per step, sample a dataset, sample a batch,
/// sum the four losses, backpropagate, and update. Deterministic under seed.
pub fn train_mapper(
    registry: &FormatRegistry,
    datasets: &[MappingDataset],
    config: &MapperTrainConfig,
) -> Result<MultiWayMapper> {
    config.validate()?;
    if datasets.is_empty() {
        return Err(EmoError::Validation("no mapping datasets given".into()));
    }
    for ds in datasets {
        ds.validate(registry)?;
    }

    let mapper = MultiWayMapper::new(
        registry.clone(),
        config.d,
        &config.hidden_widths,
        config.seed,
    )?;
    let params = mapper.params();
    let mut opt = create_optimizer(&config.optimizer)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));

    let cumulative: Vec<f64> = {
        let weights: Vec<f64> = if config.size_proportional_sampling {
            datasets.iter().map(|d| d.pairs.len() as f64).collect()
        } else {
            vec![1.0; datasets.len()]
        };
        let total: f64 = weights.iter().sum();
        weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w / total;
                Some(*acc)
            })
            .collect()
    };

    for p in &params {
        p.borrow_mut().zero_grad();
    }
    for step in 1..=config.n_steps {
        let u: f64 = rng.gen_range(0.0..1.0);
        let di = cumulative.iter().position(|c| u <= *c).unwrap_or(0);
        let ds = &datasets[di];

        let mut indices: Vec<usize> = (0..ds.pairs.len()).collect();
        indices.shuffle(&mut rng);
        indices.truncate(config.batch_size.min(ds.pairs.len()));
        let batch: Vec<(&EmotionLabel, &EmotionLabel)> = indices
            .iter()
            .map(|i| (&ds.pairs[*i].0, &ds.pairs[*i].1))
            .collect();

        let a1 = config.alpha(&ds.format_a);
        let a2 = config.alpha(&ds.format_b);
        let mut tape = Tape::new();
        let losses = mapper.build_batch_losses(&mut tape, &batch, a1, a2, config.term_weights)?;
        let total = tape.scalar(losses.total);
        if !total.is_finite() {
            return Err(EmoError::Divergence {
                step,
                detail: format!("total loss is {total}"),
            });
        }
        tape.backward(losses.total)?;
        opt.step(&params);

        if config.log_every > 0 && step % config.log_every == 0 {
            log::info!(
                "step={} l_map={} l_auto={} l_sim={} l_para={}",
                step,
                tape.scalar(losses.map),
                tape.scalar(losses.auto),
                tape.scalar(losses.sim),
                tape.scalar(losses.para)
            );
        }
    }
    Ok(mapper)
}
