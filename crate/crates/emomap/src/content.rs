//! Domain-specific content encoders: feed-forward networks over precomputed
//! feature vectors, trained against frozen label decoders. Emotion label
//! augmentation uses the mapping model as a teacher to synthesize labels in
//! an alternative format so the encoder interoperates with all decoders.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{EmoError, Result};
use crate::formats::EmotionLabel;
use crate::mapper::{EmotionEmbedding, MultiWayMapper};
use crate::numeric::{
    create_optimizer, Activation, FeedForward, Matrix, OptimizerConfig, Tape,
};

/// A content item as a fixed-width feature vector.
#[derive(Debug, Clone)]
pub struct ContentSample {
    pub id: String,
    pub features: Vec<f64>,
    pub text: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

/// Samples plus aligned labels in a single format.
#[derive(Debug, Clone)]
pub struct ContentDataset {
    pub id: String,
    pub domain_id: String,
    pub format_id: String,
    pub samples: Vec<ContentSample>,
    pub labels: Vec<EmotionLabel>,
    pub split: Split,
    /// Set once labels are on the format's nominal range; prevents a second
    /// scaling pass.
    pub normalized: bool,
}

impl ContentDataset {
    pub fn validate(&self) -> Result<()> {
        if self.samples.len() != self.labels.len() {
            return Err(EmoError::Validation(format!(
                "dataset '{}': {} samples vs {} labels",
                self.id,
                self.samples.len(),
                self.labels.len()
            )));
        }
        let width = self.feature_width();
        for s in &self.samples {
            if s.features.len() != width {
                return Err(EmoError::Validation(format!(
                    "dataset '{}': inconsistent feature width at sample '{}'",
                    self.id, s.id
                )));
            }
            if s.features.iter().any(|f| !f.is_finite()) {
                return Err(EmoError::Validation(format!(
                    "dataset '{}': non-finite feature in sample '{}'",
                    self.id, s.id
                )));
            }
        }
        for l in &self.labels {
            if l.format_id != self.format_id {
                return Err(EmoError::Validation(format!(
                    "dataset '{}': label format '{}' differs from dataset format '{}'",
                    self.id, l.format_id, self.format_id
                )));
            }
        }
        Ok(())
    }

    pub fn feature_width(&self) -> usize {
        self.samples.first().map(|s| s.features.len()).unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn subset(&self, indices: &[usize], split: Split) -> ContentDataset {
        ContentDataset {
            id: self.id.clone(),
            domain_id: self.domain_id.clone(),
            format_id: self.format_id.clone(),
            samples: indices.iter().map(|i| self.samples[*i].clone()).collect(),
            labels: indices.iter().map(|i| self.labels[*i].clone()).collect(),
            split,
            normalized: self.normalized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// L_pred plus the teacher-generated augmentation loss.
    Augmented,
    /// L_pred only.
    Plain,
    /// Alternate batches between the two gold datasets of a pair.
    Multitask,
}

impl TrainMode {
    pub fn name(&self) -> &'static str {
        match self {
            TrainMode::Augmented => "augmented",
            TrainMode::Plain => "plain",
            TrainMode::Multitask => "multitask",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "augmented" => Ok(TrainMode::Augmented),
            "plain" => Ok(TrainMode::Plain),
            "multitask" => Ok(TrainMode::Multitask),
            other => Err(EmoError::Config(format!("unknown training mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EncoderTrainConfig {
    pub n_epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub mode: TrainMode,
    /// Target format for emotion label augmentation (augmented mode).
    pub augmentation_format: Option<String>,
    /// Weight on L_aug relative to L_pred; 1 reproduces the plain sum.
    pub aug_weight: f64,
    pub hidden_widths: Vec<usize>,
    pub dropout: f64,
    /// Dev-set early stopping patience in epochs; `None` disables.
    pub patience: Option<usize>,
    pub seed: u64,
}

impl Default for EncoderTrainConfig {
    fn default() -> Self {
        EncoderTrainConfig {
            n_epochs: 100,
            batch_size: 32,
            optimizer: OptimizerConfig::default(),
            mode: TrainMode::Augmented,
            augmentation_format: None,
            aug_weight: 1.0,
            hidden_widths: vec![256, 128],
            dropout: 0.2,
            patience: Some(10),
            seed: 0,
        }
    }
}

/// Domain-specific network embedding content features into the emotion space.
pub struct ContentEncoder {
    pub domain_id: String,
    pub net: FeedForward,
}

impl ContentEncoder {
    pub fn new(
        domain_id: impl Into<String>,
        feature_width: usize,
        hidden_widths: &[usize],
        d: usize,
        seed: u64,
    ) -> Self {
        let mut widths = vec![feature_width];
        widths.extend_from_slice(hidden_widths);
        widths.push(d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ContentEncoder {
            domain_id: domain_id.into(),
            net: FeedForward::new(
                &widths,
                Activation::Relu,
                Activation::Identity,
                true,
                &mut rng,
            ),
        }
    }

    pub fn feature_width(&self) -> usize {
        self.net.input_width()
    }

    pub fn d(&self) -> usize {
        self.net.output_width()
    }

    /// f̄(x): deterministic emotion embedding of a sample.
    pub fn encode_content(&self, sample: &ContentSample) -> Result<EmotionEmbedding> {
        if sample.features.len() != self.feature_width() {
            return Err(EmoError::Dimension(format!(
                "sample '{}' has {} features, encoder expects {}",
                sample.id,
                sample.features.len(),
                self.feature_width()
            )));
        }
        self.net.infer(&sample.features)
    }
}

/// ŷ = h(f̄(x)): decode the sample's embedding in the requested format.
pub fn predict(
    encoder: &ContentEncoder,
    mapper: &MultiWayMapper,
    sample: &ContentSample,
    format_id: &str,
) -> Result<EmotionLabel> {
    let e = encoder.encode_content(sample)?;
    mapper.decode_embedding(&e, format_id)
}

/// Same computation as [`predict`]; the name marks the evaluation protocol
/// where the format was absent from the encoder's training data.
pub fn zero_shot_predict(
    encoder: &ContentEncoder,
    mapper: &MultiWayMapper,
    sample: &ContentSample,
    unseen_format: &str,
) -> Result<EmotionLabel> {
    predict(encoder, mapper, sample, unseen_format)
}

/// Teacher label y* = h₂(g₁(y₁)), computed on the fly per batch.
pub fn synthesize_label(
    mapper: &MultiWayMapper,
    y1: &EmotionLabel,
    target_format: &str,
) -> Result<EmotionLabel> {
    if y1.format_id == target_format {
        return Err(EmoError::Validation(
            "augmentation format equals the dataset format".into(),
        ));
    }
    mapper.translate(y1, target_format)
}

fn snapshot(params: &[crate::numeric::ParamRef]) -> Vec<Matrix> {
    params.iter().map(|p| p.borrow().value.clone()).collect()
}

fn restore(params: &[crate::numeric::ParamRef], snap: &[Matrix]) {
    for (p, s) in params.iter().zip(snap) {
        p.borrow_mut().value = s.clone();
    }
}

/// Trains a content encoder against the frozen mapping model.
///
/// All mapper parameters are frozen for the duration of the call; the
/// function asserts they are bitwise unchanged before returning. With a dev
/// split and patience configured, the best-dev-loss weights are restored.
/// `second` supplies the other dataset of the pair in multitask mode.
pub fn train_content_encoder(
    dataset: &ContentDataset,
    dev: Option<&ContentDataset>,
    second: Option<&ContentDataset>,
    mapper: &MultiWayMapper,
    config: &EncoderTrainConfig,
) -> Result<ContentEncoder> {
    dataset.validate()?;
    mapper.registry().get(&dataset.format_id)?;
    if dataset.is_empty() {
        return Err(EmoError::Validation(format!(
            "dataset '{}' has no samples",
            dataset.id
        )));
    }
    let aug_format = match (config.mode, &config.augmentation_format) {
        (TrainMode::Augmented, Some(f)) => {
            mapper.registry().get(f)?;
            if *f == dataset.format_id {
                return Err(EmoError::Config(
                    "augmentation format must differ from the dataset format".into(),
                ));
            }
            Some(f.clone())
        }
        (TrainMode::Augmented, None) => {
            return Err(EmoError::Config(
                "augmented mode requires an augmentation format".into(),
            ))
        }
        _ => None,
    };
    if config.mode == TrainMode::Multitask {
        let s = second.ok_or_else(|| {
            EmoError::Config("multitask mode requires a second dataset".into())
        })?;
        s.validate()?;
        mapper.registry().get(&s.format_id)?;
        if s.domain_id != dataset.domain_id {
            return Err(EmoError::Config(
                "multitask datasets must share a domain".into(),
            ));
        }
    }

    let frozen_flags: Vec<bool> = mapper
        .params()
        .iter()
        .map(|p| p.borrow().trainable)
        .collect();
    mapper.set_trainable(false);
    let mapper_before = snapshot(&mapper.params());

    let encoder = ContentEncoder::new(
        dataset.domain_id.clone(),
        dataset.feature_width(),
        &config.hidden_widths,
        mapper.d(),
        config.seed,
    );
    let params = encoder.net.params();
    let mut opt = create_optimizer(&config.optimizer)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));

    // Pre-synthesize teacher labels once; translate is pure under a frozen
    // mapper, so per-batch recomputation would yield the same values.
    let teacher: Option<Vec<EmotionLabel>> = match &aug_format {
        Some(f) => Some(
            dataset
                .labels
                .iter()
                .map(|y| synthesize_label(mapper, y, f))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };

    let mut best: Option<(f64, Vec<Matrix>)> = None;
    let mut epochs_since_best = 0usize;
    let mut step = 0usize;
    for p in &params {
        p.borrow_mut().zero_grad();
    }
    'epochs: for _epoch in 0..config.n_epochs {
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.shuffle(&mut rng);
        let mut second_order: Vec<usize> = second
            .map(|s| (0..s.len()).collect())
            .unwrap_or_default();
        second_order.shuffle(&mut rng);

        for (bi, batch) in order.chunks(config.batch_size).enumerate() {
            step += 1;
            let mut tape = Tape::new();
            let mut terms = Vec::new();
            let inv = 1.0 / batch.len() as f64;
            for &i in batch {
                let x = tape.input(dataset.samples[i].features.clone());
                let drop: Option<(f64, &mut dyn rand::RngCore)> = if config.dropout > 0.0 {
                    Some((config.dropout, &mut rng))
                } else {
                    None
                };
                let emb = encoder.net.forward_with_dropout(&mut tape, x, drop)?;
                let pred = head_loss(mapper, &mut tape, emb, &dataset.labels[i])?;
                terms.push((inv, pred));
                if let (Some(teacher), Some(_)) = (&teacher, &aug_format) {
                    let aug = head_loss(mapper, &mut tape, emb, &teacher[i])?;
                    terms.push((inv * config.aug_weight, aug));
                }
            }
            // multitask: follow each primary batch with one from the pair
            if config.mode == TrainMode::Multitask {
                let s = second.unwrap();
                let start = (bi * config.batch_size) % s.len();
                let inv2 = 1.0 / config.batch_size.min(s.len()) as f64;
                for k in 0..config.batch_size.min(s.len()) {
                    let i = second_order[(start + k) % s.len()];
                    let x = tape.input(s.samples[i].features.clone());
                    let drop: Option<(f64, &mut dyn rand::RngCore)> = if config.dropout > 0.0 {
                        Some((config.dropout, &mut rng))
                    } else {
                        None
                    };
                    let emb = encoder.net.forward_with_dropout(&mut tape, x, drop)?;
                    let pred = head_loss(mapper, &mut tape, emb, &s.labels[i])?;
                    terms.push((inv2, pred));
                }
            }
            let total = tape.weighted_sum(terms)?;
            let value = tape.scalar(total);
            if !value.is_finite() {
                return Err(EmoError::Divergence {
                    step,
                    detail: format!("content-encoder loss is {value}"),
                });
            }
            tape.backward(total)?;
            opt.step(&params);
        }

        if let (Some(dev), Some(patience)) = (dev, config.patience) {
            let dev_loss = prediction_loss(&encoder, mapper, dev)?;
            let improved = best.as_ref().map(|(b, _)| dev_loss < *b).unwrap_or(true);
            if improved {
                best = Some((dev_loss, snapshot(&params)));
                epochs_since_best = 0;
            } else {
                epochs_since_best += 1;
                if epochs_since_best >= patience {
                    break 'epochs;
                }
            }
        }
    }
    if let Some((_, snap)) = best {
        restore(&params, &snap);
    }

    // freeze contract: the teacher must be bitwise untouched
    let mapper_after = snapshot(&mapper.params());
    assert!(
        mapper_before == mapper_after,
        "frozen mapper parameters were mutated during content-encoder training"
    );
    for (p, flag) in mapper.params().iter().zip(frozen_flags) {
        p.borrow_mut().trainable = flag;
    }
    let _ = encoder.net.set_trainable(true);
    Ok(encoder)
}

/// Mean prediction loss of an encoder over a dataset (no dropout).
pub fn prediction_loss(
    encoder: &ContentEncoder,
    mapper: &MultiWayMapper,
    dataset: &ContentDataset,
) -> Result<f64> {
    let mut acc = 0.0;
    for (s, y) in dataset.samples.iter().zip(&dataset.labels) {
        let mut tape = Tape::new();
        let x = tape.input(s.features.clone());
        let emb = encoder.net.forward(&mut tape, x)?;
        let l = head_loss(mapper, &mut tape, emb, y)?;
        acc += tape.scalar(l);
    }
    Ok(acc / dataset.len() as f64)
}

fn head_loss(
    mapper: &MultiWayMapper,
    tape: &mut Tape,
    embedding: crate::numeric::NodeId,
    gold: &EmotionLabel,
) -> Result<crate::numeric::NodeId> {
    use crate::mapper::format_criterion;
    use crate::numeric::LossKind;
    let format = mapper.registry().get(&gold.format_id)?;
    let head = mapper.head(&gold.format_id)?;
    let logits = tape.affine(&head.w, None, embedding)?;
    match format_criterion(format.problem) {
        LossKind::Mse => tape.loss(LossKind::Mse, logits, gold.values.clone()),
        LossKind::CrossEntropy => tape.loss(LossKind::CrossEntropy, logits, gold.values.clone()),
        LossKind::BinaryCrossEntropy => {
            let probs = tape.activation(Activation::Sigmoid, logits);
            tape.loss(LossKind::BinaryCrossEntropy, probs, gold.values.clone())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::default_registry;

    fn toy_mapper() -> MultiWayMapper {
        MultiWayMapper::new(default_registry(), 5, &[8], 1).unwrap()
    }

    fn sample(id: &str, features: Vec<f64>) -> ContentSample {
        ContentSample {
            id: id.into(),
            features,
            text: None,
        }
    }

    fn toy_dataset(n: usize, format_id: &str, arity: usize) -> ContentDataset {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<ContentSample> = (0..n)
            .map(|i| sample(&format!("s{i}"), (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let labels = (0..n)
            .map(|_| {
                EmotionLabel::new(
                    format_id,
                    (0..arity).map(|_| rng.gen_range(0.0..1.0)).collect(),
                )
            })
            .collect();
        ContentDataset {
            id: "toy".into(),
            domain_id: "toy-domain".into(),
            format_id: format_id.into(),
            samples,
            labels,
            split: Split::Train,
            normalized: true,
        }
    }

    #[test]
    fn encode_content_contracts() {
        let enc = ContentEncoder::new("words", 4, &[8], 5, 3);
        let s = sample("a", vec![0.1, 0.2, 0.3, 0.4]);
        let e1 = enc.encode_content(&s).unwrap();
        let e2 = enc.encode_content(&s).unwrap();
        assert_eq!(e1, e2);
        assert_eq!(e1.len(), 5);

        let bad = sample("b", vec![0.1]);
        assert!(matches!(
            enc.encode_content(&bad),
            Err(EmoError::Dimension(_))
        ));

        let last = enc.net.layers().last().unwrap();
        last.w.borrow_mut().value.fill(0.0);
        last.b.as_ref().unwrap().borrow_mut().value.fill(0.0);
        assert!(enc.encode_content(&s).unwrap().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn predict_is_decode_of_encode() {
        let m = toy_mapper();
        let enc = ContentEncoder::new("words", 4, &[8], 5, 3);
        let s = sample("a", vec![0.1, 0.2, 0.3, 0.4]);
        let direct = predict(&enc, &m, &s, "BE5").unwrap();
        let composed = m
            .decode_embedding(&enc.encode_content(&s).unwrap(), "BE5")
            .unwrap();
        assert_eq!(direct, composed);
        assert_eq!(zero_shot_predict(&enc, &m, &s, "BE5").unwrap(), direct);
    }

    #[test]
    fn synthesize_label_is_translate() {
        let m = toy_mapper();
        let y = EmotionLabel::new("VAD", vec![0.1, 0.2, 0.3]);
        assert_eq!(
            synthesize_label(&m, &y, "BE5").unwrap(),
            m.translate(&y, "BE5").unwrap()
        );
        assert!(synthesize_label(&m, &y, "VAD").is_err());
    }

    #[test]
    fn mapper_frozen_during_training() {
        let m = toy_mapper();
        let before: Vec<Matrix> = m.params().iter().map(|p| p.borrow().value.clone()).collect();
        let ds = toy_dataset(24, "BE5", 5);
        let config = EncoderTrainConfig {
            n_epochs: 3,
            mode: TrainMode::Augmented,
            augmentation_format: Some("VAD".into()),
            hidden_widths: vec![8],
            patience: None,
            ..Default::default()
        };
        let _enc = train_content_encoder(&ds, None, None, &m, &config).unwrap();
        let after: Vec<Matrix> = m.params().iter().map(|p| p.borrow().value.clone()).collect();
        assert_eq!(before, after);
        assert!(m.params().iter().all(|p| p.borrow().trainable));
    }

    #[test]
    fn augmented_initial_loss_dominates_plain() {
        // Same seed, same init: the augmented total at step 0 adds a
        // non-negative term to the plain loss.
        let m = toy_mapper();
        let ds = toy_dataset(8, "BE5", 5);
        let enc = ContentEncoder::new(&ds.domain_id, 4, &[8], m.d(), 7);
        let plain = prediction_loss(&enc, &m, &ds).unwrap();
        let teacher: Vec<EmotionLabel> = ds
            .labels
            .iter()
            .map(|y| synthesize_label(&m, y, "VAD").unwrap())
            .collect();
        let mut aug_ds = ds.clone();
        aug_ds.labels = teacher;
        aug_ds.format_id = "VAD".into();
        let aug_term = prediction_loss(&enc, &m, &aug_ds).unwrap();
        assert!(plain + aug_term >= plain);
        assert!(aug_term >= 0.0);
    }

    #[test]
    fn augmented_mode_requires_format() {
        let m = toy_mapper();
        let ds = toy_dataset(8, "BE5", 5);
        let config = EncoderTrainConfig {
            n_epochs: 1,
            augmentation_format: None,
            ..Default::default()
        };
        assert!(train_content_encoder(&ds, None, None, &m, &config).is_err());
    }

    #[test]
    fn multitask_requires_second_dataset() {
        let m = toy_mapper();
        let ds = toy_dataset(8, "BE5", 5);
        let config = EncoderTrainConfig {
            n_epochs: 1,
            mode: TrainMode::Multitask,
            ..Default::default()
        };
        assert!(train_content_encoder(&ds, None, None, &m, &config).is_err());
    }

    #[test]
    fn training_is_seed_deterministic() {
        let m = toy_mapper();
        let ds = toy_dataset(16, "BE5", 5);
        let config = EncoderTrainConfig {
            n_epochs: 2,
            mode: TrainMode::Plain,
            hidden_widths: vec![8],
            patience: None,
            seed: 11,
            ..Default::default()
        };
        let e1 = train_content_encoder(&ds, None, None, &m, &config).unwrap();
        let e2 = train_content_encoder(&ds, None, None, &m, &config).unwrap();
        for (p, q) in e1.net.params().iter().zip(e2.net.params().iter()) {
            assert_eq!(p.borrow().value, q.borrow().value);
        }
    }
}
