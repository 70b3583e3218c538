//! Metrics and the supervised / zero-shot / mapping evaluation protocols,
//! plus the end-to-end suite runner used for results tables and ablations.

use std::path::Path;

use crate::content::{
    predict, train_content_encoder, ContentDataset, ContentEncoder, EncoderTrainConfig,
    TrainMode,
};
use crate::error::{EmoError, Result};
use crate::formats::{EmotionLabel, FormatRegistry, Problem};
use crate::io::{split_dataset, split_mapping_dataset};
use crate::mapper::{train_mapper, MapperTrainConfig, MappingDataset, MultiWayMapper};

/// Pearson correlation coefficient. Errors on degenerate (constant) input
/// rather than returning 0, which would silently corrupt aggregates.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(EmoError::Dimension(format!(
            "pearson_r: {} vs {} samples",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(EmoError::Validation(
            "pearson_r needs at least two samples".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EmoError::DegenerateVector(
            "pearson_r: an input sequence has zero variance".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Index of the maximum entry; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Fraction of matching class indices.
pub fn accuracy(predicted: &[usize], gold: &[usize]) -> Result<f64> {
    if predicted.len() != gold.len() {
        return Err(EmoError::Dimension(format!(
            "accuracy: {} vs {} samples",
            predicted.len(),
            gold.len()
        )));
    }
    if predicted.is_empty() {
        return Err(EmoError::Validation("accuracy over empty input".into()));
    }
    let hits = predicted.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / predicted.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Supervised,
    ZeroShot,
    Mapping,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Supervised => "supervised",
            Scenario::ZeroShot => "zero_shot",
            Scenario::Mapping => "mapping",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "supervised" => Ok(Scenario::Supervised),
            "zero-shot" | "zero_shot" => Ok(Scenario::ZeroShot),
            "mapping" => Ok(Scenario::Mapping),
            other => Err(EmoError::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    PearsonR,
    Accuracy,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::PearsonR => "pearson_r",
            Metric::Accuracy => "accuracy",
        }
    }
}

/// One evaluation result. For regression the aggregate is the mean of the
/// per-variable scores; accuracy is a single value.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub dataset_id: String,
    pub scenario: Scenario,
    pub metric: Metric,
    pub per_variable: Vec<(String, f64)>,
    pub aggregate: f64,
}

/// Scores predicted labels against gold labels with the format's metric.
fn score_labels(
    registry: &FormatRegistry,
    format_id: &str,
    dataset_id: &str,
    scenario: Scenario,
    predicted: &[EmotionLabel],
    gold: &[EmotionLabel],
) -> Result<EvalReport> {
    let format = registry.get(format_id)?;
    match format.problem {
        Problem::Regression => {
            let mut per_variable = Vec::with_capacity(format.arity());
            for (v, name) in format.variables.iter().enumerate() {
                let p: Vec<f64> = predicted.iter().map(|l| l.values[v]).collect();
                let g: Vec<f64> = gold.iter().map(|l| l.values[v]).collect();
                per_variable.push((name.clone(), pearson_r(&p, &g)?));
            }
            let aggregate =
                per_variable.iter().map(|(_, r)| r).sum::<f64>() / per_variable.len() as f64;
            Ok(EvalReport {
                dataset_id: dataset_id.into(),
                scenario,
                metric: Metric::PearsonR,
                per_variable,
                aggregate,
            })
        }
        Problem::SingleLabel | Problem::MultiLabel => {
            let p: Vec<usize> = predicted.iter().map(|l| argmax(&l.values)).collect();
            let g: Vec<usize> = gold.iter().map(|l| argmax(&l.values)).collect();
            Ok(EvalReport {
                dataset_id: dataset_id.into(),
                scenario,
                metric: Metric::Accuracy,
                per_variable: Vec::new(),
                aggregate: accuracy(&p, &g)?,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    AToB,
    BToA,
}

/// Translates every source label of the pair and scores against the gold
/// target labels with the target format's metric.
pub fn evaluate_mapping(
    mapper: &MultiWayMapper,
    dataset: &MappingDataset,
    direction: Direction,
) -> Result<EvalReport> {
    dataset.validate(mapper.registry())?;
    let (source, target): (Vec<&EmotionLabel>, Vec<&EmotionLabel>) = match direction {
        Direction::AToB => dataset.pairs.iter().map(|(a, b)| (a, b)).unzip(),
        Direction::BToA => dataset.pairs.iter().map(|(a, b)| (b, a)).unzip(),
    };
    let target_format = &target[0].format_id.clone();
    let predicted: Vec<EmotionLabel> = source
        .iter()
        .map(|y| mapper.translate(y, target_format))
        .collect::<Result<_>>()?;
    let gold: Vec<EmotionLabel> = target.into_iter().cloned().collect();
    let arrow = match direction {
        Direction::AToB => format!("{}->{}", dataset.format_a, dataset.format_b),
        Direction::BToA => format!("{}->{}", dataset.format_b, dataset.format_a),
    };
    score_labels(
        mapper.registry(),
        target_format,
        &format!("{}:{}", dataset.id, arrow),
        Scenario::Mapping,
        &predicted,
        &gold,
    )
}

fn evaluate_content(
    encoder: &ContentEncoder,
    mapper: &MultiWayMapper,
    test: &ContentDataset,
    scenario: Scenario,
) -> Result<EvalReport> {
    test.validate()?;
    if test.is_empty() {
        return Err(EmoError::Validation(format!(
            "dataset '{}' test split is empty",
            test.id
        )));
    }
    let predicted: Vec<EmotionLabel> = test
        .samples
        .iter()
        .map(|s| predict(encoder, mapper, s, &test.format_id))
        .collect::<Result<_>>()?;
    score_labels(
        mapper.registry(),
        &test.format_id,
        &test.id,
        scenario,
        &predicted,
        &test.labels,
    )
}

/// Scores an encoder on the test split of the dataset it was trained on.
pub fn evaluate_supervised(
    encoder: &ContentEncoder,
    mapper: &MultiWayMapper,
    test: &ContentDataset,
) -> Result<EvalReport> {
    evaluate_content(encoder, mapper, test, Scenario::Supervised)
}

/// Scores an encoder on the test split of the *other* dataset of its pair —
/// a label format absent from its own training data, reachable only through
/// the pre-trained decoders.
pub fn evaluate_zero_shot(
    encoder_from_other_dataset: &ContentEncoder,
    mapper: &MultiWayMapper,
    test: &ContentDataset,
) -> Result<EvalReport> {
    evaluate_content(encoder_from_other_dataset, mapper, test, Scenario::ZeroShot)
}

/// Configuration of [`run_suite`].
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub mapper: MapperTrainConfig,
    pub encoder: EncoderTrainConfig,
    /// Encoder training mode; `Plain`/`Multitask` run the ablations.
    pub mode: TrainMode,
    pub split_ratios: [usize; 3],
    pub split_seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            mapper: MapperTrainConfig::default(),
            encoder: EncoderTrainConfig::default(),
            mode: TrainMode::Augmented,
            split_ratios: [8, 1, 1],
            split_seed: 0,
        }
    }
}

/// Everything a suite run produces: the six reports plus the trained models,
/// so callers (CLI, tests) can persist or inspect them.
pub struct SuiteOutcome {
    pub reports: Vec<EvalReport>,
    pub mapper: MultiWayMapper,
    pub encoder_a: ContentEncoder,
    pub encoder_b: ContentEncoder,
}

/// Runs the full protocol over one dataset pair: split, train the mapper on
/// the mapping train split, train one content encoder per dataset, then emit
/// six reports — supervised and zero-shot for each dataset, and both mapping
/// directions. Training never sees dev/test items (asserted by id sets).
pub fn run_suite(
    registry: &FormatRegistry,
    mapping: &MappingDataset,
    content_a: &ContentDataset,
    content_b: &ContentDataset,
    config: &SuiteConfig,
) -> Result<SuiteOutcome> {
    if content_a.domain_id != content_b.domain_id {
        return Err(EmoError::Validation(format!(
            "pair datasets must share a domain: '{}' vs '{}'",
            content_a.domain_id, content_b.domain_id
        )));
    }
    if content_a.format_id == content_b.format_id {
        return Err(EmoError::Validation(
            "pair datasets must use distinct label formats".into(),
        ));
    }
    let (map_train, _map_dev, map_test) =
        split_mapping_dataset(mapping, config.split_ratios, config.split_seed)?;
    let (a_train, a_dev, a_test) = split_dataset(content_a, config.split_ratios, config.split_seed)?;
    let (b_train, b_dev, b_test) =
        split_dataset(content_b, config.split_ratios, config.split_seed.wrapping_add(1))?;
    assert_split_isolation(&a_train, &a_test);
    assert_split_isolation(&b_train, &b_test);

    let mapper = train_mapper(registry, &[map_train], &config.mapper)?;

    let enc_config = |aug: &str| {
        let mut c = config.encoder.clone();
        c.mode = config.mode;
        c.augmentation_format = match config.mode {
            TrainMode::Augmented => Some(aug.to_string()),
            _ => None,
        };
        c
    };
    let second = |other: &ContentDataset| -> Option<ContentDataset> {
        (config.mode == TrainMode::Multitask).then(|| other.clone())
    };
    let encoder_a = train_content_encoder(
        &a_train,
        Some(&a_dev),
        second(&b_train).as_ref(),
        &mapper,
        &enc_config(&content_b.format_id),
    )?;
    let encoder_b = train_content_encoder(
        &b_train,
        Some(&b_dev),
        second(&a_train).as_ref(),
        &mapper,
        &enc_config(&content_a.format_id),
    )?;

    let reports = vec![
        evaluate_supervised(&encoder_a, &mapper, &a_test)?,
        evaluate_supervised(&encoder_b, &mapper, &b_test)?,
        evaluate_zero_shot(&encoder_b, &mapper, &a_test)?,
        evaluate_zero_shot(&encoder_a, &mapper, &b_test)?,
        evaluate_mapping(&mapper, &map_test, Direction::AToB)?,
        evaluate_mapping(&mapper, &map_test, Direction::BToA)?,
    ];
    Ok(SuiteOutcome {
        reports,
        mapper,
        encoder_a,
        encoder_b,
    })
}

fn assert_split_isolation(train: &ContentDataset, test: &ContentDataset) {
    let train_ids: std::collections::HashSet<&str> =
        train.samples.iter().map(|s| s.id.as_str()).collect();
    assert!(
        test.samples.iter().all(|s| !train_ids.contains(s.id.as_str())),
        "train/test splits share sample ids"
    );
}

/// Renders reports as a tab-separated table:
/// `dataset  scenario  metric  <var=score …>  mean`.
pub fn render_report_table(reports: &[EvalReport]) -> String {
    let mut out = String::from("dataset\tscenario\tmetric\tper_variable\tmean\n");
    for r in reports {
        let vars = r
            .per_variable
            .iter()
            .map(|(n, s)| format!("{n}={s:.6}"))
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.6}\n",
            r.dataset_id,
            r.scenario.name(),
            r.metric.name(),
            if vars.is_empty() { "-" } else { &vars },
            r.aggregate
        ));
    }
    out
}

/// Writes the table produced by [`render_report_table`].
pub fn write_report_table(reports: &[EvalReport], path: &Path) -> Result<()> {
    std::fs::write(path, render_report_table(reports))?;
    Ok(())
}
