//! Data ingestion (manifests, lexicon CSVs, embedding tables), deterministic
//! splits, the synthetic oracle generator, and model serialization.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::content::{ContentDataset, ContentEncoder, ContentSample, Split};
use crate::error::{EmoError, Result};
use crate::formats::{
    normalize, EmotionLabel, EquivalenceClasses, FormatRegistry, LabelFormat, Problem,
    ValueRange, VariableScale,
};
use crate::mapper::{head_activation, LabelEncoder, MappingDataset, MultiWayMapper, PredictionHead};
use crate::numeric::{Activation, Dense, FeedForward, Matrix, Parameter};

// ---------------------------------------------------------------------------
// Embedding tables
// ---------------------------------------------------------------------------

/// Token → vector map of uniform width.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    vectors: HashMap<String, Vec<f64>>,
    dim: usize,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            vectors: HashMap::new(),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let token = token.into();
        if vector.len() != self.dim {
            return Err(EmoError::Dimension(format!(
                "vector for '{}' has width {}, table dimension is {}",
                token,
                vector.len(),
                self.dim
            )));
        }
        if self.vectors.insert(token.clone(), vector).is_some() {
            return Err(EmoError::Validation(format!("duplicate token '{token}'")));
        }
        Ok(())
    }

    /// Exact, case-sensitive lookup; with `lowercase_fallback` a miss retries
    /// the lowercased token.
    pub fn get(&self, token: &str, lowercase_fallback: bool) -> Option<&Vec<f64>> {
        self.vectors.get(token).or_else(|| {
            lowercase_fallback
                .then(|| self.vectors.get(token.to_lowercase().as_str()))
                .flatten()
        })
    }
}

fn parse_err(line: usize, detail: impl Into<String>) -> EmoError {
    EmoError::Parse {
        line,
        detail: detail.into(),
    }
}

/// Loads a space-separated embedding file. An optional first line
/// `<count> <dim>` declares the shape; otherwise the dimension is inferred
/// from the first data line.
pub fn load_embedding_table(path: &Path) -> Result<EmbeddingTable> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().peekable();
    let mut declared: Option<(usize, usize)> = None;
    if let Some((_, first)) = lines.peek() {
        let fields: Vec<&str> = first.split_whitespace().collect();
        if fields.len() == 2 {
            if let (Ok(count), Ok(dim)) = (fields[0].parse(), fields[1].parse()) {
                declared = Some((count, dim));
                lines.next();
            }
        }
    }
    let mut table: Option<EmbeddingTable> = declared.map(|(_, dim)| EmbeddingTable::new(dim));
    let mut loaded = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().ok_or_else(|| parse_err(lineno, "empty row"))?;
        let values: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(lineno, format!("non-numeric field '{f}'")))
            })
            .collect::<Result<_>>()?;
        let table = table.get_or_insert_with(|| EmbeddingTable::new(values.len()));
        if values.len() != table.dim() {
            return Err(parse_err(
                lineno,
                format!(
                    "vector width {} differs from table dimension {}",
                    values.len(),
                    table.dim()
                ),
            ));
        }
        table
            .insert(token, values)
            .map_err(|e| parse_err(lineno, e.to_string()))?;
        loaded += 1;
    }
    let table = table.ok_or_else(|| parse_err(0, "empty embedding file"))?;
    if let Some((count, _)) = declared {
        if count != loaded {
            return Err(parse_err(
                0,
                format!("header declares {count} vectors, file holds {loaded}"),
            ));
        }
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

/// Key-value description of one dataset: where it lives, which format its
/// labels use, how raw values scale onto the format's range, and how it
/// splits.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub id: String,
    pub domain_id: String,
    pub format_id: String,
    pub data_path: PathBuf,
    /// e.g. the path of the embedding table resolving tokens to features
    pub feature_source: PathBuf,
    pub scales: Vec<VariableScale>,
    pub split_ratios: [usize; 3],
    pub lowercase_fallback: bool,
}

impl DatasetManifest {
    /// Parses `key = value` lines; `#` starts a comment. Scales appear as
    /// `scale.<Variable> = <min>,<max>`; split ratios as `splits = 8-1-1`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<DatasetManifest> {
        let mut fields: HashMap<String, String> = HashMap::new();
        let mut scales = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(lineno, format!("expected 'key = value', got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(variable) = key.strip_prefix("scale.") {
                let (min, max) = value
                    .split_once(',')
                    .ok_or_else(|| parse_err(lineno, "scale expects '<min>,<max>'"))?;
                let min: f64 = min
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(lineno, "non-numeric scale minimum"))?;
                let max: f64 = max
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(lineno, "non-numeric scale maximum"))?;
                scales.push(
                    VariableScale::new(variable, min, max)
                        .map_err(|e| parse_err(lineno, e.to_string()))?,
                );
            } else if fields.insert(key.to_string(), value.to_string()).is_some() {
                return Err(parse_err(lineno, format!("duplicate key '{key}'")));
            }
        }
        let get = |key: &str| -> Result<String> {
            fields
                .get(key)
                .cloned()
                .ok_or_else(|| EmoError::Config(format!("manifest is missing '{key}'")))
        };
        let split_ratios = match fields.get("splits") {
            Some(s) => parse_ratios(s)?,
            None => [8, 1, 1],
        };
        Ok(DatasetManifest {
            id: get("id")?,
            domain_id: get("domain")?,
            format_id: get("format")?,
            data_path: base_dir.join(get("data")?),
            feature_source: base_dir.join(get("features")?),
            scales,
            split_ratios,
            lowercase_fallback: fields
                .get("lowercase_fallback")
                .map(|v| v == "true")
                .unwrap_or(false),
        })
    }

    pub fn from_file(path: &Path) -> Result<DatasetManifest> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        DatasetManifest::parse(&text, base)
    }

    /// Format must exist and regression formats need a scale per variable.
    pub fn validate(&self, registry: &FormatRegistry) -> Result<()> {
        let format = registry.get(&self.format_id)?;
        if format.problem == Problem::Regression {
            for v in &format.variables {
                if !self.scales.iter().any(|s| &s.variable == v) {
                    return Err(EmoError::Config(format!(
                        "manifest '{}' lacks a scale for variable '{}'",
                        self.id, v
                    )));
                }
            }
        }
        if self.split_ratios.iter().any(|r| *r == 0) {
            return Err(EmoError::Config("split ratios must be positive".into()));
        }
        Ok(())
    }
}

fn parse_ratios(s: &str) -> Result<[usize; 3]> {
    let parts: Vec<usize> = s
        .split('-')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| EmoError::Config(format!("bad split ratio component '{p}'")))
        })
        .collect::<Result<_>>()?;
    if parts.len() != 3 {
        return Err(EmoError::Config(format!(
            "split ratios expect three components like '8-1-1', got '{s}'"
        )));
    }
    Ok([parts[0], parts[1], parts[2]])
}

// ---------------------------------------------------------------------------
// Lexicon loading
// ---------------------------------------------------------------------------

/// A loaded lexicon plus how many rows were dropped for missing tokens.
#[derive(Debug)]
pub struct LexiconLoad {
    pub dataset: ContentDataset,
    pub rows_total: usize,
    pub rows_dropped: usize,
}

/// Loads a comma-separated lexicon (`id[,text],<variables…>`), normalizes
/// labels onto the format's range via the manifest scales, and resolves each
/// token to its feature vector. Rows whose token is absent from the table are
/// dropped and counted; more than 50% misses is a coverage error.
pub fn load_lexicon(
    manifest: &DatasetManifest,
    registry: &FormatRegistry,
    table: &EmbeddingTable,
) -> Result<LexiconLoad> {
    manifest.validate(registry)?;
    let format = registry.get(&manifest.format_id)?;
    let text = std::fs::read_to_string(&manifest.data_path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(0, "empty lexicon file"))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.first() != Some(&"id") {
        return Err(parse_err(1, "first column must be 'id'"));
    }
    let has_text = columns.get(1) == Some(&"text");
    let var_offset = if has_text { 2 } else { 1 };
    let header_vars: Vec<&str> = columns[var_offset..].to_vec();
    let expected: Vec<&str> = format.variables.iter().map(String::as_str).collect();
    if header_vars != expected {
        return Err(EmoError::Validation(format!(
            "lexicon header variables {header_vars:?} differ from format '{}' variables {expected:?}",
            format.id
        )));
    }

    let mut samples = Vec::new();
    let mut labels = Vec::new();
    let mut rows_total = 0usize;
    let mut rows_dropped = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        rows_total += 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(parse_err(
                lineno,
                format!("expected {} fields, got {}", columns.len(), fields.len()),
            ));
        }
        let id = fields[0].to_string();
        let display = has_text.then(|| fields[1].to_string());
        let raw: Vec<f64> = fields[var_offset..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(lineno, format!("non-numeric value '{f}'")))
            })
            .collect::<Result<_>>()?;
        let label = if format.problem == Problem::Regression {
            normalize(&raw, &manifest.scales, format)?
        } else {
            let label = EmotionLabel::new(format.id.clone(), raw);
            registry.validate_label(&label)?;
            label
        };
        let token = display.as_deref().unwrap_or(id.as_str());
        match table.get(token, manifest.lowercase_fallback) {
            Some(vector) => {
                samples.push(ContentSample {
                    id,
                    features: vector.clone(),
                    text: display,
                });
                labels.push(label);
            }
            None => rows_dropped += 1,
        }
    }
    if rows_total == 0 {
        return Err(parse_err(0, "lexicon has a header but no rows"));
    }
    if rows_dropped * 2 > rows_total {
        return Err(EmoError::Validation(format!(
            "embedding table covers only {}/{} rows of '{}'",
            rows_total - rows_dropped,
            rows_total,
            manifest.id
        )));
    }
    if rows_dropped > 0 {
        log::warn!(
            "dataset '{}': dropped {}/{} rows with tokens missing from the embedding table",
            manifest.id,
            rows_dropped,
            rows_total
        );
    }
    Ok(LexiconLoad {
        dataset: ContentDataset {
            id: manifest.id.clone(),
            domain_id: manifest.domain_id.clone(),
            format_id: manifest.format_id.clone(),
            samples,
            labels,
            split: Split::Train,
            normalized: true,
        },
        rows_total,
        rows_dropped,
    })
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

/// Deterministic seeded index partition with sizes proportional to `ratios`.
/// Every part is non-empty for n ≥ 3.
pub fn split_indices(n: usize, ratios: [usize; 3], seed: u64) -> Result<[Vec<usize>; 3]> {
    if ratios.iter().any(|r| *r == 0) {
        return Err(EmoError::Config("split ratios must be positive".into()));
    }
    if n < 3 {
        return Err(EmoError::Validation(format!(
            "cannot split {n} items three ways"
        )));
    }
    let total: usize = ratios.iter().sum();
    let mut dev = n * ratios[1] / total;
    let mut test = n * ratios[2] / total;
    dev = dev.max(1);
    test = test.max(1);
    let train = n - dev - test;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let test_part = order.split_off(train + dev);
    let dev_part = order.split_off(train);
    Ok([order, dev_part, test_part])
}

pub fn split_dataset(
    dataset: &ContentDataset,
    ratios: [usize; 3],
    seed: u64,
) -> Result<(ContentDataset, ContentDataset, ContentDataset)> {
    let [train, dev, test] = split_indices(dataset.len(), ratios, seed)?;
    Ok((
        dataset.subset(&train, Split::Train),
        dataset.subset(&dev, Split::Dev),
        dataset.subset(&test, Split::Test),
    ))
}

pub fn split_mapping_dataset(
    dataset: &MappingDataset,
    ratios: [usize; 3],
    seed: u64,
) -> Result<(MappingDataset, MappingDataset, MappingDataset)> {
    let [train, dev, test] = split_indices(dataset.pairs.len(), ratios, seed)?;
    Ok((
        dataset.subset(&train),
        dataset.subset(&dev),
        dataset.subset(&test),
    ))
}

// ---------------------------------------------------------------------------
// Synthetic oracle
// ---------------------------------------------------------------------------

/// Width of the synthetic content feature vectors.
pub const SYNTHETIC_FEATURE_WIDTH: usize = 16;
/// Standard deviation of the feature noise.
pub const SYNTHETIC_FEATURE_NOISE: f64 = 0.02;

/// Two 3-variable regression formats with two declared-equivalent variables:
/// `a1 ≡ b1` (linear in the ground-truth map) and `a2 ≡ b2` (monotone but
/// nonlinear), while `a3`/`b3` stay unaligned.
pub fn synthetic_registry() -> FormatRegistry {
    let formats = vec![
        LabelFormat::new(
            "SynA",
            &["a1", "a2", "a3"],
            ValueRange::Interval {
                min: -1.0,
                max: 1.0,
            },
            Problem::Regression,
        )
        .expect("static format"),
        LabelFormat::new(
            "SynB",
            &["b1", "b2", "b3"],
            ValueRange::Interval { min: 0.0, max: 1.0 },
            Problem::Regression,
        )
        .expect("static format"),
    ];
    let classes = EquivalenceClasses::new(vec![
        vec![
            ("SynA".into(), "a1".into()),
            ("SynB".into(), "b1".into()),
        ],
        vec![
            ("SynA".into(), "a2".into()),
            ("SynB".into(), "b2".into()),
        ],
    ])
    .expect("static classes");
    FormatRegistry::new(formats, classes).expect("static registry")
}

/// Ground-truth map T from SynA labels to SynB labels. Smooth, invertible in
/// its first two coordinates, with a nonlinearity on `b2` and a genuine
/// interaction on `b3`:
///
/// ```text
/// b1 = 0.5 + 0.5·a1
/// b2 = 0.5 + 0.5·tanh(1.5·a2)
/// b3 = 0.5 + 0.45·a3 − 0.05·a1·a2
/// ```
///
/// Coefficients keep every variable's signal strong enough that σ = 0.05
/// label noise attenuates its gold correlation by less than 0.02.
pub fn synthetic_map(a: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), 3, "synthetic map expects 3 variables");
    vec![
        0.5 + 0.5 * a[0],
        0.5 + 0.5 * (1.5 * a[1]).tanh(),
        0.5 + 0.45 * a[2] - 0.05 * a[0] * a[1],
    ]
}

/// Everything the synthetic experiments need: matched label pairs for the
/// mapper plus one content dataset per format. The three blocks are sampled
/// independently.
pub struct SyntheticPair {
    pub registry: FormatRegistry,
    pub mapping: MappingDataset,
    pub content_a: ContentDataset,
    pub content_b: ContentDataset,
}

/// Generates the oracle pair: `y_A` uniform over SynA's range,
/// `y_B = clamp(T(y_A) + N(0, σ))`, and content features
/// `x = R·y_A + N(0, 0.02)` through a fixed random linear map `R` so the
/// features carry recoverable label signal.
pub fn generate_synthetic_pair(n: usize, sigma: f64, seed: u64) -> Result<SyntheticPair> {
    if sigma < 0.0 {
        return Err(EmoError::Config("noise sigma must be non-negative".into()));
    }
    if n == 0 {
        return Err(EmoError::Validation("need at least one sample".into()));
    }
    let registry = synthetic_registry();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let label_noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| EmoError::Config(format!("noise distribution: {e}")))?;
    let feature_noise = Normal::new(0.0, SYNTHETIC_FEATURE_NOISE)
        .map_err(|e| EmoError::Config(format!("noise distribution: {e}")))?;

    // one fixed projection for both content datasets
    let projection: Vec<Vec<f64>> = (0..SYNTHETIC_FEATURE_WIDTH)
        .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let draw_a = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()
    };
    let noisy_b = |a: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
        synthetic_map(a)
            .into_iter()
            .map(|b| {
                let v = if sigma > 0.0 {
                    b + label_noise.sample(rng)
                } else {
                    b
                };
                v.clamp(0.0, 1.0)
            })
            .collect()
    };
    let features = |a: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
        projection
            .iter()
            .map(|row| {
                row.iter().zip(a).map(|(r, v)| r * v).sum::<f64>() + feature_noise.sample(rng)
            })
            .collect()
    };

    let pairs: Vec<(EmotionLabel, EmotionLabel)> = (0..n)
        .map(|_| {
            let a = draw_a(&mut rng);
            let b = noisy_b(&a, &mut rng);
            (
                EmotionLabel::new("SynA", a),
                EmotionLabel::new("SynB", b),
            )
        })
        .collect();
    let mapping = MappingDataset {
        id: "syn-pair".into(),
        format_a: "SynA".into(),
        format_b: "SynB".into(),
        pairs,
    };

    let content = |format_id: &str, rng: &mut ChaCha8Rng| -> ContentDataset {
        let mut samples = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let a = draw_a(rng);
            let label = match format_id {
                "SynA" => EmotionLabel::new("SynA", a.clone()),
                _ => EmotionLabel::new("SynB", noisy_b(&a, rng)),
            };
            samples.push(ContentSample {
                id: format!("{format_id}-{i}"),
                features: features(&a, rng),
                text: None,
            });
            labels.push(label);
        }
        ContentDataset {
            id: format!("syn-content-{format_id}"),
            domain_id: "syn".into(),
            format_id: format_id.into(),
            samples,
            labels,
            split: Split::Train,
            normalized: true,
        }
    };
    let content_a = content("SynA", &mut rng);
    let content_b = content("SynB", &mut rng);

    mapping.validate(&registry)?;
    content_a.validate()?;
    content_b.validate()?;
    Ok(SyntheticPair {
        registry,
        mapping,
        content_a,
        content_b,
    })
}

// ---------------------------------------------------------------------------
// Dataset persistence (plumbing between CLI invocations)
// ---------------------------------------------------------------------------

fn fmt_float(v: f64) -> String {
    // shortest representation that round-trips exactly
    format!("{v}")
}

/// Writes a content dataset as commented key-value metadata plus CSV rows
/// (`id,text,<features…>,<labels…>`).
pub fn save_content_dataset(dataset: &ContentDataset, path: &Path) -> Result<()> {
    dataset.validate()?;
    let mut out = String::new();
    out.push_str(&format!("# kind = content\n# id = {}\n", dataset.id));
    out.push_str(&format!("# domain = {}\n", dataset.domain_id));
    out.push_str(&format!("# format = {}\n", dataset.format_id));
    out.push_str(&format!("# features = {}\n", dataset.feature_width()));
    out.push_str(&format!(
        "# arity = {}\n",
        dataset.labels.first().map(|l| l.values.len()).unwrap_or(0)
    ));
    out.push_str(&format!("# normalized = {}\n", dataset.normalized));
    for (s, l) in dataset.samples.iter().zip(&dataset.labels) {
        let fields: Vec<String> = std::iter::once(s.id.clone())
            .chain(std::iter::once(s.text.clone().unwrap_or_default()))
            .chain(s.features.iter().map(|v| fmt_float(*v)))
            .chain(l.values.iter().map(|v| fmt_float(*v)))
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn parse_meta(text: &str) -> HashMap<String, String> {
    let mut meta = HashMap::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
    }
    meta
}

fn meta_get<'m>(meta: &'m HashMap<String, String>, key: &str) -> Result<&'m str> {
    meta.get(key)
        .map(String::as_str)
        .ok_or_else(|| EmoError::Parse {
            line: 0,
            detail: format!("dataset file is missing '# {key} = …' metadata"),
        })
}

/// Reads a file written by [`save_content_dataset`].
pub fn load_content_dataset(path: &Path) -> Result<ContentDataset> {
    let text = std::fs::read_to_string(path)?;
    let meta = parse_meta(&text);
    if meta_get(&meta, "kind")? != "content" {
        return Err(EmoError::Parse {
            line: 0,
            detail: "not a content dataset file".into(),
        });
    }
    let n_features: usize = meta_get(&meta, "features")?
        .parse()
        .map_err(|_| parse_err(0, "bad feature count"))?;
    let arity: usize = meta_get(&meta, "arity")?
        .parse()
        .map_err(|_| parse_err(0, "bad arity"))?;
    let format_id = meta_get(&meta, "format")?.to_string();
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + n_features + arity {
            return Err(parse_err(
                lineno,
                format!(
                    "expected {} fields, got {}",
                    2 + n_features + arity,
                    fields.len()
                ),
            ));
        }
        let floats: Vec<f64> = fields[2..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(lineno, format!("non-numeric field '{f}'")))
            })
            .collect::<Result<_>>()?;
        samples.push(ContentSample {
            id: fields[0].to_string(),
            features: floats[..n_features].to_vec(),
            text: (!fields[1].is_empty()).then(|| fields[1].to_string()),
        });
        labels.push(EmotionLabel::new(
            format_id.clone(),
            floats[n_features..].to_vec(),
        ));
    }
    let dataset = ContentDataset {
        id: meta_get(&meta, "id")?.to_string(),
        domain_id: meta_get(&meta, "domain")?.to_string(),
        format_id,
        samples,
        labels,
        split: Split::Train,
        normalized: meta_get(&meta, "normalized")? == "true",
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Writes matched label pairs with the same metadata convention.
pub fn save_mapping_dataset(dataset: &MappingDataset, path: &Path) -> Result<()> {
    let (arity_a, arity_b) = match dataset.pairs.first() {
        Some((a, b)) => (a.values.len(), b.values.len()),
        None => {
            return Err(EmoError::Validation(format!(
                "mapping dataset '{}' has no pairs",
                dataset.id
            )))
        }
    };
    let mut out = String::new();
    out.push_str(&format!("# kind = mapping\n# id = {}\n", dataset.id));
    out.push_str(&format!("# format_a = {}\n", dataset.format_a));
    out.push_str(&format!("# format_b = {}\n", dataset.format_b));
    out.push_str(&format!("# arity_a = {arity_a}\n# arity_b = {arity_b}\n"));
    for (a, b) in &dataset.pairs {
        let fields: Vec<String> = a
            .values
            .iter()
            .chain(b.values.iter())
            .map(|v| fmt_float(*v))
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a file written by [`save_mapping_dataset`].
pub fn load_mapping_dataset(path: &Path) -> Result<MappingDataset> {
    let text = std::fs::read_to_string(path)?;
    let meta = parse_meta(&text);
    if meta_get(&meta, "kind")? != "mapping" {
        return Err(EmoError::Parse {
            line: 0,
            detail: "not a mapping dataset file".into(),
        });
    }
    let arity_a: usize = meta_get(&meta, "arity_a")?
        .parse()
        .map_err(|_| parse_err(0, "bad arity_a"))?;
    let arity_b: usize = meta_get(&meta, "arity_b")?
        .parse()
        .map_err(|_| parse_err(0, "bad arity_b"))?;
    let format_a = meta_get(&meta, "format_a")?.to_string();
    let format_b = meta_get(&meta, "format_b")?.to_string();
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let floats: Vec<f64> = line
            .split(',')
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(lineno, format!("non-numeric field '{f}'")))
            })
            .collect::<Result<_>>()?;
        if floats.len() != arity_a + arity_b {
            return Err(parse_err(
                lineno,
                format!("expected {} values, got {}", arity_a + arity_b, floats.len()),
            ));
        }
        pairs.push((
            EmotionLabel::new(format_a.clone(), floats[..arity_a].to_vec()),
            EmotionLabel::new(format_b.clone(), floats[arity_a..].to_vec()),
        ));
    }
    Ok(MappingDataset {
        id: meta_get(&meta, "id")?.to_string(),
        format_a,
        format_b,
        pairs,
    })
}

// ---------------------------------------------------------------------------
// Model serialization
// ---------------------------------------------------------------------------

const MODEL_MAGIC: &[u8; 4] = b"EMOE";
const MODEL_VERSION: u32 = 1;

/// A deserialized model file.
pub struct LoadedModel {
    pub mapper: MultiWayMapper,
    pub content_encoders: Vec<ContentEncoder>,
    pub seed: u64,
}

struct ModelWriter {
    buf: Vec<u8>,
}

impl ModelWriter {
    fn new() -> Self {
        ModelWriter { buf: Vec::new() }
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn string(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }
    fn matrix(&mut self, m: &Matrix) {
        self.u32(m.rows() as u32);
        self.u32(m.cols() as u32);
        for v in m.data() {
            self.f64(*v);
        }
    }
    fn ffn(&mut self, net: &FeedForward) {
        self.u32(net.layers().len() as u32);
        for layer in net.layers() {
            self.string(layer.activation.name());
            self.matrix(&layer.w.borrow().value);
            match &layer.b {
                Some(b) => {
                    self.u32(1);
                    self.matrix(&b.borrow().value);
                }
                None => self.u32(0),
            }
        }
    }
}

struct ModelReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ModelReader<'a> {
    fn fail(&self, detail: impl Into<String>) -> EmoError {
        EmoError::ModelFormat {
            offset: self.pos as u64,
            detail: detail.into(),
        }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(self.fail(format!(
                "truncated: wanted {n} bytes, {} remain",
                self.bytes.len() - self.pos
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let start = self.pos;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| EmoError::ModelFormat {
            offset: start as u64,
            detail: "invalid UTF-8 string".into(),
        })
    }
    fn matrix(&mut self) -> Result<Matrix> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(self.f64()?);
        }
        Matrix::from_vec(rows, cols, data).map_err(|e| self.fail(e.to_string()))
    }
    fn ffn(&mut self) -> Result<FeedForward> {
        let n_layers = self.u32()? as usize;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let name = self.string()?;
            let activation =
                Activation::from_name(&name).map_err(|e| self.fail(e.to_string()))?;
            let w = self.matrix()?;
            let has_bias = self.u32()?;
            let b = match has_bias {
                0 => None,
                1 => Some(self.matrix()?),
                other => return Err(self.fail(format!("bad bias flag {other}"))),
            };
            layers.push(Dense {
                w: std::rc::Rc::new(std::cell::RefCell::new(Parameter::new(w))),
                b: b.map(|m| std::rc::Rc::new(std::cell::RefCell::new(Parameter::new(m)))),
                activation,
            });
        }
        if layers.is_empty() {
            return Err(self.fail("network with zero layers"));
        }
        Ok(FeedForward::from_layers(layers))
    }
}

fn write_registry(w: &mut ModelWriter, registry: &FormatRegistry) {
    w.u32(registry.len() as u32);
    for f in registry.formats() {
        w.string(&f.id);
        w.u32(f.variables.len() as u32);
        for v in &f.variables {
            w.string(v);
        }
        match f.range {
            ValueRange::Interval { min, max } => {
                w.u32(0);
                w.f64(min);
                w.f64(max);
            }
            ValueRange::Binary => w.u32(1),
        }
        w.string(f.problem.name());
    }
    let classes = registry.classes().classes();
    w.u32(classes.len() as u32);
    for class in classes {
        w.u32(class.len() as u32);
        for (format_id, variable) in class {
            w.string(format_id);
            w.string(variable);
        }
    }
}

fn read_registry(r: &mut ModelReader) -> Result<FormatRegistry> {
    let n_formats = r.u32()? as usize;
    let mut formats = Vec::with_capacity(n_formats);
    for _ in 0..n_formats {
        let id = r.string()?;
        let n_vars = r.u32()? as usize;
        let mut variables = Vec::with_capacity(n_vars);
        for _ in 0..n_vars {
            variables.push(r.string()?);
        }
        let range = match r.u32()? {
            0 => ValueRange::Interval {
                min: r.f64()?,
                max: r.f64()?,
            },
            1 => ValueRange::Binary,
            other => return Err(r.fail(format!("bad range tag {other}"))),
        };
        let problem =
            Problem::from_name(&r.string()?).map_err(|e| r.fail(e.to_string()))?;
        let vars: Vec<&str> = variables.iter().map(String::as_str).collect();
        formats.push(
            LabelFormat::new(id, &vars, range, problem).map_err(|e| r.fail(e.to_string()))?,
        );
    }
    let n_classes = r.u32()? as usize;
    let mut classes = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        let n_members = r.u32()? as usize;
        let mut class = Vec::with_capacity(n_members);
        for _ in 0..n_members {
            class.push((r.string()?, r.string()?));
        }
        classes.push(class);
    }
    let classes = EquivalenceClasses::new(classes).map_err(|e| r.fail(e.to_string()))?;
    FormatRegistry::new(formats, classes).map_err(|e| r.fail(e.to_string()))
}

/// Serializes the mapper, any content encoders, and the training seed record.
///
/// Layout: magic `EMOE`, version, then little-endian length-prefixed fields.
/// Weights are stored as 64-bit floats so a load reproduces every prediction
/// bit for bit.
pub fn save_model(
    mapper: &MultiWayMapper,
    content_encoders: &[ContentEncoder],
    seed: u64,
    path: &Path,
) -> Result<()> {
    let mut w = ModelWriter::new();
    w.buf.extend_from_slice(MODEL_MAGIC);
    w.u32(MODEL_VERSION);
    write_registry(&mut w, mapper.registry());
    w.u64(mapper.d() as u64);
    for encoder in mapper.encoders() {
        w.ffn(&encoder.net);
    }
    for head in mapper.heads() {
        w.matrix(&head.w.borrow().value);
    }
    w.u32(content_encoders.len() as u32);
    for enc in content_encoders {
        w.string(&enc.domain_id);
        w.ffn(&enc.net);
    }
    w.u64(seed);
    let mut file = std::fs::File::create(path)?;
    file.write_all(&w.buf)?;
    Ok(())
}

/// Reads a model file written by [`save_model`]. Fails with the byte offset
/// on malformed input and rejects files from newer versions.
pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut r = ModelReader {
        bytes: &bytes,
        pos: 0,
    };
    let magic = r.take(4)?;
    if magic != MODEL_MAGIC {
        return Err(EmoError::ModelFormat {
            offset: 0,
            detail: format!("bad magic {magic:?}, expected {MODEL_MAGIC:?}"),
        });
    }
    let version = r.u32()?;
    if version > MODEL_VERSION {
        return Err(EmoError::Unsupported(format!(
            "model file version {version} is newer than supported version {MODEL_VERSION}"
        )));
    }
    let registry = read_registry(&mut r)?;
    let d = r.u64()? as usize;
    let mut encoders = Vec::with_capacity(registry.len());
    for f in registry.formats() {
        encoders.push(LabelEncoder {
            format_id: f.id.clone(),
            net: r.ffn()?,
        });
    }
    let mut heads = Vec::with_capacity(registry.len());
    for f in registry.formats() {
        heads.push(PredictionHead {
            format_id: f.id.clone(),
            w: std::rc::Rc::new(std::cell::RefCell::new(Parameter::new(r.matrix()?))),
            activation: head_activation(f.problem),
        });
    }
    let n_content = r.u32()? as usize;
    let mut content_encoders = Vec::with_capacity(n_content);
    for _ in 0..n_content {
        let domain_id = r.string()?;
        content_encoders.push(ContentEncoder {
            domain_id,
            net: r.ffn()?,
        });
    }
    let seed = r.u64()?;
    if r.pos != bytes.len() {
        return Err(r.fail("trailing bytes after model payload"));
    }
    let mapper = MultiWayMapper::from_parts(registry, d, encoders, heads)?;
    Ok(LoadedModel {
        mapper,
        content_encoders,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::default_registry;
    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    // -- embedding tables ---------------------------------------------------

    #[test]
    fn embedding_table_basic_and_header() {
        let f = write_temp("cat 0.1 0.2 0.3 0.4\ndog 1 2 3 4\nfox -1 0 1 2\n");
        let t = load_embedding_table(f.path()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.dim(), 4);
        assert_eq!(t.get("dog", false).unwrap(), &vec![1.0, 2.0, 3.0, 4.0]);

        let f = write_temp("2 3\na 1 2 3\nb 4 5 6\n");
        let t = load_embedding_table(f.path()).unwrap();
        assert_eq!((t.len(), t.dim()), (2, 3));
    }

    #[test]
    fn embedding_table_width_error_names_line() {
        let f = write_temp("a 1 2 3\nb 4 5\n");
        match load_embedding_table(f.path()) {
            Err(EmoError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn embedding_lowercase_fallback() {
        let f = write_temp("anger 1 2\n");
        let t = load_embedding_table(f.path()).unwrap();
        assert!(t.get("Anger", false).is_none());
        assert!(t.get("Anger", true).is_some());
    }

    // -- manifests + lexicons -----------------------------------------------

    fn vad_manifest(data: &Path, features: &Path) -> DatasetManifest {
        let text = format!(
            "id = en1\ndomain = words\nformat = VAD\ndata = {}\nfeatures = {}\n\
             scale.Valence = 1,9\nscale.Arousal = 1,9\nscale.Dominance = 1,9\nsplits = 8-1-1\n",
            data.display(),
            features.display()
        );
        DatasetManifest::parse(&text, Path::new("/")).unwrap()
    }

    #[test]
    fn manifest_parsing_and_validation() {
        let m = vad_manifest(Path::new("x.csv"), Path::new("e.txt"));
        assert_eq!(m.format_id, "VAD");
        assert_eq!(m.split_ratios, [8, 1, 1]);
        assert_eq!(m.scales.len(), 3);
        m.validate(&default_registry()).unwrap();

        let incomplete = "id = x\ndomain = d\nformat = VAD\ndata = f\nfeatures = g\n";
        let m = DatasetManifest::parse(incomplete, Path::new("/")).unwrap();
        assert!(m.validate(&default_registry()).is_err());
    }

    #[test]
    fn lexicon_load_normalizes_and_drops_missing() {
        let emb = write_temp("rollercoaster 1 0\nmalice 0 1\nunknownless 1 1\n");
        let lex = write_temp(
            "id,Valence,Arousal,Dominance\nrollercoaster,8.0,8.1,5.1\nmalice,2.0,5.0,6.0\nmystery,5.0,5.0,5.0\n",
        );
        let manifest = vad_manifest(lex.path(), emb.path());
        let table = load_embedding_table(emb.path()).unwrap();
        let load = load_lexicon(&manifest, &default_registry(), &table).unwrap();
        assert_eq!(load.rows_total, 3);
        assert_eq!(load.rows_dropped, 1);
        assert_eq!(load.dataset.len(), 2);
        assert!(load.dataset.normalized);
        let first = &load.dataset.labels[0].values;
        assert!((first[0] - 0.75).abs() < 1e-12);
        assert!((first[1] - 0.775).abs() < 1e-12);
        assert!((first[2] - 0.025).abs() < 1e-12);
    }

    #[test]
    fn lexicon_header_mismatch_and_coverage_errors() {
        let emb = write_temp("a 1 0\n");
        let bad_header = write_temp("id,Valence,Arousal\na,1,2\n");
        let manifest = vad_manifest(bad_header.path(), emb.path());
        let table = load_embedding_table(emb.path()).unwrap();
        let err = load_lexicon(&manifest, &default_registry(), &table).unwrap_err();
        assert!(err.to_string().contains("Valence"), "{err}");

        let sparse = write_temp(
            "id,Valence,Arousal,Dominance\na,5,5,5\nmissing1,5,5,5\nmissing2,5,5,5\n",
        );
        let manifest = vad_manifest(sparse.path(), emb.path());
        let err = load_lexicon(&manifest, &default_registry(), &table).unwrap_err();
        assert!(err.to_string().contains("covers only"), "{err}");

        let empty = write_temp("");
        let manifest = vad_manifest(empty.path(), emb.path());
        assert!(load_lexicon(&manifest, &default_registry(), &table).is_err());
    }

    #[test]
    fn lexicon_parse_error_names_line() {
        let emb = write_temp("a 1 0\n");
        let table = load_embedding_table(emb.path()).unwrap();
        let lex = write_temp("id,Valence,Arousal,Dominance\na,5,oops,5\n");
        let manifest = vad_manifest(lex.path(), emb.path());
        match load_lexicon(&manifest, &default_registry(), &table) {
            Err(EmoError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    // -- splits ---------------------------------------------------------------

    #[test]
    fn split_sizes_disjoint_exhaustive_deterministic() {
        let [a, b, c] = split_indices(100, [8, 1, 1], 7).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (80, 10, 10));
        let mut all: Vec<usize> = a.iter().chain(&b).chain(&c).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        let again = split_indices(100, [8, 1, 1], 7).unwrap();
        assert_eq!([a, b, c], again);
        assert!(split_indices(2, [8, 1, 1], 7).is_err());
        // tiny datasets still produce non-empty dev/test
        let [a, b, c] = split_indices(3, [8, 1, 1], 0).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (1, 1, 1));
    }

    // -- synthetic oracle -------------------------------------------------------

    #[test]
    fn synthetic_pair_shapes_and_determinism() {
        let p1 = generate_synthetic_pair(50, 0.05, 3).unwrap();
        let p2 = generate_synthetic_pair(50, 0.05, 3).unwrap();
        assert_eq!(p1.mapping.pairs.len(), 50);
        assert_eq!(p1.content_a.len(), 50);
        assert_eq!(p1.content_b.len(), 50);
        assert_eq!(p1.content_a.feature_width(), SYNTHETIC_FEATURE_WIDTH);
        for ((a1, b1), (a2, b2)) in p1.mapping.pairs.iter().zip(&p2.mapping.pairs) {
            assert_eq!(a1.values, a2.values);
            assert_eq!(b1.values, b2.values);
        }
    }

    #[test]
    fn synthetic_noiseless_pairs_match_ground_truth() {
        let p = generate_synthetic_pair(20, 0.0, 1).unwrap();
        for (a, b) in &p.mapping.pairs {
            let t = synthetic_map(&a.values);
            for (x, y) in t.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn synthetic_noise_keeps_high_label_correlation() {
        use crate::eval::pearson_r;
        let p = generate_synthetic_pair(2000, 0.05, 2).unwrap();
        for v in 0..3 {
            let gold: Vec<f64> = p
                .mapping
                .pairs
                .iter()
                .map(|(a, _)| synthetic_map(&a.values)[v])
                .collect();
            let noisy: Vec<f64> = p.mapping.pairs.iter().map(|(_, b)| b.values[v]).collect();
            let r = pearson_r(&gold, &noisy).unwrap();
            assert!(r >= 0.98, "variable {v}: r={r}");
        }
    }

    #[test]
    fn synthetic_labels_validate_against_registry() {
        let p = generate_synthetic_pair(100, 0.1, 4).unwrap();
        for (a, b) in &p.mapping.pairs {
            p.registry.validate_label(a).unwrap();
            p.registry.validate_label(b).unwrap();
        }
    }

    // -- dataset persistence ----------------------------------------------------

    #[test]
    fn dataset_files_round_trip_exactly() {
        let pair = generate_synthetic_pair(25, 0.05, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();

        let cpath = dir.path().join("content.csv");
        save_content_dataset(&pair.content_a, &cpath).unwrap();
        let loaded = load_content_dataset(&cpath).unwrap();
        assert_eq!(loaded.id, pair.content_a.id);
        assert_eq!(loaded.format_id, pair.content_a.format_id);
        assert!(loaded.normalized);
        for (a, b) in loaded.samples.iter().zip(&pair.content_a.samples) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.features, b.features);
        }
        for (a, b) in loaded.labels.iter().zip(&pair.content_a.labels) {
            assert_eq!(a.values, b.values);
        }

        let mpath = dir.path().join("mapping.csv");
        save_mapping_dataset(&pair.mapping, &mpath).unwrap();
        let loaded = load_mapping_dataset(&mpath).unwrap();
        assert_eq!(loaded.pairs.len(), pair.mapping.pairs.len());
        for ((a1, b1), (a2, b2)) in loaded.pairs.iter().zip(&pair.mapping.pairs) {
            assert_eq!(a1.values, a2.values);
            assert_eq!(b1.values, b2.values);
        }
    }

    #[test]
    fn dataset_kind_mismatch_is_an_error() {
        let pair = generate_synthetic_pair(5, 0.0, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        save_mapping_dataset(&pair.mapping, &path).unwrap();
        assert!(load_content_dataset(&path).is_err());
    }

    // -- model round trip -----------------------------------------------------

    #[test]
    fn model_round_trip_is_bitwise() {
        let mapper = MultiWayMapper::new(default_registry(), 7, &[8], 5).unwrap();
        let content = ContentEncoder::new("words", 4, &[8], 7, 9);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.emoe");
        save_model(&mapper, std::slice::from_ref(&content), 5, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.seed, 5);
        assert_eq!(loaded.content_encoders.len(), 1);

        let y = EmotionLabel::new("VAD", vec![0.75, 0.775, 0.025]);
        let before = mapper.translate(&y, "BE5").unwrap();
        let after = loaded.mapper.translate(&y, "BE5").unwrap();
        assert_eq!(before.values, after.values);

        let s = ContentSample {
            id: "w".into(),
            features: vec![0.1, -0.2, 0.3, 0.4],
            text: None,
        };
        assert_eq!(
            content.encode_content(&s).unwrap(),
            loaded.content_encoders[0].encode_content(&s).unwrap()
        );
    }

    #[test]
    fn model_file_rejects_bad_magic_and_future_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.emoe");
        std::fs::write(&path, b"NOPE").unwrap();
        match load_model(&path) {
            Err(EmoError::ModelFormat { offset, .. }) => assert_eq!(offset, 0),
            other => panic!(
                "expected format error, got {:?}",
                other.map(|_| "a loaded model")
            ),
        }

        let mut bytes = Vec::new();
        bytes.extend_from_slice(MODEL_MAGIC);
        bytes.extend_from_slice(&(MODEL_VERSION + 1).to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_model(&path), Err(EmoError::Unsupported(_))));
    }

    #[test]
    fn model_file_truncation_names_offset() {
        let mapper = MultiWayMapper::new(default_registry(), 7, &[8], 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.emoe");
        save_model(&mapper, &[], 0, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let cut = bytes.len() / 2;
        std::fs::write(&path, &bytes[..cut]).unwrap();
        match load_model(&path) {
            Err(EmoError::ModelFormat { offset, .. }) => assert!(offset <= cut as u64),
            other => panic!(
                "expected format error, got {:?}",
                other.map(|_| "a loaded model")
            ),
        }
    }
}
