//! Command-line front end: dataset generation, training, translation,
//! evaluation, analysis, and retrieval over one shared model file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use emomap::analysis::{build_index, pca_fit, pca_project, query_top_k, render_projection_table};
use emomap::content::{train_content_encoder, ContentDataset, EncoderTrainConfig, TrainMode};
use emomap::error::{EmoError, Result};
use emomap::eval::{
    evaluate_mapping, evaluate_supervised, evaluate_zero_shot, run_suite,
    Direction, EvalReport, Scenario, SuiteConfig, write_report_table,
};
use emomap::formats::{default_registry, EmotionLabel, FormatRegistry};
use emomap::io::{
    generate_synthetic_pair, load_content_dataset, load_mapping_dataset, load_model,
    save_content_dataset, save_mapping_dataset, save_model, split_dataset,
    split_mapping_dataset, synthetic_registry, LoadedModel,
};
use emomap::mapper::{train_mapper, MapperTrainConfig};
use emomap::numeric::OptimizerConfig;

#[derive(Parser)]
#[command(name = "emomap", version, about = "Emotion label mapping, prediction, and retrieval")]
struct Cli {
    /// Also print each result as one JSON object per line.
    #[arg(long, global = true)]
    json_lines: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutDir {
    /// Directory all output files are written under.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic oracle pair (matched labels + two content sets).
    GenSynth {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Train the multi-way label mapping model.
    TrainMapper {
        /// Mapping dataset file(s); repeat for multiple pairs.
        #[arg(long, required = true)]
        data: Vec<PathBuf>,
        #[arg(long, default_value = "default")]
        registry: String,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 100)]
        d: usize,
        /// Hidden widths of the label encoders, comma separated.
        #[arg(long, default_value = "128,128")]
        hidden: String,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Train a content encoder against a frozen mapping model.
    TrainEncoder {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "augmented")]
        mode: String,
        /// Alternative format for emotion label augmentation.
        #[arg(long)]
        augment_format: Option<String>,
        /// Second dataset of the pair (multitask mode).
        #[arg(long)]
        second: Option<PathBuf>,
        /// Identifier the encoder is stored under (default: dataset domain).
        #[arg(long)]
        name: Option<String>,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value = "8-1-1")]
        splits: String,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Translate a label between two registered formats.
    Translate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        format_in: String,
        #[arg(long)]
        format_out: String,
        /// Comma-separated label values in the source format.
        #[arg(long)]
        values: String,
    },
    /// Predict labels for every sample of a content dataset.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Target format (default: the dataset's own format).
        #[arg(long)]
        format: Option<String>,
        /// Content encoder to use (default: the dataset's domain).
        #[arg(long)]
        encoder: Option<String>,
    },
    /// Score a trained model on the test split of a dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_parser = ["supervised", "zero-shot", "mapping"])]
        scenario: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        encoder: Option<String>,
        #[arg(long, default_value = "8-1-1")]
        splits: String,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
    },
    /// PCA of the unit-normalized head rows; exports projected coordinates.
    AnalyzePca {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[command(flatten)]
        out: OutDir,
    },
    /// Emotion-based nearest-neighbor retrieval across datasets.
    Retrieve {
        #[arg(long)]
        model: PathBuf,
        /// Token (sample id or text) resolved through its dataset's encoder.
        #[arg(long)]
        query: String,
        /// Dataset id the neighbors are retrieved from.
        #[arg(long = "in")]
        in_dataset: String,
        #[arg(long, default_value_t = 5)]
        top: usize,
        /// Content dataset file(s) to index; repeat per dataset.
        #[arg(long, required = true)]
        data: Vec<PathBuf>,
    },
    /// Full protocol over one pair: train, evaluate all six scenarios.
    RunSuite {
        #[arg(long)]
        mapping: PathBuf,
        #[arg(long)]
        data_a: PathBuf,
        #[arg(long)]
        data_b: PathBuf,
        #[arg(long, default_value = "default")]
        registry: String,
        #[arg(long, default_value = "augmented")]
        mode: String,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 100)]
        d: usize,
        #[arg(long, default_value = "8-1-1")]
        splits: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutDir,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                // runtime failure mid-computation
                EmoError::Divergence { .. } => ExitCode::from(2),
                // everything else is a validation / input problem
                _ => ExitCode::from(1),
            }
        }
    }
}

/// Formats a value with 6 significant digits.
fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v:.5}");
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).clamp(0, 15) as usize;
    format!("{v:.decimals$}")
}

fn json_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Renders a flat JSON object; values are pre-rendered JSON fragments.
fn json_object(fields: &[(&str, String)]) -> String {
    let body: Vec<String> = fields
        .iter()
        .map(|(k, v)| format!("\"{}\":{}", json_escape(k), v))
        .collect();
    format!("{{{}}}", body.join(","))
}

fn json_str(s: &str) -> String {
    format!("\"{}\"", json_escape(s))
}

fn resolve_registry(name: &str) -> Result<FormatRegistry> {
    match name {
        "default" => Ok(default_registry()),
        "synthetic" => Ok(synthetic_registry()),
        other => Err(EmoError::Config(format!(
            "unknown registry '{other}' (expected 'default' or 'synthetic')"
        ))),
    }
}

fn parse_splits(s: &str) -> Result<[usize; 3]> {
    let parts: Vec<usize> = s
        .split('-')
        .map(|p| {
            p.parse::<usize>()
                .map_err(|_| EmoError::Config(format!("bad split ratio component '{p}'")))
        })
        .collect::<Result<_>>()?;
    if parts.len() != 3 || parts.iter().any(|p| *p == 0) {
        return Err(EmoError::Config(format!(
            "split ratios expect three positive components like '8-1-1', got '{s}'"
        )));
    }
    Ok([parts[0], parts[1], parts[2]])
}

fn parse_widths(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| EmoError::Config(format!("bad hidden width '{p}'")))
        })
        .collect()
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(EmoError::Validation(format!(
            "{what} not found at '{}'",
            path.display()
        )));
    }
    Ok(())
}

fn load_model_checked(path: &Path) -> Result<LoadedModel> {
    require_file(path, "model file")?;
    load_model(path)
}

fn ensure_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn print_report(report: &EvalReport, json: bool) {
    let vars = report
        .per_variable
        .iter()
        .map(|(n, s)| format!("{n}={}", sig6(*s)))
        .collect::<Vec<_>>()
        .join(" ");
    println!(
        "{} {} {} {} mean={}",
        report.dataset_id,
        report.scenario.name(),
        report.metric.name(),
        if vars.is_empty() { "-" } else { &vars },
        sig6(report.aggregate)
    );
    if json {
        let per: Vec<String> = report
            .per_variable
            .iter()
            .map(|(n, s)| format!("{}:{}", json_str(n), s))
            .collect();
        println!(
            "{}",
            json_object(&[
                ("dataset", json_str(&report.dataset_id)),
                ("scenario", json_str(report.scenario.name())),
                ("metric", json_str(report.metric.name())),
                ("per_variable", format!("{{{}}}", per.join(","))),
                ("mean", report.aggregate.to_string()),
            ])
        );
    }
}

fn run(cli: &Cli) -> Result<()> {
    let json = cli.json_lines;
    match &cli.command {
        Command::GenSynth { n, sigma, seed, out } => {
            ensure_out(&out.out)?;
            let pair = generate_synthetic_pair(*n, *sigma, *seed)?;
            let mapping = out.out.join("mapping.csv");
            let a = out.out.join("content_a.csv");
            let b = out.out.join("content_b.csv");
            save_mapping_dataset(&pair.mapping, &mapping)?;
            save_content_dataset(&pair.content_a, &a)?;
            save_content_dataset(&pair.content_b, &b)?;
            println!(
                "wrote {} pairs to {} and {} samples each to {} / {}",
                n,
                mapping.display(),
                n,
                a.display(),
                b.display()
            );
            if json {
                println!(
                    "{}",
                    json_object(&[
                        ("n", n.to_string()),
                        ("sigma", sigma.to_string()),
                        ("seed", seed.to_string()),
                        ("mapping", json_str(&mapping.display().to_string())),
                        ("content_a", json_str(&a.display().to_string())),
                        ("content_b", json_str(&b.display().to_string())),
                    ])
                );
            }
            Ok(())
        }

        Command::TrainMapper {
            data,
            registry,
            steps,
            batch,
            d,
            hidden,
            lr,
            seed,
            out,
        } => {
            ensure_out(&out.out)?;
            let registry = resolve_registry(registry)?;
            let datasets = data
                .iter()
                .map(|p| {
                    require_file(p, "mapping dataset")?;
                    load_mapping_dataset(p)
                })
                .collect::<Result<Vec<_>>>()?;
            let config = MapperTrainConfig {
                n_steps: *steps,
                batch_size: *batch,
                d: *d,
                hidden_widths: parse_widths(hidden)?,
                optimizer: OptimizerConfig {
                    algorithm: "adam".into(),
                    learning_rate: *lr,
                },
                seed: *seed,
                ..Default::default()
            };
            let mapper = train_mapper(&registry, &datasets, &config)?;
            let path = out.out.join("model.emoe");
            save_model(&mapper, &[], *seed, &path)?;
            println!("trained mapper (d={d}, {steps} steps) -> {}", path.display());
            if json {
                println!(
                    "{}",
                    json_object(&[
                        ("model", json_str(&path.display().to_string())),
                        ("d", d.to_string()),
                        ("steps", steps.to_string()),
                        ("seed", seed.to_string()),
                    ])
                );
            }
            Ok(())
        }

        Command::TrainEncoder {
            model,
            data,
            mode,
            augment_format,
            second,
            name,
            epochs,
            batch,
            splits,
            split_seed,
            seed,
            out,
        } => {
            ensure_out(&out.out)?;
            let loaded = load_model_checked(model)?;
            require_file(data, "content dataset")?;
            let dataset = load_content_dataset(data)?;
            let ratios = parse_splits(splits)?;
            let (train, dev, _test) = split_dataset(&dataset, ratios, *split_seed)?;
            let second_data = second
                .as_ref()
                .map(|p| {
                    require_file(p, "second dataset")?;
                    let ds = load_content_dataset(p)?;
                    Ok::<ContentDataset, EmoError>(split_dataset(&ds, ratios, *split_seed)?.0)
                })
                .transpose()?;
            let config = EncoderTrainConfig {
                n_epochs: *epochs,
                batch_size: *batch,
                mode: TrainMode::from_name(mode)?,
                augmentation_format: augment_format.clone(),
                seed: *seed,
                ..Default::default()
            };
            let mut encoder =
                train_content_encoder(&train, Some(&dev), second_data.as_ref(), &loaded.mapper, &config)?;
            encoder.domain_id = name.clone().unwrap_or_else(|| dataset.domain_id.clone());
            let mut encoders = loaded.content_encoders;
            encoders.retain(|e| e.domain_id != encoder.domain_id);
            encoders.push(encoder);
            let path = out.out.join("model.emoe");
            save_model(&loaded.mapper, &encoders, *seed, &path)?;
            println!(
                "trained {} encoder on '{}' ({} samples) -> {}",
                mode,
                dataset.id,
                train.len(),
                path.display()
            );
            if json {
                println!(
                    "{}",
                    json_object(&[
                        ("model", json_str(&path.display().to_string())),
                        ("dataset", json_str(&dataset.id)),
                        ("mode", json_str(mode)),
                        ("seed", seed.to_string()),
                    ])
                );
            }
            Ok(())
        }

        Command::Translate {
            model,
            format_in,
            format_out,
            values,
        } => {
            let loaded = load_model_checked(model)?;
            let values: Vec<f64> = values
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| EmoError::Config(format!("bad label value '{v}'")))
                })
                .collect::<Result<_>>()?;
            let label = EmotionLabel::new(format_in.clone(), values);
            let translated = loaded.mapper.translate(&label, format_out)?;
            let rendered: Vec<String> = translated.values.iter().map(|v| sig6(*v)).collect();
            println!("{}", rendered.join(" "));
            if json {
                println!(
                    "{}",
                    json_object(&[
                        ("format_in", json_str(format_in)),
                        ("format_out", json_str(format_out)),
                        (
                            "values",
                            format!(
                                "[{}]",
                                translated
                                    .values
                                    .iter()
                                    .map(f64::to_string)
                                    .collect::<Vec<_>>()
                                    .join(",")
                            ),
                        ),
                    ])
                );
            }
            Ok(())
        }

        Command::Predict {
            model,
            data,
            format,
            encoder,
        } => {
            let loaded = load_model_checked(model)?;
            require_file(data, "content dataset")?;
            let dataset = load_content_dataset(data)?;
            let target = format.clone().unwrap_or_else(|| dataset.format_id.clone());
            let enc_id = encoder.clone().unwrap_or_else(|| dataset.domain_id.clone());
            let enc = loaded
                .content_encoders
                .iter()
                .find(|e| e.domain_id == enc_id)
                .ok_or_else(|| {
                    EmoError::Validation(format!("model holds no content encoder '{enc_id}'"))
                })?;
            for sample in &dataset.samples {
                let label = emomap::content::predict(enc, &loaded.mapper, sample, &target)?;
                let rendered: Vec<String> = label.values.iter().map(|v| sig6(*v)).collect();
                println!("{} {}", sample.id, rendered.join(" "));
                if json {
                    println!(
                        "{}",
                        json_object(&[
                            ("id", json_str(&sample.id)),
                            ("format", json_str(&target)),
                            (
                                "values",
                                format!(
                                    "[{}]",
                                    label
                                        .values
                                        .iter()
                                        .map(f64::to_string)
                                        .collect::<Vec<_>>()
                                        .join(",")
                                ),
                            ),
                        ])
                    );
                }
            }
            Ok(())
        }

        Command::Evaluate {
            model,
            scenario,
            data,
            encoder,
            splits,
            split_seed,
        } => {
            let loaded = load_model_checked(model)?;
            require_file(data, "dataset")?;
            let ratios = parse_splits(splits)?;
            let scenario = Scenario::from_name(scenario)?;
            let reports = match scenario {
                Scenario::Mapping => {
                    let mapping = load_mapping_dataset(data)?;
                    let (_, _, test) = split_mapping_dataset(&mapping, ratios, *split_seed)?;
                    vec![
                        evaluate_mapping(&loaded.mapper, &test, Direction::AToB)?,
                        evaluate_mapping(&loaded.mapper, &test, Direction::BToA)?,
                    ]
                }
                Scenario::Supervised | Scenario::ZeroShot => {
                    let dataset = load_content_dataset(data)?;
                    let (_, _, test) = split_dataset(&dataset, ratios, *split_seed)?;
                    let enc_id = encoder.clone().unwrap_or_else(|| dataset.domain_id.clone());
                    let enc = loaded
                        .content_encoders
                        .iter()
                        .find(|e| e.domain_id == enc_id)
                        .ok_or_else(|| {
                            EmoError::Validation(format!(
                                "model holds no content encoder '{enc_id}'"
                            ))
                        })?;
                    vec![match scenario {
                        Scenario::Supervised => {
                            evaluate_supervised(enc, &loaded.mapper, &test)?
                        }
                        _ => evaluate_zero_shot(enc, &loaded.mapper, &test)?,
                    }]
                }
            };
            for r in &reports {
                print_report(r, json);
            }
            Ok(())
        }

        Command::AnalyzePca { model, k, out } => {
            ensure_out(&out.out)?;
            let loaded = load_model_checked(model)?;
            // unit-normalized head rows, labeled FORMAT:variable
            let mut labeled: Vec<(String, Vec<f64>)> = Vec::new();
            for format in loaded.mapper.registry().formats() {
                for (variable, row) in loaded.mapper.head_rows(&format.id)? {
                    let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm == 0.0 {
                        return Err(EmoError::DegenerateVector(format!(
                            "head row {}:{variable} has zero norm",
                            format.id
                        )));
                    }
                    labeled.push((
                        format!("{}:{variable}", format.id),
                        row.iter().map(|x| x / norm).collect(),
                    ));
                }
            }
            let vectors: Vec<Vec<f64>> = labeled.iter().map(|(_, v)| v.clone()).collect();
            let pca = pca_fit(&vectors, *k)?;
            let rows: Vec<(String, Vec<f64>)> = labeled
                .iter()
                .map(|(id, v)| Ok((id.clone(), pca_project(&pca, v)?)))
                .collect::<Result<_>>()?;
            let path = out.out.join("pca.tsv");
            std::fs::write(&path, render_projection_table(&rows))?;
            let variances: Vec<String> = pca.variances.iter().map(|v| sig6(*v)).collect();
            println!(
                "explained variances: {} -> {}",
                variances.join(" "),
                path.display()
            );
            if json {
                println!(
                    "{}",
                    json_object(&[
                        (
                            "variances",
                            format!(
                                "[{}]",
                                pca.variances
                                    .iter()
                                    .map(f64::to_string)
                                    .collect::<Vec<_>>()
                                    .join(",")
                            ),
                        ),
                        ("coordinates", json_str(&path.display().to_string())),
                    ])
                );
            }
            Ok(())
        }

        Command::Retrieve {
            model,
            query,
            in_dataset,
            top,
            data,
        } => {
            let loaded = load_model_checked(model)?;
            let datasets = data
                .iter()
                .map(|p| {
                    require_file(p, "content dataset")?;
                    load_content_dataset(p)
                })
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&ContentDataset> = datasets.iter().collect();
            let index = build_index(&loaded.mapper, &loaded.content_encoders, &refs)?;
            let query_entry = index
                .entries()
                .iter()
                .find(|e| {
                    e.id.ends_with(&format!("/{query}"))
                        || e.text.as_deref() == Some(query.as_str())
                })
                .ok_or_else(|| {
                    EmoError::Validation(format!(
                        "query token '{query}' not found in the indexed datasets"
                    ))
                })?
                .clone();
            let hits = query_top_k(&index, &query_entry.embedding, *top, Some(in_dataset))?;
            for (rank, hit) in hits.iter().enumerate() {
                let display = hit.entry.text.as_deref().unwrap_or(&hit.entry.id);
                println!("{} {} {}", rank + 1, display, sig6(hit.similarity));
                if json {
                    println!(
                        "{}",
                        json_object(&[
                            ("rank", (rank + 1).to_string()),
                            ("id", json_str(&hit.entry.id)),
                            ("dataset", json_str(&hit.entry.dataset_id)),
                            ("similarity", hit.similarity.to_string()),
                        ])
                    );
                }
            }
            Ok(())
        }

        Command::RunSuite {
            mapping,
            data_a,
            data_b,
            registry,
            mode,
            steps,
            epochs,
            d,
            splits,
            seed,
            out,
        } => {
            ensure_out(&out.out)?;
            let registry = resolve_registry(registry)?;
            require_file(mapping, "mapping dataset")?;
            let mapping = load_mapping_dataset(mapping)?;
            require_file(data_a, "content dataset")?;
            require_file(data_b, "content dataset")?;
            let content_a = load_content_dataset(data_a)?;
            let content_b = load_content_dataset(data_b)?;
            let config = SuiteConfig {
                mapper: MapperTrainConfig {
                    n_steps: *steps,
                    d: *d,
                    seed: *seed,
                    ..Default::default()
                },
                encoder: EncoderTrainConfig {
                    n_epochs: *epochs,
                    seed: *seed,
                    ..Default::default()
                },
                mode: TrainMode::from_name(mode)?,
                split_ratios: parse_splits(splits)?,
                split_seed: *seed,
            };
            let mut outcome = run_suite(&registry, &mapping, &content_a, &content_b, &config)?;
            for r in &outcome.reports {
                print_report(r, json);
            }
            let table = out.out.join("results.tsv");
            write_report_table(&outcome.reports, &table)?;
            // disambiguate the pair's encoders before persisting
            outcome.encoder_a.domain_id = content_a.id.clone();
            outcome.encoder_b.domain_id = content_b.id.clone();
            let model_path = out.out.join("model.emoe");
            save_model(
                &outcome.mapper,
                &[outcome.encoder_a, outcome.encoder_b],
                *seed,
                &model_path,
            )?;
            println!("wrote {} and {}", table.display(), model_path.display());
            Ok(())
        }
    }
}
