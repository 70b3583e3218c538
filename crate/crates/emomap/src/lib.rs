//! A shared emotion-embedding space for heterogeneous emotion label formats.
//!
//! The crate trains a multi-way mapping model — per-format label encoders and
//! bias-free linear prediction heads joined by a common `d`-dimensional latent
//! space — so that labels in any registered format can be translated into any
//! other. Content encoders embed feature vectors (words, texts, images as
//! precomputed features) into the same space, enabling supervised prediction,
//! zero-shot prediction of unseen formats, PCA analysis of the space, and
//! emotion-based retrieval.

pub mod analysis;
pub mod content;
pub mod error;
pub mod eval;
pub mod formats;
pub mod io;
pub mod mapper;
pub mod numeric;

pub use error::{EmoError, Result};
pub use formats::{
    EmotionLabel, EquivalenceClasses, FormatRegistry, LabelFormat, Problem, ValueRange,
    VariableScale,
};
pub use mapper::{MapperTrainConfig, MappingDataset, MultiWayMapper};

pub use analysis::{build_index, pca_fit, pca_project, query_top_k, PcaModel, RetrievalIndex};
pub use content::{
    predict, train_content_encoder, zero_shot_predict, ContentDataset, ContentEncoder,
    ContentSample, EncoderTrainConfig, Split, TrainMode,
};
pub use eval::{
    accuracy, evaluate_mapping, evaluate_supervised, evaluate_zero_shot, pearson_r, run_suite,
    Direction, EvalReport, Metric, Scenario, SuiteConfig,
};
pub use io::{
    generate_synthetic_pair, load_embedding_table, load_lexicon, load_model, save_model,
    split_dataset, split_indices, synthetic_registry, DatasetManifest, EmbeddingTable,
    LoadedModel, SyntheticPair,
};
