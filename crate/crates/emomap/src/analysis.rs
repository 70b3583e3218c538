//! Structure analysis of the emotion space: PCA via a cyclic Jacobi
//! eigensolver, and exact cosine-similarity retrieval across datasets.

use crate::content::{ContentDataset, ContentEncoder};
use crate::error::{EmoError, Result};
use crate::mapper::{EmotionEmbedding, MultiWayMapper};
use crate::numeric::{cosine, Matrix};

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

/// Off-diagonal Frobenius norm below which the Jacobi sweep stops.
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Principal components of a point cloud in the emotion space.
#[derive(Debug, Clone)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// k × d, rows orthonormal.
    pub components: Matrix,
    /// Explained variances, non-increasing.
    pub variances: Vec<f64>,
}

impl PcaModel {
    pub fn d(&self) -> usize {
        self.components.cols()
    }

    pub fn k(&self) -> usize {
        self.components.rows()
    }
}

/// Diagonalizes a symmetric matrix with cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as rows), unsorted.
fn jacobi_eigen(mut a: Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(EmoError::Dimension("jacobi: matrix must be square".into()));
    }
    let mut v = Matrix::identity(n);
    let off = |m: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m.get(i, j) * m.get(i, j);
                }
            }
        }
        s.sqrt()
    };
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        if off(&a) < JACOBI_TOL {
            break;
        }
        // deterministic cyclic order over the upper triangle
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a.get(p, p), a.get(q, q));
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vpk = v.get(p, k);
                    let vqk = v.get(q, k);
                    v.set(p, k, c * vpk - s * vqk);
                    v.set(q, k, s * vpk + c * vqk);
                }
            }
        }
    }
    let eigenvalues: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    Ok((eigenvalues, v))
}

/// Fits PCA on mean-centered input vectors: top-k eigenpairs of the sample
/// covariance, computed with the deterministic cyclic Jacobi eigensolver.
pub fn pca_fit(vectors: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    let d = vectors.first().map(Vec::len).unwrap_or(0);
    if vectors.len() < k + 1 {
        return Err(EmoError::Validation(format!(
            "pca_fit needs at least k+1 = {} vectors, got {}",
            k + 1,
            vectors.len()
        )));
    }
    if k == 0 || k > d {
        return Err(EmoError::Config(format!(
            "component count k={k} must be in 1..=d ({d})"
        )));
    }
    if vectors.iter().any(|v| v.len() != d) {
        return Err(EmoError::Dimension("pca_fit: ragged input vectors".into()));
    }
    let n = vectors.len() as f64;
    let mean: Vec<f64> = (0..d)
        .map(|j| vectors.iter().map(|v| v[j]).sum::<f64>() / n)
        .collect();
    let mut cov = Matrix::zeros(d, d);
    for v in vectors {
        for i in 0..d {
            let di = v[i] - mean[i];
            for j in i..d {
                let add = di * (v[j] - mean[j]);
                cov.set(i, j, cov.get(i, j) + add);
            }
        }
    }
    let denom = n - 1.0;
    for i in 0..d {
        for j in i..d {
            let val = cov.get(i, j) / denom;
            cov.set(i, j, val);
            cov.set(j, i, val);
        }
    }
    let (eigenvalues, eigenvectors) = jacobi_eigen(cov)?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eigenvalues[j].partial_cmp(&eigenvalues[i]).unwrap());
    let mut components = Matrix::zeros(k, d);
    let mut variances = Vec::with_capacity(k);
    for (row, &idx) in order.iter().take(k).enumerate() {
        // eigenvectors are columns of v-transpose: row idx of `eigenvectors`
        // holds component idx because rotations were applied to rows
        for col in 0..d {
            components.set(row, col, eigenvectors.get(idx, col));
        }
        variances.push(eigenvalues[idx].max(0.0));
    }
    Ok(PcaModel {
        mean,
        components,
        variances,
    })
}

/// components · (v − mean)
pub fn pca_project(model: &PcaModel, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != model.d() {
        return Err(EmoError::Dimension(format!(
            "pca_project: vector width {} vs model d {}",
            v.len(),
            model.d()
        )));
    }
    let centered: Vec<f64> = v.iter().zip(&model.mean).map(|(x, m)| x - m).collect();
    model.components.matvec(&centered)
}

/// Renders projected coordinates as a tab-separated table
/// (`id  pc1  pc2 …`) for external plotting.
pub fn render_projection_table(rows: &[(String, Vec<f64>)]) -> String {
    let mut out = String::new();
    for (id, coords) in rows {
        out.push_str(id);
        for c in coords {
            out.push_str(&format!("\t{c:.6}"));
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Retrieval
// ---------------------------------------------------------------------------

/// One cached embedding with its provenance.
#[derive(Debug, Clone)]
pub struct IndexEntry {
    pub id: String,
    pub dataset_id: String,
    pub text: Option<String>,
    pub embedding: EmotionEmbedding,
}

/// Immutable brute-force cosine index over sample embeddings.
pub struct RetrievalIndex {
    entries: Vec<IndexEntry>,
    d: usize,
}

impl RetrievalIndex {
    pub fn new(entries: Vec<IndexEntry>) -> Result<Self> {
        let d = entries
            .first()
            .map(|e| e.embedding.len())
            .ok_or_else(|| EmoError::Validation("retrieval index is empty".into()))?;
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if e.embedding.len() != d {
                return Err(EmoError::Dimension(format!(
                    "entry '{}' has embedding width {}, index uses {}",
                    e.id,
                    e.embedding.len(),
                    d
                )));
            }
            if !seen.insert(e.id.clone()) {
                return Err(EmoError::Validation(format!(
                    "duplicate index entry id '{}'",
                    e.id
                )));
            }
        }
        Ok(RetrievalIndex { entries, d })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }
}

/// Encodes every sample of every dataset with its domain's encoder and caches
/// the embeddings. Entry ids are `<dataset id>/<sample id>`.
pub fn build_index(
    mapper: &MultiWayMapper,
    encoders: &[ContentEncoder],
    datasets: &[&ContentDataset],
) -> Result<RetrievalIndex> {
    let _ = mapper; // embeddings live in the mapper's space; kept for d-checks
    let mut entries = Vec::new();
    for ds in datasets {
        let encoder = encoders
            .iter()
            .find(|e| e.domain_id == ds.domain_id)
            .ok_or_else(|| {
                EmoError::Validation(format!(
                    "no encoder for domain '{}' of dataset '{}'",
                    ds.domain_id, ds.id
                ))
            })?;
        for s in &ds.samples {
            let embedding = encoder.encode_content(s)?;
            if embedding.len() != mapper.d() {
                return Err(EmoError::Dimension(format!(
                    "encoder for '{}' emits width {}, mapper d is {}",
                    ds.domain_id,
                    embedding.len(),
                    mapper.d()
                )));
            }
            entries.push(IndexEntry {
                id: format!("{}/{}", ds.id, s.id),
                dataset_id: ds.id.clone(),
                text: s.text.clone(),
                embedding,
            });
        }
    }
    RetrievalIndex::new(entries)
}

/// A ranked retrieval hit.
#[derive(Debug, Clone)]
pub struct RankedEntry {
    pub entry: IndexEntry,
    pub similarity: f64,
}

/// Top-k entries by cosine similarity to the query, non-increasing, ties
/// broken by id order. `filter` restricts candidates to one dataset.
pub fn query_top_k(
    index: &RetrievalIndex,
    query: &[f64],
    k: usize,
    filter: Option<&str>,
) -> Result<Vec<RankedEntry>> {
    if k == 0 {
        return Err(EmoError::Config("k must be at least 1".into()));
    }
    if query.iter().map(|x| x * x).sum::<f64>() == 0.0 {
        return Err(EmoError::DegenerateVector(
            "retrieval query has zero norm".into(),
        ));
    }
    if query.len() != index.d() {
        return Err(EmoError::Dimension(format!(
            "query width {} vs index width {}",
            query.len(),
            index.d()
        )));
    }
    let mut scored: Vec<RankedEntry> = index
        .entries
        .iter()
        .filter(|e| filter.map(|f| e.dataset_id == f).unwrap_or(true))
        .map(|e| {
            Ok(RankedEntry {
                entry: e.clone(),
                similarity: cosine(query, &e.embedding)?,
            })
        })
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| {
        b.similarity
            .partial_cmp(&a.similarity)
            .unwrap()
            .then_with(|| a.entry.id.cmp(&b.entry.id))
    });
    scored.truncate(k);
    Ok(scored)
}
