//! Fallback text processing for inputs that lack a semantic vector or a text
//! quality score: a TF-IDF + truncated-SVD embedder and a closed-form quality.

use std::collections::{BTreeMap, HashSet};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// `v / ||v||_2`. A zero vector is degenerate.
pub fn normalize_semantic(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::invalid("semantic vector has dimension 0"));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateVector);
    }
    // already unit length: keep the stored bits so round trips are exact
    if (norm - 1.0).abs() <= 1e-12 {
        return Ok(v.to_vec());
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// `1 - exp(-4 V / D)` with `V` distinct and `D` total tokens; 0 for empty text.
pub fn fallback_text_quality<S: AsRef<str>>(tokens: &[S]) -> f64 {
    if tokens.is_empty() {
        return 0.0;
    }
    let distinct: HashSet<&str> = tokens.iter().map(|t| t.as_ref()).collect();
    1.0 - (-4.0 * distinct.len() as f64 / tokens.len() as f64).exp()
}

/// Lower-cased alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Sparse document-term matrix in CSR form.
struct Csr {
    n_cols: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    fn n_rows(&self) -> usize {
        self.offsets.len() - 1
    }

    fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let s = self.offsets[r]..self.offsets[r + 1];
        self.cols[s.clone()].iter().copied().zip(self.vals[s].iter().copied())
    }

    /// `A * M` for dense `M` (n_cols x l).
    fn mul(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_rows(), m.ncols());
        for r in 0..self.n_rows() {
            for (c, v) in self.row(r) {
                for j in 0..m.ncols() {
                    out[(r, j)] += v * m[(c, j)];
                }
            }
        }
        out
    }

    /// `A^T * M` for dense `M` (n_rows x l).
    fn tmul(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_cols, m.ncols());
        for r in 0..self.n_rows() {
            for (c, v) in self.row(r) {
                for j in 0..m.ncols() {
                    out[(c, j)] += v * m[(r, j)];
                }
            }
        }
        out
    }
}

fn tfidf<S: AsRef<str>>(texts: &[Vec<S>]) -> Csr {
    let mut vocab: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in texts {
        for t in doc {
            vocab.entry(t.as_ref()).or_insert(0);
        }
    }
    for (i, v) in vocab.values_mut().enumerate() {
        *v = i;
    }
    let mut df = vec![0usize; vocab.len()];
    let mut rows: Vec<BTreeMap<usize, f64>> = Vec::with_capacity(texts.len());
    for doc in texts {
        let mut tf: BTreeMap<usize, f64> = BTreeMap::new();
        for t in doc {
            *tf.entry(vocab[t.as_ref()]).or_insert(0.0) += 1.0;
        }
        for &c in tf.keys() {
            df[c] += 1;
        }
        rows.push(tf);
    }
    let n_docs = texts.len() as f64;
    let idf: Vec<f64> = df.iter().map(|&d| (n_docs / d as f64).ln()).collect();
    let mut offsets = vec![0];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for tf in rows {
        for (c, count) in tf {
            let w = count * idf[c];
            if w != 0.0 {
                cols.push(c);
                vals.push(w);
            }
        }
        offsets.push(cols.len());
    }
    Csr {
        n_cols: vocab.len(),
        offsets,
        cols,
        vals,
    }
}

fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().qr().q()
}

/// Embeds tokenized documents: TF-IDF (raw counts times `ln(N/df)`) reduced
/// to `dim` dimensions by randomized subspace iteration, rows scaled to unit
/// norm. `dim` is clamped to the rank bound `min(docs, informative terms)`.
///
/// Documents whose TF-IDF row is all zero get `None`.
pub fn embed_corpus<S: AsRef<str>>(
    texts: &[Vec<S>],
    dim: usize,
    seed: u64,
) -> Result<Vec<Option<Vec<f64>>>> {
    if texts.is_empty() {
        return Err(Error::EmptyInput("corpus has no documents".into()));
    }
    if dim == 0 {
        return Err(Error::invalid("embedding dimension must be positive"));
    }
    let a = tfidf(texts);
    if a.vals.is_empty() {
        return Err(Error::DegenerateCorpus(
            "every TF-IDF row is zero (empty documents or no discriminative terms)".into(),
        ));
    }
    let informative: HashSet<usize> = a.cols.iter().copied().collect();
    let rank_bound = a.n_rows().min(informative.len());
    let k = dim.min(rank_bound);
    let width = (k + 10).min(a.n_rows()).min(a.n_cols).max(k);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(a.n_cols, width, |_, _| StandardNormal.sample(&mut rng));
    let mut q = orthonormalize(&a.mul(&omega));
    for _ in 0..4 {
        let z = orthonormalize(&a.tmul(&q));
        q = orthonormalize(&a.mul(&z));
    }
    // B = Q^T A; its left singular vectors come from the eigenvectors of B B^T.
    let bt = a.tmul(&q);
    let gram = bt.transpose() * &bt;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut coords = DMatrix::zeros(q.ncols(), k);
    for (out_col, &i) in order.iter().take(k).enumerate() {
        let sigma = eig.eigenvalues[i].max(0.0).sqrt();
        for r in 0..q.ncols() {
            coords[(r, out_col)] = eig.eigenvectors[(r, i)] * sigma;
        }
    }
    let emb = q * coords;
    Ok((0..emb.nrows())
        .map(|r| {
            let row: Vec<f64> = emb.row(r).iter().copied().collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if a.row(r).next().is_some() && norm > 0.0 {
                Some(row.iter().map(|x| x / norm).collect())
            } else {
                None
            }
        })
        .collect())
}
