//! Sparse document-term count matrices.

use std::collections::{BTreeMap, HashMap};

use super::tokenize::tokenize;
use crate::error::{contract, Error, Result};
use crate::numerics::Matrix;

/// Docs × vocabulary token counts in compressed sparse row form.
/// The vocabulary is sorted lexicographically and only holds terms whose
/// corpus total reaches `min_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentTermMatrix {
    vocabulary: Vec<String>,
    min_count: u32,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    counts: Vec<u32>,
}

impl DocumentTermMatrix {
    /// Builds the matrix from raw texts.
    pub fn from_texts<S: AsRef<str>>(texts: &[S], min_count: u32) -> Result<Self> {
        let tokenized: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t.as_ref())).collect();
        Self::from_tokens(&tokenized, min_count)
    }

    pub fn from_tokens(docs: &[Vec<String>], min_count: u32) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if min_count < 1 {
            return Err(contract("min_count must be at least 1"));
        }
        let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
        for doc in docs {
            for tok in doc {
                *totals.entry(tok.as_str()).or_default() += 1;
            }
        }
        let vocabulary: Vec<String> = totals
            .into_iter()
            .filter(|&(_, n)| n >= u64::from(min_count))
            .map(|(t, _)| t.to_string())
            .collect();
        let index: HashMap<&str, u32> = vocabulary
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i as u32))
            .collect();

        let mut indptr = Vec::with_capacity(docs.len() + 1);
        let mut indices = Vec::new();
        let mut counts = Vec::new();
        indptr.push(0);
        for doc in docs {
            let mut row: BTreeMap<u32, u32> = BTreeMap::new();
            for tok in doc {
                if let Some(&j) = index.get(tok.as_str()) {
                    *row.entry(j).or_default() += 1;
                }
            }
            for (j, c) in row {
                indices.push(j);
                counts.push(c);
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            vocabulary,
            min_count,
            indptr,
            indices,
            counts,
        })
    }

    pub fn docs(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn vocab_len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn min_count(&self) -> u32 {
        self.min_count
    }

    pub fn nnz(&self) -> usize {
        self.counts.len()
    }

    /// `(term index, count)` pairs of one document.
    pub fn row(&self, doc: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        let (lo, hi) = (self.indptr[doc], self.indptr[doc + 1]);
        self.indices[lo..hi]
            .iter()
            .zip(&self.counts[lo..hi])
            .map(|(&j, &c)| (j as usize, c))
    }

    pub fn get(&self, doc: usize, term: usize) -> u32 {
        self.row(doc).find(|&(j, _)| j == term).map_or(0, |(_, c)| c)
    }

    /// Total count of each vocabulary term across the corpus.
    pub fn term_totals(&self) -> Vec<u64> {
        let mut totals = vec![0u64; self.vocab_len()];
        for (&j, &c) in self.indices.iter().zip(&self.counts) {
            totals[j as usize] += u64::from(c);
        }
        totals
    }

    /// Sum of retained token counts per document.
    pub fn doc_totals(&self) -> Vec<u64> {
        (0..self.docs())
            .map(|d| self.row(d).map(|(_, c)| u64::from(c)).sum())
            .collect()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.counts.iter().map(|&c| f64::from(c) * f64::from(c)).sum()
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.docs(), self.vocab_len());
        for d in 0..self.docs() {
            for (j, c) in self.row(d) {
                m.set(d, j, f64::from(c));
            }
        }
        m
    }

    /// `A · x` for dense `x` (vocab × cols).
    pub fn mul_dense(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.rows(), self.vocab_len());
        let cols = x.cols();
        let mut out = Matrix::zeros(self.docs(), cols);
        for d in 0..self.docs() {
            let orow = out.row_mut(d);
            for (j, c) in self.row(d) {
                let c = f64::from(c);
                for (o, v) in orow.iter_mut().zip(x.row(j)) {
                    *o += c * v;
                }
            }
        }
        out
    }

    /// `Aᵀ · x` for dense `x` (docs × cols).
    pub fn tmul_dense(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.rows(), self.docs());
        let cols = x.cols();
        let mut out = Matrix::zeros(self.vocab_len(), cols);
        for d in 0..self.docs() {
            let xrow = x.row(d);
            for (j, c) in self.row(d) {
                let c = f64::from(c);
                for (o, v) in out.row_mut(j).iter_mut().zip(xrow) {
                    *o += c * v;
                }
            }
        }
        out
    }
}
