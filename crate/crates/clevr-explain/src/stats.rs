//! Corpus statistics over a generated explanation dataset.

use crate::metrics::{tokenize, GroundTruthRecord};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty dataset")]
    EmptyDataset,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_images: usize,
    pub n_questions: usize,
    pub n_explanations: usize,
    pub vocabulary_size: usize,
    pub vocabulary: BTreeSet<String>,
    pub mean_explanation_words: f64,
    pub min_explanation_words: usize,
    pub max_explanation_words: usize,
    pub mean_question_words: f64,
    pub mean_explanations_per_question: f64,
    /// Spearman rank correlation between question and explanation word
    /// counts, over all (question, explanation) pairs, with average ranks
    /// for ties.
    pub spearman_qe: f64,
    /// Histogram of per-question mean explanation length (integer bins),
    /// keyed by question type.
    pub length_histograms: BTreeMap<String, BTreeMap<usize, usize>>,
}

/// Word count of one sentence: metric tokens minus the period token.
pub fn word_count(text: &str) -> usize {
    tokenize(text).iter().filter(|t| t.as_str() != ".").count()
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Tied values share the average of their positional ranks (1-based).
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Spearman correlation with average-rank tie handling.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Question texts are supplied separately (records do not carry them).
pub fn compute_stats(
    records: &[GroundTruthRecord],
    question_texts: &[String],
) -> Result<CorpusStats, StatsError> {
    if records.is_empty() || records.iter().all(|r| r.explanations.is_empty()) {
        return Err(StatsError::EmptyDataset);
    }
    let mut vocabulary = BTreeSet::new();
    let mut total_words = 0usize;
    let mut min_words = usize::MAX;
    let mut max_words = 0usize;
    let mut n_explanations = 0usize;
    let mut qe_q: Vec<f64> = Vec::new();
    let mut qe_e: Vec<f64> = Vec::new();
    let mut images = BTreeSet::new();
    let mut histograms: BTreeMap<String, BTreeMap<usize, usize>> = BTreeMap::new();
    let mut question_word_total = 0usize;
    for (record, qtext) in records.iter().zip(question_texts) {
        images.insert(record.image_index);
        let q_words = word_count(qtext);
        question_word_total += q_words;
        let mut length_sum = 0usize;
        for e in &record.explanations {
            let w = word_count(e);
            total_words += w;
            min_words = min_words.min(w);
            max_words = max_words.max(w);
            n_explanations += 1;
            length_sum += w;
            qe_q.push(q_words as f64);
            qe_e.push(w as f64);
            for tok in tokenize(e) {
                if tok != "." {
                    vocabulary.insert(tok);
                }
            }
        }
        let qt = record
            .question_type
            .clone()
            .unwrap_or_else(|| "unknown".to_string());
        let mean_len = if record.explanations.is_empty() {
            0
        } else {
            (length_sum as f64 / record.explanations.len() as f64).round() as usize
        };
        *histograms.entry(qt).or_default().entry(mean_len).or_insert(0) += 1;
    }
    Ok(CorpusStats {
        n_images: images.len(),
        n_questions: records.len(),
        n_explanations,
        vocabulary_size: vocabulary.len(),
        vocabulary,
        mean_explanation_words: total_words as f64 / n_explanations as f64,
        min_explanation_words: min_words,
        max_explanation_words: max_words,
        mean_question_words: question_word_total as f64 / records.len() as f64,
        mean_explanations_per_question: n_explanations as f64 / records.len() as f64,
        spearman_qe: spearman(&qe_q, &qe_e),
        length_histograms: histograms,
    })
}
