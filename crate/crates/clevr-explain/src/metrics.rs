//! Multi-reference NLG metrics (BLEU-4, METEOR, ROUGE-L, CIDEr), the masked
//! evaluation protocols, random baselines, and the reference-count
//! convergence experiment.

use crate::model::{classify_answer, Answer, AnswerType, AttributeValue, QuestionType};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no correctly answered questions in the evaluation subset")]
    EmptySubset,
    #[error("prediction for question {0} has no ground-truth record")]
    MissingGroundTruth(u64),
}

/// Lowercase whitespace tokenization; a sentence-final period becomes its own
/// token (this pins ROUGE-L on the published 4/7 example).
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens: Vec<String> = text
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if let Some(last) = tokens.last_mut() {
        if last.len() > 1 && last.ends_with('.') {
            last.pop();
            tokens.push(".".to_string());
        }
    }
    tokens
}

#[derive(Debug, Clone)]
pub struct EvalInstance {
    pub candidate: Vec<String>,
    pub references: Vec<Vec<String>>,
    pub answer_correct: bool,
    pub question_type: Option<QuestionType>,
    pub answer_type: Option<AnswerType>,
}

impl EvalInstance {
    pub fn new(candidate: Vec<String>, references: Vec<Vec<String>>) -> EvalInstance {
        EvalInstance {
            candidate,
            references,
            answer_correct: true,
            question_type: None,
            answer_type: None,
        }
    }
}

// ---------------------------------------------------------------------------
// BLEU-4
// ---------------------------------------------------------------------------

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus-level BLEU with 1–4-gram clipped precisions and brevity penalty
/// against the closest reference length; ×100.
pub fn bleu4(instances: &[EvalInstance]) -> f64 {
    let mut matches = [0usize; 4];
    let mut totals = [0usize; 4];
    let mut cand_len = 0usize;
    let mut ref_len = 0usize;
    for inst in instances {
        let c = inst.candidate.len();
        cand_len += c;
        // Closest reference length, shorter on ties.
        ref_len += inst
            .references
            .iter()
            .map(|r| r.len())
            .min_by_key(|&l| (l.abs_diff(c), l))
            .unwrap_or(0);
        for n in 1..=4 {
            let cand = ngram_counts(&inst.candidate, n);
            let mut clip: HashMap<&[String], usize> = HashMap::new();
            for r in &inst.references {
                for (g, count) in ngram_counts(r, n) {
                    let e = clip.entry(g).or_insert(0);
                    *e = (*e).max(count);
                }
            }
            for (g, count) in &cand {
                totals[n - 1] += count;
                matches[n - 1] += (*count).min(clip.get(g).copied().unwrap_or(0));
            }
        }
    }
    if cand_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 0..4 {
        if matches[n] == 0 || totals[n] == 0 {
            return 0.0;
        }
        log_sum += (matches[n] as f64 / totals[n] as f64).ln();
    }
    let bp = if cand_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    bp * (log_sum / 4.0).exp() * 100.0
}

// ---------------------------------------------------------------------------
// ROUGE-L
// ---------------------------------------------------------------------------

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

const ROUGE_BETA: f64 = 1.2;

fn rouge_l_single(candidate: &[String], reference: &[String]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(candidate, reference) as f64;
    let p = lcs / candidate.len() as f64;
    let r = lcs / reference.len() as f64;
    if p + r == 0.0 {
        return 0.0;
    }
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (1.0 + b2) * r * p / (r + b2 * p)
}

pub fn rouge_l_instance(inst: &EvalInstance) -> f64 {
    inst.references
        .iter()
        .map(|r| rouge_l_single(&inst.candidate, r))
        .fold(0.0, f64::max)
}

/// Per-instance max-over-references LCS F-measure, corpus mean; ×100.
pub fn rouge_l(instances: &[EvalInstance]) -> f64 {
    if instances.is_empty() {
        return 0.0;
    }
    let sum: f64 = instances.iter().map(rouge_l_instance).sum();
    sum / instances.len() as f64 * 100.0
}

// ---------------------------------------------------------------------------
// METEOR
// ---------------------------------------------------------------------------

const METEOR_ALPHA: f64 = 0.9;
const METEOR_BETA: f64 = 3.0;
const METEOR_GAMMA: f64 = 0.5;

fn stem(token: &str) -> &str {
    if token.len() > 3 {
        token.strip_suffix('s').unwrap_or(token)
    } else {
        token
    }
}

fn synonym_eq(a: &str, b: &str) -> bool {
    match (AttributeValue::from_token(a), AttributeValue::from_token(b)) {
        (Some(x), Some(y)) => x == y,
        _ => false,
    }
}

fn meteor_single(candidate: &[String], reference: &[String]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut cand_match: Vec<Option<usize>> = vec![None; candidate.len()];
    let mut ref_used = vec![false; reference.len()];
    // Stage 1 exact, stage 2 suffix stem, stage 3 closed synonym table.
    for stage in 0..3 {
        for (ci, c) in candidate.iter().enumerate() {
            if cand_match[ci].is_some() {
                continue;
            }
            for (ri, r) in reference.iter().enumerate() {
                if ref_used[ri] {
                    continue;
                }
                let hit = match stage {
                    0 => c == r,
                    1 => stem(c) == stem(r),
                    _ => synonym_eq(c, r),
                };
                if hit {
                    cand_match[ci] = Some(ri);
                    ref_used[ri] = true;
                    break;
                }
            }
        }
    }
    let pairs: Vec<(usize, usize)> = cand_match
        .iter()
        .enumerate()
        .filter_map(|(ci, m)| m.map(|ri| (ci, ri)))
        .collect();
    let m = pairs.len() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let p = m / candidate.len() as f64;
    let r = m / reference.len() as f64;
    let fmean = p * r / (METEOR_ALPHA * p + (1.0 - METEOR_ALPHA) * r);
    let mut chunks = 1usize;
    for w in pairs.windows(2) {
        if !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1) {
            chunks += 1;
        }
    }
    // A single contiguous alignment carries no fragmentation penalty; this
    // makes the identity score exactly 100.
    let penalty = if chunks <= 1 {
        0.0
    } else {
        METEOR_GAMMA * (chunks as f64 / m).powf(METEOR_BETA)
    };
    fmean * (1.0 - penalty)
}

pub fn meteor_instance(inst: &EvalInstance) -> f64 {
    inst.references
        .iter()
        .map(|r| meteor_single(&inst.candidate, r))
        .fold(0.0, f64::max)
}

/// Unigram-alignment METEOR with exact/stem/synonym stages; max over
/// references, corpus mean; ×100.
pub fn meteor(instances: &[EvalInstance]) -> f64 {
    if instances.is_empty() {
        return 0.0;
    }
    let sum: f64 = instances.iter().map(meteor_instance).sum();
    sum / instances.len() as f64 * 100.0
}

// ---------------------------------------------------------------------------
// CIDEr
// ---------------------------------------------------------------------------

type Gram = Vec<String>;

fn gram_counts(tokens: &[String], n: usize) -> HashMap<Gram, f64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.to_vec()).or_insert(0.0) += 1.0;
        }
    }
    counts
}

pub struct CiderScore {
    pub corpus: f64,
    pub per_instance: Vec<f64>,
    /// True when every idf weight vanishes (e.g., a single-instance corpus).
    pub degenerate: bool,
}

/// tf-idf n-gram cosine consensus, n = 1..4, averaged over references and n;
/// instance scores are on the ×1000 scale of the reported convention.
pub fn cider(instances: &[EvalInstance]) -> CiderScore {
    let n_docs = instances.len() as f64;
    let mut per_instance = vec![0.0; instances.len()];
    if instances.is_empty() {
        return CiderScore {
            corpus: 0.0,
            per_instance,
            degenerate: true,
        };
    }
    let mut degenerate = true;
    for n in 1..=4 {
        // Document frequency over the reference sets of the corpus.
        let mut df: HashMap<Gram, f64> = HashMap::new();
        for inst in instances {
            let mut seen: HashMap<Gram, bool> = HashMap::new();
            for r in &inst.references {
                for g in gram_counts(r, n).into_keys() {
                    seen.entry(g).or_insert(true);
                }
            }
            for g in seen.into_keys() {
                *df.entry(g).or_insert(0.0) += 1.0;
            }
        }
        let idf = |g: &Gram| -> f64 { (n_docs / df.get(g).copied().unwrap_or(0.0).max(1.0)).ln() };
        for (i, inst) in instances.iter().enumerate() {
            let cand: Vec<(Gram, f64)> = gram_counts(&inst.candidate, n)
                .into_iter()
                .map(|(g, tf)| {
                    let w = tf * idf(&g);
                    (g, w)
                })
                .collect();
            let cand_norm: f64 = cand.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            let cand_map: HashMap<&Gram, f64> = cand.iter().map(|(g, w)| (g, *w)).collect();
            if inst.references.is_empty() {
                continue;
            }
            let mut acc = 0.0;
            for r in &inst.references {
                let mut dot = 0.0;
                let mut norm = 0.0;
                for (g, tf) in gram_counts(r, n) {
                    let w = tf * idf(&g);
                    norm += w * w;
                    if let Some(cw) = cand_map.get(&g) {
                        dot += w * cw;
                    }
                }
                let norm = norm.sqrt();
                if cand_norm > 0.0 && norm > 0.0 {
                    acc += dot / (cand_norm * norm);
                    degenerate = false;
                }
                // 0/0 cosine contributes 0 by definition.
            }
            per_instance[i] += acc / inst.references.len() as f64 / 4.0;
        }
    }
    for v in per_instance.iter_mut() {
        *v *= 1000.0;
    }
    let corpus = per_instance.iter().sum::<f64>() / n_docs;
    CiderScore {
        corpus,
        per_instance,
        degenerate,
    }
}

// ---------------------------------------------------------------------------
// Corpus evaluation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Metrics over the correctly answered subset (the reporting protocol).
    CorrectOnly,
    /// All questions, wrong answers masked to the empty string; the mean of
    /// the four metrics is the model-selection criterion.
    MaskedMean,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricRow {
    pub n: usize,
    pub bleu4: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    pub cider: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub protocol: String,
    pub n_questions: usize,
    pub accuracy: f64,
    pub bleu4: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    pub cider: f64,
    /// Mean of the four metric values (masked-mean selection criterion).
    pub mean: f64,
    pub cider_degenerate: bool,
    pub by_question_type: BTreeMap<String, MetricRow>,
    pub by_answer_type: BTreeMap<String, MetricRow>,
}

fn metric_row(instances: &[EvalInstance]) -> MetricRow {
    MetricRow {
        n: instances.len(),
        bleu4: bleu4(instances),
        meteor: meteor(instances),
        rouge_l: rouge_l(instances),
        cider: cider(instances).corpus,
    }
}

pub fn evaluate_corpus(
    instances: &[EvalInstance],
    protocol: Protocol,
) -> Result<MetricReport, MetricsError> {
    let accuracy = if instances.is_empty() {
        0.0
    } else {
        instances.iter().filter(|i| i.answer_correct).count() as f64 / instances.len() as f64
    };
    let eval_set: Vec<EvalInstance> = match protocol {
        Protocol::CorrectOnly => {
            let subset: Vec<EvalInstance> = instances
                .iter()
                .filter(|i| i.answer_correct)
                .cloned()
                .collect();
            if subset.is_empty() {
                return Err(MetricsError::EmptySubset);
            }
            subset
        }
        Protocol::MaskedMean => instances
            .iter()
            .map(|i| {
                let mut inst = i.clone();
                if !inst.answer_correct {
                    inst.candidate = Vec::new();
                }
                inst
            })
            .collect(),
    };
    let b = bleu4(&eval_set);
    let m = meteor(&eval_set);
    let r = rouge_l(&eval_set);
    let c = cider(&eval_set);
    let mut by_question_type = BTreeMap::new();
    let mut by_answer_type = BTreeMap::new();
    for qt in QuestionType::ALL {
        let subset: Vec<EvalInstance> = eval_set
            .iter()
            .filter(|i| i.question_type == Some(qt))
            .cloned()
            .collect();
        if !subset.is_empty() {
            by_question_type.insert(qt.token().to_string(), metric_row(&subset));
        }
    }
    for at in [AnswerType::Binary, AnswerType::Counting, AnswerType::Attribute] {
        let subset: Vec<EvalInstance> = eval_set
            .iter()
            .filter(|i| i.answer_type == Some(at))
            .cloned()
            .collect();
        if !subset.is_empty() {
            by_answer_type.insert(at.token().to_string(), metric_row(&subset));
        }
    }
    Ok(MetricReport {
        protocol: match protocol {
            Protocol::CorrectOnly => "correct-only".to_string(),
            Protocol::MaskedMean => "masked-mean".to_string(),
        },
        n_questions: instances.len(),
        accuracy,
        bleu4: b,
        meteor: m,
        rouge_l: r,
        cider: c.corpus,
        mean: (b + m + r + c.corpus) / 4.0,
        cider_degenerate: c.degenerate,
        by_question_type,
        by_answer_type,
    })
}

// ---------------------------------------------------------------------------
// Prediction plumbing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub question_index: u64,
    pub answer: String,
    pub explanation: String,
}

/// Ground-truth record as written by the generator; `question_type` is
/// optional so hand-built files stay accepted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub question_index: u64,
    pub image_index: u64,
    pub answer: String,
    pub explanations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_type: Option<String>,
}

pub fn build_instances(
    predictions: &[PredictionRecord],
    ground_truth: &[GroundTruthRecord],
) -> Result<Vec<EvalInstance>, MetricsError> {
    let by_index: HashMap<u64, &GroundTruthRecord> = ground_truth
        .iter()
        .map(|r| (r.question_index, r))
        .collect();
    predictions
        .iter()
        .map(|p| {
            let gt = by_index
                .get(&p.question_index)
                .ok_or(MetricsError::MissingGroundTruth(p.question_index))?;
            let answer_type = Answer::from_token(&gt.answer).map(classify_answer);
            let question_type = gt
                .question_type
                .as_deref()
                .and_then(QuestionType::from_token);
            Ok(EvalInstance {
                candidate: tokenize(&p.explanation),
                references: gt.explanations.iter().map(|e| tokenize(e)).collect(),
                answer_correct: p.answer == gt.answer,
                question_type,
                answer_type,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Convergence experiment
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub bleu4: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    pub cider: f64,
}

/// Leave-one-out self-test: per trial, hold out one explanation per question
/// as the candidate and subsample k of the remaining ones as references;
/// average the four metrics over trials and normalize by the value at k_max.
pub fn convergence_curve(
    explanation_sets: &[Vec<String>],
    k_max: usize,
    trials: usize,
    seed: u64,
) -> Vec<CurvePoint> {
    use rayon::prelude::*;
    let tokenized: Vec<Vec<Vec<String>>> = explanation_sets
        .iter()
        .map(|set| set.iter().map(|t| tokenize(t)).collect())
        .collect();
    let per_trial: Vec<Vec<[f64; 4]>> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial);
            // Per question: held-out candidate + a shuffled reference pool;
            // k-subsets are nested prefixes of the pool.
            let setups: Vec<(Vec<String>, Vec<Vec<String>>)> = tokenized
                .iter()
                .filter(|set| set.len() >= 2)
                .map(|set| {
                    let held = rng.gen_range(0..set.len());
                    let mut pool: Vec<Vec<String>> = set
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != held)
                        .map(|(_, t)| t.clone())
                        .collect();
                    pool.shuffle(&mut rng);
                    (set[held].clone(), pool)
                })
                .collect();
            (1..=k_max)
                .map(|k| {
                    let instances: Vec<EvalInstance> = setups
                        .iter()
                        .map(|(cand, pool)| {
                            let refs = pool[..k.min(pool.len())].to_vec();
                            EvalInstance::new(cand.clone(), refs)
                        })
                        .collect();
                    [
                        bleu4(&instances),
                        meteor(&instances),
                        rouge_l(&instances),
                        cider(&instances).corpus,
                    ]
                })
                .collect()
        })
        .collect();
    let mut averaged = vec![[0.0f64; 4]; k_max];
    for trial in &per_trial {
        for (k, vals) in trial.iter().enumerate() {
            for m in 0..4 {
                averaged[k][m] += vals[m] / trials as f64;
            }
        }
    }
    let last = averaged[k_max - 1];
    (1..=k_max)
        .map(|k| {
            let norm = |m: usize| {
                if last[m] == 0.0 {
                    0.0
                } else {
                    averaged[k - 1][m] / last[m]
                }
            };
            CurvePoint {
                k,
                bleu4: norm(0),
                meteor: norm(1),
                rouge_l: norm(2),
                cider: norm(3),
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Random baselines
// ---------------------------------------------------------------------------

/// Random answer + random word sequence of the corpus-average length.
pub fn baseline_random_words(
    question_indices: &[u64],
    vocabulary: &[String],
    words_per_prediction: usize,
    seed: u64,
) -> Vec<PredictionRecord> {
    let surfaces = Answer::all_surface_forms();
    question_indices
        .iter()
        .map(|&qi| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(qi);
            let answer = surfaces.choose(&mut rng).unwrap().token();
            let words: Vec<&str> = (0..words_per_prediction)
                .map(|_| vocabulary.choose(&mut rng).unwrap().as_str())
                .collect();
            PredictionRecord {
                question_index: qi,
                answer,
                explanation: words.join(" "),
            }
        })
        .collect()
}

/// Random answer–explanation pair drawn from a training pool.
pub fn baseline_random_explanations(
    question_indices: &[u64],
    pool: &[(String, String)],
    seed: u64,
) -> Vec<PredictionRecord> {
    question_indices
        .iter()
        .map(|&qi| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(qi.wrapping_add(1 << 32));
            let (answer, explanation) = pool.choose(&mut rng).unwrap().clone();
            PredictionRecord {
                question_index: qi,
                answer,
                explanation,
            }
        })
        .collect()
}
