//! Corrupted explanations for the completeness and relevance study tasks.
//!
//! A completeness foil deletes evidence objects from the question's mention
//! plan and re-runs the realizer, so the foil is grammatical but omits (or
//! under-counts) at least one evidence group. A relevance foil is a real
//! explanation for another question of the same family whose mentioned
//! attribute tuples do not all hold in the target scene.

use crate::explainer::{
    generate, plan_question, question_rng, realize, Bindings, MentionPlan, NUM_TEMPLATES,
};
use crate::interpreter::EvalError;
use crate::model::*;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProbeError {
    #[error("question has no evidence objects to remove")]
    NoEvidence,
    #[error("no distinct incomplete foil found")]
    NoDistinctFoil,
    #[error("pool exhausted without a non-matching explanation")]
    NoDistractor,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Completeness,
    Relevance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub question_index: u64,
    pub probe_kind: ProbeKind,
    pub true_text: String,
    pub foil_text: String,
    /// Position of the foil when the pair is shown as (1, 2).
    pub foil_position: u8,
}

/// The attribute tuples (with multiplicities) a plan asserts.
pub fn asserted_groups(plan: &MentionPlan) -> Vec<(Vec<AttributeValue>, usize)> {
    plan.subjects
        .iter()
        .flat_map(|s| s.groups.iter())
        .map(|g| (g.attrs.clone(), g.object_ids.len()))
        .collect()
}

/// True when `foil` omits or under-counts at least one group of `original`.
pub fn omits_group(original: &MentionPlan, foil: &MentionPlan) -> bool {
    let foil_groups = asserted_groups(foil);
    asserted_groups(original)
        .iter()
        .any(|g| !foil_groups.contains(g))
}

fn remove_objects(plan: &MentionPlan, removals: &[usize]) -> MentionPlan {
    let mut out = plan.clone();
    for sub in out.subjects.iter_mut() {
        for g in sub.groups.iter_mut() {
            g.object_ids.retain(|id| !removals.contains(id));
        }
        sub.groups.retain(|g| !g.object_ids.is_empty());
    }
    out
}

/// Build a completeness probe: drop evidence, regenerate, and pair the foil
/// with a true explanation.
pub fn make_incomplete(
    question: &Question,
    scene: &SceneGraph,
    seed: u64,
) -> Result<ProbeRecord, ProbeError> {
    make_incomplete_detailed(question, scene, seed).map(|(record, _, _)| record)
}

/// As [`make_incomplete`], but also returns the original and foil mention
/// plans so callers can verify the omission independently.
pub fn make_incomplete_detailed(
    question: &Question,
    scene: &SceneGraph,
    seed: u64,
) -> Result<(ProbeRecord, MentionPlan, MentionPlan), ProbeError> {
    let (_, plan) = plan_question(&question.program, scene)?;
    let evidence: Vec<usize> = plan
        .subjects
        .iter()
        .flat_map(|s| s.groups.iter())
        .flat_map(|g| g.object_ids.iter().copied())
        .collect();
    if evidence.is_empty() {
        return Err(ProbeError::NoEvidence);
    }
    let truths = generate(question, scene, seed, 10)?;
    let true_texts: Vec<&str> = truths.iter().map(|e| e.text.as_str()).collect();
    let bindings = Bindings::from_question(&question.text);
    let n_groups: usize = plan.subjects.iter().map(|s| s.groups.len()).sum();
    let mut rng = question_rng(seed ^ 0xC0FF_EE00, question.question_index);
    for _ in 0..24 {
        // Remove exactly one object, or up to ⌈groups/3⌉ on busy plans.
        let k = if n_groups > 3 {
            rng.gen_range(1..=n_groups.div_ceil(3))
        } else {
            1
        };
        let mut pool = evidence.clone();
        pool.shuffle(&mut rng);
        let removals: Vec<usize> = pool.into_iter().take(k).collect();
        let foil_plan = remove_objects(&plan, &removals);
        let template_id = rng.gen_range(0..NUM_TEMPLATES);
        let foil_text = realize(&foil_plan, &bindings, template_id, &mut rng);
        if omits_group(&plan, &foil_plan) && !true_texts.contains(&foil_text.as_str()) {
            let true_text = truths[rng.gen_range(0..truths.len())].text.clone();
            let record = ProbeRecord {
                question_index: question.question_index,
                probe_kind: ProbeKind::Completeness,
                true_text,
                foil_text,
                foil_position: if rng.gen_bool(0.5) { 1 } else { 2 },
            };
            return Ok((record, plan, foil_plan));
        }
    }
    Err(ProbeError::NoDistinctFoil)
}

/// A candidate distractor: one explanation of a same-family question plus the
/// attribute tuples (with counts) its groups assert.
#[derive(Debug, Clone)]
pub struct PoolEntry {
    pub question_index: u64,
    pub image_index: u64,
    pub family_index: u32,
    pub text: String,
    pub groups: Vec<(Vec<AttributeValue>, usize)>,
}

/// Precompute pool entries for a question (one per generated explanation).
pub fn pool_entries(
    question: &Question,
    scene: &SceneGraph,
    seed: u64,
) -> Result<Vec<PoolEntry>, ProbeError> {
    let (_, plan) = plan_question(&question.program, scene)?;
    let groups = asserted_groups(&plan);
    Ok(generate(question, scene, seed, 10)?
        .into_iter()
        .map(|e| PoolEntry {
            question_index: question.question_index,
            image_index: question.image_index,
            family_index: question.family_index,
            text: e.text,
            groups: groups.clone(),
        })
        .collect())
}

/// True when every asserted attribute tuple is satisfied by the scene with at
/// least its asserted multiplicity. A foil must fail this check.
pub fn scene_satisfies(scene: &SceneGraph, groups: &[(Vec<AttributeValue>, usize)]) -> bool {
    groups.iter().all(|(attrs, count)| {
        let matching = scene
            .objects
            .iter()
            .filter(|o| attrs.iter().all(|&a| o.has(a)))
            .count();
        matching >= *count
    })
}

/// Build a relevance probe from a same-family pool.
pub fn make_irrelevant(
    question: &Question,
    scene: &SceneGraph,
    pool: &[PoolEntry],
    seed: u64,
) -> Result<ProbeRecord, ProbeError> {
    let truths = generate(question, scene, seed, 10)?;
    let true_texts: Vec<&str> = truths.iter().map(|e| e.text.as_str()).collect();
    let mut rng = question_rng(seed ^ 0xD15_7AC7, question.question_index);
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut rng);
    for i in order {
        let entry = &pool[i];
        if entry.image_index == question.image_index
            || entry.family_index != question.family_index
            || entry.groups.is_empty()
        {
            continue;
        }
        if scene_satisfies(scene, &entry.groups) {
            continue;
        }
        if true_texts.contains(&entry.text.as_str()) {
            continue;
        }
        let true_text = truths[rng.gen_range(0..truths.len())].text.clone();
        return Ok(ProbeRecord {
            question_index: question.question_index,
            probe_kind: ProbeKind::Relevance,
            true_text,
            foil_text: entry.text.clone(),
            foil_position: if rng.gen_bool(0.5) { 1 } else { 2 },
        });
    }
    Err(ProbeError::NoDistractor)
}
