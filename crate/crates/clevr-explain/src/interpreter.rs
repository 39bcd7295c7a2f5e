//! Execution of functional programs against scene graphs, with tracing.
//!
//! `evaluate` is pure: identical inputs give identical answers and traces, so
//! questions can be evaluated in parallel over shared read-only scenes.

use crate::analysis::{self, Chain, ChainBase, ProgramShape, Terminal};
use crate::ingest::ProgramError;
use crate::model::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    /// Sorted, deduplicated object ids.
    ObjectSet(Vec<usize>),
    SingleObject(usize),
    Integer(u8),
    Boolean(bool),
    Attribute(AttributeValue),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("node {node}: unique applied to a set of size {size}")]
    NonUniqueReferent { node: usize, size: usize },
    #[error("node {node}: type mismatch: {message}")]
    TypeMismatch { node: usize, message: String },
    #[error(transparent)]
    Program(#[from] ProgramError),
}

fn as_set<'a>(v: &'a Value, node: usize) -> Result<&'a [usize], EvalError> {
    match v {
        Value::ObjectSet(ids) => Ok(ids),
        _ => Err(EvalError::TypeMismatch {
            node,
            message: "expected object set".into(),
        }),
    }
}

fn as_object(v: &Value, node: usize) -> Result<usize, EvalError> {
    match v {
        Value::SingleObject(id) => Ok(*id),
        _ => Err(EvalError::TypeMismatch {
            node,
            message: "expected single object".into(),
        }),
    }
}

fn as_int(v: &Value, node: usize) -> Result<u8, EvalError> {
    match v {
        Value::Integer(n) => Ok(*n),
        _ => Err(EvalError::TypeMismatch {
            node,
            message: "expected integer".into(),
        }),
    }
}

fn as_attr(v: &Value, node: usize) -> Result<AttributeValue, EvalError> {
    match v {
        Value::Attribute(a) => Ok(*a),
        _ => Err(EvalError::TypeMismatch {
            node,
            message: "expected attribute".into(),
        }),
    }
}

/// Execute a single catalog function. `node_index` is used for error
/// reporting only.
pub fn step(
    node_index: usize,
    node: &FunctionNode,
    inputs: &[&Value],
    scene: &SceneGraph,
) -> Result<Value, EvalError> {
    let i = node_index;
    Ok(match node.function {
        Function::Scene => Value::ObjectSet((0..scene.objects.len()).collect()),
        Function::Filter(_) => {
            let ValueInput::Attr(v) = node.value_inputs[0] else {
                return Err(EvalError::TypeMismatch {
                    node: i,
                    message: "filter requires an attribute literal".into(),
                });
            };
            let ids = as_set(inputs[0], i)?;
            Value::ObjectSet(
                ids.iter()
                    .copied()
                    .filter(|&id| scene.objects[id].has(v))
                    .collect(),
            )
        }
        Function::Relate => {
            let ValueInput::Dir(d) = node.value_inputs[0] else {
                return Err(EvalError::TypeMismatch {
                    node: i,
                    message: "relate requires a direction literal".into(),
                });
            };
            let id = as_object(inputs[0], i)?;
            let mut ids = scene.relations.get(d)[id].clone();
            ids.sort_unstable();
            ids.dedup();
            Value::ObjectSet(ids)
        }
        Function::Same(kind) => {
            let id = as_object(inputs[0], i)?;
            let target = scene.objects[id].attribute(kind);
            Value::ObjectSet(
                scene
                    .objects
                    .iter()
                    .filter(|o| o.id != id && o.attribute(kind) == target)
                    .map(|o| o.id)
                    .collect(),
            )
        }
        Function::Unique => {
            let ids = as_set(inputs[0], i)?;
            if ids.len() != 1 {
                return Err(EvalError::NonUniqueReferent {
                    node: i,
                    size: ids.len(),
                });
            }
            Value::SingleObject(ids[0])
        }
        Function::Union => {
            let a = as_set(inputs[0], i)?;
            let b = as_set(inputs[1], i)?;
            let mut ids: Vec<usize> = a.iter().chain(b.iter()).copied().collect();
            ids.sort_unstable();
            ids.dedup();
            Value::ObjectSet(ids)
        }
        Function::Intersect => {
            let a = as_set(inputs[0], i)?;
            let b = as_set(inputs[1], i)?;
            Value::ObjectSet(a.iter().copied().filter(|id| b.contains(id)).collect())
        }
        Function::Count => Value::Integer(as_set(inputs[0], i)?.len() as u8),
        Function::Exist => Value::Boolean(!as_set(inputs[0], i)?.is_empty()),
        Function::Query(kind) => {
            let id = as_object(inputs[0], i)?;
            Value::Attribute(scene.objects[id].attribute(kind))
        }
        Function::EqualAttr(_) => {
            Value::Boolean(as_attr(inputs[0], i)? == as_attr(inputs[1], i)?)
        }
        Function::EqualInteger => Value::Boolean(as_int(inputs[0], i)? == as_int(inputs[1], i)?),
        Function::LessThan => Value::Boolean(as_int(inputs[0], i)? < as_int(inputs[1], i)?),
        Function::GreaterThan => Value::Boolean(as_int(inputs[0], i)? > as_int(inputs[1], i)?),
    })
}

/// Question-named attributes an evidence object surfaces with: the chain's
/// filter values (for set combinations, the branch filters the object's branch
/// contributed), ordered size/color/material/shape, with the shape noun always
/// present.
pub fn mention_attrs(
    chain: &Chain,
    object_id: usize,
    values: &[Value],
    scene: &SceneGraph,
) -> Vec<AttributeValue> {
    fn collect(chain: &Chain, object_id: usize, values: &[Value], out: &mut Vec<AttributeValue>) {
        out.extend(chain.filters.iter().copied());
        match &chain.base {
            ChainBase::Scene | ChainBase::Relate { .. } | ChainBase::Same { .. } => {}
            ChainBase::Union { left, right } | ChainBase::Intersect { left, right } => {
                for branch in [left, right] {
                    let member = matches!(&values[branch.result_node], Value::ObjectSet(ids) if ids.contains(&object_id));
                    if member {
                        collect(branch, object_id, values, out);
                    }
                }
            }
        }
    }
    let mut attrs = Vec::new();
    collect(chain, object_id, values, &mut attrs);
    let kind_rank = |a: &AttributeValue| match a.kind() {
        AttributeKind::Size => 0,
        AttributeKind::Color => 1,
        AttributeKind::Material => 2,
        AttributeKind::Shape => 3,
    };
    attrs.sort_by_key(kind_rank);
    attrs.dedup();
    if !attrs.iter().any(|a| a.kind() == AttributeKind::Shape) {
        attrs.push(scene.objects[object_id].attribute(AttributeKind::Shape));
    }
    attrs
}

fn chain_set<'a>(chain: &Chain, values: &'a [Value]) -> &'a [usize] {
    match &values[chain.result_node] {
        Value::ObjectSet(ids) => ids,
        _ => &[],
    }
}

fn push_subject_evidence(
    chain: &Chain,
    values: &[Value],
    scene: &SceneGraph,
    evidence: &mut Vec<EvidenceRecord>,
) {
    for &id in chain_set(chain, values) {
        evidence.push(EvidenceRecord {
            object_id: id,
            role: EvidenceRole::QuestionSubject,
            attributes: mention_attrs(chain, id, values, scene),
        });
    }
    push_anchor_evidence(chain, values, scene, evidence);
}

fn push_anchor_evidence(
    chain: &Chain,
    values: &[Value],
    scene: &SceneGraph,
    evidence: &mut Vec<EvidenceRecord>,
) {
    for anchor in chain.anchors() {
        let ids = chain_set(anchor, values);
        // Anchor chains feed `unique`, so the set is a singleton.
        for &id in ids {
            evidence.push(EvidenceRecord {
                object_id: id,
                role: EvidenceRole::QuestionBuilding,
                attributes: mention_attrs(anchor, id, values, scene),
            });
        }
    }
}

fn extract_evidence(
    shape: &ProgramShape,
    values: &[Value],
    scene: &SceneGraph,
) -> Vec<EvidenceRecord> {
    let mut evidence = Vec::new();
    match &shape.terminal {
        Terminal::Count(chain) | Terminal::Exist(chain) => {
            push_subject_evidence(chain, values, scene, &mut evidence)
        }
        Terminal::Query { subject, .. } => {
            push_subject_evidence(subject, values, scene, &mut evidence)
        }
        Terminal::EqualAttr { left, right, .. } | Terminal::CompareCount { left, right, .. } => {
            push_subject_evidence(left, values, scene, &mut evidence);
            push_subject_evidence(right, values, scene, &mut evidence);
        }
    }
    evidence
}

fn root_answer(value: &Value, node: usize) -> Result<Answer, EvalError> {
    match value {
        Value::Integer(n) => Ok(Answer::Count(*n)),
        Value::Boolean(b) => Ok(Answer::Binary(*b)),
        Value::Attribute(a) => Ok(Answer::Attr(*a)),
        _ => Err(EvalError::TypeMismatch {
            node,
            message: "root does not yield an answer".into(),
        }),
    }
}

/// Evaluate a validated program, returning the answer, the trace, and the
/// per-node values.
pub fn evaluate_full(
    program: &[FunctionNode],
    scene: &SceneGraph,
) -> Result<(Answer, Trace, Vec<Value>), EvalError> {
    let shape = analysis::analyze(program)?;
    let mut values: Vec<Value> = Vec::with_capacity(program.len());
    let mut trace = Trace::default();
    for (i, node) in program.iter().enumerate() {
        let inputs: Vec<&Value> = node.inputs.iter().map(|&j| &values[j]).collect();
        let value = step(i, node, &inputs, scene)?;
        if matches!(
            node.function,
            Function::Filter(_) | Function::Relate | Function::Same(_)
        ) {
            let output = match &value {
                Value::ObjectSet(ids) => StepOutput::Set(ids.clone()),
                _ => unreachable!("traced functions yield sets"),
            };
            trace.steps.push(TraceStep {
                node_index: i,
                function: node.function,
                output,
            });
        }
        values.push(value);
    }
    let answer = root_answer(values.last().expect("non-empty program"), program.len() - 1)?;
    trace.evidence = extract_evidence(&shape, &values, scene);
    Ok((answer, trace, values))
}

/// Evaluate a validated program against a validated scene.
pub fn evaluate(program: &[FunctionNode], scene: &SceneGraph) -> Result<(Answer, Trace), EvalError> {
    evaluate_full(program, scene).map(|(a, t, _)| (a, t))
}
