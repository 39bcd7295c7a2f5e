//! Parsing and validation of scene and question files, plus dataset splits.
//!
//! Both file formats follow the public CLEVR v1.0 layout bit-for-bit on field
//! names. The question parser accepts both historical spellings of the
//! function-name field (`function` and `type`) and of the literal-argument
//! field (`value_inputs` and `side_inputs`).

use crate::model::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed file: {0}")]
    MalformedFile(String),
    #[error("scene {index}: {source}")]
    Scene { index: usize, source: SceneError },
    #[error("empty input")]
    EmptyInput,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProgramError {
    #[error("program has nodes unreachable from the root")]
    DisconnectedProgram,
    #[error("node {node} ({function}): expected {expected} inputs, got {got}")]
    ArityMismatch {
        node: usize,
        function: String,
        expected: usize,
        got: usize,
    },
    #[error("node {node}: {message}")]
    TypeMismatch { node: usize, message: String },
    #[error("node {node} references a non-preceding node")]
    CyclicProgram { node: usize },
}

/// Reason a question entry was rejected during parsing.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RejectReason {
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("unknown value token `{0}`")]
    UnknownToken(String),
    #[error("family index {0} outside [0, 90)")]
    UnknownFamily(u32),
    #[error(transparent)]
    Program(ProgramError),
}

#[derive(Debug, Clone, Serialize)]
pub struct SkippedQuestion {
    pub question_index: u64,
    pub reason: String,
}

// ---------------------------------------------------------------------------
// Raw serde layer (CLEVR v1.0 field names)
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct RawScenesFile {
    scenes: Vec<RawScene>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawScene {
    image_index: u64,
    objects: Vec<RawObject>,
    relationships: RawRelationships,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawObject {
    size: String,
    color: String,
    material: String,
    shape: String,
    #[serde(rename = "3d_coords", default, skip_serializing_if = "Option::is_none")]
    coords: Option<[f64; 3]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRelationships {
    left: Vec<Vec<usize>>,
    right: Vec<Vec<usize>>,
    front: Vec<Vec<usize>>,
    behind: Vec<Vec<usize>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawQuestionsFile {
    questions: Vec<RawQuestion>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawQuestion {
    question_index: u64,
    image_index: u64,
    question: String,
    program: Vec<RawNode>,
    question_family_index: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    answer: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawNode {
    #[serde(alias = "type")]
    function: String,
    inputs: Vec<usize>,
    #[serde(alias = "side_inputs", default)]
    value_inputs: Vec<String>,
}

// ---------------------------------------------------------------------------
// Scenes
// ---------------------------------------------------------------------------

fn attr_from_raw(token: &str, field: &'static str) -> Result<AttributeValue, SceneError> {
    AttributeValue::from_token(token).ok_or_else(|| SceneError::UnknownAttribute {
        token: token.to_string(),
        field,
    })
}

fn scene_from_raw(raw: &RawScene) -> Result<SceneGraph, SceneError> {
    let mut objects = Vec::with_capacity(raw.objects.len());
    for (id, o) in raw.objects.iter().enumerate() {
        let size = match attr_from_raw(&o.size, "size")? {
            AttributeValue::Size(s) => s,
            _ => {
                return Err(SceneError::UnknownAttribute {
                    token: o.size.clone(),
                    field: "size",
                })
            }
        };
        let color = match attr_from_raw(&o.color, "color")? {
            AttributeValue::Color(c) => c,
            _ => {
                return Err(SceneError::UnknownAttribute {
                    token: o.color.clone(),
                    field: "color",
                })
            }
        };
        let material = match attr_from_raw(&o.material, "material")? {
            AttributeValue::Material(m) => m,
            _ => {
                return Err(SceneError::UnknownAttribute {
                    token: o.material.clone(),
                    field: "material",
                })
            }
        };
        let shape = match attr_from_raw(&o.shape, "shape")? {
            AttributeValue::Shape(s) => s,
            _ => {
                return Err(SceneError::UnknownAttribute {
                    token: o.shape.clone(),
                    field: "shape",
                })
            }
        };
        objects.push(SceneObject {
            id,
            size,
            color,
            material,
            shape,
            position: o.coords,
        });
    }
    let scene = SceneGraph {
        image_index: raw.image_index,
        objects,
        relations: Relations {
            left: raw.relationships.left.clone(),
            right: raw.relationships.right.clone(),
            front: raw.relationships.front.clone(),
            behind: raw.relationships.behind.clone(),
        },
    };
    scene.validate()?;
    Ok(scene)
}

/// Parse a CLEVR-layout scene file. Every scene must validate; order is
/// preserved.
pub fn parse_scenes(bytes: &[u8]) -> Result<Vec<SceneGraph>, IngestError> {
    let raw: RawScenesFile =
        serde_json::from_slice(bytes).map_err(|e| IngestError::MalformedFile(e.to_string()))?;
    raw.scenes
        .iter()
        .enumerate()
        .map(|(index, s)| scene_from_raw(s).map_err(|source| IngestError::Scene { index, source }))
        .collect()
}

/// Serialize scenes back to the CLEVR layout.
pub fn scenes_to_json(scenes: &[SceneGraph]) -> String {
    let raw = RawScenesFile {
        scenes: scenes
            .iter()
            .map(|s| RawScene {
                image_index: s.image_index,
                objects: s
                    .objects
                    .iter()
                    .map(|o| RawObject {
                        size: o.attribute(AttributeKind::Size).token().into(),
                        color: o.attribute(AttributeKind::Color).token().into(),
                        material: o.attribute(AttributeKind::Material).token().into(),
                        shape: o.attribute(AttributeKind::Shape).token().into(),
                        coords: o.position,
                    })
                    .collect(),
                relationships: RawRelationships {
                    left: s.relations.left.clone(),
                    right: s.relations.right.clone(),
                    front: s.relations.front.clone(),
                    behind: s.relations.behind.clone(),
                },
            })
            .collect(),
    };
    serde_json::to_string(&raw).expect("scene serialization cannot fail")
}

// ---------------------------------------------------------------------------
// Programs
// ---------------------------------------------------------------------------

/// Static value type of a program node output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueType {
    Set,
    Object,
    Int,
    Bool,
    Attr(AttributeKind),
}

/// Type-check a program and return the output type of every node.
///
/// A program is valid iff nodes only reference preceding nodes (the list is a
/// topological order), arities and value inputs are legal, node output types
/// match consumer input types, every node is reachable from the final (root)
/// node, and the root yields an answer-typed value.
pub fn program_types(program: &[FunctionNode]) -> Result<Vec<ValueType>, ProgramError> {
    if program.is_empty() {
        return Err(ProgramError::DisconnectedProgram);
    }
    let mut types: Vec<ValueType> = Vec::with_capacity(program.len());
    for (i, node) in program.iter().enumerate() {
        let f = node.function;
        if node.inputs.len() != f.arity() {
            return Err(ProgramError::ArityMismatch {
                node: i,
                function: f.name(),
                expected: f.arity(),
                got: node.inputs.len(),
            });
        }
        if node.value_inputs.len() != f.value_input_count() {
            return Err(ProgramError::ArityMismatch {
                node: i,
                function: f.name(),
                expected: f.value_input_count(),
                got: node.value_inputs.len(),
            });
        }
        for &inp in &node.inputs {
            if inp >= i {
                return Err(ProgramError::CyclicProgram { node: i });
            }
        }
        let in_ty = |slot: usize| types[node.inputs[slot]];
        let expect = |slot: usize, want: ValueType, what: &str| -> Result<(), ProgramError> {
            if in_ty(slot) != want {
                return Err(ProgramError::TypeMismatch {
                    node: i,
                    message: format!("{} requires {what}", f.name()),
                });
            }
            Ok(())
        };
        let out = match f {
            Function::Scene => ValueType::Set,
            Function::Filter(kind) => {
                expect(0, ValueType::Set, "an object set")?;
                match node.value_inputs[0] {
                    ValueInput::Attr(a) if a.kind() == kind => {}
                    _ => {
                        return Err(ProgramError::TypeMismatch {
                            node: i,
                            message: format!("{} requires a {} value", f.name(), kind.token()),
                        })
                    }
                }
                ValueType::Set
            }
            Function::Relate => {
                expect(0, ValueType::Object, "a single object")?;
                match node.value_inputs[0] {
                    ValueInput::Dir(_) => {}
                    _ => {
                        return Err(ProgramError::TypeMismatch {
                            node: i,
                            message: "relate requires a direction".into(),
                        })
                    }
                }
                ValueType::Set
            }
            Function::Same(_) => {
                expect(0, ValueType::Object, "a single object")?;
                ValueType::Set
            }
            Function::Unique => {
                expect(0, ValueType::Set, "an object set")?;
                ValueType::Object
            }
            Function::Union | Function::Intersect => {
                expect(0, ValueType::Set, "an object set")?;
                expect(1, ValueType::Set, "an object set")?;
                ValueType::Set
            }
            Function::Count => {
                expect(0, ValueType::Set, "an object set")?;
                ValueType::Int
            }
            Function::Exist => {
                expect(0, ValueType::Set, "an object set")?;
                ValueType::Bool
            }
            Function::Query(kind) => {
                expect(0, ValueType::Object, "a single object")?;
                ValueType::Attr(kind)
            }
            Function::EqualAttr(kind) => {
                expect(0, ValueType::Attr(kind), "a matching attribute")?;
                expect(1, ValueType::Attr(kind), "a matching attribute")?;
                ValueType::Bool
            }
            Function::EqualInteger | Function::LessThan | Function::GreaterThan => {
                expect(0, ValueType::Int, "an integer")?;
                expect(1, ValueType::Int, "an integer")?;
                ValueType::Bool
            }
        };
        types.push(out);
    }
    // Reachability from the root.
    let root = program.len() - 1;
    let mut reachable = vec![false; program.len()];
    let mut stack = vec![root];
    while let Some(i) = stack.pop() {
        if reachable[i] {
            continue;
        }
        reachable[i] = true;
        stack.extend(program[i].inputs.iter().copied());
    }
    if reachable.iter().any(|&r| !r) {
        return Err(ProgramError::DisconnectedProgram);
    }
    match types[root] {
        ValueType::Int | ValueType::Bool | ValueType::Attr(_) => {}
        _ => {
            return Err(ProgramError::TypeMismatch {
                node: root,
                message: "root must yield an answer (count, boolean, or attribute)".into(),
            })
        }
    }
    Ok(types)
}

pub fn validate_program(program: &[FunctionNode]) -> Result<(), ProgramError> {
    program_types(program).map(|_| ())
}

// ---------------------------------------------------------------------------
// Questions
// ---------------------------------------------------------------------------

fn node_from_raw(raw: &RawNode) -> Result<FunctionNode, RejectReason> {
    let function = Function::from_name(&raw.function)
        .ok_or_else(|| RejectReason::UnknownFunction(raw.function.clone()))?;
    let mut value_inputs = Vec::with_capacity(raw.value_inputs.len());
    for t in &raw.value_inputs {
        let v = if let Some(d) = Direction::from_token(t) {
            ValueInput::Dir(d)
        } else if let Some(a) = AttributeValue::from_token(t) {
            ValueInput::Attr(a)
        } else {
            return Err(RejectReason::UnknownToken(t.clone()));
        };
        value_inputs.push(v);
    }
    Ok(FunctionNode {
        function,
        inputs: raw.inputs.clone(),
        value_inputs,
    })
}

fn question_from_raw(raw: &RawQuestion) -> Result<Question, RejectReason> {
    let program = raw
        .program
        .iter()
        .map(node_from_raw)
        .collect::<Result<Vec<_>, _>>()?;
    validate_program(&program).map_err(RejectReason::Program)?;
    let question_type = QuestionType::from_family_index(raw.question_family_index)
        .ok_or(RejectReason::UnknownFamily(raw.question_family_index))?;
    Ok(Question {
        question_index: raw.question_index,
        image_index: raw.image_index,
        text: raw.question.clone(),
        program,
        family_index: raw.question_family_index,
        question_type,
        answer: raw.answer.as_deref().and_then(Answer::from_token),
    })
}

#[derive(Debug, Default)]
pub struct ParsedQuestions {
    pub questions: Vec<Question>,
    pub skipped: Vec<SkippedQuestion>,
}

/// Parse a CLEVR-layout question file. Entries with malformed programs are
/// skipped and logged with a reason code; structural file errors fail the
/// whole parse.
pub fn parse_questions(bytes: &[u8]) -> Result<ParsedQuestions, IngestError> {
    let raw: RawQuestionsFile =
        serde_json::from_slice(bytes).map_err(|e| IngestError::MalformedFile(e.to_string()))?;
    let mut out = ParsedQuestions::default();
    for rq in &raw.questions {
        match question_from_raw(rq) {
            Ok(q) => out.questions.push(q),
            Err(reason) => out.skipped.push(SkippedQuestion {
                question_index: rq.question_index,
                reason: reason.to_string(),
            }),
        }
    }
    Ok(out)
}

/// Serialize questions back to the CLEVR layout.
pub fn questions_to_json(questions: &[Question]) -> String {
    let raw = RawQuestionsFile {
        questions: questions
            .iter()
            .map(|q| RawQuestion {
                question_index: q.question_index,
                image_index: q.image_index,
                question: q.text.clone(),
                program: q
                    .program
                    .iter()
                    .map(|n| RawNode {
                        function: n.function.name(),
                        inputs: n.inputs.clone(),
                        value_inputs: n.value_inputs.iter().map(|v| v.token().into()).collect(),
                    })
                    .collect(),
                question_family_index: q.family_index,
                answer: q.answer.map(|a| a.token()),
            })
            .collect(),
    };
    serde_json::to_string(&raw).expect("question serialization cannot fail")
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub name: String,
    pub image_indices: BTreeSet<u64>,
}

/// Deterministically split an image set 80/20 at the image level.
/// Validation size is floor(0.2 * N); the remainder goes to train.
pub fn make_split(
    images: &BTreeSet<u64>,
    seed: u64,
) -> Result<(DatasetSplit, DatasetSplit), IngestError> {
    if images.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let mut sorted: Vec<u64> = images.iter().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sorted.shuffle(&mut rng);
    let val_size = images.len() / 5;
    let val: BTreeSet<u64> = sorted[..val_size].iter().copied().collect();
    let train: BTreeSet<u64> = sorted[val_size..].iter().copied().collect();
    Ok((
        DatasetSplit {
            name: "train".into(),
            image_indices: train,
        },
        DatasetSplit {
            name: "val".into(),
            image_indices: val,
        },
    ))
}

/// Fraction of questions per question type, restricted to the images of a
/// split. Used to check that splits carry no question-type bias.
pub fn split_type_proportions(
    questions: &[Question],
    images: &BTreeSet<u64>,
) -> BTreeMap<QuestionType, f64> {
    let mut counts: BTreeMap<QuestionType, usize> = BTreeMap::new();
    let mut total = 0usize;
    for q in questions {
        if images.contains(&q.image_index) {
            *counts.entry(q.question_type).or_default() += 1;
            total += 1;
        }
    }
    counts
        .into_iter()
        .map(|(t, c)| (t, c as f64 / total.max(1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(funcs: Vec<FunctionNode>) -> Vec<FunctionNode> {
        funcs
    }

    fn node(function: Function, inputs: Vec<usize>, value_inputs: Vec<ValueInput>) -> FunctionNode {
        FunctionNode {
            function,
            inputs,
            value_inputs,
        }
    }

    #[test]
    fn simple_count_chain_validates() {
        let program = chain(vec![
            node(Function::Scene, vec![], vec![]),
            node(
                Function::Filter(AttributeKind::Color),
                vec![0],
                vec![ValueInput::Attr(AttributeValue::Color(Color::Red))],
            ),
            node(Function::Count, vec![1], vec![]),
        ]);
        assert!(validate_program(&program).is_ok());
    }

    #[test]
    fn unreachable_node_is_disconnected() {
        let program = vec![
            node(Function::Scene, vec![], vec![]),
            node(Function::Scene, vec![], vec![]),
            node(Function::Count, vec![1], vec![]),
        ];
        assert_eq!(
            validate_program(&program),
            Err(ProgramError::DisconnectedProgram)
        );
    }

    #[test]
    fn relate_on_set_is_type_mismatch() {
        let program = vec![
            node(Function::Scene, vec![], vec![]),
            node(
                Function::Relate,
                vec![0],
                vec![ValueInput::Dir(Direction::Left)],
            ),
            node(Function::Count, vec![1], vec![]),
        ];
        assert!(matches!(
            validate_program(&program),
            Err(ProgramError::TypeMismatch { node: 1, .. })
        ));
    }

    #[test]
    fn count_into_query_is_type_mismatch() {
        let program = vec![
            node(Function::Scene, vec![], vec![]),
            node(Function::Count, vec![0], vec![]),
            node(Function::Query(AttributeKind::Color), vec![1], vec![]),
        ];
        assert!(matches!(
            validate_program(&program),
            Err(ProgramError::TypeMismatch { node: 2, .. })
        ));
    }

    #[test]
    fn forward_reference_is_cyclic() {
        let program = vec![
            node(Function::Count, vec![1], vec![]),
            node(Function::Scene, vec![], vec![]),
        ];
        assert!(matches!(
            validate_program(&program),
            Err(ProgramError::CyclicProgram { .. })
        ));
    }

    #[test]
    fn empty_scene_list_parses_empty() {
        let scenes = parse_scenes(br#"{"scenes": []}"#).unwrap();
        assert!(scenes.is_empty());
    }

    #[test]
    fn truncated_file_is_malformed() {
        assert!(matches!(
            parse_scenes(br#"{"scenes": [{"image_ind"#),
            Err(IngestError::MalformedFile(_))
        ));
    }

    #[test]
    fn unknown_color_is_rejected() {
        let json = br#"{"scenes": [{"image_index": 0, "objects": [
            {"size": "small", "color": "pink", "material": "rubber", "shape": "cube"},
            {"size": "small", "color": "red", "material": "rubber", "shape": "cube"},
            {"size": "large", "color": "red", "material": "metal", "shape": "sphere"}],
            "relationships": {"left": [[],[],[]], "right": [[],[],[]], "front": [[],[],[]], "behind": [[],[],[]]}}]}"#;
        match parse_scenes(json) {
            Err(IngestError::Scene {
                index: 0,
                source: SceneError::UnknownAttribute { token, .. },
            }) => assert_eq!(token, "pink"),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn entry_missing_program_is_malformed() {
        let json = br#"{"questions": [{"question_index": 0, "image_index": 0,
            "question": "How many red cubes are there?", "question_family_index": 0}]}"#;
        assert!(matches!(
            parse_questions(json),
            Err(IngestError::MalformedFile(_))
        ));
    }

    #[test]
    fn historical_key_spellings_accepted() {
        let json = br#"{"questions": [{"question_index": 7, "image_index": 3,
            "question": "How many red things are there?",
            "question_family_index": 0,
            "program": [
                {"type": "scene", "inputs": [], "side_inputs": []},
                {"type": "filter_color", "inputs": [0], "side_inputs": ["red"]},
                {"type": "count", "inputs": [1], "side_inputs": []}
            ]}]}"#;
        let parsed = parse_questions(json).unwrap();
        assert_eq!(parsed.questions.len(), 1);
        assert!(parsed.skipped.is_empty());
        assert_eq!(parsed.questions[0].question_type, QuestionType::ZeroHop);
    }

    #[test]
    fn disconnected_entry_is_skipped_not_fatal() {
        let json = br#"{"questions": [{"question_index": 9, "image_index": 3,
            "question": "broken",
            "question_family_index": 0,
            "program": [
                {"function": "scene", "inputs": [], "value_inputs": []},
                {"function": "scene", "inputs": [], "value_inputs": []},
                {"function": "count", "inputs": [1], "value_inputs": []}
            ]}]}"#;
        let parsed = parse_questions(json).unwrap();
        assert!(parsed.questions.is_empty());
        assert_eq!(parsed.skipped.len(), 1);
        assert!(parsed.skipped[0].reason.contains("unreachable"));
    }

    #[test]
    fn split_is_deterministic_and_floor_rounded() {
        let images: BTreeSet<u64> = (0..5).collect();
        let (train, val) = make_split(&images, 42).unwrap();
        assert_eq!(train.image_indices.len(), 4);
        assert_eq!(val.image_indices.len(), 1);
        assert!(train.image_indices.is_disjoint(&val.image_indices));
        let (train2, val2) = make_split(&images, 42).unwrap();
        assert_eq!(train, train2);
        assert_eq!(val, val2);
    }

    #[test]
    fn split_of_empty_set_errors() {
        assert!(matches!(
            make_split(&BTreeSet::new(), 1),
            Err(IngestError::EmptyInput)
        ));
    }

    #[test]
    fn large_split_matches_80_20() {
        let images: BTreeSet<u64> = (0..70_000).collect();
        let (train, val) = make_split(&images, 0).unwrap();
        assert_eq!(train.image_indices.len(), 56_000);
        assert_eq!(val.image_indices.len(), 14_000);
    }
}
