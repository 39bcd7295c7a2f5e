//! Structural analysis of validated programs.
//!
//! A validated program decomposes into nested reference chains: a chain is a
//! run of filters over a base, where the base is the whole scene, a spatial or
//! same-property hop anchored at another chain's unique referent, or a set
//! combination of two chains. The interpreter uses this decomposition to tag
//! evidence roles; the explanation planner uses it to decide which step
//! outputs to verbalize (a filter that merely restricts its predecessor
//! subsumes it, so only the final set of each run is mentioned).

use crate::ingest::{validate_program, ProgramError};
use crate::model::*;

#[derive(Debug, Clone)]
pub struct Chain {
    /// Node whose output is this chain's final set (or pre-`unique` singleton).
    pub result_node: usize,
    /// Filter values applied after the base, in program order.
    pub filters: Vec<AttributeValue>,
    pub base: ChainBase,
}

#[derive(Debug, Clone)]
pub enum ChainBase {
    Scene,
    Relate {
        direction: Direction,
        anchor: Box<Chain>,
    },
    Same {
        kind: AttributeKind,
        anchor: Box<Chain>,
    },
    Union {
        left: Box<Chain>,
        right: Box<Chain>,
    },
    Intersect {
        left: Box<Chain>,
        right: Box<Chain>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountCmp {
    Equal,
    Less,
    Greater,
}

#[derive(Debug, Clone)]
pub enum Terminal {
    Count(Chain),
    Exist(Chain),
    Query {
        kind: AttributeKind,
        subject: Chain,
    },
    EqualAttr {
        kind: AttributeKind,
        left: Chain,
        right: Chain,
    },
    CompareCount {
        op: CountCmp,
        left: Chain,
        right: Chain,
    },
}

/// Shape of the question program as seen from the root.
#[derive(Debug, Clone)]
pub struct ProgramShape {
    pub terminal: Terminal,
}

fn analyze_set(program: &[FunctionNode], idx: usize) -> Chain {
    let node = &program[idx];
    match node.function {
        Function::Filter(_) => {
            let mut inner = analyze_set(program, node.inputs[0]);
            let ValueInput::Attr(v) = node.value_inputs[0] else {
                unreachable!("validated filter carries an attribute");
            };
            inner.filters.push(v);
            inner.result_node = idx;
            inner
        }
        Function::Scene => Chain {
            result_node: idx,
            filters: Vec::new(),
            base: ChainBase::Scene,
        },
        Function::Relate => {
            let ValueInput::Dir(direction) = node.value_inputs[0] else {
                unreachable!("validated relate carries a direction");
            };
            Chain {
                result_node: idx,
                filters: Vec::new(),
                base: ChainBase::Relate {
                    direction,
                    anchor: Box::new(analyze_object(program, node.inputs[0])),
                },
            }
        }
        Function::Same(kind) => Chain {
            result_node: idx,
            filters: Vec::new(),
            base: ChainBase::Same {
                kind,
                anchor: Box::new(analyze_object(program, node.inputs[0])),
            },
        },
        Function::Union => Chain {
            result_node: idx,
            filters: Vec::new(),
            base: ChainBase::Union {
                left: Box::new(analyze_set(program, node.inputs[0])),
                right: Box::new(analyze_set(program, node.inputs[1])),
            },
        },
        Function::Intersect => Chain {
            result_node: idx,
            filters: Vec::new(),
            base: ChainBase::Intersect {
                left: Box::new(analyze_set(program, node.inputs[0])),
                right: Box::new(analyze_set(program, node.inputs[1])),
            },
        },
        _ => unreachable!("validated set node"),
    }
}

fn analyze_object(program: &[FunctionNode], idx: usize) -> Chain {
    // The only producer of a single object is `unique`; its chain is the
    // chain of the underlying set.
    debug_assert_eq!(program[idx].function, Function::Unique);
    analyze_set(program, program[idx].inputs[0])
}

/// Decompose a validated program. Callers must have run `validate_program`;
/// invalid programs are rejected here as well.
pub fn analyze(program: &[FunctionNode]) -> Result<ProgramShape, ProgramError> {
    validate_program(program)?;
    let root = program.len() - 1;
    let node = &program[root];
    let terminal = match node.function {
        Function::Count => Terminal::Count(analyze_set(program, node.inputs[0])),
        Function::Exist => Terminal::Exist(analyze_set(program, node.inputs[0])),
        Function::Query(kind) => Terminal::Query {
            kind,
            subject: analyze_object(program, node.inputs[0]),
        },
        Function::EqualAttr(kind) => {
            // Inputs are query nodes over unique referents.
            let left = analyze_object(program, program[node.inputs[0]].inputs[0]);
            let right = analyze_object(program, program[node.inputs[1]].inputs[0]);
            Terminal::EqualAttr { kind, left, right }
        }
        Function::EqualInteger | Function::LessThan | Function::GreaterThan => {
            let op = match node.function {
                Function::EqualInteger => CountCmp::Equal,
                Function::LessThan => CountCmp::Less,
                _ => CountCmp::Greater,
            };
            // Inputs are count nodes.
            let left = analyze_set(program, program[node.inputs[0]].inputs[0]);
            let right = analyze_set(program, program[node.inputs[1]].inputs[0]);
            Terminal::CompareCount { op, left, right }
        }
        _ => {
            return Err(ProgramError::TypeMismatch {
                node: root,
                message: "root must yield an answer".into(),
            })
        }
    };
    Ok(ProgramShape { terminal })
}

impl Chain {
    /// All anchor chains referenced by this chain, outermost hop first.
    pub fn anchors(&self) -> Vec<&Chain> {
        let mut out = Vec::new();
        match &self.base {
            ChainBase::Scene => {}
            ChainBase::Relate { anchor, .. } | ChainBase::Same { anchor, .. } => {
                out.push(anchor.as_ref());
                out.extend(anchor.anchors());
            }
            ChainBase::Union { left, right } | ChainBase::Intersect { left, right } => {
                out.extend(left.anchors());
                out.extend(right.anchors());
            }
        }
        out
    }
}
