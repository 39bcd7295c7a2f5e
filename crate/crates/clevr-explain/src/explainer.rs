//! Template-based natural language explanations.
//!
//! The pipeline is plan → realize: `plan_question` turns a (program, scene)
//! pair into a `MentionPlan` (evidence objects aggregated into numeral groups
//! plus the relation structure of the question), and `realize` renders one
//! plan under a template and a stream of random choices. `generate` samples
//! up to ten distinct texts per question, with all randomness derived from
//! (global seed, question index) so parallel generation order cannot change
//! the output.

use crate::analysis::{analyze, Chain, ChainBase, Terminal};
use crate::interpreter::{evaluate_full, mention_attrs, EvalError, Value};
use crate::model::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub const NUM_TEMPLATES: u8 = 3;
pub const MAX_EXPLANATIONS: usize = 10;

// ---------------------------------------------------------------------------
// Plans
// ---------------------------------------------------------------------------

/// Evidence objects sharing one surfaced attribute tuple, spoken as a single
/// numeral-quantified mention.
#[derive(Debug, Clone, PartialEq)]
pub struct MentionGroup {
    pub object_ids: Vec<usize>,
    /// Ordered size/color/material/shape; the shape is always present.
    pub attrs: Vec<AttributeValue>,
    pub role: EvidenceRole,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RelationKind {
    Spatial(Direction),
    SameProp(AttributeKind),
}

/// Noun phrase for a question-building referent (always a unique object).
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorPhrase {
    pub attrs: Vec<AttributeValue>,
    pub relation: Option<(RelationKind, Box<AnchorPhrase>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SubjectRelation {
    None,
    Single(RelationKind, AnchorPhrase),
    Both(Direction, AnchorPhrase, Direction, AnchorPhrase),
}

/// One existential clause of the explanation: the groups it mentions, the
/// attribute tuples to use when the evidence is empty (negation), and the
/// relation tying the groups to their anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectDesc {
    pub groups: Vec<MentionGroup>,
    /// Filter tuples per branch, for the "there is no …" phrasing.
    pub negation_specs: Vec<Vec<AttributeValue>>,
    pub relation: SubjectRelation,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TerminalKind {
    Count,
    Exist,
    Query {
        kind: AttributeKind,
        value: AttributeValue,
    },
    EqualAttr {
        left: AttributeValue,
        right: AttributeValue,
    },
    CompareCount,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MentionPlan {
    pub subjects: Vec<SubjectDesc>,
    pub terminal: TerminalKind,
}

fn sort_attrs(attrs: &mut Vec<AttributeValue>) {
    attrs.sort_by_key(|a| match a.kind() {
        AttributeKind::Size => 0,
        AttributeKind::Color => 1,
        AttributeKind::Material => 2,
        AttributeKind::Shape => 3,
    });
    attrs.dedup();
}

fn anchor_phrase(chain: &Chain, values: &[Value], scene: &SceneGraph) -> AnchorPhrase {
    let ids = match &values[chain.result_node] {
        Value::ObjectSet(ids) => ids.clone(),
        _ => Vec::new(),
    };
    // Anchor chains feed `unique`, so the set is a singleton.
    let attrs = match ids.first() {
        Some(&id) => mention_attrs(chain, id, values, scene),
        None => {
            let mut a = chain.filters.clone();
            sort_attrs(&mut a);
            a
        }
    };
    let relation = match &chain.base {
        ChainBase::Relate { direction, anchor } => Some((
            RelationKind::Spatial(*direction),
            Box::new(anchor_phrase(anchor, values, scene)),
        )),
        ChainBase::Same { kind, anchor } => Some((
            RelationKind::SameProp(*kind),
            Box::new(anchor_phrase(anchor, values, scene)),
        )),
        _ => None,
    };
    AnchorPhrase { attrs, relation }
}

fn subject_relation(chain: &Chain, values: &[Value], scene: &SceneGraph) -> SubjectRelation {
    match &chain.base {
        ChainBase::Scene | ChainBase::Union { .. } => SubjectRelation::None,
        ChainBase::Relate { direction, anchor } => SubjectRelation::Single(
            RelationKind::Spatial(*direction),
            anchor_phrase(anchor, values, scene),
        ),
        ChainBase::Same { kind, anchor } => SubjectRelation::Single(
            RelationKind::SameProp(*kind),
            anchor_phrase(anchor, values, scene),
        ),
        ChainBase::Intersect { left, right } => {
            // Conjunction of two spatial hops reads "both … and …"; anything
            // else falls back to plain mentions (branch filters still surface
            // through mention_attrs).
            match (&left.base, &right.base) {
                (
                    ChainBase::Relate {
                        direction: dl,
                        anchor: al,
                    },
                    ChainBase::Relate {
                        direction: dr,
                        anchor: ar,
                    },
                ) if left.filters.is_empty() && right.filters.is_empty() => SubjectRelation::Both(
                    *dl,
                    anchor_phrase(al, values, scene),
                    *dr,
                    anchor_phrase(ar, values, scene),
                ),
                _ => SubjectRelation::None,
            }
        }
    }
}

fn negation_specs(chain: &Chain) -> Vec<Vec<AttributeValue>> {
    match &chain.base {
        ChainBase::Union { left, right } if chain.filters.is_empty() => {
            let mut l = left.filters.clone();
            let mut r = right.filters.clone();
            sort_attrs(&mut l);
            sort_attrs(&mut r);
            vec![l, r]
        }
        _ => {
            let mut f = chain.filters.clone();
            sort_attrs(&mut f);
            vec![f]
        }
    }
}

fn subject_desc(
    chain: &Chain,
    values: &[Value],
    scene: &SceneGraph,
    extra_attr: Option<AttributeValue>,
) -> SubjectDesc {
    let ids = match &values[chain.result_node] {
        Value::ObjectSet(ids) => ids.clone(),
        Value::SingleObject(id) => vec![*id],
        _ => Vec::new(),
    };
    let mut groups: Vec<MentionGroup> = Vec::new();
    for id in ids {
        let mut attrs = mention_attrs(chain, id, values, scene);
        if let Some(extra) = extra_attr {
            attrs.push(extra);
            sort_attrs(&mut attrs);
        }
        match groups.iter_mut().find(|g| g.attrs == attrs) {
            Some(g) => g.object_ids.push(id),
            None => groups.push(MentionGroup {
                object_ids: vec![id],
                attrs,
                role: EvidenceRole::QuestionSubject,
            }),
        }
    }
    SubjectDesc {
        groups,
        negation_specs: negation_specs(chain),
        relation: subject_relation(chain, values, scene),
    }
}

/// Build the mention plan for a validated program on a validated scene,
/// returning the answer alongside.
pub fn plan_question(
    program: &[FunctionNode],
    scene: &SceneGraph,
) -> Result<(Answer, MentionPlan), EvalError> {
    let shape = analyze(program)?;
    let (answer, _trace, values) = evaluate_full(program, scene)?;
    let plan = match &shape.terminal {
        Terminal::Count(chain) => MentionPlan {
            subjects: vec![subject_desc(chain, &values, scene, None)],
            terminal: TerminalKind::Count,
        },
        Terminal::Exist(chain) => MentionPlan {
            subjects: vec![subject_desc(chain, &values, scene, None)],
            terminal: TerminalKind::Exist,
        },
        Terminal::Query { kind, subject } => {
            let Answer::Attr(value) = answer else {
                unreachable!("query answers are attributes")
            };
            MentionPlan {
                subjects: vec![subject_desc(subject, &values, scene, Some(value))],
                terminal: TerminalKind::Query { kind: *kind, value },
            }
        }
        Terminal::EqualAttr { kind, left, right } => {
            let l = subject_desc(left, &values, scene, None);
            let r = subject_desc(right, &values, scene, None);
            let lv = scene.objects[l.groups[0].object_ids[0]].attribute(*kind);
            let rv = scene.objects[r.groups[0].object_ids[0]].attribute(*kind);
            MentionPlan {
                subjects: vec![l, r],
                terminal: TerminalKind::EqualAttr { left: lv, right: rv },
            }
        }
        Terminal::CompareCount { left, right, .. } => MentionPlan {
            subjects: vec![
                subject_desc(left, &values, scene, None),
                subject_desc(right, &values, scene, None),
            ],
            terminal: TerminalKind::CompareCount,
        },
    };
    Ok((answer, plan))
}

// ---------------------------------------------------------------------------
// Question-wording bindings
// ---------------------------------------------------------------------------

/// Attribute words copied verbatim from the question: canonical value → the
/// surface form (singular) the question used.
#[derive(Debug, Clone, Default)]
pub struct Bindings {
    map: HashMap<AttributeValue, String>,
    /// Per-question preferred surface forms for unbound values. Most
    /// realizations reuse them, so a question's explanations share wording
    /// and its reference set converges quickly.
    defaults: HashMap<AttributeValue, String>,
}

/// How often an unbound attribute keeps its per-question default synonym.
const DEFAULT_SURFACE_P: f64 = 0.85;

impl Bindings {
    pub fn from_question(text: &str) -> Bindings {
        let mut map = HashMap::new();
        for raw in text.split(|c: char| !c.is_ascii_alphanumeric()) {
            if raw.is_empty() {
                continue;
            }
            let token = raw.to_ascii_lowercase();
            let (value, singular) = match AttributeValue::from_token(&token) {
                Some(v) => (v, token.clone()),
                None => match token.strip_suffix('s').and_then(AttributeValue::from_token) {
                    Some(v) => (v, token[..token.len() - 1].to_string()),
                    None => continue,
                },
            };
            map.entry(value).or_insert(singular);
        }
        Bindings {
            map,
            defaults: HashMap::new(),
        }
    }

    /// Draw a default synonym for every attribute value not named in the
    /// question.
    pub fn sample_defaults(&mut self, rng: &mut ChaCha8Rng) {
        let mut values: Vec<AttributeValue> = Vec::new();
        values.extend(SIZES.iter().map(|&v| AttributeValue::Size(v)));
        values.extend(COLORS.iter().map(|&v| AttributeValue::Color(v)));
        values.extend(MATERIALS.iter().map(|&v| AttributeValue::Material(v)));
        values.extend(SHAPES.iter().map(|&v| AttributeValue::Shape(v)));
        for value in values {
            if !self.map.contains_key(&value) {
                let w = (*value.synonyms().choose(rng).unwrap()).to_string();
                self.defaults.insert(value, w);
            }
        }
    }

    fn surface(&self, value: AttributeValue, rng: &mut ChaCha8Rng) -> String {
        if let Some(word) = self.map.get(&value) {
            return word.clone();
        }
        if let Some(word) = self.defaults.get(&value) {
            if rng.gen_bool(DEFAULT_SURFACE_P) {
                return word.clone();
            }
        }
        (*value.synonyms().choose(rng).unwrap()).to_string()
    }
}

// ---------------------------------------------------------------------------
// Realization
// ---------------------------------------------------------------------------

const NUMBER_WORDS: [&str; 11] = [
    "no", "a", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
];

fn dir_phrase(d: Direction, rng: &mut ChaCha8Rng) -> &'static str {
    // Left/right admit an equivalent short form as optional wording.
    match d {
        Direction::Left => {
            if rng.gen_bool(0.75) {
                "on the left side of"
            } else {
                "to the left of"
            }
        }
        Direction::Right => {
            if rng.gen_bool(0.75) {
                "on the right side of"
            } else {
                "to the right of"
            }
        }
        Direction::Front => "in front of",
        Direction::Behind => "behind",
    }
}

struct Realizer<'a> {
    bindings: &'a Bindings,
}

impl<'a> Realizer<'a> {
    fn word(&self, value: AttributeValue, plural: bool, rng: &mut ChaCha8Rng) -> String {
        let w = self.bindings.surface(value, rng);
        if plural && value.kind() == AttributeKind::Shape {
            format!("{w}s")
        } else {
            w
        }
    }

    fn np(&self, attrs: &[AttributeValue], plural: bool, rng: &mut ChaCha8Rng) -> String {
        let words: Vec<String> = attrs.iter().map(|&a| self.word(a, plural, rng)).collect();
        if words.is_empty() {
            // Unreachable on generated corpora: negation specs without a
            // shape filter only arise in hand-written external inputs.
            if plural { "objects".into() } else { "object".into() }
        } else {
            words.join(" ")
        }
    }

    fn quant(&self, count: usize, attrs: &[AttributeValue], rng: &mut ChaCha8Rng) -> String {
        let numeral = NUMBER_WORDS[count.min(10)];
        // "exactly" is optional wording before true plural counts.
        let exactly = if count >= 2 && rng.gen_bool(0.2) {
            "exactly "
        } else {
            ""
        };
        format!("{exactly}{} {}", numeral, self.np(attrs, count != 1, rng))
    }

    /// "image" with an occasional "picture" variant.
    fn scene_noun(&self, rng: &mut ChaCha8Rng) -> &'static str {
        if rng.gen_bool(0.8) {
            "image"
        } else {
            "picture"
        }
    }

    /// Relative-pronoun choice for spatial clauses.
    fn rel_pron(&self, rng: &mut ChaCha8Rng) -> &'static str {
        if rng.gen_bool(0.7) {
            "which"
        } else {
            "that"
        }
    }

    fn anchor(&self, a: &AnchorPhrase, rng: &mut ChaCha8Rng) -> String {
        let head = self.np(&a.attrs, false, rng);
        match &a.relation {
            None => head,
            Some((RelationKind::Spatial(d), inner)) => {
                format!("{head} that is {} the {}", dir_phrase(*d, rng), self.anchor(inner, rng))
            }
            Some((RelationKind::SameProp(k), inner)) => {
                format!(
                    "{head} that has the same {} as the {}",
                    k.token(),
                    self.anchor(inner, rng)
                )
            }
        }
    }

    /// The subject's group enumeration plus plurality; empty evidence renders
    /// the negation phrasing.
    fn subject_np(&self, sub: &SubjectDesc, rng: &mut ChaCha8Rng) -> (String, bool, bool) {
        if sub.groups.is_empty() {
            let specs: Vec<String> = sub
                .negation_specs
                .iter()
                .map(|s| self.np(s, true, rng))
                .collect();
            (format!("no {}", specs.join(" or ")), true, true)
        } else {
            let mut order: Vec<usize> = (0..sub.groups.len()).collect();
            // Group order is free wording; keep the canonical order most of
            // the time so a question's explanations stay mutually similar.
            if order.len() > 1 && rng.gen_bool(0.3) {
                order.shuffle(rng);
            }
            let phrases: Vec<String> = order
                .iter()
                .map(|&i| {
                    let g = &sub.groups[i];
                    self.quant(g.object_ids.len(), &g.attrs, rng)
                })
                .collect();
            let total: usize = sub.groups.iter().map(|g| g.object_ids.len()).sum();
            (phrases.join(" and "), total != 1, false)
        }
    }

    fn rel_clause(
        &self,
        rel: &SubjectRelation,
        plural: bool,
        negated: bool,
        rng: &mut ChaCha8Rng,
    ) -> Option<String> {
        let be = if plural { "are" } else { "is" };
        match rel {
            SubjectRelation::None => None,
            SubjectRelation::Single(RelationKind::Spatial(d), a) => {
                let anchor = self.anchor(a, rng);
                Some(if negated {
                    format!(" {} the {anchor}", dir_phrase(*d, rng))
                } else {
                    format!(" {} {be} {} the {anchor}", self.rel_pron(rng), dir_phrase(*d, rng))
                })
            }
            SubjectRelation::Single(RelationKind::SameProp(k), a) => {
                let anchor = self.anchor(a, rng);
                let have = if plural { "have" } else { "has" };
                Some(format!(
                    " that {have} the same {} as the {anchor}",
                    k.token()
                ))
            }
            SubjectRelation::Both(d1, a1, d2, a2) => {
                let x = self.anchor(a1, rng);
                let y = self.anchor(a2, rng);
                Some(format!(
                    " {} both {} the {x} and {} the {y}",
                    if negated {
                        format!("that {be}")
                    } else {
                        format!("which {be}")
                    },
                    dir_phrase(*d1, rng),
                    dir_phrase(*d2, rng)
                ))
            }
        }
    }

    /// "there is/are X …" with the relation clause or the in-image tail.
    fn existential(&self, sub: &SubjectDesc, rng: &mut ChaCha8Rng) -> String {
        let (np, plural, negated) = self.subject_np(sub, rng);
        let be = if plural { "are" } else { "is" };
        match self.rel_clause(&sub.relation, plural, negated, rng) {
            Some(rel) => format!("there {be} {np}{rel}"),
            None => format!("there {be} {np} in the {}", self.scene_noun(rng)),
        }
    }

    /// "in the image there is/are X …" variant.
    fn fronted(&self, sub: &SubjectDesc, rng: &mut ChaCha8Rng) -> String {
        let (np, plural, negated) = self.subject_np(sub, rng);
        let be = if plural { "are" } else { "is" };
        let rel = self
            .rel_clause(&sub.relation, plural, negated, rng)
            .unwrap_or_default();
        format!("in the {} there {be} {np}{rel}", self.scene_noun(rng))
    }

    /// "X … can be seen in the image" variant.
    fn seen(&self, sub: &SubjectDesc, rng: &mut ChaCha8Rng) -> String {
        let (np, plural, negated) = self.subject_np(sub, rng);
        let rel = self
            .rel_clause(&sub.relation, plural, negated, rng)
            .unwrap_or_default();
        let verb = if rng.gen_bool(0.8) { "seen" } else { "found" };
        format!("{np}{rel} can be {verb} in the {}", self.scene_noun(rng))
    }

    fn predicate(&self, value: AttributeValue, plural: bool, rng: &mut ChaCha8Rng) -> String {
        let w = self.word(value, plural, rng);
        if value.kind() == AttributeKind::Shape && !plural {
            format!("a {w}")
        } else {
            w
        }
    }
}

fn capitalize(mut s: String) -> String {
    if let Some(first) = s.get(..1) {
        let up = first.to_ascii_uppercase();
        s.replace_range(..1, &up);
    }
    s
}

/// Render one plan under a template. Unbound attribute words and order-free
/// group orders are drawn from `rng`; everything named in the question is
/// reproduced verbatim via `bindings`.
pub fn realize(
    plan: &MentionPlan,
    bindings: &Bindings,
    template_id: u8,
    rng: &mut ChaCha8Rng,
) -> String {
    let r = Realizer { bindings };
    let body = match &plan.terminal {
        TerminalKind::Count => {
            let sub = &plan.subjects[0];
            match template_id {
                0 => r.existential(sub, rng),
                1 => r.seen(sub, rng),
                _ => r.fronted(sub, rng),
            }
        }
        TerminalKind::Exist => {
            let sub = &plan.subjects[0];
            match template_id {
                0 => {
                    let body = r.existential(sub, rng);
                    // The answer prefix is optional wording.
                    if rng.gen_bool(0.5) {
                        let yes = !sub.groups.is_empty();
                        format!("{} {body}", if yes { "yes" } else { "no" })
                    } else {
                        body
                    }
                }
                1 => r.seen(sub, rng),
                _ => r.fronted(sub, rng),
            }
        }
        TerminalKind::Query { kind, value } => {
            let sub = &plan.subjects[0];
            let predicate_form =
                template_id == 0 && *kind != AttributeKind::Shape && !sub.groups.is_empty();
            if predicate_form {
                // Predicate form: "The small cube … is red."
                let g = &sub.groups[0];
                let head: Vec<AttributeValue> =
                    g.attrs.iter().copied().filter(|a| a != value).collect();
                let np = r.np(&head, false, rng);
                let rel = r
                    .rel_clause(&sub.relation, false, false, rng)
                    .unwrap_or_else(|| format!(" in the {}", r.scene_noun(rng)));
                format!("the {np}{rel} is {}", r.predicate(*value, false, rng))
            } else {
                match template_id {
                    0 => r.existential(sub, rng),
                    1 => r.seen(sub, rng),
                    _ => r.fronted(sub, rng),
                }
            }
        }
        TerminalKind::EqualAttr { left, right }
            if plan.subjects.iter().any(|s| s.groups.is_empty()) =>
        {
            // Degenerate plans (probe regeneration after evidence removal):
            // negate the missing referent, keep the surviving one.
            let parts: Vec<String> = plan
                .subjects
                .iter()
                .zip([left, right])
                .map(|(sub, v)| match sub.groups.first() {
                    Some(g) => format!(
                        "the {} is {}",
                        r.np(&g.attrs, false, rng),
                        r.predicate(*v, false, rng)
                    ),
                    None => format!(
                        "there is no {}",
                        r.np(&sub.negation_specs[0], false, rng)
                    ),
                })
                .collect();
            parts.join(" and ")
        }
        TerminalKind::EqualAttr { left, right } => {
            let gl = &plan.subjects[0].groups[0];
            let gr = &plan.subjects[1].groups[0];
            // The two referents are order-free.
            let ((npa, va), (npb, vb)) = {
                let l = (r.np(&gl.attrs, false, rng), *left);
                let rt = (r.np(&gr.attrs, false, rng), *right);
                if template_id == 2 {
                    (rt, l)
                } else {
                    (l, rt)
                }
            };
            if template_id == 1 && left == right {
                format!(
                    "both the {npa} and the {npb} are {}",
                    r.predicate(va, true, rng)
                )
            } else {
                let link = if template_id == 1 { "but" } else { "and" };
                format!(
                    "the {npa} is {} {link} the {npb} is {}",
                    r.predicate(va, false, rng),
                    r.predicate(vb, false, rng)
                )
            }
        }
        TerminalKind::CompareCount => {
            let mut parts: Vec<(String, Option<String>)> = Vec::new();
            for sub in &plan.subjects {
                let (np, plural, negated) = r.subject_np(sub, rng);
                let rel = r.rel_clause(&sub.relation, plural, negated, rng);
                parts.push((np, rel));
            }
            let render =
                |(np, rel): &(String, Option<String>)| format!("{np}{}", rel.clone().unwrap_or_default());
            let first_plural = {
                let total: usize = plan.subjects[0]
                    .groups
                    .iter()
                    .map(|g| g.object_ids.len())
                    .sum();
                plan.subjects[0].groups.is_empty() || total != 1
            };
            let be = if first_plural { "are" } else { "is" };
            let noun = r.scene_noun(rng);
            match template_id {
                0 => format!(
                    "there {be} {} and {} in the {noun}",
                    render(&parts[0]),
                    render(&parts[1])
                ),
                1 => format!(
                    "{} and {} can be seen in the {noun}",
                    render(&parts[0]),
                    render(&parts[1])
                ),
                _ => format!(
                    "in the {noun} there {be} {} and {}",
                    render(&parts[0]),
                    render(&parts[1])
                ),
            }
        }
    };
    let mut text = capitalize(body);
    text.push('.');
    text
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub text: String,
    pub template_id: u8,
}

/// Rng for one question: the global seed keys the cipher, the question index
/// selects the stream.
pub fn question_rng(seed: u64, question_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(question_index);
    rng
}

const SAMPLE_ATTEMPTS: usize = 120;

/// Template family distribution: each question has a dominant family, and
/// most samples stay in it, so a question's reference set shares one
/// sentence structure (variety comes from synonym and ordering choices).
/// The corpus-level family mix stays balanced via the per-question draw.
fn sample_template(dominant: u8, rng: &mut ChaCha8Rng) -> u8 {
    if rng.gen_bool(0.9) {
        dominant
    } else {
        rng.gen_range(0..NUM_TEMPLATES)
    }
}

/// Sample up to `max` distinct explanations for one question. Deterministic
/// for fixed (seed, question_index).
pub fn generate(
    question: &Question,
    scene: &SceneGraph,
    seed: u64,
    max: usize,
) -> Result<Vec<Explanation>, EvalError> {
    let (_, plan) = plan_question(&question.program, scene)?;
    let mut bindings = Bindings::from_question(&question.text);
    let mut rng = question_rng(seed, question.question_index);
    let dominant = rng.gen_range(0..NUM_TEMPLATES);
    // Reference counts vary per question: a minority of questions carry the
    // full ten-way set, the rest a small handful.
    let budget: usize = if rng.gen_bool(0.2) {
        MAX_EXPLANATIONS
    } else {
        rng.gen_range(2..=5)
    };
    bindings.sample_defaults(&mut rng);
    let mut out: Vec<Explanation> = Vec::new();
    for _ in 0..SAMPLE_ATTEMPTS {
        if out.len() >= max.min(budget) {
            break;
        }
        let template_id = sample_template(dominant, &mut rng);
        let text = realize(&plan, &bindings, template_id, &mut rng);
        if !out.iter().any(|e| e.text == text) {
            out.push(Explanation { text, template_id });
        }
    }
    Ok(out)
}

/// Serialized output record, one per question.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExplanationRecord {
    pub question_index: u64,
    pub image_index: u64,
    pub answer: String,
    pub explanations: Vec<String>,
}

pub fn make_record(
    question: &Question,
    scene: &SceneGraph,
    seed: u64,
    max: usize,
) -> Result<ExplanationRecord, EvalError> {
    let (answer, _, _) = evaluate_full(&question.program, scene)?;
    let explanations = generate(question, scene, seed, max)?;
    Ok(ExplanationRecord {
        question_index: question.question_index,
        image_index: question.image_index,
        answer: answer.token().to_string(),
        explanations: explanations.into_iter().map(|e| e.text).collect(),
    })
}

// ---------------------------------------------------------------------------
// Mention audit
// ---------------------------------------------------------------------------

/// Admissible surface forms for one attribute: the question-bound word if
/// any, else every synonym; shapes pluralize.
fn attr_surfaces(value: AttributeValue, plural: bool, bindings: &Bindings) -> Vec<String> {
    let base: Vec<String> = match bindings.map.get(&value) {
        Some(bound) => vec![bound.clone()],
        None => value.synonyms().iter().map(|s| s.to_string()).collect(),
    };
    if plural && value.kind() == AttributeKind::Shape {
        base.into_iter().map(|w| format!("{w}s")).collect()
    } else {
        base
    }
}

/// All noun-phrase variants for an attribute tuple (cartesian product of
/// admissible surfaces, tiny for the closed vocabulary).
fn np_variants(attrs: &[AttributeValue], plural: bool, bindings: &Bindings) -> Vec<String> {
    let mut variants = vec![String::new()];
    for &attr in attrs {
        let mut next = Vec::new();
        for prefix in &variants {
            for surface in attr_surfaces(attr, plural, bindings) {
                next.push(if prefix.is_empty() {
                    surface
                } else {
                    format!("{prefix} {surface}")
                });
            }
        }
        variants = next;
    }
    variants
}

fn group_phrase_present(
    text: &str,
    count: usize,
    attrs: &[AttributeValue],
    bindings: &Bindings,
) -> bool {
    let prefixes: Vec<&str> = if count == 1 {
        vec!["a ", "the ", "both the "]
    } else {
        vec![]
    };
    for np in np_variants(attrs, count != 1, bindings) {
        if count == 1 {
            if prefixes.iter().any(|p| text.contains(&format!("{p}{np}"))) {
                return true;
            }
        } else if text.contains(&format!("{} {np}", NUMBER_WORDS[count.min(10)])) {
            return true;
        }
    }
    false
}

/// Check one explanation against its plan: every evidence group must be
/// verbalized as a numeral-quantified phrase over admissible surface forms,
/// and empty evidence must be negated. Returns human-readable violations.
pub fn audit_mentions(plan: &MentionPlan, text: &str, bindings: &Bindings) -> Vec<String> {
    let text = text.to_ascii_lowercase();
    let has_word = |w: &str| {
        text.split(|c: char| !c.is_ascii_alphanumeric())
            .any(|x| x == w)
    };
    let mut violations = Vec::new();
    for (si, sub) in plan.subjects.iter().enumerate() {
        if sub.groups.is_empty() {
            if !has_word("no") {
                violations.push(format!("subject {si}: empty evidence but no negation"));
            }
            continue;
        }
        for (gi, g) in sub.groups.iter().enumerate() {
            let count = g.object_ids.len();
            let mut ok = group_phrase_present(&text, count, &g.attrs, bindings);
            // The predicate form of attribute queries splits the queried
            // value off the noun phrase: "the small cube … is red."
            if !ok && count == 1 {
                if let TerminalKind::Query { value, .. } = &plan.terminal {
                    let head: Vec<AttributeValue> =
                        g.attrs.iter().copied().filter(|a| a != value).collect();
                    let value_spoken = attr_surfaces(*value, false, bindings)
                        .iter()
                        .any(|s| has_word(s));
                    ok = value_spoken
                        && !head.is_empty()
                        && group_phrase_present(&text, 1, &head, bindings);
                }
            }
            if !ok {
                violations.push(format!(
                    "subject {si} group {gi}: no admissible phrase for {:?} x{count}",
                    g.attrs.iter().map(|a| a.token()).collect::<Vec<_>>()
                ));
            }
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{generate_dataset, GenConfig};

    fn obj(
        id: usize,
        size: Size,
        color: Color,
        material: Material,
        shape: Shape,
        x: f64,
        y: f64,
    ) -> SceneObject {
        SceneObject {
            id,
            size,
            color,
            material,
            shape,
            position: Some([x, y, 0.35]),
        }
    }

    /// Fig. 1 setting: purple metal sphere with a cyan cylinder to its right.
    fn fig1_scene() -> SceneGraph {
        SceneGraph::from_objects(
            0,
            vec![
                obj(0, Size::Small, Color::Purple, Material::Metal, Shape::Sphere, 1.0, 1.0),
                obj(1, Size::Small, Color::Cyan, Material::Rubber, Shape::Cylinder, 2.0, 1.2),
                obj(2, Size::Large, Color::Red, Material::Rubber, Shape::Cube, 0.0, 2.0),
            ],
        )
    }

    fn node(function: Function, inputs: Vec<usize>, value_inputs: Vec<ValueInput>) -> FunctionNode {
        FunctionNode {
            function,
            inputs,
            value_inputs,
        }
    }

    fn fig1_program() -> Vec<FunctionNode> {
        vec![
            node(Function::Scene, vec![], vec![]),
            node(
                Function::Filter(AttributeKind::Color),
                vec![0],
                vec![ValueInput::Attr(AttributeValue::Color(Color::Purple))],
            ),
            node(
                Function::Filter(AttributeKind::Material),
                vec![1],
                vec![ValueInput::Attr(AttributeValue::Material(Material::Metal))],
            ),
            node(
                Function::Filter(AttributeKind::Shape),
                vec![2],
                vec![ValueInput::Attr(AttributeValue::Shape(Shape::Sphere))],
            ),
            node(Function::Unique, vec![3], vec![]),
            node(Function::Relate, vec![4], vec![ValueInput::Dir(Direction::Right)]),
            node(
                Function::Filter(AttributeKind::Color),
                vec![5],
                vec![ValueInput::Attr(AttributeValue::Color(Color::Cyan))],
            ),
            node(Function::Count, vec![6], vec![]),
        ]
    }

    #[test]
    fn fig1_text_is_producible() {
        let scene = fig1_scene();
        let program = fig1_program();
        let question = Question {
            question_index: 0,
            image_index: 0,
            text: "There is a purple metallic ball; what number of cyan objects are right of it?"
                .into(),
            program,
            family_index: 5,
            question_type: QuestionType::OneHop,
            answer: None,
        };
        // The cyan subject carries its scene shape (cylinder); the anchor is
        // bound to the question's wording "purple metallic ball".
        let mut found = false;
        for seed in 0..4 {
            let explanations = generate(&question, &scene, seed, 10).unwrap();
            if explanations.iter().any(|e| {
                e.text
                    == "There is a cyan cylinder which is on the right side of the purple metallic ball."
            }) {
                found = true;
                break;
            }
        }
        assert!(found, "Fig. 1 explanation text not generated");
    }

    #[test]
    fn footnote_same_color_text_is_producible() {
        // "There is a large cube that has the same color as the red cylinder."
        let scene = SceneGraph::from_objects(
            0,
            vec![
                obj(0, Size::Small, Color::Red, Material::Rubber, Shape::Cylinder, 0.0, 0.0),
                obj(1, Size::Large, Color::Red, Material::Metal, Shape::Cube, 1.0, 1.0),
                obj(2, Size::Small, Color::Red, Material::Rubber, Shape::Cube, 2.0, 2.0),
                obj(3, Size::Large, Color::Blue, Material::Metal, Shape::Sphere, 3.0, 3.0),
            ],
        );
        let program = vec![
            node(Function::Scene, vec![], vec![]),
            node(
                Function::Filter(AttributeKind::Color),
                vec![0],
                vec![ValueInput::Attr(AttributeValue::Color(Color::Red))],
            ),
            node(
                Function::Filter(AttributeKind::Shape),
                vec![1],
                vec![ValueInput::Attr(AttributeValue::Shape(Shape::Cylinder))],
            ),
            node(Function::Unique, vec![2], vec![]),
            node(Function::Same(AttributeKind::Color), vec![3], vec![]),
            node(
                Function::Filter(AttributeKind::Size),
                vec![4],
                vec![ValueInput::Attr(AttributeValue::Size(Size::Large))],
            ),
            node(
                Function::Filter(AttributeKind::Shape),
                vec![5],
                vec![ValueInput::Attr(AttributeValue::Shape(Shape::Cube))],
            ),
            node(Function::Exist, vec![6], vec![]),
        ];
        let question = Question {
            question_index: 0,
            image_index: 0,
            text: "Is there a large cube that has the same color as the red cylinder?".into(),
            program,
            family_index: 35,
            question_type: QuestionType::SameRelate,
            answer: None,
        };
        // Subsumption: the subject run (same_color → filter_large →
        // filter_cube) mentions only the surviving large cube.
        let (answer, plan) = plan_question(&question.program, &scene).unwrap();
        assert_eq!(answer, Answer::Binary(true));
        assert_eq!(plan.subjects[0].groups.len(), 1);
        assert_eq!(plan.subjects[0].groups[0].object_ids, vec![1]);
        let mut found = false;
        for seed in 0..4 {
            let explanations = generate(&question, &scene, seed, 10).unwrap();
            if explanations.iter().any(|e| {
                e.text == "There is a large cube that has the same color as the red cylinder."
            }) {
                found = true;
                break;
            }
        }
        assert!(found);
    }

    #[test]
    fn aggregation_two_red_cubes() {
        let scene = SceneGraph::from_objects(
            0,
            vec![
                obj(0, Size::Large, Color::Red, Material::Rubber, Shape::Cube, 0.0, 0.0),
                obj(1, Size::Small, Color::Red, Material::Metal, Shape::Cube, 1.0, 1.0),
                obj(2, Size::Small, Color::Blue, Material::Metal, Shape::Sphere, 2.0, 2.0),
            ],
        );
        let program = vec![
            node(Function::Scene, vec![], vec![]),
            node(
                Function::Filter(AttributeKind::Color),
                vec![0],
                vec![ValueInput::Attr(AttributeValue::Color(Color::Red))],
            ),
            node(
                Function::Filter(AttributeKind::Shape),
                vec![1],
                vec![ValueInput::Attr(AttributeValue::Shape(Shape::Cube))],
            ),
            node(Function::Count, vec![2], vec![]),
        ];
        let question = Question {
            question_index: 7,
            image_index: 0,
            text: "How many red cubes are there?".into(),
            program,
            family_index: 0,
            question_type: QuestionType::ZeroHop,
            answer: None,
        };
        let (answer, plan) = plan_question(&question.program, &scene).unwrap();
        assert_eq!(answer, Answer::Count(2));
        assert_eq!(plan.subjects[0].groups.len(), 1);
        assert_eq!(plan.subjects[0].groups[0].object_ids, vec![0, 1]);
        let mut found = false;
        for seed in 0..64 {
            let explanations = generate(&question, &scene, seed, 10).unwrap();
            if explanations
                .iter()
                .any(|e| e.text == "There are two red cubes in the image.")
            {
                found = true;
                break;
            }
        }
        assert!(found);
    }

    #[test]
    fn negation_for_empty_evidence() {
        let scene = fig1_scene();
        let program = vec![
            node(Function::Scene, vec![], vec![]),
            node(
                Function::Filter(AttributeKind::Color),
                vec![0],
                vec![ValueInput::Attr(AttributeValue::Color(Color::Green))],
            ),
            node(
                Function::Filter(AttributeKind::Shape),
                vec![1],
                vec![ValueInput::Attr(AttributeValue::Shape(Shape::Cube))],
            ),
            node(Function::Exist, vec![2], vec![]),
        ];
        let question = Question {
            question_index: 3,
            image_index: 0,
            text: "Are there any green cubes?".into(),
            program,
            family_index: 1,
            question_type: QuestionType::ZeroHop,
            answer: None,
        };
        let explanations = generate(&question, &scene, 1, 10).unwrap();
        assert!(!explanations.is_empty());
        for e in &explanations {
            assert!(
                e.text.to_ascii_lowercase().contains("no green cubes"),
                "{}",
                e.text
            );
        }
    }

    #[test]
    fn question_wording_is_verbatim() {
        // Question says "big block": the explanation must never say
        // "large cube" for that object.
        let scene = SceneGraph::from_objects(
            0,
            vec![
                obj(0, Size::Large, Color::Red, Material::Rubber, Shape::Cube, 0.0, 0.0),
                obj(1, Size::Small, Color::Blue, Material::Metal, Shape::Sphere, 1.0, 1.0),
                obj(2, Size::Small, Color::Green, Material::Rubber, Shape::Cylinder, 2.0, 2.0),
            ],
        );
        let program = vec![
            node(Function::Scene, vec![], vec![]),
            node(
                Function::Filter(AttributeKind::Size),
                vec![0],
                vec![ValueInput::Attr(AttributeValue::Size(Size::Large))],
            ),
            node(
                Function::Filter(AttributeKind::Shape),
                vec![1],
                vec![ValueInput::Attr(AttributeValue::Shape(Shape::Cube))],
            ),
            node(Function::Count, vec![2], vec![]),
        ];
        let question = Question {
            question_index: 9,
            image_index: 0,
            text: "How many big blocks are there?".into(),
            program,
            family_index: 0,
            question_type: QuestionType::ZeroHop,
            answer: None,
        };
        for seed in 0..8 {
            let explanations = generate(&question, &scene, seed, 10).unwrap();
            for e in &explanations {
                assert!(e.text.contains("big block"), "{}", e.text);
                assert!(!e.text.contains("large"), "{}", e.text);
                assert!(!e.text.contains("cube"), "{}", e.text);
            }
        }
    }

    #[test]
    fn generate_is_deterministic_and_distinct() {
        let cfg = GenConfig {
            num_images: 20,
            questions_per_image: 5,
            seed: 9,
            malformed: 0,
        };
        let (scenes, questions) = generate_dataset(&cfg);
        for q in &questions {
            let scene = &scenes[q.image_index as usize];
            let a = generate(q, scene, 42, 10).unwrap();
            let b = generate(q, scene, 42, 10).unwrap();
            assert_eq!(a, b);
            assert!(!a.is_empty() && a.len() <= 10);
            let mut texts: Vec<&str> = a.iter().map(|e| e.text.as_str()).collect();
            texts.sort_unstable();
            texts.dedup();
            assert_eq!(texts.len(), a.len());
        }
    }

    #[test]
    fn corpus_audit_and_length_bounds() {
        let cfg = GenConfig {
            num_images: 60,
            questions_per_image: 6,
            seed: 4,
            malformed: 0,
        };
        let (scenes, questions) = generate_dataset(&cfg);
        for q in &questions {
            let scene = &scenes[q.image_index as usize];
            let (_, plan) = plan_question(&q.program, scene).unwrap();
            let bindings = Bindings::from_question(&q.text);
            for e in generate(q, scene, 0, 10).unwrap() {
                let violations = audit_mentions(&plan, &e.text, &bindings);
                assert!(violations.is_empty(), "{}: {:?}", e.text, violations);
                let words = e.text.trim_end_matches('.').split_whitespace().count();
                assert!(
                    (7..=53).contains(&words),
                    "length {words} out of bounds: {}",
                    e.text
                );
                assert!(!e.text.contains("thing"), "{}", e.text);
                assert!(!e.text.contains("object"), "{}", e.text);
            }
        }
    }
}
