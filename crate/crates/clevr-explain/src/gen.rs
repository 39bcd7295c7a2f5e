//! Seeded synthesis of scenes and questions in the CLEVR layout.
//!
//! Scenes are random attribute draws over positioned objects; questions are
//! instantiated from per-type program skeletons with rejection sampling so
//! that every `unique` referent is unambiguous. Ground-truth answers are
//! computed here by a direct set-logic evaluator that is independent of the
//! traced interpreter, so the two can be cross-checked.

use crate::model::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub num_images: usize,
    pub questions_per_image: usize,
    pub seed: u64,
    /// Number of deliberately disconnected programs to inject (they must be
    /// rejected at parse time).
    pub malformed: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            num_images: 100,
            questions_per_image: 10,
            seed: 0,
            malformed: 0,
        }
    }
}

// ---------------------------------------------------------------------------
// Scenes
// ---------------------------------------------------------------------------

pub fn generate_scene(image_index: u64, rng: &mut ChaCha8Rng) -> SceneGraph {
    let n = rng.gen_range(MIN_OBJECTS..=MAX_OBJECTS);
    let mut xs: Vec<usize> = (0..n).collect();
    let mut ys: Vec<usize> = (0..n).collect();
    xs.shuffle(rng);
    ys.shuffle(rng);
    let objects = (0..n)
        .map(|id| SceneObject {
            id,
            size: *SIZES.choose(rng).unwrap(),
            color: *COLORS.choose(rng).unwrap(),
            material: *MATERIALS.choose(rng).unwrap(),
            shape: *SHAPES.choose(rng).unwrap(),
            position: Some([
                xs[id] as f64 + rng.gen_range(0.0..0.8),
                ys[id] as f64 + rng.gen_range(0.0..0.8),
                0.35,
            ]),
        })
        .collect();
    SceneGraph::from_objects(image_index, objects)
}

// ---------------------------------------------------------------------------
// Direct evaluator (independent of the traced interpreter)
// ---------------------------------------------------------------------------

mod direct {
    use crate::model::*;

    pub fn matching(scene: &SceneGraph, filters: &[AttributeValue], within: &[usize]) -> Vec<usize> {
        within
            .iter()
            .copied()
            .filter(|&id| filters.iter().all(|&f| scene.objects[id].has(f)))
            .collect()
    }

    pub fn all_ids(scene: &SceneGraph) -> Vec<usize> {
        (0..scene.objects.len()).collect()
    }

    pub fn related(scene: &SceneGraph, id: usize, d: Direction) -> Vec<usize> {
        let mut ids = scene.relations.get(d)[id].clone();
        ids.sort_unstable();
        ids
    }

    pub fn same(scene: &SceneGraph, id: usize, kind: AttributeKind) -> Vec<usize> {
        let target = scene.objects[id].attribute(kind);
        (0..scene.objects.len())
            .filter(|&j| j != id && scene.objects[j].attribute(kind) == target)
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Referent specifications
// ---------------------------------------------------------------------------

/// Partial attribute description of a referent, as named in a question.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RefSpec {
    pub size: Option<Size>,
    pub color: Option<Color>,
    pub material: Option<Material>,
    pub shape: Option<Shape>,
}

impl RefSpec {
    pub fn filters(&self) -> Vec<AttributeValue> {
        let mut out = Vec::new();
        if let Some(s) = self.size {
            out.push(AttributeValue::Size(s));
        }
        if let Some(c) = self.color {
            out.push(AttributeValue::Color(c));
        }
        if let Some(m) = self.material {
            out.push(AttributeValue::Material(m));
        }
        if let Some(s) = self.shape {
            out.push(AttributeValue::Shape(s));
        }
        out
    }

    /// Sample a description for one concrete object so the spec is satisfied
    /// by it. Picks 1..=max_attrs attribute kinds (shape forced when asked).
    fn sample_for(
        obj: &SceneObject,
        rng: &mut ChaCha8Rng,
        require_shape: bool,
        max_attrs: usize,
    ) -> RefSpec {
        let mut kinds = vec![AttributeKind::Size, AttributeKind::Color, AttributeKind::Material];
        kinds.shuffle(rng);
        let mut spec = RefSpec::default();
        let mut budget = rng.gen_range(2..=max_attrs.max(2));
        if require_shape || rng.gen_bool(0.7) {
            spec.shape = Some(obj.shape);
            budget = budget.saturating_sub(1);
        }
        for kind in kinds.into_iter().take(budget) {
            match kind {
                AttributeKind::Size => spec.size = Some(obj.size),
                AttributeKind::Color => spec.color = Some(obj.color),
                AttributeKind::Material => spec.material = Some(obj.material),
                AttributeKind::Shape => {}
            }
        }
        if !require_shape && spec.filters().is_empty() {
            spec.color = Some(obj.color);
        }
        spec
    }

    /// Sample a free-standing description (not tied to an object), used where
    /// empty matches are acceptable.
    fn sample_free(rng: &mut ChaCha8Rng, require_shape: bool) -> RefSpec {
        let mut spec = RefSpec::default();
        if require_shape || rng.gen_bool(0.8) {
            spec.shape = Some(*SHAPES.choose(rng).unwrap());
        }
        if rng.gen_bool(0.65) {
            spec.color = Some(*COLORS.choose(rng).unwrap());
        }
        if rng.gen_bool(0.45) {
            spec.size = Some(*SIZES.choose(rng).unwrap());
        }
        if rng.gen_bool(0.45) {
            spec.material = Some(*MATERIALS.choose(rng).unwrap());
        }
        if spec.filters().is_empty() {
            spec.color = Some(*COLORS.choose(rng).unwrap());
        }
        spec
    }

    /// Surface phrase with synonym sampling; `plural` pluralizes the noun.
    /// Specs without a shape use the generic noun (questions may say "thing",
    /// explanations never do).
    fn phrase(&self, rng: &mut ChaCha8Rng, plural: bool) -> String {
        let mut words: Vec<String> = Vec::new();
        for v in self.filters() {
            if v.kind() == AttributeKind::Shape {
                continue;
            }
            words.push((*v.synonyms().choose(rng).unwrap()).to_string());
        }
        let noun = match self.shape {
            Some(s) => (*AttributeValue::Shape(s).synonyms().choose(rng).unwrap()).to_string(),
            None => (*["thing", "object"].choose(rng).unwrap()).to_string(),
        };
        words.push(if plural { format!("{noun}s") } else { noun });
        words.join(" ")
    }
}

// ---------------------------------------------------------------------------
// Program assembly
// ---------------------------------------------------------------------------

#[derive(Default)]
struct ProgramBuilder {
    nodes: Vec<FunctionNode>,
}

impl ProgramBuilder {
    fn push(&mut self, function: Function, inputs: Vec<usize>, value_inputs: Vec<ValueInput>) -> usize {
        self.nodes.push(FunctionNode {
            function,
            inputs,
            value_inputs,
        });
        self.nodes.len() - 1
    }

    fn scene(&mut self) -> usize {
        self.push(Function::Scene, vec![], vec![])
    }

    fn filters(&mut self, mut from: usize, spec: &RefSpec) -> usize {
        for v in spec.filters() {
            from = self.push(Function::Filter(v.kind()), vec![from], vec![ValueInput::Attr(v)]);
        }
        from
    }
}

fn dir_phrase(d: Direction) -> &'static str {
    match d {
        Direction::Left => "to the left of",
        Direction::Right => "to the right of",
        Direction::Front => "in front of",
        Direction::Behind => "behind",
    }
}

fn kind_word(k: AttributeKind) -> &'static str {
    k.token()
}

/// A generated question together with its independently computed answer.
#[derive(Debug, Clone)]
pub struct GeneratedQuestion {
    pub text: String,
    pub program: Vec<FunctionNode>,
    pub family_index: u32,
    pub answer: Answer,
}

enum TerminalPlan {
    Count { alt: bool },
    Exist { alt: bool },
    Query(AttributeKind),
}

/// A spec uniquely matching one object of the scene, if one can be found.
fn unique_spec(
    scene: &SceneGraph,
    rng: &mut ChaCha8Rng,
    within: &[usize],
    exclude_kind: Option<AttributeKind>,
) -> Option<(RefSpec, usize)> {
    for _ in 0..24 {
        if within.is_empty() {
            return None;
        }
        let id = *within.choose(rng).unwrap();
        let obj = &scene.objects[id];
        let mut spec = RefSpec::sample_for(obj, rng, false, 3);
        if let Some(k) = exclude_kind {
            match k {
                AttributeKind::Size => spec.size = None,
                AttributeKind::Color => spec.color = None,
                AttributeKind::Material => spec.material = None,
                AttributeKind::Shape => spec.shape = None,
            }
            if spec.filters().is_empty() {
                continue;
            }
        }
        if direct::matching(scene, &spec.filters(), within).len() == 1 {
            return Some((spec, id));
        }
    }
    None
}

// Per-type builders. Each returns None when rejection sampling fails; the
// caller retries with fresh randomness.

fn build_hop(
    scene: &SceneGraph,
    rng: &mut ChaCha8Rng,
    hops: usize,
    variant: u32,
) -> Option<GeneratedQuestion> {
    let terminal = match variant {
        0 => TerminalPlan::Count { alt: false },
        1 => TerminalPlan::Exist { alt: false },
        2 => TerminalPlan::Query(AttributeKind::Size),
        3 => TerminalPlan::Query(AttributeKind::Color),
        4 => TerminalPlan::Query(AttributeKind::Material),
        5 => TerminalPlan::Query(AttributeKind::Shape),
        6 => TerminalPlan::Count { alt: true },
        7 => TerminalPlan::Exist { alt: true },
        _ => TerminalPlan::Count { alt: false },
    };
    let all = direct::all_ids(scene);

    if hops == 0 {
        return build_zero_hop(scene, rng, terminal, variant);
    }

    // Anchor chain: unique referent, then `hops` relate steps with unique
    // intermediates; the final hop's set is the subject.
    let (anchor_spec, anchor_id) = unique_spec(scene, rng, &all, None)?;
    let mut prog = ProgramBuilder::default();
    let s = prog.scene();
    let mut node = prog.filters(s, &anchor_spec);
    node = prog.push(Function::Unique, vec![node], vec![]);
    let mut cur_id = anchor_id;
    let mut hop_texts: Vec<(Direction, RefSpec)> = Vec::new();
    for h in 0..hops {
        let d = *Direction::ALL.choose(rng).unwrap();
        let related = direct::related(scene, cur_id, d);
        node = prog.push(Function::Relate, vec![node], vec![ValueInput::Dir(d)]);
        let last = h + 1 == hops;
        if last {
            // Subject spec over the related set.
            let subject_spec = match &terminal {
                TerminalPlan::Query(k) => {
                    let (spec, id) = unique_spec(scene, rng, &related, Some(*k))?;
                    cur_id = id;
                    spec
                }
                _ => {
                    let spec = RefSpec::sample_free(rng, false);
                    let matched = direct::matching(scene, &spec.filters(), &related);
                    if matched.is_empty() && spec.shape.is_none() {
                        return None; // negations must carry a shape noun
                    }
                    spec
                }
            };
            node = prog.filters(node, &subject_spec);
            hop_texts.push((d, subject_spec));
        } else {
            let (spec, id) = unique_spec(scene, rng, &related, None)?;
            cur_id = id;
            node = prog.filters(node, &spec);
            node = prog.push(Function::Unique, vec![node], vec![]);
            hop_texts.push((d, spec));
        }
    }

    // Question text: innermost referent last.
    let subject = &hop_texts[hops - 1].1;
    let subject_dir = hop_texts[hops - 1].0;
    let mut anchor_text = anchor_spec.phrase(rng, false);
    for (d, spec) in hop_texts[..hops - 1].iter().rev() {
        anchor_text = format!("{} that is {} the {}", spec.phrase(rng, false), dir_phrase(*d), anchor_text);
    }
    let (text, answer) = match terminal {
        TerminalPlan::Count { alt } => {
            let set = run_subject_set(scene, &prog.nodes, node);
            let n = set.len() as u8;
            node = prog.push(Function::Count, vec![node], vec![]);
            let t = if alt {
                format!(
                    "There is a {}; what number of {} are {} it?",
                    anchor_text,
                    subject.phrase(rng, true),
                    dir_phrase(subject_dir)
                )
            } else {
                format!(
                    "How many {} are {} the {}?",
                    subject.phrase(rng, true),
                    dir_phrase(subject_dir),
                    anchor_text
                )
            };
            (t, Answer::Count(n))
        }
        TerminalPlan::Exist { alt } => {
            let set = run_subject_set(scene, &prog.nodes, node);
            let yes = !set.is_empty();
            node = prog.push(Function::Exist, vec![node], vec![]);
            let t = if alt {
                format!(
                    "There is a {}; are there any {} {} it?",
                    anchor_text,
                    subject.phrase(rng, true),
                    dir_phrase(subject_dir)
                )
            } else {
                format!(
                    "Are there any {} {} the {}?",
                    subject.phrase(rng, true),
                    dir_phrase(subject_dir),
                    anchor_text
                )
            };
            (t, Answer::Binary(yes))
        }
        TerminalPlan::Query(k) => {
            node = prog.push(Function::Unique, vec![node], vec![]);
            node = prog.push(Function::Query(k), vec![node], vec![]);
            let t = if variant % 2 == 0 {
                format!(
                    "What {} is the {} that is {} the {}?",
                    kind_word(k),
                    subject.phrase(rng, false),
                    dir_phrase(subject_dir),
                    anchor_text
                )
            } else {
                format!(
                    "The {} that is {} the {} has what {}?",
                    subject.phrase(rng, false),
                    dir_phrase(subject_dir),
                    anchor_text,
                    kind_word(k)
                )
            };
            (t, Answer::Attr(scene.objects[cur_id].attribute(k)))
        }
    };
    let family = match hops {
        1 => 5 + variant.min(8),
        2 => 14 + variant.min(8),
        _ => 23 + variant.min(8),
    };
    let _ = node;
    Some(GeneratedQuestion {
        text,
        program: prog.nodes,
        family_index: family,
        answer,
    })
}

/// Execute the set-producing prefix of a program under construction with the
/// direct evaluator (filters, unique, relate only).
fn run_subject_set(scene: &SceneGraph, nodes: &[FunctionNode], node: usize) -> Vec<usize> {
    fn eval(scene: &SceneGraph, nodes: &[FunctionNode], i: usize) -> Vec<usize> {
        match nodes[i].function {
            Function::Scene => direct::all_ids(scene),
            Function::Filter(_) => {
                let ValueInput::Attr(v) = nodes[i].value_inputs[0] else {
                    unreachable!()
                };
                direct::matching(scene, &[v], &eval(scene, nodes, nodes[i].inputs[0]))
            }
            Function::Unique => eval(scene, nodes, nodes[i].inputs[0]),
            Function::Relate => {
                let ValueInput::Dir(d) = nodes[i].value_inputs[0] else {
                    unreachable!()
                };
                let ids = eval(scene, nodes, nodes[i].inputs[0]);
                debug_assert_eq!(ids.len(), 1);
                direct::related(scene, ids[0], d)
            }
            Function::Same(k) => {
                let ids = eval(scene, nodes, nodes[i].inputs[0]);
                debug_assert_eq!(ids.len(), 1);
                direct::same(scene, ids[0], k)
            }
            _ => unreachable!("run_subject_set on non-set node"),
        }
    }
    eval(scene, nodes, node)
}

fn build_zero_hop(
    scene: &SceneGraph,
    rng: &mut ChaCha8Rng,
    terminal: TerminalPlan,
    variant: u32,
) -> Option<GeneratedQuestion> {
    let all = direct::all_ids(scene);
    let mut prog = ProgramBuilder::default();
    let s = prog.scene();
    let (text, answer, family) = match terminal {
        TerminalPlan::Count { .. } => {
            let spec = RefSpec::sample_free(rng, false);
            let matched = direct::matching(scene, &spec.filters(), &all);
            if matched.is_empty() && spec.shape.is_none() {
                return None;
            }
            let node = prog.filters(s, &spec);
            prog.push(Function::Count, vec![node], vec![]);
            (
                format!("How many {} are there?", spec.phrase(rng, true)),
                Answer::Count(matched.len() as u8),
                0,
            )
        }
        TerminalPlan::Exist { .. } => {
            let spec = RefSpec::sample_free(rng, false);
            let matched = direct::matching(scene, &spec.filters(), &all);
            if matched.is_empty() && spec.shape.is_none() {
                return None;
            }
            let node = prog.filters(s, &spec);
            prog.push(Function::Exist, vec![node], vec![]);
            (
                format!("Are there any {}?", spec.phrase(rng, true)),
                Answer::Binary(!matched.is_empty()),
                1,
            )
        }
        TerminalPlan::Query(k) => {
            let (spec, id) = unique_spec(scene, rng, &all, Some(k))?;
            let mut node = prog.filters(s, &spec);
            node = prog.push(Function::Unique, vec![node], vec![]);
            prog.push(Function::Query(k), vec![node], vec![]);
            let t = if rng.gen_bool(0.5) {
                format!("What {} is the {}?", kind_word(k), spec.phrase(rng, false))
            } else {
                format!("The {} has what {}?", spec.phrase(rng, false), kind_word(k))
            };
            (t, Answer::Attr(scene.objects[id].attribute(k)), 2 + (variant - 2).min(2))
        }
    };
    Some(GeneratedQuestion {
        text,
        program: prog.nodes,
        family_index: family,
        answer,
    })
}

fn build_same_relate(scene: &SceneGraph, rng: &mut ChaCha8Rng) -> Option<GeneratedQuestion> {
    let all = direct::all_ids(scene);
    let same_kind = *[
        AttributeKind::Size,
        AttributeKind::Color,
        AttributeKind::Material,
        AttributeKind::Shape,
    ]
    .choose(rng)
    .unwrap();
    // 7 variants per same-kind: count, count-alt, exist, exist-alt, and the
    // three queries over other kinds.
    let variant = rng.gen_range(0..7u32);
    let (anchor_spec, anchor_id) = unique_spec(scene, rng, &all, None)?;
    let peers = direct::same(scene, anchor_id, same_kind);

    let mut prog = ProgramBuilder::default();
    let s = prog.scene();
    let mut node = prog.filters(s, &anchor_spec);
    node = prog.push(Function::Unique, vec![node], vec![]);
    node = prog.push(Function::Same(same_kind), vec![node], vec![]);

    let same_phrase = format!("the same {} as", kind_word(same_kind));
    let anchor_text = anchor_spec.phrase(rng, false);
    let (text, answer) = match variant {
        0..=3 => {
            let mut spec = RefSpec::sample_free(rng, false);
            // The subject description must not re-filter the shared kind.
            match same_kind {
                AttributeKind::Size => spec.size = None,
                AttributeKind::Color => spec.color = None,
                AttributeKind::Material => spec.material = None,
                AttributeKind::Shape => spec.shape = None,
            }
            let matched = direct::matching(scene, &spec.filters(), &peers);
            if matched.is_empty() && spec.shape.is_none() {
                return None;
            }
            node = prog.filters(node, &spec);
            if variant < 2 {
                prog.push(Function::Count, vec![node], vec![]);
                let t = if variant == 0 {
                    format!(
                        "How many {} have {} the {}?",
                        spec.phrase(rng, true),
                        same_phrase,
                        anchor_text
                    )
                } else {
                    format!(
                        "What number of {} have {} the {}?",
                        spec.phrase(rng, true),
                        same_phrase,
                        anchor_text
                    )
                };
                (t, Answer::Count(matched.len() as u8))
            } else {
                prog.push(Function::Exist, vec![node], vec![]);
                let t = if variant == 2 {
                    format!(
                        "Are there any {} that have {} the {}?",
                        spec.phrase(rng, true),
                        same_phrase,
                        anchor_text
                    )
                } else {
                    format!(
                        "Is there a {} that has {} the {}?",
                        spec.phrase(rng, false),
                        same_phrase,
                        anchor_text
                    )
                };
                (t, Answer::Binary(!matched.is_empty()))
            }
        }
        _ => {
            let kinds: Vec<AttributeKind> = AttributeKind::ALL
                .into_iter()
                .filter(|&k| k != same_kind)
                .collect();
            let query_kind = kinds[(variant - 4) as usize % kinds.len()];
            let (spec, id) = {
                let mut found = None;
                for _ in 0..16 {
                    if let Some((mut spec, id)) = unique_spec(scene, rng, &peers, Some(query_kind)) {
                        match same_kind {
                            AttributeKind::Size => spec.size = None,
                            AttributeKind::Color => spec.color = None,
                            AttributeKind::Material => spec.material = None,
                            AttributeKind::Shape => spec.shape = None,
                        }
                        if spec.filters().is_empty() {
                            continue;
                        }
                        if direct::matching(scene, &spec.filters(), &peers).len() == 1 {
                            found = Some((spec, id));
                            break;
                        }
                    }
                }
                found?
            };
            node = prog.filters(node, &spec);
            node = prog.push(Function::Unique, vec![node], vec![]);
            prog.push(Function::Query(query_kind), vec![node], vec![]);
            let t = format!(
                "What {} is the {} that has {} the {}?",
                kind_word(query_kind),
                spec.phrase(rng, false),
                same_phrase,
                anchor_text
            );
            (t, Answer::Attr(scene.objects[id].attribute(query_kind)))
        }
    };
    let kind_idx = match same_kind {
        AttributeKind::Size => 0,
        AttributeKind::Color => 1,
        AttributeKind::Material => 2,
        AttributeKind::Shape => 3,
    };
    Some(GeneratedQuestion {
        text,
        program: prog.nodes,
        family_index: 32 + kind_idx * 7 + variant,
        answer,
    })
}

fn build_comparison(scene: &SceneGraph, rng: &mut ChaCha8Rng) -> Option<GeneratedQuestion> {
    let all = direct::all_ids(scene);
    let kind = *AttributeKind::ALL.choose(rng).unwrap();
    let (spec_a, id_a) = unique_spec(scene, rng, &all, Some(kind))?;
    let (spec_b, id_b) = unique_spec(scene, rng, &all, Some(kind))?;
    if id_a == id_b {
        return None;
    }
    let mut prog = ProgramBuilder::default();
    let s = prog.scene();
    let mut a = prog.filters(s, &spec_a);
    a = prog.push(Function::Unique, vec![a], vec![]);
    a = prog.push(Function::Query(kind), vec![a], vec![]);
    let mut b = prog.filters(s, &spec_b);
    b = prog.push(Function::Unique, vec![b], vec![]);
    b = prog.push(Function::Query(kind), vec![b], vec![]);
    prog.push(Function::EqualAttr(kind), vec![a, b], vec![]);
    let equal = scene.objects[id_a].attribute(kind) == scene.objects[id_b].attribute(kind);
    let variant = rng.gen_range(0..2u32);
    let text = if variant == 0 {
        format!(
            "Is the {} of the {} the same as the {} of the {}?",
            kind_word(kind),
            spec_a.phrase(rng, false),
            kind_word(kind),
            spec_b.phrase(rng, false)
        )
    } else {
        format!(
            "Do the {} and the {} have the same {}?",
            spec_a.phrase(rng, false),
            spec_b.phrase(rng, false),
            kind_word(kind)
        )
    };
    let kind_idx = match kind {
        AttributeKind::Size => 0,
        AttributeKind::Color => 1,
        AttributeKind::Material => 2,
        AttributeKind::Shape => 3,
    };
    Some(GeneratedQuestion {
        text,
        program: prog.nodes,
        family_index: 60 + kind_idx * 2 + variant,
        answer: Answer::Binary(equal),
    })
}

fn build_compare_integer(scene: &SceneGraph, rng: &mut ChaCha8Rng) -> Option<GeneratedQuestion> {
    let all = direct::all_ids(scene);
    let spec_a = RefSpec::sample_free(rng, true);
    let spec_b = RefSpec::sample_free(rng, true);
    if spec_a == spec_b {
        return None;
    }
    let na = direct::matching(scene, &spec_a.filters(), &all).len() as u8;
    let nb = direct::matching(scene, &spec_b.filters(), &all).len() as u8;
    let variant = rng.gen_range(0..3u32);
    let (op, yes) = match variant {
        0 => (Function::GreaterThan, na > nb),
        1 => (Function::LessThan, na < nb),
        _ => (Function::EqualInteger, na == nb),
    };
    let mut prog = ProgramBuilder::default();
    let s = prog.scene();
    let mut a = prog.filters(s, &spec_a);
    a = prog.push(Function::Count, vec![a], vec![]);
    let mut b = prog.filters(s, &spec_b);
    b = prog.push(Function::Count, vec![b], vec![]);
    prog.push(op, vec![a, b], vec![]);
    let text = match variant {
        0 => format!(
            "Are there more {} than {}?",
            spec_a.phrase(rng, true),
            spec_b.phrase(rng, true)
        ),
        1 => format!(
            "Are there fewer {} than {}?",
            spec_a.phrase(rng, true),
            spec_b.phrase(rng, true)
        ),
        _ => format!(
            "Is the number of {} the same as the number of {}?",
            spec_a.phrase(rng, true),
            spec_b.phrase(rng, true)
        ),
    };
    let sub = rng.gen_range(0..3u32);
    Some(GeneratedQuestion {
        text,
        program: prog.nodes,
        family_index: 69 + variant * 3 + sub,
        answer: Answer::Binary(yes),
    })
}

fn build_single_or(scene: &SceneGraph, rng: &mut ChaCha8Rng) -> Option<GeneratedQuestion> {
    let all = direct::all_ids(scene);
    let spec_a = RefSpec::sample_free(rng, true);
    let spec_b = RefSpec::sample_free(rng, true);
    if spec_a == spec_b {
        return None;
    }
    let ma = direct::matching(scene, &spec_a.filters(), &all);
    let mb = direct::matching(scene, &spec_b.filters(), &all);
    let mut union: Vec<usize> = ma.iter().chain(mb.iter()).copied().collect();
    union.sort_unstable();
    union.dedup();
    let variant = rng.gen_range(0..2u32);
    let mut prog = ProgramBuilder::default();
    let s = prog.scene();
    let a = prog.filters(s, &spec_a);
    let b = prog.filters(s, &spec_b);
    let u = prog.push(Function::Union, vec![a, b], vec![]);
    let (text, answer, fam) = if variant == 0 {
        prog.push(Function::Count, vec![u], vec![]);
        (
            format!(
                "How many things are either {} or {}?",
                spec_a.phrase(rng, true),
                spec_b.phrase(rng, true)
            ),
            Answer::Count(union.len() as u8),
            78 + rng.gen_range(0..3u32),
        )
    } else {
        prog.push(Function::Exist, vec![u], vec![]);
        (
            format!(
                "Are there any things that are either {} or {}?",
                spec_a.phrase(rng, true),
                spec_b.phrase(rng, true)
            ),
            Answer::Binary(!union.is_empty()),
            81 + rng.gen_range(0..3u32),
        )
    };
    Some(GeneratedQuestion {
        text,
        program: prog.nodes,
        family_index: fam,
        answer,
    })
}

fn build_single_and(scene: &SceneGraph, rng: &mut ChaCha8Rng) -> Option<GeneratedQuestion> {
    let all = direct::all_ids(scene);
    let (spec_a, id_a) = unique_spec(scene, rng, &all, None)?;
    let (spec_b, id_b) = unique_spec(scene, rng, &all, None)?;
    if id_a == id_b {
        return None;
    }
    let d_a = *Direction::ALL.choose(rng).unwrap();
    let d_b = *Direction::ALL.choose(rng).unwrap();
    let ra = direct::related(scene, id_a, d_a);
    let rb = direct::related(scene, id_b, d_b);
    let inter: Vec<usize> = ra.iter().copied().filter(|id| rb.contains(id)).collect();
    let subject = RefSpec::sample_free(rng, true);
    let matched = direct::matching(scene, &subject.filters(), &inter);
    let mut prog = ProgramBuilder::default();
    let s = prog.scene();
    let mut a = prog.filters(s, &spec_a);
    a = prog.push(Function::Unique, vec![a], vec![]);
    a = prog.push(Function::Relate, vec![a], vec![ValueInput::Dir(d_a)]);
    let mut b = prog.filters(s, &spec_b);
    b = prog.push(Function::Unique, vec![b], vec![]);
    b = prog.push(Function::Relate, vec![b], vec![ValueInput::Dir(d_b)]);
    let i = prog.push(Function::Intersect, vec![a, b], vec![]);
    let node = prog.filters(i, &subject);
    let variant = rng.gen_range(0..2u32);
    let (text, answer, fam) = if variant == 0 {
        prog.push(Function::Count, vec![node], vec![]);
        (
            format!(
                "How many {} are both {} the {} and {} the {}?",
                subject.phrase(rng, true),
                dir_phrase(d_a),
                spec_a.phrase(rng, false),
                dir_phrase(d_b),
                spec_b.phrase(rng, false)
            ),
            Answer::Count(matched.len() as u8),
            84 + rng.gen_range(0..3u32),
        )
    } else {
        prog.push(Function::Exist, vec![node], vec![]);
        (
            format!(
                "Is there a {} that is both {} the {} and {} the {}?",
                subject.phrase(rng, false),
                dir_phrase(d_a),
                spec_a.phrase(rng, false),
                dir_phrase(d_b),
                spec_b.phrase(rng, false)
            ),
            Answer::Binary(!matched.is_empty()),
            87 + rng.gen_range(0..3u32),
        )
    };
    Some(GeneratedQuestion {
        text,
        program: prog.nodes,
        family_index: fam,
        answer,
    })
}

fn build_question(
    scene: &SceneGraph,
    rng: &mut ChaCha8Rng,
    qtype: QuestionType,
) -> Option<GeneratedQuestion> {
    match qtype {
        QuestionType::ZeroHop => {
            let v = rng.gen_range(0..6);
            build_hop(scene, rng, 0, v)
        }
        QuestionType::OneHop => {
            let v = rng.gen_range(0..8);
            build_hop(scene, rng, 1, v)
        }
        QuestionType::TwoHop => {
            let v = rng.gen_range(0..8);
            build_hop(scene, rng, 2, v)
        }
        QuestionType::ThreeHop => {
            let v = rng.gen_range(0..8);
            build_hop(scene, rng, 3, v)
        }
        QuestionType::SameRelate => build_same_relate(scene, rng),
        QuestionType::Comparison => build_comparison(scene, rng),
        QuestionType::CompareInteger => build_compare_integer(scene, rng),
        QuestionType::SingleOr => build_single_or(scene, rng),
        QuestionType::SingleAnd => build_single_and(scene, rng),
    }
}

/// Question-type sampling weights, tuned so corpus-level explanation length
/// statistics sit near the target envelope.
const TYPE_WEIGHTS: [(QuestionType, u32); 9] = [
    (QuestionType::ZeroHop, 4),
    (QuestionType::OneHop, 11),
    (QuestionType::TwoHop, 18),
    (QuestionType::ThreeHop, 20),
    (QuestionType::SameRelate, 11),
    (QuestionType::Comparison, 6),
    (QuestionType::CompareInteger, 7),
    (QuestionType::SingleOr, 8),
    (QuestionType::SingleAnd, 15),
];

fn sample_type(rng: &mut ChaCha8Rng) -> QuestionType {
    let total: u32 = TYPE_WEIGHTS.iter().map(|&(_, w)| w).sum();
    let mut pick = rng.gen_range(0..total);
    for &(t, w) in &TYPE_WEIGHTS {
        if pick < w {
            return t;
        }
        pick -= w;
    }
    QuestionType::ZeroHop
}

/// A deliberately malformed question: two parallel chains where the root only
/// consumes one, leaving unreachable nodes.
fn build_malformed(scene: &SceneGraph, rng: &mut ChaCha8Rng) -> GeneratedQuestion {
    let mut prog = ProgramBuilder::default();
    let s = prog.scene();
    let spec = RefSpec::sample_free(rng, true);
    let a = prog.filters(s, &spec);
    let orphan_spec = RefSpec::sample_free(rng, true);
    let s2 = prog.scene();
    let _orphan = prog.filters(s2, &orphan_spec);
    // Root consumes only the first chain; re-order so the count is last.
    prog.push(Function::Count, vec![a], vec![]);
    let n = direct::matching(scene, &spec.filters(), &direct::all_ids(scene)).len() as u8;
    GeneratedQuestion {
        text: format!("How many {} are there?", spec.phrase(rng, true)),
        program: prog.nodes,
        family_index: 0,
        answer: Answer::Count(n),
    }
}

/// Generate a full dataset: scenes plus questions (with shipped answers).
/// Deterministic for a fixed config.
pub fn generate_dataset(cfg: &GenConfig) -> (Vec<SceneGraph>, Vec<Question>) {
    let mut scenes = Vec::with_capacity(cfg.num_images);
    for image_index in 0..cfg.num_images as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (0x5CE_u64 << 40) ^ image_index);
        scenes.push(generate_scene(image_index, &mut rng));
    }
    let mut questions = Vec::with_capacity(cfg.num_images * cfg.questions_per_image);
    let mut question_index = 0u64;
    for scene in &scenes {
        let mut rng =
            ChaCha8Rng::seed_from_u64(cfg.seed ^ (0x9E5_u64 << 40) ^ scene.image_index);
        for _ in 0..cfg.questions_per_image {
            let gq = loop {
                let qtype = sample_type(&mut rng);
                if let Some(gq) = build_question(scene, &mut rng, qtype) {
                    break gq;
                }
            };
            questions.push(Question {
                question_index,
                image_index: scene.image_index,
                text: gq.text,
                program: gq.program,
                family_index: gq.family_index,
                question_type: QuestionType::from_family_index(gq.family_index)
                    .expect("generated families are in range"),
                answer: Some(gq.answer),
            });
            question_index += 1;
        }
    }
    // Inject malformed programs at evenly spread positions.
    if cfg.malformed > 0 && !questions.is_empty() {
        let stride = (questions.len() / cfg.malformed).max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (0xBAD_u64 << 40));
        for m in 0..cfg.malformed {
            let pos = (m * stride + stride / 2).min(questions.len() - 1);
            let scene = &scenes[(questions[pos].image_index) as usize];
            let gq = build_malformed(scene, &mut rng);
            let q = Question {
                question_index: questions[pos].question_index,
                image_index: questions[pos].image_index,
                text: gq.text,
                program: gq.program,
                family_index: gq.family_index,
                question_type: QuestionType::ZeroHop,
                answer: Some(gq.answer),
            };
            questions[pos] = q;
        }
        // Re-number so indices stay unique and ordered.
        for (i, q) in questions.iter_mut().enumerate() {
            q.question_index = i as u64;
        }
    }
    (scenes, questions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::validate_program;
    use crate::interpreter::evaluate;

    #[test]
    fn scenes_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for i in 0..50 {
            let scene = generate_scene(i, &mut rng);
            scene.validate().unwrap();
        }
    }

    #[test]
    fn generated_programs_validate_and_match_direct_answers() {
        let cfg = GenConfig {
            num_images: 30,
            questions_per_image: 8,
            seed: 11,
            malformed: 0,
        };
        let (scenes, questions) = generate_dataset(&cfg);
        assert_eq!(questions.len(), 240);
        for q in &questions {
            validate_program(&q.program).unwrap();
            let scene = &scenes[q.image_index as usize];
            let (answer, _) = evaluate(&q.program, scene).unwrap();
            assert_eq!(Some(answer), q.answer, "question {}: {}", q.question_index, q.text);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig {
            num_images: 5,
            questions_per_image: 4,
            seed: 3,
            malformed: 1,
        };
        let a = generate_dataset(&cfg);
        let b = generate_dataset(&cfg);
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn malformed_injection_is_rejected_by_validation() {
        let cfg = GenConfig {
            num_images: 10,
            questions_per_image: 5,
            seed: 5,
            malformed: 4,
        };
        let (_, questions) = generate_dataset(&cfg);
        let bad: Vec<_> = questions
            .iter()
            .filter(|q| validate_program(&q.program).is_err())
            .collect();
        assert_eq!(bad.len(), 4);
        for q in bad {
            assert_eq!(
                validate_program(&q.program),
                Err(crate::ingest::ProgramError::DisconnectedProgram)
            );
        }
    }

    #[test]
    fn all_question_types_are_produced() {
        let cfg = GenConfig {
            num_images: 60,
            questions_per_image: 6,
            seed: 2,
            malformed: 0,
        };
        let (_, questions) = generate_dataset(&cfg);
        let mut seen = std::collections::BTreeSet::new();
        for q in &questions {
            seen.insert(q.question_type);
        }
        assert_eq!(seen.len(), 9);
    }
}
