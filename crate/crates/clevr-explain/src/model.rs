//! Closed-vocabulary domain types shared by every other module.
//!
//! The attribute space is fixed: 2 sizes x 8 colors x 2 materials x 3 shapes
//! (96 combinations). All modules store canonical tokens; only the realizer
//! emits synonyms, drawn from the table in this module.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Size {
    Small,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Color {
    Gray,
    Red,
    Blue,
    Green,
    Brown,
    Purple,
    Cyan,
    Yellow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Material {
    Rubber,
    Metal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Shape {
    Cube,
    Sphere,
    Cylinder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttributeKind {
    Size,
    Color,
    Material,
    Shape,
}

impl AttributeKind {
    pub const ALL: [AttributeKind; 4] = [
        AttributeKind::Size,
        AttributeKind::Color,
        AttributeKind::Material,
        AttributeKind::Shape,
    ];

    pub fn token(self) -> &'static str {
        match self {
            AttributeKind::Size => "size",
            AttributeKind::Color => "color",
            AttributeKind::Material => "material",
            AttributeKind::Shape => "shape",
        }
    }

    pub fn from_token(t: &str) -> Option<Self> {
        match t {
            "size" => Some(AttributeKind::Size),
            "color" => Some(AttributeKind::Color),
            "material" => Some(AttributeKind::Material),
            "shape" => Some(AttributeKind::Shape),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttributeValue {
    Size(Size),
    Color(Color),
    Material(Material),
    Shape(Shape),
}

pub const SIZES: [Size; 2] = [Size::Small, Size::Large];
pub const COLORS: [Color; 8] = [
    Color::Gray,
    Color::Red,
    Color::Blue,
    Color::Green,
    Color::Brown,
    Color::Purple,
    Color::Cyan,
    Color::Yellow,
];
pub const MATERIALS: [Material; 2] = [Material::Rubber, Material::Metal];
pub const SHAPES: [Shape; 3] = [Shape::Cube, Shape::Sphere, Shape::Cylinder];

impl AttributeValue {
    pub fn kind(self) -> AttributeKind {
        match self {
            AttributeValue::Size(_) => AttributeKind::Size,
            AttributeValue::Color(_) => AttributeKind::Color,
            AttributeValue::Material(_) => AttributeKind::Material,
            AttributeValue::Shape(_) => AttributeKind::Shape,
        }
    }

    /// Canonical surface token for this value.
    pub fn token(self) -> &'static str {
        self.synonyms()[0]
    }

    /// Canonical token first, synonyms after. Only the realizer should pick a
    /// non-canonical entry.
    pub fn synonyms(self) -> &'static [&'static str] {
        match self {
            AttributeValue::Size(Size::Small) => &["small", "tiny"],
            AttributeValue::Size(Size::Large) => &["large", "big"],
            AttributeValue::Color(Color::Gray) => &["gray"],
            AttributeValue::Color(Color::Red) => &["red"],
            AttributeValue::Color(Color::Blue) => &["blue"],
            AttributeValue::Color(Color::Green) => &["green"],
            AttributeValue::Color(Color::Brown) => &["brown"],
            AttributeValue::Color(Color::Purple) => &["purple"],
            AttributeValue::Color(Color::Cyan) => &["cyan"],
            AttributeValue::Color(Color::Yellow) => &["yellow"],
            AttributeValue::Material(Material::Rubber) => &["rubber", "matte"],
            AttributeValue::Material(Material::Metal) => &["metal", "metallic", "shiny"],
            AttributeValue::Shape(Shape::Cube) => &["cube", "block"],
            AttributeValue::Shape(Shape::Sphere) => &["sphere", "ball"],
            AttributeValue::Shape(Shape::Cylinder) => &["cylinder"],
        }
    }

    /// Canonicalize any known surface token (synonyms included).
    pub fn from_token(t: &str) -> Option<Self> {
        let all = SIZES
            .iter()
            .map(|&s| AttributeValue::Size(s))
            .chain(COLORS.iter().map(|&c| AttributeValue::Color(c)))
            .chain(MATERIALS.iter().map(|&m| AttributeValue::Material(m)))
            .chain(SHAPES.iter().map(|&s| AttributeValue::Shape(s)));
        for v in all {
            if v.synonyms().contains(&t) {
                return Some(v);
            }
        }
        None
    }

    pub fn all_values() -> Vec<AttributeValue> {
        SIZES
            .iter()
            .map(|&s| AttributeValue::Size(s))
            .chain(COLORS.iter().map(|&c| AttributeValue::Color(c)))
            .chain(MATERIALS.iter().map(|&m| AttributeValue::Material(m)))
            .chain(SHAPES.iter().map(|&s| AttributeValue::Shape(s)))
            .collect()
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Plural of a shape surface token ("cube" -> "cubes").
pub fn pluralize_shape(token: &str) -> String {
    format!("{token}s")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Left,
    Right,
    Front,
    Behind,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Left,
        Direction::Right,
        Direction::Front,
        Direction::Behind,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::Front => "front",
            Direction::Behind => "behind",
        }
    }

    pub fn from_token(t: &str) -> Option<Self> {
        match t {
            "left" => Some(Direction::Left),
            "right" => Some(Direction::Right),
            "front" => Some(Direction::Front),
            "behind" => Some(Direction::Behind),
            _ => None,
        }
    }

    pub fn inverse(self) -> Self {
        match self {
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
            Direction::Front => Direction::Behind,
            Direction::Behind => Direction::Front,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: usize,
    pub size: Size,
    pub color: Color,
    pub material: Material,
    pub shape: Shape,
    pub position: Option<[f64; 3]>,
}

impl SceneObject {
    pub fn attribute(&self, kind: AttributeKind) -> AttributeValue {
        match kind {
            AttributeKind::Size => AttributeValue::Size(self.size),
            AttributeKind::Color => AttributeValue::Color(self.color),
            AttributeKind::Material => AttributeValue::Material(self.material),
            AttributeKind::Shape => AttributeValue::Shape(self.shape),
        }
    }

    pub fn has(&self, value: AttributeValue) -> bool {
        self.attribute(value.kind()) == value
    }
}

/// Per-direction relation lists: `related[d][i]` holds the ids of all objects
/// lying in direction `d` of object `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relations {
    pub left: Vec<Vec<usize>>,
    pub right: Vec<Vec<usize>>,
    pub front: Vec<Vec<usize>>,
    pub behind: Vec<Vec<usize>>,
}

impl Relations {
    pub fn get(&self, d: Direction) -> &Vec<Vec<usize>> {
        match d {
            Direction::Left => &self.left,
            Direction::Right => &self.right,
            Direction::Front => &self.front,
            Direction::Behind => &self.behind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub image_index: u64,
    pub objects: Vec<SceneObject>,
    pub relations: Relations,
}

pub const MIN_OBJECTS: usize = 3;
pub const MAX_OBJECTS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("unknown attribute token `{token}` for {field}")]
    UnknownAttribute { token: String, field: &'static str },
    #[error("relation asymmetry: {0}")]
    RelationAsymmetry(String),
    #[error("object count {0} outside [{MIN_OBJECTS}, {MAX_OBJECTS}]")]
    ObjectCountOutOfRange(usize),
}

impl SceneGraph {
    /// Check all scene invariants: object count bounds, irreflexive relations,
    /// and mutual-inverse direction pairs covering every ordered object pair.
    pub fn validate(&self) -> Result<(), SceneError> {
        let n = self.objects.len();
        if !(MIN_OBJECTS..=MAX_OBJECTS).contains(&n) {
            return Err(SceneError::ObjectCountOutOfRange(n));
        }
        for d in Direction::ALL {
            let lists = self.relations.get(d);
            if lists.len() != n {
                return Err(SceneError::RelationAsymmetry(format!(
                    "direction {} has {} lists for {} objects",
                    d.token(),
                    lists.len(),
                    n
                )));
            }
            for (i, list) in lists.iter().enumerate() {
                for &j in list {
                    if j >= n {
                        return Err(SceneError::RelationAsymmetry(format!(
                            "object id {j} out of range in {} list of {i}",
                            d.token()
                        )));
                    }
                    if j == i {
                        return Err(SceneError::RelationAsymmetry(format!(
                            "object {i} related to itself in {}",
                            d.token()
                        )));
                    }
                }
            }
        }
        // left/right and front/behind must be exact inverses and each inverse
        // pair must cover every ordered object pair exactly once.
        for (da, db) in [
            (Direction::Left, Direction::Right),
            (Direction::Front, Direction::Behind),
        ] {
            let a = self.relations.get(da);
            let b = self.relations.get(db);
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let in_a = a[i].contains(&j);
                    let in_b = b[j].contains(&i);
                    if in_a != in_b {
                        return Err(SceneError::RelationAsymmetry(format!(
                            "{}/{} not inverse for pair ({i}, {j})",
                            da.token(),
                            db.token()
                        )));
                    }
                    let in_a_rev = a[j].contains(&i);
                    if in_a == in_a_rev {
                        return Err(SceneError::RelationAsymmetry(format!(
                            "pair ({i}, {j}) not in exactly one of {}/{}",
                            da.token(),
                            db.token()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

impl SceneGraph {
    /// Build a scene from positioned objects, deriving the four relation lists
    /// from coordinates (x axis: left/right, y axis: front/behind). Every
    /// object needs a position with coordinates distinct on both axes.
    pub fn from_objects(image_index: u64, objects: Vec<SceneObject>) -> SceneGraph {
        let n = objects.len();
        let pos = |o: &SceneObject| o.position.expect("from_objects requires positions");
        let mut relations = Relations {
            left: vec![Vec::new(); n],
            right: vec![Vec::new(); n],
            front: vec![Vec::new(); n],
            behind: vec![Vec::new(); n],
        };
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (pi, pj) = (pos(&objects[i]), pos(&objects[j]));
                if pj[0] < pi[0] {
                    relations.left[i].push(j);
                } else {
                    relations.right[i].push(j);
                }
                if pj[1] < pi[1] {
                    relations.front[i].push(j);
                } else {
                    relations.behind[i].push(j);
                }
            }
        }
        SceneGraph {
            image_index,
            objects,
            relations,
        }
    }
}

/// The function catalog. Filter/relate carry one value input, everything else
/// carries none; arities are checked in `ingest::validate_program`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Function {
    Scene,
    Filter(AttributeKind),
    Relate,
    Same(AttributeKind),
    Unique,
    Union,
    Intersect,
    Count,
    Exist,
    Query(AttributeKind),
    EqualAttr(AttributeKind),
    EqualInteger,
    LessThan,
    GreaterThan,
}

impl Function {
    pub fn name(self) -> String {
        match self {
            Function::Scene => "scene".into(),
            Function::Filter(k) => format!("filter_{}", k.token()),
            Function::Relate => "relate".into(),
            Function::Same(k) => format!("same_{}", k.token()),
            Function::Unique => "unique".into(),
            Function::Union => "union".into(),
            Function::Intersect => "intersect".into(),
            Function::Count => "count".into(),
            Function::Exist => "exist".into(),
            Function::Query(k) => format!("query_{}", k.token()),
            Function::EqualAttr(k) => format!("equal_{}", k.token()),
            Function::EqualInteger => "equal_integer".into(),
            Function::LessThan => "less_than".into(),
            Function::GreaterThan => "greater_than".into(),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        if let Some(k) = name.strip_prefix("filter_").and_then(AttributeKind::from_token) {
            return Some(Function::Filter(k));
        }
        if let Some(k) = name.strip_prefix("same_").and_then(AttributeKind::from_token) {
            return Some(Function::Same(k));
        }
        if let Some(k) = name.strip_prefix("query_").and_then(AttributeKind::from_token) {
            return Some(Function::Query(k));
        }
        match name {
            "scene" => Some(Function::Scene),
            "relate" => Some(Function::Relate),
            "unique" => Some(Function::Unique),
            "union" => Some(Function::Union),
            "intersect" => Some(Function::Intersect),
            "count" => Some(Function::Count),
            "exist" => Some(Function::Exist),
            "equal_size" => Some(Function::EqualAttr(AttributeKind::Size)),
            "equal_color" => Some(Function::EqualAttr(AttributeKind::Color)),
            "equal_material" => Some(Function::EqualAttr(AttributeKind::Material)),
            "equal_shape" => Some(Function::EqualAttr(AttributeKind::Shape)),
            "equal_integer" => Some(Function::EqualInteger),
            "less_than" => Some(Function::LessThan),
            "greater_than" => Some(Function::GreaterThan),
            _ => None,
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Function::Scene => 0,
            Function::Filter(_)
            | Function::Relate
            | Function::Same(_)
            | Function::Unique
            | Function::Count
            | Function::Exist
            | Function::Query(_) => 1,
            Function::Union
            | Function::Intersect
            | Function::EqualAttr(_)
            | Function::EqualInteger
            | Function::LessThan
            | Function::GreaterThan => 2,
        }
    }

    pub fn value_input_count(self) -> usize {
        match self {
            Function::Filter(_) | Function::Relate => 1,
            _ => 0,
        }
    }
}

/// A literal argument of a program node: an attribute token or a direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValueInput {
    Attr(AttributeValue),
    Dir(Direction),
}

impl ValueInput {
    pub fn token(self) -> &'static str {
        match self {
            ValueInput::Attr(a) => a.token(),
            ValueInput::Dir(d) => d.token(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionNode {
    pub function: Function,
    pub inputs: Vec<usize>,
    pub value_inputs: Vec<ValueInput>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuestionType {
    ZeroHop,
    OneHop,
    TwoHop,
    ThreeHop,
    SameRelate,
    Comparison,
    CompareInteger,
    SingleOr,
    SingleAnd,
}

pub const NUM_FAMILIES: u32 = 90;

impl QuestionType {
    pub const ALL: [QuestionType; 9] = [
        QuestionType::ZeroHop,
        QuestionType::OneHop,
        QuestionType::TwoHop,
        QuestionType::ThreeHop,
        QuestionType::SameRelate,
        QuestionType::Comparison,
        QuestionType::CompareInteger,
        QuestionType::SingleOr,
        QuestionType::SingleAnd,
    ];

    pub fn token(self) -> &'static str {
        match self {
            QuestionType::ZeroHop => "zero_hop",
            QuestionType::OneHop => "one_hop",
            QuestionType::TwoHop => "two_hop",
            QuestionType::ThreeHop => "three_hop",
            QuestionType::SameRelate => "same_relate",
            QuestionType::Comparison => "comparison",
            QuestionType::CompareInteger => "compare_integer",
            QuestionType::SingleOr => "single_or",
            QuestionType::SingleAnd => "single_and",
        }
    }

    pub fn from_token(t: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|q| q.token() == t)
    }

    /// Question type is a deterministic function of the family index. The 90
    /// families partition into contiguous ranges, one per type.
    pub fn from_family_index(family: u32) -> Option<Self> {
        match family {
            0..=4 => Some(QuestionType::ZeroHop),
            5..=13 => Some(QuestionType::OneHop),
            14..=22 => Some(QuestionType::TwoHop),
            23..=31 => Some(QuestionType::ThreeHop),
            32..=59 => Some(QuestionType::SameRelate),
            60..=68 => Some(QuestionType::Comparison),
            69..=77 => Some(QuestionType::CompareInteger),
            78..=83 => Some(QuestionType::SingleOr),
            84..=89 => Some(QuestionType::SingleAnd),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub question_index: u64,
    pub image_index: u64,
    pub text: String,
    pub program: Vec<FunctionNode>,
    pub family_index: u32,
    pub question_type: QuestionType,
    /// Ground-truth answer shipped with the question file, when present.
    pub answer: Option<Answer>,
}

pub const MAX_COUNT: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Answer {
    Binary(bool),
    Count(u8),
    Attr(AttributeValue),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnswerType {
    Binary,
    Counting,
    Attribute,
}

impl AnswerType {
    pub const ALL: [AnswerType; 3] = [AnswerType::Binary, AnswerType::Counting, AnswerType::Attribute];

    pub fn token(self) -> &'static str {
        match self {
            AnswerType::Binary => "binary",
            AnswerType::Counting => "counting",
            AnswerType::Attribute => "attribute",
        }
    }
}

impl Answer {
    pub fn token(self) -> String {
        match self {
            Answer::Binary(true) => "yes".into(),
            Answer::Binary(false) => "no".into(),
            Answer::Count(n) => n.to_string(),
            Answer::Attr(a) => a.token().into(),
        }
    }

    pub fn from_token(t: &str) -> Option<Self> {
        match t {
            "yes" => Some(Answer::Binary(true)),
            "no" => Some(Answer::Binary(false)),
            _ => {
                if let Ok(n) = t.parse::<u8>() {
                    if n <= MAX_COUNT {
                        return Some(Answer::Count(n));
                    }
                    return None;
                }
                AttributeValue::from_token(t).map(Answer::Attr)
            }
        }
    }

    /// All 28 surface forms: 2 binary + 11 counts + 15 attribute values.
    pub fn all_surface_forms() -> Vec<Answer> {
        let mut out = vec![Answer::Binary(true), Answer::Binary(false)];
        out.extend((0..=MAX_COUNT).map(Answer::Count));
        out.extend(AttributeValue::all_values().into_iter().map(Answer::Attr));
        out
    }
}

/// The paper's three-way answer grouping used for metric breakdowns.
pub fn classify_answer(answer: Answer) -> AnswerType {
    match answer {
        Answer::Binary(_) => AnswerType::Binary,
        Answer::Count(_) => AnswerType::Counting,
        Answer::Attr(_) => AnswerType::Attribute,
    }
}

/// Evidence role: anchors that build the question reference vs. the objects
/// the question is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvidenceRole {
    QuestionBuilding,
    QuestionSubject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub object_id: usize,
    pub role: EvidenceRole,
    /// Canonical attribute tokens this object must surface with (question-named
    /// properties plus the shape noun; the queried property is added by the
    /// explanation planner for attribute answers).
    pub attributes: Vec<AttributeValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StepOutput {
    Set(Vec<usize>),
    Object(usize),
    Integer(u8),
    Boolean(bool),
    Attribute(AttributeValue),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub node_index: usize,
    pub function: Function,
    pub output: StepOutput,
}

/// Ordered evidence record of filter/relate/same-property outputs produced
/// during program evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
    pub evidence: Vec<EvidenceRecord>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn attribute_space_has_96_combinations() {
        let combos = SIZES.len() * COLORS.len() * MATERIALS.len() * SHAPES.len();
        assert_eq!(combos, 96);
    }

    #[test]
    fn answer_surface_forms_cardinality_is_28() {
        let forms = Answer::all_surface_forms();
        assert_eq!(forms.len(), 28);
        let tokens: BTreeSet<String> = forms.iter().map(|a| a.token()).collect();
        assert_eq!(tokens.len(), 28);
    }

    #[test]
    fn classify_answer_partitions_2_11_15() {
        let forms = Answer::all_surface_forms();
        let count = |t: AnswerType| forms.iter().filter(|&&a| classify_answer(a) == t).count();
        assert_eq!(count(AnswerType::Binary), 2);
        assert_eq!(count(AnswerType::Counting), 11);
        assert_eq!(count(AnswerType::Attribute), 15);
    }

    #[test]
    fn classify_answer_examples() {
        assert_eq!(classify_answer(Answer::Binary(true)), AnswerType::Binary);
        assert_eq!(classify_answer(Answer::Count(0)), AnswerType::Counting);
        assert_eq!(
            classify_answer(Answer::Attr(AttributeValue::Color(Color::Cyan))),
            AnswerType::Attribute
        );
    }

    #[test]
    fn canonicalization_maps_synonyms() {
        assert_eq!(
            AttributeValue::from_token("block"),
            Some(AttributeValue::Shape(Shape::Cube))
        );
        assert_eq!(
            AttributeValue::from_token("shiny"),
            Some(AttributeValue::Material(Material::Metal))
        );
        assert_eq!(
            AttributeValue::from_token("tiny"),
            Some(AttributeValue::Size(Size::Small))
        );
        assert_eq!(AttributeValue::from_token("pink"), None);
    }

    #[test]
    fn function_name_round_trip() {
        let fns = [
            Function::Scene,
            Function::Filter(AttributeKind::Color),
            Function::Relate,
            Function::Same(AttributeKind::Size),
            Function::Unique,
            Function::Union,
            Function::Intersect,
            Function::Count,
            Function::Exist,
            Function::Query(AttributeKind::Material),
            Function::EqualAttr(AttributeKind::Shape),
            Function::EqualInteger,
            Function::LessThan,
            Function::GreaterThan,
        ];
        for f in fns {
            assert_eq!(Function::from_name(&f.name()), Some(f));
        }
    }

    #[test]
    fn family_index_covers_all_types() {
        let mut seen = BTreeSet::new();
        for fam in 0..NUM_FAMILIES {
            seen.insert(QuestionType::from_family_index(fam).unwrap());
        }
        assert_eq!(seen.len(), 9);
        assert_eq!(QuestionType::from_family_index(90), None);
    }
}
