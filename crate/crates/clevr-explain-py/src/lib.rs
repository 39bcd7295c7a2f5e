//! Python bindings: scenes, questions, the traced interpreter, explanation
//! generation, probes, NLG metrics, and corpus statistics.

use clevr_explain::explainer;
use clevr_explain::gen::{generate_dataset, GenConfig};
use clevr_explain::ingest;
use clevr_explain::interpreter;
use clevr_explain::metrics;
use clevr_explain::model;
use clevr_explain::probes;
use clevr_explain::stats;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A validated scene graph.
#[pyclass(name = "Scene")]
#[derive(Clone)]
struct PyScene {
    inner: model::SceneGraph,
}

#[pymethods]
impl PyScene {
    #[getter]
    fn image_index(&self) -> u64 {
        self.inner.image_index
    }

    #[getter]
    fn num_objects(&self) -> usize {
        self.inner.objects.len()
    }

    /// Object attribute tuples as (size, color, material, shape) strings.
    fn objects(&self) -> Vec<(String, String, String, String)> {
        self.inner
            .objects
            .iter()
            .map(|o| {
                (
                    o.attribute(model::AttributeKind::Size).token().to_string(),
                    o.attribute(model::AttributeKind::Color).token().to_string(),
                    o.attribute(model::AttributeKind::Material)
                        .token()
                        .to_string(),
                    o.attribute(model::AttributeKind::Shape).token().to_string(),
                )
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Scene(image_index={}, num_objects={})",
            self.inner.image_index,
            self.inner.objects.len()
        )
    }
}

/// A parsed question with its validated functional program.
#[pyclass(name = "Question")]
#[derive(Clone)]
struct PyQuestion {
    inner: model::Question,
}

#[pymethods]
impl PyQuestion {
    #[getter]
    fn question_index(&self) -> u64 {
        self.inner.question_index
    }

    #[getter]
    fn image_index(&self) -> u64 {
        self.inner.image_index
    }

    #[getter]
    fn text(&self) -> String {
        self.inner.text.clone()
    }

    #[getter]
    fn question_type(&self) -> String {
        self.inner.question_type.token().to_string()
    }

    #[getter]
    fn answer(&self) -> Option<String> {
        self.inner.answer.map(|a| a.token())
    }

    #[getter]
    fn program_len(&self) -> usize {
        self.inner.program.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Question(question_index={}, type={}, text={:?})",
            self.inner.question_index,
            self.inner.question_type.token(),
            self.inner.text
        )
    }
}

/// Parse a CLEVR-layout scene JSON string.
#[pyfunction]
fn parse_scenes(json: &str) -> PyResult<Vec<PyScene>> {
    Ok(ingest::parse_scenes(json.as_bytes())
        .map_err(err)?
        .into_iter()
        .map(|inner| PyScene { inner })
        .collect())
}

/// Parse a CLEVR-layout question JSON string.
/// Returns (questions, skipped) where skipped is a list of
/// (question_index, reason) for rejected entries.
#[pyfunction]
fn parse_questions(json: &str) -> PyResult<(Vec<PyQuestion>, Vec<(u64, String)>)> {
    let parsed = ingest::parse_questions(json.as_bytes()).map_err(err)?;
    Ok((
        parsed
            .questions
            .into_iter()
            .map(|inner| PyQuestion { inner })
            .collect(),
        parsed
            .skipped
            .into_iter()
            .map(|s| (s.question_index, s.reason))
            .collect(),
    ))
}

/// Synthesize a deterministic dataset of scenes and questions.
#[pyfunction]
#[pyo3(signature = (num_images, questions_per_image, seed=2021, malformed=0))]
fn synth_dataset(
    num_images: usize,
    questions_per_image: usize,
    seed: u64,
    malformed: usize,
) -> (Vec<PyScene>, Vec<PyQuestion>) {
    let (scenes, questions) = generate_dataset(&GenConfig {
        num_images,
        questions_per_image,
        seed,
        malformed,
    });
    (
        scenes.into_iter().map(|inner| PyScene { inner }).collect(),
        questions
            .into_iter()
            .map(|inner| PyQuestion { inner })
            .collect(),
    )
}

/// Execute a question's program against a scene; returns the answer token.
#[pyfunction]
fn answer(question: &PyQuestion, scene: &PyScene) -> PyResult<String> {
    let (a, _) = interpreter::evaluate(&question.inner.program, &scene.inner).map_err(err)?;
    Ok(a.token())
}

/// Generate up to `max_explanations` distinct explanation texts.
#[pyfunction]
#[pyo3(signature = (question, scene, seed=2021, max_explanations=10))]
fn explanations(
    question: &PyQuestion,
    scene: &PyScene,
    seed: u64,
    max_explanations: usize,
) -> PyResult<Vec<String>> {
    Ok(
        explainer::generate(&question.inner, &scene.inner, seed, max_explanations)
            .map_err(err)?
            .into_iter()
            .map(|e| e.text)
            .collect(),
    )
}

/// Build a completeness probe; returns a dict with true_text, foil_text and
/// foil_position.
#[pyfunction]
#[pyo3(signature = (question, scene, seed=2021))]
fn completeness_probe<'py>(
    py: Python<'py>,
    question: &PyQuestion,
    scene: &PyScene,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let record = probes::make_incomplete(&question.inner, &scene.inner, seed).map_err(err)?;
    let d = PyDict::new_bound(py);
    d.set_item("question_index", record.question_index)?;
    d.set_item("true_text", record.true_text)?;
    d.set_item("foil_text", record.foil_text)?;
    d.set_item("foil_position", record.foil_position)?;
    Ok(d)
}

/// Score candidates against multi-reference sets; returns a dict of the four
/// corpus metrics (×100 scale, CIDEr ×1000).
#[pyfunction]
fn score<'py>(
    py: Python<'py>,
    candidates: Vec<String>,
    references: Vec<Vec<String>>,
) -> PyResult<Bound<'py, PyDict>> {
    if candidates.len() != references.len() {
        return Err(PyValueError::new_err(
            "candidates and references must have equal length",
        ));
    }
    let instances: Vec<metrics::EvalInstance> = candidates
        .iter()
        .zip(&references)
        .map(|(c, refs)| {
            metrics::EvalInstance::new(
                metrics::tokenize(c),
                refs.iter().map(|r| metrics::tokenize(r)).collect(),
            )
        })
        .collect();
    let d = PyDict::new_bound(py);
    d.set_item("bleu4", metrics::bleu4(&instances))?;
    d.set_item("meteor", metrics::meteor(&instances))?;
    d.set_item("rouge_l", metrics::rouge_l(&instances))?;
    d.set_item("cider", metrics::cider(&instances).corpus)?;
    Ok(d)
}

/// Corpus statistics for parallel lists of question texts and explanation
/// sets; returns a dict of the headline numbers.
#[pyfunction]
fn corpus_stats<'py>(
    py: Python<'py>,
    question_texts: Vec<String>,
    explanation_sets: Vec<Vec<String>>,
) -> PyResult<Bound<'py, PyDict>> {
    if question_texts.len() != explanation_sets.len() {
        return Err(PyValueError::new_err(
            "question_texts and explanation_sets must have equal length",
        ));
    }
    let records: Vec<metrics::GroundTruthRecord> = explanation_sets
        .into_iter()
        .enumerate()
        .map(|(i, explanations)| metrics::GroundTruthRecord {
            question_index: i as u64,
            image_index: i as u64,
            answer: String::new(),
            explanations,
            question_type: None,
        })
        .collect();
    let s = stats::compute_stats(&records, &question_texts).map_err(err)?;
    let d = PyDict::new_bound(py);
    d.set_item("n_questions", s.n_questions)?;
    d.set_item("n_explanations", s.n_explanations)?;
    d.set_item("vocabulary_size", s.vocabulary_size)?;
    d.set_item("mean_explanation_words", s.mean_explanation_words)?;
    d.set_item("min_explanation_words", s.min_explanation_words)?;
    d.set_item("max_explanation_words", s.max_explanation_words)?;
    d.set_item("mean_explanations_per_question", s.mean_explanations_per_question)?;
    d.set_item("spearman_qe", s.spearman_qe)?;
    Ok(d)
}

#[pymodule]
fn clevr_explain_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScene>()?;
    m.add_class::<PyQuestion>()?;
    m.add_function(wrap_pyfunction!(parse_scenes, m)?)?;
    m.add_function(wrap_pyfunction!(parse_questions, m)?)?;
    m.add_function(wrap_pyfunction!(synth_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(answer, m)?)?;
    m.add_function(wrap_pyfunction!(explanations, m)?)?;
    m.add_function(wrap_pyfunction!(completeness_probe, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_stats, m)?)?;
    Ok(())
}
