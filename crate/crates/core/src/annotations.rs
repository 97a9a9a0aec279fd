//! Intention-annotation records and corpus statistics.
//!
//! Records follow a JSON-lines schema, one utterance per line:
//!
//! ```text
//! {"id": "u1", "transcript": "...", "words": [{"word","start","end"}],
//!  "functions": ["Deixis", "Emphasis"], "intention": "...",
//!  "mappings": [["Deixis", "points forward"]], "split": "train"}
//! ```
//!
//! Function labels are validated against a fixed 16-class ontology of
//! communicative functions; matching is case- and whitespace-insensitive to
//! tolerate annotation drift.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::windowing::WordTiming;

/// Number of communicative function classes.
pub const FUNCTION_COUNT: usize = 16;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("line {line}: malformed record: {message}")]
    MalformedJson { line: usize, message: String },
    #[error("line {line}: unknown function label {label:?}")]
    UnknownFunction { line: usize, label: String },
    #[error("line {line}: words are unsorted, overlapping, or have empty spans")]
    UnsortedWords { line: usize },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("vectors must have equal length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two points for a correlation")]
    TooFewPoints,
    #[error("zero variance in correlation input")]
    ZeroVariance,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The 16-class communicative function ontology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GestureFunction {
    Deixis,
    Emphasis,
    MentalState,
    Process,
    Quantification,
    SpatialRelation,
    Negation,
    Affirmation,
    Valence,
    Modal,
    Comparison,
    Interrogative,
    Contrast,
    Intensifier,
    PerformanceFactor,
    PhysicalRelation,
}

impl GestureFunction {
    pub const ALL: [GestureFunction; FUNCTION_COUNT] = [
        GestureFunction::Deixis,
        GestureFunction::Emphasis,
        GestureFunction::MentalState,
        GestureFunction::Process,
        GestureFunction::Quantification,
        GestureFunction::SpatialRelation,
        GestureFunction::Negation,
        GestureFunction::Affirmation,
        GestureFunction::Valence,
        GestureFunction::Modal,
        GestureFunction::Comparison,
        GestureFunction::Interrogative,
        GestureFunction::Contrast,
        GestureFunction::Intensifier,
        GestureFunction::PerformanceFactor,
        GestureFunction::PhysicalRelation,
    ];

    /// Canonical display label.
    pub fn label(self) -> &'static str {
        match self {
            GestureFunction::Deixis => "Deixis",
            GestureFunction::Emphasis => "Emphasis",
            GestureFunction::MentalState => "Mental State",
            GestureFunction::Process => "Process",
            GestureFunction::Quantification => "Quantification",
            GestureFunction::SpatialRelation => "Spatial Relation",
            GestureFunction::Negation => "Negation",
            GestureFunction::Affirmation => "Affirmation",
            GestureFunction::Valence => "Valence",
            GestureFunction::Modal => "Modal",
            GestureFunction::Comparison => "Comparison",
            GestureFunction::Interrogative => "Interrogative",
            GestureFunction::Contrast => "Contrast",
            GestureFunction::Intensifier => "Intensifier",
            GestureFunction::PerformanceFactor => "Performance Factor",
            GestureFunction::PhysicalRelation => "Physical Relation",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|f| *f == self).expect("member of ALL")
    }

    /// Resolve a label, ignoring case and extra whitespace.
    pub fn from_label(label: &str) -> Option<Self> {
        let norm = normalize(label);
        Self::ALL
            .into_iter()
            .find(|f| normalize(f.label()) == norm)
    }
}

fn normalize(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Dataset split of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// One annotated utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub id: String,
    pub transcript: String,
    pub words: Vec<WordTiming>,
    /// Distinct functions present, in ontology order.
    pub functions: Vec<GestureFunction>,
    pub intention: String,
    pub mappings: Vec<(GestureFunction, String)>,
    pub split: Split,
}

impl AnnotationRecord {
    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    /// Utterance duration in seconds, when words are present.
    pub fn duration(&self) -> Option<f64> {
        match (self.words.first(), self.words.last()) {
            (Some(first), Some(last)) => Some(last.end - first.start),
            _ => None,
        }
    }

    pub fn contains(&self, f: GestureFunction) -> bool {
        self.functions.contains(&f)
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    #[serde(default)]
    transcript: String,
    #[serde(default)]
    words: Vec<WordTiming>,
    functions: Vec<String>,
    #[serde(default)]
    intention: String,
    #[serde(default)]
    mappings: Vec<(String, String)>,
    split: String,
}

/// Parse and validate a JSON-lines annotation file.
pub fn parse_annotations(path: &Path) -> Result<Vec<AnnotationRecord>, AnnotationError> {
    let text = fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(line).map_err(|e| AnnotationError::MalformedJson {
                line: line_no,
                message: e.to_string(),
            })?;

        let split = match normalize(&raw.split).as_str() {
            "train" => Split::Train,
            "val" => Split::Val,
            "test" => Split::Test,
            other => {
                return Err(AnnotationError::MalformedJson {
                    line: line_no,
                    message: format!("unknown split {other:?}"),
                })
            }
        };

        for (w_idx, w) in raw.words.iter().enumerate() {
            let bad_span = !(w.start < w.end) || w.start < 0.0;
            let bad_order = w_idx > 0
                && (w.start < raw.words[w_idx - 1].start || w.start < raw.words[w_idx - 1].end);
            if bad_span || bad_order {
                return Err(AnnotationError::UnsortedWords { line: line_no });
            }
        }

        let mut functions = Vec::new();
        for label in &raw.functions {
            let f = GestureFunction::from_label(label).ok_or_else(|| {
                AnnotationError::UnknownFunction {
                    line: line_no,
                    label: label.clone(),
                }
            })?;
            if !functions.contains(&f) {
                functions.push(f);
            }
        }
        functions.sort_by_key(|f| f.index());

        let mut mappings = Vec::with_capacity(raw.mappings.len());
        for (label, phrase) in raw.mappings {
            let f = GestureFunction::from_label(&label).ok_or_else(|| {
                AnnotationError::UnknownFunction {
                    line: line_no,
                    label: label.clone(),
                }
            })?;
            mappings.push((f, phrase));
        }

        records.push(AnnotationRecord {
            id: raw.id,
            transcript: raw.transcript,
            words: raw.words,
            functions,
            intention: raw.intention,
            mappings,
            split,
        });
    }
    Ok(records)
}

/// Function distribution in both conventions used for corpus reporting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionDistribution {
    /// Share of all function occurrences; sums to one when any occur.
    pub occurrence_share: [f64; FUNCTION_COUNT],
    /// Fraction of utterances containing the function; may sum past one.
    pub presence_rate: [f64; FUNCTION_COUNT],
}

/// Count-based function distribution over a corpus.
pub fn function_distribution(
    records: &[AnnotationRecord],
) -> Result<FunctionDistribution, AnnotationError> {
    if records.is_empty() {
        return Err(AnnotationError::EmptyCorpus);
    }
    let mut counts = [0usize; FUNCTION_COUNT];
    for r in records {
        for f in &r.functions {
            counts[f.index()] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    let mut occurrence_share = [0.0; FUNCTION_COUNT];
    let mut presence_rate = [0.0; FUNCTION_COUNT];
    for i in 0..FUNCTION_COUNT {
        if total > 0 {
            occurrence_share[i] = counts[i] as f64 / total as f64;
        }
        presence_rate[i] = counts[i] as f64 / records.len() as f64;
    }
    Ok(FunctionDistribution {
        occurrence_share,
        presence_rate,
    })
}

/// Conditional co-occurrence of functions within utterances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cooccurrence {
    /// `probs[i][j] = P(j present | i present)`; all-zero rows mark
    /// functions with no support.
    pub probs: [[f64; FUNCTION_COUNT]; FUNCTION_COUNT],
    /// Number of utterances containing each function.
    pub support: [usize; FUNCTION_COUNT],
}

/// Compute `P(j | i)` over utterances.
pub fn cooccurrence(records: &[AnnotationRecord]) -> Result<Cooccurrence, AnnotationError> {
    if records.is_empty() {
        return Err(AnnotationError::EmptyCorpus);
    }
    let mut joint = [[0usize; FUNCTION_COUNT]; FUNCTION_COUNT];
    let mut support = [0usize; FUNCTION_COUNT];
    for r in records {
        for &fi in &r.functions {
            support[fi.index()] += 1;
            for &fj in &r.functions {
                joint[fi.index()][fj.index()] += 1;
            }
        }
    }
    let mut probs = [[0.0; FUNCTION_COUNT]; FUNCTION_COUNT];
    for i in 0..FUNCTION_COUNT {
        if support[i] > 0 {
            for j in 0..FUNCTION_COUNT {
                probs[i][j] = joint[i][j] as f64 / support[i] as f64;
            }
        }
    }
    Ok(Cooccurrence { probs, support })
}

/// Pearson product-moment correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnnotationError> {
    if x.len() != y.len() {
        return Err(AnnotationError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(AnnotationError::TooFewPoints);
    }
    let mean_x = x.iter().sum::<f64>() / n as f64;
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for i in 0..n {
        let dx = x[i] - mean_x;
        let dy = y[i] - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(AnnotationError::ZeroVariance);
    }
    Ok((cov / (var_x * var_y).sqrt()).clamp(-1.0, 1.0))
}

/// Correlations of function count against utterance-level features.
/// `None` marks insufficient data or zero variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlations {
    pub word_count: Option<f64>,
    pub duration: Option<f64>,
    pub speech_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Aggregated statistics of an annotation corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub record_count: usize,
    pub split_counts: SplitCounts,
    pub distribution: FunctionDistribution,
    pub cooccurrence: Cooccurrence,
    pub correlations: Correlations,
}

/// Assemble the full corpus report.
///
/// Correlations use records with at least one word; speech rate is words per
/// second of utterance duration.
pub fn corpus_report(records: &[AnnotationRecord]) -> Result<CorpusStats, AnnotationError> {
    if records.is_empty() {
        return Err(AnnotationError::EmptyCorpus);
    }
    let mut split_counts = SplitCounts {
        train: 0,
        val: 0,
        test: 0,
    };
    for r in records {
        match r.split {
            Split::Train => split_counts.train += 1,
            Split::Val => split_counts.val += 1,
            Split::Test => split_counts.test += 1,
        }
    }

    let mut fn_counts = Vec::new();
    let mut word_counts = Vec::new();
    let mut durations = Vec::new();
    let mut speech_rates = Vec::new();
    for r in records {
        let Some(dur) = r.duration() else { continue };
        if dur <= 0.0 {
            continue;
        }
        fn_counts.push(r.functions.len() as f64);
        word_counts.push(r.word_count() as f64);
        durations.push(dur);
        speech_rates.push(r.word_count() as f64 / dur);
    }
    let correlations = Correlations {
        word_count: pearson(&fn_counts, &word_counts).ok(),
        duration: pearson(&fn_counts, &durations).ok(),
        speech_rate: pearson(&fn_counts, &speech_rates).ok(),
    };

    Ok(CorpusStats {
        record_count: records.len(),
        split_counts,
        distribution: function_distribution(records)?,
        cooccurrence: cooccurrence(records)?,
        correlations,
    })
}
