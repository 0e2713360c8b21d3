//! Dataset ingestion: SemEval-2014 XML, the Twitter triple format, CoNLL-U
//! parses, GloVe-style vectors, and the JSONL instance intermediate.

mod align;
mod conllu;
mod embeddings;
mod semeval;
mod twitter;

pub use align::{build_instances, Alignment};
pub use conllu::{load_conllu, parse_conllu};
pub use embeddings::{build_vocab, load_embeddings, EmbeddingMatrix, EmbeddingStats, Vocab, PAD, UNK};
pub use semeval::{load_semeval_xml, parse_semeval_xml};
pub use twitter::{load_twitter, parse_twitter};

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deptree::{DepParse, TreeViolation};
use crate::Span;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed XML at line {line}, column {column}: {message}")]
    Xml { line: u32, column: u32, message: String },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("sentence {sentence}: {violation}")]
    Tree { sentence: String, violation: TreeViolation },
    #[error("line {line}: expected {expected}-dimensional vector, found {found} values")]
    Dimension { line: usize, expected: usize, found: usize },
    #[error("JSON on line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>, CorpusError> {
    File::open(path).map(BufReader::new).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn read_to_string(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Neutral,
    Negative,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Positive, Polarity::Neutral, Polarity::Negative];

    pub fn index(self) -> usize {
        match self {
            Polarity::Positive => 0,
            Polarity::Neutral => 1,
            Polarity::Negative => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Neutral => "neutral",
            Polarity::Negative => "negative",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positive" => Ok(Polarity::Positive),
            "neutral" => Ok(Polarity::Neutral),
            "negative" => Ok(Polarity::Negative),
            other => Err(format!("unknown polarity {other:?}")),
        }
    }
}

/// An aspect term with a character span `[from, to)` into the sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAspect {
    pub term: String,
    pub from: usize,
    pub to: usize,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSentence {
    pub id: String,
    pub text: String,
    pub aspects: Vec<RawAspect>,
}

/// Collapses whitespace runs to single spaces and trims.
pub fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Characters `[from, to)` of `text`, or `None` when out of bounds.
pub fn char_slice(text: &str, from: usize, to: usize) -> Option<String> {
    if from > to || to > text.chars().count() {
        return None;
    }
    Some(text.chars().skip(from).take(to - from).collect())
}

/// One (sentence, aspect) pair with its parse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    /// `<sentence_id>#<aspect ordinal>`
    pub id: String,
    pub sentence_id: String,
    pub tokens: Vec<String>,
    pub aspect: Span,
    pub polarity: Polarity,
    pub parse: DepParse,
}

impl Instance {
    pub fn aspect_tokens(&self) -> &[String] {
        &self.tokens[self.aspect.first..=self.aspect.last]
    }

    pub fn aspect_text(&self) -> String {
        self.aspect_tokens().join(" ")
    }
}

/// Wire form: 1-based inclusive aspect indices, CoNLL-U heads.
#[derive(Debug, Serialize, Deserialize)]
struct InstanceRecord {
    id: String,
    tokens: Vec<String>,
    aspect: [usize; 2],
    label: Polarity,
    heads: Vec<usize>,
    rels: Vec<String>,
}

impl Instance {
    pub fn to_json(&self) -> String {
        let record = InstanceRecord {
            id: self.id.clone(),
            tokens: self.tokens.clone(),
            aspect: [self.aspect.first + 1, self.aspect.last + 1],
            label: self.polarity,
            heads: self.parse.heads.clone(),
            rels: self.parse.rels.clone(),
        };
        serde_json::to_string(&record).expect("instance serializes")
    }

    pub fn from_json(line: &str, line_no: usize) -> Result<Self, CorpusError> {
        let r: InstanceRecord =
            serde_json::from_str(line).map_err(|source| CorpusError::Json { line: line_no, source })?;
        let bad = |message: String| CorpusError::Format { line: line_no, message };
        let [first, last] = r.aspect;
        if first == 0 || first > last || last > r.tokens.len() {
            return Err(bad(format!("aspect {:?} outside {} tokens", r.aspect, r.tokens.len())));
        }
        let parse = DepParse::new(r.tokens.clone(), r.heads, r.rels);
        crate::deptree::validate_tree(&parse).map_err(|violation| CorpusError::Tree {
            sentence: r.id.clone(),
            violation,
        })?;
        let sentence_id = r.id.rsplit_once('#').map_or(r.id.as_str(), |(s, _)| s).to_string();
        Ok(Instance {
            id: r.id,
            sentence_id,
            tokens: r.tokens,
            aspect: Span::new(first - 1, last - 1),
            polarity: r.label,
            parse,
        })
    }
}

pub fn write_instances(path: &Path, instances: &[Instance]) -> Result<(), CorpusError> {
    let io = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for inst in instances {
        writeln!(out, "{}", inst.to_json()).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_instances(path: &Path) -> Result<Vec<Instance>, CorpusError> {
    let reader = open(path)?;
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(Instance::from_json(&line, i + 1)?);
    }
    Ok(out)
}

/// `id<TAB>text` lines for an external parser; the ids become CoNLL-U
/// `# sent_id` values.
pub fn write_sentence_export<W: Write>(mut out: W, sentences: &[RawSentence]) -> std::io::Result<()> {
    for s in sentences {
        writeln!(out, "{}\t{}", s.id, normalize_ws(&s.text))?;
    }
    Ok(())
}

/// Aspect counts per polarity, in [`Polarity::ALL`] order.
pub fn polarity_counts(sentences: &[RawSentence]) -> [usize; 3] {
    let mut counts = [0; 3];
    for a in sentences.iter().flat_map(|s| &s.aspects) {
        counts[a.polarity.index()] += 1;
    }
    counts
}
