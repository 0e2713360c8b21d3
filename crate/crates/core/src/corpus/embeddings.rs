use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{open, CorpusError, Instance};
use crate::nn::Tensor;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";

/// Bound of the uniform draw for rows missing from the vector file.
pub const OOV_BOUND: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Index of `token`, falling back to [`UNK`].
    pub fn lookup(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Padding and unknown first, then tokens seen at least `min_freq` times in
/// lexicographic order.
pub fn build_vocab<'a, I>(instances: I, min_freq: usize) -> Vocab
where
    I: IntoIterator<Item = &'a Instance>,
{
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for inst in instances {
        for t in &inst.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
    tokens.extend(
        counts
            .into_iter()
            .filter(|&(t, c)| c >= min_freq.max(1) && t != PAD_TOKEN && t != UNK_TOKEN)
            .map(|(t, _)| t.to_string()),
    );
    Vocab::from(tokens)
}

/// Word vectors aligned with a [`Vocab`]: one `[1, dim]` row per index.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub table: Tensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EmbeddingStats {
    pub found: usize,
    pub missing: usize,
}

impl EmbeddingMatrix {
    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn rows(&self) -> usize {
        self.table.rows()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.table.row(i)
    }

    /// Zero padding row, every other row uniform in `±OOV_BOUND`.
    pub fn random(vocab: &Vocab, dim: usize, seed: u64) -> Self {
        let found = vec![false; vocab.len()];
        let data = vec![0.0; vocab.len() * dim];
        Self::fill_missing(data, &found, dim, seed)
    }

    fn fill_missing(mut data: Vec<f64>, found: &[bool], dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, &hit) in found.iter().enumerate() {
            let row = &mut data[i * dim..(i + 1) * dim];
            if i == PAD {
                row.fill(0.0);
            } else if !hit {
                row.iter_mut().for_each(|v| *v = rng.random_range(-OOV_BOUND..=OOV_BOUND));
            }
        }
        Self {
            table: Tensor::matrix(found.len(), dim, data).expect("row-major table"),
        }
    }
}

/// Reads whitespace-separated `token v1 .. vd` lines and copies the vectors
/// of vocabulary tokens. Exact matches win over lowercase matches. Rows
/// missing from the file are drawn from `seed`.
pub fn load_embeddings(path: &Path, vocab: &Vocab, seed: u64) -> Result<(EmbeddingMatrix, EmbeddingStats), CorpusError> {
    let reader = open(path)?;
    let mut lower: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, t) in vocab.tokens().iter().enumerate().skip(2) {
        lower.entry(t.to_lowercase()).or_default().push(i);
    }

    let mut dim: Option<usize> = None;
    let mut data: Vec<f64> = Vec::new();
    // 0 = missing, 1 = lowercase match, 2 = exact match
    let mut quality = vec![0u8; vocab.len()];

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let d = *dim.get_or_insert_with(|| {
            data = vec![0.0; vocab.len() * (fields.len() - 1)];
            fields.len() - 1
        });
        if fields.len() < d + 1 {
            return Err(CorpusError::Dimension {
                line: line_no,
                expected: d,
                found: fields.len() - 1,
            });
        }
        // Some vector files contain tokens with internal spaces; any extra
        // leading field that parses as a number means a longer vector.
        let split = fields.len() - d;
        if split > 1 && fields[1..split].iter().any(|f| f.parse::<f64>().is_ok()) {
            return Err(CorpusError::Dimension {
                line: line_no,
                expected: d,
                found: fields.len() - 1,
            });
        }
        let token = fields[..split].join(" ");

        let mut targets: Vec<(usize, u8)> = Vec::new();
        if let Some(idx) = vocab.get(&token).filter(|&i| i > UNK) {
            targets.push((idx, 2));
        }
        if let Some(idxs) = lower.get(&token) {
            targets.extend(idxs.iter().map(|&i| (i, 1)));
        }
        targets.retain(|&(idx, q)| q > quality[idx]);
        if targets.is_empty() {
            continue;
        }
        let values: Vec<f64> = fields[split..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CorpusError::Format {
                line: line_no,
                message: format!("bad vector value: {e}"),
            })?;
        for (idx, q) in targets {
            data[idx * d..(idx + 1) * d].copy_from_slice(&values);
            quality[idx] = q;
        }
    }

    let Some(d) = dim else {
        return Err(CorpusError::Format {
            line: 0,
            message: "vector file is empty".into(),
        });
    };
    let found: Vec<bool> = quality.iter().map(|&q| q > 0).collect();
    let stats = EmbeddingStats {
        found: found.iter().skip(2).filter(|&&f| f).count(),
        missing: found.iter().skip(2).filter(|&&f| !f).count(),
    };
    Ok((EmbeddingMatrix::fill_missing(data, &found, d, seed), stats))
}
