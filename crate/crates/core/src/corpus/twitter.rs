use std::path::Path;

use super::{read_to_string, CorpusError, Polarity, RawAspect, RawSentence};

const PLACEHOLDER: &str = "$T$";

/// Reads the 3-line Twitter format: sentence with `$T$`, target, label in
/// `{-1, 0, 1}`. Record `k` gets id `k` (0-based).
pub fn load_twitter(path: &Path) -> Result<Vec<RawSentence>, CorpusError> {
    parse_twitter(&read_to_string(path)?)
}

pub fn parse_twitter(content: &str) -> Result<Vec<RawSentence>, CorpusError> {
    let mut lines: Vec<&str> = content.lines().collect();
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    if !lines.len().is_multiple_of(3) {
        return Err(CorpusError::Format {
            line: lines.len(),
            message: format!("{} lines is not a whole number of 3-line records", lines.len()),
        });
    }

    let mut out = Vec::with_capacity(lines.len() / 3);
    for (k, rec) in lines.chunks(3).enumerate() {
        let line = 3 * k + 1;
        let (template, target, label) = (rec[0].trim(), rec[1].trim(), rec[2].trim());
        let polarity = match label {
            "-1" => Polarity::Negative,
            "0" => Polarity::Neutral,
            "1" => Polarity::Positive,
            other => {
                return Err(CorpusError::Format {
                    line: line + 2,
                    message: format!("label {other:?} not in {{-1, 0, 1}}"),
                })
            }
        };
        let Some(pos) = template.find(PLACEHOLDER) else {
            return Err(CorpusError::Format {
                line,
                message: format!("no {PLACEHOLDER} placeholder"),
            });
        };
        let from = template[..pos].chars().count();
        let to = from + target.chars().count();
        let text = format!("{}{}{}", &template[..pos], target, &template[pos + PLACEHOLDER.len()..]);
        out.push(RawSentence {
            id: k.to_string(),
            text,
            aspects: vec![RawAspect {
                term: target.to_string(),
                from,
                to,
                polarity,
            }],
        });
    }
    Ok(out)
}
