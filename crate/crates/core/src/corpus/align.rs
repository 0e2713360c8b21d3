//! Character-span to token-span alignment against parser tokenization.

use std::collections::BTreeMap;

use log::warn;

use super::{normalize_ws, Instance, RawSentence};
use crate::deptree::DepParse;
use crate::Span;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Alignment {
    pub instances: Vec<Instance>,
    pub warnings: Vec<String>,
}

/// Character ranges `[from, to)` of each token in `text`, or `None` for
/// tokens the parser rewrote beyond recognition.
fn token_offsets(text: &[char], tokens: &[String]) -> Vec<Option<(usize, usize)>> {
    let mut cursor = 0;
    let mut out = Vec::with_capacity(tokens.len());
    for tok in tokens {
        let tok: Vec<char> = tok.chars().collect();
        let found = (cursor..text.len())
            .find(|&start| text[start..].starts_with(&tok))
            .filter(|_| !tok.is_empty());
        match found {
            Some(start) => {
                out.push(Some((start, start + tok.len())));
                cursor = start + tok.len();
            }
            None => out.push(None),
        }
    }
    out
}

/// Maps every aspect of every sentence onto its parse's tokens, one
/// [`Instance`] per aspect. Sentences without a parse and aspects that
/// cover no token are skipped with a warning.
pub fn build_instances(raw: &[RawSentence], parses: &BTreeMap<String, DepParse>) -> Alignment {
    let mut result = Alignment::default();
    let mut note = |msg: String| {
        warn!("{msg}");
        result.warnings.push(msg);
    };
    let mut instances = Vec::new();

    for sentence in raw {
        let Some(parse) = parses.get(&sentence.id) else {
            note(format!("sentence {}: no parse, skipped", sentence.id));
            continue;
        };
        let text: Vec<char> = sentence.text.chars().collect();
        let offsets = token_offsets(&text, &parse.tokens);
        let unaligned = offsets.iter().filter(|o| o.is_none()).count();
        if unaligned > 0 {
            note(format!(
                "sentence {}: {unaligned} of {} tokens not found in the text",
                sentence.id,
                parse.len()
            ));
        }

        for (k, aspect) in sentence.aspects.iter().enumerate() {
            let hits: Vec<(usize, (usize, usize))> = offsets
                .iter()
                .enumerate()
                .filter_map(|(i, o)| o.map(|o| (i, o)))
                .filter(|&(_, (s, e))| s < aspect.to && e > aspect.from)
                .collect();
            let (Some(first), Some(last)) = (hits.first(), hits.last()) else {
                note(format!(
                    "sentence {}: aspect {:?} [{}, {}) covers no token, skipped",
                    sentence.id, aspect.term, aspect.from, aspect.to
                ));
                continue;
            };
            if first.1 .0 < aspect.from || last.1 .1 > aspect.to {
                note(format!(
                    "sentence {}: aspect {:?} splits a token; widened to whole tokens",
                    sentence.id, aspect.term
                ));
            }
            let span = Span::new(first.0, last.0);
            let covered = normalize_ws(&parse.tokens[span.first..=span.last].join(" "));
            if covered.replace(' ', "") != normalize_ws(&aspect.term).replace(' ', "") {
                note(format!(
                    "sentence {}: aspect {:?} aligned to tokens {:?}",
                    sentence.id, aspect.term, covered
                ));
            }
            instances.push(Instance {
                id: format!("{}#{k}", sentence.id),
                sentence_id: sentence.id.clone(),
                tokens: parse.tokens.clone(),
                aspect: span,
                polarity: aspect.polarity,
                parse: parse.clone(),
            });
        }
    }
    result.instances = instances;
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Polarity, RawAspect};

    fn sentence(text: &str, aspects: &[(&str, usize, usize)]) -> RawSentence {
        RawSentence {
            id: "s".into(),
            text: text.into(),
            aspects: aspects
                .iter()
                .map(|&(term, from, to)| RawAspect {
                    term: term.into(),
                    from,
                    to,
                    polarity: Polarity::Neutral,
                })
                .collect(),
        }
    }

    fn flat_parse(tokens: &[&str]) -> BTreeMap<String, DepParse> {
        let n = tokens.len();
        let heads = (0..n).map(|i| if i == 0 { 0 } else { 1 }).collect();
        let p = DepParse::new(tokens.iter().map(|t| t.to_string()).collect(), heads, vec!["dep".into(); n]);
        BTreeMap::from([("s".to_string(), p)])
    }

    #[test]
    fn food_maps_to_second_token() {
        let text = "great food but the service was dreadful";
        let parses = flat_parse(&["great", "food", "but", "the", "service", "was", "dreadful"]);
        let a = build_instances(&[sentence(text, &[("food", 6, 10)])], &parses);
        assert_eq!(a.instances.len(), 1);
        // [2, 2] in 1-based terms
        assert_eq!(a.instances[0].aspect, Span::single(1));
        assert!(a.warnings.is_empty());
    }

    #[test]
    fn multiword_and_fan_out() {
        let text = "the wine list and the staff";
        let parses = flat_parse(&["the", "wine", "list", "and", "the", "staff"]);
        let a = build_instances(&[sentence(text, &[("wine list", 4, 13), ("staff", 22, 27)])], &parses);
        assert_eq!(a.instances.len(), 2);
        assert_eq!(a.instances[0].aspect, Span::new(1, 2));
        assert_eq!(a.instances[0].aspect_text(), "wine list");
        assert_eq!(a.instances[1].aspect, Span::single(5));
        assert_eq!(a.instances[0].parse, a.instances[1].parse);
        assert_eq!(a.instances[1].id, "s#1");
    }

    #[test]
    fn partial_token_is_widened() {
        let text = "nice sushi-bar";
        let parses = flat_parse(&["nice", "sushi-bar"]);
        let a = build_instances(&[sentence(text, &[("sushi", 5, 10)])], &parses);
        assert_eq!(a.instances[0].aspect, Span::single(1));
        assert!(a.warnings.iter().any(|w| w.contains("widened")));
    }

    #[test]
    fn unalignable_is_skipped() {
        let parses = flat_parse(&["a", "b"]);
        let a = build_instances(&[sentence("a b    ", &[("x", 4, 6)])], &parses);
        assert!(a.instances.is_empty());
        assert_eq!(a.warnings.len(), 1);
        let missing = build_instances(&[RawSentence { id: "zz".into(), ..sentence("a", &[]) }], &parses);
        assert!(missing.warnings[0].contains("no parse"));
    }
}
