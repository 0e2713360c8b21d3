use std::path::Path;

use log::warn;

use super::{char_slice, normalize_ws, read_to_string, CorpusError, Polarity, RawAspect, RawSentence};

/// Reads a SemEval-2014 Task 4 file. Aspects labeled `conflict` are
/// dropped, as are sentences left without aspects.
pub fn load_semeval_xml(path: &Path) -> Result<Vec<RawSentence>, CorpusError> {
    parse_semeval_xml(&read_to_string(path)?)
}

pub fn parse_semeval_xml(xml: &str) -> Result<Vec<RawSentence>, CorpusError> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| {
        let pos = e.pos();
        CorpusError::Xml {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;

    let mut out = Vec::new();
    for sentence in doc.descendants().filter(|n| n.has_tag_name("sentence")) {
        let id = sentence.attribute("id").unwrap_or_default().to_string();
        let text = sentence
            .children()
            .find(|n| n.has_tag_name("text"))
            .and_then(|n| n.text())
            .unwrap_or_default()
            .to_string();

        let mut aspects = Vec::new();
        let terms = sentence
            .children()
            .filter(|n| n.has_tag_name("aspectTerms"))
            .flat_map(|n| n.children().filter(|c| c.has_tag_name("aspectTerm")));
        for term_node in terms {
            let term = term_node.attribute("term").unwrap_or_default();
            let polarity = match term_node.attribute("polarity").unwrap_or_default() {
                "conflict" => continue,
                p => match p.parse::<Polarity>() {
                    Ok(p) => p,
                    Err(e) => {
                        warn!("sentence {id}: skipping aspect {term:?}: {e}");
                        continue;
                    }
                },
            };
            let span = term_node
                .attribute("from")
                .and_then(|f| f.parse::<usize>().ok())
                .zip(term_node.attribute("to").and_then(|t| t.parse::<usize>().ok()));
            let Some((from, to)) = span else {
                warn!("sentence {id}: aspect {term:?} has no usable from/to offsets");
                continue;
            };
            match char_slice(&text, from, to) {
                Some(slice) if normalize_ws(&slice) == normalize_ws(term) => aspects.push(RawAspect {
                    term: term.to_string(),
                    from,
                    to,
                    polarity,
                }),
                slice => warn!("sentence {id}: span [{from}, {to}) reads {slice:?}, expected {term:?}; skipped"),
            }
        }
        if !aspects.is_empty() {
            out.push(RawSentence { id, text, aspects });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<sentences>
  <sentence id="1">
    <text>great food but the service was dreadful</text>
    <aspectTerms>
      <aspectTerm term="food" polarity="positive" from="6" to="10"/>
      <aspectTerm term="service" polarity="negative" from="19" to="26"/>
    </aspectTerms>
  </sentence>
  <sentence id="2">
    <text>The decor is plain.</text>
  </sentence>
  <sentence id="3">
    <text>Mixed feelings about the wine list.</text>
    <aspectTerms>
      <aspectTerm term="wine list" polarity="conflict" from="25" to="34"/>
    </aspectTerms>
  </sentence>
  <sentence id="4">
    <text>Bad offsets here.</text>
    <aspectTerms>
      <aspectTerm term="offsets" polarity="negative" from="0" to="3"/>
      <aspectTerm term="here" polarity="neutral" from="12" to="16"/>
    </aspectTerms>
  </sentence>
</sentences>"#;

    #[test]
    fn reads_filters_and_checks_spans() {
        let s = parse_semeval_xml(SAMPLE).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].aspects.len(), 2);
        assert_eq!((s[0].aspects[0].from, s[0].aspects[0].to), (6, 10));
        assert_eq!(s[0].aspects[1].polarity, Polarity::Negative);
        // sentence 4 keeps only its valid aspect
        assert_eq!(s[1].id, "4");
        assert_eq!(s[1].aspects.len(), 1);
        assert_eq!(s[1].aspects[0].term, "here");
    }

    #[test]
    fn no_aspects_gives_empty_list() {
        let xml = r#"<sentences><sentence id="9"><text>nothing</text></sentence></sentences>"#;
        assert!(parse_semeval_xml(xml).unwrap().is_empty());
    }

    #[test]
    fn malformed_reports_line() {
        let xml = "<sentences>\n<sentence id=\"1\">\n<text>x</sentence>\n</sentences>";
        match parse_semeval_xml(xml) {
            Err(CorpusError::Xml { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected XML error, got {other:?}"),
        }
    }
}
