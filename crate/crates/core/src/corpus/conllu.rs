use std::collections::BTreeMap;
use std::path::Path;

use super::{read_to_string, CorpusError};
use crate::deptree::{validate_tree, DepParse};

/// Reads a CoNLL-U file into parses keyed by `# sent_id`. Multiword-token
/// ranges and empty nodes are skipped; only ID, FORM, HEAD and DEPREL are
/// used.
pub fn load_conllu(path: &Path) -> Result<BTreeMap<String, DepParse>, CorpusError> {
    parse_conllu(&read_to_string(path)?)
}

pub fn parse_conllu(content: &str) -> Result<BTreeMap<String, DepParse>, CorpusError> {
    let mut out = BTreeMap::new();
    let mut block: Option<Block> = None;

    for (i, raw) in content.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            if let Some(b) = block.take() {
                b.finish(&mut out)?;
            }
            continue;
        }
        let b = block.get_or_insert_with(|| Block::new(line_no));
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(rest) = comment.trim_start().strip_prefix("sent_id") {
                b.id = Some(rest.trim_start_matches([' ', '=']).trim().to_string());
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 8 {
            return Err(CorpusError::Format {
                line: line_no,
                message: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let head = cols[6].parse::<usize>().map_err(|_| CorpusError::Format {
            line: line_no,
            message: format!("HEAD {:?} is not an integer", cols[6]),
        })?;
        b.tokens.push(cols[1].to_string());
        b.heads.push(head);
        b.rels.push(cols[7].to_string());
    }
    if let Some(b) = block.take() {
        b.finish(&mut out)?;
    }
    Ok(out)
}

struct Block {
    start: usize,
    id: Option<String>,
    tokens: Vec<String>,
    heads: Vec<usize>,
    rels: Vec<String>,
}

impl Block {
    fn new(start: usize) -> Self {
        Self {
            start,
            id: None,
            tokens: Vec::new(),
            heads: Vec::new(),
            rels: Vec::new(),
        }
    }

    fn finish(self, out: &mut BTreeMap<String, DepParse>) -> Result<(), CorpusError> {
        if self.tokens.is_empty() {
            return Ok(());
        }
        let id = self.id.ok_or(CorpusError::Format {
            line: self.start,
            message: "sentence block without # sent_id".into(),
        })?;
        let parse = DepParse::new(self.tokens, self.heads, self.rels);
        validate_tree(&parse).map_err(|violation| CorpusError::Tree {
            sentence: id.clone(),
            violation,
        })?;
        if out.insert(id.clone(), parse).is_some() {
            return Err(CorpusError::Format {
                line: self.start,
                message: format!("duplicate sent_id {id}"),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deptree::TreeViolation;

    fn block(id: &str, rows: &[(&str, usize, &str)]) -> String {
        let mut s = format!("# sent_id = {id}\n# text = ignored\n");
        for (i, (form, head, rel)) in rows.iter().enumerate() {
            s.push_str(&format!("{}\t{form}\t_\t_\t_\t_\t{head}\t{rel}\t_\t_\n", i + 1));
        }
        s.push('\n');
        s
    }

    #[test]
    fn minimal_tree() {
        let text = block("a", &[("good", 2, "amod"), ("food", 0, "root"), ("here", 2, "advmod")]);
        let parses = parse_conllu(&text).unwrap();
        let p = &parses["a"];
        assert_eq!(p.heads, [2, 0, 2]);
        assert_eq!(p.head_of(1), None);
    }

    #[test]
    fn cycle_is_an_error() {
        let text = block("bad", &[("a", 2, "x"), ("b", 3, "x"), ("c", 1, "x")]);
        match parse_conllu(&text) {
            Err(CorpusError::Tree { sentence, violation }) => {
                assert_eq!(sentence, "bad");
                assert!(matches!(violation, TreeViolation::Cycle(_)));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn skips_multiword_and_empty_nodes() {
        let text = "# sent_id = m\n1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n1\tdo\t_\t_\t_\t_\t0\troot\t_\t_\n2\tn't\t_\t_\t_\t_\t1\tadvmod\t_\t_\n2.1\tx\t_\t_\t_\t_\t_\t_\t_\t_\n";
        let parses = parse_conllu(text).unwrap();
        assert_eq!(parses["m"].tokens, ["do", "n't"]);
    }

    #[test]
    fn missing_sent_id() {
        let text = "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n";
        assert!(matches!(parse_conllu(text), Err(CorpusError::Format { line: 1, .. })));
    }

    #[test]
    fn multiple_blocks() {
        let text = block("1", &[("a", 0, "root")]) + &block("2", &[("b", 0, "root"), ("c", 1, "obj")]);
        let parses = parse_conllu(&text).unwrap();
        assert_eq!(parses.len(), 2);
        assert_eq!(parses["2"].rels, ["root", "obj"]);
    }
}
