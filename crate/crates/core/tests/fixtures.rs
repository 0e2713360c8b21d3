use aspect_rgat::corpus::{build_instances, parse_conllu, parse_semeval_xml};
use aspect_rgat::reshape::{reshape, Direction, ReshapeOptions};
use aspect_rgat::{DepParse, Span};

fn parse(words: &str, heads: &[usize], rels: &[&str]) -> DepParse {
    DepParse::new(
        words.split(' ').map(String::from).collect(),
        heads.to_vec(),
        rels.iter().map(|s| s.to_string()).collect(),
    )
}

fn labels(p: &DepParse, aspect: Span) -> Vec<(String, String, Direction)> {
    reshape(p, aspect, ReshapeOptions::default())
        .unwrap()
        .children
        .into_iter()
        .map(|c| (p.tokens[c.token].clone(), c.relation.to_string(), c.direction))
        .collect()
}

#[test]
fn great_food_hand_trace() {
    // great <-amod- food -nsubj-> dreadful (root); service -nsubj-> dreadful
    let p = parse(
        "great food but the service was dreadful",
        &[2, 7, 7, 5, 7, 7, 0],
        &["amod", "nsubj", "cc", "det", "nsubj", "cop", "root"],
    );
    let got = labels(&p, Span::single(1));
    let expected = [
        ("great", "amod", Direction::FromRoot),
        ("but", "2:con", Direction::Virtual),
        ("the", "3:con", Direction::Virtual),
        ("service", "2:con", Direction::Virtual),
        ("was", "2:con", Direction::Virtual),
        ("dreadful", "nsubj", Direction::ToRoot),
    ];
    assert_eq!(got.len(), expected.len());
    for ((w, l, d), (ew, el, ed)) in got.iter().zip(expected) {
        assert_eq!((w.as_str(), l.as_str(), *d), (ew, el, ed));
    }
}

#[test]
fn chain_cutoff_at_four() {
    let p = parse("a b c d e f g", &[2, 3, 4, 5, 6, 7, 0], &["x1", "x2", "x3", "x4", "x5", "x6", "root"]);
    let got: Vec<String> = labels(&p, Span::single(0)).into_iter().map(|(_, l, _)| l).collect();
    assert_eq!(got, ["x1", "2:con", "3:con", "4:con", "∞:con", "∞:con"]);
}

#[test]
fn multiword_aspect_uses_nearest_word() {
    // chain again; aspect {b, c}: a is direct to b, d direct to c, e at 2 from c
    let p = parse("a b c d e f g", &[2, 3, 4, 5, 6, 7, 0], &["x1", "x2", "x3", "x4", "x5", "x6", "root"]);
    let got: Vec<(String, String)> = labels(&p, Span::new(1, 2)).into_iter().map(|(w, l, _)| (w, l)).collect();
    let expected = [("a", "x1"), ("d", "x3"), ("e", "2:con"), ("f", "3:con"), ("g", "4:con")];
    assert_eq!(got, expected.map(|(a, b)| (a.to_string(), b.to_string())));
}

#[test]
fn xml_and_conllu_align_to_the_hand_span() {
    let xml = r#"<sentences><sentence id="s1"><text>great food but the service was dreadful</text>
        <aspectTerms><aspectTerm term="food" polarity="positive" from="6" to="10"/>
        <aspectTerm term="service" polarity="negative" from="19" to="26"/></aspectTerms></sentence></sentences>"#;
    let conllu = "# sent_id = s1\n\
        1\tgreat\t_\t_\t_\t_\t2\tamod\t_\t_\n\
        2\tfood\t_\t_\t_\t_\t7\tnsubj\t_\t_\n\
        3\tbut\t_\t_\t_\t_\t7\tcc\t_\t_\n\
        4\tthe\t_\t_\t_\t_\t5\tdet\t_\t_\n\
        5\tservice\t_\t_\t_\t_\t7\tnsubj\t_\t_\n\
        6\twas\t_\t_\t_\t_\t7\tcop\t_\t_\n\
        7\tdreadful\t_\t_\t_\t_\t0\troot\t_\t_\n\n";
    let raw = parse_semeval_xml(xml).unwrap();
    let parses = parse_conllu(conllu).unwrap();
    let aligned = build_instances(&raw, &parses);
    let spans: Vec<Span> = aligned.instances.iter().map(|i| i.aspect).collect();
    assert_eq!(spans, [Span::single(1), Span::single(4)]);
    assert!(aligned.instances.iter().all(|i| i.sentence_id == "s1"));
}
