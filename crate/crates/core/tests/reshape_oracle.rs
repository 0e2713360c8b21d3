mod common;

use aspect_rgat::deptree::validate_tree;
use aspect_rgat::reshape::{reshape, Direction, RelationLabel, ReshapeOptions, REVERSED_SUFFIX};
use aspect_rgat::{DepParse, Span};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_force_reshape, random_parse, random_span};

fn as_tuples(parse: &DepParse, aspect: Span, n_max: usize) -> Vec<(usize, String, &'static str)> {
    let opts = ReshapeOptions {
        n_max,
        ..ReshapeOptions::default()
    };
    reshape(parse, aspect, opts)
        .unwrap()
        .children
        .into_iter()
        .map(|c| (c.token, c.relation.to_string(), c.direction.as_str()))
        .collect()
}

#[test]
fn matches_brute_force_on_random_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    for _ in 0..500 {
        let n = rng.random_range(5..=40);
        let parse = random_parse(&mut rng, n);
        validate_tree(&parse).unwrap();
        let aspect = random_span(&mut rng, n);
        assert_eq!(as_tuples(&parse, aspect, 4), brute_force_reshape(&parse, aspect, 4), "{parse:?} {aspect}");
    }
}

fn tree_and_span() -> impl Strategy<Value = (DepParse, Span)> {
    (any::<u64>(), 1usize..30).prop_map(|(seed, n)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let parse = random_parse(&mut rng, n);
        let span = random_span(&mut rng, n);
        (parse, span)
    })
}

proptest! {
    #[test]
    fn oracle_agrees_for_any_cutoff((parse, aspect) in tree_and_span(), n_max in 1usize..8) {
        prop_assert_eq!(as_tuples(&parse, aspect, n_max), brute_force_reshape(&parse, aspect, n_max));
    }

    #[test]
    fn every_non_aspect_token_once_in_order((parse, aspect) in tree_and_span()) {
        let tree = reshape(&parse, aspect, ReshapeOptions::default()).unwrap();
        let tokens: Vec<usize> = tree.children.iter().map(|c| c.token).collect();
        let expected: Vec<usize> = (0..parse.len()).filter(|&j| !aspect.contains(j)).collect();
        prop_assert_eq!(tokens, expected);
        prop_assert_eq!(tree.root, aspect);
    }

    #[test]
    fn virtual_labels_are_at_least_two_and_capped((parse, aspect) in tree_and_span(), n_max in 1usize..8) {
        let opts = ReshapeOptions { n_max, ..ReshapeOptions::default() };
        let tree = reshape(&parse, aspect, opts).unwrap();
        for c in &tree.children {
            match (&c.relation, c.direction) {
                (RelationLabel::Connected(d), Direction::Virtual) => prop_assert!(*d >= 2 && *d <= n_max),
                (RelationLabel::Distant, Direction::Virtual) => {}
                (RelationLabel::Dependency(_), Direction::ToRoot | Direction::FromRoot) => {}
                other => prop_assert!(false, "unexpected child {:?}", other),
            }
        }
    }

    #[test]
    fn reversed_marks_only_children_heading_the_aspect((parse, aspect) in tree_and_span()) {
        let plain = reshape(&parse, aspect, ReshapeOptions::default()).unwrap();
        let marked = reshape(&parse, aspect, ReshapeOptions { mark_reversed: true, ..ReshapeOptions::default() }).unwrap();
        for (p, m) in plain.children.iter().zip(&marked.children) {
            prop_assert_eq!(p.direction, m.direction);
            if p.direction == Direction::ToRoot {
                prop_assert_eq!(m.relation.to_string(), format!("{}{}", p.relation, REVERSED_SUFFIX));
            } else {
                prop_assert_eq!(&p.relation, &m.relation);
            }
        }
    }

    #[test]
    fn larger_cutoff_only_resolves_distant_children((parse, aspect) in tree_and_span(), n_max in 1usize..6) {
        let small = reshape(&parse, aspect, ReshapeOptions { n_max, ..ReshapeOptions::default() }).unwrap();
        let large = reshape(&parse, aspect, ReshapeOptions { n_max: n_max + 1, ..ReshapeOptions::default() }).unwrap();
        for (s, l) in small.children.iter().zip(&large.children) {
            if s.relation != RelationLabel::Distant {
                prop_assert_eq!(&s.relation, &l.relation);
            } else {
                prop_assert!(matches!(l.relation, RelationLabel::Distant | RelationLabel::Connected(_)));
            }
        }
    }
}
