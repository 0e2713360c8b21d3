//! A small separable dataset for sanity checks: two-clause sentences
//! "the N1 was O1 but the N2 was O2" where the aspect is one noun and its
//! label is fixed by the opinion word that heads it. The other clause always
//! carries a different polarity.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Instance, Polarity};
use crate::deptree::DepParse;
use crate::rgat::Hyper;
use crate::Span;

const NOUNS: [&str; 6] = ["food", "service", "staff", "menu", "price", "decor"];
const OPINIONS: [[&str; 3]; 3] = [
    ["great", "good", "lovely"],
    ["average", "okay", "standard"],
    ["awful", "bad", "rude"],
];
const HEADS: [usize; 9] = [2, 4, 4, 0, 9, 7, 9, 9, 4];
const RELS: [&str; 9] = ["det", "nsubj", "cop", "root", "cc", "det", "nsubj", "cop", "conj"];

/// `n` instances with labels cycling through the three classes.
pub fn dataset(n: usize, seed: u64) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| {
            let class = k % 3;
            let other = (class + rng.random_range(1..3)) % 3;
            let first = rng.random_bool(0.5);
            let (c1, c2) = if first { (class, other) } else { (other, class) };
            let n1 = *NOUNS.choose(&mut rng).expect("nouns");
            let n2 = loop {
                let n = *NOUNS.choose(&mut rng).expect("nouns");
                if n != n1 {
                    break n;
                }
            };
            let o1 = *OPINIONS[c1].choose(&mut rng).expect("opinions");
            let o2 = *OPINIONS[c2].choose(&mut rng).expect("opinions");
            let tokens: Vec<String> = ["the", n1, "was", o1, "but", "the", n2, "was", o2]
                .into_iter()
                .map(String::from)
                .collect();
            let parse = DepParse::new(tokens.clone(), HEADS.to_vec(), RELS.map(String::from).to_vec());
            Instance {
                id: format!("syn{k}#0"),
                sentence_id: format!("syn{k}"),
                tokens,
                aspect: Span::single(if first { 1 } else { 6 }),
                polarity: Polarity::ALL[class],
                parse,
            }
        })
        .collect()
}

/// Class of an opinion word used by [`dataset`].
pub fn opinion_polarity(word: &str) -> Option<Polarity> {
    OPINIONS.iter().position(|ws| ws.contains(&word)).map(|c| Polarity::ALL[c])
}

/// Small dimensions and no dropout, sized for fitting [`dataset`] quickly.
pub fn small_hyper() -> Hyper {
    Hyper {
        layers: 2,
        att_heads: 2,
        rel_heads: 2,
        head_dim: 8,
        hidden_dim: 16,
        lstm_hidden: 8,
        rel_dim: 16,
        gate_dim: 8,
        dropout: 0.0,
        ..Hyper::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deptree::validate_tree;

    #[test]
    fn valid_balanced_and_seeded() {
        let data = dataset(30, 4);
        assert_eq!(data, dataset(30, 4));
        for inst in &data {
            validate_tree(&inst.parse).unwrap();
            let head = inst.parse.head_of(inst.aspect.first).unwrap();
            let opinion = &inst.tokens[head];
            assert!(OPINIONS[inst.polarity.index()].contains(&opinion.as_str()));
        }
        let mut counts = [0; 3];
        data.iter().for_each(|i| counts[i.polarity.index()] += 1);
        assert_eq!(counts, [10, 10, 10]);
    }
}
