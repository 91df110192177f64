use std::collections::BTreeSet;

use paradecode::lr1::{Lookahead, Lr1Table};
use paradecode::{parse_grammar, Grammar};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use testkit::earley;
use testkit::enumerate::enumerate;
use testkit::toy::{toy_grammar, ToyConfig};

fn check_all_prefixes(g: &Grammar, t: &Lr1Table, max_len: usize) {
    earley::compare_all_prefixes(g, t, max_len).unwrap();
}

#[test]
fn finite_grammars_match_earley_on_every_prefix() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    for _ in 0..20 {
        let g = toy_grammar(&mut rng, &ToyConfig::default(), 40, 10..=500);
        let Ok(t) = Lr1Table::build(&g) else { continue };
        check_all_prefixes(&g, &t, 40);
        checked += 1;
    }
    assert!(checked >= 5);
}

#[test]
fn recursive_grammars_match_earley_up_to_depth() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..10 {
        let g = toy_grammar(&mut rng, &ToyConfig { recursive: true, ..Default::default() }, 6, 5..=400);
        let Ok(t) = Lr1Table::build(&g) else { continue };
        check_all_prefixes(&g, &t, 6);
    }
}

#[test]
fn automaton_accepts_exactly_the_language() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10 {
        let g = toy_grammar(&mut rng, &ToyConfig::default(), 40, 10..=300);
        let Ok(t) = Lr1Table::build(&g) else { continue };
        let lang: BTreeSet<Vec<String>> = enumerate(&g, 40).iter().map(|d| d.utterance()).collect();
        for s in &lang {
            let mut cfg = t.initial();
            for w in s {
                cfg = t.step(&cfg, w).unwrap();
            }
            let done = t.accept_eos(&cfg).unwrap();
            let d = t.config_to_derivation(&g, &done, s).unwrap();
            assert_eq!(&d.utterance(), s);
            assert!(earley::recognizes(&g, s));
        }
    }
}

#[test]
fn shared_prefix_needs_lookahead() {
    // "a b" and "a b c": after "a b" both end-of-input and "c" are possible
    let g = parse_grammar("$s -> a $x ||| f ( $x )\n$x -> b ||| g\n$x -> b c ||| h").unwrap();
    let t = Lr1Table::build(&g).unwrap();
    let mut cfg = t.initial();
    for w in ["a", "b"] {
        cfg = t.step(&cfg, w).unwrap();
    }
    let got = t.acceptable_tokens(&cfg);
    assert_eq!(got, BTreeSet::from([Lookahead::Eos, Lookahead::word("c")]));
}
