use std::collections::BTreeMap;

use paradecode::grammar::{sample_derivation, sample_derivation_with, GrammarError, ParseError};
use paradecode::{parse_canonical, parse_grammar, tokens, validate_grammar, Grammar};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use testkit::enumerate::{count, enumerate};
use testkit::toy::{toy_grammar, ToyConfig};

fn g1() -> Grammar {
    parse_grammar(include_str!("../../../fixtures/g1.scfg")).unwrap()
}

#[test]
fn thousand_samples_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let cfg = ToyConfig { recursive: true, schema: true, ..Default::default() };
    let grammars: Vec<Grammar> = (0..10).map(|_| toy_grammar(&mut rng, &cfg, 8, 5..=400)).collect();
    let mut n = 0;
    for (k, g) in grammars.iter().enumerate() {
        let mut srng = ChaCha8Rng::seed_from_u64(k as u64);
        for _ in 0..100 {
            // deep samples can be longer than the unambiguity bound
            let d = sample_derivation_with(g, 3, &mut srng).unwrap();
            if d.utterance().len() > 8 {
                continue;
            }
            let back = parse_canonical(g, &d.utterance()).unwrap();
            assert_eq!(back, d);
            assert_eq!(back.logical_form(), d.logical_form());
            n += 1;
        }
    }
    assert!(n >= 500, "{n}");
    for seed in 0..1000 {
        let d = sample_derivation(&g1(), 4, seed).unwrap();
        assert_eq!(parse_canonical(&g1(), &d.utterance()).unwrap(), d);
    }
}

#[test]
fn g1_city_question_pair() {
    let d = parse_canonical(&g1(), &tokens("what is state that city0 located in")).unwrap();
    assert_eq!(d.logical_form(), tokens("answer ( state ( loc_1 ( city0 ) ) )"));
    assert_eq!(d.rule_ids(), ["r_root", "r_state_loc", "r_city"]);
    assert_eq!(parse_canonical(&g1(), &tokens("what is city0")), Err(ParseError::NoParse));
}

#[test]
fn reordering_rule_links_by_label() {
    let g = parse_grammar(
        "$s -> $a#1 before $a#2 ||| seq ( $a#2 $a#1 )\n$a -> x ||| X\n$a -> y ||| Y",
    )
    .unwrap();
    let d = parse_canonical(&g, &tokens("x before y")).unwrap();
    assert_eq!(d.logical_form(), tokens("seq ( Y X )"));
}

#[test]
fn syntax_errors_carry_line_numbers() {
    let cases = [
        ("start: $s\n$s -> a\n", 2),
        ("$s -> a ||| b\nbad line\n", 2),
        ("$s -> $x ||| f\n", 1),
        ("[r] $s -> a ||| b\n[r] $s -> c ||| d\n", 2),
        ("$s -> ||| b\n", 1),
    ];
    for (text, line) in cases {
        match parse_grammar(text) {
            Err(GrammarError::Syntax { line: l, .. })
            | Err(GrammarError::Link { line: l, .. })
            | Err(GrammarError::DuplicateRuleId { line: l, .. }) => assert_eq!(l, line, "{text}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
}

#[test]
fn validation_reports_unreachable_and_unproductive() {
    let g = parse_grammar("$s -> a ||| A\n$u -> b ||| B\n$s -> $v ||| V ( $v )\n$v -> c $v ||| C ( $v )").unwrap();
    let report = validate_grammar(&g).to_string();
    assert!(report.contains("unreachable: $u"), "{report}");
    assert!(report.contains("unproductive: $v"), "{report}");
    assert!(validate_grammar(&g1()).is_empty());
}

#[test]
fn sampler_covers_ten_sentence_grammar() {
    let mut g10 = String::from("$s -> $a and $b ||| and ( $a $b )\n$s -> only $a ||| $a\n");
    g10.push_str("$a -> p ||| P\n$a -> q ||| Q\n$a -> r ||| R\n$a -> s ||| S\n$a -> t ||| T\n$b -> m ||| M\n");
    let g = parse_grammar(&g10).unwrap();
    assert_eq!(enumerate(&g, 10).len(), 10);
    let mut counts: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        *counts.entry(sample_derivation_with(&g, 3, &mut rng).unwrap().utterance()).or_default() += 1;
    }
    assert_eq!(counts.len(), 10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every derivation of a random grammar keeps its non-terminals linked
    /// one to one across the two sides.
    #[test]
    fn derivations_are_well_linked(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = toy_grammar(&mut rng, &ToyConfig::default(), 12, 1..=200);
        let all = enumerate(&g, 12);
        prop_assert_eq!(all.len() as u64, count(&g, 12));
        for d in all {
            prop_assert!(d.check().is_ok());
            prop_assert!(d.to_pair().is_ok());
            let back = parse_canonical(&g, &d.utterance()).unwrap();
            prop_assert_eq!(back.logical_form(), d.logical_form());
        }
    }

    /// Same seed, same derivation.
    #[test]
    fn sampling_is_deterministic(seed in any::<u64>()) {
        let g = g1();
        prop_assert_eq!(sample_derivation(&g, 3, seed).unwrap(), sample_derivation(&g, 3, seed).unwrap());
    }
}
