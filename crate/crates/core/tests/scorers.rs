use std::io::{BufReader, Cursor};
use std::sync::Arc;

use paradecode::scorer::{BigramConfig, BigramScorer, RemoteScorer, ScoreRequest, Scorer, ScorerError, UniformScorer, EOS};
use paradecode::tokens;
use proptest::prelude::*;
use testkit::mock::{self, MockOptions};

fn corpus() -> Vec<Vec<String>> {
    ["what is state0", "what is state that city0 located in", "which state is city0 in", "what is what"]
        .iter()
        .map(|s| tokens(s))
        .collect()
}

fn bigram(cfg: BigramConfig) -> BigramScorer {
    BigramScorer::train(&corpus(), ["extra"], cfg)
}

fn outcomes(s: &BigramScorer, eos: bool) -> Vec<String> {
    let mut v: Vec<String> = s.vocab().map(str::to_owned).collect();
    v.sort();
    if eos {
        v.push(EOS.to_owned());
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Next-word scores form a distribution over the vocabulary (plus
    /// end-of-sentence when modeled), for any source and history.
    #[test]
    fn bigram_is_normalized(k in 0.0f64..2.0, bonus in -2.0f64..3.0, eos: bool, hist in 0usize..8, src in proptest::collection::vec(0usize..8, 0..4)) {
        let s = bigram(BigramConfig { smoothing: k, model_eos: eos, source_bonus: bonus });
        let vocab = outcomes(&s, eos);
        let source: Vec<String> = src.iter().map(|&i| vocab[i % vocab.len()].clone()).collect();
        let prefix: Vec<String> = if hist == 0 { vec![] } else { vec![vocab[hist % vocab.len()].clone()] };
        prop_assume!(prefix.last().is_none_or(|w| w != EOS));
        let lps = s.score_next(&ScoreRequest::new(&source, &prefix, &vocab).unwrap()).unwrap().logprobs;
        // floored zero-probability events can add at most V * 1e-12
        let total: f64 = lps.iter().map(|l| l.exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "{}", total);
    }

    /// Scores do not depend on candidate order.
    #[test]
    fn bigram_is_permutation_invariant(seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let s = bigram(BigramConfig::default());
        let mut cands = outcomes(&s, true);
        let src = tokens("which state");
        let pre = tokens("what");
        let base = s.score_next(&ScoreRequest::new(&src, &pre, &cands).unwrap()).unwrap().logprobs;
        let pairs: Vec<(String, f64)> = cands.iter().cloned().zip(base).collect();
        cands.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let again = s.score_next(&ScoreRequest::new(&src, &pre, &cands).unwrap()).unwrap().logprobs;
        for (c, l) in cands.iter().zip(again) {
            let want = pairs.iter().find(|(w, _)| w == c).unwrap().1;
            prop_assert_eq!(l, want);
        }
    }
}

#[test]
fn sequence_score_is_chain_rule_with_eos() {
    let s = bigram(BigramConfig::default());
    let (src, tgt) = (tokens("x"), tokens("what is state0"));
    let mut want = 0.0;
    for i in 0..tgt.len() {
        want += s.score_next(&ScoreRequest::new(&src, &tgt[..i], &tgt[i..=i]).unwrap()).unwrap().logprobs[0];
    }
    want += s.score_next(&ScoreRequest::new(&src, &tgt, &[EOS.to_owned()]).unwrap()).unwrap().logprobs[0];
    assert_eq!(s.score_sequence(&src, &tgt).unwrap(), want);
}

#[test]
fn uniform_sequence() {
    let s = UniformScorer::new(10);
    assert!((s.score_sequence(&[], &tokens("a b c d")).unwrap() - 4.0 * 0.1f64.ln()).abs() < 1e-12);
    assert!(!s.models_termination());
}

#[test]
fn remote_matches_backend() {
    let backend = Arc::new(bigram(BigramConfig::default()));
    let server = mock::spawn(backend.clone(), MockOptions { eos: true, ..Default::default() });
    let remote = RemoteScorer::connect(&format!("tcp://{}", server.addr)).unwrap();
    assert!(remote.models_termination());
    let (src, pre, cands) = (tokens("which state"), tokens("what"), tokens("is state0 </s>"));
    let req = ScoreRequest::new(&src, &pre, &cands).unwrap();
    assert_eq!(remote.score_next(&req).unwrap(), backend.score_next(&req).unwrap());
    let tgt = tokens("what is state0");
    assert_eq!(remote.score_sequence(&src, &tgt).unwrap(), backend.score_sequence(&src, &tgt).unwrap());
    assert_eq!(remote.generate_paraphrases(&src, 2), Err(ScorerError::Unsupported("generate")));
}

#[test]
fn remote_without_eos_capability() {
    let server = mock::spawn(Arc::new(UniformScorer::new(4)), MockOptions::default());
    let remote = RemoteScorer::connect(&server.addr).unwrap();
    assert!(!remote.models_termination());
    assert_eq!(remote.capabilities(), ["score"]);
}

#[test]
fn remote_skips_responses_for_other_ids() {
    let backend = Arc::new(UniformScorer::new(4));
    let server = mock::spawn(backend, MockOptions { stray_responses: true, ..Default::default() });
    let remote = RemoteScorer::connect(&server.addr).unwrap();
    let c = tokens("a b");
    let r = remote.score_next(&ScoreRequest::new(&[], &[], &c).unwrap()).unwrap();
    assert_eq!(r.logprobs.len(), 2);
}

#[test]
fn remote_error_paths() {
    let b = || Arc::new(UniformScorer::new(4));
    let c = tokens("a b");
    let req = ScoreRequest::new(&[], &[], &c).unwrap();

    let s = mock::spawn(b(), MockOptions { failing_ops: vec!["score_next".into()], ..Default::default() });
    let r = RemoteScorer::connect(&s.addr).unwrap();
    assert!(matches!(r.score_next(&req), Err(ScorerError::Remote(m)) if m.contains("failed")));

    let s = mock::spawn(b(), MockOptions { nan: true, ..Default::default() });
    let r = RemoteScorer::connect(&s.addr).unwrap();
    assert_eq!(r.score_next(&req), Err(ScorerError::NonFinite));
    assert_eq!(r.score_sequence(&[], &c), Err(ScorerError::NonFinite));

    let s = mock::spawn(b(), MockOptions { short: true, ..Default::default() });
    let r = RemoteScorer::connect(&s.addr).unwrap();
    assert!(matches!(r.score_next(&req), Err(ScorerError::Protocol(_))));

    assert!(matches!(RemoteScorer::connect("127.0.0.1:1"), Err(ScorerError::Transport(_))));
}

#[test]
fn remote_generation_dedups_and_truncates() {
    let server = mock::spawn(Arc::new(UniformScorer::new(4)), MockOptions { generate: true, ..Default::default() });
    let r = RemoteScorer::connect(&server.addr).unwrap();
    let src = tokens("a b");
    let outs = r.generate_paraphrases(&src, 10).unwrap();
    // mock returns rev, src, [], rev, src+please
    assert_eq!(outs, vec![tokens("b a"), tokens("a b"), vec![], tokens("a b please")]);
    assert_eq!(r.generate_paraphrases(&src, 2).unwrap().len(), 2);
    assert!(r.generate_paraphrases(&src, 0).unwrap().is_empty());
}

#[test]
fn remote_over_byte_streams() {
    // one canned response per request, in order
    let script = "{\"id\":1,\"capabilities\":[\"score\",\"eos\"]}\n{\"id\":2,\"logprob\":-1.5}\n";
    let r = RemoteScorer::from_streams(Box::new(BufReader::new(Cursor::new(script))), Box::new(Vec::new())).unwrap();
    assert!(r.models_termination());
    assert_eq!(r.score_sequence(&[], &tokens("x")).unwrap(), -1.5);
    assert!(matches!(r.score_sequence(&[], &tokens("x")), Err(ScorerError::Transport(_))));
}

#[test]
fn remote_over_stdio() {
    let script = r#"
import json, sys
for line in sys.stdin:
    req = json.loads(line)
    if req["op"] == "hello":
        out = {"capabilities": ["score"]}
    else:
        out = {"logprobs": [-2.0] * len(req["candidates"])}
    out["id"] = req["id"]
    print(json.dumps(out), flush=True)
"#;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("server.py");
    std::fs::write(&path, script).unwrap();
    let Ok(r) = RemoteScorer::connect(&format!("stdio:python3 {}", path.display())) else {
        eprintln!("python3 unavailable; skipping");
        return;
    };
    let c = tokens("a b c");
    assert_eq!(r.score_next(&ScoreRequest::new(&[], &[], &c).unwrap()).unwrap().logprobs, vec![-2.0; 3]);
}
