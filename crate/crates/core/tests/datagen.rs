use std::sync::Arc;

use paradecode::datagen::{export_dataset, load_dataset, sample_cus, synth_self_paras, Origin, SynthRecord};
use paradecode::scorer::{RemoteScorer, UniformScorer};
use paradecode::{parse_canonical, tokens};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use testkit::enumerate::enumerate;
use testkit::mock::{self, MockOptions};
use testkit::toy::{toy_grammar, ToyConfig};

#[test]
fn records_round_trip_and_respect_schema() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let cfg = ToyConfig { schema: true, ..Default::default() };
    for _ in 0..5 {
        let g = toy_grammar(&mut rng, &cfg, 30, 20..=200);
        let recs = sample_cus(&g, 15, 6, 9).unwrap();
        let allowed: Vec<Vec<String>> = enumerate(&g, 30).iter().map(|d| d.utterance()).collect();
        let mut cus: Vec<_> = recs.iter().map(|r| r.cu.clone()).collect();
        cus.sort();
        cus.dedup();
        assert_eq!(cus.len(), recs.len());
        for r in &recs {
            assert_eq!(r.origin, Origin::Cu);
            assert_eq!(parse_canonical(&g, &r.cu).unwrap().logical_form(), r.lf);
            assert!(allowed.contains(&r.cu));
        }
    }
}

#[test]
fn sampling_is_byte_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let g = toy_grammar(&mut rng, &ToyConfig::default(), 30, 50..=200);
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    export_dataset(&sample_cus(&g, 30, 5, 3).unwrap(), &a).unwrap();
    export_dataset(&sample_cus(&g, 30, 5, 3).unwrap(), &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn export_reload() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    assert_eq!(export_dataset(&[], &path).unwrap(), 0);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "");

    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let recs: Vec<SynthRecord> = (0..10_000)
        .map(|k| {
            use rand::Rng;
            let w = |rng: &mut ChaCha8Rng| (0..rng.gen_range(1..6)).map(|_| format!("t{}", rng.gen_range(0..50))).collect();
            let para = (k % 2 == 1).then(|| w(&mut rng));
            SynthRecord {
                cu: w(&mut rng),
                lf: w(&mut rng),
                origin: if para.is_some() { Origin::SelfPara } else { Origin::Cu },
                paraphrase: para,
            }
        })
        .collect();
    assert_eq!(export_dataset(&recs, &path).unwrap(), 10_000);
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 10_000);
    assert_eq!(load_dataset(&path).unwrap(), recs);
}

#[test]
fn self_paraphrases_from_remote() {
    let g = paradecode::parse_grammar(include_str!("../../../fixtures/g1.scfg")).unwrap();
    let mut cus = sample_cus(&g, 2, 3, 1).unwrap();
    cus.push(SynthRecord { cu: tokens("what is state0 really"), lf: tokens("answer ( state0 )"), paraphrase: None, origin: Origin::Cu });
    let server = mock::spawn(Arc::new(UniformScorer::new(3)), MockOptions { generate: true, ..Default::default() });
    let r = RemoteScorer::connect(&server.addr).unwrap();
    let out = synth_self_paras(&cus, &r, 2).unwrap();
    assert!(out.len() <= 6 && !out.is_empty());
    for rec in &out {
        let p = rec.paraphrase.as_ref().unwrap();
        assert_eq!(rec.origin, Origin::SelfPara);
        assert!(!p.is_empty());
        assert_ne!(p, &rec.cu);
        assert!(cus.iter().any(|c| c.cu == rec.cu && c.lf == rec.lf));
    }
    assert!(synth_self_paras(&cus, &r, 0).unwrap().is_empty());
}

#[test]
fn failing_generation_skips_records() {
    let server = mock::spawn(
        Arc::new(UniformScorer::new(3)),
        MockOptions { generate: true, failing_ops: vec!["generate".into()], ..Default::default() },
    );
    let r = RemoteScorer::connect(&server.addr).unwrap();
    let cus = vec![SynthRecord { cu: tokens("a"), lf: tokens("b"), paraphrase: None, origin: Origin::Cu }];
    assert!(synth_self_paras(&cus, &r, 2).unwrap().is_empty());
}
