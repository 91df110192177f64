use std::path::PathBuf;
use std::process::ExitCode;

use paradecode::align::{rerank, AlignmentModel, RerankWeights};
use paradecode::decoder::{
    decode_rule_level, decode_rule_level_traced, decode_word_level, decode_word_level_traced, Candidate,
    DecodeParams, TraceRound,
};
use paradecode::lr1::Lr1Table;
use paradecode::scorer::{BigramConfig, BigramScorer, RemoteScorer, Scorer, UniformScorer};
use paradecode::Grammar;
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::FileConfig;
use crate::{fail, load_grammar, write_output, DecodeArgs, Failure, Mode};

/// Where `--trace` output goes.
#[derive(Debug, Clone, PartialEq)]
enum TraceSink {
    Stderr,
    File(PathBuf),
}

/// Flags merged over the config file over built-in defaults.
#[derive(Debug)]
struct Settings {
    grammar: PathBuf,
    schema: Option<PathBuf>,
    input: PathBuf,
    output: Option<PathBuf>,
    scorer: String,
    mode: Mode,
    params: DecodeParams,
    rerank: bool,
    align_model: Option<PathBuf>,
    jobs: usize,
    trace: Option<TraceSink>,
    bigram: BigramConfig,
    weights: RerankWeights,
}

fn settings(a: DecodeArgs) -> Result<Settings, Failure> {
    let cfg = match &a.config {
        Some(p) => FileConfig::load(p).map_err(|e| fail("config", format!("{}: {e}", p.display())))?,
        None => FileConfig::default(),
    };
    let mode = match (a.mode, cfg.mode.as_deref()) {
        (Some(m), _) => m,
        (None, Some("rule")) | (None, None) => Mode::Rule,
        (None, Some("word")) => Mode::Word,
        (None, Some(other)) => return Err(fail("config", format!("unknown mode {other:?}"))),
    };
    let d = DecodeParams::default();
    let beam_size = a.beam.or(cfg.beam).unwrap_or(d.beam_size);
    let params = DecodeParams {
        beam_size,
        max_len: a.max_len.or(cfg.max_len).unwrap_or(d.max_len),
        max_depth: a.max_depth.or(cfg.max_depth).unwrap_or(d.max_depth),
        n_best: a.n_best.or(cfg.n_best).unwrap_or(d.n_best.min(beam_size)),
        renormalize: a.renormalize || cfg.renormalize.unwrap_or(false),
    };
    params.validate().map_err(|e| fail("usage", e))?;
    let b = BigramConfig::default();
    let bigram = BigramConfig {
        smoothing: a.bigram_smoothing.or(cfg.bigram_smoothing).unwrap_or(b.smoothing),
        model_eos: a.bigram_eos.or(cfg.bigram_eos).unwrap_or(b.model_eos),
        source_bonus: a.source_bonus.or(cfg.source_bonus).unwrap_or(b.source_bonus),
    };
    let w = RerankWeights::default();
    let weights = RerankWeights {
        gen: a.weight_gen.or(cfg.weight_gen).unwrap_or(w.gen),
        rec: a.weight_rec.or(cfg.weight_rec).unwrap_or(w.rec),
        asso: a.weight_asso.or(cfg.weight_asso).unwrap_or(w.asso),
    };
    let trace = match a.trace {
        Some(Some(p)) => Some(TraceSink::File(p)),
        Some(None) => Some(TraceSink::Stderr),
        None if cfg.trace == Some(true) => Some(TraceSink::Stderr),
        None => None,
    };
    let s = Settings {
        grammar: a.grammar.or(cfg.grammar).ok_or_else(|| fail("usage", "--grammar is required"))?,
        schema: a.schema.or(cfg.schema),
        input: a.input,
        output: a.output,
        scorer: a.scorer.or(cfg.scorer).unwrap_or_else(|| "uniform".into()),
        mode,
        params,
        rerank: a.rerank || cfg.rerank.unwrap_or(false),
        align_model: a.align_model.or(cfg.align_model),
        jobs: a.jobs.or(cfg.jobs).unwrap_or(1),
        trace,
        bigram,
        weights,
    };
    if s.rerank && s.align_model.is_none() {
        return Err(fail("usage", "--rerank needs --align-model"));
    }
    if s.jobs == 0 {
        return Err(fail("usage", "--jobs must be at least 1"));
    }
    if let Some(seed) = a.seed {
        log::debug!("seed {seed}: built-in decoding is deterministic and does not draw from it");
    }
    Ok(s)
}

/// `uniform[:V]`, `bigram:<corpus>` or `remote:<addr>`. Without an explicit
/// size the uniform scorer spreads over the grammar's terminals; the bigram
/// vocabulary is widened with them too.
pub fn build_scorer(spec: &str, g: &Grammar, bigram: &BigramConfig) -> Result<Box<dyn Scorer>, Failure> {
    let terminals = g.terminals();
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    match (kind, arg) {
        ("uniform", "") => Ok(Box::new(UniformScorer::new(terminals.len().max(1)))),
        ("uniform", v) => match v.parse::<usize>() {
            Ok(v) if v > 0 => Ok(Box::new(UniformScorer::new(v))),
            _ => Err(fail("usage", format!("bad uniform vocabulary size {v:?}"))),
        },
        ("bigram", path) if !path.is_empty() => {
            let s = BigramScorer::from_text_file(path, terminals.iter().map(String::as_str), bigram.clone())
                .map_err(|e| fail("scorer", format!("{path}: {e}")))?;
            Ok(Box::new(s))
        }
        ("remote", addr) if !addr.is_empty() => {
            Ok(Box::new(RemoteScorer::connect(addr).map_err(|e| fail("scorer", e))?))
        }
        _ => Err(fail("usage", format!("unknown scorer {spec:?}; expected uniform[:V], bigram:<path> or remote:<addr>"))),
    }
}

#[derive(Deserialize)]
struct InputLine {
    id: Value,
    #[serde(deserialize_with = "paradecode::eval::utterance")]
    utterance: Vec<String>,
}

fn parse_inputs(text: &str) -> Result<Vec<InputLine>, Failure> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| serde_json::from_str(l).map_err(|e| fail("input", format!("line {}: {e}", k + 1))))
        .collect()
}

struct Ctx<'a> {
    g: &'a Grammar,
    table: Option<&'a Lr1Table>,
    scorer: &'a dyn Scorer,
    params: &'a DecodeParams,
    rerank: Option<(&'a AlignmentModel, &'a RerankWeights)>,
    trace: bool,
}

fn candidate_json(c: &Candidate) -> serde_json::Map<String, Value> {
    let v = json!({
        "utterance": c.utterance,
        "lf": c.logical_form,
        "rules": c.derivation.rule_ids(),
        "gen": c.logp,
    });
    match v {
        Value::Object(m) => m,
        _ => unreachable!(),
    }
}

fn decode_one(item: &InputLine, ctx: &Ctx) -> Result<(Value, Vec<TraceRound>), Failure> {
    let x = &item.utterance;
    let mut trace = Vec::new();
    let cands = match (ctx.table, ctx.trace) {
        (None, false) => decode_rule_level(x, ctx.g, ctx.scorer, ctx.params),
        (None, true) => decode_rule_level_traced(x, ctx.g, ctx.scorer, ctx.params, &mut trace),
        (Some(t), false) => decode_word_level(x, ctx.g, t, ctx.scorer, ctx.params),
        (Some(t), true) => decode_word_level_traced(x, ctx.g, t, ctx.scorer, ctx.params, &mut trace),
    }
    .map_err(|e| fail("decode", format!("input {}: {e}", item.id)))?;
    let out: Vec<Value> = match ctx.rerank {
        None => cands.iter().map(|c| Value::Object(candidate_json(c))).collect(),
        Some((m, w)) => rerank(x, cands, ctx.scorer, m, w)
            .map_err(|e| fail("scorer", format!("input {}: {e}", item.id)))?
            .iter()
            .map(|r| {
                let mut o = candidate_json(&r.candidate);
                o.insert("rec".into(), json!(r.rec));
                o.insert("asso".into(), json!(r.asso));
                o.insert("total".into(), json!(r.total));
                Value::Object(o)
            })
            .collect(),
    };
    Ok((json!({"id": item.id, "utterance": x, "candidates": out}), trace))
}

pub fn run(args: DecodeArgs) -> Result<ExitCode, Failure> {
    let s = settings(args)?;
    let g = load_grammar(&s.grammar, s.schema.as_deref())?;
    let table = match s.mode {
        Mode::Word => Some(Lr1Table::build(&g).map_err(|e| fail("automaton", e))?),
        Mode::Rule => None,
    };
    let align = match &s.align_model {
        Some(p) if s.rerank => {
            Some(AlignmentModel::load(p).map_err(|e| fail("align", format!("{}: {e}", p.display())))?)
        }
        _ => None,
    };
    let text = std::fs::read_to_string(&s.input).map_err(|e| fail("io", format!("{}: {e}", s.input.display())))?;
    let inputs = parse_inputs(&text)?;
    let scorer = build_scorer(&s.scorer, &g, &s.bigram)?;
    let ctx = Ctx {
        g: &g,
        table: table.as_ref(),
        scorer: &*scorer,
        params: &s.params,
        rerank: align.as_ref().map(|m| (m, &s.weights)),
        trace: s.trace.is_some(),
    };
    let results: Vec<_> = if s.jobs == 1 {
        inputs.iter().map(|i| decode_one(i, &ctx)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(s.jobs).build().map_err(|e| fail("io", e))?;
        pool.install(|| inputs.par_iter().map(|i| decode_one(i, &ctx)).collect())
    };
    let mut out = String::new();
    let mut trace_out = String::new();
    for (item, r) in inputs.iter().zip(results) {
        let (line, rounds) = r?;
        out.push_str(&line.to_string());
        out.push('\n');
        for round in rounds {
            let mut v = serde_json::to_value(&round).map_err(|e| fail("io", e))?;
            v["id"] = item.id.clone();
            trace_out.push_str(&v.to_string());
            trace_out.push('\n');
        }
    }
    match &s.trace {
        Some(TraceSink::File(p)) => std::fs::write(p, &trace_out).map_err(|e| fail("io", format!("{}: {e}", p.display())))?,
        Some(TraceSink::Stderr) => eprint!("{trace_out}"),
        None => {}
    }
    write_output(s.output.as_deref(), &out)?;
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    #[derive(Parser)]
    struct Wrap {
        #[command(flatten)]
        d: DecodeArgs,
    }

    fn parse(args: &[&str]) -> Result<Settings, Failure> {
        let mut v = vec!["x", "--input", "in.jsonl"];
        v.extend_from_slice(args);
        settings(Wrap::parse_from(v).d)
    }

    #[test]
    fn defaults() {
        let s = parse(&["--grammar", "g.scfg"]).unwrap();
        assert_eq!(s.mode, Mode::Rule);
        assert_eq!(s.params, DecodeParams::default());
        assert_eq!(s.scorer, "uniform");
        assert_eq!(s.jobs, 1);
        assert!(s.trace.is_none());
    }

    #[test]
    fn n_best_follows_a_narrow_beam() {
        let s = parse(&["--grammar", "g", "--beam", "3"]).unwrap();
        assert_eq!(s.params.n_best, 3);
        assert!(parse(&["--grammar", "g", "--beam", "3", "--n-best", "4"]).is_err());
    }

    #[test]
    fn flags_win_over_config() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "grammar = \"g.scfg\"\nbeam = 7\nmode = \"word\"\nweight_asso = 0.5\ntrace = true\n").unwrap();
        let c = p.to_str().unwrap();
        let s = parse(&["--config", c]).unwrap();
        assert_eq!((s.params.beam_size, s.mode, s.weights.asso), (7, Mode::Word, 0.5));
        assert_eq!(s.grammar, dir.path().join("g.scfg"));
        assert_eq!(s.trace, Some(TraceSink::Stderr));
        let s = parse(&["--config", c, "--beam", "9", "--mode", "rule", "--grammar", "h"]).unwrap();
        assert_eq!((s.params.beam_size, s.mode), (9, Mode::Rule));
        assert_eq!(s.grammar, PathBuf::from("h"));
    }

    #[test]
    fn usage_errors() {
        assert_eq!(parse(&[]).unwrap_err().kind, "usage");
        assert_eq!(parse(&["--grammar", "g", "--rerank"]).unwrap_err().kind, "usage");
        assert_eq!(parse(&["--grammar", "g", "--jobs", "0"]).unwrap_err().kind, "usage");
    }

    #[test]
    fn scorer_specs() {
        let g = paradecode::parse_grammar(include_str!("../../../fixtures/g1.scfg")).unwrap();
        let b = BigramConfig::default();
        assert!(build_scorer("uniform", &g, &b).is_ok());
        assert!(build_scorer("uniform:5", &g, &b).is_ok());
        for bad in ["uniform:0", "uniform:x", "bigram:", "remote:", "lstm"] {
            assert_eq!(build_scorer(bad, &g, &b).err().unwrap().kind, "usage", "{bad}");
        }
        assert_eq!(build_scorer("bigram:/no/such/file", &g, &b).err().unwrap().kind, "scorer");
    }
}
