//! In-process server for the newline-delimited JSON scoring protocol,
//! backed by any built-in scorer.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::thread;

use paradecode::scorer::{ScoreRequest, Scorer};
use serde_json::{json, Value};

#[derive(Debug, Clone, Default)]
pub struct MockOptions {
    /// Advertise the `eos` capability.
    pub eos: bool,
    /// Advertise `generate`; outputs are derived from the source tokens.
    pub generate: bool,
    /// Send a response for an unrelated id before each real response.
    pub stray_responses: bool,
    /// Ops answered with an error object.
    pub failing_ops: Vec<String>,
    /// Send null for every score, as JSON has no NaN.
    pub nan: bool,
    /// Return one score too few from `score_next`.
    pub short: bool,
}

pub struct MockServer {
    pub addr: String,
}

/// Binds to an ephemeral local port and serves each connection on its own thread.
pub fn spawn(backend: Arc<dyn Scorer>, opts: MockOptions) -> MockServer {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let addr = listener.local_addr().unwrap().to_string();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { break };
            let _ = stream.set_nodelay(true);
            let (backend, opts) = (backend.clone(), opts.clone());
            thread::spawn(move || {
                let reader = BufReader::new(stream.try_clone().unwrap());
                serve(&*backend, &opts, reader, stream);
            });
        }
    });
    MockServer { addr }
}

fn strings(v: &Value) -> Vec<String> {
    v.as_array()
        .map(|a| a.iter().filter_map(|t| t.as_str().map(str::to_owned)).collect())
        .unwrap_or_default()
}

/// Paraphrases for the mock: the reversed source, the source itself, an
/// empty output, the reversed source again, and the source with a suffix.
fn fake_paraphrases(source: &[String], n: usize) -> Vec<Vec<String>> {
    let mut rev = source.to_vec();
    rev.reverse();
    let mut plus = source.to_vec();
    plus.push("please".into());
    let mut out = vec![rev.clone(), source.to_vec(), Vec::new(), rev, plus];
    out.truncate(n + 3);
    out
}

pub fn serve<R: BufRead, W: Write>(backend: &dyn Scorer, opts: &MockOptions, reader: R, mut writer: W) {
    for line in reader.lines() {
        let Ok(line) = line else { return };
        if line.trim().is_empty() {
            continue;
        }
        let Ok(req) = serde_json::from_str::<Value>(&line) else { return };
        let id = req["id"].clone();
        let op = req["op"].as_str().unwrap_or("").to_owned();
        let source = strings(&req["source"]);
        let mut resp = if opts.failing_ops.contains(&op) {
            json!({"error": format!("{op} failed")})
        } else {
            match op.as_str() {
                "hello" => {
                    let mut caps = vec!["score"];
                    if opts.eos {
                        caps.push("eos");
                    }
                    if opts.generate {
                        caps.push("generate");
                    }
                    json!({"capabilities": caps})
                }
                "score_next" => {
                    let prefix = strings(&req["prefix"]);
                    let cands = strings(&req["candidates"]);
                    match ScoreRequest::new(&source, &prefix, &cands).and_then(|r| backend.score_next(&r)) {
                        Ok(r) => {
                            let mut lps: Vec<Value> =
                                r.logprobs.iter().map(|&l| if opts.nan { Value::Null } else { json!(l) }).collect();
                            if opts.short {
                                lps.pop();
                            }
                            json!({"logprobs": lps})
                        }
                        Err(e) => json!({"error": e.to_string()}),
                    }
                }
                "score_seq" => match backend.score_sequence(&source, &strings(&req["target"])) {
                    Ok(l) if opts.nan => json!({"logprob": Value::Null, "note": l}),
                    Ok(l) => json!({"logprob": l}),
                    Err(e) => json!({"error": e.to_string()}),
                },
                "generate" if opts.generate => {
                    let n = req["n"].as_u64().unwrap_or(0) as usize;
                    json!({"outputs": fake_paraphrases(&source, n)})
                }
                _ => json!({"error": format!("unknown op {op}")}),
            }
        };
        resp["id"] = id.clone();
        if opts.stray_responses {
            let stray = json!({"id": 1_000_000 + id.as_u64().unwrap_or(0), "logprobs": []});
            if writeln!(writer, "{stray}").is_err() {
                return;
            }
        }
        if writeln!(writer, "{resp}").and_then(|_| writer.flush()).is_err() {
            return;
        }
    }
}
