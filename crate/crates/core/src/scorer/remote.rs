//! Client for the newline-delimited JSON scoring protocol.
//!
//! ```text
//! {"id":1,"op":"hello"}                                   -> {"id":1,"capabilities":[...]}
//! {"id":2,"op":"score_next","source":[..],"prefix":[..],"candidates":[..]} -> {"id":2,"logprobs":[..]}
//! {"id":3,"op":"score_seq","source":[..],"target":[..]}  -> {"id":3,"logprob":..}
//! {"id":4,"op":"generate","source":[..],"n":2}           -> {"id":4,"outputs":[[..],..]}
//! ```
//! Errors come back as `{"id":..,"error":".."}`.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::Mutex;

use serde_json::{json, Value};

use super::{ScoreRequest, ScoreResponse, Scorer, ScorerError};

struct Conn {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    // responses read while waiting for a different id
    stash: HashMap<u64, Value>,
    next_id: u64,
    child: Option<Child>,
}

pub struct RemoteScorer {
    conn: Mutex<Conn>,
    capabilities: Vec<String>,
}

impl std::fmt::Debug for RemoteScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteScorer").field("capabilities", &self.capabilities).finish()
    }
}

fn transport(e: impl std::fmt::Display) -> ScorerError {
    ScorerError::Transport(e.to_string())
}

impl RemoteScorer {
    /// `host:port` for TCP, or `stdio:<command line>` to spawn a server
    /// speaking the protocol on its stdin/stdout.
    pub fn connect(addr: &str) -> Result<Self, ScorerError> {
        if let Some(cmdline) = addr.strip_prefix("stdio:") {
            let mut parts = cmdline.split_whitespace();
            let program = parts.next().ok_or_else(|| transport("empty stdio command"))?;
            let mut child = Command::new(program)
                .args(parts)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .spawn()
                .map_err(transport)?;
            let stdin = child.stdin.take().expect("piped stdin");
            let stdout = child.stdout.take().expect("piped stdout");
            Self::handshake(Box::new(BufReader::new(stdout)), Box::new(stdin), Some(child))
        } else {
            let addr = addr.strip_prefix("tcp://").unwrap_or(addr);
            let stream = TcpStream::connect(addr).map_err(transport)?;
            stream.set_nodelay(true).map_err(transport)?;
            let reader = BufReader::new(stream.try_clone().map_err(transport)?);
            Self::handshake(Box::new(reader), Box::new(stream), None)
        }
    }

    /// Wraps an already-open byte stream pair.
    pub fn from_streams(
        reader: Box<dyn BufRead + Send>,
        writer: Box<dyn Write + Send>,
    ) -> Result<Self, ScorerError> {
        Self::handshake(reader, writer, None)
    }

    fn handshake(
        reader: Box<dyn BufRead + Send>,
        writer: Box<dyn Write + Send>,
        child: Option<Child>,
    ) -> Result<Self, ScorerError> {
        let conn = Conn { reader, writer, stash: HashMap::new(), next_id: 1, child };
        let mut scorer = RemoteScorer { conn: Mutex::new(conn), capabilities: Vec::new() };
        let resp = scorer.call(json!({"op": "hello"}))?;
        scorer.capabilities = resp
            .get("capabilities")
            .and_then(Value::as_array)
            .ok_or_else(|| ScorerError::Protocol("hello response lacks capabilities".into()))?
            .iter()
            .filter_map(|c| c.as_str().map(str::to_owned))
            .collect();
        Ok(scorer)
    }

    fn has(&self, cap: &str) -> bool {
        self.capabilities.iter().any(|c| c == cap)
    }

    fn call(&self, mut msg: Value) -> Result<Value, ScorerError> {
        let mut conn = self.conn.lock().map_err(|_| transport("connection lock poisoned"))?;
        let id = conn.next_id;
        conn.next_id += 1;
        msg["id"] = json!(id);
        let mut line = serde_json::to_string(&msg).map_err(transport)?;
        line.push('\n');
        conn.writer.write_all(line.as_bytes()).map_err(transport)?;
        conn.writer.flush().map_err(transport)?;

        let resp = loop {
            if let Some(v) = conn.stash.remove(&id) {
                break v;
            }
            let mut buf = String::new();
            if conn.reader.read_line(&mut buf).map_err(transport)? == 0 {
                return Err(transport("connection closed"));
            }
            if buf.trim().is_empty() {
                continue;
            }
            let v: Value = serde_json::from_str(&buf).map_err(|e| ScorerError::Protocol(e.to_string()))?;
            match v.get("id").and_then(Value::as_u64) {
                Some(got) if got == id => break v,
                Some(got) => {
                    conn.stash.insert(got, v);
                }
                None => return Err(ScorerError::Protocol(format!("response without id: {}", buf.trim()))),
            }
        };
        if let Some(err) = resp.get("error") {
            return Err(ScorerError::Remote(err.as_str().map(str::to_owned).unwrap_or_else(|| err.to_string())));
        }
        Ok(resp)
    }
}

fn finite(v: &Value) -> Result<f64, ScorerError> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Ok(x),
        _ => Err(ScorerError::NonFinite),
    }
}

fn token_array(v: &Value) -> Result<Vec<String>, ScorerError> {
    v.as_array()
        .ok_or_else(|| ScorerError::Protocol("expected a token array".into()))?
        .iter()
        .map(|t| t.as_str().map(str::to_owned).ok_or_else(|| ScorerError::Protocol("tokens must be strings".into())))
        .collect()
}

impl Scorer for RemoteScorer {
    fn score_next(&self, req: &ScoreRequest<'_>) -> Result<ScoreResponse, ScorerError> {
        let resp = self.call(json!({
            "op": "score_next",
            "source": req.source,
            "prefix": req.prefix,
            "candidates": req.candidates,
        }))?;
        let arr = resp
            .get("logprobs")
            .and_then(Value::as_array)
            .ok_or_else(|| ScorerError::Protocol("missing logprobs".into()))?;
        if arr.len() != req.candidates.len() {
            return Err(ScorerError::Protocol(format!(
                "{} logprobs for {} candidates",
                arr.len(),
                req.candidates.len()
            )));
        }
        let logprobs = arr.iter().map(finite).collect::<Result<_, _>>()?;
        Ok(ScoreResponse { logprobs })
    }

    fn models_termination(&self) -> bool {
        self.has("eos")
    }

    fn score_sequence(&self, source: &[String], target: &[String]) -> Result<f64, ScorerError> {
        if target.is_empty() {
            return Err(ScorerError::BadRequest("empty target".into()));
        }
        let resp = self.call(json!({"op": "score_seq", "source": source, "target": target}))?;
        finite(resp.get("logprob").unwrap_or(&Value::Null))
    }

    fn generate_paraphrases(&self, source: &[String], n: usize) -> Result<Vec<Vec<String>>, ScorerError> {
        if !self.has("generate") {
            return Err(ScorerError::Unsupported("generate"));
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        let resp = self.call(json!({"op": "generate", "source": source, "n": n}))?;
        let outputs = resp
            .get("outputs")
            .and_then(Value::as_array)
            .ok_or_else(|| ScorerError::Protocol("missing outputs".into()))?;
        let mut seen = Vec::new();
        for o in outputs {
            let toks = token_array(o)?;
            if !seen.contains(&toks) {
                seen.push(toks);
            }
        }
        seen.truncate(n);
        Ok(seen)
    }

    fn capabilities(&self) -> Vec<String> {
        self.capabilities.clone()
    }
}

impl Drop for RemoteScorer {
    fn drop(&mut self) {
        if let Ok(conn) = self.conn.get_mut() {
            if let Some(child) = conn.child.as_mut() {
                let _ = child.kill();
                let _ = child.wait();
            }
        }
    }
}
