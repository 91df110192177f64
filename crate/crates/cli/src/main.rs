mod config;
mod decode;

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use paradecode::align::{load_pairs, train_ibm2};
use paradecode::datagen::{self, load_dataset, sample_cus, synth_self_paras, DEFAULT_CUS};
use paradecode::eval::{evaluate, parse_gold, parse_predictions};
use paradecode::grammar::SemanticSchema;
use paradecode::lr1::Lr1Table;
use paradecode::{validate_grammar, Grammar};

#[derive(Parser)]
#[command(name = "paradecode", version, about = "Grammar-constrained paraphrase decoding for semantic parsing")]
struct Cli {
    /// More log output on stderr (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a grammar for syntax errors and unproductive or unreachable symbols
    Validate {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Decode input utterances into canonical utterances and logical forms
    Decode(Box<DecodeArgs>),
    /// Score decode output against gold logical forms
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Include per-item results in the report
        #[arg(long)]
        per_item: bool,
    },
    /// Sample canonical utterances, optionally with model paraphrases
    Sample {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(short, long, default_value_t = DEFAULT_CUS)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        max_depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also generate this many self-paraphrase records (needs a remote scorer)
        #[arg(long, default_value_t = 0)]
        self_paras: usize,
        #[arg(long)]
        scorer: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train the IBM Model 2 alignment model used for reranking
    TrainAlign {
        /// JSONL lines of {"x": [...], "c": [...]}
        #[arg(long, required_unless_present = "dataset", conflicts_with = "dataset")]
        pairs: Option<PathBuf>,
        /// Dataset written by `sample`; its self-paraphrase records are used
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Print the LR(1) tables of a grammar as JSON
    DumpAutomaton {
        #[arg(long)]
        grammar: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Rule,
    Word,
}

#[derive(Args)]
pub struct DecodeArgs {
    /// TOML file with defaults for any of the flags below
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub grammar: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// JSONL lines of {"id": .., "utterance": [...], "gold_lf": [...]}
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// uniform[:V], bigram:<corpus>, or remote:<host:port | stdio:command>
    #[arg(long)]
    pub scorer: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub beam: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub n_best: Option<usize>,
    /// Renormalize next-word scores over the grammar-allowed words
    #[arg(long)]
    pub renormalize: bool,
    #[arg(long)]
    pub rerank: bool,
    #[arg(long)]
    pub align_model: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Write per-round beam snapshots as JSONL to PATH, or to stderr
    #[arg(long, value_name = "PATH", num_args = 0..=1)]
    pub trace: Option<Option<PathBuf>>,
    /// Accepted for scripting; built-in decoding draws no random numbers
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub bigram_smoothing: Option<f64>,
    #[arg(long)]
    pub bigram_eos: Option<bool>,
    /// Bonus for words shared with the input, for the bigram scorer
    #[arg(long)]
    pub source_bonus: Option<f64>,
    #[arg(long)]
    pub weight_gen: Option<f64>,
    #[arg(long)]
    pub weight_rec: Option<f64>,
    #[arg(long)]
    pub weight_asso: Option<f64>,
}

/// A command failure reported as one `error: <kind>: <message>` line.
#[derive(Debug)]
pub struct Failure {
    pub kind: &'static str,
    pub message: String,
}

pub fn fail(kind: &'static str, e: impl Display) -> Failure {
    Failure { kind, message: e.to_string() }
}

type Outcome = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            report(&fail("usage", first));
            return ExitCode::from(2);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.cmd {
        Cmd::Validate { grammar, schema } => cmd_validate(&grammar, schema.as_deref()),
        Cmd::Decode(args) => decode::run(*args),
        Cmd::Eval { predictions, gold, per_item } => cmd_eval(&predictions, &gold, per_item),
        Cmd::Sample { grammar, schema, n, max_depth, seed, self_paras, scorer, output } => {
            cmd_sample(&grammar, schema.as_deref(), n, max_depth, seed, self_paras, scorer.as_deref(), output.as_deref())
        }
        Cmd::TrainAlign { pairs, dataset, epochs, output } => {
            cmd_train_align(pairs.as_deref(), dataset.as_deref(), epochs, &output)
        }
        Cmd::DumpAutomaton { grammar } => cmd_dump_automaton(&grammar),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            report(&f);
            ExitCode::from(2)
        }
    }
}

fn report(f: &Failure) {
    let msg = f.message.split_whitespace().collect::<Vec<_>>().join(" ");
    eprintln!("error: {}: {}", f.kind, msg);
}

pub fn load_grammar(path: &Path, schema: Option<&Path>) -> Result<Grammar, Failure> {
    let g = Grammar::load(path).map_err(|e| fail("grammar", format!("{}: {e}", path.display())))?;
    match schema {
        Some(p) => {
            let s = SemanticSchema::load(p).map_err(|e| fail("schema", format!("{}: {e}", p.display())))?;
            Ok(g.with_schema(s))
        }
        None => Ok(g),
    }
}

pub fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| fail("io", format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| fail("io", e))
        }
    }
}

fn cmd_validate(grammar: &Path, schema: Option<&Path>) -> Outcome {
    let g = load_grammar(grammar, schema)?;
    let report = validate_grammar(&g);
    if report.is_empty() {
        write_output(None, &format!("ok: {} rules\n", g.rules().len()))?;
        Ok(ExitCode::SUCCESS)
    } else {
        write_output(None, &report.to_string())?;
        Ok(ExitCode::from(1))
    }
}

fn cmd_eval(predictions: &Path, gold: &Path, per_item: bool) -> Outcome {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| fail("io", format!("{}: {e}", p.display())));
    let preds = parse_predictions(&read(predictions)?).map_err(|e| fail("input", e))?;
    let gold = parse_gold(&read(gold)?).map_err(|e| fail("input", e))?;
    let mut report = evaluate(&preds, &gold).map_err(|e| fail("eval", e))?;
    if !per_item {
        report.per_item.clear();
    }
    let mut v = serde_json::to_value(&report).map_err(|e| fail("io", e))?;
    if !per_item {
        v.as_object_mut().expect("report is an object").remove("per_item");
    }
    write_output(None, &format!("{v}\n"))?;
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sample(
    grammar: &Path,
    schema: Option<&Path>,
    n: usize,
    max_depth: usize,
    seed: u64,
    self_paras: usize,
    scorer: Option<&str>,
    output: Option<&Path>,
) -> Outcome {
    let g = load_grammar(grammar, schema)?;
    let mut records = sample_cus(&g, n, max_depth, seed).map_err(|e| fail("sample", e))?;
    if self_paras > 0 {
        let spec = scorer.ok_or_else(|| fail("usage", "--self-paras needs --scorer remote:<addr>"))?;
        let scorer = decode::build_scorer(spec, &g, &Default::default())?;
        let k = self_paras.div_ceil(records.len().max(1));
        let mut paras = synth_self_paras(&records, &*scorer, k).map_err(|e| fail("scorer", e))?;
        paras.truncate(self_paras);
        records.extend(paras);
    }
    let mut buf = Vec::new();
    datagen::write_jsonl(&records, &mut buf).map_err(|e| fail("io", e))?;
    write_output(output, &String::from_utf8(buf).expect("JSON is UTF-8"))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_train_align(pairs: Option<&Path>, dataset: Option<&Path>, epochs: usize, output: &Path) -> Outcome {
    let corpus = match (pairs, dataset) {
        (Some(p), _) => load_pairs(p).map_err(|e| fail("input", format!("{}: {e}", p.display())))?,
        (None, Some(d)) => load_dataset(d)
            .map_err(|e| fail("input", format!("{}: {e}", d.display())))?
            .iter()
            .filter_map(|r| r.as_pair())
            .collect(),
        (None, None) => return Err(fail("usage", "one of --pairs or --dataset is required")),
    };
    let (model, log) = train_ibm2(&corpus, epochs).map_err(|e| fail("align", e))?;
    for (k, (f, r)) in log.fwd.iter().zip(&log.rev).enumerate() {
        log::info!("epoch {}: log-likelihood x->c {f:.4}, c->x {r:.4}", k + 1);
    }
    model.save(output).map_err(|e| fail("io", format!("{}: {e}", output.display())))?;
    let summary = serde_json::json!({"pairs": corpus.len(), "epochs": epochs, "log_likelihood": log});
    write_output(None, &format!("{summary}\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_dump_automaton(grammar: &Path) -> Outcome {
    let g = load_grammar(grammar, None)?;
    let t = Lr1Table::build(&g).map_err(|e| fail("automaton", e))?;
    let text = serde_json::to_string_pretty(&t.dump(&g)).map_err(|e| fail("io", e))?;
    write_output(None, &format!("{text}\n"))?;
    Ok(ExitCode::SUCCESS)
}
