//! `fmo`: kinding, normalization, equivalence, grammar export, first-order
//! grammar encoding, typechecking and program execution.
//!
//! Exit codes for `eq`: 0 bisimilar, 1 not bisimilar, 2 unknown; any parse
//! or kind error exits 3.

use std::collections::BTreeMap;
use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fmo_core::bisim::Verdict;
use fmo_core::equiv::{classify, equivalent, Backend, EquivConfig, Fragment};
use fmo_core::fog::{encode_fog, parse_fog};
use fmo_core::grammar::{GrammarBuilder, GrammarDump};
use fmo_core::lang::{parse_program, run, typecheck_program, Outcome};
use fmo_core::lts::reachable_lts;
use fmo_core::syntax::{KContext, Kind, Type, VarName};
use fmo_core::{kind_of, normalize, parse_kind, parse_type, rename, NormError};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "fmo", version, about = "context-free session types toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Auto,
    Grammar,
    Fsa,
    Oracle,
}

#[derive(Args)]
struct CommonOpts {
    /// Output format.
    #[arg(long, value_enum, default_value = "text")]
    format: OutputFormat,
    /// Kinds for free type variables, e.g. "a:S,b:T,f:S=>S".
    #[arg(long, default_value = "")]
    ctx: String,
}

#[derive(Args)]
struct EqOpts {
    /// Equivalence backend.
    #[arg(long, value_enum, default_value = "auto")]
    backend: BackendArg,
    /// Depth bound for the direct oracle.
    #[arg(long, default_value_t = 64)]
    oracle_depth: usize,
    /// Node budget for the grammar backend.
    #[arg(long, default_value_t = 100_000)]
    node_cap: usize,
    /// Depth budget for the grammar backend.
    #[arg(long, default_value_t = 1_000)]
    depth_cap: usize,
    /// State cap for the automaton fast path.
    #[arg(long, default_value_t = 4096)]
    fsa_cap: usize,
    /// Also print the distinguishing trace or certificate size.
    #[arg(long)]
    explain: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Kind of a type.
    Kind {
        #[command(flatten)]
        common: CommonOpts,
        /// Type expression, or @FILE.
        ty: String,
    },
    /// Weak head normal form of a type.
    Norm {
        #[command(flatten)]
        common: CommonOpts,
        ty: String,
    },
    /// Decide equivalence of two types (exit 0/1/2).
    Eq {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        opts: EqOpts,
        /// Left type (omit with --batch).
        lhs: Option<String>,
        /// Right type.
        rhs: Option<String>,
        /// File of tab-separated type pairs, one per line.
        #[arg(long)]
        batch: Option<String>,
    },
    /// Simple-grammar translation of a type.
    Grammar {
        #[command(flatten)]
        common: CommonOpts,
        ty: String,
    },
    /// Reachable fragment of the labelled transition system.
    Lts {
        #[command(flatten)]
        common: CommonOpts,
        ty: String,
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
    /// Encode a deterministic first-order grammar as types.
    Fog {
        #[command(flatten)]
        common: CommonOpts,
        /// Grammar file.
        file: String,
    },
    /// Typecheck a program file.
    Check {
        #[command(flatten)]
        common: CommonOpts,
        file: String,
    },
    /// Run a program file.
    Run {
        #[command(flatten)]
        common: CommonOpts,
        file: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        fuel: usize,
        /// Skip typechecking.
        #[arg(long)]
        unsafe_run: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode, String> {
    match cmd {
        Command::Kind { common, ty } => {
            let ctx = parse_ctx(&common.ctx)?;
            let t = load_type(&ty)?;
            let kind = kind_of(&ctx, &rename(&t)).map_err(|e| e.to_string())?;
            emit(common.format, &kind.to_string(), || {
                serde_json::json!({ "schema_version": SCHEMA_VERSION, "kind": kind.to_string() })
            });
            Ok(ExitCode::SUCCESS)
        }
        Command::Norm { common, ty } => {
            let ctx = parse_ctx(&common.ctx)?;
            let t = rename(&load_type(&ty)?);
            kind_of(&ctx, &t).map_err(|e| e.to_string())?;
            match normalize(&t) {
                Ok(w) => {
                    emit(common.format, &w.to_string(), || {
                        serde_json::json!({
                            "schema_version": SCHEMA_VERSION,
                            "normal_form": w.to_string(),
                        })
                    });
                    Ok(ExitCode::SUCCESS)
                }
                Err(NormError::Divergent { witness }) => {
                    Err(format!("type does not normalise (looping on {witness})"))
                }
            }
        }
        Command::Eq { common, opts, lhs, rhs, batch } => {
            let ctx = parse_ctx(&common.ctx)?;
            let config = EquivConfig {
                backend: match opts.backend {
                    BackendArg::Auto => Backend::Auto,
                    BackendArg::Grammar => Backend::Grammar,
                    BackendArg::Fsa => Backend::Fsa,
                    BackendArg::Oracle => Backend::Oracle,
                },
                oracle_depth: opts.oracle_depth,
                node_cap: opts.node_cap,
                depth_cap: opts.depth_cap,
                fsa_cap: opts.fsa_cap,
            };
            let pairs: Vec<(Type, Type)> = if let Some(path) = batch {
                let text = fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;
                let mut out = Vec::new();
                for (i, line) in text.lines().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let (l, r) = line
                        .split_once('\t')
                        .ok_or_else(|| format!("{path}:{}: expected 'T<TAB>U'", i + 1))?;
                    out.push((
                        parse_type(l).map_err(|e| e.to_string())?,
                        parse_type(r).map_err(|e| e.to_string())?,
                    ));
                }
                out
            } else {
                let lhs = lhs.ok_or("eq needs two types or --batch")?;
                let rhs = rhs.ok_or("eq needs two types or --batch")?;
                vec![(load_type(&lhs)?, load_type(&rhs)?)]
            };

            let mut worst = 0u8;
            let mut reports = Vec::new();
            for (l, r) in &pairs {
                for t in [l, r] {
                    // full kinding for the decidable fragment; arrow-kind
                    // recursion is admitted and routed to the oracle
                    if classify(&rename(t)) == Fragment::MuStarSemi {
                        kind_of(&ctx, &rename(t)).map_err(|e| e.to_string())?;
                    }
                }
                let verdict = equivalent(&ctx, l, r, &config).map_err(|e| e.to_string())?;
                worst = worst.max(match verdict {
                    Verdict::Bisimilar { .. } => 0,
                    Verdict::NotBisimilar { .. } => 1,
                    Verdict::Unknown { .. } => 2,
                });
                reports.push(report_verdict(&verdict, opts.explain));
            }
            match common.format {
                OutputFormat::Text => {
                    for r in &reports {
                        println!("{}", r.text);
                    }
                }
                OutputFormat::Json => {
                    let body = serde_json::json!({
                        "schema_version": SCHEMA_VERSION,
                        "results": reports.iter().map(|r| &r.json).collect::<Vec<_>>(),
                    });
                    println!("{}", serde_json::to_string_pretty(&body).unwrap());
                }
            }
            Ok(ExitCode::from(worst))
        }
        Command::Grammar { common, ty } => {
            let ctx = parse_ctx(&common.ctx)?;
            let t = rename(&load_type(&ty)?);
            kind_of(&ctx, &t).map_err(|e| e.to_string())?;
            let mut builder = GrammarBuilder::new();
            let word = builder.word(&t).map_err(|e| e.to_string())?;
            let dump = GrammarDump::new(builder.grammar(), &word);
            match common.format {
                OutputFormat::Text => print!("{}", dump.to_text()),
                OutputFormat::Json => {
                    println!("{}", serde_json::to_string_pretty(&dump).unwrap())
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Lts { common, ty, depth } => {
            let ctx = parse_ctx(&common.ctx)?;
            let t = rename(&load_type(&ty)?);
            kind_of(&ctx, &t).map_err(|e| e.to_string())?;
            let (states, edges) = reachable_lts(&t, depth).map_err(|e| e.to_string())?;
            match common.format {
                OutputFormat::Text => {
                    for (i, s) in states.iter().enumerate() {
                        println!("state {i}: {s}");
                    }
                    for (i, label, j) in &edges {
                        println!("{i} --{label}--> {j}");
                    }
                }
                OutputFormat::Json => {
                    let body = serde_json::json!({
                        "schema_version": SCHEMA_VERSION,
                        "states": states.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
                        "edges": edges
                            .iter()
                            .map(|(i, l, j)| serde_json::json!({
                                "from": i, "label": l.to_string(), "to": j,
                            }))
                            .collect::<Vec<_>>(),
                    });
                    println!("{}", serde_json::to_string_pretty(&body).unwrap());
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Fog { common, file } => {
            let text = fs::read_to_string(&file).map_err(|e| format!("{file}: {e}"))?;
            let grammar = parse_fog(&text).map_err(|e| e.to_string())?;
            let encoding = encode_fog(&grammar);
            match common.format {
                OutputFormat::Text => {
                    for (name, ty) in &encoding.nonterminals {
                        println!("{name} = {ty}");
                    }
                    if let Some(init) = &encoding.initial {
                        println!("start = {init}");
                    }
                }
                OutputFormat::Json => {
                    let body = serde_json::json!({
                        "schema_version": SCHEMA_VERSION,
                        "nonterminals": encoding
                            .nonterminals
                            .iter()
                            .map(|(n, t)| (n.clone(), t.to_string()))
                            .collect::<BTreeMap<String, String>>(),
                        "start": encoding.initial.as_ref().map(|t| t.to_string()),
                    });
                    println!("{}", serde_json::to_string_pretty(&body).unwrap());
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { common, file } => {
            let text = fs::read_to_string(&file).map_err(|e| format!("{file}: {e}"))?;
            let prog = parse_program(&text).map_err(|e| e.to_string())?;
            let types = typecheck_program(&prog).map_err(|e| e.to_string())?;
            match common.format {
                OutputFormat::Text => {
                    for item in &prog.items {
                        let marker = if item.body.is_some() { "" } else { " (axiom)" };
                        println!("{} : {}{marker}", item.name, types[&item.name]);
                    }
                }
                OutputFormat::Json => {
                    let body = serde_json::json!({
                        "schema_version": SCHEMA_VERSION,
                        "bindings": prog.items.iter().map(|i| serde_json::json!({
                            "name": i.name,
                            "type": types[&i.name].to_string(),
                            "axiom": i.body.is_none(),
                        })).collect::<Vec<_>>(),
                    });
                    println!("{}", serde_json::to_string_pretty(&body).unwrap());
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { common, file, seed, fuel, unsafe_run } => {
            let text = fs::read_to_string(&file).map_err(|e| format!("{file}: {e}"))?;
            let prog = parse_program(&text).map_err(|e| e.to_string())?;
            let outcome = run(&prog, seed, fuel, unsafe_run).map_err(|e| e.to_string())?;
            match common.format {
                OutputFormat::Text => println!("{outcome}"),
                OutputFormat::Json => {
                    let (status, detail) = match &outcome {
                        Outcome::Value(v) => ("value", v.to_string()),
                        Outcome::Stuck(p) => ("stuck", p.clone()),
                        Outcome::FuelExhausted => ("fuel-exhausted", String::new()),
                        Outcome::RuntimeError(kind, at) => {
                            ("runtime-error", format!("{kind} at {at}"))
                        }
                    };
                    let body = serde_json::json!({
                        "schema_version": SCHEMA_VERSION,
                        "status": status,
                        "detail": detail,
                    });
                    println!("{}", serde_json::to_string_pretty(&body).unwrap());
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

struct VerdictReport {
    text: String,
    json: serde_json::Value,
}

fn report_verdict(v: &Verdict, explain: bool) -> VerdictReport {
    #[derive(Serialize)]
    struct Body {
        verdict: &'static str,
        #[serde(skip_serializing_if = "Option::is_none")]
        trace: Option<Vec<String>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        certificate: Option<usize>,
        #[serde(skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    }
    let (text, body) = match v {
        Verdict::Bisimilar { certificate } => (
            if explain {
                format!("Bisimilar (certificate size {certificate})")
            } else {
                "Bisimilar".to_string()
            },
            Body {
                verdict: "bisimilar",
                trace: None,
                certificate: Some(*certificate),
                reason: None,
            },
        ),
        Verdict::NotBisimilar { trace } => {
            let rendered: Vec<String> = trace.iter().map(|l| l.to_string()).collect();
            (
                format!("NotBisimilar (trace: {})", rendered.join(" ")),
                Body {
                    verdict: "not-bisimilar",
                    trace: Some(rendered),
                    certificate: None,
                    reason: None,
                },
            )
        }
        Verdict::Unknown { reason } => (
            format!("Unknown ({reason})"),
            Body {
                verdict: "unknown",
                trace: None,
                certificate: None,
                reason: Some(reason.clone()),
            },
        ),
    };
    VerdictReport { text, json: serde_json::to_value(body).unwrap() }
}

fn emit(format: OutputFormat, text: &str, json: impl FnOnce() -> serde_json::Value) {
    match format {
        OutputFormat::Text => println!("{text}"),
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&json()).unwrap()),
    }
}

/// Inline type expression, or `@path` to read one from a file.
fn load_type(spec: &str) -> Result<Type, String> {
    let text = match spec.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?,
        None => spec.to_string(),
    };
    parse_type(text.trim()).map_err(|e| e.to_string())
}

fn parse_ctx(spec: &str) -> Result<KContext, String> {
    let mut bindings: Vec<(VarName, Kind)> = Vec::new();
    for item in spec.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let (name, kind) = item
            .split_once(':')
            .ok_or_else(|| format!("bad context entry {item:?}, expected name:kind"))?;
        let kind = parse_kind(kind.trim()).map_err(|e| e.to_string())?;
        bindings.push((VarName::user(name.trim()), kind));
    }
    Ok(KContext::of(bindings))
}
