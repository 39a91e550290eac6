//! `cellkit` command dispatch.
//!
//! Exit codes: 0 for success (and "yes" verdicts), 1 for "no" verdicts of
//! the query commands (`ck`, `good`, `distinguish`, `exclusion-free`,
//! `validate`), 2 for usage, parse, or validation errors. All output is
//! deterministic: identical input and flags give identical bytes.

mod dot;

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use cellkit_core::epistemic::{
    cells, common_knowledge, exclusion_free, fanout_report, is_good_subset,
};
use cellkit_core::refinement::{distinguishing_formula, quotient, refine_fixpoint};
use cellkit_core::semantics::Evaluator;
use cellkit_core::{formula, scenarios, KripkeModel, Partition, StateSet};

pub use dot::dot_export;

#[derive(Parser)]
#[command(
    name = "cellkit",
    about = "Multi-agent S5 Kripke structures: evaluation, refinement, quotients, cells",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelArg {
    /// Model file (JSON), or `-` for standard input.
    #[arg(short = 'm', value_name = "FILE")]
    model: Option<String>,
    /// Model file as a positional argument.
    #[arg(value_name = "FILE", conflicts_with = "model")]
    model_pos: Option<String>,
}

impl ModelArg {
    fn source(&self) -> Result<&str, String> {
        self.model
            .as_deref()
            .or(self.model_pos.as_deref())
            .ok_or_else(|| {
                "no model given: use -m FILE or a positional FILE (`-` for stdin)".into()
            })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a formula: its extension and a per-state truth table.
    Eval {
        #[command(flatten)]
        model: ModelArg,
        /// Formula text.
        #[arg(short = 'f', value_name = "TEXT")]
        formula: String,
        #[arg(long)]
        json: bool,
    },
    /// Run partition refinement to its fixpoint.
    Refine {
        #[command(flatten)]
        model: ModelArg,
        /// List every round, not only the final partition.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        json: bool,
    },
    /// Collapse equivalent states; prints the quotient model.
    Quotient {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        json: bool,
    },
    /// Cells: the common-knowledge components.
    Cells {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        json: bool,
    },
    /// Is an event common knowledge at a state? Exit 0 yes, 1 no.
    Ck {
        #[command(flatten)]
        model: ModelArg,
        /// Event as comma-separated state names.
        #[arg(short = 'e', value_name = "LIST", conflicts_with = "formula")]
        event: Option<String>,
        /// Event as the extension of a formula.
        #[arg(short = 'f', value_name = "TEXT")]
        formula: Option<String>,
        /// State at which to ask.
        #[arg(short = 's', value_name = "STATE")]
        state: String,
        #[arg(long)]
        json: bool,
    },
    /// Synthesize a formula telling two states apart. Exit 1 if equivalent.
    Distinguish {
        #[command(flatten)]
        model: ModelArg,
        /// First state (the formula will hold here).
        #[arg(short = 's', value_name = "STATE")]
        state: String,
        /// Second state (the formula will fail here).
        #[arg(short = 't', value_name = "STATE")]
        other: String,
        #[arg(long)]
        json: bool,
    },
    /// Does restricting to a subset preserve every member's theory? Exit 0 yes, 1 no.
    Good {
        #[command(flatten)]
        model: ModelArg,
        /// Subset as comma-separated state names.
        #[arg(short = 'A', value_name = "LIST", conflicts_with = "formula")]
        subset: Option<String>,
        /// Subset as the extension of a formula.
        #[arg(short = 'f', value_name = "TEXT")]
        formula: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Per quotient cell: does it have no proper good subset? Exit 1 if any does.
    ExclusionFree {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        json: bool,
    },
    /// Largest block per agent within each cell, plus limit_infinite flags.
    Fanout {
        #[command(flatten)]
        model: ModelArg,
        /// Only the cell containing this state.
        #[arg(short = 's', value_name = "STATE")]
        state: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Generate an example model (JSON on standard output).
    Gen {
        #[command(subcommand)]
        which: GenCommand,
    },
    /// Render the model as a DOT graph.
    Dot {
        #[command(flatten)]
        model: ModelArg,
        /// Color states by their final refinement class.
        #[arg(long)]
        trace: bool,
    },
    /// Check the partition invariants. Exit 0 ok, 1 violations found.
    Validate {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum GenCommand {
    /// Grid over {1..n, inf}² with rows, columns, anti-diagonals, border.
    Nbar {
        #[arg(long)]
        n: usize,
    },
    /// Chain of n+1 states with staggered two-agent blocks.
    Chain {
        #[arg(long)]
        n: usize,
    },
    /// Chain base plus a third agent with block sizes 1..m and a final
    /// flagged block.
    Growing {
        #[arg(long)]
        m: usize,
    },
    /// Seeded random model.
    Random {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        states: usize,
        #[arg(long)]
        agents: usize,
        #[arg(long)]
        atoms: usize,
        #[arg(long = "max-block")]
        max_block: usize,
    },
}

enum Outcome {
    Success,
    FalseVerdict,
}

type CmdResult = Result<Outcome, String>;

/// Run one invocation. `args` includes the program name.
pub fn run(
    args: &[String],
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    match dispatch(cli.command, input, out) {
        Ok(Outcome::Success) => 0,
        Ok(Outcome::FalseVerdict) => 1,
        Err(message) => {
            let _ = writeln!(err, "error: {message}");
            2
        }
    }
}

fn dispatch(command: Command, input: &mut dyn BufRead, out: &mut dyn Write) -> CmdResult {
    match command {
        Command::Eval {
            model,
            formula,
            json,
        } => {
            let m = load_model(model.source()?, input)?;
            let f = parse_formula(&m, &formula)?;
            let ext = Evaluator::new(&m)
                .extension(&f)
                .map_err(|e| e.to_string())?;
            if json {
                let truth: Vec<serde_json::Value> = (0..m.num_states())
                    .map(|s| json!([m.state_name(s), ext.contains(s)]))
                    .collect();
                emit_json(
                    out,
                    &json!({
                        "formula": f.render(),
                        "extension": m.names(&ext),
                        "truth": truth,
                    }),
                )?;
            } else {
                let mut text = String::new();
                writeln!(text, "formula: {f}").unwrap();
                writeln!(text, "extension: {}", render_set(&m, &ext)).unwrap();
                for s in 0..m.num_states() {
                    writeln!(text, "{}: {}", m.state_name(s), ext.contains(s)).unwrap();
                }
                emit(out, &text)?;
            }
            Ok(Outcome::Success)
        }
        Command::Refine { model, trace, json } => {
            let m = load_model(model.source()?, input)?;
            let result = refine_fixpoint(&m);
            if json {
                emit_json(out, &trace_json(&m, &result))?;
            } else {
                let mut text = String::new();
                if trace {
                    for (i, round) in result.rounds.iter().enumerate() {
                        writeln!(text, "round {i}: {}", render_partition(&m, round)).unwrap();
                    }
                }
                writeln!(text, "stabilized_at: {}", result.stabilized_at).unwrap();
                writeln!(
                    text,
                    "final: {}",
                    render_partition(&m, result.final_partition())
                )
                .unwrap();
                emit(out, &text)?;
            }
            Ok(Outcome::Success)
        }
        Command::Quotient { model, json } => {
            let m = load_model(model.source()?, input)?;
            let q = quotient(&m);
            if json {
                emit_json(out, &q.model.to_json_value())?;
            } else {
                let mut text = String::new();
                writeln!(text, "quotient states: {}", q.model.num_states()).unwrap();
                for c in 0..q.model.num_states() {
                    let preimage: Vec<&str> = (0..m.num_states())
                        .filter(|&s| q.map[s] == c)
                        .map(|s| m.state_name(s))
                        .collect();
                    writeln!(text, "{} <- {}", q.model.state_name(c), preimage.join(" ")).unwrap();
                }
                emit(out, &text)?;
            }
            Ok(Outcome::Success)
        }
        Command::Cells { model, json } => {
            let m = load_model(model.source()?, input)?;
            let report = cells(&m);
            if json {
                let listed: Vec<Vec<&str>> = report
                    .cells
                    .iter()
                    .map(|cell| cell.iter().map(|&s| m.state_name(s)).collect())
                    .collect();
                emit_json(out, &json!({ "cells": listed }))?;
            } else {
                let mut text = String::new();
                writeln!(
                    text,
                    "cells: {} ({} states)",
                    report.cells.len(),
                    m.num_states()
                )
                .unwrap();
                for (i, cell) in report.cells.iter().enumerate() {
                    let names: Vec<&str> = cell.iter().map(|&s| m.state_name(s)).collect();
                    writeln!(text, "cell {i}: {}", names.join(" ")).unwrap();
                }
                emit(out, &text)?;
            }
            Ok(Outcome::Success)
        }
        Command::Ck {
            model,
            event,
            formula,
            state,
            json,
        } => {
            let m = load_model(model.source()?, input)?;
            let event = resolve_event(&m, event.as_deref(), formula.as_deref())?;
            let s = m.state_index(&state).map_err(|e| e.to_string())?;
            let yes = common_knowledge(&m, &event, s).map_err(|e| e.to_string())?;
            if json {
                emit_json(
                    out,
                    &json!({
                        "state": state,
                        "event": m.names(&event),
                        "common_knowledge": yes,
                    }),
                )?;
            } else {
                emit(
                    out,
                    &format!("common knowledge: {}\n", if yes { "yes" } else { "no" }),
                )?;
            }
            Ok(verdict(yes))
        }
        Command::Distinguish {
            model,
            state,
            other,
            json,
        } => {
            let m = load_model(model.source()?, input)?;
            let s = m.state_index(&state).map_err(|e| e.to_string())?;
            let t = m.state_index(&other).map_err(|e| e.to_string())?;
            let found = distinguishing_formula(&m, s, t).map_err(|e| e.to_string())?;
            if json {
                emit_json(
                    out,
                    &json!({
                        "formula": found.as_ref().map(|f| f.render()),
                    }),
                )?;
            } else {
                match &found {
                    Some(f) => emit(out, &format!("distinguishing formula: {f}\n"))?,
                    None => emit(
                        out,
                        &format!("equivalent: no formula distinguishes {state} and {other}\n"),
                    )?,
                }
            }
            Ok(verdict(found.is_some()))
        }
        Command::Good {
            model,
            subset,
            formula,
            json,
        } => {
            let m = load_model(model.source()?, input)?;
            let set = resolve_event(&m, subset.as_deref(), formula.as_deref())?;
            let yes = is_good_subset(&m, &set).map_err(|e| e.to_string())?;
            if json {
                emit_json(out, &json!({ "subset": m.names(&set), "good": yes }))?;
            } else {
                emit(
                    out,
                    &format!("good subset: {}\n", if yes { "yes" } else { "no" }),
                )?;
            }
            Ok(verdict(yes))
        }
        Command::ExclusionFree { model, json } => {
            let m = load_model(model.source()?, input)?;
            let q = quotient(&m);
            let verdicts = exclusion_free(&m).map_err(|e| e.to_string())?;
            let all = verdicts.iter().all(|v| v.exclusion_free);
            if json {
                let listed: Vec<serde_json::Value> = verdicts
                    .iter()
                    .map(|v| {
                        json!({
                            "states": v.cell.iter().map(|&s| q.model.state_name(s)).collect::<Vec<_>>(),
                            "exclusion_free": v.exclusion_free,
                        })
                    })
                    .collect();
                emit_json(out, &json!({ "cells": listed }))?;
            } else {
                let mut text = String::new();
                for (i, v) in verdicts.iter().enumerate() {
                    writeln!(
                        text,
                        "cell {i} ({} states): {}",
                        v.cell.len(),
                        if v.exclusion_free {
                            "exclusion-free"
                        } else {
                            "not exclusion-free"
                        }
                    )
                    .unwrap();
                }
                emit(out, &text)?;
            }
            Ok(verdict(all))
        }
        Command::Fanout { model, state, json } => {
            let m = load_model(model.source()?, input)?;
            let report = cells(&m);
            let selected: Vec<usize> = match state {
                Some(name) => {
                    let s = m.state_index(&name).map_err(|e| e.to_string())?;
                    vec![report.cell_of[s]]
                }
                None => (0..report.cells.len()).collect(),
            };
            if json {
                let listed: Vec<serde_json::Value> = selected
                    .iter()
                    .map(|&i| {
                        let cell = &report.cells[i];
                        let fr = fanout_report(&m, cell);
                        json!({
                            "cell": cell.iter().map(|&s| m.state_name(s)).collect::<Vec<_>>(),
                            "max_block_size": m.agents().iter().zip(&fr.max_block_size)
                                .map(|(a, n)| json!([a, n])).collect::<Vec<_>>(),
                            "flagged": fr.flagged.iter()
                                .map(|&(j, b)| json!([m.agents()[j], b])).collect::<Vec<_>>(),
                        })
                    })
                    .collect();
                emit_json(out, &json!({ "cells": listed }))?;
            } else {
                let mut text = String::new();
                for &i in &selected {
                    let cell = &report.cells[i];
                    let fr = fanout_report(&m, cell);
                    writeln!(text, "cell {i} ({} states)", cell.len()).unwrap();
                    for (j, agent) in m.agents().iter().enumerate() {
                        writeln!(text, "  agent {agent}: max block {}", fr.max_block_size[j])
                            .unwrap();
                    }
                    if !fr.flagged.is_empty() {
                        let flagged: Vec<String> = fr
                            .flagged
                            .iter()
                            .map(|&(j, b)| format!("agent {} block {b}", m.agents()[j]))
                            .collect();
                        writeln!(text, "  limit_infinite: {}", flagged.join(", ")).unwrap();
                    }
                }
                emit(out, &text)?;
            }
            Ok(Outcome::Success)
        }
        Command::Gen { which } => {
            let model = match which {
                GenCommand::Nbar { n } => scenarios::nbar(n),
                GenCommand::Chain { n } => scenarios::email_chain(n),
                GenCommand::Growing { m } => scenarios::growing_blocks(m),
                GenCommand::Random {
                    seed,
                    states,
                    agents,
                    atoms,
                    max_block,
                } => scenarios::random_model(seed, states, agents, atoms, max_block),
            }
            .map_err(|e| e.to_string())?;
            emit(out, &model.to_json())?;
            Ok(Outcome::Success)
        }
        Command::Dot { model, trace } => {
            let m = load_model(model.source()?, input)?;
            let refinement = trace.then(|| refine_fixpoint(&m));
            emit(out, &dot::dot_export(&m, refinement.as_ref()))?;
            Ok(Outcome::Success)
        }
        Command::Validate { model, json } => {
            let m = load_model_unvalidated(model.source()?, input)?;
            let violations = m.validate();
            let ok = violations.is_empty();
            if json {
                let listed: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
                emit_json(out, &json!({ "ok": ok, "violations": listed }))?;
            } else if ok {
                emit(out, "ok\n")?;
            } else {
                let mut text = String::new();
                for v in &violations {
                    writeln!(text, "violation: {v}").unwrap();
                }
                emit(out, &text)?;
            }
            Ok(verdict(ok))
        }
    }
}

fn verdict(yes: bool) -> Outcome {
    if yes {
        Outcome::Success
    } else {
        Outcome::FalseVerdict
    }
}

fn read_model_text(source: &str, input: &mut dyn BufRead) -> Result<String, String> {
    if source == "-" {
        let mut text = String::new();
        input
            .read_to_string(&mut text)
            .map_err(|e| format!("reading standard input: {e}"))?;
        Ok(text)
    } else {
        std::fs::read_to_string(source).map_err(|e| format!("reading {source}: {e}"))
    }
}

fn load_model(source: &str, input: &mut dyn BufRead) -> Result<KripkeModel, String> {
    let text = read_model_text(source, input)?;
    KripkeModel::from_json(&text).map_err(|e| e.to_string())
}

/// For `validate`: accept structurally sound files even when the partition
/// invariants fail, so the violations become the command output rather than
/// a load error.
fn load_model_unvalidated(source: &str, input: &mut dyn BufRead) -> Result<KripkeModel, String> {
    let text = read_model_text(source, input)?;
    KripkeModel::from_json_unvalidated(&text).map_err(|e| e.to_string())
}

fn parse_formula(model: &KripkeModel, text: &str) -> Result<cellkit_core::Formula, String> {
    formula::parse_strict(text, model.atoms(), model.agents()).map_err(|e| e.to_string())
}

fn resolve_event(
    model: &KripkeModel,
    names: Option<&str>,
    formula_text: Option<&str>,
) -> Result<StateSet, String> {
    match (names, formula_text) {
        (Some(list), None) => {
            let parts: Vec<&str> = list.split(',').filter(|p| !p.is_empty()).collect();
            model.state_set(&parts).map_err(|e| e.to_string())
        }
        (None, Some(text)) => {
            let f = parse_formula(model, text)?;
            Evaluator::new(model)
                .extension(&f)
                .map_err(|e| e.to_string())
        }
        _ => Err("give the states either as a list (-e/-A) or as a formula (-f)".into()),
    }
}

fn render_set(model: &KripkeModel, set: &StateSet) -> String {
    if set.is_empty() {
        "(empty)".into()
    } else {
        model.names(set).join(" ")
    }
}

fn render_partition(model: &KripkeModel, partition: &Partition) -> String {
    partition
        .classes()
        .iter()
        .map(|class| {
            let names: Vec<&str> = class.iter().map(|&s| model.state_name(s)).collect();
            format!("{{{}}}", names.join(" "))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn trace_json(model: &KripkeModel, trace: &cellkit_core::RefinementTrace) -> serde_json::Value {
    let rounds: Vec<Vec<Vec<&str>>> = trace
        .rounds
        .iter()
        .map(|round| {
            round
                .classes()
                .iter()
                .map(|class| class.iter().map(|&s| model.state_name(s)).collect())
                .collect()
        })
        .collect();
    json!({ "stabilized_at": trace.stabilized_at, "rounds": rounds })
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), String> {
    out.write_all(text.as_bytes())
        .map_err(|e| format!("writing output: {e}"))
}

fn emit_json(out: &mut dyn Write, value: &serde_json::Value) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON output cannot fail");
    text.push('\n');
    emit(out, &text)
}
