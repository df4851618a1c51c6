//! Command implementations behind the `copse` binary. Each command returns
//! its exit code and stdout text so tests can drive them without spawning
//! processes; file IO stays in `main`.
//!
//! Exit codes: 0 when the command's verdict is positive (query holds, table
//! clean, conversion done), 1 when the verdict is negative, 2 on errors.

use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use copse::analysis::{check_well_formed, classify};
use copse::codegen::{compile_machine, CompiledMachine, EmitterConfig};
use copse::format::{class_table_to_json, parse_class_table, parse_ground_type, parse_query};
use copse::grammars::{cfg_to_gnf, cfg_to_monadic_cftg, cyk_member, parse_cfg, StringCfg};
use copse::subtyping::{decide_with, DecideOptions, SubtypeQuery, Verdict};
use copse::transforms::{class_table_to_gnf_cftg, class_table_to_rtg};

/// What a command printed and how it wants the process to exit.
#[derive(Debug)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub stdout: String,
}

impl CommandOutcome {
    fn done(stdout: String) -> CommandOutcome {
        CommandOutcome { exit_code: 0, stdout }
    }

    fn verdict(positive: bool, stdout: String) -> CommandOutcome {
        CommandOutcome { exit_code: i32::from(!positive), stdout }
    }
}

fn pretty(value: &serde_json::Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Well-formedness diagnostics for a class table. Positive verdict: no
/// diagnostics.
pub fn check_command(table_text: &str, json: bool) -> Result<CommandOutcome> {
    let table = parse_class_table(table_text)?;
    let diagnostics = check_well_formed(&table);
    let clean = diagnostics.is_empty();
    let stdout = if json {
        pretty(&json!({ "wellFormed": clean, "diagnostics": diagnostics }))?
    } else if clean {
        "well-formed\n".to_string()
    } else {
        let mut out = String::new();
        for d in &diagnostics {
            out.push_str(&d.to_string());
            out.push('\n');
        }
        out
    };
    Ok(CommandOutcome::verdict(clean, stdout))
}

/// Feature fingerprint of a table. Positive verdict: subtyping over the
/// table is decidable.
pub fn classify_command(table_text: &str, json: bool) -> Result<CommandOutcome> {
    let table = parse_class_table(table_text)?;
    let features = classify(&table)?;
    let decider = if !features.uses_contravariance {
        "goal-directed"
    } else if !features.expansive {
        "full-search"
    } else {
        "bounded-only"
    };
    let stdout = if json {
        pretty(&json!({
            "usesContravariance": features.uses_contravariance,
            "expansive": features.expansive,
            "multipleInstantiation": features.multiple_instantiation,
            "decidable": features.decidable(),
            "decider": decider,
        }))?
    } else {
        format!("{features}\ndecider: {decider}\n")
    };
    Ok(CommandOutcome::verdict(features.decidable(), stdout))
}

/// Decides one query, e.g. `v0(E) <: a(b(a(E)))`, over the full alphabet.
/// Positive verdict: the relation holds.
pub fn member_command(
    table_text: &str,
    query_text: &str,
    depth: Option<usize>,
    json: bool,
) -> Result<CommandOutcome> {
    let table = parse_class_table(table_text)?;
    let (left, rel, right) = parse_query(query_text)?;
    let query = SubtypeQuery::full(&table, left, rel, right)?;
    let verdict = decide_with(&table, &query, &DecideOptions { bounded_depth: depth })?;
    let positive = verdict.holds();
    let stdout = if json {
        let body = match &verdict {
            Verdict::Holds(trace) => json!({
                "verdict": "holds",
                "steps": trace.len(),
                "trace": trace.to_json(),
            }),
            Verdict::Fails => json!({ "verdict": "fails" }),
            Verdict::CycleRejected(witness) => json!({
                "verdict": "cycle",
                "witness": witness.to_string(),
            }),
            Verdict::Undecided(reason) => json!({
                "verdict": "undecided",
                "reason": reason,
            }),
        };
        pretty(&body)?
    } else {
        match &verdict {
            Verdict::Holds(trace) => format!("holds ({} proof steps)\n", trace.len()),
            Verdict::Fails => "fails\n".to_string(),
            Verdict::CycleRejected(witness) => format!("rejected by infinite descent\n{witness}"),
            Verdict::Undecided(reason) => format!("undecided: {reason}\n"),
        }
    };
    Ok(CommandOutcome::verdict(positive, stdout))
}

/// Conversion targets for `convert`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ConvertTarget {
    /// Regular tree grammar extracted from a table
    Rtg,
    /// Context-free tree grammar (head-terminal form)
    Cftg,
    /// Class table
    Table,
    /// Head-terminal word grammar
    Gnf,
}

/// Converts between representations. `.cfg` inputs are word grammars and
/// convert to `gnf`, `cftg`, or `table`; any other input parses as a class
/// table and converts to `rtg`, `cftg`, or `gnf` (the latter two coincide),
/// which needs `--bottom` and `--sup`.
pub fn convert_command(
    input_name: &str,
    input_text: &str,
    target: ConvertTarget,
    bottom: Option<&str>,
    sup: Option<&str>,
    json: bool,
) -> Result<CommandOutcome> {
    let stdout = if input_name.ends_with(".cfg") {
        let g = parse_cfg(input_text)?;
        let gnf = cfg_to_gnf(&g);
        match target {
            ConvertTarget::Gnf => {
                if json {
                    let productions: Vec<_> = gnf
                        .grammar
                        .productions()
                        .iter()
                        .map(|p| json!({ "lhs": p.lhs, "rhs": p.rhs }))
                        .collect();
                    pretty(&json!({
                        "start": gnf.grammar.start(),
                        "productions": productions,
                        "emptyWord": gnf.empty_word,
                    }))?
                } else {
                    format!("{}# empty word: {}\n", gnf.grammar, gnf.empty_word)
                }
            }
            ConvertTarget::Cftg => {
                let tree = cfg_to_monadic_cftg(&gnf.grammar, "BOTTOM")?;
                if json {
                    pretty(&cftg_json(&tree, Some(gnf.empty_word)))?
                } else {
                    format!("{tree}# empty word: {}\n", gnf.empty_word)
                }
            }
            ConvertTarget::Table => {
                let tree = cfg_to_monadic_cftg(&gnf.grammar, "BOTTOM")?;
                let (table, bottom_type, split) =
                    copse::transforms::gnf_cftg_to_class_table(&tree, true)?;
                if json {
                    pretty(&json!({
                        "table": class_table_to_json(&table),
                        "bottom": bottom_type.to_string(),
                        "sub": split.sub().collect::<Vec<_>>(),
                        "sup": split.sup().collect::<Vec<_>>(),
                        "emptyWord": gnf.empty_word,
                    }))?
                } else {
                    format!(
                        "{table}# bottom: {bottom_type}\n# sub: {}\n# sup: {}\n# empty word: {}\n",
                        split.sub().collect::<Vec<_>>().join(", "),
                        split.sup().collect::<Vec<_>>().join(", "),
                        gnf.empty_word,
                    )
                }
            }
            ConvertTarget::Rtg => {
                bail!("word grammars convert to gnf, cftg, or table, not rtg")
            }
        }
    } else {
        let table = parse_class_table(input_text)?;
        let bottom_text =
            bottom.ok_or_else(|| anyhow!("--bottom <type> is required for table inputs"))?;
        let bottom_type = parse_ground_type(bottom_text)?;
        let sup_text =
            sup.ok_or_else(|| anyhow!("--sup <names> is required for table inputs"))?;
        let sup_names: Vec<&str> = sup_text.split(',').map(str::trim).collect();
        match target {
            ConvertTarget::Rtg => {
                let g = class_table_to_rtg(&table, &bottom_type, sup_names)?;
                if json {
                    let productions: Vec<_> = g
                        .productions()
                        .iter()
                        .map(|p| {
                            json!({
                                "lhs": p.lhs.name(),
                                "head": p.head.name(),
                                "children": p.children.iter().map(|c| c.name()).collect::<Vec<_>>(),
                            })
                        })
                        .collect();
                    pretty(&json!({ "start": g.start().name(), "productions": productions }))?
                } else {
                    g.to_string()
                }
            }
            ConvertTarget::Cftg | ConvertTarget::Gnf => {
                let g = class_table_to_gnf_cftg(&table, &bottom_type, sup_names)?;
                if json {
                    pretty(&cftg_json(&g, None))?
                } else {
                    g.to_string()
                }
            }
            ConvertTarget::Table => bail!("the input is already a class table"),
        }
    };
    Ok(CommandOutcome::done(stdout))
}

fn cftg_json(g: &copse::grammars::Cftg, empty_word: Option<bool>) -> serde_json::Value {
    let symbol = |s: &copse::grammars::RankedSymbol| json!({ "name": s.name(), "rank": s.rank() });
    let mut body = json!({
        "terminals": g.terminals().iter().map(symbol).collect::<Vec<_>>(),
        "variables": g.variables().iter().map(symbol).collect::<Vec<_>>(),
        "initial": g.initial_tree().to_string(),
        "productions": g.productions().iter().map(|p| p.to_string()).collect::<Vec<_>>(),
    });
    if let Some(flag) = empty_word {
        body.as_object_mut().unwrap().insert("emptyWord".into(), json!(flag));
    }
    body
}

/// Compiles a word grammar into a subtyping machine, optionally with the
/// fluent wrapper. The grammar's start symbol names the entry interface.
pub fn generate(cfg_text: &str, fluent: bool) -> Result<CompiledMachine> {
    let g = parse_cfg(cfg_text)?;
    let config = EmitterConfig::for_entry(g.start()).with_fluent(fluent);
    Ok(compile_machine(&g, &config)?)
}

/// Output for `gen`: the source itself, or a confirmation line when the
/// caller wrote it to a file.
pub fn gen_output(
    machine: &CompiledMachine,
    written_to: Option<&str>,
    json: bool,
) -> Result<CommandOutcome> {
    let stdout = if json {
        let mut body = machine.source.manifest.clone();
        let object = body.as_object_mut().expect("manifest is an object");
        match written_to {
            Some(path) => object.insert("outputPath".into(), json!(path)),
            None => object.insert("source".into(), json!(machine.source.full_source())),
        };
        pretty(&body)?
    } else {
        match written_to {
            Some(path) => format!("wrote {path}\n"),
            None => machine.source.full_source(),
        }
    };
    Ok(CommandOutcome::done(stdout))
}

/// One timed membership query.
#[derive(Debug, Clone)]
pub struct BenchRecord {
    pub grammar: String,
    pub query_size: usize,
    pub elapsed: Duration,
    pub verdict: bool,
}

/// Times membership queries of the given sizes against the compiled
/// machine. Query words are drawn uniformly over the terminal alphabet from
/// a seeded generator, so runs replay exactly. Sizes run in order on one
/// thread; timing covers only the decision, not the pipeline. Verdicts for
/// words up to length 14 are cross-checked against the word-level oracle.
pub fn run_bench(
    g: &StringCfg,
    grammar: &str,
    sizes: &[usize],
    seed: u64,
) -> Result<Vec<BenchRecord>> {
    let machine = compile_machine(g, &EmitterConfig::for_entry(g.start()))
        .with_context(|| format!("pipeline failed for grammar `{grammar}`"))?;
    let mut tokens: Vec<&str> = g.terminals().iter().map(String::as_str).collect();
    tokens.sort_unstable();
    if tokens.is_empty() {
        bail!("grammar `{grammar}` has no terminals to sample queries from");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let word: Vec<&str> =
            (0..n).map(|_| tokens[rng.gen_range(0..tokens.len())]).collect();
        let started = Instant::now();
        let verdict = machine.accepts(&word)?;
        let elapsed = started.elapsed();
        if n <= 14 && cyk_member(g, &word) != verdict {
            bail!("machine and word oracle disagree on a length-{n} query for `{grammar}`");
        }
        records.push(BenchRecord {
            grammar: grammar.to_string(),
            query_size: n,
            elapsed,
            verdict,
        });
    }
    Ok(records)
}

/// Renders bench records as CSV (default) or a JSON object.
pub fn bench_output(
    grammar: &str,
    seed: u64,
    records: &[BenchRecord],
    json: bool,
) -> Result<CommandOutcome> {
    let stdout = if json {
        let rows: Vec<_> = records
            .iter()
            .map(|r| {
                json!({
                    "size": r.query_size,
                    "elapsedMs": r.elapsed.as_secs_f64() * 1e3,
                    "verdict": r.verdict,
                })
            })
            .collect();
        pretty(&json!({ "grammar": grammar, "seed": seed, "records": rows }))?
    } else {
        let mut out = String::from("size,elapsed_ms,verdict\n");
        for r in records {
            out.push_str(&format!(
                "{},{:.3},{}\n",
                r.query_size,
                r.elapsed.as_secs_f64() * 1e3,
                r.verdict
            ));
        }
        out
    };
    Ok(CommandOutcome::done(stdout))
}
