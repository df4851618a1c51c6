use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use copse_cli::{
    bench_output, check_command, classify_command, convert_command, gen_output, generate,
    member_command, run_bench, CommandOutcome, ConvertTarget,
};

#[derive(Parser)]
#[command(name = "copse", version, about = "Workbench for nominal subtyping machines")]
struct Cli {
    /// Emit one machine-readable JSON object instead of text
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Well-formedness diagnostics for a class table
    Check {
        /// Class table file
        table: PathBuf,
    },
    /// Feature fingerprint deciding which decider applies
    Classify {
        /// Class table file
        table: PathBuf,
    },
    /// Decide a subtyping query such as "v0(E) <: a(b(a(E)))"
    Member {
        /// Class table file
        table: PathBuf,
        /// Query text
        query: String,
        /// Search depth cap for tables outside the decidable fragments
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Convert between grammar and table representations
    Convert {
        /// Input file: a `.cfg` word grammar or a class table
        input: PathBuf,
        /// Target representation
        #[arg(long, value_enum)]
        to: ConvertTarget,
        /// Entry ground type, e.g. "v0(E)" (table inputs only)
        #[arg(long)]
        bottom: Option<String>,
        /// Comma-separated supertype alphabet (table inputs only)
        #[arg(long)]
        sup: Option<String>,
    },
    /// Generate subtyping-machine source from a word grammar
    Gen {
        /// Grammar file (`.cfg`)
        grammar: PathBuf,
        /// Also generate the fluent wrapper API
        #[arg(long)]
        fluent: bool,
        /// Output file or directory (default: print to stdout)
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Time membership queries of growing size against the machine
    Bench {
        /// Grammar file (`.cfg`)
        grammar: PathBuf,
        /// Comma-separated query sizes
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Seed for the query generator
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn read(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn run(cli: Cli) -> Result<CommandOutcome> {
    let json = cli.json;
    match cli.command {
        Command::Check { table } => check_command(&read(&table)?, json),
        Command::Classify { table } => classify_command(&read(&table)?, json),
        Command::Member { table, query, depth } => {
            member_command(&read(&table)?, &query, depth, json)
        }
        Command::Convert { input, to, bottom, sup } => {
            let name = input.file_name().map_or_else(String::new, |n| {
                n.to_string_lossy().into_owned()
            });
            convert_command(&name, &read(&input)?, to, bottom.as_deref(), sup.as_deref(), json)
        }
        Command::Gen { grammar, fluent, out } => {
            let machine = generate(&read(&grammar)?, fluent)?;
            match out {
                None => gen_output(&machine, None, json),
                Some(path) => {
                    let target = if path.is_dir() {
                        path.join(machine.config.output_file_name())
                    } else {
                        path
                    };
                    fs::write(&target, machine.source.full_source())
                        .with_context(|| format!("cannot write {}", target.display()))?;
                    gen_output(&machine, Some(&target.display().to_string()), json)
                }
            }
        }
        Command::Bench { grammar, sizes, seed } => {
            let text = read(&grammar)?;
            let g = copse::grammars::parse_cfg(&text)?;
            let name = grammar
                .file_stem()
                .map_or_else(|| "grammar".to_string(), |s| s.to_string_lossy().into_owned());
            let records = run_bench(&g, &name, &sizes, seed)?;
            bench_output(&name, seed, &records, json)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            let mut stdout = std::io::stdout();
            let _ = stdout.write_all(outcome.stdout.as_bytes());
            let _ = stdout.flush();
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
