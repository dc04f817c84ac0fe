use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde_json::json;

use pglb_core::funit::{dup_unit, named_unit, stack_dup_unit, SbsState};
use pglb_core::halting::{
    self, builtin_candidate, bounded_simulation_unit, Candidate, HaltingError, HaltingInstance, Sample,
    SolutionVerdict, BOUNDED_SIMULATION_DEPTH, BOUNDED_SIMULATION_STEPS,
};
use pglb_core::isa::{self, InstructionSequence};
use pglb_core::literal::{parse_family, parse_family_strict};
use pglb_core::machine::{self, Configuration, RunOutcome, TextTrace, DEFAULT_BUDGET};
use pglb_core::services::Reply;

const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "pglb", version, about = "Run, transform and analyse PGLBbt instruction sequences")]
struct Cli {
    /// Maximum number of steps per run
    #[arg(long, global = true, env = "PGLB_BUDGET", default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Print one line per step
    #[arg(long, global = true)]
    trace: bool,
    /// Relevant-use conventions: overlapping foci are an error, apply/reply
    /// on non-converging runs is reported
    #[arg(long, global = true)]
    strict: bool,
    /// Structured output
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["program", "file"])))]
struct Program {
    /// Instruction sequence, e.g. "+f.pop;\#1;!t"
    program: Option<String>,
    /// Read the instruction sequence from a file
    #[arg(long)]
    file: Option<PathBuf>,
}

impl Program {
    fn load(&self) -> Result<InstructionSequence, String> {
        let text = match (&self.program, &self.file) {
            (Some(text), _) => text.clone(),
            (None, Some(path)) => {
                fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?
            }
            (None, None) => unreachable!("clap requires a source"),
        };
        isa::parse(&text).map_err(|e| e.to_string())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse and print the canonical text
    Parse(Program),
    /// Run on a service family
    Run {
        #[command(flatten)]
        program: Program,
        /// Family literal, e.g. "f=stack(01),g=unit(dup,)"
        #[arg(long, default_value = "")]
        family: String,
    },
    /// Apply swap or ftod
    #[command(group(ArgGroup::new("transformation").required(true).args(["swap", "ftod"])))]
    Transform {
        #[command(flatten)]
        program: Program,
        /// Exchange !t and !f
        #[arg(long)]
        swap: bool,
        /// Replace !f by #0
        #[arg(long)]
        ftod: bool,
    },
    /// Print the ASCII bit encoding
    Encode(Program),
    /// Decide halting of a program over f = {dup}
    Decide(Program),
    /// Build the diagonal witness of a candidate solver and refute it
    Diagonalize {
        /// Candidate program, or constant-true, constant-false, bounded-simulation
        #[arg(long)]
        candidate: String,
        /// Unit for a candidate given as a program: dup, stack+dup, bounded-simulation
        #[arg(long)]
        unit: Option<String>,
    },
    /// Judge a candidate solver on samples
    Check {
        /// Candidate program, or constant-true, constant-false, bounded-simulation
        #[arg(long)]
        candidate: String,
        /// Unit for a candidate given as a program: dup, stack+dup, bounded-simulation
        #[arg(long)]
        unit: Option<String>,
        /// File with one `<program> [<sbs>]` per line; `//` starts a comment line
        #[arg(long)]
        samples: PathBuf,
    },
}

fn instance_for(unit: &str) -> Result<HaltingInstance, String> {
    match unit {
        "dup" => Ok(HaltingInstance::full(dup_unit())),
        "stack+dup" => Ok(HaltingInstance::full(stack_dup_unit())),
        "bounded-simulation" => Ok(HaltingInstance::full(bounded_simulation_unit(
            BOUNDED_SIMULATION_STEPS,
            BOUNDED_SIMULATION_DEPTH,
        ))),
        other => match named_unit(other) {
            Some(u) => Ok(HaltingInstance::full(u)),
            None => Err(format!(
                "unknown unit `{other}` (known: dup, stack+dup, bounded-simulation)"
            )),
        },
    }
}

fn resolve_candidate(candidate: &str, unit: Option<&str>) -> Result<Candidate, String> {
    if let Some(mut builtin) = builtin_candidate(candidate) {
        if let Some(unit) = unit {
            builtin.instance = instance_for(unit)?;
        }
        return Ok(builtin);
    }
    Ok(Candidate {
        name: "program",
        program: isa::parse(candidate).map_err(|e| format!("candidate: {e}"))?,
        instance: instance_for(unit.unwrap_or("dup"))?,
    })
}

fn parse_sample_line(line: &str) -> Result<Sample, String> {
    let line = line.trim();
    let (program, state) = match line.rsplit_once(char::is_whitespace) {
        Some((head, tail)) if !tail.is_empty() && tail.chars().all(|c| matches!(c, '0' | '1' | ':')) => {
            (head, tail)
        }
        _ => (line, ""),
    };
    let y = isa::parse(program).map_err(|e| format!("`{line}`: {e}"))?;
    let v: SbsState = state.parse().map_err(|e| format!("`{line}`: {e}"))?;
    Ok(Sample::new(y, v))
}

fn load_samples(path: &PathBuf) -> Result<Vec<Sample>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with("//"))
        .map(parse_sample_line)
        .collect()
}

fn print_json(value: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&value).expect("json values serialize"));
}

fn run_exit(outcome: &RunOutcome) -> u8 {
    match outcome {
        RunOutcome::Correct { .. } => 0,
        RunOutcome::Erroneous { .. } => 1,
        RunOutcome::Diverged { .. } => 2,
        RunOutcome::BudgetExhausted { .. } => 3,
    }
}

fn cmd_run(cli: &Cli, program: &Program, family: &str) -> Result<u8, String> {
    let p = program.load()?;
    let family = if cli.strict {
        parse_family_strict(family)
    } else {
        parse_family(family)
    }
    .map_err(|e| e.to_string())?;
    let config = Configuration::initial(&p, &family);
    let outcome = if cli.trace {
        // keep stdout parseable under --json
        let sink: Box<dyn Write> = if cli.json {
            Box::new(io::stderr())
        } else {
            Box::new(io::stdout())
        };
        let mut trace = TextTrace::new(sink);
        let outcome = machine::run_traced(config, cli.budget, &mut trace);
        trace.into_inner().map_err(|e| e.to_string())?;
        outcome
    } else {
        machine::run(config, cli.budget)
    };
    let relevant_use = if cli.strict {
        match &outcome {
            RunOutcome::Correct { kind, .. } if kind.reply() != Reply::M => None,
            RunOutcome::Correct { .. } => Some("reply is not Boolean (M)".to_owned()),
            RunOutcome::BudgetExhausted { .. } => None,
            other => Some(format!("apply and reply are not meaningful: {other}")),
        }
    } else {
        None
    };
    if cli.json {
        print_json(json!({
            "program": p,
            "result": outcome,
            "reply": outcome.reply(),
            "family": outcome.applied(),
            "relevant_use_violation": relevant_use,
        }));
    } else {
        if !cli.trace {
            println!("{}", machine::format_finish(&outcome));
        }
        match &outcome {
            RunOutcome::Erroneous { reason, .. } => println!("reason={reason}"),
            RunOutcome::Diverged { witness, .. } => {
                println!("cycle first={} period={}", witness.first, witness.period)
            }
            _ => {}
        }
        match outcome.applied() {
            Some(f) => println!("family={f}"),
            None => println!("family=?"),
        }
        match outcome.reply() {
            Some(r) => println!("reply={r}"),
            None => println!("reply=?"),
        }
        if let Some(violation) = &relevant_use {
            eprintln!("relevant-use violation: {violation}");
        }
    }
    Ok(run_exit(&outcome))
}

fn cmd_diagonalize(cli: &Cli, candidate: &str, unit: Option<&str>) -> Result<u8, String> {
    let candidate = resolve_candidate(candidate, unit)?;
    match halting::refute_reflexive_solution(&candidate.program, &candidate.instance, cli.budget) {
        Ok(report) => {
            if cli.json {
                print_json(json!({ "candidate_name": candidate.name, "report": report }));
            } else {
                println!("{report}");
                println!("conclusion: `{}` is not a reflexive solution", report.candidate);
            }
            Ok(1)
        }
        Err(HaltingError::Inconclusive(why)) => {
            if cli.json {
                print_json(json!({ "candidate_name": candidate.name, "inconclusive": why }));
            } else {
                println!("inconclusive: {why}");
            }
            Ok(3)
        }
        Err(e) => Err(e.to_string()),
    }
}

fn cmd_check(cli: &Cli, candidate: &str, unit: Option<&str>, samples: &PathBuf) -> Result<u8, String> {
    let candidate = resolve_candidate(candidate, unit)?;
    let samples = load_samples(samples)?;
    let verdict = halting::check_solution(&candidate.program, &candidate.instance, &samples, cli.budget)
        .map_err(|e| e.to_string())?;
    if cli.json {
        print_json(json!({ "candidate": candidate.program, "verdict": verdict }));
    } else {
        println!("{verdict}");
    }
    Ok(match verdict {
        SolutionVerdict::Refuted { .. } => 1,
        SolutionVerdict::ConsistentOnSamples { .. } => 0,
        SolutionVerdict::Inconclusive { .. } => 3,
    })
}

fn execute(cli: &Cli) -> Result<u8, String> {
    match &cli.command {
        Command::Parse(program) => {
            let p = program.load()?;
            if cli.json {
                print_json(json!({ "program": p, "length": p.len(), "strict": isa::is_strict(&p) }));
            } else {
                println!("{p}");
            }
            Ok(0)
        }
        Command::Run { program, family } => cmd_run(cli, program, family),
        Command::Transform { program, swap, .. } => {
            let p = program.load()?;
            let q = if *swap { isa::swap(&p) } else { isa::ftod(&p) };
            if cli.json {
                print_json(json!({ "program": p, "result": q }));
            } else {
                println!("{q}");
            }
            Ok(0)
        }
        Command::Encode(program) => {
            let p = program.load()?;
            let bits = isa::encode_bits(&p);
            if cli.json {
                print_json(json!({ "program": p, "bits": bits.to_string(), "length": bits.len() }));
            } else {
                println!("{bits}");
            }
            Ok(0)
        }
        Command::Decide(program) => {
            let p = program.load()?;
            let verdict = halting::decide_dup_halting(&p).map_err(|e| e.to_string())?;
            if cli.json {
                print_json(json!({ "program": p, "verdict": verdict }));
            } else {
                println!("{verdict}");
            }
            Ok(match verdict {
                halting::DupVerdict::Halts => 0,
                halting::DupVerdict::Diverges => 1,
            })
        }
        Command::Diagonalize { candidate, unit } => cmd_diagonalize(cli, candidate, unit.as_deref()),
        Command::Check {
            candidate,
            unit,
            samples,
        } => cmd_check(cli, candidate, unit.as_deref(), samples),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
