//! Operational semantics: configurations `<i, p, C>`, terminal classification,
//! the four step rules, bounded runs with exact divergence detection, and the
//! apply / reply operators.
//!
//! A run stops at a terminal configuration, when a configuration repeats
//! exactly (the step function is deterministic, so the run diverges), or when
//! the step budget is spent. Repeats are found with Brent's cycle detection,
//! which keeps only two configurations alive regardless of run length.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::isa::{Focus, Instruction, InstructionSequence, MethodName};
use crate::services::{Reply, ServiceFamily};

pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Termination {
    #[serde(rename = "!")]
    Halt,
    #[serde(rename = "!t")]
    HaltPos,
    #[serde(rename = "!f")]
    HaltNeg,
}

impl Termination {
    pub fn reply(self) -> Reply {
        match self {
            Termination::Halt => Reply::M,
            Termination::HaltPos => Reply::T,
            Termination::HaltNeg => Reply::F,
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Halt => "!",
            Termination::HaltPos => "!t",
            Termination::HaltNeg => "!f",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum ErrorReason {
    /// `pc = 0` or `pc > k`.
    PcOutOfRange { pc: String },
    /// A basic instruction names a focus absent from the family.
    UnknownFocus { focus: String },
    /// A test instruction whose service replies D; no rule applies.
    DivergentReply { focus: String, method: String },
}

impl fmt::Display for ErrorReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorReason::PcOutOfRange { pc } => write!(f, "pc-out-of-range (pc={pc})"),
            ErrorReason::UnknownFocus { focus } => write!(f, "unknown-focus ({focus})"),
            ErrorReason::DivergentReply { focus, method } => {
                write!(f, "divergent-reply ({focus}.{method})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Classification {
    NonTerminal,
    CorrectTerminal(Termination),
    ErroneousTerminal(ErrorReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    FwJmp,
    BwJmp,
    /// Plain instruction, or a test that proceeds to the next instruction.
    BActNext,
    /// A test that skips the next instruction.
    BActSkip,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepLabel {
    FwJmp,
    BwJmp,
    BAct {
        focus: Focus,
        method: MethodName,
        reply: Reply,
    },
}

impl StepLabel {
    pub fn rule_name(&self) -> &'static str {
        match self {
            StepLabel::FwJmp => "fw-jmp",
            StepLabel::BwJmp => "bw-jmp",
            StepLabel::BAct { .. } => "b-act",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MachineError {
    #[error("no step from a terminal configuration: {0:?}")]
    Terminal(Classification),
}

/// `<pc, program, family>`. The program is shared; only pc and family change.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub pc: BigUint,
    pub program: Arc<InstructionSequence>,
    pub family: ServiceFamily,
}

impl Configuration {
    pub fn new(pc: impl Into<BigUint>, program: Arc<InstructionSequence>, family: ServiceFamily) -> Self {
        Configuration {
            pc: pc.into(),
            program,
            family,
        }
    }

    /// `<1, p, C>`.
    pub fn initial(program: &InstructionSequence, family: &ServiceFamily) -> Self {
        Configuration::new(1u32, Arc::new(program.clone()), family.clone())
    }

    /// The instruction at pc, when `1 <= pc <= k`.
    pub fn current(&self) -> Option<&Instruction> {
        self.pc.to_usize().and_then(|i| self.program.get(i))
    }

    fn same_state(&self, other: &Configuration) -> bool {
        self.pc == other.pc && self.family == other.family
    }
}

pub fn classify(c: &Configuration) -> Classification {
    let Some(u) = c.current() else {
        return Classification::ErroneousTerminal(ErrorReason::PcOutOfRange {
            pc: c.pc.to_string(),
        });
    };
    match u {
        Instruction::Halt => Classification::CorrectTerminal(Termination::Halt),
        Instruction::HaltPos => Classification::CorrectTerminal(Termination::HaltPos),
        Instruction::HaltNeg => Classification::CorrectTerminal(Termination::HaltNeg),
        Instruction::FwdJump(_) | Instruction::BwdJump(_) => Classification::NonTerminal,
        Instruction::Plain(b) | Instruction::PosTest(b) | Instruction::NegTest(b) => {
            match c.family.lookup(&b.focus) {
                None => Classification::ErroneousTerminal(ErrorReason::UnknownFocus {
                    focus: b.focus.to_string(),
                }),
                Some(s) if !matches!(u, Instruction::Plain(_)) && !s.accepts(&b.method) => {
                    Classification::ErroneousTerminal(ErrorReason::DivergentReply {
                        focus: b.focus.to_string(),
                        method: b.method.to_string(),
                    })
                }
                Some(_) => Classification::NonTerminal,
            }
        }
    }
}

/// Every rule whose premise holds at `c`, each premise checked on its own.
/// The semantics is deterministic iff this has exactly one element for every
/// non-terminal configuration.
pub fn applicable_rules(c: &Configuration) -> Vec<Rule> {
    let mut rules = Vec::new();
    let Some(u) = c.current() else {
        return rules;
    };
    if matches!(u, Instruction::FwdJump(_)) {
        rules.push(Rule::FwJmp);
    }
    if matches!(u, Instruction::BwdJump(_)) {
        rules.push(Rule::BwJmp);
    }
    let reply = u
        .basic()
        .and_then(|b| c.family.lookup(&b.focus).map(|s| s.reply_of(&b.method)));
    if let Some(reply) = reply {
        let next = matches!(u, Instruction::Plain(_))
            || (matches!(u, Instruction::PosTest(_)) && reply == Reply::T)
            || (matches!(u, Instruction::NegTest(_)) && reply == Reply::F);
        let skip = (matches!(u, Instruction::PosTest(_)) && reply == Reply::F)
            || (matches!(u, Instruction::NegTest(_)) && reply == Reply::T);
        if next {
            rules.push(Rule::BActNext);
        }
        if skip {
            rules.push(Rule::BActSkip);
        }
    }
    rules
}

/// Performs one step in place.
pub fn step_mut(c: &mut Configuration) -> Result<StepLabel, MachineError> {
    match classify(c) {
        Classification::NonTerminal => {}
        other => return Err(MachineError::Terminal(other)),
    }
    let u = c.current().expect("non-terminal pc is in range").clone();
    let label = match u {
        Instruction::FwdJump(l) => {
            c.pc += l;
            StepLabel::FwJmp
        }
        Instruction::BwdJump(l) => {
            c.pc = if c.pc >= l { &c.pc - l } else { BigUint::zero() };
            StepLabel::BwJmp
        }
        Instruction::Plain(ref b) | Instruction::PosTest(ref b) | Instruction::NegTest(ref b) => {
            let service = c
                .family
                .lookup_mut(&b.focus)
                .expect("classified focus is bound");
            let reply = service.process(&b.method);
            let skip = match (&u, reply) {
                (Instruction::PosTest(_), Reply::F) | (Instruction::NegTest(_), Reply::T) => true,
                (Instruction::Plain(_), _) => false,
                (_, Reply::T | Reply::F) => false,
                _ => unreachable!("tests with reply D are terminal"),
            };
            c.pc += if skip { 2u32 } else { 1u32 };
            StepLabel::BAct {
                focus: b.focus.clone(),
                method: b.method.clone(),
                reply,
            }
        }
        Instruction::Halt | Instruction::HaltPos | Instruction::HaltNeg => {
            unreachable!("termination instructions are terminal")
        }
    };
    Ok(label)
}

pub fn step(c: &Configuration) -> Result<(Configuration, StepLabel), MachineError> {
    let mut next = c.clone();
    let label = step_mut(&mut next)?;
    Ok((next, label))
}

/// Evidence of divergence: the configuration after `first` steps recurs after
/// `first + period` steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Cycle {
    pub first: u64,
    pub period: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum RunOutcome {
    Correct {
        kind: Termination,
        family: ServiceFamily,
        steps: u64,
    },
    Erroneous {
        reason: ErrorReason,
        steps: u64,
    },
    #[serde(rename = "diverged")]
    Diverged { witness: Cycle, steps: u64 },
    #[serde(rename = "budget")]
    BudgetExhausted { steps: u64 },
}

impl RunOutcome {
    pub fn steps(&self) -> u64 {
        match self {
            RunOutcome::Correct { steps, .. }
            | RunOutcome::Erroneous { steps, .. }
            | RunOutcome::Diverged { steps, .. }
            | RunOutcome::BudgetExhausted { steps } => *steps,
        }
    }

    pub fn class_name(&self) -> &'static str {
        match self {
            RunOutcome::Correct { .. } => "correct",
            RunOutcome::Erroneous { .. } => "erroneous",
            RunOutcome::Diverged { .. } => "diverged",
            RunOutcome::BudgetExhausted { .. } => "budget",
        }
    }

    /// `p ! C`, or `None` when the budget ran out.
    pub fn reply(&self) -> Option<Reply> {
        match self {
            RunOutcome::Correct { kind, .. } => Some(kind.reply()),
            RunOutcome::Erroneous { .. } | RunOutcome::Diverged { .. } => Some(Reply::D),
            RunOutcome::BudgetExhausted { .. } => None,
        }
    }

    /// `p •→ C`, or `None` when the budget ran out.
    pub fn applied(&self) -> Option<ServiceFamily> {
        match self {
            RunOutcome::Correct { family, .. } => Some(family.clone()),
            RunOutcome::Erroneous { .. } | RunOutcome::Diverged { .. } => {
                Some(ServiceFamily::empty())
            }
            RunOutcome::BudgetExhausted { .. } => None,
        }
    }
}

impl fmt::Display for RunOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunOutcome::Correct { kind, family, steps } => {
                write!(f, "correct termination at {kind} after {steps} steps, family [{family}]")
            }
            RunOutcome::Erroneous { reason, steps } => {
                write!(f, "erroneous termination ({reason}) after {steps} steps")
            }
            RunOutcome::Diverged { witness, steps } => write!(
                f,
                "divergence proven after {steps} steps: configuration {} recurs with period {}",
                witness.first, witness.period
            ),
            RunOutcome::BudgetExhausted { steps } => write!(f, "budget exhausted after {steps} steps"),
        }
    }
}

/// One executed step, as reported to a [`TraceSink`].
#[derive(Debug, Clone)]
pub struct StepEvent<'a> {
    /// 1-based index of this step.
    pub index: u64,
    pub pc: &'a BigUint,
    pub instruction: &'a Instruction,
    pub label: &'a StepLabel,
}

pub trait TraceSink {
    fn step(&mut self, event: &StepEvent<'_>);
    fn finish(&mut self, outcome: &RunOutcome);
}

/// Discards all events.
pub struct NoTrace;

impl TraceSink for NoTrace {
    fn step(&mut self, _: &StepEvent<'_>) {}
    fn finish(&mut self, _: &RunOutcome) {}
}

/// Writes the line-oriented text trace.
pub struct TextTrace<W: Write> {
    out: W,
    error: Option<io::Error>,
}

impl<W: Write> TextTrace<W> {
    pub fn new(out: W) -> Self {
        TextTrace { out, error: None }
    }

    /// The sink, or the first write error encountered.
    pub fn into_inner(self) -> io::Result<W> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.out),
        }
    }

    fn emit(&mut self, line: fmt::Arguments<'_>) {
        if self.error.is_none() {
            if let Err(e) = writeln!(self.out, "{line}") {
                self.error = Some(e);
            }
        }
    }
}

pub fn format_step(event: &StepEvent<'_>) -> String {
    let (reply, focus) = match event.label {
        StepLabel::BAct { focus, reply, .. } => (reply.to_string(), focus.to_string()),
        _ => ("-".to_owned(), "-".to_owned()),
    };
    format!(
        "step={} pc={} instr={} rule={} reply={} focus={}",
        event.index,
        event.pc,
        event.instruction,
        event.label.rule_name(),
        reply,
        focus
    )
}

pub fn format_finish(outcome: &RunOutcome) -> String {
    let kind = match outcome {
        RunOutcome::Correct { kind, .. } => kind.to_string(),
        _ => "-".to_owned(),
    };
    format!(
        "outcome={} kind={} steps={}",
        outcome.class_name(),
        kind,
        outcome.steps()
    )
}

impl<W: Write> TraceSink for TextTrace<W> {
    fn step(&mut self, event: &StepEvent<'_>) {
        let line = format_step(event);
        self.emit(format_args!("{line}"));
    }

    fn finish(&mut self, outcome: &RunOutcome) {
        let line = format_finish(outcome);
        self.emit(format_args!("{line}"));
    }
}

pub fn run(c: Configuration, budget: u64) -> RunOutcome {
    run_traced(c, budget, &mut NoTrace)
}

pub fn run_traced(c: Configuration, budget: u64, sink: &mut dyn TraceSink) -> RunOutcome {
    let outcome = run_inner(c, budget, sink);
    sink.finish(&outcome);
    outcome
}

fn run_inner(start: Configuration, budget: u64, sink: &mut dyn TraceSink) -> RunOutcome {
    let mut current = start.clone();
    let mut steps: u64 = 0;
    // Brent: `saved` is the configuration after `saved_at` steps; the search
    // window doubles each time it is exhausted without a repeat.
    let mut saved = start.clone();
    let mut power: u64 = 1;
    let mut lam: u64 = 0;
    loop {
        match classify(&current) {
            Classification::NonTerminal => {}
            Classification::CorrectTerminal(kind) => {
                return RunOutcome::Correct {
                    kind,
                    family: current.family,
                    steps,
                }
            }
            Classification::ErroneousTerminal(reason) => {
                return RunOutcome::Erroneous { reason, steps }
            }
        }
        if steps >= budget {
            return RunOutcome::BudgetExhausted { steps };
        }
        let pc = current.pc.clone();
        let instruction = current.current().expect("in range").clone();
        let label = step_mut(&mut current).expect("non-terminal");
        steps += 1;
        sink.step(&StepEvent {
            index: steps,
            pc: &pc,
            instruction: &instruction,
            label: &label,
        });
        lam += 1;
        if current.same_state(&saved) {
            let first = first_repeat(&start, lam);
            return RunOutcome::Diverged {
                witness: Cycle { first, period: lam },
                steps,
            };
        }
        if lam == power {
            saved = current.clone();
            power *= 2;
            lam = 0;
        }
    }
}

/// Smallest `mu` with config(mu) = config(mu + period), by replay.
fn first_repeat(start: &Configuration, period: u64) -> u64 {
    let mut behind = start.clone();
    let mut ahead = start.clone();
    for _ in 0..period {
        step_mut(&mut ahead).expect("cycle configurations are non-terminal");
    }
    let mut mu = 0;
    while !behind.same_state(&ahead) {
        step_mut(&mut behind).expect("non-terminal");
        step_mut(&mut ahead).expect("non-terminal");
        mu += 1;
    }
    mu
}

/// Runs `p` from `<1, p, C>`.
pub fn evaluate(p: &InstructionSequence, family: &ServiceFamily, budget: u64) -> RunOutcome {
    run(Configuration::initial(p, family), budget)
}

/// A value, or the admission that the budget did not settle it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Evaluation<T> {
    Value(T),
    BudgetExhausted { steps: u64 },
}

impl<T> Evaluation<T> {
    pub fn value(self) -> Option<T> {
        match self {
            Evaluation::Value(v) => Some(v),
            Evaluation::BudgetExhausted { .. } => None,
        }
    }
}

/// `p •→ C`: the final family on correct termination, otherwise the empty family.
pub fn apply(p: &InstructionSequence, family: &ServiceFamily, budget: u64) -> Evaluation<ServiceFamily> {
    let outcome = evaluate(p, family, budget);
    match outcome.applied() {
        Some(f) => Evaluation::Value(f),
        None => Evaluation::BudgetExhausted {
            steps: outcome.steps(),
        },
    }
}

/// `p ! C`: T / F at `!t` / `!f`, M at `!`, D when there is no correct termination.
pub fn reply(p: &InstructionSequence, family: &ServiceFamily, budget: u64) -> Evaluation<Reply> {
    let outcome = evaluate(p, family, budget);
    match outcome.reply() {
        Some(r) => Evaluation::Value(r),
        None => Evaluation::BudgetExhausted {
            steps: outcome.steps(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelevantUseError {
    #[error("apply used on a computation that does not converge: {0}")]
    NotConvergent(String),
    #[error("reply used on a computation without a Boolean result: {0}")]
    NotBooleanConvergent(String),
}

/// Apply under the relevant-use convention: only for converging computations.
pub fn apply_strict(
    p: &InstructionSequence,
    family: &ServiceFamily,
    budget: u64,
) -> Result<ServiceFamily, RelevantUseError> {
    match evaluate(p, family, budget) {
        RunOutcome::Correct { family, .. } => Ok(family),
        other => Err(RelevantUseError::NotConvergent(other.to_string())),
    }
}

/// Reply under the relevant-use convention: only for Boolean results.
pub fn reply_strict(
    p: &InstructionSequence,
    family: &ServiceFamily,
    budget: u64,
) -> Result<bool, RelevantUseError> {
    let outcome = evaluate(p, family, budget);
    match &outcome {
        RunOutcome::Correct {
            kind: Termination::HaltPos,
            ..
        } => Ok(true),
        RunOutcome::Correct {
            kind: Termination::HaltNeg,
            ..
        } => Ok(false),
        _ => Err(RelevantUseError::NotBooleanConvergent(outcome.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Convergence {
    Yes,
    No,
    Unknown,
}

impl fmt::Display for Convergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convergence::Yes => "yes",
            Convergence::No => "no",
            Convergence::Unknown => "unknown",
        })
    }
}

/// `p ↓ C`: reply in {T, F, M}.
pub fn converges(p: &InstructionSequence, family: &ServiceFamily, budget: u64) -> Convergence {
    match reply(p, family, budget) {
        Evaluation::Value(Reply::D) => Convergence::No,
        Evaluation::Value(_) => Convergence::Yes,
        Evaluation::BudgetExhausted { .. } => Convergence::Unknown,
    }
}

/// `p ⇓ C`: reply in {T, F}.
pub fn converges_bool(p: &InstructionSequence, family: &ServiceFamily, budget: u64) -> Convergence {
    match reply(p, family, budget) {
        Evaluation::Value(Reply::T | Reply::F) => Convergence::Yes,
        Evaluation::Value(_) => Convergence::No,
        Evaluation::BudgetExhausted { .. } => Convergence::Unknown,
    }
}
