//! Halting-problem laboratory.
//!
//! A functional unit `H` over SBS and an interface subset `I` give a halting
//! problem instance: a program `x` solves it if it Boolean-converges on every
//! state and, on input `ȳ:v`, replies T exactly when `y ∈ L_f(I)` converges
//! on `v`. `ȳ` is the ASCII bit encoding of `y`'s canonical text.
//!
//! When `dup ∈ I`, no reflexive solution exists: for a candidate `x` the
//! witness `y = f.dup ; ftod(swap(x))` run on `ȳ` does the opposite of what
//! `x` claims about it on `ȳ:ȳ`. [`refute_reflexive_solution`] carries this
//! out on concrete candidates and records replayable evidence. For the
//! dup-only unit the problem is nevertheless decidable, see
//! [`decide_dup_halting`].

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::funit::{default_focus, dup_unit, CustomOperation, FunctionalUnit, MethodOperation, SbsState, Symbol};
use crate::isa::{self, Basic, Focus, Instruction, InstructionSequence, MethodName};
use crate::machine::{self, RunOutcome};
use crate::services::{Reply, ServiceFamily};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HaltingError {
    #[error("language method `{0}` is not in the unit's interface")]
    LanguageOutsideInterface(MethodName),
    #[error("`{program}` is not in L_{focus}({{{language}}})")]
    NotInLanguage {
        program: String,
        focus: Focus,
        language: String,
    },
    #[error("`{0}` contains the plain termination instruction `!`")]
    NotStrict(String),
    #[error("the instance language must contain `dup` bound to Dup")]
    NoDup,
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("no contradiction reached: {0}")]
    NoContradiction(String),
}

fn method(name: &str) -> MethodName {
    MethodName::new(name).expect("built-in method name")
}

fn join_methods(methods: &BTreeSet<MethodName>) -> String {
    methods.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(",")
}

/// A unit `H`, a language interface `I ⊆ IF(H)`, and the focus at which `H` is addressed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HaltingInstance {
    unit: Arc<FunctionalUnit>,
    language: BTreeSet<MethodName>,
    focus: Focus,
}

impl HaltingInstance {
    pub fn new(unit: FunctionalUnit, language: BTreeSet<MethodName>) -> Result<Self, HaltingError> {
        if let Some(m) = language.iter().find(|m| !unit.contains(m)) {
            return Err(HaltingError::LanguageOutsideInterface(m.clone()));
        }
        Ok(HaltingInstance {
            unit: Arc::new(unit),
            language,
            focus: default_focus(),
        })
    }

    /// The instance with `I = IF(H)`.
    pub fn full(unit: FunctionalUnit) -> Self {
        let language = unit.interface();
        HaltingInstance {
            unit: Arc::new(unit),
            language,
            focus: default_focus(),
        }
    }

    /// `H = {dup -> Dup}`, `I = {dup}`.
    pub fn dup_only() -> Self {
        HaltingInstance::full(dup_unit())
    }

    pub fn with_focus(mut self, focus: Focus) -> Self {
        self.focus = focus;
        self
    }

    pub fn unit(&self) -> &Arc<FunctionalUnit> {
        &self.unit
    }

    pub fn language(&self) -> &BTreeSet<MethodName> {
        &self.language
    }

    pub fn focus(&self) -> &Focus {
        &self.focus
    }

    /// `f.H(s)`.
    pub fn family(&self, state: &SbsState) -> ServiceFamily {
        ServiceFamily::singleton(self.focus.clone(), self.unit.as_service(state.clone()))
    }

    pub fn run(&self, p: &InstructionSequence, state: &SbsState, budget: u64) -> RunOutcome {
        machine::evaluate(p, &self.family(state), budget)
    }

    fn require(&self, p: &InstructionSequence, language: &BTreeSet<MethodName>) -> Result<(), HaltingError> {
        if isa::in_language(p, &self.focus, language) {
            Ok(())
        } else {
            Err(HaltingError::NotInLanguage {
                program: p.to_string(),
                focus: self.focus.clone(),
                language: join_methods(language),
            })
        }
    }

    fn has_dup(&self) -> bool {
        let dup = method("dup");
        self.language.contains(&dup) && self.unit.operation(&dup) == Some(&MethodOperation::Dup)
    }
}

/// `ȳ : v`.
pub fn encode_input(y: &InstructionSequence, v: &SbsState) -> SbsState {
    let bits = isa::encode_bits(y);
    SbsState::from_bits(bits.iter()).concat(&SbsState::from_symbols([Symbol::Colon]).concat(v))
}

/// One point `(y, v)` at which a candidate solution is judged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Sample {
    pub y: InstructionSequence,
    pub v: SbsState,
}

impl Sample {
    pub fn new(y: InstructionSequence, v: SbsState) -> Self {
        Sample { y, v }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Counterexample {
    /// The candidate does not Boolean-converge on `state`.
    NotConvergent { state: SbsState, outcome: RunOutcome },
    /// On `ȳ:v` the candidate replies `claimed`, but `y` on `v` does the opposite.
    WrongAnswer {
        y: InstructionSequence,
        v: SbsState,
        claimed: Reply,
        actual: RunOutcome,
    },
}

impl Counterexample {
    /// Re-runs the stored computations and checks they reproduce the mismatch.
    pub fn replay(&self, x: &InstructionSequence, inst: &HaltingInstance, budget: u64) -> bool {
        match self {
            Counterexample::NotConvergent { state, outcome } => {
                let again = inst.run(x, state, budget);
                again == *outcome && !matches!(again.reply(), Some(Reply::T | Reply::F) | None)
            }
            Counterexample::WrongAnswer {
                y,
                v,
                claimed,
                actual,
            } => {
                let claimed_again = inst.run(x, &encode_input(y, v), budget).reply();
                let actual_again = inst.run(y, v, budget);
                let halts = matches!(actual_again, RunOutcome::Correct { .. });
                claimed_again == Some(*claimed)
                    && actual_again == *actual
                    && !matches!(actual_again, RunOutcome::BudgetExhausted { .. })
                    && (*claimed == Reply::T) != halts
            }
        }
    }
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Counterexample::NotConvergent { state, outcome } => {
                write!(f, "no Boolean reply on state `{state}`: {outcome}")
            }
            Counterexample::WrongAnswer {
                y,
                v,
                claimed,
                actual,
            } => write!(
                f,
                "on ȳ:v with y = `{y}`, v = `{v}` the candidate replies {claimed}, but y on v: {actual}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum SolutionVerdict {
    Refuted { counterexample: Counterexample },
    /// Every sample agrees; this is evidence, not a proof.
    ConsistentOnSamples { samples: usize },
    /// No refutation found, but some samples could not be settled within the budget.
    Inconclusive { decided: usize, undecided: Vec<String> },
}

impl fmt::Display for SolutionVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolutionVerdict::Refuted { counterexample } => write!(f, "refuted: {counterexample}"),
            SolutionVerdict::ConsistentOnSamples { samples } => {
                write!(f, "consistent on {samples} samples")
            }
            SolutionVerdict::Inconclusive { decided, undecided } => write!(
                f,
                "inconclusive: {decided} samples consistent, {} undecided ({})",
                undecided.len(),
                undecided.join("; ")
            ),
        }
    }
}

/// Judges `x` as a solution for `inst` on the given samples.
///
/// For each sample the candidate must Boolean-converge on `v` and on `ȳ:v`,
/// and its reply on `ȳ:v` must be T exactly when `y` converges on `v`.
pub fn check_solution(
    x: &InstructionSequence,
    inst: &HaltingInstance,
    samples: &[Sample],
    budget: u64,
) -> Result<SolutionVerdict, HaltingError> {
    inst.require(x, &inst.unit.interface())?;
    for s in samples {
        inst.require(&s.y, &inst.language)?;
    }
    let mut undecided = Vec::new();
    let mut decided = 0;
    for s in samples {
        let input = encode_input(&s.y, &s.v);
        let mut settled = true;
        let mut claimed = None;
        for state in [&s.v, &input] {
            let outcome = inst.run(x, state, budget);
            match outcome.reply() {
                None => {
                    settled = false;
                    undecided.push(format!("candidate on `{state}`: {outcome}"));
                }
                Some(Reply::T | Reply::F) => {
                    if state == &input {
                        claimed = outcome.reply();
                    }
                }
                Some(_) => {
                    return Ok(SolutionVerdict::Refuted {
                        counterexample: Counterexample::NotConvergent {
                            state: state.clone(),
                            outcome,
                        },
                    })
                }
            }
        }
        let actual = inst.run(&s.y, &s.v, budget);
        if matches!(actual, RunOutcome::BudgetExhausted { .. }) {
            settled = false;
            undecided.push(format!("`{}` on `{}`: {actual}", s.y, s.v));
        }
        if let Some(claimed) = claimed {
            if !matches!(actual, RunOutcome::BudgetExhausted { .. }) {
                let halts = matches!(actual, RunOutcome::Correct { .. });
                if (claimed == Reply::T) != halts {
                    return Ok(SolutionVerdict::Refuted {
                        counterexample: Counterexample::WrongAnswer {
                            y: s.y.clone(),
                            v: s.v.clone(),
                            claimed,
                            actual,
                        },
                    });
                }
            }
        }
        if settled {
            decided += 1;
        }
    }
    Ok(if undecided.is_empty() {
        SolutionVerdict::ConsistentOnSamples { samples: decided }
    } else {
        SolutionVerdict::Inconclusive { decided, undecided }
    })
}

/// `f.dup ; ftod(swap(x))`.
pub fn diagonal_witness(x: &InstructionSequence) -> Result<InstructionSequence, HaltingError> {
    diagonal_witness_at(&default_focus(), x)
}

pub fn diagonal_witness_at(focus: &Focus, x: &InstructionSequence) -> Result<InstructionSequence, HaltingError> {
    if !isa::is_strict(x) {
        return Err(HaltingError::NotStrict(x.to_string()));
    }
    Ok(isa::ftod(&isa::swap(x)).prepend(Instruction::Plain(Basic::new(focus.clone(), method("dup")))))
}

/// Which way the candidate was wrong about its own diagonal witness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// The candidate replied T on `ȳ:ȳ`; `y` provably diverges on `ȳ`.
    ClaimedHalting,
    /// The candidate replied F on `ȳ:ȳ`; `y` correctly terminates on `ȳ`.
    ClaimedDiverging,
    /// The candidate did not Boolean-converge on `ȳ:ȳ`, so it is not a solution at all.
    CandidateNotConvergent,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::ClaimedHalting => "claimed-halting",
            Branch::ClaimedDiverging => "claimed-diverging",
            Branch::CandidateNotConvergent => "candidate-not-convergent",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RefutationReport {
    pub candidate: InstructionSequence,
    pub unit: String,
    pub witness: InstructionSequence,
    /// `ȳ:ȳ`, the state on which the candidate judges its witness.
    pub candidate_input: SbsState,
    pub candidate_outcome: RunOutcome,
    /// `ȳ`, the state on which the witness is run.
    pub witness_input: SbsState,
    pub witness_outcome: RunOutcome,
    pub branch: Branch,
}

impl RefutationReport {
    /// Re-runs both computations and checks they reproduce the recorded
    /// outcomes and the contradiction of the recorded branch.
    pub fn replay(&self, inst: &HaltingInstance, budget: u64) -> bool {
        let candidate = inst.run(&self.candidate, &self.candidate_input, budget);
        let witness = inst.run(&self.witness, &self.witness_input, budget);
        candidate == self.candidate_outcome
            && witness == self.witness_outcome
            && contradiction(self.branch, &candidate, &witness)
    }
}

fn contradiction(branch: Branch, candidate: &RunOutcome, witness: &RunOutcome) -> bool {
    match branch {
        Branch::ClaimedHalting => {
            candidate.reply() == Some(Reply::T) && matches!(witness, RunOutcome::Diverged { .. })
        }
        Branch::ClaimedDiverging => {
            candidate.reply() == Some(Reply::F) && matches!(witness, RunOutcome::Correct { .. })
        }
        Branch::CandidateNotConvergent => candidate.reply() == Some(Reply::D),
    }
}

impl fmt::Display for RefutationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "candidate x      = {}", self.candidate)?;
        writeln!(f, "unit             = {}", self.unit)?;
        writeln!(f, "witness y        = {}", self.witness)?;
        writeln!(f, "x on f.H(ȳ:ȳ)    : {}", self.candidate_outcome)?;
        writeln!(f, "y on f.H(ȳ)      : {}", self.witness_outcome)?;
        write!(f, "branch           = {}", self.branch)
    }
}

/// Builds the diagonal witness for `x` and runs both sides of the contradiction.
pub fn refute_reflexive_solution(
    x: &InstructionSequence,
    inst: &HaltingInstance,
    budget: u64,
) -> Result<RefutationReport, HaltingError> {
    if !inst.has_dup() {
        return Err(HaltingError::NoDup);
    }
    inst.require(x, &inst.language)?;
    let y = diagonal_witness_at(&inst.focus, x)?;
    let encoded = encode_input(&y, &SbsState::empty());
    // encode_input(y, ε) = ȳ: ; drop the separator to get ȳ.
    let witness_input = encoded.split_first_segment().0;
    let candidate_input = encode_input(&y, &witness_input);
    let candidate_outcome = inst.run(x, &candidate_input, budget);
    let branch = match candidate_outcome.reply() {
        Some(Reply::T) => Branch::ClaimedHalting,
        Some(Reply::F) => Branch::ClaimedDiverging,
        Some(_) => Branch::CandidateNotConvergent,
        None => {
            return Err(HaltingError::Inconclusive(format!(
                "candidate on ȳ:ȳ: {candidate_outcome}"
            )))
        }
    };
    let witness_outcome = inst.run(&y, &witness_input, budget);
    if matches!(witness_outcome, RunOutcome::BudgetExhausted { .. }) && branch != Branch::CandidateNotConvergent {
        return Err(HaltingError::Inconclusive(format!(
            "witness on ȳ: {witness_outcome}"
        )));
    }
    let report = RefutationReport {
        candidate: x.clone(),
        unit: inst.unit.name().to_owned(),
        witness: y,
        candidate_input,
        candidate_outcome,
        witness_input,
        witness_outcome,
        branch,
    };
    if contradiction(report.branch, &report.candidate_outcome, &report.witness_outcome) {
        Ok(report)
    } else {
        Err(HaltingError::NoContradiction(report.to_string()))
    }
}

/// Replaces `f.dup` and `+f.dup` by `#1` and `-f.dup` by `#2`.
pub fn strip_dup(x: &InstructionSequence) -> Result<InstructionSequence, HaltingError> {
    let focus = default_focus();
    let dup: BTreeSet<MethodName> = [method("dup")].into();
    if !isa::in_language(x, &focus, &dup) {
        return Err(HaltingError::NotInLanguage {
            program: x.to_string(),
            focus,
            language: "dup".into(),
        });
    }
    let items = x
        .iter()
        .map(|u| match u {
            Instruction::Plain(_) | Instruction::PosTest(_) => Instruction::fwd(1),
            Instruction::NegTest(_) => Instruction::fwd(2),
            other => other.clone(),
        })
        .collect();
    Ok(InstructionSequence::new(items).expect("length preserved"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DupVerdict {
    Halts,
    Diverges,
}

impl fmt::Display for DupVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DupVerdict::Halts => "Halts",
            DupVerdict::Diverges => "Diverges",
        })
    }
}

/// Decides `x ↓ f.{dup -> Dup}(v)`, which does not depend on `v` because Dup
/// always replies T. Simulates the jump-only `strip_dup(x)` on the program
/// counter alone; a revisited pc is a cycle.
pub fn decide_dup_halting(x: &InstructionSequence) -> Result<DupVerdict, HaltingError> {
    let jumps = strip_dup(x)?;
    let k = jumps.len();
    let mut visited = vec![false; k + 1];
    let mut pc = BigUint::from(1u32);
    loop {
        let Some(i) = pc.to_usize().filter(|&i| (1..=k).contains(&i)) else {
            return Ok(DupVerdict::Diverges);
        };
        if std::mem::replace(&mut visited[i], true) {
            return Ok(DupVerdict::Diverges);
        }
        match jumps.get(i).expect("in range") {
            Instruction::HaltPos | Instruction::HaltNeg | Instruction::Halt => {
                return Ok(DupVerdict::Halts)
            }
            Instruction::FwdJump(l) => pc += l,
            Instruction::BwdJump(l) => {
                pc = if pc >= *l { &pc - l } else { BigUint::zero() };
            }
            other => unreachable!("strip_dup left a basic instruction {other}"),
        }
    }
}

/// Name of the harness-implemented bounded halting test.
pub const HALTS_METHOD: &str = "halts";

/// `{dup -> Dup, halts -> B}` where `B` on `ȳ:v` decodes `y` and replies T iff
/// `y` correctly terminates on `v` within `step_bound` steps. Nested `halts`
/// calls inside the simulation use the unit of depth `depth - 1`; at depth 0
/// the simulated unit is `{dup -> Dup}`. The state is left unchanged.
pub fn bounded_simulation_unit(step_bound: u64, depth: u32) -> FunctionalUnit {
    let inner = Arc::new(if depth == 0 {
        dup_unit()
    } else {
        bounded_simulation_unit(step_bound, depth - 1)
    });
    let focus = default_focus();
    let op = CustomOperation::new(
        format!("{HALTS_METHOD}[bound={step_bound},depth={depth}]"),
        move |state: &mut SbsState| {
            let (bits, rest) = state.split_first_segment();
            let Some(v) = rest else {
                return false;
            };
            let bits: Vec<bool> = bits.symbols().map(|s| s == Symbol::One).collect();
            let Ok(y) = isa::decode_bits(&bits) else {
                return false;
            };
            if !isa::in_language(&y, &focus, &inner.interface()) {
                return false;
            }
            let family = ServiceFamily::singleton(focus.clone(), inner.as_service(v));
            matches!(
                machine::evaluate(&y, &family, step_bound),
                RunOutcome::Correct { .. }
            )
        },
    );
    dup_unit()
        .extend([(method(HALTS_METHOD), MethodOperation::Custom(op))])
        .expect("halts is not a dup method")
        .with_name(format!("dup+{HALTS_METHOD}"))
}

pub const BOUNDED_SIMULATION_STEPS: u64 = 10_000;
pub const BOUNDED_SIMULATION_DEPTH: u32 = 2;

/// A candidate reflexive solver together with the instance it claims to solve.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub name: &'static str,
    pub program: InstructionSequence,
    pub instance: HaltingInstance,
}

/// Constant-true, constant-false, and a bounded-simulation solver.
pub fn builtin_candidates() -> Vec<Candidate> {
    let parse = |s: &str| isa::parse(s).expect("built-in candidate");
    vec![
        Candidate {
            name: "constant-true",
            program: parse("!t"),
            instance: HaltingInstance::dup_only(),
        },
        Candidate {
            name: "constant-false",
            program: parse("!f"),
            instance: HaltingInstance::dup_only(),
        },
        Candidate {
            name: "bounded-simulation",
            program: parse("+f.halts;!t;!f"),
            instance: HaltingInstance::full(bounded_simulation_unit(
                BOUNDED_SIMULATION_STEPS,
                BOUNDED_SIMULATION_DEPTH,
            )),
        },
    ]
}

pub fn builtin_candidate(name: &str) -> Option<Candidate> {
    builtin_candidates().into_iter().find(|c| c.name == name)
}

/// Strengths of the impossibility of solving the halting problem of a
/// programming environment `(L_f(IF(H)), H)` reflexively.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TuringImpossibility {
    /// Not potentially autosolvable: no extension of `H` admits a reflexive solution.
    Strong,
    /// Not potentially recursively autosolvable: no computable extension does.
    Intermediate,
    /// Not autosolvable: `H` itself admits no reflexive solution.
    Weak,
}

impl fmt::Display for TuringImpossibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TuringImpossibility::Strong => "strong Turing impossibility (not potentially autosolvable)",
            TuringImpossibility::Intermediate => {
                "intermediate Turing impossibility (not potentially recursively autosolvable)"
            }
            TuringImpossibility::Weak => "weak Turing impossibility (not autosolvable)",
        })
    }
}
