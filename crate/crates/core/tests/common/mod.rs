//! Shared generators and a naive reference interpreter used as an oracle.
#![allow(dead_code)]

use std::collections::HashSet;

use num_traits::ToPrimitive;
use pglb_core::isa::{Basic, Instruction, InstructionSequence};
use pglb_core::{Focus, MethodName, Reply};
use rand::Rng;

pub const STACK_METHODS: [&str; 8] = [
    "empty", "pop", "push:0", "push:1", "push::", "topeq:0", "topeq:1", "topeq::",
];

pub struct Shape<'a> {
    pub foci: &'a [&'a str],
    pub methods: &'a [&'a str],
    pub max_len: usize,
    pub max_jump: u64,
    pub strict: bool,
}

pub fn random_symbols(rng: &mut impl Rng, alphabet: &[char], max_len: usize) -> String {
    let len = rng.gen_range(0..=max_len);
    (0..len)
        .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
        .collect()
}

pub fn random_state(rng: &mut impl Rng, max_len: usize) -> String {
    random_symbols(rng, &['0', '1', ':'], max_len)
}

pub fn random_bits(rng: &mut impl Rng, max_len: usize) -> String {
    random_symbols(rng, &['0', '1'], max_len)
}

pub fn random_instruction(rng: &mut impl Rng, shape: &Shape<'_>) -> Instruction {
    let basic = |rng: &mut dyn rand::RngCore| {
        let f = shape.foci[rng.gen_range(0..shape.foci.len())];
        let m = shape.methods[rng.gen_range(0..shape.methods.len())];
        Basic::new(Focus::new(f).unwrap(), MethodName::new(m).unwrap())
    };
    match rng.gen_range(0..10) {
        0..=1 => Instruction::Plain(basic(rng)),
        2..=3 => Instruction::PosTest(basic(rng)),
        4 => Instruction::NegTest(basic(rng)),
        5..=6 => Instruction::fwd(rng.gen_range(0..=shape.max_jump)),
        7 => Instruction::bwd(rng.gen_range(0..=shape.max_jump)),
        _ => match rng.gen_range(0..if shape.strict { 2 } else { 3 }) {
            0 => Instruction::HaltPos,
            1 => Instruction::HaltNeg,
            _ => Instruction::Halt,
        },
    }
}

pub fn random_program(rng: &mut impl Rng, shape: &Shape<'_>) -> InstructionSequence {
    let len = rng.gen_range(1..=shape.max_len);
    InstructionSequence::new((0..len).map(|_| random_instruction(rng, shape)).collect()).unwrap()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefOutcome {
    /// Termination instruction and the final state of focus `f` (`None` when empty).
    Correct(Reply, Option<String>),
    Erroneous,
    Diverged,
    Budget,
}

impl RefOutcome {
    pub fn reply(&self) -> Option<Reply> {
        match self {
            RefOutcome::Correct(r, _) => Some(*r),
            RefOutcome::Erroneous | RefOutcome::Diverged => Some(Reply::D),
            RefOutcome::Budget => None,
        }
    }
}

/// Leading bit sequence `v` of `w`, and `v:w`.
pub fn dup_string(w: &str) -> String {
    let v = w.split(':').next().unwrap_or("");
    format!("{v}:{w}")
}

fn reference_method(state: &mut String, method: &str, with_dup: bool) -> Option<bool> {
    let top = state.chars().next();
    Some(match method {
        "empty" => state.is_empty(),
        "pop" => {
            if state.is_empty() {
                false
            } else {
                state.remove(0);
                true
            }
        }
        "push:0" | "push:1" | "push::" => {
            state.insert(0, method.chars().last().unwrap());
            false
        }
        "topeq:0" | "topeq:1" | "topeq::" => top == method.chars().last(),
        "dup" if with_dup => {
            *state = dup_string(state);
            true
        }
        _ => return None,
    })
}

/// Runs `p` over the single binding `f = H(state)` where `H` is the stack
/// unit, optionally with `dup`, straight from the method definitions. Every
/// visited configuration is remembered.
pub fn reference_run(p: &InstructionSequence, state: &str, with_dup: bool, budget: u64) -> RefOutcome {
    let items = p.instructions();
    let k = items.len() as i128;
    let mut pc: i128 = 1;
    let mut service = Some(state.to_owned());
    let mut seen = HashSet::new();
    let mut steps = 0;
    loop {
        if pc < 1 || pc > k {
            return RefOutcome::Erroneous;
        }
        if !seen.insert((pc, service.clone())) {
            return RefOutcome::Diverged;
        }
        if steps == budget {
            return RefOutcome::Budget;
        }
        steps += 1;
        let u = &items[(pc - 1) as usize];
        let jump = |l: &num_bigint::BigUint| l.to_i128().unwrap_or(i128::MAX / 2);
        match u {
            Instruction::Halt => return RefOutcome::Correct(Reply::M, service),
            Instruction::HaltPos => return RefOutcome::Correct(Reply::T, service),
            Instruction::HaltNeg => return RefOutcome::Correct(Reply::F, service),
            Instruction::FwdJump(l) => pc += jump(l),
            Instruction::BwdJump(l) => pc = (pc - jump(l)).max(0),
            Instruction::Plain(b) | Instruction::PosTest(b) | Instruction::NegTest(b) => {
                if b.focus.as_str() != "f" {
                    return RefOutcome::Erroneous;
                }
                let reply = match service.as_mut() {
                    Some(s) => reference_method(s, b.method.as_str(), with_dup),
                    None => None,
                };
                match (u, reply) {
                    (Instruction::Plain(_), None) => {
                        service = None;
                        pc += 1;
                    }
                    (_, None) => return RefOutcome::Erroneous,
                    (Instruction::Plain(_), Some(_)) => pc += 1,
                    (Instruction::PosTest(_), Some(r)) => pc += if r { 1 } else { 2 },
                    (_, Some(r)) => pc += if r { 2 } else { 1 },
                }
            }
        }
    }
}
