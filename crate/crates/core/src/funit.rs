//! Functional units over the stack state space SBS = {0, 1, :}*.
//!
//! A state is a stack whose top is the left-most symbol. Method operations
//! are total functions from states to a Boolean reply and a successor state.
//! A functional unit is a finite map from method names to such operations,
//! and a functional unit together with a state behaves as a service.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::isa::{self, Focus, InstructionSequence, MethodName};
use crate::machine::{self, RunOutcome};
use crate::services::{Service, ServiceFamily};

/// The focus at which derived method operations address their functional unit.
pub const DEFAULT_FOCUS: &str = "f";

pub fn default_focus() -> Focus {
    Focus::new(DEFAULT_FOCUS).expect("valid focus")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FunitError {
    #[error("invalid SBS literal `{0}`: symbols must be 0, 1 or :")]
    BadState(String),
    #[error("method `{0}` is already bound to a different operation")]
    Conflict(MethodName),
    #[error("method `{0}` is not in the interface")]
    NotInInterface(MethodName),
    #[error("{0} has a zero digit in base 4 and encodes no state")]
    NotAnEncoding(BigUint),
    #[error("`{program}` is not in L_{focus}({interface})")]
    NotInLanguage {
        program: String,
        focus: Focus,
        interface: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Zero,
    One,
    Colon,
}

impl Symbol {
    pub fn from_char(c: char) -> Option<Symbol> {
        match c {
            '0' => Some(Symbol::Zero),
            '1' => Some(Symbol::One),
            ':' => Some(Symbol::Colon),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Symbol::Zero => '0',
            Symbol::One => '1',
            Symbol::Colon => ':',
        }
    }

    pub fn from_bit(b: bool) -> Symbol {
        if b {
            Symbol::One
        } else {
            Symbol::Zero
        }
    }

    /// Quaternary digit used by [`alpha`].
    fn digit(self) -> u32 {
        match self {
            Symbol::Zero => 1,
            Symbol::One => 2,
            Symbol::Colon => 3,
        }
    }

    pub const ALL: [Symbol; 3] = [Symbol::Zero, Symbol::One, Symbol::Colon];
}

/// A stack over `{0, 1, :}`; the top is the left-most symbol of the literal.
#[derive(Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct SbsState {
    // Stored bottom-first so that push and pop work at the end of the vector.
    rev: Vec<Symbol>,
}

impl SbsState {
    pub fn empty() -> Self {
        SbsState::default()
    }

    /// Builds a state from symbols listed top-first.
    pub fn from_symbols(top_first: impl IntoIterator<Item = Symbol>) -> Self {
        let mut rev: Vec<Symbol> = top_first.into_iter().collect();
        rev.reverse();
        SbsState { rev }
    }

    pub fn len(&self) -> usize {
        self.rev.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rev.is_empty()
    }

    pub fn top(&self) -> Option<Symbol> {
        self.rev.last().copied()
    }

    pub fn push(&mut self, s: Symbol) {
        self.rev.push(s);
    }

    pub fn pop(&mut self) -> Option<Symbol> {
        self.rev.pop()
    }

    /// Symbols top-first.
    pub fn symbols(&self) -> impl DoubleEndedIterator<Item = Symbol> + ExactSizeIterator + '_ {
        self.rev.iter().rev().copied()
    }

    /// `self : rest` read left to right.
    pub fn concat(&self, rest: &SbsState) -> SbsState {
        let mut rev = rest.rev.clone();
        rev.extend_from_slice(&self.rev);
        SbsState { rev }
    }

    /// Bits as a state, first bit on top.
    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> Self {
        SbsState::from_symbols(bits.into_iter().map(Symbol::from_bit))
    }

    /// Splits at the first `:` (top-most): the leading pure-bit segment and, if
    /// a separator is present, the remainder after it.
    pub fn split_first_segment(&self) -> (SbsState, Option<SbsState>) {
        match self.rev.iter().rposition(|&s| s == Symbol::Colon) {
            None => (self.clone(), None),
            Some(i) => (
                SbsState {
                    rev: self.rev[i + 1..].to_vec(),
                },
                Some(SbsState {
                    rev: self.rev[..i].to_vec(),
                }),
            ),
        }
    }
}

impl fmt::Display for SbsState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.symbols() {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for SbsState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SbsState({:?})", self.to_string())
    }
}

impl FromStr for SbsState {
    type Err = FunitError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(Symbol::from_char)
            .collect::<Option<Vec<_>>>()
            .map(SbsState::from_symbols)
            .ok_or_else(|| FunitError::BadState(s.to_owned()))
    }
}

impl Serialize for SbsState {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// A method operation implemented outside the built-in stack repertoire.
/// Two custom operations are the same operation iff their ids match.
#[derive(Clone)]
pub struct CustomOperation {
    id: String,
    op: Arc<dyn Fn(&mut SbsState) -> bool + Send + Sync>,
}

impl CustomOperation {
    pub fn new(
        id: impl Into<String>,
        op: impl Fn(&mut SbsState) -> bool + Send + Sync + 'static,
    ) -> Self {
        CustomOperation {
            id: id.into(),
            op: Arc::new(op),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }
}

impl fmt::Debug for CustomOperation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Custom({})", self.id)
    }
}

impl PartialEq for CustomOperation {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for CustomOperation {}

impl Hash for CustomOperation {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state);
    }
}

/// A total function SBS -> Bool x SBS.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MethodOperation {
    /// T iff the stack is empty; state unchanged.
    Empty,
    /// Removes the top symbol and replies T; on the empty stack replies F.
    Pop,
    /// Inserts the symbol on top and replies F.
    Push(Symbol),
    /// T iff the stack is nonempty and its top is the symbol; state unchanged.
    TopEq(Symbol),
    /// `v -> v:v`, `v:w -> v:v:w` for the leading bit segment `v`; replies T.
    Dup,
    Custom(CustomOperation),
}

impl MethodOperation {
    /// Applies the operation in place and returns its reply.
    pub fn apply_mut(&self, state: &mut SbsState) -> bool {
        match self {
            MethodOperation::Empty => state.is_empty(),
            MethodOperation::Pop => state.pop().is_some(),
            MethodOperation::Push(s) => {
                state.push(*s);
                false
            }
            MethodOperation::TopEq(s) => state.top() == Some(*s),
            MethodOperation::Dup => {
                let top_len = state
                    .rev
                    .iter()
                    .rev()
                    .take_while(|&&s| s != Symbol::Colon)
                    .count();
                let start = state.rev.len() - top_len;
                state.rev.push(Symbol::Colon);
                state.rev.extend_from_within(start..start + top_len);
                true
            }
            MethodOperation::Custom(c) => (c.op)(state),
        }
    }

    /// `M(s) = (M^r(s), M^e(s))`.
    pub fn call(&self, state: &SbsState) -> (bool, SbsState) {
        let mut next = state.clone();
        let r = self.apply_mut(&mut next);
        (r, next)
    }

    /// `M^r(s)`; avoids copying the state for the built-in operations.
    pub fn reply(&self, state: &SbsState) -> bool {
        match self {
            MethodOperation::Empty => state.is_empty(),
            MethodOperation::Pop => !state.is_empty(),
            MethodOperation::Push(_) => false,
            MethodOperation::TopEq(s) => state.top() == Some(*s),
            MethodOperation::Dup => true,
            MethodOperation::Custom(_) => self.call(state).0,
        }
    }
}

pub fn dup_operation() -> MethodOperation {
    MethodOperation::Dup
}

fn name(s: &str) -> MethodName {
    MethodName::new(s).expect("built-in method name")
}

/// A finite map from method names to method operations, with a display name.
///
/// Equality is structural on the method map; the name is only a label.
#[derive(Debug, Clone, Eq)]
pub struct FunctionalUnit {
    name: String,
    methods: BTreeMap<MethodName, MethodOperation>,
}

impl PartialEq for FunctionalUnit {
    fn eq(&self, other: &Self) -> bool {
        self.methods == other.methods
    }
}

impl Hash for FunctionalUnit {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.methods.hash(state);
    }
}

impl FunctionalUnit {
    pub fn new(
        name: impl Into<String>,
        entries: impl IntoIterator<Item = (MethodName, MethodOperation)>,
    ) -> Result<Self, FunitError> {
        FunctionalUnit {
            name: name.into(),
            methods: BTreeMap::new(),
        }
        .extend(entries)
    }

    /// The unit with an empty interface.
    pub fn empty() -> Self {
        FunctionalUnit {
            name: "none".into(),
            methods: BTreeMap::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// `IF(H)`.
    pub fn interface(&self) -> BTreeSet<MethodName> {
        self.methods.keys().cloned().collect()
    }

    pub fn contains(&self, m: &MethodName) -> bool {
        self.methods.contains_key(m)
    }

    /// `m_H`.
    pub fn operation(&self, m: &MethodName) -> Option<&MethodOperation> {
        self.methods.get(m)
    }

    pub fn len(&self) -> usize {
        self.methods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.methods.is_empty()
    }

    /// Adds entries; a name may only be rebound to the identical operation.
    pub fn extend(
        &self,
        entries: impl IntoIterator<Item = (MethodName, MethodOperation)>,
    ) -> Result<Self, FunitError> {
        let mut out = self.clone();
        let mut added = Vec::new();
        for (m, op) in entries {
            match out.methods.get(&m) {
                Some(existing) if *existing != op => return Err(FunitError::Conflict(m)),
                Some(_) => {}
                None => {
                    added.push(m.to_string());
                    out.methods.insert(m, op);
                }
            }
        }
        if !added.is_empty() && !self.methods.is_empty() {
            out.name = format!("{}+{}", self.name, added.join("+"));
        }
        Ok(out)
    }

    /// `<I, H>`: keeps only the entries named in `interface`.
    pub fn restrict(&self, interface: &BTreeSet<MethodName>) -> Result<Self, FunitError> {
        if let Some(m) = interface.iter().find(|m| !self.methods.contains_key(*m)) {
            return Err(FunitError::NotInInterface(m.clone()));
        }
        let methods: BTreeMap<_, _> = self
            .methods
            .iter()
            .filter(|(m, _)| interface.contains(*m))
            .map(|(m, op)| (m.clone(), op.clone()))
            .collect();
        let name = if methods.len() == self.methods.len() {
            self.name.clone()
        } else {
            let names: Vec<_> = methods.keys().map(|m| m.to_string()).collect();
            format!("{}[{}]", self.name, names.join(","))
        };
        Ok(FunctionalUnit { name, methods })
    }

    /// `H(s)` as a service.
    pub fn as_service(self: &Arc<Self>, state: SbsState) -> Service {
        Service::unit(Arc::clone(self), state)
    }
}

/// `H_s`: the eight stack methods.
pub fn stack_unit() -> FunctionalUnit {
    use MethodOperation::*;
    use Symbol::*;
    FunctionalUnit {
        name: "stack".into(),
        methods: [
            ("empty", Empty),
            ("pop", Pop),
            ("push:0", Push(Zero)),
            ("push:1", Push(One)),
            ("push::", Push(Colon)),
            ("topeq:0", TopEq(Zero)),
            ("topeq:1", TopEq(One)),
            ("topeq::", TopEq(Colon)),
        ]
        .into_iter()
        .map(|(n, op)| (name(n), op))
        .collect(),
    }
}

/// `{dup -> Dup}`.
pub fn dup_unit() -> FunctionalUnit {
    FunctionalUnit {
        name: "dup".into(),
        methods: [(name("dup"), MethodOperation::Dup)].into_iter().collect(),
    }
}

/// `H_{s,dup}`: the stack unit extended with `dup`.
pub fn stack_dup_unit() -> FunctionalUnit {
    stack_unit()
        .extend([(name("dup"), MethodOperation::Dup)])
        .expect("dup is not a stack method")
}

/// Looks up one of the named units accepted in family literals.
pub fn named_unit(name: &str) -> Option<FunctionalUnit> {
    match name {
        "stack" => Some(stack_unit()),
        "stack+dup" => Some(stack_dup_unit()),
        "dup" => Some(dup_unit()),
        "none" => Some(FunctionalUnit::empty()),
        _ => None,
    }
}

/// Result of a derived method operation `|x|_H(s)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Derived {
    Defined { reply: bool, state: SbsState },
    /// The computation does not correctly terminate (reply D).
    Undefined,
    /// The step budget ran out before the outcome was settled.
    Unknown { steps: u64 },
}

/// `|x|_H(s)`, with the unit addressed at [`DEFAULT_FOCUS`].
pub fn derived_operation(
    x: &InstructionSequence,
    unit: &Arc<FunctionalUnit>,
    state: &SbsState,
    budget: u64,
) -> Result<Derived, FunitError> {
    derived_operation_at(&default_focus(), x, unit, state, budget)
}

pub fn derived_operation_at(
    focus: &Focus,
    x: &InstructionSequence,
    unit: &Arc<FunctionalUnit>,
    state: &SbsState,
    budget: u64,
) -> Result<Derived, FunitError> {
    let interface = unit.interface();
    if !isa::in_language(x, focus, &interface) {
        return Err(FunitError::NotInLanguage {
            program: x.to_string(),
            focus: focus.clone(),
            interface: interface
                .iter()
                .map(|m| m.to_string())
                .collect::<Vec<_>>()
                .join(","),
        });
    }
    let family = ServiceFamily::singleton(focus.clone(), unit.as_service(state.clone()));
    Ok(match machine::evaluate(x, &family, budget) {
        RunOutcome::Correct { kind, family, .. } => {
            let reply = match kind {
                machine::Termination::HaltPos => true,
                machine::Termination::HaltNeg => false,
                machine::Termination::Halt => unreachable!("strict programs have no plain `!`"),
            };
            // The unit service cannot be replaced by anything but the empty service,
            // and only through a method outside the interface, which x cannot issue.
            let state = match family.lookup(focus) {
                Some(Service::Unit(u)) => u.state().clone(),
                other => unreachable!("focus {focus} rebound to {other:?}"),
            };
            Derived::Defined { reply, state }
        }
        RunOutcome::Erroneous { .. } | RunOutcome::Diverged { .. } => Derived::Undefined,
        RunOutcome::BudgetExhausted { steps } => Derived::Unknown { steps },
    })
}

/// Quaternary value of the state read top-first with digits 0->1, 1->2, :->3.
pub fn alpha(v: &SbsState) -> BigUint {
    v.symbols()
        .fold(BigUint::zero(), |acc, s| acc * 4u32 + s.digit())
}

/// Inverse of [`alpha`]; fails when the base-4 expansion has a 0 digit.
pub fn alpha_inv(n: &BigUint) -> Result<SbsState, FunitError> {
    let mut digits = Vec::new();
    let mut rest = n.clone();
    while !rest.is_zero() {
        let d = (&rest % 4u32).to_u32().expect("digit < 4");
        let s = match d {
            1 => Symbol::Zero,
            2 => Symbol::One,
            3 => Symbol::Colon,
            _ => return Err(FunitError::NotAnEncoding(n.clone())),
        };
        digits.push(s);
        rest >>= 2u32;
    }
    // Least significant digit is the bottom of the stack.
    Ok(SbsState { rev: digits })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(s: &str) -> SbsState {
        s.parse().unwrap()
    }

    fn call(unit: &FunctionalUnit, m: &str, s: &str) -> (bool, String) {
        let (r, next) = unit.operation(&name(m)).unwrap().call(&st(s));
        (r, next.to_string())
    }

    #[test]
    fn state_literals() {
        assert_eq!(st("0:1").to_string(), "0:1");
        assert_eq!(st("0:1").top(), Some(Symbol::Zero));
        assert_eq!(st("").len(), 0);
        assert!("012".parse::<SbsState>().is_err());
    }

    #[test]
    fn stack_methods() {
        let h = stack_unit();
        assert_eq!(h.len(), 8);
        assert_eq!(call(&h, "pop", "0:1"), (true, ":1".into()));
        assert_eq!(call(&h, "pop", ""), (false, "".into()));
        assert_eq!(call(&h, "push:1", "0"), (false, "10".into()));
        assert_eq!(call(&h, "push::", ""), (false, ":".into()));
        assert_eq!(call(&h, "topeq::", ":01"), (true, ":01".into()));
        assert_eq!(call(&h, "topeq:0", ""), (false, "".into()));
        assert_eq!(call(&h, "empty", ""), (true, "".into()));
        assert_eq!(call(&h, "empty", "1"), (false, "1".into()));
    }

    #[test]
    fn dup_clauses() {
        let dup = dup_operation();
        assert_eq!(dup.call(&st("01")), (true, st("01:01")));
        assert_eq!(dup.call(&st("1:0")), (true, st("1:1:0")));
        assert_eq!(dup.call(&st("")), (true, st(":")));
        assert_eq!(dup.call(&st(":1")), (true, st("::1")));
    }

    #[test]
    fn reply_matches_call() {
        let h = stack_dup_unit();
        for s in ["", "0", "1:0", ":01"] {
            for m in h.interface() {
                let op = h.operation(&m).unwrap();
                assert_eq!(op.reply(&st(s)), op.call(&st(s)).0, "{m} on {s:?}");
            }
        }
    }

    #[test]
    fn extend_and_restrict() {
        let h = stack_unit();
        let hd = h.extend([(name("dup"), dup_operation())]).unwrap();
        assert_eq!(hd.len(), 9);
        assert_eq!(hd.name(), "stack+dup");
        assert_eq!(h.extend([]).unwrap(), h);
        let d = dup_unit();
        assert_eq!(d.extend([(name("dup"), dup_operation())]).unwrap(), d);
        assert_eq!(
            d.extend([(name("dup"), MethodOperation::Pop)]),
            Err(FunitError::Conflict(name("dup")))
        );
        let pop_only = h.restrict(&[name("pop")].into()).unwrap();
        assert_eq!(pop_only.interface(), [name("pop")].into());
        assert_eq!(h.restrict(&h.interface()).unwrap(), h);
        assert_eq!(hd.restrict(&h.interface()).unwrap(), h);
        assert_eq!(
            h.restrict(&[name("dup")].into()),
            Err(FunitError::NotInInterface(name("dup")))
        );
    }

    #[test]
    fn custom_operations_compare_by_id() {
        let a = CustomOperation::new("flip", |s: &mut SbsState| s.pop().is_some());
        let b = CustomOperation::new("flip", |_: &mut SbsState| true);
        assert_eq!(MethodOperation::Custom(a), MethodOperation::Custom(b));
    }

    #[test]
    fn services_from_units() {
        use crate::services::Reply;
        let hs = Arc::new(stack_unit());
        assert_eq!(hs.as_service(st("")).reply_of(&name("empty")), Reply::T);
        assert_eq!(hs.as_service(st("0")).reply_of(&name("dup")), Reply::D);
        assert_eq!(hs.as_service(st("0")).effect_of(&name("dup")), Service::Empty);
        let hd = Arc::new(dup_unit());
        assert_eq!(
            hd.as_service(st("1")).effect_of(&name("dup")),
            hd.as_service(st("1:1"))
        );
    }

    #[test]
    fn derived_operations() {
        let hd = Arc::new(dup_unit());
        let x: InstructionSequence = "+f.dup;!t".parse().unwrap();
        assert_eq!(
            derived_operation(&x, &hd, &st("0"), 100).unwrap(),
            Derived::Defined {
                reply: true,
                state: st("0:0")
            }
        );
        let x: InstructionSequence = "!f".parse().unwrap();
        assert_eq!(
            derived_operation(&x, &hd, &st("1:"), 100).unwrap(),
            Derived::Defined {
                reply: false,
                state: st("1:")
            }
        );
        let x: InstructionSequence = "#0".parse().unwrap();
        assert_eq!(
            derived_operation(&x, &hd, &st(""), 100).unwrap(),
            Derived::Undefined
        );
        let x: InstructionSequence = "f.dup;\\#1".parse().unwrap();
        assert!(matches!(
            derived_operation(&x, &hd, &st(""), 50).unwrap(),
            Derived::Unknown { steps: 50 }
        ));
        let x: InstructionSequence = "f.pop;!t".parse().unwrap();
        assert!(matches!(
            derived_operation(&x, &hd, &st(""), 10),
            Err(FunitError::NotInLanguage { .. })
        ));
    }

    #[test]
    fn alpha_values() {
        assert_eq!(alpha(&st("")), BigUint::zero());
        assert_eq!(alpha(&st("0")), BigUint::from(1u32));
        assert_eq!(alpha(&st(":")), BigUint::from(3u32));
        assert_eq!(alpha(&st("1:")), BigUint::from(11u32));
        assert_eq!(alpha_inv(&BigUint::from(11u32)).unwrap(), st("1:"));
        assert_eq!(alpha_inv(&BigUint::zero()).unwrap(), st(""));
        assert!(matches!(
            alpha_inv(&BigUint::from(4u32)),
            Err(FunitError::NotAnEncoding(_))
        ));
    }

    #[test]
    fn split_segments() {
        assert_eq!(st("01").split_first_segment(), (st("01"), None));
        assert_eq!(st("01:1:").split_first_segment(), (st("01"), Some(st("1:"))));
        assert_eq!(st(":").split_first_segment(), (st(""), Some(st(""))));
    }
}
