//! Instruction-sequence syntax: the eight primitive instruction forms, the
//! textual grammar, canonical rendering, the termination transformations
//! `swap` / `ftod`, and the ASCII bit encoding of programs.
//!
//! Concrete grammar:
//!
//! ```text
//! program := instr (';' instr)* ;
//! instr   := '!' | '!t' | '!f' | '#' nat | '\#' nat | sign? focus '.' method ;
//! sign    := '+' | '-' ; nat := [0-9]+ ;
//! focus   := [a-z][a-z0-9_]* ; method := [a-z][a-z0-9_:]* ;
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty instruction sequence")]
    Empty,
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
}

impl ParseError {
    fn at(position: usize, message: impl Into<String>) -> Self {
        ParseError::Syntax {
            position,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NameError {
    #[error("invalid focus `{0}`: expected [a-z][a-z0-9_]*")]
    Focus(String),
    #[error("invalid method name `{0}`: expected [a-z][a-z0-9_:]*")]
    Method(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("bit length {0} is not a multiple of 8")]
    Length(usize),
    #[error("byte {0:#04x} is not 7-bit ASCII")]
    NotAscii(u8),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

fn is_focus(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('a'..='z'))
        && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'))
}

fn is_method(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('a'..='z'))
        && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_' | ':'))
}

/// Name of a service in a service family.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Focus(String);

impl Focus {
    pub fn new(name: impl Into<String>) -> Result<Self, NameError> {
        let name = name.into();
        if is_focus(&name) {
            Ok(Focus(name))
        } else {
            Err(NameError::Focus(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for Focus {
    type Err = NameError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Focus::new(s)
    }
}

impl fmt::Display for Focus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Name of a method; may contain `:` after the first character (`push:0`, `topeq::`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MethodName(String);

impl MethodName {
    pub fn new(name: impl Into<String>) -> Result<Self, NameError> {
        let name = name.into();
        if is_method(&name) {
            Ok(MethodName(name))
        } else {
            Err(NameError::Method(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for MethodName {
    type Err = NameError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MethodName::new(s)
    }
}

impl fmt::Display for MethodName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A basic instruction `f.m`: ask the service named `f` to process `m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Basic {
    pub focus: Focus,
    pub method: MethodName,
}

impl Basic {
    pub fn new(focus: Focus, method: MethodName) -> Self {
        Basic { focus, method }
    }
}

impl fmt::Display for Basic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.focus, self.method)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Instruction {
    /// `f.m`
    Plain(Basic),
    /// `+f.m`
    PosTest(Basic),
    /// `-f.m`
    NegTest(Basic),
    /// `#l`
    FwdJump(BigUint),
    /// `\#l`
    BwdJump(BigUint),
    /// `!`
    Halt,
    /// `!t`
    HaltPos,
    /// `!f`
    HaltNeg,
}

impl Instruction {
    pub fn plain(focus: &str, method: &str) -> Result<Self, NameError> {
        Ok(Instruction::Plain(Basic::new(focus.parse()?, method.parse()?)))
    }

    pub fn fwd(l: u64) -> Self {
        Instruction::FwdJump(BigUint::from(l))
    }

    pub fn bwd(l: u64) -> Self {
        Instruction::BwdJump(BigUint::from(l))
    }

    /// The basic instruction carried by a plain or test instruction.
    pub fn basic(&self) -> Option<&Basic> {
        match self {
            Instruction::Plain(b) | Instruction::PosTest(b) | Instruction::NegTest(b) => Some(b),
            _ => None,
        }
    }

    pub fn is_termination(&self) -> bool {
        matches!(
            self,
            Instruction::Halt | Instruction::HaltPos | Instruction::HaltNeg
        )
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Plain(b) => write!(f, "{b}"),
            Instruction::PosTest(b) => write!(f, "+{b}"),
            Instruction::NegTest(b) => write!(f, "-{b}"),
            Instruction::FwdJump(l) => write!(f, "#{l}"),
            Instruction::BwdJump(l) => write!(f, "\\#{l}"),
            Instruction::Halt => f.write_str("!"),
            Instruction::HaltPos => f.write_str("!t"),
            Instruction::HaltNeg => f.write_str("!f"),
        }
    }
}

/// A finite nonempty instruction sequence `u1 ; ... ; uk`, positions indexed from 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InstructionSequence(Vec<Instruction>);

impl InstructionSequence {
    /// Returns `None` for an empty list.
    pub fn new(items: Vec<Instruction>) -> Option<Self> {
        if items.is_empty() {
            None
        } else {
            Some(InstructionSequence(items))
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Instruction at 1-based position `i`.
    pub fn get(&self, i: usize) -> Option<&Instruction> {
        i.checked_sub(1).and_then(|j| self.0.get(j))
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Instruction> {
        self.0.iter()
    }

    /// `u ; self`
    pub fn prepend(&self, u: Instruction) -> Self {
        let mut items = Vec::with_capacity(self.0.len() + 1);
        items.push(u);
        items.extend(self.0.iter().cloned());
        InstructionSequence(items)
    }

    fn map(&self, f: impl Fn(&Instruction) -> Instruction) -> Self {
        InstructionSequence(self.0.iter().map(f).collect())
    }
}

impl fmt::Display for InstructionSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, u) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{u}")?;
        }
        Ok(())
    }
}

impl FromStr for InstructionSequence {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl Serialize for InstructionSequence {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn take_while(&mut self, pred: impl Fn(u8) -> bool) -> &'a str {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if pred(c)) {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn nat(&mut self) -> Result<BigUint, ParseError> {
        let start = self.pos;
        let digits = self.take_while(|c| c.is_ascii_digit());
        if digits.is_empty() {
            return Err(ParseError::at(start, "expected a decimal jump length"));
        }
        Ok(digits.parse().expect("decimal digits"))
    }

    fn basic(&mut self) -> Result<Basic, ParseError> {
        let start = self.pos;
        if !matches!(self.peek(), Some(b'a'..=b'z')) {
            return Err(ParseError::at(start, "expected an instruction"));
        }
        let focus = self.take_while(|c| matches!(c, b'a'..=b'z' | b'0'..=b'9' | b'_'));
        if !self.eat(b'.') {
            return Err(ParseError::at(self.pos, "expected `.` after focus"));
        }
        let mstart = self.pos;
        if !matches!(self.peek(), Some(b'a'..=b'z')) {
            return Err(ParseError::at(mstart, "expected a method name"));
        }
        let method = self.take_while(|c| matches!(c, b'a'..=b'z' | b'0'..=b'9' | b'_' | b':'));
        Ok(Basic {
            focus: Focus(focus.to_owned()),
            method: MethodName(method.to_owned()),
        })
    }

    fn instr(&mut self) -> Result<Instruction, ParseError> {
        let start = self.pos;
        match self.peek() {
            Some(b'!') => {
                self.pos += 1;
                if self.eat(b't') {
                    Ok(Instruction::HaltPos)
                } else if self.eat(b'f') {
                    Ok(Instruction::HaltNeg)
                } else {
                    Ok(Instruction::Halt)
                }
            }
            Some(b'#') => {
                self.pos += 1;
                Ok(Instruction::FwdJump(self.nat()?))
            }
            Some(b'\\') => {
                self.pos += 1;
                if !self.eat(b'#') {
                    return Err(ParseError::at(self.pos, "expected `#` after `\\`"));
                }
                Ok(Instruction::BwdJump(self.nat()?))
            }
            Some(b'+') => {
                self.pos += 1;
                Ok(Instruction::PosTest(self.basic()?))
            }
            Some(b'-') => {
                self.pos += 1;
                Ok(Instruction::NegTest(self.basic()?))
            }
            Some(_) => self.basic().map(Instruction::Plain),
            None => Err(ParseError::at(start, "expected an instruction")),
        }
    }
}

/// Parses program text; whitespace is tolerated around instructions.
pub fn parse(text: &str) -> Result<InstructionSequence, ParseError> {
    let mut p = Parser { src: text, pos: 0 };
    p.skip_ws();
    if p.peek().is_none() {
        return Err(ParseError::Empty);
    }
    let mut items = Vec::new();
    loop {
        p.skip_ws();
        items.push(p.instr()?);
        p.skip_ws();
        match p.peek() {
            None => break,
            Some(b';') => p.pos += 1,
            Some(_) => return Err(ParseError::at(p.pos, "expected `;` or end of input")),
        }
    }
    Ok(InstructionSequence(items))
}

/// Canonical text: instructions joined by `;`, no whitespace.
pub fn render(p: &InstructionSequence) -> String {
    p.to_string()
}

/// Exchanges `!t` and `!f`.
pub fn swap(p: &InstructionSequence) -> InstructionSequence {
    p.map(|u| match u {
        Instruction::HaltPos => Instruction::HaltNeg,
        Instruction::HaltNeg => Instruction::HaltPos,
        other => other.clone(),
    })
}

/// Replaces every `!f` by `#0`, turning a negative result into a self-loop.
pub fn ftod(p: &InstructionSequence) -> InstructionSequence {
    p.map(|u| match u {
        Instruction::HaltNeg => Instruction::fwd(0),
        other => other.clone(),
    })
}

/// No plain termination instruction `!` occurs.
pub fn is_strict(p: &InstructionSequence) -> bool {
    !p.iter().any(|u| matches!(u, Instruction::Halt))
}

/// Membership in the strict language whose basic instructions are `focus.m`, `m` in `methods`.
pub fn in_language(p: &InstructionSequence, focus: &Focus, methods: &BTreeSet<MethodName>) -> bool {
    is_strict(p)
        && p.iter()
            .filter_map(Instruction::basic)
            .all(|b| &b.focus == focus && methods.contains(&b.method))
}

/// A sequence of bits, rendered as a `0`/`1` string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Bits(pub Vec<bool>);

impl Bits {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// ASCII encoding of the canonical rendering, 8 bits per character, MSB first.
pub fn encode_bits(p: &InstructionSequence) -> Bits {
    let text = render(p);
    debug_assert!(text.is_ascii());
    Bits(
        text.bytes()
            .flat_map(|byte| (0..8).rev().map(move |i| byte >> i & 1 == 1))
            .collect(),
    )
}

/// Inverse of [`encode_bits`] on its image.
pub fn decode_bits(bits: &[bool]) -> Result<InstructionSequence, DecodeError> {
    if !bits.len().is_multiple_of(8) {
        return Err(DecodeError::Length(bits.len()));
    }
    let mut text = String::with_capacity(bits.len() / 8);
    for chunk in bits.chunks(8) {
        let byte = chunk.iter().fold(0u8, |acc, &b| acc << 1 | b as u8);
        if !byte.is_ascii() {
            return Err(DecodeError::NotAscii(byte));
        }
        text.push(byte as char);
    }
    Ok(parse(&text)?)
}
