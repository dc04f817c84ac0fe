//! Service-family literals: comma-separated bindings such as
//! `f=stack(01:1)`, `g=unit(stack+dup,0)`, `h=empty`, or the empty string
//! for the empty family.

use std::sync::Arc;

use thiserror::Error;

use crate::funit::{named_unit, stack_unit, FunitError, SbsState};
use crate::isa::{Focus, NameError};
use crate::services::{Service, ServiceError, ServiceFamily};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LiteralError {
    #[error("malformed binding `{0}`: expected focus=service")]
    Binding(String),
    #[error(transparent)]
    Name(#[from] NameError),
    #[error(transparent)]
    State(#[from] FunitError),
    #[error("unknown unit `{0}` (known: stack, stack+dup, dup, none)")]
    UnknownUnit(String),
    #[error("malformed service `{0}`: expected stack(<sbs>), unit(<name>,<sbs>) or empty")]
    Service(String),
    #[error(transparent)]
    Overlap(#[from] ServiceError),
}

/// Splits on commas outside parentheses.
fn split_top_level(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts
}

pub fn parse_service(text: &str) -> Result<Service, LiteralError> {
    let text = text.trim();
    if text == "empty" {
        return Ok(Service::Empty);
    }
    let inner = |prefix: &str| {
        text.strip_prefix(prefix)
            .and_then(|rest| rest.strip_suffix(')'))
    };
    if let Some(state) = inner("stack(") {
        let state: SbsState = state.trim().parse()?;
        return Ok(Service::unit(Arc::new(stack_unit()), state));
    }
    if let Some(args) = inner("unit(") {
        let (name, state) = args
            .split_once(',')
            .ok_or_else(|| LiteralError::Service(text.to_owned()))?;
        let unit = named_unit(name.trim())
            .ok_or_else(|| LiteralError::UnknownUnit(name.trim().to_owned()))?;
        let state: SbsState = state.trim().parse()?;
        return Ok(Service::unit(Arc::new(unit), state));
    }
    Err(LiteralError::Service(text.to_owned()))
}

fn parse_bindings(text: &str) -> Result<Vec<ServiceFamily>, LiteralError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    split_top_level(text)
        .into_iter()
        .map(|binding| {
            let (focus, service) = binding
                .split_once('=')
                .ok_or_else(|| LiteralError::Binding(binding.trim().to_owned()))?;
            let focus: Focus = focus.trim().parse()?;
            Ok(ServiceFamily::singleton(focus, parse_service(service)?))
        })
        .collect()
}

/// Parses a family literal; repeated foci collide into the empty service.
pub fn parse_family(text: &str) -> Result<ServiceFamily, LiteralError> {
    Ok(parse_bindings(text)?
        .iter()
        .fold(ServiceFamily::empty(), |acc, c| acc.compose(c)))
}

/// Parses a family literal under the relevant-use convention: repeated foci are an error.
pub fn parse_family_strict(text: &str) -> Result<ServiceFamily, LiteralError> {
    parse_bindings(text)?
        .iter()
        .try_fold(ServiceFamily::empty(), |acc, c| Ok(acc.compose_strict(c)?))
}
