//! Services and service families.
//!
//! Families are kept in normal form: a finite map from foci to services.
//! Composition is the union of bindings, and a focus bound on both sides
//! collapses to the empty service. Encapsulation removes bindings.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::funit::{FunctionalUnit, SbsState};
use crate::isa::{Focus, MethodName};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Reply {
    T,
    F,
    /// Divergent.
    D,
    /// Meaningless: correct termination without a Boolean.
    M,
}

impl Reply {
    pub fn from_bool(b: bool) -> Reply {
        if b {
            Reply::T
        } else {
            Reply::F
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Reply::T => Some(true),
            Reply::F => Some(false),
            _ => None,
        }
    }
}

impl fmt::Display for Reply {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reply::T => "T",
            Reply::F => "F",
            Reply::D => "D",
            Reply::M => "M",
        })
    }
}

/// A functional unit in a particular state, `H(s)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UnitService {
    unit: Arc<FunctionalUnit>,
    state: SbsState,
}

impl UnitService {
    pub fn unit(&self) -> &Arc<FunctionalUnit> {
        &self.unit
    }

    pub fn state(&self) -> &SbsState {
        &self.state
    }
}

/// A state-dependent method processor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Service {
    /// Replies D to every method and stays empty.
    Empty,
    Unit(UnitService),
}

impl Service {
    pub fn unit(unit: Arc<FunctionalUnit>, state: SbsState) -> Self {
        Service::Unit(UnitService { unit, state })
    }

    /// True iff the reply to `m` is not D.
    pub fn accepts(&self, m: &MethodName) -> bool {
        match self {
            Service::Empty => false,
            Service::Unit(u) => u.unit.contains(m),
        }
    }

    pub fn reply_of(&self, m: &MethodName) -> Reply {
        match self {
            Service::Unit(u) => match u.unit.operation(m) {
                Some(op) => Reply::from_bool(op.reply(&u.state)),
                None => Reply::D,
            },
            Service::Empty => Reply::D,
        }
    }

    pub fn effect_of(&self, m: &MethodName) -> Service {
        let mut next = self.clone();
        next.process(m);
        next
    }

    /// Processes `m` in place, returning the reply; a D reply empties the service.
    pub fn process(&mut self, m: &MethodName) -> Reply {
        let reply = match self {
            Service::Unit(u) => match u.unit.operation(m) {
                Some(op) => Some(op.apply_mut(&mut u.state)),
                None => None,
            },
            Service::Empty => None,
        };
        match reply {
            Some(b) => Reply::from_bool(b),
            None => {
                *self = Service::Empty;
                Reply::D
            }
        }
    }
}

impl fmt::Display for Service {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Service::Empty => f.write_str("empty"),
            Service::Unit(u) if u.unit.name() == "stack" => write!(f, "stack({})", u.state),
            Service::Unit(u) => write!(f, "unit({},{})", u.unit.name(), u.state),
        }
    }
}

/// Observational equality: same replies along every method string of length
/// at most `depth` over `methods`.
pub fn observationally_equal(
    a: &Service,
    b: &Service,
    methods: &BTreeSet<MethodName>,
    depth: usize,
) -> bool {
    if depth == 0 {
        return true;
    }
    methods.iter().all(|m| {
        a.reply_of(m) == b.reply_of(m)
            && observationally_equal(&a.effect_of(m), &b.effect_of(m), methods, depth - 1)
    })
}

pub const DEFAULT_PROBE_DEPTH: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ServiceError {
    #[error("composed families share foci {}", display_foci(.0))]
    FociOverlap(BTreeSet<Focus>),
}

fn display_foci(foci: &BTreeSet<Focus>) -> String {
    let names: Vec<_> = foci.iter().map(Focus::as_str).collect();
    format!("{{{}}}", names.join(", "))
}

/// A finite map from foci to services.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ServiceFamily {
    bindings: BTreeMap<Focus, Service>,
}

impl ServiceFamily {
    pub fn empty() -> Self {
        ServiceFamily::default()
    }

    pub fn singleton(f: Focus, service: Service) -> Self {
        ServiceFamily {
            bindings: [(f, service)].into_iter().collect(),
        }
    }

    /// `C ⊕ D`; a focus bound in both collapses to the empty service.
    pub fn compose(&self, other: &ServiceFamily) -> ServiceFamily {
        let mut bindings = self.bindings.clone();
        for (f, s) in &other.bindings {
            bindings
                .entry(f.clone())
                .and_modify(|existing| *existing = Service::Empty)
                .or_insert_with(|| s.clone());
        }
        ServiceFamily { bindings }
    }

    /// Composition under the relevant-use convention: foci must be disjoint.
    pub fn compose_strict(&self, other: &ServiceFamily) -> Result<ServiceFamily, ServiceError> {
        let overlap: BTreeSet<Focus> = self
            .bindings
            .keys()
            .filter(|f| other.bindings.contains_key(*f))
            .cloned()
            .collect();
        if overlap.is_empty() {
            Ok(self.compose(other))
        } else {
            Err(ServiceError::FociOverlap(overlap))
        }
    }

    /// `∂_F(C)`.
    pub fn encapsulate(&self, foci: &BTreeSet<Focus>) -> ServiceFamily {
        ServiceFamily {
            bindings: self
                .bindings
                .iter()
                .filter(|(f, _)| !foci.contains(*f))
                .map(|(f, s)| (f.clone(), s.clone()))
                .collect(),
        }
    }

    pub fn foci(&self) -> BTreeSet<Focus> {
        self.bindings.keys().cloned().collect()
    }

    pub fn lookup(&self, f: &Focus) -> Option<&Service> {
        self.bindings.get(f)
    }

    pub(crate) fn lookup_mut(&mut self, f: &Focus) -> Option<&mut Service> {
        self.bindings.get_mut(f)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Focus, &Service)> {
        self.bindings.iter()
    }
}

impl FromIterator<(Focus, Service)> for ServiceFamily {
    /// Folds the bindings with [`ServiceFamily::compose`], so repeated foci collide.
    fn from_iter<I: IntoIterator<Item = (Focus, Service)>>(iter: I) -> Self {
        iter.into_iter().fold(ServiceFamily::empty(), |acc, (f, s)| {
            acc.compose(&ServiceFamily::singleton(f, s))
        })
    }
}

impl fmt::Display for ServiceFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (focus, s)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{focus}={s}")?;
        }
        Ok(())
    }
}

impl Serialize for ServiceFamily {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}
