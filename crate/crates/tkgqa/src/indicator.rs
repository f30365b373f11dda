//! Structured sub-question indicators: ⟨subject, relation, object, type;
//! time constraints⟩ plus the temporal-type vocabulary shared across the
//! retrieval, reasoner, and controller layers.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::store::{strictly_before, TimeWindow, Timestamp};

/// The eleven temporal operator types a question can be classified into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TemporalType {
    #[serde(rename = "equal")]
    Equal,
    #[serde(rename = "before")]
    Before,
    #[serde(rename = "after")]
    After,
    #[serde(rename = "during")]
    During,
    #[serde(rename = "between")]
    Between,
    #[serde(rename = "first")]
    First,
    #[serde(rename = "last")]
    Last,
    #[serde(rename = "beforeNlast")]
    BeforeNLast,
    #[serde(rename = "afterNfirst")]
    AfterNFirst,
    #[serde(rename = "count")]
    Count,
    #[serde(rename = "comparison")]
    Comparison,
}

impl TemporalType {
    pub const ALL: [TemporalType; 11] = [
        TemporalType::Equal,
        TemporalType::Before,
        TemporalType::After,
        TemporalType::During,
        TemporalType::Between,
        TemporalType::First,
        TemporalType::Last,
        TemporalType::BeforeNLast,
        TemporalType::AfterNFirst,
        TemporalType::Count,
        TemporalType::Comparison,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            TemporalType::Equal => "equal",
            TemporalType::Before => "before",
            TemporalType::After => "after",
            TemporalType::During => "during",
            TemporalType::Between => "between",
            TemporalType::First => "first",
            TemporalType::Last => "last",
            TemporalType::BeforeNLast => "beforeNlast",
            TemporalType::AfterNFirst => "afterNfirst",
            TemporalType::Count => "count",
            TemporalType::Comparison => "comparison",
        }
    }

    pub fn parse(label: &str) -> Option<TemporalType> {
        Self::ALL.iter().find(|t| t.label().eq_ignore_ascii_case(label.trim())).copied()
    }
}

impl fmt::Display for TemporalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Subject or object slot of an indicator edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    /// A concrete entity name (resolved against the graph at use time).
    Entity(String),
    /// An unknown, e.g. `?x`.
    Variable(String),
}

impl Term {
    pub fn text(&self) -> &str {
        match self {
            Term::Entity(s) | Term::Variable(s) => s,
        }
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_))
    }
}

/// A time anchor: either a concrete timestamp or a still-unbound variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimeRef {
    Concrete(Timestamp),
    Var(String),
}

impl TimeRef {
    pub fn concrete(&self) -> Option<Timestamp> {
        match self {
            TimeRef::Concrete(t) => Some(*t),
            TimeRef::Var(_) => None,
        }
    }
}

impl fmt::Display for TimeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeRef::Concrete(t) => write!(f, "{t}"),
            TimeRef::Var(v) => f.write_str(v),
        }
    }
}

/// Constraint operators attachable to an indicator's time variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintOp {
    Before,
    After,
    Between,
    Equal,
    SameYear,
    SameMonth,
    First,
    Last,
}

impl ConstraintOp {
    pub fn label(&self) -> &'static str {
        match self {
            ConstraintOp::Before => "before",
            ConstraintOp::After => "after",
            ConstraintOp::Between => "between",
            ConstraintOp::Equal => "equal",
            ConstraintOp::SameYear => "same_year",
            ConstraintOp::SameMonth => "same_month",
            ConstraintOp::First => "first",
            ConstraintOp::Last => "last",
        }
    }
}

/// One time constraint: `op(anchor)` or `between(anchor, bound2)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeConstraint {
    pub op: ConstraintOp,
    pub anchor: TimeRef,
    pub bound2: Option<TimeRef>,
}

impl TimeConstraint {
    pub fn new(op: ConstraintOp, anchor: TimeRef) -> Self {
        TimeConstraint { op, anchor, bound2: None }
    }

    pub fn between(a: TimeRef, b: TimeRef) -> Self {
        TimeConstraint { op: ConstraintOp::Between, anchor: a, bound2: Some(b) }
    }

    /// Evaluate against a concrete timestamp. Constraints with unbound
    /// anchors and the ordering selectors `first`/`last` (which pick among
    /// candidates instead of testing a single one) evaluate to true.
    pub fn holds(&self, t: &Timestamp) -> bool {
        let Some(anchor) = self.anchor.concrete() else {
            return true;
        };
        match self.op {
            ConstraintOp::Before => strictly_before(t, &anchor),
            ConstraintOp::After => strictly_before(&anchor, t),
            ConstraintOp::Between => {
                let Some(hi) = self.bound2.as_ref().and_then(|b| b.concrete()) else {
                    return true;
                };
                strictly_before(&anchor, t) && strictly_before(t, &hi)
            }
            ConstraintOp::Equal => t.within(&anchor),
            ConstraintOp::SameYear => t.same_year(&anchor),
            ConstraintOp::SameMonth => t.same_month(&anchor),
            ConstraintOp::First | ConstraintOp::Last => true,
        }
    }

    /// Replace variable anchors that have a binding.
    pub fn substitute(&self, lookup: &dyn Fn(&str) -> Option<Timestamp>) -> TimeConstraint {
        let sub = |r: &TimeRef| match r {
            TimeRef::Var(v) => lookup(v).map(TimeRef::Concrete).unwrap_or_else(|| r.clone()),
            c => c.clone(),
        };
        TimeConstraint {
            op: self.op,
            anchor: sub(&self.anchor),
            bound2: self.bound2.as_ref().map(|b| sub(b)),
        }
    }
}

impl fmt::Display for TimeConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.op, &self.bound2) {
            (ConstraintOp::Between, Some(b)) => {
                write!(f, "between {} and {}", self.anchor, b)
            }
            (op, _) => write!(f, "{} {}", op.label(), self.anchor),
        }
    }
}

/// Structured sub-question template ⟨x?, R, y?, τ; C_time⟩.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Indicator {
    pub subject: Term,
    pub relation_text: String,
    pub object: Term,
    pub temporal_type: TemporalType,
    pub constraints: Vec<TimeConstraint>,
    pub time_vars: Vec<String>,
}

impl Indicator {
    pub fn new(
        subject: Term,
        relation_text: impl Into<String>,
        object: Term,
        temporal_type: TemporalType,
    ) -> Self {
        Indicator {
            subject,
            relation_text: relation_text.into(),
            object,
            temporal_type,
            constraints: Vec::new(),
            time_vars: Vec::new(),
        }
    }

    /// The concrete entity side, subject first.
    pub fn concrete_entity(&self) -> Option<&str> {
        match (&self.subject, &self.object) {
            (Term::Entity(s), _) => Some(s),
            (_, Term::Entity(o)) => Some(o),
            _ => None,
        }
    }

    /// The variable side of the edge, preferring the subject.
    pub fn variable_side_is_subject(&self) -> bool {
        self.subject.is_variable() || !self.object.is_variable()
    }

    /// First concrete constraint anchor, the reference time for proximity
    /// scoring. `between` contributes its lower bound.
    pub fn reference_anchor(&self) -> Option<Timestamp> {
        self.constraints.iter().find_map(|c| c.anchor.concrete())
    }

    /// Fold concrete before/after/between constraints into an open window
    /// usable as an expansion pre-filter.
    pub fn window(&self) -> TimeWindow {
        let mut w = TimeWindow::default();
        for c in &self.constraints {
            match c.op {
                ConstraintOp::After => {
                    if let Some(a) = c.anchor.concrete() {
                        w.after = Some(a);
                    }
                }
                ConstraintOp::Before => {
                    if let Some(b) = c.anchor.concrete() {
                        w.before = Some(b);
                    }
                }
                ConstraintOp::Between => {
                    if let (Some(a), Some(b)) =
                        (c.anchor.concrete(), c.bound2.as_ref().and_then(|b| b.concrete()))
                    {
                        w.after = Some(a);
                        w.before = Some(b);
                    }
                }
                _ => {}
            }
        }
        w
    }

    /// Substitute bound time variables into all constraints.
    pub fn substitute(&self, lookup: &dyn Fn(&str) -> Option<Timestamp>) -> Indicator {
        let mut out = self.clone();
        out.constraints = self.constraints.iter().map(|c| c.substitute(lookup)).collect();
        out
    }
}
