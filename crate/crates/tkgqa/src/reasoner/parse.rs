//! Parsing of backend responses into structured types: the four-block
//! decomposition format, constraint expressions, and fenced JSON.
//!
//! Decomposition responses follow this shape (list items split on `;` when
//! present, otherwise on top-level commas):
//!
//! ```text
//! Subquestions: [q1; q2]
//! Indicators:   [Olympics 2008 --[opening]--> ?x (t1); ?y --[sign environmental treaty]--> China (t2)]
//! Constraints:  [same_year(t1, 2008); after_first(t2, t1)]
//! Time_vars:    [t1; t2]
//! ```

use std::collections::BTreeSet;

use regex::Regex;
use serde_json::Value;

use super::tree::{NodeStatus, QuestionTree, TreeNode};
use super::ReasonerError;
use crate::indicator::{
    ConstraintOp, Indicator, TemporalType, Term, TimeConstraint, TimeRef,
};
use crate::store::parse_timestamp;

/// Extract the content of the four labelled blocks.
pub fn split_blocks(text: &str) -> Result<[String; 4], ReasonerError> {
    const LABELS: [&str; 4] = ["subquestions", "indicators", "constraints", "time_vars"];
    let mut found: [Option<String>; 4] = Default::default();
    let mut current: Option<usize> = None;
    for line in text.lines() {
        let trimmed = line.trim();
        let lowered = trimmed.to_lowercase();
        let mut header = None;
        for (i, label) in LABELS.iter().enumerate() {
            if let Some(rest) = lowered.strip_prefix(label) {
                if rest.trim_start().starts_with(':') {
                    let content = trimmed[label.len()..].trim_start();
                    let content = content.strip_prefix(':').unwrap_or(content).trim();
                    header = Some((i, content.to_string()));
                    break;
                }
            }
        }
        match header {
            Some((i, content)) => {
                found[i] = Some(content);
                current = Some(i);
            }
            None => {
                if let Some(i) = current {
                    if !trimmed.is_empty() {
                        let block = found[i].as_mut().expect("current block exists");
                        block.push(' ');
                        block.push_str(trimmed);
                    }
                }
            }
        }
    }
    let mut out: [String; 4] = Default::default();
    for (i, label) in LABELS.iter().enumerate() {
        out[i] = found[i]
            .take()
            .ok_or_else(|| ReasonerError::SchemaError(format!("missing block {label:?}")))?;
    }
    Ok(out)
}

/// Split a `[a; b; c]` (or top-level-comma) list, bracket-depth aware.
pub fn split_list(text: &str) -> Vec<String> {
    let inner = text.trim();
    let inner = inner.strip_prefix('[').unwrap_or(inner);
    let inner = inner.strip_suffix(']').unwrap_or(inner);
    let sep = if inner.contains(';') { ';' } else { ',' };
    let mut items = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in inner.chars() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            _ => {}
        }
        if c == sep && depth == 0 {
            items.push(cur.trim().to_string());
            cur.clear();
        } else {
            cur.push(c);
        }
    }
    if !cur.trim().is_empty() {
        items.push(cur.trim().to_string());
    }
    items.retain(|s| !s.is_empty());
    items
}

/// Parse one `SUBJ --[REL]--> OBJ (tvar)` edge.
pub fn parse_edge(text: &str) -> Result<(Term, String, Term, Option<String>), ReasonerError> {
    let re = Regex::new(r"^(.(?s:.*?))?\s*--\[(.*?)\]-->\s*(.*?)\s*(?:\((\??\w+)\))?$")
        .expect("static regex compiles");
    let caps = re
        .captures(text.trim())
        .ok_or_else(|| ReasonerError::SchemaError(format!("unparseable indicator edge {text:?}")))?;
    let subject = term(caps.get(1).map(|m| m.as_str()).unwrap_or("").trim());
    let relation = caps[2].trim().to_string();
    let object = term(caps[3].trim());
    let tvar = caps.get(4).map(|m| m.as_str().to_string());
    if relation.is_empty() {
        return Err(ReasonerError::SchemaError(format!("empty relation in edge {text:?}")));
    }
    Ok((subject, relation, object, tvar))
}

fn term(text: &str) -> Term {
    if text.starts_with('?') {
        Term::Variable(text.to_string())
    } else {
        Term::Entity(text.to_string())
    }
}

/// A parsed constraint expression tagged with the variable it attaches to.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConstraint {
    pub var: String,
    pub constraints: Vec<TimeConstraint>,
    pub is_count: bool,
}

fn time_ref(text: &str) -> TimeRef {
    let t = text.trim();
    match parse_timestamp(t) {
        Ok(ts) => TimeRef::Concrete(ts),
        Err(_) => TimeRef::Var(t.to_string()),
    }
}

/// Parse one constraint expression. Accepted forms:
/// `t2 > t1`, `t1 < 2010`, `op(var, anchor)` for before/after/equal/
/// same_year/same_month, `between(var, [lo, hi])`, `first(var)`,
/// `last(var)`, the composites `after_first(var, anchor)` /
/// `before_last(var, anchor)`, and `count(<inner>)`.
pub fn parse_constraint(text: &str) -> Result<ParsedConstraint, ReasonerError> {
    let t = text.trim();
    let bad = || ReasonerError::SchemaError(format!("unparseable constraint {text:?}"));

    let re = Regex::new(r"^(\w+)\s*\((.*)\)$").expect("static regex compiles");
    // Function form first: comparison operators may appear inside count(..).
    if !re.is_match(t) {
        if let Some((lhs, rhs)) = t.split_once('>') {
            let (lhs, rhs) = (lhs.trim_end_matches('='), rhs);
            return Ok(ParsedConstraint {
                var: lhs.trim().to_string(),
                constraints: vec![TimeConstraint::new(ConstraintOp::After, time_ref(rhs))],
                is_count: false,
            });
        }
        if let Some((lhs, rhs)) = t.split_once('<') {
            let (lhs, rhs) = (lhs.trim_end_matches('='), rhs);
            return Ok(ParsedConstraint {
                var: lhs.trim().to_string(),
                constraints: vec![TimeConstraint::new(ConstraintOp::Before, time_ref(rhs))],
                is_count: false,
            });
        }
    }
    let caps = re.captures(t).ok_or_else(bad)?;
    let op = caps[1].to_lowercase();
    let args = split_args(&caps[2]);
    let one = |c: TimeConstraint, var: &str| ParsedConstraint {
        var: var.to_string(),
        constraints: vec![c],
        is_count: false,
    };
    match (op.as_str(), args.as_slice()) {
        ("count", [inner]) => {
            let mut parsed = parse_constraint(inner)?;
            parsed.is_count = true;
            Ok(parsed)
        }
        ("first", [v]) => Ok(one(
            TimeConstraint::new(ConstraintOp::First, TimeRef::Var(v.clone())),
            v,
        )),
        ("last", [v]) => Ok(one(
            TimeConstraint::new(ConstraintOp::Last, TimeRef::Var(v.clone())),
            v,
        )),
        ("before", [v, a]) => Ok(one(TimeConstraint::new(ConstraintOp::Before, time_ref(a)), v)),
        ("after", [v, a]) => Ok(one(TimeConstraint::new(ConstraintOp::After, time_ref(a)), v)),
        ("equal", [v, a]) => Ok(one(TimeConstraint::new(ConstraintOp::Equal, time_ref(a)), v)),
        ("same_year" | "specific_year", [v, a]) => {
            Ok(one(TimeConstraint::new(ConstraintOp::SameYear, time_ref(a)), v))
        }
        ("same_month", [v, a]) => {
            Ok(one(TimeConstraint::new(ConstraintOp::SameMonth, time_ref(a)), v))
        }
        ("between", [v, bounds]) => {
            let parts = split_list(bounds);
            if parts.len() != 2 {
                return Err(bad());
            }
            Ok(one(TimeConstraint::between(time_ref(&parts[0]), time_ref(&parts[1])), v))
        }
        ("after_first", [v, a]) => Ok(ParsedConstraint {
            var: v.clone(),
            constraints: vec![
                TimeConstraint::new(ConstraintOp::After, time_ref(a)),
                TimeConstraint::new(ConstraintOp::First, TimeRef::Var(v.clone())),
            ],
            is_count: false,
        }),
        ("before_last", [v, a]) => Ok(ParsedConstraint {
            var: v.clone(),
            constraints: vec![
                TimeConstraint::new(ConstraintOp::Before, time_ref(a)),
                TimeConstraint::new(ConstraintOp::Last, TimeRef::Var(v.clone())),
            ],
            is_count: false,
        }),
        _ => Err(bad()),
    }
}

fn split_args(text: &str) -> Vec<String> {
    let mut depth = 0i32;
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            _ => {}
        }
        if c == ',' && depth == 0 {
            out.push(cur.trim().to_string());
            cur.clear();
        } else {
            cur.push(c);
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

/// Assemble a [`QuestionTree`] from a four-block decomposition response.
///
/// Node count comes from the Subquestions/Indicators zip (counts must
/// match); constraints attach to the node owning their leading variable;
/// an undeclared variable in any constraint is a `ConstraintError`. Each
/// node's temporal type derives from its constraints, defaulting to the
/// root type.
pub fn parse_decomposition(
    text: &str,
    root_type: TemporalType,
) -> Result<QuestionTree, ReasonerError> {
    let [subs_raw, inds_raw, cons_raw, vars_raw] = split_blocks(text)?;
    let subquestions = split_list(&subs_raw);
    let edges = split_list(&inds_raw);
    if subquestions.is_empty() {
        return Err(ReasonerError::SchemaError("no subquestions".to_string()));
    }
    if subquestions.len() != edges.len() {
        return Err(ReasonerError::SchemaError(format!(
            "{} subquestions but {} indicators",
            subquestions.len(),
            edges.len()
        )));
    }

    // Declared vars: bare names, plus leading vars of constraint-shaped
    // entries that some emitters place in the Time_vars block.
    let mut declared: BTreeSet<String> = BTreeSet::new();
    let mut extra_constraints: Vec<ParsedConstraint> = Vec::new();
    for item in split_list(&vars_raw) {
        if item.chars().all(|c| c.is_alphanumeric() || c == '_') {
            declared.insert(item);
        } else if let Ok(pc) = parse_constraint(&item) {
            declared.insert(pc.var.clone());
            extra_constraints.push(pc);
        } else {
            return Err(ReasonerError::SchemaError(format!("unparseable time var {item:?}")));
        }
    }

    let mut parsed: Vec<ParsedConstraint> = Vec::new();
    for item in split_list(&cons_raw) {
        parsed.push(parse_constraint(&item)?);
    }
    parsed.extend(extra_constraints);

    let mut nodes = Vec::new();
    for (text, edge) in subquestions.iter().zip(&edges) {
        let (subject, relation, object, tvar) = parse_edge(edge)?;
        if let Some(v) = &tvar {
            declared.insert(v.clone());
        }
        let indicator = Indicator::new(subject, relation, object, root_type);
        nodes.push(TreeNode {
            id: 0,
            text: text.clone(),
            indicator,
            parent: None,
            children: vec![],
            depth: 0,
            d_pred: 1,
            status: NodeStatus::Pending,
            time_var: tvar,
        });
    }

    for pc in parsed {
        if !declared.contains(&pc.var) {
            return Err(ReasonerError::ConstraintError(format!(
                "constraint references undeclared time var {:?}",
                pc.var
            )));
        }
        for c in &pc.constraints {
            if let TimeRef::Var(v) = &c.anchor {
                if v != &pc.var && !declared.contains(v) {
                    return Err(ReasonerError::ConstraintError(format!(
                        "constraint anchor references undeclared time var {v:?}"
                    )));
                }
            }
        }
        let target = nodes
            .iter()
            .position(|n| n.time_var.as_deref() == Some(pc.var.as_str()))
            .unwrap_or(nodes.len() - 1);
        let node = &mut nodes[target];
        node.indicator.constraints.extend(pc.constraints);
        if pc.is_count {
            node.indicator.temporal_type = TemporalType::Count;
        }
    }

    for node in &mut nodes {
        node.indicator.time_vars = declared.iter().cloned().collect();
        if node.indicator.temporal_type != TemporalType::Count {
            node.indicator.temporal_type =
                derive_type(&node.indicator.constraints).unwrap_or(root_type);
        }
    }

    let tree = QuestionTree::chain(nodes);
    tree.validate().map_err(ReasonerError::SchemaError)?;
    Ok(tree)
}

/// Temporal type implied by a constraint set, if any.
pub fn derive_type(constraints: &[TimeConstraint]) -> Option<TemporalType> {
    let has = |op: ConstraintOp| constraints.iter().any(|c| c.op == op);
    if has(ConstraintOp::Between) {
        Some(TemporalType::Between)
    } else if has(ConstraintOp::After) && has(ConstraintOp::First) {
        Some(TemporalType::AfterNFirst)
    } else if has(ConstraintOp::Before) && has(ConstraintOp::Last) {
        Some(TemporalType::BeforeNLast)
    } else if has(ConstraintOp::SameYear) || has(ConstraintOp::SameMonth) || has(ConstraintOp::Equal)
    {
        Some(TemporalType::Equal)
    } else if has(ConstraintOp::Before) {
        Some(TemporalType::Before)
    } else if has(ConstraintOp::After) {
        Some(TemporalType::After)
    } else if has(ConstraintOp::First) {
        Some(TemporalType::First)
    } else if has(ConstraintOp::Last) {
        Some(TemporalType::Last)
    } else {
        None
    }
}

/// Pull a JSON object out of a backend response: either the whole response
/// or the first ```json fenced block.
pub fn extract_json(text: &str) -> Result<Value, ReasonerError> {
    let trimmed = text.trim();
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        return Ok(v);
    }
    if let Some(start) = trimmed.find("```") {
        let rest = &trimmed[start + 3..];
        let rest = rest.strip_prefix("json").unwrap_or(rest);
        if let Some(end) = rest.find("```") {
            return serde_json::from_str(rest[..end].trim())
                .map_err(|e| ReasonerError::SchemaError(format!("invalid fenced JSON: {e}")));
        }
    }
    if let (Some(start), Some(end)) = (trimmed.find('{'), trimmed.rfind('}')) {
        if start < end {
            return serde_json::from_str(&trimmed[start..=end])
                .map_err(|e| ReasonerError::SchemaError(format!("invalid embedded JSON: {e}")));
        }
    }
    Err(ReasonerError::SchemaError("response contains no JSON object".to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const AFTER_FIRST_DECOMP: &str = "Subquestions: [When was the 2008 Olympics held?; After {t1}, which country was the first to sign an environmental treaty with China?]\nIndicators: [Olympics 2008 --[opening]--> ?x (t1); ?y --[sign environmental treaty]--> China (t2)]\nConstraints: [same_year(t1, 2008); after_first(t2, t1)]\nTime_vars: [t1; t2]";

    #[test]
    fn blocks_are_required() {
        let missing = "Subquestions: [q]\nIndicators: [A --[r]--> ?x (t1)]\nConstraints: []";
        assert!(matches!(
            split_blocks(missing),
            Err(ReasonerError::SchemaError(msg)) if msg.contains("time_vars")
        ));
    }

    #[test]
    fn list_splitting_is_depth_aware() {
        assert_eq!(
            split_list("[t2 > t1, after_first(t2, t1)]"),
            vec!["t2 > t1".to_string(), "after_first(t2, t1)".to_string()]
        );
        assert_eq!(
            split_list("[a; b(x; y)]"),
            vec!["a".to_string(), "b(x; y)".to_string()]
        );
    }

    #[test]
    fn edges_parse() {
        let (s, r, o, v) = parse_edge("Olympics 2008 --[opening]--> ?x (t1)").unwrap();
        assert_eq!(s, Term::Entity("Olympics 2008".into()));
        assert_eq!(r, "opening");
        assert_eq!(o, Term::Variable("?x".into()));
        assert_eq!(v.as_deref(), Some("t1"));
        assert!(parse_edge("no arrow here").is_err());
    }

    #[test]
    fn constraint_forms() {
        let c = parse_constraint("t2 > t1").unwrap();
        assert_eq!(c.var, "t2");
        assert_eq!(c.constraints[0].op, ConstraintOp::After);

        let c = parse_constraint("t1 < 2010").unwrap();
        assert_eq!(c.constraints[0].op, ConstraintOp::Before);
        assert!(matches!(c.constraints[0].anchor, TimeRef::Concrete(_)));

        let c = parse_constraint("after_first(t2, 2008-08-08)").unwrap();
        assert_eq!(c.constraints.len(), 2);

        let c = parse_constraint("between(t3, [t1, t2])").unwrap();
        assert_eq!(c.constraints[0].op, ConstraintOp::Between);

        let c = parse_constraint("count(t1 < 2020)").unwrap();
        assert!(c.is_count);

        assert!(parse_constraint("mystery!!").is_err());
    }

    #[test]
    fn decomposition_builds_a_two_node_chain() {
        let tree = parse_decomposition(AFTER_FIRST_DECOMP, TemporalType::AfterNFirst).unwrap();
        assert_eq!(tree.len(), 2);
        let q1 = tree.node(0);
        let q2 = tree.node(1);
        assert_eq!(q1.indicator.temporal_type, TemporalType::Equal);
        assert_eq!(q2.indicator.temporal_type, TemporalType::AfterNFirst);
        assert_eq!(q2.indicator.relation_text, "sign environmental treaty");
        assert_eq!(q1.time_var.as_deref(), Some("t1"));
        assert!(q2.text.contains("{t1}"));
    }

    #[test]
    fn undeclared_var_is_a_constraint_error() {
        let bad = "Subquestions: [q]\nIndicators: [A --[r]--> ?x (t1)]\nConstraints: [after(t9, 2008)]\nTime_vars: [t1]";
        assert!(matches!(
            parse_decomposition(bad, TemporalType::Equal),
            Err(ReasonerError::ConstraintError(_))
        ));
    }

    #[test]
    fn json_extraction() {
        assert!(extract_json("{\"a\": 1}").is_ok());
        assert!(extract_json("prose\n```json\n{\"a\": 1}\n```\nmore").is_ok());
        assert!(extract_json("Answer: {\"a\": 1} done").is_ok());
        assert!(extract_json("no json at all").is_err());
    }
}
