//! The pluggable language-model boundary.
//!
//! Each prompt role is one typed request/response operation. Two backends
//! implement the raw text boundary: a deterministic [`ScriptedBackend`]
//! driven by a versioned rules file with heuristic fallbacks, and an
//! [`HttpBackend`] speaking the chat-completion wire shape. Every response,
//! scripted or live, flows through the same parsers, and anything that does
//! not parse into the role's structured type is a [`ReasonerError`] — there
//! are no silent partial parses.

mod http;
mod parse;
mod scripted;
mod tree;

pub use http::HttpBackend;
pub use parse::{extract_json, parse_decomposition, split_list};
pub use scripted::ScriptedBackend;
pub use tree::{NodeStatus, QuestionTree, TreeNode};

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::indicator::{Indicator, TemporalType};
use crate::store::Timestamp;
use crate::toolkits::{self, ToolkitCall};

#[derive(Debug, thiserror::Error)]
pub enum ReasonerError {
    #[error("response does not match the role schema: {0}")]
    SchemaError(String),
    #[error("constraint error: {0}")]
    ConstraintError(String),
    #[error("unparseable response: {0:?}")]
    UnparseableResponse(String),
    #[error("no valid seed entity")]
    NoValidSeed,
    #[error("unknown toolkit: {0}")]
    UnknownToolkit(String),
    #[error("backend transport error: {0}")]
    Transport(String),
    #[error("backend timed out after {0:?}")]
    Timeout(std::time::Duration),
}

impl From<toolkits::ToolkitError> for ReasonerError {
    fn from(e: toolkits::ToolkitError) -> Self {
        match e {
            toolkits::ToolkitError::UnknownToolkit(n) => ReasonerError::UnknownToolkit(n),
            other => ReasonerError::SchemaError(other.to_string()),
        }
    }
}

/// One prompt role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Mention and date extraction from the raw question.
    Ner,
    TypeSelect,
    Decompose,
    SeedSelect,
    ToolkitSelect,
    SelectPaths,
    DebateVote,
    Sufficiency,
    Refine,
    GenerateAnswer,
}

impl Role {
    pub fn label(&self) -> &'static str {
        match self {
            Role::Ner => "ner",
            Role::TypeSelect => "type_select",
            Role::Decompose => "decompose",
            Role::SeedSelect => "seed_select",
            Role::ToolkitSelect => "toolkit_select",
            Role::SelectPaths => "select_paths",
            Role::DebateVote => "debate_vote",
            Role::Sufficiency => "sufficiency",
            Role::Refine => "refine",
            Role::GenerateAnswer => "generate_answer",
        }
    }

    /// Final answer generation runs at the deterministic temperature;
    /// every other role is part of evidence exploration.
    pub fn is_exploration(&self) -> bool {
        !matches!(self, Role::GenerateAnswer)
    }
}

/// A rendered experience exemplar (or warning) for prompt context.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExemplarView {
    pub question: String,
    pub summary: String,
}

/// The inputs a role invocation carries: matching keys for the scripted
/// backend, structured payload for fallbacks, and the rendered prompt for
/// live backends.
#[derive(Debug, Clone)]
pub struct RoleInputs {
    pub question: String,
    pub indicator_text: String,
    pub temporal_type: Option<TemporalType>,
    pub payload: Value,
    pub exemplars: Vec<ExemplarView>,
    pub warnings: Vec<ExemplarView>,
}

impl RoleInputs {
    fn new(question: impl Into<String>) -> Self {
        RoleInputs {
            question: question.into(),
            indicator_text: String::new(),
            temporal_type: None,
            payload: Value::Null,
            exemplars: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn with_context(mut self, exemplars: Vec<ExemplarView>, warnings: Vec<ExemplarView>) -> Self {
        self.exemplars = exemplars;
        self.warnings = warnings;
        self
    }
}

/// Raw text boundary implemented by the backends.
pub trait RawBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn respond(&self, role: Role, inputs: &RoleInputs) -> Result<String, ReasonerError>;
    /// One bounded re-prompt after a parse failure; `None` when the backend
    /// does not repair (the scripted backend is deterministic and never does).
    fn repair(
        &self,
        _role: Role,
        _inputs: &RoleInputs,
        _error: &str,
    ) -> Option<Result<String, ReasonerError>> {
        None
    }
}

/// One logged backend invocation.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CallRecord {
    pub role: Role,
    pub backend: String,
    pub repaired: bool,
}

// --- Structured role outputs -----------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Accept,
    Decompose,
    Refine,
    RetrieveAgain,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SufficiencyVerdict {
    pub sufficient: bool,
    pub action: Action,
    pub note: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Local,
    Global,
}

/// One toolkit's extracted answer, as presented to the debate-vote stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DebateCandidate {
    pub index: usize,
    pub toolkit: String,
    pub priority: u32,
    pub entities: Vec<String>,
    pub time: Option<Timestamp>,
    pub count: Option<u64>,
    /// Paths validate and the node's time constraints hold.
    pub valid: bool,
    /// Result size matches the call's expectation.
    pub expected_len_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WinningVote {
    pub winning_toolkit: usize,
    pub score: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FinalAnswer {
    pub entities: Vec<String>,
    pub timestamps: Vec<String>,
    pub count: Option<u64>,
    pub rationale: String,
}

impl FinalAnswer {
    /// Answer values in reporting order: entities, then the count, then
    /// timestamps.
    pub fn values(&self) -> Vec<String> {
        let mut v = self.entities.clone();
        if let Some(c) = self.count {
            v.push(c.to_string());
        }
        v.extend(self.timestamps.clone());
        v
    }

    pub fn top(&self) -> Option<String> {
        self.values().into_iter().next()
    }
}

/// One node of the trajectory summary handed to global roles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeSummaryView {
    pub text: String,
    pub entities: Vec<String>,
    pub time: Option<String>,
    pub count: Option<u64>,
    pub solved: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub nodes: Vec<NodeSummaryView>,
    pub chain: Vec<String>,
}

// --- The reasoner facade ----------------------------------------------------

/// Typed facade over a raw backend. Cheap to construct per question; the
/// call log records every backend invocation for traces and reuse
/// accounting.
pub struct Reasoner {
    backend: Arc<dyn RawBackend>,
    calls: Mutex<Vec<CallRecord>>,
}

impl Reasoner {
    pub fn new(backend: Arc<dyn RawBackend>) -> Reasoner {
        Reasoner { backend, calls: Mutex::new(Vec::new()) }
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().expect("call log lock").len()
    }

    pub fn calls(&self) -> Vec<CallRecord> {
        self.calls.lock().expect("call log lock").clone()
    }

    fn invoke<T>(
        &self,
        role: Role,
        inputs: &RoleInputs,
        parse: impl Fn(&str) -> Result<T, ReasonerError>,
    ) -> Result<T, ReasonerError> {
        let text = self.backend.respond(role, inputs)?;
        self.log(role, false);
        match parse(&text) {
            Ok(v) => Ok(v),
            Err(first_err) => match self.backend.repair(role, inputs, &first_err.to_string()) {
                Some(repaired) => {
                    self.log(role, true);
                    parse(&repaired?)
                }
                None => Err(first_err),
            },
        }
    }

    fn log(&self, role: Role, repaired: bool) {
        self.calls.lock().expect("call log lock").push(CallRecord {
            role,
            backend: self.backend.name().to_string(),
            repaired,
        });
    }

    /// Mention and date extraction.
    pub fn extract_mentions(
        &self,
        question: &str,
    ) -> Result<(Vec<String>, Vec<Timestamp>), ReasonerError> {
        let inputs = RoleInputs::new(question);
        self.invoke(Role::Ner, &inputs, |text| {
            let v = extract_json(text)?;
            let mentions = string_list(&v, "mentions")?;
            let mut dates = Vec::new();
            for d in string_list(&v, "dates").unwrap_or_default() {
                if let Ok(ts) = crate::store::parse_timestamp(&d) {
                    dates.push(ts);
                }
            }
            Ok((mentions, dates))
        })
    }

    /// Classify into exactly one of the eleven temporal types.
    pub fn classify_type(
        &self,
        question: &str,
        exemplars: Vec<ExemplarView>,
        warnings: Vec<ExemplarView>,
    ) -> Result<TemporalType, ReasonerError> {
        let inputs = RoleInputs::new(question).with_context(exemplars, warnings);
        self.invoke(Role::TypeSelect, &inputs, |text| {
            let cleaned = text.trim().trim_matches(|c| c == '"' || c == '`' || c == '.');
            TemporalType::parse(cleaned)
                .ok_or_else(|| ReasonerError::UnparseableResponse(text.to_string()))
        })
    }

    /// Decompose into a validated question tree (four-block format).
    pub fn decompose(
        &self,
        question: &str,
        temporal_type: TemporalType,
        exemplars: Vec<ExemplarView>,
    ) -> Result<QuestionTree, ReasonerError> {
        let mut inputs = RoleInputs::new(question).with_context(exemplars, Vec::new());
        inputs.temporal_type = Some(temporal_type);
        self.invoke(Role::Decompose, &inputs, |text| {
            parse_decomposition(text, temporal_type)
        })
    }

    /// Select seed entities from the topic set (plus previously resolved
    /// entities, which callers include in `topics`).
    pub fn select_seeds(
        &self,
        topics: &[String],
        indicator: &Indicator,
        question: &str,
        exemplars: Vec<ExemplarView>,
    ) -> Result<Vec<String>, ReasonerError> {
        let mut inputs = RoleInputs::new(question).with_context(exemplars, Vec::new());
        inputs.indicator_text = crate::embedding::verbalize_indicator(indicator);
        inputs.temporal_type = Some(indicator.temporal_type);
        inputs.payload = json!({
            "topics": topics,
            "indicator": indicator,
        });
        self.invoke(Role::SeedSelect, &inputs, |text| {
            let v = extract_json(text)?;
            let seeds = string_list(&v, "seeds")?;
            if seeds.is_empty() {
                return Err(ReasonerError::NoValidSeed);
            }
            Ok(seeds)
        })
    }

    /// Select one or more validated toolkit calls for the indicator.
    pub fn select_toolkits(
        &self,
        indicator: &Indicator,
        question: &str,
        temporal_type: TemporalType,
        exemplars: Vec<ExemplarView>,
    ) -> Result<Vec<ToolkitCall>, ReasonerError> {
        let mut inputs = RoleInputs::new(question).with_context(exemplars, Vec::new());
        inputs.indicator_text = crate::embedding::verbalize_indicator(indicator);
        inputs.temporal_type = Some(temporal_type);
        inputs.payload = json!({
            "indicator": indicator,
            "catalog": toolkits::catalog().iter().map(|(n, d)| json!({"name": n, "purpose": d})).collect::<Vec<_>>(),
        });
        self.invoke(Role::ToolkitSelect, &inputs, |text| {
            let v = extract_json(text)?;
            let calls = toolkits::parse_selected_toolkits(&v)?;
            if calls.is_empty() {
                return Err(ReasonerError::SchemaError(
                    "selected_toolkits must name at least one toolkit".to_string(),
                ));
            }
            Ok(calls)
        })
    }

    /// Pick up to `w_max` of the scored candidates; returns indices into
    /// the candidate list.
    pub fn select_paths(
        &self,
        candidates: &[(String, f64)],
        question: &str,
        indicator_text: &str,
        w_max: usize,
    ) -> Result<Vec<usize>, ReasonerError> {
        let mut inputs = RoleInputs::new(question);
        inputs.indicator_text = indicator_text.to_string();
        inputs.payload = json!({
            "w_max": w_max,
            "candidates": candidates
                .iter()
                .enumerate()
                .map(|(i, (p, s))| json!({"index": i, "path": p, "score": s}))
                .collect::<Vec<_>>(),
        });
        let n = candidates.len();
        self.invoke(Role::SelectPaths, &inputs, move |text| {
            let v = extract_json(text)?;
            let picks = v
                .get("selected_paths")
                .and_then(Value::as_array)
                .ok_or_else(|| ReasonerError::SchemaError("missing selected_paths".to_string()))?;
            let mut out = Vec::new();
            for p in picks {
                let idx = p.as_u64().ok_or_else(|| {
                    ReasonerError::SchemaError("selected_paths entries must be indices".to_string())
                })? as usize;
                if idx >= n {
                    return Err(ReasonerError::SchemaError(format!(
                        "path index {idx} out of range ({n} candidates)"
                    )));
                }
                if !out.contains(&idx) {
                    out.push(idx);
                }
            }
            out.truncate(w_max.max(1));
            Ok(out)
        })
    }

    /// Aggregate multiple toolkit answers into one winner.
    pub fn debate_vote(
        &self,
        question: &str,
        temporal_type: TemporalType,
        candidates: &[DebateCandidate],
    ) -> Result<WinningVote, ReasonerError> {
        let mut inputs = RoleInputs::new(question);
        inputs.temporal_type = Some(temporal_type);
        inputs.payload = json!({ "candidates": candidates });
        let n = candidates.len();
        self.invoke(Role::DebateVote, &inputs, move |text| {
            let v = extract_json(text)?;
            let idx = v
                .get("winning_toolkit")
                .and_then(Value::as_u64)
                .ok_or_else(|| ReasonerError::SchemaError("missing winning_toolkit".to_string()))?
                as usize;
            if idx >= n {
                return Err(ReasonerError::SchemaError(format!(
                    "winning_toolkit {idx} out of range ({n} candidates)"
                )));
            }
            let score = v
                .pointer("/winning_answer/score")
                .and_then(Value::as_f64)
                .unwrap_or(1.0);
            let reason = v
                .pointer("/winning_answer/reason")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string();
            Ok(WinningVote { winning_toolkit: idx, score, reason })
        })
    }

    /// Local or global sufficiency: Accept iff sufficient, otherwise one of
    /// the corrective actions.
    pub fn check_sufficiency(
        &self,
        scope: Scope,
        question: &str,
        payload: Value,
        exemplars: Vec<ExemplarView>,
    ) -> Result<SufficiencyVerdict, ReasonerError> {
        let mut inputs = RoleInputs::new(question).with_context(exemplars, Vec::new());
        inputs.payload = json!({ "scope": scope, "evidence": payload });
        self.invoke(Role::Sufficiency, &inputs, |text| {
            let v = extract_json(text)?;
            let sufficient = v
                .get("sufficient")
                .and_then(Value::as_bool)
                .ok_or_else(|| ReasonerError::SchemaError("missing sufficient".to_string()))?;
            let action = match v.get("action").and_then(Value::as_str) {
                Some(a) => parse_action(a)?,
                None if sufficient => Action::Accept,
                None => {
                    return Err(ReasonerError::SchemaError(
                        "insufficient verdict must name an action".to_string(),
                    ))
                }
            };
            if sufficient && action != Action::Accept {
                return Err(ReasonerError::SchemaError(
                    "sufficient verdict must accept".to_string(),
                ));
            }
            let note = v.get("note").and_then(Value::as_str).unwrap_or_default().to_string();
            Ok(SufficiencyVerdict { sufficient, action, note })
        })
    }

    /// Rewrite an unresolved subquestion.
    pub fn refine(&self, node_text: &str, note: &str) -> Result<String, ReasonerError> {
        let mut inputs = RoleInputs::new(node_text);
        inputs.payload = json!({ "note": note });
        self.invoke(Role::Refine, &inputs, |text| {
            let refined = text.trim();
            if refined.is_empty() {
                return Err(ReasonerError::SchemaError("empty refinement".to_string()));
            }
            Ok(refined.to_string())
        })
    }

    /// Synthesize the final answer from the solved trajectory.
    pub fn generate_answer(
        &self,
        question: &str,
        indicator_text: &str,
        trajectory: &TrajectorySummary,
        exemplars: Vec<ExemplarView>,
    ) -> Result<FinalAnswer, ReasonerError> {
        let mut inputs = RoleInputs::new(question).with_context(exemplars, Vec::new());
        inputs.indicator_text = indicator_text.to_string();
        inputs.payload = serde_json::to_value(trajectory).expect("trajectory serializes");
        self.invoke(Role::GenerateAnswer, &inputs, |text| {
            let v = extract_json(text)?;
            let entities = string_list(&v, "entities").unwrap_or_default();
            let timestamps = string_list(&v, "timestamps").unwrap_or_default();
            let count = v.get("count").and_then(Value::as_u64);
            if entities.is_empty() && timestamps.is_empty() && count.is_none() {
                return Err(ReasonerError::SchemaError(
                    "answer carries no entities, timestamps, or count".to_string(),
                ));
            }
            let rationale =
                v.get("rationale").and_then(Value::as_str).unwrap_or_default().to_string();
            Ok(FinalAnswer { entities, timestamps, count, rationale })
        })
    }
}

fn parse_action(text: &str) -> Result<Action, ReasonerError> {
    match text.trim().to_ascii_lowercase().replace([' ', '_'], "").as_str() {
        "accept" => Ok(Action::Accept),
        "decompose" => Ok(Action::Decompose),
        "refine" => Ok(Action::Refine),
        "retrieveagain" | "retrievalagain" | "retry" => Ok(Action::RetrieveAgain),
        other => Err(ReasonerError::SchemaError(format!("unknown action {other:?}"))),
    }
}

fn string_list(v: &Value, key: &str) -> Result<Vec<String>, ReasonerError> {
    v.get(key)
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_str).map(str::to_string).collect())
        .ok_or_else(|| ReasonerError::SchemaError(format!("missing list {key:?}")))
}

/// Render the prompt a live backend sends for one role invocation.
/// Exemplars render before warnings, and the structured payload is inlined
/// as JSON context.
pub fn render_prompt(role: Role, inputs: &RoleInputs) -> String {
    let mut out = String::new();
    let instruction = match role {
        Role::Ner => {
            "Extract entity mentions and explicit dates from the question. \
             Respond with JSON: {\"mentions\": [..], \"dates\": [..]}."
        }
        Role::TypeSelect => {
            "Classify the question into exactly one temporal type from: \
             equal, before, after, during, between, first, last, beforeNlast, \
             afterNfirst, count, comparison. Respond with the single label."
        }
        Role::Decompose => {
            "Decompose the temporal question into dependency-ordered subquestions \
             with one indicator edge each, explicit time constraints, and declared \
             time variables. Use ?x/?y for unknown entities and t1/t2 for time \
             variables, keeping them in monotonic order. Respond exactly as:\n\
             Subquestions: [..]\nIndicators: [Entity --[relation]--> Entity (t)]\n\
             Constraints: [..]\nTime_vars: [..]"
        }
        Role::SeedSelect => {
            "Select the minimal seed entities that anchor retrieval for this \
             subquestion. Respond with JSON: {\"seeds\": [..]}."
        }
        Role::ToolkitSelect => {
            "Select the temporal toolkit(s) suited to this subquestion and its \
             constraints. Respond with JSON: {\"selected_toolkits\": \
             [{\"original_name\": .., \"priority\": 1, \"parameters\": {..}}]}."
        }
        Role::SelectPaths => {
            "Score the candidate evidence paths and pick those most likely to \
             answer the question. Respond with JSON: {\"selected_paths\": [indices]}."
        }
        Role::DebateVote => {
            "Compare the toolkit outputs for relevance, temporal faithfulness, and \
             completeness, then pick one winner. Respond with JSON: \
             {\"winning_toolkit\": <index>, \"winning_answer\": {\"entity\": .., \
             \"time\": .., \"score\": .., \"reason\": ..}}."
        }
        Role::Sufficiency => {
            "Judge whether the evidence suffices to answer. Respond with JSON: \
             {\"sufficient\": true|false, \"action\": \"Accept\"|\"Decompose\"|\
             \"Refine\"|\"Retrieval Again\", \"note\": ..}."
        }
        Role::Refine => "Rewrite the subquestion to be more answerable while preserving its meaning. Respond with the rewritten text only.",
        Role::GenerateAnswer => {
            "Generate the final answer strictly from the solved trajectory; list \
             every equally valid entity. Respond with JSON: {\"entities\": [..], \
             \"timestamps\": [..], \"count\": null|<n>, \"rationale\": ..}."
        }
    };
    out.push_str(instruction);
    out.push('\n');
    if !inputs.exemplars.is_empty() {
        out.push_str("\nExamples:\n");
        for e in &inputs.exemplars {
            out.push_str(&format!("Q: {}\nA: {}\n", e.question, e.summary));
        }
    }
    if !inputs.warnings.is_empty() {
        out.push_str("\nWarnings (previously incorrect):\n");
        for w in &inputs.warnings {
            out.push_str(&format!("Q: {}\nA: {}\n", w.question, w.summary));
        }
    }
    if let Some(t) = inputs.temporal_type {
        out.push_str(&format!("\nTemporal type: {t}\n"));
    }
    if !inputs.indicator_text.is_empty() {
        out.push_str(&format!("Indicator: {}\n", inputs.indicator_text));
    }
    if !inputs.payload.is_null() {
        out.push_str(&format!("Context: {}\n", inputs.payload));
    }
    out.push_str(&format!("\nQ: {}\nA:", inputs.question));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Canned(&'static str);

    impl RawBackend for Canned {
        fn name(&self) -> &'static str {
            "canned"
        }
        fn respond(&self, _role: Role, _inputs: &RoleInputs) -> Result<String, ReasonerError> {
            Ok(self.0.to_string())
        }
    }

    #[test]
    fn classify_parses_labels_and_rejects_noise() {
        let r = Reasoner::new(Arc::new(Canned("afterNfirst")));
        assert_eq!(
            r.classify_type("q", vec![], vec![]).unwrap(),
            TemporalType::AfterNFirst
        );
        let r = Reasoner::new(Arc::new(Canned("something else")));
        assert!(matches!(
            r.classify_type("q", vec![], vec![]),
            Err(ReasonerError::UnparseableResponse(_))
        ));
    }

    #[test]
    fn select_paths_validates_indices() {
        let r = Reasoner::new(Arc::new(Canned("{\"selected_paths\": [5]}")));
        let cands = vec![("p".to_string(), 1.0)];
        assert!(matches!(
            r.select_paths(&cands, "q", "i", 3),
            Err(ReasonerError::SchemaError(_))
        ));
        let r = Reasoner::new(Arc::new(Canned("{\"selected_paths\": [0, 0]}")));
        assert_eq!(r.select_paths(&cands, "q", "i", 3).unwrap(), vec![0]);
    }

    #[test]
    fn sufficiency_requires_action_when_insufficient() {
        let r = Reasoner::new(Arc::new(Canned("{\"sufficient\": false}")));
        assert!(r.check_sufficiency(Scope::Local, "q", Value::Null, vec![]).is_err());
        let r = Reasoner::new(Arc::new(Canned(
            "{\"sufficient\": false, \"action\": \"Retrieval Again\"}",
        )));
        let v = r.check_sufficiency(Scope::Local, "q", Value::Null, vec![]).unwrap();
        assert_eq!(v.action, Action::RetrieveAgain);
    }

    #[test]
    fn call_log_counts_invocations() {
        let r = Reasoner::new(Arc::new(Canned("equal")));
        assert_eq!(r.call_count(), 0);
        r.classify_type("q", vec![], vec![]).unwrap();
        r.classify_type("q", vec![], vec![]).unwrap();
        assert_eq!(r.call_count(), 2);
        assert!(r.calls().iter().all(|c| c.role == Role::TypeSelect && !c.repaired));
    }

    #[test]
    fn debate_vote_checks_range() {
        let r = Reasoner::new(Arc::new(Canned("{\"winning_toolkit\": 2}")));
        let c = DebateCandidate {
            index: 0,
            toolkit: "OneHop".into(),
            priority: 1,
            entities: vec!["X".into()],
            time: None,
            count: None,
            valid: true,
            expected_len_ok: true,
        };
        assert!(r.debate_vote("q", TemporalType::Equal, &[c]).is_err());
    }
}
