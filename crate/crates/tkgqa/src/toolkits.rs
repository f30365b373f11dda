//! The temporal retrieval operators and their dispatcher.
//!
//! Eight toolkits share a normalized parameter map and deterministic result
//! ordering; a thin alias layer routes the looser names reasoners emit
//! (`Before`, `After`, `FirstLast`, `Count`) onto them. All operators are
//! pure reads on an immutable [`Subgraph`], so a set of calls can execute
//! in any order (or concurrently) with identical results.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::embedding::tokenize;
use crate::store::{
    strictly_before, Direction, Fact, Granularity, StoreError, Subgraph, TimeWindow, Timestamp,
};

/// Hard ceiling applied when a call carries no explicit limit.
pub const DEFAULT_RESULT_CAP: usize = 10_000;

#[derive(Debug, thiserror::Error)]
pub enum ToolkitError {
    #[error("unknown toolkit: {0}")]
    UnknownToolkit(String),
    #[error("missing required parameter: {0}")]
    MissingParam(&'static str),
    #[error("invalid parameter {name}: {message}")]
    InvalidParam { name: &'static str, message: String },
    #[error("window bounds are reversed")]
    InvalidWindow,
    #[error("expected {expected} granularity, got {got}")]
    GranularityError { expected: &'static str, got: String },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Canonical toolkit names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ToolkitName {
    OneHop,
    AfterFirst,
    BeforeLast,
    BetweenRange,
    DayEvents,
    PeriodEvents,
    DirectConnection,
    Timeline,
    /// Aggregator: runs the windowed retrieval its params imply and reports
    /// the count of matching facts.
    Count,
}

impl ToolkitName {
    pub fn label(&self) -> &'static str {
        match self {
            ToolkitName::OneHop => "OneHop",
            ToolkitName::AfterFirst => "AfterFirst",
            ToolkitName::BeforeLast => "BeforeLast",
            ToolkitName::BetweenRange => "BetweenRange",
            ToolkitName::DayEvents => "DayEvents",
            ToolkitName::PeriodEvents => "PeriodEvents",
            ToolkitName::DirectConnection => "DirectConnection",
            ToolkitName::Timeline => "Timeline",
            ToolkitName::Count => "Count",
        }
    }
}

/// Ordering selector for `FirstLast`-style timeline calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimelineMode {
    First,
    Last,
}

/// Normalized parameters of one toolkit invocation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ToolkitParams {
    pub entity: Option<String>,
    pub entity2: Option<String>,
    pub direction: Option<Direction>,
    pub after: Option<Timestamp>,
    pub before: Option<Timestamp>,
    pub between: Option<(Timestamp, Timestamp)>,
    pub date: Option<Timestamp>,
    pub period: Option<Timestamp>,
    pub relation_filter: Option<String>,
    /// Substring filter on endpoint entity names.
    pub keyword: Option<String>,
    pub limit: Option<usize>,
    pub granularity: Option<Granularity>,
    pub mode: Option<TimelineMode>,
}

/// One toolkit invocation: name, parameters, and its selection priority
/// (1 = highest, assigned by the reasoner).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolkitCall {
    pub name: ToolkitName,
    /// Name string as emitted by the reasoner (aliases preserved for traces).
    pub original_name: String,
    pub params: ToolkitParams,
    pub priority: u32,
}

impl ToolkitCall {
    pub fn new(name: ToolkitName, params: ToolkitParams) -> Self {
        ToolkitCall { name, original_name: name.label().to_string(), params, priority: 1 }
    }
}

/// Result of executing one call: matching facts in the operator's
/// documented order, plus an optional diagnostic note.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolkitResult {
    pub call: ToolkitCall,
    pub facts: Vec<Fact>,
    pub note: Option<String>,
}

// --- Relation filter matching -------------------------------------------

/// Case-insensitive token-subset match with `_`/space equivalence: the
/// filter matches a relation when the token set of either side contains the
/// other, compared against the relation name and each of its aliases.
pub fn relation_matches(g: &Subgraph, filter: &str, fact: &Fact) -> bool {
    let filter_tokens = tokenize(filter);
    if filter_tokens.is_empty() {
        return true;
    }
    let tkg = g.tkg();
    let mut candidates = vec![tkg.relation_name(fact.relation).to_string()];
    candidates.extend(tkg.aliases_of(fact.relation).iter().cloned());
    candidates.iter().any(|cand| {
        let cand_tokens = tokenize(cand);
        subset(&filter_tokens, &cand_tokens) || subset(&cand_tokens, &filter_tokens)
    })
}

fn subset(a: &[String], b: &[String]) -> bool {
    a.iter().all(|t| b.contains(t))
}

fn keyword_matches(g: &Subgraph, keyword: &str, fact: &Fact) -> bool {
    let kw = keyword.to_lowercase();
    let tkg = g.tkg();
    tkg.entity_name(fact.head).to_lowercase().contains(&kw)
        || tkg.entity_name(fact.tail).to_lowercase().contains(&kw)
}

fn cap(limit: Option<usize>) -> usize {
    limit.unwrap_or(DEFAULT_RESULT_CAP).min(DEFAULT_RESULT_CAP)
}

fn ascending(g: &Subgraph, facts: &mut [Fact]) {
    let tkg = g.tkg();
    facts.sort_by(|a, b| tkg.canonical_key(a).cmp(&tkg.canonical_key(b)));
}

fn descending_by_start(g: &Subgraph, facts: &mut [Fact]) {
    let tkg = g.tkg();
    facts.sort_by(|a, b| {
        b.ts.start()
            .cmp(&a.ts.start())
            .then_with(|| tkg.canonical_key(a).cmp(&tkg.canonical_key(b)))
    });
}

// --- The eight operators --------------------------------------------------

/// One-hop neighbors of `entity` with open-window temporal filtering, in
/// canonical order.
pub fn one_hop(
    g: &Subgraph,
    entity: &str,
    direction: Direction,
    window: TimeWindow,
    relation_filter: Option<&str>,
    limit: Option<usize>,
) -> Result<ToolkitResult, ToolkitError> {
    let id = g.require_entity(entity)?;
    let mut facts = g.neighbors(id, direction, window)?;
    if let Some(rf) = relation_filter {
        facts.retain(|f| relation_matches(g, rf, f));
    }
    facts.truncate(cap(limit));
    Ok(result(ToolkitName::OneHop, entity, facts))
}

/// First N facts incident to `entity` starting strictly after the whole
/// interval of `after`, ascending by start time.
pub fn after_first(
    g: &Subgraph,
    entity: &str,
    after: Timestamp,
    relation_filter: Option<&str>,
    limit: Option<usize>,
) -> Result<ToolkitResult, ToolkitError> {
    let id = g.require_entity(entity)?;
    let mut facts = g.neighbors(id, Direction::Both, TimeWindow::default())?;
    facts.retain(|f| f.ts.start() > after.end());
    if let Some(rf) = relation_filter {
        facts.retain(|f| relation_matches(g, rf, f));
    }
    ascending(g, &mut facts);
    facts.truncate(cap(limit));
    Ok(result(ToolkitName::AfterFirst, entity, facts))
}

/// Last N facts incident to `entity` ending strictly before the start of
/// `before`, descending by start time.
pub fn before_last(
    g: &Subgraph,
    entity: &str,
    before: Timestamp,
    relation_filter: Option<&str>,
    limit: Option<usize>,
) -> Result<ToolkitResult, ToolkitError> {
    let id = g.require_entity(entity)?;
    let mut facts = g.neighbors(id, Direction::Both, TimeWindow::default())?;
    facts.retain(|f| f.ts.end() < before.start());
    if let Some(rf) = relation_filter {
        facts.retain(|f| relation_matches(g, rf, f));
    }
    descending_by_start(g, &mut facts);
    facts.truncate(cap(limit));
    Ok(result(ToolkitName::BeforeLast, entity, facts))
}

/// Facts incident to `entity` whose whole interval lies strictly inside the
/// open `(lo, hi)` window, ascending.
pub fn between_range(
    g: &Subgraph,
    entity: &str,
    between: (Timestamp, Timestamp),
    relation_filter: Option<&str>,
    granularity: Option<Granularity>,
) -> Result<ToolkitResult, ToolkitError> {
    let (lo, hi) = between;
    if lo.start() > hi.start() {
        return Err(ToolkitError::InvalidWindow);
    }
    let id = g.require_entity(entity)?;
    let mut facts = g.neighbors(id, Direction::Both, TimeWindow::default())?;
    facts.retain(|f| strictly_before(&lo, &f.ts) && strictly_before(&f.ts, &hi));
    if let Some(rf) = relation_filter {
        facts.retain(|f| relation_matches(g, rf, f));
    }
    if let Some(gr) = granularity {
        facts.retain(|f| f.ts.granularity() == gr);
    }
    ascending(g, &mut facts);
    Ok(result(ToolkitName::BetweenRange, entity, facts))
}

/// All subgraph facts dated exactly `date` (day granularity), canonical order.
pub fn day_events(
    g: &Subgraph,
    date: Timestamp,
    relation_filter: Option<&str>,
    limit: Option<usize>,
) -> Result<ToolkitResult, ToolkitError> {
    if date.granularity() != Granularity::Day {
        return Err(ToolkitError::GranularityError {
            expected: "day",
            got: date.to_string(),
        });
    }
    let mut facts: Vec<Fact> = g.facts().into_iter().filter(|f| f.ts == date).collect();
    if let Some(rf) = relation_filter {
        facts.retain(|f| relation_matches(g, rf, f));
    }
    facts.truncate(cap(limit));
    Ok(ToolkitResult {
        call: ToolkitCall::new(ToolkitName::DayEvents, ToolkitParams {
            date: Some(date),
            relation_filter: relation_filter.map(str::to_string),
            limit,
            ..Default::default()
        }),
        facts,
        note: None,
    })
}

/// All subgraph facts whose interval is contained in `period` (month or
/// year granularity), canonical order.
pub fn period_events(
    g: &Subgraph,
    period: Timestamp,
    relation_filter: Option<&str>,
    limit: Option<usize>,
) -> Result<ToolkitResult, ToolkitError> {
    if period.granularity() == Granularity::Day {
        return Err(ToolkitError::GranularityError {
            expected: "month or year",
            got: period.to_string(),
        });
    }
    let mut facts: Vec<Fact> = g.facts().into_iter().filter(|f| f.ts.within(&period)).collect();
    if let Some(rf) = relation_filter {
        facts.retain(|f| relation_matches(g, rf, f));
    }
    facts.truncate(cap(limit));
    Ok(ToolkitResult {
        call: ToolkitCall::new(ToolkitName::PeriodEvents, ToolkitParams {
            period: Some(period),
            relation_filter: relation_filter.map(str::to_string),
            limit,
            ..Default::default()
        }),
        facts,
        note: None,
    })
}

/// Direct edges between two entities, window-filtered, ascending by time.
/// `direction: Out` keeps entity1→entity2 edges only, `In` the opposite.
pub fn direct_connection(
    g: &Subgraph,
    entity1: &str,
    entity2: &str,
    direction: Option<Direction>,
    window: TimeWindow,
) -> Result<ToolkitResult, ToolkitError> {
    let a = g.require_entity(entity1)?;
    let b = g.require_entity(entity2)?;
    let mut facts = g.neighbors(a, Direction::Both, window)?;
    facts.retain(|f| {
        let fwd = f.head == a && f.tail == b;
        let back = f.head == b && f.tail == a;
        match direction {
            Some(Direction::Out) => fwd,
            Some(Direction::In) => back,
            _ => fwd || back,
        }
    });
    ascending(g, &mut facts);
    let mut res = result(ToolkitName::DirectConnection, entity1, facts);
    res.call.params.entity2 = Some(entity2.to_string());
    Ok(res)
}

/// Chronological sequence of facts incident to `entity`, strictly ascending
/// by (start, canonical key), window-filtered and truncated to `limit`.
pub fn timeline(
    g: &Subgraph,
    entity: &str,
    direction: Option<Direction>,
    window: TimeWindow,
    relation_filter: Option<&str>,
    limit: Option<usize>,
) -> Result<ToolkitResult, ToolkitError> {
    let id = g.require_entity(entity)?;
    let mut facts = g.neighbors(id, direction.unwrap_or(Direction::Both), window)?;
    if let Some(rf) = relation_filter {
        facts.retain(|f| relation_matches(g, rf, f));
    }
    ascending(g, &mut facts);
    facts.truncate(cap(limit));
    Ok(result(ToolkitName::Timeline, entity, facts))
}

/// Number of facts in a result.
pub fn count_results(result: &ToolkitResult) -> usize {
    result.facts.len()
}

fn result(name: ToolkitName, entity: &str, facts: Vec<Fact>) -> ToolkitResult {
    ToolkitResult {
        call: ToolkitCall::new(name, ToolkitParams {
            entity: Some(entity.to_string()),
            ..Default::default()
        }),
        facts,
        note: None,
    }
}

// --- Dispatcher ------------------------------------------------------------

/// Execute one validated call. The result records the call as given
/// (original name, params, priority) for traceability.
pub fn execute(g: &Subgraph, call: &ToolkitCall) -> Result<ToolkitResult, ToolkitError> {
    let p = &call.params;
    let entity = || p.entity.as_deref().ok_or(ToolkitError::MissingParam("entity"));
    let window = TimeWindow::new(p.after, p.before);
    let mut res = match call.name {
        ToolkitName::OneHop => one_hop(
            g,
            entity()?,
            p.direction.unwrap_or(Direction::Both),
            window,
            p.relation_filter.as_deref(),
            p.limit,
        )?,
        ToolkitName::AfterFirst => {
            let after = p.after.ok_or(ToolkitError::MissingParam("after"))?;
            after_first(g, entity()?, after, p.relation_filter.as_deref(), p.limit)?
        }
        ToolkitName::BeforeLast => {
            let before = p.before.ok_or(ToolkitError::MissingParam("before"))?;
            before_last(g, entity()?, before, p.relation_filter.as_deref(), p.limit)?
        }
        ToolkitName::BetweenRange => {
            let between = p.between.ok_or(ToolkitError::MissingParam("between"))?;
            between_range(g, entity()?, between, p.relation_filter.as_deref(), p.granularity)?
        }
        ToolkitName::DayEvents => {
            let date = p.date.ok_or(ToolkitError::MissingParam("date"))?;
            day_events(g, date, p.relation_filter.as_deref(), p.limit)?
        }
        ToolkitName::PeriodEvents => {
            let period = p.period.ok_or(ToolkitError::MissingParam("period"))?;
            period_events(g, period, p.relation_filter.as_deref(), p.limit)?
        }
        ToolkitName::DirectConnection => {
            let e2 = p.entity2.as_deref().ok_or(ToolkitError::MissingParam("entity2"))?;
            direct_connection(g, entity()?, e2, p.direction, window)?
        }
        ToolkitName::Timeline => {
            let mut r = timeline(
                g,
                entity()?,
                p.direction,
                window,
                p.relation_filter.as_deref(),
                // `mode: last` needs the full ascending list before cutting.
                if p.mode == Some(TimelineMode::Last) { None } else { p.limit },
            )?;
            if p.mode == Some(TimelineMode::Last) {
                let keep = cap(p.limit);
                if r.facts.len() > keep {
                    r.facts.drain(..r.facts.len() - keep);
                }
                r.facts.reverse();
            }
            r
        }
        ToolkitName::Count => {
            let inner = count_inner_call(p)?;
            let mut r = execute(g, &inner)?;
            r.note = Some(format!("count={}", r.facts.len()));
            r
        }
    };
    if let Some(kw) = p.keyword.as_deref() {
        res.facts.retain(|f| keyword_matches(g, kw, f));
        if call.name == ToolkitName::Count {
            res.note = Some(format!("count={}", res.facts.len()));
        }
    }
    res.call = call.clone();
    if call.name == ToolkitName::Count && res.note.is_none() {
        res.note = Some(format!("count={}", res.facts.len()));
    }
    Ok(res)
}

/// The retrieval a `Count` call aggregates over, chosen by its window params.
fn count_inner_call(p: &ToolkitParams) -> Result<ToolkitCall, ToolkitError> {
    let mut inner = p.clone();
    inner.keyword = None;
    inner.limit = None;
    let name = if p.between.is_some() {
        ToolkitName::BetweenRange
    } else if p.before.is_some() {
        ToolkitName::BeforeLast
    } else if p.after.is_some() {
        ToolkitName::AfterFirst
    } else {
        ToolkitName::Timeline
    };
    Ok(ToolkitCall::new(name, inner))
}

/// Execute a batch of calls; results ordered by (priority, input order).
/// Operators are pure reads, so this is observationally equal to any
/// parallel schedule.
pub fn execute_all(g: &Subgraph, calls: &[ToolkitCall]) -> Result<Vec<ToolkitResult>, ToolkitError> {
    let mut ordered: Vec<(usize, &ToolkitCall)> = calls.iter().enumerate().collect();
    ordered.sort_by_key(|(i, c)| (c.priority, *i));
    ordered.into_iter().map(|(_, c)| execute(g, c)).collect()
}

// --- Reasoner-facing JSON schema -------------------------------------------

/// Parse the `selected_toolkits` JSON array a reasoner emits:
/// `[{"original_name": ..., "parameters": {...}, "priority": n}, ...]`.
/// Accepts alias names: `Before`, `After`, `FirstLast`, `Count`,
/// `Month/YearEvents`.
pub fn parse_selected_toolkits(value: &Value) -> Result<Vec<ToolkitCall>, ToolkitError> {
    let arr = value
        .get("selected_toolkits")
        .and_then(Value::as_array)
        .ok_or(ToolkitError::MissingParam("selected_toolkits"))?;
    let mut out = Vec::new();
    for item in arr {
        let name_str = item
            .get("original_name")
            .or_else(|| item.get("name"))
            .and_then(Value::as_str)
            .ok_or(ToolkitError::MissingParam("original_name"))?;
        let priority = item.get("priority").and_then(Value::as_u64).unwrap_or(1) as u32;
        let params_json = item.get("parameters").cloned().unwrap_or(Value::Object(Default::default()));
        let mut call = build_call(name_str, &params_json)?;
        call.priority = priority.max(1);
        out.push(call);
    }
    Ok(out)
}

/// Resolve a toolkit name (canonical or alias) plus a raw parameter object
/// into a validated call.
pub fn build_call(name: &str, params: &Value) -> Result<ToolkitCall, ToolkitError> {
    let p = parse_params(params)?;
    let trimmed = name.trim();
    let mut call = match trimmed.to_ascii_lowercase().as_str() {
        "onehop" | "one_hop" => ToolkitCall::new(ToolkitName::OneHop, p),
        "afterfirst" | "after_first" => ToolkitCall::new(ToolkitName::AfterFirst, p),
        "beforelast" | "before_last" => ToolkitCall::new(ToolkitName::BeforeLast, p),
        "betweenrange" | "between_range" | "between" => {
            ToolkitCall::new(ToolkitName::BetweenRange, p)
        }
        "dayevents" | "day_events" => ToolkitCall::new(ToolkitName::DayEvents, p),
        "periodevents" | "period_events" | "month/yearevents" | "monthevents" | "yearevents" => {
            ToolkitCall::new(ToolkitName::PeriodEvents, p)
        }
        "directconnection" | "direct_connection" => {
            ToolkitCall::new(ToolkitName::DirectConnection, p)
        }
        "timeline" => ToolkitCall::new(ToolkitName::Timeline, p),
        // Unbounded window scans: Before/After keep every match (subject
        // to the global cap) rather than the first/last N.
        "before" => {
            let mut p = p;
            p.limit = None;
            ToolkitCall::new(ToolkitName::BeforeLast, p)
        }
        "after" => {
            let mut p = p;
            p.limit = None;
            ToolkitCall::new(ToolkitName::AfterFirst, p)
        }
        "firstlast" | "first_last" => ToolkitCall::new(ToolkitName::Timeline, p),
        "count" => ToolkitCall::new(ToolkitName::Count, p),
        other => return Err(ToolkitError::UnknownToolkit(other.to_string())),
    };
    call.original_name = trimmed.to_string();
    Ok(call)
}

fn parse_params(v: &Value) -> Result<ToolkitParams, ToolkitError> {
    let obj = match v {
        Value::Object(m) => m,
        Value::Null => return Ok(ToolkitParams::default()),
        _ => {
            return Err(ToolkitError::InvalidParam {
                name: "parameters",
                message: "expected an object".to_string(),
            })
        }
    };
    let get_str = |key: &str| obj.get(key).and_then(Value::as_str).map(str::to_string);
    let get_ts = |key: &'static str| -> Result<Option<Timestamp>, ToolkitError> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => crate::store::parse_timestamp(s)
                .map(Some)
                .map_err(|e| ToolkitError::InvalidParam { name: key, message: e.to_string() }),
            Some(Value::Number(n)) => {
                let y = n.as_i64().ok_or(ToolkitError::InvalidParam {
                    name: key,
                    message: "expected an integer year".to_string(),
                })?;
                Ok(Some(Timestamp::year(y as i32)))
            }
            Some(other) => Err(ToolkitError::InvalidParam {
                name: key,
                message: format!("cannot read timestamp from {other}"),
            }),
        }
    };
    let mut p = ToolkitParams {
        entity: get_str("entity").or_else(|| get_str("entity1")),
        entity2: get_str("entity2"),
        after: get_ts("after")?,
        before: get_ts("before")?,
        date: get_ts("date")?,
        relation_filter: get_str("relation_filter"),
        keyword: get_str("keyword"),
        ..Default::default()
    };
    p.period = get_ts("period")?.or(get_ts("year")?).or(get_ts("month")?);
    if let Some(v) = obj.get("between") {
        let pair = v.as_array().filter(|a| a.len() == 2).ok_or(ToolkitError::InvalidParam {
            name: "between",
            message: "expected [start, end]".to_string(),
        })?;
        let lo = ts_from_value(&pair[0], "between")?;
        let hi = ts_from_value(&pair[1], "between")?;
        p.between = Some((lo, hi));
    }
    if let Some(v) = obj.get("limit") {
        let n = match v {
            Value::Number(n) => n.as_u64(),
            Value::String(s) => s.parse::<u64>().ok(),
            _ => None,
        }
        .ok_or(ToolkitError::InvalidParam {
            name: "limit",
            message: "expected a positive integer".to_string(),
        })?;
        if n == 0 {
            return Err(ToolkitError::InvalidParam {
                name: "limit",
                message: "limit must be at least 1".to_string(),
            });
        }
        p.limit = Some(n as usize);
    }
    if let Some(d) = get_str("direction") {
        p.direction = match d.to_ascii_lowercase().as_str() {
            "out" | "head" | "forward" => Some(Direction::Out),
            "in" | "tail" | "backward" => Some(Direction::In),
            "both" | "any" => Some(Direction::Both),
            other => {
                return Err(ToolkitError::InvalidParam {
                    name: "direction",
                    message: format!("unknown direction {other:?}"),
                })
            }
        };
    }
    if let Some(m) = get_str("mode").or_else(|| get_str("sort")) {
        p.mode = match m.to_ascii_lowercase().as_str() {
            "first" | "asc" => Some(TimelineMode::First),
            "last" | "desc" => Some(TimelineMode::Last),
            _ => None,
        };
    }
    if let Some(gr) = get_str("granularity") {
        p.granularity = match gr.to_ascii_lowercase().as_str() {
            "day" => Some(Granularity::Day),
            "month" => Some(Granularity::Month),
            "year" => Some(Granularity::Year),
            other => {
                return Err(ToolkitError::InvalidParam {
                    name: "granularity",
                    message: format!("unknown granularity {other:?}"),
                })
            }
        };
    }
    Ok(p)
}

fn ts_from_value(v: &Value, name: &'static str) -> Result<Timestamp, ToolkitError> {
    match v {
        Value::String(s) => crate::store::parse_timestamp(s)
            .map_err(|e| ToolkitError::InvalidParam { name, message: e.to_string() }),
        Value::Number(n) => Ok(Timestamp::year(n.as_i64().unwrap_or_default() as i32)),
        other => Err(ToolkitError::InvalidParam {
            name,
            message: format!("cannot read timestamp from {other}"),
        }),
    }
}

/// Catalog rendered into toolkit-selection prompts.
pub fn catalog() -> Vec<(&'static str, &'static str)> {
    vec![
        ("OneHop", "One-hop neighbors with temporal filters (entity, direction, after/before, limit)"),
        ("AfterFirst", "First Nth event after a cutoff (entity, after, relation_filter, limit=N)"),
        ("BeforeLast", "Last Nth event before a cutoff (entity, before, relation_filter, limit=N)"),
        ("BetweenRange", "Events within a time window (entity, between=(start,end), granularity)"),
        ("DayEvents", "Global events on a specific date (date, relation_filter, limit)"),
        ("PeriodEvents", "Global events in a month/year (month or year, relation_filter, limit)"),
        ("DirectConnection", "Direct edges between two entities (entity1, entity2, direction, time filters)"),
        ("Timeline", "Chronological sequence for an entity (entity, direction, after/before, limit)"),
    ]
}

// BTreeMap keeps serialized parameter maps deterministic for traces.
pub fn params_to_map(p: &ToolkitParams) -> BTreeMap<String, Value> {
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: Option<Value>| {
        if let Some(v) = v {
            m.insert(k.to_string(), v);
        }
    };
    put("entity", p.entity.clone().map(Value::String));
    put("entity2", p.entity2.clone().map(Value::String));
    put("after", p.after.map(|t| Value::String(t.to_string())));
    put("before", p.before.map(|t| Value::String(t.to_string())));
    put(
        "between",
        p.between.map(|(a, b)| {
            Value::Array(vec![Value::String(a.to_string()), Value::String(b.to_string())])
        }),
    );
    put("date", p.date.map(|t| Value::String(t.to_string())));
    put("period", p.period.map(|t| Value::String(t.to_string())));
    put("relation_filter", p.relation_filter.clone().map(Value::String));
    put("keyword", p.keyword.clone().map(Value::String));
    put("limit", p.limit.map(|n| Value::Number(n.into())));
    m
}
