//! The reasoning orchestrator: grounding, root-to-leaf node execution with
//! memory lookup, toolkit retrieval, sufficiency gating, bounded
//! refine/decompose, global synthesis, and memory write-back.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Ablations, Config};
use crate::embedding::{
    link_entities, verbalize_fact, verbalize_indicator, verbalize_path, Embedder, EntityLink,
};
use crate::indicator::{ConstraintOp, Indicator, TemporalType, Term, TimeConstraint, TimeRef};
use crate::memory::{ExperienceDraft, ExperienceKind, ExperiencePool, ExperienceRecord};
use crate::reasoner::{
    Action, CallRecord, DebateCandidate, ExemplarView, NodeStatus, QuestionTree, Reasoner,
    ReasonerError, Scope, TrajectorySummary,
};
use crate::retrieval::{
    self, HybridOptions, RetrievalError, ScoredPath,
};
use crate::store::{
    validate_path, validate_trp, EntityId, Fact, Granularity, StoreError, Subgraph, TemporalPath,
    TemporalReasoningPath, TimeWindow, Timestamp, Tkg,
};
use crate::toolkits::{self, ToolkitCall, ToolkitName, ToolkitResult};

/// Exemplar-reuse gate: a stored trace answers a node directly only when
/// its question embedding is this close to the node's.
const REUSE_SIMILARITY: f64 = 0.95;

/// RetrieveAgain attempts per node before the node fails.
const MAX_NODE_RETRIES: u32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum ControllerError {
    #[error("no topic entities could be linked")]
    NoTopicEntities,
    #[error("merged reasoning chain violates temporal ordering")]
    IncoherentChain,
    #[error("{phase}: {message}")]
    Phase { phase: &'static str, message: String },
}

fn phase_err(phase: &'static str) -> impl Fn(ReasonerError) -> ControllerError {
    move |e| ControllerError::Phase { phase, message: e.to_string() }
}

impl ControllerError {
    fn store(phase: &'static str, e: StoreError) -> ControllerError {
        ControllerError::Phase { phase, message: e.to_string() }
    }
    fn retrieval(phase: &'static str, e: RetrievalError) -> ControllerError {
        ControllerError::Phase { phase, message: e.to_string() }
    }
}

/// Final answer of a question run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Answer {
    pub entities: Vec<String>,
    pub timestamps: Vec<String>,
    pub count: Option<u64>,
    pub rationale: String,
    pub sufficient: bool,
}

impl Answer {
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

/// Per-node answer extracted from toolkit evidence.
#[derive(Debug, Clone, Default, Serialize)]
pub struct NodeAnswer {
    pub entities: Vec<String>,
    pub time: Option<Timestamp>,
    pub count: Option<u64>,
}

impl NodeAnswer {
    fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.count.is_none()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WinnerRecord {
    pub entities: Vec<String>,
    pub time: Option<String>,
    pub count: Option<u64>,
    pub paths: Vec<String>,
    pub toolkit: String,
    pub voted: bool,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathView {
    pub text: String,
    pub sem: f64,
    pub prox: f64,
    pub score: f64,
}

/// Everything recorded about one node's execution.
#[derive(Debug, Clone, Serialize)]
pub struct NodeRecord {
    pub node_id: usize,
    pub subquestion: String,
    pub indicator: String,
    pub temporal_type: TemporalType,
    pub memory_hit: bool,
    pub seeds: Vec<String>,
    pub toolkit_calls: Vec<Value>,
    pub retrieved_facts: Vec<Vec<String>>,
    pub pool_size: usize,
    pub selected_paths: Vec<PathView>,
    pub winner: Option<WinnerRecord>,
    pub sufficiency: Vec<Value>,
    pub retrieve_again: u32,
    pub status: String,
    pub bound: Option<(String, String)>,
}

/// The full execution record of one question.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub question: String,
    pub temporal_type: TemporalType,
    pub mentions: Vec<String>,
    pub topics: Vec<String>,
    pub reused_plan: bool,
    pub tree_size: usize,
    pub nodes: Vec<NodeRecord>,
    pub chain: TemporalReasoningPath,
    pub chain_text: Vec<String>,
    pub chain_valid: bool,
    pub global_sufficient: bool,
    pub answer: Answer,
    pub reasoner_calls: Vec<CallRecord>,
    pub memory_hits: usize,
    pub memory_writes: usize,
}

/// Grounding output: topics, type, subgraph, and the decomposition tree.
pub struct Grounding {
    pub question: String,
    pub mentions: Vec<String>,
    pub date_hints: Vec<Timestamp>,
    pub links: Vec<EntityLink>,
    pub topics: Vec<EntityId>,
    pub temporal_type: TemporalType,
    pub subgraph: Subgraph,
    pub tree: QuestionTree,
    pub pristine_tree: QuestionTree,
    pub reused_plan: bool,
}

/// Single-writer wrapper around the experience pool; every retrieval and
/// write funnels through one mutex so hit-count bumps stay serialized while
/// concurrent questions share the pool.
pub struct SharedPool {
    inner: Mutex<ExperiencePool>,
}

impl SharedPool {
    pub fn new(pool: ExperiencePool) -> SharedPool {
        SharedPool { inner: Mutex::new(pool) }
    }

    pub fn with<R>(&self, f: impl FnOnce(&mut ExperiencePool) -> R) -> R {
        f(&mut self.inner.lock().expect("pool lock"))
    }

    pub fn into_inner(self) -> ExperiencePool {
        self.inner.into_inner().expect("pool lock")
    }
}

/// The engine: an immutable graph, an embedder, and configuration. One
/// engine serves any number of concurrent question runs.
pub struct Engine {
    tkg: Arc<Tkg>,
    embedder: Arc<dyn Embedder>,
    config: Config,
}

impl Engine {
    pub fn new(tkg: Arc<Tkg>, embedder: Arc<dyn Embedder>, config: Config) -> Engine {
        Engine { tkg, embedder, config }
    }

    pub fn tkg(&self) -> &Arc<Tkg> {
        &self.tkg
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    /// Phase 1: mention extraction, entity linking, subgraph construction,
    /// type classification, and decomposition (or plan reuse).
    pub fn ground(
        &self,
        question: &str,
        pool: &SharedPool,
        reasoner: &Reasoner,
    ) -> Result<Grounding, ControllerError> {
        let ab = self.config.ablations;
        let (mentions, date_hints) =
            reasoner.extract_mentions(question).map_err(phase_err("grounding"))?;
        let links = link_entities(
            &self.tkg,
            self.embedder.as_ref(),
            &mentions,
            self.config.embedding.link_threshold,
        );
        let mut topics: Vec<EntityId> = Vec::new();
        for l in &links {
            if !topics.contains(&l.entity) {
                topics.push(l.entity);
            }
        }
        if topics.is_empty() {
            return Err(ControllerError::NoTopicEntities);
        }
        let subgraph = Subgraph::build(self.tkg.clone(), &topics, self.config.retrieval.d_max)
            .map_err(|e| ControllerError::store("grounding", e))?;

        let (type_exemplars, type_warnings) = if ab.no_memory {
            (vec![], vec![])
        } else {
            pool.with(|p| {
                let got = p.retrieve_untyped(ExperienceKind::TypeExp, question, "", self.config.memory.w_exp);
                (render_exemplars(&got.exemplars), render_exemplars(&got.warnings))
            })
        };
        let temporal_type = reasoner
            .classify_type(question, type_exemplars, type_warnings)
            .map_err(phase_err("grounding"))?;

        let topic_names: Vec<String> =
            topics.iter().map(|t| self.tkg.entity_name(*t).to_string()).collect();

        let mut reused_plan = false;
        let tree = if ab.no_tree {
            single_node_tree(question, temporal_type, &topic_names, &date_hints)
        } else {
            let mut reuse: Option<QuestionTree> = None;
            let mut exemplars = Vec::new();
            if !ab.no_memory {
                pool.with(|p| {
                    let got = p.retrieve(
                        ExperienceKind::DecompExp,
                        question,
                        "",
                        temporal_type,
                        self.config.memory.w_exp,
                    );
                    if let Some(top) = got.exemplars.first() {
                        if top.question_text == question {
                            if let Ok(t) =
                                serde_json::from_value::<QuestionTree>(top.payload.clone())
                            {
                                reuse = Some(t);
                            }
                        }
                    }
                    exemplars = render_exemplars(&got.exemplars);
                });
            }
            match reuse {
                Some(t) => {
                    reused_plan = true;
                    t
                }
                None => reasoner
                    .decompose(question, temporal_type, exemplars)
                    .map_err(phase_err("grounding"))?,
            }
        };

        Ok(Grounding {
            question: question.to_string(),
            mentions,
            date_hints,
            links,
            topics,
            temporal_type,
            subgraph,
            pristine_tree: tree.clone(),
            tree,
            reused_plan,
        })
    }

    /// Phase 2-4: run the full pipeline for one question.
    pub fn answer_question(
        &self,
        question: &str,
        pool: &SharedPool,
        reasoner: &Reasoner,
    ) -> Result<(Answer, Trajectory), ControllerError> {
        let grounding = self.ground(question, pool, reasoner)?;
        let mut run = QuestionRun {
            engine: self,
            reasoner,
            pool,
            grounding,
            bindings: BTreeMap::new(),
            records: BTreeMap::new(),
            memory_hits: 0,
            memory_writes: 0,
            branch_used: 1,
            resolved_entities: Vec::new(),
            proofs: BTreeMap::new(),
        };
        run.execute_tree()?;
        run.synthesize()
    }
}

fn render_exemplars(records: &[ExperienceRecord]) -> Vec<ExemplarView> {
    records
        .iter()
        .map(|r| ExemplarView {
            question: r.question_text.clone(),
            summary: summarize_payload(r),
        })
        .collect()
}

fn summarize_payload(r: &ExperienceRecord) -> String {
    match r.kind {
        ExperienceKind::TypeExp => r.primary_type.label().to_string(),
        _ => {
            let s = r.payload.to_string();
            if s.len() > 400 {
                format!("{}...", &s[..400])
            } else {
                s
            }
        }
    }
}

/// Fallback single-node tree used by the `--no-tree` ablation: the whole
/// question as one retrieval node, object = last linked topic, constraints
/// from the question's date hints and type.
fn single_node_tree(
    question: &str,
    t: TemporalType,
    topic_names: &[String],
    dates: &[Timestamp],
) -> QuestionTree {
    let object = topic_names
        .last()
        .map(|n| Term::Entity(n.clone()))
        .unwrap_or_else(|| Term::Variable("?y".to_string()));
    let mut indicator = Indicator::new(Term::Variable("?x".to_string()), question, object, t);
    let c = |op, anchor: &Timestamp| TimeConstraint::new(op, TimeRef::Concrete(*anchor));
    match (t, dates.first(), dates.get(1)) {
        (TemporalType::Between, Some(a), Some(b)) => {
            indicator.constraints.push(TimeConstraint::between(
                TimeRef::Concrete(*a),
                TimeRef::Concrete(*b),
            ));
        }
        (TemporalType::AfterNFirst, Some(a), _) => {
            indicator.constraints.push(c(ConstraintOp::After, a));
            indicator
                .constraints
                .push(TimeConstraint::new(ConstraintOp::First, TimeRef::Var("t1".into())));
        }
        (TemporalType::BeforeNLast, Some(a), _) => {
            indicator.constraints.push(c(ConstraintOp::Before, a));
            indicator
                .constraints
                .push(TimeConstraint::new(ConstraintOp::Last, TimeRef::Var("t1".into())));
        }
        (TemporalType::Count | TemporalType::Before, Some(a), _) => {
            indicator.constraints.push(c(ConstraintOp::Before, a));
        }
        (TemporalType::After, Some(a), _) => {
            indicator.constraints.push(c(ConstraintOp::After, a));
        }
        (TemporalType::Equal | TemporalType::During, Some(a), _) => {
            indicator.constraints.push(c(ConstraintOp::SameYear, a));
        }
        _ => {}
    }
    indicator.time_vars = vec!["t1".to_string()];
    QuestionTree::single(question, indicator, Some("t1".to_string()))
}

struct QuestionRun<'a> {
    engine: &'a Engine,
    reasoner: &'a Reasoner,
    pool: &'a SharedPool,
    grounding: Grounding,
    bindings: BTreeMap<String, Timestamp>,
    records: BTreeMap<usize, NodeRecord>,
    memory_hits: usize,
    memory_writes: usize,
    branch_used: usize,
    /// Entities answered by earlier nodes, offered as later seed candidates.
    resolved_entities: Vec<String>,
    /// Solved-node evidence: the winner's answer and support paths.
    proofs: BTreeMap<usize, (NodeAnswer, Vec<TemporalPath>)>,
}

impl<'a> QuestionRun<'a> {
    fn cfg(&self) -> &Config {
        self.engine.config()
    }

    fn ablations(&self) -> Ablations {
        self.cfg().ablations
    }

    fn tkg(&self) -> &Arc<Tkg> {
        self.engine.tkg()
    }

    fn execute_tree(&mut self) -> Result<(), ControllerError> {
        loop {
            let next = self.next_pending();
            let Some(id) = next else { break };
            // A failed parent leaves this node's time variables unbound.
            let parent_failed = self.grounding.tree.node(id).parent.is_some_and(|p| {
                self.grounding.tree.node(p).status == NodeStatus::Failed
            });
            if parent_failed {
                self.grounding.tree.node_mut(id).status = NodeStatus::Failed;
                self.push_failure_record(id, "parent node failed");
                continue;
            }
            self.run_node(id)?;
        }
        Ok(())
    }

    fn next_pending(&self) -> Option<usize> {
        let tree = &self.grounding.tree;
        tree.traversal_order().into_iter().find(|&id| {
            tree.node(id).status == NodeStatus::Pending
                && tree
                    .node(id)
                    .parent
                    .map_or(true, |p| tree.node(p).status != NodeStatus::Pending)
        })
    }

    fn push_failure_record(&mut self, id: usize, note: &str) {
        let node = self.grounding.tree.node(id).clone();
        self.records.insert(id, NodeRecord {
            node_id: id,
            subquestion: node.text.clone(),
            indicator: verbalize_indicator(&node.indicator),
            temporal_type: node.indicator.temporal_type,
            memory_hit: false,
            seeds: vec![],
            toolkit_calls: vec![],
            retrieved_facts: vec![],
            pool_size: 0,
            selected_paths: vec![],
            winner: None,
            sufficiency: vec![json!({ "note": note })],
            retrieve_again: 0,
            status: "Failed".to_string(),
            bound: None,
        });
    }

    fn substituted(&self, id: usize) -> (String, Indicator) {
        let node = self.grounding.tree.node(id);
        let mut text = node.text.clone();
        for (var, ts) in &self.bindings {
            text = text.replace(&format!("{{{var}}}"), &ts.to_string());
        }
        let lookup = |v: &str| self.bindings.get(v).copied();
        (text, node.indicator.substitute(&lookup))
    }

    fn bind(&mut self, var: &str, ts: Timestamp) {
        // Once bound, a time variable never changes within a run.
        self.bindings.entry(var.to_string()).or_insert(ts);
    }

    fn retrieve_exemplars(
        &mut self,
        kind: ExperienceKind,
        q: &str,
        ind: &str,
        t: TemporalType,
    ) -> (Vec<ExemplarView>, Vec<ExemplarView>) {
        if self.ablations().no_memory {
            return (vec![], vec![]);
        }
        let w = self.cfg().memory.w_exp;
        self.pool.with(|p| {
            let got = p.retrieve(kind, q, ind, t, w);
            (render_exemplars(&got.exemplars), render_exemplars(&got.warnings))
        })
    }

    fn write_back(&mut self, draft: ExperienceDraft) {
        if self.ablations().no_memory {
            return;
        }
        let threshold = self.cfg().memory.cross_type_threshold;
        self.pool.with(|p| {
            let id = p.write_back(draft);
            p.cross_type_augment(id, threshold);
        });
        self.memory_writes += 1;
    }

    /// Memory lookup: a stored trace whose question is essentially this
    /// node's, passing the sufficiency test, short-circaits retrieval.
    fn lookup_and_test(
        &mut self,
        text: &str,
        indicator: &Indicator,
    ) -> Result<Option<(NodeAnswer, Vec<TemporalPath>)>, ControllerError> {
        if self.ablations().no_memory {
            return Ok(None);
        }
        let w = self.cfg().memory.w_exp;
        let ind_text = verbalize_indicator(indicator);
        let exemplars = self.pool.with(|p| {
            p.retrieve(ExperienceKind::TraceExp, text, &ind_text, indicator.temporal_type, w)
                .exemplars
        });
        let query_vec = self.engine.embedder.embed(text);
        for ex in exemplars {
            if crate::embedding::cosine(&ex.e_q, &query_vec) < REUSE_SIMILARITY {
                continue;
            }
            let Some((answer, paths)) = decode_trace_payload(&ex.payload) else {
                continue;
            };
            let paths_valid = !paths.is_empty() && paths.iter().all(validate_path);
            let constraints_hold = answer_in_constraint(&answer, &paths, indicator);
            let verdict = self
                .reasoner
                .check_sufficiency(
                    Scope::Local,
                    text,
                    json!({
                        "has_answer": !answer.is_empty(),
                        "paths_valid": paths_valid,
                        "constraints_hold": constraints_hold,
                    }),
                    vec![],
                )
                .map_err(phase_err("memory-lookup"))?;
            if verdict.sufficient {
                return Ok(Some((answer, paths)));
            }
        }
        Ok(None)
    }

    fn run_node(&mut self, id: usize) -> Result<(), ControllerError> {
        let (text, indicator) = self.substituted(id);
        let node_type = indicator.temporal_type;
        let ind_text = verbalize_indicator(&indicator);

        let mut record = NodeRecord {
            node_id: id,
            subquestion: text.clone(),
            indicator: ind_text.clone(),
            temporal_type: node_type,
            memory_hit: false,
            seeds: vec![],
            toolkit_calls: vec![],
            retrieved_facts: vec![],
            pool_size: 0,
            selected_paths: vec![],
            winner: None,
            sufficiency: vec![],
            retrieve_again: 0,
            status: "Pending".to_string(),
            bound: None,
        };

        // Direct reuse from memory.
        if let Some((answer, paths)) = self.lookup_and_test(&text, &indicator)? {
            self.memory_hits += 1;
            record.memory_hit = true;
            record.winner = Some(WinnerRecord {
                entities: answer.entities.clone(),
                time: answer.time.map(|t| t.to_string()),
                count: answer.count,
                paths: paths.iter().map(|p| verbalize_path(self.tkg(), p)).collect(),
                toolkit: "memory".to_string(),
                voted: false,
                reason: "reused verified trace".to_string(),
            });
            self.solve_node(id, &text, &indicator, answer, paths, &mut record, true);
            self.records.insert(id, record);
            return Ok(());
        }

        // Fresh retrieval, with bounded RetrieveAgain/Refine attempts.
        let mut attempt: u32 = 0;
        let mut working_indicator = indicator.clone();
        let mut working_text = text.clone();
        loop {
            let outcome =
                self.attempt_node(id, &working_text, &working_indicator, attempt, &mut record)?;
            match outcome {
                AttemptOutcome::Solved { answer, paths } => {
                    self.solve_node(
                        id,
                        &working_text,
                        &working_indicator,
                        answer,
                        paths,
                        &mut record,
                        false,
                    );
                    break;
                }
                AttemptOutcome::Fail => {
                    self.grounding.tree.node_mut(id).status = NodeStatus::Failed;
                    record.status = "Failed".to_string();
                    break;
                }
                AttemptOutcome::Retry(action) => {
                    if attempt >= MAX_NODE_RETRIES {
                        self.grounding.tree.node_mut(id).status = NodeStatus::Failed;
                        record.status = "Failed".to_string();
                        break;
                    }
                    match action {
                        Action::RetrieveAgain => {
                            working_indicator = widen_indicator(&working_indicator);
                            record.retrieve_again += 1;
                        }
                        Action::Refine => {
                            let refined = self
                                .reasoner
                                .refine(&working_text, "local sufficiency failed")
                                .map_err(phase_err("refine"))?;
                            self.grounding.tree.node_mut(id).text = refined.clone();
                            working_text = refined;
                        }
                        Action::Decompose => {
                            // Budget exhaustion fails the node, not the run.
                            let note = match self.decompose_node(id, &working_text, node_type) {
                                Ok(n) => format!("decomposed into {n} child node(s)"),
                                Err(e) => format!("decompose unavailable: {e}"),
                            };
                            self.grounding.tree.node_mut(id).status = NodeStatus::Failed;
                            record.status = "Failed".to_string();
                            record.sufficiency.push(json!({ "note": note }));
                            self.records.insert(id, record);
                            return Ok(());
                        }
                        Action::Accept => unreachable!("accept is not a retry"),
                    }
                    attempt += 1;
                }
            }
        }
        self.records.insert(id, record);
        Ok(())
    }

    fn attempt_node(
        &mut self,
        _id: usize,
        text: &str,
        indicator: &Indicator,
        attempt: u32,
        record: &mut NodeRecord,
    ) -> Result<AttemptOutcome, ControllerError> {
        let node_type = indicator.temporal_type;
        let ind_text = verbalize_indicator(indicator);

        // Seed selection over topics plus previously resolved entities.
        let mut seed_candidates: Vec<String> = self
            .grounding
            .topics
            .iter()
            .map(|t| self.tkg().entity_name(*t).to_string())
            .collect();
        for e in &self.resolved_entities {
            if !seed_candidates.contains(e) {
                seed_candidates.push(e.clone());
            }
        }
        let (seed_ex, _) =
            self.retrieve_exemplars(ExperienceKind::SeedExp, text, &ind_text, node_type);
        let seed_names = match self.reasoner.select_seeds(&seed_candidates, indicator, text, seed_ex)
        {
            Ok(s) => s,
            Err(ReasonerError::NoValidSeed) => {
                record.sufficiency.push(json!({ "note": "no valid seed entity" }));
                return Ok(AttemptOutcome::Fail);
            }
            Err(e) => return Err(phase_err("seed-select")(e)),
        };
        let mut seeds: Vec<EntityId> = Vec::new();
        for name in &seed_names {
            if let Some(e) = self.resolve_entity(name) {
                if self.grounding.subgraph.contains_entity(e) && !seeds.contains(&e) {
                    seeds.push(e);
                }
            }
        }
        if seeds.is_empty() {
            record.sufficiency.push(json!({ "note": "no seed resolved into the subgraph" }));
            return Ok(AttemptOutcome::Retry(Action::RetrieveAgain));
        }
        record.seeds = seeds.iter().map(|e| self.tkg().entity_name(*e).to_string()).collect();

        // Experience-guided toolkit selection.
        let (tool_ex, _) =
            self.retrieve_exemplars(ExperienceKind::ToolkitExp, text, &ind_text, node_type);
        let mut calls = self
            .reasoner
            .select_toolkits(indicator, text, node_type, tool_ex)
            .map_err(phase_err("toolkit-select"))?;
        for call in &mut calls {
            self.sanitize_call(call, &seeds);
        }
        record.toolkit_calls = calls
            .iter()
            .map(|c| {
                json!({
                    "original_name": c.original_name,
                    "name": c.name.label(),
                    "priority": c.priority,
                    "parameters": toolkits::params_to_map(&c.params),
                })
            })
            .collect();

        // Execute all calls (order-independent pure reads).
        let results = toolkits::execute_all(&self.grounding.subgraph, &calls).map_err(|e| {
            ControllerError::Phase { phase: "toolkits", message: e.to_string() }
        })?;
        record.retrieved_facts = results
            .iter()
            .map(|r| r.facts.iter().map(|f| verbalize_fact(self.tkg(), f)).collect())
            .collect();

        // Hybrid path retrieval per call, merged and re-ranked.
        let pool = self.hybrid_pool(indicator, &seeds, &results, attempt)?;
        record.pool_size = pool.len();

        // Reasoner-aware path selection over the top-W1 pool.
        let selected: Vec<ScoredPath> = if pool.is_empty() {
            vec![]
        } else {
            let cands: Vec<(String, f64)> = pool
                .iter()
                .map(|sp| (verbalize_path(self.tkg(), &sp.path), sp.score))
                .collect();
            let picks = self
                .reasoner
                .select_paths(&cands, text, &ind_text, self.cfg().retrieval.w_max)
                .map_err(phase_err("path-select"))?;
            picks.into_iter().map(|i| pool[i].clone()).collect()
        };
        record.selected_paths = selected
            .iter()
            .map(|sp| PathView {
                text: verbalize_path(self.tkg(), &sp.path),
                sem: sp.sem,
                prox: sp.prox,
                score: sp.score,
            })
            .collect();

        // Debate-vote across toolkit answers (bypassed for a single one).
        let candidates: Vec<(DebateCandidate, NodeAnswer, Vec<TemporalPath>)> = results
            .iter()
            .enumerate()
            .map(|(i, r)| self.extract_candidate(i, r, indicator))
            .collect();
        let usable: Vec<&(DebateCandidate, NodeAnswer, Vec<TemporalPath>)> =
            candidates.iter().filter(|(_, a, _)| !a.is_empty()).collect();
        let (winner_idx, voted, reason) = match usable.len() {
            0 => {
                record.sufficiency.push(json!({
                    "sufficient": false,
                    "action": "RetrieveAgain",
                    "note": "every toolkit returned an empty result",
                }));
                return Ok(AttemptOutcome::Retry(Action::RetrieveAgain));
            }
            1 => (usable[0].0.index, false, "single toolkit result".to_string()),
            _ => {
                let views: Vec<DebateCandidate> =
                    usable.iter().map(|(c, _, _)| c.clone()).collect();
                let vote = self
                    .reasoner
                    .debate_vote(text, node_type, &views)
                    .map_err(phase_err("debate-vote"))?;
                (views[vote.winning_toolkit].index, true, vote.reason)
            }
        };
        let (cand, answer, support) = &candidates[winner_idx];
        record.winner = Some(WinnerRecord {
            entities: answer.entities.clone(),
            time: answer.time.map(|t| t.to_string()),
            count: answer.count,
            paths: support.iter().map(|p| verbalize_path(self.tkg(), p)).collect(),
            toolkit: cand.toolkit.clone(),
            voted,
            reason,
        });

        // Local sufficiency.
        let paths_valid = !support.is_empty()
            && support.iter().all(validate_path)
            && selected.iter().all(|sp| validate_path(&sp.path));
        let constraints_hold = answer_in_constraint(answer, support, indicator);
        let verdict = self
            .reasoner
            .check_sufficiency(
                Scope::Local,
                text,
                json!({
                    "has_answer": !answer.is_empty(),
                    "paths_valid": paths_valid,
                    "constraints_hold": constraints_hold,
                }),
                vec![],
            )
            .map_err(phase_err("sufficiency"))?;
        record.sufficiency.push(json!({
            "sufficient": verdict.sufficient,
            "action": format!("{:?}", verdict.action),
            "note": verdict.note,
        }));
        if verdict.sufficient {
            Ok(AttemptOutcome::Solved { answer: answer.clone(), paths: support.clone() })
        } else {
            Ok(AttemptOutcome::Retry(verdict.action))
        }
    }

    /// Graph + dense retrieval per call, unioned, deduplicated, re-ranked.
    fn hybrid_pool(
        &self,
        indicator: &Indicator,
        seeds: &[EntityId],
        results: &[ToolkitResult],
        attempt: u32,
    ) -> Result<Vec<ScoredPath>, ControllerError> {
        let ab = self.ablations();
        let cfg = &self.cfg().retrieval;
        let g = &self.grounding.subgraph;
        let beam = cfg.beam << attempt.min(8);
        let mut merged: Vec<ScoredPath> = Vec::new();
        let mut seen: std::collections::HashSet<TemporalPath> = std::collections::HashSet::new();
        let windows: Vec<TimeWindow> = if results.is_empty() {
            vec![TimeWindow::default()]
        } else {
            results
                .iter()
                .map(|r| TimeWindow::new(r.call.params.after, r.call.params.before))
                .collect()
        };
        for w in windows {
            let opts = HybridOptions {
                use_graph: !ab.no_graph_retrieval,
                use_embed: !ab.no_embed_retrieval,
                depth: None,
                beam: Some(beam),
                extra_window: w,
            };
            let pool = retrieval::hybrid_retrieve_with(
                g,
                seeds,
                indicator,
                cfg,
                self.engine.embedder.as_ref(),
                &opts,
            )
            .map_err(|e| ControllerError::retrieval("retrieval", e))?;
            for sp in pool {
                if seen.insert(sp.path.clone()) {
                    merged.push(sp);
                }
            }
        }
        let tkg = self.tkg().clone();
        merged.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.path.sort_key(&tkg).cmp(&b.path.sort_key(&tkg)))
        });
        merged.truncate(cfg.w1);
        Ok(merged)
    }

    /// Fill a missing entity with the first seed and drop relation filters
    /// that match nothing in the subgraph.
    fn sanitize_call(&self, call: &mut ToolkitCall, seeds: &[EntityId]) {
        let needs_entity = !matches!(call.name, ToolkitName::DayEvents | ToolkitName::PeriodEvents);
        if needs_entity && call.params.entity.is_none() {
            if let Some(first) = seeds.first() {
                call.params.entity = Some(self.tkg().entity_name(*first).to_string());
            }
        }
        if let Some(rf) = call.params.relation_filter.clone() {
            let g = &self.grounding.subgraph;
            let any_match =
                g.facts().iter().any(|f| toolkits::relation_matches(g, &rf, f));
            if !any_match {
                call.params.relation_filter = None;
            }
        }
    }

    fn resolve_entity(&self, name: &str) -> Option<EntityId> {
        if let Some(e) = self.tkg().entity_id(name) {
            return Some(e);
        }
        link_entities(
            self.tkg(),
            self.engine.embedder.as_ref(),
            &[name.to_string()],
            self.cfg().embedding.link_threshold,
        )
        .first()
        .map(|l| l.entity)
    }

    /// Extract a debate candidate from one toolkit result: the answer-side
    /// entities, the type-appropriate representative time, and the
    /// supporting facts as proof segments.
    fn extract_candidate(
        &self,
        index: usize,
        result: &ToolkitResult,
        indicator: &Indicator,
    ) -> (DebateCandidate, NodeAnswer, Vec<TemporalPath>) {
        let tkg = self.tkg();
        let t = indicator.temporal_type;
        let mut facts = result.facts.clone();
        facts.sort_by(|a, b| tkg.canonical_key(a).cmp(&tkg.canonical_key(b)));

        let is_count = result.call.name == ToolkitName::Count;
        let (support, answer) = if is_count {
            let count = facts.len() as u64;
            (
                facts.clone(),
                NodeAnswer {
                    entities: vec![],
                    time: facts.first().map(|f| f.ts),
                    count: Some(count),
                },
            )
        } else if facts.is_empty() {
            (vec![], NodeAnswer::default())
        } else {
            let picked: Vec<Fact> = match t {
                TemporalType::AfterNFirst | TemporalType::First | TemporalType::Equal
                | TemporalType::During => vec![facts[0]],
                TemporalType::BeforeNLast | TemporalType::Last => vec![*facts.last().unwrap()],
                _ => facts.clone(),
            };
            let mut entities = Vec::new();
            for f in &picked {
                let name = tkg.entity_name(self.variable_entity(f, indicator)).to_string();
                if !entities.contains(&name) {
                    entities.push(name);
                }
            }
            let time = picked.first().map(|f| f.ts);
            (picked, NodeAnswer { entities, time, count: None })
        };
        let paths: Vec<TemporalPath> =
            support.iter().map(|f| TemporalPath::single(*f)).collect();
        let valid = !answer.is_empty()
            && support.iter().all(|f| {
                indicator.constraints.iter().all(|c| c.holds(&f.ts))
            });
        let expected_len_ok = match result.call.params.limit {
            Some(l) => result.facts.len() == l,
            None => !result.facts.is_empty(),
        };
        let candidate = DebateCandidate {
            index,
            toolkit: result.call.original_name.clone(),
            priority: result.call.priority,
            entities: answer.entities.clone(),
            time: answer.time,
            count: answer.count,
            valid,
            expected_len_ok,
        };
        (candidate, answer, paths)
    }

    /// Which endpoint of a fact answers the indicator's variable side.
    fn variable_entity(&self, fact: &Fact, indicator: &Indicator) -> EntityId {
        let tkg = self.tkg();
        if let Some(name) = indicator.concrete_entity() {
            if tkg.entity_name(fact.head) == name {
                return fact.tail;
            }
            if tkg.entity_name(fact.tail) == name {
                return fact.head;
            }
        }
        if indicator.variable_side_is_subject() {
            fact.head
        } else {
            fact.tail
        }
    }

    fn solve_node(
        &mut self,
        id: usize,
        text: &str,
        indicator: &Indicator,
        answer: NodeAnswer,
        paths: Vec<TemporalPath>,
        record: &mut NodeRecord,
        from_memory: bool,
    ) {
        self.grounding.tree.node_mut(id).status = NodeStatus::Solved;
        record.status = "Solved".to_string();
        if let (Some(var), Some(ts)) = (self.grounding.tree.node(id).time_var.clone(), answer.time)
        {
            self.bind(&var, ts);
            record.bound = Some((var, ts.to_string()));
        }
        for e in &answer.entities {
            if !self.resolved_entities.contains(e) {
                self.resolved_entities.push(e.clone());
            }
        }
        if !from_memory {
            let payload = encode_trace_payload(&answer, &paths);
            self.write_back(ExperienceDraft::verified(
                ExperienceKind::TraceExp,
                text,
                verbalize_indicator(indicator),
                indicator.temporal_type,
                payload,
            ));
            if !record.toolkit_calls.is_empty() {
                self.write_back(ExperienceDraft::verified(
                    ExperienceKind::ToolkitExp,
                    text,
                    verbalize_indicator(indicator),
                    indicator.temporal_type,
                    json!({ "selected_toolkits": record.toolkit_calls }),
                ));
            }
            if !record.seeds.is_empty() {
                self.write_back(ExperienceDraft::verified(
                    ExperienceKind::SeedExp,
                    text,
                    verbalize_indicator(indicator),
                    indicator.temporal_type,
                    json!({ "seeds": record.seeds }),
                ));
            }
        }
        // Keep the stored node answer for synthesis.
        record.winner.get_or_insert_with(|| WinnerRecord {
            entities: answer.entities.clone(),
            time: answer.time.map(|t| t.to_string()),
            count: answer.count,
            paths: paths.iter().map(|p| verbalize_path(self.tkg(), p)).collect(),
            toolkit: "memory".to_string(),
            voted: false,
            reason: String::new(),
        });
        self.proofs.insert(id, (answer, paths));
    }

    /// Decompose action: append the node's sub-decomposition as children,
    /// respecting the depth and branch budgets.
    fn decompose_node(
        &mut self,
        id: usize,
        text: &str,
        node_type: TemporalType,
    ) -> Result<usize, ControllerError> {
        let depth = self.grounding.tree.node(id).depth;
        let cfg = &self.engine.config().retrieval;
        if depth + 1 >= cfg.d_max.max(1) || self.branch_used >= cfg.b_max {
            return Err(ControllerError::Phase {
                phase: "decompose",
                message: "depth or branch budget exhausted".to_string(),
            });
        }
        let (ex, _) = self.retrieve_exemplars(ExperienceKind::DecompExp, text, "", node_type);
        let sub = self
            .reasoner
            .decompose(text, node_type, ex)
            .map_err(phase_err("decompose"))?;
        let budget_left = cfg.b_max - self.branch_used;
        let take = sub.nodes.len().min(budget_left);
        self.branch_used += take.saturating_sub(1);
        let base = self.grounding.tree.nodes.len();
        let mut prev = id;
        for (i, mut n) in sub.nodes.into_iter().take(take).enumerate() {
            let nid = base + i;
            n.id = nid;
            n.parent = Some(prev);
            n.depth = self.grounding.tree.node(prev).depth + 1;
            n.children = vec![];
            n.status = NodeStatus::Pending;
            self.grounding.tree.node_mut(prev).children.push(nid);
            self.grounding.tree.nodes.push(n);
            prev = nid;
        }
        self.grounding
            .tree
            .validate()
            .map_err(|m| ControllerError::Phase { phase: "decompose", message: m })?;
        Ok(take)
    }

    /// Phase 2 tail: chain assembly, global sufficiency, answer synthesis,
    /// and question-level write-back.
    fn synthesize(mut self) -> Result<(Answer, Trajectory), ControllerError> {
        let tree = &self.grounding.tree;
        // Segments are the solved nodes' winning support paths, ordered by
        // segment time (stable by node order). Anchor nodes can resolve
        // later timestamps than their dependents' evidence (a before-bound
        // does), so node order alone would violate the chain invariant the
        // merged path must satisfy.
        let mut segments: Vec<(Timestamp, usize, TemporalPath)> = Vec::new();
        for (order_idx, id) in tree.traversal_order().into_iter().enumerate() {
            if tree.node(id).status != NodeStatus::Solved {
                continue;
            }
            if let Some((_, paths)) = self.proofs.get(&id) {
                for p in paths {
                    if let Some(ts) = p.last_time() {
                        segments.push((ts, order_idx, p.clone()));
                    }
                }
            }
        }
        segments.sort_by(|a, b| a.0.start().cmp(&b.0.start()).then(a.1.cmp(&b.1)));
        let mut chain_paths: Vec<TemporalPath> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (_, _, p) in segments {
            if seen.insert(p.clone()) {
                chain_paths.push(p);
            }
        }
        let chain = TemporalReasoningPath::new(chain_paths);
        let chain_valid = validate_trp(&chain);
        if !chain_valid && !chain.segments.is_empty() {
            return Err(ControllerError::IncoherentChain);
        }
        let chain_text: Vec<String> =
            chain.segments.iter().map(|p| verbalize_path(self.tkg(), p)).collect();

        let required_failed = self.any_required_failed();
        let all_solved =
            tree.nodes.iter().all(|n| n.status == NodeStatus::Solved) && !tree.nodes.is_empty();
        let verdict = self
            .reasoner
            .check_sufficiency(
                Scope::Global,
                &self.grounding.question,
                json!({
                    "all_solved": all_solved,
                    "chain_valid": chain_valid && !chain.segments.is_empty(),
                    "any_failed": required_failed,
                }),
                vec![],
            )
            .map_err(phase_err("synthesis"))?;

        let summary = self.trajectory_summary(&chain_text);
        let root_indicator = verbalize_indicator(&tree.node(tree.root).indicator);
        let generated = self
            .reasoner
            .generate_answer(&self.grounding.question, &root_indicator, &summary, vec![])
            .map_err(phase_err("synthesis"))?;

        // Grounding guard: answer entities must appear in trajectory
        // evidence; anything else is dropped with a note.
        let evidence_entities = self.evidence_entities();
        let mut rationale = generated.rationale.clone();
        let mut entities: Vec<String> = Vec::new();
        for e in generated.entities {
            if evidence_entities.contains(&e) {
                entities.push(e);
            } else {
                rationale.push_str(&format!(" [dropped ungrounded entity {e:?}]"));
            }
        }
        let answer = Answer {
            entities,
            timestamps: generated.timestamps,
            count: generated.count,
            rationale,
            sufficient: verdict.sufficient,
        };

        // Question-level write-back of the verified trace.
        if verdict.sufficient {
            let root_answer = NodeAnswer {
                entities: answer.entities.clone(),
                time: None,
                count: answer.count,
            };
            self.write_back(ExperienceDraft::verified(
                ExperienceKind::TraceExp,
                &self.grounding.question,
                &root_indicator,
                self.grounding.temporal_type,
                encode_trace_payload(&root_answer, &chain.segments),
            ));
            if !self.grounding.reused_plan && self.grounding.tree.len() > 0 {
                self.write_back(ExperienceDraft::verified(
                    ExperienceKind::DecompExp,
                    &self.grounding.question,
                    "",
                    self.grounding.temporal_type,
                    serde_json::to_value(&self.grounding.pristine_tree)
                        .expect("tree serializes"),
                ));
            }
            self.write_back(ExperienceDraft::verified(
                ExperienceKind::TypeExp,
                &self.grounding.question,
                "",
                self.grounding.temporal_type,
                json!({ "type": self.grounding.temporal_type }),
            ));
        }

        let trajectory = Trajectory {
            question: self.grounding.question.clone(),
            temporal_type: self.grounding.temporal_type,
            mentions: self.grounding.mentions.clone(),
            topics: self
                .grounding
                .topics
                .iter()
                .map(|t| self.tkg().entity_name(*t).to_string())
                .collect(),
            reused_plan: self.grounding.reused_plan,
            tree_size: self.grounding.tree.len(),
            nodes: self.records.values().cloned().collect(),
            chain,
            chain_text,
            chain_valid,
            global_sufficient: verdict.sufficient,
            answer: answer.clone(),
            reasoner_calls: self.reasoner.calls(),
            memory_hits: self.memory_hits,
            memory_writes: self.memory_writes,
        };
        Ok((answer, trajectory))
    }

    /// A node is required when a descendant references its time variable,
    /// or it is the final node of the traversal (it produces the answer).
    fn any_required_failed(&self) -> bool {
        let tree = &self.grounding.tree;
        let order = tree.traversal_order();
        let last = order.last().copied();
        order.into_iter().any(|id| {
            let n = tree.node(id);
            if n.status != NodeStatus::Failed {
                return false;
            }
            if Some(id) == last {
                return true;
            }
            match &n.time_var {
                Some(var) => self.var_referenced_below(id, var),
                None => false,
            }
        })
    }

    fn var_referenced_below(&self, id: usize, var: &str) -> bool {
        let tree = &self.grounding.tree;
        let mut stack = tree.node(id).children.clone();
        while let Some(c) = stack.pop() {
            let n = tree.node(c);
            let references = n.text.contains(&format!("{{{var}}}"))
                || n.indicator.constraints.iter().any(|con| {
                    matches!(&con.anchor, TimeRef::Var(v) if v == var)
                        || matches!(&con.bound2, Some(TimeRef::Var(v)) if v == var)
                });
            if references {
                return true;
            }
            stack.extend(n.children.iter().copied());
        }
        false
    }

    fn evidence_entities(&self) -> std::collections::BTreeSet<String> {
        let mut out = std::collections::BTreeSet::new();
        for (_, (answer, paths)) in &self.proofs {
            for e in &answer.entities {
                out.insert(e.clone());
            }
            for p in paths {
                for s in &p.steps {
                    out.insert(self.tkg().entity_name(s.fact.head).to_string());
                    out.insert(self.tkg().entity_name(s.fact.tail).to_string());
                }
            }
        }
        out
    }

    fn trajectory_summary(&self, chain_text: &[String]) -> TrajectorySummary {
        let tree = &self.grounding.tree;
        let nodes = tree
            .traversal_order()
            .into_iter()
            .map(|id| {
                let n = tree.node(id);
                let (entities, time, count) = match self.proofs.get(&id) {
                    Some((a, _)) => (
                        a.entities.clone(),
                        a.time.map(|t| t.to_string()),
                        a.count,
                    ),
                    None => (vec![], None, None),
                };
                crate::reasoner::NodeSummaryView {
                    text: n.text.clone(),
                    entities,
                    time,
                    count,
                    solved: n.status == NodeStatus::Solved,
                }
            })
            .collect();
        TrajectorySummary { nodes, chain: chain_text.to_vec() }
    }
}

enum AttemptOutcome {
    Solved { answer: NodeAnswer, paths: Vec<TemporalPath> },
    Retry(Action),
    Fail,
}

/// Widen every concrete window anchor by one granularity step (day to
/// month, month to year, year to the neighbouring year), the RetrieveAgain
/// rule. Equality constraints coarsen and eventually drop.
pub fn widen_indicator(indicator: &Indicator) -> Indicator {
    let mut out = indicator.clone();
    let mut widened: Vec<TimeConstraint> = Vec::new();
    for c in &out.constraints {
        let mut c = c.clone();
        match c.op {
            ConstraintOp::After => {
                if let Some(a) = c.anchor.concrete() {
                    c.anchor = TimeRef::Concrete(step_back(&a));
                }
            }
            ConstraintOp::Before => {
                if let Some(b) = c.anchor.concrete() {
                    c.anchor = TimeRef::Concrete(step_forward(&b));
                }
            }
            ConstraintOp::Between => {
                if let Some(a) = c.anchor.concrete() {
                    c.anchor = TimeRef::Concrete(step_back(&a));
                }
                if let Some(b) = c.bound2.as_ref().and_then(|b| b.concrete()) {
                    c.bound2 = Some(TimeRef::Concrete(step_forward(&b)));
                }
            }
            ConstraintOp::Equal | ConstraintOp::SameMonth => {
                if let Some(a) = c.anchor.concrete() {
                    match coarsen(&a) {
                        Some(w) => {
                            c.op = if w.granularity() == Granularity::Year {
                                ConstraintOp::SameYear
                            } else {
                                ConstraintOp::SameMonth
                            };
                            c.anchor = TimeRef::Concrete(w);
                        }
                        None => continue,
                    }
                }
            }
            ConstraintOp::SameYear => continue,
            ConstraintOp::First | ConstraintOp::Last => {}
        }
        widened.push(c);
    }
    out.constraints = widened;
    out
}

fn coarsen(t: &Timestamp) -> Option<Timestamp> {
    match t.granularity() {
        Granularity::Day => Some(Timestamp::month(t.year_value(), t.month_value().unwrap()).unwrap()),
        Granularity::Month => Some(Timestamp::year(t.year_value())),
        Granularity::Year => None,
    }
}

/// One granularity-step earlier covering bound for after-anchors.
fn step_back(t: &Timestamp) -> Timestamp {
    match t.granularity() {
        Granularity::Day => {
            let (y, m) = (t.year_value(), t.month_value().unwrap());
            if m == 1 {
                Timestamp::month(y - 1, 12).unwrap()
            } else {
                Timestamp::month(y, m - 1).unwrap()
            }
        }
        Granularity::Month => Timestamp::year(t.year_value() - 1),
        Granularity::Year => Timestamp::year(t.year_value() - 1),
    }
}

/// One granularity-step later covering bound for before-anchors.
fn step_forward(t: &Timestamp) -> Timestamp {
    match t.granularity() {
        Granularity::Day => {
            let (y, m) = (t.year_value(), t.month_value().unwrap());
            if m == 12 {
                Timestamp::month(y + 1, 1).unwrap()
            } else {
                Timestamp::month(y, m + 1).unwrap()
            }
        }
        Granularity::Month => Timestamp::year(t.year_value() + 1),
        Granularity::Year => Timestamp::year(t.year_value() + 1),
    }
}

fn encode_trace_payload(answer: &NodeAnswer, paths: &[TemporalPath]) -> Value {
    json!({
        "answer": {
            "entities": answer.entities,
            "time": answer.time.map(|t| t.to_string()),
            "count": answer.count,
        },
        "paths": serde_json::to_value(paths).expect("paths serialize"),
    })
}

fn decode_trace_payload(payload: &Value) -> Option<(NodeAnswer, Vec<TemporalPath>)> {
    let a = payload.get("answer")?;
    let entities = a
        .get("entities")?
        .as_array()?
        .iter()
        .filter_map(Value::as_str)
        .map(str::to_string)
        .collect();
    let time = a
        .get("time")
        .and_then(Value::as_str)
        .and_then(|s| crate::store::parse_timestamp(s).ok());
    let count = a.get("count").and_then(Value::as_u64);
    let paths: Vec<TemporalPath> =
        serde_json::from_value(payload.get("paths")?.clone()).ok()?;
    Some((NodeAnswer { entities, time, count }, paths))
}

fn answer_in_constraint(
    answer: &NodeAnswer,
    paths: &[TemporalPath],
    indicator: &Indicator,
) -> bool {
    if answer.is_empty() {
        return false;
    }
    let times: Vec<Timestamp> = paths.iter().filter_map(|p| p.last_time()).collect();
    if times.is_empty() {
        return answer.time.map_or(true, |t| {
            indicator.constraints.iter().all(|c| c.holds(&t))
        });
    }
    times.iter().all(|t| indicator.constraints.iter().all(|c| c.holds(t)))
}
