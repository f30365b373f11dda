//! Self-evolving experience pool: type-filtered dual-embedding retrieval,
//! a hybrid similarity/hit-frequency buffer, write-back of verified traces,
//! cross-type augmentation, decay-based pruning, and JSONL persistence.
//!
//! Retrieval ranks the high-frequency buffer first (by
//! `λ_sim·cos(e_q) + λ_hit·hits/max_hits`), then the per-type store by the
//! averaged dual-embedding similarity `0.5·cos(e_q) + 0.5·cos(e_I)`.
//! Verified records are exemplars; incorrect ones come back separately as
//! warnings and are never mixed into the exemplar list.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::embedding::{cosine, Embedder, Vector};
use crate::indicator::TemporalType;

/// Persistence schema version stamped on every record.
pub const SCHEMA_VERSION: u32 = 1;

/// Default bounded-buffer capacity.
pub const DEFAULT_BUFFER_CAPACITY: usize = 200;

#[derive(Debug, thiserror::Error)]
pub enum MemoryError {
    #[error("corrupt record at line {line}: {message}")]
    CorruptRecord { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// What kind of experience a record captures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExperienceKind {
    /// Question-to-temporal-type classifications.
    TypeExp,
    /// Decomposition plans.
    DecompExp,
    /// Toolkit selections.
    ToolkitExp,
    /// Seed selections.
    SeedExp,
    /// Full verified traces: answer plus proof paths.
    TraceExp,
}

impl ExperienceKind {
    pub const ALL: [ExperienceKind; 5] = [
        ExperienceKind::TypeExp,
        ExperienceKind::DecompExp,
        ExperienceKind::ToolkitExp,
        ExperienceKind::SeedExp,
        ExperienceKind::TraceExp,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Verified,
    Incorrect,
}

/// One stored experience.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperienceRecord {
    pub id: u64,
    pub kind: ExperienceKind,
    pub question_text: String,
    pub indicator_text: String,
    pub primary_type: TemporalType,
    #[serde(default)]
    pub secondary_types: BTreeSet<TemporalType>,
    /// Kind-specific structured content (tree, toolkit calls, answer+paths).
    pub payload: Value,
    pub e_q: Vector,
    pub e_i: Vector,
    pub sufficient: bool,
    pub outcome: Outcome,
    pub hit_count: u64,
    pub created_seq: u64,
    pub last_used_seq: u64,
}

impl ExperienceRecord {
    pub fn matches_type(&self, t: TemporalType) -> bool {
        self.primary_type == t || self.secondary_types.contains(&t)
    }
}

/// Draft of a record before insertion assigns id, sequence, and embeddings.
#[derive(Debug, Clone)]
pub struct ExperienceDraft {
    pub kind: ExperienceKind,
    pub question_text: String,
    pub indicator_text: String,
    pub primary_type: TemporalType,
    pub payload: Value,
    pub outcome: Outcome,
}

impl ExperienceDraft {
    pub fn verified(
        kind: ExperienceKind,
        question: impl Into<String>,
        indicator: impl Into<String>,
        primary_type: TemporalType,
        payload: Value,
    ) -> Self {
        ExperienceDraft {
            kind,
            question_text: question.into(),
            indicator_text: indicator.into(),
            primary_type,
            payload,
            outcome: Outcome::Verified,
        }
    }
}

/// Knobs for the memory layer; defaults follow the reference configuration
/// (buffer 200, λ_sim 0.6, λ_hit 0.4, W_exp 10).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MemoryConfig {
    pub buffer_capacity: usize,
    pub lambda_sim: f64,
    pub lambda_hit: f64,
    pub w_exp: usize,
    pub cross_type_threshold: f64,
    pub decay: f64,
    pub priority_floor: f64,
    pub min_keep: u64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        MemoryConfig {
            buffer_capacity: DEFAULT_BUFFER_CAPACITY,
            lambda_sim: 0.6,
            lambda_hit: 0.4,
            w_exp: 10,
            cross_type_threshold: 0.8,
            decay: 0.9,
            priority_floor: 0.05,
            min_keep: 5,
        }
    }
}

/// Hybrid buffer ranking score:
/// `λ_sim·cos(e_q, e_record) + λ_hit·(hits / max_hits_in_buffer)`.
/// The hit term normalizes by the buffer's max so the score stays in [0,1];
/// it is 0 while the buffer has no hits at all.
pub fn buffer_score(
    record: &ExperienceRecord,
    query_q: &Vector,
    lambda_sim: f64,
    lambda_hit: f64,
    max_hits_in_buffer: u64,
) -> f64 {
    let sim = cosine(&record.e_q, query_q);
    let hit = if max_hits_in_buffer == 0 {
        0.0
    } else {
        record.hit_count as f64 / max_hits_in_buffer as f64
    };
    lambda_sim * sim + lambda_hit * hit
}

/// The experience pool. Reads are cheap; mutation (insertions, hit bumps,
/// adaptation) must be externally serialized — the controller wraps the
/// pool in a mutex and funnels every operation through it.
pub struct ExperiencePool {
    cfg: MemoryConfig,
    embedder: Arc<dyn Embedder>,
    records: BTreeMap<u64, ExperienceRecord>,
    /// (kind, type) -> record ids, the type-filter index.
    by_kind_type: HashMap<(ExperienceKind, TemporalType), Vec<u64>>,
    /// Dedup index over (kind, question, indicator).
    by_content: HashMap<(ExperienceKind, String, String), u64>,
    buffer: BTreeSet<u64>,
    next_id: u64,
    seq: u64,
}

/// Result of one retrieval: ranked exemplars and separated warnings.
#[derive(Debug, Clone)]
pub struct Retrieved {
    pub exemplars: Vec<ExperienceRecord>,
    pub warnings: Vec<ExperienceRecord>,
}

impl ExperiencePool {
    pub fn new(cfg: MemoryConfig, embedder: Arc<dyn Embedder>) -> Self {
        ExperiencePool {
            cfg,
            embedder,
            records: BTreeMap::new(),
            by_kind_type: HashMap::new(),
            by_content: HashMap::new(),
            buffer: BTreeSet::new(),
            next_id: 1,
            seq: 0,
        }
    }

    pub fn config(&self) -> &MemoryConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn buffer_contains(&self, id: u64) -> bool {
        self.buffer.contains(&id)
    }

    pub fn record(&self, id: u64) -> Option<&ExperienceRecord> {
        self.records.get(&id)
    }

    pub fn records(&self) -> impl Iterator<Item = &ExperienceRecord> {
        self.records.values()
    }

    fn bump_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    /// Write back one experience. Re-writing the same (kind, question,
    /// indicator) merges hit stats into the existing record and returns its
    /// id. New records join the store, the type index, and the buffer;
    /// overflow evicts the buffer's lowest (hit_count, last_used_seq).
    pub fn write_back(&mut self, draft: ExperienceDraft) -> u64 {
        let seq = self.bump_seq();
        let key = (draft.kind, draft.question_text.clone(), draft.indicator_text.clone());
        if let Some(&id) = self.by_content.get(&key) {
            let rec = self.records.get_mut(&id).expect("content index consistent");
            rec.hit_count += 1;
            rec.last_used_seq = seq;
            rec.sufficient = rec.sufficient || draft.outcome == Outcome::Verified;
            self.buffer.insert(id);
            self.evict_overflow();
            return id;
        }
        let id = self.next_id;
        self.next_id += 1;
        let record = ExperienceRecord {
            id,
            kind: draft.kind,
            e_q: self.embedder.embed(&draft.question_text),
            e_i: self.embedder.embed(&draft.indicator_text),
            question_text: draft.question_text,
            indicator_text: draft.indicator_text,
            primary_type: draft.primary_type,
            secondary_types: BTreeSet::new(),
            payload: draft.payload,
            sufficient: draft.outcome == Outcome::Verified,
            outcome: draft.outcome,
            hit_count: 0,
            created_seq: seq,
            last_used_seq: seq,
        };
        self.index_record(&record);
        self.by_content.insert(key, id);
        self.records.insert(id, record);
        self.buffer.insert(id);
        self.evict_overflow();
        id
    }

    fn index_record(&mut self, record: &ExperienceRecord) {
        self.by_kind_type
            .entry((record.kind, record.primary_type))
            .or_default()
            .push(record.id);
        for &t in &record.secondary_types {
            self.by_kind_type.entry((record.kind, t)).or_default().push(record.id);
        }
    }

    fn rebuild_indexes(&mut self) {
        self.by_kind_type.clear();
        self.by_content.clear();
        let records: Vec<ExperienceRecord> = self.records.values().cloned().collect();
        for r in &records {
            self.index_record(r);
            self.by_content
                .insert((r.kind, r.question_text.clone(), r.indicator_text.clone()), r.id);
        }
    }

    fn evict_overflow(&mut self) {
        while self.buffer.len() > self.cfg.buffer_capacity {
            let evict = self
                .buffer
                .iter()
                .copied()
                .min_by_key(|id| {
                    let r = &self.records[id];
                    (r.hit_count, r.last_used_seq, *id)
                })
                .expect("buffer nonempty");
            self.buffer.remove(&evict);
        }
    }

    fn eligible_ids(&self, kind: ExperienceKind, t: Option<TemporalType>) -> Vec<u64> {
        let mut ids: Vec<u64> = TemporalType::ALL
            .iter()
            .filter_map(|ty| self.by_kind_type.get(&(kind, *ty)))
            .flatten()
            .copied()
            .collect();
        ids.sort_unstable();
        ids.dedup();
        if let Some(t) = t {
            ids.retain(|id| self.records[id].matches_type(t));
        }
        ids
    }

    /// Type-filtered retrieval with the documented two-stage ranking.
    /// Retrieved records (exemplars and warnings) get their hit counters
    /// and last-used sequence bumped.
    pub fn retrieve(
        &mut self,
        kind: ExperienceKind,
        query_text: &str,
        indicator_text: &str,
        t: TemporalType,
        w_exp: usize,
    ) -> Retrieved {
        self.retrieve_inner(kind, query_text, indicator_text, Some(t), w_exp)
    }

    /// Retrieval without the type filter, for the one consumer that runs
    /// before a type exists: exemplar lookup for type classification.
    pub fn retrieve_untyped(
        &mut self,
        kind: ExperienceKind,
        query_text: &str,
        indicator_text: &str,
        w_exp: usize,
    ) -> Retrieved {
        self.retrieve_inner(kind, query_text, indicator_text, None, w_exp)
    }

    fn retrieve_inner(
        &mut self,
        kind: ExperienceKind,
        query_text: &str,
        indicator_text: &str,
        t: Option<TemporalType>,
        w_exp: usize,
    ) -> Retrieved {
        let ranked = self.rank_inner(kind, query_text, indicator_text, t);
        let mut exemplars = Vec::new();
        let mut warnings = Vec::new();
        for id in ranked {
            let r = &self.records[&id];
            match r.outcome {
                Outcome::Verified if exemplars.len() < w_exp => exemplars.push(id),
                Outcome::Incorrect if warnings.len() < w_exp => warnings.push(id),
                _ => {}
            }
        }
        let seq = self.bump_seq();
        let mut materialize = |ids: &[u64]| -> Vec<ExperienceRecord> {
            ids.iter()
                .map(|id| {
                    let r = self.records.get_mut(id).expect("ranked ids exist");
                    r.hit_count += 1;
                    r.last_used_seq = seq;
                    r.clone()
                })
                .collect()
        };
        Retrieved { exemplars: materialize(&exemplars), warnings: materialize(&warnings) }
    }

    /// The ranking behind [`ExperiencePool::retrieve`], exposed so tests can
    /// compare it against a brute-force oracle without mutating hit stats:
    /// buffer residents first, by buffer score descending, then the rest by
    /// `0.5·cos(e_q) + 0.5·cos(e_I)` descending; all ties by id ascending.
    pub fn rank(
        &self,
        kind: ExperienceKind,
        query_text: &str,
        indicator_text: &str,
        t: TemporalType,
    ) -> Vec<u64> {
        self.rank_inner(kind, query_text, indicator_text, Some(t))
    }

    fn rank_inner(
        &self,
        kind: ExperienceKind,
        query_text: &str,
        indicator_text: &str,
        t: Option<TemporalType>,
    ) -> Vec<u64> {
        let q = self.embedder.embed(query_text);
        let i = self.embedder.embed(indicator_text);
        let eligible = self.eligible_ids(kind, t);
        let max_hits = self
            .buffer
            .iter()
            .map(|id| self.records[id].hit_count)
            .max()
            .unwrap_or(0);
        let mut in_buffer: Vec<(f64, u64)> = Vec::new();
        let mut outside: Vec<(f64, u64)> = Vec::new();
        for id in eligible {
            let r = &self.records[&id];
            if self.buffer.contains(&id) {
                let s = buffer_score(r, &q, self.cfg.lambda_sim, self.cfg.lambda_hit, max_hits);
                in_buffer.push((s, id));
            } else {
                let s = 0.5 * cosine(&r.e_q, &q) + 0.5 * cosine(&r.e_i, &i);
                outside.push((s, id));
            }
        }
        let by_score_desc = |a: &(f64, u64), b: &(f64, u64)| {
            b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1))
        };
        in_buffer.sort_by(by_score_desc);
        outside.sort_by(by_score_desc);
        in_buffer.into_iter().chain(outside).map(|(_, id)| id).collect()
    }

    /// Annotate `record_id` with every other type whose verified exemplars
    /// contain an indicator embedding within `sim_threshold` of this one.
    /// Returns the set of types added.
    pub fn cross_type_augment(
        &mut self,
        record_id: u64,
        sim_threshold: f64,
    ) -> BTreeSet<TemporalType> {
        let Some(record) = self.records.get(&record_id).cloned() else {
            return BTreeSet::new();
        };
        let mut added = BTreeSet::new();
        for t in TemporalType::ALL {
            if t == record.primary_type || record.secondary_types.contains(&t) {
                continue;
            }
            let best = self
                .records
                .values()
                .filter(|r| {
                    r.id != record_id && r.outcome == Outcome::Verified && r.primary_type == t
                })
                .map(|r| cosine(&record.e_i, &r.e_i))
                .fold(f64::NEG_INFINITY, f64::max);
            if best >= sim_threshold {
                added.insert(t);
            }
        }
        if !added.is_empty() {
            let rec = self.records.get_mut(&record_id).expect("record exists");
            for &t in &added {
                rec.secondary_types.insert(t);
            }
            let rec = rec.clone();
            for &t in &added {
                self.by_kind_type.entry((rec.kind, t)).or_default().push(rec.id);
            }
        }
        added
    }

    /// Continual adaptation: each record's effective priority is
    /// `(1 + hits) · decay^(seq_now − last_used_seq)`. Buffer residents
    /// whose priority fell below the floor and whose age exceeds `min_keep`
    /// leave the buffer (the archival store keeps them); indexes are
    /// rebuilt. Returns the number of pruned buffer entries.
    pub fn adapt(&mut self, decay: f64, min_keep: u64) -> usize {
        let now = self.bump_seq();
        let mut pruned = 0;
        let ids: Vec<u64> = self.buffer.iter().copied().collect();
        for id in ids {
            let r = &self.records[&id];
            let idle = now.saturating_sub(r.last_used_seq);
            let age = now.saturating_sub(r.created_seq);
            let priority = (1.0 + r.hit_count as f64) * decay.powi(idle as i32);
            if priority < self.cfg.priority_floor && age > min_keep {
                self.buffer.remove(&id);
                pruned += 1;
            }
        }
        self.rebuild_indexes();
        pruned
    }

    /// Serialize as JSONL: a header line then one record per line,
    /// embeddings included.
    pub fn persist<W: Write>(&self, mut sink: W) -> Result<(), MemoryError> {
        let header = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "next_id": self.next_id,
            "seq": self.seq,
            "buffer": self.buffer.iter().collect::<Vec<_>>(),
        });
        writeln!(sink, "{header}")?;
        for r in self.records.values() {
            writeln!(sink, "{}", serde_json::to_string(r).expect("records serialize"))?;
        }
        Ok(())
    }

    /// Rebuild a pool from [`ExperiencePool::persist`] output. Records
    /// missing embeddings (hand-written cold-start exemplars) get them
    /// computed from their texts with the configured embedder.
    pub fn load<R: BufRead>(
        source: R,
        cfg: MemoryConfig,
        embedder: Arc<dyn Embedder>,
    ) -> Result<ExperiencePool, MemoryError> {
        let mut pool = ExperiencePool::new(cfg, embedder);
        let mut buffer_ids: Option<Vec<u64>> = None;
        for (idx, line) in source.lines().enumerate() {
            let lineno = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let value: Value = serde_json::from_str(&line).map_err(|e| {
                MemoryError::CorruptRecord { line: lineno, message: e.to_string() }
            })?;
            if lineno == 1 && value.get("schema_version").is_some() && value.get("id").is_none() {
                pool.next_id =
                    value.get("next_id").and_then(Value::as_u64).unwrap_or(1);
                pool.seq = value.get("seq").and_then(Value::as_u64).unwrap_or(0);
                buffer_ids = value.get("buffer").and_then(Value::as_array).map(|a| {
                    a.iter().filter_map(Value::as_u64).collect()
                });
                continue;
            }
            let record = parse_record(value, pool.embedder.as_ref())
                .map_err(|message| MemoryError::CorruptRecord { line: lineno, message })?;
            pool.next_id = pool.next_id.max(record.id + 1);
            pool.seq = pool.seq.max(record.last_used_seq).max(record.created_seq);
            pool.records.insert(record.id, record);
        }
        match buffer_ids {
            Some(ids) => {
                pool.buffer = ids.into_iter().filter(|id| pool.records.contains_key(id)).collect();
            }
            // No header (hand-written exemplar file): everything starts hot.
            None => pool.buffer = pool.records.keys().copied().collect(),
        }
        pool.rebuild_indexes();
        pool.evict_overflow();
        Ok(pool)
    }
}

fn parse_record(mut value: Value, embedder: &dyn Embedder) -> Result<ExperienceRecord, String> {
    let obj = value.as_object_mut().ok_or("record line must be a JSON object")?;
    let needs_embedding = !obj.contains_key("e_q") || !obj.contains_key("e_i");
    if needs_embedding {
        let q = obj
            .get("question_text")
            .and_then(Value::as_str)
            .ok_or("missing question_text")?
            .to_string();
        let i = obj
            .get("indicator_text")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string();
        obj.insert("e_q".into(), serde_json::to_value(embedder.embed(&q)).unwrap());
        obj.insert("e_i".into(), serde_json::to_value(embedder.embed(&i)).unwrap());
    }
    for (key, default) in [
        ("sufficient", Value::Bool(true)),
        ("hit_count", Value::from(0u64)),
        ("created_seq", Value::from(0u64)),
        ("last_used_seq", Value::from(0u64)),
        ("payload", Value::Null),
        ("indicator_text", Value::String(String::new())),
        ("outcome", Value::String("Verified".into())),
    ] {
        obj.entry(key).or_insert(default);
    }
    serde_json::from_value(value).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashEmbedder;

    fn pool() -> ExperiencePool {
        ExperiencePool::new(MemoryConfig::default(), Arc::new(HashEmbedder))
    }

    fn draft(kind: ExperienceKind, q: &str, t: TemporalType) -> ExperienceDraft {
        ExperienceDraft::verified(kind, q, format!("indicator {q}"), t, Value::Null)
    }

    #[test]
    fn type_filter_soundness() {
        let mut p = pool();
        for i in 0..3 {
            p.write_back(draft(
                ExperienceKind::TraceExp,
                &format!("after question {i}"),
                TemporalType::AfterNFirst,
            ));
        }
        for i in 0..2 {
            p.write_back(draft(
                ExperienceKind::TraceExp,
                &format!("before question {i}"),
                TemporalType::Before,
            ));
        }
        let got = p.retrieve(
            ExperienceKind::TraceExp,
            "after question 0",
            "indicator after question 0",
            TemporalType::AfterNFirst,
            10,
        );
        assert_eq!(got.exemplars.len(), 3);
        assert!(got.exemplars.iter().all(|r| r.matches_type(TemporalType::AfterNFirst)));
    }

    #[test]
    fn secondary_type_is_eligible() {
        let mut p = pool();
        let id = p.write_back(draft(ExperienceKind::TraceExp, "cross", TemporalType::BeforeNLast));
        p.records.get_mut(&id).unwrap().secondary_types.insert(TemporalType::AfterNFirst);
        p.rebuild_indexes();
        let got = p.retrieve(
            ExperienceKind::TraceExp,
            "cross",
            "indicator cross",
            TemporalType::AfterNFirst,
            5,
        );
        assert_eq!(got.exemplars.len(), 1);
    }

    #[test]
    fn warnings_are_separated() {
        let mut p = pool();
        p.write_back(draft(ExperienceKind::TraceExp, "good one", TemporalType::Equal));
        let mut bad = draft(ExperienceKind::TraceExp, "bad one", TemporalType::Equal);
        bad.outcome = Outcome::Incorrect;
        p.write_back(bad);
        let got = p.retrieve(ExperienceKind::TraceExp, "one", "indicator one", TemporalType::Equal, 5);
        assert_eq!(got.exemplars.len(), 1);
        assert_eq!(got.warnings.len(), 1);
        assert!(got.exemplars.iter().all(|r| r.outcome == Outcome::Verified));
        assert!(got.warnings.iter().all(|r| r.outcome == Outcome::Incorrect));
    }

    #[test]
    fn buffer_score_boundaries() {
        let mut p = pool();
        let id = p.write_back(draft(ExperienceKind::TraceExp, "q", TemporalType::Equal));
        let r = p.record(id).unwrap().clone();
        let q = HashEmbedder.embed("q");
        assert!((buffer_score(&r, &q, 0.6, 0.4, 0) - 0.6 * cosine(&r.e_q, &q)).abs() < 1e-12);
        let mut hot = r.clone();
        hot.hit_count = 4;
        assert!((buffer_score(&hot, &hot.e_q.clone(), 0.6, 0.4, 4) - 1.0).abs() < 1e-12);
        let mut half = r;
        half.hit_count = 2;
        let s = buffer_score(&half, &HashEmbedder.embed("unrelated zz"), 0.6, 0.4, 4);
        assert!((s - 0.2).abs() < 1e-9, "cos 0 + 0.4*0.5 = 0.2, got {s}");
    }

    #[test]
    fn write_back_dedups_and_merges() {
        let mut p = pool();
        let a = p.write_back(draft(ExperienceKind::TraceExp, "same q", TemporalType::Equal));
        let b = p.write_back(draft(ExperienceKind::TraceExp, "same q", TemporalType::Equal));
        assert_eq!(a, b);
        assert_eq!(p.len(), 1);
        assert_eq!(p.record(a).unwrap().hit_count, 1);
    }

    #[test]
    fn buffer_evicts_oldest_unused() {
        let mut p = ExperiencePool::new(
            MemoryConfig { buffer_capacity: 200, ..Default::default() },
            Arc::new(HashEmbedder),
        );
        let mut first = None;
        for i in 0..201 {
            let id = p.write_back(draft(
                ExperienceKind::TraceExp,
                &format!("q {i}"),
                TemporalType::Equal,
            ));
            first.get_or_insert(id);
        }
        assert_eq!(p.buffer_len(), 200);
        assert!(!p.buffer_contains(first.unwrap()));
        assert_eq!(p.len(), 201);
    }

    #[test]
    fn cross_type_augmentation_threshold() {
        let mut p = pool();
        // Identical indicator text across two types: cosine 1.0 >= 0.8.
        let a = ExperienceDraft {
            kind: ExperienceKind::TraceExp,
            question_text: "before last visit".into(),
            indicator_text: "?x visit Beijing before 2010".into(),
            primary_type: TemporalType::BeforeNLast,
            payload: Value::Null,
            outcome: Outcome::Verified,
        };
        let b = ExperienceDraft {
            kind: ExperienceKind::TraceExp,
            question_text: "first treaty after".into(),
            indicator_text: "?x visit Beijing before 2010".into(),
            primary_type: TemporalType::AfterNFirst,
            payload: Value::Null,
            outcome: Outcome::Verified,
        };
        let id_a = p.write_back(a);
        p.write_back(b);
        let added = p.cross_type_augment(id_a, 0.8);
        assert!(added.contains(&TemporalType::AfterNFirst));
        // A threshold above any possible cosine never augments.
        let none = p.cross_type_augment(id_a, 1.01);
        assert!(none.is_empty());
    }

    #[test]
    fn augment_on_empty_pool_is_noop() {
        let mut p = pool();
        let id = p.write_back(draft(ExperienceKind::TraceExp, "solo", TemporalType::Count));
        assert!(p.cross_type_augment(id, 0.8).is_empty());
    }

    #[test]
    fn adapt_with_decay_one_prunes_nothing() {
        let mut p = pool();
        for i in 0..10 {
            p.write_back(draft(ExperienceKind::TraceExp, &format!("q {i}"), TemporalType::Equal));
        }
        assert_eq!(p.adapt(1.0, 0), 0);
        assert_eq!(p.buffer_len(), 10);
    }

    #[test]
    fn adapt_prunes_stale_unhit_records() {
        let mut p = pool();
        let stale = p.write_back(draft(ExperienceKind::TraceExp, "stale", TemporalType::Equal));
        let hot = p.write_back(draft(ExperienceKind::TraceExp, "hot", TemporalType::Equal));
        // Use "hot" many times; "stale" never.
        for _ in 0..50 {
            p.retrieve(ExperienceKind::TraceExp, "hot", "indicator hot", TemporalType::Equal, 1);
        }
        let pruned = p.adapt(0.5, 3);
        assert!(pruned >= 1);
        assert!(!p.buffer_contains(stale));
        assert!(p.buffer_contains(hot));
        assert!(p.record(stale).is_some(), "archive keeps pruned records");
    }

    #[test]
    fn persistence_round_trip() {
        let mut p = pool();
        for (i, t) in [TemporalType::Equal, TemporalType::Before, TemporalType::AfterNFirst]
            .iter()
            .enumerate()
        {
            p.write_back(draft(ExperienceKind::TraceExp, &format!("q {i}"), *t));
        }
        let mut buf = Vec::new();
        p.persist(&mut buf).unwrap();
        let loaded = ExperiencePool::load(
            std::io::Cursor::new(buf),
            MemoryConfig::default(),
            Arc::new(HashEmbedder),
        )
        .unwrap();
        assert_eq!(loaded.len(), p.len());
        assert_eq!(loaded.buffer_len(), p.buffer_len());
        for probe in ["q 0", "q 1", "q 2"] {
            let a = p.rank(ExperienceKind::TraceExp, probe, "x", TemporalType::Equal);
            let b = loaded.rank(ExperienceKind::TraceExp, probe, "x", TemporalType::Equal);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn corrupt_line_reports_position() {
        let data = "{\"schema_version\":1,\"next_id\":1,\"seq\":0,\"buffer\":[]}\nnot json\n";
        let err = match ExperiencePool::load(
            std::io::Cursor::new(data.as_bytes().to_vec()),
            MemoryConfig::default(),
            Arc::new(HashEmbedder),
        ) {
            Err(e) => e,
            Ok(_) => panic!("corrupt line should fail"),
        };
        assert!(matches!(err, MemoryError::CorruptRecord { line: 2, .. }));
    }

    #[test]
    fn hit_counts_never_decrease() {
        let mut p = pool();
        let id = p.write_back(draft(ExperienceKind::TraceExp, "watch me", TemporalType::Equal));
        let mut prev = p.record(id).unwrap().hit_count;
        for _ in 0..5 {
            p.retrieve(ExperienceKind::TraceExp, "watch me", "x", TemporalType::Equal, 3);
            let now = p.record(id).unwrap().hit_count;
            assert!(now >= prev);
            prev = now;
        }
    }
}
