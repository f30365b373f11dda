//! Quadruple store: interned entities/relations, fact list, and the
//! by-entity / by-time indexes everything downstream reads from.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::timestamp::{parse_timestamp, TimeWindow, Timestamp};
use super::StoreError;

/// Interned entity handle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

/// Interned relation handle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationId(pub u32);

/// One time-stamped quadruple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fact {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
    pub ts: Timestamp,
}

/// Direction of incidence relative to a query entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Entity is the head.
    Out,
    /// Entity is the tail.
    In,
    Both,
}

#[derive(Debug, Default)]
struct Interner {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Interner {
    fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    fn len(&self) -> usize {
        self.names.len()
    }
}

/// Immutable temporal knowledge graph.
///
/// Built once by [`Tkg::load_tsv`] (or [`TkgBuilder`]) and shared read-only
/// afterwards; there is no mutation API past construction.
#[derive(Debug)]
pub struct Tkg {
    entities: Interner,
    relations: Interner,
    facts: Vec<Fact>,
    /// entity -> incident facts, one entry per endpoint role, canonically sorted.
    by_entity: Vec<Vec<(usize, Direction)>>,
    /// interval start -> facts starting that day.
    by_time: BTreeMap<NaiveDate, Vec<usize>>,
    /// relation -> alternate surface forms used by relation filters.
    aliases: HashMap<RelationId, Vec<String>>,
}

impl Tkg {
    /// Load tab-separated quadruples: `head<TAB>relation<TAB>tail<TAB>timestamp`.
    ///
    /// `#`-prefixed and blank lines are skipped, CRLF is accepted, duplicate
    /// quadruples are dropped, and entities/relations are interned in
    /// first-seen order.
    pub fn load_tsv<R: BufRead>(source: R) -> Result<Tkg, StoreError> {
        let mut builder = TkgBuilder::new();
        for (idx, line) in source.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| StoreError::ParseError {
                line: lineno,
                message: e.to_string(),
            })?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(StoreError::ParseError {
                    line: lineno,
                    message: format!("expected 4 tab-separated fields, got {}", fields.len()),
                });
            }
            let ts = parse_timestamp(fields[3]).map_err(|e| StoreError::ParseError {
                line: lineno,
                message: e.to_string(),
            })?;
            builder.add(fields[0], fields[1], fields[2], ts);
        }
        Ok(builder.build())
    }

    /// Attach relation aliases from `relation<TAB>alias` lines.
    ///
    /// Aliases for relations absent from the graph are ignored.
    pub fn load_aliases<R: BufRead>(&mut self, source: R) -> Result<(), StoreError> {
        for (idx, line) in source.lines().enumerate() {
            let line = line.map_err(|e| StoreError::ParseError {
                line: idx + 1,
                message: e.to_string(),
            })?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.splitn(2, '\t');
            let rel = parts.next().unwrap_or_default();
            let alias = parts.next().ok_or(StoreError::ParseError {
                line: idx + 1,
                message: "expected relation<TAB>alias".to_string(),
            })?;
            if let Some(id) = self.relations.get(rel) {
                self.aliases.entry(RelationId(id)).or_default().push(alias.to_string());
            }
        }
        Ok(())
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entities.get(name).map(EntityId)
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relations.get(name).map(RelationId)
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        self.entities.name(id.0)
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        self.relations.name(id.0)
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_names(&self) -> impl Iterator<Item = (EntityId, &str)> {
        self.entities.names.iter().enumerate().map(|(i, n)| (EntityId(i as u32), n.as_str()))
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn fact(&self, idx: usize) -> Fact {
        self.facts[idx]
    }

    pub fn aliases_of(&self, rel: RelationId) -> &[String] {
        self.aliases.get(&rel).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Canonical total ordering key: (interval start, head, relation, tail)
    /// with the name components compared as strings.
    pub fn canonical_key(&self, fact: &Fact) -> (NaiveDate, &str, &str, &str) {
        (
            fact.ts.start(),
            self.entity_name(fact.head),
            self.relation_name(fact.relation),
            self.entity_name(fact.tail),
        )
    }

    /// Incidence list of `entity`: `(fact index, role)` pairs in canonical
    /// order, one pair per endpoint role.
    pub fn incidences(&self, entity: EntityId) -> &[(usize, Direction)] {
        &self.by_entity[entity.0 as usize]
    }

    /// Facts incident to `entity` in the given direction whose start lies
    /// strictly inside the open `window`, in canonical order.
    pub fn neighbors(
        &self,
        entity: EntityId,
        direction: Direction,
        window: TimeWindow,
    ) -> Result<Vec<Fact>, StoreError> {
        if entity.0 as usize >= self.entities.len() {
            return Err(StoreError::UnknownEntity(format!("entity id {}", entity.0)));
        }
        let mut out = Vec::new();
        let mut last_emitted: Option<usize> = None;
        for &(fi, role) in self.incidences(entity) {
            let keep = match direction {
                Direction::Out => role == Direction::Out,
                Direction::In => role == Direction::In,
                Direction::Both => true,
            };
            if !keep {
                continue;
            }
            // Self-loops appear once per role; emit them once under Both.
            if direction == Direction::Both && last_emitted == Some(fi) {
                continue;
            }
            let fact = self.facts[fi];
            if window.contains(&fact.ts) {
                out.push(fact);
                last_emitted = Some(fi);
            }
        }
        Ok(out)
    }

    /// Look up an entity by name, erroring on unknown names.
    pub fn require_entity(&self, name: &str) -> Result<EntityId, StoreError> {
        self.entity_id(name).ok_or_else(|| StoreError::UnknownEntity(name.to_string()))
    }

    /// Facts whose interval start equals `day`.
    pub fn facts_starting(&self, day: NaiveDate) -> &[usize] {
        self.by_time.get(&day).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Histogram of timestamp granularities across all facts.
    pub fn granularity_histogram(&self) -> [usize; 3] {
        let mut h = [0usize; 3];
        for f in &self.facts {
            h[f.ts.granularity() as usize] += 1;
        }
        h
    }

    pub fn sort_canonical(&self, facts: &mut [Fact]) {
        facts.sort_by(|a, b| self.canonical_key(a).cmp(&self.canonical_key(b)));
    }
}

/// Programmatic construction, used by tests and generators.
pub struct TkgBuilder {
    entities: Interner,
    relations: Interner,
    facts: Vec<Fact>,
    seen: HashMap<(u32, u32, u32, Timestamp), ()>,
}

impl TkgBuilder {
    pub fn new() -> Self {
        TkgBuilder {
            entities: Interner::default(),
            relations: Interner::default(),
            facts: Vec::new(),
            seen: HashMap::new(),
        }
    }

    pub fn add(&mut self, head: &str, relation: &str, tail: &str, ts: Timestamp) -> &mut Self {
        let h = self.entities.intern(head);
        let r = self.relations.intern(relation);
        let t = self.entities.intern(tail);
        if self.seen.insert((h, r, t, ts), ()).is_none() {
            self.facts.push(Fact {
                head: EntityId(h),
                relation: RelationId(r),
                tail: EntityId(t),
                ts,
            });
        }
        self
    }

    pub fn build(self) -> Tkg {
        let mut tkg = Tkg {
            entities: self.entities,
            relations: self.relations,
            facts: self.facts,
            by_entity: Vec::new(),
            by_time: BTreeMap::new(),
            aliases: HashMap::new(),
        };
        tkg.by_entity = vec![Vec::new(); tkg.entities.len()];
        for (i, f) in tkg.facts.iter().enumerate() {
            tkg.by_entity[f.head.0 as usize].push((i, Direction::Out));
            tkg.by_entity[f.tail.0 as usize].push((i, Direction::In));
            tkg.by_time.entry(f.ts.start()).or_default().push(i);
        }
        let keys: Vec<(NaiveDate, String, String, String)> = tkg
            .facts
            .iter()
            .map(|f| {
                let (d, h, r, t) = tkg.canonical_key(f);
                (d, h.to_string(), r.to_string(), t.to_string())
            })
            .collect();
        for list in &mut tkg.by_entity {
            list.sort_by(|a, b| keys[a.0].cmp(&keys[b.0]).then(role_rank(a.1).cmp(&role_rank(b.1))));
        }
        for list in tkg.by_time.values_mut() {
            list.sort_by(|a, b| keys[*a].cmp(&keys[*b]));
        }
        tkg
    }
}

impl Default for TkgBuilder {
    fn default() -> Self {
        Self::new()
    }
}

fn role_rank(d: Direction) -> u8 {
    match d {
        Direction::Out => 0,
        Direction::In => 1,
        Direction::Both => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn tiny() -> Tkg {
        let tsv = "A\tr1\tB\t2010-01-01\nB\tr2\tC\t2011-02-02\nA\tr1\tB\t2010-01-01\n";
        Tkg::load_tsv(Cursor::new(tsv)).unwrap()
    }

    #[test]
    fn load_dedups_and_interns_in_order() {
        let g = tiny();
        assert_eq!(g.facts().len(), 2);
        assert_eq!(g.entity_name(EntityId(0)), "A");
        assert_eq!(g.entity_name(EntityId(1)), "B");
        assert_eq!(g.entity_name(EntityId(2)), "C");
    }

    #[test]
    fn load_empty_stream() {
        let g = Tkg::load_tsv(Cursor::new("")).unwrap();
        assert_eq!(g.facts().len(), 0);
        assert_eq!(g.entity_count(), 0);
    }

    #[test]
    fn load_reports_line_numbers() {
        let err = Tkg::load_tsv(Cursor::new("A\tr\tB\t2010\nA\tr\tB\n")).unwrap_err();
        match err {
            StoreError::ParseError { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
        let err = Tkg::load_tsv(Cursor::new("A\tr\tB\t2010-13-01\n")).unwrap_err();
        assert!(matches!(err, StoreError::ParseError { line: 1, .. }));
    }

    #[test]
    fn load_accepts_comments_and_crlf() {
        let g = Tkg::load_tsv(Cursor::new("# header\r\nA\tr\tB\t2010\r\n\r\n")).unwrap();
        assert_eq!(g.facts().len(), 1);
    }

    #[test]
    fn by_entity_index_covers_each_fact_twice() {
        let g = tiny();
        let mut count = 0;
        for (e, _) in g.entity_names() {
            count += g.incidences(e).len();
        }
        assert_eq!(count, g.facts().len() * 2);
    }

    #[test]
    fn neighbors_respects_direction() {
        let g = tiny();
        let b = g.entity_id("B").unwrap();
        let outs = g.neighbors(b, Direction::Out, TimeWindow::default()).unwrap();
        let ins = g.neighbors(b, Direction::In, TimeWindow::default()).unwrap();
        let both = g.neighbors(b, Direction::Both, TimeWindow::default()).unwrap();
        assert_eq!(outs.len(), 1);
        assert_eq!(ins.len(), 1);
        assert_eq!(both.len(), 2);
    }

    #[test]
    fn neighbors_of_isolated_entity_is_empty() {
        let tsv = "A\tr1\tB\t2010-01-01\nC\tr1\tC\t2011-01-01\n";
        let g = Tkg::load_tsv(Cursor::new(tsv)).unwrap();
        // C only has a self-loop; Both emits it once.
        let c = g.entity_id("C").unwrap();
        assert_eq!(g.neighbors(c, Direction::Both, TimeWindow::default()).unwrap().len(), 1);
    }
}
