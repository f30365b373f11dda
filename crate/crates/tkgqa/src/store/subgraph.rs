//! Bounded-hop neighbourhood extraction around topic entities.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use super::graph::{Direction, EntityId, Fact, Tkg};
use super::timestamp::TimeWindow;
use super::StoreError;

/// A d_max-hop neighbourhood of the owning graph.
///
/// Reachability treats facts as undirected: answers can sit upstream of a
/// topic (visitors of a city point *into* it). A fact is a member when both
/// endpoints are members and at least one endpoint lies within `d_max - 1`
/// hops, i.e. exactly the edges a depth-bounded BFS relaxes.
pub struct Subgraph {
    tkg: Arc<Tkg>,
    topics: Vec<EntityId>,
    entities: BTreeSet<EntityId>,
    fact_indices: BTreeSet<usize>,
    hop_distance: BTreeMap<EntityId, usize>,
}

impl Subgraph {
    pub fn build(tkg: Arc<Tkg>, topics: &[EntityId], d_max: usize) -> Result<Subgraph, StoreError> {
        if topics.is_empty() {
            return Err(StoreError::EmptyTopics);
        }
        if d_max == 0 {
            return Err(StoreError::InvalidDepth);
        }
        for t in topics {
            if t.0 as usize >= tkg.entity_count() {
                return Err(StoreError::UnknownEntity(format!("entity id {}", t.0)));
            }
        }
        let mut dist: BTreeMap<EntityId, usize> = BTreeMap::new();
        let mut queue = VecDeque::new();
        for &t in topics {
            if !dist.contains_key(&t) {
                dist.insert(t, 0);
                queue.push_back(t);
            }
        }
        let mut facts = BTreeSet::new();
        while let Some(e) = queue.pop_front() {
            let d = dist[&e];
            if d >= d_max {
                continue;
            }
            for &(fi, _) in tkg.incidences(e) {
                facts.insert(fi);
                let f = tkg.fact(fi);
                for other in [f.head, f.tail] {
                    if !dist.contains_key(&other) {
                        dist.insert(other, d + 1);
                        queue.push_back(other);
                    }
                }
            }
        }
        Ok(Subgraph {
            tkg,
            topics: topics.to_vec(),
            entities: dist.keys().copied().collect(),
            fact_indices: facts,
            hop_distance: dist,
        })
    }

    pub fn tkg(&self) -> &Arc<Tkg> {
        &self.tkg
    }

    pub fn topics(&self) -> &[EntityId] {
        &self.topics
    }

    pub fn entities(&self) -> &BTreeSet<EntityId> {
        &self.entities
    }

    pub fn contains_entity(&self, e: EntityId) -> bool {
        self.entities.contains(&e)
    }

    pub fn contains_fact_index(&self, idx: usize) -> bool {
        self.fact_indices.contains(&idx)
    }

    pub fn hop_distance(&self, e: EntityId) -> Option<usize> {
        self.hop_distance.get(&e).copied()
    }

    pub fn fact_count(&self) -> usize {
        self.fact_indices.len()
    }

    /// Member facts in canonical order.
    pub fn facts(&self) -> Vec<Fact> {
        let mut out: Vec<Fact> = self.fact_indices.iter().map(|&i| self.tkg.fact(i)).collect();
        self.tkg.sort_canonical(&mut out);
        out
    }

    /// Like [`Tkg::neighbors`] but restricted to member facts.
    pub fn neighbors(
        &self,
        entity: EntityId,
        direction: Direction,
        window: TimeWindow,
    ) -> Result<Vec<Fact>, StoreError> {
        if !self.contains_entity(entity) {
            return Err(StoreError::UnknownEntity(
                self.tkg.entity_name(entity).to_string(),
            ));
        }
        let mut out = Vec::new();
        let mut last_emitted: Option<usize> = None;
        for &(fi, role) in self.tkg.incidences(entity) {
            if !self.fact_indices.contains(&fi) {
                continue;
            }
            let keep = match direction {
                Direction::Out => role == Direction::Out,
                Direction::In => role == Direction::In,
                Direction::Both => true,
            };
            if !keep {
                continue;
            }
            if direction == Direction::Both && last_emitted == Some(fi) {
                continue;
            }
            let fact = self.tkg.fact(fi);
            if window.contains(&fact.ts) {
                out.push(fact);
                last_emitted = Some(fi);
            }
        }
        Ok(out)
    }

    pub fn require_entity(&self, name: &str) -> Result<EntityId, StoreError> {
        let id = self.tkg.require_entity(name)?;
        if !self.contains_entity(id) {
            return Err(StoreError::UnknownEntity(name.to_string()));
        }
        Ok(id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{parse_timestamp, TkgBuilder};

    fn ts(s: &str) -> crate::store::Timestamp {
        parse_timestamp(s).unwrap()
    }

    /// Chain fixture: M -r- P -r- C -r- E plus a spur D off P.
    fn chain() -> Arc<Tkg> {
        let mut b = TkgBuilder::new();
        b.add("M", "visit", "P", ts("2012"));
        b.add("P", "host", "C", ts("2013"));
        b.add("C", "attended_by", "E", ts("2014"));
        b.add("P", "near", "D", ts("2012"));
        Arc::new(b.build())
    }

    #[test]
    fn hop_distances_match_bfs() {
        let g = chain();
        let m = g.entity_id("M").unwrap();
        let sg = Subgraph::build(g.clone(), &[m], 3).unwrap();
        assert_eq!(sg.hop_distance(m), Some(0));
        assert_eq!(sg.hop_distance(g.entity_id("P").unwrap()), Some(1));
        assert_eq!(sg.hop_distance(g.entity_id("C").unwrap()), Some(2));
        assert_eq!(sg.hop_distance(g.entity_id("E").unwrap()), Some(3));
        assert_eq!(sg.fact_count(), 4);
    }

    #[test]
    fn depth_one_excludes_second_hop() {
        let g = chain();
        let m = g.entity_id("M").unwrap();
        let sg = Subgraph::build(g.clone(), &[m], 1).unwrap();
        assert!(sg.contains_entity(g.entity_id("P").unwrap()));
        assert!(!sg.contains_entity(g.entity_id("C").unwrap()));
        assert_eq!(sg.fact_count(), 1);
    }

    #[test]
    fn precondition_violations() {
        let g = chain();
        let m = g.entity_id("M").unwrap();
        assert!(matches!(Subgraph::build(g.clone(), &[], 3), Err(StoreError::EmptyTopics)));
        assert!(matches!(Subgraph::build(g.clone(), &[m], 0), Err(StoreError::InvalidDepth)));
        assert!(matches!(
            Subgraph::build(g.clone(), &[EntityId(99)], 3),
            Err(StoreError::UnknownEntity(_))
        ));
    }

    #[test]
    fn member_facts_connect_member_entities() {
        let g = chain();
        let m = g.entity_id("M").unwrap();
        let sg = Subgraph::build(g.clone(), &[m], 2).unwrap();
        for f in sg.facts() {
            assert!(sg.contains_entity(f.head) && sg.contains_entity(f.tail));
            let dh = sg.hop_distance(f.head).unwrap();
            let dt = sg.hop_distance(f.tail).unwrap();
            assert!(dh.min(dt) <= 1);
        }
    }
}
