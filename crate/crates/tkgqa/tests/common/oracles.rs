//! Independent oracles the implementation is checked against: brute-force
//! path enumeration, a minimal path-validity checker, BFS distances, and a
//! seeded generator for random graphs. These deliberately do not share code
//! with the library's search or scoring paths.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::sync::Arc;

use tkgqa::store::{
    Direction, EntityId, PathStep, Subgraph, TemporalPath, Timestamp, Tkg, TkgBuilder,
};

/// Exhaustive DFS enumeration of monotone paths (lengths 1..=depth) from
/// the seeds, reversed traversal allowed, revisits allowed.
pub fn enumerate_monotone_paths(
    g: &Subgraph,
    seeds: &[EntityId],
    depth: usize,
) -> HashSet<TemporalPath> {
    let mut out = HashSet::new();
    let mut seen_seeds = HashSet::new();
    for &seed in seeds {
        if !seen_seeds.insert(seed) {
            continue;
        }
        dfs(g, seed, None, &mut Vec::new(), depth, &mut out);
    }
    out
}

fn dfs(
    g: &Subgraph,
    at: EntityId,
    last_start: Option<chrono::NaiveDate>,
    prefix: &mut Vec<PathStep>,
    remaining: usize,
    out: &mut HashSet<TemporalPath>,
) {
    if remaining == 0 {
        return;
    }
    let incidences: Vec<(usize, Direction)> = g.tkg().incidences(at).to_vec();
    for (fi, role) in incidences {
        if !g.contains_fact_index(fi) {
            continue;
        }
        let fact = g.tkg().fact(fi);
        if let Some(last) = last_start {
            if fact.ts.start() < last {
                continue;
            }
        }
        let step = PathStep::new(fact, role == Direction::In);
        prefix.push(step);
        out.insert(TemporalPath::new(prefix.clone()));
        dfs(g, step.effective_tail(), Some(fact.ts.start()), prefix, remaining - 1, out);
        prefix.pop();
    }
}

/// The reference path checker: consecutive steps connect on effective
/// endpoints and interval starts never decrease.
pub fn reference_validate(path: &TemporalPath) -> bool {
    path.steps.windows(2).all(|w| {
        w[0].effective_tail() == w[1].effective_head()
            && w[0].fact.ts.start() <= w[1].fact.ts.start()
    })
}

/// Brute-force multi-source BFS hop distances over undirected fact edges.
pub fn bfs_distances(tkg: &Tkg, topics: &[EntityId]) -> BTreeMap<EntityId, usize> {
    let mut dist = BTreeMap::new();
    let mut queue = VecDeque::new();
    for &t in topics {
        if !dist.contains_key(&t) {
            dist.insert(t, 0usize);
            queue.push_back(t);
        }
    }
    while let Some(e) = queue.pop_front() {
        let d = dist[&e];
        for f in tkg.facts() {
            let other = if f.head == e {
                f.tail
            } else if f.tail == e {
                f.head
            } else {
                continue;
            };
            if !dist.contains_key(&other) {
                dist.insert(other, d + 1);
                queue.push_back(other);
            }
        }
    }
    dist
}

/// Deterministic xorshift64* generator for seeded randomized tests.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Rng {
        Rng(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545F4914F6CDD1D)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n.max(1) as u64) as usize
    }

    pub fn chance(&mut self, percent: u64) -> bool {
        self.next_u64() % 100 < percent
    }
}

pub fn random_timestamp(rng: &mut Rng) -> Timestamp {
    let year = 1990 + rng.below(40) as i32;
    match rng.below(3) {
        0 => Timestamp::year(year),
        1 => Timestamp::month(year, 1 + rng.below(12) as u8).unwrap(),
        _ => Timestamp::day(year, 1 + rng.below(12) as u8, 1 + rng.below(28) as u8).unwrap(),
    }
}

/// A random graph with at most `max_entities` entities and `max_facts`
/// facts (dedup may reduce the count).
pub fn random_tkg(rng: &mut Rng, max_entities: usize, max_facts: usize) -> Arc<Tkg> {
    let entities = 2 + rng.below(max_entities.saturating_sub(1));
    let relations = 1 + rng.below(4);
    let facts = 1 + rng.below(max_facts);
    let mut b = TkgBuilder::new();
    for _ in 0..facts {
        let h = format!("E{}", rng.below(entities));
        let t = format!("E{}", rng.below(entities));
        let r = format!("r{}", rng.below(relations));
        b.add(&h, &r, &t, random_timestamp(rng));
    }
    Arc::new(b.build())
}
