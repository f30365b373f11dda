//! Hybrid temporal path retrieval: time-monotone frontier expansion from
//! seed entities, a candidate length bound, temporal-first pruning, dense
//! fact retrieval, and semantic-temporal re-ranking into a top-W₁ pool.

use std::collections::HashSet;

use serde::Serialize;

use crate::embedding::{cosine, verbalize_indicator, verbalize_path, Embedder, EmbeddingIndex};
use crate::indicator::Indicator;
use crate::store::{
    validate_path, Direction, EntityId, Fact, PathStep, StoreError, Subgraph, TemporalPath,
    TimeWindow, Timestamp,
};

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("seed entity set is empty")]
    EmptySeeds,
    #[error("cannot take the representative time of an empty path")]
    EmptyPath,
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Search and scoring knobs. Defaults follow the reference configuration:
/// depth 3, final selection width 3, re-rank pool 80, semantic weight 0.6.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    /// Maximum hop depth for subgraphs and path expansion.
    pub d_max: usize,
    /// Final reasoner-selected path count.
    pub w_max: usize,
    /// Re-ranked candidate pool size.
    pub w1: usize,
    /// Frontier width for expansion pruning. Kept separate from `w_max`:
    /// pruning the frontier to 3 would strangle exploration.
    pub beam: usize,
    /// Weight of semantic alignment in the composite score.
    pub lambda_sem: f64,
    /// Weight of temporal proximity; must complement `lambda_sem`.
    pub lambda_prox: f64,
    /// Proximity decay scale, in days.
    pub sigma_days: f64,
    /// Exemplars retrieved per memory query.
    pub w_exp: usize,
    /// Branch budget per tree expansion.
    pub b_max: usize,
    /// Ceiling on unlimited toolkit results.
    pub result_cap: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            d_max: 3,
            w_max: 3,
            w1: 80,
            beam: 64,
            lambda_sem: 0.6,
            lambda_prox: 0.4,
            sigma_days: 365.0,
            w_exp: 10,
            b_max: 4,
            result_cap: 10_000,
        }
    }
}

impl RetrievalConfig {
    /// Enforced at config load: weights complementary, limits positive.
    pub fn validate(&self) -> Result<(), String> {
        if (self.lambda_sem + self.lambda_prox - 1.0).abs() > 1e-9 {
            return Err(format!(
                "lambda_sem + lambda_prox must equal 1 (got {} + {})",
                self.lambda_sem, self.lambda_prox
            ));
        }
        if self.sigma_days <= 0.0 {
            return Err("sigma_days must be positive".to_string());
        }
        for (name, v) in [
            ("d_max", self.d_max),
            ("w_max", self.w_max),
            ("w1", self.w1),
            ("beam", self.beam),
            ("w_exp", self.w_exp),
            ("b_max", self.b_max),
            ("result_cap", self.result_cap),
        ] {
            if v == 0 {
                return Err(format!("{name} must be at least 1"));
            }
        }
        Ok(())
    }
}

/// A candidate path with its semantic, proximity, and composite scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredPath {
    pub path: TemporalPath,
    pub sem: f64,
    pub prox: f64,
    pub score: f64,
}

/// Predicted exploration depth of an indicator: the number of edges in its
/// template (one, for the single-quadruple indicators decomposition
/// produces), clamped to `[1, d_max]`.
pub fn predicted_depth(_indicator: &Indicator, d_max: usize) -> usize {
    1usize.clamp(1, d_max.max(1))
}

/// Time-monotone frontier expansion from each seed up to `depth` hops.
///
/// Every hop must keep interval starts non-decreasing and pass the
/// indicator's concrete before/after window plus `extra_window`. All
/// intermediate paths (lengths 1..=depth) are accumulated. When a level's
/// frontier exceeds `beam`, it is pruned to the entries whose partial path
/// is most similar to the verbalized indicator. Paths may revisit entities
/// and facts: the path definition permits it, and the exhaustive oracle
/// this function is tested against enumerates those too.
pub fn expand_paths(
    g: &Subgraph,
    seeds: &[EntityId],
    indicator: &Indicator,
    depth: usize,
    beam: usize,
    extra_window: TimeWindow,
    embedder: &dyn Embedder,
) -> Result<Vec<TemporalPath>, RetrievalError> {
    if seeds.is_empty() {
        return Err(RetrievalError::EmptySeeds);
    }
    for s in seeds {
        if !g.contains_entity(*s) {
            return Err(RetrievalError::Store(StoreError::UnknownEntity(format!(
                "entity id {} not in subgraph",
                s.0
            ))));
        }
    }
    let window = indicator.window();
    let admissible =
        |ts: &Timestamp| window.contains(ts) && extra_window.contains(ts);

    struct Frontier {
        at: EntityId,
        last_start: Option<chrono::NaiveDate>,
        path: TemporalPath,
    }

    let mut paths: Vec<TemporalPath> = Vec::new();
    let mut seen: HashSet<TemporalPath> = HashSet::new();
    let mut frontier: Vec<Frontier> = Vec::new();
    let mut seeded: HashSet<EntityId> = HashSet::new();
    for &s in seeds {
        if seeded.insert(s) {
            frontier.push(Frontier { at: s, last_start: None, path: TemporalPath::default() });
        }
    }

    let indicator_vec = embedder.embed(&verbalize_indicator(indicator));
    let tkg = g.tkg().clone();

    for _level in 0..depth {
        let mut next: Vec<Frontier> = Vec::new();
        for f in &frontier {
            for &(fi, role) in tkg.incidences(f.at) {
                if !g.contains_fact_index(fi) {
                    continue;
                }
                let fact = tkg.fact(fi);
                let reversed = role == Direction::In;
                if let Some(last) = f.last_start {
                    if fact.ts.start() < last {
                        continue;
                    }
                }
                if !admissible(&fact.ts) {
                    continue;
                }
                let mut path = f.path.clone();
                path.steps.push(PathStep::new(fact, reversed));
                if seen.insert(path.clone()) {
                    paths.push(path.clone());
                }
                let step = *path.steps.last().expect("just pushed");
                next.push(Frontier {
                    at: step.effective_tail(),
                    last_start: Some(fact.ts.start()),
                    path,
                });
            }
        }
        if next.len() > beam {
            let mut scored: Vec<(f64, String, Frontier)> = next
                .into_iter()
                .map(|f| {
                    let sim = cosine(&indicator_vec, &embedder.embed(&verbalize_path(&tkg, &f.path)));
                    let key = f.path.sort_key(&tkg);
                    (sim, key, f)
                })
                .collect();
            scored.sort_by(|a, b| {
                b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1))
            });
            scored.truncate(beam);
            next = scored.into_iter().map(|(_, _, f)| f).collect();
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    Ok(paths)
}

/// Candidate length bound plus seed-order containment:
/// keeps `p` iff `|S|·(D−1) < len(p) ≤ |S|·D` and the seeds appear on the
/// path in order.
pub fn candidate_bound_filter(
    paths: Vec<TemporalPath>,
    seeds: &[EntityId],
    d: usize,
) -> Vec<TemporalPath> {
    let s = seeds.len().max(1);
    let lo = s * d.saturating_sub(1);
    let hi = s * d;
    paths
        .into_iter()
        .filter(|p| p.len() > lo && p.len() <= hi)
        .filter(|p| seeds_in_order(p, seeds))
        .collect()
}

fn seeds_in_order(path: &TemporalPath, seeds: &[EntityId]) -> bool {
    let entities = path.entity_sequence();
    let mut want = seeds.iter();
    let mut next = want.next();
    for e in entities {
        if Some(&e) == next {
            next = want.next();
        }
    }
    next.is_none()
}

/// Temporal-first pruning: drop non-monotone or constraint-violating
/// candidates before any semantic ranking. Constraints are evaluated on the
/// path's representative time; input order is preserved.
pub fn temporal_filter(
    paths: Vec<TemporalPath>,
    constraints: &[crate::indicator::TimeConstraint],
) -> Vec<TemporalPath> {
    paths
        .into_iter()
        .filter(|p| validate_path(p))
        .filter(|p| {
            if p.is_empty() {
                return constraints.is_empty();
            }
            let t = representative_time(p).expect("nonempty path");
            constraints.iter().all(|c| c.holds(&t))
        })
        .collect()
}

/// Representative timestamp of a path: the last fact's, whose interval
/// start is what downstream before/after anchors quantify over.
pub fn representative_time(p: &TemporalPath) -> Result<Timestamp, RetrievalError> {
    p.last_time().ok_or(RetrievalError::EmptyPath)
}

/// The composite score `λ_sem·sem + λ_prox·prox`.
pub fn composite_score(sem: f64, prox: f64, cfg: &RetrievalConfig) -> f64 {
    cfg.lambda_sem * sem + cfg.lambda_prox * prox
}

/// Temporal proximity `exp(−|Δt|/σ)` between a path's representative time
/// and the indicator's reference anchor; 1 when the indicator carries no
/// concrete anchor.
pub fn proximity(indicator: &Indicator, t_path: &Timestamp, cfg: &RetrievalConfig) -> f64 {
    match indicator.reference_anchor() {
        Some(anchor) => {
            let dt = (t_path.epoch_days() - anchor.epoch_days()).abs() as f64;
            (-dt / cfg.sigma_days).exp()
        }
        None => 1.0,
    }
}

/// Score one path against the indicator.
pub fn score_path(
    g: &Subgraph,
    indicator: &Indicator,
    path: &TemporalPath,
    cfg: &RetrievalConfig,
    embedder: &dyn Embedder,
) -> Result<ScoredPath, RetrievalError> {
    let t = representative_time(path)?;
    let sem = cosine(
        &embedder.embed(&verbalize_indicator(indicator)),
        &embedder.embed(&verbalize_path(g.tkg(), path)),
    );
    let prox = proximity(indicator, &t, cfg);
    Ok(ScoredPath { path: path.clone(), sem, prox, score: composite_score(sem, prox, cfg) })
}

/// Score, sort descending (ties by canonical serialization ascending), and
/// truncate to the top W₁.
pub fn rerank(
    g: &Subgraph,
    paths: Vec<TemporalPath>,
    indicator: &Indicator,
    cfg: &RetrievalConfig,
    embedder: &dyn Embedder,
) -> Result<Vec<ScoredPath>, RetrievalError> {
    let query = embedder.embed(&verbalize_indicator(indicator));
    let tkg = g.tkg();
    let mut scored: Vec<(String, ScoredPath)> = Vec::with_capacity(paths.len());
    for path in paths {
        let t = representative_time(&path)?;
        let sem = cosine(&query, &embedder.embed(&verbalize_path(tkg, &path)));
        let prox = proximity(indicator, &t, cfg);
        let key = path.sort_key(tkg);
        scored.push((key, ScoredPath { path, sem, prox, score: composite_score(sem, prox, cfg) }));
    }
    scored.sort_by(|a, b| {
        b.1.score
            .partial_cmp(&a.1.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    scored.truncate(cfg.w1);
    Ok(scored.into_iter().map(|(_, s)| s).collect())
}

/// Exact cosine index over a subgraph's verbalized facts.
pub struct FactIndex {
    facts: Vec<Fact>,
    index: EmbeddingIndex,
}

impl FactIndex {
    pub fn build(g: &Subgraph, embedder: &dyn Embedder) -> FactIndex {
        let facts = g.facts();
        let mut index = EmbeddingIndex::new(embedder.dimension());
        for (i, f) in facts.iter().enumerate() {
            index
                .insert(i as u64, embedder.embed(&crate::embedding::verbalize_fact(g.tkg(), f)), vec![])
                .expect("fact index dimension is fixed");
        }
        FactIndex { facts, index }
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }
}

/// Dense stream: top-k facts by cosine to the verbalized indicator, each
/// lifted to a single-fact path.
pub fn dense_retrieve(
    fi: &FactIndex,
    indicator: &Indicator,
    k: usize,
    embedder: &dyn Embedder,
) -> Vec<TemporalPath> {
    let query = embedder.embed(&verbalize_indicator(indicator));
    let hits = fi.index.search(&query, k, None).expect("query embedder matches index");
    hits.into_iter().map(|(id, _)| TemporalPath::single(fi.facts[id as usize])).collect()
}

/// Stream toggles and overrides for [`hybrid_retrieve_with`].
#[derive(Debug, Clone)]
pub struct HybridOptions {
    pub use_graph: bool,
    pub use_embed: bool,
    /// Expansion depth; defaults to the indicator's predicted depth.
    pub depth: Option<usize>,
    /// Beam override (RetrieveAgain doubles it).
    pub beam: Option<usize>,
    /// Additional window, e.g. from the toolkit call driving this retrieval.
    pub extra_window: TimeWindow,
}

impl Default for HybridOptions {
    fn default() -> Self {
        HybridOptions {
            use_graph: true,
            use_embed: true,
            depth: None,
            beam: None,
            extra_window: TimeWindow::default(),
        }
    }
}

/// Full hybrid pipeline: graph expansion (bounded, seed-ordered) unioned
/// with dense retrieval, deduplicated, temporally filtered, re-ranked.
pub fn hybrid_retrieve(
    g: &Subgraph,
    seeds: &[EntityId],
    indicator: &Indicator,
    cfg: &RetrievalConfig,
    embedder: &dyn Embedder,
) -> Result<Vec<ScoredPath>, RetrievalError> {
    hybrid_retrieve_with(g, seeds, indicator, cfg, embedder, &HybridOptions::default())
}

pub fn hybrid_retrieve_with(
    g: &Subgraph,
    seeds: &[EntityId],
    indicator: &Indicator,
    cfg: &RetrievalConfig,
    embedder: &dyn Embedder,
    opts: &HybridOptions,
) -> Result<Vec<ScoredPath>, RetrievalError> {
    let depth = opts
        .depth
        .unwrap_or_else(|| predicted_depth(indicator, cfg.d_max))
        .min(cfg.d_max)
        .max(1);
    let beam = opts.beam.unwrap_or(cfg.beam);
    let mut pool: Vec<TemporalPath> = Vec::new();
    if opts.use_graph {
        let expanded =
            expand_paths(g, seeds, indicator, depth, beam, opts.extra_window, embedder)?;
        pool.extend(candidate_bound_filter(expanded, seeds, depth));
    }
    if opts.use_embed {
        let fi = FactIndex::build(g, embedder);
        pool.extend(dense_retrieve(&fi, indicator, cfg.w1, embedder));
    }
    let mut seen: HashSet<TemporalPath> = HashSet::new();
    pool.retain(|p| seen.insert(p.clone()));
    let filtered = temporal_filter(pool, &indicator.constraints);
    rerank(g, filtered, indicator, cfg, embedder)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashEmbedder;
    use crate::indicator::{ConstraintOp, TemporalType, Term, TimeConstraint, TimeRef};
    use crate::store::{parse_timestamp, Subgraph, TkgBuilder};
    use std::sync::Arc;

    fn ts(s: &str) -> Timestamp {
        parse_timestamp(s).unwrap()
    }

    fn example_subgraph() -> Subgraph {
        let mut b = TkgBuilder::new();
        b.add("Merkel", "visit", "Paris", ts("2012"));
        b.add("Paris", "host", "Conference", ts("2013"));
        b.add("Conference", "attended_by", "EU", ts("2014"));
        let tkg = Arc::new(b.build());
        let m = tkg.entity_id("Merkel").unwrap();
        Subgraph::build(tkg, &[m], 3).unwrap()
    }

    fn free_indicator() -> Indicator {
        Indicator::new(
            Term::Entity("Merkel".into()),
            "visit",
            Term::Variable("?x".into()),
            TemporalType::Equal,
        )
    }

    #[test]
    fn expansion_finds_the_three_hop_chain() {
        let g = example_subgraph();
        let m = g.tkg().entity_id("Merkel").unwrap();
        let paths = expand_paths(
            &g,
            &[m],
            &free_indicator(),
            3,
            usize::MAX,
            TimeWindow::default(),
            &HashEmbedder,
        )
        .unwrap();
        assert!(paths.iter().any(|p| p.len() == 3
            && p.entity_sequence().last() == Some(&g.tkg().entity_id("EU").unwrap())));
    }

    #[test]
    fn depth_one_limits_to_single_hops() {
        let g = example_subgraph();
        let m = g.tkg().entity_id("Merkel").unwrap();
        let paths = expand_paths(
            &g,
            &[m],
            &free_indicator(),
            1,
            usize::MAX,
            TimeWindow::default(),
            &HashEmbedder,
        )
        .unwrap();
        assert!(!paths.is_empty());
        assert!(paths.iter().all(|p| p.len() == 1));
    }

    #[test]
    fn empty_seeds_rejected() {
        let g = example_subgraph();
        assert!(matches!(
            expand_paths(
                &g,
                &[],
                &free_indicator(),
                1,
                usize::MAX,
                TimeWindow::default(),
                &HashEmbedder
            ),
            Err(RetrievalError::EmptySeeds)
        ));
    }

    #[test]
    fn bound_filter_inequalities() {
        let g = example_subgraph();
        let tkg = g.tkg();
        let m = tkg.entity_id("Merkel").unwrap();
        let mk = |len: usize| TemporalPath::from_facts(
            &(0..len).map(|i| tkg.fact(i % 3)).collect::<Vec<_>>(),
        );
        // |S| = 1, D = 3: only length 3 passes the bound.
        let chain3 = TemporalPath::from_facts(&[tkg.fact(0), tkg.fact(1), tkg.fact(2)]);
        let input = vec![mk(1), mk(2), chain3.clone(), mk(4)];
        let kept = candidate_bound_filter(input, &[m], 3);
        assert_eq!(kept, vec![chain3]);

        // |S| = 2, D = 2: lengths {3, 4} pass the bound.
        for (len, pass) in [(1, false), (2, false), (3, true), (4, true), (5, false), (6, false)] {
            let s = 2usize;
            let d = 2usize;
            let ok = len > s * (d - 1) && len <= s * d;
            assert_eq!(ok, pass, "len {len}");
        }
    }

    #[test]
    fn seed_order_containment() {
        let g = example_subgraph();
        let tkg = g.tkg();
        let m = tkg.entity_id("Merkel").unwrap();
        let c = tkg.entity_id("Conference").unwrap();
        let chain = TemporalPath::from_facts(&[tkg.fact(0), tkg.fact(1), tkg.fact(2)]);
        assert!(!candidate_bound_filter(vec![chain.clone()], &[c, m], 3).iter().any(|p| p == &chain));
        assert_eq!(candidate_bound_filter(vec![chain.clone()], &[m, c], 2).len(), 1);
    }

    #[test]
    fn temporal_filter_drops_violations() {
        let g = example_subgraph();
        let tkg = g.tkg();
        let chain = TemporalPath::from_facts(&[tkg.fact(0), tkg.fact(1)]);
        let mut broken = chain.clone();
        broken.steps.swap(0, 1);
        let after = TimeConstraint::new(ConstraintOp::After, TimeRef::Concrete(ts("2011")));
        let kept = temporal_filter(vec![chain.clone(), broken], &[after]);
        assert_eq!(kept, vec![chain.clone()]);
        // Empty constraint list is the identity on valid paths.
        assert_eq!(temporal_filter(vec![chain.clone()], &[]), vec![chain]);
    }

    #[test]
    fn representative_time_is_last_fact() {
        let g = example_subgraph();
        let tkg = g.tkg();
        let chain = TemporalPath::from_facts(&[tkg.fact(0), tkg.fact(1), tkg.fact(2)]);
        assert_eq!(representative_time(&chain).unwrap(), ts("2014"));
        assert_eq!(
            representative_time(&TemporalPath::single(tkg.fact(0))).unwrap(),
            ts("2012")
        );
        assert!(matches!(
            representative_time(&TemporalPath::default()),
            Err(RetrievalError::EmptyPath)
        ));
    }

    #[test]
    fn score_boundaries() {
        let cfg = RetrievalConfig::default();
        assert!((composite_score(1.0, 1.0, &cfg) - 1.0).abs() < 1e-12);
        let e = (-1.0f64).exp();
        assert!((composite_score(0.0, e, &cfg) - 0.4 * e).abs() < 1e-12);
    }

    #[test]
    fn prox_neutral_without_anchor() {
        let cfg = RetrievalConfig::default();
        let ind = free_indicator();
        assert_eq!(proximity(&ind, &ts("1987-03-01"), &cfg), 1.0);
        let mut anchored = ind;
        anchored
            .constraints
            .push(TimeConstraint::new(ConstraintOp::After, TimeRef::Concrete(ts("2012-01-01"))));
        let p = proximity(&anchored, &ts("2013-01-01"), &cfg);
        assert!(((-366.0f64 / 365.0).exp() - p).abs() < 1e-12);
    }

    #[test]
    fn rerank_is_sorted_prefix_of_brute_force() {
        let g = example_subgraph();
        let tkg = g.tkg();
        let cfg = RetrievalConfig { w1: 2, ..Default::default() };
        let paths: Vec<TemporalPath> = (0..3).map(|i| TemporalPath::single(tkg.fact(i))).collect();
        let ind = free_indicator();
        let out = rerank(&g, paths.clone(), &ind, &cfg, &HashEmbedder).unwrap();
        let mut brute: Vec<ScoredPath> = paths
            .iter()
            .map(|p| score_path(&g, &ind, p, &cfg, &HashEmbedder).unwrap())
            .collect();
        brute.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap()
                .then_with(|| a.path.sort_key(tkg).cmp(&b.path.sort_key(tkg)))
        });
        brute.truncate(2);
        assert_eq!(out, brute);
    }

    #[test]
    fn hybrid_dedups_and_respects_constraints() {
        let g = example_subgraph();
        let m = g.tkg().entity_id("Merkel").unwrap();
        let mut ind = free_indicator();
        ind.constraints
            .push(TimeConstraint::new(ConstraintOp::After, TimeRef::Concrete(ts("2011"))));
        let cfg = RetrievalConfig::default();
        let out = hybrid_retrieve(&g, &[m], &ind, &cfg, &HashEmbedder).unwrap();
        assert!(!out.is_empty());
        // Each surviving path re-checks as valid and in-constraint.
        for sp in &out {
            assert!(validate_path(&sp.path));
            let t = representative_time(&sp.path).unwrap();
            assert!(ind.constraints.iter().all(|c| c.holds(&t)));
        }
        // No duplicates.
        let mut seen = std::collections::HashSet::new();
        assert!(out.iter().all(|sp| seen.insert(sp.path.clone())));
    }
}
