//! Dense-retrieval layer: a pluggable text embedder, an exact cosine
//! top-k index, entity linking, and the canonical verbalization of facts,
//! paths, and indicators into embeddable text.
//!
//! The bundled [`HashEmbedder`] is a deterministic 256-dimension token-hash
//! bag of words (lowercase, split on non-alphanumerics, FNV-1a bucket,
//! L2-normalized). It exists so the whole pipeline runs offline and
//! byte-reproducibly; deployments can plug any embedder behind the same
//! trait, including the JSON [`HttpEmbedder`].

use serde::{Deserialize, Serialize};

use crate::indicator::Indicator;
use crate::store::{Fact, TemporalPath, Tkg};

/// Dimension of the bundled token-hash embedder.
pub const HASH_EMBEDDER_DIM: usize = 256;

/// Threshold below which an entity-link candidate is rejected.
pub const DEFAULT_LINK_THRESHOLD: f64 = 0.35;

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("vector dimension mismatch: index is {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding endpoint error: {0}")]
    Endpoint(String),
}

/// An L2-normalized dense vector (the zero vector only for empty text).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vector(pub Vec<f64>);

impl Vector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }
}

/// Cosine similarity; zero vectors yield 0.
pub fn cosine(a: &Vector, b: &Vector) -> f64 {
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Text-to-vector model. Implementations must be pure: equal input, equal
/// output, across process restarts.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Vector;
}

/// Deterministic token-hash bag-of-words embedder.
#[derive(Debug, Default, Clone)]
pub struct HashEmbedder;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Lowercased alphanumeric tokens of `text`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_string())
        .collect()
}

impl Embedder for HashEmbedder {
    fn dimension(&self) -> usize {
        HASH_EMBEDDER_DIM
    }

    fn embed(&self, text: &str) -> Vector {
        let mut acc = vec![0.0f64; HASH_EMBEDDER_DIM];
        for tok in tokenize(text) {
            let bucket = (fnv1a64(tok.as_bytes()) % HASH_EMBEDDER_DIM as u64) as usize;
            acc[bucket] += 1.0;
        }
        let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut acc {
                *x /= norm;
            }
        }
        Vector(acc)
    }
}

/// Adapter for a JSON embedding endpoint:
/// request `{"input": [texts]}`, response `{"embeddings": [[...]]}`.
pub struct HttpEmbedder {
    endpoint: String,
    dimension: usize,
    client: reqwest::blocking::Client,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, dimension: usize) -> Self {
        HttpEmbedder {
            endpoint: endpoint.into(),
            dimension,
            client: reqwest::blocking::Client::new(),
        }
    }

    fn call(&self, text: &str) -> Result<Vector, EmbeddingError> {
        #[derive(Serialize)]
        struct Req<'a> {
            input: [&'a str; 1],
        }
        #[derive(Deserialize)]
        struct Resp {
            embeddings: Vec<Vec<f64>>,
        }
        let resp: Resp = self
            .client
            .post(&self.endpoint)
            .json(&Req { input: [text] })
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| EmbeddingError::Endpoint(e.to_string()))?
            .json()
            .map_err(|e| EmbeddingError::Endpoint(e.to_string()))?;
        let mut v = resp
            .embeddings
            .into_iter()
            .next()
            .ok_or_else(|| EmbeddingError::Endpoint("empty embeddings array".to_string()))?;
        // Normalize defensively; the trait contract is unit (or zero) norm.
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        }
        Ok(Vector(v))
    }
}

impl Embedder for HttpEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Vector {
        match self.call(text) {
            Ok(v) if v.dim() == self.dimension => v,
            // The trait is infallible by contract; endpoint failures and
            // dimension drift degrade to the zero vector rather than abort
            // a whole reasoning run.
            _ => Vector(vec![0.0; self.dimension]),
        }
    }
}

/// Exact (flat) cosine index over tagged items.
pub struct EmbeddingIndex {
    dimension: usize,
    entries: Vec<IndexEntry>,
}

struct IndexEntry {
    id: u64,
    vector: Vector,
    tags: Vec<String>,
}

impl EmbeddingIndex {
    pub fn new(dimension: usize) -> Self {
        EmbeddingIndex { dimension, entries: Vec::new() }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Insert or replace the entry with `id`.
    pub fn insert(&mut self, id: u64, vector: Vector, tags: Vec<String>) -> Result<(), EmbeddingError> {
        if vector.dim() != self.dimension {
            return Err(EmbeddingError::DimensionMismatch {
                expected: self.dimension,
                got: vector.dim(),
            });
        }
        if let Some(e) = self.entries.iter_mut().find(|e| e.id == id) {
            e.vector = vector;
            e.tags = tags;
        } else {
            self.entries.push(IndexEntry { id, vector, tags });
        }
        Ok(())
    }

    /// Top-k entries by cosine similarity among those passing `filter`,
    /// sorted by similarity descending with ties broken by id ascending.
    pub fn search(
        &self,
        query: &Vector,
        k: usize,
        filter: Option<&dyn Fn(&[String]) -> bool>,
    ) -> Result<Vec<(u64, f64)>, EmbeddingError> {
        if query.dim() != self.dimension {
            return Err(EmbeddingError::DimensionMismatch {
                expected: self.dimension,
                got: query.dim(),
            });
        }
        let mut scored: Vec<(u64, f64)> = self
            .entries
            .iter()
            .filter(|e| filter.map_or(true, |f| f(&e.tags)))
            .map(|e| (e.id, cosine(query, &e.vector)))
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }
}

/// One linked mention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityLink {
    pub mention: String,
    pub entity: crate::store::EntityId,
    pub similarity: f64,
}

/// Link surface mentions to graph entities by embedding similarity.
///
/// Each mention maps to its best-scoring entity; mentions whose best
/// similarity falls below `threshold` yield no link and are simply absent
/// from the result.
pub fn link_entities(
    tkg: &Tkg,
    embedder: &dyn Embedder,
    mentions: &[String],
    threshold: f64,
) -> Vec<EntityLink> {
    let mut index = EmbeddingIndex::new(embedder.dimension());
    for (id, name) in tkg.entity_names() {
        index
            .insert(id.0 as u64, embedder.embed(name), Vec::new())
            .expect("entity index dimension is fixed");
    }
    let mut out = Vec::new();
    for mention in mentions {
        let query = embedder.embed(mention);
        let Ok(hits) = index.search(&query, 1, None) else {
            continue;
        };
        if let Some(&(id, sim)) = hits.first() {
            if sim >= threshold {
                out.push(EntityLink {
                    mention: mention.clone(),
                    entity: crate::store::EntityId(id as u32),
                    similarity: sim,
                });
            }
        }
    }
    out
}

// --- Canonical verbalization -------------------------------------------
//
// These templates are the documented, bit-exact text forms fed to the
// embedder (see docs/formats.md):
//   fact:      `head relation tail at <ts>`
//   path:      facts joined by ` ; ` (original fact orientation)
//   indicator: `subject relation object` + ` <op> <anchor>` per constraint

pub fn verbalize_fact(tkg: &Tkg, fact: &Fact) -> String {
    format!(
        "{} {} {} at {}",
        tkg.entity_name(fact.head),
        tkg.relation_name(fact.relation),
        tkg.entity_name(fact.tail),
        fact.ts
    )
}

pub fn verbalize_path(tkg: &Tkg, path: &TemporalPath) -> String {
    path.steps
        .iter()
        .map(|s| verbalize_fact(tkg, &s.fact))
        .collect::<Vec<_>>()
        .join(" ; ")
}

pub fn verbalize_indicator(indicator: &Indicator) -> String {
    let mut out = format!(
        "{} {} {}",
        indicator.subject.text(),
        indicator.relation_text,
        indicator.object.text()
    );
    for c in &indicator.constraints {
        out.push(' ');
        out.push_str(&c.to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indicator::{ConstraintOp, Term, TimeConstraint, TimeRef};
    use crate::store::{parse_timestamp, TkgBuilder};

    fn ts(s: &str) -> crate::store::Timestamp {
        parse_timestamp(s).unwrap()
    }

    #[test]
    fn embed_is_normalized_and_pure() {
        let e = HashEmbedder;
        let v1 = e.embed("visit Beijing");
        let v2 = e.embed("visit Beijing");
        assert_eq!(v1, v2);
        assert!((v1.norm() - 1.0).abs() < 1e-12);
        assert!(e.embed("").is_zero());
    }

    #[test]
    fn token_overlap_orders_similarity() {
        let e = HashEmbedder;
        let a = e.embed("visit Beijing");
        let same = cosine(&a, &e.embed("visit Beijing"));
        let partial = cosine(&a, &e.embed("visit Beijing 2009"));
        let disjoint = cosine(&a, &e.embed("sign treaty"));
        assert!((same - 1.0).abs() < 1e-12);
        assert!(disjoint < partial, "disjoint {disjoint} vs partial {partial}");
    }

    #[test]
    fn search_matches_brute_force() {
        let e = HashEmbedder;
        let mut idx = EmbeddingIndex::new(e.dimension());
        let texts = ["alpha beta", "beta gamma", "gamma delta"];
        for (i, t) in texts.iter().enumerate() {
            idx.insert(i as u64, e.embed(t), vec![]).unwrap();
        }
        let q = e.embed("beta");
        let got = idx.search(&q, 2, None).unwrap();
        // Brute force over all entries.
        let mut want: Vec<(u64, f64)> =
            texts.iter().enumerate().map(|(i, t)| (i as u64, cosine(&q, &e.embed(t)))).collect();
        want.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        want.truncate(2);
        assert_eq!(got, want);
    }

    #[test]
    fn search_edge_cases() {
        let e = HashEmbedder;
        let mut idx = EmbeddingIndex::new(e.dimension());
        idx.insert(7, e.embed("x"), vec!["tag".into()]).unwrap();
        let q = e.embed("x");
        assert_eq!(idx.search(&q, 10, None).unwrap().len(), 1);
        let none = idx.search(&q, 10, Some(&|_tags: &[String]| false)).unwrap();
        assert!(none.is_empty());
        let bad = idx.search(&Vector(vec![0.0; 3]), 1, None);
        assert!(matches!(bad, Err(EmbeddingError::DimensionMismatch { .. })));
    }

    fn fixture() -> Tkg {
        let mut b = TkgBuilder::new();
        b.add("Barack Obama", "visit", "Beijing", ts("2009-11-15"));
        b.add("Japan", "sign_treaty_env", "China", ts("2009-02-10"));
        b.build()
    }

    #[test]
    fn exact_name_links_at_similarity_one() {
        let g = fixture();
        let links =
            link_entities(&g, &HashEmbedder, &["Beijing".to_string()], DEFAULT_LINK_THRESHOLD);
        assert_eq!(links.len(), 1);
        assert_eq!(g.entity_name(links[0].entity), "Beijing");
        assert!((links[0].similarity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn typo_links_through_shared_token() {
        let g = fixture();
        let links =
            link_entities(&g, &HashEmbedder, &["Barak Obama".to_string()], DEFAULT_LINK_THRESHOLD);
        assert_eq!(links.len(), 1);
        assert_eq!(g.entity_name(links[0].entity), "Barack Obama");
        assert!(links[0].similarity >= DEFAULT_LINK_THRESHOLD);
    }

    #[test]
    fn unknown_mention_does_not_link() {
        let g = fixture();
        let links =
            link_entities(&g, &HashEmbedder, &["Atlantis".to_string()], DEFAULT_LINK_THRESHOLD);
        assert!(links.is_empty());
    }

    #[test]
    fn verbalization_templates() {
        let g = fixture();
        assert_eq!(
            verbalize_fact(&g, &g.facts()[1]),
            "Japan sign_treaty_env China at 2009-02-10"
        );
        let p = crate::store::TemporalPath::from_facts(&[g.facts()[1], g.facts()[0]]);
        assert_eq!(
            verbalize_path(&g, &p),
            "Japan sign_treaty_env China at 2009-02-10 ; Barack Obama visit Beijing at 2009-11-15"
        );
        let mut ind = Indicator::new(
            Term::Variable("?y".into()),
            "sign environmental treaty",
            Term::Entity("China".into()),
            crate::indicator::TemporalType::AfterNFirst,
        );
        ind.constraints.push(TimeConstraint::new(
            ConstraintOp::After,
            TimeRef::Concrete(ts("2008-08-08")),
        ));
        assert_eq!(
            verbalize_indicator(&ind),
            "?y sign environmental treaty China after 2008-08-08"
        );
    }
}
