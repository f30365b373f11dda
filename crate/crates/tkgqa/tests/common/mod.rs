//! Shared fixtures for integration tests: the bundled case-study TKG and
//! the worked three-hop example graph.

pub mod oracles;

use std::io::Cursor;
use std::sync::Arc;

use tkgqa::store::{parse_timestamp, Subgraph, Timestamp, Tkg, TkgBuilder};

pub const CASE_TSV: &str = include_str!("../../data/case_studies.tsv");
pub const ALIASES_TSV: &str = include_str!("../../data/relation_aliases.tsv");
pub const RULES_JSON: &str = include_str!("../../data/scripted_rules.json");
pub const COLD_START: &str = include_str!("../../data/cold_start.jsonl");
pub const QUESTIONS_JSONL: &str = include_str!("../../data/case_questions.jsonl");

pub fn ts(s: &str) -> Timestamp {
    parse_timestamp(s).unwrap()
}

/// The bundled case-study graph with relation aliases attached.
pub fn case_tkg() -> Arc<Tkg> {
    let mut tkg = Tkg::load_tsv(Cursor::new(CASE_TSV)).unwrap();
    tkg.load_aliases(Cursor::new(ALIASES_TSV)).unwrap();
    Arc::new(tkg)
}

/// A subgraph covering every cluster of the case-study graph.
pub fn case_subgraph() -> Subgraph {
    let tkg = case_tkg();
    let topics: Vec<_> = [
        "Olympics 2008",
        "China",
        "2010 Summit",
        "Beijing",
        "UN",
        "2015 Conference",
        "2018 Summit",
        "Microsoft",
    ]
    .iter()
    .map(|n| tkg.entity_id(n).unwrap())
    .collect();
    Subgraph::build(tkg, &topics, 3).unwrap()
}

/// The worked example graph: a three-hop chain plus a second cluster used
/// for reasoning-path checks.
pub fn example_tkg() -> Arc<Tkg> {
    let mut b = TkgBuilder::new();
    b.add("Merkel", "visit", "Paris", ts("2012"));
    b.add("Paris", "host", "Conference", ts("2013"));
    b.add("Conference", "attended_by", "EU", ts("2014"));
    b.add("Obama", "meet", "UN", ts("2009"));
    b.add("Beijing", "linked_via", "EU", ts("2011"));
    b.add("EU", "event_in", "Paris", ts("2012"));
    Arc::new(b.build())
}

pub fn example_subgraph() -> Subgraph {
    let tkg = example_tkg();
    let topics: Vec<_> =
        ["Merkel", "Obama", "Beijing"].iter().map(|n| tkg.entity_id(n).unwrap()).collect();
    Subgraph::build(tkg, &topics, 3).unwrap()
}
