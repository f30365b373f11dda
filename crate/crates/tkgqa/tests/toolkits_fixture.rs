//! Toolkit operators exercised against the bundled case-study graph,
//! including the alias routing the reasoner-facing dispatcher accepts.

mod common;

use common::{case_subgraph, case_tkg, example_subgraph, ts};
use serde_json::json;
use tkgqa::store::{Direction, TimeWindow};
use tkgqa::toolkits::{
    after_first, before_last, between_range, build_call, count_results, day_events,
    direct_connection, execute, execute_all, one_hop, parse_selected_toolkits, period_events,
    timeline, ToolkitError, ToolkitName,
};

fn names(g: &tkgqa::Subgraph, facts: &[tkgqa::Fact]) -> Vec<String> {
    facts
        .iter()
        .map(|f| {
            format!(
                "{}|{}|{}|{}",
                g.tkg().entity_name(f.head),
                g.tkg().relation_name(f.relation),
                g.tkg().entity_name(f.tail),
                f.ts
            )
        })
        .collect()
}

#[test]
fn fixture_loads_with_expected_shape() {
    let tkg = case_tkg();
    assert_eq!(tkg.facts().len(), 19);
    assert!(tkg.entity_id("China").is_some());
    let [years, months, days] = tkg.granularity_histogram();
    assert_eq!((years, months, days), (0, 0, 19));
}

#[test]
fn neighbors_of_beijing_in_direction() {
    // Oracle: brute-force scan of the fixture for facts with tail Beijing.
    let g = case_subgraph();
    let tkg = g.tkg();
    let beijing = tkg.entity_id("Beijing").unwrap();
    let expected: Vec<_> = {
        let mut facts: Vec<_> =
            tkg.facts().iter().copied().filter(|f| f.tail == beijing).collect();
        tkg.sort_canonical(&mut facts);
        facts
    };
    let got = tkg.neighbors(beijing, Direction::In, TimeWindow::default()).unwrap();
    assert_eq!(got, expected);
    assert_eq!(got.len(), 5); // opening, closing, and three visits
}

#[test]
fn one_hop_window_and_limit() {
    let g = case_subgraph();
    let w = TimeWindow::new(Some(ts("2008-01-01")), Some(ts("2009-01-01")));
    let r = one_hop(&g, "Olympics 2008", Direction::Out, w, None, None).unwrap();
    assert_eq!(
        names(&g, &r.facts),
        vec![
            "Olympics 2008|opening|Beijing|2008-08-08",
            "Olympics 2008|closing|Beijing|2008-08-24",
        ]
    );
    let r1 = one_hop(&g, "Olympics 2008", Direction::Out, w, None, Some(1)).unwrap();
    assert_eq!(names(&g, &r1.facts), vec!["Olympics 2008|opening|Beijing|2008-08-08"]);
    // No in-window facts.
    let none = one_hop(
        &g,
        "Olympics 2008",
        Direction::Out,
        TimeWindow::new(Some(ts("2030")), None),
        None,
        None,
    )
    .unwrap();
    assert!(none.facts.is_empty());
}

#[test]
fn after_first_matches_the_worked_example() {
    let g = case_subgraph();
    let r = after_first(&g, "China", ts("2008-08-08"), Some("sign environmental treaty"), Some(1))
        .unwrap();
    assert_eq!(names(&g, &r.facts), vec!["Japan|sign_treaty_env|China|2009-02-10"]);

    let r2 =
        after_first(&g, "China", ts("2008-08-08"), Some("sign environmental treaty"), Some(2))
            .unwrap();
    assert_eq!(
        names(&g, &r2.facts),
        vec![
            "Japan|sign_treaty_env|China|2009-02-10",
            "Korea|sign_treaty_env|China|2009-07-18",
        ]
    );

    // Strict-after excludes the boundary date of the last matching fact.
    let none =
        after_first(&g, "China", ts("2010-03-02"), Some("sign environmental treaty"), Some(1))
            .unwrap();
    assert!(none.facts.is_empty());
}

#[test]
fn before_last_matches_the_worked_example() {
    let g = case_subgraph();
    let r = before_last(&g, "Beijing", ts("2010-06-26"), Some("visit"), Some(1)).unwrap();
    assert_eq!(names(&g, &r.facts), vec!["Barack Obama|visit|Beijing|2009-11-15"]);

    let r3 = before_last(&g, "Beijing", ts("2010-06-26"), Some("visit"), Some(3)).unwrap();
    assert_eq!(
        names(&g, &r3.facts),
        vec![
            "Barack Obama|visit|Beijing|2009-11-15",
            "Gordon Brown|visit|Beijing|2009-08-10",
            "Angela Merkel|visit|Beijing|2008-12-05",
        ]
    );

    let none = before_last(&g, "Beijing", ts("2000"), Some("visit"), Some(1)).unwrap();
    assert!(none.facts.is_empty());
}

#[test]
fn between_range_keeps_the_open_interval() {
    let g = case_subgraph();
    let r = between_range(
        &g,
        "Microsoft",
        (ts("2015-09-10"), ts("2018-11-22")),
        Some("collaborate with"),
        None,
    )
    .unwrap();
    assert_eq!(
        names(&g, &r.facts),
        vec![
            "NVIDIA|collaborate_with|Microsoft|2016-05-20",
            "OpenAI|collaborate_with|Microsoft|2018-03-14",
        ]
    );
    // Apple@2019-02-10 sits outside the window.
    assert!(!names(&g, &r.facts).iter().any(|n| n.contains("Apple")));

    let degenerate = between_range(
        &g,
        "Microsoft",
        (ts("2016-05-20"), ts("2016-05-20")),
        None,
        None,
    )
    .unwrap();
    assert!(degenerate.facts.is_empty());

    assert!(matches!(
        between_range(&g, "Microsoft", (ts("2018"), ts("2015")), None, None),
        Err(ToolkitError::InvalidWindow)
    ));
}

#[test]
fn day_events_is_exact_date_scoped_to_subgraph() {
    let g = case_subgraph();
    let r = day_events(&g, ts("2008-08-08"), None, None).unwrap();
    assert_eq!(names(&g, &r.facts), vec!["Olympics 2008|opening|Beijing|2008-08-08"]);

    assert!(day_events(&g, ts("1999-01-01"), None, None).unwrap().facts.is_empty());

    let visits = day_events(&g, ts("2009-11-15"), Some("visit"), None).unwrap();
    assert_eq!(names(&g, &visits.facts), vec!["Barack Obama|visit|Beijing|2009-11-15"]);

    assert!(matches!(
        day_events(&g, ts("2009"), None, None),
        Err(ToolkitError::GranularityError { .. })
    ));
}

#[test]
fn period_events_contains_interval() {
    let g = case_subgraph();
    // Oracle: brute-force scan for facts whose interval sits inside 2009.
    let expected = {
        let tkg = g.tkg();
        let mut facts: Vec<_> = tkg
            .facts()
            .iter()
            .copied()
            .filter(|f| f.ts.within(&ts("2009")))
            .collect();
        tkg.sort_canonical(&mut facts);
        facts
    };
    let r = period_events(&g, ts("2009"), None, None).unwrap();
    assert_eq!(r.facts, expected);
    assert_eq!(r.facts.len(), 5);

    let feb = period_events(&g, ts("2009-02"), None, None).unwrap();
    assert_eq!(names(&g, &feb.facts), vec!["Japan|sign_treaty_env|China|2009-02-10"]);

    assert!(period_events(&g, ts("2050"), None, None).unwrap().facts.is_empty());
    assert!(matches!(
        period_events(&g, ts("2009-02-10"), None, None),
        Err(ToolkitError::GranularityError { .. })
    ));
}

#[test]
fn direct_connection_pairs() {
    let g = example_subgraph();
    let r = direct_connection(&g, "Merkel", "Paris", None, TimeWindow::default()).unwrap();
    assert_eq!(r.facts.len(), 1);
    assert_eq!(r.facts[0].ts, ts("2012"));

    // Three hops apart: no direct edge.
    let none = direct_connection(&g, "Merkel", "EU", None, TimeWindow::default()).unwrap();
    assert!(none.facts.is_empty());

    let g = case_subgraph();
    let before = direct_connection(
        &g,
        "Japan",
        "China",
        None,
        TimeWindow::new(None, Some(ts("2009-01-01"))),
    )
    .unwrap();
    assert!(before.facts.is_empty());
}

#[test]
fn timeline_is_strictly_ascending() {
    let g = case_subgraph();
    let r = timeline(&g, "Beijing", None, TimeWindow::default(), Some("visit"), None).unwrap();
    assert_eq!(
        names(&g, &r.facts),
        vec![
            "Angela Merkel|visit|Beijing|2008-12-05",
            "Gordon Brown|visit|Beijing|2009-08-10",
            "Barack Obama|visit|Beijing|2009-11-15",
        ]
    );

    let first = timeline(&g, "Beijing", None, TimeWindow::default(), Some("visit"), Some(1))
        .unwrap();
    assert_eq!(names(&g, &first.facts), vec!["Angela Merkel|visit|Beijing|2008-12-05"]);

    let after = timeline(
        &g,
        "Beijing",
        None,
        TimeWindow::new(Some(ts("2009-01-01")), None),
        Some("visit"),
        None,
    )
    .unwrap();
    assert!(!names(&g, &after.facts).iter().any(|n| n.contains("Merkel")));
}

#[test]
fn count_composes_with_windowed_retrieval() {
    let g = case_subgraph();
    let unlimited = before_last(&g, "UN", ts("2020-01-01"), Some("hold"), None).unwrap();
    // Oracle: independent predicate scan over the whole fixture.
    let expected = g
        .tkg()
        .facts()
        .iter()
        .filter(|f| {
            g.tkg().entity_name(f.head) == "UN"
                && g.tkg().relation_name(f.relation) == "hold"
                && f.ts.end() < ts("2020-01-01").start()
                && g.tkg().entity_name(f.tail).to_lowercase().contains("climate")
        })
        .count();
    assert_eq!(count_results(&unlimited), expected);
    assert_eq!(count_results(&unlimited), 4);

    let empty = before_last(&g, "UN", ts("2000"), Some("hold"), None).unwrap();
    assert_eq!(count_results(&empty), 0);
}

#[test]
fn execute_dispatches_and_accepts_aliases() {
    let g = case_subgraph();

    // The worked AfterFirst call.
    let call = build_call(
        "AfterFirst",
        &json!({
            "entity": "China",
            "after": "2008-08-08",
            "relation_filter": "sign environmental treaty",
            "limit": 1,
        }),
    )
    .unwrap();
    let r = execute(&g, &call).unwrap();
    assert_eq!(names(&g, &r.facts), vec!["Japan|sign_treaty_env|China|2009-02-10"]);

    // `Before` routes to before-last semantics with no limit.
    let call = build_call(
        "Before",
        &json!({"entity": "UN", "before": "2020-01-01", "relation_filter": "hold", "keyword": "climate"}),
    )
    .unwrap();
    assert_eq!(call.name, ToolkitName::BeforeLast);
    let r = execute(&g, &call).unwrap();
    assert_eq!(r.facts.len(), 4);

    // `Count` wraps the same retrieval and reports the aggregate.
    let call = build_call(
        "Count",
        &json!({"entity": "UN", "before": "2020-01-01", "relation_filter": "hold", "keyword": "climate"}),
    )
    .unwrap();
    let r = execute(&g, &call).unwrap();
    assert_eq!(r.note.as_deref(), Some("count=4"));

    // `FirstLast` routes onto the timeline with a mode.
    let call = build_call(
        "FirstLast",
        &json!({"entity": "Beijing", "relation_filter": "visit", "mode": "last", "limit": 1}),
    )
    .unwrap();
    let r = execute(&g, &call).unwrap();
    assert_eq!(names(&g, &r.facts), vec!["Barack Obama|visit|Beijing|2009-11-15"]);

    // Missing parameters and unknown names are typed errors.
    let call = build_call("AfterFirst", &json!({"after": "2008-08-08"})).unwrap();
    assert!(matches!(execute(&g, &call), Err(ToolkitError::MissingParam("entity"))));
    assert!(matches!(
        build_call("Teleport", &json!({})),
        Err(ToolkitError::UnknownToolkit(_))
    ));
}

#[test]
fn execute_is_deterministic_and_priority_ordered() {
    let g = case_subgraph();
    let mk = |prio: u32| {
        let mut c = build_call(
            "Timeline",
            &json!({"entity": "Beijing", "relation_filter": "visit"}),
        )
        .unwrap();
        c.priority = prio;
        c
    };
    let calls = vec![mk(2), mk(1)];
    let results = execute_all(&g, &calls).unwrap();
    assert_eq!(results[0].call.priority, 1);
    assert_eq!(results[1].call.priority, 2);

    let a = serde_json::to_string(&execute(&g, &mk(1)).unwrap()).unwrap();
    let b = serde_json::to_string(&execute(&g, &mk(1)).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn parse_selected_toolkits_wire_format() {
    let v = json!({
        "selected_toolkits": [
            {"original_name": "AfterFirst", "reasoning": "x", "priority": 1,
             "parameters": {"entity": "China", "after": "2008-08-08", "limit": "1"}},
            {"original_name": "OneHop", "priority": 2, "parameters": {"entity": "Beijing"}}
        ]
    });
    let calls = parse_selected_toolkits(&v).unwrap();
    assert_eq!(calls.len(), 2);
    assert_eq!(calls[0].name, ToolkitName::AfterFirst);
    assert_eq!(calls[0].params.limit, Some(1));
    assert_eq!(calls[1].priority, 2);

    assert!(parse_selected_toolkits(&json!({"other": []})).is_err());
}

#[test]
fn results_are_subsets_of_the_subgraph() {
    // Restrict the subgraph to one cluster; toolkit results stay inside it.
    let tkg = case_tkg();
    let topics = vec![tkg.entity_id("UN").unwrap()];
    let g = tkgqa::Subgraph::build(tkg, &topics, 1).unwrap();
    let r = before_last(&g, "UN", ts("2030"), None, None).unwrap();
    assert_eq!(r.facts.len(), 5);
    assert!(r.facts.iter().all(|f| {
        g.contains_entity(f.head) && g.contains_entity(f.tail)
    }));
}
