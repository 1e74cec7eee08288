mod common;

use std::collections::{BTreeMap, BTreeSet};

use coinet::incidence::{
    partition_events_by_attribute, read_interchange, select_events_grouped, write_catalog,
    write_rows, Binning,
};
use coinet::{build_incidence, select_events, EventCatalog, EventSelection, ScenarioRecord};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn labels(c: &EventCatalog) -> BTreeSet<String> {
    c.entries().iter().map(|e| e.label.clone()).collect()
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// One scenario per listed (events, count) repetition.
fn repeated(groups: &[(&[&str], usize)]) -> Vec<coinet::Result<ScenarioRecord>> {
    let mut out = Vec::new();
    for (events, times) in groups {
        for _ in 0..*times {
            out.push(Ok(ScenarioRecord::new(format!("s{}", out.len()), events.iter().copied())));
        }
    }
    out
}

#[test]
fn column_sums_match_counted_frequencies() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pool: Vec<String> = (0..25).map(|k| format!("ev{k}")).collect();
    let recs: Vec<ScenarioRecord> = (0..100)
        .map(|i| {
            let k = rng.gen_range(1..6);
            ScenarioRecord::new(format!("r{i}"), (0..k).map(|_| pool[rng.gen_range(0..25)].clone()))
        })
        .collect();
    let mut oracle: BTreeMap<String, u64> = BTreeMap::new();
    for r in &recs {
        for e in &r.events {
            *oracle.entry(e.clone()).or_default() += 1;
        }
    }
    let (x, cat) = build_incidence(recs.into_iter().map(Ok)).unwrap();
    let sums = x.column_sums();
    assert_eq!(cat.len(), oracle.len());
    for (j, s) in sums.iter().enumerate() {
        let label = cat.label(j as u32);
        assert_eq!(*s, oracle[label], "{label}");
        assert_eq!(cat.frequency(j as u32), *s);
    }
    assert_eq!(x.nnz() as u64, oracle.values().sum::<u64>());
}

#[test]
fn coverage_half_keeps_dominant_event() {
    let recs = repeated(&[(&["A"], 6), (&["B"], 3), (&["C"], 1)]);
    let (x, cat) = build_incidence(recs).unwrap();
    let (_, kept) = select_events(&x, &cat, &EventSelection::CoverageFraction(0.5)).unwrap();
    assert_eq!(labels(&kept), set(&["A"]));
}

#[test]
fn grouped_selection_keeps_group_and_top_topic() {
    let recs = repeated(&[(&["g", "t1"], 8), (&["g", "t2"], 1), (&["g", "t3"], 1), (&["t2", "t3"], 5)]);
    let (x, cat) = build_incidence(recs).unwrap();
    let (_, kept) = select_events_grouped(&x, &cat, &["g"], 0.2).unwrap();
    assert_eq!(labels(&kept), set(&["g", "t1"]));
}

#[test]
fn decade_bins_on_six_books() {
    let rows = common::read_fixture("decades.csv");
    let recs: Vec<_> = rows
        .iter()
        .take(6)
        .map(|(id, year, ev)| {
            let r = ScenarioRecord::new(id.clone(), ev.iter().cloned());
            Ok(r.with_attribute("year", year.unwrap().to_string()))
        })
        .collect();
    let mut bins = partition_events_by_attribute(recs, "year", Binning::Decade);
    let (x, mut cat) = build_incidence(&mut bins).unwrap();
    cat.mark(bins.markers().iter().map(String::as_str));
    assert_eq!(bins.markers(), &set(&["1960s", "1970s"]));
    assert_eq!(x.n_scenarios(), 6);
    let f = |l: &str| cat.frequency(cat.id_of(l).unwrap());
    // b01..b04 in the sixties, b05 and b06 in the seventies
    assert_eq!(f("1960s"), 4);
    assert_eq!(f("1970s"), 2);
    assert!(cat.get(cat.id_of("1960s").unwrap()).unwrap().marker);
    assert!(!cat.get(cat.id_of("Physics").unwrap()).unwrap().marker);
    let (_, top) = select_events(&x, &cat, &EventSelection::TopK(3)).unwrap();
    // Great Britain 5, Fiction in English 4, 1960s 4 (label order breaks the tie)
    assert_eq!(
        top.entries().iter().map(|e| e.label.as_str()).collect::<Vec<_>>(),
        ["Great Britain", "1960s", "Fiction in English"]
    );
}

#[test]
fn decade_fixture_top_six() {
    let rows = common::read_fixture("decades.csv");
    let recs = rows.iter().map(|(id, year, ev)| {
        Ok(ScenarioRecord::new(id.clone(), ev.iter().cloned())
            .with_attribute("year", year.unwrap().to_string()))
    });
    let bins = partition_events_by_attribute(recs, "year", Binning::Decade);
    let (x, cat) = build_incidence(bins).unwrap();
    assert_eq!((x.n_scenarios(), cat.len()), (12, 11));
    let (_, top) = select_events(&x, &cat, &EventSelection::TopK(6)).unwrap();
    assert_eq!(
        labels(&top),
        set(&["Fiction in English", "Great Britain", "Information technology", "1960s", "1970s", "1980s"])
    );
}

fn random_records() -> impl Strategy<Value = Vec<ScenarioRecord>> {
    prop::collection::vec(prop::collection::btree_set(0u8..15, 0..6), 1..40).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, ev)| ScenarioRecord::new(format!("s{i}"), ev.into_iter().map(|e| format!("e{e:02}"))))
            .collect()
    })
}

fn selection() -> impl Strategy<Value = EventSelection> {
    prop_oneof![
        (0u64..6).prop_map(EventSelection::MinCount),
        (1usize..20).prop_map(EventSelection::TopK),
        (0.01f64..=1.0).prop_map(EventSelection::TopFraction),
        (0.01f64..=1.0).prop_map(EventSelection::CoverageFraction),
    ]
}

proptest! {
    #[test]
    fn selection_is_idempotent(recs in random_records(), sel in selection()) {
        let (x, cat) = build_incidence(recs.into_iter().map(Ok)).unwrap();
        let (x1, c1) = select_events(&x, &cat, &sel).unwrap();
        // top_fraction is relative to M, so it is only a fixed point at 1.0
        let again = match &sel {
            EventSelection::TopFraction(_) => EventSelection::TopFraction(1.0),
            EventSelection::CoverageFraction(_) => EventSelection::CoverageFraction(1.0),
            s => s.clone(),
        };
        let (x2, c2) = select_events(&x1, &c1, &again).unwrap();
        prop_assert_eq!(&x1, &x2);
        prop_assert_eq!(&c1, &c2);
        prop_assert_eq!(x1.column_sums(), c1.entries().iter().map(|e| e.frequency).collect::<Vec<_>>());
    }

    #[test]
    fn top_k_all_is_identity(recs in random_records()) {
        let (x, cat) = build_incidence(recs.into_iter().map(Ok)).unwrap();
        let (x1, c1) = select_events(&x, &cat, &EventSelection::TopK(cat.len().max(1))).unwrap();
        prop_assert_eq!(&x1, &x);
        prop_assert_eq!(&c1, &cat);
    }

    #[test]
    fn coverage_prefix_is_minimal(recs in random_records(), f in 0.01f64..=1.0) {
        let (x, cat) = build_incidence(recs.into_iter().map(Ok)).unwrap();
        prop_assume!(!cat.is_empty());
        let (_, kept) = select_events(&x, &cat, &EventSelection::CoverageFraction(f)).unwrap();
        let total = cat.total_frequency() as f64;
        let freqs: Vec<u64> = cat.entries().iter().map(|e| e.frequency).collect();
        let k = kept.len();
        prop_assert_eq!(kept.entries(), &cat.entries()[..k]);
        prop_assert!(freqs[..k].iter().sum::<u64>() as f64 >= f * total);
        prop_assert!(k == 1 || ((freqs[..k - 1].iter().sum::<u64>() as f64) < f * total));
    }

    #[test]
    fn interchange_round_trip(recs in random_records()) {
        let (x, cat) = build_incidence(recs.into_iter().map(Ok)).unwrap();
        let (mut c, mut r) = (Vec::new(), Vec::new());
        write_catalog(&mut c, &cat).unwrap();
        write_rows(&mut r, &x).unwrap();
        let (x2, cat2) = read_interchange(c.as_slice(), r.as_slice()).unwrap();
        prop_assert_eq!(x2, x);
        prop_assert_eq!(cat2.entries().iter().map(|e| (&e.label, e.frequency)).collect::<Vec<_>>(),
                        cat.entries().iter().map(|e| (&e.label, e.frequency)).collect::<Vec<_>>());
    }
}
