mod common;

use std::collections::HashMap;

use common::*;
use mndsim::aggregates::{read_sim_data, SimFiles};
use mndsim::config::{Mno, Technology};
use mndsim::engine::{run_replications, run_simulation, EngineError, Scenario, Simulation};
use mndsim::events::EventCode;
use mndsim::mobility::MovementPattern;

fn read_csv(path: &std::path::Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn empty_population_writes_headers_only() {
    let files = toy(0, 10, 1, MovementPattern::HomeWork);
    let out = run_simulation(&files.paths, &files.out("out"), None).unwrap();
    let (header, rows) = read_csv(&out.persons);
    assert_eq!(header.len(), 7);
    assert!(rows.is_empty());
    for e in &out.events {
        let (header, rows) = read_csv(e);
        assert_eq!(header.len(), 9);
        assert!(rows.is_empty());
    }
    let (_, grid) = read_csv(&out.grid);
    assert_eq!(grid, vec![vec!["0", "0", "10", "10", "20", "16"]]);
    let (_, signal) = read_csv(&out.signal[0]);
    assert_eq!(signal.len(), 320);
    let (_, antennas) = read_csv(&out.antennas);
    assert_eq!(antennas.len(), 1);
    assert_eq!(antennas[0].len(), 20);
}

#[test]
fn single_person_emits_attach_then_updates() {
    let files = toy(1, 10, 3, MovementPattern::HomeWork);
    let out = run_simulation(&files.paths, &files.out("out"), None).unwrap();
    let (_, events) = read_csv(&out.events[0]);
    assert_eq!(events.len(), 11);
    let codes: Vec<&str> = events.iter().map(|e| e[2].as_str()).collect();
    assert_eq!(codes[0], "0");
    assert!(codes[1..].iter().all(|c| *c == "1"));
    let (_, persons) = read_csv(&out.persons);
    assert_eq!(persons.len(), 11);
}

#[test]
fn same_seed_gives_identical_files() {
    let files = toy(5, 19, 0, MovementPattern::RandomWalkClosedMap);
    run_simulation(&files.paths, &files.out("a"), Some(42)).unwrap();
    run_simulation(&files.paths, &files.out("b"), Some(42)).unwrap();
    run_simulation(&files.paths, &files.out("c"), Some(43)).unwrap();
    let a = digests(&files.out("a"));
    assert_eq!(a, digests(&files.out("b")));
    assert_ne!(a["persons.csv"], digests(&files.out("c"))["persons.csv"]);
}

#[test]
fn persons_rows_and_event_correspondence() {
    let out_dir = tempfile::tempdir().unwrap();
    let out = run_simulation(&fixture_paths(), out_dir.path(), None).unwrap();
    let (_, persons) = read_csv(&out.persons);
    assert_eq!(persons.len(), 11 * 20);
    let mut at: HashMap<(String, String), (String, String)> = HashMap::new();
    for r in &persons {
        for d in [&r[5], &r[6]] {
            if !d.is_empty() {
                assert!(at
                    .insert((r[0].clone(), d.clone()), (r[2].clone(), r[3].clone()))
                    .is_none());
            }
        }
    }
    let (_, events) = read_csv(&out.events[0]);
    assert!(!events.is_empty());
    for e in &events {
        let pos = at
            .get(&(e[0].clone(), e[3].clone()))
            .expect("event has a persons row");
        assert_eq!(pos, &(e[4].clone(), e[5].clone()));
    }
}

#[test]
fn manifest_digests_match_inputs_and_outputs() {
    let out_dir = tempfile::tempdir().unwrap();
    let paths = fixture_paths();
    let out = run_simulation(&paths, out_dir.path(), Some(7)).unwrap();
    let m = &out.manifest;
    assert_eq!(m.seed, 7);
    assert_eq!(
        m.inputs["simulation"].sha256,
        sha256_hex(&std::fs::read(&paths.simulation).unwrap())
    );
    for (name, digest) in &m.outputs {
        assert_eq!(
            digest,
            &sha256_hex(&std::fs::read(out_dir.path().join(name)).unwrap())
        );
    }
    let text = std::fs::read_to_string(&out.manifest_path).unwrap();
    assert!(!text.contains(out_dir.path().to_str().unwrap()));
}

#[test]
fn writers_round_trip_through_reader() {
    let out_dir = tempfile::tempdir().unwrap();
    let out = run_simulation(&fixture_paths(), out_dir.path(), None).unwrap();
    let data = read_sim_data(&SimFiles::in_dir(out_dir.path()), None).unwrap();
    let scenario = fixture_scenario();
    let sim = Simulation::new(scenario, out.manifest.seed).unwrap();
    assert_eq!(data.grid, *sim.grid());
    assert_eq!(data.network, sim.antennas());
    assert_eq!(data.signal.len() as u64, 3 * data.grid.n_tiles());
    assert_eq!(data.individuals.len(), 11 * 20);
    assert_eq!(data.crs_code, 2062);
    let (_, events) = read_csv(&out.events[0]);
    assert_eq!(data.events.len(), events.len());
    let (_, cells) = read_csv(&out.coverage[0]);
    let covered: usize = data.coverage.iter().map(|c| c.covered_tiles.len()).sum();
    assert_eq!(covered, cells.len());
}

#[test]
fn two_operators_get_separate_files() {
    let mut scenario = fixture_scenario();
    scenario.sim.mno_list.push(Mno {
        id: 2,
        name: "MNO2".into(),
        tech: Technology::G3,
    });
    scenario.sim.prob_devices.p0 = 0.0;
    scenario.sim.prob_devices.p1 = 0.0;
    scenario.sim.prob_devices.p2 = 1.0;
    let mut second = central_antenna();
    second.antenna_id = mndsim::AntennaId(10);
    second.mno_id = 2;
    second.mno_name = "MNO2".into();
    scenario.antennas.push(second);
    let files = write_scenario(&scenario.sim, &scenario.persons, &scenario.antennas);
    let out = run_simulation(&files.paths, &files.out("out"), None).unwrap();
    assert_eq!(out.events.len(), 2);
    let (_, mno2) = read_csv(&out.events[1]);
    assert!(!mno2.is_empty());
    assert!(mno2.iter().all(|e| e[1] == "10" && e[7] == "3G"));
    // every second device belongs to MNO2
    assert!(mno2.iter().all(|e| e[3].parse::<u64>().unwrap() % 2 == 0));
    let data = read_sim_data(&SimFiles::in_dir(&files.out("out")), None).unwrap();
    assert!(data
        .events
        .iter()
        .any(|e| e.event_code == EventCode::Attach));
}

#[test]
fn antenna_of_unlisted_operator_is_rejected() {
    let mut scenario = fixture_scenario();
    scenario.antennas[0].mno_id = 9;
    assert!(matches!(
        Simulation::new(scenario, 0),
        Err(EngineError::UnknownMno { mno_id: 9, .. })
    ));
}

#[test]
fn unwritable_output_dir_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let err = run_simulation(&fixture_paths(), &blocker.join("out"), None).unwrap_err();
    assert!(matches!(err, EngineError::Io { .. }), "{err}");
}

#[test]
fn invalid_input_reports_rule() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = fixture_paths();
    paths.simulation = fixture("invalid/sim_probabilities_do_not_sum.xml");
    let err = run_simulation(&paths, dir.path(), None).unwrap_err();
    match err {
        EngineError::Config(e) => assert!(e.report().unwrap().has_rule("probability_sum")),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn replications_use_consecutive_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let outs = run_replications(&fixture_paths(), dir.path(), Some(100), 3).unwrap();
    let seeds: Vec<u64> = outs.iter().map(|o| o.manifest.seed).collect();
    assert_eq!(seeds, [100, 101, 102]);
    let single = tempfile::tempdir().unwrap();
    run_simulation(&fixture_paths(), single.path(), Some(101)).unwrap();
    assert_eq!(digests(&dir.path().join("rep_002")), digests(single.path()));
}

#[test]
fn uneven_increment_ends_on_end_time() {
    let mut scenario: Scenario = fixture_scenario();
    scenario.sim.time_increment = 3;
    let mut sim = Simulation::new(scenario, 1).unwrap();
    let mut ts = vec![];
    while let Some(t) = sim.next_tick() {
        ts.push(t.t);
    }
    assert_eq!(ts, [0, 3, 6, 9, 10]);
}
