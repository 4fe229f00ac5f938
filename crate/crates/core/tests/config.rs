mod common;

use common::*;
use mndsim::config::{
    parse_antennas_config, parse_map, parse_persons_config, parse_simulation_config, update_config,
    validate_config, CellType, ConfigError, OverrideTree, Technology,
};
use mndsim::mobility::{ManhattanGrid, MovementPattern};

#[test]
fn shipped_fixtures_parse() {
    let sim = parse_simulation_config(&fixture("simulation.xml")).unwrap();
    assert_eq!(sim.ticks().len(), 11);
    assert_eq!(sim.mno_list[0].tech, Technology::G4);
    assert_eq!(sim.movement_pattern, MovementPattern::HomeWork);
    let persons = parse_persons_config(&fixture("persons.xml")).unwrap();
    assert_eq!(persons.num_persons, 20);
    let antennas = parse_antennas_config(&fixture("antennas.xml")).unwrap();
    assert_eq!(antennas.len(), 3);
    assert_eq!(antennas[2].cell_type, CellType::Directional120);
    assert_eq!(antennas[2].beam_h_deg, 120.0);
    assert_eq!(antennas[0].beam_h_deg, 360.0);
    let map = parse_map(&fixture("map.wkt"), &fixture("map.xml")).unwrap();
    assert_eq!(map.crs, 2062);
    assert_eq!(map.subregions.len(), 4);
    assert_eq!(map.territory().unwrap().area(), 200.0 * 160.0);
}

#[test]
fn update_writes_overridden_copy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("new.xml");
    let before = std::fs::read(fixture("simulation.xml")).unwrap();
    let overrides = OverrideTree::from_assignments(&[
        "end_time=11",
        "movement_pattern.manhattan_grid@type=home_work_manhattan",
        "movement_pattern.manhattan_grid.x_step=40",
        "movement_pattern.manhattan_grid.y_step=40",
        "movement_pattern.manhattan_grid.x_origin=0",
        "movement_pattern.manhattan_grid.y_origin=0",
    ])
    .unwrap();
    let report = update_config(
        &fixture("simulation.xml"),
        &overrides,
        "simulation_rules".as_ref(),
        &out,
    )
    .unwrap();
    assert!(report.is_valid());
    assert_eq!(std::fs::read(fixture("simulation.xml")).unwrap(), before);
    let sim = parse_simulation_config(&out).unwrap();
    assert_eq!(sim.end_time, 11);
    assert_eq!(
        sim.movement_pattern,
        MovementPattern::HomeWorkManhattan(ManhattanGrid {
            x_step: 40.0,
            y_step: 40.0,
            x_origin: 0.0,
            y_origin: 0.0
        })
    );
    // everything not overridden is preserved
    let original = parse_simulation_config(&fixture("simulation.xml")).unwrap();
    assert_eq!(sim.prob_devices, original.prob_devices);
    assert_eq!(sim.mno_list, original.mno_list);
}

#[test]
fn invalid_update_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("new.xml");
    let overrides = OverrideTree::from_assignments(&["end_time=-5"]).unwrap();
    let err = update_config(
        &fixture("simulation.xml"),
        &overrides,
        "simulation_rules".as_ref(),
        &out,
    )
    .unwrap_err();
    assert!(err.report().unwrap().has_rule("out_of_range"));
    assert!(!out.exists());
}

#[test]
fn update_refuses_to_overwrite_input() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("simulation.xml");
    std::fs::copy(fixture("simulation.xml"), &doc).unwrap();
    let overrides = OverrideTree::from_assignments(&["end_time=11"]).unwrap();
    let err = update_config(&doc, &overrides, "simulation_rules".as_ref(), &doc).unwrap_err();
    assert!(matches!(err, ConfigError::Override(_)));
}

#[test]
fn rule_file_path_is_accepted() {
    let rules = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas/persons_rules.toml");
    assert!(validate_config(&fixture("persons.xml"), &rules)
        .unwrap()
        .is_valid());
    // a valid document checked against the wrong rules fails at the root
    let r = validate_config(&fixture("persons.xml"), "simulation_rules".as_ref()).unwrap();
    assert!(r.has_rule("root_element"));
}

#[test]
fn malformed_xml_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("bad.xml");
    std::fs::write(&doc, "<simulation><start_time>0</simulation>").unwrap();
    assert!(matches!(
        validate_config(&doc, "simulation_rules".as_ref()),
        Err(ConfigError::Xml { .. })
    ));
}
