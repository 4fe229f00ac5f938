mod common;

use common::*;
use mndsim::aggregates::{
    compute_odmatrix, compute_total, read_sim_data, Key, KeyValue, Measure, ReadError, SimFiles,
    NONE_UNIT,
};
use mndsim::engine::run_simulation;
use mndsim::geometry::Point;
use mndsim::mobility::MovementPattern;

fn toy_output() -> (ScenarioFiles, std::path::PathBuf) {
    let files = toy(1, 10, 3, MovementPattern::HomeWork);
    let out = files.out("out");
    run_simulation(&files.paths, &out, None).unwrap();
    (files, out)
}

#[test]
fn toy_run_has_eleven_individual_rows() {
    let (_files, out) = toy_output();
    let data = read_sim_data(&SimFiles::in_dir(&out), Some(4326)).unwrap();
    assert_eq!(data.individuals.len(), 11);
    assert_eq!(data.crs_code, 4326);
    assert_eq!(data.times, (0..=10).collect::<Vec<_>>());
}

#[test]
fn join_matches_subregion_of_tile_center() {
    let (_files, out) = toy_output();
    let mut data = read_sim_data(&SimFiles::in_dir(&out), None).unwrap();
    // place a row exactly on a tile center and re-join
    let center = data.grid.tile_center(mndsim::TileId(37)).unwrap();
    let expected = data.map.subregion_of(center).map(|s| s.long_name.clone());
    let row = &mut data.individuals[0];
    row.x = center.x;
    row.y = center.y;
    row.subregion_long = data
        .map
        .subregion_of(Point::new(row.x, row.y))
        .map(|s| s.long_name.clone());
    assert_eq!(row.subregion_long, expected);
    for r in &data.individuals {
        assert_eq!(
            r.subregion_long,
            data.map
                .subregion_of(Point::new(r.x, r.y))
                .map(|s| s.long_name.clone())
        );
    }
}

#[test]
fn renamed_column_is_named_in_error() {
    let (_files, out) = toy_output();
    let persons = out.join("persons.csv");
    let text = std::fs::read_to_string(&persons).unwrap();
    std::fs::write(&persons, text.replacen("person_id", "pid", 1)).unwrap();
    match read_sim_data(&SimFiles::in_dir(&out), None) {
        Err(ReadError::DictionaryMismatch { column, .. }) => assert_eq!(column, "pid"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn wrong_cell_type_is_named_in_error() {
    let (_files, out) = toy_output();
    let grid = out.join("grid.csv");
    let text = std::fs::read_to_string(&grid).unwrap();
    let (header, row) = text.split_once('\n').unwrap();
    let row = row.replacen("20", "twenty", 1);
    std::fs::write(&grid, format!("{header}\n{row}")).unwrap();
    match read_sim_data(&SimFiles::in_dir(&out), None) {
        Err(ReadError::DictionaryMismatch { column, .. }) => assert_eq!(column, "n_cols"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_file_is_reported() {
    let (_files, out) = toy_output();
    std::fs::remove_file(out.join("AntennaCells_MNO1.csv")).unwrap();
    assert!(matches!(
        read_sim_data(&SimFiles::in_dir(&out), None),
        Err(ReadError::MissingFile(p)) if p.ends_with("AntennaCells_MNO1.csv")
    ));
}

#[test]
fn inconsistent_tile_is_rejected() {
    let (_files, out) = toy_output();
    let persons = out.join("persons.csv");
    let text = std::fs::read_to_string(&persons).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut cells: Vec<String> = lines[1].split(',').map(String::from).collect();
    cells[4] = ((cells[4].parse::<u64>().unwrap() + 1) % 320).to_string();
    lines[1] = cells.join(",");
    std::fs::write(&persons, lines.join("\n") + "\n").unwrap();
    assert!(matches!(
        read_sim_data(&SimFiles::in_dir(&out), None),
        Err(ReadError::Inconsistent(_))
    ));
}

#[test]
fn totals_over_fixture_run() {
    let dir = tempfile::tempdir().unwrap();
    run_simulation(&fixture_paths(), dir.path(), None).unwrap();
    let data = read_sim_data(&SimFiles::in_dir(dir.path()), None).unwrap();
    let domain = data.key_domain();
    assert_eq!(domain.units.last().map(String::as_str), Some(NONE_UNIT));
    let t = compute_total(
        &data.individuals,
        &domain,
        &Measure::ALL,
        &[Key::Time, Key::Subregion],
    )
    .unwrap();
    assert_eq!(t.rows.len(), 11 * 5);
    for time in &data.times {
        let sum: u64 = t
            .rows
            .iter()
            .filter(|r| r.keys[0] == KeyValue::Int(*time))
            .map(|r| r.counts[0])
            .sum();
        assert_eq!(sum, 20);
    }
    let by_tile = compute_total(
        &data.individuals,
        &domain,
        &[Measure::Devices],
        &[Key::Tile],
    )
    .unwrap();
    assert_eq!(by_tile.rows.len(), 320);
    let od = compute_odmatrix(
        &data.individuals,
        &domain,
        &[Measure::Individuals],
        (Key::Time, Key::Subregion),
    )
    .unwrap();
    assert_eq!(od.rows.len(), 10 * 5 * 5);
    assert_eq!(od.rows.iter().map(|r| r.counts[0]).sum::<u64>(), 10 * 20);
}
