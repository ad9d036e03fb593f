use cage_ccc::fleet::{FleetConfig, FleetError};

#[test]
fn example_fleet_parses() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fleet.example.toml");
    let fleet = FleetConfig::from_file(std::path::Path::new(path)).unwrap();
    let ids: Vec<_> = fleet.vehicles.iter().map(|v| v.id.as_str()).collect();
    assert_eq!(ids, ["pluto", "ares", "field-unit"]);
    assert_eq!(fleet.vehicles[2].scenario, None);
    assert_eq!(fleet.vehicles[2].destinations[0].id, "dock");
}

#[test]
fn duplicate_vehicle_ids_are_refused() {
    let text = "[[vehicles]]\nid = \"a\"\n[[vehicles]]\nid = \"a\"\n";
    assert!(matches!(FleetConfig::from_toml(text), Err(FleetError::Duplicate(id)) if id == "a"));
}
