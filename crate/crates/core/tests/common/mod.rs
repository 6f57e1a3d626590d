#![allow(dead_code)]

use std::path::PathBuf;

use dtflow_core::netmodel::{parse_case, parse_sidecar, CaseData, Network};

pub const FIXTURES: [&str; 3] = ["case2", "case3", "case9"];

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn load_case(name: &str) -> CaseData {
    let text = std::fs::read_to_string(fixture_path(&format!("{name}.m"))).unwrap();
    parse_case(&text).unwrap()
}

/// Case plus its sidecar (ZIP entries and loading direction).
pub fn load_network(name: &str) -> Network {
    let case = load_case(name);
    let side = std::fs::read_to_string(fixture_path(&format!("{name}.json"))).unwrap();
    let (zip, dir) = parse_sidecar(&side, &case).unwrap();
    Network::new(&case, &zip, &dir).unwrap()
}
