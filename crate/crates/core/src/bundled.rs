//! Scenarios and mock models shipped with the crate.

pub const S1: &str = include_str!("../data/s1.json");
pub const S2: &str = include_str!("../data/s2.json");
pub const S3: &str = include_str!("../data/s3.json");
pub const S4: &str = include_str!("../data/s4.json");

pub const MOCK_S1: &str = include_str!("../data/mock_s1.json");
pub const MOCK_S2: &str = include_str!("../data/mock_s2.json");
pub const MOCK_S3: &str = include_str!("../data/mock_s3.json");
pub const MOCK_S4: &str = include_str!("../data/mock_s4.json");

pub const NAMES: [&str; 4] = ["s1", "s2", "s3", "s4"];

pub fn scenario_json(name: &str) -> Option<&'static str> {
    match name.to_ascii_lowercase().as_str() {
        "s1" => Some(S1),
        "s2" => Some(S2),
        "s3" => Some(S3),
        "s4" => Some(S4),
        _ => None,
    }
}

pub fn scenario(name: &str) -> Option<crate::site::Scenario> {
    scenario_json(name).map(|t| crate::site::Scenario::from_json(t).expect("bundled scenario is valid"))
}

pub fn mock_json(name: &str) -> Option<&'static str> {
    match name.to_ascii_lowercase().as_str() {
        "s1" => Some(MOCK_S1),
        "s2" => Some(MOCK_S2),
        "s3" => Some(MOCK_S3),
        "s4" => Some(MOCK_S4),
        _ => None,
    }
}

/// The mock model shipped for a bundled scenario.
pub fn mock(name: &str) -> Option<crate::eulermock::MockModel> {
    let sc = scenario(name)?;
    mock_json(name).map(|t| crate::eulermock::MockModel::from_json(&sc, t).expect("bundled mock parses"))
}
