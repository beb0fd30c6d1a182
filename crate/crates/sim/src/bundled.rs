//! Scenarios shipped with the crate.

use crate::error::SimError;
use crate::scenario::Scenario;

pub const BUNDLED: [(&str, &str); 9] = [
    ("table1_vio_noise", include_str!("../scenarios/table1_vio_noise.json")),
    ("table2_ge_on", include_str!("../scenarios/table2_ge_on.json")),
    ("table2_ge_off", include_str!("../scenarios/table2_ge_off.json")),
    ("table3_tilt_on", include_str!("../scenarios/table3_tilt_on.json")),
    ("table3_tilt_off", include_str!("../scenarios/table3_tilt_off.json")),
    ("fig8_mass_on", include_str!("../scenarios/fig8_mass_on.json")),
    ("fig8_mass_off", include_str!("../scenarios/fig8_mass_off.json")),
    ("table4_coverage_on", include_str!("../scenarios/table4_coverage_on.json")),
    ("table4_coverage_off", include_str!("../scenarios/table4_coverage_off.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn load(name: &str) -> Result<Scenario, SimError> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| SimError::config(format!("no bundled scenario named {name}")))?;
    Scenario::from_json(text)
}
