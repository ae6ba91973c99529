//! Reference hardware presets.

use crate::converter::{CircuitParams, Topology, DEFAULT_MIN_CONTROLLED_TIME};
use crate::model::PlantCoefficients;

/// 8 V to 1.8 V, 20 W constant on-time buck reference design
/// (T_on = 100 ns, L = 200 nH, C = 200 uF, R = 1.8^2/20 ohm).
pub fn table1_buck() -> CircuitParams {
    CircuitParams {
        topology: Topology::BuckConstantOnTime,
        v_in: 8.0,
        inductance: 200e-9,
        capacitance: 200e-6,
        load_resistance: 1.8 * 1.8 / 20.0,
        fixed_time: 100e-9,
        lambda: 0.5,
        min_controlled_time: DEFAULT_MIN_CONTROLLED_TIME,
        series_resistance: 0.0,
    }
}

/// 12 V to 40 V, 16 W constant off-time boost reference design
/// (T_off = 200 ns, L = 6.8 uH, C = 1 uF, R = 40^2/16 ohm).
pub fn table2_boost() -> CircuitParams {
    CircuitParams {
        topology: Topology::BoostConstantOffTime,
        v_in: 12.0,
        inductance: 6.8e-6,
        capacitance: 1e-6,
        load_resistance: 40.0 * 40.0 / 16.0,
        fixed_time: 200e-9,
        lambda: 0.5,
        min_controlled_time: DEFAULT_MIN_CONTROLLED_TIME,
        series_resistance: 0.0,
    }
}

/// Measured plant fit of the 8 V to 1.8 V buck reference design,
/// 0.0023 (1 + 1.4390 z^-1) z^-1 / (1 - 0.9739 z^-1).
///
/// Kept as a named fixture: the effective load and sampling fraction of the
/// hardware it was fitted on are not derivable from the nameplate values, so
/// this is a stored measurement, not a computed plant.
pub fn buck_example_plant() -> PlantCoefficients {
    PlantCoefficients::from_z_domain(0.9739, -1.4390, 0.0023, 0.5)
}

/// Known preset names accepted by configs and the command line.
pub const PRESET_NAMES: &[&str] = &["table1_buck", "table2_boost"];

/// Look up a circuit preset by name.
pub fn by_name(name: &str) -> Option<CircuitParams> {
    match name {
        "table1_buck" => Some(table1_buck()),
        "table2_boost" => Some(table2_boost()),
        _ => None,
    }
}
