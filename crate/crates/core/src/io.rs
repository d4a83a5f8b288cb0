//! Small formatting helpers shared by the CSV writers.

/// Scientific notation with 17 significant digits; `-0` prints as `0`.
pub fn fmt17(v: f64) -> String {
    format!("{:.16e}", v + 0.0)
}
