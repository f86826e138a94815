//! Deterministic float formatting for text artifacts.

/// Round to 12 significant digits, then print the shortest representation
/// that round-trips that rounded value.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".to_string() } else { v.to_string() };
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}
