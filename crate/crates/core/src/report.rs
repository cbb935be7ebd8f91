//! Shared formatting for emitted tables.

/// Format a float with 17 significant digits in scientific notation, so every
/// value round-trips exactly through its text form.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for v in [0.0, 1.0, -2.5e-300, std::f64::consts::PI, 0.1 + 0.2, f64::MAX] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }
}
