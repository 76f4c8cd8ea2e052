//! Fixed-precision float formatting shared by every CSV the harness writes.

/// Significant digits in all CSV output.
pub const SIG_DIGITS: usize = 9;

/// Rounds to 9 significant digits.
pub fn quantize(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x)
        .parse()
        .expect("scientific notation parses")
}

/// 9 significant digits in plain decimal notation, trailing zeros dropped.
pub fn fmt9(x: f64) -> String {
    let q = quantize(x);
    if q == 0.0 {
        // avoids "-0"
        return "0".into();
    }
    format!("{q}")
}
