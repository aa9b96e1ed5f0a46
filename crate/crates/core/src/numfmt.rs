/// Formats `x` rounded to 9 significant digits, without exponent notation
/// and without trailing zeros.
pub fn sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        // Normalizes -0.0 as well.
        return if x.is_nan() { "NaN".into() } else if x.is_infinite() { x.to_string() } else { "0".into() };
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("round-trips");
    format!("{rounded}")
}
