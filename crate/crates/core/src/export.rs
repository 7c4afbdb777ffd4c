//! Number formatting shared by every CSV writer.
//!
//! All emitted reals use six significant digits so that golden files are
//! stable across platforms.

/// Formats `x` with six significant digits: fixed notation for magnitudes in
/// [1e-4, 1e6), scientific notation otherwise.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.00000".to_string();
    }
    let mag = x.abs();
    if !(1e-4..1e6).contains(&mag) {
        return format!("{x:.5e}");
    }
    let exp = mag.log10().floor() as i32;
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can carry into a new leading digit (9.999996 -> 10.00000).
    let rounded: f64 = s.parse().unwrap_or(x);
    if rounded.abs() >= 10f64.powi(exp + 1) && decimals > 0 {
        let d = decimals - 1;
        return format!("{x:.d$}");
    }
    s
}
