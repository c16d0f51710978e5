//! Number formatting for CSV output.

/// Significant digits of every float written to CSV.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// Format like C's `%.9g`: 9 significant digits, trailing zeros removed,
/// scientific notation for exponents below −4 or at least 9.
pub fn float(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if exp < -4 || exp >= SIGNIFICANT_DIGITS as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}")).to_string()
    }
}

/// Format an optional value; `None` becomes an empty field.
pub fn opt(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
