//! Locale-independent number formatting for tables.

/// `%.{digits}g`-style formatting: `digits` significant digits, trailing zeros trimmed.
pub fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// 17 significant digits: enough to round-trip any `f64`.
pub fn machine(x: f64) -> String {
    sig(x, 17)
}

/// 6 significant digits for human-facing tables.
pub fn human(x: f64) -> String {
    sig(x, 6)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_like_printf_g() {
        assert_eq!(human(0.0), "0");
        assert_eq!(human(1.0), "1");
        assert_eq!(human(0.75), "0.75");
        assert_eq!(human(10.0302), "10.0302");
        assert_eq!(human(123456789.0), "1.23457e8");
        assert_eq!(human(-2.5e-7), "-2.5e-7");
        assert_eq!(machine(0.1), "0.10000000000000001");
        assert_eq!(human(f64::INFINITY), "inf");
    }

    #[test]
    fn machine_format_round_trips() {
        for x in [std::f64::consts::PI, 1.0 / 3.0, 6.02214076e23, -1.602e-19, 0.05, 12345.678] {
            assert_eq!(machine(x).parse::<f64>().unwrap(), x);
        }
    }
}
