//! Number formatting shared by the JSON writers and the report renderer.

/// Rounds `x` to `digits` significant decimal digits.
///
/// The result is the double nearest to the rounded decimal, so serializing it
/// with a shortest-round-trip writer prints at most `digits` digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let s = format!("{:.*e}", digits.saturating_sub(1), x);
    s.parse().unwrap_or(x)
}

/// Plain decimal with at most `digits` significant digits and no trailing zeros.
pub fn sig(x: f64, digits: usize) -> String {
    let r = round_sig(x, digits);
    if r == 0.0 {
        return "0".to_string();
    }
    let magnitude = r.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    trim_zeros(format!("{:.*}", decimals, r))
}

/// Fixed decimals with a comma thousands separator, e.g. `2,909.1`.
pub fn grouped(x: f64, decimals: usize) -> String {
    group_digits(&format!("{:.*}", decimals, x))
}

/// [`sig`] with a comma thousands separator, e.g. `6,048` or `151.2`.
pub fn grouped_sig(x: f64, digits: usize) -> String {
    group_digits(&sig(x, digits))
}

fn group_digits(s: &str) -> String {
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", s),
    };
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let mut out = String::with_capacity(s.len() + int.len() / 3);
    for (i, c) in int.chars().enumerate() {
        if i > 0 && (int.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    match frac {
        Some(f) => format!("{sign}{out}.{f}"),
        None => format!("{sign}{out}"),
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_rounding() {
        assert_eq!(round_sig(0.000277777777777, 9), 0.000277777778);
        assert_eq!(round_sig(151.20000000000002, 9), 151.2);
        assert_eq!(sig(150.0, 9), "150");
        assert_eq!(sig(0.069444444, 4), "0.06944");
        assert_eq!(sig(12.7571428, 4), "12.76");
        assert_eq!(sig(0.0, 4), "0");
    }

    #[test]
    fn thousands_grouping() {
        assert_eq!(grouped(2909.088, 0), "2,909");
        assert_eq!(grouped(782.544672, 1), "782.5");
        assert_eq!(grouped(1234567.25, 2), "1,234,567.25");
        assert_eq!(grouped(-71100.0, 0), "-71,100");
        assert_eq!(grouped(999.0, 0), "999");
        assert_eq!(grouped_sig(6048.0000000001, 6), "6,048");
        assert_eq!(grouped_sig(151.2, 6), "151.2");
        assert_eq!(grouped_sig(1626912.0, 9), "1,626,912");
    }
}
