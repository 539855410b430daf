//! Seed derivation and number formatting shared by the solver and exports.

/// Mixes a master seed with a stream index (splitmix64 finalizer), giving
/// independent, reproducible seeds per start or replicate.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Rounds to `digits` significant decimal digits. Non-finite values pass
/// through.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}

/// Shortest decimal text of `x` rounded to 15 significant digits.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return String::new();
    }
    let r = round_significant(x, 15);
    if r == 0.0 {
        "0".to_string()
    } else {
        r.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_per_stream() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }

    #[test]
    fn rounding_keeps_fifteen_digits() {
        assert_eq!(round_significant(0.1 + 0.2, 15), 0.3);
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333333");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(f64::NAN), "");
    }
}
