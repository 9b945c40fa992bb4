//! Parameter counts of composite and mixture GLMs against a full-depth
//! interaction model over `B` binary features, which has `2^B` coefficients.

use std::fmt::Write as _;

use crate::error::{Error, Result};

fn check(s: u64, b: u32) -> Result<()> {
    if s == 0 || b == 0 {
        return Err(Error::domain(format!("need S >= 1 and B >= 1, got S={s}, B={b}")));
    }
    Ok(())
}

fn full_width(b: u32) -> Result<u64> {
    if b > 62 {
        return Err(Error::domain(format!("B={b} exceeds 62 bits")));
    }
    Ok(1u64 << b)
}

/// `S (B + 1)`: one intercept and `B` coefficients per submodel.
pub fn k_values_multiresp(s: u64, b: u32) -> Result<u64> {
    check(s, b)?;
    Ok(s * (b as u64 + 1))
}

/// `S (B + 2) - 1`: the multiresp count plus `S - 1` free prevalences.
pub fn k_values_mixture(s: u64, b: u32) -> Result<u64> {
    check(s, b)?;
    Ok(s * (b as u64 + 2) - 1)
}

/// Largest `S >= 0` with `S (B + 1) < 2^B`.
pub fn max_useful_s_multiresp(b: u32) -> Result<u64> {
    check(1, b)?;
    Ok((full_width(b)? - 1) / (b as u64 + 1))
}

/// Largest `S >= 0` with `S (B + 2) - 1 < 2^B`, i.e. `S (B + 2) <= 2^B`.
pub fn max_useful_s_mixture(b: u32) -> Result<u64> {
    check(1, b)?;
    Ok(full_width(b)? / (b as u64 + 2))
}

/// Markdown tables of both bounds for `B = 1..=b_max`.
pub fn render_bounds_markdown(b_max: u32) -> Result<String> {
    if b_max == 0 {
        return Err(Error::usage("b-max must be at least 1"));
    }
    let mut out = String::new();
    let tables: [(&str, fn(u32) -> Result<u64>); 2] = [
        ("Largest S with S(B+1) < 2^B (composite response)", max_useful_s_multiresp),
        ("Largest S with S(B+2) - 1 < 2^B (mixture)", max_useful_s_mixture),
    ];
    for (i, (title, f)) in tables.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "{title}\n\n| B | max S |\n|---|---|");
        for b in 1..=b_max {
            let _ = writeln!(out, "| {b} | {} |", f(b)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MULTIRESP_TABLE: [u64; 10] = [0, 1, 1, 3, 5, 9, 15, 28, 51, 93];
    const MIXTURE_TABLE: [u64; 10] = [0, 1, 1, 2, 4, 8, 14, 25, 46, 85];

    #[test]
    fn k_value_examples() {
        assert_eq!(k_values_multiresp(3, 4).unwrap(), 15);
        assert_eq!(k_values_multiresp(3, 8).unwrap(), 27);
        assert!(k_values_multiresp(1, 0).is_err());
        assert_eq!(k_values_mixture(2, 4).unwrap(), 11);
        assert_eq!(k_values_mixture(1, 7).unwrap(), 8);
        assert_eq!(k_values_mixture(2, 12).unwrap(), 27);
    }

    #[test]
    fn tables_match() {
        for b in 1..=10u32 {
            assert_eq!(max_useful_s_multiresp(b).unwrap(), MULTIRESP_TABLE[b as usize - 1], "B={b}");
            assert_eq!(max_useful_s_mixture(b).unwrap(), MIXTURE_TABLE[b as usize - 1], "B={b}");
        }
    }

    #[test]
    fn closed_forms_agree_with_brute_force() {
        for b in 1..=20u32 {
            let full = 1u64 << b;
            let brute_m = (0..full).take_while(|s| s * (b as u64 + 1) < full).last().unwrap();
            let brute_x = (0..full).take_while(|s| (s * (b as u64 + 2)).saturating_sub(1) < full || *s == 0).last().unwrap();
            assert_eq!(max_useful_s_multiresp(b).unwrap(), brute_m);
            assert_eq!(max_useful_s_mixture(b).unwrap(), brute_x);
        }
    }

    #[test]
    fn monotone_and_ordered() {
        let mut prev = (0, 0);
        for b in 2..=40u32 {
            let m = max_useful_s_multiresp(b).unwrap();
            let x = max_useful_s_mixture(b).unwrap();
            assert!(m >= prev.0 && x >= prev.1);
            assert!(x <= m);
            prev = (m, x);
        }
    }

    #[test]
    fn markdown_rows() {
        let text = render_bounds_markdown(3).unwrap();
        assert!(text.contains("| 2 | 1 |"));
        assert_eq!(text.lines().filter(|l| l.starts_with("| ")).count(), 8);
        assert!(render_bounds_markdown(0).is_err());
    }
}
