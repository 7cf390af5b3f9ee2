//! String-to-number parsing for laboratory cells.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

fn number_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| {
        Regex::new(r"[+-]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)").expect("valid number pattern")
    })
}

fn multiplier_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| {
        Regex::new(r"[×xX*]\s*10\s*(?:\^\s*[+-]?[0-9]+|[⁺⁻]?[⁰¹²³⁴⁵⁶⁷⁸⁹]+)").expect("valid multiplier pattern")
    })
}

/// First decimal number in `raw`, ignoring any unit text around it.
///
/// `"4.20 ×10⁹ /L"` yields `4.20`: the power-of-ten suffix is part of the
/// unit, the stored magnitude is already on the displayed scale, so
/// `"×10⁹ /L"` alone is missing. Only ASCII digits count; thousands
/// separators and exponents are not recognised.
pub fn parse_quantity(raw: &str) -> Option<f64> {
    let stripped = multiplier_pattern().replace_all(raw, " ");
    let m = number_pattern().find(&stripped)?;
    let value: f64 = m.as_str().parse().ok()?;
    value.is_finite().then_some(value)
}

/// Recognised dipstick tokens for each ordinal level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SemiquantTokens {
    pub negative: Vec<String>,
    pub trace: Vec<String>,
    pub one_plus: Vec<String>,
    pub two_plus: Vec<String>,
    pub three_plus: Vec<String>,
}

impl Default for SemiquantTokens {
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        Self {
            negative: v(&["negative", "-", "neg", "阴性"]),
            trace: v(&["trace", "±", "+-", "弱阳性"]),
            one_plus: v(&["1+", "+"]),
            two_plus: v(&["2+", "++"]),
            three_plus: v(&["3+", "+++"]),
        }
    }
}

/// Lowercase and drop all whitespace so `" 2 + "` matches `"2+"`.
fn normalize(token: &str) -> String {
    token.chars().filter(|c| !c.is_whitespace()).flat_map(char::to_lowercase).collect()
}

impl SemiquantTokens {
    fn levels(&self) -> [(&[String], f64); 5] {
        [
            (&self.negative, 0.0),
            (&self.trace, 0.5),
            (&self.one_plus, 1.0),
            (&self.two_plus, 2.0),
            (&self.three_plus, 3.0),
        ]
    }

    /// Map a dipstick result onto `{0, 0.5, 1, 2, 3}`.
    pub fn parse(&self, raw: &str) -> Option<f64> {
        let key = normalize(raw);
        if key.is_empty() {
            return None;
        }
        self.levels()
            .into_iter()
            .find(|(tokens, _)| tokens.iter().any(|t| normalize(t) == key))
            .map(|(_, level)| level)
    }

    /// Canonical rendering of a level, the first token listed for it.
    pub fn render(&self, level: f64) -> Option<&str> {
        self.levels()
            .into_iter()
            .find(|(_, l)| *l == level)
            .and_then(|(tokens, _)| tokens.first().map(String::as_str))
    }
}

/// [`SemiquantTokens::parse`] with the default token lists.
pub fn parse_semiquant(raw: &str) -> Option<f64> {
    static DEFAULT: OnceLock<SemiquantTokens> = OnceLock::new();
    DEFAULT.get_or_init(SemiquantTokens::default).parse(raw)
}

/// The ordinal levels a semiquantitative column may take.
pub const ORDINAL_LEVELS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 3.0];

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_text_is_ignored() {
        assert_eq!(parse_quantity("77 μmol/L"), Some(77.0));
        assert_eq!(parse_quantity("77 μ mol/L"), Some(77.0));
        assert_eq!(parse_quantity("4.20 ×10⁹ /L"), Some(4.20));
        assert_eq!(parse_quantity("6.1x10^9/L"), Some(6.1));
        assert_eq!(parse_quantity("×10⁹ /L"), None);
        assert_eq!(parse_quantity("x 10^12/L"), None);
        assert_eq!(parse_quantity("-0.5 mmol/L"), Some(-0.5));
        assert_eq!(parse_quantity("+3"), Some(3.0));
        assert_eq!(parse_quantity(".5g/L"), Some(0.5));
        assert_eq!(parse_quantity("12."), Some(12.0));
    }

    #[test]
    fn empty_and_digitless_are_missing() {
        for s in ["", "   ", "-", "N/A", "μmol/L", "."] {
            assert_eq!(parse_quantity(s), None, "{s:?}");
        }
    }

    #[test]
    fn semiquant_map() {
        assert_eq!(parse_semiquant("2+"), Some(2.0));
        assert_eq!(parse_semiquant("±"), Some(0.5));
        assert_eq!(parse_semiquant("negative"), Some(0.0));
        assert_eq!(parse_semiquant(" NEG "), Some(0.0));
        assert_eq!(parse_semiquant("2 +"), Some(2.0));
        assert_eq!(parse_semiquant("+++"), Some(3.0));
        assert_eq!(parse_semiquant("阴性"), Some(0.0));
        assert_eq!(parse_semiquant("弱阳性"), Some(0.5));
        assert_eq!(parse_semiquant("??"), None);
        assert_eq!(parse_semiquant(""), None);
        assert_eq!(parse_semiquant("4+"), None);
    }

    #[test]
    fn token_lists_are_extensible() {
        let mut tokens = SemiquantTokens::default();
        tokens.one_plus.push("positive".into());
        assert_eq!(tokens.parse("Positive"), Some(1.0));
        assert_eq!(parse_semiquant("Positive"), None);
    }

    #[test]
    fn render_round_trips() {
        let tokens = SemiquantTokens::default();
        for level in ORDINAL_LEVELS {
            let s = tokens.render(level).unwrap();
            assert_eq!(tokens.parse(s), Some(level));
        }
    }

    proptest! {
        #[test]
        fn idempotent_on_own_output(s in ".{0,24}") {
            if let Some(v) = parse_quantity(&s) {
                prop_assert_eq!(parse_quantity(&format!("{v}")), Some(v));
            }
        }

        #[test]
        fn no_digits_means_missing(s in "[^0-9]{0,32}") {
            prop_assert_eq!(parse_quantity(&s), None);
        }

        #[test]
        fn finite_values_survive_with_units(v in -1.0e6f64..1.0e6, unit in "[ a-zA-Zμ/×⁹]{0,8}") {
            let s = format!("{v}{unit}");
            prop_assert_eq!(parse_quantity(&s), Some(v));
        }
    }
}
