//! Token-level text similarity shared by anchor matching, localization and
//! page resolution.

use std::collections::BTreeSet;

/// Lowercased alphanumeric tokens of `text`.
pub fn tokens(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Jaccard index of two token sets. Two empty sets have similarity 0.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Fraction of `needle` tokens that also occur in `haystack`.
pub fn containment(needle: &BTreeSet<String>, haystack: &BTreeSet<String>) -> f64 {
    if needle.is_empty() {
        return 0.0;
    }
    needle.intersection(haystack).count() as f64 / needle.len() as f64
}

pub fn text_jaccard(a: &str, b: &str) -> f64 {
    jaccard(&tokens(a), &tokens(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizes_anchor_labels() {
        let t = tokens("<sign-up>");
        assert_eq!(t.into_iter().collect::<Vec<_>>(), vec!["sign", "up"]);
    }

    #[test]
    fn jaccard_of_sign_up_vs_sign_up_free() {
        let j = text_jaccard("<sign-up>", "Sign up free");
        assert!((j - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_sets() {
        assert_eq!(text_jaccard("", ""), 0.0);
        assert_eq!(containment(&tokens(""), &tokens("a b")), 0.0);
        assert_eq!(containment(&tokens("a c"), &tokens("a b")), 0.5);
    }
}
