/// Lowercases, splits on runs of non-alphanumeric characters and drops tokens
/// shorter than two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(|t| t.to_lowercase())
        .collect()
}

/// Tags are kept whole; only case and surrounding whitespace are normalised.
pub fn normalize_tag(tag: &str) -> Option<String> {
    let t = tag.trim().to_lowercase();
    if t.is_empty() {
        None
    } else {
        Some(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_and_filters() {
        assert_eq!(
            tokenize("Google Maps-API: a 3D viewer, v2!"),
            vec!["google", "maps", "api", "3d", "viewer", "v2"]
        );
        assert!(tokenize("a b - !").is_empty());
    }

    #[test]
    fn tags_are_trimmed_and_lowercased() {
        assert_eq!(normalize_tag("  Social Media "), Some("social media".into()));
        assert_eq!(normalize_tag("   "), None);
    }
}
