//! Token normalization shared by query parsing and textual features.

/// Lowercases `text` and splits it on every non-alphanumeric character,
/// dropping empty tokens. Order and duplicates are preserved.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Tokens of a query: [`tokenize`] followed by order-preserving deduplication.
pub fn query_terms(text: &str) -> Vec<String> {
    let mut terms: Vec<String> = Vec::new();
    for t in tokenize(text) {
        if !terms.contains(&t) {
            terms.push(t);
        }
    }
    terms
}

/// Re-renders `text` as its normalized token stream joined by single spaces.
pub fn normalize(text: &str) -> String {
    tokenize(text).join(" ")
}

/// True if every term occurs as a token of `tokens`.
pub fn contains_all(tokens: &[String], terms: &[String]) -> bool {
    !terms.is_empty() && terms.iter().all(|t| tokens.contains(t))
}

/// True if `terms` occur contiguously and in order somewhere in `tokens`.
pub fn contains_phrase(tokens: &[String], terms: &[String]) -> bool {
    !terms.is_empty() && tokens.windows(terms.len()).any(|w| w == terms)
}
