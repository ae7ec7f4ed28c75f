/// Splits tweet text into lowercase alphanumeric tokens.
///
/// Whitespace-separated chunks that look like URLs or @-mentions are dropped
/// whole; everything else is broken into runs of Unicode alphanumerics, so
/// `#BlackLivesMatter` folds to `blacklivesmatter` and `I-5` to `i`, `5`.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        if is_url(chunk) || chunk.starts_with('@') {
            continue;
        }
        let mut current = String::new();
        for ch in chunk.chars() {
            if ch.is_alphanumeric() {
                current.extend(ch.to_lowercase());
            } else if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

fn is_url(chunk: &str) -> bool {
    let lower = chunk.to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}
