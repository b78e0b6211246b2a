use super::vocab::{NUM_TOKEN, UNK_TOKEN};

/// Lower-cases `raw_text` and splits it into word tokens.
///
/// Letters form words, digit runs form numbers (replaced by `<num>` when
/// `numerals_to_token` is set), and every other non-space character is a
/// token on its own. The literals `<num>` and `<unk>` are kept whole so
/// that serialized corpora re-tokenize identically.
pub fn normalize_and_tokenize(raw_text: &str, numerals_to_token: bool) -> Vec<String> {
    let text = raw_text.to_lowercase();
    let mut out = Vec::new();
    let mut rest = text.as_str();
    while let Some(c) = rest.chars().next() {
        if c.is_whitespace() {
            rest = &rest[c.len_utf8()..];
            continue;
        }
        if c == '<' {
            if let Some(special) = [NUM_TOKEN, UNK_TOKEN].into_iter().find(|s| rest.starts_with(s)) {
                out.push(special.to_string());
                rest = &rest[special.len()..];
                continue;
            }
        }
        let end = if c.is_alphabetic() {
            rest.find(|ch: char| !ch.is_alphabetic()).unwrap_or(rest.len())
        } else if c.is_numeric() {
            rest.find(|ch: char| !ch.is_numeric()).unwrap_or(rest.len())
        } else {
            c.len_utf8()
        };
        let tok = &rest[..end];
        if c.is_numeric() && numerals_to_token {
            out.push(NUM_TOKEN.to_string());
        } else {
            out.push(tok.to_string());
        }
        rest = &rest[end..];
    }
    out
}

/// Joins tokens with single spaces.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    tokens.iter().map(|t| t.as_ref()).collect::<Vec<_>>().join(" ")
}
