use std::sync::LazyLock;

use regex::Regex;

/// Leading list markers: `1.`, `1)`, `(1)`, `-`, `*` (runs allowed).
static LIST_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:\(?\d+[.)\]]|[-*]+)\s*").unwrap());

/// Extract candidate words from a free-text reply.
///
/// Each line is stripped of its list marker, then split on commas; pieces
/// are trimmed and empties dropped, order preserved. Prose lines survive as
/// candidates — downstream validation rejects them. Total: never fails,
/// whatever bytes the model produced.
pub fn parse_word_list(raw_text: &str) -> Vec<String> {
    let mut candidates = Vec::new();
    for line in raw_text.lines() {
        let stripped = LIST_MARKER.replace(line, "");
        for piece in stripped.split(',') {
            let piece = piece.trim();
            if !piece.is_empty() {
                candidates.push(piece.to_string());
            }
        }
    }
    candidates
}
