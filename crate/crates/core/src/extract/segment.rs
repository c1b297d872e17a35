use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

/// One sentence of a document with its offsets into the original text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence<'a> {
    pub text: &'a str,
    pub byte_start: usize,
    pub byte_end: usize,
    pub char_start: usize,
    pub char_end: usize,
}

/// Splits on `.`, `;` and newlines. A period between two digits (`8.2`) or
/// inside a listed abbreviation (`e.g.`) does not end a sentence. Sentences
/// are trimmed; empty ones are dropped.
pub fn segment_sentences<'a>(text: &'a str, abbreviations: &BTreeSet<String>) -> Vec<Sentence<'a>> {
    let bytes = text.as_bytes();
    let mut cuts = Vec::new();
    for (i, c) in text.char_indices() {
        let split = match c {
            '\n' | ';' => true,
            '.' => {
                let decimal = i > 0
                    && bytes[i - 1].is_ascii_digit()
                    && bytes.get(i + 1).is_some_and(u8::is_ascii_digit);
                !decimal && !in_abbreviation(text, i, abbreviations)
            }
            _ => false,
        };
        if split {
            cuts.push(i);
        }
    }

    let mut out = Vec::new();
    let mut from = 0;
    for end in cuts.into_iter().chain(core::iter::once(text.len())) {
        push_trimmed(text, from, end, &mut out);
        from = (end + 1).min(text.len());
    }
    out
}

fn in_abbreviation(text: &str, dot: usize, abbreviations: &BTreeSet<String>) -> bool {
    let start = text[..dot]
        .rfind(char::is_whitespace)
        .map_or(0, |p| p + text[p..].chars().next().map_or(1, char::len_utf8));
    let end = text[dot..]
        .find(char::is_whitespace)
        .map_or(text.len(), |p| dot + p);
    let chunk = text[start..end]
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .trim_end_matches(|c: char| c != '.' && !c.is_alphanumeric());
    !chunk.is_empty() && abbreviations.contains(&chunk.to_lowercase())
}

fn push_trimmed<'a>(text: &'a str, from: usize, to: usize, out: &mut Vec<Sentence<'a>>) {
    let raw = &text[from..to];
    let lead = raw.len() - raw.trim_start().len();
    let body = raw.trim();
    if body.is_empty() {
        return;
    }
    let byte_start = from + lead;
    let byte_end = byte_start + body.len();
    let char_start = text[..byte_start].chars().count();
    out.push(Sentence {
        text: body,
        byte_start,
        byte_end,
        char_start,
        char_end: char_start + body.chars().count(),
    });
}
