use alloc::string::String;
use alloc::vec::Vec;

use crate::propmodel::normalize_token;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Word,
    Number,
    /// `YYYY-MM-DD`.
    Date,
    Punct,
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub kind: Tok,
    /// Byte range in the tokenized text.
    pub start: usize,
    pub end: usize,
    /// Lowercased word, number text, or the punctuation character.
    pub norm: String,
}

impl Token {
    pub fn is_punct(&self, c: char) -> bool {
        self.kind == Tok::Punct && self.norm.starts_with(c)
    }

    pub fn is_wordlike(&self) -> bool {
        matches!(self.kind, Tok::Word | Tok::Number)
    }
}

fn is_iso_date(b: &[u8]) -> bool {
    b.len() >= 10
        && b[..4].iter().all(u8::is_ascii_digit)
        && b[4] == b'-'
        && b[5..7].iter().all(u8::is_ascii_digit)
        && b[7] == b'-'
        && b[8..10].iter().all(u8::is_ascii_digit)
        && b.get(10).is_none_or(|c| !c.is_ascii_alphanumeric())
}

/// Splits text into words, numbers (`8.2` stays whole), ISO dates and
/// single punctuation characters. Whitespace is dropped.
pub(crate) fn tokenize(text: &str) -> Vec<Token> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        if c.is_ascii_digit() {
            if is_iso_date(&bytes[i..]) {
                while chars.peek().is_some_and(|&(j, _)| j < i + 10) {
                    chars.next();
                }
                out.push(Token {
                    kind: Tok::Date,
                    start: i,
                    end: i + 10,
                    norm: String::from(&text[i..i + 10]),
                });
                continue;
            }
            let mut end = i;
            while let Some(&(j, d)) = chars.peek() {
                if d.is_ascii_digit() {
                    end = j + 1;
                    chars.next();
                } else if d == '.'
                    && bytes.get(j + 1).is_some_and(u8::is_ascii_digit)
                    && !text[i..j].contains('.')
                {
                    end = j + 1;
                    chars.next();
                } else {
                    break;
                }
            }
            out.push(Token {
                kind: Tok::Number,
                start: i,
                end,
                norm: String::from(&text[i..end]),
            });
            continue;
        }
        if c.is_alphanumeric() {
            let mut end = i;
            while let Some(&(j, d)) = chars.peek() {
                if d.is_alphanumeric() {
                    end = j + d.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            out.push(Token {
                kind: Tok::Word,
                start: i,
                end,
                norm: normalize_token(&text[i..end]),
            });
            continue;
        }
        chars.next();
        out.push(Token {
            kind: Tok::Punct,
            start: i,
            end: i + c.len_utf8(),
            norm: String::from(c),
        });
    }
    out
}

/// True when only whitespace, or whitespace around a single `-` or `/`,
/// separates two tokens. Used to join multi-word entity mentions.
pub(crate) fn joinable_gap(gap: &str) -> bool {
    matches!(gap.trim(), "" | "-" | "/")
}

pub(crate) fn number_word(w: &str) -> Option<i128> {
    Some(match w {
        "one" | "a" | "an" | "single" => 1,
        "two" => 2,
        "three" => 3,
        "four" => 4,
        "five" => 5,
        "six" => 6,
        "seven" => 7,
        "eight" => 8,
        "nine" => 9,
        "ten" => 10,
        "eleven" => 11,
        "twelve" => 12,
        "fourteen" => 14,
        _ => return None,
    })
}
