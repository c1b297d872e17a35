use alloc::string::String;
use alloc::vec::Vec;

use super::tokens::{number_word, Tok, Token};
use crate::kb::KnowledgeBase;
use crate::propmodel::Value;
use crate::rational::{self, Rational};

/// Unit given to a bare `a/b` reading.
pub const DEFAULT_PAIR_UNIT: &str = "mmHg";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Class {
    Pair,
    Quantity,
    Frequency,
    Qualitative,
}

#[derive(Clone, Debug)]
pub(crate) struct ValueExpr {
    pub value: Value,
    pub class: Class,
    /// Inclusive token range.
    pub first: usize,
    pub last: usize,
}

const DOTTED: [(&str, i128, &str); 4] = [("b.i.d", 2, "day"), ("t.i.d", 3, "day"), ("q.i.d", 4, "day"), ("q.d", 1, "day")];

fn single_word_frequency(w: &str) -> Option<(i128, &'static str)> {
    Some(match w {
        "daily" | "nightly" | "qd" | "qday" | "qhs" | "od" => (1, "day"),
        "bid" => (2, "day"),
        "tid" => (3, "day"),
        "qid" => (4, "day"),
        "weekly" => (1, "week"),
        "hourly" => (1, "hour"),
        _ => return None,
    })
}

fn per_unit(w: &str) -> Option<&'static str> {
    Some(match w {
        "day" | "days" => "day",
        "week" | "weeks" => "week",
        "hour" | "hours" | "hr" | "hrs" | "h" => "hour",
        _ => return None,
    })
}

struct Scan<'a> {
    text: &'a str,
    toks: &'a [Token],
    taken: &'a [bool],
    kb: &'a KnowledgeBase,
}

impl Scan<'_> {
    fn free(&self, i: usize) -> Option<&Token> {
        self.toks.get(i).filter(|_| !self.taken[i])
    }

    fn word(&self, i: usize) -> &str {
        match self.free(i) {
            Some(t) if t.kind == Tok::Word => &t.norm,
            _ => "",
        }
    }

    fn count_at(&self, i: usize) -> Option<Rational> {
        let t = self.free(i)?;
        match t.kind {
            Tok::Number => rational::parse(&t.norm),
            Tok::Word => match t.norm.as_str() {
                "once" => Some(rational::int(1)),
                "twice" => Some(rational::int(2)),
                "thrice" => Some(rational::int(3)),
                w => number_word(w).map(rational::int),
            },
            _ => None,
        }
    }

    /// `daily`, `a day`, `per day`, `a week`, `weekly`... after a count.
    fn per_phrase(&self, i: usize) -> Option<(&'static str, usize)> {
        match self.word(i) {
            "daily" => Some(("day", 1)),
            "weekly" => Some(("week", 1)),
            "hourly" => Some(("hour", 1)),
            "a" | "an" | "per" | "each" | "every" => per_unit(self.word(i + 1)).map(|u| (u, 2)),
            _ => None,
        }
    }

    /// Unit immediately after byte offset `pos`, with its end byte offset.
    fn unit_after(&self, pos: usize) -> Option<(String, usize)> {
        let rest = &self.text[pos..];
        let trimmed = rest.trim_start_matches(' ');
        let ws = rest.len() - trimmed.len();
        let (unit, len) = self.kb.units().match_prefix(trimmed)?;
        Some((String::from(unit), pos + ws + len))
    }

    /// Index of the last token that starts before byte offset `end`.
    fn last_before(&self, from: usize, end: usize) -> usize {
        let mut j = from;
        while j + 1 < self.toks.len() && self.toks[j + 1].start < end {
            j += 1;
        }
        j
    }

    fn at(&self, i: usize) -> Option<ValueExpr> {
        let t = self.free(i)?;
        let expr = |value, class, last| ValueExpr {
            value,
            class,
            first: i,
            last,
        };
        match t.kind {
            Tok::Number => {
                let n = rational::parse(&t.norm)?;
                if self.free(i + 1).is_some_and(|s| s.is_punct('/')) {
                    if let Some(second) = self.free(i + 2).filter(|s| s.kind == Tok::Number) {
                        let m = rational::parse(&second.norm)?;
                        let (unit, last) = match self.unit_after(second.end) {
                            Some((u, end)) => (u, self.last_before(i + 2, end)),
                            None => (String::from(DEFAULT_PAIR_UNIT), i + 2),
                        };
                        let value = Value::QuantityPair {
                            first: n,
                            second: m,
                            unit,
                        };
                        return Some(expr(value, Class::Pair, last));
                    }
                }
                if matches!(self.word(i + 1), "times" | "x") {
                    if let Some((per, len)) = self.per_phrase(i + 2) {
                        let value = Value::Frequency {
                            count: n,
                            per: per.into(),
                        };
                        return Some(expr(value, Class::Frequency, i + 1 + len));
                    }
                }
                match self.unit_after(t.end) {
                    Some((unit, end)) => Some(expr(Value::quantity(n, unit), Class::Quantity, self.last_before(i, end))),
                    None => Some(expr(Value::quantity(n, ""), Class::Quantity, i)),
                }
            }
            Tok::Word => {
                let lower = self.text[t.start..].to_lowercase();
                for (form, count, per) in DOTTED {
                    if lower.starts_with(form) {
                        let end = t.start + form.len() + usize::from(lower[form.len()..].starts_with('.'));
                        let value = Value::Frequency {
                            count: rational::int(count),
                            per: per.into(),
                        };
                        return Some(expr(value, Class::Frequency, self.last_before(i, end)));
                    }
                }
                let w = t.norm.as_str();
                if let Some((count, per)) = single_word_frequency(w) {
                    let value = Value::Frequency {
                        count: rational::int(count),
                        per: per.into(),
                    };
                    return Some(expr(value, Class::Frequency, i));
                }
                if w == "every" {
                    if self.word(i + 1) == "other" {
                        if let Some(per) = per_unit(self.word(i + 2)) {
                            let value = Value::Frequency {
                                count: Rational::new(1, 2),
                                per: per.into(),
                            };
                            return Some(expr(value, Class::Frequency, i + 2));
                        }
                    }
                    if let Some(per) = per_unit(self.word(i + 1)) {
                        let value = Value::Frequency {
                            count: rational::int(1),
                            per: per.into(),
                        };
                        return Some(expr(value, Class::Frequency, i + 1));
                    }
                    if let (Some(n), Some(per)) = (self.count_at(i + 1), per_unit(self.word(i + 2))) {
                        if n > rational::int(0) {
                            let value = Value::Frequency {
                                count: n.recip(),
                                per: per.into(),
                            };
                            return Some(expr(value, Class::Frequency, i + 2));
                        }
                    }
                    return None;
                }
                if let Some(n) = self.count_at(i).filter(|_| w != "a" && w != "an") {
                    let times = usize::from(self.word(i + 1) == "times");
                    let bare_ok = matches!(w, "once" | "twice" | "thrice");
                    if times == 1 || bare_ok {
                        if let Some((per, len)) = self.per_phrase(i + 1 + times) {
                            let value = Value::Frequency {
                                count: n,
                                per: per.into(),
                            };
                            return Some(expr(value, Class::Frequency, i + times + len));
                        }
                    }
                }
                if self.kb.cues().qualitative.contains(w) && self.word(i + 1) != "for" {
                    let value = Value::Qualitative { label: w.into() };
                    return Some(expr(value, Class::Qualitative, i));
                }
                None
            }
            _ => None,
        }
    }
}

/// Every value expression among the tokens not already `taken`, left to
/// right and non-overlapping.
pub(crate) fn scan_values(text: &str, toks: &[Token], taken: &[bool], kb: &KnowledgeBase) -> Vec<ValueExpr> {
    let scan = Scan { text, toks, taken, kb };
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        match scan.at(i) {
            Some(e) => {
                i = e.last + 1;
                out.push(e);
            }
            None => i += 1,
        }
    }
    out
}
