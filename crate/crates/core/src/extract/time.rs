use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::NaiveDate;

use super::tokens::{number_word, tokenize, Tok, Token};
use crate::propmodel::{Anchor, Endpoint, TimePoint, TimeRef};
use crate::rational::{self, Rational};

/// Document-level anchors used to place calendar dates on the timeline.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TimeContext {
    pub admission: Option<NaiveDate>,
}

/// Normalizes the first temporal expression of a sentence.
///
/// `day N` gives a day marker; `on/at admission|discharge` the matching
/// marker; `before discharge` the half-open stay `[admission, discharge)`;
/// `until discharge` the closed stay; `from day A to day B` a closed
/// interval; `for N days` extends a preceding or following anchor into an
/// interval. Anything else is `Unknown`.
pub fn normalize_time(sentence: &str, ctx: &TimeContext) -> TimeRef {
    let toks = tokenize(sentence);
    find_time(&toks, &alloc::vec![false; toks.len()], ctx).time
}

pub(crate) struct TimeMatch {
    pub time: TimeRef,
    /// Token indices that belong to temporal phrases.
    pub consumed: Vec<usize>,
}

pub(crate) fn find_time(toks: &[Token], taken: &[bool], ctx: &TimeContext) -> TimeMatch {
    let vis: Vec<usize> = (0..toks.len())
        .filter(|&i| !taken[i] && toks[i].kind != Tok::Punct)
        .collect();
    let m = Matcher { toks, vis: &vis };
    let mut anchor: Option<TimeRef> = None;
    let mut duration: Option<Rational> = None;
    let mut consumed = Vec::new();
    let mut p = 0;
    while p < vis.len() {
        if let Some((t, len)) = m.anchor_at(p, ctx) {
            if anchor.is_none() {
                anchor = Some(t);
            }
            consumed.extend_from_slice(&vis[p..p + len]);
            p += len;
        } else if let Some((d, len)) = m.duration_at(p) {
            if duration.is_none() {
                duration = Some(d);
            }
            consumed.extend_from_slice(&vis[p..p + len]);
            p += len;
        } else {
            p += 1;
        }
    }
    let time = match (anchor, duration) {
        (Some(t), Some(d)) => match start_day(&t) {
            Some(s) => TimeRef::interval(Endpoint::day(s), Endpoint::day(s + d)),
            None => t,
        },
        (Some(t), None) => t,
        (None, _) => TimeRef::Unknown,
    };
    TimeMatch { time, consumed }
}

fn start_day(t: &TimeRef) -> Option<Rational> {
    match t {
        TimeRef::Marker(Anchor::Admission) => Some(rational::int(0)),
        TimeRef::Marker(Anchor::Day(n)) => Some(rational::int(i128::from(*n))),
        TimeRef::Offset(d) => Some(*d),
        _ => None,
    }
}

fn day_ref(d: Rational) -> TimeRef {
    if d.is_integer() && *d.numer() >= 0 && *d.numer() <= i128::from(u32::MAX) {
        TimeRef::Marker(Anchor::Day(*d.numer() as u32))
    } else {
        TimeRef::Offset(d)
    }
}

fn stay_until_discharge(open_end: bool) -> TimeRef {
    TimeRef::interval(
        Endpoint::day(0),
        Endpoint {
            at: TimePoint::Discharge,
            open: open_end,
        },
    )
}

struct Matcher<'a> {
    toks: &'a [Token],
    vis: &'a [usize],
}

impl Matcher<'_> {
    fn tok(&self, p: usize) -> Option<&Token> {
        self.vis.get(p).map(|&i| &self.toks[i])
    }

    fn word(&self, p: usize) -> &str {
        match self.tok(p) {
            Some(t) if t.kind == Tok::Word => &t.norm,
            _ => "",
        }
    }

    /// Length of the first alternative that matches at `p`.
    fn one_of(&self, p: usize, alts: &[&[&str]]) -> Option<usize> {
        alts.iter()
            .find(|alt| alt.iter().enumerate().all(|(k, w)| self.word(p + k) == *w))
            .map(|alt| alt.len())
    }

    fn number(&self, p: usize) -> Option<Rational> {
        let t = self.tok(p)?;
        match t.kind {
            Tok::Number => rational::parse(&t.norm),
            Tok::Word => number_word(&t.norm).map(rational::int),
            _ => None,
        }
    }

    /// `day N` / `hospital day N` / `hd N`.
    fn day_at(&self, p: usize) -> Option<(Rational, usize)> {
        let lead = self.one_of(p, &[&["hospital", "day"], &["day"], &["hd"]])?;
        let t = self.tok(p + lead)?;
        if t.kind != Tok::Number {
            return None;
        }
        Some((rational::parse(&t.norm)?, lead + 1))
    }

    /// An interval endpoint: `day N`, `admission` or `discharge`.
    fn point_at(&self, p: usize) -> Option<(TimePoint, usize)> {
        if let Some((d, n)) = self.day_at(p) {
            return Some((TimePoint::Day(d), n));
        }
        match self.word(p) {
            "admission" => Some((TimePoint::Day(rational::int(0)), 1)),
            "discharge" => Some((TimePoint::Discharge, 1)),
            _ => None,
        }
    }

    fn anchor_at(&self, p: usize, ctx: &TimeContext) -> Option<(TimeRef, usize)> {
        const BEFORE: &[&[&str]] = &[&["before"], &["prior", "to"], &["preceding"], &["pre"]];
        const AFTER: &[&[&str]] = &[&["after"], &["following"], &["post"], &["since"]];
        const AT: &[&[&str]] = &[&["on"], &["at"], &["upon"]];
        const UNTIL: &[&[&str]] = &[&["until"], &["till"], &["through"], &["to"], &["and"]];

        if let Some(n) = self.one_of(p, &[&["from"], &["between"]]) {
            if let Some((a, la)) = self.point_at(p + n) {
                if let Some(u) = self.one_of(p + n + la, UNTIL) {
                    if let Some((b, lb)) = self.point_at(p + n + la + u) {
                        let t = TimeRef::interval(Endpoint::closed(a), Endpoint::closed(b));
                        return Some((t, n + la + u + lb));
                    }
                }
            }
        }
        if let Some(n) = self.one_of(p, &[&["until"], &["till"], &["through"]]) {
            if self.word(p + n) == "discharge" {
                return Some((stay_until_discharge(false), n + 1));
            }
        }
        if self.word(p) == "throughout" {
            let the = usize::from(self.word(p + 1) == "the");
            if let Some(n) = self.one_of(
                p + 1 + the,
                &[&["hospital", "stay"], &["admission"], &["stay"], &["hospitalization"]],
            ) {
                return Some((stay_until_discharge(false), 1 + the + n));
            }
        }
        if let Some(n) = self.one_of(p, BEFORE) {
            match self.word(p + n) {
                "discharge" => return Some((stay_until_discharge(true), n + 1)),
                "admission" => return Some((TimeRef::Marker(Anchor::PreAdmission), n + 1)),
                _ => {}
            }
        }
        if let Some(n) = self.one_of(p, AFTER) {
            match self.word(p + n) {
                "discharge" => return Some((TimeRef::Marker(Anchor::PostDischarge), n + 1)),
                "admission" => {
                    let t = TimeRef::interval(
                        Endpoint::open(TimePoint::Day(rational::int(0))),
                        Endpoint::closed(TimePoint::Discharge),
                    );
                    return Some((t, n + 1));
                }
                _ => {}
            }
        }
        if let Some(n) = self.one_of(p, AT) {
            match self.word(p + n) {
                "admission" => return Some((TimeRef::Marker(Anchor::Admission), n + 1)),
                "discharge" => return Some((TimeRef::Marker(Anchor::Discharge), n + 1)),
                _ => {}
            }
        }
        let lead = self.one_of(p, &[&["on"], &["by"]]).unwrap_or(0);
        if let Some((d, n)) = self.day_at(p + lead) {
            return Some((day_ref(d), lead + n));
        }
        if let Some(t) = self.tok(p) {
            if t.kind == Tok::Date {
                let time = match (NaiveDate::parse_from_str(&t.norm, "%Y-%m-%d"), ctx.admission) {
                    (Ok(date), Some(adm)) => day_ref(rational::int(i128::from((date - adm).num_days()))),
                    _ => TimeRef::Unknown,
                };
                return Some((time, 1));
            }
        }
        None
    }

    /// `for N days` / `for N weeks` / `x N days`, in days.
    fn duration_at(&self, p: usize) -> Option<(Rational, usize)> {
        if !matches!(self.word(p), "for" | "x") {
            return None;
        }
        let n = self.number(p + 1)?;
        let scale = match self.word(p + 2) {
            "day" | "days" => 1,
            "week" | "weeks" => 7,
            _ => return None,
        };
        Some((n * rational::int(scale), 3))
    }
}

/// Renders a time reference as a phrase that [`normalize_time`] maps back
/// to the same reference. `None` for references no phrase produces.
pub fn time_phrase(t: &TimeRef) -> Option<String> {
    let day = |d: &Rational| format!("day {}", rational::to_decimal_string(d));
    Some(match t {
        TimeRef::Unknown => String::new(),
        TimeRef::Marker(Anchor::PreAdmission) => "before admission".into(),
        TimeRef::Marker(Anchor::Admission) => "on admission".into(),
        TimeRef::Marker(Anchor::Day(n)) => format!("on day {n}"),
        TimeRef::Marker(Anchor::Discharge) => "at discharge".into(),
        TimeRef::Marker(Anchor::PostDischarge) => "after discharge".into(),
        TimeRef::Offset(d) if *d >= rational::int(0) && !d.is_integer() => format!("on {}", day(d)),
        TimeRef::Offset(_) => return None,
        TimeRef::Interval { start, end } => {
            let zero = TimePoint::Day(rational::int(0));
            match (&start.at, start.open, &end.at, end.open) {
                (s, false, TimePoint::Discharge, true) if *s == zero => "before discharge".into(),
                (s, false, TimePoint::Discharge, false) if *s == zero => "until discharge".into(),
                (s, true, TimePoint::Discharge, false) if *s == zero => "after admission".into(),
                (TimePoint::Day(a), false, TimePoint::Day(b), false) if *a >= rational::int(0) && a <= b => {
                    format!("from {} to {}", day(a), day(b))
                }
                (TimePoint::Day(a), false, TimePoint::Discharge, false) if *a >= rational::int(0) => {
                    format!("from {} to discharge", day(a))
                }
                _ => return None,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propmodel::Timeline;
    use core::cmp::Ordering;

    fn t(s: &str) -> TimeRef {
        normalize_time(s, &TimeContext::default())
    }

    fn days(a: i128, b: i128) -> TimeRef {
        TimeRef::interval(Endpoint::day(a), Endpoint::day(b))
    }

    // Thirty hand-labelled phrases.
    #[test]
    fn labelled_temporal_phrases() {
        let dis = TimePoint::Discharge;
        let cases: [(&str, TimeRef); 30] = [
            ("on day 2", TimeRef::Marker(Anchor::Day(2))),
            ("Ceftriaxone started on day 0", TimeRef::Marker(Anchor::Day(0))),
            ("by hospital day 4 afebrile", TimeRef::Marker(Anchor::Day(4))),
            ("HD 3 transfusion", TimeRef::Marker(Anchor::Day(3))),
            ("on day 1.5", TimeRef::Offset(Rational::new(3, 2))),
            ("before discharge", stay_until_discharge(true)),
            ("fever resolved prior to discharge", stay_until_discharge(true)),
            ("fever persisted until discharge", stay_until_discharge(false)),
            ("continued through discharge", stay_until_discharge(false)),
            ("NPO throughout the hospital stay", stay_until_discharge(false)),
            ("on admission", TimeRef::Marker(Anchor::Admission)),
            ("at admission creatinine 2.1", TimeRef::Marker(Anchor::Admission)),
            ("upon discharge", TimeRef::Marker(Anchor::Discharge)),
            ("at discharge", TimeRef::Marker(Anchor::Discharge)),
            ("before admission", TimeRef::Marker(Anchor::PreAdmission)),
            ("pre-admission aspirin", TimeRef::Marker(Anchor::PreAdmission)),
            ("after discharge", TimeRef::Marker(Anchor::PostDischarge)),
            ("follow up post discharge", TimeRef::Marker(Anchor::PostDischarge)),
            (
                "after admission",
                TimeRef::interval(Endpoint::open(TimePoint::Day(rational::int(0))), Endpoint::closed(dis.clone())),
            ),
            ("from day 1 to day 4", days(1, 4)),
            ("between day 2 and day 5", days(2, 5)),
            ("from day 2 until day 3", days(2, 3)),
            ("from admission to discharge", stay_until_discharge(false)),
            ("from day 3 to discharge", TimeRef::interval(Endpoint::day(3), Endpoint::closed(dis))),
            ("on day 1 for 3 days", days(1, 4)),
            ("for three days starting on day 2", days(2, 5)),
            ("on admission for 2 weeks", days(0, 14)),
            ("treated with IV antibiotics for three days", TimeRef::Unknown),
            ("no temporal phrase here", TimeRef::Unknown),
            ("discharge summary reviewed", TimeRef::Unknown),
        ];
        for (phrase, want) in cases {
            assert_eq!(t(phrase), want, "{phrase}");
        }
    }

    #[test]
    fn calendar_dates_need_an_admission_anchor() {
        let ctx = TimeContext {
            admission: NaiveDate::from_ymd_opt(2024, 3, 1),
        };
        assert_eq!(normalize_time("seen 2024-03-03", &ctx), TimeRef::Marker(Anchor::Day(2)));
        assert_eq!(normalize_time("seen 2024-02-28", &ctx), TimeRef::Offset(rational::int(-2)));
        assert_eq!(t("seen 2024-03-03"), TimeRef::Unknown);
    }

    #[test]
    fn before_discharge_orders_before_discharge_marker() {
        let tl = Timeline::default();
        assert_eq!(
            tl.compare(&t("before discharge"), &t("at discharge")),
            Some(Ordering::Less)
        );
    }

    #[test]
    fn phrases_round_trip() {
        let refs = [
            TimeRef::Unknown,
            TimeRef::Marker(Anchor::PreAdmission),
            TimeRef::Marker(Anchor::Admission),
            TimeRef::Marker(Anchor::Day(7)),
            TimeRef::Marker(Anchor::Discharge),
            TimeRef::Marker(Anchor::PostDischarge),
            TimeRef::Offset(Rational::new(5, 2)),
            stay_until_discharge(true),
            stay_until_discharge(false),
            days(2, 6),
            TimeRef::interval(Endpoint::day(Rational::new(1, 2)), Endpoint::closed(TimePoint::Discharge)),
        ];
        for r in refs {
            let phrase = time_phrase(&r).unwrap();
            assert_eq!(t(&phrase), r, "{phrase}");
        }
    }
}
