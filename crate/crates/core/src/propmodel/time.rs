//! Admission-relative timeline references and their partial order.
//!
//! Every reference resolves to a span on the patient timeline, where day 0
//! is the admission day. A discharge whose day is unknown stays symbolic:
//! it is known to follow admission but is incomparable with later day
//! offsets.

use alloc::format;
use alloc::string::{String, ToString};
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::rational::{self, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Anchor {
    PreAdmission,
    Admission,
    /// Hospital day `n`; day 0 is the admission day.
    Day(u32),
    Discharge,
    PostDischarge,
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Anchor::PreAdmission => f.write_str("pre_admission"),
            Anchor::Admission => f.write_str("admission"),
            Anchor::Day(n) => write!(f, "day_{n}"),
            Anchor::Discharge => f.write_str("discharge"),
            Anchor::PostDischarge => f.write_str("post_discharge"),
        }
    }
}

impl FromStr for Anchor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "pre_admission" => Anchor::PreAdmission,
            "admission" => Anchor::Admission,
            "discharge" => Anchor::Discharge,
            "post_discharge" => Anchor::PostDischarge,
            _ => {
                let n = s
                    .strip_prefix("day_")
                    .and_then(|n| n.parse().ok())
                    .ok_or_else(|| format!("unknown anchor `{s}`"))?;
                Anchor::Day(n)
            }
        })
    }
}

impl Serialize for Anchor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Anchor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An interval endpoint position: a day offset or the (possibly unknown)
/// discharge day.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TimePoint {
    Day(Rational),
    Discharge,
}

impl Serialize for TimePoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TimePoint::Day(d) => s.serialize_str(&rational::to_decimal_string(d)),
            TimePoint::Discharge => s.serialize_str("discharge"),
        }
    }
}

impl<'de> Deserialize<'de> for TimePoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "discharge" {
            return Ok(TimePoint::Discharge);
        }
        rational::parse(&s)
            .map(TimePoint::Day)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid time point `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Endpoint {
    pub at: TimePoint,
    #[serde(default)]
    pub open: bool,
}

impl Endpoint {
    pub fn closed(at: TimePoint) -> Self {
        Endpoint { at, open: false }
    }

    pub fn open(at: TimePoint) -> Self {
        Endpoint { at, open: true }
    }

    pub fn day(d: impl Into<Rational>) -> Self {
        Endpoint::closed(TimePoint::Day(d.into()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "TimeWire", try_from = "TimeWire")]
pub enum TimeRef {
    Unknown,
    Marker(Anchor),
    /// Days after admission.
    Offset(Rational),
    Interval { start: Endpoint, end: Endpoint },
}

impl TimeRef {
    pub fn is_known(&self) -> bool {
        !matches!(self, TimeRef::Unknown)
    }

    pub fn interval(start: Endpoint, end: Endpoint) -> Self {
        TimeRef::Interval { start, end }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum TimeWire {
    Unknown,
    Marker {
        anchor: Anchor,
    },
    Offset {
        #[serde(with = "rational::serde_str")]
        days: Rational,
    },
    Interval {
        start: Endpoint,
        end: Endpoint,
    },
}

impl From<TimeRef> for TimeWire {
    fn from(t: TimeRef) -> Self {
        match t {
            TimeRef::Unknown => TimeWire::Unknown,
            TimeRef::Marker(anchor) => TimeWire::Marker { anchor },
            TimeRef::Offset(days) => TimeWire::Offset { days },
            TimeRef::Interval { start, end } => TimeWire::Interval { start, end },
        }
    }
}

impl TryFrom<TimeWire> for TimeRef {
    type Error = String;

    fn try_from(w: TimeWire) -> Result<Self, Self::Error> {
        Ok(match w {
            TimeWire::Unknown => TimeRef::Unknown,
            TimeWire::Marker { anchor } => TimeRef::Marker(anchor),
            TimeWire::Offset { days } => TimeRef::Offset(days),
            TimeWire::Interval { start, end } => TimeRef::Interval { start, end },
        })
    }
}

impl fmt::Display for TimeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeRef::Unknown => f.write_str("unknown"),
            TimeRef::Marker(a) => write!(f, "{a}"),
            TimeRef::Offset(d) => write!(f, "+{}d", rational::to_decimal_string(d)),
            TimeRef::Interval { start, end } => {
                let point = |p: &TimePoint| match p {
                    TimePoint::Day(d) => rational::to_decimal_string(d),
                    TimePoint::Discharge => "discharge".to_string(),
                };
                write!(
                    f,
                    "{}{},{}{}",
                    if start.open { '(' } else { '[' },
                    point(&start.at),
                    point(&end.at),
                    if end.open { ')' } else { ']' }
                )
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Pt {
    NegInf,
    Fin(Rational),
    /// Discharge with an unknown day; assumed strictly after admission.
    Dis,
    PosInf,
}

fn pt_cmp(a: &Pt, b: &Pt) -> Option<Ordering> {
    use Pt::*;
    let zero = rational::int(0);
    match (a, b) {
        (NegInf, NegInf) | (PosInf, PosInf) | (Dis, Dis) => Some(Ordering::Equal),
        (NegInf, _) | (_, PosInf) => Some(Ordering::Less),
        (_, NegInf) | (PosInf, _) => Some(Ordering::Greater),
        (Fin(x), Fin(y)) => Some(x.cmp(y)),
        (Fin(x), Dis) => (*x <= zero).then_some(Ordering::Less),
        (Dis, Fin(x)) => (*x <= zero).then_some(Ordering::Greater),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Bound {
    pt: Pt,
    open: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Span {
    lo: Bound,
    hi: Bound,
}

impl Span {
    fn point(pt: Pt) -> Self {
        Span {
            lo: Bound {
                pt: pt.clone(),
                open: false,
            },
            hi: Bound { pt, open: false },
        }
    }

    fn strictly_before(&self, other: &Span) -> bool {
        match pt_cmp(&self.hi.pt, &other.lo.pt) {
            Some(Ordering::Less) => true,
            Some(Ordering::Equal) => self.hi.open || other.lo.open,
            _ => false,
        }
    }
}

fn bound_le(lo: &Bound, hi: &Bound) -> bool {
    match pt_cmp(&lo.pt, &hi.pt) {
        Some(Ordering::Less) => true,
        Some(Ordering::Equal) => !lo.open && !hi.open,
        _ => false,
    }
}

/// Checks `start ≤ end` where decidable; an undecidable order against an
/// unknown discharge day is accepted.
pub(crate) fn interval_ordered(start: &Endpoint, end: &Endpoint) -> bool {
    let tl = Timeline::default();
    match pt_cmp(&tl.point(&start.at), &tl.point(&end.at)) {
        Some(Ordering::Less) | None => true,
        Some(Ordering::Equal) => !start.open && !end.open,
        Some(Ordering::Greater) => false,
    }
}

/// Per-document anchors used to resolve symbolic time references.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Timeline {
    /// Discharge day offset from admission, when known.
    pub discharge: Option<Rational>,
}

impl Timeline {
    pub fn with_discharge(day: Rational) -> Self {
        Timeline {
            discharge: Some(day),
        }
    }

    fn discharge_pt(&self) -> Pt {
        match self.discharge {
            Some(d) => Pt::Fin(d),
            None => Pt::Dis,
        }
    }

    fn point(&self, p: &TimePoint) -> Pt {
        match p {
            TimePoint::Day(d) => Pt::Fin(*d),
            TimePoint::Discharge => self.discharge_pt(),
        }
    }

    fn resolve(&self, t: &TimeRef) -> Option<Span> {
        let zero = rational::int(0);
        Some(match t {
            TimeRef::Unknown => return None,
            TimeRef::Marker(Anchor::PreAdmission) => Span {
                lo: Bound {
                    pt: Pt::NegInf,
                    open: true,
                },
                hi: Bound {
                    pt: Pt::Fin(zero),
                    open: true,
                },
            },
            TimeRef::Marker(Anchor::Admission) => Span::point(Pt::Fin(zero)),
            TimeRef::Marker(Anchor::Day(n)) => Span::point(Pt::Fin(rational::int(i128::from(*n)))),
            TimeRef::Marker(Anchor::Discharge) => Span::point(self.discharge_pt()),
            TimeRef::Marker(Anchor::PostDischarge) => Span {
                lo: Bound {
                    pt: self.discharge_pt(),
                    open: true,
                },
                hi: Bound {
                    pt: Pt::PosInf,
                    open: true,
                },
            },
            TimeRef::Offset(d) => Span::point(Pt::Fin(*d)),
            TimeRef::Interval { start, end } => Span {
                lo: Bound {
                    pt: self.point(&start.at),
                    open: start.open,
                },
                hi: Bound {
                    pt: self.point(&end.at),
                    open: end.open,
                },
            },
        })
    }

    /// Partial order on time references: `Equal` for identical spans,
    /// `Less`/`Greater` when one lies entirely before the other, `None`
    /// when unknown or overlapping.
    pub fn compare(&self, a: &TimeRef, b: &TimeRef) -> Option<Ordering> {
        let (sa, sb) = (self.resolve(a)?, self.resolve(b)?);
        if sa == sb {
            Some(Ordering::Equal)
        } else if sa.strictly_before(&sb) {
            Some(Ordering::Less)
        } else if sb.strictly_before(&sa) {
            Some(Ordering::Greater)
        } else {
            None
        }
    }

    /// Whether `a` ends strictly before `b` begins, where decidable.
    /// `[0, discharge)` precedes `discharge`; `[0, discharge]` does not.
    pub fn precedes(&self, a: &TimeRef, b: &TimeRef) -> Option<bool> {
        let (sa, sb) = (self.resolve(a)?, self.resolve(b)?);
        match pt_cmp(&sa.hi.pt, &sb.lo.pt)? {
            Ordering::Less => Some(true),
            Ordering::Equal => Some(sa.hi.open || sb.lo.open),
            Ordering::Greater => Some(false),
        }
    }

    /// True when both references are known and their spans provably share
    /// at least one instant.
    pub fn overlaps(&self, a: &TimeRef, b: &TimeRef) -> bool {
        match (self.resolve(a), self.resolve(b)) {
            (Some(sa), Some(sb)) => bound_le(&sa.lo, &sb.hi) && bound_le(&sb.lo, &sa.hi),
            _ => false,
        }
    }
}
