//! Domain values shared across modules: time ranges, series keys, filter
//! predicates and clues.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-open interval `[start, end)` of epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimeRange {
    pub start: i64,
    pub end: i64,
}

impl TimeRange {
    pub fn new(start: i64, end: i64) -> Result<Self> {
        if end <= start {
            return Err(Error::invalid(format!("empty time range [{start}, {end})")));
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> i64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, t: i64) -> bool {
        t >= self.start && t < self.end
    }

    pub fn contains_range(&self, other: &TimeRange) -> bool {
        other.start >= self.start && other.end <= self.end
    }

    pub fn intersect(&self, other: &TimeRange) -> Option<TimeRange> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        (end > start).then_some(TimeRange { start, end })
    }

    pub fn overlaps(&self, other: &TimeRange) -> bool {
        self.intersect(other).is_some()
    }

    /// Window length expressed in samples of `step` seconds (at least 1).
    pub fn samples(&self, step: i64) -> usize {
        ((self.len() + step - 1) / step).max(1) as usize
    }
}

impl fmt::Display for TimeRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// One clause of a [`FilterPredicate`]: the record's value for `filter` must
/// be one of `options`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FilterClause {
    pub filter: String,
    pub options: BTreeSet<String>,
}

/// Conjunction of filter clauses, kept sorted by filter id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<FilterClause>", into = "Vec<FilterClause>")]
pub struct FilterPredicate {
    clauses: Vec<FilterClause>,
}

impl FilterPredicate {
    pub fn new(clauses: impl IntoIterator<Item = FilterClause>) -> Result<Self> {
        let mut clauses: Vec<FilterClause> = clauses.into_iter().collect();
        clauses.sort();
        for w in clauses.windows(2) {
            if w[0].filter == w[1].filter {
                return Err(Error::invalid(format!("filter `{}` appears twice", w[0].filter)));
            }
        }
        if let Some(c) = clauses.iter().find(|c| c.options.is_empty()) {
            return Err(Error::invalid(format!("filter `{}` has no options", c.filter)));
        }
        Ok(Self { clauses })
    }

    pub fn single(filter: &str, option: &str) -> Self {
        Self {
            clauses: vec![FilterClause {
                filter: filter.to_string(),
                options: [option.to_string()].into(),
            }],
        }
    }

    pub fn clauses(&self) -> &[FilterClause] {
        &self.clauses
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    /// `lookup` returns the record's value for a filter id.
    pub fn matches<'a>(&self, lookup: impl Fn(&str) -> Option<&'a str>) -> bool {
        self.clauses.iter().all(|c| match lookup(&c.filter) {
            Some(v) => c.options.contains(v),
            None => false,
        })
    }
}

impl TryFrom<Vec<FilterClause>> for FilterPredicate {
    type Error = Error;
    fn try_from(v: Vec<FilterClause>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FilterPredicate> for Vec<FilterClause> {
    fn from(p: FilterPredicate) -> Self {
        p.clauses
    }
}

impl fmt::Display for FilterPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .clauses
            .iter()
            .map(|c| {
                let opts: Vec<&str> = c.options.iter().map(String::as_str).collect();
                format!("{}={}", c.filter, opts.join("|"))
            })
            .collect();
        f.write_str(&parts.join(";"))
    }
}

impl FromStr for FilterPredicate {
    type Err = Error;

    /// Parses `Filter=a|b;Other=c`.
    fn from_str(s: &str) -> Result<Self> {
        let mut clauses = Vec::new();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (filter, opts) = part
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("malformed filter clause `{part}`")))?;
            clauses.push(FilterClause {
                filter: filter.trim().to_string(),
                options: opts
                    .split('|')
                    .map(str::trim)
                    .filter(|o| !o.is_empty())
                    .map(String::from)
                    .collect(),
            });
        }
        Self::new(clauses)
    }
}

/// Identifies a resolvable series or event sequence: an entity instance's
/// attribute, optionally filtered.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeriesKey {
    pub concept: String,
    pub instance: String,
    pub attribute: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterPredicate>,
}

impl SeriesKey {
    pub fn new(concept: &str, instance: &str, attribute: &str) -> Self {
        Self {
            concept: concept.to_string(),
            instance: instance.to_string(),
            attribute: attribute.to_string(),
            filter: None,
        }
    }

    pub fn with_filter(mut self, filter: Option<FilterPredicate>) -> Self {
        self.filter = filter.filter(|f| !f.is_empty());
        self
    }

    pub fn unfiltered(&self) -> SeriesKey {
        SeriesKey {
            filter: None,
            ..self.clone()
        }
    }

    pub fn entity(&self) -> (&str, &str) {
        (&self.concept, &self.instance)
    }
}

impl fmt::Display for SeriesKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.concept, self.instance, self.attribute)?;
        if let Some(p) = &self.filter {
            write!(f, "[{p}]")?;
        }
        Ok(())
    }
}

impl FromStr for SeriesKey {
    type Err = Error;

    /// Parses `Concept:Instance:Attribute` with an optional `[filters]` suffix.
    fn from_str(s: &str) -> Result<Self> {
        let (head, filter) = match s.find('[') {
            Some(i) if s.ends_with(']') => (&s[..i], Some(s[i + 1..s.len() - 1].parse()?)),
            Some(_) => return Err(Error::invalid(format!("malformed series key `{s}`"))),
            None => (s, None),
        };
        let parts: Vec<&str> = head.split(':').collect();
        match parts.as_slice() {
            [c, i, a] if !c.is_empty() && !i.is_empty() && !a.is_empty() => {
                Ok(SeriesKey::new(c, i, a).with_filter(filter))
            }
            _ => Err(Error::invalid(format!(
                "series key `{s}` must look like Concept:Instance:Attribute"
            ))),
        }
    }
}

/// An observation tuple: an entity instance's attribute over a time range.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clue {
    pub key: SeriesKey,
    pub window: TimeRange,
}

impl Clue {
    pub fn new(key: SeriesKey, window: TimeRange) -> Self {
        Self { key, window }
    }

    /// Stable textual id used for deterministic ordering.
    pub fn id(&self) -> String {
        self.key.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn series_key_roundtrips_through_text() {
        let k: SeriesKey = "Zone:Zone02:IncidentCount[OSType=Linux;ErrorCode=TypeError|Timeout]"
            .parse()
            .unwrap();
        assert_eq!(k.to_string(), "Zone:Zone02:IncidentCount[ErrorCode=Timeout|TypeError;OSType=Linux]");
        let plain: SeriesKey = "Zone:Zone02:IncidentCount".parse().unwrap();
        assert!(plain.filter.is_none());
        assert!("Zone:Zone02".parse::<SeriesKey>().is_err());
    }

    #[test]
    fn predicate_rejects_duplicate_and_empty_clauses() {
        assert!("A=x;A=y".parse::<FilterPredicate>().is_err());
        assert!("A=".parse::<FilterPredicate>().is_err());
    }

    #[test]
    fn zero_length_range_is_invalid() {
        assert!(TimeRange::new(5, 5).is_err());
        assert!(TimeRange::new(5, 4).is_err());
    }

    proptest! {
        #[test]
        fn predicate_serde_is_order_insensitive(
            mut names in proptest::collection::btree_set("[A-D]", 1..4),
        ) {
            let clauses: Vec<FilterClause> = std::mem::take(&mut names)
                .into_iter()
                .rev()
                .map(|f| FilterClause { filter: f, options: ["o".to_string()].into() })
                .collect();
            let p = FilterPredicate::new(clauses.clone()).unwrap();
            let json = serde_json::to_string(&p).unwrap();
            let back: FilterPredicate = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(&back, &p);
            let mut sorted = clauses;
            sorted.sort();
            prop_assert_eq!(back.clauses(), sorted.as_slice());
        }
    }
}
