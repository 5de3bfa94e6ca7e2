use crate::error::{Error, Result};

/// The local store's reading of a rendered query template.
///
/// ```text
/// series <key>[*]                 one series, or every series under a prefix
/// events <key>[*]                 one event sequence, or a prefix family
/// count records where <f>=<v>     per-bin row counts of matching records
/// instances <concept>
/// links <table>
/// ```
///
/// Any query may end in `during <t_start>..<t_end>`; the local store clips
/// to the requested window instead, so the clause is accepted and dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LocalQuery {
    Series { pattern: String },
    Events { pattern: String },
    Count { field: String, value: String },
    Instances { concept: String },
    Links { table: String },
}

impl LocalQuery {
    pub fn parse(rendered: &str) -> Result<Self> {
        let text = match rendered.find(" during ") {
            Some(i) => &rendered[..i],
            None => rendered,
        }
        .trim();
        let (verb, rest) = text
            .split_once(' ')
            .ok_or_else(|| Error::invalid(format!("unsupported local query `{rendered}`")))?;
        let rest = rest.trim();
        let q = match verb {
            "series" => LocalQuery::Series { pattern: rest.to_string() },
            "events" => LocalQuery::Events { pattern: rest.to_string() },
            "instances" => LocalQuery::Instances { concept: rest.to_string() },
            "links" => LocalQuery::Links { table: rest.to_string() },
            "count" => {
                let cond = rest
                    .strip_prefix("records where ")
                    .ok_or_else(|| Error::invalid(format!("count query must read `count records where f=v`: `{rendered}`")))?;
                let (field, value) = cond
                    .split_once('=')
                    .ok_or_else(|| Error::invalid(format!("malformed count condition `{cond}`")))?;
                LocalQuery::Count {
                    field: field.trim().to_string(),
                    value: value.trim().to_string(),
                }
            }
            _ => return Err(Error::invalid(format!("unsupported local query verb `{verb}`"))),
        };
        let empty = match &q {
            LocalQuery::Series { pattern } | LocalQuery::Events { pattern } => pattern.is_empty(),
            LocalQuery::Instances { concept } => concept.is_empty(),
            LocalQuery::Links { table } => table.is_empty(),
            LocalQuery::Count { field, value } => field.is_empty() || value.is_empty(),
        };
        if empty {
            return Err(Error::invalid(format!("incomplete local query `{rendered}`")));
        }
        Ok(q)
    }
}

/// Matches a key against a pattern whose optional trailing `*` is a prefix
/// wildcard.
pub(crate) fn pattern_matches(pattern: &str, key: &str) -> bool {
    match pattern.strip_suffix('*') {
        Some(prefix) => key.starts_with(prefix),
        None => pattern == key,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_verb() {
        assert_eq!(
            LocalQuery::parse("series Zone/Zone02/Utilization during 1..2").unwrap(),
            LocalQuery::Series { pattern: "Zone/Zone02/Utilization".into() }
        );
        assert_eq!(
            LocalQuery::parse("count records where zone=Zone02").unwrap(),
            LocalQuery::Count { field: "zone".into(), value: "Zone02".into() }
        );
        assert_eq!(
            LocalQuery::parse("links area_contains_zone").unwrap(),
            LocalQuery::Links { table: "area_contains_zone".into() }
        );
        assert!(LocalQuery::parse("select * from x").is_err());
        assert!(LocalQuery::parse("count rows").is_err());
        assert!(LocalQuery::parse("series ").is_err());
    }

    #[test]
    fn wildcard_is_a_prefix_match() {
        assert!(pattern_matches("Cluster/C1/nodes/*", "Cluster/C1/nodes/ready"));
        assert!(!pattern_matches("Cluster/C1/nodes/*", "Cluster/C2/nodes/ready"));
        assert!(pattern_matches("a/b", "a/b"));
        assert!(!pattern_matches("a/b", "a/bc"));
    }
}
