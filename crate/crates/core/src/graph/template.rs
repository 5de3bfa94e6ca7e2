//! Query-template placeholder DSL.
//!
//! Templates are free text with a closed set of `{placeholder}` slots. The
//! local store evaluates the rendered text with its own small grammar (see
//! [`crate::store::LocalQuery`]); an external engine adapter would bind the
//! same slots to its own query language.

use std::fmt;

use crate::error::{Error, Result};

/// Slots a template may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Placeholder {
    Instance,
    Parent,
    TimeStart,
    TimeEnd,
    FilterClauses,
}

impl Placeholder {
    pub const ALL: [Placeholder; 5] = [
        Placeholder::Instance,
        Placeholder::Parent,
        Placeholder::TimeStart,
        Placeholder::TimeEnd,
        Placeholder::FilterClauses,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Placeholder::Instance => "instance",
            Placeholder::Parent => "parent",
            Placeholder::TimeStart => "t_start",
            Placeholder::TimeEnd => "t_end",
            Placeholder::FilterClauses => "filter_clauses",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

impl fmt::Display for Placeholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Segment {
    Text(String),
    Slot(Placeholder),
}

/// A parsed template.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    segments: Vec<Segment>,
}

/// Values substituted into a template. Unset slots render as empty text.
#[derive(Debug, Clone, Default)]
pub struct Bindings<'a> {
    pub instance: Option<&'a str>,
    pub parent: Option<&'a str>,
    pub t_start: Option<i64>,
    pub t_end: Option<i64>,
    pub filter_clauses: Option<&'a str>,
}

impl Template {
    pub fn parse(text: &str) -> Result<Self> {
        let mut segments = Vec::new();
        let mut rest = text;
        while let Some(open) = rest.find(['{', '}']) {
            if rest.as_bytes()[open] == b'}' {
                return Err(Error::invalid(format!("unbalanced `}}` in template `{text}`")));
            }
            if open > 0 {
                segments.push(Segment::Text(rest[..open].to_string()));
            }
            let after = &rest[open + 1..];
            let close = after
                .find('}')
                .ok_or_else(|| Error::invalid(format!("unterminated `{{` in template `{text}`")))?;
            let name = &after[..close];
            let slot = Placeholder::from_name(name)
                .ok_or_else(|| Error::invalid(format!("unknown placeholder `{{{name}}}`")))?;
            segments.push(Segment::Slot(slot));
            rest = &after[close + 1..];
        }
        if !rest.is_empty() {
            segments.push(Segment::Text(rest.to_string()));
        }
        Ok(Self { segments })
    }

    pub fn placeholders(&self) -> impl Iterator<Item = Placeholder> + '_ {
        self.segments.iter().filter_map(|s| match s {
            Segment::Slot(p) => Some(*p),
            Segment::Text(_) => None,
        })
    }

    pub fn uses(&self, placeholder: Placeholder) -> bool {
        self.placeholders().any(|p| p == placeholder)
    }

    pub fn render(&self, bindings: &Bindings<'_>) -> String {
        let mut out = String::new();
        for segment in &self.segments {
            match segment {
                Segment::Text(t) => out.push_str(t),
                Segment::Slot(p) => match p {
                    Placeholder::Instance => out.push_str(bindings.instance.unwrap_or_default()),
                    Placeholder::Parent => out.push_str(bindings.parent.unwrap_or_default()),
                    Placeholder::TimeStart => {
                        if let Some(t) = bindings.t_start {
                            out.push_str(&t.to_string());
                        }
                    }
                    Placeholder::TimeEnd => {
                        if let Some(t) = bindings.t_end {
                            out.push_str(&t.to_string());
                        }
                    }
                    Placeholder::FilterClauses => {
                        out.push_str(bindings.filter_clauses.unwrap_or_default())
                    }
                },
            }
        }
        out
    }
}
