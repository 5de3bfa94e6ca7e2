//! Session documents: canonical JSON export and validated import.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::session::{Annotation, BoardEnv, BoardEvent, EntityCard, InvestigationSession, ReasoningLink, SessionMeta};
use crate::error::{Error, Result};
use crate::graph::graph_version;
use crate::json::{from_slice_with_path, to_canonical_bytes};

pub const DOCUMENT_FORMAT: &str = "clueboard-session/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionDocument {
    pub format: String,
    pub meta: SessionMeta,
    pub cards: Vec<EntityCard>,
    pub links: Vec<ReasoningLink>,
    pub annotations: Vec<Annotation>,
    pub history: Vec<BoardEvent>,
}

impl From<&InvestigationSession> for SessionDocument {
    fn from(s: &InvestigationSession) -> Self {
        Self {
            format: DOCUMENT_FORMAT.to_string(),
            meta: s.meta.clone(),
            cards: s.cards.clone(),
            links: s.links.clone(),
            annotations: s.annotations.clone(),
            history: s.history.clone(),
        }
    }
}

pub fn export_session(session: &InvestigationSession) -> Result<Vec<u8>> {
    to_canonical_bytes(&SessionDocument::from(session))
}

/// Parses a document, checks its references, and rebuilds the session from
/// its history. The stored board must match the replayed one.
pub fn import_session(bytes: &[u8], env: BoardEnv<'_>) -> Result<InvestigationSession> {
    let doc: SessionDocument = from_slice_with_path(bytes)?;
    if doc.format != DOCUMENT_FORMAT {
        return Err(Error::schema("format", format!("expected `{DOCUMENT_FORMAT}`, found `{}`", doc.format)));
    }
    check_references(&doc)?;
    let current = graph_version(env.graph);
    if doc.meta.graph_version != current {
        return Err(Error::Conflict(format!(
            "session was built against graph {}, current graph is {current}",
            doc.meta.graph_version
        )));
    }
    let session = InvestigationSession::replay(doc.meta.clone(), env, &doc.history)?;
    let rebuilt = SessionDocument::from(&session);
    for (field, same) in [
        ("cards", rebuilt.cards == doc.cards),
        ("links", rebuilt.links == doc.links),
        ("annotations", rebuilt.annotations == doc.annotations),
        ("meta", rebuilt.meta == doc.meta),
    ] {
        if !same {
            return Err(Error::schema(field, "does not match the state replayed from history"));
        }
    }
    Ok(session)
}

fn check_references(doc: &SessionDocument) -> Result<()> {
    let mut cards = BTreeSet::new();
    for (i, c) in doc.cards.iter().enumerate() {
        if !cards.insert(c.id.as_str()) {
            return Err(Error::schema(format!("cards[{i}].id"), format!("duplicate card id `{}`", c.id)));
        }
    }
    for (i, l) in doc.links.iter().enumerate() {
        for (end, id) in [("source", &l.source), ("target", &l.target)] {
            if !cards.contains(id.as_str()) {
                return Err(Error::schema(
                    format!("links[{i}].{end}"),
                    format!("link `{}` points at unknown card `{id}`", l.id),
                ));
            }
        }
    }
    for (i, a) in doc.annotations.iter().enumerate() {
        if let Some(anchor) = &a.anchor {
            if !cards.contains(anchor.as_str()) {
                return Err(Error::schema(
                    format!("annotations[{i}].anchor"),
                    format!("annotation `{}` is anchored to unknown card `{anchor}`", a.id),
                ));
            }
        }
    }
    Ok(())
}
