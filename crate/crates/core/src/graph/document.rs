use sha2::{Digest, Sha256};

use super::{validate_graph, KnowledgeGraph, Template};
use crate::error::{Error, Result};
use crate::json::{from_slice_with_path, to_canonical_bytes};

/// Parses a graph document.
///
/// Decoding errors, unknown template placeholders and relations that point
/// at undeclared concepts are schema errors naming the offending path. The
/// returned graph is in canonical (id-sorted) order.
pub fn parse_graph(document: &[u8]) -> Result<KnowledgeGraph> {
    let graph: KnowledgeGraph = from_slice_with_path(document)?;

    for (ci, c) in graph.concepts.iter().enumerate() {
        Template::parse(&c.instance_query)
            .map_err(|e| Error::schema(format!("concepts[{ci}].instance_query"), e.to_string()))?;
        for (ai, a) in c.attributes.iter().enumerate() {
            Template::parse(&a.query_template).map_err(|e| {
                Error::schema(
                    format!("concepts[{ci}].attributes[{ai}].query_template"),
                    e.to_string(),
                )
            })?;
        }
    }
    for (ri, r) in graph.relations.iter().enumerate() {
        for (field, id) in [("source", &r.source), ("target", &r.target)] {
            if graph.concept(id).is_none() {
                return Err(Error::schema(
                    format!("relations[{ri}].{field}"),
                    format!("relation `{}` references unknown concept `{id}`", r.id),
                ));
            }
        }
        Template::parse(&r.traversal_query).map_err(|e| {
            Error::schema(format!("relations[{ri}].traversal_query"), e.to_string())
        })?;
    }
    Ok(graph.canonical())
}

/// Canonical bytes of a valid graph; invalid graphs are refused with their
/// validation report.
pub fn serialize_graph(graph: &KnowledgeGraph) -> Result<Vec<u8>> {
    let report = validate_graph(graph);
    if !report.is_valid() {
        return Err(Error::InvalidGraph(report));
    }
    to_canonical_bytes(&graph.canonical())
}

/// Content hash identifying a graph version.
pub fn graph_version(graph: &KnowledgeGraph) -> String {
    let bytes = to_canonical_bytes(&graph.canonical()).unwrap_or_default();
    let digest = Sha256::digest(&bytes);
    hex::encode(&digest[..8])
}
