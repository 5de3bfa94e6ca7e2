//! Machine notes attached to reasoning links and filtered clues.

use crate::clue::FilterPredicate;
use crate::error::{Error, Result};
use crate::expand::{EntityRef, PathHop};
use crate::graph::KnowledgeGraph;

struct Group<'a> {
    relation: &'a str,
    sources: Vec<&'a EntityRef>,
    targets: Vec<&'a EntityRef>,
}

fn side(entities: &[&EntityRef]) -> String {
    let mut out = entities[0].concept.clone();
    let mut last_concept = entities[0].concept.as_str();
    for e in entities {
        if e.concept != last_concept {
            out.push(' ');
            out.push_str(&e.concept);
            last_concept = &e.concept;
        }
        out.push(' ');
        out.push_str(&e.instance);
    }
    out
}

/// Renders a relation path as `<Concept> <instance>... <semantic> <Concept>
/// <instance>...`, one clause per relation, each hop read in the relation's
/// declared orientation. Consecutive hops over one relation that share an
/// endpoint collapse into a single clause listing the other endpoints.
pub fn render_collection_note(graph: &KnowledgeGraph, path: &[PathHop]) -> Result<String> {
    if path.is_empty() {
        return Err(Error::invalid("collection note needs a non-empty path"));
    }
    let mut groups: Vec<Group> = Vec::new();
    for hop in path {
        let (src, tgt) = if hop.forward { (&hop.from, &hop.to) } else { (&hop.to, &hop.from) };
        if let Some(g) = groups.last_mut() {
            if g.relation == hop.relation {
                if g.sources == [src] && !g.targets.contains(&tgt) {
                    g.targets.push(tgt);
                    continue;
                }
                if g.targets == [tgt] && !g.sources.contains(&src) {
                    g.sources.push(src);
                    continue;
                }
            }
        }
        groups.push(Group {
            relation: &hop.relation,
            sources: vec![src],
            targets: vec![tgt],
        });
    }
    let mut clauses = Vec::with_capacity(groups.len());
    for g in groups {
        let rel = graph
            .relation(g.relation)
            .ok_or_else(|| Error::not_found(format!("relation `{}`", g.relation)))?;
        clauses.push(format!("{} {} {}", side(&g.sources), rel.semantic, side(&g.targets)));
    }
    Ok(clauses.join("; "))
}

/// `Filtered by F: a, b; G: c`, clauses in filter-id order.
pub fn render_filter_note(predicate: &FilterPredicate) -> String {
    if predicate.is_empty() {
        return "Unfiltered".to_string();
    }
    let clauses: Vec<String> = predicate
        .clauses()
        .iter()
        .map(|c| {
            let opts: Vec<&str> = c.options.iter().map(String::as_str).collect();
            format!("{}: {}", c.filter, opts.join(", "))
        })
        .collect();
    format!("Filtered by {}", clauses.join("; "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clue::FilterClause;
    use crate::scenario::use_case_graph;

    fn hop(rel: &str, from: (&str, &str), to: (&str, &str), forward: bool) -> PathHop {
        PathHop {
            relation: rel.into(),
            from: EntityRef::new(from.0, from.1),
            to: EntityRef::new(to.0, to.1),
            forward,
        }
    }

    #[test]
    fn upward_hop_reads_in_relation_order() {
        let g = use_case_graph();
        let p = [hop("zone_contains_cluster", ("Cluster", "Cluster25"), ("Zone", "Zone02"), false)];
        assert_eq!(render_collection_note(&g, &p).unwrap(), "Zone Zone02 contains Cluster Cluster25");
    }

    #[test]
    fn siblings_collapse_under_their_parent() {
        let g = use_case_graph();
        let p = [
            hop("area_contains_zone", ("Zone", "Zone02"), ("Area", "Area01"), false),
            hop("area_contains_zone", ("Area", "Area01"), ("Zone", "Zone03"), true),
        ];
        assert_eq!(render_collection_note(&g, &p).unwrap(), "Area Area01 contains Zone Zone02 Zone03");
    }

    #[test]
    fn empty_path_is_rejected() {
        assert!(render_collection_note(&use_case_graph(), &[]).is_err());
    }

    #[test]
    fn filter_note_orders_clauses() {
        let p = FilterPredicate::new([
            FilterClause { filter: "OSType".into(), options: ["Linux".to_string()].into() },
            FilterClause { filter: "ErrorCode".into(), options: ["TypeError".to_string()].into() },
        ])
        .unwrap();
        assert_eq!(render_filter_note(&p), "Filtered by ErrorCode: TypeError; OSType: Linux");
    }
}
