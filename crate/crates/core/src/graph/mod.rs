//! The investigation knowledge graph: entity concepts with typed attributes
//! and filters, and the relations that connect them.

mod document;
mod template;
mod validate;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use document::{graph_version, parse_graph, serialize_graph};
pub use template::{Bindings, Placeholder, Template};
pub use validate::{validate_graph, Finding, ValidationReport};

/// Data type of an attribute.
///
/// `number`/`bag` resolve to one/many time series, `string`/`set` to one/many
/// event sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Number,
    String,
    Set,
    Bag,
}

impl DataKind {
    pub fn is_series(self) -> bool {
        matches!(self, DataKind::Number | DataKind::Bag)
    }

    pub fn is_multi(self) -> bool {
        matches!(self, DataKind::Set | DataKind::Bag)
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeDef {
    pub id: String,
    pub name: String,
    pub kind: DataKind,
    pub query_template: String,
    /// Marks the KPI that incidents of this concept link to.
    #[serde(default, skip_serializing_if = "is_false")]
    pub primary_kpi: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterDef {
    pub id: String,
    pub name: String,
    pub options: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityConcept {
    pub id: String,
    pub name: String,
    pub attributes: Vec<AttributeDef>,
    #[serde(default)]
    pub filters: Vec<FilterDef>,
    pub instance_query: String,
}

impl EntityConcept {
    pub fn attribute(&self, id: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.id == id)
    }

    /// Filters usable for refinement. When none are declared, string-kind
    /// attributes act as filters whose options are discovered from data.
    pub fn effective_filter_ids(&self) -> Vec<String> {
        if self.filters.is_empty() {
            self.attributes
                .iter()
                .filter(|a| a.kind == DataKind::String)
                .map(|a| a.id.clone())
                .collect()
        } else {
            self.filters.iter().map(|f| f.id.clone()).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hierarchy {
    Contains,
    Lateral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationDef {
    pub id: String,
    pub source: String,
    pub target: String,
    pub semantic: String,
    pub hierarchy: Hierarchy,
    pub traversal_query: String,
}

/// Directions answered by [`KnowledgeGraph::neighbors`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphDirection {
    Up,
    Down,
    Right,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeGraph {
    pub concepts: Vec<EntityConcept>,
    pub relations: Vec<RelationDef>,
}

/// Structural equality: list order is not significant.
impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = (self.canonical(), other.canonical());
        a.concepts == b.concepts && a.relations == b.relations
    }
}

impl KnowledgeGraph {
    pub fn concept(&self, id: &str) -> Option<&EntityConcept> {
        self.concepts.iter().find(|c| c.id == id)
    }

    pub fn require_concept(&self, id: &str) -> Result<&EntityConcept> {
        self.concept(id)
            .ok_or_else(|| Error::not_found(format!("concept `{id}`")))
    }

    pub fn relation(&self, id: &str) -> Option<&RelationDef> {
        self.relations.iter().find(|r| r.id == id)
    }

    pub fn attribute(&self, concept: &str, attribute: &str) -> Option<&AttributeDef> {
        self.concept(concept).and_then(|c| c.attribute(attribute))
    }

    /// Copy with every id-bearing list sorted by id.
    pub fn canonical(&self) -> KnowledgeGraph {
        let mut g = self.clone();
        g.concepts.sort_by(|a, b| a.id.cmp(&b.id));
        for c in &mut g.concepts {
            c.attributes.sort_by(|a, b| a.id.cmp(&b.id));
            c.filters.sort_by(|a, b| a.id.cmp(&b.id));
        }
        g.relations.sort_by(|a, b| a.id.cmp(&b.id));
        g
    }

    /// One-hop concept neighbors, ordered by relation id.
    ///
    /// `Up` follows incoming `contains` relations to their source, `Down`
    /// outgoing `contains` relations to their target, and `Right` any
    /// `lateral` relation touching the concept to its other endpoint.
    pub fn neighbors(
        &self,
        concept: &str,
        direction: GraphDirection,
    ) -> Result<Vec<(&RelationDef, &EntityConcept)>> {
        self.require_concept(concept)?;
        let mut rels: Vec<&RelationDef> = self.relations.iter().collect();
        rels.sort_by(|a, b| a.id.cmp(&b.id));
        let mut out = Vec::new();
        for rel in rels {
            let other = match (direction, rel.hierarchy) {
                (GraphDirection::Up, Hierarchy::Contains) if rel.target == concept => &rel.source,
                (GraphDirection::Down, Hierarchy::Contains) if rel.source == concept => &rel.target,
                (GraphDirection::Right, Hierarchy::Lateral) if rel.source == concept => &rel.target,
                (GraphDirection::Right, Hierarchy::Lateral) if rel.target == concept => &rel.source,
                _ => continue,
            };
            if let Some(c) = self.concept(other) {
                out.push((rel, c));
            }
        }
        Ok(out)
    }

    /// Concepts in a topological order of the `contains` subgraph, or `None`
    /// when that subgraph has a cycle.
    pub fn hierarchy_order(&self) -> Option<Vec<String>> {
        let ids: BTreeSet<&str> = self.concepts.iter().map(|c| c.id.as_str()).collect();
        let edges: Vec<(&str, &str)> = self
            .relations
            .iter()
            .filter(|r| r.hierarchy == Hierarchy::Contains)
            .filter(|r| ids.contains(r.source.as_str()) && ids.contains(r.target.as_str()))
            .map(|r| (r.source.as_str(), r.target.as_str()))
            .collect();
        let mut indegree: std::collections::BTreeMap<&str, usize> =
            ids.iter().map(|id| (*id, 0)).collect();
        for (_, t) in &edges {
            *indegree.get_mut(t).unwrap() += 1;
        }
        let mut ready: BTreeSet<&str> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(id, _)| *id)
            .collect();
        let mut order = Vec::new();
        while let Some(next) = ready.pop_first() {
            order.push(next.to_string());
            for (s, t) in &edges {
                if *s == next {
                    let d = indegree.get_mut(t).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        ready.insert(t);
                    }
                }
            }
        }
        (order.len() == ids.len()).then_some(order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::use_case_graph;

    fn names(v: &[(&RelationDef, &EntityConcept)]) -> Vec<String> {
        v.iter().map(|(_, c)| c.id.clone()).collect()
    }

    #[test]
    fn zone_neighbors_in_use_case_graph() {
        let g = use_case_graph();
        assert_eq!(names(&g.neighbors("Zone", GraphDirection::Up).unwrap()), ["Area"]);
        assert_eq!(names(&g.neighbors("Zone", GraphDirection::Down).unwrap()), ["Cluster"]);
        let right = names(&g.neighbors("Zone", GraphDirection::Right).unwrap());
        assert!(right.contains(&"Customer".to_string()));
    }

    #[test]
    fn isolated_concept_has_no_neighbors() {
        let mut g = use_case_graph();
        g.concepts.push(EntityConcept {
            id: "Lonely".into(),
            name: "Lonely".into(),
            attributes: vec![],
            filters: vec![],
            instance_query: "instances Lonely".into(),
        });
        for d in [GraphDirection::Up, GraphDirection::Down, GraphDirection::Right] {
            assert!(g.neighbors("Lonely", d).unwrap().is_empty());
        }
    }

    #[test]
    fn unknown_concept_is_not_found() {
        let g = use_case_graph();
        assert!(matches!(
            g.neighbors("Nope", GraphDirection::Up),
            Err(Error::NotFound(_))
        ));
    }

    #[test]
    fn direction_lists_partition_incident_relations() {
        let g = use_case_graph();
        for c in &g.concepts {
            let mut seen = BTreeSet::new();
            let mut total = 0;
            for d in [GraphDirection::Up, GraphDirection::Down, GraphDirection::Right] {
                for (r, _) in g.neighbors(&c.id, d).unwrap() {
                    total += 1;
                    seen.insert(r.id.clone());
                }
            }
            let incident: BTreeSet<String> = g
                .relations
                .iter()
                .filter(|r| r.source == c.id || r.target == c.id)
                .map(|r| r.id.clone())
                .collect();
            assert_eq!(total, seen.len(), "lists overlap for {}", c.id);
            assert_eq!(seen, incident);
        }
    }

    #[test]
    fn implicit_filters_come_from_string_attributes() {
        let g = use_case_graph();
        let alloc = g.concept("Allocation").unwrap();
        assert!(alloc.filters.is_empty());
        assert_eq!(alloc.effective_filter_ids(), vec!["Status".to_string()]);
    }

    #[test]
    fn hierarchy_order_exists_for_use_case() {
        let order = use_case_graph().hierarchy_order().unwrap();
        let pos = |id: &str| order.iter().position(|c| c == id).unwrap();
        assert!(pos("Area") < pos("Zone"));
        assert!(pos("Zone") < pos("Cluster"));
    }
}
