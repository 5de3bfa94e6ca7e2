use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Hierarchy, KnowledgeGraph, Template};

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    /// Id (or id path) of the offending element.
    pub element: String,
    /// Stable rule identifier, e.g. `dangling-relation`.
    pub rule: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has_rule(&self, rule: &str) -> bool {
        self.findings.iter().any(|f| f.rule == rule)
    }

    fn push(&mut self, element: impl Into<String>, rule: &str, message: impl Into<String>) {
        self.findings.push(Finding {
            element: element.into(),
            rule: rule.to_string(),
            message: message.into(),
        });
    }
}

fn duplicates<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = BTreeSet::new();
    let mut dup = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            dup.insert(id);
        }
    }
    dup.into_iter().collect()
}

/// Checks every graph invariant and reports findings instead of failing.
pub fn validate_graph(graph: &KnowledgeGraph) -> ValidationReport {
    let mut report = ValidationReport::default();

    for id in duplicates(graph.concepts.iter().map(|c| c.id.as_str())) {
        report.push(id, "duplicate-concept-id", format!("concept id `{id}` declared twice"));
    }
    for id in duplicates(graph.relations.iter().map(|r| r.id.as_str())) {
        report.push(id, "duplicate-relation-id", format!("relation id `{id}` declared twice"));
    }

    for c in &graph.concepts {
        for id in duplicates(c.attributes.iter().map(|a| a.id.as_str())) {
            report.push(
                format!("{}.{id}", c.id),
                "duplicate-attribute-id",
                "attribute id declared twice",
            );
        }
        for id in duplicates(c.filters.iter().map(|f| f.id.as_str())) {
            report.push(format!("{}.{id}", c.id), "duplicate-filter-id", "filter id declared twice");
        }
        for f in &c.filters {
            let element = format!("{}.{}", c.id, f.id);
            if f.options.is_empty() {
                report.push(&element, "empty-filter-options", "filter declares no options");
            }
            if !duplicates(f.options.iter().map(String::as_str)).is_empty() {
                report.push(&element, "duplicate-filter-option", "option labels must be unique");
            }
        }
        if let Err(e) = Template::parse(&c.instance_query) {
            report.push(&c.id, "invalid-template", e.to_string());
        }
        for a in &c.attributes {
            if let Err(e) = Template::parse(&a.query_template) {
                report.push(format!("{}.{}", c.id, a.id), "invalid-template", e.to_string());
            }
        }
        if c.attributes.iter().filter(|a| a.primary_kpi).count() > 1 {
            report.push(&c.id, "multiple-primary-kpi", "at most one attribute may be the primary KPI");
        }
    }

    for r in &graph.relations {
        for (end, id) in [("source", &r.source), ("target", &r.target)] {
            if graph.concept(id).is_none() {
                report.push(
                    &r.id,
                    "dangling-relation",
                    format!("{end} `{id}` is not a declared concept"),
                );
            }
        }
        if r.semantic.trim().is_empty() {
            report.push(&r.id, "empty-semantic", "relation semantic label is empty");
        }
        if let Err(e) = Template::parse(&r.traversal_query) {
            report.push(&r.id, "invalid-template", e.to_string());
        }
        if r.hierarchy == Hierarchy::Contains && r.source == r.target {
            report.push(&r.id, "hierarchy-cycle", "a concept cannot contain itself");
        }
    }

    if !report.has_rule("hierarchy-cycle") && graph.hierarchy_order().is_none() {
        let cyclic: Vec<&str> = graph
            .relations
            .iter()
            .filter(|r| r.hierarchy == Hierarchy::Contains)
            .map(|r| r.id.as_str())
            .collect();
        report.push(
            cyclic.join(","),
            "hierarchy-cycle",
            "the `contains` relations form a cycle",
        );
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{AttributeDef, DataKind, EntityConcept, RelationDef};
    use crate::scenario::use_case_graph;

    fn concept(id: &str) -> EntityConcept {
        EntityConcept {
            id: id.into(),
            name: id.into(),
            attributes: vec![AttributeDef {
                id: "A".into(),
                name: "A".into(),
                kind: DataKind::Number,
                query_template: "series x/{instance}".into(),
                primary_kpi: false,
            }],
            filters: vec![],
            instance_query: format!("instances {id}"),
        }
    }

    fn contains(id: &str, s: &str, t: &str) -> RelationDef {
        RelationDef {
            id: id.into(),
            source: s.into(),
            target: t.into(),
            semantic: "contains".into(),
            hierarchy: Hierarchy::Contains,
            traversal_query: format!("links {id}"),
        }
    }

    #[test]
    fn empty_graph_is_valid() {
        assert!(validate_graph(&KnowledgeGraph::default()).is_valid());
    }

    #[test]
    fn use_case_graph_is_valid() {
        let r = validate_graph(&use_case_graph());
        assert!(r.is_valid(), "{:?}", r.findings);
    }

    #[test]
    fn dangling_target_is_reported() {
        let g = KnowledgeGraph {
            concepts: vec![concept("Area")],
            relations: vec![contains("r1", "Area", "Ghost")],
        };
        let r = validate_graph(&g);
        assert!(r.has_rule("dangling-relation"));
        assert_eq!(r.findings[0].element, "r1");
    }

    #[test]
    fn contains_cycle_is_reported() {
        let g = KnowledgeGraph {
            concepts: vec![concept("Area"), concept("Zone")],
            relations: vec![contains("r1", "Area", "Zone"), contains("r2", "Zone", "Area")],
        };
        assert!(validate_graph(&g).has_rule("hierarchy-cycle"));
    }

    #[test]
    fn lateral_cycles_are_allowed() {
        let mut g = KnowledgeGraph {
            concepts: vec![concept("Area"), concept("Zone")],
            relations: vec![contains("r1", "Area", "Zone"), contains("r2", "Zone", "Area")],
        };
        g.relations[1].hierarchy = Hierarchy::Lateral;
        assert!(validate_graph(&g).is_valid());
    }

    #[test]
    fn empty_semantic_and_bad_filter_are_reported() {
        let mut g = KnowledgeGraph {
            concepts: vec![concept("Area"), concept("Zone")],
            relations: vec![contains("r1", "Area", "Zone")],
        };
        g.relations[0].semantic = "  ".into();
        g.concepts[0].filters.push(crate::graph::FilterDef {
            id: "F".into(),
            name: "F".into(),
            options: vec!["a".into(), "a".into()],
        });
        let r = validate_graph(&g);
        assert!(r.has_rule("empty-semantic"));
        assert!(r.has_rule("duplicate-filter-option"));
    }

    #[test]
    fn duplicate_ids_are_reported() {
        let g = KnowledgeGraph {
            concepts: vec![concept("Area"), concept("Area")],
            relations: vec![],
        };
        assert!(validate_graph(&g).has_rule("duplicate-concept-id"));
    }
}
