//! Event-sourced investigation sessions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::layout::{layout_board, LayoutConfig, Position};
use super::notes::render_collection_note;
use crate::clue::{Clue, SeriesKey, TimeRange};
use crate::error::{Error, Result};
use crate::expand::{Direction, PathHop};
use crate::graph::{graph_version, DataKind, KnowledgeGraph};
use crate::store::TelemetryStore;

/// What events are checked against.
#[derive(Clone, Copy)]
pub struct BoardEnv<'a> {
    pub graph: &'a KnowledgeGraph,
    pub store: &'a TelemetryStore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CardState {
    Clue,
    Evidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartKind {
    Line,
    Gantt,
}

impl ChartKind {
    pub fn of(kind: DataKind) -> Self {
        match kind {
            DataKind::Number | DataKind::Bag => ChartKind::Line,
            DataKind::String | DataKind::Set => ChartKind::Gantt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeCard {
    pub id: String,
    pub clue: Clue,
    pub state: CardState,
    pub chart: ChartKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityCard {
    pub id: String,
    pub concept: String,
    pub instance: String,
    pub attributes: Vec<AttributeCard>,
    pub position: Position,
}

impl EntityCard {
    pub fn title(&self) -> String {
        format!("{}: {}", self.concept, self.instance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkDirection {
    /// The target card is the source card's parent.
    Up,
    /// The target card is the source card's child.
    Down,
    Lateral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReasoningLink {
    pub id: String,
    pub source: String,
    pub target: String,
    pub path: Vec<PathHop>,
    pub direction: LinkDirection,
    pub note: String,
}

impl ReasoningLink {
    /// (parent, child) card ids for hierarchy links.
    pub fn hierarchy(&self) -> Option<(&str, &str)> {
        match self.direction {
            LinkDirection::Up => Some((&self.target, &self.source)),
            LinkDirection::Down => Some((&self.source, &self.target)),
            LinkDirection::Lateral => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Shape {
    Circle { cx: f64, cy: f64, r: f64 },
    Rectangle { x: f64, y: f64, width: f64, height: f64 },
    Arrow { x1: f64, y1: f64, x2: f64, y2: f64 },
    Text { x: f64, y: f64, text: String },
}

impl Shape {
    fn check(&self) -> Result<()> {
        let nums: Vec<f64> = match self {
            Shape::Circle { cx, cy, r } => vec![*cx, *cy, *r],
            Shape::Rectangle { x, y, width, height } => vec![*x, *y, *width, *height],
            Shape::Arrow { x1, y1, x2, y2 } => vec![*x1, *y1, *x2, *y2],
            Shape::Text { x, y, .. } => vec![*x, *y],
        };
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("annotation geometry must be finite"));
        }
        match self {
            Shape::Circle { r, .. } if *r <= 0.0 => Err(Error::invalid("circle radius must be positive")),
            Shape::Rectangle { width, height, .. } if *width <= 0.0 || *height <= 0.0 => {
                Err(Error::invalid("rectangle sides must be positive"))
            }
            Shape::Text { text, .. } if text.trim().is_empty() => Err(Error::invalid("text annotation needs text")),
            _ => Ok(()),
        }
    }

    pub fn text(&self) -> Option<&str> {
        match self {
            Shape::Text { text, .. } => Some(text),
            _ => None,
        }
    }
}

/// Annotation meaning; each role has one palette colour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Hypothesis,
    Conclusion,
    Mitigation,
    Highlight,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Hypothesis, Role::Conclusion, Role::Mitigation, Role::Highlight];

    pub fn color(self) -> &'static str {
        match self {
            Role::Hypothesis => "#f28e2b",
            Role::Conclusion => "#59a14f",
            Role::Mitigation => "#4e79a7",
            Role::Highlight => "#e15759",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    pub id: String,
    pub shape: Shape,
    pub role: Role,
    pub color: String,
    /// Card the annotation refers to, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
}

/// How a clue reached the board.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Via {
    pub direction: Direction,
    pub from_card: String,
    pub path: Vec<PathHop>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoardEvent {
    Create {
        anomaly: Clue,
        window: TimeRange,
    },
    AddClue {
        clue: Clue,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        via: Option<Via>,
    },
    ValidateClue {
        attribute: String,
    },
    RemoveClue {
        attribute: String,
    },
    AddLink {
        source: String,
        target: String,
        direction: LinkDirection,
        path: Vec<PathHop>,
    },
    AddAnnotation {
        shape: Shape,
        role: Role,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        anchor: Option<String>,
    },
    RemoveAnnotation {
        annotation: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub card: u32,
    pub attribute: u32,
    pub link: u32,
    pub annotation: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionMeta {
    pub id: String,
    pub graph_version: String,
    pub window: TimeRange,
    pub layout: LayoutConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvestigationSession {
    pub meta: SessionMeta,
    pub cards: Vec<EntityCard>,
    pub links: Vec<ReasoningLink>,
    pub annotations: Vec<Annotation>,
    pub history: Vec<BoardEvent>,
    #[serde(skip)]
    counters: Counters,
}

fn next_id(prefix: &str, counter: &mut u32) -> String {
    *counter += 1;
    format!("{prefix}-{:04}", *counter)
}

fn hop_fits(graph: &KnowledgeGraph, hop: &PathHop) -> Result<()> {
    let rel = graph
        .relation(&hop.relation)
        .ok_or_else(|| Error::not_found(format!("relation `{}`", hop.relation)))?;
    let (src, tgt) = if hop.forward { (&hop.from, &hop.to) } else { (&hop.to, &hop.from) };
    if rel.source != src.concept || rel.target != tgt.concept {
        return Err(Error::invalid(format!(
            "hop over `{}` does not connect {} to {}",
            rel.id, hop.from, hop.to
        )));
    }
    Ok(())
}

impl InvestigationSession {
    /// A session holding the anomaly clue as its first, validated card.
    pub fn create(id: &str, env: BoardEnv<'_>, anomaly: Clue, window: TimeRange, layout: LayoutConfig) -> Result<Self> {
        let mut s = Self {
            meta: SessionMeta {
                id: id.to_string(),
                graph_version: graph_version(env.graph),
                window,
                layout,
            },
            cards: Vec::new(),
            links: Vec::new(),
            annotations: Vec::new(),
            history: Vec::new(),
            counters: Counters::default(),
        };
        s.apply(env, BoardEvent::Create { anomaly, window })?;
        Ok(s)
    }

    /// Rebuilds a session by folding `history` from an empty board.
    pub fn replay(meta: SessionMeta, env: BoardEnv<'_>, history: &[BoardEvent]) -> Result<Self> {
        let mut s = Self {
            meta,
            cards: Vec::new(),
            links: Vec::new(),
            annotations: Vec::new(),
            history: Vec::new(),
            counters: Counters::default(),
        };
        for (i, event) in history.iter().enumerate() {
            let changed = s
                .apply(env, event.clone())
                .map_err(|e| Error::schema(format!("history[{i}]"), e.to_string()))?;
            if !changed {
                return Err(Error::schema(format!("history[{i}]"), "event has no effect"));
            }
        }
        Ok(s)
    }

    pub fn id(&self) -> &str {
        &self.meta.id
    }

    pub fn card(&self, id: &str) -> Option<&EntityCard> {
        self.cards.iter().find(|c| c.id == id)
    }

    pub fn card_of(&self, concept: &str, instance: &str) -> Option<&EntityCard> {
        self.cards.iter().find(|c| c.concept == concept && c.instance == instance)
    }

    pub fn attribute(&self, id: &str) -> Option<(&EntityCard, &AttributeCard)> {
        self.cards
            .iter()
            .find_map(|c| c.attributes.iter().find(|a| a.id == id).map(|a| (c, a)))
    }

    /// Keys already on the board, for excluding them from expansions.
    pub fn board_keys(&self) -> BTreeSet<SeriesKey> {
        self.cards
            .iter()
            .flat_map(|c| c.attributes.iter().map(|a| a.clue.key.clone()))
            .collect()
    }

    pub fn anomaly(&self) -> Option<&Clue> {
        match self.history.first() {
            Some(BoardEvent::Create { anomaly, .. }) => Some(anomaly),
            _ => None,
        }
    }

    /// Applies one event; returns `false` (and records nothing) when the
    /// event changes nothing.
    pub fn apply(&mut self, env: BoardEnv<'_>, event: BoardEvent) -> Result<bool> {
        let mut next = self.clone();
        let changed = next.apply_inner(env, &event)?;
        if changed {
            next.history.push(event);
            next.relayout();
            *self = next;
        }
        Ok(changed)
    }

    fn relayout(&mut self) {
        let positions = layout_board(self, &self.meta.layout);
        for card in &mut self.cards {
            if let Some(p) = positions.get(&card.id) {
                card.position = *p;
            }
        }
    }

    fn check_clue(&self, env: BoardEnv<'_>, clue: &Clue) -> Result<DataKind> {
        let resolved = env.store.resolve(env.graph, &clue.key)?;
        if clue.window.is_empty() || !self.meta.window.contains_range(&clue.window) {
            return Err(Error::invalid(format!(
                "clue window {} lies outside the session window {}",
                clue.window, self.meta.window
            )));
        }
        if clue.key.filter.is_some() {
            if !resolved.filterable {
                return Err(Error::invalid(format!("attribute `{}` cannot be filtered", clue.key.attribute)));
            }
            env.store.query_clue(env.graph, &clue.key, &clue.window)?;
        }
        Ok(resolved.attribute.kind)
    }

    fn add_attribute(&mut self, env: BoardEnv<'_>, clue: &Clue, state: CardState) -> Result<(String, bool)> {
        let kind = self.check_clue(env, clue)?;
        if self.board_keys().contains(&clue.key) {
            return Err(Error::AlreadyExists(format!("clue {} is already on the board", clue.key)));
        }
        let attr = AttributeCard {
            id: next_id("attr", &mut self.counters.attribute),
            clue: clue.clone(),
            state,
            chart: ChartKind::of(kind),
        };
        let (concept, instance) = clue.key.entity();
        if let Some(card) = self.cards.iter_mut().find(|c| c.concept == concept && c.instance == instance) {
            card.attributes.push(attr);
            return Ok((card.id.clone(), false));
        }
        let id = next_id("card", &mut self.counters.card);
        self.cards.push(EntityCard {
            id: id.clone(),
            concept: concept.to_string(),
            instance: instance.to_string(),
            attributes: vec![attr],
            position: Position::default(),
        });
        Ok((id, true))
    }

    /// Whether adding parent→child makes the hierarchy cyclic.
    fn creates_cycle(&self, parent: &str, child: &str) -> bool {
        if parent == child {
            return true;
        }
        let mut children: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for l in &self.links {
            if let Some((p, c)) = l.hierarchy() {
                children.entry(p).or_default().push(c);
            }
        }
        let mut stack = vec![child];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if n == parent {
                return true;
            }
            if seen.insert(n) {
                stack.extend(children.get(n).into_iter().flatten().copied());
            }
        }
        false
    }

    fn push_link(&mut self, env: BoardEnv<'_>, source: &str, target: &str, direction: LinkDirection, path: &[PathHop]) -> Result<()> {
        for end in [source, target] {
            if self.card(end).is_none() {
                return Err(Error::not_found(format!("card `{end}`")));
            }
        }
        if source == target {
            return Err(Error::invalid("a link needs two distinct cards"));
        }
        for hop in path {
            hop_fits(env.graph, hop)?;
        }
        let parent_child = match direction {
            LinkDirection::Up => Some((target, source)),
            LinkDirection::Down => Some((source, target)),
            LinkDirection::Lateral => None,
        };
        if let Some((p, c)) = parent_child {
            if self.creates_cycle(p, c) {
                return Err(Error::Conflict(format!("link {source}→{target} would make the hierarchy cyclic")));
            }
        }
        let note = if path.is_empty() {
            String::new()
        } else {
            render_collection_note(env.graph, path)?
        };
        self.links.push(ReasoningLink {
            id: next_id("link", &mut self.counters.link),
            source: source.to_string(),
            target: target.to_string(),
            path: path.to_vec(),
            direction,
            note,
        });
        Ok(())
    }

    fn apply_inner(&mut self, env: BoardEnv<'_>, event: &BoardEvent) -> Result<bool> {
        match event {
            BoardEvent::Create { anomaly, window } => {
                if !self.history.is_empty() {
                    return Err(Error::Conflict("session already created".into()));
                }
                if window.is_empty() {
                    return Err(Error::invalid("session window is empty"));
                }
                self.meta.window = *window;
                self.add_attribute(env, anomaly, CardState::Evidence)?;
                Ok(true)
            }
            _ if self.history.is_empty() => Err(Error::Conflict("session has not been created".into())),
            BoardEvent::AddClue { clue, via } => {
                if let Some(v) = via {
                    if self.card(&v.from_card).is_none() {
                        return Err(Error::not_found(format!("card `{}`", v.from_card)));
                    }
                }
                let (card, created) = self.add_attribute(env, clue, CardState::Clue)?;
                if let (Some(v), true) = (via, created) {
                    let direction = match v.direction {
                        Direction::Up => Some(LinkDirection::Up),
                        Direction::Down => Some(LinkDirection::Down),
                        Direction::Left | Direction::Right => Some(LinkDirection::Lateral),
                        Direction::In => None,
                    };
                    if let Some(d) = direction {
                        self.push_link(env, &v.from_card, &card, d, &v.path)?;
                    }
                }
                Ok(true)
            }
            BoardEvent::ValidateClue { attribute } => {
                let a = self
                    .cards
                    .iter_mut()
                    .flat_map(|c| c.attributes.iter_mut())
                    .find(|a| a.id == *attribute)
                    .ok_or_else(|| Error::not_found(format!("attribute card `{attribute}`")))?;
                if a.state == CardState::Evidence {
                    return Ok(false);
                }
                a.state = CardState::Evidence;
                Ok(true)
            }
            BoardEvent::RemoveClue { attribute } => {
                let (card_id, _) = self
                    .attribute(attribute)
                    .map(|(c, a)| (c.id.clone(), a.id.clone()))
                    .ok_or_else(|| Error::not_found(format!("attribute card `{attribute}`")))?;
                if self.anomaly().is_some_and(|an| self.attribute(attribute).is_some_and(|(_, a)| a.clue == *an)) {
                    return Err(Error::invalid("the anomaly clue cannot be removed"));
                }
                let card = self.cards.iter_mut().find(|c| c.id == card_id).expect("card exists");
                card.attributes.retain(|a| a.id != *attribute);
                if card.attributes.is_empty() {
                    self.cards.retain(|c| c.id != card_id);
                    self.links.retain(|l| l.source != card_id && l.target != card_id);
                    for a in &mut self.annotations {
                        if a.anchor.as_deref() == Some(card_id.as_str()) {
                            a.anchor = None;
                        }
                    }
                }
                Ok(true)
            }
            BoardEvent::AddLink { source, target, direction, path } => {
                self.push_link(env, source, target, *direction, path)?;
                Ok(true)
            }
            BoardEvent::AddAnnotation { shape, role, anchor } => {
                shape.check()?;
                if let Some(a) = anchor {
                    if self.card(a).is_none() {
                        return Err(Error::not_found(format!("card `{a}`")));
                    }
                }
                self.annotations.push(Annotation {
                    id: next_id("ann", &mut self.counters.annotation),
                    shape: shape.clone(),
                    role: *role,
                    color: role.color().to_string(),
                    anchor: anchor.clone(),
                });
                Ok(true)
            }
            BoardEvent::RemoveAnnotation { annotation } => {
                let before = self.annotations.len();
                self.annotations.retain(|a| a.id != *annotation);
                if self.annotations.len() == before {
                    return Err(Error::not_found(format!("annotation `{annotation}`")));
                }
                Ok(true)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expand::EntityRef;
    use crate::scenario::{generate_store, use_case_graph, ScenarioSpec};

    pub(crate) fn fixture() -> (KnowledgeGraph, TelemetryStore) {
        (use_case_graph(), generate_store(1, &ScenarioSpec::default()).unwrap())
    }

    fn start(env: BoardEnv<'_>) -> InvestigationSession {
        let w = env.store.window();
        let clue = Clue::new(SeriesKey::new("Zone", "Zone02", "IncidentCount"), w);
        InvestigationSession::create("s1", env, clue, w, LayoutConfig::default()).unwrap()
    }

    fn child_cluster(store: &TelemetryStore, graph: &KnowledgeGraph) -> String {
        let rel = graph.relation("zone_contains_cluster").unwrap();
        store.traverse(rel, "Zone02", true).unwrap()[0].clone()
    }

    #[test]
    fn created_session_has_one_evidence_card() {
        let (g, s) = fixture();
        let env = BoardEnv { graph: &g, store: &s };
        let b = start(env);
        assert_eq!(b.cards.len(), 1);
        assert!(b.links.is_empty() && b.annotations.is_empty());
        assert_eq!(b.cards[0].attributes[0].state, CardState::Evidence);
        assert_eq!(b.cards[0].title(), "Zone: Zone02");
        assert_eq!(b.cards[0].position, Position { x: 0.0, y: 0.0 });
    }

    #[test]
    fn anomaly_outside_window_is_invalid() {
        let (g, s) = fixture();
        let env = BoardEnv { graph: &g, store: &s };
        let w = s.window();
        let inner = TimeRange::new(w.start, w.start + 10 * s.step()).unwrap();
        let clue = Clue::new(SeriesKey::new("Zone", "Zone02", "IncidentCount"), w);
        let err = InvestigationSession::create("s", env, clue, inner, LayoutConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
        let missing = Clue::new(SeriesKey::new("Zone", "Zone77", "IncidentCount"), w);
        assert!(matches!(
            InvestigationSession::create("s", env, missing, w, LayoutConfig::default()),
            Err(Error::NotFound(_))
        ));
    }

    #[test]
    fn down_expansion_adds_card_and_noted_link() {
        let (g, s) = fixture();
        let env = BoardEnv { graph: &g, store: &s };
        let mut b = start(env);
        let cluster = child_cluster(&s, &g);
        let hop = PathHop {
            relation: "zone_contains_cluster".into(),
            from: EntityRef::new("Zone", "Zone02"),
            to: EntityRef::new("Cluster", &cluster),
            forward: true,
        };
        let clue = Clue::new(SeriesKey::new("Cluster", &cluster, "BuildVersion"), s.window());
        let before = b.clone();
        b.apply(env, BoardEvent::AddClue {
            clue,
            via: Some(Via { direction: Direction::Down, from_card: "card-0001".into(), path: vec![hop] }),
        })
        .unwrap();
        assert_eq!(b.cards.len(), 2);
        assert_eq!(b.links[0].direction, LinkDirection::Down);
        assert_eq!(b.links[0].note, format!("Zone Zone02 contains Cluster {cluster}"));
        assert_eq!(b.cards[1].attributes[0].chart, ChartKind::Gantt);
        assert!(b.cards[0].position.y < b.cards[1].position.y);

        b.apply(env, BoardEvent::RemoveClue { attribute: "attr-0002".into() }).unwrap();
        assert_eq!(b.cards, before.cards);
        assert_eq!(b.links, before.links);
    }

    #[test]
    fn validate_is_idempotent() {
        let (g, s) = fixture();
        let env = BoardEnv { graph: &g, store: &s };
        let mut b = start(env);
        let clue = Clue::new(SeriesKey::new("Zone", "Zone02", "Utilization"), s.window());
        b.apply(env, BoardEvent::AddClue { clue, via: None }).unwrap();
        let ev = BoardEvent::ValidateClue { attribute: "attr-0002".into() };
        assert!(b.apply(env, ev.clone()).unwrap());
        let len = b.history.len();
        assert!(!b.apply(env, ev).unwrap());
        assert_eq!(b.history.len(), len);
    }

    #[test]
    fn duplicates_and_dangling_references_fail() {
        let (g, s) = fixture();
        let env = BoardEnv { graph: &g, store: &s };
        let mut b = start(env);
        let dup = Clue::new(SeriesKey::new("Zone", "Zone02", "IncidentCount"), s.window());
        assert!(matches!(b.apply(env, BoardEvent::AddClue { clue: dup, via: None }), Err(Error::AlreadyExists(_))));
        assert!(matches!(
            b.apply(env, BoardEvent::ValidateClue { attribute: "attr-0099".into() }),
            Err(Error::NotFound(_))
        ));
        assert!(matches!(
            b.apply(env, BoardEvent::RemoveAnnotation { annotation: "ann-0001".into() }),
            Err(Error::NotFound(_))
        ));
        assert_eq!(b.history.len(), 1);
    }

    #[test]
    fn hierarchy_cycles_are_rejected() {
        let (g, s) = fixture();
        let env = BoardEnv { graph: &g, store: &s };
        let mut b = start(env);
        let cluster = child_cluster(&s, &g);
        let clue = Clue::new(SeriesKey::new("Cluster", &cluster, "Utilization"), s.window());
        b.apply(env, BoardEvent::AddClue { clue, via: None }).unwrap();
        let link = |source: &str, target: &str| BoardEvent::AddLink {
            source: source.into(),
            target: target.into(),
            direction: LinkDirection::Down,
            path: vec![],
        };
        b.apply(env, link("card-0001", "card-0002")).unwrap();
        assert!(matches!(b.apply(env, link("card-0002", "card-0001")), Err(Error::Conflict(_))));
    }

    #[test]
    fn replay_reproduces_state() {
        let (g, s) = fixture();
        let env = BoardEnv { graph: &g, store: &s };
        let mut b = start(env);
        let clue = Clue::new(SeriesKey::new("Zone", "Zone02", "Utilization"), s.window());
        b.apply(env, BoardEvent::AddClue { clue, via: None }).unwrap();
        b.apply(env, BoardEvent::AddAnnotation {
            shape: Shape::Text { x: 1.0, y: 2.0, text: "leak?".into() },
            role: Role::Hypothesis,
            anchor: Some("card-0001".into()),
        })
        .unwrap();
        let r = InvestigationSession::replay(b.meta.clone(), env, &b.history).unwrap();
        assert_eq!(r, b);
    }

    #[test]
    fn non_finite_geometry_is_rejected() {
        let (g, s) = fixture();
        let env = BoardEnv { graph: &g, store: &s };
        let mut b = start(env);
        let ev = BoardEvent::AddAnnotation {
            shape: Shape::Circle { cx: f64::NAN, cy: 0.0, r: 1.0 },
            role: Role::Highlight,
            anchor: None,
        };
        assert!(matches!(b.apply(env, ev), Err(Error::InvalidArgument(_))));
    }
}
