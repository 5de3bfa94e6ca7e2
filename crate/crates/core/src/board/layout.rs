//! Deterministic layered placement of entity cards.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::session::InvestigationSession;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutConfig {
    pub card_width: f64,
    pub header_height: f64,
    /// Height added per attribute row.
    pub row_height: f64,
    pub layer_gap: f64,
    pub node_gap: f64,
    /// Horizontal space between unconnected groups.
    pub group_gutter: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            card_width: 320.0,
            header_height: 40.0,
            row_height: 120.0,
            layer_gap: 80.0,
            node_gap: 40.0,
            group_gutter: 120.0,
        }
    }
}

/// Axis-aligned card rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CardBox {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl CardBox {
    pub fn overlaps(&self, other: &CardBox) -> bool {
        self.x < other.x + other.width
            && other.x < self.x + self.width
            && self.y < other.y + other.height
            && other.y < self.y + self.height
    }
}

impl LayoutConfig {
    pub fn card_height(&self, attributes: usize) -> f64 {
        self.header_height + self.row_height * attributes as f64
    }
}

/// Card rectangles at their current positions, keyed by card id.
pub fn card_boxes(session: &InvestigationSession) -> BTreeMap<String, CardBox> {
    let cfg = &session.meta.layout;
    session
        .cards
        .iter()
        .map(|c| {
            (
                c.id.clone(),
                CardBox {
                    x: c.position.x,
                    y: c.position.y,
                    width: cfg.card_width,
                    height: cfg.card_height(c.attributes.len()),
                },
            )
        })
        .collect()
}

/// Positions for every card. Cards joined by up/down links form groups laid
/// out top-down by longest path from their roots; groups sit side by side
/// in order of their earliest card.
pub fn layout_board(session: &InvestigationSession, config: &LayoutConfig) -> BTreeMap<String, Position> {
    let n = session.cards.len();
    let index: BTreeMap<&str, usize> = session.cards.iter().enumerate().map(|(i, c)| (c.id.as_str(), i)).collect();
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for l in &session.links {
        if let Some((p, c)) = l.hierarchy() {
            if let (Some(&p), Some(&c)) = (index.get(p), index.get(c)) {
                edges.insert((p, c));
            }
        }
    }
    let mut parents = vec![Vec::new(); n];
    let mut children = vec![Vec::new(); n];
    for &(p, c) in &edges {
        parents[c].push(p);
        children[p].push(c);
    }

    // union-find over hierarchy edges
    let mut root: Vec<usize> = (0..n).collect();
    fn find(root: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while root[r] != r {
            r = root[r];
        }
        let mut j = i;
        while root[j] != r {
            let next = root[j];
            root[j] = r;
            j = next;
        }
        r
    }
    for &(p, c) in &edges {
        let (a, b) = (find(&mut root, p), find(&mut root, c));
        if a != b {
            root[a.max(b)] = a.min(b);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut root, i);
        groups.entry(r).or_default().push(i);
    }

    // longest path from a root, in topological order
    let mut layer = vec![0usize; n];
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    while let Some(i) = ready.pop() {
        for &c in &children[i] {
            layer[c] = layer[c].max(layer[i] + 1);
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(c);
            }
        }
    }

    let mut out = BTreeMap::new();
    let mut offset = 0.0;
    let pitch = config.card_width + config.node_gap;
    for members in groups.values() {
        let depth = members.iter().map(|&i| layer[i]).max().unwrap_or(0);
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); depth + 1];
        for &i in members {
            rows[layer[i]].push(i);
        }
        let mut slot = vec![0.0f64; n];
        for row in rows.iter_mut() {
            let key = |i: usize| -> f64 {
                if parents[i].is_empty() {
                    f64::INFINITY
                } else {
                    parents[i].iter().map(|&p| slot[p]).sum::<f64>() / parents[i].len() as f64
                }
            };
            row.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
            for (k, &i) in row.iter().enumerate() {
                slot[i] = k as f64;
            }
        }
        let mut y = 0.0;
        let mut width: f64 = 0.0;
        for row in &rows {
            let mut tallest: f64 = 0.0;
            for (k, &i) in row.iter().enumerate() {
                out.insert(
                    session.cards[i].id.clone(),
                    Position {
                        x: offset + k as f64 * pitch,
                        y,
                    },
                );
                tallest = tallest.max(config.card_height(session.cards[i].attributes.len()));
            }
            width = width.max(row.len() as f64 * pitch - config.node_gap);
            y += tallest + config.layer_gap;
        }
        offset += width + config.group_gutter;
    }
    out
}
