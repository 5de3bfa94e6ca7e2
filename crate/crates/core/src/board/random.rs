//! Seeded random sessions built from legal moves, for property tests.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layout::LayoutConfig;
use super::session::{BoardEnv, BoardEvent, InvestigationSession, LinkDirection, Role, Shape, Via};
use crate::clue::{Clue, SeriesKey};
use crate::error::Result;
use crate::expand::{Direction, EntityRef, PathHop};
use crate::graph::Hierarchy;
use crate::world::pick_key;

/// Applies `steps` random moves starting from a seeded anomaly, keeping the
/// board at or below `max_cards`. Rejected moves are skipped.
pub fn random_session(seed: u64, env: BoardEnv<'_>, max_cards: usize, steps: usize) -> Result<InvestigationSession> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let window = env.store.window();
    let anomaly = Clue::new(pick_key(seed, env.graph, env.store), window);
    let mut s = InvestigationSession::create(&format!("random-{seed}"), env, anomaly, window, LayoutConfig::default())?;
    for _ in 0..steps {
        if let Some(event) = random_move(&mut rng, env, &s, max_cards) {
            let _ = s.apply(env, event);
        }
    }
    Ok(s)
}

fn random_move(rng: &mut ChaCha8Rng, env: BoardEnv<'_>, s: &InvestigationSession, max_cards: usize) -> Option<BoardEvent> {
    let window = env.store.window();
    let card = s.cards.choose(rng)?;
    let attrs: Vec<&str> = s.cards.iter().flat_map(|c| c.attributes.iter().map(|a| a.id.as_str())).collect();
    match rng.random_range(0..10) {
        0..=3 if s.cards.len() < max_cards => {
            let rels: Vec<_> = env
                .graph
                .relations
                .iter()
                .filter(|r| r.source == card.concept || r.target == card.concept)
                .collect();
            let rel = *rels.choose(rng)?;
            let forward = if rel.source == card.concept && rel.target == card.concept {
                rng.random_bool(0.5)
            } else {
                rel.source == card.concept
            };
            let next = env.store.traverse(rel, &card.instance, forward).ok()?;
            let instance = next.choose(rng)?;
            let concept = if forward { &rel.target } else { &rel.source };
            let attribute = env.graph.concept(concept)?.attributes.choose(rng)?;
            let direction = match (rel.hierarchy, forward) {
                (Hierarchy::Contains, true) => Direction::Down,
                (Hierarchy::Contains, false) => Direction::Up,
                (Hierarchy::Lateral, _) => Direction::Right,
            };
            let hop = PathHop {
                relation: rel.id.clone(),
                from: EntityRef::new(&card.concept, &card.instance),
                to: EntityRef::new(concept, instance),
                forward,
            };
            Some(BoardEvent::AddClue {
                clue: Clue::new(SeriesKey::new(concept, instance, &attribute.id), window),
                via: Some(Via { direction, from_card: card.id.clone(), path: vec![hop] }),
            })
        }
        4 => {
            let attribute = env.graph.concept(&card.concept)?.attributes.choose(rng)?;
            Some(BoardEvent::AddClue {
                clue: Clue::new(SeriesKey::new(&card.concept, &card.instance, &attribute.id), window),
                via: None,
            })
        }
        5 => Some(BoardEvent::ValidateClue { attribute: attrs.choose(rng)?.to_string() }),
        6 => Some(BoardEvent::RemoveClue { attribute: attrs.choose(rng)?.to_string() }),
        7 => {
            let other = s.cards.choose(rng)?;
            let direction = *[LinkDirection::Up, LinkDirection::Down, LinkDirection::Lateral].choose(rng)?;
            Some(BoardEvent::AddLink {
                source: card.id.clone(),
                target: other.id.clone(),
                direction,
                path: Vec::new(),
            })
        }
        8 => {
            let role = *Role::ALL.choose(rng)?;
            let x = rng.random_range(0.0..2000.0);
            let y = rng.random_range(0.0..2000.0);
            let shape = match rng.random_range(0..4) {
                0 => Shape::Circle { cx: x, cy: y, r: 30.0 },
                1 => Shape::Rectangle { x, y, width: 200.0, height: 90.0 },
                2 => Shape::Arrow { x1: x, y1: y, x2: x + 100.0, y2: y + 40.0 },
                _ => Shape::Text { x, y, text: format!("note {}", s.annotations.len() + 1) },
            };
            let anchor = rng.random_bool(0.5).then(|| card.id.clone());
            Some(BoardEvent::AddAnnotation { shape, role, anchor })
        }
        _ => {
            let a = s.annotations.choose(rng)?;
            Some(BoardEvent::RemoveAnnotation { annotation: a.id.clone() })
        }
    }
}
