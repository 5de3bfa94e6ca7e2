//! Investigation sessions: cards, reasoning links, annotations, layout and
//! documents.

pub mod document;
pub mod layout;
pub mod notes;
pub mod random;
pub mod session;
pub mod summary;

pub use document::{export_session, import_session, SessionDocument};
pub use layout::{card_boxes, layout_board, CardBox, LayoutConfig, Position};
pub use notes::{render_collection_note, render_filter_note};
pub use random::random_session;
pub use session::{
    Annotation, AttributeCard, BoardEnv, BoardEvent, CardState, ChartKind, EntityCard, InvestigationSession,
    LinkDirection, ReasoningLink, Role, SessionMeta, Shape, Via,
};
pub use summary::render_summary;
