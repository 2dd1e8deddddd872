//! HTTP session service for the multi-round recommendation loop.
//!
//! | method | path | body | returns |
//! |---|---|---|---|
//! | POST | `/sessions` | `{requirements, tags[]}` | round view |
//! | POST | `/sessions/{id}/select` | `{service_id}` | round view |
//! | POST | `/sessions/{id}/undo` | | round view |
//! | GET | `/sessions/{id}` | | full session with history |
//! | GET | `/services` | | catalog |
//! | GET | `/model` | | `{variant, strategy, checkpoint_hash, top_n}` |
//!
//! A round view is `{session_id, round, recommendations: [{service_id, name,
//! score}], attention: [{selected_id, weight}]}`, where `attention` holds the
//! weights of the top recommendation over the selected services.

mod api;
mod engine;
mod error;
mod session;

pub use api::{router, CreateRequest, SelectRequest};
pub use engine::{Engine, Ranking};
pub use error::ApiError;
pub use session::{AttentionItem, CatalogEntry, Event, HistoryEntry, LogRecord, ModelInfo, RecItem, RoundView, Session, SessionStore};
