//! Content features: a convolutional sequence encoder for descriptions and an
//! averaged embedding for tag sets, concatenated into one vector per entity.

mod content;
mod inception;
mod vocab;

pub use content::{ContentCache, ContentExtractor, ContentFeature, EntityText};
pub use inception::{InceptionCache, InceptionConfig, TextInception};
pub use vocab::{encode_sequence, EncodedText, Vocab, OOV_ID, PAD_ID};
