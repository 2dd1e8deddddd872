//! The interaction architecture and its three variants: content-based
//! (FISR), invocation-based (NISR) and their hybrid (HISR).

pub(crate) mod features;
mod interaction;
mod net;
mod score;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

pub use features::{FeatureContext, PipelineConfig, Target};
pub use interaction::{
    AggCache, Aggregator, InteractionCache, InteractionModule, TripleGrad, ATTENTION_HIDDEN, INTEGRATION_HIDDEN,
    INTERACTION_HIDDEN, MAX_SELECTED,
};
pub use net::{Architecture, EncodeCache, Net, NetGrads, NetInput, TopCache, Triple};
pub use score::{rank_candidates, Recommender, Scored, Scorer};
pub use train::{
    fit, train_hybrid, train_hybrid_recommender, train_recommender, train_role, train_separate, ModelMeta, Role, TrainConfig,
    TrainedModel,
};

/// How the selected services are folded into one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Attention,
    Average,
    /// Up to three slots, zero padded, in selection order.
    Concat,
    /// Selected services are ignored.
    None,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Attention, Strategy::Average, Strategy::Concat, Strategy::None];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Attention => "attention",
            Strategy::Average => "average",
            Strategy::Concat => "concat",
            Strategy::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Fisr,
    Nisr,
    Hisr,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Fisr, Variant::Nisr, Variant::Hisr];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Fisr => "fisr",
            Variant::Nisr => "nisr",
            Variant::Hisr => "hisr",
        }
    }
}

macro_rules! text_enum {
    ($t:ty, $what:literal) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $t {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Error> {
                Self::ALL
                    .into_iter()
                    .find(|v| v.as_str() == s)
                    .ok_or_else(|| Error::invalid(format!(concat!("unknown ", $what, " {:?}"), s)))
            }
        }
    };
}

text_enum!(Strategy, "strategy");
text_enum!(Variant, "variant");
