//! The forecasting network: calendar and spatial embeddings, feature
//! attention graphs, three recurrent encoders and the fusion head.

mod batch;
mod checkpoint;
mod config;
mod network;
mod params;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION,
};
pub use config::{FeatureSpec, ModelConfig};
pub use network::{
    batch_loss, embed_input, encode_sequence, forward, l1_loss, linear, mfgcgru_step, predict,
    sentinel_attention, spatio_temporal_embedding, two_layer, weighted_fusion, Attention, Batch,
    ForwardOutput, GraphContext, GraphInput,
};
pub use params::{gru_prefix, init_parameters};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeUnit {
    Closeness,
    Period,
    Trend,
}

impl TimeUnit {
    pub const ALL: [TimeUnit; 3] = [TimeUnit::Closeness, TimeUnit::Period, TimeUnit::Trend];

    pub fn tag(self) -> &'static str {
        match self {
            TimeUnit::Closeness => "c",
            TimeUnit::Period => "p",
            TimeUnit::Trend => "q",
        }
    }
}
