//! Residual speaker classifier, training and embedding extraction.

pub mod block;
pub mod checkpoint;
pub mod embed;
pub mod network;
pub mod train;

pub use block::ResidualBlock;
pub use checkpoint::{load_checkpoint, save_checkpoint, Manifest};
pub use embed::{extract_embedding, extract_embeddings, input_tensor, length_normalize, Embedding};
pub use network::{Network, NetworkConfig, ParameterCounts, RowCount};
pub use train::{train, EpochLog, TrainConfig, TrainingLog};
