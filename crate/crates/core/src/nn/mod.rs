//! A minimal convolutional network: conv, 2×2 max-pool, ReLU, dropout,
//! flatten, dense and a two-class softmax head, trained with cross-entropy
//! and plain SGD.

mod codec;
mod layers;
mod network;
mod tensor;
mod train;

pub use codec::{
    decode_network, encode_network, load_network, save_network, CSNN_MAGIC, CSNN_VERSION,
};
pub use layers::{conv2d, maxpool2x2, softmax, Padding};
pub use network::{Gradients, LayerSpec, Mode, Network};
pub use tensor::Tensor;
pub use train::{train, TrainConfig};
