//! `CSNN` network files: magic, format version, input shape, init seed, the
//! layer table, then every parameter tensor as little-endian `f32`.

use std::fs;
use std::path::Path;

use super::{LayerSpec, Network, Padding, Tensor};
use crate::binio::{put_f32s, Reader};
use crate::{Error, Result};

pub const CSNN_MAGIC: &[u8; 4] = b"CSNN";
pub const CSNN_VERSION: u32 = 1;

const TAG_CONV: u8 = 0;
const TAG_POOL: u8 = 1;
const TAG_RELU: u8 = 2;
const TAG_DROPOUT: u8 = 3;
const TAG_FLATTEN: u8 = 4;
const TAG_DENSE: u8 = 5;
const TAG_SOFTMAX: u8 = 6;

pub fn encode_network(net: &Network) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 4 * net.param_count());
    out.extend_from_slice(CSNN_MAGIC);
    out.extend_from_slice(&CSNN_VERSION.to_le_bytes());
    for d in net.input_shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&net.init_seed().to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        match *layer {
            LayerSpec::Conv2d {
                out_channels,
                kernel_size,
                padding,
            } => {
                out.push(TAG_CONV);
                out.extend_from_slice(&(out_channels as u32).to_le_bytes());
                out.extend_from_slice(&(kernel_size as u32).to_le_bytes());
                out.push(match padding {
                    Padding::Same => 0,
                    Padding::Valid => 1,
                });
            }
            LayerSpec::Maxpool2x2 => out.push(TAG_POOL),
            LayerSpec::Relu => out.push(TAG_RELU),
            LayerSpec::Dropout { rate } => {
                out.push(TAG_DROPOUT);
                out.extend_from_slice(&rate.to_le_bytes());
            }
            LayerSpec::Flatten => out.push(TAG_FLATTEN),
            LayerSpec::Dense { out_features } => {
                out.push(TAG_DENSE);
                out.extend_from_slice(&(out_features as u32).to_le_bytes());
            }
            LayerSpec::Softmax => out.push(TAG_SOFTMAX),
        }
    }
    out.extend_from_slice(&(net.params().len() as u32).to_le_bytes());
    for t in net.params() {
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        put_f32s(&mut out, t.data());
    }
    out
}

pub fn decode_network(bytes: &[u8]) -> Result<Network> {
    let mut r = Reader::new(bytes);
    r.expect_magic(CSNN_MAGIC)?;
    let at = r.offset();
    let version = r.u32("version")?;
    if version != CSNN_VERSION {
        return Err(Error::format(
            at,
            format!("unsupported CSNN version {version}"),
        ));
    }
    let input = [
        r.u32("input shape")? as usize,
        r.u32("input shape")? as usize,
        r.u32("input shape")? as usize,
    ];
    let init_seed = r.u64("init seed")?;
    let n_layers = r.u32("layer count")?;
    let mut layers = Vec::new();
    for _ in 0..n_layers {
        let at = r.offset();
        let layer = match r.u8("layer tag")? {
            TAG_CONV => {
                let out_channels = r.u32("conv out_channels")? as usize;
                let kernel_size = r.u32("conv kernel")? as usize;
                let at = r.offset();
                let padding = match r.u8("conv padding")? {
                    0 => Padding::Same,
                    1 => Padding::Valid,
                    p => return Err(Error::format(at, format!("unknown padding mode {p}"))),
                };
                LayerSpec::Conv2d {
                    out_channels,
                    kernel_size,
                    padding,
                }
            }
            TAG_POOL => LayerSpec::Maxpool2x2,
            TAG_RELU => LayerSpec::Relu,
            TAG_DROPOUT => LayerSpec::Dropout {
                rate: r.f32("dropout rate")?,
            },
            TAG_FLATTEN => LayerSpec::Flatten,
            TAG_DENSE => LayerSpec::Dense {
                out_features: r.u32("dense out_features")? as usize,
            },
            TAG_SOFTMAX => LayerSpec::Softmax,
            t => return Err(Error::format(at, format!("unknown layer tag {t}"))),
        };
        layers.push(layer);
    }
    let n_tensors = r.u32("tensor count")?;
    let mut params = Vec::new();
    for _ in 0..n_tensors {
        let at = r.offset();
        let ndim = r.u32("tensor rank")?;
        if ndim == 0 || ndim > 4 {
            return Err(Error::format(
                at,
                format!("tensor rank {ndim} out of range"),
            ));
        }
        let shape = (0..ndim)
            .map(|_| r.u32("tensor dims").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let len = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let len = len.ok_or_else(|| Error::format(at, "tensor size overflow"))?;
        let data = r.f32s(len, "tensor data")?;
        params.push(Tensor::new(shape, data).map_err(|e| Error::format(at, e.to_string()))?);
    }
    if r.remaining() != 0 {
        return Err(Error::format(
            r.offset(),
            format!("{} trailing bytes", r.remaining()),
        ));
    }
    Network::from_parts(input, layers, init_seed, params)
        .map_err(|e| Error::format(at, e.to_string()))
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_network(net))?;
    Ok(())
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    decode_network(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let net = Network::new([3, 48, 48], LayerSpec::reference_architecture(0.5), 42).unwrap();
        let bytes = encode_network(&net);
        assert_eq!(&bytes[..4], b"CSNN");
        let back = decode_network(&bytes).unwrap();
        assert_eq!(back, net);
        assert_eq!(encode_network(&back), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let net = Network::new([3, 16, 16], LayerSpec::compact_architecture(0.5), 1).unwrap();
        let bytes = encode_network(&net);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            decode_network(&bad),
            Err(Error::Format { offset: 0, .. })
        ));

        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            decode_network(&bad),
            Err(Error::Format { offset: 4, .. })
        ));

        let cut = &bytes[..bytes.len() - 3];
        match decode_network(cut) {
            Err(Error::Format { offset, .. }) => {
                assert!(offset > 0 && (offset as usize) < cut.len())
            }
            other => panic!("expected format error, got {other:?}"),
        }

        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(decode_network(&extra), Err(Error::Format { .. })));
    }
}
