use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Network, Tensor};
use crate::dataset::{CandidateSet, Label};
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f32,
    pub epochs: usize,
    pub batch_size: usize,
    /// Applied to every dropout layer of the trained network.
    pub dropout_rate: f32,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 20,
            batch_size: 32,
            dropout_rate: 0.5,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// Mini-batch SGD on cross-entropy. Returns the trained network and the mean
/// training loss of each epoch.
pub fn train(net: &Network, set: &CandidateSet, cfg: &TrainConfig) -> Result<(Network, Vec<f32>)> {
    cfg.validate()?;
    if set.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    let counts = set.counts();
    if counts.nodules == 0 || counts.non_nodules == 0 {
        return Err(Error::Training(format!(
            "training set has a single class ({} nodules, {} non-nodules)",
            counts.nodules, counts.non_nodules
        )));
    }
    if cfg.batch_size > set.len() {
        return Err(Error::Config(format!(
            "batch_size {} exceeds the {} training samples",
            cfg.batch_size,
            set.len()
        )));
    }
    if cfg.epochs == 0 {
        return Ok((net.clone(), Vec::new()));
    }
    let [c, h, w] = net.input_shape();
    if set.patch_shape() != Some([c, h, w]) {
        return Err(Error::Config(format!(
            "patches of shape {:?} do not fit network input {:?}",
            set.patch_shape(),
            net.input_shape()
        )));
    }

    let mut net = net.clone().with_dropout_rate(cfg.dropout_rate)?;
    let mut rng = seed::rng(cfg.seed);
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let sample_len = c * h * w;
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0f32;
        for chunk in order.chunks(cfg.batch_size) {
            let mut pixels = Vec::with_capacity(chunk.len() * sample_len);
            let mut labels = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let p = &set.patches()[i];
                pixels.extend_from_slice(p.pixels.data());
                labels.push(usize::from(p.label == Label::Nodule));
            }
            let batch = Tensor::new(vec![chunk.len(), c, h, w], pixels)?;
            let (loss, grads) = net.loss_and_grads(&batch, &labels, &mut rng)?;
            net.sgd_step(&grads, cfg.learning_rate)
                .map_err(|e| match e {
                    Error::Numeric(m) => Error::Numeric(format!("epoch {epoch}: {m}")),
                    other => other,
                })?;
            epoch_loss += loss * chunk.len() as f32;
        }
        trace.push(epoch_loss / set.len() as f32);
    }
    Ok((net, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticConfig};
    use crate::nn::LayerSpec;

    fn separable() -> CandidateSet {
        generate_synthetic(&SyntheticConfig {
            n_scans: 4,
            positives_per_scan: 25,
            negatives_per_scan: 25,
            hard_negative_fraction: 0.0,
            patch_size: 8,
            seed: 3,
            ..SyntheticConfig::default()
        })
        .unwrap()
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.2,
            epochs: 15,
            batch_size: 16,
            dropout_rate: 0.0,
            seed: 1,
            shuffle: true,
        }
    }

    fn net() -> Network {
        Network::new([3, 8, 8], LayerSpec::compact_architecture(0.5), 2).unwrap()
    }

    #[test]
    fn zero_epochs_leave_the_network_alone() {
        let set = separable();
        let (trained, trace) = train(
            &net(),
            &set,
            &TrainConfig {
                epochs: 0,
                ..quick()
            },
        )
        .unwrap();
        assert_eq!(trained, net());
        assert!(trace.is_empty());
    }

    #[test]
    fn learns_separable_data() {
        let set = separable();
        let (trained, trace) = train(&net(), &set, &quick()).unwrap();
        assert!(trace.last().unwrap() < &trace[0], "{trace:?}");
        let correct = set
            .patches()
            .iter()
            .filter(|p| {
                (trained.predict_one(p.pixels.data()).unwrap() >= 0.5) == (p.label == Label::Nodule)
            })
            .count();
        assert!(
            correct as f64 / set.len() as f64 >= 0.95,
            "{correct}/{}",
            set.len()
        );
    }

    #[test]
    fn same_seed_same_weights() {
        let set = separable();
        let cfg = TrainConfig {
            epochs: 2,
            ..quick()
        };
        let a = train(&net(), &set, &cfg).unwrap();
        let b = train(&net(), &set, &cfg).unwrap();
        assert_eq!(a, b);
        let c = train(&net(), &set, &TrainConfig { seed: 2, ..cfg }).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn rejects_degenerate_sets_and_configs() {
        let set = separable();
        let one_class = set.of_label(Label::Nodule);
        assert!(matches!(
            train(&net(), &one_class, &quick()),
            Err(Error::Training(_))
        ));
        let huge_batch = TrainConfig {
            batch_size: set.len() + 1,
            ..quick()
        };
        assert!(matches!(
            train(&net(), &set, &huge_batch),
            Err(Error::Config(_))
        ));
        let bad_rate = TrainConfig {
            learning_rate: 0.0,
            ..quick()
        };
        assert!(matches!(
            train(&net(), &set, &bad_rate),
            Err(Error::Config(_))
        ));
        let wrong_shape =
            Network::new([3, 16, 16], LayerSpec::compact_architecture(0.5), 2).unwrap();
        assert!(matches!(
            train(&wrong_shape, &set, &quick()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn dropout_rate_is_applied() {
        let set = separable();
        let cfg = TrainConfig {
            epochs: 1,
            dropout_rate: 0.3,
            ..quick()
        };
        let (trained, _) = train(&net(), &set, &cfg).unwrap();
        assert!(trained
            .layers()
            .iter()
            .any(|l| matches!(l, LayerSpec::Dropout { rate } if *rate == 0.3)));
    }
}
