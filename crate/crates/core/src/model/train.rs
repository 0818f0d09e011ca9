//! Minibatch Adam training of the speaker classifier.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::save_checkpoint;
use super::embed::input_tensor;
use super::network::Network;
use crate::error::{Error, Result};
use crate::features::FixedSpectrogram;
use crate::nn::{argmax_rows, softmax_cross_entropy, AdamConfig, AdamState, Mode, Parameterized};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Seeds the per-epoch shuffle.
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 20, batch_size: 32, adam: AdamConfig::default(), shuffle_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub first_batch_loss: f64,
    pub epochs: Vec<EpochLog>,
}

fn check_inputs(net: &Network<f32>, data: &[FixedSpectrogram], labels: &[usize], config: &TrainConfig) -> Result<()> {
    if data.len() != labels.len() {
        return Err(Error::Dimension(format!("{} examples, {} labels", data.len(), labels.len())));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let k = net.config.num_classes;
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Index(format!("label {bad} outside [0, {k})")));
    }
    let mut seen = labels.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() < 2 {
        return Err(Error::InsufficientData(format!("training needs at least 2 speakers, got {}", seen.len())));
    }
    let (h, w) = (net.config.input_height, net.config.input_width);
    if let Some(x) = data.iter().find(|x| x.height() != h || x.width() != w) {
        return Err(Error::Dimension(format!("example is {}x{}, network expects {h}x{w}", x.height(), x.width())));
    }
    Ok(())
}

/// Train for `config.epochs` epochs. When `checkpoint_dir` is given a
/// checkpoint `epoch-NNN` is written after every epoch. `on_epoch` sees each
/// epoch's log line as soon as it is complete.
pub fn train(
    net: &mut Network<f32>,
    data: &[FixedSpectrogram],
    labels: &[usize],
    config: &TrainConfig,
    checkpoint_dir: Option<&Path>,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainingLog> {
    check_inputs(net, data, labels, config)?;
    let mut adam = AdamState::new(config.adam.clone(), &net.params());
    let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = TrainingLog::default();
    let mut last_checkpoint = None;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let xs: Vec<&FixedSpectrogram> = idx.iter().map(|&i| &data[i]).collect();
            let ys: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let x = input_tensor(&xs)?;
            net.zero_grad();
            let out = net.forward(&x, Mode::Train)?;
            let (loss, grad) = softmax_cross_entropy(&out.logits, &ys)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch, last_checkpoint });
            }
            if epoch == 1 && batch == 0 {
                log.first_batch_loss = loss;
            }
            loss_sum += loss * ys.len() as f64;
            correct += argmax_rows(&out.logits)?.iter().zip(&ys).filter(|(p, y)| p == y).count();
            net.backward(out.cache.as_ref().expect("train cache"), &grad)?;
            adam.step(&mut net.params_mut())?;
        }
        let checkpoint = match checkpoint_dir {
            Some(dir) => {
                let path = dir.join(format!("epoch-{epoch:03}"));
                save_checkpoint(&path, net, Some(epoch))?;
                last_checkpoint = Some(path.clone());
                Some(path)
            }
            None => None,
        };
        let entry = EpochLog {
            epoch,
            loss: loss_sum / data.len() as f64,
            accuracy: correct as f64 / data.len() as f64,
            checkpoint,
        };
        on_epoch(&entry);
        log.epochs.push(entry);
    }
    Ok(log)
}
