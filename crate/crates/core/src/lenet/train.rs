use rayon::prelude::*;

use super::network::{Network, TrainConfig, Workspace};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::layers::{GradientBundle, Sgd};
use crate::numerics::{argmax, Rng, Scalar};

/// Offset mixed into the training seed for the shuffling stream, so it never
/// coincides with the initialization stream of the same seed.
const SHUFFLE_STREAM: u64 = 0x5348_5546_464c_4521;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-sample loss over the epoch, summed in visiting order.
    pub mean_loss: f64,
    pub validation_accuracy: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

/// Mini-batch momentum SGD on softmax cross-entropy. Each epoch visits the
/// samples in a fresh permutation; batch gradients are summed in that order
/// and averaged.
pub fn train<S: Scalar>(
    net: Network<S>,
    data: &LabeledDataset<S>,
    cfg: &TrainConfig,
    validation: Option<&LabeledDataset<S>>,
) -> Result<(Network<S>, TrainHistory)> {
    train_with(net, data, cfg, validation, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with<S: Scalar>(
    mut net: Network<S>,
    data: &LabeledDataset<S>,
    cfg: &TrainConfig,
    validation: Option<&LabeledDataset<S>>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Network<S>, TrainHistory)> {
    cfg.validate()?;
    check_dataset(&net, data)?;
    if let Some(v) = validation {
        check_dataset(&net, v)?;
    }
    let mut rng = Rng::new(cfg.seed ^ SHUFFLE_STREAM);
    let mut sgd = Sgd::new(net.layers(), cfg.lr, cfg.momentum)?;
    let mut grads = GradientBundle::zeros_for(net.layers());
    let mut ws = Workspace::for_network(&net);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory::default();

    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch) {
            grads.clear();
            for &i in batch {
                let loss = net.accumulate_gradient(data.image(i), data.label(i), &mut ws, &mut grads)?;
                total += loss.as_f64();
            }
            grads.scale(S::one() / S::lit(batch.len() as f64));
            sgd.step(net.layers_mut(), &grads);
        }
        let mean_loss = total / data.len() as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Data(format!(
                "training diverged in epoch {} (loss {mean_loss})",
                net.meta.epoch + 1
            )));
        }
        net.meta.epoch += 1;
        let validation_accuracy = match validation {
            Some(v) => Some(evaluate(&net, v, "validation", !cfg.deterministic)?.accuracy),
            None => None,
        };
        let record = EpochRecord {
            epoch: net.meta.epoch,
            mean_loss,
            validation_accuracy,
        };
        on_epoch(&record);
        history.epochs.push(record);
    }
    Ok((net, history))
}

fn check_dataset<S: Scalar>(net: &Network<S>, data: &LabeledDataset<S>) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Data("dataset is empty".into()));
    }
    let [c, h, w] = net.input_shape();
    if c != 1 || h != data.side() || w != data.side() {
        return Err(Error::Data(format!(
            "network expects 1×{h}×{w} inputs, dataset images are {0}×{0}",
            data.side()
        )));
    }
    let classes = net.output_len();
    if let Some(&bad) = data.labels().iter().find(|&&l| l as usize >= classes) {
        return Err(Error::Label {
            label: bad as usize,
            classes,
        });
    }
    Ok(())
}

/// Logits for every image, in dataset order. `parallel` spreads images over
/// the thread pool; the values do not depend on it.
pub fn predict_logits<S: Scalar>(net: &Network<S>, data: &LabeledDataset<S>, parallel: bool) -> Result<Vec<Vec<S>>> {
    check_dataset(net, data)?;
    let one = |ws: &mut Workspace<S>, i: usize| net.logits_ws(data.image(i), ws).to_vec();
    if parallel {
        Ok((0..data.len())
            .into_par_iter()
            .map_init(|| Workspace::for_network(net), one)
            .collect())
    } else {
        let mut ws = Workspace::for_network(net);
        Ok((0..data.len()).map(|i| one(&mut ws, i)).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub tag: String,
    pub count: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl EvalReport {
    pub fn from_predictions(tag: &str, labels: &[u8], predicted: &[usize], classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Data("no samples to evaluate".into()));
        }
        if labels.len() != predicted.len() {
            return Err(Error::Data(format!(
                "{} labels but {} predictions",
                labels.len(),
                predicted.len()
            )));
        }
        let mut confusion = vec![vec![0; classes]; classes];
        let mut correct = 0;
        for (&l, &p) in labels.iter().zip(predicted) {
            let l = l as usize;
            if l >= classes || p >= classes {
                return Err(Error::Label {
                    label: l.max(p),
                    classes,
                });
            }
            confusion[l][p] += 1;
            correct += usize::from(l == p);
        }
        Ok(EvalReport {
            tag: tag.to_owned(),
            count: labels.len(),
            correct,
            accuracy: correct as f64 / labels.len() as f64,
            confusion,
        })
    }

    /// Samples per true class (row sums of the confusion matrix).
    pub fn class_counts(&self) -> Vec<usize> {
        self.confusion.iter().map(|r| r.iter().sum()).collect()
    }

    /// Recall per class; `None` for classes without samples.
    pub fn recalls(&self) -> Vec<Option<f64>> {
        self.confusion
            .iter()
            .enumerate()
            .map(|(c, r)| {
                let n: usize = r.iter().sum();
                (n > 0).then(|| r[c] as f64 / n as f64)
            })
            .collect()
    }
}

pub fn evaluate<S: Scalar>(
    net: &Network<S>,
    data: &LabeledDataset<S>,
    tag: &str,
    parallel: bool,
) -> Result<EvalReport> {
    let logits = predict_logits(net, data, parallel)?;
    let predicted = logits.iter().map(|z| argmax(z)).collect::<Result<Vec<_>>>()?;
    EvalReport::from_predictions(tag, data.labels(), &predicted, net.output_len())
}
