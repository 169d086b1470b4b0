//! Training regimes: pseudo-label (adaptive) training on the noisy data
//! alone, supervised pre-training on clean/noisy pairs (noise-specific or
//! blind over a composite delta range), adaptive fine-tuning of a pre-trained
//! model, and the vanilla direct-mapping classifier.
//!
//! One mini-batch engine drives all of them; regimes differ only in where
//! samples come from and how targets are built. Pseudo-label targets are
//! functions of the noisy symbol and the channel alone; the corresponding
//! code paths never see clean data.

use std::path::Path;
use std::time::Instant;

use crate::channel::{
    pseudo_labels, true_labels, ChannelModel, LossModel, PseudoLabelSet, SingletDenoiserSet,
    TrueLabelSet,
};
use crate::context::{ContextKind, ContextWindow};
use crate::data::{corrupt_corpus, generate_reads, Corpus, ReferenceSequence};
use crate::denoiser::encode_window;
use crate::error::{NdudeError, Result};
use crate::nn::{
    adam_step, backward, soft_cross_entropy, AdamState, Gradients, Head, MlpModel, Provenance,
};
use crate::rng::{derive_seed, SplitMix64};

/// One element of a supervised set: the clean symbol under a noisy symbol and
/// its context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupervisedPair {
    pub clean: u8,
    pub noisy: u8,
    pub window: ContextWindow,
}

/// Materializes every (clean, noisy, context) triple of a corpus pair.
pub fn make_pairs(clean: &Corpus, noisy: &Corpus, kind: ContextKind) -> Result<Vec<SupervisedPair>> {
    check_same_shape(clean, noisy)?;
    let mut out = Vec::with_capacity(clean.total_symbols());
    let mut window = Vec::new();
    for item in 0..clean.items() {
        let cs = clean.item(item);
        let ns = noisy.item(item);
        for pos in 0..cs.len() {
            noisy.window_into(item, pos, kind, &mut window)?;
            out.push(SupervisedPair {
                clean: cs[pos],
                noisy: ns[pos],
                window: ContextWindow {
                    kind,
                    symbols: window.clone(),
                },
            });
        }
    }
    Ok(out)
}

fn check_same_shape(a: &Corpus, b: &Corpus) -> Result<()> {
    if a.items() != b.items()
        || (0..a.items()).any(|i| a.item(i).len() != b.item(i).len() || a.grid_dims(i) != b.grid_dims(i))
    {
        return Err(NdudeError::DimensionMismatch(
            "clean and noisy corpora have different shapes".into(),
        ));
    }
    Ok(())
}

/// Where supervised pairs come from across epochs.
pub enum PairStream {
    /// A fixed clean/noisy pairing.
    Fixed { clean: Corpus, noisy: Corpus },
    /// Clean data re-corrupted with the channel at the start of every epoch.
    Regen { clean: Corpus, channel: ChannelModel },
    /// Reads re-drawn from a reference and re-corrupted every epoch: the
    /// DNA supervised-set procedure.
    RegenReads {
        reference: ReferenceSequence,
        read_len: usize,
        count: usize,
        channel: ChannelModel,
    },
}

/// When blind training re-draws its noise level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RedrawPolicy {
    Epoch,
    Batch,
}

#[derive(Clone, Debug)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Blind training only: when to re-draw delta.
    pub blind_redraw: RedrawPolicy,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 10,
            batch_size: 256,
            learning_rate: 1e-3,
            seed: 0,
            blind_redraw: RedrawPolicy::Epoch,
        }
    }
}

/// Default epoch counts: supervised pre-training runs longer than the
/// adaptive regimes.
pub const DEFAULT_SUP_EPOCHS: usize = 20;
pub const DEFAULT_ADAPTIVE_EPOCHS: usize = 10;
/// Default fine-tuning learning rate for quaternary (DNA) models.
pub const DNA_FT_LEARNING_RATE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStat {
    pub epoch: usize,
    pub objective: f64,
    pub wall_seconds: f64,
}

/// A trained model plus its per-epoch log.
pub struct TrainOutcome {
    pub model: MlpModel,
    pub log: Vec<EpochStat>,
}

/// Writes the per-epoch training log CSV (`epoch,objective,wall_seconds`).
pub fn write_training_log(path: &Path, log: &[EpochStat]) -> Result<()> {
    let mut out = String::from("epoch,objective,wall_seconds\n");
    for stat in log {
        out.push_str(&format!(
            "{},{:.6e},{:.3}\n",
            stat.epoch, stat.objective, stat.wall_seconds
        ));
    }
    std::fs::write(path, out).map_err(|e| NdudeError::io(path, e))
}

// ---------------------------------------------------------------------------
// Target construction

/// Pseudo-label target for a noisy center symbol: the `L_new` row for the
/// full head, or the concatenated per-z `L_new,z` rows for the reduced head.
pub fn pseudo_target_into(
    head: &Head,
    plabels: &PseudoLabelSet,
    z: u8,
    out: &mut Vec<f64>,
) {
    out.clear();
    match head {
        Head::Full { .. } => out.extend_from_slice(plabels.l_new.row(z as usize)),
        Head::Reduced { .. } => {
            for partial in &plabels.partial_l_new {
                out.extend_from_slice(partial.row(z as usize));
            }
        }
        Head::Direct { .. } => unreachable!("pseudo-labels are undefined for direct heads"),
    }
}

/// Supervised target for a (clean, noisy) pair: the `L_true` row for the
/// full head; for the reduced head a one-hot at the clean symbol in the
/// observed group and the all-1 vector in every other group; for the direct
/// head a plain one-hot over the reconstruction alphabet.
pub fn supervised_target_into(
    head: &Head,
    tlabels: Option<&TrueLabelSet>,
    xhat_size: usize,
    x: u8,
    z: u8,
    out: &mut Vec<f64>,
) {
    out.clear();
    match head {
        Head::Full { .. } => {
            let t = tlabels.expect("full-head supervision needs true labels");
            out.extend_from_slice(t.label_row(x, z));
        }
        Head::Reduced { groups, .. } => {
            for g in 0..*groups {
                if g == z as usize {
                    out.extend((0..xhat_size).map(|i| f64::from(i == x as usize)));
                } else {
                    out.extend(std::iter::repeat_n(1.0, xhat_size));
                }
            }
        }
        Head::Direct { .. } => {
            out.extend((0..xhat_size).map(|i| f64::from(i == x as usize)));
        }
    }
}

// ---------------------------------------------------------------------------
// Sample sources

/// Supplies encoded inputs (and clean labels where they exist) to the
/// mini-batch engine.
trait SampleSource {
    fn len(&self) -> usize;
    fn begin_epoch(&mut self, _epoch: u64) -> Result<()> {
        Ok(())
    }
    fn begin_batch(&mut self, _epoch: u64, _batch: u64) {}
    /// Writes the encoded input for sample `idx`; returns (clean, noisy
    /// center).
    fn fill(&mut self, idx: usize, input: &mut [f64]) -> (Option<u8>, u8);
}

/// (item, position) pairs for every symbol of a corpus.
fn corpus_sites(corpus: &Corpus) -> Vec<(u32, u32)> {
    let mut sites = Vec::with_capacity(corpus.total_symbols());
    for item in 0..corpus.items() {
        for pos in 0..corpus.item(item).len() {
            sites.push((item as u32, pos as u32));
        }
    }
    sites
}

/// Noisy data only: the pseudo-label regimes.
struct PseudoSource<'a> {
    noisy: &'a Corpus,
    sites: Vec<(u32, u32)>,
    kind: ContextKind,
    z_size: usize,
    window: Vec<Option<u8>>,
}

impl SampleSource for PseudoSource<'_> {
    fn len(&self) -> usize {
        self.sites.len()
    }

    fn fill(&mut self, idx: usize, input: &mut [f64]) -> (Option<u8>, u8) {
        let (item, pos) = self.sites[idx];
        self.noisy
            .window_into(item as usize, pos as usize, self.kind, &mut self.window)
            .expect("sites enumerate valid positions");
        encode_window(&self.window, self.z_size, input);
        (None, self.noisy.item(item as usize)[pos as usize])
    }
}

/// Clean/noisy pairs, optionally regenerated per epoch.
struct PairSource<'a> {
    stream: &'a PairStream,
    clean: Corpus,
    noisy: Corpus,
    sites: Vec<(u32, u32)>,
    kind: ContextKind,
    z_size: usize,
    include_center: bool,
    seed: u64,
    window: Vec<Option<u8>>,
}

impl<'a> PairSource<'a> {
    fn new(
        stream: &'a PairStream,
        kind: ContextKind,
        z_size: usize,
        include_center: bool,
        seed: u64,
    ) -> Result<Self> {
        let (clean, noisy) = materialize_pairs(stream, seed, 0)?;
        check_same_shape(&clean, &noisy)?;
        let sites = corpus_sites(&clean);
        Ok(PairSource {
            stream,
            clean,
            noisy,
            sites,
            kind,
            z_size,
            include_center,
            seed,
            window: Vec::new(),
        })
    }
}

fn materialize_pairs(stream: &PairStream, seed: u64, epoch: u64) -> Result<(Corpus, Corpus)> {
    match stream {
        PairStream::Fixed { clean, noisy } => Ok((clean.clone(), noisy.clone())),
        PairStream::Regen { clean, channel } => {
            let noisy = corrupt_corpus(clean, channel, derive_seed(seed, epoch))?;
            Ok((clean.clone(), noisy))
        }
        PairStream::RegenReads {
            reference,
            read_len,
            count,
            channel,
        } => {
            let reads = generate_reads(reference, *read_len, *count, derive_seed(seed, 2 * epoch))?;
            let clean = Corpus::from_reads(&reads);
            let noisy = corrupt_corpus(&clean, channel, derive_seed(seed, 2 * epoch + 1))?;
            Ok((clean, noisy))
        }
    }
}

impl SampleSource for PairSource<'_> {
    fn len(&self) -> usize {
        self.sites.len()
    }

    fn begin_epoch(&mut self, epoch: u64) -> Result<()> {
        if !matches!(self.stream, PairStream::Fixed { .. }) {
            let (clean, noisy) = materialize_pairs(self.stream, self.seed, epoch)?;
            self.clean = clean;
            self.noisy = noisy;
        }
        Ok(())
    }

    fn fill(&mut self, idx: usize, input: &mut [f64]) -> (Option<u8>, u8) {
        let (item, pos) = self.sites[idx];
        let (item, pos) = (item as usize, pos as usize);
        self.noisy
            .window_into(item, pos, self.kind, &mut self.window)
            .expect("sites enumerate valid positions");
        let z = self.noisy.item(item)[pos];
        if self.include_center {
            let ctx_len = self.window.len() * self.z_size;
            encode_window(&self.window, self.z_size, &mut input[..ctx_len]);
            input[ctx_len..].fill(0.0);
            input[ctx_len + z as usize] = 1.0;
        } else {
            encode_window(&self.window, self.z_size, input);
        }
        (Some(self.clean.item(item)[pos]), z)
    }
}

/// Blind supervision: clean data corrupted under a freshly drawn delta per
/// epoch (whole-corpus corruption) or per batch (per-sample, on the fly).
struct BlindSource<'a> {
    clean: &'a Corpus,
    base: &'a ChannelModel,
    range: (f64, f64),
    redraw: RedrawPolicy,
    seed: u64,
    sites: Vec<(u32, u32)>,
    kind: ContextKind,
    z_size: usize,
    noisy: Option<Corpus>,
    current: ChannelModel,
    delta_rng: SplitMix64,
    sample_rng: SplitMix64,
    window: Vec<Option<u8>>,
}

impl<'a> BlindSource<'a> {
    fn new(
        clean: &'a Corpus,
        base: &'a ChannelModel,
        range: (f64, f64),
        redraw: RedrawPolicy,
        kind: ContextKind,
        z_size: usize,
        seed: u64,
    ) -> Result<Self> {
        let current = channel_with_delta(base, range.0)?;
        Ok(BlindSource {
            clean,
            base,
            range,
            redraw,
            seed,
            sites: corpus_sites(clean),
            kind,
            z_size,
            noisy: None,
            current,
            delta_rng: SplitMix64::new(derive_seed(seed, 0xB11D)),
            sample_rng: SplitMix64::new(derive_seed(seed, 0x5A3)),
            window: Vec::new(),
        })
    }

    fn draw_channel(&mut self) -> Result<()> {
        let (lo, hi) = self.range;
        let delta = lo + self.delta_rng.next_f64() * (hi - lo);
        self.current = channel_with_delta(self.base, delta)?;
        Ok(())
    }
}

fn channel_with_delta(base: &ChannelModel, delta: f64) -> Result<ChannelModel> {
    match base.family() {
        crate::channel::ChannelFamily::Bsc { .. } => ChannelModel::bsc(delta),
        crate::channel::ChannelFamily::Qsc { size, .. } => ChannelModel::qsc(size, delta),
        crate::channel::ChannelFamily::General => Err(NdudeError::InvalidParameter(
            "blind training needs a symmetric channel family".into(),
        )),
    }
}

impl SampleSource for BlindSource<'_> {
    fn len(&self) -> usize {
        self.sites.len()
    }

    fn begin_epoch(&mut self, epoch: u64) -> Result<()> {
        if self.redraw == RedrawPolicy::Epoch {
            self.draw_channel()?;
            self.noisy = Some(corrupt_corpus(
                self.clean,
                &self.current,
                derive_seed(self.seed, epoch),
            )?);
        }
        Ok(())
    }

    fn begin_batch(&mut self, _epoch: u64, _batch: u64) {
        if self.redraw == RedrawPolicy::Batch {
            self.draw_channel().expect("range validated at start");
        }
    }

    fn fill(&mut self, idx: usize, input: &mut [f64]) -> (Option<u8>, u8) {
        let (item, pos) = self.sites[idx];
        let (item, pos) = (item as usize, pos as usize);
        match &self.noisy {
            Some(noisy) => {
                noisy
                    .window_into(item, pos, self.kind, &mut self.window)
                    .expect("sites enumerate valid positions");
                encode_window(&self.window, self.z_size, input);
                (
                    Some(self.clean.item(item)[pos]),
                    noisy.item(item)[pos],
                )
            }
            None => {
                // Per-batch redraw: corrupt the window and center on the fly.
                self.clean
                    .window_into(item, pos, self.kind, &mut self.window)
                    .expect("sites enumerate valid positions");
                for v in self.window.iter_mut().flatten() {
                    *v = sample_channel(&self.current, *v, &mut self.sample_rng);
                }
                encode_window(&self.window, self.z_size, input);
                let x = self.clean.item(item)[pos];
                let z = sample_channel(&self.current, x, &mut self.sample_rng);
                (Some(x), z)
            }
        }
    }
}

fn sample_channel(ch: &ChannelModel, x: u8, rng: &mut SplitMix64) -> u8 {
    let row = ch.pi().row(x as usize);
    let u = rng.next_f64();
    let mut acc = 0.0;
    for (z, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return z as u8;
        }
    }
    (row.len() - 1) as u8
}

// ---------------------------------------------------------------------------
// The mini-batch engine

enum TargetBuilder<'a> {
    Pseudo(&'a PseudoLabelSet),
    Supervised(Option<&'a TrueLabelSet>),
}

fn build_target(
    builder: &TargetBuilder,
    head: &Head,
    xhat_size: usize,
    clean: Option<u8>,
    z: u8,
    out: &mut Vec<f64>,
) {
    match builder {
        TargetBuilder::Pseudo(plabels) => pseudo_target_into(head, plabels, z, out),
        TargetBuilder::Supervised(tlabels) => {
            let x = clean.expect("supervised sources provide clean symbols");
            supervised_target_into(head, *tlabels, xhat_size, x, z, out);
        }
    }
}

fn train_loop(
    init: &MlpModel,
    source: &mut dyn SampleSource,
    builder: &TargetBuilder,
    cfg: &TrainingConfig,
    provenance: Provenance,
) -> Result<TrainOutcome> {
    let mut model = init.clone();
    if cfg.epochs == 0 || source.len() == 0 {
        return Ok(TrainOutcome {
            model,
            log: Vec::new(),
        });
    }
    model.provenance = provenance;
    if cfg.batch_size == 0 {
        return Err(NdudeError::InvalidParameter("batch size must be > 0".into()));
    }

    let mut state = AdamState::new(&model, cfg.learning_rate);
    let mut grads = Gradients::zeros_of(&model);
    let mut acts = model.new_activations();
    let mut input = vec![0.0; model.input_dim()];
    let mut target = Vec::with_capacity(model.output_dim());
    let mut order: Vec<usize> = (0..source.len()).collect();
    let mut shuffle_rng = SplitMix64::new(derive_seed(cfg.seed, 0x0D9));
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        source.begin_epoch(epoch as u64)?;
        shuffle_rng.shuffle(&mut order);
        let mut objective_sum = 0.0;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            source.begin_batch(epoch as u64, batch_idx as u64);
            grads.reset();
            for &idx in batch {
                let (clean, z) = source.fill(idx, &mut input);
                build_target(builder, &model.head, model.xhat_size, clean, z, &mut target);
                model.forward_into(&input, &mut acts)?;
                objective_sum += soft_cross_entropy(&target, acts.probs())?;
                backward(&model, &acts, &target, &mut grads)?;
            }
            adam_step(&mut model, &mut state, &grads, batch.len());
        }
        log.push(EpochStat {
            epoch,
            objective: objective_sum / source.len() as f64,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(TrainOutcome { model, log })
}

// ---------------------------------------------------------------------------
// Public regimes

fn check_adaptive_model(model: &MlpModel, ch: &ChannelModel, loss: &LossModel) -> Result<SingletDenoiserSet> {
    if model.z_size != ch.z_size() || model.xhat_size != loss.xhat_size() {
        return Err(NdudeError::DimensionMismatch(format!(
            "model alphabets (|Z|={}, |Xhat|={}) do not match channel/loss ({}, {})",
            model.z_size,
            model.xhat_size,
            ch.z_size(),
            loss.xhat_size()
        )));
    }
    let s_set = SingletDenoiserSet::new(ch.z_size(), loss.xhat_size())?;
    match model.head {
        Head::Full { width } if width == s_set.count() => Ok(s_set),
        Head::Reduced {
            groups,
            group_width,
        } if groups == ch.z_size() && group_width == loss.xhat_size() => Ok(s_set),
        _ => Err(NdudeError::DimensionMismatch(format!(
            "head {} incompatible with |Z|={}, |Xhat|={}",
            model.head.describe(),
            ch.z_size(),
            loss.xhat_size()
        ))),
    }
}

/// Pseudo-label training on the noisy data subject to denoising. No clean
/// data enters this code path.
pub fn train_pseudo(
    noisy: &Corpus,
    ch: &ChannelModel,
    loss: &LossModel,
    cfg: &TrainingConfig,
    init: &MlpModel,
) -> Result<TrainOutcome> {
    let s_set = check_adaptive_model(init, ch, loss)?;
    noisy.validate_alphabet(ch.z_size())?;
    let plabels = pseudo_labels(ch, loss, &s_set)?;
    let mut source = PseudoSource {
        noisy,
        sites: corpus_sites(noisy),
        kind: init.context_kind,
        z_size: init.z_size,
        window: Vec::new(),
    };
    train_loop(
        init,
        &mut source,
        &TargetBuilder::Pseudo(&plabels),
        cfg,
        Provenance::Rand,
    )
}

/// Adaptive fine-tuning: the pseudo-label loop warm-started from a
/// pre-trained model, with the channel of the data subject to denoising.
/// Adam moments are reset.
pub fn finetune(
    init: &MlpModel,
    noisy: &Corpus,
    ch_true: &ChannelModel,
    loss: &LossModel,
    cfg: &TrainingConfig,
) -> Result<TrainOutcome> {
    let s_set = check_adaptive_model(init, ch_true, loss)?;
    noisy.validate_alphabet(ch_true.z_size())?;
    let plabels = pseudo_labels(ch_true, loss, &s_set)?;
    let mut source = PseudoSource {
        noisy,
        sites: corpus_sites(noisy),
        kind: init.context_kind,
        z_size: init.z_size,
        window: Vec::new(),
    };
    train_loop(
        init,
        &mut source,
        &TargetBuilder::Pseudo(&plabels),
        cfg,
        Provenance::Ft,
    )
}

/// Supervised pre-training of a full- or reduced-head model on clean/noisy
/// pairs.
pub fn train_supervised(
    pairs: &PairStream,
    loss: &LossModel,
    cfg: &TrainingConfig,
    init: &MlpModel,
) -> Result<TrainOutcome> {
    let tlabels = match init.head {
        Head::Full { width } => {
            let s_set = SingletDenoiserSet::new(init.z_size, init.xhat_size)?;
            if width != s_set.count() {
                return Err(NdudeError::DimensionMismatch(format!(
                    "full head width {width} but |Xhat|^|Z| = {}",
                    s_set.count()
                )));
            }
            Some(true_labels(loss, &s_set, init.z_size)?)
        }
        Head::Reduced { .. } => None,
        Head::Direct { .. } => {
            return Err(NdudeError::InvalidParameter(
                "direct-head models train with train_vanilla_sl".into(),
            ))
        }
    };
    let mut source = PairSource::new(pairs, init.context_kind, init.z_size, false, cfg.seed)?;
    source.clean.validate_alphabet(loss.x_size())?;
    train_loop(
        init,
        &mut source,
        &TargetBuilder::Supervised(tlabels.as_ref()),
        cfg,
        Provenance::Sup,
    )
}

/// Blind supervised pre-training: a single model trained on noise drawn
/// uniformly from `range` (re-drawn per epoch or per batch).
pub fn train_supervised_blind(
    clean: &Corpus,
    base: &ChannelModel,
    range: (f64, f64),
    loss: &LossModel,
    cfg: &TrainingConfig,
    init: &MlpModel,
) -> Result<TrainOutcome> {
    let (lo, hi) = range;
    if !(lo <= hi && lo >= 0.0) {
        return Err(NdudeError::InvalidParameter(format!(
            "blind delta range must satisfy 0 <= lo <= hi, got [{lo}, {hi}]"
        )));
    }
    // Both endpoints must be constructible channels.
    channel_with_delta(base, lo)?;
    channel_with_delta(base, hi)?;
    let tlabels = match init.head {
        Head::Full { .. } => {
            let s_set = SingletDenoiserSet::new(init.z_size, init.xhat_size)?;
            Some(true_labels(loss, &s_set, init.z_size)?)
        }
        Head::Reduced { .. } => None,
        Head::Direct { .. } => {
            return Err(NdudeError::InvalidParameter(
                "direct-head models train with train_vanilla_sl".into(),
            ))
        }
    };
    clean.validate_alphabet(loss.x_size())?;
    let mut source = BlindSource::new(
        clean,
        base,
        range,
        cfg.blind_redraw,
        init.context_kind,
        init.z_size,
        cfg.seed,
    )?;
    train_loop(
        init,
        &mut source,
        &TargetBuilder::Supervised(tlabels.as_ref()),
        cfg,
        Provenance::SupBlind,
    )
}

/// Vanilla supervised classifier: context plus center symbol in, one-hot
/// clean symbol out. No adaptive fine-tuning path exists for these models.
pub fn train_vanilla_sl(
    pairs: &PairStream,
    cfg: &TrainingConfig,
    init: &MlpModel,
) -> Result<TrainOutcome> {
    match init.head {
        Head::Direct { width } if width == init.xhat_size => {}
        _ => {
            return Err(NdudeError::InvalidParameter(
                "train_vanilla_sl requires a direct head over |Xhat|".into(),
            ))
        }
    }
    let mut source = PairSource::new(pairs, init.context_kind, init.z_size, true, cfg.seed)?;
    source.clean.validate_alphabet(init.xhat_size)?;
    train_loop(
        init,
        &mut source,
        &TargetBuilder::Supervised(None),
        cfg,
        Provenance::Sup,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{corrupt, synthetic_sequence, SourceModel};
    use crate::denoiser::{dude_denoise, ndude_infer_full, ndude_infer_reduced};

    fn binary_markov_noisy(n: usize, delta: f64, seed: u64) -> (Vec<u8>, Vec<u8>) {
        let clean =
            synthetic_sequence(n, 2, SourceModel::Markov { stay_prob: 0.9 }, seed).unwrap();
        let ch = ChannelModel::bsc(delta).unwrap();
        let noisy = corrupt(&clean, &ch, derive_seed(seed, 1));
        (clean, noisy)
    }

    fn full_model(k: usize, hidden: &[usize], seed: u64) -> MlpModel {
        let mut dims = vec![2 * k * 2];
        dims.extend_from_slice(hidden);
        dims.push(4);
        MlpModel::he_init(
            &dims,
            Head::Full { width: 4 },
            ContextKind::OneD { k },
            2,
            2,
            2,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn pseudo_target_rows() {
        let ch = ChannelModel::bsc(0.1).unwrap();
        let loss = LossModel::hamming(2);
        let s = SingletDenoiserSet::new(2, 2).unwrap();
        let p = pseudo_labels(&ch, &loss, &s).unwrap();
        let mut t = Vec::new();
        pseudo_target_into(&Head::Full { width: 4 }, &p, 0, &mut t);
        // The L_new row for z = 0.
        for (got, want) in t.iter().zip([1.25, 0.225, 1.025, 0.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn supervised_target_rows() {
        let loss = LossModel::hamming(2);
        let s = SingletDenoiserSet::new(2, 2).unwrap();
        let t = true_labels(&loss, &s, 2).unwrap();
        let mut out = Vec::new();
        supervised_target_into(&Head::Full { width: 4 }, Some(&t), 2, 0, 0, &mut out);
        assert_eq!(out, vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn reduced_supervised_target_one_hot_plus_all_ones() {
        // DNA pair (clean = C, noisy = A): group A gets the one-hot at C,
        // groups C, G, T get the all-1 vector.
        let head = Head::Reduced {
            groups: 4,
            group_width: 4,
        };
        let mut out = Vec::new();
        supervised_target_into(&head, None, 4, 1, 0, &mut out);
        assert_eq!(out[..4], [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(out[4..], [1.0; 12]);
    }

    #[test]
    fn zero_epochs_returns_init_unchanged() {
        let (_, noisy) = binary_markov_noisy(200, 0.1, 3);
        let ch = ChannelModel::bsc(0.1).unwrap();
        let loss = LossModel::hamming(2);
        let init = full_model(1, &[8], 5);
        let cfg = TrainingConfig {
            epochs: 0,
            ..Default::default()
        };
        let out = train_pseudo(&Corpus::from_seq(noisy), &ch, &loss, &cfg, &init).unwrap();
        assert_eq!(out.model, init);
        assert!(out.log.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let (_, noisy) = binary_markov_noisy(4000, 0.1, 7);
        let ch = ChannelModel::bsc(0.1).unwrap();
        let loss = LossModel::hamming(2);
        let init = full_model(1, &[16], 9);
        let cfg = TrainingConfig {
            epochs: 2,
            ..Default::default()
        };
        let corpus = Corpus::from_seq(noisy);
        let a = train_pseudo(&corpus, &ch, &loss, &cfg, &init).unwrap();
        let b = train_pseudo(&corpus, &ch, &loss, &cfg, &init).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(
            a.log.iter().map(|s| s.objective).collect::<Vec<_>>(),
            b.log.iter().map(|s| s.objective).collect::<Vec<_>>()
        );
    }

    #[test]
    fn pseudo_training_tracks_dude_at_k1() {
        // End-to-end: NDUDE(Rand) at k=1 must land within 0.003 BER of
        // count-DUDE on the same data.
        let n = 100_000;
        let (clean, noisy) = binary_markov_noisy(n, 0.1, 11);
        let ch = ChannelModel::bsc(0.1).unwrap();
        let loss = LossModel::hamming(2);
        let corpus = Corpus::from_seq(noisy);

        let dude = dude_denoise(&corpus, &ch, &loss, ContextKind::OneD { k: 1 }).unwrap();
        let dude_ber = ber(&clean, dude.output.item(0));

        let init = full_model(1, &[32, 32], 13);
        let cfg = TrainingConfig {
            epochs: 8,
            batch_size: 1024,
            ..Default::default()
        };
        let trained = train_pseudo(&corpus, &ch, &loss, &cfg, &init).unwrap();
        let recon = ndude_infer_full(&trained.model, &corpus).unwrap();
        let ndude_ber = ber(&clean, recon.output.item(0));
        assert!(
            ndude_ber <= dude_ber + 0.003,
            "NDUDE {ndude_ber} vs DUDE {dude_ber}"
        );
    }

    fn ber(a: &[u8], b: &[u8]) -> f64 {
        a.iter().zip(b).filter(|(x, y)| x != y).count() as f64 / a.len() as f64
    }

    #[test]
    fn objective_mostly_non_increasing() {
        let (_, noisy) = binary_markov_noisy(30_000, 0.1, 21);
        let ch = ChannelModel::bsc(0.1).unwrap();
        let loss = LossModel::hamming(2);
        let init = full_model(2, &[32], 23);
        let cfg = TrainingConfig {
            epochs: 10,
            ..Default::default()
        };
        let out = train_pseudo(&Corpus::from_seq(noisy), &ch, &loss, &cfg, &init).unwrap();
        let drops = out
            .log
            .windows(2)
            .filter(|w| w[1].objective <= w[0].objective)
            .count();
        assert!(
            drops as f64 >= 0.8 * (out.log.len() - 1) as f64,
            "only {drops} of {} epoch pairs decreased",
            out.log.len() - 1
        );
    }

    #[test]
    fn supervised_noiseless_pairs_learn_identity() {
        // With delta = 0 the converged model must pick say-what-you-see
        // singlets on observed contexts.
        let clean = synthetic_sequence(20_000, 2, SourceModel::Markov { stay_prob: 0.8 }, 31)
            .unwrap();
        let ch = ChannelModel::bsc(0.0).unwrap();
        let loss = LossModel::hamming(2);
        let corpus = Corpus::from_seq(clean.clone());
        let pairs = PairStream::Regen {
            clean: corpus.clone(),
            channel: ch,
        };
        let init = full_model(1, &[16], 33);
        // Soft targets leave only a 6% margin between say-what-you-see and
        // the constant map inside uniform contexts; give Adam room to
        // resolve it.
        let cfg = TrainingConfig {
            epochs: 16,
            ..Default::default()
        };
        let out = train_supervised(&pairs, &loss, &cfg, &init).unwrap();
        assert_eq!(out.model.provenance, Provenance::Sup);
        let recon = ndude_infer_full(&out.model, &corpus).unwrap();
        let b = ber(&clean, recon.output.item(0));
        assert!(b < 0.01, "BER {b} on noiseless data");
    }

    #[test]
    fn blind_degenerate_range_close_to_noise_specific() {
        let n = 60_000;
        let clean =
            synthetic_sequence(n, 2, SourceModel::Markov { stay_prob: 0.9 }, 41).unwrap();
        let train_corpus = Corpus::from_seq(clean);
        let ch = ChannelModel::bsc(0.1).unwrap();
        let loss = LossModel::hamming(2);
        let cfg = TrainingConfig {
            epochs: 6,
            seed: 43,
            ..Default::default()
        };
        let init = full_model(1, &[16], 45);

        let blind = train_supervised_blind(
            &train_corpus,
            &ch,
            (0.1, 0.1),
            &loss,
            &cfg,
            &init,
        )
        .unwrap();
        assert_eq!(blind.model.provenance, Provenance::SupBlind);
        let sup = train_supervised(
            &PairStream::Regen {
                clean: train_corpus.clone(),
                channel: ch.clone(),
            },
            &loss,
            &cfg,
            &init,
        )
        .unwrap();

        // Held-out noisy data from the same family.
        let (test_clean, test_noisy) = binary_markov_noisy(n, 0.1, 47);
        let test = Corpus::from_seq(test_noisy);
        let blind_ber = ber(
            &test_clean,
            ndude_infer_full(&blind.model, &test).unwrap().output.item(0),
        );
        let sup_ber = ber(
            &test_clean,
            ndude_infer_full(&sup.model, &test).unwrap().output.item(0),
        );
        assert!(
            (blind_ber - sup_ber).abs() < 0.002,
            "blind {blind_ber} vs noise-specific {sup_ber}"
        );

        // Per-context singlet choices agree on >= 95% of the enumerable
        // k = 1 context set.
        let mut agree = 0;
        let mut total = 0;
        for left in 0..2u8 {
            for right in 0..2u8 {
                let w = crate::context::ContextWindow {
                    kind: ContextKind::OneD { k: 1 },
                    symbols: vec![Some(left), Some(right)],
                };
                total += 1;
                if crate::denoiser::full_head_choice(&blind.model, &w).unwrap()
                    == crate::denoiser::full_head_choice(&sup.model, &w).unwrap()
                {
                    agree += 1;
                }
            }
        }
        assert!(agree * 100 >= total * 95, "{agree}/{total} contexts agree");
    }

    #[test]
    fn blind_rejects_bad_ranges() {
        let clean = Corpus::from_seq(vec![0, 1, 0, 1]);
        let ch = ChannelModel::bsc(0.1).unwrap();
        let loss = LossModel::hamming(2);
        let init = full_model(1, &[8], 1);
        let cfg = TrainingConfig::default();
        assert!(
            train_supervised_blind(&clean, &ch, (0.3, 0.2), &loss, &cfg, &init).is_err()
        );
        assert!(
            train_supervised_blind(&clean, &ch, (0.1, 0.9), &loss, &cfg, &init).is_err()
        );
    }

    #[test]
    fn finetune_zero_epochs_is_identity_and_sets_no_provenance() {
        let (_, noisy) = binary_markov_noisy(500, 0.1, 51);
        let ch = ChannelModel::bsc(0.1).unwrap();
        let loss = LossModel::hamming(2);
        let init = full_model(1, &[8], 53);
        let cfg = TrainingConfig {
            epochs: 0,
            ..Default::default()
        };
        let out = finetune(&init, &Corpus::from_seq(noisy), &ch, &loss, &cfg).unwrap();
        assert_eq!(out.model, init);
    }

    #[test]
    fn finetune_marks_provenance() {
        let (_, noisy) = binary_markov_noisy(2000, 0.1, 55);
        let ch = ChannelModel::bsc(0.1).unwrap();
        let loss = LossModel::hamming(2);
        let init = full_model(1, &[8], 57);
        let cfg = TrainingConfig {
            epochs: 1,
            ..Default::default()
        };
        let out = finetune(&init, &Corpus::from_seq(noisy), &ch, &loss, &cfg).unwrap();
        assert_eq!(out.model.provenance, Provenance::Ft);
    }

    #[test]
    fn reduced_pseudo_training_runs_on_dna() {
        let clean =
            synthetic_sequence(30_000, 4, SourceModel::Markov { stay_prob: 0.85 }, 61).unwrap();
        let ch = ChannelModel::qsc(4, 0.1).unwrap();
        let noisy = Corpus::from_seq(corrupt(&clean, &ch, 63));
        let loss = LossModel::hamming(4);
        let init = MlpModel::he_init(
            &[16, 32, 32, 16],
            Head::Reduced {
                groups: 4,
                group_width: 4,
            },
            ContextKind::OneD { k: 2 },
            4,
            4,
            4,
            65,
        )
        .unwrap();
        let cfg = TrainingConfig {
            epochs: 12,
            ..Default::default()
        };
        let out = train_pseudo(&noisy, &ch, &loss, &cfg, &init).unwrap();
        let recon = ndude_infer_reduced(&out.model, &noisy).unwrap();
        let b = ber(&clean, recon.output.item(0));
        // Must beat leaving the noise in place.
        assert!(b < 0.1, "BER {b}");
    }

    #[test]
    fn vanilla_sl_learns_identity_on_noiseless_pairs() {
        let clean = synthetic_sequence(20_000, 2, SourceModel::Markov { stay_prob: 0.8 }, 71)
            .unwrap();
        let corpus = Corpus::from_seq(clean.clone());
        let pairs = PairStream::Fixed {
            clean: corpus.clone(),
            noisy: corpus.clone(),
        };
        let init = MlpModel::he_init(
            &[6, 16, 2],
            Head::Direct { width: 2 },
            ContextKind::OneD { k: 1 },
            2,
            2,
            2,
            73,
        )
        .unwrap();
        // Input dim: (2k + 1) * |Z| = 6, center included.
        assert_eq!(init.input_dim(), 6);
        let cfg = TrainingConfig {
            epochs: 4,
            ..Default::default()
        };
        let out = train_vanilla_sl(&pairs, &cfg, &init).unwrap();
        let recon = crate::denoiser::sl_infer(&out.model, &corpus).unwrap();
        let b = ber(&clean, recon.output.item(0));
        assert!(b < 0.01, "BER {b}");
    }

    #[test]
    fn make_pairs_covers_every_position() {
        let clean = Corpus::from_seq(vec![0, 1, 1, 0]);
        let noisy = Corpus::from_seq(vec![0, 1, 0, 0]);
        let pairs = make_pairs(&clean, &noisy, ContextKind::OneD { k: 1 }).unwrap();
        assert_eq!(pairs.len(), 4);
        assert_eq!(pairs[2].clean, 1);
        assert_eq!(pairs[2].noisy, 0);
        assert_eq!(pairs[2].window.symbols, vec![Some(1), Some(0)]);
    }

    #[test]
    fn pseudo_rejects_mismatched_model() {
        let ch = ChannelModel::qsc(4, 0.1).unwrap();
        let loss = LossModel::hamming(4);
        let init = full_model(1, &[8], 1); // binary model
        let cfg = TrainingConfig::default();
        let noisy = Corpus::from_seq(vec![0u8, 1, 2, 3]);
        assert!(train_pseudo(&noisy, &ch, &loss, &cfg, &init).is_err());
    }
}
