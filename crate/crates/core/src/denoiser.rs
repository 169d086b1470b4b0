//! Reconstruction rules: the count-based DUDE baseline, Neural DUDE inference
//! for both output heads, and the direct-mapping supervised classifier.
//!
//! All argmax/argmin tie-breaking picks the lowest index, so reconstructions
//! are bit-reproducible given (model, input).

use std::collections::HashMap;

use crate::channel::{pseudo_labels, ChannelModel, LossModel, PseudoLabelSet, SingletDenoiserSet};
use crate::context::{ContextKind, ContextWindow};
use crate::data::Corpus;
use crate::error::{NdudeError, Result};
use crate::nn::{Head, MlpModel};

/// A denoised corpus plus, where applicable, the single-symbol denoiser index
/// applied at each position (`None` for boundary copies and for the
/// direct-mapping classifier).
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub output: Corpus,
    pub singlets: Vec<Vec<Option<usize>>>,
}

/// Accumulated estimated-loss vectors per distinct context.
///
/// For small singlet sets the full |S|-vector `sum_i L(Z_i, .)` is stored per
/// context. Large alphabets (DNA: |S| = 256) instead accumulate the per-z
/// partial rows `sum_i L_z(Z_i, .)`, whose per-z argmin recovers exactly the
/// joint argmin (ties included) at a fraction of the memory.
pub struct ContextLossTable {
    entries: HashMap<Vec<u8>, Entry>,
    form: TableForm,
    s_set: SingletDenoiserSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TableForm {
    Joint,
    PerZ,
}

struct Entry {
    acc: Vec<f64>,
    count: u64,
}

/// Above this |S| the table switches to the decomposed per-z form.
const JOINT_FORM_LIMIT: usize = 64;

impl ContextLossTable {
    /// Pass 1 of DUDE: accumulate the estimated-loss row of every position's
    /// noisy center symbol under its context key. 1D positions without a full
    /// in-bounds window are skipped (they are copied in pass 2); 2D windows
    /// are zero-padded and all positions participate.
    pub fn build(
        noisy: &Corpus,
        plabels: &PseudoLabelSet,
        s_set: SingletDenoiserSet,
        kind: ContextKind,
    ) -> Result<Self> {
        kind.validate()?;
        let form = if s_set.count() <= JOINT_FORM_LIMIT {
            TableForm::Joint
        } else {
            TableForm::PerZ
        };
        let width = match form {
            TableForm::Joint => s_set.count(),
            TableForm::PerZ => s_set.z_size() * s_set.xhat_size(),
        };
        let mut table = ContextLossTable {
            entries: HashMap::new(),
            form,
            s_set,
        };
        let mut window = Vec::with_capacity(kind.window_len());
        let mut key = vec![0u8; kind.window_len()];
        for item in 0..noisy.items() {
            let symbols = noisy.item(item);
            for (pos, &z) in symbols.iter().enumerate() {
                if !has_full_window(noisy, item, pos, kind) {
                    continue;
                }
                noisy.window_into(item, pos, kind, &mut window)?;
                window_key(&window, &mut key);
                if !table.entries.contains_key(key.as_slice()) {
                    table.entries.insert(
                        key.clone(),
                        Entry {
                            acc: vec![0.0; width],
                            count: 0,
                        },
                    );
                }
                let xhat = table.s_set.xhat_size();
                let entry = table.entries.get_mut(key.as_slice()).unwrap();
                entry.count += 1;
                match form {
                    TableForm::Joint => {
                        for (a, l) in entry.acc.iter_mut().zip(plabels.l.row(z as usize)) {
                            *a += l;
                        }
                    }
                    TableForm::PerZ => {
                        for (zi, partial) in plabels.partial_l.iter().enumerate() {
                            let dst = &mut entry.acc[zi * xhat..(zi + 1) * xhat];
                            for (a, l) in dst.iter_mut().zip(partial.row(z as usize)) {
                                *a += l;
                            }
                        }
                    }
                }
            }
        }
        Ok(table)
    }

    pub fn distinct_contexts(&self) -> usize {
        self.entries.len()
    }

    pub fn occurrences(&self, window: &ContextWindow) -> u64 {
        let mut key = vec![0u8; window.symbols.len()];
        window_key(&window.symbols, &mut key);
        self.entries.get(&key).map_or(0, |e| e.count)
    }

    /// The accumulated-loss-minimizing singlet for a context, ties to the
    /// lowest index. `None` for contexts never seen in pass 1.
    pub fn argmin_singlet(&self, window: &ContextWindow) -> Option<usize> {
        let mut key = vec![0u8; window.symbols.len()];
        window_key(&window.symbols, &mut key);
        let entry = self.entries.get(&key)?;
        Some(self.argmin_of(entry))
    }

    fn argmin_of(&self, entry: &Entry) -> usize {
        match self.form {
            TableForm::Joint => argmin(&entry.acc),
            TableForm::PerZ => {
                let xhat = self.s_set.xhat_size();
                let digits: Vec<u8> = (0..self.s_set.z_size())
                    .map(|z| argmin(&entry.acc[z * xhat..(z + 1) * xhat]) as u8)
                    .collect();
                self.s_set.index_of(&digits).expect("digits in range")
            }
        }
    }
}

fn window_key(symbols: &[Option<u8>], key: &mut [u8]) {
    for (k, s) in key.iter_mut().zip(symbols) {
        *k = match s {
            Some(v) => *v,
            None => 0xFF,
        };
    }
}

fn has_full_window(corpus: &Corpus, item: usize, pos: usize, kind: ContextKind) -> bool {
    match kind {
        ContextKind::OneD { k } => {
            let len = corpus.item(item).len();
            pos >= k && pos + k < len
        }
        ContextKind::TwoD { .. } => true,
    }
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Two-pass count-based DUDE in its estimated-loss form: accumulate
/// `L(Z_i, .)` per context, then apply each context's argmin singlet to the
/// center symbol. 1D boundary positions copy the noisy symbol.
pub fn dude_denoise(
    noisy: &Corpus,
    ch: &ChannelModel,
    loss: &LossModel,
    kind: ContextKind,
) -> Result<Reconstruction> {
    noisy.validate_alphabet(ch.z_size())?;
    let s_set = SingletDenoiserSet::new(ch.z_size(), loss.xhat_size())?;
    let plabels = pseudo_labels(ch, loss, &s_set)?;
    let table = ContextLossTable::build(noisy, &plabels, s_set, kind)?;

    let mut out_items = Vec::with_capacity(noisy.items());
    let mut singlets = Vec::with_capacity(noisy.items());
    let mut window = Vec::with_capacity(kind.window_len());
    let mut key = vec![0u8; kind.window_len()];
    for item in 0..noisy.items() {
        let symbols = noisy.item(item);
        let mut out = Vec::with_capacity(symbols.len());
        let mut chosen = Vec::with_capacity(symbols.len());
        for (pos, &z) in symbols.iter().enumerate() {
            if !has_full_window(noisy, item, pos, kind) {
                out.push(z);
                chosen.push(None);
                continue;
            }
            noisy.window_into(item, pos, kind, &mut window)?;
            window_key(&window, &mut key);
            let entry = table
                .entries
                .get(key.as_slice())
                .expect("pass 1 visited every full-window position");
            let s = table.argmin_of(entry);
            out.push(s_set.apply(s, z));
            chosen.push(Some(s));
        }
        out_items.push(out);
        singlets.push(chosen);
    }
    Ok(Reconstruction {
        output: noisy.with_item_data(out_items)?,
        singlets,
    })
}

fn check_model_data(model: &MlpModel, noisy: &Corpus) -> Result<()> {
    noisy.validate_alphabet(model.z_size)?;
    if matches!(model.context_kind, ContextKind::TwoD { .. })
        && matches!(noisy, Corpus::Seqs(_))
    {
        return Err(NdudeError::InvalidParameter(
            "model with 2D contexts cannot denoise sequence data".into(),
        ));
    }
    Ok(())
}

/// The full-head network's singlet choice for one context window
/// (argmax over S, ties to the lowest index).
pub fn full_head_choice(model: &MlpModel, window: &ContextWindow) -> Result<usize> {
    match model.head {
        Head::Full { .. } => {}
        _ => {
            return Err(NdudeError::InvalidParameter(
                "model does not have a full output head".into(),
            ))
        }
    }
    let x = window.encode(model.z_size);
    let (p, _) = model.forward(&x)?;
    Ok(argmax(&p))
}

/// The reduced-head network's per-z mapping for one context window, as a
/// joint singlet index.
pub fn reduced_head_choice(model: &MlpModel, window: &ContextWindow) -> Result<usize> {
    let (groups, width) = match model.head {
        Head::Reduced {
            groups,
            group_width,
        } => (groups, group_width),
        _ => {
            return Err(NdudeError::InvalidParameter(
                "model does not have a reduced output head".into(),
            ))
        }
    };
    let x = window.encode(model.z_size);
    let (p, _) = model.forward(&x)?;
    let digits: Vec<u8> = (0..groups)
        .map(|g| argmax(&p[g * width..(g + 1) * width]) as u8)
        .collect();
    SingletDenoiserSet::new(groups, width)?.index_of(&digits)
}

/// Neural DUDE inference with the full head: per position, apply the argmax
/// singlet of `p(w, C_i)` to the noisy center symbol. All positions use
/// zero-padded windows.
pub fn ndude_infer_full(model: &MlpModel, noisy: &Corpus) -> Result<Reconstruction> {
    let width = match model.head {
        Head::Full { width } => width,
        _ => {
            return Err(NdudeError::InvalidParameter(
                "ndude_infer_full requires a full-head model".into(),
            ))
        }
    };
    let s_set = SingletDenoiserSet::new(model.z_size, model.xhat_size)?;
    if s_set.count() != width {
        return Err(NdudeError::DimensionMismatch(format!(
            "full head width {width} but |Xhat|^|Z| = {}",
            s_set.count()
        )));
    }
    check_model_data(model, noisy)?;
    infer_positions(model, noisy, |probs, z| {
        let s = argmax(probs);
        (s_set.apply(s, z), Some(s))
    })
}

/// Neural DUDE inference with the reduced head: per position, read the
/// softmax group of the observed center symbol and output its argmax.
pub fn ndude_infer_reduced(model: &MlpModel, noisy: &Corpus) -> Result<Reconstruction> {
    let (groups, width) = match model.head {
        Head::Reduced {
            groups,
            group_width,
        } => (groups, group_width),
        _ => {
            return Err(NdudeError::InvalidParameter(
                "ndude_infer_reduced requires a reduced-head model".into(),
            ))
        }
    };
    if groups != model.z_size || width != model.xhat_size {
        return Err(NdudeError::DimensionMismatch(format!(
            "reduced head {groups}x{width} but alphabets are |Z|={}, |Xhat|={}",
            model.z_size, model.xhat_size
        )));
    }
    check_model_data(model, noisy)?;
    let s_set = SingletDenoiserSet::new(groups, width)?;
    infer_positions(model, noisy, |probs, z| {
        let digits: Vec<u8> = (0..groups)
            .map(|g| argmax(&probs[g * width..(g + 1) * width]) as u8)
            .collect();
        let s = s_set.index_of(&digits).expect("digits in range");
        (digits[z as usize], Some(s))
    })
}

/// Direct-mapping classifier inference: the input carries the context and the
/// center symbol; the output argmax is the reconstruction.
pub fn sl_infer(model: &MlpModel, noisy: &Corpus) -> Result<Reconstruction> {
    match model.head {
        Head::Direct { .. } => {}
        _ => {
            return Err(NdudeError::InvalidParameter(
                "sl_infer requires a direct-head model".into(),
            ))
        }
    }
    check_model_data(model, noisy)?;
    let kind = model.context_kind;
    let mut window_buf = Vec::with_capacity(kind.window_len());
    let mut input = vec![0.0; model.input_dim()];
    let mut acts = model.new_activations();

    let mut out_items = Vec::with_capacity(noisy.items());
    let mut singlets = Vec::with_capacity(noisy.items());
    for item in 0..noisy.items() {
        let symbols = noisy.item(item);
        let mut out = Vec::with_capacity(symbols.len());
        for (pos, &z) in symbols.iter().enumerate() {
            noisy.window_into(item, pos, kind, &mut window_buf)?;
            let ctx_len = window_buf.len() * model.z_size;
            encode_window(&window_buf, model.z_size, &mut input[..ctx_len]);
            input[ctx_len..].fill(0.0);
            input[ctx_len + z as usize] = 1.0;
            model.forward_into(&input, &mut acts)?;
            out.push(argmax(acts.probs()) as u8);
        }
        singlets.push(vec![None; symbols.len()]);
        out_items.push(out);
    }
    Ok(Reconstruction {
        output: noisy.with_item_data(out_items)?,
        singlets,
    })
}

fn infer_positions(
    model: &MlpModel,
    noisy: &Corpus,
    mut choose: impl FnMut(&[f64], u8) -> (u8, Option<usize>),
) -> Result<Reconstruction> {
    let kind = model.context_kind;
    let mut window = Vec::with_capacity(kind.window_len());
    let mut input = vec![0.0; model.input_dim()];
    let mut acts = model.new_activations();

    let mut out_items = Vec::with_capacity(noisy.items());
    let mut singlets = Vec::with_capacity(noisy.items());
    for item in 0..noisy.items() {
        let symbols = noisy.item(item);
        let mut out = Vec::with_capacity(symbols.len());
        let mut chosen = Vec::with_capacity(symbols.len());
        for (pos, &z) in symbols.iter().enumerate() {
            noisy.window_into(item, pos, kind, &mut window)?;
            encode_window(&window, model.z_size, &mut input);
            model.forward_into(&input, &mut acts)?;
            let (xhat, s) = choose(acts.probs(), z);
            out.push(xhat);
            chosen.push(s);
        }
        out_items.push(out);
        singlets.push(chosen);
    }
    Ok(Reconstruction {
        output: noisy.with_item_data(out_items)?,
        singlets,
    })
}

pub(crate) fn encode_window(symbols: &[Option<u8>], z_size: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), symbols.len() * z_size);
    out.fill(0.0);
    for (cell, sym) in symbols.iter().enumerate() {
        if let Some(v) = sym {
            out[cell * z_size + *v as usize] = 1.0;
        }
    }
}
