//! A minimal fully-connected network: affine + ReLU hidden layers, a softmax
//! output head, explicit backpropagation, He initialization and Adam. All
//! arithmetic is 64-bit and every random draw comes from an explicit seed, so
//! training runs are reproducible bit-for-bit.

use std::fmt;
use std::path::Path;

use crate::context::ContextKind;
use crate::error::{NdudeError, Result};
use crate::rng::SplitMix64;

/// Floor applied inside `log` so exact-zero probabilities cannot produce
/// infinities.
const LOG_FLOOR: f64 = 1e-12;

/// Output-head layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Head {
    /// One softmax over all |S| single-symbol denoisers.
    Full { width: usize },
    /// |Z| independent softmax groups of |Xhat| outputs each.
    Reduced { groups: usize, group_width: usize },
    /// One softmax over |Xhat|: the direct-mapping (vanilla supervised)
    /// classifier, whose input also carries the center symbol.
    Direct { width: usize },
}

impl Head {
    pub fn output_dim(&self) -> usize {
        match *self {
            Head::Full { width } | Head::Direct { width } => width,
            Head::Reduced {
                groups,
                group_width,
            } => groups * group_width,
        }
    }

    /// Softmax groups as (start, len) spans.
    pub fn group_spans(&self) -> impl Iterator<Item = (usize, usize)> {
        let (count, width) = match *self {
            Head::Full { width } | Head::Direct { width } => (1, width),
            Head::Reduced {
                groups,
                group_width,
            } => (groups, group_width),
        };
        (0..count).map(move |g| (g * width, width))
    }

    /// Whether the network input carries the center symbol's one-hot block.
    pub fn includes_center(&self) -> bool {
        matches!(self, Head::Direct { .. })
    }

    pub fn describe(&self) -> String {
        match *self {
            Head::Full { width } => format!("full:{width}"),
            Head::Reduced {
                groups,
                group_width,
            } => format!("reduced:{groups}:{group_width}"),
            Head::Direct { width } => format!("direct:{width}"),
        }
    }

    pub fn from_spec(spec: &str) -> Result<Self> {
        let bad = || NdudeError::InvalidParameter(format!("bad head spec: {spec}"));
        let mut parts = spec.split(':');
        let kind = parts.next().ok_or_else(bad)?;
        let nums: Vec<usize> = parts
            .map(|p| p.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match (kind, nums.as_slice()) {
            ("full", [w]) => Ok(Head::Full { width: *w }),
            ("reduced", [g, w]) => Ok(Head::Reduced {
                groups: *g,
                group_width: *w,
            }),
            ("direct", [w]) => Ok(Head::Direct { width: *w }),
            _ => Err(bad()),
        }
    }
}

/// How a checkpoint's weights were produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Rand,
    Sup,
    SupBlind,
    Ft,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Rand => "rand",
            Provenance::Sup => "sup",
            Provenance::SupBlind => "sup-blind",
            Provenance::Ft => "ft",
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = NdudeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rand" => Ok(Provenance::Rand),
            "sup" => Ok(Provenance::Sup),
            "sup-blind" => Ok(Provenance::SupBlind),
            "ft" => Ok(Provenance::Ft),
            _ => Err(NdudeError::InvalidParameter(format!(
                "unknown provenance: {s}"
            ))),
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Fully-connected network plus the metadata needed to apply it as a
/// sliding-window denoiser.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    /// Input, hidden..., output widths.
    pub layer_dims: Vec<usize>,
    /// Per layer, row-major `dims[l+1] x dims[l]`.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    pub head: Head,
    pub context_kind: ContextKind,
    pub x_size: usize,
    pub z_size: usize,
    pub xhat_size: usize,
    pub provenance: Provenance,
    pub seed: u64,
}

/// Cached activations from one forward pass: input, post-ReLU hidden layers,
/// and output probabilities.
#[derive(Clone, Debug)]
pub struct Activations {
    layers: Vec<Vec<f64>>,
}

impl Activations {
    pub fn probs(&self) -> &[f64] {
        self.layers.last().unwrap()
    }
}

impl MlpModel {
    /// Expected input width for the given metadata.
    pub fn expected_input_dim(head: &Head, kind: &ContextKind, z_size: usize) -> usize {
        let blocks = kind.window_len() + usize::from(head.includes_center());
        blocks * z_size
    }

    /// He-initialized model: weights `~ Normal(0, 2 / fan_in)`, zero biases,
    /// fully determined by `seed`.
    #[allow(clippy::too_many_arguments)]
    pub fn he_init(
        layer_dims: &[usize],
        head: Head,
        context_kind: ContextKind,
        x_size: usize,
        z_size: usize,
        xhat_size: usize,
        seed: u64,
    ) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(NdudeError::InvalidParameter(format!(
                "a network needs at least input and output dims, got {layer_dims:?}"
            )));
        }
        context_kind.validate()?;
        let expect_in = Self::expected_input_dim(&head, &context_kind, z_size);
        if layer_dims[0] != expect_in {
            return Err(NdudeError::DimensionMismatch(format!(
                "input dim {} but {} context over {z_size} symbols needs {expect_in}",
                layer_dims[0],
                context_kind.describe()
            )));
        }
        if *layer_dims.last().unwrap() != head.output_dim() {
            return Err(NdudeError::DimensionMismatch(format!(
                "output dim {} but head {} needs {}",
                layer_dims.last().unwrap(),
                head.describe(),
                head.output_dim()
            )));
        }
        let mut rng = SplitMix64::new(seed);
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for l in 0..layer_dims.len() - 1 {
            let fan_in = layer_dims[l];
            let std = (2.0 / fan_in as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * layer_dims[l + 1])
                .map(|_| std * rng.next_gaussian())
                .collect();
            weights.push(w);
            biases.push(vec![0.0; layer_dims[l + 1]]);
        }
        Ok(MlpModel {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            head,
            context_kind,
            x_size,
            z_size,
            xhat_size,
            provenance: Provenance::Rand,
            seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    pub fn new_activations(&self) -> Activations {
        Activations {
            layers: self.layer_dims.iter().map(|&d| vec![0.0; d]).collect(),
        }
    }

    /// Forward pass writing into a reusable activation buffer.
    pub fn forward_into(&self, x: &[f64], acts: &mut Activations) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(NdudeError::DimensionMismatch(format!(
                "input has {} values, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        debug_assert_eq!(acts.layers.len(), self.layer_dims.len());
        acts.layers[0].copy_from_slice(x);
        let last = self.layer_count() - 1;
        for l in 0..self.layer_count() {
            let (head_slice, tail_slice) = acts.layers.split_at_mut(l + 1);
            let input = &head_slice[l];
            let out = &mut tail_slice[0];
            affine(&self.weights[l], &self.biases[l], input, out);
            if l < last {
                for v in out.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
        }
        let out = acts.layers.last_mut().unwrap();
        for (start, len) in self.head.group_spans() {
            softmax_in_place(&mut out[start..start + len]);
        }
        Ok(())
    }

    /// Forward pass returning output probabilities and cached activations.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Activations)> {
        let mut acts = self.new_activations();
        self.forward_into(x, &mut acts)?;
        Ok((acts.probs().to_vec(), acts))
    }

    // Flat parameter view (weights then bias, per layer) used by the
    // finite-difference oracle in tests.

    pub fn param_len(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn param(&self, mut idx: usize) -> f64 {
        for l in 0..self.layer_count() {
            if idx < self.weights[l].len() {
                return self.weights[l][idx];
            }
            idx -= self.weights[l].len();
            if idx < self.biases[l].len() {
                return self.biases[l][idx];
            }
            idx -= self.biases[l].len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut idx: usize, value: f64) {
        for l in 0..self.layer_count() {
            if idx < self.weights[l].len() {
                self.weights[l][idx] = value;
                return;
            }
            idx -= self.weights[l].len();
            if idx < self.biases[l].len() {
                self.biases[l][idx] = value;
                return;
            }
            idx -= self.biases[l].len();
        }
        panic!("parameter index out of range");
    }

    /// Raw mutable access for hand-built models in tests.
    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        (&mut self.weights[l], &mut self.biases[l])
    }

    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        (&self.weights[l], &self.biases[l])
    }
}

#[inline]
fn affine(weights: &[f64], bias: &[f64], input: &[f64], out: &mut [f64]) {
    let in_dim = input.len();
    debug_assert_eq!(weights.len(), in_dim * out.len());
    for (o, (row, b)) in weights.chunks_exact(in_dim).zip(bias).enumerate() {
        let mut acc = *b;
        for (w, x) in row.iter().zip(input) {
            acc += w * x;
        }
        out[o] = acc;
    }
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    let inv = 1.0 / sum;
    for x in v.iter_mut() {
        *x *= inv;
    }
}

/// Soft-target cross entropy `C(g, p) = -sum_i g_i log p_i`. The target need
/// not be normalized, only non-negative; probabilities are floored at 1e-12
/// inside the log.
pub fn soft_cross_entropy(g: &[f64], p: &[f64]) -> Result<f64> {
    if g.len() != p.len() {
        return Err(NdudeError::DimensionMismatch(format!(
            "target has {} entries, output has {}",
            g.len(),
            p.len()
        )));
    }
    let mut acc = 0.0;
    for (&gi, &pi) in g.iter().zip(p) {
        if gi < 0.0 {
            return Err(NdudeError::InvalidTarget(format!(
                "negative target entry {gi}"
            )));
        }
        if gi != 0.0 {
            acc -= gi * pi.max(LOG_FLOOR).ln();
        }
    }
    Ok(acc)
}

/// Parameter gradients with the same shapes as the model.
#[derive(Clone, Debug)]
pub struct Gradients {
    w: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_of(model: &MlpModel) -> Self {
        Gradients {
            w: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            b: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn reset(&mut self) {
        for w in &mut self.w {
            w.fill(0.0);
        }
        for b in &mut self.b {
            b.fill(0.0);
        }
    }

    pub fn param(&self, mut idx: usize) -> f64 {
        for l in 0..self.w.len() {
            if idx < self.w[l].len() {
                return self.w[l][idx];
            }
            idx -= self.w[l].len();
            if idx < self.b[l].len() {
                return self.b[l][idx];
            }
            idx -= self.b[l].len();
        }
        panic!("parameter index out of range");
    }

    pub fn max_abs(&self) -> f64 {
        self.w
            .iter()
            .chain(self.b.iter())
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, &v| m.max(v.abs()))
    }
}

/// Accumulates (`+=`) the exact gradients of [`soft_cross_entropy`] with
/// respect to every parameter, reusing the forward cache. The output-layer
/// gradient of a softmax group is `p * sum(g) - g`.
pub fn backward(
    model: &MlpModel,
    acts: &Activations,
    g: &[f64],
    grads: &mut Gradients,
) -> Result<()> {
    if g.len() != model.output_dim() {
        return Err(NdudeError::DimensionMismatch(format!(
            "target has {} entries, output has {}",
            g.len(),
            model.output_dim()
        )));
    }
    let probs = acts.probs();
    let mut delta: Vec<f64> = vec![0.0; model.output_dim()];
    for (start, len) in model.head.group_spans() {
        let gsum: f64 = g[start..start + len].iter().sum();
        for j in start..start + len {
            delta[j] = probs[j] * gsum - g[j];
        }
    }

    for l in (0..model.layer_count()).rev() {
        let input = &acts.layers[l];
        // dW[o][i] += delta[o] * input[i]; db[o] += delta[o].
        let in_dim = input.len();
        for (o, &d) in delta.iter().enumerate() {
            grads.b[l][o] += d;
            if d == 0.0 {
                continue;
            }
            let row = &mut grads.w[l][o * in_dim..(o + 1) * in_dim];
            for (gw, &x) in row.iter_mut().zip(input) {
                *gw += d * x;
            }
        }
        if l == 0 {
            break;
        }
        // delta_prev = W^T delta, masked by ReLU activity.
        let mut prev = vec![0.0; in_dim];
        for (o, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &model.weights[l][o * in_dim..(o + 1) * in_dim];
            for (p, &w) in prev.iter_mut().zip(row) {
                *p += d * w;
            }
        }
        for (p, &h) in prev.iter_mut().zip(input) {
            if h <= 0.0 {
                *p = 0.0;
            }
        }
        delta = prev;
    }
    Ok(())
}

/// Adam optimizer state (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
#[derive(Clone, Debug)]
pub struct AdamState {
    m_w: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
    step: u64,
    pub learning_rate: f64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(model: &MlpModel, learning_rate: f64) -> Self {
        AdamState {
            m_w: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            v_w: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            m_b: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            v_b: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            step: 0,
            learning_rate,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update from gradients accumulated (summed) over a mini-batch of
/// `batch_size` examples.
pub fn adam_step(
    model: &mut MlpModel,
    state: &mut AdamState,
    grads: &Gradients,
    batch_size: usize,
) {
    assert!(batch_size > 0);
    state.step += 1;
    let scale = 1.0 / batch_size as f64;
    let bc1 = 1.0 - BETA1.powi(state.step as i32);
    let bc2 = 1.0 - BETA2.powi(state.step as i32);
    let lr = state.learning_rate;
    for l in 0..model.weights.len() {
        update_slice(
            &mut model.weights[l],
            &grads.w[l],
            &mut state.m_w[l],
            &mut state.v_w[l],
            scale,
            lr,
            bc1,
            bc2,
        );
        update_slice(
            &mut model.biases[l],
            &grads.b[l],
            &mut state.m_b[l],
            &mut state.v_b[l],
            scale,
            lr,
            bc1,
            bc2,
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn update_slice(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    scale: f64,
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i] * scale;
        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g;
        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

// ---------------------------------------------------------------------------
// Checkpoint format: a self-describing text document. Weights are written
// with 17 significant digits so parsed values round-trip bit-exactly.

const MAGIC: &str = "ndude-model";
const FORMAT_VERSION: u32 = 1;

impl MlpModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("{MAGIC} v{FORMAT_VERSION}\n"));
        out.push_str(&format!("head {}\n", self.head.describe()));
        out.push_str(&format!("context {}\n", self.context_kind.describe()));
        out.push_str(&format!(
            "alphabet {} {} {}\n",
            self.x_size, self.z_size, self.xhat_size
        ));
        out.push_str(&format!("provenance {}\n", self.provenance));
        out.push_str(&format!("seed {}\n", self.seed));
        let dims: Vec<String> = self.layer_dims.iter().map(|d| d.to_string()).collect();
        out.push_str(&format!("dims {}\n", dims.join(" ")));
        for l in 0..self.layer_count() {
            out.push_str(&format!("layer {l}\n"));
            let in_dim = self.layer_dims[l];
            for row in self.weights[l].chunks_exact(in_dim) {
                push_float_line(&mut out, "w", row);
            }
            push_float_line(&mut out, "b", &self.biases[l]);
        }
        out.push_str("end\n");
        std::fs::write(path, out).map_err(|e| NdudeError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| NdudeError::io(path, e))?;
        let bad = |msg: &str| NdudeError::format(path, msg);
        let mut lines = text.lines();

        let header = lines.next().ok_or_else(|| bad("empty file"))?;
        let (magic, version) = header
            .split_once(' ')
            .ok_or_else(|| bad("malformed header"))?;
        if magic != MAGIC {
            return Err(bad(&format!("bad magic string: {magic}")));
        }
        let version: u32 = version
            .strip_prefix('v')
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("malformed version"))?;
        if version != FORMAT_VERSION {
            return Err(bad(&format!(
                "unsupported checkpoint version {version}, expected {FORMAT_VERSION}"
            )));
        }

        let mut field = |name: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| bad(&format!("missing {name} line")))?;
            line.strip_prefix(name)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| bad(&format!("expected `{name} ...`, got `{line}`")))
        };

        let head = Head::from_spec(&field("head")?)?;
        let context_kind = ContextKind::from_spec(&field("context")?)?;
        let alphabet = field("alphabet")?;
        let sizes: Vec<usize> = alphabet
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("bad alphabet line"))?;
        if sizes.len() != 3 {
            return Err(bad("alphabet line needs |X| |Z| |Xhat|"));
        }
        let provenance: Provenance = field("provenance")?.parse()?;
        let seed: u64 = field("seed")?.parse().map_err(|_| bad("bad seed"))?;
        let dims: Vec<usize> = field("dims")?
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("bad dims line"))?;
        if dims.len() < 2 {
            return Err(bad("dims must list at least input and output"));
        }

        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            let marker = lines.next().ok_or_else(|| bad("truncated file"))?;
            if marker != format!("layer {l}") {
                return Err(bad(&format!("expected `layer {l}`, got `{marker}`")));
            }
            let mut w = Vec::with_capacity(dims[l] * dims[l + 1]);
            for _ in 0..dims[l + 1] {
                let row = parse_float_line(lines.next(), "w", dims[l], path)?;
                w.extend_from_slice(&row);
            }
            weights.push(w);
            biases.push(parse_float_line(lines.next(), "b", dims[l + 1], path)?);
        }
        if lines.next() != Some("end") {
            return Err(bad("missing end marker"));
        }

        let model = MlpModel {
            layer_dims: dims,
            weights,
            biases,
            head,
            context_kind,
            x_size: sizes[0],
            z_size: sizes[1],
            xhat_size: sizes[2],
            provenance,
            seed,
        };
        let expect_in = Self::expected_input_dim(&model.head, &model.context_kind, model.z_size);
        if model.input_dim() != expect_in || model.output_dim() != model.head.output_dim() {
            return Err(bad("layer dims inconsistent with head/context metadata"));
        }
        Ok(model)
    }
}

fn push_float_line(out: &mut String, tag: &str, values: &[f64]) {
    out.push_str(tag);
    for v in values {
        out.push(' ');
        out.push_str(&format!("{v:.16e}"));
    }
    out.push('\n');
}

fn parse_float_line(
    line: Option<&str>,
    tag: &str,
    expect: usize,
    path: &Path,
) -> Result<Vec<f64>> {
    let line = line.ok_or_else(|| NdudeError::format(path, "truncated file"))?;
    let rest = line
        .strip_prefix(tag)
        .ok_or_else(|| NdudeError::format(path, format!("expected `{tag} ...`, got `{line}`")))?;
    let values: Vec<f64> = rest
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| NdudeError::format(path, format!("bad float in `{line}`")))?;
    if values.len() != expect {
        return Err(NdudeError::format(
            path,
            format!("line has {} values, expected {expect}", values.len()),
        ));
    }
    Ok(values)
}
