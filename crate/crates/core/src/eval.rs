//! Error-rate metrics, scheme sweeps over the window size, and CSV reports.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use crate::channel::{ChannelModel, LossModel};
use crate::context::ContextKind;
use crate::data::{corrupt_corpus, Corpus};
use crate::denoiser::{dude_denoise, ndude_infer_full, ndude_infer_reduced, sl_infer, Reconstruction};
use crate::error::{NdudeError, Result};
use crate::nn::{Head, MlpModel};
use crate::rng::derive_seed;
use crate::training::{
    finetune, train_pseudo, train_supervised, train_supervised_blind, train_vanilla_sl,
    PairStream, TrainingConfig,
};

/// One evaluated (scheme, dataset, k, seed) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub scheme: String,
    pub dataset: String,
    pub delta: Option<f64>,
    pub k: usize,
    pub ber: f64,
    pub ber_over_delta: Option<f64>,
    pub n: u64,
    pub seed: u64,
    pub wall_seconds: f64,
}

impl EvalRecord {
    /// Builds a record from exact mismatch counts; `ber` is the one float
    /// division `mismatches / n`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_counts(
        scheme: impl Into<String>,
        dataset: impl Into<String>,
        delta: Option<f64>,
        k: usize,
        mismatches: u64,
        n: u64,
        seed: u64,
        wall_seconds: f64,
    ) -> Self {
        let ber = mismatches as f64 / n as f64;
        EvalRecord {
            scheme: scheme.into(),
            dataset: dataset.into(),
            delta,
            k,
            ber,
            ber_over_delta: delta.filter(|&d| d > 0.0).map(|d| ber / d),
            n,
            seed,
            wall_seconds,
        }
    }
}

/// Average per-symbol loss `(1/n) sum Lambda(x_i, xhat_i)`; with Hamming loss
/// this is the bit/base error rate.
pub fn average_loss(clean: &[u8], denoised: &[u8], loss: &LossModel) -> Result<f64> {
    if clean.len() != denoised.len() {
        return Err(NdudeError::DimensionMismatch(format!(
            "clean has {} symbols, denoised has {}",
            clean.len(),
            denoised.len()
        )));
    }
    if clean.is_empty() {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for (&x, &xh) in clean.iter().zip(denoised) {
        acc += loss.get(x as usize, xh as usize);
    }
    Ok(acc / clean.len() as f64)
}

/// Exact Hamming mismatch count over all items of two same-shaped corpora.
pub fn count_mismatches(clean: &Corpus, denoised: &Corpus) -> Result<(u64, u64)> {
    if clean.items() != denoised.items() {
        return Err(NdudeError::DimensionMismatch(
            "corpora have different item counts".into(),
        ));
    }
    let mut mismatches = 0u64;
    let mut total = 0u64;
    for i in 0..clean.items() {
        let (a, b) = (clean.item(i), denoised.item(i));
        if a.len() != b.len() {
            return Err(NdudeError::DimensionMismatch(format!(
                "item {i} lengths differ: {} vs {}",
                a.len(),
                b.len()
            )));
        }
        mismatches += a.iter().zip(b).filter(|(x, y)| x != y).count() as u64;
        total += a.len() as u64;
    }
    Ok((mismatches, total))
}

/// The denoising schemes a sweep can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scheme {
    Dude,
    NdudeRand,
    NdudeSup,
    NdudeSupFt,
    NdudeBlind,
    NdudeBlindFt,
    Sl,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::Dude,
        Scheme::NdudeRand,
        Scheme::NdudeSup,
        Scheme::NdudeSupFt,
        Scheme::NdudeBlind,
        Scheme::NdudeBlindFt,
        Scheme::Sl,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Dude => "dude",
            Scheme::NdudeRand => "ndude-rand",
            Scheme::NdudeSup => "ndude-sup",
            Scheme::NdudeSupFt => "ndude-sup-ft",
            Scheme::NdudeBlind => "ndude-blind",
            Scheme::NdudeBlindFt => "ndude-blind-ft",
            Scheme::Sl => "sl",
        }
    }

    pub fn needs_training_corpus(&self) -> bool {
        matches!(
            self,
            Scheme::NdudeSup
                | Scheme::NdudeSupFt
                | Scheme::NdudeBlind
                | Scheme::NdudeBlindFt
                | Scheme::Sl
        )
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = NdudeError;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .iter()
            .find(|sch| sch.as_str() == s)
            .copied()
            .ok_or_else(|| NdudeError::InvalidParameter(format!("unknown scheme: {s}")))
    }
}

/// Everything a sweep needs: data, channel, model shape, and training
/// budgets. `ks` holds k (1D) or ell (2D) values.
#[derive(Clone)]
pub struct SweepSpec {
    pub schemes: Vec<Scheme>,
    pub ks: Vec<usize>,
    pub seeds: Vec<u64>,
    pub channel: ChannelModel,
    pub loss: LossModel,
    pub two_d: bool,
    pub dataset: String,
    pub test_clean: Corpus,
    pub train_clean: Option<Corpus>,
    pub blind_range: Option<(f64, f64)>,
    /// Use the reduced output head for neural schemes.
    pub reduced_head: bool,
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub ft_learning_rate: f64,
    pub sup_epochs: usize,
    pub adaptive_epochs: usize,
    /// Record real wall times in the report (off keeps reports byte-stable).
    pub timings: bool,
}

/// One sweep cell outcome: a record on success, an error string otherwise.
#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub scheme: Scheme,
    pub dataset: String,
    pub delta: Option<f64>,
    pub k: usize,
    pub seed: u64,
    pub record: Option<EvalRecord>,
    pub error: Option<String>,
}

/// Runs every (scheme, k, seed) cell of the spec. `jobs` bounds the worker
/// threads; results come back in deterministic (scheme, k, seed) order.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Vec<SweepOutcome> {
    let mut cells = Vec::new();
    for &scheme in &spec.schemes {
        for &k in &spec.ks {
            for &seed in &spec.seeds {
                cells.push((scheme, k, seed));
            }
        }
    }

    let run_one = |&(scheme, k, seed): &(Scheme, usize, u64)| -> SweepOutcome {
        let started = Instant::now();
        let result = run_cell(spec, scheme, k, seed);
        let wall = started.elapsed().as_secs_f64();
        match result {
            Ok((mismatches, n)) => {
                let record = EvalRecord::from_counts(
                    scheme.as_str(),
                    spec.dataset.clone(),
                    spec.channel.delta(),
                    k,
                    mismatches,
                    n,
                    seed,
                    if spec.timings { wall } else { 0.0 },
                );
                SweepOutcome {
                    scheme,
                    dataset: spec.dataset.clone(),
                    delta: spec.channel.delta(),
                    k,
                    seed,
                    record: Some(record),
                    error: None,
                }
            }
            Err(e) => SweepOutcome {
                scheme,
                dataset: spec.dataset.clone(),
                delta: spec.channel.delta(),
                k,
                seed,
                record: None,
                error: Some(e.to_string()),
            },
        }
    };

    if jobs <= 1 {
        cells.iter().map(run_one).collect()
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let mut slots: Vec<Option<SweepOutcome>> = vec![None; cells.len()];
        let slot_refs: Vec<std::sync::Mutex<&mut Option<SweepOutcome>>> =
            slots.iter_mut().map(std::sync::Mutex::new).collect();
        std::thread::scope(|scope| {
            for _ in 0..jobs.min(cells.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= cells.len() {
                        break;
                    }
                    let outcome = run_one(&cells[i]);
                    **slot_refs[i].lock().unwrap() = Some(outcome);
                });
            }
        });
        drop(slot_refs);
        slots.into_iter().map(Option::unwrap).collect()
    }
}

fn context_kind(spec: &SweepSpec, k: usize) -> ContextKind {
    if spec.two_d {
        ContextKind::TwoD { ell: k }
    } else {
        ContextKind::OneD { k }
    }
}

fn neural_model(spec: &SweepSpec, kind: ContextKind, head: Head, seed: u64) -> Result<MlpModel> {
    let x = spec.channel.x_size();
    let z = spec.channel.z_size();
    let xhat = spec.loss.xhat_size();
    let mut dims = vec![MlpModel::expected_input_dim(&head, &kind, z)];
    dims.extend_from_slice(&spec.hidden);
    dims.push(head.output_dim());
    MlpModel::he_init(&dims, head, kind, x, z, xhat, seed)
}

fn ndude_head(spec: &SweepSpec) -> Result<Head> {
    let z = spec.channel.z_size();
    let xhat = spec.loss.xhat_size();
    if spec.reduced_head {
        Ok(Head::Reduced {
            groups: z,
            group_width: xhat,
        })
    } else {
        let s = crate::channel::SingletDenoiserSet::new(z, xhat)?;
        Ok(Head::Full { width: s.count() })
    }
}

fn infer(model: &MlpModel, noisy: &Corpus) -> Result<Reconstruction> {
    match model.head {
        Head::Full { .. } => ndude_infer_full(model, noisy),
        Head::Reduced { .. } => ndude_infer_reduced(model, noisy),
        Head::Direct { .. } => sl_infer(model, noisy),
    }
}

fn run_cell(spec: &SweepSpec, scheme: Scheme, k: usize, seed: u64) -> Result<(u64, u64)> {
    let kind = context_kind(spec, k);
    kind.validate()?;
    let noisy_test = corrupt_corpus(&spec.test_clean, &spec.channel, derive_seed(seed, 0xDA7A))?;

    if scheme.needs_training_corpus() && spec.train_clean.is_none() {
        return Err(NdudeError::InvalidParameter(format!(
            "scheme {scheme} needs a training corpus"
        )));
    }

    let adaptive_cfg = TrainingConfig {
        epochs: spec.adaptive_epochs,
        batch_size: spec.batch_size,
        learning_rate: spec.learning_rate,
        seed: derive_seed(seed, 0xADA),
        ..Default::default()
    };
    let ft_cfg = TrainingConfig {
        epochs: spec.adaptive_epochs,
        batch_size: spec.batch_size,
        learning_rate: spec.ft_learning_rate,
        seed: derive_seed(seed, 0xF7),
        ..Default::default()
    };
    let sup_cfg = TrainingConfig {
        epochs: spec.sup_epochs,
        batch_size: spec.batch_size,
        learning_rate: spec.learning_rate,
        seed: derive_seed(seed, 0x5B),
        ..Default::default()
    };

    let recon = match scheme {
        Scheme::Dude => dude_denoise(&noisy_test, &spec.channel, &spec.loss, kind)?,
        Scheme::NdudeRand => {
            let init = neural_model(spec, kind, ndude_head(spec)?, derive_seed(seed, 0x171))?;
            let out = train_pseudo(&noisy_test, &spec.channel, &spec.loss, &adaptive_cfg, &init)?;
            infer(&out.model, &noisy_test)?
        }
        Scheme::NdudeSup | Scheme::NdudeSupFt => {
            let train = spec.train_clean.as_ref().unwrap();
            let init = neural_model(spec, kind, ndude_head(spec)?, derive_seed(seed, 0x171))?;
            let pairs = PairStream::Regen {
                clean: train.clone(),
                channel: spec.channel.clone(),
            };
            let sup = train_supervised(&pairs, &spec.loss, &sup_cfg, &init)?;
            let model = if scheme == Scheme::NdudeSupFt {
                finetune(&sup.model, &noisy_test, &spec.channel, &spec.loss, &ft_cfg)?.model
            } else {
                sup.model
            };
            infer(&model, &noisy_test)?
        }
        Scheme::NdudeBlind | Scheme::NdudeBlindFt => {
            let train = spec.train_clean.as_ref().unwrap();
            let range = spec.blind_range.ok_or_else(|| {
                NdudeError::InvalidParameter("blind schemes need a delta range".into())
            })?;
            let init = neural_model(spec, kind, ndude_head(spec)?, derive_seed(seed, 0x171))?;
            let blind =
                train_supervised_blind(train, &spec.channel, range, &spec.loss, &sup_cfg, &init)?;
            let model = if scheme == Scheme::NdudeBlindFt {
                finetune(&blind.model, &noisy_test, &spec.channel, &spec.loss, &ft_cfg)?.model
            } else {
                blind.model
            };
            infer(&model, &noisy_test)?
        }
        Scheme::Sl => {
            let train = spec.train_clean.as_ref().unwrap();
            let head = Head::Direct {
                width: spec.loss.xhat_size(),
            };
            let init = neural_model(spec, kind, head, derive_seed(seed, 0x171))?;
            let pairs = PairStream::Regen {
                clean: train.clone(),
                channel: spec.channel.clone(),
            };
            let out = train_vanilla_sl(&pairs, &sup_cfg, &init)?;
            infer(&out.model, &noisy_test)?
        }
    };
    count_mismatches(&spec.test_clean, &recon.output)
}

// ---------------------------------------------------------------------------
// Reports

/// Formats with 6 significant digits, plain decimal where reasonable
/// (printf `%.6g` behavior, without trailing zeros).
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let formatted = format!("{x:.5e}");
    // "d.dddddena" -> mantissa, exponent.
    let (mantissa, exp) = formatted.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("numeric exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let plain = format!("{x:.decimals$}");
        if plain.contains('.') {
            plain.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            plain
        }
    } else {
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{exp}")
    }
}

pub const REPORT_HEADER: &str = "scheme,dataset,delta,k,ber,ber_over_delta,n,seed,wall_seconds";

/// One CSV data row (with trailing newline) in report column order.
pub fn record_csv_line(r: &EvalRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}\n",
        r.scheme,
        r.dataset,
        r.delta.map(format_sig6).unwrap_or_default(),
        r.k,
        format_sig6(r.ber),
        r.ber_over_delta.map(format_sig6).unwrap_or_default(),
        r.n,
        r.seed,
        format_sig6(r.wall_seconds),
    )
}

/// Writes the report CSV: records sorted by (scheme, dataset, delta, k,
/// seed), then a best-k summary comment block per (scheme, dataset, delta)
/// group chosen by minimum BER.
pub fn write_report(records: &[EvalRecord], path: &Path) -> Result<()> {
    let mut sorted: Vec<&EvalRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.scheme, &a.dataset)
            .cmp(&(&b.scheme, &b.dataset))
            .then(a.delta.partial_cmp(&b.delta).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.k.cmp(&b.k))
            .then(a.seed.cmp(&b.seed))
    });
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in &sorted {
        out.push_str(&record_csv_line(r));
    }
    for line in best_k_lines(&sorted) {
        out.push_str(&line);
    }
    std::fs::write(path, out).map_err(|e| NdudeError::io(path, e))
}

fn best_k_lines(sorted: &[&EvalRecord]) -> Vec<String> {
    let mut lines = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let group_key = |r: &EvalRecord| (r.scheme.clone(), r.dataset.clone(), r.delta);
        let key = group_key(sorted[i]);
        let mut best = sorted[i];
        let mut j = i;
        while j < sorted.len() && group_key(sorted[j]) == key {
            if sorted[j].ber < best.ber {
                best = sorted[j];
            }
            j += 1;
        }
        lines.push(format!(
            "# best_k scheme={} dataset={} delta={} k={} ber={}\n",
            best.scheme,
            best.dataset,
            best.delta.map(format_sig6).unwrap_or_default(),
            best.k,
            format_sig6(best.ber),
        ));
        i = j;
    }
    lines
}

/// Parses a report back; comment lines are skipped.
pub fn read_report(path: &Path) -> Result<Vec<EvalRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| NdudeError::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != REPORT_HEADER {
                return Err(NdudeError::format(path, "unexpected report header"));
            }
            continue;
        }
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(NdudeError::format(
                path,
                format!("line {} has {} fields, expected 9", i + 1, fields.len()),
            ));
        }
        let parse_f = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>()
                    .map(Some)
                    .map_err(|_| NdudeError::format(path, format!("bad float: {s}")))
            }
        };
        let bad = |what: &str| NdudeError::format(path, format!("bad {what} on line {}", i + 1));
        records.push(EvalRecord {
            scheme: fields[0].to_string(),
            dataset: fields[1].to_string(),
            delta: parse_f(fields[2])?,
            k: fields[3].parse().map_err(|_| bad("k"))?,
            ber: parse_f(fields[4])?.ok_or_else(|| bad("ber"))?,
            ber_over_delta: parse_f(fields[5])?,
            n: fields[6].parse().map_err(|_| bad("n"))?,
            seed: fields[7].parse().map_err(|_| bad("seed"))?,
            wall_seconds: parse_f(fields[8])?.unwrap_or(0.0),
        });
    }
    Ok(records)
}

/// Sweep CSV: the report columns plus an `error` column (empty on success).
pub fn write_sweep_csv(outcomes: &[SweepOutcome], path: &Path) -> Result<()> {
    let mut out = String::from(REPORT_HEADER);
    out.push_str(",error\n");
    for o in outcomes {
        match (&o.record, &o.error) {
            (Some(r), None) => {
                let mut line = record_csv_line(r);
                line.pop();
                out.push_str(&line);
                out.push_str(",\n");
            }
            (_, Some(err)) => {
                out.push_str(&format!(
                    "{},{},{},{},,,,{},,{}\n",
                    o.scheme,
                    o.dataset,
                    o.delta.map(format_sig6).unwrap_or_default(),
                    o.k,
                    o.seed,
                    err.replace(',', ";"),
                ));
            }
            _ => unreachable!("outcome has either a record or an error"),
        }
    }
    std::fs::write(path, out).map_err(|e| NdudeError::io(path, e))
}

/// Two-column `k ber` data file for external plotting, one per scheme.
pub fn write_plot_data(records: &[EvalRecord], scheme: &str, path: &Path) -> Result<()> {
    let mut rows: Vec<(usize, f64)> = records
        .iter()
        .filter(|r| r.scheme == scheme)
        .map(|r| (r.k, r.ber))
        .collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out = String::new();
    for (k, ber) in rows {
        out.push_str(&format!("{k} {}\n", format_sig6(ber)));
    }
    std::fs::write(path, out).map_err(|e| NdudeError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthetic_sequence, SourceModel};

    #[test]
    fn average_loss_examples() {
        let loss = LossModel::hamming(2);
        assert_eq!(average_loss(&[0, 1, 0], &[0, 1, 0], &loss).unwrap(), 0.0);
        assert_eq!(
            average_loss(&[0, 0, 0, 0], &[0, 1, 0, 1], &loss).unwrap(),
            0.5
        );
        // Hamming loss is symmetric in its arguments.
        let (a, b) = ([0u8, 1, 1, 0, 1], [1u8, 1, 0, 0, 1]);
        assert_eq!(
            average_loss(&a, &b, &loss).unwrap(),
            average_loss(&b, &a, &loss).unwrap()
        );
        assert!(average_loss(&[0], &[0, 1], &loss).is_err());
    }

    #[test]
    fn average_loss_tracks_channel_rate() {
        let ch = ChannelModel::bsc(0.1).unwrap();
        let loss = LossModel::hamming(2);
        let clean = vec![0u8; 500_000];
        let noisy = crate::data::corrupt(&clean, &ch, 77);
        let l = average_loss(&clean, &noisy, &loss).unwrap();
        assert!((l - 0.1).abs() < 0.002, "observed {l}");
    }

    #[test]
    fn format_sig6_cases() {
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(0.1), "0.1");
        assert_eq!(format_sig6(0.0333333333), "0.0333333");
        assert_eq!(format_sig6(123456.0), "123456");
        assert_eq!(format_sig6(123450.0), "123450");
        assert_eq!(format_sig6(1234567.0), "1.23457e6");
        assert_eq!(format_sig6(0.0001), "0.0001");
        assert_eq!(format_sig6(0.00001), "1e-5");
        assert_eq!(format_sig6(-0.25), "-0.25");
    }

    #[test]
    fn report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        let records = vec![
            EvalRecord::from_counts("dude", "set1", Some(0.1), 4, 512, 10_000, 1, 0.0),
            EvalRecord::from_counts("dude", "set1", Some(0.1), 2, 700, 10_000, 1, 0.0),
            EvalRecord::from_counts("ndude-rand", "set1", Some(0.1), 4, 430, 10_000, 1, 0.0),
        ];
        write_report(&records, &path).unwrap();
        let back = read_report(&path).unwrap();
        assert_eq!(back.len(), 3);
        // Sorted by scheme then k.
        assert_eq!(back[0].k, 2);
        assert_eq!(back[1].k, 4);
        assert_eq!(back[2].scheme, "ndude-rand");
        assert!((back[0].ber - 0.07).abs() < 1e-9);
        assert_eq!(back[0].ber_over_delta, Some(0.7));

        // Deterministic bytes.
        let bytes1 = std::fs::read(&path).unwrap();
        write_report(&records, &path).unwrap();
        assert_eq!(bytes1, std::fs::read(&path).unwrap());

        // Best-k block present.
        let text = String::from_utf8(bytes1).unwrap();
        assert!(text.contains("# best_k scheme=dude dataset=set1 delta=0.1 k=4"));
    }

    #[test]
    fn empty_report_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        write_report(&[], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{REPORT_HEADER}\n"));
        assert!(read_report(&path).unwrap().is_empty());
    }

    #[test]
    fn record_exact_counts() {
        let r = EvalRecord::from_counts("dude", "d", Some(0.1), 1, 1, 3, 0, 0.0);
        assert_eq!(r.ber, 1.0 / 3.0);
        let r0 = EvalRecord::from_counts("dude", "d", None, 1, 1, 3, 0, 0.0);
        assert_eq!(r0.ber_over_delta, None);
    }

    fn tiny_spec(schemes: Vec<Scheme>, ks: Vec<usize>) -> SweepSpec {
        let clean = synthetic_sequence(4000, 2, SourceModel::Markov { stay_prob: 0.9 }, 5)
            .unwrap();
        let train = synthetic_sequence(4000, 2, SourceModel::Markov { stay_prob: 0.9 }, 6)
            .unwrap();
        SweepSpec {
            schemes,
            ks,
            seeds: vec![1],
            channel: ChannelModel::bsc(0.1).unwrap(),
            loss: LossModel::hamming(2),
            two_d: false,
            dataset: "tiny".into(),
            test_clean: Corpus::from_seq(clean),
            train_clean: Some(Corpus::from_seq(train)),
            blind_range: Some((0.05, 0.25)),
            reduced_head: false,
            hidden: vec![8],
            batch_size: 256,
            learning_rate: 1e-3,
            ft_learning_rate: 1e-3,
            sup_epochs: 2,
            adaptive_epochs: 2,
            timings: false,
        }
    }

    #[test]
    fn sweep_runs_all_schemes() {
        let spec = tiny_spec(Scheme::ALL.to_vec(), vec![1]);
        let outcomes = run_sweep(&spec, 1);
        assert_eq!(outcomes.len(), 7);
        for o in &outcomes {
            assert!(o.error.is_none(), "{:?} failed: {:?}", o.scheme, o.error);
            let r = o.record.as_ref().unwrap();
            assert!(r.ber >= 0.0 && r.ber <= 1.0);
            assert_eq!(r.n, 4000);
        }
    }

    #[test]
    fn sweep_empty_k_list_gives_empty_output() {
        let spec = tiny_spec(vec![Scheme::Dude], vec![]);
        assert!(run_sweep(&spec, 1).is_empty());
    }

    #[test]
    fn sweep_missing_train_corpus_is_cell_error() {
        let mut spec = tiny_spec(vec![Scheme::NdudeSup], vec![1]);
        spec.train_clean = None;
        let outcomes = run_sweep(&spec, 1);
        assert_eq!(outcomes.len(), 1);
        assert!(outcomes[0].error.is_some());
        assert!(outcomes[0].record.is_none());
    }

    #[test]
    fn sweep_deterministic_across_runs_and_jobs() {
        let spec = tiny_spec(vec![Scheme::Dude, Scheme::NdudeRand], vec![1, 2]);
        let a = run_sweep(&spec, 1);
        let b = run_sweep(&spec, 2);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.record.as_ref().unwrap(), y.record.as_ref().unwrap());
        }
    }

    #[test]
    fn sweep_csv_has_error_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let mut spec = tiny_spec(vec![Scheme::Dude, Scheme::NdudeSup], vec![1]);
        spec.train_clean = None;
        let outcomes = run_sweep(&spec, 1);
        write_sweep_csv(&outcomes, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), format!("{REPORT_HEADER},error"));
        assert!(text.lines().any(|l| l.starts_with("dude") && l.ends_with(',')));
        assert!(text
            .lines()
            .any(|l| l.starts_with("ndude-sup") && l.contains("training corpus")));
    }
}
