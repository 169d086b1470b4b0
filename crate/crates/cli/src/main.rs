//! `ndude`: discrete-denoising workflows from the command line.
//!
//! Subcommands: `corrupt`, `make-data`, `train`, `finetune`, `denoise`,
//! `eval`, `sweep`. Every run is deterministic given `--seed` (falling back
//! to the `DENOISE_SEED` environment variable, then 0). Exit codes: 0 on
//! success, 1 for usage/validation errors, 2 for runtime failures.

mod data_io;
mod sweep_config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use ndude::channel::{ChannelModel, LossModel};
use ndude::context::ContextKind;
use ndude::data::{
    corrupt_corpus, generate_reads, make_synthetic_reference, mutate_reference, save_fasta,
    write_corruption_manifest, Corpus, SourceModel,
};
use ndude::denoiser::{dude_denoise, ndude_infer_full, ndude_infer_reduced, sl_infer};
use ndude::error::{NdudeError, Result};
use ndude::eval::{count_mismatches, record_csv_line, EvalRecord, REPORT_HEADER};
use ndude::nn::{Head, MlpModel, Provenance};
use ndude::rng::derive_seed;
use ndude::training::{
    finetune, train_pseudo, train_supervised, train_supervised_blind, train_vanilla_sl,
    write_training_log, PairStream, RedrawPolicy, TrainOutcome, TrainingConfig,
    DEFAULT_ADAPTIVE_EPOCHS, DEFAULT_SUP_EPOCHS, DNA_FT_LEARNING_RATE,
};

use data_io::{load_file, load_specs, save_file};

#[derive(Parser)]
#[command(
    name = "ndude",
    version,
    about = "Discrete universal denoising: DUDE, Neural DUDE, supervised pre-training and adaptive fine-tuning",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pass a PBM image or FASTA reads through a known memoryless channel.
    Corrupt(CorruptArgs),
    /// Generate a synthetic DNA benchmark: references, mutated supervised
    /// references, clean reads and noisy reads per organism.
    MakeData(MakeDataArgs),
    /// Train a denoising network (pseudo-label, supervised, blind
    /// supervised, or direct-mapping).
    Train(TrainArgs),
    /// Adaptively fine-tune a pre-trained checkpoint on the noisy data
    /// subject to denoising.
    Finetune(FinetuneArgs),
    /// Denoise a file with a trained model or the count-based baseline.
    Denoise(DenoiseArgs),
    /// Score a denoised file against its clean original and append a report
    /// row.
    Eval(EvalArgs),
    /// Run a scheme x window-size x seed sweep from a config file.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CorruptArgs {
    /// Channel spec: bsc:<delta>, qsc:<size>:<delta>, or a matrix file.
    #[arg(long)]
    channel: String,
    /// Seed for the corruption draw (default: $DENOISE_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Input file (PBM or FASTA, detected by extension/header).
    #[arg(long = "in")]
    input: PathBuf,
    /// Output file; a `.manifest` provenance sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MakeDataArgs {
    /// Dataset kind; only `dna` is available.
    #[arg(long, default_value = "dna")]
    kind: String,
    /// Number of synthetic organisms.
    #[arg(long, default_value_t = 4)]
    orgs: usize,
    /// Reference sequence length per organism.
    #[arg(long = "ref-len", default_value_t = 100_000)]
    ref_len: usize,
    /// Substitution rate for the supervised (mutated) reference copies.
    #[arg(long, default_value_t = 0.01)]
    mutate: f64,
    /// Reads per organism.
    #[arg(long, default_value_t = 6000)]
    reads: usize,
    /// Length of each read.
    #[arg(long = "read-len", default_value_t = 200)]
    read_len: usize,
    /// Channel used to corrupt the reads.
    #[arg(long, default_value = "qsc:4:0.1")]
    channel: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing); a manifest lists all files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Training regime: pseudo | sup | sup-blind | sl.
    #[arg(long)]
    mode: String,
    /// Output head for Neural DUDE regimes: full | reduced (default: full
    /// for binary data, reduced for quaternary).
    #[arg(long)]
    head: Option<String>,
    /// Context: 1d:<k> (double-sided) or 2d:<ell> (square patch).
    #[arg(long)]
    context: String,
    /// Hidden layer widths, comma separated (default: 128x12 for binary,
    /// 100x4 for quaternary).
    #[arg(long)]
    arch: Option<String>,
    /// Channel spec; required for pseudo/sup-blind and whenever pairs are
    /// synthesized by corruption.
    #[arg(long)]
    channel: Option<String>,
    /// Blind composite noise range lo:hi (sup-blind only).
    #[arg(long = "blind-range")]
    blind_range: Option<String>,
    /// Input data specs: noisy data for pseudo, clean data otherwise.
    #[arg(long, num_args = 1.., required = true)]
    data: Vec<String>,
    /// Explicit noisy counterparts of --data (sup/sl pairs); otherwise pairs
    /// are synthesized with --channel.
    #[arg(long, num_args = 1..)]
    noisy: Option<Vec<String>>,
    /// Loss matrix spec (default hamming sized by the alphabet).
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Epochs (default: 20 supervised regimes, 10 pseudo).
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = 256)]
    batch: usize,
    /// Regenerate supervised pairs (fresh corruption) at every epoch.
    #[arg(long = "regen-pairs", default_value_t = false)]
    regen_pairs: bool,
    /// When blind training re-draws its delta: epoch | batch.
    #[arg(long = "blind-redraw", default_value = "epoch")]
    blind_redraw: String,
    /// Checkpoint path; the per-epoch log goes to <out>.log.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FinetuneArgs {
    /// Pre-trained checkpoint (sup or sup-blind provenance expected).
    #[arg(long)]
    model: PathBuf,
    /// The noisy data subject to denoising (file or data spec).
    #[arg(long)]
    noisy: String,
    /// The true channel of the noisy data.
    #[arg(long)]
    channel: String,
    #[arg(long)]
    loss: Option<String>,
    /// Learning rate (default 1e-4 for quaternary models, else 1e-3).
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_ADAPTIVE_EPOCHS)]
    epochs: usize,
    #[arg(long, default_value_t = 256)]
    batch: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DenoiseArgs {
    /// Checkpoint to denoise with (alternative: --dude).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Count-based baseline with k:<k> or ell:<ell> (requires --channel).
    #[arg(long)]
    dude: Option<String>,
    #[arg(long)]
    channel: Option<String>,
    #[arg(long)]
    loss: Option<String>,
    #[arg(long = "in")]
    input: PathBuf,
    /// Output file, same format as the input.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    clean: PathBuf,
    #[arg(long)]
    denoised: PathBuf,
    /// Channel error rate; when present the report carries BER/delta.
    #[arg(long)]
    delta: Option<f64>,
    /// Report CSV to append to (created with a header if missing).
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value = "eval")]
    scheme: String,
    /// Dataset label (default: the clean file name).
    #[arg(long)]
    dataset: Option<String>,
    /// Window size to record.
    #[arg(long, default_value_t = 0)]
    k: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep config file (line-oriented `key = value`; see README).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV (report columns plus an `error` column).
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for independent cells.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Default seed when the config lists none.
    #[arg(long)]
    seed: Option<u64>,
    /// Record real cell wall times (off keeps the CSV byte-stable).
    #[arg(long, default_value_t = false)]
    timings: bool,
    /// Also write per-scheme `k ber` two-column data files here for external
    /// plotting.
    #[arg(long = "plot-dir")]
    plot_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                NdudeError::Io { .. } => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("DENOISE_SEED")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Corrupt(args) => cmd_corrupt(args),
        Command::MakeData(args) => cmd_make_data(args),
        Command::Train(args) => cmd_train(args),
        Command::Finetune(args) => cmd_finetune(args),
        Command::Denoise(args) => cmd_denoise(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Sweep(args) => cmd_sweep(args),
    }
}

fn cmd_corrupt(args: CorruptArgs) -> Result<u8> {
    let channel = ChannelModel::from_spec(&args.channel)?;
    let seed = resolve_seed(args.seed);
    let payload = load_file(&args.input)?;
    let corrupted = corrupt_corpus(&payload.corpus(), &channel, seed)?;
    save_file(&args.out, &payload.with_corpus(&corrupted)?)?;
    write_corruption_manifest(&args.out, &channel, seed, &args.input)?;
    println!(
        "corrupted {} -> {} (channel {channel}, seed {seed})",
        args.input.display(),
        args.out.display()
    );
    Ok(0)
}

fn cmd_make_data(args: MakeDataArgs) -> Result<u8> {
    if args.kind != "dna" {
        return Err(NdudeError::InvalidParameter(format!(
            "unknown dataset kind: {} (only dna is available)",
            args.kind
        )));
    }
    let channel = ChannelModel::from_spec(&args.channel)?;
    let seed = resolve_seed(args.seed);
    std::fs::create_dir_all(&args.out).map_err(|e| NdudeError::io(&args.out, e))?;

    let mut manifest = format!(
        "kind dna\norgs {}\nref_len {}\nmutate {}\nreads {}\nread_len {}\nchannel {}\nseed {}\n",
        args.orgs,
        args.ref_len,
        args.mutate,
        args.reads,
        args.read_len,
        channel.describe(),
        seed
    );

    for org in 1..=args.orgs {
        let org_seed = derive_seed(seed, org as u64);
        let mut reference = make_synthetic_reference(
            args.ref_len,
            derive_seed(org_seed, 0),
            SourceModel::Markov { stay_prob: 0.8 },
        )?;
        reference.label = format!("ORG-{org}");
        let mutated = mutate_reference(&reference, args.mutate, derive_seed(org_seed, 1))?;
        let clean_reads = generate_reads(
            &reference,
            args.read_len,
            args.reads,
            derive_seed(org_seed, 2),
        )?;
        let noisy_corpus = corrupt_corpus(
            &Corpus::from_reads(&clean_reads),
            &channel,
            derive_seed(org_seed, 3),
        )?;
        let noisy_reads = match noisy_corpus {
            Corpus::Seqs(seqs) => clean_reads.with_reads(seqs)?,
            _ => unreachable!("reads corrupt to reads"),
        };
        // Supervised-side reads come from the mutated reference, so a
        // trained model sees the same read-boundary padding as inference.
        let sup_reads = generate_reads(
            &mutated,
            args.read_len,
            args.reads,
            derive_seed(org_seed, 4),
        )?;

        let base = args.out.join(format!("org{org}"));
        let files = [
            ("reference.fa", vec![reference.to_record()]),
            ("reference_mut.fa", vec![mutated.to_record()]),
            ("reads_clean.fa", clean_reads.to_records()),
            ("reads_noisy.fa", noisy_reads.to_records()),
            ("reads_sup.fa", sup_reads.to_records()),
        ];
        for (suffix, records) in files {
            let path = PathBuf::from(format!("{}_{suffix}", base.display()));
            save_fasta(&path, &records)?;
            manifest.push_str(&format!("file {}\n", path.display()));
        }
        let noisy_path = PathBuf::from(format!("{}_reads_noisy.fa", base.display()));
        write_corruption_manifest(
            &noisy_path,
            &channel,
            derive_seed(org_seed, 3),
            &PathBuf::from(format!("{}_reads_clean.fa", base.display())),
        )?;
    }

    let manifest_path = args.out.join("manifest.txt");
    std::fs::write(&manifest_path, manifest).map_err(|e| NdudeError::io(&manifest_path, e))?;
    println!(
        "wrote {} organisms to {} (manifest.txt lists all files)",
        args.orgs,
        args.out.display()
    );
    Ok(0)
}

fn parse_hidden(arch: &Option<String>, z_size: usize) -> Result<Vec<usize>> {
    match arch {
        None => Ok(if z_size == 4 { vec![100; 4] } else { vec![128; 12] }),
        Some(dims) => dims
            .split(',')
            .map(|d| {
                d.trim().parse().map_err(|_| {
                    NdudeError::InvalidParameter(format!("bad arch entry: {d}"))
                })
            })
            .collect(),
    }
}

fn build_model(
    hidden: &[usize],
    head: Head,
    kind: ContextKind,
    x: usize,
    z: usize,
    xhat: usize,
    seed: u64,
) -> Result<MlpModel> {
    let mut dims = vec![MlpModel::expected_input_dim(&head, &kind, z)];
    dims.extend_from_slice(hidden);
    dims.push(head.output_dim());
    MlpModel::he_init(&dims, head, kind, x, z, xhat, seed)
}

fn save_outcome(outcome: &TrainOutcome, out: &Path) -> Result<()> {
    outcome.model.save(out)?;
    let log_path = PathBuf::from(format!("{}.log.csv", out.display()));
    write_training_log(&log_path, &outcome.log)?;
    if let Some(last) = outcome.log.last() {
        println!(
            "trained {} epochs, final objective {:.6} -> {}",
            outcome.log.len(),
            last.objective,
            out.display()
        );
    } else {
        println!("0 epochs requested; checkpoint copied to {}", out.display());
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<u8> {
    let seed = resolve_seed(args.seed);
    let kind = ContextKind::from_spec(&args.context)?;
    let redraw = match args.blind_redraw.as_str() {
        "epoch" => RedrawPolicy::Epoch,
        "batch" => RedrawPolicy::Batch,
        other => {
            return Err(NdudeError::InvalidParameter(format!(
                "--blind-redraw must be epoch or batch, got {other}"
            )))
        }
    };

    let channel = args
        .channel
        .as_deref()
        .map(ChannelModel::from_spec)
        .transpose()?;
    let needs_channel = matches!(args.mode.as_str(), "pseudo" | "sup-blind") || args.noisy.is_none();
    let get_channel = || -> Result<&ChannelModel> {
        channel.as_ref().ok_or_else(|| {
            NdudeError::InvalidParameter(format!(
                "--mode {} needs --channel with these flags",
                args.mode
            ))
        })
    };
    if needs_channel {
        get_channel()?;
    }

    let data = load_specs(&args.data, derive_seed(seed, 0xDA))?;
    let (x_size, z_size) = match &channel {
        Some(ch) => (ch.x_size(), ch.z_size()),
        None => {
            let alphabet = (0..data.items())
                .flat_map(|i| data.item(i).iter())
                .map(|&v| v as usize + 1)
                .max()
                .unwrap_or(2)
                .max(2);
            (alphabet, alphabet)
        }
    };
    let loss = match &args.loss {
        Some(spec) => LossModel::from_spec(spec)?,
        None => LossModel::hamming(x_size),
    };
    let xhat_size = loss.xhat_size();
    let hidden = parse_hidden(&args.arch, z_size)?;

    let ndude_head = || -> Result<Head> {
        match args.head.as_deref() {
            None => {
                if z_size == 4 {
                    Ok(Head::Reduced {
                        groups: z_size,
                        group_width: xhat_size,
                    })
                } else {
                    let s = ndude::channel::SingletDenoiserSet::new(z_size, xhat_size)?;
                    Ok(Head::Full { width: s.count() })
                }
            }
            Some("full") => {
                let s = ndude::channel::SingletDenoiserSet::new(z_size, xhat_size)?;
                Ok(Head::Full { width: s.count() })
            }
            Some("reduced") => Ok(Head::Reduced {
                groups: z_size,
                group_width: xhat_size,
            }),
            Some(other) => Err(NdudeError::InvalidParameter(format!(
                "--head must be full or reduced, got {other}"
            ))),
        }
    };

    let cfg = TrainingConfig {
        epochs: args.epochs.unwrap_or(match args.mode.as_str() {
            "pseudo" => DEFAULT_ADAPTIVE_EPOCHS,
            _ => DEFAULT_SUP_EPOCHS,
        }),
        batch_size: args.batch,
        learning_rate: args.lr.unwrap_or(1e-3),
        seed: derive_seed(seed, 2),
        blind_redraw: redraw,
    };
    let init_seed = derive_seed(seed, 1);

    let make_pair_stream = |clean: Corpus| -> Result<PairStream> {
        match &args.noisy {
            Some(noisy_specs) => Ok(PairStream::Fixed {
                noisy: load_specs(noisy_specs, derive_seed(seed, 0xDB))?,
                clean,
            }),
            None if args.regen_pairs => Ok(PairStream::Regen {
                clean,
                channel: get_channel()?.clone(),
            }),
            None => {
                let noisy = corrupt_corpus(&clean, get_channel()?, derive_seed(seed, 3))?;
                Ok(PairStream::Fixed { clean, noisy })
            }
        }
    };

    let outcome = match args.mode.as_str() {
        "pseudo" => {
            if args.noisy.is_some() || args.blind_range.is_some() {
                return Err(NdudeError::InvalidParameter(
                    "--mode pseudo takes only noisy --data (no --noisy/--blind-range)".into(),
                ));
            }
            let ch = get_channel()?;
            let init = build_model(&hidden, ndude_head()?, kind, x_size, z_size, xhat_size, init_seed)?;
            train_pseudo(&data, ch, &loss, &cfg, &init)?
        }
        "sup" => {
            let init = build_model(&hidden, ndude_head()?, kind, x_size, z_size, xhat_size, init_seed)?;
            train_supervised(&make_pair_stream(data)?, &loss, &cfg, &init)?
        }
        "sup-blind" => {
            let range_str = args.blind_range.as_deref().ok_or_else(|| {
                NdudeError::InvalidParameter("--mode sup-blind requires --blind-range lo:hi".into())
            })?;
            let range = sweep_config::parse_range(range_str, Path::new("--blind-range"))?;
            let init = build_model(&hidden, ndude_head()?, kind, x_size, z_size, xhat_size, init_seed)?;
            train_supervised_blind(&data, get_channel()?, range, &loss, &cfg, &init)?
        }
        "sl" => {
            if args.head.is_some() {
                return Err(NdudeError::InvalidParameter(
                    "--mode sl is the direct-mapping classifier; it has no --head choice".into(),
                ));
            }
            let head = Head::Direct { width: xhat_size };
            let init = build_model(&hidden, head, kind, x_size, z_size, xhat_size, init_seed)?;
            train_vanilla_sl(&make_pair_stream(data)?, &cfg, &init)?
        }
        other => {
            return Err(NdudeError::InvalidParameter(format!(
                "--mode must be pseudo|sup|sup-blind|sl, got {other}"
            )))
        }
    };

    save_outcome(&outcome, &args.out)?;
    Ok(0)
}

fn cmd_finetune(args: FinetuneArgs) -> Result<u8> {
    let seed = resolve_seed(args.seed);
    let init = MlpModel::load(&args.model)?;
    if !matches!(init.provenance, Provenance::Sup | Provenance::SupBlind) {
        eprintln!(
            "warning: checkpoint provenance is `{}`; fine-tuning normally starts from sup or sup-blind",
            init.provenance
        );
    }
    let channel = ChannelModel::from_spec(&args.channel)?;
    let loss = match &args.loss {
        Some(spec) => LossModel::from_spec(spec)?,
        None => LossModel::hamming(channel.x_size()),
    };
    let noisy = data_io::load_spec(&args.noisy, derive_seed(seed, 0xDA))?;
    let cfg = TrainingConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        learning_rate: args.lr.unwrap_or(if init.z_size == 4 {
            DNA_FT_LEARNING_RATE
        } else {
            1e-3
        }),
        seed: derive_seed(seed, 2),
        ..Default::default()
    };
    let outcome = finetune(&init, &noisy, &channel, &loss, &cfg)?;
    save_outcome(&outcome, &args.out)?;
    Ok(0)
}

fn cmd_denoise(args: DenoiseArgs) -> Result<u8> {
    let payload = load_file(&args.input)?;
    let noisy = payload.corpus();

    let recon = match (&args.model, &args.dude) {
        (Some(_), Some(_)) | (None, None) => {
            return Err(NdudeError::InvalidParameter(
                "pass exactly one of --model or --dude".into(),
            ))
        }
        (Some(ckpt), None) => {
            let model = MlpModel::load(ckpt)?;
            match model.head {
                Head::Full { .. } => ndude_infer_full(&model, &noisy)?,
                Head::Reduced { .. } => ndude_infer_reduced(&model, &noisy)?,
                Head::Direct { .. } => sl_infer(&model, &noisy)?,
            }
        }
        (None, Some(dude_spec)) => {
            let channel = args
                .channel
                .as_deref()
                .map(ChannelModel::from_spec)
                .transpose()?
                .ok_or_else(|| {
                    NdudeError::InvalidParameter("--dude requires --channel".into())
                })?;
            let loss = match &args.loss {
                Some(spec) => LossModel::from_spec(spec)?,
                None => LossModel::hamming(channel.x_size()),
            };
            let kind = if let Some(k) = dude_spec.strip_prefix("k:") {
                ContextKind::OneD {
                    k: k.parse().map_err(|_| {
                        NdudeError::InvalidParameter(format!("bad --dude spec: {dude_spec}"))
                    })?,
                }
            } else if let Some(ell) = dude_spec.strip_prefix("ell:") {
                ContextKind::TwoD {
                    ell: ell.parse().map_err(|_| {
                        NdudeError::InvalidParameter(format!("bad --dude spec: {dude_spec}"))
                    })?,
                }
            } else {
                return Err(NdudeError::InvalidParameter(format!(
                    "--dude takes k:<k> or ell:<ell>, got {dude_spec}"
                )));
            };
            kind.validate()?;
            dude_denoise(&noisy, &channel, &loss, kind)?
        }
    };

    save_file(&args.out, &payload.with_corpus(&recon.output)?)?;
    println!("denoised {} -> {}", args.input.display(), args.out.display());
    Ok(0)
}

fn cmd_eval(args: EvalArgs) -> Result<u8> {
    let clean = load_file(&args.clean)?.corpus();
    let denoised = load_file(&args.denoised)?.corpus();
    let (mismatches, n) = count_mismatches(&clean, &denoised)?;
    let dataset = args.dataset.clone().unwrap_or_else(|| {
        args.clean
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    });
    let record = EvalRecord::from_counts(
        args.scheme.clone(),
        dataset,
        args.delta,
        args.k,
        mismatches,
        n,
        resolve_seed(args.seed),
        0.0,
    );

    let mut body = if args.report.exists() {
        std::fs::read_to_string(&args.report).map_err(|e| NdudeError::io(&args.report, e))?
    } else {
        format!("{REPORT_HEADER}\n")
    };
    body.push_str(&record_csv_line(&record));
    std::fs::write(&args.report, body).map_err(|e| NdudeError::io(&args.report, e))?;

    println!(
        "ber {} ({mismatches}/{n}) appended to {}",
        ndude::eval::format_sig6(record.ber),
        args.report.display()
    );
    Ok(0)
}

fn cmd_sweep(args: SweepArgs) -> Result<u8> {
    let seed = resolve_seed(args.seed);
    let mut spec = sweep_config::parse_sweep_config(&args.config, seed)?;
    spec.timings = spec.timings || args.timings;
    let outcomes = ndude::eval::run_sweep(&spec, args.jobs.max(1));
    ndude::eval::write_sweep_csv(&outcomes, &args.out)?;
    for o in &outcomes {
        match (&o.record, &o.error) {
            (Some(r), _) => println!(
                "{} k={} seed={} ber={}",
                o.scheme,
                o.k,
                o.seed,
                ndude::eval::format_sig6(r.ber)
            ),
            (_, Some(err)) => println!("{} k={} seed={} error: {err}", o.scheme, o.k, o.seed),
            _ => {}
        }
    }
    println!("wrote {} cells to {}", outcomes.len(), args.out.display());

    if let Some(plot_dir) = &args.plot_dir {
        std::fs::create_dir_all(plot_dir).map_err(|e| NdudeError::io(plot_dir, e))?;
        let records: Vec<EvalRecord> = outcomes.iter().filter_map(|o| o.record.clone()).collect();
        for scheme in &spec.schemes {
            let path = plot_dir.join(format!("{scheme}.dat"));
            ndude::eval::write_plot_data(&records, scheme.as_str(), &path)?;
        }
    }

    if !outcomes.is_empty() && outcomes.iter().all(|o| o.error.is_some()) {
        eprintln!("error: every sweep cell failed");
        return Ok(2);
    }
    Ok(0)
}
