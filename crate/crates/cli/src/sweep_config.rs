//! Sweep configuration files: a minimal line-oriented `key = value` format.
//!
//! ```text
//! # lines starting with # are comments
//! dataset = patterns-demo
//! schemes = dude, ndude-rand, ndude-sup
//! context = 2d
//! ks = 3,5
//! seeds = 1,2
//! channel = bsc:0.1
//! test = patterns:test:64x64
//! train = patterns:train:64x64
//! blind-range = 0.05:0.25
//! ```
//!
//! Optional keys: `loss` (default `hamming:<|X|>`), `head` (`full` or
//! `reduced`, default by alphabet size), `hidden` (comma dims, default
//! 12x128 for binary and 4x100 for quaternary data), `batch`, `lr`,
//! `ft-lr`, `epochs-sup`, `epochs-adaptive`, `timings` (`on`/`off`).

use std::path::Path;

use ndude::channel::{ChannelModel, LossModel};
use ndude::error::{NdudeError, Result};
use ndude::eval::{Scheme, SweepSpec};
use ndude::rng::derive_seed;
use ndude::training::{DEFAULT_ADAPTIVE_EPOCHS, DEFAULT_SUP_EPOCHS, DNA_FT_LEARNING_RATE};

use crate::data_io::load_spec;

pub fn parse_sweep_config(path: &Path, default_seed: u64) -> Result<SweepSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| NdudeError::io(path, e))?;
    let mut kv: Vec<(String, String)> = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            NdudeError::format(path, format!("line {}: expected key = value", line_no + 1))
        })?;
        kv.push((key.trim().to_string(), value.trim().to_string()));
    }

    let mut get = |name: &str| -> Option<String> {
        kv.iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.clone())
    };

    let channel = ChannelModel::from_spec(&require(&mut get, "channel", path)?)?;
    let loss = match get("loss") {
        Some(spec) => LossModel::from_spec(&spec)?,
        None => LossModel::hamming(channel.x_size()),
    };

    let schemes: Vec<Scheme> = match get("schemes") {
        None => return Err(NdudeError::format(path, "missing `schemes`")),
        Some(list) if list.trim().is_empty() => Vec::new(),
        Some(list) => list
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<_>>()?,
    };

    let ks = parse_list::<usize>(&get("ks").unwrap_or_default(), "ks", path)?;
    let seeds = match get("seeds") {
        None => vec![default_seed],
        Some(list) => parse_list::<u64>(&list, "seeds", path)?,
    };

    let two_d = match get("context").as_deref() {
        None | Some("1d") => false,
        Some("2d") => true,
        Some(other) => {
            return Err(NdudeError::format(
                path,
                format!("context must be 1d or 2d, got {other}"),
            ))
        }
    };

    let test_clean = load_spec(
        &require(&mut get, "test", path)?,
        derive_seed(default_seed, 0x7E57),
    )?;
    let train_clean = match get("train") {
        Some(spec) => Some(load_spec(&spec, derive_seed(default_seed, 0x7124))?),
        None => None,
    };

    let blind_range = match get("blind-range") {
        None => None,
        Some(r) => Some(parse_range(&r, path)?),
    };

    let quaternary = channel.z_size() == 4;
    let reduced_head = match get("head").as_deref() {
        None => quaternary,
        Some("full") => false,
        Some("reduced") => true,
        Some(other) => {
            return Err(NdudeError::format(
                path,
                format!("head must be full or reduced, got {other}"),
            ))
        }
    };

    let hidden = match get("hidden") {
        Some(dims) => parse_list::<usize>(&dims, "hidden", path)?,
        None if quaternary => vec![100; 4],
        None => vec![128; 12],
    };

    let learning_rate = parse_or(&mut get, "lr", 1e-3, path)?;
    let ft_learning_rate = match get("ft-lr") {
        Some(v) => v
            .parse()
            .map_err(|_| NdudeError::format(path, format!("bad ft-lr: {v}")))?,
        None if quaternary => DNA_FT_LEARNING_RATE,
        None => learning_rate,
    };

    let known = [
        "dataset", "schemes", "context", "ks", "seeds", "channel", "loss", "test", "train",
        "blind-range", "head", "hidden", "batch", "lr", "ft-lr", "epochs-sup",
        "epochs-adaptive", "timings",
    ];
    if let Some((k, _)) = kv.iter().find(|(k, _)| !known.contains(&k.as_str())) {
        return Err(NdudeError::format(path, format!("unknown key: {k}")));
    }

    Ok(SweepSpec {
        schemes,
        ks,
        seeds,
        channel,
        loss,
        two_d,
        dataset: get("dataset").unwrap_or_else(|| "sweep".into()),
        test_clean,
        train_clean,
        blind_range,
        reduced_head,
        hidden,
        batch_size: parse_or(&mut get, "batch", 256.0, path)? as usize,
        learning_rate,
        ft_learning_rate,
        sup_epochs: parse_or(&mut get, "epochs-sup", DEFAULT_SUP_EPOCHS as f64, path)? as usize,
        adaptive_epochs: parse_or(
            &mut get,
            "epochs-adaptive",
            DEFAULT_ADAPTIVE_EPOCHS as f64,
            path,
        )? as usize,
        timings: matches!(get("timings").as_deref(), Some("on") | Some("true")),
    })
}

fn require(
    get: &mut impl FnMut(&str) -> Option<String>,
    name: &str,
    path: &Path,
) -> Result<String> {
    get(name).ok_or_else(|| NdudeError::format(path, format!("missing `{name}`")))
}

fn parse_or(
    get: &mut impl FnMut(&str) -> Option<String>,
    name: &str,
    default: f64,
    path: &Path,
) -> Result<f64> {
    match get(name) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| NdudeError::format(path, format!("bad {name}: {v}"))),
    }
}

fn parse_list<T: std::str::FromStr>(list: &str, name: &str, path: &Path) -> Result<Vec<T>> {
    if list.trim().is_empty() {
        return Ok(Vec::new());
    }
    list.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<T>()
                .map_err(|_| NdudeError::format(path, format!("bad {name} entry: {tok}")))
        })
        .collect()
}

pub fn parse_range(r: &str, path: &Path) -> Result<(f64, f64)> {
    r.split_once(':')
        .and_then(|(lo, hi)| Some((lo.parse().ok()?, hi.parse().ok()?)))
        .ok_or_else(|| NdudeError::format(path, format!("bad range: {r} (want lo:hi)")))
}
