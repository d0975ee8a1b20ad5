//! Pipeline configuration: defaults, optional key-value config file, and
//! command-line flags, merged with precedence flag > file > default.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};

use skelpipe_core::heatmap::{Modality, RenderConfig};
use skelpipe_core::temporal::Strategy;

use crate::PreprocessArgs;

/// Fully resolved preprocess settings.
#[derive(Debug, Clone)]
pub struct PipelineSettings {
    pub manifest: PathBuf,
    /// Built-in topology name or path to a topology config file.
    pub topology: String,
    pub strategy: Strategy,
    pub target_length: usize,
    pub seed: u64,
    pub modalities: Vec<Modality>,
    pub render: RenderConfig,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub min_person_confidence: f32,
}

fn parse_config_file(path: &PathBuf) -> Result<HashMap<String, String>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config file `{}`", path.display()))?;
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let line = line.replacen('=', " ", 1);
        let Some((key, value)) = line.split_once(char::is_whitespace) else {
            bail!("config line {}: expected `key value`", i + 1);
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parsed<T>(file: &HashMap<String, String>, key: &str) -> Result<Option<T>>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    match file.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|e| anyhow!("config key `{key}`: {e}")),
    }
}

fn parse_modalities(raw: &str) -> Result<Vec<Modality>> {
    match raw {
        "joint" => Ok(vec![Modality::Joint]),
        "limb" => Ok(vec![Modality::Limb]),
        "both" => Ok(vec![Modality::Joint, Modality::Limb]),
        other => bail!("unknown modality `{other}` (joint|limb|both)"),
    }
}

pub fn resolve(args: &PreprocessArgs) -> Result<PipelineSettings> {
    let file = match &args.config {
        Some(path) => parse_config_file(path)?,
        None => HashMap::new(),
    };

    let manifest = args
        .manifest
        .clone()
        .or_else(|| file.get("manifest").map(PathBuf::from))
        .ok_or_else(|| anyhow!("no manifest given (pass --manifest or set it in the config)"))?;
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| file.get("out_dir").map(PathBuf::from))
        .ok_or_else(|| anyhow!("no output directory given (pass --out-dir)"))?;
    let topology = args
        .topology
        .clone()
        .or_else(|| file.get("topology").cloned())
        .unwrap_or_else(|| "face41".to_string());

    let strategy = match &args.strategy {
        Some(raw) => raw.parse::<Strategy>().map_err(|e| anyhow!(e))?,
        None => parsed::<Strategy>(&file, "strategy")?.unwrap_or(Strategy::Proposed),
    };
    let target_length = args
        .target_length
        .or(parsed(&file, "target_length")?)
        .unwrap_or(48);
    let seed = args.seed.or(parsed(&file, "seed")?).unwrap_or(0);
    let modalities = match &args.modality {
        Some(raw) => parse_modalities(raw)?,
        None => match file.get("modality") {
            Some(raw) => parse_modalities(raw)?,
            None => vec![Modality::Joint, Modality::Limb],
        },
    };
    let workers = args.workers.or(parsed(&file, "workers")?).unwrap_or(1);
    let min_person_confidence = args
        .min_person_confidence
        .or(parsed(&file, "min_person_confidence")?)
        .unwrap_or(0.0);

    let defaults = RenderConfig::default();
    let render = RenderConfig {
        height: args.height.or(parsed(&file, "height")?).unwrap_or(defaults.height),
        width: args.width.or(parsed(&file, "width")?).unwrap_or(defaults.width),
        sigma: args.sigma.or(parsed(&file, "sigma")?).unwrap_or(defaults.sigma),
        padding_ratio: args
            .padding_ratio
            .or(parsed(&file, "padding_ratio")?)
            .unwrap_or(defaults.padding_ratio),
        confidence_floor: args
            .confidence_floor
            .or(parsed(&file, "confidence_floor")?)
            .unwrap_or(defaults.confidence_floor),
        ..defaults
    };

    if target_length == 0 {
        bail!("target length must be at least 1");
    }
    if workers == 0 {
        bail!("worker count must be at least 1");
    }
    render.validate()?;

    Ok(PipelineSettings {
        manifest,
        topology,
        strategy,
        target_length,
        seed,
        modalities,
        render,
        out_dir,
        workers,
        min_person_confidence,
    })
}
