//! Run configuration: command-line flags layered over an optional TOML or
//! JSON file. Flags win.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use rcprobe_core::backends::{BackendConfig, Pooling};
use rcprobe_core::cloze::TargetKind;
use rcprobe_core::pair_forge::LabelMode;
use rcprobe_core::prober::ProbeConfig;

use crate::ValidationError;

#[derive(Parser, Debug)]
#[command(name = "rcprobe", version, about = "Relative-clause minimal pairs and encoder probing")]
pub struct Cli {
    /// TOML or JSON file with run settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    /// Repeat for more detail.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Extract RCs from parses and write a balanced, split dataset.
    BuildDataset(BuildArgs),
    /// Train layer-wise probes for each backend.
    Probe(ProbeArgs),
    /// Score the diagnostic suite with trained probes.
    Diagnose(DiagnoseArgs),
    /// Masked prediction of relativizers and antecedents.
    Cloze(ClozeArgs),
    /// Combine artifacts into summaries and plot data.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct BuildArgs {
    /// Raw sentences, one per line or JSONL with a `text` field.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// CoNLL-U parses, in corpus order.
    #[arg(long)]
    pub parses: Option<PathBuf>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Label omission as grammatical only for animate restrictive object RCs.
    #[arg(long)]
    pub appendix_labels: bool,
}

#[derive(Args, Debug, Clone, Default)]
pub struct BackendArgs {
    /// Backend config file, or one of: rule, rule-strict, mock-separable,
    /// mock-gaussian.
    #[arg(long = "backend")]
    pub backends: Vec<String>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ProbeArgs {
    /// Directory written by build-dataset.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Overrides the poolings listed in backend configs.
    #[arg(long, value_delimiter = ',')]
    pub pooling: Vec<Pooling>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct DiagnoseArgs {
    /// Directory written by probe.
    #[arg(long)]
    pub probe_dir: Option<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// JSONL suite; the built-in suite when absent.
    #[arg(long)]
    pub suite: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ClozeArgs {
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Directory written by build-dataset; the starter set when absent.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// relativizer, antecedent or both.
    #[arg(long)]
    pub kind: Option<String>,
    /// BACKEND=PATH annotation CSV for that backend's predictions.
    #[arg(long = "annotations")]
    pub annotations: Vec<String>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ReportArgs {
    /// Artifact directories to combine.
    #[arg(long = "input")]
    pub inputs: Vec<PathBuf>,
}

/// Settings readable from a config file. Relative paths resolve against the
/// file's directory.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub parses: Option<PathBuf>,
    pub test_fraction: Option<f64>,
    pub appendix_labels: Option<bool>,
    pub dataset: Option<PathBuf>,
    pub probe_dir: Option<PathBuf>,
    pub suite: Option<PathBuf>,
    pub pooling: Option<Vec<Pooling>>,
    pub l2: Option<f64>,
    pub max_iter: Option<usize>,
    pub kind: Option<String>,
    #[serde(default)]
    pub backends: Vec<BackendConfig>,
    #[serde(default)]
    pub annotations: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let is_toml = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let mut cfg: FileConfig = if is_toml {
            toml::from_str(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?
        } else {
            serde_json::from_str(&text).with_context(|| format!("{}", path.display()))?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(x) = p {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        };
        fix(&mut cfg.out);
        fix(&mut cfg.corpus);
        fix(&mut cfg.parses);
        fix(&mut cfg.dataset);
        fix(&mut cfg.probe_dir);
        fix(&mut cfg.suite);
        for p in cfg.annotations.values_mut().chain(cfg.inputs.iter_mut()) {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        for b in &mut cfg.backends {
            if let Some(p) = &mut b.path {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    BuildDataset,
    Probe,
    Diagnose,
    Cloze,
    Report,
}

impl CommandKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandKind::BuildDataset => "build-dataset",
            CommandKind::Probe => "probe",
            CommandKind::Diagnose => "diagnose",
            CommandKind::Cloze => "cloze",
            CommandKind::Report => "report",
        }
    }
}

/// Fully resolved settings of one run. Serialized into the manifest.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub seed: u64,
    pub out: PathBuf,
    pub corpus: Option<PathBuf>,
    pub parses: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub probe_dir: Option<PathBuf>,
    pub suite: Option<PathBuf>,
    pub test_fraction: f64,
    pub label_mode: LabelMode,
    /// Empty: use each backend's own list.
    pub pooling: Vec<Pooling>,
    pub probe: ProbeConfig,
    pub backends: Vec<BackendConfig>,
    pub target_kinds: Vec<TargetKind>,
    pub annotations: BTreeMap<String, PathBuf>,
    pub inputs: Vec<PathBuf>,
}

pub const DEFAULT_TEST_FRACTION: f64 = 1.0 / 9.0;

fn builtin_backend(name: &str) -> Option<BackendConfig> {
    let value = match name {
        "rule" => serde_json::json!({"name": "rule", "kind": "rule"}),
        "rule-strict" => {
            serde_json::json!({"name": "rule-strict", "kind": "rule", "rule_exclude_whom": true})
        }
        "mock-separable" => serde_json::json!({
            "name": "mock-separable", "kind": "mock", "pooling": ["mean", "cls"],
            "mock": {"variant": "separable"}
        }),
        "mock-gaussian" => serde_json::json!({
            "name": "mock-gaussian", "kind": "mock", "pooling": ["mean", "cls"],
            "mock": {"variant": "gaussian"}
        }),
        _ => return None,
    };
    Some(serde_json::from_value(value).expect("builtin backend config"))
}

fn resolve_backend(arg: &str) -> anyhow::Result<BackendConfig> {
    let path = Path::new(arg);
    if path.is_file() {
        let mut cfg = BackendConfig::from_path(path)?;
        if let (Some(p), Some(base)) = (&mut cfg.path, path.parent()) {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        return Ok(cfg);
    }
    builtin_backend(arg).ok_or_else(|| {
        ValidationError(format!(
            "backend `{arg}` is neither a config file nor a built-in backend"
        ))
        .into()
    })
}

fn parse_kinds(kind: Option<&str>) -> anyhow::Result<Vec<TargetKind>> {
    match kind.unwrap_or("both") {
        "both" => Ok(vec![TargetKind::Relativizer, TargetKind::Antecedent]),
        other => Ok(vec![other.parse().map_err(|e| ValidationError(format!("{e}")))?]),
    }
}

fn require_path(label: &str, p: &Option<PathBuf>) -> anyhow::Result<PathBuf> {
    let p = p
        .clone()
        .ok_or_else(|| ValidationError(format!("missing --{label}")))?;
    if !p.exists() {
        bail!(ValidationError(format!("{label} path {} does not exist", p.display())));
    }
    Ok(p)
}

fn optional_path(label: &str, p: &Option<PathBuf>) -> anyhow::Result<Option<PathBuf>> {
    match p {
        Some(_) => require_path(label, p).map(Some),
        None => Ok(None),
    }
}

impl RunConfig {
    pub fn resolve(cli: &Cli) -> anyhow::Result<Self> {
        let file = match &cli.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let seed = cli
            .seed
            .or(file.seed)
            .ok_or_else(|| ValidationError("a seed is required (--seed or `seed` in the config)".into()))?;
        let out = cli
            .out
            .clone()
            .or(file.out.clone())
            .ok_or_else(|| ValidationError("an output directory is required (--out)".into()))?;
        let mut cfg = RunConfig {
            command: CommandKind::Report,
            seed,
            out,
            corpus: None,
            parses: None,
            dataset: None,
            probe_dir: None,
            suite: None,
            test_fraction: file.test_fraction.unwrap_or(DEFAULT_TEST_FRACTION),
            label_mode: if file.appendix_labels.unwrap_or(false) {
                LabelMode::Appendix
            } else {
                LabelMode::MainText
            },
            pooling: file.pooling.clone().unwrap_or_default(),
            probe: ProbeConfig {
                l2_strength: file.l2.unwrap_or(ProbeConfig::default().l2_strength),
                max_iter: file.max_iter.unwrap_or(ProbeConfig::default().max_iter),
                ..ProbeConfig::default()
            },
            backends: file.backends.clone(),
            target_kinds: Vec::new(),
            annotations: file.annotations.clone(),
            inputs: file.inputs.clone(),
        };
        let add_backends = |cfg: &mut RunConfig, args: &BackendArgs| -> anyhow::Result<()> {
            if !args.backends.is_empty() {
                cfg.backends = args
                    .backends
                    .iter()
                    .map(|b| resolve_backend(b))
                    .collect::<anyhow::Result<_>>()?;
            }
            if cfg.backends.is_empty() {
                bail!(ValidationError("at least one --backend is required".into()));
            }
            let mut names: Vec<&str> = cfg.backends.iter().map(|b| b.name.as_str()).collect();
            names.sort();
            if names.windows(2).any(|w| w[0] == w[1]) {
                bail!(ValidationError("backend names must be unique".into()));
            }
            Ok(())
        };
        match &cli.command {
            Command::BuildDataset(a) => {
                cfg.command = CommandKind::BuildDataset;
                cfg.parses = Some(require_path("parses", &a.parses.clone().or(file.parses.clone()))?);
                cfg.corpus = optional_path("corpus", &a.corpus.clone().or(file.corpus.clone()))?;
                if let Some(tf) = a.test_fraction {
                    cfg.test_fraction = tf;
                }
                if a.appendix_labels {
                    cfg.label_mode = LabelMode::Appendix;
                }
                if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
                    bail!(ValidationError(format!(
                        "test fraction {} outside (0, 1)",
                        cfg.test_fraction
                    )));
                }
            }
            Command::Probe(a) => {
                cfg.command = CommandKind::Probe;
                cfg.dataset = Some(require_path("dataset", &a.dataset.clone().or(file.dataset.clone()))?);
                add_backends(&mut cfg, &a.backend)?;
                if !a.pooling.is_empty() {
                    cfg.pooling = a.pooling.clone();
                }
                if let Some(l2) = a.l2 {
                    cfg.probe.l2_strength = l2;
                }
                if let Some(m) = a.max_iter {
                    cfg.probe.max_iter = m;
                }
            }
            Command::Diagnose(a) => {
                cfg.command = CommandKind::Diagnose;
                cfg.probe_dir = Some(require_path(
                    "probe-dir",
                    &a.probe_dir.clone().or(file.probe_dir.clone()),
                )?);
                cfg.suite = optional_path("suite", &a.suite.clone().or(file.suite.clone()))?;
                add_backends(&mut cfg, &a.backend)?;
            }
            Command::Cloze(a) => {
                cfg.command = CommandKind::Cloze;
                cfg.dataset = optional_path("dataset", &a.dataset.clone().or(file.dataset.clone()))?;
                add_backends(&mut cfg, &a.backend)?;
                cfg.target_kinds = parse_kinds(a.kind.as_deref().or(file.kind.as_deref()))?;
                for spec in &a.annotations {
                    let (name, path) = spec.split_once('=').ok_or_else(|| {
                        ValidationError(format!("--annotations expects BACKEND=PATH, got `{spec}`"))
                    })?;
                    cfg.annotations.insert(name.to_string(), PathBuf::from(path));
                }
                for (name, p) in &cfg.annotations {
                    if !cfg.backends.iter().any(|b| &b.name == name) {
                        bail!(ValidationError(format!("annotations for unknown backend `{name}`")));
                    }
                    require_path("annotations", &Some(p.clone()))?;
                }
            }
            Command::Report(a) => {
                cfg.command = CommandKind::Report;
                if !a.inputs.is_empty() {
                    cfg.inputs = a.inputs.clone();
                }
                if cfg.inputs.is_empty() {
                    bail!(ValidationError("at least one --input directory is required".into()));
                }
                for p in &cfg.inputs {
                    require_path("input", &Some(p.clone()))?;
                }
            }
        }
        Ok(cfg)
    }
}
