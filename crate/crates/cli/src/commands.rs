use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use rcprobe_core::backends::{build_backend, Backend, BackendConfig, BuildContext, Pooling};
use rcprobe_core::cloze::{
    aggregate_qualitative, build_cloze_set, evaluate_cloze, read_annotations, render_metrics_csv,
    starter_sources, ClozeSource, TargetKind,
};
use rcprobe_core::diagnostics::{evaluate_suite, load_builtin_suite, render_table_csv, DiagnosticSuite};
use rcprobe_core::extraction::{extract, ExtractionConfig, RcRecord};
use rcprobe_core::manifest::{stale_dependencies, RunManifest};
use rcprobe_core::pair_forge::{build_bags, dataset_stats, sample_balanced, split, DatasetSample, ModificationKind, Split};
use rcprobe_core::prober::{layer_sweep, LinearProbe, ProbeReport, SweepConfig};
use rcprobe_core::{conllu, io};

use crate::config::RunConfig;
use crate::{BackendFailures, InfeasibleBalance, ValidationError};

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const CACHE_ENV: &str = "RCPROBE_CACHE_DIR";

/// Collects written files for the manifest.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let p = self.path(name);
        Ok(io::write_json(&p, value)?)
    }

    pub fn jsonl<T: Serialize>(&mut self, name: &str, items: &[T]) -> anyhow::Result<()> {
        let p = self.path(name);
        Ok(io::write_jsonl(&p, items)?)
    }

    pub fn text(&mut self, name: &str, contents: &str) -> anyhow::Result<()> {
        let p = self.path(name);
        Ok(io::write_string(&p, contents)?)
    }

    /// Writes the manifest with digests of every input and output.
    pub fn finish(self, cfg: &RunConfig, inputs: &[PathBuf], started_at: String) -> anyhow::Result<()> {
        let mut m = RunManifest::new(cfg.command.as_str(), serde_json::to_value(cfg)?, started_at);
        for p in inputs {
            m.add_input(p)?;
        }
        for p in &self.written {
            m.add_output(p)?;
        }
        m.finished_at = now();
        m.write(&self.dir)?;
        Ok(())
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Backend names made safe for file names.
pub fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn warn_stale(dir: &Path) {
    for p in stale_dependencies(dir) {
        log::warn!("{} changed since the artifacts in {} were produced", p, dir.display());
        eprintln!(
            "warning: stale manifest: {p} changed since {} was produced",
            dir.display()
        );
    }
}

fn context(labels: HashMap<String, bool>) -> BuildContext {
    BuildContext {
        labels,
        cache_dir: std::env::var_os(CACHE_ENV).map(PathBuf::from),
        base_dir: None,
    }
}

fn backend_inputs(cfg: &RunConfig) -> Vec<PathBuf> {
    cfg.backends.iter().filter_map(|b| b.path.clone()).collect()
}

// build-dataset

pub fn build_dataset(cfg: &RunConfig) -> anyhow::Result<()> {
    let started = now();
    let parses_path = cfg.parses.as_ref().expect("validated");
    let text = io::read_to_string(parses_path)?;
    let parses = conllu::parse_str(&text)
        .with_context(|| format!("in {}", parses_path.display()))?;
    let corpus = match &cfg.corpus {
        Some(p) => Some(io::read_corpus(p).with_context(|| format!("in {}", p.display()))?),
        None => None,
    };
    let extracted = extract(corpus.as_deref(), &parses, &ExtractionConfig::default())
        .with_context(|| format!("in {}", parses_path.display()))?;
    let bags = build_bags(&extracted.records, cfg.label_mode)?;
    if bags.is_empty() {
        anyhow::bail!(ValidationError("no relative clauses were extracted".into()));
    }
    let sampled = sample_balanced(&bags, cfg.seed)?;
    let samples = split(sampled.samples, cfg.test_fraction, cfg.seed)?;
    let stats = dataset_stats(
        &samples,
        cfg.label_mode,
        cfg.seed,
        cfg.test_fraction,
        bags.len(),
        sampled.warning.clone(),
    );

    let mut out = Outputs::new(&cfg.out)?;
    out.jsonl(RECORDS_FILE, &extracted.records)?;
    out.jsonl(DATASET_FILE, &samples)?;
    for (s, name) in [(Split::Train, "train.jsonl"), (Split::Test, "test.jsonl")] {
        let part: Vec<&DatasetSample> = samples.iter().filter(|x| x.split == Some(s)).collect();
        out.jsonl(name, &part)?;
    }
    out.json("stats.json", &stats)?;
    out.json("extraction.json", &serde_json::json!({
        "stats": extracted.stats,
        "wordlists": extracted.wordlists,
    }))?;
    out.text("stats.csv", &render_stats_csv(&stats))?;
    let mut inputs = vec![parses_path.clone()];
    inputs.extend(cfg.corpus.clone());
    out.finish(cfg, &inputs, started)?;
    eprintln!(
        "{} records, {} samples ({} train / {} test) in {}",
        extracted.records.len(),
        samples.len(),
        stats.splits[&Split::Train].total,
        stats.splits[&Split::Test].total,
        cfg.out.display()
    );
    if let Some(w) = sampled.warning {
        anyhow::bail!(InfeasibleBalance(w.message));
    }
    Ok(())
}

/// Counts per split and modification, with label columns.
fn render_stats_csv(stats: &rcprobe_core::pair_forge::DatasetStats) -> String {
    let mut s = String::from("split,modification,acceptable,unacceptable\n");
    for (split, st) in &stats.splits {
        let split = match split {
            Split::Train => "train",
            Split::Test => "test",
        };
        for (kind, labels) in &st.modifications {
            let _ = writeln!(
                s,
                "{split},{},{},{}",
                kind.as_str(),
                labels.get("1").copied().unwrap_or(0),
                labels.get("0").copied().unwrap_or(0)
            );
        }
        let _ = writeln!(
            s,
            "{split},total,{},{}",
            st.acceptable.get("1").copied().unwrap_or(0),
            st.acceptable.get("0").copied().unwrap_or(0)
        );
    }
    s
}

// probe

pub fn probe_stem(backend: &str, pooling: Option<Pooling>) -> String {
    match pooling {
        Some(p) => format!("probe_{}_{}", slug(backend), p),
        None => format!("probe_{}", slug(backend)),
    }
}

fn poolings(cfg: &RunConfig, b: &BackendConfig) -> Vec<Pooling> {
    let mut p = if cfg.pooling.is_empty() {
        b.pooling.clone()
    } else {
        cfg.pooling.clone()
    };
    p.sort();
    p.dedup();
    p
}

pub fn probe(cfg: &RunConfig) -> anyhow::Result<()> {
    let started = now();
    let dataset_dir = cfg.dataset.as_ref().expect("validated");
    warn_stale(dataset_dir);
    let dataset_file = dataset_dir.join(DATASET_FILE);
    let dataset: Vec<DatasetSample> = io::read_jsonl(&dataset_file)
        .with_context(|| format!("in {}", dataset_file.display()))?;
    let labels: HashMap<String, bool> = dataset.iter().map(|s| (s.text.clone(), s.label)).collect();
    let ctx = context(labels);
    let mut out = Outputs::new(&cfg.out)?;
    let mut curves = String::from("backend,pooling,layer,accuracy\n");
    let mut failures = Vec::new();

    for bcfg in &cfg.backends {
        let backend = match build_backend(bcfg, &ctx) {
            Ok(b) => b,
            Err(e) => {
                log::error!("backend `{}` failed to load: {e}", bcfg.name);
                failures.push(format!("{}: {e}", bcfg.name));
                continue;
            }
        };
        let caps = backend.capabilities();
        let runs: Vec<Option<Pooling>> = if caps.embeddings {
            poolings(cfg, bcfg).into_iter().map(Some).collect()
        } else {
            vec![None]
        };
        for pooling in runs {
            let sweep_cfg = SweepConfig {
                probe: cfg.probe,
                seed: cfg.seed,
                include_specials: bcfg.include_specials,
            };
            let result = layer_sweep(
                backend.as_ref(),
                &dataset,
                pooling.unwrap_or(Pooling::Mean),
                &sweep_cfg,
            );
            let sweep = match result {
                Ok(s) => s,
                Err(e) if e.is_backend() => {
                    log::error!("backend `{}` failed: {e}", bcfg.name);
                    failures.push(format!("{}: {e}", bcfg.name));
                    break;
                }
                Err(e) => return Err(e.into()),
            };
            let stem = probe_stem(&bcfg.name, pooling);
            out.json(&format!("{stem}.json"), &sweep.report)?;
            out.text(&format!("{stem}.csv"), &render_probe_csv(&sweep.report))?;
            if let Some(model) = &sweep.best_probe {
                out.json(&format!("{stem}.model.json"), model)?;
            }
            for (layer, acc) in &sweep.report.per_layer_accuracy {
                let _ = writeln!(
                    curves,
                    "{},{},{layer},{acc:.6}",
                    bcfg.name,
                    pooling.map(|p| p.as_str()).unwrap_or("rule")
                );
            }
            eprintln!(
                "{} {}: best layer {} accuracy {:.4}",
                bcfg.name,
                pooling.map(|p| p.as_str()).unwrap_or("rule"),
                sweep.report.best_layer,
                sweep.report.overall_accuracy
            );
        }
    }
    out.text("layer_curves.csv", &curves)?;
    let mut inputs = vec![dataset_file];
    inputs.extend(backend_inputs(cfg));
    out.finish(cfg, &inputs, started)?;
    if !failures.is_empty() {
        anyhow::bail!(BackendFailures(failures));
    }
    Ok(())
}

/// One row per layer: accuracies overall and per modification.
pub fn render_probe_csv(r: &ProbeReport) -> String {
    let mut s = String::from("backend,pooling,layer,train_accuracy,test_accuracy");
    for k in ModificationKind::ALL {
        let _ = write!(s, ",{}", k.as_str());
    }
    s.push('\n');
    for l in &r.layers {
        let _ = write!(
            s,
            "{},{},{},{:.6},{:.6}",
            r.backend_id, r.pooling, l.layer, l.train_accuracy, l.test_accuracy
        );
        for k in ModificationKind::ALL {
            match l.per_modification.get(&k) {
                Some(g) => {
                    let _ = write!(s, ",{:.6}", g.accuracy);
                }
                None => s.push(','),
            }
        }
        s.push('\n');
    }
    s
}

// diagnose

fn load_models(dir: &Path) -> anyhow::Result<Vec<(PathBuf, LinearProbe)>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".model.json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let m: LinearProbe = io::read_json(&p).with_context(|| format!("in {}", p.display()))?;
            Ok((p, m))
        })
        .collect()
}

pub fn diagnose(cfg: &RunConfig) -> anyhow::Result<()> {
    let started = now();
    let probe_dir = cfg.probe_dir.as_ref().expect("validated");
    warn_stale(probe_dir);
    let suite = match &cfg.suite {
        Some(p) => DiagnosticSuite::load(p).with_context(|| format!("in {}", p.display()))?,
        None => load_builtin_suite(),
    };
    let models = load_models(probe_dir)?;
    // The separable mock needs labels to place its vectors.
    let labels = suite
        .sentences
        .iter()
        .map(|s| (s.text.clone(), s.expected_acceptable))
        .collect();
    let ctx = context(labels);
    let mut out = Outputs::new(&cfg.out)?;
    out.text("suite.jsonl", &suite.to_jsonl()?)?;
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    let mut inputs: Vec<PathBuf> = cfg.suite.iter().cloned().collect();
    for bcfg in &cfg.backends {
        let mine: Vec<&(PathBuf, LinearProbe)> =
            models.iter().filter(|(_, m)| m.backend_id == bcfg.name).collect();
        if mine.is_empty() {
            anyhow::bail!(ValidationError(format!(
                "no trained probe for backend `{}` in {}",
                bcfg.name,
                probe_dir.display()
            )));
        }
        let backend = match build_backend(bcfg, &ctx) {
            Ok(b) => b,
            Err(e) => {
                failures.push(format!("{}: {e}", bcfg.name));
                continue;
            }
        };
        for (path, model) in mine {
            inputs.push(path.clone());
            let report = match evaluate_suite(model, backend.as_ref(), &suite) {
                Ok(r) => r,
                Err(e) if e.is_backend() => {
                    failures.push(format!("{}: {e}", bcfg.name));
                    break;
                }
                Err(e) => return Err(e.into()),
            };
            let stem = format!("diagnostics_{}_{}", slug(&bcfg.name), model.pooling);
            out.json(&format!("{stem}.json"), &report)?;
            reports.push(report);
        }
    }
    out.text("diagnostics_table.csv", &render_table_csv(&reports))?;
    inputs.extend(backend_inputs(cfg));
    out.finish(cfg, &inputs, started)?;
    if !failures.is_empty() {
        anyhow::bail!(BackendFailures(failures));
    }
    Ok(())
}

// cloze

pub fn cloze(cfg: &RunConfig) -> anyhow::Result<()> {
    let started = now();
    let mut inputs = Vec::new();
    let sources: Vec<ClozeSource> = match &cfg.dataset {
        Some(dir) => {
            warn_stale(dir);
            let p = dir.join(RECORDS_FILE);
            let records: Vec<RcRecord> =
                io::read_jsonl(&p).with_context(|| format!("in {}", p.display()))?;
            inputs.push(p);
            records.iter().map(ClozeSource::from_record).collect()
        }
        None => starter_sources(),
    };
    let ctx = context(HashMap::new());
    let mut out = Outputs::new(&cfg.out)?;
    let mut failures = Vec::new();
    for bcfg in &cfg.backends {
        let backend: Box<dyn Backend> = match build_backend(bcfg, &ctx) {
            Ok(b) => b,
            Err(e) => {
                failures.push(format!("{}: {e}", bcfg.name));
                continue;
            }
        };
        let mut annotated_instances = Vec::new();
        for &kind in &cfg.target_kinds {
            let run = build_cloze_set(&sources, kind, backend.as_ref())
                .and_then(|set| evaluate_cloze(backend.as_ref(), &set, kind).map(|r| (set, r)));
            let (set, report) = match run {
                Ok(x) => x,
                Err(e) if e.is_backend() => {
                    failures.push(format!("{}: {e}", bcfg.name));
                    break;
                }
                Err(e) => return Err(e.into()),
            };
            let stem = format!("cloze_{}_{}", slug(&bcfg.name), kind.as_str());
            out.jsonl(&format!("{stem}.instances.jsonl"), &set.instances)?;
            out.json(&format!("{stem}.json"), &report)?;
            out.text(&format!("{stem}.csv"), &render_metrics_csv(&report)?)?;
            if kind == TargetKind::Antecedent || annotated_instances.is_empty() {
                annotated_instances = set.instances;
            }
        }
        if let Some(path) = cfg.annotations.get(&bcfg.name) {
            let records = read_annotations(path).with_context(|| format!("in {}", path.display()))?;
            let cells = aggregate_qualitative(&records, &annotated_instances)?;
            out.json(&format!("qualitative_{}.json", slug(&bcfg.name)), &cells)?;
            inputs.push(path.clone());
        }
    }
    inputs.extend(backend_inputs(cfg));
    out.finish(cfg, &inputs, started)?;
    if !failures.is_empty() {
        anyhow::bail!(BackendFailures(failures));
    }
    Ok(())
}
