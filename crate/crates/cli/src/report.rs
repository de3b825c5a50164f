//! `report`: combine probe, diagnostics and cloze artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use rcprobe_core::cloze::{ClozeMetrics, ClozeReport, TargetKind};
use rcprobe_core::diagnostics::{render_table_csv, DiagnosticReport};
use rcprobe_core::io;
use rcprobe_core::manifest::stale_dependencies;
use rcprobe_core::pair_forge::ModificationKind;
use rcprobe_core::prober::ProbeReport;

use crate::commands::{now, Outputs};
use crate::config::RunConfig;

#[derive(Default)]
struct Artifacts {
    probes: Vec<ProbeReport>,
    diagnostics: Vec<DiagnosticReport>,
    cloze: Vec<ClozeReport>,
    files: Vec<PathBuf>,
}

fn list(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    v.sort();
    Ok(v)
}

fn collect(dirs: &[PathBuf]) -> anyhow::Result<Artifacts> {
    let mut a = Artifacts::default();
    for dir in dirs {
        for p in stale_dependencies(dir) {
            eprintln!("warning: stale manifest: {p} changed since {} was produced", dir.display());
        }
        for path in list(dir)? {
            let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            if !name.ends_with(".json") || name.ends_with(".model.json") {
                continue;
            }
            let ctx = || format!("in {}", path.display());
            if name.starts_with("probe_") {
                a.probes.push(io::read_json(&path).with_context(ctx)?);
            } else if name.starts_with("diagnostics_") {
                a.diagnostics.push(io::read_json(&path).with_context(ctx)?);
            } else if name.starts_with("cloze_") {
                a.cloze.push(io::read_json(&path).with_context(ctx)?);
            } else {
                continue;
            }
            a.files.push(path);
        }
    }
    Ok(a)
}

#[derive(Serialize)]
struct ProbeLine {
    pooling: String,
    best_layer: usize,
    accuracy: f64,
    baseline_layer0: Option<f64>,
    per_modification: BTreeMap<ModificationKind, f64>,
}

#[derive(Serialize)]
struct DiagnosticLine {
    pooling: String,
    layer: usize,
    overall_accuracy: f64,
    accuracy_by_case: BTreeMap<u8, f64>,
}

#[derive(Serialize)]
struct ClozeLine {
    target_kind: TargetKind,
    overall: Option<ClozeMetrics>,
    skipped: usize,
}

#[derive(Serialize, Default)]
struct BackendSummary {
    probe: Vec<ProbeLine>,
    diagnostics: Vec<DiagnosticLine>,
    cloze: Vec<ClozeLine>,
}

fn pooling_label(r: &ProbeReport) -> String {
    if r.baseline_layer0.is_none() {
        "rule".into()
    } else {
        r.pooling.to_string()
    }
}

fn probe_table_csv(probes: &[ProbeReport]) -> String {
    let mut s = String::from("backend,pooling,best_layer,total");
    for k in ModificationKind::ALL {
        let _ = write!(s, ",{}", k.as_str());
    }
    s.push_str(",baseline_total");
    for k in ModificationKind::ALL {
        let _ = write!(s, ",baseline_{}", k.as_str());
    }
    s.push('\n');
    let cell = |v: Option<&f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for r in probes {
        let _ = write!(
            s,
            "{},{},{},{:.6}",
            r.backend_id,
            pooling_label(r),
            r.best_layer,
            r.overall_accuracy
        );
        for k in ModificationKind::ALL {
            let _ = write!(s, ",{}", cell(r.per_modification_accuracy.get(&k)));
        }
        let _ = write!(s, ",{}", cell(r.baseline_layer0.as_ref()));
        for k in ModificationKind::ALL {
            let _ = write!(s, ",{}", cell(r.baseline_layer0_per_modification.get(&k)));
        }
        s.push('\n');
    }
    s
}

fn curves_csv(probes: &[ProbeReport]) -> String {
    let mut s = String::from("backend,pooling,layer,accuracy\n");
    for r in probes {
        for (layer, acc) in &r.per_layer_accuracy {
            let _ = writeln!(s, "{},{},{layer},{acc:.6}", r.backend_id, pooling_label(r));
        }
    }
    s
}

fn cloze_csv(reports: &[ClozeReport]) -> String {
    let mut s = String::from("backend,target_kind,cell,mp_at_1,mtr,nme,relativizer_ratio,n_evaluated,n_skipped\n");
    for r in reports {
        for c in &r.cells {
            let _ = write!(s, "{},{},{}", r.backend_id, r.target_kind.as_str(), c.column());
            match &c.metrics {
                Some(m) => {
                    let _ = writeln!(
                        s,
                        ",{:.6},{:.6},{:.6},{},{},{}",
                        m.mp_at_1,
                        m.mtr,
                        m.nme,
                        m.relativizer_ratio.map(|v| format!("{v:.6}")).unwrap_or_default(),
                        m.n_evaluated,
                        m.n_skipped
                    );
                }
                None => {
                    let _ = writeln!(s, ",,,,,0,{}", c.n_skipped);
                }
            }
        }
    }
    s
}

fn summaries(a: &Artifacts) -> BTreeMap<String, BackendSummary> {
    let mut out: BTreeMap<String, BackendSummary> = BTreeMap::new();
    for r in &a.probes {
        out.entry(r.backend_id.clone()).or_default().probe.push(ProbeLine {
            pooling: pooling_label(r),
            best_layer: r.best_layer,
            accuracy: r.overall_accuracy,
            baseline_layer0: r.baseline_layer0,
            per_modification: r.per_modification_accuracy.clone(),
        });
    }
    for r in &a.diagnostics {
        out.entry(r.backend_id.clone()).or_default().diagnostics.push(DiagnosticLine {
            pooling: r.pooling.to_string(),
            layer: r.layer,
            overall_accuracy: r.overall_accuracy,
            accuracy_by_case: r.accuracy.clone(),
        });
    }
    for r in &a.cloze {
        out.entry(r.backend_id.clone()).or_default().cloze.push(ClozeLine {
            target_kind: r.target_kind,
            overall: r.overall.clone(),
            skipped: r.skipped.len(),
        });
    }
    out
}

fn markdown(s: &BTreeMap<String, BackendSummary>) -> String {
    let mut md = String::from("# rcprobe summary\n");
    for (backend, b) in s {
        let _ = writeln!(md, "\n## {backend}\n");
        if !b.probe.is_empty() {
            md.push_str("Probing (best layer chosen on test accuracy):\n\n");
            md.push_str("| pooling | best layer | accuracy | layer 0 |\n|---|---|---|---|\n");
            for p in &b.probe {
                let base = p.baseline_layer0.map(|v| format!("{:.2}", 100.0 * v)).unwrap_or("-".into());
                let _ = writeln!(
                    md,
                    "| {} | {} | {:.2} | {base} |",
                    p.pooling,
                    p.best_layer,
                    100.0 * p.accuracy
                );
            }
            md.push('\n');
        }
        for d in &b.diagnostics {
            let _ = write!(
                md,
                "Diagnostics ({} pooling, layer {}): {:.1}% correct;",
                d.pooling,
                d.layer,
                100.0 * d.overall_accuracy
            );
            for (case, acc) in &d.accuracy_by_case {
                let _ = write!(md, " case {case} {:.0}%", 100.0 * acc);
            }
            md.push_str("\n\n");
        }
        for c in &b.cloze {
            match &c.overall {
                Some(m) => {
                    let _ = writeln!(
                        md,
                        "Cloze {}: MP@1 {:.2}, MTR {:.2}, NME {:.2}{} over {} instances ({} skipped)\n",
                        c.target_kind.as_str(),
                        m.mp_at_1,
                        m.mtr,
                        m.nme,
                        m.relativizer_ratio
                            .map(|r| format!(", relativizer ratio {r:.2}"))
                            .unwrap_or_default(),
                        m.n_evaluated,
                        c.skipped
                    );
                }
                None => {
                    let _ = writeln!(md, "Cloze {}: no scorable instances\n", c.target_kind.as_str());
                }
            }
        }
    }
    md
}

pub fn report(cfg: &RunConfig) -> anyhow::Result<()> {
    let started = now();
    let a = collect(&cfg.inputs)?;
    if a.files.is_empty() {
        anyhow::bail!(crate::ValidationError("no probe, diagnostics or cloze artifacts found".into()));
    }
    let s = summaries(&a);
    let mut out = Outputs::new(&cfg.out)?;
    out.text("summary.md", &markdown(&s))?;
    out.json("summary.json", &s)?;
    if !a.probes.is_empty() {
        out.text("probe_table.csv", &probe_table_csv(&a.probes))?;
        out.text("layer_curves.csv", &curves_csv(&a.probes))?;
    }
    if !a.diagnostics.is_empty() {
        out.text("diagnostics_table.csv", &render_table_csv(&a.diagnostics))?;
    }
    if !a.cloze.is_empty() {
        out.text("cloze_table.csv", &cloze_csv(&a.cloze))?;
    }
    out.finish(cfg, &a.files, started)?;
    Ok(())
}
