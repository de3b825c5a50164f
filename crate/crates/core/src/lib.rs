//! Minimal-pair datasets for English relative clauses, and probes, targeted
//! diagnostics and cloze metrics for evaluating encoders on them.
//!
//! Pipeline: [`conllu`] parses -> [`extraction`] records -> [`pair_forge`]
//! samples -> [`prober`] / [`diagnostics`] / [`cloze`] reports.

pub mod backends;
pub mod cloze;
pub mod conllu;
pub mod diagnostics;
pub mod error;
pub mod extraction;
pub mod io;
pub mod manifest;
pub mod pair_forge;
pub mod prober;
pub mod sentence;
pub mod synthetic;

pub use backends::{
    build_backend, Backend, BackendConfig, BackendKind, BuildContext, Capabilities,
    LayerEmbeddings, MaskedDistribution, Pooling, Provenance, SentenceVector, TokenizedSentence,
};
pub use cloze::{ClozeInstance, ClozeMetrics, ClozeReport, QualitativeRecord, RcType, TargetKind};
pub use diagnostics::{DiagnosticReport, DiagnosticSentence, DiagnosticSuite};
pub use error::{Error, Result};
pub use extraction::{ExtractionConfig, RcRecord, RelativizerForm};
pub use manifest::RunManifest;
pub use pair_forge::{DatasetSample, LabelMode, ModificationKind, Split};
pub use prober::{LinearProbe, ProbeConfig, ProbeReport};
pub use sentence::{ParsedSentence, Token};
