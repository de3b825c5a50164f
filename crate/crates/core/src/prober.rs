//! Linear acceptability probes over frozen sentence vectors.
//!
//! Probes are L2-regularized logistic regression fitted with L-BFGS on
//! unstandardized features; the bias is not penalized. The objective is
//! `sum_i log(1 + exp(-y_i (w.x_i + b))) + l2/2 |w|^2` with `y_i` in {-1, +1}.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::{pool, Backend, LayerEmbeddings, Pooling, Provenance, SentenceVector};
use crate::error::{Error, Result};
use crate::pair_forge::{DatasetSample, ModificationKind, Split};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub l2_strength: f64,
    pub max_iter: usize,
    /// Stop once the largest gradient component of the per-sample objective
    /// falls below this.
    pub tol: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            l2_strength: 1.0,
            max_iter: 1000,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearProbe {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub layer: usize,
    pub pooling: Pooling,
    pub backend_id: String,
    pub seed: u64,
    pub l2_strength: f64,
    /// Whether special tokens took part in pooling.
    #[serde(default)]
    pub include_specials: bool,
    pub converged: bool,
    pub iterations: usize,
}

impl LinearProbe {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

/// `w.x + b`.
pub fn probe_logit(probe: &LinearProbe, x: &[f32]) -> Result<f64> {
    if x.len() != probe.weights.len() {
        return Err(Error::DimensionMismatch {
            expected: probe.weights.len(),
            actual: x.len(),
        });
    }
    Ok(dot(&probe.weights, x) + probe.bias)
}

/// Strictly positive logits are acceptable; zero is not.
pub fn classify(logit: f64) -> bool {
    logit > 0.0
}

fn dot(w: &[f64], x: &[f32]) -> f64 {
    w.iter().zip(x).map(|(a, &b)| a * b as f64).sum()
}

/// log(1 + exp(t)) without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

struct Objective<'a> {
    x: &'a [&'a [f32]],
    y: Vec<f64>,
    l2: f64,
    dim: usize,
}

impl Objective<'_> {
    /// Value and gradient, both divided by n. `theta` is `[w..., b]`.
    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.x.len() as f64;
        let (w, b) = (&theta[..self.dim], theta[self.dim]);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut value = 0.0;
        for (xi, &yi) in self.x.iter().zip(&self.y) {
            let margin = yi * (dot(w, xi) + b);
            value += softplus(-margin);
            let coef = -yi * sigmoid(-margin);
            for (g, &v) in grad[..self.dim].iter_mut().zip(xi.iter()) {
                *g += coef * v as f64;
            }
            grad[self.dim] += coef;
        }
        let wsq: f64 = w.iter().map(|v| v * v).sum();
        value += 0.5 * self.l2 * wsq;
        for (g, &wi) in grad[..self.dim].iter_mut().zip(w) {
            *g += self.l2 * wi;
        }
        grad.iter_mut().for_each(|g| *g /= n);
        value / n
    }
}

struct FitResult {
    theta: Vec<f64>,
    converged: bool,
    iterations: usize,
}

fn lbfgs(obj: &Objective<'_>, config: &ProbeConfig) -> FitResult {
    const MEMORY: usize = 10;
    let p = obj.dim + 1;
    let mut theta = vec![0.0; p];
    let mut grad = vec![0.0; p];
    let mut f = obj.eval(&theta, &mut grad);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let inf_norm = |g: &[f64]| g.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut new_theta = vec![0.0; p];
    let mut new_grad = vec![0.0; p];
    for iter in 0..config.max_iter {
        if inf_norm(&grad) <= config.tol {
            return FitResult { theta, converged: true, iterations: iter };
        }
        // Two-loop recursion.
        let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
        let k = s_hist.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            alpha[i] = rho_hist[i] * s_hist[i].iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>();
            for (d, yv) in dir.iter_mut().zip(&y_hist[i]) {
                *d -= alpha[i] * yv;
            }
        }
        if k > 0 {
            let sy: f64 = s_hist[k - 1].iter().zip(&y_hist[k - 1]).map(|(a, b)| a * b).sum();
            let yy: f64 = y_hist[k - 1].iter().map(|v| v * v).sum();
            let gamma = sy / yy;
            dir.iter_mut().for_each(|d| *d *= gamma);
        } else {
            let gn = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            dir.iter_mut().for_each(|d| *d /= gn.max(1.0));
        }
        for i in 0..k {
            let beta = rho_hist[i] * y_hist[i].iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>();
            for (d, sv) in dir.iter_mut().zip(&s_hist[i]) {
                *d += (alpha[i] - beta) * sv;
            }
        }
        let mut slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
        if slope >= 0.0 {
            // Not a descent direction; restart from steepest descent.
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            dir = grad.iter().map(|g| -g).collect();
            slope = -grad.iter().map(|g| g * g).sum::<f64>();
        }
        // Backtracking line search (Armijo).
        let mut step = 1.0;
        let mut accepted = false;
        let mut new_f = f;
        for _ in 0..60 {
            for ((nt, t), d) in new_theta.iter_mut().zip(&theta).zip(&dir) {
                *nt = t + step * d;
            }
            new_f = obj.eval(&new_theta, &mut new_grad);
            if new_f <= f + 1e-4 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return FitResult { theta, converged: inf_norm(&grad) <= config.tol, iterations: iter };
        }
        let s: Vec<f64> = new_theta.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        let decrease = f - new_f;
        theta.copy_from_slice(&new_theta);
        grad.copy_from_slice(&new_grad);
        f = new_f;
        if sy > 1e-12 {
            if s_hist.len() == MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(yv);
            rho_hist.push(1.0 / sy);
        }
        if decrease.abs() <= 1e-15 * f.abs().max(1.0) {
            return FitResult {
                converged: inf_norm(&grad) <= config.tol,
                theta,
                iterations: iter + 1,
            };
        }
    }
    FitResult {
        converged: inf_norm(&grad) <= config.tol,
        theta,
        iterations: config.max_iter,
    }
}

/// Fits a probe on vectors that all come from the same layer and pooling.
pub fn train_probe(
    vectors: &[SentenceVector],
    labels: &[bool],
    backend_id: &str,
    seed: u64,
    config: &ProbeConfig,
) -> Result<LinearProbe> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::DegenerateInput("no training vectors".into()))?;
    if vectors.iter().any(|v| v.layer != first.layer || v.pooling != first.pooling) {
        return Err(Error::InvalidArgument(
            "training vectors mix layers or pooling strategies".into(),
        ));
    }
    let rows: Vec<&[f32]> = vectors.iter().map(|v| v.values.as_slice()).collect();
    let (weights, bias, converged, iterations) = fit_logistic(&rows, labels, config)?;
    Ok(LinearProbe {
        weights,
        bias,
        layer: first.layer,
        pooling: first.pooling,
        backend_id: backend_id.to_string(),
        seed,
        l2_strength: config.l2_strength,
        include_specials: false,
        converged,
        iterations,
    })
}

/// Raw logistic-regression fit: `(weights, bias, converged, iterations)`.
pub fn fit_logistic(
    rows: &[&[f32]],
    labels: &[bool],
    config: &ProbeConfig,
) -> Result<(Vec<f64>, f64, bool, usize)> {
    if rows.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            actual: labels.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::DegenerateInput(
            "training labels contain a single class".into(),
        ));
    }
    let dim = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    if rows.iter().any(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidArgument("non-finite feature value".into()));
    }
    let obj = Objective {
        x: rows,
        y: labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect(),
        l2: config.l2_strength,
        dim,
    };
    let fit = lbfgs(&obj, config);
    if !fit.converged {
        log::warn!(
            "logistic regression stopped after {} iterations without converging",
            fit.iterations
        );
    }
    let bias = fit.theta[dim];
    let mut weights = fit.theta;
    weights.truncate(dim);
    Ok((weights, bias, fit.converged, fit.iterations))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupAccuracy {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

/// Accuracy within each modification kind present among `samples`.
pub fn group_by_modification(
    predictions: &[bool],
    samples: &[&DatasetSample],
) -> BTreeMap<ModificationKind, GroupAccuracy> {
    let mut counts: BTreeMap<ModificationKind, (usize, usize)> = BTreeMap::new();
    for (pred, s) in predictions.iter().zip(samples) {
        let e = counts.entry(s.modification).or_default();
        e.1 += 1;
        if *pred == s.label {
            e.0 += 1;
        }
    }
    counts
        .into_iter()
        .map(|(k, (correct, total))| {
            (
                k,
                GroupAccuracy {
                    correct,
                    total,
                    accuracy: correct as f64 / total as f64,
                },
            )
        })
        .collect()
}

pub fn accuracy(predictions: &[bool], samples: &[&DatasetSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let correct = predictions
        .iter()
        .zip(samples)
        .filter(|(p, s)| **p == s.label)
        .count();
    correct as f64 / samples.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub l2_strength: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub standardized: bool,
    pub include_specials: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerResult {
    pub layer: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub per_modification: BTreeMap<ModificationKind, GroupAccuracy>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub backend_id: String,
    pub provenance: Provenance,
    pub pooling: Pooling,
    pub per_layer_accuracy: BTreeMap<usize, f64>,
    pub best_layer: usize,
    /// Test accuracy of the best layer.
    pub overall_accuracy: f64,
    pub per_modification_accuracy: BTreeMap<ModificationKind, f64>,
    pub per_modification_count: BTreeMap<ModificationKind, usize>,
    /// Mean-pooled layer-0 accuracy; absent for the rule baseline.
    pub baseline_layer0: Option<f64>,
    pub baseline_layer0_per_modification: BTreeMap<ModificationKind, f64>,
    pub layers: Vec<LayerResult>,
    pub n_train: usize,
    pub n_test: usize,
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
    /// The best layer is chosen on test accuracy.
    pub optimistic_selection: bool,
    pub backend_diagnostics: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub probe: ProbeConfig,
    pub seed: u64,
    pub include_specials: bool,
}

pub struct SweepOutput {
    pub report: ProbeReport,
    /// Probe of the best layer; `None` for the rule baseline.
    pub best_probe: Option<LinearProbe>,
}

fn embed_all(backend: &dyn Backend, texts: &[&str]) -> Result<Vec<LayerEmbeddings>> {
    if backend.concurrent() {
        texts.par_iter().map(|t| backend.embed_layers(t)).collect()
    } else {
        texts.iter().map(|t| backend.embed_layers(t)).collect()
    }
}

/// Per-layer pooled vectors: `out[layer][sample]`.
fn pooled_by_layer(
    embeddings: &[LayerEmbeddings],
    strategy: Pooling,
    include_specials: bool,
    layers: std::ops::Range<usize>,
) -> Result<Vec<Vec<SentenceVector>>> {
    layers
        .map(|l| {
            embeddings
                .iter()
                .map(|e| pool(e, l, strategy, include_specials))
                .collect()
        })
        .collect()
}

fn by_split(dataset: &[DatasetSample]) -> Result<(Vec<&DatasetSample>, Vec<&DatasetSample>)> {
    let train: Vec<_> = dataset.iter().filter(|s| s.split == Some(Split::Train)).collect();
    let test: Vec<_> = dataset.iter().filter(|s| s.split == Some(Split::Test)).collect();
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidArgument(
            "dataset needs non-empty train and test splits".into(),
        ));
    }
    Ok((train, test))
}

fn per_mod_acc(groups: &BTreeMap<ModificationKind, GroupAccuracy>) -> BTreeMap<ModificationKind, f64> {
    groups.iter().map(|(k, g)| (*k, g.accuracy)).collect()
}

/// Best layer by test accuracy, lowest index on ties.
pub fn select_best_layer(per_layer: &BTreeMap<usize, f64>) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (&l, &acc) in per_layer {
        if best.is_none_or(|(_, b)| acc > b) {
            best = Some((l, acc));
        }
    }
    best.map(|(l, _)| l).unwrap_or(0)
}

/// Trains one probe per layer and reports test accuracies.
pub fn layer_sweep(
    backend: &dyn Backend,
    dataset: &[DatasetSample],
    pooling: Pooling,
    config: &SweepConfig,
) -> Result<SweepOutput> {
    let (train, test) = by_split(dataset)?;
    let caps = backend.capabilities();
    let hyper = Hyperparameters {
        l2_strength: config.probe.l2_strength,
        max_iter: config.probe.max_iter,
        tol: config.probe.tol,
        standardized: false,
        include_specials: config.include_specials,
    };
    let count_of = |groups: &BTreeMap<ModificationKind, GroupAccuracy>| {
        groups.iter().map(|(k, g)| (*k, g.total)).collect()
    };

    if !caps.embeddings {
        if !caps.rule {
            return Err(backend.unsupported("embeddings or rule classification"));
        }
        let train_pred = train
            .iter()
            .map(|s| backend.rule_classify(&s.text))
            .collect::<Result<Vec<_>>>()?;
        let test_pred = test
            .iter()
            .map(|s| backend.rule_classify(&s.text))
            .collect::<Result<Vec<_>>>()?;
        let groups = group_by_modification(&test_pred, &test);
        let acc = accuracy(&test_pred, &test);
        let layer = LayerResult {
            layer: 0,
            train_accuracy: accuracy(&train_pred, &train),
            test_accuracy: acc,
            per_modification: groups.clone(),
            converged: true,
            iterations: 0,
        };
        let report = ProbeReport {
            backend_id: backend.id().to_string(),
            provenance: backend.provenance(),
            pooling,
            per_layer_accuracy: BTreeMap::from([(0, acc)]),
            best_layer: 0,
            overall_accuracy: acc,
            per_modification_accuracy: per_mod_acc(&groups),
            per_modification_count: count_of(&groups),
            baseline_layer0: None,
            baseline_layer0_per_modification: BTreeMap::new(),
            layers: vec![layer],
            n_train: train.len(),
            n_test: test.len(),
            hyperparameters: hyper,
            seed: config.seed,
            optimistic_selection: false,
            backend_diagnostics: BTreeMap::new(),
        };
        return Ok(SweepOutput {
            report,
            best_probe: None,
        });
    }

    let train_texts: Vec<&str> = train.iter().map(|s| s.text.as_str()).collect();
    let test_texts: Vec<&str> = test.iter().map(|s| s.text.as_str()).collect();
    let train_emb = embed_all(backend, &train_texts)?;
    let test_emb = embed_all(backend, &test_texts)?;
    let n_layers = train_emb[0].layers.len();
    if let Some(bad) = train_emb.iter().chain(&test_emb).find(|e| e.layers.len() != n_layers) {
        return Err(Error::backend(
            backend.id(),
            format!("inconsistent layer count {} vs {n_layers}", bad.layers.len()),
        ));
    }
    let train_labels: Vec<bool> = train.iter().map(|s| s.label).collect();

    let train_vecs = pooled_by_layer(&train_emb, pooling, config.include_specials, 0..n_layers)?;
    let test_vecs = pooled_by_layer(&test_emb, pooling, config.include_specials, 0..n_layers)?;

    let fit_layer = |train_v: &[SentenceVector], test_v: &[SentenceVector]| -> Result<(LinearProbe, LayerResult)> {
        let mut probe = train_probe(train_v, &train_labels, backend.id(), config.seed, &config.probe)?;
        probe.include_specials = config.include_specials;
        let predict = |vs: &[SentenceVector]| -> Result<Vec<bool>> {
            vs.iter()
                .map(|v| probe_logit(&probe, &v.values).map(classify))
                .collect()
        };
        let train_pred = predict(train_v)?;
        let test_pred = predict(test_v)?;
        let result = LayerResult {
            layer: probe.layer,
            train_accuracy: accuracy(&train_pred, &train),
            test_accuracy: accuracy(&test_pred, &test),
            per_modification: group_by_modification(&test_pred, &test),
            converged: probe.converged,
            iterations: probe.iterations,
        };
        Ok((probe, result))
    };

    let fitted: Vec<(LinearProbe, LayerResult)> = (0..n_layers)
        .into_par_iter()
        .map(|l| fit_layer(&train_vecs[l], &test_vecs[l]))
        .collect::<Result<_>>()?;

    let per_layer_accuracy: BTreeMap<usize, f64> = fitted
        .iter()
        .map(|(_, r)| (r.layer, r.test_accuracy))
        .collect();
    let best_layer = select_best_layer(&per_layer_accuracy);
    let best = &fitted[best_layer];

    // Layer 0 is always reported with mean pooling.
    let baseline = if pooling == Pooling::Mean {
        fitted[0].1.clone()
    } else {
        let tr = pooled_by_layer(&train_emb, Pooling::Mean, config.include_specials, 0..1)?;
        let te = pooled_by_layer(&test_emb, Pooling::Mean, config.include_specials, 0..1)?;
        fit_layer(&tr[0], &te[0])?.1
    };

    let report = ProbeReport {
        backend_id: backend.id().to_string(),
        provenance: backend.provenance(),
        pooling,
        per_layer_accuracy,
        best_layer,
        overall_accuracy: best.1.test_accuracy,
        per_modification_accuracy: per_mod_acc(&best.1.per_modification),
        per_modification_count: count_of(&best.1.per_modification),
        baseline_layer0: Some(baseline.test_accuracy),
        baseline_layer0_per_modification: per_mod_acc(&baseline.per_modification),
        n_train: train.len(),
        n_test: test.len(),
        hyperparameters: hyper,
        seed: config.seed,
        optimistic_selection: n_layers > 1,
        backend_diagnostics: backend.diagnostics().into_iter().collect(),
        layers: fitted.iter().map(|(_, r)| r.clone()).collect(),
    };
    Ok(SweepOutput {
        report,
        best_probe: Some(best.0.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(values: Vec<f32>) -> SentenceVector {
        SentenceVector {
            layer: 0,
            pooling: Pooling::Mean,
            values,
        }
    }

    #[test]
    fn separable_clusters_fit_perfectly() {
        let mut vs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..50 {
            let t = i as f32 / 50.0;
            vs.push(sv(vec![2.0 + t, 1.0 - t]));
            ys.push(true);
            vs.push(sv(vec![-2.0 - t, -1.0 + t]));
            ys.push(false);
        }
        let p = train_probe(&vs, &ys, "m", 3, &ProbeConfig::default()).unwrap();
        assert!(p.converged);
        let acc = vs
            .iter()
            .zip(&ys)
            .filter(|(v, y)| classify(probe_logit(&p, &v.values).unwrap()) == **y)
            .count();
        assert_eq!(acc, 100);
        let again = train_probe(&vs, &ys, "m", 3, &ProbeConfig::default()).unwrap();
        assert_eq!(p.weights, again.weights);
        assert_eq!(p.bias, again.bias);
    }

    #[test]
    fn single_class_is_degenerate() {
        let vs = vec![sv(vec![1.0]), sv(vec![2.0])];
        assert!(matches!(
            train_probe(&vs, &[true, true], "m", 0, &ProbeConfig::default()),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn constant_probe_and_boundary() {
        let p = LinearProbe {
            weights: vec![0.0; 3],
            bias: 0.3,
            layer: 0,
            pooling: Pooling::Mean,
            backend_id: "x".into(),
            seed: 0,
            l2_strength: 1.0,
            include_specials: false,
            converged: true,
            iterations: 0,
        };
        assert_eq!(probe_logit(&p, &[5.0, -1.0, 2.0]).unwrap(), 0.3);
        assert!(!classify(0.0));
        assert!(classify(1e-300));
        assert!(matches!(
            probe_logit(&p, &[1.0]),
            Err(Error::DimensionMismatch { expected: 3, actual: 1 })
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let rows_owned: Vec<Vec<f32>> = vec![
            vec![0.5, -1.0, 2.0],
            vec![1.5, 0.25, -0.5],
            vec![-0.75, 1.0, 0.0],
            vec![0.1, 0.2, 0.3],
        ];
        let rows: Vec<&[f32]> = rows_owned.iter().map(|r| r.as_slice()).collect();
        let obj = Objective {
            x: &rows,
            y: vec![1.0, -1.0, 1.0, -1.0],
            l2: 0.7,
            dim: 3,
        };
        let theta = vec![0.3, -0.2, 0.5, 0.1];
        let mut grad = vec![0.0; 4];
        obj.eval(&theta, &mut grad);
        let h = 1e-6;
        let mut scratch = vec![0.0; 4];
        for i in 0..4 {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (obj.eval(&plus, &mut scratch) - obj.eval(&minus, &mut scratch)) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-7, "component {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn best_layer_ties_go_low() {
        let m = BTreeMap::from([(0, 0.7), (1, 0.9), (2, 0.9), (3, 0.8)]);
        assert_eq!(select_best_layer(&m), 1);
    }
}
