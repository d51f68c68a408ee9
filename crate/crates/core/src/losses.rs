//! Classification losses over per-class probability scores: the top-C
//! loss and its C = 2 specialization, plus the BCE, focal and softmax
//! cross-entropy baselines. Gradients are taken with respect to the score
//! vector.

use crate::error::{Error, Result};
use crate::numerics::GradedValue;

/// Clamp applied inside every logarithm of the baseline losses.
pub const LOG_CLAMP: f64 = 1e-12;

/// Default expected score for the ranked false classes.
pub const DEFAULT_BETA_MINUS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores {
    scores: Vec<f64>,
    true_label: usize,
}

impl ClassScores {
    pub fn new(scores: Vec<f64>, true_label: usize) -> Result<Self> {
        if scores.len() < 2 {
            return Err(Error::invalid(format!("need at least 2 classes, got {}", scores.len())));
        }
        if let Some(k) = scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::invalid(format!("score {k} = {} is outside [0, 1]", scores[k])));
        }
        if true_label >= scores.len() {
            return Err(Error::invalid(format!(
                "true label {true_label} out of range for {} classes",
                scores.len()
            )));
        }
        Ok(ClassScores { scores, true_label })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn true_label(&self) -> usize {
        self.true_label
    }

    pub fn num_classes(&self) -> usize {
        self.scores.len()
    }

    /// Score on the true-label class.
    pub fn true_score(&self) -> f64 {
        self.scores[self.true_label]
    }
}

/// Hyperparameters of the top-C loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TclParams {
    beta_plus: f64,
    beta_minus: Vec<f64>,
    eta: f64,
    gamma: f64,
    c: usize,
}

impl TclParams {
    pub fn new(beta_plus: f64, beta_minus: Vec<f64>, eta: f64, gamma: f64, c: usize) -> Result<Self> {
        if c < 2 {
            return Err(Error::invalid(format!("C must be at least 2, got {c}")));
        }
        if beta_minus.len() != c - 1 {
            return Err(Error::invalid(format!(
                "expected {} beta-minus thresholds for C = {c}, got {}",
                c - 1,
                beta_minus.len()
            )));
        }
        if !(0.0..=1.0).contains(&beta_plus) {
            return Err(Error::invalid(format!("beta-plus {beta_plus} outside [0, 1]")));
        }
        if let Some(b) = beta_minus.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return Err(Error::invalid(format!("beta-minus {b} outside [0, 1]")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid(format!("eta must be positive, got {eta}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
        }
        Ok(TclParams {
            beta_plus,
            beta_minus,
            eta,
            gamma,
            c,
        })
    }

    /// eta = gamma = beta-plus = 1 and every beta-minus rank at 0.5.
    pub fn with_c(c: usize) -> Result<Self> {
        Self::new(1.0, vec![DEFAULT_BETA_MINUS; c.saturating_sub(1)], 1.0, 1.0, c)
    }

    pub fn beta_plus(&self) -> f64 {
        self.beta_plus
    }
    pub fn beta_minus(&self) -> &[f64] {
        &self.beta_minus
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn c(&self) -> usize {
        self.c
    }
}

impl Default for TclParams {
    fn default() -> Self {
        Self::with_c(2).expect("default parameters are valid")
    }
}

/// Balance weights of the joint objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub omega: f64,
    pub lambda: f64,
}

impl LossWeights {
    pub fn new(alpha: f64, omega: f64, lambda: f64) -> Result<Self> {
        for (name, w) in [("alpha", alpha), ("omega", omega), ("lambda", lambda)] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {w}")));
            }
        }
        Ok(LossWeights { alpha, omega, lambda })
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 1.0,
            omega: 6.0,
            lambda: 1.0,
        }
    }
}

/// The `count` highest-scoring classes other than the true label, by
/// descending score with ties going to the lower index.
pub fn top_false_classes(s: &ClassScores, count: usize) -> Result<Vec<usize>> {
    let n = s.num_classes();
    if count == 0 || count > n - 1 {
        return Err(Error::invalid(format!(
            "false-class count {count} must lie in [1, {}]",
            n - 1
        )));
    }
    let mut idx: Vec<usize> = (0..n).filter(|&i| i != s.true_label).collect();
    idx.sort_by(|&a, &b| s.scores[b].total_cmp(&s.scores[a]).then(a.cmp(&b)));
    idx.truncate(count);
    Ok(idx)
}

/// log(eta + e^z) and its derivative e^z / (eta + e^z), stable for large z.
fn log_eta_exp(eta: f64, z: f64) -> (f64, f64) {
    if z > 0.0 {
        let r = eta * (-z).exp();
        (z + r.ln_1p(), 1.0 / (1.0 + r))
    } else {
        let e = z.exp();
        ((eta + e).ln(), e / (eta + e))
    }
}

/// The two halves of the top-C loss, kept apart for analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct TclTerms {
    pub positive: f64,
    /// One term per rank, rank 1 first.
    pub negative: Vec<f64>,
    /// Class index behind each negative term.
    pub selected: Vec<usize>,
    pub gradient: Vec<f64>,
}

pub fn tcl_terms(s: &ClassScores, p: &TclParams) -> Result<TclTerms> {
    if p.c > s.num_classes() {
        return Err(Error::invalid(format!(
            "C = {} exceeds the number of classes {}",
            p.c,
            s.num_classes()
        )));
    }
    let mut gradient = vec![0.0; s.num_classes()];
    let (positive, dpos) = log_eta_exp(p.eta, p.gamma * (p.beta_plus - s.true_score()));
    gradient[s.true_label] = -p.gamma * dpos;

    let selected = top_false_classes(s, p.c - 1)?;
    let mut negative = Vec::with_capacity(selected.len());
    for (&cls, &beta) in selected.iter().zip(&p.beta_minus) {
        let (v, d) = log_eta_exp(p.eta, p.gamma * (s.scores[cls] - beta));
        negative.push(v);
        gradient[cls] = p.gamma * d;
    }
    Ok(TclTerms {
        positive,
        negative,
        selected,
        gradient,
    })
}

/// Top-C classification loss. The top-false selection is held fixed when
/// differentiating, so unselected false classes get zero gradient.
pub fn tcl_loss(s: &ClassScores, p: &TclParams) -> Result<GradedValue> {
    let t = tcl_terms(s, p)?;
    let value = t.positive + t.negative.iter().sum::<f64>();
    Ok(GradedValue::new(value, t.gradient))
}

/// [`tcl_loss`] restricted to C = 2.
pub fn tcl2_loss(s: &ClassScores, p: &TclParams) -> Result<GradedValue> {
    if p.c != 2 {
        return Err(Error::invalid(format!("TCL-2 requires C = 2, got C = {}", p.c)));
    }
    tcl_loss(s, p)
}

fn clamp_p(p: f64) -> f64 {
    p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP)
}

/// d ln(clamp(p)) / dp
fn dlog_clamped(p: f64) -> f64 {
    if (LOG_CLAMP..=1.0 - LOG_CLAMP).contains(&p) {
        1.0 / p
    } else {
        0.0
    }
}

/// Per-class binary cross-entropy against the one-hot target.
pub fn bce_loss(s: &ClassScores) -> Result<GradedValue> {
    let mut value = 0.0;
    let mut gradient = Vec::with_capacity(s.num_classes());
    for (i, &si) in s.scores.iter().enumerate() {
        if i == s.true_label {
            value -= clamp_p(si).ln();
            gradient.push(-dlog_clamped(si));
        } else {
            value -= clamp_p(1.0 - si).ln();
            gradient.push(dlog_clamped(1.0 - si));
        }
    }
    Ok(GradedValue::new(value, gradient))
}

pub const DEFAULT_FOCAL_GAMMA: f64 = 2.0;
pub const DEFAULT_FOCAL_ALPHA: f64 = 0.25;

/// Sum over classes of `-w (1 - p)^gamma ln p`, where p is the probability
/// assigned to the correct binary outcome of that class.
pub fn focal_loss(s: &ClassScores, gamma_f: f64, alpha_f: f64) -> Result<GradedValue> {
    if !(gamma_f >= 0.0 && gamma_f.is_finite()) {
        return Err(Error::invalid(format!("focal gamma must be >= 0, got {gamma_f}")));
    }
    if !(0.0..=1.0).contains(&alpha_f) {
        return Err(Error::invalid(format!("focal alpha {alpha_f} outside [0, 1]")));
    }
    let mut value = 0.0;
    let mut gradient = Vec::with_capacity(s.num_classes());
    for (i, &si) in s.scores.iter().enumerate() {
        let positive = i == s.true_label;
        let (p, dp_ds, w) = if positive {
            (si, 1.0, alpha_f)
        } else {
            (1.0 - si, -1.0, 1.0 - alpha_f)
        };
        let q = 1.0 - p;
        let log_p = clamp_p(p).ln();
        let modulate = q.powf(gamma_f);
        value -= w * modulate * log_p;
        // d/dp of -(1-p)^g ln p = g (1-p)^{g-1} ln p - (1-p)^g (ln p)'
        let dmod = if gamma_f == 0.0 || q == 0.0 {
            0.0
        } else {
            -gamma_f * q.powf(gamma_f - 1.0)
        };
        let dvalue_dp = -w * (dmod * log_p + modulate * dlog_clamped(p));
        gradient.push(dvalue_dp * dp_ds);
    }
    Ok(GradedValue::new(value, gradient))
}

/// Softmax cross-entropy with the score vector taken as logits.
pub fn cross_entropy_loss(s: &ClassScores) -> Result<GradedValue> {
    let max = s.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = s.scores.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let log_softmax_t = s.scores[s.true_label] - max - z.ln();
    let gradient = exps
        .iter()
        .enumerate()
        .map(|(i, e)| e / z - if i == s.true_label { 1.0 } else { 0.0 })
        .collect();
    Ok(GradedValue::new(-log_softmax_t, gradient))
}

/// alpha * l_cls + omega * l_re_meta + lambda * l_loc
pub fn combined_loss(l_cls: f64, l_re_meta: f64, l_loc: f64, w: &LossWeights) -> Result<f64> {
    for (name, v) in [("l_cls", l_cls), ("l_re_meta", l_re_meta), ("l_loc", l_loc)] {
        if !v.is_finite() {
            return Err(Error::invalid(format!("{name} is not finite ({v})")));
        }
    }
    Ok(w.alpha * l_cls + w.omega * l_re_meta + w.lambda * l_loc)
}
