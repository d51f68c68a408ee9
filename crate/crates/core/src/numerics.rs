//! Vector statistics, the graded-value carrier, and the central-difference
//! oracle used to certify analytic gradients.

use crate::error::{Error, Result};

/// Meta-feature dimension used by the reference detector.
pub const DEFAULT_FEATURE_DIM: usize = 1024;

/// A finite, non-empty real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("feature vector is empty"));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "feature vector entry {k} is not finite ({})",
                values[k]
            )));
        }
        Ok(FeatureVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn stats(&self) -> VectorStats {
        stats_unchecked(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Mean and population standard deviation of one vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorStats {
    pub mean: f64,
    pub std: f64,
}

/// A scalar together with its gradient, flattened in the input's order.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedValue {
    pub value: f64,
    pub gradient: Vec<f64>,
}

impl GradedValue {
    pub fn new(value: f64, gradient: Vec<f64>) -> Self {
        GradedValue { value, gradient }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.gradient.iter().all(|g| g.is_finite())
    }
}

/// Mean and population (1/|F|) standard deviation.
pub fn vector_stats(x: &[f64]) -> Result<VectorStats> {
    if x.is_empty() {
        return Err(Error::invalid("cannot take statistics of an empty vector"));
    }
    Ok(stats_unchecked(x))
}

fn stats_unchecked(x: &[f64]) -> VectorStats {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    VectorStats { mean, std: var.sqrt() }
}

/// Chain rule through [`vector_stats`]: given adjoints of mean and std,
/// accumulate the adjoint of every entry into `out`.
///
/// The std branch contributes nothing when std is zero.
pub(crate) fn accumulate_stats_adjoint(x: &[f64], stats: VectorStats, d_mean: f64, d_std: f64, out: &mut [f64]) {
    debug_assert_eq!(x.len(), out.len());
    let n = x.len() as f64;
    let mean_part = d_mean / n;
    if stats.std > 0.0 && d_std != 0.0 {
        let scale = d_std / (n * stats.std);
        for (o, v) in out.iter_mut().zip(x) {
            *o += mean_part + scale * (v - stats.mean);
        }
    } else {
        for o in out.iter_mut() {
            *o += mean_part;
        }
    }
}

/// Central-difference gradient of `f` at `x`.
pub fn finite_diff_gradient<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("step size must be positive, got {h}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let orig = probe[k];
        probe[k] = orig + h;
        let plus = f(&probe)?;
        probe[k] = orig - h;
        let minus = f(&probe)?;
        probe[k] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "f evaluated to {plus} / {minus} around coordinate {k}"
            )));
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

/// max_k |a_k - n_k| / max(1, |a_k|, |n_k|)
pub fn relative_gradient_error(analytic: &[f64], numeric: &[f64]) -> Result<f64> {
    if analytic.len() != numeric.len() {
        return Err(Error::invalid(format!(
            "gradient length mismatch: {} vs {}",
            analytic.len(),
            numeric.len()
        )));
    }
    Ok(analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / 1f64.max(a.abs()).max(n.abs()))
        .fold(0.0, f64::max))
}
