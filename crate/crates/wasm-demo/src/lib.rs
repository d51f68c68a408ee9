//! wasm-bindgen surface for the static demo page in `www/`.

mod demo;

pub use demo::{tcl_curve as tcl_curve_samples, DescentLab};

use wasm_bindgen::prelude::*;

/// Flattened `[s, positive, negative, total]` rows for the TCL-2 terms.
#[wasm_bindgen]
pub fn tcl_curve(
    eta: f64,
    gamma: f64,
    beta_plus: f64,
    beta_minus: f64,
    held_score: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    demo::tcl_curve(eta, gamma, beta_plus, beta_minus, held_score, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct Descent {
    lab: DescentLab,
}

#[wasm_bindgen]
impl Descent {
    #[wasm_bindgen(constructor)]
    pub fn new(
        seed: u32,
        feature_dim: usize,
        init_sigma: f64,
        strategy: &str,
        step_size: f64,
    ) -> Result<Descent, JsError> {
        DescentLab::new(seed as u64, feature_dim, init_sigma, strategy, step_size)
            .map(|lab| Descent { lab })
            .map_err(|e| JsError::new(&e))
    }

    pub fn step(&mut self, iterations: usize) -> Result<(), JsError> {
        self.lab.step(iterations).map_err(|e| JsError::new(&e))
    }

    pub fn iteration(&self) -> usize {
        self.lab.trace().len() - 1
    }

    pub fn losses(&self) -> Vec<f64> {
        self.lab.trace().iter().map(|r| r.loss).collect()
    }

    /// Mean over groups of W_mean-std, one value per recorded iteration.
    pub fn mean_spreads(&self) -> Vec<f64> {
        self.lab.trace().iter().map(|r| r.mean_w_mean_std()).collect()
    }

    /// Latest per-group W_mean-std.
    pub fn group_spreads(&self) -> Vec<f64> {
        self.lab
            .trace()
            .last()
            .map(|r| r.w_mean_std.clone())
            .unwrap_or_default()
    }

    pub fn category_means(&self) -> Vec<f64> {
        self.lab.category_means()
    }

    /// Category names joined with commas, in feature order.
    pub fn categories(&self) -> String {
        self.lab.categories().join(",")
    }

    pub fn histogram(&self, bins: usize, lo: f64, hi: f64) -> Result<Vec<u32>, JsError> {
        self.lab.pooled_histogram(bins, lo, hi).map_err(|e| JsError::new(&e))
    }
}
