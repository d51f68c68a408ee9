//! Plain-Rust state behind the browser bindings, testable off the web.

use toprel::grouping::{GroupingObjective, GroupingParams, GroupingTable, Strategy};
use toprel::losses::{tcl_terms, ClassScores, TclParams};
use toprel::simlab::{histogram, init_features, SimConfig, TraceRow};
use toprel::MetaFeatureSet;

/// Samples of the top-C loss terms over a [0, 1] score sweep.
///
/// Row `i` holds `[s, positive(P_t = s), negative(F_t = s), total]`, where the
/// sweep of one side keeps the other side at `held_score`.
pub fn tcl_curve(
    eta: f64,
    gamma: f64,
    beta_plus: f64,
    beta_minus: f64,
    held_score: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    let params = TclParams::new(beta_plus, vec![beta_minus], eta, gamma, 2).map_err(|e| e.to_string())?;
    let points = points.max(2);
    let mut out = Vec::with_capacity(points * 4);
    for i in 0..points {
        let s = i as f64 / (points - 1) as f64;
        let pos = tcl_terms(
            &ClassScores::new(vec![s, held_score], 0).map_err(|e| e.to_string())?,
            &params,
        )
        .map_err(|e| e.to_string())?;
        let neg = tcl_terms(
            &ClassScores::new(vec![held_score, s], 0).map_err(|e| e.to_string())?,
            &params,
        )
        .map_err(|e| e.to_string())?;
        out.extend([s, pos.positive, neg.negative[0], pos.positive + neg.negative[0]]);
    }
    Ok(out)
}

/// Gradient descent on synthetic meta-features grouped by the Pascal VOC
/// table, advanced a few iterations at a time.
pub struct DescentLab {
    objective: GroupingObjective,
    categories: Vec<String>,
    dim: usize,
    features: Vec<f64>,
    step_size: f64,
    trace: Vec<TraceRow>,
}

impl DescentLab {
    pub fn new(seed: u64, feature_dim: usize, init_sigma: f64, strategy: &str, step_size: f64) -> Result<Self, String> {
        let strategy: Strategy = strategy.parse().map_err(|e: toprel::Error| e.to_string())?;
        let cfg = SimConfig {
            feature_dim,
            init_sigma,
            seed,
            step_size,
            grouping: GroupingTable::pascal_voc(),
            grouping_params: GroupingParams::with_strategy(strategy),
            iterations: 0,
            ..SimConfig::default()
        };
        let x = init_features(&cfg).map_err(|e| e.to_string())?;
        let objective = GroupingObjective::new(&x, &cfg.grouping, cfg.grouping_params).map_err(|e| e.to_string())?;
        let mut lab = DescentLab {
            objective,
            categories: x.categories().to_vec(),
            dim: x.dim(),
            features: x.flatten(),
            step_size,
            trace: Vec::new(),
        };
        lab.record()?;
        Ok(lab)
    }

    fn record(&mut self) -> Result<(), String> {
        let loss = self.objective.value(&self.features).map_err(|e| e.to_string())?;
        let stats = self.objective.group_stats(&self.features).map_err(|e| e.to_string())?;
        self.trace.push(TraceRow::from_stats(self.trace.len(), loss, &stats));
        Ok(())
    }

    pub fn step(&mut self, iterations: usize) -> Result<(), String> {
        for _ in 0..iterations {
            let g = self.objective.evaluate(&self.features).map_err(|e| e.to_string())?;
            for (v, d) in self.features.iter_mut().zip(&g.gradient) {
                *v -= self.step_size * d;
            }
            if self.features.iter().any(|v| !v.is_finite()) {
                return Err(format!("diverged at iteration {}", self.trace.len()));
            }
            self.record()?;
        }
        Ok(())
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn features(&self) -> Result<MetaFeatureSet, String> {
        MetaFeatureSet::from_flat(self.categories.clone(), self.dim, &self.features).map_err(|e| e.to_string())
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    /// Counts pooled over all categories.
    pub fn pooled_histogram(&self, bins: usize, lo: f64, hi: f64) -> Result<Vec<u32>, String> {
        let per_category = histogram(&self.features()?, bins, lo, hi).map_err(|e| e.to_string())?;
        let mut pooled = vec![0u32; bins];
        for row in per_category {
            for (p, c) in pooled.iter_mut().zip(row) {
                *p += c as u32;
            }
        }
        Ok(pooled)
    }

    /// Per-category means, in category order.
    pub fn category_means(&self) -> Vec<f64> {
        self.features
            .chunks(self.dim)
            .map(|r| r.iter().sum::<f64>() / r.len() as f64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_hits_closed_form() {
        let c = tcl_curve(1.0, 1.0, 1.0, 0.5, 0.5, 3).unwrap();
        assert_eq!(c.len(), 12);
        // s = 1: positive term ln 2, negative at F = 1 is ln(1 + e^{0.5})
        assert!((c[9] - 2f64.ln()).abs() < 1e-12);
        assert!((c[10] - (1.0 + 0.5f64.exp()).ln()).abs() < 1e-12);
        assert!(c.chunks(4).all(|r| (r[3] - r[1] - r[2]).abs() < 1e-15));
        assert!(tcl_curve(0.0, 1.0, 1.0, 0.5, 0.5, 3).is_err());
    }

    #[test]
    fn lab_steps_and_records() {
        let mut lab = DescentLab::new(7, 16, 1.0, "S-BEST", 0.01).unwrap();
        lab.step(5).unwrap();
        assert_eq!(lab.trace().len(), 6);
        assert!(lab.trace()[5].loss < lab.trace()[0].loss);
        let h = lab.pooled_histogram(10, -3.0, 3.0).unwrap();
        assert_eq!(h.iter().sum::<u32>(), 20 * 16);
        assert_eq!(lab.category_means().len(), 20);
        assert!(DescentLab::new(7, 16, 1.0, "S-NONE", 0.01).is_err());
    }

    #[test]
    fn lab_trace_matches_core_descent() {
        let mut lab = DescentLab::new(3, 8, 1.0, "S-STD-MEAN", 0.05).unwrap();
        lab.step(4).unwrap();
        let cfg = SimConfig {
            feature_dim: 8,
            seed: 3,
            step_size: 0.05,
            iterations: 4,
            grouping_params: GroupingParams::with_strategy(Strategy::StdMean),
            ..SimConfig::default()
        };
        let core = toprel::simlab::run_descent(&cfg).unwrap();
        assert_eq!(lab.trace(), core.as_slice());
    }
}
