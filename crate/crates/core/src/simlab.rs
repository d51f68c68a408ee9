//! Synthetic descent on the grouping objective.
//!
//! Features are drawn from a seeded Gaussian and then moved by plain
//! fixed-step gradient descent on the grouping loss. Each iteration is
//! recorded as a [`TraceRow`] carrying the intra-group spreads and the
//! closest inter-group gaps.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grouping::{GroupStats, GroupingObjective, GroupingParams, GroupingTable, MetaFeatureSet};

pub const DEFAULT_SIM_FEATURE_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_categories: usize,
    pub feature_dim: usize,
    pub grouping: GroupingTable,
    pub grouping_params: GroupingParams,
    pub step_size: f64,
    pub iterations: usize,
    pub seed: u64,
    pub init_sigma: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_categories: 20,
            feature_dim: DEFAULT_SIM_FEATURE_DIM,
            grouping: GroupingTable::pascal_voc(),
            grouping_params: GroupingParams::default(),
            step_size: 1e-2,
            iterations: 500,
            seed: 7,
            init_sigma: 1.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim < 2 {
            return Err(Error::invalid(format!(
                "feature_dim must be at least 2, got {}",
                self.feature_dim
            )));
        }
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(Error::invalid(format!(
                "step_size must be finite and >= 0, got {}",
                self.step_size
            )));
        }
        if !(self.init_sigma >= 0.0 && self.init_sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "init_sigma must be finite and >= 0, got {}",
                self.init_sigma
            )));
        }
        let named = self.grouping.categories().len();
        if named != self.n_categories {
            return Err(Error::invalid(format!(
                "grouping names {named} categories but n_categories is {}",
                self.n_categories
            )));
        }
        Ok(())
    }

    /// Synthetic category names, taken from the grouping table in group order.
    pub fn category_names(&self) -> Vec<String> {
        self.grouping.categories()
    }
}

/// Seeded i.i.d. N(0, init_sigma^2) features, drawn row by row.
pub fn init_features(cfg: &SimConfig) -> Result<MetaFeatureSet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, cfg.init_sigma).map_err(|e| Error::invalid(format!("init_sigma: {e}")))?;
    let rows = (0..cfg.n_categories)
        .map(|_| (0..cfg.feature_dim).map(|_| normal.sample(&mut rng)).collect())
        .collect();
    MetaFeatureSet::new(cfg.category_names(), rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub loss: f64,
    pub w_mean_std: Vec<f64>,
    /// Smallest |W_mean^j - W_mean^k| over group pairs; NaN when K = 1.
    pub min_mean_gap: f64,
    /// Smallest |W_std^j - W_std^k| over group pairs; NaN when K = 1.
    pub min_std_gap: f64,
}

impl TraceRow {
    pub fn from_stats(iteration: usize, loss: f64, stats: &[GroupStats]) -> Self {
        let mut min_mean_gap = f64::NAN;
        let mut min_std_gap = f64::NAN;
        for j in 0..stats.len() {
            for k in j + 1..stats.len() {
                min_mean_gap = min_mean_gap.min((stats[j].w_mean - stats[k].w_mean).abs());
                min_std_gap = min_std_gap.min((stats[j].w_std - stats[k].w_std).abs());
            }
        }
        TraceRow {
            iteration,
            loss,
            w_mean_std: stats.iter().map(|s| s.w_mean_std).collect(),
            min_mean_gap,
            min_std_gap,
        }
    }

    pub fn mean_w_mean_std(&self) -> f64 {
        self.w_mean_std.iter().sum::<f64>() / self.w_mean_std.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub initial: MetaFeatureSet,
    pub trace: Vec<TraceRow>,
    pub features: MetaFeatureSet,
}

/// Descent from a caller-supplied starting point. The trace holds the
/// starting row (iteration 0) and one row after every update.
pub fn descend(cfg: &SimConfig, start: &MetaFeatureSet) -> Result<SimOutcome> {
    cfg.validate()?;
    let objective = GroupingObjective::new(start, &cfg.grouping, cfg.grouping_params)?;
    let mut x = start.flatten();
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    for iteration in 0..=cfg.iterations {
        let graded = objective.evaluate(&x)?;
        if !graded.value.is_finite() {
            return Err(Error::Diverged {
                iteration,
                loss: graded.value,
            });
        }
        let stats = objective.group_stats(&x)?;
        trace.push(TraceRow::from_stats(iteration, graded.value, &stats));
        if iteration == cfg.iterations {
            break;
        }
        for (v, g) in x.iter_mut().zip(&graded.gradient) {
            *v -= cfg.step_size * g;
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                iteration: iteration + 1,
                loss: *v,
            });
        }
    }
    let features = MetaFeatureSet::from_flat(start.categories().to_vec(), start.dim(), &x)?;
    Ok(SimOutcome {
        initial: start.clone(),
        trace,
        features,
    })
}

pub fn simulate(cfg: &SimConfig) -> Result<SimOutcome> {
    descend(cfg, &init_features(cfg)?)
}

pub fn run_descent(cfg: &SimConfig) -> Result<Vec<TraceRow>> {
    Ok(simulate(cfg)?.trace)
}

/// Per-category counts over `bins` uniform bins `[lo + i w, lo + (i+1) w)`,
/// the last bin closed. Out-of-range entries go to the nearest edge bin.
pub fn histogram(x: &MetaFeatureSet, bins: usize, lo: f64, hi: f64) -> Result<Vec<Vec<usize>>> {
    if bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid(format!("invalid histogram range [{lo}, {hi}]")));
    }
    let width = (hi - lo) / bins as f64;
    Ok(x.features()
        .iter()
        .map(|fv| {
            let mut counts = vec![0usize; bins];
            for &v in fv.values() {
                let b = ((v - lo) / width).floor();
                let idx = if b < 0.0 { 0 } else { (b as usize).min(bins - 1) };
                counts[idx] += 1;
            }
            counts
        })
        .collect())
}

pub fn trace_csv(trace: &[TraceRow]) -> String {
    let k = trace.first().map_or(0, |r| r.w_mean_std.len());
    let mut out = String::from("iteration,loss");
    for j in 0..k {
        write!(out, ",w_mean_std_{j}").unwrap();
    }
    out.push_str(",min_mean_gap,min_std_gap\n");
    for r in trace {
        write!(out, "{},{:.12e}", r.iteration, r.loss).unwrap();
        for w in &r.w_mean_std {
            write!(out, ",{w:.12e}").unwrap();
        }
        writeln!(out, ",{:.12e},{:.12e}", r.min_mean_gap, r.min_std_gap).unwrap();
    }
    out
}

pub fn histogram_csv(x: &MetaFeatureSet, counts: &[Vec<usize>]) -> String {
    let bins = counts.first().map_or(0, Vec::len);
    let mut out = String::from("category");
    for b in 0..bins {
        write!(out, ",bin_{b}").unwrap();
    }
    out.push('\n');
    for (name, row) in x.categories().iter().zip(counts) {
        out.push_str(name);
        for c in row {
            write!(out, ",{c}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouping::GroupingTable;

    fn small_cfg() -> SimConfig {
        let table = GroupingTable::parse("a,b\nc,d\n").unwrap();
        SimConfig {
            n_categories: 4,
            feature_dim: 4,
            grouping: table,
            seed: 42,
            iterations: 5,
            ..SimConfig::default()
        }
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = small_cfg();
        assert_eq!(init_features(&cfg).unwrap(), init_features(&cfg).unwrap());
        let other = SimConfig {
            seed: 43,
            ..cfg.clone()
        };
        assert_ne!(init_features(&cfg).unwrap(), init_features(&other).unwrap());
    }

    #[test]
    fn zero_sigma_gives_zero_features() {
        let cfg = SimConfig {
            init_sigma: 0.0,
            ..small_cfg()
        };
        assert!(init_features(&cfg).unwrap().flatten().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn config_validation() {
        let cfg = small_cfg();
        assert!(SimConfig {
            feature_dim: 1,
            ..cfg.clone()
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            step_size: -1.0,
            ..cfg.clone()
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            n_categories: 5,
            ..cfg.clone()
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            init_sigma: f64::NAN,
            ..cfg
        }
        .validate()
        .is_err());
    }

    #[test]
    fn zero_step_keeps_loss_constant() {
        let cfg = SimConfig {
            step_size: 0.0,
            ..small_cfg()
        };
        let trace = run_descent(&cfg).unwrap();
        assert_eq!(trace.len(), 6);
        assert!(trace.iter().all(|r| r.loss == trace[0].loss));
    }

    #[test]
    fn zero_iterations_emit_initial_row() {
        let cfg = SimConfig {
            iterations: 0,
            ..small_cfg()
        };
        let trace = run_descent(&cfg).unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace[0].iteration, 0);
    }

    #[test]
    fn divergence_names_iteration() {
        let cfg = SimConfig {
            step_size: 1e300,
            iterations: 50,
            ..small_cfg()
        };
        match run_descent(&cfg) {
            Err(Error::Diverged { iteration, .. }) => assert!(iteration >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    fn one(values: Vec<f64>) -> MetaFeatureSet {
        MetaFeatureSet::new(vec!["a".into()], vec![values]).unwrap()
    }

    #[test]
    fn histogram_conventions() {
        assert_eq!(
            histogram(&one(vec![0.0, 0.5, 1.0]), 2, 0.0, 1.0).unwrap(),
            vec![vec![1, 2]]
        );
        assert_eq!(
            histogram(&one(vec![0.3; 5]), 7, 0.0, 1.0).unwrap()[0]
                .iter()
                .filter(|c| **c > 0)
                .count(),
            1
        );
        assert_eq!(
            histogram(&one(vec![-5.0, 5.0]), 3, 0.0, 1.0).unwrap(),
            vec![vec![1, 0, 1]]
        );
        let grid: Vec<f64> = (0..1024).map(|i| i as f64 / 1023.0).collect();
        assert_eq!(histogram(&one(grid), 4, 0.0, 1.0).unwrap(), vec![vec![256; 4]]);
        assert!(histogram(&one(vec![0.0]), 0, 0.0, 1.0).is_err());
        assert!(histogram(&one(vec![0.0]), 2, 1.0, 1.0).is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let trace = run_descent(&SimConfig {
            iterations: 1,
            ..small_cfg()
        })
        .unwrap();
        let csv = trace_csv(&trace);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "iteration,loss,w_mean_std_0,w_mean_std_1,min_mean_gap,min_std_gap"
        );
        assert_eq!(lines.count(), 2);
    }
}
