//! Seeded random instances and analytic-vs-central-difference checks for
//! every differentiable loss in the crate.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grouping::{GroupingObjective, GroupingParams, GroupingTable, MetaFeatureSet, Strategy};
use crate::losses::{
    bce_loss, cross_entropy_loss, focal_loss, tcl2_loss, tcl_loss, ClassScores, TclParams, DEFAULT_FOCAL_ALPHA,
    DEFAULT_FOCAL_GAMMA,
};
use crate::numerics::{finite_diff_gradient, relative_gradient_error, GradedValue};

pub const FD_STEP: f64 = 1e-5;
pub const GRADCHECK_TOL: f64 = 1e-5;

/// Adjacent false-class scores closer than this count as a selection tie.
pub const TIE_TOL: f64 = 1e-4;

/// Group and vector spreads below this are treated as singular.
pub const SPREAD_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoreLoss {
    Tcl,
    Tcl2,
    Bce,
    Focal,
    Ce,
}

impl ScoreLoss {
    pub const ALL: [ScoreLoss; 5] = [
        ScoreLoss::Tcl,
        ScoreLoss::Tcl2,
        ScoreLoss::Bce,
        ScoreLoss::Focal,
        ScoreLoss::Ce,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoreLoss::Tcl => "tcl",
            ScoreLoss::Tcl2 => "tcl2",
            ScoreLoss::Bce => "bce",
            ScoreLoss::Focal => "focal",
            ScoreLoss::Ce => "ce",
        }
    }
}

impl fmt::Display for ScoreLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScoreLoss::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown loss '{s}'")))
    }
}

/// Everything a score-space loss needs besides the scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreLossConfig {
    pub tcl: TclParams,
    pub focal_gamma: f64,
    pub focal_alpha: f64,
}

impl Default for ScoreLossConfig {
    fn default() -> Self {
        ScoreLossConfig {
            tcl: TclParams::default(),
            focal_gamma: DEFAULT_FOCAL_GAMMA,
            focal_alpha: DEFAULT_FOCAL_ALPHA,
        }
    }
}

pub fn eval_score_loss(kind: ScoreLoss, s: &ClassScores, cfg: &ScoreLossConfig) -> Result<GradedValue> {
    match kind {
        ScoreLoss::Tcl => tcl_loss(s, &cfg.tcl),
        ScoreLoss::Tcl2 => tcl2_loss(s, &cfg.tcl),
        ScoreLoss::Bce => bce_loss(s),
        ScoreLoss::Focal => focal_loss(s, cfg.focal_gamma, cfg.focal_alpha),
        ScoreLoss::Ce => cross_entropy_loss(s),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckOutcome {
    Checked { max_rel_error: f64 },
    Skipped { reason: String },
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        match self {
            CheckOutcome::Checked { max_rel_error } => *max_rel_error < GRADCHECK_TOL,
            CheckOutcome::Skipped { .. } => true,
        }
    }

    pub fn error(&self) -> Option<f64> {
        match self {
            CheckOutcome::Checked { max_rel_error } => Some(*max_rel_error),
            CheckOutcome::Skipped { .. } => None,
        }
    }
}

/// Reason the point is non-differentiable for `kind`, if it is.
pub fn score_singularity(kind: ScoreLoss, s: &ClassScores, cfg: &ScoreLossConfig) -> Option<String> {
    let near_clamp = |v: f64| !(2.0 * FD_STEP..=1.0 - 2.0 * FD_STEP).contains(&v);
    match kind {
        ScoreLoss::Tcl | ScoreLoss::Tcl2 => {
            let t = s.true_label();
            let mut false_scores: Vec<f64> = s
                .scores()
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != t)
                .map(|(_, v)| *v)
                .collect();
            false_scores.sort_by(|a, b| b.total_cmp(a));
            // ranks 1..C-1 plus the first unselected class
            let upto = cfg.tcl.c().min(false_scores.len());
            false_scores[..upto]
                .windows(2)
                .find(|w| w[0] - w[1] < TIE_TOL)
                .map(|w| format!("score tie in top-C selection ({} vs {})", w[0], w[1]))
        }
        ScoreLoss::Bce | ScoreLoss::Focal => s
            .scores()
            .iter()
            .find(|v| near_clamp(**v))
            .map(|v| format!("score {v} at the log clamp boundary")),
        ScoreLoss::Ce => None,
    }
}

/// Compare the analytic gradient of a score loss with central differences.
/// `corrupt` perturbs the analytic gradient to exercise the failure path.
pub fn check_score_loss(
    kind: ScoreLoss,
    s: &ClassScores,
    cfg: &ScoreLossConfig,
    corrupt: bool,
) -> Result<CheckOutcome> {
    if let Some(reason) = score_singularity(kind, s, cfg) {
        return Ok(CheckOutcome::Skipped { reason });
    }
    let mut analytic = eval_score_loss(kind, s, cfg)?.gradient;
    if corrupt {
        analytic[0] += 1.0;
    }
    let label = s.true_label();
    let numeric = finite_diff_gradient(
        |x| {
            let probe = ClassScores::new(x.to_vec(), label)?;
            Ok(eval_score_loss(kind, &probe, cfg)?.value)
        },
        s.scores(),
        FD_STEP,
    )?;
    Ok(CheckOutcome::Checked {
        max_rel_error: relative_gradient_error(&analytic, &numeric)?,
    })
}

pub fn grouping_singularity(x: &MetaFeatureSet, t: &GroupingTable, strategy: Strategy) -> Result<Option<String>> {
    for (name, fv) in x.categories().iter().zip(x.features()) {
        if fv.stats().std < SPREAD_FLOOR {
            return Ok(Some(format!("category '{name}' has (near) zero variance")));
        }
    }
    let stats = crate::grouping::group_stats(x, t)?;
    for (j, s) in stats.iter().enumerate() {
        if s.size < 2 {
            continue;
        }
        if s.w_std < SPREAD_FLOOR {
            return Ok(Some(format!("group {j} has (near) zero W_std")));
        }
        if matches!(strategy, Strategy::Best | Strategy::IntraStd) && s.w_mean_std < SPREAD_FLOOR {
            return Ok(Some(format!("group {j} has (near) zero W_mean-std")));
        }
    }
    Ok(None)
}

pub fn check_grouping(
    x: &MetaFeatureSet,
    t: &GroupingTable,
    params: GroupingParams,
    corrupt: bool,
) -> Result<CheckOutcome> {
    if let Some(reason) = grouping_singularity(x, t, params.strategy())? {
        return Ok(CheckOutcome::Skipped { reason });
    }
    let objective = GroupingObjective::new(x, t, params)?;
    let flat = x.flatten();
    let mut analytic = objective.evaluate(&flat)?.gradient;
    if corrupt {
        analytic[0] += 1.0;
    }
    let numeric = finite_diff_gradient(|v| objective.value(v), &flat, FD_STEP)?;
    Ok(CheckOutcome::Checked {
        max_rel_error: relative_gradient_error(&analytic, &numeric)?,
    })
}

/// Scores drawn uniformly from [0.02, 0.98] with a uniformly drawn label.
pub fn random_scores<R: Rng>(rng: &mut R, n: usize) -> Result<ClassScores> {
    let scores = (0..n).map(|_| rng.random_range(0.02..0.98)).collect();
    ClassScores::new(scores, rng.random_range(0..n))
}

/// Gaussian features with categories `c00, c01, ...` split at random into
/// `k` groups of at least two members each.
pub fn random_grouping_instance<R: Rng>(
    rng: &mut R,
    n: usize,
    dim: usize,
    k: usize,
) -> Result<(MetaFeatureSet, GroupingTable)> {
    if k == 0 || n < 2 * k {
        return Err(Error::invalid(format!(
            "cannot split {n} categories into {k} groups of at least two"
        )));
    }
    let names: Vec<String> = (0..n).map(|i| format!("c{i:02}")).collect();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let rows = (0..n).map(|_| (0..dim).map(|_| normal.sample(rng)).collect()).collect();
    let x = MetaFeatureSet::new(names.clone(), rows)?;

    let mut order = names;
    order.shuffle(rng);
    let mut sizes = vec![2usize; k];
    for _ in 0..n - 2 * k {
        sizes[rng.random_range(0..k)] += 1;
    }
    let mut groups = Vec::with_capacity(k);
    let mut it = order.into_iter();
    for size in sizes {
        groups.push(it.by_ref().take(size).collect());
    }
    Ok((x, GroupingTable::new(groups)?))
}
