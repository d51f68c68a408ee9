//! Category-based grouping objective.
//!
//! Categories are partitioned into K disjoint groups. For group `j` with
//! members `m` carrying per-vector mean `u_m` and population std `δ_m`:
//!
//! * `u^j` and `δ^j` are the member averages of `u_m` and `δ_m`,
//! * `W_mean^j = u^j` (the sole member's `u_m` for a singleton),
//! * `W_std^j` is the population std of the `δ_m` around `δ^j`, or the sole
//!   member's `δ_m` for a singleton,
//! * `W_mean-std^j` is the population std of the `u_m` around `u^j`.
//!
//! The objective is `Σ_j ln(τ + q_j / (ε + Q_j + Σ_{k>j} U_{j,k}))` where the
//! [`Strategy`] picks `q_j`, `Q_j` and `U_{j,k}`. Pairs are visited in upper
//! triangular order only, so reordering groups changes which group a pair
//! term is charged to.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::{accumulate_stats_adjoint, FeatureVector, GradedValue, VectorStats};

/// Below this, `W_mean-std` is treated as zero and the group term vanishes.
pub const ZERO_SPREAD: f64 = 1e-12;

pub const DEFAULT_TAU: f64 = 1.0;
pub const DEFAULT_EPSILON: f64 = 0.00005;

/// Pascal VOC class names in the dataset's canonical order.
pub const PASCAL_VOC_CATEGORIES: [&str; 20] = [
    "aero", "bicycle", "bird", "boat", "bottle", "bus", "car", "cat", "chair", "cow", "table", "dog", "horse", "mbike",
    "person", "plant", "sheep", "sofa", "train", "tv",
];

/// Appearance/scene grouping of the Pascal VOC classes (K = 6).
pub const PASCAL_VOC_GROUPS: [&[&str]; 6] = [
    &["aero", "bird"],
    &["cow", "horse", "cat", "sheep", "dog"],
    &["sofa", "chair"],
    &["tv", "plant", "table"],
    &["boat", "bicycle", "train", "car", "bus", "mbike"],
    &["bottle", "person"],
];

/// N named categories, each with one meta-feature vector of a shared length.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaFeatureSet {
    categories: Vec<String>,
    features: Vec<FeatureVector>,
}

impl MetaFeatureSet {
    pub fn new(categories: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if categories.is_empty() {
            return Err(Error::invalid("meta-feature set has no categories"));
        }
        if categories.len() != rows.len() {
            return Err(Error::invalid(format!(
                "{} category names for {} feature rows",
                categories.len(),
                rows.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &categories {
            if !seen.insert(c.as_str()) {
                return Err(Error::invalid(format!("duplicate category '{c}'")));
            }
        }
        let features = rows
            .into_iter()
            .zip(&categories)
            .map(|(r, c)| FeatureVector::new(r).map_err(|e| Error::invalid(format!("category '{c}': {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let dim = features[0].len();
        if let Some((c, f)) = categories.iter().zip(&features).find(|(_, f)| f.len() != dim) {
            return Err(Error::invalid(format!(
                "category '{c}' has dimension {} but expected {dim}",
                f.len()
            )));
        }
        Ok(MetaFeatureSet { categories, features })
    }

    /// Rebuild from a row-major `N x dim` buffer.
    pub fn from_flat(categories: Vec<String>, dim: usize, flat: &[f64]) -> Result<Self> {
        if dim == 0 || flat.len() != categories.len() * dim {
            return Err(Error::invalid(format!(
                "buffer of {} values does not hold {} rows of dimension {dim}",
                flat.len(),
                categories.len()
            )));
        }
        let rows = flat.chunks(dim).map(<[f64]>::to_vec).collect();
        Self::new(categories, rows)
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn features(&self) -> &[FeatureVector] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.features.iter().flat_map(|f| f.values().iter().copied()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == name)
    }
}

/// A partition of category names into K disjoint, non-empty groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupingTable {
    groups: Vec<Vec<String>>,
}

impl GroupingTable {
    pub fn new(groups: Vec<Vec<String>>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::invalid("grouping table has no groups"));
        }
        let mut seen = HashSet::new();
        for (j, g) in groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::invalid(format!("group {j} is empty")));
            }
            for name in g {
                if name.is_empty() {
                    return Err(Error::invalid(format!("group {j} has an empty category name")));
                }
                if !seen.insert(name.as_str()) {
                    return Err(Error::invalid(format!(
                        "category '{name}' appears in more than one group"
                    )));
                }
            }
        }
        Ok(GroupingTable { groups })
    }

    pub fn pascal_voc() -> Self {
        let groups = PASCAL_VOC_GROUPS
            .iter()
            .map(|g| g.iter().map(|s| s.to_string()).collect())
            .collect();
        GroupingTable { groups }
    }

    /// One group per line, names separated by commas; `#` lines and blank
    /// lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let groups = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.split(',').map(|s| s.trim().to_string()).collect())
            .collect();
        Self::new(groups)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for g in &self.groups {
            out.push_str(&g.join(","));
            out.push('\n');
        }
        out
    }

    pub fn groups(&self) -> &[Vec<String>] {
        &self.groups
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// All category names in group order.
    pub fn categories(&self) -> Vec<String> {
        self.groups.iter().flatten().cloned().collect()
    }

    /// Member indices of each group within `x`, checking that both sides
    /// name exactly the same categories.
    pub fn resolve(&self, x: &MetaFeatureSet) -> Result<Vec<Vec<usize>>> {
        let index: HashMap<&str, usize> = x
            .categories()
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let in_table: HashSet<&str> = self.groups.iter().flatten().map(String::as_str).collect();
        let missing_in_features: Vec<&str> = self
            .groups
            .iter()
            .flatten()
            .map(String::as_str)
            .filter(|c| !index.contains_key(c))
            .collect();
        let missing_in_grouping: Vec<&str> = x
            .categories()
            .iter()
            .map(String::as_str)
            .filter(|c| !in_table.contains(c))
            .collect();
        if !missing_in_features.is_empty() || !missing_in_grouping.is_empty() {
            return Err(Error::CategoryMismatch {
                missing_in_features: missing_in_features.join(","),
                missing_in_grouping: missing_in_grouping.join(","),
            });
        }
        Ok(self
            .groups
            .iter()
            .map(|g| g.iter().map(|c| index[c.as_str()]).collect())
            .collect())
    }
}

impl Default for GroupingTable {
    fn default() -> Self {
        Self::pascal_voc()
    }
}

/// Choice of `(q_j, Q_j, U_{j,k})` in the generalized grouping objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Strategy {
    /// `q = W_mean-std`, `Q = 1 / W_mean-std`, `U` = std and mean separation.
    #[default]
    Best,
    /// `q = 1`, `Q = 0`, `U` = std separation only.
    StdOnly,
    /// `q = 1`, `Q = 0`, `U` = std and mean separation.
    StdMean,
    /// `q = W_mean-std`, `Q = 1 / W_mean-std`, `U` = std separation only.
    IntraStd,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Best, Strategy::StdOnly, Strategy::StdMean, Strategy::IntraStd];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Best => "S-BEST",
            Strategy::StdOnly => "S-STD-ONLY",
            Strategy::StdMean => "S-STD-MEAN",
            Strategy::IntraStd => "S-INTRA-STD",
        }
    }

    fn uses_spread(self) -> bool {
        matches!(self, Strategy::Best | Strategy::IntraStd)
    }

    fn uses_mean_separation(self) -> bool {
        matches!(self, Strategy::Best | Strategy::StdMean)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        let norm = norm.strip_prefix("S-").unwrap_or(&norm);
        match norm {
            "BEST" => Ok(Strategy::Best),
            "STD-ONLY" => Ok(Strategy::StdOnly),
            "STD-MEAN" => Ok(Strategy::StdMean),
            "INTRA-STD" => Ok(Strategy::IntraStd),
            _ => Err(Error::invalid(format!(
                "unknown strategy '{s}' (expected S-BEST, S-STD-ONLY, S-STD-MEAN or S-INTRA-STD)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupingParams {
    tau: f64,
    epsilon: f64,
    strategy: Strategy,
}

impl GroupingParams {
    pub fn new(tau: f64, epsilon: f64, strategy: Strategy) -> Result<Self> {
        if !(tau >= 1.0 && tau.is_finite()) {
            return Err(Error::invalid(format!("tau must be finite and >= 1, got {tau}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(GroupingParams { tau, epsilon, strategy })
    }

    pub fn with_strategy(strategy: Strategy) -> Self {
        GroupingParams {
            strategy,
            ..Self::default()
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn strategy(&self) -> Strategy {
        self.strategy
    }
}

impl Default for GroupingParams {
    fn default() -> Self {
        GroupingParams {
            tau: DEFAULT_TAU,
            epsilon: DEFAULT_EPSILON,
            strategy: Strategy::Best,
        }
    }
}

/// Per-group statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupStats {
    pub size: usize,
    pub u_group: f64,
    pub delta_group: f64,
    pub w_mean: f64,
    pub w_std: f64,
    pub w_mean_std: f64,
}

fn stats_of_members(cat: &[VectorStats], members: &[usize]) -> GroupStats {
    let n = members.len() as f64;
    let u_group = members.iter().map(|&m| cat[m].mean).sum::<f64>() / n;
    let delta_group = members.iter().map(|&m| cat[m].std).sum::<f64>() / n;
    if members.len() == 1 {
        let s = cat[members[0]];
        return GroupStats {
            size: 1,
            u_group,
            delta_group,
            w_mean: s.mean,
            w_std: s.std,
            w_mean_std: 0.0,
        };
    }
    let spread = |f: &dyn Fn(&VectorStats) -> f64, center: f64| {
        (members.iter().map(|&m| (f(&cat[m]) - center).powi(2)).sum::<f64>() / n).sqrt()
    };
    GroupStats {
        size: members.len(),
        u_group,
        delta_group,
        w_mean: u_group,
        w_std: spread(&|s| s.std, delta_group),
        w_mean_std: spread(&|s| s.mean, u_group),
    }
}

pub fn group_stats(x: &MetaFeatureSet, t: &GroupingTable) -> Result<Vec<GroupStats>> {
    let members = t.resolve(x)?;
    let cat: Vec<VectorStats> = x.features().iter().map(FeatureVector::stats).collect();
    Ok(members.iter().map(|m| stats_of_members(&cat, m)).collect())
}

/// Inter-group separation `e^{(ΔW_std)^2} + e^{(ΔW_mean)^2}`.
pub fn pairwise_term(a: &GroupStats, b: &GroupStats) -> f64 {
    (a.w_std - b.w_std).powi(2).exp() + (a.w_mean - b.w_mean).powi(2).exp()
}

/// Adjoints of one group term with respect to the group statistics it reads.
struct TermPartials {
    d_spread: f64,
    /// Derivative with respect to the pairwise sum.
    d_sum: f64,
}

fn separation(strategy: Strategy, a: &GroupStats, b: &GroupStats) -> f64 {
    let std_part = (a.w_std - b.w_std).powi(2).exp();
    if strategy.uses_mean_separation() {
        std_part + (a.w_mean - b.w_mean).powi(2).exp()
    } else {
        std_part
    }
}

fn scheme_term(j: usize, stats: &[GroupStats], p: &GroupingParams) -> (f64, TermPartials) {
    let zero = TermPartials {
        d_spread: 0.0,
        d_sum: 0.0,
    };
    let sum: f64 = stats[j + 1..]
        .iter()
        .map(|k| separation(p.strategy, &stats[j], k))
        .sum();
    if p.strategy.uses_spread() {
        let w = stats[j].w_mean_std;
        if w < ZERO_SPREAD {
            return (0.0, zero);
        }
        let denom = p.epsilon + 1.0 / w + sum;
        if !denom.is_finite() {
            return (0.0, zero);
        }
        let partials = TermPartials {
            d_spread: (denom + 1.0 / w) / (denom * denom),
            d_sum: -w / (denom * denom),
        };
        (w / denom, partials)
    } else {
        let denom = p.epsilon + sum;
        if !denom.is_finite() {
            return (0.0, zero);
        }
        let partials = TermPartials {
            d_spread: 0.0,
            d_sum: -1.0 / (denom * denom),
        };
        (1.0 / denom, partials)
    }
}

/// Term of group `j` (0-based) under the configured strategy; for
/// [`Strategy::Best`] this is `W / (ε + 1/W + Σ_{k>j} L_{j,k})`.
pub fn group_loss(j: usize, stats: &[GroupStats], p: &GroupingParams) -> Result<f64> {
    if j >= stats.len() {
        return Err(Error::invalid(format!(
            "group index {j} out of range for {} groups",
            stats.len()
        )));
    }
    Ok(scheme_term(j, stats, p).0)
}

/// A grouping objective bound to a fixed category layout, evaluated on
/// row-major `N x dim` buffers.
#[derive(Debug, Clone)]
pub struct GroupingObjective {
    members: Vec<Vec<usize>>,
    n: usize,
    dim: usize,
    params: GroupingParams,
}

impl GroupingObjective {
    pub fn new(x: &MetaFeatureSet, t: &GroupingTable, params: GroupingParams) -> Result<Self> {
        Ok(GroupingObjective {
            members: t.resolve(x)?,
            n: x.len(),
            dim: x.dim(),
            params,
        })
    }

    pub fn params(&self) -> &GroupingParams {
        &self.params
    }

    fn category_stats(&self, flat: &[f64]) -> Vec<VectorStats> {
        flat.chunks(self.dim)
            .map(|row| {
                let n = row.len() as f64;
                let mean = row.iter().sum::<f64>() / n;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                VectorStats { mean, std: var.sqrt() }
            })
            .collect()
    }

    fn check_len(&self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n * self.dim {
            return Err(Error::invalid(format!(
                "expected {} feature values, got {}",
                self.n * self.dim,
                flat.len()
            )));
        }
        Ok(())
    }

    pub fn group_stats(&self, flat: &[f64]) -> Result<Vec<GroupStats>> {
        self.check_len(flat)?;
        let cat = self.category_stats(flat);
        Ok(self.members.iter().map(|m| stats_of_members(&cat, m)).collect())
    }

    pub fn value(&self, flat: &[f64]) -> Result<f64> {
        let stats = self.group_stats(flat)?;
        Ok((0..stats.len())
            .map(|j| (self.params.tau + scheme_term(j, &stats, &self.params).0).ln())
            .sum())
    }

    pub fn evaluate(&self, flat: &[f64]) -> Result<GradedValue> {
        self.check_len(flat)?;
        let cat = self.category_stats(flat);
        let stats: Vec<GroupStats> = self.members.iter().map(|m| stats_of_members(&cat, m)).collect();
        let k = stats.len();
        let strategy = self.params.strategy;

        let mut value = 0.0;
        let mut g_spread = vec![0.0; k];
        let mut g_wstd = vec![0.0; k];
        let mut g_wmean = vec![0.0; k];
        for j in 0..k {
            let (term, partials) = scheme_term(j, &stats, &self.params);
            value += (self.params.tau + term).ln();
            let outer = 1.0 / (self.params.tau + term);
            g_spread[j] += outer * partials.d_spread;
            let d_sum = outer * partials.d_sum;
            if d_sum == 0.0 {
                continue;
            }
            for kk in j + 1..k {
                let ds = stats[j].w_std - stats[kk].w_std;
                let d = d_sum * 2.0 * ds * (ds * ds).exp();
                g_wstd[j] += d;
                g_wstd[kk] -= d;
                if strategy.uses_mean_separation() {
                    let dm = stats[j].w_mean - stats[kk].w_mean;
                    let d = d_sum * 2.0 * dm * (dm * dm).exp();
                    g_wmean[j] += d;
                    g_wmean[kk] -= d;
                }
            }
        }

        // group statistics -> per-category (u, δ)
        let mut g_mean = vec![0.0; self.n];
        let mut g_std = vec![0.0; self.n];
        for (j, members) in self.members.iter().enumerate() {
            let s = &stats[j];
            let n = members.len() as f64;
            if members.len() == 1 {
                g_mean[members[0]] += g_wmean[j];
                g_std[members[0]] += g_wstd[j];
                continue;
            }
            for &m in members {
                g_mean[m] += g_wmean[j] / n;
                if s.w_mean_std > 0.0 {
                    g_mean[m] += g_spread[j] * (cat[m].mean - s.u_group) / (n * s.w_mean_std);
                }
                if s.w_std > 0.0 {
                    g_std[m] += g_wstd[j] * (cat[m].std - s.delta_group) / (n * s.w_std);
                }
            }
        }

        let mut gradient = vec![0.0; flat.len()];
        for (i, (row, out)) in flat.chunks(self.dim).zip(gradient.chunks_mut(self.dim)).enumerate() {
            accumulate_stats_adjoint(row, cat[i], g_mean[i], g_std[i], out);
        }
        Ok(GradedValue::new(value, gradient))
    }
}

/// Total grouping loss with its gradient with respect to every feature
/// entry, flattened row-major in the set's category order.
pub fn re_meta_loss(x: &MetaFeatureSet, t: &GroupingTable, p: &GroupingParams) -> Result<GradedValue> {
    GroupingObjective::new(x, t, *p)?.evaluate(&x.flatten())
}
