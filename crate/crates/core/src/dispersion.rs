//! Spread of per-class detection APs.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Per-class AP percentages.
#[derive(Debug, Clone, PartialEq)]
pub struct ApTable {
    rows: Vec<(String, f64)>,
}

impl ApTable {
    pub fn new(rows: Vec<(String, f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("AP table is empty"));
        }
        let mut seen = HashSet::new();
        for (name, ap) in &rows {
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(format!("duplicate class '{name}' in AP table")));
            }
            if !(0.0..=100.0).contains(ap) {
                return Err(Error::invalid(format!("AP {ap} for '{name}' outside [0, 100]")));
            }
        }
        Ok(ApTable { rows })
    }

    pub fn rows(&self) -> &[(String, f64)] {
        &self.rows
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|(_, ap)| *ap)
    }

    pub fn mean(&self) -> f64 {
        self.values().sum::<f64>() / self.rows.len() as f64
    }

    pub fn dispersion(&self, metric: DispersionMetric) -> f64 {
        let mean = self.mean();
        let std = (self.values().map(|v| (v - mean).powi(2)).sum::<f64>() / self.rows.len() as f64).sqrt();
        match metric {
            DispersionMetric::Std => std,
            DispersionMetric::Cv => 100.0 * std / mean,
            DispersionMetric::Range => {
                let max = self.values().fold(f64::NEG_INFINITY, f64::max);
                let min = self.values().fold(f64::INFINITY, f64::min);
                max - min
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DispersionMetric {
    /// Population standard deviation.
    #[default]
    Std,
    /// Coefficient of variation in percent.
    Cv,
    /// max - min
    Range,
}

impl DispersionMetric {
    pub const ALL: [DispersionMetric; 3] = [DispersionMetric::Std, DispersionMetric::Cv, DispersionMetric::Range];

    pub fn name(self) -> &'static str {
        match self {
            DispersionMetric::Std => "std",
            DispersionMetric::Cv => "cv",
            DispersionMetric::Range => "range",
        }
    }
}

impl fmt::Display for DispersionMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DispersionMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "std" => Ok(DispersionMetric::Std),
            "cv" => Ok(DispersionMetric::Cv),
            "range" => Ok(DispersionMetric::Range),
            _ => Err(Error::invalid(format!("unknown dispersion metric '{s}'"))),
        }
    }
}
