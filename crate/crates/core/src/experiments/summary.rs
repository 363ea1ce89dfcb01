use serde::{Deserialize, Serialize};

use super::scenario::TrialResult;

/// Boxplot statistics: quartiles by linear interpolation between order
/// statistics, whiskers at the most extreme points within `1.5 IQR` of the
/// box, everything beyond them listed as outliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outliers: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl BoxStats {
    /// `None` when there are no finite values.
    pub fn from_values(values: &[f64]) -> Option<BoxStats> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let q1 = quantile(&v, 0.25);
        let q3 = quantile(&v, 0.75);
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside: Vec<f64> = v.iter().copied().filter(|x| *x >= lo_fence && *x <= hi_fence).collect();
        Some(BoxStats {
            count: v.len(),
            min: v[0],
            q1,
            median: quantile(&v, 0.5),
            q3,
            max: v[v.len() - 1],
            lower_whisker: inside.first().copied().unwrap_or(q1),
            upper_whisker: inside.last().copied().unwrap_or(q3),
            outliers: v.iter().copied().filter(|x| *x < lo_fence || *x > hi_fence).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub label: String,
    pub position_error: Option<BoxStats>,
    pub amplitude_error: Option<BoxStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub k_high: usize,
    pub checked: usize,
    pub satisfied: usize,
}

/// Aggregates over the rows of `trials.csv`; everything here can be
/// recomputed from that file alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub failed: usize,
    pub admissible: usize,
    pub iterations: Option<BoxStats>,
    pub final_residual: Option<BoxStats>,
    pub groups: Vec<GroupSummary>,
    pub stability: Vec<StabilitySummary>,
}

impl Summary {
    pub fn from_trials(trials: &[TrialResult]) -> Summary {
        let mut labels: Vec<String> = Vec::new();
        let mut ks: Vec<usize> = Vec::new();
        for t in trials {
            for g in &t.groups {
                if !labels.contains(&g.label) {
                    labels.push(g.label.clone());
                }
            }
            for s in &t.stability {
                if !ks.contains(&s.k_high) {
                    ks.push(s.k_high);
                }
            }
        }
        let groups = labels
            .into_iter()
            .map(|label| {
                let pick = |f: &dyn Fn(&super::matching::GroupErrors) -> &Vec<f64>| -> Vec<f64> {
                    trials
                        .iter()
                        .flat_map(|t| t.groups.iter().filter(|g| g.label == label).flat_map(|g| f(g).clone()))
                        .collect()
                };
                GroupSummary {
                    position_error: BoxStats::from_values(&pick(&|g| &g.position_errors)),
                    amplitude_error: BoxStats::from_values(&pick(&|g| &g.amplitude_errors)),
                    label,
                }
            })
            .collect();
        let stability = ks
            .into_iter()
            .map(|k| {
                let checks: Vec<bool> = trials
                    .iter()
                    .flat_map(|t| t.stability.iter().filter(|s| s.k_high == k).map(|s| s.ok))
                    .collect();
                StabilitySummary {
                    k_high: k,
                    checked: checks.len(),
                    satisfied: checks.iter().filter(|&&b| b).count(),
                }
            })
            .collect();
        let done: Vec<&TrialResult> = trials.iter().filter(|t| !t.failed()).collect();
        let iterations: Vec<f64> = done.iter().map(|t| t.iterations as f64).collect();
        let residuals: Vec<f64> = done.iter().map(|t| t.final_residual).collect();
        Summary {
            trials: trials.len(),
            failed: trials.len() - done.len(),
            admissible: trials.iter().filter(|t| t.admissible == Some(true)).count(),
            iterations: BoxStats::from_values(&iterations),
            final_residual: BoxStats::from_values(&residuals),
            groups,
            stability,
        }
    }

    /// Median position error pooled over every group.
    pub fn pooled_position_median(trials: &[TrialResult]) -> Option<f64> {
        let all: Vec<f64> = trials
            .iter()
            .flat_map(|t| t.groups.iter().flat_map(|g| g.position_errors.iter().copied()))
            .collect();
        BoxStats::from_values(&all).map(|b| b.median)
    }
}
