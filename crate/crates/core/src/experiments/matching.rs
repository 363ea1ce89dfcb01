use crate::error::{Error, Result};
use crate::grid::circular_distance;
use crate::models::{ModelInstance, ModelKind};

/// Minimum-cost perfect matching on a square cost matrix (Hungarian
/// algorithm with potentials, `O(n^3)`). Returns `assignment[row] = col`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    assignment
}

/// Optimal pairing of true and estimated positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// `assignment[j]` is the estimate paired with true source `j`.
    pub assignment: Vec<usize>,
    /// Distance of each true source to its estimate.
    pub errors: Vec<f64>,
}

/// Pairs estimates with truths minimising the summed distance `dist`.
pub fn match_by(estimated: &[f64], truth: &[f64], dist: impl Fn(f64, f64) -> f64) -> Result<Matching> {
    if estimated.len() != truth.len() {
        return Err(Error::CountMismatch {
            estimated: estimated.len(),
            truth: truth.len(),
        });
    }
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|&t| estimated.iter().map(|&e| dist(e, t)).collect())
        .collect();
    let assignment = hungarian(&cost);
    let errors = assignment.iter().enumerate().map(|(j, &i)| cost[j][i]).collect();
    Ok(Matching { assignment, errors })
}

/// Optimal matching under the wrap-around distance.
pub fn match_errors(estimated: &[f64], truth: &[f64]) -> Result<Matching> {
    match_by(estimated, truth, circular_distance)
}

/// Matched errors of one source group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupErrors {
    pub label: String,
    pub position_errors: Vec<f64>,
    /// Euclidean distance between matched amplitude coordinates.
    pub amplitude_errors: Vec<f64>,
}

/// Matches `estimated` against `truth` group by group (per derivative order
/// for FRI). Positions use the wrap metric, except chirp centers which live
/// on the open interval and use `|x - y|`.
pub fn model_errors(estimated: &ModelInstance, truth: &ModelInstance) -> Result<Vec<GroupErrors>> {
    let te = truth.flatten();
    let ee = estimated.flatten();
    if te.len() != ee.len() || estimated.kind() != truth.kind() {
        return Err(Error::CountMismatch {
            estimated: ee.len(),
            truth: te.len(),
        });
    }
    let periodic = truth.kind() != ModelKind::Chirp;
    let tg = truth.source_groups();
    let eg = estimated.source_groups();
    let mut out = Vec::with_capacity(tg.len());
    for (t, e) in tg.iter().zip(&eg) {
        let tp: Vec<f64> = t.sources.iter().map(|s| te[s.position]).collect();
        let ep: Vec<f64> = e.sources.iter().map(|s| ee[s.position]).collect();
        let m = if periodic {
            match_errors(&ep, &tp)?
        } else {
            match_by(&ep, &tp, |a, b| (a - b).abs())?
        };
        let amplitude_errors = t
            .sources
            .iter()
            .zip(&m.assignment)
            .map(|(ts, &i)| {
                ts.amplitudes
                    .iter()
                    .zip(&e.sources[i].amplitudes)
                    .map(|(&a, &b)| (te[a] - ee[b]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        out.push(GroupErrors {
            label: t.label.clone(),
            position_errors: m.errors,
            amplitude_errors,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_lists_match_exactly() {
        let x = [0.1, 0.4, 0.75];
        let m = match_errors(&x, &x).unwrap();
        assert_eq!(m.errors, vec![0.0; 3]);
        assert_eq!(m.assignment, vec![0, 1, 2]);
    }

    #[test]
    fn swapped_pair_matches_with_zero_error() {
        let m = match_errors(&[0.1, 0.9], &[0.9, 0.1]).unwrap();
        assert_eq!(m.errors, vec![0.0, 0.0]);
        assert_eq!(m.assignment, vec![1, 0]);
    }

    #[test]
    fn count_mismatch() {
        assert!(matches!(
            match_errors(&[0.1], &[0.1, 0.2]),
            Err(Error::CountMismatch { estimated: 1, truth: 2 })
        ));
    }

    #[test]
    fn hungarian_small_known_case() {
        let c = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&c);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| c[i][j]).sum();
        assert_eq!(total, 5.0);
    }
}
