//! Optimal pairing of ground-truth and predicted points.
//!
//! Rectangular instances are padded to a square cost matrix whose padding
//! entries equal the unmatched penalty, then solved with the Hungarian
//! algorithm. [`brute_force_match`] enumerates every injective matching and
//! exists to cross-check the solver on small instances.

use thiserror::Error;

use crate::corpus::PointAnnotation;

/// Largest side accepted by [`brute_force_match`].
pub const BRUTE_FORCE_LIMIT: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum AssignmentError {
    #[error("cost matrix is {rows}x{cols}; the solver needs a square matrix")]
    NotSquare { rows: usize, cols: usize },
    #[error("cost matrix has {found} entries, expected {rows}x{cols}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        found: usize,
    },
    #[error("cost at ({row}, {col}) is {value}; costs must be finite and non-negative")]
    BadCost { row: usize, col: usize, value: f64 },
    #[error("instance of size {0} exceeds the brute-force limit of {BRUTE_FORCE_LIMIT}")]
    TooLarge(usize),
}

/// Dense row-major matrix of non-negative finite costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    costs: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, costs: Vec<f64>) -> Result<Self, AssignmentError> {
        if costs.len() != rows * cols {
            return Err(AssignmentError::ShapeMismatch {
                rows,
                cols,
                found: costs.len(),
            });
        }
        if let Some(i) = costs.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(AssignmentError::BadCost {
                row: i / cols,
                col: i % cols,
                value: costs[i],
            });
        }
        Ok(Self { rows, cols, costs })
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, AssignmentError> {
        let costs = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        Self::new(rows, cols, costs)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.costs[row * self.cols + col]
    }

    /// Sum of the costs of an assignment, accumulated in the given order.
    pub fn total(&self, assignment: &[(usize, usize)]) -> f64 {
        assignment.iter().map(|&(r, c)| self.at(r, c)).sum()
    }
}

/// Minimum-cost perfect assignment on a square matrix.
///
/// Returns `(row, col)` pairs sorted by row. Shortest augmenting paths with
/// row/column potentials, O(n³). Columns are scanned in ascending order and
/// only a strictly smaller slack replaces the current minimum, so equal-cost
/// alternatives resolve the same way on every run.
pub fn hungarian(costs: &CostMatrix) -> Result<Vec<(usize, usize)>, AssignmentError> {
    let n = costs.rows;
    if costs.cols != n {
        return Err(AssignmentError::NotSquare {
            rows: costs.rows,
            cols: costs.cols,
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    // 1-based internally; index 0 is the virtual source column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        row_of_col[0] = row;
        let mut col0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = row_of_col[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let slack = costs.at(r0 - 1, col - 1) - u[r0] - v[col];
                if slack < min_slack[col] {
                    min_slack[col] = slack;
                    way[col] = col0;
                }
                if min_slack[col] < delta {
                    delta = min_slack[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[row_of_col[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_slack[col] -= delta;
                }
            }
            col0 = col1;
            if row_of_col[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            row_of_col[col0] = row_of_col[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut out: Vec<(usize, usize)> = (1..=n).map(|c| (row_of_col[c] - 1, c - 1)).collect();
    out.sort_unstable();
    Ok(out)
}

/// A matched ground-truth/prediction pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub gt: usize,
    pub pred: usize,
    pub distance: f64,
}

/// Outcome of point matching. `pairs` is sorted by ground-truth index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_gt: usize,
    pub unmatched_pred: usize,
}

impl MatchResult {
    /// Sum of pair distances (in ground-truth order) plus the penalty for
    /// every unmatched point.
    pub fn objective(&self, penalty: f64) -> f64 {
        let matched: f64 = self.pairs.iter().map(|p| p.distance).sum();
        matched + penalty * (self.unmatched_gt + self.unmatched_pred) as f64
    }

    pub fn unmatched(&self) -> usize {
        self.unmatched_gt + self.unmatched_pred
    }
}

pub fn euclidean(a: &PointAnnotation, b: &PointAnnotation) -> f64 {
    let dx = a.cx - b.cx;
    let dy = a.cy - b.cy;
    (dx * dx + dy * dy).sqrt()
}

/// Optimal matching of predictions to ground truth with a per-point penalty
/// for anything left unmatched.
///
/// Builds a `max(n_gt, n_pred)` square matrix: real pairs cost their
/// Euclidean distance, padded rows/columns cost `penalty`. Panics if
/// `penalty` is not finite and non-negative.
pub fn match_points(
    gt: &[PointAnnotation],
    pred: &[PointAnnotation],
    penalty: f64,
) -> MatchResult {
    let n = gt.len().max(pred.len());
    let costs = CostMatrix::from_fn(n, n, |i, j| match (gt.get(i), pred.get(j)) {
        (Some(g), Some(p)) => euclidean(g, p),
        _ => penalty,
    })
    .expect("penalty must be finite and non-negative");
    let assignment = hungarian(&costs).expect("matrix is square by construction");

    let pairs: Vec<MatchedPair> = assignment
        .into_iter()
        .filter(|&(i, j)| i < gt.len() && j < pred.len())
        .map(|(i, j)| MatchedPair {
            gt: i,
            pred: j,
            distance: costs.at(i, j),
        })
        .collect();
    MatchResult {
        unmatched_gt: gt.len() - pairs.len(),
        unmatched_pred: pred.len() - pairs.len(),
        pairs,
    }
}

/// Exhaustive reference for [`match_points`]: tries every injective
/// matching of the smaller side into the larger one and keeps the first
/// minimum found in lexicographic order.
pub fn brute_force_match(
    gt: &[PointAnnotation],
    pred: &[PointAnnotation],
    penalty: f64,
) -> Result<MatchResult, AssignmentError> {
    let n = gt.len().max(pred.len());
    if n > BRUTE_FORCE_LIMIT {
        return Err(AssignmentError::TooLarge(n));
    }
    let gt_is_small = gt.len() <= pred.len();
    let (small, large) = if gt_is_small {
        (gt.len(), pred.len())
    } else {
        (pred.len(), gt.len())
    };

    let mut best: Option<(f64, MatchResult)> = None;
    let mut chosen = Vec::with_capacity(small);
    let mut taken = vec![false; large];
    let mut visit = |image: &[usize]| {
        let mut pairs: Vec<MatchedPair> = image
            .iter()
            .enumerate()
            .map(|(s, &l)| {
                let (g, p) = if gt_is_small { (s, l) } else { (l, s) };
                MatchedPair {
                    gt: g,
                    pred: p,
                    distance: euclidean(&gt[g], &pred[p]),
                }
            })
            .collect();
        pairs.sort_by_key(|p| p.gt);
        let result = MatchResult {
            unmatched_gt: gt.len() - pairs.len(),
            unmatched_pred: pred.len() - pairs.len(),
            pairs,
        };
        let value = result.objective(penalty);
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, result));
        }
    };
    enumerate_injections(small, large, &mut chosen, &mut taken, &mut visit);
    Ok(best.map(|(_, r)| r).unwrap_or_default())
}

fn enumerate_injections(
    small: usize,
    large: usize,
    chosen: &mut Vec<usize>,
    taken: &mut [bool],
    visit: &mut impl FnMut(&[usize]),
) {
    if chosen.len() == small {
        visit(chosen);
        return;
    }
    for l in 0..large {
        if taken[l] {
            continue;
        }
        taken[l] = true;
        chosen.push(l);
        enumerate_injections(small, large, chosen, taken, visit);
        chosen.pop();
        taken[l] = false;
    }
}
