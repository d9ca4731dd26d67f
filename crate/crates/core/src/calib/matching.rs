//! Descriptor matching: similarity is Euclidean distance, and pairs are
//! chosen one-to-one to minimize the summed distance of the assignment,
//! then truncated to the `N` best pairs.
//!
//! Up to 64 candidates per side the assignment is solved exactly with the
//! Hungarian algorithm; above that a greedy mutual-nearest-neighbor pass
//! keeps the cost near-linear at the price of possibly dropping ambiguous
//! candidates.

use super::CalibError;

/// Candidate-count threshold below which the exact assignment is used.
const EXACT_ASSIGNMENT_LIMIT: usize = 64;

/// One matched pair of descriptor indices with its distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPair {
    /// Index into the first descriptor set.
    pub index_a: usize,
    /// Index into the second descriptor set.
    pub index_b: usize,
    /// Euclidean distance between the two descriptors.
    pub distance: f64,
}

/// Result of matching two descriptor sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Matches {
    /// Pairs sorted ascending by distance, at most `top_n` of them.
    pub pairs: Vec<MatchPair>,
    /// True when fewer than `top_n` pairs could be formed.
    pub shortfall: bool,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Matches two descriptor sets and keeps the `top_n` closest pairs.
///
/// The assignment is one-to-one and minimizes total Euclidean distance
/// (exactly for small sets, greedily for large ones); the returned pairs
/// are sorted ascending by distance. When fewer than `top_n` pairs exist
/// all of them are returned and `shortfall` is set.
pub fn match_keypoints(
    descriptors_a: &[Vec<f64>],
    descriptors_b: &[Vec<f64>],
    top_n: usize,
) -> Result<Matches, CalibError> {
    if top_n == 0 {
        return Err(CalibError::InvalidTopN);
    }
    if descriptors_a.is_empty() || descriptors_b.is_empty() {
        return Err(CalibError::EmptyDescriptorSet);
    }
    let dim = descriptors_a[0].len();
    for d in descriptors_a.iter().chain(descriptors_b) {
        if d.len() != dim {
            return Err(CalibError::DimensionMismatch { a: dim, b: d.len() });
        }
    }

    let n_a = descriptors_a.len();
    let n_b = descriptors_b.len();
    let mut pairs = if n_a.max(n_b) <= EXACT_ASSIGNMENT_LIMIT {
        let cost: Vec<Vec<f64>> = descriptors_a
            .iter()
            .map(|a| descriptors_b.iter().map(|b| euclidean(a, b)).collect())
            .collect();
        assignment(&cost)
            .into_iter()
            .map(|(i, j)| MatchPair {
                index_a: i,
                index_b: j,
                distance: cost[i][j],
            })
            .collect::<Vec<_>>()
    } else {
        mutual_nearest_neighbors(descriptors_a, descriptors_b)
    };

    pairs.sort_by(|p, q| {
        p.distance
            .total_cmp(&q.distance)
            .then(p.index_a.cmp(&q.index_a))
    });
    let shortfall = pairs.len() < top_n;
    pairs.truncate(top_n);
    Ok(Matches { pairs, shortfall })
}

/// Exact minimum-cost assignment (Hungarian algorithm with potentials,
/// O(n²m)). Returns `min(rows, cols)` row/column pairs.
fn assignment(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    let cols = cost[0].len();
    if rows > cols {
        // The algorithm below wants rows ≤ cols; transpose.
        let t: Vec<Vec<f64>> = (0..cols)
            .map(|j| (0..rows).map(|i| cost[i][j]).collect())
            .collect();
        return assignment(&t).into_iter().map(|(j, i)| (i, j)).collect();
    }

    // Classic shortest-augmenting-path formulation, 1-indexed with a
    // virtual column 0. `way[j]` remembers the previous column on the
    // augmenting path into column j.
    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; rows + 1];
    let mut v = vec![0.0f64; cols + 1];
    let mut matched_row = vec![0usize; cols + 1]; // row matched to column j (1-indexed, 0 = free)
    let mut way = vec![0usize; cols + 1];

    for i in 1..=rows {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=cols {
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
            for j in 0..=cols {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        // Unwind the augmenting path.
        while j0 != 0 {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
        }
    }

    let mut out = Vec::with_capacity(rows);
    for j in 1..=cols {
        if matched_row[j] != 0 {
            out.push((matched_row[j] - 1, j - 1));
        }
    }
    out.sort_unstable();
    out
}

/// Greedy mutual-nearest-neighbor matching for large candidate sets: a
/// pair is kept when each side is the other's nearest neighbor.
fn mutual_nearest_neighbors(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<MatchPair> {
    let nn_of = |from: &[Vec<f64>], to: &[Vec<f64>]| -> Vec<(usize, f64)> {
        from.iter()
            .map(|x| {
                let mut best = (0usize, f64::INFINITY);
                for (j, y) in to.iter().enumerate() {
                    let d = euclidean(x, y);
                    if d < best.1 {
                        best = (j, d);
                    }
                }
                best
            })
            .collect()
    };
    let a_to_b = nn_of(a, b);
    let b_to_a = nn_of(b, a);
    a_to_b
        .iter()
        .enumerate()
        .filter(|&(i, &(j, _))| b_to_a[j].0 == i)
        .map(|(i, &(j, d))| MatchPair {
            index_a: i,
            index_b: j,
            distance: d,
        })
        .collect()
}
