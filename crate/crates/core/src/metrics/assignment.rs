//! Square assignment solvers.

/// Minimum-cost perfect matching on a square matrix of finite costs
/// (Hungarian method with potentials, O(n³)). Returns the total cost and
/// the column assigned to every row.
pub fn hungarian(cost: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = cost.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    debug_assert!(cost.iter().all(|r| r.len() == n));
    // 1-based arrays; column 0 is a virtual start
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
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
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    let total = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .sum();
    (total, assignment)
}

/// Smallest `t` such that a perfect matching exists using only entries
/// `≤ t` (bottleneck assignment). Binary search over the distinct costs
/// with augmenting-path matching.
pub fn bottleneck_assignment(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    if n == 0 {
        return 0.0;
    }
    let mut values: Vec<f64> = cost.iter().flatten().copied().collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let (mut lo, mut hi) = (0, values.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if has_perfect_matching(cost, values[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    values[lo]
}

fn has_perfect_matching(cost: &[Vec<f64>], t: f64) -> bool {
    let n = cost.len();
    let mut match_col: Vec<Option<usize>> = vec![None; n];
    fn augment(
        i: usize,
        cost: &[Vec<f64>],
        t: f64,
        seen: &mut [bool],
        match_col: &mut [Option<usize>],
    ) -> bool {
        for j in 0..cost.len() {
            if cost[i][j] <= t && !seen[j] {
                seen[j] = true;
                let free = match match_col[j] {
                    None => true,
                    Some(k) => augment(k, cost, t, seen, match_col),
                };
                if free {
                    match_col[j] = Some(i);
                    return true;
                }
            }
        }
        false
    }
    (0..n).all(|i| {
        let mut seen = vec![false; n];
        augment(i, cost, t, &mut seen, &mut match_col)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for k in 0..=p.len() {
                let mut q = p.clone();
                q.insert(k, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..300 {
            let n = rng.gen_range(1..7);
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(0.0..10.0)).collect())
                .collect();
            let perms = permutations(n);
            let best_sum = perms
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            let best_max = perms
                .iter()
                .map(|p| {
                    p.iter()
                        .enumerate()
                        .map(|(i, &j)| cost[i][j])
                        .fold(0.0, f64::max)
                })
                .fold(f64::INFINITY, f64::min);
            let (h, a) = hungarian(&cost);
            assert!((h - best_sum).abs() < 1e-12);
            let mut seen = a.clone();
            seen.sort_unstable();
            assert_eq!(seen, (0..n).collect::<Vec<_>>());
            assert_eq!(bottleneck_assignment(&cost), best_max);
        }
    }

    #[test]
    fn empty_matrix() {
        assert_eq!(hungarian(&[]).0, 0.0);
        assert_eq!(bottleneck_assignment(&[]), 0.0);
    }
}
