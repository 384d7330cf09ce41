//! Small exact assignment solvers used by the RR engine.

/// Minimum-cost assignment of rows to distinct columns where every row may
/// also stay unassigned at cost 0. `cost[i][j]` is `None` when row `i` may
/// not take column `j`. Returns, per row, the chosen column; rows whose best
/// option ties with staying unassigned are reported as unassigned.
///
/// Shortest augmenting path Hungarian method over an `n x (m + n)` matrix
/// padded with one zero-cost "unassigned" column per row.
pub fn min_cost_assignment(cost: &[Vec<Option<f64>>], columns: usize) -> Vec<Option<usize>> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let width = columns + n;
    let entry = |i: usize, j: usize| -> f64 {
        if j < columns {
            match cost[i][j] {
                Some(c) if c < 0.0 => c,
                _ => 0.0,
            }
        } else {
            0.0
        }
    };

    // 1-indexed potentials; column 0 is the virtual source.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; width + 1];
    let mut owner = vec![0usize; width + 1];
    let mut way = vec![0usize; width + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; width + 1];
        let mut used = vec![false; width + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=width {
                if used[j] {
                    continue;
                }
                let cur = entry(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=width {
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

    let mut result = vec![None; n];
    for j in 1..=columns {
        let i = owner[j];
        if i == 0 {
            continue;
        }
        if matches!(cost[i - 1][j - 1], Some(c) if c < 0.0) {
            result[i - 1] = Some(j - 1);
        }
    }
    result
}

/// Maximum bipartite matching size (Kuhn's augmenting paths).
pub fn max_matching(allowed: &[Vec<bool>], columns: usize) -> usize {
    fn augment(
        row: usize,
        allowed: &[Vec<bool>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for (col, &ok) in allowed[row].iter().enumerate() {
            if !ok || seen[col] {
                continue;
            }
            seen[col] = true;
            if owner[col].is_none_or(|r| augment(r, allowed, seen, owner)) {
                owner[col] = Some(row);
                return true;
            }
        }
        false
    }

    let mut owner = vec![None; columns];
    let mut size = 0;
    for row in 0..allowed.len() {
        let mut seen = vec![false; columns];
        if augment(row, allowed, &mut seen, &mut owner) {
            size += 1;
        }
    }
    size
}
