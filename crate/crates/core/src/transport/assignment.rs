//! Exact solver for the square linear assignment problem.
//!
//! Shortest augmenting path with dual potentials, O(n³), correct for
//! arbitrary finite real costs (negative entries included).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Returns the assignment `perm` (row i is matched to column `perm[i]`)
/// minimizing the total cost, together with that total.
pub fn assignment_oracle(cost: &DMatrix<f64>) -> Result<(Vec<usize>, f64)> {
    let n = cost.nrows();
    if cost.ncols() != n || n == 0 {
        return Err(Error::InvalidArgument("cost matrix must be square and non-empty".into()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("cost matrix entries must be finite".into()));
    }

    // dual potentials over rows/columns, with a sentinel column 0
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    // way[j]: previous column on the alternating path to column j
    let mut way = vec![0usize; n + 1];
    // p[j]: row currently matched to column j (0 = free, rows are 1-based)
    let mut p = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // augment along the found path
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            perm[p[j] - 1] = j - 1;
        }
    }
    let total = (0..n).map(|i| cost[(i, perm[i])]).sum();
    Ok((perm, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn brute_force(cost: &DMatrix<f64>) -> f64 {
        let n = cost.nrows();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut perm, 0, cost, &mut best);
        best
    }

    fn permute(perm: &mut Vec<usize>, k: usize, cost: &DMatrix<f64>, best: &mut f64) {
        let n = perm.len();
        if k == n {
            let total: f64 = (0..n).map(|i| cost[(i, perm[i])]).sum();
            if total < *best {
                *best = total;
            }
            return;
        }
        for i in k..n {
            perm.swap(k, i);
            permute(perm, k + 1, cost, best);
            perm.swap(k, i);
        }
    }

    #[test]
    fn dominant_diagonal_yields_identity() {
        let mut cost = DMatrix::from_element(4, 4, 10.0);
        for i in 0..4 {
            cost[(i, i)] = 1.0;
        }
        let (perm, total) = assignment_oracle(&cost).unwrap();
        assert_eq!(perm, vec![0, 1, 2, 3]);
        assert_eq!(total, 4.0);
    }

    #[test]
    fn three_by_three_matches_brute_force() {
        let cost = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 3.0, 6.0, 9.0]);
        let (_, total) = assignment_oracle(&cost).unwrap();
        let expect = brute_force(&cost);
        assert_eq!(total, expect);
        // the anti-diagonal beats the diagonal here
        assert_eq!(total, 10.0);
    }

    #[test]
    fn random_matrices_match_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for trial in 0..30 {
            let n = rng.gen_range(2..=8);
            let cost = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-5.0..5.0));
            let (perm, total) = assignment_oracle(&cost).unwrap();
            // perm is a permutation
            let mut seen = vec![false; n];
            for &j in &perm {
                assert!(!seen[j]);
                seen[j] = true;
            }
            let expect = brute_force(&cost);
            assert!(
                (total - expect).abs() < 1e-9,
                "trial {trial}: oracle {total} vs brute force {expect}"
            );
        }
    }

    #[test]
    fn oracle_beats_random_permutations() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 24;
        let cost = DMatrix::from_fn(n, n, |_, _| rng.gen_range(0.0..1.0));
        let (_, total) = assignment_oracle(&cost).unwrap();
        for _ in 0..200 {
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let random_total: f64 = (0..n).map(|i| cost[(i, perm[i])]).sum();
            assert!(total <= random_total + 1e-12);
        }
    }

    #[test]
    fn non_finite_entries_rejected() {
        let mut cost = DMatrix::from_element(2, 2, 1.0);
        cost[(0, 1)] = f64::NAN;
        assert!(assignment_oracle(&cost).is_err());
        cost[(0, 1)] = f64::INFINITY;
        assert!(assignment_oracle(&cost).is_err());
    }
}
