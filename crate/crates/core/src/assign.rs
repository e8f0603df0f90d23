//! Maximum-weight one-to-one assignment (Hungarian method).

use alloc::vec;
use alloc::vec::Vec;

/// Pairs `(row, col)` of a maximum-total-weight assignment between rows and
/// columns of `weights`. Pairs with weight `<= 0` are left out, so with 0/1
/// weights the result is a maximum-cardinality matching of the 1 entries.
/// `weights` must be rectangular.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let n = rows.max(cols);
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            -weights[i][j]
        } else {
            0.0
        }
    };

    // potentials and matching are 1-based, slot 0 is the virtual column
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
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
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
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
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut out: Vec<(usize, usize)> = (1..=n)
        .filter(|&j| p[j] != 0)
        .map(|j| (p[j] - 1, j - 1))
        .filter(|&(i, j)| i < rows && j < cols && weights[i][j] > 0.0)
        .collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(w: &[Vec<f64>]) -> f64 {
        fn go(w: &[Vec<f64>], i: usize, used: u32) -> f64 {
            if i == w.len() {
                return 0.0;
            }
            let mut best = go(w, i + 1, used);
            for j in 0..w[0].len() {
                if used & (1 << j) == 0 {
                    best = best.max(w[i][j] + go(w, i + 1, used | (1 << j)));
                }
            }
            best
        }
        go(w, 0, 0)
    }

    fn total(w: &[Vec<f64>], pairs: &[(usize, usize)]) -> f64 {
        pairs.iter().map(|&(i, j)| w[i][j]).sum()
    }

    #[test]
    fn greedy_trap() {
        // greedy takes (0,0)=0.9 and is left with 0.1; optimum is 0.8 + 0.8
        let w = vec![vec![0.9, 0.8], vec![0.8, 0.1]];
        let pairs = max_weight_assignment(&w);
        assert_eq!(pairs, [(0, 1), (1, 0)]);
        assert!((total(&w, &pairs) - 1.6).abs() < 1e-12);
    }

    #[test]
    fn rectangular_and_empty() {
        assert!(max_weight_assignment(&[]).is_empty());
        let w = vec![vec![1.0, 0.0, 1.0]];
        assert_eq!(max_weight_assignment(&w).len(), 1);
        let w = vec![vec![0.0], vec![0.0]];
        assert!(max_weight_assignment(&w).is_empty());
    }

    #[test]
    fn matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let r = rng.gen_range(1..6);
            let c = rng.gen_range(1..6);
            let w: Vec<Vec<f64>> = (0..r)
                .map(|_| {
                    (0..c)
                        .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..1.0) })
                        .collect()
                })
                .collect();
            let got = total(&w, &max_weight_assignment(&w));
            assert!((got - brute(&w)).abs() < 1e-9);
        }
    }
}
