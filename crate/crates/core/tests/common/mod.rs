//! Test-only oracles, written independently of the library code paths.

#![allow(dead_code)]

use std::collections::HashMap;

use epimarkov::markov::{MarkovBasis, MarkovMove};
use epimarkov::tables::{ContingencyTable, LogLinearModel, TableShape};
use rand::Rng;

/// Random 3×3×2 table with `total` individuals dropped uniformly into cells.
pub fn random_pair_table<R: Rng>(rng: &mut R, total: u64) -> ContingencyTable {
    let mut counts = vec![0u64; 18];
    for _ in 0..total {
        counts[rng.random_range(0..18)] += 1;
    }
    ContingencyTable::new(TableShape::snp_pair(), counts).unwrap()
}

/// Cell `(i, j, k)` of a flat 3×3×2 table.
pub fn idx(i: usize, j: usize, k: usize) -> usize {
    i + 3 * j + 9 * k
}

/// Every 3×3×2 table sharing the XY, XD and YD margins of `counts`.
///
/// Fixing the D=0 slice `a` determines the D=1 slice as `n_ij+ − a`, so
/// the fiber is the set of 3×3 tables `0 ≤ a ≤ n_ij+` with the D=0 row and
/// column sums.
pub fn pair_fiber(counts: &[u64]) -> Vec<Vec<u64>> {
    let n = |i, j| counts[idx(i, j, 0)] + counts[idx(i, j, 1)];
    let r: Vec<i64> = (0..3).map(|i| (0..3).map(|j| counts[idx(i, j, 0)] as i64).sum()).collect();
    let s: Vec<i64> = (0..3).map(|j| (0..3).map(|i| counts[idx(i, j, 0)] as i64).sum()).collect();
    let mut out = Vec::new();
    for a00 in 0..=n(0, 0) as i64 {
        for a01 in 0..=n(0, 1) as i64 {
            for a10 in 0..=n(1, 0) as i64 {
                for a11 in 0..=n(1, 1) as i64 {
                    let a02 = r[0] - a00 - a01;
                    let a12 = r[1] - a10 - a11;
                    let a20 = s[0] - a00 - a10;
                    let a21 = s[1] - a01 - a11;
                    let a22 = r[2] - a20 - a21;
                    if a22 != s[2] - a02 - a12 {
                        continue;
                    }
                    let a = [[a00, a01, a02], [a10, a11, a12], [a20, a21, a22]];
                    let ok = (0..3).all(|i| (0..3).all(|j| a[i][j] >= 0 && a[i][j] as u64 <= n(i, j)));
                    if !ok {
                        continue;
                    }
                    let mut t = vec![0u64; 18];
                    for i in 0..3 {
                        for j in 0..3 {
                            t[idx(i, j, 0)] = a[i][j] as u64;
                            t[idx(i, j, 1)] = n(i, j) - a[i][j] as u64;
                        }
                    }
                    out.push(t);
                }
            }
        }
    }
    out
}

/// Hypergeometric weights `∝ 1/Π n!`, normalized.
pub fn fiber_weights(fiber: &[Vec<u64>]) -> Vec<f64> {
    let ln_fact = |n: u64| -> f64 { (1..=n).map(|k| (k as f64).ln()).sum() };
    let logw: Vec<f64> = fiber.iter().map(|t| -t.iter().map(|&c| ln_fact(c)).sum::<f64>()).collect();
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Coordinates of a flat cell under first-axis-fastest order.
pub fn coords(sizes: &[usize], mut cell: usize) -> Vec<usize> {
    sizes
        .iter()
        .map(|&s| {
            let c = cell % s;
            cell /= s;
            c
        })
        .collect()
}

/// Margin of `values` over `facet` as a map from facet coordinates.
pub fn naive_margin(sizes: &[usize], values: &[f64], facet: &[usize]) -> HashMap<Vec<usize>, f64> {
    let mut m = HashMap::new();
    for (cell, &v) in values.iter().enumerate() {
        let c = coords(sizes, cell);
        let key: Vec<usize> = facet.iter().map(|&a| c[a]).collect();
        *m.entry(key).or_insert(0.0) += v;
    }
    m
}

/// Plain iterative proportional fitting: cycle over facets until every
/// fitted margin is within `tol` of the observed one.
pub fn naive_ipf(sizes: &[usize], observed: &[f64], facets: &[Vec<usize>], tol: f64) -> Vec<f64> {
    naive_ipf_from(sizes, observed, facets, tol, vec![1.0; observed.len()])
}

/// [`naive_ipf`] from an arbitrary nonnegative starting table.
pub fn naive_ipf_from(sizes: &[usize], observed: &[f64], facets: &[Vec<usize>], tol: f64, start: Vec<f64>) -> Vec<f64> {
    let mut fit = start;
    let targets: Vec<_> = facets.iter().map(|f| naive_margin(sizes, observed, f)).collect();
    for _ in 0..100_000 {
        for (f, target) in facets.iter().zip(&targets) {
            let current = naive_margin(sizes, &fit, f);
            for (cell, v) in fit.iter_mut().enumerate() {
                let c = coords(sizes, cell);
                let key: Vec<usize> = f.iter().map(|&a| c[a]).collect();
                let cur = current[&key];
                *v = if cur > 0.0 { *v * target[&key] / cur } else { 0.0 };
            }
        }
        let dev = facets
            .iter()
            .zip(&targets)
            .map(|(f, target)| {
                let m = naive_margin(sizes, &fit, f);
                target.iter().map(|(k, t)| (m[k] - t).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if dev < tol {
            break;
        }
    }
    fit
}

/// Pearson χ², skipping cells with zero expectation.
pub fn naive_chi2(observed: &[u64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum()
}

/// Exact conditional p-value of the no-3-way test on a 3×3×2 table.
///
/// The expected counts are fitted on the cells that some fiber element makes
/// positive. With the D=0 slice fixing the table, the fiber is a capacitated
/// transportation polytope with integral vertices, so this is also the real
/// support of the maximum likelihood estimate.
pub fn exact_pair_p_value(counts: &[u64]) -> f64 {
    let facets = vec![vec![0, 1], vec![0, 2], vec![1, 2]];
    let obs_f: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let fiber = pair_fiber(counts);
    let start: Vec<f64> = (0..18).map(|c| if fiber.iter().any(|t| t[c] > 0) { 1.0 } else { 0.0 }).collect();
    let expected = naive_ipf_from(&[3, 3, 2], &obs_f, &facets, 1e-12, start);
    let observed = naive_chi2(counts, &expected);
    let weights = fiber_weights(&fiber);
    fiber
        .iter()
        .zip(&weights)
        .filter(|(t, _)| naive_chi2(t, &expected) >= observed - 1e-9 * observed.max(1.0))
        .map(|(_, w)| w)
        .sum()
}

/// Degree-8 moves of the no-4-way model on 3×3×3×2 tables: for every choice
/// of two levels on each SNP axis, the ±1 pattern on the resulting 2×2×2×2
/// subtable whose sign is the parity of the "upper" levels. Every
/// three-variable margin vanishes; the set is not a full Markov basis.
pub fn parity_moves_3332() -> MarkovBasis {
    let shape = TableShape::snp_set(3).unwrap();
    let pairs = [(0, 1), (0, 2), (1, 2)];
    let mut moves = Vec::new();
    for &(x0, x1) in &pairs {
        for &(y0, y1) in &pairs {
            for &(z0, z1) in &pairs {
                let mut v = vec![0i64; 54];
                for (bx, x) in [x0, x1].into_iter().enumerate() {
                    for (by, y) in [y0, y1].into_iter().enumerate() {
                        for (bz, z) in [z0, z1].into_iter().enumerate() {
                            for d in 0..2 {
                                let parity = bx + by + bz + d;
                                v[x + 3 * y + 9 * z + 27 * d] = if parity % 2 == 0 { 1 } else { -1 };
                            }
                        }
                    }
                }
                moves.push(MarkovMove::new(v));
            }
        }
    }
    MarkovBasis::new(LogLinearModel::no_highest_interaction(shape), moves).unwrap()
}

/// A 3×3×3×2 table in the no-4-way model: a product of four integer
/// three-variable factors.
pub fn no4way_product_table() -> ContingencyTable {
    let f = |a: usize, b: usize, c: usize, salt: usize| 1 + ((a + 2 * b + 3 * c + salt) % 2) as u64;
    let mut counts = vec![0u64; 54];
    for x in 0..3 {
        for y in 0..3 {
            for z in 0..3 {
                for d in 0..2 {
                    counts[x + 3 * y + 9 * z + 27 * d] = f(x, y, z, 0) * f(x, y, d, 1) * f(x, z, d, 2) * f(y, z, d, 3);
                }
            }
        }
    }
    ContingencyTable::new(TableShape::snp_set(3).unwrap(), counts).unwrap()
}
