//! Reference implementations written without the library's own numerics,
//! used as oracles by the integration tests.

#![allow(dead_code)]

use std::collections::HashMap;

/// Determinant by cofactor expansion along the first row.
pub fn det_cofactor(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    match n {
        0 => 1.0,
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => (0..n)
            .map(|j| {
                let minor: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(c, _)| *c != j)
                            .map(|(_, v)| *v)
                            .collect()
                    })
                    .collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[0][j] * det_cofactor(&minor)
            })
            .sum(),
    }
}

/// Log-determinant of a positive-definite matrix by Gaussian elimination
/// with partial pivoting.
pub fn log_det_gauss(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a = m.to_vec();
    let mut log_det = 0.0;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        a.swap(k, p);
        let pivot = a[k][k];
        assert!(pivot != 0.0, "singular matrix");
        log_det += pivot.abs().ln();
        let row_k = a[k].clone();
        for row in a.iter_mut().skip(k + 1) {
            let f = row[k] / pivot;
            for (v, r) in row.iter_mut().zip(&row_k).skip(k) {
                *v -= f * r;
            }
        }
    }
    log_det
}

/// Inverse by Gauss-Jordan elimination.
pub fn inverse_gauss(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        a.swap(k, p);
        let pivot = a[k][k];
        for v in a[k].iter_mut() {
            *v /= pivot;
        }
        for i in 0..n {
            if i != k {
                let f = a[i][k];
                let row_k = a[k].clone();
                for (v, r) in a[i].iter_mut().zip(row_k) {
                    *v -= f * r;
                }
            }
        }
    }
    a.into_iter().map(|row| row[n..].to_vec()).collect()
}

/// `exp(-1/2 sum (x-y)^2 / l)`, lengthscales entering linearly.
pub fn se(x: &[f64], y: &[f64], l: &[f64]) -> f64 {
    let q: f64 = x
        .iter()
        .zip(y)
        .zip(l)
        .map(|((a, b), l)| (a - b) * (a - b) / l)
        .sum();
    (-0.5 * q).exp()
}

pub fn se_gram(points: &[Vec<f64>], idx: &[usize], l: &[f64]) -> Vec<Vec<f64>> {
    idx.iter()
        .map(|&i| idx.iter().map(|&j| se(&points[i], &points[j], l)).collect())
        .collect()
}

/// Every set partition of `0..n` as a first-occurrence labeled assignment,
/// built by inserting each element into an existing block or a new one.
pub fn all_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for p in &out {
            let blocks = p.iter().max().map_or(0, |m| m + 1);
            for b in 0..=blocks {
                let mut q = p.clone();
                q.push(b);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

pub fn blocks(assignment: &[usize]) -> Vec<Vec<usize>> {
    let mut map: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, &c) in assignment.iter().enumerate() {
        map.entry(c).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = map.into_values().collect();
    out.sort();
    out
}

/// Relabel in first-occurrence order.
pub fn relabel(assignment: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    assignment
        .iter()
        .map(|c| {
            let next = map.len();
            *map.entry(*c).or_insert(next)
        })
        .collect()
}

/// Unnormalized SE-kernel log-weight `-tau * sum log det` of a partition.
pub fn se_log_weight(points: &[Vec<f64>], assignment: &[usize], l: &[f64], tau: f64) -> f64 {
    -tau * blocks(assignment)
        .iter()
        .map(|b| log_det_gauss(&se_gram(points, b, l)))
        .sum::<f64>()
}

/// Normalized posterior over all partitions of the points, keyed by the
/// relabeled assignment.
pub fn se_posterior(points: &[Vec<f64>], l: &[f64], tau: f64) -> HashMap<Vec<usize>, f64> {
    let parts = all_partitions(points.len());
    let logw: Vec<f64> = parts
        .iter()
        .map(|p| se_log_weight(points, p, l, tau))
        .collect();
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logw.iter().map(|w| (w - max).exp()).sum();
    parts
        .into_iter()
        .zip(logw)
        .map(|(p, w)| (p, (w - max).exp() / z))
        .collect()
}

/// Total variation distance between two distributions given as maps.
pub fn total_variation(p: &HashMap<Vec<usize>, f64>, q: &HashMap<Vec<usize>, f64>) -> f64 {
    let keys: std::collections::HashSet<_> = p.keys().chain(q.keys()).collect();
    0.5 * keys
        .into_iter()
        .map(|k| (p.get(k).copied().unwrap_or(0.0) - q.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// Adjusted Rand index from pair counts over every unordered pair.
pub fn ari_pairs(p: &[usize], q: &[usize]) -> f64 {
    let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            match (p[i] == p[j], q[i] == q[j]) {
                (true, true) => a += 1.0,
                (true, false) => b += 1.0,
                (false, true) => c += 1.0,
                (false, false) => d += 1.0,
            }
        }
    }
    let denom = (a + b) * (b + d) + (a + c) * (c + d);
    if denom == 0.0 {
        // Both all-singletons or both a single block.
        return if relabel(p) == relabel(q) { 1.0 } else { 0.0 };
    }
    2.0 * (a * d - b * c) / denom
}

/// NMI with the arithmetic-mean normalizer, natural log.
pub fn nmi_brute(p: &[usize], q: &[usize]) -> f64 {
    let n = p.len() as f64;
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mp: HashMap<usize, usize> = HashMap::new();
    let mut mq: HashMap<usize, usize> = HashMap::new();
    for (&a, &b) in p.iter().zip(q) {
        *joint.entry((a, b)).or_default() += 1;
        *mp.entry(a).or_default() += 1;
        *mq.entry(b).or_default() += 1;
    }
    let pr = |c: usize| c as f64 / n;
    let mi: f64 = joint
        .iter()
        .map(|(&(a, b), &c)| pr(c) * (pr(c) / (pr(mp[&a]) * pr(mq[&b]))).ln())
        .sum();
    let h = |m: &HashMap<usize, usize>| -m.values().map(|&c| pr(c) * pr(c).ln()).sum::<f64>();
    let (hp, hq) = (h(&mp), h(&mq));
    if hp == 0.0 && hq == 0.0 {
        return 1.0;
    }
    mi / (0.5 * (hp + hq))
}
