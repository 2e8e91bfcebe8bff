//! Reference implementations used as oracles, written from the textbook
//! definitions and sharing no code with the library.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;

use codeanomaly::parser::{NodeKind, SyntaxNode};
use rand::Rng;

pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Local Outlier Factor by full sorting of every distance list.
pub fn lof_reference(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    let n = points.len();
    let mut kdist = vec![0.0; n];
    let mut hoods: Vec<Vec<usize>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut d: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (dist(&points[i], &points[j]), j)).collect();
        d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        kdist[i] = d[k - 1].0;
        hoods.push(d.iter().filter(|e| e.0 <= kdist[i]).map(|e| e.1).collect());
    }
    let lrd: Vec<f64> = (0..n)
        .map(|i| {
            let reach: f64 = hoods[i].iter().map(|&j| dist(&points[i], &points[j]).max(kdist[j])).sum();
            hoods[i].len() as f64 / reach
        })
        .collect();
    (0..n).map(|i| hoods[i].iter().map(|&j| lrd[j]).sum::<f64>() / hoods[i].len() as f64 / lrd[i]).collect()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns the
/// eigenvalues and the eigenvectors as columns of the second matrix.
pub fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

pub fn covariance(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = points.len() as f64;
    let d = points[0].len();
    let mean: Vec<f64> = (0..d).map(|c| points.iter().map(|p| p[c]).sum::<f64>() / n).collect();
    (0..d)
        .map(|r| (0..d).map(|c| points.iter().map(|p| (p[r] - mean[r]) * (p[c] - mean[c])).sum::<f64>() / n).collect())
        .collect()
}

/// Every downward chain of 1..=n nodes, found by walking down from each
/// node.
pub fn tree_chains(tree: &SyntaxNode, n: usize) -> BTreeMap<Vec<String>, u32> {
    fn walk(node: &SyntaxNode, path: &mut Vec<String>, n: usize, out: &mut BTreeMap<Vec<String>, u32>) {
        path.push(node.kind.as_str().to_string());
        *out.entry(path.clone()).or_insert(0) += 1;
        if path.len() < n {
            for c in &node.children {
                walk(c, path, n, out);
            }
        }
        path.pop();
    }
    fn starts(node: &SyntaxNode, n: usize, out: &mut BTreeMap<Vec<String>, u32>) {
        walk(node, &mut Vec::new(), n, out);
        for c in &node.children {
            starts(c, n, out);
        }
    }
    let mut out = BTreeMap::new();
    starts(tree, n, &mut out);
    out
}

/// Every contiguous subsequence of 1..=n items.
pub fn contiguous(seq: &[String], n: usize) -> BTreeMap<Vec<String>, u32> {
    let mut out = BTreeMap::new();
    for len in 1..=n {
        for w in seq.windows(len) {
            *out.entry(w.to_vec()).or_insert(0) += 1;
        }
    }
    out
}

/// A random tree of at most `budget` nodes with kinds drawn from the
/// catalog.
pub fn random_tree<R: Rng>(rng: &mut R, budget: usize) -> SyntaxNode {
    fn grow<R: Rng>(rng: &mut R, budget: &mut usize, depth: usize) -> SyntaxNode {
        *budget -= 1;
        let kind = NodeKind::ALL[rng.gen_range(0..NodeKind::ALL.len())];
        let mut children = Vec::new();
        let width = if depth > 12 { 0 } else { rng.gen_range(0..4) };
        for _ in 0..width {
            if *budget == 0 {
                break;
            }
            children.push(grow(rng, budget, depth + 1));
        }
        SyntaxNode::new(kind, children)
    }
    let mut budget = budget.max(1);
    grow(rng, &mut budget, 0)
}

pub fn random_mnemonics<R: Rng>(rng: &mut R, len: usize, alphabet: usize) -> Vec<String> {
    const OPS: [&str; 8] = ["aload_0", "iload_1", "iadd", "invokevirtual", "getfield", "ireturn", "goto", "dup"];
    (0..len).map(|_| OPS[rng.gen_range(0..alphabet.min(OPS.len()))].to_string()).collect()
}
