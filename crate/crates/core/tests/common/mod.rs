//! Dense brute-force reimplementation of every method, shared by the integration tests.
#![allow(dead_code)]

use hdperm::{ClassicStatistic, Dataset, Method, TransformKind};
use nalgebra::{DMatrix, DVector};

/// Every permutation of `0..n`, identity first.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut all = insertions(n);
    let id = all
        .iter()
        .position(|p| p.iter().enumerate().all(|(i, &v)| i == v))
        .unwrap();
    all.swap(0, id);
    all
}

fn insertions(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in insertions(n - 1) {
        for pos in 0..n {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

pub fn all_sign_vectors(n: usize) -> Vec<Vec<f64>> {
    (0..1u32 << n)
        .map(|code| (0..n).map(|i| if code >> i & 1 == 1 { -1.0 } else { 1.0 }).collect())
        .collect()
}

pub fn group_matrices(n: usize, kind: TransformKind) -> Vec<DMatrix<f64>> {
    match kind {
        TransformKind::Permutation => all_permutations(n)
            .into_iter()
            .map(|p| {
                let mut m = DMatrix::zeros(n, n);
                for (i, &j) in p.iter().enumerate() {
                    m[(i, j)] = 1.0;
                }
                m
            })
            .collect(),
        TransformKind::SignFlip => all_sign_vectors(n)
            .into_iter()
            .map(|s| DMatrix::from_diagonal(&DVector::from_vec(s)))
            .collect(),
    }
}

pub fn hat(z: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let q = z.ncols();
    z * (z.transpose() * z + DMatrix::identity(q, q) * lambda)
        .try_inverse()
        .unwrap()
        * z.transpose()
}

pub fn pearson(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let n = u.len() as f64;
    let (mu, mv) = (u.sum() / n, v.sum() / n);
    let uc = u.map(|a| a - mu);
    let vc = v.map(|a| a - mv);
    uc.dot(&vc) / (uc.norm() * vc.norm())
}

pub fn p_two_sided(t: &[f64]) -> f64 {
    let above = t.iter().filter(|&&x| x >= t[0]).count();
    let below = t.iter().filter(|&&x| x <= t[0]).count();
    (2.0 * above.min(below) as f64 / t.len() as f64).min(1.0)
}

pub fn p_one_sided(t: &[f64]) -> f64 {
    t.iter().filter(|&&x| x >= t[0]).count() as f64 / t.len() as f64
}

/// Statistics of `method` under every group element, identity first, plus the p-value.
pub fn oracle(data: &Dataset, method: Method, kind: TransformKind, lambda: f64, lambda_x: f64) -> (Vec<f64>, f64) {
    let n = data.n();
    let (y, z) = (data.y().clone(), data.z().clone());
    let x = data.x().column(0).into_owned();
    let eye = DMatrix::<f64>::identity(n, n);
    let (h, hx) = match method {
        Method::FreedmanLane(_) | Method::Kennedy => (hat(&z, 0.0), hat(&z, 0.0)),
        _ => (hat(&z, lambda), hat(&z, lambda_x)),
    };
    let r = &eye - &h;
    let rx = &eye - &hx;
    let stats: Vec<f64> = group_matrices(n, kind)
        .iter()
        .map(|p| match method {
            Method::FreedmanLane(ClassicStatistic::Partial) => pearson(&(&r * (p * (&r * &y) + &h * &y)), &(&r * &x)),
            Method::FreedmanLane(ClassicStatistic::SemiPartial) => pearson(&(&r * (p * (&r * &y) + &h * &y)), &x),
            Method::Kennedy => pearson(&(p * (&r * &y)), &(&r * &x)),
            Method::FlhdPartial => pearson(&(&r * (p * (&r * &y) + &h * &y)), &(&rx * &x)),
            Method::FlhdSemiPartial => pearson(&(&r * (p * (&r * &y) + &h * &y)), &x),
            Method::DoubleResidualization => pearson(&(p * (&r * &y) + &h * &y), &(&rx * &x)),
            Method::FlhdNpc(_) => {
                let v = &r * (p * (&r * &y) + &h * &y);
                (0..data.d())
                    .map(|l| pearson(&v, &data.x().column(l).into_owned()).abs())
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect();
    let p = match method {
        Method::FlhdNpc(_) => p_one_sided(&stats),
        _ => p_two_sided(&stats),
    };
    (stats, p)
}
