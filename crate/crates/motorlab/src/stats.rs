//! Welch's t-test between model groups and Holm's step-down correction.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Welch {
    pub mean_diff: f64,
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Welch's unequal-variance t-test of `mean(a) - mean(b)`. `None` when either
/// group has fewer than two samples. With zero variance in both groups the
/// statistic is 0 (p = 1) for equal means and infinite (p = 0) otherwise.
pub fn welch(a: &[f64], b: &[f64]) -> Option<Welch> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let diff = ma - mb;
    let se2 = va / na + vb / nb;
    if se2 == 0.0 {
        return Some(if diff == 0.0 {
            Welch { mean_diff: 0.0, t: 0.0, df: na + nb - 2.0, p: 1.0 }
        } else {
            Welch { mean_diff: diff, t: diff.signum() * f64::INFINITY, df: na + nb - 2.0, p: 0.0 }
        });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Some(Welch { mean_diff: diff, t, df, p })
}

/// Holm-adjusted p-values, in input order.
pub fn holm(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p[i].total_cmp(&p[j]).then(i.cmp(&j)));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &i) in order.iter().enumerate() {
        running = running.max(((m - rank) as f64 * p[i]).min(1.0));
        adjusted[i] = running;
    }
    adjusted
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairRow {
    pub a: String,
    pub b: String,
    pub n_a: usize,
    pub n_b: usize,
    /// `None` when either group has fewer than two samples.
    pub test: Option<Welch>,
    pub p_holm: Option<f64>,
}

/// Every unordered pair of groups, in input order, with Holm correction over
/// the computable pairs.
pub fn pairwise(groups: &[(String, Vec<f64>)]) -> Vec<PairRow> {
    let mut rows = Vec::new();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let (a, xa) = &groups[i];
            let (b, xb) = &groups[j];
            rows.push(PairRow { a: a.clone(), b: b.clone(), n_a: xa.len(), n_b: xb.len(), test: welch(xa, xb), p_holm: None });
        }
    }
    let idx: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].test.is_some()).collect();
    let ps: Vec<f64> = idx.iter().map(|&i| rows[i].test.as_ref().unwrap().p).collect();
    for (k, adj) in idx.into_iter().zip(holm(&ps)) {
        rows[k].p_holm = Some(adj);
    }
    rows
}
