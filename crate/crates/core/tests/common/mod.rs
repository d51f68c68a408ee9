#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Straight-line grouping metric: per-category mean and std, per-group
/// concentration/dispersion metrics, then the upper-triangular pair loop.
/// Written without touching the library so it can serve as an oracle.
pub fn straight_line_loss(x: &[Vec<f64>], groups: &[Vec<usize>], tau: f64, eps: f64) -> f64 {
    let n = x.len();
    let mut u = vec![0.0; n];
    let mut delta = vec![0.0; n];
    for i in 0..n {
        let f = x[i].len() as f64;
        let mut s = 0.0;
        for v in &x[i] {
            s += v;
        }
        u[i] = s / f;
        let mut q = 0.0;
        for v in &x[i] {
            q += (v - u[i]) * (v - u[i]);
        }
        delta[i] = (q / f).sqrt();
    }

    let k = groups.len();
    let mut w_mean = vec![0.0; k];
    let mut w_std = vec![0.0; k];
    let mut w_mean_std = vec![0.0; k];
    for j in 0..k {
        let c = &groups[j];
        let size = c.len() as f64;
        let mut uj = 0.0;
        let mut dj = 0.0;
        for &m in c {
            uj += u[m];
            dj += delta[m];
        }
        uj /= size;
        dj /= size;
        if c.len() == 1 {
            w_mean[j] = u[c[0]];
            w_std[j] = delta[c[0]];
        } else {
            w_mean[j] = uj;
            let mut q = 0.0;
            for &m in c {
                q += (delta[m] - dj) * (delta[m] - dj);
            }
            w_std[j] = (q / size).sqrt();
        }
        let mut q = 0.0;
        for &m in c {
            q += (u[m] - uj) * (u[m] - uj);
        }
        w_mean_std[j] = (q / size).sqrt();
    }

    let mut total = 0.0;
    for j in 0..k {
        let mut pair_sum = 0.0;
        for kk in j + 1..k {
            pair_sum += ((w_std[j] - w_std[kk]).powi(2)).exp() + ((w_mean[j] - w_mean[kk]).powi(2)).exp();
        }
        let l_group = if w_mean_std[j] < 1e-12 {
            0.0
        } else {
            w_mean_std[j] / (eps + 1.0 / w_mean_std[j] + pair_sum)
        };
        total += (tau + l_group).ln();
    }
    total
}

/// Random partition of `0..n` into `k` non-empty groups.
pub fn random_partition(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<usize>> {
    assert!(k >= 1 && k <= n);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut groups: Vec<Vec<usize>> = order[..k].iter().map(|&i| vec![i]).collect();
    for &i in &order[k..] {
        groups[rng.random_range(0..k)].push(i);
    }
    groups
}

pub fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("k{i}")).collect()
}

/// Per-class APs (%) of a 1-shot detector on novel split 1, 20 classes.
pub const OURS_1SHOT_APS: [(&str, f64); 20] = [
    ("boat", 9.53),
    ("cat", 33.58),
    ("mbike", 32.28),
    ("sheep", 19.66),
    ("sofa", 5.34),
    ("aero", 71.98),
    ("bicycle", 72.65),
    ("bird", 65.45),
    ("bottle", 41.96),
    ("bus", 75.14),
    ("car", 78.44),
    ("chair", 43.75),
    ("cow", 52.03),
    ("table", 65.04),
    ("dog", 73.27),
    ("horse", 80.29),
    ("person", 68.78),
    ("plant", 43.46),
    ("train", 80.36),
    ("tv", 68.97),
];
