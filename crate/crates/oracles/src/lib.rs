//! Reference computations for tests, written without the library under
//! test: plain rejection samplers, Monte Carlo order statistics, a KS
//! statistic and a direct transcription of the recommendation loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(mut x: Vec<f64>, mut y: Vec<f64>) -> f64 {
    x.sort_by(|a, b| a.total_cmp(b));
    y.sort_by(|a, b| a.total_cmp(b));
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// `n` draws of beta(α, β) conditioned on (a, b), by rejection.
pub fn truncated_beta(alpha: f64, beta: f64, a: f64, b: f64, n: usize, seed: u64) -> Vec<f64> {
    let dist = Beta::new(alpha, beta).expect("valid shapes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut tries = 0u64;
    while out.len() < n {
        tries += 1;
        assert!(tries < 200_000_000, "acceptance too low for beta({alpha}, {beta}) on ({a}, {b})");
        let x = dist.sample(&mut rng);
        if x > a && x < b {
            out.push(x);
        }
    }
    out
}

/// Strict order check by comparing every pair of comparable doses.
pub fn ordered(p: &[f64], rows: usize, cols: usize) -> bool {
    for i in 0..rows {
        for j in 0..cols {
            for i2 in i..rows {
                for j2 in j..cols {
                    if (i2, j2) != (i, j) && !(p[i * cols + j] < p[i2 * cols + j2]) {
                        return false;
                    }
                }
            }
        }
    }
    p.iter().all(|&x| x > 0.0 && x < 1.0)
}

/// Per-coordinate means of independent betas conditioned on the partial
/// order, from `n` accepted rejection draws.
pub fn lattice_means(rows: usize, cols: usize, alpha: &[f64], beta: &[f64], n: usize, seed: u64) -> Vec<f64> {
    let dists: Vec<Beta<f64>> = alpha.iter().zip(beta).map(|(&a, &b)| Beta::new(a, b).expect("valid shapes")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![0.0; alpha.len()];
    let mut p = vec![0.0; alpha.len()];
    let mut kept = 0;
    while kept < n {
        for (x, d) in p.iter_mut().zip(&dists) {
            *x = d.sample(&mut rng);
        }
        if ordered(&p, rows, cols) {
            kept += 1;
            for (s, x) in sum.iter_mut().zip(&p) {
                *s += x;
            }
        }
    }
    sum.iter().map(|s| s / n as f64).collect()
}

/// Sample median (midpoint of the two central values for even sizes).
pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Monte Carlo medians of the minimum and maximum of `k` i.i.d.
/// beta(α, β) variables over `sets` replications.
pub fn order_stat_medians(alpha: f64, beta: f64, k: usize, sets: usize, seed: u64) -> (f64, f64) {
    let dist = Beta::new(alpha, beta).expect("valid shapes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mins = Vec::with_capacity(sets);
    let mut maxs = Vec::with_capacity(sets);
    for _ in 0..sets {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..k {
            let x = dist.sample(&mut rng);
            lo = lo.min(x);
            hi = hi.max(x);
        }
        mins.push(lo);
        maxs.push(hi);
    }
    (median(mins), median(maxs))
}

/// Window settings for [`window_trace`].
#[derive(Debug, Clone, Copy)]
pub struct WindowParams {
    pub delta_l: f64,
    pub delta_u: f64,
    pub l0: f64,
    pub u0: f64,
    pub gamma_l: f64,
    pub gamma_u: f64,
    pub eta_u: f64,
}

impl Default for WindowParams {
    fn default() -> Self {
        Self { delta_l: 0.1, delta_u: 0.05, l0: 0.05, u0: 0.0, gamma_l: 0.05, gamma_u: 0.025, eta_u: 0.01 }
    }
}

/// One pass of the widening loop, for step-by-step comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub l: f64,
    pub u: f64,
    pub members: Vec<usize>,
}

/// Transcription of the recommendation loop with running sums; returns the
/// 0-based recommended indices and the trace of windows visited.
pub fn window_trace(medians: &[f64], n: &[u32], theta: f64, w: WindowParams) -> (Vec<usize>, Vec<TraceStep>) {
    let k = medians.len();
    let above = medians.iter().filter(|&&p| p > theta).count() as f64;
    let toxic = above / k as f64 >= 0.5;
    let mut set: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let (mut l, mut u) = (w.l0, w.u0);
    while set.is_empty() && (l <= w.delta_l || u <= w.delta_u) {
        set = (0..k).filter(|&x| -l <= medians[x] - theta && medians[x] - theta <= u).collect();
        trace.push(TraceStep { l, u, members: set.clone() });
        l += if l <= w.delta_l { w.gamma_l } else { 0.0 };
        u += if u <= w.delta_u { if toxic { w.eta_u } else { w.gamma_u } } else { 0.0 };
    }
    let many: Vec<usize> = set.iter().copied().filter(|&x| n[x] > 1).collect();
    if !many.is_empty() {
        return (many, trace);
    }
    (set.into_iter().filter(|&x| n[x] == 1).collect(), trace)
}
