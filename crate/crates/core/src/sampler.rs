//! Truncated-beta draws, the Gibbs sweep over the lattice, posterior and
//! pseudo-posterior shape updates, and chain summaries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::lattice::{default_init, satisfies_partial_order, GridDims, ProbGrid, ShapeGrid};
use crate::scalar::Real;
use crate::special::{BetaCdf, Tail};

/// Chain length settings. Draws after burn-in are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub n_samples: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self { n_samples: 10_000, burn_in: 1_000, seed: 0 }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return domain("n_samples must be at least 1");
        }
        Ok(())
    }
}

/// Patients `n` and DLTs `z` per dose, in raster order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedData {
    pub n: Vec<u32>,
    pub z: Vec<u32>,
}

impl ObservedData {
    pub fn new(n: Vec<u32>, z: Vec<u32>) -> Result<Self> {
        if n.len() != z.len() {
            return domain(format!("n has {} entries, z {}", n.len(), z.len()));
        }
        if let Some(k) = n.iter().zip(&z).position(|(n, z)| z > n) {
            return domain(format!("more DLTs than patients at flat index {}", k + 1));
        }
        Ok(Self { n, z })
    }

    pub fn empty(dims: GridDims) -> Self {
        Self { n: vec![0; dims.len()], z: vec![0; dims.len()] }
    }

    pub fn total_patients(&self) -> u32 {
        self.n.iter().sum()
    }

    pub fn total_dlts(&self) -> u32 {
        self.z.iter().sum()
    }

    /// Adds one patient at storage offset `slot`.
    pub fn record(&mut self, slot: usize, dlt: bool) {
        self.n[slot] += 1;
        self.z[slot] += u32::from(dlt);
    }
}

/// Per-dose posterior medians and variances of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary<T = f64> {
    pub median: ProbGrid<T>,
    pub variance: Vec<T>,
    pub samples_kept: usize,
}

impl<T: Real> ChainSummary<T> {
    pub fn total_variance(&self) -> T {
        self.variance.iter().fold(T::zero(), |acc, &v| acc + v)
    }
}

/// Kept draws of one chain, stored per coordinate, plus their summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior<T = f64> {
    dims: GridDims,
    draws: Vec<T>,
    kept: usize,
    summary: ChainSummary<T>,
}

impl<T: Real> Posterior<T> {
    fn from_draws(dims: GridDims, draws: Vec<T>, kept: usize) -> Self {
        let mut median = Vec::with_capacity(dims.len());
        let mut variance = Vec::with_capacity(dims.len());
        let mut scratch = vec![T::zero(); kept];
        for col in draws.chunks_exact(kept) {
            scratch.copy_from_slice(col);
            median.push(median_in_place(&mut scratch));
            variance.push(sample_variance(col));
        }
        let summary = ChainSummary { median: ProbGrid::new(median), variance, samples_kept: kept };
        Self { dims, draws, kept, summary }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn summary(&self) -> &ChainSummary<T> {
        &self.summary
    }

    pub fn medians(&self) -> &[T] {
        &self.summary.median.values
    }

    pub fn samples_kept(&self) -> usize {
        self.kept
    }

    /// Kept draws of the coordinate at 0-based storage offset `slot`.
    pub fn column(&self, slot: usize) -> &[T] {
        &self.draws[slot * self.kept..(slot + 1) * self.kept]
    }

    /// The `s`-th kept lattice draw.
    pub fn draw(&self, s: usize) -> ProbGrid<T> {
        ProbGrid::new((0..self.dims.len()).map(|k| self.draws[k * self.kept + s]).collect())
    }

    /// Fraction of kept draws with coordinate `k` (1-based) above `threshold`.
    pub fn tail_probability(&self, k: usize, threshold: T) -> Result<T> {
        if k == 0 || k > self.dims.len() {
            return domain(format!("flat index {k} outside [1, {}]", self.dims.len()));
        }
        tail_probability(self.column(k - 1), threshold)
    }

    /// Empirical percentile (linear interpolation between order statistics)
    /// of every coordinate, `q` in [0, 1].
    pub fn percentiles(&self, q: T) -> Vec<T> {
        let mut scratch = vec![T::zero(); self.kept];
        self.draws
            .chunks_exact(self.kept)
            .map(|col| {
                scratch.copy_from_slice(col);
                scratch.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
                let pos = q * T::lit((self.kept - 1) as f64);
                let lo = pos.floor().to_usize().unwrap_or(0).min(self.kept - 1);
                let hi = (lo + 1).min(self.kept - 1);
                let frac = pos - T::lit(lo as f64);
                scratch[lo] + frac * (scratch[hi] - scratch[lo])
            })
            .collect()
    }

    /// Whether every kept draw lies strictly inside the lattice.
    pub fn all_draws_ordered(&self) -> bool {
        (0..self.kept).all(|s| satisfies_partial_order(&self.draw(s), self.dims).unwrap_or(false))
    }
}

fn median_in_place<T: Real>(v: &mut [T]) -> T {
    let n = v.len();
    let cmp = |a: &T, b: &T| a.partial_cmp(b).expect("finite draws");
    let mid = n / 2;
    let (lower, upper, _) = v.select_nth_unstable_by(mid, cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let below = lower.iter().copied().fold(T::neg_infinity(), T::max);
        (below + upper) / T::lit(2.0)
    }
}

fn sample_variance<T: Real>(v: &[T]) -> T {
    let n = T::lit(v.len() as f64);
    let mean = v.iter().fold(T::zero(), |a, &x| a + x) / n;
    if v.len() < 2 {
        return T::zero();
    }
    v.iter().fold(T::zero(), |a, &x| a + (x - mean) * (x - mean)) / (n - T::one())
}

/// Fraction of `samples` strictly above `threshold`.
pub fn tail_probability<T: Real>(samples: &[T], threshold: T) -> Result<T> {
    if samples.is_empty() {
        return domain("tail probability of an empty sample");
    }
    let above = samples.iter().filter(|&&x| x > threshold).count();
    Ok(T::lit(above as f64) / T::lit(samples.len() as f64))
}

/// Largest log-density spread over the interval for which a flat proposal
/// is used; the acceptance rate is at least exp(-spread).
const FLAT_SPREAD: f64 = 0.7;
/// Same bound for the power-law proposal's acceptance factor.
const POWER_SPREAD: f64 = 3.0;
const MAX_ATTEMPTS: usize = 16;

/// Truncation interval with the logs every proposal needs.
#[derive(Debug, Clone, Copy)]
struct Edges<T> {
    lo: T,
    hi: T,
    ln_lo: T,
    ln_hi: T,
    /// ln(1 - lo)
    lnc_lo: T,
    /// ln(1 - hi)
    lnc_hi: T,
}

impl<T: Real> Edges<T> {
    fn new(lo: T, hi: T) -> Self {
        Self { lo, hi, ln_lo: lo.ln(), ln_hi: hi.ln(), lnc_lo: (-lo).ln_1p(), lnc_hi: (-hi).ln_1p() }
    }
}

/// A draw together with `ln x` and `ln(1 - x)`.
#[derive(Debug, Clone, Copy)]
struct Draw<T> {
    x: T,
    ln_x: T,
    lnc_x: T,
}

impl<T: Real> Draw<T> {
    fn at(x: T) -> Self {
        Self { x, ln_x: x.ln(), lnc_x: (-x).ln_1p() }
    }
}

/// `c * ln_y` with the convention `0 * ln(0) = 0`.
#[inline]
fn scaled<T: Real>(c: T, ln_y: T) -> T {
    if c == T::zero() {
        T::zero()
    } else {
        c * ln_y
    }
}

/// Beta(α, β) restricted to a variable interval, set up once per shape pair.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedBeta<T> {
    cdf: BetaCdf<T>,
    /// α − 1 and β − 1.
    am: T,
    bm: T,
    /// Interior stationary point of the log density and whether it is a maximum.
    stationary: Option<(T, bool)>,
}

impl<T: Real> TruncatedBeta<T> {
    pub fn new(alpha: T, beta: T) -> Result<Self> {
        let cdf = BetaCdf::new(alpha, beta)?;
        let one = T::one();
        let (am, bm) = (alpha - one, beta - one);
        let stationary = if am > T::zero() && bm > T::zero() {
            Some((am / (am + bm), true))
        } else if am < T::zero() && bm < T::zero() {
            Some((am / (am + bm), false))
        } else {
            None
        };
        Ok(Self { cdf, am, bm, stationary })
    }

    #[inline]
    fn ln_kernel(&self, ln_x: T, lnc_x: T) -> T {
        scaled(self.am, ln_x) + scaled(self.bm, lnc_x)
    }

    /// Draws from the beta density conditioned on the open interval (lo, hi).
    ///
    /// Exact in distribution. Rejection sampling is used when a cheap
    /// envelope is tight over the interval (a flat proposal, or one of the
    /// two power-law factors of the density drawn by inversion); otherwise
    /// the CDF is inverted in whichever tail keeps relative precision.
    pub fn sample<R: Rng + ?Sized>(&self, lo: T, hi: T, rng: &mut R) -> Result<T> {
        if !(lo < hi) || lo < T::zero() || hi > T::one() {
            return domain(format!("invalid truncation interval ({lo}, {hi})"));
        }
        Ok(self.sample_edges(&Edges::new(lo, hi), rng).x)
    }

    fn sample_edges<R: Rng + ?Sized>(&self, e: &Edges<T>, rng: &mut R) -> Draw<T> {
        let one = T::one();
        let (lo, hi) = (e.lo, e.hi);

        if let Some(top) = self.flat_top(e) {
            for _ in 0..MAX_ATTEMPTS {
                let x = lo + T::unit(rng) * (hi - lo);
                if !(x > lo && x < hi) {
                    continue;
                }
                let d = Draw::at(x);
                let u = one - T::unit(rng);
                if u.ln() <= self.ln_kernel(d.ln_x, d.lnc_x) - top {
                    return d;
                }
            }
        }

        let spread_a = scaled(self.am.abs(), e.ln_hi - e.ln_lo);
        let spread_b = scaled(self.bm.abs(), e.lnc_lo - e.lnc_hi);
        let limit = T::lit(POWER_SPREAD);
        if spread_b <= spread_a && spread_b <= limit {
            // x^(α-1) by inversion, accept with (1-x)^(β-1)
            let alpha = self.cdf.alpha();
            let ln_top = if self.bm > T::zero() { scaled(self.bm, e.lnc_lo) } else { scaled(self.bm, e.lnc_hi) };
            let r = (alpha * (e.ln_lo - e.ln_hi)).exp();
            for _ in 0..MAX_ATTEMPTS {
                let ln_x = e.ln_hi + (r + T::unit(rng) * (one - r)).ln() / alpha;
                let x = ln_x.exp();
                if !(x > lo && x < hi) {
                    continue;
                }
                let lnc_x = (-x).ln_1p();
                let u = one - T::unit(rng);
                if u.ln() <= scaled(self.bm, lnc_x) - ln_top {
                    return Draw { x, ln_x, lnc_x };
                }
            }
        } else if spread_a < spread_b && spread_a <= limit {
            // (1-x)^(β-1) by inversion, accept with x^(α-1)
            let beta = self.cdf.beta();
            let ln_top = if self.am > T::zero() { scaled(self.am, e.ln_hi) } else { scaled(self.am, e.ln_lo) };
            let r = (beta * (e.lnc_hi - e.lnc_lo)).exp();
            for _ in 0..MAX_ATTEMPTS {
                let lnc_x = e.lnc_lo + (r + T::unit(rng) * (one - r)).ln() / beta;
                let x = -lnc_x.exp_m1();
                if !(x > lo && x < hi) {
                    continue;
                }
                let ln_x = x.ln();
                let u = one - T::unit(rng);
                if u.ln() <= scaled(self.am, ln_x) - ln_top {
                    return Draw { x, ln_x, lnc_x };
                }
            }
        }

        let x = self.invert(lo, hi, rng);
        Draw::at(x)
    }

    /// Inverse-CDF draw on (lo, hi).
    fn invert<R: Rng + ?Sized>(&self, lo: T, hi: T, rng: &mut R) -> T {
        let (fa, sa) = self.cdf.cdf_sf(lo);
        let (fb, sb) = self.cdf.cdf_sf(hi);
        let u = T::unit(rng);
        let (x, mass) = if sa < fb {
            let mass = sa - sb;
            (self.cdf.solve(Tail::Upper, sa - u * mass, lo, hi), mass)
        } else {
            let mass = fb - fa;
            (self.cdf.solve(Tail::Lower, fa + u * mass, lo, hi), mass)
        };
        if mass > T::zero() && x > lo && x < hi {
            return x;
        }
        self.underflow_fallback(lo, hi, rng)
    }

    /// Maximum of the log kernel on [lo, hi] if its spread there is small.
    fn flat_top(&self, e: &Edges<T>) -> Option<T> {
        let ga = self.ln_kernel(e.ln_lo, e.lnc_lo);
        let gb = self.ln_kernel(e.ln_hi, e.lnc_hi);
        let (mut top, mut bottom) = (ga.max(gb), ga.min(gb));
        if let Some((x, is_max)) = self.stationary {
            if x > e.lo && x < e.hi {
                let g = self.ln_kernel(x.ln(), (-x).ln_1p());
                if is_max {
                    top = top.max(g);
                } else {
                    bottom = bottom.min(g);
                }
            }
        }
        let spread = top - bottom;
        (spread.is_finite() && spread <= T::lit(FLAT_SPREAD)).then_some(top)
    }

    /// Deep-tail truncation where the interval's probability underflows:
    /// one flat proposal checked against the density, else the midpoint.
    fn underflow_fallback<R: Rng + ?Sized>(&self, lo: T, hi: T, rng: &mut R) -> T {
        let mid = lo + (hi - lo) / T::lit(2.0);
        let g = |x: T| self.cdf.ln_kernel(x);
        let top = g(lo).max(g(hi)).max(g(mid));
        let x = lo + T::unit(rng) * (hi - lo);
        if top.is_finite() && x > lo && x < hi {
            let u = T::one() - T::unit(rng);
            if u.ln() <= g(x) - top {
                return x;
            }
        }
        mid
    }
}

/// One draw from beta(α, β) truncated to (a, b).
pub fn sample_truncated_beta<T: Real, R: Rng + ?Sized>(alpha: T, beta: T, a: T, b: T, rng: &mut R) -> Result<T> {
    if !(a < b) {
        return domain(format!("truncation requires a < b, got ({a}, {b})"));
    }
    TruncatedBeta::new(alpha, beta)?.sample(a, b, rng)
}

/// Full-conditional samplers for every dose of a lattice-restricted beta.
#[derive(Debug, Clone)]
pub struct LatticeKernel<T> {
    dims: GridDims,
    coords: Vec<TruncatedBeta<T>>,
}

/// Chain position with `ln p` and `ln(1 - p)` cached per coordinate.
struct ChainState<T> {
    p: Vec<T>,
    ln_p: Vec<T>,
    lnc_p: Vec<T>,
}

impl<T: Real> ChainState<T> {
    fn new(p: Vec<T>) -> Self {
        let ln_p = p.iter().map(|x| x.ln()).collect();
        let lnc_p = p.iter().map(|x| (-*x).ln_1p()).collect();
        Self { p, ln_p, lnc_p }
    }
}

impl<T: Real> LatticeKernel<T> {
    pub fn new(shapes: &ShapeGrid<T>, dims: GridDims) -> Result<Self> {
        shapes.validate()?;
        shapes.check_dims(dims)?;
        let coords = shapes
            .alpha
            .iter()
            .zip(&shapes.beta)
            .map(|(&a, &b)| TruncatedBeta::new(a, b))
            .collect::<Result<_>>()?;
        Ok(Self { dims, coords })
    }

    /// Redraws every coordinate in raster order from its truncated-beta
    /// full conditional. `p` must already be in the lattice.
    pub fn sweep<R: Rng + ?Sized>(&self, p: &mut [T], rng: &mut R) {
        let mut state = ChainState::new(p.to_vec());
        self.sweep_state(&mut state, rng);
        p.copy_from_slice(&state.p);
    }

    fn sweep_state<R: Rng + ?Sized>(&self, s: &mut ChainState<T>, rng: &mut R) {
        let dims = self.dims;
        let (rows, cols) = (dims.rows(), dims.cols());
        let (zero, one) = (T::zero(), T::one());
        for i in 1..=rows {
            for j in 1..=cols {
                let slot = dims.offset(i, j);
                let mut e = Edges {
                    lo: zero,
                    hi: one,
                    ln_lo: T::neg_infinity(),
                    ln_hi: zero,
                    lnc_lo: zero,
                    lnc_hi: T::neg_infinity(),
                };
                let mut lower = |n: usize| {
                    if s.p[n] > e.lo {
                        e.lo = s.p[n];
                        e.ln_lo = s.ln_p[n];
                        e.lnc_lo = s.lnc_p[n];
                    }
                };
                if i > 1 {
                    lower(slot - cols);
                }
                if j > 1 {
                    lower(slot - 1);
                }
                let mut upper = |n: usize| {
                    if s.p[n] < e.hi {
                        e.hi = s.p[n];
                        e.ln_hi = s.ln_p[n];
                        e.lnc_hi = s.lnc_p[n];
                    }
                };
                if i < rows {
                    upper(slot + cols);
                }
                if j < cols {
                    upper(slot + 1);
                }
                let d = self.coords[slot].sample_edges(&e, rng);
                if d.x > e.lo && d.x < e.hi {
                    s.p[slot] = d.x;
                    s.ln_p[slot] = d.ln_x;
                    s.lnc_p[slot] = d.lnc_x;
                }
            }
        }
    }
}

/// One Gibbs sweep starting from `p`.
pub fn gibbs_sweep<T: Real, R: Rng + ?Sized>(
    p: &ProbGrid<T>,
    shapes: &ShapeGrid<T>,
    dims: GridDims,
    rng: &mut R,
) -> Result<ProbGrid<T>> {
    if !satisfies_partial_order(p, dims)? {
        return domain("sweep start point is not in the lattice");
    }
    let kernel = LatticeKernel::new(shapes, dims)?;
    let mut next = p.clone();
    kernel.sweep(&mut next.values, rng);
    Ok(next)
}

/// Runs `burn_in + n_samples` sweeps seeded from `cfg.seed`.
pub fn run_chain<T: Real>(
    shapes: &ShapeGrid<T>,
    dims: GridDims,
    cfg: &GibbsConfig,
    init: Option<&ProbGrid<T>>,
) -> Result<Posterior<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    run_chain_with(shapes, dims, cfg, init, &mut rng)
}

/// As [`run_chain`] but drawing from a caller-supplied generator
/// (`cfg.seed` is ignored).
pub fn run_chain_with<T: Real, R: Rng + ?Sized>(
    shapes: &ShapeGrid<T>,
    dims: GridDims,
    cfg: &GibbsConfig,
    init: Option<&ProbGrid<T>>,
    rng: &mut R,
) -> Result<Posterior<T>> {
    cfg.validate()?;
    let kernel = LatticeKernel::new(shapes, dims)?;
    let start = match init {
        Some(p) => {
            if !satisfies_partial_order(p, dims)? {
                return domain("chain initial point is not in the lattice");
            }
            p.values.clone()
        }
        None => default_init(dims).values,
    };
    let mut state = ChainState::new(start);
    for _ in 0..cfg.burn_in {
        kernel.sweep_state(&mut state, rng);
    }
    let kept = cfg.n_samples;
    let mut draws = vec![T::zero(); dims.len() * kept];
    for s in 0..kept {
        kernel.sweep_state(&mut state, rng);
        for (k, &x) in state.p.iter().enumerate() {
            draws[k * kept + s] = x;
        }
    }
    Ok(Posterior::from_draws(dims, draws, kept))
}

/// Likelihood weight ω = 1 + ρ·Σ(α + β)/Σn.
pub fn compute_omega<T: Real>(shapes: &ShapeGrid<T>, data: &ObservedData, rho: T) -> Result<T> {
    if !(rho >= T::zero() && rho.is_finite()) {
        return domain(format!("rho must be non-negative and finite, got {rho}"));
    }
    let total_n = data.total_patients();
    if total_n == 0 {
        return domain("omega is undefined before any patient is observed");
    }
    Ok(T::one() + rho * shapes.total_ess() / T::lit(f64::from(total_n)))
}

/// Shapes `α + ω·z` and `β + ω·(n − z)`; ω = 1 gives the ordinary posterior.
pub fn pseudo_posterior_shapes<T: Real>(prior: &ShapeGrid<T>, data: &ObservedData, omega: T) -> Result<ShapeGrid<T>> {
    if data.n.len() != prior.len() {
        return domain(format!("data covers {} doses, prior {}", data.n.len(), prior.len()));
    }
    if !(omega >= T::one() && omega.is_finite()) {
        return domain(format!("omega must be finite and at least 1, got {omega}"));
    }
    let alpha = prior.alpha.iter().zip(&data.z).map(|(&a, &z)| a + omega * T::lit(f64::from(z))).collect();
    let beta = prior
        .beta
        .iter()
        .zip(data.n.iter().zip(&data.z))
        .map(|(&b, (&n, &z))| b + omega * T::lit(f64::from(n - z)))
        .collect();
    ShapeGrid::new(alpha, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::is_monotone;
    use proptest::prelude::*;

    fn dims(r: usize, c: usize) -> GridDims {
        GridDims::new(r, c).unwrap()
    }

    #[test]
    fn truncated_draws_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(a, b, lo, hi) in &[
            (1.0, 1.0, 0.2, 0.8),
            (0.2, 13.77, 0.0, 1e-6),
            (40.0, 3.0, 0.0, 0.05),
            (0.4, 2.23, 0.999, 1.0),
            (4.52, 0.74, 0.3, 0.300_000_001),
        ] {
            for _ in 0..2_000 {
                let x = sample_truncated_beta(a, b, lo, hi, &mut rng).unwrap();
                assert!(x > lo && x < hi, "{x} not in ({lo}, {hi}) for beta({a},{b})");
            }
        }
    }

    #[test]
    fn uniform_truncation_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 40_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_truncated_beta(1.0, 1.0, 0.2, 0.8, &mut rng).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005);
        let below = xs.iter().filter(|&&x| x < 0.35).count() as f64 / n as f64;
        assert!((below - 0.25).abs() < 0.01);
    }

    #[test]
    fn bad_interval_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(sample_truncated_beta(1.0, 1.0, 0.5, 0.5, &mut rng).is_err());
        assert!(sample_truncated_beta(1.0, 1.0, 0.6, 0.5, &mut rng).is_err());
        assert!(sample_truncated_beta(0.0, 1.0, 0.1, 0.5, &mut rng).is_err());
    }

    #[test]
    fn unit_lattice_sweep_is_plain_beta() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = dims(1, 1);
        let shapes = ShapeGrid::uniform(d, 2.0, 6.0).unwrap();
        let mut p = ProbGrid::new(vec![0.5]);
        let mut acc = 0.0;
        let n = 20_000;
        for _ in 0..n {
            p = gibbs_sweep(&p, &shapes, d, &mut rng).unwrap();
            acc += p.values[0];
        }
        assert!((acc / n as f64 - 0.25).abs() < 0.005);
    }

    #[test]
    fn sweep_rejects_infeasible_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = dims(2, 2);
        let shapes = ShapeGrid::uniform(d, 1.0, 1.0).unwrap();
        let bad = ProbGrid::new(vec![0.5, 0.4, 0.6, 0.7]);
        assert!(gibbs_sweep(&bad, &shapes, d, &mut rng).is_err());
    }

    #[test]
    fn chain_symmetric_median_and_tails() {
        let d = dims(1, 1);
        let cfg = GibbsConfig { n_samples: 10_000, burn_in: 100, seed: 9 };
        let post = run_chain(&ShapeGrid::<f64>::uniform(d, 2.0, 2.0).unwrap(), d, &cfg, None).unwrap();
        assert!((post.medians()[0] - 0.5).abs() < 0.01);
        assert_eq!(post.tail_probability(1, 0.0).unwrap(), 1.0);
        assert_eq!(post.tail_probability(1, 1.0).unwrap(), 0.0);
        let flat = run_chain(&ShapeGrid::<f64>::uniform(d, 1.0, 1.0).unwrap(), d, &cfg, None).unwrap();
        assert!((flat.tail_probability(1, 0.5).unwrap() - 0.5).abs() < 0.01);
        assert!(flat.tail_probability(2, 0.5).is_err());
        assert!(tail_probability::<f64>(&[], 0.5).is_err());
    }

    #[test]
    fn chain_is_deterministic_per_seed() {
        let d = dims(3, 3);
        let shapes = ShapeGrid::uniform(d, 0.7, 2.0).unwrap();
        let cfg = GibbsConfig { n_samples: 500, burn_in: 50, seed: 11 };
        let a = run_chain(&shapes, d, &cfg, None).unwrap();
        let b = run_chain(&shapes, d, &cfg, None).unwrap();
        assert_eq!(a, b);
        let c = run_chain(&shapes, d, &GibbsConfig { seed: 12, ..cfg }, None).unwrap();
        assert_ne!(a.summary(), c.summary());
    }

    #[test]
    fn chain_draws_ordered_and_medians_monotone() {
        let d = dims(3, 4);
        let shapes = ShapeGrid::new(
            (0..12).map(|k| 0.3 + k as f64 * 0.2).collect(),
            (0..12).map(|k| 5.0 - k as f64 * 0.3).collect(),
        )
        .unwrap();
        let cfg = GibbsConfig { n_samples: 2_000, burn_in: 100, seed: 3 };
        let post = run_chain(&shapes, d, &cfg, None).unwrap();
        assert!(post.all_draws_ordered());
        assert!(is_monotone(&post.summary().median, d, 1e-6).unwrap());
        assert!(post.summary().variance.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn single_precision_chain() {
        let d = dims(2, 3);
        let shapes = ShapeGrid::<f32>::uniform(d, 0.5, 3.0).unwrap();
        let cfg = GibbsConfig { n_samples: 1_000, burn_in: 50, seed: 1 };
        let post = run_chain(&shapes, d, &cfg, None).unwrap();
        assert!(post.all_draws_ordered());
    }

    #[test]
    fn chain_rejects_infeasible_init_and_empty_config() {
        let d = dims(2, 2);
        let shapes = ShapeGrid::uniform(d, 1.0, 1.0).unwrap();
        let bad = ProbGrid::new(vec![0.5, 0.5, 0.5, 0.5]);
        let cfg = GibbsConfig { n_samples: 10, burn_in: 0, seed: 0 };
        assert!(run_chain(&shapes, d, &cfg, Some(&bad)).is_err());
        assert!(run_chain(&shapes, d, &GibbsConfig { n_samples: 0, ..cfg }, None).is_err());
    }

    #[test]
    fn percentiles_bracket_median() {
        let d = dims(2, 2);
        let cfg = GibbsConfig { n_samples: 1_001, burn_in: 10, seed: 2 };
        let post = run_chain(&ShapeGrid::<f64>::uniform(d, 1.0, 1.0).unwrap(), d, &cfg, None).unwrap();
        let lo = post.percentiles(0.025);
        let mid = post.percentiles(0.5);
        let hi = post.percentiles(0.975);
        for k in 0..4 {
            assert!(lo[k] <= mid[k] && mid[k] <= hi[k]);
            assert!((mid[k] - post.medians()[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn omega_examples() {
        let shapes = ShapeGrid::new(vec![10.0, 5.0], vec![4.0, 1.0]).unwrap();
        let data = ObservedData::new(vec![6, 4], vec![1, 0]).unwrap();
        assert_eq!(compute_omega(&shapes, &data, 2.0).unwrap(), 5.0);
        assert_eq!(compute_omega(&shapes, &data, 0.0).unwrap(), 1.0);
        let empty = ObservedData::new(vec![0, 0], vec![0, 0]).unwrap();
        assert!(compute_omega(&shapes, &empty, 2.0).is_err());
        assert!(compute_omega(&shapes, &data, -1.0).is_err());
    }

    #[test]
    fn pseudo_posterior_examples() {
        let prior = ShapeGrid::new(vec![1.0, 0.4], vec![1.0, 2.23]).unwrap();
        let none = ObservedData::new(vec![0, 0], vec![0, 0]).unwrap();
        assert_eq!(pseudo_posterior_shapes(&prior, &none, 7.5).unwrap(), prior);
        let data = ObservedData::new(vec![4, 0], vec![1, 0]).unwrap();
        let post = pseudo_posterior_shapes(&prior, &data, 1.0).unwrap();
        assert_eq!((post.alpha[0], post.beta[0]), (2.0, 4.0));
        let post = pseudo_posterior_shapes(&prior, &data, 3.0).unwrap();
        assert_eq!((post.alpha[0], post.beta[0]), (4.0, 10.0));
        assert!(pseudo_posterior_shapes(&prior, &data, 0.5).is_err());
    }

    #[test]
    fn observed_data_validation() {
        assert!(ObservedData::new(vec![1, 2], vec![2, 0]).is_err());
        assert!(ObservedData::new(vec![1], vec![0, 0]).is_err());
    }

    proptest! {
        #[test]
        fn conjugate_updates_compose(
            n1 in proptest::collection::vec(0u32..6, 4),
            n2 in proptest::collection::vec(0u32..6, 4),
            f1 in proptest::collection::vec(0u32..6, 4),
            f2 in proptest::collection::vec(0u32..6, 4),
        ) {
            let z1: Vec<u32> = n1.iter().zip(&f1).map(|(n, f)| f % (n + 1)).collect();
            let z2: Vec<u32> = n2.iter().zip(&f2).map(|(n, f)| f % (n + 1)).collect();
            let prior = ShapeGrid::new(vec![0.5, 1.0, 2.0, 0.3], vec![1.5, 1.0, 0.7, 4.0]).unwrap();
            let d1 = ObservedData::new(n1.clone(), z1.clone()).unwrap();
            let d2 = ObservedData::new(n2.clone(), z2.clone()).unwrap();
            let pooled = ObservedData::new(
                n1.iter().zip(&n2).map(|(a, b)| a + b).collect(),
                z1.iter().zip(&z2).map(|(a, b)| a + b).collect(),
            ).unwrap();
            let twice = pseudo_posterior_shapes(&pseudo_posterior_shapes(&prior, &d1, 1.0).unwrap(), &d2, 1.0).unwrap();
            let once = pseudo_posterior_shapes(&prior, &pooled, 1.0).unwrap();
            prop_assert_eq!(twice, once);
        }

        #[test]
        fn sweeps_preserve_the_lattice(r in 1usize..=4, c in 1usize..=4, seed in 0u64..1_000, a in 0.1f64..8.0, b in 0.1f64..20.0) {
            let d = dims(r, c);
            let shapes = ShapeGrid::uniform(d, a, b).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = default_init(d);
            for _ in 0..20 {
                p = gibbs_sweep(&p, &shapes, d, &mut rng).unwrap();
                prop_assert!(satisfies_partial_order(&p, d).unwrap());
            }
        }
    }
}
