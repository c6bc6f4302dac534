//! Prior hyperparameter selection.
//!
//! Shapes come from a structured family: the minimum and maximum doses get
//! their own (α, β), every interior dose shares one pair. A grid over the
//! family is searched for priors whose chain medians at the two corner
//! doses hit clinician targets, keeping the one with the largest total
//! prior variance. The range of the first/last effective sample sizes comes
//! from an i.i.d. order-statistic heuristic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::lattice::{DoseIndex, GridDims, ShapeGrid};
use crate::sampler::{run_chain, GibbsConfig};
use crate::scalar::Real;
use crate::special::BetaCdf;

/// One member of the structured family:
/// `α = [m(1−t), l, …, l, M·s]`, `β = [m·t, u, …, u, M(1−s)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeTemplate<T = f64> {
    pub m: T,
    #[serde(rename = "M")]
    pub big_m: T,
    pub t: T,
    pub s: T,
    pub l: T,
    pub u: T,
}

impl<T: Real> ShapeTemplate<T> {
    /// Template with `u = min(m, M)/2 − l`.
    pub fn reduced(m: T, big_m: T, t: T, s: T, l: T) -> Self {
        let u = m.min(big_m) / T::lit(2.0) - l;
        Self { m, big_m, t, s, l, u }
    }

    pub fn validate(&self) -> Result<()> {
        let (zero, one) = (T::zero(), T::one());
        let positive = [self.m, self.big_m, self.l, self.u].iter().all(|&x| x > zero && x.is_finite());
        if !positive {
            return domain(format!("template sizes must be positive: {self:?}"));
        }
        if !(self.t > zero && self.t < one && self.s > zero && self.s < one) {
            return domain(format!("t and s must lie in (0, 1): {self:?}"));
        }
        let cap = self.m.min(self.big_m);
        if self.l + self.u > cap * (one + T::lit(1e-12)) {
            return domain(format!("l + u exceeds min(m, M): {self:?}"));
        }
        Ok(())
    }
}

/// Expands a template onto a lattice.
pub fn build_shape_vectors<T: Real>(tpl: &ShapeTemplate<T>, dims: GridDims) -> Result<ShapeGrid<T>> {
    let k = dims.len();
    if k < 2 {
        return domain("the template needs distinct first and last doses (K >= 2)");
    }
    tpl.validate()?;
    let one = T::one();
    let mut alpha = vec![tpl.l; k];
    let mut beta = vec![tpl.u; k];
    alpha[0] = tpl.m * (one - tpl.t);
    beta[0] = tpl.m * tpl.t;
    alpha[k - 1] = tpl.big_m * tpl.s;
    beta[k - 1] = tpl.big_m * (one - tpl.s);
    ShapeGrid::new(alpha, beta)
}

/// `(α₀, β₀)` such that among `k` i.i.d. beta(α₀, β₀) variables the
/// minimum has median `target_min` and the maximum has median `target_max`.
pub fn solve_order_stat_shapes<T: Real>(target_min: T, target_max: T, k: usize) -> Result<(T, T)> {
    let (zero, one, two) = (T::zero(), T::one(), T::lit(2.0));
    if !(zero < target_min && target_min < target_max && target_max < one) {
        return domain(format!("need 0 < target_min < target_max < 1, got {target_min}, {target_max}"));
    }
    if k < 2 {
        return domain("order statistics need K >= 2");
    }
    // P(min <= x) = 1 - (1 - F)^K and P(max <= x) = F^K
    let upper_level = two.powf(-one / T::lit(k as f64));
    let lower_level = one - upper_level;

    // For fixed α, F(target_min; α, β) increases in β: solve for β.
    let beta_for = |a: T| -> Option<T> {
        let f = |ln_b: T| BetaCdf::new(a, ln_b.exp()).map(|d| d.cdf(target_min) - lower_level).ok();
        bisect(f, T::lit(-12.0), T::lit(14.0)).map(|x| x.exp())
    };
    let gap = |ln_a: T| -> Option<T> {
        let a = ln_a.exp();
        let b = beta_for(a)?;
        BetaCdf::new(a, b).ok().map(|d| d.cdf(target_max) - upper_level)
    };

    let (lo, hi) = (T::lit(-9.0), T::lit(9.0));
    let steps = 180;
    let mut prev: Option<(T, T)> = None;
    for n in 0..=steps {
        let x = lo + (hi - lo) * T::lit(n as f64 / steps as f64);
        let Some(g) = gap(x) else {
            prev = None;
            continue;
        };
        if let Some((px, pg)) = prev {
            if pg == zero {
                return finish(px, beta_for);
            }
            if (pg < zero) != (g < zero) {
                let root = bisect(&gap, px, x).ok_or_else(|| Error::Config("order-statistic solve lost its bracket".into()))?;
                return finish(root, beta_for);
            }
        }
        prev = Some((x, g));
    }
    Err(Error::Config(format!(
        "no (alpha0, beta0) in [e^-9, e^9] matches order-statistic medians {target_min}/{target_max} for K = {k}"
    )))
}

fn finish<T: Real>(ln_a: T, beta_for: impl Fn(T) -> Option<T>) -> Result<(T, T)> {
    let a = ln_a.exp();
    let b = beta_for(a).ok_or_else(|| Error::Config("order-statistic solve failed at the root".into()))?;
    Ok((a, b))
}

/// Root of a function with a sign change on [lo, hi].
fn bisect<T: Real>(f: impl Fn(T) -> Option<T>, mut lo: T, mut hi: T) -> Option<T> {
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == T::zero() {
        return Some(lo);
    }
    if fhi == T::zero() {
        return Some(hi);
    }
    if (flo < T::zero()) == (fhi < T::zero()) {
        return None;
    }
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm == T::zero() {
            return Some(mid);
        }
        if (fm < T::zero()) == (flo < T::zero()) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some((lo + hi) / T::lit(2.0))
}

/// Strict upper bound on one dose's prior median.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedianBound<T = f64> {
    pub dose: DoseIndex,
    pub below: T,
}

/// What the prior medians must satisfy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorCriteria<T = f64> {
    pub target_min: T,
    pub target_max: T,
    pub tolerance: T,
    #[serde(default)]
    pub extra_upper_bounds: Vec<MedianBound<T>>,
}

impl<T: Real> PriorCriteria<T> {
    pub fn new(target_min: T, target_max: T, tolerance: T) -> Self {
        Self { target_min, target_max, tolerance, extra_upper_bounds: Vec::new() }
    }

    pub fn validate(&self, dims: GridDims) -> Result<()> {
        let (zero, one) = (T::zero(), T::one());
        if !(zero < self.target_min && self.target_min < self.target_max && self.target_max < one) {
            return Err(Error::Config(format!(
                "targets must satisfy 0 < min < max < 1, got {} and {}",
                self.target_min, self.target_max
            )));
        }
        if !(self.tolerance >= zero) {
            return Err(Error::Config(format!("tolerance must be non-negative, got {}", self.tolerance)));
        }
        if let Some(b) = self.extra_upper_bounds.iter().find(|b| !dims.contains(b.dose)) {
            return Err(Error::Config(format!("bound on dose {} outside {dims}", b.dose)));
        }
        Ok(())
    }

    /// Worst violation of the criteria; feasible iff strictly negative.
    pub fn violation(&self, medians: &[T], dims: GridDims) -> T {
        let last = medians.len() - 1;
        let mut worst = ((medians[0] - self.target_min).abs() - self.tolerance)
            .max((medians[last] - self.target_max).abs() - self.tolerance);
        for b in &self.extra_upper_bounds {
            if let Ok(slot) = dims.slot(b.dose) {
                worst = worst.max(medians[slot] - b.below);
            }
        }
        worst
    }

    pub fn is_satisfied(&self, medians: &[T], dims: GridDims) -> bool {
        self.violation(medians, dims) < T::zero()
    }
}

/// Grid sizes and chain settings for [`grid_search`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchConfig<T = f64> {
    pub n_m: usize,
    pub n_t: usize,
    pub n_l: usize,
    pub t_range: (T, T),
    pub s_range: (T, T),
    /// `l` ranges over this interval times `min(m, M)`.
    pub l_range_factor: (T, T),
    /// Overrides the order-statistic range `[min(α₀, β₀), α₀ + β₀]` for m and M.
    #[serde(default)]
    pub m_range: Option<(T, T)>,
    /// Per-candidate chain; every candidate uses the same seed.
    pub gibbs: GibbsConfig,
    /// Confirmation chain for the winner, rerun with `confirm_seeds` seeds.
    pub confirm: GibbsConfig,
    pub confirm_seeds: u64,
}

impl<T: Real> Default for GridSearchConfig<T> {
    fn default() -> Self {
        Self {
            n_m: 15,
            n_t: 10,
            n_l: 3,
            t_range: (T::lit(0.2), T::lit(0.5)),
            s_range: (T::lit(0.2), T::lit(0.5)),
            l_range_factor: (T::lit(0.2), T::lit(0.4)),
            m_range: None,
            gibbs: GibbsConfig { n_samples: 5_000, burn_in: 500, seed: 0 },
            confirm: GibbsConfig { n_samples: 10_000, burn_in: 1_000, seed: 1 },
            confirm_seeds: 3,
        }
    }
}

impl<T: Real> GridSearchConfig<T> {
    /// Default grid sizes over wider t, s and l ranges. The default ranges
    /// can miss low corner targets entirely (a 4×4 lattice with targets
    /// 0.04/0.34 has no feasible candidate there: the top corner median
    /// stays above 0.5).
    pub fn wide() -> Self {
        Self {
            t_range: (T::lit(0.02), T::lit(0.5)),
            s_range: (T::lit(0.005), T::lit(0.25)),
            l_range_factor: (T::lit(0.05), T::lit(0.4)),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_m == 0 || self.n_t == 0 || self.n_l == 0 {
            return Err(Error::Config("grid counts must be at least 1".into()));
        }
        let (zero, one) = (T::zero(), T::one());
        for (name, (a, b)) in [("t_range", self.t_range), ("s_range", self.s_range)] {
            if !(zero < a && a <= b && b < one) {
                return Err(Error::Config(format!("{name} must be a subinterval of (0, 1)")));
            }
        }
        let (a, b) = self.l_range_factor;
        if !(zero < a && a <= b && b < T::lit(0.5)) {
            return Err(Error::Config("l_range_factor must lie in (0, 0.5) so that u stays positive".into()));
        }
        if let Some((a, b)) = self.m_range {
            if !(zero < a && a <= b && b.is_finite()) {
                return Err(Error::Config("m_range must be a positive interval".into()));
            }
        }
        self.gibbs.validate()?;
        self.confirm.validate()
    }

    pub fn candidate_count(&self) -> usize {
        self.n_m * self.n_m * self.n_t * self.n_t * self.n_l
    }
}

/// `n` evenly spaced points over [a, b]; the midpoint when `n == 1`,
/// [a] if the range is a point.
fn closed_points<T: Real>(a: T, b: T, n: usize) -> Vec<T> {
    if a == b {
        return vec![a];
    }
    if n == 1 {
        return vec![(a + b) / T::lit(2.0)];
    }
    (0..n).map(|k| a + (b - a) * T::lit(k as f64 / (n - 1) as f64)).collect()
}

/// `n` evenly spaced interior points of (a, b); [a] if the range is a point.
fn open_points<T: Real>(a: T, b: T, n: usize) -> Vec<T> {
    if a == b {
        return vec![a];
    }
    (0..n).map(|k| a + (b - a) * T::lit((k + 1) as f64 / (n + 1) as f64)).collect()
}

/// A candidate's evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate<T = f64> {
    /// Position in lexicographic (m, M, t, s, l) order.
    pub index: usize,
    pub template: ShapeTemplate<T>,
    pub median_min: T,
    pub median_max: T,
    pub total_variance: T,
    pub feasible: bool,
}

/// Winner plus what the search saw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchOutcome<T = f64> {
    pub best: ShapeGrid<T>,
    pub template: ShapeTemplate<T>,
    pub alpha0: T,
    pub beta0: T,
    pub evaluated: usize,
    /// Feasible candidates in enumeration order.
    pub feasible: Vec<Candidate<T>>,
    /// Winner's corner medians under each confirmation seed.
    pub confirmed_medians: Vec<(T, T)>,
}

/// Enumerates the structured family, keeping the feasible candidate with
/// the largest total prior variance that also passes confirmation.
pub fn grid_search<T: Real>(
    criteria: &PriorCriteria<T>,
    cfg: &GridSearchConfig<T>,
    dims: GridDims,
) -> Result<SearchOutcome<T>> {
    criteria.validate(dims)?;
    cfg.validate()?;
    let (alpha0, beta0) = solve_order_stat_shapes(criteria.target_min, criteria.target_max, dims.len())?;
    let (m_lo, m_hi) = cfg.m_range.unwrap_or((alpha0.min(beta0), alpha0 + beta0));
    let ms = closed_points(m_lo, m_hi, cfg.n_m);
    let ts = open_points(cfg.t_range.0, cfg.t_range.1, cfg.n_t);
    let ss = open_points(cfg.s_range.0, cfg.s_range.1, cfg.n_t);
    let ls = closed_points(cfg.l_range_factor.0, cfg.l_range_factor.1, cfg.n_l);

    let total = ms.len() * ms.len() * ts.len() * ss.len() * ls.len();
    let template_at = |idx: usize| {
        let mut r = idx;
        let il = r % ls.len();
        r /= ls.len();
        let is = r % ss.len();
        r /= ss.len();
        let it = r % ts.len();
        r /= ts.len();
        let i_big = r % ms.len();
        let im = r / ms.len();
        let (m, big_m) = (ms[im], ms[i_big]);
        ShapeTemplate::reduced(m, big_m, ts[it], ss[is], ls[il] * m.min(big_m))
    };

    let candidates: Vec<Candidate<T>> = (0..total)
        .into_par_iter()
        .map(|index| {
            let template = template_at(index);
            let shapes = build_shape_vectors(&template, dims)?;
            let chain = run_chain(&shapes, dims, &cfg.gibbs, None)?;
            let med = chain.medians();
            Ok(Candidate {
                index,
                template,
                median_min: med[0],
                median_max: med[med.len() - 1],
                total_variance: chain.summary().total_variance(),
                feasible: criteria.is_satisfied(med, dims),
            })
        })
        .collect::<Result<_>>()?;

    let feasible: Vec<Candidate<T>> = candidates.iter().filter(|c| c.feasible).cloned().collect();
    if feasible.is_empty() {
        let miss = candidates
            .iter()
            .min_by(|a, b| {
                let d = |c: &Candidate<T>| {
                    (c.median_min - criteria.target_min).abs().max((c.median_max - criteria.target_max).abs())
                };
                d(a).partial_cmp(&d(b)).unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("grid has at least one candidate");
        return Err(Error::Search(format!(
            "none of {total} candidates met the criteria; closest miss {:?} with corner medians {} and {}",
            miss.template, miss.median_min, miss.median_max
        )));
    }

    // Largest variance first; the stable sort keeps enumeration order on ties.
    let mut ranked: Vec<&Candidate<T>> = feasible.iter().collect();
    ranked.sort_by(|a, b| b.total_variance.partial_cmp(&a.total_variance).unwrap_or(std::cmp::Ordering::Equal));
    for c in ranked {
        let shapes = build_shape_vectors(&c.template, dims)?;
        let confirmed = confirm(&shapes, criteria, cfg, dims)?;
        if let Some(confirmed_medians) = confirmed {
            return Ok(SearchOutcome {
                best: shapes,
                template: c.template,
                alpha0,
                beta0,
                evaluated: total,
                feasible,
                confirmed_medians,
            });
        }
    }
    Err(Error::Search(format!(
        "{} candidates met the criteria on the search chain but none survived confirmation",
        feasible.len()
    )))
}

/// Corner medians under each confirmation seed, or `None` if any misses.
fn confirm<T: Real>(
    shapes: &ShapeGrid<T>,
    criteria: &PriorCriteria<T>,
    cfg: &GridSearchConfig<T>,
    dims: GridDims,
) -> Result<Option<Vec<(T, T)>>> {
    let mut out = Vec::new();
    for n in 0..cfg.confirm_seeds {
        let g = GibbsConfig { seed: cfg.confirm.seed.wrapping_add(n), ..cfg.confirm };
        let chain = run_chain(shapes, dims, &g, None)?;
        let med = chain.medians();
        if !criteria.is_satisfied(med, dims) {
            return Ok(None);
        }
        out.push((med[0], med[med.len() - 1]));
    }
    Ok(Some(out))
}
