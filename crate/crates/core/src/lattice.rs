//! Dose-lattice geometry and the static structure of the lattice-restricted
//! beta distribution.
//!
//! Doses are addressed 1-based as `(i, j)` with `i` the level of drug A and
//! `j` the level of drug B. Vectors over the lattice are stored in raster
//! order, `k = (i - 1) * J + j`, and the 1-based/0-based conversion lives
//! only in this module.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::scalar::Real;

/// Lattice dimensions: `rows` levels of drug A (I) by `cols` levels of drug B (J).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDims", into = "RawDims")]
pub struct GridDims {
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct RawDims {
    rows: usize,
    cols: usize,
}

impl TryFrom<RawDims> for GridDims {
    type Error = Error;
    fn try_from(raw: RawDims) -> Result<Self> {
        GridDims::new(raw.rows, raw.cols)
    }
}

impl From<GridDims> for RawDims {
    fn from(d: GridDims) -> Self {
        RawDims { rows: d.rows, cols: d.cols }
    }
}

impl GridDims {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return domain(format!("grid dimensions must be positive, got {rows}x{cols}"));
        }
        Ok(Self { rows, cols })
    }

    /// Levels of drug A (I).
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Levels of drug B (J).
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of dose combinations, K = I·J.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, d: DoseIndex) -> bool {
        (1..=self.rows).contains(&d.i) && (1..=self.cols).contains(&d.j)
    }

    /// 0-based storage offset of an in-range dose.
    #[inline]
    pub(crate) fn offset(&self, i: usize, j: usize) -> usize {
        (i - 1) * self.cols + (j - 1)
    }

    /// 0-based storage offset of a dose, or a domain error when out of range.
    pub fn slot(&self, d: DoseIndex) -> Result<usize> {
        if !self.contains(d) {
            return domain(format!("dose {d} outside {self} lattice"));
        }
        Ok(self.offset(d.i, d.j))
    }

    /// Dose at a 0-based storage offset.
    pub fn dose_at(&self, slot: usize) -> DoseIndex {
        DoseIndex { i: slot / self.cols + 1, j: slot % self.cols + 1 }
    }

    /// All doses in raster order.
    pub fn doses(&self) -> impl Iterator<Item = DoseIndex> + '_ {
        (0..self.len()).map(|s| self.dose_at(s))
    }
}

impl fmt::Display for GridDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

impl std::str::FromStr for GridDims {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (r, c) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::Config(format!("expected IxJ, got {s:?}")))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| Error::Config(format!("{s:?}: {e}")));
        GridDims::new(parse(r)?, parse(c)?)
    }
}

/// A dose combination `(i, j)`, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DoseIndex {
    pub i: usize,
    pub j: usize,
}

impl DoseIndex {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }
}

impl fmt::Display for DoseIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

/// Flat 1-based index `k = (i - 1)·J + j`.
pub fn flat_index(d: DoseIndex, dims: GridDims) -> Result<usize> {
    Ok(dims.slot(d)? + 1)
}

/// Inverse of [`flat_index`].
pub fn dose_index(k: usize, dims: GridDims) -> Result<DoseIndex> {
    if k == 0 || k > dims.len() {
        return domain(format!("flat index {k} outside [1, {}]", dims.len()));
    }
    Ok(dims.dose_at(k - 1))
}

/// Toxicity probabilities over the lattice in raster order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbGrid<T = f64> {
    pub values: Vec<T>,
}

impl<T: Real> ProbGrid<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, d: DoseIndex, dims: GridDims) -> Result<T> {
        Ok(self.values[dims.slot(d)?])
    }

    fn check_len(&self, dims: GridDims) -> Result<()> {
        if self.values.len() != dims.len() {
            return domain(format!("grid has {} values, lattice {dims} needs {}", self.values.len(), dims.len()));
        }
        Ok(())
    }
}

/// Beta shape parameters per dose, in raster order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeGrid<T = f64> {
    pub alpha: Vec<T>,
    pub beta: Vec<T>,
}

impl<T: Real> ShapeGrid<T> {
    pub fn new(alpha: Vec<T>, beta: Vec<T>) -> Result<Self> {
        let g = Self { alpha, beta };
        g.validate()?;
        Ok(g)
    }

    /// Same shapes at every dose.
    pub fn uniform(dims: GridDims, alpha: T, beta: T) -> Result<Self> {
        Self::new(vec![alpha; dims.len()], vec![beta; dims.len()])
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.len() != self.beta.len() {
            return domain(format!("alpha has {} entries, beta {}", self.alpha.len(), self.beta.len()));
        }
        if self.alpha.is_empty() {
            return domain("empty shape grid");
        }
        let ok = |v: &T| *v > T::zero() && v.is_finite();
        if !self.alpha.iter().all(ok) || !self.beta.iter().all(ok) {
            return domain("shape parameters must be positive and finite");
        }
        Ok(())
    }

    pub fn check_dims(&self, dims: GridDims) -> Result<()> {
        if self.alpha.len() != dims.len() {
            return domain(format!("shape grid has {} doses, lattice {dims} needs {}", self.alpha.len(), dims.len()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Effective sample size α + β at each dose.
    pub fn ess(&self) -> Vec<T> {
        self.alpha.iter().zip(&self.beta).map(|(&a, &b)| a + b).collect()
    }

    pub fn total_ess(&self) -> T {
        self.ess().into_iter().fold(T::zero(), |acc, m| acc + m)
    }
}

/// Whether `p` lies in the lattice Ω: every entry in (0, 1) and strictly
/// below its right and upper neighbours. Incomparable doses may tie.
pub fn satisfies_partial_order<T: Real>(p: &ProbGrid<T>, dims: GridDims) -> Result<bool> {
    p.check_len(dims)?;
    let v = &p.values;
    let (zero, one) = (T::zero(), T::one());
    if !v.iter().all(|&x| x > zero && x < one) {
        return Ok(false);
    }
    Ok(ordered_by(v, dims, |lo, hi| lo < hi))
}

/// Non-strict version of the order check, with slack `tol`, used for
/// posterior medians and true-probability tables.
pub fn is_monotone<T: Real>(p: &ProbGrid<T>, dims: GridDims, tol: T) -> Result<bool> {
    p.check_len(dims)?;
    Ok(ordered_by(&p.values, dims, |lo, hi| lo <= hi + tol))
}

fn ordered_by<T: Copy>(v: &[T], dims: GridDims, ok: impl Fn(T, T) -> bool) -> bool {
    for i in 1..=dims.rows {
        for j in 1..=dims.cols {
            let here = v[dims.offset(i, j)];
            if j < dims.cols && !ok(here, v[dims.offset(i, j + 1)]) {
                return false;
            }
            if i < dims.rows && !ok(here, v[dims.offset(i + 1, j)]) {
                return false;
            }
        }
    }
    true
}

/// Open interval `(lower, upper)` that the k-th coordinate (1-based) must
/// lie in given its lattice neighbours; 0 and 1 stand in for missing ones.
pub fn neighbor_bounds<T: Real>(k: usize, p: &ProbGrid<T>, dims: GridDims) -> Result<(T, T)> {
    p.check_len(dims)?;
    let d = dose_index(k, dims)?;
    Ok(bounds_at(&p.values, dims, d.i, d.j))
}

#[inline]
pub(crate) fn bounds_at<T: Real>(v: &[T], dims: GridDims, i: usize, j: usize) -> (T, T) {
    let mut lower = T::zero();
    let mut upper = T::one();
    if i > 1 {
        lower = lower.max(v[dims.offset(i - 1, j)]);
    }
    if j > 1 {
        lower = lower.max(v[dims.offset(i, j - 1)]);
    }
    if i < dims.rows {
        upper = upper.min(v[dims.offset(i + 1, j)]);
    }
    if j < dims.cols {
        upper = upper.min(v[dims.offset(i, j + 1)]);
    }
    (lower, upper)
}

/// Feasible starting point `p_ij = (i + j) / (I + J + 2)`.
pub fn default_init<T: Real>(dims: GridDims) -> ProbGrid<T> {
    let denom = T::lit((dims.rows + dims.cols + 2) as f64);
    ProbGrid::new(dims.doses().map(|d| T::lit((d.i + d.j) as f64) / denom).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dims(r: usize, c: usize) -> GridDims {
        GridDims::new(r, c).unwrap()
    }

    #[test]
    fn flat_index_examples() {
        assert_eq!(flat_index(DoseIndex::new(1, 1), dims(3, 7)).unwrap(), 1);
        assert_eq!(flat_index(DoseIndex::new(2, 1), dims(4, 4)).unwrap(), 5);
        assert_eq!(dose_index(5, dims(4, 4)).unwrap(), DoseIndex::new(2, 1));
    }

    #[test]
    fn out_of_range_indices_are_domain_errors() {
        let d = dims(2, 3);
        assert!(matches!(flat_index(DoseIndex::new(3, 1), d), Err(Error::Domain(_))));
        assert!(matches!(flat_index(DoseIndex::new(1, 0), d), Err(Error::Domain(_))));
        assert!(dose_index(0, d).is_err());
        assert!(dose_index(7, d).is_err());
        assert!(GridDims::new(0, 3).is_err());
    }

    #[test]
    fn partial_order_examples() {
        let d = dims(2, 2);
        let check = |v: [f64; 4]| satisfies_partial_order(&ProbGrid::new(v.to_vec()), d).unwrap();
        assert!(check([0.1, 0.2, 0.2, 0.3]));
        assert!(!check([0.1, 0.3, 0.2, 0.25]));
        assert!(!check([0.1, 0.1, 0.2, 0.3]));
        assert!(!check([0.0, 0.1, 0.2, 0.3]));
        assert!(satisfies_partial_order(&ProbGrid::new(vec![0.1, 0.2]), d).is_err());
    }

    #[test]
    fn bounds_examples() {
        let d = dims(3, 4);
        let p: ProbGrid = default_init(d);
        let (lo, hi) = neighbor_bounds(1, &p, d).unwrap();
        assert_eq!(lo, 0.0);
        assert_eq!(hi, p.values[1].min(p.values[4]));
        let (lo, hi) = neighbor_bounds(12, &p, d).unwrap();
        assert_eq!(lo, p.values[7].max(p.values[10]));
        assert_eq!(hi, 1.0);
        let one = dims(1, 1);
        assert_eq!(neighbor_bounds(1, &ProbGrid::new(vec![0.3]), one).unwrap(), (0.0, 1.0));
    }

    #[test]
    fn default_init_examples() {
        let p: ProbGrid = default_init(dims(2, 2));
        let want = [2.0 / 6.0, 0.5, 0.5, 4.0 / 6.0];
        for (a, b) in p.values.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(default_init::<f64>(dims(1, 1)).values, vec![0.5]);
        for r in 1..=10 {
            for c in 1..=10 {
                assert!(satisfies_partial_order(&default_init::<f64>(dims(r, c)), dims(r, c)).unwrap());
                assert!(satisfies_partial_order(&default_init::<f32>(dims(r, c)), dims(r, c)).unwrap());
            }
        }
    }

    #[test]
    fn dims_parse_and_serde() {
        let d: GridDims = "4x5".parse().unwrap();
        assert_eq!((d.rows(), d.cols()), (4, 5));
        assert!("4by5".parse::<GridDims>().is_err());
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<GridDims>(&json).unwrap(), d);
        assert!(serde_json::from_str::<GridDims>(r#"{"rows":0,"cols":2}"#).is_err());
    }

    #[test]
    fn shape_grid_validation() {
        assert!(ShapeGrid::new(vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(ShapeGrid::new(vec![1.0, 0.0], vec![1.0, 1.0]).is_err());
        let g = ShapeGrid::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(g.ess(), vec![1.5, 2.5]);
        assert_eq!(g.total_ess(), 4.0);
    }

    fn brute_force_order(v: &[f64], d: GridDims) -> bool {
        if !v.iter().all(|&x| x > 0.0 && x < 1.0) {
            return false;
        }
        for a in d.doses() {
            for b in d.doses() {
                if a != b && a.i <= b.i && a.j <= b.j && v[d.slot(a).unwrap()] >= v[d.slot(b).unwrap()] {
                    return false;
                }
            }
        }
        true
    }

    fn grid_strategy() -> impl Strategy<Value = (GridDims, Vec<f64>)> {
        (1usize..=5, 1usize..=5).prop_flat_map(|(r, c)| {
            // coarse values make ties and violations common
            (Just(dims(r, c)), proptest::collection::vec((0u8..=10).prop_map(|x| x as f64 / 10.0), r * c))
        })
    }

    proptest! {
        #[test]
        fn index_round_trip(r in 1usize..=10, c in 1usize..=10, seed in 0usize..10_000) {
            let d = dims(r, c);
            let k = seed % d.len() + 1;
            prop_assert_eq!(flat_index(dose_index(k, d).unwrap(), d).unwrap(), k);
        }

        #[test]
        fn order_check_matches_brute_force((d, v) in grid_strategy()) {
            let fast = satisfies_partial_order(&ProbGrid::new(v.clone()), d).unwrap();
            prop_assert_eq!(fast, brute_force_order(&v, d));
        }

        #[test]
        fn replacing_inside_bounds_stays_feasible(r in 1usize..=6, c in 1usize..=6, pick in 0usize..36, u in 0.01f64..0.99) {
            let d = dims(r, c);
            let mut p: ProbGrid = default_init(d);
            let k = pick % d.len() + 1;
            let (lo, hi) = neighbor_bounds(k, &p, d).unwrap();
            p.values[k - 1] = lo + u * (hi - lo);
            prop_assert!(satisfies_partial_order(&p, d).unwrap());
        }
    }
}
