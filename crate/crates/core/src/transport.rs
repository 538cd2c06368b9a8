//! Exact one-dimensional optimal transport under quadratic cost.
//!
//! On the line the monotone (comonotone) coupling of two distributions is
//! optimal for `|x - y|^2`, so plans are built by walking both cumulative
//! distributions from the left and matching mass in order.

use crate::distributions::EmpiricalDistribution;
use crate::error::{Error, Result};

/// Tolerance used when checking plan marginals against distributions.
pub const MARGINAL_TOLERANCE: f64 = 1e-9;

/// A nondecreasing map given by knots `(source, target)`.
///
/// Between knots the map is linear; outside the knot range it is constant at
/// the nearest knot.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneMap {
    knots: Vec<(f64, f64)>,
}

impl MonotoneMap {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Invariant("monotone map needs at least one knot".into()));
        }
        if knots.iter().any(|(s, t)| !s.is_finite() || !t.is_finite()) {
            return Err(Error::Invariant("non-finite knot".into()));
        }
        for w in knots.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::Invariant(format!(
                    "knot sources not strictly increasing: {} then {}",
                    w[0].0, w[1].0
                )));
            }
            if w[0].1 > w[1].1 {
                return Err(Error::Invariant(format!(
                    "map decreases between {} and {}",
                    w[0].0, w[1].0
                )));
            }
        }
        Ok(Self { knots })
    }

    /// Identity on the given support points.
    pub fn identity(support: &[f64]) -> Result<Self> {
        Self::new(support.iter().map(|&x| (x, x)).collect())
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn sources(&self) -> impl Iterator<Item = f64> + '_ {
        self.knots.iter().map(|k| k.0)
    }

    pub fn targets(&self) -> impl Iterator<Item = f64> + '_ {
        self.knots.iter().map(|k| k.1)
    }

    /// Target of the knot whose source equals `x` exactly.
    pub fn lookup(&self, x: f64) -> Option<f64> {
        self.knots
            .binary_search_by(|k| k.0.total_cmp(&x))
            .ok()
            .map(|i| self.knots[i].1)
    }

    /// Piecewise-linear evaluation, clamped outside the knot range.
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.knots.partition_point(|k| k.0 <= x);
        if i == 0 {
            return self.knots[0].1;
        }
        let (s0, t0) = self.knots[i - 1];
        if s0 == x || i == self.knots.len() {
            return t0;
        }
        let (s1, t1) = self.knots[i];
        t0 + (t1 - t0) * ((x - s0) / (s1 - s0))
    }

    /// `(1 - theta)·Id + theta·T` on the same knots.
    pub fn interpolate(&self, theta: f64) -> Self {
        let knots = self
            .knots
            .iter()
            .map(|&(s, t)| (s, (1.0 - theta) * s + theta * t))
            .collect();
        // a convex combination of two nondecreasing sequences is nondecreasing
        Self { knots }
    }

    /// `T + z`.
    pub fn shifted(&self, z: f64) -> Self {
        Self {
            knots: self.knots.iter().map(|&(s, t)| (s, t + z)).collect(),
        }
    }
}

/// A coupling between two finitely supported distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    source_support: Vec<f64>,
    target_support: Vec<f64>,
    /// `(source index, target index, mass)`, sorted by source then target.
    entries: Vec<(usize, usize, f64)>,
}

impl TransportPlan {
    pub fn new(
        source_support: Vec<f64>,
        target_support: Vec<f64>,
        mut entries: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        for &(i, j, m) in &entries {
            if i >= source_support.len() || j >= target_support.len() {
                return Err(Error::Invariant(format!("plan entry ({i}, {j}) out of range")));
            }
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::Invariant(format!("plan mass {m}")));
            }
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        Ok(Self {
            source_support,
            target_support,
            entries,
        })
    }

    pub fn source_support(&self) -> &[f64] {
        &self.source_support
    }

    pub fn target_support(&self) -> &[f64] {
        &self.target_support
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// `(source value, target value, mass)` triples.
    pub fn triples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.entries
            .iter()
            .map(|&(i, j, m)| (self.source_support[i], self.target_support[j], m))
    }

    pub fn source_marginal(&self) -> Vec<f64> {
        let mut rows = vec![0.0; self.source_support.len()];
        for &(i, _, m) in &self.entries {
            rows[i] += m;
        }
        rows
    }

    pub fn target_marginal(&self) -> Vec<f64> {
        let mut cols = vec![0.0; self.target_support.len()];
        for &(_, j, m) in &self.entries {
            cols[j] += m;
        }
        cols
    }

    /// Check both marginals against `source` and `target` within `tol`.
    pub fn check_marginals(
        &self,
        source: &EmpiricalDistribution,
        target: &EmpiricalDistribution,
        tol: f64,
    ) -> Result<()> {
        check_side("source", &self.source_support, &self.source_marginal(), source, tol)?;
        check_side("target", &self.target_support, &self.target_marginal(), target, tol)
    }

    /// No crossing pairs: `s < s'` never goes with `t > t'`.
    pub fn is_monotone(&self) -> bool {
        // entries are sorted by source; targets must then be nondecreasing
        self.entries.windows(2).all(|w| w[0].1 <= w[1].1)
    }

    /// `Σ mass · (target − source)²`.
    pub fn cost(&self) -> f64 {
        self.triples().map(|(s, t, m)| m * (t - s) * (t - s)).sum()
    }
}

fn check_side(
    side: &str,
    support: &[f64],
    marginal: &[f64],
    dist: &EmpiricalDistribution,
    tol: f64,
) -> Result<()> {
    if support != dist.support() {
        return Err(Error::Marginal(format!("{side} support differs from the plan")));
    }
    for ((x, got), want) in support.iter().zip(marginal).zip(dist.masses()) {
        if (got - want).abs() > tol {
            return Err(Error::Marginal(format!(
                "{side} mass at {x}: plan {got}, distribution {want}"
            )));
        }
    }
    Ok(())
}

/// The monotone coupling of `source` and `target`, which is the unique
/// W2-optimal plan on the line.
pub fn optimal_plan_1d(
    source: &EmpiricalDistribution,
    target: &EmpiricalDistribution,
) -> TransportPlan {
    let (ca, cb) = (source.cumulative(), target.cumulative());
    let mut entries = Vec::with_capacity(ca.len() + cb.len());
    let (mut i, mut j) = (0, 0);
    let mut filled = 0.0;
    // both cumulative arrays end at exactly 1.0, so the walk ends together
    while i < ca.len() && j < cb.len() {
        let next = ca[i].min(cb[j]);
        if next > filled {
            entries.push((i, j, next - filled));
            filled = next;
        }
        if ca[i] <= next {
            i += 1;
        }
        if cb[j] <= next {
            j += 1;
        }
    }
    TransportPlan {
        source_support: source.support().to_vec(),
        target_support: target.support().to_vec(),
        entries,
    }
}

/// Barycentric projection of `plan`: every source atom goes to the
/// mass-weighted mean of its targets.
pub fn map_from_plan(plan: &TransportPlan, source: &EmpiricalDistribution) -> Result<MonotoneMap> {
    if plan.source_support() != source.support() {
        return Err(Error::Marginal("source support differs from the plan".into()));
    }
    let n = source.len();
    let mut mass = vec![0.0; n];
    let mut moment = vec![0.0; n];
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for (&(i, _, m), (_, t, _)) in plan.entries().iter().zip(plan.triples()) {
        mass[i] += m;
        moment[i] += m * t;
        lo[i] = lo[i].min(t);
        hi[i] = hi[i].max(t);
    }
    let mut knots = Vec::with_capacity(n);
    for (i, (x, want)) in source.atoms().enumerate() {
        if (mass[i] - want).abs() > MARGINAL_TOLERANCE || mass[i] <= 0.0 {
            return Err(Error::Marginal(format!(
                "source mass at {x}: plan {}, distribution {want}",
                mass[i]
            )));
        }
        let target = if lo[i] == hi[i] {
            lo[i]
        } else {
            (moment[i] / mass[i]).clamp(lo[i], hi[i])
        };
        knots.push((x, target));
    }
    MonotoneMap::new(knots)
}

/// Quadratic cost `∫ |x − T(x)|² dμ` of `plan`.
pub fn transport_cost(source: &EmpiricalDistribution, plan: &TransportPlan) -> f64 {
    debug_assert_eq!(source.support(), plan.source_support());
    plan.cost()
}

/// Wasserstein-2 distance.
pub fn wasserstein2(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    optimal_plan_1d(a, b).cost().sqrt()
}

/// `μ ∘ T⁻¹`; atoms landing on the same point are merged.
pub fn pushforward(source: &EmpiricalDistribution, map: &MonotoneMap) -> EmpiricalDistribution {
    EmpiricalDistribution::from_weighted(source.atoms().map(|(x, m)| (map.eval(x), m)))
        .expect("a pushforward of a valid distribution is valid")
}
