//! Wasserstein-2 barycenters on the line and displacement interpolation.
//!
//! In one dimension the barycenter's quantile function is the weighted
//! average of the input quantile functions, so no iterative solver is needed.
//! The average is realised on a grid of quantile levels, either a uniform
//! midpoint grid or the exact union of all input breakpoints.

use serde::{Deserialize, Serialize};

use crate::distributions::EmpiricalDistribution;
use crate::error::{Error, Result};
use crate::transport::{map_from_plan, optimal_plan_1d, pushforward, wasserstein2, MonotoneMap};

/// Largest uniform grid used by default.
pub const MAX_DEFAULT_GRID: usize = 100_000;

/// Quantile levels on which the barycenter is realised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "size")]
pub enum QuantileGrid {
    /// `n` levels `p_i = (i − ½)/n`, each carrying mass `1/n`.
    Uniform(usize),
    /// Every cumulative breakpoint of every input; exact for discrete inputs.
    Exact,
}

impl QuantileGrid {
    /// One node per individual, capped at [`MAX_DEFAULT_GRID`].
    pub fn for_population(n: usize) -> Self {
        QuantileGrid::Uniform(n.clamp(1, MAX_DEFAULT_GRID))
    }
}

#[derive(Debug, Clone)]
pub struct BarycenterResult {
    pub barycenter: EmpiricalDistribution,
    /// Optimal map from each input (same order) onto the barycenter.
    pub maps: Vec<MonotoneMap>,
    pub grid: QuantileGrid,
}

impl BarycenterResult {
    /// Largest gap between adjacent barycenter support points.
    pub fn max_gap(&self) -> f64 {
        self.barycenter
            .support()
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

fn check_weights(n: usize, weights: &[f64]) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidWeights("no distributions".into()));
    }
    if weights.len() != n {
        return Err(Error::InvalidWeights(format!(
            "{} weights for {n} distributions",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidWeights(format!("weight {w} is not positive")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidWeights(format!("weights sum to {total}")));
    }
    Ok(())
}

/// Weighted barycenter of `dists` together with the optimal map from each
/// input onto it.
pub fn barycenter(
    dists: &[EmpiricalDistribution],
    weights: &[f64],
    grid: QuantileGrid,
) -> Result<BarycenterResult> {
    check_weights(dists.len(), weights)?;
    let atoms = match grid {
        QuantileGrid::Uniform(0) => {
            return Err(Error::Config("quantile grid size must be positive".into()))
        }
        QuantileGrid::Uniform(n) => uniform_grid_atoms(dists, weights, n),
        QuantileGrid::Exact => exact_atoms(dists, weights),
    };
    let barycenter = EmpiricalDistribution::from_weighted(atoms)?;
    let maps = dists
        .iter()
        .map(|d| map_from_plan(&optimal_plan_1d(d, &barycenter), d))
        .collect::<Result<Vec<_>>>()?;
    Ok(BarycenterResult {
        barycenter,
        maps,
        grid,
    })
}

fn uniform_grid_atoms(dists: &[EmpiricalDistribution], weights: &[f64], n: usize) -> Vec<(f64, f64)> {
    let mut values = vec![0.0; n];
    for (dist, &w) in dists.iter().zip(weights) {
        let cum = dist.cumulative();
        let support = dist.support();
        let mut j = 0;
        for (i, v) in values.iter_mut().enumerate() {
            let p = (i as f64 + 0.5) / n as f64;
            while j + 1 < cum.len() && cum[j] < p {
                j += 1;
            }
            *v += w * support[j];
        }
    }
    let mass = 1.0 / n as f64;
    values.into_iter().map(|v| (v, mass)).collect()
}

fn exact_atoms(dists: &[EmpiricalDistribution], weights: &[f64]) -> Vec<(f64, f64)> {
    let mut breaks: Vec<f64> = dists
        .iter()
        .flat_map(|d| d.cumulative().iter().copied())
        .collect();
    breaks.sort_by(f64::total_cmp);
    // breakpoints that differ only by rounding describe the same level
    let mut merged: Vec<f64> = Vec::with_capacity(breaks.len());
    for b in breaks {
        match merged.last_mut() {
            Some(last) if b - *last < 1e-12 => *last = b,
            _ => merged.push(b),
        }
    }
    let mut lower = 0.0;
    let mut atoms = Vec::with_capacity(merged.len());
    for upper in merged {
        let mid = 0.5 * (lower + upper);
        let value: f64 = dists
            .iter()
            .zip(weights)
            .map(|(d, w)| w * d.quantile_unchecked(mid))
            .sum();
        atoms.push((value, upper - lower));
        lower = upper;
    }
    atoms
}

/// `Σ_k w_k W2²(μ_k, candidate)`, the functional the barycenter minimises.
pub fn barycentric_objective(
    dists: &[EmpiricalDistribution],
    weights: &[f64],
    candidate: &EmpiricalDistribution,
) -> f64 {
    dists
        .iter()
        .zip(weights)
        .map(|(d, w)| {
            let dist = wasserstein2(d, candidate);
            w * dist * dist
        })
        .sum()
}

/// Move `source` a fraction `theta` of the way along `map_to_target`.
///
/// Returns the interpolating map `(1 − θ)·Id + θ·T` and the pushforward of
/// `source` under it.
pub fn displacement_interpolate(
    source: &EmpiricalDistribution,
    map_to_target: &MonotoneMap,
    theta: f64,
) -> Result<(MonotoneMap, EmpiricalDistribution)> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Theta(theta));
    }
    let map = map_to_target.interpolate(theta);
    let moved = pushforward(source, &map);
    Ok((map, moved))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(v: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::uniform(v).unwrap()
    }

    /// Discretised bump on [lo, lo + 0.5]: symmetric tent weights.
    fn bump(lo: f64) -> EmpiricalDistribution {
        let n: i32 = 21;
        EmpiricalDistribution::from_weighted((0..n).map(|i| {
            let x = lo + 0.5 * i as f64 / (n - 1) as f64;
            let w = 1.0 + (10 - (i - 10).abs()) as f64;
            (x, w)
        }))
        .unwrap()
    }

    #[test]
    fn translated_bumps_meet_in_the_middle() {
        let (a, b) = (bump(0.0), bump(0.5));
        let res = barycenter(&[a.clone(), b.clone()], &[0.5, 0.5], QuantileGrid::Exact).unwrap();
        let bary = &res.barycenter;
        assert!((bary.min() - 0.25).abs() < 1e-12);
        assert!((bary.max() - 0.75).abs() < 1e-12);
        assert!((bary.mean() - 0.5).abs() < 1e-12);
        // the peak (largest mass) sits at 0.5
        let peak = bary
            .atoms()
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap()
            .0;
        assert!((peak - 0.5).abs() < 1e-12);
        assert!(wasserstein2(bary, &a.translate(0.25)) < 1e-12);
    }

    #[test]
    fn identical_inputs() {
        let d = EmpiricalDistribution::from_weighted([(1.0, 0.2), (2.0, 0.5), (6.0, 0.3)]).unwrap();
        for grid in [QuantileGrid::Exact, QuantileGrid::Uniform(10)] {
            let res = barycenter(&[d.clone(), d.clone(), d.clone()], &[0.2, 0.3, 0.5], grid).unwrap();
            assert!(wasserstein2(&res.barycenter, &d) < 1e-12);
            for map in &res.maps {
                for &(s, t) in map.knots() {
                    assert!((s - t).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn translated_copies() {
        let base = EmpiricalDistribution::from_weighted([(-1.0, 0.25), (0.0, 0.25), (1.0, 0.5)])
            .unwrap()
            .translate(-0.25);
        let dists = [base.clone(), base.translate(4.0), base.translate(8.0)];
        let res = barycenter(&dists, &[0.5, 0.25, 0.25], QuantileGrid::Exact).unwrap();
        assert!((res.barycenter.mean() - 3.0).abs() < 1e-12);
        assert!(wasserstein2(&res.barycenter, &base.translate(3.0)) < 1e-12);
    }

    #[test]
    fn uniform_grid_on_equal_groups() {
        let a = uniform(&[10.0, 20.0, 30.0]);
        let b = uniform(&[40.0, 50.0, 60.0]);
        let res = barycenter(&[a, b], &[0.5, 0.5], QuantileGrid::Uniform(6)).unwrap();
        assert_eq!(res.barycenter.support(), &[25.0, 35.0, 45.0]);
        assert_eq!(res.maps[0].knots(), &[(10.0, 25.0), (20.0, 35.0), (30.0, 45.0)]);
        assert_eq!(res.maps[1].knots(), &[(40.0, 25.0), (50.0, 35.0), (60.0, 45.0)]);
        assert_eq!(res.max_gap(), 10.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = uniform(&[1.0]);
        assert!(barycenter(&[], &[], QuantileGrid::Exact).is_err());
        assert!(barycenter(std::slice::from_ref(&d), &[0.5, 0.5], QuantileGrid::Exact).is_err());
        assert!(barycenter(&[d.clone(), d.clone()], &[0.7, 0.7], QuantileGrid::Exact).is_err());
        assert!(barycenter(&[d.clone(), d.clone()], &[1.0, 0.0], QuantileGrid::Exact).is_err());
        assert!(barycenter(&[d], &[1.0], QuantileGrid::Uniform(0)).is_err());
    }

    #[test]
    fn interpolation_examples() {
        let src = uniform(&[10.0, 20.0, 30.0]);
        let map = MonotoneMap::new(vec![(10.0, 25.0), (20.0, 35.0), (30.0, 45.0)]).unwrap();

        let (id, same) = displacement_interpolate(&src, &map, 0.0).unwrap();
        assert!(id.knots().iter().all(|&(s, t)| s == t));
        assert_eq!(same, src);

        let (_, half) = displacement_interpolate(&src, &map, 0.5).unwrap();
        assert_eq!(half.support(), &[17.5, 27.5, 37.5]);

        let (_, full) = displacement_interpolate(&src, &map, 1.0).unwrap();
        assert_eq!(full.support(), &[25.0, 35.0, 45.0]);

        assert!(matches!(displacement_interpolate(&src, &map, 1.5), Err(Error::Theta(_))));
        assert!(displacement_interpolate(&src, &map, -0.1).is_err());
    }

    #[test]
    fn halfway_bumps() {
        let (a, b) = (bump(0.0), bump(0.5));
        let res = barycenter(&[a.clone(), b.clone()], &[0.5, 0.5], QuantileGrid::Exact).unwrap();
        let (_, a_half) = displacement_interpolate(&a, &res.maps[0], 0.5).unwrap();
        let (_, b_half) = displacement_interpolate(&b, &res.maps[1], 0.5).unwrap();
        assert!((a_half.min() - 0.125).abs() < 1e-12 && (a_half.max() - 0.625).abs() < 1e-12);
        assert!((b_half.min() - 0.375).abs() < 1e-12 && (b_half.max() - 0.875).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;

        fn dist(max_atoms: usize) -> impl Strategy<Value = EmpiricalDistribution> {
            prop::collection::vec((-30i32..30, 1u32..6), 1..=max_atoms).prop_map(|atoms| {
                EmpiricalDistribution::from_weighted(
                    atoms.into_iter().map(|(x, m)| (x as f64 * 0.5, m as f64)),
                )
                .unwrap()
            })
        }

        fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(1u32..10, n).prop_map(|w| {
                let total: u32 = w.iter().sum();
                w.into_iter().map(|x| x as f64 / total as f64).collect()
            })
        }

        fn case(max_atoms: usize) -> impl Strategy<Value = (Vec<EmpiricalDistribution>, Vec<f64>)> {
            (1usize..=3).prop_flat_map(move |g| (prop::collection::vec(dist(max_atoms), g), weights(g)))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(40))]

            #[test]
            fn beats_random_candidates((dists, w) in case(5), seed in any::<u64>()) {
                let res = barycenter(&dists, &w, QuantileGrid::Exact).unwrap();
                let best = barycentric_objective(&dists, &w, &res.barycenter);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let lo = dists.iter().map(|d| d.min()).fold(f64::INFINITY, f64::min) - 2.0;
                let hi = dists.iter().map(|d| d.max()).fold(f64::NEG_INFINITY, f64::max) + 2.0;
                for _ in 0..1000 {
                    let k = rng.random_range(1..=8);
                    let cand = EmpiricalDistribution::from_weighted(
                        (0..k).map(|_| (rng.random_range(lo..=hi), rng.random_range(0.05..1.0))),
                    ).unwrap();
                    prop_assert!(best <= barycentric_objective(&dists, &w, &cand) + 1e-9);
                }
            }

            #[test]
            fn maps_push_inputs_onto_barycenter((dists, w) in case(6)) {
                let res = barycenter(&dists, &w, QuantileGrid::Exact).unwrap();
                for (d, map) in dists.iter().zip(&res.maps) {
                    prop_assert!(map.knots().windows(2).all(|k| k[0].1 <= k[1].1));
                    let pushed = pushforward(d, map);
                    // projection error of splitting bins is bounded by the barycenter's spread
                    prop_assert!(wasserstein2(&pushed, &res.barycenter) <= res.barycenter.max() - res.barycenter.min() + 1e-9);
                }
            }

            #[test]
            fn geodesic((dists, _) in case(6), target in dist(6)) {
                let src = &dists[0];
                let map = map_from_plan(&optimal_plan_1d(src, &target), src).unwrap();
                let (_, end) = displacement_interpolate(src, &map, 1.0).unwrap();
                let full = wasserstein2(src, &end);
                for theta in [0.0, 0.25, 0.5, 0.75, 1.0] {
                    let (_, mid) = displacement_interpolate(src, &map, theta).unwrap();
                    prop_assert!((wasserstein2(src, &mid) - theta * full).abs() < 1e-6);
                }
            }

            #[test]
            fn two_groups_equal_interpolation(a in dist(6), b in dist(6), w1 in 1u32..10) {
                let w1 = w1 as f64 / 10.0;
                let res = barycenter(&[a.clone(), b.clone()], &[w1, 1.0 - w1], QuantileGrid::Exact).unwrap();
                // with a deterministic a → b coupling the interpolation is exact
                let plan = optimal_plan_1d(&a, &b);
                let map = map_from_plan(&plan, &a).unwrap();
                let (_, interp) = displacement_interpolate(&a, &map, 1.0 - w1).unwrap();
                for j in 0..17 {
                    let p = (j as f64 + 0.37) / 17.0;
                    let expect = w1 * a.quantile(p).unwrap() + (1.0 - w1) * b.quantile(p).unwrap();
                    prop_assert!((res.barycenter.quantile(p).unwrap() - expect).abs() < 1e-9);
                }
                let deterministic = plan.entries().windows(2).all(|e| e[0].0 != e[1].0);
                if deterministic {
                    prop_assert!(wasserstein2(&interp, &res.barycenter).powi(2) < 1e-12);
                }
            }

            #[test]
            fn barycenter_of_translations((dists, w) in case(6), shifts in prop::collection::vec(-20.0f64..20.0, 3)) {
                let base = barycenter(&dists, &w, QuantileGrid::Exact).unwrap();
                let moved: Vec<_> = dists.iter().zip(&shifts).map(|(d, z)| d.translate(*z)).collect();
                let zbar: f64 = w.iter().zip(&shifts).map(|(w, z)| w * z).sum();
                let res = barycenter(&moved, &w, QuantileGrid::Exact).unwrap();
                prop_assert!(wasserstein2(&res.barycenter, &base.barycenter.translate(zbar)).powi(2) < 1e-12);
                for p in [0.01, 0.2, 0.37, 0.5, 0.81, 1.0] {
                    let expect = base.barycenter.quantile(p).unwrap() + zbar;
                    prop_assert!((res.barycenter.quantile(p).unwrap() - expect).abs() < 1e-9);
                }
            }

            #[test]
            fn centered_inputs_centered_barycenter((dists, w) in case(6)) {
                let centered: Vec<_> = dists.iter().map(|d| d.translate(-d.mean())).collect();
                let res = barycenter(&centered, &w, QuantileGrid::Exact).unwrap();
                prop_assert!(res.barycenter.mean().abs() < 1e-9);
            }
        }
    }
}
