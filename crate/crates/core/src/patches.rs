//! Budget-patch decomposition: the coarsest partition of a union of budget
//! planes by the sign pattern each point shows against every budget.
//!
//! A patch is a maximal set of points of `∪_t B_t` (with
//! `B_t = {x ≥ 0 : p̄^t·x = m^t}`) sharing the full sign vector of
//! `p̄^s·x − m^s` over all budgets `s`. With data points present, each
//! point is classified directly (any dimension). Without points, patches
//! are enumerated geometrically: segment subdivision for two goods, and
//! candidate-sign-vector feasibility by Fourier–Motzkin elimination for up
//! to four goods.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dataset::CrossSection;
use crate::error::Error;
use crate::exact::{dot, Money};

/// Position of a point relative to one budget plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Sign {
    Below,
    On,
    Above,
}

fn sign_of(prices: &[Money], total: &Money, point: &[Money]) -> Sign {
    let cost = dot(prices, point);
    match cost.cmp(total) {
        std::cmp::Ordering::Less => Sign::Below,
        std::cmp::Ordering::Equal => Sign::On,
        std::cmp::Ordering::Greater => Sign::Above,
    }
}

/// One patch: its sign vector, a representative point on it, and the
/// budgets it lies on (the zero coordinates of the sign vector).
#[derive(Debug, Clone, Serialize)]
pub struct Patch {
    pub sign: Vec<Sign>,
    pub representative: Vec<Money>,
    pub on_budgets: Vec<usize>,
}

/// Patches with per-budget masses: `pi[l][t]` is the probability mass
/// budget `t` assigns to patch `l`; each budget's masses sum to one.
#[derive(Debug, Clone, Serialize)]
pub struct PatchDecomposition {
    pub patches: Vec<Patch>,
    pub pi: Vec<Vec<Money>>,
}

impl PatchDecomposition {
    /// Σ_l π_{l,t} for budget `t`.
    pub fn total_mass(&self, budget: usize) -> Money {
        self.pi.iter().map(|row| row[budget].clone()).sum()
    }
}

fn validate_budgets(budgets: &[(Vec<Money>, Money)]) -> Result<usize, Error> {
    if budgets.is_empty() {
        return Err(Error::schema("no budgets"));
    }
    let n_goods = budgets[0].0.len();
    if n_goods == 0 {
        return Err(Error::schema("budgets have no goods"));
    }
    for (t, (prices, total)) in budgets.iter().enumerate() {
        if prices.len() != n_goods {
            return Err(Error::schema(format!("budget {t} has a ragged price vector")));
        }
        for (k, p) in prices.iter().enumerate() {
            if !p.is_positive() {
                return Err(Error::domain(format!(
                    "budget {t} has a non-positive price at good {k}"
                )));
            }
        }
        if !total.is_positive() {
            return Err(Error::domain(format!("budget {t} has a non-positive total")));
        }
    }
    // Pairwise distinct as hyperplanes: (p, m) and (p′, m′) coincide iff
    // p′ = c·p and m′ = c·m for some c > 0.
    for a in 0..budgets.len() {
        for b in (a + 1)..budgets.len() {
            let (pa, ma) = &budgets[a];
            let (pb, mb) = &budgets[b];
            let same = (0..n_goods).all(|k| &pa[k] * mb == &pb[k] * ma);
            if same {
                return Err(Error::domain(format!(
                    "budgets {a} and {b} define the same hyperplane"
                )));
            }
        }
    }
    Ok(n_goods)
}

/// Patch decomposition of a family of budgets.
///
/// With `points`, every cross-section point is classified by its sign
/// vector and the per-budget masses come from the point weights (uniform
/// when absent). Without points, the decomposition is geometric: for two
/// goods each budget segment is subdivided at its intersections with the
/// other budgets and masses are the parameter lengths of the pieces
/// (intersection points carry zero mass); for three or four goods the
/// realized sign vectors are enumerated by exact feasibility checks and
/// masses are uniform over each budget's patches.
pub fn compute_patches(
    budgets: &[(Vec<Money>, Money)],
    points: Option<&CrossSection>,
) -> Result<PatchDecomposition, Error> {
    let n_goods = validate_budgets(budgets)?;
    match points {
        Some(cs) => classify_points(budgets, n_goods, cs),
        None if n_goods == 2 => Ok(subdivide_segments(budgets)),
        None if n_goods <= 4 => enumerate_by_feasibility(budgets, n_goods),
        None => Err(Error::UnsupportedDimension { goods: n_goods }),
    }
}

fn collect_groups(
    groups: BTreeMap<Vec<Sign>, (Vec<Money>, Vec<Money>)>,
) -> PatchDecomposition {
    let mut patches = Vec::with_capacity(groups.len());
    let mut pi = Vec::with_capacity(groups.len());
    for (sign, (representative, masses)) in groups {
        let on_budgets = sign
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == Sign::On)
            .map(|(t, _)| t)
            .collect();
        patches.push(Patch {
            sign,
            representative,
            on_budgets,
        });
        pi.push(masses);
    }
    PatchDecomposition { patches, pi }
}

fn classify_points(
    budgets: &[(Vec<Money>, Money)],
    n_goods: usize,
    cs: &CrossSection,
) -> Result<PatchDecomposition, Error> {
    if cs.n_goods() != n_goods {
        return Err(Error::schema(format!(
            "cross section has {} goods, budgets have {n_goods}",
            cs.n_goods()
        )));
    }
    if cs.n_observations() != budgets.len() {
        return Err(Error::schema(format!(
            "cross section has {} observations, {} budgets given",
            cs.n_observations(),
            budgets.len()
        )));
    }
    for (t, (prices, total)) in budgets.iter().enumerate() {
        let obs = cs.observation(t);
        if obs.price_index != *prices || obs.total != *total {
            return Err(Error::domain(format!(
                "budget {t} does not match the cross section's observation {t}"
            )));
        }
    }
    // Group bundles by sign vector; a bundle of budget t always lies on B_t.
    let mut groups: BTreeMap<Vec<Sign>, (Vec<Money>, Vec<Money>)> = BTreeMap::new();
    for (t, (prices, _)) in budgets.iter().enumerate() {
        let obs = cs.observation(t);
        let n_points = obs.points.len();
        let uniform = Money::one() / Money::from_int(n_points as i64);
        for (j, expenditure) in obs.points.iter().enumerate() {
            let bundle: Vec<Money> = expenditure
                .iter()
                .zip(prices)
                .map(|(e, p)| e / p)
                .collect();
            let sign: Vec<Sign> = budgets
                .iter()
                .map(|(ps, ms)| sign_of(ps, ms, &bundle))
                .collect();
            debug_assert_eq!(sign[t], Sign::On);
            let weight = match &obs.weights {
                Some(w) => w[j].clone(),
                None => uniform.clone(),
            };
            let entry = groups
                .entry(sign)
                .or_insert_with(|| (bundle.clone(), vec![Money::zero(); budgets.len()]));
            entry.1[t] = &entry.1[t] + &weight;
        }
    }
    Ok(collect_groups(groups))
}

/// Geometric mode for two goods: each budget is the segment from
/// `(m/p₁, 0)` to `(0, m/p₂)`; the other budget lines cut it at exactly
/// computed parameters, open pieces carry their parameter length as mass,
/// and cut points become zero-mass patches of their own.
fn subdivide_segments(budgets: &[(Vec<Money>, Money)]) -> PatchDecomposition {
    let n_budgets = budgets.len();
    let mut groups: BTreeMap<Vec<Sign>, (Vec<Money>, Vec<Money>)> = BTreeMap::new();
    let mut add = |sign: Vec<Sign>, point: Vec<Money>, budget: usize, mass: Money| {
        let entry = groups
            .entry(sign)
            .or_insert_with(|| (point, vec![Money::zero(); n_budgets]));
        entry.1[budget] = &entry.1[budget] + &mass;
    };
    for (t, (prices, total)) in budgets.iter().enumerate() {
        let start = vec![total / &prices[0], Money::zero()];
        let end = vec![Money::zero(), total / &prices[1]];
        let at = |alpha: &Money| -> Vec<Money> {
            vec![&start[0] * &(Money::one() - alpha), &end[1] * alpha]
        };
        // Interior cut parameters against every other budget line.
        let mut cuts: Vec<Money> = Vec::new();
        for (s, (ps, ms)) in budgets.iter().enumerate() {
            if s == t {
                continue;
            }
            let at_start = dot(ps, &start) - ms;
            let at_end = dot(ps, &end) - ms;
            let slope = &at_end - &at_start;
            if slope.is_zero() {
                continue;
            }
            let alpha = -&at_start / &slope;
            if !alpha.is_negative() && alpha <= Money::one() && !cuts.contains(&alpha) {
                cuts.push(alpha);
            }
        }
        cuts.sort();
        let mut stops = vec![Money::zero()];
        for cut in &cuts {
            if !stops.contains(cut) {
                stops.push(cut.clone());
            }
        }
        if *stops.last().unwrap() != Money::one() {
            stops.push(Money::one());
        }
        // Zero-dimensional patches wherever the segment meets another budget.
        for alpha in &stops {
            let point = at(alpha);
            let sign: Vec<Sign> = budgets
                .iter()
                .map(|(ps, ms)| sign_of(ps, ms, &point))
                .collect();
            if sign.iter().filter(|s| **s == Sign::On).count() > 1 {
                add(sign, point, t, Money::zero());
            }
        }
        // Open pieces between consecutive stops, classified at midpoints.
        for pair in stops.windows(2) {
            let (lo, hi) = (&pair[0], &pair[1]);
            if lo >= hi {
                continue;
            }
            let mid = (lo + hi) / Money::from_int(2);
            let point = at(&mid);
            let sign: Vec<Sign> = budgets
                .iter()
                .map(|(ps, ms)| sign_of(ps, ms, &point))
                .collect();
            add(sign, point, t, hi - lo);
        }
    }
    collect_groups(groups)
}

// ---------------------------------------------------------------------------
// Sign-vector feasibility by Fourier–Motzkin elimination (K ≤ 4)
// ---------------------------------------------------------------------------

/// Linear constraint `Σ_j coeffs[j]·x_j (≤ | <) rhs`.
#[derive(Debug, Clone)]
struct Constraint {
    coeffs: Vec<Money>,
    rhs: Money,
    strict: bool,
}

/// Decides feasibility of a conjunction of weak/strict linear inequalities
/// and extracts a witness by back-substitution. Exact rational arithmetic;
/// intended for a handful of variables.
fn feasible_point(n_vars: usize, constraints: Vec<Constraint>) -> Option<Vec<Money>> {
    // Eliminate variables from the last index down, remembering each
    // level's constraint set for the back-substitution.
    let mut levels: Vec<Vec<Constraint>> = Vec::with_capacity(n_vars);
    let mut current = constraints;
    for var in (0..n_vars).rev() {
        levels.push(current.clone());
        let mut next: Vec<Constraint> = Vec::new();
        let mut lowers: Vec<Constraint> = Vec::new(); // negative coefficient
        let mut uppers: Vec<Constraint> = Vec::new(); // positive coefficient
        for c in current {
            if c.coeffs[var].is_zero() {
                next.push(c);
            } else if c.coeffs[var].is_positive() {
                uppers.push(c);
            } else {
                lowers.push(c);
            }
        }
        for lo in &lowers {
            for hi in &uppers {
                let a = &hi.coeffs[var]; // > 0
                let b = &lo.coeffs[var]; // < 0
                let mut coeffs = Vec::with_capacity(n_vars);
                for j in 0..n_vars {
                    coeffs.push(&(&hi.coeffs[j] * &-b) + &(&lo.coeffs[j] * a));
                }
                let rhs = &(&hi.rhs * &-b) + &(&lo.rhs * a);
                next.push(Constraint {
                    coeffs,
                    rhs,
                    strict: lo.strict || hi.strict,
                });
            }
        }
        current = next;
    }
    // Constant constraints: 0 (≤ | <) rhs.
    for c in &current {
        debug_assert!(c.coeffs.iter().all(Money::is_zero));
        if c.strict {
            if !c.rhs.is_positive() {
                return None;
            }
        } else if c.rhs.is_negative() {
            return None;
        }
    }
    // Back-substitute in ascending variable order; the level recorded just
    // before x_var was eliminated only involves x_var and the
    // already-assigned lower indices.
    let mut assignment = vec![Money::zero(); n_vars];
    for var in 0..n_vars {
        let level = &levels[n_vars - 1 - var];
        let mut lower: Option<(Money, bool)> = None;
        let mut upper: Option<(Money, bool)> = None;
        for c in level {
            if c.coeffs[var].is_zero() {
                continue;
            }
            debug_assert!(c.coeffs[(var + 1)..].iter().all(Money::is_zero));
            let mut rest = c.rhs.clone();
            for j in 0..var {
                rest = rest - &c.coeffs[j] * &assignment[j];
            }
            let bound = &rest / &c.coeffs[var];
            if c.coeffs[var].is_positive() {
                match &upper {
                    None => upper = Some((bound, c.strict)),
                    Some((cur, cur_strict)) => {
                        if bound < *cur || (bound == *cur && c.strict && !cur_strict) {
                            upper = Some((bound, c.strict));
                        }
                    }
                }
            } else {
                match &lower {
                    None => lower = Some((bound, c.strict)),
                    Some((cur, cur_strict)) => {
                        if bound > *cur || (bound == *cur && c.strict && !cur_strict) {
                            lower = Some((bound, c.strict));
                        }
                    }
                }
            }
        }
        assignment[var] = match (&lower, &upper) {
            (None, None) => Money::zero(),
            (Some((lo, _)), None) => lo + &Money::one(),
            (None, Some((hi, _))) => {
                let candidate = hi - &Money::one();
                if candidate.is_negative() {
                    hi / &Money::from_int(2)
                } else {
                    candidate
                }
            }
            (Some((lo, lo_strict)), Some((hi, hi_strict))) => {
                if lo < hi {
                    (lo + hi) / Money::from_int(2)
                } else if lo == hi && !lo_strict && !hi_strict {
                    lo.clone()
                } else {
                    return None;
                }
            }
        };
    }
    Some(assignment)
}

fn enumerate_by_feasibility(
    budgets: &[(Vec<Money>, Money)],
    n_goods: usize,
) -> Result<PatchDecomposition, Error> {
    let n_budgets = budgets.len();
    let mut groups: BTreeMap<Vec<Sign>, Vec<Money>> = BTreeMap::new();
    let options = [Sign::Below, Sign::On, Sign::Above];
    for t in 0..n_budgets {
        // All candidate sign vectors with σ_t = On, the others free.
        let free: Vec<usize> = (0..n_budgets).filter(|&s| s != t).collect();
        let combos = 3usize.pow(free.len() as u32);
        for combo in 0..combos {
            let mut sign = vec![Sign::On; n_budgets];
            let mut rest = combo;
            for &s in &free {
                sign[s] = options[rest % 3];
                rest /= 3;
            }
            if groups.contains_key(&sign) {
                continue;
            }
            let mut constraints = Vec::new();
            for k in 0..n_goods {
                let mut coeffs = vec![Money::zero(); n_goods];
                coeffs[k] = Money::from_int(-1);
                constraints.push(Constraint {
                    coeffs,
                    rhs: Money::zero(),
                    strict: false,
                });
            }
            for (s, (prices, total)) in budgets.iter().enumerate() {
                match sign[s] {
                    Sign::On => {
                        constraints.push(Constraint {
                            coeffs: prices.clone(),
                            rhs: total.clone(),
                            strict: false,
                        });
                        constraints.push(Constraint {
                            coeffs: prices.iter().map(|p| -p).collect(),
                            rhs: -total,
                            strict: false,
                        });
                    }
                    Sign::Below => constraints.push(Constraint {
                        coeffs: prices.clone(),
                        rhs: total.clone(),
                        strict: true,
                    }),
                    Sign::Above => constraints.push(Constraint {
                        coeffs: prices.iter().map(|p| -p).collect(),
                        rhs: -total,
                        strict: true,
                    }),
                }
            }
            if let Some(point) = feasible_point(n_goods, constraints) {
                debug_assert_eq!(
                    budgets
                        .iter()
                        .map(|(ps, ms)| sign_of(ps, ms, &point))
                        .collect::<Vec<_>>(),
                    sign
                );
                groups.insert(sign, point);
            }
        }
    }
    let mut patches = Vec::with_capacity(groups.len());
    for (sign, representative) in groups {
        let on_budgets: Vec<usize> = sign
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == Sign::On)
            .map(|(t, _)| t)
            .collect();
        patches.push(Patch {
            sign,
            representative,
            on_budgets,
        });
    }
    // Uniform mass over each budget's patches.
    let mut pi = vec![vec![Money::zero(); n_budgets]; patches.len()];
    for t in 0..n_budgets {
        let on: Vec<usize> = patches
            .iter()
            .enumerate()
            .filter(|(_, p)| p.on_budgets.contains(&t))
            .map(|(l, _)| l)
            .collect();
        let share = Money::one() / Money::from_int(on.len() as i64);
        for l in on {
            pi[l][t] = share.clone();
        }
    }
    Ok(PatchDecomposition { patches, pi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::load_cross_section;

    fn m(s: &str) -> Money {
        Money::parse(s).unwrap()
    }

    fn budget(p: &[&str], total: &str) -> (Vec<Money>, Money) {
        (p.iter().map(|s| m(s)).collect(), m(total))
    }

    #[test]
    fn single_budget_is_one_patch_with_unit_mass() {
        let out = compute_patches(&[budget(&["1", "2"], "4")], None).unwrap();
        assert_eq!(out.patches.len(), 1);
        assert_eq!(out.patches[0].sign, vec![Sign::On]);
        assert_eq!(out.total_mass(0), m("1"));
    }

    #[test]
    fn crossing_budgets_give_five_patches() {
        // Lines x₁ + 2x₂ = 4 and 2x₁ + x₂ = 4 cross at (4/3, 4/3).
        let budgets = [budget(&["1", "2"], "4"), budget(&["2", "1"], "4")];
        let out = compute_patches(&budgets, None).unwrap();
        assert_eq!(out.patches.len(), 5);
        let crossing: Vec<&Patch> = out
            .patches
            .iter()
            .filter(|p| p.sign == vec![Sign::On, Sign::On])
            .collect();
        assert_eq!(crossing.len(), 1);
        assert_eq!(crossing[0].representative, vec![m("4/3"), m("4/3")]);
        for t in 0..2 {
            assert_eq!(out.total_mass(t), m("1"), "budget {t}");
        }
        // Every representative replays its sign vector.
        for patch in &out.patches {
            for (s, (ps, ms)) in budgets.iter().enumerate() {
                assert_eq!(sign_of(ps, ms, &patch.representative), patch.sign[s]);
            }
        }
    }

    #[test]
    fn parallel_budgets_give_two_patches() {
        let out =
            compute_patches(&[budget(&["1", "1"], "2"), budget(&["1", "1"], "4")], None).unwrap();
        assert_eq!(out.patches.len(), 2);
        assert_eq!(out.total_mass(0), m("1"));
        assert_eq!(out.total_mass(1), m("1"));
        // The cheap budget lies strictly below the dear one and vice versa.
        assert!(out
            .patches
            .iter()
            .any(|p| p.sign == vec![Sign::On, Sign::Below]));
        assert!(out
            .patches
            .iter()
            .any(|p| p.sign == vec![Sign::Above, Sign::On]));
    }

    #[test]
    fn rejects_duplicate_hyperplanes() {
        let err = compute_patches(&[budget(&["1", "2"], "4"), budget(&["2", "4"], "8")], None)
            .unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
    }

    #[test]
    fn point_classification_matches_geometry() {
        let budgets = [budget(&["1", "2"], "4"), budget(&["2", "1"], "4")];
        let cs = load_cross_section(
            r#"{"goods": 2, "observations": [
                {"pbar": ["1", "2"], "m": "4", "points": [["1", "3"], ["4", "0"]]},
                {"pbar": ["2", "1"], "m": "4", "points": [["3", "1"], ["0", "4"]]}
            ]}"#,
        )
        .unwrap();
        let out = compute_patches(&budgets, Some(&cs)).unwrap();
        let geometric = compute_patches(&budgets, None).unwrap();
        for patch in &out.patches {
            assert!(
                geometric.patches.iter().any(|g| g.sign == patch.sign),
                "sign vector {:?} not found geometrically",
                patch.sign
            );
        }
        for t in 0..2 {
            assert_eq!(out.total_mass(t), m("1"));
        }
    }

    #[test]
    fn three_good_crossing_planes_enumerate_exactly() {
        // Two planes crossing inside the positive orthant: two sides of each
        // plane plus the intersection cell.
        let budgets = [budget(&["1", "1", "1"], "3"), budget(&["2", "1", "1"], "4")];
        let out = compute_patches(&budgets, None).unwrap();
        assert_eq!(out.patches.len(), 5);
        for t in 0..2 {
            assert_eq!(out.total_mass(t), m("1"));
        }
        for patch in &out.patches {
            for (s, (ps, ms)) in budgets.iter().enumerate() {
                assert_eq!(sign_of(ps, ms, &patch.representative), patch.sign[s]);
            }
        }
    }

    #[test]
    fn three_budgets_on_a_segment_subdivide() {
        let budgets = [
            budget(&["1", "2"], "4"),
            budget(&["2", "1"], "4"),
            budget(&["1", "1"], "3"),
        ];
        let out = compute_patches(&budgets, None).unwrap();
        for t in 0..3 {
            assert_eq!(out.total_mass(t), m("1"));
        }
        // Sign vectors are pairwise distinct by construction.
        for a in 0..out.patches.len() {
            for b in (a + 1)..out.patches.len() {
                assert_ne!(out.patches[a].sign, out.patches[b].sign);
            }
        }
    }

    #[test]
    fn geometric_mode_rejects_high_dimension() {
        let budgets = [budget(&["1", "1", "1", "1", "1"], "5")];
        assert!(matches!(
            compute_patches(&budgets, None),
            Err(Error::UnsupportedDimension { goods: 5 })
        ));
    }
}
