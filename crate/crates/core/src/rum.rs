//! Cross-sectional rationalizability: random-utility sorting search,
//! random-price certificates through the stable-scale construction, the
//! augmented-utility variant, and the one-good refutation argument.
//!
//! The sorting search assigns each budget's anonymous expenditure points to
//! consumer streams by backtracking, with the first observation pinned to
//! the identity (streams are unlabeled, so this only quotients out the N!
//! relabeling symmetry). Pairwise two-cycle conflicts prune before the full
//! per-stream axiom check does. The search is exhaustive, so a negative
//! verdict is a proof; exceeding the node budget is reported as unknown,
//! never as a refutation.

use serde::Serialize;

use crate::aggregators::{weighted_arithmetic, AggregatorSpec};
use crate::behavioral::BehavioralExpenditure;
use crate::constructions::{
    pooled_observations, prop4_stable_prices, prop6_au_lambdas, validate_good_subset, StableScale,
};
use crate::dataset::{implied_bundle, CrossSection, PanelDataset, SortingFunction};
use crate::error::Error;
use crate::exact::{dot, Money};
use crate::revpref::{
    afriat_construct, check_gapp, check_garp, find_violation, AfriatSolution, Observation,
    PriceSystem, RevealedPreferenceGraph,
};

/// Default node budget for the sorting and grid searches.
pub const DEFAULT_SEARCH_BUDGET: u64 = 100_000_000;

/// Which per-stream axiom the sorting must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamAxiom {
    Garp,
    Gapp,
}

/// One refuted matching: the sorting, the consumer whose stream fails, and
/// the replayable witness cycle.
#[derive(Debug, Clone, Serialize)]
pub struct MatchingFailure {
    pub sorting: SortingFunction,
    pub consumer: usize,
    pub witness: Vec<usize>,
}

/// Negative certificate: either the exhaustive list of (identity-anchored)
/// matchings with their witnesses, or a bare exhausted-search report when
/// the list would explode.
#[derive(Debug, Clone, Serialize)]
pub enum RumRefutation {
    Exhaustive { matchings: Vec<MatchingFailure> },
    Exhausted { explored: u64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct RumVerdict {
    pub rationalizable: bool,
    pub sorting: Option<SortingFunction>,
    pub refutation: Option<RumRefutation>,
}

/// Certifying objects for a random-price rationalization: scale factors, a
/// discrete weight per consumer, and (for the budget-constrained model) the
/// common piecewise-linear utility. The augmented-utility pipeline carries
/// no utility; its certificate is the audited price-preference structure.
#[derive(Debug, Clone, Serialize)]
pub struct RpmCertificate {
    pub scales: StableScale,
    pub weights: Vec<Money>,
    pub utility: Option<AfriatSolution>,
}

impl RpmCertificate {
    /// Σ_i weights_i·λ_i; equals one when consistency in expectation holds
    /// under the weighted arithmetic aggregator.
    pub fn weighted_scale_mean(&self) -> Money {
        dot(&self.weights, &self.scales.lambda)
    }
}

struct SortSearch<'a> {
    cs: &'a CrossSection,
    axiom: StreamAxiom,
    budget: u64,
    explored: u64,
    /// `cost[s][t][j] = p̄^s · x_{t,j}` for point `j` of observation `t`.
    cost: Vec<Vec<Vec<Money>>>,
    totals: Vec<Money>,
    /// `assignment[t][i]`: point of observation `t` assigned to consumer `i`.
    assignment: Vec<Vec<usize>>,
    used: Vec<Vec<bool>>,
}

impl<'a> SortSearch<'a> {
    fn new(cs: &'a CrossSection, axiom: StreamAxiom, budget: u64) -> Self {
        let t_count = cs.n_observations();
        let n = cs.n_points();
        let bundles: Vec<Vec<Vec<Money>>> = (0..t_count)
            .map(|t| {
                let obs = cs.observation(t);
                obs.points
                    .iter()
                    .map(|e| {
                        e.iter()
                            .zip(&obs.price_index)
                            .map(|(ek, pk)| ek / pk)
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let cost = (0..t_count)
            .map(|s| {
                (0..t_count)
                    .map(|t| {
                        (0..n)
                            .map(|j| dot(&cs.observation(s).price_index, &bundles[t][j]))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let totals = (0..t_count).map(|t| cs.observation(t).total.clone()).collect();
        SortSearch {
            cs,
            axiom,
            budget,
            explored: 0,
            cost,
            totals,
            assignment: vec![Vec::new(); t_count],
            used: vec![vec![false; n]; t_count],
        }
    }

    /// Two-cycle between stream nodes `(s, a)` and `(t, b)`.
    fn conflict(&self, s: usize, a: usize, t: usize, b: usize) -> bool {
        match self.axiom {
            StreamAxiom::Garp => {
                self.totals[s] > self.cost[s][t][b] && self.totals[t] > self.cost[t][s][a]
            }
            StreamAxiom::Gapp => {
                self.cost[s][t][b] < self.totals[t] && self.cost[t][s][a] < self.totals[s]
            }
        }
    }

    /// Full axiom check on one consumer's partial stream of `(obs, point)`
    /// nodes.
    fn stream_violated(&self, nodes: &[(usize, usize)]) -> bool {
        let n = nodes.len();
        let mut weak = vec![vec![false; n]; n];
        let mut strict = vec![vec![false; n]; n];
        for (u, &(su, _)) in nodes.iter().enumerate() {
            for (v, &(sv, jv)) in nodes.iter().enumerate() {
                let cross = &self.cost[su][sv][jv];
                match self.axiom {
                    StreamAxiom::Garp => {
                        weak[u][v] = self.totals[su] >= *cross;
                        strict[u][v] = self.totals[su] > *cross;
                    }
                    StreamAxiom::Gapp => {
                        weak[u][v] = *cross <= self.totals[sv];
                        strict[u][v] = *cross < self.totals[sv];
                    }
                }
            }
        }
        let graph = RevealedPreferenceGraph {
            n,
            weak,
            strict,
        };
        find_violation(&graph).is_some()
    }

    fn consumer_nodes(&self, consumer: usize, through_obs: usize) -> Vec<(usize, usize)> {
        (0..=through_obs)
            .map(|s| (s, self.assignment[s][consumer]))
            .collect()
    }

    fn search(&mut self) -> Result<Option<SortingFunction>, Error> {
        let n = self.cs.n_points();
        // Streams are unlabeled: anchor the first observation to the
        // identity to quotient out consumer relabelings.
        self.assignment[0] = (0..n).collect();
        for j in 0..n {
            self.used[0][j] = true;
        }
        if self.cs.n_observations() == 1 {
            return Ok(Some(SortingFunction {
                assignment: self.assignment.clone(),
            }));
        }
        if self.dfs(1, 0)? {
            Ok(Some(SortingFunction {
                assignment: self.assignment.clone(),
            }))
        } else {
            Ok(None)
        }
    }

    fn dfs(&mut self, t: usize, consumer: usize) -> Result<bool, Error> {
        if t == self.cs.n_observations() {
            return Ok(true);
        }
        if consumer == self.cs.n_points() {
            return self.dfs(t + 1, 0);
        }
        for j in 0..self.cs.n_points() {
            if self.used[t][j] {
                continue;
            }
            self.explored += 1;
            if self.explored > self.budget {
                return Err(Error::SearchBudgetExceeded {
                    explored: self.explored,
                });
            }
            // Cheap pairwise two-cycle filter against the consumer's own
            // earlier points, then the full axiom check on the partial
            // stream (violations are monotone under extension, so pruning
            // here is sound).
            let mut ok = (0..t).all(|s| !self.conflict(s, self.assignment[s][consumer], t, j));
            if ok {
                self.assignment[t].push(j);
                debug_assert_eq!(self.assignment[t].len(), consumer + 1);
                let nodes = self.consumer_nodes(consumer, t);
                ok = !self.stream_violated(&nodes);
                if ok {
                    self.used[t][j] = true;
                    if self.dfs(t, consumer + 1)? {
                        return Ok(true);
                    }
                    self.used[t][j] = false;
                }
                self.assignment[t].pop();
            }
        }
        Ok(false)
    }
}

fn stream_observations(
    cs: &CrossSection,
    sorting: &SortingFunction,
    consumer: usize,
) -> Result<Vec<Observation>, Error> {
    (0..cs.n_observations())
        .map(|t| {
            let obs = cs.observation(t);
            let point = &obs.points[sorting.assignment[t][consumer]];
            Observation::new(
                implied_bundle(point, &obs.price_index)?,
                obs.price_index.clone(),
            )
        })
        .collect()
}

fn stream_satisfies(
    cs: &CrossSection,
    sorting: &SortingFunction,
    consumer: usize,
    axiom: StreamAxiom,
) -> Result<(bool, Option<Vec<usize>>), Error> {
    let observations = stream_observations(cs, sorting, consumer)?;
    match axiom {
        StreamAxiom::Garp => {
            let v = check_garp(&observations);
            Ok((v.satisfied, v.witness))
        }
        StreamAxiom::Gapp => {
            let points: Vec<_> = observations
                .iter()
                .map(|o| {
                    Ok((
                        o.bundle.clone(),
                        PriceSystem::linear(o.prices.clone())?,
                    ))
                })
                .collect::<Result<_, Error>>()?;
            let v = check_gapp(&points)?;
            Ok((v.satisfied, v.witness))
        }
    }
}

/// Exhaustive matching enumeration for the refutation certificate, with the
/// first observation anchored to the identity. Only attempted while the
/// matching count stays small.
fn enumerate_refutation(
    cs: &CrossSection,
    axiom: StreamAxiom,
) -> Result<Option<Vec<MatchingFailure>>, Error> {
    let n = cs.n_points();
    let t_count = cs.n_observations();
    let mut factorial = 1u64;
    for i in 2..=n as u64 {
        factorial = factorial.saturating_mul(i);
    }
    let total = factorial.saturating_pow(t_count.saturating_sub(1) as u32);
    if n > 2 || total > 4096 {
        return Ok(None);
    }
    let mut permutations: Vec<Vec<usize>> = Vec::new();
    let mut base: Vec<usize> = (0..n).collect();
    loop {
        permutations.push(base.clone());
        if !next_permutation(&mut base) {
            break;
        }
    }
    let mut failures = Vec::new();
    let mut stack = vec![SortingFunction {
        assignment: vec![(0..n).collect()],
    }];
    while let Some(partial) = stack.pop() {
        if partial.assignment.len() == t_count {
            let mut failing = None;
            for i in 0..n {
                let (ok, witness) = stream_satisfies(cs, &partial, i, axiom)?;
                if !ok {
                    failing = Some((i, witness.expect("failed verdict carries a witness")));
                    break;
                }
            }
            let (consumer, witness) = failing.expect(
                "exhausted search proved every matching fails, so each must carry a witness",
            );
            failures.push(MatchingFailure {
                sorting: partial,
                consumer,
                witness,
            });
            continue;
        }
        // Reverse order keeps the final list lexicographic.
        for perm in permutations.iter().rev() {
            let mut next = partial.clone();
            next.assignment.push(perm.clone());
            stack.push(next);
        }
    }
    Ok(Some(failures))
}

fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

fn sorted_search(
    cs: &CrossSection,
    axiom: StreamAxiom,
    search_budget: u64,
) -> Result<RumVerdict, Error> {
    let mut search = SortSearch::new(cs, axiom, search_budget);
    match search.search()? {
        Some(sorting) => {
            // A returned sorting always replays.
            for i in 0..cs.n_points() {
                let (ok, witness) = stream_satisfies(cs, &sorting, i, axiom)?;
                if !ok {
                    return Err(Error::ConstructionFailed {
                        message: format!(
                            "search returned a sorting whose stream {i} fails with \
                             witness {witness:?}; this is a bug"
                        ),
                    });
                }
            }
            Ok(RumVerdict {
                rationalizable: true,
                sorting: Some(sorting),
                refutation: None,
            })
        }
        None => {
            let refutation = match enumerate_refutation(cs, axiom)? {
                Some(matchings) => RumRefutation::Exhaustive { matchings },
                None => RumRefutation::Exhausted {
                    explored: search.explored,
                },
            };
            Ok(RumVerdict {
                rationalizable: false,
                sorting: None,
                refutation: Some(refutation),
            })
        }
    }
}

/// Random-utility rationalizability: is there a sorting of each budget's
/// points into consumer streams such that every stream passes GARP? The
/// backtracking search is exhaustive; the lexicographically smallest
/// sorting is returned on success.
pub fn rum_check(cs: &CrossSection, search_budget: u64) -> Result<RumVerdict, Error> {
    sorted_search(cs, StreamAxiom::Garp, search_budget)
}

/// Per-consumer weights for the discrete certificate: the cross section's
/// point weights transported through the sorting (they must then be
/// constant along each stream), or uniform when absent.
fn consumer_weights(cs: &CrossSection, sorting: &SortingFunction) -> Result<Vec<Money>, Error> {
    let n = cs.n_points();
    let has_weights = (0..cs.n_observations()).any(|t| cs.observation(t).weights.is_some());
    if !has_weights {
        let uniform = Money::one() / Money::from_int(n as i64);
        return Ok(vec![uniform; n]);
    }
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut along: Option<Money> = None;
        for t in 0..cs.n_observations() {
            let obs = cs.observation(t);
            let w = match &obs.weights {
                Some(w) => w[sorting.assignment[t][i]].clone(),
                None => {
                    return Err(Error::domain(
                        "point weights must be present on every observation or none",
                    ))
                }
            };
            match &along {
                None => along = Some(w),
                Some(prev) => {
                    if *prev != w {
                        return Err(Error::domain(format!(
                            "stream {i} carries unequal point weights across observations; \
                             no single consumer mass represents it"
                        )));
                    }
                }
            }
        }
        weights.push(along.unwrap());
    }
    Ok(weights)
}

/// Random-price rationalizability with stable scales on the goods in `r`:
/// runs the sorting search and, on success, feeds the sorted panel through
/// the stable-scale construction and the utility construction on the
/// pooled scaled data. Succeeds exactly when the sorting search does.
pub fn rpm_check(
    cs: &CrossSection,
    r: &[usize],
    aggregator: &AggregatorSpec,
    search_budget: u64,
) -> Result<(RumVerdict, Option<RpmCertificate>), Error> {
    let r = validate_good_subset(r, cs.n_goods())?;
    for t in 0..cs.n_observations() {
        let obs = cs.observation(t);
        for (j, point) in obs.points.iter().enumerate() {
            let on_r: Money = r.iter().map(|&k| point[k].clone()).sum();
            if !on_r.is_positive() {
                return Err(Error::precondition(format!(
                    "point (t={t}, j={j}) spends nothing on the scaled goods"
                )));
            }
        }
    }
    let verdict = rum_check(cs, search_budget)?;
    let Some(sorting) = verdict.sorting.clone() else {
        return Ok((verdict, None));
    };
    let panel = sorting.sorted_panel(cs)?;
    let (scales, prices, _params) = prop4_stable_prices(&panel, &r, aggregator)?;
    let pooled = pooled_observations(&panel, &prices)?;
    let utility = afriat_construct(&pooled)?;
    let weights = consumer_weights(cs, &sorting)?;
    let certificate = RpmCertificate {
        scales,
        weights,
        utility: Some(utility),
    };
    Ok((verdict, Some(certificate)))
}

/// Discrete random-price certificate: sorts the cross section, then builds
/// scales normalized against the weighted arithmetic aggregator of the
/// consumer weights, so that `Σ_i weights_i·λ_i = 1` exactly.
pub fn rpm_from_rum_discrete(
    cs: &CrossSection,
    r: &[usize],
    search_budget: u64,
) -> Result<RpmCertificate, Error> {
    let r = validate_good_subset(r, cs.n_goods())?;
    let verdict = rum_check(cs, search_budget)?;
    let Some(sorting) = verdict.sorting else {
        return Err(Error::NotRumRationalizable {
            message: "exhaustive sorting search found no GARP-consistent assignment".into(),
        });
    };
    let weights = consumer_weights(cs, &sorting)?;
    let aggregator = weighted_arithmetic(weights.clone())?;
    let panel = sorting.sorted_panel(cs)?;
    let (scales, prices, _params) = prop4_stable_prices(&panel, &r, &aggregator)?;
    let pooled = pooled_observations(&panel, &prices)?;
    let utility = afriat_construct(&pooled)?;
    let certificate = RpmCertificate {
        scales,
        weights,
        utility: Some(utility),
    };
    debug_assert_eq!(certificate.weighted_scale_mean(), Money::one());
    Ok(certificate)
}

/// Augmented-utility rationalizability of a cross section: sorting search
/// with per-stream price-preference checks (linear systems), then the
/// behavioral scale construction on the sorted panel with a pooled audit.
pub fn au_rum_check(
    cs: &CrossSection,
    phi: &BehavioralExpenditure,
    aggregator: &AggregatorSpec,
    search_budget: u64,
) -> Result<(RumVerdict, Option<RpmCertificate>), Error> {
    let verdict = sorted_search(cs, StreamAxiom::Gapp, search_budget)?;
    let Some(sorting) = verdict.sorting.clone() else {
        return Ok((verdict, None));
    };
    let panel = sorting.sorted_panel(cs)?;
    let (scales, _systems, _params) = prop6_au_lambdas(&panel, phi, aggregator)?;
    let weights = consumer_weights(cs, &sorting)?;
    let certificate = RpmCertificate {
        scales,
        weights,
        utility: None,
    };
    Ok((verdict, Some(certificate)))
}

// ---------------------------------------------------------------------------
// One-good refutation
// ---------------------------------------------------------------------------

/// How a one-good refutation (or its failure) was established.
#[derive(Debug, Clone, Serialize)]
pub enum RefutationTrace {
    /// Exact interval argument on the symmetric two-agent structure: any
    /// two prices in the pigeonhole interval have a ratio inside the
    /// mutual-violation band, and three symmetric observations force some
    /// agent into that position twice.
    Interval {
        good: usize,
        observations: Vec<usize>,
        violation_band: (Money, Money),
        pigeonhole_interval: (Money, Money),
        pigeonhole_ratio_band: (Money, Money),
    },
    /// Consistency pins the single consumer's prices to the index, where
    /// the data violates GARP.
    PinnedPrices { witness: Vec<usize> },
    /// Every assignment on the dyadic grid forced a violation; refutation
    /// is exhaustive at this resolution.
    GridExhausted {
        resolution_log2: u32,
        assignments_checked: u64,
    },
}

#[derive(Debug, Clone, Serialize)]
pub enum OneGoodOutcome {
    Refuted {
        trace: RefutationTrace,
    },
    /// A feasible price assignment for the free good under which every
    /// agent's stream passes GARP; `prices[i][t]` is agent i's price.
    NotRefuted {
        prices: Vec<Vec<Money>>,
    },
    Unknown {
        reason: String,
    },
}

impl OneGoodOutcome {
    pub fn is_refuted(&self) -> bool {
        matches!(self, OneGoodOutcome::Refuted { .. })
    }
}

/// The symmetric worked-example shape: two identical agents, as many goods
/// as observations, spending 10 on the distinguished good of each
/// observation and 1 elsewhere, with index price 2 on the distinguished
/// good and 1 elsewhere.
fn matches_example_structure(panel: &PanelDataset) -> bool {
    let (n, t_count, k_count) = (
        panel.n_consumers(),
        panel.n_observations(),
        panel.n_goods(),
    );
    if n != 2 || t_count != 4 || k_count != 4 {
        return false;
    }
    let (hi, lo) = (Money::from_int(10), Money::one());
    let (price_hi, price_lo) = (Money::from_int(2), Money::one());
    for t in 0..t_count {
        for k in 0..k_count {
            let want_price = if k == t { &price_hi } else { &price_lo };
            if panel.price_index(t)[k] != *want_price {
                return false;
            }
            for i in 0..n {
                let want = if k == t { &hi } else { &lo };
                if panel.expenditure(i, t)[k] != *want {
                    return false;
                }
            }
        }
    }
    true
}

/// Exact interval argument for the worked-example structure. Errors with
/// `UnsupportedShape` on any other panel.
pub fn one_good_interval_argument(
    panel: &PanelDataset,
    good: usize,
) -> Result<RefutationTrace, Error> {
    if !matches_example_structure(panel) {
        return Err(Error::UnsupportedShape {
            message: "the interval argument is specific to the symmetric \
                      two-agent, four-good, four-observation structure"
                .into(),
        });
    }
    if good >= panel.n_goods() {
        return Err(Error::domain(format!("good {good} out of range")));
    }
    // Observations where the chosen good is off-peak: spending 1 at index
    // price 1. Any heterogeneous price pair there sums to 2.
    let observations: Vec<usize> = (0..panel.n_observations()).filter(|&t| t != good).collect();
    let (hi, lo) = (Money::from_int(10), Money::one());
    let (price_hi, price_lo) = (Money::from_int(2), Money::one());
    // Cost of observation t′'s bundle at observation t's prices, both in the
    // off-peak set, splits into the free-good ratio plus a fixed part.
    let fixed = &(&price_lo * &hi) / &price_hi
        + &(&price_hi * &lo) / &price_lo
        + Money::from_int((panel.n_goods() - 3) as i64) * &lo;
    let spend = &hi + &(Money::from_int((panel.n_goods() - 1) as i64) * &lo);
    // Mutual strict preference between t and t′ iff the price ratio lies in
    // (1/band, band).
    let band = (&spend - &fixed) / &lo;
    debug_assert_eq!(band, Money::from_int(5));
    // Consistency in expectation (arithmetic) forces the two agents' prices
    // at each off-peak observation to sum to 2·p̄ = 2, so one agent is at or
    // above p̄ = 1 and strictly below 2. Three observations, two agents:
    // some agent is in [1, 2) twice, and the ratio of two such prices lies
    // in (1/2, 2) ⊂ (1/band, band). That agent holds a two-cycle.
    let pigeonhole = (price_lo.clone(), Money::from_int(2) * &price_lo);
    let ratio_band = (Money::ratio(1, 2), Money::from_int(2));
    debug_assert!(ratio_band.0 > band.recip() && ratio_band.1 < band);
    Ok(RefutationTrace::Interval {
        good,
        observations,
        violation_band: (band.recip(), band),
        pigeonhole_interval: pigeonhole,
        pigeonhole_ratio_band: ratio_band,
    })
}

/// GARP verdict of one agent's stream when only `good`'s prices deviate
/// from the index.
fn agent_stream_satisfied(
    panel: &PanelDataset,
    agent: usize,
    good: usize,
    good_prices: &[Money],
) -> Result<bool, Error> {
    let observations: Vec<Observation> = (0..panel.n_observations())
        .map(|t| {
            let mut prices = panel.price_index(t).to_vec();
            prices[good] = good_prices[t].clone();
            Observation::new(implied_bundle(panel.expenditure(agent, t), &prices)?, prices)
        })
        .collect::<Result<_, _>>()?;
    Ok(check_garp(&observations).satisfied)
}

/// Tests whether the panel can be rationalized with heterogeneous prices in
/// a single good (agents may have distinct preferences), under consistency
/// in expectation for that good.
///
/// The symmetric worked-example structure is decided exactly by the
/// interval argument; other two-agent panels fall back to a dyadic grid
/// search of resolution 2⁻¹⁰ over the consistency-constrained price pairs,
/// whose refutations are exhaustive at that resolution. More than two
/// agents is reported as unknown.
pub fn check_one_good_refutation(
    panel: &PanelDataset,
    good: usize,
    aggregator: &AggregatorSpec,
    search_budget: u64,
) -> Result<OneGoodOutcome, Error> {
    if good >= panel.n_goods() {
        return Err(Error::domain(format!("good {good} out of range")));
    }
    let n = panel.n_consumers();
    let t_count = panel.n_observations();

    if n == 1 {
        // Consistency pins the price to the index.
        let index_prices: Vec<Money> = (0..t_count)
            .map(|t| panel.price_index(t)[good].clone())
            .collect();
        let stream: Vec<Observation> = (0..t_count)
            .map(|t| {
                Observation::new(panel.bundle_at_index(0, t), panel.price_index(t).to_vec())
            })
            .collect::<Result<_, _>>()?;
        let verdict = check_garp(&stream);
        return Ok(if verdict.satisfied {
            OneGoodOutcome::NotRefuted {
                prices: vec![index_prices],
            }
        } else {
            OneGoodOutcome::Refuted {
                trace: RefutationTrace::PinnedPrices {
                    witness: verdict.witness.unwrap(),
                },
            }
        });
    }
    if n > 2 {
        return Ok(OneGoodOutcome::Unknown {
            reason: "the interval argument needs the two-agent structure and the \
                     grid fallback only supports two agents"
                .into(),
        });
    }

    // Homogeneous prices first: if every agent already passes at the index,
    // λ = 1 certifies non-refutation.
    let homogeneous: Vec<Vec<Money>> = (0..n)
        .map(|_| {
            (0..t_count)
                .map(|t| panel.price_index(t)[good].clone())
                .collect()
        })
        .collect();
    let all_pass = (0..n).try_fold(true, |acc, i| {
        agent_stream_satisfied(panel, i, good, &homogeneous[i]).map(|ok| acc && ok)
    })?;
    if all_pass {
        return Ok(OneGoodOutcome::NotRefuted {
            prices: homogeneous,
        });
    }

    if matches!(aggregator, AggregatorSpec::Arithmetic) {
        if let Ok(trace) = one_good_interval_argument(panel, good) {
            return Ok(OneGoodOutcome::Refuted { trace });
        }
    }

    one_good_grid_search(panel, good, aggregator, search_budget)
}

const GRID_RESOLUTION_LOG2: u32 = 10;

fn one_good_grid_search(
    panel: &PanelDataset,
    good: usize,
    aggregator: &AggregatorSpec,
    search_budget: u64,
) -> Result<OneGoodOutcome, Error> {
    let t_count = panel.n_observations();
    let steps = 1u32 << GRID_RESOLUTION_LOG2;
    // Per observation, the feasible (p¹, p²) pairs on the dyadic grid over
    // (0, 2·p̄), with p² solved from the consistency equation.
    let mut pairs: Vec<Vec<(Money, Money)>> = Vec::with_capacity(t_count);
    for t in 0..t_count {
        let pbar = &panel.price_index(t)[good];
        let limit = Money::from_int(2) * pbar;
        let mut feasible = Vec::new();
        for j in 1..steps {
            let p1 = &limit * &Money::ratio(j as i64, steps as i64);
            match aggregator.solve_residual(pbar, &[p1.clone()], 1) {
                Ok(p2) => feasible.push((p1, p2)),
                Err(Error::NoBracket { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        pairs.push(feasible);
    }

    let mut assignment: Vec<usize> = Vec::with_capacity(t_count);
    let mut checked = 0u64;
    let found = grid_dfs(
        panel,
        good,
        &pairs,
        &mut assignment,
        &mut checked,
        search_budget,
    )?;
    match found {
        GridResult::Found(prices) => Ok(OneGoodOutcome::NotRefuted { prices }),
        GridResult::Exhausted => Ok(OneGoodOutcome::Refuted {
            trace: RefutationTrace::GridExhausted {
                resolution_log2: GRID_RESOLUTION_LOG2,
                assignments_checked: checked,
            },
        }),
        GridResult::Budget => Ok(OneGoodOutcome::Unknown {
            reason: format!("grid search exceeded the {search_budget}-node budget"),
        }),
    }
}

enum GridResult {
    Found(Vec<Vec<Money>>),
    Exhausted,
    Budget,
}

fn grid_dfs(
    panel: &PanelDataset,
    good: usize,
    pairs: &[Vec<(Money, Money)>],
    assignment: &mut Vec<usize>,
    checked: &mut u64,
    budget: u64,
) -> Result<GridResult, Error> {
    let t = assignment.len();
    if t == panel.n_observations() {
        let prices: Vec<Vec<Money>> = (0..2)
            .map(|i| {
                (0..t)
                    .map(|s| {
                        let (p1, p2) = &pairs[s][assignment[s]];
                        if i == 0 {
                            p1.clone()
                        } else {
                            p2.clone()
                        }
                    })
                    .collect()
            })
            .collect();
        return Ok(GridResult::Found(prices));
    }
    for choice in 0..pairs[t].len() {
        *checked += 1;
        if *checked > budget {
            return Ok(GridResult::Budget);
        }
        assignment.push(choice);
        // Prune as soon as either agent's partial stream violates GARP.
        let mut ok = true;
        for agent in 0..2 {
            let good_prices: Vec<Money> = (0..=t)
                .map(|s| {
                    let (p1, p2) = &pairs[s][assignment[s]];
                    if agent == 0 {
                        p1.clone()
                    } else {
                        p2.clone()
                    }
                })
                .collect();
            if !partial_stream_satisfied(panel, agent, good, &good_prices)? {
                ok = false;
                break;
            }
        }
        if ok {
            match grid_dfs(panel, good, pairs, assignment, checked, budget)? {
                GridResult::Exhausted => {}
                other => return Ok(other),
            }
        }
        assignment.pop();
    }
    Ok(GridResult::Exhausted)
}

fn partial_stream_satisfied(
    panel: &PanelDataset,
    agent: usize,
    good: usize,
    good_prices: &[Money],
) -> Result<bool, Error> {
    let observations: Vec<Observation> = good_prices
        .iter()
        .enumerate()
        .map(|(t, p)| {
            let mut prices = panel.price_index(t).to_vec();
            prices[good] = p.clone();
            Observation::new(implied_bundle(panel.expenditure(agent, t), &prices)?, prices)
        })
        .collect::<Result<_, _>>()?;
    Ok(check_garp(&observations).satisfied)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_cross_section, load_panel};

    fn m(s: &str) -> Money {
        Money::parse(s).unwrap()
    }

    /// The non-rationalizable two-budget instance: both matchings pair the
    /// mutually-preferred points.
    fn negative_instance() -> CrossSection {
        load_cross_section(
            r#"{"goods": 2, "observations": [
                {"pbar": ["1", "2"], "m": "4", "points": [["1", "3"], ["1", "3"]]},
                {"pbar": ["2", "1"], "m": "4", "points": [["3", "1"], ["3", "1"]]}
            ]}"#,
        )
        .unwrap()
    }

    /// The rationalizable variant: the cross matching passes for both
    /// streams.
    fn positive_instance() -> CrossSection {
        load_cross_section(
            r#"{"goods": 2, "observations": [
                {"pbar": ["1", "2"], "m": "4", "points": [["1", "3"], ["4", "0"]]},
                {"pbar": ["2", "1"], "m": "4", "points": [["3", "1"], ["0", "4"]]}
            ]}"#,
        )
        .unwrap()
    }

    #[test]
    fn negative_instance_is_refuted_exhaustively() {
        let verdict = rum_check(&negative_instance(), DEFAULT_SEARCH_BUDGET).unwrap();
        assert!(!verdict.rationalizable);
        assert!(verdict.sorting.is_none());
        match verdict.refutation.unwrap() {
            RumRefutation::Exhaustive { matchings } => {
                assert_eq!(matchings.len(), 2);
                for failure in &matchings {
                    // Witnesses replay against the failing stream.
                    let (ok, witness) = stream_satisfies(
                        &negative_instance(),
                        &failure.sorting,
                        failure.consumer,
                        StreamAxiom::Garp,
                    )
                    .unwrap();
                    assert!(!ok);
                    assert_eq!(witness.unwrap(), failure.witness);
                }
            }
            other => panic!("expected exhaustive refutation, got {other:?}"),
        }
    }

    #[test]
    fn positive_instance_finds_the_cross_matching() {
        let cs = positive_instance();
        let verdict = rum_check(&cs, DEFAULT_SEARCH_BUDGET).unwrap();
        assert!(verdict.rationalizable);
        let sorting = verdict.sorting.unwrap();
        // The identity pairing fails, so the cross matching is forced.
        assert_eq!(sorting.assignment[0], vec![0, 1]);
        assert_eq!(sorting.assignment[1], vec![1, 0]);
        for i in 0..2 {
            let (ok, _) = stream_satisfies(&cs, &sorting, i, StreamAxiom::Garp).unwrap();
            assert!(ok);
        }
    }

    #[test]
    fn single_observation_is_trivially_rationalizable() {
        let cs = load_cross_section(
            r#"{"goods": 2, "observations": [
                {"pbar": ["1", "2"], "m": "4", "points": [["1", "3"], ["4", "0"]]}
            ]}"#,
        )
        .unwrap();
        let verdict = rum_check(&cs, DEFAULT_SEARCH_BUDGET).unwrap();
        assert!(verdict.rationalizable);
        assert_eq!(
            verdict.sorting.unwrap(),
            SortingFunction::identity(1, 2)
        );
    }

    #[test]
    fn verdict_is_invariant_under_point_relabeling() {
        // Swap the points inside both budgets of the positive instance.
        let swapped = load_cross_section(
            r#"{"goods": 2, "observations": [
                {"pbar": ["1", "2"], "m": "4", "points": [["4", "0"], ["1", "3"]]},
                {"pbar": ["2", "1"], "m": "4", "points": [["0", "4"], ["3", "1"]]}
            ]}"#,
        )
        .unwrap();
        assert!(rum_check(&swapped, DEFAULT_SEARCH_BUDGET)
            .unwrap()
            .rationalizable);
        let swapped_negative = load_cross_section(
            r#"{"goods": 2, "observations": [
                {"pbar": ["2", "1"], "m": "4", "points": [["3", "1"], ["3", "1"]]},
                {"pbar": ["1", "2"], "m": "4", "points": [["1", "3"], ["1", "3"]]}
            ]}"#,
        )
        .unwrap();
        assert!(!rum_check(&swapped_negative, DEFAULT_SEARCH_BUDGET)
            .unwrap()
            .rationalizable);
    }

    #[test]
    fn forced_conflicts_keep_the_verdict_negative() {
        // Duplicate the first budget: the violating pair is still forced in
        // every matching.
        let extended = load_cross_section(
            r#"{"goods": 2, "observations": [
                {"pbar": ["1", "2"], "m": "4", "points": [["1", "3"], ["1", "3"]]},
                {"pbar": ["2", "1"], "m": "4", "points": [["3", "1"], ["3", "1"]]},
                {"pbar": ["1", "2"], "m": "4", "points": [["1", "3"], ["1", "3"]]}
            ]}"#,
        )
        .unwrap();
        assert!(!rum_check(&extended, DEFAULT_SEARCH_BUDGET)
            .unwrap()
            .rationalizable);
    }

    #[test]
    fn tiny_budget_reports_unknown() {
        let err = rum_check(&negative_instance(), 1).unwrap_err();
        assert!(matches!(err, Error::SearchBudgetExceeded { .. }));
    }

    #[test]
    fn rpm_certificate_on_the_positive_instance() {
        let cs = positive_instance();
        let (verdict, certificate) =
            rpm_check(&cs, &[0, 1], &AggregatorSpec::arithmetic(), DEFAULT_SEARCH_BUDGET)
                .unwrap();
        assert!(verdict.rationalizable);
        let certificate = certificate.unwrap();
        assert_eq!(certificate.weights, vec![m("1/2"), m("1/2")]);
        // Arithmetic W: Σ λ_i / 2 = 1, so the weighted mean is 1.
        assert_eq!(certificate.weighted_scale_mean(), m("1"));
        assert!(certificate.utility.is_some());
        // The pooled scaled data passes GARP.
        let sorting = verdict.sorting.unwrap();
        let panel = sorting.sorted_panel(&cs).unwrap();
        let prices = certificate.scales.price_system(&panel).unwrap();
        let pooled = pooled_observations(&panel, &prices).unwrap();
        assert!(check_garp(&pooled).satisfied);
        assert!(certificate.utility.unwrap().verify(&pooled));
    }

    #[test]
    fn rpm_on_negative_instance_yields_no_certificate() {
        let (verdict, certificate) = rpm_check(
            &negative_instance(),
            &[0, 1],
            &AggregatorSpec::arithmetic(),
            DEFAULT_SEARCH_BUDGET,
        )
        .unwrap();
        assert!(!verdict.rationalizable);
        assert!(certificate.is_none());
    }

    #[test]
    fn rpm_single_stream_is_plain_utility_construction() {
        let cs = load_cross_section(
            r#"{"goods": 2, "observations": [
                {"pbar": ["1", "2"], "m": "4", "points": [["2", "2"]]},
                {"pbar": ["2", "1"], "m": "6", "points": [["3", "3"]]}
            ]}"#,
        )
        .unwrap();
        let (verdict, certificate) =
            rpm_check(&cs, &[0, 1], &AggregatorSpec::arithmetic(), DEFAULT_SEARCH_BUDGET)
                .unwrap();
        assert!(verdict.rationalizable);
        let certificate = certificate.unwrap();
        assert_eq!(certificate.scales.lambda, vec![m("1")]);
        assert_eq!(certificate.weights, vec![m("1")]);
    }

    #[test]
    fn rpm_from_rum_discrete_enforces_weighted_consistency() {
        let certificate =
            rpm_from_rum_discrete(&positive_instance(), &[0, 1], DEFAULT_SEARCH_BUDGET).unwrap();
        assert_eq!(certificate.weights, vec![m("1/2"), m("1/2")]);
        assert_eq!(certificate.weighted_scale_mean(), m("1"));
    }

    #[test]
    fn rpm_from_rum_discrete_rejects_refuted_instances() {
        let err = rpm_from_rum_discrete(&negative_instance(), &[0, 1], DEFAULT_SEARCH_BUDGET)
            .unwrap_err();
        assert!(matches!(err, Error::NotRumRationalizable { .. }));
    }

    #[test]
    fn au_rum_accepts_gapp_consistent_sortings() {
        let cs = positive_instance();
        let (verdict, certificate) = au_rum_check(
            &cs,
            &BehavioralExpenditure::misperception(),
            &AggregatorSpec::arithmetic(),
            DEFAULT_SEARCH_BUDGET,
        )
        .unwrap();
        assert!(verdict.rationalizable);
        let certificate = certificate.unwrap();
        assert!(certificate.utility.is_none());
        assert_eq!(
            AggregatorSpec::arithmetic()
                .eval(&certificate.scales.lambda)
                .unwrap(),
            m("1")
        );
    }

    #[test]
    fn au_rum_rejects_gapp_two_cycles_in_every_sorting() {
        // Equal totals make the mutual strict preference a GAPP two-cycle
        // as well, and duplicated points force it into every sorting.
        let (verdict, certificate) = au_rum_check(
            &negative_instance(),
            &BehavioralExpenditure::misperception(),
            &AggregatorSpec::arithmetic(),
            DEFAULT_SEARCH_BUDGET,
        )
        .unwrap();
        assert!(!verdict.rationalizable);
        assert!(certificate.is_none());
    }

    #[test]
    fn au_rum_single_budget_is_trivial() {
        let cs = load_cross_section(
            r#"{"goods": 2, "observations": [
                {"pbar": ["1", "2"], "m": "4", "points": [["1", "3"], ["4", "0"]]}
            ]}"#,
        )
        .unwrap();
        let (verdict, certificate) = au_rum_check(
            &cs,
            &BehavioralExpenditure::misperception(),
            &AggregatorSpec::arithmetic(),
            DEFAULT_SEARCH_BUDGET,
        )
        .unwrap();
        assert!(verdict.rationalizable);
        assert!(certificate.is_some());
    }

    fn example_panel() -> PanelDataset {
        load_panel(crate::dataset::tests::APPENDIX_EXAMPLE).unwrap()
    }

    #[test]
    fn worked_example_is_refuted_by_the_interval_argument() {
        let outcome = check_one_good_refutation(
            &example_panel(),
            0,
            &AggregatorSpec::arithmetic(),
            DEFAULT_SEARCH_BUDGET,
        )
        .unwrap();
        match outcome {
            OneGoodOutcome::Refuted {
                trace:
                    RefutationTrace::Interval {
                        good,
                        observations,
                        violation_band,
                        pigeonhole_interval,
                        pigeonhole_ratio_band,
                    },
            } => {
                assert_eq!(good, 0);
                assert_eq!(observations, vec![1, 2, 3]);
                assert_eq!(violation_band, (m("1/5"), m("5")));
                assert_eq!(pigeonhole_interval, (m("1"), m("2")));
                assert_eq!(pigeonhole_ratio_band, (m("1/2"), m("2")));
            }
            other => panic!("expected an interval refutation, got {other:?}"),
        }
        // Any other good is refuted by the same symmetry.
        for good in 1..4 {
            assert!(check_one_good_refutation(
                &example_panel(),
                good,
                &AggregatorSpec::arithmetic(),
                DEFAULT_SEARCH_BUDGET,
            )
            .unwrap()
            .is_refuted());
        }
    }

    #[test]
    fn two_good_heterogeneity_rationalizes_the_example() {
        // The same panel the one-good argument refutes is rationalized once
        // two goods are free.
        use crate::constructions::{prop1_rationalize, AggregatorGrid};
        let panel = example_panel();
        let grid = AggregatorGrid::uniform(AggregatorSpec::arithmetic(), 4, 4);
        let (prices, _) = prop1_rationalize(&panel, &grid).unwrap();
        let pooled = pooled_observations(&panel, &prices).unwrap();
        assert!(check_garp(&pooled).satisfied);
    }

    #[test]
    fn jointly_consistent_panel_is_not_refuted() {
        let panel = load_panel(
            r#"{"goods": 2, "consumers": 2, "observations": [
                {"pbar": ["1", "2"], "expenditures": [["2", "2"], ["1", "3"]]},
                {"pbar": ["2", "1"], "expenditures": [["3", "3"], ["3/2", "9/2"]]}
            ]}"#,
        )
        .unwrap();
        let outcome = check_one_good_refutation(
            &panel,
            0,
            &AggregatorSpec::arithmetic(),
            DEFAULT_SEARCH_BUDGET,
        )
        .unwrap();
        match outcome {
            OneGoodOutcome::NotRefuted { prices } => {
                // λ = 1 certifies: the returned prices are the index prices.
                assert_eq!(prices[0], vec![m("1"), m("2")]);
            }
            other => panic!("expected non-refutation, got {other:?}"),
        }
    }

    #[test]
    fn grid_search_finds_an_escape_when_one_exists() {
        // Both agents violate GARP at the index prices, but extreme good-1
        // price splits let both escape the violation band.
        let panel = load_panel(
            r#"{"goods": 2, "consumers": 2, "observations": [
                {"pbar": ["2", "1"], "expenditures": [["10", "1"], ["10", "1"]]},
                {"pbar": ["1", "2"], "expenditures": [["1", "10"], ["1", "10"]]}
            ]}"#,
        )
        .unwrap();
        let outcome = check_one_good_refutation(
            &panel,
            0,
            &AggregatorSpec::arithmetic(),
            DEFAULT_SEARCH_BUDGET,
        )
        .unwrap();
        match outcome {
            OneGoodOutcome::NotRefuted { prices } => {
                for agent in 0..2 {
                    assert!(
                        agent_stream_satisfied(&panel, agent, 0, &prices[agent]).unwrap(),
                        "agent {agent} stream must replay"
                    );
                }
                // Consistency in expectation holds at every observation.
                for t in 0..2 {
                    assert_eq!(
                        (&prices[0][t] + &prices[1][t]) / Money::from_int(2),
                        panel.price_index(t)[0]
                    );
                }
            }
            other => panic!("expected non-refutation, got {other:?}"),
        }
    }

    #[test]
    fn three_agents_report_unknown() {
        let panel = load_panel(
            r#"{"goods": 2, "consumers": 3, "observations": [
                {"pbar": ["1", "2"], "expenditures": [["1", "3"], ["2", "2"], ["3", "1"]]},
                {"pbar": ["2", "1"], "expenditures": [["3", "1"], ["3", "3"], ["1", "3"]]}
            ]}"#,
        )
        .unwrap();
        let outcome = check_one_good_refutation(
            &panel,
            0,
            &AggregatorSpec::arithmetic(),
            DEFAULT_SEARCH_BUDGET,
        )
        .unwrap();
        assert!(matches!(outcome, OneGoodOutcome::Unknown { .. }));
    }

    #[test]
    fn interval_argument_rejects_other_shapes() {
        let panel = load_panel(
            r#"{"goods": 2, "consumers": 2, "observations": [
                {"pbar": ["1", "2"], "expenditures": [["2", "2"], ["1", "3"]]}
            ]}"#,
        )
        .unwrap();
        assert!(matches!(
            one_good_interval_argument(&panel, 0),
            Err(Error::UnsupportedShape { .. })
        ));
    }
}
