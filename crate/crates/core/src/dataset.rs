//! Canonical data model: expenditure panels, cross sections, bundles, and
//! idiosyncratic price systems, with exact ingestion and validation.
//!
//! A panel records, for each consumer `i` and observation `t`, the
//! expenditure allocation over `K` goods together with the per-observation
//! price indices. Total expenditure is always derived from the allocation,
//! never stored. All types are immutable after construction.

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::Error;
use crate::exact::Money;

/// Consumption bundle: a K-vector of exact nonnegative quantities.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Bundle(pub Vec<Money>);

impl Bundle {
    pub fn quantities(&self) -> &[Money] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The implied consumption bundle `x(e, p) = (e_k / p_k)_k`.
///
/// Requires `p ≫ 0`; zero expenditures yield zero quantities.
pub fn implied_bundle(expenditure: &[Money], prices: &[Money]) -> Result<Bundle, Error> {
    if expenditure.len() != prices.len() {
        return Err(Error::domain(format!(
            "expenditure has {} components but prices have {}",
            expenditure.len(),
            prices.len()
        )));
    }
    for (k, p) in prices.iter().enumerate() {
        if !p.is_positive() {
            return Err(Error::NonPositivePrice { index: k });
        }
    }
    Ok(Bundle(
        expenditure.iter().zip(prices).map(|(e, p)| e / p).collect(),
    ))
}

/// Expenditure panel: `N` consumers observed `T` times over `K` goods, plus
/// per-observation price indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanelDataset {
    n_consumers: usize,
    n_observations: usize,
    n_goods: usize,
    /// `expenditures[i][t][k]` = spending of consumer `i` on good `k` at `t`.
    expenditures: Vec<Vec<Vec<Money>>>,
    /// `price_index[t][k]` = index price of good `k` at observation `t`.
    price_index: Vec<Vec<Money>>,
}

impl PanelDataset {
    /// Validates shapes and invariants: all expenditures nonnegative with a
    /// strictly positive total per `(i, t)`, all index prices strictly
    /// positive.
    pub fn new(
        expenditures: Vec<Vec<Vec<Money>>>,
        price_index: Vec<Vec<Money>>,
    ) -> Result<Self, Error> {
        let n_consumers = expenditures.len();
        if n_consumers == 0 {
            return Err(Error::schema("panel has no consumers"));
        }
        let n_observations = expenditures[0].len();
        if n_observations == 0 {
            return Err(Error::schema("panel has no observations"));
        }
        if price_index.len() != n_observations {
            return Err(Error::schema(format!(
                "panel has {} observations but {} price rows",
                n_observations,
                price_index.len()
            )));
        }
        let n_goods = price_index[0].len();
        if n_goods == 0 {
            return Err(Error::schema("panel has no goods"));
        }
        for (t, row) in price_index.iter().enumerate() {
            if row.len() != n_goods {
                return Err(Error::schema(format!(
                    "price row {t} has {} entries, expected {n_goods}",
                    row.len()
                )));
            }
            for (k, p) in row.iter().enumerate() {
                if !p.is_positive() {
                    return Err(Error::domain(format!(
                        "price index must be strictly positive; violated at (t={t}, k={k})"
                    )));
                }
            }
        }
        for (i, per_obs) in expenditures.iter().enumerate() {
            if per_obs.len() != n_observations {
                return Err(Error::schema(format!(
                    "consumer {i} has {} observations, expected {n_observations}",
                    per_obs.len()
                )));
            }
            for (t, row) in per_obs.iter().enumerate() {
                if row.len() != n_goods {
                    return Err(Error::schema(format!(
                        "expenditure row (i={i}, t={t}) has {} entries, expected {n_goods}",
                        row.len()
                    )));
                }
                let mut total = Money::zero();
                for (k, e) in row.iter().enumerate() {
                    if e.is_negative() {
                        return Err(Error::domain(format!(
                            "negative expenditure at (i={i}, t={t}, k={k})"
                        )));
                    }
                    total = total + e;
                }
                if !total.is_positive() {
                    return Err(Error::domain(format!(
                        "total expenditure must be strictly positive; violated at (i={i}, t={t})"
                    )));
                }
            }
        }
        Ok(PanelDataset {
            n_consumers,
            n_observations,
            n_goods,
            expenditures,
            price_index,
        })
    }

    pub fn n_consumers(&self) -> usize {
        self.n_consumers
    }

    pub fn n_observations(&self) -> usize {
        self.n_observations
    }

    pub fn n_goods(&self) -> usize {
        self.n_goods
    }

    pub fn expenditure(&self, consumer: usize, obs: usize) -> &[Money] {
        &self.expenditures[consumer][obs]
    }

    pub fn price_index(&self, obs: usize) -> &[Money] {
        &self.price_index[obs]
    }

    /// Total expenditure `m^{i,t} = Σ_k e^{i,t}_k` (derived, never stored).
    pub fn total_spend(&self, consumer: usize, obs: usize) -> Money {
        self.expenditures[consumer][obs].iter().sum()
    }

    /// Bundle implied by the index prices, `x(e^{i,t}, p̄^t)`.
    pub fn bundle_at_index(&self, consumer: usize, obs: usize) -> Bundle {
        implied_bundle(self.expenditure(consumer, obs), self.price_index(obs))
            .expect("validated panel has positive index prices")
    }

    pub fn to_json(&self) -> Value {
        json!({
            "goods": self.n_goods,
            "consumers": self.n_consumers,
            "observations": (0..self.n_observations).map(|t| {
                json!({
                    "pbar": self.price_index[t].iter().map(money_json).collect::<Vec<_>>(),
                    "expenditures": (0..self.n_consumers).map(|i| {
                        self.expenditures[i][t].iter().map(money_json).collect::<Vec<_>>()
                    }).collect::<Vec<_>>(),
                })
            }).collect::<Vec<_>>(),
        })
    }
}

fn money_json(m: &Money) -> Value {
    Value::String(m.to_string())
}

/// Candidate idiosyncratic prices `p^{i,t}`, optionally declared stable
/// (`p^{i,t}_k = λ_{i,k}·p̄^t_k`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeterogeneousPrices {
    /// `prices[i][t][k]`, all strictly positive.
    prices: Vec<Vec<Vec<Money>>>,
    /// Good-specific scale factors `λ_{i,k}` when the system is stable.
    stable_scales: Option<Vec<Vec<Money>>>,
}

impl HeterogeneousPrices {
    pub fn new(prices: Vec<Vec<Vec<Money>>>) -> Result<Self, Error> {
        for (i, per_obs) in prices.iter().enumerate() {
            for (t, row) in per_obs.iter().enumerate() {
                for (k, p) in row.iter().enumerate() {
                    if !p.is_positive() {
                        return Err(Error::domain(format!(
                            "idiosyncratic price must be strictly positive; violated at (i={i}, t={t}, k={k})"
                        )));
                    }
                }
            }
        }
        Ok(HeterogeneousPrices {
            prices,
            stable_scales: None,
        })
    }

    /// Builds the stable system `p^{i,t}_k = λ_{i,k}·p̄^t_k` for `panel`.
    pub fn stable(panel: &PanelDataset, scales: Vec<Vec<Money>>) -> Result<Self, Error> {
        if scales.len() != panel.n_consumers() {
            return Err(Error::schema(format!(
                "scale matrix has {} rows, expected {}",
                scales.len(),
                panel.n_consumers()
            )));
        }
        for (i, row) in scales.iter().enumerate() {
            if row.len() != panel.n_goods() {
                return Err(Error::schema(format!(
                    "scale row {i} has {} entries, expected {}",
                    row.len(),
                    panel.n_goods()
                )));
            }
            for (k, l) in row.iter().enumerate() {
                if !l.is_positive() {
                    return Err(Error::domain(format!(
                        "scale factor must be strictly positive; violated at (i={i}, k={k})"
                    )));
                }
            }
        }
        let prices = (0..panel.n_consumers())
            .map(|i| {
                (0..panel.n_observations())
                    .map(|t| {
                        (0..panel.n_goods())
                            .map(|k| &scales[i][k] * &panel.price_index(t)[k])
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(HeterogeneousPrices {
            prices,
            stable_scales: Some(scales),
        })
    }

    pub fn n_consumers(&self) -> usize {
        self.prices.len()
    }

    pub fn price(&self, consumer: usize, obs: usize) -> &[Money] {
        &self.prices[consumer][obs]
    }

    pub fn stable_scales(&self) -> Option<&Vec<Vec<Money>>> {
        self.stable_scales.as_ref()
    }

    /// Checks the stability identity against a paired panel, exactly.
    pub fn verify_stable(&self, panel: &PanelDataset) -> bool {
        match &self.stable_scales {
            None => false,
            Some(scales) => (0..panel.n_consumers()).all(|i| {
                (0..panel.n_observations()).all(|t| {
                    (0..panel.n_goods())
                        .all(|k| self.prices[i][t][k] == &scales[i][k] * &panel.price_index(t)[k])
                })
            }),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "prices": self.prices.iter().map(|per_obs| {
                per_obs.iter().map(|row| row.iter().map(money_json).collect::<Vec<_>>()).collect::<Vec<_>>()
            }).collect::<Vec<_>>(),
            "stable_scales": self.stable_scales.as_ref().map(|s| {
                s.iter().map(|row| row.iter().map(money_json).collect::<Vec<_>>()).collect::<Vec<_>>()
            }),
        })
    }
}

/// One budget of a cross-sectional data set: the price index, the common
/// total, and the `N` observed expenditure points (optionally weighted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossSectionObservation {
    pub price_index: Vec<Money>,
    pub total: Money,
    pub points: Vec<Vec<Money>>,
    pub weights: Option<Vec<Money>>,
}

/// Repeated cross sections: `T` budgets, each with the same number of
/// anonymous expenditure points summing exactly to the budget total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossSection {
    n_goods: usize,
    observations: Vec<CrossSectionObservation>,
}

impl CrossSection {
    pub fn new(observations: Vec<CrossSectionObservation>) -> Result<Self, Error> {
        if observations.is_empty() {
            return Err(Error::schema("cross section has no observations"));
        }
        let n_goods = observations[0].price_index.len();
        if n_goods == 0 {
            return Err(Error::schema("cross section has no goods"));
        }
        let n_points = observations[0].points.len();
        if n_points == 0 {
            return Err(Error::schema("cross section has no points"));
        }
        for (t, obs) in observations.iter().enumerate() {
            if obs.price_index.len() != n_goods {
                return Err(Error::schema(format!(
                    "observation {t} has {} prices, expected {n_goods}",
                    obs.price_index.len()
                )));
            }
            for (k, p) in obs.price_index.iter().enumerate() {
                if !p.is_positive() {
                    return Err(Error::domain(format!(
                        "price index must be strictly positive; violated at (t={t}, k={k})"
                    )));
                }
            }
            if !obs.total.is_positive() {
                return Err(Error::domain(format!(
                    "budget total must be strictly positive; violated at t={t}"
                )));
            }
            if obs.points.len() != n_points {
                return Err(Error::domain(format!(
                    "every budget must carry the same number of points; observation {t} has {}, expected {n_points}",
                    obs.points.len()
                )));
            }
            for (j, point) in obs.points.iter().enumerate() {
                if point.len() != n_goods {
                    return Err(Error::schema(format!(
                        "point (t={t}, j={j}) has {} entries, expected {n_goods}",
                        point.len()
                    )));
                }
                let mut total = Money::zero();
                for (k, e) in point.iter().enumerate() {
                    if e.is_negative() {
                        return Err(Error::domain(format!(
                            "negative expenditure at (t={t}, j={j}, k={k})"
                        )));
                    }
                    total = total + e;
                }
                if total != obs.total {
                    return Err(Error::domain(format!(
                        "point (t={t}, j={j}) sums to {total}, expected the budget total {}",
                        obs.total
                    )));
                }
            }
            if let Some(weights) = &obs.weights {
                if weights.len() != n_points {
                    return Err(Error::schema(format!(
                        "observation {t} has {} weights, expected {n_points}",
                        weights.len()
                    )));
                }
                let mut total = Money::zero();
                for (j, w) in weights.iter().enumerate() {
                    if !w.is_positive() {
                        return Err(Error::domain(format!(
                            "weights must be strictly positive; violated at (t={t}, j={j})"
                        )));
                    }
                    total = total + w;
                }
                if total != Money::one() {
                    return Err(Error::domain(format!(
                        "weights at observation {t} sum to {total}, expected 1"
                    )));
                }
            }
        }
        Ok(CrossSection {
            n_goods,
            observations,
        })
    }

    pub fn n_goods(&self) -> usize {
        self.n_goods
    }

    pub fn n_observations(&self) -> usize {
        self.observations.len()
    }

    /// Number of points per budget (the same for every observation).
    pub fn n_points(&self) -> usize {
        self.observations[0].points.len()
    }

    pub fn observation(&self, t: usize) -> &CrossSectionObservation {
        &self.observations[t]
    }

    pub fn observations(&self) -> &[CrossSectionObservation] {
        &self.observations
    }

    pub fn to_json(&self) -> Value {
        json!({
            "goods": self.n_goods,
            "observations": self.observations.iter().map(|obs| {
                let mut map = Map::new();
                map.insert("pbar".into(), Value::Array(obs.price_index.iter().map(money_json).collect()));
                map.insert("m".into(), money_json(&obs.total));
                map.insert("points".into(), Value::Array(obs.points.iter().map(|p| {
                    Value::Array(p.iter().map(money_json).collect())
                }).collect()));
                if let Some(w) = &obs.weights {
                    map.insert("weights".into(), Value::Array(w.iter().map(money_json).collect()));
                }
                Value::Object(map)
            }).collect::<Vec<_>>(),
        })
    }
}

/// Per-observation bijections from consumer indices to cross-section points.
/// `assignment[t][i]` is the point index σ^t assigns to consumer `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SortingFunction {
    pub assignment: Vec<Vec<usize>>,
}

impl SortingFunction {
    pub fn identity(n_observations: usize, n_points: usize) -> Self {
        SortingFunction {
            assignment: vec![(0..n_points).collect(); n_observations],
        }
    }

    /// Checks every σ^t is a bijection onto the points of its budget.
    pub fn validate(&self, cs: &CrossSection) -> Result<(), Error> {
        if self.assignment.len() != cs.n_observations() {
            return Err(Error::schema(format!(
                "sorting has {} maps, expected {}",
                self.assignment.len(),
                cs.n_observations()
            )));
        }
        let n = cs.n_points();
        for (t, sigma) in self.assignment.iter().enumerate() {
            if sigma.len() != n {
                return Err(Error::schema(format!(
                    "sorting at observation {t} has {} entries, expected {n}",
                    sigma.len()
                )));
            }
            let mut seen = vec![false; n];
            for &j in sigma {
                if j >= n || seen[j] {
                    return Err(Error::domain(format!(
                        "sorting at observation {t} is not a bijection"
                    )));
                }
                seen[j] = true;
            }
        }
        Ok(())
    }

    /// Materializes the sorted panel `ℰ({σ^t})`: consumer `i`'s expenditure
    /// at `t` is the point σ^t(i).
    pub fn sorted_panel(&self, cs: &CrossSection) -> Result<PanelDataset, Error> {
        self.validate(cs)?;
        let n = cs.n_points();
        let expenditures = (0..n)
            .map(|i| {
                (0..cs.n_observations())
                    .map(|t| cs.observation(t).points[self.assignment[t][i]].clone())
                    .collect()
            })
            .collect();
        let price_index = (0..cs.n_observations())
            .map(|t| cs.observation(t).price_index.clone())
            .collect();
        PanelDataset::new(expenditures, price_index)
    }
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

/// Exact number from a JSON value: a decimal/fraction string or a JSON
/// number (serde_json is built with arbitrary precision, so the literal
/// text survives and parses exactly).
pub fn value_to_money(v: &Value, at: &str) -> Result<Money, Error> {
    match v {
        Value::String(s) => Money::parse(s),
        Value::Number(n) => Money::parse(&n.to_string()),
        other => Err(Error::schema(format!(
            "expected a number or numeric string at {at}, found {other}"
        ))),
    }
}

/// Exact number row from a JSON array.
pub fn money_row(v: &Value, at: &str) -> Result<Vec<Money>, Error> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::schema(format!("expected an array at {at}")))?;
    arr.iter()
        .enumerate()
        .map(|(k, x)| value_to_money(x, &format!("{at}[{k}]")))
        .collect()
}

pub(crate) fn get<'a>(obj: &'a Value, key: &str, at: &str) -> Result<&'a Value, Error> {
    obj.get(key)
        .ok_or_else(|| Error::schema(format!("missing `{key}` at {at}")))
}

pub(crate) fn usize_field(obj: &Value, key: &str, at: &str) -> Result<usize, Error> {
    get(obj, key, at)?
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| Error::schema(format!("`{key}` at {at} must be a nonnegative integer")))
}

/// Parses a panel document:
/// `{"goods": K, "consumers": N, "observations": [{"pbar": [...], "expenditures": [[...]*N]}*T]}`.
/// Decimals may be strings or JSON numbers with finite decimal expansion.
pub fn load_panel(source: &str) -> Result<PanelDataset, Error> {
    let doc: Value = serde_json::from_str(source)
        .map_err(|e| Error::schema(format!("invalid JSON: {e}")))?;
    let n_goods = usize_field(&doc, "goods", "document")?;
    let n_consumers = usize_field(&doc, "consumers", "document")?;
    let observations = get(&doc, "observations", "document")?
        .as_array()
        .ok_or_else(|| Error::schema("`observations` must be an array"))?;

    let mut price_index = Vec::with_capacity(observations.len());
    let mut expenditures = vec![Vec::with_capacity(observations.len()); n_consumers];
    for (t, obs) in observations.iter().enumerate() {
        let at = format!("observations[{t}]");
        let pbar = money_row(get(obs, "pbar", &at)?, &format!("{at}.pbar"))?;
        if pbar.len() != n_goods {
            return Err(Error::schema(format!(
                "{at}.pbar has {} entries, expected {n_goods}",
                pbar.len()
            )));
        }
        price_index.push(pbar);
        let rows = get(obs, "expenditures", &at)?
            .as_array()
            .ok_or_else(|| Error::schema(format!("{at}.expenditures must be an array")))?;
        if rows.len() != n_consumers {
            return Err(Error::schema(format!(
                "{at}.expenditures has {} rows, expected {n_consumers}",
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            let row = money_row(row, &format!("{at}.expenditures[{i}]"))?;
            if row.len() != n_goods {
                return Err(Error::schema(format!(
                    "{at}.expenditures[{i}] has {} entries, expected {n_goods}",
                    row.len()
                )));
            }
            expenditures[i].push(row);
        }
    }
    PanelDataset::new(expenditures, price_index)
}

/// Parses a cross-section document:
/// `{"goods": K, "observations": [{"pbar": [...], "m": dec, "points": [[...]*N], "weights"?: [...]}*T]}`.
pub fn load_cross_section(source: &str) -> Result<CrossSection, Error> {
    let doc: Value = serde_json::from_str(source)
        .map_err(|e| Error::schema(format!("invalid JSON: {e}")))?;
    let n_goods = usize_field(&doc, "goods", "document")?;
    let observations = get(&doc, "observations", "document")?
        .as_array()
        .ok_or_else(|| Error::schema("`observations` must be an array"))?;
    let mut parsed = Vec::with_capacity(observations.len());
    for (t, obs) in observations.iter().enumerate() {
        let at = format!("observations[{t}]");
        let price_index = money_row(get(obs, "pbar", &at)?, &format!("{at}.pbar"))?;
        if price_index.len() != n_goods {
            return Err(Error::schema(format!(
                "{at}.pbar has {} entries, expected {n_goods}",
                price_index.len()
            )));
        }
        let total = value_to_money(get(obs, "m", &at)?, &format!("{at}.m"))?;
        let points = get(obs, "points", &at)?
            .as_array()
            .ok_or_else(|| Error::schema(format!("{at}.points must be an array")))?
            .iter()
            .enumerate()
            .map(|(j, p)| money_row(p, &format!("{at}.points[{j}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let weights = match obs.get("weights") {
            None | Some(Value::Null) => None,
            Some(w) => Some(money_row(w, &format!("{at}.weights"))?),
        };
        parsed.push(CrossSectionObservation {
            price_index,
            total,
            points,
            weights,
        });
    }
    CrossSection::new(parsed)
}

/// CSV ingestion: an expenditure file with header `i,t,e_1..e_K` (one row per
/// consumer-observation pair, indices 1-based) and a prices file with header
/// `t,p_1..p_K`.
pub fn load_panel_csv(expenditures_csv: &str, prices_csv: &str) -> Result<PanelDataset, Error> {
    let mut price_rows: Vec<(usize, Vec<Money>)> = Vec::new();
    let mut reader = csv::Reader::from_reader(prices_csv.as_bytes());
    for record in reader.records() {
        let record = record.map_err(|e| Error::schema(format!("prices csv: {e}")))?;
        let mut fields = record.iter();
        let t: usize = fields
            .next()
            .ok_or_else(|| Error::schema("prices csv: empty row"))?
            .trim()
            .parse()
            .map_err(|_| Error::schema("prices csv: `t` must be an integer"))?;
        let prices = fields
            .map(Money::parse)
            .collect::<Result<Vec<_>, _>>()?;
        price_rows.push((t, prices));
    }
    if price_rows.is_empty() {
        return Err(Error::schema("prices csv has no data rows"));
    }
    let n_observations = price_rows.iter().map(|(t, _)| *t).max().unwrap();
    let n_goods = price_rows[0].1.len();
    let mut price_index = vec![None; n_observations];
    for (t, prices) in price_rows {
        if t == 0 || t > n_observations {
            return Err(Error::schema(format!("prices csv: t={t} out of range")));
        }
        if prices.len() != n_goods {
            return Err(Error::schema(format!(
                "prices csv: row t={t} has {} prices, expected {n_goods}",
                prices.len()
            )));
        }
        if price_index[t - 1].replace(prices).is_some() {
            return Err(Error::schema(format!("prices csv: duplicate row for t={t}")));
        }
    }
    let price_index: Vec<Vec<Money>> = price_index
        .into_iter()
        .enumerate()
        .map(|(t, row)| row.ok_or_else(|| Error::schema(format!("prices csv: missing t={}", t + 1))))
        .collect::<Result<_, _>>()?;

    let mut cells: Vec<(usize, usize, Vec<Money>)> = Vec::new();
    let mut reader = csv::Reader::from_reader(expenditures_csv.as_bytes());
    for record in reader.records() {
        let record = record.map_err(|e| Error::schema(format!("expenditures csv: {e}")))?;
        let mut fields = record.iter();
        let i: usize = fields
            .next()
            .ok_or_else(|| Error::schema("expenditures csv: empty row"))?
            .trim()
            .parse()
            .map_err(|_| Error::schema("expenditures csv: `i` must be an integer"))?;
        let t: usize = fields
            .next()
            .ok_or_else(|| Error::schema("expenditures csv: missing `t`"))?
            .trim()
            .parse()
            .map_err(|_| Error::schema("expenditures csv: `t` must be an integer"))?;
        let row = fields
            .map(Money::parse)
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != n_goods {
            return Err(Error::schema(format!(
                "expenditures csv: row (i={i}, t={t}) has {} entries, expected {n_goods}",
                row.len()
            )));
        }
        cells.push((i, t, row));
    }
    let n_consumers = cells.iter().map(|(i, _, _)| *i).max().unwrap_or(0);
    if n_consumers == 0 {
        return Err(Error::schema("expenditures csv has no data rows"));
    }
    let mut expenditures = vec![vec![None; n_observations]; n_consumers];
    for (i, t, row) in cells {
        if i == 0 || t == 0 || t > n_observations {
            return Err(Error::schema(format!(
                "expenditures csv: indices (i={i}, t={t}) out of range"
            )));
        }
        if expenditures[i - 1][t - 1].replace(row).is_some() {
            return Err(Error::schema(format!(
                "expenditures csv: duplicate row for (i={i}, t={t})"
            )));
        }
    }
    let expenditures: Vec<Vec<Vec<Money>>> = expenditures
        .into_iter()
        .enumerate()
        .map(|(i, per_obs)| {
            per_obs
                .into_iter()
                .enumerate()
                .map(|(t, row)| {
                    row.ok_or_else(|| {
                        Error::schema(format!(
                            "expenditures csv: missing row for (i={}, t={})",
                            i + 1,
                            t + 1
                        ))
                    })
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    PanelDataset::new(expenditures, price_index)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::exact::dot;
    use proptest::prelude::*;

    fn m(s: &str) -> Money {
        Money::parse(s).unwrap()
    }

    fn row(xs: &[&str]) -> Vec<Money> {
        xs.iter().map(|s| m(s)).collect()
    }

    pub(crate) const APPENDIX_EXAMPLE: &str =
        include_str!("../tests/fixtures/appendix_example.json");

    #[test]
    fn implied_bundle_divides_componentwise() {
        // Worked-example observation: e = (10,1,1,1) at prices (2,1,1,1).
        let x = implied_bundle(&row(&["10", "1", "1", "1"]), &row(&["2", "1", "1", "1"])).unwrap();
        assert_eq!(x.quantities(), row(&["5", "1", "1", "1"]).as_slice());

        let zero = implied_bundle(&row(&["0", "0"]), &row(&["3", "7"])).unwrap();
        assert_eq!(zero.quantities(), row(&["0", "0"]).as_slice());

        let x = implied_bundle(&row(&["1", "3"]), &row(&["1", "2"])).unwrap();
        assert_eq!(x.quantities(), row(&["1", "3/2"]).as_slice());
    }

    #[test]
    fn implied_bundle_rejects_nonpositive_price() {
        let err = implied_bundle(&row(&["1", "1"]), &row(&["1", "0"])).unwrap_err();
        assert!(matches!(err, Error::NonPositivePrice { index: 1 }));
    }

    #[test]
    fn budget_identity_holds() {
        // p · x(e, p) = Σ_k e_k, exactly.
        let e = row(&["1.5", "0", "7/3"]);
        let p = row(&["0.25", "4", "5/7"]);
        let x = implied_bundle(&e, &p).unwrap();
        assert_eq!(dot(&p, x.quantities()), e.iter().sum::<Money>());
    }

    #[test]
    fn loads_appendix_example_panel() {
        let panel = load_panel(APPENDIX_EXAMPLE).unwrap();
        assert_eq!(panel.n_consumers(), 2);
        assert_eq!(panel.n_observations(), 4);
        assert_eq!(panel.n_goods(), 4);
        assert_eq!(panel.total_spend(0, 0), m("13"));
        assert_eq!(panel.expenditure(1, 2)[2], m("10"));
        assert_eq!(panel.price_index(3)[3], m("2"));
    }

    #[test]
    fn rejects_zero_price_index() {
        let doc = r#"{"goods": 2, "consumers": 1, "observations": [
            {"pbar": ["1", "0"], "expenditures": [["1", "1"]]}
        ]}"#;
        assert!(matches!(load_panel(doc), Err(Error::Domain { .. })));
    }

    #[test]
    fn minimal_panel_loads() {
        let doc = r#"{"goods": 1, "consumers": 1, "observations": [
            {"pbar": [2], "expenditures": [["3"]]}
        ]}"#;
        let panel = load_panel(doc).unwrap();
        assert_eq!(panel.n_consumers(), 1);
        assert_eq!(panel.n_observations(), 1);
        assert_eq!(panel.bundle_at_index(0, 0).quantities(), &[m("3/2")]);
    }

    #[test]
    fn json_numbers_parse_exactly() {
        let doc = r#"{"goods": 1, "consumers": 1, "observations": [
            {"pbar": [0.1], "expenditures": [[0.3]]}
        ]}"#;
        let panel = load_panel(doc).unwrap();
        assert_eq!(panel.price_index(0)[0], m("1/10"));
        assert_eq!(panel.bundle_at_index(0, 0).quantities(), &[m("3")]);
    }

    #[test]
    fn cross_section_rejects_wrong_total() {
        let doc = r#"{"goods": 2, "observations": [
            {"pbar": ["1", "2"], "m": "4", "points": [["1", "2"]]}
        ]}"#;
        assert!(matches!(load_cross_section(doc), Err(Error::Domain { .. })));
    }

    #[test]
    fn single_budget_single_point_cross_section() {
        let doc = r#"{"goods": 2, "observations": [
            {"pbar": ["1", "2"], "m": "4", "points": [["1", "3"]]}
        ]}"#;
        let cs = load_cross_section(doc).unwrap();
        assert_eq!(cs.n_observations(), 1);
        assert_eq!(cs.n_points(), 1);
    }

    #[test]
    fn figure_one_style_instance_loads() {
        let doc = r#"{"goods": 2, "observations": [
            {"pbar": ["1", "2"], "m": "4", "points": [["1", "3"], ["4", "0"]]},
            {"pbar": ["2", "1"], "m": "4", "points": [["3", "1"], ["0", "4"]]}
        ]}"#;
        let cs = load_cross_section(doc).unwrap();
        assert_eq!(cs.n_observations(), 2);
        assert_eq!(cs.n_points(), 2);
    }

    #[test]
    fn sorting_function_rejects_non_bijection() {
        let doc = r#"{"goods": 2, "observations": [
            {"pbar": ["1", "2"], "m": "4", "points": [["1", "3"], ["4", "0"]]}
        ]}"#;
        let cs = load_cross_section(doc).unwrap();
        let bad = SortingFunction {
            assignment: vec![vec![0, 0]],
        };
        assert!(bad.validate(&cs).is_err());
        let good = SortingFunction::identity(1, 2);
        assert!(good.validate(&cs).is_ok());
    }

    #[test]
    fn panel_round_trip_via_json() {
        let panel = load_panel(APPENDIX_EXAMPLE).unwrap();
        let text = panel.to_json().to_string();
        let back = load_panel(&text).unwrap();
        assert_eq!(panel, back);
    }

    #[test]
    fn csv_ingestion_matches_json() {
        let expenditures = "i,t,e_1,e_2\n1,1,1,3\n1,2,3,1\n";
        let prices = "t,p_1,p_2\n1,1,2\n2,2,1\n";
        let panel = load_panel_csv(expenditures, prices).unwrap();
        assert_eq!(panel.n_consumers(), 1);
        assert_eq!(panel.n_observations(), 2);
        assert_eq!(panel.expenditure(0, 1), row(&["3", "1"]).as_slice());
        assert_eq!(panel.price_index(0), row(&["1", "2"]).as_slice());
    }

    proptest! {
        #[test]
        fn cross_section_round_trip(seed in 0u64..500) {
            // Small seeded instance: 2 goods, 2 budgets, 2 points each.
            let a = (seed % 7 + 1) as i64;
            let b = (seed % 5 + 1) as i64;
            let total = Money::from_int(a + 3 * b);
            let obs = |p1: i64, p2: i64| CrossSectionObservation {
                price_index: vec![Money::from_int(p1), Money::from_int(p2)],
                total: total.clone(),
                points: vec![
                    vec![Money::from_int(a), Money::from_int(3 * b)],
                    vec![Money::from_int(a + 3 * b), Money::zero()],
                ],
                weights: None,
            };
            let cs = CrossSection::new(vec![obs(1, 2), obs(2, 1)]).unwrap();
            let text = cs.to_json().to_string();
            let back = load_cross_section(&text).unwrap();
            prop_assert_eq!(cs, back);
        }
    }
}
