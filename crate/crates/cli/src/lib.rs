//! Command-line surface: every operation behind one binary with JSON run
//! reports.
//!
//! Exit codes: 0 satisfied/constructed, 1 refuted/violated (the report
//! carries the witness), 2 unknown (search budget exhausted), 3 input
//! error. Reports are deterministic for fixed inputs except for the
//! `wall_clock_ms` field.

use std::fs;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use pricehet::aggregators::AggregatorSpec;
use pricehet::behavioral::BehavioralExpenditure;
use pricehet::constructions::{
    check_stable_invariance, load_disaggregation_input, pooled_observations, prop1_rationalize,
    prop2_disaggregate, prop4_stable_prices, prop6_au_lambdas, scale_transform_verify,
    AggregatorGrid,
};
use pricehet::dataset::{
    load_cross_section, load_panel, load_panel_csv, money_row, value_to_money, PanelDataset,
};
use pricehet::error::Error;
use pricehet::exact::Money;
use pricehet::patches::compute_patches;
use pricehet::revpref::{
    afriat_construct, check_gapp, check_garp, Observation, PriceSystem,
};
use pricehet::rum::{
    au_rum_check, check_one_good_refutation, rpm_check, rum_check, OneGoodOutcome,
    DEFAULT_SEARCH_BUDGET,
};
use pricehet::synth::{generate_panel, Family, GeneratorSpec};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "pricehet",
    about = "Revealed-preference tests for heterogeneous prices and preferences",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed for all randomness (sample grids, synthetic data).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; accepted for interface stability, outputs do not
    /// depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Node budget for the sorting and grid searches.
    #[arg(long, global = true, default_value_t = DEFAULT_SEARCH_BUDGET)]
    search_budget: u64,
    /// Also write the report to this path.
    #[arg(long, global = true)]
    out: Option<String>,
}

#[derive(Args, Debug)]
struct PanelInput {
    /// Panel document (JSON).
    #[arg(long)]
    panel: Option<String>,
    /// Expenditure CSV (`i,t,e_1..e_K`); requires --prices-csv.
    #[arg(long)]
    expenditures_csv: Option<String>,
    /// Prices CSV (`t,p_1..p_K`).
    #[arg(long)]
    prices_csv: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// GARP verdict for one consumer's stream (or all consumers).
    Garp {
        #[command(flatten)]
        input: PanelInput,
        /// 1-based consumer index; all consumers when omitted.
        #[arg(long)]
        consumer: Option<usize>,
    },
    /// GAPP verdict with linear price systems at the index prices.
    Gapp {
        #[command(flatten)]
        input: PanelInput,
        #[arg(long)]
        consumer: Option<usize>,
    },
    /// Utility levels and multipliers for a GARP-consistent stream.
    Afriat {
        #[command(flatten)]
        input: PanelInput,
        #[arg(long)]
        consumer: usize,
    },
    /// Idiosyncratic prices consistent in expectation that rationalize any
    /// panel with two free goods.
    Prop1 {
        #[command(flatten)]
        input: PanelInput,
        #[arg(long, default_value = "arithmetic")]
        aggregator: String,
    },
    /// Demand disaggregation from expenditure allocations and aggregate
    /// demand.
    Prop2 {
        /// Disaggregation document (JSON with `xbar` rows).
        #[arg(long)]
        input: String,
    },
    /// Stable-scaling invariance check: per-consumer verdicts at scaled and
    /// index prices must coincide.
    Prop3Check {
        #[command(flatten)]
        input: PanelInput,
        /// N×K matrix of positive scale factors (JSON).
        #[arg(long)]
        scales: String,
    },
    /// Stable scale factors rationalizing a per-consumer-consistent panel.
    Prop4 {
        #[command(flatten)]
        input: PanelInput,
        /// Scaled goods as a 1-based comma list; all goods when omitted.
        #[arg(long)]
        scale_set: Option<String>,
        #[arg(long, default_value = "arithmetic")]
        aggregator: String,
    },
    /// Behavioral-expenditure scale factors for the augmented-utility model.
    Prop6 {
        #[command(flatten)]
        input: PanelInput,
        #[arg(long, default_value = "misperception")]
        phi: String,
        #[arg(long, default_value = "arithmetic")]
        aggregator: String,
    },
    /// Random-utility rationalizability of a cross section.
    Rum {
        #[arg(long)]
        cross_section: String,
    },
    /// Random-price rationalizability with a stable-scale certificate.
    Rpm {
        #[arg(long)]
        cross_section: String,
        #[arg(long)]
        scale_set: Option<String>,
        #[arg(long, default_value = "arithmetic")]
        aggregator: String,
    },
    /// Augmented-utility rationalizability of a cross section.
    AuRum {
        #[arg(long)]
        cross_section: String,
        #[arg(long, default_value = "misperception")]
        phi: String,
        #[arg(long, default_value = "arithmetic")]
        aggregator: String,
    },
    /// Budget-patch decomposition (data points or geometric enumeration).
    Patches {
        /// Classify the points of this cross section.
        #[arg(long)]
        cross_section: Option<String>,
        /// Enumerate geometrically from a budgets document
        /// `{"goods": K, "budgets": [{"pbar": [...], "m": ...}]}`.
        #[arg(long)]
        budgets: Option<String>,
    },
    /// Can the panel be rationalized with price heterogeneity in one good?
    OneGoodRefute {
        #[command(flatten)]
        input: PanelInput,
        /// 1-based good index.
        #[arg(long)]
        good: usize,
        #[arg(long, default_value = "arithmetic")]
        aggregator: String,
    },
    /// Generate a synthetic panel document.
    Synth {
        /// Generator spec (JSON); overrides the inline flags.
        #[arg(long)]
        spec: Option<String>,
        /// cobb-douglas | leontief | warp-2cycle | adversarial-random
        #[arg(long, default_value = "cobb-douglas")]
        family: String,
        #[arg(long, default_value_t = 2)]
        consumers: usize,
        #[arg(long, default_value_t = 3)]
        observations: usize,
        #[arg(long, default_value_t = 2)]
        goods: usize,
        /// Write the generated panel document here.
        #[arg(long)]
        out_panel: Option<String>,
    },
}

struct Outcome {
    exit: i32,
    body: Map<String, Value>,
}

impl Outcome {
    fn new(exit: i32) -> Self {
        Outcome {
            exit,
            body: Map::new(),
        }
    }

    fn field(mut self, key: &str, value: Value) -> Self {
        self.body.insert(key.to_string(), value);
        self
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Runs the CLI on the given argument list (excluding the binary name) and
/// returns the exit code with the report printed to stdout by `main`.
pub fn execute(args: Vec<String>) -> (i32, Value) {
    let started = Instant::now();
    let mut argv = vec!["pricehet".to_string()];
    argv.extend(args);
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are not errors.
            use clap::error::ErrorKind;
            let exit = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let report = json!({
                "schema": SCHEMA_VERSION,
                "error": { "kind": "usage", "message": e.to_string() },
            });
            return (exit, report);
        }
    };
    if cli.threads == 0 {
        let report = json!({
            "schema": SCHEMA_VERSION,
            "error": { "kind": "usage", "message": "--threads must be at least 1" },
        });
        return (3, report);
    }
    let mut digest_parts: Vec<(String, Vec<u8>)> = Vec::new();
    let result = dispatch(&cli, &mut digest_parts);
    let (exit, mut body) = match result {
        Ok(outcome) => (outcome.exit, outcome.body),
        Err(e) => {
            let exit = match &e {
                Error::SearchBudgetExceeded { .. } => 2,
                Error::GarpViolation { .. } | Error::NotRumRationalizable { .. } => 1,
                Error::Precondition {
                    witness: Some(_), ..
                } => 1,
                _ => 3,
            };
            let mut body = Map::new();
            body.insert(
                "error".into(),
                json!({ "kind": error_kind(&e), "message": e.to_string() }),
            );
            if let Error::Precondition {
                consumer, witness, ..
            } = &e
            {
                body.insert(
                    "witness".into(),
                    json!({ "consumer": consumer, "cycle": witness }),
                );
            }
            if let Error::GarpViolation { witness } = &e {
                body.insert("witness".into(), json!(witness));
            }
            (exit, body)
        }
    };
    let mut report = Map::new();
    report.insert("schema".into(), json!(SCHEMA_VERSION));
    report.insert("command".into(), json!(command_name(&cli.command)));
    if !digest_parts.is_empty() {
        let mut hasher = Sha256::new();
        for (label, bytes) in &digest_parts {
            hasher.update(label.as_bytes());
            hasher.update([0u8]);
            hasher.update(bytes);
        }
        let digest = hasher.finalize();
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        report.insert("input_digest".into(), json!(format!("sha256:{hex}")));
    }
    report.insert(
        "parameters".into(),
        json!({
            "seed": cli.seed,
            "threads": cli.threads,
            "search_budget": cli.search_budget,
        }),
    );
    report.append(&mut body);
    report.insert(
        "wall_clock_ms".into(),
        json!(started.elapsed().as_millis() as u64),
    );
    let report = Value::Object(report);
    if let Some(path) = &cli.out {
        if let Err(e) = fs::write(path, format!("{report:#}\n")) {
            let report = json!({
                "schema": SCHEMA_VERSION,
                "error": { "kind": "io", "message": format!("writing {path}: {e}") },
            });
            return (3, report);
        }
    }
    (exit, report)
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::NonPositivePrice { .. } => "non-positive-price",
        Error::Schema { .. } => "schema",
        Error::Domain { .. } => "domain",
        Error::EvaluatorDomain { .. } => "evaluator-domain",
        Error::GarpViolation { .. } => "garp-violation",
        Error::NoBracket { .. } => "no-bracket",
        Error::Precondition { .. } => "precondition",
        Error::ConstructionFailed { .. } => "construction-failed",
        Error::Regularity { .. } => "regularity",
        Error::SearchBudgetExceeded { .. } => "search-budget-exceeded",
        Error::NotRumRationalizable { .. } => "not-rum-rationalizable",
        Error::UnsupportedDimension { .. } => "unsupported-dimension",
        Error::UnsupportedShape { .. } => "unsupported-shape",
    }
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Garp { .. } => "garp",
        Command::Gapp { .. } => "gapp",
        Command::Afriat { .. } => "afriat",
        Command::Prop1 { .. } => "prop1",
        Command::Prop2 { .. } => "prop2",
        Command::Prop3Check { .. } => "prop3-check",
        Command::Prop4 { .. } => "prop4",
        Command::Prop6 { .. } => "prop6",
        Command::Rum { .. } => "rum",
        Command::Rpm { .. } => "rpm",
        Command::AuRum { .. } => "au-rum",
        Command::Patches { .. } => "patches",
        Command::OneGoodRefute { .. } => "one-good-refute",
        Command::Synth { .. } => "synth",
    }
}

fn read_input(path: &str, digests: &mut Vec<(String, Vec<u8>)>) -> Result<String, Error> {
    let bytes = fs::read(path).map_err(|e| Error::Schema {
        message: format!("reading {path}: {e}"),
    })?;
    digests.push((path.to_string(), bytes.clone()));
    String::from_utf8(bytes).map_err(|_| Error::schema(format!("{path} is not UTF-8")))
}

fn load_panel_input(
    input: &PanelInput,
    digests: &mut Vec<(String, Vec<u8>)>,
) -> Result<PanelDataset, Error> {
    match (&input.panel, &input.expenditures_csv, &input.prices_csv) {
        (Some(path), None, None) => load_panel(&read_input(path, digests)?),
        (None, Some(e_path), Some(p_path)) => {
            let expenditures = read_input(e_path, digests)?;
            let prices = read_input(p_path, digests)?;
            load_panel_csv(&expenditures, &prices)
        }
        _ => Err(Error::schema(
            "pass either --panel or both --expenditures-csv and --prices-csv",
        )),
    }
}

fn parse_aggregator_for_scales(key: &str, n_consumers: usize) -> Result<AggregatorSpec, Error> {
    match key {
        "arithmetic" => Ok(AggregatorSpec::arithmetic()),
        // Equal-weight harmonic mean across consumers.
        "harmonic" => AggregatorSpec::weighted_harmonic(vec![Money::one(); n_consumers]),
        other => Err(Error::schema(format!(
            "unknown aggregator `{other}`; expected `arithmetic` or `harmonic`"
        ))),
    }
}

fn parse_grid(key: &str, panel: &PanelDataset) -> Result<AggregatorGrid, Error> {
    match key {
        "arithmetic" => Ok(AggregatorGrid::uniform(
            AggregatorSpec::arithmetic(),
            panel.n_observations(),
            panel.n_goods(),
        )),
        // Data-weighted harmonic means, one per (observation, good).
        "harmonic" => AggregatorGrid::harmonic_from_panel(panel),
        other => Err(Error::schema(format!(
            "unknown aggregator `{other}`; expected `arithmetic` or `harmonic`"
        ))),
    }
}

fn parse_phi(key: &str) -> Result<BehavioralExpenditure, Error> {
    match key {
        "misperception" => Ok(BehavioralExpenditure::misperception()),
        "reference:clamp" => Ok(BehavioralExpenditure::reference_clamp_at_one()),
        other => Err(Error::schema(format!(
            "unknown behavioral expenditure `{other}`; expected `misperception` \
             or `reference:clamp`"
        ))),
    }
}

/// 1-based comma list of goods to 0-based indices; all goods when absent.
fn parse_scale_set(arg: &Option<String>, n_goods: usize) -> Result<Vec<usize>, Error> {
    match arg {
        None => Ok((0..n_goods).collect()),
        Some(list) => list
            .split(',')
            .map(|part| {
                let index: usize = part
                    .trim()
                    .parse()
                    .map_err(|_| Error::schema(format!("bad good index `{part}`")))?;
                if index == 0 {
                    return Err(Error::schema("good indices are 1-based"));
                }
                Ok(index - 1)
            })
            .collect(),
    }
}

fn one_based_consumer(consumer: usize, panel: &PanelDataset) -> Result<usize, Error> {
    if consumer == 0 || consumer > panel.n_consumers() {
        return Err(Error::schema(format!(
            "consumer {consumer} out of range 1..={}",
            panel.n_consumers()
        )));
    }
    Ok(consumer - 1)
}

fn stream(panel: &PanelDataset, consumer: usize) -> Result<Vec<Observation>, Error> {
    (0..panel.n_observations())
        .map(|t| {
            Observation::new(
                panel.bundle_at_index(consumer, t),
                panel.price_index(t).to_vec(),
            )
        })
        .collect()
}

fn dispatch(cli: &Cli, digests: &mut Vec<(String, Vec<u8>)>) -> Result<Outcome, Error> {
    match &cli.command {
        Command::Garp { input, consumer } => {
            let panel = load_panel_input(input, digests)?;
            let consumers: Vec<usize> = match consumer {
                Some(c) => vec![one_based_consumer(*c, &panel)?],
                None => (0..panel.n_consumers()).collect(),
            };
            let mut verdicts = Map::new();
            let mut all = true;
            for i in consumers {
                let verdict = check_garp(&stream(&panel, i)?);
                all &= verdict.satisfied;
                verdicts.insert((i + 1).to_string(), verdict.to_json());
            }
            Ok(Outcome::new(if all { 0 } else { 1 })
                .field("satisfied", json!(all))
                .field("verdicts", Value::Object(verdicts)))
        }
        Command::Gapp { input, consumer } => {
            let panel = load_panel_input(input, digests)?;
            let consumers: Vec<usize> = match consumer {
                Some(c) => vec![one_based_consumer(*c, &panel)?],
                None => (0..panel.n_consumers()).collect(),
            };
            let mut verdicts = Map::new();
            let mut all = true;
            for i in consumers {
                let points: Vec<_> = stream(&panel, i)?
                    .into_iter()
                    .map(|o| Ok((o.bundle, PriceSystem::linear(o.prices)?)))
                    .collect::<Result<_, Error>>()?;
                let verdict = check_gapp(&points)?;
                all &= verdict.satisfied;
                verdicts.insert((i + 1).to_string(), verdict.to_json());
            }
            Ok(Outcome::new(if all { 0 } else { 1 })
                .field("satisfied", json!(all))
                .field("verdicts", Value::Object(verdicts)))
        }
        Command::Afriat { input, consumer } => {
            let panel = load_panel_input(input, digests)?;
            let i = one_based_consumer(*consumer, &panel)?;
            let observations = stream(&panel, i)?;
            let solution = afriat_construct(&observations)?;
            Ok(Outcome::new(0)
                .field("consumer", json!(consumer))
                .field("solution", to_value(&solution)))
        }
        Command::Prop1 { input, aggregator } => {
            let panel = load_panel_input(input, digests)?;
            let grid = parse_grid(aggregator, &panel)?;
            let (prices, params) = prop1_rationalize(&panel, &grid)?;
            let pooled = pooled_observations(&panel, &prices)?;
            let audit = check_garp(&pooled);
            Ok(Outcome::new(0)
                .field("prices", prices.to_json())
                .field("epsilon", to_value(&params.epsilon))
                .field("seeds", json!([to_value(&params.p1_seed), to_value(&params.p2_seed)]))
                .field("bound_log", to_value(&params.bound_log))
                .field("pooled_garp", audit.to_json()))
        }
        Command::Prop2 { input } => {
            let parsed = load_disaggregation_input(&read_input(input, digests)?)?;
            let out = prop2_disaggregate(&parsed)?;
            let pooled = pooled_observations(&out.panel, &out.prices)?;
            let audit = check_garp(&pooled);
            Ok(Outcome::new(0)
                .field("demands", to_value(&out.demands))
                .field("prices", out.prices.to_json())
                .field("derived_price_index", to_value(
                    &(0..out.panel.n_observations())
                        .map(|t| out.panel.price_index(t).to_vec())
                        .collect::<Vec<_>>(),
                ))
                .field("bound_log", to_value(&out.params.bound_log))
                .field("pooled_garp", audit.to_json()))
        }
        Command::Prop3Check { input, scales } => {
            let panel = load_panel_input(input, digests)?;
            let doc: Value = serde_json::from_str(&read_input(scales, digests)?)
                .map_err(|e| Error::schema(format!("invalid JSON: {e}")))?;
            let rows = doc
                .as_array()
                .ok_or_else(|| Error::schema("scales must be an N×K array"))?
                .iter()
                .enumerate()
                .map(|(i, row)| money_row(row, &format!("scales[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            let pairs = check_stable_invariance(&panel, &rows)?;
            let all_match = pairs
                .iter()
                .all(|p| p.graphs_identical && p.scaled.satisfied == p.index.satisfied);
            Ok(Outcome::new(if all_match { 0 } else { 1 })
                .field("invariant", json!(all_match))
                .field("pairs", to_value(&pairs)))
        }
        Command::Prop4 {
            input,
            scale_set,
            aggregator,
        } => {
            let panel = load_panel_input(input, digests)?;
            let r = parse_scale_set(scale_set, panel.n_goods())?;
            let spec = parse_aggregator_for_scales(aggregator, panel.n_consumers())?;
            let (scales, prices, params) = prop4_stable_prices(&panel, &r, &spec)?;
            let pooled = pooled_observations(&panel, &prices)?;
            let utility = afriat_construct(&pooled)?;
            let transform_ok = scale_transform_verify(&panel, &scales, &utility, cli.seed)?;
            let audit = check_garp(&pooled);
            Ok(Outcome::new(0)
                .field("scales", to_value(&scales))
                .field("prices", prices.to_json())
                .field("epsilon", to_value(&params.epsilon))
                .field("bound_log", to_value(&params.bound_log))
                .field("utility", to_value(&utility))
                .field("scale_transform_verified", json!(transform_ok))
                .field("pooled_garp", audit.to_json()))
        }
        Command::Prop6 {
            input,
            phi,
            aggregator,
        } => {
            let panel = load_panel_input(input, digests)?;
            let phi = parse_phi(phi)?;
            let spec = parse_aggregator_for_scales(aggregator, panel.n_consumers())?;
            let (scales, systems, params) = prop6_au_lambdas(&panel, &phi, &spec)?;
            let mut points = Vec::new();
            for i in 0..panel.n_consumers() {
                for t in 0..panel.n_observations() {
                    points.push((panel.bundle_at_index(i, t), systems[i][t].clone()));
                }
            }
            let audit = check_gapp(&points)?;
            Ok(Outcome::new(0)
                .field("scales", to_value(&scales))
                .field("phi", json!(phi.key()))
                .field("alpha", to_value(&params.alpha))
                .field("bound_log", to_value(&params.bound_log))
                .field("pooled_gapp", audit.to_json()))
        }
        Command::Rum { cross_section } => {
            let cs = load_cross_section(&read_input(cross_section, digests)?)?;
            let verdict = rum_check(&cs, cli.search_budget)?;
            Ok(Outcome::new(if verdict.rationalizable { 0 } else { 1 })
                .field("verdict", to_value(&verdict)))
        }
        Command::Rpm {
            cross_section,
            scale_set,
            aggregator,
        } => {
            let cs = load_cross_section(&read_input(cross_section, digests)?)?;
            let r = parse_scale_set(scale_set, cs.n_goods())?;
            let spec = parse_aggregator_for_scales(aggregator, cs.n_points())?;
            let (verdict, certificate) = rpm_check(&cs, &r, &spec, cli.search_budget)?;
            Ok(Outcome::new(if verdict.rationalizable { 0 } else { 1 })
                .field("verdict", to_value(&verdict))
                .field("certificate", to_value(&certificate)))
        }
        Command::AuRum {
            cross_section,
            phi,
            aggregator,
        } => {
            let cs = load_cross_section(&read_input(cross_section, digests)?)?;
            let phi = parse_phi(phi)?;
            let spec = parse_aggregator_for_scales(aggregator, cs.n_points())?;
            let (verdict, certificate) = au_rum_check(&cs, &phi, &spec, cli.search_budget)?;
            Ok(Outcome::new(if verdict.rationalizable { 0 } else { 1 })
                .field("verdict", to_value(&verdict))
                .field("certificate", to_value(&certificate)))
        }
        Command::Patches {
            cross_section,
            budgets,
        } => {
            let decomposition = match (cross_section, budgets) {
                (Some(path), None) => {
                    let cs = load_cross_section(&read_input(path, digests)?)?;
                    let budgets: Vec<(Vec<Money>, Money)> = (0..cs.n_observations())
                        .map(|t| {
                            let obs = cs.observation(t);
                            (obs.price_index.clone(), obs.total.clone())
                        })
                        .collect();
                    compute_patches(&budgets, Some(&cs))?
                }
                (None, Some(path)) => {
                    let doc: Value = serde_json::from_str(&read_input(path, digests)?)
                        .map_err(|e| Error::schema(format!("invalid JSON: {e}")))?;
                    let rows = doc
                        .get("budgets")
                        .and_then(Value::as_array)
                        .ok_or_else(|| Error::schema("missing `budgets` array"))?;
                    let budgets: Vec<(Vec<Money>, Money)> = rows
                        .iter()
                        .enumerate()
                        .map(|(t, row)| {
                            let at = format!("budgets[{t}]");
                            let pbar = money_row(
                                row.get("pbar")
                                    .ok_or_else(|| Error::schema(format!("missing {at}.pbar")))?,
                                &format!("{at}.pbar"),
                            )?;
                            let total = value_to_money(
                                row.get("m")
                                    .ok_or_else(|| Error::schema(format!("missing {at}.m")))?,
                                &format!("{at}.m"),
                            )?;
                            Ok((pbar, total))
                        })
                        .collect::<Result<_, Error>>()?;
                    compute_patches(&budgets, None)?
                }
                _ => {
                    return Err(Error::schema(
                        "pass exactly one of --cross-section or --budgets",
                    ))
                }
            };
            Ok(Outcome::new(0)
                .field("patch_count", json!(decomposition.patches.len()))
                .field("decomposition", to_value(&decomposition)))
        }
        Command::OneGoodRefute {
            input,
            good,
            aggregator,
        } => {
            let panel = load_panel_input(input, digests)?;
            if *good == 0 || *good > panel.n_goods() {
                return Err(Error::schema(format!(
                    "good {good} out of range 1..={}",
                    panel.n_goods()
                )));
            }
            let spec = parse_aggregator_for_scales(aggregator, panel.n_consumers())?;
            let outcome =
                check_one_good_refutation(&panel, good - 1, &spec, cli.search_budget)?;
            let exit = match &outcome {
                OneGoodOutcome::Refuted { .. } => 1,
                OneGoodOutcome::NotRefuted { .. } => 0,
                OneGoodOutcome::Unknown { .. } => 2,
            };
            Ok(Outcome::new(exit).field("outcome", to_value(&outcome)))
        }
        Command::Synth {
            spec,
            family,
            consumers,
            observations,
            goods,
            out_panel,
        } => {
            let generator = match spec {
                Some(path) => serde_json::from_str::<GeneratorSpec>(&read_input(path, digests)?)
                    .map_err(|e| Error::schema(format!("invalid generator spec: {e}")))?,
                None => {
                    let family = match family.as_str() {
                        "cobb-douglas" => Family::CobbDouglas { exponents: None },
                        "leontief" => Family::Leontief { weights: None },
                        "warp-2cycle" | "adversarial-random" => Family::Violation {
                            template: family.clone(),
                        },
                        other => {
                            return Err(Error::schema(format!("unknown family `{other}`")))
                        }
                    };
                    GeneratorSpec {
                        family,
                        seed: cli.seed,
                        n_consumers: *consumers,
                        n_observations: *observations,
                        n_goods: *goods,
                    }
                }
            };
            let panel = generate_panel(&generator)?;
            let document = panel.to_json();
            if let Some(path) = out_panel {
                fs::write(path, format!("{document:#}\n")).map_err(|e| Error::Schema {
                    message: format!("writing {path}: {e}"),
                })?;
            }
            Ok(Outcome::new(0)
                .field("generator", to_value(&generator))
                .field("panel", document))
        }
    }
}
