use std::path::Path;

use clap::ValueEnum;
use robust_snell::characteristics::{equivalence_suite, factorize, interval_report, load_triplet};
use robust_snell::families::parse_generator;
use robust_snell::hedging::{saturate, superhedge, verify_superhedge, CERTIFY_TOL};
use robust_snell::penalization::{ladder_csv, penalization_study};
use robust_snell::snell::{
    brute_force_value, classical_snell, optimal_exercise, robust_snell, DEFAULT_BRUTE_FORCE_CAP,
};
use robust_snell::{parse_model, Measure, MeasureFamily, Strategy, TreeModel};
use serde_json::{json, Map, Value};

use crate::failure::Failure;

pub const CAP_ENV: &str = "ROBUST_SNELL_CAP";

/// Per-measure values are listed only when there are at most this many extreme selections.
const PER_MEASURE_LIMIT: u128 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyChoice {
    /// The local sets stored in the model file.
    Given,
    /// Every martingale measure on the tree.
    Saturate,
}

impl FamilyChoice {
    fn name(self) -> &'static str {
        match self {
            FamilyChoice::Given => "given",
            FamilyChoice::Saturate => "saturate",
        }
    }
}

/// How a single measure is picked out of the family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureSelector {
    First,
    Last,
    /// Average of the extremes at every node.
    Center,
    Extreme(usize),
}

impl std::str::FromStr for MeasureSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first" => Ok(Self::First),
            "last" => Ok(Self::Last),
            "center" => Ok(Self::Center),
            _ => s
                .strip_prefix("extreme:")
                .and_then(|k| k.parse().ok())
                .map(Self::Extreme)
                .ok_or_else(|| {
                    format!("unknown measure selector `{s}` (first|last|center|extreme:<k>)")
                }),
        }
    }
}

impl std::fmt::Display for MeasureSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::First => f.write_str("first"),
            Self::Last => f.write_str("last"),
            Self::Center => f.write_str("center"),
            Self::Extreme(k) => write!(f, "extreme:{k}"),
        }
    }
}

impl MeasureSelector {
    fn pick(self, model: &TreeModel) -> Result<Measure, Failure> {
        let tree = &model.tree;
        let fam = &model.family;
        match self {
            Self::First => Ok(fam.select(|_| 0)),
            Self::Last => Ok(fam.select(|ix| fam.extremes(ix).len() - 1)),
            Self::Extreme(k) => {
                if let Some(ix) = tree.non_terminal().find(|&ix| fam.extremes(ix).len() <= k) {
                    return Err(Failure::load(format!(
                        "node `{}` has only {} extremes",
                        tree.id(ix),
                        fam.extremes(ix).len()
                    )));
                }
                Ok(fam.select(|_| k))
            }
            Self::Center => Ok(Measure::from_fn(tree, |ix| {
                let ex = fam.extremes(ix);
                let mut p = vec![0.0; ex[0].len()];
                for e in ex {
                    for (a, b) in p.iter_mut().zip(e) {
                        *a += b / ex.len() as f64;
                    }
                }
                let total: f64 = p.iter().sum();
                p.iter().map(|v| v / total).collect()
            })?),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::load(format!("{}: {e}", path.display())))
}

/// A `tree_model` file, or a `uv` / `levy` generator spec expanded on the fly.
pub fn load_any(path: &Path) -> Result<TreeModel, Failure> {
    let text = read(path)?;
    let value: Value = serde_json::from_str(&text)?;
    let model = match value.get("kind").and_then(Value::as_str) {
        Some("uv" | "levy") => parse_generator(&text)?,
        _ => parse_model(&text)?,
    };
    Ok(model)
}

pub fn brute_force_cap() -> Result<u128, Failure> {
    match std::env::var(CAP_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            Failure::load(format!(
                "{CAP_ENV} must be a non-negative integer, got `{v}`"
            ))
        }),
        Err(_) => Ok(DEFAULT_BRUTE_FORCE_CAP),
    }
}

fn family(model: &TreeModel, choice: FamilyChoice) -> Result<MeasureFamily, Failure> {
    match choice {
        FamilyChoice::Given => Ok(model.family.clone()),
        FamilyChoice::Saturate => Ok(saturate(&model.tree)?),
    }
}

pub fn price(model: &TreeModel, choice: FamilyChoice, brute: bool) -> Result<Value, Failure> {
    let tree = &model.tree;
    let fam = family(model, choice)?;
    let y = robust_snell(tree, &fam, &model.payoff)?;
    let rule = optimal_exercise(tree, &y, &model.payoff);
    let boundary: Vec<&str> = rule
        .exercise_nodes(tree)
        .iter()
        .map(|&ix| tree.id(ix))
        .collect();
    let mut out = Map::new();
    out.insert("value".into(), json!(y[tree.root()]));
    out.insert("family".into(), json!(choice.name()));
    out.insert("exercise_boundary".into(), json!(boundary));
    let count = fam.extreme_selection_count();
    if count <= PER_MEASURE_LIMIT {
        let covered: Vec<usize> = tree.non_terminal().collect();
        let values = (0..count as usize)
            .map(|mut code| {
                let mut choice = vec![0; tree.len()];
                for &ix in &covered {
                    let k = fam.extremes(ix).len();
                    choice[ix] = code % k;
                    code /= k;
                }
                let m = fam.select(|ix| choice[ix]);
                Ok(classical_snell(tree, &m, &model.payoff)?[tree.root()])
            })
            .collect::<Result<Vec<f64>, Failure>>()?;
        out.insert("per_measure_values".into(), json!(values));
    }
    if brute {
        let bf = brute_force_value(tree, &fam, &model.payoff, brute_force_cap()?)?;
        out.insert("brute_force".into(), json!(bf));
    }
    Ok(Value::Object(out))
}

fn parse_strategy(model: &TreeModel, text: &str) -> Result<(f64, Strategy), Failure> {
    let tree = &model.tree;
    let value: Value = serde_json::from_str(text)?;
    let y0 = value
        .get("y0")
        .and_then(Value::as_f64)
        .ok_or_else(|| Failure::load("strategy file needs a numeric `y0`"))?;
    let table = value
        .get("strategy")
        .and_then(Value::as_object)
        .ok_or_else(|| Failure::load("strategy file needs a `strategy` object"))?;
    let mut holdings = vec![None; tree.len()];
    for (id, z) in table {
        let ix = tree.lookup(id)?;
        let z: Vec<f64> = serde_json::from_value(z.clone())?;
        holdings[ix] = Some(z);
    }
    Ok((y0, Strategy::new(tree, holdings)?))
}

pub fn hedge(model: &TreeModel, verify_only: Option<&Path>) -> Result<Value, Failure> {
    let tree = &model.tree;
    if let Some(path) = verify_only {
        let (y0, z) = parse_strategy(model, &read(path)?)?;
        return Ok(json!({ "verified": verify_superhedge(tree, &model.payoff, y0, &z) }));
    }
    let report = superhedge(tree, &model.payoff)?;
    if !verify_superhedge(tree, &model.payoff, report.price, &report.strategy) {
        return Err(Failure::internal(
            "emitted strategy fails pathwise verification",
        ));
    }
    let mut out = report.to_json(tree);
    out["verified"] = json!(true);
    Ok(out)
}

pub fn duality(model: &TreeModel, choice: FamilyChoice, brute: bool) -> Result<Value, Failure> {
    let tree = &model.tree;
    let fam = family(model, choice)?;
    let primal = superhedge(tree, &model.payoff)?.price;
    let dual = robust_snell(tree, &fam, &model.payoff)?[tree.root()];
    let gap = primal - dual;
    let mut out = json!({
        "family": choice.name(),
        "primal": primal,
        "dual": dual,
        "gap": gap,
        "certified": gap.abs() <= CERTIFY_TOL,
    });
    if brute {
        out["brute_force"] = json!(brute_force_value(
            tree,
            &fam,
            &model.payoff,
            brute_force_cap()?
        )?);
    }
    Ok(out)
}

pub fn parse_n_list(text: &str) -> Result<Vec<f64>, Failure> {
    let list = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::load(format!("bad --n-list `{text}`: {e}")))?;
    if list.is_empty() || list.iter().any(|n| !(*n > 0.0 && n.is_finite())) {
        return Err(Failure::load("--n-list needs positive finite penalties"));
    }
    Ok(list)
}

/// Convergence table over the penalties; returns the payload and the CSV text.
pub fn penalize(
    model: &TreeModel,
    selector: MeasureSelector,
    n_list: &[f64],
) -> Result<(Value, String), Failure> {
    let measure = selector.pick(model)?;
    let rows = penalization_study(&model.tree, &measure, &model.payoff, n_list)?;
    let mut sorted: Vec<_> = rows.iter().collect();
    sorted.sort_by(|a, b| a.n.total_cmp(&b.n));
    if sorted
        .windows(2)
        .any(|w| w[1].root_value < w[0].root_value || w[1].gap > w[0].gap)
    {
        return Err(Failure::internal("penalized values are not monotone in n"));
    }
    let table: Vec<Value> = rows
        .iter()
        .map(|r| json!({ "n": r.n, "root_value": r.root_value, "gap": r.gap }))
        .collect();
    let csv = ladder_csv(&rows);
    let payload = json!({ "measure": selector.to_string(), "rows": table, "csv": csv });
    Ok((payload, csv))
}

pub fn characteristics(path: &Path) -> Result<Value, Failure> {
    let triplet = load_triplet(path)?;
    let fact = factorize(&triplet)?;
    let report = interval_report(&fact, &triplet);
    let suite = equivalence_suite(&fact, &triplet);
    if report
        .iter()
        .any(|v| v.five_way.iter().any(|&b| b != v.dd_new))
        || suite.iter().any(|&b| b != suite[0])
    {
        return Err(Failure::internal("equivalence suite disagrees"));
    }
    let per_interval: Vec<Value> = report
        .iter()
        .map(|v| {
            json!({
                "det": v.det,
                "trace": v.trace,
                "jumps": v.jumps,
                "dd_new": v.dd_new,
                "dd_old": v.dd_old,
                "five_way": v.five_way,
            })
        })
        .collect();
    let overall = json!({
        "dd_new": report.iter().all(|v| v.dd_new),
        "dd_old": report.iter().all(|v| v.dd_old),
    });
    Ok(json!({ "per_interval": per_interval, "overall": overall }))
}

/// Expands a generator spec; returns the summary payload and the model file text.
pub fn generate(path: &Path) -> Result<(Value, String), Failure> {
    let model = parse_generator(&read(path)?)?;
    let text = model.to_json();
    let payload = json!({
        "nodes": model.tree.len(),
        "horizon": model.tree.horizon(),
        "model": serde_json::from_str::<Value>(&text)?,
    });
    Ok((payload, text))
}
