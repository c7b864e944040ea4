//! Generators of (tree, family) pairs for two classes of nondominated models.
//!
//! * [`uv_lattice`]: uncertain volatility. Every node moves the price by one of
//!   `move_grid` symmetric arithmetic steps; the local set holds one zero-mean law per end of
//!   the variance interval `[lo^2 dt, hi^2 dt]`.
//! * [`levy_tree`]: a finite set of Lévy triplets `(b, c, jumps)`, each mapped to one
//!   transition law on a common grid of moves (first order in `dt`, at most one jump per
//!   step).

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::hedging::polytope_vertices;
use crate::market_model::file::{read_file, TreeModel};
use crate::market_model::{MeasureFamily, NodeIx, Process, ScenarioTree, TreeBuilder};

/// Largest tree a generator will materialize.
pub const MAX_GENERATED_NODES: usize = 2_000_000;

const MOVE_DEDUP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct UvSpec {
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub steps: usize,
    pub dt: f64,
    pub s0: f64,
    /// Odd number of symmetric moves per step.
    #[serde(default = "default_move_grid")]
    pub move_grid: usize,
    /// Distance between adjacent moves; defaults so the outermost move is `hi sqrt(dt)`.
    #[serde(default)]
    pub spacing: Option<f64>,
}

fn default_move_grid() -> usize {
    3
}

impl UvSpec {
    pub fn new(sigma_lo: f64, sigma_hi: f64, steps: usize, dt: f64, s0: f64) -> Self {
        Self {
            sigma_lo,
            sigma_hi,
            steps,
            dt,
            s0,
            move_grid: 3,
            spacing: None,
        }
    }

    fn half(&self) -> usize {
        self.move_grid / 2
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
            .unwrap_or(self.sigma_hi * self.dt.sqrt() / self.half() as f64)
    }

    /// Moves `j * spacing` for `j = -half..=half`.
    pub fn moves(&self) -> Vec<f64> {
        let h = self.half() as i64;
        let delta = self.spacing();
        (-h..=h).map(|j| j as f64 * delta).collect()
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.into()));
        if !(self.sigma_lo > 0.0 && self.sigma_lo <= self.sigma_hi && self.sigma_hi.is_finite()) {
            return bad("need 0 < sigma_lo <= sigma_hi");
        }
        if self.steps == 0 || !(self.dt > 0.0 && self.dt.is_finite()) || !self.s0.is_finite() {
            return bad("need steps >= 1, dt > 0 and a finite s0");
        }
        if self.move_grid < 3 || self.move_grid.is_multiple_of(2) {
            return bad("move_grid must be odd and at least 3");
        }
        if let Some(s) = self.spacing {
            if !(s > 0.0 && s.is_finite()) {
                return bad("spacing must be positive");
            }
        }
        let outer = self.half() as f64 * self.spacing();
        let v_hi = self.sigma_hi * self.sigma_hi * self.dt;
        if outer * outer < v_hi * (1.0 - 1e-12) {
            return bad("variance interval unattainable on the move grid");
        }
        Ok(())
    }
}

/// Zero-mean law on `moves` with variance `v`: the symmetric vertex of
/// `{p >= 0 : sum p = 1, sum p x = 0, sum p x^2 = v}` on the innermost admissible pair.
pub fn variance_vertex(moves: &[f64], v: f64) -> Result<Vec<f64>> {
    let rows = vec![
        vec![1.0; moves.len()],
        moves.to_vec(),
        moves.iter().map(|x| x * x).collect(),
    ];
    let k = moves.len();
    let symmetric = |p: &Vec<f64>| (0..k).all(|i| (p[i] - p[k - 1 - i]).abs() <= 1e-12);
    let radius = |p: &Vec<f64>| {
        (0..k)
            .filter(|&i| p[i] > 0.0)
            .map(|i| moves[i].abs())
            .fold(0.0, f64::max)
    };
    polytope_vertices(&rows, &[1.0, 0.0, v])
        .into_iter()
        .filter(symmetric)
        .min_by(|a, b| radius(a).total_cmp(&radius(b)))
        .ok_or_else(|| Error::InvalidInput(format!("variance {v} unattainable on the move grid")))
}

fn expand(steps: usize, s0: f64, dt: f64, moves: &[f64]) -> Result<ScenarioTree> {
    let count = (0..=steps).try_fold(0usize, |acc, t| {
        moves
            .len()
            .checked_pow(t as u32)
            .and_then(|n| acc.checked_add(n))
    });
    if count.is_none_or(|c| c > MAX_GENERATED_NODES) {
        return Err(Error::InvalidInput(format!(
            "tree with {} moves and {steps} steps exceeds {MAX_GENERATED_NODES} nodes",
            moves.len()
        )));
    }
    let mut b = TreeBuilder::new(vec![s0]);
    let mut frontier = vec![b.root()];
    for _ in 0..steps {
        let mut next = Vec::with_capacity(frontier.len() * moves.len());
        for &n in &frontier {
            let s = b.price(n)[0];
            for &x in moves {
                next.push(b.child(n, vec![s + x], dt));
            }
        }
        frontier = next;
    }
    b.build()
}

pub fn uv_lattice(spec: &UvSpec) -> Result<(ScenarioTree, MeasureFamily)> {
    spec.validate()?;
    let moves = spec.moves();
    let lo = variance_vertex(&moves, spec.sigma_lo * spec.sigma_lo * spec.dt)?;
    let hi = variance_vertex(&moves, spec.sigma_hi * spec.sigma_hi * spec.dt)?;
    let mut extremes = vec![lo];
    if extremes[0] != hi {
        extremes.push(hi);
    }
    let tree = expand(spec.steps, spec.s0, spec.dt, &moves)?;
    let family = MeasureFamily::from_fn(&tree, |_| extremes.clone())?;
    Ok((tree, family))
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct LevyTriplet {
    #[serde(rename = "b")]
    pub drift: f64,
    #[serde(rename = "c")]
    pub diffusion: f64,
    /// `(size, rate)` pairs.
    #[serde(default)]
    pub jumps: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct LevySpec {
    pub triplets: Vec<LevyTriplet>,
    pub dt: f64,
    pub steps: usize,
    pub s0: f64,
}

impl LevySpec {
    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.into()));
        if self.triplets.is_empty() {
            return bad("at least one triplet is required");
        }
        if self.steps == 0 || !(self.dt > 0.0 && self.dt.is_finite()) || !self.s0.is_finite() {
            return bad("need steps >= 1, dt > 0 and a finite s0");
        }
        for th in &self.triplets {
            if !(th.diffusion >= 0.0 && th.diffusion.is_finite() && th.drift.is_finite()) {
                return bad("diffusion must be nonnegative and drift finite");
            }
            if th
                .jumps
                .iter()
                .any(|&(s, r)| !(r >= 0.0 && r.is_finite() && s.is_finite()))
            {
                return bad("jump rates must be nonnegative and sizes finite");
            }
        }
        Ok(())
    }
}

/// Weighted moves of one triplet over a step of length `dt`.
fn triplet_law(th: &LevyTriplet, dt: f64) -> Result<Vec<(f64, f64)>> {
    let jump_mass: f64 = th.jumps.iter().map(|&(_, r)| r * dt).sum();
    let rest = 1.0 - jump_mass;
    if rest < -1e-12 {
        return Err(Error::InvalidInput(format!(
            "dt too large: jump mass {jump_mass} exceeds 1"
        )));
    }
    let rest = rest.max(0.0);
    let center = th.drift * dt;
    let mut law = Vec::new();
    if th.diffusion > 0.0 {
        let spread = (th.diffusion * dt).sqrt();
        law.push((center - spread, rest / 2.0));
        law.push((center + spread, rest / 2.0));
    } else {
        law.push((center, rest));
    }
    law.extend(th.jumps.iter().map(|&(size, rate)| (size, rate * dt)));
    Ok(law)
}

pub fn levy_tree(spec: &LevySpec) -> Result<(ScenarioTree, MeasureFamily)> {
    spec.validate()?;
    let laws = spec
        .triplets
        .iter()
        .map(|th| triplet_law(th, spec.dt))
        .collect::<Result<Vec<_>>>()?;
    let mut moves: Vec<f64> = laws.iter().flatten().map(|&(x, _)| x).collect();
    moves.sort_by(f64::total_cmp);
    moves.dedup_by(|a, b| (*a - *b).abs() <= MOVE_DEDUP);

    let mut extremes: Vec<Vec<f64>> = Vec::new();
    for law in &laws {
        let mut p = vec![0.0; moves.len()];
        for &(x, w) in law {
            let k = moves
                .iter()
                .position(|m| (m - x).abs() <= MOVE_DEDUP)
                .expect("move on grid");
            p[k] += w;
        }
        if !extremes.contains(&p) {
            extremes.push(p);
        }
    }
    let tree = expand(spec.steps, spec.s0, spec.dt, &moves)?;
    let family = MeasureFamily::from_fn(&tree, |_| extremes.clone())?;
    Ok((tree, family))
}

/// Realized moments of the price increments under one extreme at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub node: NodeIx,
    pub extreme: usize,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

pub fn moment_report(tree: &ScenarioTree, family: &MeasureFamily) -> Vec<MomentRow> {
    let mut rows = Vec::new();
    for ix in tree.non_terminal() {
        let Some(set) = family.local(ix) else {
            continue;
        };
        let inc = tree.increments(ix);
        for (k, p) in set.extremes().iter().enumerate() {
            let mean: Vec<f64> = (0..tree.dim())
                .map(|j| p.iter().zip(&inc).map(|(w, ds)| w * ds[j]).sum())
                .collect();
            let variance = (0..tree.dim())
                .map(|j| {
                    p.iter()
                        .zip(&inc)
                        .map(|(w, ds)| w * (ds[j] - mean[j]).powi(2))
                        .sum()
                })
                .collect();
            rows.push(MomentRow {
                node: ix,
                extreme: k,
                mean,
                variance,
            });
        }
    }
    rows
}

/// American payoff applied at every node of a generated tree.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct PayoffSpec {
    pub style: PayoffStyle,
    pub strike: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffStyle {
    Put,
    Call,
}

impl PayoffSpec {
    pub fn apply(&self, tree: &ScenarioTree) -> Process {
        Process::from_fn(tree, |ix| {
            let s = tree.price(ix)[0];
            match self.style {
                PayoffStyle::Put => (self.strike - s).max(0.0),
                PayoffStyle::Call => (s - self.strike).max(0.0),
            }
        })
    }
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum GeneratorFile {
    Uv {
        #[serde(flatten)]
        spec: UvSpec,
        payoff: PayoffSpec,
    },
    Levy {
        #[serde(flatten)]
        spec: LevySpec,
        payoff: PayoffSpec,
    },
}

/// Builds a model from a `{"kind":"uv",...}` or `{"kind":"levy",...}` spec file.
pub fn parse_generator(text: &str) -> Result<TreeModel> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let kind = value
        .get("kind")
        .and_then(|k| k.as_str())
        .unwrap_or("<missing>");
    if kind != "uv" && kind != "levy" {
        return Err(Error::WrongKind {
            expected: "uv|levy".into(),
            found: kind.into(),
        });
    }
    let (tree, family, payoff) = match serde_json::from_value::<GeneratorFile>(value)? {
        GeneratorFile::Uv { spec, payoff } => {
            let (t, f) = uv_lattice(&spec)?;
            (t, f, payoff)
        }
        GeneratorFile::Levy { spec, payoff } => {
            let (t, f) = levy_tree(&spec)?;
            (t, f, payoff)
        }
    };
    let xi = payoff.apply(&tree);
    TreeModel::new(tree, family, xi)
}

pub fn load_generator(path: impl AsRef<Path>) -> Result<TreeModel> {
    parse_generator(&read_file(path.as_ref())?)
}
