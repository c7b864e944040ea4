//! Penalized approximation of the reflected backward equation on a tree.
//!
//! At penalty level `n` the value solves, node by node,
//! `y = E[Y_next] + n dt max(0, xi - y)`, which increases to the Snell envelope as
//! `n -> infinity`. The inner ladder truncates the terminal value to `[-m, m]`, replaces
//! the generator by its `l`-Lipschitz inf-convolution on a finite grid and solves the
//! resulting equation by Picard iteration from zero.

use crate::error::{Error, Result};
use crate::market_model::{Measure, Process, ScenarioTree};
use crate::snell::classical_snell;

pub const DEFAULT_PICARD_TOL: f64 = 1e-10;
pub const DEFAULT_K_MAX: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedSolution {
    pub n: f64,
    pub y: Process,
    /// Reflection increments `n dt max(0, xi - Y)`, zero on leaves.
    pub k: Process,
}

/// Closed-form solution of the implicit penalized recursion.
pub fn penalized_snell(
    tree: &ScenarioTree,
    measure: &Measure,
    xi: &Process,
    n: f64,
) -> Result<PenalizedSolution> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "penalty must be positive, got {n}"
        )));
    }
    measure.ensure_total(tree)?;
    let mut y = xi.clone();
    let mut k = Process::constant(tree, 0.0);
    for ix in tree.backward() {
        let e = measure.expect(tree, ix, &y);
        let ndt = n * tree.dt(ix);
        y[ix] = if xi[ix] <= e {
            e
        } else {
            (e + ndt * xi[ix]) / (1.0 + ndt)
        };
        k[ix] = ndt * (xi[ix] - y[ix]).max(0.0);
    }
    Ok(PenalizedSolution { n, y, k })
}

/// `max over nodes of (classical Snell - penalized value)`.
pub fn penalization_gap(
    tree: &ScenarioTree,
    measure: &Measure,
    xi: &Process,
    n: f64,
) -> Result<f64> {
    let snell = classical_snell(tree, measure, xi)?;
    let pen = penalized_snell(tree, measure, xi, n)?;
    Ok(snell
        .values()
        .iter()
        .zip(pen.y.values())
        .map(|(a, b)| a - b)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Clamp to `[-m, m]`.
pub fn truncate_terminal(value: f64, m: f64) -> f64 {
    value.clamp(-m, m)
}

/// Parameters of one `(n, m, l)` ladder cell. The rationals of the inf-convolution are
/// replaced by the grid `{j h : |j h| <= radius}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorSpec {
    pub n: f64,
    pub m: f64,
    pub ell: f64,
    pub h: f64,
    pub radius: f64,
}

impl GeneratorSpec {
    pub fn new(n: f64, m: f64, ell: f64, h: f64, radius: f64) -> Result<Self> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !(positive(n) && positive(m) && positive(ell)) {
            return Err(Error::InvalidInput("n, m and ell must be positive".into()));
        }
        if !positive(h) {
            return Err(Error::InvalidInput("grid spacing must be positive".into()));
        }
        if radius.is_nan() || radius < m + 1.0 {
            return Err(Error::InvalidInput(
                "grid radius must be at least m + 1".into(),
            ));
        }
        Ok(Self {
            n,
            m,
            ell,
            h,
            radius,
        })
    }

    /// Spec with spacing `h` and the smallest admissible radius.
    pub fn with_grid(n: f64, m: f64, ell: f64, h: f64) -> Result<Self> {
        Self::new(n, m, ell, h, m + 1.0)
    }
}

/// `y -> min over grid q of { l |y - q| + f_{n,m}(q) }` for one node's payoff.
#[derive(Debug, Clone, Copy)]
pub struct MollifiedGenerator {
    spec: GeneratorSpec,
    xi: f64,
    half_width: i64,
}

impl MollifiedGenerator {
    /// Truncated penalty generator
    /// `n max(0, xi - q) - n max(0, xi) + clamp(n max(0, xi), -m, m)`.
    pub fn truncated(&self, q: f64) -> f64 {
        let GeneratorSpec { n, m, .. } = self.spec;
        let pos = n * self.xi.max(0.0);
        n * (self.xi - q).max(0.0) - pos + pos.clamp(-m, m)
    }

    fn objective(&self, y: f64, j: i64) -> f64 {
        let q = j as f64 * self.spec.h;
        self.spec.ell * (y - q).abs() + self.truncated(q)
    }

    /// The objective is convex in `q` (both terms are), so the grid minimum is found by
    /// bisecting on the sign of its forward difference.
    pub fn eval(&self, y: f64) -> f64 {
        let (mut lo, mut hi) = (-self.half_width, self.half_width);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.objective(y, mid + 1) - self.objective(y, mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let mut best = self.objective(y, lo);
        for j in [lo - 1, lo + 1] {
            if j.abs() <= self.half_width {
                best = best.min(self.objective(y, j));
            }
        }
        best
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }
}

pub fn mollify_generator(spec: GeneratorSpec, xi_node: f64) -> MollifiedGenerator {
    let half_width = (spec.radius / spec.h).ceil() as i64;
    MollifiedGenerator {
        spec,
        xi: xi_node,
        half_width,
    }
}

#[derive(Debug, Clone)]
pub struct PicardSolution {
    pub y: Process,
    pub iterations: usize,
    /// Sup-norm distance between the last two iterates.
    pub residual: f64,
    pub converged: bool,
    /// Sup-norm distance between consecutive iterates, one entry per sweep.
    pub differences: Vec<f64>,
    /// `l * (largest remaining time)`; iteration is a contraction when this is below 1.
    pub contraction_bound: f64,
}

impl PicardSolution {
    pub fn contractive(&self) -> bool {
        self.contraction_bound < 1.0
    }
}

struct PicardScheme<'a> {
    tree: &'a ScenarioTree,
    measure: &'a Measure,
    terminal: Vec<f64>,
    generators: Vec<MollifiedGenerator>,
}

impl<'a> PicardScheme<'a> {
    fn new(
        tree: &'a ScenarioTree,
        measure: &'a Measure,
        xi: &Process,
        spec: GeneratorSpec,
    ) -> Result<Self> {
        measure.ensure_total(tree)?;
        let terminal = (0..tree.len())
            .map(|ix| truncate_terminal(xi[ix], spec.m))
            .collect();
        let generators = (0..tree.len())
            .map(|ix| mollify_generator(spec, xi[ix]))
            .collect();
        Ok(Self {
            tree,
            measure,
            terminal,
            generators,
        })
    }

    /// `Y^{k+1}_n = dt_n f_n(Y^k_n) + E[Y^{k+1}_next]`, leaves at the truncated terminal.
    fn sweep(&self, prev: &Process) -> Process {
        let tree = self.tree;
        let mut next = Process::zeros(tree.len());
        for &leaf in tree.leaves() {
            next[leaf] = self.terminal[leaf];
        }
        for ix in tree.backward() {
            let drive = tree.dt(ix) * self.generators[ix].eval(prev[ix]);
            next[ix] = drive + self.measure.expect(tree, ix, &next);
        }
        next
    }
}

fn sup_distance(a: &Process, b: &Process) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

/// Picard iteration from `Y^0 = 0` until the sup-norm step is at most `tol` or `k_max`
/// sweeps have run. Non-convergence is reported through `converged`, not as an error.
pub fn picard_solve(
    tree: &ScenarioTree,
    measure: &Measure,
    xi: &Process,
    spec: GeneratorSpec,
    k_max: usize,
    tol: f64,
) -> Result<PicardSolution> {
    if k_max == 0 {
        return Err(Error::InvalidInput("k_max must be at least 1".into()));
    }
    let scheme = PicardScheme::new(tree, measure, xi, spec)?;
    let mut y = Process::zeros(tree.len());
    let mut differences = Vec::new();
    let mut converged = false;
    for _ in 0..k_max {
        let next = scheme.sweep(&y);
        let diff = sup_distance(&next, &y);
        differences.push(diff);
        y = next;
        if !diff.is_finite() {
            break;
        }
        if diff <= tol {
            converged = true;
            break;
        }
    }
    Ok(PicardSolution {
        y,
        iterations: differences.len(),
        residual: differences.last().copied().unwrap_or(0.0),
        converged,
        differences,
        contraction_bound: spec.ell * tree.remaining_time(tree.root()),
    })
}

/// Root value of the `k`-th Picard iterate at ladder level `(n, m, l)`.
pub fn ladder_value(
    tree: &ScenarioTree,
    measure: &Measure,
    xi: &Process,
    spec: GeneratorSpec,
    k: usize,
) -> Result<f64> {
    let scheme = PicardScheme::new(tree, measure, xi, spec)?;
    let mut y = Process::zeros(tree.len());
    for _ in 0..k {
        y = scheme.sweep(&y);
    }
    Ok(y[tree.root()])
}

/// One row of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderRow {
    pub n: f64,
    /// `None` stands for the untruncated (closed-form) limit.
    pub m: Option<f64>,
    pub ell: Option<f64>,
    pub k: usize,
    pub root_value: f64,
    pub gap: f64,
    pub residual: f64,
}

pub const LADDER_CSV_HEADER: &str = "n,m,ell,k,root_value,gap,residual";

impl LadderRow {
    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "inf".to_string(), |v| v.to_string());
        format!(
            "{},{},{},{},{},{},{}",
            self.n,
            opt(self.m),
            opt(self.ell),
            self.k,
            self.root_value,
            self.gap,
            self.residual
        )
    }
}

/// Closed-form rows for every penalty in `n_list` (in the given order).
pub fn penalization_study(
    tree: &ScenarioTree,
    measure: &Measure,
    xi: &Process,
    n_list: &[f64],
) -> Result<Vec<LadderRow>> {
    let snell = classical_snell(tree, measure, xi)?;
    n_list
        .iter()
        .map(|&n| {
            let pen = penalized_snell(tree, measure, xi, n)?;
            let gap = snell
                .values()
                .iter()
                .zip(pen.y.values())
                .map(|(a, b)| a - b)
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(LadderRow {
                n,
                m: None,
                ell: None,
                k: 0,
                root_value: pen.y[tree.root()],
                gap,
                residual: 0.0,
            })
        })
        .collect()
}

pub fn ladder_csv(rows: &[LadderRow]) -> String {
    let mut out = String::from(LADDER_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}
