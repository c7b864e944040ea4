//! Grid-sampled semimartingale characteristics.
//!
//! A [`CharacteristicTriplet`] stores cumulative drift `B`, cumulative second characteristic
//! `C` and the cumulative jump activity `K = (|x|^2 ^ 1) * nu` on a time grid. Absolute
//! continuity of one increasing process with respect to another is checked per grid
//! interval: a positive increment of the first must come with a positive increment of
//! the second.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
pub use crate::linalg::pseudo_inverse;
use crate::linalg::{symmetric_eigen, Matrix};
use crate::market_model::file::{expect_kind, read_file};

pub const CHARACTERISTICS_KIND: &str = "characteristics";

/// `det(c)` at or below `DET_TOL * max|c_ij|^d` counts as singular.
pub const DET_TOL: f64 = 1e-12;

/// Tolerance for PSD and unit-trace checks on densities and increments.
pub const PSD_TOL: f64 = 1e-10;

/// Tolerance of the range-consistency check `c_S Z = c_SY`.
pub const RANGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicTriplet {
    pub grid: Vec<f64>,
    pub drift: Vec<Vec<f64>>,
    pub diffusion: Vec<Matrix>,
    pub jump_activity: Vec<f64>,
}

#[derive(Deserialize)]
struct TripletFile {
    grid: Vec<f64>,
    #[serde(rename = "B")]
    drift: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    diffusion: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "K")]
    jump_activity: Vec<f64>,
}

fn min_eigenvalue(m: &Matrix) -> Result<f64> {
    Ok(symmetric_eigen(m)?
        .values
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

impl CharacteristicTriplet {
    pub fn new(
        grid: Vec<f64>,
        drift: Vec<Vec<f64>>,
        diffusion: Vec<Matrix>,
        jump_activity: Vec<f64>,
    ) -> Result<Self> {
        let len = grid.len();
        if len < 2 {
            return Err(Error::InvalidInput("grid needs at least two points".into()));
        }
        if drift.len() != len || diffusion.len() != len || jump_activity.len() != len {
            return Err(Error::InvalidInput(
                "B, C and K must have one entry per grid point".into(),
            ));
        }
        let d = diffusion[0].dim();
        if d == 0 || diffusion.iter().any(|c| c.dim() != d) || drift.iter().any(|b| b.len() != d) {
            return Err(Error::InvalidInput(
                "inconsistent dimensions in the triplet".into(),
            ));
        }
        let bad = |i: usize, rule: &str| Error::invariant(format!("grid[{i}]"), rule);
        let all_finite = grid
            .iter()
            .chain(&jump_activity)
            .chain(drift.iter().flatten())
            .all(|v| v.is_finite())
            && diffusion.iter().all(|c| c.max_abs().is_finite());
        if !all_finite {
            return Err(Error::InvalidInput(
                "triplet contains non-finite values".into(),
            ));
        }
        if let Some(i) = (1..len).find(|&i| grid[i] <= grid[i - 1]) {
            return Err(bad(i, "grid must be strictly increasing"));
        }
        if diffusion[0].max_abs() > PSD_TOL {
            return Err(bad(0, "C must start at 0"));
        }
        if jump_activity[0] != 0.0 {
            return Err(bad(0, "K must start at 0"));
        }
        for i in 1..len {
            if jump_activity[i] < jump_activity[i - 1] {
                return Err(bad(i, "K must be non-decreasing"));
            }
            let inc = diffusion[i].sub(&diffusion[i - 1]);
            let scale = inc.max_abs().max(1.0);
            if inc.asymmetry() > PSD_TOL * scale {
                return Err(bad(i, "C must be symmetric"));
            }
            if min_eigenvalue(&inc)? < -PSD_TOL * scale {
                return Err(bad(i, "C increment is not positive semidefinite"));
            }
        }
        Ok(Self {
            grid,
            drift,
            diffusion,
            jump_activity,
        })
    }

    pub fn dim(&self) -> usize {
        self.diffusion[0].dim()
    }

    pub fn intervals(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn jump_increment(&self, i: usize) -> f64 {
        self.jump_activity[i + 1] - self.jump_activity[i]
    }
}

pub fn parse_triplet(text: &str) -> Result<CharacteristicTriplet> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    expect_kind(&value, CHARACTERISTICS_KIND)?;
    let file: TripletFile = serde_json::from_value(value)?;
    let diffusion = file
        .diffusion
        .iter()
        .map(|rows| Matrix::from_rows(rows))
        .collect::<Result<Vec<_>>>()?;
    CharacteristicTriplet::new(file.grid, file.drift, diffusion, file.jump_activity)
}

pub fn load_triplet(path: impl AsRef<Path>) -> Result<CharacteristicTriplet> {
    parse_triplet(&read_file(path.as_ref())?)
}

/// `C = c . A` with `A = Tr(C)`; one density per grid interval.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedDiffusion {
    pub trace: Vec<f64>,
    pub density: Vec<Matrix>,
}

impl FactorizedDiffusion {
    pub fn trace_increment(&self, i: usize) -> f64 {
        self.trace[i + 1] - self.trace[i]
    }
}

pub fn factorize(triplet: &CharacteristicTriplet) -> Result<FactorizedDiffusion> {
    let trace: Vec<f64> = triplet.diffusion.iter().map(Matrix::trace).collect();
    let zero = 1e-14 * trace.iter().fold(1.0_f64, |m, a| m.max(a.abs()));
    let mut density = Vec::with_capacity(triplet.intervals());
    for i in 0..triplet.intervals() {
        let inc = triplet.diffusion[i + 1].sub(&triplet.diffusion[i]);
        let da = trace[i + 1] - trace[i];
        if da > zero {
            density.push(inc.scale(1.0 / da));
        } else {
            if inc.max_abs() > PSD_TOL {
                return Err(Error::invariant(
                    format!("interval {i}"),
                    "trace increment vanishes but C moves",
                ));
            }
            density.push(Matrix::zeros(triplet.dim()));
        }
    }
    Ok(FactorizedDiffusion { trace, density })
}

fn scaled_det(c: &Matrix) -> (f64, f64) {
    let scale = c.max_abs().powi(c.dim() as i32);
    (c.det(), DET_TOL * scale)
}

/// Jumps on an interval require an invertible density and a positive trace increment.
pub fn dominating_diffusion(fact: &FactorizedDiffusion, triplet: &CharacteristicTriplet) -> bool {
    (0..triplet.intervals()).all(|i| {
        if triplet.jump_increment(i) <= 0.0 {
            return true;
        }
        let (det, tol) = scaled_det(&fact.density[i]);
        tol > 0.0 && det > tol && fact.trace_increment(i) > 0.0
    })
}

/// Older per-coordinate variant: jumps require `min_j c_jj dA > 0`.
pub fn dominating_diffusion_componentwise(
    fact: &FactorizedDiffusion,
    triplet: &CharacteristicTriplet,
) -> bool {
    (0..triplet.intervals()).all(|i| {
        if triplet.jump_increment(i) <= 0.0 {
            return true;
        }
        let c = &fact.density[i];
        let min_diag = (0..c.dim())
            .map(|j| c[(j, j)])
            .fold(f64::INFINITY, f64::min);
        min_diag * fact.trace_increment(i) > 0.0
    })
}

/// The five dominating measures `1{det>0} A`, `1{det!=0} A`, `1{|det|>0} A`, `det A`,
/// `|det| A`, each tested for domination of the jump activity on every interval.
pub fn equivalence_suite(fact: &FactorizedDiffusion, triplet: &CharacteristicTriplet) -> [bool; 5] {
    let mut out = [true; 5];
    for i in 0..triplet.intervals() {
        if triplet.jump_increment(i) <= 0.0 {
            continue;
        }
        for (slot, ok) in out.iter_mut().zip(interval_conditions(fact, i)) {
            *slot &= ok;
        }
    }
    out
}

// `!(x <= tol)` is deliberate: it also rejects NaN.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn interval_conditions(fact: &FactorizedDiffusion, i: usize) -> [bool; 5] {
    let (det, tol) = scaled_det(&fact.density[i]);
    let da = fact.trace_increment(i);
    let live = tol > 0.0 && da > 0.0;
    [
        live && det > tol,
        live && det.abs() > tol,
        live && !(det.abs() <= tol),
        live && det * da > tol * da,
        live && det.abs() * da > tol * da,
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalVerdict {
    pub det: f64,
    pub trace: f64,
    pub jumps: f64,
    pub dd_new: bool,
    pub dd_old: bool,
    pub five_way: [bool; 5],
}

/// Per-interval verdicts of both dominating-diffusion notions and the five-way suite.
pub fn interval_report(
    fact: &FactorizedDiffusion,
    triplet: &CharacteristicTriplet,
) -> Vec<IntervalVerdict> {
    (0..triplet.intervals())
        .map(|i| {
            let single = CharacteristicTriplet {
                grid: triplet.grid[i..=i + 1].to_vec(),
                drift: triplet.drift[i..=i + 1].to_vec(),
                diffusion: triplet.diffusion[i..=i + 1].to_vec(),
                jump_activity: vec![0.0, triplet.jump_increment(i)],
            };
            let local = FactorizedDiffusion {
                trace: fact.trace[i..=i + 1].to_vec(),
                density: vec![fact.density[i].clone()],
            };
            IntervalVerdict {
                det: fact.density[i].det(),
                trace: fact.trace_increment(i),
                jumps: triplet.jump_increment(i),
                dd_new: dominating_diffusion(&local, &single),
                dd_old: dominating_diffusion_componentwise(&local, &single),
                five_way: equivalence_suite(&local, &single),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HedgingCandidate {
    pub z: Vec<f64>,
    /// Whether `c_SY` lies in the range of `c_S`, i.e. `c_S z = c_SY`.
    pub in_range: bool,
}

/// `Z_i = (c_S_i)^+ c_SY_i` per interval.
pub fn hedging_candidate(c_s: &[Matrix], c_sy: &[Vec<f64>]) -> Result<Vec<HedgingCandidate>> {
    if c_s.len() != c_sy.len() {
        return Err(Error::InvalidInput("c_S and c_SY lengths differ".into()));
    }
    c_s.iter()
        .zip(c_sy)
        .map(|(c, v)| {
            if c.dim() != v.len() {
                return Err(Error::InvalidInput("c_SY has the wrong dimension".into()));
            }
            let z = pseudo_inverse(c)?.mul_vec(v);
            let back = c.mul_vec(&z);
            let scale = v.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
            let in_range = back
                .iter()
                .zip(v)
                .all(|(a, b)| (a - b).abs() <= RANGE_TOL * scale);
            Ok(HedgingCandidate { z, in_range })
        })
        .collect()
}

/// `B = 0`, `C_t = [[t, t], [t, t]]`, `nu(dt, dx) = delta_(1,1)(dx) dt` on the grid `{0, 1, 2}`.
/// Since `|(1, 1)|^2 = 2 > 1`, the jump activity grows at rate `|x|^2 ^ 1 = 1`.
pub fn counterexample_triplet() -> CharacteristicTriplet {
    let grid = vec![0.0, 1.0, 2.0];
    let jump = [1.0_f64, 1.0];
    let rate = (jump.iter().map(|x| x * x).sum::<f64>()).min(1.0);
    let diffusion = grid
        .iter()
        .map(|&t| Matrix::from_rows(&[vec![t, t], vec![t, t]]).expect("square"))
        .collect();
    CharacteristicTriplet::new(
        grid.clone(),
        vec![vec![0.0, 0.0]; grid.len()],
        diffusion,
        grid.iter().map(|t| rate * t).collect(),
    )
    .expect("fixture is valid")
}

/// `(componentwise verdict, determinant verdict)` on the counterexample fixture.
pub fn counterexample_verdicts() -> (bool, bool) {
    let triplet = counterexample_triplet();
    let fact = factorize(&triplet).expect("fixture factorizes");
    (
        dominating_diffusion_componentwise(&fact, &triplet),
        dominating_diffusion(&fact, &triplet),
    )
}
