//! Consistency scenarios: point layouts, viscosity scaling, quasi-random
//! collocation, label lookup on FD meshes, and evaluation metrics.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fdsolve::{build_mesh, solve_steady, FdSolution, Mesh, SolverSettings};
use crate::mms::{Manufactured, Viscosity, NU_MAX, NU_MIN};
use crate::optim::{run_schedule, RunRecord, Schedule, TrainingSet};
use crate::pinnloss::{CollocationBatch, LabeledBatch, Weighting};
use crate::tapenet::{forward_batch, NetParams};

/// Maps `ν ∈ [NU_MIN, NU_MAX]` affinely in `log ν` onto [−1, 1].
pub fn scale_viscosity(nu: f64) -> Result<f64> {
    if !(NU_MIN..=NU_MAX).contains(&nu) {
        return Err(Error::ViscosityOutOfRange {
            nu,
            lo: NU_MIN,
            hi: NU_MAX,
        });
    }
    let (lo, hi) = (NU_MIN.ln(), NU_MAX.ln());
    Ok((2.0 * (nu.ln() - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0))
}

pub fn unscale_viscosity(scaled: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&scaled) {
        return Err(Error::ViscosityOutOfRange {
            nu: scaled,
            lo: -1.0,
            hi: 1.0,
        });
    }
    let (lo, hi) = (NU_MIN.ln(), NU_MAX.ln());
    // clamped so that the endpoints map back inside the range
    Ok((lo + 0.5 * (scaled + 1.0) * (hi - lo)).exp().clamp(NU_MIN, NU_MAX))
}

const SOBOL_BITS: u32 = 32;

/// First `n` points of the unscrambled two-dimensional Sobol sequence
/// (dimension 1 van der Corput, dimension 2 from the primitive polynomial
/// x + 1), generated in Gray-code order.
pub fn sobol_2d(n: usize, skip_zero: bool) -> Vec<[f64; 2]> {
    let mut v1 = [0u32; SOBOL_BITS as usize];
    let mut v2 = [0u32; SOBOL_BITS as usize];
    let mut m = 1u32;
    for k in 0..SOBOL_BITS as usize {
        v1[k] = 1 << (SOBOL_BITS - 1 - k as u32);
        if k > 0 {
            m ^= m << 1;
        }
        v2[k] = m << (SOBOL_BITS - 1 - k as u32);
    }
    let scale = 1.0 / (1u64 << SOBOL_BITS) as f64;
    let mut out = Vec::with_capacity(n);
    let (mut a, mut b) = (0u32, 0u32);
    if !skip_zero && n > 0 {
        out.push([0.0, 0.0]);
    }
    let mut i: u32 = 0;
    while out.len() < n {
        let c = i.trailing_ones() as usize;
        a ^= v1[c];
        b ^= v2[c];
        i += 1;
        out.push([a as f64 * scale, b as f64 * scale]);
    }
    out
}

/// Index of the node closest to `target_x`; ties go to the lower index.
pub fn nearest_node(target_x: f64, mesh: &Mesh) -> usize {
    let nodes = mesh.nodes();
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &x) in nodes.iter().enumerate() {
        let d = (x - target_x).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Standard,
    Parametric,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Standard => "standard",
            Mode::Parametric => "parametric",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Mode::Standard),
            "parametric" => Ok(Mode::Parametric),
            _ => Err(Error::Config(format!("unknown mode '{s}'"))),
        }
    }
}

impl Mode {
    pub fn input_dim(self) -> usize {
        match self {
            Mode::Standard => 1,
            Mode::Parametric => 2,
        }
    }

    pub fn train_viscosities(self) -> Vec<f64> {
        match self {
            Mode::Standard => vec![STANDARD_NU],
            Mode::Parametric => vec![1e-1, 1e-3, 1e-6],
        }
    }

    pub fn test_viscosities(self) -> Vec<f64> {
        match self {
            Mode::Standard => vec![STANDARD_NU],
            Mode::Parametric => vec![1e-2, 1e-4, 1e-5],
        }
    }

    /// Every viscosity a scenario of this mode needs an FD solve for.
    pub fn required_viscosities(self) -> Vec<f64> {
        let mut v = self.train_viscosities();
        for nu in self.test_viscosities() {
            if !v.contains(&nu) {
                v.push(nu);
            }
        }
        v
    }

    pub fn default_schedule(self) -> Schedule {
        match self {
            Mode::Standard => Schedule::standard(),
            Mode::Parametric => Schedule::parametric(),
        }
    }
}

/// Data-fidelity scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    C1,
    C2,
    C3,
    #[serde(rename = "analytical")]
    Analytical,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::C1 => "C1",
            Tag::C2 => "C2",
            Tag::C3 => "C3",
            Tag::Analytical => "analytical",
        })
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "C1" | "c1" => Ok(Tag::C1),
            "C2" | "c2" => Ok(Tag::C2),
            "C3" | "c3" => Ok(Tag::C3),
            "analytical" | "Analytical" => Ok(Tag::Analytical),
            _ => Err(Error::Config(format!("unknown tag '{s}'"))),
        }
    }
}

impl Tag {
    pub const ALL: [Tag; 4] = [Tag::C1, Tag::C2, Tag::C3, Tag::Analytical];

    /// FD mesh size supplying the labels; `None` for exact labels.
    pub fn mesh_nodes(self) -> Option<usize> {
        match self {
            Tag::C1 => Some(81),
            Tag::C2 => Some(641),
            Tag::C3 => Some(7121),
            Tag::Analytical => None,
        }
    }

    /// Mesh whose nodes are used for evaluation.
    pub fn eval_nodes(self) -> usize {
        self.mesh_nodes().unwrap_or(7121)
    }
}

pub const STANDARD_NU: f64 = 1e-2;
pub const STANDARD_TRAIN_X: [f64; 4] = [-0.55, -0.3, 0.3, 0.8];
pub const STANDARD_TEST_X: [f64; 5] = [-0.75, -0.45, 0.0, 0.5, 0.9];
pub const STANDARD_COLLOCATION: usize = 1000;
pub const PARAMETRIC_COLLOCATION: usize = 1500;
pub const PARAMETRIC_BC: usize = 50;
/// Node count of the coarse mesh whose nodes set the parametric x layout.
pub const LAYOUT_NODES: usize = 81;
/// Warm-up only: labels at the first viscosity shown at the second.
pub const WARMUP_PAIRS: [(f64, f64); 3] = [(1e-1, 1e-2), (1e-3, 1e-4), (1e-6, 1e-5)];

/// Provenance of a label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Fd(Tag),
    Analytical,
    None,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Fd(t) => write!(f, "{t}"),
            Source::Analytical => f.write_str("analytical"),
            Source::None => f.write_str("none"),
        }
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytical" => Ok(Source::Analytical),
            "none" => Ok(Source::None),
            other => match other.parse::<Tag>()? {
                Tag::Analytical => Ok(Source::Analytical),
                t => Ok(Source::Fd(t)),
            },
        }
    }
}

/// One point of a dataset. `label` is `None` for collocation points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DataPoint {
    pub x: f64,
    pub nu: f64,
    pub label: Option<f64>,
    pub source: Source,
}

impl DataPoint {
    pub fn scaled_nu(&self) -> Result<f64> {
        scale_viscosity(self.nu)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioDataset {
    pub mode: Mode,
    pub tag: Tag,
    pub collocation: Vec<DataPoint>,
    pub train: Vec<DataPoint>,
    pub test: Vec<DataPoint>,
    pub bc: Vec<DataPoint>,
    /// Mislabeled points added during warm-up (parametric only).
    pub warmup_extra: Vec<DataPoint>,
}

fn view_key(nodes: usize, nu: f64) -> (usize, u64) {
    (nodes, nu.to_bits())
}

/// Distinct (mesh size, ν) solves needed by the given tags, largest meshes first.
pub fn required_solves(mode: Mode, tags: &[Tag]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for &tag in tags {
        let Some(nodes) = tag.mesh_nodes() else { continue };
        for nu in mode.required_viscosities() {
            if !out.iter().any(|&(n, v)| n == nodes && v.to_bits() == nu.to_bits()) {
                out.push((nodes, nu));
            }
        }
    }
    out.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.total_cmp(&b.1)));
    out
}

/// Converged FD solutions keyed by (mesh size, viscosity).
#[derive(Clone, Debug, Default)]
pub struct FdBank {
    solutions: BTreeMap<(usize, u64), FdSolution>,
}

impl FdBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, solution: FdSolution) {
        let key = view_key(solution.mesh.n_nodes(), solution.nu.value());
        self.solutions.insert(key, solution);
    }

    pub fn get(&self, nodes: usize, nu: f64) -> Option<&FdSolution> {
        self.solutions.get(&view_key(nodes, nu))
    }

    pub fn require(&self, tag: Tag, nu: f64) -> Result<&FdSolution> {
        let nodes = tag.mesh_nodes().ok_or_else(|| Error::MissingSolution(format!("{tag} has no mesh")))?;
        self.get(nodes, nu)
            .ok_or_else(|| Error::MissingSolution(format!("{tag} (n = {nodes}) at nu = {nu:e}")))
    }

    pub fn solutions(&self) -> impl Iterator<Item = &FdSolution> {
        self.solutions.values()
    }

    /// Solves every missing (mesh, ν) pair the given tags and mode need.
    pub fn ensure(&mut self, mode: Mode, tags: &[Tag], problem: &Manufactured, settings: &SolverSettings) -> Result<()> {
        for (nodes, nu) in required_solves(mode, tags) {
            self.ensure_one(nodes, nu, problem, settings)?;
        }
        Ok(())
    }

    pub fn ensure_one(&mut self, nodes: usize, nu: f64, problem: &Manufactured, settings: &SolverSettings) -> Result<&FdSolution> {
        let key = view_key(nodes, nu);
        if !self.solutions.contains_key(&key) {
            let sol = solve_steady(&build_mesh(nodes)?, Viscosity::new(nu)?, problem, settings)?;
            self.solutions.insert(key, sol);
        }
        Ok(&self.solutions[&key])
    }
}

/// FD-vs-analytical RMSE per (mesh size, viscosity): the reference column
/// reported next to network errors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FdReference {
    rmse: BTreeMap<(usize, u64), f64>,
}

impl FdReference {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bank(bank: &FdBank, problem: &Manufactured) -> Self {
        let mut r = Self::new();
        for sol in bank.solutions() {
            r.insert(sol.mesh.n_nodes(), sol.nu.value(), sol.rmse_vs_analytic(problem));
        }
        r
    }

    pub fn insert(&mut self, nodes: usize, nu: f64, rmse: f64) {
        self.rmse.insert(view_key(nodes, nu), rmse);
    }

    pub fn get(&self, nodes: usize, nu: f64) -> Option<f64> {
        self.rmse.get(&view_key(nodes, nu)).copied()
    }
}

/// Labeled point at the mesh node nearest to `x` (exact node value, no
/// interpolation), or at `x` itself for exact labels.
fn labeled(tag: Tag, x: f64, nu: f64, bank: &FdBank, problem: &Manufactured) -> Result<DataPoint> {
    match tag {
        Tag::Analytical => Ok(DataPoint {
            x,
            nu,
            label: Some(problem.u(x, Viscosity::new(nu)?)),
            source: Source::Analytical,
        }),
        _ => {
            let sol = bank.require(tag, nu)?;
            let i = nearest_node(x, &sol.mesh);
            let node_x = sol.mesh.nodes()[i];
            if (node_x - x).abs() > 1e-6 * sol.mesh.dx() {
                return Err(Error::OffMesh(x));
            }
            Ok(DataPoint {
                x: node_x,
                nu,
                label: Some(sol.values[i]),
                source: Source::Fd(tag),
            })
        }
    }
}

fn bc_point(nu: f64, problem: &Manufactured) -> Result<DataPoint> {
    Ok(DataPoint {
        x: -1.0,
        nu,
        label: Some(problem.inflow(Viscosity::new(nu)?)),
        source: Source::Analytical,
    })
}

fn colloc_point(x: f64, nu: f64) -> DataPoint {
    DataPoint {
        x,
        nu,
        label: None,
        source: Source::None,
    }
}

fn layout_x() -> Vec<f64> {
    build_mesh(LAYOUT_NODES).expect("layout mesh").nodes().to_vec()
}

/// Assembles the dataset for one scenario. All layouts are deterministic,
/// so no seed is involved.
pub fn build_scenario(mode: Mode, tag: Tag, bank: &FdBank, problem: &Manufactured) -> Result<ScenarioDataset> {
    let mut ds = ScenarioDataset {
        mode,
        tag,
        collocation: Vec::new(),
        train: Vec::new(),
        test: Vec::new(),
        bc: Vec::new(),
        warmup_extra: Vec::new(),
    };
    match mode {
        Mode::Standard => {
            let n = STANDARD_COLLOCATION;
            ds.collocation = (0..n)
                .map(|i| colloc_point(-1.0 + 2.0 * i as f64 / (n - 1) as f64, STANDARD_NU))
                .collect();
            for x in STANDARD_TRAIN_X {
                ds.train.push(labeled(tag, x, STANDARD_NU, bank, problem)?);
            }
            for x in STANDARD_TEST_X {
                ds.test.push(labeled(tag, x, STANDARD_NU, bank, problem)?);
            }
            ds.bc.push(bc_point(STANDARD_NU, problem)?);
        }
        Mode::Parametric => {
            for p in sobol_2d(PARAMETRIC_COLLOCATION, true) {
                ds.collocation.push(colloc_point(2.0 * p[0] - 1.0, unscale_viscosity(2.0 * p[1] - 1.0)?));
            }
            let xs = layout_x();
            for nu in mode.train_viscosities() {
                for &x in &xs {
                    ds.train.push(labeled(tag, x, nu, bank, problem)?);
                }
            }
            for nu in mode.test_viscosities() {
                for &x in &xs {
                    ds.test.push(labeled(tag, x, nu, bank, problem)?);
                }
            }
            for i in 0..PARAMETRIC_BC {
                let s = -1.0 + 2.0 * i as f64 / (PARAMETRIC_BC - 1) as f64;
                ds.bc.push(bc_point(unscale_viscosity(s)?, problem)?);
            }
            for (from, to) in WARMUP_PAIRS {
                for &x in &xs {
                    let mut p = labeled(tag, x, from, bank, problem)?;
                    p.nu = to;
                    ds.warmup_extra.push(p);
                }
            }
        }
    }
    Ok(ds)
}

/// Network input rows for a point list: `[x]` or `[x, scaled ν]`.
pub fn input_rows(mode: Mode, points: &[DataPoint]) -> Result<Array2<f64>> {
    let dim = mode.input_dim();
    let mut out = Array2::zeros((points.len(), dim));
    for (i, p) in points.iter().enumerate() {
        out[[i, 0]] = p.x;
        if dim == 2 {
            out[[i, 1]] = p.scaled_nu()?;
        }
    }
    Ok(out)
}

fn labeled_batch(mode: Mode, points: &[DataPoint]) -> Result<LabeledBatch> {
    let labels = points
        .iter()
        .map(|p| p.label.ok_or_else(|| Error::InvalidDataset(format!("unlabeled point at x = {}", p.x))))
        .collect::<Result<Vec<_>>>()?;
    LabeledBatch::new(input_rows(mode, points)?, labels)
}

impl ScenarioDataset {
    pub fn training_set(&self, problem: &Manufactured) -> Result<TrainingSet> {
        let nu: Vec<f64> = self.collocation.iter().map(|p| p.nu).collect();
        Ok(TrainingSet {
            collocation: CollocationBatch::new(input_rows(self.mode, &self.collocation)?, nu, problem)?,
            train: labeled_batch(self.mode, &self.train)?,
            bc: labeled_batch(self.mode, &self.bc)?,
            test: labeled_batch(self.mode, &self.test)?,
            warmup_extra: if self.warmup_extra.is_empty() {
                None
            } else {
                Some(labeled_batch(self.mode, &self.warmup_extra)?)
            },
        })
    }

    /// Sizes as (collocation, train, test, bc).
    pub fn sizes(&self) -> (usize, usize, usize, usize) {
        (self.collocation.len(), self.train.len(), self.test.len(), self.bc.len())
    }

    /// Mean squared label error ε² over the training points.
    pub fn mean_train_eps2(&self, problem: &Manufactured) -> Result<f64> {
        mean_eps2(&self.train, problem)
    }
}

pub fn mean_eps2(points: &[DataPoint], problem: &Manufactured) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::InvalidDataset("no labeled points".into()));
    }
    let mut sum = 0.0;
    for p in points {
        let label = p.label.ok_or_else(|| Error::InvalidDataset("unlabeled point".into()))?;
        let e = label - problem.u(p.x, Viscosity::new(p.nu)?);
        sum += e * e;
    }
    Ok(sum / points.len() as f64)
}

/// Anything that predicts `u` at `(x, ν)` points.
pub trait Predictor {
    fn predict(&self, xs: &[f64], nu: f64) -> Result<Vec<f64>>;
}

/// Trained network in a given mode.
pub struct NetPredictor<'a> {
    pub params: &'a NetParams,
    pub mode: Mode,
}

impl Predictor for NetPredictor<'_> {
    fn predict(&self, xs: &[f64], nu: f64) -> Result<Vec<f64>> {
        let points: Vec<DataPoint> = xs.iter().map(|&x| colloc_point(x, nu)).collect();
        let rows = input_rows(self.mode, &points)?;
        Ok(forward_batch(self.params, rows.view())?.to_vec())
    }
}

/// Returns the manufactured solution itself.
pub struct MmsOracle(pub Manufactured);

impl Predictor for MmsOracle {
    fn predict(&self, xs: &[f64], nu: f64) -> Result<Vec<f64>> {
        let nu = Viscosity::new(nu)?;
        Ok(xs.iter().map(|&x| self.0.u(x, nu)).collect())
    }
}

/// Root-mean-square mismatch against the (possibly inconsistent) test labels.
pub fn test_rmse<P: Predictor + ?Sized>(predictor: &P, dataset: &ScenarioDataset) -> Result<f64> {
    if dataset.test.is_empty() {
        return Err(Error::InvalidDataset("test set is empty".into()));
    }
    let mut sum = 0.0;
    for p in &dataset.test {
        let u = predictor.predict(&[p.x], p.nu)?[0];
        let e = p.label.unwrap_or(f64::NAN) - u;
        sum += e * e;
    }
    Ok((sum / dataset.test.len() as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuRow {
    pub nu: f64,
    pub rmse_vs_analytic: f64,
    /// FD-vs-analytical RMSE on the same nodes, where an FD solve exists.
    pub numeric_vs_analytic: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: Mode,
    pub tag: Tag,
    pub test_rmse: f64,
    /// At the mode's test viscosities.
    pub rmse_vs_analytic_at_nodes: Vec<NuRow>,
    /// Over the evaluation grid.
    pub per_nu_curve: Vec<NuRow>,
}

/// `n` log-spaced viscosities over [NU_MIN, NU_MAX].
pub fn log_grid(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![NU_MIN];
    }
    let (lo, hi) = (NU_MIN.log10(), NU_MAX.log10());
    (0..n)
        .map(|i| {
            if i == 0 {
                NU_MIN
            } else if i == n - 1 {
                NU_MAX
            } else {
                10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

pub const DEFAULT_EVAL_GRID: usize = 25;

fn nu_row<P: Predictor + ?Sized>(
    predictor: &P,
    tag: Tag,
    nu: f64,
    nodes: &[f64],
    reference: &FdReference,
    problem: &Manufactured,
) -> Result<NuRow> {
    let pred = predictor.predict(nodes, nu)?;
    let v = Viscosity::new(nu)?;
    let n = nodes.len() as f64;
    let sum: f64 = nodes.iter().zip(&pred).map(|(&x, u)| (u - problem.u(x, v)).powi(2)).sum();
    Ok(NuRow {
        nu,
        rmse_vs_analytic: (sum / n).sqrt(),
        numeric_vs_analytic: tag.mesh_nodes().and_then(|n| reference.get(n, nu)),
    })
}

/// RMSE against the manufactured solution over the tag's mesh nodes, per ν.
pub fn evaluate_vs_analytic<P: Predictor + ?Sized>(
    predictor: &P,
    dataset: &ScenarioDataset,
    nu_grid: &[f64],
    reference: &FdReference,
    problem: &Manufactured,
) -> Result<EvalReport> {
    let mesh = build_mesh(dataset.tag.eval_nodes())?;
    let nodes = mesh.nodes();
    let at_nodes = dataset
        .mode
        .test_viscosities()
        .into_iter()
        .map(|nu| nu_row(predictor, dataset.tag, nu, nodes, reference, problem))
        .collect::<Result<Vec<_>>>()?;
    let curve = nu_grid
        .iter()
        .map(|&nu| nu_row(predictor, dataset.tag, nu, nodes, reference, problem))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        mode: dataset.mode,
        tag: dataset.tag,
        test_rmse: test_rmse(predictor, dataset)?,
        rmse_vs_analytic_at_nodes: at_nodes,
        per_nu_curve: curve,
    })
}

pub const DEFAULT_ALPHAS: [f64; 9] = [0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99];

/// `a` dominates `b`: no worse in both coordinates, strictly better in one.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
}

/// Indices of the non-dominated points (both coordinates minimized).
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !points.iter().enumerate().any(|(j, &q)| j != i && dominates(q, points[i])))
        .collect()
}

/// One fixed-weight run of a sweep.
#[derive(Clone, Debug)]
pub struct SweepRun {
    pub alpha: f64,
    pub record: RunRecord,
}

impl SweepRun {
    pub fn final_point(&self) -> (f64, f64) {
        (self.record.final_loss.l_pde, self.record.final_loss.l_d)
    }
}

#[derive(Clone, Debug)]
pub struct ParetoSweep {
    pub runs: Vec<SweepRun>,
    /// Indices into `runs` of the non-dominated final points.
    pub front: Vec<usize>,
}

/// Runs the fixed-weight schedule for every α and extracts the front of
/// final points.
pub fn pareto_sweep(
    set: &TrainingSet,
    layer_sizes: &[usize],
    alphas: &[f64],
    schedule: &Schedule,
    seed: u64,
) -> Result<ParetoSweep> {
    let mut runs = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let record = run_schedule(set, layer_sizes, schedule, seed, Weighting::Fixed { alpha })?;
        runs.push(SweepRun { alpha, record });
    }
    let finals: Vec<(f64, f64)> = runs.iter().map(SweepRun::final_point).collect();
    let front = pareto_front(&finals);
    Ok(ParetoSweep { runs, front })
}
