//! The four commands. Output layout under `out_dir`:
//!
//! ```text
//! fd/n<nodes>_nu<nu>.csv, fd/reference.json
//! data/<mode>/summary.json, data/<mode>/<tag>/{collocation,train,test,bc,warmup}.csv
//! runs/<mode>/<tag>/<weighting>/seed<k>/{trace.csv,summary.json,checkpoint.json,config.json}
//! pareto/<mode>/<tag>/seed<k>/{trajectories.csv,front.csv,summary.json,config.json}
//! eval/<mode>/<label>/{boxplot.csv,config.json}, eval/<mode>/<label>/<tag>/{report.json,curve.csv}
//! logs/*.log
//! ```
//!
//! Everything except `*.log` is a pure function of the config.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use pinnlab::fdsolve::{build_mesh, solve_steady, FdSolution};
use pinnlab::mms::Viscosity;
use pinnlab::optim::{run_schedule, RunRecord, Termination};
use pinnlab::pinnloss::{LossBreakdown, Weighting};
use pinnlab::scenarios::{
    build_scenario, evaluate_vs_analytic, log_grid, mean_eps2, pareto_front, required_solves, DataPoint, EvalReport,
    FdBank, FdReference, MmsOracle, Mode, NetPredictor, Predictor, ScenarioDataset, Tag,
};
use pinnlab::tapenet::{Checkpoint, NetParams};
use serde::{Deserialize, Serialize};

use crate::artifacts::{self as art, AlphaLabel, FdRow, FrontPoint, ParetoRow};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Context, Result};

/// Runs `f` over `jobs` on at most `workers` threads; results keep job order.
pub fn run_pool<T: Sync, R: Send>(workers: usize, jobs: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, jobs.len().max(1));
    if workers == 1 {
        return jobs.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let r = f(job);
                slots.lock().expect("no poisoned workers")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

fn log_path(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.out_dir.join("logs").join(format!("{name}.log"))
}

fn data_dir(cfg: &ExperimentConfig, tag: Tag) -> PathBuf {
    cfg.out_dir.join("data").join(cfg.mode.to_string()).join(tag.to_string())
}

pub fn run_dir(cfg: &ExperimentConfig, tag: Tag, weighting: &Weighting) -> PathBuf {
    cfg.out_dir
        .join("runs")
        .join(cfg.mode.to_string())
        .join(tag.to_string())
        .join(weighting.label())
        .join(format!("seed{}", cfg.seed))
}

pub fn pareto_dir(cfg: &ExperimentConfig, tag: Tag) -> PathBuf {
    cfg.out_dir
        .join("pareto")
        .join(cfg.mode.to_string())
        .join(tag.to_string())
        .join(format!("seed{}", cfg.seed))
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    art::write_json(&dir.join("config.json"), cfg)
}

// ---------- generate-data ----------

/// One FD solve in `fd/reference.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdRecord {
    pub nodes: usize,
    pub nu: f64,
    pub rmse_vs_analytic: f64,
    pub iterations: usize,
    pub final_residual: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdFailure {
    pub nodes: usize,
    pub nu: f64,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FdReport {
    pub solves: Vec<FdRecord>,
    /// Solves that did not converge; their datasets are not written.
    pub failed: Vec<FdFailure>,
}

impl FdReport {
    pub fn reference(&self) -> FdReference {
        let mut r = FdReference::new();
        for s in &self.solves {
            r.insert(s.nodes, s.nu, s.rmse_vs_analytic);
        }
        r
    }
}

/// Per-scenario line of the data summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub tag: Tag,
    pub collocation: usize,
    pub train: usize,
    pub test: usize,
    pub bc: usize,
    /// Mean squared label error over the training points.
    pub mean_train_eps2: f64,
    /// FD-vs-analytical RMSE over all mesh nodes at each test viscosity.
    pub reference_rmse: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub mode: Mode,
    pub scenarios: Vec<ScenarioSummary>,
    pub incomplete: bool,
}

fn fd_rows(sol: &FdSolution, cfg: &ExperimentConfig) -> Vec<FdRow> {
    let problem = cfg.problem();
    sol.mesh
        .nodes()
        .iter()
        .zip(&sol.values)
        .map(|(&x, &u)| {
            let a = problem.u(x, sol.nu);
            FdRow {
                x,
                u_numeric: u,
                u_analytic: a,
                epsilon: a - u,
            }
        })
        .collect()
}

fn solve_pairs(cfg: &ExperimentConfig, pairs: &[(usize, f64)]) -> Vec<(usize, f64, pinnlab::Result<FdSolution>)> {
    let problem = cfg.problem();
    run_pool(cfg.workers, pairs, |&(nodes, nu)| {
        let r = build_mesh(nodes).and_then(|m| solve_steady(&m, Viscosity::new(nu)?, &problem, &cfg.solver));
        (nodes, nu, r)
    })
}

/// Solves every FD problem the config's tags need, then writes solutions,
/// datasets and summaries. Non-convergent solves are recorded in the report,
/// the remaining outputs are still written, and the command fails.
pub fn generate_data(cfg: &ExperimentConfig) -> Result<DataSummary> {
    let started = Instant::now();
    let problem = cfg.problem();
    let pairs = required_solves(cfg.mode, &cfg.tags);
    let mut bank = FdBank::new();
    let mut report = FdReport::default();
    let mut first_err = None;
    for (nodes, nu, r) in solve_pairs(cfg, &pairs) {
        match r {
            Ok(sol) => {
                art::write_file(&cfg.out_dir.join("fd").join(art::fd_file_name(nodes, nu)), &art::fd_csv(&fd_rows(&sol, cfg)))?;
                report.solves.push(FdRecord {
                    nodes,
                    nu,
                    rmse_vs_analytic: sol.rmse_vs_analytic(&problem),
                    iterations: sol.iterations,
                    final_residual: sol.final_residual,
                    tolerance: sol.tolerance,
                });
                art::append_log(
                    &log_path(cfg, "generate-data"),
                    &format!("solved n={nodes} nu={nu:e} in {} iterations", sol.iterations),
                )?;
                bank.insert(sol);
            }
            Err(e) => {
                report.failed.push(FdFailure {
                    nodes,
                    nu,
                    error: e.to_string(),
                });
                first_err.get_or_insert(CliError::Core {
                    context: format!("FD solve n={nodes} nu={nu:e}"),
                    source: e,
                });
            }
        }
    }
    merge_reference(&cfg.out_dir.join("fd").join("reference.json"), &mut report)?;
    let reference = report.reference();

    let mut scenarios = Vec::new();
    for &tag in &cfg.tags {
        let ds = match build_scenario(cfg.mode, tag, &bank, &problem) {
            Ok(ds) => ds,
            Err(pinnlab::Error::MissingSolution(_)) if first_err.is_some() => continue,
            Err(e) => return Err(e).context(|| format!("building {} {tag}", cfg.mode)),
        };
        let dir = data_dir(cfg, tag);
        for (name, pts) in dataset_files(&ds) {
            art::write_file(&dir.join(name), &art::dataset_csv(pts)?)?;
        }
        let (collocation, train, test, bc) = ds.sizes();
        let reference_rmse = cfg
            .mode
            .test_viscosities()
            .into_iter()
            .map(|nu| {
                let r = match tag.mesh_nodes() {
                    Some(n) => reference.get(n, nu).unwrap_or(f64::NAN),
                    None => 0.0,
                };
                (nu, r)
            })
            .collect();
        let s = ScenarioSummary {
            tag,
            collocation,
            train,
            test,
            bc,
            mean_train_eps2: mean_eps2(&ds.train, &problem).context(|| format!("{tag} label errors"))?,
            reference_rmse,
        };
        art::write_json(&dir.join("summary.json"), &s)?;
        scenarios.push(s);
    }
    let summary = DataSummary {
        mode: cfg.mode,
        scenarios,
        incomplete: first_err.is_some(),
    };
    let base = cfg.out_dir.join("data").join(cfg.mode.to_string());
    art::write_json(&base.join("summary.json"), &summary)?;
    write_config(&base, cfg)?;
    art::append_log(
        &log_path(cfg, "generate-data"),
        &format!("generate-data {} finished in {:.1}s", cfg.mode, started.elapsed().as_secs_f64()),
    )?;
    match first_err {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

/// Keeps entries from earlier invocations (other modes or tags) in the
/// shared reference file; entries are ordered by (nodes, ν).
fn merge_reference(path: &Path, report: &mut FdReport) -> Result<()> {
    if let Ok(bytes) = std::fs::read(path) {
        if let Ok(old) = serde_json::from_slice::<FdReport>(&bytes) {
            for s in old.solves {
                let dup = report
                    .solves
                    .iter()
                    .any(|r| r.nodes == s.nodes && r.nu.to_bits() == s.nu.to_bits());
                if !dup {
                    report.solves.push(s);
                }
            }
        }
    }
    report.solves.sort_by(|a, b| a.nodes.cmp(&b.nodes).then(a.nu.total_cmp(&b.nu)));
    report.failed.sort_by(|a, b| a.nodes.cmp(&b.nodes).then(a.nu.total_cmp(&b.nu)));
    art::write_json(path, report)
}

fn dataset_files(ds: &ScenarioDataset) -> Vec<(&'static str, &[DataPoint])> {
    let mut v = vec![
        ("collocation.csv", ds.collocation.as_slice()),
        ("train.csv", ds.train.as_slice()),
        ("test.csv", ds.test.as_slice()),
        ("bc.csv", ds.bc.as_slice()),
    ];
    if !ds.warmup_extra.is_empty() {
        v.push(("warmup.csv", ds.warmup_extra.as_slice()));
    }
    v
}

/// Loads a dataset written by [`generate_data`].
pub fn load_dataset(cfg: &ExperimentConfig, tag: Tag) -> Result<ScenarioDataset> {
    let dir = data_dir(cfg, tag);
    let read = |name: &str| art::load(&dir.join(name), art::parse_dataset_csv);
    let warmup_path = dir.join("warmup.csv");
    let warmup_extra = match cfg.mode {
        Mode::Parametric => art::load(&warmup_path, art::parse_dataset_csv)?,
        Mode::Standard => Vec::new(),
    };
    Ok(ScenarioDataset {
        mode: cfg.mode,
        tag,
        collocation: read("collocation.csv")?,
        train: read("train.csv")?,
        test: read("test.csv")?,
        bc: read("bc.csv")?,
        warmup_extra,
    })
}

pub fn load_reference(cfg: &ExperimentConfig) -> Result<FdReport> {
    let path = cfg.out_dir.join("fd").join("reference.json");
    let bytes = art::read_file(&path)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::format(&path, e.to_string()))
}

// ---------- train ----------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub mode: Mode,
    pub tag: Tag,
    pub weighting: Weighting,
    pub seed: u64,
    pub termination: Termination,
    pub iterations: usize,
    pub final_loss: LossBreakdown,
    pub final_test_rmse: f64,
    /// Network-vs-manufactured RMSE over the scenario's mesh nodes, per test ν.
    pub rmse_vs_analytic: Vec<(f64, f64)>,
    /// FD-vs-manufactured RMSE on the same nodes, where available.
    pub reference_rmse: Vec<(f64, Option<f64>)>,
}

/// Trains one network and writes its run directory.
pub fn train_one(cfg: &ExperimentConfig, tag: Tag, weighting: Weighting, reference: &FdReference) -> Result<(TrainSummary, RunRecord)> {
    let started = Instant::now();
    let problem = cfg.problem();
    let ds = load_dataset(cfg, tag)?;
    let set = ds.training_set(&problem).context(|| format!("assembling {tag} training set"))?;
    let ctx = || format!("training {} {tag} {} seed {}", cfg.mode, weighting.label(), cfg.seed);
    let record = run_schedule(&set, &cfg.layer_sizes(), &cfg.schedule(), cfg.seed, weighting).context(ctx)?;
    let report = evaluate_vs_analytic(
        &NetPredictor {
            params: &record.params,
            mode: cfg.mode,
        },
        &ds,
        &[],
        reference,
        &problem,
    )
    .context(ctx)?;
    let summary = TrainSummary {
        mode: cfg.mode,
        tag,
        weighting,
        seed: cfg.seed,
        termination: record.termination.clone(),
        iterations: record.iterations,
        final_loss: record.final_loss,
        final_test_rmse: record.final_test_rmse,
        rmse_vs_analytic: report.rmse_vs_analytic_at_nodes.iter().map(|r| (r.nu, r.rmse_vs_analytic)).collect(),
        reference_rmse: report.rmse_vs_analytic_at_nodes.iter().map(|r| (r.nu, r.numeric_vs_analytic)).collect(),
    };
    let dir = run_dir(cfg, tag, &weighting);
    art::write_file(&dir.join("trace.csv"), &art::trace_csv(&record.trace))?;
    art::write_json(&dir.join("summary.json"), &summary)?;
    let ck = Checkpoint::new(&record.params, record.log_sigmas).to_json()?;
    art::write_file(&dir.join("checkpoint.json"), format!("{ck}\n").as_bytes())?;
    write_config(&dir, cfg)?;
    art::append_log(
        &dir.join("run.log"),
        &format!("{} iterations in {:.1}s", record.iterations, started.elapsed().as_secs_f64()),
    )?;
    Ok((summary, record))
}

/// Trains every configured tag with the configured weighting.
pub fn train(cfg: &ExperimentConfig) -> Result<Vec<TrainSummary>> {
    let reference = load_reference(cfg)?.reference();
    let results = run_pool(cfg.workers, &cfg.tags, |&tag| train_one(cfg, tag, cfg.weighting, &reference));
    let mut out = Vec::new();
    for r in results {
        let (s, _) = r?;
        art::append_log(
            &log_path(cfg, "train"),
            &format!("{} {} {}: rmse_vs_analytic {:?}", s.mode, s.tag, s.weighting.label(), s.rmse_vs_analytic),
        )?;
        out.push(s);
    }
    Ok(out)
}

// ---------- pareto ----------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalPoint {
    pub alpha: Option<f64>,
    pub l_pde: f64,
    pub l_d: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoSummary {
    pub mode: Mode,
    pub tag: Tag,
    pub seed: u64,
    pub finals: Vec<FinalPoint>,
    /// Indices into `finals` of the non-dominated fixed-weight runs.
    pub front: Vec<usize>,
    pub lbpinn: FinalPoint,
}

/// What a sweep run contributes to the trajectory file.
struct RunTrace {
    points: Vec<(usize, f64, f64)>,
    iterations: usize,
    final_loss: (f64, f64),
}

impl RunTrace {
    fn from_record(r: &RunRecord) -> Self {
        Self {
            points: r.trace.iter().map(|t| (t.iter, t.l_pde, t.l_d)).collect(),
            iterations: r.iterations,
            final_loss: (r.final_loss.l_pde, r.final_loss.l_d),
        }
    }

    fn rows(&self, alpha: AlphaLabel) -> Vec<ParetoRow> {
        let mut rows: Vec<ParetoRow> = self
            .points
            .iter()
            .filter(|p| p.0 != self.iterations)
            .map(|&(iter, l_pde, l_d)| ParetoRow {
                alpha,
                iter,
                l_pde,
                l_d,
                is_final: false,
            })
            .collect();
        rows.push(ParetoRow {
            alpha,
            iter: self.iterations,
            l_pde: self.final_loss.0,
            l_d: self.final_loss.1,
            is_final: true,
        });
        rows
    }
}

/// Loads the learned-weight run from `train` when it was produced with the
/// same settings, so it is not trained twice.
fn existing_lbpinn(cfg: &ExperimentConfig, tag: Tag) -> Option<RunTrace> {
    let dir = run_dir(cfg, tag, &Weighting::LbPinn);
    let stored: ExperimentConfig = serde_json::from_slice(&std::fs::read(dir.join("config.json")).ok()?).ok()?;
    let same = stored.mode == cfg.mode
        && stored.preset == cfg.preset
        && stored.schedule() == cfg.schedule()
        && stored.seed == cfg.seed
        && stored.log_base == cfg.log_base
        && stored.solver == cfg.solver;
    if !same {
        return None;
    }
    let summary: TrainSummary = serde_json::from_slice(&std::fs::read(dir.join("summary.json")).ok()?).ok()?;
    let trace = art::parse_trace_csv(&std::fs::read(dir.join("trace.csv")).ok()?).ok()?;
    Some(RunTrace {
        points: trace.iter().map(|t| (t.iter, t.l_pde, t.l_d)).collect(),
        iterations: summary.iterations,
        final_loss: (summary.final_loss.l_pde, summary.final_loss.l_d),
    })
}

/// Fixed-weight sweep over `cfg.alphas` plus the learned-weight overlay, for
/// every configured tag. All runs of all tags share one worker pool.
pub fn pareto(cfg: &ExperimentConfig) -> Result<Vec<ParetoSummary>> {
    let reference = load_reference(cfg)?.reference();
    let mut jobs: Vec<(Tag, Weighting)> = Vec::new();
    let mut reused: Vec<(Tag, RunTrace)> = Vec::new();
    for &tag in &cfg.tags {
        load_dataset(cfg, tag)?;
        for &alpha in &cfg.alphas {
            jobs.push((tag, Weighting::Fixed { alpha }));
        }
        match existing_lbpinn(cfg, tag) {
            Some(t) => reused.push((tag, t)),
            None => jobs.push((tag, Weighting::LbPinn)),
        }
    }
    let ran = run_pool(cfg.workers, &jobs, |&(tag, w)| {
        if w.has_sigmas() {
            train_one(cfg, tag, w, &reference).map(|(_, r)| r)
        } else {
            let problem = cfg.problem();
            let set = load_dataset(cfg, tag)?
                .training_set(&problem)
                .context(|| format!("assembling {tag} training set"))?;
            run_schedule(&set, &cfg.layer_sizes(), &cfg.schedule(), cfg.seed, w)
                .context(|| format!("sweep {} {tag} {} seed {}", cfg.mode, w.label(), cfg.seed))
        }
    });
    let mut traces: Vec<(Tag, Weighting, RunTrace)> = Vec::new();
    for ((tag, w), r) in jobs.iter().zip(ran) {
        traces.push((*tag, *w, RunTrace::from_record(&r?)));
    }
    for (tag, t) in reused {
        traces.push((tag, Weighting::LbPinn, t));
    }

    let mut out = Vec::new();
    for &tag in &cfg.tags {
        let mut rows = Vec::new();
        let mut finals = Vec::new();
        let mut lbpinn = None;
        for (_, w, t) in traces.iter().filter(|(t, _, _)| *t == tag) {
            match *w {
                Weighting::Fixed { alpha } => {
                    rows.extend(t.rows(AlphaLabel::Fixed(alpha)));
                    finals.push(FinalPoint {
                        alpha: Some(alpha),
                        l_pde: t.final_loss.0,
                        l_d: t.final_loss.1,
                    });
                }
                Weighting::LbPinn => {
                    rows.extend(t.rows(AlphaLabel::LbPinn));
                    lbpinn = Some(FinalPoint {
                        alpha: None,
                        l_pde: t.final_loss.0,
                        l_d: t.final_loss.1,
                    });
                }
            }
        }
        let xy: Vec<(f64, f64)> = finals.iter().map(|p| (p.l_pde, p.l_d)).collect();
        let front = pareto_front(&xy);
        let front_pts: Vec<FrontPoint> = front
            .iter()
            .map(|&i| FrontPoint {
                alpha: finals[i].alpha.unwrap_or(f64::NAN),
                l_pde: finals[i].l_pde,
                l_d: finals[i].l_d,
            })
            .collect();
        let dir = pareto_dir(cfg, tag);
        art::write_file(&dir.join("trajectories.csv"), &art::pareto_csv(&rows))?;
        art::write_file(&dir.join("front.csv"), &art::front_csv(&front_pts))?;
        let summary = ParetoSummary {
            mode: cfg.mode,
            tag,
            seed: cfg.seed,
            finals,
            front,
            lbpinn: lbpinn.expect("every tag has a learned-weight run"),
        };
        art::write_json(&dir.join("summary.json"), &summary)?;
        write_config(&dir, cfg)?;
        out.push(summary);
    }
    art::append_log(&log_path(cfg, "pareto"), &format!("pareto {} finished", cfg.mode))?;
    Ok(out)
}

// ---------- evaluate ----------

/// What to evaluate.
#[derive(Clone, Debug, PartialEq)]
pub enum EvalSource {
    /// The checkpoint `train` wrote for the config's weighting and seed.
    TrainedRun,
    Checkpoint(PathBuf),
    /// The manufactured solution itself; every error is zero.
    Oracle,
}

impl EvalSource {
    fn label(&self, cfg: &ExperimentConfig) -> String {
        match self {
            EvalSource::TrainedRun => format!("{}_seed{}", cfg.weighting.label(), cfg.seed),
            EvalSource::Checkpoint(p) => {
                let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("checkpoint");
                format!("ckpt_{stem}")
            }
            EvalSource::Oracle => "oracle".into(),
        }
    }
}

fn load_checkpoint(path: &Path, cfg: &ExperimentConfig) -> Result<NetParams> {
    let bytes = art::read_file(path)?;
    let ck = Checkpoint::from_json(&bytes).map_err(|e| CliError::format(path, e.to_string()))?;
    if ck.layer_sizes != cfg.layer_sizes() {
        return Err(CliError::Config(format!(
            "checkpoint {} has layers {:?} but the config expects {:?}",
            path.display(),
            ck.layer_sizes,
            cfg.layer_sizes()
        )));
    }
    ck.net().map_err(|e| CliError::format(path, e.to_string()))
}

/// Writes report JSON, per-ν curves and a merged boxplot table.
pub fn evaluate(cfg: &ExperimentConfig, source: &EvalSource) -> Result<Vec<EvalReport>> {
    let problem = cfg.problem();
    let mut fd = load_reference(cfg)?;
    let grid = log_grid(cfg.eval_grid);
    if cfg.eval_fd_reference {
        let mut pairs = Vec::new();
        for tag in &cfg.tags {
            let Some(n) = tag.mesh_nodes() else { continue };
            for &nu in &grid {
                let have = fd.solves.iter().any(|s| s.nodes == n && s.nu.to_bits() == nu.to_bits());
                if !have && !pairs.contains(&(n, nu)) {
                    pairs.push((n, nu));
                }
            }
        }
        for (nodes, nu, r) in solve_pairs(cfg, &pairs) {
            let sol = r.context(|| format!("FD reference n={nodes} nu={nu:e}"))?;
            fd.solves.push(FdRecord {
                nodes,
                nu,
                rmse_vs_analytic: sol.rmse_vs_analytic(&problem),
                iterations: sol.iterations,
                final_residual: sol.final_residual,
                tolerance: sol.tolerance,
            });
        }
    }
    let reference = fd.reference();
    let label = source.label(cfg);
    let base = cfg.out_dir.join("eval").join(cfg.mode.to_string()).join(&label);
    let mut reports = Vec::new();
    let mut box_rows = Vec::new();
    for &tag in &cfg.tags {
        let ds = load_dataset(cfg, tag)?;
        let params;
        let predictor: Box<dyn Predictor + '_> = match source {
            EvalSource::Oracle => Box::new(MmsOracle(problem)),
            EvalSource::TrainedRun => {
                params = load_checkpoint(&run_dir(cfg, tag, &cfg.weighting).join("checkpoint.json"), cfg)?;
                Box::new(NetPredictor {
                    params: &params,
                    mode: cfg.mode,
                })
            }
            EvalSource::Checkpoint(p) => {
                params = load_checkpoint(p, cfg)?;
                Box::new(NetPredictor {
                    params: &params,
                    mode: cfg.mode,
                })
            }
        };
        let report = evaluate_vs_analytic(predictor.as_ref(), &ds, &grid, &reference, &problem)
            .context(|| format!("evaluating {tag}"))?;
        let dir = base.join(tag.to_string());
        art::write_json(&dir.join("report.json"), &report)?;
        art::write_file(&dir.join("curve.csv"), &art::curve_csv(&report.per_nu_curve))?;
        box_rows.extend(report.per_nu_curve.iter().map(|r| (tag.to_string(), r.nu, r.rmse_vs_analytic)));
        reports.push(report);
    }
    art::write_file(&base.join("boxplot.csv"), &art::boxplot_csv(&box_rows))?;
    write_config(&base, cfg)?;
    Ok(reports)
}
