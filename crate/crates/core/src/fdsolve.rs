//! Explicit pseudo-time finite-difference solver for the steady forced
//! Burgers problem on a uniform mesh over [-1, 1].
//!
//! Convection uses the second-order upwind stencil (first-order at node 1),
//! diffusion uses second-order central differences, and the outflow node is
//! closed with a one-sided second-order diffusion stencil without imposing a
//! value there. The inflow node is pinned to the manufactured solution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mms::{Manufactured, Viscosity};

/// Uniform node layout over [-1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    nodes: Vec<f64>,
    dx: f64,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }
}

pub fn build_mesh(n_nodes: usize) -> Result<Mesh> {
    if n_nodes < 5 {
        return Err(Error::MeshTooSmall(n_nodes));
    }
    let intervals = (n_nodes - 1) as f64;
    let dx = 2.0 / intervals;
    let mut nodes: Vec<f64> = (0..n_nodes).map(|i| -1.0 + 2.0 * i as f64 / intervals).collect();
    nodes[n_nodes - 1] = 1.0;
    Ok(Mesh { nodes, dx })
}

/// Starting field for the pseudo-time march.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    /// Manufactured field sampled at the nodes.
    #[default]
    Manufactured,
    /// Inflow value everywhere. On coarse meshes the early transient drives
    /// the field negative and the march settles on a spurious shocked branch.
    ConstantInflow,
}

/// Explicit pseudo-time integrator. Both are built from the forward Euler
/// update `u ← u − Δt·R(u)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Three-stage strong-stability-preserving Runge-Kutta (convex
    /// combinations of Euler stages).
    #[default]
    SspRk3,
    /// Single Euler stage. Unstable with the upwind stencil once the cell
    /// Péclet number is large and many sweeps are needed (fine meshes, small ν).
    ForwardEuler,
}

/// Pseudo-time iteration controls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub cfl: f64,
    /// Stop once the max-norm of the discrete residual falls below this,
    /// or below `floor_factor` times the estimated round-off floor of the
    /// residual evaluation, whichever is larger.
    pub tol: f64,
    pub floor_factor: f64,
    pub max_iters: usize,
    pub integrator: Integrator,
    pub initial_guess: InitialGuess,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            tol: 1e-12,
            floor_factor: 2.0,
            max_iters: 50_000_000,
            integrator: Integrator::default(),
            initial_guess: InitialGuess::default(),
        }
    }
}

impl SolverSettings {
    fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::InvalidSolverSetting(format!("cfl {} not in (0, 1)", self.cfl)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidSolverSetting(format!("tolerance {} not positive", self.tol)));
        }
        if !(self.floor_factor >= 0.0 && self.floor_factor.is_finite()) {
            return Err(Error::InvalidSolverSetting(format!("floor factor {} invalid", self.floor_factor)));
        }
        Ok(())
    }
}

/// Converged steady field on one mesh for one viscosity.
#[derive(Clone, Debug)]
pub struct FdSolution {
    pub mesh: Mesh,
    pub nu: Viscosity,
    pub values: Vec<f64>,
    pub iterations: usize,
    pub final_residual: f64,
    /// Tolerance actually enforced (see [`SolverSettings::tol`]).
    pub tolerance: f64,
}

impl FdSolution {
    /// Value at the node nearest to `x`. Fails if `x` is not within a
    /// millionth of a spacing from that node.
    pub fn value_at(&self, x: f64) -> Result<f64> {
        let i = crate::scenarios::nearest_node(x, &self.mesh);
        if (self.mesh.nodes[i] - x).abs() > 1e-6 * self.mesh.dx {
            return Err(Error::OffMesh(x));
        }
        Ok(self.values[i])
    }

    /// Root-mean-square deviation from the manufactured solution over all nodes.
    pub fn rmse_vs_analytic(&self, problem: &Manufactured) -> f64 {
        let n = self.values.len() as f64;
        let sum: f64 = label_errors(self, problem).iter().map(|e| e.epsilon * e.epsilon).sum();
        (sum / n).sqrt()
    }
}

/// Deviation `ũ − u` of a numerical label from the exact field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabelError {
    pub location: f64,
    pub epsilon: f64,
}

pub fn label_errors(solution: &FdSolution, problem: &Manufactured) -> Vec<LabelError> {
    solution
        .mesh
        .nodes
        .iter()
        .zip(&solution.values)
        .map(|(&x, &v)| LabelError {
            location: x,
            epsilon: v - problem.u(x, solution.nu),
        })
        .collect()
}

/// Discrete steady residual with the manufactured forcing.
pub fn spatial_residual(values: &[f64], mesh: &Mesh, nu: Viscosity, problem: &Manufactured) -> Vec<f64> {
    let source: Vec<f64> = mesh.nodes.iter().map(|&x| problem.source(x, nu)).collect();
    spatial_residual_with_source(values, mesh, nu, &source)
}

/// Discrete steady residual `u·D₁u − ν·D₂u − S` at every node for an
/// arbitrary per-node forcing. Entry 0 (Dirichlet inflow) is always zero.
pub fn spatial_residual_with_source(values: &[f64], mesh: &Mesh, nu: Viscosity, source: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    residual_into(values, mesh.dx, nu.value(), source, &mut out);
    out
}

/// Writes the residual into `out` and returns its max-norm over nodes 1..n.
///
/// Convection is upwinded on the sign of the local velocity. The steady field
/// is strictly positive, so at convergence only the backward stencils are
/// active; forward stencils exist for pseudo-time transients that dip below
/// zero.
fn residual_into(u: &[f64], dx: f64, nu: f64, source: &[f64], out: &mut [f64]) -> f64 {
    let n = u.len();
    let inv_2dx = 1.0 / (2.0 * dx);
    let inv_dx = 1.0 / dx;
    let inv_dx2 = 1.0 / (dx * dx);
    out[0] = 0.0;
    let mut max = 0.0f64;

    for i in 1..n {
        let ui = u[i];
        let conv = if ui >= 0.0 || i == n - 1 {
            if i == 1 {
                (ui - u[0]) * inv_dx
            } else {
                (3.0 * ui - 4.0 * u[i - 1] + u[i - 2]) * inv_2dx
            }
        } else if i + 2 < n {
            (-3.0 * ui + 4.0 * u[i + 1] - u[i + 2]) * inv_2dx
        } else {
            (u[i + 1] - ui) * inv_dx
        };
        let diff = if i + 1 < n {
            (u[i + 1] - 2.0 * ui + u[i - 1]) * inv_dx2
        } else {
            (2.0 * ui - 5.0 * u[i - 1] + 4.0 * u[i - 2] - u[i - 3]) * inv_dx2
        };
        let r = ui * conv - nu * diff - source[i];
        out[i] = r;
        max = max.max(r.abs());
    }
    max
}

fn time_step(u: &[f64], dx: f64, nu: f64, cfl: f64) -> f64 {
    let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let convective = if umax > 0.0 { dx / umax } else { f64::INFINITY };
    let diffusive = dx * dx / (2.0 * nu);
    cfl * convective.min(diffusive)
}

/// Worst-case round-off in one residual evaluation, from the stencil
/// weights and the magnitudes involved.
pub fn residual_roundoff_floor(values: &[f64], dx: f64, nu: f64, source: &[f64]) -> f64 {
    let conv_w = 8.0 / (2.0 * dx);
    let diff_w = 12.0 / (dx * dx);
    values
        .iter()
        .zip(source)
        .map(|(&u, &s)| f64::EPSILON * (u.abs() * u.abs() * conv_w + nu * u.abs() * diff_w + s.abs()))
        .fold(0.0, f64::max)
}

/// One pseudo-time step from `values` whose residual is already in
/// `residual`. Returns Δt. Node 0 is left untouched.
fn advance(
    values: &mut [f64],
    residual: &mut [f64],
    stage: &mut [f64],
    dx: f64,
    nu: f64,
    source: &[f64],
    settings: &SolverSettings,
) -> f64 {
    let n = values.len();
    let dt = time_step(values, dx, nu, settings.cfl);
    match settings.integrator {
        Integrator::ForwardEuler => {
            for (v, r) in values[1..].iter_mut().zip(&residual[1..]) {
                *v -= dt * r;
            }
        }
        Integrator::SspRk3 => {
            // u1 = u - dt R(u)
            stage[0] = values[0];
            for i in 1..n {
                stage[i] = values[i] - dt * residual[i];
            }
            // u2 = 3/4 u + 1/4 (u1 - dt R(u1))
            residual_into(stage, dx, nu, source, residual);
            for i in 1..n {
                stage[i] = 0.75 * values[i] + 0.25 * (stage[i] - dt * residual[i]);
            }
            // u = 1/3 u + 2/3 (u2 - dt R(u2))
            residual_into(stage, dx, nu, source, residual);
            for i in 1..n {
                values[i] = values[i] / 3.0 + 2.0 / 3.0 * (stage[i] - dt * residual[i]);
            }
        }
    }
    dt
}

/// Applies a single pseudo-time sweep in place and returns the Δt used.
pub fn sweep(values: &mut [f64], mesh: &Mesh, nu: Viscosity, problem: &Manufactured, settings: &SolverSettings) -> Result<f64> {
    settings.validate()?;
    if values.len() != mesh.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_nodes(),
            got: values.len(),
        });
    }
    let source: Vec<f64> = mesh.nodes.iter().map(|&x| problem.source(x, nu)).collect();
    let mut residual = vec![0.0; values.len()];
    let mut stage = vec![0.0; values.len()];
    residual_into(values, mesh.dx, nu.value(), &source, &mut residual);
    Ok(advance(values, &mut residual, &mut stage, mesh.dx, nu.value(), &source, settings))
}

/// Marches the pseudo-time system until the residual max-norm drops below
/// the effective tolerance. The inflow node is never touched.
pub fn solve_steady(mesh: &Mesh, nu: Viscosity, problem: &Manufactured, settings: &SolverSettings) -> Result<FdSolution> {
    settings.validate()?;
    let n = mesh.n_nodes();
    let nu_v = nu.value();
    let dx = mesh.dx;
    let source: Vec<f64> = mesh.nodes.iter().map(|&x| problem.source(x, nu)).collect();
    let mut values: Vec<f64> = match settings.initial_guess {
        InitialGuess::Manufactured => mesh.nodes.iter().map(|&x| problem.u(x, nu)).collect(),
        InitialGuess::ConstantInflow => vec![problem.inflow(nu); n],
    };
    values[0] = problem.inflow(nu);
    let exact: Vec<f64> = mesh.nodes.iter().map(|&x| problem.u(x, nu)).collect();
    let tol = settings
        .tol
        .max(settings.floor_factor * residual_roundoff_floor(&exact, dx, nu_v, &source));

    let mut residual = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let mut iterations = 0;
    loop {
        let max_r = residual_into(&values, dx, nu_v, &source, &mut residual);
        if !max_r.is_finite() {
            let node = residual.iter().position(|v| !v.is_finite()).unwrap_or(0);
            return Err(Error::Divergence { iteration: iterations, node });
        }
        if max_r < tol {
            return Ok(FdSolution {
                mesh: mesh.clone(),
                nu,
                values,
                iterations,
                final_residual: max_r,
                tolerance: tol,
            });
        }
        if iterations >= settings.max_iters {
            return Err(Error::NonConvergence {
                iterations,
                residual: max_r,
                tol,
            });
        }
        advance(&mut values, &mut residual, &mut stage, dx, nu_v, &source, settings);
        iterations += 1;
    }
}
