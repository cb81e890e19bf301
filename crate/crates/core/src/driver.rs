//! The adaptive solve / estimate / mark / refine loop, a uniform-refinement
//! loop for rate studies, and run logging.

use std::fmt::Write as _;

use crate::assembly::{
    assemble, default_max_iters, galerkin_orthogonality_check, solve_cg, AssemblyMode, Quadrature,
    SolverReport, CG_REL_TOL,
};
use crate::error::{Error, Result};
use crate::estimator::{compute_indicators, u_norm_error, Indicators};
use crate::marking::{verify_marking_property, MarkingConfig};
use crate::mesh::Mesh;
use crate::spaces::Discretization;
use crate::system::{FirstOrderSystem, ReferenceSolution};

/// Bound on the Galerkin orthogonality defect accepted after every solve.
pub const GALERKIN_DEFECT_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopCriteria {
    /// Maximum number of solves (levels).
    pub max_iterations: usize,
    /// Stop once the dof count reaches this value.
    pub max_dofs: usize,
    /// Stop once `eta <= estimator_tolerance`.
    pub estimator_tolerance: f64,
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self {
            max_iterations: usize::MAX,
            max_dofs: usize::MAX,
            estimator_tolerance: 0.0,
        }
    }
}

impl StopCriteria {
    pub fn validate(&self) -> Result<()> {
        if self.estimator_tolerance.is_nan() || self.estimator_tolerance < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tolerance {} must be >= 0",
                self.estimator_tolerance
            )));
        }
        if self.max_iterations == 0 || self.max_dofs == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations and max_dofs must be positive".into(),
            ));
        }
        if self.max_iterations == usize::MAX
            && self.max_dofs == usize::MAX
            && self.estimator_tolerance == 0.0
        {
            return Err(Error::InvalidParameter(
                "at least one stopping criterion must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Knobs shared by both loops.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveSettings {
    pub degree: usize,
    pub mode: AssemblyMode,
    pub cg_tolerance: f64,
}

impl SolveSettings {
    pub fn new(degree: usize) -> Self {
        Self {
            degree,
            mode: AssemblyMode::Sequential,
            cg_tolerance: CG_REL_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub level: usize,
    pub dofs: usize,
    pub elements: usize,
    pub estimator: f64,
    /// `||u - u_h||_U` when a reference solution is known.
    pub error: Option<f64>,
    pub marked: usize,
    pub solver: SolverReport,
    pub galerkin_defect: f64,
    pub h_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TerminalReason {
    MaxIterations,
    MaxDofs,
    Tolerance,
    /// All indicators vanish: the discrete solution is exact.
    ZeroEstimator,
    /// Requested number of uniform levels done.
    LevelsCompleted,
}

impl TerminalReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminalReason::MaxIterations => "max_iterations",
            TerminalReason::MaxDofs => "max_dofs",
            TerminalReason::Tolerance => "tolerance",
            TerminalReason::ZeroEstimator => "zero_estimator",
            TerminalReason::LevelsCompleted => "levels_completed",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub system: String,
    pub records: Vec<RunRecord>,
    pub reason: TerminalReason,
}

impl RunLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,dofs,elements,estimator,error,marked,cg_iters\n");
        for r in &self.records {
            let error = r.error.map(|e| format!("{e:.12e}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{:.12e},{},{},{}",
                r.level, r.dofs, r.elements, r.estimator, error, r.marked, r.solver.iterations
            );
        }
        out
    }
}

/// A solved level: the discretization, its coefficients and diagnostics.
pub struct LevelSolution {
    pub disc: Discretization,
    pub coeffs: Vec<f64>,
    pub solver: SolverReport,
    pub indicators: Indicators,
    pub galerkin_defect: f64,
    pub error: Option<f64>,
}

/// Steps (i) and (ii): assemble, solve, and estimate on a fixed mesh.
pub fn solve_level(
    system: &dyn FirstOrderSystem,
    mesh: Mesh,
    settings: SolveSettings,
    reference: Option<&dyn ReferenceSolution>,
) -> Result<LevelSolution> {
    if !mesh.is_conforming() {
        return Err(Error::Invariant("mesh is not conforming".into()));
    }
    let disc = Discretization::new(
        mesh,
        settings.degree,
        system.constraint(),
        system.flux_components(),
    )?;
    let quad = Quadrature::for_degree(settings.degree)?;
    let sparse = assemble(&disc, system, &quad, settings.mode)?;
    let (coeffs, solver) = solve_cg(
        &sparse.matrix,
        &sparse.rhs,
        settings.cg_tolerance,
        default_max_iters(sparse.num_dofs()),
    );
    if !solver.converged {
        return Err(Error::SolverDiverged {
            iterations: solver.iterations,
            residual: solver.relative_residual,
        });
    }
    let galerkin_defect = galerkin_orthogonality_check(&disc, &coeffs, system, &quad)?;
    if galerkin_defect > GALERKIN_DEFECT_TOL {
        return Err(Error::Invariant(format!(
            "Galerkin defect {galerkin_defect:e} exceeds {GALERKIN_DEFECT_TOL:e}"
        )));
    }
    let indicators = compute_indicators(&disc, &coeffs, system, &quad)?;
    let error = match reference {
        Some(r) => Some(u_norm_error(&disc, &coeffs, system, r, &quad)?.total),
        None => None,
    };
    Ok(LevelSolution {
        disc,
        coeffs,
        solver,
        indicators,
        galerkin_defect,
        error,
    })
}

fn record(level: usize, sol: &LevelSolution, marked: usize) -> RunRecord {
    RunRecord {
        level,
        dofs: sol.disc.num_dofs(),
        elements: sol.disc.mesh.num_elements(),
        estimator: sol.indicators.global,
        error: sol.error,
        marked,
        solver: sol.solver,
        galerkin_defect: sol.galerkin_defect,
        h_max: sol.disc.mesh.max_diameter(),
    }
}

/// Result of a run: the log plus the last solved level.
pub struct RunOutcome {
    pub log: RunLog,
    pub last: LevelSolution,
}

impl RunOutcome {
    pub fn final_mesh(&self) -> &Mesh {
        &self.last.disc.mesh
    }
}

/// Solve, estimate, mark (checking the marking property with `M(t) = t`) and
/// refine by newest-vertex bisection until a stopping criterion holds.
pub fn adaptive_run(
    system: &dyn FirstOrderSystem,
    mesh0: Mesh,
    settings: SolveSettings,
    marking: MarkingConfig,
    stop: StopCriteria,
    reference: Option<&dyn ReferenceSolution>,
) -> Result<RunOutcome> {
    marking.validate()?;
    stop.validate()?;
    let mut records = Vec::new();
    let mut mesh = mesh0;
    let mut level = 0;
    loop {
        let sol = solve_level(system, mesh, settings, reference)?;
        let eta = &sol.indicators;
        let reason = if eta.local.iter().all(|&e| e == 0.0) {
            Some(TerminalReason::ZeroEstimator)
        } else if eta.global <= stop.estimator_tolerance {
            Some(TerminalReason::Tolerance)
        } else if level + 1 >= stop.max_iterations {
            Some(TerminalReason::MaxIterations)
        } else if sol.disc.num_dofs() >= stop.max_dofs {
            Some(TerminalReason::MaxDofs)
        } else {
            None
        };
        if let Some(reason) = reason {
            records.push(record(level, &sol, 0));
            return Ok(RunOutcome {
                log: RunLog {
                    system: system.name(),
                    records,
                    reason,
                },
                last: sol,
            });
        }
        let marks = marking.mark(&eta.local)?;
        if !verify_marking_property(&eta.local, &marks, |t| t) {
            return Err(Error::Invariant(format!(
                "marking property violated at level {level}"
            )));
        }
        records.push(record(level, &sol, marks.len()));
        let refinement = sol.disc.mesh.refine(&marks)?;
        if marks.iter().any(|k| !refinement.bisected[k]) {
            return Err(Error::Invariant(format!(
                "marked element left unrefined at level {level}"
            )));
        }
        mesh = refinement.mesh;
        level += 1;
    }
}

/// `levels` solves on successively uniformly refined meshes; each refinement
/// bisects every element twice so that `h_max` halves.
pub fn uniform_run(
    system: &dyn FirstOrderSystem,
    mesh0: Mesh,
    settings: SolveSettings,
    levels: usize,
    reference: Option<&dyn ReferenceSolution>,
) -> Result<RunOutcome> {
    if levels == 0 {
        return Err(Error::InvalidParameter("levels must be positive".into()));
    }
    let mut records = Vec::new();
    let mut mesh = mesh0;
    for level in 0..levels {
        let sol = solve_level(system, mesh, settings, reference)?;
        let marked = if level + 1 < levels {
            sol.disc.mesh.num_elements()
        } else {
            0
        };
        records.push(record(level, &sol, marked));
        if level + 1 == levels {
            let log = RunLog {
                system: system.name(),
                records,
                reason: TerminalReason::LevelsCompleted,
            };
            return Ok(RunOutcome { log, last: sol });
        }
        mesh = sol.disc.mesh.refine_uniform()?;
    }
    unreachable!("loop returns on the last level")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateRow {
    pub dofs: usize,
    pub estimator: f64,
    pub error: Option<f64>,
    /// Order with respect to `dofs^{-1/2}`; `None` on the first row.
    pub estimator_order: Option<f64>,
    pub error_order: Option<f64>,
}

/// Observed order `2 ln(e_prev / e) / ln(N / N_prev)` for a two-dimensional
/// space-time mesh with `N` dofs.
pub fn observed_order(prev: (usize, f64), cur: (usize, f64)) -> Option<f64> {
    let (n0, e0) = prev;
    let (n1, e1) = cur;
    if n1 <= n0 || e0 <= 0.0 || e1 <= 0.0 {
        return None;
    }
    Some(2.0 * (e0 / e1).ln() / (n1 as f64 / n0 as f64).ln())
}

pub fn rate_table(log: &RunLog) -> Result<Vec<RateRow>> {
    if log.records.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "rate table needs >= 2 records, got {}",
            log.records.len()
        )));
    }
    let mut rows = Vec::with_capacity(log.records.len());
    for (i, r) in log.records.iter().enumerate() {
        let (estimator_order, error_order) = if i == 0 {
            (None, None)
        } else {
            let p = &log.records[i - 1];
            let err = match (p.error, r.error) {
                (Some(a), Some(b)) => observed_order((p.dofs, a), (r.dofs, b)),
                _ => None,
            };
            (
                observed_order((p.dofs, p.estimator), (r.dofs, r.estimator)),
                err,
            )
        };
        rows.push(RateRow {
            dofs: r.dofs,
            estimator: r.estimator,
            error: r.error,
            estimator_order,
            error_order,
        });
    }
    Ok(rows)
}
