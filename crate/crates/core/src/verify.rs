//! Built-in self-check suite: oracle comparisons and randomized property trials.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::assembly::{
    assemble, default_max_iters, galerkin_orthogonality_check, solve_cg, AssemblyMode, Quadrature,
    CG_REL_TOL,
};
use crate::error::Result;
use crate::estimator::compute_indicators;
use crate::marking::{mark_doerfler, mark_maximum, unmarked_dominated, verify_marking_property};
use crate::mesh::{MarkSet, Mesh};
use crate::oracles::{
    dense_assemble, dense_solve, global_residual_norm, min_eigenvalue, relative_frobenius,
};
use crate::problem::{BuiltinCase, ConvectionForm};
use crate::quadrature::{interval_rule, triangle_rule};
use crate::spaces::Discretization;
use crate::system::{FirstOrderSystem, ParabolicSystem, PoissonSystem};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// `(label, system, mesh, degree)`.
type Instance = (String, Box<dyn FirstOrderSystem>, Mesh, usize);

/// Small instances shared by the oracle checks.
fn oracle_instances() -> Result<Vec<Instance>> {
    let parabolic = |case: BuiltinCase, form| -> Result<Box<dyn FirstOrderSystem>> {
        Ok(Box::new(ParabolicSystem::new(case.problem(form)?)))
    };
    let unit = |n| Mesh::uniform(1.0, (0.0, 1.0), n, n);
    Ok(vec![
        (
            "heat p=1".into(),
            parabolic(BuiltinCase::HeatSmooth, ConvectionForm::FluxForm)?,
            unit(2)?,
            1,
        ),
        (
            "heat p=2".into(),
            parabolic(BuiltinCase::HeatSmooth, ConvectionForm::FluxForm)?,
            unit(2)?,
            2,
        ),
        (
            "convection-reaction p=1".into(),
            parabolic(
                BuiltinCase::ConvectionReaction,
                ConvectionForm::GradientForm,
            )?,
            unit(4)?,
            1,
        ),
        (
            "variable-a p=2".into(),
            parabolic(BuiltinCase::VariableA, ConvectionForm::FluxForm)?,
            unit(2)?,
            2,
        ),
        (
            "incompatible p=1".into(),
            parabolic(BuiltinCase::Incompatible, ConvectionForm::FluxForm)?,
            unit(4)?,
            1,
        ),
        (
            "poisson p=1".into(),
            Box::new(PoissonSystem::smooth()),
            unit(4)?,
            1,
        ),
        (
            "poisson p=2".into(),
            Box::new(PoissonSystem::smooth()),
            unit(2)?,
            2,
        ),
    ])
}

fn check(
    name: &'static str,
    body: impl FnOnce() -> Result<std::result::Result<String, String>>,
) -> CheckResult {
    match body() {
        Ok(Ok(detail)) => CheckResult {
            name,
            passed: true,
            detail,
        },
        Ok(Err(detail)) => CheckResult {
            name,
            passed: false,
            detail,
        },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn quadrature_exactness() -> Result<std::result::Result<String, String>> {
    let mut worst: f64 = 0.0;
    for degree in 1..=12 {
        let tri = triangle_rule(degree)?;
        let line = interval_rule(degree)?;
        for i in 0..=degree {
            // int_0^1 s^i ds = 1 / (i + 1)
            let got: f64 = line.iter().map(|(p, w)| w * p[0].powi(i as i32)).sum();
            worst = worst.max((got - 1.0 / (i as f64 + 1.0)).abs());
            for j in 0..=degree - i {
                // int over the reference triangle of s^i r^j = i! j! / (i + j + 2)!
                let exact = factorial(i) * factorial(j) / factorial(i + j + 2);
                let got: f64 = tri
                    .iter()
                    .map(|(p, w)| w * p[0].powi(i as i32) * p[1].powi(j as i32))
                    .sum();
                worst = worst.max((got - exact).abs() / exact);
            }
        }
    }
    Ok(if worst <= 1e-13 {
        Ok(format!("max error {worst:.2e}"))
    } else {
        Err(format!("max error {worst:.2e}"))
    })
}

fn dense_assembly_equivalence() -> Result<std::result::Result<String, String>> {
    let mut worst: f64 = 0.0;
    for (label, system, mesh, p) in oracle_instances()? {
        let disc = Discretization::new(mesh, p, system.constraint(), system.flux_components())?;
        let quad = Quadrature::for_degree(p)?;
        let sparse = assemble(&disc, system.as_ref(), &quad, AssemblyMode::Sequential)?;
        let (dense, load) = dense_assemble(
            &disc.mesh,
            &disc.dofmap,
            system.as_ref(),
            quad.triangle.exactness(),
        )?;
        let err = relative_frobenius(&sparse.matrix.to_dense(), dense.as_slice())
            .max(relative_frobenius(&sparse.rhs, &load));
        if err > 1e-12 || !dense.is_symmetric() {
            return Ok(Err(format!("{label}: relative difference {err:.2e}")));
        }
        worst = worst.max(err);
    }
    Ok(Ok(format!("max relative difference {worst:.2e}")))
}

fn cg_vs_dense_solve() -> Result<std::result::Result<String, String>> {
    let mut worst: f64 = 0.0;
    for (label, system, mesh, p) in oracle_instances()? {
        let disc = Discretization::new(mesh, p, system.constraint(), system.flux_components())?;
        let quad = Quadrature::for_degree(p)?;
        let sparse = assemble(&disc, system.as_ref(), &quad, AssemblyMode::Sequential)?;
        let (cg, report) = solve_cg(
            &sparse.matrix,
            &sparse.rhs,
            CG_REL_TOL,
            default_max_iters(sparse.num_dofs()),
        );
        let dense = crate::oracles::DenseMatrix::from_row_major(
            sparse.num_dofs(),
            sparse.matrix.to_dense(),
        )?;
        let direct = dense_solve(&dense, &sparse.rhs)?;
        let err = relative_frobenius(&cg, &direct);
        if !report.converged || err > 1e-8 {
            return Ok(Err(format!(
                "{label}: relative difference {err:.2e}, converged {}",
                report.converged
            )));
        }
        worst = worst.max(err);
    }
    Ok(Ok(format!("max relative difference {worst:.2e}")))
}

fn spd_min_eigenvalue() -> Result<std::result::Result<String, String>> {
    let mut smallest = f64::INFINITY;
    for (label, system, mesh, p) in oracle_instances()? {
        let disc = Discretization::new(mesh, p, system.constraint(), system.flux_components())?;
        let (dense, _) = dense_assemble(&disc.mesh, &disc.dofmap, system.as_ref(), 2 * p + 2)?;
        let lambda = min_eigenvalue(&dense)?;
        if lambda <= 0.0 {
            return Ok(Err(format!("{label}: smallest eigenvalue {lambda:e}")));
        }
        smallest = smallest.min(lambda);
    }
    Ok(Ok(format!("smallest eigenvalue {smallest:.3e}")))
}

fn estimator_global_sweep() -> Result<std::result::Result<String, String>> {
    let mut worst: f64 = 0.0;
    for (label, system, mesh, p) in oracle_instances()? {
        let disc = Discretization::new(mesh, p, system.constraint(), system.flux_components())?;
        let quad = Quadrature::for_degree(p)?;
        let coeffs: Vec<f64> = (0..disc.num_dofs())
            .map(|i| (0.7 * i as f64).cos())
            .collect();
        let eta = compute_indicators(&disc, &coeffs, system.as_ref(), &quad)?.global;
        let sweep = global_residual_norm(
            &disc.mesh,
            &disc.dofmap,
            &coeffs,
            system.as_ref(),
            quad.triangle.exactness(),
        )?;
        let err = (eta - sweep).abs() / sweep;
        if err > 1e-12 {
            return Ok(Err(format!("{label}: {eta} vs {sweep}")));
        }
        worst = worst.max(err);
    }
    Ok(Ok(format!("max relative difference {worst:.2e}")))
}

fn galerkin_orthogonality() -> Result<std::result::Result<String, String>> {
    let mut worst: f64 = 0.0;
    for (label, system, mesh, p) in oracle_instances()? {
        let disc = Discretization::new(mesh, p, system.constraint(), system.flux_components())?;
        let quad = Quadrature::for_degree(p)?;
        let sparse = assemble(&disc, system.as_ref(), &quad, AssemblyMode::Sequential)?;
        let (coeffs, _) = solve_cg(
            &sparse.matrix,
            &sparse.rhs,
            CG_REL_TOL,
            default_max_iters(sparse.num_dofs()),
        );
        let defect = galerkin_orthogonality_check(&disc, &coeffs, system.as_ref(), &quad)?;
        if defect > 1e-8 {
            return Ok(Err(format!("{label}: defect {defect:.2e}")));
        }
        worst = worst.max(defect);
    }
    Ok(Ok(format!("max defect {worst:.2e}")))
}

/// One randomized refinement sequence from a small uniform mesh. Checks
/// conformity, that marked elements are bisected, that children have measure
/// `|parent| / 2^m` and that the pieces of a parent tile it, and that at most
/// 8 similarity classes arise per initial triangle.
pub fn random_nvb_trial(
    rng: &mut StdRng,
    rounds: usize,
) -> Result<std::result::Result<(), String>> {
    let (nt, nx) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
    let mut mesh = Mesh::uniform(
        rng.gen_range(0.5..2.0),
        (0.0, rng.gen_range(0.5..2.0)),
        nt,
        nx,
    )?;
    let fraction: f64 = rng.gen_range(0.05..0.5);
    for round in 0..rounds {
        let marks = MarkSet::new(
            (0..mesh.num_elements())
                .filter(|_| rng.gen::<f64>() < fraction)
                .collect(),
        );
        let refinement = mesh.refine(&marks)?;
        let fine = &refinement.mesh;
        if !fine.is_conforming() {
            return Ok(Err(format!("round {round}: non-conforming mesh")));
        }
        if let Some(k) = marks.iter().find(|&k| !refinement.bisected[k]) {
            return Ok(Err(format!(
                "round {round}: marked element {k} not bisected"
            )));
        }
        let mut covered = vec![0.0; mesh.num_elements()];
        for (k, &p) in refinement.parent.iter().enumerate() {
            let ratio = fine.element_measure(k) / mesh.element_measure(p);
            let m = -ratio.log2();
            if (m - m.round()).abs() > 1e-9 || (m.round() == 0.0) == refinement.bisected[p] {
                return Ok(Err(format!(
                    "round {round}: child {k} has measure ratio {ratio}"
                )));
            }
            covered[p] += fine.element_measure(k);
        }
        for (p, c) in covered.iter().enumerate() {
            if (c - mesh.element_measure(p)).abs() > 1e-12 * mesh.element_measure(p) {
                return Ok(Err(format!(
                    "round {round}: children of {p} do not tile it"
                )));
            }
        }
        if let Some((root, n)) = fine
            .similarity_classes_per_root()
            .into_iter()
            .find(|&(_, n)| n > 8)
        {
            return Ok(Err(format!(
                "round {round}: root {root} has {n} similarity classes"
            )));
        }
        mesh = refinement.mesh;
    }
    Ok(Ok(()))
}

fn nvb_trials(seed: u64, trials: usize) -> Result<std::result::Result<String, String>> {
    let mut rng = StdRng::seed_from_u64(seed);
    for trial in 0..trials {
        if let Err(msg) = random_nvb_trial(&mut rng, 6)? {
            return Ok(Err(format!("trial {trial}: {msg}")));
        }
    }
    Ok(Ok(format!("{trials} trials")))
}

/// Random indicator vector with ties and zeros.
pub fn random_indicators(rng: &mut StdRng) -> Vec<f64> {
    let n = rng.gen_range(1..80);
    (0..n)
        .map(|_| match rng.gen_range(0..4) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.gen_range(0.0..10.0),
        })
        .collect()
}

fn marking_trials(seed: u64, trials: usize) -> Result<std::result::Result<String, String>> {
    let mut rng = StdRng::seed_from_u64(seed);
    for trial in 0..trials {
        let eta = random_indicators(&mut rng);
        let theta = rng.gen_range(0.01..=1.0);
        let total: f64 = eta.iter().map(|e| e * e).sum();
        let d = mark_doerfler(&eta, theta)?;
        let m = mark_maximum(&eta, theta)?;
        for (name, marks) in [("doerfler", &d), ("maximum", &m)] {
            if !verify_marking_property(&eta, marks, |t| t)
                || (!marks.is_empty() && !unmarked_dominated(&eta, marks))
            {
                return Ok(Err(format!(
                    "trial {trial}: {name} violates the marking property"
                )));
            }
        }
        let marked: f64 = d.iter().map(|k| eta[k] * eta[k]).sum();
        let smallest = d.iter().map(|k| eta[k]).fold(f64::INFINITY, f64::min);
        if total > 0.0 && (marked < theta * total || marked - smallest * smallest >= theta * total)
        {
            return Ok(Err(format!(
                "trial {trial}: doerfler set not minimal or insufficient"
            )));
        }
    }
    Ok(Ok(format!("{trials} trials")))
}

/// Runs every check; the seed drives the randomized trials.
pub fn run_all(seed: u64) -> Vec<CheckResult> {
    vec![
        check("quadrature_exactness", quadrature_exactness),
        check("dense_assembly_equivalence", dense_assembly_equivalence),
        check("cg_vs_dense_solve", cg_vs_dense_solve),
        check("spd_min_eigenvalue", spd_min_eigenvalue),
        check("estimator_global_sweep", estimator_global_sweep),
        check("galerkin_orthogonality", galerkin_orthogonality),
        check("nvb_conformity_trials", || nvb_trials(seed, 100)),
        check("marking_properties", || {
            marking_trials(seed.wrapping_add(1), 100)
        }),
    ]
}
