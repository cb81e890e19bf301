use stfosls::assembly::AssemblyMode;
use stfosls::driver::{
    adaptive_run, rate_table, uniform_run, SolveSettings, StopCriteria, TerminalReason,
};
use stfosls::marking::{MarkingConfig, Strategy};
use stfosls::mesh::Mesh;
use stfosls::problem::{BuiltinCase, ConvectionForm};
use stfosls::system::ParabolicSystem;

fn settings(p: usize) -> SolveSettings {
    SolveSettings {
        mode: AssemblyMode::Parallel,
        ..SolveSettings::new(p)
    }
}

fn system(case: BuiltinCase) -> ParabolicSystem {
    ParabolicSystem::new(case.problem(ConvectionForm::FluxForm).unwrap())
}

#[test]
fn heat_adaptive_estimator_decreases() {
    let sys = system(BuiltinCase::HeatSmooth);
    let marking = MarkingConfig::new(Strategy::Doerfler, 0.5).unwrap();
    let stop = StopCriteria {
        max_dofs: 5000,
        ..Default::default()
    };
    let out = adaptive_run(
        &sys,
        Mesh::uniform(1.0, (0.0, 1.0), 2, 2).unwrap(),
        settings(1),
        marking,
        stop,
        None,
    )
    .unwrap();
    let recs = &out.log.records;
    assert_eq!(out.log.reason, TerminalReason::MaxDofs);
    assert!(recs.len() >= 6);
    let tail = &recs[recs.len() - 5..];
    assert!(tail.windows(2).all(|w| w[1].estimator < w[0].estimator));
    assert!(recs.last().unwrap().estimator < recs[0].estimator);
    assert!(out.final_mesh().is_conforming());
}

#[test]
fn incompatible_refinement_concentrates_near_initial_time() {
    let sys = system(BuiltinCase::Incompatible);
    let marking = MarkingConfig::new(Strategy::Doerfler, 0.5).unwrap();
    let stop = StopCriteria {
        max_iterations: 11,
        ..Default::default()
    };
    let mesh0 = Mesh::uniform(1.0, (0.0, 1.0), 2, 2).unwrap();
    let out = adaptive_run(&sys, mesh0, settings(1), marking, stop, None).unwrap();
    assert_eq!(out.log.records.len(), 11);
    let fraction = |mesh: &Mesh| {
        let near = (0..mesh.num_elements())
            .filter(|&k| mesh.vertex_coords(k).iter().any(|p| p.t < 0.1))
            .count();
        near as f64 / mesh.num_elements() as f64
    };
    let adaptive = fraction(out.final_mesh());
    // a uniform mesh with h = 1/64 has 7 of 64 time slabs intersecting t < 0.1
    let uniform = fraction(&Mesh::uniform(1.0, (0.0, 1.0), 64, 64).unwrap());
    assert!(adaptive > uniform, "{adaptive} vs {uniform}");
}

#[test]
fn rate_table_reproduces_uniform_rates() {
    let sys = system(BuiltinCase::HeatSmooth);
    let reference = BuiltinCase::HeatSmooth.reference().unwrap();
    let out = uniform_run(
        &sys,
        Mesh::uniform(1.0, (0.0, 1.0), 4, 4).unwrap(),
        settings(1),
        5,
        Some(&reference),
    )
    .unwrap();
    let rows = rate_table(&out.log).unwrap();
    let recs = &out.log.records;
    // the first level is preasymptotic; compare the last three
    for (i, row) in rows.iter().enumerate().skip(2) {
        let direct = (recs[i - 1].error.unwrap() / recs[i].error.unwrap()).log2();
        let order = row.error_order.unwrap();
        // dofs grow slightly slower than 4x per level, so dof-based orders are slightly larger
        assert!((order - direct).abs() < 0.1, "{order} vs {direct}");
        assert!((0.85..=1.15).contains(&order));
    }
    // estimator/error ratio over the uniform refinements varies by less than a factor 2
    let ratios: Vec<f64> = recs
        .iter()
        .map(|r| r.estimator / r.error.unwrap())
        .collect();
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
    assert!(hi / lo < 2.0);
}

#[test]
fn both_convection_forms_converge() {
    for form in [ConvectionForm::FluxForm, ConvectionForm::GradientForm] {
        let sys = ParabolicSystem::new(BuiltinCase::ConvectionReaction.problem(form).unwrap());
        let reference = BuiltinCase::ConvectionReaction.reference().unwrap();
        let out = uniform_run(
            &sys,
            Mesh::uniform(1.0, (0.0, 1.0), 2, 2).unwrap(),
            settings(2),
            3,
            Some(&reference),
        )
        .unwrap();
        let recs = &out.log.records;
        assert!(
            recs.windows(2)
                .all(|w| w[1].error.unwrap() < 0.5 * w[0].error.unwrap()),
            "{}",
            form.as_str()
        );
    }
}
