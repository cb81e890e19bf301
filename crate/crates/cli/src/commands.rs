use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use stfosls::assembly::AssemblyMode;
use stfosls::driver::{adaptive_run, uniform_run, RunOutcome, SolveSettings};
use stfosls::mesh::Mesh;
use stfosls::system::{
    FirstOrderSystem, ParabolicSystem, PoissonReference, PoissonSystem, ReferenceSolution,
};
use stfosls::verify::run_all;

use crate::config::{RunConfig, RunMode, SystemKind};
use crate::error::CliError;

fn execute(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let (system, reference): (
        Box<dyn FirstOrderSystem>,
        Option<Box<dyn ReferenceSolution>>,
    ) = match cfg.system {
        SystemKind::Parabolic => (
            Box::new(ParabolicSystem::new(cfg.case.problem(cfg.form)?)),
            cfg.case
                .reference()
                .map(|r| Box::new(r) as Box<dyn ReferenceSolution>),
        ),
        SystemKind::Poisson => (
            Box::new(PoissonSystem::smooth()),
            Some(Box::new(PoissonReference)),
        ),
    };
    let mesh = Mesh::uniform(1.0, (0.0, 1.0), cfg.nt, cfg.nx)?;
    let settings = SolveSettings {
        mode: AssemblyMode::Parallel,
        ..SolveSettings::new(cfg.degree)
    };
    let reference = reference.as_deref();
    Ok(match cfg.mode {
        RunMode::Adaptive => adaptive_run(
            system.as_ref(),
            mesh,
            settings,
            cfg.marking,
            cfg.stop,
            reference,
        )?,
        RunMode::Uniform => uniform_run(system.as_ref(), mesh, settings, cfg.levels, reference)?,
    })
}

fn summary(cfg: &RunConfig, outcome: &RunOutcome) -> String {
    let log = &outcome.log;
    let (first, last) = (
        &log.records[0],
        log.records.last().expect("runs record at least one level"),
    );
    let mut s = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    line("system", log.system.clone());
    if cfg.system == SystemKind::Parabolic {
        line("case", cfg.case.name().into());
        line("form", cfg.form.as_str().into());
    }
    line(
        "mode",
        if cfg.mode == RunMode::Adaptive {
            "adaptive"
        } else {
            "uniform"
        }
        .into(),
    );
    line("degree", cfg.degree.to_string());
    line("levels", log.records.len().to_string());
    line("terminal_reason", log.reason.as_str().into());
    line("final_dofs", last.dofs.to_string());
    line("final_elements", last.elements.to_string());
    line("initial_estimator", format!("{:.12e}", first.estimator));
    line("final_estimator", format!("{:.12e}", last.estimator));
    if let Some(e) = last.error {
        line("final_error", format!("{e:.12e}"));
    }
    let defect = log
        .records
        .iter()
        .map(|r| r.galerkin_defect)
        .fold(0.0, f64::max);
    line("max_galerkin_defect", format!("{defect:.3e}"));
    s
}

fn write_outputs(dir: &Path, cfg: &RunConfig, outcome: &RunOutcome) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("runlog.csv"), outcome.log.to_csv())?;
    fs::write(dir.join("mesh_final.txt"), outcome.final_mesh().to_dump())?;
    fs::write(dir.join("summary.txt"), summary(cfg, outcome))?;
    Ok(())
}

/// Runs the configuration in `path`; `out` overrides the configured output directory.
pub fn cmd_run(path: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let cfg = RunConfig::parse(&text)?;
    let dir = out
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let outcome = execute(&cfg)?;
    write_outputs(&dir, &cfg, &outcome)?;
    print!("{}", summary(&cfg, &outcome));
    Ok(())
}

/// Runs the built-in check suite; returns whether every check passed.
pub fn cmd_verify(seed: u64) -> bool {
    let results = run_all(seed);
    for r in &results {
        println!(
            "{} {}: {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} checks, {failed} failed", results.len());
    failed == 0
}
