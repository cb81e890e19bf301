//! Least-squares error indicators `eta(K) = ||f - G u_h||_{L(K)}` and
//! `U(omega)`-norm errors against a known solution.

use crate::assembly::{edge_points, Quadrature, Tabulation};
use crate::error::{Error, Result};
use crate::spaces::{combine, Discretization, FieldSample};
use crate::system::{FirstOrderSystem, ReferenceSolution};

#[derive(Clone, Debug, PartialEq)]
pub struct Indicators {
    /// `eta(K)` per element.
    pub local: Vec<f64>,
    /// `eta = sqrt(sum eta(K)^2)`.
    pub global: f64,
}

impl Indicators {
    pub fn from_local(local: Vec<f64>) -> Self {
        let global = local.iter().map(|e| e * e).sum::<f64>().sqrt();
        Self { local, global }
    }

    pub fn len(&self) -> usize {
        self.local.len()
    }

    pub fn is_empty(&self) -> bool {
        self.local.is_empty()
    }
}

/// Integrates an element-local quantity of `(point, discrete sample)` over the
/// interior and, separately, over the initial facets of element `k`.
struct ElementIntegrator<'a> {
    disc: &'a Discretization,
    quad: &'a Quadrature,
    interior: Tabulation,
    edges: [Tabulation; 3],
}

impl<'a> ElementIntegrator<'a> {
    fn new(disc: &'a Discretization, quad: &'a Quadrature) -> Self {
        let interior = Tabulation::new(disc, quad.triangle.points().iter().copied());
        let edges =
            [0, 1, 2].map(|e| Tabulation::new(disc, edge_points(&quad.edge, e).into_iter()));
        Self {
            disc,
            quad,
            interior,
            edges,
        }
    }

    fn interior(
        &self,
        coeffs: &[f64],
        k: usize,
        mut f: impl FnMut(crate::mesh::Point, &FieldSample) -> f64,
    ) -> f64 {
        let map = self.disc.map(k);
        let mut sum = 0.0;
        for (q, &w) in self.quad.triangle.weights().iter().enumerate() {
            let grads: Vec<[f64; 2]> = self.interior.grads[q]
                .iter()
                .map(|&g| map.push_gradient(g))
                .collect();
            let uh = combine(
                coeffs,
                &self.disc.dofmap,
                k,
                &self.interior.values[q],
                &grads,
            );
            sum += w * map.det * f(map.apply(self.quad.triangle.points()[q]), &uh);
        }
        sum
    }

    fn initial(
        &self,
        coeffs: &[f64],
        k: usize,
        mut f: impl FnMut(crate::mesh::Point, &FieldSample) -> f64,
    ) -> f64 {
        let mesh = &self.disc.mesh;
        let map = self.disc.map(k);
        let mut sum = 0.0;
        for e in mesh.initial_edges(k) {
            let [a, b] = mesh.edge_vertices(k, e);
            let (pa, pb) = (mesh.points()[a], mesh.points()[b]);
            let length = (pb.t - pa.t).hypot(pb.x - pa.x);
            let pts = edge_points(&self.quad.edge, e);
            let tab = &self.edges[e];
            for (q, &w) in self.quad.edge.weights().iter().enumerate() {
                let grads: Vec<[f64; 2]> =
                    tab.grads[q].iter().map(|&g| map.push_gradient(g)).collect();
                let uh = combine(coeffs, &self.disc.dofmap, k, &tab.values[q], &grads);
                sum += w * length * f(map.apply(pts[q]), &uh);
            }
        }
        sum
    }
}

fn check_len(disc: &Discretization, coeffs: &[f64]) -> Result<()> {
    if coeffs.len() != disc.num_dofs() {
        return Err(Error::IndexOutOfRange {
            index: coeffs.len(),
            len: disc.num_dofs(),
        });
    }
    Ok(())
}

/// `eta(K)^2 = int_K |f - G u_h|^2 + int_{initial facets of K} (u0 - u_h(0, .))^2`.
pub fn compute_indicators(
    disc: &Discretization,
    coeffs: &[f64],
    system: &dyn FirstOrderSystem,
    quad: &Quadrature,
) -> Result<Indicators> {
    check_len(disc, coeffs)?;
    let integ = ElementIntegrator::new(disc, quad);
    let nres = system.residual_components();
    let local = (0..disc.mesh.num_elements())
        .map(|k| {
            let mut sq = integ.interior(coeffs, k, |p, uh| {
                let (f, g) = (system.data(p), system.apply(p, uh));
                (0..nres).map(|c| (f[c] - g[c]).powi(2)).sum()
            });
            if system.has_initial_trace() {
                sq += integ.initial(coeffs, k, |p, uh| {
                    (system.initial_data(p) - system.initial_trace(uh)).powi(2)
                });
            }
            sq.sqrt()
        })
        .collect();
    Ok(Indicators::from_local(local))
}

/// Contributions to the `U`-norm error, each an `L2` norm over the whole domain.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorReport {
    pub value: f64,
    pub gradient: f64,
    pub flux: f64,
    pub divergence: f64,
    pub initial_trace: f64,
    /// `sqrt` of the sum of squares of the above.
    pub total: f64,
}

impl ErrorReport {
    fn from_squares(sq: [f64; 5]) -> Self {
        let [value, gradient, flux, divergence, initial_trace] = sq.map(f64::sqrt);
        Self {
            value,
            gradient,
            flux,
            divergence,
            initial_trace,
            total: sq.iter().sum::<f64>().sqrt(),
        }
    }
}

/// `||u - u_h||_U` including the initial trace term, split into its contributions.
pub fn u_norm_error(
    disc: &Discretization,
    coeffs: &[f64],
    system: &dyn FirstOrderSystem,
    reference: &dyn ReferenceSolution,
    quad: &Quadrature,
) -> Result<ErrorReport> {
    check_len(disc, coeffs)?;
    let integ = ElementIntegrator::new(disc, quad);
    let mut sq = [0.0; 5];
    for k in 0..disc.mesh.num_elements() {
        for (c, s) in sq.iter_mut().enumerate().take(4) {
            *s += integ.interior(coeffs, k, |p, uh| {
                system.norm_density(&reference.sample(p).sub(uh))[c]
            });
        }
        if system.has_initial_trace() {
            sq[4] += integ.initial(coeffs, k, |p, uh| {
                (system.initial_trace(&reference.sample(p)) - system.initial_trace(uh)).powi(2)
            });
        }
    }
    Ok(ErrorReport::from_squares(sq))
}

/// Ratio `eta / ||u - u_h||_U`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EfficiencyRatio {
    Finite(f64),
    /// Zero error with a positive estimator.
    Infinite,
    /// Both vanish.
    Undefined,
}

impl EfficiencyRatio {
    pub fn value(self) -> Option<f64> {
        match self {
            EfficiencyRatio::Finite(r) => Some(r),
            _ => None,
        }
    }
}

pub fn efficiency_reliability_ratio(
    indicators: &Indicators,
    error: &ErrorReport,
) -> EfficiencyRatio {
    match (indicators.global, error.total) {
        (e, u) if u > 0.0 => EfficiencyRatio::Finite(e / u),
        (e, _) if e > 0.0 => EfficiencyRatio::Infinite,
        _ => EfficiencyRatio::Undefined,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{MarkSet, Mesh};
    use crate::problem::{BuiltinCase, ConvectionForm};
    use crate::spaces::Constraint;
    use crate::system::ParabolicSystem;

    #[test]
    fn zero_solution_indicator_is_data_norm() {
        // u_h = 0, f2 = 0: eta(K)^2 = int_K f1^2 + int_{initial facets} u0^2
        let sys = ParabolicSystem::new(
            BuiltinCase::HeatSmooth
                .problem(ConvectionForm::FluxForm)
                .unwrap(),
        );
        let mesh = Mesh::uniform(1.0, (0.0, 1.0), 2, 2).unwrap();
        let disc = Discretization::new(mesh, 1, Constraint::Lateral, 1).unwrap();
        let quad = Quadrature::for_degree(1).unwrap();
        let zero = vec![0.0; disc.num_dofs()];
        let ind = compute_indicators(&disc, &zero, &sys, &quad).unwrap();
        for k in 0..disc.mesh.num_elements() {
            let map = disc.map(k);
            let mut sq = 0.0;
            for (xi, w) in quad.triangle.iter() {
                let f1 = (sys.problem().data.f1)(map.apply(xi));
                sq += w * map.det * f1 * f1;
            }
            // u0 of the heat case is sin(pi x), which adds the trace term on initial facets
            let mut trace = 0.0;
            for e in disc.mesh.initial_edges(k) {
                let [a, b] = disc.mesh.edge_vertices(k, e);
                let (pa, pb) = (disc.mesh.points()[a], disc.mesh.points()[b]);
                for (s, w) in quad.edge.iter() {
                    let x = pa.x + s[0] * (pb.x - pa.x);
                    trace += w * (pb.x - pa.x).abs() * (std::f64::consts::PI * x).sin().powi(2);
                }
            }
            assert!((ind.local[k] * ind.local[k] - sq - trace).abs() < 1e-12);
        }
    }

    #[test]
    fn additivity() {
        let sys = ParabolicSystem::new(
            BuiltinCase::VariableA
                .problem(ConvectionForm::FluxForm)
                .unwrap(),
        );
        let mesh = Mesh::uniform(1.0, (0.0, 1.0), 3, 3)
            .unwrap()
            .bisect(&MarkSet::new(vec![0, 4]))
            .unwrap();
        let disc = Discretization::new(mesh, 2, Constraint::Lateral, 1).unwrap();
        let coeffs: Vec<f64> = (0..disc.num_dofs())
            .map(|i| (i as f64 * 0.37).sin())
            .collect();
        let ind =
            compute_indicators(&disc, &coeffs, &sys, &Quadrature::for_degree(2).unwrap()).unwrap();
        let sum: f64 = ind.local.iter().map(|e| e * e).sum();
        assert!((ind.global.powi(2) - sum).abs() <= 1e-13 * sum);
    }

    #[test]
    fn ratio_flags() {
        let zero_err = ErrorReport::default();
        assert_eq!(
            efficiency_reliability_ratio(&Indicators::from_local(vec![0.0]), &zero_err),
            EfficiencyRatio::Undefined
        );
        assert_eq!(
            efficiency_reliability_ratio(&Indicators::from_local(vec![1.0]), &zero_err),
            EfficiencyRatio::Infinite
        );
        let err = ErrorReport {
            total: 2.0,
            ..Default::default()
        };
        assert_eq!(
            efficiency_reliability_ratio(&Indicators::from_local(vec![1.0]), &err),
            EfficiencyRatio::Finite(0.5)
        );
    }

    #[test]
    fn localization_under_refinement_elsewhere() {
        // u_h = interpolant of a fixed polynomial, so refinement does not change it.
        let sys = ParabolicSystem::new(
            BuiltinCase::ConvectionReaction
                .problem(ConvectionForm::FluxForm)
                .unwrap(),
        );
        let quad = Quadrature::for_degree(1).unwrap();
        let mesh = Mesh::uniform(1.0, (0.0, 1.0), 4, 4).unwrap();
        let u1 = |p: crate::mesh::Point| p.x * (1.0 - p.x) * (1.0 + p.t);
        let eval = |mesh: &Mesh| {
            let disc = Discretization::new(mesh.clone(), 2, Constraint::Lateral, 1).unwrap();
            let c = disc.dofmap.interpolate(u1, |p| [p.t - p.x, 0.0]);
            compute_indicators(&disc, &c, &sys, &quad).unwrap()
        };
        let before = eval(&mesh);
        let refined = mesh.refine(&MarkSet::new(vec![31])).unwrap();
        let after = eval(&refined.mesh);
        let mut untouched = 0;
        for (k, &p) in refined.parent.iter().enumerate() {
            if !refined.bisected[p] {
                assert!(
                    (after.local[k] - before.local[p]).abs() <= 1e-14 * before.local[p].max(1.0)
                );
                untouched += 1;
            }
        }
        assert!(untouched > 20);
    }
}
