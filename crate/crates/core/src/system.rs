//! First-order systems `G` evaluated pointwise on discrete fields.
//!
//! A system maps the scalar field `u1` and the flux `u2` (one or two
//! components) to a fixed number of interior residual components and,
//! optionally, to an initial trace supported on facets tagged
//! [`FacetTag::Initial`](crate::mesh::FacetTag::Initial). Assembly, estimation
//! and the oracles only talk to this trait.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::mesh::Point;
use crate::problem::{ConvectionForm, DataVector, ParabolicProblem, ScalarFn};
use crate::spaces::{Constraint, FieldSample};

/// Interior residual components; systems use a prefix of the array.
pub type Residual = [f64; 3];

/// Squared densities of the `U(omega)` seminorm terms:
/// `[|v1|^2, |grad v1|^2, |v2|^2, |div v|^2]`. The gradient term is the spatial
/// gradient for parabolic systems and the full gradient for stationary ones.
pub type NormDensity = [f64; 4];

pub trait FirstOrderSystem: Send + Sync {
    fn name(&self) -> String;
    /// Number of flux components (`d` for parabolic, 2 for Poisson).
    fn flux_components(&self) -> usize;
    /// Number of interior residual components used in [`Residual`].
    fn residual_components(&self) -> usize;
    /// Whether the trace `u1(0, .)` is a residual component.
    fn has_initial_trace(&self) -> bool;
    /// Dirichlet constraint of the scalar field.
    fn constraint(&self) -> Constraint;
    /// Interior components of `G u` at `p`. Linear in `u`.
    fn apply(&self, p: Point, u: &FieldSample) -> Residual;
    /// Interior components of the data vector at `p`.
    fn data(&self, p: Point) -> Residual;
    /// Initial trace component of `G u`.
    fn initial_trace(&self, u: &FieldSample) -> f64 {
        u.scalar
    }
    /// Initial trace component of the data vector.
    fn initial_data(&self, _p: Point) -> f64 {
        0.0
    }
    fn norm_density(&self, e: &FieldSample) -> NormDensity;
}

/// Exact fields of a problem, used to measure errors.
pub trait ReferenceSolution: Send + Sync {
    fn sample(&self, p: Point) -> FieldSample;
}

/// `G u` split into its components. `r_init` is only present on initial facets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GImage {
    pub r_flux: f64,
    pub r_div: f64,
    pub r_init: Option<f64>,
}

/// `G (u1, u2) = (u2 + A d_x u1, d_t u1 + d_x u2 + convection + c u1, u1(0, .))`.
#[derive(Clone, Debug)]
pub struct ParabolicSystem {
    problem: ParabolicProblem,
    data: DataVector,
}

impl ParabolicSystem {
    pub fn new(problem: ParabolicProblem) -> Self {
        let data = problem.data_vector();
        Self { problem, data }
    }

    pub fn problem(&self) -> &ParabolicProblem {
        &self.problem
    }

    pub fn form(&self) -> ConvectionForm {
        self.problem.form
    }

    /// Interior components of `G` at `p` from values and `(d/dt, d/dx)` gradients.
    pub fn eval_g(
        &self,
        p: Point,
        u1: f64,
        u1_grad: [f64; 2],
        u2: f64,
        u2_grad: [f64; 2],
    ) -> GImage {
        let coeffs = &self.problem.coefficients;
        let a = (coeffs.a)(p);
        let b = (coeffs.b)(p);
        let c = (coeffs.c)(p);
        let div = u1_grad[0] + u2_grad[1];
        let convection = match self.problem.form {
            ConvectionForm::FluxForm => -b * u2 / a,
            ConvectionForm::GradientForm => b * u1_grad[1],
        };
        GImage {
            r_flux: u2 + a * u1_grad[1],
            r_div: div + convection + c * u1,
            r_init: None,
        }
    }

    /// Same as [`ParabolicSystem::eval_g`] at a point of `{0} x Omega`.
    pub fn eval_g_initial(
        &self,
        p: Point,
        u1: f64,
        u1_grad: [f64; 2],
        u2: f64,
        u2_grad: [f64; 2],
    ) -> GImage {
        GImage {
            r_init: Some(u1),
            ..self.eval_g(p, u1, u1_grad, u2, u2_grad)
        }
    }

    /// Target values `(f2, f1 - b A^{-1} f2)` (flux form) or `(f2, f1)` (gradient form).
    pub fn eval_data(&self, p: Point) -> [f64; 2] {
        self.data.interior(p)
    }
}

impl FirstOrderSystem for ParabolicSystem {
    fn name(&self) -> String {
        format!("parabolic/{}", self.problem.form.as_str())
    }

    fn flux_components(&self) -> usize {
        1
    }

    fn residual_components(&self) -> usize {
        2
    }

    fn has_initial_trace(&self) -> bool {
        true
    }

    fn constraint(&self) -> Constraint {
        Constraint::Lateral
    }

    fn apply(&self, p: Point, u: &FieldSample) -> Residual {
        let g = self.eval_g(p, u.scalar, u.scalar_grad, u.flux[0], u.flux_grad[0]);
        [g.r_flux, g.r_div, 0.0]
    }

    fn data(&self, p: Point) -> Residual {
        let [f, g] = self.data.interior(p);
        [f, g, 0.0]
    }

    fn initial_data(&self, p: Point) -> f64 {
        self.data.initial(p.x)
    }

    fn norm_density(&self, e: &FieldSample) -> NormDensity {
        let div = e.scalar_grad[0] + e.flux_grad[0][1];
        [
            e.scalar * e.scalar,
            e.scalar_grad[1] * e.scalar_grad[1],
            e.flux[0] * e.flux[0],
            div * div,
        ]
    }
}

/// Least-squares system of `-Laplace u = f` with `u = 0` on the boundary, read
/// on the same meshes with `(x1, x2) = (t, x)`:
/// `G (u, sigma) = (sigma + grad u, div sigma)`, data `(0, f)`, `sigma = -grad u`.
#[derive(Clone)]
pub struct PoissonSystem {
    f: ScalarFn,
}

impl std::fmt::Debug for PoissonSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoissonSystem").finish_non_exhaustive()
    }
}

impl PoissonSystem {
    pub fn new(f: ScalarFn) -> Self {
        Self { f }
    }

    /// Source for `u = sin(pi x1) sin(pi x2)` on the unit square.
    pub fn smooth() -> Self {
        Self::new(Arc::new(|p: Point| {
            2.0 * PI * PI * (PI * p.t).sin() * (PI * p.x).sin()
        }))
    }
}

/// `u = sin(pi x1) sin(pi x2)`, `sigma = -grad u`.
#[derive(Clone, Copy, Debug, Default)]
pub struct PoissonReference;

impl ReferenceSolution for PoissonReference {
    fn sample(&self, p: Point) -> FieldSample {
        let (s1, c1) = (PI * p.t).sin_cos();
        let (s2, c2) = (PI * p.x).sin_cos();
        let pi2 = PI * PI;
        FieldSample {
            scalar: s1 * s2,
            scalar_grad: [PI * c1 * s2, PI * s1 * c2],
            flux: [-PI * c1 * s2, -PI * s1 * c2],
            flux_grad: [
                [pi2 * s1 * s2, -pi2 * c1 * c2],
                [-pi2 * c1 * c2, pi2 * s1 * s2],
            ],
        }
    }
}

impl FirstOrderSystem for PoissonSystem {
    fn name(&self) -> String {
        "poisson".into()
    }

    fn flux_components(&self) -> usize {
        2
    }

    fn residual_components(&self) -> usize {
        3
    }

    fn has_initial_trace(&self) -> bool {
        false
    }

    fn constraint(&self) -> Constraint {
        Constraint::Boundary
    }

    fn apply(&self, _p: Point, u: &FieldSample) -> Residual {
        [
            u.flux[0] + u.scalar_grad[0],
            u.flux[1] + u.scalar_grad[1],
            u.flux_grad[0][0] + u.flux_grad[1][1],
        ]
    }

    fn data(&self, p: Point) -> Residual {
        [0.0, 0.0, (self.f)(p)]
    }

    fn initial_trace(&self, _u: &FieldSample) -> f64 {
        0.0
    }

    fn norm_density(&self, e: &FieldSample) -> NormDensity {
        let div = e.flux_grad[0][0] + e.flux_grad[1][1];
        [
            e.scalar * e.scalar,
            e.scalar_grad[0] * e.scalar_grad[0] + e.scalar_grad[1] * e.scalar_grad[1],
            e.flux[0] * e.flux[0] + e.flux[1] * e.flux[1],
            div * div,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SpaceTimeBox;
    use crate::problem::{BuiltinCase, CoefficientField, ProblemData};
    use rand::{Rng, SeedableRng};

    fn system(a: f64, b: f64, c: f64, form: ConvectionForm) -> ParabolicSystem {
        let domain = SpaceTimeBox::new(1.0, 0.0, 1.0).unwrap();
        let prob = ParabolicProblem::new(
            domain,
            CoefficientField::constant(a, b, c),
            ProblemData::zero(),
            form,
        )
        .unwrap();
        ParabolicSystem::new(prob)
    }

    fn random_sample(rng: &mut impl Rng) -> FieldSample {
        FieldSample {
            scalar: rng.gen_range(-1.0..1.0),
            scalar_grad: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
            flux: [rng.gen_range(-1.0..1.0), 0.0],
            flux_grad: [
                [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                [0.0, 0.0],
            ],
        }
    }

    #[test]
    fn eval_g_examples() {
        let s = system(1.0, 0.0, 0.0, ConvectionForm::FluxForm);
        let p = Point::new(0.3, 0.6);
        let g = s.eval_g(p, p.t, [1.0, 0.0], 0.0, [0.0, 0.0]);
        assert_eq!((g.r_flux, g.r_div), (0.0, 1.0));
        let g = s.eval_g(p, 0.0, [0.0, 0.0], p.x, [0.0, 1.0]);
        assert_eq!((g.r_flux, g.r_div), (0.6, 1.0));
        assert_eq!(g.r_init, None);

        let s = system(2.0, 4.0, 1.0, ConvectionForm::FluxForm);
        let g = s.eval_g(p, 1.0, [0.0, 0.0], 2.0, [0.0, 0.0]);
        assert_eq!((g.r_flux, g.r_div), (2.0, -3.0));
        let g = s.eval_g_initial(Point::new(0.0, 0.5), 1.5, [0.0, 0.0], 2.0, [0.0, 0.0]);
        assert_eq!(g.r_init, Some(1.5));
    }

    #[test]
    fn linearity() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        for form in [ConvectionForm::FluxForm, ConvectionForm::GradientForm] {
            let s = ParabolicSystem::new(BuiltinCase::VariableA.problem(form).unwrap());
            let pois = PoissonSystem::smooth();
            for _ in 0..100 {
                let p = Point::new(rng.gen(), rng.gen());
                let (v, w) = (random_sample(&mut rng), random_sample(&mut rng));
                let alpha: f64 = rng.gen_range(-2.0..2.0);
                let combo = v.scaled(alpha).add(&w);
                for sys in [&s as &dyn FirstOrderSystem, &pois] {
                    let lhs = sys.apply(p, &combo);
                    let (gv, gw) = (sys.apply(p, &v), sys.apply(p, &w));
                    for c in 0..3 {
                        assert!((lhs[c] - (alpha * gv[c] + gw[c])).abs() <= 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn forms_agree_on_consistent_flux() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(2);
        let domain = SpaceTimeBox::new(1.0, 0.0, 1.0).unwrap();
        let coeffs = CoefficientField {
            b: Arc::new(|p: Point| 1.0 + p.x),
            c: Arc::new(|p: Point| p.t),
            ..BuiltinCase::VariableA.coefficients()
        };
        let pf = ParabolicProblem::new(
            domain,
            coeffs,
            ProblemData::zero(),
            ConvectionForm::FluxForm,
        )
        .unwrap();
        let (sf, sg) = (
            ParabolicSystem::new(pf.clone()),
            ParabolicSystem::new(pf.with_form(ConvectionForm::GradientForm)),
        );
        for _ in 0..100 {
            let p = Point::new(rng.gen(), rng.gen());
            let mut u = random_sample(&mut rng);
            u.flux[0] = -(pf.coefficients.a)(p) * u.scalar_grad[1];
            let (gf, gg) = (sf.apply(p, &u), sg.apply(p, &u));
            assert!((gf[0] - gg[0]).abs() <= 1e-13);
            assert!((gf[1] - gg[1]).abs() <= 1e-13);
        }
    }

    #[test]
    fn exact_fields_satisfy_g_u_equals_f() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(4);
        for case in [
            BuiltinCase::HeatSmooth,
            BuiltinCase::ConvectionReaction,
            BuiltinCase::VariableA,
        ] {
            for form in [ConvectionForm::FluxForm, ConvectionForm::GradientForm] {
                let s = ParabolicSystem::new(case.problem(form).unwrap());
                let r = case.reference().unwrap();
                for _ in 0..200 {
                    let p = Point::new(rng.gen(), rng.gen());
                    let (g, f) = (s.apply(p, &r.sample(p)), s.data(p));
                    assert!((g[0] - f[0]).abs() <= 1e-11 && (g[1] - f[1]).abs() <= 1e-11);
                }
                let p0 = Point::new(0.0, rng.gen());
                assert!((s.initial_trace(&r.sample(p0)) - s.initial_data(p0)).abs() <= 1e-12);
            }
        }
        let pois = PoissonSystem::smooth();
        for _ in 0..200 {
            let p = Point::new(rng.gen(), rng.gen());
            let (g, f) = (pois.apply(p, &PoissonReference.sample(p)), pois.data(p));
            for c in 0..3 {
                assert!((g[c] - f[c]).abs() <= 1e-11);
            }
        }
    }

    #[test]
    fn poisson_examples() {
        let zero = PoissonSystem::new(Arc::new(|_| 0.0));
        let p = Point::new(0.2, 0.9);
        assert_eq!(zero.apply(p, &FieldSample::default()), [0.0; 3]);
        assert_eq!(zero.data(p), [0.0; 3]);
        let u = FieldSample {
            scalar_grad: [1.0, 0.0],
            flux: [-1.0, 0.0],
            ..Default::default()
        };
        let r = zero.apply(p, &u);
        assert_eq!((r[0], r[1]), (0.0, 0.0));
        assert!(!zero.has_initial_trace());
    }
}
