//! Parabolic problem data: coefficients `A`, `b`, `c`, the split load
//! `(f1, f2)`, the initial value `u0`, and manufactured solutions.
//!
//! The strong form is `u_t - (A u_x)_x + b u_x + c u = f1 - (f2)_x` on
//! `(0, T) x (a, b)` with `u = 0` on the lateral boundary and `u(0, .) = u0`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Point, SpaceTimeBox};
use crate::spaces::FieldSample;
use crate::system::ReferenceSolution;

/// Space-time scalar function `(t, x) -> value`.
pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
/// Function of space only.
pub type SpatialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub fn constant(value: f64) -> ScalarFn {
    Arc::new(move |_| value)
}

#[derive(Clone)]
pub struct CoefficientField {
    /// Diffusion, must stay uniformly positive.
    pub a: ScalarFn,
    pub b: ScalarFn,
    pub c: ScalarFn,
    /// Closed-form `(dA/dt, dA/dx)`. `None` means `A` is constant.
    pub a_grad: Option<Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>>,
}

impl CoefficientField {
    pub fn constant(a: f64, b: f64, c: f64) -> Self {
        Self {
            a: constant(a),
            b: constant(b),
            c: constant(c),
            a_grad: None,
        }
    }

    pub fn heat() -> Self {
        Self::constant(1.0, 0.0, 0.0)
    }

    pub fn a_gradient(&self, p: Point) -> [f64; 2] {
        self.a_grad.as_ref().map_or([0.0, 0.0], |g| g(p))
    }

    /// Samples the coefficients on a `n x n` grid of the box and checks
    /// finiteness and `A >= a_min > 0`. Returns the observed minimum of `A`.
    pub fn check(&self, domain: &SpaceTimeBox, n: usize) -> Result<f64> {
        let mut a_min = f64::INFINITY;
        for i in 0..=n {
            for j in 0..=n {
                let p = Point::new(
                    domain.t_end * i as f64 / n as f64,
                    domain.a + (domain.b - domain.a) * j as f64 / n as f64,
                );
                let (a, b, c) = ((self.a)(p), (self.b)(p), (self.c)(p));
                if !(a.is_finite() && b.is_finite() && c.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "non-finite coefficient at {p:?}"
                    )));
                }
                a_min = a_min.min(a);
            }
        }
        if a_min <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "diffusion not positive (min {a_min})"
            )));
        }
        Ok(a_min)
    }
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField").finish_non_exhaustive()
    }
}

#[derive(Clone)]
pub struct ProblemData {
    pub f1: ScalarFn,
    /// The (single, d = 1) component of `f2`.
    pub f2: ScalarFn,
    pub u0: SpatialFn,
}

impl ProblemData {
    pub fn zero() -> Self {
        Self {
            f1: constant(0.0),
            f2: constant(0.0),
            u0: Arc::new(|_| 0.0),
        }
    }
}

impl fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData").finish_non_exhaustive()
    }
}

/// How the convection term enters the divergence residual.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConvectionForm {
    /// `div u - b A^{-1} u2 + c u1`
    FluxForm,
    /// `div u + b d_x u1 + c u1`
    GradientForm,
}

impl ConvectionForm {
    pub fn as_str(self) -> &'static str {
        match self {
            ConvectionForm::FluxForm => "flux",
            ConvectionForm::GradientForm => "gradient",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParabolicProblem {
    pub domain: SpaceTimeBox,
    pub coefficients: CoefficientField,
    pub data: ProblemData,
    pub form: ConvectionForm,
}

/// Pointwise target of the residual components: `(flux, divergence)` in the
/// interior and the initial value on `{0} x Omega`.
#[derive(Clone, Debug)]
pub struct DataVector {
    coefficients: CoefficientField,
    data: ProblemData,
    form: ConvectionForm,
}

impl DataVector {
    /// `(f2, f1 - b A^{-1} f2)` for the flux form and `(f2, f1)` for the gradient form.
    pub fn interior(&self, p: Point) -> [f64; 2] {
        let f2 = (self.data.f2)(p);
        let f1 = (self.data.f1)(p);
        match self.form {
            ConvectionForm::FluxForm => [
                f2,
                f1 - (self.coefficients.b)(p) * f2 / (self.coefficients.a)(p),
            ],
            ConvectionForm::GradientForm => [f2, f1],
        }
    }

    pub fn initial(&self, x: f64) -> f64 {
        (self.data.u0)(x)
    }
}

impl ParabolicProblem {
    pub fn new(
        domain: SpaceTimeBox,
        coefficients: CoefficientField,
        data: ProblemData,
        form: ConvectionForm,
    ) -> Result<Self> {
        coefficients.check(&domain, 16)?;
        Ok(Self {
            domain,
            coefficients,
            data,
            form,
        })
    }

    pub fn data_vector(&self) -> DataVector {
        DataVector {
            coefficients: self.coefficients.clone(),
            data: self.data.clone(),
            form: self.form,
        }
    }

    pub fn with_form(&self, form: ConvectionForm) -> Self {
        Self {
            form,
            ..self.clone()
        }
    }
}

/// Closed-form derivatives of a manufactured solution at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub u: f64,
    pub u_t: f64,
    pub u_x: f64,
    pub u_xx: f64,
    pub u_xt: f64,
}

/// A manufactured solution vanishing on the lateral boundary.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub jet: Arc<dyn Fn(Point) -> Jet + Send + Sync>,
}

impl fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

impl ManufacturedCase {
    /// `u = exp(-t) sin(pi x)` on `(0, 1)`.
    pub fn smooth() -> Self {
        Self {
            name: "exp(-t) sin(pi x)".into(),
            jet: Arc::new(|p: Point| {
                let e = (-p.t).exp();
                let (s, c) = (PI * p.x).sin_cos();
                Jet {
                    u: e * s,
                    u_t: -e * s,
                    u_x: PI * e * c,
                    u_xx: -PI * PI * e * s,
                    u_xt: -PI * e * c,
                }
            }),
        }
    }

    pub fn zero() -> Self {
        Self {
            name: "zero".into(),
            jet: Arc::new(|_| Jet::default()),
        }
    }

    /// `d_x (A u_x)` from the closed forms.
    pub fn flux_divergence(&self, coefficients: &CoefficientField, p: Point) -> f64 {
        let j = (self.jet)(p);
        let a = (coefficients.a)(p);
        coefficients.a_gradient(p)[1] * j.u_x + a * j.u_xx
    }

    /// Right-hand side `f1 = u_t - d_x(A u_x) + b u_x + c u` of the strong form.
    pub fn source(&self, coefficients: &CoefficientField, p: Point) -> f64 {
        let j = (self.jet)(p);
        j.u_t - self.flux_divergence(coefficients, p)
            + (coefficients.b)(p) * j.u_x
            + (coefficients.c)(p) * j.u
    }

    /// Reference fields `(u, -A u_x)` with their derivatives.
    pub fn exact_fields(&self, coefficients: &CoefficientField) -> ParabolicReference {
        ParabolicReference {
            case: self.clone(),
            coefficients: coefficients.clone(),
        }
    }
}

/// Builds the problem whose exact solution is `case`: `f2 = 0`,
/// `f1 = u_t - d_x(A u_x) + b u_x + c u`, `u0 = u(0, .)`.
pub fn from_manufactured(
    case: &ManufacturedCase,
    domain: SpaceTimeBox,
    coefficients: CoefficientField,
    form: ConvectionForm,
) -> Result<ParabolicProblem> {
    let f1_case = case.clone();
    let f1_coeffs = coefficients.clone();
    let u0_case = case.clone();
    let data = ProblemData {
        f1: Arc::new(move |p| f1_case.source(&f1_coeffs, p)),
        f2: constant(0.0),
        u0: Arc::new(move |x| (u0_case.jet)(Point::new(0.0, x)).u),
    };
    ParabolicProblem::new(domain, coefficients, data, form)
}

/// Exact `(u1, u2) = (u, -A u_x)` of a manufactured case.
#[derive(Clone, Debug)]
pub struct ParabolicReference {
    case: ManufacturedCase,
    coefficients: CoefficientField,
}

impl ReferenceSolution for ParabolicReference {
    fn sample(&self, p: Point) -> FieldSample {
        let j = (self.case.jet)(p);
        let a = (self.coefficients.a)(p);
        let [a_t, a_x] = self.coefficients.a_gradient(p);
        FieldSample {
            scalar: j.u,
            scalar_grad: [j.u_t, j.u_x],
            flux: [-a * j.u_x, 0.0],
            flux_grad: [
                [-(a_t * j.u_x + a * j.u_xt), -(a_x * j.u_x + a * j.u_xx)],
                [0.0, 0.0],
            ],
        }
    }
}

/// Named built-in parabolic setups on `(0, 1) x (0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BuiltinCase {
    HeatSmooth,
    ConvectionReaction,
    VariableA,
    Incompatible,
}

impl BuiltinCase {
    pub const ALL: [BuiltinCase; 4] = [
        BuiltinCase::HeatSmooth,
        BuiltinCase::ConvectionReaction,
        BuiltinCase::VariableA,
        BuiltinCase::Incompatible,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinCase::HeatSmooth => "heat-smooth",
            BuiltinCase::ConvectionReaction => "convection-reaction",
            BuiltinCase::VariableA => "variable-a",
            BuiltinCase::Incompatible => "incompatible",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown case `{name}`")))
    }

    pub fn coefficients(self) -> CoefficientField {
        match self {
            BuiltinCase::HeatSmooth | BuiltinCase::Incompatible => CoefficientField::heat(),
            BuiltinCase::ConvectionReaction => CoefficientField::constant(1.0, 1.0, 1.0),
            BuiltinCase::VariableA => CoefficientField {
                a: Arc::new(|p: Point| 1.0 + 0.5 * p.t * p.x),
                b: constant(0.0),
                c: constant(0.0),
                a_grad: Some(Arc::new(|p: Point| [0.5 * p.x, 0.5 * p.t])),
            },
        }
    }

    /// The manufactured solution, if the case has one.
    pub fn manufactured(self) -> Option<ManufacturedCase> {
        match self {
            BuiltinCase::Incompatible => None,
            _ => Some(ManufacturedCase::smooth()),
        }
    }

    pub fn problem(self, form: ConvectionForm) -> Result<ParabolicProblem> {
        let domain = SpaceTimeBox::new(1.0, 0.0, 1.0)?;
        match self.manufactured() {
            Some(case) => from_manufactured(&case, domain, self.coefficients(), form),
            None => ParabolicProblem::new(
                domain,
                self.coefficients(),
                ProblemData {
                    f1: constant(0.0),
                    f2: constant(0.0),
                    u0: Arc::new(|_| 1.0),
                },
                form,
            ),
        }
    }

    pub fn reference(self) -> Option<ParabolicReference> {
        self.manufactured()
            .map(|m| m.exact_fields(&self.coefficients()))
    }
}
