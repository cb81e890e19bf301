//! Brute-force reference implementations used by tests and by `verify`.
//!
//! Nothing here reuses the element loops of [`crate::assembly`] or
//! [`crate::estimator`]: basis functions are built per element in physical
//! coordinates by inverting a monomial Vandermonde matrix, the dense matrix is
//! filled by a double loop over pairs of global basis functions, and linear
//! algebra is delegated to `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mesh::{FacetTag, Mesh, Point};
use crate::quadrature::{interval_rule, triangle_rule, QuadratureRule};
use crate::spaces::{DofMap, FieldSample};
use crate::system::{FirstOrderSystem, ReferenceSolution};

/// Largest system the dense oracles accept.
pub const MAX_DENSE_DOFS: usize = 300;

/// Row-major dense square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = d;
        }
        m
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::IndexOutOfRange {
                index: data.len(),
                len: n * n,
            });
        }
        Ok(Self { n, data })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Sets `(i, j)` and `(j, i)`.
    pub fn set_symmetric(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

/// `||A - B||_F / ||B||_F` (absolute when `B = 0`).
pub fn relative_frobenius(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let norm: f64 = b.iter().map(|y| y * y).sum();
    if norm == 0.0 {
        diff.sqrt()
    } else {
        (diff / norm).sqrt()
    }
}

/// Lagrange basis of one element in physical coordinates. Monomials are taken
/// in `((t - t0) / h, (x - x0) / h)` with `(t0, x0)` the first vertex and `h`
/// the diameter, to keep the Vandermonde matrix well conditioned.
struct PhysicalBasis {
    origin: Point,
    h: f64,
    degree: usize,
    /// `coeffs[(j, i)]`: coefficient of monomial `j` in basis function `i`.
    coeffs: DMatrix<f64>,
}

impl PhysicalBasis {
    fn new(mesh: &Mesh, dofmap: &DofMap, k: usize) -> Result<Self> {
        let [v0, ..] = mesh.vertex_coords(k);
        let h = mesh.element_diameter(k);
        let degree = dofmap.degree();
        let nodes = dofmap.element_nodes(k);
        let n = nodes.len();
        let mut basis = Self {
            origin: v0,
            h,
            degree,
            coeffs: DMatrix::zeros(n, n),
        };
        let mut vandermonde = DMatrix::zeros(n, n);
        for (i, &node) in nodes.iter().enumerate() {
            for (j, (m, _)) in basis
                .monomials(dofmap.node_coords()[node])
                .into_iter()
                .enumerate()
            {
                vandermonde[(i, j)] = m;
            }
        }
        basis.coeffs = vandermonde
            .try_inverse()
            .ok_or(Error::DegenerateElement(k))?;
        Ok(basis)
    }

    /// Monomial values and physical gradients at `p`.
    fn monomials(&self, p: Point) -> Vec<(f64, [f64; 2])> {
        let (s, r, ih) = (
            (p.t - self.origin.t) / self.h,
            (p.x - self.origin.x) / self.h,
            1.0 / self.h,
        );
        let mut out = vec![(1.0, [0.0, 0.0]), (s, [ih, 0.0]), (r, [0.0, ih])];
        if self.degree == 2 {
            out.push((s * s, [2.0 * s * ih, 0.0]));
            out.push((s * r, [r * ih, s * ih]));
            out.push((r * r, [0.0, 2.0 * r * ih]));
        }
        out
    }

    /// Values and gradients of every local basis function at `p`.
    fn eval(&self, p: Point) -> Vec<(f64, [f64; 2])> {
        let mono = self.monomials(p);
        (0..mono.len())
            .map(|i| {
                let mut v = 0.0;
                let mut g = [0.0; 2];
                for (j, &(m, mg)) in mono.iter().enumerate() {
                    let c = self.coeffs[(j, i)];
                    v += c * m;
                    g[0] += c * mg[0];
                    g[1] += c * mg[1];
                }
                (v, g)
            })
            .collect()
    }
}

/// A global basis function: the scalar field or flux component `component`
/// (0 = scalar) attached to a mesh node.
#[derive(Clone, Copy, Debug)]
struct GlobalBasis {
    component: usize,
    node: usize,
}

fn global_bases(dofmap: &DofMap) -> Vec<GlobalBasis> {
    let mut out = vec![
        GlobalBasis {
            component: 0,
            node: 0
        };
        dofmap.num_dofs()
    ];
    for node in 0..dofmap.num_nodes() {
        if let Some(i) = dofmap.scalar_dof(node) {
            out[i] = GlobalBasis { component: 0, node };
        }
        for c in 0..dofmap.flux_components() {
            out[dofmap.flux_dof(c, node)] = GlobalBasis {
                component: c + 1,
                node,
            };
        }
    }
    out
}

/// Physical quadrature points of a mesh: interior points per element and
/// points on initial facets, each with their physical weight.
struct PhysicalQuadrature {
    interior: Vec<Vec<(Point, f64)>>,
    initial: Vec<Vec<(Point, f64)>>,
}

impl PhysicalQuadrature {
    fn new(mesh: &Mesh, triangle: &QuadratureRule, edge: &QuadratureRule) -> Self {
        let mut interior = Vec::with_capacity(mesh.num_elements());
        let mut initial = Vec::with_capacity(mesh.num_elements());
        let ref_area: f64 = triangle.weights().iter().sum();
        let ref_length: f64 = edge.weights().iter().sum();
        for k in 0..mesh.num_elements() {
            let v = mesh.vertex_coords(k);
            let scale = mesh.element_measure(k) / ref_area;
            interior.push(
                (0..triangle.len())
                    .map(|q| {
                        let l = triangle.barycentric(q);
                        let p = Point::new(
                            l[0] * v[0].t + l[1] * v[1].t + l[2] * v[2].t,
                            l[0] * v[0].x + l[1] * v[1].x + l[2] * v[2].x,
                        );
                        (p, triangle.weights()[q] * scale)
                    })
                    .collect(),
            );
            let mut on_initial = Vec::new();
            for (e, tag) in mesh.facet_tags(k).into_iter().enumerate() {
                if tag != FacetTag::Initial {
                    continue;
                }
                let (a, b) = (v[e], v[(e + 1) % 3]);
                let len = (b.t - a.t).hypot(b.x - a.x);
                for (s, w) in edge.iter() {
                    let p = Point::new(a.t + s[0] * (b.t - a.t), a.x + s[0] * (b.x - a.x));
                    on_initial.push((p, w * len / ref_length));
                }
            }
            initial.push(on_initial);
        }
        Self { interior, initial }
    }
}

fn sample_of(component: usize, value: f64, grad: [f64; 2]) -> FieldSample {
    let mut s = FieldSample::default();
    if component == 0 {
        s.scalar = value;
        s.scalar_grad = grad;
    } else {
        s.flux[component - 1] = value;
        s.flux_grad[component - 1] = grad;
    }
    s
}

fn residual_dot(a: &[f64; 3], b: &[f64; 3], n: usize) -> f64 {
    (0..n).map(|i| a[i] * b[i]).sum()
}

/// Dense Galerkin matrix and load vector, built by a double loop over pairs of
/// global basis functions with quadrature of the given exactness.
pub fn dense_assemble(
    mesh: &Mesh,
    dofmap: &DofMap,
    system: &dyn FirstOrderSystem,
    exactness: usize,
) -> Result<(DenseMatrix, Vec<f64>)> {
    let n = dofmap.num_dofs();
    if n > MAX_DENSE_DOFS {
        return Err(Error::SizeGuard(n));
    }
    let quad =
        PhysicalQuadrature::new(mesh, &triangle_rule(exactness)?, &interval_rule(exactness)?);
    let bases: Vec<PhysicalBasis> = (0..mesh.num_elements())
        .map(|k| PhysicalBasis::new(mesh, dofmap, k))
        .collect::<Result<_>>()?;
    let globals = global_bases(dofmap);

    // support[i] = (element, local index) pairs where global basis i lives
    let mut support: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for k in 0..mesh.num_elements() {
        for (local, &node) in dofmap.element_nodes(k).iter().enumerate() {
            for (i, g) in globals.iter().enumerate() {
                if g.node == node {
                    support[i].push((k, local));
                }
            }
        }
    }
    let nres = system.residual_components();
    let eval = |g: GlobalBasis, k: usize, local: usize, p: Point| {
        let (v, grad) = bases[k].eval(p)[local];
        sample_of(g.component, v, grad)
    };

    let mut matrix = DenseMatrix::zeros(n);
    let mut load = vec![0.0; n];
    for i in 0..n {
        for &(k, li) in &support[i] {
            for &(p, w) in &quad.interior[k] {
                let gi = system.apply(p, &eval(globals[i], k, li, p));
                load[i] += w * residual_dot(&system.data(p), &gi, nres);
            }
            if system.has_initial_trace() {
                for &(p, w) in &quad.initial[k] {
                    load[i] += w
                        * system.initial_data(p)
                        * system.initial_trace(&eval(globals[i], k, li, p));
                }
            }
        }
        for j in i..n {
            let mut sum = 0.0;
            for &(k, li) in &support[i] {
                let Some(&(_, lj)) = support[j].iter().find(|&&(kj, _)| kj == k) else {
                    continue;
                };
                for &(p, w) in &quad.interior[k] {
                    let gi = system.apply(p, &eval(globals[i], k, li, p));
                    let gj = system.apply(p, &eval(globals[j], k, lj, p));
                    sum += w * residual_dot(&gi, &gj, nres);
                }
                if system.has_initial_trace() {
                    for &(p, w) in &quad.initial[k] {
                        sum += w
                            * system.initial_trace(&eval(globals[i], k, li, p))
                            * system.initial_trace(&eval(globals[j], k, lj, p));
                    }
                }
            }
            matrix.set_symmetric(i, j, sum);
        }
    }
    Ok((matrix, load))
}

/// Solves `A x = b` by dense Cholesky factorization.
pub fn dense_solve(matrix: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = matrix.size();
    if n > MAX_DENSE_DOFS {
        return Err(Error::SizeGuard(n));
    }
    if rhs.len() != n {
        return Err(Error::IndexOutOfRange {
            index: rhs.len(),
            len: n,
        });
    }
    let chol = matrix
        .to_nalgebra()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite {
            min_eigenvalue: min_eigenvalue(matrix).unwrap_or(f64::NAN),
        })?;
    Ok(chol
        .solve(&DVector::from_column_slice(rhs))
        .iter()
        .copied()
        .collect())
}

/// Smallest eigenvalue of a symmetric matrix (Householder tridiagonalization
/// followed by implicit QR).
pub fn min_eigenvalue(matrix: &DenseMatrix) -> Result<f64> {
    let n = matrix.size();
    if n > MAX_DENSE_DOFS {
        return Err(Error::SizeGuard(n));
    }
    if n == 0 {
        return Err(Error::InvalidParameter(
            "empty matrix has no eigenvalues".into(),
        ));
    }
    let eig = matrix.to_nalgebra().symmetric_eigen();
    Ok(eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min))
}

/// Evaluates the discrete field `coeffs` at every physical quadrature point.
struct DiscreteField<'a> {
    dofmap: &'a DofMap,
    bases: Vec<PhysicalBasis>,
    coeffs: &'a [f64],
}

impl<'a> DiscreteField<'a> {
    fn new(mesh: &Mesh, dofmap: &'a DofMap, coeffs: &'a [f64]) -> Result<Self> {
        if coeffs.len() != dofmap.num_dofs() {
            return Err(Error::IndexOutOfRange {
                index: coeffs.len(),
                len: dofmap.num_dofs(),
            });
        }
        let bases = (0..mesh.num_elements())
            .map(|k| PhysicalBasis::new(mesh, dofmap, k))
            .collect::<Result<_>>()?;
        Ok(Self {
            dofmap,
            bases,
            coeffs,
        })
    }

    fn sample(&self, k: usize, p: Point) -> FieldSample {
        let mut s = FieldSample::default();
        for (local, (v, g)) in self.bases[k].eval(p).into_iter().enumerate() {
            let node = self.dofmap.element_nodes(k)[local];
            if let Some(i) = self.dofmap.scalar_dof(node) {
                s = s.add(&sample_of(0, v, g).scaled(self.coeffs[i]));
            }
            for c in 0..self.dofmap.flux_components() {
                s = s.add(
                    &sample_of(c + 1, v, g).scaled(self.coeffs[self.dofmap.flux_dof(c, node)]),
                );
            }
        }
        s
    }
}

/// `||u_ref - u_h||_U` (including the initial trace term for systems that
/// have one) by quadrature of exactness `>= 8`; `discrete = None` gives
/// `||u_ref||_U`.
pub fn fine_norm(
    reference: &dyn ReferenceSolution,
    system: &dyn FirstOrderSystem,
    mesh: &Mesh,
    discrete: Option<(&DofMap, &[f64])>,
    exactness: usize,
) -> Result<f64> {
    if exactness < 8 {
        return Err(Error::InvalidParameter(format!(
            "fine norm needs exactness >= 8, got {exactness}"
        )));
    }
    let quad =
        PhysicalQuadrature::new(mesh, &triangle_rule(exactness)?, &interval_rule(exactness)?);
    let field = match discrete {
        Some((dofmap, coeffs)) => Some(DiscreteField::new(mesh, dofmap, coeffs)?),
        None => None,
    };
    let diff = |k: usize, p: Point| {
        let exact = reference.sample(p);
        match &field {
            Some(f) => exact.sub(&f.sample(k, p)),
            None => exact,
        }
    };
    let mut sq = 0.0;
    for k in 0..mesh.num_elements() {
        for &(p, w) in &quad.interior[k] {
            sq += w * system.norm_density(&diff(k, p)).iter().sum::<f64>();
        }
        if system.has_initial_trace() {
            for &(p, w) in &quad.initial[k] {
                sq += w * system.initial_trace(&diff(k, p)).powi(2);
            }
        }
    }
    Ok(sq.sqrt())
}

/// `||f - G u_h||_L` as a single sum over all quadrature points of the mesh,
/// without any per-element partial sums.
pub fn global_residual_norm(
    mesh: &Mesh,
    dofmap: &DofMap,
    coeffs: &[f64],
    system: &dyn FirstOrderSystem,
    exactness: usize,
) -> Result<f64> {
    let quad =
        PhysicalQuadrature::new(mesh, &triangle_rule(exactness)?, &interval_rule(exactness)?);
    let field = DiscreteField::new(mesh, dofmap, coeffs)?;
    let nres = system.residual_components();
    let mut interior: Vec<(usize, Point, f64)> = Vec::new();
    let mut initial: Vec<(usize, Point, f64)> = Vec::new();
    for k in 0..mesh.num_elements() {
        interior.extend(quad.interior[k].iter().map(|&(p, w)| (k, p, w)));
        initial.extend(quad.initial[k].iter().map(|&(p, w)| (k, p, w)));
    }
    let mut sq: f64 = interior
        .iter()
        .map(|&(k, p, w)| {
            let (f, g) = (system.data(p), system.apply(p, &field.sample(k, p)));
            w * (0..nres).map(|c| (f[c] - g[c]).powi(2)).sum::<f64>()
        })
        .sum();
    if system.has_initial_trace() {
        sq += initial
            .iter()
            .map(|&(k, p, w)| {
                w * (system.initial_data(p) - system.initial_trace(&field.sample(k, p))).powi(2)
            })
            .sum::<f64>();
    }
    Ok(sq.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{BuiltinCase, ConvectionForm};
    use crate::spaces::Constraint;
    use crate::system::ParabolicSystem;

    #[test]
    fn dense_solve_trivial() {
        let id = DenseMatrix::identity(3);
        assert_eq!(
            dense_solve(&id, &[1.0, -2.0, 3.0]).unwrap(),
            vec![1.0, -2.0, 3.0]
        );
        assert_eq!(dense_solve(&id, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        let indefinite = DenseMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(
            dense_solve(&indefinite, &[1.0, 1.0]),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn min_eigenvalue_trivial() {
        assert!((min_eigenvalue(&DenseMatrix::identity(4)).unwrap() - 1.0).abs() < 1e-14);
        assert!(
            (min_eigenvalue(&DenseMatrix::from_diagonal(&[3.0, 1.0, 2.0])).unwrap() - 1.0).abs()
                < 1e-14
        );
    }

    #[test]
    fn size_guard() {
        let big = DenseMatrix::identity(MAX_DENSE_DOFS + 1);
        assert_eq!(
            min_eigenvalue(&big),
            Err(Error::SizeGuard(MAX_DENSE_DOFS + 1))
        );
    }

    #[test]
    fn physical_basis_is_nodal() {
        let mesh = Mesh::uniform(1.0, (0.0, 1.0), 2, 3).unwrap();
        let dofmap = DofMap::new(&mesh, 2, Constraint::None, 1).unwrap();
        for k in 0..mesh.num_elements() {
            let basis = PhysicalBasis::new(&mesh, &dofmap, k).unwrap();
            for (i, &node) in dofmap.element_nodes(k).iter().enumerate() {
                let vals = basis.eval(dofmap.node_coords()[node]);
                for (j, (v, _)) in vals.iter().enumerate() {
                    assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn fine_norm_of_heat_reference() {
        // u = e^{-t} sin(pi x), u2 = -u_x, div u = (pi^2 - 1) u:
        // ||u||^2 + ||u_x||^2 + ||u2||^2 + ||div u||^2 + ||u(0)||^2
        // = (1 + 2 pi^2 + (pi^2 - 1)^2) (1 - e^{-2}) / 4 + 1/2
        let sys = ParabolicSystem::new(
            BuiltinCase::HeatSmooth
                .problem(ConvectionForm::FluxForm)
                .unwrap(),
        );
        let reference = BuiltinCase::HeatSmooth.reference().unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        let exact =
            ((1.0 + 2.0 * pi2 + (pi2 - 1.0).powi(2)) * (1.0 - (-2.0f64).exp()) / 4.0 + 0.5).sqrt();
        for n in [2, 3] {
            let mesh = Mesh::uniform(1.0, (0.0, 1.0), n, n).unwrap();
            let v = fine_norm(&reference, &sys, &mesh, None, 20).unwrap();
            assert!((v - exact).abs() < 1e-10, "{v} vs {exact}");
        }
        assert!(fine_norm(
            &reference,
            &sys,
            &Mesh::uniform(1.0, (0.0, 1.0), 1, 1).unwrap(),
            None,
            4
        )
        .is_err());
    }
}
