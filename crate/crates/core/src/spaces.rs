//! Continuous Lagrange spaces `S^p` and `S^p_0` (p = 1, 2) on space-time
//! triangles and the degree-of-freedom layout of the product trial space.
//!
//! Global unknowns are ordered as: free dofs of the scalar field first, then
//! every flux component over all Lagrange nodes.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mesh::{FacetTag, Mesh, Point};

/// Nodal Lagrange basis of degree 1 or 2 on the reference triangle.
///
/// Local node order: the three vertices, then the midpoints of local edges
/// 0 (v0-v1), 1 (v1-v2) and 2 (v2-v0) for p = 2.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceElement {
    degree: usize,
    nodes: Vec<[f64; 2]>,
}

const BARY_GRADS: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
const EDGES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

impl ReferenceElement {
    pub fn new(degree: usize) -> Result<Self> {
        let nodes = match degree {
            1 => vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            2 => vec![
                [0.0, 0.0],
                [1.0, 0.0],
                [0.0, 1.0],
                [0.5, 0.0],
                [0.5, 0.5],
                [0.0, 0.5],
            ],
            d => return Err(Error::UnsupportedDegree(d)),
        };
        Ok(Self { degree, nodes })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_basis(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn values(&self, xi: [f64; 2]) -> Vec<f64> {
        let l = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
        match self.degree {
            1 => l.to_vec(),
            _ => {
                let mut v: Vec<f64> = l.iter().map(|&li| li * (2.0 * li - 1.0)).collect();
                v.extend(EDGES.iter().map(|&(a, b)| 4.0 * l[a] * l[b]));
                v
            }
        }
    }

    /// Gradients with respect to the reference coordinates.
    pub fn gradients(&self, xi: [f64; 2]) -> Vec<[f64; 2]> {
        let l = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
        match self.degree {
            1 => BARY_GRADS.to_vec(),
            _ => {
                let mut g: Vec<[f64; 2]> = (0..3)
                    .map(|i| {
                        let s = 4.0 * l[i] - 1.0;
                        [s * BARY_GRADS[i][0], s * BARY_GRADS[i][1]]
                    })
                    .collect();
                g.extend(EDGES.iter().map(|&(a, b)| {
                    [
                        4.0 * (l[b] * BARY_GRADS[a][0] + l[a] * BARY_GRADS[b][0]),
                        4.0 * (l[b] * BARY_GRADS[a][1] + l[a] * BARY_GRADS[b][1]),
                    ]
                }));
                g
            }
        }
    }
}

/// Affine map `F(s, r) = origin + J (s, r)` from the reference triangle onto an element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineMap {
    pub origin: Point,
    /// Rows: (t, x); columns: reference directions.
    pub jacobian: [[f64; 2]; 2],
    /// `J^{-T}`, maps reference gradients to physical `(d/dt, d/dx)` gradients.
    pub inverse_transpose: [[f64; 2]; 2],
    pub det: f64,
}

impl AffineMap {
    pub fn from_vertices(p: [Point; 3]) -> Option<Self> {
        let j = [
            [p[1].t - p[0].t, p[2].t - p[0].t],
            [p[1].x - p[0].x, p[2].x - p[0].x],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if !(det.is_finite() && det > 0.0) {
            return None;
        }
        let inverse_transpose = [
            [j[1][1] / det, -j[1][0] / det],
            [-j[0][1] / det, j[0][0] / det],
        ];
        Some(Self {
            origin: p[0],
            jacobian: j,
            inverse_transpose,
            det,
        })
    }

    pub fn apply(&self, xi: [f64; 2]) -> Point {
        let j = &self.jacobian;
        Point::new(
            self.origin.t + j[0][0] * xi[0] + j[0][1] * xi[1],
            self.origin.x + j[1][0] * xi[0] + j[1][1] * xi[1],
        )
    }

    pub fn push_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let m = &self.inverse_transpose;
        [
            m[0][0] * g[0] + m[0][1] * g[1],
            m[1][0] * g[0] + m[1][1] * g[1],
        ]
    }
}

/// Affine map of element `k`; fails for degenerate or clockwise elements.
pub fn affine_map(mesh: &Mesh, k: usize) -> Result<AffineMap> {
    AffineMap::from_vertices(mesh.vertex_coords(k)).ok_or(Error::DegenerateElement(k))
}

/// Which boundary facets carry a homogeneous Dirichlet constraint for the scalar field.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constraint {
    None,
    /// `u = 0` on `I x dOmega` (facets tagged `LateralDirichlet`).
    Lateral,
    /// `u = 0` on the whole boundary of the rectangle.
    Boundary,
}

impl Constraint {
    fn applies(self, tag: FacetTag) -> bool {
        match self {
            Constraint::None => false,
            Constraint::Lateral => tag == FacetTag::LateralDirichlet,
            Constraint::Boundary => tag.is_boundary(),
        }
    }
}

/// Global numbering of Lagrange nodes and of the product-space unknowns.
#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    degree: usize,
    nodes_per_element: usize,
    element_nodes: Vec<usize>,
    node_coords: Vec<Point>,
    scalar_dof: Vec<Option<usize>>,
    num_scalar: usize,
    flux_components: usize,
    constraint: Constraint,
}

impl DofMap {
    pub fn new(
        mesh: &Mesh,
        degree: usize,
        constraint: Constraint,
        flux_components: usize,
    ) -> Result<Self> {
        if degree == 0 || degree > 2 {
            return Err(Error::UnsupportedDegree(degree));
        }
        if !(1..=2).contains(&flux_components) {
            return Err(Error::InvalidParameter(format!(
                "{flux_components} flux components"
            )));
        }
        let nloc = if degree == 1 { 3 } else { 6 };
        let mut node_coords = mesh.points().to_vec();
        let mut constrained = vec![false; node_coords.len()];
        let mut edge_nodes: HashMap<(usize, usize), usize> = HashMap::new();
        let mut element_nodes = Vec::with_capacity(nloc * mesh.num_elements());

        for k in 0..mesh.num_elements() {
            let verts = mesh.element(k).vertices;
            element_nodes.extend_from_slice(&verts);
            let tags = mesh.facet_tags(k);
            if degree == 2 {
                for (e, &(a, b)) in EDGES.iter().enumerate() {
                    let (va, vb) = (verts[a], verts[b]);
                    let key = if va < vb { (va, vb) } else { (vb, va) };
                    let id = *edge_nodes.entry(key).or_insert_with(|| {
                        node_coords.push(mesh.points()[va].midpoint(mesh.points()[vb]));
                        constrained.push(false);
                        node_coords.len() - 1
                    });
                    element_nodes.push(id);
                    if constraint.applies(tags[e]) {
                        constrained[id] = true;
                    }
                }
            }
            for (e, &(a, b)) in EDGES.iter().enumerate() {
                if constraint.applies(tags[e]) {
                    constrained[verts[a]] = true;
                    constrained[verts[b]] = true;
                }
            }
        }

        let mut num_scalar = 0;
        let scalar_dof = constrained
            .iter()
            .map(|&c| {
                (!c).then(|| {
                    num_scalar += 1;
                    num_scalar - 1
                })
            })
            .collect();

        Ok(Self {
            degree,
            nodes_per_element: nloc,
            element_nodes,
            node_coords,
            scalar_dof,
            num_scalar,
            flux_components,
            constraint,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    pub fn num_nodes(&self) -> usize {
        self.node_coords.len()
    }

    pub fn node_coords(&self) -> &[Point] {
        &self.node_coords
    }

    pub fn nodes_per_element(&self) -> usize {
        self.nodes_per_element
    }

    pub fn element_nodes(&self, k: usize) -> &[usize] {
        let n = self.nodes_per_element;
        &self.element_nodes[k * n..(k + 1) * n]
    }

    pub fn flux_components(&self) -> usize {
        self.flux_components
    }

    /// Free scalar dofs (constrained nodes removed).
    pub fn num_scalar_dofs(&self) -> usize {
        self.num_scalar
    }

    pub fn num_flux_dofs(&self) -> usize {
        self.flux_components * self.num_nodes()
    }

    pub fn num_dofs(&self) -> usize {
        self.num_scalar + self.num_flux_dofs()
    }

    pub fn scalar_dof(&self, node: usize) -> Option<usize> {
        self.scalar_dof[node]
    }

    pub fn is_constrained(&self, node: usize) -> bool {
        self.scalar_dof[node].is_none()
    }

    pub fn flux_dof(&self, component: usize, node: usize) -> usize {
        self.num_scalar + component * self.num_nodes() + node
    }

    /// Local-to-global map of element `k`: scalar slots, then each flux
    /// component. Constrained scalar slots are `None`.
    pub fn local_dofs(&self, k: usize) -> Vec<Option<usize>> {
        let nodes = self.element_nodes(k);
        let mut out: Vec<Option<usize>> = nodes.iter().map(|&n| self.scalar_dof(n)).collect();
        for c in 0..self.flux_components {
            out.extend(nodes.iter().map(|&n| Some(self.flux_dof(c, n))));
        }
        out
    }

    /// Nodal interpolation of a scalar function and a flux field into a global
    /// coefficient vector. Constrained scalar nodes are dropped.
    pub fn interpolate(
        &self,
        scalar: impl Fn(Point) -> f64,
        flux: impl Fn(Point) -> [f64; 2],
    ) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.num_dofs()];
        for (node, &p) in self.node_coords.iter().enumerate() {
            if let Some(d) = self.scalar_dof(node) {
                coeffs[d] = scalar(p);
            }
            let f = flux(p);
            for (c, &fc) in f.iter().enumerate().take(self.flux_components) {
                coeffs[self.flux_dof(c, node)] = fc;
            }
        }
        coeffs
    }
}

/// Values and space-time gradients `(d/dt, d/dx)` of the scalar field and of
/// up to two flux components at one point. Unused flux components are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldSample {
    pub scalar: f64,
    pub scalar_grad: [f64; 2],
    pub flux: [f64; 2],
    pub flux_grad: [[f64; 2]; 2],
}

impl FieldSample {
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            scalar: alpha * self.scalar,
            scalar_grad: self.scalar_grad.map(|g| alpha * g),
            flux: self.flux.map(|f| alpha * f),
            flux_grad: self.flux_grad.map(|r| r.map(|g| alpha * g)),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        out.scalar += other.scalar;
        for i in 0..2 {
            out.scalar_grad[i] += other.scalar_grad[i];
            out.flux[i] += other.flux[i];
            for j in 0..2 {
                out.flux_grad[i][j] += other.flux_grad[i][j];
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-1.0))
    }
}

/// A mesh together with its trial space and per-element geometry.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub mesh: Mesh,
    pub reference: ReferenceElement,
    pub dofmap: DofMap,
    maps: Vec<AffineMap>,
}

impl Discretization {
    pub fn new(
        mesh: Mesh,
        degree: usize,
        constraint: Constraint,
        flux_components: usize,
    ) -> Result<Self> {
        let reference = ReferenceElement::new(degree)?;
        let dofmap = DofMap::new(&mesh, degree, constraint, flux_components)?;
        let maps = (0..mesh.num_elements())
            .map(|k| affine_map(&mesh, k))
            .collect::<Result<_>>()?;
        Ok(Self {
            mesh,
            reference,
            dofmap,
            maps,
        })
    }

    pub fn map(&self, k: usize) -> &AffineMap {
        &self.maps[k]
    }

    pub fn num_dofs(&self) -> usize {
        self.dofmap.num_dofs()
    }

    /// Evaluates the discrete fields of `coeffs` on element `k` at reference point `xi`.
    pub fn evaluate(&self, coeffs: &[f64], k: usize, xi: [f64; 2]) -> Result<FieldSample> {
        evaluate_field(coeffs, &self.dofmap, &self.reference, &self.maps[k], k, xi)
    }
}

/// Evaluates value and gradient of the discrete fields at a reference point of element `k`.
pub fn evaluate_field(
    coeffs: &[f64],
    dofmap: &DofMap,
    reference: &ReferenceElement,
    map: &AffineMap,
    k: usize,
    xi: [f64; 2],
) -> Result<FieldSample> {
    if coeffs.len() != dofmap.num_dofs() {
        return Err(Error::IndexOutOfRange {
            index: coeffs.len(),
            len: dofmap.num_dofs(),
        });
    }
    let values = reference.values(xi);
    let grads: Vec<[f64; 2]> = reference
        .gradients(xi)
        .into_iter()
        .map(|g| map.push_gradient(g))
        .collect();
    Ok(combine(coeffs, dofmap, k, &values, &grads))
}

/// Combines basis values and physical gradients at one point with the element coefficients.
pub(crate) fn combine(
    coeffs: &[f64],
    dofmap: &DofMap,
    k: usize,
    values: &[f64],
    grads: &[[f64; 2]],
) -> FieldSample {
    let mut s = FieldSample::default();
    for (i, &node) in dofmap.element_nodes(k).iter().enumerate() {
        if let Some(d) = dofmap.scalar_dof(node) {
            let c = coeffs[d];
            s.scalar += c * values[i];
            s.scalar_grad[0] += c * grads[i][0];
            s.scalar_grad[1] += c * grads[i][1];
        }
        for comp in 0..dofmap.flux_components() {
            let c = coeffs[dofmap.flux_dof(comp, node)];
            s.flux[comp] += c * values[i];
            s.flux_grad[comp][0] += c * grads[i][0];
            s.flux_grad[comp][1] += c * grads[i][1];
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::triangle_rule;
    use rand::{Rng, SeedableRng};

    #[test]
    fn nodal_basis_and_partition_of_unity() {
        for p in [1, 2] {
            let r = ReferenceElement::new(p).unwrap();
            for (j, &node) in r.nodes().iter().enumerate() {
                let v = r.values(node);
                for (i, &vi) in v.iter().enumerate() {
                    assert_eq!(
                        vi,
                        if i == j { 1.0 } else { 0.0 },
                        "p={p} phi_{i}(node_{j})"
                    );
                }
            }
            let centre = [1.0 / 3.0, 1.0 / 3.0];
            assert!((r.values(centre).iter().sum::<f64>() - 1.0).abs() < 1e-15);
            let rule = triangle_rule(4).unwrap();
            for &xi in rule.points() {
                let g = r.gradients(xi);
                let sum = g
                    .iter()
                    .fold([0.0, 0.0], |acc, gi| [acc[0] + gi[0], acc[1] + gi[1]]);
                assert!(sum[0].abs() < 1e-14 && sum[1].abs() < 1e-14);
            }
        }
        assert_eq!(
            ReferenceElement::new(3).unwrap_err(),
            Error::UnsupportedDegree(3)
        );
    }

    #[test]
    fn gradients_match_finite_differences() {
        let r = ReferenceElement::new(2).unwrap();
        let xi = [0.23, 0.41];
        let h = 1e-6;
        let g = r.gradients(xi);
        let vp = r.values([xi[0] + h, xi[1]]);
        let vm = r.values([xi[0] - h, xi[1]]);
        let wp = r.values([xi[0], xi[1] + h]);
        let wm = r.values([xi[0], xi[1] - h]);
        for i in 0..6 {
            assert!(((vp[i] - vm[i]) / (2.0 * h) - g[i][0]).abs() < 1e-8);
            assert!(((wp[i] - wm[i]) / (2.0 * h) - g[i][1]).abs() < 1e-8);
        }
    }

    #[test]
    fn affine_maps() {
        let unit = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ];
        let m = AffineMap::from_vertices(unit).unwrap();
        assert_eq!(m.jacobian, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(m.det, 1.0);
        let s = 3.0;
        let scaled = unit.map(|p| Point::new(s * p.t, s * p.x));
        assert!((AffineMap::from_vertices(scaled).unwrap().det - s * s).abs() < 1e-14);

        let mesh = Mesh::uniform(2.0, (-1.0, 3.0), 3, 2)
            .unwrap()
            .refine_uniform()
            .unwrap();
        for k in 0..mesh.num_elements() {
            let map = affine_map(&mesh, k).unwrap();
            assert!((map.det - 2.0 * mesh.element_measure(k)).abs() < 1e-14);
        }
        let flipped = [unit[0], unit[2], unit[1]];
        assert!(AffineMap::from_vertices(flipped).is_none());
    }

    #[test]
    fn dof_counts() {
        let m = Mesh::uniform(1.0, (0.0, 1.0), 1, 1).unwrap();
        let free = DofMap::new(&m, 1, Constraint::None, 1).unwrap();
        assert_eq!(free.num_scalar_dofs(), 4);
        let lat = DofMap::new(&m, 1, Constraint::Lateral, 1).unwrap();
        assert_eq!(lat.num_scalar_dofs(), 0);
        assert_eq!(lat.num_dofs(), 4);

        let m = Mesh::uniform(1.0, (0.0, 1.0), 2, 2).unwrap();
        let lat = DofMap::new(&m, 1, Constraint::Lateral, 1).unwrap();
        assert_eq!(lat.num_nodes(), 9);
        assert_eq!(lat.num_scalar_dofs(), 3);
        for node in 0..9 {
            if lat.scalar_dof(node).is_some() {
                assert_eq!(lat.node_coords()[node].x, 0.5);
            }
        }
    }

    #[test]
    fn constrained_nodes_match_geometry() {
        for p in [1, 2] {
            let mesh = Mesh::uniform(1.5, (-0.5, 2.0), 3, 4).unwrap();
            let lat = DofMap::new(&mesh, p, Constraint::Lateral, 1).unwrap();
            for (node, pt) in lat.node_coords().iter().enumerate() {
                assert_eq!(lat.is_constrained(node), pt.x == -0.5 || pt.x == 2.0);
            }
            let all = DofMap::new(&mesh, p, Constraint::Boundary, 2).unwrap();
            for (node, pt) in all.node_coords().iter().enumerate() {
                let on_boundary = pt.x == -0.5 || pt.x == 2.0 || pt.t == 0.0 || pt.t == 1.5;
                assert_eq!(all.is_constrained(node), on_boundary);
            }
        }
    }

    #[test]
    fn p2_node_count() {
        let m = Mesh::uniform(1.0, (0.0, 1.0), 2, 2).unwrap();
        let d = DofMap::new(&m, 2, Constraint::None, 1).unwrap();
        // (2*2+1)^2 vertices of the refined lattice
        assert_eq!(d.num_nodes(), 25);
    }

    fn polynomial_sample(p: usize, pt: Point) -> (f64, [f64; 2]) {
        match p {
            1 => (2.0 - 0.5 * pt.t + 3.0 * pt.x, [-0.5, 3.0]),
            _ => (
                1.0 + pt.t * pt.t - 2.0 * pt.t * pt.x + 0.5 * pt.x * pt.x + pt.x,
                [2.0 * pt.t - 2.0 * pt.x, -2.0 * pt.t + pt.x + 1.0],
            ),
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for p in [1, 2] {
            let mesh = Mesh::uniform(1.0, (0.0, 2.0), 2, 3).unwrap();
            let mesh = mesh
                .bisect(&crate::mesh::MarkSet::new(vec![0, 3, 7]))
                .unwrap();
            let disc = Discretization::new(mesh, p, Constraint::None, 1).unwrap();
            let coeffs = disc.dofmap.interpolate(
                |pt| polynomial_sample(p, pt).0,
                |pt| [polynomial_sample(p, pt).0, 0.0],
            );
            for k in 0..disc.mesh.num_elements() {
                for _ in 0..20 {
                    let (s, r): (f64, f64) = (rng.gen(), rng.gen());
                    let xi = if s + r > 1.0 {
                        [1.0 - s, 1.0 - r]
                    } else {
                        [s, r]
                    };
                    let pt = disc.map(k).apply(xi);
                    let (v, g) = polynomial_sample(p, pt);
                    let f = disc.evaluate(&coeffs, k, xi).unwrap();
                    assert!((f.scalar - v).abs() < 1e-12);
                    assert!((f.scalar_grad[0] - g[0]).abs() < 1e-11);
                    assert!((f.scalar_grad[1] - g[1]).abs() < 1e-11);
                    assert!((f.flux[0] - v).abs() < 1e-12);
                    assert!((f.flux_grad[0][1] - g[1]).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn linear_in_x_and_quadratic_in_t() {
        let mesh = Mesh::uniform(1.0, (0.0, 1.0), 2, 2).unwrap();
        let disc = Discretization::new(mesh.clone(), 1, Constraint::None, 1).unwrap();
        let c = disc.dofmap.interpolate(|p| p.x, |_| [0.0, 0.0]);
        let f = disc.evaluate(&c, 3, [0.2, 0.3]).unwrap();
        assert!((f.scalar - disc.map(3).apply([0.2, 0.3]).x).abs() < 1e-15);
        assert!((f.scalar_grad[0]).abs() < 1e-14 && (f.scalar_grad[1] - 1.0).abs() < 1e-14);
        let zero = disc
            .evaluate(&vec![0.0; disc.num_dofs()], 3, [0.2, 0.3])
            .unwrap();
        assert_eq!(zero, FieldSample::default());

        let disc2 = Discretization::new(mesh, 2, Constraint::None, 1).unwrap();
        let c = disc2.dofmap.interpolate(|p| p.t * p.t, |_| [0.0, 0.0]);
        let xi = [0.6, 0.1];
        let pt = disc2.map(5).apply(xi);
        let f = disc2.evaluate(&c, 5, xi).unwrap();
        assert!((f.scalar - pt.t * pt.t).abs() < 1e-14);
        assert!((f.scalar_grad[0] - 2.0 * pt.t).abs() < 1e-13);
        assert!(f.scalar_grad[1].abs() < 1e-13);
        assert!(disc2.evaluate(&[1.0], 0, xi).is_err());
    }

    #[test]
    fn continuity_across_interior_edges() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for p in [1, 2] {
            let mesh = Mesh::uniform(1.0, (0.0, 1.0), 2, 2).unwrap();
            let mesh = mesh.bisect(&crate::mesh::MarkSet::new(vec![1, 2])).unwrap();
            let disc = Discretization::new(mesh, p, Constraint::Lateral, 1).unwrap();
            let coeffs: Vec<f64> = (0..disc.num_dofs())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            for (_, users) in disc.mesh.edge_incidence() {
                let [(k0, e0), (k1, _)] = users[..] else {
                    continue;
                };
                let [a, b] = disc.mesh.edge_vertices(k0, e0);
                let (pa, pb) = (disc.mesh.points()[a], disc.mesh.points()[b]);
                for i in 0..=p {
                    let s = i as f64 / p as f64;
                    let pt = Point::new(pa.t + s * (pb.t - pa.t), pa.x + s * (pb.x - pa.x));
                    let v0 = disc
                        .evaluate(&coeffs, k0, reference_coords(disc.map(k0), pt))
                        .unwrap();
                    let v1 = disc
                        .evaluate(&coeffs, k1, reference_coords(disc.map(k1), pt))
                        .unwrap();
                    assert!((v0.scalar - v1.scalar).abs() < 1e-13);
                    assert!((v0.flux[0] - v1.flux[0]).abs() < 1e-13);
                }
            }
        }
    }

    fn reference_coords(map: &AffineMap, p: Point) -> [f64; 2] {
        let (dt, dx) = (p.t - map.origin.t, p.x - map.origin.x);
        let m = &map.inverse_transpose;
        // J^{-1} = (J^{-T})^T
        [m[0][0] * dt + m[1][0] * dx, m[0][1] * dt + m[1][1] * dx]
    }
}
