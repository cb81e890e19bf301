//! Assembly of the normal equations `<G u, G v>_L = <f, G v>_L` over the
//! discrete trial space, and their solution by conjugate gradients.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::{interval_rule, triangle_rule, QuadratureRule};
use crate::spaces::{Discretization, FieldSample};
use crate::system::{FirstOrderSystem, Residual};

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds the sparsity pattern from per-row column lists (duplicates allowed).
    pub fn from_pattern(mut rows: Vec<Vec<usize>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        Self {
            nrows,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(n: usize, dense: &[f64]) -> Self {
        let rows = (0..n)
            .map(|i| (0..n).filter(|&j| dense[i * n + j] != 0.0).collect())
            .collect();
        let mut m = Self::from_pattern(rows);
        for i in 0..n {
            for p in m.row_ptr[i]..m.row_ptr[i + 1] {
                m.values[p] = dense[i * n + m.col_idx[p]];
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn position(&self, row: usize, col: usize) -> Option<usize> {
        let cols = &self.col_idx[self.row_ptr[row]..self.row_ptr[row + 1]];
        cols.binary_search(&col).ok().map(|p| p + self.row_ptr[row])
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.position(row, col).map_or(0.0, |p| self.values[p])
    }

    /// Adds into an entry of the pattern; panics if the entry is not present.
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        let p = self
            .position(row, col)
            .expect("entry outside sparsity pattern");
        self.values[p] += value;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[p] * x[self.col_idx[p]];
            }
            *yi = s;
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.nrows;
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                d[i * n + self.col_idx[p]] = self.values[p];
            }
        }
        d
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                worst = worst.max((self.values[p] - self.get(j, i)).abs());
            }
        }
        worst
    }
}

#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

impl SparseSystem {
    pub fn num_dofs(&self) -> usize {
        self.rhs.len()
    }
}

/// Element loop scheduling. Both modes scatter in element order and produce
/// bit-identical systems.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AssemblyMode {
    #[default]
    Sequential,
    /// Element kernels run on the rayon pool; the scatter stays sequential.
    Parallel,
}

/// Interior and initial-facet quadrature rules used for one discretization.
#[derive(Clone, Debug)]
pub struct Quadrature {
    pub triangle: QuadratureRule,
    pub edge: QuadratureRule,
}

impl Quadrature {
    pub fn with_exactness(exactness: usize) -> Result<Self> {
        Ok(Self {
            triangle: triangle_rule(exactness)?,
            edge: interval_rule(exactness)?,
        })
    }

    /// Exactness `2p + 2` for both rules.
    pub fn for_degree(degree: usize) -> Result<Self> {
        Self::with_exactness(2 * degree + 2)
    }
}

/// Basis values and reference gradients tabulated at the points of a rule.
pub(crate) struct Tabulation {
    pub values: Vec<Vec<f64>>,
    pub grads: Vec<Vec<[f64; 2]>>,
}

impl Tabulation {
    pub fn new(disc: &Discretization, points: impl Iterator<Item = [f64; 2]>) -> Self {
        let (values, grads) = points
            .map(|xi| (disc.reference.values(xi), disc.reference.gradients(xi)))
            .unzip();
        Self { values, grads }
    }
}

/// Reference coordinates of the points of an edge rule on local edge `e`.
pub(crate) fn edge_points(edge_rule: &QuadratureRule, e: usize) -> Vec<[f64; 2]> {
    const VERTS: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let (a, b) = (VERTS[e], VERTS[(e + 1) % 3]);
    edge_rule
        .points()
        .iter()
        .map(|&[s, _]| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])])
        .collect()
}

/// The field sample of local basis slot `slot` (scalar slots first, then flux components).
pub(crate) fn basis_sample(slot: usize, nloc: usize, value: f64, grad: [f64; 2]) -> FieldSample {
    let mut s = FieldSample::default();
    let comp = slot / nloc;
    if comp == 0 {
        s.scalar = value;
        s.scalar_grad = grad;
    } else {
        s.flux[comp - 1] = value;
        s.flux_grad[comp - 1] = grad;
    }
    s
}

fn dot(a: &Residual, b: &Residual, n: usize) -> f64 {
    (0..n).map(|c| a[c] * b[c]).sum()
}

/// Local matrix (row-major, `n x n`) and load of one element.
struct ElementContribution {
    matrix: Vec<f64>,
    load: Vec<f64>,
}

struct Kernel<'a> {
    disc: &'a Discretization,
    system: &'a dyn FirstOrderSystem,
    quad: &'a Quadrature,
    interior: Tabulation,
    edges: [Tabulation; 3],
}

impl<'a> Kernel<'a> {
    fn new(
        disc: &'a Discretization,
        system: &'a dyn FirstOrderSystem,
        quad: &'a Quadrature,
    ) -> Self {
        let interior = Tabulation::new(disc, quad.triangle.points().iter().copied());
        let edges =
            [0, 1, 2].map(|e| Tabulation::new(disc, edge_points(&quad.edge, e).into_iter()));
        Self {
            disc,
            system,
            quad,
            interior,
            edges,
        }
    }

    fn local_size(&self) -> usize {
        self.disc.dofmap.nodes_per_element() * (1 + self.disc.dofmap.flux_components())
    }

    fn element(&self, k: usize) -> ElementContribution {
        let nloc = self.disc.dofmap.nodes_per_element();
        let n = self.local_size();
        let nres = self.system.residual_components();
        let map = self.disc.map(k);
        let mut matrix = vec![0.0; n * n];
        let mut load = vec![0.0; n];
        let mut images: Vec<Residual> = vec![[0.0; 3]; n];

        for (q, &w_ref) in self.quad.triangle.weights().iter().enumerate() {
            let p = map.apply(self.quad.triangle.points()[q]);
            let w = w_ref * map.det;
            for (slot, image) in images.iter_mut().enumerate() {
                let i = slot % nloc;
                let grad = map.push_gradient(self.interior.grads[q][i]);
                *image = self.system.apply(
                    p,
                    &basis_sample(slot, nloc, self.interior.values[q][i], grad),
                );
            }
            let data = self.system.data(p);
            for r in 0..n {
                load[r] += w * dot(&data, &images[r], nres);
                for s in r..n {
                    matrix[r * n + s] += w * dot(&images[r], &images[s], nres);
                }
            }
        }

        if self.system.has_initial_trace() {
            for e in self.disc.mesh.initial_edges(k) {
                let [a, b] = self.disc.mesh.edge_vertices(k, e);
                let (pa, pb) = (self.disc.mesh.points()[a], self.disc.mesh.points()[b]);
                let length = (pb.t - pa.t).hypot(pb.x - pa.x);
                let pts = edge_points(&self.quad.edge, e);
                let tab = &self.edges[e];
                for (q, &w_ref) in self.quad.edge.weights().iter().enumerate() {
                    let p = map.apply(pts[q]);
                    let w = w_ref * length;
                    let traces: Vec<f64> = (0..n)
                        .map(|slot| {
                            let i = slot % nloc;
                            let grad = map.push_gradient(tab.grads[q][i]);
                            self.system.initial_trace(&basis_sample(
                                slot,
                                nloc,
                                tab.values[q][i],
                                grad,
                            ))
                        })
                        .collect();
                    let u0 = self.system.initial_data(p);
                    for r in 0..n {
                        load[r] += w * u0 * traces[r];
                        for s in r..n {
                            matrix[r * n + s] += w * traces[r] * traces[s];
                        }
                    }
                }
            }
        }

        for r in 0..n {
            for s in 0..r {
                matrix[r * n + s] = matrix[s * n + r];
            }
        }
        ElementContribution { matrix, load }
    }
}

fn sparsity(disc: &Discretization) -> CsrMatrix {
    let ndofs = disc.num_dofs();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); ndofs];
    for k in 0..disc.mesh.num_elements() {
        let dofs: Vec<usize> = disc.dofmap.local_dofs(k).into_iter().flatten().collect();
        for &r in &dofs {
            rows[r].extend_from_slice(&dofs);
        }
    }
    CsrMatrix::from_pattern(rows)
}

/// Assembles `<G phi_j, G phi_i>_L` and `<f, G phi_i>_L` over the free dofs.
pub fn assemble(
    disc: &Discretization,
    system: &dyn FirstOrderSystem,
    quad: &Quadrature,
    mode: AssemblyMode,
) -> Result<SparseSystem> {
    if disc.dofmap.flux_components() != system.flux_components() {
        return Err(Error::InvalidParameter(format!(
            "discretization has {} flux components, system `{}` needs {}",
            disc.dofmap.flux_components(),
            system.name(),
            system.flux_components()
        )));
    }
    let kernel = Kernel::new(disc, system, quad);
    let mut matrix = sparsity(disc);
    let mut rhs = vec![0.0; disc.num_dofs()];

    let mut scatter = |k: usize, c: &ElementContribution| {
        let dofs = disc.dofmap.local_dofs(k);
        let n = dofs.len();
        for (r, dr) in dofs.iter().enumerate() {
            let Some(gr) = *dr else { continue };
            rhs[gr] += c.load[r];
            for (s, ds) in dofs.iter().enumerate() {
                if let Some(gs) = *ds {
                    matrix.add(gr, gs, c.matrix[r * n + s]);
                }
            }
        }
    };

    match mode {
        AssemblyMode::Sequential => {
            for k in 0..disc.mesh.num_elements() {
                let c = kernel.element(k);
                scatter(k, &c);
            }
        }
        AssemblyMode::Parallel => {
            let contributions: Vec<ElementContribution> = (0..disc.mesh.num_elements())
                .into_par_iter()
                .map(|k| kernel.element(k))
                .collect();
            for (k, c) in contributions.iter().enumerate() {
                scatter(k, c);
            }
        }
    }
    Ok(SparseSystem { matrix, rhs })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    /// `||b - A x|| / ||b||`, or 0 for a zero right-hand side.
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot_vec(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unpreconditioned conjugate gradients from a zero initial guess.
pub fn solve_cg(
    matrix: &CsrMatrix,
    rhs: &[f64],
    rel_tol: f64,
    max_iters: usize,
) -> (Vec<f64>, SolverReport) {
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let b_norm = dot_vec(rhs, rhs).sqrt();
    if b_norm == 0.0 {
        return (
            x,
            SolverReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        );
    }
    let target = rel_tol * b_norm;
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot_vec(&r, &r);
    let mut iterations = 0;

    while iterations < max_iters {
        matrix.mul_vec(&p, &mut ap);
        let pap = dot_vec(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        let rr_new = dot_vec(&r, &r);
        if rr_new.sqrt() <= target {
            // confirm with the true residual; restart from it if the recursion drifted
            matrix.mul_vec(&x, &mut ap);
            for i in 0..n {
                r[i] = rhs[i] - ap[i];
            }
            rr = dot_vec(&r, &r);
            if rr.sqrt() <= target {
                break;
            }
            p.copy_from_slice(&r);
            continue;
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }

    matrix.mul_vec(&x, &mut ap);
    let res = rhs
        .iter()
        .zip(&ap)
        .map(|(b, a)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt()
        / b_norm;
    (
        x,
        SolverReport {
            iterations,
            relative_residual: res,
            converged: res <= rel_tol,
        },
    )
}

/// Default CG tolerance and iteration cap (`20 * dofs`).
pub const CG_REL_TOL: f64 = 1e-10;

pub fn default_max_iters(ndofs: usize) -> usize {
    20 * ndofs.max(1)
}

/// `max_i |<f - G u_h, G phi_i>_L| / (||f||_L ||G phi_i||_L)`, evaluated by
/// quadrature directly from the fields rather than from the assembled matrix.
/// When `f = 0` the normalization by `||f||_L` is dropped.
pub fn galerkin_orthogonality_check(
    disc: &Discretization,
    coeffs: &[f64],
    system: &dyn FirstOrderSystem,
    quad: &Quadrature,
) -> Result<f64> {
    let ndofs = disc.num_dofs();
    if coeffs.len() != ndofs {
        return Err(Error::IndexOutOfRange {
            index: coeffs.len(),
            len: ndofs,
        });
    }
    let nloc = disc.dofmap.nodes_per_element();
    let nres = system.residual_components();
    let interior = Tabulation::new(disc, quad.triangle.points().iter().copied());
    let edge_tabs =
        [0, 1, 2].map(|e| Tabulation::new(disc, edge_points(&quad.edge, e).into_iter()));

    let mut defect = vec![0.0; ndofs];
    let mut norms = vec![0.0; ndofs];
    let mut f_norm_sq = 0.0;

    for k in 0..disc.mesh.num_elements() {
        let map = disc.map(k);
        let dofs = disc.dofmap.local_dofs(k);
        for (q, &w_ref) in quad.triangle.weights().iter().enumerate() {
            let p = map.apply(quad.triangle.points()[q]);
            let w = w_ref * map.det;
            let grads: Vec<[f64; 2]> = interior.grads[q]
                .iter()
                .map(|&g| map.push_gradient(g))
                .collect();
            let uh = crate::spaces::combine(coeffs, &disc.dofmap, k, &interior.values[q], &grads);
            let (f, gu) = (system.data(p), system.apply(p, &uh));
            let resid: Residual = [f[0] - gu[0], f[1] - gu[1], f[2] - gu[2]];
            f_norm_sq += w * dot(&f, &f, nres);
            for (slot, &dof) in dofs.iter().enumerate() {
                let Some(g) = dof else { continue };
                let i = slot % nloc;
                let gphi = system.apply(
                    p,
                    &basis_sample(slot, nloc, interior.values[q][i], grads[i]),
                );
                defect[g] += w * dot(&resid, &gphi, nres);
                norms[g] += w * dot(&gphi, &gphi, nres);
            }
        }
        if !system.has_initial_trace() {
            continue;
        }
        for e in disc.mesh.initial_edges(k) {
            let [a, b] = disc.mesh.edge_vertices(k, e);
            let (pa, pb) = (disc.mesh.points()[a], disc.mesh.points()[b]);
            let length = (pb.t - pa.t).hypot(pb.x - pa.x);
            let pts = edge_points(&quad.edge, e);
            let tab = &edge_tabs[e];
            for (q, &w_ref) in quad.edge.weights().iter().enumerate() {
                let p = map.apply(pts[q]);
                let w = w_ref * length;
                let grads: Vec<[f64; 2]> =
                    tab.grads[q].iter().map(|&g| map.push_gradient(g)).collect();
                let uh = crate::spaces::combine(coeffs, &disc.dofmap, k, &tab.values[q], &grads);
                let u0 = system.initial_data(p);
                let resid = u0 - system.initial_trace(&uh);
                f_norm_sq += w * u0 * u0;
                for (slot, &dof) in dofs.iter().enumerate() {
                    let Some(g) = dof else { continue };
                    let i = slot % nloc;
                    let tr =
                        system.initial_trace(&basis_sample(slot, nloc, tab.values[q][i], grads[i]));
                    defect[g] += w * resid * tr;
                    norms[g] += w * tr * tr;
                }
            }
        }
    }

    let f_norm = if f_norm_sq > 0.0 {
        f_norm_sq.sqrt()
    } else {
        1.0
    };
    Ok(defect
        .iter()
        .zip(&norms)
        .filter(|(_, &nrm)| nrm > 0.0)
        .map(|(d, nrm)| d.abs() / (f_norm * nrm.sqrt()))
        .fold(0.0, f64::max))
}
