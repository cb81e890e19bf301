//! Conforming triangulations of the space-time rectangle `(0, T) x (a, b)` and
//! newest-vertex bisection (NVB).
//!
//! Every element stores its vertices so that the refinement edge joins local
//! vertices 0 and 1; local vertex 2 is the newest vertex. Local edge `k` joins
//! vertices `k` and `k + 1 (mod 3)`, so edge 0 is always the refinement edge.
//! Boundary facets carry a [`FacetTag`] per `(element, local edge)`, and the tags
//! are handed down to children during bisection instead of being recomputed
//! from coordinates.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A point of the space-time plane; `t` is time, `x` is space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub t: f64,
    pub x: f64,
}

impl Point {
    pub const fn new(t: f64, x: f64) -> Self {
        Self { t, x }
    }

    pub fn midpoint(self, other: Point) -> Point {
        Point::new(0.5 * (self.t + other.t), 0.5 * (self.x + other.x))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Element {
    /// Vertex indices; the refinement edge is `vertices[0]`-`vertices[1]`.
    pub vertices: [usize; 3],
    /// Bisection depth.
    pub generation: u32,
    /// Index of the initial-mesh element this element descends from.
    pub root: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FacetTag {
    LateralDirichlet,
    Initial,
    Final,
    Interior,
}

impl FacetTag {
    pub fn is_boundary(self) -> bool {
        self != FacetTag::Interior
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FacetTag::LateralDirichlet => "LateralDirichlet",
            FacetTag::Initial => "Initial",
            FacetTag::Final => "Final",
            FacetTag::Interior => "Interior",
        }
    }
}

impl std::str::FromStr for FacetTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "LateralDirichlet" => Ok(FacetTag::LateralDirichlet),
            "Initial" => Ok(FacetTag::Initial),
            "Final" => Ok(FacetTag::Final),
            "Interior" => Ok(FacetTag::Interior),
            other => Err(Error::Parse(format!("unknown facet tag `{other}`"))),
        }
    }
}

/// The computational rectangle `(0, t_end) x (a, b)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceTimeBox {
    pub t_end: f64,
    pub a: f64,
    pub b: f64,
}

impl SpaceTimeBox {
    pub fn new(t_end: f64, a: f64, b: f64) -> Result<Self> {
        if !(t_end.is_finite() && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidParameter(
                "domain bounds must be finite".into(),
            ));
        }
        if t_end <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "T_end must be positive, got {t_end}"
            )));
        }
        if a >= b {
            return Err(Error::InvalidParameter(format!(
                "empty interval ({a}, {b})"
            )));
        }
        Ok(Self { t_end, a, b })
    }

    pub fn area(&self) -> f64 {
        self.t_end * (self.b - self.a)
    }

    /// Exact classification of a segment lying on the boundary of the box.
    fn classify_segment(&self, p: Point, q: Point) -> FacetTag {
        if p.t == 0.0 && q.t == 0.0 {
            FacetTag::Initial
        } else if p.t == self.t_end && q.t == self.t_end {
            FacetTag::Final
        } else if (p.x == self.a && q.x == self.a) || (p.x == self.b && q.x == self.b) {
            FacetTag::LateralDirichlet
        } else {
            FacetTag::Interior
        }
    }
}

/// Set of element indices selected for refinement.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MarkSet(Vec<usize>);

impl MarkSet {
    /// Builds a mark set from arbitrary indices; duplicates are removed and the
    /// indices are kept in ascending order.
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self(indices)
    }

    pub fn all(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.0.binary_search(&k).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

type EdgeKey = (usize, usize);

fn edge_key(a: usize, b: usize) -> EdgeKey {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    domain: SpaceTimeBox,
    points: Vec<Point>,
    elements: Vec<Element>,
    tags: Vec<[FacetTag; 3]>,
}

/// Result of a refinement step together with the parent of every new element.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub mesh: Mesh,
    /// `parent[k]` is the element of the input mesh that contains new element `k`.
    pub parent: Vec<usize>,
    /// `bisected[j]` tells whether input element `j` was split.
    pub bisected: Vec<bool>,
}

impl Mesh {
    /// Structured triangulation of `(0, t_end) x (a, b)` with `nt x nx` cells,
    /// each cut along the diagonal from `(t_i, x_j)` to `(t_{i+1}, x_{j+1})`.
    ///
    /// The diagonal is the longest edge of both halves and serves as their
    /// common refinement edge, which makes the initial assignment compatible.
    pub fn uniform(t_end: f64, omega: (f64, f64), nt: usize, nx: usize) -> Result<Mesh> {
        let domain = SpaceTimeBox::new(t_end, omega.0, omega.1)?;
        if nt == 0 || nx == 0 {
            return Err(Error::InvalidParameter(format!(
                "grid size must be positive, got {nt}x{nx}"
            )));
        }
        let (a, b) = omega;
        let coord_t = |i: usize| {
            if i == nt {
                t_end
            } else {
                t_end * i as f64 / nt as f64
            }
        };
        let coord_x = |j: usize| {
            if j == nx {
                b
            } else {
                a + (b - a) * j as f64 / nx as f64
            }
        };
        let vid = |i: usize, j: usize| i * (nx + 1) + j;

        let mut points = Vec::with_capacity((nt + 1) * (nx + 1));
        for i in 0..=nt {
            for j in 0..=nx {
                points.push(Point::new(coord_t(i), coord_x(j)));
            }
        }

        let mut elements = Vec::with_capacity(2 * nt * nx);
        for i in 0..nt {
            for j in 0..nx {
                let p00 = vid(i, j);
                let p10 = vid(i + 1, j);
                let p01 = vid(i, j + 1);
                let p11 = vid(i + 1, j + 1);
                for vertices in [[p11, p00, p10], [p00, p11, p01]] {
                    let root = elements.len();
                    elements.push(Element {
                        vertices,
                        generation: 0,
                        root,
                    });
                }
            }
        }

        let tags = elements
            .iter()
            .map(|el| {
                let mut t = [FacetTag::Interior; 3];
                for (k, tag) in t.iter_mut().enumerate() {
                    let p = points[el.vertices[k]];
                    let q = points[el.vertices[(k + 1) % 3]];
                    *tag = domain.classify_segment(p, q);
                }
                t
            })
            .collect();

        Ok(Mesh {
            domain,
            points,
            elements,
            tags,
        })
    }

    /// Assembles a mesh from raw parts after checking index ranges and
    /// orientation. Conformity is not required; see [`Mesh::is_conforming`].
    pub fn from_parts(
        domain: SpaceTimeBox,
        points: Vec<Point>,
        elements: Vec<Element>,
        tags: Vec<[FacetTag; 3]>,
    ) -> Result<Mesh> {
        if tags.len() != elements.len() {
            return Err(Error::InvalidParameter(format!(
                "{} tag triples for {} elements",
                tags.len(),
                elements.len()
            )));
        }
        if let Some(p) = points
            .iter()
            .find(|p| !(p.t.is_finite() && p.x.is_finite()))
        {
            return Err(Error::InvalidParameter(format!("non-finite point {p:?}")));
        }
        let mesh = Mesh {
            domain,
            points,
            elements,
            tags,
        };
        for (k, el) in mesh.elements.iter().enumerate() {
            let [v0, v1, v2] = el.vertices;
            for v in el.vertices {
                if v >= mesh.points.len() {
                    return Err(Error::IndexOutOfRange {
                        index: v,
                        len: mesh.points.len(),
                    });
                }
            }
            if v0 == v1 || v1 == v2 || v0 == v2 || mesh.signed_area(k) <= 0.0 {
                return Err(Error::DegenerateElement(k));
            }
        }
        Ok(mesh)
    }

    pub fn domain(&self) -> SpaceTimeBox {
        self.domain
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element(&self, k: usize) -> &Element {
        &self.elements[k]
    }

    pub fn facet_tags(&self, k: usize) -> [FacetTag; 3] {
        self.tags[k]
    }

    pub fn vertex_coords(&self, k: usize) -> [Point; 3] {
        self.elements[k].vertices.map(|v| self.points[v])
    }

    /// Endpoints (as vertex indices) of local edge `e` of element `k`.
    pub fn edge_vertices(&self, k: usize, e: usize) -> [usize; 2] {
        let v = self.elements[k].vertices;
        [v[e], v[(e + 1) % 3]]
    }

    fn signed_area(&self, k: usize) -> f64 {
        let [p0, p1, p2] = self.vertex_coords(k);
        0.5 * ((p1.t - p0.t) * (p2.x - p0.x) - (p2.t - p0.t) * (p1.x - p0.x))
    }

    /// Area of element `k`.
    pub fn element_measure(&self, k: usize) -> f64 {
        self.signed_area(k).abs()
    }

    /// Longest edge length of element `k`.
    pub fn element_diameter(&self, k: usize) -> f64 {
        let p = self.vertex_coords(k);
        (0..3)
            .map(|e| {
                let (a, b) = (p[e], p[(e + 1) % 3]);
                (b.t - a.t).hypot(b.x - a.x)
            })
            .fold(0.0, f64::max)
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.num_elements())
            .map(|k| self.element_diameter(k))
            .fold(0.0, f64::max)
    }

    /// All elements sharing at least one vertex with `k`, including `k`, ascending.
    pub fn element_patch(&self, k: usize) -> Vec<usize> {
        let verts = self.elements[k].vertices;
        let mut patch: Vec<usize> = self
            .elements
            .iter()
            .enumerate()
            .filter(|(_, el)| el.vertices.iter().any(|v| verts.contains(v)))
            .map(|(j, _)| j)
            .collect();
        patch.sort_unstable();
        patch
    }

    /// Edges of `k` tagged [`FacetTag::Initial`], as local edge indices.
    pub fn initial_edges(&self, k: usize) -> Vec<usize> {
        (0..3)
            .filter(|&e| self.tags[k][e] == FacetTag::Initial)
            .collect()
    }

    /// Edges of `k` tagged [`FacetTag::Initial`], as vertex index pairs.
    pub fn initial_facets(&self, k: usize) -> Vec<[usize; 2]> {
        self.initial_edges(k)
            .into_iter()
            .map(|e| self.edge_vertices(k, e))
            .collect()
    }

    /// Maps every undirected edge to the `(element, local edge)` pairs using it.
    pub fn edge_incidence(&self) -> HashMap<(usize, usize), Vec<(usize, usize)>> {
        let mut map: HashMap<EdgeKey, Vec<(usize, usize)>> = HashMap::new();
        for k in 0..self.elements.len() {
            for e in 0..3 {
                let [a, b] = self.edge_vertices(k, e);
                map.entry(edge_key(a, b)).or_default().push((k, e));
            }
        }
        map
    }

    /// Every interior edge is shared by exactly two elements with `Interior`
    /// tags, every other edge belongs to one element, carries a boundary tag
    /// and lies geometrically on the boundary of the box.
    pub fn is_conforming(&self) -> bool {
        if (0..self.num_elements()).any(|k| self.signed_area(k) <= 0.0) {
            return false;
        }
        self.edge_incidence()
            .into_iter()
            .all(|((a, b), users)| match users.as_slice() {
                [(k0, e0), (k1, e1)] => {
                    self.tags[*k0][*e0] == FacetTag::Interior
                        && self.tags[*k1][*e1] == FacetTag::Interior
                }
                [(k, e)] => {
                    let tag = self.tags[*k][*e];
                    tag.is_boundary()
                        && self.domain.classify_segment(self.points[a], self.points[b]) == tag
                }
                _ => false,
            })
    }

    /// Checks that every refinement edge is either on the boundary or is also
    /// the refinement edge of the neighbour across it. This is a requirement on
    /// initial meshes; locally refined meshes generally do not satisfy it.
    pub fn is_nvb_compatible(&self) -> bool {
        let incidence = self.edge_incidence();
        (0..self.num_elements()).all(|k| {
            let [a, b] = self.edge_vertices(k, 0);
            match incidence[&edge_key(a, b)].as_slice() {
                [_] => true,
                [(k0, e0), (k1, e1)] => {
                    let (_, other_edge) = if *k0 == k { (*k0, *e1) } else { (*k1, *e0) };
                    other_edge == 0
                }
                _ => false,
            }
        })
    }

    /// Bisects every marked element at least once and closes the result to a
    /// conforming mesh.
    pub fn bisect(&self, marks: &MarkSet) -> Result<Mesh> {
        Ok(self.refine(marks)?.mesh)
    }

    /// Like [`Mesh::bisect`] but also returns the parent map.
    pub fn refine(&self, marks: &MarkSet) -> Result<Refinement> {
        if let Some(bad) = marks.iter().find(|&k| k >= self.num_elements()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: self.num_elements(),
            });
        }

        let mut marked_edges: HashSet<EdgeKey> = marks
            .iter()
            .map(|k| {
                let [a, b] = self.edge_vertices(k, 0);
                edge_key(a, b)
            })
            .collect();

        // Closure: any element with a marked edge must have its refinement edge marked.
        loop {
            let mut changed = false;
            for k in 0..self.num_elements() {
                let v = self.elements[k].vertices;
                let reference = edge_key(v[0], v[1]);
                if marked_edges.contains(&reference) {
                    continue;
                }
                if marked_edges.contains(&edge_key(v[1], v[2]))
                    || marked_edges.contains(&edge_key(v[2], v[0]))
                {
                    marked_edges.insert(reference);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        let mut points = self.points.clone();
        let mut midpoints: HashMap<EdgeKey, usize> = HashMap::new();
        let mut elements = Vec::with_capacity(self.num_elements() + 2 * marked_edges.len());
        let mut tags = Vec::with_capacity(elements.capacity());
        let mut parent = Vec::with_capacity(elements.capacity());
        let mut bisected = vec![false; self.num_elements()];

        let mut stack: Vec<(Element, [FacetTag; 3])> = Vec::new();
        for (k, el) in self.elements.iter().enumerate() {
            stack.push((*el, self.tags[k]));
            while let Some((el, tg)) = stack.pop() {
                let [v0, v1, v2] = el.vertices;
                let key = edge_key(v0, v1);
                if !marked_edges.contains(&key) {
                    elements.push(el);
                    tags.push(tg);
                    parent.push(k);
                    continue;
                }
                bisected[k] = true;
                let m = *midpoints.entry(key).or_insert_with(|| {
                    points.push(self.points[v0].midpoint(self.points[v1]));
                    points.len() - 1
                });
                let generation = el.generation + 1;
                let left = Element {
                    vertices: [v2, v0, m],
                    generation,
                    root: el.root,
                };
                let right = Element {
                    vertices: [v1, v2, m],
                    generation,
                    root: el.root,
                };
                let left_tags = [tg[2], tg[0], FacetTag::Interior];
                let right_tags = [tg[1], FacetTag::Interior, tg[0]];
                // LIFO: push right first so that left is emitted first.
                stack.push((right, right_tags));
                stack.push((left, left_tags));
            }
        }

        Ok(Refinement {
            mesh: Mesh {
                domain: self.domain,
                points,
                elements,
                tags,
            },
            parent,
            bisected,
        })
    }

    /// One NVB sweep over all elements.
    pub fn bisect_all(&self) -> Result<Mesh> {
        self.bisect(&MarkSet::all(self.num_elements()))
    }

    /// Two NVB sweeps; halves the mesh size of a uniform mesh.
    pub fn refine_uniform(&self) -> Result<Mesh> {
        self.bisect_all()?.bisect_all()
    }

    /// Serializes to the ASCII mesh dump format.
    pub fn to_dump(&self) -> String {
        let mut out = String::new();
        out.push_str("spacetime-mesh v1\n");
        let _ = writeln!(out, "{} {}", self.points.len(), self.elements.len());
        for p in &self.points {
            let _ = writeln!(out, "{:?} {:?}", p.t, p.x);
        }
        for el in &self.elements {
            let [a, b, c] = el.vertices;
            let _ = writeln!(out, "{a} {b} {c} {} {}", el.generation, el.root);
        }
        for (k, tg) in self.tags.iter().enumerate() {
            for (e, tag) in tg.iter().enumerate() {
                if tag.is_boundary() {
                    let _ = writeln!(out, "{k} {e} {}", tag.as_str());
                }
            }
        }
        out
    }

    /// Parses the ASCII mesh dump format. The domain is recovered as the
    /// bounding box of the points. Element lines without a fifth field get
    /// their own index as `root`.
    pub fn from_dump(text: &str) -> Result<Mesh> {
        let perr = |msg: &str| Error::Parse(msg.to_string());
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("spacetime-mesh v1") {
            return Err(perr("missing `spacetime-mesh v1` header"));
        }
        let counts: Vec<usize> = lines
            .next()
            .ok_or_else(|| perr("missing counts line"))?
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| perr("bad count")))
            .collect::<Result<_>>()?;
        let [np, ne] = counts[..] else {
            return Err(perr("counts line must hold two integers"));
        };
        let mut points = Vec::with_capacity(np);
        for _ in 0..np {
            let f: Vec<f64> = lines
                .next()
                .ok_or_else(|| perr("truncated point list"))?
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| perr("bad coordinate")))
                .collect::<Result<_>>()?;
            let [t, x] = f[..] else {
                return Err(perr("point line must hold two reals"));
            };
            points.push(Point::new(t, x));
        }
        let mut elements = Vec::with_capacity(ne);
        for k in 0..ne {
            let f: Vec<usize> = lines
                .next()
                .ok_or_else(|| perr("truncated element list"))?
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| perr("bad element entry")))
                .collect::<Result<_>>()?;
            let (a, b, c, g, root) = match f[..] {
                [a, b, c, g] => (a, b, c, g, k),
                [a, b, c, g, r] => (a, b, c, g, r),
                _ => return Err(perr("element line must hold four or five integers")),
            };
            elements.push(Element {
                vertices: [a, b, c],
                generation: g as u32,
                root,
            });
        }
        let mut tags = vec![[FacetTag::Interior; 3]; ne];
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [k, e, tag] = parts[..] else {
                return Err(perr("tag line must hold three fields"));
            };
            let k: usize = k.parse().map_err(|_| perr("bad tag element"))?;
            let e: usize = e.parse().map_err(|_| perr("bad tag edge"))?;
            if k >= ne || e >= 3 {
                return Err(perr("tag index out of range"));
            }
            tags[k][e] = tag.parse()?;
        }
        let t_end = points.iter().map(|p| p.t).fold(f64::NEG_INFINITY, f64::max);
        let a = points.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let b = points.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        Mesh::from_parts(SpaceTimeBox::new(t_end, a, b)?, points, elements, tags)
    }

    /// Number of distinct similarity classes (sorted angle triples, rounded)
    /// among the descendants of every initial element.
    pub fn similarity_classes_per_root(&self) -> HashMap<usize, usize> {
        let mut classes: HashMap<usize, HashSet<[i64; 3]>> = HashMap::new();
        for k in 0..self.num_elements() {
            classes
                .entry(self.elements[k].root)
                .or_default()
                .insert(self.angle_signature(k));
        }
        classes.into_iter().map(|(r, s)| (r, s.len())).collect()
    }

    fn angle_signature(&self, k: usize) -> [i64; 3] {
        let p = self.vertex_coords(k);
        let mut angles = [0.0f64; 3];
        for (i, angle) in angles.iter_mut().enumerate() {
            let a = p[i];
            let b = p[(i + 1) % 3];
            let c = p[(i + 2) % 3];
            let (u, v) = ((b.t - a.t, b.x - a.x), (c.t - a.t, c.x - a.x));
            let cos = (u.0 * v.0 + u.1 * v.1) / (u.0.hypot(u.1) * v.0.hypot(v.1));
            *angle = cos.clamp(-1.0, 1.0).acos();
        }
        angles.sort_by(f64::total_cmp);
        angles.map(|a| (a * 1e8).round() as i64)
    }
}
