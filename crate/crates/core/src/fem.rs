//! P1 finite elements on metric graphs.
//!
//! Each bounded edge and each truncated half-line becomes a chain of elements.
//! Vertex nodes are single unknowns shared by every incident edge-end, so the
//! Kirchhoff conditions arise as natural boundary conditions of the weak form.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{MetricGraph, VertexId};
use crate::linalg::{dot, ChainLayout, ChainMatrix, ChainSolver, Layout};
use crate::quadrature::gauss3;
use crate::scalar::{cst, to_f64, Real};

/// What a chain discretizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChainKind {
    Edge(usize),
    HalfLine(usize),
}

impl ChainKind {
    pub fn label(&self) -> String {
        match self {
            ChainKind::Edge(i) => format!("e{i}"),
            ChainKind::HalfLine(i) => format!("h{i}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Chain<T> {
    pub kind: ChainKind,
    pub start_vertex: VertexId,
    /// `None` for a half-line, whose far end is a truncation with a Dirichlet value.
    pub end_vertex: Option<VertexId>,
    pub length: T,
    /// Node coordinates from the start vertex, `0 = x_0 < … < x_n = length`.
    pub nodes: Vec<T>,
    pub layout: ChainLayout,
}

impl<T: Real> Chain<T> {
    pub fn n_elems(&self) -> usize {
        self.layout.n_elems
    }

    /// Coordinate of local node `k`, measured from the start vertex.
    #[inline]
    pub fn x(&self, k: usize) -> T {
        self.nodes[k]
    }

    /// Length of element `k`.
    #[inline]
    pub fn h(&self, k: usize) -> T {
        self.nodes[k + 1] - self.nodes[k]
    }

    pub fn h_max(&self) -> T {
        (0..self.n_elems()).fold(T::zero(), |m, k| m.max(self.h(k)))
    }

    pub fn h_min(&self) -> T {
        (0..self.n_elems()).fold(T::infinity(), |m, k| m.min(self.h(k)))
    }

    /// Element containing coordinate `x`.
    pub fn element_at(&self, x: T) -> usize {
        let k = self.nodes.partition_point(|&v| v <= x);
        k.saturating_sub(1).min(self.n_elems() - 1)
    }
}

#[derive(Clone, Debug)]
pub struct Mesh<T> {
    graph: MetricGraph<T>,
    h_max: T,
    halfline_len: T,
    vertex_dof: Vec<Option<usize>>,
    chains: Vec<Chain<T>>,
    layout: Arc<Layout>,
}

/// Geometric refinement toward chosen points of the graph.
///
/// The local element size is `min(h_max, h_min + growth · d)` where `d` is the
/// graph distance to the nearest focus, so consecutive elements grow by a
/// factor of about `1 + growth` away from each focus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement<T> {
    pub foci: Vec<Focus<T>>,
    pub h_min: T,
    pub growth: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Focus<T> {
    Vertex(VertexId),
    /// Point at coordinate `x` along a bounded edge or half-line.
    Point(ChainKind, T),
}

const MAX_ELEMENTS: usize = 50_000_000;

/// Node coordinates on `[0, len]` following the size field `size`, each
/// element no longer than the field at its ends.
fn march(len: f64, h_floor: f64, size: impl Fn(f64) -> f64) -> Result<Vec<f64>, Error> {
    let mut xs = vec![0.0];
    let mut x = 0.0;
    while x < len {
        let mut st = size(x);
        for _ in 0..4 {
            st = st.min(size((x + st).min(len))).max(h_floor);
        }
        x = (x + st).min(len);
        xs.push(x);
        if xs.len() > MAX_ELEMENTS {
            return Err(Error::InvalidParameter(format!(
                "mesh would exceed {MAX_ELEMENTS} elements"
            )));
        }
    }
    let n = xs.len() - 1;
    // fold a sliver at the end into its neighbour
    if n >= 3 && xs[n] - xs[n - 1] < 0.5 * (xs[n - 1] - xs[n - 2]) {
        xs.remove(n - 1);
    }
    if xs.len() < 3 {
        xs = vec![0.0, 0.5 * len, len];
    }
    Ok(xs)
}

/// Builds per-edge uniform meshes with spacing at most `h_max`; half-lines are
/// truncated at length `halfline_len` with a homogeneous Dirichlet end.
pub fn build_mesh<T: Real>(g: &MetricGraph<T>, h_max: T, halfline_len: T) -> Result<Mesh<T>> {
    build_mesh_with(g, h_max, halfline_len, None)
}

/// Like [`build_mesh`], optionally graded toward the foci of `refine`.
pub fn build_mesh_with<T: Real>(
    g: &MetricGraph<T>,
    h_max: T,
    halfline_len: T,
    refine: Option<&Refinement<T>>,
) -> Result<Mesh<T>> {
    if !(h_max > T::zero() && h_max.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "h_max must be positive, got {}",
            to_f64(h_max)
        )));
    }
    let has_halflines = !g.halflines().is_empty();
    if has_halflines && !(halfline_len > T::zero() && halfline_len.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "half-line truncation length must be positive, got {}",
            to_f64(halfline_len)
        )));
    }
    let mut shortest = g.min_edge_length();
    if has_halflines && halfline_len < shortest {
        shortest = halfline_len;
    }
    if h_max >= shortest / cst(2.0) {
        return Err(Error::MeshTooCoarse {
            h_max: to_f64(h_max),
            shortest: to_f64(shortest),
        });
    }
    if let Some(r) = refine {
        if !(r.h_min > T::zero() && r.h_min <= h_max && r.growth > T::zero()) {
            return Err(Error::InvalidParameter(
                "refinement needs 0 < h_min <= h_max and growth > 0".into(),
            ));
        }
    }
    let nv = g.n_vertices();
    let mut vertex_dof = vec![None; nv];
    let mut next = 0;
    for (v, slot) in vertex_dof.iter_mut().enumerate() {
        if !g.is_dirichlet(v) {
            *slot = Some(next);
            next += 1;
        }
    }
    let n_vertex_dofs = next;

    let mut specs: Vec<(ChainKind, VertexId, Option<VertexId>, T)> = Vec::new();
    for (i, e) in g.edges().iter().enumerate() {
        specs.push((ChainKind::Edge(i), e.u, Some(e.v), e.len));
    }
    for (i, &v) in g.halflines().iter().enumerate() {
        specs.push((ChainKind::HalfLine(i), v, None, halfline_len));
    }
    // per focus: vertex distances plus the chain it sits on
    type FocusData = (Vec<f64>, Option<(ChainKind, f64)>);
    let focus_data: Vec<FocusData> = match refine {
        None => vec![],
        Some(r) => r
            .foci
            .iter()
            .map(|f| match *f {
                Focus::Vertex(v) => {
                    let d = crate::graph::vertex_distances(g, v);
                    Ok((d.iter().map(|&x| to_f64(x)).collect(), None))
                }
                Focus::Point(kind, x) => {
                    let (u, w, len) = match kind {
                        ChainKind::Edge(i) if i < g.edges().len() => {
                            let e = &g.edges()[i];
                            (e.u, Some(e.v), e.len)
                        }
                        ChainKind::HalfLine(i) if i < g.halflines().len() => {
                            (g.halflines()[i], None, halfline_len)
                        }
                        _ => {
                            return Err(Error::InvalidParameter(format!(
                                "refinement focus on missing chain {}",
                                kind.label()
                            )))
                        }
                    };
                    let mut src = vec![(u, x)];
                    if let Some(w) = w {
                        src.push((w, len - x));
                    }
                    let d = crate::graph::distances_from(g, &src);
                    Ok((d.iter().map(|&x| to_f64(x)).collect(), Some((kind, to_f64(x)))))
                }
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let hm = to_f64(h_max);
    let mut chains = Vec::new();
    for (kind, su, ev, len) in specs {
        let lenf = to_f64(len);
        let nodes: Vec<f64> = match refine {
            None => {
                let n = ((lenf / hm) * (1.0 - 1e-12)).ceil().max(2.0) as usize;
                (0..=n).map(|k| if k == n { lenf } else { lenf * k as f64 / n as f64 }).collect()
            }
            Some(r) => {
                let (h0, gr) = (to_f64(r.h_min), to_f64(r.growth));
                let dist = |x: f64| {
                    focus_data.iter().fold(f64::INFINITY, |m, (dv, on)| {
                        let mut d = dv[su] + x;
                        if let Some(e) = ev {
                            d = d.min(dv[e] + lenf - x);
                        }
                        if let Some((k, x0)) = on {
                            if *k == kind {
                                d = d.min((x - x0).abs());
                            }
                        }
                        m.min(d)
                    })
                };
                march(lenf, h0, |x| (h0 + gr * dist(x)).min(hm))?
            }
        };
        let n = nodes.len() - 1;
        let layout = ChainLayout {
            start: vertex_dof[su],
            end: ev.and_then(|v| vertex_dof[v]),
            offset: next,
            n_elems: n,
        };
        next += n - 1;
        let mut nodes: Vec<T> = nodes.into_iter().map(cst).collect();
        nodes[n] = len;
        chains.push(Chain {
            kind,
            start_vertex: su,
            end_vertex: ev,
            length: len,
            nodes,
            layout,
        });
    }
    let layout = Arc::new(Layout {
        n_dofs: next,
        n_vertex_dofs,
        chains: chains.iter().map(|c| c.layout.clone()).collect(),
    });
    Ok(Mesh {
        graph: g.clone(),
        h_max,
        halfline_len,
        vertex_dof,
        chains,
        layout,
    })
}

impl<T: Real> Mesh<T> {
    pub fn graph(&self) -> &MetricGraph<T> {
        &self.graph
    }

    pub fn h_max(&self) -> T {
        self.h_max
    }

    pub fn halfline_len(&self) -> T {
        self.halfline_len
    }

    pub fn chains(&self) -> &[Chain<T>] {
        &self.chains
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn n_dofs(&self) -> usize {
        self.layout.n_dofs
    }

    pub fn n_elements(&self) -> usize {
        self.chains.iter().map(|c| c.n_elems()).sum()
    }

    pub fn vertex_dof(&self, v: VertexId) -> Option<usize> {
        self.vertex_dof[v]
    }

    pub fn chain_index(&self, kind: ChainKind) -> Option<usize> {
        self.chains.iter().position(|c| c.kind == kind)
    }

    /// One `(chain, coordinate)` location per unknown; vertex unknowns are
    /// reported on the first incident chain.
    pub fn dof_locations(&self) -> Vec<(usize, T)> {
        let mut loc = vec![(usize::MAX, T::zero()); self.n_dofs()];
        for (c, ch) in self.chains.iter().enumerate() {
            for k in 0..=ch.n_elems() {
                if let Some(d) = ch.layout.node(k) {
                    if loc[d].0 == usize::MAX {
                        loc[d] = (c, ch.x(k));
                    }
                }
            }
        }
        loc
    }
}

/// P1 stiffness (`∫u'v'`) and consistent mass (`∫uv`) matrices.
#[derive(Clone, Debug)]
pub struct Operators<T> {
    pub stiffness: ChainMatrix<T>,
    pub mass: ChainMatrix<T>,
}

pub fn assemble<T: Real>(mesh: &Mesh<T>) -> Operators<T> {
    let mut k = ChainMatrix::zeros(mesh.layout.clone());
    let mut m = ChainMatrix::zeros(mesh.layout.clone());
    let sixth = cst::<T>(1.0 / 6.0);
    let two = cst::<T>(2.0);
    for (c, ch) in mesh.chains.iter().enumerate() {
        for e in 0..ch.n_elems() {
            let inv = T::one() / ch.h(e);
            let mh = ch.h(e) * sixth;
            k.add_element(c, e, inv, -inv, inv);
            m.add_element(c, e, two * mh, mh, two * mh);
        }
    }
    Operators {
        stiffness: k,
        mass: m,
    }
}

/// Mesh, operators and the factorized mass matrix.
pub struct FemSpace<T> {
    mesh: Mesh<T>,
    ops: Operators<T>,
    mass_solver: ChainSolver<T>,
    kind_index: HashMap<ChainKind, usize>,
}

impl<T> std::fmt::Debug for FemSpace<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FemSpace")
            .field("n_dofs", &self.mesh.layout.n_dofs)
            .finish()
    }
}

impl<T: Real> FemSpace<T> {
    pub fn new(mesh: Mesh<T>) -> Result<Arc<Self>> {
        let ops = assemble(&mesh);
        let mass_solver = ChainSolver::factor(&ops.mass)?;
        let kind_index = mesh
            .chains
            .iter()
            .enumerate()
            .map(|(i, c)| (c.kind, i))
            .collect();
        Ok(Arc::new(FemSpace {
            mesh,
            ops,
            mass_solver,
            kind_index,
        }))
    }

    /// `build_mesh` followed by assembly.
    pub fn build(g: &MetricGraph<T>, h_max: T, halfline_len: T) -> Result<Arc<Self>> {
        Self::new(build_mesh(g, h_max, halfline_len)?)
    }

    /// `build_mesh_with` followed by assembly.
    pub fn build_refined(
        g: &MetricGraph<T>,
        h_max: T,
        halfline_len: T,
        refine: &Refinement<T>,
    ) -> Result<Arc<Self>> {
        Self::new(build_mesh_with(g, h_max, halfline_len, Some(refine))?)
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn ops(&self) -> &Operators<T> {
        &self.ops
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_dofs()
    }

    pub fn mass_solve(&self, r: &[T]) -> Vec<T> {
        self.mass_solver.solve(r)
    }

    pub fn chain_of(&self, kind: ChainKind) -> Option<usize> {
        self.kind_index.get(&kind).copied()
    }

    /// Walks the elements with three Gauss points each, passing
    /// `(chain, element, h, u_left, u_right, xi, w)`.
    fn for_each_qp(&self, u: &[T], mut f: impl FnMut(usize, usize, T, T, T, &[T; 3], &[T; 3])) {
        let (xi, w) = gauss3::<T>();
        for (c, ch) in self.mesh.chains.iter().enumerate() {
            let lay = &ch.layout;
            for e in 0..lay.n_elems {
                let a = lay.node(e).map_or(T::zero(), |d| u[d]);
                let b = lay.node(e + 1).map_or(T::zero(), |d| u[d]);
                f(c, e, ch.h(e), a, b, &xi, &w);
            }
        }
    }

    /// `∫|u|^p` by three-point Gauss quadrature on every element.
    pub fn lpp(&self, u: &[T], p: T) -> T {
        let mut acc = T::zero();
        self.for_each_qp(u, |_, _, h, a, b, xi, w| {
            let mut s = T::zero();
            for q in 0..3 {
                let uq = a + (b - a) * xi[q];
                s = s + w[q] * uq.abs().powf(p);
            }
            acc = acc + h * s;
        });
        acc
    }

    /// Load vector `∫|u|^{p-2}u φ_i` consistent with [`FemSpace::lpp`].
    pub fn load(&self, u: &[T], p: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_dofs()];
        let pm2 = p - cst(2.0);
        let layout = self.mesh.layout.clone();
        self.for_each_qp(u, |c, e, h, a, b, xi, w| {
            let (mut l, mut r) = (T::zero(), T::zero());
            for q in 0..3 {
                let uq = a + (b - a) * xi[q];
                let g = uq.abs().powf(pm2) * uq * w[q];
                l = l + g * (T::one() - xi[q]);
                r = r + g * xi[q];
            }
            let lay = &layout.chains[c];
            if let Some(d) = lay.node(e) {
                out[d] = out[d] + h * l;
            }
            if let Some(d) = lay.node(e + 1) {
                out[d] = out[d] + h * r;
            }
        });
        out
    }

    /// Jacobian of [`FemSpace::load`]: the `(p-1)|u|^{p-2}`-weighted mass matrix.
    pub fn load_jacobian(&self, u: &[T], p: T) -> ChainMatrix<T> {
        let mut jm = ChainMatrix::zeros(self.mesh.layout.clone());
        let pm1 = p - T::one();
        let pm2 = p - cst(2.0);
        self.for_each_qp(u, |c, e, h, a, b, xi, w| {
            let (mut aa, mut ab, mut bb) = (T::zero(), T::zero(), T::zero());
            for q in 0..3 {
                let uq = a + (b - a) * xi[q];
                let g = pm1 * uq.abs().powf(pm2) * w[q];
                let (l, r) = (T::one() - xi[q], xi[q]);
                aa = aa + g * l * l;
                ab = ab + g * l * r;
                bb = bb + g * r * r;
            }
            jm.add_element(c, e, h * aa, h * ab, h * bb);
        });
        jm
    }

    /// Smallest generalized eigenvalue of (stiffness, mass) by shifted inverse iteration.
    pub fn lambda_bottom(&self, max_iter: usize, tol: T) -> Result<T> {
        let shift = cst::<T>(1e-3);
        let a = self.ops.stiffness.lin_comb(T::one(), &self.ops.mass, shift);
        let solver = ChainSolver::factor(&a)?;
        let n = self.n_dofs();
        let mut x = vec![T::one(); n];
        let mut prev = T::infinity();
        for _ in 0..max_iter {
            let mx = self.ops.mass.matvec(&x);
            let y = solver.solve(&mx);
            let my = self.ops.mass.matvec(&y);
            let norm = dot(&y, &my).sqrt();
            x = y.iter().map(|&v| v / norm).collect();
            let rq = self.ops.stiffness.quad_form(&x);
            if (rq - prev).abs() <= tol * (T::one() + rq.abs()) {
                return Ok(rq.max(T::zero()));
            }
            prev = rq;
        }
        Err(Error::NumericalFailure(format!(
            "inverse iteration for the spectral bottom did not converge in {max_iter} steps"
        )))
    }
}

pub fn lambda_bottom<T: Real>(space: &FemSpace<T>) -> Result<T> {
    space.lambda_bottom(20_000, cst(1e-14))
}

/// Graph distance from vertex `v` to every node, as a grid function.
pub fn distance_from_vertex<T: Real>(space: &Arc<FemSpace<T>>, v: VertexId) -> GridFunction<T> {
    let dist = crate::graph::vertex_distances(space.mesh().graph(), v);
    let chains = space.mesh().chains().to_vec();
    GridFunction::from_fn(space.clone(), move |kind, x| {
        let ch = chains.iter().find(|c| c.kind == kind).unwrap();
        let from_start = dist[ch.start_vertex] + x;
        match ch.end_vertex {
            Some(e) => from_start.min(dist[e] + ch.length - x),
            None => from_start,
        }
    })
}

/// The four norms used throughout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Norms<T> {
    pub l2sq: T,
    pub lpp: T,
    pub gradsq: T,
    pub sup: T,
}

/// Nodal values of a P1 function on a mesh.
#[derive(Clone, Debug)]
pub struct GridFunction<T> {
    space: Arc<FemSpace<T>>,
    values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn new(space: Arc<FemSpace<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != space.n_dofs() {
            return Err(Error::InvalidParameter(format!(
                "expected {} nodal values, got {}",
                space.n_dofs(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!("non-finite nodal value at {i}")));
        }
        Ok(GridFunction { space, values })
    }

    pub fn zeros(space: Arc<FemSpace<T>>) -> Self {
        let n = space.n_dofs();
        GridFunction {
            space,
            values: vec![T::zero(); n],
        }
    }

    pub fn constant(space: Arc<FemSpace<T>>, c: T) -> Self {
        let n = space.n_dofs();
        GridFunction {
            space,
            values: vec![c; n],
        }
    }

    /// Samples `f(chain kind, coordinate)` at every node. Vertex nodes are
    /// sampled from their first incident chain.
    pub fn from_fn(space: Arc<FemSpace<T>>, f: impl Fn(ChainKind, T) -> T) -> Self {
        let mut values = vec![T::zero(); space.n_dofs()];
        let mut set = vec![false; space.n_dofs()];
        for ch in space.mesh.chains() {
            for k in 0..=ch.n_elems() {
                if let Some(d) = ch.layout.node(k) {
                    if !set[d] {
                        values[d] = f(ch.kind, ch.x(k));
                        set[d] = true;
                    }
                }
            }
        }
        GridFunction { space, values }
    }

    pub fn space(&self) -> &Arc<FemSpace<T>> {
        &self.space
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn with_values(&self, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        GridFunction {
            space: self.space.clone(),
            values,
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    pub fn l2sq(&self) -> T {
        self.space.ops.mass.quad_form(&self.values)
    }

    pub fn gradsq(&self) -> T {
        self.space.ops.stiffness.quad_form(&self.values)
    }

    pub fn lpp(&self, p: T) -> T {
        self.space.lpp(&self.values, p)
    }

    pub fn sup(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, &v| m.min(v))
    }

    pub fn norms(&self, p: T) -> Norms<T> {
        Norms {
            l2sq: self.l2sq(),
            lpp: self.lpp(p),
            gradsq: self.gradsq(),
            sup: self.sup(),
        }
    }

    /// `⟨u, v⟩` in the mass inner product.
    pub fn mass_inner(&self, other: &Self) -> T {
        dot(&self.values, &self.space.ops.mass.matvec(&other.values))
    }

    /// `E_ρ(u) = ½‖u'‖² − (ρ/p)‖u‖_p^p`.
    pub fn energy(&self, rho: T, p: T) -> T {
        cst::<T>(0.5) * self.gradsq() - rho / p * self.lpp(p)
    }

    /// Weak residual `K u − ρ b(u)` of the energy derivative.
    pub fn energy_residual(&self, rho: T, p: T) -> Vec<T> {
        let ku = self.space.ops.stiffness.matvec(&self.values);
        let b = self.space.load(&self.values, p);
        ku.iter().zip(&b).map(|(&k, &l)| k - rho * l).collect()
    }

    /// Riesz representative of `dE_ρ` in the mass inner product.
    pub fn energy_gradient(&self, rho: T, p: T) -> Self {
        let r = self.energy_residual(rho, p);
        self.with_values(self.space.mass_solve(&r))
    }

    /// Mass norm of the representative of `K u + λ M u − ρ b(u)`.
    pub fn pde_residual(&self, lambda: T, rho: T, p: T) -> T {
        let mut r = self.energy_residual(rho, p);
        let mu = self.space.ops.mass.matvec(&self.values);
        for (ri, &m) in r.iter_mut().zip(&mu) {
            *ri = *ri + lambda * m;
        }
        let z = self.space.mass_solve(&r);
        dot(&r, &z).max(T::zero()).sqrt()
    }

    /// Rescales onto the sphere of mass `mu`.
    pub fn project_mass(&self, mu: T) -> Result<Self> {
        if !(mu > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "mass must be positive, got {}",
                to_f64(mu)
            )));
        }
        let m = self.l2sq();
        if !(m > T::zero()) || !m.is_finite() {
            return Err(Error::CannotProject);
        }
        Ok(self.scaled((mu / m).sqrt()))
    }

    /// Value at coordinate `x` of chain `kind` by linear interpolation; zero
    /// beyond a truncated half-line.
    pub fn eval(&self, kind: ChainKind, x: T) -> T {
        let Some(c) = self.space.chain_of(kind) else {
            return T::zero();
        };
        let ch = &self.space.mesh.chains[c];
        if x >= ch.length {
            return ch.layout.end.map_or(T::zero(), |d| self.values[d]);
        }
        let x = x.max(T::zero());
        let k = ch.element_at(x);
        let t = (x - ch.x(k)) / ch.h(k);
        let a = ch.layout.node(k).map_or(T::zero(), |d| self.values[d]);
        let b = ch.layout.node(k + 1).map_or(T::zero(), |d| self.values[d]);
        a + (b - a) * t
    }

    /// Interpolates onto another space over the same graph.
    pub fn transfer(&self, target: Arc<FemSpace<T>>) -> Self {
        GridFunction::from_fn(target, |kind, x| self.eval(kind, x))
    }

    /// `(chain label, coordinate, value)` for every node, Dirichlet ends included.
    pub fn rows(&self) -> Vec<(String, T, T)> {
        let mut out = Vec::new();
        for ch in self.space.mesh.chains() {
            let label = ch.kind.label();
            for k in 0..=ch.n_elems() {
                let v = ch.layout.node(k).map_or(T::zero(), |d| self.values[d]);
                out.push((label.clone(), ch.x(k), v));
            }
        }
        out
    }

    /// CSV with columns `edge_id,local_coordinate,value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("edge_id,local_coordinate,value\n");
        for (label, x, v) in self.rows() {
            s.push_str(&format!("{label},{:.16e},{:.16e}\n", to_f64(x), to_f64(v)));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_standard, GraphKind};
    use proptest::prelude::*;

    fn space(kind: GraphKind<f64>, h: f64, l: f64) -> Arc<FemSpace<f64>> {
        FemSpace::build(&build_standard(&kind).unwrap(), h, l).unwrap()
    }

    #[test]
    fn mesh_shapes() {
        let line = build_mesh(&build_standard(&GraphKind::Line).unwrap(), 0.01, 30.0).unwrap();
        assert_eq!(line.n_elements(), 6000);
        assert_eq!(line.layout().n_vertex_dofs, 1);

        let tad = build_mesh(
            &build_standard(&GraphKind::Tadpole { loop_len: 2.0 }).unwrap(),
            0.01,
            30.0,
        )
        .unwrap();
        let lp = &tad.chains()[0];
        assert_eq!(lp.n_elems(), 200);
        assert_eq!(lp.layout.start, lp.layout.end);
        assert!(lp.layout.start.is_some());

        let star = build_mesh(&build_standard(&GraphKind::Star(3)).unwrap(), 0.1, 5.0).unwrap();
        assert_eq!(star.chains().len(), 3);
        assert_eq!(star.layout().n_vertex_dofs, 1);
        assert!(star.chains().iter().all(|c| c.layout.start == Some(0) && c.layout.end.is_none()));
    }

    #[test]
    fn mesh_errors() {
        let tad = build_standard(&GraphKind::Tadpole { loop_len: 2.0 }).unwrap();
        assert!(matches!(build_mesh(&tad, 1.0, 30.0), Err(Error::MeshTooCoarse { .. })));
        assert!(build_mesh(&tad, -0.1, 30.0).is_err());
        assert!(build_mesh(&tad, 0.1, 0.0).is_err());
    }

    #[test]
    fn constants_in_kernel_and_total_length() {
        let sp = space(GraphKind::Loop(3.0), 0.05, 1.0);
        let one = GridFunction::constant(sp.clone(), 1.0);
        let k1 = sp.ops().stiffness.matvec(one.values());
        assert!(k1.iter().all(|v| v.abs() < 1e-12));

        let tad = space(GraphKind::Tadpole { loop_len: 2.0 }, 0.01, 30.0);
        // the Dirichlet end costs half an element of the last hat function
        let one = GridFunction::constant(tad.clone(), 1.0);
        let hl = &tad.mesh().chains()[1];
        let h = hl.h(hl.n_elems() - 1);
        assert!((one.l2sq() - (32.0 - 2.0 * h / 3.0)).abs() < 1e-10);
    }

    #[test]
    fn norms_of_unit_constant() {
        let sp = space(GraphKind::Interval(1.0), 0.01, 1.0);
        let n = GridFunction::constant(sp, 1.0).norms(7.0);
        assert!((n.l2sq - 1.0).abs() < 1e-12);
        assert!(n.gradsq.abs() < 1e-12);
        assert!((n.lpp - 1.0).abs() < 1e-12);
        assert_eq!(n.sup, 1.0);
    }

    #[test]
    fn halfline_bottom_eigenvalue() {
        let l = 10.0;
        let want = (std::f64::consts::PI / (2.0 * l)).powi(2);
        let mut errs = vec![];
        for h in [0.1, 0.05] {
            let sp = space(GraphKind::HalfLine, h, l);
            let lam = lambda_bottom(&sp).unwrap();
            errs.push((lam - want).abs());
        }
        assert!(errs[1] < 1e-4 * want);
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.8, "order {order}");
    }

    #[test]
    fn compact_bottom_is_zero() {
        let lp = space(GraphKind::Loop(2.0), 0.05, 1.0);
        assert!(lambda_bottom(&lp).unwrap().abs() < 1e-10);
        let line_short = lambda_bottom(&space(GraphKind::Line, 0.1, 10.0)).unwrap();
        let line_long = lambda_bottom(&space(GraphKind::Line, 0.1, 30.0)).unwrap();
        assert!(line_long < line_short && line_long < 3e-3);
    }

    #[test]
    fn constant_solution_on_loop() {
        let sp = space(GraphKind::Loop(2.0), 0.05, 1.0);
        let (p, rho) = (7.0, 0.8);
        let c: f64 = 1.3;
        let u = GridFunction::constant(sp, c);
        let lam = rho * c.powf(p - 2.0);
        assert!(u.pde_residual(lam, rho, p) < 1e-12);
        assert!(u.pde_residual(lam * 1.1, rho, p) > 1e-3);
    }

    #[test]
    fn projection() {
        let sp = space(GraphKind::Interval(1.0), 0.05, 1.0);
        let u = GridFunction::constant(sp.clone(), 2.0);
        assert!((u.l2sq() - 4.0).abs() < 1e-12);
        let v = u.project_mass(1.0).unwrap();
        assert!(v.values().iter().all(|&x| (x - 1.0).abs() < 1e-12));
        let w = v.project_mass(1.0).unwrap();
        for (a, b) in v.values().iter().zip(w.values()) {
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * a.abs());
        }
        assert!(matches!(
            GridFunction::zeros(sp).project_mass(1.0),
            Err(Error::CannotProject)
        ));
    }

    #[test]
    fn zero_function() {
        let sp = space(GraphKind::Tadpole { loop_len: 2.0 }, 0.1, 5.0);
        let z = GridFunction::zeros(sp);
        assert_eq!(z.energy(1.0, 7.0), 0.0);
        assert!(z.energy_gradient(1.0, 7.0).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn f32_pipeline() {
        let g = build_standard::<f32>(&GraphKind::Loop(2.0)).unwrap();
        let sp = FemSpace::build(&g, 0.05f32, 1.0).unwrap();
        let u = GridFunction::constant(sp, 1.0f32).project_mass(4.0).unwrap();
        assert!((u.values()[0] - 2.0_f32.sqrt()).abs() < 1e-5);
    }

    fn random_fn(sp: &Arc<FemSpace<f64>>, seed: &[f64]) -> GridFunction<f64> {
        let n = sp.n_dofs();
        GridFunction::new(sp.clone(), (0..n).map(|i| seed[i % seed.len()] * (1.0 + (i as f64 * 0.37).sin())).collect()).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn quadratic_forms_positive(seed in prop::collection::vec(-1.0f64..1.0, 3..9)) {
            prop_assume!(seed.iter().any(|v| v.abs() > 1e-3));
            let sp = space(GraphKind::Signpost { loop_len: 1.0, stem_len: 0.7, extra_halflines: 2 }, 0.05, 3.0);
            let u = random_fn(&sp, &seed);
            prop_assert!(u.gradsq() >= -1e-14);
            prop_assert!(u.l2sq() > 0.0);
        }

        #[test]
        fn gradient_matches_finite_differences(
            seed in prop::collection::vec(-1.0f64..1.0, 3..9),
            dir in prop::collection::vec(-1.0f64..1.0, 3..9),
        ) {
            let sp = space(GraphKind::Tadpole { loop_len: 2.0 }, 0.1, 4.0);
            let u = random_fn(&sp, &seed);
            let v = random_fn(&sp, &dir);
            let (rho, p) = (0.7, 7.0);
            let eps = 1e-5;
            let plus = u.with_values(u.values().iter().zip(v.values()).map(|(a, b)| a + eps * b).collect());
            let minus = u.with_values(u.values().iter().zip(v.values()).map(|(a, b)| a - eps * b).collect());
            let fd = (plus.energy(rho, p) - minus.energy(rho, p)) / (2.0 * eps);
            let an = u.energy_gradient(rho, p).mass_inner(&v);
            prop_assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "fd {} vs {}", fd, an);
        }

        #[test]
        fn random_residual_positive(seed in prop::collection::vec(0.1f64..1.0, 3..9)) {
            let sp = space(GraphKind::Line, 0.1, 5.0);
            let u = random_fn(&sp, &seed);
            prop_assert!(u.pde_residual(1.0, 1.0, 7.0) > 0.0);
        }
    }
}
