//! Trace unknowns on the mesh skeleton: numbering, essential constraints and
//! the element pairings with the test functions.
//!
//! * `u_hat`: continuous piecewise `P^{k+1}` vector, two values per vertex
//!   plus (for `k = 1`) two quadratic edge bubbles `4 s (1 - s)` per edge.
//! * `w_hat`: reduced HCT trace, value and gradient per vertex. On an edge the
//!   value is the cubic Hermite interpolant and the normal derivative is
//!   linear.
//! * `N_hat`: one constant vector `sigma_E` per edge, relative to `nu_E`.
//! * `M_hat`: constants `q_E` (effective shear, relative to `nu_E`) and `m_E`
//!   (normal-normal moment) per edge.
//! * Optional corner moments: two values per edge, the twisting moment
//!   `t . M n` at the lower and at the higher endpoint.

use crate::error::{DpgError, Result};
use crate::mesh::{Mesh, Side, SideSet};
use crate::shell::BcTable;
use crate::tensor::{self, Vec2};
use crate::testspace::{sym_div, sym_value, ElementTests, P3_DIM, P4_DIM};

/// Field unknowns per element: `u` (2), `w` (1), `N` (4), `M` (3).
pub const FIELD_DOFS: usize = 10;

/// Trace discretization choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceOptions {
    /// Extra degree of the tangential displacement trace, 0 or 1.
    pub k: usize,
    /// Add the corner (twisting moment) functionals to the moment trace.
    /// On by default: without them the estimator stalls under refinement.
    pub corner_moments: bool,
}

impl TraceOptions {
    /// Trace degree `k` with corner moments enabled.
    pub fn new(k: usize) -> Result<Self> {
        if k > 1 {
            return Err(DpgError::InvalidParameter(format!(
                "trace degree k = {k} is not supported (use 0 or 1)"
            )));
        }
        Ok(TraceOptions { k, corner_moments: true })
    }

    pub fn with_corner_moments(mut self, on: bool) -> Self {
        self.corner_moments = on;
        self
    }
}

/// Offsets of the unknown groups within one element's local vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalLayout {
    pub u_hat: usize,
    pub n_u_hat: usize,
    pub w_hat: usize,
    pub n_hat: usize,
    pub m_hat: usize,
    pub corner: usize,
    pub n_corner: usize,
    pub len: usize,
}

impl LocalLayout {
    pub fn new(options: TraceOptions) -> Self {
        let n_u_hat = 6 + 6 * options.k;
        let u_hat = FIELD_DOFS;
        let w_hat = u_hat + n_u_hat;
        let n_hat = w_hat + 9;
        let m_hat = n_hat + 6;
        let corner = m_hat + 6;
        let n_corner = if options.corner_moments { 6 } else { 0 };
        LocalLayout { u_hat, n_u_hat, w_hat, n_hat, m_hat, corner, n_corner, len: corner + n_corner }
    }
}

/// Global enumeration of all unknowns and their essential constraints.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub options: TraceOptions,
    pub layout: LocalLayout,
    num_triangles: usize,
    off_u_vertex: usize,
    off_u_edge: usize,
    off_w: usize,
    off_n: usize,
    off_m: usize,
    off_corner: usize,
    total: usize,
    constrained: Vec<bool>,
    free_index: Vec<Option<usize>>,
    num_free: usize,
}

impl DofMap {
    /// Numbers all unknowns of `mesh` and constrains them according to `bc`.
    pub fn new(mesh: &Mesh, options: TraceOptions, bc: &BcTable) -> Result<Self> {
        let (nt, nv, ne) = (mesh.num_triangles(), mesh.num_vertices(), mesh.num_edges());
        let off_u_vertex = FIELD_DOFS * nt;
        let off_u_edge = off_u_vertex + 2 * nv;
        let off_w = off_u_edge + 2 * options.k * ne;
        let off_n = off_w + 3 * nv;
        let off_m = off_n + 2 * ne;
        let off_corner = off_m + 2 * ne;
        let total = off_corner + if options.corner_moments { 2 * ne } else { 0 };
        let mut map = DofMap {
            options,
            layout: LocalLayout::new(options),
            num_triangles: nt,
            off_u_vertex,
            off_u_edge,
            off_w,
            off_n,
            off_m,
            off_corner,
            total,
            constrained: vec![false; total],
            free_index: Vec::new(),
            num_free: 0,
        };
        map.apply_bc(mesh, bc)?;
        Ok(map)
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn num_free(&self) -> usize {
        self.num_free
    }

    pub fn num_triangles(&self) -> usize {
        self.num_triangles
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained[dof]
    }

    /// Position of a global dof among the free dofs.
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    pub fn field(&self, t: usize, j: usize) -> usize {
        FIELD_DOFS * t + j
    }

    pub fn u_vertex(&self, v: usize, c: usize) -> usize {
        self.off_u_vertex + 2 * v + c
    }

    pub fn u_edge(&self, e: usize, c: usize) -> usize {
        debug_assert!(self.options.k == 1);
        self.off_u_edge + 2 * e + c
    }

    /// `r = 0` value, `r = 1, 2` gradient components.
    pub fn w_vertex(&self, v: usize, r: usize) -> usize {
        self.off_w + 3 * v + r
    }

    pub fn n_edge(&self, e: usize, c: usize) -> usize {
        self.off_n + 2 * e + c
    }

    /// `r = 0` effective shear `q`, `r = 1` normal moment `m`.
    pub fn m_edge(&self, e: usize, r: usize) -> usize {
        self.off_m + 2 * e + r
    }

    /// `r = 0` at the lower endpoint, `r = 1` at the higher one.
    pub fn corner(&self, e: usize, r: usize) -> usize {
        debug_assert!(self.options.corner_moments);
        self.off_corner + 2 * e + r
    }

    /// Global indices of the local unknowns of triangle `t`, in the order of
    /// [`LocalLayout`].
    pub fn element_dofs(&self, mesh: &Mesh, t: usize) -> Vec<usize> {
        let tri = mesh.triangles()[t];
        let edges = mesh.triangle_edges(t);
        let mut dofs = Vec::with_capacity(self.layout.len);
        dofs.extend((0..FIELD_DOFS).map(|j| self.field(t, j)));
        for &v in &tri {
            dofs.extend((0..2).map(|c| self.u_vertex(v, c)));
        }
        if self.options.k == 1 {
            for &e in &edges {
                dofs.extend((0..2).map(|c| self.u_edge(e, c)));
            }
        }
        for &v in &tri {
            dofs.extend((0..3).map(|r| self.w_vertex(v, r)));
        }
        for &e in &edges {
            dofs.extend((0..2).map(|c| self.n_edge(e, c)));
        }
        for &e in &edges {
            dofs.extend((0..2).map(|r| self.m_edge(e, r)));
        }
        if self.options.corner_moments {
            for &e in &edges {
                dofs.extend((0..2).map(|r| self.corner(e, r)));
            }
        }
        dofs
    }

    /// Marks constrained dofs: kinematic constraints on `u_hat`, `w_hat` and
    /// the dual homogeneous conditions on `N_hat`, `M_hat`.
    fn apply_bc(&mut self, mesh: &Mesh, bc: &BcTable) -> Result<()> {
        let mut fix = vec![false; self.total];
        for v in 0..mesh.num_vertices() {
            let sides = mesh.vertex_sides(v);
            for side in sides.iter() {
                let sbc = bc.side(side);
                for c in 0..2 {
                    if sbc.u(c) {
                        fix[self.u_vertex(v, c)] = true;
                    }
                }
                // Gradient component along the side, and across it.
                let (tangential, normal) = if side.is_horizontal() { (1, 2) } else { (2, 1) };
                if sbc.w {
                    fix[self.w_vertex(v, 0)] = true;
                    fix[self.w_vertex(v, tangential)] = true;
                }
                if sbc.dnw {
                    fix[self.w_vertex(v, normal)] = true;
                }
            }
        }
        for (e, edge) in mesh.edges().iter().enumerate() {
            let Some(side) = edge.boundary else { continue };
            let sbc = bc.side(side);
            for c in 0..2 {
                if self.options.k == 1 && sbc.u(c) {
                    fix[self.u_edge(e, c)] = true;
                }
                if !sbc.u(c) {
                    fix[self.n_edge(e, c)] = true;
                }
            }
            if !sbc.w {
                fix[self.m_edge(e, 0)] = true;
            }
            if !sbc.dnw {
                fix[self.m_edge(e, 1)] = true;
            }
        }
        if self.options.corner_moments {
            self.constrain_corners(mesh, bc, &mut fix)?;
        }

        self.constrained = fix;
        let mut next = 0;
        self.free_index = self
            .constrained
            .iter()
            .map(|&c| {
                if c {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect();
        self.num_free = next;
        Ok(())
    }

    /// Corner values are defined up to one constant per vertex; fix it on one
    /// edge (a boundary edge at boundary vertices). Where the deflection is
    /// free the corner force vanishes, which fixes the other boundary edge too.
    fn constrain_corners(&self, mesh: &Mesh, bc: &BcTable, fix: &mut [bool]) -> Result<()> {
        let nv = mesh.num_vertices();
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for (e, edge) in mesh.edges().iter().enumerate() {
            for v in edge.vertices {
                incident[v].push(e);
            }
        }
        let slot = |e: usize, v: usize| -> usize {
            let r = if mesh.edges()[e].vertices[0] == v { 0 } else { 1 };
            self.corner(e, r)
        };
        for (v, edges) in incident.iter().enumerate() {
            let boundary: Vec<usize> =
                edges.iter().copied().filter(|&e| mesh.edges()[e].boundary.is_some()).collect();
            if boundary.is_empty() {
                let first = *edges.iter().min().ok_or_else(|| {
                    DpgError::InvalidGeometry(format!("vertex {v} has no edges"))
                })?;
                fix[slot(first, v)] = true;
                continue;
            }
            if boundary.len() != 2 {
                return Err(DpgError::InvalidGeometry(format!(
                    "boundary vertex {v} has {} boundary edges",
                    boundary.len()
                )));
            }
            fix[slot(boundary[0], v)] = true;
            if !w_constrained(mesh.vertex_sides(v), bc) {
                fix[slot(boundary[1], v)] = true;
            }
        }
        Ok(())
    }
}

fn w_constrained(sides: SideSet, bc: &BcTable) -> bool {
    sides.iter().any(|s: Side| bc.side(s).w)
}

/// Linear and bubble shape functions of `u_hat` at edge parameter `s`:
/// `(1 - s, s, 4 s (1 - s))`.
#[inline]
pub fn u_hat_shapes(s: f64) -> [f64; 3] {
    [1.0 - s, s, 4.0 * s * (1.0 - s)]
}

/// Cubic Hermite basis `h00, h10, h01, h11` and derivatives with respect to `s`.
#[inline]
pub fn hermite(s: f64) -> ([f64; 4], [f64; 4]) {
    let s2 = s * s;
    let s3 = s2 * s;
    (
        [2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2],
        [6.0 * s2 - 6.0 * s, 3.0 * s2 - 4.0 * s + 1.0, -6.0 * s2 + 6.0 * s, 3.0 * s2 - 2.0 * s],
    )
}

/// Trace of one `w_hat` basis function on an edge: value and gradient.
///
/// `at_start` selects the vertex at `s = 0` of the traversal, `r` the dof
/// (value, d/dx, d/dy).
#[inline]
pub fn w_hat_trace(s: f64, length: f64, tangent: Vec2, normal: Vec2, at_start: bool, r: usize) -> (f64, Vec2) {
    let (h, dh) = hermite(s);
    let (hv, hg, lin) = if at_start { (0, 1, 1.0 - s) } else { (2, 3, s) };
    if r == 0 {
        let dt = dh[hv] / length;
        (h[hv], tensor::scale(dt, tangent))
    } else {
        let g = if r == 1 { [1.0, 0.0] } else { [0.0, 1.0] };
        let gt = tensor::dot(g, tangent);
        let gn = tensor::dot(g, normal);
        let value = h[hg] * length * gt;
        let dt = dh[hg] * gt;
        (value, tensor::add(tensor::scale(dt, tangent), tensor::scale(lin * gn, normal)))
    }
}

/// Dense block stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Block {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Block { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }
}

/// `<u_hat, T n>` on the element boundary: rows are the 30 `T` test
/// functions, columns the local `u_hat` dofs (vertex `a`, component `c` at
/// `2a + c`; edge `j` bubble at `6 + 2j + c`).
pub fn pair_u_hat(el: &ElementTests, k: usize) -> Block {
    let mut out = Block::zeros(3 * P3_DIM, 6 + 6 * k);
    for j in 0..3 {
        let edge = &el.edges[j];
        let (a, b) = ((j + 1) % 3, (j + 2) % 3);
        for (q, &s) in el.edge_params.iter().enumerate() {
            let w = el.edge_weights[j][q];
            let jets = &el.edge_jets[j][q];
            let [la, lb, bubble] = u_hat_shapes(s);
            for i in 0..3 * P3_DIM {
                let tn = tensor::mat_vec(&sym_value(jets, P3_DIM, i), edge.normal);
                for c in 0..2 {
                    let f = w * tn[c];
                    out.add(i, 2 * a + c, f * la);
                    out.add(i, 2 * b + c, f * lb);
                    if k == 1 {
                        out.add(i, 6 + 2 * j + c, f * bubble);
                    }
                }
            }
        }
    }
    out
}

/// `sum_E int_E [w (n . div S) - (S n) . grad w]`: rows are the 45 `S` test
/// functions, columns the nine local `w_hat` dofs (`3a + r`).
pub fn pair_w_hat(el: &ElementTests) -> Block {
    let mut out = Block::zeros(3 * P4_DIM, 9);
    for j in 0..3 {
        let edge = &el.edges[j];
        let ends = [(j + 1) % 3, (j + 2) % 3];
        for (q, &s) in el.edge_params.iter().enumerate() {
            let w = el.edge_weights[j][q];
            let jets = &el.edge_jets[j][q];
            let mut traces = [(0.0, [0.0; 2]); 6];
            for (slot, trace) in traces.iter_mut().enumerate() {
                *trace = w_hat_trace(s, edge.length, edge.tangent, edge.normal, slot < 3, slot % 3);
            }
            for i in 0..3 * P4_DIM {
                let ndiv = tensor::dot(edge.normal, sym_div(jets, P4_DIM, i));
                let sn = tensor::mat_vec(&sym_value(jets, P4_DIM, i), edge.normal);
                for (slot, (value, grad)) in traces.iter().enumerate() {
                    let col = 3 * ends[slot / 3] + slot % 3;
                    out.add(i, col, w * (value * ndiv - tensor::dot(sn, *grad)));
                }
            }
        }
    }
    out
}

/// `sum_E s_{T,E} int_E sigma_E . v`: rows are the 20 `v` test functions,
/// columns the local `N_hat` dofs (`2j + c`).
pub fn pair_n_hat(el: &ElementTests) -> Block {
    let mut out = Block::zeros(2 * P3_DIM, 6);
    for j in 0..3 {
        let sign = el.edges[j].sign;
        for q in 0..el.edge_params.len() {
            let w = sign * el.edge_weights[j][q];
            let jets = &el.edge_jets[j][q];
            for c in 0..2 {
                for i in 0..P3_DIM {
                    out.add(c * P3_DIM + i, 2 * j + c, w * jets[i].value);
                }
            }
        }
    }
    out
}

/// `sum_E s_{T,E} [q_E int_E z - m_E int_E d_nu z]`: rows are the 10 `z`
/// test functions, columns the local `M_hat` dofs (`2j` for `q`, `2j + 1`
/// for `m`).
pub fn pair_m_hat(el: &ElementTests) -> Block {
    let mut out = Block::zeros(P3_DIM, 6);
    for j in 0..3 {
        let edge = &el.edges[j];
        for q in 0..el.edge_params.len() {
            let w = el.edge_weights[j][q];
            let jets = &el.edge_jets[j][q];
            for i in 0..P3_DIM {
                out.add(i, 2 * j, edge.sign * w * jets[i].value);
                // s * (d z / d nu) = d z / d n_T
                out.add(i, 2 * j + 1, -w * tensor::dot(jets[i].grad, edge.normal));
            }
        }
    }
    out
}

/// Corner functionals `tau(start) z(start) - tau(end) z(end)` per edge:
/// rows are the 10 `z` test functions, columns `2j + r` with `r = 0` at the
/// lower endpoint of the edge.
pub fn pair_corners(el: &ElementTests) -> Block {
    let mut out = Block::zeros(P3_DIM, 6);
    for j in 0..3 {
        let edge = &el.edges[j];
        let (a, b) = ((j + 1) % 3, (j + 2) % 3);
        let (r_start, r_end) = if edge.start < edge.end { (0, 1) } else { (1, 0) };
        for i in 0..P3_DIM {
            out.add(i, 2 * j + r_start, el.vertex_jets[a][i].value);
            out.add(i, 2 * j + r_end, -el.vertex_jets[b][i].value);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{initial_rectangle_mesh, refine, Rect};
    use crate::shell::SideBc;

    fn mesh() -> Mesh {
        let m = initial_rectangle_mesh(Rect::new(0.0, 2.0, 0.0, 1.0).unwrap()).unwrap();
        refine(&m, &[0, 2]).unwrap()
    }

    #[test]
    fn hermite_interpolates_endpoint_data() {
        let (h0, d0) = hermite(0.0);
        let (h1, d1) = hermite(1.0);
        assert_eq!(h0, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(h1, [0.0, 0.0, 1.0, 0.0]);
        assert_eq!(d0, [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(d1, [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn w_hat_trace_reproduces_quadratics() {
        // w = x^2 + 3xy - y on an oblique edge.
        let w = |p: Vec2| p[0] * p[0] + 3.0 * p[0] * p[1] - p[1];
        let g = |p: Vec2| [2.0 * p[0] + 3.0 * p[1], 3.0 * p[0] - 1.0];
        let a = [0.2, 0.1];
        let b = [1.0, 0.7];
        let d = tensor::sub(b, a);
        let len = tensor::norm(d);
        let t = tensor::scale(1.0 / len, d);
        let n = [t[1], -t[0]];
        for s in [0.0, 0.3, 0.77, 1.0] {
            let x = tensor::add(a, tensor::scale(s, d));
            let mut value = 0.0;
            let mut grad = [0.0; 2];
            for (at_start, p) in [(true, a), (false, b)] {
                let data = [w(p), g(p)[0], g(p)[1]];
                for r in 0..3 {
                    let (v, gr) = w_hat_trace(s, len, t, n, at_start, r);
                    value += data[r] * v;
                    grad = tensor::add(grad, tensor::scale(data[r], gr));
                }
            }
            assert!((value - w(x)).abs() < 1e-13);
            assert!((grad[0] - g(x)[0]).abs() < 1e-13 && (grad[1] - g(x)[1]).abs() < 1e-13);
        }
    }

    #[test]
    fn dof_counts() {
        let m = mesh();
        let bc = BcTable::uniform(SideBc::FREE);
        let edge_only = TraceOptions::new(0).unwrap().with_corner_moments(false);
        let map = DofMap::new(&m, edge_only, &bc).unwrap();
        let (nt, nv, ne) = (m.num_triangles(), m.num_vertices(), m.num_edges());
        assert_eq!(map.total(), 10 * nt + 2 * nv + 3 * nv + 4 * ne);
        let with_corners = DofMap::new(&m, TraceOptions::new(0).unwrap(), &bc).unwrap();
        assert_eq!(with_corners.total(), map.total() + 2 * ne);
        let map1 = DofMap::new(&m, TraceOptions::new(1).unwrap().with_corner_moments(false), &bc).unwrap();
        assert_eq!(map1.total(), map.total() + 2 * ne);
        assert!(TraceOptions::new(2).is_err());
    }

    #[test]
    fn clamped_boundary_fixes_all_kinematic_dofs() {
        let m = mesh();
        let map = DofMap::new(&m, TraceOptions::new(1).unwrap(), &BcTable::uniform(SideBc::CLAMPED)).unwrap();
        for v in 0..m.num_vertices() {
            let on_boundary = !m.vertex_sides(v).is_empty();
            for r in 0..3 {
                assert_eq!(map.is_constrained(map.w_vertex(v, r)), on_boundary);
            }
            for c in 0..2 {
                assert_eq!(map.is_constrained(map.u_vertex(v, c)), on_boundary);
            }
        }
        for e in 0..m.num_edges() {
            for r in 0..2 {
                assert!(!map.is_constrained(map.n_edge(e, r)));
                assert!(!map.is_constrained(map.m_edge(e, r)));
            }
        }
    }

    #[test]
    fn simple_support_fixes_normal_moment() {
        let m = mesh();
        let ss = SideBc { w: true, ..SideBc::FREE };
        let map = DofMap::new(&m, TraceOptions::new(0).unwrap(), &BcTable::uniform(ss)).unwrap();
        for (e, edge) in m.edges().iter().enumerate() {
            let boundary = edge.boundary.is_some();
            assert_eq!(map.is_constrained(map.m_edge(e, 1)), boundary);
            assert!(!map.is_constrained(map.m_edge(e, 0)));
            assert_eq!(map.is_constrained(map.n_edge(e, 0)), boundary);
        }
        // Bottom-left corner: value and both tangential derivatives are fixed.
        for r in 0..3 {
            assert!(map.is_constrained(map.w_vertex(0, r)));
        }
        // A mid-side vertex on the bottom keeps its normal derivative free.
        let mid = m.find_vertex([1.0, 0.0]).unwrap();
        assert!(map.is_constrained(map.w_vertex(mid, 1)));
        assert!(!map.is_constrained(map.w_vertex(mid, 2)));
    }

    #[test]
    fn free_indices_are_dense() {
        let m = mesh();
        let map = DofMap::new(&m, TraceOptions::new(0).unwrap(), &BcTable::uniform(SideBc::CLAMPED)).unwrap();
        let mut seen = vec![false; map.num_free()];
        for dof in 0..map.total() {
            match map.free_index(dof) {
                Some(i) => {
                    assert!(!seen[i]);
                    seen[i] = true;
                }
                None => assert!(map.is_constrained(dof)),
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn element_dofs_have_layout_length() {
        let m = mesh();
        for k in 0..2 {
            for corners in [false, true] {
                let opts = TraceOptions::new(k).unwrap().with_corner_moments(corners);
                let map = DofMap::new(&m, opts, &BcTable::uniform(SideBc::FREE)).unwrap();
                for t in 0..m.num_triangles() {
                    let dofs = map.element_dofs(&m, t);
                    assert_eq!(dofs.len(), map.layout.len);
                    assert!(dofs.iter().all(|&d| d < map.total()));
                }
            }
        }
    }
}
