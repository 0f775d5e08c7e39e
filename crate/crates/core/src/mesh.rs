//! Conforming triangulations of rectangles refined by newest-vertex bisection.
//!
//! Every triangle is stored counterclockwise with its newest vertex first, so
//! the refinement edge is always local edge 0 (opposite local vertex 0). Local
//! edge `j` joins local vertices `j + 1` and `j + 2` (mod 3).
//!
//! Each edge carries a fixed unit normal `nu_E`: the direction from its lower
//! to its higher vertex index, rotated by -90 degrees.

use std::collections::HashMap;
use std::io::{self, Write};

use crate::error::{DpgError, Result};
use crate::tensor::{self, Vec2};

/// Axis-aligned rectangle `(x0, x1) x (y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        let rect = Rect { x0, x1, y0, y1 };
        rect.validate()?;
        Ok(rect)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x0, self.x1, self.y0, self.y1]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x1 <= self.x0 || self.y1 <= self.y0 {
            return Err(DpgError::InvalidGeometry(format!(
                "degenerate rectangle ({}, {}) x ({}, {})",
                self.x0, self.x1, self.y0, self.y1
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn min_width(&self) -> f64 {
        self.width().min(self.height())
    }

    pub fn center(&self) -> Vec2 {
        [0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)]
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let tol = 1e-12 * self.diameter();
        p[0] >= self.x0 - tol && p[0] <= self.x1 + tol && p[1] >= self.y0 - tol && p[1] <= self.y1 + tol
    }

    /// Sides of the rectangle on which `p` lies.
    pub fn sides_of(&self, p: Vec2) -> SideSet {
        let tol = 1e-10 * self.diameter();
        let mut set = SideSet::EMPTY;
        if (p[0] - self.x0).abs() <= tol {
            set.insert(Side::Left);
        }
        if (p[0] - self.x1).abs() <= tol {
            set.insert(Side::Right);
        }
        if (p[1] - self.y0).abs() <= tol {
            set.insert(Side::Bottom);
        }
        if (p[1] - self.y1).abs() <= tol {
            set.insert(Side::Top);
        }
        set
    }
}

/// One side of a rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    /// `x = x0`
    Left,
    /// `x = x1`
    Right,
    /// `y = y0`
    Bottom,
    /// `y = y1`
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
            Side::Bottom => 2,
            Side::Top => 3,
        }
    }

    /// True for the sides `y = const`, whose tangent is the x axis.
    pub fn is_horizontal(self) -> bool {
        matches!(self, Side::Bottom | Side::Top)
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Bottom => "bottom",
            Side::Top => "top",
        }
    }
}

/// Small bit set of rectangle sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SideSet(u8);

impl SideSet {
    pub const EMPTY: SideSet = SideSet(0);

    pub fn insert(&mut self, side: Side) {
        self.0 |= 1 << side.index();
    }

    pub fn contains(&self, side: Side) -> bool {
        self.0 & (1 << side.index()) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = Side> + '_ {
        Side::ALL.into_iter().filter(move |s| self.contains(*s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Endpoints, lower vertex index first.
    pub vertices: [usize; 2],
    /// One or two incident triangles.
    pub triangles: Vec<usize>,
    /// Fixed unit normal `nu_E`.
    pub normal: Vec2,
    pub length: f64,
    pub boundary: Option<Side>,
}

impl Edge {
    /// Unit tangent from the lower to the higher vertex; `normal` is this
    /// tangent rotated by -90 degrees.
    pub fn tangent(&self) -> Vec2 {
        [-self.normal[1], self.normal[0]]
    }
}

/// Conforming triangulation of a rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    rect: Rect,
    vertices: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    triangle_edges: Vec<[usize; 3]>,
    vertex_sides: Vec<SideSet>,
}

/// Set of triangle indices selected for refinement.
pub type MarkSet = Vec<usize>;

impl Mesh {
    /// Builds the mesh data structures from vertices and counterclockwise
    /// triangles whose local vertex 0 is the newest vertex.
    pub fn from_parts(rect: Rect, vertices: Vec<Vec2>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        rect.validate()?;
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(DpgError::InvalidGeometry(format!(
                    "triangle {t} references a missing vertex"
                )));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area <= 0.0 {
                return Err(DpgError::InvalidGeometry(format!(
                    "triangle {t} has nonpositive signed area {area}"
                )));
            }
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 2);
        let mut edges: Vec<Edge> = Vec::with_capacity(triangles.len() * 3 / 2 + 4);
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [0usize; 3];
            for (j, slot) in local.iter_mut().enumerate() {
                let a = tri[(j + 1) % 3];
                let b = tri[(j + 2) % 3];
                let key = (a.min(b), a.max(b));
                let index = *lookup.entry(key).or_insert_with(|| {
                    let p = vertices[key.0];
                    let q = vertices[key.1];
                    let d = tensor::sub(q, p);
                    let length = tensor::norm(d);
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        triangles: Vec::with_capacity(2),
                        normal: [d[1] / length, -d[0] / length],
                        length,
                        boundary: None,
                    });
                    edges.len() - 1
                });
                edges[index].triangles.push(t);
                *slot = index;
            }
            triangle_edges.push(local);
        }

        let mut vertex_sides = vec![SideSet::EMPTY; vertices.len()];
        for (e, edge) in edges.iter_mut().enumerate() {
            match edge.triangles.len() {
                1 => {
                    let p = vertices[edge.vertices[0]];
                    let q = vertices[edge.vertices[1]];
                    let common = SideSet(rect.sides_of(p).0 & rect.sides_of(q).0);
                    let side = common.iter().next().ok_or_else(|| {
                        DpgError::InvalidGeometry(format!(
                            "boundary edge {e} does not lie on the rectangle boundary"
                        ))
                    })?;
                    edge.boundary = Some(side);
                    vertex_sides[edge.vertices[0]].insert(side);
                    vertex_sides[edge.vertices[1]].insert(side);
                }
                2 => {}
                n => {
                    return Err(DpgError::InvalidGeometry(format!(
                        "edge {e} has {n} incident triangles"
                    )))
                }
            }
        }

        Ok(Mesh {
            rect,
            vertices,
            triangles,
            edges,
            triangle_edges,
            vertex_sides,
        })
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Global edge indices of the local edges of triangle `t`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    /// Sides of the rectangle the vertex lies on (empty for interior vertices).
    pub fn vertex_sides(&self, v: usize) -> SideSet {
        self.vertex_sides[v]
    }

    pub fn triangle_points(&self, t: usize) -> [Vec2; 3] {
        let tri = self.triangles[t];
        [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> Vec2 {
        let [a, b, c] = self.triangle_points(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        tensor::norm(tensor::sub(a, b))
            .max(tensor::norm(tensor::sub(b, c)))
            .max(tensor::norm(tensor::sub(c, a)))
    }

    /// Orientation sign `n_T . nu_E` of local edge `j` of triangle `t`.
    pub fn edge_sign(&self, t: usize, j: usize) -> f64 {
        let tri = self.triangles[t];
        if tri[(j + 1) % 3] < tri[(j + 2) % 3] {
            1.0
        } else {
            -1.0
        }
    }

    /// Index of the vertex located at `p`, if any.
    pub fn find_vertex(&self, p: Vec2) -> Option<usize> {
        let tol = 1e-10 * self.rect.diameter();
        self.vertices
            .iter()
            .position(|v| (v[0] - p[0]).abs() <= tol && (v[1] - p[1]).abs() <= tol)
    }

    /// Triangles having `v` as a vertex, in increasing index order.
    pub fn triangles_at_vertex(&self, v: usize) -> Vec<usize> {
        (0..self.num_triangles())
            .filter(|&t| self.triangles[t].contains(&v))
            .collect()
    }

    /// Index of a triangle containing `p` (closed), preferring the lowest index.
    pub fn locate(&self, p: Vec2) -> Option<usize> {
        let scale = self.rect.diameter();
        let tol = -1e-12 * scale * scale;
        (0..self.num_triangles()).find(|&t| {
            let [a, b, c] = self.triangle_points(t);
            signed_area(p, b, c) >= tol && signed_area(a, p, c) >= tol && signed_area(a, b, p) >= tol
        })
    }

    /// Checks the structural invariants: positive areas, one or two triangles
    /// per edge (one exactly on the boundary), no hanging vertices.
    pub fn check_conforming(&self) -> Result<()> {
        for t in 0..self.num_triangles() {
            if self.area(t) <= 0.0 {
                return Err(DpgError::InvalidGeometry(format!("triangle {t} is inverted")));
            }
        }
        for (e, edge) in self.edges.iter().enumerate() {
            let expected = if edge.boundary.is_some() { 1 } else { 2 };
            if edge.triangles.len() != expected {
                return Err(DpgError::InvalidGeometry(format!(
                    "edge {e} has {} triangles",
                    edge.triangles.len()
                )));
            }
            if (tensor::norm(edge.normal) - 1.0).abs() > 1e-12 {
                return Err(DpgError::InvalidGeometry(format!("edge {e} normal is not unit")));
            }
        }
        // A hanging vertex lies in the interior of some edge.
        for (e, edge) in self.edges.iter().enumerate() {
            let p = self.vertices[edge.vertices[0]];
            let q = self.vertices[edge.vertices[1]];
            for (v, x) in self.vertices.iter().enumerate() {
                if edge.vertices.contains(&v) {
                    continue;
                }
                let cross = signed_area(p, q, *x).abs();
                if cross > 1e-12 * edge.length * edge.length {
                    continue;
                }
                let s = tensor::dot(tensor::sub(*x, p), tensor::sub(q, p)) / (edge.length * edge.length);
                if s > 1e-12 && s < 1.0 - 1e-12 {
                    return Err(DpgError::InvalidGeometry(format!(
                        "vertex {v} hangs on edge {e}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Writes the vertex table `index x y`, one vertex per line.
    pub fn write_vertices<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for (i, p) in self.vertices.iter().enumerate() {
            writeln!(out, "{i} {:.16e} {:.16e}", p[0], p[1])?;
        }
        Ok(())
    }

    /// Writes the triangle table `index v0 v1 v2`, one triangle per line.
    pub fn write_triangles<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for (i, t) in self.triangles.iter().enumerate() {
            writeln!(out, "{i} {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

/// Signed area of the triangle `abc`, positive when counterclockwise.
pub fn signed_area(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Criss-cross mesh of a rectangle: four triangles meeting at the center,
/// each with the center as newest vertex and its boundary edge as
/// refinement edge.
pub fn initial_rectangle_mesh(rect: Rect) -> Result<Mesh> {
    rect.validate()?;
    let vertices = vec![
        [rect.x0, rect.y0],
        [rect.x1, rect.y0],
        [rect.x1, rect.y1],
        [rect.x0, rect.y1],
        rect.center(),
    ];
    let triangles = vec![[4, 0, 1], [4, 1, 2], [4, 2, 3], [4, 3, 0]];
    Mesh::from_parts(rect, vertices, triangles)
}

/// Refines every marked triangle into four children of equal area (two
/// bisection levels) and closes the mesh with further bisections.
pub fn refine(mesh: &Mesh, marked: &[usize]) -> Result<Mesh> {
    let n_tri = mesh.num_triangles();
    if let Some(&bad) = marked.iter().find(|&&t| t >= n_tri) {
        return Err(DpgError::InvalidParameter(format!(
            "marked triangle {bad} out of range (mesh has {n_tri})"
        )));
    }
    if marked.is_empty() {
        return Ok(mesh.clone());
    }

    let mut edge_marked = vec![false; mesh.num_edges()];
    let mut queue: Vec<usize> = Vec::new();
    for &t in marked {
        for e in mesh.triangle_edges(t) {
            if !edge_marked[e] {
                edge_marked[e] = true;
                queue.extend_from_slice(&mesh.edges[e].triangles);
            }
        }
    }
    // Closure: a triangle with any marked edge must also bisect its refinement edge.
    while let Some(t) = queue.pop() {
        let ref_edge = mesh.triangle_edges(t)[0];
        if !edge_marked[ref_edge] {
            edge_marked[ref_edge] = true;
            queue.extend_from_slice(&mesh.edges[ref_edge].triangles);
        }
    }

    let mut vertices = mesh.vertices.clone();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    for (e, edge) in mesh.edges.iter().enumerate() {
        if edge_marked[e] {
            let [a, b] = edge.vertices;
            let p = vertices[a];
            let q = vertices[b];
            vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            midpoints.insert((a, b), vertices.len() - 1);
        }
    }

    let midpoint = |a: usize, b: usize| midpoints.get(&(a.min(b), a.max(b))).copied();
    let mut triangles = Vec::with_capacity(n_tri + 3 * marked.len() + 16);
    for tri in &mesh.triangles {
        bisect_recursive(*tri, &midpoint, &mut triangles, 2);
    }
    Mesh::from_parts(mesh.rect, vertices, triangles)
}

fn bisect_recursive<F>(tri: [usize; 3], midpoint: &F, out: &mut Vec<[usize; 3]>, depth: usize)
where
    F: Fn(usize, usize) -> Option<usize>,
{
    let [a, b, c] = tri;
    match (depth > 0).then(|| midpoint(b, c)).flatten() {
        Some(m) => {
            bisect_recursive([m, a, b], midpoint, out, depth - 1);
            bisect_recursive([m, c, a], midpoint, out, depth - 1);
        }
        None => out.push(tri),
    }
}

/// Dörfler (bulk) marking: the smallest set `M` with
/// `theta * sum eta^2 <= sum_{T in M} eta_T^2`, chosen greedily by decreasing
/// `eta_T^2` with ties broken by lower index.
pub fn dorfler_mark(etas: &[f64], theta: f64) -> Result<MarkSet> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(DpgError::InvalidParameter(format!(
            "bulk parameter theta = {theta} outside (0, 1]"
        )));
    }
    if let Some(bad) = etas.iter().find(|e| !e.is_finite() || **e < 0.0) {
        return Err(DpgError::InvalidParameter(format!(
            "estimator contribution {bad} is not a finite nonnegative number"
        )));
    }
    let squares: Vec<f64> = etas.iter().map(|e| e * e).collect();
    let total: f64 = squares.iter().sum();
    if total == 0.0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..etas.len()).collect();
    order.sort_by(|&i, &j| squares[j].total_cmp(&squares[i]).then(i.cmp(&j)));

    let target = theta * total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for i in order {
        marked.push(i);
        acc += squares[i];
        if acc >= target {
            break;
        }
    }
    marked.sort_unstable();
    Ok(marked)
}
