//! The broken test space on one triangle and its evaluation tables.
//!
//! Every block is built from one `L2(T)`-orthonormal degree-4 scalar basis
//! `phi_0, ..., phi_14` (hierarchical, so `phi_0..phi_9` span `P3`):
//!
//! | block | range      | function                         |
//! |-------|------------|----------------------------------|
//! | v     | `0..20`    | `e_c phi_i`, index `10 c + i`     |
//! | z     | `20..30`   | `phi_i`                          |
//! | T     | `30..60`   | `E_c phi_i`, index `30 + 10 c + i`|
//! | S     | `60..105`  | `E_c phi_i`, index `60 + 15 c + i`|
//! | Q     | `105..111` | `phi_i K`                        |
//!
//! with the Frobenius-orthonormal symmetric basis `E_0 = e1 e1^T`,
//! `E_1 = (e1 e2^T + e2 e1^T)/sqrt 2`, `E_2 = e2 e2^T` and the skew unit
//! `K = (e1 e2^T - e2 e1^T)/sqrt 2`.

use std::sync::OnceLock;

use crate::basis::{AffineMap, Jet, TriangleBasis};
use crate::error::Result;
use crate::mesh::Mesh;
use crate::quadrature::{GaussRule, TriangleRule};
use crate::tensor::{self, Mat2, Vec2};

pub const V_OFFSET: usize = 0;
pub const Z_OFFSET: usize = 20;
pub const T_OFFSET: usize = 30;
pub const S_OFFSET: usize = 60;
pub const Q_OFFSET: usize = 105;
pub const TEST_DIM: usize = 111;

/// Number of scalar functions per component in each block.
pub const P2_DIM: usize = 6;
pub const P3_DIM: usize = 10;
pub const P4_DIM: usize = 15;

/// Volume quadrature degree: products of two degree-4 test functions.
pub const VOLUME_DEGREE: usize = 8;
/// Gauss points per edge (exact to degree 7).
pub const EDGE_POINTS: usize = 4;

const R2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Symmetric basis tensors `E_c`.
pub const SYM_BASIS: [Mat2; 3] = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, R2], [R2, 0.0]], [[0.0, 0.0], [0.0, 1.0]]];
/// Skew unit tensor `K`.
pub const SKEW_BASIS: Mat2 = [[0.0, R2], [-R2, 0.0]];

/// Reference-element tables shared by all triangles.
#[derive(Debug)]
pub struct ReferenceTables {
    pub volume: TriangleRule,
    /// Degree-4 jets at the volume points.
    pub volume_jets: Vec<Vec<Jet>>,
    pub edge_rule: GaussRule,
    /// `edge_points[j][q]`: reference point of Gauss point `q` on local edge
    /// `j`, parametrized from local vertex `j + 1` to `j + 2`.
    pub edge_points: [Vec<Vec2>; 3],
    pub edge_jets: [Vec<Vec<Jet>>; 3],
    /// Degree-4 jets at the three reference vertices.
    pub vertex_jets: [Vec<Jet>; 3],
    pub basis: TriangleBasis,
}

const REF_VERTICES: [Vec2; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

impl ReferenceTables {
    fn build() -> Result<Self> {
        let basis = TriangleBasis::new(4)?;
        let volume = TriangleRule::new(VOLUME_DEGREE)?;
        let volume_jets = volume.points.iter().map(|p| basis.jets(*p)).collect();
        let edge_rule = GaussRule::new(EDGE_POINTS)?;
        let edge_points: [Vec<Vec2>; 3] = std::array::from_fn(|j| {
            let a = REF_VERTICES[(j + 1) % 3];
            let b = REF_VERTICES[(j + 2) % 3];
            edge_rule
                .points
                .iter()
                .map(|s| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])])
                .collect()
        });
        let edge_jets = std::array::from_fn(|j| edge_points[j].iter().map(|p| basis.jets(*p)).collect());
        let vertex_jets = std::array::from_fn(|i| basis.jets(REF_VERTICES[i]));
        Ok(ReferenceTables { volume, volume_jets, edge_rule, edge_points, edge_jets, vertex_jets, basis })
    }

    /// Process-wide tables, built on first use.
    pub fn get() -> &'static ReferenceTables {
        static TABLES: OnceLock<ReferenceTables> = OnceLock::new();
        TABLES.get_or_init(|| ReferenceTables::build().expect("reference tables are well defined"))
    }
}

/// Geometry of one edge as seen from a triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalEdge {
    /// Global edge index.
    pub edge: usize,
    /// Start and end (global vertex indices) of the counterclockwise traversal.
    pub start: usize,
    pub end: usize,
    pub length: f64,
    /// Counterclockwise unit tangent.
    pub tangent: Vec2,
    /// Outward unit normal `n_T`.
    pub normal: Vec2,
    /// `n_T . nu_E`.
    pub sign: f64,
}

/// Test functions of one triangle evaluated at all quadrature points.
#[derive(Debug, Clone)]
pub struct ElementTests {
    pub triangle: usize,
    pub map: AffineMap,
    pub area: f64,
    pub vertices: [usize; 3],
    pub edges: [LocalEdge; 3],
    /// Physical quadrature points and weights (weights sum to the area).
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
    /// Physical scalar jets at the volume points.
    pub jets: Vec<Vec<Jet>>,
    /// `edge_points[j][q]`, `edge_weights[q]` (scaled by the edge length per edge).
    pub edge_points: [Vec<Vec2>; 3],
    pub edge_weights: [Vec<f64>; 3],
    pub edge_jets: [Vec<Vec<Jet>>; 3],
    /// Jets at the local vertices.
    pub vertex_jets: [Vec<Jet>; 3],
    /// Edge parameters `s in (0, 1)` along each counterclockwise edge.
    pub edge_params: Vec<f64>,
}

impl ElementTests {
    pub fn new(mesh: &Mesh, t: usize) -> Result<Self> {
        let tables = ReferenceTables::get();
        let points3 = mesh.triangle_points(t);
        let map = AffineMap::new(points3)?;
        let area = map.area();
        let scale = 1.0 / (2.0 * area).sqrt();
        let push = |jets: &Vec<Jet>| -> Vec<Jet> { jets.iter().map(|j| map.push_jet(j, scale)).collect() };

        let points = tables.volume.points.iter().map(|p| map.to_physical(*p)).collect();
        let weights = tables.volume.weights.iter().map(|w| w * 2.0 * area).collect();
        let jets = tables.volume_jets.iter().map(push).collect();

        let vertices = mesh.triangles()[t];
        let global_edges = mesh.triangle_edges(t);
        let edges: [LocalEdge; 3] = std::array::from_fn(|j| {
            let start = vertices[(j + 1) % 3];
            let end = vertices[(j + 2) % 3];
            let e = &mesh.edges()[global_edges[j]];
            let d = tensor::sub(mesh.vertices()[end], mesh.vertices()[start]);
            let tangent = tensor::scale(1.0 / e.length, d);
            let normal = [tangent[1], -tangent[0]];
            LocalEdge {
                edge: global_edges[j],
                start,
                end,
                length: e.length,
                tangent,
                normal,
                sign: mesh.edge_sign(t, j),
            }
        });
        let edge_points = std::array::from_fn(|j| {
            tables.edge_points[j].iter().map(|p| map.to_physical(*p)).collect()
        });
        let edge_weights = std::array::from_fn(|j| {
            tables.edge_rule.weights.iter().map(|w| w * edges[j].length).collect()
        });
        let edge_jets = std::array::from_fn(|j| tables.edge_jets[j].iter().map(push).collect());
        let vertex_jets = std::array::from_fn(|i| push(&tables.vertex_jets[i]));
        Ok(ElementTests {
            triangle: t,
            map,
            area,
            vertices,
            edges,
            points,
            weights,
            jets,
            edge_points,
            edge_weights,
            edge_jets,
            vertex_jets,
            edge_params: tables.edge_rule.points.clone(),
        })
    }
}

/// Value of test function `i` of block v (a vector) from scalar jets.
#[inline]
pub fn v_value(jets: &[Jet], i: usize) -> Vec2 {
    let (c, k) = (i / P3_DIM, i % P3_DIM);
    let mut out = [0.0; 2];
    out[c] = jets[k].value;
    out
}

/// Value of tensor test function `i` in block T (`0..30`) or S (`0..45`).
#[inline]
pub fn sym_value(jets: &[Jet], per_component: usize, i: usize) -> Mat2 {
    let (c, k) = (i / per_component, i % per_component);
    tensor::mat_scale(jets[k].value, &SYM_BASIS[c])
}

/// Row-wise divergence of tensor test function `i`.
#[inline]
pub fn sym_div(jets: &[Jet], per_component: usize, i: usize) -> Vec2 {
    let (c, k) = (i / per_component, i % per_component);
    tensor::mat_vec(&SYM_BASIS[c], jets[k].grad)
}

/// `div div` of tensor test function `i`.
#[inline]
pub fn sym_divdiv(jets: &[Jet], per_component: usize, i: usize) -> f64 {
    let (c, k) = (i / per_component, i % per_component);
    tensor::ddot(&SYM_BASIS[c], &jets[k].hess)
}
