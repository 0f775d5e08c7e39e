//! Element Gram matrices of the scaled test norm, element trial-to-test
//! matrices, load vectors and the global normal equations.
//!
//! Per element `G = L L^T`, `W = L^{-1} B`, `g = L^{-1} l`; the element
//! contributes `W^T W` and `W^T g` to the normal equations and
//! `|g - W x|^2` to the squared estimator.

use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use rayon::prelude::*;

use crate::error::{DpgError, Result};
use crate::mesh::Mesh;
use crate::shell::ShellProblem;
use crate::tensor::{self, Mat2};
use crate::testspace::{
    sym_div, sym_divdiv, sym_value, ElementTests, P2_DIM, P3_DIM, P4_DIM, Q_OFFSET, SKEW_BASIS,
    SYM_BASIS, S_OFFSET, TEST_DIM, T_OFFSET, V_OFFSET, Z_OFFSET,
};
use crate::traces::{
    pair_corners, pair_m_hat, pair_n_hat, pair_u_hat, pair_w_hat, Block, DofMap, LocalLayout, FIELD_DOFS,
};

/// Basis of the symmetric moment field: `M = m0 E00 + m1 (E01 + E10) + m2 E11`.
pub const MOMENT_BASIS: [Mat2; 3] = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 1.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 1.0]]];

/// Local field columns.
pub const COL_U: usize = 0;
pub const COL_W: usize = 2;
pub const COL_N: usize = 3;
pub const COL_M: usize = 7;

/// Matrices of one element before factorization.
#[derive(Debug, Clone)]
pub struct ElementSystem {
    pub gram: Mat<f64>,
    pub b: Mat<f64>,
    pub load: Vec<f64>,
}

/// Dense weighted feature matrix `F` with `G = F^T F`.
pub fn element_features(el: &ElementTests, problem: &ShellProblem) -> Mat<f64> {
    let mut f = Mat::<f64>::zeros(FEATURE_ROWS * el.weights.len(), TEST_DIM);
    let mut offset = 0;
    visit_features(el, problem, |wq, rows| {
        let sw = wq.sqrt();
        for (r, row) in rows.iter().enumerate() {
            for &(j, v) in &row.entries {
                f[(offset + r, j)] += sw * v;
            }
        }
        offset += rows.len();
    });
    f
}

/// Weights `E` with `F^T E` equal to the field columns of the trial-to-test
/// matrix: every field pairing is a pointwise combination of feature rows.
pub fn element_field_map(el: &ElementTests, problem: &ShellProblem) -> Mat<f64> {
    let d = problem.d;
    let big_d = problem.scalings.length;
    let cd = problem.scalings.c_disp;
    let r2 = std::f64::consts::SQRT_2;
    let scale_m = 12.0 / (d * d);
    let mut c = Mat::<f64>::zeros(FEATURE_ROWS, FIELD_DOFS);
    for comp in 0..2 {
        for r in 0..2 {
            c[(13 + r, COL_U + comp)] = cd[comp][r] / big_d;
        }
    }
    c[(18, COL_W)] = d / (big_d * big_d);
    for r in 0..2 {
        for s in 0..2 {
            c[(2 + 2 * r + s, COL_N + 2 * r + s)] = 1.0;
            for comp in 0..3 {
                c[(10 + comp, COL_N + 2 * r + s)] = problem.apply_cinv(&SYM_BASIS[comp])[r][s];
            }
        }
    }
    for (m, basis) in MOMENT_BASIS.iter().enumerate() {
        for comp in 0..3 {
            c[(15 + comp, COL_M + m)] = d * scale_m * tensor::ddot(&problem.apply_cinv(&SYM_BASIS[comp]), basis);
        }
        c[(7, COL_M + m)] = basis[0][0] / d;
        c[(8, COL_M + m)] = (basis[0][1] + basis[1][0]) / (d * r2);
        c[(9, COL_M + m)] = basis[1][1] / d;
    }
    let nq = el.weights.len();
    Mat::<f64>::from_fn(FEATURE_ROWS * nq, FIELD_DOFS, |i, j| el.weights[i / FEATURE_ROWS].sqrt() * c[(i % FEATURE_ROWS, j)])
}

/// Smallest admissible pivot of the equilibrated Cholesky factor; below it
/// the factor is recomputed from a QR decomposition of the feature matrix.
const MIN_PIVOT: f64 = 1e-7;

/// Whitened element system: `w = L^{-1} B`, `g = L^{-1} l` with `G = L L^T`.
#[derive(Debug, Clone)]
pub struct FactoredElement {
    pub w: Mat<f64>,
    pub g: Vec<f64>,
}

/// Sparse accumulation of one row of the test-norm feature map.
struct Row {
    entries: Vec<(usize, f64)>,
}

impl Row {
    fn new() -> Self {
        Row { entries: Vec::with_capacity(80) }
    }

    #[inline]
    fn push(&mut self, col: usize, value: f64) {
        if value != 0.0 {
            self.entries.push((col, value));
        }
    }
}

/// Number of feature rows per quadrature point.
const FEATURE_ROWS: usize = 20;

/// Calls `visit(weight, rows)` at every quadrature point with the sparse rows
/// `F` of the test norm, so that `|(v, z, T, S, Q)|^2 = sum w |F c|^2`.
fn visit_features(el: &ElementTests, problem: &ShellProblem, mut visit: impl FnMut(f64, &[Row])) {
    let d = problem.d;
    let sc = &problem.scalings;
    let big_d = sc.length;
    let cd = sc.c_disp;
    let cd_inv = tensor::inverse(&cd).expect("validated C_disp");
    let b = problem.b;
    let sqrt_cq = sc.c_q.sqrt();
    let r2 = std::f64::consts::SQRT_2;

    let mut rows: Vec<Row> = (0..FEATURE_ROWS).map(|_| Row::new()).collect();
    for (jets, &wq) in el.jets.iter().zip(&el.weights) {
        for row in rows.iter_mut() {
            row.entries.clear();
        }
        let mut next = 0;
        let mut take = || {
            next += 1;
            next - 1
        };
        // D^{-1} C_disp v
        for r in 0..2 {
            let row = take();
            for c in 0..2 {
                for i in 0..P3_DIM {
                    rows[row].push(V_OFFSET + c * P3_DIM + i, cd[r][c] * jets[i].value / big_d);
                }
            }
        }
        // grad v - B z + Q
        for r in 0..2 {
            for s in 0..2 {
                let row = take();
                for i in 0..P3_DIM {
                    rows[row].push(V_OFFSET + r * P3_DIM + i, jets[i].grad[s]);
                    rows[row].push(Z_OFFSET + i, -b[r][s] * jets[i].value);
                }
                for i in 0..P2_DIM {
                    rows[row].push(Q_OFFSET + i, SKEW_BASIS[r][s] * jets[i].value);
                }
            }
        }
        // d D^{-2} z
        let row = take();
        for i in 0..P3_DIM {
            rows[row].push(Z_OFFSET + i, d * jets[i].value / (big_d * big_d));
        }
        // d eps(grad z)
        for (r, s, f) in [(0, 0, 1.0), (0, 1, r2), (1, 1, 1.0)] {
            let row = take();
            for i in 0..P3_DIM {
                rows[row].push(Z_OFFSET + i, d * f * jets[i].hess[r][s]);
            }
        }
        // T
        for c in 0..3 {
            let row = take();
            for i in 0..P3_DIM {
                rows[row].push(T_OFFSET + c * P3_DIM + i, jets[i].value);
            }
        }
        // D C_disp^{-1} div T
        for r in 0..2 {
            let row = take();
            for i in 0..3 * P3_DIM {
                let div = sym_div(jets, P3_DIM, i);
                rows[row].push(T_OFFSET + i, big_d * (cd_inv[r][0] * div[0] + cd_inv[r][1] * div[1]));
            }
        }
        // d^{-1} S
        for c in 0..3 {
            let row = take();
            for i in 0..P4_DIM {
                rows[row].push(S_OFFSET + c * P4_DIM + i, jets[i].value / d);
            }
        }
        // d^{-1} D^2 (div div S - B : T)
        let row = take();
        let f = big_d * big_d / d;
        for i in 0..3 * P4_DIM {
            rows[row].push(S_OFFSET + i, f * sym_divdiv(jets, P4_DIM, i));
        }
        for i in 0..3 * P3_DIM {
            rows[row].push(T_OFFSET + i, -f * tensor::ddot(&b, &sym_value(jets, P3_DIM, i)));
        }
        // sqrt(c_Q) Q
        let row = take();
        for i in 0..P2_DIM {
            rows[row].push(Q_OFFSET + i, sqrt_cq * jets[i].value);
        }
        debug_assert_eq!(next, rows.len());
        visit(wq, &rows);
    }
}

/// Gram matrix of the scaled test norm on one element.
pub fn element_gram(el: &ElementTests, problem: &ShellProblem) -> Mat<f64> {
    let mut g = Mat::<f64>::zeros(TEST_DIM, TEST_DIM);
    visit_features(el, problem, |wq, rows| {
        for row in rows {
            for &(i, vi) in &row.entries {
                let wi = wq * vi;
                for &(j, vj) in &row.entries {
                    if j <= i {
                        g[(i, j)] += wi * vj;
                    }
                }
            }
        }
    });
    for i in 0..TEST_DIM {
        for j in 0..i {
            g[(j, i)] = g[(i, j)];
        }
    }
    g
}

/// Trial-to-test matrix: rows are test functions, columns the local
/// unknowns of [`LocalLayout`].
pub fn element_b(el: &ElementTests, problem: &ShellProblem, layout: &LocalLayout, k: usize) -> Mat<f64> {
    let mut bm = Mat::<f64>::zeros(TEST_DIM, layout.len);
    let scale_m = 12.0 / (problem.d * problem.d);
    let b = problem.b;

    for (jets, &wq) in el.jets.iter().zip(&el.weights) {
        for i in 0..3 * P3_DIM {
            let row = T_OFFSET + i;
            let t = sym_value(jets, P3_DIM, i);
            let div = sym_div(jets, P3_DIM, i);
            let cinv_t = problem.apply_cinv(&t);
            bm[(row, COL_U)] += wq * div[0];
            bm[(row, COL_U + 1)] += wq * div[1];
            bm[(row, COL_W)] -= wq * tensor::ddot(&b, &t);
            for r in 0..2 {
                for s in 0..2 {
                    bm[(row, COL_N + 2 * r + s)] += wq * cinv_t[r][s];
                }
            }
        }
        for i in 0..3 * P4_DIM {
            let row = S_OFFSET + i;
            bm[(row, COL_W)] += wq * sym_divdiv(jets, P4_DIM, i);
            let cinv_s = problem.apply_cinv(&sym_value(jets, P4_DIM, i));
            for (m, basis) in MOMENT_BASIS.iter().enumerate() {
                bm[(row, COL_M + m)] += wq * scale_m * tensor::ddot(&cinv_s, basis);
            }
        }
        for c in 0..2 {
            for i in 0..P3_DIM {
                let row = V_OFFSET + c * P3_DIM + i;
                for s in 0..2 {
                    bm[(row, COL_N + 2 * c + s)] += wq * jets[i].grad[s];
                }
            }
        }
        for i in 0..P3_DIM {
            let row = Z_OFFSET + i;
            for r in 0..2 {
                for s in 0..2 {
                    bm[(row, COL_N + 2 * r + s)] -= wq * b[r][s] * jets[i].value;
                }
            }
            for (m, basis) in MOMENT_BASIS.iter().enumerate() {
                bm[(row, COL_M + m)] += wq * tensor::ddot(&jets[i].hess, basis);
            }
        }
        for i in 0..P2_DIM {
            let row = Q_OFFSET + i;
            for r in 0..2 {
                for s in 0..2 {
                    bm[(row, COL_N + 2 * r + s)] += wq * SKEW_BASIS[r][s] * jets[i].value;
                }
            }
        }
    }

    let scatter = |bm: &mut Mat<f64>, block: &Block, row0: usize, col0: usize, sign: f64| {
        for r in 0..block.rows {
            for c in 0..block.cols {
                bm[(row0 + r, col0 + c)] += sign * block.get(r, c);
            }
        }
    };
    scatter(&mut bm, &pair_u_hat(el, k), T_OFFSET, layout.u_hat, -1.0);
    scatter(&mut bm, &pair_w_hat(el), S_OFFSET, layout.w_hat, -1.0);
    scatter(&mut bm, &pair_n_hat(el), V_OFFSET, layout.n_hat, -1.0);
    scatter(&mut bm, &pair_m_hat(el), Z_OFFSET, layout.m_hat, 1.0);
    if layout.n_corner > 0 {
        scatter(&mut bm, &pair_corners(el), Z_OFFSET, layout.corner, 1.0);
    }
    bm
}

/// Triangle carrying a point load at `at`: the lowest-index triangle having
/// `at` as a vertex, with the local vertex number.
pub fn point_load_element(mesh: &Mesh, at: tensor::Vec2) -> Result<(usize, usize)> {
    let v = mesh.find_vertex(at).ok_or_else(|| {
        DpgError::Configuration(format!("point load location {at:?} is not a mesh vertex"))
    })?;
    let t = *mesh
        .triangles_at_vertex(v)
        .first()
        .ok_or_else(|| DpgError::InvalidGeometry(format!("vertex {v} has no triangles")))?;
    let local = mesh.triangles()[t].iter().position(|&x| x == v).expect("vertex of triangle");
    Ok((t, local))
}

/// Load vector `(p, v) - (f, z)`. `point` names the local vertex carrying the
/// point load if this element is the designated one.
pub fn element_load(el: &ElementTests, problem: &ShellProblem, point: Option<usize>) -> Vec<f64> {
    let mut l = vec![0.0; TEST_DIM];
    for ((jets, &wq), x) in el.jets.iter().zip(&el.weights).zip(&el.points) {
        let (f, p) = problem.load.distributed(*x);
        if f == 0.0 && p[0] == 0.0 && p[1] == 0.0 {
            continue;
        }
        for i in 0..P3_DIM {
            let phi = jets[i].value;
            l[V_OFFSET + i] += wq * p[0] * phi;
            l[V_OFFSET + P3_DIM + i] += wq * p[1] * phi;
            l[Z_OFFSET + i] -= wq * f * phi;
        }
    }
    if let (Some(a), Some((_, weight))) = (point, problem.load.point()) {
        for i in 0..P3_DIM {
            l[Z_OFFSET + i] -= weight * el.vertex_jets[a][i].value;
        }
    }
    l
}

impl ElementSystem {
    pub fn new(
        mesh: &Mesh,
        problem: &ShellProblem,
        dofmap: &DofMap,
        t: usize,
        point: Option<(usize, usize)>,
    ) -> Result<Self> {
        let el = ElementTests::new(mesh, t)?;
        Ok(Self::from_tests(&el, problem, dofmap, t, point))
    }

    fn from_tests(
        el: &ElementTests,
        problem: &ShellProblem,
        dofmap: &DofMap,
        t: usize,
        point: Option<(usize, usize)>,
    ) -> Self {
        let gram = element_gram(el, problem);
        let b = element_b(el, problem, &dofmap.layout, dofmap.options.k);
        let local_point = point.and_then(|(t0, a)| (t0 == t).then_some(a));
        let load = element_load(el, problem, local_point);
        ElementSystem { gram, b, load }
    }

    /// Builds and factors the system of element `t`. Poorly conditioned Gram
    /// matrices are factored through a QR decomposition of the features.
    pub fn factored(
        mesh: &Mesh,
        problem: &ShellProblem,
        dofmap: &DofMap,
        t: usize,
        point: Option<(usize, usize)>,
    ) -> Result<FactoredElement> {
        let el = ElementTests::new(mesh, t)?;
        let sys = Self::from_tests(&el, problem, dofmap, t, point);
        let scale = sys.equilibration(t)?;
        let scaled = Mat::<f64>::from_fn(TEST_DIM, TEST_DIM, |i, j| scale[i] * sys.gram[(i, j)] * scale[j]);
        if let Ok(llt) = scaled.llt(Side::Lower) {
            let l = llt.L();
            if (0..TEST_DIM).all(|i| l[(i, i)] >= MIN_PIVOT) {
                return Ok(sys.whiten(l, &scale));
            }
        }
        // With S F^T = R^T Q^T, the field columns L^{-1} S F^T E are Q^T E;
        // taking them from Q avoids amplifying rounding errors by L^{-1}.
        let f = element_features(&el, problem);
        let scaled_f = Mat::<f64>::from_fn(f.nrows(), TEST_DIM, |i, j| f[(i, j)] * scale[j]);
        let qr = scaled_f.qr();
        let r = qr.thin_R();
        if (0..TEST_DIM).any(|i| !(r[(i, i)].abs() > 0.0)) {
            return Err(DpgError::SingularGram { element: t });
        }
        let l = r.transpose().to_owned();
        let mut factored = sys.whiten(l.as_ref(), &scale);
        let fields = qr.compute_thin_Q().transpose() * element_field_map(&el, problem);
        factored.w.submatrix_mut(0, 0, TEST_DIM, FIELD_DOFS).copy_from(&fields);
        Ok(factored)
    }

    fn equilibration(&self, element: usize) -> Result<Vec<f64>> {
        (0..self.gram.nrows())
            .map(|i| {
                let gii = self.gram[(i, i)];
                if gii > 0.0 && gii.is_finite() {
                    Ok(1.0 / gii.sqrt())
                } else {
                    Err(DpgError::SingularGram { element })
                }
            })
            .collect()
    }

    /// `W = L^{-1} S B`, `g = L^{-1} S l` for the factor `L` of `S G S`.
    fn whiten(&self, l: faer::MatRef<'_, f64>, scale: &[f64]) -> FactoredElement {
        let n = self.gram.nrows();
        let mut w = Mat::<f64>::from_fn(n, self.b.ncols(), |i, j| scale[i] * self.b[(i, j)]);
        faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, w.as_mut(), faer::Par::Seq);
        let mut g = Mat::<f64>::from_fn(n, 1, |i, _| scale[i] * self.load[i]);
        faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, g.as_mut(), faer::Par::Seq);
        FactoredElement { w, g: (0..n).map(|i| g[(i, 0)]).collect() }
    }

    /// Cholesky factorization after symmetric diagonal equilibration.
    pub fn factor(&self, element: usize) -> Result<FactoredElement> {
        let n = self.gram.nrows();
        let scale = self.equilibration(element)?;
        let scaled = Mat::<f64>::from_fn(n, n, |i, j| scale[i] * self.gram[(i, j)] * scale[j]);
        let llt = scaled.llt(Side::Lower).map_err(|_| DpgError::SingularGram { element })?;
        Ok(self.whiten(llt.L(), &scale))
    }
}

impl FactoredElement {
    /// `W^T W` and `W^T g`.
    pub fn normal_equations(&self) -> (Mat<f64>, Vec<f64>) {
        let a = self.w.transpose() * &self.w;
        let m = self.w.ncols();
        let rhs = (0..m)
            .map(|j| (0..self.w.nrows()).map(|i| self.w[(i, j)] * self.g[i]).sum())
            .collect();
        (a, rhs)
    }

    /// Squared local estimator `|g - W x|^2`.
    pub fn residual_squared(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.w.nrows() {
            let mut r = self.g[i];
            for (j, xj) in x.iter().enumerate() {
                r -= self.w[(i, j)] * xj;
            }
            acc += r * r;
        }
        acc
    }
}

/// Global normal equations on the free dofs.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    /// Lower triangle (including the diagonal) of the symmetric matrix.
    pub lower: SparseColMat<usize, f64>,
    pub rhs: Vec<f64>,
}

impl NormalEquations {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// Dense symmetric copy, for tests and small problems.
    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.dim();
        let mut a = self.lower.to_dense();
        for j in 0..n {
            for i in 0..j {
                a[(i, j)] = a[(j, i)];
            }
        }
        a
    }

    /// `y = A x` using the stored lower triangle.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        let sym = self.lower.symbolic();
        let values = self.lower.val();
        for j in 0..self.dim() {
            let range = sym.col_range(j);
            for (i, v) in sym.row_idx()[range.clone()].iter().zip(&values[range]) {
                y[*i] += v * x[j];
                if *i != j {
                    y[j] += v * x[*i];
                }
            }
        }
        y
    }
}

/// Builds the element systems of all triangles and assembles the normal
/// equations over the free dofs.
pub fn assemble(mesh: &Mesh, problem: &ShellProblem, dofmap: &DofMap) -> Result<NormalEquations> {
    let point = point_location(mesh, problem)?;
    let n = dofmap.num_free();

    // Fixed-size chunks collected in order keep the summation order, and
    // hence the result, independent of the thread schedule.
    const CHUNK: usize = 64;
    let nt = mesh.num_triangles();
    let chunks = (0..nt.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| -> Result<(Vec<Triplet<usize, usize, f64>>, Vec<(usize, f64)>)> {
            let mut triplets = Vec::new();
            let mut rhs = Vec::new();
            for t in c * CHUNK..((c + 1) * CHUNK).min(nt) {
                let (a, r) = ElementSystem::factored(mesh, problem, dofmap, t, point)?.normal_equations();
                let free: Vec<Option<usize>> =
                    dofmap.element_dofs(mesh, t).iter().map(|&g| dofmap.free_index(g)).collect();
                for (lj, gj) in free.iter().enumerate() {
                    let Some(gj) = *gj else { continue };
                    rhs.push((gj, r[lj]));
                    for (li, gi) in free.iter().enumerate() {
                        if let Some(gi) = *gi {
                            if gi >= gj {
                                triplets.push(Triplet::new(gi, gj, a[(li, lj)]));
                            }
                        }
                    }
                }
            }
            Ok((triplets, rhs))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rhs = vec![0.0; n];
    let mut triplets = Vec::with_capacity(chunks.iter().map(|c| c.0.len()).sum());
    for (t, r) in chunks {
        triplets.extend(t);
        for (i, v) in r {
            rhs[i] += v;
        }
    }
    let lower = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| DpgError::Solver(format!("sparse assembly failed: {e:?}")))?;
    Ok(NormalEquations { lower, rhs })
}

/// Triangle and local vertex carrying the point load, if any.
pub fn point_location(mesh: &Mesh, problem: &ShellProblem) -> Result<Option<(usize, usize)>> {
    problem.load.point().map(|(at, _)| point_load_element(mesh, at)).transpose()
}

/// Restriction of a global coefficient vector to the unknowns of triangle `t`.
pub fn local_coefficients(mesh: &Mesh, dofmap: &DofMap, x: &[f64], t: usize) -> Vec<f64> {
    dofmap.element_dofs(mesh, t).iter().map(|&g| x[g]).collect()
}
