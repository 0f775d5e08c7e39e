//! Whitespace-separated data files with a header row.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use koiter_dpg::adaptive::LevelRecord;
use koiter_dpg::reference::ReferenceSolution;

/// Column names of the convergence table, in file order.
pub const CONVERGENCE_COLUMNS: [&str; 9] =
    ["level", "dof", "eta", "err_w", "err_u", "err_M", "err_N", "functional", "elements"];

/// Column names of the per-element field dumps, in file order.
pub const FIELD_COLUMNS: [&str; 14] =
    ["element", "x", "y", "w", "u1", "u2", "N11", "N12", "N21", "N22", "M11", "M12", "M22", "eta"];

/// Scientific notation with 12 fractional digits; missing values are `nan`.
pub fn number(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.12e}"),
        None => "nan".to_string(),
    }
}

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes the header of the convergence table.
pub fn convergence_header<W: Write>(out: &mut W) -> io::Result<()> {
    writeln!(out, "{}", CONVERGENCE_COLUMNS.join(" "))
}

/// Appends one level to the convergence table.
pub fn convergence_row<W: Write>(out: &mut W, record: &LevelRecord) -> io::Result<()> {
    let e = record.errors;
    writeln!(
        out,
        "{} {} {} {} {} {} {} {} {}",
        record.level,
        record.num_dofs(),
        number(Some(record.eta)),
        number(e.map(|e| e.w)),
        number(e.map(|e| e.u)),
        number(e.map(|e| e.m)),
        number(e.map(|e| e.n)),
        number(record.functional),
        record.num_elements()
    )
}

/// Writes `mesh_LL_vertices.dat` and `mesh_LL_triangles.dat`.
pub fn write_mesh(dir: &Path, record: &LevelRecord) -> io::Result<()> {
    let mut v = create(&dir.join(format!("mesh_{:02}_vertices.dat", record.level)))?;
    writeln!(v, "index x y")?;
    record.mesh.write_vertices(&mut v)?;
    v.flush()?;
    let mut t = create(&dir.join(format!("mesh_{:02}_triangles.dat", record.level)))?;
    writeln!(t, "index v0 v1 v2")?;
    record.mesh.write_triangles(&mut t)?;
    t.flush()
}

/// Writes the piecewise constant fields and local estimators of one level
/// to `fields_LL.dat`; `x y` is the element centroid.
pub fn write_fields(dir: &Path, record: &LevelRecord) -> io::Result<()> {
    let mut out = create(&dir.join(format!("fields_{:02}.dat", record.level)))?;
    writeln!(out, "{}", FIELD_COLUMNS.join(" "))?;
    for t in 0..record.mesh.num_triangles() {
        let c = record.mesh.centroid(t);
        let f = record.solution.fields(t);
        let values = [
            c[0],
            c[1],
            f.w,
            f.u[0],
            f.u[1],
            f.n[0][0],
            f.n[0][1],
            f.n[1][0],
            f.n[1][1],
            f.m[0][0],
            f.m[0][1],
            f.m[1][1],
            record.local_eta[t],
        ];
        let row: Vec<String> = values.iter().map(|v| number(Some(*v))).collect();
        writeln!(out, "{t} {}", row.join(" "))?;
    }
    out.flush()
}

/// A line extraction of one membrane force component.
#[derive(Debug, Clone, Copy)]
pub struct LineSpec {
    pub file: &'static str,
    /// Name of the coordinate varying along the line.
    pub coordinate: &'static str,
    pub component: (usize, usize),
    pub from: [f64; 2],
    pub to: [f64; 2],
}

/// Writes `coordinate N_h N_ref` along the line; `N_ref` is `nan` without a
/// reference solution.
pub fn write_line(
    dir: &Path,
    spec: &LineSpec,
    record: &LevelRecord,
    reference: Option<&dyn ReferenceSolution>,
    samples: usize,
) -> io::Result<()> {
    use koiter_dpg::reference::{discrete_line, Component};
    let (i, j) = spec.component;
    let name = format!("N{}{}", i + 1, j + 1);
    let discrete = discrete_line(&record.mesh, &record.solution, spec.from, spec.to, samples, Component(i, j));
    let axis = if spec.coordinate == "x" { 0 } else { 1 };
    let mut out = create(&dir.join(spec.file))?;
    writeln!(out, "{} {name}_h {name}_ref", spec.coordinate)?;
    for (s, value) in discrete {
        let at = [0, 1].map(|a| spec.from[a] + s * (spec.to[a] - spec.from[a]));
        let exact = reference.map(|r| r.fields(at).n[i][j]);
        writeln!(out, "{} {} {}", number(Some(at[axis])), number(Some(value)), number(exact))?;
    }
    out.flush()
}
